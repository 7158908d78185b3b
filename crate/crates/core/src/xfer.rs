//! Rational transfer functions in the s- or z-domain.
//!
//! No pole/zero cancellation is ever applied implicitly. Loops assembled by
//! `series` keep every factor, so an unstable inner-loop pole stays visible
//! inside an outer open loop. Use [`RationalTF::minreal`] to reduce.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;

/// Poles within this distance of the stability boundary are marginal.
pub const BOUNDARY_TOL: f64 = 1e-9;

pub const DEFAULT_GRID_POINTS: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Continuous,
    Discrete { sample_time: f64 },
}

impl Domain {
    pub fn discrete(sample_time: f64) -> Result<Self> {
        if !(sample_time > 0.0 && sample_time.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "sample time must be positive, got {sample_time}"
            )));
        }
        Ok(Domain::Discrete { sample_time })
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Domain::Discrete { .. })
    }

    pub fn sample_time(&self) -> Option<f64> {
        match *self {
            Domain::Continuous => None,
            Domain::Discrete { sample_time } => Some(sample_time),
        }
    }

    /// Nyquist frequency in rad/s; infinite for continuous time.
    pub fn nyquist(&self) -> f64 {
        match *self {
            Domain::Continuous => f64::INFINITY,
            Domain::Discrete { sample_time } => PI / sample_time,
        }
    }

    /// `j*omega` or `exp(j*omega*Ts)`.
    pub fn frequency_point(&self, omega: f64) -> Complex64 {
        match *self {
            Domain::Continuous => Complex64::new(0.0, omega),
            Domain::Discrete { sample_time } => Complex64::from_polar(1.0, omega * sample_time),
        }
    }

    /// Signed distance of a pole from the stability boundary; positive is unstable.
    pub fn stability_margin_of(&self, pole: Complex64) -> f64 {
        match self {
            Domain::Continuous => pole.re,
            Domain::Discrete { .. } => pole.norm() - 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RationalTF {
    num: Polynomial,
    den: Polynomial,
    domain: Domain,
}

/// Poles of a transfer function split by location relative to the stability boundary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PoleClassification {
    pub stable: Vec<Complex64>,
    pub marginal: Vec<Complex64>,
    pub unstable: Vec<Complex64>,
}

/// Open loop, sensitivity and complementary sensitivity of one loop.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopSet {
    pub open_loop: RationalTF,
    pub sensitivity: RationalTF,
    pub complementary: RationalTF,
    pub label: String,
}

impl LoopSet {
    pub fn domain(&self) -> Domain {
        self.open_loop.domain
    }
}

impl RationalTF {
    pub fn new(num: Polynomial, den: Polynomial, domain: Domain) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        Ok(RationalTF { num, den, domain })
    }

    /// Real coefficients, lowest degree first.
    pub fn from_real(num: &[f64], den: &[f64], domain: Domain) -> Result<Self> {
        Self::new(
            Polynomial::from_real(num),
            Polynomial::from_real(den),
            domain,
        )
    }

    pub fn gain(k: f64, domain: Domain) -> Self {
        RationalTF {
            num: Polynomial::from_real(&[k]),
            den: Polynomial::one(),
            domain,
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// `deg(den) - deg(num)`; the zero function counts as infinitely proper.
    pub fn relative_degree(&self) -> isize {
        if self.num.is_zero() {
            return isize::MAX;
        }
        self.den.degree() as isize - self.num.degree() as isize
    }

    pub fn evaluate(&self, x: Complex64) -> Result<Complex64> {
        let d = self.den.eval(x);
        let guard = f64::EPSILON
            * self
                .den
                .coeffs()
                .iter()
                .rev()
                .fold(0.0, |acc, c| acc * x.norm() + c.norm());
        if d.norm() <= guard {
            return Err(Error::PoleHit { re: x.re, im: x.im });
        }
        Ok(self.num.eval(x) / d)
    }

    fn check_domain(&self, other: &RationalTF) -> Result<()> {
        if self.domain == other.domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    pub fn series(&self, other: &RationalTF) -> Result<RationalTF> {
        self.check_domain(other)?;
        RationalTF::new(&self.num * &other.num, &self.den * &other.den, self.domain)
    }

    pub fn parallel(&self, other: &RationalTF) -> Result<RationalTF> {
        self.check_domain(other)?;
        let num = &(&self.num * &other.den) + &(&other.num * &self.den);
        RationalTF::new(num, &self.den * &other.den, self.domain)
    }

    pub fn scale(&self, k: f64) -> RationalTF {
        RationalTF {
            num: self.num.scale(Complex64::new(k, 0.0)),
            den: self.den.clone(),
            domain: self.domain,
        }
    }

    /// Closes a unity negative-feedback loop around `self` as the open loop.
    ///
    /// S and T share the denominator `den(L) + num(L)`, so `S + T = 1`
    /// holds coefficient-for-coefficient.
    pub fn sensitivity_from_open_loop(&self, label: impl Into<String>) -> Result<LoopSet> {
        let closed = &self.den + &self.num;
        if closed.is_zero() {
            return Err(Error::DegenerateLoop);
        }
        Ok(LoopSet {
            open_loop: self.clone(),
            sensitivity: RationalTF::new(self.den.clone(), closed.clone(), self.domain)?,
            complementary: RationalTF::new(self.num.clone(), closed, self.domain)?,
            label: label.into(),
        })
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        self.den.roots()
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        if self.num.is_zero() {
            return Ok(Vec::new());
        }
        self.num.roots()
    }

    pub fn classify_poles(&self) -> Result<PoleClassification> {
        let mut out = PoleClassification::default();
        for p in self.poles()? {
            let m = self.domain.stability_margin_of(p);
            if m.abs() <= BOUNDARY_TOL {
                out.marginal.push(p);
            } else if m > 0.0 {
                out.unstable.push(p);
            } else {
                out.stable.push(p);
            }
        }
        Ok(out)
    }

    /// Strictly unstable poles; boundary poles are reported by [`Self::marginal_poles`].
    pub fn unstable_poles(&self) -> Result<Vec<Complex64>> {
        Ok(self.classify_poles()?.unstable)
    }

    pub fn marginal_poles(&self) -> Result<Vec<Complex64>> {
        Ok(self.classify_poles()?.marginal)
    }

    pub fn frequency_response(&self, grid: &[f64]) -> Result<FrequencyResponse> {
        validate_grid(grid, self.domain)?;
        let values: Vec<Option<Complex64>> = grid
            .par_iter()
            .map(|&w| self.evaluate(self.domain.frequency_point(w)).ok())
            .collect();
        Ok(FrequencyResponse {
            grid: grid.to_vec(),
            values,
            domain: self.domain,
        })
    }

    /// `lim_{s -> inf} s L(s)`.
    pub fn limit_s_times_at_infinity(&self) -> Result<f64> {
        match self.relative_degree() {
            r if r <= 0 => Err(self.improper()),
            1 => Ok((self.num.leading() / self.den.leading()).re),
            _ => Ok(0.0),
        }
    }

    /// `lim_{x -> inf} L(x)`.
    pub fn limit_at_infinity(&self) -> Result<Complex64> {
        match self.relative_degree() {
            r if r < 0 => Err(self.improper()),
            0 => Ok(self.num.leading() / self.den.leading()),
            _ => Ok(Complex64::new(0.0, 0.0)),
        }
    }

    fn improper(&self) -> Error {
        Error::ImproperTF {
            num: self.num.degree(),
            den: self.den.degree(),
        }
    }

    /// First `count` coefficients `h_k` of the expansion `sum_k h_k x^{-k}`.
    ///
    /// For a discrete transfer function these are the impulse-response samples.
    pub fn expansion_at_infinity(&self, count: usize) -> Result<Vec<Complex64>> {
        let rel = self.relative_degree();
        if rel < 0 {
            return Err(self.improper());
        }
        let zero = Complex64::new(0.0, 0.0);
        if self.num.is_zero() {
            return Ok(vec![zero; count]);
        }
        let n = self.den.degree();
        let m = self.num.degree();
        // reversed coefficients are power series in w = 1/x
        let d: Vec<Complex64> = self.den.coeffs().iter().rev().copied().collect();
        let nn: Vec<Complex64> = self.num.coeffs().iter().rev().copied().collect();
        let shift = n - m;
        let mut out = vec![zero; count];
        for k in shift..count {
            let i = k - shift;
            let mut acc = nn.get(i).copied().unwrap_or(zero);
            for j in 1..=n.min(i) {
                acc -= d[j] * out[k - j];
            }
            out[k] = acc / d[0];
        }
        Ok(out)
    }

    /// Cancel pole/zero pairs closer than `tol`.
    pub fn minreal(&self, tol: f64) -> Result<RationalTF> {
        if self.num.is_zero() {
            return RationalTF::new(Polynomial::zero(), Polynomial::one(), self.domain);
        }
        let mut zeros = self.zeros()?;
        let mut poles = self.poles()?;
        let mut i = 0;
        while i < zeros.len() {
            let hit = poles
                .iter()
                .enumerate()
                .map(|(j, p)| (j, (p - zeros[i]).norm()))
                .filter(|&(_, d)| d <= tol)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((j, _)) = hit {
                poles.swap_remove(j);
                zeros.swap_remove(i);
            } else {
                i += 1;
            }
        }
        let gain = self.num.leading() / self.den.leading();
        let mut num = Polynomial::from_roots(&zeros, gain);
        let mut den = Polynomial::from_roots(&poles, Complex64::new(1.0, 0.0));
        if self.num.is_real() && self.den.is_real() {
            num = real_part(&num);
            den = real_part(&den);
        }
        RationalTF::new(num, den, self.domain)
    }
}

fn real_part(p: &Polynomial) -> Polynomial {
    Polynomial::new(
        p.coeffs()
            .iter()
            .map(|c| Complex64::new(c.re, 0.0))
            .collect(),
    )
}

fn validate_grid(grid: &[f64], domain: Domain) -> Result<()> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid(
            "frequencies must be strictly increasing".into(),
        ));
    }
    if let Some(&first) = grid.first() {
        let last = *grid.last().unwrap();
        if domain.is_discrete() {
            let nyq = domain.nyquist();
            if !(first > 0.0) || last > nyq * (1.0 + 1e-12) {
                return Err(Error::InvalidGrid(format!(
                    "discrete grid must lie in (0, {nyq}]"
                )));
            }
        } else if !(first >= 0.0) || !last.is_finite() {
            return Err(Error::InvalidGrid(
                "continuous grid must be finite and >= 0".into(),
            ));
        }
    }
    Ok(())
}

/// `n` logarithmically spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::InvalidGrid(format!(
            "log grid needs 0 < lo < hi and n >= 2 (got {lo}, {hi}, {n})"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect();
    g[0] = lo;
    g[n - 1] = hi;
    Ok(g)
}

/// Default logarithmic grid spanning four decades either side of `corner`,
/// capped at Nyquist for discrete domains.
pub fn default_grid(domain: Domain, corner: f64) -> Result<Vec<f64>> {
    let lo = corner * 1e-4;
    let hi = (corner * 1e4).min(domain.nyquist());
    log_grid(lo, hi, DEFAULT_GRID_POINTS)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyResponse {
    pub grid: Vec<f64>,
    /// `None` where the evaluation point coincided with a pole.
    pub values: Vec<Option<Complex64>>,
    pub domain: Domain,
}

impl FrequencyResponse {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v.map_or(f64::INFINITY, |c| c.norm()))
            .collect()
    }

    pub fn magnitude_db(&self) -> Vec<f64> {
        self.magnitude()
            .into_iter()
            .map(|m| 20.0 * m.log10())
            .collect()
    }

    pub fn phase_deg(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v.map_or(f64::NAN, |c| c.arg().to_degrees()))
            .collect()
    }

    pub fn pole_hits(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(i, _)| i)
            .collect()
    }
}
