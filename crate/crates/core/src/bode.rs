//! Sensitivity (Bode) integrals for continuous and discrete loops.
//!
//! Continuous, for a stable closed loop with open loop `L` of relative degree >= 1:
//!
//! ```text
//! int_0^inf ln|S(jw)| dw = pi * sum Re(p_u) - (pi/2) lim_{s->inf} s L(s)
//! ```
//!
//! Discrete, with `theta = w Ts`:
//!
//! ```text
//! int_{-pi}^{pi} ln|S(e^{j theta})| d theta = 2 pi (sum ln|p_u| - ln|1 + lim_{z->inf} L(z)|)
//! ```
//!
//! `p_u` are the strictly unstable open-loop poles. The left-hand sides are
//! computed by quadrature, the right-hand sides from poles and limits.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};
use crate::xfer::{Domain, LoopSet, RationalTF, BOUNDARY_TOL};

/// Zeros of S closer than this to the boundary are treated as log singularities.
const SINGULAR_TOL: f64 = 1e-6;
/// Geometric refinement toward a singularity stops once the remaining
/// neighbourhood contributes less than this.
const SINGULAR_PANEL_TOL: f64 = 1e-8;
const TAIL_TERMS: usize = 8;
const CUTOFF_FACTOR: f64 = 1e4;
const TAIL_REL_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodeOptions {
    pub quad: QuadOptions,
    /// Grid used for the peak search and to locate |S| = 1 crossings.
    pub scan_points: usize,
}

impl Default for BodeOptions {
    fn default() -> Self {
        BodeOptions {
            quad: QuadOptions::default(),
            scan_points: 4096,
        }
    }
}

impl BodeOptions {
    /// Tighter tolerances and a denser scan, for refinement checks.
    pub fn refined(&self) -> Self {
        BodeOptions {
            quad: QuadOptions {
                abs_tol: self.quad.abs_tol / 2.0,
                rel_tol: self.quad.rel_tol / 2.0,
                max_panels: self.quad.max_panels * 2,
            },
            scan_points: self.scan_points * 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodeReport {
    pub label: String,
    pub domain: Domain,
    pub lhs_numeric: f64,
    pub rhs_analytic: f64,
    pub gap: f64,
    /// `pi sum Re(p_u)` (continuous) or `2 pi sum ln|p_u|` (discrete).
    pub unstable_pole_term: f64,
    /// `-(pi/2) lim s L` (continuous) or `-2 pi ln|1 + lim L|` (discrete).
    pub limit_term: f64,
    pub peak_sensitivity: f64,
    /// rad/s
    pub peak_frequency: f64,
    pub attenuation_area: f64,
    pub amplification_area: f64,
    pub quadrature_error: f64,
    pub unstable_open_loop_poles: usize,
}

/// Dispatches on the loop's domain.
pub fn bode_integral(loop_set: &LoopSet, opts: &BodeOptions) -> Result<BodeReport> {
    let mut report = match loop_set.domain() {
        Domain::Continuous => {
            continuous_bode_integral(&loop_set.sensitivity, &loop_set.open_loop, opts)
        }
        Domain::Discrete { .. } => {
            discrete_bode_integral(&loop_set.sensitivity, &loop_set.open_loop, opts)
        }
    }?;
    report.label = loop_set.label.clone();
    Ok(report)
}

fn require_stable_closed_loop(s: &RationalTF) -> Result<()> {
    let cls = s.classify_poles()?;
    if let Some(p) = cls.marginal.first() {
        return Err(Error::MarginalPole { re: p.re, im: p.im });
    }
    if let Some(p) = cls.unstable.first() {
        return Err(Error::UnstableClosedLoop { re: p.re, im: p.im });
    }
    Ok(())
}

/// `ln|S(x)|` in factored form. Expanded polynomials lose every digit near
/// a repeated zero (for example `(z-1)^2` at small angles), the product of
/// root distances does not.
struct LogMagnitude {
    ln_gain: f64,
    zeros: Vec<Complex64>,
    poles: Vec<Complex64>,
}

impl LogMagnitude {
    fn new(s: &RationalTF) -> Result<Self> {
        if s.num().is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        Ok(LogMagnitude {
            ln_gain: (s.num().leading().norm() / s.den().leading().norm()).ln(),
            zeros: s.zeros()?,
            poles: s.poles()?,
        })
    }

    fn eval(&self, x: Complex64) -> f64 {
        let z: f64 = self.zeros.iter().map(|r| (x - r).norm().ln()).sum();
        let p: f64 = self.poles.iter().map(|r| (x - r).norm().ln()).sum();
        self.ln_gain + z - p
    }
}

/// Sign-split integration over consecutive panels. Breakpoints must include
/// every |S| = 1 crossing so each panel has one sign.
struct Split {
    total: f64,
    negative: f64,
    positive: f64,
    error: f64,
}

fn integrate_split<F: Fn(f64) -> f64 + Sync>(f: &F, breaks: &[f64], opts: &QuadOptions) -> Split {
    let per_panel: Vec<quad::QuadResult> = breaks
        .par_windows(2)
        .map(|w| quad::integrate(f, w, opts))
        .collect();
    let mut out = Split {
        total: 0.0,
        negative: 0.0,
        positive: 0.0,
        error: 0.0,
    };
    for r in per_panel {
        out.total += r.value;
        out.error += r.error;
        if r.value < 0.0 {
            out.negative += r.value;
        } else {
            out.positive += r.value;
        }
    }
    out
}

/// Points in `[lo, hi]` where `f` changes sign, located by a scan followed
/// by bisection.
fn sign_changes<F: Fn(f64) -> f64>(f: &F, scan: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for w in scan.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (fa, fb) = (f(a), f(b));
        if !(fa.is_finite() && fb.is_finite()) || (fa < 0.0) == (fb < 0.0) {
            continue;
        }
        let neg_at_a = fa < 0.0;
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if (f(m) < 0.0) == neg_at_a {
                a = m;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.retain(|x| x.is_finite());
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-300));
    v
}

/// Breakpoints stepping geometrically toward `center` from `center + dir*h`.
fn geometric_toward(center: f64, dir: f64, h: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut d = h;
    while d > 0.0 && d * (1.0 + d.ln().abs()) > SINGULAR_PANEL_TOL {
        out.push(center + dir * d);
        d *= 0.5;
    }
    out
}

pub fn continuous_bode_integral(
    s: &RationalTF,
    l: &RationalTF,
    opts: &BodeOptions,
) -> Result<BodeReport> {
    if s.domain() != Domain::Continuous || l.domain() != Domain::Continuous {
        return Err(Error::DomainMismatch);
    }
    let sl = l.limit_s_times_at_infinity()?;
    require_stable_closed_loop(s)?;
    let l_unstable = l.unstable_poles()?;
    let unstable_pole_term = PI * l_unstable.iter().fold(0.0, |acc, p| acc + p.re);
    let limit_term = 0.0 - 0.5 * PI * sl;
    let rhs = unstable_pole_term + limit_term;

    let log_series = log_sensitivity_series(s)?;
    let zeros = s.zeros()?;
    let poles = s.poles()?;
    let corner = zeros
        .iter()
        .chain(&poles)
        .map(|z| z.norm())
        .filter(|&m| m > 0.0)
        .fold(0.0, f64::max);
    let corner = if corner > 0.0 { corner } else { 1.0 };

    let lm = LogMagnitude::new(s)?;
    let f = |w: f64| lm.eval(Complex64::new(0.0, w));
    let mut cutoff = CUTOFF_FACTOR * corner;

    let axis_zeros: Vec<f64> = zeros
        .iter()
        .filter(|z| z.re.abs() <= SINGULAR_TOL * corner.max(1.0))
        .map(|z| z.im.abs())
        .collect();
    let scan = crate::xfer::log_grid(corner * 1e-6, cutoff, opts.scan_points)?;

    let mut breaks = vec![0.0, cutoff];
    let mut decade = corner * 1e-6;
    while decade < cutoff {
        breaks.push(decade);
        decade *= 10.0;
    }
    for &w in &axis_zeros {
        breaks.push(w);
        let h = (corner * 0.5).max(w * 0.5);
        if w > 0.0 {
            breaks.extend(geometric_toward(w, -1.0, h.min(w * 0.5)));
        }
        breaks.extend(geometric_toward(w, 1.0, h));
    }
    breaks.extend(sign_changes(&f, &scan));
    let breaks: Vec<f64> = sorted_unique(breaks)
        .into_iter()
        .filter(|&w| (0.0..=cutoff).contains(&w))
        .collect();

    let quad_opts = QuadOptions {
        abs_tol: opts.quad.abs_tol * corner,
        ..opts.quad
    };
    let mut split = integrate_split(&f, &breaks, &quad_opts);
    let mut tail = tail_integral(&log_series, cutoff);
    // extend the cutoff until the analytic tail is negligible
    for _ in 0..8 {
        if tail.abs() <= TAIL_REL_TOL * split.total.abs() || tail == 0.0 {
            break;
        }
        let next = cutoff * 10.0;
        let extra = integrate_split(&f, &sorted_unique(vec![cutoff, next]), &quad_opts);
        split.total += extra.total;
        split.negative += extra.negative;
        split.positive += extra.positive;
        split.error += extra.error;
        cutoff = next;
        tail = tail_integral(&log_series, cutoff);
    }
    if tail < 0.0 {
        split.negative += tail;
    } else {
        split.positive += tail;
    }
    let lhs = split.total + tail;

    let (peak, peak_w) =
        scan.iter()
            .map(|&w| (f(w).exp(), w))
            .fold(
                (f64::NEG_INFINITY, 0.0),
                |acc, x| if x.0 > acc.0 { x } else { acc },
            );

    Ok(BodeReport {
        label: String::new(),
        domain: Domain::Continuous,
        lhs_numeric: lhs,
        rhs_analytic: rhs,
        gap: (lhs - rhs).abs(),
        unstable_pole_term,
        limit_term,
        peak_sensitivity: peak,
        peak_frequency: peak_w,
        attenuation_area: split.negative,
        amplification_area: split.positive,
        quadrature_error: split.error,
        unstable_open_loop_poles: l_unstable.len(),
    })
}

/// Coefficients `g_n` of `ln S(s) = sum_{n>=1} g_n s^{-n}` (index 0 unused).
fn log_sensitivity_series(s: &RationalTF) -> Result<Vec<Complex64>> {
    if s.relative_degree() != 0 {
        let at_inf = if s.relative_degree() > 0 {
            0.0
        } else {
            f64::INFINITY
        };
        return Err(Error::TailDivergence(at_inf));
    }
    let f = s.expansion_at_infinity(TAIL_TERMS + 1)?;
    let f0 = f[0];
    if (f0.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::TailDivergence(f0.norm()));
    }
    let f: Vec<Complex64> = f.iter().map(|c| c / f0).collect();
    // n g_n = n f_n - sum_{k=1}^{n-1} k g_k f_{n-k}
    let mut g = vec![Complex64::new(0.0, 0.0); TAIL_TERMS + 1];
    for n in 1..=TAIL_TERMS {
        let mut acc = f[n] * n as f64;
        for k in 1..n {
            acc -= g[k] * f[n - k] * k as f64;
        }
        g[n] = acc / n as f64;
    }
    // a 1/w term in ln|S(jw)| would make the integral diverge
    if g[1].im.abs() > 1e-9 * g[1].norm().max(1.0) {
        return Err(Error::TailDivergence(1.0));
    }
    Ok(g)
}

/// `int_cutoff^inf ln|S(jw)| dw` from the log series; `1/s = -j/w`.
fn tail_integral(g: &[Complex64], cutoff: f64) -> f64 {
    let minus_j = Complex64::new(0.0, -1.0);
    (2..g.len())
        .map(|n| (g[n] * minus_j.powu(n as u32)).re * cutoff.powi(1 - n as i32) / (n as f64 - 1.0))
        .sum()
}

pub fn discrete_bode_integral(
    s: &RationalTF,
    l: &RationalTF,
    opts: &BodeOptions,
) -> Result<BodeReport> {
    let ts = match (s.domain(), l.domain()) {
        (Domain::Discrete { sample_time: a }, Domain::Discrete { sample_time: b }) if a == b => a,
        _ => return Err(Error::DomainMismatch),
    };
    let lim = l.limit_at_infinity()?;
    require_stable_closed_loop(s)?;
    let l_unstable = l.unstable_poles()?;
    let unstable_pole_term = 2.0 * PI * l_unstable.iter().fold(0.0, |acc, p| acc + p.norm().ln());
    let limit_term = 0.0 - 2.0 * PI * (Complex64::new(1.0, 0.0) + lim).norm().ln();
    let rhs = unstable_pole_term + limit_term;

    let half = discrete_half_integral(s, opts)?;
    let lm = LogMagnitude::new(s)?;
    let scan = theta_scan(opts.scan_points);
    let (peak, peak_theta) = scan
        .iter()
        .map(|&t| (lm.eval(Complex64::from_polar(1.0, t)).exp(), t))
        .fold(
            (f64::NEG_INFINITY, 0.0),
            |acc, x| if x.0 > acc.0 { x } else { acc },
        );

    let lhs = 2.0 * half.total;
    Ok(BodeReport {
        label: String::new(),
        domain: Domain::Discrete { sample_time: ts },
        lhs_numeric: lhs,
        rhs_analytic: rhs,
        gap: (lhs - rhs).abs(),
        unstable_pole_term,
        limit_term,
        peak_sensitivity: peak,
        peak_frequency: peak_theta / ts,
        attenuation_area: 2.0 * half.negative,
        amplification_area: 2.0 * half.positive,
        quadrature_error: 2.0 * half.error,
        unstable_open_loop_poles: l_unstable.len(),
    })
}

fn theta_scan(n: usize) -> Vec<f64> {
    (1..=n).map(|i| PI * i as f64 / n as f64).collect()
}

/// Unit-circle zeros of S as angles in `[0, pi]`.
fn unit_circle_zero_angles(s: &RationalTF) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for z in s.zeros()? {
        if (z.norm() - 1.0).abs() <= SINGULAR_TOL {
            let t = z.arg().abs();
            if (PI - t).abs() <= BOUNDARY_TOL.max(SINGULAR_TOL * 1e-3) {
                return Err(Error::SingularityAtGridEdge);
            }
            out.push(t);
        }
    }
    Ok(out)
}

fn discrete_breaks(s: &RationalTF, lo: f64, hi: f64, opts: &BodeOptions) -> Result<Vec<f64>> {
    let lm = LogMagnitude::new(s)?;
    let f = |t: f64| lm.eval(Complex64::from_polar(1.0, t));
    let singular = unit_circle_zero_angles(s)?;
    let mut breaks = vec![lo, hi];
    for &t in &singular {
        for center in [t, -t] {
            if center < lo || center > hi {
                continue;
            }
            breaks.push(center);
            breaks.extend(geometric_toward(center, -1.0, 0.25));
            breaks.extend(geometric_toward(center, 1.0, 0.25));
        }
    }
    let n = opts.scan_points;
    let scan: Vec<f64> = (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect();
    breaks.extend(sign_changes(&f, &scan));
    Ok(sorted_unique(breaks)
        .into_iter()
        .filter(|&t| t >= lo && t <= hi)
        .collect())
}

fn discrete_half_integral(s: &RationalTF, opts: &BodeOptions) -> Result<Split> {
    let lm = LogMagnitude::new(s)?;
    let f = |t: f64| lm.eval(Complex64::from_polar(1.0, t));
    let breaks = discrete_breaks(s, 0.0, PI, opts)?;
    Ok(integrate_split(&f, &breaks, &opts.quad))
}

/// `int_{-pi}^{pi} ln|S(e^{j theta})| d theta` over the full interval,
/// without using conjugate symmetry.
pub fn discrete_full_integral(s: &RationalTF, opts: &BodeOptions) -> Result<f64> {
    if !s.domain().is_discrete() {
        return Err(Error::DomainMismatch);
    }
    let lm = LogMagnitude::new(s)?;
    let f = |t: f64| lm.eval(Complex64::from_polar(1.0, t));
    let breaks = discrete_breaks(s, -PI, PI, opts)?;
    Ok(integrate_split(&f, &breaks, &opts.quad).total)
}

/// Sensitivity integral for each observer bandwidth of a loop family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaterbedSweep {
    pub g_values: Vec<f64>,
    pub reports: Vec<BodeReport>,
    /// Whether the sensitivity peak never decreases with `g`; `None` for a single point.
    pub peak_non_decreasing: Option<bool>,
    pub peak_strictly_increasing: Option<bool>,
    pub max_gap: f64,
}

pub fn waterbed_sweep<B>(builder: B, g_values: &[f64], opts: &BodeOptions) -> Result<WaterbedSweep>
where
    B: Fn(f64) -> Result<LoopSet> + Sync,
{
    let reports = g_values
        .par_iter()
        .map(|&g| bode_integral(&builder(g)?, opts))
        .collect::<Result<Vec<_>>>()?;
    let peaks: Vec<f64> = reports.iter().map(|r| r.peak_sensitivity).collect();
    let (non_decreasing, strictly) = if peaks.len() < 2 {
        (None, None)
    } else {
        (
            Some(peaks.windows(2).all(|w| w[1] >= w[0])),
            Some(peaks.windows(2).all(|w| w[1] > w[0])),
        )
    };
    let max_gap = reports.iter().map(|r| r.gap).fold(0.0, f64::max);
    Ok(WaterbedSweep {
        g_values: g_values.to_vec(),
        reports,
        peak_non_decreasing: non_decreasing,
        peak_strictly_increasing: strictly,
        max_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dobmodels::{self, DobParams};

    fn params(alpha: f64, g: f64, ts: f64) -> DobParams {
        DobParams {
            t_s: ts,
            ..DobParams::position_control_reference(g)
        }
        .with_alpha(alpha)
    }

    #[test]
    fn continuous_inner_loop_matches_closed_form() {
        let ls = dobmodels::inner_loop_continuous(&params(1.0, 100.0, 5e-4)).unwrap();
        let r = bode_integral(&ls, &BodeOptions::default()).unwrap();
        assert!((r.rhs_analytic + 50.0 * PI).abs() < 1e-12);
        assert!(r.gap / (50.0 * PI) < 5e-3, "{r:?}");
        assert!(r.amplification_area <= 1e-9);
    }

    #[test]
    fn trivial_loop_integrates_to_zero() {
        let c = RationalTF::gain(0.0, Domain::Continuous)
            .sensitivity_from_open_loop("")
            .unwrap();
        let r = bode_integral(&c, &BodeOptions::default()).unwrap();
        assert_eq!(r.lhs_numeric, 0.0);
        assert_eq!(r.rhs_analytic, 0.0);

        let d = RationalTF::gain(0.0, Domain::discrete(1e-3).unwrap())
            .sensitivity_from_open_loop("")
            .unwrap();
        let r = bode_integral(&d, &BodeOptions::default()).unwrap();
        assert_eq!(r.lhs_numeric, 0.0);
    }

    #[test]
    fn product_invariance_of_continuous_rhs() {
        let a = bode_integral(
            &dobmodels::inner_loop_continuous(&params(2.0, 50.0, 5e-4)).unwrap(),
            &BodeOptions::default(),
        )
        .unwrap();
        let b = bode_integral(
            &dobmodels::inner_loop_continuous(&params(1.0, 100.0, 5e-4)).unwrap(),
            &BodeOptions::default().refined(),
        )
        .unwrap();
        assert!((a.rhs_analytic - b.rhs_analytic).abs() < 1e-12);
        assert!((a.lhs_numeric - b.lhs_numeric).abs() < 1e-6 * b.lhs_numeric.abs());
    }

    #[test]
    fn continuous_relative_degree_zero_loop_is_rejected() {
        let l = RationalTF::from_real(&[1.0, 1.0], &[2.0, 1.0], Domain::Continuous).unwrap();
        let ls = l.sensitivity_from_open_loop("").unwrap();
        assert!(matches!(
            bode_integral(&ls, &BodeOptions::default()),
            Err(Error::ImproperTF { .. })
        ));
        // S tends to 1/2 at infinity: the integrand never decays
        let s = RationalTF::from_real(&[1.0, 1.0], &[1.0, 2.0], Domain::Continuous).unwrap();
        let l = RationalTF::from_real(&[1.0], &[0.0, 1.0], Domain::Continuous).unwrap();
        assert!(matches!(
            continuous_bode_integral(&s, &l, &BodeOptions::default()),
            Err(Error::TailDivergence(_))
        ));
    }

    #[test]
    fn discrete_inner_loop_integrates_to_zero() {
        let ls = dobmodels::inner_loop_discrete(&params(1.0, 1000.0, 5e-4)).unwrap();
        let r = bode_integral(&ls, &BodeOptions::default()).unwrap();
        assert_eq!(r.rhs_analytic, 0.0);
        assert!(r.lhs_numeric.abs() < 1e-8, "{r:?}");
        assert!((r.attenuation_area + r.amplification_area).abs() < 2e-3);
        assert!(r.amplification_area > 0.0);
    }

    #[test]
    fn marginal_and_unstable_closed_loops_are_refused() {
        let opts = BodeOptions::default();
        let marginal = dobmodels::inner_loop_discrete(&params(1.0, 4000.0, 5e-4)).unwrap();
        assert!(matches!(
            bode_integral(&marginal, &opts),
            Err(Error::MarginalPole { .. })
        ));
        let unstable = dobmodels::inner_loop_discrete(&params(1.0, 6000.0, 5e-4)).unwrap();
        assert!(matches!(
            bode_integral(&unstable, &opts),
            Err(Error::UnstableClosedLoop { .. })
        ));
    }

    #[test]
    fn zero_of_sensitivity_at_nyquist_is_refused() {
        let d = Domain::discrete(1.0).unwrap();
        let s = RationalTF::from_real(&[1.0, 1.0], &[0.0, 2.0], d).unwrap();
        let l = RationalTF::from_real(&[1.0], &[1.0, 1.0], d).unwrap();
        assert_eq!(
            discrete_bode_integral(&s, &l, &BodeOptions::default()).unwrap_err(),
            Error::SingularityAtGridEdge
        );
    }

    #[test]
    fn conjugate_symmetry_halving() {
        for agt in [0.3, 1.2, 1.8] {
            let ls = dobmodels::inner_loop_discrete(&params(1.0, agt / 5e-4, 5e-4)).unwrap();
            let opts = BodeOptions::default();
            let full = discrete_full_integral(&ls.sensitivity, &opts).unwrap();
            let half = discrete_half_integral(&ls.sensitivity, &opts)
                .unwrap()
                .total;
            // both sides are ~0 here, so compare against the integrand scale
            let scale = ls
                .sensitivity
                .evaluate(Complex64::new(-1.0, 0.0))
                .unwrap()
                .norm()
                .ln()
                .abs();
            assert!(
                (full - 2.0 * half).abs() <= 1e-10 * scale.max(1.0),
                "{full} vs {half}"
            );
        }
        // a loop with a non-zero integral
        let d = Domain::discrete(1.0).unwrap();
        let l = RationalTF::from_real(&[0.5, -2.0], &[0.0, 2.0, 1.0], d).unwrap();
        let ls = l.sensitivity_from_open_loop("").unwrap();
        let opts = BodeOptions::default();
        let full = discrete_full_integral(&ls.sensitivity, &opts).unwrap();
        let half = discrete_half_integral(&ls.sensitivity, &opts)
            .unwrap()
            .total;
        assert!((full - 2.0 * half).abs() <= 1e-10 * full.abs());
    }

    #[test]
    fn waterbed_sweep_single_point_has_no_monotonicity_claim() {
        let base = params(1.0, 0.0, 5e-4);
        let sweep = waterbed_sweep(
            |g| dobmodels::inner_loop_discrete(&base.with_g_dob(g)),
            &[1000.0],
            &BodeOptions::default(),
        )
        .unwrap();
        assert_eq!(sweep.reports.len(), 1);
        assert_eq!(sweep.peak_non_decreasing, None);
    }

    #[test]
    fn log_series_of_first_order_sensitivity() {
        // ln(s/(s+a)) = -ln(1 + a/s) = -a/s + a^2/(2 s^2) - ...
        let s = RationalTF::from_real(&[0.0, 1.0], &[3.0, 1.0], Domain::Continuous).unwrap();
        let g = log_sensitivity_series(&s).unwrap();
        assert!((g[1] - Complex64::new(-3.0, 0.0)).norm() < 1e-12);
        assert!((g[2] - Complex64::new(4.5, 0.0)).norm() < 1e-12);
        assert!((g[3] - Complex64::new(-9.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn outer_loop_with_double_zero_at_dc() {
        // (z-1)^2 in the plant makes S vanish quadratically at theta = 0
        let ls = dobmodels::outer_loop_discrete(&params(1.0, 1000.0, 5e-4)).unwrap();
        let r = bode_integral(&ls, &BodeOptions::default()).unwrap();
        assert!(
            r.lhs_numeric.is_finite() && r.lhs_numeric.abs() < 1e-8,
            "{r:?}"
        );
        assert!(r.peak_sensitivity > 1.0);
    }

    #[test]
    fn refinement_moves_lhs_far_less_than_gap_tolerance() {
        let opts = BodeOptions::default();
        let cases = [
            dobmodels::inner_loop_continuous(&params(1.0, 1000.0, 5e-4)).unwrap(),
            dobmodels::inner_loop_discrete(&params(1.0, 3000.0, 5e-4)).unwrap(),
            dobmodels::outer_loop_discrete(&params(1.0, 1000.0, 5e-4)).unwrap(),
        ];
        for ls in &cases {
            let coarse = bode_integral(ls, &opts).unwrap();
            let fine = bode_integral(ls, &opts.refined()).unwrap();
            // the gap tolerances used elsewhere: 0.5 % continuous, 1e-3 discrete
            let tol = if ls.domain().is_discrete() {
                1e-3
            } else {
                5e-3 * coarse.rhs_analytic.abs()
            };
            assert!(
                (coarse.lhs_numeric - fine.lhs_numeric).abs() < 0.1 * tol,
                "{}",
                ls.label
            );
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn discrete_inner_integral_vanishes(agt in 0.02f64..1.98, alpha in 0.25f64..4.0) {
            let ls = dobmodels::inner_loop_discrete(&params(alpha, agt / (alpha * 5e-4), 5e-4)).unwrap();
            let r = bode_integral(&ls, &BodeOptions::default()).unwrap();
            proptest::prop_assert!(r.lhs_numeric.abs() <= 1e-3);
            proptest::prop_assert!((r.attenuation_area + r.amplification_area).abs() <= 2e-3);
        }

        #[test]
        fn continuous_inner_integral_matches(ag in 1.0f64..5000.0) {
            let ls = dobmodels::inner_loop_continuous(&params(1.0, ag, 5e-4)).unwrap();
            let r = bode_integral(&ls, &BodeOptions::default()).unwrap();
            proptest::prop_assert!(r.gap <= 5e-3 * (PI / 2.0) * ag);
        }
    }
}
