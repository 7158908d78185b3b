//! Dense complex-coefficient polynomials.
//!
//! Coefficients are stored lowest degree first. Every constructor and
//! arithmetic operation trims trailing coefficients whose magnitude is at
//! most `TRIM_TOL` times the largest coefficient, so feedback algebra does
//! not leave phantom leading terms behind.
//!
//! Roots are found with the Aberth–Ehrlich simultaneous iteration. Clusters
//! that are numerically a single multiple root are collapsed onto their
//! refined centroid, which keeps double integrator poles such as `(z-1)^2`
//! exactly on the unit circle.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const TRIM_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 200;
const STEP_TOL: f64 = 1e-13;
const CLUSTER_RADIUS: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Polynomial { coeffs };
        p.trim();
        p
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    /// `x - root`
    pub fn linear(root: Complex64) -> Self {
        Self::new(vec![-root, Complex64::new(1.0, 0.0)])
    }

    /// `lead * prod (x - r_i)`
    pub fn from_roots(roots: &[Complex64], lead: Complex64) -> Self {
        roots
            .iter()
            .fold(Self::constant(lead), |acc, &r| &acc * &Self::linear(r))
    }

    fn trim(&mut self) {
        let max = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let cutoff = TRIM_TOL * max;
        while let Some(last) = self.coeffs.last() {
            if last.norm() <= cutoff {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the polynomial; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or_default()
    }

    pub fn is_real(&self) -> bool {
        let scale = self.max_abs_coeff();
        self.coeffs.iter().all(|c| c.im.abs() <= 1e-14 * scale)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * k).collect())
    }

    /// Horner evaluation.
    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    /// Value and first derivative in one Horner pass.
    pub fn eval_with_derivative(&self, x: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    }

    /// `sum |c_i| r^i`, the rounding-error scale of Horner at radius `r`.
    fn abs_eval(&self, r: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        )
    }

    /// All roots with multiplicity. Constant polynomials have none.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let zero_roots = self.coeffs.iter().take_while(|c| c.norm() == 0.0).count();
        let reduced = Polynomial {
            coeffs: self.coeffs[zero_roots..].to_vec(),
        };
        let mut roots = vec![Complex64::new(0.0, 0.0); zero_roots];
        match reduced.degree() {
            0 => {}
            1 => roots.push(-reduced.coeffs[0] / reduced.coeffs[1]),
            _ => {
                let found = reduced.aberth()?;
                roots.extend(reduced.merge_clusters(found));
            }
        }
        Ok(roots)
    }

    fn aberth(&self) -> Result<Vec<Complex64>> {
        let n = self.degree();
        let lead = self.leading();
        let radius = 1.0
            + self.coeffs[..n]
                .iter()
                .map(|c| (c / lead).norm())
                .fold(0.0, f64::max);
        let mut z: Vec<Complex64> = (0..n)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
                Complex64::from_polar(radius, angle)
            })
            .collect();
        let mut done = vec![false; n];

        for _ in 0..MAX_SWEEPS {
            for k in 0..n {
                if done[k] {
                    continue;
                }
                let (p, dp) = self.eval_with_derivative(z[k]);
                let noise = 4.0 * f64::EPSILON * self.abs_eval(z[k].norm());
                if p.norm() <= noise {
                    done[k] = true;
                    continue;
                }
                let ratio = if dp.norm() == 0.0 {
                    // flat spot; kick the estimate outward
                    Complex64::new(1e-3 * (1.0 + z[k].norm()), 0.0)
                } else {
                    p / dp
                };
                let repulsion: Complex64 = (0..n)
                    .filter(|&j| j != k)
                    .map(|j| {
                        let d = z[k] - z[j];
                        if d.norm() == 0.0 {
                            Complex64::new(0.0, 0.0)
                        } else {
                            d.inv()
                        }
                    })
                    .sum();
                let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
                z[k] -= step;
                if step.norm() < STEP_TOL * (1.0 + z[k].norm()) {
                    done[k] = true;
                }
            }
            if done.iter().all(|&d| d) {
                return Ok(z.into_iter().map(|r| self.newton_polish(r)).collect());
            }
        }
        Err(Error::NonConvergence {
            degree: n,
            sweeps: MAX_SWEEPS,
        })
    }

    fn newton_polish(&self, r: Complex64) -> Complex64 {
        let (p, dp) = self.eval_with_derivative(r);
        if dp.norm() == 0.0 {
            return r;
        }
        let candidate = r - p / dp;
        if self.eval(candidate).norm() < p.norm() {
            candidate
        } else {
            r
        }
    }

    /// Collapse groups of nearby roots that behave as one multiple root.
    ///
    /// A group of size m is replaced by a root of the (m-1)-th derivative
    /// near its centroid when the polynomial vanishes there to rounding
    /// accuracy; otherwise the individual roots are kept.
    fn merge_clusters(&self, roots: Vec<Complex64>) -> Vec<Complex64> {
        let n = roots.len();
        let mut group = vec![usize::MAX; n];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            if group[i] != usize::MAX {
                continue;
            }
            let id = groups.len();
            group[i] = id;
            let mut members = vec![i];
            let mut cursor = 0;
            while cursor < members.len() {
                let a = roots[members[cursor]];
                for j in 0..n {
                    if group[j] == usize::MAX
                        && (roots[j] - a).norm() <= CLUSTER_RADIUS * a.norm().max(1.0)
                    {
                        group[j] = id;
                        members.push(j);
                    }
                }
                cursor += 1;
            }
            groups.push(members);
        }

        let mut out = Vec::with_capacity(n);
        for members in groups {
            let m = members.len();
            if m == 1 {
                out.push(roots[members[0]]);
                continue;
            }
            let centroid = members.iter().map(|&i| roots[i]).sum::<Complex64>() / m as f64;
            let mut d = self.clone();
            for _ in 0..m - 1 {
                d = d.derivative();
            }
            let mut c = centroid;
            for _ in 0..8 {
                let (v, dv) = d.eval_with_derivative(c);
                if dv.norm() == 0.0 {
                    break;
                }
                let step = v / dv;
                c -= step;
                if step.norm() <= f64::EPSILON * (1.0 + c.norm()) {
                    break;
                }
            }
            let moved = (c - centroid).norm();
            let noise = 64.0 * m as f64 * f64::EPSILON * self.abs_eval(c.norm());
            if moved <= CLUSTER_RADIUS * c.norm().max(1.0) && self.eval(c).norm() <= noise {
                out.extend(std::iter::repeat_n(c, m));
            } else {
                out.extend(members.iter().map(|&i| roots[i]));
            }
        }
        out
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let zero = Complex64::new(0.0, 0.0);
        Polynomial::new(
            (0..len)
                .map(|i| {
                    self.coeffs.get(i).copied().unwrap_or(zero)
                        + rhs.coeffs.get(i).copied().unwrap_or(zero)
                })
                .collect(),
        )
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        Polynomial {
            coeffs: self.coeffs.iter().map(|&c| -c).collect(),
        }
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, c)| c.norm() != 0.0)
            .map(|(i, c)| {
                let c = if c.im == 0.0 {
                    format!("{}", c.re)
                } else {
                    format!("({}{:+}j)", c.re, c.im)
                };
                match i {
                    0 => c,
                    1 => format!("{c}*x"),
                    _ => format!("{c}*x^{i}"),
                }
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}
