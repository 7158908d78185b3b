//! Closed-loop pole sweeps over a scalar loop parameter and bisection for
//! the parameter value where the loop reaches the stability boundary.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dobmodels::{DobParams, LoopFamily};
use crate::error::{Error, Result};
use crate::xfer::{Domain, RationalTF, BOUNDARY_TOL};

/// Points in the pre-scan that looks for the first stable-to-unstable change.
pub const PRESCAN_POINTS: usize = 64;
const MAX_BISECTIONS: usize = 200;

/// Roots of the characteristic polynomial `den(L) + num(L)`.
pub fn closed_loop_poles(l: &RationalTF) -> Result<Vec<Complex64>> {
    let characteristic = l.den() + l.num();
    if characteristic.is_zero() {
        return Err(Error::DegenerateLoop);
    }
    characteristic.roots()
}

/// `max |z| - 1` (discrete) or `max Re s` (continuous); negative is stable.
pub fn stability_margin(poles: &[Complex64], domain: Domain) -> f64 {
    poles
        .iter()
        .map(|&p| domain.stability_margin_of(p))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Open loop as a function of the observer bandwidth, other parameters fixed.
pub fn family_builder(
    family: LoopFamily,
    base: DobParams,
) -> impl Fn(f64) -> Result<RationalTF> + Sync + Send {
    move |g| Ok(family.build(&base.with_g_dob(g))?.open_loop)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocusBranches {
    pub domain: Domain,
    pub param_values: Vec<f64>,
    /// `poles[i][b]` is branch `b` at `param_values[i]`.
    #[serde(skip)]
    pub poles: Vec<Vec<Complex64>>,
    pub margins: Vec<f64>,
    pub stable: Vec<bool>,
    /// `(value index, branch)` pairs where the matched pole jumped further
    /// than half the local pole spacing.
    pub discontinuities: Vec<(usize, usize)>,
}

impl LocusBranches {
    pub fn branch_count(&self) -> usize {
        self.poles.first().map_or(0, Vec::len)
    }

    /// Index of the first grid point that is not stable, if any.
    pub fn first_unstable(&self) -> Option<usize> {
        self.stable.iter().position(|s| !s)
    }
}

pub fn sweep<B>(builder: B, grid: &[f64]) -> Result<LocusBranches>
where
    B: Fn(f64) -> Result<RationalTF> + Sync,
{
    if grid.is_empty() {
        return Err(Error::InvalidGrid("parameter grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid(
            "parameter grid must be strictly increasing".into(),
        ));
    }
    let raw: Vec<(Domain, Vec<Complex64>)> = grid
        .par_iter()
        .map(|&g| {
            let l = builder(g)?;
            Ok((l.domain(), closed_loop_poles(&l)?))
        })
        .collect::<Result<_>>()?;
    let domain = raw[0].0;
    let expected = raw[0].1.len();

    let mut poles: Vec<Vec<Complex64>> = Vec::with_capacity(grid.len());
    let mut discontinuities = Vec::new();
    for (i, (_, set)) in raw.into_iter().enumerate() {
        if set.len() != expected {
            return Err(Error::BranchCountChanged {
                expected,
                found: set.len(),
            });
        }
        match poles.last() {
            None => poles.push(set),
            Some(prev) => {
                let (matched, jumps) = match_branches(prev, set);
                discontinuities.extend(jumps.into_iter().map(|b| (i, b)));
                poles.push(matched);
            }
        }
    }
    let margins: Vec<f64> = poles.iter().map(|p| stability_margin(p, domain)).collect();
    let stable = margins.iter().map(|&m| m < -BOUNDARY_TOL).collect();
    Ok(LocusBranches {
        domain,
        param_values: grid.to_vec(),
        poles,
        margins,
        stable,
        discontinuities,
    })
}

/// Greedy nearest-neighbour assignment of `next` onto the branches of `prev`.
fn match_branches(prev: &[Complex64], next: Vec<Complex64>) -> (Vec<Complex64>, Vec<usize>) {
    let n = prev.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (b, p) in prev.iter().enumerate() {
        for (k, q) in next.iter().enumerate() {
            pairs.push(((p - q).norm(), b, k));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut out = vec![Complex64::new(f64::NAN, f64::NAN); n];
    let mut branch_done = vec![false; n];
    let mut pole_used = vec![false; n];
    let mut jumps = Vec::new();
    for (d, b, k) in pairs {
        if branch_done[b] || pole_used[k] {
            continue;
        }
        branch_done[b] = true;
        pole_used[k] = true;
        out[b] = next[k];
        let spacing = prev
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != b)
            .map(|(_, q)| (q - prev[b]).norm())
            .fold(f64::INFINITY, f64::min);
        let bound = (0.5 * spacing).max(1e-9 * (1.0 + prev[b].norm()));
        if d > bound {
            jumps.push(b);
        }
    }
    jumps.sort_unstable();
    (out, jumps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalBandwidth {
    pub g_star: f64,
    pub boundary_pole_re: f64,
    pub boundary_pole_im: f64,
    /// Final bisection interval `[stable, unstable]`.
    pub bracket: (f64, f64),
    pub margin: f64,
}

impl CriticalBandwidth {
    pub fn boundary_pole(&self) -> Complex64 {
        Complex64::new(self.boundary_pole_re, self.boundary_pole_im)
    }
}

/// Bisection on the stability margin for the first stable-to-unstable change
/// in `[low, high]`.
pub fn critical_bandwidth<B>(builder: B, bracket: (f64, f64)) -> Result<CriticalBandwidth>
where
    B: Fn(f64) -> Result<RationalTF>,
{
    let (low, high) = bracket;
    if !(low < high) {
        return Err(Error::BadBracket {
            low,
            high,
            reason: "low must be below high".into(),
        });
    }
    let eval = |g: f64| -> Result<(f64, Vec<Complex64>, Domain)> {
        let l = builder(g)?;
        let poles = closed_loop_poles(&l)?;
        Ok((stability_margin(&poles, l.domain()), poles, l.domain()))
    };
    let bad = |reason: &str| Error::BadBracket {
        low,
        high,
        reason: reason.into(),
    };

    let (m_low, _, _) = eval(low)?;
    if m_low >= -BOUNDARY_TOL {
        return Err(bad("loop is not stable at the low end"));
    }
    let mut a = low;
    let mut b = None;
    for i in 1..=PRESCAN_POINTS {
        let g = low + (high - low) * i as f64 / PRESCAN_POINTS as f64;
        let (m, _, _) = eval(g)?;
        if m > 0.0 || m.abs() <= BOUNDARY_TOL {
            b = Some(g);
            break;
        }
        a = g;
    }
    let Some(mut b) = b else {
        return Err(bad("loop is stable across the whole bracket"));
    };

    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (a + b);
        if !(a < mid && mid < b) {
            break;
        }
        let (m, poles, domain) = eval(mid)?;
        if m.abs() <= BOUNDARY_TOL {
            return Ok(crossing(mid, m, &poles, domain, (a, b)));
        }
        if m < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    // the margin may have reached the boundary exactly at an end point
    for g in [b, a] {
        let (m, poles, domain) = eval(g)?;
        if m.abs() <= BOUNDARY_TOL {
            return Ok(crossing(g, m, &poles, domain, (a, b)));
        }
    }
    Err(Error::NoCrossing { low, high })
}

fn crossing(
    g: f64,
    m: f64,
    poles: &[Complex64],
    domain: Domain,
    bracket: (f64, f64),
) -> CriticalBandwidth {
    let pole = poles
        .iter()
        .copied()
        .max_by(|x, y| {
            domain
                .stability_margin_of(*x)
                .total_cmp(&domain.stability_margin_of(*y))
        })
        .unwrap_or_default();
    CriticalBandwidth {
        g_star: g,
        boundary_pole_re: pole.re,
        boundary_pole_im: pole.im,
        bracket,
        margin: m,
    }
}
