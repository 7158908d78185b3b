//! Disturbance-observer loop objects built from physical parameters.
//!
//! Inner loop (velocity DOB), continuous and discrete:
//!
//! ```text
//! L(s) = a g / s                  S(s) = s / (s + a g)
//! L(z) = a g Ts / (z - 1)         S(z) = (z - 1) / (z - (1 - a g Ts))
//! ```
//!
//! Outer position loop, assembled from its three factors:
//!
//! ```text
//! L_pc(z) = (Kp + Kd (z-1)/(Ts z)) * a((1 + g Ts) z - 1)/(z - (1 - a g Ts)) * (Ts^2/2)(z+1)/(z-1)^2
//! ```
//!
//! where `a = (J_mn K_tau) / (J_m K_tau_n)` is the model-mismatch ratio.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::xfer::{Domain, LoopSet, RationalTF};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DobParams {
    /// Motor inertia (kg m^2).
    pub j_m: f64,
    /// Nominal inertia used in the observer (kg m^2).
    pub j_mn: f64,
    /// Torque coefficient (N m / A).
    pub k_tau: f64,
    /// Nominal torque coefficient (N m / A).
    pub k_tau_n: f64,
    /// Observer low-pass bandwidth (rad/s).
    pub g_dob: f64,
    /// Sample time (s).
    pub t_s: f64,
    pub k_p: f64,
    pub k_d: f64,
}

impl DobParams {
    /// Position-control setup used in the experiments: J_m = 0.01, exact
    /// nominal model, Kp = 5000, Kd = 25, Ts = 0.5 ms.
    pub fn position_control_reference(g_dob: f64) -> Self {
        DobParams {
            j_m: 0.01,
            j_mn: 0.01,
            k_tau: 1.0,
            k_tau_n: 1.0,
            g_dob,
            t_s: 5e-4,
            k_p: 5000.0,
            k_d: 25.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("j_m", self.j_m),
            ("j_mn", self.j_mn),
            ("k_tau", self.k_tau),
            ("k_tau_n", self.k_tau_n),
            ("t_s", self.t_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [("g_dob", self.g_dob), ("k_p", self.k_p), ("k_d", self.k_d)];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        (self.j_mn * self.k_tau) / (self.j_m * self.k_tau_n)
    }

    /// Same parameters with `j_mn` chosen so that `alpha()` equals `alpha`.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        DobParams {
            j_mn: alpha * self.j_m * self.k_tau_n / self.k_tau,
            ..*self
        }
    }

    pub fn with_g_dob(&self, g_dob: f64) -> Self {
        DobParams { g_dob, ..*self }
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::discrete(self.t_s)
    }

    fn check_observer(&self, allow_observer_off: bool) -> Result<()> {
        self.validate()?;
        if self.g_dob == 0.0 && !allow_observer_off {
            return Err(Error::InvalidParams(
                "g_dob must be > 0 (observer-off loops need explicit opt-in)".into(),
            ));
        }
        Ok(())
    }
}

/// Loop configurations understood by the analysis front ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LoopFamily {
    InnerContinuous,
    InnerDiscrete,
    OuterContinuous,
    OuterDiscrete,
}

impl LoopFamily {
    pub const ALL: [LoopFamily; 4] = [
        LoopFamily::InnerContinuous,
        LoopFamily::InnerDiscrete,
        LoopFamily::OuterContinuous,
        LoopFamily::OuterDiscrete,
    ];

    pub fn build(self, params: &DobParams) -> Result<LoopSet> {
        match self {
            LoopFamily::InnerContinuous => inner_loop_continuous(params),
            LoopFamily::InnerDiscrete => inner_loop_discrete(params),
            LoopFamily::OuterContinuous => outer_loop_continuous(params),
            LoopFamily::OuterDiscrete => outer_loop_discrete(params),
        }
    }

    pub fn is_discrete(self) -> bool {
        matches!(self, LoopFamily::InnerDiscrete | LoopFamily::OuterDiscrete)
    }

    pub fn name(self) -> &'static str {
        match self {
            LoopFamily::InnerContinuous => "inner-continuous",
            LoopFamily::InnerDiscrete => "inner-discrete",
            LoopFamily::OuterContinuous => "outer-continuous",
            LoopFamily::OuterDiscrete => "outer-discrete",
        }
    }
}

impl fmt::Display for LoopFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LoopFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        LoopFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                format!(
                    "unknown loop family '{s}' (expected one of inner-continuous, inner-discrete, outer-continuous, outer-discrete)"
                )
            })
    }
}

pub fn alpha(params: &DobParams) -> f64 {
    params.alpha()
}

pub fn inner_loop_continuous(params: &DobParams) -> Result<LoopSet> {
    inner_loop_continuous_opt(params, false)
}

/// Like [`inner_loop_continuous`], optionally accepting `g_dob = 0` (observer off).
pub fn inner_loop_continuous_opt(params: &DobParams, allow_observer_off: bool) -> Result<LoopSet> {
    params.check_observer(allow_observer_off)?;
    let ag = params.alpha() * params.g_dob;
    RationalTF::from_real(&[ag], &[0.0, 1.0], Domain::Continuous)?
        .sensitivity_from_open_loop("inner-continuous")
}

pub fn inner_loop_discrete(params: &DobParams) -> Result<LoopSet> {
    inner_loop_discrete_opt(params, false)
}

pub fn inner_loop_discrete_opt(params: &DobParams, allow_observer_off: bool) -> Result<LoopSet> {
    params.check_observer(allow_observer_off)?;
    let agt = params.alpha() * params.g_dob * params.t_s;
    RationalTF::from_real(&[agt], &[-1.0, 1.0], params.domain()?)?
        .sensitivity_from_open_loop("inner-discrete")
}

/// `K_p + K_d (z-1)/(Ts z)`; collapses to the constant `K_p` when `K_d = 0`.
pub fn pd_discrete(params: &DobParams) -> Result<RationalTF> {
    let d = params.domain()?;
    let p = RationalTF::gain(params.k_p, d);
    if params.k_d == 0.0 {
        return Ok(p);
    }
    let derivative = RationalTF::from_real(&[-params.k_d, params.k_d], &[0.0, params.t_s], d)?;
    p.parallel(&derivative)
}

/// Velocity response of the DOB inner loop to an acceleration command, less
/// the integrator: `a((1 + g Ts) z - 1) / (z - (1 - a g Ts))`.
pub fn reference_prefactor_discrete(params: &DobParams) -> Result<RationalTF> {
    let (a, g, ts) = (params.alpha(), params.g_dob, params.t_s);
    RationalTF::from_real(
        &[-a, a * (1.0 + g * ts)],
        &[-(1.0 - a * g * ts), 1.0],
        params.domain()?,
    )
}

/// ZoH double integrator `(Ts^2/2)(z+1)/(z-1)^2`.
pub fn plant_discrete(params: &DobParams) -> Result<RationalTF> {
    let h = params.t_s * params.t_s / 2.0;
    RationalTF::from_real(&[h, h], &[1.0, -2.0, 1.0], params.domain()?)
}

/// Tustin integrator `(Ts/2)(z+1)/(z-1)` that appears in the noise path.
pub fn tustin_integrator(params: &DobParams) -> Result<RationalTF> {
    let h = params.t_s / 2.0;
    RationalTF::from_real(&[h, h], &[-1.0, 1.0], params.domain()?)
}

fn check_outer(params: &DobParams) -> Result<()> {
    params.check_observer(false)?;
    if params.k_p == 0.0 && params.k_d == 0.0 {
        return Err(Error::InvalidParams("k_p and k_d cannot both be 0".into()));
    }
    Ok(())
}

/// Open loop of the position controller, without any cancellation.
pub fn outer_open_loop_discrete(params: &DobParams) -> Result<RationalTF> {
    params.validate()?;
    pd_discrete(params)?
        .series(&reference_prefactor_discrete(params)?)?
        .series(&plant_discrete(params)?)
}

pub fn outer_loop_discrete(params: &DobParams) -> Result<LoopSet> {
    check_outer(params)?;
    outer_open_loop_discrete(params)?.sensitivity_from_open_loop("outer-discrete")
}

/// Continuous counterpart of the position loop:
/// `(Kp + Kd s) * a(s + g)/(s + a g) * 1/s^2`.
pub fn outer_loop_continuous(params: &DobParams) -> Result<LoopSet> {
    check_outer(params)?;
    let (a, g) = (params.alpha(), params.g_dob);
    let c = Domain::Continuous;
    let pd = RationalTF::from_real(&[params.k_p, params.k_d], &[1.0], c)?;
    let prefactor = RationalTF::from_real(&[a * g, a], &[a * g, 1.0], c)?;
    let plant = RationalTF::from_real(&[1.0], &[0.0, 0.0, 1.0], c)?;
    pd.series(&prefactor)?
        .series(&plant)?
        .sensitivity_from_open_loop("outer-continuous")
}

/// The exogenous-input maps of the discrete position loop.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoopMaps {
    /// Reference to position, `L_pc S_pc = T_pc`.
    pub reference: RationalTF,
    /// Disturbance torque to position, `(1/J_m) S_dob S_pc`.
    pub disturbance: RationalTF,
    /// Velocity noise to position, `T_dob T_pc (Ts/2)(z+1)/(z-1)`.
    pub noise: RationalTF,
    /// Auxiliary input `delta` to position, `T_pc`.
    pub auxiliary: RationalTF,
    pub inner: LoopSet,
    pub outer: LoopSet,
}

pub fn closed_loop_maps_discrete(params: &DobParams) -> Result<ClosedLoopMaps> {
    let outer = outer_loop_discrete(params)?;
    let inner = inner_loop_discrete(params)?;
    let reference = outer.open_loop.series(&outer.sensitivity)?;
    let disturbance = inner
        .sensitivity
        .series(&outer.sensitivity)?
        .scale(1.0 / params.j_m);
    let noise = inner
        .complementary
        .series(&outer.complementary)?
        .series(&tustin_integrator(params)?)?;
    Ok(ClosedLoopMaps {
        reference,
        disturbance,
        noise,
        auxiliary: outer.complementary.clone(),
        inner,
        outer,
    })
}
