//! Fixed-step simulation of the digital robust position controller: ZoH
//! double-integrator plant, velocity-based disturbance observer and a
//! backward-difference PD on position error.
//!
//! The observer low-pass is discretized with backward Euler. Solving the
//! implicit update against `tau_cmd = tau_ref + tau_hat` gives
//! `x_k = x_{k-1} + g Ts tau_ref_k`, and the sampled loop then matches
//! `a((1 + g Ts) z - 1) / (z - 1 + a g Ts)` times the ZoH plant exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dobmodels::DobParams;
use crate::error::{Error, Result};

/// Multiple of the reference amplitude used when no bound is given.
pub const DEFAULT_DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    #[default]
    None,
    Step,
    Ramp,
    Sine,
}

impl std::str::FromStr for SignalKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SignalKind::None),
            "step" => Ok(SignalKind::Step),
            "ramp" => Ok(SignalKind::Ramp),
            "sine" | "sinusoid" => Ok(SignalKind::Sine),
            other => Err(Error::InvalidParams(format!(
                "unknown signal kind '{other}'"
            ))),
        }
    }
}

impl SignalKind {
    pub fn name(self) -> &'static str {
        match self {
            SignalKind::None => "none",
            SignalKind::Step => "step",
            SignalKind::Ramp => "ramp",
            SignalKind::Sine => "sine",
        }
    }
}

/// Zero before `onset`; afterwards a step, ramp (`amplitude` per second) or
/// sinusoid with angular `frequency` in rad/s.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub kind: SignalKind,
    pub amplitude: f64,
    pub onset: f64,
    pub frequency: f64,
}

impl Signal {
    pub fn none() -> Self {
        Signal::default()
    }

    pub fn step(amplitude: f64, onset: f64) -> Self {
        Signal {
            kind: SignalKind::Step,
            amplitude,
            onset,
            frequency: 0.0,
        }
    }

    pub fn ramp(slope: f64, onset: f64) -> Self {
        Signal {
            kind: SignalKind::Ramp,
            amplitude: slope,
            onset,
            frequency: 0.0,
        }
    }

    pub fn sine(amplitude: f64, frequency: f64, onset: f64) -> Self {
        Signal {
            kind: SignalKind::Sine,
            amplitude,
            onset,
            frequency,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.kind == SignalKind::None || t < self.onset {
            return 0.0;
        }
        let dt = t - self.onset;
        match self.kind {
            SignalKind::None => 0.0,
            SignalKind::Step => self.amplitude,
            SignalKind::Ramp => self.amplitude * dt,
            SignalKind::Sine => self.amplitude * (self.frequency * dt).sin(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: DobParams,
    pub duration: f64,
    pub reference: Signal,
    pub disturbance: Signal,
    pub noise_std: f64,
    pub noise_seed: u64,
    pub divergence_bound: f64,
}

impl Scenario {
    /// Noise-free, disturbance-free scenario with the default divergence bound.
    pub fn new(params: DobParams, duration: f64, reference: Signal) -> Self {
        Scenario {
            params,
            duration,
            reference,
            disturbance: Signal::none(),
            noise_std: 0.0,
            noise_seed: 0,
            divergence_bound: default_divergence_bound(&reference),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be > 0, got {}", self.duration));
        }
        if !(self.divergence_bound > 0.0) {
            return bad(format!(
                "divergence_bound must be > 0, got {}",
                self.divergence_bound
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        for (name, s) in [
            ("reference", &self.reference),
            ("disturbance", &self.disturbance),
        ] {
            if !(s.onset >= 0.0 && s.onset <= self.duration) {
                return bad(format!(
                    "{name} onset {} outside [0, {}]",
                    s.onset, self.duration
                ));
            }
            if !s.amplitude.is_finite() || !s.frequency.is_finite() {
                return bad(format!("{name} amplitude and frequency must be finite"));
            }
        }
        Ok(())
    }

    /// Number of samples, `t = 0` through `duration` inclusive.
    pub fn sample_count(&self) -> usize {
        (self.duration / self.params.t_s + 1e-9).floor() as usize + 1
    }
}

pub fn default_divergence_bound(reference: &Signal) -> f64 {
    DEFAULT_DIVERGENCE_FACTOR * reference.amplitude.abs().max(1.0)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub time: Vec<f64>,
    pub q_ref: Vec<f64>,
    pub q: Vec<f64>,
    pub q_dot: Vec<f64>,
    pub tau_cmd: Vec<f64>,
    pub tau_dis_hat: Vec<f64>,
    pub tau_d: Vec<f64>,
    pub diverged_at: Option<usize>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// Exact ZoH step of `J_m q'' = torque_net` over one sample.
pub fn step_plant(state: (f64, f64), torque_net: f64, j_m: f64, t_s: f64) -> (f64, f64) {
    let (q, q_dot) = state;
    let acc = torque_net / j_m;
    (q + q_dot * t_s + acc * t_s * t_s / 2.0, q_dot + acc * t_s)
}

/// Observer state: the low-pass output before the velocity term is removed.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DobState {
    pub x: f64,
}

/// Returns `(tau_cmd, tau_dis_hat)` for the nominal torque `tau_ref = J_mn a`.
pub fn step_dob(
    state: &mut DobState,
    q_dot_measured: f64,
    tau_ref: f64,
    params: &DobParams,
) -> (f64, f64) {
    let g = params.g_dob;
    state.x += g * params.t_s * tau_ref;
    let tau_hat = state.x - g * params.j_mn * q_dot_measured;
    (tau_ref + tau_hat, tau_hat)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PdState {
    pub e_prev: f64,
}

/// `K_p e + K_d (e - e_prev)/Ts`, with `e_prev = 0` before the first sample.
pub fn step_pd(state: &mut PdState, q_ref: f64, q_measured: f64, params: &DobParams) -> f64 {
    let e = q_ref - q_measured;
    let a = params.k_p * e + params.k_d * (e - state.e_prev) / params.t_s;
    state.e_prev = e;
    a
}

pub fn run(scenario: &Scenario) -> Result<SimTrace> {
    scenario.validate()?;
    let p = &scenario.params;
    let n = scenario.sample_count();
    let torque_gain = p.k_tau / p.k_tau_n;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.noise_seed);

    let mut trace = SimTrace::default();
    for v in [
        &mut trace.time,
        &mut trace.q_ref,
        &mut trace.q,
        &mut trace.q_dot,
        &mut trace.tau_cmd,
        &mut trace.tau_dis_hat,
        &mut trace.tau_d,
    ] {
        v.reserve(n);
    }

    let mut plant = (0.0, 0.0);
    let mut dob = DobState::default();
    let mut pd = PdState::default();
    for k in 0..n {
        let t = k as f64 * p.t_s;
        let q_ref = scenario.reference.value(t);
        let tau_d = scenario.disturbance.value(t);
        let noise = if scenario.noise_std > 0.0 {
            scenario.noise_std * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        let (q, q_dot) = plant;
        let accel = step_pd(&mut pd, q_ref, q, p);
        let (tau_cmd, tau_hat) = step_dob(&mut dob, q_dot + noise, p.j_mn * accel, p);

        trace.time.push(t);
        trace.q_ref.push(q_ref);
        trace.q.push(q);
        trace.q_dot.push(q_dot);
        trace.tau_cmd.push(tau_cmd);
        trace.tau_dis_hat.push(tau_hat);
        trace.tau_d.push(tau_d);
        if !(q.abs() <= scenario.divergence_bound) {
            trace.diverged_at = Some(k);
            break;
        }
        plant = step_plant(plant, torque_gain * tau_cmd - tau_d, p.j_m, p.t_s);
    }
    Ok(trace)
}

/// Runs independent scenarios in parallel; output order matches input order.
pub fn run_many(scenarios: &[Scenario]) -> Result<Vec<SimTrace>> {
    scenarios.par_iter().map(run).collect()
}
