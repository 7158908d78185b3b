//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dobscope_core::bode::{bode_integral, BodeOptions};
use dobscope_core::dobmodels::{self, reference_prefactor_discrete};
use dobscope_core::rootlocus::{critical_bandwidth, family_builder, sweep};
use dobscope_core::simulate::{run, Scenario, Signal};
use dobscope_core::xfer::log_grid;
use dobscope_core::{DobParams, Domain, LoopFamily, RationalTF};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const RUNTIME_LIMIT: Duration = Duration::from_secs(1);
/// Discrete outer-loop critical bandwidth for the reference parameter set.
const GOLDEN_OUTER_G_STAR: f64 = 4000.0;

fn reference(g: f64) -> DobParams {
    DobParams::position_control_reference(g)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn continuous_bode_integral() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for ag in [10.0, 100.0, 1000.0] {
        let start = Instant::now();
        let ls = dobmodels::inner_loop_continuous(&reference(ag)).map_err(err)?;
        let r = bode_integral(&ls, &BodeOptions::default()).map_err(err)?;
        slowest = slowest.max(start.elapsed());
        let expected = -PI / 2.0 * ag;
        worst = worst.max(((r.lhs_numeric - expected) / expected).abs());
    }
    check(
        worst <= 5e-3 && slowest < RUNTIME_LIMIT,
        format!("max relative error {worst:.2e} (limit 5e-3), slowest case {slowest:?}"),
    )
}

fn discrete_bode_integral() -> Outcome {
    let ts = 5e-4;
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for agt in [0.1, 0.5, 1.0, 1.5, 1.9] {
        let start = Instant::now();
        let ls = dobmodels::inner_loop_discrete(&reference(agt / ts)).map_err(err)?;
        let r = bode_integral(&ls, &BodeOptions::default()).map_err(err)?;
        slowest = slowest.max(start.elapsed());
        worst = worst.max(r.lhs_numeric.abs());
    }
    check(
        worst <= 1e-3 && slowest < RUNTIME_LIMIT,
        format!("max |lhs| {worst:.2e} (limit 1e-3), slowest case {slowest:?}"),
    )
}

fn unstable_pole_integral() -> Outcome {
    // inner factor with a g Ts = 3 (open-loop pole at -2), closed by -0.5/z;
    // closed-loop poles sit at +-j/sqrt(2)
    let p = DobParams {
        t_s: 5e-4,
        ..reference(6000.0)
    };
    let d = Domain::discrete(p.t_s).map_err(err)?;
    let gain = RationalTF::from_real(&[-0.5], &[0.0, 1.0], d).map_err(err)?;
    let l = reference_prefactor_discrete(&p)
        .map_err(err)?
        .series(&gain)
        .map_err(err)?;
    let ls = l.sensitivity_from_open_loop("unstable-pole").map_err(err)?;
    let r = bode_integral(&ls, &BodeOptions::default()).map_err(err)?;
    let expected = 2.0 * PI * 2f64.ln();
    let rel = ((r.lhs_numeric - expected) / expected).abs();
    check(
        rel <= 1e-2 && r.unstable_open_loop_poles == 1,
        format!(
            "lhs {:.6} vs 2 pi ln 2 = {expected:.6}, relative error {rel:.2e} (limit 1e-2)",
            r.lhs_numeric
        ),
    )
}

fn waterbed_monotonicity() -> Outcome {
    let gs = [500.0, 1000.0, 2000.0, 3000.0];
    let opts = BodeOptions::default();
    let mut peaks = Vec::new();
    let mut worst_lhs: f64 = 0.0;
    let mut worst_amp: f64 = 0.0;
    for g in gs {
        let disc = bode_integral(
            &dobmodels::inner_loop_discrete(&reference(g)).map_err(err)?,
            &opts,
        )
        .map_err(err)?;
        let cont = bode_integral(
            &dobmodels::inner_loop_continuous(&reference(g)).map_err(err)?,
            &opts,
        )
        .map_err(err)?;
        peaks.push(disc.peak_sensitivity);
        worst_lhs = worst_lhs.max(disc.lhs_numeric.abs());
        worst_amp = worst_amp.max(cont.amplification_area);
    }
    let increasing = peaks.windows(2).all(|w| w[1] > w[0]);
    check(
        increasing && worst_lhs <= 1e-3 && worst_amp <= 1e-6,
        format!(
            "discrete peaks {peaks:.4?} strictly increasing: {increasing}; max |lhs| {worst_lhs:.2e}; continuous max amplification {worst_amp:.2e}"
        ),
    )
}

fn critical_bandwidth_closed_form() -> Outcome {
    let mut worst: f64 = 0.0;
    for alpha in [0.5, 1.0, 2.0, 4.0] {
        for ts in [1e-4, 5e-4] {
            let base = DobParams {
                t_s: ts,
                ..reference(1.0)
            }
            .with_alpha(alpha);
            let c = critical_bandwidth(family_builder(LoopFamily::InnerDiscrete, base), (1.0, 1e5))
                .map_err(err)?;
            let expected = 2.0 / (alpha * ts);
            worst = worst.max(((c.g_star - expected) / expected).abs());
        }
    }
    check(
        worst <= 1e-6,
        format!("max relative error vs 2/(alpha Ts) over 8 cases {worst:.2e} (limit 1e-6)"),
    )
}

fn continuous_discrete_asymmetry() -> Outcome {
    let base = reference(1.0);
    let c = critical_bandwidth(
        family_builder(LoopFamily::OuterDiscrete, base),
        (100.0, 1e5),
    )
    .map_err(err)?;
    let golden_rel = ((c.g_star - GOLDEN_OUTER_G_STAR) / GOLDEN_OUTER_G_STAR).abs();
    let grid = log_grid(1.0, 1e5, 400).map_err(err)?;
    let locus = sweep(family_builder(LoopFamily::OuterContinuous, base), &grid).map_err(err)?;
    let all_stable = locus.stable.iter().all(|&s| s);
    check(
        golden_rel <= 1e-6 && all_stable,
        format!(
            "discrete g_star {:.9} (golden {GOLDEN_OUTER_G_STAR}, rel {golden_rel:.1e}); continuous stable on all {} grid points up to 1e5: {all_stable}",
            c.g_star,
            grid.len()
        ),
    )
}

fn simulator_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for (g, kp, kd) in [
        (1000.0, 5000.0, 25.0),
        (300.0, 2000.0, 60.0),
        (2500.0, 800.0, 10.0),
    ] {
        let p = DobParams {
            k_p: kp,
            k_d: kd,
            ..reference(g)
        };
        let maps = dobmodels::closed_loop_maps_discrete(&p).map_err(err)?;
        let step = RationalTF::from_real(&[0.0, 1.0], &[-1.0, 1.0], p.domain().map_err(err)?)
            .map_err(err)?;
        let expected = maps
            .auxiliary
            .series(&step)
            .map_err(err)?
            .expansion_at_infinity(200)
            .map_err(err)?;
        let tr = run(&Scenario::new(p, 199.0 * p.t_s, Signal::step(1.0, 0.0))).map_err(err)?;
        if tr.len() != 200 {
            return Err(format!("expected 200 samples, got {}", tr.len()));
        }
        let scale = expected.iter().map(|e| e.re.abs()).fold(0.0, f64::max);
        let diff =
            tr.q.iter()
                .zip(&expected)
                .map(|(q, e)| (q - e.re).abs())
                .fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    check(
        worst <= 1e-8,
        format!("max relative deviation over 200 samples, 3 tuples {worst:.2e} (limit 1e-8)"),
    )
}

fn stability_boundary_reproduction() -> Outcome {
    let base = reference(1.0);
    let c = critical_bandwidth(
        family_builder(LoopFamily::OuterDiscrete, base),
        (100.0, 1e5),
    )
    .map_err(err)?;
    let trace = |g: f64| {
        run(&Scenario::new(
            base.with_g_dob(g),
            1.0,
            Signal::step(1.0, 0.0),
        ))
    };
    let below = trace(0.5 * c.g_star).map_err(err)?;
    let above = trace(1.2 * c.g_star).map_err(err)?;
    check(
        below.diverged_at.is_none() && above.diverged_at.is_some(),
        format!(
            "g_star {:.3}: 0.5x diverged_at {:?}, 1.2x diverged_at {:?}",
            c.g_star, below.diverged_at, above.diverged_at
        ),
    )
}

fn sampling_time_relaxation() -> Outcome {
    let g_star = |ts: f64| {
        let base = DobParams {
            t_s: ts,
            ..reference(1.0)
        };
        critical_bandwidth(
            family_builder(LoopFamily::OuterDiscrete, base),
            (100.0, 1e5),
        )
        .map(|c| c.g_star)
    };
    let fast = g_star(1e-4).map_err(err)?;
    let slow = g_star(5e-4).map_err(err)?;
    check(
        fast > slow,
        format!("g_star {fast:.3} at Ts = 1e-4 vs {slow:.3} at Ts = 5e-4"),
    )
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .collect()
        })
        .unwrap_or_default();
    names.sort();
    names
}

fn determinism_and_round_trip() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_dobscope");
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = tempfile::tempdir().map_err(err)?;
    let runs = [
        ("freq", "fig4b.ini"),
        ("bode", "fig4b.ini"),
        ("rootlocus", "fig5a-right.ini"),
        ("simulate", "fig6.ini"),
        ("sweep", "fig4c.ini"),
    ];
    let mut compared = 0;
    for (cmd, cfg) in runs {
        let first = tmp.path().join(format!("{cmd}-first"));
        let status = Command::new(bin)
            .args([cmd, "--quiet", "--config"])
            .arg(configs.join(cfg))
            .arg("--out")
            .arg(&first)
            .status()
            .map_err(err)?;
        if !status.success() {
            return Err(format!("{cmd} --config {cfg} exited with {status}"));
        }
        let names = files_in(&first);
        for name in &names {
            // replay this file's header and demand an identical output set
            let replay = tmp.path().join(format!("{cmd}-replay-{name}"));
            let status = Command::new(bin)
                .args([cmd, "--quiet", "--config"])
                .arg(first.join(name))
                .arg("--out")
                .arg(&replay)
                .status()
                .map_err(err)?;
            if !status.success() {
                return Err(format!("replay of {name} exited with {status}"));
            }
            if files_in(&replay) != names {
                return Err(format!("replay of {name} produced a different file set"));
            }
            for other in &names {
                let a = std::fs::read(first.join(other)).map_err(err)?;
                let b = std::fs::read(replay.join(other)).map_err(err)?;
                if a != b {
                    return Err(format!("{other} differs after replaying {name}"));
                }
                compared += 1;
            }
        }
    }
    check(
        compared > 0,
        format!("{compared} file comparisons across 5 subcommands, all bit-identical"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("continuous Bode integral", continuous_bode_integral),
        ("discrete Bode integral", discrete_bode_integral),
        ("unstable-pole integral", unstable_pole_integral),
        ("waterbed monotonicity", waterbed_monotonicity),
        (
            "critical bandwidth closed form",
            critical_bandwidth_closed_form,
        ),
        (
            "continuous/discrete asymmetry",
            continuous_discrete_asymmetry,
        ),
        (
            "simulator/transfer-function equivalence",
            simulator_equivalence,
        ),
        (
            "stability boundary in simulation",
            stability_boundary_reproduction,
        ),
        ("sampling-time relaxation", sampling_time_relaxation),
        ("determinism and round-trip", determinism_and_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
