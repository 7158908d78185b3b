//! Subcommand bodies. Each one computes every output in memory and returns
//! it; nothing touches the file system until all analyses have succeeded.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde_json::{json, Value};

use dobscope_core::bode::{bode_integral, BodeOptions};
use dobscope_core::rootlocus::{
    closed_loop_poles, critical_bandwidth, family_builder, stability_margin, sweep,
};
use dobscope_core::xfer::{log_grid, BOUNDARY_TOL};
use dobscope_core::{DobParams, Error, LoopFamily};

use crate::config::{csv_header, json_header, RunConfig};
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Freq,
    Bode,
    Rootlocus,
    Simulate,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Freq => "freq",
            Command::Bode => "bode",
            Command::Rootlocus => "rootlocus",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
        }
    }
}

pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

pub struct Outcome {
    pub files: Vec<OutputFile>,
    /// Per-entry failures that were recorded in the outputs.
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
}

/// Full-precision CSV number (17 significant digits).
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn pair(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn json_file(name: String, value: &Value) -> OutputFile {
    let mut contents = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    contents.push('\n');
    OutputFile { name, contents }
}

fn tuple_json(p: &DobParams) -> Value {
    json!({ "alpha": p.alpha(), "g_dob": p.g_dob, "t_s": p.t_s })
}

pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    match cmd {
        Command::Freq => freq(cfg),
        Command::Bode => bode(cfg),
        Command::Rootlocus => rootlocus(cfg),
        Command::Simulate => simulate(cfg),
        Command::Sweep => stability_map(cfg),
    }
}

fn frequency_grid(
    cfg: &RunConfig,
    family: LoopFamily,
    p: &DobParams,
) -> Result<Vec<f64>, CliError> {
    let corner = p.alpha() * p.g_dob;
    let lo = cfg.grid.omega_min.unwrap_or(corner * 1e-4);
    let mut hi = cfg.grid.omega_max.unwrap_or(corner * 1e4);
    if family.is_discrete() {
        hi = hi.min(std::f64::consts::PI / p.t_s);
    }
    Ok(log_grid(lo, hi, cfg.grid.points)?)
}

fn freq(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let command = "freq";
    let prefix = cfg.prefix_or(command);
    let header = csv_header(command, cfg);
    let mut files = Vec::new();
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for &family in &cfg.grid.family {
        for (i, p) in cfg.tuples().iter().enumerate() {
            let ls = family.build(p)?;
            let grid = frequency_grid(cfg, family, p)?;
            let s = ls.sensitivity.frequency_response(&grid)?;
            let t = ls.complementary.frequency_response(&grid)?;
            let (s_db, s_ph, t_db, t_ph) = (
                s.magnitude_db(),
                s.phase_deg(),
                t.magnitude_db(),
                t.phase_deg(),
            );
            let mut csv = header.clone();
            csv.push_str("omega_rad_s,mag_S_dB,phase_S_deg,mag_T_dB,phase_T_deg\n");
            for k in 0..grid.len() {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    num(grid[k]),
                    num(s_db[k]),
                    num(s_ph[k]),
                    num(t_db[k]),
                    num(t_ph[k])
                );
            }
            let name = format!("{prefix}_{family}_{i:03}.csv");
            let poles = ls.sensitivity.classify_poles()?;
            let mut notes = Vec::new();
            if !poles.marginal.is_empty() {
                notes.push(format!(
                    "{} closed-loop pole(s) on the stability boundary",
                    poles.marginal.len()
                ));
            }
            if !poles.unstable.is_empty() {
                notes.push(format!(
                    "{} unstable closed-loop pole(s)",
                    poles.unstable.len()
                ));
            }
            let hits = s.pole_hits();
            if !hits.is_empty() {
                notes.push(format!("{} grid point(s) hit a pole", hits.len()));
            }
            warnings.extend(notes.iter().map(|n| format!("{name}: {n}")));
            let peak = s_db
                .iter()
                .copied()
                .filter(|x| x.is_finite())
                .fold(f64::NEG_INFINITY, f64::max);
            entries.push(json!({
                "file": name,
                "family": family.name(),
                "tuple": tuple_json(p),
                "peak_S_dB": peak,
                "marginal_poles": poles.marginal.iter().copied().map(pair).collect::<Vec<_>>(),
                "unstable_poles": poles.unstable.iter().copied().map(pair).collect::<Vec<_>>(),
                "warnings": notes,
            }));
            files.push(OutputFile {
                name,
                contents: csv,
            });
        }
    }
    let index = json!({ "header": json_header(command, cfg), "files": entries });
    files.push(json_file(format!("{prefix}_index.json"), &index));
    Ok(Outcome {
        files,
        failures: Vec::new(),
        warnings,
    })
}

fn bode(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let command = "bode";
    let prefix = cfg.prefix_or(command);
    let opts = BodeOptions::default();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for &family in &cfg.grid.family {
        for p in cfg.tuples() {
            let result = family.build(&p).and_then(|ls| bode_integral(&ls, &opts));
            let mut entry = json!({ "family": family.name(), "tuple": tuple_json(&p) });
            match result {
                Ok(report) => {
                    entry["report"] = serde_json::to_value(&report).expect("report serializes")
                }
                Err(e) => {
                    failures.push(format!("{family} g_dob={}: {e}", p.g_dob));
                    entry["error"] = json!(e.to_string());
                }
            }
            entries.push(entry);
        }
    }
    let doc = json!({ "header": json_header(command, cfg), "reports": entries });
    Ok(Outcome {
        files: vec![json_file(format!("{prefix}.json"), &doc)],
        failures,
        warnings: Vec::new(),
    })
}

fn rootlocus(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let command = "rootlocus";
    let prefix = cfg.prefix_or(command);
    let header = csv_header(command, cfg);
    let grid = cfg.g_grid();
    let bracket = (
        cfg.grid.bracket_low.unwrap_or(cfg.grid.g_min),
        cfg.grid.bracket_high.unwrap_or(cfg.grid.g_max),
    );
    let mut files = Vec::new();
    let mut entries = Vec::new();
    for &family in &cfg.grid.family {
        for (i, p) in cfg.tuples_without_g().iter().enumerate() {
            let locus = sweep(family_builder(family, *p), &grid)?;
            let mut csv = header.clone();
            csv.push('g');
            for b in 1..=locus.branch_count() {
                let _ = write!(csv, ",re_pole_{b},im_pole_{b}");
            }
            csv.push_str(",stable\n");
            for (k, g) in grid.iter().enumerate() {
                csv.push_str(&num(*g));
                for z in &locus.poles[k] {
                    let _ = write!(csv, ",{},{}", num(z.re), num(z.im));
                }
                let _ = writeln!(csv, ",{}", locus.stable[k]);
            }
            let name = format!("{prefix}_{family}_{i:03}.csv");
            let critical = match critical_bandwidth(family_builder(family, *p), bracket) {
                Ok(c) => json!({
                    "g_star": c.g_star,
                    "boundary_pole": [c.boundary_pole_re, c.boundary_pole_im],
                    "bracket": [c.bracket.0, c.bracket.1],
                    "margin": c.margin,
                }),
                Err(e @ (Error::BadBracket { .. } | Error::NoCrossing { .. })) => {
                    json!({ "not_found": e.to_string() })
                }
                Err(e) => return Err(e.into()),
            };
            entries.push(json!({
                "file": name,
                "family": family.name(),
                "alpha": p.alpha(),
                "t_s": p.t_s,
                "first_unstable_g": locus.first_unstable().map(|k| grid[k]),
                "discontinuities": locus.discontinuities.len(),
                "critical_bandwidth": critical,
            }));
            files.push(OutputFile {
                name,
                contents: csv,
            });
        }
    }
    let index = json!({ "header": json_header(command, cfg), "loci": entries });
    files.push(json_file(format!("{prefix}_index.json"), &index));
    Ok(Outcome {
        files,
        failures: Vec::new(),
        warnings: Vec::new(),
    })
}

fn simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let command = "simulate";
    let prefix = cfg.prefix_or(command);
    let header = csv_header(command, cfg);
    let scenarios: Vec<_> = cfg
        .tuples()
        .into_iter()
        .map(|p| cfg.scenario_for(p))
        .collect();
    let traces = dobscope_core::simulate::run_many(&scenarios)?;
    let mut files = Vec::new();
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for (i, (sc, tr)) in scenarios.iter().zip(&traces).enumerate() {
        let name = format!("{prefix}_{i:03}.csv");
        let mut csv = header.clone();
        match tr.diverged_at {
            Some(k) => {
                let _ = writeln!(csv, "# diverged_at: {k}");
                warnings.push(format!("{name}: diverged at sample {k}"));
            }
            None => csv.push_str("# diverged_at: none\n"),
        }
        csv.push_str("time,q_ref,q,q_dot,tau_cmd,tau_dis_hat,tau_d\n");
        for k in 0..tr.len() {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                num(tr.time[k]),
                num(tr.q_ref[k]),
                num(tr.q[k]),
                num(tr.q_dot[k]),
                num(tr.tau_cmd[k]),
                num(tr.tau_dis_hat[k]),
                num(tr.tau_d[k])
            );
        }
        entries.push(json!({
            "file": name,
            "tuple": tuple_json(&sc.params),
            "samples": tr.len(),
            "diverged_at": tr.diverged_at,
        }));
        files.push(OutputFile {
            name,
            contents: csv,
        });
    }
    let index = json!({ "header": json_header(command, cfg), "traces": entries });
    files.push(json_file(format!("{prefix}_index.json"), &index));
    Ok(Outcome {
        files,
        failures: Vec::new(),
        warnings,
    })
}

fn stability_map(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let command = "sweep";
    let prefix = cfg.prefix_or(command);
    let header = csv_header(command, cfg);
    let mut files = Vec::new();
    for &family in &cfg.grid.family {
        let mut csv = header.clone();
        csv.push_str("alpha,g_dob,t_s,margin,stable\n");
        for p in cfg.tuples() {
            let l = family.build(&p)?.open_loop;
            let margin = stability_margin(&closed_loop_poles(&l)?, l.domain());
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                num(p.alpha()),
                num(p.g_dob),
                num(p.t_s),
                num(margin),
                margin < -BOUNDARY_TOL
            );
        }
        files.push(OutputFile {
            name: format!("{prefix}_{family}.csv"),
            contents: csv,
        });
    }
    Ok(Outcome {
        files,
        failures: Vec::new(),
        warnings: Vec::new(),
    })
}
