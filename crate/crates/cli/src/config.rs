//! Flat INI-style run configuration.
//!
//! Every key has a documented default; `auto` defers the value to the
//! analysis (for example a frequency grid scaled to the loop corner). The
//! resolved configuration prints back to text that parses to the same
//! values, which is what makes emitted files replayable.

use std::fmt::Write as _;
use std::str::FromStr;

use dobscope_core::simulate::{default_divergence_bound, Scenario, Signal, SignalKind};
use dobscope_core::{DobParams, LoopFamily};

use crate::error::CliError;

pub const FORMAT_TAG: &str = "dobscope-format 1";
const SECTIONS: [&str; 4] = ["params", "grid", "scenario", "output"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub family: Vec<LoopFamily>,
    /// `None` keeps `j_mn` from `[params]`.
    pub alpha: Option<Vec<f64>>,
    pub g_dob: Option<Vec<f64>>,
    pub t_s: Option<Vec<f64>>,
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub points: usize,
    pub g_min: f64,
    pub g_max: f64,
    pub g_points: usize,
    pub g_spacing: Spacing,
    pub bracket_low: Option<f64>,
    pub bracket_high: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub duration: f64,
    pub reference: Signal,
    pub disturbance: Signal,
    pub noise_std: f64,
    pub noise_seed: u64,
    pub divergence_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: DobParams,
    pub grid: GridConfig,
    pub scenario: ScenarioConfig,
    pub prefix: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: DobParams::position_control_reference(1000.0),
            grid: GridConfig {
                family: vec![LoopFamily::InnerDiscrete],
                alpha: None,
                g_dob: None,
                t_s: None,
                omega_min: None,
                omega_max: None,
                points: 2000,
                g_min: 100.0,
                g_max: 10000.0,
                g_points: 100,
                g_spacing: Spacing::Linear,
                bracket_low: None,
                bracket_high: None,
            },
            scenario: ScenarioConfig {
                duration: 1.0,
                reference: Signal::step(1.0, 0.0),
                disturbance: Signal::none(),
                noise_std: 0.0,
                noise_seed: 0,
                divergence_bound: None,
            },
            prefix: None,
        }
    }
}

/// Where a setting came from, for error messages.
#[derive(Clone, Copy, Debug)]
pub enum Origin {
    Line(usize),
    Flag,
    /// Checks across the fully merged configuration.
    Resolved,
}

fn parse_f64(v: &str) -> Result<f64, String> {
    let x = f64::from_str(v).map_err(|_| format!("'{v}' is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("'{v}' is not finite"))
    }
}

fn parse_auto<T>(v: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, String> {
    if v == "auto" {
        Ok(None)
    } else {
        f(v).map(Some)
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    if v.trim().is_empty() {
        return Err("empty list".into());
    }
    v.split(',').map(|s| parse_f64(s.trim())).collect()
}

fn parse_usize(v: &str) -> Result<usize, String> {
    usize::from_str(v).map_err(|_| format!("'{v}' is not a non-negative integer"))
}

fn parse_families(v: &str) -> Result<Vec<LoopFamily>, String> {
    if v.trim().is_empty() {
        return Err("empty list".into());
    }
    v.split(',')
        .map(|s| LoopFamily::from_str(s.trim()))
        .collect()
}

fn set_signal_field(sig: &mut Signal, field: &str, v: &str) -> Result<bool, String> {
    match field {
        "" => sig.kind = SignalKind::from_str(v).map_err(|e| e.to_string())?,
        "_amplitude" => sig.amplitude = parse_f64(v)?,
        "_onset" => sig.onset = parse_f64(v)?,
        "_frequency" => sig.frequency = parse_f64(v)?,
        _ => return Ok(false),
    }
    Ok(true)
}

impl RunConfig {
    /// Apply one `key = value`; `Ok(false)` means the key is unknown.
    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<bool, String> {
        let p = &mut self.params;
        let g = &mut self.grid;
        let s = &mut self.scenario;
        match (section, key) {
            ("params", "j_m") => p.j_m = parse_f64(v)?,
            ("params", "j_mn") => p.j_mn = parse_f64(v)?,
            ("params", "k_tau") => p.k_tau = parse_f64(v)?,
            ("params", "k_tau_n") => p.k_tau_n = parse_f64(v)?,
            ("params", "g_dob") => p.g_dob = parse_f64(v)?,
            ("params", "t_s") => p.t_s = parse_f64(v)?,
            ("params", "k_p") => p.k_p = parse_f64(v)?,
            ("params", "k_d") => p.k_d = parse_f64(v)?,
            ("grid", "family") => g.family = parse_families(v)?,
            ("grid", "alpha") => g.alpha = parse_auto(v, parse_list)?,
            ("grid", "g_dob") => g.g_dob = parse_auto(v, parse_list)?,
            ("grid", "t_s") => g.t_s = parse_auto(v, parse_list)?,
            ("grid", "omega_min") => g.omega_min = parse_auto(v, parse_f64)?,
            ("grid", "omega_max") => g.omega_max = parse_auto(v, parse_f64)?,
            ("grid", "points") => g.points = parse_usize(v)?,
            ("grid", "g_min") => g.g_min = parse_f64(v)?,
            ("grid", "g_max") => g.g_max = parse_f64(v)?,
            ("grid", "g_points") => g.g_points = parse_usize(v)?,
            ("grid", "g_spacing") => {
                g.g_spacing = match v {
                    "linear" => Spacing::Linear,
                    "log" => Spacing::Log,
                    _ => return Err(format!("'{v}' is not linear or log")),
                }
            }
            ("grid", "bracket_low") => g.bracket_low = parse_auto(v, parse_f64)?,
            ("grid", "bracket_high") => g.bracket_high = parse_auto(v, parse_f64)?,
            ("scenario", "duration") => s.duration = parse_f64(v)?,
            ("scenario", "noise_std") => s.noise_std = parse_f64(v)?,
            ("scenario", "noise_seed") => {
                s.noise_seed =
                    u64::from_str(v).map_err(|_| format!("'{v}' is not an unsigned integer"))?
            }
            ("scenario", "divergence_bound") => s.divergence_bound = parse_auto(v, parse_f64)?,
            ("scenario", k) if k.starts_with("reference") => {
                return set_signal_field(&mut s.reference, &k["reference".len()..], v)
            }
            ("scenario", k) if k.starts_with("disturbance") => {
                return set_signal_field(&mut s.disturbance, &k["disturbance".len()..], v)
            }
            ("output", "prefix") => {
                self.prefix = parse_auto(v, |x| {
                    if x.is_empty() || x.contains(['/', '\\']) {
                        Err(format!("'{x}' is not a plain file prefix"))
                    } else {
                        Ok(x.to_string())
                    }
                })?
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn apply(&mut self, section: &str, key: &str, v: &str, origin: Origin) -> Result<(), CliError> {
        let err = |msg: String| CliError::config(origin, msg);
        if !SECTIONS.contains(&section) {
            return Err(err(format!("unknown section [{section}]")));
        }
        match self.set(section, key, v) {
            Ok(true) => Ok(()),
            Ok(false) => Err(err(format!("unknown key '{key}' in [{section}]"))),
            Err(m) => Err(err(format!("{section}.{key}: {m}"))),
        }
    }

    /// Parse INI text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let origin = Origin::Line(i + 1);
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(CliError::config(
                        origin,
                        format!("unknown section [{name}]"),
                    ));
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(
                    origin,
                    format!("expected 'key = value', got '{line}'"),
                ));
            };
            let Some(sec) = section.as_deref() else {
                return Err(CliError::config(origin, "key before any [section]".into()));
            };
            let key = key.trim();
            if !seen.insert((sec.to_string(), key.to_string())) {
                return Err(CliError::config(
                    origin,
                    format!("duplicate key '{key}' in [{sec}]"),
                ));
            }
            cfg.apply(sec, key, value.trim(), origin)?;
        }
        Ok(cfg)
    }

    /// Apply a `section.key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), CliError> {
        let bad = || {
            CliError::config(
                Origin::Flag,
                format!("--set expects section.key=value, got '{spec}'"),
            )
        };
        let (path, value) = spec.split_once('=').ok_or_else(bad)?;
        let (section, key) = path.trim().split_once('.').ok_or_else(bad)?;
        self.apply(section.trim(), key.trim(), value.trim(), Origin::Flag)
    }

    /// Cross-field checks that run after every source has been applied.
    pub fn validate(&self) -> Result<(), CliError> {
        let err = |m: String| CliError::config(Origin::Resolved, m);
        self.params.validate().map_err(|e| err(e.to_string()))?;
        let g = &self.grid;
        if g.points < 2 {
            return Err(err("grid.points must be >= 2".into()));
        }
        if g.g_points == 0 {
            return Err(err("grid.g_points must be > 0".into()));
        }
        if !(g.g_min < g.g_max) || g.g_min < 0.0 || (g.g_spacing == Spacing::Log && g.g_min <= 0.0)
        {
            return Err(err(format!("invalid g range [{}, {}]", g.g_min, g.g_max)));
        }
        if let (Some(lo), Some(hi)) = (g.omega_min, g.omega_max) {
            if !(lo > 0.0 && lo < hi) {
                return Err(err(format!("invalid omega range [{lo}, {hi}]")));
            }
        }
        for p in self.tuples() {
            p.validate().map_err(|e| err(e.to_string()))?;
        }
        Ok(())
    }

    /// Parameter sets for every `(alpha, g_dob, t_s)` combination, alpha outermost.
    pub fn tuples(&self) -> Vec<DobParams> {
        let base = self.params;
        let alphas: Vec<Option<f64>> = match &self.grid.alpha {
            None => vec![None],
            Some(v) => v.iter().copied().map(Some).collect(),
        };
        let gs = self.grid.g_dob.clone().unwrap_or_else(|| vec![base.g_dob]);
        let tss = self.grid.t_s.clone().unwrap_or_else(|| vec![base.t_s]);
        let mut out = Vec::new();
        for a in &alphas {
            for &g in &gs {
                for &ts in &tss {
                    let mut p = DobParams {
                        g_dob: g,
                        t_s: ts,
                        ..base
                    };
                    if let Some(a) = a {
                        p = p.with_alpha(*a);
                    }
                    out.push(p);
                }
            }
        }
        out
    }

    /// Tuples over `(alpha, t_s)` only, for analyses that sweep `g_dob` themselves.
    pub fn tuples_without_g(&self) -> Vec<DobParams> {
        let mut c = self.clone();
        c.grid.g_dob = None;
        c.tuples()
    }

    pub fn g_grid(&self) -> Vec<f64> {
        let g = &self.grid;
        let n = g.g_points;
        if n == 1 {
            return vec![g.g_min];
        }
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if i == n - 1 {
                    return g.g_max;
                }
                match g.g_spacing {
                    Spacing::Linear => g.g_min + (g.g_max - g.g_min) * t,
                    Spacing::Log => g.g_min * (g.g_max / g.g_min).powf(t),
                }
            })
            .collect()
    }

    pub fn scenario_for(&self, params: DobParams) -> Scenario {
        let s = &self.scenario;
        Scenario {
            params,
            duration: s.duration,
            reference: s.reference,
            disturbance: s.disturbance,
            noise_std: s.noise_std,
            noise_seed: s.noise_seed,
            divergence_bound: s
                .divergence_bound
                .unwrap_or_else(|| default_divergence_bound(&s.reference)),
        }
    }

    pub fn prefix_or<'a>(&'a self, command: &'a str) -> &'a str {
        self.prefix.as_deref().unwrap_or(command)
    }

    /// Canonical text form; parsing it yields an identical configuration.
    pub fn to_ini(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map_or_else(|| "auto".into(), |x| x.to_string())
        }
        fn list(v: &Option<Vec<f64>>) -> String {
            match v {
                None => "auto".into(),
                Some(v) => v.iter().map(f64::to_string).collect::<Vec<_>>().join(", "),
            }
        }
        let p = &self.params;
        let g = &self.grid;
        let s = &self.scenario;
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "[params]");
        for (k, v) in [
            ("j_m", p.j_m),
            ("j_mn", p.j_mn),
            ("k_tau", p.k_tau),
            ("k_tau_n", p.k_tau_n),
            ("g_dob", p.g_dob),
            ("t_s", p.t_s),
            ("k_p", p.k_p),
            ("k_d", p.k_d),
        ] {
            let _ = writeln!(w, "{k} = {v}");
        }
        let _ = writeln!(w, "[grid]");
        let families: Vec<&str> = g.family.iter().map(|f| f.name()).collect();
        let _ = writeln!(w, "family = {}", families.join(", "));
        let _ = writeln!(w, "alpha = {}", list(&g.alpha));
        let _ = writeln!(w, "g_dob = {}", list(&g.g_dob));
        let _ = writeln!(w, "t_s = {}", list(&g.t_s));
        let _ = writeln!(w, "omega_min = {}", opt(g.omega_min));
        let _ = writeln!(w, "omega_max = {}", opt(g.omega_max));
        let _ = writeln!(w, "points = {}", g.points);
        let _ = writeln!(w, "g_min = {}", g.g_min);
        let _ = writeln!(w, "g_max = {}", g.g_max);
        let _ = writeln!(w, "g_points = {}", g.g_points);
        let spacing = match g.g_spacing {
            Spacing::Linear => "linear",
            Spacing::Log => "log",
        };
        let _ = writeln!(w, "g_spacing = {spacing}");
        let _ = writeln!(w, "bracket_low = {}", opt(g.bracket_low));
        let _ = writeln!(w, "bracket_high = {}", opt(g.bracket_high));
        let _ = writeln!(w, "[scenario]");
        let _ = writeln!(w, "duration = {}", s.duration);
        for (name, sig) in [("reference", &s.reference), ("disturbance", &s.disturbance)] {
            let _ = writeln!(w, "{name} = {}", sig.kind.name());
            let _ = writeln!(w, "{name}_amplitude = {}", sig.amplitude);
            let _ = writeln!(w, "{name}_onset = {}", sig.onset);
            let _ = writeln!(w, "{name}_frequency = {}", sig.frequency);
        }
        let _ = writeln!(w, "noise_std = {}", s.noise_std);
        let _ = writeln!(w, "noise_seed = {}", s.noise_seed);
        let _ = writeln!(w, "divergence_bound = {}", opt(s.divergence_bound));
        let _ = writeln!(w, "[output]");
        let _ = writeln!(w, "prefix = {}", self.prefix.as_deref().unwrap_or("auto"));
        out
    }
}

/// A config source: plain INI, or a file previously emitted by this tool.
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Command recorded in an emitted file's header, if any.
    pub command: Option<String>,
}

pub fn load(text: &str) -> Result<LoadedConfig, CliError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| CliError::config(Origin::Line(e.line()), format!("invalid JSON: {e}")))?;
        let header = &v["header"];
        if header["format"] != FORMAT_TAG {
            return Err(CliError::config(
                Origin::Line(1),
                "JSON file has no dobscope header".into(),
            ));
        }
        let ini = header["config"]
            .as_str()
            .ok_or_else(|| CliError::config(Origin::Line(1), "header has no config text".into()))?;
        return Ok(LoadedConfig {
            config: RunConfig::parse(ini)?,
            command: header["command"].as_str().map(str::to_string),
        });
    }
    if let Some(rest) = trimmed.strip_prefix("# ") {
        if rest.lines().next() == Some(FORMAT_TAG) {
            return load_csv_header(text);
        }
    }
    Ok(LoadedConfig {
        config: RunConfig::parse(text)?,
        command: None,
    })
}

fn load_csv_header(text: &str) -> Result<LoadedConfig, CliError> {
    let mut command = None;
    let mut ini = String::new();
    let mut in_config = false;
    for line in text.lines() {
        let Some(body) = line
            .strip_prefix("# ")
            .or_else(|| (line == "#").then_some(""))
        else {
            break;
        };
        if in_config {
            if body == "end-config" {
                return Ok(LoadedConfig {
                    config: RunConfig::parse(&ini)?,
                    command,
                });
            }
            ini.push_str(body);
            ini.push('\n');
        } else if let Some(c) = body.strip_prefix("command: ") {
            command = Some(c.to_string());
        } else if body == "config:" {
            in_config = true;
        }
    }
    Err(CliError::config(
        Origin::Line(1),
        "emitted file header has no complete config block".into(),
    ))
}

/// Comment header written at the top of every CSV file.
pub fn csv_header(command: &str, cfg: &RunConfig) -> String {
    let mut out = format!("# {FORMAT_TAG}\n# command: {command}\n# config:\n");
    for line in cfg.to_ini().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str("# end-config\n");
    out
}

/// Header object embedded as the first field of every JSON file.
pub fn json_header(command: &str, cfg: &RunConfig) -> serde_json::Value {
    serde_json::json!({
        "format": FORMAT_TAG,
        "command": command,
        "config": cfg.to_ini(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_ini()).unwrap(), c);
    }

    #[test]
    fn edited_values_round_trip() {
        let mut c = RunConfig::default();
        c.apply_override("params.t_s=0.0001").unwrap();
        c.apply_override("grid.g_dob = 500, 1000.5, 3e3").unwrap();
        c.apply_override("grid.alpha=0.1").unwrap();
        c.apply_override("scenario.reference=sine").unwrap();
        c.apply_override("scenario.reference_frequency=0.3")
            .unwrap();
        c.apply_override("output.prefix=run1").unwrap();
        let back = RunConfig::parse(&c.to_ini()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.tuples().len(), 3);
        assert_eq!(
            back.tuples()[0].j_mn,
            DobParams::position_control_reference(1.0)
                .with_alpha(0.1)
                .j_mn
        );
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let e = RunConfig::parse("[params]\nj_m = 0.01\nbogus = 3\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 3") && msg.contains("bogus"), "{msg}");
        let e = RunConfig::parse("[nope]\n").unwrap_err();
        assert!(e.to_string().contains("line 1"));
        let e = RunConfig::parse("[grid]\ng_dob =\n").unwrap_err();
        assert!(e.to_string().contains("empty"));
    }

    #[test]
    fn csv_header_reloads() {
        let mut c = RunConfig::default();
        c.apply_override("grid.family=inner-continuous, outer-discrete")
            .unwrap();
        let text = format!("{}omega_rad_s,x\n1,2\n", csv_header("freq", &c));
        let l = load(&text).unwrap();
        assert_eq!(l.config, c);
        assert_eq!(l.command.as_deref(), Some("freq"));
    }

    #[test]
    fn g_grid_endpoints_exact() {
        let mut c = RunConfig::default();
        c.apply_override("grid.g_spacing=log").unwrap();
        let g = c.g_grid();
        assert_eq!(g.len(), 100);
        assert_eq!((g[0], g[99]), (100.0, 10000.0));
    }
}
