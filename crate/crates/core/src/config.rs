//! Simulation configuration and its flat `key = value` text format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::BinSpec;

/// How the time step is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DtPolicy {
    /// Constant physical time step.
    Fixed(f64),
    /// Step chosen each iteration so that about `fraction * N` collisions are
    /// accepted, using the Maxwellian mean relative speed at the current temperature.
    CollisionFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialCondition {
    Maxwellian,
    UniformBall,
    /// Two Gaussian populations displaced by `±shift e_1` with temperatures 1:4.
    Bimodal,
    /// Gaussian with variance along `e_1` larger by the anisotropy ratio.
    Anisotropic,
}

impl InitialCondition {
    pub fn as_str(&self) -> &'static str {
        match self {
            InitialCondition::Maxwellian => "maxwellian",
            InitialCondition::UniformBall => "uniform_ball",
            InitialCondition::Bimodal => "bimodal",
            InitialCondition::Anisotropic => "anisotropic",
        }
    }
}

impl FromStr for InitialCondition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "maxwellian" => Ok(InitialCondition::Maxwellian),
            "uniform_ball" => Ok(InitialCondition::UniformBall),
            "bimodal" => Ok(InitialCondition::Bimodal),
            "anisotropic" => Ok(InitialCondition::Anisotropic),
            other => Err(format!(
                "unknown initial condition `{other}` (expected maxwellian, uniform_ball, bimodal or anisotropic)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dim: usize,
    pub alpha: f64,
    pub particle_count: usize,
    pub seed: u64,
    pub dt_policy: DtPolicy,
    pub t_end: f64,
    /// Hard cap on the number of steps; `None` for no cap.
    pub max_steps: Option<u64>,
    pub min_particles: usize,
    /// Stop once `n < min_density_fraction * n0`.
    pub min_density_fraction: f64,
    /// Steps between moment records.
    pub record_interval: u64,
    /// Steps between rescaled snapshots (histogram, coefficients, radial moments).
    pub snapshot_interval: u64,
    pub bins: BinSpec,
    pub tail_weight: f64,
    pub fit_window: (Option<f64>, Option<f64>),
    pub initial: InitialCondition,
    pub n0: f64,
    pub temperature0: f64,
    pub bimodal_shift: f64,
    pub anisotropy: f64,
    pub shards: usize,
    pub pair_samples: usize,
    pub batches: usize,
    pub majorant_slack: f64,
    pub moment_max_order: f64,
    /// Rescaled time after which snapshots count towards the extracted profile.
    pub burn_in_tau: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dim: 3,
            alpha: 0.05,
            particle_count: 100_000,
            seed: 42,
            dt_policy: DtPolicy::CollisionFraction(0.1),
            t_end: f64::INFINITY,
            max_steps: None,
            min_particles: 1000,
            min_density_fraction: 0.0,
            record_interval: 1,
            snapshot_interval: 8,
            bins: BinSpec::default(),
            tail_weight: 0.5,
            fit_window: (None, None),
            initial: InitialCondition::Maxwellian,
            n0: 1.0,
            temperature0: 0.5,
            bimodal_shift: 1.5,
            anisotropy: 4.0,
            shards: 1,
            pair_samples: 1_000_000,
            batches: 16,
            majorant_slack: 0.25,
            moment_max_order: 10.0,
            burn_in_tau: 8.0,
        }
    }
}

/// `(key, type, description)` for every recognized field, in output order.
const SCHEMA: &[(&str, &str, &str)] = &[
    ("dim", "integer >= 2", "velocity-space dimension"),
    ("alpha", "real in [0, 1)", "annihilation probability per accepted collision"),
    ("particle_count", "integer >= 2", "initial number of simulation particles"),
    ("seed", "u64", "master random seed"),
    ("dt_policy", "fixed | collision_fraction", "time-step rule"),
    ("dt", "real > 0", "time step when dt_policy = fixed"),
    ("collision_fraction", "real > 0", "target accepted collisions per step as a fraction of N"),
    ("t_end", "real > 0 or inf", "physical end time"),
    ("max_steps", "integer or none", "hard cap on steps"),
    ("min_particles", "integer >= 2", "stop when fewer particles remain"),
    ("min_density_fraction", "real in [0, 1)", "stop when n drops below this fraction of n0"),
    ("record_interval", "integer >= 1", "steps between moment records"),
    ("snapshot_interval", "integer >= 1", "steps between rescaled snapshots"),
    ("bins", "integer >= 1", "radial histogram bins"),
    ("r_max", "real > 0", "outer radius of the radial histogram"),
    ("tail_weight", "real >= 0", "exponential weight a for weighted distances and exp moments"),
    ("fit_t_lo", "real or auto", "lower end of the power-law fit window"),
    ("fit_t_hi", "real or auto", "upper end of the power-law fit window"),
    ("initial", "maxwellian | uniform_ball | bimodal | anisotropic", "initial condition"),
    ("n0", "real > 0", "initial number density"),
    ("temperature0", "real > 0", "initial temperature"),
    ("bimodal_shift", "real > 0", "displacement of the bimodal populations in thermal units"),
    ("anisotropy", "real > 0", "variance ratio of the anisotropic Gaussian"),
    ("shards", "integer >= 1", "independent sub-ensembles per step"),
    ("pair_samples", "integer >= 1", "random pairs per coefficient estimate"),
    ("batches", "integer >= 2", "batches for batch-means error bars"),
    ("majorant_slack", "real >= 0", "relative headroom on the collision-rate majorant"),
    ("moment_max_order", "real >= 1", "largest radial moment order tabulated per snapshot"),
    ("burn_in_tau", "real >= 0", "rescaled time before snapshots enter the extracted profile"),
];

fn config_err(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_value<T: FromStr>(line: usize, field: &str, raw: &str) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| config_err(line, field, format!("cannot parse `{raw}` as {}", type_of(field))))
}

fn parse_opt_f64(line: usize, field: &str, raw: &str) -> Result<Option<f64>> {
    if raw == "auto" || raw == "none" {
        Ok(None)
    } else {
        parse_value(line, field, raw).map(Some)
    }
}

fn type_of(field: &str) -> &'static str {
    SCHEMA
        .iter()
        .find(|(k, _, _)| *k == field)
        .map(|(_, t, _)| *t)
        .unwrap_or("value")
}

impl SimConfig {
    /// Parses the flat text format: one `key = value` per line, `#` starts a comment.
    /// Unlisted keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        let mut lines: HashMap<&'static str, usize> = HashMap::new();
        let mut dt: Option<f64> = None;
        let mut fraction: Option<f64> = None;
        let mut policy: Option<String> = None;

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_err(line_no, content, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            let Some(&(schema_key, _, _)) = SCHEMA.iter().find(|(k, _, _)| *k == key) else {
                return Err(config_err(line_no, key, "unknown key"));
            };
            if lines.insert(schema_key, line_no).is_some() {
                return Err(config_err(line_no, key, "duplicate key"));
            }
            let l = line_no;
            match key {
                "dim" => cfg.dim = parse_value(l, key, value)?,
                "alpha" => cfg.alpha = parse_value(l, key, value)?,
                "particle_count" => cfg.particle_count = parse_value(l, key, value)?,
                "seed" => cfg.seed = parse_value(l, key, value)?,
                "dt_policy" => policy = Some(value.to_string()),
                "dt" => dt = Some(parse_value(l, key, value)?),
                "collision_fraction" => fraction = Some(parse_value(l, key, value)?),
                "t_end" => cfg.t_end = parse_value(l, key, value)?,
                "max_steps" => {
                    cfg.max_steps = if value == "none" {
                        None
                    } else {
                        Some(parse_value(l, key, value)?)
                    }
                }
                "min_particles" => cfg.min_particles = parse_value(l, key, value)?,
                "min_density_fraction" => cfg.min_density_fraction = parse_value(l, key, value)?,
                "record_interval" => cfg.record_interval = parse_value(l, key, value)?,
                "snapshot_interval" => cfg.snapshot_interval = parse_value(l, key, value)?,
                "bins" => cfg.bins.bins = parse_value(l, key, value)?,
                "r_max" => cfg.bins.r_max = parse_value(l, key, value)?,
                "tail_weight" => cfg.tail_weight = parse_value(l, key, value)?,
                "fit_t_lo" => cfg.fit_window.0 = parse_opt_f64(l, key, value)?,
                "fit_t_hi" => cfg.fit_window.1 = parse_opt_f64(l, key, value)?,
                "initial" => {
                    cfg.initial = value.parse().map_err(|m: String| config_err(l, key, m))?
                }
                "n0" => cfg.n0 = parse_value(l, key, value)?,
                "temperature0" => cfg.temperature0 = parse_value(l, key, value)?,
                "bimodal_shift" => cfg.bimodal_shift = parse_value(l, key, value)?,
                "anisotropy" => cfg.anisotropy = parse_value(l, key, value)?,
                "shards" => cfg.shards = parse_value(l, key, value)?,
                "pair_samples" => cfg.pair_samples = parse_value(l, key, value)?,
                "batches" => cfg.batches = parse_value(l, key, value)?,
                "majorant_slack" => cfg.majorant_slack = parse_value(l, key, value)?,
                "moment_max_order" => cfg.moment_max_order = parse_value(l, key, value)?,
                "burn_in_tau" => cfg.burn_in_tau = parse_value(l, key, value)?,
                _ => unreachable!("schema and parser out of sync"),
            }
        }

        let policy_line = lines.get("dt_policy").copied().unwrap_or(0);
        cfg.dt_policy = match policy.as_deref() {
            None | Some("collision_fraction") => {
                if dt.is_some() && policy.is_none() {
                    DtPolicy::Fixed(dt.unwrap_or_default())
                } else {
                    DtPolicy::CollisionFraction(fraction.unwrap_or(0.1))
                }
            }
            Some("fixed") => match dt {
                Some(v) => DtPolicy::Fixed(v),
                None => return Err(config_err(policy_line, "dt", "dt_policy = fixed requires dt")),
            },
            Some(other) => {
                return Err(config_err(
                    policy_line,
                    "dt_policy",
                    format!("unknown policy `{other}` (expected fixed or collision_fraction)"),
                ))
            }
        };

        cfg.validate_with(|field| lines.get(field).copied().unwrap_or(0))?;
        Ok(cfg)
    }

    /// Checks the value constraints; errors carry line 0.
    pub fn validate(&self) -> Result<()> {
        self.validate_with(|_| 0)
    }

    fn validate_with(&self, line: impl Fn(&str) -> usize) -> Result<()> {
        let fail = |field: &str, msg: String| Err(config_err(line(field), field, msg));
        if self.dim < 2 {
            return fail("dim", format!("must be at least 2, got {}", self.dim));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return fail("alpha", format!("must lie in [0, 1), got {}", self.alpha));
        }
        if self.particle_count < 2 {
            return fail("particle_count", format!("must be at least 2, got {}", self.particle_count));
        }
        if self.min_particles < 2 {
            return fail("min_particles", format!("must be at least 2, got {}", self.min_particles));
        }
        match self.dt_policy {
            DtPolicy::Fixed(dt) if !(dt > 0.0 && dt.is_finite()) => {
                return fail("dt", format!("must be positive and finite, got {dt}"))
            }
            DtPolicy::CollisionFraction(f) if !(f > 0.0 && f.is_finite()) => {
                return fail("collision_fraction", format!("must be positive, got {f}"))
            }
            _ => {}
        }
        if !(self.t_end > 0.0) {
            return fail("t_end", format!("must be positive, got {}", self.t_end));
        }
        if !(0.0..1.0).contains(&self.min_density_fraction) {
            return fail(
                "min_density_fraction",
                format!("must lie in [0, 1), got {}", self.min_density_fraction),
            );
        }
        if self.record_interval == 0 {
            return fail("record_interval", "must be at least 1".into());
        }
        if self.snapshot_interval == 0 {
            return fail("snapshot_interval", "must be at least 1".into());
        }
        if self.bins.bins == 0 {
            return fail("bins", "must be at least 1".into());
        }
        if !(self.bins.r_max > 0.0 && self.bins.r_max.is_finite()) {
            return fail("r_max", format!("must be positive, got {}", self.bins.r_max));
        }
        if !(self.tail_weight >= 0.0 && self.tail_weight.is_finite()) {
            return fail("tail_weight", format!("must be >= 0, got {}", self.tail_weight));
        }
        if let (Some(lo), Some(hi)) = self.fit_window {
            if !(lo < hi) {
                return fail("fit_t_hi", format!("fit window [{lo}, {hi}] is empty"));
            }
        }
        for (field, v) in [
            ("n0", self.n0),
            ("temperature0", self.temperature0),
            ("bimodal_shift", self.bimodal_shift),
            ("anisotropy", self.anisotropy),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(field, format!("must be positive, got {v}"));
            }
        }
        if self.shards == 0 {
            return fail("shards", "must be at least 1".into());
        }
        if self.pair_samples == 0 {
            return fail("pair_samples", "must be at least 1".into());
        }
        if self.batches < 2 {
            return fail("batches", format!("must be at least 2, got {}", self.batches));
        }
        if !(self.majorant_slack >= 0.0 && self.majorant_slack.is_finite()) {
            return fail("majorant_slack", format!("must be >= 0, got {}", self.majorant_slack));
        }
        if !(self.moment_max_order >= 1.0 && self.moment_max_order.is_finite()) {
            return fail("moment_max_order", format!("must be >= 1, got {}", self.moment_max_order));
        }
        if !(self.burn_in_tau >= 0.0) {
            return fail("burn_in_tau", format!("must be >= 0, got {}", self.burn_in_tau));
        }
        Ok(())
    }

    /// Serializes every field; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("auto".to_string(), |x| x.to_string());
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("dim", self.dim.to_string());
        put("alpha", self.alpha.to_string());
        put("particle_count", self.particle_count.to_string());
        put("seed", self.seed.to_string());
        match self.dt_policy {
            DtPolicy::Fixed(dt) => {
                put("dt_policy", "fixed".into());
                put("dt", dt.to_string());
            }
            DtPolicy::CollisionFraction(f) => {
                put("dt_policy", "collision_fraction".into());
                put("collision_fraction", f.to_string());
            }
        }
        put("t_end", self.t_end.to_string());
        put("max_steps", self.max_steps.map_or("none".into(), |s| s.to_string()));
        put("min_particles", self.min_particles.to_string());
        put("min_density_fraction", self.min_density_fraction.to_string());
        put("record_interval", self.record_interval.to_string());
        put("snapshot_interval", self.snapshot_interval.to_string());
        put("bins", self.bins.bins.to_string());
        put("r_max", self.bins.r_max.to_string());
        put("tail_weight", self.tail_weight.to_string());
        put("fit_t_lo", opt(self.fit_window.0));
        put("fit_t_hi", opt(self.fit_window.1));
        put("initial", self.initial.as_str().into());
        put("n0", self.n0.to_string());
        put("temperature0", self.temperature0.to_string());
        put("bimodal_shift", self.bimodal_shift.to_string());
        put("anisotropy", self.anisotropy.to_string());
        put("shards", self.shards.to_string());
        put("pair_samples", self.pair_samples.to_string());
        put("batches", self.batches.to_string());
        put("majorant_slack", self.majorant_slack.to_string());
        put("moment_max_order", self.moment_max_order.to_string());
        put("burn_in_tau", self.burn_in_tau.to_string());
        out
    }
}

/// Human-readable schema with defaults, as printed by `--help-config`.
pub fn help_config() -> String {
    let defaults = SimConfig::default().to_text();
    let default_of = |key: &str| -> String {
        defaults
            .lines()
            .find_map(|l| {
                let (k, v) = l.split_once(" = ")?;
                (k == key).then(|| v.to_string())
            })
            .unwrap_or_else(|| match key {
                "dt" => "(unset)".into(),
                _ => "".into(),
            })
    };
    let mut out = String::from("# Configuration keys (flat `key = value`, `#` comments)\n");
    for (key, ty, desc) in SCHEMA {
        let _ = writeln!(out, "{key:<22} {ty:<52} default: {:<12} {desc}", default_of(key));
    }
    out
}
