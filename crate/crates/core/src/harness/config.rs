//! `key = value` scenario files.
//!
//! ```text
//! # comment
//! n_cells = 256
//! u0 = bump 0.5 0.1 0.2 1.0
//! v0 = cosine 1.0 0.5 1
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::initial::Profile;
use crate::model::{FluxMean, ModelParams, TaxisScheme, EPSILON_REG_MAX};
use crate::pairlab::Perturbation;
use crate::timestepper::StepControl;

/// Line numbers are 1-based; `line = 0` marks a key that was left at its default.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: key `{key}` given twice (first on line {first})")]
    Duplicate { line: usize, key: String, first: usize },

    #[error("line {line}: {key} = {value} is out of range: {reason}")]
    OutOfRange {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },

    #[error("line {line}: {key}: invalid initial data: {reason}")]
    InitialData {
        line: usize,
        key: String,
        reason: String,
    },

    #[error("missing required key `{key}`")]
    Missing { key: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExperimentKind {
    #[default]
    Simulate,
    Pair,
    Converge,
    Weakcheck,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Pair => "pair",
            ExperimentKind::Converge => "converge",
            ExperimentKind::Weakcheck => "weakcheck",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "simulate" => Ok(ExperimentKind::Simulate),
            "pair" => Ok(ExperimentKind::Pair),
            "converge" => Ok(ExperimentKind::Converge),
            "weakcheck" => Ok(ExperimentKind::Weakcheck),
            other => Err(format!(
                "expected simulate, pair, converge or weakcheck, got `{other}`"
            )),
        }
    }
}

/// Forcing added to the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourceKind {
    #[default]
    None,
    /// The manufactured-solution forcing; `u0`/`v0` should match it.
    Mms,
}

impl std::fmt::Display for SourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SourceKind::None => "none",
            SourceKind::Mms => "mms",
        })
    }
}

impl FromStr for SourceKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(SourceKind::None),
            "mms" => Ok(SourceKind::Mms),
            other => Err(format!("expected none or mms, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_cells: usize,
    pub t_end: f64,
    pub output_count: usize,
    pub control: StepControl,
    pub params: ModelParams,
    pub u0: Profile,
    pub v0: Profile,
    pub kind: ExperimentKind,
    pub delta: f64,
    pub pert_shape: Perturbation,
    /// Perturb `v0` instead of `u0` in pair runs.
    pub pert_v: bool,
    pub seed: u64,
    pub source: SourceKind,
}

pub const KEYS: [&str; 19] = [
    "n_cells",
    "t_end",
    "output_count",
    "dt_init",
    "dt_min",
    "dt_max",
    "newton_tol",
    "newton_max_iter",
    "epsilon_reg",
    "flux_mean",
    "taxis_scheme",
    "u0",
    "v0",
    "kind",
    "delta",
    "pert_shape",
    "pert_field",
    "seed",
    "source",
];

pub const MAX_CELLS: usize = 1 << 20;
pub const MAX_OUTPUTS: usize = 1_000_000;

struct Entries {
    map: HashMap<&'static str, (usize, String)>,
}

impl Entries {
    fn line(&self, key: &str) -> usize {
        self.map.get(key).map_or(0, |e| e.0)
    }

    fn get<T: FromStr>(
        &self,
        key: &'static str,
        default: T,
        check: impl Fn(&T) -> std::result::Result<(), String>,
    ) -> std::result::Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let Some((line, raw)) = self.map.get(key) else {
            return Ok(default);
        };
        let out_of_range = |reason: String| ConfigError::OutOfRange {
            line: *line,
            key: key.to_string(),
            value: raw.clone(),
            reason,
        };
        let value = raw.parse::<T>().map_err(|e| out_of_range(e.to_string()))?;
        check(&value).map_err(out_of_range)?;
        Ok(value)
    }
}

fn finite(x: &f64) -> std::result::Result<(), String> {
    if x.is_finite() {
        Ok(())
    } else {
        Err("must be finite".into())
    }
}

fn positive(x: &f64) -> std::result::Result<(), String> {
    finite(x)?;
    if *x > 0.0 {
        Ok(())
    } else {
        Err("must be positive".into())
    }
}

pub fn parse_config(text: &str) -> std::result::Result<ScenarioConfig, ConfigError> {
    let mut map: HashMap<&'static str, (usize, String)> = HashMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: content.to_string(),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                text: content.to_string(),
            });
        }
        let Some(&key) = KEYS.iter().find(|&&known| known == k) else {
            return Err(ConfigError::UnknownKey {
                line,
                key: k.to_string(),
            });
        };
        if let Some((first, _)) = map.get(key) {
            return Err(ConfigError::Duplicate {
                line,
                key: key.to_string(),
                first: *first,
            });
        }
        map.insert(key, (line, v.to_string()));
    }
    let e = Entries { map };
    let dc = StepControl::default();
    let dp = ModelParams::default();

    let n_cells = e.get("n_cells", 128usize, |n| {
        if (2..=MAX_CELLS).contains(n) {
            Ok(())
        } else {
            Err(format!("must be in 2..={MAX_CELLS}"))
        }
    })?;
    let t_end = e.get("t_end", 1.0f64, |x| {
        finite(x)?;
        if *x >= 0.0 {
            Ok(())
        } else {
            Err("must be nonnegative".into())
        }
    })?;
    let output_count = e.get("output_count", 100usize, |n| {
        if (1..=MAX_OUTPUTS).contains(n) {
            Ok(())
        } else {
            Err(format!("must be in 1..={MAX_OUTPUTS}"))
        }
    })?;
    let dt_init = e.get("dt_init", dc.dt_init, positive)?;
    let dt_min = e.get("dt_min", dc.dt_min, positive)?;
    let dt_max = e.get("dt_max", dc.dt_max, positive)?;
    let newton_tol = e.get("newton_tol", dc.newton_tol, positive)?;
    let newton_max_iter = e.get("newton_max_iter", dc.newton_max_iter, |n| {
        if (1..=1000).contains(n) {
            Ok(())
        } else {
            Err("must be in 1..=1000".into())
        }
    })?;
    let epsilon_reg = e.get("epsilon_reg", dp.epsilon_reg, |x| {
        finite(x)?;
        if (0.0..=EPSILON_REG_MAX).contains(x) {
            Ok(())
        } else {
            Err(format!("must be in [0, {EPSILON_REG_MAX}]"))
        }
    })?;
    let flux_mean = e.get("flux_mean", FluxMean::default(), |_| Ok(()))?;
    let taxis_scheme = e.get("taxis_scheme", TaxisScheme::default(), |_| Ok(()))?;
    let kind = e.get("kind", ExperimentKind::default(), |_| Ok(()))?;
    let delta = e.get("delta", 0.0f64, finite)?;
    let pert_shape = e.get("pert_shape", Perturbation::default(), |_| Ok(()))?;
    let pert_field = e.get("pert_field", "u".to_string(), |f| match f.as_str() {
        "u" | "v" => Ok(()),
        _ => Err("expected u or v".into()),
    })?;
    let seed = e.get("seed", 0u64, |_| Ok(()))?;
    let source = e.get("source", SourceKind::default(), |_| Ok(()))?;

    let cross = |key: &'static str, value: f64, reason: String| ConfigError::OutOfRange {
        line: e.line(key),
        key: key.to_string(),
        value: format!("{value:?}"),
        reason,
    };
    if dt_min > dt_max {
        return Err(cross("dt_min", dt_min, format!("exceeds dt_max = {dt_max:?}")));
    }
    if dt_init < dt_min || dt_init > dt_max {
        return Err(cross(
            "dt_init",
            dt_init,
            format!("must lie in [dt_min, dt_max] = [{dt_min:?}, {dt_max:?}]"),
        ));
    }

    let profile = |key: &'static str| -> std::result::Result<Profile, ConfigError> {
        let Some((line, raw)) = e.map.get(key) else {
            return Err(ConfigError::Missing {
                key: key.to_string(),
            });
        };
        Profile::parse(raw).map_err(|reason| ConfigError::InitialData {
            line: *line,
            key: key.to_string(),
            reason,
        })
    };
    let u0 = profile("u0")?;
    let v0 = profile("v0")?;
    let grid = Grid::new(n_cells).expect("n_cells range checked above");
    let init_err = |key: &'static str, reason: String| ConfigError::InitialData {
        line: e.line(key),
        key: key.to_string(),
        reason,
    };
    let u = u0.sample(&grid).map_err(|err| init_err("u0", err.to_string()))?;
    let v = v0.sample(&grid).map_err(|err| init_err("v0", err.to_string()))?;
    if let Some((i, x)) = v.iter().enumerate().find(|(_, &x)| x <= 0.0) {
        return Err(init_err(
            "v0",
            format!("v0 must be positive, got {x:e} in cell {i}"),
        ));
    }
    if let Some((i, x)) = u.iter().enumerate().find(|(_, &x)| x < 0.0) {
        return Err(init_err(
            "u0",
            format!("u0 must be nonnegative, got {x:e} in cell {i}"),
        ));
    }
    let entropy: f64 = grid.h() * u.iter().map(|x| 1.0 / (x + epsilon_reg)).sum::<f64>();
    if !entropy.is_finite() {
        return Err(init_err(
            "u0",
            format!("∫ 1/(u0 + eps) is infinite for eps = {epsilon_reg:e}; u0 vanishes somewhere"),
        ));
    }

    Ok(ScenarioConfig {
        n_cells,
        t_end,
        output_count,
        control: StepControl {
            dt_init,
            dt_min,
            dt_max,
            newton_tol,
            newton_max_iter,
            ..dc
        },
        params: ModelParams {
            epsilon_reg,
            flux_mean,
            taxis_scheme,
        },
        u0,
        v0,
        kind,
        delta,
        pert_shape,
        pert_v: pert_field == "v",
        seed,
        source,
    })
}

/// Writes every key, so defaults become explicit.
pub fn serialize(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    let c = &cfg.control;
    let p = &cfg.params;
    let _ = writeln!(s, "n_cells = {}", cfg.n_cells);
    let _ = writeln!(s, "t_end = {:?}", cfg.t_end);
    let _ = writeln!(s, "output_count = {}", cfg.output_count);
    let _ = writeln!(s, "dt_init = {:?}", c.dt_init);
    let _ = writeln!(s, "dt_min = {:?}", c.dt_min);
    let _ = writeln!(s, "dt_max = {:?}", c.dt_max);
    let _ = writeln!(s, "newton_tol = {:?}", c.newton_tol);
    let _ = writeln!(s, "newton_max_iter = {}", c.newton_max_iter);
    let _ = writeln!(s, "epsilon_reg = {:?}", p.epsilon_reg);
    let _ = writeln!(s, "flux_mean = {}", p.flux_mean);
    let _ = writeln!(s, "taxis_scheme = {}", p.taxis_scheme);
    let _ = writeln!(s, "u0 = {}", cfg.u0);
    let _ = writeln!(s, "v0 = {}", cfg.v0);
    let _ = writeln!(s, "kind = {}", cfg.kind);
    let _ = writeln!(s, "delta = {:?}", cfg.delta);
    let _ = writeln!(s, "pert_shape = {}", cfg.pert_shape);
    let _ = writeln!(s, "pert_field = {}", if cfg.pert_v { "v" } else { "u" });
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "source = {}", cfg.source);
    s
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_config(&text)?)
}
