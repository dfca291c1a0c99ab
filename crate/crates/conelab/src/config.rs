//! Experiment configuration: a flat `key = value` file, command-line
//! overrides and per-scenario defaults, with precedence CLI > file > defaults.
//!
//! File format: one `key = value` per line, `#` starts a comment. Keys:
//!
//! ```text
//! scenario   one of the scenario names (optional when given on the command line)
//! n          dimension
//! N          points per axis
//! L          box length
//! delta      comma-separated list
//! lambda, alpha, beta, p
//! tgrid      t_min,t_max,count
//! samples    sample or field count (meaning depends on the scenario)
//! seed       master seed
//! out        output directory
//! threads    worker threads
//! timing     true/false; false leaves runtimes out of the CSV
//! memory_cap bytes allowed for grids
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Reconstruct,
    SquareBound,
    TraceSweep,
    SphereSweep,
    SliceVolume,
    KernelDecay,
    OffconeDecay,
    G0Weighted,
    Converge,
    DecomposeCheck,
    OrthoCheck,
    A2Check,
}

impl Scenario {
    pub const ALL: [Scenario; 12] = [
        Scenario::Reconstruct,
        Scenario::SquareBound,
        Scenario::TraceSweep,
        Scenario::SphereSweep,
        Scenario::SliceVolume,
        Scenario::KernelDecay,
        Scenario::OffconeDecay,
        Scenario::G0Weighted,
        Scenario::Converge,
        Scenario::DecomposeCheck,
        Scenario::OrthoCheck,
        Scenario::A2Check,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Reconstruct => "reconstruct",
            Scenario::SquareBound => "square-bound",
            Scenario::TraceSweep => "trace-sweep",
            Scenario::SphereSweep => "sphere-sweep",
            Scenario::SliceVolume => "slice-volume",
            Scenario::KernelDecay => "kernel-decay",
            Scenario::OffconeDecay => "offcone-decay",
            Scenario::G0Weighted => "g0-weighted",
            Scenario::Converge => "converge",
            Scenario::DecomposeCheck => "decompose-check",
            Scenario::OrthoCheck => "ortho-check",
            Scenario::A2Check => "a2-check",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Scenario, String> {
        Scenario::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config.{path}: {message}")]
    Schema { path: String, message: String },
    #[error("resource cap: {0}")]
    Resource(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Schema { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TGridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
}

impl FromStr for TGridSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<TGridSpec, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err("expected t_min,t_max,count".into());
        }
        let t_min = parts[0].parse().map_err(|_| format!("bad t_min `{}`", parts[0]))?;
        let t_max = parts[1].parse().map_err(|_| format!("bad t_max `{}`", parts[1]))?;
        let count = parts[2].parse().map_err(|_| format!("bad count `{}`", parts[2]))?;
        Ok(TGridSpec { t_min, t_max, count })
    }
}

/// Partial settings from one source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scenario: Option<Scenario>,
    pub n: Option<usize>,
    pub grid: Option<usize>,
    pub len: Option<f64>,
    pub deltas: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub p: Option<f64>,
    pub tgrid: Option<TGridSpec>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub timing: Option<bool>,
    pub memory_cap: Option<usize>,
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T, ConfigError> {
    raw.parse().map_err(|_| schema(key, format!("cannot parse `{raw}`")))
}

impl Overrides {
    pub fn parse_str(text: &str) -> Result<Overrides, ConfigError> {
        let mut o = Overrides::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| schema(format!("line{}", lineno + 1), "expected `key = value`"))?;
            let (key, raw) = (key.trim(), raw.trim());
            match key {
                "scenario" => o.scenario = Some(raw.parse().map_err(|m: String| schema(key, m))?),
                "n" => o.n = Some(parse_value(key, raw)?),
                "N" => o.grid = Some(parse_value(key, raw)?),
                "L" => o.len = Some(parse_value(key, raw)?),
                "delta" => {
                    let list = raw
                        .split(',')
                        .enumerate()
                        .map(|(i, v)| parse_value(&format!("delta[{i}]"), v.trim()))
                        .collect::<Result<Vec<f64>, _>>()?;
                    o.deltas = Some(list);
                }
                "lambda" => o.lambda = Some(parse_value(key, raw)?),
                "alpha" => o.alpha = Some(parse_value(key, raw)?),
                "beta" => o.beta = Some(parse_value(key, raw)?),
                "p" => o.p = Some(parse_value(key, raw)?),
                "tgrid" => o.tgrid = Some(raw.parse().map_err(|m: String| schema(key, m))?),
                "samples" => o.samples = Some(parse_value(key, raw)?),
                "seed" => o.seed = Some(parse_value(key, raw)?),
                "out" => o.out = Some(PathBuf::from(raw)),
                "threads" => o.threads = Some(parse_value(key, raw)?),
                "timing" => o.timing = Some(parse_value(key, raw)?),
                "memory_cap" => o.memory_cap = Some(parse_value(key, raw)?),
                other => return Err(schema(other, "unknown key")),
            }
        }
        Ok(o)
    }

    pub fn from_file(path: &Path) -> Result<Overrides, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Overrides::parse_str(&text)
    }

    /// Fields set in `self` win over `lower`.
    pub fn over(self, lower: Overrides) -> Overrides {
        Overrides {
            scenario: self.scenario.or(lower.scenario),
            n: self.n.or(lower.n),
            grid: self.grid.or(lower.grid),
            len: self.len.or(lower.len),
            deltas: self.deltas.or(lower.deltas),
            lambda: self.lambda.or(lower.lambda),
            alpha: self.alpha.or(lower.alpha),
            beta: self.beta.or(lower.beta),
            p: self.p.or(lower.p),
            tgrid: self.tgrid.or(lower.tgrid),
            samples: self.samples.or(lower.samples),
            seed: self.seed.or(lower.seed),
            out: self.out.or(lower.out),
            threads: self.threads.or(lower.threads),
            timing: self.timing.or(lower.timing),
            memory_cap: self.memory_cap.or(lower.memory_cap),
        }
    }
}

/// A fully resolved, validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n: usize,
    #[serde(rename = "N")]
    pub grid: usize,
    #[serde(rename = "L")]
    pub len: f64,
    pub deltas: Vec<f64>,
    pub lambda: f64,
    /// A single weight; `None` runs the scenario's default sweep.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub p: f64,
    pub tgrid: Option<TGridSpec>,
    pub samples: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub timing: bool,
    pub memory_cap: usize,
}

pub const DEFAULT_SEED: u64 = 20240601;

fn dyadic(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| (-(k as f64)).exp2()).collect()
}

/// Defaults that reproduce the acceptance runs.
pub fn defaults(scenario: Scenario, n: Option<usize>) -> Overrides {
    let base = Overrides {
        scenario: Some(scenario),
        lambda: Some(1.0),
        p: Some(4.0),
        seed: Some(DEFAULT_SEED),
        out: Some(PathBuf::from("runs")),
        timing: Some(true),
        memory_cap: Some(conelab_core::field::DEFAULT_MEMORY_CAP),
        ..Overrides::default()
    };
    let specific = match scenario {
        Scenario::Reconstruct => Overrides { n: Some(3), samples: Some(100_000), ..Default::default() },
        Scenario::SquareBound => Overrides {
            n: Some(2),
            grid: Some(512),
            len: Some(64.0),
            deltas: Some(dyadic(3, 7)),
            samples: Some(20),
            ..Default::default()
        },
        Scenario::TraceSweep => {
            let n = n.unwrap_or(3);
            let deltas = if n == 1 { dyadic(4, 12) } else { dyadic(3, 7) };
            Overrides { n: Some(n), deltas: Some(deltas), samples: Some(1_000_000), ..Default::default() }
        }
        Scenario::SphereSweep => Overrides { n: Some(3), deltas: Some(dyadic(3, 7)), ..Default::default() },
        Scenario::SliceVolume => {
            Overrides { n: Some(3), deltas: Some(dyadic(16, 16)), samples: Some(4000), ..Default::default() }
        }
        Scenario::KernelDecay => Overrides { n: Some(3), lambda: Some(2.0), samples: Some(48), ..Default::default() },
        Scenario::OffconeDecay => Overrides {
            n: Some(2),
            grid: Some(4096),
            len: Some(1024.0),
            deltas: Some(dyadic(5, 5)),
            ..Default::default()
        },
        Scenario::G0Weighted => Overrides {
            n: Some(3),
            grid: Some(128),
            len: Some(32.0),
            deltas: Some(dyadic(3, 6)),
            samples: Some(20),
            ..Default::default()
        },
        Scenario::Converge => Overrides { n: Some(3), grid: Some(128), len: Some(32.0), ..Default::default() },
        Scenario::DecomposeCheck => {
            Overrides { n: Some(2), grid: Some(512), len: Some(128.0), samples: Some(20), ..Default::default() }
        }
        Scenario::OrthoCheck => {
            Overrides { n: Some(2), grid: Some(128), len: Some(32.0), samples: Some(20), ..Default::default() }
        }
        Scenario::A2Check => Overrides {
            n: Some(3),
            alpha: Some(0.5),
            beta: Some(0.5),
            samples: Some(40),
            ..Default::default()
        },
    };
    specific.over(base)
}

impl ExperimentConfig {
    /// Resolves `cli` over `file` over the scenario defaults and validates.
    pub fn resolve(cli: Overrides, file: Overrides) -> Result<ExperimentConfig, ConfigError> {
        let given = cli.over(file);
        let scenario = given.scenario.ok_or_else(|| schema("scenario", "missing"))?;
        let merged = given.clone().over(defaults(scenario, given.n));
        let cfg = ExperimentConfig {
            scenario,
            n: merged.n.expect("default n"),
            grid: merged.grid.unwrap_or(0),
            len: merged.len.unwrap_or(0.0),
            deltas: merged.deltas.unwrap_or_default(),
            lambda: merged.lambda.expect("default lambda"),
            alpha: merged.alpha,
            beta: merged.beta,
            p: merged.p.expect("default p"),
            tgrid: merged.tgrid,
            samples: merged.samples.unwrap_or(1),
            seed: merged.seed.expect("default seed"),
            out: merged.out.expect("default out"),
            threads: merged.threads,
            timing: merged.timing.expect("default timing"),
            memory_cap: merged.memory_cap.expect("default cap"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn defaults_for(scenario: Scenario) -> ExperimentConfig {
        ExperimentConfig::resolve(Overrides { scenario: Some(scenario), ..Default::default() }, Overrides::default())
            .expect("defaults are valid")
    }

    fn uses_grid(&self) -> bool {
        matches!(
            self.scenario,
            Scenario::SquareBound
                | Scenario::OffconeDecay
                | Scenario::G0Weighted
                | Scenario::Converge
                | Scenario::DecomposeCheck
                | Scenario::OrthoCheck
        )
    }

    /// Complex arrays of `N^n` points held at once, per scenario.
    fn live_arrays(&self) -> usize {
        match self.scenario {
            Scenario::OffconeDecay => 4,
            Scenario::DecomposeCheck => 12,
            Scenario::OrthoCheck => 120,
            _ => 6,
        }
    }

    pub fn estimated_bytes(&self) -> usize {
        if !self.uses_grid() {
            return 0;
        }
        let points = (self.grid as f64).powi(self.n as i32);
        (points * 16.0 * self.live_arrays() as f64).min(usize::MAX as f64) as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let (lo, hi) = match self.scenario {
            Scenario::TraceSweep => (1, 4),
            Scenario::SphereSweep => (2, 4),
            Scenario::SliceVolume => (3, 3),
            Scenario::KernelDecay => (3, 3),
            Scenario::OffconeDecay | Scenario::DecomposeCheck | Scenario::OrthoCheck => (2, 2),
            Scenario::G0Weighted => (2, 3),
            Scenario::Converge | Scenario::SquareBound => (2, 3),
            Scenario::Reconstruct | Scenario::A2Check => (2, 4),
        };
        if self.n < lo || self.n > hi {
            return Err(schema("n", format!("{} needs n in [{lo}, {hi}], got {}", self.scenario, self.n)));
        }
        if self.uses_grid() {
            if self.grid < 4 || !self.grid.is_power_of_two() {
                return Err(schema("N", format!("must be a power of two >= 4, got {}", self.grid)));
            }
            if !(self.len > 0.0 && self.len.is_finite()) {
                return Err(schema("L", format!("must be positive, got {}", self.len)));
            }
        }
        let delta_hi = if self.scenario == Scenario::TraceSweep && self.n == 1 { 1.0 } else { 0.25 };
        for (i, d) in self.deltas.iter().enumerate() {
            if !(*d > 0.0 && *d <= delta_hi) {
                return Err(schema(format!("delta[{i}]"), format!("must lie in (0, {delta_hi}], got {d}")));
            }
        }
        let needs_deltas = matches!(
            self.scenario,
            Scenario::SquareBound
                | Scenario::TraceSweep
                | Scenario::SphereSweep
                | Scenario::SliceVolume
                | Scenario::OffconeDecay
                | Scenario::G0Weighted
        );
        let min_deltas = if matches!(self.scenario, Scenario::TraceSweep | Scenario::SphereSweep | Scenario::G0Weighted) {
            2
        } else {
            1
        };
        if needs_deltas && self.deltas.len() < min_deltas {
            return Err(schema("delta", format!("{} needs at least {min_deltas} values", self.scenario)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(schema("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if !(self.p >= 2.0 && self.p.is_finite()) {
            return Err(schema("p", format!("must lie in [2, inf), got {}", self.p)));
        }
        if self.alpha.is_some() != self.beta.is_some() && self.scenario != Scenario::SphereSweep {
            return Err(schema("alpha", "alpha and beta are given together"));
        }
        for (key, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(schema(key, "must be finite"));
                }
            }
        }
        if self.samples == 0 {
            return Err(schema("samples", "must be positive"));
        }
        if let Some(tg) = self.tgrid {
            if !(tg.t_min > 0.0 && tg.t_min < tg.t_max && tg.count >= 2) {
                return Err(schema("tgrid", "need 0 < t_min < t_max and count >= 2"));
            }
        }
        if self.threads == Some(0) {
            return Err(schema("threads", "must be positive"));
        }
        let bytes = self.estimated_bytes();
        if bytes > self.memory_cap {
            return Err(ConfigError::Resource(format!(
                "{} with n = {}, N = {} needs about {} MiB, cap is {} MiB",
                self.scenario,
                self.n,
                self.grid,
                bytes >> 20,
                self.memory_cap >> 20
            )));
        }
        Ok(())
    }
}
