//! Experiment configuration: a flat JSON object with lowercase snake_case
//! keys; unknown keys are rejected so typos fail loudly.

use std::fmt;
use std::path::Path;

use serde::Deserialize;

/// A scalar parameter or a sweep over a range.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Scalar(f64),
    Sweep(SweepSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default)]
    pub log_spacing: bool,
}

impl ParamSpec {
    pub fn expand(&self) -> Vec<f64> {
        match *self {
            ParamSpec::Scalar(v) => vec![v],
            ParamSpec::Sweep(s) => {
                let n = s.count;
                (0..n)
                    .map(|k| {
                        let t = k as f64 / (n - 1) as f64;
                        if s.log_spacing {
                            s.start * (s.stop / s.start).powf(t)
                        } else {
                            s.start + (s.stop - s.start) * t
                        }
                    })
                    .collect()
            }
        }
    }

    pub fn scalar(&self) -> Option<f64> {
        match *self {
            ParamSpec::Scalar(v) => Some(v),
            ParamSpec::Sweep(_) => None,
        }
    }

    fn validate(&self, name: &str) -> Result<(), ConfigError> {
        if let ParamSpec::Sweep(s) = *self {
            if s.count < 2 {
                return Err(ConfigError::new(format!(
                    "sweep for '{name}' needs count >= 2, got {}",
                    s.count
                )));
            }
            if !(s.start < s.stop) {
                return Err(ConfigError::new(format!(
                    "sweep for '{name}' needs start < stop, got [{}, {}]",
                    s.start, s.stop
                )));
            }
            if s.log_spacing && s.start <= 0.0 {
                return Err(ConfigError::new(format!(
                    "log-spaced sweep for '{name}' needs start > 0"
                )));
            }
        }
        Ok(())
    }
}

/// Raw configuration file contents. Every experiment reads the subset it
/// needs and rejects configs that omit required keys.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional echo of the experiment name; must match the subcommand.
    pub experiment: Option<String>,
    pub x: Option<ParamSpec>,
    pub n_bar0: Option<ParamSpec>,
    pub m: Option<ParamSpec>,
    pub f: Option<ParamSpec>,
    pub t_end: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub tail_tol: Option<f64>,
    pub equilibrium_tol: Option<f64>,
    pub snapshots: Option<usize>,
    pub grid_points: Option<usize>,
    pub grid_halfwidth: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<String>,
}

#[derive(Debug)]
pub struct ConfigError {
    message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn load(path: &Path, experiment: &str) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&raw)
            .map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?;
        if let Some(ref named) = config.experiment {
            if named != experiment {
                return Err(ConfigError::new(format!(
                    "config names experiment '{named}' but '{experiment}' was requested"
                )));
            }
        }
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        for (name, spec) in [
            ("x", &self.x),
            ("n_bar0", &self.n_bar0),
            ("m", &self.m),
            ("f", &self.f),
        ] {
            if let Some(spec) = spec {
                spec.validate(name)?;
            }
        }
        for (name, value) in [
            ("t_end", self.t_end),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("tail_tol", self.tail_tol),
            ("equilibrium_tol", self.equilibrium_tol),
        ] {
            if let Some(v) = value {
                if !(v > 0.0) {
                    return Err(ConfigError::new(format!(
                        "'{name}' must be positive, got {v}"
                    )));
                }
            }
        }
        if let Some(points) = self.grid_points {
            if points < 2 {
                return Err(ConfigError::new("'grid_points' must be at least 2"));
            }
        }
        if self.trials == Some(0) {
            return Err(ConfigError::new("'trials' must be positive"));
        }
        Ok(())
    }

    pub fn require_scalar(&self, name: &str) -> Result<f64, ConfigError> {
        let spec = self.param(name)?;
        spec.scalar().ok_or_else(|| {
            ConfigError::new(format!("'{name}' must be a scalar for this experiment"))
        })
    }

    pub fn require_sweep_values(&self, name: &str) -> Result<Vec<f64>, ConfigError> {
        Ok(self.param(name)?.expand())
    }

    fn param(&self, name: &str) -> Result<ParamSpec, ConfigError> {
        let spec = match name {
            "x" => self.x,
            "n_bar0" => self.n_bar0,
            "m" => self.m,
            "f" => self.f,
            other => return Err(ConfigError::new(format!("unknown parameter '{other}'"))),
        };
        spec.ok_or_else(|| ConfigError::new(format!("missing required key '{name}'")))
    }

    /// Seed for stochastic experiments; the `CAVITY_ENTROPY_SEED`
    /// environment variable overrides the config value.
    pub fn effective_seed(&self) -> Result<u64, ConfigError> {
        if let Ok(env) = std::env::var("CAVITY_ENTROPY_SEED") {
            return env
                .parse()
                .map_err(|e| ConfigError::new(format!("CAVITY_ENTROPY_SEED: {e}")));
        }
        Ok(self.seed.unwrap_or(0))
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol.unwrap_or(1e-12)
    }
}
