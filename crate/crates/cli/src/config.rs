//! Run configuration: one JSON document with a schema version and a section
//! per subcommand. Unknown keys are rejected; relative paths resolve against
//! the configuration file's directory.

use std::path::{Path, PathBuf};

use ddkf::benchmark::BenchmarkConfig;
use ddkf::kalman::DareOptions;
use ddkf::HorizonSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

fn default_lags() -> usize {
    20
}

fn default_fraction() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// Trajectory CSV with `u:` and `y:` columns.
    pub data: PathBuf,
    pub past_horizon: usize,
    #[serde(default = "default_lags")]
    pub whiteness_lags: usize,
    #[serde(default = "default_fraction")]
    pub whiteness_fraction: f64,
    /// Sample period (s), if known.
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    pub data: PathBuf,
    pub past_horizon: usize,
    pub t_p: usize,
    pub t_f: usize,
    pub n_x_bar: usize,
    #[serde(default)]
    pub dare: DareOptions,
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    /// Model JSON written by `build`.
    pub model: PathBuf,
    /// `u:`/`y:` CSV with at least `t_p` samples; the last row is the current time.
    pub past: PathBuf,
    /// `u:` CSV with exactly `t_f` future inputs.
    pub future: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub estimate_innovations: Option<EstimateConfig>,
    #[serde(default)]
    pub build: Option<BuildConfig>,
    #[serde(default)]
    pub predict: Option<PredictConfig>,
    #[serde(default)]
    pub benchmark: Option<BenchmarkConfig>,
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl EstimateConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.past_horizon == 0 || self.whiteness_lags == 0 {
            return Err(schema("estimate_innovations: past_horizon and whiteness_lags must be positive"));
        }
        if !(self.whiteness_fraction > 0.0 && self.whiteness_fraction <= 1.0) {
            return Err(schema("estimate_innovations: whiteness_fraction must lie in (0, 1]"));
        }
        validate_dt(self.dt)
    }
}

impl BuildConfig {
    /// Horizon for data with `n_u` inputs and `n_y` outputs.
    pub fn horizon(&self, n_u: usize, n_y: usize) -> CliResult<HorizonSpec> {
        Ok(HorizonSpec::new(self.t_p, self.t_f, self.n_x_bar, n_u, n_y)?)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.past_horizon == 0 || self.t_p == 0 || self.t_f == 0 || self.n_x_bar == 0 {
            return Err(schema("build: past_horizon, t_p, t_f and n_x_bar must be positive"));
        }
        if !(self.dare.tol > 0.0 && self.dare.max_iter > 0 && self.dare.relaxation > 0.0 && self.dare.relaxation <= 1.0) {
            return Err(schema("build: invalid Riccati solver options"));
        }
        validate_dt(self.dt)
    }
}

fn validate_dt(dt: Option<f64>) -> CliResult<()> {
    match dt {
        Some(dt) if !(dt.is_finite() && dt > 0.0) => Err(schema("dt must be positive")),
        _ => Ok(()),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| schema(format!("configuration: {e}")))?;
        if c.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(schema(format!(
                "configuration schema version {} (supported: {CONFIG_SCHEMA_VERSION})",
                c.schema_version
            )));
        }
        Ok(c)
    }

    /// Read, parse and make file paths absolute.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut c = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(s) = &mut c.estimate_innovations {
            s.data = resolve(base, &s.data);
        }
        if let Some(s) = &mut c.build {
            s.data = resolve(base, &s.data);
        }
        if let Some(s) = &mut c.predict {
            s.model = resolve(base, &s.model);
            s.past = resolve(base, &s.past);
            s.future = resolve(base, &s.future);
        }
        Ok(c)
    }

    pub fn section<'a, T>(section: &'a Option<T>, name: &str) -> CliResult<&'a T> {
        section
            .as_ref()
            .ok_or_else(|| schema(format!("configuration has no '{name}' section")))
    }
}
