use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::plant::GustParams;
use crate::error::{Error, Result};
use crate::kalman::DareOptions;
use crate::predictor::InputBounds;
use crate::trajectory::HorizonSpec;

/// Compared predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Innovations-based SMM with its Kalman predictor, from input-output data only.
    InnovSmmKal,
    /// SMM built with the measured disturbance, with its Kalman predictor.
    SmmKal,
    /// Innovations-based SMM whose state comes straight from the raw past window.
    UnfilteredSmm,
    /// Stationary Kalman predictor on the true plant.
    OracleKf,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::InnovSmmKal, Method::SmmKal, Method::UnfilteredSmm, Method::OracleKf];

    pub fn name(self) -> &'static str {
        match self {
            Method::InnovSmmKal => "innov-smm-kal",
            Method::SmmKal => "smm-kal",
            Method::UnfilteredSmm => "unfiltered-smm",
            Method::OracleKf => "oracle-kf",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingConfig {
    /// Per-step output weight, row-major.
    pub q: Vec<Vec<f64>>,
    /// Per-step input weight, row-major.
    pub r: Vec<Vec<f64>>,
    #[serde(default)]
    pub bounds: Option<InputBounds>,
}

fn default_burn_in() -> usize {
    500
}

fn default_input_std() -> f64 {
    1.0
}

fn default_settling_band() -> f64 {
    0.05
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

/// Full description of the aircraft Monte Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Number of samples `N` with an innovations estimate.
    pub n_samples: usize,
    /// Past horizon `L` of the innovations estimator.
    pub past_horizon: usize,
    pub t_p: usize,
    pub t_f: usize,
    pub n_x_bar: usize,
    /// Sample period (s).
    pub dt: f64,
    pub gust: GustParams,
    pub sigma_w: Vec<Vec<f64>>,
    pub sigma_v: Vec<Vec<f64>>,
    pub mc_runs: usize,
    pub master_seed: u64,
    /// Reference step time (s).
    pub step_time: f64,
    /// Closed-loop simulation length (s).
    pub sim_duration: f64,
    /// Reference value after the step, one entry per output.
    pub reference_step: Vec<f64>,
    pub tracking: TrackingConfig,
    /// Standard deviation of the Gaussian identification input.
    #[serde(default = "default_input_std")]
    pub input_std: f64,
    /// Samples discarded before the identification record starts.
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_settling_band")]
    pub settling_band: f64,
    #[serde(default)]
    pub dare: DareOptions,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::InvalidParameter(format!("{what} must be a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

impl BenchmarkConfig {
    /// The aircraft study at a given airspeed: N = 2500, L = 150, T_p = 30,
    /// T_f = 20, dt = 0.1 s, Σ_w = I, Σ_v = 0.25²·I, 100 runs, step at 3 s
    /// in a 10 s loop.
    pub fn standard(airspeed: f64, master_seed: u64) -> Self {
        Self {
            n_samples: 2500,
            past_horizon: 150,
            t_p: 30,
            t_f: 20,
            n_x_bar: 7,
            dt: 0.1,
            gust: GustParams::standard(airspeed),
            sigma_w: rows_of(&DMatrix::identity(2, 2)),
            sigma_v: rows_of(&(DMatrix::identity(2, 2) * 0.0625)),
            mc_runs: 100,
            master_seed,
            step_time: 3.0,
            sim_duration: 10.0,
            reference_step: vec![5.0, 5.0],
            tracking: TrackingConfig {
                q: rows_of(&DMatrix::identity(2, 2)),
                r: rows_of(&(DMatrix::identity(2, 2) * 0.1)),
                bounds: None,
            },
            input_std: default_input_std(),
            burn_in: default_burn_in(),
            settling_band: default_settling_band(),
            dare: DareOptions::default(),
            methods: default_methods(),
        }
    }

    pub fn horizon(&self) -> Result<HorizonSpec> {
        HorizonSpec::new(self.t_p, self.t_f, self.n_x_bar, 2, 2)
    }

    pub fn sigma_w(&self) -> Result<DMatrix<f64>> {
        matrix_from_rows(&self.sigma_w, "sigma_w")
    }

    pub fn sigma_v(&self) -> Result<DMatrix<f64>> {
        matrix_from_rows(&self.sigma_v, "sigma_v")
    }

    pub fn q(&self) -> Result<DMatrix<f64>> {
        matrix_from_rows(&self.tracking.q, "tracking.q")
    }

    pub fn r(&self) -> Result<DMatrix<f64>> {
        matrix_from_rows(&self.tracking.r, "tracking.r")
    }

    /// Closed-loop length in samples.
    pub fn loop_steps(&self) -> usize {
        (self.sim_duration / self.dt).round() as usize
    }

    pub fn step_index(&self) -> usize {
        (self.step_time / self.dt).round() as usize
    }

    /// Identification record length including the innovations warm-up `L`.
    pub fn record_len(&self) -> usize {
        self.past_horizon + self.n_samples
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        self.horizon()?;
        self.gust.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.past_horizon == 0 || self.n_samples <= self.past_horizon {
            return bad("need N > L ≥ 1");
        }
        if self.mc_runs == 0 {
            return bad("mc_runs must be at least 1");
        }
        if !(self.input_std.is_finite() && self.input_std > 0.0) {
            return bad("input_std must be positive");
        }
        if !(self.settling_band.is_finite() && self.settling_band > 0.0) {
            return bad("settling_band must be positive");
        }
        if !(self.step_time >= 0.0 && self.sim_duration > self.step_time) || self.step_index() >= self.loop_steps() {
            return bad("the reference step must fall inside the simulation");
        }
        if self.reference_step.len() != 2 || self.reference_step.iter().any(|v| !v.is_finite()) {
            return bad("reference_step needs one finite value per output");
        }
        if self.methods.is_empty() {
            return bad("at least one method must be selected");
        }
        if !(self.dare.tol > 0.0 && self.dare.max_iter > 0 && self.dare.relaxation > 0.0 && self.dare.relaxation <= 1.0) {
            return bad("invalid Riccati solver options");
        }
        for (m, what, n) in [
            (self.sigma_w()?, "sigma_w", 2),
            (self.sigma_v()?, "sigma_v", 2),
            (self.q()?, "tracking.q", 2),
            (self.r()?, "tracking.r", 2),
        ] {
            if m.shape() != (n, n) {
                return Err(Error::DimensionMismatch(format!("{what} must be {n}×{n}")));
            }
            if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0)
                || crate::linalg::min_sym_eigenvalue(&m) < -1e-12 * m.amax().max(1.0)
            {
                return Err(Error::InvalidParameter(format!("{what} must be symmetric positive semidefinite")));
            }
        }
        if crate::linalg::min_sym_eigenvalue(&self.r()?) <= 0.0 {
            return bad("tracking.r must be positive definite");
        }
        if let Some(b) = &self.tracking.bounds {
            if b.lower.len() != 2 || b.upper.len() != 2 || b.lower.iter().zip(&b.upper).any(|(l, u)| l > u) {
                return bad("tracking.bounds need ordered lower/upper values per input");
            }
        }
        Ok(())
    }
}
