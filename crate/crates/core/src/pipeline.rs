//! End-to-end construction of SMM-based Kalman predictors from recorded data.

use nalgebra::{DMatrix, DVector};

use crate::ddss::{build_ddss, DataStateSpace};
use crate::error::{ensure_dims, Result};
use crate::innovations::{estimate_innovations, InnovationsEstimate};
use crate::kalman::{filter_for_data_model, make_filter, DareOptions, KalmanPredictor, NoiseModel};
use crate::predictor::{build_prediction_matrices, predict, unfiltered_state, PredictionMatrices};
use crate::smm::{build_stacked, reduce, ParsimoniousSmm};
use crate::trajectory::{HorizonSpec, Trajectory};

/// A data-built SMM, its state-space realization, stationary filter and
/// multi-step prediction matrices.
#[derive(Debug, Clone)]
pub struct SmmKalmanModel {
    pub smm: ParsimoniousSmm,
    pub ddss: DataStateSpace,
    pub filter: KalmanPredictor,
    pub prediction: PredictionMatrices,
}

impl SmmKalmanModel {
    /// Feed one measured sample; the filter state becomes the estimate of
    /// `x_uy(t)`.
    pub fn observe(&mut self, u: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        self.filter.step(u, y).map(|_| ())
    }

    /// Prediction of the next `T_f` outputs for stacked future inputs.
    pub fn predict(&self, u_f: &DVector<f64>) -> Result<DVector<f64>> {
        predict(&self.prediction, self.filter.state(), u_f)
    }

    /// Reset the filter state from a raw past window (auxiliary channels at zero).
    pub fn initialize_from_window(&mut self, u_p: &DVector<f64>, y_p: &DVector<f64>) -> Result<()> {
        let x = unfiltered_state(&self.smm, u_p, y_p)?;
        self.filter.set_state(x)
    }

    pub fn horizon(&self) -> &HorizonSpec {
        &self.smm.horizon
    }
}

#[derive(Debug, Clone)]
pub struct InnovationsModel {
    pub innovations: InnovationsEstimate,
    pub model: SmmKalmanModel,
}

/// Build the innovations-based predictor from input-output data alone:
/// estimate the innovations with past horizon `past_horizon`, build and
/// reduce the SMM over the samples that have an innovations estimate, realize
/// it in state-space form and design the stationary filter.
pub fn build_innovations_model(
    u: &Trajectory,
    y: &Trajectory,
    past_horizon: usize,
    spec: &HorizonSpec,
    dare: &DareOptions,
) -> Result<InnovationsModel> {
    ensure_dims(u.channel_count() == spec.n_u && y.channel_count() == spec.n_y, || {
        format!(
            "data has {} inputs / {} outputs, horizon spec expects {} / {}",
            u.channel_count(),
            y.channel_count(),
            spec.n_u,
            spec.n_y
        )
    })?;
    let innovations = estimate_innovations(u, y, past_horizon)?;
    let start = innovations.first_sample;
    let n = innovations.len();
    let e_hat = innovations.to_trajectory(y.dt())?;
    let stack = build_stacked(&u.slice(start, n)?, &e_hat, &y.slice(start, n)?, spec)?;
    let smm = reduce(&stack, spec.n_x_bar)?;
    let ddss = build_ddss(&smm)?;
    let filter = make_filter(&ddss, &innovations.lambda_hat, dare)?;
    let prediction = build_prediction_matrices(&smm)?;
    Ok(InnovationsModel {
        innovations,
        model: SmmKalmanModel { smm, ddss, filter, prediction },
    })
}

/// Build the predictor from a record in which the process disturbance `w` was
/// measured, with known disturbance and measurement-noise covariances.
pub fn build_disturbance_model(
    u: &Trajectory,
    w: &Trajectory,
    y: &Trajectory,
    spec: &HorizonSpec,
    sigma_w: &DMatrix<f64>,
    sigma_v: &DMatrix<f64>,
    dare: &DareOptions,
) -> Result<SmmKalmanModel> {
    let stack = build_stacked(u, w, y, spec)?;
    let smm = reduce(&stack, spec.n_x_bar)?;
    let ddss = build_ddss(&smm)?;
    // an exactly zero Σ_v means noise-free measurements
    let sigma_v = (sigma_v.amax() > 0.0).then_some(sigma_v);
    let noise = NoiseModel::driving(&ddss.b_ep, &ddss.d_e_eff, sigma_w, sigma_v)?;
    let filter = filter_for_data_model(&ddss, noise, dare)?;
    let prediction = build_prediction_matrices(&smm)?;
    Ok(SmmKalmanModel { smm, ddss, filter, prediction })
}
