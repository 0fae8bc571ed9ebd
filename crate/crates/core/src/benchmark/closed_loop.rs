//! Receding-horizon tracking in closed loop with the simulated plant, and the
//! performance indices computed from the logged loop.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::plant::DiscretePlant;
use super::simulate::PlantState;
use crate::error::{ensure_dims, Error, Result};
use crate::kalman::KalmanPredictor;
use crate::pipeline::SmmKalmanModel;
use crate::predictor::{predict, solve_tracking, unfiltered_state, InputBounds, PredictionMatrices, TrackingProblem};
use crate::smm::ParsimoniousSmm;

/// Output predictor driving the controller: a state estimate plus the
/// multi-step prediction matrices that act on it.
#[derive(Debug, Clone)]
pub enum LoopModel {
    /// Data-based model with its stationary Kalman predictor.
    Filtered(Box<SmmKalmanModel>),
    /// Data-based model whose state is recomputed from the raw past window.
    Unfiltered {
        smm: Box<ParsimoniousSmm>,
        prediction: PredictionMatrices,
        u_hist: VecDeque<DVector<f64>>,
        y_hist: VecDeque<DVector<f64>>,
    },
    /// Model-based predictor on the true plant.
    Oracle {
        filter: Box<KalmanPredictor>,
        prediction: PredictionMatrices,
    },
}

impl LoopModel {
    pub fn unfiltered(smm: ParsimoniousSmm, prediction: PredictionMatrices) -> Self {
        let h = smm.horizon;
        Self::Unfiltered {
            u_hist: std::iter::repeat_n(DVector::zeros(h.n_u), h.t_p).collect(),
            y_hist: std::iter::repeat_n(DVector::zeros(h.n_y), h.t_p).collect(),
            smm: Box::new(smm),
            prediction,
        }
    }

    pub fn prediction(&self) -> &PredictionMatrices {
        match self {
            Self::Filtered(m) => &m.prediction,
            Self::Unfiltered { prediction, .. } | Self::Oracle { prediction, .. } => prediction,
        }
    }

    /// State from which the next `T_f` outputs are predicted.
    pub fn state(&self) -> Result<DVector<f64>> {
        match self {
            Self::Filtered(m) => Ok(m.filter.state().clone()),
            Self::Unfiltered { smm, u_hist, y_hist, .. } => {
                let u_p = DVector::from_iterator(u_hist.len() * smm.horizon.n_u, u_hist.iter().flat_map(|v| v.iter().cloned()));
                let y_p = DVector::from_iterator(y_hist.len() * smm.horizon.n_y, y_hist.iter().flat_map(|v| v.iter().cloned()));
                unfiltered_state(smm, &u_p, &y_p)
            }
            Self::Oracle { filter, .. } => Ok(filter.state().clone()),
        }
    }

    pub fn observe(&mut self, u: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        match self {
            Self::Filtered(m) => m.observe(u, y),
            Self::Unfiltered { u_hist, y_hist, .. } => {
                u_hist.pop_front();
                u_hist.push_back(u.clone());
                y_hist.pop_front();
                y_hist.push_back(y.clone());
                Ok(())
            }
            Self::Oracle { filter, .. } => filter.step(u, y).map(|_| ()),
        }
    }
}

/// Controller weights and optional input box.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingWeights {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub bounds: Option<InputBounds>,
}

/// Logged closed-loop signals, one column per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRecord {
    pub u: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub y_clean: DMatrix<f64>,
    pub reference: DMatrix<f64>,
    /// Predictor state used to choose `u(t)`.
    pub states: Vec<DVector<f64>>,
    pub dt: f64,
    pub step_index: usize,
}

/// Reference that jumps from zero to `step` at `step_index`.
pub fn step_reference(step: &[f64], step_index: usize, steps: usize) -> DMatrix<f64> {
    DMatrix::from_fn(step.len(), steps, |i, t| if t >= step_index { step[i] } else { 0.0 })
}

/// Run the loop for `reference.ncols()` steps from `x0`. At each step the
/// controller sees the current reference held over the horizon, applies the
/// first input of the optimal sequence, then the model observes `(u, y)`.
#[allow(clippy::too_many_arguments)]
pub fn run_closed_loop(
    plant: &DiscretePlant,
    model: &mut LoopModel,
    weights: &TrackingWeights,
    reference: &DMatrix<f64>,
    step_index: usize,
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    x0: &DVector<f64>,
) -> Result<ClosedLoopRecord> {
    let steps = reference.ncols();
    let (n_u, n_y) = (plant.n_u(), plant.n_y());
    ensure_dims(
        reference.nrows() == n_y && w.shape() == (plant.n_w(), steps) && v.shape() == (n_y, steps),
        || "closed-loop sequences do not match the plant".into(),
    )?;
    let t_f = model.prediction().t_f;
    let mut plant_state = PlantState::new(plant, x0.clone())?;
    let mut rec = ClosedLoopRecord {
        u: DMatrix::zeros(n_u, steps),
        y: DMatrix::zeros(n_y, steps),
        y_clean: DMatrix::zeros(n_y, steps),
        reference: reference.clone(),
        states: Vec::with_capacity(steps),
        dt: plant.dt,
        step_index,
    };
    for t in 0..steps {
        let x_hat = model.state()?;
        let r_t = reference.column(t);
        let problem = TrackingProblem {
            reference: DVector::from_fn(n_y * t_f, |i, _| r_t[i % n_y]),
            q: weights.q.clone(),
            r: weights.r.clone(),
            bounds: weights.bounds.clone(),
        };
        let sol = solve_tracking(model.prediction(), &x_hat, &problem)?;
        let u_t = sol.u_f.rows(0, n_u).into_owned();
        let y_clean = plant_state.clean_output(&u_t);
        let y_t = &y_clean + v.column(t);
        plant_state.advance(&u_t, &w.column(t).into_owned());
        model.observe(&u_t, &y_t)?;
        rec.u.set_column(t, &u_t);
        rec.y.set_column(t, &y_t);
        rec.y_clean.set_column(t, &y_clean);
        rec.states.push(x_hat);
    }
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonRmse {
    pub k: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceIndices {
    /// Per output, noise-free output against reference from the step on.
    pub tracking_rmse: Vec<f64>,
    /// `Σ ‖u(t)‖² dt`.
    pub input_energy: f64,
    /// k-step-ahead prediction error against the noise-free output, using the
    /// inputs that were actually applied.
    pub prediction_rmse: Vec<HorizonRmse>,
    /// Per output, seconds from the step until the output stays in the band.
    pub settling_time: Vec<f64>,
    /// Per output, peak overshoot relative to the step size.
    pub overshoot: Vec<f64>,
}

impl PerformanceIndices {
    /// Flat `(name, value)` pairs for tables and summaries.
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (i, v) in self.tracking_rmse.iter().enumerate() {
            out.push((format!("tracking_rmse_y{}", i + 1), *v));
        }
        out.push(("input_energy".into(), self.input_energy));
        for h in &self.prediction_rmse {
            out.push((format!("prediction_rmse_k{}", h.k), h.rmse));
        }
        for (i, v) in self.settling_time.iter().enumerate() {
            out.push((format!("settling_time_y{}", i + 1), *v));
        }
        for (i, v) in self.overshoot.iter().enumerate() {
            out.push((format!("overshoot_y{}", i + 1), *v));
        }
        out
    }

    /// Prediction RMSE at horizon `k`, if it was evaluated.
    pub fn prediction_at(&self, k: usize) -> Option<f64> {
        self.prediction_rmse.iter().find(|h| h.k == k).map(|h| h.rmse)
    }
}

/// Prediction horizons reported for a future horizon `t_f`: 1, `t_f/2`, `t_f`.
pub fn reported_horizons(t_f: usize) -> Vec<usize> {
    let mut ks = vec![1, (t_f / 2).max(1), t_f];
    ks.dedup();
    ks
}

/// Indices of a logged loop. `settling_band` is relative to the step size
/// (absolute when an output has no step).
pub fn performance_indices(
    rec: &ClosedLoopRecord,
    prediction: &PredictionMatrices,
    settling_band: f64,
) -> Result<PerformanceIndices> {
    let steps = rec.u.ncols();
    let n_y = rec.y_clean.nrows();
    let n_u = rec.u.nrows();
    ensure_dims(
        rec.y.ncols() == steps
            && rec.y_clean.ncols() == steps
            && rec.reference.shape() == (n_y, steps)
            && rec.states.len() == steps
            && rec.step_index < steps,
        || "closed-loop record has misaligned lengths".into(),
    )?;
    if settling_band.is_nan() || settling_band <= 0.0 {
        return Err(Error::InvalidParameter("settling band must be positive".into()));
    }
    let post = steps - rec.step_index;

    let mut tracking_rmse = Vec::with_capacity(n_y);
    let mut settling_time = Vec::with_capacity(n_y);
    let mut overshoot = Vec::with_capacity(n_y);
    for i in 0..n_y {
        let err: Vec<f64> = (rec.step_index..steps)
            .map(|t| rec.y_clean[(i, t)] - rec.reference[(i, t)])
            .collect();
        tracking_rmse.push((err.iter().map(|e| e * e).sum::<f64>() / post as f64).sqrt());
        let before = if rec.step_index > 0 { rec.reference[(i, rec.step_index - 1)] } else { 0.0 };
        let jump = rec.reference[(i, rec.step_index)] - before;
        let band = if jump != 0.0 { settling_band * jump.abs() } else { settling_band };
        let last_out = err.iter().rposition(|e| e.abs() > band);
        settling_time.push(match last_out {
            None => 0.0,
            Some(k) => (k + 1) as f64 * rec.dt,
        });
        overshoot.push(if jump != 0.0 {
            let peak = err.iter().map(|e| e * jump.signum()).fold(0.0, f64::max);
            peak / jump.abs()
        } else {
            0.0
        });
    }

    let input_energy = rec.u.iter().map(|u| u * u).sum::<f64>() * rec.dt;

    let t_f = prediction.t_f;
    let mut prediction_rmse = Vec::new();
    if steps >= t_f {
        let windows = steps - t_f + 1;
        let mut sq = vec![0.0; t_f];
        for t in 0..windows {
            let u_f = DVector::from_iterator(n_u * t_f, rec.u.columns(t, t_f).iter().cloned());
            let y_hat = predict(prediction, &rec.states[t], &u_f)?;
            for k in 0..t_f {
                for i in 0..n_y {
                    sq[k] += (y_hat[k * n_y + i] - rec.y_clean[(i, t + k)]).powi(2);
                }
            }
        }
        for k in reported_horizons(t_f) {
            prediction_rmse.push(HorizonRmse {
                k,
                rmse: (sq[k - 1] / (windows * n_y) as f64).sqrt(),
            });
        }
    }
    Ok(PerformanceIndices {
        tracking_rmse,
        input_energy,
        prediction_rmse,
        settling_time,
        overshoot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(y_clean: DMatrix<f64>, u: DMatrix<f64>, step_index: usize) -> ClosedLoopRecord {
        let steps = y_clean.ncols();
        let reference = step_reference(&[1.0], step_index, steps);
        ClosedLoopRecord {
            y: y_clean.clone(),
            y_clean,
            states: vec![DVector::zeros(1); steps],
            u,
            reference,
            dt: 0.1,
            step_index,
        }
    }

    fn static_gain() -> PredictionMatrices {
        // y(t+k) = u(t+k)
        PredictionMatrices {
            e_xu: DMatrix::zeros(2, 1),
            e_xy: DMatrix::zeros(2, 0),
            e_uf: DMatrix::identity(2, 2),
            n_u: 1,
            n_y: 1,
            t_f: 2,
        }
    }

    #[test]
    fn perfect_tracking_has_zero_error_and_settles_immediately() {
        let r = step_reference(&[1.0], 3, 10);
        let rec = record(r.clone(), r, 3);
        let idx = performance_indices(&rec, &static_gain(), 0.05).unwrap();
        assert_eq!(idx.tracking_rmse, vec![0.0]);
        assert_eq!(idx.settling_time, vec![0.0]);
        assert_eq!(idx.overshoot, vec![0.0]);
        assert!(idx.prediction_rmse.iter().all(|h| h.rmse == 0.0));
        assert!((idx.input_energy - 0.7).abs() < 1e-12);
    }

    #[test]
    fn zero_input_has_zero_energy() {
        let rec = record(DMatrix::zeros(1, 10), DMatrix::zeros(1, 10), 3);
        let idx = performance_indices(&rec, &static_gain(), 0.05).unwrap();
        assert_eq!(idx.input_energy, 0.0);
        assert!((idx.tracking_rmse[0] - 1.0).abs() < 1e-15);
        assert!((idx.settling_time[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn overshoot_is_relative_to_step() {
        let mut y = step_reference(&[2.0], 2, 8);
        y[(0, 3)] = 2.5;
        let mut rec = record(y.clone(), y, 2);
        rec.reference = step_reference(&[2.0], 2, 8);
        let idx = performance_indices(&rec, &static_gain(), 0.05).unwrap();
        assert!((idx.overshoot[0] - 0.25).abs() < 1e-15);
        assert!((idx.settling_time[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn misaligned_record_is_rejected() {
        let mut rec = record(DMatrix::zeros(1, 10), DMatrix::zeros(1, 10), 3);
        rec.states.pop();
        assert!(performance_indices(&rec, &static_gain(), 0.05).is_err());
    }

    #[test]
    fn horizons() {
        assert_eq!(reported_horizons(20), vec![1, 10, 20]);
        assert_eq!(reported_horizons(1), vec![1]);
        assert_eq!(reported_horizons(2), vec![1, 2]);
    }
}
