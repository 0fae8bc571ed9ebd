use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::closed_loop::{performance_indices, run_closed_loop, step_reference, LoopModel, PerformanceIndices, TrackingWeights};
use super::config::{BenchmarkConfig, Method};
use super::oracle::{oracle_kf, OracleFilter};
use super::plant::{benchmark_plant, DiscretePlant};
use super::simulate::{simulate, GaussianSource, SimulationRecord, Stream};
use crate::diagnostics::{channel_correlations, whiteness, WhitenessReport};
use crate::error::Result;
use crate::kalman::FilterDiagnostics;
use crate::pipeline::{build_disturbance_model, build_innovations_model, InnovationsModel};

/// Maximum autocorrelation lag of the innovations whiteness check.
pub const WHITENESS_LAGS: usize = 20;
/// Required fraction of lags inside the ±3/√N band.
pub const WHITENESS_FRACTION: f64 = 0.95;

/// Estimated against true (oracle) innovations over the identification record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnovationsCheck {
    pub correlation: Vec<f64>,
    pub whiteness: WhitenessReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub indices: Option<PerformanceIndices>,
    pub filter: Option<FilterDiagnostics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub innovations: Option<InnovationsCheck>,
    pub outcomes: Vec<MethodOutcome>,
}

impl RunRecord {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }

    pub fn indices(&self, method: Method) -> Option<&PerformanceIndices> {
        self.outcome(method).and_then(|o| o.indices.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub methods: Vec<Method>,
    pub runs: Vec<RunRecord>,
}

/// Shared, run-independent parts of the study.
#[derive(Debug, Clone)]
pub struct Study {
    pub config: BenchmarkConfig,
    pub plant: DiscretePlant,
    pub oracle: OracleFilter,
    pub sigma_w: DMatrix<f64>,
    pub sigma_v: DMatrix<f64>,
}

impl Study {
    pub fn new(config: &BenchmarkConfig) -> Result<Self> {
        config.validate()?;
        let plant = benchmark_plant(&config.gust, config.dt)?;
        let sigma_w = config.sigma_w()?;
        let sigma_v = config.sigma_v()?;
        let oracle = oracle_kf(&plant, &sigma_w, &sigma_v, &config.dare)?;
        Ok(Self {
            config: config.clone(),
            plant,
            oracle,
            sigma_w,
            sigma_v,
        })
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.config.master_seed.wrapping_add(run as u64)
    }

    /// Identification record after burn-in: `L + N` samples.
    pub fn identification_data(&self, seed: u64) -> Result<(SimulationRecord, DMatrix<f64>)> {
        let c = &self.config;
        let sigma_u = DMatrix::identity(2, 2) * c.input_std.powi(2);
        let full = simulate(&self.plant, &sigma_u, &self.sigma_w, &self.sigma_v, seed, c.burn_in + c.record_len())?;
        // the oracle runs over the burn-in as well so its innovations are stationary
        let e_true = self.oracle.innovations(full.u.samples(), full.y.samples())?;
        let e_true = e_true.columns(c.burn_in, c.record_len()).into_owned();
        Ok((full.tail(c.burn_in)?, e_true))
    }

    pub fn innovations_model(&self, data: &SimulationRecord) -> Result<InnovationsModel> {
        build_innovations_model(&data.u, &data.y, self.config.past_horizon, &self.config.horizon()?, &self.config.dare)
    }

    fn weights(&self) -> Result<TrackingWeights> {
        Ok(TrackingWeights {
            q: self.config.q()?,
            r: self.config.r()?,
            bounds: self.config.tracking.bounds.clone(),
        })
    }

    /// One Monte Carlo realization. Failures are recorded per method.
    pub fn run(&self, run: usize) -> RunRecord {
        let seed = self.run_seed(run);
        let methods = &self.config.methods;
        let fail = |method: Method, e: String| MethodOutcome { method, indices: None, filter: None, error: Some(e) };
        let data = match self.identification_data(seed) {
            Ok(d) => d,
            Err(e) => {
                return RunRecord {
                    run,
                    seed,
                    innovations: None,
                    outcomes: methods.iter().map(|&m| fail(m, e.to_string())).collect(),
                }
            }
        };
        let (record, e_true) = data;
        let needs_innov = methods.iter().any(|m| matches!(m, Method::InnovSmmKal | Method::UnfilteredSmm));
        let innov = if needs_innov { Some(self.innovations_model(&record)) } else { None };
        let innovations = match &innov {
            Some(Ok(m)) => {
                let est = &m.innovations;
                let truth = e_true.columns(est.first_sample, est.len()).into_owned();
                Some(InnovationsCheck {
                    correlation: channel_correlations(&est.e_hat, &truth),
                    whiteness: whiteness(&est.e_hat, WHITENESS_LAGS, WHITENESS_FRACTION),
                })
            }
            _ => None,
        };
        let outcomes = methods
            .iter()
            .map(|&method| {
                let built: Result<LoopModel> = match method {
                    Method::InnovSmmKal => match &innov {
                        Some(Ok(m)) => Ok(LoopModel::Filtered(Box::new(m.model.clone()))),
                        Some(Err(e)) => Err(e.clone()),
                        None => unreachable!("innovations model requested"),
                    },
                    Method::UnfilteredSmm => match &innov {
                        Some(Ok(m)) => Ok(LoopModel::unfiltered(m.model.smm.clone(), m.model.prediction.clone())),
                        Some(Err(e)) => Err(e.clone()),
                        None => unreachable!("innovations model requested"),
                    },
                    Method::SmmKal => self.disturbance_model(&record),
                    Method::OracleKf => Ok(LoopModel::Oracle {
                        prediction: self.oracle.prediction_matrices(self.config.t_f),
                        filter: Box::new(self.oracle.filter.clone()),
                    }),
                };
                match built.and_then(|mut model| self.evaluate(&mut model, seed)) {
                    Ok((indices, filter)) => MethodOutcome { method, indices: Some(indices), filter, error: None },
                    Err(e) => fail(method, e.to_string()),
                }
            })
            .collect();
        RunRecord { run, seed, innovations, outcomes }
    }

    /// SMM-Kal model from the measured disturbance over the same `N` samples
    /// the innovations model uses.
    pub fn disturbance_model(&self, record: &SimulationRecord) -> Result<LoopModel> {
        let c = &self.config;
        let (start, n) = (c.past_horizon, c.n_samples);
        let model = build_disturbance_model(
            &record.u.slice(start, n)?,
            &record.w.slice(start, n)?,
            &record.y.slice(start, n)?,
            &c.horizon()?,
            &self.sigma_w,
            &self.sigma_v,
            &c.dare,
        )?;
        Ok(LoopModel::Filtered(Box::new(model)))
    }

    /// Closed loop from rest with this run's loop noise, then the indices.
    pub fn evaluate(&self, model: &mut LoopModel, seed: u64) -> Result<(PerformanceIndices, Option<FilterDiagnostics>)> {
        let rec = self.closed_loop(model, seed)?;
        let idx = performance_indices(&rec, model.prediction(), self.config.settling_band)?;
        let diag = match model {
            LoopModel::Filtered(m) => Some(m.filter.diagnostics.clone()),
            LoopModel::Oracle { filter, .. } => Some(filter.diagnostics.clone()),
            LoopModel::Unfiltered { .. } => None,
        };
        Ok((idx, diag))
    }

    pub fn closed_loop(&self, model: &mut LoopModel, seed: u64) -> Result<super::closed_loop::ClosedLoopRecord> {
        let c = &self.config;
        let steps = c.loop_steps();
        let w = GaussianSource::new(seed, Stream::LoopDisturbance, &self.sigma_w)?.samples(steps);
        let v = GaussianSource::new(seed, Stream::LoopNoise, &self.sigma_v)?.samples(steps);
        let reference = step_reference(&c.reference_step, c.step_index(), steps);
        run_closed_loop(
            &self.plant,
            model,
            &self.weights()?,
            &reference,
            c.step_index(),
            &w,
            &v,
            &DVector::zeros(self.plant.state_dim()),
        )
    }
}

/// Run every realization of the study. Runs are independent and, with the
/// `parallel` feature, spread over the current rayon pool; the result does
/// not depend on the thread count.
pub fn run_monte_carlo(config: &BenchmarkConfig) -> Result<MonteCarloResult> {
    let study = Study::new(config)?;
    #[cfg(feature = "parallel")]
    let runs = {
        use rayon::prelude::*;
        (0..config.mc_runs).into_par_iter().map(|r| study.run(r)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs = (0..config.mc_runs).map(|r| study.run(r)).collect();
    Ok(MonteCarloResult {
        methods: config.methods.clone(),
        runs,
    })
}

/// Five-number summary of one index for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub method: Method,
    pub index: String,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(result: &MonteCarloResult) -> Vec<BoxplotSummary> {
    let mut out = Vec::new();
    for &method in &result.methods {
        let tables: Vec<Vec<(String, f64)>> = result
            .runs
            .iter()
            .filter_map(|r| r.indices(method))
            .map(PerformanceIndices::named_values)
            .collect();
        let Some(first) = tables.first() else { continue };
        for (k, (name, _)) in first.iter().enumerate() {
            let mut vals: Vec<f64> = tables.iter().map(|t| t[k].1).collect();
            vals.sort_by(f64::total_cmp);
            out.push(BoxplotSummary {
                method,
                index: name.clone(),
                count: vals.len(),
                min: vals[0],
                q1: quantile(&vals, 0.25),
                median: quantile(&vals, 0.5),
                q3: quantile(&vals, 0.75),
                max: vals[vals.len() - 1],
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert!(quantile(&[], 0.5).is_nan());
    }
}
