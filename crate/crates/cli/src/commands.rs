//! The four subcommands. Each reads its configuration section, computes, and
//! writes its outputs into the output directory.

use std::path::{Path, PathBuf};

use ddkf::benchmark::monte_carlo::{WHITENESS_FRACTION, WHITENESS_LAGS};
use ddkf::benchmark::{run_monte_carlo, summarize, BenchmarkConfig, BoxplotSummary, Method, RunRecord, Study};
use ddkf::diagnostics::{whiteness, WhitenessReport};
use ddkf::innovations::estimate_innovations;
use ddkf::kalman::FilterDiagnostics;
use ddkf::linalg;
use ddkf::pipeline::build_innovations_model;
use ddkf::smm::SmmDiagnostics;
use ddkf::{HorizonSpec, Trajectory};
use log::info;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{BuildConfig, EstimateConfig, PredictConfig};
use crate::csv_io::{format_trajectories, read_trajectories, write_trajectories};
use crate::error::{CliError, CliResult};
use crate::model_file::{MatrixEntry, ModelFile};
use crate::output::{json_sha256, write_atomic, write_json, ResultEnvelope, Tool, TOOL};

pub const RESULT_FILE: &str = "result.json";

#[derive(Debug, Clone, Serialize)]
pub struct InnovationsSummary {
    pub past_horizon: usize,
    pub first_sample: usize,
    pub samples: usize,
    pub regressor_rank: usize,
    pub lambda_hat: MatrixEntry,
    pub whiteness: WhitenessReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatePayload {
    pub tool: Tool,
    pub config_sha256: String,
    pub innovations: InnovationsSummary,
}

fn data_pair(path: &Path, dt: Option<f64>) -> CliResult<(Trajectory, Trajectory)> {
    let file = read_trajectories(path, dt)?;
    Ok((file.require("u", path)?.clone(), file.require("y", path)?.clone()))
}

fn finish<T: Serialize>(out: &Path, command: &str, payload: &T) -> CliResult<PathBuf> {
    let path = out.join(RESULT_FILE);
    write_json(&path, &ResultEnvelope::new(command, payload)?)?;
    info!("wrote {}", path.display());
    Ok(path)
}

pub fn estimate_innovations_cmd(cfg: &EstimateConfig, out: &Path) -> CliResult<PathBuf> {
    cfg.validate()?;
    let (u, y) = data_pair(&cfg.data, cfg.dt)?;
    info!("estimating innovations from {} samples with L = {}", u.len(), cfg.past_horizon);
    let est = estimate_innovations(&u, &y, cfg.past_horizon)?;
    let names = y.channel_names().to_vec();
    let e = Trajectory::new(est.e_hat.clone(), names, cfg.dt)?;
    write_trajectories(&out.join("innovations.csv"), &[("e", &e)])?;
    let payload = EstimatePayload {
        tool: TOOL,
        config_sha256: json_sha256(cfg)?,
        innovations: InnovationsSummary {
            past_horizon: est.past_horizon,
            first_sample: est.first_sample,
            samples: est.len(),
            regressor_rank: est.regressor_rank,
            lambda_hat: (&est.lambda_hat).into(),
            whiteness: whiteness(&est.e_hat, cfg.whiteness_lags, cfg.whiteness_fraction),
        },
    };
    finish(out, "estimate-innovations", &payload)
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildPayload {
    pub tool: Tool,
    pub config_sha256: String,
    pub horizon: HorizonSpec,
    pub state_dim: usize,
    pub innovations: InnovationsSummary,
    pub smm: SmmDiagnostics,
    pub filter: FilterDiagnostics,
    pub state_matrix_radius: f64,
    pub model_sha256: String,
}

pub fn build_cmd(cfg: &BuildConfig, out: &Path) -> CliResult<PathBuf> {
    cfg.validate()?;
    let (u, y) = data_pair(&cfg.data, cfg.dt)?;
    let spec = cfg.horizon(u.channel_count(), y.channel_count())?;
    info!("building model from {} samples", u.len());
    let built = build_innovations_model(&u, &y, cfg.past_horizon, &spec, &cfg.dare)?;
    let model_file = ModelFile::from_model(&built.model, cfg.past_horizon);
    write_json(&out.join("model.json"), &model_file)?;
    let est = &built.innovations;
    let e = Trajectory::new(est.e_hat.clone(), y.channel_names().to_vec(), cfg.dt)?;
    write_trajectories(&out.join("innovations.csv"), &[("e", &e)])?;
    let payload = BuildPayload {
        tool: TOOL,
        config_sha256: json_sha256(cfg)?,
        horizon: spec,
        state_dim: built.model.ddss.state_dim(),
        innovations: InnovationsSummary {
            past_horizon: est.past_horizon,
            first_sample: est.first_sample,
            samples: est.len(),
            regressor_rank: est.regressor_rank,
            lambda_hat: (&est.lambda_hat).into(),
            whiteness: whiteness(&est.e_hat, WHITENESS_LAGS.min(est.len().saturating_sub(1)).max(1), WHITENESS_FRACTION),
        },
        smm: built.model.smm.diagnostics.clone(),
        filter: built.model.filter.diagnostics.clone(),
        state_matrix_radius: linalg::spectral_radius(&built.model.ddss.a_p),
        model_sha256: json_sha256(&model_file)?,
    };
    finish(out, "build", &payload)
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictPayload {
    pub tool: Tool,
    pub config_sha256: String,
    pub model_sha256: String,
    pub observed_samples: usize,
    /// n_y × t_f; column k is the prediction `k + 1` steps after the last past sample.
    pub prediction: MatrixEntry,
}

/// Predict the `t_f` outputs following a past record for given future inputs.
/// The filter starts from the first `t_p` samples and then absorbs the rest.
pub fn predict_from(
    model: &mut ddkf::pipeline::SmmKalmanModel,
    u_past: &Trajectory,
    y_past: &Trajectory,
    u_future: &Trajectory,
) -> CliResult<DMatrix<f64>> {
    let h = *model.horizon();
    if u_past.channel_count() != h.n_u || y_past.channel_count() != h.n_y || u_future.channel_count() != h.n_u {
        return Err(ddkf::Error::DimensionMismatch(format!(
            "model expects {} inputs and {} outputs",
            h.n_u, h.n_y
        ))
        .into());
    }
    if u_past.len() != y_past.len() {
        return Err(ddkf::Error::DimensionMismatch("past inputs and outputs differ in length".into()).into());
    }
    if u_past.len() < h.t_p {
        return Err(ddkf::Error::InsufficientData(format!(
            "{} past samples for a past horizon of {}",
            u_past.len(),
            h.t_p
        ))
        .into());
    }
    if u_future.len() != h.t_f {
        return Err(ddkf::Error::DimensionMismatch(format!(
            "{} future inputs for a future horizon of {}",
            u_future.len(),
            h.t_f
        ))
        .into());
    }
    model.initialize_from_window(&u_past.stacked(0, h.t_p), &y_past.stacked(0, h.t_p))?;
    for t in h.t_p..u_past.len() {
        model.observe(&u_past.sample(t), &y_past.sample(t))?;
    }
    let y_hat = model.predict(&u_future.stacked(0, h.t_f))?;
    Ok(DMatrix::from_column_slice(h.n_y, h.t_f, y_hat.as_slice()))
}

pub fn predict_cmd(cfg: &PredictConfig, out: &Path) -> CliResult<PathBuf> {
    let model_file = ModelFile::read(&cfg.model)?;
    let mut model = model_file.to_model()?;
    let past = read_trajectories(&cfg.past, None)?;
    let future = read_trajectories(&cfg.future, None)?;
    let y_past = past.require("y", &cfg.past)?;
    let y_hat = predict_from(
        &mut model,
        past.require("u", &cfg.past)?,
        y_past,
        future.require("u", &cfg.future)?,
    )?;
    let pred = Trajectory::new(y_hat.clone(), y_past.channel_names().to_vec(), None)?;
    write_trajectories(&out.join("prediction.csv"), &[("y", &pred)])?;
    let payload = PredictPayload {
        tool: TOOL,
        config_sha256: json_sha256(cfg)?,
        model_sha256: json_sha256(&model_file)?,
        observed_samples: y_past.len(),
        prediction: (&y_hat).into(),
    };
    finish(out, "predict", &payload)
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodAggregate {
    pub method: Method,
    pub completed_runs: usize,
    pub failed_runs: usize,
    /// Median over runs of the `t_f`-step prediction RMSE.
    pub median_final_prediction_rmse: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkPayload {
    pub tool: Tool,
    pub config_sha256: String,
    pub master_seed: u64,
    pub config: BenchmarkConfig,
    pub aggregates: Vec<MethodAggregate>,
    pub summary: Vec<BoxplotSummary>,
    pub runs: Vec<RunRecord>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(ddkf::benchmark::monte_carlo::quantile(&v, 0.5))
}

pub fn aggregates(config: &BenchmarkConfig, runs: &[RunRecord]) -> Vec<MethodAggregate> {
    config
        .methods
        .iter()
        .map(|&method| {
            let done: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.indices(method))
                .filter_map(|i| i.prediction_at(config.t_f))
                .collect();
            MethodAggregate {
                method,
                completed_runs: done.len(),
                failed_runs: runs.len() - done.len(),
                median_final_prediction_rmse: median(done),
            }
        })
        .collect()
}

fn runs_csv(runs: &[RunRecord]) -> CliResult<String> {
    let names: Vec<String> = runs
        .iter()
        .flat_map(|r| r.outcomes.iter())
        .find_map(|o| o.indices.as_ref())
        .map(|i| i.named_values().into_iter().map(|(n, _)| n).collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Schema(format!("CSV encoding: {e}"));
    let mut header = vec!["run".to_string(), "seed".into(), "method".into(), "status".into()];
    header.extend(names.iter().cloned());
    header.push("error".into());
    w.write_record(&header).map_err(csv_err)?;
    for r in runs {
        for o in &r.outcomes {
            let mut row = vec![r.run.to_string(), r.seed.to_string(), o.method.to_string()];
            match &o.indices {
                Some(i) => {
                    row.push("ok".into());
                    row.extend(i.named_values().into_iter().map(|(_, v)| format!("{v:?}")));
                }
                None => {
                    row.push("failed".into());
                    row.extend(names.iter().map(|_| String::new()));
                }
            }
            row.push(o.error.clone().unwrap_or_default());
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Schema(format!("CSV encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

#[derive(Debug, Clone, Serialize)]
struct BoxplotFile<'a> {
    schema_version: u32,
    config_sha256: &'a str,
    master_seed: u64,
    summary: &'a [BoxplotSummary],
}

/// True and estimated innovations of the first run, for plotting.
fn innovations_plot_data(config: &BenchmarkConfig) -> CliResult<Option<String>> {
    let study = Study::new(config)?;
    let seed = study.run_seed(0);
    let (record, e_true) = study.identification_data(seed)?;
    let Ok(model) = study.innovations_model(&record) else {
        return Ok(None);
    };
    let est = &model.innovations;
    let truth = e_true.columns(est.first_sample, est.len()).into_owned();
    let dt = Some(config.dt);
    let t = Trajectory::new(truth, vec!["true_y1".into(), "true_y2".into()], dt)?;
    let e = Trajectory::new(est.e_hat.clone(), vec!["estimated_y1".into(), "estimated_y2".into()], dt)?;
    Ok(Some(format_trajectories(&[("e", &t), ("e", &e)])?))
}

pub fn benchmark_cmd(config: &BenchmarkConfig, seed: Option<u64>, out: &Path) -> CliResult<PathBuf> {
    let mut config = config.clone();
    if let Some(s) = seed {
        config.master_seed = s;
    }
    config.validate()?;
    info!(
        "Monte Carlo: {} runs, methods {:?}, master seed {}",
        config.mc_runs, config.methods, config.master_seed
    );
    let result = run_monte_carlo(&config)?;
    let failures: usize = result.runs.iter().flat_map(|r| &r.outcomes).filter(|o| o.error.is_some()).count();
    if failures > 0 {
        log::warn!("{failures} method evaluations failed; see runs.csv");
    }
    let config_sha256 = json_sha256(&config)?;
    let summary = summarize(&result);
    write_atomic(&out.join("runs.csv"), runs_csv(&result.runs)?.as_bytes())?;
    write_json(
        &out.join("boxplot.json"),
        &BoxplotFile {
            schema_version: crate::output::RESULT_SCHEMA_VERSION,
            config_sha256: &config_sha256,
            master_seed: config.master_seed,
            summary: &summary,
        },
    )?;
    if config.methods.iter().any(|m| matches!(m, Method::InnovSmmKal | Method::UnfilteredSmm)) {
        if let Some(text) = innovations_plot_data(&config)? {
            write_atomic(&out.join("innovations_run0.csv"), text.as_bytes())?;
        }
    }
    let payload = BenchmarkPayload {
        tool: TOOL,
        config_sha256,
        master_seed: config.master_seed,
        aggregates: aggregates(&config, &result.runs),
        summary,
        runs: result.runs,
        config,
    };
    finish(out, "benchmark", &payload)
}
