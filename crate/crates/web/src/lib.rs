//! WebAssembly bindings for the browser demo. Each export takes plain numbers
//! and returns a JSON document with the curves to plot.

use ddkf::benchmark::{BenchmarkConfig, Study};
use ddkf::diagnostics::channel_correlations;
use nalgebra::DMatrix;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

fn study(airspeed: f64, seed: u64, n_samples: usize, past_horizon: usize) -> ddkf::Result<Study> {
    let mut c = BenchmarkConfig::standard(airspeed, seed);
    c.n_samples = n_samples;
    c.past_horizon = past_horizon;
    c.burn_in = 200;
    Study::new(&c)
}

#[derive(Debug, Serialize)]
pub struct GustSamples {
    pub dt: f64,
    /// Horizontal and vertical gust velocity (ft/s).
    pub horizontal: Vec<f64>,
    pub vertical: Vec<f64>,
    /// Aircraft outputs driven by the gusts alone.
    pub outputs: Vec<Vec<f64>>,
}

/// Dryden gust realization at `airspeed` and the aircraft's response to it.
pub fn gust_samples(airspeed: f64, seed: u64, steps: usize) -> ddkf::Result<GustSamples> {
    let s = study(airspeed, seed, 2500, 150)?;
    let zero = DMatrix::zeros(2, 2);
    let rec = ddkf::benchmark::simulate(&s.plant, &zero, &s.sigma_w, &zero, seed, steps)?;
    let g = &s.config.gust;
    let b = 2.0 * g.l_v / g.airspeed;
    let lead = 2.0 * 3f64.sqrt() * g.l_v / g.airspeed;
    let k_v = g.vertical_gain() / (b * b);
    let x = &rec.x;
    Ok(GustSamples {
        dt: s.plant.dt,
        horizontal: x.row(4).iter().cloned().collect(),
        vertical: (0..x.ncols()).map(|t| k_v * (x[(5, t)] + lead * x[(6, t)])).collect(),
        outputs: rows(rec.y.samples()),
    })
}

#[derive(Debug, Serialize)]
pub struct InnovationsComparison {
    pub first_sample: usize,
    pub truth: Vec<Vec<f64>>,
    pub estimated: Vec<Vec<f64>>,
    pub correlation: Vec<f64>,
    pub lambda_hat: Vec<Vec<f64>>,
}

/// Innovations estimated from input-output data against those of the
/// model-based filter on the same record.
pub fn innovations_comparison(
    airspeed: f64,
    seed: u64,
    n_samples: usize,
    past_horizon: usize,
) -> ddkf::Result<InnovationsComparison> {
    let s = study(airspeed, seed, n_samples, past_horizon)?;
    let (record, e_true) = s.identification_data(seed)?;
    let est = ddkf::innovations::estimate_innovations(&record.u, &record.y, past_horizon)?;
    let truth = e_true.columns(est.first_sample, est.len()).into_owned();
    Ok(InnovationsComparison {
        first_sample: est.first_sample,
        correlation: channel_correlations(&est.e_hat, &truth),
        truth: rows(&truth),
        estimated: rows(&est.e_hat),
        lambda_hat: rows(&est.lambda_hat),
    })
}

#[derive(Debug, Serialize)]
pub struct PredictionCurves {
    pub dt: f64,
    /// Index of the last measured sample within `measured`.
    pub now: usize,
    pub measured: Vec<Vec<f64>>,
    /// Noise-free outputs over the prediction horizon.
    pub truth: Vec<Vec<f64>>,
    pub data_driven: Vec<Vec<f64>>,
    pub model_based: Vec<Vec<f64>>,
}

/// `t_f`-step predictions from the innovations-based data model and from the
/// model-based filter, both fed the same noisy validation record.
pub fn prediction_curves(
    airspeed: f64,
    seed: u64,
    n_samples: usize,
    past_horizon: usize,
    t_f: usize,
) -> ddkf::Result<PredictionCurves> {
    let mut c = BenchmarkConfig::standard(airspeed, seed);
    c.n_samples = n_samples;
    c.past_horizon = past_horizon;
    c.t_f = t_f;
    c.burn_in = 200;
    let s = Study::new(&c)?;
    let (record, _) = s.identification_data(seed)?;
    let mut model = s.innovations_model(&record)?.model;

    let history = 120;
    let validation = ddkf::benchmark::simulate(
        &s.plant,
        &DMatrix::identity(2, 2),
        &s.sigma_w,
        &s.sigma_v,
        seed.wrapping_add(1 << 32),
        history + t_f,
    )?;
    let mut oracle = s.oracle.filter.clone();
    for t in 0..history {
        let (u, y) = (validation.u.sample(t), validation.y.sample(t));
        model.observe(&u, &y)?;
        oracle.step(&u, &y)?;
    }
    let u_f = validation.u.stacked(history, t_f);
    let data_driven = model.predict(&u_f)?;
    let model_based = ddkf::predictor::predict(&s.oracle.prediction_matrices(t_f), oracle.state(), &u_f)?;
    let as_rows = |v: &nalgebra::DVector<f64>| rows(&DMatrix::from_column_slice(2, t_f, v.as_slice()));
    Ok(PredictionCurves {
        dt: s.plant.dt,
        now: history - 1,
        measured: rows(&validation.y.samples().columns(0, history).into_owned()),
        truth: rows(&validation.y_clean.samples().columns(history, t_f).into_owned()),
        data_driven: as_rows(&data_driven),
        model_based: as_rows(&model_based),
    })
}

fn to_js<T: Serialize>(r: ddkf::Result<T>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = gustSamples)]
pub fn gust_samples_js(airspeed: f64, seed: u32, steps: u32) -> Result<String, JsError> {
    to_js(gust_samples(airspeed, seed.into(), steps as usize))
}

#[wasm_bindgen(js_name = innovationsComparison)]
pub fn innovations_comparison_js(airspeed: f64, seed: u32, n_samples: u32, past_horizon: u32) -> Result<String, JsError> {
    to_js(innovations_comparison(airspeed, seed.into(), n_samples as usize, past_horizon as usize))
}

#[wasm_bindgen(js_name = predictionCurves)]
pub fn prediction_curves_js(
    airspeed: f64,
    seed: u32,
    n_samples: u32,
    past_horizon: u32,
    t_f: u32,
) -> Result<String, JsError> {
    to_js(prediction_curves(airspeed, seed.into(), n_samples as usize, past_horizon as usize, t_f as usize))
}
