//! JSON container for a built model: named real matrices with explicit
//! dimensions (row-major data), the horizon and the build diagnostics.
//!
//! Matrix names are `smm.*` (reduced signal matrix model blocks), `ddss.*`
//! (state-space realization), `filter.*` and `noise.*` (stationary predictor)
//! and `prediction.*` (multi-step prediction matrices).

use std::collections::BTreeMap;
use std::path::Path;

use ddkf::ddss::DataStateSpace;
use ddkf::kalman::{FilterDiagnostics, KalmanPredictor, NoiseModel};
use ddkf::pipeline::SmmKalmanModel;
use ddkf::predictor::PredictionMatrices;
use ddkf::smm::{ParsimoniousSmm, SmmDiagnostics};
use ddkf::HorizonSpec;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MODEL_FORMAT: &str = "ddkf-model";
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixEntry {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixEntry {
    fn from(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().as_slice().to_vec(),
        }
    }
}

impl MatrixEntry {
    pub fn to_matrix(&self) -> CliResult<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(CliError::Schema(format!(
                "{}×{} matrix with {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub schema_version: u32,
    pub horizon: HorizonSpec,
    /// Control plus auxiliary input channels of the model.
    pub n_ubar: usize,
    /// Innovations past horizon used for the build.
    pub past_horizon: usize,
    pub matrices: BTreeMap<String, MatrixEntry>,
    pub smm_diagnostics: SmmDiagnostics,
    pub filter_diagnostics: FilterDiagnostics,
}

impl ModelFile {
    pub fn from_model(model: &SmmKalmanModel, past_horizon: usize) -> Self {
        let (s, d, f, p) = (&model.smm, &model.ddss, &model.filter, &model.prediction);
        let mut m: BTreeMap<String, MatrixEntry> = BTreeMap::new();
        let mut put = |name: &str, x: &DMatrix<f64>| {
            m.insert(name.to_string(), x.into());
        };
        put("smm.l_up", &s.l_up);
        put("smm.l_yup", &s.l_yup);
        put("smm.l_yp", &s.l_yp);
        put("smm.s_uu", &s.s_uu);
        put("smm.s_uy", &s.s_uy);
        put("smm.l_uf", &s.l_uf);
        put("smm.s_yu", &s.s_yu);
        put("smm.s_yy", &s.s_yy);
        put("smm.l_yuf", &s.l_yuf);
        put("ddss.a_p", &d.a_p);
        put("ddss.b_up", &d.b_up);
        put("ddss.b_ep", &d.b_ep);
        put("ddss.c_p", &d.c_p);
        put("ddss.a_uu", &d.a_uu);
        put("ddss.a_yu", &d.a_yu);
        put("ddss.a_yy", &d.a_yy);
        put("ddss.b_uu", &d.b_uu);
        put("ddss.b_yu", &d.b_yu);
        put("ddss.c_yu", &d.c_yu);
        put("ddss.c_yy", &d.c_yy);
        put("ddss.c_eff", &d.c_eff);
        put("ddss.d_u_eff", &d.d_u_eff);
        put("ddss.d_e_eff", &d.d_e_eff);
        put("filter.a", &f.a);
        put("filter.b_u", &f.b_u);
        put("filter.c", &f.c);
        put("filter.d_u", &f.d_u);
        put("filter.gain", &f.gain);
        put("filter.p", &f.p);
        put("noise.lambda", &f.noise.lambda);
        put("noise.lambda1", &f.noise.lambda1);
        put("noise.lambda2", &f.noise.lambda2);
        put("noise.lambda12", &f.noise.lambda12);
        if let Some(sv) = &f.noise.sigma_v {
            put("noise.sigma_v", sv);
        }
        put("prediction.e_xu", &p.e_xu);
        put("prediction.e_xy", &p.e_xy);
        put("prediction.e_uf", &p.e_uf);
        Self {
            format: MODEL_FORMAT.into(),
            schema_version: MODEL_SCHEMA_VERSION,
            horizon: s.horizon,
            n_ubar: s.n_ubar,
            past_horizon,
            matrices: m,
            smm_diagnostics: s.diagnostics.clone(),
            filter_diagnostics: f.diagnostics.clone(),
        }
    }

    fn matrix(&self, name: &str) -> CliResult<DMatrix<f64>> {
        self.matrices
            .get(name)
            .ok_or_else(|| CliError::Schema(format!("model file lacks matrix '{name}'")))?
            .to_matrix()
            .map_err(|e| CliError::Schema(format!("matrix '{name}': {e}")))
    }

    pub fn to_model(&self) -> CliResult<SmmKalmanModel> {
        if self.format != MODEL_FORMAT || self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "expected a {MODEL_FORMAT} file with schema version {MODEL_SCHEMA_VERSION}"
            )));
        }
        let known = self.matrices.keys().all(|k| {
            ["smm.", "ddss.", "filter.", "noise.", "prediction."].iter().any(|p| k.starts_with(p))
        });
        if !known {
            return Err(CliError::Schema("model file has matrices outside the known groups".into()));
        }
        self.horizon.validate()?;
        let m = |n: &str| self.matrix(n);
        let smm = ParsimoniousSmm {
            l_up: m("smm.l_up")?,
            l_yup: m("smm.l_yup")?,
            l_yp: m("smm.l_yp")?,
            s_uu: m("smm.s_uu")?,
            s_uy: m("smm.s_uy")?,
            l_uf: m("smm.l_uf")?,
            s_yu: m("smm.s_yu")?,
            s_yy: m("smm.s_yy")?,
            l_yuf: m("smm.l_yuf")?,
            horizon: self.horizon,
            n_ubar: self.n_ubar,
            diagnostics: self.smm_diagnostics.clone(),
        };
        let ddss = DataStateSpace {
            a_p: m("ddss.a_p")?,
            b_up: m("ddss.b_up")?,
            b_ep: m("ddss.b_ep")?,
            c_p: m("ddss.c_p")?,
            a_uu: m("ddss.a_uu")?,
            a_yu: m("ddss.a_yu")?,
            a_yy: m("ddss.a_yy")?,
            b_uu: m("ddss.b_uu")?,
            b_yu: m("ddss.b_yu")?,
            c_yu: m("ddss.c_yu")?,
            c_yy: m("ddss.c_yy")?,
            c_eff: m("ddss.c_eff")?,
            d_u_eff: m("ddss.d_u_eff")?,
            d_e_eff: m("ddss.d_e_eff")?,
        };
        let noise = NoiseModel {
            lambda: m("noise.lambda")?,
            lambda1: m("noise.lambda1")?,
            lambda2: m("noise.lambda2")?,
            lambda12: m("noise.lambda12")?,
            sigma_v: self.matrices.contains_key("noise.sigma_v").then(|| m("noise.sigma_v")).transpose()?,
        };
        let filter = KalmanPredictor::restore(
            m("filter.a")?,
            m("filter.b_u")?,
            m("filter.c")?,
            m("filter.d_u")?,
            m("filter.gain")?,
            m("filter.p")?,
            noise,
            self.filter_diagnostics.clone(),
        )?;
        let prediction = PredictionMatrices {
            e_xu: m("prediction.e_xu")?,
            e_xy: m("prediction.e_xy")?,
            e_uf: m("prediction.e_uf")?,
            n_u: self.horizon.n_u,
            n_y: self.horizon.n_y,
            t_f: self.horizon.t_f,
        };
        let h = &self.horizon;
        if prediction.e_uf.shape() != (h.n_y * h.t_f, h.n_u * h.t_f) || prediction.state_dim() != filter.a.nrows() {
            return Err(ddkf::Error::DimensionMismatch("prediction matrices do not fit the filter".into()).into());
        }
        Ok(SmmKalmanModel { smm, ddss, filter, prediction })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
    }
}
