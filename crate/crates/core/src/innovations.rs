//! Estimating the innovations sequence from input-output data alone.
//!
//! Every output sample after the first `L` is regressed onto the preceding
//! `L` stacked input-output samples. The regression residual, obtained from an
//! LQ factorization of the stacked data matrices, is the innovations estimate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::linalg;
use crate::trajectory::{build_hankel, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnovationsEstimate {
    /// n_y × N; column j is the estimate at sample `first_sample + j`.
    pub e_hat: DMatrix<f64>,
    pub lambda_hat: DMatrix<f64>,
    /// Past-regression horizon L.
    pub past_horizon: usize,
    /// Zero-based index of the first estimated sample.
    pub first_sample: usize,
    pub regressor_rank: usize,
}

impl InnovationsEstimate {
    pub fn len(&self) -> usize {
        self.e_hat.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.e_hat.ncols() == 0
    }

    pub fn to_trajectory(&self, dt: Option<f64>) -> Result<Trajectory> {
        Trajectory::with_prefix(self.e_hat.clone(), "e", dt)
    }
}

/// Innovations estimate for samples `L .. len` using the preceding `L`
/// samples of (u, y) as regressors.
pub fn estimate_innovations(u: &Trajectory, y: &Trajectory, past_horizon: usize) -> Result<InnovationsEstimate> {
    estimate_from(u, y, past_horizon, past_horizon)
}

/// Same regression, with the estimated samples starting at `first_sample`
/// (which must be at least `past_horizon`).
pub fn estimate_from(
    u: &Trajectory,
    y: &Trajectory,
    past_horizon: usize,
    first_sample: usize,
) -> Result<InnovationsEstimate> {
    if past_horizon == 0 {
        return Err(Error::InvalidParameter("past horizon must be at least 1".into()));
    }
    ensure_dims(u.len() == y.len(), || {
        format!("input length {} differs from output length {}", u.len(), y.len())
    })?;
    if first_sample < past_horizon {
        return Err(Error::InvalidParameter(format!(
            "first estimated sample {first_sample} precedes the past horizon {past_horizon}"
        )));
    }
    let len = y.len();
    if len < first_sample + 2 {
        return Err(Error::InsufficientData(format!(
            "{len} samples leave fewer than two regression targets after {first_sample}"
        )));
    }
    let n_y = y.channel_count();
    let n = len - first_sample;
    let zeta = Trajectory::stack(&[u, y])?;
    let z = build_hankel(&zeta, first_sample - past_horizon, len - 2, past_horizon)?.into_data();
    let target = y.samples().columns(first_sample, n).into_owned();
    let p = z.nrows();
    if n < p + n_y {
        return Err(Error::InsufficientData(format!(
            "{n} regression targets for {p} regressors; need at least {}",
            p + n_y
        )));
    }

    let (e_hat, regressor_rank) = lq_residual(&z, &target);
    let lambda_hat = estimate_lambda(&e_hat)?;
    Ok(InnovationsEstimate {
        e_hat,
        lambda_hat,
        past_horizon,
        first_sample,
        regressor_rank,
    })
}

/// Residual of regressing the rows of `target` onto the rows of `regressors`,
/// via `[Z; Y] = [L11 0; L21 L22]·[Q1ᵀ; Q2ᵀ]` and `ê = L22·Q2ᵀ`.
fn lq_residual(regressors: &DMatrix<f64>, target: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let p = regressors.nrows();
    let n_y = target.nrows();
    let stacked_t = linalg::hstack(&[&regressors.transpose(), &target.transpose()]);
    let qr = stacked_t.qr();
    let r = qr.r();
    let diag = r.diagonal().abs();
    let dmax = diag.rows(0, p).max();
    let tol = linalg::rank_threshold(p, regressors.ncols(), dmax);
    let rank = diag.rows(0, p).iter().filter(|&&d| d > tol).count();
    if rank < p {
        // Householder directions for dependent rows are arbitrary, so the
        // LQ residual is no longer the least-squares one; use the SVD basis.
        return (svd_residual(regressors, target), rank);
    }
    let q = qr.q();
    let q2 = q.columns(p, n_y);
    let r22 = r.view((p, p), (n_y, n_y));
    ((q2 * r22).transpose(), rank)
}

fn svd_residual(regressors: &DMatrix<f64>, target: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, n) = regressors.shape();
    let svd = regressors.clone().svd(false, true);
    let rank = linalg::numerical_rank(&svd.singular_values, p, n);
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut resid = target.clone();
    for &k in order.iter().take(rank) {
        let v = vt.row(k);
        let coef = target * v.transpose();
        resid -= coef * v;
    }
    resid
}

/// `(1/N)·ê·êᵀ`, symmetrized. Innovations are zero-mean by construction, so
/// no mean is removed.
pub fn estimate_lambda(e_hat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = e_hat.ncols();
    if n == 0 {
        return Err(Error::InsufficientData("no innovation samples".into()));
    }
    let s = e_hat * e_hat.transpose() / n as f64;
    Ok(linalg::symmetrize(&s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonScore {
    pub past_horizon: usize,
    pub aic: f64,
    pub log_det_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSelection {
    pub chosen: usize,
    /// Number of regression targets shared by every candidate.
    pub samples: usize,
    pub scores: Vec<HorizonScore>,
}

/// Pick the past horizon minimizing
/// `AIC(L) = N·log det Λ̂(L) + 2·L·n_y·(n_u + n_y)`.
///
/// All candidates are scored on the same target samples (those after the
/// largest candidate), so the likelihood terms are comparable.
pub fn select_past_horizon(u: &Trajectory, y: &Trajectory, candidates: &[usize]) -> Result<HorizonSelection> {
    let l_max = *candidates
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidParameter("empty candidate list".into()))?;
    let n_u = u.channel_count();
    let n_y = y.channel_count();
    let samples = y.len().saturating_sub(l_max);

    let score = |l: usize| -> Result<HorizonScore> {
        let est = estimate_from(u, y, l, l_max)?;
        let det = est.lambda_hat.determinant();
        let log_det = det.max(f64::MIN_POSITIVE).ln();
        let params = 2.0 * (l * n_y * (n_u + n_y)) as f64;
        Ok(HorizonScore {
            past_horizon: l,
            aic: samples as f64 * log_det + params,
            log_det_lambda: log_det,
        })
    };

    #[cfg(feature = "parallel")]
    let scores: Vec<HorizonScore> = {
        use rayon::prelude::*;
        candidates.par_iter().map(|&l| score(l)).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let scores: Vec<HorizonScore> = candidates.iter().map(|&l| score(l)).collect::<Result<_>>()?;

    let chosen = scores
        .iter()
        .min_by(|a, b| a.aic.total_cmp(&b.aic))
        .map(|s| s.past_horizon)
        .expect("non-empty");
    Ok(HorizonSelection { chosen, samples, scores })
}
