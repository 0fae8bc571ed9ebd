//! Signal Matrix Models: the stacked block-Hankel data model and its
//! parsimonious block-triangular reduction.
//!
//! The extended input `ū` stacks the control input with an auxiliary driving
//! signal (estimated innovations, or a measured disturbance). Windows are
//! ordered `[ū_p; y_p; ū_f; y_f]` in the reduced model and the coordinate
//! vector is `g = [x_u; x_y; z]`:
//!
//! ```text
//! ū_p = L_up  x_u
//! y_p = L_yup x_u + L_yp x_y
//! ū_f = S_uu  x_u + S_uy x_y + L_uf  z
//! y_f = S_yu  x_u + S_yy x_y + L_yuf z
//! ```
//!
//! With rank-deficient extended inputs (e.g. exactly zero innovations on
//! noise-free data) `L_up` and `L_uf` are lower-echelon with one column per
//! independent row instead of square.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::linalg::{self, lq_rank_revealing, project_out};
use crate::trajectory::{build_hankel, HorizonSpec, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct StackedSmm {
    pub h_up: DMatrix<f64>,
    pub h_uf: DMatrix<f64>,
    pub h_yp: DMatrix<f64>,
    pub h_yf: DMatrix<f64>,
    pub horizon: HorizonSpec,
    /// Channels of the extended input; the first `horizon.n_u` are control inputs.
    pub n_ubar: usize,
}

impl StackedSmm {
    pub fn columns(&self) -> usize {
        self.h_up.ncols()
    }

    /// Rows in the order `[ū_p; ū_f; y_p; y_f]`.
    pub fn stacked(&self) -> DMatrix<f64> {
        linalg::vstack(&[&self.h_up, &self.h_uf, &self.h_yp, &self.h_yf])
    }

    /// Rows in the reduced-model order `[ū_p; y_p; ū_f; y_f]`.
    pub fn reordered(&self) -> DMatrix<f64> {
        linalg::vstack(&[&self.h_up, &self.h_yp, &self.h_uf, &self.h_yf])
    }
}

/// Stacked model from control input `u`, auxiliary driving signal `aux`
/// (innovations estimate or measured disturbance) and measured output `y`.
pub fn build_stacked(u: &Trajectory, aux: &Trajectory, y: &Trajectory, spec: &HorizonSpec) -> Result<StackedSmm> {
    ensure_dims(aux.len() == u.len(), || {
        format!("auxiliary length {} differs from input length {}", aux.len(), u.len())
    })?;
    let ubar = Trajectory::stack(&[u, aux])?;
    build_stacked_extended(&ubar, y, spec)
}

/// Stacked model for an already-assembled extended input. `spec.n_u` leading
/// channels of `ubar` are the control inputs.
pub fn build_stacked_extended(ubar: &Trajectory, y: &Trajectory, spec: &HorizonSpec) -> Result<StackedSmm> {
    spec.validate()?;
    ensure_dims(ubar.len() == y.len(), || {
        format!("input length {} differs from output length {}", ubar.len(), y.len())
    })?;
    ensure_dims(y.channel_count() == spec.n_y, || {
        format!("{} output channels, horizon spec says {}", y.channel_count(), spec.n_y)
    })?;
    ensure_dims(ubar.channel_count() >= spec.n_u, || {
        format!("{} extended-input channels cannot hold {} inputs", ubar.channel_count(), spec.n_u)
    })?;
    let total = spec.total();
    if y.len() < total {
        return Err(Error::InsufficientData(format!(
            "{} samples for a window of {total}",
            y.len()
        )));
    }
    let last = y.len() - 1;
    let hu = build_hankel(ubar, 0, last, total)?;
    let hy = build_hankel(y, 0, last, total)?;
    Ok(StackedSmm {
        h_up: hu.block_row_range(0, spec.t_p),
        h_uf: hu.block_row_range(spec.t_p, spec.t_f),
        h_yp: hy.block_row_range(0, spec.t_p),
        h_yf: hy.block_row_range(spec.t_p, spec.t_f),
        horizon: *spec,
        n_ubar: ubar.channel_count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmmDiagnostics {
    pub columns: usize,
    pub rank_up: usize,
    pub rank_uf: usize,
    pub cond_l_up: f64,
    pub cond_l_uf: f64,
    /// Singular values of the output residual factor, descending.
    pub output_singular_values: Vec<f64>,
    /// Fraction of squared singular-value mass dropped by the order truncation.
    pub discarded_mass: f64,
    /// ‖X − G·Bᵀ‖_F / ‖X‖_F over the reordered training stack.
    pub reconstruction_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsimoniousSmm {
    pub l_up: DMatrix<f64>,
    pub l_yup: DMatrix<f64>,
    pub l_yp: DMatrix<f64>,
    pub s_uu: DMatrix<f64>,
    pub s_uy: DMatrix<f64>,
    pub l_uf: DMatrix<f64>,
    pub s_yu: DMatrix<f64>,
    pub s_yy: DMatrix<f64>,
    pub l_yuf: DMatrix<f64>,
    pub horizon: HorizonSpec,
    pub n_ubar: usize,
    pub diagnostics: SmmDiagnostics,
}

impl ParsimoniousSmm {
    pub fn n_x_bar(&self) -> usize {
        self.l_yp.ncols()
    }

    /// Dimension of `x_u`.
    pub fn rank_up(&self) -> usize {
        self.l_up.ncols()
    }

    /// Dimension of `z`.
    pub fn rank_uf(&self) -> usize {
        self.l_uf.ncols()
    }

    pub fn state_dim(&self) -> usize {
        self.rank_up() + self.n_x_bar()
    }

    pub fn window_len(&self) -> usize {
        let h = &self.horizon;
        (self.n_ubar + h.n_y) * h.total()
    }

    /// The full block matrix mapping `[x_u; x_y; z]` to `[ū_p; y_p; ū_f; y_f]`.
    pub fn block_matrix(&self) -> DMatrix<f64> {
        let (ru, nx, rf) = (self.rank_up(), self.n_x_bar(), self.rank_uf());
        let a = self.l_up.nrows();
        let b = self.l_yp.nrows();
        let c = self.l_uf.nrows();
        let d = self.l_yuf.nrows();
        let mut g = DMatrix::zeros(a + b + c + d, ru + nx + rf);
        g.view_mut((0, 0), (a, ru)).copy_from(&self.l_up);
        g.view_mut((a, 0), (b, ru)).copy_from(&self.l_yup);
        g.view_mut((a, ru), (b, nx)).copy_from(&self.l_yp);
        g.view_mut((a + b, 0), (c, ru)).copy_from(&self.s_uu);
        g.view_mut((a + b, ru), (c, nx)).copy_from(&self.s_uy);
        g.view_mut((a + b, ru + nx), (c, rf)).copy_from(&self.l_uf);
        g.view_mut((a + b + c, 0), (d, ru)).copy_from(&self.s_yu);
        g.view_mut((a + b + c, ru), (d, nx)).copy_from(&self.s_yy);
        g.view_mut((a + b + c, ru + nx), (d, rf)).copy_from(&self.l_yuf);
        g
    }

    /// Least-squares coordinates `(x_u, x_y)` of a past window.
    pub fn past_coordinates(&self, u_p: &DVector<f64>, y_p: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        ensure_dims(u_p.len() == self.l_up.nrows() && y_p.len() == self.l_yp.nrows(), || {
            format!(
                "past window sizes ({}, {}) do not match ({}, {})",
                u_p.len(),
                y_p.len(),
                self.l_up.nrows(),
                self.l_yp.nrows()
            )
        })?;
        let l_up_inv = linalg::left_inverse(&self.l_up, "L_up")?;
        let x_u = l_up_inv * u_p;
        let (l_yp_pinv, _) = linalg::pinv(&self.l_yp);
        let x_y = l_yp_pinv * (y_p - &self.l_yup * &x_u);
        Ok((x_u, x_y))
    }
}

/// Reduce a stacked model to parsimonious form, keeping `n_x_bar` output
/// directions.
pub fn reduce(stack: &StackedSmm, n_x_bar: usize) -> Result<ParsimoniousSmm> {
    let mut horizon = stack.horizon;
    horizon.n_x_bar = n_x_bar;
    horizon.validate()?;
    let m = stack.columns();
    let rows = stack.h_up.nrows() + stack.h_yp.nrows() + stack.h_uf.nrows() + stack.h_yf.nrows();
    if m < rows {
        return Err(Error::InsufficientData(format!(
            "{m} Hankel columns for {rows} stacked rows"
        )));
    }

    let past_u = lq_rank_revealing(&stack.h_up);
    if past_u.lower.ncols() == 0 {
        return Err(Error::RankDeficient("past extended input carries no excitation".into()));
    }
    let (yp_resid, l_yup) = project_out(&stack.h_yp, &past_u.basis);

    let yp_factor = lq_rank_revealing(&yp_resid);
    let r2 = yp_factor.lower.ncols();
    if r2 < n_x_bar {
        return Err(Error::RankDeficient(format!(
            "output residual factor has rank {r2} < requested order {n_x_bar}"
        )));
    }
    let svd = yp_factor.lower.clone().svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let tol = linalg::rank_threshold(yp_resid.nrows(), m, sv[0]);
    if sv[n_x_bar - 1] <= tol {
        return Err(Error::RankDeficient(format!(
            "requested order {n_x_bar} exceeds the numerical rank of the output residual factor"
        )));
    }
    let u_svd = svd.u.as_ref().expect("u requested");
    let vt_svd = svd.v_t.as_ref().expect("v_t requested");
    let b = yp_resid.nrows();
    let mut l_yp = DMatrix::zeros(b, n_x_bar);
    let mut w = DMatrix::zeros(r2, n_x_bar);
    for (col, &k) in order.iter().take(n_x_bar).enumerate() {
        l_yp.set_column(col, &(u_svd.column(k) * svd.singular_values[k]));
        w.set_column(col, &vt_svd.row(k).transpose());
    }
    let v_n = &yp_factor.basis * w;
    let total_mass: f64 = sv.iter().map(|s| s * s).sum();
    let kept_mass: f64 = sv.iter().take(n_x_bar).map(|s| s * s).sum();

    let past_basis = linalg::hstack(&[&past_u.basis, &v_n]);
    let ru = past_u.basis.ncols();
    let (uf_resid, uf_coef) = project_out(&stack.h_uf, &past_basis);
    let s_uu = uf_coef.columns(0, ru).into_owned();
    let s_uy = uf_coef.columns(ru, n_x_bar).into_owned();
    let future_u = lq_rank_revealing(&uf_resid);

    let full_basis = linalg::hstack(&[&past_basis, &future_u.basis]);
    let yf_coef = &stack.h_yf * &full_basis;
    let rf = future_u.basis.ncols();
    let s_yu = yf_coef.columns(0, ru).into_owned();
    let s_yy = yf_coef.columns(ru, n_x_bar).into_owned();
    let l_yuf = yf_coef.columns(ru + n_x_bar, rf).into_owned();

    let mut smm = ParsimoniousSmm {
        l_up: past_u.lower,
        l_yup,
        l_yp,
        s_uu,
        s_uy,
        l_uf: future_u.lower,
        s_yu,
        s_yy,
        l_yuf,
        horizon,
        n_ubar: stack.n_ubar,
        diagnostics: SmmDiagnostics {
            columns: m,
            rank_up: ru,
            rank_uf: rf,
            cond_l_up: 0.0,
            cond_l_uf: 0.0,
            output_singular_values: sv,
            discarded_mass: if total_mass > 0.0 { 1.0 - kept_mass / total_mass } else { 0.0 },
            reconstruction_residual: 0.0,
        },
    };
    let x = stack.reordered();
    let recon = smm.block_matrix() * full_basis.transpose();
    let xn = x.norm();
    smm.diagnostics.reconstruction_residual = if xn > 0.0 { (x - recon).norm() / xn } else { 0.0 };
    smm.diagnostics.cond_l_up = linalg::condition_number(&smm.l_up);
    smm.diagnostics.cond_l_uf = linalg::condition_number(&smm.l_uf);
    if !linalg::all_finite(&smm.block_matrix()) {
        return Err(Error::NonFinite("parsimonious model blocks".into()));
    }
    Ok(smm)
}

/// Relative distance from a window `[ū_p; y_p; ū_f; y_f]` to the column space
/// of the reduced model.
pub fn range_residual(smm: &ParsimoniousSmm, window: &DVector<f64>) -> Result<f64> {
    ensure_dims(window.len() == smm.window_len(), || {
        format!("window of length {} for a model window of {}", window.len(), smm.window_len())
    })?;
    let wn = window.norm();
    if wn == 0.0 {
        return Ok(0.0);
    }
    let g = smm.block_matrix();
    let (rows, cols) = g.shape();
    let svd = g.svd(true, false);
    let u = svd.u.expect("u requested");
    let smax = svd.singular_values.max();
    let tol = linalg::rank_threshold(rows, cols, smax);
    let mut resid = window.clone();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            let q = u.column(k);
            let c = q.dot(window);
            resid.axpy(-c, &q, 1.0);
        }
    }
    Ok(resid.norm() / wn)
}

/// Window `[ū_p; y_p; ū_f; y_f]` at time `t` (last past sample) of a record.
pub fn model_window(ubar: &Trajectory, y: &Trajectory, t: usize, spec: &HorizonSpec) -> Result<DVector<f64>> {
    let (up, uf) = crate::trajectory::window(ubar, t, spec)?;
    let (yp, yf) = crate::trajectory::window(y, t, spec)?;
    let mut out = DVector::zeros(up.len() + yp.len() + uf.len() + yf.len());
    let mut k = 0;
    for part in [&up, &yp, &uf, &yf] {
        out.rows_mut(k, part.len()).copy_from(part);
        k += part.len();
    }
    Ok(out)
}
