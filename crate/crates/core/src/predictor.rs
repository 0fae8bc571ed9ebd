//! Multi-step output prediction from the filtered SMM state, and a quadratic
//! tracking controller built on those predictions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::linalg;
use crate::smm::ParsimoniousSmm;

/// `ŷ_f = E_xu·x_u + E_xy·x_y + E_uf·u_f` with future innovations at their
/// zero mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrices {
    pub e_xu: DMatrix<f64>,
    pub e_xy: DMatrix<f64>,
    pub e_uf: DMatrix<f64>,
    pub n_u: usize,
    pub n_y: usize,
    pub t_f: usize,
}

impl PredictionMatrices {
    /// `[E_xu E_xy]`.
    pub fn e_x(&self) -> DMatrix<f64> {
        linalg::hstack(&[&self.e_xu, &self.e_xy])
    }

    pub fn state_dim(&self) -> usize {
        self.e_xu.ncols() + self.e_xy.ncols()
    }
}

pub fn build_prediction_matrices(smm: &ParsimoniousSmm) -> Result<PredictionMatrices> {
    let h = &smm.horizon;
    let l_uf_inv = linalg::left_inverse(&smm.l_uf, "L_uf")?;
    let w = &smm.l_yuf * &l_uf_inv;
    let e_xu = &smm.s_yu - &w * &smm.s_uu;
    let e_xy = &smm.s_yy - &w * &smm.s_uy;
    let u_cols: Vec<usize> = (0..h.t_f)
        .flat_map(|k| (0..h.n_u).map(move |c| k * smm.n_ubar + c))
        .collect();
    let e_uf = linalg::select_columns(&w, &u_cols);
    Ok(PredictionMatrices {
        e_xu,
        e_xy,
        e_uf,
        n_u: h.n_u,
        n_y: h.n_y,
        t_f: h.t_f,
    })
}

/// Stacked prediction of the next `T_f` outputs given the state and the
/// stacked future control inputs.
pub fn predict(m: &PredictionMatrices, x_uy: &DVector<f64>, u_f: &DVector<f64>) -> Result<DVector<f64>> {
    ensure_dims(x_uy.len() == m.state_dim() && u_f.len() == m.e_uf.ncols(), || {
        format!(
            "state of length {} / future input of length {} for prediction matrices {}×({} + {})",
            x_uy.len(),
            u_f.len(),
            m.e_uf.nrows(),
            m.state_dim(),
            m.e_uf.ncols()
        )
    })?;
    let ru = m.e_xu.ncols();
    Ok(&m.e_xu * x_uy.rows(0, ru) + &m.e_xy * x_uy.rows(ru, m.e_xy.ncols()) + &m.e_uf * u_f)
}

/// SMM state of a raw past window, with the past auxiliary channels set to
/// their zero mean. `u_p` holds only the control inputs.
pub fn unfiltered_state(smm: &ParsimoniousSmm, u_p: &DVector<f64>, y_p: &DVector<f64>) -> Result<DVector<f64>> {
    let h = &smm.horizon;
    ensure_dims(u_p.len() == h.n_u * h.t_p, || {
        format!("past input window of length {}", u_p.len())
    })?;
    let mut ubar_p = DVector::zeros(smm.n_ubar * h.t_p);
    for k in 0..h.t_p {
        ubar_p
            .rows_mut(k * smm.n_ubar, h.n_u)
            .copy_from(&u_p.rows(k * h.n_u, h.n_u));
    }
    let (x_u, x_y) = smm.past_coordinates(&ubar_p, y_p)?;
    let mut x = DVector::zeros(x_u.len() + x_y.len());
    x.rows_mut(0, x_u.len()).copy_from(&x_u);
    x.rows_mut(x_u.len(), x_y.len()).copy_from(&x_y);
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingProblem {
    /// Stacked reference for the next `T_f` outputs.
    pub reference: DVector<f64>,
    /// Per-step output weight (n_y × n_y, PSD).
    pub q: DMatrix<f64>,
    /// Per-step input weight (n_u × n_u, SPD).
    pub r: DMatrix<f64>,
    pub bounds: Option<InputBounds>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingSolution {
    pub u_f: DVector<f64>,
    pub cost: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

const KKT_TOL: f64 = 1e-8;
const MAX_PG_ITER: usize = 200_000;

/// Minimize `‖ŷ_f − r_f‖²_Q + ‖u_f‖²_R` over the stacked future inputs.
pub fn solve_tracking(m: &PredictionMatrices, x_uy: &DVector<f64>, problem: &TrackingProblem) -> Result<TrackingSolution> {
    let (n_u, n_y, t_f) = (m.n_u, m.n_y, m.t_f);
    ensure_dims(
        problem.reference.len() == n_y * t_f
            && problem.q.shape() == (n_y, n_y)
            && problem.r.shape() == (n_u, n_u),
        || "tracking problem dimensions do not match the prediction matrices".into(),
    )?;
    let free = predict(m, x_uy, &DVector::zeros(n_u * t_f))?;
    let q_bar = linalg::block_diag_repeat(&linalg::symmetrize(&problem.q), t_f);
    let r_bar = linalg::block_diag_repeat(&linalg::symmetrize(&problem.r), t_f);
    let eq = m.e_uf.transpose() * &q_bar;
    let hess = linalg::symmetrize(&(&eq * &m.e_uf + &r_bar));
    let grad_rhs = &eq * (&problem.reference - &free);
    let chol = hess
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("input weight R must be positive definite".into()))?;
    let unconstrained = chol.solve(&grad_rhs);

    let cost = |u: &DVector<f64>| {
        let err = &free + &m.e_uf * u - &problem.reference;
        (err.transpose() * &q_bar * &err)[(0, 0)] + (u.transpose() * &r_bar * u)[(0, 0)]
    };

    let Some(bounds) = &problem.bounds else {
        return Ok(TrackingSolution {
            cost: cost(&unconstrained),
            u_f: unconstrained,
            kkt_residual: 0.0,
            iterations: 0,
        });
    };
    ensure_dims(bounds.lower.len() == n_u && bounds.upper.len() == n_u, || {
        "input bounds need one entry per input channel".into()
    })?;
    if bounds.lower.iter().zip(&bounds.upper).any(|(lo, hi)| lo > hi) {
        return Err(Error::InvalidParameter("input bounds are not ordered".into()));
    }
    let lo = DVector::from_fn(n_u * t_f, |i, _| bounds.lower[i % n_u]);
    let hi = DVector::from_fn(n_u * t_f, |i, _| bounds.upper[i % n_u]);
    let project = |v: &DVector<f64>| v.zip_zip_map(&lo, &hi, |x, l, h| x.clamp(l, h));

    // accelerated projected gradient on ½uᵀHu − gᵀu
    let lip = hess.symmetric_eigenvalues().max();
    let step = 1.0 / lip;
    let kkt = |u: &DVector<f64>| {
        let g = &hess * u - &grad_rhs;
        (u - project(&(u - g))).amax()
    };
    let scale = grad_rhs.amax().max(1.0);
    let mut u = project(&unconstrained);
    let mut y = u.clone();
    let mut t = 1.0_f64;
    let mut it = 0;
    let mut res = kkt(&u);
    while res > KKT_TOL * scale && it < MAX_PG_ITER {
        let g = &hess * &y - &grad_rhs;
        let next = project(&(&y - g * step));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        // restart when the objective direction turns uphill
        if (&next - &u).dot(&(&hess * &next - &grad_rhs)) > 0.0 {
            t = 1.0;
            y = next.clone();
        } else {
            y = &next + (&next - &u) * momentum;
            t = t_next;
        }
        u = next;
        it += 1;
        res = kkt(&u);
    }
    if res > KKT_TOL * scale {
        return Err(Error::NotConverged { iterations: it, residual: res });
    }
    Ok(TrackingSolution { cost: cost(&u), u_f: u, kkt_residual: res, iterations: it })
}
