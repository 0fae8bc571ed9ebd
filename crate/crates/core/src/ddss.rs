//! Data-based state-space realization of a parsimonious SMM.
//!
//! The state `x_uy(t) = [x_u(t); x_y(t)]` holds the SMM coordinates of the past
//! window ending at `t`. Shifting the window by one sample gives
//!
//! ```text
//! x_uy(t) = A_p x_uy(t-1) + B_p ū(t),   y(t) = C_p x_uy(t)
//! ```
//!
//! and re-indexing `x⁺(t+1) = x_uy(t)` yields the innovations-driven model
//! with direct feed-through used by the Kalman predictor.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dims, Error, Result};
use crate::linalg;
use crate::smm::ParsimoniousSmm;
use crate::trajectory::Trajectory;

/// Block shift `S_n`, newest-slot selector `J_n` and last-block-row drop `Π`
/// for a stack of `t_p` blocks of size `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSelect {
    pub shift: DMatrix<f64>,
    pub select: DMatrix<f64>,
    pub drop_last: DMatrix<f64>,
}

pub fn shift_and_select(t_p: usize, n: usize) -> Result<ShiftSelect> {
    if t_p < 2 || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "shift/select needs at least 2 blocks of size ≥ 1 (got {t_p} × {n})"
        )));
    }
    let dim = t_p * n;
    let mut shift = DMatrix::zeros(dim, dim);
    for i in 0..dim - n {
        shift[(i, i + n)] = 1.0;
    }
    let mut select = DMatrix::zeros(dim, n);
    let mut drop_last = DMatrix::zeros(dim - n, dim);
    for k in 0..n {
        select[(dim - n + k, k)] = 1.0;
    }
    for i in 0..dim - n {
        drop_last[(i, i)] = 1.0;
    }
    Ok(ShiftSelect { shift, select, drop_last })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataStateSpace {
    pub a_p: DMatrix<f64>,
    /// Control-input columns of `B_p`.
    pub b_up: DMatrix<f64>,
    /// Auxiliary (innovations or disturbance) columns of `B_p`.
    pub b_ep: DMatrix<f64>,
    pub c_p: DMatrix<f64>,

    pub a_uu: DMatrix<f64>,
    pub a_yu: DMatrix<f64>,
    pub a_yy: DMatrix<f64>,
    pub b_uu: DMatrix<f64>,
    pub b_yu: DMatrix<f64>,
    pub c_yu: DMatrix<f64>,
    pub c_yy: DMatrix<f64>,

    /// Output maps of the re-indexed model: `C_p·A_p`, `C_p·B_up`, `C_p·B_ep`.
    pub c_eff: DMatrix<f64>,
    pub d_u_eff: DMatrix<f64>,
    pub d_e_eff: DMatrix<f64>,
}

impl DataStateSpace {
    pub fn state_dim(&self) -> usize {
        self.a_p.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b_up.ncols()
    }

    pub fn n_aux(&self) -> usize {
        self.b_ep.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.c_p.nrows()
    }

    /// `[B_up B_ep]`.
    pub fn b_p(&self) -> DMatrix<f64> {
        linalg::hstack(&[&self.b_up, &self.b_ep])
    }
}

pub fn build_ddss(smm: &ParsimoniousSmm) -> Result<DataStateSpace> {
    let h = &smm.horizon;
    let n_ubar = smm.n_ubar;
    let n_y = h.n_y;
    let su = shift_and_select(h.t_p, n_ubar)?;
    let sy = shift_and_select(h.t_p, n_y)?;

    let l_up_inv = linalg::left_inverse(&smm.l_up, "L_up")?;
    // ū_p(t) = L_up x_u(t) and ū_p(t) = S ū_p(t-1) + J ū(t)
    let a_uu = &l_up_inv * &su.shift * &smm.l_up;
    let b_uu = &l_up_inv * &su.select;

    let pi_lyp = &sy.drop_last * &smm.l_yp;
    let (phi, rank) = linalg::pinv(&pi_lyp);
    if rank < smm.n_x_bar() {
        return Err(Error::RankDeficient(format!(
            "Π·L_yp has rank {rank} < {}",
            smm.n_x_bar()
        )));
    }
    let phi_pi = &phi * &sy.drop_last;
    let a_yu = &phi_pi * (&sy.shift * &smm.l_yup - &smm.l_yup * &a_uu);
    let a_yy = &phi_pi * &sy.shift * &smm.l_yp;
    let b_yu = -(&phi_pi * &smm.l_yup * &b_uu);
    let c_yu = sy.select.transpose() * &smm.l_yup;
    let c_yy = sy.select.transpose() * &smm.l_yp;

    let ru = a_uu.nrows();
    let nx = a_yy.nrows();
    let n = ru + nx;
    let mut a_p = DMatrix::zeros(n, n);
    a_p.view_mut((0, 0), (ru, ru)).copy_from(&a_uu);
    a_p.view_mut((ru, 0), (nx, ru)).copy_from(&a_yu);
    a_p.view_mut((ru, ru), (nx, nx)).copy_from(&a_yy);
    let b_p = linalg::vstack(&[&b_uu, &b_yu]);
    let c_p = linalg::hstack(&[&c_yu, &c_yy]);
    let b_up = b_p.columns(0, h.n_u).into_owned();
    let b_ep = b_p.columns(h.n_u, n_ubar - h.n_u).into_owned();

    let c_eff = &c_p * &a_p;
    let d_u_eff = &c_p * &b_up;
    let d_e_eff = &c_p * &b_ep;
    if !linalg::all_finite(&a_p) || !linalg::all_finite(&b_p) {
        return Err(Error::NonFinite("data-based state-space matrices".into()));
    }
    Ok(DataStateSpace {
        a_p,
        b_up,
        b_ep,
        c_p,
        a_uu,
        a_yu,
        a_yy,
        b_uu,
        b_yu,
        c_yu,
        c_yy,
        c_eff,
        d_u_eff,
        d_e_eff,
    })
}

/// Run `x(t) = A_p x(t-1) + B_p ū(t)` over a record starting from the SMM
/// coordinates of the first past window; returns `C_p x(t)` for
/// `t = T_p-1 .. len-1` as an n_y × (len - T_p + 1) matrix.
pub fn replay(ddss: &DataStateSpace, smm: &ParsimoniousSmm, ubar: &Trajectory, y: &Trajectory) -> Result<DMatrix<f64>> {
    ensure_dims(ddss.state_dim() == smm.state_dim(), || {
        format!(
            "state dimension {} does not match the SMM's {}",
            ddss.state_dim(),
            smm.state_dim()
        )
    })?;
    ensure_dims(ubar.channel_count() == smm.n_ubar && y.channel_count() == ddss.n_y(), || {
        "record channels do not match the model".to_string()
    })?;
    ensure_dims(ubar.len() == y.len(), || "record lengths differ".to_string())?;
    let t_p = smm.horizon.t_p;
    if y.len() < t_p {
        return Err(Error::InsufficientData("record shorter than the past horizon".into()));
    }
    let (x_u, x_y) = smm.past_coordinates(&ubar.stacked(0, t_p), &y.stacked(0, t_p))?;
    let mut x = DVector::zeros(ddss.state_dim());
    x.rows_mut(0, x_u.len()).copy_from(&x_u);
    x.rows_mut(x_u.len(), x_y.len()).copy_from(&x_y);
    let b_p = ddss.b_p();
    let mut out = DMatrix::zeros(ddss.n_y(), y.len() - t_p + 1);
    out.set_column(0, &(&ddss.c_p * &x));
    for (col, t) in (t_p..y.len()).enumerate() {
        x = &ddss.a_p * &x + &b_p * ubar.samples().column(t);
        out.set_column(col + 1, &(&ddss.c_p * &x));
    }
    Ok(out)
}

/// Largest output deviation of [`replay`] from the recorded outputs, relative
/// to the largest recorded output magnitude.
pub fn replay_residual(ddss: &DataStateSpace, smm: &ParsimoniousSmm, ubar: &Trajectory, y: &Trajectory) -> Result<f64> {
    let pred = replay(ddss, smm, ubar, y)?;
    let t_p = smm.horizon.t_p;
    let actual = y.samples().columns(t_p - 1, pred.ncols());
    let scale = actual.amax();
    let err = (pred - actual).amax();
    Ok(if scale > 0.0 { err / scale } else { err })
}
