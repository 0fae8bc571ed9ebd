//! Stationary Kalman prediction with correlated process and measurement noise.
//!
//! The filter works on models of the form
//!
//! ```text
//! x(t+1) = A x(t) + B_u u(t) + n₁(t)
//! y(t)   = C x(t) + D_u u(t) + n₂(t)
//! ```
//!
//! with `cov(n₁) = Λ1`, `cov(n₂) = Λ2`, `E[n₁ n₂ᵀ] = Λ12`. For the data-based
//! model both noises come from the same innovations: `n₁ = B_ep e`,
//! `n₂ = C_p B_ep e`, and `C = C_p A_p`, `D_u = C_p B_up`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ddss::DataStateSpace;
use crate::error::{ensure_dims, Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Covariance of the driving noise (innovations or measured disturbance).
    pub lambda: DMatrix<f64>,
    pub lambda1: DMatrix<f64>,
    pub lambda2: DMatrix<f64>,
    pub lambda12: DMatrix<f64>,
    /// Independent white measurement noise added to `n₂`, if any.
    pub sigma_v: Option<DMatrix<f64>>,
}

impl NoiseModel {
    /// Noise terms of the innovations-driven data model.
    pub fn innovations(ddss: &DataStateSpace, lambda: &DMatrix<f64>) -> Result<Self> {
        Self::driving(&ddss.b_ep, &ddss.d_e_eff, lambda, None)
    }

    /// `n₁ = B w`, `n₂ = D w + v` with `cov(w) = Σ_w`, `cov(v) = Σ_v`, w ⟂ v.
    pub fn driving(
        b_noise: &DMatrix<f64>,
        d_noise: &DMatrix<f64>,
        sigma_w: &DMatrix<f64>,
        sigma_v: Option<&DMatrix<f64>>,
    ) -> Result<Self> {
        let k = sigma_w.nrows();
        ensure_dims(sigma_w.is_square() && b_noise.ncols() == k && d_noise.ncols() == k, || {
            format!(
                "noise covariance {}×{} does not match input maps with {} and {} columns",
                sigma_w.nrows(),
                sigma_w.ncols(),
                b_noise.ncols(),
                d_noise.ncols()
            )
        })?;
        check_covariance(sigma_w, "driving-noise covariance")?;
        let lambda1 = linalg::symmetrize(&(b_noise * sigma_w * b_noise.transpose()));
        let mut lambda2 = linalg::symmetrize(&(d_noise * sigma_w * d_noise.transpose()));
        if let Some(sv) = sigma_v {
            ensure_dims(sv.shape() == lambda2.shape(), || "measurement-noise covariance shape".into())?;
            check_covariance(sv, "measurement-noise covariance")?;
            lambda2 += linalg::symmetrize(sv);
        }
        let lambda12 = b_noise * sigma_w * d_noise.transpose();
        Ok(Self {
            lambda: sigma_w.clone(),
            lambda1,
            lambda2,
            lambda12,
            sigma_v: sigma_v.cloned(),
        })
    }

    /// Joint covariance `[[Λ1, Λ12], [Λ12ᵀ, Λ2]]`.
    pub fn joint(&self) -> DMatrix<f64> {
        let top = linalg::hstack(&[&self.lambda1, &self.lambda12]);
        let bottom = linalg::hstack(&[&self.lambda12.transpose(), &self.lambda2]);
        linalg::vstack(&[&top, &bottom])
    }
}

fn check_covariance(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !linalg::all_finite(m) {
        return Err(Error::NonFinite(what.into()));
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-9 * scale {
        return Err(Error::InvalidParameter(format!("{what} is not symmetric")));
    }
    let tr = m.trace().abs();
    if linalg::min_sym_eigenvalue(m) < -1e-10 * tr.max(scale) {
        return Err(Error::InvalidParameter(format!("{what} is not positive semidefinite")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DareOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Fixed-point relaxation: `P ← P + α·(Ric(P) − P)`, `0 < α ≤ 1`.
    pub relaxation: f64,
}

impl Default for DareOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100_000, relaxation: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DareSolution {
    pub p: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub iterations: usize,
    /// ‖Ric(P) − P‖_F.
    pub residual: f64,
}

/// One application of the Riccati map together with the gain it implies.
pub fn riccati_step(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    lambda1: &DMatrix<f64>,
    lambda2: &DMatrix<f64>,
    lambda12: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let apct = a * p * c.transpose();
    let g = &apct + lambda12;
    let s = linalg::symmetrize(&(c * p * c.transpose() + lambda2));
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Singular("innovation covariance C·P·Cᵀ + Λ2".into()))?;
    // K = G S⁻¹  ⇔  S Kᵀ = Gᵀ
    let gain = chol.solve(&g.transpose()).transpose();
    let next = a * p * a.transpose() + lambda1 - &gain * g.transpose();
    Ok((linalg::symmetrize(&next), gain))
}

/// Stabilizing solution of
/// `P = A P Aᵀ + Λ1 − (A P Cᵀ + Λ12)(C P Cᵀ + Λ2)⁻¹(A P Cᵀ + Λ12)ᵀ`
/// and the gain `K = (A P Cᵀ + Λ12)(C P Cᵀ + Λ2)⁻¹`.
///
/// The fixed-point iteration starts from `P = 0`. When the noise leaves some
/// unstable mode of `A − Λ12 Λ2⁻¹ C` unexcited, that limit does not stabilize
/// `A − K C`; the iteration is then restarted from a positive definite `P`,
/// which converges to the stabilizing solution.
pub fn solve_dare_correlated(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    lambda1: &DMatrix<f64>,
    lambda2: &DMatrix<f64>,
    lambda12: &DMatrix<f64>,
    opts: &DareOptions,
) -> Result<DareSolution> {
    let n = a.nrows();
    let first = solve_dare_from(a, c, lambda1, lambda2, lambda12, &DMatrix::zeros(n, n), opts)?;
    if linalg::spectral_radius(&(a - &first.gain * c)) < 1.0 {
        return Ok(first);
    }
    let scale = lambda1.norm().max(lambda2.norm()).max(1.0);
    let mut second = solve_dare_from(a, c, lambda1, lambda2, lambda12, &(DMatrix::identity(n, n) * scale), opts)?;
    second.iterations += first.iterations;
    Ok(second)
}

/// Fixed-point iteration of the Riccati map from `p0`.
pub fn solve_dare_from(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    lambda1: &DMatrix<f64>,
    lambda2: &DMatrix<f64>,
    lambda12: &DMatrix<f64>,
    p0: &DMatrix<f64>,
    opts: &DareOptions,
) -> Result<DareSolution> {
    let n = a.nrows();
    let m = c.nrows();
    ensure_dims(
        a.is_square()
            && c.ncols() == n
            && lambda1.shape() == (n, n)
            && lambda2.shape() == (m, m)
            && lambda12.shape() == (n, m)
            && p0.shape() == (n, n),
        || "Riccati operand shapes are inconsistent".into(),
    )?;
    if !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) {
        return Err(Error::InvalidParameter(format!("relaxation {}", opts.relaxation)));
    }
    let floor = lambda1.norm().max(lambda2.norm()).max(f64::MIN_POSITIVE);
    let mut p = linalg::symmetrize(p0);
    for it in 1..=opts.max_iter {
        let (next, _) = riccati_step(a, c, lambda1, lambda2, lambda12, &p)?;
        let delta = &next - &p;
        let change = delta.norm();
        p += delta * opts.relaxation;
        if !linalg::all_finite(&p) {
            return Err(Error::NonFinite("Riccati iterate".into()));
        }
        if change <= opts.tol * p.norm().max(floor) {
            let (again, gain) = riccati_step(a, c, lambda1, lambda2, lambda12, &p)?;
            let residual = (&again - &p).norm();
            return Ok(DareSolution { p, gain, iterations: it, residual });
        }
    }
    let (again, _) = riccati_step(a, c, lambda1, lambda2, lambda12, &p)?;
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        residual: (&again - &p).norm(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDiagnostics {
    pub iterations: usize,
    pub riccati_residual: f64,
    pub p_norm: f64,
    pub closed_loop_radius: f64,
    /// The driving noise does not reach the outputs, so no correction is possible
    /// and the gain is zero.
    pub degenerate_noise: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanPredictor {
    pub a: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    /// Measurement map applied to the predicted state.
    pub c: DMatrix<f64>,
    pub d_u: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub noise: NoiseModel,
    pub diagnostics: FilterDiagnostics,
    x_hat: DVector<f64>,
    last_innovation: DVector<f64>,
}

/// Below this largest singular value the feed-through from the driving noise
/// to the outputs is treated as numerically absent.
const FEEDTHROUGH_FLOOR: f64 = 1e-8;

impl KalmanPredictor {
    /// Stationary predictor for `(A, B_u, C, D_u)` under `noise`.
    pub fn new(
        a: DMatrix<f64>,
        b_u: DMatrix<f64>,
        c: DMatrix<f64>,
        d_u: DMatrix<f64>,
        noise: NoiseModel,
        opts: &DareOptions,
    ) -> Result<Self> {
        let sol = solve_dare_correlated(&a, &c, &noise.lambda1, &noise.lambda2, &noise.lambda12, opts)?;
        Ok(Self::assemble(a, b_u, c, d_u, noise, sol.p, sol.gain, sol.iterations, sol.residual, false))
    }

    /// Zero-gain predictor (pure model propagation) for noise that never reaches
    /// the outputs.
    pub fn open_loop(a: DMatrix<f64>, b_u: DMatrix<f64>, c: DMatrix<f64>, d_u: DMatrix<f64>, noise: NoiseModel) -> Self {
        let n = a.nrows();
        let m = c.nrows();
        Self::assemble(a, b_u, c, d_u, noise, DMatrix::zeros(n, n), DMatrix::zeros(n, m), 0, 0.0, true)
    }

    /// Rebuild a predictor from stored matrices and diagnostics, with a zero state.
    #[allow(clippy::too_many_arguments)]
    pub fn restore(
        a: DMatrix<f64>,
        b_u: DMatrix<f64>,
        c: DMatrix<f64>,
        d_u: DMatrix<f64>,
        gain: DMatrix<f64>,
        p: DMatrix<f64>,
        noise: NoiseModel,
        diagnostics: FilterDiagnostics,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = c.nrows();
        ensure_dims(
            a.is_square()
                && b_u.nrows() == n
                && c.ncols() == n
                && d_u.shape() == (m, b_u.ncols())
                && gain.shape() == (n, m)
                && p.shape() == (n, n),
            || "inconsistent filter matrices".into(),
        )?;
        Ok(Self {
            a,
            b_u,
            c,
            d_u,
            gain,
            p,
            noise,
            diagnostics,
            x_hat: DVector::zeros(n),
            last_innovation: DVector::zeros(m),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        a: DMatrix<f64>,
        b_u: DMatrix<f64>,
        c: DMatrix<f64>,
        d_u: DMatrix<f64>,
        noise: NoiseModel,
        p: DMatrix<f64>,
        gain: DMatrix<f64>,
        iterations: usize,
        residual: f64,
        degenerate_noise: bool,
    ) -> Self {
        let closed = &a - &gain * &c;
        let n = a.nrows();
        let m = c.nrows();
        let p_norm = p.norm();
        Self {
            diagnostics: FilterDiagnostics {
                iterations,
                riccati_residual: residual,
                p_norm,
                closed_loop_radius: linalg::spectral_radius(&closed),
                degenerate_noise,
            },
            a,
            b_u,
            c,
            d_u,
            gain,
            p,
            noise,
            x_hat: DVector::zeros(n),
            last_innovation: DVector::zeros(m),
        }
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.x_hat
    }

    pub fn set_state(&mut self, x: DVector<f64>) -> Result<()> {
        ensure_dims(x.len() == self.x_hat.len(), || {
            format!("state of length {} for a {}-state filter", x.len(), self.x_hat.len())
        })?;
        self.x_hat = x;
        Ok(())
    }

    /// `y(t) − ŷ(t|t−1)` from the most recent [`step`](Self::step).
    pub fn last_innovation(&self) -> &DVector<f64> {
        &self.last_innovation
    }

    /// Predicted measurement for the current state and input.
    pub fn predict_output(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.c * &self.x_hat + &self.d_u * u
    }

    /// `x̂ ← A x̂ + B_u u + K (y − C x̂ − D_u u)`; returns the new predicted state.
    pub fn step(&mut self, u: &DVector<f64>, y: &DVector<f64>) -> Result<&DVector<f64>> {
        ensure_dims(u.len() == self.b_u.ncols() && y.len() == self.c.nrows(), || {
            format!("step with u of length {} and y of length {}", u.len(), y.len())
        })?;
        let innov = y - self.predict_output(u);
        self.x_hat = &self.a * &self.x_hat + &self.b_u * u + &self.gain * &innov;
        self.last_innovation = innov;
        Ok(&self.x_hat)
    }

    pub fn closed_loop(&self) -> DMatrix<f64> {
        &self.a - &self.gain * &self.c
    }
}

/// Stationary predictor for the innovations-driven data model with
/// innovations covariance `lambda`. The initial state is zero.
pub fn make_filter(ddss: &DataStateSpace, lambda: &DMatrix<f64>, opts: &DareOptions) -> Result<KalmanPredictor> {
    let noise = NoiseModel::innovations(ddss, lambda)?;
    filter_for_data_model(ddss, noise, opts)
}

/// Data-model filter for an arbitrary noise description (e.g. a measured
/// disturbance plus white measurement noise).
pub fn filter_for_data_model(ddss: &DataStateSpace, noise: NoiseModel, opts: &DareOptions) -> Result<KalmanPredictor> {
    let a = ddss.a_p.clone();
    let b_u = ddss.b_up.clone();
    let c = ddss.c_eff.clone();
    let d_u = ddss.d_u_eff.clone();
    let feedthrough = if ddss.d_e_eff.is_empty() {
        0.0
    } else {
        ddss.d_e_eff.clone().svd(false, false).singular_values.max()
    };
    if feedthrough <= FEEDTHROUGH_FLOOR && noise.sigma_v.is_none() {
        // noise-free data: the auxiliary channels never entered the model
        return Ok(KalmanPredictor::open_loop(a, b_u, c, d_u, noise));
    }
    KalmanPredictor::new(a, b_u, c, d_u, noise, opts)
}
