//! Model-based stationary Kalman predictor on the true plant, used as ground
//! truth for the innovations and as the best-case closed-loop baseline.

use nalgebra::{DMatrix, DVector};

use super::plant::DiscretePlant;
use crate::error::{ensure_dims, Result};
use crate::kalman::{DareOptions, KalmanPredictor, NoiseModel};
use crate::predictor::PredictionMatrices;

#[derive(Debug, Clone)]
pub struct OracleFilter {
    pub filter: KalmanPredictor,
}

/// Stationary predictor for `x(t+1) = A x + B_u u + B_w w`, `y = C x + D u + v`
/// with `w ~ N(0, Σ_w)`, `v ~ N(0, Σ_v)` independent.
pub fn oracle_kf(
    plant: &DiscretePlant,
    sigma_w: &DMatrix<f64>,
    sigma_v: &DMatrix<f64>,
    opts: &DareOptions,
) -> Result<OracleFilter> {
    ensure_dims(sigma_v.shape() == (plant.n_y(), plant.n_y()), || "Σ_v shape".into())?;
    let d_w = DMatrix::zeros(plant.n_y(), plant.n_w());
    let noise = NoiseModel::driving(&plant.b_w, &d_w, sigma_w, Some(sigma_v))?;
    let (a, b, c, d) = (plant.a.clone(), plant.b_u.clone(), plant.c.clone(), plant.d.clone());
    let filter = if noise.lambda1.amax() == 0.0 && noise.lambda2.amax() == 0.0 {
        KalmanPredictor::open_loop(a, b, c, d, noise)
    } else {
        KalmanPredictor::new(a, b, c, d, noise, opts)?
    };
    Ok(OracleFilter { filter })
}

impl OracleFilter {
    /// Innovations `y(t) − ŷ(t|t−1)` over a record, starting from a zero
    /// state estimate. Returns an n_y × len matrix.
    pub fn innovations(&self, u: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        ensure_dims(u.ncols() == y.ncols(), || "record lengths differ".into())?;
        let mut f = self.filter.clone();
        f.set_state(DVector::zeros(f.a.nrows()))?;
        let mut e = DMatrix::zeros(y.nrows(), y.ncols());
        for t in 0..y.ncols() {
            f.step(&u.column(t).into_owned(), &y.column(t).into_owned())?;
            e.set_column(t, f.last_innovation());
        }
        Ok(e)
    }

    /// `ŷ(t+k) = C A^k x̂ + Σ_j C A^{k-1-j} B_u u(t+j) + D u(t+k)` for
    /// `k = 0 .. t_f-1`, with the whole state in the `E_xu` slot.
    pub fn prediction_matrices(&self, t_f: usize) -> PredictionMatrices {
        let f = &self.filter;
        let (n_y, n_u, n) = (f.c.nrows(), f.b_u.ncols(), f.a.nrows());
        let mut obs = DMatrix::zeros(n_y * t_f, n);
        let mut markov = Vec::with_capacity(t_f);
        let mut ca = f.c.clone();
        for k in 0..t_f {
            obs.view_mut((k * n_y, 0), (n_y, n)).copy_from(&ca);
            markov.push(&ca * &f.b_u);
            ca = &ca * &f.a;
        }
        let mut e_uf = DMatrix::zeros(n_y * t_f, n_u * t_f);
        for k in 0..t_f {
            e_uf.view_mut((k * n_y, k * n_u), (n_y, n_u)).copy_from(&f.d_u);
            for j in 0..k {
                e_uf.view_mut((k * n_y, j * n_u), (n_y, n_u)).copy_from(&markov[k - 1 - j]);
            }
        }
        PredictionMatrices {
            e_xu: obs,
            e_xy: DMatrix::zeros(n_y * t_f, 0),
            e_uf,
            n_u,
            n_y,
            t_f,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::plant::{benchmark_plant, GustParams};
    use crate::benchmark::simulate::{simulate_with, simulate};
    use crate::predictor::predict;

    fn plant() -> DiscretePlant {
        benchmark_plant(&GustParams::standard(774.0), 0.1).unwrap()
    }

    #[test]
    fn huge_measurement_noise_switches_the_gain_off() {
        let p = plant();
        let o = oracle_kf(&p, &DMatrix::identity(2, 2), &(DMatrix::identity(2, 2) * 1e12), &DareOptions::default()).unwrap();
        assert!(o.filter.gain.amax() < 1e-6);
    }

    #[test]
    fn zero_noise_gives_open_loop_predictor() {
        let p = plant();
        let z = DMatrix::zeros(2, 2);
        let o = oracle_kf(&p, &z, &z, &DareOptions::default()).unwrap();
        assert!(o.filter.diagnostics.degenerate_noise);
        assert_eq!(o.filter.gain, DMatrix::zeros(7, 2));
    }

    #[test]
    fn prediction_matrices_match_noise_free_simulation() {
        let p = plant();
        let z = DMatrix::zeros(2, 2);
        let o = oracle_kf(&p, &z, &z, &DareOptions::default()).unwrap();
        let t_f = 6;
        let m = o.prediction_matrices(t_f);
        let x0 = DVector::from_fn(7, |i, _| (i as f64 * 0.7).sin());
        let u = DMatrix::from_fn(2, t_f, |i, j| ((i + 2 * j) as f64).cos());
        let rec = simulate_with(&p, &u, &DMatrix::zeros(2, t_f), &DMatrix::zeros(2, t_f), &x0).unwrap();
        let y_hat = predict(&m, &x0, &DVector::from_column_slice(u.as_slice())).unwrap();
        let y = DVector::from_column_slice(rec.y.samples().as_slice());
        assert!((y_hat - y).amax() < 1e-10);
    }

    #[test]
    fn innovations_are_at_least_as_large_as_the_measurement_noise() {
        let p = plant();
        let sv = DMatrix::identity(2, 2) * 0.0625;
        let o = oracle_kf(&p, &DMatrix::identity(2, 2), &sv, &DareOptions::default()).unwrap();
        let rec = simulate(&p, &DMatrix::identity(2, 2), &DMatrix::identity(2, 2), &sv, 5, 400).unwrap();
        let e = o.innovations(rec.u.samples(), rec.y.samples()).unwrap();
        assert_eq!(e.shape(), (2, 400));
        let f = &o.filter;
        let s = &f.c * &f.p * f.c.transpose() + &sv;
        let gap = crate::linalg::symmetrize(&(s - &sv));
        assert!(crate::linalg::min_sym_eigenvalue(&gap) >= -1e-12);
    }
}
