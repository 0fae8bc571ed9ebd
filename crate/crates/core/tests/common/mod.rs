#![allow(dead_code)]

use ddkf::Trajectory;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

pub fn traj(m: DMatrix<f64>, prefix: &str) -> Trajectory {
    Trajectory::with_prefix(m, prefix, None).unwrap()
}

/// Discrete LTI system `x⁺ = A x + B u + K e`, `y = C x + D u + e`.
#[derive(Debug, Clone)]
pub struct Lti {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl Lti {
    /// Random system with spectral radius `radius` and a stable predictor `A − K C`.
    pub fn random(n: usize, nu: usize, ny: usize, radius: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
        let scale = |m: DMatrix<f64>| {
            let rho = m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
            m * (radius / rho)
        };
        let a = scale(draw(n, n));
        let b = draw(n, nu);
        let c = draw(ny, n);
        let mut k = draw(n, ny);
        // shrink K until the predictor A − K C is stable
        // (bounded: for radius ≥ 0.9 the target is only reached in the limit K → 0)
        for _ in 0..60 {
            if (&a - &k * &c).complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max) < radius.max(0.9) {
                break;
            }
            k *= 0.5;
        }
        Self { a, b, k, c, d: DMatrix::zeros(ny, nu) }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Outputs (and states) for inputs `u` and innovations `e` from `x0`.
    pub fn run(&self, u: &DMatrix<f64>, e: &DMatrix<f64>, x0: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let len = u.ncols();
        let mut x = x0.clone();
        let mut y = DMatrix::zeros(self.c.nrows(), len);
        let mut xs = DMatrix::zeros(self.n(), len);
        for t in 0..len {
            xs.set_column(t, &x);
            let et = e.column(t);
            let yt = &self.c * &x + &self.d * u.column(t) + et;
            y.set_column(t, &yt);
            x = &self.a * &x + &self.b * u.column(t) + &self.k * et;
        }
        (y, xs)
    }
}
