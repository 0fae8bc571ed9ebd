//! Seeded stochastic simulation of a discrete plant.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::plant::DiscretePlant;
use crate::error::{ensure_dims, Result};
use crate::linalg;
use crate::trajectory::Trajectory;

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    IdentificationInput = 1,
    IdentificationDisturbance = 2,
    IdentificationNoise = 3,
    LoopDisturbance = 4,
    LoopNoise = 5,
}

/// Zero-mean Gaussian vectors with a given covariance.
#[derive(Debug, Clone)]
pub struct GaussianSource {
    rng: ChaCha20Rng,
    factor: DMatrix<f64>,
}

impl GaussianSource {
    pub fn new(seed: u64, stream: Stream, covariance: &DMatrix<f64>) -> Result<Self> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        Ok(Self {
            rng,
            factor: linalg::psd_sqrt(covariance)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample(&mut self) -> DVector<f64> {
        let z = DVector::from_fn(self.factor.ncols(), |_, _| StandardNormal.sample(&mut self.rng));
        &self.factor * z
    }

    /// `dim × len` matrix of consecutive samples.
    pub fn samples(&mut self, len: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim(), len);
        for t in 0..len {
            out.set_column(t, &self.sample());
        }
        out
    }
}

/// Plant state advanced one sample at a time.
#[derive(Debug, Clone)]
pub struct PlantState<'a> {
    plant: &'a DiscretePlant,
    x: DVector<f64>,
}

impl<'a> PlantState<'a> {
    pub fn new(plant: &'a DiscretePlant, x0: DVector<f64>) -> Result<Self> {
        ensure_dims(x0.len() == plant.state_dim(), || "initial state length".into())?;
        Ok(Self { plant, x: x0 })
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    /// Noise-free output `C x + D u`.
    pub fn clean_output(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.plant.c * &self.x + &self.plant.d * u
    }

    pub fn advance(&mut self, u: &DVector<f64>, w: &DVector<f64>) {
        self.x = &self.plant.a * &self.x + &self.plant.b_u * u + &self.plant.b_w * w;
    }
}

/// Everything produced by an open-loop simulation.
#[derive(Debug, Clone)]
pub struct SimulationRecord {
    pub u: Trajectory,
    pub w: Trajectory,
    pub v: Trajectory,
    /// Measured output `C x + D u + v`.
    pub y: Trajectory,
    pub y_clean: Trajectory,
    /// `x(t)` for every sample.
    pub x: DMatrix<f64>,
}

impl SimulationRecord {
    /// Drop the first `start` samples.
    pub fn tail(&self, start: usize) -> Result<Self> {
        let len = self.y.len() - start.min(self.y.len());
        Ok(Self {
            u: self.u.slice(start, len)?,
            w: self.w.slice(start, len)?,
            v: self.v.slice(start, len)?,
            y: self.y.slice(start, len)?,
            y_clean: self.y_clean.slice(start, len)?,
            x: self.x.columns(start, len).into_owned(),
        })
    }
}

/// Forward simulation with given input, disturbance and measurement-noise
/// sequences (channels × samples) from `x0`.
pub fn simulate_with(
    plant: &DiscretePlant,
    u: &DMatrix<f64>,
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    x0: &DVector<f64>,
) -> Result<SimulationRecord> {
    let len = u.ncols();
    ensure_dims(
        u.nrows() == plant.n_u()
            && w.shape() == (plant.n_w(), len)
            && v.shape() == (plant.n_y(), len),
        || "simulation sequences do not match the plant".into(),
    )?;
    let mut state = PlantState::new(plant, x0.clone())?;
    let mut x = DMatrix::zeros(plant.state_dim(), len);
    let mut y_clean = DMatrix::zeros(plant.n_y(), len);
    for t in 0..len {
        let ut = u.column(t).into_owned();
        x.set_column(t, state.state());
        y_clean.set_column(t, &state.clean_output(&ut));
        state.advance(&ut, &w.column(t).into_owned());
    }
    let y = &y_clean + v;
    let dt = Some(plant.dt);
    Ok(SimulationRecord {
        u: Trajectory::with_prefix(u.clone(), "u", dt)?,
        w: Trajectory::with_prefix(w.clone(), "w", dt)?,
        v: Trajectory::with_prefix(v.clone(), "v", dt)?,
        y: Trajectory::with_prefix(y, "y", dt)?,
        y_clean: Trajectory::with_prefix(y_clean, "y", dt)?,
        x,
    })
}

/// Identification experiment: seeded Gaussian input with covariance
/// `sigma_u`, disturbance `w ~ N(0, Σ_w)`, measurement noise `v ~ N(0, Σ_v)`,
/// starting from rest.
pub fn simulate(
    plant: &DiscretePlant,
    sigma_u: &DMatrix<f64>,
    sigma_w: &DMatrix<f64>,
    sigma_v: &DMatrix<f64>,
    seed: u64,
    len: usize,
) -> Result<SimulationRecord> {
    ensure_dims(
        sigma_u.nrows() == plant.n_u() && sigma_w.nrows() == plant.n_w() && sigma_v.nrows() == plant.n_y(),
        || "covariance sizes do not match the plant".into(),
    )?;
    let u = GaussianSource::new(seed, Stream::IdentificationInput, sigma_u)?.samples(len);
    let w = GaussianSource::new(seed, Stream::IdentificationDisturbance, sigma_w)?.samples(len);
    let v = GaussianSource::new(seed, Stream::IdentificationNoise, sigma_v)?.samples(len);
    simulate_with(plant, &u, &w, &v, &DVector::zeros(plant.state_dim()))
}
