//! Longitudinal aircraft model, Dryden gust shaping filters and zero-order-hold
//! discretization.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::linalg;

/// `ẋ = A x + B_u u + B_w w`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousPlant {
    pub a: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    pub b_w: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
}

impl ContinuousPlant {
    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        ensure_dims(
            self.a.is_square()
                && self.b_u.nrows() == n
                && self.b_w.nrows() == n
                && self.c.ncols() == n
                && self.d.shape() == (self.c.nrows(), self.b_u.ncols())
                && self.state_labels.len() == n
                && self.input_labels.len() == self.b_u.ncols()
                && self.output_labels.len() == self.c.nrows(),
            || "plant matrices and labels are not conformable".into(),
        )
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
}

/// `x(t+1) = A x(t) + B_u u(t) + B_w w(t)`, `y(t) = C x(t) + D u(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePlant {
    pub a: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    pub b_w: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub dt: f64,
}

impl DiscretePlant {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b_u.ncols()
    }

    pub fn n_w(&self) -> usize {
        self.b_w.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }
}

/// Dryden turbulence parameters. Intensities and airspeed in ft/s, lengths in ft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GustParams {
    pub sigma_u_gust: f64,
    pub sigma_v_gust: f64,
    pub l_u: f64,
    pub l_v: f64,
    pub airspeed: f64,
}

impl GustParams {
    /// σ = 10 ft/s on both axes, `L_u` = 1750 ft, `L_v = L_u/2`.
    pub fn standard(airspeed: f64) -> Self {
        Self {
            sigma_u_gust: 10.0,
            sigma_v_gust: 10.0,
            l_u: 1750.0,
            l_v: 875.0,
            airspeed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.sigma_u_gust, self.sigma_v_gust, self.l_u, self.l_v, self.airspeed];
        if vals.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("gust parameters must be finite and positive".into()))
        }
    }

    /// Static gain of the horizontal gust filter.
    pub fn horizontal_gain(&self) -> f64 {
        self.sigma_u_gust * (2.0 * self.l_u / (self.airspeed * std::f64::consts::PI)).sqrt()
    }

    /// Static gain of the vertical gust filter.
    pub fn vertical_gain(&self) -> f64 {
        self.sigma_v_gust * (2.0 * self.l_v / (self.airspeed * std::f64::consts::PI)).sqrt()
    }
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Linearized longitudinal dynamics of a Boeing 747. Inputs: throttle and
/// elevator; outputs: longitudinal velocity and climb rate. The gust inputs
/// enter the two velocity states with negative sign.
pub fn b747_continuous() -> ContinuousPlant {
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        -0.003,  0.039,  0.0,   -0.322,
        -0.065, -0.319,  7.74,   0.0,
         0.02,  -0.101, -0.429,  0.0,
         0.0,    0.0,    1.0,    0.0,
    ]);
    #[rustfmt::skip]
    let b_u = DMatrix::from_row_slice(4, 2, &[
         0.010,  1.0,
        -0.18,  -0.04,
        -1.16,   0.598,
         0.0,    0.0,
    ]);
    #[rustfmt::skip]
    let b_w = DMatrix::from_row_slice(4, 2, &[
        -1.0,  0.0,
         0.0, -1.0,
         0.0,  0.0,
         0.0,  0.0,
    ]);
    #[rustfmt::skip]
    let c = DMatrix::from_row_slice(2, 4, &[
        1.0,  0.0, 0.0, 0.0,
        0.0, -1.0, 0.0, 7.74,
    ]);
    ContinuousPlant {
        a,
        b_u,
        b_w,
        c,
        d: DMatrix::zeros(2, 2),
        state_labels: labels(&["longitudinal velocity", "downward velocity", "pitch rate", "pitch angle"]),
        input_labels: labels(&["throttle", "elevator"]),
        output_labels: labels(&["longitudinal velocity", "climb rate"]),
    }
}

/// Append the Dryden shaping filters so that the plant is driven by two white
/// inputs. The horizontal gust is a first-order low-pass, the vertical gust a
/// second-order filter with a double pole, realized in controllable canonical
/// form. The plant's `B_w` must have two columns (horizontal, vertical).
pub fn dryden_augment(plant: &ContinuousPlant, gust: &GustParams) -> Result<ContinuousPlant> {
    plant.validate()?;
    gust.validate()?;
    ensure_dims(plant.b_w.ncols() == 2, || {
        format!("gust augmentation needs 2 disturbance channels, plant has {}", plant.b_w.ncols())
    })?;
    let n = plant.state_dim();
    let v = gust.airspeed;
    let p_h = v / gust.l_u;
    let b = 2.0 * gust.l_v / v;
    let lead = 2.0 * 3f64.sqrt() * gust.l_v / v;
    let p_v = 1.0 / b;
    let k_v = gust.vertical_gain() / (b * b);

    // filter states: x_h, then (x_v1, x_v2) with ẋ_v1 = x_v2
    let mut af = DMatrix::zeros(3, 3);
    af[(0, 0)] = -p_h;
    af[(1, 2)] = 1.0;
    af[(2, 1)] = -p_v * p_v;
    af[(2, 2)] = -2.0 * p_v;
    let mut bf = DMatrix::zeros(3, 2);
    bf[(0, 0)] = p_h * gust.horizontal_gain();
    bf[(2, 1)] = 1.0;
    let mut cf = DMatrix::zeros(2, 3);
    cf[(0, 0)] = 1.0;
    cf[(1, 1)] = k_v;
    cf[(1, 2)] = k_v * lead;

    let na = n + 3;
    let mut a = DMatrix::zeros(na, na);
    a.view_mut((0, 0), (n, n)).copy_from(&plant.a);
    a.view_mut((0, n), (n, 3)).copy_from(&(&plant.b_w * &cf));
    a.view_mut((n, n), (3, 3)).copy_from(&af);
    let mut b_u = DMatrix::zeros(na, plant.b_u.ncols());
    b_u.view_mut((0, 0), (n, plant.b_u.ncols())).copy_from(&plant.b_u);
    let mut b_w = DMatrix::zeros(na, 2);
    b_w.view_mut((n, 0), (3, 2)).copy_from(&bf);
    let c = linalg::hstack(&[&plant.c, &DMatrix::zeros(plant.c.nrows(), 3)]);
    let mut state_labels = plant.state_labels.clone();
    state_labels.extend(labels(&["horizontal gust", "vertical gust filter 1", "vertical gust filter 2"]));
    Ok(ContinuousPlant {
        a,
        b_u,
        b_w,
        c,
        d: plant.d.clone(),
        state_labels,
        input_labels: plant.input_labels.clone(),
        output_labels: plant.output_labels.clone(),
    })
}

/// Exact sampled-data equivalent under piecewise-constant inputs (both the
/// control and the disturbance input are held over each period).
pub fn zoh_discretize(plant: &ContinuousPlant, dt: f64) -> Result<DiscretePlant> {
    plant.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("sample period must be positive, got {dt}")));
    }
    let n = plant.state_dim();
    let nu = plant.b_u.ncols();
    let nw = plant.b_w.ncols();
    let m = nu + nw;
    let mut block = DMatrix::zeros(n + m, n + m);
    block.view_mut((0, 0), (n, n)).copy_from(&plant.a);
    block.view_mut((0, n), (n, nu)).copy_from(&plant.b_u);
    block.view_mut((0, n + nu), (n, nw)).copy_from(&plant.b_w);
    let phi = (block * dt).exp();
    if !linalg::all_finite(&phi) {
        return Err(Error::NonFinite("matrix exponential".into()));
    }
    Ok(DiscretePlant {
        a: phi.view((0, 0), (n, n)).into_owned(),
        b_u: phi.view((0, n), (n, nu)).into_owned(),
        b_w: phi.view((0, n + nu), (n, nw)).into_owned(),
        c: plant.c.clone(),
        d: plant.d.clone(),
        dt,
    })
}

/// The benchmark plant: aircraft plus gust filters, sampled at `dt`.
pub fn benchmark_plant(gust: &GustParams, dt: f64) -> Result<DiscretePlant> {
    zoh_discretize(&dryden_augment(&b747_continuous(), gust)?, dt)
}
