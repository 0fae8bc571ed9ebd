//! Sampled multichannel signals and the block-Hankel machinery built on them.
//!
//! Samples are stored one column per time step with the channels of a step
//! contiguous, which is the layout every stacked window and Hankel block uses.
//! All time indices in this crate are zero-based.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    channel_names: Vec<String>,
    dt: Option<f64>,
    /// channels × length
    samples: DMatrix<f64>,
}

impl Trajectory {
    pub fn new(samples: DMatrix<f64>, channel_names: Vec<String>, dt: Option<f64>) -> Result<Self> {
        if samples.ncols() == 0 || samples.nrows() == 0 {
            return Err(Error::InsufficientData(
                "trajectory needs at least one channel and one sample".into(),
            ));
        }
        ensure_dims(channel_names.len() == samples.nrows(), || {
            format!(
                "{} channel names for {} channels",
                channel_names.len(),
                samples.nrows()
            )
        })?;
        if !linalg::all_finite(&samples) {
            return Err(Error::NonFinite("trajectory samples".into()));
        }
        if let Some(dt) = dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidParameter(format!("sample period {dt}")));
            }
        }
        Ok(Self { channel_names, dt, samples })
    }

    /// Trajectory with channels named `{prefix}{i}`.
    pub fn with_prefix(samples: DMatrix<f64>, prefix: &str, dt: Option<f64>) -> Result<Self> {
        let names = (0..samples.nrows()).map(|i| format!("{prefix}{i}")).collect();
        Self::new(samples, names, dt)
    }

    pub fn from_scalar(values: &[f64]) -> Result<Self> {
        Self::with_prefix(DMatrix::from_row_slice(1, values.len(), values), "x", None)
    }

    pub fn channel_count(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn dt(&self) -> Option<f64> {
        self.dt
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn sample(&self, k: usize) -> DVector<f64> {
        self.samples.column(k).into_owned()
    }

    /// Samples `start .. start + len`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.len() {
            return Err(Error::InsufficientData(format!(
                "slice {start}..{} of a length-{} trajectory",
                start + len,
                self.len()
            )));
        }
        Ok(Self {
            channel_names: self.channel_names.clone(),
            dt: self.dt,
            samples: self.samples.columns(start, len).into_owned(),
        })
    }

    /// Channel-wise concatenation of equal-length trajectories.
    pub fn stack(parts: &[&Trajectory]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("nothing to stack".into()))?;
        let len = first.len();
        for p in parts {
            ensure_dims(p.len() == len, || {
                format!("cannot stack lengths {} and {}", len, p.len())
            })?;
        }
        let blocks: Vec<&DMatrix<f64>> = parts.iter().map(|p| &p.samples).collect();
        let names = parts
            .iter()
            .flat_map(|p| p.channel_names.iter().cloned())
            .collect();
        Ok(Self {
            channel_names: names,
            dt: first.dt,
            samples: linalg::vstack(&blocks),
        })
    }

    /// Stacked samples `start .. start + count` as one column vector.
    pub fn stacked(&self, start: usize, count: usize) -> DVector<f64> {
        let n = self.channel_count();
        let block = self.samples.columns(start, count);
        DVector::from_iterator(n * count, block.iter().cloned())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    block_rows: usize,
    block_size: usize,
    data: DMatrix<f64>,
}

impl HankelMatrix {
    pub fn block_rows(&self) -> usize {
        self.block_rows
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn columns(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    /// Block (i, j), an n-vector.
    pub fn block(&self, i: usize, j: usize) -> DVector<f64> {
        self.data
            .view((i * self.block_size, j), (self.block_size, 1))
            .column(0)
            .into_owned()
    }

    /// Rows of block rows `start .. start + count`.
    pub fn block_row_range(&self, start: usize, count: usize) -> DMatrix<f64> {
        self.data
            .rows(start * self.block_size, count * self.block_size)
            .into_owned()
    }
}

/// Past/future horizon configuration shared by the model-building stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorizonSpec {
    pub t_p: usize,
    pub t_f: usize,
    pub n_x_bar: usize,
    pub n_u: usize,
    pub n_y: usize,
}

impl HorizonSpec {
    pub fn new(t_p: usize, t_f: usize, n_x_bar: usize, n_u: usize, n_y: usize) -> Result<Self> {
        let spec = Self { t_p, t_f, n_x_bar, n_u, n_y };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_p == 0 || self.t_f == 0 {
            return Err(Error::InvalidParameter("horizons must be at least 1".into()));
        }
        if self.n_x_bar == 0 {
            return Err(Error::InvalidParameter("state-order bound must be at least 1".into()));
        }
        if self.n_y == 0 {
            return Err(Error::InvalidParameter("at least one output channel required".into()));
        }
        if self.t_p * self.n_y < self.n_x_bar {
            return Err(Error::InvalidParameter(format!(
                "past horizon {} with {} outputs cannot resolve order {}",
                self.t_p, self.n_y, self.n_x_bar
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.t_p + self.t_f
    }
}

/// Block-Hankel matrix with `block_rows` block rows over samples `first ..= last`.
pub fn build_hankel(
    traj: &Trajectory,
    first: usize,
    last: usize,
    block_rows: usize,
) -> Result<HankelMatrix> {
    if block_rows == 0 {
        return Err(Error::InvalidParameter("Hankel needs at least one block row".into()));
    }
    if last >= traj.len() || last < first {
        return Err(Error::InsufficientData(format!(
            "sample window {first}..={last} outside a length-{} trajectory",
            traj.len()
        )));
    }
    let span = last - first + 1;
    if span < block_rows {
        return Err(Error::InsufficientData(format!(
            "window of {span} samples is too short for {block_rows} block rows"
        )));
    }
    let n = traj.channel_count();
    let m = span - block_rows + 1;
    let src = traj.samples();
    let mut data = DMatrix::zeros(block_rows * n, m);
    for j in 0..m {
        for i in 0..block_rows {
            data.view_mut((i * n, j), (n, 1))
                .copy_from(&src.column(first + i + j));
        }
    }
    Ok(HankelMatrix { block_rows, block_size: n, data })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistencyReport {
    pub persistently_exciting: bool,
    pub rank: usize,
    pub rows: usize,
    pub columns: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
}

/// Full-row-rank test of the order-`order` Hankel matrix of the whole record.
pub fn is_persistently_exciting(traj: &Trajectory, order: usize) -> Result<PersistencyReport> {
    let h = build_hankel(traj, 0, traj.len() - 1, order)?;
    let (rows, columns) = h.data().shape();
    let sv = h.data().clone().svd(false, false).singular_values;
    let rank = linalg::numerical_rank(&sv, rows, columns);
    Ok(PersistencyReport {
        persistently_exciting: rank == rows,
        rank,
        rows,
        columns,
        sigma_max: sv.max(),
        sigma_min: if rows <= columns { sv.min() } else { 0.0 },
    })
}

/// Past window of `t_p` samples ending at `t` and future window of `t_f`
/// samples starting at `t + 1`.
pub fn window(traj: &Trajectory, t: usize, spec: &HorizonSpec) -> Result<(DVector<f64>, DVector<f64>)> {
    if t + 1 < spec.t_p || t + spec.t_f >= traj.len() {
        return Err(Error::InsufficientData(format!(
            "time {t} leaves no room for past {} / future {} in a length-{} record",
            spec.t_p,
            spec.t_f,
            traj.len()
        )));
    }
    let past = traj.stacked(t + 1 - spec.t_p, spec.t_p);
    let future = traj.stacked(t + 1, spec.t_f);
    Ok((past, future))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn hankel_of_short_scalar_sequence() {
        let t = Trajectory::from_scalar(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let h = build_hankel(&t, 0, 3, 2).unwrap();
        assert_eq!(h.data(), &DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn hankel_column_count() {
        let t = Trajectory::from_scalar(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(build_hankel(&t, 0, 4, 3).unwrap().columns(), 3);
    }

    #[test]
    fn hankel_single_block_row_is_raw_samples() {
        let raw = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, -2.0, -3.0]);
        let t = Trajectory::with_prefix(raw.clone(), "c", None).unwrap();
        assert_eq!(build_hankel(&t, 0, 2, 1).unwrap().data(), &raw);
    }

    #[test]
    fn hankel_window_too_short() {
        let t = Trajectory::from_scalar(&[1.0, 2.0]).unwrap();
        assert!(matches!(build_hankel(&t, 0, 1, 3), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn persistency_of_gaussian_noise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let v: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
        let t = Trajectory::from_scalar(&v).unwrap();
        let rep = is_persistently_exciting(&t, 10).unwrap();
        assert!(rep.persistently_exciting);
        assert_eq!(rep.rank, 10);
    }

    #[test]
    fn constant_and_zero_signals_are_not_exciting() {
        let c = Trajectory::from_scalar(&[3.0; 20]).unwrap();
        let rep = is_persistently_exciting(&c, 2).unwrap();
        assert!(!rep.persistently_exciting);
        assert_eq!(rep.rank, 1);
        let z = Trajectory::from_scalar(&[0.0; 20]).unwrap();
        for order in 1..4 {
            assert!(!is_persistently_exciting(&z, order).unwrap().persistently_exciting);
        }
    }

    #[test]
    fn window_examples() {
        let t = Trajectory::from_scalar(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let spec = HorizonSpec::new(2, 2, 1, 0, 1).unwrap();
        let (p, f) = window(&t, 2, &spec).unwrap();
        assert_eq!(p.as_slice(), &[2.0, 3.0]);
        assert_eq!(f.as_slice(), &[4.0, 5.0]);

        let spec3 = HorizonSpec::new(3, 2, 1, 0, 1).unwrap();
        let (p, _) = window(&t, 2, &spec3).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 2.0, 3.0]);

        assert!(window(&t, 0, &spec).is_err());
        assert!(window(&t, 3, &spec).is_err());
    }

    #[test]
    fn horizon_spec_invariants() {
        assert!(HorizonSpec::new(0, 1, 1, 1, 1).is_err());
        assert!(HorizonSpec::new(2, 1, 0, 1, 1).is_err());
        assert!(HorizonSpec::new(2, 1, 3, 1, 1).is_err());
        assert!(HorizonSpec::new(2, 1, 2, 1, 1).is_ok());
    }

    #[test]
    fn trajectory_rejects_bad_input() {
        let nan = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(Trajectory::with_prefix(nan, "x", None).is_err());
        let m = DMatrix::zeros(2, 3);
        assert!(Trajectory::new(m, vec!["a".into()], None).is_err());
    }

    proptest! {
        #[test]
        fn hankel_structure_and_window_coherence(
            n in 1usize..3,
            len in 6usize..30,
            t_p in 1usize..4,
            seed in any::<u64>(),
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let raw = DMatrix::from_fn(n, len, |_, _| StandardNormal.sample(&mut rng));
            let traj = Trajectory::with_prefix(raw, "c", None).unwrap();
            let h = build_hankel(&traj, 1, len - 1, t_p).unwrap();
            prop_assert_eq!(h.columns(), len - 1 - 1 - t_p + 2);
            for i in 1..t_p {
                for j in 0..h.columns() - 1 {
                    prop_assert_eq!(h.block(i, j), h.block(i - 1, j + 1));
                }
            }
            let spec = HorizonSpec { t_p, t_f: 1, n_x_bar: 1, n_u: 0, n_y: n };
            for j in 0..h.columns() {
                prop_assert_eq!(h.data().column(j).into_owned(), traj.stacked(1 + j, t_p));
                let t = 1 + j + t_p - 1;
                if t + 1 < len {
                    let (past, _) = window(&traj, t, &spec).unwrap();
                    prop_assert_eq!(h.data().column(j).into_owned(), past);
                }
            }
        }
    }
}
