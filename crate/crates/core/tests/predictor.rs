mod common;

use common::gaussian;
use ddkf::linalg;
use ddkf::predictor::{predict, solve_tracking, InputBounds, PredictionMatrices, TrackingProblem};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn random_matrices(seed: u64) -> PredictionMatrices {
    let (n_u, n_y, t_f) = (2, 2, 5);
    PredictionMatrices {
        e_xu: gaussian(n_y * t_f, 3, seed),
        e_xy: gaussian(n_y * t_f, 2, seed + 1),
        e_uf: gaussian(n_y * t_f, n_u * t_f, seed + 2),
        n_u,
        n_y,
        t_f,
    }
}

#[test]
fn unconstrained_tracking_matches_stacked_least_squares() {
    for seed in 0..5 {
        let m = random_matrices(10 * seed);
        let x = DVector::from_column_slice(gaussian(5, 1, 10 * seed + 5).as_slice());
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let r = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.4]);
        let reference = DVector::from_column_slice(gaussian(10, 1, 10 * seed + 6).as_slice());
        let p = TrackingProblem { reference: reference.clone(), q: q.clone(), r: r.clone(), bounds: None };
        let sol = solve_tracking(&m, &x, &p).unwrap();

        let free = predict(&m, &x, &DVector::zeros(10)).unwrap();
        let qh = linalg::psd_sqrt(&linalg::block_diag_repeat(&q, 5)).unwrap().transpose();
        let rh = linalg::psd_sqrt(&linalg::block_diag_repeat(&r, 5)).unwrap().transpose();
        let lhs = linalg::vstack(&[&(&qh * &m.e_uf), &rh]);
        let target = DMatrix::from_column_slice(10, 1, (&qh * (&reference - &free)).as_slice());
        let rhs = linalg::vstack(&[&target, &DMatrix::zeros(10, 1)]);
        let (pinv, _) = linalg::pinv(&lhs);
        let oracle = pinv * rhs;
        assert!((&sol.u_f - oracle.column(0)).amax() < 1e-9, "seed {seed}");
    }
}

#[test]
fn bounded_tracking_satisfies_kkt_conditions() {
    let m = random_matrices(3);
    let x = DVector::from_element(5, 1.0);
    let p = TrackingProblem {
        reference: DVector::from_element(10, 4.0),
        q: DMatrix::identity(2, 2),
        r: DMatrix::identity(2, 2) * 0.05,
        bounds: Some(InputBounds { lower: vec![-0.5, -0.2], upper: vec![0.5, 0.3] }),
    };
    let sol = solve_tracking(&m, &x, &p).unwrap();
    let b = p.bounds.as_ref().unwrap();
    // gradient of the objective at the solution
    let free = predict(&m, &x, &DVector::zeros(10)).unwrap();
    let err = &free + &m.e_uf * &sol.u_f - &p.reference;
    let grad = m.e_uf.transpose() * &err * 2.0 + &sol.u_f * 0.1;
    let scale = grad.amax().max(1.0);
    for (i, (&u, &g)) in sol.u_f.iter().zip(grad.iter()).enumerate() {
        let (lo, hi) = (b.lower[i % 2], b.upper[i % 2]);
        assert!(u >= lo - 1e-12 && u <= hi + 1e-12);
        if u > lo + 1e-7 && u < hi - 1e-7 {
            assert!(g.abs() <= 1e-6 * scale, "interior coordinate {i} has gradient {g}");
        } else if u <= lo + 1e-7 {
            assert!(g >= -1e-6 * scale);
        } else {
            assert!(g <= 1e-6 * scale);
        }
    }
    // the unconstrained optimum is no worse
    let unconstrained = solve_tracking(&m, &x, &TrackingProblem { bounds: None, ..p.clone() }).unwrap();
    assert!(unconstrained.cost <= sol.cost + 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prediction_is_linear_in_state_and_input(seed in 0u64..10_000, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let m = random_matrices(seed);
        let x1 = DVector::from_column_slice(gaussian(5, 1, seed + 10).as_slice());
        let x2 = DVector::from_column_slice(gaussian(5, 1, seed + 11).as_slice());
        let u1 = DVector::from_column_slice(gaussian(10, 1, seed + 12).as_slice());
        let u2 = DVector::from_column_slice(gaussian(10, 1, seed + 13).as_slice());
        let lhs = predict(&m, &(&x1 * a + &x2 * b), &(&u1 * a + &u2 * b)).unwrap();
        let rhs = predict(&m, &x1, &u1).unwrap() * a + predict(&m, &x2, &u2).unwrap() * b;
        prop_assert!((&lhs - &rhs).amax() <= 1e-11 * lhs.amax().max(1.0));
    }
}
