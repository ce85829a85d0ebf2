//! Cross-module oracle checks: each test rebuilds a quantity the library
//! maintains recursively from its defining formula and compares the two.

use binid::cramer_rao::spd_inverse;
use binid::estimators::{Estimator, Impf, PROBABILITY_CLAMP, cutoff};
use binid::noise::NoiseModel;
use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The matrix gain after `k` steps must equal the inverse of the
/// accumulated weighted information `P_0^{-1} + sum_j b_j phi_j phi_j'`,
/// where `b_j` is the squared-density-over-variance weight evaluated at
/// the pre-step prediction. The estimator maintains this inverse through
/// rank-one downdates; the oracle accumulates the information directly
/// and inverts once at the end.
#[test]
fn matrix_gain_equals_inverse_of_accumulated_information_at_step_50() {
    let dim = 3;
    let threshold = 0.4;
    let band = 5.0;
    let noise = NoiseModel::standard_gaussian();
    let initial = DVector::from_vec(vec![0.1, -0.2, 0.3]);
    let initial_p = DMatrix::from_row_slice(
        dim,
        dim,
        &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5],
    );

    let mut estimator =
        Impf::new(initial, initial_p.clone(), band, threshold, noise).unwrap();
    let mut info = spd_inverse(&initial_p).expect("initial gain is invertible");

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..50 {
        let phi = DVector::from_fn(dim, |_, _| rng.random_range(-1.5..1.5));
        let s = rng.random_range(0.0..1.0) < 0.5;

        // Weight from the state *before* the step, as the update defines it.
        let prediction = estimator.estimate().dot(&phi);
        let z = cutoff(prediction, band);
        let x = threshold - z;
        let switching = noise
            .cdf(x)
            .unwrap()
            .clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP);
        let density = noise.pdf(x).unwrap();
        let weight = density * density / (switching * (1.0 - switching));
        info.ger(weight, &phi, &phi, 1.0);

        estimator.step(&phi, s).unwrap();
    }

    let expected = spd_inverse(&info).expect("accumulated information is invertible");
    let actual = estimator.p_hat();
    let scale = expected.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut err = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            err = err.max((expected[(i, j)] - actual[(i, j)]).abs());
        }
    }
    assert!(
        err / scale <= 1e-8,
        "recursive gain drifted from the accumulated information: \
         relative error {:.3e}",
        err / scale
    );
}

/// Same identity on a scalar problem, where the oracle inverse is a plain
/// reciprocal and therefore free of linear-algebra error of its own.
#[test]
fn scalar_matrix_gain_equals_reciprocal_of_accumulated_information() {
    let threshold = -0.2;
    let band = 3.0;
    let noise = NoiseModel::gaussian(0.8).unwrap();
    let mut estimator = Impf::with_scaled_identity_gain(
        DVector::from_vec(vec![0.0]),
        4.0,
        band,
        threshold,
        noise,
    )
    .unwrap();
    let mut info = 1.0 / 4.0;

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let phi = DVector::from_vec(vec![rng.random_range(0.2..2.0)]);
        let s = rng.random_range(0.0..1.0) < 0.3;

        let z = cutoff(estimator.estimate()[0] * phi[0], band);
        let x = threshold - z;
        let switching = noise
            .cdf(x)
            .unwrap()
            .clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP);
        let density = noise.pdf(x).unwrap();
        info += density * density / (switching * (1.0 - switching)) * phi[0] * phi[0];

        estimator.step(&phi, s).unwrap();
    }

    let expected = 1.0 / info;
    let actual = estimator.p_hat()[(0, 0)];
    assert!(
        (expected - actual).abs() / expected.abs() <= 1e-10,
        "scalar gain {actual} vs accumulated reciprocal {expected}"
    );
}
