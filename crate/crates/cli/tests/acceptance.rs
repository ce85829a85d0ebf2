//! Acceptance gate: eight end-to-end checks of the library's statistical
//! and computational behavior, each printed as one pass/fail line.
//!
//! The checks run sequentially inside a single test so the report reads
//! as a block and the suite fails if any line fails.

use std::time::Instant;

use binid::cramer_rao::{fisher_info_sample, fisher_oracle_bruteforce, spd_inverse};
use binid::estimators::{
    Estimator, Impf, PROBABILITY_CLAMP, ProjectionBaseline, Rpfi, Schedule, cutoff,
};
use binid::harness::{
    ScalingEstimator, measure_step_scaling, monte_carlo, rate_fit, run_trajectory,
    scaling_exponent, timing_benchmark, write_results_csv,
};
use binid::noise::NoiseModel;
use binid::presets;
use binid::system::FirConfig;
use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type CheckResult = Result<String, String>;

/// Almost-sure convergence: one long scalar-gain run lands every
/// coefficient within 0.05 of the truth, in under five seconds.
fn criterion_1() -> CheckResult {
    let start = Instant::now();
    let horizon = 200_000;
    let spec =
        presets::example1_rpfi_spec(1, horizon, presets::EXAMPLE1_BASE_SEED, horizon)
            .map_err(|e| e.to_string())?;
    let inputs = spec.materialize_inputs().map_err(|e| e.to_string())?;
    let trajectory = run_trajectory(&spec, &inputs, 0, true).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();

    let estimate = trajectory.final_estimate;
    let sup_error = spec
        .system
        .theta
        .iter()
        .zip(estimate.iter())
        .map(|(t, e)| (t - e).abs())
        .fold(0.0f64, f64::max);
    let detail =
        format!("sup coefficient error {sup_error:.4} (limit 0.05) in {elapsed:.2}s (limit 5s)");
    if sup_error < 0.05 && elapsed < 5.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Mean-square 1/k rate: the error curve's log-log slope sits near -1 and
/// k*mse stays within a factor of 5 across the fit window.
fn criterion_2() -> CheckResult {
    let start = Instant::now();
    let spec = presets::example1_rpfi_spec(300, 100_000, presets::EXAMPLE1_BASE_SEED, 100)
        .map_err(|e| e.to_string())?;
    let summary = monte_carlo(&spec, 0).map_err(|e| e.to_string())?;
    let fit = rate_fit(&summary.ks, &summary.mse, 1_000, 100_000).map_err(|e| e.to_string())?;

    let kmse: Vec<f64> = summary
        .ks
        .iter()
        .zip(&summary.mse)
        .filter(|(k, _)| (1_000..=100_000).contains(*k))
        .map(|(k, m)| *k as f64 * m)
        .collect();
    let ratio = kmse.iter().fold(0.0f64, |a, &v| a.max(v))
        / kmse.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    let elapsed = start.elapsed().as_secs_f64();

    let detail = format!(
        "log-log slope {:.4} (window [-1.25, -0.80]), k*mse spread {ratio:.2} (limit 5) \
         over {} points in {elapsed:.1}s (limit 120s)",
        fit.slope, fit.points_used
    );
    if (-1.25..=-0.80).contains(&fit.slope) && ratio <= 5.0 && elapsed < 120.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Asymptotic efficiency: on the first-order system the matrix-gain
/// estimator's distance to the lower bound is small by k = 10^4 and
/// smaller than it was at k = 10^3.
fn criterion_3() -> CheckResult {
    let start = Instant::now();
    let spec = presets::example2_impf_spec(2_000, 10_000, presets::EXAMPLE2_BASE_SEED, 100);
    let summary = monte_carlo(&spec, 0).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();

    let ratio_at = |target: u64| -> Option<f64> {
        summary
            .ks
            .iter()
            .position(|&k| k == target)
            .and_then(|i| summary.efficiency_ratio[i])
    };
    let early = ratio_at(1_000).ok_or("no efficiency ratio recorded at k = 1000")?;
    let late = ratio_at(10_000).ok_or("no efficiency ratio recorded at k = 10000")?;

    let detail = format!(
        "|efficiency ratio| {:.4} at k=10^4 (limit 0.2) vs {:.4} at k=10^3, \
         in {elapsed:.1}s (limit 120s)",
        late.abs(),
        early.abs()
    );
    if late.abs() < 0.2 && late.abs() < early.abs() && elapsed < 120.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Efficiency on the third-order system: the empirical second moment
/// tracks the lower-bound trace within 20% at every recorded k >= 2000.
fn criterion_4() -> CheckResult {
    let start = Instant::now();
    let spec = presets::example1_impf_spec(500, 10_000, presets::EXAMPLE1_BASE_SEED, 100);
    let summary = monte_carlo(&spec, 0).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut points = 0;
    for ((k, mse), cr) in summary.ks.iter().zip(&summary.mse).zip(&summary.cr_trace) {
        if *k < 2_000 {
            continue;
        }
        let cr = cr.ok_or_else(|| format!("lower bound missing at k = {k}"))?;
        let ratio = mse / cr;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        points += 1;
    }
    let detail = format!(
        "moment/bound ratio in [{lo:.4}, {hi:.4}] (limits [0.8, 1.2]) over {points} \
         record points, in {elapsed:.1}s (limit 120s)"
    );
    if points > 0 && lo >= 0.8 && hi <= 1.2 && elapsed < 120.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Wall-clock ordering: the matrix-gain estimator reaches the 1e-4
/// mean-squared-error milestone in strictly less average time than the
/// projected baseline. When the baseline never crosses within the capped
/// horizon, its capped attempts are timed and serve as a lower bound on
/// its (unobserved) time to the milestone.
fn criterion_5() -> CheckResult {
    let cap = 200_000;
    let stride = 100;
    let seed = presets::EXAMPLE1_BASE_SEED;
    let specs = [
        presets::example1_impf_spec(1, cap, seed, stride),
        presets::example1_baseline_spec(1, cap, seed, stride).map_err(|e| e.to_string())?,
    ];
    let rows = timing_benchmark(&specs, 1e-4, 200, 3, 0).map_err(|e| e.to_string())?;
    let impf = &rows[0];
    let baseline = &rows[1];

    if impf.status != "ok" {
        return Err(format!(
            "matrix-gain estimator did not reach the milestone (status {})",
            impf.status
        ));
    }
    let impf_avg = impf.average_time_s.ok_or("matrix-gain row has no average time")?;
    let base_avg = baseline.average_time_s.ok_or("baseline row has no average time")?;
    let base_note = match baseline.status.as_str() {
        "ok" => format!(
            "baseline crossed after {} steps",
            baseline.steps_to_threshold.unwrap_or(0)
        ),
        _ => format!("baseline never crossed within {cap} steps; capped attempts timed"),
    };
    let detail = format!(
        "matrix gain {:.2}ms (crossed at {} steps) vs baseline >= {:.2}ms; {base_note}",
        impf_avg * 1e3,
        impf.steps_to_threshold.unwrap_or(0),
        base_avg * 1e3,
    );
    if impf_avg < base_avg {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Per-step cost growth: near-linear for the scalar-gain update,
/// near-quadratic for the matrix-gain update.
fn criterion_6() -> CheckResult {
    let mut parts = Vec::new();
    let mut ok = true;
    for (which, lo, hi) in [
        (ScalingEstimator::Rpfi, 0.7, 1.4),
        (ScalingEstimator::Impf, 1.6, 2.5),
    ] {
        let m = measure_step_scaling(which, &presets::SCALING_DIMS, 250_000, 5, 7)
            .map_err(|e| e.to_string())?;
        let p = scaling_exponent(&m.dims, &m.seconds_per_step).map_err(|e| e.to_string())?;
        ok &= (lo..=hi).contains(&p);
        parts.push(format!("{} exponent {p:.2} (window [{lo}, {hi}])", m.estimator));
    }
    let detail = parts.join("; ");
    if ok { Ok(detail) } else { Err(detail) }
}

/// Oracle suite, re-run in place: information closed form vs a
/// finite-difference referee, the matrix gain vs directly accumulated
/// information, distribution-function identities, and the bit-exact
/// reduction of the projected baseline to the unbanded scalar-gain update.
fn criterion_7() -> CheckResult {
    // (a) Closed-form information vs finite-difference referee.
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_info = 0.0f64;
    for trial in 0..100 {
        let dim = rng.random_range(1..=4usize);
        let sigma = [0.7, 1.0, 1.9][trial % 3];
        let noise = NoiseModel::gaussian(sigma).map_err(|e| e.to_string())?;
        let theta = DVector::from_fn(dim, |_, _| rng.random_range(-0.8..0.8));
        let config = FirConfig::new(theta, rng.random_range(-1.0..1.0), 2.0, 4.0)
            .map_err(|e| e.to_string())?;
        let phi = DVector::from_fn(dim, |_, _| rng.random_range(-1.5..1.5));

        let closed = fisher_info_sample(&config, &noise, &phi).map_err(|e| e.to_string())?;
        let brute =
            fisher_oracle_bruteforce(&config, &noise, &phi, 1e-5).map_err(|e| e.to_string())?;
        let scale = closed.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
        let err = (&closed - &brute).iter().fold(0.0f64, |a, &v| a.max(v.abs())) / scale;
        worst_info = worst_info.max(err);
        if err > 1e-6 {
            return Err(format!(
                "information trial {trial}: closed form vs referee disagree by {err:.2e}"
            ));
        }
    }

    // (b) Matrix gain vs directly accumulated information at step 50.
    let dim = 3;
    let threshold = 0.4;
    let band = 5.0;
    let noise = NoiseModel::standard_gaussian();
    let initial_p =
        DMatrix::from_row_slice(dim, dim, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5]);
    let mut impf = Impf::new(
        DVector::from_vec(vec![0.1, -0.2, 0.3]),
        initial_p.clone(),
        band,
        threshold,
        noise,
    )
    .map_err(|e| e.to_string())?;
    let mut info = spd_inverse(&initial_p).ok_or("initial gain not invertible")?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..50 {
        let phi = DVector::from_fn(dim, |_, _| rng.random_range(-1.5..1.5));
        let s = rng.random_range(0.0..1.0) < 0.5;
        let z = cutoff(impf.estimate().dot(&phi), band);
        let x = threshold - z;
        let p = noise
            .cdf(x)
            .map_err(|e| e.to_string())?
            .clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP);
        let f = noise.pdf(x).map_err(|e| e.to_string())?;
        info.ger(f * f / (p * (1.0 - p)), &phi, &phi, 1.0);
        impf.step(&phi, s).map_err(|e| e.to_string())?;
    }
    let expected = spd_inverse(&info).ok_or("accumulated information not invertible")?;
    let scale = expected.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let gain_err = (&expected - impf.p_hat())
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        / scale;
    if gain_err > 1e-8 {
        return Err(format!("matrix gain drifted {gain_err:.2e} from accumulated information"));
    }

    // (c) Distribution-function identities on a grid.
    let mut worst_sym = 0.0f64;
    let mut worst_deriv = 0.0f64;
    for &sigma in &[0.5, 1.0, 2.0] {
        let noise = NoiseModel::gaussian(sigma).map_err(|e| e.to_string())?;
        let mut x = -4.0;
        while x <= 4.0 {
            let sym = (noise.cdf(x).unwrap() + noise.cdf(-x).unwrap() - 1.0).abs();
            worst_sym = worst_sym.max(sym);
            let h = 1e-5;
            let fd = (noise.cdf(x + h).unwrap() - noise.cdf(x - h).unwrap()) / (2.0 * h);
            let pdf = noise.pdf(x).unwrap();
            let deriv = (fd - pdf).abs() / (1e-8 + pdf);
            worst_deriv = worst_deriv.max(deriv);
            if sym > 1e-14 || deriv > 1e-4 {
                return Err(format!(
                    "distribution identity failed at x = {x}, sigma = {sigma}: \
                     symmetry {sym:.2e}, derivative {deriv:.2e}"
                ));
            }
            x += 0.25;
        }
    }

    // (d) Projected baseline equals the unbanded scalar-gain update plus
    // projection, bit for bit, over 1000 random steps.
    let noise = NoiseModel::standard_gaussian();
    let alpha = 2.5;
    let radius = 1.3;
    let threshold = 0.4;
    let initial = DVector::from_vec(vec![0.2, -0.5, 0.1]);
    let mut reference = Rpfi::new(
        initial.clone(),
        Schedule::Constant(alpha),
        Schedule::Constant(1.0),
        f64::INFINITY,
        threshold,
        noise,
    )
    .map_err(|e| e.to_string())?;
    let mut baseline =
        ProjectionBaseline::new(initial, Schedule::Constant(alpha), radius, threshold, noise)
            .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for step in 0..1000 {
        let phi = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
        let s = rng.random_range(0.0..1.0) < 0.4;
        reference.step(&phi, s).map_err(|e| e.to_string())?;
        let norm = reference.estimate().norm();
        if norm > radius {
            let mut snapshot = reference.snapshot();
            let scale = radius / norm;
            for v in &mut snapshot.estimate {
                *v *= scale;
            }
            reference = Rpfi::restore(
                &snapshot,
                Schedule::Constant(alpha),
                Schedule::Constant(1.0),
                f64::INFINITY,
                threshold,
                noise,
            )
            .map_err(|e| e.to_string())?;
        }
        baseline.step(&phi, s).map_err(|e| e.to_string())?;
        if baseline.estimate() != reference.estimate() || baseline.r() != reference.r() {
            return Err(format!("projected baseline diverged from its reduction at step {step}"));
        }
    }

    Ok(format!(
        "information referee worst {worst_info:.1e} (limit 1e-6, 100 instances); \
         gain identity {gain_err:.1e} at k=50 (limit 1e-8); \
         distribution symmetry {worst_sym:.1e}, derivative {worst_deriv:.1e}; \
         baseline reduction exact over 1000 steps"
    ))
}

/// Determinism: worker counts must not change a single output byte, and
/// repeated CLI invocations must write identical result files.
fn criterion_8() -> CheckResult {
    let dir = TempDir::new().map_err(|e| e.to_string())?;

    // Library level: serial vs parallel Monte Carlo.
    let spec = presets::example2_impf_spec(12, 400, 9, 50);
    let serial = monte_carlo(&spec, 1).map_err(|e| e.to_string())?;
    let parallel = monte_carlo(&spec, 4).map_err(|e| e.to_string())?;
    let a = dir.path().join("serial.csv");
    let b = dir.path().join("parallel.csv");
    write_results_csv(&a, &serial).map_err(|e| e.to_string())?;
    write_results_csv(&b, &parallel).map_err(|e| e.to_string())?;
    let bytes_a = std::fs::read(&a).map_err(|e| e.to_string())?;
    let bytes_b = std::fs::read(&b).map_err(|e| e.to_string())?;
    if bytes_a != bytes_b {
        return Err("worker counts 1 and 4 produced different result bytes".into());
    }

    // Binary level: two invocations of the same configured experiment.
    let config_path = dir.path().join("config.toml");
    std::fs::write(
        &config_path,
        r#"
[system]
theta = [0.8, -0.4]
threshold = 0.5
theta_bar = 2.0
phi_bar = 3.0

[inputs]
mode = "iid_uniform"
lo = -2.0
hi = 2.0
dim = 2

[estimator]
kind = "rpfi"
alpha = 6.0
initial = [0.0, 0.0]

[experiment]
label = "determinism"
horizon = 400
runs = 6
base_seed = 21
record_stride = 50
"#,
    )
    .map_err(|e| e.to_string())?;
    let mut csvs = Vec::new();
    for sub in ["first", "second"] {
        let out_dir = dir.path().join(sub);
        let output = std::process::Command::new(env!("CARGO_BIN_EXE_binid"))
            .args([
                "simulate",
                "--config",
                config_path.to_str().unwrap(),
                "--out",
                out_dir.to_str().unwrap(),
                "--workers",
                "4",
            ])
            .output()
            .map_err(|e| e.to_string())?;
        if !output.status.success() {
            return Err(format!(
                "binary invocation failed: {}",
                String::from_utf8_lossy(&output.stderr)
            ));
        }
        csvs.push(
            std::fs::read(out_dir.join("determinism-results.csv")).map_err(|e| e.to_string())?,
        );
    }
    if csvs[0] != csvs[1] {
        return Err("repeated binary invocations produced different result bytes".into());
    }

    Ok("identical bytes across worker counts {1, 4} and across repeated binary invocations"
        .into())
}

#[test]
fn acceptance() {
    let checks: [(usize, fn() -> CheckResult); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
    ];
    let mut failures = Vec::new();
    for (number, check) in checks {
        match check() {
            Ok(detail) => println!("criterion {number} [PASS]: {detail}"),
            Err(detail) => {
                println!("criterion {number} [FAIL]: {detail}");
                failures.push(number);
            }
        }
    }
    assert!(failures.is_empty(), "acceptance criteria failed: {failures:?}");
}
