//! Scratch calibration probe (not part of the library API).

use binid::harness::{monte_carlo, rate_fit, run_trajectory, timing_benchmark};
use binid::presets::*;
use std::time::Instant;

fn main() {
    // --- Probe 1: third-order scalar-gain, single run, horizon 2e5 ---
    let t0 = Instant::now();
    let spec = example1_rpfi_spec(1, 200_000, EXAMPLE1_BASE_SEED, 10_000).unwrap();
    println!("alpha1 = {}", example1_rpfi_alpha().unwrap());
    let inputs = spec.materialize_inputs().unwrap();
    for run in 0..6u64 {
        let traj = run_trajectory(&spec, &inputs, run, false).unwrap();
        let theta = [0.1, 0.5, 0.9];
        let inf_err = traj
            .final_estimate
            .iter()
            .zip(theta.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        println!(
            "p1 run {run}: inf_err={inf_err:.5} wall={:.2}s curve_head={:?}",
            traj.wall_time_s,
            &traj.error_sq[..4.min(traj.error_sq.len())]
        );
    }
    println!("p1 total {:.2}s", t0.elapsed().as_secs_f64());

    // --- Probe 2: rate fit R=300 horizon 1e5 ---
    let t0 = Instant::now();
    let spec = example1_rpfi_spec(300, 100_000, EXAMPLE1_BASE_SEED, 100).unwrap();
    let summary = monte_carlo(&spec, 0).unwrap();
    let fit = rate_fit(&summary.ks, &summary.mse, 1_000, 100_000).unwrap();
    let mut kmse_min = f64::INFINITY;
    let mut kmse_max = 0.0f64;
    for (&k, &m) in summary.ks.iter().zip(summary.mse.iter()) {
        if k >= 1_000 && k <= 100_000 {
            let km = k as f64 * m;
            kmse_min = kmse_min.min(km);
            kmse_max = kmse_max.max(km);
        }
    }
    println!(
        "p2: slope={:.4} intercept={:.3} kmse_ratio={:.3} (max={:.3} min={:.3}) elapsed={:.1}s",
        fit.slope,
        fit.intercept,
        kmse_max / kmse_min,
        kmse_max,
        kmse_min,
        t0.elapsed().as_secs_f64()
    );
    // early-curve diagnostics
    for (i, &k) in summary.ks.iter().enumerate() {
        if [100, 300, 1000, 3000, 10_000, 30_000, 100_000].contains(&k) {
            println!("  k={k} mse={} k*mse={}", summary.mse[i], k as f64 * summary.mse[i]);
        }
    }

    // --- Probe 3: first-order matrix-gain efficiency R=2000 ---
    let t0 = Instant::now();
    let spec = example2_impf_spec(2_000, 10_000, EXAMPLE2_BASE_SEED, 1_000);
    let summary = monte_carlo(&spec, 0).unwrap();
    for (i, &k) in summary.ks.iter().enumerate() {
        println!(
            "p3: k={k} mse={} cr={:?} eff={:?}",
            summary.mse[i], summary.cr_trace[i], summary.efficiency_ratio[i]
        );
    }
    println!("p3 elapsed={:.1}s", t0.elapsed().as_secs_f64());

    // --- Probe 4: third-order matrix-gain vs bound R=500 ---
    let t0 = Instant::now();
    let spec = example1_impf_spec(500, 10_000, EXAMPLE1_BASE_SEED, 500);
    let summary = monte_carlo(&spec, 0).unwrap();
    for (i, &k) in summary.ks.iter().enumerate() {
        if k >= 1_500 {
            let cr = summary.cr_trace[i].unwrap();
            println!(
                "p4: k={k} mse={} cr={} ratio={:.4}",
                summary.mse[i],
                cr,
                summary.mse[i] / cr
            );
        }
    }
    println!("p4 elapsed={:.1}s", t0.elapsed().as_secs_f64());

    // --- Probe 5: timing to MSE < 1e-4, matrix-gain vs baseline ---
    let t0 = Instant::now();
    let impf = example1_impf_spec(1, 400_000, EXAMPLE1_BASE_SEED, 1_000);
    let base = example1_baseline_spec(1, 400_000, EXAMPLE1_BASE_SEED, 1_000).unwrap();
    let rows = timing_benchmark(&[impf, base], 1e-4, 100, 3, 0).unwrap();
    for row in &rows {
        println!(
            "p5: {} steps={:?} avg={:?} times={:?} status={}",
            row.estimator, row.steps_to_threshold, row.average_time_s, row.repeat_times_s, row.status
        );
    }
    println!("p5 elapsed={:.1}s", t0.elapsed().as_secs_f64());

    // --- Probe 6: per-step scaling ---
    use binid::harness::{ScalingEstimator, measure_step_scaling, scaling_exponent};
    let t0 = Instant::now();
    for which in [ScalingEstimator::Rpfi, ScalingEstimator::Impf] {
        let steps = match which {
            ScalingEstimator::Rpfi => 200_000,
            ScalingEstimator::Impf => 60_000,
        };
        let m = measure_step_scaling(which, &SCALING_DIMS, steps, 5, 77).unwrap();
        let exp = scaling_exponent(&m.dims, &m.seconds_per_step);
        println!("p6: {} times={:?} exponent={:?}", m.estimator, m.seconds_per_step, exp);
    }
    println!("p6 elapsed={:.1}s", t0.elapsed().as_secs_f64());
}
