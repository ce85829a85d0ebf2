//! Experiment harness: reproducible trajectory simulation, parallel
//! Monte-Carlo aggregation, convergence-rate fitting, wall-clock and
//! per-step-cost benchmarks, and the CSV / JSONL writers used by the
//! command-line tool.
//!
//! # Reproducibility contract
//!
//! Every random draw in an experiment descends from a single `base_seed`
//! through [`derive_seed`], which is injective in the stream index.  The
//! regressor sequence is drawn once per experiment (stream index
//! [`INPUT_STREAM_INDEX`]) and shared by all Monte-Carlo runs, so runs
//! differ only through their noise streams (stream index = run index).
//! Runs are simulated in parallel but collected in run order and reduced
//! sequentially with compensated summation, so every statistic — and every
//! byte of the result CSVs — is identical for any worker count.  Wall-clock
//! fields are the single documented exception.

use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cramer_rao::cr_bound_sequence;
use crate::error::{Error, Result};
use crate::estimators::{Estimator, Impf, ProjectionBaseline, Rpfi, Schedule};
use crate::noise::NoiseModel;
use crate::system::{FirConfig, InputGenerator, observe};

/// Stream index reserved for the shared regressor realization.
pub const INPUT_STREAM_INDEX: u64 = u64::MAX;

/// First stream index used by timing repetitions, far above any plausible
/// Monte-Carlo run count so timing noise streams never collide with
/// experiment runs.
pub const TIMING_RUN_INDEX_BASE: u64 = 1 << 48;

/// Derives the seed for one random stream of an experiment.
///
/// The map is `index -> splitmix64_mix(base + (index + 1) * GOLDEN)` where
/// `GOLDEN` is odd.  Every stage (increment, multiplication by an odd
/// constant, addition of the base, and the SplitMix64 finalizer) is a
/// bijection on 64-bit words, so for a fixed base no two stream indices can
/// ever share a seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Experiment description
// ---------------------------------------------------------------------------

/// Plain-data description of the system under identification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    /// True parameter vector.
    pub theta: Vec<f64>,
    /// Sensor threshold.
    pub threshold: f64,
    /// Known bound on the parameter norm.
    pub theta_bar: f64,
    /// Known bound on the regressor norm.
    pub phi_bar: f64,
}

impl SystemSpec {
    /// Validates the description and builds the system configuration.
    pub fn build(&self) -> Result<FirConfig> {
        FirConfig::new(
            DVector::from_vec(self.theta.clone()),
            self.threshold,
            self.theta_bar,
            self.phi_bar,
        )
    }
}

/// Plain-data description of the regressor source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InputSpec {
    /// Cycle deterministically through the given vectors.
    Periodic {
        /// Vectors visited in order, then repeated.
        vectors: Vec<Vec<f64>>,
    },
    /// Independent draws with each component uniform on the open
    /// interval `(lo, hi)`.
    IidUniform {
        /// Lower endpoint (excluded).
        lo: f64,
        /// Upper endpoint (excluded).
        hi: f64,
        /// Regressor dimension.
        dim: usize,
    },
    /// A finite, explicitly listed sequence.
    Explicit {
        /// The full regressor sequence.
        vectors: Vec<Vec<f64>>,
    },
}

impl InputSpec {
    /// Validates the description against the regressor bound and builds
    /// the generator.
    pub fn build(&self, phi_bar: f64) -> Result<InputGenerator> {
        match self {
            InputSpec::Periodic { vectors } => {
                let vecs = vectors.iter().map(|v| DVector::from_vec(v.clone())).collect();
                InputGenerator::periodic(vecs, phi_bar)
            }
            InputSpec::IidUniform { lo, hi, dim } => {
                InputGenerator::iid_uniform(*lo, *hi, *dim, phi_bar)
            }
            InputSpec::Explicit { vectors } => {
                let vecs = vectors.iter().map(|v| DVector::from_vec(v.clone())).collect();
                InputGenerator::explicit(vecs, phi_bar)
            }
        }
    }
}

fn default_initial_r() -> f64 {
    1.0
}

/// Plain-data description of the estimator to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    /// Scalar-gain estimator with cut-off and acceleration.
    Rpfi {
        /// Constant step scale.
        alpha: f64,
        /// Constant gain-denominator weight.
        beta: f64,
        /// Initial estimate.
        initial: Vec<f64>,
        /// Starting gain denominator (>= 1); damps the earliest steps
        /// without changing the long-run gain sequence.
        #[serde(default = "default_initial_r")]
        initial_r: f64,
    },
    /// Matrix-gain estimator with adaptive weights.
    Impf {
        /// Initial estimate.
        initial: Vec<f64>,
        /// The initial gain matrix is this multiple of the identity.
        initial_p_scale: f64,
    },
    /// Projected scalar-gain baseline.
    ProjectionBaseline {
        /// Constant step scale.
        alpha: f64,
        /// Initial estimate (must lie inside the projection ball).
        initial: Vec<f64>,
        /// Projection radius.
        radius: f64,
    },
}

impl EstimatorSpec {
    /// Stable identifier used in file names and metadata.
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::Rpfi { .. } => "rpfi",
            EstimatorSpec::Impf { .. } => "impf",
            EstimatorSpec::ProjectionBaseline { .. } => "projection_baseline",
        }
    }

    /// Initial estimate described by the spec.
    pub fn initial(&self) -> &[f64] {
        match self {
            EstimatorSpec::Rpfi { initial, .. } => initial,
            EstimatorSpec::Impf { initial, .. } => initial,
            EstimatorSpec::ProjectionBaseline { initial, .. } => initial,
        }
    }

    /// Validates against the system and instantiates the estimator.
    pub fn build(&self, config: &FirConfig, noise: NoiseModel) -> Result<Box<dyn Estimator>> {
        if self.initial().len() != config.dim() {
            return Err(Error::DimensionMismatch {
                expected: config.dim(),
                got: self.initial().len(),
            });
        }
        match self {
            EstimatorSpec::Rpfi { alpha, beta, initial, initial_r } => {
                Ok(Box::new(
                    Rpfi::from_config(
                        config,
                        DVector::from_vec(initial.clone()),
                        Schedule::Constant(*alpha),
                        Schedule::Constant(*beta),
                        noise,
                    )?
                    .with_initial_r(*initial_r)?,
                ))
            }
            EstimatorSpec::Impf { initial, initial_p_scale } => Ok(Box::new(Impf::from_config(
                config,
                DVector::from_vec(initial.clone()),
                *initial_p_scale,
                noise,
            )?)),
            EstimatorSpec::ProjectionBaseline { alpha, initial, radius } => {
                Ok(Box::new(ProjectionBaseline::new(
                    DVector::from_vec(initial.clone()),
                    Schedule::Constant(*alpha),
                    *radius,
                    config.threshold(),
                    noise,
                )?))
            }
        }
    }
}

/// Complete, serializable description of one Monte-Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Human-readable experiment name, used in metadata and file names.
    pub label: String,
    /// System under identification.
    pub system: SystemSpec,
    /// Regressor source.
    pub inputs: InputSpec,
    /// Observation noise model.
    pub noise: NoiseModel,
    /// Estimator to run.
    pub estimator: EstimatorSpec,
    /// Number of observations per run.
    pub horizon: u64,
    /// Number of Monte-Carlo runs.
    pub runs: u64,
    /// Root seed; every stream in the experiment derives from it.
    pub base_seed: u64,
    /// Statistics are recorded at every multiple of this stride (and
    /// always at the final observation).
    pub record_stride: u64,
}

impl ExperimentSpec {
    /// Validates the cross-field consistency of the description and
    /// returns the built system and input generator.
    pub fn validate(&self) -> Result<(FirConfig, InputGenerator)> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidArgument("runs must be at least 1".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidArgument("record stride must be at least 1".into()));
        }
        let config = self.system.build()?;
        let generator = self.inputs.build(config.phi_bar())?;
        if generator.dim() != config.dim() {
            return Err(Error::DimensionMismatch {
                expected: config.dim(),
                got: generator.dim(),
            });
        }
        if self.estimator.initial().len() != config.dim() {
            return Err(Error::DimensionMismatch {
                expected: config.dim(),
                got: self.estimator.initial().len(),
            });
        }
        // Instantiating the estimator validates its own parameters.
        self.estimator.build(&config, self.noise)?;
        Ok((config, generator))
    }

    /// Observation counts at which statistics are recorded: every multiple
    /// of the stride plus the final count.
    pub fn record_points(&self) -> Vec<u64> {
        let mut points: Vec<u64> =
            (1..=self.horizon).filter(|k| k % self.record_stride == 0).collect();
        if points.last() != Some(&self.horizon) {
            points.push(self.horizon);
        }
        points
    }

    /// Draws the regressor realization shared by every run of this
    /// experiment.
    pub fn materialize_inputs(&self) -> Result<Vec<DVector<f64>>> {
        let (_, generator) = self.validate()?;
        let count = usize::try_from(self.horizon).map_err(|_| {
            Error::InvalidArgument(format!("horizon {} does not fit in memory", self.horizon))
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.base_seed, INPUT_STREAM_INDEX));
        generator.generate(count, &mut rng)
    }

    /// The full experiment description as a single JSON line.
    pub fn echo_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Trajectory simulation
// ---------------------------------------------------------------------------

/// One simulated estimation run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Observation counts at which the state was recorded.
    pub ks: Vec<u64>,
    /// Squared estimation error at each recorded count.
    pub error_sq: Vec<f64>,
    /// Estimates at each recorded count (empty unless requested).
    pub estimates: Vec<DVector<f64>>,
    /// Estimate after the final observation.
    pub final_estimate: DVector<f64>,
    /// Seed of this run's noise stream.
    pub seed: u64,
    /// Wall-clock duration of the simulation loop in seconds.
    pub wall_time_s: f64,
}

/// Simulates one run: fresh estimator, fresh noise stream derived from the
/// run index, regressors taken from the shared realization.
///
/// `inputs` must hold at least `spec.horizon` vectors.  Set
/// `record_estimates` to keep the full estimate at every record point
/// (needed for trajectory files; costs memory proportional to
/// `dim * points`).
pub fn run_trajectory(
    spec: &ExperimentSpec,
    inputs: &[DVector<f64>],
    run_index: u64,
    record_estimates: bool,
) -> Result<Trajectory> {
    let (config, _) = spec.validate()?;
    if (inputs.len() as u64) < spec.horizon {
        return Err(Error::SequenceExhausted {
            requested: spec.horizon as usize,
            available: inputs.len(),
        });
    }
    let mut estimator = spec.estimator.build(&config, spec.noise)?;
    let seed = derive_seed(spec.base_seed, run_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = spec.record_points();
    let mut error_sq = Vec::with_capacity(points.len());
    let mut estimates = Vec::new();
    if record_estimates {
        estimates.reserve(points.len());
    }
    let mut next = 0usize;

    let start = Instant::now();
    for k in 1..=spec.horizon {
        let phi = &inputs[(k - 1) as usize];
        let draw = spec.noise.sample(&mut rng);
        let (_, s) = observe(&config, phi, draw)?;
        estimator.step(phi, s)?;
        if next < points.len() && points[next] == k {
            error_sq.push((estimator.estimate() - config.theta()).norm_squared());
            if record_estimates {
                estimates.push(estimator.estimate().clone());
            }
            next += 1;
        }
    }
    let wall_time_s = start.elapsed().as_secs_f64();

    Ok(Trajectory {
        ks: points,
        error_sq,
        estimates,
        final_estimate: estimator.estimate().clone(),
        seed,
        wall_time_s,
    })
}

// ---------------------------------------------------------------------------
// Monte-Carlo aggregation
// ---------------------------------------------------------------------------

/// Per-run metadata retained after aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    /// Run index within the experiment.
    pub run_index: u64,
    /// Derived seed of the run's noise stream.
    pub seed: u64,
    /// Estimator identifier.
    pub estimator: String,
    /// Observations consumed.
    pub horizon: u64,
    /// Squared estimation error after the final observation.
    pub final_error_sq: f64,
    /// Wall-clock duration of the run in seconds (not reproducible).
    pub wall_time_s: f64,
}

/// Aggregated Monte-Carlo results.
#[derive(Debug, Clone)]
pub struct McSummary {
    /// Observation counts at which statistics were recorded.
    pub ks: Vec<u64>,
    /// Mean squared estimation error across runs at each recorded count.
    pub mse: Vec<f64>,
    /// Standard error of that mean (0 when there is a single run).
    pub stderr: Vec<f64>,
    /// Trace of the lower-bound matrix at each recorded count, `None`
    /// while the accumulated information is singular.
    pub cr_trace: Vec<Option<f64>>,
    /// `mse / trace(bound) - 1` at each recorded count where the bound
    /// exists: 0 means the estimator attains the bound exactly.
    pub efficiency_ratio: Vec<Option<f64>>,
    /// Per-run records, in run order.
    pub run_meta: Vec<RunMeta>,
    /// JSON echo of the experiment description.
    pub echo: String,
}

fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Mean and standard error of per-run curves, reduced column by column
/// with compensated summation.  All curves must share one length.
fn aggregate_curves(curves: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let runs = curves.len();
    if runs == 0 {
        return Err(Error::InvalidArgument("no curves to aggregate".into()));
    }
    let len = curves[0].len();
    if curves.iter().any(|c| c.len() != len) {
        return Err(Error::StateCorruption(
            "runs recorded different numbers of points".into(),
        ));
    }
    let n = runs as f64;
    let mut mean = Vec::with_capacity(len);
    let mut stderr = Vec::with_capacity(len);
    for j in 0..len {
        let m = kahan_sum(curves.iter().map(|c| c[j])) / n;
        mean.push(m);
        if runs > 1 {
            let ss = kahan_sum(curves.iter().map(|c| {
                let d = c[j] - m;
                d * d
            }));
            stderr.push((ss / (n - 1.0)).sqrt() / n.sqrt());
        } else {
            stderr.push(0.0);
        }
    }
    Ok((mean, stderr))
}

fn install_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        Ok(job())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
        Ok(pool.install(job))
    }
}

/// Runs the experiment's Monte-Carlo runs (in parallel when `workers != 1`;
/// 0 means "use the global default pool") and aggregates them.
///
/// The returned statistics are byte-identical for every worker count.
pub fn monte_carlo(spec: &ExperimentSpec, workers: usize) -> Result<McSummary> {
    let (config, _) = spec.validate()?;
    let inputs = spec.materialize_inputs()?;
    let echo = spec.echo_json()?;

    let indices: Vec<u64> = (0..spec.runs).collect();
    let outcomes: Vec<Result<Trajectory>> = install_pool(workers, || {
        indices
            .par_iter()
            .map(|&i| run_trajectory(spec, &inputs, i, false))
            .collect()
    })?;
    // Surface the earliest failure deterministically.
    let mut trajectories = Vec::with_capacity(outcomes.len());
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(t) => trajectories.push(t),
            Err(e) => {
                return Err(Error::StateCorruption(format!("run {i} failed: {e}")));
            }
        }
    }

    let ks = spec.record_points();
    let curves: Vec<Vec<f64>> = trajectories.iter().map(|t| t.error_sq.clone()).collect();
    let (mse, stderr) = aggregate_curves(&curves)?;

    let bound_seq = cr_bound_sequence(&config, &spec.noise, &inputs, &ks)?;
    let cr_trace: Vec<Option<f64>> =
        bound_seq.deltas.iter().map(|d| d.as_ref().map(|m| m.trace())).collect();
    let efficiency_ratio: Vec<Option<f64>> = mse
        .iter()
        .zip(cr_trace.iter())
        .map(|(m, c)| c.map(|c| m / c - 1.0))
        .collect();

    let run_meta = trajectories
        .iter()
        .enumerate()
        .map(|(i, t)| RunMeta {
            run_index: i as u64,
            seed: t.seed,
            estimator: spec.estimator.name().to_string(),
            horizon: spec.horizon,
            final_error_sq: *t.error_sq.last().expect("final point always recorded"),
            wall_time_s: t.wall_time_s,
        })
        .collect();

    Ok(McSummary { ks, mse, stderr, cr_trace, efficiency_ratio, run_meta, echo })
}

// ---------------------------------------------------------------------------
// Convergence-rate fitting
// ---------------------------------------------------------------------------

/// Least-squares fit of `log(mse)` against `log(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Fitted slope; -1 is the canonical `O(1/k)` decay.
    pub slope: f64,
    /// Fitted intercept (natural log of the curve at `k = 1`).
    pub intercept: f64,
    /// Points inside the window that entered the fit.
    pub points_used: usize,
    /// Points inside the window dropped for nonpositive or nonfinite
    /// values.
    pub points_excluded: usize,
}

/// Fits a decay exponent over the window `k_lo..=k_hi`.
///
/// Needs at least 10 usable points; fails with [`Error::FitFailure`]
/// otherwise.
pub fn rate_fit(ks: &[u64], mse: &[f64], k_lo: u64, k_hi: u64) -> Result<RateFit> {
    if ks.len() != mse.len() {
        return Err(Error::DimensionMismatch { expected: ks.len(), got: mse.len() });
    }
    if k_lo == 0 || k_lo >= k_hi {
        return Err(Error::InvalidArgument(format!(
            "fit window [{k_lo}, {k_hi}] is empty or starts at 0"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0usize;
    for (&k, &m) in ks.iter().zip(mse.iter()) {
        if k < k_lo || k > k_hi {
            continue;
        }
        if m.is_finite() && m > 0.0 {
            xs.push((k as f64).ln());
            ys.push(m.ln());
        } else {
            excluded += 1;
        }
    }
    let n = xs.len();
    if n < 10 {
        return Err(Error::FitFailure(format!(
            "only {n} usable points in [{k_lo}, {k_hi}]; at least 10 are needed for a \
             credible rate estimate"
        )));
    }
    let nf = n as f64;
    let mean_x = kahan_sum(xs.iter().copied()) / nf;
    let mean_y = kahan_sum(ys.iter().copied()) / nf;
    let sxx = kahan_sum(xs.iter().map(|x| (x - mean_x) * (x - mean_x)));
    let sxy = kahan_sum(xs.iter().zip(ys.iter()).map(|(x, y)| (x - mean_x) * (y - mean_y)));
    if sxx <= 0.0 {
        return Err(Error::FitFailure("all fit points share one abscissa".into()));
    }
    let slope = sxy / sxx;
    Ok(RateFit { slope, intercept: mean_y - slope * mean_x, points_used: n, points_excluded: excluded })
}

// ---------------------------------------------------------------------------
// Wall-clock benchmark: time to reach a target accuracy
// ---------------------------------------------------------------------------

/// Outcome of timing one estimator against an accuracy target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    /// Experiment label.
    pub label: String,
    /// Estimator identifier.
    pub estimator: String,
    /// First recorded observation count at which the pilot's mean squared
    /// error fell below the threshold, or `None` if it never did.
    pub steps_to_threshold: Option<u64>,
    /// Wall-clock seconds of each timed repetition. When the threshold was
    /// reached, each entry times a run of exactly `steps_to_threshold`
    /// observations. When it was not, each entry times a run capped at the
    /// spec's full horizon — a strict lower bound on the (unobserved) time
    /// to the threshold, since the run burned that time without crossing.
    pub repeat_times_s: Vec<f64>,
    /// Mean of the repetition times (same caveat as `repeat_times_s`: a
    /// lower bound when the threshold was not reached).
    pub average_time_s: Option<f64>,
    /// `"ok"` or `"threshold_not_reached"`.
    pub status: String,
}

/// Measures the wall-clock cost of driving each experiment's estimator to
/// a mean-squared-error target.
///
/// A pilot Monte-Carlo study (`pilot_runs` runs over the spec's horizon)
/// determines how many observations each estimator needs before its mean
/// squared error first drops below `mse_threshold` at a recorded point.
/// Each estimator is then re-run exactly that many observations,
/// `repeats` times on dedicated noise streams, and the wall times are
/// reported.  This separates "how many observations does it need" (fixed
/// by the pilot) from "how fast does it process them" (the timed phase).
pub fn timing_benchmark(
    specs: &[ExperimentSpec],
    mse_threshold: f64,
    pilot_runs: u64,
    repeats: usize,
    workers: usize,
) -> Result<Vec<TimingRow>> {
    if !mse_threshold.is_finite() || mse_threshold <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "accuracy threshold must be positive and finite, got {mse_threshold}"
        )));
    }
    if pilot_runs == 0 || repeats == 0 {
        return Err(Error::InvalidArgument(
            "pilot run count and repeat count must both be at least 1".into(),
        ));
    }
    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut pilot = spec.clone();
        pilot.runs = pilot_runs;
        let summary = monte_carlo(&pilot, workers)?;
        let steps = summary
            .ks
            .iter()
            .zip(summary.mse.iter())
            .find(|&(_, &m)| m < mse_threshold)
            .map(|(&k, _)| k);

        // A run that never crossed is still timed, capped at the spec's
        // horizon: the wall time it burns without crossing is a strict
        // lower bound on its time to the threshold, which keeps ordering
        // comparisons against did-not-finish rows measurable.
        let mut timed = spec.clone();
        timed.horizon = steps.unwrap_or(spec.horizon);
        timed.record_stride = timed.horizon;
        timed.runs = 1;
        let inputs = timed.materialize_inputs()?;
        let mut times = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let traj = run_trajectory(&timed, &inputs, TIMING_RUN_INDEX_BASE + r as u64, false)?;
            times.push(traj.wall_time_s);
        }
        let average = kahan_sum(times.iter().copied()) / times.len() as f64;
        rows.push(TimingRow {
            label: spec.label.clone(),
            estimator: spec.estimator.name().to_string(),
            steps_to_threshold: steps,
            repeat_times_s: times,
            average_time_s: Some(average),
            status: if steps.is_some() { "ok" } else { "threshold_not_reached" }.to_string(),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Per-step cost scaling
// ---------------------------------------------------------------------------

/// Which estimator family a scaling measurement drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingEstimator {
    /// Scalar-gain estimator (cost linear in the dimension).
    Rpfi,
    /// Matrix-gain estimator (cost quadratic in the dimension).
    Impf,
}

impl ScalingEstimator {
    /// Stable identifier used in file names and CSV rows.
    pub fn name(&self) -> &'static str {
        match self {
            ScalingEstimator::Rpfi => "rpfi",
            ScalingEstimator::Impf => "impf",
        }
    }
}

/// Measured per-step cost across dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingMeasurement {
    /// Estimator identifier.
    pub estimator: String,
    /// Dimensions measured.
    pub dims: Vec<usize>,
    /// Best (minimum over repeats) seconds per estimator step at each
    /// dimension.
    pub seconds_per_step: Vec<f64>,
}

/// Times the bare estimator update across dimensions.
///
/// The quantity of interest is the computational work one update performs
/// (the operation count), not the update's dependency-chain latency: a
/// single trajectory is a serial chain through the distribution-function
/// evaluation, whose fixed latency shadows the dimension-dependent
/// arithmetic at small dimensions. The probe therefore steps a small group
/// of independent estimator replicas in round robin, so the processor
/// fills one replica's stalls with another's arithmetic and the measured
/// cost per step approaches the steady-state work per step.
///
/// For each dimension a fixed cycle of regressors and observation bits is
/// pre-generated outside the timed region, the replicas are rebuilt, and
/// `steps_per_dim` update calls per replica are timed; the minimum over
/// `repeats` repetitions suppresses scheduler noise.
pub fn measure_step_scaling(
    which: ScalingEstimator,
    dims: &[usize],
    steps_per_dim: u64,
    repeats: usize,
    seed: u64,
) -> Result<ScalingMeasurement> {
    if dims.is_empty() {
        return Err(Error::InvalidArgument("no dimensions to measure".into()));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument("dimension 0 is not measurable".into()));
    }
    if steps_per_dim == 0 || repeats == 0 {
        return Err(Error::InvalidArgument(
            "step count and repeat count must both be at least 1".into(),
        ));
    }
    // Prime, so cycling cannot resonate with anything, and small enough
    // that the regressor cycle stays first-level-cache resident at every
    // measured dimension: the probe isolates the estimator's arithmetic
    // from memory-system effects.
    const CYCLE: usize = 61;
    // Independent replicas stepped in round robin; enough to overlap the
    // distribution-function latency with useful arithmetic.
    const LANES: usize = 8;
    let noise = NoiseModel::standard_gaussian();
    let mut seconds_per_step = Vec::with_capacity(dims.len());
    for (di, &dim) in dims.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, di as u64));
        let scale = 1.0 / (dim as f64).sqrt();
        let inputs: Vec<DVector<f64>> = (0..CYCLE)
            .map(|_| {
                DVector::from_fn(dim, |_, _| {
                    scale * rng.random_range(-1.0..1.0)
                })
            })
            .collect();
        let bits: Vec<bool> =
            (0..CYCLE).map(|_| rng.random_range(0.0..1.0) < 0.5).collect();

        // Distinct initial estimates de-correlate the replicas' branch and
        // argument patterns without changing the work per step.
        let build = |lane: usize| -> Result<Box<dyn Estimator>> {
            let initial = DVector::from_element(dim, 0.02 * lane as f64 * scale);
            match which {
                ScalingEstimator::Rpfi => Ok(Box::new(Rpfi::new(
                    initial,
                    Schedule::Constant(1.0),
                    Schedule::Constant(1.0),
                    3.0,
                    0.0,
                    noise,
                )?)),
                ScalingEstimator::Impf => Ok(Box::new(Impf::with_scaled_identity_gain(
                    initial,
                    1.0,
                    3.0,
                    0.0,
                    noise,
                )?)),
            }
        };

        let mut best = f64::INFINITY;
        for _ in 0..repeats {
            let mut replicas = (0..LANES).map(build).collect::<Result<Vec<_>>>()?;
            let start = Instant::now();
            for i in 0..steps_per_dim {
                let slot = (i % CYCLE as u64) as usize;
                for estimator in &mut replicas {
                    estimator.step(&inputs[slot], bits[slot])?;
                }
            }
            let elapsed = start.elapsed().as_secs_f64();
            for estimator in &replicas {
                std::hint::black_box(estimator.estimate()[0]);
            }
            best = best.min(elapsed);
        }
        seconds_per_step.push(best / (steps_per_dim * LANES as u64) as f64);
    }
    Ok(ScalingMeasurement {
        estimator: which.name().to_string(),
        dims: dims.to_vec(),
        seconds_per_step,
    })
}

/// Growth exponent of a cost curve sampled on a doubling grid of
/// dimensions, immune to any constant per-step overhead.
///
/// For `t(n) = t0 + c * n^p` and `n_{i+1} = 2 n_i`, successive differences
/// satisfy `(t_{i+2} - t_{i+1}) / (t_{i+1} - t_i) = 2^p` exactly, so the
/// mean of the base-2 logs of those ratios recovers `p` with the constant
/// `t0` cancelled.
pub fn scaling_exponent(dims: &[usize], times: &[f64]) -> Result<f64> {
    if dims.len() != times.len() {
        return Err(Error::DimensionMismatch { expected: dims.len(), got: times.len() });
    }
    if dims.len() < 3 {
        return Err(Error::InvalidArgument(
            "need at least three dimensions to estimate a growth exponent".into(),
        ));
    }
    for pair in dims.windows(2) {
        if pair[1] != pair[0] * 2 {
            return Err(Error::InvalidArgument(format!(
                "dimensions must double at every stage, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    let diffs: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::FitFailure(
            "cost differences must be positive; the measurement is too noisy to \
             resolve the growth"
                .into(),
        ));
    }
    let logs: Vec<f64> = diffs.windows(2).map(|w| (w[1] / w[0]).log2()).collect();
    Ok(kahan_sum(logs.iter().copied()) / logs.len() as f64)
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

fn create_buffered(path: &Path) -> Result<BufWriter<std::fs::File>> {
    if let Some(parent) = path.parent()
        && !parent.as_os_str().is_empty()
    {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(std::fs::File::create(path)?))
}

/// Writes aggregated Monte-Carlo statistics as CSV with columns
/// `k,mse,stderr,cr_trace,efficiency_ratio`; optional columns are empty
/// while the bound does not exist.
pub fn write_results_csv(path: &Path, summary: &McSummary) -> Result<()> {
    let mut out = create_buffered(path)?;
    writeln!(out, "k,mse,stderr,cr_trace,efficiency_ratio")?;
    for j in 0..summary.ks.len() {
        write!(out, "{},{},{}", summary.ks[j], summary.mse[j], summary.stderr[j])?;
        match summary.cr_trace[j] {
            Some(c) => write!(out, ",{c}")?,
            None => write!(out, ",")?,
        }
        match summary.efficiency_ratio[j] {
            Some(e) => writeln!(out, ",{e}")?,
            None => writeln!(out, ",")?,
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes one recorded trajectory as CSV with columns
/// `k,estimate_1..estimate_n,error_norm_sq`.  The trajectory must have
/// been simulated with estimate recording enabled.
pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory) -> Result<()> {
    if trajectory.estimates.len() != trajectory.ks.len() {
        return Err(Error::InvalidArgument(
            "trajectory was simulated without estimate recording".into(),
        ));
    }
    let dim = trajectory.final_estimate.len();
    let mut out = create_buffered(path)?;
    write!(out, "k")?;
    for i in 1..=dim {
        write!(out, ",estimate_{i}")?;
    }
    writeln!(out, ",error_norm_sq")?;
    for j in 0..trajectory.ks.len() {
        write!(out, "{}", trajectory.ks[j])?;
        for i in 0..dim {
            write!(out, ",{}", trajectory.estimates[j][i])?;
        }
        writeln!(out, ",{}", trajectory.error_sq[j])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes timing rows as CSV with columns
/// `label,estimator,repeat_1..repeat_R,average_s,steps_to_threshold,status`.
pub fn write_timing_csv(path: &Path, rows: &[TimingRow]) -> Result<()> {
    let repeats = rows.iter().map(|r| r.repeat_times_s.len()).max().unwrap_or(0);
    let mut out = create_buffered(path)?;
    write!(out, "label,estimator")?;
    for i in 1..=repeats {
        write!(out, ",repeat_{i}")?;
    }
    writeln!(out, ",average_s,steps_to_threshold,status")?;
    for row in rows {
        write!(out, "{},{}", row.label, row.estimator)?;
        for i in 0..repeats {
            match row.repeat_times_s.get(i) {
                Some(t) => write!(out, ",{t}")?,
                None => write!(out, ",")?,
            }
        }
        match row.average_time_s {
            Some(a) => write!(out, ",{a}")?,
            None => write!(out, ",")?,
        }
        match row.steps_to_threshold {
            Some(s) => write!(out, ",{s}")?,
            None => write!(out, ",")?,
        }
        writeln!(out, ",{}", row.status)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes per-step cost measurements as CSV with columns
/// `estimator,dim,seconds_per_step`.
pub fn write_scaling_csv(path: &Path, measurements: &[ScalingMeasurement]) -> Result<()> {
    let mut out = create_buffered(path)?;
    writeln!(out, "estimator,dim,seconds_per_step")?;
    for m in measurements {
        for (d, t) in m.dims.iter().zip(m.seconds_per_step.iter()) {
            writeln!(out, "{},{d},{t}", m.estimator)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes growth exponents as CSV with columns `estimator,exponent`.
pub fn write_exponents_csv(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    let mut out = create_buffered(path)?;
    writeln!(out, "estimator,exponent")?;
    for (name, p) in rows {
        writeln!(out, "{name},{p}")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes experiment metadata as JSON lines: first the experiment echo,
/// then one line per run.  Wall-time fields vary between invocations; all
/// other fields are reproducible.
pub fn write_metadata_jsonl(path: &Path, summary: &McSummary) -> Result<()> {
    let mut out = create_buffered(path)?;
    writeln!(out, "{}", summary.echo)?;
    for meta in &summary.run_meta {
        let line = serde_json::to_string(meta).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}
