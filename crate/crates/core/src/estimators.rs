//! Recursive parameter estimators driven by one-bit observations.
//!
//! All three estimators share the same innovation: the model-implied
//! switching probability `F(C - z_k)` minus the observed bit `s_k`, where
//! `z_k` is a prediction of the noise-free output built from the previous
//! estimate.  They differ in how the prediction is guarded and how the
//! correction is scaled:
//!
//! * [`Rpfi`] clips the prediction into the band `[-M, M]` implied by the
//!   prior bounds (the *cut-off* coefficient) and, whenever the raw
//!   prediction leaves that band, scales the correction up by its magnitude
//!   (the *acceleration* coefficient).  The gain is a scalar `1/r_k` with
//!   `r_k = 1 + sum beta_i ||phi_i||^2`.  Cost per step is linear in the
//!   dimension, and no projection is ever applied.
//! * [`Impf`] keeps the cut-off and acceleration guards but replaces the
//!   scalar gain by a matrix `P_k` updated through a rank-one
//!   quasi-Newton recursion with adaptive weights derived from the local
//!   density/probability pair; its asymptotic covariance attains the
//!   Cramér–Rao lower bound.  Cost per step is quadratic in the dimension.
//! * [`ProjectionBaseline`] is the classical alternative the first two are
//!   measured against: the same scalar-gain update with no cut-off and no
//!   acceleration, followed by a Euclidean projection onto the prior ball.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::system::FirConfig;

/// Clamp applied to the switching probability inside [`Impf`] so the
/// adaptive weights stay finite when a saturated prediction pushes
/// `F(C - z)` numerically onto 0 or 1.
pub const PROBABILITY_CLAMP: f64 = 1e-12;

/// Safety margin multiplying the rate-condition threshold in
/// [`suggest_alpha_for_rate`].
pub const RATE_MARGIN: f64 = 1.05;

/// Smallest step scale [`suggest_alpha_for_rate`] will ever return; an
/// extremely well-excited problem would otherwise push the suggestion to
/// zero.
pub const MIN_SUGGESTED_ALPHA: f64 = 1e-3;

/// Dot product over plain slices; the estimator hot loops run at small
/// fixed dimensions where trimmed-down kernels beat the generic ones.
#[inline]
fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `u = p * x` for a square column-major matrix, accumulating column by
/// column (the same order as the general matrix-vector kernel, so results
/// are bit-identical to it).
#[inline]
fn matvec_into(u: &mut [f64], p: &[f64], x: &[f64]) {
    let n = x.len();
    debug_assert_eq!(u.len(), n);
    debug_assert_eq!(p.len(), n * n);
    let x0 = x[0];
    for (ui, pi) in u.iter_mut().zip(&p[..n]) {
        *ui = pi * x0;
    }
    for (j, &xj) in x.iter().enumerate().skip(1) {
        let col = &p[j * n..(j + 1) * n];
        for (ui, pi) in u.iter_mut().zip(col) {
            *ui += pi * xj;
        }
    }
}

/// Cut-off coefficient: the prediction clipped into `[-m, m]`.
///
/// `m` must be positive (infinity disables the band).
pub fn cutoff(prediction: f64, m: f64) -> f64 {
    debug_assert!(m > 0.0, "cut-off band must be positive");
    prediction.clamp(-m, m)
}

/// Acceleration coefficient: 1 inside the band, `|prediction|` outside.
///
/// On the boundary `|prediction| == m` the prediction is still credible,
/// so the coefficient stays 1.
pub fn accel(prediction: f64, m: f64) -> f64 {
    debug_assert!(m > 0.0, "cut-off band must be positive");
    if prediction.abs() <= m { 1.0 } else { prediction.abs() }
}

/// Step-size sequence for the scalar-gain estimators.
///
/// Only bounded-away-from-zero schedules are meaningful; the estimators
/// validate the bounds at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// The same coefficient at every step.
    Constant(f64),
}

impl Schedule {
    /// Coefficient used at (1-based) step `k`.
    pub fn at(&self, _k: u64) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
        }
    }

    /// `(lower, upper)` bounds of the coefficient over all steps.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Schedule::Constant(v) => (*v, *v),
        }
    }
}

fn validate_schedule(schedule: &Schedule, name: &'static str) -> Result<()> {
    let (lo, hi) = schedule.bounds();
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::NonFinite { name, value: if lo.is_finite() { hi } else { lo } });
    }
    if lo <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "{name} schedule must stay positive, lower bound is {lo}"
        )));
    }
    Ok(())
}

fn validate_estimate(initial: &DVector<f64>) -> Result<()> {
    if initial.is_empty() {
        return Err(Error::InvalidArgument(
            "initial estimate must have at least one component".into(),
        ));
    }
    for &v in initial.iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { name: "initial estimate entry", value: v });
        }
    }
    Ok(())
}

fn validate_band(cutoff_m: f64) -> Result<()> {
    if cutoff_m.is_nan() || cutoff_m <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "cut-off band must be positive (or infinite to disable), got {cutoff_m}"
        )));
    }
    Ok(())
}

/// Diagnostics of a single estimator step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Clipped prediction `z_k`.
    pub z: f64,
    /// Acceleration coefficient `gamma_k` (1 inside the band).
    pub gamma: f64,
    /// Innovation `F(C - z_k) - s_k`, always in `[-1, 1]`.
    pub innovation: f64,
    /// Estimate after the step.
    pub estimate_after: DVector<f64>,
}

/// Uniform one-step interface used by the experiment harness.
pub trait Estimator {
    /// Consumes one regressor/observation pair.
    fn step(&mut self, phi: &DVector<f64>, s: bool) -> Result<()>;
    /// Current parameter estimate.
    fn estimate(&self) -> &DVector<f64>;
    /// Parameter dimension.
    fn dim(&self) -> usize;
    /// Number of steps consumed so far.
    fn step_count(&self) -> u64;
}

/// Shared scalar-gain update used by [`Rpfi`] and [`ProjectionBaseline`].
///
/// Advances `r += beta_k * ||phi||^2`, forms the (possibly clipped)
/// prediction from the pre-step estimate, and applies
/// `theta += (gamma_k * alpha_k / r) * (F(C - z_k) - s) * phi`.
/// Both callers route through this single function so that the baseline is
/// bit-for-bit the cut-off-free, acceleration-free special case.
#[allow(clippy::too_many_arguments)]
fn scalar_gain_update(
    theta_hat: &mut DVector<f64>,
    r: &mut f64,
    phi: &DVector<f64>,
    s_value: f64,
    alpha_k: f64,
    beta_k: f64,
    band: f64,
    threshold: f64,
    noise: &NoiseModel,
) -> Result<(f64, f64, f64)> {
    let prediction = theta_hat.dot(phi);
    if !prediction.is_finite() {
        return Err(Error::StateCorruption(format!(
            "prediction is {prediction}; estimate or regressor has diverged"
        )));
    }
    *r += beta_k * phi.norm_squared();
    let z = cutoff(prediction, band);
    let gamma = accel(prediction, band);
    let switching = noise.cdf(threshold - z)?;
    let innovation = switching - s_value;
    theta_hat.axpy(gamma * alpha_k / *r * innovation, phi, 1.0);
    Ok((z, gamma, innovation))
}

// ---------------------------------------------------------------------------
// RPFI
// ---------------------------------------------------------------------------

/// Recursive projection-free estimator with cut-off and acceleration.
#[derive(Debug, Clone)]
pub struct Rpfi {
    theta_hat: DVector<f64>,
    r: f64,
    k: u64,
    alpha: Schedule,
    beta: Schedule,
    cutoff_m: f64,
    threshold: f64,
    noise: NoiseModel,
}

/// Serializable snapshot of an [`Rpfi`] state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpfiSnapshot {
    /// Current estimate.
    pub estimate: Vec<f64>,
    /// Accumulated gain denominator `r_k`.
    pub r: f64,
    /// Steps consumed.
    pub k: u64,
}

impl Rpfi {
    /// Builds the estimator from its raw ingredients.
    ///
    /// `cutoff_m` may be `f64::INFINITY` to disable the prediction band
    /// (then the acceleration coefficient is identically 1).
    pub fn new(
        initial: DVector<f64>,
        alpha: Schedule,
        beta: Schedule,
        cutoff_m: f64,
        threshold: f64,
        noise: NoiseModel,
    ) -> Result<Self> {
        validate_estimate(&initial)?;
        validate_schedule(&alpha, "alpha")?;
        validate_schedule(&beta, "beta")?;
        validate_band(cutoff_m)?;
        if !threshold.is_finite() {
            return Err(Error::NonFinite { name: "threshold", value: threshold });
        }
        Ok(Self { theta_hat: initial, r: 1.0, k: 0, alpha, beta, cutoff_m, threshold, noise })
    }

    /// Convenience constructor taking the band and threshold from a system
    /// description.
    pub fn from_config(
        config: &FirConfig,
        initial: DVector<f64>,
        alpha: Schedule,
        beta: Schedule,
        noise: NoiseModel,
    ) -> Result<Self> {
        if initial.len() != config.dim() {
            return Err(Error::DimensionMismatch { expected: config.dim(), got: initial.len() });
        }
        Self::new(initial, alpha, beta, config.cutoff_m(), config.threshold(), noise)
    }

    fn step_value(&mut self, phi: &DVector<f64>, s_value: f64) -> Result<(f64, f64, f64)> {
        if phi.len() != self.theta_hat.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta_hat.len(),
                got: phi.len(),
            });
        }
        let k_next = self.k + 1;
        let out = scalar_gain_update(
            &mut self.theta_hat,
            &mut self.r,
            phi,
            s_value,
            self.alpha.at(k_next),
            self.beta.at(k_next),
            self.cutoff_m,
            self.threshold,
            &self.noise,
        )?;
        self.k = k_next;
        Ok(out)
    }

    /// One step with full diagnostics.
    pub fn step_recorded(&mut self, phi: &DVector<f64>, s: bool) -> Result<StepRecord> {
        let (z, gamma, innovation) = self.step_value(phi, f64::from(u8::from(s)))?;
        Ok(StepRecord { z, gamma, innovation, estimate_after: self.theta_hat.clone() })
    }

    /// Gain denominator `r_k`.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Replaces the starting gain denominator `r_0` (default 1).
    ///
    /// A larger start damps the first few corrections exactly as if the
    /// estimator had already absorbed `(r_0 - 1) / sup‖φ‖²` observations,
    /// while leaving the long-run gain sequence — and therefore the
    /// convergence rate — unchanged. Useful when the step scale required
    /// by the rate condition is too aggressive for a cold start.
    pub fn with_initial_r(mut self, r0: f64) -> Result<Self> {
        if !(r0.is_finite() && r0 >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "initial gain denominator must be finite and >= 1, got {r0}"
            )));
        }
        if self.k != 0 {
            return Err(Error::InvalidArgument(
                "initial gain denominator can only be set before the first step".into(),
            ));
        }
        self.r = r0;
        Ok(self)
    }

    /// Prediction band `M`.
    pub fn cutoff_m(&self) -> f64 {
        self.cutoff_m
    }

    /// Serializable state snapshot.
    pub fn snapshot(&self) -> RpfiSnapshot {
        RpfiSnapshot { estimate: self.theta_hat.iter().copied().collect(), r: self.r, k: self.k }
    }

    /// Rebuilds an estimator from a snapshot plus the (non-serialized)
    /// configuration.
    pub fn restore(
        snapshot: &RpfiSnapshot,
        alpha: Schedule,
        beta: Schedule,
        cutoff_m: f64,
        threshold: f64,
        noise: NoiseModel,
    ) -> Result<Self> {
        if !(snapshot.r >= 1.0) {
            return Err(Error::StateCorruption(format!(
                "snapshot r = {} violates r >= 1",
                snapshot.r
            )));
        }
        let mut estimator = Self::new(
            DVector::from_vec(snapshot.estimate.clone()),
            alpha,
            beta,
            cutoff_m,
            threshold,
            noise,
        )?;
        estimator.r = snapshot.r;
        estimator.k = snapshot.k;
        Ok(estimator)
    }
}

impl Estimator for Rpfi {
    fn step(&mut self, phi: &DVector<f64>, s: bool) -> Result<()> {
        self.step_value(phi, f64::from(u8::from(s))).map(|_| ())
    }

    fn estimate(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    fn step_count(&self) -> u64 {
        self.k
    }
}

// ---------------------------------------------------------------------------
// IMPF
// ---------------------------------------------------------------------------

/// Recursive estimator with adaptive weights and a matrix gain that tracks
/// the inverse accumulated information.
#[derive(Debug, Clone)]
pub struct Impf {
    theta_hat: DVector<f64>,
    p_hat: DMatrix<f64>,
    k: u64,
    cutoff_m: f64,
    threshold: f64,
    noise: NoiseModel,
    /// Per-step workspace holding the gain-regressor product, kept on the
    /// struct so the hot loop never allocates.
    scratch: DVector<f64>,
}

/// Serializable snapshot of an [`Impf`] state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpfSnapshot {
    /// Current estimate.
    pub estimate: Vec<f64>,
    /// Gain matrix in row-major order.
    pub p_hat: Vec<f64>,
    /// Steps consumed.
    pub k: u64,
}

fn validate_gain_matrix(p: &DMatrix<f64>, dim: usize) -> Result<()> {
    if p.nrows() != dim || p.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: p.nrows().max(p.ncols()) });
    }
    let scale = p.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if !scale.is_finite() {
        return Err(Error::InvalidArgument("gain matrix has non-finite entries".into()));
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            if (p[(i, j)] - p[(j, i)]).abs() > 1e-10 * scale.max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "gain matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    if p.clone().cholesky().is_none() {
        return Err(Error::InvalidArgument(
            "gain matrix must be positive definite".into(),
        ));
    }
    Ok(())
}

impl Impf {
    /// Builds the estimator with an explicit initial gain matrix, which
    /// must be symmetric positive definite.
    pub fn new(
        initial: DVector<f64>,
        initial_p: DMatrix<f64>,
        cutoff_m: f64,
        threshold: f64,
        noise: NoiseModel,
    ) -> Result<Self> {
        validate_estimate(&initial)?;
        validate_band(cutoff_m)?;
        if !threshold.is_finite() {
            return Err(Error::NonFinite { name: "threshold", value: threshold });
        }
        validate_gain_matrix(&initial_p, initial.len())?;
        // Store an exactly symmetric copy: the update below writes both
        // triangles with the same products, so symmetry established here is
        // preserved bit-for-bit at every later step.
        let mut p = initial_p;
        for i in 0..p.nrows() {
            for j in (i + 1)..p.ncols() {
                let avg = 0.5 * (p[(i, j)] + p[(j, i)]);
                p[(i, j)] = avg;
                p[(j, i)] = avg;
            }
        }
        let dim = initial.len();
        Ok(Self {
            theta_hat: initial,
            p_hat: p,
            k: 0,
            cutoff_m,
            threshold,
            noise,
            scratch: DVector::zeros(dim),
        })
    }

    /// Builds the estimator with gain `p_scale * I`.
    pub fn with_scaled_identity_gain(
        initial: DVector<f64>,
        p_scale: f64,
        cutoff_m: f64,
        threshold: f64,
        noise: NoiseModel,
    ) -> Result<Self> {
        if !p_scale.is_finite() || p_scale <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "gain scale must be positive and finite, got {p_scale}"
            )));
        }
        let dim = initial.len();
        Self::new(
            initial,
            DMatrix::identity(dim, dim) * p_scale,
            cutoff_m,
            threshold,
            noise,
        )
    }

    /// Convenience constructor taking the band and threshold from a system
    /// description.
    pub fn from_config(
        config: &FirConfig,
        initial: DVector<f64>,
        p_scale: f64,
        noise: NoiseModel,
    ) -> Result<Self> {
        if initial.len() != config.dim() {
            return Err(Error::DimensionMismatch { expected: config.dim(), got: initial.len() });
        }
        Self::with_scaled_identity_gain(
            initial,
            p_scale,
            config.cutoff_m(),
            config.threshold(),
            noise,
        )
    }

    fn step_value(&mut self, phi: &DVector<f64>, s_value: f64) -> Result<(f64, f64, f64)> {
        let dim = self.theta_hat.len();
        if phi.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: phi.len() });
        }
        let x_slice = phi.as_slice();
        let prediction = dot_slices(self.theta_hat.as_slice(), x_slice);
        if !prediction.is_finite() {
            return Err(Error::StateCorruption(format!(
                "prediction is {prediction}; estimate or regressor has diverged"
            )));
        }
        let z = cutoff(prediction, self.cutoff_m);
        let gamma = accel(prediction, self.cutoff_m);

        // Adaptive weights from the local probability/density pair, with
        // the probability clamped away from {0, 1}.
        let x = self.threshold - z;
        let switching = self
            .noise
            .cdf(x)?
            .clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP);
        let density = self.noise.pdf(x)?;
        let bernoulli_var = switching * (1.0 - switching);

        // Gain matrix first: the recursion is only well-posed in this
        // order, and the estimate update below must use the new gain.
        let quad = {
            let p = self.p_hat.as_slice();
            let u = self.scratch.as_mut_slice();
            matvec_into(u, p, x_slice);
            dot_slices(x_slice, u)
        };
        // With weights a = f/(F(1-F)) and b = f^2/(F(1-F)), everything the
        // update needs divides by the same quantity once the variance is
        // multiplied through:
        //   b / (1 + b quad)   =  f^2 / (F(1-F) + f^2 quad)
        //   a / (1 + b quad)   =  f   / (F(1-F) + f^2 quad)
        // so a single reciprocal serves both the gain downdate and the
        // estimate correction.
        let de2 = density * density;
        let total = bernoulli_var + de2 * quad;
        if quad < 0.0 || !total.is_finite() || total <= 0.0 {
            return Err(Error::StateCorruption(format!(
                "gain matrix lost positive definiteness (phi' P phi = {quad})"
            )));
        }
        let inv_total = 1.0 / total;
        // Rank-one downdate written into both triangles from the same
        // products, so the matrix stays exactly symmetric at every step
        // (entries are column-major).
        {
            let u = self.scratch.as_slice();
            let p = self.p_hat.as_mut_slice();
            let c = -de2 * inv_total;
            for j in 0..dim {
                let cuj = c * u[j];
                p[j * dim + j] += u[j] * cuj;
                for i in 0..j {
                    let d = u[i] * cuj;
                    p[j * dim + i] += d;
                    p[i * dim + j] += d;
                }
            }
            for i in 0..dim {
                let d = p[i * dim + i];
                if !d.is_finite() || d <= 0.0 {
                    return Err(Error::StateCorruption(format!(
                        "gain matrix diagonal entry {i} became {d}"
                    )));
                }
            }
        }

        // The downdated gain acting on the regressor collapses to a rescale
        // of the pre-update product, saving a second matrix product:
        // (P - c u u') phi = u (1 - c' quad) = u / (1 + b quad).
        let innovation = switching - s_value;
        let scale = gamma * innovation * density * inv_total;
        {
            let u = self.scratch.as_slice();
            let th = self.theta_hat.as_mut_slice();
            for (t, &ui) in th.iter_mut().zip(u) {
                *t += scale * ui;
            }
        }
        self.k += 1;
        Ok((z, gamma, innovation))
    }

    /// One step with full diagnostics.
    pub fn step_recorded(&mut self, phi: &DVector<f64>, s: bool) -> Result<StepRecord> {
        let (z, gamma, innovation) = self.step_value(phi, f64::from(u8::from(s)))?;
        Ok(StepRecord { z, gamma, innovation, estimate_after: self.theta_hat.clone() })
    }

    /// Current gain matrix.
    pub fn p_hat(&self) -> &DMatrix<f64> {
        &self.p_hat
    }

    /// Serializable state snapshot (gain in row-major order).
    pub fn snapshot(&self) -> ImpfSnapshot {
        let dim = self.theta_hat.len();
        let mut p = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                p.push(self.p_hat[(i, j)]);
            }
        }
        ImpfSnapshot {
            estimate: self.theta_hat.iter().copied().collect(),
            p_hat: p,
            k: self.k,
        }
    }

    /// Rebuilds an estimator from a snapshot plus the (non-serialized)
    /// configuration.
    pub fn restore(
        snapshot: &ImpfSnapshot,
        cutoff_m: f64,
        threshold: f64,
        noise: NoiseModel,
    ) -> Result<Self> {
        let dim = snapshot.estimate.len();
        if snapshot.p_hat.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: snapshot.p_hat.len(),
            });
        }
        let p = DMatrix::from_row_slice(dim, dim, &snapshot.p_hat);
        let mut estimator = Self::new(
            DVector::from_vec(snapshot.estimate.clone()),
            p,
            cutoff_m,
            threshold,
            noise,
        )?;
        estimator.k = snapshot.k;
        Ok(estimator)
    }

    /// Overwrites the estimate while keeping the gain matrix; used for
    /// warm starts and for pinning the prediction point in analyses.
    pub fn set_estimate(&mut self, estimate: DVector<f64>) -> Result<()> {
        validate_estimate(&estimate)?;
        if estimate.len() != self.theta_hat.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta_hat.len(),
                got: estimate.len(),
            });
        }
        self.theta_hat = estimate;
        Ok(())
    }
}

impl Estimator for Impf {
    fn step(&mut self, phi: &DVector<f64>, s: bool) -> Result<()> {
        self.step_value(phi, f64::from(u8::from(s))).map(|_| ())
    }

    fn estimate(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    fn step_count(&self) -> u64 {
        self.k
    }
}

// ---------------------------------------------------------------------------
// Projection baseline
// ---------------------------------------------------------------------------

/// Projected stochastic-approximation baseline: the scalar-gain update with
/// the band disabled and unit acceleration, followed by projection onto the
/// ball of radius `radius`.
#[derive(Debug, Clone)]
pub struct ProjectionBaseline {
    theta_hat: DVector<f64>,
    r: f64,
    k: u64,
    alpha: Schedule,
    radius: f64,
    threshold: f64,
    noise: NoiseModel,
}

impl ProjectionBaseline {
    /// Builds the baseline.  The initial estimate must already lie in the
    /// prior ball.
    pub fn new(
        initial: DVector<f64>,
        alpha: Schedule,
        radius: f64,
        threshold: f64,
        noise: NoiseModel,
    ) -> Result<Self> {
        validate_estimate(&initial)?;
        validate_schedule(&alpha, "alpha")?;
        if !radius.is_finite() || radius <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "projection radius must be positive and finite, got {radius}"
            )));
        }
        if !threshold.is_finite() {
            return Err(Error::NonFinite { name: "threshold", value: threshold });
        }
        let norm = initial.norm();
        if norm > radius {
            return Err(Error::InvalidArgument(format!(
                "initial estimate norm {norm} lies outside the projection ball {radius}"
            )));
        }
        Ok(Self { theta_hat: initial, r: 1.0, k: 0, alpha, radius, threshold, noise })
    }

    /// Gain denominator `r_k`.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Projection radius.
    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl Estimator for ProjectionBaseline {
    fn step(&mut self, phi: &DVector<f64>, s: bool) -> Result<()> {
        if phi.len() != self.theta_hat.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta_hat.len(),
                got: phi.len(),
            });
        }
        let k_next = self.k + 1;
        scalar_gain_update(
            &mut self.theta_hat,
            &mut self.r,
            phi,
            f64::from(u8::from(s)),
            self.alpha.at(k_next),
            1.0,
            f64::INFINITY,
            self.threshold,
            &self.noise,
        )?;
        let norm = self.theta_hat.norm();
        if norm > self.radius {
            self.theta_hat *= self.radius / norm;
        }
        self.k = k_next;
        Ok(())
    }

    fn estimate(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    fn step_count(&self) -> u64 {
        self.k
    }
}

// ---------------------------------------------------------------------------
// Step-size suggestion
// ---------------------------------------------------------------------------

/// Smallest constant step scale that puts the scalar-gain estimator into
/// its `O(1/k)` mean-square regime, with a safety margin.
///
/// The rate condition is `2 alpha fmin delta^2 / (1 + beta_bar phi_bar^2) > 1`
/// where `fmin` is the density floor over the band of values the clipped
/// prediction error can visit, `[C - M, C + M]`.  This worst-case floor is
/// honest but brutally conservative for wide bands: the induced `alpha` can
/// be so large that finite-horizon behavior is destroyed.  Callers who know
/// where the system actually operates can obtain a practical value through
/// [`suggest_alpha_with_density_floor`].
pub fn suggest_alpha_for_rate(
    config: &FirConfig,
    noise: &NoiseModel,
    delta_sq: f64,
    beta_bar: f64,
) -> Result<f64> {
    if !delta_sq.is_finite() {
        return Err(Error::NonFinite { name: "delta_sq", value: delta_sq });
    }
    if delta_sq <= 0.0 {
        return Err(Error::Excitation(format!(
            "excitation margin delta_sq must be positive, got {delta_sq}"
        )));
    }
    let lo = config.threshold() - config.cutoff_m();
    let hi = config.threshold() + config.cutoff_m();
    let floor = noise.pdf_min_on_interval(lo, hi)?;
    if floor < f64::MIN_POSITIVE {
        return Err(Error::Infeasible(format!(
            "density floor over [{lo}, {hi}] underflows to {floor}; the band is too wide \
             for a meaningful rate condition"
        )));
    }
    suggest_alpha_with_density_floor(floor, delta_sq, beta_bar, config.phi_bar(), RATE_MARGIN)
}

/// The rate-condition step scale for an explicitly supplied density floor.
///
/// Returns `margin * (1 + beta_bar * phi_bar^2) / (2 * floor * delta_sq)`,
/// clamped from below by [`MIN_SUGGESTED_ALPHA`].
pub fn suggest_alpha_with_density_floor(
    density_floor: f64,
    delta_sq: f64,
    beta_bar: f64,
    phi_bar: f64,
    margin: f64,
) -> Result<f64> {
    for (name, v) in [
        ("density_floor", density_floor),
        ("delta_sq", delta_sq),
        ("beta_bar", beta_bar),
        ("phi_bar", phi_bar),
        ("margin", margin),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite { name, value: v });
        }
        if v <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    if margin < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "margin must be at least 1, got {margin}"
        )));
    }
    let threshold_alpha = (1.0 + beta_bar * phi_bar * phi_bar) / (2.0 * density_floor * delta_sq);
    Ok((margin * threshold_alpha).max(MIN_SUGGESTED_ALPHA))
}
