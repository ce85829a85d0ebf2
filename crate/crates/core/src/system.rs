//! The plant, its binary sensor, and the regressor sequences that drive it.
//!
//! The system under identification is `y_k = phi_k' theta + d_k` observed
//! as `s_k = 1{y_k <= C}`.  A [`FirConfig`] bundles the true parameter with
//! the prior bounds the estimators are allowed to rely on: a ball radius
//! `theta_bar` for the parameter and a norm cap `phi_bar` for the
//! regressors.  Those two bounds induce the prediction band
//! `M = phi_bar * theta_bar + 2` used by the recursive estimators.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

/// Width added to `phi_bar * theta_bar` when deriving the prediction band.
pub const CUTOFF_MARGIN: f64 = 2.0;

/// A linear FIR plant behind a binary threshold sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FirConfig {
    theta: DVector<f64>,
    threshold: f64,
    theta_bar: f64,
    phi_bar: f64,
    cutoff_m: f64,
}

impl FirConfig {
    /// Validates and builds a system description.
    ///
    /// Requires a nonempty finite `theta` with `||theta|| <= theta_bar`,
    /// positive finite `theta_bar` and `phi_bar`, and a finite sensor
    /// `threshold`.  The prediction band `cutoff_m` is derived, never
    /// supplied.
    pub fn new(
        theta: DVector<f64>,
        threshold: f64,
        theta_bar: f64,
        phi_bar: f64,
    ) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidArgument(
                "theta must have at least one coefficient".into(),
            ));
        }
        for &v in theta.iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { name: "theta entry", value: v });
            }
        }
        if !threshold.is_finite() {
            return Err(Error::NonFinite { name: "threshold", value: threshold });
        }
        for (name, v) in [("theta_bar", theta_bar), ("phi_bar", phi_bar)] {
            if !v.is_finite() {
                return Err(Error::NonFinite { name, value: v });
            }
            if v <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let norm = theta.norm();
        if norm > theta_bar {
            return Err(Error::InvalidArgument(format!(
                "||theta|| = {norm} exceeds the prior bound theta_bar = {theta_bar}"
            )));
        }
        let cutoff_m = phi_bar * theta_bar + CUTOFF_MARGIN;
        Ok(Self { theta, threshold, theta_bar, phi_bar, cutoff_m })
    }

    /// Number of FIR coefficients.
    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// True parameter vector.
    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    /// Sensor threshold `C`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Prior bound on `||theta||`.
    pub fn theta_bar(&self) -> f64 {
        self.theta_bar
    }

    /// Prior bound on `||phi_k||`.
    pub fn phi_bar(&self) -> f64 {
        self.phi_bar
    }

    /// Prediction band `M = phi_bar * theta_bar + 2`.
    pub fn cutoff_m(&self) -> f64 {
        self.cutoff_m
    }
}

/// One step of the plant plus sensor: returns the inner output
/// `y = phi' theta + noise_draw` and the binary observation `s = (y <= C)`.
///
/// Ties (`y == C`) report `true`, matching the sensor convention
/// `s = 1{y <= C}`.
pub fn observe(config: &FirConfig, phi: &DVector<f64>, noise_draw: f64) -> Result<(f64, bool)> {
    if phi.len() != config.dim() {
        return Err(Error::DimensionMismatch { expected: config.dim(), got: phi.len() });
    }
    if !noise_draw.is_finite() {
        return Err(Error::NonFinite { name: "noise_draw", value: noise_draw });
    }
    let y = config.theta.dot(phi) + noise_draw;
    Ok((y, y <= config.threshold))
}

/// How the regressor sequence is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum InputMode {
    /// Cycles through a fixed list of vectors.
    Periodic(Vec<DVector<f64>>),
    /// Each component drawn independently from the open interval
    /// `(lo, hi)`.
    IidUniform { lo: f64, hi: f64, dim: usize },
    /// A finite, explicitly supplied sequence.
    Explicit(Vec<DVector<f64>>),
}

/// A validated regressor source with its norm cap.
///
/// Every vector the generator can ever produce satisfies
/// `||phi|| <= phi_bar`; the constructors reject sources that could violate
/// the cap.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGenerator {
    mode: InputMode,
    phi_bar: f64,
}

fn validate_vectors(vectors: &[DVector<f64>], phi_bar: f64, label: &str) -> Result<usize> {
    if vectors.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{label} input list must not be empty"
        )));
    }
    let dim = vectors[0].len();
    if dim == 0 {
        return Err(Error::InvalidArgument(format!(
            "{label} input vectors must have at least one component"
        )));
    }
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
        for &x in v.iter() {
            if !x.is_finite() {
                return Err(Error::NonFinite { name: "input entry", value: x });
            }
        }
        let norm = v.norm();
        if norm > phi_bar {
            return Err(Error::InvalidArgument(format!(
                "{label} input {i} has norm {norm}, exceeding phi_bar = {phi_bar}"
            )));
        }
    }
    Ok(dim)
}

fn validate_phi_bar(phi_bar: f64) -> Result<()> {
    if !phi_bar.is_finite() {
        return Err(Error::NonFinite { name: "phi_bar", value: phi_bar });
    }
    if phi_bar <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "phi_bar must be positive, got {phi_bar}"
        )));
    }
    Ok(())
}

impl InputGenerator {
    /// Periodic source cycling through `vectors`.
    pub fn periodic(vectors: Vec<DVector<f64>>, phi_bar: f64) -> Result<Self> {
        validate_phi_bar(phi_bar)?;
        validate_vectors(&vectors, phi_bar, "periodic")?;
        Ok(Self { mode: InputMode::Periodic(vectors), phi_bar })
    }

    /// I.i.d. source with each component uniform on the open interval
    /// `(lo, hi)`.
    ///
    /// The worst-case vector norm `sqrt(dim) * max(|lo|, |hi|)` must not
    /// exceed `phi_bar`.
    pub fn iid_uniform(lo: f64, hi: f64, dim: usize, phi_bar: f64) -> Result<Self> {
        validate_phi_bar(phi_bar)?;
        for (name, v) in [("lo", lo), ("hi", hi)] {
            if !v.is_finite() {
                return Err(Error::NonFinite { name, value: v });
            }
        }
        if lo >= hi {
            return Err(Error::InvalidArgument(format!(
                "uniform interval must have lo < hi, got ({lo}, {hi})"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "input dimension must be at least 1".into(),
            ));
        }
        let corner = (dim as f64).sqrt() * lo.abs().max(hi.abs());
        if corner > phi_bar {
            return Err(Error::InvalidArgument(format!(
                "worst-case input norm {corner} exceeds phi_bar = {phi_bar}"
            )));
        }
        Ok(Self { mode: InputMode::IidUniform { lo, hi, dim }, phi_bar })
    }

    /// Finite explicit source.
    pub fn explicit(vectors: Vec<DVector<f64>>, phi_bar: f64) -> Result<Self> {
        validate_phi_bar(phi_bar)?;
        validate_vectors(&vectors, phi_bar, "explicit")?;
        Ok(Self { mode: InputMode::Explicit(vectors), phi_bar })
    }

    /// Reads an explicit source from a CSV file with header
    /// `phi_1,...,phi_n` and one regressor per subsequent row.
    pub fn from_csv<P: AsRef<Path>>(path: P, phi_bar: f64) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        let mut lines = std::io::BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("input CSV is empty".into()))??;
        let columns: Vec<&str> = header.trim().split(',').collect();
        let dim = columns.len();
        for (i, col) in columns.iter().enumerate() {
            let expected = format!("phi_{}", i + 1);
            if col.trim() != expected {
                return Err(Error::Parse(format!(
                    "input CSV header column {} is '{}', expected '{}'",
                    i + 1,
                    col.trim(),
                    expected
                )));
            }
        }
        let mut vectors = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != dim {
                return Err(Error::Parse(format!(
                    "input CSV row {} has {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    dim
                )));
            }
            let mut v = DVector::zeros(dim);
            for (j, field) in fields.iter().enumerate() {
                v[j] = field.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!(
                        "input CSV row {} column {}: {e}",
                        lineno + 2,
                        j + 1
                    ))
                })?;
            }
            vectors.push(v);
        }
        Self::explicit(vectors, phi_bar)
    }

    /// Regressor dimension.
    pub fn dim(&self) -> usize {
        match &self.mode {
            InputMode::Periodic(v) | InputMode::Explicit(v) => v[0].len(),
            InputMode::IidUniform { dim, .. } => *dim,
        }
    }

    /// Norm cap shared by every produced vector.
    pub fn phi_bar(&self) -> f64 {
        self.phi_bar
    }

    /// Underlying mode.
    pub fn mode(&self) -> &InputMode {
        &self.mode
    }

    /// Produces the first `count` regressors of the sequence.
    ///
    /// Periodic and explicit sources ignore the generator; the i.i.d.
    /// source consumes it and rejects draws landing exactly on an interval
    /// endpoint so the interval stays open.  An explicit source with fewer
    /// than `count` vectors fails with [`Error::SequenceExhausted`].
    pub fn generate<R: Rng + ?Sized>(
        &self,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<DVector<f64>>> {
        match &self.mode {
            InputMode::Periodic(vectors) => Ok((0..count)
                .map(|k| vectors[k % vectors.len()].clone())
                .collect()),
            InputMode::Explicit(vectors) => {
                if count > vectors.len() {
                    return Err(Error::SequenceExhausted {
                        requested: count,
                        available: vectors.len(),
                    });
                }
                Ok(vectors[..count].to_vec())
            }
            InputMode::IidUniform { lo, hi, dim } => {
                let mut out = Vec::with_capacity(count);
                for _ in 0..count {
                    let mut v = DVector::zeros(*dim);
                    for j in 0..*dim {
                        v[j] = loop {
                            let draw = rng.random_range(*lo..*hi);
                            if draw != *lo {
                                break draw;
                            }
                        };
                    }
                    out.push(v);
                }
                Ok(out)
            }
        }
    }
}

/// Persistent-excitation margin of a regressor sequence.
///
/// Returns the infimum, over every window of `window` consecutive
/// regressors contained in `inputs`, of the smallest eigenvalue of the
/// averaged Gram matrix `(1/window) * sum phi_i phi_i'`.  A positive result
/// is the `delta^2` appearing in the estimators' convergence conditions;
/// zero means some direction of parameter space goes unexcited.
pub fn check_persistent_excitation(inputs: &[DVector<f64>], window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    if inputs.len() < window {
        return Err(Error::InvalidArgument(format!(
            "window {} exceeds sequence length {}",
            window,
            inputs.len()
        )));
    }
    let dim = inputs[0].len();
    for v in inputs {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
    }
    let scale = 1.0 / window as f64;
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    for v in &inputs[..window] {
        gram.ger(scale, v, v, 1.0);
    }
    let mut infimum = f64::INFINITY;
    let mut start = 0usize;
    loop {
        let lambda_min = gram
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        infimum = infimum.min(lambda_min);
        if start + window >= inputs.len() {
            break;
        }
        // Slide the window: drop the leaving vector, add the entering one.
        gram.ger(-scale, &inputs[start], &inputs[start], 1.0);
        gram.ger(scale, &inputs[start + window], &inputs[start + window], 1.0);
        start += 1;
    }
    // The Gram average is positive semidefinite; tiny negative eigenvalues
    // are rounding artifacts.
    Ok(infimum.max(0.0))
}
