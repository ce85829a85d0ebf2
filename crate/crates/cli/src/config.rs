//! Experiment configuration file: a strict TOML format mirroring the
//! library's experiment description.
//!
//! The file has five sections — `[system]`, `[inputs]`, `[estimator]`,
//! `[experiment]`, and the optional `[noise]` and `[output]` — documented
//! field by field in the repository README. Unknown keys anywhere are
//! rejected with the offending key named, and keys that do not apply to
//! the selected input mode or estimator kind are rejected rather than
//! silently ignored.

use std::path::{Path, PathBuf};

use binid::harness::{EstimatorSpec, ExperimentSpec, InputSpec, SystemSpec};
use binid::noise::NoiseModel;
use serde::Deserialize;

/// Default standard deviation of the disturbance when `[noise]` is absent.
const DEFAULT_SIGMA: f64 = 1.0;

/// Whole configuration file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    /// System under identification.
    pub system: SystemSection,
    /// Disturbance model (optional; standard normal by default).
    #[serde(default)]
    pub noise: NoiseSection,
    /// Regressor source.
    pub inputs: InputsSection,
    /// Estimator selection and tuning.
    pub estimator: EstimatorSection,
    /// Horizon, run count, seeding, and recording.
    pub experiment: ExperimentSection,
    /// Output destination and worker count (optional).
    #[serde(default)]
    pub output: OutputSection,
}

/// `[system]` section.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    /// True parameter vector.
    pub theta: Vec<f64>,
    /// Sensor threshold.
    pub threshold: f64,
    /// Known bound on the parameter norm.
    pub theta_bar: f64,
    /// Known bound on the regressor norm.
    pub phi_bar: f64,
}

/// `[noise]` section.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Standard deviation of the zero-mean Gaussian disturbance.
    pub sigma: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { sigma: DEFAULT_SIGMA }
    }
}

/// `[inputs]` section. Which keys apply depends on `mode`:
/// `mode = "periodic"` and `mode = "explicit"` take `vectors`;
/// `mode = "iid_uniform"` takes `lo`, `hi`, and `dim`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputsSection {
    /// One of `periodic`, `iid_uniform`, `explicit`.
    pub mode: String,
    /// Regressor vectors (periodic / explicit modes).
    pub vectors: Option<Vec<Vec<f64>>>,
    /// Lower endpoint of the per-component uniform law (iid_uniform).
    pub lo: Option<f64>,
    /// Upper endpoint of the per-component uniform law (iid_uniform).
    pub hi: Option<f64>,
    /// Regressor dimension (iid_uniform).
    pub dim: Option<usize>,
}

/// `[estimator]` section. Which keys apply depends on `kind`:
/// `kind = "rpfi"` takes `alpha`, optional `beta` (default 1) and
/// `initial_r` (default 1); `kind = "impf"` takes optional
/// `initial_p_scale` (default 1); `kind = "projection_baseline"` takes
/// `alpha` and `radius`. Every kind requires `initial`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    /// One of `rpfi`, `impf`, `projection_baseline`.
    pub kind: String,
    /// Initial estimate.
    pub initial: Vec<f64>,
    /// Constant step scale (rpfi, projection_baseline).
    pub alpha: Option<f64>,
    /// Constant gain-denominator weight (rpfi).
    pub beta: Option<f64>,
    /// Starting gain denominator (rpfi).
    pub initial_r: Option<f64>,
    /// Initial gain matrix as a multiple of the identity (impf).
    pub initial_p_scale: Option<f64>,
    /// Projection radius (projection_baseline).
    pub radius: Option<f64>,
}

/// `[experiment]` section.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Name used in file names and metadata (default `experiment`).
    pub label: Option<String>,
    /// Observations per run.
    pub horizon: u64,
    /// Number of Monte-Carlo runs.
    pub runs: u64,
    /// Root seed of every random stream.
    pub base_seed: u64,
    /// Statistics are recorded at every multiple of this stride.
    pub record_stride: u64,
}

/// `[output]` section.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Directory that receives result files.
    pub dir: Option<PathBuf>,
    /// Worker threads for Monte-Carlo runs (0 = one per CPU).
    pub workers: Option<usize>,
}

/// Command-line overrides applied on top of a configuration file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    /// Replaces `[experiment] runs`.
    pub runs: Option<u64>,
    /// Replaces `[experiment] horizon`.
    pub horizon: Option<u64>,
    /// Replaces `[experiment] base_seed`.
    pub seed: Option<u64>,
    /// Replaces `[output] workers`.
    pub workers: Option<usize>,
}

impl InputsSection {
    fn reject_unused(&self, mode: &str, used: &[&str]) -> Result<(), String> {
        let present: [(&str, bool); 4] = [
            ("vectors", self.vectors.is_some()),
            ("lo", self.lo.is_some()),
            ("hi", self.hi.is_some()),
            ("dim", self.dim.is_some()),
        ];
        for (key, is_present) in present {
            if is_present && !used.contains(&key) {
                return Err(format!("input mode `{mode}` does not use key `{key}`"));
            }
        }
        Ok(())
    }

    /// Converts the section into the library's input description.
    pub fn to_spec(&self) -> Result<InputSpec, String> {
        match self.mode.as_str() {
            "periodic" => {
                self.reject_unused("periodic", &["vectors"])?;
                let vectors = self
                    .vectors
                    .clone()
                    .ok_or("input mode `periodic` requires key `vectors`")?;
                Ok(InputSpec::Periodic { vectors })
            }
            "explicit" => {
                self.reject_unused("explicit", &["vectors"])?;
                let vectors = self
                    .vectors
                    .clone()
                    .ok_or("input mode `explicit` requires key `vectors`")?;
                Ok(InputSpec::Explicit { vectors })
            }
            "iid_uniform" => {
                self.reject_unused("iid_uniform", &["lo", "hi", "dim"])?;
                let lo = self.lo.ok_or("input mode `iid_uniform` requires key `lo`")?;
                let hi = self.hi.ok_or("input mode `iid_uniform` requires key `hi`")?;
                let dim = self.dim.ok_or("input mode `iid_uniform` requires key `dim`")?;
                Ok(InputSpec::IidUniform { lo, hi, dim })
            }
            other => Err(format!(
                "unknown input mode `{other}`; expected `periodic`, `iid_uniform`, or `explicit`"
            )),
        }
    }
}

impl EstimatorSection {
    fn reject_unused(&self, kind: &str, used: &[&str]) -> Result<(), String> {
        let present: [(&str, bool); 5] = [
            ("alpha", self.alpha.is_some()),
            ("beta", self.beta.is_some()),
            ("initial_r", self.initial_r.is_some()),
            ("initial_p_scale", self.initial_p_scale.is_some()),
            ("radius", self.radius.is_some()),
        ];
        for (key, is_present) in present {
            if is_present && !used.contains(&key) {
                return Err(format!("estimator kind `{kind}` does not use key `{key}`"));
            }
        }
        Ok(())
    }

    /// Converts the section into the library's estimator description.
    pub fn to_spec(&self) -> Result<EstimatorSpec, String> {
        match self.kind.as_str() {
            "rpfi" => {
                self.reject_unused("rpfi", &["alpha", "beta", "initial_r"])?;
                let alpha = self.alpha.ok_or("estimator kind `rpfi` requires key `alpha`")?;
                Ok(EstimatorSpec::Rpfi {
                    alpha,
                    beta: self.beta.unwrap_or(1.0),
                    initial: self.initial.clone(),
                    initial_r: self.initial_r.unwrap_or(1.0),
                })
            }
            "impf" => {
                self.reject_unused("impf", &["initial_p_scale"])?;
                Ok(EstimatorSpec::Impf {
                    initial: self.initial.clone(),
                    initial_p_scale: self.initial_p_scale.unwrap_or(1.0),
                })
            }
            "projection_baseline" => {
                self.reject_unused("projection_baseline", &["alpha", "radius"])?;
                let alpha = self
                    .alpha
                    .ok_or("estimator kind `projection_baseline` requires key `alpha`")?;
                let radius = self
                    .radius
                    .ok_or("estimator kind `projection_baseline` requires key `radius`")?;
                Ok(EstimatorSpec::ProjectionBaseline {
                    alpha,
                    initial: self.initial.clone(),
                    radius,
                })
            }
            other => Err(format!(
                "unknown estimator kind `{other}`; expected `rpfi`, `impf`, or \
                 `projection_baseline`"
            )),
        }
    }
}

impl CliConfig {
    /// Parses a configuration from TOML text.
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads and parses a configuration file.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config `{}`: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("config `{}`: {e}", path.display()))
    }

    /// Builds the library experiment description, applying overrides.
    pub fn to_experiment_spec(&self, overrides: &Overrides) -> Result<ExperimentSpec, String> {
        let noise = NoiseModel::gaussian(self.noise.sigma).map_err(|e| e.to_string())?;
        let spec = ExperimentSpec {
            label: self.experiment.label.clone().unwrap_or_else(|| "experiment".to_string()),
            system: SystemSpec {
                theta: self.system.theta.clone(),
                threshold: self.system.threshold,
                theta_bar: self.system.theta_bar,
                phi_bar: self.system.phi_bar,
            },
            inputs: self.inputs.to_spec()?,
            noise,
            estimator: self.estimator.to_spec()?,
            horizon: overrides.horizon.unwrap_or(self.experiment.horizon),
            runs: overrides.runs.unwrap_or(self.experiment.runs),
            base_seed: overrides.seed.unwrap_or(self.experiment.base_seed),
            record_stride: self.experiment.record_stride.min(
                overrides.horizon.unwrap_or(self.experiment.horizon).max(1),
            ),
        };
        Ok(spec)
    }

    /// Worker count after overrides (0 = one per CPU).
    pub fn workers(&self, overrides: &Overrides) -> usize {
        overrides.workers.or(self.output.workers).unwrap_or(0)
    }
}

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "BINID_OUT_DIR";

/// Resolves the output directory: explicit flag, then the environment
/// variable, then the config's `[output] dir`, then `./binid-out`.
pub fn resolve_out_dir(flag: Option<&Path>, config_dir: Option<&Path>) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV)
        && !dir.is_empty()
    {
        return PathBuf::from(dir);
    }
    if let Some(dir) = config_dir {
        return dir.to_path_buf();
    }
    PathBuf::from("binid-out")
}
