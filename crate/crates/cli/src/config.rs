//! Run configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use balanced_core::continuation::{ContinuationConfig, NewtonConfig, NewtonMethod, Predictor};
use balanced_core::flat::FlatKahler;
use balanced_core::hermitian::{HermitianMetric, HolVolForm};
use balanced_core::linearized::Background;
use balanced_core::math::TAU;
use balanced_core::{sample, Axis, Lattice, C64};
use serde::{Deserialize, Serialize};

use crate::rng::Uniform;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{file}: {source}")]
    Io { file: PathBuf, source: std::io::Error },
    #[error("{file}: {message}")]
    Parse { file: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub rank: usize,
    pub lattice: LatticeConfig,
    pub background: BackgroundConfig,
    pub verify: VerifyConfig,
    pub linearize: LinearizeConfig,
    pub residual: ResidualConfig,
    pub squareroot: SquareRootConfig,
    pub solve: SolveConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            rank: 2,
            lattice: LatticeConfig::default(),
            background: BackgroundConfig::default(),
            verify: VerifyConfig::default(),
            linearize: LinearizeConfig::default(),
            residual: ResidualConfig::default(),
            squareroot: SquareRootConfig::default(),
            solve: SolveConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub points: usize,
    pub axes: Vec<String>,
    pub periods: [f64; 6],
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig { points: 8, axes: vec!["x1".into(), "y2".into()], periods: [TAU; 6] }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MetricChoice {
    /// `ĝ = I`.
    Identity,
    /// A random constant positive metric drawn from the seed.
    Random,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BackgroundConfig {
    pub metric: MetricChoice,
    /// `Ω = f dz¹∧dz²∧dz³`, as `[re, im]`.
    pub omega: [f64; 2],
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        BackgroundConfig { metric: MetricChoice::Identity, omega: [1.0, 0.0] }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Identity residual tolerance (max norm).
    pub tolerance: f64,
    /// Test fixture: multiply the contraction by 2 inside the battery.
    pub fault_lambda_scale: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { tolerance: 1e-9, fault_lambda_scale: false }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LinearizeConfig {
    pub steps: Vec<f64>,
    /// Number of random block round trips.
    pub samples: usize,
}

impl Default for LinearizeConfig {
    fn default() -> Self {
        LinearizeConfig { steps: vec![1e-2, 5e-3, 2.5e-3], samples: 20 }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ResidualConfig {
    /// State container; the flat zero state when absent.
    pub state: Option<PathBuf>,
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SquareRootConfig {
    /// Container holding the positive `(2,2)`-form; when absent, `|Ω|_ω̂ ω̂²` of the background.
    pub input: Option<PathBuf>,
    pub record: String,
}

impl Default for SquareRootConfig {
    fn default() -> Self {
        SquareRootConfig { input: None, record: "psi".into() }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    Chord,
    Krylov,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorChoice {
    Previous,
    Secant,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub alpha_start: f64,
    pub alpha_target: f64,
    pub step: f64,
    pub min_step: f64,
    pub shrink: f64,
    pub grow: f64,
    pub predictor: PredictorChoice,
    pub method: MethodChoice,
    pub krylov_restart: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub positivity_floor: f64,
    pub epsilon: f64,
    pub manufactured: bool,
    pub amplitude: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            alpha_start: 0.0,
            alpha_target: 1e-2,
            step: 2.5e-3,
            min_step: 1e-8,
            shrink: 0.5,
            grow: 1.5,
            predictor: PredictorChoice::Secant,
            method: MethodChoice::Krylov,
            krylov_restart: 30,
            newton_tol: 1e-9,
            max_newton_iters: 25,
            positivity_floor: 0.0,
            epsilon: 0.1,
            manufactured: true,
            amplitude: 1e-2,
        }
    }
}

impl SolveConfig {
    pub fn continuation(&self) -> ContinuationConfig {
        ContinuationConfig {
            alpha_start: self.alpha_start,
            alpha_target: self.alpha_target,
            step: self.step,
            shrink: self.shrink,
            grow: self.grow,
            min_step: self.min_step,
            predictor: match self.predictor {
                PredictorChoice::Previous => Predictor::Previous,
                PredictorChoice::Secant => Predictor::Secant,
            },
            newton: NewtonConfig {
                tol: self.newton_tol,
                max_iters: self.max_newton_iters,
                method: match self.method {
                    MethodChoice::Chord => NewtonMethod::Chord,
                    MethodChoice::Krylov => NewtonMethod::Krylov { restart: self.krylov_restart, max_restarts: 4 },
                },
                positivity_floor: self.positivity_floor,
            },
            epsilon: self.epsilon,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, file: &Path) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { file: file.to_path_buf(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { file: path.to_path_buf(), source })?;
        RunConfig::from_toml(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.lattice()?;
        if !(1..=4).contains(&self.rank) {
            return Err(ConfigError::Invalid(format!("rank {} outside 1..=4", self.rank)));
        }
        if self.background.omega == [0.0, 0.0] {
            return Err(ConfigError::Invalid("omega must be nonzero".into()));
        }
        if !(self.verify.tolerance > 0.0) {
            return Err(ConfigError::Invalid("verify.tolerance must be positive".into()));
        }
        if self.linearize.steps.len() < 2 || self.linearize.steps.iter().any(|&h| !(h > 0.0)) {
            return Err(ConfigError::Invalid("linearize.steps needs at least two positive steps".into()));
        }
        if !(self.solve.amplitude >= 0.0) || self.solve.krylov_restart == 0 {
            return Err(ConfigError::Invalid("solve.amplitude must be nonnegative and krylov_restart positive".into()));
        }
        self.solve.continuation().validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn lattice(&self) -> Result<Lattice, ConfigError> {
        let axes = self
            .lattice
            .axes
            .iter()
            .map(|a| Axis::parse(a).ok_or_else(|| ConfigError::Invalid(format!("unknown axis {a:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if axes.is_empty() {
            return Err(ConfigError::Invalid("at least one active axis".into()));
        }
        Lattice::with_axes(self.lattice.points, &axes)
            .and_then(|l| l.with_periods(self.lattice.periods))
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Flat background for the configured lattice, metric choice and rank.
    pub fn background(&self, seed: u64) -> Result<Background, ConfigError> {
        let l = self.lattice()?;
        let g = match self.background.metric {
            MetricChoice::Identity => HermitianMetric::identity(l),
            MetricChoice::Random => sample::constant_metric(l, &mut Uniform::new(seed ^ 0x6d65_7472).source()),
        };
        let [re, im] = self.background.omega;
        let inv = |e: balanced_core::Error| ConfigError::Invalid(e.to_string());
        let omega = HolVolForm::new(C64::new(re, im)).map_err(inv)?;
        Background::new(FlatKahler::new(&g, omega).map_err(inv)?, self.rank).map_err(inv)
    }
}
