//! Uncertainty-aware regressors behind a uniform train/predict contract:
//! random forest, exact GP, deep kernel GP, variational BNN, MC-dropout
//! network, and a deep ensemble.

pub mod dkgp;
pub mod forest;
pub mod gp;
pub mod grid;
pub mod mlp;
pub mod optimizer;

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
pub use dkgp::DeepKernelGpModel;
pub use forest::ForestModel;
pub use gp::GpModel;
pub use mlp::{BnnModel, DropoutNnModel, EnsembleModel};
pub use optimizer::ScheduleFreeAdam;

/// One-line `Display` impl from `as_str`; used by the id-composing enums.
macro_rules! fmt_as_str {
    () => {
        fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            f.write_str(self.as_str())
        }
    };
}

/// Searchable learning-rate grid shared by all gradient-trained kinds.
pub const LEARNING_RATE_GRID: [f64; 7] = [1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1];
/// Searchable tree counts for the random forest.
pub const N_ESTIMATORS_GRID: [usize; 4] = [10, 50, 100, 200];
/// Searchable depth caps for the random forest.
pub const MAX_DEPTH_GRID: [Option<usize>; 2] = [None, Some(10)];
/// Fixed ensemble size.
pub const ENSEMBLE_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    RandomForest,
    Gp,
    DeepKernelGp,
    Bnn,
    DropoutNn,
    EnsembleNn,
}

impl SurrogateKind {
    pub const ALL: [SurrogateKind; 6] = [
        SurrogateKind::RandomForest,
        SurrogateKind::Gp,
        SurrogateKind::DeepKernelGp,
        SurrogateKind::Bnn,
        SurrogateKind::DropoutNn,
        SurrogateKind::EnsembleNn,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SurrogateKind::RandomForest => "random_forest",
            SurrogateKind::Gp => "gp",
            SurrogateKind::DeepKernelGp => "deep_kernel_gp",
            SurrogateKind::Bnn => "bnn",
            SurrogateKind::DropoutNn => "dropout_nn",
            SurrogateKind::EnsembleNn => "ensemble_nn",
        }
    }

    /// Whether training runs the gradient optimizer (and so uses the
    /// learning-rate grid).
    pub fn uses_learning_rate(&self) -> bool {
        !matches!(self, SurrogateKind::RandomForest)
    }

    pub fn uses_kernel(&self) -> bool {
        matches!(self, SurrogateKind::Gp | SurrogateKind::DeepKernelGp)
    }
}

impl std::fmt::Display for SurrogateKind {
    fmt_as_str!();
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelType {
    Rbf,
    #[serde(rename = "matern")]
    Matern52,
}

impl KernelType {
    pub const ALL: [KernelType; 2] = [KernelType::Rbf, KernelType::Matern52];

    pub fn as_str(&self) -> &'static str {
        match self {
            KernelType::Rbf => "rbf",
            KernelType::Matern52 => "matern",
        }
    }
}

impl std::fmt::Display for KernelType {
    fmt_as_str!();
}

/// Hyperparameter bundle for one surrogate. Searched fields (learning
/// rate, kernel, forest shape) must sit on the published grid; the
/// architectural constants default to the benchmark values but may be
/// resized for small studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    pub learning_rate: f64,
    pub kernel_type: KernelType,
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub kl_weight: f64,
    pub mc_samples: usize,
    pub epochs: usize,
    pub batch_size: usize,
}

impl SurrogateSpec {
    pub fn defaults(kind: SurrogateKind) -> Self {
        Self {
            kind,
            learning_rate: 1e-3,
            kernel_type: KernelType::Rbf,
            n_estimators: if kind == SurrogateKind::EnsembleNn {
                ENSEMBLE_SIZE
            } else {
                100
            },
            max_depth: None,
            hidden_dim: 128,
            dropout: 0.1,
            kl_weight: 1.0,
            mc_samples: 30,
            epochs: 100,
            batch_size: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let on_grid = |v: f64| LEARNING_RATE_GRID.iter().any(|g| (g - v).abs() < 1e-15);
        if self.kind.uses_learning_rate() && !on_grid(self.learning_rate) {
            return Err(Error::Config(format!(
                "learning_rate {} is off the search grid {:?}",
                self.learning_rate, LEARNING_RATE_GRID
            )));
        }
        match self.kind {
            SurrogateKind::RandomForest => {
                if !N_ESTIMATORS_GRID.contains(&self.n_estimators) {
                    return Err(Error::Config(format!(
                        "n_estimators {} is off the search grid {:?}",
                        self.n_estimators, N_ESTIMATORS_GRID
                    )));
                }
                if !MAX_DEPTH_GRID.contains(&self.max_depth) {
                    return Err(Error::Config(format!(
                        "max_depth {:?} is off the search grid {:?}",
                        self.max_depth, MAX_DEPTH_GRID
                    )));
                }
            }
            SurrogateKind::EnsembleNn if self.n_estimators != ENSEMBLE_SIZE => {
                return Err(Error::Config(format!(
                    "ensemble size is fixed at {ENSEMBLE_SIZE}, got {}",
                    self.n_estimators
                )));
            }
            _ => {}
        }
        if self.hidden_dim == 0 || self.mc_samples == 0 || self.epochs == 0 || self.batch_size == 0
        {
            return Err(Error::Config(
                "hidden_dim, mc_samples, epochs, and batch_size must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} must lie in [0, 1)",
                self.dropout
            )));
        }
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return Err(Error::Config(format!(
                "kl_weight {} must be finite and nonnegative",
                self.kl_weight
            )));
        }
        Ok(())
    }

    /// Build a spec from a key/value map, starting from kind defaults;
    /// unknown keys are rejected.
    pub fn from_params(
        kind: SurrogateKind,
        params: &BTreeMap<String, serde_json::Value>,
    ) -> Result<Self> {
        use serde_json::Value;
        let mut spec = Self::defaults(kind);
        let as_f64 = |key: &str, v: &Value| {
            v.as_f64()
                .ok_or_else(|| Error::Config(format!("{key} must be a number, got {v}")))
        };
        let as_usize = |key: &str, v: &Value| {
            v.as_u64().map(|u| u as usize).ok_or_else(|| {
                Error::Config(format!("{key} must be a nonnegative integer, got {v}"))
            })
        };
        for (key, value) in params {
            match key.as_str() {
                "learning_rate" => spec.learning_rate = as_f64(key, value)?,
                "kernel_type" => {
                    spec.kernel_type = match value.as_str() {
                        Some("rbf") => KernelType::Rbf,
                        Some("matern") => KernelType::Matern52,
                        _ => {
                            return Err(Error::Config(format!(
                                "kernel_type must be \"rbf\" or \"matern\", got {value}"
                            )))
                        }
                    }
                }
                "n_estimators" => spec.n_estimators = as_usize(key, value)?,
                "max_depth" => {
                    spec.max_depth = if value.is_null() {
                        None
                    } else {
                        Some(as_usize(key, value)?)
                    }
                }
                "hidden_dim" => spec.hidden_dim = as_usize(key, value)?,
                "dropout" => spec.dropout = as_f64(key, value)?,
                "kl_weight" => spec.kl_weight = as_f64(key, value)?,
                "mc_samples" => spec.mc_samples = as_usize(key, value)?,
                "epochs" => spec.epochs = as_usize(key, value)?,
                "batch_size" => spec.batch_size = as_usize(key, value)?,
                other => {
                    return Err(Error::Config(format!(
                        "unknown surrogate hyperparameter '{other}'"
                    )))
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Posterior mean and standard deviation per candidate row.
#[derive(Debug, Clone)]
pub struct PosteriorPrediction {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl PosteriorPrediction {
    pub fn new(mean: Array1<f64>, std: Array1<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::Shape {
                expected: mean.len(),
                got: std.len(),
            });
        }
        for (m, s) in mean.iter().zip(std.iter()) {
            if !m.is_finite() || !s.is_finite() || *s < 0.0 {
                return Err(Error::Degenerate(format!(
                    "non-finite or negative posterior (mu={m}, sigma={s})"
                )));
            }
        }
        Ok(Self { mean, std })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

#[derive(Debug, Clone)]
pub enum TrainedSurrogate {
    Forest(ForestModel),
    Gp(GpModel),
    DeepKernel(DeepKernelGpModel),
    Bnn(BnnModel),
    Dropout(DropoutNnModel),
    Ensemble(EnsembleModel),
}

/// Train a surrogate; deterministic given (spec, data, seed).
pub fn train(
    spec: &SurrogateSpec,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    rng_seed: u64,
) -> Result<TrainedSurrogate> {
    if x.nrows() != y.len() {
        return Err(Error::Size(format!(
            "{} rows vs {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::Size(format!(
            "training needs at least 2 points, got {}",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite training label".into()));
    }
    let model = match spec.kind {
        SurrogateKind::RandomForest => TrainedSurrogate::Forest(forest::train_forest(
            x,
            y,
            spec.n_estimators,
            spec.max_depth,
            rng_seed,
        )?),
        SurrogateKind::Gp => TrainedSurrogate::Gp(gp::train_gp(
            x,
            y,
            spec.kernel_type,
            spec.learning_rate,
            spec.epochs,
        )?),
        SurrogateKind::DeepKernelGp => TrainedSurrogate::DeepKernel(dkgp::train_deep_kernel_gp(
            x,
            y,
            spec.kernel_type,
            spec.hidden_dim,
            spec.learning_rate,
            spec.epochs,
            rng_seed,
        )?),
        SurrogateKind::Bnn => TrainedSurrogate::Bnn(mlp::train_bnn(
            x,
            y,
            spec.hidden_dim,
            spec.epochs,
            spec.batch_size,
            spec.learning_rate,
            spec.kl_weight,
            spec.mc_samples,
            rng_seed,
        )?),
        SurrogateKind::DropoutNn => TrainedSurrogate::Dropout(mlp::train_dropout_nn(
            x,
            y,
            spec.hidden_dim,
            spec.epochs,
            spec.batch_size,
            spec.learning_rate,
            spec.dropout,
            spec.mc_samples,
            rng_seed,
        )?),
        SurrogateKind::EnsembleNn => TrainedSurrogate::Ensemble(mlp::train_ensemble(
            x,
            y,
            spec.hidden_dim,
            spec.n_estimators,
            spec.epochs,
            spec.batch_size,
            spec.learning_rate,
            rng_seed,
        )?),
    };
    Ok(model)
}

/// Posterior prediction at the given rows.
pub fn predict(model: &TrainedSurrogate, x: ArrayView2<'_, f64>) -> Result<PosteriorPrediction> {
    let (mean, std) = match model {
        TrainedSurrogate::Forest(m) => m.predict(x)?,
        TrainedSurrogate::Gp(m) => m.predict(x)?,
        TrainedSurrogate::DeepKernel(m) => m.predict(x)?,
        TrainedSurrogate::Bnn(m) => m.predict(x)?,
        TrainedSurrogate::Dropout(m) => m.predict(x)?,
        TrainedSurrogate::Ensemble(m) => m.predict(x)?,
    };
    PosteriorPrediction::new(mean, std)
}
