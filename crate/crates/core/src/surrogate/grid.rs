//! Hyperparameter grid search: train every candidate on the hyperparameter
//! train split, score RMSE on the held-out test split, keep the argmin.
//! Winners are cached to a JSON file keyed by landscape digest, encoding,
//! and surrogate kind.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{
    predict, train, KernelType, SurrogateKind, SurrogateSpec, LEARNING_RATE_GRID, MAX_DEPTH_GRID,
    N_ESTIMATORS_GRID,
};
use crate::encoding::EncodingMatrix;
use crate::error::{Error, Result};
use crate::landscape::{Landscape, SplitPlan};
use crate::seeds;

/// Fit and query design matrices for one surrogate kind: forests see raw
/// encodings, everything else sees z-scores computed on the fit rows.
pub fn design_matrices(
    kind: SurrogateKind,
    encoding: &EncodingMatrix,
    fit_rows: &[usize],
    query_rows: &[usize],
) -> (Array2<f64>, Array2<f64>) {
    if kind == SurrogateKind::RandomForest {
        (encoding.gather(fit_rows), encoding.gather(query_rows))
    } else {
        let stats = encoding.stats(fit_rows);
        (
            encoding.gather_standardized(fit_rows, &stats),
            encoding.gather_standardized(query_rows, &stats),
        )
    }
}

/// Candidate specs in canonical order; ties in test RMSE resolve to the
/// earliest candidate, so smaller learning rates and the RBF kernel win.
pub fn candidate_specs(kind: SurrogateKind, base: &SurrogateSpec) -> Vec<SurrogateSpec> {
    let mut out = Vec::new();
    let mut push = |f: &dyn Fn(&mut SurrogateSpec)| {
        let mut spec = base.clone();
        spec.kind = kind;
        f(&mut spec);
        out.push(spec);
    };
    match kind {
        SurrogateKind::RandomForest => {
            for &n in &N_ESTIMATORS_GRID {
                for &depth in &MAX_DEPTH_GRID {
                    push(&move |s| {
                        s.n_estimators = n;
                        s.max_depth = depth;
                    });
                }
            }
        }
        SurrogateKind::Gp | SurrogateKind::DeepKernelGp => {
            for &lr in &LEARNING_RATE_GRID {
                for &kernel in &KernelType::ALL {
                    push(&move |s| {
                        s.learning_rate = lr;
                        s.kernel_type = kernel;
                    });
                }
            }
        }
        SurrogateKind::Bnn | SurrogateKind::DropoutNn | SurrogateKind::EnsembleNn => {
            for &lr in &LEARNING_RATE_GRID {
                push(&move |s| s.learning_rate = lr);
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub spec: SurrogateSpec,
    /// RMSE on the hyperparameter test split; absent for singleton grids,
    /// which skip the comparison.
    pub test_rmse: Option<f64>,
    pub n_evaluated: usize,
}

pub(crate) fn search_over(
    candidates: Vec<SurrogateSpec>,
    x_train: &Array2<f64>,
    y_train: &[f64],
    x_test: &Array2<f64>,
    y_test: &[f64],
    rng_seed: u64,
) -> Result<GridOutcome> {
    if candidates.is_empty() {
        return Err(Error::SearchFailed("empty candidate grid".into()));
    }
    if candidates.len() == 1 {
        return Ok(GridOutcome {
            spec: candidates.into_iter().next().unwrap(),
            test_rmse: None,
            n_evaluated: 0,
        });
    }
    let mut best: Option<(SurrogateSpec, f64)> = None;
    let mut evaluated = 0;
    let mut failures = Vec::new();
    for spec in candidates {
        let rmse = match train(&spec, x_train.view(), y_train, rng_seed)
            .and_then(|model| predict(&model, x_test.view()))
        {
            Ok(pred) => {
                let sse: f64 = pred
                    .mean
                    .iter()
                    .zip(y_test.iter())
                    .map(|(p, t)| (p - t) * (p - t))
                    .sum();
                (sse / y_test.len() as f64).sqrt()
            }
            Err(e) => {
                failures.push(e.to_string());
                continue;
            }
        };
        evaluated += 1;
        if !rmse.is_finite() {
            continue;
        }
        // Strict improvement keeps the earliest candidate on exact ties.
        if best.as_ref().is_none_or(|(_, b)| rmse < *b) {
            best = Some((spec, rmse));
        }
    }
    match best {
        Some((spec, rmse)) => Ok(GridOutcome {
            spec,
            test_rmse: Some(rmse),
            n_evaluated: evaluated,
        }),
        None => Err(Error::SearchFailed(format!(
            "every grid candidate diverged; first failure: {}",
            failures.first().map(String::as_str).unwrap_or("none")
        ))),
    }
}

/// Full grid search for one (surrogate kind, landscape, encoding) cell.
/// `base` supplies the non-searched hyperparameters.
pub fn grid_search(
    kind: SurrogateKind,
    landscape: &Landscape,
    split: &SplitPlan,
    encoding: &EncodingMatrix,
    base: &SurrogateSpec,
) -> Result<GridOutcome> {
    if split.hyperparam_train.is_empty() || split.hyperparam_test.is_empty() {
        return Err(Error::Size(
            "grid search needs nonempty hyperparameter splits".into(),
        ));
    }
    let (x_train, x_test) = design_matrices(
        kind,
        encoding,
        &split.hyperparam_train,
        &split.hyperparam_test,
    );
    let y_train: Vec<f64> = split
        .hyperparam_train
        .iter()
        .map(|&i| landscape.norm_fitness[i])
        .collect();
    let y_test: Vec<f64> = split
        .hyperparam_test
        .iter()
        .map(|&i| landscape.norm_fitness[i])
        .collect();
    // One shared training seed keeps the candidate comparison fair.
    let rng_seed = seeds::sub_seed(
        "grid-train",
        &format!("{}/{}", landscape.digest(), encoding.kind),
        &[kind as u64],
    );
    search_over(
        candidate_specs(kind, base),
        &x_train,
        &y_train,
        &x_test,
        &y_test,
        rng_seed,
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCacheEntry {
    pub landscape_digest: String,
    pub encoding: String,
    pub surrogate: String,
    pub spec: SurrogateSpec,
    pub test_rmse: Option<f64>,
}

/// On-disk winner cache; a JSON array of entries keyed by
/// (landscape digest, encoding, surrogate kind).
#[derive(Debug)]
pub struct GridCache {
    path: PathBuf,
    entries: HashMap<(String, String, String), GridCacheEntry>,
}

impl GridCache {
    /// Load an existing cache or start an empty one at `path`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let entries = if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            let list: Vec<GridCacheEntry> = serde_json::from_str(&text)
                .map_err(|e| Error::Store(format!("corrupt grid cache {}: {e}", path.display())))?;
            list.into_iter()
                .map(|e| {
                    (
                        (
                            e.landscape_digest.clone(),
                            e.encoding.clone(),
                            e.surrogate.clone(),
                        ),
                        e,
                    )
                })
                .collect()
        } else {
            HashMap::new()
        };
        Ok(Self { path, entries })
    }

    pub fn save(&self) -> Result<()> {
        let mut list: Vec<&GridCacheEntry> = self.entries.values().collect();
        list.sort_by(|a, b| {
            (&a.landscape_digest, &a.encoding, &a.surrogate).cmp(&(
                &b.landscape_digest,
                &b.encoding,
                &b.surrogate,
            ))
        });
        let text = serde_json::to_string_pretty(&list)?;
        if let Some(parent) = self.path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&self.path, text)?;
        Ok(())
    }

    pub fn get(&self, digest: &str, encoding: &str, surrogate: &str) -> Option<&GridCacheEntry> {
        self.entries.get(&(
            digest.to_string(),
            encoding.to_string(),
            surrogate.to_string(),
        ))
    }

    pub fn put(&mut self, entry: GridCacheEntry) {
        self.entries.insert(
            (
                entry.landscape_digest.clone(),
                entry.encoding.clone(),
                entry.surrogate.clone(),
            ),
            entry,
        );
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Cached grid search: return the stored winner when present, otherwise
/// search and record it. The caller decides when to `save`.
pub fn grid_search_cached(
    cache: &mut GridCache,
    kind: SurrogateKind,
    landscape: &Landscape,
    split: &SplitPlan,
    encoding: &EncodingMatrix,
    base: &SurrogateSpec,
) -> Result<(SurrogateSpec, bool)> {
    let enc_id = encoding.kind.to_string();
    if let Some(entry) = cache.get(landscape.digest(), &enc_id, kind.as_str()) {
        return Ok((entry.spec.clone(), true));
    }
    let outcome = grid_search(kind, landscape, split, encoding, base)?;
    cache.put(GridCacheEntry {
        landscape_digest: landscape.digest().to_string(),
        encoding: enc_id,
        surrogate: kind.as_str().to_string(),
        spec: outcome.spec.clone(),
        test_rmse: outcome.test_rmse,
    });
    Ok((outcome.spec, false))
}
