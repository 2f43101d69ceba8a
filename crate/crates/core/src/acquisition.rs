//! Acquisition scoring and batch selection over a candidate pool.
//!
//! All four rules map a posterior prediction to one score per candidate;
//! [`select_batch`] then takes the top scores in a single shot, with exact
//! ties broken uniformly at random under a dedicated seed. There is no
//! fantasization: a batch is chosen from one scoring pass.

use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;
use crate::surrogate::PosteriorPrediction;

/// Default exploration margin for expected improvement.
pub const DEFAULT_XI: f64 = 0.01;
/// Default confidence-bound width.
pub const DEFAULT_BETA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    Ei,
    Ucb,
    Thompson,
    Greedy,
}

impl AcquisitionKind {
    pub const ALL: [AcquisitionKind; 4] = [
        AcquisitionKind::Ei,
        AcquisitionKind::Ucb,
        AcquisitionKind::Thompson,
        AcquisitionKind::Greedy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AcquisitionKind::Ei => "ei",
            AcquisitionKind::Ucb => "ucb",
            AcquisitionKind::Thompson => "thompson",
            AcquisitionKind::Greedy => "greedy",
        }
    }
}

impl std::fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AcquisitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AcquisitionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown acquisition '{s}'")))
    }
}

/// Scoring rule plus its tuning constants. `rng_seed` is only consulted by
/// Thompson sampling; campaigns override it per cycle so each draw is fresh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub kind: AcquisitionKind,
    pub xi: f64,
    pub beta: f64,
    pub rng_seed: u64,
}

impl AcquisitionSpec {
    pub fn new(kind: AcquisitionKind) -> Self {
        AcquisitionSpec {
            kind,
            xi: DEFAULT_XI,
            beta: DEFAULT_BETA,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.xi < 0.0 || self.xi.is_nan() {
            return Err(Error::Config(format!("xi must be >= 0, got {}", self.xi)));
        }
        if self.beta < 0.0 || self.beta.is_nan() {
            return Err(Error::Config(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn norm_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected improvement over the incumbent `f_star` with margin `xi`.
///
/// EI = (mu - f_star - xi) * Phi(z) + sigma * phi(z), z = (mu - f_star - xi) / sigma.
/// A zero sigma collapses to the deterministic improvement max(mu - f_star - xi, 0).
/// Scores are clamped at zero so extreme-z rounding cannot go negative.
pub fn score_ei(pred: &PosteriorPrediction, f_star: f64, xi: f64) -> Array1<f64> {
    Array1::from_shape_fn(pred.len(), |i| {
        let d = pred.mean[i] - f_star - xi;
        let s = pred.std[i];
        if s <= 0.0 {
            d.max(0.0)
        } else {
            let z = d / s;
            (d * norm_cdf(z) + s * norm_pdf(z)).max(0.0)
        }
    })
}

/// Upper confidence bound: mu + beta * sigma, elementwise.
pub fn score_ucb(pred: &PosteriorPrediction, beta: f64) -> Array1<f64> {
    &pred.mean + &(beta * &pred.std)
}

/// One independent draw from N(mu_i, sigma_i^2) per candidate.
///
/// The whole vector comes from a single stream keyed on `rng_seed`, so a
/// fixed seed reproduces the draw exactly and sigma = 0 returns mu exactly.
pub fn sample_thompson(pred: &PosteriorPrediction, rng_seed: u64) -> Array1<f64> {
    let mut rng = seeds::stream("thompson-draw", "", &[rng_seed]);
    Array1::from_shape_fn(pred.len(), |i| {
        let eps: f64 = rng.sample(StandardNormal);
        pred.mean[i] + pred.std[i] * eps
    })
}

/// Pure exploitation: the posterior mean itself.
pub fn score_greedy(pred: &PosteriorPrediction) -> Array1<f64> {
    pred.mean.clone()
}

/// Score candidates under `spec`. `draw_seed` feeds Thompson sampling only;
/// the other rules are deterministic functions of the prediction.
pub fn score_candidates(
    spec: &AcquisitionSpec,
    pred: &PosteriorPrediction,
    f_star: f64,
    draw_seed: u64,
) -> Array1<f64> {
    match spec.kind {
        AcquisitionKind::Ei => score_ei(pred, f_star, spec.xi),
        AcquisitionKind::Ucb => score_ucb(pred, spec.beta),
        AcquisitionKind::Thompson => sample_thompson(pred, draw_seed),
        AcquisitionKind::Greedy => score_greedy(pred),
    }
}

/// Indices of the `batch_size` highest scores, ascending.
///
/// Exact score ties are broken uniformly at random under `tie_seed`: every
/// candidate gets an independent uniform key and ties sort by key, which
/// induces a uniform random order within each tied group.
pub fn select_batch(scores: &Array1<f64>, batch_size: usize, tie_seed: u64) -> Result<Vec<usize>> {
    let n = scores.len();
    if batch_size > n {
        return Err(Error::Size(format!(
            "batch size {batch_size} exceeds {n} candidates"
        )));
    }
    let mut rng = seeds::stream("batch-tie", "", &[tie_seed]);
    let keys: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| keys[a].total_cmp(&keys[b]))
            .then_with(|| a.cmp(&b))
    });
    let mut chosen = order[..batch_size].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}
