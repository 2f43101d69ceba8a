//! Seeded optimization campaigns over a landscape's candidate pool, plus
//! the paired uniform-random baselines used as the payoff reference.
//!
//! Pairing contract: for a given (landscape, seed), the baseline and every
//! model acquire the identical k=0 seed pool, because both draw it from the
//! same stream keyed only by the landscape digest and the seed. Everything
//! model-specific (training, Thompson draws, tie-breaks) runs on streams
//! that also fold in the model id, so models never perturb each other.

mod store;

pub use store::{RunKey, RunStore};

use std::collections::BTreeMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{score_candidates, select_batch, AcquisitionSpec};
use crate::encoding::{EncodingKind, EncodingMatrix};
use crate::error::{Error, Result};
use crate::landscape::{Landscape, SplitPlan};
use crate::seeds;
use crate::surrogate::grid::design_matrices;
use crate::surrogate::{predict, train, SurrogateSpec};

/// Model id reserved for the random baseline.
pub const BASELINE_ID: &str = "random";

/// One benchmarked combination: surrogate, acquisition rule, encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub surrogate: SurrogateSpec,
    pub acquisition: AcquisitionSpec,
    pub encoding: EncodingKind,
}

impl ModelSpec {
    /// Stable identifier, e.g. "gp+ei+one_hot".
    pub fn id(&self) -> String {
        format!(
            "{}+{}+{}",
            self.surrogate.kind, self.acquisition.kind, self.encoding
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.surrogate.validate()?;
        self.acquisition.validate()
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.id())
    }
}

/// Every surrogate-base × acquisition × encoding combination, in canonical
/// order (surrogate outermost, encoding innermost).
pub fn model_grid(bases: &[SurrogateSpec], encodings: &[EncodingKind]) -> Vec<ModelSpec> {
    use crate::acquisition::AcquisitionKind;
    let mut out = Vec::with_capacity(bases.len() * 4 * encodings.len());
    for base in bases {
        for kind in AcquisitionKind::ALL {
            for enc in encodings {
                out.push(ModelSpec {
                    surrogate: base.clone(),
                    acquisition: AcquisitionSpec::new(kind),
                    encoding: enc.clone(),
                });
            }
        }
    }
    out
}

/// Campaign shape: the seed pool size, per-cycle batch, cycle count, and
/// the seeds to replicate over. `observation_noise_std` perturbs training
/// labels only; payoffs always use the clean normalized fitness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub n_init: usize,
    pub batch_size: usize,
    pub n_cycles: usize,
    pub seeds: Vec<u64>,
    pub model: ModelSpec,
    pub observation_noise_std: f64,
}

impl CampaignConfig {
    pub fn new(model: ModelSpec) -> Self {
        Self {
            n_init: 96,
            batch_size: 96,
            n_cycles: 4,
            seeds: (0..20).collect(),
            model,
            observation_noise_std: 0.0,
        }
    }

    /// Total variants acquired by one completed run.
    pub fn budget(&self) -> usize {
        self.n_init + self.batch_size * self.n_cycles
    }

    fn check_budget(&self, pool_len: usize) -> Result<()> {
        if self.n_init == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "n_init and batch_size must be at least 1".into(),
            ));
        }
        if self.budget() > pool_len {
            return Err(Error::Config(format!(
                "budget {} = {} + {}x{} exceeds campaign pool of {pool_len}",
                self.budget(),
                self.n_init,
                self.batch_size,
                self.n_cycles
            )));
        }
        if !(self.observation_noise_std >= 0.0 && self.observation_noise_std.is_finite()) {
            return Err(Error::Config(format!(
                "observation_noise_std {} must be finite and nonnegative",
                self.observation_noise_std
            )));
        }
        Ok(())
    }

    pub fn validate(&self, pool_len: usize) -> Result<()> {
        self.check_budget(pool_len)?;
        self.model.validate()
    }
}

/// One completed run: which pool indices were acquired at each iteration
/// (k=0 is the seed pool) and the running-max payoff after each iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model_id: String,
    /// Absent for baselines.
    pub model: Option<ModelSpec>,
    pub landscape: String,
    pub landscape_digest: String,
    pub seed: u64,
    pub acquired: Vec<Vec<usize>>,
    pub payoff_curve: Vec<f64>,
    pub is_baseline: bool,
    pub config_digest: String,
}

impl RunRecord {
    pub fn total_acquired(&self) -> usize {
        self.acquired.iter().map(Vec::len).sum()
    }

    pub fn final_payoff(&self) -> f64 {
        *self
            .payoff_curve
            .last()
            .expect("payoff curve is never empty")
    }

    /// Structural invariants every completed run satisfies: iteration sizes
    /// match the config, no index repeats, payoff is a running max.
    pub fn check_invariants(&self, config: &CampaignConfig) -> Result<()> {
        if self.acquired.len() != config.n_cycles + 1
            || self.payoff_curve.len() != config.n_cycles + 1
        {
            return Err(Error::Pairing(format!(
                "run {} has {} iterations, config says {}",
                self.model_id,
                self.acquired.len(),
                config.n_cycles + 1
            )));
        }
        if self.acquired[0].len() != config.n_init {
            return Err(Error::Pairing(format!(
                "seed pool of {} vs configured n_init {}",
                self.acquired[0].len(),
                config.n_init
            )));
        }
        for batch in &self.acquired[1..] {
            if batch.len() != config.batch_size {
                return Err(Error::Pairing(format!(
                    "batch of {} vs configured batch_size {}",
                    batch.len(),
                    config.batch_size
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for &i in self.acquired.iter().flatten() {
            if !seen.insert(i) {
                return Err(Error::Pairing(format!("index {i} acquired twice")));
            }
        }
        for w in self.payoff_curve.windows(2) {
            if w[1] < w[0] {
                return Err(Error::Pairing(format!(
                    "payoff decreased: {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

/// Digest identifying a run up to its seed: campaign shape, model (None for
/// the baseline), landscape content, and split. Stored on every record so
/// interrupted grids resume without recomputing.
fn run_identity_digest(
    config: &CampaignConfig,
    landscape: &Landscape,
    split: &SplitPlan,
    model: Option<&ModelSpec>,
) -> String {
    #[derive(Serialize)]
    struct Identity<'a> {
        n_init: usize,
        batch_size: usize,
        n_cycles: usize,
        observation_noise_std: f64,
        model: Option<&'a ModelSpec>,
        landscape_digest: &'a str,
        split_seed: u64,
    }
    let json = serde_json::to_string(&Identity {
        n_init: config.n_init,
        batch_size: config.batch_size,
        n_cycles: config.n_cycles,
        observation_noise_std: config.observation_noise_std,
        model,
        landscape_digest: landscape.digest(),
        split_seed: split.split_seed,
    })
    .expect("identity is serializable");
    seeds::digest_hex(json.as_bytes())
}

/// The k=0 acquisition set. Keyed only by landscape digest and seed, never
/// by the model, which is what makes baseline and model runs paired.
fn draw_seed_pool(digest: &str, pool: &[usize], n_init: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeds::stream("campaign-init", digest, &[seed]);
    let mut out: Vec<usize> = rand::seq::index::sample(&mut rng, pool.len(), n_init)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    out.sort_unstable();
    out
}

/// Training label for pool index `i`: clean normalized fitness plus, when
/// enabled, a Gaussian measurement error that is fixed per (seed, index) so
/// every retraining cycle and every model sees the same measurement.
pub(crate) fn observed_label(
    digest: &str,
    seed: u64,
    index: usize,
    clean: f64,
    noise_std: f64,
) -> f64 {
    if noise_std <= 0.0 {
        return clean;
    }
    use rand::Rng;
    let mut rng = seeds::stream("campaign-noise", digest, &[seed, index as u64]);
    clean + noise_std * rng.sample::<f64, _>(rand_distr::StandardNormal)
}

fn max_fitness(landscape: &Landscape, indices: &[usize]) -> f64 {
    indices
        .iter()
        .map(|&i| landscape.norm_fitness[i])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Simulate one seeded campaign: draw the seed pool, then for each cycle
/// retrain the surrogate from scratch on everything acquired, score all
/// unacquired pool candidates, and take the top batch.
pub fn run_campaign(
    config: &CampaignConfig,
    landscape: &Landscape,
    split: &SplitPlan,
    encoding: &EncodingMatrix,
    seed: u64,
) -> Result<RunRecord> {
    config.validate(split.campaign_pool.len())?;
    if encoding.n_rows() != landscape.len() {
        return Err(Error::Shape {
            expected: landscape.len(),
            got: encoding.n_rows(),
        });
    }
    let digest = landscape.digest();
    let model_id = config.model.id();
    let ctx = format!("{digest}/{model_id}");

    let seed_pool = draw_seed_pool(digest, &split.campaign_pool, config.n_init, seed);
    let mut payoff = vec![max_fitness(landscape, &seed_pool)];
    let mut acquired = vec![seed_pool];
    let mut in_set = vec![false; landscape.len()];
    for &i in &acquired[0] {
        in_set[i] = true;
    }

    for k in 1..=config.n_cycles {
        let fit_rows: Vec<usize> = acquired.iter().flatten().copied().collect();
        let candidates: Vec<usize> = split
            .campaign_pool
            .iter()
            .copied()
            .filter(|&i| !in_set[i])
            .collect();
        let (x_fit, x_query) = design_matrices(
            config.model.surrogate.kind,
            encoding,
            &fit_rows,
            &candidates,
        );
        let y_fit: Vec<f64> = fit_rows
            .iter()
            .map(|&i| {
                observed_label(
                    digest,
                    seed,
                    i,
                    landscape.norm_fitness[i],
                    config.observation_noise_std,
                )
            })
            .collect();
        let f_star = y_fit.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        let train_seed = seeds::sub_seed("campaign-train", &ctx, &[seed, k as u64]);
        let model = train(&config.model.surrogate, x_fit.view(), &y_fit, train_seed)?;
        let pred = predict(&model, x_query.view())?;

        let draw_seed = seeds::sub_seed("campaign-thompson", &ctx, &[seed, k as u64]);
        let tie_seed = seeds::sub_seed("campaign-tie", &ctx, &[seed, k as u64]);
        let scores = score_candidates(&config.model.acquisition, &pred, f_star, draw_seed);
        let batch: Vec<usize> = select_batch(&scores, config.batch_size, tie_seed)?
            .into_iter()
            .map(|local| candidates[local])
            .collect();

        for &i in &batch {
            in_set[i] = true;
        }
        let prev = *payoff.last().unwrap();
        payoff.push(prev.max(max_fitness(landscape, &batch)));
        acquired.push(batch);
    }

    Ok(RunRecord {
        model_id,
        model: Some(config.model.clone()),
        landscape: landscape.name.clone(),
        landscape_digest: digest.to_string(),
        seed,
        acquired,
        payoff_curve: payoff,
        is_baseline: false,
        config_digest: run_identity_digest(config, landscape, split, Some(&config.model)),
    })
}

/// The paired uniform baseline: identical k=0 seed pool, then b uniform
/// without-replacement acquisitions per cycle. Never touches the model in
/// `config`, so one baseline serves every model at this (landscape, seed).
pub fn run_random_baseline(
    config: &CampaignConfig,
    landscape: &Landscape,
    split: &SplitPlan,
    seed: u64,
) -> Result<RunRecord> {
    config.check_budget(split.campaign_pool.len())?;
    let digest = landscape.digest();

    let seed_pool = draw_seed_pool(digest, &split.campaign_pool, config.n_init, seed);
    let mut payoff = vec![max_fitness(landscape, &seed_pool)];
    let mut acquired = vec![seed_pool];
    let mut in_set = vec![false; landscape.len()];
    for &i in &acquired[0] {
        in_set[i] = true;
    }

    for k in 1..=config.n_cycles {
        let candidates: Vec<usize> = split
            .campaign_pool
            .iter()
            .copied()
            .filter(|&i| !in_set[i])
            .collect();
        let mut rng = seeds::stream("campaign-random", digest, &[seed, k as u64]);
        let mut batch: Vec<usize> =
            rand::seq::index::sample(&mut rng, candidates.len(), config.batch_size)
                .into_iter()
                .map(|local| candidates[local])
                .collect();
        batch.sort_unstable();
        for &i in &batch {
            in_set[i] = true;
        }
        let prev = *payoff.last().unwrap();
        payoff.push(prev.max(max_fitness(landscape, &batch)));
        acquired.push(batch);
    }

    Ok(RunRecord {
        model_id: BASELINE_ID.to_string(),
        model: None,
        landscape: landscape.name.clone(),
        landscape_digest: digest.to_string(),
        seed,
        acquired,
        payoff_curve: payoff,
        is_baseline: true,
        config_digest: run_identity_digest(config, landscape, split, None),
    })
}

/// A landscape ready for campaigning: its split and every encoding matrix
/// the models may ask for, keyed by encoding id.
#[derive(Debug, Clone)]
pub struct PreparedLandscape {
    pub landscape: Landscape,
    pub split: SplitPlan,
    pub encodings: BTreeMap<String, EncodingMatrix>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunFailure {
    pub model_id: String,
    pub landscape: String,
    pub seed: u64,
    pub message: String,
}

/// Outcome of a grid sweep; completed records live in the store.
#[derive(Debug, Clone)]
pub struct GridReport {
    pub completed: usize,
    pub skipped: usize,
    pub failures: Vec<RunFailure>,
}

enum Job<'a> {
    Baseline {
        prep: &'a PreparedLandscape,
        seed: u64,
    },
    Model {
        prep: &'a PreparedLandscape,
        model: &'a ModelSpec,
        seed: u64,
    },
}

/// Sweep models × landscapes × seeds, appending each completed run to the
/// store. Runs already present (by config digest) are skipped, failures are
/// isolated and reported, and jobs execute on the rayon pool.
pub fn run_grid(
    models: &[ModelSpec],
    prepared: &[PreparedLandscape],
    config: &CampaignConfig,
    store: &mut RunStore,
    progress: bool,
) -> Result<GridReport> {
    // Fail fast on setup problems rather than burying them in per-run noise.
    for prep in prepared {
        for model in models {
            let enc_id = model.encoding.to_string();
            if !prep.encodings.contains_key(&enc_id) {
                return Err(Error::Config(format!(
                    "landscape {} has no '{enc_id}' encoding prepared",
                    prep.landscape.name
                )));
            }
        }
    }

    let mut jobs = Vec::new();
    let mut skipped = 0usize;
    for prep in prepared {
        for &seed in &config.seeds {
            let base_key = RunKey {
                landscape_digest: prep.landscape.digest().to_string(),
                model_id: BASELINE_ID.to_string(),
                seed,
                config_digest: run_identity_digest(config, &prep.landscape, &prep.split, None),
            };
            if store.contains(&base_key) {
                skipped += 1;
            } else {
                jobs.push(Job::Baseline { prep, seed });
            }
            for model in models {
                let key = RunKey {
                    landscape_digest: prep.landscape.digest().to_string(),
                    model_id: model.id(),
                    seed,
                    config_digest: run_identity_digest(
                        config,
                        &prep.landscape,
                        &prep.split,
                        Some(model),
                    ),
                };
                if store.contains(&key) {
                    skipped += 1;
                } else {
                    jobs.push(Job::Model { prep, model, seed });
                }
            }
        }
    }

    let n_jobs = jobs.len();
    let sink = Mutex::new((store, 0usize, Vec::<RunFailure>::new()));
    jobs.into_par_iter().try_for_each(|job| -> Result<()> {
        let (label, outcome) = match &job {
            Job::Baseline { prep, seed } => (
                (BASELINE_ID.to_string(), prep.landscape.name.clone(), *seed),
                run_random_baseline(config, &prep.landscape, &prep.split, *seed),
            ),
            Job::Model { prep, model, seed } => {
                let mut cfg = config.clone();
                cfg.model = (*model).clone();
                let encoding = &prep.encodings[&model.encoding.to_string()];
                (
                    (model.id(), prep.landscape.name.clone(), *seed),
                    run_campaign(&cfg, &prep.landscape, &prep.split, encoding, *seed),
                )
            }
        };
        let mut guard = sink.lock().expect("sink poisoned");
        let (store, done, failures) = &mut *guard;
        match outcome {
            Ok(record) => {
                store.append(&record)?;
                *done += 1;
                if progress {
                    eprintln!(
                        "[{}/{}] {} seed {} on {}",
                        *done + failures.len(),
                        n_jobs,
                        label.0,
                        label.2,
                        label.1
                    );
                }
            }
            Err(e) => {
                failures.push(RunFailure {
                    model_id: label.0.clone(),
                    landscape: label.1.clone(),
                    seed: label.2,
                    message: e.to_string(),
                });
                if progress {
                    eprintln!(
                        "[{}/{}] FAILED {} seed {} on {}: {e}",
                        *done + failures.len(),
                        n_jobs,
                        label.0,
                        label.2,
                        label.1
                    );
                }
            }
        }
        Ok(())
    })?;

    let (_, completed, failures) = sink.into_inner().expect("sink poisoned");
    Ok(GridReport {
        completed,
        skipped,
        failures,
    })
}
