//! Benchmark configuration: a TOML file plus command-line overrides, resolved
//! into one validated value whose digest stamps every output file.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use bobench_core::acquisition::AcquisitionKind;
use bobench_core::landscape::{SyntheticModel, SyntheticSpec};
use bobench_core::metrics::CostModel;
use bobench_core::seeds;
use bobench_core::surrogate::{SurrogateKind, SurrogateSpec};

/// Where one landscape comes from: a measurement CSV on disk, or a synthetic
/// enumeration described inline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LandscapeSource {
    File(FileSource),
    Synthetic(SyntheticSource),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSource {
    pub path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub name: String,
    /// "additive", "nk", or "random".
    pub model: String,
    pub length: usize,
    pub alphabet_size: usize,
    /// Interaction order for the "nk" model; ignored otherwise.
    #[serde(default)]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSource {
    pub fn to_spec(&self) -> Result<SyntheticSpec, String> {
        let model = match self.model.as_str() {
            "additive" => SyntheticModel::Additive,
            "nk" => SyntheticModel::Nk { k: self.k },
            "random" => SyntheticModel::Random,
            other => {
                return Err(format!(
                    "landscape '{}': unknown synthetic model '{other}' \
                     (expected additive, nk, or random)",
                    self.name
                ))
            }
        };
        Ok(SyntheticSpec {
            name: self.name.clone(),
            model,
            length: self.length,
            alphabet_size: self.alphabet_size,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingSection {
    pub one_hot: bool,
    /// Embedding id -> CSV path (`sequence,e0,e1,...`). The id becomes the
    /// encoding name inside model ids.
    pub embeddings: BTreeMap<String, PathBuf>,
}

impl Default for EncodingSection {
    fn default() -> Self {
        Self {
            one_hot: true,
            embeddings: BTreeMap::new(),
        }
    }
}

/// Which slice of the model grid to benchmark. Empty lists mean "all".
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub surrogates: Vec<String>,
    pub acquisitions: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSection {
    pub n_init: usize,
    pub batch_size: usize,
    pub n_cycles: usize,
    pub n_seeds: u64,
    pub observation_noise_std: f64,
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            n_init: 96,
            batch_size: 96,
            n_cycles: 4,
            n_seeds: 20,
            observation_noise_std: 0.0,
        }
    }
}

/// Architecture constants shared by every surrogate base spec. The
/// per-surrogate hyperparameters (learning rate, kernel, forest shape) come
/// from the tuning grid, not from here.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSection {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub mc_samples: usize,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        let d = SurrogateSpec::defaults(SurrogateKind::EnsembleNn);
        Self {
            hidden_dim: d.hidden_dim,
            epochs: d.epochs,
            batch_size: d.batch_size,
            mc_samples: d.mc_samples,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    pub unit_cost: f64,
    pub includes_seed: bool,
}

impl Default for CostSection {
    fn default() -> Self {
        let d = CostModel::default();
        Self {
            unit_cost: d.unit_cost,
            includes_seed: d.includes_seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Tail mass for CVaR aggregation.
    pub cvar_alpha: f64,
    /// Pool percentile defining the cost-to-threshold target.
    pub percentile: f64,
    /// Keep only the best N rows per ranking file; 0 keeps everything.
    pub top: usize,
    pub n_bootstrap: usize,
    /// Fraction of seeds used for ranking in the split-seed savings check.
    pub oob_rank_fraction: f64,
    /// Partition count above which the savings check samples instead of
    /// enumerating.
    pub oob_cap: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            cvar_alpha: 0.1,
            percentile: 99.0,
            top: 0,
            n_bootstrap: 1000,
            oob_rank_fraction: 0.8,
            oob_cap: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub out_dir: PathBuf,
    pub rng_seed: u64,
    /// Worker threads; 0 lets the scheduler decide.
    pub jobs: usize,
    pub landscapes: Vec<LandscapeSource>,
    pub encodings: EncodingSection,
    pub grid: GridSection,
    pub campaign: CampaignSection,
    pub surrogate: SurrogateSection,
    pub cost: CostSection,
    pub report: ReportSection,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("bobench-out"),
            rng_seed: 0,
            jobs: 0,
            landscapes: Vec::new(),
            encodings: EncodingSection::default(),
            grid: GridSection::default(),
            campaign: CampaignSection::default(),
            surrogate: SurrogateSection::default(),
            cost: CostSection::default(),
            report: ReportSection::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn surrogate_kinds(&self) -> Result<Vec<SurrogateKind>, String> {
        if self.grid.surrogates.is_empty() {
            return Ok(SurrogateKind::ALL.to_vec());
        }
        self.grid
            .surrogates
            .iter()
            .map(|name| {
                SurrogateKind::ALL
                    .into_iter()
                    .find(|k| k.as_str() == name)
                    .ok_or_else(|| format!("unknown surrogate '{name}' in [grid]"))
            })
            .collect()
    }

    pub fn acquisition_kinds(&self) -> Result<Vec<AcquisitionKind>, String> {
        if self.grid.acquisitions.is_empty() {
            return Ok(AcquisitionKind::ALL.to_vec());
        }
        self.grid
            .acquisitions
            .iter()
            .map(|name| {
                name.parse::<AcquisitionKind>()
                    .map_err(|e| format!("{e} in [grid]"))
            })
            .collect()
    }

    /// Default spec for `kind` with the configured architecture constants
    /// applied; the tuning grid then overwrites the searched fields.
    pub fn base_spec(&self, kind: SurrogateKind) -> SurrogateSpec {
        let mut spec = SurrogateSpec::defaults(kind);
        spec.hidden_dim = self.surrogate.hidden_dim;
        spec.epochs = self.surrogate.epochs;
        spec.batch_size = self.surrogate.batch_size;
        spec.mc_samples = self.surrogate.mc_samples;
        spec
    }

    /// Campaign replicate seeds, offset by the global seed so `--seed`
    /// shifts the whole experiment coherently.
    pub fn seeds(&self) -> Vec<u64> {
        (self.rng_seed..self.rng_seed + self.campaign.n_seeds).collect()
    }

    pub fn cost_model(&self) -> CostModel {
        CostModel {
            unit_cost: self.cost.unit_cost,
            includes_seed: self.cost.includes_seed,
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.landscapes.is_empty() {
            return Err(
                "no landscapes configured; add [[landscapes]] entries or pass --data".into(),
            );
        }
        let mut names = std::collections::BTreeSet::new();
        for source in &self.landscapes {
            match source {
                LandscapeSource::File(f) => {
                    if !f.path.exists() {
                        return Err(format!("landscape file not found: {}", f.path.display()));
                    }
                    let stem = f
                        .path
                        .file_stem()
                        .and_then(|s| s.to_str())
                        .unwrap_or("landscape")
                        .to_string();
                    if !names.insert(stem.clone()) {
                        return Err(format!("duplicate landscape name '{stem}'"));
                    }
                }
                LandscapeSource::Synthetic(s) => {
                    s.to_spec()?;
                    if !names.insert(s.name.clone()) {
                        return Err(format!("duplicate landscape name '{}'", s.name));
                    }
                }
            }
        }
        if !self.encodings.one_hot && self.encodings.embeddings.is_empty() {
            return Err("no encodings configured; enable one_hot or add embeddings".into());
        }
        for (id, path) in &self.encodings.embeddings {
            if id == "one_hot" {
                return Err("embedding id 'one_hot' collides with the built-in encoding".into());
            }
            if !path.exists() {
                return Err(format!("embedding file not found: {}", path.display()));
            }
        }
        self.surrogate_kinds()?;
        self.acquisition_kinds()?;
        if self.campaign.n_seeds == 0 {
            return Err("campaign.n_seeds must be at least 1".into());
        }
        self.cost_model().validate().map_err(|e| e.to_string())?;
        let r = &self.report;
        if !(r.cvar_alpha > 0.0 && r.cvar_alpha < 1.0) {
            return Err(format!(
                "report.cvar_alpha {} must be in (0, 1)",
                r.cvar_alpha
            ));
        }
        if !(r.percentile > 0.0 && r.percentile < 100.0) {
            return Err(format!(
                "report.percentile {} must be in (0, 100)",
                r.percentile
            ));
        }
        if r.n_bootstrap == 0 {
            return Err("report.n_bootstrap must be at least 1".into());
        }
        if !(r.oob_rank_fraction > 0.0 && r.oob_rank_fraction < 1.0) {
            return Err(format!(
                "report.oob_rank_fraction {} must be in (0, 1)",
                r.oob_rank_fraction
            ));
        }
        if r.oob_cap == 0 {
            return Err("report.oob_cap must be at least 1".into());
        }
        Ok(())
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub data: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub top: Option<usize>,
}

/// A validated configuration plus the digest that identifies it in output
/// headers. The digest covers the fully resolved value, so flag overrides
/// and file edits are equally visible downstream.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: BenchmarkConfig,
    pub digest: String,
}

impl Resolved {
    pub fn header_comments(&self) -> Vec<String> {
        vec![
            format!("bobench v{}", env!("CARGO_PKG_VERSION")),
            format!("config digest {}", self.digest),
        ]
    }
}

pub fn resolve(path: Option<&PathBuf>, overrides: Overrides) -> Result<Resolved, String> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
            toml::from_str::<BenchmarkConfig>(&text)
                .map_err(|e| format!("invalid config {}: {e}", p.display()))?
        }
        None => BenchmarkConfig::default(),
    };
    if !overrides.data.is_empty() {
        config.landscapes = overrides
            .data
            .into_iter()
            .map(|path| LandscapeSource::File(FileSource { path }))
            .collect();
    }
    if let Some(out) = overrides.out {
        config.out_dir = out;
    }
    if let Some(jobs) = overrides.jobs {
        config.jobs = jobs;
    }
    if let Some(seed) = overrides.seed {
        config.rng_seed = seed;
    }
    if let Some(top) = overrides.top {
        config.report.top = top;
    }
    config.validate()?;
    let canonical = serde_json::to_vec(&config).map_err(|e| e.to_string())?;
    let digest = seeds::digest_hex(&canonical);
    Ok(Resolved { config, digest })
}
