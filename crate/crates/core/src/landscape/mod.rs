//! Ground-truth fitness landscapes: CSV ingestion, normalization, the
//! hyperparameter/campaign split, and Hamming-1 neighborhood structure.

mod synthetic;

pub use synthetic::{generate_synthetic, SyntheticModel, SyntheticSpec};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seeds;

/// Canonical amino-acid ordering used everywhere a fixed alphabet is needed
/// (one-hot columns, synthetic enumeration). Alphabetical one-letter codes.
pub const CANONICAL_ALPHABET: &str = "ACDEFGHIKLMNPQRSTVWY";

/// Fraction of the pool reserved for hyperparameter training.
pub const HYPERPARAM_TRAIN_FRACTION: f64 = 0.15;
/// Fraction of the pool reserved for hyperparameter testing.
pub const HYPERPARAM_TEST_FRACTION: f64 = 0.05;

/// A finite ground-truth pool of sequence variants with measured fitness.
///
/// `norm_fitness` is the per-landscape min-max rescaling of `raw_fitness`
/// to `[0, 1]`; optimization metrics use the normalized scale while
/// landscape-complexity properties are computed on the raw scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Landscape {
    pub name: String,
    pub sequences: Vec<String>,
    pub raw_fitness: Vec<f64>,
    pub norm_fitness: Vec<f64>,
    pub wild_type: Option<String>,
    pub length: usize,
    pub alphabet_size: usize,
    digest: String,
}

impl Landscape {
    /// Validate and construct a landscape. Sequences must be unique, equal
    /// length, and drawn from the first `alphabet_size` canonical letters;
    /// fitness must not be constant.
    pub fn new(
        name: impl Into<String>,
        sequences: Vec<String>,
        raw_fitness: Vec<f64>,
        wild_type: Option<String>,
        alphabet_size: usize,
    ) -> Result<Self> {
        if sequences.len() != raw_fitness.len() {
            return Err(Error::Schema(format!(
                "{} sequences but {} fitness values",
                sequences.len(),
                raw_fitness.len()
            )));
        }
        if sequences.len() < 2 {
            return Err(Error::Size(format!(
                "landscape needs at least 2 variants, got {}",
                sequences.len()
            )));
        }
        if alphabet_size == 0 || alphabet_size > CANONICAL_ALPHABET.len() {
            return Err(Error::Config(format!(
                "alphabet_size must be in 1..={}, got {}",
                CANONICAL_ALPHABET.len(),
                alphabet_size
            )));
        }
        let alphabet = &CANONICAL_ALPHABET[..alphabet_size];
        let length = sequences[0].chars().count();
        if length == 0 {
            return Err(Error::Schema("empty sequence".into()));
        }
        let mut seen = HashMap::with_capacity(sequences.len());
        for (i, seq) in sequences.iter().enumerate() {
            if seq.chars().count() != length {
                return Err(Error::Schema(format!(
                    "sequence '{seq}' has length {}, expected {length}",
                    seq.chars().count()
                )));
            }
            for (pos, ch) in seq.chars().enumerate() {
                if !alphabet.contains(ch) {
                    return Err(Error::Encoding { ch, pos });
                }
            }
            if let Some(prev) = seen.insert(seq.clone(), i) {
                return Err(Error::Schema(format!(
                    "duplicate sequence '{seq}' at rows {prev} and {i}"
                )));
            }
        }
        if let Some(wt) = &wild_type {
            if !seen.contains_key(wt) {
                return Err(Error::Schema(format!(
                    "wild type '{wt}' is not in the pool"
                )));
            }
        }
        for (i, f) in raw_fitness.iter().enumerate() {
            if !f.is_finite() {
                return Err(Error::Schema(format!("non-finite fitness at row {i}")));
            }
        }
        let norm_fitness = min_max_normalize(&raw_fitness)?;
        let digest = content_digest(&sequences, &raw_fitness, wild_type.as_deref());
        Ok(Self {
            name: name.into(),
            sequences,
            raw_fitness,
            norm_fitness,
            wild_type,
            length,
            alphabet_size,
            digest,
        })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Content digest over sequences, raw fitness, and wild type. The name
    /// is excluded so renaming a file does not perturb splits or caches.
    pub fn digest(&self) -> &str {
        &self.digest
    }
}

fn min_max_normalize(raw: &[f64]) -> Result<Vec<f64>> {
    let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return Err(Error::Degenerate(
            "constant fitness: landscape has no signal to optimize".into(),
        ));
    }
    Ok(raw.iter().map(|f| (f - min) / (max - min)).collect())
}

fn content_digest(sequences: &[String], raw: &[f64], wild_type: Option<&str>) -> String {
    let mut h = Sha256::new();
    for (seq, f) in sequences.iter().zip(raw) {
        h.update(seq.as_bytes());
        h.update(*b"\t");
        h.update(f.to_le_bytes());
        h.update(*b"\n");
    }
    if let Some(wt) = wild_type {
        h.update(b"wt:");
        h.update(wt.as_bytes());
    }
    let bytes = h.finalize();
    let mut out = String::with_capacity(64);
    for b in bytes {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Load a landscape from a CSV file with header `sequence,fitness`.
///
/// Extra columns are ignored, except an optional `wild_type` column whose
/// truthy row marks the reference sequence. Duplicate sequences are
/// collapsed to their mean fitness with a warning on stderr.
pub fn load_landscape(path: impl AsRef<Path>) -> Result<Landscape> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "landscape".to_string());
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Schema(format!("cannot open {}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let seq_col = col("sequence")
        .ok_or_else(|| Error::Schema("missing required column 'sequence'".into()))?;
    let fit_col =
        col("fitness").ok_or_else(|| Error::Schema("missing required column 'fitness'".into()))?;
    let wt_col = col("wild_type");

    let mut order: Vec<String> = Vec::new();
    let mut sums: HashMap<String, (f64, usize)> = HashMap::new();
    let mut wild_type = None;
    let mut n_dup = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::Parse {
                line,
                msg: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let seq = record
            .get(seq_col)
            .ok_or_else(|| Error::Parse {
                line,
                msg: "missing sequence field".into(),
            })?
            .trim()
            .to_string();
        let fit_str = record.get(fit_col).ok_or_else(|| Error::Parse {
            line,
            msg: "missing fitness field".into(),
        })?;
        let fitness: f64 = fit_str.trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("cannot parse fitness '{fit_str}'"),
        })?;
        if let Some(wt_col) = wt_col {
            if let Some(v) = record.get(wt_col) {
                let v = v.trim().to_ascii_lowercase();
                if v == "1" || v == "true" || v == "yes" {
                    wild_type = Some(seq.clone());
                }
            }
        }
        match sums.get_mut(&seq) {
            Some((sum, count)) => {
                *sum += fitness;
                *count += 1;
                n_dup += 1;
            }
            None => {
                order.push(seq.clone());
                sums.insert(seq, (fitness, 1));
            }
        }
    }
    if n_dup > 0 {
        eprintln!("warning: {name}: collapsed {n_dup} duplicate sequence reads by mean fitness");
    }
    let mut sequences = Vec::with_capacity(order.len());
    let mut raw = Vec::with_capacity(order.len());
    for seq in order {
        let (sum, count) = sums[&seq];
        raw.push(sum / count as f64);
        sequences.push(seq);
    }
    Landscape::new(name, sequences, raw, wild_type, CANONICAL_ALPHABET.len())
}

/// Index partition of a landscape into hyperparameter-tuning and campaign
/// pools: 15% / 5% / 80% with floor rounding, remainder to the campaign pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub hyperparam_train: Vec<usize>,
    pub hyperparam_test: Vec<usize>,
    pub campaign_pool: Vec<usize>,
    pub split_seed: u64,
}

/// Uniform random split of the pool, deterministic given the landscape
/// content digest and `split_seed`. Index sets are returned sorted.
pub fn make_split(landscape: &Landscape, split_seed: u64) -> Result<SplitPlan> {
    let n = landscape.len();
    if n < 20 {
        return Err(Error::Size(format!(
            "pool of {n} is too small to split (need at least 20)"
        )));
    }
    let n_train = (n as f64 * HYPERPARAM_TRAIN_FRACTION).floor() as usize;
    let n_test = (n as f64 * HYPERPARAM_TEST_FRACTION).floor() as usize;
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = seeds::stream("split", landscape.digest(), &[split_seed]);
    indices.shuffle(&mut rng);
    let mut hyperparam_train: Vec<usize> = indices[..n_train].to_vec();
    let mut hyperparam_test: Vec<usize> = indices[n_train..n_train + n_test].to_vec();
    let mut campaign_pool: Vec<usize> = indices[n_train + n_test..].to_vec();
    hyperparam_train.sort_unstable();
    hyperparam_test.sort_unstable();
    campaign_pool.sort_unstable();
    Ok(SplitPlan {
        hyperparam_train,
        hyperparam_test,
        campaign_pool,
        split_seed,
    })
}

/// Hamming-1 adjacency over the pool.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeighborIndex {
    pub adjacency: Vec<Vec<u32>>,
}

impl NeighborIndex {
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.adjacency[i]
    }
}

/// Build the Hamming-1 adjacency by positional bucketing: two sequences are
/// neighbors iff they share a bucket for exactly one masked position. Runs in
/// O(N·L·|A|) rather than the O(N²) pairwise scan.
pub fn build_neighbor_index(landscape: &Landscape) -> NeighborIndex {
    let n = landscape.len();
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    let seqs: Vec<&[u8]> = landscape.sequences.iter().map(|s| s.as_bytes()).collect();
    for pos in 0..landscape.length {
        let mut buckets: HashMap<Vec<u8>, Vec<u32>> = HashMap::new();
        for (i, seq) in seqs.iter().enumerate() {
            let mut key = seq.to_vec();
            key[pos] = 0;
            buckets.entry(key).or_default().push(i as u32);
        }
        for members in buckets.values() {
            // Sequences in one bucket differ only at `pos`, so every pair
            // is at Hamming distance exactly 1. Bucket size is <= |A|.
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    adjacency[i as usize].push(j);
                    adjacency[j as usize].push(i);
                }
            }
        }
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }
    NeighborIndex { adjacency }
}
