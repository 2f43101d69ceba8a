//! Sequence encodings: one-hot computed internally, pretrained-model
//! embeddings ingested from CSV files keyed by sequence.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{Landscape, CANONICAL_ALPHABET};

/// Where an encoding came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    OneHot,
    /// Identifier of an ingested embedding table (e.g. "esm2-650m").
    EmbeddingFile(String),
}

impl std::fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EncodingKind::OneHot => write!(f, "one_hot"),
            EncodingKind::EmbeddingFile(id) => write!(f, "{id}"),
        }
    }
}

/// N×D real matrix of sequence encodings aligned to landscape indices.
#[derive(Debug, Clone)]
pub struct EncodingMatrix {
    pub kind: EncodingKind,
    pub dim: usize,
    pub vectors: Array2<f64>,
}

/// Per-dimension mean/scale computed on a training subset.
#[derive(Debug, Clone)]
pub struct StandardizeStats {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl EncodingMatrix {
    pub fn n_rows(&self) -> usize {
        self.vectors.nrows()
    }

    /// Copy the given rows into a dense matrix (training or candidate sets).
    pub fn gather(&self, rows: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((rows.len(), self.dim));
        for (r, &i) in rows.iter().enumerate() {
            out.row_mut(r).assign(&self.vectors.row(i));
        }
        out
    }

    /// Mean and standard deviation per dimension over `stats_from` rows.
    pub fn stats(&self, stats_from: &[usize]) -> StandardizeStats {
        compute_stats(&self.vectors, stats_from)
    }

    /// Gather rows and z-score them with precomputed stats.
    pub fn gather_standardized(&self, rows: &[usize], stats: &StandardizeStats) -> Array2<f64> {
        let mut out = self.gather(rows);
        apply_stats(&mut out, stats);
        out
    }
}

fn compute_stats(vectors: &Array2<f64>, rows: &[usize]) -> StandardizeStats {
    let d = vectors.ncols();
    let n = rows.len() as f64;
    let mut mean = Array1::zeros(d);
    for &i in rows {
        mean += &vectors.row(i);
    }
    mean /= n;
    let mut var = Array1::<f64>::zeros(d);
    for &i in rows {
        let diff = &vectors.row(i) - &mean;
        var += &diff.mapv(|x| x * x);
    }
    var /= n;
    let std = var.mapv(f64::sqrt);
    StandardizeStats { mean, std }
}

fn apply_stats(out: &mut Array2<f64>, stats: &StandardizeStats) {
    for mut row in out.rows_mut() {
        for (j, x) in row.iter_mut().enumerate() {
            let s = stats.std[j];
            // Zero-variance guard; the relative floor also absorbs the
            // rounding noise a constant column accumulates.
            if s > 1e-12 * (1.0 + stats.mean[j].abs()) {
                *x = (*x - stats.mean[j]) / s;
            }
        }
    }
}

/// One-hot encode the landscape: row i is the flattened L×|A| indicator of
/// sequence i under the canonical alphabet ordering.
pub fn encode_one_hot(landscape: &Landscape) -> Result<EncodingMatrix> {
    let a = landscape.alphabet_size;
    let alphabet = &CANONICAL_ALPHABET[..a];
    let dim = landscape.length * a;
    let mut vectors = Array2::zeros((landscape.len(), dim));
    for (i, seq) in landscape.sequences.iter().enumerate() {
        for (pos, ch) in seq.chars().enumerate() {
            let letter = alphabet.find(ch).ok_or(Error::Encoding { ch, pos })?;
            vectors[[i, pos * a + letter]] = 1.0;
        }
    }
    Ok(EncodingMatrix {
        kind: EncodingKind::OneHot,
        dim,
        vectors,
    })
}

/// Load precomputed embeddings from a CSV with header
/// `sequence,e0,e1,...`; the output matrix is aligned to landscape index
/// order regardless of file row order.
pub fn load_embeddings(
    landscape: &Landscape,
    path: impl AsRef<Path>,
    id: impl Into<String>,
) -> Result<EncodingMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Schema(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header: {e}")))?;
    if headers.get(0).map(str::trim) != Some("sequence") {
        return Err(Error::Schema(
            "embedding file must start with a 'sequence' column".into(),
        ));
    }
    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(Error::Schema("embedding file has no vector columns".into()));
    }

    let mut by_sequence: HashMap<String, Vec<f64>> = HashMap::with_capacity(landscape.len());
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::Parse {
                line,
                msg: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != dim + 1 {
            return Err(Error::Schema(format!(
                "line {line}: expected {} fields, got {}",
                dim + 1,
                record.len()
            )));
        }
        let seq = record.get(0).unwrap().trim().to_string();
        let mut vec = Vec::with_capacity(dim);
        for v in record.iter().skip(1) {
            vec.push(v.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("cannot parse embedding value '{v}'"),
            })?);
        }
        by_sequence.insert(seq, vec);
    }

    let missing: Vec<&str> = landscape
        .sequences
        .iter()
        .filter(|s| !by_sequence.contains_key(*s))
        .map(|s| s.as_str())
        .take(10)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(format!(
            "embedding file misses {} sequence(s), e.g. {}",
            landscape
                .sequences
                .iter()
                .filter(|s| !by_sequence.contains_key(*s))
                .count(),
            missing.join(", ")
        )));
    }

    let mut vectors = Array2::zeros((landscape.len(), dim));
    for (i, seq) in landscape.sequences.iter().enumerate() {
        for (j, v) in by_sequence[seq].iter().enumerate() {
            vectors[[i, j]] = *v;
        }
    }
    Ok(EncodingMatrix {
        kind: EncodingKind::EmbeddingFile(id.into()),
        dim,
        vectors,
    })
}

/// Z-score every dimension using mean/std computed only on `stats_from`
/// (the acquired training set); zero-variance dimensions pass through.
pub fn standardize(matrix: &EncodingMatrix, stats_from: &[usize]) -> Result<EncodingMatrix> {
    if stats_from.is_empty() {
        return Err(Error::Size("stats_from must be nonempty".into()));
    }
    let stats = matrix.stats(stats_from);
    let mut vectors = matrix.vectors.clone();
    apply_stats(&mut vectors, &stats);
    Ok(EncodingMatrix {
        kind: matrix.kind.clone(),
        dim: matrix.dim,
        vectors,
    })
}
