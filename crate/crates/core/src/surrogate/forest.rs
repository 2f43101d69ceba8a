//! Random forest regressor with per-tree dispersion as the uncertainty
//! estimate. Trees grow on bootstrap resamples with exhaustive split search
//! over all features; ties resolve to the first feature and threshold, so a
//! fit is deterministic given its seed.

use ndarray::{Array1, ArrayView2};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForestModel {
    pub(crate) trees: Vec<Tree>,
    pub(crate) n_features: usize,
}

struct TreeBuilder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [f64],
    max_depth: Option<usize>,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    /// Gain of a split = parent SSE minus child SSE, computed from sums:
    /// sum_l^2/n_l + sum_r^2/n_r - sum^2/n.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64, f64)> {
        let n = idx.len() as f64;
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let parent = total * total / n;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(idx.len());
        for f in 0..self.x.ncols() {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.x[[i, f]], self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            for s in 0..pairs.len() - 1 {
                left_sum += pairs[s].1;
                if pairs[s].0 == pairs[s + 1].0 {
                    continue;
                }
                let n_l = (s + 1) as f64;
                let n_r = n - n_l;
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / n_l + right_sum * right_sum / n_r - parent;
                if best.is_none_or(|(_, _, g)| gain > g) {
                    let threshold = 0.5 * (pairs[s].0 + pairs[s + 1].0);
                    best = Some((f, threshold, gain));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
        let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
        let split = if idx.len() < 2 || depth_capped {
            None
        } else {
            // A pure node yields zero (or rounding-level) gain; stop there.
            self.best_split(idx).filter(|&(_, _, gain)| gain > 1e-12)
        };
        let at = self.nodes.len();
        match split {
            None => {
                self.nodes.push(Node::Leaf { value: mean });
            }
            Some((feature, threshold, _)) => {
                self.nodes.push(Node::Leaf { value: mean });
                let (l_idx, r_idx): (Vec<usize>, Vec<usize>) = idx
                    .iter()
                    .copied()
                    .partition(|&i| self.x[[i, feature]] <= threshold);
                let left = self.grow(&l_idx, depth + 1);
                let right = self.grow(&r_idx, depth + 1);
                self.nodes[at] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
        }
        at
    }
}

pub(crate) fn fit_tree(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    idx: &[usize],
    max_depth: Option<usize>,
) -> Tree {
    let mut builder = TreeBuilder {
        x,
        y,
        max_depth,
        nodes: Vec::new(),
    };
    builder.grow(idx, 0);
    Tree {
        nodes: builder.nodes,
    }
}

pub fn train_forest(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    n_estimators: usize,
    max_depth: Option<usize>,
    rng_seed: u64,
) -> Result<ForestModel> {
    if x.nrows() != y.len() || y.len() < 2 {
        return Err(Error::Size(format!(
            "forest needs >=2 rows with matching labels, got {} x {}",
            x.nrows(),
            y.len()
        )));
    }
    let n = x.nrows();
    // Per-tree sub-seeds keep the fit independent of worker count.
    let trees: Vec<Tree> = (0..n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeds::stream("rf-tree", "", &[rng_seed, t as u64]);
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            fit_tree(x, y, &sample, max_depth)
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_features: x.ncols(),
    })
}

impl ForestModel {
    /// Mean and population standard deviation over per-tree predictions.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        if x.ncols() != self.n_features {
            return Err(Error::Shape {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        let n = x.nrows();
        let t = self.trees.len() as f64;
        let mut mean = Array1::zeros(n);
        let mut m2 = Array1::zeros(n);
        let mut row_buf = vec![0.0; self.n_features];
        for (r, row) in x.rows().into_iter().enumerate() {
            for (b, v) in row_buf.iter_mut().zip(row.iter()) {
                *b = *v;
            }
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for tree in &self.trees {
                let p = tree.predict_row(&row_buf);
                sum += p;
                sumsq += p * p;
            }
            mean[r] = sum / t;
            m2[r] = (sumsq / t - mean[r] * mean[r]).max(0.0);
        }
        let std = m2.mapv(f64::sqrt);
        Ok((mean, std))
    }
}
