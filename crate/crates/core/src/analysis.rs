//! Distributional and structural properties of fitness landscapes.
//!
//! All properties are computed on the raw fitness scale: thresholds and peak
//! locations are only meaningful in original units. Campaign metrics, by
//! contrast, run on the normalized scale.

use std::collections::HashMap;
use std::io::Write;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{build_neighbor_index, Landscape, NeighborIndex};
use crate::metrics::quantile_sorted;
use crate::surrogate::gp::chol_solve;

const OTSU_BINS: usize = 256;
const KDE_GRID: usize = 512;
/// Local KDE maxima below this fraction of the global density maximum are
/// treated as numerical ripple, not modes.
const KDE_PROMINENCE_FLOOR: f64 = 0.01;
/// Interaction terms smaller than this multiple of the fitness standard
/// deviation are treated as additive noise rather than epistasis.
const EPISTASIS_ETA_FRACTION: f64 = 0.05;
const RIDGE_LAMBDA: f64 = 1e-6;

/// Summary row of distributional and structural landscape properties.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandscapeProfile {
    pub dataset: String,
    pub active_pct: f64,
    pub otsu_threshold: f64,
    pub n: usize,
    pub ruggedness: f64,
    pub cauchy_peak: f64,
    pub kurtosis: f64,
    pub skewness: f64,
    pub kde_peaks: usize,
    pub local_optima: usize,
    pub magnitude_epistasis_pct: f64,
    pub non_magnitude_epistasis_pct: f64,
    /// Cauchy fit fell back to the sample median.
    pub cauchy_fallback: bool,
    /// Additive fit needed ridge regularization.
    pub ridge_fallback: bool,
}

impl LandscapeProfile {
    /// Numeric property names, in export column order.
    pub const PROPERTY_NAMES: [&'static str; 11] = [
        "active_pct",
        "otsu_threshold",
        "n",
        "ruggedness",
        "cauchy_peak",
        "kurtosis",
        "kde_peaks",
        "local_optima",
        "magnitude_epistasis_pct",
        "non_magnitude_epistasis_pct",
        "skewness",
    ];

    /// Look up a numeric property by its export name.
    pub fn property(&self, name: &str) -> Option<f64> {
        Some(match name {
            "active_pct" => self.active_pct,
            "otsu_threshold" => self.otsu_threshold,
            "n" => self.n as f64,
            "ruggedness" => self.ruggedness,
            "cauchy_peak" => self.cauchy_peak,
            "kurtosis" => self.kurtosis,
            "kde_peaks" => self.kde_peaks as f64,
            "local_optima" => self.local_optima as f64,
            "magnitude_epistasis_pct" => self.magnitude_epistasis_pct,
            "non_magnitude_epistasis_pct" => self.non_magnitude_epistasis_pct,
            "skewness" => self.skewness,
            _ => return None,
        })
    }
}

/// Otsu threshold over a 256-bin histogram, plus the percentage of values at
/// or above it. Ties in between-class variance (plateaus across empty bins)
/// resolve to the plateau midpoint, which centers the threshold in the gap of
/// a well-separated bimodal sample.
pub fn otsu_threshold(fitness: &[f64]) -> Result<(f64, f64)> {
    let n = fitness.len();
    if n < 2 {
        return Err(Error::Size(format!(
            "threshold selection needs at least 2 values, got {n}"
        )));
    }
    let lo = fitness.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = fitness.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo || hi.is_nan() || lo.is_nan() {
        return Err(Error::Degenerate(
            "cannot threshold a constant sample".into(),
        ));
    }
    let width = (hi - lo) / OTSU_BINS as f64;
    let mut counts = [0u64; OTSU_BINS];
    let mut sums = [0.0f64; OTSU_BINS];
    for &f in fitness {
        let bin = (((f - lo) / width) as usize).min(OTSU_BINS - 1);
        counts[bin] += 1;
        sums[bin] += f;
    }

    // Between-class variance for the split "class 0 = bins 0..=t", up to a
    // constant factor of n^2.
    let total_count: u64 = n as u64;
    let total_sum: f64 = sums.iter().sum();
    let mut sigma = [f64::NEG_INFINITY; OTSU_BINS - 1];
    let mut best = f64::NEG_INFINITY;
    let mut argmax = 0usize;
    let mut cum_count = 0u64;
    let mut cum_sum = 0.0;
    for (t, s) in sigma.iter_mut().enumerate() {
        cum_count += counts[t];
        cum_sum += sums[t];
        let w1 = total_count - cum_count;
        if cum_count == 0 || w1 == 0 {
            continue;
        }
        let mu0 = cum_sum / cum_count as f64;
        let mu1 = (total_sum - cum_sum) / w1 as f64;
        *s = (cum_count as f64) * (w1 as f64) * (mu0 - mu1) * (mu0 - mu1);
        if *s > best {
            best = *s;
            argmax = t;
        }
    }
    // Extend the plateau of (numerically) equal maxima around the argmax.
    let tol = best * 1e-12;
    let mut first = argmax;
    while first > 0 && best - sigma[first - 1] <= tol {
        first -= 1;
    }
    let mut last = argmax;
    while last + 1 < sigma.len() && best - sigma[last + 1] <= tol {
        last += 1;
    }
    let t_mid = (first + last) / 2;
    // Threshold at the upper edge of class 0's last bin.
    let threshold = lo + (t_mid as f64 + 1.0) * width;
    let active = fitness.iter().filter(|&&f| f >= threshold).count();
    Ok((threshold, 100.0 * active as f64 / n as f64))
}

/// Sample skewness and excess kurtosis (both zero for a normal population),
/// from population central moments.
pub fn moments(fitness: &[f64]) -> Result<(f64, f64)> {
    let n = fitness.len();
    if n < 3 {
        return Err(Error::Size(format!(
            "moment estimation needs at least 3 values, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = fitness.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &f in fitness {
        let d = f - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= 0.0 {
        return Err(Error::Degenerate(
            "moments undefined for zero-variance sample".into(),
        ));
    }
    Ok((m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0))
}

/// Number of modes of a Gaussian kernel density estimate with Scott's
/// bandwidth, evaluated on a 512-point grid over [min, max]. A mode is an
/// interior strict local maximum whose prominence reaches 1% of the global
/// density maximum.
pub fn kde_peaks(fitness: &[f64]) -> Result<usize> {
    let n = fitness.len();
    if n < 10 {
        return Err(Error::Size(format!(
            "density estimation needs at least 10 values, got {n}"
        )));
    }
    let lo = fitness.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = fitness.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo || hi.is_nan() || lo.is_nan() {
        return Err(Error::Degenerate(
            "density of a constant sample has no bandwidth".into(),
        ));
    }
    let nf = n as f64;
    let mean = fitness.iter().sum::<f64>() / nf;
    let var = fitness.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / (nf - 1.0);
    let bandwidth = var.sqrt() * nf.powf(-0.2);

    let step = (hi - lo) / (KDE_GRID - 1) as f64;
    let inv_h = 1.0 / bandwidth;
    let density: Vec<f64> = (0..KDE_GRID)
        .map(|g| {
            let x = lo + g as f64 * step;
            fitness
                .iter()
                .map(|&f| {
                    let z = (x - f) * inv_h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(count_prominent_peaks(&density, KDE_PROMINENCE_FLOOR))
}

/// Count interior strict local maxima whose prominence is at least
/// `floor_frac` of the global maximum. Prominence is the drop from the peak
/// to the higher of the two minima reached before meeting taller ground (or
/// the series end) on each side.
fn count_prominent_peaks(density: &[f64], floor_frac: f64) -> usize {
    let global = density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let floor = floor_frac * global;
    let mut count = 0;
    for p in 1..density.len() - 1 {
        let peak = density[p];
        if !(peak > density[p - 1] && peak > density[p + 1]) {
            continue;
        }
        let mut left_base = peak;
        let mut i = p;
        while i > 0 {
            i -= 1;
            if density[i] > peak {
                break;
            }
            left_base = left_base.min(density[i]);
        }
        let mut right_base = peak;
        let mut i = p;
        while i + 1 < density.len() {
            i += 1;
            if density[i] > peak {
                break;
            }
            right_base = right_base.min(density[i]);
        }
        if peak - left_base.max(right_base) >= floor {
            count += 1;
        }
    }
    count
}

/// Maximum-likelihood Cauchy fit of a sample.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CauchyFit {
    pub location: f64,
    pub scale: f64,
    /// False when the optimizer failed and `location` is the sample median.
    pub converged: bool,
}

/// Joint maximum-likelihood (location, scale) fit of a Cauchy distribution,
/// started from (median, half-IQR). Non-convergence falls back to the median
/// with `converged = false`.
pub fn cauchy_peak(fitness: &[f64]) -> Result<CauchyFit> {
    let n = fitness.len();
    if n < 10 {
        return Err(Error::Size(format!(
            "Cauchy fitting needs at least 10 values, got {n}"
        )));
    }
    let mut sorted = fitness.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = quantile_sorted(&sorted, 0.5);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    if sorted[n - 1] <= sorted[0] {
        return Err(Error::Degenerate(
            "Cauchy scale undefined for a constant sample".into(),
        ));
    }
    let scale0 = (0.5 * iqr).max(1e-3 * (sorted[n - 1] - sorted[0]));

    // Negative log-likelihood over (location, ln scale); the log transform
    // keeps the scale positive without constraints.
    let nll = |p: [f64; 2]| {
        let gamma2 = (2.0 * p[1]).exp();
        let mut acc = 0.0;
        for &f in fitness {
            let d = f - p[0];
            acc += (gamma2 + d * d).ln();
        }
        acc - (n as f64) * p[1]
    };
    let ([location, log_scale], converged) =
        nelder_mead_2(nll, [median, scale0.ln()], [scale0.max(1e-3), 0.5], 500);
    if converged {
        Ok(CauchyFit {
            location,
            scale: log_scale.exp(),
            converged: true,
        })
    } else {
        Ok(CauchyFit {
            location: median,
            scale: scale0,
            converged: false,
        })
    }
}

/// Minimize a 2-d function with the Nelder-Mead simplex (standard reflection,
/// expansion, contraction, shrink coefficients). Returns the best vertex and
/// whether the simplex collapsed before the iteration cap.
fn nelder_mead_2<F: Fn([f64; 2]) -> f64>(
    f: F,
    x0: [f64; 2],
    step: [f64; 2],
    max_iter: usize,
) -> ([f64; 2], bool) {
    let mut pts = [x0, [x0[0] + step[0], x0[1]], [x0[0], x0[1] + step[1]]];
    let mut fv = [f(pts[0]), f(pts[1]), f(pts[2])];
    for _ in 0..max_iter {
        // Order vertices: b best, m middle, w worst.
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        let [b, m, w] = order;
        let f_spread = fv[w] - fv[b];
        let x_spread = (0..2)
            .map(|d| {
                (pts[b][d] - pts[m][d])
                    .abs()
                    .max((pts[b][d] - pts[w][d]).abs())
            })
            .fold(0.0f64, f64::max);
        if f_spread <= 1e-12 * (1.0 + fv[b].abs()) || x_spread <= 1e-10 {
            return (pts[b], true);
        }
        let centroid = [0.5 * (pts[b][0] + pts[m][0]), 0.5 * (pts[b][1] + pts[m][1])];
        let reflect = [
            centroid[0] + (centroid[0] - pts[w][0]),
            centroid[1] + (centroid[1] - pts[w][1]),
        ];
        let fr = f(reflect);
        if fr < fv[b] {
            let expand = [
                centroid[0] + 2.0 * (centroid[0] - pts[w][0]),
                centroid[1] + 2.0 * (centroid[1] - pts[w][1]),
            ];
            let fe = f(expand);
            if fe < fr {
                pts[w] = expand;
                fv[w] = fe;
            } else {
                pts[w] = reflect;
                fv[w] = fr;
            }
        } else if fr < fv[m] {
            pts[w] = reflect;
            fv[w] = fr;
        } else {
            let (towards, f_towards) = if fr < fv[w] {
                (reflect, fr)
            } else {
                (pts[w], fv[w])
            };
            let contract = [
                centroid[0] + 0.5 * (towards[0] - centroid[0]),
                centroid[1] + 0.5 * (towards[1] - centroid[1]),
            ];
            let fc = f(contract);
            if fc < f_towards {
                pts[w] = contract;
                fv[w] = fc;
            } else {
                // Shrink towards the best vertex.
                for v in [m, w] {
                    pts[v] = [
                        pts[b][0] + 0.5 * (pts[v][0] - pts[b][0]),
                        pts[b][1] + 0.5 * (pts[v][1] - pts[b][1]),
                    ];
                    fv[v] = f(pts[v]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| fv[a].total_cmp(&fv[b])).unwrap();
    (pts[best], false)
}

/// Count pool variants strictly fitter than every Hamming-1 pool neighbor.
/// Variants with no neighbors are not optima.
pub fn local_optima(landscape: &Landscape, neighbors: &NeighborIndex) -> usize {
    let fit = &landscape.raw_fitness;
    (0..landscape.len())
        .filter(|&i| {
            let nb = neighbors.neighbors(i);
            !nb.is_empty() && nb.iter().all(|&j| fit[i] > fit[j as usize])
        })
        .count()
}

/// Roughness-to-slope ratio from an additive fit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RuggednessFit {
    pub value: f64,
    /// True when the additive design was rank-deficient and the normal
    /// equations needed a ridge term.
    pub used_ridge: bool,
}

/// Fit the best additive (per-position, per-letter) model by least squares
/// and return RMS(residuals) / mean |single-effect coefficient|. Positions
/// use reference-level coding against the wild-type letter (or the most
/// common letter when no wild type is given), so a full-rank design has one
/// coefficient per observed non-reference letter.
pub fn ruggedness(landscape: &Landscape) -> Result<RuggednessFit> {
    let n = landscape.len();
    let length = landscape.length;
    let seqs: Vec<&[u8]> = landscape.sequences.iter().map(|s| s.as_bytes()).collect();

    let mut counts = vec![[0u32; 26]; length];
    for s in &seqs {
        for (p, &b) in s.iter().enumerate() {
            counts[p][(b - b'A') as usize] += 1;
        }
    }
    let wt = landscape.wild_type.as_ref().map(|w| w.as_bytes());
    let mut col_of = vec![[usize::MAX; 26]; length];
    let mut n_cols = 1usize;
    let mut mutated = 0usize;
    for p in 0..length {
        let observed: Vec<usize> = (0..26).filter(|&l| counts[p][l] > 0).collect();
        if observed.len() >= 2 {
            mutated += 1;
        }
        let reference = match wt {
            Some(w) => (w[p] - b'A') as usize,
            // Most common letter; ties go to the alphabetically first.
            None => *observed
                .iter()
                .max_by_key(|&&l| (counts[p][l], std::cmp::Reverse(l)))
                .expect("every position has at least one observed letter"),
        };
        for &l in &observed {
            if l != reference {
                col_of[p][l] = n_cols;
                n_cols += 1;
            }
        }
    }
    if mutated < 2 {
        return Err(Error::Degenerate(format!(
            "additive fit needs at least 2 varying positions, got {mutated}"
        )));
    }

    // Accumulate the normal equations; each row touches at most length + 1
    // indicator columns, all with value 1.
    let mut xtx = Array2::<f64>::zeros((n_cols, n_cols));
    let mut xty = Array1::<f64>::zeros(n_cols);
    let mut active = Vec::with_capacity(length + 1);
    let row_cols = |s: &[u8], active: &mut Vec<usize>| {
        active.clear();
        active.push(0);
        for (p, &b) in s.iter().enumerate() {
            let c = col_of[p][(b - b'A') as usize];
            if c != usize::MAX {
                active.push(c);
            }
        }
    };
    for (r, s) in seqs.iter().enumerate() {
        row_cols(s, &mut active);
        let y = landscape.raw_fitness[r];
        for &a in &active {
            xty[a] += y;
            for &b in &active {
                xtx[[a, b]] += 1.0;
            }
        }
    }

    let mut used_ridge = false;
    let factor = match cholesky_guarded(&xtx) {
        Some(l) => l,
        None => {
            used_ridge = true;
            let mut ridged = xtx.clone();
            for i in 0..n_cols {
                ridged[[i, i]] += RIDGE_LAMBDA;
            }
            cholesky_guarded(&ridged).ok_or(Error::Cholesky {
                max_jitter: RIDGE_LAMBDA,
            })?
        }
    };
    let beta = chol_solve(&factor, &xty);

    let mut ss = 0.0;
    for (r, s) in seqs.iter().enumerate() {
        row_cols(s, &mut active);
        let pred: f64 = active.iter().map(|&c| beta[c]).sum();
        let resid = landscape.raw_fitness[r] - pred;
        ss += resid * resid;
    }
    let rms = (ss / n as f64).sqrt();
    let mean_effect = beta.iter().skip(1).map(|b| b.abs()).sum::<f64>() / (n_cols - 1) as f64;
    if mean_effect <= 0.0 {
        return Err(Error::Degenerate(
            "additive fit found no single-mutant signal to normalize by".into(),
        ));
    }
    Ok(RuggednessFit {
        value: rms / mean_effect,
        used_ridge,
    })
}

/// Cholesky with a relative pivot floor, so an exactly or nearly
/// rank-deficient normal-equation matrix fails instead of producing a
/// garbage solve.
fn cholesky_guarded(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let floor = 1e-9 * (0..n).map(|i| a[[i, i]]).fold(1.0f64, f64::max);
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= floor || sum.is_nan() {
                    return None;
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Percentages of magnitude and non-magnitude (sign or reciprocal-sign)
/// epistasis among classified mutation pairs.
///
/// For every double mutant whose two constituent singles and the reference
/// all exist in the pool, the interaction is e = f_ab - f_a - f_b + f_ref on
/// raw fitness. Pairs with |e| within 5% of the fitness standard deviation
/// are additive; among the rest, a pair is non-magnitude when either single
/// effect changes sign in the other background. Returns (0, 0) when no pair
/// is classified.
pub fn epistasis(landscape: &Landscape) -> (f64, f64) {
    let seqs: Vec<&[u8]> = landscape.sequences.iter().map(|s| s.as_bytes()).collect();
    let fit: HashMap<&[u8], f64> = seqs
        .iter()
        .zip(&landscape.raw_fitness)
        .map(|(&s, &f)| (s, f))
        .collect();
    let ref_idx = reference_index(landscape, &seqs);
    let reference = seqs[ref_idx];
    let f_ref = landscape.raw_fitness[ref_idx];

    let n = landscape.len() as f64;
    let mean = landscape.raw_fitness.iter().sum::<f64>() / n;
    let var = landscape
        .raw_fitness
        .iter()
        .map(|f| (f - mean) * (f - mean))
        .sum::<f64>()
        / n;
    let eta = EPISTASIS_ETA_FRACTION * var.sqrt();

    let sgn = |x: f64| -> i8 {
        if x > 0.0 {
            1
        } else if x < 0.0 {
            -1
        } else {
            0
        }
    };

    let mut scratch = reference.to_vec();
    let (mut n_mag, mut n_non) = (0u64, 0u64);
    for (r, s) in seqs.iter().enumerate() {
        let mut diff = [0usize; 2];
        let mut n_diff = 0usize;
        for (p, (&a, &b)) in s.iter().zip(reference).enumerate() {
            if a != b {
                if n_diff == 2 {
                    n_diff = 3;
                    break;
                }
                diff[n_diff] = p;
                n_diff += 1;
            }
        }
        if n_diff != 2 {
            continue;
        }
        let (i, j) = (diff[0], diff[1]);
        scratch[i] = s[i];
        let f_a = fit.get(&scratch[..]).copied();
        scratch[i] = reference[i];
        scratch[j] = s[j];
        let f_b = fit.get(&scratch[..]).copied();
        scratch[j] = reference[j];
        let (Some(f_a), Some(f_b)) = (f_a, f_b) else {
            continue;
        };
        let f_ab = landscape.raw_fitness[r];
        let eps = f_ab - f_a - f_b + f_ref;
        if eps.abs() <= eta {
            continue;
        }
        if sgn(f_ab - f_b) != sgn(f_a - f_ref) || sgn(f_ab - f_a) != sgn(f_b - f_ref) {
            n_non += 1;
        } else {
            n_mag += 1;
        }
    }
    let classified = n_mag + n_non;
    if classified == 0 {
        (0.0, 0.0)
    } else {
        (
            100.0 * n_mag as f64 / classified as f64,
            100.0 * n_non as f64 / classified as f64,
        )
    }
}

/// Index of the epistasis reference: the wild type when present, otherwise
/// the pool sequence minimizing total Hamming distance to the pool (ties go
/// to the lexicographically smallest sequence, keeping the choice independent
/// of row order).
fn reference_index(landscape: &Landscape, seqs: &[&[u8]]) -> usize {
    if let Some(wt) = &landscape.wild_type {
        let wb = wt.as_bytes();
        return seqs
            .iter()
            .position(|&s| s == wb)
            .expect("wild type is validated to be in the pool");
    }
    let length = landscape.length;
    let n = seqs.len() as u64;
    let mut counts = vec![[0u64; 26]; length];
    for s in seqs {
        for (p, &b) in s.iter().enumerate() {
            counts[p][(b - b'A') as usize] += 1;
        }
    }
    let mut best = 0usize;
    let mut best_score = u64::MAX;
    for (i, s) in seqs.iter().enumerate() {
        // Total Hamming distance to the pool via per-position letter counts.
        let score: u64 = s
            .iter()
            .enumerate()
            .map(|(p, &b)| n - counts[p][(b - b'A') as usize])
            .sum();
        if score < best_score || (score == best_score && *s < seqs[best]) {
            best = i;
            best_score = score;
        }
    }
    best
}

/// Compute every landscape property, recording fallback flags.
pub fn profile(landscape: &Landscape) -> Result<LandscapeProfile> {
    let raw = &landscape.raw_fitness;
    let (otsu, active_pct) = otsu_threshold(raw)?;
    let (skewness, kurtosis) = moments(raw)?;
    let peaks = kde_peaks(raw)?;
    let cauchy = cauchy_peak(raw)?;
    let neighbors = build_neighbor_index(landscape);
    let optima = local_optima(landscape, &neighbors);
    let rugged = ruggedness(landscape)?;
    let (magnitude, non_magnitude) = epistasis(landscape);
    Ok(LandscapeProfile {
        dataset: landscape.name.clone(),
        active_pct,
        otsu_threshold: otsu,
        n: landscape.len(),
        ruggedness: rugged.value,
        cauchy_peak: cauchy.location,
        kurtosis,
        skewness,
        kde_peaks: peaks,
        local_optima: optima,
        magnitude_epistasis_pct: magnitude,
        non_magnitude_epistasis_pct: non_magnitude,
        cauchy_fallback: !cauchy.converged,
        ridge_fallback: rugged.used_ridge,
    })
}

/// Profile several landscapes in parallel.
pub fn profile_all(landscapes: &[Landscape]) -> Result<Vec<LandscapeProfile>> {
    landscapes.par_iter().map(profile).collect()
}

pub const PROFILE_CSV_HEADER: [&str; 12] = [
    "dataset",
    "active_pct",
    "otsu_threshold",
    "n",
    "ruggedness",
    "cauchy_peak",
    "kurtosis",
    "kde_peaks",
    "local_optima",
    "magnitude_epistasis_pct",
    "non_magnitude_epistasis_pct",
    "skewness",
];

/// CSV export. `comments` become '#'-prefixed lines above the header.
pub fn write_profiles_csv<W: Write>(
    profiles: &[LandscapeProfile],
    mut w: W,
    comments: &[String],
) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(PROFILE_CSV_HEADER)
        .map_err(|e| Error::Store(e.to_string()))?;
    for p in profiles {
        wtr.write_record(&[
            p.dataset.clone(),
            p.active_pct.to_string(),
            p.otsu_threshold.to_string(),
            p.n.to_string(),
            p.ruggedness.to_string(),
            p.cauchy_peak.to_string(),
            p.kurtosis.to_string(),
            p.kde_peaks.to_string(),
            p.local_optima.to_string(),
            p.magnitude_epistasis_pct.to_string(),
            p.non_magnitude_epistasis_pct.to_string(),
            p.skewness.to_string(),
        ])
        .map_err(|e| Error::Store(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
