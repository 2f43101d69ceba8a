//! Model ranking, rank agreement, bootstrap significance analysis, property
//! correlations, and Pareto frontiers over scored run tables.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::SQRT_2;
use std::io::Write;

use itertools::Itertools;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::analysis::LandscapeProfile;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, cvar, quantile_sorted, AggregateStat, MetricName, MetricTable};
use crate::seeds;

/// Tail level for CVaR-based rankings: the worst 10% of seeds.
pub const DEFAULT_CVAR_ALPHA: f64 = 0.1;
pub const DEFAULT_N_BOOTSTRAP: usize = 1000;
/// Out-of-bag partitions are enumerated exhaustively up to this many.
pub const DEFAULT_OOB_CAP: usize = 10_000;
pub const DEFAULT_OOB_RANK_FRACTION: f64 = 0.8;
/// Two-sided confidence level for percentile intervals.
const CI_LEVEL: f64 = 0.95;

/// Kendall tau-b with tie correction, plus a two-sided p-value from the
/// normal approximation with tie-adjusted variance. O(n log n) via merge
/// counting of discordant pairs.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::Size(format!(
            "rank vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Size(format!(
            "rank correlation needs at least 2 items, got {n}"
        )));
    }
    // Collapse signed zeros so bit-level tie grouping agrees with value
    // equality.
    let canon = |x: &f64| if *x == 0.0 { 0.0 } else { *x };
    let a: Vec<f64> = a.iter().map(canon).collect();
    let b: Vec<f64> = b.iter().map(canon).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));

    // Tie bookkeeping. t-groups come from a, u-groups from b, joint groups
    // from (a, b) pairs.
    let group_stats = |mut sizes_of: Vec<u64>| -> (u64, f64, f64, f64) {
        let mut pairs = 0u64;
        let (mut v, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for t in sizes_of.drain(..) {
            let tf = t as f64;
            pairs += t * (t - 1) / 2;
            v += tf * (tf - 1.0) * (2.0 * tf + 5.0);
            s1 += tf * (tf - 1.0);
            s2 += tf * (tf - 1.0) * (tf - 2.0);
        }
        (pairs, v, s1, s2)
    };
    let run_lengths = |key: &dyn Fn(usize) -> (u64, u64)| -> Vec<u64> {
        let mut sizes = Vec::new();
        let mut run = 1u64;
        for w in idx.windows(2) {
            if key(w[0]) == key(w[1]) {
                run += 1;
            } else {
                sizes.push(run);
                run = 1;
            }
        }
        sizes.push(run);
        sizes
    };
    let a_key = |i: usize| (a[i].to_bits(), 0u64);
    let joint_key = |i: usize| (a[i].to_bits(), b[i].to_bits());
    let (n1, vt, sa1, sa2) = group_stats(run_lengths(&a_key));
    let (n3, _, _, _) = group_stats(run_lengths(&joint_key));

    let mut b_sorted: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let discordant = count_inversions(&mut b_sorted);
    let mut b_groups: Vec<u64> = Vec::new();
    let mut run = 1u64;
    for w in b_sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            b_groups.push(run);
            run = 1;
        }
    }
    b_groups.push(run);
    let (n2, vu, sb1, sb2) = group_stats(b_groups);

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    if n0 == n1 || n0 == n2 {
        return Err(Error::AllTied);
    }
    let s = (n0 - n1 - n2 + n3) as i128 - 2 * discordant as i128;
    let s = s as f64;
    let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    let tau = (s / denom).clamp(-1.0, 1.0);

    let nf = n as f64;
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let mut variance = (v0 - vt - vu) / 18.0 + sa1 * sb1 / (2.0 * nf * (nf - 1.0));
    if n > 2 {
        variance += sa2 * sb2 / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
    }
    let p_value = if variance > 0.0 {
        erfc((s / variance.sqrt()).abs() / SQRT_2)
    } else {
        1.0
    };
    Ok((tau, p_value))
}

/// Count strictly decreasing pairs while merge-sorting in place. Equal
/// elements are kept stable and not counted.
fn count_inversions(values: &mut [f64]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = values.split_at_mut(mid);
    let mut count = count_inversions(left) + count_inversions(right);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        if left[i] <= right[j] {
            merged.push(left[i]);
            i += 1;
        } else {
            count += (left.len() - i) as u64;
            merged.push(right[j]);
            j += 1;
        }
    }
    merged.extend_from_slice(&left[i..]);
    merged.extend_from_slice(&right[j..]);
    values.copy_from_slice(&merged);
    count
}

/// Sorting direction for a metric: everything except cost is higher-better.
pub fn higher_is_better(metric: MetricName) -> bool {
    !matches!(metric, MetricName::CostUsd)
}

/// Which rows a ranking covers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankScope {
    Landscape(String),
    /// Equal-weight average of per-landscape aggregates.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub model_id: String,
    pub value: f64,
}

/// Models ordered best-first under a metric's direction; ties broken
/// lexicographically by model identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub metric: MetricName,
    pub stat: AggregateStat,
    pub scope: RankScope,
    pub entries: Vec<RankedModel>,
}

pub fn rank_models(
    table: &MetricTable,
    metric: MetricName,
    stat: AggregateStat,
    scope: &RankScope,
) -> Result<Ranking> {
    let agg = aggregate(table, metric, stat)?;
    let models: BTreeSet<String> = table.rows.iter().map(|r| r.model_id.clone()).collect();
    let landscapes: BTreeSet<String> = table.rows.iter().map(|r| r.landscape.clone()).collect();
    if models.is_empty() {
        return Err(Error::Coverage("metric table has no rows".into()));
    }
    let mut entries = Vec::with_capacity(models.len());
    for model in &models {
        let value = match scope {
            RankScope::Landscape(name) => {
                *agg.get(&(model.clone(), name.clone())).ok_or_else(|| {
                    Error::Coverage(format!("model '{model}' has no rows for '{name}'"))
                })?
            }
            RankScope::All => {
                let mut sum = 0.0;
                for l in &landscapes {
                    sum += *agg.get(&(model.clone(), l.clone())).ok_or_else(|| {
                        Error::Coverage(format!("model '{model}' has no rows for '{l}'"))
                    })?;
                }
                sum / landscapes.len() as f64
            }
        };
        entries.push(RankedModel {
            model_id: model.clone(),
            value,
        });
    }
    let best_first = higher_is_better(metric);
    entries.sort_by(|x, y| {
        let ord = if best_first {
            y.value.total_cmp(&x.value)
        } else {
            x.value.total_cmp(&y.value)
        };
        ord.then_with(|| x.model_id.cmp(&y.model_id))
    });
    Ok(Ranking {
        metric,
        stat,
        scope: scope.clone(),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapScheme {
    Naive,
    OutOfBag,
}

/// Percentile confidence interval around a point estimate. The percentile
/// method does not force lower <= point <= upper, only lower <= upper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub scheme: BootstrapScheme,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub n_bootstrap: usize,
}

impl BootstrapReport {
    /// A confidence interval containing zero means the savings are not
    /// statistically significant at the report's level.
    pub fn significant(&self) -> bool {
        self.lower > 0.0 || self.upper < 0.0
    }
}

fn percentile_ci(samples: &[f64], level: f64) -> (f64, f64) {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let half_tail = (1.0 - level) / 2.0;
    (
        quantile_sorted(&sorted, half_tail),
        quantile_sorted(&sorted, 1.0 - half_tail),
    )
}

/// Per-landscape metric values aligned on a common seed grid:
/// `values[metric][model][seed_slot]`.
struct Panel {
    models: Vec<String>,
    n_seeds: usize,
    values: Vec<Vec<Vec<f64>>>,
}

fn metric_slot(metric: MetricName) -> usize {
    MetricName::ALL
        .iter()
        .position(|m| *m == metric)
        .expect("every metric is listed in ALL")
}

fn build_panel(table: &MetricTable, landscape: &str) -> Result<Panel> {
    let mut per_model: BTreeMap<String, BTreeMap<u64, [f64; 4]>> = BTreeMap::new();
    for row in table.rows.iter().filter(|r| r.landscape == landscape) {
        let mut vals = [0.0; 4];
        for (slot, metric) in MetricName::ALL.into_iter().enumerate() {
            vals[slot] = metric.of(row);
        }
        if per_model
            .entry(row.model_id.clone())
            .or_default()
            .insert(row.seed, vals)
            .is_some()
        {
            return Err(Error::Coverage(format!(
                "duplicate row for model '{}' seed {} on '{landscape}'",
                row.model_id, row.seed
            )));
        }
    }
    if per_model.is_empty() {
        return Err(Error::Coverage(format!(
            "no rows for landscape '{landscape}'"
        )));
    }
    let seed_grid: BTreeSet<u64> = per_model.values().flat_map(|m| m.keys().copied()).collect();
    let mut models = Vec::with_capacity(per_model.len());
    let mut values: Vec<Vec<Vec<f64>>> = (0..4)
        .map(|_| Vec::with_capacity(per_model.len()))
        .collect();
    for (model, by_seed) in &per_model {
        if by_seed.len() != seed_grid.len() {
            return Err(Error::Coverage(format!(
                "model '{model}' covers {} of {} seeds on '{landscape}'",
                by_seed.len(),
                seed_grid.len()
            )));
        }
        models.push(model.clone());
        for slot in 0..4 {
            values[slot].push(by_seed.values().map(|v| v[slot]).collect());
        }
    }
    Ok(Panel {
        models,
        n_seeds: seed_grid.len(),
        values,
    })
}

impl Panel {
    fn metric_values(&self, metric: MetricName, model: usize) -> &[f64] {
        &self.values[metric_slot(metric)][model]
    }

    /// Index of the best model under `score` (higher wins, ties go to the
    /// lexicographically smallest identifier, which is the lowest index
    /// because models are sorted).
    fn top_model<F: Fn(usize) -> f64>(&self, score: F) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for m in 0..self.models.len() {
            let s = score(m);
            if s > best_score {
                best = m;
                best_score = s;
            }
        }
        best
    }
}

fn gather(values: &[f64], indices: &[usize]) -> Vec<f64> {
    indices.iter().map(|&i| values[i]).collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Cost difference between the model a mean-fitness ranking selects and the
/// model a CVaR-fitness ranking selects, on the given per-model seed draws.
/// Positive savings mean the CVaR-selected model is cheaper.
fn selection_savings(panel: &Panel, draws: &[Vec<usize>]) -> Result<f64> {
    let n_models = panel.models.len();
    let mut mean_fit = Vec::with_capacity(n_models);
    let mut cvar_fit = Vec::with_capacity(n_models);
    let mut mean_cost = Vec::with_capacity(n_models);
    for (m, draw) in draws.iter().enumerate().take(n_models) {
        let fit = gather(panel.metric_values(MetricName::FinalFitness, m), draw);
        let cost = gather(panel.metric_values(MetricName::CostUsd, m), draw);
        mean_fit.push(mean(&fit));
        cvar_fit.push(if fit.len() == 1 {
            fit[0]
        } else {
            cvar(
                &fit,
                DEFAULT_CVAR_ALPHA,
                MetricName::FinalFitness.orientation(),
            )?
        });
        mean_cost.push(mean(&cost));
    }
    let by_mean = panel.top_model(|m| mean_fit[m]);
    let by_cvar = panel.top_model(|m| cvar_fit[m]);
    Ok(mean_cost[by_mean] - mean_cost[by_cvar])
}

/// Bootstrap the cost savings of CVaR-based over mean-based model selection
/// by resampling each model's seeds with replacement. The point estimate
/// uses the unresampled table.
pub fn bootstrap_naive(
    table: &MetricTable,
    landscape: &str,
    n_bootstrap: usize,
    rng_seed: u64,
) -> Result<BootstrapReport> {
    if n_bootstrap == 0 {
        return Err(Error::Config("n_bootstrap must be positive".into()));
    }
    let panel = build_panel(table, landscape)?;
    if panel.n_seeds < 2 {
        return Err(Error::Size(format!(
            "naive bootstrap needs at least 2 seeds, got {}",
            panel.n_seeds
        )));
    }
    let identity: Vec<Vec<usize>> = vec![(0..panel.n_seeds).collect(); panel.models.len()];
    let point = selection_savings(&panel, &identity)?;
    let savings: Vec<f64> = (0..n_bootstrap)
        .into_par_iter()
        .map(|sample| {
            let mut rng = seeds::stream("bootstrap-naive", landscape, &[rng_seed, sample as u64]);
            let draws: Vec<Vec<usize>> = (0..panel.models.len())
                .map(|_| {
                    (0..panel.n_seeds)
                        .map(|_| rng.random_range(0..panel.n_seeds))
                        .collect()
                })
                .collect();
            selection_savings(&panel, &draws)
        })
        .collect::<Result<_>>()?;
    let (lower, upper) = percentile_ci(&savings, CI_LEVEL);
    Ok(BootstrapReport {
        scheme: BootstrapScheme::Naive,
        point,
        lower,
        upper,
        level: CI_LEVEL,
        n_bootstrap,
    })
}

/// Average and worst-case savings over out-of-bag seed partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OobSavingsReport {
    pub average: BootstrapReport,
    pub worst_case: BootstrapReport,
    /// Total rank/evaluation partitions at this seed count and fraction.
    pub n_partitions_total: u128,
    /// True when partitions were sampled instead of fully enumerated.
    pub capped: bool,
}

/// C(n, k) in exact integer arithmetic.
fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 1..=k {
        result = result * (n - k + i) as u128 / i as u128;
    }
    result
}

/// Out-of-bag selection analysis: split seeds into ranking and evaluation
/// sets at `rank_fraction`, select the top model by mean and by CVaR fitness
/// on the ranking seeds, and compare the selections' mean and worst costs on
/// the held-out seeds. All partitions are enumerated when they fit under
/// `cap`; otherwise `cap` partitions are sampled uniformly.
pub fn bootstrap_oob(
    table: &MetricTable,
    landscape: &str,
    rank_fraction: f64,
    cap: usize,
    rng_seed: u64,
) -> Result<OobSavingsReport> {
    if !(rank_fraction > 0.0 && rank_fraction < 1.0) {
        return Err(Error::Config(format!(
            "rank_fraction must lie in (0, 1), got {rank_fraction}"
        )));
    }
    if cap == 0 {
        return Err(Error::Config("partition cap must be positive".into()));
    }
    let panel = build_panel(table, landscape)?;
    let n = panel.n_seeds;
    if n < 5 {
        return Err(Error::Size(format!(
            "out-of-bag analysis needs at least 5 seeds, got {n}"
        )));
    }
    let n_rank = ((rank_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let n_eval = n - n_rank;
    let total = binomial(n, n_eval);
    let capped = total > cap as u128;
    let eval_sets: Vec<Vec<usize>> = if capped {
        let mut rng = seeds::stream("bootstrap-oob", landscape, &[rng_seed]);
        (0..cap)
            .map(|_| {
                let mut set = rand::seq::index::sample(&mut rng, n, n_eval).into_vec();
                set.sort_unstable();
                set
            })
            .collect()
    } else {
        (0..n).combinations(n_eval).collect()
    };

    let samples: Vec<(f64, f64)> = eval_sets
        .par_iter()
        .map(|eval_idx| {
            let in_eval: Vec<bool> = {
                let mut mask = vec![false; n];
                for &i in eval_idx {
                    mask[i] = true;
                }
                mask
            };
            let rank_idx: Vec<usize> = (0..n).filter(|&i| !in_eval[i]).collect();
            let n_models = panel.models.len();
            let mut mean_fit = Vec::with_capacity(n_models);
            let mut cvar_fit = Vec::with_capacity(n_models);
            for m in 0..n_models {
                let fit = gather(panel.metric_values(MetricName::FinalFitness, m), &rank_idx);
                mean_fit.push(mean(&fit));
                cvar_fit.push(if fit.len() == 1 {
                    fit[0]
                } else {
                    cvar(
                        &fit,
                        DEFAULT_CVAR_ALPHA,
                        MetricName::FinalFitness.orientation(),
                    )?
                });
            }
            let by_mean = panel.top_model(|m| mean_fit[m]);
            let by_cvar = panel.top_model(|m| cvar_fit[m]);
            let eval_cost =
                |m: usize| gather(panel.metric_values(MetricName::CostUsd, m), eval_idx);
            let (cost_mean_sel, cost_cvar_sel) = (eval_cost(by_mean), eval_cost(by_cvar));
            let worst = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Ok((
                mean(&cost_mean_sel) - mean(&cost_cvar_sel),
                worst(&cost_mean_sel) - worst(&cost_cvar_sel),
            ))
        })
        .collect::<Result<_>>()?;

    let report = |values: Vec<f64>| {
        let (lower, upper) = percentile_ci(&values, CI_LEVEL);
        BootstrapReport {
            scheme: BootstrapScheme::OutOfBag,
            point: mean(&values),
            lower,
            upper,
            level: CI_LEVEL,
            n_bootstrap: values.len(),
        }
    };
    let average = report(samples.iter().map(|s| s.0).collect());
    let worst_case = report(samples.iter().map(|s| s.1).collect());
    Ok(OobSavingsReport {
        average,
        worst_case,
        n_partitions_total: total,
        capped,
    })
}

/// One correlation entry; `significant` marks confidence intervals that
/// exclude zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub tau: f64,
    pub lower: f64,
    pub upper: f64,
    pub significant: bool,
}

/// Kendall correlations between landscape properties (rows) and aggregate
/// model performance (columns). Missing cells mark undefined correlations
/// (a property or performance series with no variation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub properties: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<Option<CorrelationCell>>>,
    pub n_bootstrap: usize,
}

/// The performance columns: each metric summarized by seed mean and by CVaR.
fn performance_columns() -> Vec<(MetricName, AggregateStat)> {
    let mut cols = Vec::with_capacity(MetricName::ALL.len() * 2);
    for metric in MetricName::ALL {
        cols.push((metric, AggregateStat::Mean));
        cols.push((
            metric,
            AggregateStat::Cvar {
                alpha: DEFAULT_CVAR_ALPHA,
            },
        ));
    }
    cols
}

/// Per-landscape performance for one column: the model average of each
/// model's seed aggregate over the drawn seed slots.
fn column_performance(
    panel: &Panel,
    metric: MetricName,
    stat: AggregateStat,
    draw: &[usize],
) -> Result<f64> {
    let mut acc = 0.0;
    for m in 0..panel.models.len() {
        let vals = gather(panel.metric_values(metric, m), draw);
        acc += match stat {
            AggregateStat::Mean => mean(&vals),
            AggregateStat::Cvar { alpha } => {
                if vals.len() == 1 {
                    vals[0]
                } else {
                    cvar(&vals, alpha, metric.orientation())?
                }
            }
        };
    }
    Ok(acc / panel.models.len() as f64)
}

/// Correlate landscape properties with bootstrap-stabilized model
/// performance. Per bootstrap sample, each landscape's seeds are resampled
/// with replacement (shared across its models, preserving pairing), the
/// per-column performance is recomputed, and Kendall tau against each
/// property is recorded; CIs are percentile intervals over samples. The
/// point estimate uses unresampled data.
pub fn property_correlations(
    profiles: &[LandscapeProfile],
    table: &MetricTable,
    n_bootstrap: usize,
    rng_seed: u64,
) -> Result<CorrelationMatrix> {
    if profiles.len() < 3 {
        return Err(Error::Size(format!(
            "property correlation needs at least 3 landscapes, got {}",
            profiles.len()
        )));
    }
    if n_bootstrap == 0 {
        return Err(Error::Config("n_bootstrap must be positive".into()));
    }
    let panels: Vec<Panel> = profiles
        .iter()
        .map(|p| build_panel(table, &p.dataset))
        .collect::<Result<_>>()?;
    let columns = performance_columns();

    // perf[column][landscape] for one set of per-landscape draws.
    let perf_for = |draws: &dyn Fn(usize) -> Vec<usize>| -> Result<Vec<Vec<f64>>> {
        let mut perf = vec![vec![0.0; panels.len()]; columns.len()];
        for (l, panel) in panels.iter().enumerate() {
            let draw = draws(l);
            for (c, &(metric, stat)) in columns.iter().enumerate() {
                perf[c][l] = column_performance(panel, metric, stat, &draw)?;
            }
        }
        Ok(perf)
    };
    let point_perf = perf_for(&|l| (0..panels[l].n_seeds).collect())?;

    let sample_taus: Vec<Vec<Vec<Option<f64>>>> = (0..n_bootstrap)
        .into_par_iter()
        .map(|sample| {
            let perf = perf_for(&|l| {
                let mut rng = seeds::stream(
                    "bootstrap-props",
                    &profiles[l].dataset,
                    &[rng_seed, sample as u64],
                );
                (0..panels[l].n_seeds)
                    .map(|_| rng.random_range(0..panels[l].n_seeds))
                    .collect()
            })?;
            let taus = LandscapeProfile::PROPERTY_NAMES
                .iter()
                .map(|prop| {
                    let x: Vec<f64> = profiles
                        .iter()
                        .map(|p| p.property(prop).expect("known property name"))
                        .collect();
                    columns
                        .iter()
                        .enumerate()
                        .map(|(c, _)| match kendall_tau(&x, &perf[c]) {
                            Ok((tau, _)) => Some(tau),
                            Err(Error::AllTied) => None,
                            Err(_) => None,
                        })
                        .collect()
                })
                .collect();
            Ok(taus)
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(LandscapeProfile::PROPERTY_NAMES.len());
    for (r, prop) in LandscapeProfile::PROPERTY_NAMES.iter().enumerate() {
        let x: Vec<f64> = profiles
            .iter()
            .map(|p| p.property(prop).expect("known property name"))
            .collect();
        let mut row = Vec::with_capacity(columns.len());
        for c in 0..columns.len() {
            let cell = match kendall_tau(&x, &point_perf[c]) {
                Ok((tau, _)) => {
                    let resampled: Vec<f64> = sample_taus.iter().filter_map(|s| s[r][c]).collect();
                    let (lower, upper) = if resampled.is_empty() {
                        (tau, tau)
                    } else {
                        percentile_ci(&resampled, CI_LEVEL)
                    };
                    Some(CorrelationCell {
                        tau,
                        lower,
                        upper,
                        significant: lower > 0.0 || upper < 0.0,
                    })
                }
                Err(Error::AllTied) => None,
                Err(e) => return Err(e),
            };
            row.push(cell);
        }
        cells.push(row);
    }
    Ok(CorrelationMatrix {
        properties: LandscapeProfile::PROPERTY_NAMES
            .iter()
            .map(|s| s.to_string())
            .collect(),
        columns: columns
            .iter()
            .map(|(m, s)| {
                let suffix = match s {
                    AggregateStat::Mean => "mean",
                    AggregateStat::Cvar { .. } => "cvar",
                };
                format!("{m}_{suffix}")
            })
            .collect(),
        cells,
        n_bootstrap,
    })
}

/// A model's position on the performance/risk plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub model_id: String,
    pub performance: f64,
    pub risk: f64,
}

/// Points not strictly dominated under the given per-axis directions
/// (`true` = higher is better). A point dominates another when it is at
/// least as good on both axes and strictly better on one. Output is sorted
/// by performance, then risk, then identifier.
pub fn pareto_front(points: &[ParetoPoint], higher_better: (bool, bool)) -> Vec<ParetoPoint> {
    let canon = |p: &ParetoPoint| {
        (
            if higher_better.0 {
                p.performance
            } else {
                -p.performance
            },
            if higher_better.1 { p.risk } else { -p.risk },
        )
    };
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&i, &j| {
        let (xi, yi) = canon(&points[i]);
        let (xj, yj) = canon(&points[j]);
        xj.total_cmp(&xi).then(yj.total_cmp(&yi))
    });

    let mut front = Vec::new();
    let mut best_y_strict = f64::NEG_INFINITY;
    let mut g = 0;
    while g < idx.len() {
        let (x, _) = canon(&points[idx[g]]);
        let mut end = g;
        while end < idx.len() && canon(&points[idx[end]]).0 == x {
            end += 1;
        }
        // Within an equal-x group only the maximal y survives, and only if
        // no strictly-better-x point matched or beat it.
        let group_max_y = canon(&points[idx[g]]).1;
        for &i in &idx[g..end] {
            let y = canon(&points[i]).1;
            if y == group_max_y && y > best_y_strict {
                front.push(points[i].clone());
            }
        }
        best_y_strict = best_y_strict.max(group_max_y);
        g = end;
    }
    front.sort_by(|a, b| {
        a.performance
            .total_cmp(&b.performance)
            .then(a.risk.total_cmp(&b.risk))
            .then_with(|| a.model_id.cmp(&b.model_id))
    });
    front
}

/// Scope label for the equal-weight all-landscape agreement row.
pub const ALL_DATASETS_LABEL: &str = "all";

/// Rank agreement between mean-based and CVaR-based model orderings on one
/// landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub landscape: String,
    pub tau: f64,
    pub p_value: f64,
}

/// Kendall tau between mean-aggregate and CVaR-aggregate model values, per
/// landscape plus an equal-weight all-landscape row. The correlation is
/// computed on aggregate values directly; reversing both orderings (as the
/// cost direction does) leaves tau unchanged.
pub fn rank_agreement_table(table: &MetricTable, metric: MetricName) -> Result<Vec<AgreementRow>> {
    let mean_agg = aggregate(table, metric, AggregateStat::Mean)?;
    let cvar_agg = aggregate(
        table,
        metric,
        AggregateStat::Cvar {
            alpha: DEFAULT_CVAR_ALPHA,
        },
    )?;
    let models: BTreeSet<String> = table.rows.iter().map(|r| r.model_id.clone()).collect();
    let landscapes: BTreeSet<String> = table.rows.iter().map(|r| r.landscape.clone()).collect();
    if models.is_empty() {
        return Err(Error::Coverage("metric table has no rows".into()));
    }
    let values_for = |agg: &BTreeMap<(String, String), f64>, l: &str| -> Result<Vec<f64>> {
        models
            .iter()
            .map(|m| {
                agg.get(&(m.clone(), l.to_string()))
                    .copied()
                    .ok_or_else(|| Error::Coverage(format!("model '{m}' has no rows for '{l}'")))
            })
            .collect()
    };
    let mut rows = Vec::with_capacity(landscapes.len() + 1);
    let mut mean_all = vec![0.0; models.len()];
    let mut cvar_all = vec![0.0; models.len()];
    for l in &landscapes {
        let mean_vals = values_for(&mean_agg, l)?;
        let cvar_vals = values_for(&cvar_agg, l)?;
        for (acc, v) in mean_all.iter_mut().zip(&mean_vals) {
            *acc += v / landscapes.len() as f64;
        }
        for (acc, v) in cvar_all.iter_mut().zip(&cvar_vals) {
            *acc += v / landscapes.len() as f64;
        }
        let (tau, p_value) = kendall_tau(&mean_vals, &cvar_vals)?;
        rows.push(AgreementRow {
            landscape: l.clone(),
            tau,
            p_value,
        });
    }
    let (tau, p_value) = kendall_tau(&mean_all, &cvar_all)?;
    rows.push(AgreementRow {
        landscape: ALL_DATASETS_LABEL.to_string(),
        tau,
        p_value,
    });
    Ok(rows)
}

/// Correlation of one landscape property with per-landscape rank agreement.
/// `correlation` is None when the property has no variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyAgreement {
    pub property: String,
    /// (tau, p_value)
    pub correlation: Option<(f64, f64)>,
}

/// Kendall tau between each landscape property and the per-landscape
/// agreement values. Agreement rows are matched to profiles by dataset name;
/// the all-landscape row is ignored.
pub fn agreement_property_correlation(
    agreement: &[AgreementRow],
    profiles: &[LandscapeProfile],
) -> Result<Vec<PropertyAgreement>> {
    let by_name: BTreeMap<&str, f64> = agreement
        .iter()
        .filter(|r| r.landscape != ALL_DATASETS_LABEL)
        .map(|r| (r.landscape.as_str(), r.tau))
        .collect();
    let matched: Vec<&LandscapeProfile> = profiles
        .iter()
        .filter(|p| by_name.contains_key(p.dataset.as_str()))
        .collect();
    if matched.len() < 3 {
        return Err(Error::Size(format!(
            "agreement correlation needs at least 3 matched landscapes, got {}",
            matched.len()
        )));
    }
    let taus: Vec<f64> = matched
        .iter()
        .map(|p| by_name[p.dataset.as_str()])
        .collect();
    let mut out = Vec::with_capacity(LandscapeProfile::PROPERTY_NAMES.len());
    for prop in LandscapeProfile::PROPERTY_NAMES {
        let x: Vec<f64> = matched
            .iter()
            .map(|p| p.property(prop).expect("known property name"))
            .collect();
        let correlation = match kendall_tau(&x, &taus) {
            Ok(pair) => Some(pair),
            Err(Error::AllTied) => None,
            Err(e) => return Err(e),
        };
        out.push(PropertyAgreement {
            property: prop.to_string(),
            correlation,
        });
    }
    Ok(out)
}

/// CSV export of a ranking. `comments` become '#'-prefixed lines above the
/// header.
pub fn write_ranking_csv<W: Write>(ranking: &Ranking, mut w: W, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["rank", "model", "value"])
        .map_err(|e| Error::Store(e.to_string()))?;
    for (i, entry) in ranking.entries.iter().enumerate() {
        wtr.write_record(&[
            (i + 1).to_string(),
            entry.model_id.clone(),
            entry.value.to_string(),
        ])
        .map_err(|e| Error::Store(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// CSV export of an agreement table.
pub fn write_agreement_csv<W: Write>(
    rows: &[AgreementRow],
    mut w: W,
    comments: &[String],
) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["landscape", "tau", "p_value"])
        .map_err(|e| Error::Store(e.to_string()))?;
    for row in rows {
        wtr.write_record(&[
            row.landscape.clone(),
            row.tau.to_string(),
            row.p_value.to_string(),
        ])
        .map_err(|e| Error::Store(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Long-format CSV export of a correlation matrix; undefined cells leave
/// their numeric fields empty.
pub fn write_correlation_csv<W: Write>(
    matrix: &CorrelationMatrix,
    mut w: W,
    comments: &[String],
) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "property",
        "performance",
        "tau",
        "ci_lower",
        "ci_upper",
        "significant",
    ])
    .map_err(|e| Error::Store(e.to_string()))?;
    for (r, prop) in matrix.properties.iter().enumerate() {
        for (c, col) in matrix.columns.iter().enumerate() {
            let record = match &matrix.cells[r][c] {
                Some(cell) => [
                    prop.clone(),
                    col.clone(),
                    cell.tau.to_string(),
                    cell.lower.to_string(),
                    cell.upper.to_string(),
                    cell.significant.to_string(),
                ],
                None => [
                    prop.clone(),
                    col.clone(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ],
            };
            wtr.write_record(&record)
                .map_err(|e| Error::Store(e.to_string()))?;
        }
    }
    wtr.flush()?;
    Ok(())
}
