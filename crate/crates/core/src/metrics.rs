//! Per-run and per-model performance metrics: final fitness, payoff gain
//! over the paired baseline, risk statistics (VaR/CVaR), and the cost of
//! reaching a fitness percentile.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::campaign::RunRecord;
use crate::error::{Error, Result};
use crate::landscape::{Landscape, SplitPlan};

/// Which tail a risk statistic summarizes. Fitness-like metrics use the
/// lower tail (low values are bad); cost uses the upper tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailOrientation {
    LowerTail,
    UpperTail,
}

/// Smallest integer >= x, with a guard for products like 0.1 * 20 that land
/// one ulp above the true integer and would otherwise ceil one too high.
fn ceil_count(x: f64) -> usize {
    let nearest = x.round();
    let v = if (x - nearest).abs() < 1e-9 {
        nearest
    } else {
        x.ceil()
    };
    v as usize
}

fn check_alpha(values: &[f64], alpha: f64) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Size(
            "risk statistics need at least one value".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Linear-interpolation quantile of an ascending-sorted, nonempty slice.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Empirical value-at-risk: the ceil(alpha * n)-th smallest value, no
/// interpolation.
pub fn var(values: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(values, alpha)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = ceil_count(alpha * sorted.len() as f64).clamp(1, sorted.len());
    Ok(sorted[m - 1])
}

/// Conditional value-at-risk: the mean of the tail delimited by `var`.
/// Lower tail averages every value <= VaR; the upper tail mirrors via
/// negation, averaging every value >= the upper VaR.
pub fn cvar(values: &[f64], alpha: f64, orientation: TailOrientation) -> Result<f64> {
    match orientation {
        TailOrientation::LowerTail => {
            let cut = var(values, alpha)?;
            let tail: Vec<f64> = values.iter().copied().filter(|v| *v <= cut).collect();
            Ok(tail.iter().sum::<f64>() / tail.len() as f64)
        }
        TailOrientation::UpperTail => {
            let negated: Vec<f64> = values.iter().map(|v| -v).collect();
            Ok(-cvar(&negated, alpha, TailOrientation::LowerTail)?)
        }
    }
}

/// Per-iteration payoff gain of a model run over its paired baseline, for
/// k = 1..K. k=0 is excluded: paired runs share the seed pool, so the
/// difference there is identically zero.
pub fn delta_g_curve(model_run: &RunRecord, baseline_run: &RunRecord) -> Result<Vec<f64>> {
    if model_run.landscape_digest != baseline_run.landscape_digest {
        return Err(Error::Pairing(format!(
            "runs are from different landscapes ({} vs {})",
            model_run.landscape, baseline_run.landscape
        )));
    }
    if model_run.seed != baseline_run.seed {
        return Err(Error::Pairing(format!(
            "seeds differ: {} vs {}",
            model_run.seed, baseline_run.seed
        )));
    }
    if model_run.payoff_curve.len() != baseline_run.payoff_curve.len() {
        return Err(Error::Pairing(format!(
            "iteration counts differ: {} vs {}",
            model_run.payoff_curve.len(),
            baseline_run.payoff_curve.len()
        )));
    }
    if model_run.acquired[0] != baseline_run.acquired[0] {
        return Err(Error::Pairing(
            "seed pools differ; these runs were not paired".into(),
        ));
    }
    Ok(model_run
        .payoff_curve
        .iter()
        .zip(&baseline_run.payoff_curve)
        .skip(1)
        .map(|(m, b)| m - b)
        .collect())
}

/// Trapezoidal area under the gain curve at unit iteration spacing. A
/// single point is returned as-is; an empty curve (a K=0 run) has no
/// optimization iterations and integrates to zero.
pub fn delta_g_auc(curve: &[f64]) -> f64 {
    match curve.len() {
        0 => 0.0,
        1 => curve[0],
        _ => curve.windows(2).map(|w| (w[0] + w[1]) / 2.0).sum(),
    }
}

/// Cost accounting for a campaign: a flat price per tested variant, with
/// the seed pool either billed or not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub unit_cost: f64,
    pub includes_seed: bool,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            unit_cost: 150.0,
            includes_seed: true,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.unit_cost > 0.0 && self.unit_cost.is_finite()) {
            return Err(Error::Config(format!(
                "unit_cost must be positive, got {}",
                self.unit_cost
            )));
        }
        Ok(())
    }
}

/// Spending needed to reach a fitness threshold, or the full budget if the
/// run never got there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostOutcome {
    pub cost_usd: f64,
    pub censored: bool,
    /// First iteration at or above the threshold; None when censored.
    pub k_hit: Option<usize>,
}

/// The fitness value defining the top (100 - percentile)% of the pool:
/// the m-th largest with m = ceil((1 - percentile/100) * n).
pub fn pool_threshold(landscape: &Landscape, pool: &[usize], percentile: f64) -> Result<f64> {
    if !(percentile > 0.0 && percentile < 100.0) {
        return Err(Error::Config(format!(
            "percentile must lie in (0, 100), got {percentile}"
        )));
    }
    if pool.is_empty() {
        return Err(Error::Size("empty candidate pool".into()));
    }
    let mut values: Vec<f64> = pool.iter().map(|&i| landscape.norm_fitness[i]).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let m = ceil_count((1.0 - percentile / 100.0) * values.len() as f64).clamp(1, values.len());
    Ok(values[m - 1])
}

/// Dollar cost to first reach the pool's `percentile` threshold. The
/// threshold is computed over the campaign pool only, since nothing outside
/// it can ever be acquired. Runs that never reach it are censored at the
/// full-budget cost rather than dropped.
pub fn cost_to_threshold(
    run: &RunRecord,
    landscape: &Landscape,
    pool: &[usize],
    cost_model: &CostModel,
    percentile: f64,
) -> Result<CostOutcome> {
    cost_model.validate()?;
    let threshold = pool_threshold(landscape, pool, percentile)?;
    let n_init = run.acquired[0].len();
    let b = run.acquired.get(1).map_or(0, Vec::len);
    let k_max = run.payoff_curve.len() - 1;
    let cost_at = |k: usize| -> f64 {
        let variants = if cost_model.includes_seed {
            n_init + b * k
        } else {
            b * k
        };
        variants as f64 * cost_model.unit_cost
    };
    for (k, payoff) in run.payoff_curve.iter().enumerate() {
        if *payoff >= threshold {
            return Ok(CostOutcome {
                cost_usd: cost_at(k),
                censored: false,
                k_hit: Some(k),
            });
        }
    }
    Ok(CostOutcome {
        cost_usd: cost_at(k_max),
        censored: true,
        k_hit: None,
    })
}

/// How many acquired variants (seed pool included) sit at or above the
/// pool's `percentile` threshold. Ties at the threshold all count.
pub fn count_above_threshold(
    run: &RunRecord,
    landscape: &Landscape,
    pool: &[usize],
    percentile: f64,
) -> Result<usize> {
    let threshold = pool_threshold(landscape, pool, percentile)?;
    Ok(run
        .acquired
        .iter()
        .flatten()
        .filter(|&&i| landscape.norm_fitness[i] >= threshold)
        .count())
}

/// One scored run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model_id: String,
    pub landscape: String,
    pub seed: u64,
    pub final_fitness: f64,
    pub delta_g_auc: f64,
    pub cost_usd: f64,
    pub censored: bool,
    pub n_above_p99: usize,
    pub payoff_curve: Vec<f64>,
}

/// Scored runs keyed by (model, landscape, seed). Baseline runs appear as
/// model "random" with a gain of exactly zero (they pair with themselves).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
}

pub const METRIC_CSV_HEADER: [&str; 8] = [
    "model",
    "landscape",
    "seed",
    "final_fitness",
    "delta_g_auc",
    "cost_usd",
    "censored",
    "n_above_p99",
];

impl MetricTable {
    /// Score every record. Each model record must find its baseline (same
    /// landscape digest and seed) among `records`; landscapes are matched
    /// by content digest.
    pub fn build(
        records: &[RunRecord],
        landscapes: &[(Landscape, SplitPlan)],
        cost_model: &CostModel,
        percentile: f64,
    ) -> Result<MetricTable> {
        let by_digest: HashMap<&str, (&Landscape, &SplitPlan)> = landscapes
            .iter()
            .map(|(l, s)| (l.digest(), (l, s)))
            .collect();
        let baselines: HashMap<(&str, u64), &RunRecord> = records
            .iter()
            .filter(|r| r.is_baseline)
            .map(|r| ((r.landscape_digest.as_str(), r.seed), r))
            .collect();

        let mut rows = Vec::with_capacity(records.len());
        for record in records {
            let (landscape, split) = by_digest
                .get(record.landscape_digest.as_str())
                .copied()
                .ok_or_else(|| {
                    Error::Config(format!(
                        "no landscape with digest {} loaded (run {})",
                        &record.landscape_digest[..12.min(record.landscape_digest.len())],
                        record.model_id
                    ))
                })?;
            let baseline = baselines
                .get(&(record.landscape_digest.as_str(), record.seed))
                .copied()
                .ok_or_else(|| {
                    Error::Pairing(format!(
                        "no baseline for landscape {} seed {}",
                        record.landscape, record.seed
                    ))
                })?;
            let gain = delta_g_curve(record, baseline)?;
            let cost = cost_to_threshold(
                record,
                landscape,
                &split.campaign_pool,
                cost_model,
                percentile,
            )?;
            let n_above =
                count_above_threshold(record, landscape, &split.campaign_pool, percentile)?;
            rows.push(MetricRow {
                model_id: record.model_id.clone(),
                landscape: record.landscape.clone(),
                seed: record.seed,
                final_fitness: record.final_payoff(),
                delta_g_auc: delta_g_auc(&gain),
                cost_usd: cost.cost_usd,
                censored: cost.censored,
                n_above_p99: n_above,
                payoff_curve: record.payoff_curve.clone(),
            });
        }
        Ok(MetricTable { rows })
    }

    /// CSV export. `comments` become '#'-prefixed lines above the header.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(METRIC_CSV_HEADER)
            .map_err(|e| Error::Store(e.to_string()))?;
        for row in &self.rows {
            wtr.write_record(&[
                row.model_id.clone(),
                row.landscape.clone(),
                row.seed.to_string(),
                row.final_fitness.to_string(),
                row.delta_g_auc.to_string(),
                row.cost_usd.to_string(),
                row.censored.to_string(),
                row.n_above_p99.to_string(),
            ])
            .map_err(|e| Error::Store(e.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Which column of the table an aggregate runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    FinalFitness,
    DeltaGAuc,
    CostUsd,
    NAboveP99,
}

impl MetricName {
    pub const ALL: [MetricName; 4] = [
        MetricName::FinalFitness,
        MetricName::DeltaGAuc,
        MetricName::CostUsd,
        MetricName::NAboveP99,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::FinalFitness => "final_fitness",
            MetricName::DeltaGAuc => "delta_g_auc",
            MetricName::CostUsd => "cost_usd",
            MetricName::NAboveP99 => "n_above_p99",
        }
    }

    /// The risky tail for this metric: high cost is bad, low anything else
    /// is bad.
    pub fn orientation(self) -> TailOrientation {
        match self {
            MetricName::CostUsd => TailOrientation::UpperTail,
            _ => TailOrientation::LowerTail,
        }
    }

    pub fn of(self, row: &MetricRow) -> f64 {
        match self {
            MetricName::FinalFitness => row.final_fitness,
            MetricName::DeltaGAuc => row.delta_g_auc,
            MetricName::CostUsd => row.cost_usd,
            MetricName::NAboveP99 => row.n_above_p99 as f64,
        }
    }
}

impl std::fmt::Display for MetricName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateStat {
    Mean,
    Cvar { alpha: f64 },
}

/// Collapse the per-seed rows to one value per (model, landscape), as the
/// seed mean or the CVaR of the metric's risky tail. Censored costs enter
/// at their censored value.
pub fn aggregate(
    table: &MetricTable,
    metric: MetricName,
    stat: AggregateStat,
) -> Result<BTreeMap<(String, String), f64>> {
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for row in &table.rows {
        groups
            .entry((row.model_id.clone(), row.landscape.clone()))
            .or_default()
            .push(metric.of(row));
    }
    let mut out = BTreeMap::new();
    for (key, values) in groups {
        let value = match stat {
            AggregateStat::Mean => values.iter().sum::<f64>() / values.len() as f64,
            AggregateStat::Cvar { alpha } => {
                if values.len() == 1 {
                    values[0]
                } else {
                    cvar(&values, alpha, metric.orientation())?
                }
            }
        };
        out.insert(key, value);
    }
    Ok(out)
}
