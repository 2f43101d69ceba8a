//! The four subcommands. Each returns `Outcome::Partial` when some cells
//! failed but useful output was still produced; hard errors bubble up as
//! strings and become exit code 1.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use bobench_core::acquisition::AcquisitionSpec;
use bobench_core::analysis;
use bobench_core::campaign::{
    run_grid, CampaignConfig, ModelSpec, PreparedLandscape, RunStore, BASELINE_ID,
};
use bobench_core::encoding::{encode_one_hot, load_embeddings, EncodingKind};
use bobench_core::landscape::{
    generate_synthetic, load_landscape, make_split, Landscape, SplitPlan,
};
use bobench_core::metrics::{AggregateStat, MetricName, MetricRow, MetricTable};
use bobench_core::stats::{
    bootstrap_naive, bootstrap_oob, pareto_front, rank_agreement_table, rank_models,
    write_agreement_csv, write_ranking_csv, BootstrapReport, OobSavingsReport, ParetoPoint,
    RankScope,
};
use bobench_core::surrogate::grid::{grid_search, GridCache, GridCacheEntry};

use crate::config::{LandscapeSource, Resolved};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Partial,
}

pub type CmdResult = Result<Outcome, String>;

fn load_source(source: &LandscapeSource) -> Result<Landscape, String> {
    match source {
        LandscapeSource::File(f) => {
            load_landscape(&f.path).map_err(|e| format!("cannot load {}: {e}", f.path.display()))
        }
        LandscapeSource::Synthetic(s) => {
            let spec = s.to_spec()?;
            generate_synthetic(&spec).map_err(|e| format!("cannot generate '{}': {e}", s.name))
        }
    }
}

/// Landscape plus split plus every configured encoding matrix.
fn prepare_source(
    resolved: &Resolved,
    source: &LandscapeSource,
) -> Result<PreparedLandscape, String> {
    let cfg = &resolved.config;
    let landscape = load_source(source)?;
    let split = make_split(&landscape, cfg.rng_seed)
        .map_err(|e| format!("cannot split '{}': {e}", landscape.name))?;
    let mut encodings = BTreeMap::new();
    if cfg.encodings.one_hot {
        let matrix = encode_one_hot(&landscape)
            .map_err(|e| format!("cannot one-hot encode '{}': {e}", landscape.name))?;
        encodings.insert(EncodingKind::OneHot.to_string(), matrix);
    }
    for (id, path) in &cfg.encodings.embeddings {
        let matrix = load_embeddings(&landscape, path, id.clone()).map_err(|e| {
            format!(
                "embedding '{id}' ({}) for '{}': {e}",
                path.display(),
                landscape.name
            )
        })?;
        encodings.insert(id.clone(), matrix);
    }
    Ok(PreparedLandscape {
        landscape,
        split,
        encodings,
    })
}

/// Mirror of the run store's file naming, for auxiliary per-landscape files.
fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn create_out_file(dir: &Path, name: &str) -> Result<File, String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let path = dir.join(name);
    File::create(&path).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn outcome(failures: usize) -> Outcome {
    if failures == 0 {
        Outcome::Clean
    } else {
        Outcome::Partial
    }
}

// ---------------------------------------------------------------- profile --

pub fn profile(resolved: &Resolved) -> CmdResult {
    let cfg = &resolved.config;
    let mut profiles = Vec::new();
    let mut failures = 0usize;
    for source in &cfg.landscapes {
        let landscape = match load_source(source) {
            Ok(l) => l,
            Err(e) => {
                eprintln!("profile: {e}");
                failures += 1;
                continue;
            }
        };
        match analysis::profile(&landscape) {
            Ok(p) => {
                println!(
                    "{}: n={} active={:.2}% optima={} kde_peaks={}",
                    p.dataset, p.n, p.active_pct, p.local_optima, p.kde_peaks
                );
                profiles.push(p);
            }
            Err(e) => {
                eprintln!("profile: '{}': {e}", landscape.name);
                failures += 1;
            }
        }
    }
    if profiles.is_empty() {
        return Err(format!("all {failures} landscapes failed to profile"));
    }
    let file = create_out_file(&cfg.out_dir, "profiles.csv")?;
    analysis::write_profiles_csv(&profiles, file, &resolved.header_comments())
        .map_err(|e| e.to_string())?;
    println!("wrote {}", cfg.out_dir.join("profiles.csv").display());
    Ok(outcome(failures))
}

// ------------------------------------------------------------------- tune --

fn cache_path(out_dir: &Path) -> PathBuf {
    out_dir.join("grid_cache.json")
}

/// Search every (landscape, encoding, surrogate) cell that the cache does
/// not already hold. Returns (fresh, cached, failed).
fn fill_cache(
    resolved: &Resolved,
    preps: &[PreparedLandscape],
    cache: &mut GridCache,
) -> Result<(usize, usize, usize), String> {
    let cfg = &resolved.config;
    let kinds = cfg.surrogate_kinds()?;
    let (mut fresh, mut cached, mut failed) = (0usize, 0usize, 0usize);
    for prep in preps {
        for (enc_id, matrix) in &prep.encodings {
            for &kind in &kinds {
                let label = format!("{}/{}/{}", prep.landscape.name, enc_id, kind.as_str());
                if let Some(entry) = cache.get(prep.landscape.digest(), enc_id, kind.as_str()) {
                    let rmse = entry
                        .test_rmse
                        .map(|r| format!("{r:.4}"))
                        .unwrap_or_else(|| "-".into());
                    println!("{label}: cached (rmse {rmse})");
                    cached += 1;
                    continue;
                }
                match grid_search(
                    kind,
                    &prep.landscape,
                    &prep.split,
                    matrix,
                    &cfg.base_spec(kind),
                ) {
                    Ok(win) => {
                        let rmse = win
                            .test_rmse
                            .map(|r| format!("{r:.4}"))
                            .unwrap_or_else(|| "-".into());
                        println!(
                            "{label}: rmse {rmse} after {} grid evaluations",
                            win.n_evaluated
                        );
                        cache.put(GridCacheEntry {
                            landscape_digest: prep.landscape.digest().to_string(),
                            encoding: enc_id.clone(),
                            surrogate: kind.as_str().to_string(),
                            spec: win.spec,
                            test_rmse: win.test_rmse,
                        });
                        fresh += 1;
                    }
                    Err(e) => {
                        eprintln!("tune: {label}: {e}");
                        failed += 1;
                    }
                }
            }
        }
    }
    Ok((fresh, cached, failed))
}

pub fn tune(resolved: &Resolved) -> CmdResult {
    let cfg = &resolved.config;
    let preps = cfg
        .landscapes
        .iter()
        .map(|s| prepare_source(resolved, s))
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| format!("cannot create {}: {e}", cfg.out_dir.display()))?;
    let path = cache_path(&cfg.out_dir);
    let mut cache = GridCache::load(&path).map_err(|e| e.to_string())?;
    let (fresh, cached, failed) = fill_cache(resolved, &preps, &mut cache)?;
    // Partial results are still worth keeping: a rerun retries only the
    // failed cells.
    cache.save().map_err(|e| e.to_string())?;
    println!(
        "tuned {fresh} cells ({cached} cached, {failed} failed); cache at {}",
        path.display()
    );
    Ok(outcome(failed))
}

// -------------------------------------------------------------------- run --

/// The benchmarked grid on one landscape, with tuned hyperparameters filled
/// in per (encoding, surrogate) cell. Canonical order: surrogate outermost,
/// then acquisition, then encoding.
fn tuned_models(
    resolved: &Resolved,
    cache: &GridCache,
    prep: &PreparedLandscape,
) -> Result<Vec<ModelSpec>, String> {
    let cfg = &resolved.config;
    let kinds = cfg.surrogate_kinds()?;
    let acquisitions = cfg.acquisition_kinds()?;
    let mut encodings: Vec<EncodingKind> = Vec::new();
    if cfg.encodings.one_hot {
        encodings.push(EncodingKind::OneHot);
    }
    for id in cfg.encodings.embeddings.keys() {
        encodings.push(EncodingKind::EmbeddingFile(id.clone()));
    }
    let mut models = Vec::new();
    for &kind in &kinds {
        for &acq in &acquisitions {
            for enc in &encodings {
                let enc_id = enc.to_string();
                let entry = cache
                    .get(prep.landscape.digest(), &enc_id, kind.as_str())
                    .ok_or_else(|| {
                        format!(
                            "no tuned hyperparameters for {}/{}/{}; run `bobench tune` \
                             first or pass --tune",
                            prep.landscape.name,
                            enc_id,
                            kind.as_str()
                        )
                    })?;
                models.push(ModelSpec {
                    surrogate: entry.spec.clone(),
                    acquisition: AcquisitionSpec::new(acq),
                    encoding: enc.clone(),
                });
            }
        }
    }
    Ok(models)
}

pub fn run(resolved: &Resolved, tune_first: bool) -> CmdResult {
    let cfg = &resolved.config;
    let preps = cfg
        .landscapes
        .iter()
        .map(|s| prepare_source(resolved, s))
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| format!("cannot create {}: {e}", cfg.out_dir.display()))?;
    let path = cache_path(&cfg.out_dir);
    let mut cache = GridCache::load(&path).map_err(|e| e.to_string())?;
    let mut tune_failures = 0usize;
    if tune_first {
        let (fresh, _, failed) = fill_cache(resolved, &preps, &mut cache)?;
        if fresh > 0 || failed > 0 {
            cache.save().map_err(|e| e.to_string())?;
        }
        tune_failures = failed;
    }

    let seeds = cfg.seeds();
    let mut store =
        RunStore::open(cfg.out_dir.join("runs")).map_err(|e| format!("run store: {e}"))?;
    let (mut completed, mut skipped) = (0usize, 0usize);
    let mut failures = Vec::new();
    for prep in &preps {
        let models = tuned_models(resolved, &cache, prep)?;
        println!(
            "{}: {} models x {} seeds",
            prep.landscape.name,
            models.len(),
            seeds.len()
        );
        let campaign = CampaignConfig {
            n_init: cfg.campaign.n_init,
            batch_size: cfg.campaign.batch_size,
            n_cycles: cfg.campaign.n_cycles,
            seeds: seeds.clone(),
            // Placeholder only; run_grid swaps in each grid model, and
            // baseline identities never hash the model.
            model: models[0].clone(),
            observation_noise_std: cfg.campaign.observation_noise_std,
        };
        campaign
            .validate(prep.split.campaign_pool.len())
            .map_err(|e| format!("campaign on '{}': {e}", prep.landscape.name))?;
        let report = run_grid(
            &models,
            std::slice::from_ref(prep),
            &campaign,
            &mut store,
            true,
        )
        .map_err(|e| e.to_string())?;
        completed += report.completed;
        skipped += report.skipped;
        failures.extend(report.failures);
    }
    for f in &failures {
        eprintln!(
            "run: {} seed {} on {}: {}",
            f.model_id, f.seed, f.landscape, f.message
        );
    }
    println!(
        "completed {completed} new runs, skipped {skipped} existing, {} failed; store at {}",
        failures.len(),
        store.dir().display()
    );
    Ok(outcome(failures.len() + tune_failures))
}

// ----------------------------------------------------------------- report --

#[derive(Serialize)]
struct BootstrapFile<'a> {
    tool_version: &'a str,
    config_digest: &'a str,
    landscape: &'a str,
    naive: BootstrapReport,
    out_of_bag: OobSavingsReport,
}

/// Mean curve over seeds for every (model, landscape) group, k = 0..=K.
/// Errors when one group mixes curve lengths, which only happens when a
/// store accumulated runs from differently shaped campaigns.
fn mean_curves(rows: &[&MetricRow]) -> Result<BTreeMap<(String, String), Vec<f64>>, String> {
    let mut groups: BTreeMap<(String, String), Vec<&MetricRow>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.model_id.clone(), row.landscape.clone()))
            .or_default()
            .push(row);
    }
    let mut out = BTreeMap::new();
    for (key, members) in groups {
        let len = members[0].payoff_curve.len();
        if members.iter().any(|m| m.payoff_curve.len() != len) {
            return Err(format!(
                "{} on {} mixes curve lengths; the store holds runs from \
                 differently shaped campaigns, use a fresh --out",
                key.0, key.1
            ));
        }
        let mut mean = vec![0.0; len];
        for m in &members {
            for (acc, v) in mean.iter_mut().zip(&m.payoff_curve) {
                *acc += v;
            }
        }
        for acc in &mut mean {
            *acc /= members.len() as f64;
        }
        out.insert(key, mean);
    }
    Ok(out)
}

fn write_curves_csv(
    file: File,
    comments: &[String],
    value_column: &str,
    curves: &BTreeMap<(String, String), Vec<f64>>,
    first_iteration: usize,
) -> Result<(), String> {
    let mut file = file;
    for c in comments {
        writeln!(file, "# {c}").map_err(|e| e.to_string())?;
    }
    let mut wtr = csv::Writer::from_writer(file);
    wtr.write_record(["model", "landscape", "iteration", value_column])
        .map_err(|e| e.to_string())?;
    for ((model, landscape), curve) in curves {
        for (k, v) in curve.iter().enumerate() {
            wtr.write_record(&[
                model.clone(),
                landscape.clone(),
                (first_iteration + k).to_string(),
                v.to_string(),
            ])
            .map_err(|e| e.to_string())?;
        }
    }
    wtr.flush().map_err(|e| e.to_string())
}

pub fn report(resolved: &Resolved) -> CmdResult {
    let cfg = &resolved.config;
    let out = &cfg.out_dir;
    let store_dir = out.join("runs");
    if !store_dir.exists() {
        return Err(format!(
            "no run store at {}; run `bobench run` first",
            store_dir.display()
        ));
    }
    let store = RunStore::open(&store_dir).map_err(|e| e.to_string())?;
    let mut records = store.load_all().map_err(|e| e.to_string())?;
    if records.is_empty() {
        return Err(format!(
            "run store at {} is empty; run `bobench run` first",
            store_dir.display()
        ));
    }
    // Store iteration order is filesystem-dependent; sort so every output
    // byte is a function of content alone.
    records.sort_by(|a, b| {
        (&a.model_id, &a.landscape, a.seed, &a.config_digest).cmp(&(
            &b.model_id,
            &b.landscape,
            b.seed,
            &b.config_digest,
        ))
    });

    let pairs: Result<Vec<(Landscape, SplitPlan)>, String> = cfg
        .landscapes
        .iter()
        .map(|source| {
            let landscape = load_source(source)?;
            let split = make_split(&landscape, cfg.rng_seed)
                .map_err(|e| format!("cannot split '{}': {e}", landscape.name))?;
            Ok((landscape, split))
        })
        .collect();
    let pairs = pairs?;
    let table = MetricTable::build(&records, &pairs, &cfg.cost_model(), cfg.report.percentile)
        .map_err(|e| e.to_string())?;

    // The random baseline stays in the metric and payoff outputs but is not
    // a selectable model, so rankings and selection statistics exclude it.
    let model_table = MetricTable {
        rows: table
            .rows
            .iter()
            .filter(|r| r.model_id != BASELINE_ID)
            .cloned()
            .collect(),
    };
    if model_table.rows.is_empty() {
        return Err("store holds only baseline runs; nothing to rank".into());
    }

    let comments = resolved.header_comments();
    let mut written: Vec<PathBuf> = Vec::new();
    let mut warnings = 0usize;

    table
        .write_csv(create_out_file(out, "metrics.csv")?, &comments)
        .map_err(|e| e.to_string())?;
    written.push(out.join("metrics.csv"));

    let stats_list = [
        ("mean", AggregateStat::Mean),
        (
            "cvar",
            AggregateStat::Cvar {
                alpha: cfg.report.cvar_alpha,
            },
        ),
    ];
    for metric in MetricName::ALL {
        for (stat_name, stat) in stats_list {
            let mut ranking = rank_models(&model_table, metric, stat, &RankScope::All)
                .map_err(|e| format!("ranking {}/{stat_name}: {e}", metric.as_str()))?;
            if cfg.report.top > 0 {
                ranking.entries.truncate(cfg.report.top);
            }
            let name = format!("ranking_{}_{stat_name}.csv", metric.as_str());
            write_ranking_csv(&ranking, create_out_file(out, &name)?, &comments)
                .map_err(|e| e.to_string())?;
            written.push(out.join(name));
        }
    }

    for metric in MetricName::ALL {
        let name = format!("agreement_{}.csv", metric.as_str());
        match rank_agreement_table(&model_table, metric) {
            Ok(rows) => {
                write_agreement_csv(&rows, create_out_file(out, &name)?, &comments)
                    .map_err(|e| e.to_string())?;
                written.push(out.join(name));
            }
            Err(e) => {
                // Degenerate with one model or fully tied ranks; the rest
                // of the report is still valid.
                eprintln!("report: agreement for {}: {e}", metric.as_str());
                warnings += 1;
            }
        }
    }

    for (landscape, _) in &pairs {
        if !model_table
            .rows
            .iter()
            .any(|r| r.landscape == landscape.name)
        {
            continue;
        }
        let name = format!("bootstrap_{}.json", sanitize(&landscape.name));
        let naive = bootstrap_naive(
            &model_table,
            &landscape.name,
            cfg.report.n_bootstrap,
            cfg.rng_seed,
        );
        let oob = bootstrap_oob(
            &model_table,
            &landscape.name,
            cfg.report.oob_rank_fraction,
            cfg.report.oob_cap,
            cfg.rng_seed,
        );
        match (naive, oob) {
            (Ok(naive), Ok(out_of_bag)) => {
                let payload = BootstrapFile {
                    tool_version: env!("CARGO_PKG_VERSION"),
                    config_digest: &resolved.digest,
                    landscape: &landscape.name,
                    naive,
                    out_of_bag,
                };
                let mut file = create_out_file(out, &name)?;
                let text = serde_json::to_string_pretty(&payload).map_err(|e| e.to_string())?;
                writeln!(file, "{text}").map_err(|e| e.to_string())?;
                written.push(out.join(name));
            }
            (naive, oob) => {
                for err in [naive.err(), oob.err()].into_iter().flatten() {
                    eprintln!("report: bootstrap on '{}': {err}", landscape.name);
                    warnings += 1;
                }
            }
        }
    }

    let perf = rank_models(
        &model_table,
        MetricName::FinalFitness,
        AggregateStat::Mean,
        &RankScope::All,
    )
    .map_err(|e| e.to_string())?;
    let risk = rank_models(
        &model_table,
        MetricName::FinalFitness,
        AggregateStat::Cvar {
            alpha: cfg.report.cvar_alpha,
        },
        &RankScope::All,
    )
    .map_err(|e| e.to_string())?;
    let risk_by_model: BTreeMap<&str, f64> = risk
        .entries
        .iter()
        .map(|e| (e.model_id.as_str(), e.value))
        .collect();
    let mut points: Vec<ParetoPoint> = perf
        .entries
        .iter()
        .map(|e| ParetoPoint {
            model_id: e.model_id.clone(),
            performance: e.value,
            risk: risk_by_model[e.model_id.as_str()],
        })
        .collect();
    points.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    // Both axes reward larger values: mean final fitness and its lower-tail
    // CVaR (a higher worst case is safer).
    let front = pareto_front(&points, (true, true));
    let on_front: std::collections::BTreeSet<&str> =
        front.iter().map(|p| p.model_id.as_str()).collect();
    {
        let mut file = create_out_file(out, "pareto.csv")?;
        for c in &comments {
            writeln!(file, "# {c}").map_err(|e| e.to_string())?;
        }
        let mut wtr = csv::Writer::from_writer(file);
        wtr.write_record([
            "model",
            "mean_final_fitness",
            "cvar_final_fitness",
            "on_front",
        ])
        .map_err(|e| e.to_string())?;
        for p in &points {
            wtr.write_record(&[
                p.model_id.clone(),
                p.performance.to_string(),
                p.risk.to_string(),
                on_front.contains(p.model_id.as_str()).to_string(),
            ])
            .map_err(|e| e.to_string())?;
        }
        wtr.flush().map_err(|e| e.to_string())?;
        written.push(out.join("pareto.csv"));
    }

    let all_rows: Vec<&MetricRow> = table.rows.iter().collect();
    let payoff = mean_curves(&all_rows)?;
    write_curves_csv(
        create_out_file(out, "payoff_curves.csv")?,
        &comments,
        "mean_payoff",
        &payoff,
        0,
    )?;
    written.push(out.join("payoff_curves.csv"));

    // Gain over the paired baseline, k = 1..K; k=0 shares the seed pool and
    // is identically zero.
    let mut baseline_curves: BTreeMap<(&str, u64), &[f64]> = BTreeMap::new();
    for row in &table.rows {
        if row.model_id == BASELINE_ID {
            baseline_curves.insert((row.landscape.as_str(), row.seed), &row.payoff_curve);
        }
    }
    let mut gain_rows: Vec<MetricRow> = Vec::new();
    for row in &model_table.rows {
        let base = baseline_curves
            .get(&(row.landscape.as_str(), row.seed))
            .ok_or_else(|| {
                format!(
                    "no baseline curve for {} seed {} on {}",
                    row.model_id, row.seed, row.landscape
                )
            })?;
        if base.len() != row.payoff_curve.len() {
            return Err(format!(
                "baseline curve length mismatch on {} seed {}",
                row.landscape, row.seed
            ));
        }
        let mut gained = row.clone();
        gained.payoff_curve = row
            .payoff_curve
            .iter()
            .zip(base.iter())
            .skip(1)
            .map(|(m, b)| m - b)
            .collect();
        gain_rows.push(gained);
    }
    let gain_refs: Vec<&MetricRow> = gain_rows.iter().collect();
    let gains = mean_curves(&gain_refs)?;
    write_curves_csv(
        create_out_file(out, "gain_curves.csv")?,
        &comments,
        "mean_gain",
        &gains,
        1,
    )?;
    written.push(out.join("gain_curves.csv"));

    println!(
        "wrote {} report files to {} ({} skipped)",
        written.len(),
        out.display(),
        warnings
    );
    for path in &written {
        println!("  {}", path.display());
    }
    Ok(Outcome::Clean)
}
