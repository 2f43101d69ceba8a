//! Gate suite: every release criterion runs in one test and prints a single
//! verdict line. Use `cargo test --test acceptance -- --nocapture` to see
//! the lines for passing runs too.
//!
//! The held-out-dataset reproduction is hours-scale and needs the real
//! measurement file; it is `#[ignore]`d and keyed on the `BOBENCH_GB1`
//! environment variable.

use std::time::Instant;

use ndarray::{array, Array1, Array2};
use rand::Rng;

use bobench_core::acquisition::{score_ei, AcquisitionKind, AcquisitionSpec};
use bobench_core::analysis::{self, LandscapeProfile};
use bobench_core::campaign::{
    model_grid, run_campaign, run_random_baseline, CampaignConfig, ModelSpec,
};
use bobench_core::encoding::{encode_one_hot, EncodingKind};
use bobench_core::landscape::{
    generate_synthetic, make_split, Landscape, SyntheticModel, SyntheticSpec,
};
use bobench_core::metrics::{
    aggregate, cvar, delta_g_auc, delta_g_curve, var, AggregateStat, CostModel, MetricName,
    MetricRow, MetricTable, TailOrientation,
};
use bobench_core::seeds;
use bobench_core::stats::{
    bootstrap_naive, bootstrap_oob, kendall_tau, pareto_front, rank_agreement_table, rank_models,
    ParetoPoint, RankScope,
};
use bobench_core::surrogate::{gp::fit_gp_fixed, KernelType, SurrogateKind, SurrogateSpec};

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($arg)+));
        }
    };
}

fn normal_draws(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeds::stream("acceptance", "normals", &[seed]);
    (0..n)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect()
}

/// `var` and both `cvar` orientations against a brute-force sort-and-average
/// oracle, with the tail index computed in exact integer arithmetic.
fn tail_risk_oracle() -> Check {
    let start = Instant::now();
    // alpha as exact rationals: 5%, 10%, 25%.
    let alphas: [(f64, u64, u64); 3] = [(0.05, 1, 20), (0.1, 1, 10), (0.25, 1, 4)];
    let mut combos = 0usize;
    for sample_id in 0..200u64 {
        let mut rng = seeds::stream("acceptance", "risk-samples", &[sample_id]);
        let n = rng.random_range(5..=200);
        // Half the samples draw from a coarse grid so ties hit the tail cut.
        let values: Vec<f64> = if sample_id % 2 == 0 {
            (0..n)
                .map(|_| rng.random_range(-20..20) as f64 / 4.0)
                .collect()
        } else {
            normal_draws(n, sample_id)
        };
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);

        for (alpha, num, den) in alphas {
            let k = ((n as u64 * num).div_ceil(den)) as usize;
            let var_oracle = sorted[k - 1];
            let got = var(&values, alpha).map_err(|e| format!("var failed: {e}"))?;
            ensure!(
                got == var_oracle,
                "sample {sample_id} n={n} alpha={alpha}: var {got} vs oracle {var_oracle}"
            );

            let lower_cut = sorted[k - 1];
            let lower_tail: Vec<f64> = sorted.iter().copied().filter(|v| *v <= lower_cut).collect();
            let lower_oracle = lower_tail.iter().sum::<f64>() / lower_tail.len() as f64;
            let got = cvar(&values, alpha, TailOrientation::LowerTail)
                .map_err(|e| format!("cvar failed: {e}"))?;
            ensure!(
                (got - lower_oracle).abs() <= 1e-12,
                "sample {sample_id} n={n} alpha={alpha}: lower cvar {got} vs {lower_oracle}"
            );

            let upper_cut = sorted[n - k];
            let upper_tail: Vec<f64> = sorted.iter().copied().filter(|v| *v >= upper_cut).collect();
            let upper_oracle = upper_tail.iter().sum::<f64>() / upper_tail.len() as f64;
            let got = cvar(&values, alpha, TailOrientation::UpperTail)
                .map_err(|e| format!("cvar failed: {e}"))?;
            ensure!(
                (got - upper_oracle).abs() <= 1e-12,
                "sample {sample_id} n={n} alpha={alpha}: upper cvar {got} vs {upper_oracle}"
            );
            combos += 3;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(elapsed < 1.0, "took {elapsed:.2}s, limit 1s");
    Ok(format!("{combos} estimator checks exact in {elapsed:.2}s"))
}

/// Rank correlation against the O(n^2) concordance-count oracle.
fn rank_correlation_oracle() -> Check {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut attempt = 0u64;
    while checked < 500 {
        let mut rng = seeds::stream("acceptance", "kendall-pairs", &[attempt]);
        attempt += 1;
        let n = rng.random_range(2..=300);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..12) as f64).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..12) as f64).collect();
        let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
        if constant(&a) || constant(&b) {
            continue;
        }

        let (mut conc, mut disc, mut tied_a, mut tied_b) = (0i64, 0i64, 0u64, 0u64);
        for i in 0..n {
            for j in (i + 1)..n {
                let da = a[j] - a[i];
                let db = b[j] - b[i];
                if da == 0.0 {
                    tied_a += 1;
                } else if db == 0.0 {
                    tied_b += 1;
                } else if da * db > 0.0 {
                    conc += 1;
                } else {
                    disc += 1;
                }
            }
        }
        let n0 = (n * (n - 1) / 2) as f64;
        // The `da == 0` branch above absorbed pairs tied in both, so only
        // the b-side total is missing them.
        let joint: u64 = {
            let mut c = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if a[j] == a[i] && b[j] == b[i] {
                        c += 1;
                    }
                }
            }
            c
        };
        let oracle =
            (conc - disc) as f64 / ((n0 - tied_a as f64) * (n0 - (tied_b + joint) as f64)).sqrt();

        let (tau, _) = kendall_tau(&a, &b).map_err(|e| format!("pair {attempt}: {e}"))?;
        ensure!(
            (tau - oracle).abs() <= 1e-12,
            "pair {attempt} n={n}: tau {tau} vs oracle {oracle}"
        );
        checked += 1;
    }

    let idx: Vec<f64> = (0..80).map(f64::from).collect();
    let rev: Vec<f64> = idx.iter().rev().copied().collect();
    let (tau, _) = kendall_tau(&idx, &idx).map_err(|e| e.to_string())?;
    ensure!(tau == 1.0, "identical ranking gave {tau}");
    let (tau, _) = kendall_tau(&idx, &rev).map_err(|e| e.to_string())?;
    ensure!(tau == -1.0, "reversed ranking gave {tau}");

    let elapsed = start.elapsed().as_secs_f64();
    ensure!(elapsed < 10.0, "took {elapsed:.2}s, limit 10s");
    Ok(format!(
        "500 tied-pair checks within 1e-12 in {elapsed:.2}s"
    ))
}

/// Two-training-point RBF posterior against the explicit 2x2 matrix
/// solution.
fn gp_closed_form() -> Check {
    let x_train: Array2<f64> = array![[0.3, -1.1, 0.8], [1.2, 0.4, -0.5]];
    let y = [0.7, -0.3];
    let (ell, sf2, sn2) = (0.9, 1.3, 0.05);

    let model = fit_gp_fixed(x_train.view(), &y, KernelType::Rbf, ell, sf2, sn2, false)
        .map_err(|e| format!("fit failed: {e}"))?;

    let k = |p: &[f64], q: &[f64]| {
        let r2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
        sf2 * (-r2 / (2.0 * ell * ell)).exp()
    };
    let x1 = [0.3, -1.1, 0.8];
    let x2 = [1.2, 0.4, -0.5];
    let a = sf2 + sn2;
    let b = k(&x1, &x2);
    let det = a * a - b * b;

    let mut rng = seeds::stream("acceptance", "gp-test-points", &[0]);
    let mut max_err = 0.0f64;
    for _ in 0..20 {
        let xs: Vec<f64> = (0..3)
            .map(|_| rng.random_range(-200..200) as f64 / 100.0)
            .collect();
        let (k1, k2) = (k(&xs, &x1), k(&xs, &x2));
        let mean = (k1 * (a * y[0] - b * y[1]) + k2 * (a * y[1] - b * y[0])) / det;
        let quad = (a * k1 * k1 - 2.0 * b * k1 * k2 + a * k2 * k2) / det;
        let std = (sf2 - quad + sn2).sqrt();

        let xq = Array2::from_shape_vec((1, 3), xs).expect("3-vector");
        let (m, s) = model
            .predict(xq.view())
            .map_err(|e| format!("predict failed: {e}"))?;
        max_err = max_err.max((m[0] - mean).abs()).max((s[0] - std).abs());
    }
    ensure!(max_err <= 1e-9, "max deviation {max_err:.3e} exceeds 1e-9");
    Ok(format!("20 posterior points within {max_err:.3e}"))
}

/// Analytic expected improvement against a 10^7-draw Monte-Carlo estimate.
fn expected_improvement_monte_carlo() -> Check {
    let start = Instant::now();
    const N_DRAWS: usize = 10_000_000;
    let mut worst_z = 0.0f64;
    for tuple_id in 0..100u64 {
        let mut rng = seeds::stream("acceptance", "ei-tuples", &[tuple_id]);
        let mu = rng.random_range(-200..=200) as f64 / 100.0;
        let sigma = rng.random_range(5..=200) as f64 / 100.0;
        let xi = [0.0, 0.01, 0.1][(tuple_id % 3) as usize];
        // Keep the improvement probability above ~2e-4 so the Monte-Carlo
        // standard error is never identically zero.
        let gap_z = rng.random_range(-300..=350) as f64 / 100.0;
        let f_star = mu + sigma * gap_z - xi;

        let pred = bobench_core::surrogate::PosteriorPrediction::new(
            Array1::from_elem(1, mu),
            Array1::from_elem(1, sigma),
        )
        .map_err(|e| e.to_string())?;
        let analytic = score_ei(&pred, f_star, xi)[0];

        let mut mc = seeds::stream("acceptance", "ei-mc", &[tuple_id]);
        let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
        for _ in 0..N_DRAWS {
            let draw = mu + sigma * mc.sample::<f64, _>(rand_distr::StandardNormal);
            let imp = (draw - f_star - xi).max(0.0);
            sum += imp;
            sum_sq += imp * imp;
        }
        let n = N_DRAWS as f64;
        let mean = sum / n;
        let se = ((sum_sq / n - mean * mean).max(0.0) / (n - 1.0)).sqrt();
        ensure!(se > 0.0, "tuple {tuple_id}: zero-variance Monte Carlo");
        let z = (analytic - mean).abs() / se;
        worst_z = worst_z.max(z);
        ensure!(
            z <= 3.0,
            "tuple {tuple_id} (mu={mu}, sigma={sigma}, f*={f_star:.3}, xi={xi}): \
             analytic {analytic:.6e} vs mc {mean:.6e}, {z:.2} standard errors"
        );
    }

    // Degenerate posterior: the improvement is deterministic.
    for (mu, f_star, xi) in [(0.5, 0.2, 0.01), (0.2, 0.5, 0.01), (1.0, 1.0, 0.0)] {
        let pred = bobench_core::surrogate::PosteriorPrediction::new(
            Array1::from_elem(1, mu),
            Array1::from_elem(1, 0.0),
        )
        .map_err(|e| e.to_string())?;
        let got = score_ei(&pred, f_star, xi)[0];
        let want = (mu - f_star - xi).max(0.0);
        ensure!(got == want, "sigma=0 at mu={mu}: {got} vs {want}");
    }
    Ok(format!(
        "100 tuples within 3 SE (worst {worst_z:.2}), sigma=0 exact, {:.0}s",
        start.elapsed().as_secs_f64()
    ))
}

fn additive_landscape(length: usize, alphabet: usize, seed: u64) -> Landscape {
    generate_synthetic(&SyntheticSpec {
        name: format!("additive-{length}x{alphabet}"),
        model: SyntheticModel::Additive,
        length,
        alphabet_size: alphabet,
        seed,
    })
    .expect("synthetic enumeration fits in memory")
}

/// GP+EI on a fully additive landscape recovers signal fast enough to beat
/// its paired uniform baseline.
fn campaign_beats_random() -> Check {
    let start = Instant::now();
    let landscape = additive_landscape(4, 4, 11);
    ensure!(
        landscape.len() == 256,
        "expected 256 variants, got {}",
        landscape.len()
    );
    let split = make_split(&landscape, 0).map_err(|e| e.to_string())?;
    let encoding = encode_one_hot(&landscape).map_err(|e| e.to_string())?;

    let model = ModelSpec {
        surrogate: SurrogateSpec::defaults(SurrogateKind::Gp),
        acquisition: AcquisitionSpec::new(AcquisitionKind::Ei),
        encoding: EncodingKind::OneHot,
    };
    let mut config = CampaignConfig::new(model);
    config.n_init = 16;
    config.batch_size = 8;
    config.n_cycles = 5;
    config.seeds = (0..20).collect();

    let mut auc_sum = 0.0;
    let mut wins = 0usize;
    for &seed in &config.seeds {
        let run = run_campaign(&config, &landscape, &split, &encoding, seed)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let base = run_random_baseline(&config, &landscape, &split, seed)
            .map_err(|e| format!("seed {seed} baseline: {e}"))?;
        let curve = delta_g_curve(&run, &base).map_err(|e| e.to_string())?;
        auc_sum += delta_g_auc(&curve);
        if run.final_payoff() >= base.final_payoff() {
            wins += 1;
        }
    }
    let mean_auc = auc_sum / config.seeds.len() as f64;
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(
        mean_auc > 0.0,
        "mean early-gain area {mean_auc:.4} is not positive"
    );
    ensure!(
        wins >= 16,
        "final fitness matched baseline in only {wins}/20 seeds"
    );
    ensure!(elapsed < 120.0, "took {elapsed:.1}s, limit 120s");
    Ok(format!(
        "mean gain area {mean_auc:.3}, {wins}/20 seeds at or above baseline, {elapsed:.0}s"
    ))
}

/// Every surrogate x acquisition combination spends exactly its budget and
/// stays paired with the shared baseline.
fn grid_budget_and_pairing() -> Check {
    let start = Instant::now();
    let landscape = generate_synthetic(&SyntheticSpec {
        name: "grid-invariants".into(),
        model: SyntheticModel::Nk { k: 1 },
        length: 3,
        alphabet_size: 4,
        seed: 5,
    })
    .map_err(|e| e.to_string())?;
    let split = make_split(&landscape, 0).map_err(|e| e.to_string())?;
    let encoding = encode_one_hot(&landscape).map_err(|e| e.to_string())?;

    let bases: Vec<SurrogateSpec> = SurrogateKind::ALL
        .into_iter()
        .map(|kind| {
            let mut spec = SurrogateSpec::defaults(kind);
            spec.hidden_dim = 16;
            spec.epochs = 20;
            spec.batch_size = 8;
            spec.mc_samples = 10;
            if kind == SurrogateKind::RandomForest {
                spec.n_estimators = 10;
            }
            spec
        })
        .collect();
    let models = model_grid(&bases, &[EncodingKind::OneHot]);
    ensure!(
        models.len() == 24,
        "grid enumerated {} models, expected 24",
        models.len()
    );

    let mut config = CampaignConfig::new(models[0].clone());
    config.n_init = 8;
    config.batch_size = 4;
    config.n_cycles = 3;
    config.seeds = (0..5).collect();

    let mut runs = 0usize;
    for &seed in &config.seeds {
        let baseline = run_random_baseline(&config, &landscape, &split, seed)
            .map_err(|e| format!("baseline seed {seed}: {e}"))?;
        baseline
            .check_invariants(&config)
            .map_err(|e| format!("baseline seed {seed}: {e}"))?;
        for model in &models {
            let mut cfg = config.clone();
            cfg.model = model.clone();
            let run = run_campaign(&cfg, &landscape, &split, &encoding, seed)
                .map_err(|e| format!("{} seed {seed}: {e}", model.id()))?;
            run.check_invariants(&cfg)
                .map_err(|e| format!("{} seed {seed}: {e}", model.id()))?;
            ensure!(
                run.total_acquired() == cfg.budget(),
                "{} seed {seed}: acquired {} of budget {}",
                model.id(),
                run.total_acquired(),
                cfg.budget()
            );
            ensure!(
                run.acquired[0] == baseline.acquired[0],
                "{} seed {seed}: seed pool differs from paired baseline",
                model.id()
            );
            ensure!(
                run.payoff_curve[0] == baseline.payoff_curve[0],
                "{} seed {seed}: k=0 payoff differs from paired baseline",
                model.id()
            );
            runs += 1;
        }
    }
    Ok(format!(
        "{runs} grid runs, zero violations, {:.0}s",
        start.elapsed().as_secs_f64()
    ))
}

/// Profile outputs on analytically constructed landscapes.
fn profile_constructions() -> Check {
    let additive = additive_landscape(3, 4, 2);
    let prof = analysis::profile(&additive).map_err(|e| e.to_string())?;
    ensure!(
        prof.local_optima == 1,
        "additive local optima {}",
        prof.local_optima
    );
    ensure!(
        prof.ruggedness < 1e-6,
        "additive ruggedness {}",
        prof.ruggedness
    );
    ensure!(
        prof.magnitude_epistasis_pct == 0.0 && prof.non_magnitude_epistasis_pct == 0.0,
        "additive epistasis ({}, {})",
        prof.magnitude_epistasis_pct,
        prof.non_magnitude_epistasis_pct
    );

    // One mutation helps alone, hurts in the other's background: the
    // classic sign-flip interaction.
    let quad = Landscape::new(
        "sign-flip",
        vec!["AA".into(), "CA".into(), "AC".into(), "CC".into()],
        vec![0.0, 1.0, -1.0, -3.0],
        Some("AA".into()),
        4,
    )
    .map_err(|e| e.to_string())?;
    let (mag, non_mag) = analysis::epistasis(&quad);
    ensure!(
        mag == 0.0 && non_mag == 100.0,
        "sign-flip quadruple classified as ({mag}, {non_mag})"
    );

    let mut bimodal: Vec<f64> = normal_draws(500, 77).iter().map(|z| z * 0.5).collect();
    bimodal.extend(normal_draws(500, 78).iter().map(|z| 10.0 + z * 0.5));
    let peaks = analysis::kde_peaks(&bimodal).map_err(|e| e.to_string())?;
    ensure!(peaks == 2, "bimodal mixture found {peaks} density peaks");
    let (threshold, _) = analysis::otsu_threshold(&bimodal).map_err(|e| e.to_string())?;
    ensure!(
        (threshold - 5.0).abs() <= 1.0,
        "threshold {threshold:.3} not within 1.0 of the valley at 5.0"
    );
    Ok(format!(
        "additive clean, sign-flip non-magnitude, threshold {threshold:.2} at the valley"
    ))
}

/// Null-scenario bootstrap behavior is exact and reruns are bit-identical.
fn bootstrap_null_scenarios() -> Check {
    // Two models with identical per-seed outcomes; cost is seed-constant,
    // as it is for any run that exhausts its budget.
    let mut rows = Vec::new();
    for seed in 0..20u64 {
        for model in ["a", "b"] {
            rows.push(MetricRow {
                model_id: model.into(),
                landscape: "null".into(),
                seed,
                final_fitness: (seed as f64 * 0.7).sin().abs(),
                delta_g_auc: 0.0,
                cost_usd: 57_600.0,
                censored: true,
                n_above_p99: 0,
                payoff_curve: vec![0.0],
            });
        }
    }
    let table = MetricTable { rows };

    let naive = bootstrap_naive(&table, "null", 1000, 9).map_err(|e| e.to_string())?;
    ensure!(
        naive.point == 0.0 && naive.lower == 0.0 && naive.upper == 0.0,
        "naive savings ({}, [{}, {}]) not identically zero",
        naive.point,
        naive.lower,
        naive.upper
    );
    let naive_again = bootstrap_naive(&table, "null", 1000, 9).map_err(|e| e.to_string())?;
    ensure!(naive == naive_again, "naive rerun differed");

    let oob = bootstrap_oob(&table, "null", 0.8, 10_000, 9).map_err(|e| e.to_string())?;
    ensure!(
        oob.n_partitions_total == 4845 && !oob.capped,
        "expected 4845 enumerated partitions, got {} (capped: {})",
        oob.n_partitions_total,
        oob.capped
    );
    ensure!(
        oob.average.point == 0.0
            && oob.average.lower == 0.0
            && oob.average.upper == 0.0
            && oob.worst_case.point == 0.0,
        "out-of-bag savings not identically zero"
    );
    let oob_again = bootstrap_oob(&table, "null", 0.8, 10_000, 9).map_err(|e| e.to_string())?;
    ensure!(oob == oob_again, "out-of-bag rerun differed");
    Ok("identical models save exactly zero; 4845 partitions; reruns bit-identical".into())
}

/// Frontier extraction against the O(n^2) dominance oracle.
fn pareto_oracle() -> Check {
    let start = Instant::now();
    for set_id in 0..1000u64 {
        let mut rng = seeds::stream("acceptance", "pareto-sets", &[set_id]);
        let n = rng.random_range(1..=40);
        let points: Vec<ParetoPoint> = (0..n)
            .map(|i| ParetoPoint {
                model_id: format!("p{i:02}"),
                performance: rng.random_range(-4..5) as f64,
                risk: rng.random_range(-4..5) as f64,
            })
            .collect();
        let hb = (rng.random_range(0..2) == 1, rng.random_range(0..2) == 1);

        let fast = pareto_front(&points, hb);
        let mut slow: Vec<ParetoPoint> = points
            .iter()
            .filter(|p| {
                let key = |q: &ParetoPoint| {
                    (
                        if hb.0 { q.performance } else { -q.performance },
                        if hb.1 { q.risk } else { -q.risk },
                    )
                };
                let (x, y) = key(p);
                !points.iter().any(|q| {
                    let (qx, qy) = key(q);
                    qx >= x && qy >= y && (qx > x || qy > y)
                })
            })
            .cloned()
            .collect();
        slow.sort_by(|a, b| {
            a.performance
                .total_cmp(&b.performance)
                .then(a.risk.total_cmp(&b.risk))
                .then_with(|| a.model_id.cmp(&b.model_id))
        });
        ensure!(
            fast == slow,
            "set {set_id} (directions {hb:?}): frontier mismatch"
        );
        ensure!(
            pareto_front(&fast, hb) == fast,
            "set {set_id}: frontier not idempotent"
        );
    }
    Ok(format!(
        "1000 point sets exact and idempotent in {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

#[test]
fn acceptance_gate() {
    let criteria: [Criterion; 9] = [
        (
            "tail-risk estimators vs sort-and-average oracle",
            tail_risk_oracle,
        ),
        (
            "rank correlation vs quadratic oracle",
            rank_correlation_oracle,
        ),
        ("gp posterior vs closed form", gp_closed_form),
        (
            "expected improvement vs monte carlo",
            expected_improvement_monte_carlo,
        ),
        (
            "model campaigns beat paired random search",
            campaign_beats_random,
        ),
        (
            "grid budget and pairing invariants",
            grid_budget_and_pairing,
        ),
        ("landscape profile on constructions", profile_constructions),
        ("bootstrap null scenarios exact", bootstrap_null_scenarios),
        ("pareto frontier vs dominance oracle", pareto_oracle),
    ];
    let mut failures = 0usize;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                println!("[FAIL] {name}: {detail}");
                failures += 1;
            }
        }
    }
    println!(
        "[SKIP] held-out dataset reproduction: data-gated; set BOBENCH_GB1=<csv path> and run \
         `cargo test --test acceptance -- --ignored --nocapture`"
    );
    assert_eq!(failures, 0, "{failures} acceptance criteria failed");
}

/// Hours-scale reproduction on the real binding-fitness measurements.
/// Checks the published landscape profile values, that the ensemble +
/// Thompson + one-hot model ranks in the top 3 by mean final fitness on a
/// reduced grid, and that mean-vs-tail rank agreement lands in the
/// published band.
#[test]
#[ignore = "needs BOBENCH_GB1 pointing at the measurement CSV; hours-scale"]
fn data_gated_reproduction() {
    let path = std::env::var("BOBENCH_GB1")
        .expect("set BOBENCH_GB1 to the sequence/fitness CSV for this suite");
    let landscape = bobench_core::landscape::load_landscape(&path).expect("loadable landscape");

    let prof: LandscapeProfile = analysis::profile(&landscape).expect("profilable landscape");
    println!("profile: {prof:?}");
    assert_eq!(prof.n, 6080, "variant count");
    assert!(
        (prof.active_pct - 3.82).abs() <= 0.3,
        "active% {}",
        prof.active_pct
    );
    assert!(
        (prof.otsu_threshold - 1.32).abs() <= 0.1,
        "threshold {}",
        prof.otsu_threshold
    );
    assert!(
        (prof.local_optima as i64 - 7).abs() <= 2,
        "local optima {}",
        prof.local_optima
    );
    assert!(
        (prof.kde_peaks as i64 - 14).abs() <= 3,
        "kde peaks {}",
        prof.kde_peaks
    );
    assert!(
        (prof.magnitude_epistasis_pct - 6.71).abs() <= 5.0,
        "magnitude epistasis {}",
        prof.magnitude_epistasis_pct
    );
    assert!(
        (prof.non_magnitude_epistasis_pct - 93.29).abs() <= 5.0,
        "non-magnitude epistasis {}",
        prof.non_magnitude_epistasis_pct
    );

    let split = make_split(&landscape, 0).expect("splittable");
    let encoding = encode_one_hot(&landscape).expect("encodable");

    // Tune each surrogate on the held-out split, then sweep the grid.
    let mut bases = Vec::new();
    for kind in SurrogateKind::ALL {
        let outcome = bobench_core::surrogate::grid::grid_search(
            kind,
            &landscape,
            &split,
            &encoding,
            &SurrogateSpec::defaults(kind),
        )
        .expect("grid search completes");
        bases.push(outcome.spec);
    }
    let models = model_grid(&bases, &[EncodingKind::OneHot]);
    assert_eq!(models.len(), 24);

    let mut config = CampaignConfig::new(models[0].clone());
    config.seeds = (0..10).collect();
    let mut records = Vec::new();
    for &seed in &config.seeds {
        records.push(
            run_random_baseline(&config, &landscape, &split, seed).expect("baseline completes"),
        );
        for model in &models {
            let mut cfg = config.clone();
            cfg.model = model.clone();
            records.push(
                run_campaign(&cfg, &landscape, &split, &encoding, seed).expect("run completes"),
            );
        }
    }

    let pairs = vec![(landscape, split)];
    let table = MetricTable::build(&records, &pairs, &CostModel::default(), 99.0)
        .expect("metric table builds");
    let name = pairs[0].0.name.clone();
    let ranking = rank_models(
        &table,
        MetricName::FinalFitness,
        AggregateStat::Mean,
        &RankScope::Landscape(name.clone()),
    )
    .expect("rankable");
    let top3: Vec<&str> = ranking.entries[..3]
        .iter()
        .map(|e| e.model_id.as_str())
        .collect();
    println!("top 3 by mean final fitness: {top3:?}");
    assert!(
        top3.contains(&"ensemble_nn+thompson+one_hot"),
        "expected ensemble_nn+thompson+one_hot in the top 3, got {top3:?}"
    );

    let agreement = rank_agreement_table(&table, MetricName::FinalFitness).expect("agreement");
    let row = agreement
        .iter()
        .find(|r| r.landscape == name)
        .expect("landscape row");
    println!("mean-vs-tail agreement tau = {:.3}", row.tau);
    assert!(
        (0.45..=0.85).contains(&row.tau),
        "agreement tau {} outside [0.45, 0.85]",
        row.tau
    );

    // Exercise the aggregate path end to end while the table is in hand.
    let by_tail = aggregate(
        &table,
        MetricName::FinalFitness,
        AggregateStat::Cvar { alpha: 0.1 },
    )
    .expect("tail aggregate");
    assert!(!by_tail.is_empty());
}
