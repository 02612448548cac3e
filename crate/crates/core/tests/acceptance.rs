//! Acceptance gate: every criterion runs at its pinned tolerance and prints
//! one PASS/FAIL line; the test fails if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::{DMatrix, DVector};
use panfis::consequent::erls_update;
use panfis::features::{
    build_direct_dataset, build_timeseries_dataset, extract_features, Feature, Normalizer, DEFAULT_BINS,
};
use panfis::harness::{describe_rules, run_direct, run_timeseries, sweep};
use panfis::inference::firings;
use panfis::learner::write_trace_csv;
use panfis::structure::adapt_winner;
use panfis::{fit_stream, train_sample, Config, Model, Rule, Strategy};
use rand::Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn random_spd(r: &mut impl Rng, u: usize, scale: f64) -> DMatrix<f64> {
    let normal = Normal::new(0.0, scale).unwrap();
    let a = DMatrix::from_fn(u, u, |_, _| normal.sample(r));
    let m = &a * a.transpose() + DMatrix::identity(u, u) * (0.1 * scale * scale);
    (&m + m.transpose()) * 0.5
}

fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

const GOLDEN_DOC: &str = r#"{
  "format_version": 1,
  "config": {"g1": 0.01, "g2": 0.001, "epsilon": 0.6, "merge_threshold": 0.8,
             "omega": 100000.0, "mahalanobis_r": 1.0, "input_dim": 2},
  "samples_seen": 137,
  "rules": [{
    "center": [0.290, 0.292],
    "inv_cov": [[7.4, 0.19], [0.19, 7.4]],
    "support": 137,
    "weights": [0.03, 0.17, 0.04],
    "rls_cov": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
  }]
}"#;

fn golden_rule_round_trip() -> Outcome {
    let model = Model::from_document(GOLDEN_DOC).map_err(|e| e.to_string())?;
    let reloaded = Model::from_document(&model.to_document().unwrap()).unwrap();
    ensure!(reloaded == model, "save/load changed the golden model");
    let listing = describe_rules(&reloaded, Some(0.3)).unwrap().unwrap();
    let rule = &listing.rules[0];
    ensure!(rule.extracted[0].center == 0.290 && rule.extracted[1].center == 0.292, "centers not exact");
    for s in &rule.extracted {
        ensure!((s.width - 0.11).abs() <= 0.005, "sigma {} not within 0.11 ± 0.005", s.width);
    }
    ensure!(rule.weights == vec![0.03, 0.17, 0.04], "weights {:?}", rule.weights);
    let text = listing.render();
    ensure!(text.contains("c11 = 0.29,") && text.contains("c12 = 0.292,"), "listing:\n{text}");
    ensure!(text.contains("y = 0.03 + 0.17·x1 + 0.04·x2"), "listing:\n{text}");
    Ok(format!("sigma = {:.4}/{:.4}", rule.extracted[0].width, rule.extracted[1].width))
}

fn partition_of_unity() -> Outcome {
    let mut r = common::rng(11);
    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let u = r.random_range(1..=9);
        let c = r.random_range(1..=20);
        let scale = 10f64.powf(r.random_range(-1.0..1.0));
        let mut model = Model::new(Config::new(u)).unwrap();
        for _ in 0..c {
            model.rules.push(Rule {
                center: DVector::from_fn(u, |_, _| r.random_range(-1.0..1.0)),
                inv_cov: random_spd(&mut r, u, scale),
                support: 1,
                weights: DVector::zeros(u + 1),
                rls_cov: DMatrix::identity(u + 1, u + 1),
            });
        }
        let x: Vec<f64> = (0..u).map(|_| r.random_range(-3.0..3.0)).collect();
        let f = firings(&model, &x).map_err(|e| e.to_string())?;
        let sum: f64 = f.normalized.iter().sum();
        worst = worst.max((sum - 1.0).abs());
        ensure!((sum - 1.0).abs() <= 1e-12, "sum {sum} (u={u}, C={c})");
        ensure!(f.normalized.iter().all(|p| (0.0..=1.0).contains(p)), "weight outside [0,1]");
    }
    Ok(format!("max |sum - 1| = {worst:e}"))
}

fn sherman_morrison_oracle() -> Outcome {
    let mut r = common::rng(12);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut worst = 0.0_f64;
    for u in 2..=5 {
        for _ in 0..20 {
            let inv0 = random_spd(&mut r, u, 1.0);
            let mut rule = Rule {
                center: DVector::from_fn(u, |_, _| normal.sample(&mut r)),
                inv_cov: inv0.clone(),
                support: 1,
                weights: DVector::zeros(u + 1),
                rls_cov: DMatrix::identity(u + 1, u + 1),
            };
            // Oracle: explicit covariance recursion, inverted by LU each step.
            let mut cov = inv0.try_inverse().unwrap();
            let mut center = rule.center.clone();
            let mut n = 1.0;
            for _ in 0..50 {
                let x: Vec<f64> = (0..u).map(|j| center[j] + normal.sample(&mut r)).collect();
                let v = DVector::from_row_slice(&x) - &center;
                let alpha = 1.0 / (n + 1.0);
                cov = &cov * (1.0 - alpha) + (&v * v.transpose()) * (alpha * (1.0 - alpha));
                center += &v / (n + 1.0);
                n += 1.0;

                adapt_winner(&mut rule, &x).map_err(|e| e.to_string())?;
                let expected = cov.clone().try_inverse().unwrap();
                let err = rel_frobenius(&rule.inv_cov, &expected);
                worst = worst.max(err);
                ensure!(err <= 1e-8, "u={u}: relative Frobenius error {err:e}");
                ensure!((&rule.inv_cov - rule.inv_cov.transpose()).amax() <= 1e-10, "asymmetric");
                ensure!(rule.inv_cov.clone().cholesky().is_some(), "lost SPD");
            }
        }
    }
    Ok(format!("max relative Frobenius error = {worst:e}"))
}

fn erls_batch_equivalence() -> Outcome {
    let mut report = Vec::new();
    for (noise_sd, tol) in [(0.01, 1e-3), (0.0, 1e-6)] {
        let mut r = common::rng(13);
        let mut model = Model::new(Config::new(2)).unwrap();
        let omega = model.config.omega;
        model.rules.push(Rule {
            center: DVector::from_vec(vec![0.5, 0.5]),
            inv_cov: DMatrix::identity(2, 2),
            support: 1,
            weights: DVector::zeros(3),
            rls_cov: DMatrix::identity(3, 3) * omega,
        });
        let mut gram = DMatrix::identity(3, 3) / omega;
        let mut rhs = DVector::zeros(3);
        for _ in 0..500 {
            let x = [r.random::<f64>(), r.random::<f64>()];
            let noise = if noise_sd > 0.0 {
                Normal::new(0.0, noise_sd).unwrap().sample(&mut r)
            } else {
                0.0
            };
            let t = 2.0 + 3.0 * x[0] - x[1] + noise;
            let f = firings(&model, &x).unwrap();
            let xe = DVector::from_vec(vec![1.0, x[0], x[1]]);
            gram += &xe * xe.transpose() * f.normalized[0];
            rhs += &xe * (t * f.normalized[0]);
            erls_update(&mut model, &x, t, &f).map_err(|e| e.to_string())?;
        }
        let batch = gram.lu().solve(&rhs).unwrap();
        let err = (&model.rules[0].weights - &batch).amax();
        ensure!(err <= tol, "noise sd {noise_sd}: max weight error {err:e} > {tol:e}");
        report.push(format!("sd {noise_sd}: {err:e}"));
    }
    Ok(report.join(", "))
}

fn gate_soundness() -> Outcome {
    let mut r = common::rng(14);
    let mut cfg = Config::new(3);
    cfg.g1 = 0.02;
    cfg.g2 = 0.002;
    let mut model = Model::new(cfg).unwrap();
    let (mut committed, mut rejected) = (0, 0);
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..3).map(|_| r.random::<f64>()).collect();
        let t = (4.0 * x[0]).sin() * x[1] + 0.5 * x[2] * x[2] + 0.05 * r.random::<f64>();
        let step = train_sample(&mut model, &x, t).map_err(|e| e.to_string())?;
        if step.erls.committed {
            committed += 1;
            for s in &step.erls.steps {
                ensure!(s.error_after <= s.error_before, "committed step worsened error at n={}", step.n);
            }
        } else {
            rejected += 1;
        }
    }
    Ok(format!("{committed} committed, {rejected} gated off"))
}

fn structural_responsiveness() -> Outcome {
    let series = common::level_shift_series(139, 88, 0.4, 7);
    let samples = build_timeseries_dataset(&series).unwrap();
    let grid = [1e-3, 1e-2, 1e-1, 0.3, 1.0];
    let configs: Vec<Config> = grid
        .iter()
        .map(|&g1| Config { g1, ..Config::new(2) })
        .collect();
    let points = sweep(&samples, &configs, Strategy::default()).map_err(|e| e.to_string())?;
    // Sample n predicts series index n + 2.
    let hits: Vec<f64> = points
        .iter()
        .filter(|p| p.max_rules <= 16 && p.grow_steps.iter().any(|&n| (88..=93).contains(&(n + 2))))
        .map(|p| p.config.g1)
        .collect();
    ensure!(!hits.is_empty(), "no g1 in {grid:?} grew within t = 88..93 with <= 16 rules");
    Ok(format!("g1 settings responding at the shift: {hits:?}"))
}

fn threshold_monotonicity() -> Outcome {
    let stream = common::regime_stream(300, 0);
    let grid = [1e-4, 1e-3, 1e-2, 1e-1];
    // Growth sweep isolated from pruning.
    let g1_configs: Vec<Config> = grid.iter().map(|&g1| Config { g1, g2: 0.0, ..Config::new(2) }).collect();
    let rules: Vec<usize> = sweep(&stream, &g1_configs, Strategy::default())
        .map_err(|e| e.to_string())?
        .iter()
        .map(|p| p.final_rules)
        .collect();
    ensure!(rules.windows(2).all(|w| w[1] <= w[0]), "final rules over g1 grid: {rules:?}");
    let g2_configs: Vec<Config> = grid.iter().map(|&g2| Config { g1: 1e-2, g2, ..Config::new(2) }).collect();
    let pruned: Vec<usize> = sweep(&stream, &g2_configs, Strategy::default())
        .map_err(|e| e.to_string())?
        .iter()
        .map(|p| p.pruned_total)
        .collect();
    ensure!(pruned.windows(2).all(|w| w[1] >= w[0]), "pruned over g2 grid: {pruned:?}");
    Ok(format!("rules {rules:?}, pruned {pruned:?}"))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn feature_oracle() -> Outcome {
    let sqrt2 = 2f64.sqrt();
    let shape = std::f64::consts::PI / (2.0 * sqrt2);
    for (amp, phase) in [(1.0, 0.0), (2.5, 0.3), (0.01, 1.7)] {
        let n = 4096;
        let w: Vec<f64> = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * i as f64 / n as f64 + phase).sin())
            .collect();
        let f = extract_features("sine", &w, DEFAULT_BINS).unwrap();
        ensure!((f.crest_factor - sqrt2).abs() <= 0.01, "crest {}", f.crest_factor);
        ensure!((f.shape_factor - shape).abs() <= 0.01, "shape {}", f.shape_factor);
    }
    let mut r = common::rng(15);
    let normal = Normal::new(0.0, 1.0).unwrap();
    for _ in 0..200 {
        let len = r.random_range(8..512);
        let w: Vec<f64> = (0..len).map(|_| normal.sample(&mut r) + 0.3).collect();
        let k = r.random_range(0.1..10.0);
        let c = r.random_range(-5.0..5.0);
        let base = extract_features("w", &w, DEFAULT_BINS).unwrap();
        let scaled: Vec<f64> = w.iter().map(|x| k * x).collect();
        let s = extract_features("w", &scaled, DEFAULT_BINS).unwrap();
        ensure!(close(s.rms, k * base.rms), "rms scaling");
        ensure!(close(s.variance, k * k * base.variance), "variance scaling");
        ensure!(close(s.shape_factor, base.shape_factor), "shape scaling");
        ensure!(close(s.crest_factor, base.crest_factor), "crest scaling");
        ensure!(close(s.skewness, base.skewness), "skewness scaling");
        ensure!(close(s.kurtosis, base.kurtosis), "kurtosis scaling");
        ensure!(close(s.histogram_upper, k * base.histogram_upper), "upper scaling");
        ensure!(close(s.histogram_lower, k * base.histogram_lower), "lower scaling");
        let shifted: Vec<f64> = w.iter().map(|x| x + c).collect();
        let h = extract_features("w", &shifted, DEFAULT_BINS).unwrap();
        ensure!(close(h.variance, base.variance), "variance shift {} vs {}", h.variance, base.variance);
        ensure!(close(h.skewness, base.skewness), "skewness shift");
        ensure!(close(h.kurtosis, base.kurtosis), "kurtosis shift");
        ensure!(close(h.histogram_upper, base.histogram_upper + c), "upper shift");
        ensure!(close(h.histogram_lower, base.histogram_lower + c), "lower shift");
    }
    Ok("sine ratios and 200 random invariance checks hold".into())
}

fn experiment_shape() -> Outcome {
    let table = common::feature_table(139, 16);
    let direct = run_direct(&table, Feature::Kurtosis, &Config::new(8), 108).map_err(|e| e.to_string())?;
    ensure!(direct.report.predictions.len() == 31, "direct predictions {}", direct.report.predictions.len());
    ensure!(direct.report.n_train == 108 && direct.fit.steps.len() == 108, "direct training length");
    let ts = run_timeseries(&table, Feature::Variance, &Config::new(2)).map_err(|e| e.to_string())?;
    ensure!(ts.report.predictions.len() == 137, "timeseries predictions {}", ts.report.predictions.len());
    ensure!(ts.fit.steps.len() == 137, "timeseries steps");
    Ok(format!(
        "direct RMSE {:.4} ({} rules, sets {}), timeseries RMSE {:.4} ({} rules, sets {})",
        direct.report.rmse,
        direct.report.rule_count,
        direct.report.fuzzy_set,
        ts.report.rmse,
        ts.report.rule_count,
        ts.report.fuzzy_set
    ))
}

fn runtime() -> Outcome {
    let table = common::feature_table(139, 17);
    let rows: Vec<[f64; 9]> = table.iter().map(|f| f.values()).collect();
    let norm = Normalizer::fit(&rows).unwrap();
    let scaled: Vec<Vec<f64>> = rows.iter().map(|r| norm.apply(r)).collect();
    let (train, _) = build_direct_dataset(&scaled, Feature::Kurtosis, 139).unwrap();
    let mut model = Model::new(Config::new(8)).unwrap();
    let start = std::time::Instant::now();
    fit_stream(&mut model, &train).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure!(train.len() == 139 && train[0].x.len() == 8, "stream shape");
    ensure!(secs < 2.0, "fit_stream took {secs:.3} s");
    Ok(format!("139-sample, 8-input fit in {secs:.4} s"))
}

fn determinism() -> Outcome {
    let table = common::feature_table(139, 18);
    let render = |out: panfis::harness::RunOutput| {
        let mut report = out.report;
        report.wall_time_seconds = 0.0;
        let mut trace = Vec::new();
        write_trace_csv(&out.fit.steps, &mut trace).unwrap();
        (report.to_json().unwrap(), trace, out.model.to_document().unwrap())
    };
    for mode in ["direct", "timeseries"] {
        let run = || match mode {
            "direct" => run_direct(&table, Feature::Kurtosis, &Config::new(8), 108),
            _ => run_timeseries(&table, Feature::Kurtosis, &Config::new(2)),
        };
        let a = render(run().map_err(|e| e.to_string())?);
        let b = render(run().map_err(|e| e.to_string())?);
        ensure!(a.0 == b.0, "{mode}: reports differ");
        ensure!(a.1 == b.1, "{mode}: traces differ");
        ensure!(a.2 == b.2, "{mode}: models differ");
    }
    Ok("reports, traces and models byte-identical".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("golden rule round-trip", golden_rule_round_trip),
        ("partition of unity", partition_of_unity),
        ("Sherman-Morrison oracle", sherman_morrison_oracle),
        ("ERLS batch equivalence", erls_batch_equivalence),
        ("gate soundness", gate_soundness),
        ("structural responsiveness", structural_responsiveness),
        ("threshold monotonicity", threshold_monotonicity),
        ("feature oracle", feature_oracle),
        ("experiment shape", experiment_shape),
        ("runtime", runtime),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                println!("FAIL  {name}: {why}");
                failed.push(name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
