//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.
//!
//! The Banknote check reads `GINI_BANKNOTE_CSV` (headerless, label in the
//! last column) or `data/banknote.csv`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use gini_cli::{run_benchmark, BenchConfig};
use gini_core::eval::{
    classification_report, hungarian_align, silhouette_score, wilcoxon_signed_rank_with,
    WilcoxonMode,
};
use gini_core::kmeans::{default_nu_grid, kmeans_fit, kmeanspp_init, KMeansOptions, UpdateRule};
use gini_core::knn::{knn_fit, knn_predict};
use gini_core::metrics::{generalized_gini_prametric, gini_prametric, pairwise};
use gini_core::ranks::build_rank_context;
use gini_core::{DataMatrix, FoldPlan, Manifest, MetricSpec};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde_json::Value;

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn bench(json: Value) -> Result<(Vec<Value>, PathBuf, tempfile::TempDir), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut json = json;
    json["out_dir"] = Value::from(dir.path().to_str().unwrap());
    let config = BenchConfig::from_json(&json.to_string()).map_err(|e| e.to_string())?;
    let outcome = run_benchmark(&config).map_err(|e| e.to_string())?;
    ensure(
        outcome.success(),
        format!("failed datasets {:?}", outcome.failed_datasets),
    )?;
    let text =
        std::fs::read_to_string(dir.path().join("reports.json")).map_err(|e| e.to_string())?;
    let reports: Vec<Value> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    Ok((reports, dir.path().to_path_buf(), dir))
}

fn random_matrix(rng: &mut Xoshiro256PlusPlus) -> DataMatrix {
    let n = rng.gen_range(2..=30);
    let d = rng.gen_range(1..=10);
    let tied = rng.gen_bool(0.5);
    let values = (0..n * d)
        .map(|_| {
            if tied {
                rng.gen_range(-3..=3) as f64
            } else {
                rng.gen_range(-50.0..50.0)
            }
        })
        .collect();
    DataMatrix::new(n, d, values).unwrap()
}

fn worked_example() -> Check {
    let two = DataMatrix::from_rows(&[[0.0, 3.0], [4.0, 2.0]]).unwrap();
    let three = DataMatrix::from_rows(&[[0.0, 3.0], [4.0, 2.0], [2.0, 1.5]]).unwrap();
    let a = pairwise(&two, MetricSpec::Gini).unwrap()[1];
    let b = pairwise(&three, MetricSpec::Gini).unwrap()[1];
    ensure(a == 5.0 && b == 9.0, format!("got {a} and {b}"))?;
    Ok(format!("d_G = {a}, then {b} after appending (2, 1.5)"))
}

fn property_suite() -> Check {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(2024);
    let mut specs = vec![MetricSpec::Gini];
    specs.extend([0.5, 1.5, 2.0, 3.0, 6.0].map(|nu| MetricSpec::GeneralizedGini { nu }));
    for trial in 0..1000 {
        let data = random_matrix(&mut rng);
        let (n, d) = (data.rows(), data.cols());
        let lambda = rng.gen_range(0.01..100.0);
        let shifted = data.map_values(|v| v + lambda).unwrap();
        for &spec in &specs {
            let m = pairwise(&data, spec).unwrap();
            let s = pairwise(&shifted, spec).unwrap();
            let ctx = build_rank_context(&data, spec.rank_nu()).unwrap();
            for i in 0..n {
                ensure(
                    m[i * n + i] == 0.0,
                    format!("nullity, trial {trial}, {spec}"),
                )?;
                let ri = spec.rank_weights(&ctx, i).unwrap();
                for k in 0..n {
                    let v = m[i * n + k];
                    ensure(
                        v >= 0.0,
                        format!("non-negativity, trial {trial}, {spec}: {v}"),
                    )?;
                    ensure(
                        v == m[k * n + i],
                        format!("symmetry, trial {trial}, {spec}"),
                    )?;
                    ensure(
                        (v - s[i * n + k]).abs() <= 1e-9 * v.abs().max(1.0),
                        format!("linear invariance, trial {trial}, {spec}"),
                    )?;
                    let same = spec
                        .dissimilarity(data.row(i), ri, data.row(k), ri)
                        .unwrap();
                    ensure(same == 0.0, format!("rank nullity, trial {trial}, {spec}"))?;
                }
            }
        }
        let mut values = data.values().to_vec();
        values.extend(
            (0..d).map(|j| data.column(j).iter().copied().fold(f64::INFINITY, f64::min) - 1.0),
        );
        let bigger = pairwise(
            &DataMatrix::new(n + 1, d, values).unwrap(),
            MetricSpec::Gini,
        )
        .unwrap();
        let base = pairwise(&data, MetricSpec::Gini).unwrap();
        for i in 0..n {
            for k in 0..n {
                ensure(
                    base[i * n + k] == bigger[i * (n + 1) + k],
                    format!("append-minimum, trial {trial}"),
                )?;
            }
        }
    }
    Ok("1000 matrices x 6 specs".into())
}

fn nu_two_reduction() -> Check {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let data = random_matrix(&mut rng);
        let n = data.rows();
        let (i, k) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let ctx = build_rank_context(&data, Some(2.0)).unwrap();
        let g = gini_prametric(data.row(i), data.row(k), ctx.asc_row(i), ctx.asc_row(k)).unwrap();
        let gg = generalized_gini_prametric(
            data.row(i),
            data.row(k),
            ctx.desc_pow_row(i).unwrap(),
            ctx.desc_pow_row(k).unwrap(),
            2.0,
        )
        .unwrap();
        worst = worst.max((g - gg).abs() / g.abs().max(1.0));
    }
    ensure(worst <= 1e-12, format!("worst relative gap {worst:e}"))?;
    Ok(format!("1000 pairs, worst relative gap {worst:e}"))
}

fn oracle_equivalences() -> Check {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(4);
    let perms = oracles::permutations(4);
    for t in 0..1000 {
        let n = rng.gen_range(1..40);
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let got = hungarian_align(&pred, &truth, 4).unwrap();
        let best = perms
            .iter()
            .map(|p| oracles::agreement(&pred, &truth, p))
            .max()
            .unwrap();
        ensure(
            oracles::agreement(&pred, &truth, &got) == best,
            format!("hungarian trial {t}"),
        )?;
    }

    let specs = MetricSpec::all(2.5);
    ensure(specs.len() == 14, "expected 14 specs")?;
    for t in 0..200 {
        let n = rng.gen_range(4..=12);
        let n_test = rng.gen_range(1..=3.min(n - 2));
        let d = rng.gen_range(1..=3);
        let positive = t % 3 == 0;
        let mut draw = || -> Vec<f64> {
            loop {
                let row: Vec<f64> = (0..d)
                    .map(|_| {
                        let v = rng.gen_range(-8..=8) as f64 * 0.25;
                        if positive {
                            v.abs() + 0.25
                        } else {
                            v
                        }
                    })
                    .collect();
                if row.iter().any(|v| *v != 0.0) {
                    return row;
                }
            }
        };
        let train: Vec<Vec<f64>> = (0..n - n_test).map(|_| draw()).collect();
        let test: Vec<Vec<f64>> = (0..n_test).map(|_| draw()).collect();
        let labels: Vec<usize> = (0..train.len()).map(|i| (i * 7 + t) % 3).collect();
        let k = 1 + t % train.len();
        let train_m = DataMatrix::from_rows(&train)
            .unwrap()
            .with_labels(labels.clone())
            .unwrap();
        let test_m = DataMatrix::from_rows(&test).unwrap();
        for &spec in &specs {
            let got = knn_predict(&knn_fit(&train_m, spec, k).unwrap(), &test_m).unwrap();
            ensure(
                got == oracles::brute_knn(&train, &labels, &test, spec, k),
                format!("knn trial {t}, {spec}"),
            )?;
        }
    }

    let pts = [
        [0.0, 0.0],
        [1.0, 0.5],
        [0.5, 2.0],
        [5.0, 5.0],
        [6.0, 4.5],
        [9.0, 1.0],
    ];
    let data = DataMatrix::from_rows(&pts).unwrap();
    for labels in [
        vec![0, 0, 0, 1, 1, 1],
        vec![0, 0, 1, 1, 1, 2],
        vec![1, 0, 1, 0, 1, 0],
    ] {
        let got = silhouette_score(&data, &labels, MetricSpec::Euclidean).unwrap();
        let want = oracles::brute_silhouette(&pts, &labels);
        ensure(
            (got - want).abs() <= 1e-12,
            format!("silhouette {got} vs {want}"),
        )?;
    }

    for t in 0..200 {
        let n = rng.gen_range(5..=12);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = a
            .iter()
            .map(|x| {
                let step = rng.gen_range(1..=3) as f64 * 0.125;
                if rng.gen_bool(0.5) {
                    x + step
                } else {
                    x - step
                }
            })
            .collect();
        let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let r = wilcoxon_signed_rank_with(&a, &b, WilcoxonMode::Exact).unwrap();
        let (stat, p) = oracles::enumerated_p(&diffs);
        ensure(
            (r.statistic - stat).abs() <= 1e-12 && (r.p_value - p).abs() <= 1e-12,
            format!("wilcoxon trial {t}"),
        )?;
    }
    let _ = classification_report(&[0, 1], &[0, 1]).unwrap();
    Ok("hungarian 1000, knn 200 x 14 specs, silhouette, wilcoxon 200".into())
}

/// Mean precision over seeds 1..=3 of 3-fold KNN with (k, ν) from the grid.
fn knn_precision(manifest: &Path, dataset: &str, metric: &str) -> Result<(f64, Vec<f64>), String> {
    let mut per_seed = Vec::new();
    for seed in 1..=3u64 {
        let (reports, _, _dir) = bench(serde_json::json!({
            "manifest": manifest, "datasets": [dataset], "metrics": [metric],
            "task": "knn", "folds": 3, "seed": seed, "objective": "precision",
        }))?;
        per_seed.push(reports[0]["precision"].as_f64().unwrap());
    }
    Ok((per_seed.iter().sum::<f64>() / 3.0, per_seed))
}

fn banknote_manifest(dir: &Path) -> Result<PathBuf, String> {
    let csv = std::env::var_os("GINI_BANKNOTE_CSV")
        .map(PathBuf::from)
        .unwrap_or_else(|| data_dir().join("banknote.csv"));
    ensure(
        csv.exists(),
        format!("Banknote data not found at {}", csv.display()),
    )?;
    let m = dir.join("banknote_manifest.json");
    let entry = serde_json::json!({"banknote": {"path": csv, "label_col": 4, "n_classes": 2, "has_header": false}});
    std::fs::write(&m, entry.to_string()).map_err(|e| e.to_string())?;
    Ok(m)
}

fn knn_reproduction() -> Check {
    let (iris, iris_seeds) = knn_precision(&data_dir().join("manifest.json"), "iris", "gini-gen")?;
    let iris_line = format!("Iris gini-gen precision {iris:.4} (seeds {iris_seeds:.4?})");
    ensure(iris >= 0.94, format!("{iris_line} < 0.94"))?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let m = banknote_manifest(dir.path()).map_err(|e| format!("{iris_line}; {e}"))?;
    let (bank, _) = knn_precision(&m, "banknote", "gini-gen:nu=2")?;
    ensure(
        bank >= 0.99,
        format!("Banknote precision {bank:.4} < 0.99; {iris_line}"),
    )?;
    Ok(format!("Banknote precision {bank:.4}; {iris_line}"))
}

fn kmeans_convergence() -> Check {
    let manifest = Manifest::load(data_dir().join("manifest.json")).map_err(|e| e.to_string())?;
    let mut specs = vec![MetricSpec::Gini];
    specs.extend(
        default_nu_grid()
            .into_iter()
            .map(|nu| MetricSpec::GeneralizedGini { nu }),
    );
    let mut runs = 0;
    for name in ["iris", "wine", "glass"] {
        let data = manifest.load_dataset(name).map_err(|e| e.to_string())?;
        let k = data.n_classes();
        let plan = FoldPlan::new(data.rows(), 5, 42).unwrap();
        for f in 0..5 {
            let (train, _) = plan.split(f);
            let x = data.select_rows(&train);
            let init = kmeanspp_init(&x, k, MetricSpec::Euclidean, f as u64).unwrap();
            for &spec in &specs {
                for update in [UpdateRule::Mean, UpdateRule::FrozenRank] {
                    let opts = KMeansOptions {
                        max_iter: 300,
                        update,
                        ..Default::default()
                    };
                    let model = kmeans_fit(&x, k, spec, &init, opts).map_err(|e| e.to_string())?;
                    ensure(
                        model.converged,
                        format!("{name} fold {f} {spec} {update:?} did not converge"),
                    )?;
                    if update == UpdateRule::FrozenRank {
                        for w in model.objective_trace.windows(2) {
                            ensure(
                                w[1] <= w[0] + 1e-9,
                                format!("{name} fold {f} {spec}: trace {} -> {}", w[0], w[1]),
                            )?;
                        }
                    }
                    runs += 1;
                }
            }
        }
    }
    let (reports, _, _dir) = bench(serde_json::json!({
        "manifest": data_dir().join("manifest.json"), "datasets": ["iris"],
        "metrics": ["gini-gen"], "task": "kmeans", "max_iter": 300,
    }))?;
    let its = reports[0]["iterations"].as_f64().unwrap();
    let nu = &reports[0]["spec"];
    ensure(its <= 10.0, format!("Iris ν* mean iterations {its} > 10"))?;
    Ok(format!("{runs} runs converged, frozen-rank traces non-increasing; Iris {nu} mean iterations {its:.2}"))
}

fn ranking_table() -> Check {
    let metrics = ["euclidean", "manhattan", "cosine", "gini", "gini-gen:nu=3"];
    let (reports, out, _dir) = bench(serde_json::json!({
        "manifest": data_dir().join("manifest.json"), "datasets": ["iris", "wine"],
        "metrics": metrics, "task": "knn", "folds": 3, "k_range": [1, 3, 5], "rank_decimals": 2,
    }))?;
    let csv =
        std::fs::read_to_string(out.join("ranking_precision.csv")).map_err(|e| e.to_string())?;
    let lines: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    ensure(
        lines[0] == ["Distance", "iris", "wine", "Rank"],
        format!("header {:?}", lines[0]),
    )?;
    ensure(lines.len() == metrics.len() + 1, "one row per metric")?;
    let round = |v: f64| (v * 100.0).round() / 100.0;
    for (row, metric) in lines[1..].iter().zip(metrics) {
        ensure(row[0] == metric, format!("row {} for {metric}", row[0]))?;
        let mut sum = 0.0;
        for (c, ds) in ["iris", "wine"].iter().enumerate() {
            let score = |m: &str| {
                let r = reports
                    .iter()
                    .find(|r| r["dataset"] == *ds && r["metric"] == m)
                    .unwrap();
                round(r["precision"].as_f64().unwrap())
            };
            let mine = score(metric);
            let want = 1 + metrics.iter().filter(|m| score(m) > mine).count();
            ensure(
                row[c + 1] == want.to_string(),
                format!("{metric} on {ds}: {} vs {want}", row[c + 1]),
            )?;
            sum += want as f64;
        }
        ensure(
            row[3] == format!("{:.2}", sum / 2.0),
            format!("mean rank of {metric}"),
        )?;
    }
    Ok(format!(
        "{} metrics x 2 datasets with competition ties and mean rank",
        metrics.len()
    ))
}

fn determinism() -> Check {
    let m = data_dir().join("manifest.json");
    let configs = [
        serde_json::json!({"manifest": m, "datasets": ["iris"], "metrics": ["gini", "euclidean"], "task": "knn", "folds": 3, "noise": 0.1, "k_range": [1, 3, 5]}),
        serde_json::json!({"manifest": m, "datasets": ["iris", "wine"], "metrics": ["gini-gen", "euclidean"], "task": "kmeans", "nu_grid": [1.5, 2.0, 4.0]}),
        serde_json::json!({"manifest": m, "datasets": ["iris"], "metrics": ["gini-gen:nu=3", "euclidean"], "task": "agglo"}),
    ];
    for c in configs {
        let (_, a, _da) = bench(c.clone())?;
        let (_, b, _db) = bench(c.clone())?;
        let read = |p: &Path| std::fs::read(p.join("reports.json")).unwrap();
        ensure(
            read(&a) == read(&b),
            format!("reports differ for task {}", c["task"]),
        )?;
    }
    Ok("knn, kmeans and agglo reports byte-identical across runs".into())
}

fn main() -> ExitCode {
    let checks: [Criterion; 8] = [
        ("worked example", worked_example),
        ("prametric properties", property_suite),
        ("nu = 2 reduction", nu_two_reduction),
        ("oracle equivalences", oracle_equivalences),
        ("knn reproduction", knn_reproduction),
        ("k-means convergence", kmeans_convergence),
        ("ranking table", ranking_table),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let result =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(msg) => println!("PASS {} {name}: {msg} ({secs:.1}s)", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {} {name}: {msg} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        checks.len() - failed,
        checks.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
