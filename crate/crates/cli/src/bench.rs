use std::fs;
use std::path::{Path, PathBuf};

use gini_core::agglomerative::{agglomerative_fit, Dendrogram};
use gini_core::dataset::{inject_noise, DataMatrix, FoldPlan, Manifest};
use gini_core::eval::{
    apply_alignment, classification_report, hungarian_align, rank_table, EvalReport, FoldScore,
    Objective, Params, Scores,
};
use gini_core::kmeans::{
    kmeans_fit, kmeans_predict, kmeanspp_init, select_nu_silhouette, KMeansOptions,
};
use gini_core::knn::knn_grid_search_with;
use gini_core::rng::derive_seed;
use gini_core::{silhouette_score, Error, MetricSpec, Result};
use rayon::prelude::*;

use crate::config::{BenchConfig, MetricEntry, NuSelection, Task};

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub reports: Vec<EvalReport>,
    pub failed_datasets: Vec<String>,
    pub written: Vec<PathBuf>,
}

impl BenchOutcome {
    pub fn success(&self) -> bool {
        self.failed_datasets.is_empty()
    }
}

struct Prepared {
    name: String,
    data: DataMatrix,
    plan: FoldPlan,
    k: usize,
    /// Shared k-means++ centroids per fold.
    inits: Vec<DataMatrix>,
}

struct CellOutput {
    report: EvalReport,
    dendrogram: Option<Dendrogram>,
}

/// Runs the configured protocol on every dataset × metric cell and writes
/// `reports.json`, the ranking CSVs and, for k-means, `iterations.csv`.
/// Config problems abort before any work; a failing dataset is recorded in
/// its reports and left out of the ranking tables.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchOutcome> {
    let entries = config.validate()?;
    let manifest = Manifest::load(&config.manifest)?;
    let names: Vec<String> = if config.datasets.is_empty() {
        manifest.datasets.keys().cloned().collect()
    } else {
        for n in &config.datasets {
            if !manifest.datasets.contains_key(n) {
                return Err(Error::Config(format!("dataset '{n}' not in manifest")));
            }
        }
        config.datasets.clone()
    };

    let prepared: Vec<std::result::Result<Prepared, String>> = names
        .par_iter()
        .map(|n| prepare(config, &manifest, n).map_err(|e| e.to_string()))
        .collect();
    let cells: Vec<(usize, usize)> = (0..names.len())
        .flat_map(|d| (0..entries.len()).map(move |m| (d, m)))
        .collect();
    let outputs: Vec<CellOutput> = cells
        .par_iter()
        .map(|&(d, m)| {
            let entry = &entries[m];
            let result = match &prepared[d] {
                Ok(p) => run_cell(config, p, entry),
                Err(msg) => Err(Error::Config(msg.clone())),
            };
            result.unwrap_or_else(|e| CellOutput {
                report: EvalReport::failed(&names[d], &entry.label, entry.spec, e.to_string()),
                dendrogram: None,
            })
        })
        .collect();

    let failed_datasets: Vec<String> = names
        .iter()
        .filter(|n| {
            outputs
                .iter()
                .any(|o| &o.report.dataset == *n && o.report.error.is_some())
        })
        .cloned()
        .collect();
    let reports: Vec<EvalReport> = outputs.iter().map(|o| o.report.clone()).collect();
    let written = write_outputs(config, &reports, &failed_datasets, &outputs)?;
    Ok(BenchOutcome {
        reports,
        failed_datasets,
        written,
    })
}

fn prepare(config: &BenchConfig, manifest: &Manifest, name: &str) -> Result<Prepared> {
    let mut data = manifest.load_dataset(name)?;
    if let Some(level) = config.noise {
        data = inject_noise(&data, level, derive_seed(config.seed, &[name, "noise"]))?;
    }
    let plan = FoldPlan::new(
        data.rows(),
        config.folds,
        derive_seed(config.seed, &[name, "folds"]),
    )?;
    let k = config.k_clusters.unwrap_or(data.n_classes());
    let inits = if config.task == Task::Kmeans {
        (0..config.folds)
            .map(|f| {
                let (tr, _) = plan.split(f);
                kmeanspp_init(
                    &data.select_rows(&tr),
                    k,
                    MetricSpec::Euclidean,
                    derive_seed(config.seed, &[name, "kmeans-init", &f.to_string()]),
                )
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    Ok(Prepared {
        name: name.to_string(),
        data,
        plan,
        k,
        inits,
    })
}

fn run_cell(config: &BenchConfig, p: &Prepared, entry: &MetricEntry) -> Result<CellOutput> {
    match config.task {
        Task::Knn => knn_cell(config, p, entry).map(|report| CellOutput {
            report,
            dendrogram: None,
        }),
        Task::Kmeans => kmeans_cell(config, p, entry).map(|report| CellOutput {
            report,
            dendrogram: None,
        }),
        Task::Agglo => agglo_cell(config, p, entry),
    }
}

fn knn_cell(config: &BenchConfig, p: &Prepared, entry: &MetricEntry) -> Result<EvalReport> {
    let smallest_train = p
        .plan
        .fold_sizes()
        .iter()
        .map(|s| p.data.rows() - s)
        .min()
        .unwrap_or(0);
    let ks: Vec<usize> = config
        .k_range
        .iter()
        .copied()
        .filter(|&k| k <= smallest_train)
        .collect();
    if ks.is_empty() {
        return Err(Error::Config(format!(
            "no k in {:?} fits the {smallest_train} training rows",
            config.k_range
        )));
    }
    let nu_grid = match (entry.tune_nu, entry.spec) {
        (true, _) => config.nu_grid.clone(),
        (false, MetricSpec::GeneralizedGini { nu }) => vec![nu],
        _ => Vec::new(),
    };
    let grid = knn_grid_search_with(
        &p.data,
        entry.spec,
        &ks,
        &nu_grid,
        &p.plan,
        config.objective,
        config.rank_mode,
        config.rank_convention,
    )?;
    let best = grid.best_cell();
    let spec = match best.nu {
        Some(nu) => entry.spec.with_nu(nu)?,
        None => entry.spec,
    };
    Ok(EvalReport::from_folds(
        &p.name,
        &entry.label,
        spec,
        best.per_fold.clone(),
        Params {
            k: Some(best.k),
            nu: best.nu,
        },
    ))
}

fn truth(p: &Prepared, rows: &[usize]) -> Result<Vec<usize>> {
    let labels = p
        .data
        .labels()
        .ok_or_else(|| Error::Config(format!("dataset '{}' has no labels", p.name)))?;
    Ok(rows.iter().map(|&i| labels[i]).collect())
}

/// Cluster ids mapped onto classes, then scored.
fn aligned_scores(pred: &[usize], truth: &[usize], k: usize) -> Result<Scores> {
    let classes = truth.iter().max().map_or(0, |m| m + 1);
    let width = k.max(classes);
    let perm = hungarian_align(pred, truth, width)?;
    classification_report(&apply_alignment(pred, &perm), truth)
}

fn kmeans_folds(config: &BenchConfig, p: &Prepared, spec: MetricSpec) -> Result<Vec<FoldScore>> {
    let opts = KMeansOptions {
        max_iter: config.max_iter,
        update: config.kmeans_update,
        ..Default::default()
    };
    (0..p.plan.n_folds)
        .map(|f| {
            let (tr, te) = p.plan.split(f);
            let model = kmeans_fit(&p.data.select_rows(&tr), p.k, spec, &p.inits[f], opts)?;
            let pred = kmeans_predict(&model, &p.data.select_rows(&te))?;
            let s = aligned_scores(&pred, &truth(p, &te)?, p.k)?;
            Ok(FoldScore {
                fold: f,
                precision: s.precision,
                recall: s.recall,
                f1: s.f1,
                iterations: Some(model.iterations),
            })
        })
        .collect()
}

fn fold_mean(folds: &[FoldScore], objective: Objective) -> f64 {
    folds
        .iter()
        .map(|f| {
            objective.pick(&Scores {
                precision: f.precision,
                recall: f.recall,
                f1: f.f1,
            })
        })
        .sum::<f64>()
        / folds.len().max(1) as f64
}

/// First grid value with the highest score.
fn argmax_nu(scores: &[(f64, f64)]) -> (f64, f64) {
    let mut best = scores[0];
    for &(nu, s) in &scores[1..] {
        if s > best.1 || (s == best.1 && nu < best.0) {
            best = (nu, s);
        }
    }
    best
}

fn kmeans_cell(config: &BenchConfig, p: &Prepared, entry: &MetricEntry) -> Result<EvalReport> {
    let spec = if entry.tune_nu {
        let nu = match config.nu_selection {
            NuSelection::Silhouette => {
                select_nu_silhouette(
                    &p.data,
                    p.k,
                    &config.nu_grid,
                    config.folds,
                    derive_seed(config.seed, &[&p.name, &entry.label, "nu"]),
                )?
                .nu
            }
            NuSelection::Objective => {
                let scores = config
                    .nu_grid
                    .par_iter()
                    .map(|&nu| {
                        let folds = kmeans_folds(config, p, MetricSpec::GeneralizedGini { nu })?;
                        Ok((nu, fold_mean(&folds, config.objective)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                argmax_nu(&scores).0
            }
        };
        entry.spec.with_nu(nu)?
    } else {
        entry.spec
    };
    let folds = kmeans_folds(config, p, spec)?;
    let nu = match spec {
        MetricSpec::GeneralizedGini { nu } => Some(nu),
        _ => None,
    };
    Ok(EvalReport::from_folds(
        &p.name,
        &entry.label,
        spec,
        folds,
        Params { k: Some(p.k), nu },
    ))
}

fn agglo_run(
    config: &BenchConfig,
    p: &Prepared,
    spec: MetricSpec,
) -> Result<(Dendrogram, Vec<usize>, Scores)> {
    let (dendrogram, labels) = agglomerative_fit(&p.data, p.k, spec, config.linkage)?;
    let all: Vec<usize> = (0..p.data.rows()).collect();
    let scores = aligned_scores(&labels, &truth(p, &all)?, p.k)?;
    Ok((dendrogram, labels, scores))
}

fn agglo_cell(config: &BenchConfig, p: &Prepared, entry: &MetricEntry) -> Result<CellOutput> {
    let spec = if entry.tune_nu {
        let scores = config
            .nu_grid
            .par_iter()
            .map(|&nu| {
                let spec = MetricSpec::GeneralizedGini { nu };
                let (_, labels, s) = agglo_run(config, p, spec)?;
                let score = match config.nu_selection {
                    NuSelection::Silhouette => {
                        let distinct = labels.iter().max().map_or(0, |m| m + 1);
                        if distinct < 2 {
                            -1.0
                        } else {
                            silhouette_score(&p.data, &labels, spec)?
                        }
                    }
                    NuSelection::Objective => config.objective.pick(&s),
                };
                Ok((nu, score))
            })
            .collect::<Result<Vec<_>>>()?;
        entry.spec.with_nu(argmax_nu(&scores).0)?
    } else {
        entry.spec
    };
    let (dendrogram, _, s) = agglo_run(config, p, spec)?;
    let nu = match spec {
        MetricSpec::GeneralizedGini { nu } => Some(nu),
        _ => None,
    };
    let fold = FoldScore {
        fold: 0,
        precision: s.precision,
        recall: s.recall,
        f1: s.f1,
        iterations: None,
    };
    Ok(CellOutput {
        report: EvalReport::from_folds(
            &p.name,
            &entry.label,
            spec,
            vec![fold],
            Params { k: Some(p.k), nu },
        ),
        dendrogram: Some(dendrogram),
    })
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Metrics × datasets table of a per-report value plus a mean column.
fn value_table(reports: &[EvalReport], value: impl Fn(&EvalReport) -> Option<f64>) -> String {
    let mut datasets: Vec<&str> = Vec::new();
    let mut metrics: Vec<&str> = Vec::new();
    for r in reports {
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
        if !metrics.contains(&r.metric.as_str()) {
            metrics.push(&r.metric);
        }
    }
    let mut out = format!("Distance,{},Mean\n", datasets.join(","));
    for m in metrics {
        out.push_str(m);
        let mut vals = Vec::new();
        for d in &datasets {
            let v = reports
                .iter()
                .find(|r| r.metric == m && r.dataset == *d)
                .and_then(&value);
            match v {
                Some(v) => {
                    out.push_str(&format!(",{v:.2}"));
                    vals.push(v);
                }
                None => out.push(','),
            }
        }
        let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
        out.push_str(&format!(",{mean:.2}\n"));
    }
    out
}

fn write(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, text)?;
    written.push(path);
    Ok(())
}

fn write_outputs(
    config: &BenchConfig,
    reports: &[EvalReport],
    failed: &[String],
    outputs: &[CellOutput],
) -> Result<Vec<PathBuf>> {
    let dir: &Path = &config.out_dir;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    write(
        dir.join("reports.json"),
        &(serde_json::to_string_pretty(reports)? + "\n"),
        &mut written,
    )?;
    let ok: Vec<EvalReport> = reports
        .iter()
        .filter(|r| !failed.contains(&r.dataset))
        .cloned()
        .collect();
    if !ok.is_empty() {
        for (name, score) in [
            ("ranking_precision.csv", Objective::Precision),
            ("ranking_recall.csv", Objective::Recall),
            ("ranking_f1.csv", Objective::MacroF1),
        ] {
            let table = rank_table(&ok, score, config.rank_decimals)?;
            write(dir.join(name), &table.to_csv(), &mut written)?;
        }
        if config.task == Task::Kmeans {
            write(
                dir.join("iterations.csv"),
                &value_table(&ok, |r| r.iterations),
                &mut written,
            )?;
        }
    }
    if config.task == Task::Agglo {
        let sub = dir.join("dendrograms");
        fs::create_dir_all(&sub)?;
        for o in outputs {
            if let Some(d) = &o.dendrogram {
                let name = format!(
                    "{}__{}.json",
                    file_stem(&o.report.dataset),
                    file_stem(&o.report.metric)
                );
                write(sub.join(name), &(d.to_json()? + "\n"), &mut written)?;
            }
        }
    }
    Ok(written)
}

/// Rebuilds a ranking table from a saved `reports.json`, skipping datasets
/// with any failed cell.
pub fn rank_table_from_reports(
    path: &Path,
    score: Objective,
    decimals: Option<u32>,
) -> Result<String> {
    let text = fs::read_to_string(path)?;
    let reports: Vec<EvalReport> = serde_json::from_str(&text)?;
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| r.error.is_some())
        .map(|r| r.dataset.as_str())
        .collect();
    let ok: Vec<EvalReport> = reports
        .iter()
        .filter(|r| !failed.contains(&r.dataset.as_str()))
        .cloned()
        .collect();
    Ok(rank_table(&ok, score, decimals)?.to_csv())
}
