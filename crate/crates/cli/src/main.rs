use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gini_cli::{rank_table_from_reports, run_benchmark, BenchConfig, OUT_DIR_ENV};
use gini_core::eval::Objective;
use gini_core::Error;
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(
    name = "gini",
    version,
    about = "Gini prametric clustering and classification benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full protocol; the task comes from the config or --task.
    Bench(RunArgs),
    /// KNN with cross-validated (k, ν) search.
    Knn(RunArgs),
    /// k-means with shared k-means++ seeding per fold.
    Kmeans(RunArgs),
    /// Agglomerative clustering over the whole dataset.
    Agglo(RunArgs),
    /// Re-aggregate a saved reports.json into a ranking table.
    RankTable(RankArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; flags given here override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    datasets: Option<Vec<String>>,
    /// Comma-separated metric specs, e.g. euclidean,gini,gini-gen:nu=2.5
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise: Option<f64>,
    /// `a..b` (inclusive) or a comma list
    #[arg(long)]
    k_range: Option<String>,
    #[arg(long, value_delimiter = ',')]
    nu_grid: Option<Vec<f64>>,
    #[arg(long)]
    k_clusters: Option<usize>,
    #[arg(long)]
    linkage: Option<String>,
    /// macro_f1, precision or recall
    #[arg(long)]
    objective: Option<String>,
    /// silhouette or objective
    #[arg(long)]
    nu_selection: Option<String>,
    /// mean or frozen-rank
    #[arg(long)]
    kmeans_update: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// transductive or inductive
    #[arg(long)]
    rank_mode: Option<String>,
    /// definition or scaled-power
    #[arg(long)]
    rank_convention: Option<String>,
    #[arg(long)]
    rank_decimals: Option<u32>,
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    reports: PathBuf,
    /// precision, recall or macro_f1
    #[arg(long, default_value = "precision")]
    score: String,
    #[arg(long)]
    decimals: Option<u32>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_k_range(s: &str) -> Result<Vec<usize>, Error> {
    let bad = || Error::Config(format!("bad k range '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect()
}

fn build_config(args: RunArgs, task: Option<&str>) -> Result<BenchConfig, Error> {
    let mut obj: Map<String, Value> = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            match serde_json::from_str(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => {
                    return Err(Error::Config(format!(
                        "{} is not a JSON object",
                        path.display()
                    )))
                }
                Err(e) => return Err(Error::Config(format!("bad config {}: {e}", path.display()))),
            }
        }
        None => Map::new(),
    };
    let mut set = |key: &str, v: Value| {
        obj.insert(key.to_string(), v);
    };
    if let Some(v) = args.manifest {
        set("manifest", json!(v));
    }
    if let Some(v) = args.datasets {
        set("datasets", json!(v));
    }
    if let Some(v) = args.metrics {
        set("metrics", json!(v));
    }
    if let Some(v) = args.task {
        set("task", json!(v));
    }
    if let Some(v) = args.folds {
        set("folds", json!(v));
    }
    if let Some(v) = args.seed {
        set("seed", json!(v));
    }
    if let Some(v) = args.noise {
        set("noise", json!(v));
    }
    if let Some(v) = args.k_range {
        set("k_range", json!(parse_k_range(&v)?));
    }
    if let Some(v) = args.nu_grid {
        set("nu_grid", json!(v));
    }
    if let Some(v) = args.k_clusters {
        set("k_clusters", json!(v));
    }
    if let Some(v) = args.linkage {
        set("linkage", json!(v));
    }
    if let Some(v) = args.objective {
        set("objective", json!(v));
    }
    if let Some(v) = args.nu_selection {
        set("nu_selection", json!(v));
    }
    if let Some(v) = args.kmeans_update {
        set("kmeans_update", json!(v));
    }
    if let Some(v) = args.max_iter {
        set("max_iter", json!(v));
    }
    if let Some(v) = args.rank_mode {
        set("rank_mode", json!(v));
    }
    if let Some(v) = args.rank_convention {
        set("rank_convention", json!(v));
    }
    if let Some(v) = args.rank_decimals {
        set("rank_decimals", json!(v));
    }
    if let Some(v) = args.out_dir {
        set("out_dir", json!(v));
    }
    if let Some(t) = task {
        set("task", json!(t));
    }
    BenchConfig::from_json(&Value::Object(obj).to_string())
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let (args, task) = match cli.command {
        Command::Bench(a) => (a, None),
        Command::Knn(a) => (a, Some("knn")),
        Command::Kmeans(a) => (a, Some("kmeans")),
        Command::Agglo(a) => (a, Some("agglo")),
        Command::RankTable(a) => {
            let score: Objective = a.score.parse()?;
            let csv = rank_table_from_reports(&a.reports, score, a.decimals)?;
            match a.out {
                Some(p) => std::fs::write(p, csv)?,
                None => print!("{csv}"),
            }
            return Ok(ExitCode::SUCCESS);
        }
    };
    let config = build_config(args, task)?;
    let outcome = run_benchmark(&config)?;
    for r in &outcome.reports {
        match &r.error {
            None => eprintln!(
                "{:<12} {:<22} precision {:.4} recall {:.4} f1 {:.4}",
                r.dataset,
                r.spec.to_string(),
                r.precision,
                r.recall,
                r.f1
            ),
            Some(e) => eprintln!("{:<12} {:<22} FAILED: {e}", r.dataset, r.metric),
        }
    }
    for p in &outcome.written {
        eprintln!("wrote {}", p.display());
    }
    Ok(if outcome.success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
