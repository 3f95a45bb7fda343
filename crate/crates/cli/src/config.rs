use std::path::PathBuf;

use gini_core::agglomerative::Linkage;
use gini_core::eval::Objective;
use gini_core::kmeans::{default_nu_grid, UpdateRule, DEFAULT_MAX_ITER};
use gini_core::knn::{RankMode, DEFAULT_K_RANGE};
use gini_core::{Error, MetricSpec, RankConvention, Result};
use serde::{Deserialize, Serialize};

pub const OUT_DIR_ENV: &str = "GINI_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Knn,
    Kmeans,
    Agglo,
}

/// How a tuned generalized Gini picks ν in the clustering tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NuSelection {
    /// Best mean silhouette across folds, no labels used.
    #[default]
    Silhouette,
    /// Best cross-validated score under `objective`.
    Objective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub manifest: PathBuf,
    /// Subset of manifest datasets; empty means all of them.
    #[serde(default)]
    pub datasets: Vec<String>,
    /// Metric strings; a bare `gini-gen` has its ν tuned over `nu_grid`.
    pub metrics: Vec<String>,
    pub task: Task,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub noise: Option<f64>,
    #[serde(default = "default_k_range")]
    pub k_range: Vec<usize>,
    #[serde(default = "default_nu_grid")]
    pub nu_grid: Vec<f64>,
    /// Cluster count; the dataset's class count when absent.
    #[serde(default)]
    pub k_clusters: Option<usize>,
    #[serde(default)]
    pub linkage: Linkage,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub nu_selection: NuSelection,
    #[serde(default)]
    pub kmeans_update: UpdateRule,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub rank_mode: RankMode,
    #[serde(default)]
    pub rank_convention: RankConvention,
    /// Round scores to this many decimals before ranking.
    #[serde(default)]
    pub rank_decimals: Option<u32>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_folds() -> usize {
    5
}

fn default_seed() -> u64 {
    42
}

fn default_k_range() -> Vec<usize> {
    DEFAULT_K_RANGE.collect()
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("gini-out"))
}

/// A validated metric column of the benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricEntry {
    pub label: String,
    pub spec: MetricSpec,
    pub tune_nu: bool,
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))
    }

    /// Checks every knob and parses the metric list.
    pub fn validate(&self) -> Result<Vec<MetricEntry>> {
        if self.metrics.is_empty() {
            return Err(Error::Config("no metrics given".into()));
        }
        let mut entries: Vec<MetricEntry> = Vec::new();
        for raw in &self.metrics {
            let label = raw.trim().to_string();
            let spec: MetricSpec = label.parse()?;
            let spec = spec.validated()?;
            if entries.iter().any(|e| e.label == label) {
                return Err(Error::Config(format!("metric '{label}' listed twice")));
            }
            let tune_nu = label == "gini-gen";
            entries.push(MetricEntry {
                label,
                spec,
                tune_nu,
            });
        }
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        if let Some(level) = self.noise {
            if !(level > 0.0 && level < 1.0) {
                return Err(Error::Config(format!("noise level {level} outside (0, 1)")));
            }
        }
        if self.task == Task::Knn && (self.k_range.is_empty() || self.k_range.contains(&0)) {
            return Err(Error::Config(format!("bad k range {:?}", self.k_range)));
        }
        if entries.iter().any(|e| e.tune_nu) {
            if self.nu_grid.is_empty() {
                return Err(Error::Config("empty nu grid".into()));
            }
            for &nu in &self.nu_grid {
                MetricSpec::GeneralizedGini { nu }.validated()?;
            }
        }
        if self.k_clusters == Some(0) {
            return Err(Error::Config("k_clusters must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.task == Task::Agglo && self.linkage == Linkage::Ward {
            if let Some(e) = entries.iter().find(|e| e.spec != MetricSpec::Euclidean) {
                return Err(Error::Config(format!(
                    "ward linkage needs euclidean, got '{}'",
                    e.label
                )));
            }
        }
        Ok(entries)
    }
}
