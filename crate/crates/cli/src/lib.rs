//! Benchmark driver: runs the KNN, k-means and agglomerative protocols over
//! a dataset manifest and writes JSON reports and ranking tables.

pub mod bench;
pub mod config;

pub use bench::{rank_table_from_reports, run_benchmark, BenchOutcome};
pub use config::{BenchConfig, MetricEntry, NuSelection, Task, OUT_DIR_ENV};
