//! K-nearest-neighbors classification over any [`MetricSpec`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataMatrix, FoldPlan};
use crate::error::{Error, Result};
use crate::eval::{classification_report, FoldScore, Objective, Scores};
use crate::metrics::MetricSpec;
use crate::ranks::{build_rank_context, pooled_ranks, RankContext, RankConvention};

pub const DEFAULT_K_RANGE: std::ops::RangeInclusive<usize> = 1..=11;

/// How query points get ranks for the Gini kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMode {
    /// Training and query rows are ranked together, once per predict call.
    #[default]
    Transductive,
    /// Each query is ranked as if it alone joined the training rows.
    Inductive,
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    train: DataMatrix,
    labels: Vec<usize>,
    spec: MetricSpec,
    k: usize,
    ctx: Option<RankContext>,
    mode: RankMode,
    convention: RankConvention,
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn spec(&self) -> MetricSpec {
        self.spec
    }

    pub fn train(&self) -> &DataMatrix {
        &self.train
    }

    /// Ranks of the training rows among themselves; `None` for zoo members.
    pub fn ctx(&self) -> Option<&RankContext> {
        self.ctx.as_ref()
    }

    pub fn mode(&self) -> RankMode {
        self.mode
    }
}

pub fn knn_fit(train: &DataMatrix, spec: MetricSpec, k: usize) -> Result<KnnModel> {
    knn_fit_with(
        train,
        spec,
        k,
        RankMode::default(),
        RankConvention::default(),
    )
}

pub fn knn_fit_with(
    train: &DataMatrix,
    spec: MetricSpec,
    k: usize,
    mode: RankMode,
    convention: RankConvention,
) -> Result<KnnModel> {
    let spec = spec.validated()?;
    let labels = train
        .labels()
        .ok_or_else(|| Error::config("knn training data has no labels"))?
        .to_vec();
    if k == 0 || k > train.rows() {
        return Err(Error::config(format!(
            "k = {k} outside [1, {}]",
            train.rows()
        )));
    }
    let ctx = match spec.rank_nu() {
        Some(nu) => Some(build_rank_context(train, Some(nu))?),
        None => None,
    };
    Ok(KnnModel {
        train: train.clone(),
        labels,
        spec,
        k,
        ctx,
        mode,
        convention,
    })
}

pub fn knn_predict(model: &KnnModel, test: &DataMatrix) -> Result<Vec<usize>> {
    let order = neighbor_order(
        &model.train,
        test,
        model.spec,
        model.k,
        model.mode,
        model.convention,
    )?;
    Ok(order
        .iter()
        .map(|nb| vote(nb, &model.labels, model.k))
        .collect())
}

/// For each test row, the `max_k` nearest training rows ordered by
/// (dissimilarity, training index).
pub fn neighbor_order(
    train: &DataMatrix,
    test: &DataMatrix,
    spec: MetricSpec,
    max_k: usize,
    mode: RankMode,
    convention: RankConvention,
) -> Result<Vec<Vec<usize>>> {
    if train.cols() != test.cols() {
        return Err(Error::domain(format!(
            "train has {} columns, test has {}",
            train.cols(),
            test.cols()
        )));
    }
    let max_k = max_k.min(train.rows());
    let n_tr = train.rows();
    let rank_nu = spec.rank_nu();
    let pooled = match (rank_nu, mode) {
        (Some(nu), RankMode::Transductive) => {
            Some(pooled_ranks(train, test, Some(nu), convention)?)
        }
        _ => None,
    };
    let train_ctx = match (rank_nu, mode) {
        (Some(nu), RankMode::Inductive) => Some(build_rank_context(train, Some(nu))?),
        _ => None,
    };
    (0..test.rows())
        .into_par_iter()
        .map(|q| {
            let x = test.row(q);
            let mut dist: Vec<(f64, usize)> = match (&pooled, &train_ctx) {
                (Some(ctx), _) => {
                    let rq = spec.rank_weights(ctx, n_tr + q)?;
                    (0..n_tr)
                        .map(|i| {
                            Ok((
                                spec.dissimilarity(
                                    x,
                                    rq,
                                    train.row(i),
                                    spec.rank_weights(ctx, i)?,
                                )?,
                                i,
                            ))
                        })
                        .collect::<Result<_>>()?
                }
                (None, Some(ctx)) => inductive_distances(train, ctx, x, spec)?,
                (None, None) => (0..n_tr)
                    .map(|i| Ok((spec.dissimilarity(x, &[], train.row(i), &[])?, i)))
                    .collect::<Result<_>>()?,
            };
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            Ok(dist.into_iter().take(max_k).map(|(_, i)| i).collect())
        })
        .collect()
}

/// Distances from `x` to every training row with ranks taken in the pool
/// `train ∪ {x}`. Training ranks shift by 1 where `x` is smaller and by 1/2
/// where it ties.
fn inductive_distances(
    train: &DataMatrix,
    ctx: &RankContext,
    x: &[f64],
    spec: MetricSpec,
) -> Result<Vec<(f64, usize)>> {
    let n = train.rows();
    let d = train.cols();
    let n1 = (n + 2) as f64;
    let mut rx = vec![0.0; d];
    for (j, r) in rx.iter_mut().enumerate() {
        let (mut less, mut equal) = (0usize, 0usize);
        for i in 0..n {
            let v = train.get(i, j);
            if v < x[j] {
                less += 1;
            } else if v == x[j] {
                equal += 1;
            }
        }
        *r = less as f64 + 1.0 + equal as f64 / 2.0;
    }
    let weight = |asc: f64| -> f64 {
        match spec {
            MetricSpec::GeneralizedGini { nu } => (n1 - asc).powf(nu - 1.0),
            _ => asc,
        }
    };
    let wx: Vec<f64> = rx.iter().map(|&r| weight(r)).collect();
    let mut wi = vec![0.0; d];
    (0..n)
        .map(|i| {
            let row = train.row(i);
            let base = ctx.asc_row(i);
            for j in 0..d {
                let shift = if x[j] < row[j] {
                    1.0
                } else if x[j] == row[j] {
                    0.5
                } else {
                    0.0
                };
                wi[j] = weight(base[j] + shift);
            }
            Ok((spec.dissimilarity(x, &wx, row, &wi)?, i))
        })
        .collect()
}

/// Majority class among the first `k` neighbors; a tie goes to the tied
/// class that appears first in neighbor order.
fn vote(neighbors: &[usize], labels: &[usize], k: usize) -> usize {
    let top = &neighbors[..k.min(neighbors.len())];
    let n_classes = top.iter().map(|&i| labels[i]).max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; n_classes];
    for &i in top {
        counts[labels[i]] += 1;
    }
    let best = counts.iter().copied().max().unwrap_or(0);
    top.iter()
        .map(|&i| labels[i])
        .find(|&c| counts[c] == best)
        .expect("at least one neighbor")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub k: usize,
    pub nu: Option<f64>,
    pub mean: Scores,
    pub per_fold: Vec<FoldScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub best_k: usize,
    pub best_nu: Option<f64>,
    pub best_score: f64,
    pub objective: Objective,
    pub cells: Vec<GridCell>,
}

impl GridSearch {
    pub fn best_cell(&self) -> &GridCell {
        self.cells
            .iter()
            .find(|c| c.k == self.best_k && c.nu == self.best_nu)
            .expect("winner is one of the cells")
    }
}

/// Cross-validated search over `k_range × nu_grid`. `nu_grid` is used only
/// for the generalized Gini; other specs evaluate their own ν (if any).
/// The winner maximizes the fold-mean objective, ties going to the smaller
/// k and then the smaller ν.
pub fn knn_grid_search(
    data: &DataMatrix,
    family: MetricSpec,
    k_range: &[usize],
    nu_grid: &[f64],
    folds: &FoldPlan,
    objective: Objective,
) -> Result<GridSearch> {
    knn_grid_search_with(
        data,
        family,
        k_range,
        nu_grid,
        folds,
        objective,
        RankMode::default(),
        RankConvention::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn knn_grid_search_with(
    data: &DataMatrix,
    family: MetricSpec,
    k_range: &[usize],
    nu_grid: &[f64],
    folds: &FoldPlan,
    objective: Objective,
    mode: RankMode,
    convention: RankConvention,
) -> Result<GridSearch> {
    if k_range.is_empty() {
        return Err(Error::config("empty k range"));
    }
    let labels = data
        .labels()
        .ok_or_else(|| Error::config("knn data has no labels"))?;
    if folds.assignments.len() != data.rows() {
        return Err(Error::config(format!(
            "fold plan covers {} rows, data has {}",
            folds.assignments.len(),
            data.rows()
        )));
    }
    let specs: Vec<MetricSpec> = match family {
        MetricSpec::GeneralizedGini { .. } => {
            if nu_grid.is_empty() {
                return Err(Error::config("empty nu grid"));
            }
            nu_grid
                .iter()
                .map(|&nu| family.with_nu(nu))
                .collect::<Result<_>>()?
        }
        other => vec![other.validated()?],
    };
    let mut ks: Vec<usize> = k_range.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks[0] == 0 {
        return Err(Error::config("k must be at least 1"));
    }
    let max_k = *ks.last().unwrap();

    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|s| (0..folds.n_folds).map(move |f| (s, f)))
        .collect();
    // per (spec, fold): one score per k
    let fold_scores: Vec<Vec<Scores>> = jobs
        .par_iter()
        .map(|&(s, f)| {
            let (tr, te) = folds.split(f);
            let train = data.select_rows(&tr);
            let test = data.select_rows(&te);
            if max_k > train.rows() {
                return Err(Error::config(format!(
                    "k = {max_k} exceeds the {} training rows of fold {f}",
                    train.rows()
                )));
            }
            let order = neighbor_order(&train, &test, specs[s], max_k, mode, convention)?;
            let tr_labels: Vec<usize> = tr.iter().map(|&i| labels[i]).collect();
            let truth: Vec<usize> = te.iter().map(|&i| labels[i]).collect();
            ks.iter()
                .map(|&k| {
                    let pred: Vec<usize> = order.iter().map(|nb| vote(nb, &tr_labels, k)).collect();
                    classification_report(&pred, &truth)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(specs.len() * ks.len());
    for (ki, &k) in ks.iter().enumerate() {
        for (s, spec) in specs.iter().enumerate() {
            let per_fold: Vec<FoldScore> = (0..folds.n_folds)
                .map(|f| {
                    let sc = fold_scores[s * folds.n_folds + f][ki];
                    FoldScore {
                        fold: f,
                        precision: sc.precision,
                        recall: sc.recall,
                        f1: sc.f1,
                        iterations: None,
                    }
                })
                .collect();
            let m = per_fold.len() as f64;
            let mean = Scores {
                precision: per_fold.iter().map(|f| f.precision).sum::<f64>() / m,
                recall: per_fold.iter().map(|f| f.recall).sum::<f64>() / m,
                f1: per_fold.iter().map(|f| f.f1).sum::<f64>() / m,
            };
            let nu = match spec {
                MetricSpec::GeneralizedGini { nu } => Some(*nu),
                _ => None,
            };
            cells.push(GridCell {
                k,
                nu,
                mean,
                per_fold,
            });
        }
    }
    let mut best: Option<&GridCell> = None;
    for c in &cells {
        let better = match best {
            None => true,
            Some(b) => {
                let (sc, sb) = (objective.pick(&c.mean), objective.pick(&b.mean));
                sc > sb || (sc == sb && (c.k, c.nu.unwrap_or(0.0)) < (b.k, b.nu.unwrap_or(0.0)))
            }
        };
        if better {
            best = Some(c);
        }
    }
    let best = best.expect("grid is non-empty");
    Ok(GridSearch {
        best_k: best.k,
        best_nu: best.nu,
        best_score: objective.pick(&best.mean),
        objective,
        cells,
    })
}
