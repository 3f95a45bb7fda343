//! Lloyd k-means with k-means++ seeding over any [`MetricSpec`], and
//! silhouette-driven ν selection for the generalized Gini prametric.
//!
//! For the Gini kinds every point keeps the ranks it holds in the training
//! rows. Centroids are not data points, so each iteration they are ranked
//! against the training columns with [`SortedColumns::midpoint_rank`].

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataMatrix, FoldPlan};
use crate::error::{Error, Result};
use crate::eval::silhouette_score;
use crate::metrics::MetricSpec;
use crate::ranks::{build_rank_context, RankContext, SortedColumns};
use crate::rng::{derive_seed, seeded};

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-9;

/// How centroids move between assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// Every centroid becomes the mean of its members.
    #[default]
    Mean,
    /// Frozen-rank mode: point ranks stay fixed and a cluster takes its
    /// mean only when that does not raise the cluster's `Σ d²`, so the
    /// objective trace never increases.
    FrozenRank,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Absolute change in the objective that counts as converged.
    pub tol: f64,
    #[serde(default)]
    pub update: UpdateRule,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            update: UpdateRule::Mean,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: DataMatrix,
    pub spec: MetricSpec,
    /// Cluster of each training row after the last assignment.
    pub labels: Vec<usize>,
    pub iterations: usize,
    /// `Σ d(x, c)²` after the initial assignment and after every iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    reference: Option<SortedColumns>,
}

impl KMeansModel {
    /// Sorted training columns the centroids and queries are ranked against.
    pub fn reference(&self) -> Option<&SortedColumns> {
        self.reference.as_ref()
    }
}

/// Rows plus the rank weights the spec reads for them.
struct Ranked<'a> {
    rows: &'a DataMatrix,
    ctx: Option<RankContext>,
}

impl Ranked<'_> {
    fn weights(&self, spec: MetricSpec, i: usize) -> Result<&[f64]> {
        match &self.ctx {
            Some(c) => spec.rank_weights(c, i),
            None => Ok(&[]),
        }
    }

    fn dist(&self, spec: MetricSpec, i: usize, other: &Ranked, k: usize) -> Result<f64> {
        spec.dissimilarity(
            self.rows.row(i),
            self.weights(spec, i)?,
            other.rows.row(k),
            other.weights(spec, k)?,
        )
    }
}

fn centroid_ranks<'a>(
    centroids: &'a DataMatrix,
    reference: &Option<SortedColumns>,
    spec: MetricSpec,
) -> Result<Ranked<'a>> {
    let ctx = match reference {
        Some(sorted) => {
            let pts: Vec<&[f64]> = (0..centroids.rows()).map(|c| centroids.row(c)).collect();
            Some(sorted.midpoint_context(&pts, spec.rank_nu())?)
        }
        None => None,
    };
    Ok(Ranked {
        rows: centroids,
        ctx,
    })
}

/// Nearest centroid (lowest index on ties) and its dissimilarity, per row.
fn assign(points: &Ranked, centroids: &Ranked, spec: MetricSpec) -> Result<Vec<(usize, f64)>> {
    (0..points.rows.rows())
        .into_par_iter()
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for c in 0..centroids.rows.rows() {
                let d = points.dist(spec, i, centroids, c)?;
                if d < best.1 {
                    best = (c, d);
                }
            }
            if !best.1.is_finite() {
                return Err(Error::domain(format!(
                    "row {i} has no finite dissimilarity to any centroid"
                )));
            }
            Ok(best)
        })
        .collect()
}

fn check_k(rows: usize, k: usize) -> Result<()> {
    if k == 0 || k > rows {
        return Err(Error::config(format!("k = {k} outside [1, {rows}]")));
    }
    Ok(())
}

/// k-means++ seeding: a uniform first centroid, then each next row drawn
/// with probability proportional to its squared dissimilarity to the
/// nearest chosen one. When every remaining row sits at zero, the draw is
/// uniform over rows not yet chosen.
pub fn kmeanspp_init(
    data: &DataMatrix,
    k: usize,
    spec: MetricSpec,
    seed: u64,
) -> Result<DataMatrix> {
    check_k(data.rows(), k)?;
    let spec = spec.validated()?;
    let n = data.rows();
    let pts = Ranked {
        rows: data,
        ctx: match spec.rank_nu() {
            Some(nu) => Some(build_rank_context(data, Some(nu))?),
            None => None,
        },
    };
    let mut rng = seeded(seed);
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut nearest: Vec<f64> = vec![f64::INFINITY; n];
    while chosen.len() < k {
        let last = *chosen.last().unwrap();
        let d: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| pts.dist(spec, i, &pts, last))
            .collect::<Result<_>>()?;
        for (m, di) in nearest.iter_mut().zip(d) {
            *m = m.min(di * di);
        }
        let weights: Vec<f64> = (0..n)
            .map(|i| if chosen.contains(&i) { 0.0 } else { nearest[i] })
            .collect();
        let next = match WeightedIndex::new(&weights) {
            Ok(w) => w.sample(&mut rng),
            Err(_) => {
                let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
                free[rng.gen_range(0..free.len())]
            }
        };
        chosen.push(next);
    }
    let mut out = data.select_rows(&chosen);
    out.clear_labels();
    Ok(out)
}

/// Lloyd iterations from `init`. One iteration recomputes every centroid as
/// the mean of its members, re-ranks the centroids, and reassigns. Stops
/// when no assignment changes, the objective moves by at most `tol`, or
/// after `max_iter` iterations. An empty cluster takes the row farthest
/// from its current centroid.
pub fn kmeans_fit(
    data: &DataMatrix,
    k: usize,
    spec: MetricSpec,
    init: &DataMatrix,
    opts: KMeansOptions,
) -> Result<KMeansModel> {
    check_k(data.rows(), k)?;
    let spec = spec.validated()?;
    if init.rows() != k || init.cols() != data.cols() {
        return Err(Error::config(format!(
            "initial centroids are {}x{}, expected {k}x{}",
            init.rows(),
            init.cols(),
            data.cols()
        )));
    }
    if opts.max_iter == 0 {
        return Err(Error::config("max_iter must be at least 1"));
    }
    if data.values().iter().any(|v| v.is_nan()) {
        return Err(Error::domain("data contains NaN"));
    }
    let reference = spec.rank_nu().map(|_| SortedColumns::new(data));
    let pts = Ranked {
        rows: data,
        ctx: match spec.rank_nu() {
            Some(nu) => Some(build_rank_context(data, Some(nu))?),
            None => None,
        },
    };
    let mut centroids = init.clone();
    centroids.clear_labels();
    let mut assigned = assign(&pts, &centroid_ranks(&centroids, &reference, spec)?, spec)?;
    let objective = |a: &[(usize, f64)]| a.iter().map(|(_, d)| d * d).sum::<f64>();
    let mut trace = vec![objective(&assigned)];
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=opts.max_iter {
        let means = update_centroids(data, &assigned, k)?;
        centroids = match opts.update {
            UpdateRule::Mean => means,
            UpdateRule::FrozenRank => {
                guarded_update(&pts, &assigned, &centroids, means, &reference, spec)?
            }
        };
        let next = assign(&pts, &centroid_ranks(&centroids, &reference, spec)?, spec)?;
        let obj = objective(&next);
        let unchanged = next.iter().zip(&assigned).all(|(a, b)| a.0 == b.0);
        let flat = (obj - trace.last().unwrap()).abs() <= opts.tol;
        trace.push(obj);
        iterations = it;
        assigned = next;
        if unchanged || flat {
            converged = true;
            break;
        }
    }
    Ok(KMeansModel {
        k,
        centroids,
        spec,
        labels: assigned.iter().map(|a| a.0).collect(),
        iterations,
        objective_trace: trace,
        converged,
        reference,
    })
}

fn update_centroids(data: &DataMatrix, assigned: &[(usize, f64)], k: usize) -> Result<DataMatrix> {
    let d = data.cols();
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (i, &(c, _)) in assigned.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(data.row(i)) {
            *s += v;
        }
    }
    // rows sorted farthest first (index breaks ties) feed empty clusters
    let mut donors: Vec<usize> = (0..assigned.len()).collect();
    donors.sort_by(|&a, &b| assigned[b].1.total_cmp(&assigned[a].1).then(a.cmp(&b)));
    let mut donors = donors.into_iter();
    for c in 0..k {
        if counts[c] == 0 {
            let i = donors
                .next()
                .ok_or_else(|| Error::domain("no row left to reseed an empty cluster"))?;
            sums[c * d..(c + 1) * d].copy_from_slice(data.row(i));
            counts[c] = 1;
        } else {
            let n = counts[c] as f64;
            for s in &mut sums[c * d..(c + 1) * d] {
                *s /= n;
            }
        }
    }
    DataMatrix::new(k, d, sums)
}

/// Per cluster, keeps the old centroid unless the candidate's `Σ d²` over
/// the current members is no larger.
fn guarded_update(
    pts: &Ranked,
    assigned: &[(usize, f64)],
    old: &DataMatrix,
    candidate: DataMatrix,
    reference: &Option<SortedColumns>,
    spec: MetricSpec,
) -> Result<DataMatrix> {
    let k = old.rows();
    let cand = centroid_ranks(&candidate, reference, spec)?;
    let mut cost_old = vec![0.0; k];
    let mut cost_new = vec![0.0; k];
    for (i, &(c, d_old)) in assigned.iter().enumerate() {
        let d_new = pts.dist(spec, i, &cand, c)?;
        cost_old[c] += d_old * d_old;
        cost_new[c] += d_new * d_new;
    }
    let d = old.cols();
    let mut values = Vec::with_capacity(k * d);
    for c in 0..k {
        let members = assigned.iter().any(|a| a.0 == c);
        let take = !members || cost_new[c] <= cost_old[c];
        values.extend_from_slice(if take { candidate.row(c) } else { old.row(c) });
    }
    DataMatrix::new(k, d, values)
}

/// Nearest centroid for each test row, lowest index on ties. Gini kinds
/// rank test rows and centroids against the training columns.
pub fn kmeans_predict(model: &KMeansModel, test: &DataMatrix) -> Result<Vec<usize>> {
    if test.cols() != model.centroids.cols() {
        return Err(Error::domain(format!(
            "model has {} columns, test has {}",
            model.centroids.cols(),
            test.cols()
        )));
    }
    let spec = model.spec;
    let pts = centroid_ranks(test, &model.reference, spec)?;
    let cents = centroid_ranks(&model.centroids, &model.reference, spec)?;
    Ok(assign(&pts, &cents, spec)?
        .into_iter()
        .map(|a| a.0)
        .collect())
}

/// `0.1, 0.2, …, 6.0` without 1.0: 59 values.
pub fn default_nu_grid() -> Vec<f64> {
    (1..=60)
        .filter(|&i| i != 10)
        .map(|i| i as f64 / 10.0)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuSelection {
    pub nu: f64,
    pub score: f64,
    /// Fold-mean silhouette per grid value, in grid order.
    pub scores: Vec<(f64, f64)>,
}

/// Silhouette-driven choice of ν for the generalized Gini k-means. For each
/// ν and fold: fit on the fold's training rows, label its held-out rows,
/// and score the silhouette of those rows under their predicted labels. A
/// held-out set that lands in one cluster scores −1. Returns the ν with
/// the best fold mean, ties to the smaller ν. Initial centroids come from
/// Euclidean k-means++ per fold and are shared by every ν.
pub fn select_nu_silhouette(
    train: &DataMatrix,
    k: usize,
    nu_grid: &[f64],
    n_folds: usize,
    seed: u64,
) -> Result<NuSelection> {
    if nu_grid.is_empty() {
        return Err(Error::config("empty nu grid"));
    }
    for &nu in nu_grid {
        MetricSpec::GeneralizedGini { nu }.validated()?;
    }
    let plan = FoldPlan::new(train.rows(), n_folds, seed)?;
    let folds: Vec<(DataMatrix, DataMatrix, DataMatrix)> = (0..n_folds)
        .map(|f| {
            let (tr, te) = plan.split(f);
            let fit_rows = train.select_rows(&tr);
            let init = kmeanspp_init(
                &fit_rows,
                k,
                MetricSpec::Euclidean,
                derive_seed(seed, &["silhouette-init", &f.to_string()]),
            )?;
            Ok((fit_rows, train.select_rows(&te), init))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..nu_grid.len())
        .flat_map(|v| (0..n_folds).map(move |f| (v, f)))
        .collect();
    let per_job: Vec<f64> = jobs
        .par_iter()
        .map(|&(v, f)| {
            let spec = MetricSpec::GeneralizedGini { nu: nu_grid[v] };
            let (fit_rows, held_out, init) = &folds[f];
            let model = kmeans_fit(fit_rows, k, spec, init, KMeansOptions::default())?;
            let labels = kmeans_predict(&model, held_out)?;
            let distinct = {
                let mut l = labels.clone();
                l.sort_unstable();
                l.dedup();
                l.len()
            };
            if distinct < 2 {
                Ok(-1.0)
            } else {
                silhouette_score(held_out, &labels, spec)
            }
        })
        .collect::<Result<_>>()?;
    let scores: Vec<(f64, f64)> = nu_grid
        .iter()
        .enumerate()
        .map(|(v, &nu)| {
            let s = per_job[v * n_folds..(v + 1) * n_folds].iter().sum::<f64>() / n_folds as f64;
            (nu, s)
        })
        .collect();
    let mut best = scores[0];
    for &(nu, s) in &scores[1..] {
        if s > best.1 || (s == best.1 && nu < best.0) {
            best = (nu, s);
        }
    }
    Ok(NuSelection {
        nu: best.0,
        score: best.1,
        scores,
    })
}
