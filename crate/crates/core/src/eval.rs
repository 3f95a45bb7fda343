//! Scoring and statistics: cluster-to-class alignment, macro scores,
//! silhouette, Wilcoxon signed-rank test, and ranking tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::metrics::MetricSpec;
use crate::ranks::ascending_ranks;

// ---------------------------------------------------------------- alignment

/// Minimum-cost perfect assignment on a square integer matrix (rows to
/// columns), shortest augmenting path with potentials. Returns the column
/// chosen for each row and the total cost.
fn min_cost_assignment(cost: &[Vec<i64>]) -> (Vec<usize>, i64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0);
    }
    const INF: i64 = i64::MAX / 4;
    // 1-based internals; p[j] = row matched to column j
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost[i][assign[i]]).sum();
    (assign, total)
}

fn sub_problem(cost: &[Vec<i64>], rows: &[usize], cols: &[usize]) -> i64 {
    let m: Vec<Vec<i64>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| cost[r][c]).collect())
        .collect();
    min_cost_assignment(&m).1
}

/// Contingency counts `counts[pred][truth]`.
pub fn confusion_counts(pred: &[usize], truth: &[usize], k: usize) -> Result<Vec<Vec<i64>>> {
    if pred.len() != truth.len() {
        return Err(Error::domain(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut counts = vec![vec![0i64; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::domain(format!(
                "label {} outside [0, {k})",
                p.max(t)
            )));
        }
        counts[p][t] += 1;
    }
    Ok(counts)
}

/// Permutation `perm` of `0..k` maximizing `Σ_i [perm[pred_i] == truth_i]`.
/// Among optimal permutations the lexicographically smallest is returned.
pub fn hungarian_align(pred: &[usize], truth: &[usize], k: usize) -> Result<Vec<usize>> {
    let counts = confusion_counts(pred, truth, k)?;
    let cost: Vec<Vec<i64>> = counts
        .iter()
        .map(|r| r.iter().map(|c| -c).collect())
        .collect();
    Ok(lexicographic_optimum(&cost))
}

/// Fixes rows one at a time to the smallest column that still admits an
/// optimal completion.
fn lexicographic_optimum(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    let mut remaining_cols: Vec<usize> = (0..n).collect();
    let mut fixed_cost = 0i64;
    let optimum = min_cost_assignment(cost).1;
    let mut perm = Vec::with_capacity(n);
    for r in 0..n {
        let rest_rows: Vec<usize> = (r + 1..n).collect();
        let mut chosen = None;
        for (pos, &c) in remaining_cols.iter().enumerate() {
            let cols: Vec<usize> = remaining_cols.iter().copied().filter(|&x| x != c).collect();
            let total = fixed_cost + cost[r][c] + sub_problem(cost, &rest_rows, &cols);
            if total == optimum {
                chosen = Some(pos);
                break;
            }
        }
        let pos = chosen.expect("an optimal completion always exists");
        let c = remaining_cols.remove(pos);
        fixed_cost += cost[r][c];
        perm.push(c);
    }
    perm
}

/// Applies an alignment permutation to cluster ids.
pub fn apply_alignment(pred: &[usize], perm: &[usize]) -> Vec<usize> {
    pred.iter().map(|&p| perm[p]).collect()
}

// ----------------------------------------------------------- classification

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Which score a search or ranking optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    #[serde(rename = "macro_f1")]
    MacroF1,
    Precision,
    Recall,
}

impl Objective {
    pub fn pick(&self, s: &Scores) -> f64 {
        match self {
            Objective::MacroF1 => s.f1,
            Objective::Precision => s.precision,
            Objective::Recall => s.recall,
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "macro_f1" | "f1" => Ok(Objective::MacroF1),
            "precision" => Ok(Objective::Precision),
            "recall" => Ok(Objective::Recall),
            _ => Err(Error::config(format!("unknown objective '{s}'"))),
        }
    }
}

/// Macro-averaged precision, recall and F1 over the classes that occur in
/// either vector. Per-class ratios with a zero denominator count as 0; F1
/// is computed per class and then averaged.
pub fn classification_report(pred: &[usize], truth: &[usize]) -> Result<Scores> {
    if pred.is_empty() {
        return Err(Error::domain("empty label vectors"));
    }
    if pred.len() != truth.len() {
        return Err(Error::domain(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    // class -> (tp, fp, fn)
    let mut tally: BTreeMap<usize, (f64, f64, f64)> = BTreeMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tally.entry(p).or_default().0 += 1.0;
        } else {
            tally.entry(p).or_default().1 += 1.0;
            tally.entry(t).or_default().2 += 1.0;
        }
    }
    let ratio = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let m = tally.len() as f64;
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for &(tp, fp, fneg) in tally.values() {
        let p = ratio(tp, tp + fp);
        let r = ratio(tp, tp + fneg);
        p_sum += p;
        r_sum += r;
        f_sum += ratio(2.0 * p * r, p + r);
    }
    Ok(Scores {
        precision: p_sum / m,
        recall: r_sum / m,
        f1: f_sum / m,
    })
}

// --------------------------------------------------------------- silhouette

/// Mean silhouette `(b − a) / max(a, b)` under `spec`. For Gini kinds the
/// ranks are taken over `data` itself. Points in singleton clusters score 0,
/// as do points with `a = b = 0`.
pub fn silhouette_score(data: &DataMatrix, labels: &[usize], spec: MetricSpec) -> Result<f64> {
    if labels.len() != data.rows() {
        return Err(Error::domain(format!(
            "{} labels for {} rows",
            labels.len(),
            data.rows()
        )));
    }
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::domain("silhouette needs at least two clusters"));
    }
    let cluster_of: Vec<usize> = labels
        .iter()
        .map(|l| ids.binary_search(l).expect("label collected above"))
        .collect();
    let mut sizes = vec![0usize; ids.len()];
    for &c in &cluster_of {
        sizes[c] += 1;
    }
    let dist = crate::metrics::pairwise(data, spec)?;
    let n = data.rows();
    let mut total = 0.0;
    for i in 0..n {
        let own = cluster_of[i];
        if sizes[own] == 1 {
            continue;
        }
        let mut sums = vec![0.0; ids.len()];
        for j in 0..n {
            if j != i {
                sums[cluster_of[j]] += dist[i * n + j];
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..ids.len())
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

// ----------------------------------------------------------------- wilcoxon

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WilcoxonMode {
    /// Exact null distribution up to 20 non-zero pairs, normal beyond.
    #[default]
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W−)`.
    pub statistic: f64,
    pub p_value: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub exact: bool,
}

pub const WILCOXON_EXACT_MAX_N: usize = 20;

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(a, b, WilcoxonMode::Auto)
}

/// Two-sided signed-rank test on the paired differences `a − b`. Zero
/// differences are dropped; tied magnitudes get average ranks. The exact
/// mode enumerates the null distribution of the tied ranks; the normal mode
/// uses the tie-corrected variance and a 0.5 continuity correction.
pub fn wilcoxon_signed_rank_with(
    a: &[f64],
    b: &[f64],
    mode: WilcoxonMode,
) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "{} vs {} paired values",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(Error::domain("all paired differences are zero"));
    }
    let n = diffs.len();
    if n < 5 {
        return Err(Error::domain(format!(
            "need at least 5 non-zero differences, got {n}"
        )));
    }
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = ascending_ranks(&mags)?;
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let stat = w_plus.min(total - w_plus);
    let exact = match mode {
        WilcoxonMode::Exact => true,
        WilcoxonMode::Normal => false,
        WilcoxonMode::Auto => n <= WILCOXON_EXACT_MAX_N,
    };
    let p = if exact {
        2.0 * exact_lower_tail(&ranks, stat)
    } else {
        normal_p(&ranks, stat)
    };
    Ok(WilcoxonResult {
        statistic: stat,
        p_value: p.min(1.0),
        n,
        exact,
    })
}

/// `P(W+ ≤ stat)` under the null, all `2^n` sign patterns equally likely.
/// Average ranks are multiples of 1/2, so the DP runs on doubled ranks.
fn exact_lower_tail(ranks: &[f64], stat: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let limit = (stat * 2.0).round() as usize;
    let hits: f64 = counts[..=limit.min(max)].iter().sum();
    hits / 2f64.powi(ranks.len() as i32)
}

fn normal_p(ranks: &[f64], stat: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((stat - mean).abs() - 0.5).max(0.0) / var.sqrt();
    libm::erfc(z / std::f64::consts::SQRT_2)
}

// ------------------------------------------------------------------ reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nu: Option<f64>,
}

/// Scores of one (dataset, metric) cell across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    /// Row label in ranking tables, e.g. `gini-gen` for a tuned ν.
    pub metric: String,
    /// Resolved dissimilarity actually used.
    pub spec: MetricSpec,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_fold: Vec<FoldScore>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<f64>,
    pub params: Params,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl EvalReport {
    /// Aggregates are the plain means of the per-fold entries.
    pub fn from_folds(
        dataset: impl Into<String>,
        metric: impl Into<String>,
        spec: MetricSpec,
        per_fold: Vec<FoldScore>,
        params: Params,
    ) -> Self {
        let n = per_fold.len().max(1) as f64;
        let mean = |f: fn(&FoldScore) -> f64| per_fold.iter().map(f).sum::<f64>() / n;
        let iters: Vec<usize> = per_fold.iter().filter_map(|f| f.iterations).collect();
        let iterations = if iters.is_empty() {
            None
        } else {
            Some(iters.iter().sum::<usize>() as f64 / iters.len() as f64)
        };
        Self {
            dataset: dataset.into(),
            metric: metric.into(),
            spec,
            precision: mean(|f| f.precision),
            recall: mean(|f| f.recall),
            f1: mean(|f| f.f1),
            per_fold,
            iterations,
            params,
            error: None,
        }
    }

    pub fn failed(
        dataset: impl Into<String>,
        metric: impl Into<String>,
        spec: MetricSpec,
        error: String,
    ) -> Self {
        Self {
            dataset: dataset.into(),
            metric: metric.into(),
            spec,
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            per_fold: Vec::new(),
            iterations: None,
            params: Params::default(),
            error: Some(error),
        }
    }

    pub fn score(&self, objective: Objective) -> f64 {
        objective.pick(&Scores {
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        })
    }
}

/// Metrics × datasets competition ranks plus the mean rank per metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub score: Objective,
    pub metrics: Vec<String>,
    pub datasets: Vec<String>,
    /// `ranks[m][d]`
    pub ranks: Vec<Vec<usize>>,
    pub mean_rank: Vec<f64>,
}

/// Competition ranks, higher score first: tied entries share the best rank
/// and the following rank skips (0.9, 0.9, 0.8 → 1, 1, 3).
pub fn competition_ranks(scores: &[f64]) -> Vec<usize> {
    scores
        .iter()
        .map(|s| 1 + scores.iter().filter(|o| *o > s).count())
        .collect()
}

/// Ranks every metric on every dataset by `score`. Datasets and metrics
/// appear in first-seen order. With `decimals`, scores are rounded before
/// ties are detected. Every metric must have a report for every dataset.
pub fn rank_table(
    reports: &[EvalReport],
    score: Objective,
    decimals: Option<u32>,
) -> Result<RankTable> {
    let mut datasets: Vec<String> = Vec::new();
    let mut metrics: Vec<String> = Vec::new();
    for r in reports {
        if !datasets.contains(&r.dataset) {
            datasets.push(r.dataset.clone());
        }
        if !metrics.contains(&r.metric) {
            metrics.push(r.metric.clone());
        }
    }
    let round = |v: f64| match decimals {
        Some(d) => {
            let f = 10f64.powi(d as i32);
            (v * f).round() / f
        }
        None => v,
    };
    let mut ranks = vec![vec![0usize; datasets.len()]; metrics.len()];
    for (di, ds) in datasets.iter().enumerate() {
        let mut col = Vec::with_capacity(metrics.len());
        for m in &metrics {
            let cell = reports
                .iter()
                .find(|r| &r.dataset == ds && &r.metric == m && r.error.is_none())
                .ok_or_else(|| {
                    Error::config(format!("no score for metric '{m}' on dataset '{ds}'"))
                })?;
            col.push(round(cell.score(score)));
        }
        for (mi, r) in competition_ranks(&col).into_iter().enumerate() {
            ranks[mi][di] = r;
        }
    }
    let mean_rank = ranks
        .iter()
        .map(|row| row.iter().sum::<usize>() as f64 / row.len().max(1) as f64)
        .collect();
    Ok(RankTable {
        score,
        metrics,
        datasets,
        ranks,
        mean_rank,
    })
}

impl RankTable {
    /// One row per metric, one column per dataset, then the mean rank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Distance");
        for d in &self.datasets {
            out.push(',');
            out.push_str(d);
        }
        out.push_str(",Rank\n");
        for ((m, row), mean) in self.metrics.iter().zip(&self.ranks).zip(&self.mean_rank) {
            out.push_str(m);
            for r in row {
                out.push_str(&format!(",{r}"));
            }
            out.push_str(&format!(",{mean:.2}\n"));
        }
        out
    }
}
