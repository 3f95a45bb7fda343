//! Independent brute-force references shared by the integration tests.
#![allow(dead_code)]

use gini_core::MetricSpec;

pub fn rank_of(col: &[f64], v: f64) -> f64 {
    let less = col.iter().filter(|&&c| c < v).count() as f64;
    let equal = col.iter().filter(|&&c| c == v).count() as f64;
    less + (equal + 1.0) / 2.0
}

pub fn oracle_distance(spec: MetricSpec, x: &[f64], y: &[f64], rx: &[f64], ry: &[f64]) -> f64 {
    let pairs = x.iter().zip(y);
    match spec {
        MetricSpec::Euclidean => pairs.map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
        MetricSpec::Manhattan => pairs.map(|(a, b)| (a - b).abs()).sum(),
        MetricSpec::Minkowski { p } => pairs
            .map(|(a, b)| (a - b).abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p),
        MetricSpec::Cosine => {
            let dot: f64 = pairs.map(|(a, b)| a * b).sum();
            let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            (1.0 - dot / (nx * ny)).max(0.0)
        }
        MetricSpec::Lorentzian => pairs.map(|(a, b)| (1.0 + (a - b).abs()).ln()).sum(),
        MetricSpec::Canberra => pairs
            .map(|(a, b)| {
                let den = a.abs() + b.abs();
                if den == 0.0 {
                    0.0
                } else {
                    (a - b).abs() / den
                }
            })
            .sum(),
        MetricSpec::Hellinger => {
            let s: f64 = pairs
                .map(|(a, b)| (a.max(0.0).sqrt() - b.max(0.0).sqrt()).powi(2))
                .sum();
            (2.0 * s).sqrt()
        }
        MetricSpec::PearsonChi2 => pairs
            .map(|(a, b)| {
                if *b == 0.0 {
                    0.0
                } else {
                    (a - b).powi(2) / (b * b)
                }
            })
            .sum(),
        MetricSpec::SquaredChi => pairs
            .map(|(a, b)| {
                if a + b == 0.0 {
                    0.0
                } else {
                    (a - b).powi(2) / (a + b).abs()
                }
            })
            .sum(),
        MetricSpec::JensenShannon => {
            let half = |a: f64, b: f64| {
                if a > 0.0 && a + b > 0.0 {
                    a * (2.0 * a / (a + b)).ln()
                } else {
                    0.0
                }
            };
            0.5 * pairs.map(|(a, b)| half(*a, *b) + half(*b, *a)).sum::<f64>()
        }
        MetricSpec::VicisSymmetric => pairs
            .map(|(a, b)| {
                let m = a.min(*b);
                if m == 0.0 {
                    0.0
                } else {
                    (a - b).powi(2) / (m * m)
                }
            })
            .sum(),
        MetricSpec::Hassanat => pairs
            .map(|(a, b)| {
                let (lo, hi) = (a.min(*b), a.max(*b));
                if lo >= 0.0 {
                    1.0 - (1.0 + lo) / (1.0 + hi)
                } else {
                    1.0 - (1.0 + lo - lo) / (1.0 + hi - lo)
                }
            })
            .sum(),
        MetricSpec::Gini => (0..x.len()).map(|j| (x[j] - y[j]) * (rx[j] - ry[j])).sum(),
        MetricSpec::GeneralizedGini { nu } => {
            let raw: f64 = -(0..x.len())
                .map(|j| (x[j] - y[j]) * (rx[j] - ry[j]))
                .sum::<f64>();
            if nu > 1.0 {
                raw
            } else {
                -raw
            }
        }
    }
}

pub fn brute_knn(
    train: &[Vec<f64>],
    labels: &[usize],
    test: &[Vec<f64>],
    spec: MetricSpec,
    k: usize,
) -> Vec<usize> {
    let d = train[0].len();
    let pool: Vec<&Vec<f64>> = train.iter().chain(test).collect();
    let n = pool.len() as f64;
    let weights = |row: &Vec<f64>| -> Vec<f64> {
        (0..d)
            .map(|j| {
                let col: Vec<f64> = pool.iter().map(|r| r[j]).collect();
                let asc = rank_of(&col, row[j]);
                match spec {
                    MetricSpec::Gini => asc,
                    MetricSpec::GeneralizedGini { nu } => (n + 1.0 - asc).powf(nu - 1.0),
                    _ => 0.0,
                }
            })
            .collect()
    };
    test.iter()
        .map(|q| {
            let rq = weights(q);
            let mut scored: Vec<(f64, usize)> = train
                .iter()
                .enumerate()
                .map(|(i, t)| (oracle_distance(spec, q, t, &rq, &weights(t)), i))
                .collect();
            scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let top = &scored[..k];
            let mut counts = std::collections::HashMap::new();
            for &(_, i) in top {
                *counts.entry(labels[i]).or_insert(0) += 1;
            }
            let best = *counts.values().max().unwrap();
            top.iter()
                .map(|&(_, i)| labels[i])
                .find(|c| counts[c] == best)
                .unwrap()
        })
        .collect()
}

pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for p in &out {
            for c in (0..k).filter(|c| !p.contains(c)) {
                let mut q = p.clone();
                q.push(c);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

pub fn agreement(pred: &[usize], truth: &[usize], perm: &[usize]) -> usize {
    pred.iter()
        .zip(truth)
        .filter(|(p, t)| perm[**p] == **t)
        .count()
}

pub fn brute_silhouette(points: &[[f64; 2]], labels: &[usize]) -> f64 {
    let d = |a: &[f64; 2], b: &[f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let clusters: Vec<usize> = {
        let mut c = labels.to_vec();
        c.sort_unstable();
        c.dedup();
        c
    };
    let mut total = 0.0;
    for i in 0..points.len() {
        let mean_to = |c: usize| {
            let members: Vec<usize> = (0..points.len())
                .filter(|&j| labels[j] == c && j != i)
                .collect();
            members
                .iter()
                .map(|&j| d(&points[i], &points[j]))
                .sum::<f64>()
                / members.len() as f64
        };
        if labels.iter().filter(|&&l| l == labels[i]).count() == 1 {
            continue;
        }
        let a = mean_to(labels[i]);
        let b = clusters
            .iter()
            .filter(|&&c| c != labels[i])
            .map(|&c| mean_to(c))
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / points.len() as f64
}

/// Two-sided exact p by walking all sign patterns.
pub fn enumerated_p(diffs: &[f64]) -> (f64, f64) {
    let n = diffs.len();
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let rank = |v: f64| {
        let less = mags.iter().filter(|&&m| m < v).count() as f64;
        let eq = mags.iter().filter(|&&m| m == v).count() as f64;
        less + (eq + 1.0) / 2.0
    };
    let ranks: Vec<f64> = mags.iter().map(|&m| rank(m)).collect();
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = (0..n).filter(|&i| diffs[i] > 0.0).map(|i| ranks[i]).sum();
    let stat = w_plus.min(total - w_plus);
    let mut hits = 0u64;
    for mask in 0u32..(1 << n) {
        let w: f64 = (0..n)
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        if w <= stat + 1e-9 {
            hits += 1;
        }
    }
    (stat, (2.0 * hits as f64 / (1u64 << n) as f64).min(1.0))
}
