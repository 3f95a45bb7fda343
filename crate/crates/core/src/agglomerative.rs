//! Agglomerative clustering: average linkage over any [`MetricSpec`], Ward
//! linkage over Euclidean distances.
//!
//! Cluster ids follow the usual dendrogram convention: leaves are
//! `0..n`, the cluster made by merge `t` is `n + t`.

use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::metrics::{pairwise, MetricSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Ward,
}

impl std::str::FromStr for Linkage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Linkage::Average),
            "ward" => Ok(Linkage::Ward),
            _ => Err(Error::config(format!("unknown linkage '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Flat labels for `k` clusters: the first `n − k` merges applied.
    /// Labels are numbered in order of each cluster's first leaf.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        let n = self.n_leaves;
        if k == 0 || k > n {
            return Err(Error::config(format!("k = {k} outside [1, {n}]")));
        }
        let mut parent: Vec<usize> = (0..2 * n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (t, m) in self.merges.iter().take(n - k).enumerate() {
            let ra = find(&mut parent, m.a);
            let rb = find(&mut parent, m.b);
            parent[ra] = n + t;
            parent[rb] = n + t;
        }
        let mut label_of_root = std::collections::HashMap::new();
        Ok((0..n)
            .map(|i| {
                let r = find(&mut parent, i);
                let next = label_of_root.len();
                *label_of_root.entry(r).or_insert(next)
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

type MergeKey = (f64, usize, usize);

/// Pair order: smaller height, then smaller ids.
fn key_less(a: MergeKey, b: MergeKey) -> bool {
    a.0.total_cmp(&b.0)
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
        .is_lt()
}

/// Builds the full dendrogram and cuts it at `k`. Gini kinds rank over the
/// whole input. Asymmetric dissimilarities are symmetrized as the mean of
/// both directions. The closest pair merges first, ties going to the
/// lexicographically smallest pair of cluster ids.
pub fn agglomerative_fit(
    data: &DataMatrix,
    k: usize,
    spec: MetricSpec,
    linkage: Linkage,
) -> Result<(Dendrogram, Vec<usize>)> {
    if linkage == Linkage::Ward && spec != MetricSpec::Euclidean {
        return Err(Error::config(format!(
            "ward linkage needs euclidean, got {spec}"
        )));
    }
    let n = data.rows();
    if k == 0 || k > n {
        return Err(Error::config(format!("k = {k} outside [1, {n}]")));
    }
    let raw = pairwise(data, spec)?;
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            dist[i * n + j] = if i == j {
                0.0
            } else {
                0.5 * (raw[i * n + j] + raw[j * n + i])
            };
        }
    }
    let dendrogram = build(n, dist, linkage);
    let labels = dendrogram.cut(k)?;
    Ok((dendrogram, labels))
}

/// Greedy merging on a slot matrix. Slot `s` starts as leaf `s`; a merge
/// stores the new cluster in the lower slot and retires the other. Each
/// live slot caches its best partner.
fn build(n: usize, mut dist: Vec<f64>, linkage: Linkage) -> Dendrogram {
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut alive = vec![true; n];
    let key = |dist: &[f64], id: &[usize], i: usize, j: usize| {
        (dist[i * n + j], id[i].min(id[j]), id[i].max(id[j]))
    };
    let best_partner = |dist: &[f64], id: &[usize], alive: &[bool], i: usize| {
        let mut best: Option<(usize, MergeKey)> = None;
        for j in (0..n).filter(|&j| j != i && alive[j]) {
            let kj = key(dist, id, i, j);
            if best.is_none_or(|(_, b)| key_less(kj, b)) {
                best = Some((j, kj));
            }
        }
        best
    };
    let mut cache: Vec<Option<(usize, MergeKey)>> = (0..n)
        .map(|i| best_partner(&dist, &id, &alive, i))
        .collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for t in 0..n.saturating_sub(1) {
        let (sa, (sb, kk)) = (0..n)
            .filter(|&i| alive[i])
            .filter_map(|i| cache[i].map(|c| (i, c)))
            .reduce(|x, y| if key_less(y.1 .1, x.1 .1) { y } else { x })
            .expect("at least two live clusters");
        let (lo, hi) = (sa.min(sb), sa.max(sb));
        let (na, nb) = (size[lo] as f64, size[hi] as f64);
        let d_ab = kk.0;
        for s in 0..n {
            if !alive[s] || s == lo || s == hi {
                continue;
            }
            let (da, db) = (dist[lo * n + s], dist[hi * n + s]);
            let v = match linkage {
                Linkage::Average => (na * da + nb * db) / (na + nb),
                Linkage::Ward => {
                    let nk = size[s] as f64;
                    (((na + nk) * da * da + (nb + nk) * db * db - nk * d_ab * d_ab)
                        / (na + nb + nk))
                        .max(0.0)
                        .sqrt()
                }
            };
            dist[lo * n + s] = v;
            dist[s * n + lo] = v;
        }
        merges.push(Merge {
            a: kk.1,
            b: kk.2,
            height: d_ab,
            size: size[lo] + size[hi],
        });
        alive[hi] = false;
        size[lo] += size[hi];
        id[lo] = n + t;
        cache[hi] = None;
        cache[lo] = best_partner(&dist, &id, &alive, lo);
        for s in 0..n {
            if !alive[s] || s == lo {
                continue;
            }
            let stale = matches!(cache[s], Some((p, _)) if p == lo || p == hi);
            if stale {
                cache[s] = best_partner(&dist, &id, &alive, s);
            } else {
                let cand = key(&dist, &id, s, lo);
                if cache[s].is_none_or(|(_, b)| key_less(cand, b)) {
                    cache[s] = Some((lo, cand));
                }
            }
        }
    }
    Dendrogram {
        n_leaves: n,
        merges,
    }
}
