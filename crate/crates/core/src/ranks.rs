//! Per-feature ranks with average ties, powered decumulative ranks, and
//! conditional ranks for points that are not part of the reference set.

use rayon::prelude::*;

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};

/// 1-based ascending ranks; tied values share the mean of the positions
/// they occupy.
pub fn ascending_ranks(column: &[f64]) -> Result<Vec<f64>> {
    if column.is_empty() {
        return Err(Error::domain("cannot rank an empty column"));
    }
    let mut order: Vec<usize> = (0..column.len()).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut ranks = vec![0.0; column.len()];
    let mut start = 0;
    while start < order.len() {
        let v = column[order[start]];
        let mut end = start + 1;
        while end < order.len() && column[order[end]] == v {
            end += 1;
        }
        // positions start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    Ok(ranks)
}

/// 1-based descending ranks with average ties; always `n + 1 - ascending`.
pub fn descending_ranks(column: &[f64]) -> Result<Vec<f64>> {
    let n1 = column.len() as f64 + 1.0;
    Ok(ascending_ranks(column)?
        .into_iter()
        .map(|r| n1 - r)
        .collect())
}

/// How the powered decumulative ranks of conditionally ranked points are
/// formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankConvention {
    /// `R̄^(ν-1)`, the same transform used on reference points.
    #[default]
    Definition,
    /// `R̄^ν · (n_te / n)`, applied to every pooled row. Kept for comparison
    /// runs against that convention.
    ScaledPower,
}

fn check_nu(nu: Option<f64>) -> Result<()> {
    match nu {
        Some(v) if !v.is_finite() => Err(Error::config(format!("nu must be finite, got {v}"))),
        Some(1.0) => Err(Error::config(
            "nu = 1 makes every decumulative rank power equal to 1",
        )),
        _ => Ok(()),
    }
}

/// Rank tables for a set of rows, stored row-major like [`DataMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct RankContext {
    n_ref: usize,
    rows: usize,
    cols: usize,
    asc: Vec<f64>,
    desc: Vec<f64>,
    nu: Option<f64>,
    desc_pow: Option<Vec<f64>>,
}

impl RankContext {
    fn from_parts(
        n_ref: usize,
        rows: usize,
        cols: usize,
        asc: Vec<f64>,
        nu: Option<f64>,
        pow: impl Fn(f64) -> f64,
    ) -> Self {
        let n1 = n_ref as f64 + 1.0;
        let desc: Vec<f64> = asc.iter().map(|r| n1 - r).collect();
        let desc_pow = nu.map(|_| desc.iter().map(|&r| pow(r)).collect());
        Self {
            n_ref,
            rows,
            cols,
            asc,
            desc,
            nu,
            desc_pow,
        }
    }

    /// Size of the population the ranks were taken in.
    pub fn n_ref(&self) -> usize {
        self.n_ref
    }

    /// Number of rows this context holds ranks for.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nu(&self) -> Option<f64> {
        self.nu
    }

    pub fn asc_row(&self, i: usize) -> &[f64] {
        &self.asc[i * self.cols..(i + 1) * self.cols]
    }

    pub fn desc_row(&self, i: usize) -> &[f64] {
        &self.desc[i * self.cols..(i + 1) * self.cols]
    }

    pub fn desc_pow_row(&self, i: usize) -> Option<&[f64]> {
        self.desc_pow
            .as_ref()
            .map(|p| &p[i * self.cols..(i + 1) * self.cols])
    }

    /// Ascending ranks of feature `j` across all rows.
    pub fn asc_column(&self, j: usize) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.asc[i * self.cols + j])
            .collect()
    }

    /// Keeps rows `start..` only; `n_ref` is unchanged.
    fn tail(mut self, start: usize) -> Self {
        let c = self.cols;
        self.asc.drain(..start * c);
        self.desc.drain(..start * c);
        if let Some(p) = &mut self.desc_pow {
            p.drain(..start * c);
        }
        self.rows -= start;
        self
    }
}

fn column_major_ranks(columns: &[Vec<f64>], rows: usize) -> Result<Vec<f64>> {
    let per_col: Vec<Vec<f64>> = columns
        .par_iter()
        .map(|c| ascending_ranks(c))
        .collect::<Result<_>>()?;
    let cols = columns.len();
    let mut asc = vec![0.0; rows * cols];
    for (j, col) in per_col.iter().enumerate() {
        for (i, r) in col.iter().enumerate() {
            asc[i * cols + j] = *r;
        }
    }
    Ok(asc)
}

/// Ranks of every row of `data` within `data` itself; `desc_pow` is set
/// when `nu` is given.
pub fn build_rank_context(data: &DataMatrix, nu: Option<f64>) -> Result<RankContext> {
    check_nu(nu)?;
    let columns: Vec<Vec<f64>> = (0..data.cols()).map(|j| data.column(j)).collect();
    let asc = column_major_ranks(&columns, data.rows())?;
    let exp = nu.map_or(0.0, |v| v - 1.0);
    Ok(RankContext::from_parts(
        data.rows(),
        data.rows(),
        data.cols(),
        asc,
        nu,
        |r| r.powf(exp),
    ))
}

/// Ranks over the pooled population `train ++ test`: rows `0..n_tr` are the
/// training rows, the rest are the test rows, all ranked against
/// `n = n_tr + n_te`.
pub fn pooled_ranks(
    train: &DataMatrix,
    test: &DataMatrix,
    nu: Option<f64>,
    convention: RankConvention,
) -> Result<RankContext> {
    check_nu(nu)?;
    if train.cols() != test.cols() {
        return Err(Error::domain(format!(
            "train has {} columns, test has {}",
            train.cols(),
            test.cols()
        )));
    }
    let n = train.rows() + test.rows();
    let columns: Vec<Vec<f64>> = (0..train.cols())
        .map(|j| {
            let mut c = train.column(j);
            c.extend(test.column(j));
            c
        })
        .collect();
    let asc = column_major_ranks(&columns, n)?;
    let nu_v = nu.unwrap_or(2.0);
    let ctx = match convention {
        RankConvention::Definition => {
            RankContext::from_parts(n, n, train.cols(), asc, nu, |r| r.powf(nu_v - 1.0))
        }
        RankConvention::ScaledPower => {
            let scale = test.rows() as f64 / n as f64;
            RankContext::from_parts(n, n, train.cols(), asc, nu, |r| r.powf(nu_v) * scale)
        }
    };
    Ok(ctx)
}

/// Ranks the test rows would hold if they joined the training set: the
/// pooled-rank entries belonging to `test`.
pub fn conditional_ranks(
    train: &DataMatrix,
    test: &DataMatrix,
    nu: Option<f64>,
) -> Result<RankContext> {
    conditional_ranks_with(train, test, nu, RankConvention::Definition)
}

pub fn conditional_ranks_with(
    train: &DataMatrix,
    test: &DataMatrix,
    nu: Option<f64>,
    convention: RankConvention,
) -> Result<RankContext> {
    Ok(pooled_ranks(train, test, nu, convention)?.tail(train.rows()))
}

/// Sorted copy of each column of a reference population, for placing new
/// points one at a time.
#[derive(Debug, Clone)]
pub struct SortedColumns {
    n: usize,
    columns: Vec<Vec<f64>>,
}

impl SortedColumns {
    pub fn new(data: &DataMatrix) -> Self {
        let columns = (0..data.cols())
            .map(|j| {
                let mut c = data.column(j);
                c.sort_by(f64::total_cmp);
                c
            })
            .collect();
        Self {
            n: data.rows(),
            columns,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Ascending rank of `v` in column `j` if it alone were added to the
    /// reference population (size `n + 1`, average ties).
    pub fn insertion_rank(&self, j: usize, v: f64) -> f64 {
        let col = &self.columns[j];
        let less = col.partition_point(|x| *x < v);
        let equal = col[less..].partition_point(|x| *x <= v);
        less as f64 + 1.0 + equal as f64 / 2.0
    }

    /// Rank of `v` on the reference population's own `1..=n` scale: the
    /// mean of the positions it could occupy, `L + (E + 1) / 2`. A value
    /// equal to a unique reference value gets that value's rank.
    pub fn midpoint_rank(&self, j: usize, v: f64) -> f64 {
        self.insertion_rank(j, v) - 0.5
    }

    /// Context for `points` ranked with [`SortedColumns::midpoint_rank`];
    /// `n_ref = n`, so the ranks share the reference rows' scale.
    pub fn midpoint_context(&self, points: &[&[f64]], nu: Option<f64>) -> Result<RankContext> {
        let mut ctx = self.insertion_context(points, nu)?;
        let exp = nu.map_or(0.0, |v| v - 1.0);
        let asc: Vec<f64> = ctx.asc.iter().map(|r| r - 0.5).collect();
        ctx = RankContext::from_parts(self.n, ctx.rows, ctx.cols, asc, nu, |r| r.powf(exp));
        Ok(ctx)
    }

    /// Context for `points`, each inserted independently into the reference
    /// population; `n_ref = n + 1`.
    pub fn insertion_context(&self, points: &[&[f64]], nu: Option<f64>) -> Result<RankContext> {
        check_nu(nu)?;
        let cols = self.columns.len();
        let mut asc = Vec::with_capacity(points.len() * cols);
        for p in points {
            if p.len() != cols {
                return Err(Error::domain(format!(
                    "point has {} values, reference has {cols} columns",
                    p.len()
                )));
            }
            asc.extend(
                p.iter()
                    .enumerate()
                    .map(|(j, &v)| self.insertion_rank(j, v)),
            );
        }
        let exp = nu.map_or(0.0, |v| v - 1.0);
        Ok(RankContext::from_parts(
            self.n + 1,
            points.len(),
            cols,
            asc,
            nu,
            |r| r.powf(exp),
        ))
    }
}
