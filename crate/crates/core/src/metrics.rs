//! Dissimilarity zoo plus the Gini prametric family.
//!
//! Zoo members are functions of the two points only. The Gini kinds also
//! need a rank vector per point, taken from one [`RankContext`]: ascending
//! ranks for [`MetricSpec::Gini`], powered decumulative ranks for
//! [`MetricSpec::GeneralizedGini`].
//!
//! Degenerate terms contribute zero: Canberra when `|x|+|y| = 0`, Vicis
//! symmetric when `min(x,y) = 0`, Pearson χ² when `y = 0`, squared χ when
//! `x+y = 0`. Jensen-Shannon keeps a half-term `a ln(2a/(a+b))` only when
//! `a > 0` and `a + b > 0`. Hellinger takes `√max(x, 0)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use rayon::prelude::*;

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::ranks::{build_rank_context, RankContext};

pub const DEFAULT_MINKOWSKI_P: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricSpec {
    Euclidean,
    Manhattan,
    Minkowski { p: f64 },
    Cosine,
    Lorentzian,
    Canberra,
    Hellinger,
    PearsonChi2,
    SquaredChi,
    JensenShannon,
    VicisSymmetric,
    Hassanat,
    Gini,
    GeneralizedGini { nu: f64 },
}

impl MetricSpec {
    /// The twelve zoo members and both Gini kinds (generalized at `nu`).
    pub fn all(nu: f64) -> Vec<MetricSpec> {
        use MetricSpec::*;
        vec![
            Euclidean,
            Manhattan,
            Minkowski {
                p: DEFAULT_MINKOWSKI_P,
            },
            Cosine,
            Lorentzian,
            Canberra,
            Hellinger,
            PearsonChi2,
            SquaredChi,
            JensenShannon,
            VicisSymmetric,
            Hassanat,
            Gini,
            GeneralizedGini { nu },
        ]
    }

    pub fn is_gini(&self) -> bool {
        matches!(self, MetricSpec::Gini | MetricSpec::GeneralizedGini { .. })
    }

    /// ν used when building a rank context: the spec's own ν, or 2 for plain
    /// Gini. `None` for zoo members.
    pub fn rank_nu(&self) -> Option<f64> {
        match self {
            MetricSpec::Gini => Some(2.0),
            MetricSpec::GeneralizedGini { nu } => Some(*nu),
            _ => None,
        }
    }

    /// Same kind with a different ν; only meaningful for the generalized Gini.
    pub fn with_nu(self, nu: f64) -> Result<MetricSpec> {
        match self {
            MetricSpec::GeneralizedGini { .. } => MetricSpec::GeneralizedGini { nu }.validated(),
            other => Ok(other),
        }
    }

    pub fn validated(self) -> Result<MetricSpec> {
        match self {
            MetricSpec::Minkowski { p } if !(p.is_finite() && p > 0.0) => {
                Err(Error::config(format!("minkowski p must be > 0, got {p}")))
            }
            MetricSpec::GeneralizedGini { nu } if !nu.is_finite() || nu == 1.0 => Err(
                Error::config(format!("generalized gini needs finite nu != 1, got {nu}")),
            ),
            s => Ok(s),
        }
    }

    /// The rank vector this spec reads for row `i` of `ctx`.
    pub fn rank_weights<'a>(&self, ctx: &'a RankContext, i: usize) -> Result<&'a [f64]> {
        match self {
            MetricSpec::Gini => Ok(ctx.asc_row(i)),
            MetricSpec::GeneralizedGini { .. } => ctx
                .desc_pow_row(i)
                .ok_or_else(|| Error::config("rank context was built without nu")),
            _ => Ok(&[]),
        }
    }

    /// Dissimilarity between `x` and `y`. `rx`/`ry` are the rank weights from
    /// [`MetricSpec::rank_weights`]; zoo members ignore them.
    pub fn dissimilarity(&self, x: &[f64], rx: &[f64], y: &[f64], ry: &[f64]) -> Result<f64> {
        match self {
            MetricSpec::Gini => gini_prametric(x, y, rx, ry),
            MetricSpec::GeneralizedGini { nu } => generalized_gini_prametric(x, y, rx, ry, *nu),
            zoo => zoo_distance(*zoo, x, y),
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricSpec::Euclidean => f.write_str("euclidean"),
            MetricSpec::Manhattan => f.write_str("manhattan"),
            MetricSpec::Minkowski { p } => write!(f, "minkowski:p={p}"),
            MetricSpec::Cosine => f.write_str("cosine"),
            MetricSpec::Lorentzian => f.write_str("lorentzian"),
            MetricSpec::Canberra => f.write_str("canberra"),
            MetricSpec::Hellinger => f.write_str("hellinger"),
            MetricSpec::PearsonChi2 => f.write_str("pearson-chi2"),
            MetricSpec::SquaredChi => f.write_str("squared-chi"),
            MetricSpec::JensenShannon => f.write_str("jensen-shannon"),
            MetricSpec::VicisSymmetric => f.write_str("vicis-symmetric"),
            MetricSpec::Hassanat => f.write_str("hassanat"),
            MetricSpec::Gini => f.write_str("gini"),
            MetricSpec::GeneralizedGini { nu } => write!(f, "gini-gen:nu={nu}"),
        }
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    /// `name` or `name:key=value`. `minkowski` alone means p = 3 and
    /// `gini-gen` alone means ν = 2.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::config(format!("invalid metric '{s}': {why}"));
        let (name, param) = match s.trim().split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (s.trim(), None),
        };
        let value = |key: &str| -> Result<Option<f64>> {
            match param {
                None => Ok(None),
                Some(p) => {
                    let (k, v) = p.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                    if k.trim() != key {
                        return Err(bad(&format!("unknown parameter '{}'", k.trim())));
                    }
                    v.trim()
                        .parse::<f64>()
                        .map(Some)
                        .map_err(|_| bad("parameter is not a number"))
                }
            }
        };
        let no_param = |spec: MetricSpec| -> Result<MetricSpec> {
            match param {
                None => Ok(spec),
                Some(_) => Err(bad("takes no parameters")),
            }
        };
        let spec = match name.to_ascii_lowercase().as_str() {
            "euclidean" => no_param(MetricSpec::Euclidean)?,
            "manhattan" => no_param(MetricSpec::Manhattan)?,
            "minkowski" => MetricSpec::Minkowski {
                p: value("p")?.unwrap_or(DEFAULT_MINKOWSKI_P),
            },
            "cosine" => no_param(MetricSpec::Cosine)?,
            "lorentzian" => no_param(MetricSpec::Lorentzian)?,
            "canberra" => no_param(MetricSpec::Canberra)?,
            "hellinger" => no_param(MetricSpec::Hellinger)?,
            "pearson-chi2" => no_param(MetricSpec::PearsonChi2)?,
            "squared-chi" => no_param(MetricSpec::SquaredChi)?,
            "jensen-shannon" => no_param(MetricSpec::JensenShannon)?,
            "vicis-symmetric" => no_param(MetricSpec::VicisSymmetric)?,
            "hassanat" => no_param(MetricSpec::Hassanat)?,
            "gini" => no_param(MetricSpec::Gini)?,
            "gini-gen" => MetricSpec::GeneralizedGini {
                nu: value("nu")?.unwrap_or(2.0),
            },
            _ => return Err(bad("unknown metric")),
        };
        spec.validated().map_err(|e| bad(&e.to_string()))
    }
}

impl Serialize for MetricSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MetricSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn check_len(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::domain(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::domain("empty vectors"));
    }
    Ok(())
}

fn sum_terms(x: &[f64], y: &[f64], term: impl Fn(f64, f64) -> f64) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| term(a, b)).sum()
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn js_half(a: f64, b: f64) -> f64 {
    if a > 0.0 && a + b > 0.0 {
        a * (2.0 * a / (a + b)).ln()
    } else {
        0.0
    }
}

fn hassanat_term(a: f64, b: f64) -> f64 {
    let lo = a.min(b);
    let hi = a.max(b);
    if lo >= 0.0 {
        1.0 - (1.0 + lo) / (1.0 + hi)
    } else {
        1.0 - (1.0 + lo + lo.abs()) / (1.0 + hi + lo.abs())
    }
}

/// One of the twelve zoo dissimilarities. Gini kinds are rejected; use
/// [`MetricSpec::dissimilarity`] with rank weights for those.
pub fn zoo_distance(spec: MetricSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x, y)?;
    let d = match spec {
        MetricSpec::Euclidean => sum_terms(x, y, |a, b| (a - b) * (a - b)).sqrt(),
        MetricSpec::Manhattan => sum_terms(x, y, |a, b| (a - b).abs()),
        MetricSpec::Minkowski { p } => sum_terms(x, y, |a, b| (a - b).abs().powf(p)).powf(1.0 / p),
        MetricSpec::Cosine => {
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nx == 0.0 || ny == 0.0 {
                return Err(Error::domain("cosine distance of a zero vector"));
            }
            let dot = sum_terms(x, y, |a, b| a * b);
            (1.0 - dot / (nx * ny)).max(0.0)
        }
        MetricSpec::Lorentzian => sum_terms(x, y, |a, b| (a - b).abs().ln_1p()),
        MetricSpec::Canberra => {
            sum_terms(x, y, |a, b| ratio_or_zero((a - b).abs(), a.abs() + b.abs()))
        }
        MetricSpec::Hellinger => {
            let s = sum_terms(x, y, |a, b| {
                let d = a.max(0.0).sqrt() - b.max(0.0).sqrt();
                d * d
            });
            (2.0 * s).sqrt()
        }
        MetricSpec::PearsonChi2 => sum_terms(x, y, |a, b| ratio_or_zero((a - b) * (a - b), b * b)),
        MetricSpec::SquaredChi => {
            sum_terms(x, y, |a, b| ratio_or_zero((a - b) * (a - b), (a + b).abs()))
        }
        MetricSpec::JensenShannon => 0.5 * sum_terms(x, y, |a, b| js_half(a, b) + js_half(b, a)),
        MetricSpec::VicisSymmetric => sum_terms(x, y, |a, b| {
            ratio_or_zero((a - b) * (a - b), a.min(b) * a.min(b))
        }),
        MetricSpec::Hassanat => sum_terms(x, y, hassanat_term),
        MetricSpec::Gini | MetricSpec::GeneralizedGini { .. } => {
            return Err(Error::config(format!("{spec} needs rank vectors")))
        }
    };
    Ok(d)
}

/// Full `n × n` dissimilarity matrix of `data` under `spec`, row-major.
/// Gini kinds take their ranks over `data` itself.
pub fn pairwise(data: &DataMatrix, spec: MetricSpec) -> Result<Vec<f64>> {
    let spec = spec.validated()?;
    let ctx = match spec.rank_nu() {
        Some(nu) => Some(build_rank_context(data, Some(nu))?),
        None => None,
    };
    let n = data.rows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = match &ctx {
                Some(c) => spec.rank_weights(c, i)?,
                None => &[],
            };
            (0..n)
                .map(|k| {
                    let rk = match &ctx {
                        Some(c) => spec.rank_weights(c, k)?,
                        None => &[],
                    };
                    spec.dissimilarity(data.row(i), ri, data.row(k), rk)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(rows.concat())
}

fn rank_weighted_sum(x: &[f64], y: &[f64], rx: &[f64], ry: &[f64]) -> Result<f64> {
    check_len(x, y)?;
    if rx.len() != x.len() || ry.len() != x.len() {
        return Err(Error::domain(format!(
            "rank vectors of length {} and {} for {} features",
            rx.len(),
            ry.len(),
            x.len()
        )));
    }
    Ok((0..x.len()).map(|j| (x[j] - y[j]) * (rx[j] - ry[j])).sum())
}

/// `Σ_j (x_j − y_j)(R(x_j) − R(y_j))` with ascending ranks from one context.
pub fn gini_prametric(x: &[f64], y: &[f64], rx: &[f64], ry: &[f64]) -> Result<f64> {
    rank_weighted_sum(x, y, rx, ry)
}

/// `sgn(ν−1) · −Σ_j (x_j − y_j)(R̄^{ν−1}(x_j) − R̄^{ν−1}(y_j))`, where
/// `rpx`/`rpy` already hold `R̄^{ν−1}`. The sign factor keeps the value
/// non-negative for ν < 1, where the powered ranks increase with the value.
pub fn generalized_gini_prametric(
    x: &[f64],
    y: &[f64],
    rpx: &[f64],
    rpy: &[f64],
    nu: f64,
) -> Result<f64> {
    if !nu.is_finite() || nu == 1.0 {
        return Err(Error::config(format!(
            "generalized gini needs finite nu != 1, got {nu}"
        )));
    }
    let raw = -rank_weighted_sum(x, y, rpx, rpy)?;
    Ok(if nu > 1.0 { raw } else { -raw })
}

/// Empirical Gini covariance `(2/n²) Σ x_i (2 R_y(y_i) − 1)`, given the
/// ascending ranks of `y` within its own sample. May be negative.
pub fn gini_mean_difference(x: &[f64], ry: &[f64]) -> Result<f64> {
    check_len(x, ry)?;
    let n = x.len() as f64;
    let s: f64 = x.iter().zip(ry).map(|(xi, r)| xi * (2.0 * r - 1.0)).sum();
    Ok(2.0 / (n * n) * s)
}
