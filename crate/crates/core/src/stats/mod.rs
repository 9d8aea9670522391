//! Between-condition statistics: descriptives, one-way ANOVA from raw data
//! or from summaries, pairwise comparisons, Welch's t, Pearson's r and
//! Levene's test.

pub mod dist;
pub mod reference;
pub mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dist::{f_critical, f_sf, t_critical_two_sided, t_sf_two_sided};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("group `{label}` has {n} observations, need at least {need}")]
    TooFewObservations { label: String, n: usize, need: usize },
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("infinite F: zero within-group variance with unequal means")]
    InfiniteF,
    #[error("degenerate: both variances are zero")]
    DegenerateVariance,
    #[error("undefined correlation: zero variance")]
    UndefinedCorrelation,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{0}")]
    Input(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl GroupSummary {
    pub fn new(label: impl Into<String>, n: usize, mean: f64, sd: f64) -> Self {
        Self {
            label: label.into(),
            n,
            mean,
            sd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df1: f64,
    pub df2: f64,
    pub p: f64,
    pub eta2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairwiseResult {
    /// F with df (1, n1 + n2 - 2), the square of the pooled t.
    pub f: f64,
    pub df2: f64,
    pub t: f64,
    pub p_raw: f64,
    pub p_bonferroni: f64,
    /// Mean difference over pooled SD.
    pub cohen_d: f64,
    /// `2t / sqrt(df)`, the equal-n effect size convention.
    pub cd_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrResult {
    pub r: f64,
    pub df: f64,
    pub p: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub fn describe<S: AsRef<str>>(groups: &[(S, Vec<f64>)]) -> Result<Vec<GroupSummary>, StatsError> {
    groups
        .iter()
        .map(|(label, xs)| {
            if xs.len() < 2 {
                return Err(StatsError::TooFewObservations {
                    label: label.as_ref().to_string(),
                    n: xs.len(),
                    need: 2,
                });
            }
            let (mean, sd) = mean_sd(xs);
            Ok(GroupSummary::new(label.as_ref(), xs.len(), mean, sd))
        })
        .collect()
}

pub fn anova_from_summary(groups: &[GroupSummary]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(g) = groups.iter().find(|g| g.n < 2) {
        return Err(StatsError::TooFewObservations {
            label: g.label.clone(),
            n: g.n,
            need: 2,
        });
    }
    let total: usize = groups.iter().map(|g| g.n).sum();
    let grand = groups.iter().map(|g| g.n as f64 * g.mean).sum::<f64>() / total as f64;
    let ssb: f64 = groups.iter().map(|g| g.n as f64 * (g.mean - grand).powi(2)).sum();
    let ssw: f64 = groups.iter().map(|g| (g.n - 1) as f64 * g.sd * g.sd).sum();
    let df1 = (groups.len() - 1) as f64;
    let df2 = (total - groups.len()) as f64;
    if ssw == 0.0 {
        if ssb > 0.0 {
            return Err(StatsError::InfiniteF);
        }
        return Ok(AnovaResult {
            f: 0.0,
            df1,
            df2,
            p: 1.0,
            eta2: 0.0,
        });
    }
    let f = (ssb / df1) / (ssw / df2);
    Ok(AnovaResult {
        f,
        df1,
        df2,
        p: f_sf(f, df1, df2),
        eta2: ssb / (ssb + ssw),
    })
}

pub fn anova_oneway<S: AsRef<str>>(groups: &[(S, Vec<f64>)]) -> Result<AnovaResult, StatsError> {
    anova_from_summary(&describe(groups)?)
}

/// Two-group pooled comparison; `m` is the Bonferroni family size.
pub fn pairwise_compare(a: &GroupSummary, b: &GroupSummary, m: usize) -> Result<PairwiseResult, StatsError> {
    if m < 1 {
        return Err(StatsError::Input("comparison count must be >= 1".into()));
    }
    for g in [a, b] {
        if g.n < 2 {
            return Err(StatsError::TooFewObservations {
                label: g.label.clone(),
                n: g.n,
                need: 2,
            });
        }
    }
    let (na, nb) = (a.n as f64, b.n as f64);
    let df2 = na + nb - 2.0;
    let sp = (((na - 1.0) * a.sd * a.sd + (nb - 1.0) * b.sd * b.sd) / df2).sqrt();
    let diff = (a.mean - b.mean).abs();
    let cohen_d = if sp == 0.0 {
        if diff > 0.0 {
            return Err(StatsError::InfiniteF);
        }
        0.0
    } else {
        diff / sp
    };
    let t = cohen_d * (na * nb / (na + nb)).sqrt();
    let p_raw = t_sf_two_sided(t, df2);
    Ok(PairwiseResult {
        f: t * t,
        df2,
        t,
        p_raw,
        p_bonferroni: (m as f64 * p_raw).min(1.0),
        cohen_d,
        cd_t: 2.0 * t / df2.sqrt(),
    })
}

pub fn welch_t(a: &GroupSummary, b: &GroupSummary) -> Result<WelchResult, StatsError> {
    for g in [a, b] {
        if g.n < 2 {
            return Err(StatsError::TooFewObservations {
                label: g.label.clone(),
                n: g.n,
                need: 2,
            });
        }
    }
    let va = a.sd * a.sd / a.n as f64;
    let vb = b.sd * b.sd / b.n as f64;
    if va + vb == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let t = (a.mean - b.mean) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (a.n as f64 - 1.0) + vb * vb / (b.n as f64 - 1.0));
    Ok(WelchResult {
        t,
        df,
        p: t_sf_two_sided(t, df),
    })
}

/// p for a Pearson coefficient `r` over `n` pairs, two-sided.
pub fn pearson_p(r: f64, n: usize) -> f64 {
    let df = n as f64 - 2.0;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    t_sf_two_sided(r * (df / (1.0 - r * r)).sqrt(), df)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewObservations {
            label: "pairs".into(),
            n: x.len(),
            need: 3,
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::UndefinedCorrelation);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    Ok(CorrResult {
        r,
        df: n - 2.0,
        p: pearson_p(r, x.len()),
    })
}

/// Classic Levene: one-way ANOVA on absolute deviations from group means.
pub fn levene<S: AsRef<str>>(groups: &[(S, Vec<f64>)]) -> Result<AnovaResult, StatsError> {
    let summaries = describe(groups)?;
    let deviations: Vec<(&str, Vec<f64>)> = groups
        .iter()
        .zip(&summaries)
        .map(|((label, xs), s)| (label.as_ref(), xs.iter().map(|x| (x - s.mean).abs()).collect()))
        .collect();
    anova_oneway(&deviations)
}
