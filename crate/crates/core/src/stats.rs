//! Descriptive statistics and paired tests for corpus aggregation.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

/// Below this many non-zero differences the signed-rank p-value is computed
/// from the exact permutation distribution.
pub const EXACT_WILCOXON_LIMIT: usize = 50;

/// Minimum sample size for which Spearman's rho is reported.
pub const MIN_RHO_SAMPLE: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("empty sample")]
    Empty,
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("sample contains NaN")]
    NotANumber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub n: usize,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub rho: Option<f64>,
}

fn sorted(values: &[f64]) -> Result<Vec<f64>, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(StatsError::NotANumber);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Order statistic at nearest rank `ceil(per_mille / 1000 · n)`, clamped to
/// `[1, n]`. Integer arithmetic keeps the rank exact.
fn nearest_rank(sorted: &[f64], per_mille: usize) -> f64 {
    let n = sorted.len();
    let rank = (per_mille * n).div_ceil(1000).clamp(1, n);
    sorted[rank - 1]
}

/// Median (midpoint for even `n`) and the nearest-rank 2.5th/97.5th
/// percentiles.
pub fn median_and_coverage(values: &[f64]) -> Result<StatsSummary, StatsError> {
    let v = sorted(values)?;
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    Ok(StatsSummary {
        n,
        median,
        ci_low: nearest_rank(&v, 25),
        ci_high: nearest_rank(&v, 975),
        rho: None,
    })
}

/// [`median_and_coverage`] plus Spearman's rho against `sizes`.
pub fn summarize(values: &[f64], sizes: &[f64]) -> Result<StatsSummary, StatsError> {
    let mut summary = median_and_coverage(values)?;
    summary.rho = spearman_rho(values, sizes)?;
    Ok(summary)
}

/// Average (mid) ranks, 1-based, in input order. Returns the ranks and the
/// sizes of the tie groups.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i..j share the mean of ranks i+1..=j.
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho with average ranks for ties. `None` when `n < 4` or when
/// either sample is constant.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<Option<f64>, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(StatsError::NotANumber);
    }
    if x.len() < MIN_RHO_SAMPLE {
        return Ok(None);
    }
    let (rx, _) = average_ranks(x);
    let (ry, _) = average_ranks(y);
    Ok(pearson(&rx, &ry))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// `a` tends to exceed `b`.
    AGreater,
    /// `b` tends to exceed `a`.
    BGreater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectLabel {
    Negligible,
    Small,
    Moderate,
    Large,
}

impl EffectLabel {
    /// |r| < 0.1 negligible, < 0.3 small, < 0.5 moderate, otherwise large.
    pub fn from_r(r: f64) -> EffectLabel {
        let r = r.abs();
        if r < 0.1 {
            EffectLabel::Negligible
        } else if r < 0.3 {
            EffectLabel::Small
        } else if r < 0.5 {
            EffectLabel::Moderate
        } else {
            EffectLabel::Large
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EffectLabel::Negligible => "negligible",
            EffectLabel::Small => "small",
            EffectLabel::Moderate => "moderate",
            EffectLabel::Large => "large",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    Normal,
    /// No non-zero differences; p is fixed at 0.5.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub n_effective: usize,
    /// Sum of ranks of positive differences `a - b`.
    pub statistic: f64,
    pub z_value: f64,
    pub p_value: f64,
    pub method: PValueMethod,
    pub effect_size: f64,
    pub effect_label: EffectLabel,
}

impl WilcoxonResult {
    pub fn is_degenerate(&self) -> bool {
        self.method == PValueMethod::Degenerate
    }

    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn upper_normal_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// `P(S >= w)` for the signed-rank sum over the given doubled ranks, every
/// sign pattern equally likely.
fn exact_upper_tail(doubled_ranks: &[usize], doubled_w: usize) -> f64 {
    let total: usize = doubled_ranks.iter().sum();
    let mut dist = vec![0.0f64; total + 1];
    dist[0] = 1.0;
    let mut reach = 0;
    for &r in doubled_ranks {
        reach += r;
        for s in (0..=reach).rev() {
            let without = dist[s] * 0.5;
            let with = if s >= r { dist[s - r] * 0.5 } else { 0.0 };
            dist[s] = without + with;
        }
    }
    dist[doubled_w.min(total + 1)..].iter().sum()
}

/// One-sided paired signed-rank test on `a - b`.
///
/// Zero differences are dropped. `z_value` always comes from the normal
/// approximation with tie and continuity corrections and gives the effect
/// size `r = Z / sqrt(n)`. The p-value is exact (conditional on ties) when
/// fewer than [`EXACT_WILCOXON_LIMIT`] differences remain, normal otherwise.
pub fn wilcoxon_signed_rank(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
) -> Result<WilcoxonResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::Empty);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| d.is_nan()) {
        return Err(StatsError::NotANumber);
    }
    let diffs: Vec<f64> = diffs.into_iter().filter(|&d| d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n_effective: 0,
            statistic: 0.0,
            z_value: 0.0,
            p_value: 0.5,
            method: PValueMethod::Degenerate,
            effect_size: 0.0,
            effect_label: EffectLabel::Negligible,
        });
    }

    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = average_ranks(&magnitudes);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, &d)| d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let nf = n as f64;
    let total = nf * (nf + 1.0) / 2.0;
    let mean = total / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term).sqrt();

    // Both alternatives are evaluated as an upper tail of a statistic, so
    // swapping the samples and the alternative gives the same p bit for bit.
    let (tail_stat, correction) = match alternative {
        Alternative::AGreater => (w_plus, 0.5),
        Alternative::BGreater => (total - w_plus, 0.5),
    };
    let z_upper = (tail_stat - mean - correction) / sd;
    let z_value = match alternative {
        Alternative::AGreater => z_upper,
        Alternative::BGreater => -z_upper,
    };

    let (p_value, method) = if n < EXACT_WILCOXON_LIMIT {
        let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
        let threshold = (tail_stat * 2.0).round() as usize;
        (
            exact_upper_tail(&doubled, threshold).min(1.0),
            PValueMethod::Exact,
        )
    } else {
        (upper_normal_tail(z_upper), PValueMethod::Normal)
    };

    let effect_size = z_value / nf.sqrt();
    Ok(WilcoxonResult {
        n_effective: n,
        statistic: w_plus,
        z_value,
        p_value,
        method,
        effect_size,
        effect_label: EffectLabel::from_r(effect_size),
    })
}
