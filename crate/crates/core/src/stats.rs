//! Rank-based comparison of groups: Kruskal–Wallis omnibus test and Dunn's
//! pairwise post-hoc test with Holm–Šidák step-down adjustment. Ties get
//! average ranks and both statistics carry the tie correction.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Smallest total sample size for which the chi-square approximation is
/// reported without a warning flag.
pub const MIN_CHI_SQUARE_N: usize = 5;

/// Average ranks (1-based) of the pooled observations, plus the tie sum
/// `Σ (t³ − t)` over tie groups.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

struct Pooled {
    n: usize,
    sizes: Vec<usize>,
    mean_ranks: Vec<f64>,
    tie_sum: f64,
}

fn pool(groups: &[&[f64]]) -> Result<Pooled> {
    if groups.len() < 2 {
        return Err(Error::config("at least two groups are required"));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::Empty("group"));
    }
    let all: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("observations must be finite"));
    }
    let (ranks, tie_sum) = average_ranks(&all);
    let mut mean_ranks = Vec::with_capacity(groups.len());
    let mut start = 0;
    for g in groups {
        let r: f64 = ranks[start..start + g.len()].iter().sum();
        mean_ranks.push(r / g.len() as f64);
        start += g.len();
    }
    Ok(Pooled { n: all.len(), sizes: groups.iter().map(|g| g.len()).collect(), mean_ranks, tie_sum })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KruskalWallis {
    pub h: f64,
    pub df: usize,
    pub p_value: f64,
    /// Total sample size below [`MIN_CHI_SQUARE_N`].
    pub small_sample: bool,
}

/// Tie-corrected H with a chi-square p value on `groups − 1` degrees of
/// freedom.
pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<KruskalWallis> {
    let p = pool(groups)?;
    let n = p.n as f64;
    let mid = (n + 1.0) / 2.0;
    let raw: f64 = p.sizes.iter().zip(&p.mean_ranks).map(|(&ni, &r)| ni as f64 * (r - mid) * (r - mid)).sum::<f64>()
        * 12.0
        / (n * (n + 1.0));
    let correction = 1.0 - p.tie_sum / (n * n * n - n);
    let h = if correction > 0.0 { raw / correction } else { 0.0 };
    let df = groups.len() - 1;
    Ok(KruskalWallis { h, df, p_value: chi_square_sf(h, df as f64), small_sample: p.n < MIN_CHI_SQUARE_N })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseResult {
    pub first: usize,
    pub second: usize,
    pub z: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

/// Dunn's z for every pair `i < j` (two-sided normal p values), adjusted
/// with Holm–Šidák. Pairs are returned in (0,1), (0,2), ..., (1,2), ... order.
pub fn dunn_holm_sidak(groups: &[&[f64]], alpha: f64) -> Result<Vec<PairwiseResult>> {
    let p = pool(groups)?;
    let n = p.n as f64;
    let tie_term = if p.n > 1 { p.tie_sum / (12.0 * (n - 1.0)) } else { 0.0 };
    let variance = n * (n + 1.0) / 12.0 - tie_term;
    let k = groups.len();
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let se2 = variance * (1.0 / p.sizes[i] as f64 + 1.0 / p.sizes[j] as f64);
            let diff = p.mean_ranks[i] - p.mean_ranks[j];
            let z = if se2 > 0.0 && diff != 0.0 { diff / libm::sqrt(se2) } else { 0.0 };
            let p_raw = two_sided_normal_p(z);
            out.push(PairwiseResult { first: i, second: j, z, p_raw, p_adjusted: p_raw, significant: false });
        }
    }
    let raw: Vec<f64> = out.iter().map(|r| r.p_raw).collect();
    for (r, adj) in out.iter_mut().zip(holm_sidak(&raw)) {
        r.p_adjusted = adj;
        r.significant = adj < alpha;
    }
    Ok(out)
}

/// Holm–Šidák step-down adjustment; output is in input order.
pub fn holm_sidak(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = alloc::vec![0.0; m];
    let mut running: f64 = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        let exponent = (m - rank) as f64;
        let adj = 1.0 - libm::pow(1.0 - p_values[idx], exponent);
        running = running.max(adj);
        adjusted[idx] = running.clamp(p_values[idx], 1.0);
    }
    adjusted
}

/// Significance stars: `*` p < 0.05, `**` p < 0.01, `***` p < 0.001.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// `P(|Z| ≥ |z|)` for a standard normal.
pub fn two_sided_normal_p(z: f64) -> f64 {
    libm::erfc(libm::fabs(z) / core::f64::consts::SQRT_2).min(1.0)
}

/// Upper tail of a chi-square distribution with `df` degrees of freedom.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    regularized_gamma_q(df / 2.0, x / 2.0)
}

/// Regularized upper incomplete gamma `Q(a, x)`: series for `x < a + 1`,
/// Lentz continued fraction otherwise.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefix = a * libm::log(x) - x - libm::lgamma(a);
    if x < a + 1.0 {
        let mut sum = 1.0 / a;
        let mut term = sum;
        let mut ap = a;
        for _ in 0..1000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (1.0 - sum * libm::exp(log_prefix)).clamp(0.0, 1.0)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (libm::exp(log_prefix) * h).clamp(0.0, 1.0)
    }
}
