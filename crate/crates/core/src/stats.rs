//! Small statistics toolkit: robust location/scale, correlation, the
//! two-sample Kolmogorov–Smirnov statistic and the Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Median; the mean of the two middle values for even lengths. NaN if empty.
pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Median absolute deviation from the median (unscaled).
pub fn mad(v: &[f64]) -> f64 {
    let m = median(v);
    let dev: Vec<f64> = v.iter().map(|x| (x - m).abs()).collect();
    median(&dev)
}

/// Pearson correlation, or `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 || !(saa * sbb).is_finite() {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences.
    pub w_plus: f64,
    /// Sum of ranks of negative differences.
    pub w_minus: f64,
    /// Nonzero pairs used.
    pub n: usize,
    /// Two-sided p-value.
    pub p_value: f64,
    pub exact: bool,
}

/// Pairs at or below this count use the exact null distribution.
pub const WILCOXON_EXACT_MAX: usize = 25;

/// Paired Wilcoxon signed-rank test on `a − b`. Zero differences are dropped
/// and tied magnitudes receive average ranks. With at most
/// [`WILCOXON_EXACT_MAX`] pairs the p-value comes from enumerating the null
/// distribution of the (tie-adjusted) rank sum; above that a normal
/// approximation with tie correction is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> WilcoxonResult {
    assert_eq!(a.len(), b.len());
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| d.abs() > tie_eps(*d))
        .collect();
    let n = diffs.len();
    if n == 0 {
        return WilcoxonResult { w_plus: 0.0, w_minus: 0.0, n, p_value: 1.0, exact: true };
    }
    let ranks = average_ranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total = n as f64 * (n as f64 + 1.0) / 2.0;
    let w_minus = total - w_plus;

    if n <= WILCOXON_EXACT_MAX {
        // Doubled ranks are integers even with ties.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max_sum: usize = doubled.iter().sum();
        let mut counts = vec![0f64; max_sum + 1];
        counts[0] = 1.0;
        for &r in &doubled {
            for s in (r..=max_sum).rev() {
                counts[s] += counts[s - r];
            }
        }
        let all = 2f64.powi(n as i32);
        let stat = (2.0 * w_plus.min(w_minus)).round() as usize;
        let lower: f64 = counts[..=stat].iter().sum::<f64>() / all;
        WilcoxonResult { w_plus, w_minus, n, p_value: (2.0 * lower).min(1.0), exact: true }
    } else {
        let nf = n as f64;
        let mut var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;
        for t in tie_group_sizes(&ranks) {
            var -= (t * t * t - t) / 48.0;
        }
        let z = (w_plus - total / 2.0) / var.sqrt();
        let p = 2.0 * (1.0 - standard_normal_cdf(z.abs()));
        WilcoxonResult { w_plus, w_minus, n, p_value: p.clamp(0.0, 1.0), exact: false }
    }
}

fn tie_eps(x: f64) -> f64 {
    1e-12 * x.abs().max(1e-300)
}

/// 1-based average ranks; values within a relative 1e-12 are tied.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && (v[idx[end]] - v[idx[start]]).abs() <= 1e-12 * v[idx[end]].abs().max(1e-300) {
            end += 1;
        }
        let r = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

fn tie_group_sizes(ranks: &[f64]) -> Vec<f64> {
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > 1 {
            out.push((j - i) as f64);
        }
        i = j;
    }
    out
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function (Numerical Recipes `erfcc`, |rel err| < 1.2e-7).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.265_512_23
            + t * (1.000_023_68
                + t * (0.374_091_96
                    + t * (0.096_784_18
                        + t * (-0.186_288_06
                            + t * (0.278_868_07
                                + t * (-1.135_203_98
                                    + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
            .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_mad() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mad(&[1.0, 1.0, 2.0, 2.0, 4.0, 6.0, 9.0]), 1.0);
    }

    #[test]
    fn pearson_cases() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[1.0, 2.0], &[5.0, 5.0]), None);
    }

    #[test]
    fn ks_statistic() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[2.5, 3.5]) - 0.5).abs() < 1e-15);
    }

    // Reference values from scipy.stats.wilcoxon(method="exact").
    #[test]
    fn wilcoxon_six_pairs() {
        let x = [0.71, 0.64, 0.80, 0.55, 0.69, 0.77];
        let y = [0.62, 0.66, 0.71, 0.49, 0.60, 0.70];
        let r = wilcoxon_signed_rank(&x, &y);
        assert_eq!(r.n, 6);
        assert_eq!(r.w_minus, 1.0);
        assert_eq!(r.w_plus, 20.0);
        assert!((r.p_value - 0.0625).abs() < 1e-12);
        assert!(r.exact);
    }

    #[test]
    fn wilcoxon_all_positive_seven_pairs() {
        let x = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1];
        let y = [0.4, 0.45, 0.52, 0.61, 0.8, 0.84, 0.9];
        let r = wilcoxon_signed_rank(&x, &y);
        assert_eq!(r.w_minus, 0.0);
        assert!((r.p_value - 0.015625).abs() < 1e-12);
    }

    // Textbook example with one zero difference and tied magnitudes:
    // W+ = 27, W- = 18 over n = 9 nonzero pairs.
    #[test]
    fn wilcoxon_textbook_ties() {
        let a = [125.0, 115.0, 130.0, 140.0, 140.0, 115.0, 140.0, 125.0, 140.0, 135.0];
        let b = [110.0, 122.0, 125.0, 120.0, 140.0, 124.0, 123.0, 137.0, 135.0, 145.0];
        let r = wilcoxon_signed_rank(&a, &b);
        assert_eq!(r.n, 9);
        assert_eq!(r.w_plus, 27.0);
        assert_eq!(r.w_minus, 18.0);
        assert!(r.p_value > 0.5 && r.p_value < 0.7, "{}", r.p_value);
    }

    #[test]
    fn wilcoxon_identical_samples() {
        let a = [1.0, 2.0, 3.0];
        let r = wilcoxon_signed_rank(&a, &a);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn wilcoxon_normal_branch() {
        let a: Vec<f64> = (0..40).map(|i| i as f64 + 0.5).collect();
        let b: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let r = wilcoxon_signed_rank(&a, &b);
        assert!(!r.exact);
        assert!(r.p_value < 1e-6);
        assert!((standard_normal_cdf(1.959964) - 0.975).abs() < 1e-6);
    }
}
