//! Statistics helpers shared by the integration tests: Kolmogorov–Smirnov
//! tests (one- and two-sample), chi-square goodness-of-fit machinery, and
//! small utilities for chain post-processing.
//!
//! These are deliberately independent of the library's own numerics wherever
//! possible so that a library bug cannot silently cancel in a test; the only
//! shared piece is `ln_gamma`, which the library exposes and unit-tests
//! against known values.

#![allow(dead_code)]

use ptwalk::math::ln_gamma;

/// Kolmogorov distribution tail `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Finite-sample correction for the KS statistic (Stephens):
/// `λ = (√n + 0.12 + 0.11/√n) · D`.
fn ks_p_from_d(d: f64, effective_n: f64) -> f64 {
    let sqrt_n = effective_n.sqrt();
    kolmogorov_q((sqrt_n + 0.12 + 0.11 / sqrt_n) * d)
}

/// One-sample KS test of `data` against the CDF `cdf`. Returns (D, p-value).
pub fn ks_one_sample<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> (f64, f64) {
    assert!(data.len() >= 5, "KS needs a nontrivial sample");
    let mut xs = data.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d_max: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        let hi = (i + 1) as f64 / n - f;
        let lo = f - i as f64 / n;
        d_max = d_max.max(hi).max(lo);
    }
    (d_max, ks_p_from_d(d_max, n))
}

/// Two-sample KS test. Returns (D, p-value) with the effective sample size
/// `n₁n₂/(n₁+n₂)` used in the tail approximation.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert!(a.len() >= 5 && b.len() >= 5, "KS needs nontrivial samples");
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n1, n2) = (xs.len() as f64, ys.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d_max: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let (x, y) = (xs[i], ys[j]);
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        let diff = (i as f64 / n1 - j as f64 / n2).abs();
        d_max = d_max.max(diff);
    }
    let n_eff = n1 * n2 / (n1 + n2);
    (d_max, ks_p_from_d(d_max, n_eff))
}

/// Regularised lower incomplete gamma P(a, x) by series expansion
/// (valid and fast for x < a + 1).
fn gamma_p_series(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..500 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-15 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Regularised upper incomplete gamma Q(a, x) by Lentz continued fraction
/// (valid and fast for x ≥ a + 1).
fn gamma_q_cont_frac(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
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
        if (delta - 1.0).abs() < 1e-15 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Survival function of the chi-square distribution with `df` degrees of
/// freedom: `P(X > x)`.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    assert!(df > 0.0);
    if x <= 0.0 {
        return 1.0;
    }
    let a = 0.5 * df;
    let half_x = 0.5 * x;
    if half_x < a + 1.0 {
        (1.0 - gamma_p_series(a, half_x)).clamp(0.0, 1.0)
    } else {
        gamma_q_cont_frac(a, half_x).clamp(0.0, 1.0)
    }
}

/// Empirical quantile edges of `sample` splitting it into `bins` roughly
/// equal-mass cells: returns the `bins − 1` interior edges.
pub fn quantile_edges(sample: &[f64], bins: usize) -> Vec<f64> {
    assert!(bins >= 2);
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (1..bins)
        .map(|k| {
            let q = k as f64 / bins as f64;
            let idx = ((q * (xs.len() - 1) as f64).round() as usize).min(xs.len() - 1);
            xs[idx]
        })
        .collect()
}

/// Cell index of `x` given sorted interior `edges` (cells = edges.len() + 1).
pub fn bin_index(edges: &[f64], x: f64) -> usize {
    edges.partition_point(|e| *e < x)
}

/// Two-sample chi-square homogeneity test on pre-binned counts. Both count
/// vectors must have the same length; cells empty in both samples are
/// dropped. Returns (statistic, p-value) with df = kept_cells − 1.
pub fn chi2_homogeneity(counts_a: &[u64], counts_b: &[u64]) -> (f64, f64) {
    assert_eq!(counts_a.len(), counts_b.len());
    let n_a: u64 = counts_a.iter().sum();
    let n_b: u64 = counts_b.iter().sum();
    assert!(n_a > 0 && n_b > 0);
    let total = (n_a + n_b) as f64;
    let mut stat = 0.0;
    let mut kept = 0usize;
    for (&oa, &ob) in counts_a.iter().zip(counts_b) {
        let row = (oa + ob) as f64;
        if row == 0.0 {
            continue;
        }
        kept += 1;
        let ea = n_a as f64 * row / total;
        let eb = n_b as f64 * row / total;
        stat += (oa as f64 - ea).powi(2) / ea + (ob as f64 - eb).powi(2) / eb;
    }
    assert!(kept >= 2, "need at least two occupied cells");
    (stat, chi2_sf(stat, (kept - 1) as f64))
}

/// Two-sample chi-square test using quantile bins derived from `oracle`.
pub fn chi2_two_sample_quantile(oracle: &[f64], sample: &[f64], bins: usize) -> (f64, f64) {
    let edges = quantile_edges(oracle, bins);
    let mut ca = vec![0u64; bins];
    let mut cb = vec![0u64; bins];
    for &x in oracle {
        ca[bin_index(&edges, x)] += 1;
    }
    for &x in sample {
        cb[bin_index(&edges, x)] += 1;
    }
    chi2_homogeneity(&ca, &cb)
}

/// Goodness-of-fit test of positive integer `counts` (e.g. trial numbers)
/// against a geometric distribution with known success probability `p`
/// (support k = 1, 2, …). Cells are merged from the right until every
/// expected count is at least 5; df = cells − 1 since `p` is not estimated.
/// Returns (statistic, p-value, cells).
pub fn geometric_gof(counts: &[u32], p: f64) -> (f64, f64, usize) {
    assert!(p > 0.0 && p < 1.0);
    let n = counts.len() as f64;
    let k_max = *counts.iter().max().expect("nonempty") as usize;
    let mut observed = vec![0u64; k_max];
    for &c in counts {
        assert!(c >= 1, "geometric support starts at 1");
        observed[(c - 1) as usize] += 1;
    }
    // Cell k (0-based) has probability p(1−p)^k; the last cell absorbs the tail.
    let mut cells: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut tail_prob = 1.0;
    for (k, &obs) in observed.iter().enumerate() {
        let prob = p * (1.0 - p).powi(k as i32);
        tail_prob -= prob;
        cells.push((obs as f64, n * prob));
    }
    // Tail beyond k_max folds into the final cell.
    if let Some(last) = cells.last_mut() {
        last.1 += n * tail_prob.max(0.0);
    }
    // Merge from the right until all expected counts are ≥ 5.
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for &(o, e) in cells.iter().rev() {
        acc.0 += o;
        acc.1 += e;
        if acc.1 >= 5.0 {
            merged.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 {
        if let Some(first) = merged.last_mut() {
            first.0 += acc.0;
            first.1 += acc.1;
        }
    }
    merged.reverse();
    assert!(merged.len() >= 2, "need at least two cells after merging");
    let stat: f64 = merged.iter().map(|&(o, e)| (o - e).powi(2) / e).sum();
    let df = (merged.len() - 1) as f64;
    (stat, chi2_sf(stat, df), merged.len())
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Thins a series by `stride`, keeping indices 0, stride, 2·stride, …
pub fn thin(xs: &[f64], stride: usize) -> Vec<f64> {
    assert!(stride >= 1);
    xs.iter().step_by(stride).copied().collect()
}

/// Number of label changes along a sequence.
pub fn count_switches(labels: &[usize]) -> usize {
    labels.windows(2).filter(|w| w[0] != w[1]).count()
}

#[cfg(test)]
mod sanity {
    use super::*;

    #[test]
    fn chi2_sf_known_values() {
        // P(χ²_1 > 3.841) ≈ 0.05, P(χ²_10 > 18.307) ≈ 0.05.
        assert!((chi2_sf(3.841, 1.0) - 0.05).abs() < 2e-4);
        assert!((chi2_sf(18.307, 10.0) - 0.05).abs() < 2e-4);
        assert!((chi2_sf(2.706, 1.0) - 0.10).abs() < 2e-4);
    }

    #[test]
    fn kolmogorov_tail_known_value() {
        // Q(1.3581) ≈ 0.05 (classical KS critical value at α = 0.05).
        assert!((kolmogorov_q(1.3581) - 0.05).abs() < 5e-4);
    }
}
