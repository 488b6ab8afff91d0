//! Chain-quality metrics and plot-ready summaries: integrated
//! autocorrelation time, effective sample size, ergodic averages,
//! acceptance bookkeeping, mode occupancy, and KDE grids for figures.
//!
//! All functions are pure views over completed traces; the one caution is
//! that autocorrelation-based quantities on a chain still trapped in one
//! mode of a multimodal target can look deceptively healthy, so treat
//! them as qualitative guides there.

use crate::error::{Error, Result};
use crate::trace::Trace;
use std::collections::BTreeMap;

/// Integrated autocorrelation time estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IatEstimate {
    /// The estimate, clipped below at 1.
    pub value: f64,
    /// Set when the input series was (numerically) constant, where
    /// autocorrelation is undefined; the value is then reported as 1.
    pub degenerate: bool,
}

const MIN_IAT_LEN: usize = 100;

/// Estimates the integrated autocorrelation time 1 + 2Σ_k ρ_k by the
/// initial-positive-sequence rule: autocorrelations are summed in adjacent
/// pairs and the sum is truncated at the first non-positive pair, then
/// clipped below at 1. Needs at least 100 observations. A constant series
/// reports 1 with the degenerate flag set.
pub fn iat(series: &[f64]) -> Result<IatEstimate> {
    let n = series.len();
    if n < MIN_IAT_LEN {
        return Err(Error::Data(format!(
            "autocorrelation time needs at least {MIN_IAT_LEN} observations (got {n})"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0 = series.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if !(c0.is_finite() && c0 > 0.0) {
        if c0 == 0.0 {
            return Ok(IatEstimate { value: 1.0, degenerate: true });
        }
        return Err(Error::Numeric(format!(
            "series variance came out unusable ({c0})"
        )));
    }
    let autocov = |lag: usize| -> f64 {
        series[..n - lag]
            .iter()
            .zip(&series[lag..])
            .map(|(&a, &b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / n as f64
    };
    let max_lag = n / 3;
    // Pair sums Γ_m = ρ_{2m} + ρ_{2m+1} are positive under reversibility;
    // truncate at the first estimated pair that is not.
    let mut sum_pairs = 0.0;
    let mut m = 0;
    loop {
        let lag_a = 2 * m;
        let lag_b = 2 * m + 1;
        if lag_b > max_lag {
            break;
        }
        let gamma = (autocov(lag_a) + autocov(lag_b)) / c0;
        if gamma <= 0.0 {
            break;
        }
        sum_pairs += gamma;
        m += 1;
    }
    let value = (-1.0 + 2.0 * sum_pairs).max(1.0);
    Ok(IatEstimate { value, degenerate: false })
}

/// Effective sample size n / IAT of a series.
pub fn ess(series: &[f64]) -> Result<f64> {
    let est = iat(series)?;
    Ok(series.len() as f64 / est.value)
}

/// Average of `h` over the trace's first-point states with stored index
/// strictly greater than `burn_in` (so the initial state never counts).
/// Errors when the retained window is empty.
pub fn ergodic_average<F>(trace: &Trace, h: F, burn_in: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let total = trace.states.len();
    if burn_in + 1 >= total {
        return Err(Error::Data(format!(
            "burn-in {burn_in} leaves no states out of {total}"
        )));
    }
    let window = &trace.states[burn_in + 1..];
    let sum: f64 = window.iter().map(|s| h(&s.x)).sum();
    Ok(sum / window.len() as f64)
}

fn nearest_centre(point: &[f64], centres: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (k, c) in centres.iter().enumerate() {
        let d2: f64 = point.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best_d2 {
            best_d2 = d2;
            best = k;
        }
    }
    best
}

/// Classifies each point to its nearest centre (Euclidean) and returns
/// visit fractions, one per centre, summing to 1.
pub fn mode_occupancy_points(points: &[Vec<f64>], centres: &[Vec<f64>]) -> Result<Vec<f64>> {
    if centres.is_empty() {
        return Err(Error::Config("mode occupancy needs at least one centre".into()));
    }
    if points.is_empty() {
        return Err(Error::Data("mode occupancy needs at least one point".into()));
    }
    let mut counts = vec![0usize; centres.len()];
    for p in points {
        counts[nearest_centre(p, centres)] += 1;
    }
    Ok(counts
        .iter()
        .map(|&c| c as f64 / points.len() as f64)
        .collect())
}

/// Visit fractions of the trace's first-point states over the given mode
/// centres (nearest-centre classification).
pub fn mode_occupancy(trace: &Trace, centres: &[Vec<f64>]) -> Result<Vec<f64>> {
    let points: Vec<Vec<f64>> = trace.states.iter().map(|s| s.x.clone()).collect();
    mode_occupancy_points(&points, centres)
}

/// A 2-d marginal kernel density estimate evaluated on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeGrid {
    /// Grid coordinates along the first chosen axis.
    pub xs: Vec<f64>,
    /// Grid coordinates along the second chosen axis.
    pub ys: Vec<f64>,
    /// Density values; `density[iy][ix]` matches (`xs[ix]`, `ys[iy]`).
    pub density: Vec<Vec<f64>>,
}

/// Builds a plot-ready 2-d marginal KDE of the points over coordinates
/// `dims`, on a `resolution.0 × resolution.1` grid covering the data range
/// padded by 10% per side. Product Gaussian kernel with per-coordinate
/// data-driven bandwidths.
pub fn kde_grid(
    points: &[Vec<f64>],
    dims: (usize, usize),
    resolution: (usize, usize),
) -> Result<KdeGrid> {
    if points.len() < 2 {
        return Err(Error::Data(format!(
            "KDE grid needs at least 2 points (got {})",
            points.len()
        )));
    }
    if resolution.0 < 2 || resolution.1 < 2 {
        return Err(Error::Config(format!(
            "grid resolution must be at least 2 per axis (got {}×{})",
            resolution.0, resolution.1
        )));
    }
    let d = points[0].len();
    for (axis, label) in [(dims.0, "first"), (dims.1, "second")] {
        if axis >= d {
            return Err(Error::Config(format!(
                "{label} marginal axis {axis} out of range for {d}-dimensional points"
            )));
        }
    }
    let n = points.len();
    let col = |axis: usize| -> Vec<f64> { points.iter().map(|p| p[axis]).collect() };
    let ax = col(dims.0);
    let ay = col(dims.1);
    let bandwidth = |v: &[f64]| -> f64 {
        let sd = crate::math::variance(v).sqrt();
        let h = sd * (n as f64).powf(-1.0 / 6.0);
        if h.is_finite() && h > 0.0 {
            h
        } else {
            // Degenerate spread: fall back to a unit-scale bandwidth so the
            // grid is still drawable.
            1e-3
        }
    };
    let hx = bandwidth(&ax);
    let hy = bandwidth(&ay);
    let axis_grid = |v: &[f64], res: usize| -> Vec<f64> {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let pad = if span > 0.0 { 0.1 * span } else { 1.0 };
        let (lo, hi) = (lo - pad, hi + pad);
        (0..res)
            .map(|k| lo + (hi - lo) * k as f64 / (res - 1) as f64)
            .collect()
    };
    let xs = axis_grid(&ax, resolution.0);
    let ys = axis_grid(&ay, resolution.1);
    let norm = 1.0 / (n as f64 * 2.0 * std::f64::consts::PI * hx * hy);
    let density: Vec<Vec<f64>> = ys
        .iter()
        .map(|&gy| {
            xs.iter()
                .map(|&gx| {
                    let sum: f64 = ax
                        .iter()
                        .zip(&ay)
                        .map(|(&px, &py)| {
                            let zx = (gx - px) / hx;
                            let zy = (gy - py) / hy;
                            (-0.5 * (zx * zx + zy * zy)).exp()
                        })
                        .sum();
                    sum * norm
                })
                .collect()
        })
        .collect();
    Ok(KdeGrid { xs, ys, density })
}

/// Summary metrics of one completed run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiagnosticsReport {
    /// IAT of each first-point coordinate series, clipped at 1.
    pub iat_per_coordinate: Vec<f64>,
    /// Fraction of all executed moves accepted.
    pub global_acceptance: f64,
    /// Acceptance fraction per move kind actually attempted.
    pub per_move_acceptance: BTreeMap<String, f64>,
    /// Visit fractions over the supplied mode centres (empty when no
    /// centres were supplied).
    pub mode_occupancy: Vec<f64>,
    /// Effective sample size per coordinate: stored-state count / IAT.
    pub ess: Vec<f64>,
}

/// Assembles the standard report for a trace: per-coordinate IAT and ESS
/// over the stored first-point series, global and per-kind acceptance from
/// the move records, and mode occupancy when centres are supplied.
pub fn report(trace: &Trace, centres: Option<&[Vec<f64>]>) -> Result<DiagnosticsReport> {
    if trace.states.is_empty() {
        return Err(Error::Data("trace holds no states".into()));
    }
    if trace.records.is_empty() {
        return Err(Error::Data("trace holds no move records".into()));
    }
    let d = trace.states[0].dim();
    let t = trace.states.len();
    let mut iat_per_coordinate = Vec::with_capacity(d);
    let mut ess_v = Vec::with_capacity(d);
    for k in 0..d {
        let series: Vec<f64> = trace.states.iter().map(|s| s.x[k]).collect();
        let est = iat(&series)?;
        iat_per_coordinate.push(est.value);
        ess_v.push(t as f64 / est.value);
    }
    let mut attempted: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for rec in &trace.records {
        let entry = attempted.entry(rec.kind.as_str().to_string()).or_insert((0, 0));
        entry.0 += 1;
        if rec.accepted {
            entry.1 += 1;
        }
    }
    let per_move_acceptance = attempted
        .into_iter()
        .map(|(k, (tries, acc))| (k, acc as f64 / tries as f64))
        .collect();
    let mode_occ = match centres {
        Some(c) => mode_occupancy(trace, c)?,
        None => Vec::new(),
    };
    Ok(DiagnosticsReport {
        iat_per_coordinate,
        global_acceptance: trace.acceptance_rate(),
        per_move_acceptance,
        mode_occupancy: mode_occ,
        ess: ess_v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::targets::{builtin, Builtin};
    use crate::twalk::{run, KernelConfig};
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn iat_iid_noise_is_near_one() {
        let mut rng = stream_rng(0xC0FFEE, 50);
        let series: Vec<f64> = (0..100_000)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let est = iat(&series).unwrap();
        assert!(!est.degenerate);
        assert!((est.value - 1.0).abs() < 0.1, "IAT {}", est.value);
    }

    #[test]
    fn iat_ar1_matches_analytic_value() {
        // AR(1) with coefficient 0.5 has IAT (1+0.5)/(1−0.5) = 3.
        let mut rng = stream_rng(0xC0FFEE, 51);
        let mut series = Vec::with_capacity(1_000_000);
        let mut x = 0.0;
        for _ in 0..1_000_000 {
            let eps: f64 = rng.sample(rand_distr::StandardNormal);
            x = 0.5 * x + eps;
            series.push(x);
        }
        let est = iat(&series).unwrap();
        assert!((est.value - 3.0).abs() < 0.15, "IAT {}", est.value);
    }

    #[test]
    fn iat_alternating_series_truncates_to_one() {
        let series: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let est = iat(&series).unwrap();
        assert_eq!(est.value, 1.0);
        assert!(!est.degenerate);
    }

    #[test]
    fn iat_constant_series_is_degenerate() {
        let series = vec![2.5; 500];
        let est = iat(&series).unwrap();
        assert_eq!(est.value, 1.0);
        assert!(est.degenerate);
    }

    #[test]
    fn iat_short_series_is_an_error() {
        assert!(iat(&[1.0; 99]).is_err());
    }

    #[test]
    fn ess_of_iid_input_is_close_to_n() {
        let mut rng = stream_rng(0xC0FFEE, 52);
        let series: Vec<f64> = (0..50_000)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let e = ess(&series).unwrap();
        assert!(e <= series.len() as f64 + 1e-9);
        assert!(e > 0.9 * series.len() as f64, "ESS {e}");
    }

    fn short_trace(seed: u64, iters: u64) -> crate::trace::Trace {
        let t = builtin(Builtin::Example1);
        let cfg = KernelConfig { seed, ..KernelConfig::default() };
        run(&t, &cfg, &[0.0, 0.0], &[1.0, 1.0], iters, 1).unwrap()
    }

    #[test]
    fn ergodic_average_of_constant_is_exact() {
        let trace = short_trace(1, 500);
        let avg = ergodic_average(&trace, |_| 4.25, 100).unwrap();
        assert_eq!(avg, 4.25);
    }

    #[test]
    fn ergodic_average_rejects_empty_window() {
        let trace = short_trace(2, 200);
        assert!(ergodic_average(&trace, |x| x[0], 200).is_err());
        assert!(ergodic_average(&trace, |x| x[0], 300).is_err());
        assert!(ergodic_average(&trace, |x| x[0], 199).is_ok());
    }

    #[test]
    fn ergodic_average_matches_manual_sum() {
        let trace = short_trace(3, 300);
        let b = 50;
        let manual: f64 = trace.states[b + 1..]
            .iter()
            .map(|s| s.x[0])
            .sum::<f64>()
            / (trace.states.len() - b - 1) as f64;
        let avg = ergodic_average(&trace, |x| x[0], b).unwrap();
        assert_relative_eq!(avg, manual, max_relative = 1e-12);
    }

    #[test]
    fn mode_occupancy_classifies_by_nearest_centre() {
        let centres = vec![vec![0.0, 0.0], vec![10.0, 0.0]];
        let points = vec![
            vec![0.2, 0.1],
            vec![9.5, -0.3],
            vec![1.0, 1.0],
            vec![11.0, 0.0],
        ];
        let occ = mode_occupancy_points(&points, &centres).unwrap();
        assert_eq!(occ, vec![0.5, 0.5]);
        let all_first = mode_occupancy_points(&[vec![0.1, 0.0]], &centres).unwrap();
        assert_eq!(all_first, vec![1.0, 0.0]);
        assert!(mode_occupancy_points(&points, &[]).is_err());
    }

    #[test]
    fn occupancy_is_a_simplex_vector() {
        let trace = short_trace(4, 400);
        let centres = vec![vec![0.0, 0.0], vec![20.0, -20.0]];
        let occ = mode_occupancy(&trace, &centres).unwrap();
        assert_eq!(occ.len(), 2);
        assert!(occ.iter().all(|&f| (0.0..=1.0).contains(&f)));
        assert_relative_eq!(occ.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn kde_grid_shows_two_bumps_for_two_distant_clusters() {
        // Two tight clusters far apart relative to the data-driven
        // bandwidth: the grid must peak at each cluster and dip between.
        let mut rng = stream_rng(0xC0FFEE, 55);
        let mut points = Vec::new();
        for centre in [[0.0, 0.0], [10.0, 10.0]] {
            for _ in 0..100 {
                points.push(vec![
                    centre[0] + 0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal),
                    centre[1] + 0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal),
                ]);
            }
        }
        let g = kde_grid(&points, (0, 1), (61, 61)).unwrap();
        assert_eq!(g.xs.len(), 61);
        assert_eq!(g.density.len(), 61);
        let mut best = (0, 0);
        let mut best_v = -1.0;
        for (iy, row) in g.density.iter().enumerate() {
            for (ix, &v) in row.iter().enumerate() {
                if v > best_v {
                    best_v = v;
                    best = (ix, iy);
                }
            }
        }
        let cell_x = g.xs[1] - g.xs[0];
        let cell_y = g.ys[1] - g.ys[0];
        let near_a = (g.xs[best.0] - 0.0).abs() <= cell_x && (g.ys[best.1] - 0.0).abs() <= cell_y;
        let near_b =
            (g.xs[best.0] - 10.0).abs() <= cell_x && (g.ys[best.1] - 10.0).abs() <= cell_y;
        assert!(near_a || near_b, "argmax cell far from both cluster centres");
        // Both cluster centres dominate the midpoint: the two-bump shape.
        let value_at = |x: f64, y: f64| -> f64 {
            let ix = g.xs.iter().position(|&v| (v - x).abs() <= cell_x / 2.0 + 1e-12).unwrap();
            let iy = g.ys.iter().position(|&v| (v - y).abs() <= cell_y / 2.0 + 1e-12).unwrap();
            g.density[iy][ix]
        };
        let mid = value_at(5.0, 5.0);
        assert!(value_at(0.0, 0.0) > 2.0 * mid);
        assert!(value_at(10.0, 10.0) > 2.0 * mid);
    }

    #[test]
    fn kde_grid_mass_sums_to_one() {
        let mut rng = stream_rng(0xC0FFEE, 53);
        let points: Vec<Vec<f64>> = (0..400)
            .map(|_| {
                vec![
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                ]
            })
            .collect();
        let g = kde_grid(&points, (0, 1), (120, 120)).unwrap();
        let cell = (g.xs[1] - g.xs[0]) * (g.ys[1] - g.ys[0]);
        let mass: f64 = g.density.iter().flatten().sum::<f64>() * cell;
        assert!((mass - 1.0).abs() < 0.02, "grid mass {mass}");
    }

    #[test]
    fn kde_grid_is_translation_equivariant() {
        let mut rng = stream_rng(0xC0FFEE, 54);
        let points: Vec<Vec<f64>> = (0..100)
            .map(|_| {
                vec![
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                ]
            })
            .collect();
        let shifted: Vec<Vec<f64>> =
            points.iter().map(|p| vec![p[0] + 5.0, p[1] - 2.0]).collect();
        let g1 = kde_grid(&points, (0, 1), (50, 50)).unwrap();
        let g2 = kde_grid(&shifted, (0, 1), (50, 50)).unwrap();
        let argmax = |g: &KdeGrid| {
            let mut best = (0, 0);
            let mut best_v = -1.0;
            for (iy, row) in g.density.iter().enumerate() {
                for (ix, &v) in row.iter().enumerate() {
                    if v > best_v {
                        best_v = v;
                        best = (ix, iy);
                    }
                }
            }
            (g.xs[best.0], g.ys[best.1])
        };
        let (x1, y1) = argmax(&g1);
        let (x2, y2) = argmax(&g2);
        let cell_x = g1.xs[1] - g1.xs[0];
        let cell_y = g1.ys[1] - g1.ys[0];
        assert!((x2 - x1 - 5.0).abs() <= 1.5 * cell_x, "x argmax moved {}", x2 - x1);
        assert!((y2 - y1 + 2.0).abs() <= 1.5 * cell_y, "y argmax moved {}", y2 - y1);
    }

    #[test]
    fn kde_grid_input_validation() {
        assert!(kde_grid(&[vec![0.0, 0.0]], (0, 1), (10, 10)).is_err());
        let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        assert!(kde_grid(&pts, (0, 1), (1, 10)).is_err());
        assert!(kde_grid(&pts, (0, 2), (10, 10)).is_err());
        // A constant coordinate still draws via the fallback bandwidth.
        let flat = vec![vec![0.0, 3.0], vec![1.0, 3.0], vec![2.0, 3.0]];
        assert!(kde_grid(&flat, (0, 1), (10, 10)).is_ok());
    }

    #[test]
    fn report_assembles_consistent_fields() {
        let trace = short_trace(5, 2000);
        let centres = vec![vec![0.0, 0.0], vec![20.0, -20.0]];
        let rep = report(&trace, Some(&centres)).unwrap();
        assert_eq!(rep.iat_per_coordinate.len(), 2);
        assert_eq!(rep.ess.len(), 2);
        assert!(rep.iat_per_coordinate.iter().all(|&v| v >= 1.0));
        let t = trace.states.len() as f64;
        for (e, i) in rep.ess.iter().zip(&rep.iat_per_coordinate) {
            assert_relative_eq!(*e, t / i, max_relative = 1e-12);
            assert!(*e <= t + 1e-9);
        }
        assert!((0.0..=1.0).contains(&rep.global_acceptance));
        for v in rep.per_move_acceptance.values() {
            assert!((0.0..=1.0).contains(v));
        }
        // Global acceptance is the attempt-weighted mix of per-kind rates.
        let mut weighted = 0.0;
        for (kind, rate) in &rep.per_move_acceptance {
            let attempts = trace
                .records
                .iter()
                .filter(|r| r.kind.as_str() == kind)
                .count() as f64;
            weighted += rate * attempts;
        }
        assert_relative_eq!(
            weighted / trace.records.len() as f64,
            rep.global_acceptance,
            max_relative = 1e-12
        );
        assert_eq!(rep.mode_occupancy.len(), 2);
        let no_centres = report(&trace, None).unwrap();
        assert!(no_centres.mode_occupancy.is_empty());
    }
}
