//! Merging two mode-trapped samples into one correctly weighted sample.
//!
//! Each input sample is treated as draws from the target restricted to one
//! region (one normalising constant per region). A leave-one-out KDE built
//! from a region's own points gives, at each point, an unbiased estimator
//! of that region's reciprocal normalising constant; a two-region
//! pseudo-marginal index chain then jumps between the samples with an
//! acceptance probability formed from leave-one-out averages of those
//! estimators, so region occupancy converges to the relative region
//! masses. The procedure is approximate — its accuracy rests on the
//! regions being far apart relative to the KDE bandwidths — and a warning
//! flag reports overlapping inputs.

use crate::error::{Error, Result};
use crate::math::{logsumexp, variance};
use crate::targets::Target;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One region's sample with cached log-densities.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSample {
    /// Sample points, one per row.
    pub points: Vec<Vec<f64>>,
    /// Region label, 1 or 2.
    pub region_id: u8,
    /// Cached log γ at each point; always finite.
    pub log_gamma_at_points: Vec<f64>,
}

impl RegionSample {
    /// Builds a region sample, evaluating and caching log γ at every point.
    /// Requires at least two points (leave-one-out needs a remainder), equal
    /// dimensions, and finite log-density everywhere.
    pub fn new(points: Vec<Vec<f64>>, region_id: u8, target: &dyn Target) -> Result<Self> {
        if !(region_id == 1 || region_id == 2) {
            return Err(Error::Config(format!(
                "region id must be 1 or 2 (got {region_id})"
            )));
        }
        if points.len() < 2 {
            return Err(Error::Data(format!(
                "region {region_id} sample needs at least 2 points (got {})",
                points.len()
            )));
        }
        let d = target.dim();
        let mut log_gamma_at_points = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: p.len() });
            }
            let lg = target.log_gamma(p);
            if !lg.is_finite() {
                return Err(Error::Data(format!(
                    "point {i} of region {region_id} has non-finite log-density {lg} \
                     (outside the target support?)"
                )));
            }
            log_gamma_at_points.push(lg);
        }
        Ok(Self { points, region_id, log_gamma_at_points })
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false: construction requires ≥ 2 points.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Dimension of the points.
    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

/// Per-coordinate bandwidth selection for the product-Gaussian KDE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    /// h_k = σ̂_k · N^{−1/(d+4)}.
    Scott,
    /// h_k = σ̂_k · (4/(d+2))^{1/(d+4)} · N^{−1/(d+4)}.
    Silverman,
    /// The same fixed bandwidth on every coordinate.
    Fixed {
        /// Bandwidth value; must be positive.
        h: f64,
    },
}

/// Leave-one-out KDE configuration (product Gaussian kernel).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LooKdeConfig {
    /// How per-coordinate bandwidths are chosen.
    pub bandwidth_rule: BandwidthRule,
}

impl Default for LooKdeConfig {
    fn default() -> Self {
        Self { bandwidth_rule: BandwidthRule::Scott }
    }
}

/// Computes the per-coordinate KDE bandwidths for a sample under the
/// configured rule. Every bandwidth must come out positive and finite.
pub fn bandwidths(sample: &RegionSample, cfg: &LooKdeConfig) -> Result<Vec<f64>> {
    let n = sample.len();
    let d = sample.dim();
    let hs: Vec<f64> = match cfg.bandwidth_rule {
        BandwidthRule::Fixed { h } => vec![h; d],
        rule => {
            let factor = match rule {
                BandwidthRule::Scott => 1.0,
                BandwidthRule::Silverman => (4.0 / (d as f64 + 2.0)).powf(1.0 / (d as f64 + 4.0)),
                BandwidthRule::Fixed { .. } => unreachable!(),
            };
            let n_pow = (n as f64).powf(-1.0 / (d as f64 + 4.0));
            (0..d)
                .map(|k| {
                    let col: Vec<f64> = sample.points.iter().map(|p| p[k]).collect();
                    factor * variance(&col).sqrt() * n_pow
                })
                .collect()
        }
    };
    if let Some(k) = hs.iter().position(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(Error::Data(format!(
            "KDE bandwidth for coordinate {k} is not positive (got {}); \
             the sample may be constant along it",
            hs[k]
        )));
    }
    Ok(hs)
}

/// Log of the product-Gaussian kernel density with bandwidths `hs`,
/// centred at `centre`, evaluated at `x`.
fn log_kernel(x: &[f64], centre: &[f64], hs: &[f64], log_norm: f64) -> f64 {
    let mut q = 0.0;
    for ((a, b), h) in x.iter().zip(centre).zip(hs) {
        let z = (a - b) / h;
        q += z * z;
    }
    -0.5 * q - log_norm
}

/// Σ_k ln h_k + (d/2)·ln 2π, the log normalising constant shared by every
/// kernel term.
fn kernel_log_norm(hs: &[f64]) -> f64 {
    hs.iter().map(|h| h.ln()).sum::<f64>()
        + 0.5 * hs.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}

fn check_index(sample: &RegionSample, i: usize) -> Result<()> {
    if i >= sample.len() {
        return Err(Error::Data(format!(
            "leave-one-out index {i} out of range for a sample of {} points",
            sample.len()
        )));
    }
    Ok(())
}

/// Log of the leave-one-out KDE built from all of `sample` except point
/// `i`, evaluated at `x`.
fn log_kde_loo(sample: &RegionSample, hs: &[f64], i: usize, x: &[f64]) -> f64 {
    let log_norm = kernel_log_norm(hs);
    let terms: Vec<f64> = sample
        .points
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != i)
        .map(|(_, p)| log_kernel(x, p, hs, log_norm))
        .collect();
    logsumexp(&terms) - (terms.len() as f64).ln()
}

/// Evaluates the leave-one-out KDE — the density estimate built from all
/// of `sample` except point `i` — at an arbitrary point `x`. The result is
/// a proper density: it integrates to 1 over ℝ^d.
pub fn kde_eval_loo(
    sample: &RegionSample,
    cfg: &LooKdeConfig,
    i: usize,
    x: &[f64],
) -> Result<f64> {
    check_index(sample, i)?;
    if x.len() != sample.dim() {
        return Err(Error::DimensionMismatch { expected: sample.dim(), got: x.len() });
    }
    let hs = bandwidths(sample, cfg)?;
    Ok(log_kde_loo(sample, &hs, i, x).exp())
}

fn log_unbiased_ratio_with(sample: &RegionSample, hs: &[f64], i: usize) -> f64 {
    log_kde_loo(sample, hs, i, &sample.points[i]) - sample.log_gamma_at_points[i]
}

/// The reciprocal-normalising-constant estimator at point `i`: the
/// leave-one-out KDE evaluated at the point, divided by the unnormalised
/// target density there (computed in log space). With exact independent
/// draws from a region whose mass the KDE keeps inside the region, its
/// expectation is the reciprocal of that region's normalising constant.
pub fn unbiased_ratio(sample: &RegionSample, cfg: &LooKdeConfig, i: usize) -> Result<f64> {
    check_index(sample, i)?;
    let hs = bandwidths(sample, cfg)?;
    Ok(log_unbiased_ratio_with(sample, &hs, i).exp())
}

/// Position of the two-region index chain: region `m` (1 or 2) and a
/// 0-based point index `i` within that region's sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexChainState {
    /// Current region, 1 or 2.
    pub m: u8,
    /// Current 0-based index into that region's sample.
    pub i: usize,
}

/// Leave-one-out mean of `ratios` excluding index `i`, given the
/// precomputed total sum.
fn loo_mean(total: f64, ratios: &[f64], i: usize) -> f64 {
    (total - ratios[i]) / (ratios.len() as f64 - 1.0)
}

fn jump_step_with_totals<R: Rng + ?Sized>(
    state: IndexChainState,
    ratios_1: &[f64],
    ratios_2: &[f64],
    total_1: f64,
    total_2: f64,
    rng: &mut R,
) -> (IndexChainState, bool) {
    let (cur, cur_total, opp, opp_total) = if state.m == 1 {
        (ratios_1, total_1, ratios_2, total_2)
    } else {
        (ratios_2, total_2, ratios_1, total_1)
    };
    let j = rng.random_range(0..opp.len());
    // Acceptance: leave-one-out average of the current region's ratio
    // estimates over that of the proposed region. Both draws happen every
    // step so the random stream stays aligned across accept/reject.
    let alpha = loo_mean(cur_total, cur, state.i) / loo_mean(opp_total, opp, j);
    let u: f64 = rng.random();
    if u < alpha {
        (IndexChainState { m: 3 - state.m, i: j }, true)
    } else {
        (state, false)
    }
}

/// One step of the two-region index chain: proposes the opposite region
/// with a uniformly drawn index and accepts with probability
/// min{1, r̄_current / r̄_proposed}, where r̄ is the leave-one-out average
/// of the region's ratio estimates (the current position's own estimate is
/// left out on the current side, the proposed position's on the proposed
/// side). Rejection keeps the state. Recomputes the ratio sums on every
/// call (O(N)); the run driver amortises them.
pub fn jump_step<R: Rng + ?Sized>(
    state: IndexChainState,
    ratios_1: &[f64],
    ratios_2: &[f64],
    rng: &mut R,
) -> IndexChainState {
    let total_1: f64 = ratios_1.iter().sum();
    let total_2: f64 = ratios_2.iter().sum();
    jump_step_with_totals(state, ratios_1, ratios_2, total_1, total_2, rng).0
}

/// Everything produced by [`combine_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct CombineResult {
    /// The index-chain trajectory: the initial state followed by one entry
    /// per iteration.
    pub index_trace: Vec<IndexChainState>,
    /// The materialised combined sample: the point each index-trace entry
    /// refers to, in order.
    pub points: Vec<Vec<f64>>,
    /// Fraction of proposals accepted.
    pub acceptance: f64,
    /// Fraction of index-trace entries in region 1 and region 2.
    pub occupancy: [f64; 2],
    /// Per-coordinate KDE bandwidths used for region 1.
    pub bandwidth_1: Vec<f64>,
    /// Per-coordinate KDE bandwidths used for region 2.
    pub bandwidth_2: Vec<f64>,
    /// Set when some cross-region point pair sits within one combined
    /// bandwidth on every coordinate — the disjoint-region assumption is
    /// then suspect and the combined weights unreliable.
    pub overlap_warning: bool,
}

/// Runs the full combination: precomputes both regions' ratio estimates
/// once (in parallel), then drives the index chain for `iters` steps from
/// region 1, index 0, materialising the visited points.
///
/// The ratio estimates are used in a normalised form (a single common
/// scale factor divided out), so rescaling the target density — which
/// shifts every log-ratio by the same constant — leaves the chain's
/// acceptance probabilities unchanged.
pub fn combine_run<R: Rng + ?Sized>(
    sample_1: &RegionSample,
    sample_2: &RegionSample,
    cfg: &LooKdeConfig,
    iters: u64,
    rng: &mut R,
) -> Result<CombineResult> {
    if iters == 0 {
        return Err(Error::Config("combine run needs at least 1 iteration".into()));
    }
    if sample_1.dim() != sample_2.dim() {
        return Err(Error::DimensionMismatch {
            expected: sample_1.dim(),
            got: sample_2.dim(),
        });
    }
    let h1 = bandwidths(sample_1, cfg)?;
    let h2 = bandwidths(sample_2, cfg)?;

    let log_ratios = |sample: &RegionSample, hs: &[f64]| -> Vec<f64> {
        (0..sample.len())
            .into_par_iter()
            .map(|i| log_unbiased_ratio_with(sample, hs, i))
            .collect()
    };
    let lr1 = log_ratios(sample_1, &h1);
    let lr2 = log_ratios(sample_2, &h2);
    if let Some(bad) = lr1.iter().chain(&lr2).find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "ratio estimate came out non-finite ({bad}); \
             check bandwidths and sample spread"
        )));
    }
    // One shared shift keeps the normalised ratios well scaled without
    // disturbing any ratio *between* estimates.
    let shift = lr1
        .iter()
        .chain(&lr2)
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let r1: Vec<f64> = lr1.iter().map(|v| (v - shift).exp()).collect();
    let r2: Vec<f64> = lr2.iter().map(|v| (v - shift).exp()).collect();
    let total_1: f64 = r1.iter().sum();
    let total_2: f64 = r2.iter().sum();

    let overlap_warning = sample_1.points.par_iter().any(|p| {
        sample_2.points.iter().any(|q| {
            p.iter()
                .zip(q)
                .zip(h1.iter().zip(&h2))
                .all(|((a, b), (ha, hb))| (a - b).abs() <= ha + hb)
        })
    });

    let mut state = IndexChainState { m: 1, i: 0 };
    let mut index_trace = Vec::with_capacity(iters as usize + 1);
    index_trace.push(state);
    let mut accepted = 0u64;
    for _ in 0..iters {
        let (next, was_accepted) =
            jump_step_with_totals(state, &r1, &r2, total_1, total_2, rng);
        if was_accepted {
            accepted += 1;
        }
        state = next;
        index_trace.push(state);
    }

    let points: Vec<Vec<f64>> = index_trace
        .iter()
        .map(|s| {
            let sample = if s.m == 1 { sample_1 } else { sample_2 };
            sample.points[s.i].clone()
        })
        .collect();
    let in_region_1 = index_trace.iter().filter(|s| s.m == 1).count() as f64;
    let n_states = index_trace.len() as f64;
    Ok(CombineResult {
        index_trace,
        points,
        acceptance: accepted as f64 / iters as f64,
        occupancy: [in_region_1 / n_states, 1.0 - in_region_1 / n_states],
        bandwidth_1: h1,
        bandwidth_2: h2,
        overlap_warning,
    })
}

/// Validation baseline: draws `n` points by picking region 1 with
/// probability `w1` (else region 2) and then a uniform index within the
/// chosen sample. Returns (region label, point) pairs. Requires the true
/// weights to sum to 1.
pub fn resample_oracle<R: Rng + ?Sized>(
    sample_1: &RegionSample,
    sample_2: &RegionSample,
    w1: f64,
    w2: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<(u8, Vec<f64>)>> {
    if !(w1.is_finite() && w2.is_finite() && w1 >= 0.0 && w2 >= 0.0) {
        return Err(Error::Config("resampling weights must be nonnegative".into()));
    }
    if (w1 + w2 - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "resampling weights must sum to 1 (got {})",
            w1 + w2
        )));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (label, sample) = if rng.random::<f64>() < w1 {
            (1u8, sample_1)
        } else {
            (2u8, sample_2)
        };
        let i = rng.random_range(0..sample.len());
        out.push((label, sample.points[i].clone()));
    }
    Ok(out)
}
