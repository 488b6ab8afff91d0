//! The extended-state t-walk kernel: a pair of coupled points, the four
//! scale-free base moves (walk, traverse, hop, blow), scheduling of the
//! fifth penalised move, MH acceptance in log space, and the run driver.
//!
//! The chain state is a pair (x, y) targeting the product density
//! γ(x)·γ(y). Each base move updates one point of the pair (fair coin),
//! using the other as a companion that sets the proposal's location and
//! scale — which is what makes the kernel invariant under affine changes of
//! coordinates without any tuning.

use crate::error::{Error, Result};
use crate::penalty::{penalised_move, PenaltyConfig, PenaltyVariant};
use crate::rng::{stream_rng, STREAM_CHAIN};
use crate::targets::Target;
use crate::trace::{RunMeta, Trace};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// The coupled pair of chain points with cached log-densities.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    /// First point.
    pub x: Vec<f64>,
    /// Second point.
    pub y: Vec<f64>,
    /// Cached log γ(x); always equals a fresh evaluation.
    pub log_gamma_x: f64,
    /// Cached log γ(y); always equals a fresh evaluation.
    pub log_gamma_y: f64,
}

impl PairState {
    /// Dimension of each point.
    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// The move kinds of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    /// Small relative perturbation towards/away from the companion.
    Walk,
    /// Jump across the companion (the long-range base move).
    Traverse,
    /// Bold Gaussian jump around the current point, scaled by the pair
    /// separation.
    Hop,
    /// Bold Gaussian jump around the companion, scaled by the pair
    /// separation.
    Blow,
    /// The penalised midpoint-translation move.
    Penalty,
}

impl MoveKind {
    /// Stable lowercase name used in traces and reports.
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Walk => "walk",
            Self::Traverse => "traverse",
            Self::Hop => "hop",
            Self::Blow => "blow",
            Self::Penalty => "penalty",
        }
    }
}

impl std::fmt::Display for MoveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MoveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "walk" => Ok(Self::Walk),
            "traverse" => Ok(Self::Traverse),
            "hop" => Ok(Self::Hop),
            "blow" => Ok(Self::Blow),
            "penalty" => Ok(Self::Penalty),
            other => Err(Error::Parse(format!("unknown move kind '{other}'"))),
        }
    }
}

/// Bookkeeping for one executed move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveRecord {
    /// 1-based iteration number within the run (0 until the driver fills it).
    pub iter: u64,
    /// Which move was attempted.
    pub kind: MoveKind,
    /// Whether the proposal was accepted.
    pub accepted: bool,
    /// Log MH ratio of the attempt (−∞ for forced rejections).
    pub log_mh_ratio: f64,
    /// Trial count of the penalised rejection sampler, when applicable.
    pub rejection_trials: Option<u32>,
    /// Set when the penalised sampler failed (trial cap or unusable
    /// gradient); the move is then a recorded rejection.
    pub sampler_failure: bool,
}

/// Full kernel configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Probabilities of walk, traverse, hop, blow given that a base move was
    /// scheduled; must sum to 1.
    pub base_move_probs: [f64; 4],
    /// Per-step probability of scheduling the penalised move instead of a
    /// base move; in [0, 1].
    pub penalty_prob: f64,
    /// Walk move shape parameter a_w.
    pub walk_param: f64,
    /// Traverse move shape parameter a_t.
    pub traverse_param: f64,
    /// Expected number of coordinates updated per walk/traverse proposal,
    /// n₁: each eligible coordinate enters the update set with probability
    /// min(d, n₁)/d.
    pub coord_update_target: usize,
    /// Penalised-move configuration.
    pub penalty: PenaltyConfig,
    /// RNG seed for the run.
    pub seed: u64,
}

impl Default for KernelConfig {
    /// Reference kernel weights (walk/traverse dominant, rare hop/blow),
    /// a_w = 1.5, a_t = 6, n₁ = 4, penalty probability 0.1.
    fn default() -> Self {
        Self {
            base_move_probs: [0.4918, 0.4918, 0.0082, 0.0082],
            penalty_prob: 0.1,
            walk_param: 1.5,
            traverse_param: 6.0,
            coord_update_target: 4,
            penalty: PenaltyConfig::default(),
            seed: 0,
        }
    }
}

impl KernelConfig {
    /// Validates probabilities and move parameters.
    pub fn validate(&self) -> Result<()> {
        if self.base_move_probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config("base move probabilities must be nonnegative".into()));
        }
        let sum: f64 = self.base_move_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "base move probabilities must sum to 1 (got {sum})"
            )));
        }
        if !(0.0..=1.0).contains(&self.penalty_prob) {
            return Err(Error::Config(format!(
                "penalty probability must lie in [0, 1] (got {})",
                self.penalty_prob
            )));
        }
        if !(self.walk_param.is_finite() && self.walk_param > 0.0) {
            return Err(Error::Config("walk parameter must be positive".into()));
        }
        if !(self.traverse_param.is_finite() && self.traverse_param > 1.0) {
            return Err(Error::Config("traverse parameter must exceed 1".into()));
        }
        if self.coord_update_target == 0 {
            return Err(Error::Config("coordinate update target must be at least 1".into()));
        }
        self.penalty.validate()
    }
}

/// Builds the initial pair state, checking dimensions, support membership,
/// and coordinate-wise distinctness of the two starting points.
pub fn init_chain(
    target: &dyn Target,
    x0: &[f64],
    y0: &[f64],
    cfg: &KernelConfig,
) -> Result<PairState> {
    cfg.validate()?;
    let d = target.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    if y0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: y0.len() });
    }
    if let Some(i) = (0..d).find(|&i| x0[i] == y0[i]) {
        return Err(Error::Init(format!(
            "starting points share coordinate {i} exactly; \
             jitter one of them so every coordinate differs"
        )));
    }
    if cfg.penalty_prob > 0.0
        && cfg.penalty.variant == PenaltyVariant::Gradient
        && !target.has_gradient()
    {
        return Err(Error::Config(
            "gradient penalty variant requires a target with a gradient".into(),
        ));
    }
    let log_gamma_x = target.log_gamma(x0);
    let log_gamma_y = target.log_gamma(y0);
    if !log_gamma_x.is_finite() {
        return Err(Error::Init(format!(
            "starting point x0 has non-finite log-density {log_gamma_x}"
        )));
    }
    if !log_gamma_y.is_finite() {
        return Err(Error::Init(format!(
            "starting point y0 has non-finite log-density {log_gamma_y}"
        )));
    }
    Ok(PairState {
        x: x0.to_vec(),
        y: y0.to_vec(),
        log_gamma_x,
        log_gamma_y,
    })
}

/// One proposal built by a base move.
struct BaseProposal {
    /// Proposed replacement for the updated point.
    h: Vec<f64>,
    /// Log Hastings correction (log q_rev − log q_fwd).
    log_hastings: f64,
    /// Indices the proposal actually perturbed.
    updated: Vec<usize>,
}

/// Executes one base move of the given kind: picks which pair point to
/// update by fair coin, proposes via the move's recipe, and applies the MH
/// test in log space. Rejection is a normal outcome — this never fails.
pub fn base_move<R: Rng + ?Sized>(
    state: &PairState,
    kind: MoveKind,
    target: &dyn Target,
    cfg: &KernelConfig,
    rng: &mut R,
) -> (PairState, MoveRecord) {
    debug_assert!(kind != MoveKind::Penalty, "penalty move has its own entry point");
    let d = state.dim();
    let update_x = rng.random::<f64>() < 0.5;
    let (point, companion, lg_point) = if update_x {
        (&state.x, &state.y, state.log_gamma_x)
    } else {
        (&state.y, &state.x, state.log_gamma_y)
    };

    // Coordinates where the pair coincides exactly would make the moves
    // degenerate; they are excluded from the update set for this step.
    let eligible: Vec<usize> = (0..d).filter(|&i| point[i] != companion[i]).collect();
    let pphi = d.min(cfg.coord_update_target) as f64 / d as f64;

    let proposal = match kind {
        MoveKind::Walk => propose_walk(point, companion, &eligible, pphi, cfg.walk_param, rng),
        MoveKind::Traverse => {
            propose_traverse(point, companion, &eligible, pphi, cfg.traverse_param, rng)
        }
        MoveKind::Hop => propose_hop(point, companion, &eligible, pphi, rng),
        MoveKind::Blow => propose_blow(point, companion, &eligible, pphi, rng),
        MoveKind::Penalty => unreachable!(),
    };

    // A proposed coordinate that lands exactly on the companion's value
    // would freeze the pair; such proposals are rejected outright.
    let collided = proposal.updated.iter().any(|&i| proposal.h[i] == companion[i]);

    let (log_mh, lg_h) = if collided {
        (f64::NEG_INFINITY, f64::NAN)
    } else if proposal.updated.is_empty() {
        // Identity proposal: accepted with probability 1.
        (0.0, lg_point)
    } else {
        let lg_h = target.log_gamma(&proposal.h);
        (lg_h - lg_point + proposal.log_hastings, lg_h)
    };

    let omega: f64 = rng.random();
    // The −∞ check keeps forced rejections rejected even in the
    // measure-zero event that ω draws exactly 0.
    let accepted = log_mh > f64::NEG_INFINITY && omega.ln() <= log_mh;
    let new_state = if accepted {
        if update_x {
            PairState {
                x: proposal.h,
                y: state.y.clone(),
                log_gamma_x: lg_h,
                log_gamma_y: state.log_gamma_y,
            }
        } else {
            PairState {
                x: state.x.clone(),
                y: proposal.h,
                log_gamma_x: state.log_gamma_x,
                log_gamma_y: lg_h,
            }
        }
    } else {
        state.clone()
    };
    let record = MoveRecord {
        iter: 0,
        kind,
        accepted,
        log_mh_ratio: log_mh,
        rejection_trials: None,
        sampler_failure: false,
    };
    (new_state, record)
}

/// Walk: per selected coordinate, h_i = x_i + (x_i − c_i)·z with z drawn
/// from the reference walk density (support [−a/(1+a), a]); the Hastings
/// ratio of this proposal is exactly 1.
fn propose_walk<R: Rng + ?Sized>(
    point: &[f64],
    companion: &[f64],
    eligible: &[usize],
    pphi: f64,
    aw: f64,
    rng: &mut R,
) -> BaseProposal {
    let mut h = point.to_vec();
    let mut updated = Vec::new();
    for &i in eligible {
        if rng.random::<f64>() < pphi {
            let u: f64 = rng.random();
            let z = (aw / (1.0 + aw)) * (aw * u * u + 2.0 * u - 1.0);
            h[i] = point[i] + (point[i] - companion[i]) * z;
            updated.push(i);
        }
    }
    BaseProposal { h, log_hastings: 0.0, updated }
}

/// Traverse: h_i = c_i + β·(c_i − x_i) on the selected coordinates, with β
/// drawn from the reference two-branch density; Hastings correction
/// (n_changed − 2)·ln β.
fn propose_traverse<R: Rng + ?Sized>(
    point: &[f64],
    companion: &[f64],
    eligible: &[usize],
    pphi: f64,
    at: f64,
    rng: &mut R,
) -> BaseProposal {
    let branch: f64 = rng.random();
    let value: f64 = rng.random();
    let beta = if branch < (at - 1.0) / (2.0 * at) {
        value.powf(1.0 / (at + 1.0))
    } else {
        value.powf(1.0 / (1.0 - at))
    };
    let mut h = point.to_vec();
    let mut updated = Vec::new();
    for &i in eligible {
        if rng.random::<f64>() < pphi {
            h[i] = companion[i] + beta * (companion[i] - point[i]);
            updated.push(i);
        }
    }
    let log_hastings = if updated.is_empty() {
        0.0
    } else {
        (updated.len() as f64 - 2.0) * beta.ln()
    };
    BaseProposal { h, log_hastings, updated }
}

/// Hop: Gaussian jump around the current point with scale
/// max_i |x_i − c_i| / 3 over the selected coordinates; the reverse density
/// uses the scale recomputed at the proposal.
fn propose_hop<R: Rng + ?Sized>(
    point: &[f64],
    companion: &[f64],
    eligible: &[usize],
    pphi: f64,
    rng: &mut R,
) -> BaseProposal {
    let updated: Vec<usize> = eligible
        .iter()
        .copied()
        .filter(|_| rng.random::<f64>() < pphi)
        .collect();
    if updated.is_empty() {
        return BaseProposal { h: point.to_vec(), log_hastings: 0.0, updated };
    }
    let sigma = updated
        .iter()
        .map(|&i| (point[i] - companion[i]).abs())
        .fold(0.0, f64::max)
        / 3.0;
    let mut h = point.to_vec();
    for &i in &updated {
        let xi: f64 = rng.sample(StandardNormal);
        h[i] = point[i] + sigma * xi;
    }
    let sigma_rev = updated
        .iter()
        .map(|&i| (h[i] - companion[i]).abs())
        .fold(0.0, f64::max)
        / 3.0;
    let n = updated.len() as f64;
    // −log q, dropping the 2π constants that cancel between directions.
    let fwd: f64 = n * sigma.ln()
        + updated
            .iter()
            .map(|&i| (h[i] - point[i]).powi(2))
            .sum::<f64>()
            / (2.0 * sigma * sigma);
    let rev: f64 = n * sigma_rev.ln()
        + updated
            .iter()
            .map(|&i| (point[i] - h[i]).powi(2))
            .sum::<f64>()
            / (2.0 * sigma_rev * sigma_rev);
    BaseProposal { h, log_hastings: fwd - rev, updated }
}

/// Blow: Gaussian jump around the companion with scale max_i |c_i − x_i|
/// over the selected coordinates; both proposal directions are centred at
/// the companion, the reverse with scale recomputed from the proposal.
fn propose_blow<R: Rng + ?Sized>(
    point: &[f64],
    companion: &[f64],
    eligible: &[usize],
    pphi: f64,
    rng: &mut R,
) -> BaseProposal {
    let updated: Vec<usize> = eligible
        .iter()
        .copied()
        .filter(|_| rng.random::<f64>() < pphi)
        .collect();
    if updated.is_empty() {
        return BaseProposal { h: point.to_vec(), log_hastings: 0.0, updated };
    }
    let sigma = updated
        .iter()
        .map(|&i| (companion[i] - point[i]).abs())
        .fold(0.0, f64::max);
    let mut h = point.to_vec();
    for &i in &updated {
        let xi: f64 = rng.sample(StandardNormal);
        h[i] = companion[i] + sigma * xi;
    }
    let sigma_rev = updated
        .iter()
        .map(|&i| (companion[i] - h[i]).abs())
        .fold(0.0, f64::max);
    let n = updated.len() as f64;
    let fwd: f64 = n * sigma.ln()
        + updated
            .iter()
            .map(|&i| (h[i] - companion[i]).powi(2))
            .sum::<f64>()
            / (2.0 * sigma * sigma);
    let rev: f64 = n * sigma_rev.ln()
        + updated
            .iter()
            .map(|&i| (point[i] - companion[i]).powi(2))
            .sum::<f64>()
            / (2.0 * sigma_rev * sigma_rev);
    BaseProposal { h, log_hastings: fwd - rev, updated }
}

/// One kernel step: schedules the penalised move with probability
/// `penalty_prob`, otherwise a base move drawn from `base_move_probs`. A
/// single uniform draw drives the whole selection.
pub fn step<R: Rng + ?Sized>(
    state: &PairState,
    target: &dyn Target,
    cfg: &KernelConfig,
    rng: &mut R,
) -> (PairState, MoveRecord) {
    let u: f64 = rng.random();
    if u < cfg.penalty_prob {
        return penalised_move(state, target, &cfg.penalty, rng);
    }
    // Rescale the remaining mass onto the base-move distribution.
    let rescaled = (u - cfg.penalty_prob) / (1.0 - cfg.penalty_prob);
    let kinds = [MoveKind::Walk, MoveKind::Traverse, MoveKind::Hop, MoveKind::Blow];
    let mut acc = 0.0;
    let mut kind = MoveKind::Blow;
    for (k, p) in kinds.iter().zip(&cfg.base_move_probs) {
        acc += p;
        if rescaled < acc {
            kind = *k;
            break;
        }
    }
    base_move(state, kind, target, cfg, rng)
}

/// Runs the chain for `iters` steps from (x0, y0), recording every move and
/// storing the initial state plus every `thin`-th state. Deterministic for a
/// fixed (target, config, starting points).
pub fn run(
    target: &dyn Target,
    cfg: &KernelConfig,
    x0: &[f64],
    y0: &[f64],
    iters: u64,
    thin: u64,
) -> Result<Trace> {
    if iters == 0 {
        return Err(Error::Config("iteration count must be at least 1".into()));
    }
    if thin == 0 {
        return Err(Error::Config("thinning interval must be at least 1".into()));
    }
    let mut state = init_chain(target, x0, y0, cfg)?;
    let mut rng = stream_rng(cfg.seed, STREAM_CHAIN);
    let mut records = Vec::with_capacity(iters as usize);
    let mut states = Vec::with_capacity((iters / thin) as usize + 1);
    states.push(state.clone());
    for i in 1..=iters {
        let (next, mut rec) = step(&state, target, cfg, &mut rng);
        rec.iter = i;
        records.push(rec);
        state = next;
        if i % thin == 0 {
            states.push(state.clone());
        }
    }
    let meta = RunMeta {
        target: target.name().to_string(),
        dim: target.dim(),
        iters,
        thin,
        x0: x0.to_vec(),
        y0: y0.to_vec(),
        kernel: *cfg,
    };
    Ok(Trace {
        records,
        states,
        thin,
        meta: Some(meta),
    })
}
