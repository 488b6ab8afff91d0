//! Penalised-proposal machinery: penalty shapes, the two proposal samplers,
//! normalising-constant estimation, and the penalised MH move on pair states.
//!
//! The penalised move proposes a fresh midpoint location `w` from a
//! location-scale proposal `g` centred at the current pair midpoint, with the
//! density *penalised* near that midpoint: the effective proposal is `g·φ/𝔷`,
//! where the penalty `φ` vanishes at the midpoint and approaches 1 far away.
//! Since the pair `(x, y)` tends to straddle the mode it currently explores,
//! suppressing proposals near the midpoint drives `w` — and with it the
//! translated pair — towards other regions, at an O(1) expected rejection
//! cost that provably does not depend on the current state.
//!
//! Two sampler variants are provided:
//! - a rejection sampler for distance-based penalties (Gaussian, flipped-t,
//!   bump), whose trial count is geometric with a state-free success rate 𝔷;
//! - a flip sampler for the gradient penalty (a Barker-style sigmoid in the
//!   local gradient direction), which needs exactly one `g` draw.

use crate::error::{Error, Result};
use crate::math::ln_gamma;
use crate::targets::Target;
use crate::twalk::{MoveKind, MoveRecord, PairState};
use rand::Rng;
use rand_distr::{ChiSquared, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Floor for the squared per-coordinate scales of a pair geometry. The
/// penalty needs Σ^{−1/2}; coordinates of the pair can be arbitrarily close,
/// so the diagonal is clamped below at this value.
pub const SCALE_FLOOR: f64 = 1e-12;

/// Shape of the distance-based penalty function φ, expressed through the
/// squared Mahalanobis distance `q` from the pair midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyShape {
    /// φ(q) = 1 − exp(−q/2).
    FlippedGaussian,
    /// φ(q) = 1 − (1 + q/ν)^{−(ν+d)/2}: one minus the multivariate t density
    /// kernel with ν degrees of freedom, normalised to 1 at the centre.
    FlippedT {
        /// Degrees of freedom ν > 0.
        df: f64,
    },
    /// φ(q) = 1 − exp(1 − 1/(1−q)) for q < 1, and exactly 1 for q ≥ 1
    /// (compact-support bump, continuous at q = 1).
    FlippedBump,
}

impl PenaltyShape {
    /// Short label used in CSV output (`gaussian`, `t2`, `bump`).
    pub fn label(&self) -> String {
        match self {
            Self::FlippedGaussian => "gaussian".into(),
            Self::FlippedT { df } => format!("t{df}"),
            Self::FlippedBump => "bump".into(),
        }
    }
}

impl std::str::FromStr for PenaltyShape {
    type Err = Error;

    /// Accepts `gaussian`, `bump`, `t` (2 df), or `t:<df>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::FlippedGaussian),
            "bump" => Ok(Self::FlippedBump),
            "t" => Ok(Self::FlippedT { df: 2.0 }),
            other => {
                if let Some(df) = other.strip_prefix("t:") {
                    let df: f64 = df
                        .parse()
                        .map_err(|_| Error::Config(format!("bad t df '{df}'")))?;
                    Ok(Self::FlippedT { df })
                } else {
                    Err(Error::Config(format!(
                        "unknown penalty shape '{other}' (expected gaussian, t, t:<df>, or bump)"
                    )))
                }
            }
        }
    }
}

/// Distribution family of the proposal g (a location-scale family centred at
/// the pair midpoint).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProposalFamily {
    /// Independent Gaussian coordinates.
    Gaussian,
    /// Multivariate t: Gaussian coordinates divided by one shared
    /// √(χ²_ν/ν) draw, giving genuinely heavy joint tails.
    StudentT {
        /// Degrees of freedom ν > 0.
        df: f64,
    },
}

impl ProposalFamily {
    /// Short label used in CSV output (`gaussian`, `t1`).
    pub fn label(&self) -> String {
        match self {
            Self::Gaussian => "gaussian".into(),
            Self::StudentT { df } => format!("t{df}"),
        }
    }
}

impl std::str::FromStr for ProposalFamily {
    type Err = Error;

    /// Accepts `gaussian`, `t` (1 df), or `t:<df>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "t" => Ok(Self::StudentT { df: 1.0 }),
            other => {
                if let Some(df) = other.strip_prefix("t:") {
                    let df: f64 = df
                        .parse()
                        .map_err(|_| Error::Config(format!("bad t df '{df}'")))?;
                    Ok(Self::StudentT { df })
                } else {
                    Err(Error::Config(format!(
                        "unknown proposal family '{other}' (expected gaussian, t, or t:<df>)"
                    )))
                }
            }
        }
    }
}

/// Which penalised-proposal sampler drives the move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyVariant {
    /// Distance-based penalty via rejection sampling (no gradient needed).
    Rejection,
    /// Gradient (Barker-sigmoid) penalty via the one-shot flip sampler;
    /// requires a target with an available gradient.
    Gradient,
}

/// Configuration of the penalised move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// Penalty shape for the rejection variant.
    pub shape: PenaltyShape,
    /// Proposal family g.
    pub proposal_family: ProposalFamily,
    /// Proposal scale multiplier κ > 0: g has per-coordinate scale κ·√Σ_ii
    /// while the penalty is measured in √Σ_ii units, so κ controls how far
    /// past the penalty well the proposal reaches.
    pub kappa: f64,
    /// Sampler variant.
    pub variant: PenaltyVariant,
    /// Trial cap for the rejection sampler; exceeding it is reported as a
    /// sampler failure and recorded as a rejected move.
    pub max_trials: u32,
}

impl Default for PenaltyConfig {
    /// κ = 3, flipped-t penalty with 2 df, t proposal with 1 df, rejection
    /// variant, trial cap 10⁴.
    fn default() -> Self {
        Self {
            shape: PenaltyShape::FlippedT { df: 2.0 },
            proposal_family: ProposalFamily::StudentT { df: 1.0 },
            kappa: 3.0,
            variant: PenaltyVariant::Rejection,
            max_trials: 10_000,
        }
    }
}

impl PenaltyConfig {
    /// Validates parameter ranges.
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::Config(format!("kappa must be positive (got {})", self.kappa)));
        }
        if let PenaltyShape::FlippedT { df } = self.shape {
            if !(df.is_finite() && df > 0.0) {
                return Err(Error::Config(format!("penalty t df must be positive (got {df})")));
            }
        }
        if let ProposalFamily::StudentT { df } = self.proposal_family {
            if !(df.is_finite() && df > 0.0) {
                return Err(Error::Config(format!("proposal t df must be positive (got {df})")));
            }
        }
        if self.max_trials == 0 {
            return Err(Error::Config("max_trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// Centre and per-coordinate squared scales of a pair: μ = (x+y)/2 and
/// Σ = diag(max((x_i−y_i)², [`SCALE_FLOOR`])).
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyGeometry {
    /// Pair midpoint μ.
    pub mu: Vec<f64>,
    /// Squared per-coordinate scales (diagonal of Σ), floored.
    pub sigma_diag: Vec<f64>,
}

impl PenaltyGeometry {
    /// Dimension d.
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Squared Mahalanobis distance of `w` from μ in the Σ metric.
    pub fn mahalanobis_sq(&self, w: &[f64]) -> f64 {
        debug_assert_eq!(w.len(), self.mu.len());
        w.iter()
            .zip(self.mu.iter().zip(&self.sigma_diag))
            .map(|(wi, (mi, si))| {
                let t = wi - mi;
                t * t / si
            })
            .sum()
    }
}

/// Builds the geometry of a pair. Callers guarantee `x.len() == y.len()`.
pub fn center_scale(x: &[f64], y: &[f64]) -> PenaltyGeometry {
    debug_assert_eq!(x.len(), y.len());
    let mu = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
    let sigma_diag = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            (d * d).max(SCALE_FLOOR)
        })
        .collect();
    PenaltyGeometry { mu, sigma_diag }
}

/// Distance-based penalty φ at `w`: 0 at the midpoint, approaching 1 far
/// away, monotone in the squared Mahalanobis distance.
pub fn penalty_eval(shape: PenaltyShape, geom: &PenaltyGeometry, w: &[f64]) -> f64 {
    let q = geom.mahalanobis_sq(w);
    penalty_from_q(shape, q, geom.dim())
}

/// Penalty as a function of the squared Mahalanobis distance `q` in
/// dimension `d`.
fn penalty_from_q(shape: PenaltyShape, q: f64, d: usize) -> f64 {
    match shape {
        // 1 − e^{−q/2}, computed via expm1 for accuracy near the centre.
        PenaltyShape::FlippedGaussian => -f64::exp_m1(-0.5 * q),
        PenaltyShape::FlippedT { df } => {
            let expo = -0.5 * (df + d as f64);
            -f64::exp_m1(expo * f64::ln_1p(q / df))
        }
        PenaltyShape::FlippedBump => {
            if q < 1.0 {
                1.0 - f64::exp(1.0 - 1.0 / (1.0 - q))
            } else {
                1.0
            }
        }
    }
}

/// Gradient (Barker-sigmoid) penalty: `1 / (1 + exp(grad · (w − mu_t)))`,
/// with the exponent clamped to ±700 before exponentiation. Equals 1/2 at
/// the centre and satisfies the flip identity φ̃(μ̃+δ) + φ̃(μ̃−δ) = 1 that the
/// flip sampler relies on.
pub fn gradient_penalty_eval(grad: &[f64], mu_t: &[f64], w: &[f64]) -> Result<f64> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric(
            "gradient penalty unusable: non-finite gradient".into(),
        ));
    }
    let dot: f64 = grad
        .iter()
        .zip(w.iter().zip(mu_t))
        .map(|(g, (wi, mi))| g * (wi - mi))
        .sum();
    let t = dot.clamp(-700.0, 700.0);
    Ok(1.0 / (1.0 + t.exp()))
}

/// Draws one point from the proposal g: location μ from the geometry,
/// per-coordinate scale `scale_mult · √Σ_ii`. The Student-t family divides
/// all coordinates by a single shared √(χ²_ν/ν) draw (coordinates first,
/// then the divisor).
pub fn sample_g<R: Rng + ?Sized>(
    geom: &PenaltyGeometry,
    family: ProposalFamily,
    scale_mult: f64,
    rng: &mut R,
) -> Vec<f64> {
    let z: Vec<f64> = (0..geom.dim()).map(|_| rng.sample(StandardNormal)).collect();
    let divisor = match family {
        ProposalFamily::Gaussian => 1.0,
        ProposalFamily::StudentT { df } => {
            let chi2 = ChiSquared::new(df).expect("validated df");
            (rng.sample(chi2) / df).sqrt()
        }
    };
    geom.mu
        .iter()
        .zip(z.iter().zip(&geom.sigma_diag))
        .map(|(m, (zi, si))| m + scale_mult * si.sqrt() * zi / divisor)
        .collect()
}

/// Log-density of [`sample_g`] at `w` (fully normalised).
pub fn log_g(geom: &PenaltyGeometry, family: ProposalFamily, scale_mult: f64, w: &[f64]) -> f64 {
    let d = geom.dim() as f64;
    let mut q = 0.0;
    let mut log_scales = 0.0;
    for (wi, (mi, si)) in w.iter().zip(geom.mu.iter().zip(&geom.sigma_diag)) {
        let s = scale_mult * si.sqrt();
        let t = (wi - mi) / s;
        q += t * t;
        log_scales += s.ln();
    }
    match family {
        ProposalFamily::Gaussian => -0.5 * d * (2.0 * PI).ln() - log_scales - 0.5 * q,
        ProposalFamily::StudentT { df } => {
            ln_gamma(0.5 * (df + d)) - ln_gamma(0.5 * df) - 0.5 * d * (df * PI).ln()
                - log_scales
                - 0.5 * (df + d) * f64::ln_1p(q / df)
        }
    }
}

/// Flip sampler for the gradient penalty: draws `W ~ g` (scale √Σ_ii, no κ),
/// then `Ω ~ U(0,1)`, and returns `W` if `Ω ≤ φ̃(W)`, else the mirror point
/// `2μ̃ − W`. The output is distributed exactly as `2·g·φ̃`.
pub fn sample_flip<R: Rng + ?Sized>(
    geom: &PenaltyGeometry,
    grad: &[f64],
    family: ProposalFamily,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let w = sample_g(geom, family, 1.0, rng);
    let omega: f64 = rng.random();
    let phi = gradient_penalty_eval(grad, &geom.mu, &w)?;
    if omega <= phi {
        Ok(w)
    } else {
        Ok(geom.mu.iter().zip(&w).map(|(m, wi)| 2.0 * m - wi).collect())
    }
}

/// Rejection sampler for distance-based penalties: repeats `W ~ g` (scale
/// κ·√Σ_ii), `Ω ~ U(0,1)` until `φ(W) ≥ Ω`; returns the accepted point and
/// the number of trials used (≥ 1). The trial count is geometric with a
/// success rate that does not depend on the geometry.
pub fn sample_rejection<R: Rng + ?Sized>(
    geom: &PenaltyGeometry,
    cfg: &PenaltyConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, u32)> {
    for trial in 1..=cfg.max_trials {
        let w = sample_g(geom, cfg.proposal_family, cfg.kappa, rng);
        let omega: f64 = rng.random();
        if penalty_eval(cfg.shape, geom, &w) >= omega {
            return Ok((w, trial));
        }
    }
    Err(Error::SamplerFailure(cfg.max_trials))
}

/// Closed-form acceptance rate of the rejection sampler when both the
/// penalty and the proposal are Gaussian: `1 − (1 + κ²)^{−d/2}`.
pub fn normconst_closed(d: usize, kappa: f64) -> f64 {
    -f64::exp_m1(-0.5 * d as f64 * f64::ln_1p(kappa * kappa))
}

/// Monte Carlo estimate of the penalty normalising constant 𝔷.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormConstEstimate {
    /// Point estimate of 𝔷.
    pub z_hat: f64,
    /// Standard error of the estimate.
    pub std_err: f64,
    /// Number of Monte Carlo draws used.
    pub n: u64,
}

/// Estimates 𝔷 = E[φ(κW)] with `W` drawn from the standard (unit-scale,
/// zero-location) proposal: returns `1 − (1/n)·Σ ρ₀^{−1}ρ(κ·W_k)` with a
/// standard error from the same draws.
pub fn normconst_mc<R: Rng + ?Sized>(
    cfg: &PenaltyConfig,
    d: usize,
    n: u64,
    rng: &mut R,
) -> NormConstEstimate {
    let unit = PenaltyGeometry {
        mu: vec![0.0; d],
        sigma_diag: vec![1.0; d],
    };
    // Welford accumulation of ρ₀^{−1}ρ values (= 1 − φ at the scaled draw).
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 0..n {
        let w = sample_g(&unit, cfg.proposal_family, cfg.kappa, rng);
        let rho = 1.0 - penalty_eval(cfg.shape, &unit, &w);
        let delta = rho - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (rho - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    NormConstEstimate {
        z_hat: 1.0 - mean,
        std_err: (var / n as f64).sqrt(),
        n,
    }
}

/// Which of the two pair transforms to apply to a midpoint draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairChoice {
    /// u keeps x's role: u = x + (w − μ), v = y + (w − μ).
    Keep,
    /// Roles swapped: u = y + (w − μ), v = x + (w − μ).
    Swap,
}

/// Translates the pair so its midpoint becomes `w`, either keeping or
/// swapping the roles of x and y. Under both choices the proposed pair has
/// midpoint `w` and the same per-coordinate scales as (x, y).
pub fn propose_pair(x: &[f64], y: &[f64], w: &[f64], choice: PairChoice) -> (Vec<f64>, Vec<f64>) {
    let shift: Vec<f64> = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, b), wi)| wi - 0.5 * (a + b))
        .collect();
    let add = |p: &[f64]| -> Vec<f64> { p.iter().zip(&shift).map(|(pi, s)| pi + s).collect() };
    match choice {
        PairChoice::Keep => (add(x), add(y)),
        PairChoice::Swap => (add(y), add(x)),
    }
}

/// Log MH ratio of the penalised move: proposed pair (u, v) obtained from
/// (x, y) via the midpoint draw `w`. Returns −∞ for any forced rejection
/// (proposed pair outside the support, forward penalty exactly 0, or a
/// gradient-variant evaluation that is unavailable at the needed points).
pub fn mh_ratio_penalised(
    target: &dyn Target,
    x: &[f64],
    y: &[f64],
    u: &[f64],
    v: &[f64],
    w: &[f64],
    cfg: &PenaltyConfig,
) -> f64 {
    mh_ratio_parts(target, x, y, u, v, w, cfg).0
}

/// As [`mh_ratio_penalised`], also returning the freshly evaluated log γ at
/// u and v so callers can fill state caches without re-evaluating.
fn mh_ratio_parts(
    target: &dyn Target,
    x: &[f64],
    y: &[f64],
    u: &[f64],
    v: &[f64],
    w: &[f64],
    cfg: &PenaltyConfig,
) -> (f64, f64, f64) {
    let lg_u = target.log_gamma(u);
    let lg_v = target.log_gamma(v);
    if !(lg_u.is_finite() && lg_v.is_finite()) {
        return (f64::NEG_INFINITY, lg_u, lg_v);
    }
    let lg_x = target.log_gamma(x);
    let lg_y = target.log_gamma(y);
    let delta_target = lg_u + lg_v - lg_x - lg_y;

    let geom_xy = center_scale(x, y);
    let geom_uv = center_scale(u, v);
    // The reverse move would draw the old midpoint from the proposed pair.
    let old_mu = geom_xy.mu.clone();

    let (scale_mult, log_phi_fwd, log_phi_rev) = match cfg.variant {
        PenaltyVariant::Rejection => {
            let phi_fwd = penalty_eval(cfg.shape, &geom_xy, w);
            if phi_fwd <= 0.0 {
                // The forward density is 0 at the penalty centre; forcing
                // rejection here (rather than taking ln 0 = −∞ with its
                // *negative* sign in the ratio) keeps the arithmetic sane.
                return (f64::NEG_INFINITY, lg_u, lg_v);
            }
            let phi_rev = penalty_eval(cfg.shape, &geom_uv, &old_mu);
            (cfg.kappa, phi_fwd.ln(), phi_rev.ln())
        }
        PenaltyVariant::Gradient => {
            let Some(grad_xy) = target.grad_log_gamma(&geom_xy.mu) else {
                return (f64::NEG_INFINITY, lg_u, lg_v);
            };
            let Some(grad_uv) = target.grad_log_gamma(&geom_uv.mu) else {
                return (f64::NEG_INFINITY, lg_u, lg_v);
            };
            let Ok(phi_fwd) = gradient_penalty_eval(&grad_xy, &geom_xy.mu, w) else {
                return (f64::NEG_INFINITY, lg_u, lg_v);
            };
            let Ok(phi_rev) = gradient_penalty_eval(&grad_uv, &geom_uv.mu, &old_mu) else {
                return (f64::NEG_INFINITY, lg_u, lg_v);
            };
            if phi_fwd <= 0.0 {
                return (f64::NEG_INFINITY, lg_u, lg_v);
            }
            (1.0, phi_fwd.ln(), phi_rev.ln())
        }
    };

    let log_g_fwd = log_g(&geom_xy, cfg.proposal_family, scale_mult, w);
    let log_g_rev = log_g(&geom_uv, cfg.proposal_family, scale_mult, &old_mu);
    // The state-free sampler acceptance 𝔷 cancels between the two
    // directions and is omitted.
    let log_r = delta_target + log_g_rev - log_g_fwd + log_phi_rev - log_phi_fwd;
    (log_r, lg_u, lg_v)
}

/// Executes one penalised MH move: draws a midpoint via the configured
/// sampler, applies a fair-coin keep/swap pair transform, and accepts or
/// rejects by the penalised MH ratio. A sampler failure (trial cap, or an
/// unusable gradient) is returned as a rejected move with
/// [`MoveRecord::sampler_failure`] set — never a crash.
pub fn penalised_move<R: Rng + ?Sized>(
    state: &PairState,
    target: &dyn Target,
    cfg: &PenaltyConfig,
    rng: &mut R,
) -> (PairState, MoveRecord) {
    let failure = |trials: Option<u32>| MoveRecord {
        iter: 0,
        kind: MoveKind::Penalty,
        accepted: false,
        log_mh_ratio: f64::NEG_INFINITY,
        rejection_trials: trials,
        sampler_failure: true,
    };

    let geom = center_scale(&state.x, &state.y);
    let (w, trials) = match cfg.variant {
        PenaltyVariant::Gradient => {
            let Some(grad) = target.grad_log_gamma(&geom.mu) else {
                return (state.clone(), failure(None));
            };
            match sample_flip(&geom, &grad, cfg.proposal_family, rng) {
                Ok(w) => (w, None),
                Err(_) => return (state.clone(), failure(None)),
            }
        }
        PenaltyVariant::Rejection => match sample_rejection(&geom, cfg, rng) {
            Ok((w, t)) => (w, Some(t)),
            Err(_) => return (state.clone(), failure(Some(cfg.max_trials))),
        },
    };

    let omega: f64 = rng.random();
    let choice = if rng.random::<f64>() < 0.5 {
        PairChoice::Keep
    } else {
        PairChoice::Swap
    };
    let (u, v) = propose_pair(&state.x, &state.y, &w, choice);
    let (log_r, lg_u, lg_v) = mh_ratio_parts(target, &state.x, &state.y, &u, &v, &w, cfg);
    // The explicit −∞ check keeps forced rejections rejected even in the
    // measure-zero event that ω draws exactly 0.
    let accepted = log_r > f64::NEG_INFINITY && omega.ln() <= log_r;
    let new_state = if accepted {
        PairState {
            x: u,
            y: v,
            log_gamma_x: lg_u,
            log_gamma_y: lg_v,
        }
    } else {
        state.clone()
    };
    let record = MoveRecord {
        iter: 0,
        kind: MoveKind::Penalty,
        accepted,
        log_mh_ratio: log_r,
        rejection_trials: trials,
        sampler_failure: false,
    };
    (new_state, record)
}
