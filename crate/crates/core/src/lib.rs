//! Penalised t-walk: a self-adjusting multimodal MCMC sampler with a
//! pseudo-marginal sample combiner.
//!
//! The sampler runs a pair of coupled chains `(x, y)` on a product target
//! γ(x)γ(y) and mixes five proposal moves: the four scale-free t-walk moves
//! (walk, traverse, hop, blow) that adapt to local scale, plus a penalised
//! jump move whose proposal distribution is repelled from the current pair
//! midpoint — the mechanism that lets the chain hop between well-separated
//! modes. The [`combine`] module merges two mode-trapped runs into one
//! correctly weighted sample via a pseudo-marginal jump chain.
//!
//! Modules:
//! - [`targets`]: target-density trait, Gaussian-mixture builtins, TOML specs
//! - [`twalk`]: the pair-state kernel and run driver
//! - [`penalty`]: penalised proposal machinery (flip and rejection samplers,
//!   penalty normalising-constant estimators, the penalised move itself)
//! - [`trace`]: in-memory run traces and CSV/JSON persistence
//! - [`diagnostics`]: autocorrelation times, ESS, occupancy, KDE grids
//! - [`combine`]: pseudo-marginal combination of two runs
//! - [`math`], [`rng`], [`error`]: shared numerics, seeding, error type

#![forbid(unsafe_code)]
#![deny(missing_docs)]

pub mod combine;
pub mod diagnostics;
pub mod error;
pub mod math;
pub mod penalty;
pub mod rng;
pub mod targets;
pub mod trace;
pub mod twalk;

pub use combine::{
    combine_run, resample_oracle, BandwidthRule, CombineResult, IndexChainState, LooKdeConfig,
    RegionSample,
};
pub use diagnostics::{DiagnosticsReport, IatEstimate, KdeGrid};
pub use error::{Error, Result};
pub use penalty::{
    NormConstEstimate, PenaltyConfig, PenaltyGeometry, PenaltyShape, PenaltyVariant,
    ProposalFamily,
};
pub use targets::{banana_map, builtin, load_spec, Builtin, GaussianMixture, Target, UniformBox};
pub use trace::{RunMeta, Trace};
pub use twalk::{init_chain, run, KernelConfig, MoveKind, MoveRecord, PairState};
