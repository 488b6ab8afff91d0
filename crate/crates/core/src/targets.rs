//! Target-density abstraction and builtin benchmark targets.
//!
//! A [`Target`] exposes an unnormalised log-density `log γ` (and optionally
//! its gradient) on ℝ^d. The builtins are Gaussian mixtures — two 2-d
//! two-mode variants, a 3-d nine-component cube, and a 10-d mixture of
//! banana-shaped components — plus a uniform box used by invariance tests.
//! User-defined mixtures load from a TOML spec file via [`load_spec`].

use crate::error::{Error, Result};
use crate::math::{backward_solve_t, cholesky, forward_solve, logsumexp};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;
use std::path::Path;

/// An unnormalised target density on ℝ^d.
///
/// Implementations must never return NaN from [`Target::log_gamma`]: points
/// outside the support map to negative infinity. Evaluation is pure, so one
/// target may be shared by any number of concurrent chains.
pub trait Target: Send + Sync {
    /// Dimension d of the state space.
    fn dim(&self) -> usize;

    /// Unnormalised log-density at `x`. Callers guarantee `x.len() == dim()`;
    /// use [`log_density`] for a checked evaluation.
    fn log_gamma(&self, x: &[f64]) -> f64;

    /// Gradient of the log-density at `x`, when available. `None` either when
    /// the target carries no gradient or when `x` lies outside the support.
    fn grad_log_gamma(&self, x: &[f64]) -> Option<Vec<f64>> {
        let _ = x;
        None
    }

    /// Whether [`Target::grad_log_gamma`] is available on the support.
    fn has_gradient(&self) -> bool {
        false
    }

    /// Identifier used in trace metadata and reports.
    fn name(&self) -> &str;

    /// Declared mode centres, used by occupancy diagnostics. For curved
    /// (banana) components the component means serve as basin labels.
    fn mode_centres(&self) -> Option<Vec<Vec<f64>>> {
        None
    }
}

/// Checked log-density evaluation: verifies the point dimension first.
pub fn log_density(target: &dyn Target, x: &[f64]) -> Result<f64> {
    if x.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: x.len(),
        });
    }
    Ok(target.log_gamma(x))
}

/// Applies the banana warp to `x`: the first coordinate becomes
/// `x_1 + b·x_1² − 100·b`, all others pass through unchanged.
///
/// With curvature `b = 0` this is the identity.
pub fn banana_map(x: &[f64], b: f64) -> Vec<f64> {
    let mut z = x.to_vec();
    if let Some(first) = z.first_mut() {
        let x1 = *first;
        *first = x1 + b * x1 * x1 - 100.0 * b;
    }
    z
}

/// One Gaussian (possibly banana-warped) mixture component.
#[derive(Debug, Clone)]
struct Component {
    log_weight: f64,
    mean: Vec<f64>,
    /// Lower Cholesky factor of the covariance.
    chol: Vec<Vec<f64>>,
    /// `−(d/2)·ln 2π − ½·ln|Σ|`.
    log_norm: f64,
    /// Curvature of the banana warp applied before evaluating the Gaussian;
    /// zero means no warp.
    banana_b: f64,
}

impl Component {
    /// Log-density of this component (weight included) at `x`.
    fn log_term(&self, x: &[f64]) -> f64 {
        let z = if self.banana_b != 0.0 {
            banana_map(x, self.banana_b)
        } else {
            x.to_vec()
        };
        let centred: Vec<f64> = z.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let white = forward_solve(&self.chol, &centred);
        let quad: f64 = white.iter().map(|w| w * w).sum();
        self.log_weight + self.log_norm - 0.5 * quad
    }

    /// Gradient of the *component* log-density (weight constant) at `x`.
    fn grad_log_term(&self, x: &[f64]) -> Vec<f64> {
        let z = if self.banana_b != 0.0 {
            banana_map(x, self.banana_b)
        } else {
            x.to_vec()
        };
        let centred: Vec<f64> = z.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        // ∇_z log N = −Σ⁻¹ (z − μ), applied via the Cholesky factor.
        let white = forward_solve(&self.chol, &centred);
        let mut grad: Vec<f64> = backward_solve_t(&self.chol, &white)
            .into_iter()
            .map(|g| -g)
            .collect();
        if self.banana_b != 0.0 {
            // Chain rule through the warp: only ∂z_1/∂x_1 = 1 + 2 b x_1
            // differs from the identity Jacobian.
            grad[0] *= 1.0 + 2.0 * self.banana_b * x[0];
        }
        grad
    }
}

/// A mixture of Gaussian (optionally banana-warped) components.
///
/// Builtins are normalised (the weights sum to one and each component is a
/// proper density), but the sampler only ever uses log-density differences,
/// so user spec files are free to encode unnormalised mixtures.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    dim: usize,
    components: Vec<Component>,
    name: String,
}

impl GaussianMixture {
    /// Builds a mixture from weights, means, covariances (full matrices given
    /// as rows), and optional per-component banana curvatures.
    ///
    /// Validates: weights nonnegative and summing to one within 1e-12, every
    /// covariance symmetric positive definite, consistent dimensions.
    pub fn new(
        name: impl Into<String>,
        weights: &[f64],
        means: &[Vec<f64>],
        covariances: &[Vec<Vec<f64>>],
        banana: Option<&[f64]>,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        if means.len() != k || covariances.len() != k {
            return Err(Error::Config(format!(
                "component count mismatch: {k} weights, {} means, {} covariances",
                means.len(),
                covariances.len()
            )));
        }
        if let Some(bs) = banana {
            if bs.len() != k {
                return Err(Error::Config(format!(
                    "banana curvature list has {} entries for {k} components",
                    bs.len()
                )));
            }
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::Config("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "weights must sum to 1 (got {total})"
            )));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::Config("mixture dimension must be positive".into()));
        }
        let mut components = Vec::with_capacity(k);
        for (idx, ((&w, mean), cov)) in weights.iter().zip(means).zip(covariances).enumerate() {
            if mean.len() != dim {
                return Err(Error::Config(format!(
                    "component {idx}: mean has length {} but dim is {dim}",
                    mean.len()
                )));
            }
            if cov.len() != dim || cov.iter().any(|row| row.len() != dim) {
                return Err(Error::Config(format!(
                    "component {idx}: covariance must be {dim}x{dim}"
                )));
            }
            for i in 0..dim {
                for j in 0..i {
                    let scale = cov[i][i].abs().max(cov[j][j].abs()).max(1.0);
                    if (cov[i][j] - cov[j][i]).abs() > 1e-9 * scale {
                        return Err(Error::Config(format!(
                            "component {idx}: covariance is not symmetric at ({i},{j})"
                        )));
                    }
                }
            }
            let chol = cholesky(cov).ok_or_else(|| {
                Error::Config(format!(
                    "component {idx}: covariance is not positive definite"
                ))
            })?;
            let log_det_half: f64 = (0..dim).map(|i| chol[i][i].ln()).sum();
            let log_norm = -0.5 * dim as f64 * (2.0 * std::f64::consts::PI).ln() - log_det_half;
            components.push(Component {
                // A zero weight would poison log-space sums as NaN-free -inf,
                // which logsumexp already handles.
                log_weight: if w > 0.0 { w.ln() } else { f64::NEG_INFINITY },
                mean: mean.clone(),
                chol,
                log_norm,
                banana_b: banana.map_or(0.0, |bs| bs[idx]),
            });
        }
        Ok(Self {
            dim,
            components,
            name: name.into(),
        })
    }

    /// Number of components.
    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    /// Draws one point from component `idx` (by its Gaussian law).
    ///
    /// Only supported for straight components; curved (banana) components
    /// define a density, not a sampling recipe.
    pub fn sample_component<R: Rng + ?Sized>(&self, idx: usize, rng: &mut R) -> Result<Vec<f64>> {
        let comp = self
            .components
            .get(idx)
            .ok_or_else(|| Error::Data(format!("component index {idx} out of range")))?;
        if comp.banana_b != 0.0 {
            return Err(Error::Config(
                "cannot sample a banana-warped component directly".into(),
            ));
        }
        let z: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        // x = μ + L z has the component's covariance.
        let mut x = comp.mean.clone();
        for (xi, row) in x.iter_mut().zip(&comp.chol) {
            *xi += row.iter().zip(&z).map(|(c, zk)| c * zk).sum::<f64>();
        }
        Ok(x)
    }

    /// Draws one point from the mixture: a weight-proportional component
    /// choice followed by [`GaussianMixture::sample_component`].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.log_weight.exp();
            if u < acc {
                pick = i;
                break;
            }
        }
        self.sample_component(pick, rng)
    }
}

impl Target for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_gamma(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let terms: Vec<f64> = self.components.iter().map(|c| c.log_term(x)).collect();
        logsumexp(&terms)
    }

    fn grad_log_gamma(&self, x: &[f64]) -> Option<Vec<f64>> {
        debug_assert_eq!(x.len(), self.dim);
        let terms: Vec<f64> = self.components.iter().map(|c| c.log_term(x)).collect();
        let total = logsumexp(&terms);
        if !total.is_finite() {
            return None;
        }
        // ∇ log Σ_i e^{t_i} = Σ_i softmax(t)_i ∇t_i.
        let mut grad = vec![0.0; self.dim];
        for (t, c) in terms.iter().zip(&self.components) {
            let w = (t - total).exp();
            if w == 0.0 {
                continue;
            }
            for (g, gi) in grad.iter_mut().zip(c.grad_log_term(x)) {
                *g += w * gi;
            }
        }
        Some(grad)
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn mode_centres(&self) -> Option<Vec<Vec<f64>>> {
        Some(self.components.iter().map(|c| c.mean.clone()).collect())
    }
}

/// The builtin benchmark targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    /// 2-d equal-weight two-mode mixture: a nearly round mode at the origin
    /// and a strongly correlated mode at (20, −20), about 28 standard
    /// deviations apart.
    Example1,
    /// The same two components reweighted 0.1 / 0.9.
    Example1Weighted,
    /// 3-d mixture: eight spherical components on the cube vertices
    /// 10·(±1, ±1, ±1) with variances spanning [0.25, 10], plus a ninth at
    /// (30, 30, 30) with variance 10; equal weights.
    Cube9,
    /// 10-d mixture of three banana-warped components with curvature
    /// b ∈ {−0.03, 0, 0.03}.
    Banana10,
}

impl std::str::FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(Self::Example1),
            "example1_weighted" => Ok(Self::Example1Weighted),
            "cube9" => Ok(Self::Cube9),
            "banana10" => Ok(Self::Banana10),
            other => Err(Error::Config(format!(
                "unknown builtin target '{other}' \
                 (expected example1, example1_weighted, cube9, or banana10)"
            ))),
        }
    }
}

/// Constructs a builtin target.
pub fn builtin(which: Builtin) -> GaussianMixture {
    match which {
        Builtin::Example1 => two_mode("example1", &[0.5, 0.5]),
        Builtin::Example1Weighted => two_mode("example1_weighted", &[0.1, 0.9]),
        Builtin::Cube9 => cube9(),
        Builtin::Banana10 => banana10(),
    }
    .expect("builtin definitions are valid")
}

fn two_mode(name: &str, weights: &[f64]) -> Result<GaussianMixture> {
    let means = vec![vec![0.0, 0.0], vec![20.0, -20.0]];
    let covariances = vec![
        vec![vec![1.0, 0.1], vec![0.1, 1.0]],
        vec![vec![16.0, 16.0], vec![16.0, 25.0]],
    ];
    GaussianMixture::new(name, weights, &means, &covariances, None)
}

fn cube9() -> Result<GaussianMixture> {
    let mut means = Vec::with_capacity(9);
    let mut covariances = Vec::with_capacity(9);
    // Eight vertices in lexicographic (a, b, c) order over {0,1}³, variances
    // geometrically spaced from 0.25 to 10.
    for k in 0..8u32 {
        let signs = [
            if k & 0b100 == 0 { 1.0 } else { -1.0 },
            if k & 0b010 == 0 { 1.0 } else { -1.0 },
            if k & 0b001 == 0 { 1.0 } else { -1.0 },
        ];
        means.push(signs.iter().map(|s| 10.0 * s).collect::<Vec<f64>>());
        let var = 0.25 * 40.0_f64.powf(k as f64 / 7.0);
        covariances.push(spherical(3, var));
    }
    means.push(vec![30.0, 30.0, 30.0]);
    covariances.push(spherical(3, 10.0));
    let weights = vec![1.0 / 9.0; 9];
    GaussianMixture::new("cube9", &weights, &means, &covariances, None)
}

fn banana10() -> Result<GaussianMixture> {
    let d = 10;
    let means = vec![vec![-3.0; d], vec![0.0; d], vec![3.0; d]];
    let mut cov = spherical(d, 1.0);
    cov[0][0] = 100.0;
    let covariances = vec![cov.clone(), cov.clone(), cov];
    let weights = vec![1.0 / 3.0; 3];
    let banana = [-0.03, 0.0, 0.03];
    GaussianMixture::new("banana10", &weights, &means, &covariances, Some(&banana))
}

fn spherical(d: usize, var: f64) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; d]; d];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = var;
    }
    m
}

/// Flat density on an axis-aligned box, −∞ outside. The log-gradient is zero
/// everywhere in the interior, which makes this the reference target for
/// kernel-invariance testing.
#[derive(Debug, Clone)]
pub struct UniformBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl UniformBox {
    /// Box with per-coordinate bounds `lo[i] < hi[i]`.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Config("box bounds must have equal positive length".into()));
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::Config("box bounds must be finite".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(Error::Config("box requires lo < hi in every coordinate".into()));
        }
        Ok(Self { lo, hi })
    }

    /// The unit box [0, 1]^d.
    pub fn unit(d: usize) -> Self {
        Self::new(vec![0.0; d], vec![1.0; d]).expect("unit box is valid")
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }
}

impl Target for UniformBox {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn log_gamma(&self, x: &[f64]) -> f64 {
        if self.contains(x) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn grad_log_gamma(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.contains(x).then(|| vec![0.0; self.dim()])
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn name(&self) -> &str {
        "uniform_box"
    }
}

/// Wraps a target with its density multiplied by a constant factor
/// `exp(log_factor)`. MCMC output is invariant to this rescaling; the wrapper
/// exists to assert exactly that.
pub struct Scaled<T: Target> {
    inner: T,
    log_factor: f64,
}

impl<T: Target> Scaled<T> {
    /// Multiplies the density of `inner` by `exp(log_factor)`.
    pub fn new(inner: T, log_factor: f64) -> Self {
        Self { inner, log_factor }
    }
}

impl<T: Target> Target for Scaled<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_gamma(&self, x: &[f64]) -> f64 {
        self.inner.log_gamma(x) + self.log_factor
    }

    fn grad_log_gamma(&self, x: &[f64]) -> Option<Vec<f64>> {
        // A constant factor does not move the gradient.
        self.inner.grad_log_gamma(x)
    }

    fn has_gradient(&self) -> bool {
        self.inner.has_gradient()
    }

    fn name(&self) -> &str {
        self.inner.name()
    }

    fn mode_centres(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.mode_centres()
    }
}

#[derive(Debug, Deserialize)]
struct MixtureSpecFile {
    dim: usize,
    components: Vec<ComponentSpec>,
}

#[derive(Debug, Deserialize)]
struct ComponentSpec {
    weight: f64,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    banana_b: Option<f64>,
}

/// Loads a mixture target from a TOML spec file.
///
/// Schema:
///
/// ```toml
/// dim = 2
///
/// [[components]]
/// weight = 0.5
/// mean = [0.0, 0.0]
/// cov = [[1.0, 0.1], [0.1, 1.0]]
/// # banana_b = 0.03   # optional warp curvature
/// ```
pub fn load_spec(path: impl AsRef<Path>) -> Result<GaussianMixture> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let spec: MixtureSpecFile = toml::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if spec.components.is_empty() {
        return Err(Error::Config("components list is empty".into()));
    }
    let weights: Vec<f64> = spec.components.iter().map(|c| c.weight).collect();
    let means: Vec<Vec<f64>> = spec.components.iter().map(|c| c.mean.clone()).collect();
    let covs: Vec<Vec<Vec<f64>>> = spec.components.iter().map(|c| c.cov.clone()).collect();
    let banana: Vec<f64> = spec
        .components
        .iter()
        .map(|c| c.banana_b.unwrap_or(0.0))
        .collect();
    for (idx, mean) in means.iter().enumerate() {
        if mean.len() != spec.dim {
            return Err(Error::Config(format!(
                "component {idx}: mean has length {} but dim is {}",
                mean.len(),
                spec.dim
            )));
        }
    }
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("mixture")
        .to_string();
    let use_banana = banana.iter().any(|&b| b != 0.0);
    GaussianMixture::new(
        name,
        &weights,
        &means,
        &covs,
        use_banana.then_some(banana.as_slice()),
    )
}
