//! Reproducing kernels and their specifications.
//!
//! Every kernel family implements [`Kernel`] and is registered by name in a
//! [`KernelRegistry`]; [`KernelSpec::build`] resolves a spec through the
//! default registry.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::poly::{Poly, C64};

/// Metric signature `(k, l)`: `pos` positive directions followed by `neg`
/// negative ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub pos: usize,
    pub neg: usize,
}

impl Signature {
    pub fn new(pos: usize, neg: usize) -> Result<Self> {
        if pos + neg == 0 {
            return Err(Error::InvalidKernel(
                "signature must have at least one direction".into(),
            ));
        }
        Ok(Self { pos, neg })
    }

    pub fn euclidean(n: usize) -> Self {
        Self { pos: n, neg: 0 }
    }

    pub fn dim(&self) -> usize {
        self.pos + self.neg
    }

    /// Diagonal of η: `+1` for the first `pos` coordinates, `-1` after.
    pub fn signs(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| if i < self.pos { 1.0 } else { -1.0 })
            .collect()
    }

    pub fn eta(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.signs()))
    }

    pub fn is_definite(&self) -> bool {
        self.neg == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    PeriodicSobolev,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::PeriodicSobolev => "periodic_sobolev",
        }
    }
}

pub const DEFAULT_TRUNCATION: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub signature: Signature,
    /// Length scale `L`; the gaussian exponent is `-(L²/2) Σ ηᵢ (xᵢ - yᵢ)²`.
    pub scale: f64,
    /// Multiply by `(L/√(2π))^pos`. Only valid for definite signatures.
    pub normalized: bool,
    /// Fourier cutoff of the periodic Sobolev kernel.
    pub truncation: usize,
}

impl KernelSpec {
    /// Unnormalized gaussian kernel with `L = 1`.
    pub fn gaussian(signature: Signature) -> Self {
        Self {
            family: KernelFamily::Gaussian,
            signature,
            scale: 1.0,
            normalized: false,
            truncation: DEFAULT_TRUNCATION,
        }
    }

    pub fn euclidean(n: usize) -> Self {
        Self::gaussian(Signature::euclidean(n))
    }

    pub fn minkowski() -> Self {
        Self::gaussian(Signature { pos: 3, neg: 1 })
    }

    /// Normalized positive-definite gaussian kernel of scale `L`.
    pub fn normalized_gaussian(dim: usize, scale: f64) -> Self {
        Self {
            scale,
            normalized: true,
            ..Self::euclidean(dim)
        }
    }

    pub fn periodic_sobolev(truncation: usize) -> Self {
        Self {
            family: KernelFamily::PeriodicSobolev,
            signature: Signature::euclidean(1),
            scale: 1.0,
            normalized: false,
            truncation,
        }
    }

    pub fn dim(&self) -> usize {
        self.signature.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.signature.dim() == 0 {
            return Err(Error::InvalidKernel("empty signature".into()));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if self.normalized && self.signature.neg > 0 {
            return Err(Error::InvalidKernel(
                "normalization applies only to definite signatures".into(),
            ));
        }
        if self.truncation == 0 {
            return Err(Error::InvalidKernel("truncation must be at least 1".into()));
        }
        if self.family == KernelFamily::PeriodicSobolev && self.signature != Signature::euclidean(1)
        {
            return Err(Error::InvalidKernel(
                "periodic Sobolev kernel lives on a one-dimensional domain".into(),
            ));
        }
        Ok(())
    }

    pub fn is_positive_definite(&self) -> bool {
        self.signature.is_definite()
    }

    /// `(L/√(2π))^pos` when normalized, otherwise 1.
    pub fn prefactor(&self) -> f64 {
        if self.normalized {
            (self.scale / (2.0 * PI).sqrt()).powi(self.signature.pos as i32)
        } else {
            1.0
        }
    }

    /// Per-coordinate weights `cᵢ = L² ηᵢ` of the gaussian exponent.
    pub fn weights(&self) -> Vec<f64> {
        let l2 = self.scale * self.scale;
        self.signature.signs().into_iter().map(|s| s * l2).collect()
    }

    pub fn build(&self) -> Result<Box<dyn Kernel>> {
        KernelRegistry::default().build(self)
    }
}

/// A symmetric reproducing kernel on ℝᵖ.
pub trait Kernel: Send + Sync {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    /// Evaluate without dimension checks.
    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64;
    fn is_positive_definite(&self) -> bool;

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), y.len())?;
        Ok(self.eval_unchecked(x, y))
    }
}

pub struct GaussianKernel {
    weights: Vec<f64>,
    prefactor: f64,
    definite: bool,
}

impl GaussianKernel {
    pub fn new(spec: &KernelSpec) -> Self {
        Self {
            weights: spec.weights(),
            prefactor: spec.prefactor(),
            definite: spec.is_positive_definite(),
        }
    }
}

impl Kernel for GaussianKernel {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let q: f64 = self
            .weights
            .iter()
            .zip(x.iter().zip(y))
            .map(|(c, (a, b))| c * (a - b) * (a - b))
            .sum();
        self.prefactor * (-0.5 * q).exp()
    }

    fn is_positive_definite(&self) -> bool {
        self.definite
    }
}

/// Truncated Fourier series of the Green's function of `1 - d²/dx²` on the
/// circle: `k(θ) = Σ_{|n|≤N} e^{inθ} / (2π(1+n²))`.
pub struct PeriodicSobolevKernel {
    truncation: usize,
}

impl PeriodicSobolevKernel {
    pub fn new(truncation: usize) -> Self {
        Self { truncation }
    }

    pub fn profile(&self, theta: f64) -> f64 {
        let theta = theta.rem_euclid(2.0 * PI);
        // highest frequencies first: the tail is the smallest part of the sum
        let tail: f64 = (1..=self.truncation)
            .rev()
            .map(|n| {
                let n = n as f64;
                (n * theta).cos() / (1.0 + n * n)
            })
            .sum();
        (1.0 + 2.0 * tail) / (2.0 * PI)
    }
}

impl Kernel for PeriodicSobolevKernel {
    fn name(&self) -> &'static str {
        "periodic_sobolev"
    }

    fn dim(&self) -> usize {
        1
    }

    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.profile(x[0] - y[0])
    }

    fn is_positive_definite(&self) -> bool {
        true
    }
}

/// Untruncated periodic Sobolev kernel `cosh(π - θ) / (2 sinh π)` for
/// `θ ∈ [0, 2π)`; a cross-check for the Fourier sum.
pub fn periodic_sobolev_closed_form(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    (PI - t).cosh() / (2.0 * PI.sinh())
}

/// Upper bound `1/(πN)` on `|k_N(θ) - k(θ)|`.
pub fn periodic_truncation_bound(truncation: usize) -> f64 {
    1.0 / (PI * truncation as f64)
}

type KernelBuilder = fn(&KernelSpec) -> Box<dyn Kernel>;

/// Name-indexed constructors for kernel families.
pub struct KernelRegistry {
    builders: BTreeMap<&'static str, KernelBuilder>,
}

impl Default for KernelRegistry {
    fn default() -> Self {
        let mut r = Self {
            builders: BTreeMap::new(),
        };
        r.register("gaussian", |s| Box::new(GaussianKernel::new(s)));
        r.register("periodic_sobolev", |s| {
            Box::new(PeriodicSobolevKernel::new(s.truncation))
        });
        r
    }
}

impl KernelRegistry {
    pub fn register(&mut self, name: &'static str, builder: KernelBuilder) {
        self.builders.insert(name, builder);
    }

    pub fn names(&self) -> impl Iterator<Item = &&'static str> {
        self.builders.keys()
    }

    pub fn build(&self, spec: &KernelSpec) -> Result<Box<dyn Kernel>> {
        spec.validate()?;
        let builder = self.builders.get(spec.family.name()).ok_or_else(|| {
            Error::InvalidKernel(format!("no kernel registered as '{}'", spec.family.name()))
        })?;
        Ok(builder(spec))
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.build()?.eval(x, y)
}

pub fn gram_matrix(points: &[Vec<f64>], spec: &KernelSpec) -> Result<DMatrix<f64>> {
    if points.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    let kernel = spec.build()?;
    for p in points {
        check_dim(kernel.dim(), p.len())?;
    }
    let n = points.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval_unchecked(&points[i], &points[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Polynomial `P_α` with `∂^α κ(Δ) = P_α(Δ) κ(Δ)` for
/// `κ(Δ) = exp(-½ Σ cᵢ Δᵢ²)`.
pub fn derivative_poly(weights: &[f64], alpha: &[u32]) -> Poly {
    let n = weights.len();
    let mut out = Poly::one(n);
    for (i, (&c, &order)) in weights.iter().zip(alpha).enumerate() {
        let x = Poly::var(n, i);
        let mut p = Poly::one(n);
        for _ in 0..order {
            p = p.derivative(i) - (&x * &p).scale(C64::new(c, 0.0));
        }
        out = &out * &p;
    }
    out
}

/// `∂_x^α ∂_y^β k(x, y)` for a gaussian spec.
pub fn gaussian_kernel_derivative(
    spec: &KernelSpec,
    x: &[f64],
    y: &[f64],
    alpha: &[u32],
    beta: &[u32],
) -> Result<f64> {
    if spec.family != KernelFamily::Gaussian {
        return Err(Error::Unsupported(
            "kernel derivatives are closed-form only for the gaussian family".into(),
        ));
    }
    spec.validate()?;
    check_dim(spec.dim(), x.len())?;
    check_dim(spec.dim(), y.len())?;
    let total: Vec<u32> = alpha.iter().zip(beta).map(|(a, b)| a + b).collect();
    let delta: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let p = derivative_poly(&spec.weights(), &total)
        .eval_real(&delta)
        .re;
    let sign = if beta.iter().sum::<u32>() % 2 == 0 {
        1.0
    } else {
        -1.0
    };
    Ok(sign * p * GaussianKernel::new(spec).eval_unchecked(x, y))
}
