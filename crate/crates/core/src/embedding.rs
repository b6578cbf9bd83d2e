//! Delta embeddings of coordinate domains, pullback kernels and induced
//! metrics.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::element::SpaceElement;
use crate::error::{check_dim, Error, Result};
use crate::kernel::{Kernel, KernelFamily, KernelSpec, Signature};
use crate::poly::C64;

/// Smallest admissible singular value of a jacobian.
pub const IMMERSION_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_METRIC_STEP: f64 = 1e-4;
/// Step of the 5-point stencil used when no analytic jacobian is supplied.
pub const JACOBIAN_STEP: f64 = 1e-3;

pub type PointFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Returns the `p × n` matrix `∂X^r/∂u^μ`.
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Axis-aligned box `Π [lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub bounds: Vec<(f64, f64)>,
}

impl DomainBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Unsupported(format!(
                    "empty domain interval [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { bounds })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            bounds: vec![(lo, hi); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        self.contains_with_margin(u, 0.0)
    }

    pub fn contains_with_margin(&self, u: &[f64], margin: f64) -> bool {
        u.len() == self.dim()
            && self
                .bounds
                .iter()
                .zip(u)
                .all(|(&(lo, hi), &x)| x >= lo + margin && x <= hi - margin)
    }

    /// `k` evenly spaced interior nodes per axis, excluding the faces.
    pub fn interior_grid(&self, k: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .bounds
            .iter()
            .map(|&(lo, hi)| {
                (1..=k)
                    .map(|i| lo + (hi - lo) * i as f64 / (k + 1) as f64)
                    .collect()
            })
            .collect();
        let mut points = vec![Vec::new()];
        for axis in axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        points
    }

    /// Uniform sample from the box shrunk by `margin` on every face.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, margin: f64) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|&(lo, hi)| rng.random_range((lo + margin)..(hi - margin)))
            .collect()
    }
}

/// An immersion `X: U ⊂ ℝⁿ → ℝᵖ` into a pseudo-Euclidean space.
#[derive(Clone)]
pub struct EmbeddingMap {
    pub domain_dim: usize,
    pub ambient_signature: Signature,
    pub domain: DomainBox,
    eval: PointFn,
    jacobian: Option<JacobianFn>,
}

impl fmt::Debug for EmbeddingMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmbeddingMap")
            .field("domain_dim", &self.domain_dim)
            .field("ambient_signature", &self.ambient_signature)
            .field("domain", &self.domain)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl EmbeddingMap {
    pub fn new(ambient_signature: Signature, domain: DomainBox, eval: PointFn) -> Self {
        Self {
            domain_dim: domain.dim(),
            ambient_signature,
            domain,
            eval,
            jacobian: None,
        }
    }

    pub fn with_jacobian(mut self, jacobian: JacobianFn) -> Self {
        self.jacobian = Some(jacobian);
        self
    }

    /// `X(u) = u` on the given box.
    pub fn identity(signature: Signature, domain: DomainBox) -> Self {
        let p = signature.dim();
        Self::new(signature, domain, Arc::new(|u: &[f64]| u.to_vec()))
            .with_jacobian(Arc::new(move |_: &[f64]| DMatrix::identity(p, p)))
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_signature.dim()
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn point(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.domain_dim, u.len())?;
        let x = (self.eval)(u);
        check_dim(self.ambient_dim(), x.len())?;
        Ok(x)
    }

    /// `p × n` jacobian: analytic when supplied, else a 5-point stencil.
    pub fn jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.domain_dim, u.len())?;
        if let Some(j) = &self.jacobian {
            let m = j(u);
            if m.nrows() != self.ambient_dim() || m.ncols() != self.domain_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.ambient_dim() * self.domain_dim,
                    found: m.nrows() * m.ncols(),
                });
            }
            return Ok(m);
        }
        let h = JACOBIAN_STEP;
        let p = self.ambient_dim();
        let mut m = DMatrix::zeros(p, self.domain_dim);
        let mut v = u.to_vec();
        for mu in 0..self.domain_dim {
            let mut at = |s: f64| -> Result<Vec<f64>> {
                v[mu] = u[mu] + s * h;
                self.point(&v)
            };
            let (f2, f1, b1, b2) = (at(2.0)?, at(1.0)?, at(-1.0)?, at(-2.0)?);
            v[mu] = u[mu];
            for r in 0..p {
                m[(r, mu)] = (-f2[r] + 8.0 * f1[r] - 8.0 * b1[r] + b2[r]) / (12.0 * h);
            }
        }
        Ok(m)
    }

    /// Fails unless the smallest singular value of the jacobian is at least
    /// [`IMMERSION_TOLERANCE`].
    pub fn check_immersion(&self, u: &[f64]) -> Result<()> {
        let j = self.jacobian(u)?;
        let smallest = j
            .singular_values()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if j.ncols() > j.nrows() || smallest < IMMERSION_TOLERANCE {
            return Err(Error::DegenerateImmersion {
                point: u.to_vec(),
                detail: format!("smallest jacobian singular value {smallest:e}"),
            });
        }
        Ok(())
    }
}

/// `k_pb(u, v) = k(X(u), X(v))`.
pub struct PulledBackKernel {
    pub embedding: EmbeddingMap,
    pub spec: KernelSpec,
    kernel: Box<dyn Kernel>,
}

impl fmt::Debug for PulledBackKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PulledBackKernel")
            .field("embedding", &self.embedding)
            .field("spec", &self.spec)
            .finish()
    }
}

impl PulledBackKernel {
    pub fn new(embedding: EmbeddingMap, spec: KernelSpec) -> Result<Self> {
        check_dim(embedding.ambient_dim(), spec.dim())?;
        let kernel = spec.build()?;
        Ok(Self {
            embedding,
            spec,
            kernel,
        })
    }

    /// The unnormalized L = 1 gaussian kernel of the ambient signature.
    pub fn gaussian(embedding: EmbeddingMap) -> Result<Self> {
        let spec = KernelSpec::gaussian(embedding.ambient_signature);
        Self::new(embedding, spec)
    }

    pub fn eval(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let x = self.embedding.point(u)?;
        let y = self.embedding.point(v)?;
        Ok(self.kernel.eval_unchecked(&x, &y))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTensor {
    pub point: Vec<f64>,
    pub components: DMatrix<f64>,
}

impl MetricTensor {
    pub fn new(point: Vec<f64>, components: DMatrix<f64>) -> Self {
        Self { point, components }
    }

    pub fn dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let sym = (&self.components + self.components.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `(positive, negative)` eigenvalue counts; eigenvalues with
    /// `|λ| ≤ tol` count toward neither.
    pub fn signature(&self, tol: f64) -> (usize, usize) {
        let ev = self.eigenvalues();
        (
            ev.iter().filter(|&&l| l > tol).count(),
            ev.iter().filter(|&&l| l < -tol).count(),
        )
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.components - self.components.transpose()).amax()
    }

    /// `max_{μν} |g_μν − h_μν| / max(|h_μν|, max|h|)` with `h = reference`.
    pub fn max_relative_deviation(&self, reference: &MetricTensor) -> f64 {
        let scale = reference.components.amax();
        self.components
            .iter()
            .zip(reference.components.iter())
            .map(|(g, h)| (g - h).abs() / h.abs().max(scale).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    /// CSV header: `u1..un` then `g11, g12, ...` row-major.
    pub fn csv_header(n: usize) -> Vec<String> {
        let mut h: Vec<String> = (1..=n).map(|i| format!("u{i}")).collect();
        for i in 1..=n {
            for j in 1..=n {
                h.push(format!("g{i}{j}"));
            }
        }
        h
    }

    /// Point coordinates, then row-major components.
    pub fn csv_record(&self) -> Vec<String> {
        let n = self.dim();
        let mut r: Vec<String> = self.point.iter().map(|x| x.to_string()).collect();
        for i in 0..n {
            for j in 0..n {
                r.push(self.components[(i, j)].to_string());
            }
        }
        r
    }
}

/// How [`induced_metric_with`] differentiates the pullback kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MetricMethod {
    /// 4-point central mixed difference; optional Richardson extrapolation
    /// from steps `h` and `h/2`.
    FiniteDifference { step: f64, richardson: bool },
    /// `Jᵀ H J` with `H` the mixed second derivative of the kernel at
    /// coincidence; gaussian family only.
    ChainRule,
}

impl Default for MetricMethod {
    fn default() -> Self {
        MetricMethod::FiniteDifference {
            step: DEFAULT_METRIC_STEP,
            richardson: false,
        }
    }
}

pub fn embed_delta(a: &[f64], p: usize) -> Result<SpaceElement> {
    check_dim(p, a.len())?;
    Ok(SpaceElement::delta(a))
}

/// Induced metric by central differences with step `step`.
pub fn induced_metric(pk: &PulledBackKernel, u: &[f64], step: f64) -> Result<MetricTensor> {
    induced_metric_with(
        pk,
        u,
        MetricMethod::FiniteDifference {
            step,
            richardson: false,
        },
    )
}

pub fn induced_metric_with(
    pk: &PulledBackKernel,
    u: &[f64],
    method: MetricMethod,
) -> Result<MetricTensor> {
    let n = pk.embedding.domain_dim;
    check_dim(n, u.len())?;
    pk.embedding.check_immersion(u)?;
    let g = match method {
        MetricMethod::FiniteDifference { step, richardson } => {
            if !(step > 0.0) {
                return Err(Error::Unsupported(format!("non-positive step {step}")));
            }
            if !pk.embedding.domain.contains_with_margin(u, 2.0 * step) {
                return Err(Error::OutOfDomain { point: u.to_vec() });
            }
            let coarse = mixed_difference(pk, u, step)?;
            if richardson {
                let fine = mixed_difference(pk, u, 0.5 * step)?;
                (fine * 4.0 - coarse) / 3.0
            } else {
                coarse
            }
        }
        MetricMethod::ChainRule => {
            if pk.spec.family != KernelFamily::Gaussian {
                return Err(Error::Unsupported(
                    "chain-rule metric needs a gaussian kernel".into(),
                ));
            }
            let j = pk.embedding.jacobian(u)?;
            let h = DMatrix::from_diagonal(&DVector::from_vec(
                pk.spec
                    .weights()
                    .iter()
                    .map(|w| w * pk.spec.prefactor())
                    .collect(),
            ));
            j.transpose() * h * j
        }
    };
    let g = (&g + g.transpose()) * 0.5;
    let tensor = MetricTensor::new(u.to_vec(), g);
    let smallest = tensor
        .eigenvalues()
        .iter()
        .map(|l| l.abs())
        .fold(f64::INFINITY, f64::min);
    if smallest < IMMERSION_TOLERANCE {
        return Err(Error::DegenerateImmersion {
            point: u.to_vec(),
            detail: format!("induced metric has an eigenvalue of size {smallest:e}"),
        });
    }
    Ok(tensor)
}

fn mixed_difference(pk: &PulledBackKernel, u: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let n = u.len();
    let mut g = DMatrix::zeros(n, n);
    let shifted = |mu: usize, s: f64| {
        let mut v = u.to_vec();
        v[mu] += s;
        v
    };
    for mu in 0..n {
        for nu in mu..n {
            let (up, um) = (shifted(mu, h), shifted(mu, -h));
            let (vp, vm) = (shifted(nu, h), shifted(nu, -h));
            let d =
                pk.eval(&up, &vp)? - pk.eval(&up, &vm)? - pk.eval(&um, &vp)? + pk.eval(&um, &vm)?;
            g[(mu, nu)] = d / (4.0 * h * h);
            g[(nu, mu)] = g[(mu, nu)];
        }
    }
    Ok(g)
}

/// Induced metrics over many points, computed in parallel; output order
/// follows `points`.
pub fn metric_field(
    pk: &PulledBackKernel,
    points: &[Vec<f64>],
    method: MetricMethod,
) -> Result<Vec<MetricTensor>> {
    points
        .par_iter()
        .map(|u| induced_metric_with(pk, u, method))
        .collect()
}

/// `g = Jᵀ η J`.
pub fn analytic_pullback_metric(emb: &EmbeddingMap, u: &[f64]) -> Result<MetricTensor> {
    emb.check_immersion(u)?;
    let j = emb.jacobian(u)?;
    let g = j.transpose() * emb.ambient_signature.eta() * j;
    Ok(MetricTensor::new(u.to_vec(), g))
}

/// `‖δ_a − δ_b‖` for a positive-definite kernel.
pub fn chordal_distance(a: &[f64], b: &[f64], spec: &KernelSpec) -> Result<f64> {
    if !spec.is_positive_definite() {
        return Err(Error::IndefiniteKernel(
            "chordal distance needs a positive-definite kernel".into(),
        ));
    }
    let k = spec.build()?;
    let d2 = k.eval(a, a)? + k.eval(b, b)? - 2.0 * k.eval(a, b)?;
    Ok(d2.max(0.0).sqrt())
}

fn delta_base(e: &SpaceElement) -> Result<&[f64]> {
    let one = C64::new(1.0, 0.0);
    match (e.gaussians.as_slice(), e.deltas.as_slice()) {
        ([], [d]) if d.order() == 0 && d.coeff == one => Ok(&d.base),
        _ => Err(Error::NotADelta(
            "expected a single zero-order delta with unit coefficient".into(),
        )),
    }
}

/// `ω(a) ⊕ ω(b) = ω(a + b)`.
pub fn delta_add(da: &SpaceElement, db: &SpaceElement) -> Result<SpaceElement> {
    let (a, b) = (delta_base(da)?, delta_base(db)?);
    check_dim(a.len(), b.len())?;
    let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    Ok(SpaceElement::delta(&sum))
}

/// `λ ⊙ ω(a) = ω(λ a)`.
pub fn delta_scale(lambda: f64, da: &SpaceElement) -> Result<SpaceElement> {
    let a = delta_base(da)?;
    let v: Vec<f64> = a.iter().map(|x| lambda * x).collect();
    Ok(SpaceElement::delta(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inner::{inner_product, norm_squared};
    use std::f64::consts::{FRAC_PI_4, PI};

    fn sphere() -> EmbeddingMap {
        EmbeddingMap::new(
            Signature::euclidean(3),
            DomainBox::new(vec![(0.2, PI - 0.2), (0.0, 2.0 * PI)]).unwrap(),
            Arc::new(|u: &[f64]| {
                vec![u[0].sin() * u[1].cos(), u[0].sin() * u[1].sin(), u[0].cos()]
            }),
        )
    }

    fn assert_matrix(m: &DMatrix<f64>, want: &[f64], tol: f64) {
        for (a, b) in m.iter().zip(want) {
            assert!((a - b).abs() < tol, "{m} vs {want:?}");
        }
    }

    #[test]
    fn delta_norms_and_overlap() {
        let spec = KernelSpec::euclidean(3);
        let a = embed_delta(&[0.0, 0.0, 0.0], 3).unwrap();
        let b = embed_delta(&[1.0, 0.0, 0.0], 3).unwrap();
        assert_eq!(
            norm_squared(&a, &spec).unwrap(),
            norm_squared(&b, &spec).unwrap()
        );
        let v = inner_product(&a, &b, &spec).unwrap();
        assert!((v.re - (-0.5f64).exp()).abs() < 1e-15);
        assert!(embed_delta(&[0.0], 3).is_err());
    }

    #[test]
    fn euclidean_identity_metric() {
        let pk = PulledBackKernel::gaussian(EmbeddingMap::identity(
            Signature::euclidean(3),
            DomainBox::cube(3, -1.0, 1.0),
        ))
        .unwrap();
        let g = induced_metric(&pk, &[0.1, -0.3, 0.5], DEFAULT_METRIC_STEP).unwrap();
        assert_matrix(&g.components, &[1., 0., 0., 0., 1., 0., 0., 0., 1.], 1e-7);
    }

    #[test]
    fn minkowski_metric() {
        let pk = PulledBackKernel::gaussian(EmbeddingMap::identity(
            Signature::new(3, 1).unwrap(),
            DomainBox::cube(4, -1.0, 1.0),
        ))
        .unwrap();
        let g = induced_metric(&pk, &[0.1, 0.2, 0.3, 0.4], DEFAULT_METRIC_STEP).unwrap();
        let mut want = [0.0; 16];
        for (i, s) in [1.0, 1.0, 1.0, -1.0].iter().enumerate() {
            want[5 * i] = *s;
        }
        assert_matrix(&g.components, &want, 1e-7);
        assert_eq!(g.signature(1e-6), (3, 1));
        let cr = induced_metric_with(&pk, &[0.1, 0.2, 0.3, 0.4], MetricMethod::ChainRule).unwrap();
        assert_matrix(&cr.components, &want, 1e-15);
    }

    #[test]
    fn sphere_metric_three_ways() {
        let emb = sphere();
        let u = [FRAC_PI_4, 0.0];
        let a = analytic_pullback_metric(&emb, &u).unwrap();
        assert_matrix(&a.components, &[1.0, 0.0, 0.0, 0.5], 1e-10);
        let pk = PulledBackKernel::gaussian(emb).unwrap();
        // u2 = 0 sits on the domain face; shift into the interior
        let u = [FRAC_PI_4, 1.0];
        let fd = induced_metric(&pk, &u, DEFAULT_METRIC_STEP).unwrap();
        assert_matrix(&fd.components, &[1.0, 0.0, 0.0, 0.5], 1e-7);
        let rich = induced_metric_with(
            &pk,
            &u,
            MetricMethod::FiniteDifference {
                step: 1e-2,
                richardson: true,
            },
        )
        .unwrap();
        assert_matrix(&rich.components, &[1.0, 0.0, 0.0, 0.5], 1e-7);
    }

    #[test]
    fn step_halving_quarters_the_error() {
        let emb = sphere();
        let u = [1.0, 2.0];
        let exact = analytic_pullback_metric(&emb, &u).unwrap();
        let pk = PulledBackKernel::gaussian(emb).unwrap();
        let e1 = (induced_metric(&pk, &u, 0.1).unwrap().components - &exact.components).amax();
        let e2 = (induced_metric(&pk, &u, 0.05).unwrap().components - &exact.components).amax();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn margin_and_degeneracy() {
        let pk = PulledBackKernel::gaussian(sphere()).unwrap();
        assert!(matches!(
            induced_metric(&pk, &[0.2, 1.0], 1e-4),
            Err(Error::OutOfDomain { .. })
        ));
        // collapses the second coordinate
        let flat = EmbeddingMap::new(
            Signature::euclidean(2),
            DomainBox::cube(2, -1.0, 1.0),
            Arc::new(|u: &[f64]| vec![u[0], 0.0]),
        );
        assert!(matches!(
            analytic_pullback_metric(&flat, &[0.0, 0.0]),
            Err(Error::DegenerateImmersion { .. })
        ));
    }

    #[test]
    fn numeric_jacobian_matches_analytic() {
        let emb = sphere();
        let u = [0.7, 1.3];
        let j = emb.jacobian(&u).unwrap();
        let want = [
            u[0].cos() * u[1].cos(),
            u[0].cos() * u[1].sin(),
            -u[0].sin(),
            -u[0].sin() * u[1].sin(),
            u[0].sin() * u[1].cos(),
            0.0,
        ];
        // column-major p × n
        assert_matrix(&j, &want, 1e-11);
    }

    #[test]
    fn chordal_distances() {
        let circle = KernelSpec::periodic_sobolev(2000);
        assert_eq!(chordal_distance(&[0.3], &[0.3], &circle).unwrap(), 0.0);
        assert!(chordal_distance(&[0.0], &[2.0 * PI], &circle).unwrap() < 1e-10);
        let k = crate::kernel::PeriodicSobolevKernel::new(2000);
        let d = chordal_distance(&[0.0], &[PI], &circle).unwrap();
        assert!((d - (2.0 * (k.profile(0.0) - k.profile(PI))).sqrt()).abs() < 1e-14);
        assert!(chordal_distance(&[0.0; 4], &[1.0; 4], &KernelSpec::minkowski()).is_err());
    }

    #[test]
    fn induced_vector_operations() {
        let a = SpaceElement::delta(&[1.0, 0.0, 0.0]);
        let b = SpaceElement::delta(&[0.0, 2.0, 0.0]);
        assert_eq!(
            delta_add(&a, &b).unwrap(),
            SpaceElement::delta(&[1.0, 2.0, 0.0])
        );
        assert_eq!(delta_add(&a, &SpaceElement::delta(&[0.0; 3])).unwrap(), a);
        assert_eq!(
            delta_scale(2.0, &SpaceElement::delta(&[1.0; 3])).unwrap(),
            SpaceElement::delta(&[2.0; 3])
        );
        let sum = a.clone() + b;
        assert!(matches!(delta_scale(2.0, &sum), Err(Error::NotADelta(_))));
    }

    #[test]
    fn interior_grid_shape() {
        let g = DomainBox::cube(2, 0.0, 6.0).interior_grid(5);
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], vec![1.0, 1.0]);
        assert_eq!(g[24], vec![5.0, 5.0]);
    }
}
