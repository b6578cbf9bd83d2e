//! Point transformations (Poincaré, Euclidean, Galileo, affine, expression
//! diffeomorphisms) and their linear extensions to delta spans and to the
//! gaussian element family.

use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix4, Rotation3, Unit, Vector3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::TimeSlicedElement;
use crate::element::{DeltaJetTerm, GaussianTerm, SpaceElement};
use crate::embedding::DomainBox;
use crate::error::{check_dim, Error, Result};
use crate::expr::{parse_expression, Expr};
use crate::kernel::{gram_matrix, KernelFamily, KernelSpec, Signature};
use crate::poly::{Poly, C64};

const ORTHOGONALITY_TOLERANCE: f64 = 1e-12;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// A transformation of points of ℝⁿ.
pub trait PointMap: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// `(M, w)` with `g(x) = M x + w`, for affine maps.
    fn affine_parts(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        None
    }

    /// Signature of the gaussian kernel this map claims to preserve.
    fn isometry_of(&self) -> Option<Signature> {
        None
    }
}

fn eta4() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0, -1.0))
}

/// `x ↦ Λ x + a` on coordinates `(x, y, z, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareElement {
    pub lorentz: Matrix4<f64>,
    pub translation: Vector4<f64>,
}

impl PoincareElement {
    pub fn new(lorentz: Matrix4<f64>, translation: Vector4<f64>) -> Result<Self> {
        let eta = eta4();
        let defect = (lorentz.transpose() * eta * lorentz - eta).amax();
        let scale = lorentz.amax().powi(2).max(1.0);
        if !(defect <= ORTHOGONALITY_TOLERANCE * scale) {
            return Err(Error::InvalidGroupElement(format!(
                "ΛᵀηΛ deviates from η by {defect:e}"
            )));
        }
        Ok(Self {
            lorentz,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            lorentz: Matrix4::identity(),
            translation: Vector4::zeros(),
        }
    }

    /// Pure boost with velocity `v` (units with c = 1).
    pub fn boost(v: [f64; 3]) -> Result<Self> {
        let v = Vector3::from(v);
        let v2 = v.norm_squared();
        if !(v2 < 1.0) {
            return Err(Error::InvalidGroupElement(format!(
                "boost speed {} ≥ 1",
                v2.sqrt()
            )));
        }
        let gamma = 1.0 / (1.0 - v2).sqrt();
        let mut l = Matrix4::identity();
        l[(3, 3)] = gamma;
        for i in 0..3 {
            l[(3, i)] = -gamma * v[i];
            l[(i, 3)] = -gamma * v[i];
            for j in 0..3 {
                if v2 > 0.0 {
                    l[(i, j)] += (gamma - 1.0) * v[i] * v[j] / v2;
                }
            }
        }
        Ok(Self {
            lorentz: l,
            translation: Vector4::zeros(),
        })
    }

    /// Boost of rapidity `phi` along `direction`.
    pub fn boost_rapidity(direction: [f64; 3], phi: f64) -> Result<Self> {
        let d = Vector3::from(direction);
        let n = d.norm();
        if n == 0.0 {
            return Err(Error::InvalidGroupElement("zero boost direction".into()));
        }
        let v = d * (phi.tanh() / n);
        Self::boost([v[0], v[1], v[2]])
    }

    /// Spatial rotation by `angle` about `axis`.
    pub fn rotation(axis: [f64; 3], angle: f64) -> Result<Self> {
        let r = rotation3(axis, angle)?;
        let mut l = Matrix4::identity();
        l.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        Ok(Self {
            lorentz: l,
            translation: Vector4::zeros(),
        })
    }

    pub fn translation(a: [f64; 4]) -> Self {
        Self {
            lorentz: Matrix4::identity(),
            translation: Vector4::from(a),
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            lorentz: self.lorentz * other.lorentz,
            translation: self.lorentz * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let eta = eta4();
        let inv = eta * self.lorentz.transpose() * eta;
        Self {
            lorentz: inv,
            translation: -(inv * self.translation),
        }
    }

    /// Rapidity of the boost content, `acosh |Λ_tt|`.
    pub fn rapidity(&self) -> f64 {
        self.lorentz[(3, 3)].abs().max(1.0).acosh()
    }
}

fn rotation3(axis: [f64; 3], angle: f64) -> Result<nalgebra::Matrix3<f64>> {
    let a = Vector3::from(axis);
    if a.norm() == 0.0 {
        return Err(Error::InvalidGroupElement("zero rotation axis".into()));
    }
    Ok(*Rotation3::from_axis_angle(&Unit::new_normalize(a), angle).matrix())
}

fn dmatrix3(m: &nalgebra::Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, j| m[(i, j)])
}

impl PointMap for PoincareElement {
    fn name(&self) -> String {
        "poincare".into()
    }

    fn dim(&self) -> usize {
        4
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(4, x.len())?;
        let y = self.lorentz * Vector4::from_column_slice(x) + self.translation;
        Ok(y.iter().cloned().collect())
    }

    fn affine_parts(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        Some((
            DMatrix::from_fn(4, 4, |i, j| self.lorentz[(i, j)]),
            DVector::from_column_slice(self.translation.as_slice()),
        ))
    }

    fn isometry_of(&self) -> Option<Signature> {
        Some(Signature { pos: 3, neg: 1 })
    }
}

fn check_orthogonal(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidGroupElement("rotation must be square".into()));
    }
    let defect = (a.transpose() * a - DMatrix::identity(a.nrows(), a.nrows())).amax();
    if !(defect <= ORTHOGONALITY_TOLERANCE) {
        return Err(Error::InvalidGroupElement(format!(
            "AᵀA deviates from the identity by {defect:e}"
        )));
    }
    Ok(())
}

/// `x ↦ R x + b` with `R` orthogonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EuclideanMotion {
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
}

impl EuclideanMotion {
    pub fn new(rotation: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        check_orthogonal(&rotation)?;
        check_dim(rotation.nrows(), translation.len())?;
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn rotation3(axis: [f64; 3], angle: f64) -> Result<Self> {
        Self::new(dmatrix3(&rotation3(axis, angle)?), DVector::zeros(3))
    }

    pub fn translation(b: &[f64]) -> Self {
        Self {
            rotation: DMatrix::identity(b.len(), b.len()),
            translation: DVector::from_column_slice(b),
        }
    }
}

impl PointMap for EuclideanMotion {
    fn name(&self) -> String {
        "euclidean".into()
    }

    fn dim(&self) -> usize {
        self.translation.len()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let y = &self.rotation * DVector::from_column_slice(x) + &self.translation;
        Ok(y.iter().cloned().collect())
    }

    fn affine_parts(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        Some((self.rotation.clone(), self.translation.clone()))
    }

    fn isometry_of(&self) -> Option<Signature> {
        Some(Signature::euclidean(self.dim()))
    }
}

/// `(x, t) ↦ (A x + v t + b, t + c)` on `d` space dimensions plus time
/// (time last).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GalileoElement {
    pub rotation: DMatrix<f64>,
    pub velocity: DVector<f64>,
    pub shift: DVector<f64>,
    pub time_shift: f64,
}

impl GalileoElement {
    pub fn new(
        rotation: DMatrix<f64>,
        velocity: DVector<f64>,
        shift: DVector<f64>,
        time_shift: f64,
    ) -> Result<Self> {
        check_orthogonal(&rotation)?;
        check_dim(rotation.nrows(), velocity.len())?;
        check_dim(rotation.nrows(), shift.len())?;
        Ok(Self {
            rotation,
            velocity,
            shift,
            time_shift,
        })
    }

    pub fn identity(space_dim: usize) -> Self {
        Self {
            rotation: DMatrix::identity(space_dim, space_dim),
            velocity: DVector::zeros(space_dim),
            shift: DVector::zeros(space_dim),
            time_shift: 0.0,
        }
    }

    pub fn boost(v: &[f64]) -> Self {
        Self {
            velocity: DVector::from_column_slice(v),
            ..Self::identity(v.len())
        }
    }

    pub fn time_shift(space_dim: usize, c: f64) -> Self {
        Self {
            time_shift: c,
            ..Self::identity(space_dim)
        }
    }

    pub fn space_dim(&self) -> usize {
        self.velocity.len()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: &self.rotation * &other.rotation,
            velocity: &self.rotation * &other.velocity + &self.velocity,
            shift: &self.rotation * &other.shift + &self.velocity * other.time_shift + &self.shift,
            time_shift: self.time_shift + other.time_shift,
        }
    }

    pub fn inverse(&self) -> Self {
        let at = self.rotation.transpose();
        Self {
            velocity: -(&at * &self.velocity),
            shift: &at * (&self.velocity * self.time_shift - &self.shift),
            rotation: at,
            time_shift: -self.time_shift,
        }
    }
}

impl PointMap for GalileoElement {
    fn name(&self) -> String {
        "galileo".into()
    }

    fn dim(&self) -> usize {
        self.space_dim() + 1
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let d = self.space_dim();
        let t = x[d];
        let y =
            &self.rotation * DVector::from_column_slice(&x[..d]) + &self.velocity * t + &self.shift;
        let mut out: Vec<f64> = y.iter().cloned().collect();
        out.push(t + self.time_shift);
        Ok(out)
    }

    fn affine_parts(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let d = self.space_dim();
        let mut m = DMatrix::zeros(d + 1, d + 1);
        m.view_mut((0, 0), (d, d)).copy_from(&self.rotation);
        m.view_mut((0, d), (d, 1)).copy_from(&self.velocity);
        m[(d, d)] = 1.0;
        let mut w = DVector::zeros(d + 1);
        w.rows_mut(0, d).copy_from(&self.shift);
        w[d] = self.time_shift;
        Some((m, w))
    }
}

/// General invertible affine map `x ↦ M x + w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub linear: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl AffineMap {
    pub fn new(linear: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if !linear.is_square() {
            return Err(Error::InvalidGroupElement(
                "linear part must be square".into(),
            ));
        }
        check_dim(linear.nrows(), offset.len())?;
        if linear.clone().try_inverse().is_none() {
            return Err(Error::Singular("affine linear part".into()));
        }
        Ok(Self { linear, offset })
    }

    pub fn scaling(factors: &[f64]) -> Result<Self> {
        Self::new(
            DMatrix::from_diagonal(&DVector::from_column_slice(factors)),
            DVector::zeros(factors.len()),
        )
    }
}

impl PointMap for AffineMap {
    fn name(&self) -> String {
        "affine".into()
    }

    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let y = &self.linear * DVector::from_column_slice(x) + &self.offset;
        Ok(y.iter().cloned().collect())
    }

    fn affine_parts(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        Some((self.linear.clone(), self.offset.clone()))
    }
}

/// Diffeomorphism of a box given by one expression per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffeoMap {
    pub forward: Vec<Expr>,
    pub inverse: Option<Vec<Expr>>,
    pub domain: DomainBox,
}

impl DiffeoMap {
    pub fn new(forward: Vec<Expr>, inverse: Option<Vec<Expr>>, domain: DomainBox) -> Result<Self> {
        let n = domain.dim();
        check_dim(n, forward.len())?;
        if let Some(inv) = &inverse {
            check_dim(n, inv.len())?;
        }
        let map = Self {
            forward,
            inverse,
            domain,
        };
        map.validate(16, 0xd1ff)?;
        Ok(map)
    }

    pub fn parse(forward: &[&str], inverse: Option<&[&str]>, domain: DomainBox) -> Result<Self> {
        let n = domain.dim();
        let parse_all = |src: &[&str]| -> Result<Vec<Expr>> {
            src.iter().map(|s| parse_expression(s, n)).collect()
        };
        let inv = match inverse {
            Some(s) => Some(parse_all(s)?),
            None => None,
        };
        Self::new(parse_all(forward)?, inv, domain)
    }

    fn eval(exprs: &[Expr], u: &[f64]) -> Vec<f64> {
        exprs.iter().map(|e| e.eval(u)).collect()
    }

    /// Check at seeded samples that the map stays in the domain, has a
    /// nonsingular jacobian, and (if given) that the inverse inverts it.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.domain.dim();
        let h = 1e-5;
        for _ in 0..samples {
            let u = self.domain.sample(&mut rng, 2.0 * h);
            let y = Self::eval(&self.forward, &u);
            if !self.domain.contains(&y) {
                return Err(Error::OutOfDomain { point: y });
            }
            let j = DMatrix::from_fn(n, n, |r, mu| {
                let mut a = u.clone();
                let mut b = u.clone();
                a[mu] += h;
                b[mu] -= h;
                (self.forward[r].eval(&a) - self.forward[r].eval(&b)) / (2.0 * h)
            });
            let det = j.determinant();
            if !(det.abs() > 1e-8) {
                return Err(Error::Singular(format!("diffeo jacobian at {u:?}")));
            }
            if let Some(inv) = &self.inverse {
                let back = Self::eval(inv, &y);
                let err = back
                    .iter()
                    .zip(&u)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if err > 1e-9 {
                    return Err(Error::InvalidGroupElement(format!(
                        "inverse expressions miss by {err:e}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn apply_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let inv = self
            .inverse
            .as_ref()
            .ok_or_else(|| Error::Unsupported("diffeo has no inverse expressions".into()))?;
        check_dim(self.domain.dim(), y.len())?;
        Ok(Self::eval(inv, y))
    }
}

impl PointMap for DiffeoMap {
    fn name(&self) -> String {
        "diffeo".into()
    }

    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        if !self.domain.contains(x) {
            return Err(Error::OutOfDomain { point: x.to_vec() });
        }
        Ok(Self::eval(&self.forward, x))
    }
}

/// The linear map `δ_{a_i} ↦ δ_{g(a_i)}` on a finite delta span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSpanOperator {
    sources: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl DeltaSpanOperator {
    pub fn new(sources: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::Unsupported("empty delta span".into()));
        }
        check_dim(sources.len(), targets.len())?;
        let dim = sources[0].len();
        for p in sources.iter().chain(&targets) {
            check_dim(dim, p.len())?;
        }
        for (i, a) in sources.iter().enumerate() {
            if sources[..i].contains(a) {
                return Err(Error::DuplicatePoint(a.clone()));
            }
        }
        Ok(Self { sources, targets })
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sources[0].len()
    }

    pub fn sources(&self) -> &[Vec<f64>] {
        &self.sources
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn image_of(&self, a: &[f64]) -> Option<&[f64]> {
        self.sources
            .iter()
            .position(|s| s.as_slice() == a)
            .map(|i| self.targets[i].as_slice())
    }

    /// `self ∘ other`; the targets of `other` must lie in the span of `self`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        let targets = other
            .targets
            .iter()
            .map(|t| {
                self.image_of(t)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| Error::OutsideSpan(format!("{t:?}")))
            })
            .collect::<Result<_>>()?;
        Self::new(other.sources.clone(), targets)
    }

    /// Spectral condition number of the source Gram under `spec`; finite
    /// values certify linear independence of the source deltas.
    pub fn source_gram_condition(&self, spec: &KernelSpec) -> Result<f64> {
        let g = gram_matrix(&self.sources, spec)?;
        let sv = g.singular_values();
        let max = sv.max();
        let min = sv.min();
        Ok(if min > 0.0 { max / min } else { f64::INFINITY })
    }
}

pub fn extend_to_span(g: &dyn PointMap, points: &[Vec<f64>]) -> Result<DeltaSpanOperator> {
    let targets = points
        .iter()
        .map(|p| g.apply(p))
        .collect::<Result<Vec<_>>>()?;
    DeltaSpanOperator::new(points.to_vec(), targets)
}

/// Apply a span operator to an element of its span.
pub fn act_on_element(op: &DeltaSpanOperator, e: &SpaceElement) -> Result<SpaceElement> {
    check_dim(op.dim(), e.dim)?;
    if !e.gaussians.is_empty() {
        return Err(Error::OutsideSpan("gaussian terms".into()));
    }
    let mut out = SpaceElement::zero(e.dim);
    for d in &e.deltas {
        if d.order() > 0 {
            return Err(Error::OutsideSpan(format!(
                "derivative jet at {:?}",
                d.base
            )));
        }
        let target = op
            .image_of(&d.base)
            .ok_or_else(|| Error::OutsideSpan(format!("delta at {:?}", d.base)))?;
        out.deltas.push(DeltaJetTerm {
            coeff: d.coeff,
            base: target.to_vec(),
            orders: d.orders.clone(),
        });
    }
    Ok(out)
}

/// `f ↦ f ∘ g⁻¹` on gaussian terms and `T ↦ T(· ∘ g)` on delta jets.
/// Non-affine maps are accepted for zero-order deltas only.
pub fn push_forward(g: &dyn PointMap, e: &SpaceElement) -> Result<SpaceElement> {
    check_dim(g.dim(), e.dim)?;
    let Some((m, w)) = g.affine_parts() else {
        if !e.gaussians.is_empty() || e.deltas.iter().any(|d| d.order() > 0) {
            return Err(Error::NonAffine);
        }
        let mut out = SpaceElement::zero(e.dim);
        for d in &e.deltas {
            out.deltas.push(DeltaJetTerm {
                coeff: d.coeff,
                base: g.apply(&d.base)?,
                orders: d.orders.clone(),
            });
        }
        return Ok(out);
    };
    let n = e.dim;
    let minv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("affine linear part".into()))?;
    let nc = minv.map(c);
    let s = &minv * &w;
    let sc = s.map(c);
    // x = N y − s, one linear polynomial per coordinate
    let subs: Vec<Poly> = (0..n)
        .map(|i| {
            let coeffs: Vec<C64> = (0..n).map(|j| nc[(i, j)]).collect();
            Poly::linear(c(-s[i]), &coeffs)
        })
        .collect();
    let mut out = SpaceElement::zero(n);
    for f in &e.gaussians {
        let quad = nc.transpose() * &f.quad * &nc;
        let a_s = &f.quad * &sc;
        let lin = nc.transpose() * (&f.lin + &a_s);
        let shift = -0.5 * (sc.transpose() * &a_s)[(0, 0)] - (f.lin.transpose() * &sc)[(0, 0)];
        out.gaussians.push(GaussianTerm::with_poly(
            f.coeff * shift.exp(),
            f.poly.substitute(&subs),
            quad,
            lin,
        )?);
    }
    for d in &e.deltas {
        let base = g.apply(&d.base)?;
        // ∂_i ↦ Σ_j M_ji ∂_j, expanded as a polynomial in the ∂_j
        let mut p = Poly::one(n);
        for (i, &k) in d.orders.iter().enumerate() {
            let col: Vec<C64> = (0..n).map(|j| c(m[(j, i)])).collect();
            p = &p * &Poly::linear(c(0.0), &col).pow(k);
        }
        for (orders, coeff) in p.terms() {
            if coeff.norm() == 0.0 {
                continue;
            }
            out.deltas.push(DeltaJetTerm {
                coeff: d.coeff * coeff,
                base: base.clone(),
                orders: orders.clone(),
            });
        }
    }
    Ok(out)
}

/// `max_{ij} |k(g a_i, g a_j) − k(a_i, a_j)|`.
pub fn check_gram_invariance(
    g: &dyn PointMap,
    points: &[Vec<f64>],
    spec: &KernelSpec,
) -> Result<f64> {
    check_dim(spec.dim(), g.dim())?;
    if let Some(sig) = g.isometry_of() {
        if spec.family != KernelFamily::Gaussian || spec.signature != sig || spec.normalized {
            return Err(Error::Incompatible(format!(
                "{} preserves the unnormalized ({}, {}) gaussian kernel",
                g.name(),
                sig.pos,
                sig.neg
            )));
        }
    }
    let images = points
        .iter()
        .map(|p| g.apply(p))
        .collect::<Result<Vec<_>>>()?;
    let before = gram_matrix(points, spec)?;
    let after = gram_matrix(&images, spec)?;
    Ok((after - before).amax())
}

/// Gram of the target deltas, given the Gram of the source deltas.
pub fn transform_gram(
    op: &DeltaSpanOperator,
    gram: &DMatrix<f64>,
    spec: &KernelSpec,
) -> Result<DMatrix<f64>> {
    check_dim(op.len(), gram.nrows())?;
    check_dim(op.len(), gram.ncols())?;
    let source = gram_matrix(op.sources(), spec)?;
    let mismatch = (&source - gram).amax();
    if mismatch > 1e-9 * gram.amax().max(1.0) {
        return Err(Error::Incompatible(format!(
            "supplied Gram differs from the source Gram by {mismatch:e}"
        )));
    }
    gram_matrix(op.targets(), spec)
}

/// `ψ(x, t) δ(t − τ) ↦ ψ(A x + v t + b, t + c) δ(t + c − τ)`, relabelled to
/// the slice `τ − c`.
pub fn galileo_on_slice(g: &GalileoElement, se: &TimeSlicedElement) -> Result<TimeSlicedElement> {
    check_dim(g.space_dim(), se.space_dim)?;
    let moving = g.velocity.iter().any(|&v| v != 0.0);
    if moving && se.jets.iter().any(|j| j.order > 0) {
        return Err(Error::Unsupported(
            "time-derivative jets under a Galileo boost".into(),
        ));
    }
    let tau = se.slice_time - g.time_shift;
    // spatial part becomes ψ ∘ h with h(x) = A x + v τ' + b, i.e. the
    // pushforward along h⁻¹(y) = Aᵀ (y − v τ' − b)
    let at = g.rotation.transpose();
    let inv = AffineMap::new(at.clone(), -(&at * (&g.velocity * tau + &g.shift)))?;
    let mut out = TimeSlicedElement::new(tau, se.space_dim);
    for jet in &se.jets {
        out.push_jet(push_forward(&inv, &jet.spatial)?, jet.order)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisAngle {
    pub axis: [f64; 3],
    pub angle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GalileoConfig {
    #[serde(rename = "A", default)]
    pub rotation: Option<AxisAngle>,
    #[serde(default)]
    pub v: [f64; 3],
    #[serde(default)]
    pub b: [f64; 3],
    #[serde(default)]
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffeoConfig {
    pub maps: Vec<String>,
    pub domain: Vec<[f64; 2]>,
    #[serde(default)]
    pub inverse: Option<Vec<String>>,
}

/// Group element as written in experiment configs. Poincaré parts compose
/// as `translation ∘ boost ∘ rotation`; `galileo` and `diffeo` stand alone.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupElementConfig {
    #[serde(default)]
    pub boost: Option<[f64; 3]>,
    #[serde(default)]
    pub rotation: Option<AxisAngle>,
    #[serde(default)]
    pub translation: Option<[f64; 4]>,
    #[serde(default)]
    pub galileo: Option<GalileoConfig>,
    #[serde(default)]
    pub diffeo: Option<DiffeoConfig>,
}

impl GroupElementConfig {
    pub fn build(&self) -> Result<Box<dyn PointMap>> {
        let poincare =
            self.boost.is_some() || self.rotation.is_some() || self.translation.is_some();
        let kinds = [poincare, self.galileo.is_some(), self.diffeo.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if kinds > 1 {
            return Err(Error::InvalidGroupElement(
                "give exactly one of a Poincaré element, galileo, or diffeo".into(),
            ));
        }
        if let Some(gc) = &self.galileo {
            let rotation = match &gc.rotation {
                Some(r) => dmatrix3(&rotation3(r.axis, r.angle)?),
                None => DMatrix::identity(3, 3),
            };
            return Ok(Box::new(GalileoElement::new(
                rotation,
                DVector::from_column_slice(&gc.v),
                DVector::from_column_slice(&gc.b),
                gc.c,
            )?));
        }
        if let Some(dc) = &self.diffeo {
            let domain = DomainBox::new(dc.domain.iter().map(|b| (b[0], b[1])).collect())?;
            let fwd: Vec<&str> = dc.maps.iter().map(String::as_str).collect();
            let inv: Option<Vec<&str>> = dc
                .inverse
                .as_ref()
                .map(|v| v.iter().map(String::as_str).collect());
            return Ok(Box::new(DiffeoMap::parse(&fwd, inv.as_deref(), domain)?));
        }
        let mut g = PoincareElement::identity();
        if let Some(r) = &self.rotation {
            g = PoincareElement::rotation(r.axis, r.angle)?;
        }
        if let Some(v) = self.boost {
            g = PoincareElement::boost(v)?.compose(&g);
        }
        if let Some(a) = self.translation {
            g = PoincareElement::translation(a).compose(&g);
        }
        Ok(Box::new(g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inner::{inner_product, norm_squared};
    use crate::kernel::kernel_eval;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn boost_of_unit_x() {
        let g = PoincareElement::boost([0.6, 0.0, 0.0]).unwrap();
        let y = g.apply(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(close(&y, &[1.25, 0.0, 0.0, -0.75], 1e-15), "{y:?}");
        assert!((g.rapidity() - 0.6f64.atanh()).abs() < 1e-15);
        assert!(PoincareElement::boost([1.0, 0.0, 0.0]).is_err());
        let x = [0.3, -1.0, 2.0, 0.5];
        assert_eq!(PoincareElement::identity().apply(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn poincare_group_laws() {
        let g = PoincareElement::boost([0.3, -0.2, 0.5])
            .unwrap()
            .compose(&PoincareElement::rotation([1.0, 2.0, 0.5], 0.7).unwrap())
            .compose(&PoincareElement::translation([0.1, 0.2, 0.3, 0.4]));
        let id = g.compose(&g.inverse());
        assert!((id.lorentz - Matrix4::identity()).amax() < 1e-14);
        assert!(id.translation.amax() < 1e-14);
        assert!(PoincareElement::new(g.lorentz, g.translation).is_ok());
        assert!(PoincareElement::new(Matrix4::identity() * 2.0, Vector4::zeros()).is_err());
    }

    #[test]
    fn galileo_point_action_and_group_laws() {
        let g = GalileoElement::boost(&[1.0, 0.0, 0.0]);
        assert_eq!(
            g.apply(&[0.0, 0.0, 0.0, 2.0]).unwrap(),
            vec![2.0, 0.0, 0.0, 2.0]
        );
        let h = GalileoElement::new(
            dmatrix3(&rotation3([0.0, 0.0, 1.0], 0.4).unwrap()),
            DVector::from_vec(vec![0.1, 0.2, 0.3]),
            DVector::from_vec(vec![1.0, -1.0, 0.5]),
            0.7,
        )
        .unwrap();
        let x = [0.3, 0.4, -0.2, 1.5];
        let lhs = g.compose(&h).apply(&x).unwrap();
        let rhs = g.apply(&h.apply(&x).unwrap()).unwrap();
        assert!(close(&lhs, &rhs, 1e-14));
        let back = h.inverse().apply(&h.apply(&x).unwrap()).unwrap();
        assert!(close(&back, &x, 1e-14));
    }

    #[test]
    fn span_operator_commutes_with_embedding() {
        let g = PoincareElement::boost([0.6, 0.0, 0.0]).unwrap();
        let pts = vec![vec![0.0; 4], vec![1.0, 0.0, 0.0, 1.0]];
        let op = extend_to_span(&g, &pts).unwrap();
        for a in &pts {
            let image = act_on_element(&op, &SpaceElement::delta(a)).unwrap();
            assert_eq!(image, SpaceElement::delta(&g.apply(a).unwrap()));
        }
        // lightlike separation survives the boost
        let t = op.targets();
        let d: Vec<f64> = t[1].iter().zip(&t[0]).map(|(a, b)| a - b).collect();
        let interval = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] - d[3] * d[3];
        assert!(interval.abs() < 1e-15);
        assert!(matches!(
            extend_to_span(&g, &[vec![0.0; 4], vec![0.0; 4]]),
            Err(Error::DuplicatePoint(_))
        ));
        assert!(act_on_element(&op, &SpaceElement::delta(&[5.0, 0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn translation_span_and_identity() {
        let t = PoincareElement::translation([1.0, 0.0, 0.0, 0.0]);
        let op = extend_to_span(&t, &[vec![0.0; 4]]).unwrap();
        assert_eq!(op.targets()[0], vec![1.0, 0.0, 0.0, 0.0]);
        let id = extend_to_span(&PoincareElement::identity(), &[vec![0.5; 4]]).unwrap();
        let e = SpaceElement::delta(&[0.5; 4]) * C64::new(2.0, -1.0);
        assert_eq!(act_on_element(&id, &e).unwrap(), e);
    }

    #[test]
    fn gaussian_translation() {
        let f = SpaceElement::from_gaussian(GaussianTerm::isotropic(1.0, 1.0, &[0.0]));
        let g = AffineMap::new(DMatrix::identity(1, 1), DVector::from_vec(vec![1.0])).unwrap();
        let h = push_forward(&g, &f).unwrap();
        for x in [-1.0, 0.0, 0.5, 1.0, 3.0] {
            let want = (-0.5 * (x - 1.0) * (x - 1.0f64)).exp();
            assert!((h.eval(&[x]).unwrap().re - want).abs() < 1e-15);
        }
    }

    #[test]
    fn pushforward_is_composition_with_inverse() {
        let f = SpaceElement::from_gaussian(
            GaussianTerm::centered(
                1.0,
                &DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
                &[0.4, -0.2],
            )
            .unwrap()
            .times_poly(&Poly::linear(c(1.0), &[c(0.5), c(-1.0)])),
        );
        let g = AffineMap::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 2.0]),
            DVector::from_vec(vec![0.7, -1.1]),
        )
        .unwrap();
        let h = push_forward(&g, &f).unwrap();
        let (m, w) = g.affine_parts().unwrap();
        let minv = m.try_inverse().unwrap();
        for y in [[0.0, 0.0], [1.0, -0.5], [-0.3, 2.0]] {
            let x = &minv * (DVector::from_column_slice(&y) - &w);
            let want = f.eval(x.as_slice()).unwrap();
            assert!((h.eval(&y).unwrap() - want).norm() < 1e-14);
        }
    }

    #[test]
    fn delta_jets_push_forward_by_the_chain_rule() {
        // (g_* ∂_1 δ_a, δ_b) must equal (∂_1 δ_a, δ_b ∘ g), checked through the
        // kernel: for an isometry, pairings are preserved
        let g = EuclideanMotion::rotation3([0.0, 0.0, 1.0], 0.9).unwrap();
        let spec = KernelSpec::euclidean(3);
        let a = SpaceElement::delta_jet(&[0.2, 0.1, -0.4], vec![1, 0, 1], c(1.0)).unwrap();
        let b = SpaceElement::delta_jet(&[0.5, -0.3, 0.0], vec![0, 1, 0], c(1.0)).unwrap();
        let before = inner_product(&a, &b, &spec).unwrap();
        let after = inner_product(
            &push_forward(&g, &a).unwrap(),
            &push_forward(&g, &b).unwrap(),
            &spec,
        )
        .unwrap();
        assert!((before - after).norm() < 1e-14);
    }

    #[test]
    fn nonaffine_rejected_on_gaussians() {
        let d = DiffeoMap::parse(
            &["u1 + 0.3 * sin(u1)"],
            None,
            DomainBox::cube(1, 0.0, std::f64::consts::PI),
        )
        .unwrap();
        let f = SpaceElement::from_gaussian(GaussianTerm::isotropic(1.0, 1.0, &[1.0]));
        assert_eq!(push_forward(&d, &f), Err(Error::NonAffine));
        let moved = push_forward(&d, &SpaceElement::delta(&[1.0])).unwrap();
        assert_eq!(moved.deltas[0].base, vec![1.0 + 0.3 * 1.0f64.sin()]);
        assert!(matches!(d.apply(&[4.0]), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn gram_invariance_and_controls() {
        let g = PoincareElement::boost([0.6, 0.0, 0.0])
            .unwrap()
            .compose(&PoincareElement::rotation([0.0, 1.0, 1.0], 1.1).unwrap())
            .compose(&PoincareElement::translation([0.3, -0.2, 0.1, 0.9]));
        let pts: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let s = i as f64;
                vec![
                    (0.3 * s).sin(),
                    (0.7 * s).cos(),
                    0.1 * s - 0.5,
                    (1.3 * s).sin(),
                ]
            })
            .collect();
        let dev = check_gram_invariance(&g, &pts, &KernelSpec::minkowski()).unwrap();
        assert!(dev <= 1e-12, "{dev:e}");

        let rot = EuclideanMotion::rotation3([1.0, 1.0, 0.0], 0.8).unwrap();
        let pts3: Vec<Vec<f64>> = pts.iter().map(|p| p[..3].to_vec()).collect();
        assert!(check_gram_invariance(&rot, &pts3, &KernelSpec::euclidean(3)).unwrap() <= 1e-13);

        let scale = AffineMap::scaling(&[2.0, 1.0, 1.0, 1.0]).unwrap();
        let dev = check_gram_invariance(
            &scale,
            &[vec![0.0; 4], vec![1.0, 0.0, 0.0, 0.0]],
            &KernelSpec::minkowski(),
        )
        .unwrap();
        assert!((dev - ((-0.5f64).exp() - (-2.0f64).exp())).abs() < 1e-15);

        assert!(matches!(
            check_gram_invariance(&g, &pts, &KernelSpec::euclidean(4)),
            Err(Error::Incompatible(_))
        ));
    }

    #[test]
    fn gram_transformation_law() {
        let boost = PoincareElement::boost([0.6, 0.0, 0.0]).unwrap();
        let pts = vec![vec![0.0; 4], vec![1.0, 0.0, 0.0, 1.0]];
        let op = extend_to_span(&boost, &pts).unwrap();
        let mink = KernelSpec::minkowski();
        let g = gram_matrix(&pts, &mink).unwrap();
        assert!((transform_gram(&op, &g, &mink).unwrap() - &g).amax() <= 1e-12);

        let plus = KernelSpec::euclidean(4);
        let g = gram_matrix(&pts, &plus).unwrap();
        assert!((g[(0, 1)] - (-1.0f64).exp()).abs() < 1e-16);
        let moved = transform_gram(&op, &g, &plus).unwrap();
        assert!((moved[(0, 1)] - (-0.25f64).exp()).abs() < 1e-15);

        let id = extend_to_span(&PoincareElement::identity(), &pts).unwrap();
        assert_eq!(transform_gram(&id, &g, &plus).unwrap(), g);
        assert!(transform_gram(&op, &DMatrix::identity(2, 2), &plus).is_err());
    }

    #[test]
    fn span_composition_matches_group_composition() {
        let g = PoincareElement::boost([0.2, 0.1, 0.0]).unwrap();
        let h = PoincareElement::rotation([0.0, 0.0, 1.0], 0.3).unwrap();
        let pts = vec![vec![0.1, 0.2, 0.3, 0.4], vec![-1.0, 0.5, 0.0, 2.0]];
        let oh = extend_to_span(&h, &pts).unwrap();
        let og = extend_to_span(&g, oh.targets()).unwrap();
        let composed = og.compose(&oh).unwrap();
        let direct = extend_to_span(&g.compose(&h), &pts).unwrap();
        for (a, b) in composed.targets().iter().zip(direct.targets()) {
            assert!(close(a, b, 1e-12));
        }
    }

    #[test]
    fn config_parsing() {
        let cfg: GroupElementConfig = toml::from_str(
            "boost = [0.6, 0.0, 0.0]\nrotation = { axis = [0.0, 0.0, 1.0], angle = 0.0 }\ntranslation = [1.0, 0.0, 0.0, 0.0]\n",
        )
        .unwrap();
        let g = cfg.build().unwrap();
        let y = g.apply(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(close(&y, &[2.25, 0.0, 0.0, -0.75], 1e-15));

        let cfg: GroupElementConfig = toml::from_str(
            "[galileo]\nA = { axis = [0.0, 0.0, 1.0], angle = 0.0 }\nv = [1.0, 0.0, 0.0]\nb = [0.0, 0.0, 0.0]\nc = 0.0\n",
        )
        .unwrap();
        let g = cfg.build().unwrap();
        assert_eq!(
            g.apply(&[0.0, 0.0, 0.0, 2.0]).unwrap(),
            vec![2.0, 0.0, 0.0, 2.0]
        );

        let cfg: GroupElementConfig = toml::from_str(
            "[diffeo]\nmaps = [\"u1 + 0.3 * sin(u1)\"]\ndomain = [[0.0, 3.14159]]\n",
        )
        .unwrap();
        assert_eq!(cfg.build().unwrap().name(), "diffeo");

        let both: GroupElementConfig =
            toml::from_str("boost = [0.1, 0.0, 0.0]\n[galileo]\nc = 1.0\n").unwrap();
        assert!(both.build().is_err());
        assert!(toml::from_str::<GroupElementConfig>("spin = 1\n").is_err());
    }

    #[test]
    fn delta_kernel_values_under_boost() {
        let g = PoincareElement::boost([0.6, 0.0, 0.0]).unwrap();
        let a = [0.2, 0.0, 0.0, 0.1];
        let b = [1.0, 0.3, 0.0, -0.4];
        let spec = KernelSpec::minkowski();
        let k0 = kernel_eval(&spec, &a, &b).unwrap();
        let k1 = kernel_eval(&spec, &g.apply(&a).unwrap(), &g.apply(&b).unwrap()).unwrap();
        assert!((k0 - k1).abs() < 1e-15);
        let e = SpaceElement::delta(&a);
        assert_eq!(
            norm_squared(&push_forward(&g, &e).unwrap(), &spec).unwrap(),
            1.0
        );
    }
}
