//! Elements of the kernel spaces: finite combinations of polynomial-weighted
//! complex Gaussians and delta-functional jets.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernel::Signature;
use crate::poly::{MultiIndex, Poly, C64};

/// Largest total derivative order accepted for delta jets by default.
pub const DEFAULT_JET_CAP: u32 = 2;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `coeff · poly(z) · exp(-½ zᵀ quad z + linᵀ z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianTerm {
    pub coeff: C64,
    pub poly: Poly,
    pub quad: DMatrix<C64>,
    pub lin: DVector<C64>,
}

impl GaussianTerm {
    pub fn new(coeff: C64, quad: DMatrix<C64>, lin: DVector<C64>) -> Result<Self> {
        let p = quad.nrows();
        Self::with_poly(coeff, Poly::one(p), quad, lin)
    }

    pub fn with_poly(
        coeff: C64,
        poly: Poly,
        quad: DMatrix<C64>,
        lin: DVector<C64>,
    ) -> Result<Self> {
        let p = quad.nrows();
        check_dim(p, quad.ncols())?;
        check_dim(p, lin.len())?;
        check_dim(p, poly.nvars())?;
        let quad = (&quad + quad.transpose()) * c(0.5);
        Ok(Self {
            coeff,
            poly,
            quad,
            lin,
        })
    }

    /// Real gaussian `coeff · exp(-½ (z-center)ᵀ A (z-center))`.
    pub fn centered(coeff: f64, a: &DMatrix<f64>, center: &[f64]) -> Result<Self> {
        let p = a.nrows();
        check_dim(p, center.len())?;
        let m = DVector::from_column_slice(center);
        let lin = a * &m;
        let k = -0.5 * m.dot(&lin);
        Self::new(c(coeff * k.exp()), a.map(c), lin.map(c))
    }

    /// `coeff · exp(-½ width_inv |z - center|²)`.
    pub fn isotropic(coeff: f64, width_inv: f64, center: &[f64]) -> Self {
        let p = center.len();
        Self::centered(coeff, &(DMatrix::identity(p, p) * width_inv), center)
            .expect("consistent dimensions")
    }

    /// `π^{-d/4} exp(-|z|²/2)`, unit norm in L₂(ℝᵈ).
    pub fn unit_l2(dim: usize) -> Self {
        Self::isotropic(PI.powf(-(dim as f64) / 4.0), 1.0, &vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lin.len()
    }

    pub fn times_poly(&self, p: &Poly) -> Self {
        Self {
            poly: &self.poly * p,
            ..self.clone()
        }
    }

    pub fn eval(&self, z: &[f64]) -> C64 {
        let zv = DVector::from_iterator(z.len(), z.iter().map(|&v| c(v)));
        let q = (zv.transpose() * &self.quad * &zv)[(0, 0)];
        let l = self.lin.dot(&zv);
        self.coeff * self.poly.eval(zv.as_slice()) * (l - q * 0.5).exp()
    }

    /// Same term composed with the reflection `z ↦ diag(signs) z`.
    pub fn reflect(&self, signs: &[f64]) -> Self {
        let r = DMatrix::from_diagonal(&DVector::from_iterator(
            signs.len(),
            signs.iter().map(|&s| c(s)),
        ));
        Self {
            coeff: self.coeff,
            poly: self.poly.reflect(signs),
            quad: &r * &self.quad * &r,
            lin: &r * &self.lin,
        }
    }

    fn same_exponent(&self, other: &Self) -> bool {
        self.quad == other.quad && self.lin == other.lin
    }
}

/// `coeff · ∂^orders δ_base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaJetTerm {
    pub coeff: C64,
    pub base: Vec<f64>,
    pub orders: MultiIndex,
}

impl DeltaJetTerm {
    pub fn new(coeff: C64, base: Vec<f64>, orders: MultiIndex) -> Result<Self> {
        Self::with_cap(coeff, base, orders, DEFAULT_JET_CAP)
    }

    pub fn with_cap(coeff: C64, base: Vec<f64>, orders: MultiIndex, cap: u32) -> Result<Self> {
        check_dim(base.len(), orders.len())?;
        let total: u32 = orders.iter().sum();
        if total > cap {
            return Err(Error::Unsupported(format!(
                "delta jet of total order {total} exceeds the cap {cap}"
            )));
        }
        Ok(Self {
            coeff,
            base,
            orders,
        })
    }

    pub fn order(&self) -> u32 {
        self.orders.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceElement {
    pub dim: usize,
    pub gaussians: Vec<GaussianTerm>,
    pub deltas: Vec<DeltaJetTerm>,
}

impl SpaceElement {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            gaussians: Vec::new(),
            deltas: Vec::new(),
        }
    }

    pub fn from_gaussian(term: GaussianTerm) -> Self {
        Self {
            dim: term.dim(),
            gaussians: vec![term],
            deltas: Vec::new(),
        }
    }

    pub fn from_gaussians(dim: usize, terms: Vec<GaussianTerm>) -> Result<Self> {
        for t in &terms {
            check_dim(dim, t.dim())?;
        }
        Ok(Self {
            dim,
            gaussians: terms,
            deltas: Vec::new(),
        })
    }

    /// `δ_a` with unit coefficient.
    pub fn delta(a: &[f64]) -> Self {
        Self::from_delta(DeltaJetTerm {
            coeff: c(1.0),
            base: a.to_vec(),
            orders: vec![0; a.len()],
        })
    }

    pub fn from_delta(term: DeltaJetTerm) -> Self {
        Self {
            dim: term.base.len(),
            gaussians: Vec::new(),
            deltas: vec![term],
        }
    }

    /// `coeff · ∂^orders δ_a`.
    pub fn delta_jet(a: &[f64], orders: MultiIndex, coeff: C64) -> Result<Self> {
        Ok(Self::from_delta(DeltaJetTerm::new(
            coeff,
            a.to_vec(),
            orders,
        )?))
    }

    pub fn is_zero(&self) -> bool {
        self.gaussians
            .iter()
            .all(|g| g.coeff == c(0.0) || g.poly.is_zero())
            && self.deltas.iter().all(|d| d.coeff == c(0.0))
    }

    pub fn has_deltas(&self) -> bool {
        !self.deltas.is_empty()
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        check_dim(self.dim, other.dim)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            gaussians: self
                .gaussians
                .iter()
                .map(|g| GaussianTerm {
                    coeff: g.coeff * s,
                    ..g.clone()
                })
                .collect(),
            deltas: self
                .deltas
                .iter()
                .map(|d| DeltaJetTerm {
                    coeff: d.coeff * s,
                    ..d.clone()
                })
                .collect(),
        }
    }

    /// Pointwise value of the gaussian part; deltas are not functions.
    pub fn eval(&self, z: &[f64]) -> Result<C64> {
        if self.has_deltas() {
            return Err(Error::Unsupported(
                "pointwise evaluation of delta functionals".into(),
            ));
        }
        check_dim(self.dim, z.len())?;
        Ok(self.gaussians.iter().map(|g| g.eval(z)).sum())
    }

    /// Merge gaussian terms that share an exponent and deltas that share a
    /// base and multi-index; drop zero terms.
    pub fn simplified(&self) -> Self {
        let mut gaussians: Vec<GaussianTerm> = Vec::new();
        for g in &self.gaussians {
            let scaled = g.poly.scale(g.coeff);
            if let Some(existing) = gaussians.iter_mut().find(|e| e.same_exponent(g)) {
                existing.poly = existing.poly.clone() + scaled;
            } else {
                gaussians.push(GaussianTerm {
                    coeff: c(1.0),
                    poly: scaled,
                    ..g.clone()
                });
            }
        }
        gaussians.retain(|g| !g.poly.is_zero());
        let mut deltas: Vec<DeltaJetTerm> = Vec::new();
        for d in &self.deltas {
            if let Some(existing) = deltas
                .iter_mut()
                .find(|e| e.base == d.base && e.orders == d.orders)
            {
                existing.coeff += d.coeff;
            } else {
                deltas.push(d.clone());
            }
        }
        deltas.retain(|d| d.coeff != c(0.0));
        Self {
            dim: self.dim,
            gaussians,
            deltas,
        }
    }

    /// Composition with the reflection of all negative-signature coordinates.
    pub fn reflect_negative(&self, sig: &Signature) -> Result<Self> {
        check_dim(self.dim, sig.dim())?;
        let signs = sig.signs();
        let mut out = Self {
            dim: self.dim,
            gaussians: self.gaussians.iter().map(|g| g.reflect(&signs)).collect(),
            deltas: Vec::new(),
        };
        for d in &self.deltas {
            if d.base[sig.pos..].iter().any(|&v| v != 0.0) {
                return Err(Error::Unsupported(
                    "parity of a delta jet whose base has nonzero negative coordinates".into(),
                ));
            }
            let odd: u32 = d.orders[sig.pos..].iter().sum();
            let s = if odd % 2 == 0 { 1.0 } else { -1.0 };
            out.deltas.push(DeltaJetTerm {
                coeff: d.coeff * s,
                ..d.clone()
            });
        }
        Ok(out)
    }
}

impl Add for SpaceElement {
    type Output = SpaceElement;
    fn add(mut self, rhs: SpaceElement) -> SpaceElement {
        assert_eq!(self.dim, rhs.dim, "adding elements of different dimension");
        self.gaussians.extend(rhs.gaussians);
        self.deltas.extend(rhs.deltas);
        self
    }
}

impl Neg for SpaceElement {
    type Output = SpaceElement;
    fn neg(self) -> SpaceElement {
        self.scale(c(-1.0))
    }
}

impl Sub for SpaceElement {
    type Output = SpaceElement;
    fn sub(self, rhs: SpaceElement) -> SpaceElement {
        self + (-rhs)
    }
}

impl Mul<C64> for SpaceElement {
    type Output = SpaceElement;
    fn mul(self, rhs: C64) -> SpaceElement {
        self.scale(rhs)
    }
}

/// Split into components even and odd under reflection of the negative
/// signature coordinates.
pub fn even_odd_split(e: &SpaceElement, sig: &Signature) -> Result<(SpaceElement, SpaceElement)> {
    check_dim(e.dim, sig.dim())?;
    let signs = sig.signs();
    let mut even = SpaceElement::zero(e.dim);
    let mut odd = SpaceElement::zero(e.dim);
    for g in &e.gaussians {
        let r = g.reflect(&signs);
        if g.same_exponent(&r) {
            // parity decided monomial by monomial
            let even_poly = (g.poly.clone() + r.poly.clone()).scale(c(0.5));
            let odd_poly = (g.poly.clone() - r.poly).scale(c(0.5));
            if !even_poly.is_zero() {
                even.gaussians.push(GaussianTerm {
                    poly: even_poly,
                    ..g.clone()
                });
            }
            if !odd_poly.is_zero() {
                odd.gaussians.push(GaussianTerm {
                    poly: odd_poly,
                    ..g.clone()
                });
            }
        } else {
            let half = c(0.5);
            even.gaussians.push(GaussianTerm {
                coeff: g.coeff * half,
                ..g.clone()
            });
            even.gaussians.push(GaussianTerm {
                coeff: r.coeff * half,
                ..r.clone()
            });
            odd.gaussians.push(GaussianTerm {
                coeff: g.coeff * half,
                ..g.clone()
            });
            odd.gaussians.push(GaussianTerm {
                coeff: -r.coeff * half,
                ..r
            });
        }
    }
    for d in &e.deltas {
        if d.base[sig.pos..].iter().any(|&v| v != 0.0) {
            return Err(Error::Unsupported(
                "even/odd split of a delta jet off the reflection plane".into(),
            ));
        }
        let parity: u32 = d.orders[sig.pos..].iter().sum();
        if parity % 2 == 0 {
            even.deltas.push(d.clone());
        } else {
            odd.deltas.push(d.clone());
        }
    }
    Ok((even.simplified(), odd.simplified()))
}

// Structured-text record: complex numbers are `[re, im]` pairs.

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonomialRecord {
    pub exps: MultiIndex,
    pub coeff: [f64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussianRecord {
    pub coeff: [f64; 2],
    pub poly: Vec<MonomialRecord>,
    pub quad: Vec<Vec<[f64; 2]>>,
    pub lin: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaRecord {
    pub coeff: [f64; 2],
    pub base: Vec<f64>,
    pub orders: MultiIndex,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElementRecord {
    pub dim: usize,
    pub gaussians: Vec<GaussianRecord>,
    pub deltas: Vec<DeltaRecord>,
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn unpair(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

impl From<&SpaceElement> for ElementRecord {
    fn from(e: &SpaceElement) -> Self {
        Self {
            dim: e.dim,
            gaussians: e
                .gaussians
                .iter()
                .map(|g| GaussianRecord {
                    coeff: pair(g.coeff),
                    poly: g
                        .poly
                        .terms()
                        .map(|(exps, v)| MonomialRecord {
                            exps: exps.clone(),
                            coeff: pair(*v),
                        })
                        .collect(),
                    quad: g
                        .quad
                        .row_iter()
                        .map(|r| r.iter().map(|&z| pair(z)).collect())
                        .collect(),
                    lin: g.lin.iter().map(|&z| pair(z)).collect(),
                })
                .collect(),
            deltas: e
                .deltas
                .iter()
                .map(|d| DeltaRecord {
                    coeff: pair(d.coeff),
                    base: d.base.clone(),
                    orders: d.orders.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ElementRecord> for SpaceElement {
    type Error = Error;

    fn try_from(r: ElementRecord) -> Result<Self> {
        let p = r.dim;
        let mut gaussians = Vec::new();
        for g in r.gaussians {
            check_dim(p, g.quad.len())?;
            let mut quad = DMatrix::zeros(p, p);
            for (i, row) in g.quad.iter().enumerate() {
                check_dim(p, row.len())?;
                for (j, &z) in row.iter().enumerate() {
                    quad[(i, j)] = unpair(z);
                }
            }
            let lin = DVector::from_iterator(g.lin.len(), g.lin.iter().map(|&z| unpair(z)));
            let mut poly = Poly::zero(p);
            for m in g.poly {
                check_dim(p, m.exps.len())?;
                poly = poly + Poly::monomial(m.exps, unpair(m.coeff));
            }
            gaussians.push(GaussianTerm::with_poly(unpair(g.coeff), poly, quad, lin)?);
        }
        let mut deltas = Vec::new();
        for d in r.deltas {
            check_dim(p, d.base.len())?;
            deltas.push(DeltaJetTerm::new(unpair(d.coeff), d.base, d.orders)?);
        }
        Ok(Self {
            dim: p,
            gaussians,
            deltas,
        })
    }
}

impl Serialize for SpaceElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ElementRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpaceElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let record = ElementRecord::deserialize(d)?;
        SpaceElement::try_from(record).map_err(serde::de::Error::custom)
    }
}
