//! Closed-form complex Gaussian integrals with polynomial prefactors.
//!
//! Evaluates `∫ P(z) exp(-½ zᵀQz + Bᵀz) dz` over ℝⁿ for complex symmetric `Q`
//! whose real part is positive definite.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::poly::{MultiIndex, Poly, C64};

/// Smallest eigenvalue below which a real quadratic form counts as not
/// positive definite.
pub const PD_TOLERANCE: f64 = 1e-10;

fn real_part(q: &DMatrix<C64>) -> DMatrix<f64> {
    let r = q.map(|c| c.re);
    (&r + r.transpose()) * 0.5
}

fn imag_part(q: &DMatrix<C64>) -> DMatrix<f64> {
    let s = q.map(|c| c.im);
    (&s + s.transpose()) * 0.5
}

/// Smallest eigenvalue of the (symmetrized) real part of `q`.
pub fn real_part_min_eigenvalue(q: &DMatrix<C64>) -> f64 {
    if q.is_empty() {
        return f64::INFINITY;
    }
    SymmetricEigen::new(real_part(q))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Fails with `DivergentNorm` unless `Re q` is positive definite.
pub fn require_convergent(q: &DMatrix<C64>) -> Result<()> {
    let min_eigenvalue = real_part_min_eigenvalue(q);
    if min_eigenvalue > PD_TOLERANCE {
        Ok(())
    } else {
        Err(Error::DivergentNorm { min_eigenvalue })
    }
}

/// `sqrt(det Q)` on the branch continued from the real positive-definite
/// part: with `Q = R + iS`, `det Q = det R · ∏(1 + iμⱼ)` where `μⱼ` are the
/// eigenvalues of `R^{-1/2} S R^{-1/2}`, and each factor has positive real part.
pub fn sqrt_det(q: &DMatrix<C64>) -> Result<C64> {
    require_convergent(q)?;
    let r = real_part(q);
    let s = imag_part(q);
    let eig = SymmetricEigen::new(r);
    let mut root = C64::new(1.0, 0.0);
    for &lam in eig.eigenvalues.iter() {
        root *= lam.sqrt();
    }
    if s.iter().all(|v| *v == 0.0) {
        return Ok(root);
    }
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let m = &inv_sqrt * s * &inv_sqrt;
    let m = (&m + m.transpose()) * 0.5;
    for mu in SymmetricEigen::new(m).eigenvalues.iter() {
        root *= C64::new(1.0, *mu).sqrt();
    }
    Ok(root)
}

/// Raw moments `E[z^γ]` of a complex Gaussian with mean `μ` and covariance `Σ`,
/// via `E[zᵢ z^γ] = μᵢ E[z^γ] + Σⱼ Σᵢⱼ γⱼ E[z^{γ-eⱼ}]`.
struct Moments<'a> {
    mean: &'a DVector<C64>,
    cov: &'a DMatrix<C64>,
    memo: HashMap<MultiIndex, C64>,
}

impl Moments<'_> {
    fn get(&mut self, gamma: &MultiIndex) -> C64 {
        if let Some(v) = self.memo.get(gamma) {
            return *v;
        }
        let value = match gamma.iter().position(|&k| k > 0) {
            None => C64::new(1.0, 0.0),
            Some(i) => {
                let mut rest = gamma.clone();
                rest[i] -= 1;
                let mut v = self.mean[i] * self.get(&rest);
                for j in 0..rest.len() {
                    if rest[j] > 0 {
                        let mut lower = rest.clone();
                        lower[j] -= 1;
                        v += self.cov[(i, j)] * rest[j] as f64 * self.get(&lower);
                    }
                }
                v
            }
        };
        self.memo.insert(gamma.clone(), value);
        value
    }
}

/// `∫ poly(z) exp(-½ zᵀQz + Bᵀz + c0) dz` in closed form.
pub fn gaussian_integral(poly: &Poly, q: &DMatrix<C64>, b: &DVector<C64>, c0: C64) -> Result<C64> {
    let n = q.nrows();
    assert_eq!(poly.nvars(), n);
    if poly.is_zero() {
        require_convergent(q)?;
        return Ok(C64::new(0.0, 0.0));
    }
    let root = sqrt_det(q)?;
    let cov = q
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("gaussian quadratic form".into()))?;
    let mean = &cov * b;
    let exponent = b.dot(&mean) * 0.5 + c0;
    let norm = C64::new((2.0 * PI).powf(n as f64 / 2.0), 0.0) / root * exponent.exp();
    let mut moments = Moments {
        mean: &mean,
        cov: &cov,
        memo: HashMap::new(),
    };
    let mut total = C64::new(0.0, 0.0);
    for (e, c) in poly.terms() {
        total += c * moments.get(e);
    }
    Ok(norm * total)
}
