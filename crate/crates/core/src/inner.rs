//! Closed-form inner products `(f, g) = ∫∫ k(x, y) f(x) conj(g(y)) dx dy`.

use nalgebra::{DMatrix, DVector};

use crate::element::{DeltaJetTerm, GaussianTerm, SpaceElement};
use crate::error::{check_dim, Error, Result};
use crate::gaussian::gaussian_integral;
use crate::kernel::{derivative_poly, KernelFamily, KernelSpec};
use crate::poly::{Poly, C64};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn parity_sign(order: u32) -> f64 {
    if order % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

struct GaussianPairing {
    weights: Vec<f64>,
}

impl GaussianPairing {
    fn kmat(&self) -> DMatrix<C64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.weights.len(),
            self.weights.iter().map(|&w| c(w)),
        ))
    }

    fn gauss_gauss(&self, f: &GaussianTerm, g: &GaussianTerm) -> Result<C64> {
        let p = f.dim();
        let k = self.kmat();
        let mut q = DMatrix::<C64>::zeros(2 * p, 2 * p);
        q.view_mut((0, 0), (p, p)).copy_from(&(&f.quad + &k));
        q.view_mut((p, p), (p, p))
            .copy_from(&(g.quad.map(|z| z.conj()) + &k));
        q.view_mut((0, p), (p, p)).copy_from(&(-&k));
        q.view_mut((p, 0), (p, p)).copy_from(&(-&k));
        let mut b = DVector::<C64>::zeros(2 * p);
        b.rows_mut(0, p).copy_from(&f.lin);
        b.rows_mut(p, p).copy_from(&g.lin.map(|z| z.conj()));
        let poly = &f.poly.embed(2 * p, 0) * &g.poly.conj().embed(2 * p, p);
        let v = gaussian_integral(&poly, &q, &b, c(0.0))?;
        Ok(f.coeff * g.coeff.conj() * v)
    }

    /// `∫ h(y) P(s·(y - a)) κ(y - a) dy` where `h = coeff·poly·exp(...)`
    /// (already conjugated if needed) and `P` is a derivative polynomial.
    fn smoothed(
        &self,
        coeff: C64,
        poly: &Poly,
        quad: &DMatrix<C64>,
        lin: &DVector<C64>,
        deriv: &Poly,
        sign: f64,
        a: &[f64],
    ) -> Result<C64> {
        let p = a.len();
        let k = self.kmat();
        let av = DVector::from_iterator(p, a.iter().map(|&v| c(v)));
        let q = quad + &k;
        let b = lin + &k * &av;
        let c0 = -(av.transpose() * &k * &av)[(0, 0)] * 0.5;
        // P(s·(y - a)) as a polynomial in y
        let subs: Vec<Poly> = (0..p)
            .map(|i| {
                let mut coeffs = vec![c(0.0); p];
                coeffs[i] = c(sign);
                Poly::linear(c(-sign * a[i]), &coeffs)
            })
            .collect();
        let shifted = deriv.substitute(&subs);
        let v = gaussian_integral(&(poly * &shifted), &q, &b, c0)?;
        Ok(coeff * v)
    }

    fn delta_gauss(&self, d: &DeltaJetTerm, g: &GaussianTerm) -> Result<C64> {
        // (−1)^{|α|} ∫ P_α(a − y) κ(a − y) conj(g(y)) dy
        let deriv = derivative_poly(&self.weights, &d.orders);
        let v = self.smoothed(
            g.coeff.conj(),
            &g.poly.conj(),
            &g.quad.map(|z| z.conj()),
            &g.lin.map(|z| z.conj()),
            &deriv,
            -1.0,
            &d.base,
        )?;
        Ok(d.coeff * v * parity_sign(d.order()))
    }

    fn gauss_delta(&self, f: &GaussianTerm, d: &DeltaJetTerm) -> Result<C64> {
        // ∫ f(x) P_β(x − b) κ(x − b) dx
        let deriv = derivative_poly(&self.weights, &d.orders);
        let v = self.smoothed(f.coeff, &f.poly, &f.quad, &f.lin, &deriv, 1.0, &d.base)?;
        Ok(v * d.coeff.conj())
    }

    fn delta_delta(&self, a: &DeltaJetTerm, b: &DeltaJetTerm) -> C64 {
        // (−1)^{|α|} P_{α+β}(a − b) κ(a − b)
        let orders: Vec<u32> = a.orders.iter().zip(&b.orders).map(|(x, y)| x + y).collect();
        let delta: Vec<f64> = a.base.iter().zip(&b.base).map(|(x, y)| x - y).collect();
        let p = derivative_poly(&self.weights, &orders).eval_real(&delta);
        let q: f64 = self
            .weights
            .iter()
            .zip(&delta)
            .map(|(w, d)| w * d * d)
            .sum();
        a.coeff * b.coeff.conj() * p * (-0.5 * q).exp() * parity_sign(a.order())
    }
}

/// Inner product of two elements under `spec`, in closed form.
pub fn inner_product(e1: &SpaceElement, e2: &SpaceElement, spec: &KernelSpec) -> Result<C64> {
    spec.validate()?;
    check_dim(spec.dim(), e1.dim)?;
    check_dim(spec.dim(), e2.dim)?;
    match spec.family {
        KernelFamily::Gaussian => gaussian_inner(e1, e2, spec),
        KernelFamily::PeriodicSobolev => periodic_inner(e1, e2, spec),
    }
}

fn gaussian_inner(e1: &SpaceElement, e2: &SpaceElement, spec: &KernelSpec) -> Result<C64> {
    let pairing = GaussianPairing {
        weights: spec.weights(),
    };
    let mut total = C64::new(0.0, 0.0);
    for f in &e1.gaussians {
        for g in &e2.gaussians {
            total += pairing.gauss_gauss(f, g)?;
        }
        for d in &e2.deltas {
            total += pairing.gauss_delta(f, d)?;
        }
    }
    for d in &e1.deltas {
        for g in &e2.gaussians {
            total += pairing.delta_gauss(d, g)?;
        }
        for d2 in &e2.deltas {
            total += pairing.delta_delta(d, d2);
        }
    }
    Ok(total * spec.prefactor())
}

fn periodic_inner(e1: &SpaceElement, e2: &SpaceElement, spec: &KernelSpec) -> Result<C64> {
    if !e1.gaussians.is_empty() || !e2.gaussians.is_empty() {
        return Err(Error::Unsupported(
            "periodic Sobolev inner products of gaussian terms".into(),
        ));
    }
    let kernel = spec.build()?;
    let mut total = C64::new(0.0, 0.0);
    for a in &e1.deltas {
        for b in &e2.deltas {
            if a.order() > 0 || b.order() > 0 {
                return Err(Error::Unsupported(
                    "periodic Sobolev kernel pairs only zero-order deltas".into(),
                ));
            }
            total += a.coeff * b.coeff.conj() * kernel.eval_unchecked(&a.base, &b.base);
        }
    }
    Ok(total)
}

/// `(e, e)`; the imaginary round-off is discarded.
pub fn norm_squared(e: &SpaceElement, spec: &KernelSpec) -> Result<f64> {
    let v = inner_product(e, e, spec)?;
    debug_assert!(
        v.im.abs() <= 1e-9 * v.norm().max(1e-300),
        "self inner product not real: {v}"
    );
    Ok(v.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Signature;
    use std::f64::consts::{PI, SQRT_2};

    fn time_spec() -> KernelSpec {
        KernelSpec::gaussian(Signature { pos: 0, neg: 1 })
    }

    fn time_toy(poly: Poly) -> SpaceElement {
        SpaceElement::from_gaussian(GaussianTerm::isotropic(1.0, 4.0, &[0.0]).times_poly(&poly))
    }

    #[test]
    fn unit_gaussian_normalized_norm() {
        let f = SpaceElement::from_gaussian(GaussianTerm::unit_l2(1));
        let n = norm_squared(&f, &KernelSpec::normalized_gaussian(1, 1.0)).unwrap();
        assert!((n - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn even_time_toy_positive() {
        let n = norm_squared(&time_toy(Poly::one(1)), &time_spec()).unwrap();
        assert!((n - PI / SQRT_2).abs() < 1e-13);
    }

    #[test]
    fn odd_time_toy_negative() {
        let n = norm_squared(&time_toy(Poly::var(1, 0)), &time_spec()).unwrap();
        assert!((n + PI / (8.0 * SQRT_2)).abs() < 1e-13);
    }

    #[test]
    fn delta_norm_is_one() {
        let d = SpaceElement::delta(&[0.3, 1.0, -2.0, 5.0]);
        assert_eq!(norm_squared(&d, &KernelSpec::minkowski()).unwrap(), 1.0);
        assert_eq!(
            norm_squared(&SpaceElement::zero(4), &KernelSpec::minkowski()).unwrap(),
            0.0
        );
    }

    #[test]
    fn delta_pairs_with_gaussian_by_evaluation_of_smoothed_function() {
        // (δ_a, g) = ∫ k(a, y) conj(g(y)) dy; for g = e^{-y²/2}, k = e^{-(a-y)²/2}:
        // √π · e^{-a²/4}
        let g = SpaceElement::from_gaussian(GaussianTerm::isotropic(1.0, 1.0, &[0.0]));
        let a = 0.8;
        let v = inner_product(&SpaceElement::delta(&[a]), &g, &KernelSpec::euclidean(1)).unwrap();
        assert!((v.re - PI.sqrt() * (-a * a / 4.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn delta_derivative_pairing_sign() {
        // (δ'_a, δ_b) = -∂_x k(x, b)|_{x=a} = (a - b) k(a, b)
        let spec = KernelSpec::euclidean(1);
        let d1 = SpaceElement::delta_jet(&[0.5], vec![1], C64::new(1.0, 0.0)).unwrap();
        let d0 = SpaceElement::delta(&[0.0]);
        let v = inner_product(&d1, &d0, &spec).unwrap();
        assert!((v.re - 0.5 * (-0.125f64).exp()).abs() < 1e-15);
        let w = inner_product(&d0, &d1, &spec).unwrap();
        assert!((w - v.conj()).norm() < 1e-15);
    }

    #[test]
    fn divergent_time_toy() {
        // e^{-t²} sits on the boundary: Re Q has a zero eigenvalue
        let f = SpaceElement::from_gaussian(GaussianTerm::isotropic(1.0, 2.0, &[0.0]));
        assert!(matches!(
            norm_squared(&f, &time_spec()),
            Err(Error::DivergentNorm { .. })
        ));
    }

    #[test]
    fn periodic_rejects_gaussians() {
        let g = SpaceElement::from_gaussian(GaussianTerm::unit_l2(1));
        assert!(inner_product(&g, &g, &KernelSpec::periodic_sobolev(10)).is_err());
    }
}
