//! Tensor-product Gauss–Legendre quadrature of the double integral that
//! defines an inner product. Independent of the closed-form path in
//! [`crate::inner`]; intended as an oracle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::element::SpaceElement;
use crate::error::{check_dim, Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::poly::C64;

fn one_panel() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Nodes per panel and dimension.
    pub nodes: usize,
    /// Each dimension is integrated over `[-radius, radius]`.
    pub radius: f64,
    /// Equal sub-intervals per dimension, each with its own rule.
    #[serde(default = "one_panel")]
    pub panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            nodes: 64,
            radius: 8.0,
            panels: 1,
        }
    }
}

impl QuadratureConfig {
    /// Composite rule with `panels × nodes` points per dimension.
    pub fn composite(nodes: usize, panels: usize, radius: f64) -> Self {
        Self {
            nodes,
            radius,
            panels,
        }
    }

    /// Nodes and weights of the one-dimensional rule on `[-radius, radius]`.
    pub fn rule(&self) -> (Vec<f64>, Vec<f64>) {
        let (xs, ws) = gauss_legendre(self.nodes);
        let half = self.radius / self.panels as f64;
        let mut nodes = Vec::with_capacity(self.nodes * self.panels);
        let mut weights = Vec::with_capacity(self.nodes * self.panels);
        for k in 0..self.panels {
            let mid = -self.radius + (2 * k + 1) as f64 * half;
            nodes.extend(xs.iter().map(|x| mid + x * half));
            weights.extend(ws.iter().map(|w| w * half));
        }
        (nodes, weights)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn multi_index(mut flat: usize, n: usize, p: usize) -> Vec<usize> {
    let mut idx = vec![0; p];
    for d in (0..p).rev() {
        idx[d] = flat % n;
        flat /= n;
    }
    idx
}

/// Quadrature estimate of `∫∫ k(x, y) e1(x) conj(e2(y)) dx dy`.
pub fn quadrature_inner_product(
    e1: &SpaceElement,
    e2: &SpaceElement,
    spec: &KernelSpec,
    grid: &QuadratureConfig,
) -> Result<C64> {
    spec.validate()?;
    if spec.family != KernelFamily::Gaussian {
        return Err(Error::Unsupported(
            "quadrature oracle covers the gaussian family".into(),
        ));
    }
    if e1.has_deltas() || e2.has_deltas() {
        return Err(Error::Unsupported("quadrature of delta functionals".into()));
    }
    let p = spec.dim();
    check_dim(p, e1.dim)?;
    check_dim(p, e2.dim)?;
    if grid.nodes == 0 || grid.panels == 0 || grid.radius <= 0.0 {
        return Err(Error::Unsupported("empty quadrature grid".into()));
    }

    let (nodes, weights) = grid.rule();
    let n = nodes.len();
    let weights_c = spec.weights();
    let total = n.pow(p as u32);

    let point = |flat: usize| -> (Vec<f64>, f64) {
        let idx = multi_index(flat, n, p);
        let z: Vec<f64> = idx.iter().map(|&i| nodes[i]).collect();
        let w: f64 = idx.iter().map(|&i| weights[i]).product();
        (z, w)
    };

    let mut f = Vec::with_capacity(total);
    let mut g = Vec::with_capacity(total);
    for flat in 0..total {
        let (z, w) = point(flat);
        f.push(e1.eval(&z)? * w);
        g.push(e2.eval(&z)?.conj() * w);
    }

    // apply the separable kernel one axis at a time: g ← (⊗ κ_d) g
    for (d, &cw) in weights_c.iter().enumerate() {
        let kappa: Vec<f64> = (0..n * n)
            .map(|ij| {
                let dx = nodes[ij / n] - nodes[ij % n];
                (-0.5 * cw * dx * dx).exp()
            })
            .collect();
        let stride = n.pow((p - 1 - d) as u32);
        let mut out = vec![C64::new(0.0, 0.0); total];
        for (flat, slot) in out.iter_mut().enumerate() {
            let i = (flat / stride) % n;
            let base = flat - i * stride;
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                acc += g[base + j * stride] * kappa[i * n + j];
            }
            *slot = acc;
        }
        g = out;
    }

    let value: C64 = f.iter().zip(&g).map(|(a, b)| a * b).sum::<C64>() * spec.prefactor();
    check_boundary_growth(e1, e2, spec, grid.radius, value)?;
    Ok(value)
}

/// Heuristic divergence probe: the integrand must be negligible on the
/// boundary of the integration box. Probes every point of `{-R, 0, R}^{2p}`
/// with at least one coordinate at `±R`.
fn check_boundary_growth(
    e1: &SpaceElement,
    e2: &SpaceElement,
    spec: &KernelSpec,
    radius: f64,
    value: C64,
) -> Result<()> {
    let p = spec.dim();
    let kernel = spec.build()?;
    let levels = [-radius, 0.0, radius];
    let integrand = |z: &[f64]| -> Result<f64> {
        let (x, y) = z.split_at(p);
        Ok((kernel.eval_unchecked(x, y) * e1.eval(x)? * e2.eval(y)?.conj()).norm())
    };
    let zero = vec![0.0; 2 * p];
    let reference = value.norm().max(integrand(&zero)?).max(1e-300);
    let count = 3usize.pow(2 * p as u32);
    let mut worst: f64 = 0.0;
    for flat in 0..count {
        let idx = multi_index(flat, 3, 2 * p);
        if idx.iter().all(|&i| i == 1) {
            continue;
        }
        let z: Vec<f64> = idx.iter().map(|&i| levels[i]).collect();
        let v = integrand(&z)?;
        if !v.is_finite() {
            worst = f64::INFINITY;
            break;
        }
        worst = worst.max(v);
    }
    if !value.re.is_finite() || !value.im.is_finite() || worst > 1e-6 * reference {
        return Err(Error::DivergentNorm {
            min_eigenvalue: f64::NAN,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::GaussianTerm;
    use crate::kernel::Signature;
    use crate::poly::Poly;

    #[test]
    fn legendre_weights_integrate_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // ∫ x^8 = 2/9
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((m - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn unit_gaussian_norm() {
        let f = SpaceElement::from_gaussian(GaussianTerm::unit_l2(1));
        let v = quadrature_inner_product(
            &f,
            &f,
            &KernelSpec::normalized_gaussian(1, 1.0),
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!((v.re - (2.0f64 / 3.0).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn divergence_detected() {
        let f = SpaceElement::from_gaussian(GaussianTerm::isotropic(1.0, 1.5, &[0.0]));
        let spec = KernelSpec::gaussian(Signature { pos: 0, neg: 1 });
        assert!(matches!(
            quadrature_inner_product(&f, &f, &spec, &QuadratureConfig::default()),
            Err(Error::DivergentNorm { .. })
        ));
    }

    #[test]
    fn even_odd_orthogonal() {
        let even = SpaceElement::from_gaussian(GaussianTerm::isotropic(1.0, 4.0, &[0.0]));
        let odd = SpaceElement::from_gaussian(
            GaussianTerm::isotropic(1.0, 4.0, &[0.0]).times_poly(&Poly::var(1, 0)),
        );
        let spec = KernelSpec::gaussian(Signature { pos: 0, neg: 1 });
        let v = quadrature_inner_product(&even, &odd, &spec, &QuadratureConfig::default()).unwrap();
        assert!(v.norm() < 1e-10);
    }

    #[test]
    fn composite_rule_resolves_narrow_kernels() {
        let f = SpaceElement::from_gaussian(GaussianTerm::unit_l2(1));
        for l in [1.0f64, 5.0, 20.0] {
            let spec = KernelSpec::normalized_gaussian(1, l);
            let grid = QuadratureConfig::composite(8, 96, 9.0);
            let v = quadrature_inner_product(&f, &f, &spec, &grid).unwrap();
            let want = (1.0 + 0.5 / (l * l)).powf(-0.5);
            assert!((v.re - want).abs() < 1e-9, "L={l}: {:e}", v.re - want);
        }
        let (x, w) = QuadratureConfig::composite(4, 3, 1.5).rule();
        assert_eq!(x.len(), 12);
        assert!((w.iter().sum::<f64>() - 3.0).abs() < 1e-14);
    }
}
