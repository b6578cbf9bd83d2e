use std::f64::consts::{PI, SQRT_2};

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    at_most, num, rng, text, Context, ExpResult, Experiment, Outcome, Table, ToleranceSpec, RUNTIME,
};
use crate::element::{even_odd_split, GaussianTerm, SpaceElement};
use crate::error::Error;
use crate::inner::{inner_product, norm_squared};
use crate::kernel::{KernelSpec, Signature};
use crate::poly::{Poly, C64};
use crate::quadrature::{quadrature_inner_product, QuadratureConfig};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Random elements per parity.
    pub krein_samples: usize,
    pub pairs: usize,
    pub boundary_cases: usize,
    /// Smallest distance of a boundary case from the convergence edge.
    pub min_margin: f64,
    /// Smallest eigenvalue of the combined form for oracle pairs, so the
    /// integrand is negligible on the quadrature box.
    pub pair_margin: f64,
    pub quadrature: QuadratureConfig,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            krein_samples: 200,
            pairs: 20,
            boundary_cases: 50,
            min_margin: 1e-6,
            pair_margin: 0.5,
            quadrature: QuadratureConfig {
                nodes: 96,
                radius: 10.0,
                panels: 1,
            },
        }
    }
}

/// Krein sign structure, closed form against quadrature, and the
/// divergence criterion on cases built next to the convergence edge.
pub struct OracleCheck;

const TOLERANCES: &[ToleranceSpec] = &[
    at_most("krein_violations", 0.0),
    at_most("parity_cross", 1e-12),
    at_most("toy_error", 1e-9),
    at_most("oracle_relative", 1e-6),
    at_most("divergence_mismatches", 0.0),
    at_most(RUNTIME, 10.0),
];

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn time_signature() -> Signature {
    Signature { pos: 0, neg: 1 }
}

/// Symmetric matrix with eigenvalues in `range`, randomly rotated in 2-D.
fn random_symmetric<R: Rng>(r: &mut R, dim: usize, range: (f64, f64)) -> DMatrix<f64> {
    let eig: Vec<f64> = (0..dim).map(|_| r.random_range(range.0..range.1)).collect();
    let d = DMatrix::from_diagonal(&DVector::from_vec(eig));
    if dim == 2 {
        let a: f64 = r.random_range(0.0..PI);
        let rot = DMatrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()]);
        &rot * d * rot.transpose()
    } else {
        d
    }
}

fn random_term<R: Rng>(r: &mut R, dim: usize, widths: (f64, f64), momentum: f64) -> GaussianTerm {
    let a = random_symmetric(r, dim, widths);
    let center: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut t = GaussianTerm::centered(r.random_range(0.5..1.5), &a, &center).expect("square");
    for k in 0..dim {
        t.lin[k] += C64::new(0.0, r.random_range(-momentum..=momentum));
    }
    t.coeff *= C64::from_polar(1.0, r.random_range(0.0..PI));
    let slope: Vec<C64> = (0..dim).map(|_| c(r.random_range(-0.5..0.5))).collect();
    t.times_poly(&Poly::linear(c(1.0), &slope))
}

/// Random element whose negative coordinate centres stay away from the
/// reflection plane, so both parity parts are nonzero.
fn krein_element<R: Rng>(r: &mut R, sig: Signature) -> SpaceElement {
    debug_assert!(sig.neg > 0);
    let n = sig.dim();
    let terms = r.random_range(1..=3);
    let mut e = SpaceElement::zero(n);
    for _ in 0..terms {
        let center: Vec<f64> = (0..n)
            .map(|k| {
                if k >= sig.pos {
                    let s = if r.random_bool(0.5) { 1.0 } else { -1.0 };
                    s * r.random_range(0.2..1.0)
                } else {
                    r.random_range(-1.0..1.0)
                }
            })
            .collect();
        let a = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            (0..n).map(|_| r.random_range(2.5..5.0)),
        ));
        let t = GaussianTerm::centered(r.random_range(-1.0..1.0), &a, &center).expect("square");
        e.gaussians.push(t);
    }
    e
}

fn random_spec<R: Rng>(r: &mut R, dim: usize) -> KernelSpec {
    match (dim, r.random_range(0..3)) {
        (_, 0) => KernelSpec::euclidean(dim),
        (_, 1) => KernelSpec::normalized_gaussian(dim, r.random_range(0.7..2.0)),
        (1, _) => KernelSpec::gaussian(time_signature()),
        _ => KernelSpec::gaussian(Signature { pos: 1, neg: 1 }),
    }
}

/// The combined form of `(f, g)` assembled directly from the definitions.
fn combined_form(f: &GaussianTerm, g: &GaussianTerm, spec: &KernelSpec) -> DMatrix<f64> {
    let p = f.dim();
    let k = DMatrix::from_diagonal(&DVector::from_vec(spec.weights()));
    let mut q = DMatrix::zeros(2 * p, 2 * p);
    for i in 0..p {
        for j in 0..p {
            q[(i, j)] = f.quad[(i, j)].re + k[(i, j)];
            q[(p + i, p + j)] = g.quad[(i, j)].re + k[(i, j)];
            q[(i, p + j)] = -k[(i, j)];
            q[(p + i, j)] = -k[(i, j)];
        }
    }
    q
}

struct BoundaryCase {
    f: GaussianTerm,
    g: GaussianTerm,
    spec: KernelSpec,
    margin: f64,
}

fn boundary_case<R: Rng>(r: &mut R, index: usize, min_margin: f64) -> BoundaryCase {
    let dim = 1 + index % 2;
    let spec = random_spec(r, dim);
    let mut f = random_term(r, dim, (0.5, 4.0), 1.0);
    let mut g = random_term(r, dim, (0.5, 4.0), 1.0);
    let q = combined_form(&f, &g, &spec);
    let lambda = q.symmetric_eigenvalues().min();
    let log_lo = min_margin.log10();
    let margin = 10f64.powf(r.random_range(log_lo..-0.5));
    let target = if index % 2 == 0 { margin } else { -margin };
    let shift = target - lambda;
    for t in [&mut f, &mut g] {
        for i in 0..dim {
            t.quad[(i, i)] += c(shift);
        }
    }
    BoundaryCase {
        f,
        g,
        spec,
        margin: target,
    }
}

impl Experiment for OracleCheck {
    fn name(&self) -> &'static str {
        "oracle-check"
    }

    fn description(&self) -> &'static str {
        "Krein signs, closed form versus quadrature, and the divergence criterion"
    }

    fn tolerances(&self) -> &'static [ToleranceSpec] {
        TOLERANCES
    }

    fn run(&self, ctx: &Context) -> ExpResult<Outcome> {
        let p: Params = ctx.params()?;
        let mut r = rng(ctx.seed);
        let mut out = Outcome::default();

        // Krein signs in the time toy
        let sig = time_signature();
        let time_spec = KernelSpec::gaussian(sig);
        let elements: Vec<SpaceElement> = (0..p.krein_samples)
            .map(|_| krein_element(&mut r, sig))
            .collect();
        let krein = elements
            .par_iter()
            .map(|e| -> ExpResult<(f64, f64, f64)> {
                let (even, odd) = even_odd_split(e, &sig)?;
                Ok((
                    norm_squared(&even, &time_spec)?,
                    norm_squared(&odd, &time_spec)?,
                    inner_product(&even, &odd, &time_spec)?.norm(),
                ))
            })
            .collect::<ExpResult<Vec<_>>>()?;
        let mut signs = Table::new("krein", &["sample", "even_norm", "odd_norm", "cross"]);
        let mut violations = 0usize;
        let mut cross: f64 = 0.0;
        for (i, (even, odd, x)) in krein.iter().enumerate() {
            violations += usize::from(!(*even > 0.0)) + usize::from(!(*odd < 0.0));
            cross = cross.max(*x);
            signs.push(vec![num(i as f64), num(*even), num(*odd), num(*x)]);
        }
        let toy = |poly: Poly| {
            SpaceElement::from_gaussian(GaussianTerm::isotropic(1.0, 4.0, &[0.0]).times_poly(&poly))
        };
        let even_toy = norm_squared(&toy(Poly::one(1)), &time_spec)?;
        let odd_toy = norm_squared(&toy(Poly::var(1, 0)), &time_spec)?;
        let toy_error = (even_toy - PI / SQRT_2)
            .abs()
            .max((odd_toy + PI / (8.0 * SQRT_2)).abs());

        // closed form against quadrature
        let mut pairs = Vec::with_capacity(p.pairs);
        while pairs.len() < p.pairs {
            let dim = 1 + pairs.len() % 2;
            let spec = random_spec(&mut r, dim);
            let (ft, gt) = (
                random_term(&mut r, dim, (1.5, 4.0), 1.0),
                random_term(&mut r, dim, (1.5, 4.0), 1.0),
            );
            if combined_form(&ft, &gt, &spec).symmetric_eigenvalues().min() < p.pair_margin {
                continue;
            }
            let (f, g) = (
                SpaceElement::from_gaussian(ft),
                SpaceElement::from_gaussian(gt),
            );
            if inner_product(&f, &g, &spec)?.norm() >= 1e-3 {
                pairs.push((spec, f, g));
            }
        }
        let compared = pairs
            .par_iter()
            .map(|(spec, f, g)| -> ExpResult<(C64, C64)> {
                Ok((
                    inner_product(f, g, spec)?,
                    quadrature_inner_product(f, g, spec, &p.quadrature)?,
                ))
            })
            .collect::<ExpResult<Vec<_>>>()?;
        let mut oracle = Table::new(
            "oracle",
            &[
                "pair",
                "dim",
                "kernel",
                "closed_re",
                "closed_im",
                "quad_re",
                "quad_im",
                "relative",
            ],
        );
        let mut worst: f64 = 0.0;
        for (i, ((spec, f, _), (a, b))) in pairs.iter().zip(&compared).enumerate() {
            let rel = (a - b).norm() / a.norm();
            worst = worst.max(rel);
            let kernel = format!(
                "({},{}){}",
                spec.signature.pos,
                spec.signature.neg,
                if spec.normalized {
                    format!(" L={}", spec.scale)
                } else {
                    String::new()
                }
            );
            oracle.push(vec![
                num(i as f64),
                num(f.dim as f64),
                text(kernel),
                num(a.re),
                num(a.im),
                num(b.re),
                num(b.im),
                num(rel),
            ]);
        }

        // divergence boundary
        let cases: Vec<BoundaryCase> = (0..p.boundary_cases)
            .map(|i| boundary_case(&mut r, i, p.min_margin))
            .collect();
        let mut boundary = Table::new(
            "boundary",
            &["case", "dim", "margin", "cholesky_pd", "divergent_raised"],
        );
        let mut mismatches = 0usize;
        for (i, case) in cases.iter().enumerate() {
            let q = combined_form(&case.f, &case.g, &case.spec);
            let pd = Cholesky::new(q).is_some();
            let (f, g) = (
                SpaceElement::from_gaussian(case.f.clone()),
                SpaceElement::from_gaussian(case.g.clone()),
            );
            let raised = match inner_product(&f, &g, &case.spec) {
                Ok(_) => false,
                Err(Error::DivergentNorm { .. }) => true,
                Err(e) => return Err(e.into()),
            };
            mismatches += usize::from(raised == pd);
            boundary.push(vec![
                num(i as f64),
                num(case.f.dim() as f64),
                num(case.margin),
                text(pd.to_string()),
                text(raised.to_string()),
            ]);
        }

        out.measure("krein_violations", violations as f64);
        out.measure("parity_cross", cross);
        out.measure("toy_error", toy_error);
        out.measure("oracle_relative", worst);
        out.measure("divergence_mismatches", mismatches as f64);
        out.tables.push(signs);
        out.tables.push(oracle);
        out.tables.push(boundary);
        if ctx.dump_elements {
            for (i, e) in elements.iter().take(4).enumerate() {
                out.dump(format!("krein_{i}"), e);
            }
            for (i, (_, f, g)) in pairs.iter().take(4).enumerate() {
                out.dump(format!("pair_{i}_f"), f);
                out.dump(format!("pair_{i}_g"), g);
            }
        }
        out.params = serde_json::to_value(&p).unwrap_or_default();
        Ok(out)
    }
}
