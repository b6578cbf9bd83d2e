use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    at_most, monotone_violation, num, text, Context, ExpResult, Experiment, Outcome, Table,
    ToleranceSpec, RUNTIME,
};
use crate::element::{GaussianTerm, SpaceElement};
use crate::inner::norm_squared;
use crate::kernel::KernelSpec;
use crate::quadrature::{quadrature_inner_product, QuadratureConfig};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub dims: Vec<usize>,
    pub scales: Vec<f64>,
    pub quadrature: QuadratureConfig,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            dims: vec![1, 3],
            scales: vec![1.0, 2.0, 5.0, 10.0, 20.0],
            quadrature: QuadratureConfig::composite(8, 96, 9.0),
        }
    }
}

/// `(1 + 1/(2L²))^{-d/2}`.
pub fn expected_norm(dim: usize, scale: f64) -> f64 {
    (1.0 + 0.5 / (scale * scale)).powf(-(dim as f64) / 2.0)
}

/// Normalized-kernel norm of the unit gaussian in closed form and by
/// quadrature; above one dimension the quadrature uses the product
/// structure of the element and kernel.
pub struct NormConvergence;

const TOLERANCES: &[ToleranceSpec] = &[
    at_most("closed_form", 1e-10),
    at_most("oracle", 1e-6),
    at_most("monotone", 0.0),
    at_most("overshoot", 0.0),
    at_most(RUNTIME, 5.0),
];

struct Row {
    dim: usize,
    scale: f64,
    closed: f64,
    oracle: f64,
    method: &'static str,
}

impl Experiment for NormConvergence {
    fn name(&self) -> &'static str {
        "norm-convergence"
    }

    fn description(&self) -> &'static str {
        "norm of the unit L2 gaussian under the normalized gaussian kernel as L grows"
    }

    fn tolerances(&self) -> &'static [ToleranceSpec] {
        TOLERANCES
    }

    fn run(&self, ctx: &Context) -> ExpResult<Outcome> {
        let p: Params = ctx.params()?;
        let cases: Vec<(usize, f64)> = p
            .dims
            .iter()
            .flat_map(|&d| p.scales.iter().map(move |&l| (d, l)))
            .collect();
        let rows = cases
            .par_iter()
            .map(|&(dim, scale)| -> ExpResult<Row> {
                let f = SpaceElement::from_gaussian(GaussianTerm::unit_l2(dim));
                let closed = norm_squared(&f, &KernelSpec::normalized_gaussian(dim, scale))?;
                let (oracle, method) = if dim == 1 {
                    let q = quadrature_inner_product(
                        &f,
                        &f,
                        &KernelSpec::normalized_gaussian(1, scale),
                        &p.quadrature,
                    )?;
                    (q.re, "tensor")
                } else {
                    let f1 = SpaceElement::from_gaussian(GaussianTerm::unit_l2(1));
                    let q = quadrature_inner_product(
                        &f1,
                        &f1,
                        &KernelSpec::normalized_gaussian(1, scale),
                        &p.quadrature,
                    )?;
                    (q.re.powi(dim as i32), "separable")
                };
                Ok(Row {
                    dim,
                    scale,
                    closed,
                    oracle,
                    method,
                })
            })
            .collect::<ExpResult<Vec<_>>>()?;

        let mut out = Outcome::default();
        let mut table = Table::new(
            "norms",
            &[
                "dim",
                "scale",
                "closed_form",
                "target",
                "closed_form_error",
                "quadrature",
                "oracle_error",
                "oracle_method",
            ],
        );
        let (mut closed_err, mut oracle_err, mut overshoot): (f64, f64, f64) =
            (0.0, 0.0, f64::NEG_INFINITY);
        for r in &rows {
            let target = expected_norm(r.dim, r.scale);
            let ce = (r.closed - target).abs();
            let oe = (r.closed - r.oracle).abs();
            closed_err = closed_err.max(ce);
            oracle_err = oracle_err.max(oe);
            overshoot = overshoot.max(r.closed - 1.0);
            table.push(vec![
                num(r.dim as f64),
                num(r.scale),
                num(r.closed),
                num(target),
                num(ce),
                num(r.oracle),
                num(oe),
                text(r.method),
            ]);
        }
        let mut monotone: f64 = 0.0;
        for &d in &p.dims {
            let mut series: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.dim == d)
                .map(|r| (r.scale, r.closed))
                .collect();
            series.sort_by(|a, b| a.0.total_cmp(&b.0));
            let values: Vec<f64> = series.iter().map(|s| s.1).collect();
            monotone = monotone.max(monotone_violation(&values));
        }
        out.measure("closed_form", closed_err);
        out.measure("oracle", oracle_err);
        out.measure("monotone", monotone);
        out.measure("overshoot", overshoot);
        out.tables.push(table);
        if ctx.dump_elements {
            for &d in &p.dims {
                out.dump(
                    format!("unit_gaussian_d{d}"),
                    SpaceElement::from_gaussian(GaussianTerm::unit_l2(d)),
                );
            }
        }
        out.params = serde_json::to_value(&p).unwrap_or_default();
        Ok(out)
    }
}
