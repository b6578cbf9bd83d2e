use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    at_most, num, rng, text, Context, ExpResult, Experiment, ExperimentError, Outcome, Table,
    ToleranceSpec, RUNTIME,
};
use crate::catalog::{builtin, parse_embedding, CatalogEntry};
use crate::embedding::{induced_metric, PulledBackKernel};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub manifolds: Vec<String>,
    /// Additional embeddings in the TOML embedding format.
    pub embedding_files: Vec<PathBuf>,
    pub points: usize,
    pub step: f64,
    /// Coarse step of the halving test.
    pub ratio_step: f64,
    pub margin: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            manifolds: [
                "euclidean3",
                "minkowski31",
                "sphere2",
                "flat_torus2",
                "de_sitter2",
            ]
            .map(String::from)
            .to_vec(),
            embedding_files: Vec::new(),
            points: 25,
            step: 1e-4,
            ratio_step: 1e-2,
            margin: 0.05,
        }
    }
}

/// Induced metric of the delta image against the known metric, plus the
/// second-order convergence of the difference quotient.
pub struct MetricRecovery;

const TOLERANCES: &[ToleranceSpec] = &[
    at_most("relative_error", 1e-6),
    at_most("fd_ratio_deviation", 0.5),
    at_most(RUNTIME, 30.0),
];

fn fmt_vec(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

struct ManifoldResult {
    name: String,
    rows: Vec<(Vec<f64>, Vec<f64>, f64)>,
    steps: [(f64, f64); 2],
}

fn recover(entry: &CatalogEntry, p: &Params, seed: u64) -> ExpResult<ManifoldResult> {
    if !entry.supports_metric_recovery() {
        return Err(ExperimentError::Config(format!(
            "{}: kernel is not smooth enough for metric recovery",
            entry.name
        )));
    }
    let pk = PulledBackKernel::new(entry.embedding.clone(), entry.kernel.clone())?;
    let mut r = rng(seed);
    let points: Vec<Vec<f64>> = (0..p.points)
        .map(|_| entry.domain().sample(&mut r, p.margin))
        .collect();
    let rows = points
        .par_iter()
        .map(|u| -> ExpResult<_> {
            let g = induced_metric(&pk, u, p.step)?;
            let reference = entry.analytic_metric(u)?;
            let dev = g.max_relative_deviation(&reference);
            Ok((
                u.clone(),
                g.components.iter().copied().collect::<Vec<_>>(),
                dev,
            ))
        })
        .collect::<ExpResult<Vec<_>>>()?;
    let u0 = &points[0];
    let reference = entry.analytic_metric(u0)?;
    let err = |h: f64| -> ExpResult<f64> {
        Ok((induced_metric(&pk, u0, h)?.components - &reference.components).amax())
    };
    let steps = [
        (p.ratio_step, err(p.ratio_step)?),
        (0.5 * p.ratio_step, err(0.5 * p.ratio_step)?),
    ];
    Ok(ManifoldResult {
        name: entry.name.clone(),
        rows,
        steps,
    })
}

impl Experiment for MetricRecovery {
    fn name(&self) -> &'static str {
        "metric-recovery"
    }

    fn description(&self) -> &'static str {
        "induced metric of embedded manifolds against their analytic metrics"
    }

    fn tolerances(&self) -> &'static [ToleranceSpec] {
        TOLERANCES
    }

    fn run(&self, ctx: &Context) -> ExpResult<Outcome> {
        let p: Params = ctx.params()?;
        if p.points == 0 || !(p.step > 0.0) || !(p.ratio_step > 0.0) {
            return Err(ExperimentError::Config(
                "points and steps must be positive".into(),
            ));
        }
        let mut entries = Vec::new();
        for name in &p.manifolds {
            entries.push(builtin(name).map_err(|e| ExperimentError::Config(e.to_string()))?);
        }
        for path in &p.embedding_files {
            let src = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
            let entry = parse_embedding(&src)
                .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
            entries.push(entry);
        }
        let results = entries
            .iter()
            .enumerate()
            .map(|(i, e)| recover(e, &p, ctx.seed.wrapping_add(i as u64)))
            .collect::<ExpResult<Vec<_>>>()?;

        let mut out = Outcome::default();
        let mut metrics = Table::new(
            "metrics",
            &[
                "manifold",
                "point",
                "coordinates",
                "components",
                "relative_error",
            ],
        );
        let mut steps = Table::new("fd_steps", &["manifold", "step", "abs_error", "ratio"]);
        let (mut worst, mut ratio_dev): (f64, f64) = (0.0, 0.0);
        for r in &results {
            for (i, (u, g, dev)) in r.rows.iter().enumerate() {
                worst = worst.max(*dev);
                metrics.push(vec![
                    text(&r.name),
                    num(i as f64),
                    text(fmt_vec(u)),
                    text(fmt_vec(g)),
                    num(*dev),
                ]);
            }
            let ratio = r.steps[0].1 / r.steps[1].1;
            ratio_dev = ratio_dev.max((ratio - 4.0).abs());
            if ratio.is_nan() {
                ratio_dev = f64::NAN;
            }
            for (h, e) in r.steps {
                steps.push(vec![text(&r.name), num(h), num(e), num(ratio)]);
            }
        }
        out.measure("relative_error", worst);
        out.measure("fd_ratio_deviation", ratio_dev);
        out.tables.push(metrics);
        out.tables.push(steps);
        out.params = serde_json::to_value(&p).unwrap_or_default();
        Ok(out)
    }
}
