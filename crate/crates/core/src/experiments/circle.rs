use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::{
    at_least, at_most, monotone_violation, num, Context, ExpResult, Experiment, ExperimentError,
    Outcome, Table, ToleranceSpec, RUNTIME,
};
use crate::embedding::chordal_distance;
use crate::kernel::{
    periodic_sobolev_closed_form, periodic_truncation_bound, KernelSpec, PeriodicSobolevKernel,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub truncation: usize,
    /// Truncation used for the value at zero, fine enough that the series
    /// tail is below the tolerance.
    pub reference_truncation: usize,
    /// Separations `kπ/m`, `k = 1..=m`.
    pub separations: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            truncation: 2000,
            reference_truncation: 1_000_000,
            separations: 64,
        }
    }
}

/// Chordal geometry of the circle under the periodic Sobolev kernel.
pub struct CircleTopology;

const TOLERANCES: &[ToleranceSpec] = &[
    at_most("wrap_distance", 1e-10),
    at_least("min_distance", 1e-12),
    at_most("monotone", 0.0),
    at_most("k0_error", 1e-6),
    at_most("truncation_excess", 0.0),
    at_most(RUNTIME, 10.0),
];

impl Experiment for CircleTopology {
    fn name(&self) -> &'static str {
        "circle-topology"
    }

    fn description(&self) -> &'static str {
        "periodic Sobolev kernel: identification of 0 and 2π, monotone chordal distance"
    }

    fn tolerances(&self) -> &'static [ToleranceSpec] {
        TOLERANCES
    }

    fn run(&self, ctx: &Context) -> ExpResult<Outcome> {
        let p: Params = ctx.params()?;
        if p.truncation == 0 || p.reference_truncation == 0 || p.separations == 0 {
            return Err(ExperimentError::Config(
                "truncations and separations must be positive".into(),
            ));
        }
        let spec = KernelSpec::periodic_sobolev(p.truncation);
        let kernel = PeriodicSobolevKernel::new(p.truncation);
        let bound = periodic_truncation_bound(p.truncation);
        let mut out = Outcome::default();

        let wrap = chordal_distance(&[0.0], &[TAU], &spec)?;
        let mut table = Table::new(
            "distances",
            &[
                "separation",
                "chordal_distance",
                "kernel",
                "closed_form",
                "truncation_error",
                "bound",
            ],
        );
        let mut distances = Vec::with_capacity(p.separations);
        let mut excess = f64::NEG_INFINITY;
        for k in 0..=p.separations {
            let theta = PI * k as f64 / p.separations as f64;
            let d = chordal_distance(&[0.0], &[theta], &spec)?;
            let (kn, exact) = (kernel.profile(theta), periodic_sobolev_closed_form(theta));
            excess = excess.max((kn - exact).abs() - bound);
            if k > 0 {
                distances.push(d);
            }
            table.push(vec![
                num(theta),
                num(d),
                num(kn),
                num(exact),
                num((kn - exact).abs()),
                num(bound),
            ]);
        }
        let k0_ref = PeriodicSobolevKernel::new(p.reference_truncation).profile(0.0);
        let target = 1.0 / (2.0 * PI.tanh());
        let mut reference = Table::new(
            "k0",
            &["truncation", "k0", "coth_pi_over_2", "error", "bound"],
        );
        for n in [p.truncation, p.reference_truncation] {
            let v = PeriodicSobolevKernel::new(n).profile(0.0);
            reference.push(vec![
                num(n as f64),
                num(v),
                num(target),
                num((v - target).abs()),
                num(periodic_truncation_bound(n)),
            ]);
        }

        out.measure("wrap_distance", wrap);
        out.measure(
            "min_distance",
            distances.iter().copied().fold(f64::INFINITY, f64::min),
        );
        out.measure("monotone", monotone_violation(&distances));
        out.measure("k0_error", (k0_ref - target).abs());
        out.measure("truncation_excess", excess);
        out.tables.push(table);
        out.tables.push(reference);
        if ctx.dump_elements {
            out.dump("delta_0", crate::element::SpaceElement::delta(&[0.0]));
            out.dump("delta_2pi", crate::element::SpaceElement::delta(&[TAU]));
        }
        out.params = serde_json::to_value(&p).unwrap_or_default();
        Ok(out)
    }
}
