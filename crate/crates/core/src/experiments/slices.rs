use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gram::random_galileo;
use super::{
    at_least, at_most, num, rng, text, Context, ExpResult, Experiment, ExperimentError, Outcome,
    Table, ToleranceSpec, RUNTIME,
};
use crate::dynamics::{
    fd_pde_residual, path_velocity, relative_overlap, sample_grid, schrodinger_residual,
    slice_inner_product, slice_norm_squared, EvolutionPath, HamiltonianKind, HamiltonianSpec,
    PacketParams, TimeMetric,
};
use crate::groups::galileo_on_slice;
use crate::inner::norm_squared;
use crate::kernel::KernelSpec;
use crate::poly::{Poly, C64};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub free: PacketParams,
    /// Second free packet used for superpositions.
    pub partner: PacketParams,
    pub coherent: CoherentParams,
    pub mass: f64,
    pub hbar: f64,
    pub frequency: f64,
    pub offset: f64,
    pub x_range: [f64; 2],
    pub t_range: [f64; 2],
    pub x_samples: usize,
    pub t_samples: usize,
    /// `ε` of the perturbed controls `ψ (1 + ε x₁)`.
    pub perturbation: f64,
    pub slice_times: Vec<f64>,
    pub galileo_samples: usize,
    pub fd_grid: usize,
    pub fd_step: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            free: PacketParams {
                a0: 1.0,
                q0: 0.5,
                p0: 1.0,
            },
            partner: PacketParams {
                a0: 0.7,
                q0: -0.8,
                p0: -0.6,
            },
            coherent: CoherentParams { q0: 1.0, p0: 0.5 },
            mass: 1.0,
            hbar: 1.0,
            frequency: 1.0,
            offset: 0.0,
            x_range: [-4.0, 4.0],
            t_range: [0.0, 3.0],
            x_samples: 17,
            t_samples: 7,
            perturbation: 0.01,
            slice_times: (0..10).map(|i| 0.3 * i as f64).collect(),
            galileo_samples: 20,
            fd_grid: 50,
            fd_step: 5e-4,
        }
    }
}

/// Initial centre and momentum of the coherent state; its width is fixed by
/// the oscillator.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherentParams {
    pub q0: f64,
    pub p0: f64,
}

/// Analytic gaussian solutions, their slices, and the velocity
/// decomposition of sliced paths.
pub struct SliceDynamics;

const TOLERANCES: &[ToleranceSpec] = &[
    at_most("residual", 1e-10),
    at_least("control_residual", 1e-2),
    at_most("fd_oracle", 1e-6),
    at_most("orthogonality", 1e-8),
    at_most("velocity_sum", 1e-10),
    at_most("superposition", 1e-12),
    at_most("galileo_slice", 1e-12),
    at_most(RUNTIME, 20.0),
];

fn metrics(tau: f64) -> [TimeMetric; 3] {
    [
        TimeMetric::HEta,
        TimeMetric::HTilde,
        TimeMetric::co_moving(tau),
    ]
}

impl Params {
    fn free_hamiltonian(&self) -> HamiltonianSpec {
        HamiltonianSpec {
            kind: HamiltonianKind::Free,
            mass: self.mass,
            frequency: 0.0,
            offset: 0.0,
            hbar: self.hbar,
        }
    }

    fn harmonic(&self) -> HamiltonianSpec {
        HamiltonianSpec {
            kind: HamiltonianKind::Harmonic,
            frequency: self.frequency,
            offset: self.offset,
            ..self.free_hamiltonian()
        }
    }
}

impl Experiment for SliceDynamics {
    fn name(&self) -> &'static str {
        "slice-dynamics"
    }

    fn description(&self) -> &'static str {
        "Schrödinger residuals, slice orthogonality, superposition and Galileo slices"
    }

    fn tolerances(&self) -> &'static [ToleranceSpec] {
        TOLERANCES
    }

    fn run(&self, ctx: &Context) -> ExpResult<Outcome> {
        let p: Params = ctx.params()?;
        let (hf, hh) = (p.free_hamiltonian(), p.harmonic());
        hf.validate()
            .and(hh.validate())
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        let free = EvolutionPath::free(p.free, hf, 1)?;
        let partner = EvolutionPath::free(p.partner, hf, 1)?;
        let coherent = EvolutionPath::coherent(p.coherent.q0, p.coherent.p0, hh, 1)?;
        let bump = Poly::linear(C64::new(1.0, 0.0), &[C64::new(p.perturbation, 0.0)]);
        let samples = sample_grid(
            1,
            (p.x_range[0], p.x_range[1]),
            (p.t_range[0], p.t_range[1]),
            p.x_samples,
            p.t_samples,
        );

        let mut out = Outcome::default();
        let mut residuals = Table::new(
            "residuals",
            &["path", "hamiltonian", "role", "max_residual"],
        );
        let cases: Vec<(&str, &EvolutionPath, &HamiltonianSpec)> = vec![
            ("free", &free, &hf),
            ("partner", &partner, &hf),
            ("coherent", &coherent, &hh),
        ];
        let mut worst: f64 = 0.0;
        let mut control = f64::INFINITY;
        let mut fd: f64 = 0.0;
        for (name, path, h) in &cases {
            let r = schrodinger_residual(path, h, &samples)?;
            worst = worst.max(r);
            residuals.push(vec![
                text(*name),
                text(format!("{:?}", h.kind)),
                text("solution"),
                num(r),
            ]);
            let bent = path.perturbed(bump.clone())?;
            let rc = schrodinger_residual(&bent, h, &samples)?;
            control = control.min(rc);
            residuals.push(vec![
                text(format!("{name}*(1+eps*x)")),
                text(format!("{:?}", h.kind)),
                text("control"),
                num(rc),
            ]);
            let f = fd_pde_residual(
                path,
                h,
                (p.x_range[0], p.x_range[1]),
                (p.t_range[0], p.t_range[1]),
                p.fd_grid,
                p.fd_step,
            )?;
            fd = fd.max(f);
            residuals.push(vec![
                text(*name),
                text(format!("{:?}", h.kind)),
                text("fd_oracle"),
                num(f),
            ]);
        }

        let spatial = KernelSpec::euclidean(1);
        let probe: Vec<Vec<f64>> = (0..=16).map(|i| vec![-4.0 + 0.5 * i as f64]).collect();
        let per_slice = p
            .slice_times
            .par_iter()
            .map(
                |&tau| -> ExpResult<Vec<(String, f64, [f64; 3], f64, f64)>> {
                    let mut rows = Vec::new();
                    for (name, path) in [("free", &free), ("coherent", &coherent)] {
                        let (c1, c2) = path_velocity(path, tau)?;
                        let sum = c1.add(&c2)?.max_relative_difference(
                            &path.slice_derivative(tau),
                            &path.spatial(tau),
                            &probe,
                        )?;
                        let mut overlap = [0.0; 3];
                        for (k, m) in metrics(tau).into_iter().enumerate() {
                            overlap[k] = relative_overlap(&c1, &c2, &spatial, m)?;
                        }
                        // superposition with the partner packet
                        let (s1, s2) = (path.slice(tau), partner.slice(tau));
                        let both = s1.add(&s2)?;
                        let mut sup: f64 = 0.0;
                        let direct =
                            norm_squared(&(path.spatial(tau) + partner.spatial(tau)), &spatial)?;
                        for m in metrics(tau) {
                            let lhs = slice_norm_squared(&both, &spatial, m)?;
                            let rhs = slice_norm_squared(&s1, &spatial, m)?
                                + slice_norm_squared(&s2, &spatial, m)?
                                + 2.0 * slice_inner_product(&s1, &s2, &spatial, m)?.re;
                            sup = sup
                                .max((lhs - rhs).abs() / rhs.abs())
                                .max((lhs - direct).abs() / direct.abs());
                        }
                        rows.push((name.to_string(), tau, overlap, sum, sup));
                    }
                    Ok(rows)
                },
            )
            .collect::<ExpResult<Vec<_>>>()?;
        let mut slices = Table::new(
            "slices",
            &[
                "path",
                "tau",
                "overlap_h_eta",
                "overlap_h_tilde",
                "overlap_h_t",
                "velocity_sum",
                "superposition",
            ],
        );
        let (mut orth, mut vsum, mut sup): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for (name, tau, ov, s, su) in per_slice.into_iter().flatten() {
            orth = orth.max(ov.iter().copied().fold(0.0, f64::max));
            vsum = vsum.max(s);
            sup = sup.max(su);
            slices.push(vec![
                text(name),
                num(tau),
                num(ov[0]),
                num(ov[1]),
                num(ov[2]),
                num(s),
                num(su),
            ]);
        }

        // Galileo images of 3-D slices
        let free3 = EvolutionPath::free(p.free, hf, 3)?;
        let mut r = rng(ctx.seed);
        let mut galileo = Table::new(
            "galileo",
            &["sample", "tau", "new_tau", "max_relative_error"],
        );
        let mut gal: f64 = 0.0;
        for i in 0..p.galileo_samples {
            let g = random_galileo(&mut r);
            let tau = p.slice_times[i % p.slice_times.len().max(1)];
            let image = galileo_on_slice(&g, &free3.slice(tau))?;
            let new_tau = tau - g.time_shift;
            let mut err: f64 =
                if image.slice_time == new_tau && image.jets.iter().all(|j| j.order == 0) {
                    0.0
                } else {
                    f64::INFINITY
                };
            let psi = image.component(0);
            for x in sample_grid(3, (-1.5, 1.5), (0.0, 0.0), 7, 1)
                .iter()
                .map(|s| &s.0)
            {
                let xv = nalgebra::DVector::from_column_slice(x);
                let y = &g.rotation * xv + &g.velocity * new_tau + &g.shift;
                let want = free3.value(y.as_slice(), tau);
                err = err.max((psi.eval(x)? - want).norm() / want.norm());
            }
            gal = gal.max(err);
            galileo.push(vec![num(i as f64), num(tau), num(new_tau), num(err)]);
        }

        out.measure("residual", worst);
        out.measure("control_residual", control);
        out.measure("fd_oracle", fd);
        out.measure("orthogonality", orth);
        out.measure("velocity_sum", vsum);
        out.measure("superposition", sup);
        out.measure("galileo_slice", gal);
        out.tables.push(residuals);
        out.tables.push(slices);
        out.tables.push(galileo);
        if ctx.dump_elements {
            if let Some(&tau) = p.slice_times.first() {
                let (c1, c2) = path_velocity(&free, tau)?;
                out.dump("free_slice", free.slice(tau));
                out.dump("free_velocity_schrodinger", c1);
                out.dump("free_velocity_transport", c2);
            }
        }
        out.params = serde_json::to_value(&p).unwrap_or_default();
        Ok(out)
    }
}
