//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Reference constants were computed with mpmath
//! (see tools/oracle_values.py) by direct integration or series summation.

#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use kspace::catalog::builtin;
use kspace::dynamics::{EvolutionPath, HamiltonianKind, HamiltonianSpec, PacketParams};
use kspace::element::{GaussianTerm, SpaceElement};
use kspace::embedding::{induced_metric, PulledBackKernel};
use kspace::experiments::{run, ExperimentConfig, ExperimentReport, Outcome, Overrides, Registry};
use kspace::groups::{check_gram_invariance, PoincareElement, PointMap};
use kspace::inner::{inner_product, norm_squared};
use kspace::kernel::{gram_matrix, KernelSpec, PeriodicSobolevKernel, Signature};
use kspace::poly::{Poly, C64};
use kspace::quadrature::{quadrature_inner_product, QuadratureConfig};

const SCALES: [f64; 5] = [1.0, 2.0, 5.0, 10.0, 20.0];
const NORM_D1: [f64; 5] = [
    0.816496580927726033,
    0.942809041582063346,
    0.990147542976673666,
    0.997509336107631848,
    0.999375585327814065,
];
const NORM_D3: [f64; 5] = [
    0.544331053951817355,
    0.838052481406278493,
    0.97073288527124743,
    0.992546603092168893,
    0.998127925421035383,
];
const EVEN_TOY: f64 = 2.2214414690791831235;
const ODD_TOY: f64 = -0.27768018363489789044;
const SIN2_1: f64 = 0.70807341827357119350;
const COSH2_HALF: f64 = 1.2715403174076218892;
const SINH_1: f64 = 1.1752011936438014569;
const COSH_1: f64 = 1.5430806348152437785;
const EXP_M0375: f64 = 0.68728927879097219854;
const GAUSS_PAIR: (f64, f64) = (3.99558679185458819, -1.47199240293012056);
const FREE_PACKET: (f64, f64) = (0.46522615994079474583, -0.046660765133735398937);
const COHERENT_DENSITY: f64 = 0.010782071706754528964;
const K2000_0: f64 = 0.50171182145092603218;
const K2000_PI: f64 = 0.043294808533854943741;
const K_LIMIT_0: f64 = 0.50187093659866064410;

struct Criterion {
    id: u32,
    title: &'static str,
    limit_s: Option<f64>,
    start: Instant,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Criterion {
    fn new(id: u32, title: &'static str, limit_s: Option<f64>) -> Self {
        Self {
            id,
            title,
            limit_s,
            start: Instant::now(),
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        if !ok {
            self.failures.push(label.into());
        }
    }

    fn close(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        let err = (got - want).abs();
        self.check(
            format!("{label}: {got:.17e} vs {want:.17e} (|Δ| {err:.2e} > {tol:e})"),
            err <= tol,
        );
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Every measurement of the experiment named in `names` must pass.
    fn require(&mut self, report: &ExperimentReport, names: &[&str]) {
        for name in names {
            let ms: Vec<_> = report
                .measurements
                .iter()
                .filter(|m| m.name == *name)
                .collect();
            if ms.is_empty() {
                self.check(
                    format!("{}: no measurement '{name}'", report.experiment),
                    false,
                );
            }
            for m in ms {
                self.note(format!("{} {:.3e}", m.name, m.value));
                self.check(
                    format!(
                        "{} {} = {:e} not {} {:e}",
                        report.experiment,
                        m.name,
                        m.value,
                        m.bound.symbol(),
                        m.limit
                    ),
                    m.passed,
                );
            }
        }
    }

    fn finish(self) -> bool {
        let elapsed = self.start.elapsed().as_secs_f64();
        let mut failures = self.failures;
        if let Some(limit) = self.limit_s {
            if elapsed >= limit {
                failures.push(format!("runtime {elapsed:.2} s ≥ {limit} s"));
            }
        }
        let ok = failures.is_empty();
        println!(
            "criterion {} {}: {} ({:.2} s; {})",
            self.id,
            self.title,
            if ok { "PASS" } else { "FAIL" },
            elapsed,
            self.notes.join(", ")
        );
        for f in &failures {
            println!("    - {f}");
        }
        ok
    }
}

fn experiment(name: &str) -> (ExperimentReport, Outcome) {
    let registry = Registry::default();
    let exp = registry.get(name).expect("registered experiment");
    run(exp, &ExperimentConfig::default(), &Overrides::default()).expect("experiment runs")
}

fn criterion_1() -> bool {
    let mut c = Criterion::new(1, "norm convergence", Some(5.0));
    let (report, _) = experiment("norm-convergence");
    c.require(&report, &["closed_form", "oracle", "monotone", "overshoot"]);
    for (dim, refs) in [(1usize, NORM_D1), (3, NORM_D3)] {
        let f = SpaceElement::from_gaussian(GaussianTerm::unit_l2(dim));
        let mut last = 0.0;
        for (l, want) in SCALES.iter().zip(refs) {
            let got = norm_squared(&f, &KernelSpec::normalized_gaussian(dim, *l)).unwrap();
            c.close(&format!("d={dim} L={l} vs mpmath"), got, want, 1e-10);
            c.close(
                &format!("d={dim} L={l} vs formula"),
                got,
                (1.0 + 0.5 / (l * l)).powf(-(dim as f64) / 2.0),
                1e-10,
            );
            c.check(
                format!("d={dim} L={l}: not increasing below 1"),
                got > last && got < 1.0,
            );
            last = got;
        }
    }
    c.finish()
}

fn toy(odd: bool) -> SpaceElement {
    // (0, 1) signature, p(t) e^{-2t²}
    let base = GaussianTerm::isotropic(1.0, 4.0, &[0.0]);
    let term = if odd {
        base.times_poly(&Poly::linear(C64::new(0.0, 0.0), &[C64::new(1.0, 0.0)]))
    } else {
        base
    };
    SpaceElement::from_gaussian(term)
}

fn criterion_2() -> bool {
    let mut c = Criterion::new(2, "Krein sign structure", Some(5.0));
    let (report, outcome) = experiment("oracle-check");
    c.require(&report, &["krein_violations", "parity_cross", "toy_error"]);
    let rows = outcome
        .tables
        .iter()
        .find(|t| t.name == "krein")
        .map_or(0, |t| t.rows.len());
    c.check(format!("{rows} Krein samples, expected 200"), rows == 200);
    let time = KernelSpec::gaussian(Signature { pos: 0, neg: 1 });
    c.close(
        "even toy",
        norm_squared(&toy(false), &time).unwrap(),
        EVEN_TOY,
        1e-9,
    );
    c.close(
        "odd toy",
        norm_squared(&toy(true), &time).unwrap(),
        ODD_TOY,
        1e-9,
    );
    c.close("even toy vs π/√2", EVEN_TOY, PI / 2f64.sqrt(), 1e-15);
    c.close(
        "odd toy vs -π/(8√2)",
        ODD_TOY,
        -PI / (8.0 * 2f64.sqrt()),
        1e-15,
    );
    c.finish()
}

fn criterion_3() -> bool {
    let mut c = Criterion::new(3, "metric recovery", Some(30.0));
    let (report, outcome) = experiment("metric-recovery");
    c.require(&report, &["relative_error", "fd_ratio_deviation"]);
    let metrics = outcome
        .tables
        .iter()
        .find(|t| t.name == "metrics")
        .expect("metrics table");
    for name in [
        "euclidean3",
        "minkowski31",
        "sphere2",
        "flat_torus2",
        "de_sitter2",
    ] {
        let n = metrics.rows.iter().filter(|r| r[0] == name).count();
        c.check(format!("{name}: {n} points, expected 25"), n == 25);
    }
    let sphere = builtin("sphere2").unwrap();
    let g = sphere.analytic_metric(&[1.0, 0.7]).unwrap();
    c.close("sphere g_φφ(θ=1)", g.components[(1, 1)], SIN2_1, 1e-15);
    let ds = builtin("de_sitter2").unwrap();
    let g = ds.analytic_metric(&[0.5, 1.0]).unwrap();
    c.close("de Sitter g_ττ", g.components[(0, 0)], -1.0, 1e-15);
    c.close(
        "de Sitter g_θθ(τ=0.5)",
        g.components[(1, 1)],
        COSH2_HALF,
        1e-14,
    );
    for (entry, u, want) in [
        (sphere, [1.0, 0.7], [1.0, SIN2_1]),
        (ds, [0.5, 1.0], [-1.0, COSH2_HALF]),
    ] {
        let name = entry.name.clone();
        let pk = PulledBackKernel::new(entry.embedding, entry.kernel).unwrap();
        let h = induced_metric(&pk, &u, 1e-4).unwrap();
        for i in 0..2 {
            c.close(
                &format!("{name} induced h_{i}{i}"),
                h.components[(i, i)],
                want[i],
                1e-6 * want[i].abs(),
            );
        }
        c.close(
            &format!("{name} induced h_01"),
            h.components[(0, 1)],
            0.0,
            1e-6,
        );
    }
    c.finish()
}

fn criterion_4() -> bool {
    let mut c = Criterion::new(4, "Gram invariance", Some(10.0));
    let (report, _) = experiment("gram-invariance");
    c.require(&report, &["gram_deviation", "control_deviation"]);
    let boost = PoincareElement::boost_rapidity([1.0, 0.0, 0.0], 1.0).unwrap();
    let y = boost.apply(&[0.0, 0.0, 0.0, 1.0]).unwrap();
    c.close("boosted |x|", y[0].abs(), SINH_1, 1e-15);
    c.close("boosted t", y[3], COSH_1, 1e-15);
    let points = vec![vec![0.0, 0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.5]];
    let gram = gram_matrix(&points, &KernelSpec::minkowski()).unwrap();
    c.close("Gram entry e^{-3/8}", gram[(0, 1)], EXP_M0375, 1e-15);
    let dev = check_gram_invariance(&boost, &points, &KernelSpec::minkowski()).unwrap();
    c.check(format!("boost Gram deviation {dev:e}"), dev <= 1e-11);
    c.finish()
}

fn criterion_5() -> bool {
    let mut c = Criterion::new(5, "diagram commutativity", None);
    let (report, outcome) = experiment("gram-invariance");
    c.require(&report, &["round_trip", "pushforward", "composition"]);
    let diagram = outcome
        .tables
        .iter()
        .find(|t| t.name == "diagram")
        .expect("diagram table");
    c.check(
        format!("{} sampled pairs, expected 1000", diagram.rows.len()),
        diagram.rows.len() == 1000,
    );
    let mut families: Vec<String> = diagram
        .rows
        .iter()
        .filter_map(|r| r[1].as_str().map(String::from))
        .collect();
    families.sort();
    families.dedup();
    c.check(format!("families {families:?}"), families.len() == 3);
    c.finish()
}

fn criterion_6() -> bool {
    let mut c = Criterion::new(6, "slice dynamics", Some(20.0));
    let (report, outcome) = experiment("slice-dynamics");
    c.require(
        &report,
        &[
            "residual",
            "control_residual",
            "fd_oracle",
            "orthogonality",
            "superposition",
            "galileo_slice",
        ],
    );
    let slices = outcome
        .tables
        .iter()
        .find(|t| t.name == "slices")
        .expect("slices table");
    let times = slices.rows.iter().filter(|r| r[0] == "free").count();
    c.check(format!("{times} slice times, expected 10"), times == 10);
    let free = EvolutionPath::free(
        PacketParams {
            a0: 1.0,
            q0: 0.5,
            p0: 1.0,
        },
        HamiltonianSpec::free(),
        1,
    )
    .unwrap();
    let psi = free.value(&[0.7], 1.3);
    c.close("free packet Re ψ(0.7, 1.3)", psi.re, FREE_PACKET.0, 1e-12);
    c.close("free packet Im ψ(0.7, 1.3)", psi.im, FREE_PACKET.1, 1e-12);
    let h = HamiltonianSpec {
        kind: HamiltonianKind::Harmonic,
        mass: 1.3,
        frequency: 1.7,
        offset: 0.0,
        hbar: 1.0,
    };
    let coherent = EvolutionPath::coherent(1.0, 0.5, h, 1).unwrap();
    c.close(
        "coherent |ψ(0.4, 2.1)|²",
        coherent.value(&[0.4], 2.1).norm_sqr(),
        COHERENT_DENSITY,
        1e-12,
    );
    c.finish()
}

fn criterion_7() -> bool {
    let mut c = Criterion::new(7, "circle topology", None);
    let (report, _) = experiment("circle-topology");
    c.require(
        &report,
        &["wrap_distance", "min_distance", "monotone", "k0_error"],
    );
    let k = PeriodicSobolevKernel::new(2000);
    c.close("k_2000(0)", k.profile(0.0), K2000_0, 1e-13);
    c.close("k_2000(π)", k.profile(PI), K2000_PI, 1e-13);
    let target = 1.0 / (2.0 * PI.tanh());
    c.close("series limit vs coth(π)/2", K_LIMIT_0, target, 1e-15);
    c.note(format!(
        "k_2000(0) - coth(π)/2 = {:.3e}",
        k.profile(0.0) - target
    ));
    c.finish()
}

fn criterion_8() -> bool {
    let mut c = Criterion::new(8, "oracle equivalence", None);
    let (report, outcome) = experiment("oracle-check");
    c.require(&report, &["oracle_relative", "divergence_mismatches"]);
    let count = |name: &str| {
        outcome
            .tables
            .iter()
            .find(|t| t.name == name)
            .map_or(0, |t| t.rows.len())
    };
    c.check(
        format!("{} pairs, expected 20", count("oracle")),
        count("oracle") == 20,
    );
    c.check(
        format!("{} boundary cases, expected 50", count("boundary")),
        count("boundary") == 50,
    );

    let f = GaussianTerm::isotropic(1.0, 3.0, &[0.0])
        .times_poly(&Poly::linear(C64::new(1.0, 0.0), &[C64::new(0.3, 0.0)]));
    let mut g = GaussianTerm::isotropic(1.0, 3.0, &[0.5]);
    g.lin[0] += C64::new(0.0, 0.4);
    let (f, g) = (
        SpaceElement::from_gaussian(f),
        SpaceElement::from_gaussian(g),
    );
    let time = KernelSpec::gaussian(Signature { pos: 0, neg: 1 });
    let closed = inner_product(&f, &g, &time).unwrap();
    let quad =
        quadrature_inner_product(&f, &g, &time, &QuadratureConfig::composite(16, 8, 8.0)).unwrap();
    let want = C64::new(GAUSS_PAIR.0, GAUSS_PAIR.1);
    c.check(
        format!("closed form {closed} vs mpmath {want}"),
        (closed - want).norm() / want.norm() <= 1e-12,
    );
    c.check(
        format!("quadrature {quad} vs mpmath {want}"),
        (quad - want).norm() / want.norm() <= 1e-6,
    );
    c.finish()
}

fn main() -> ExitCode {
    let results = [
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
