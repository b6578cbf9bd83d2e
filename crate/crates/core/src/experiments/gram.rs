use nalgebra::{DMatrix, DVector, Rotation3, Unit, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    at_least, at_most, num, rng, text, Context, ExpResult, Experiment, ExperimentError, Outcome,
    Table, ToleranceSpec, RUNTIME,
};
use crate::element::SpaceElement;
use crate::embedding::{embed_delta, DomainBox};
use crate::groups::{
    act_on_element, check_gram_invariance, extend_to_span, push_forward, AffineMap, DiffeoMap,
    GalileoElement, GroupElementConfig, PoincareElement, PointMap,
};
use crate::kernel::{KernelSpec, Signature};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub elements: usize,
    pub points: usize,
    pub max_rapidity: f64,
    /// Points are drawn from `[-box, box]⁴`.
    pub point_box: f64,
    /// Diagram samples, cycling Poincaré, Galileo and diffeo.
    pub pairs: usize,
    /// Diagonal of the anisotropic negative control.
    pub control_scaling: [f64; 4],
    /// Extra elements checked for Gram invariance.
    pub group_elements: Vec<GroupElementConfig>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            elements: 100,
            points: 10,
            max_rapidity: 2.0,
            point_box: 1.0,
            pairs: 1000,
            control_scaling: [2.0, 1.0, 1.0, 1.0],
            group_elements: Vec::new(),
        }
    }
}

/// Poincaré invariance of the indefinite Gram matrix, and the commuting
/// square between point maps and delta-span operators.
pub struct GramInvariance;

const TOLERANCES: &[ToleranceSpec] = &[
    at_most("gram_deviation", 1e-11),
    at_least("control_deviation", 0.1),
    at_most("round_trip", 0.0),
    at_most("pushforward", 1e-12),
    at_most("composition", 1e-12),
    at_most(RUNTIME, 10.0),
];

fn uniform<R: Rng>(r: &mut R, n: usize, half: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-half..half)).collect()
}

fn unit3<R: Rng>(r: &mut R) -> [f64; 3] {
    loop {
        let v = uniform(r, 3, 1.0);
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn random_rotation<R: Rng>(r: &mut R) -> nalgebra::Matrix3<f64> {
    let axis = unit3(r);
    let angle = r.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    *Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), angle).matrix()
}

pub(crate) fn random_poincare<R: Rng>(r: &mut R, max_rapidity: f64) -> PoincareElement {
    let rot = PoincareElement::rotation(unit3(r), r.random_range(-3.0..3.0)).expect("unit axis");
    let boost = PoincareElement::boost_rapidity(unit3(r), r.random_range(0.0..=max_rapidity))
        .expect("unit direction");
    let a = uniform(r, 4, 1.0);
    PoincareElement::translation([a[0], a[1], a[2], a[3]]).compose(&boost.compose(&rot))
}

pub(crate) fn random_galileo<R: Rng>(r: &mut R) -> GalileoElement {
    let rot = random_rotation(r);
    GalileoElement::new(
        DMatrix::from_fn(3, 3, |i, j| rot[(i, j)]),
        DVector::from_vec(uniform(r, 3, 1.0)),
        DVector::from_vec(uniform(r, 3, 1.0)),
        r.random_range(-1.0..1.0),
    )
    .expect("orthogonal rotation")
}

/// A nonlinear diffeomorphism of the unit square fixing its boundary.
pub fn square_diffeo() -> crate::Result<DiffeoMap> {
    DiffeoMap::parse(
        &[
            "u1 + 0.5*u2*sin(pi*u1)/pi",
            "u2 + 0.3*cos(u1)*sin(pi*u2)/pi",
        ],
        None,
        DomainBox::cube(2, 0.0, 1.0),
    )
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn element_distance(a: &SpaceElement, b: &SpaceElement) -> f64 {
    if a.deltas.len() != b.deltas.len() || !a.gaussians.is_empty() || !b.gaussians.is_empty() {
        return f64::INFINITY;
    }
    a.deltas
        .iter()
        .zip(&b.deltas)
        .map(|(x, y)| {
            if x.orders != y.orders {
                f64::INFINITY
            } else {
                max_abs_diff(&x.base, &y.base).max((x.coeff - y.coeff).norm())
            }
        })
        .fold(0.0, f64::max)
}

/// `(span round trip, pushforward, composition)` deviations for one sample.
fn diagram_sample(
    g: &dyn PointMap,
    h: &dyn PointMap,
    gh: &dyn PointMap,
    a: &[f64],
    others: &[Vec<f64>],
) -> ExpResult<[f64; 3]> {
    let mut sources = vec![a.to_vec()];
    sources.extend(others.iter().filter(|p| p.as_slice() != a).cloned());
    let op = extend_to_span(g, &sources)?;
    let delta = SpaceElement::delta(a);
    let via_span = act_on_element(&op, &delta)?;
    let direct = embed_delta(&g.apply(a)?, g.dim())?;
    let round_trip = element_distance(&via_span, &direct);
    let pushed = element_distance(&push_forward(g, &delta)?, &direct);
    let inner = extend_to_span(h, &sources)?;
    let outer = extend_to_span(g, inner.targets())?;
    let composed = outer.compose(&inner)?;
    let whole = extend_to_span(gh, &sources)?;
    let composition = composed
        .targets()
        .iter()
        .zip(whole.targets())
        .map(|(x, y)| max_abs_diff(x, y))
        .fold(0.0, f64::max);
    Ok([round_trip, pushed, composition])
}

struct Diagram {
    family: &'static str,
    deviations: [f64; 3],
}

impl Experiment for GramInvariance {
    fn name(&self) -> &'static str {
        "gram-invariance"
    }

    fn description(&self) -> &'static str {
        "Poincaré invariance of the indefinite Gram matrix and span-operator commutativity"
    }

    fn tolerances(&self) -> &'static [ToleranceSpec] {
        TOLERANCES
    }

    fn run(&self, ctx: &Context) -> ExpResult<Outcome> {
        let p: Params = ctx.params()?;
        if p.points < 2 || p.elements == 0 {
            return Err(ExperimentError::Config(
                "need at least 2 points and 1 element".into(),
            ));
        }
        let spec = KernelSpec::gaussian(Signature { pos: 3, neg: 1 });
        let mut r = rng(ctx.seed);
        let points: Vec<Vec<f64>> = (0..p.points)
            .map(|_| uniform(&mut r, 4, p.point_box))
            .collect();
        let mut maps: Vec<(String, Box<dyn PointMap>)> = (0..p.elements)
            .map(|_| {
                let g = random_poincare(&mut r, p.max_rapidity);
                (
                    format!("rapidity={}", g.rapidity()),
                    Box::new(g) as Box<dyn PointMap>,
                )
            })
            .collect();
        for (i, cfg) in p.group_elements.iter().enumerate() {
            let g = cfg
                .build()
                .map_err(|e| ExperimentError::Config(format!("group_elements[{i}]: {e}")))?;
            maps.push((format!("config[{i}]"), g));
        }
        let deviations = maps
            .par_iter()
            .map(|(_, g)| check_gram_invariance(g.as_ref(), &points, &spec))
            .collect::<crate::Result<Vec<f64>>>()?;
        let control = AffineMap::scaling(&p.control_scaling)?;
        let control_dev = check_gram_invariance(&control, &points, &spec)?;

        // diagram samples: (g, h, g∘h, a)
        let diffeo = square_diffeo()?;
        let mut samples: Vec<(
            &'static str,
            Box<dyn PointMap>,
            Box<dyn PointMap>,
            Box<dyn PointMap>,
            Vec<f64>,
            Vec<Vec<f64>>,
        )> = Vec::with_capacity(p.pairs);
        for i in 0..p.pairs {
            match i % 3 {
                0 => {
                    let (g, h) = (
                        random_poincare(&mut r, p.max_rapidity),
                        random_poincare(&mut r, p.max_rapidity),
                    );
                    let gh = g.compose(&h);
                    let a = uniform(&mut r, 4, p.point_box);
                    let others = (0..3).map(|_| uniform(&mut r, 4, p.point_box)).collect();
                    samples.push((
                        "poincare",
                        Box::new(g),
                        Box::new(h),
                        Box::new(gh),
                        a,
                        others,
                    ));
                }
                1 => {
                    let (g, h) = (random_galileo(&mut r), random_galileo(&mut r));
                    let gh = g.compose(&h);
                    let a = uniform(&mut r, 4, p.point_box);
                    let others = (0..3).map(|_| uniform(&mut r, 4, p.point_box)).collect();
                    samples.push(("galileo", Box::new(g), Box::new(h), Box::new(gh), a, others));
                }
                _ => {
                    // the diffeo composed with itself, checked against the
                    // pointwise composite
                    let a: Vec<f64> = (0..2).map(|_| r.random_range(0.0..1.0)).collect();
                    let others = (0..3)
                        .map(|_| (0..2).map(|_| r.random_range(0.0..1.0)).collect())
                        .collect();
                    let twice = Composite(Box::new(diffeo.clone()), Box::new(diffeo.clone()));
                    samples.push((
                        "diffeo",
                        Box::new(diffeo.clone()),
                        Box::new(diffeo.clone()),
                        Box::new(twice),
                        a,
                        others,
                    ));
                }
            }
        }
        let diagrams = samples
            .par_iter()
            .map(|(family, g, h, gh, a, others)| {
                diagram_sample(g.as_ref(), h.as_ref(), gh.as_ref(), a, others)
                    .map(|deviations| Diagram { family, deviations })
            })
            .collect::<ExpResult<Vec<_>>>()?;

        let mut out = Outcome::default();
        let mut gram = Table::new("gram", &["element", "label", "deviation"]);
        for (i, ((label, _), dev)) in maps.iter().zip(&deviations).enumerate() {
            gram.push(vec![num(i as f64), text(label), num(*dev)]);
        }
        gram.push(vec![
            num(maps.len() as f64),
            text("control:anisotropic_scaling"),
            num(control_dev),
        ]);
        let mut diag = Table::new(
            "diagram",
            &[
                "sample",
                "family",
                "round_trip",
                "pushforward",
                "composition",
            ],
        );
        let mut worst = [0.0f64; 3];
        for (i, d) in diagrams.iter().enumerate() {
            for k in 0..3 {
                worst[k] = worst[k].max(d.deviations[k]);
            }
            diag.push(vec![
                num(i as f64),
                text(d.family),
                num(d.deviations[0]),
                num(d.deviations[1]),
                num(d.deviations[2]),
            ]);
        }
        out.measure(
            "gram_deviation",
            deviations.iter().copied().fold(0.0, f64::max),
        );
        out.measure("control_deviation", control_dev);
        out.measure("round_trip", worst[0]);
        out.measure("pushforward", worst[1]);
        out.measure("composition", worst[2]);
        out.tables.push(gram);
        out.tables.push(diag);
        if ctx.dump_elements {
            let op = extend_to_span(maps[0].1.as_ref(), &points)?;
            out.dump("span_operator_0", &op);
            out.dump("points", &points);
        }
        out.params = serde_json::to_value(&p).unwrap_or_default();
        Ok(out)
    }
}

/// `g ∘ h` for maps without a closed composition rule.
#[derive(Debug)]
struct Composite(Box<dyn PointMap>, Box<dyn PointMap>);

impl PointMap for Composite {
    fn name(&self) -> String {
        format!("{}∘{}", self.0.name(), self.1.name())
    }

    fn dim(&self) -> usize {
        self.1.dim()
    }

    fn apply(&self, x: &[f64]) -> crate::Result<Vec<f64>> {
        self.0.apply(&self.1.apply(x)?)
    }
}
