//! Built-in embedded manifolds with analytic reference metrics, and user
//! embeddings parsed from TOML.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use toml::Spanned;

use crate::embedding::{analytic_pullback_metric, DomainBox, EmbeddingMap, MetricTensor};
use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr};
use crate::kernel::{KernelSpec, Signature};

pub type MetricFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Tolerance of the load-time check `analytic metric == JᵀηJ`.
pub const SELF_CONSISTENCY_TOLERANCE: f64 = 1e-6;
const SELF_CONSISTENCY_POINTS: usize = 5;
const SELF_CONSISTENCY_SEED: u64 = 0x5eed;

#[derive(Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub description: String,
    pub embedding: EmbeddingMap,
    pub kernel: KernelSpec,
    analytic_metric: Option<MetricFn>,
}

impl fmt::Debug for CatalogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CatalogEntry")
            .field("name", &self.name)
            .field("embedding", &self.embedding)
            .field("kernel", &self.kernel)
            .field("analytic_metric", &self.analytic_metric.is_some())
            .finish()
    }
}

impl CatalogEntry {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        embedding: EmbeddingMap,
        kernel: KernelSpec,
        analytic_metric: Option<MetricFn>,
    ) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            embedding,
            kernel,
            analytic_metric,
        }
    }

    pub fn domain(&self) -> &DomainBox {
        &self.embedding.domain
    }

    pub fn has_analytic_metric(&self) -> bool {
        self.analytic_metric.is_some()
    }

    /// Whether the kernel is smooth enough for induced-metric recovery.
    pub fn supports_metric_recovery(&self) -> bool {
        self.kernel.family == crate::kernel::KernelFamily::Gaussian
    }

    /// The declared metric, or `JᵀηJ` when none was declared.
    pub fn analytic_metric(&self, u: &[f64]) -> Result<MetricTensor> {
        match &self.analytic_metric {
            Some(f) => {
                let g = f(u);
                let n = self.embedding.domain_dim;
                if g.nrows() != n || g.ncols() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n * n,
                        found: g.nrows() * g.ncols(),
                    });
                }
                Ok(MetricTensor::new(u.to_vec(), g))
            }
            None => analytic_pullback_metric(&self.embedding, u),
        }
    }

    /// Compare the declared metric with `JᵀηJ` and check the immersion at
    /// seeded interior points.
    pub fn verify(&self, points: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let margin = 0.01;
        for _ in 0..points {
            let u = self.domain().sample(&mut rng, margin);
            self.embedding.check_immersion(&u)?;
            let pullback = analytic_pullback_metric(&self.embedding, &u)?;
            if self.analytic_metric.is_some() {
                let declared = self.analytic_metric(&u)?;
                let deviation = declared.max_relative_deviation(&pullback);
                if !(deviation <= SELF_CONSISTENCY_TOLERANCE) {
                    return Err(Error::SelfConsistency {
                        point: u,
                        deviation,
                    });
                }
            }
        }
        Ok(())
    }
}

type Builder = fn() -> CatalogEntry;

/// Name-indexed registry of catalog builders.
pub struct Catalog {
    builders: BTreeMap<&'static str, Builder>,
}

impl Default for Catalog {
    fn default() -> Self {
        let mut c = Self {
            builders: BTreeMap::new(),
        };
        c.register("euclidean3", euclidean3);
        c.register("minkowski31", minkowski31);
        c.register("sphere2", sphere2);
        c.register("flat_torus2", flat_torus2);
        c.register("de_sitter2", de_sitter2);
        c.register("circle_sobolev", circle_sobolev);
        c
    }
}

impl Catalog {
    pub fn register(&mut self, name: &'static str, builder: Builder) {
        self.builders.insert(name, builder);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.builders.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<CatalogEntry> {
        let build = self
            .builders
            .get(name)
            .ok_or_else(|| Error::UnknownManifold(name.to_string()))?;
        let entry = build();
        entry.verify(SELF_CONSISTENCY_POINTS, SELF_CONSISTENCY_SEED)?;
        Ok(entry)
    }
}

pub fn builtin(name: &str) -> Result<CatalogEntry> {
    Catalog::default().get(name)
}

pub fn builtin_names() -> Vec<&'static str> {
    Catalog::default().names()
}

fn diag(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(values))
}

fn flat(name: &str, description: &str, sig: Signature, half_width: f64) -> CatalogEntry {
    let n = sig.dim();
    let signs = sig.signs();
    CatalogEntry::new(
        name,
        description,
        EmbeddingMap::identity(sig, DomainBox::cube(n, -half_width, half_width)),
        KernelSpec::gaussian(sig),
        Some(Arc::new(move |_: &[f64]| diag(&signs))),
    )
}

fn euclidean3() -> CatalogEntry {
    flat(
        "euclidean3",
        "identity chart of Euclidean 3-space",
        Signature::euclidean(3),
        2.0,
    )
}

fn minkowski31() -> CatalogEntry {
    flat(
        "minkowski31",
        "identity chart of Minkowski space, coordinates (x, y, z, t)",
        Signature { pos: 3, neg: 1 },
        2.0,
    )
}

fn sphere2() -> CatalogEntry {
    let emb = EmbeddingMap::new(
        Signature::euclidean(3),
        DomainBox {
            bounds: vec![(0.2, PI - 0.2), (0.0, 2.0 * PI)],
        },
        Arc::new(|u: &[f64]| {
            let (t, p) = (u[0], u[1]);
            vec![t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]
        }),
    )
    .with_jacobian(Arc::new(|u: &[f64]| {
        let (t, p) = (u[0], u[1]);
        DMatrix::from_row_slice(
            3,
            2,
            &[
                t.cos() * p.cos(),
                -t.sin() * p.sin(),
                t.cos() * p.sin(),
                t.sin() * p.cos(),
                -t.sin(),
                0.0,
            ],
        )
    }));
    CatalogEntry::new(
        "sphere2",
        "unit sphere in polar coordinates (θ, φ), poles excluded",
        emb,
        KernelSpec::euclidean(3),
        Some(Arc::new(|u: &[f64]| diag(&[1.0, u[0].sin().powi(2)]))),
    )
}

fn flat_torus2() -> CatalogEntry {
    let emb = EmbeddingMap::new(
        Signature::euclidean(4),
        DomainBox::cube(2, 0.0, 2.0 * PI),
        Arc::new(|u: &[f64]| vec![u[0].cos(), u[0].sin(), u[1].cos(), u[1].sin()]),
    )
    .with_jacobian(Arc::new(|u: &[f64]| {
        DMatrix::from_row_slice(
            4,
            2,
            &[
                -u[0].sin(),
                0.0,
                u[0].cos(),
                0.0,
                0.0,
                -u[1].sin(),
                0.0,
                u[1].cos(),
            ],
        )
    }));
    CatalogEntry::new(
        "flat_torus2",
        "Clifford torus in ℝ⁴",
        emb,
        KernelSpec::euclidean(4),
        Some(Arc::new(|_: &[f64]| DMatrix::identity(2, 2))),
    )
}

fn de_sitter2() -> CatalogEntry {
    let sig = Signature { pos: 2, neg: 1 };
    let emb = EmbeddingMap::new(
        sig,
        DomainBox {
            bounds: vec![(-1.0, 1.0), (0.0, 2.0 * PI)],
        },
        Arc::new(|u: &[f64]| {
            let (tau, th) = (u[0], u[1]);
            vec![tau.cosh() * th.cos(), tau.cosh() * th.sin(), tau.sinh()]
        }),
    )
    .with_jacobian(Arc::new(|u: &[f64]| {
        let (tau, th) = (u[0], u[1]);
        DMatrix::from_row_slice(
            3,
            2,
            &[
                tau.sinh() * th.cos(),
                -tau.cosh() * th.sin(),
                tau.sinh() * th.sin(),
                tau.cosh() * th.cos(),
                tau.cosh(),
                0.0,
            ],
        )
    }));
    CatalogEntry::new(
        "de_sitter2",
        "two-dimensional de Sitter space as a hyperboloid in ℝ^(2,1), coordinates (τ, θ)",
        emb,
        KernelSpec::gaussian(sig),
        Some(Arc::new(|u: &[f64]| diag(&[-1.0, u[0].cosh().powi(2)]))),
    )
}

fn circle_sobolev() -> CatalogEntry {
    CatalogEntry::new(
        "circle_sobolev",
        "angle coordinate of the circle with the periodic Sobolev kernel",
        EmbeddingMap::identity(Signature::euclidean(1), DomainBox::cube(1, 0.0, 2.0 * PI)),
        KernelSpec::periodic_sobolev(crate::kernel::DEFAULT_TRUNCATION),
        Some(Arc::new(|_: &[f64]| DMatrix::identity(1, 1))),
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingFile {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: Option<String>,
    domain_dim: usize,
    signature: [usize; 2],
    domain: Vec<[f64; 2]>,
    maps: Vec<Spanned<String>>,
    #[serde(default)]
    metric: Option<Vec<Vec<Spanned<String>>>>,
}

/// 1-based (line, column) of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn config_error(text: &str, span: Option<Range<usize>>, message: String) -> Error {
    let (line, column) = span.map_or((0, 0), |s| line_col(text, s.start));
    Error::Parse {
        line,
        column,
        message,
    }
}

fn parse_spanned(text: &str, what: &str, s: &Spanned<String>, nvars: usize) -> Result<Expr> {
    parse_expression(s.get_ref(), nvars).map_err(|e| match e {
        Error::Parse {
            column, message, ..
        } => {
            // the span covers the opening quote
            let start = s.span().start + 1;
            let (line, file_column) = line_col(text, start);
            Error::Parse {
                line,
                column: file_column + column - 1,
                message: format!("{what}, expression column {column}: {message}"),
            }
        }
        other => other,
    })
}

/// Parse an embedding description:
///
/// ```toml
/// domain_dim = 1
/// signature = [2, 0]
/// domain = [[0.0, 6.283185307179586]]
/// maps = ["cos(u1)", "sin(u1)"]
/// metric = [["1"]]          # optional
/// ```
pub fn parse_embedding(text: &str) -> Result<CatalogEntry> {
    let file: EmbeddingFile =
        toml::from_str(text).map_err(|e| config_error(text, e.span(), e.message().to_string()))?;
    let n = file.domain_dim;
    let sig = Signature::new(file.signature[0], file.signature[1])?;
    if n == 0 {
        return Err(config_error(
            text,
            None,
            "domain_dim must be positive".into(),
        ));
    }
    if file.domain.len() != n {
        return Err(config_error(
            text,
            None,
            format!("domain has {} intervals, expected {n}", file.domain.len()),
        ));
    }
    if file.maps.len() != sig.dim() {
        return Err(config_error(
            text,
            None,
            format!(
                "maps has {} entries, signature needs {}",
                file.maps.len(),
                sig.dim()
            ),
        ));
    }
    let domain = DomainBox::new(file.domain.iter().map(|b| (b[0], b[1])).collect())?;
    let maps: Vec<Expr> = file
        .maps
        .iter()
        .enumerate()
        .map(|(i, s)| parse_spanned(text, &format!("maps[{i}]"), s, n))
        .collect::<Result<_>>()?;
    let metric = match &file.metric {
        None => None,
        Some(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(config_error(text, None, format!("metric must be {n}×{n}")));
            }
            let mut exprs = Vec::with_capacity(n * n);
            for (i, row) in rows.iter().enumerate() {
                for (j, s) in row.iter().enumerate() {
                    exprs.push(parse_spanned(text, &format!("metric[{i}][{j}]"), s, n)?);
                }
            }
            let f: MetricFn = Arc::new(move |u: &[f64]| {
                DMatrix::from_row_iterator(n, n, exprs.iter().map(|e| e.eval(u)))
            });
            Some(f)
        }
    };
    let emb = EmbeddingMap::new(
        sig,
        domain,
        Arc::new(move |u: &[f64]| maps.iter().map(|e| e.eval(u)).collect()),
    );
    let entry = CatalogEntry::new(
        file.name.unwrap_or_else(|| "custom".into()),
        file.description.unwrap_or_default(),
        emb,
        KernelSpec::gaussian(sig),
        metric,
    );
    entry.verify(SELF_CONSISTENCY_POINTS, SELF_CONSISTENCY_SEED)?;
    Ok(entry)
}
