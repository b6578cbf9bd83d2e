//! Time-sliced elements `Σ ψ_m(x) δ^(m)(t − τ)`, analytic gaussian solutions
//! of the Schrödinger equation, and the velocity decomposition of sliced
//! paths.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::element::{GaussianTerm, SpaceElement};
use crate::error::{check_dim, Error, Result};
use crate::inner::inner_product;
use crate::kernel::KernelSpec;
use crate::poly::{exp_series, factorial, Poly, C64};

/// Largest time-derivative order of a slice jet.
pub const MAX_TIME_ORDER: u32 = 2;

const I: C64 = C64::new(0.0, 1.0);

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Time factor of the four-variable kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMetric {
    /// `e^{+½(t−s)²}`, the indefinite space.
    HEta,
    /// `e^{−½(t−s)²}`.
    HTilde,
    /// `e^{(t−c)² + (s−c)² − ½(t−s)²}`: the envelope `e^{−(t−c)²}` moved into
    /// the kernel.
    HT { center: f64 },
}

impl TimeMetric {
    pub fn co_moving(tau: f64) -> Self {
        TimeMetric::HT { center: tau }
    }

    pub fn name(&self) -> String {
        match self {
            TimeMetric::HEta => "H_eta".into(),
            TimeMetric::HTilde => "H_tilde".into(),
            TimeMetric::HT { center } => format!("H_T({center})"),
        }
    }

    /// `(−1)^{m+n} ∂_t^m ∂_s^n k_t(t, s)` at `t = s = tau`, i.e. the pairing
    /// of `δ^(m)(t − τ)` with `δ^(n)(s − τ)`.
    pub fn jet_pairing(&self, tau: f64, m: u32, n: u32) -> f64 {
        // exponent as a polynomial in the offsets (α, β) = (t − τ, s − τ)
        let a = Poly::var(2, 0);
        let b = Poly::var(2, 1);
        let diff2 = (a.clone() - b.clone()).pow(2);
        let (base, q) = match *self {
            TimeMetric::HEta => (0.0, diff2.scale(c(0.5))),
            TimeMetric::HTilde => (0.0, diff2.scale(c(-0.5))),
            TimeMetric::HT { center } => {
                let d = tau - center;
                let lin = (a.clone() + b.clone()).scale(c(2.0 * d));
                let quad = a.pow(2) + b.pow(2) - diff2.scale(c(0.5));
                (2.0 * d * d, lin + quad)
            }
        };
        let series = exp_series(&q, m + n);
        let coeff = series.coeff(&[m, n]).re;
        let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
        sign * base.exp() * coeff * factorial(m) * factorial(n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeJet {
    pub spatial: SpaceElement,
    pub order: u32,
}

/// `Σ_m ψ_m(x) δ^(m)(t − τ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSlicedElement {
    pub slice_time: f64,
    pub space_dim: usize,
    pub jets: Vec<TimeJet>,
}

impl TimeSlicedElement {
    pub fn new(slice_time: f64, space_dim: usize) -> Self {
        Self {
            slice_time,
            space_dim,
            jets: Vec::new(),
        }
    }

    pub fn order0(slice_time: f64, psi: SpaceElement) -> Self {
        let mut s = Self::new(slice_time, psi.dim);
        s.jets.push(TimeJet {
            spatial: psi,
            order: 0,
        });
        s
    }

    pub fn push_jet(&mut self, spatial: SpaceElement, order: u32) -> Result<()> {
        check_dim(self.space_dim, spatial.dim)?;
        if order > MAX_TIME_ORDER {
            return Err(Error::Unsupported(format!(
                "time-derivative order {order} exceeds {MAX_TIME_ORDER}"
            )));
        }
        self.jets.push(TimeJet { spatial, order });
        Ok(())
    }

    pub fn with_jet(mut self, spatial: SpaceElement, order: u32) -> Result<Self> {
        self.push_jet(spatial, order)?;
        Ok(self)
    }

    /// Spatial coefficient of `δ^(order)`, summed over jets.
    pub fn component(&self, order: u32) -> SpaceElement {
        self.jets
            .iter()
            .filter(|j| j.order == order)
            .fold(SpaceElement::zero(self.space_dim), |acc, j| {
                acc + j.spatial.clone()
            })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.slice_time != other.slice_time {
            return Err(Error::SliceMismatch(self.slice_time, other.slice_time));
        }
        check_dim(self.space_dim, other.space_dim)?;
        let mut out = self.clone();
        out.jets.extend(other.jets.iter().cloned());
        Ok(out)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for j in &mut out.jets {
            j.spatial = j.spatial.scale(s);
        }
        out
    }

    /// Largest `|a_m(x) − b_m(x)| / |ψ(x)|` over orders and samples.
    pub fn max_relative_difference(
        &self,
        other: &Self,
        reference: &SpaceElement,
        samples: &[Vec<f64>],
    ) -> Result<f64> {
        if self.slice_time != other.slice_time {
            return Err(Error::SliceMismatch(self.slice_time, other.slice_time));
        }
        let mut worst: f64 = 0.0;
        for order in 0..=MAX_TIME_ORDER {
            let diff = self.component(order) - other.component(order);
            for x in samples {
                let scale = reference.eval(x)?.norm();
                worst = worst.max(diff.eval(x)?.norm() / scale);
            }
        }
        Ok(worst)
    }
}

/// `Σ (ψ_m, φ_n)_𝐇 · pairing(m, n)` for slices at the same time.
pub fn slice_inner_product(
    s1: &TimeSlicedElement,
    s2: &TimeSlicedElement,
    spatial: &KernelSpec,
    metric: TimeMetric,
) -> Result<C64> {
    if s1.slice_time != s2.slice_time {
        return Err(Error::SliceMismatch(s1.slice_time, s2.slice_time));
    }
    check_dim(s1.space_dim, s2.space_dim)?;
    let tau = s1.slice_time;
    let mut total = c(0.0);
    for a in &s1.jets {
        for b in &s2.jets {
            let w = metric.jet_pairing(tau, a.order, b.order);
            if w != 0.0 {
                total += inner_product(&a.spatial, &b.spatial, spatial)? * w;
            }
        }
    }
    Ok(total)
}

pub fn slice_norm_squared(
    s: &TimeSlicedElement,
    spatial: &KernelSpec,
    metric: TimeMetric,
) -> Result<f64> {
    Ok(slice_inner_product(s, s, spatial, metric)?.re)
}

/// Inner products of `c1`, `c2` under each metric.
pub fn orthogonality_check(
    c1: &TimeSlicedElement,
    c2: &TimeSlicedElement,
    spatial: &KernelSpec,
    metrics: &[TimeMetric],
) -> Result<Vec<C64>> {
    metrics
        .iter()
        .map(|&m| slice_inner_product(c1, c2, spatial, m))
        .collect()
}

/// `|⟨c1, c2⟩| / sqrt(|⟨c1, c1⟩| |⟨c2, c2⟩|)`.
pub fn relative_overlap(
    c1: &TimeSlicedElement,
    c2: &TimeSlicedElement,
    spatial: &KernelSpec,
    metric: TimeMetric,
) -> Result<f64> {
    let cross = slice_inner_product(c1, c2, spatial, metric)?.norm();
    let n1 = slice_norm_squared(c1, spatial, metric)?.abs();
    let n2 = slice_norm_squared(c2, spatial, metric)?.abs();
    Ok(cross / (n1 * n2).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    Free,
    Harmonic,
}

fn one() -> f64 {
    1.0
}

/// `ĥ = −(ħ²/2m) Δ + ½ m ω² |x|² + V₀`; `ω` is ignored for the free kind.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub kind: HamiltonianKind,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default)]
    pub frequency: f64,
    #[serde(default)]
    pub offset: f64,
    #[serde(default = "one")]
    pub hbar: f64,
}

impl HamiltonianSpec {
    pub fn free() -> Self {
        Self {
            kind: HamiltonianKind::Free,
            mass: 1.0,
            frequency: 0.0,
            offset: 0.0,
            hbar: 1.0,
        }
    }

    pub fn harmonic(frequency: f64) -> Self {
        Self {
            kind: HamiltonianKind::Harmonic,
            frequency,
            ..Self::free()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mass > 0.0
            && self.hbar > 0.0
            && self.frequency >= 0.0
            && self.offset.is_finite()
            && (self.kind == HamiltonianKind::Free || self.frequency > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("invalid Hamiltonian {self:?}")))
        }
    }

    fn omega(&self) -> f64 {
        match self.kind {
            HamiltonianKind::Free => 0.0,
            HamiltonianKind::Harmonic => self.frequency,
        }
    }

    /// `V` as a polynomial in `dim` variables.
    pub fn potential(&self, dim: usize) -> Poly {
        let k = 0.5 * self.mass * self.omega().powi(2);
        let mut v = Poly::constant(dim, c(self.offset));
        if k != 0.0 {
            for i in 0..dim {
                v = v + Poly::var(dim, i).pow(2).scale(c(k));
            }
        }
        v
    }

    /// `ĥ f` for gaussian-term elements, exactly: for `f = P e^Φ`,
    /// `Δ f = (ΔP + 2∇P·∇Φ + P(ΔΦ + |∇Φ|²)) e^Φ`.
    pub fn apply(&self, e: &SpaceElement) -> Result<SpaceElement> {
        if e.has_deltas() {
            return Err(Error::Unsupported("Hamiltonian on delta terms".into()));
        }
        let n = e.dim;
        let v = self.potential(n);
        let kinetic = c(-self.hbar * self.hbar / (2.0 * self.mass));
        let mut out = SpaceElement::zero(n);
        for f in &e.gaussians {
            let p = &f.poly;
            let mut lap = Poly::zero(n);
            for i in 0..n {
                // ∂_i Φ = −(A z)_i + b_i
                let coeffs: Vec<C64> = (0..n).map(|j| -f.quad[(i, j)]).collect();
                let grad_phi = Poly::linear(f.lin[i], &coeffs);
                let dp = p.derivative(i);
                lap = lap
                    + dp.derivative(i)
                    + (&dp * &grad_phi).scale(c(2.0))
                    + p * &(grad_phi.pow(2) - Poly::constant(n, f.quad[(i, i)]));
            }
            let poly = lap.scale(kinetic) + p * &v;
            out.gaussians.push(GaussianTerm { poly, ..f.clone() });
        }
        Ok(out)
    }
}

/// Time-dependent coefficients of a one-dimensional gaussian solution
/// `exp(−½ A(t) x² + B(t) x + C(t))`.
pub trait GaussianFlow: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    /// `[A, B, C]` at `t`.
    fn coefficients(&self, t: f64) -> [C64; 3];
    /// `[A', B', C']` at `t`, by differentiating the closed forms.
    fn derivatives(&self, t: f64) -> [C64; 3];
}

/// Free spreading packet.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeFlow {
    a0: f64,
    b0: C64,
    c0: C64,
    mass: f64,
    hbar: f64,
}

impl FreeFlow {
    /// Width `a0` (position standard deviation), centre `q0`, momentum `p0`.
    pub fn new(a0: f64, q0: f64, p0: f64, mass: f64, hbar: f64) -> Self {
        let a = 1.0 / (2.0 * a0 * a0);
        Self {
            a0: a,
            b0: C64::new(a * q0, p0 / hbar),
            c0: c(-0.25 * (2.0 * PI * a0 * a0).ln() - q0 * q0 / (4.0 * a0 * a0)),
            mass,
            hbar,
        }
    }

    fn denominator(&self, t: f64) -> C64 {
        c(1.0) + I * (self.hbar * self.a0 * t / self.mass)
    }
}

impl GaussianFlow for FreeFlow {
    fn name(&self) -> &'static str {
        "free"
    }

    fn coefficients(&self, t: f64) -> [C64; 3] {
        let d = self.denominator(t);
        let a = c(self.a0) / d;
        let b = self.b0 * a / self.a0;
        let cc = self.c0 - 0.5 * (self.b0 * self.b0 * (a - self.a0) / (self.a0 * self.a0) + d.ln());
        [a, b, cc]
    }

    fn derivatives(&self, t: f64) -> [C64; 3] {
        let d = self.denominator(t);
        let dd = I * (self.hbar * self.a0 / self.mass);
        let da = -c(self.a0) * dd / (d * d);
        let db = self.b0 * da / self.a0;
        let dc = -0.5 * (self.b0 * self.b0 * da / (self.a0 * self.a0) + dd / d);
        [da, db, dc]
    }
}

/// Coherent state of `½ m ω² x²` (without the constant offset).
#[derive(Clone, Debug, PartialEq)]
pub struct CoherentFlow {
    width: f64,
    omega: f64,
    b0: C64,
    c0: C64,
    mass: f64,
    hbar: f64,
}

impl CoherentFlow {
    pub fn new(q0: f64, p0: f64, mass: f64, omega: f64, hbar: f64) -> Self {
        let a = mass * omega / hbar;
        Self {
            width: a,
            omega,
            b0: C64::new(a * q0, p0 / hbar),
            c0: c(0.25 * (a / PI).ln() - 0.5 * a * q0 * q0),
            mass,
            hbar,
        }
    }
}

impl GaussianFlow for CoherentFlow {
    fn name(&self) -> &'static str {
        "coherent"
    }

    fn coefficients(&self, t: f64) -> [C64; 3] {
        let w = self.omega;
        let rot = (-I * w * t).exp();
        let b = self.b0 * rot;
        let cc = self.c0
            - self.hbar * self.b0 * self.b0 * (rot * rot - 1.0) / (4.0 * self.mass * w)
            - I * (0.5 * w * t);
        [c(self.width), b, cc]
    }

    fn derivatives(&self, t: f64) -> [C64; 3] {
        let w = self.omega;
        let rot = (-I * w * t).exp();
        let db = -I * w * self.b0 * rot;
        let dc = I * self.hbar * self.b0 * self.b0 * rot * rot / (2.0 * self.mass) - I * (0.5 * w);
        [c(0.0), db, dc]
    }
}

/// Packet parameters; in three dimensions the packet sits at `(q0, 0, 0)`
/// moving along the first axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketParams {
    pub a0: f64,
    #[serde(default)]
    pub q0: f64,
    #[serde(default)]
    pub p0: f64,
}

/// An analytic solution `ψ(x, t) = P(x) Π_k exp(−½A_k x_k² + B_k x_k + C_k)
/// · e^{−iV₀t/ħ}`; `P = 1` for true solutions.
#[derive(Clone, Debug)]
pub struct EvolutionPath {
    axes: Vec<Arc<dyn GaussianFlow>>,
    hamiltonian: HamiltonianSpec,
    perturbation: Option<Poly>,
    pub range: (f64, f64),
}

impl EvolutionPath {
    pub fn new(axes: Vec<Arc<dyn GaussianFlow>>, hamiltonian: HamiltonianSpec) -> Result<Self> {
        hamiltonian.validate()?;
        if axes.is_empty() {
            return Err(Error::Unsupported("path without spatial axes".into()));
        }
        Ok(Self {
            axes,
            hamiltonian,
            perturbation: None,
            range: (-10.0, 10.0),
        })
    }

    /// Spreading packet of the free Hamiltonian `h` (its kind is forced to
    /// free).
    pub fn free(packet: PacketParams, h: HamiltonianSpec, space_dim: usize) -> Result<Self> {
        if !(packet.a0 > 0.0) {
            return Err(Error::Unsupported(format!("packet width {}", packet.a0)));
        }
        let h = HamiltonianSpec {
            kind: HamiltonianKind::Free,
            ..h
        };
        let axes = (0..space_dim)
            .map(|k| {
                let (q, p) = if k == 0 {
                    (packet.q0, packet.p0)
                } else {
                    (0.0, 0.0)
                };
                Arc::new(FreeFlow::new(packet.a0, q, p, h.mass, h.hbar)) as Arc<dyn GaussianFlow>
            })
            .collect();
        Self::new(axes, h)
    }

    /// Coherent state of the harmonic Hamiltonian `h`.
    pub fn coherent(q0: f64, p0: f64, h: HamiltonianSpec, space_dim: usize) -> Result<Self> {
        if h.kind != HamiltonianKind::Harmonic {
            return Err(Error::Unsupported(
                "coherent states need a harmonic Hamiltonian".into(),
            ));
        }
        h.validate()?;
        let axes = (0..space_dim)
            .map(|k| {
                let (q, p) = if k == 0 { (q0, p0) } else { (0.0, 0.0) };
                Arc::new(CoherentFlow::new(q, p, h.mass, h.frequency, h.hbar))
                    as Arc<dyn GaussianFlow>
            })
            .collect();
        Self::new(axes, h)
    }

    /// `ψ (1 + ε x₁)`-style controls: multiply by a time-independent
    /// polynomial.
    pub fn perturbed(&self, p: Poly) -> Result<Self> {
        check_dim(self.space_dim(), p.nvars())?;
        let mut out = self.clone();
        out.perturbation = Some(p);
        Ok(out)
    }

    pub fn space_dim(&self) -> usize {
        self.axes.len()
    }

    pub fn hamiltonian(&self) -> &HamiltonianSpec {
        &self.hamiltonian
    }

    fn prefactor(&self) -> Poly {
        self.perturbation
            .clone()
            .unwrap_or_else(|| Poly::one(self.space_dim()))
    }

    fn phase_rate(&self) -> f64 {
        self.hamiltonian.offset / self.hamiltonian.hbar
    }

    fn envelope(&self, t: f64) -> GaussianTerm {
        let n = self.space_dim();
        let coeffs: Vec<[C64; 3]> = self.axes.iter().map(|f| f.coefficients(t)).collect();
        let constant: C64 = coeffs.iter().map(|k| k[2]).sum::<C64>() - I * (self.phase_rate() * t);
        GaussianTerm {
            coeff: constant.exp(),
            poly: Poly::one(n),
            quad: DMatrix::from_diagonal(&DVector::from_iterator(n, coeffs.iter().map(|k| k[0]))),
            lin: DVector::from_iterator(n, coeffs.iter().map(|k| k[1])),
        }
    }

    /// `ψ(·, t)` as an element.
    pub fn spatial(&self, t: f64) -> SpaceElement {
        SpaceElement::from_gaussian(self.envelope(t).times_poly(&self.prefactor()))
    }

    /// `∂ψ/∂t (·, t)` as an element.
    pub fn time_derivative(&self, t: f64) -> SpaceElement {
        let n = self.space_dim();
        let mut rate = Poly::constant(n, -I * self.phase_rate());
        for (k, f) in self.axes.iter().enumerate() {
            let [da, db, dc] = f.derivatives(t);
            let x = Poly::var(n, k);
            rate = rate + x.pow(2).scale(da * -0.5) + x.scale(db) + Poly::constant(n, dc);
        }
        SpaceElement::from_gaussian(self.envelope(t).times_poly(&(&self.prefactor() * &rate)))
    }

    /// `ψ(x, t)` evaluated directly.
    pub fn value(&self, x: &[f64], t: f64) -> C64 {
        let mut log = -I * (self.phase_rate() * t);
        for (k, f) in self.axes.iter().enumerate() {
            let [a, b, cc] = f.coefficients(t);
            log += -0.5 * a * x[k] * x[k] + b * x[k] + cc;
        }
        self.prefactor().eval_real(x) * log.exp()
    }

    /// `ψ(·, τ) δ(t − τ)`; the slice label is the time argument of ψ.
    pub fn slice(&self, tau: f64) -> TimeSlicedElement {
        TimeSlicedElement::order0(tau, self.spatial(tau))
    }

    /// `dφ_τ/dτ = ψ_t(τ) δ(t − τ) − ψ(τ) δ'(t − τ)`.
    pub fn slice_derivative(&self, tau: f64) -> TimeSlicedElement {
        let mut s = TimeSlicedElement::order0(tau, self.time_derivative(tau));
        s.jets.push(TimeJet {
            spatial: -self.spatial(tau),
            order: 1,
        });
        s
    }
}

/// Standard 1-D free packet with `ħ = m = 1`.
pub fn free_packet(a0: f64, q0: f64, p0: f64) -> Result<EvolutionPath> {
    EvolutionPath::free(PacketParams { a0, q0, p0 }, HamiltonianSpec::free(), 1)
}

/// `max |∂ψ/∂t + (i/ħ) ĥψ| / |ψ|` over `(x, t)` samples.
pub fn schrodinger_residual(
    path: &EvolutionPath,
    h: &HamiltonianSpec,
    samples: &[(Vec<f64>, f64)],
) -> Result<f64> {
    h.validate()?;
    let mut worst: f64 = 0.0;
    for (x, t) in samples {
        check_dim(path.space_dim(), x.len())?;
        let psi = path.spatial(*t);
        let dt = path.time_derivative(*t).eval(x)?;
        let hpsi = h.apply(&psi)?.eval(x)?;
        let r = (dt + I * hpsi / h.hbar).norm() / psi.eval(x)?.norm();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// `n_x × n_t` tensor grid of samples; in more than one dimension the grid
/// runs along the diagonal `x = (s, s, ...)`.
pub fn sample_grid(
    space_dim: usize,
    x_range: (f64, f64),
    t_range: (f64, f64),
    n_x: usize,
    n_t: usize,
) -> Vec<(Vec<f64>, f64)> {
    let lerp = |(lo, hi): (f64, f64), i: usize, n: usize| {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(n_x * n_t);
    for j in 0..n_t {
        let t = lerp(t_range, j, n_t);
        for i in 0..n_x {
            out.push((vec![lerp(x_range, i, n_x); space_dim], t));
        }
    }
    out
}

/// Finite-difference check of `iħ ψ_t = ĥ ψ` on a 1-D `(x, t)` grid using
/// only point values of ψ; returns the largest absolute residual.
pub fn fd_pde_residual(
    path: &EvolutionPath,
    h: &HamiltonianSpec,
    x_range: (f64, f64),
    t_range: (f64, f64),
    n: usize,
    step: f64,
) -> Result<f64> {
    check_dim(1, path.space_dim())?;
    h.validate()?;
    let v = h.potential(1);
    let mut worst: f64 = 0.0;
    for (x, t) in sample_grid(1, x_range, t_range, n, n) {
        let x0 = x[0];
        let psi = |x: f64, t: f64| path.value(&[x], t);
        let centre = psi(x0, t);
        let dt = (psi(x0, t + step) - psi(x0, t - step)) / (2.0 * step);
        let dxx = (psi(x0 + step, t) - 2.0 * centre + psi(x0 - step, t)) / (step * step);
        let hpsi = dxx * (-h.hbar * h.hbar / (2.0 * h.mass)) + v.eval_real(&[x0]) * centre;
        worst = worst.max((I * h.hbar * dt - hpsi).norm());
    }
    Ok(worst)
}

/// The two components `(−(i/ħ) ĥ φ_τ, −∂φ_τ/∂t)` of the path velocity,
/// with `ψ(x, t) δ'(t − τ)` rewritten as `ψ(τ) δ' − ψ_t(τ) δ`, so that the
/// second component is `−ψ(·, τ) δ'(t − τ)`.
pub fn path_velocity(
    path: &EvolutionPath,
    tau: f64,
) -> Result<(TimeSlicedElement, TimeSlicedElement)> {
    let h = path.hamiltonian();
    let psi = path.spatial(tau);
    let c1 = TimeSlicedElement::order0(tau, h.apply(&psi)?.scale(-I / h.hbar));
    let c2 = TimeSlicedElement::new(tau, path.space_dim()).with_jet(-psi, 1)?;
    Ok((c1, c2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spatial_spec(d: usize) -> KernelSpec {
        KernelSpec::euclidean(d)
    }

    fn l2_norm(psi: &SpaceElement) -> f64 {
        // ∫|ψ|² by Riemann sum on a wide grid
        let h = 0.01;
        (-1500..=1500)
            .map(|i| psi.eval(&[i as f64 * h]).unwrap().norm_sqr() * h)
            .sum()
    }

    #[test]
    fn time_pairings() {
        let tau = 0.7;
        for m in [
            TimeMetric::HEta,
            TimeMetric::HTilde,
            TimeMetric::co_moving(tau),
        ] {
            assert_eq!(m.jet_pairing(tau, 0, 0), 1.0, "{m:?}");
            assert_eq!(m.jet_pairing(tau, 0, 1), 0.0, "{m:?}");
            assert_eq!(m.jet_pairing(tau, 1, 0), 0.0, "{m:?}");
        }
        assert_eq!(TimeMetric::HEta.jet_pairing(tau, 1, 1), -1.0);
        assert_eq!(TimeMetric::HTilde.jet_pairing(tau, 1, 1), 1.0);
        assert_eq!(TimeMetric::co_moving(tau).jet_pairing(tau, 1, 1), 1.0);
        // away from the centre the order-0/order-1 pairing is −∂_s k = −2d e^{2d²}
        let d: f64 = 0.5;
        let off = TimeMetric::HT { center: 0.0 }.jet_pairing(d, 0, 1);
        assert!((off + 2.0 * d * (2.0 * d * d).exp()).abs() < 1e-14);
    }

    #[test]
    fn free_packet_initial_slice_and_unitarity() {
        let path = free_packet(1.0, 0.5, 1.2).unwrap();
        let psi0 = path.spatial(0.0);
        for x in [-1.0, 0.0, 0.3, 2.0] {
            let want = (2.0 * PI).powf(-0.25) * (-(x - 0.5f64).powi(2) / 4.0).exp();
            let got = psi0.eval(&[x]).unwrap();
            assert!((got.norm() - want).abs() < 1e-15);
        }
        for t in [0.0, 0.5, 2.0] {
            assert!((l2_norm(&path.spatial(t)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_solutions_satisfy_the_equation() {
        let samples = sample_grid(1, (-4.0, 4.0), (0.0, 3.0), 17, 7);
        let free = free_packet(0.8, 0.3, 1.5).unwrap();
        assert!(schrodinger_residual(&free, &HamiltonianSpec::free(), &samples).unwrap() <= 1e-10);
        let h = HamiltonianSpec {
            offset: 0.4,
            mass: 1.3,
            ..HamiltonianSpec::harmonic(1.7)
        };
        let coh = EvolutionPath::coherent(0.6, -0.8, h, 1).unwrap();
        assert!(schrodinger_residual(&coh, &h, &samples).unwrap() <= 1e-10);
        let wrong = schrodinger_residual(&free, &HamiltonianSpec::harmonic(1.0), &samples).unwrap();
        assert!(wrong > 0.1);
        let bent = free.perturbed(Poly::linear(c(1.0), &[c(0.01)])).unwrap();
        assert!(schrodinger_residual(&bent, &HamiltonianSpec::free(), &samples).unwrap() >= 1e-2);
    }

    #[test]
    fn three_dimensional_packets() {
        let samples = sample_grid(3, (-2.0, 2.0), (0.0, 1.0), 5, 3);
        let h = HamiltonianSpec::harmonic(0.9);
        let coh = EvolutionPath::coherent(0.5, 0.2, h, 3).unwrap();
        assert!(schrodinger_residual(&coh, &h, &samples).unwrap() <= 1e-10);
        let free = EvolutionPath::free(
            PacketParams {
                a0: 1.0,
                q0: 0.0,
                p0: 1.0,
            },
            HamiltonianSpec::free(),
            3,
        )
        .unwrap();
        assert!(schrodinger_residual(&free, &HamiltonianSpec::free(), &samples).unwrap() <= 1e-10);
    }

    #[test]
    fn finite_difference_oracle() {
        let path = free_packet(1.0, 0.0, 1.0).unwrap();
        let r = fd_pde_residual(
            &path,
            &HamiltonianSpec::free(),
            (-3.0, 3.0),
            (0.0, 1.0),
            50,
            1e-3,
        )
        .unwrap();
        assert!(r <= 1e-6, "{r:e}");
    }

    #[test]
    fn velocity_components() {
        let path = free_packet(1.0, 0.0, 0.0).unwrap();
        let tau = 0.4;
        let (c1, c2) = path_velocity(&path, tau).unwrap();
        // δ' coefficient is −ψ(·, τ)
        assert_eq!(c2.component(1), -path.spatial(tau));
        // the components add up to dφ/dτ
        let samples: Vec<Vec<f64>> = (-4..=4).map(|i| vec![0.5 * i as f64]).collect();
        let sum = c1.add(&c2).unwrap();
        let dev = sum
            .max_relative_difference(&path.slice_derivative(tau), &path.spatial(tau), &samples)
            .unwrap();
        assert!(dev < 1e-12, "{dev:e}");
        let spec = spatial_spec(1);
        for m in [
            TimeMetric::HEta,
            TimeMetric::HTilde,
            TimeMetric::co_moving(tau),
        ] {
            assert!(relative_overlap(&c1, &c2, &spec, m).unwrap() <= 1e-8);
        }
        // c1 with itself: a positive Hilbert norm
        assert!(slice_norm_squared(&c1, &spec, TimeMetric::HEta).unwrap() > 0.0);
        // two order-0 jets over the same gaussian are not orthogonal
        let a = TimeSlicedElement::order0(tau, path.spatial(tau));
        assert!(relative_overlap(&a, &a.scale(I), &spec, TimeMetric::HEta).unwrap() > 0.5);
    }

    #[test]
    fn slice_collapse_and_superposition() {
        let spec = spatial_spec(1);
        let p1 = free_packet(1.0, -0.5, 0.3).unwrap();
        let p2 = free_packet(0.7, 0.8, -1.0).unwrap();
        let tau = 1.3;
        let (s1, s2) = (p1.slice(tau), p2.slice(tau));
        let spatial = inner_product(&p1.spatial(tau), &p2.spatial(tau), &spec).unwrap();
        for m in [
            TimeMetric::HEta,
            TimeMetric::HTilde,
            TimeMetric::co_moving(tau),
        ] {
            let v = slice_inner_product(&s1, &s2, &spec, m).unwrap();
            assert!((v - spatial).norm() <= 1e-12 * spatial.norm().max(1.0));
        }
        let sum = s1.add(&s2).unwrap();
        let lhs = slice_norm_squared(&sum, &spec, TimeMetric::HEta).unwrap();
        let rhs = crate::inner::norm_squared(&(p1.spatial(tau) + p2.spatial(tau)), &spec).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        assert!(matches!(
            slice_inner_product(&s1, &p2.slice(0.0), &spec, TimeMetric::HEta),
            Err(Error::SliceMismatch(..))
        ));
        let zero = TimeSlicedElement::new(tau, 1);
        assert_eq!(
            slice_norm_squared(&zero, &spec, TimeMetric::HEta).unwrap(),
            0.0
        );
    }

    #[test]
    fn hamiltonian_of_gaussian_matches_finite_differences() {
        let h = HamiltonianSpec {
            mass: 0.7,
            ..HamiltonianSpec::harmonic(1.3)
        };
        let f = SpaceElement::from_gaussian(
            GaussianTerm::isotropic(1.0, 1.5, &[0.2]).times_poly(&Poly::linear(c(1.0), &[c(0.4)])),
        );
        let hf = h.apply(&f).unwrap();
        let step = 1e-4;
        for x in [-1.0, 0.0, 0.7] {
            let v = |x: f64| f.eval(&[x]).unwrap();
            let dxx = (v(x + step) - 2.0 * v(x) + v(x - step)) / (step * step);
            let want = dxx * (-1.0 / 1.4) + v(x) * (0.5 * 0.7 * 1.69 * x * x);
            assert!((hf.eval(&[x]).unwrap() - want).norm() < 1e-6);
        }
    }
}
