//! Sparse multivariate polynomials with complex coefficients.
//!
//! Used for monomial prefactors of Gaussian terms, for derivative
//! polynomials of the Gaussian kernel, and for jets of delta functionals
//! (where the variables stand for partial-derivative symbols).

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

pub type C64 = Complex64;

/// A multi-index of per-variable exponents.
pub type MultiIndex = Vec<u32>;

#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<MultiIndex, C64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: C64) -> Self {
        Self::monomial(vec![0; nvars], c)
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, C64::new(1.0, 0.0))
    }

    /// The polynomial `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::monomial(e, C64::new(1.0, 0.0))
    }

    pub fn monomial(exps: MultiIndex, c: C64) -> Self {
        let nvars = exps.len();
        let mut terms = BTreeMap::new();
        if c != C64::new(0.0, 0.0) {
            terms.insert(exps, c);
        }
        Self { nvars, terms }
    }

    /// Affine form `c + sum_i coeffs[i] x_i`.
    pub fn linear(constant: C64, coeffs: &[C64]) -> Self {
        let n = coeffs.len();
        let mut p = Self::constant(n, constant);
        for (i, &c) in coeffs.iter().enumerate() {
            p = p + Self::var(n, i) * c;
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &C64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exps: &[u32]) -> C64 {
        self.terms.get(exps).copied().unwrap_or_default()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    fn add_term(&mut self, exps: MultiIndex, c: C64) {
        debug_assert_eq!(exps.len(), self.nvars);
        let entry = self.terms.entry(exps).or_default();
        *entry += c;
        if *entry == C64::new(0.0, 0.0) {
            self.terms.retain(|_, v| *v != C64::new(0.0, 0.0));
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, v) in &self.terms {
            out.add_term(e.clone(), v * c);
        }
        out
    }

    pub fn conj(&self) -> Self {
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, v)| (e.clone(), v.conj()))
                .collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::one(self.nvars), |acc, _| &acc * self)
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, v) in &self.terms {
            if e[i] > 0 {
                let mut d = e.clone();
                d[i] -= 1;
                out.add_term(d, v * e[i] as f64);
            }
        }
        out
    }

    pub fn eval(&self, x: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|(e, v)| e.iter().zip(x).fold(*v, |acc, (&k, xi)| acc * xi.powu(k)))
            .sum()
    }

    pub fn eval_real(&self, x: &[f64]) -> C64 {
        let xc: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.eval(&xc)
    }

    /// Composition: variable `i` is replaced by `subs[i]`; all substitutes
    /// share a common variable count which becomes the result's.
    pub fn substitute(&self, subs: &[Poly]) -> Self {
        assert_eq!(subs.len(), self.nvars, "substitution arity");
        let target = subs.first().map_or(0, |p| p.nvars);
        let mut out = Self::zero(target);
        for (e, v) in &self.terms {
            let mut term = Self::constant(target, *v);
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    term = &term * &subs[i].pow(k);
                }
            }
            out = out + term;
        }
        out
    }

    /// Re-embed into a larger variable set: variable `i` becomes `offset + i`.
    pub fn embed(&self, nvars: usize, offset: usize) -> Self {
        let mut out = Self::zero(nvars);
        for (e, v) in &self.terms {
            let mut ne = vec![0; nvars];
            ne[offset..offset + self.nvars].copy_from_slice(e);
            out.add_term(ne, *v);
        }
        out
    }

    /// Same polynomial in variables reflected by `signs` (each +1 or -1).
    pub fn reflect(&self, signs: &[f64]) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, v) in &self.terms {
            let s: f64 = e
                .iter()
                .zip(signs)
                .map(|(&k, &sg)| if sg < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 })
                .product();
            out.add_term(e.clone(), v * s);
        }
        out
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(mut self, rhs: Poly) -> Poly {
        assert_eq!(self.nvars, rhs.nvars);
        for (e, v) in rhs.terms {
            self.add_term(e, v);
        }
        self
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        self + (-rhs)
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul<C64> for Poly {
    type Output = Poly;
    fn mul(self, rhs: C64) -> Poly {
        self.scale(rhs)
    }
}

impl Mul<&Poly> for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = Poly::zero(self.nvars);
        for (ea, va) in &self.terms {
            for (eb, vb) in &rhs.terms {
                let e: MultiIndex = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, va * vb);
            }
        }
        out
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        &self * &rhs
    }
}

/// Taylor coefficients up to total degree `max_degree` of `exp(q)` where `q`
/// has no constant term.
pub fn exp_series(q: &Poly, max_degree: u32) -> Poly {
    assert!(q.coeff(&vec![0; q.nvars()]) == C64::new(0.0, 0.0));
    let truncate = |p: Poly| {
        let mut out = Poly::zero(p.nvars);
        for (e, v) in p.terms {
            if e.iter().sum::<u32>() <= max_degree {
                out.add_term(e, v);
            }
        }
        out
    };
    let mut sum = Poly::one(q.nvars());
    let mut power = Poly::one(q.nvars());
    let mut fact = 1.0;
    for k in 1..=max_degree {
        power = truncate(&power * q);
        fact *= k as f64;
        sum = sum + power.scale(C64::new(1.0 / fact, 0.0));
    }
    sum
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}
