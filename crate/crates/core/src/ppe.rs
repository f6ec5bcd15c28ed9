//! Piecewise polynomial·exponential functions.
//!
//! A [`Ppe`] is a finite sum of [`Term`]s. Each term is supported on a
//! half-open interval `[lo, hi)` (either end may be infinite) and has the form
//! `exp(rate·(t − origin)) · Σ_j c_j (t − origin)^j`. Green's functions,
//! null-space bases, analysis functions, test bumps and measurement profiles
//! are all of this shape, and so are their products and derivatives, which
//! keeps every inner product in closed form.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub lo: f64,
    pub hi: f64,
    pub origin: f64,
    pub rate: f64,
    pub coeffs: Vec<f64>,
}

impl Term {
    pub fn new(lo: f64, hi: f64, origin: f64, rate: f64, coeffs: Vec<f64>) -> Self {
        Self {
            lo,
            hi,
            origin,
            rate,
            coeffs,
        }
    }

    fn value_unchecked(&self, t: f64) -> f64 {
        let u = t - self.origin;
        let poly = horner(&self.coeffs, u);
        if self.rate == 0.0 {
            poly
        } else {
            poly * (self.rate * u).exp()
        }
    }

    fn is_zero(&self) -> bool {
        self.lo >= self.hi || self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// The same function expressed around a new origin.
    fn recentered(&self, origin: f64) -> Term {
        let delta = origin - self.origin;
        let mut coeffs = taylor_shift(&self.coeffs, delta);
        if self.rate != 0.0 && delta != 0.0 {
            let s = (self.rate * delta).exp();
            coeffs.iter_mut().for_each(|c| *c *= s);
        }
        Term {
            origin,
            coeffs,
            ..self.clone()
        }
    }

    fn derivative(&self) -> Term {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n.max(1)];
        for (j, &c) in self.coeffs.iter().enumerate() {
            out[j] += self.rate * c;
            if j > 0 {
                out[j - 1] += j as f64 * c;
            }
        }
        trim(&mut out);
        Term {
            coeffs: out,
            ..self.clone()
        }
    }

    fn product(&self, other: &Term) -> Option<Term> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo >= hi {
            return None;
        }
        let origin = if lo.is_finite() && hi.is_finite() {
            0.5 * (lo + hi)
        } else if lo.is_finite() {
            lo
        } else if hi.is_finite() {
            hi
        } else {
            self.origin
        };
        let a = self.recentered(origin);
        let b = other.recentered(origin);
        let mut coeffs = vec![0.0; a.coeffs.len() + b.coeffs.len() - 1];
        for (i, &x) in a.coeffs.iter().enumerate() {
            for (j, &y) in b.coeffs.iter().enumerate() {
                coeffs[i + j] += x * y;
            }
        }
        Some(Term::new(lo, hi, origin, self.rate + other.rate, coeffs))
    }

    /// Integral over `[a, b] ∩ [lo, hi)`; the intersection must be bounded.
    fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        let lo = self.lo.max(a);
        let hi = self.hi.min(b);
        if lo >= hi {
            return Ok(0.0);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::UnboundedSupport);
        }
        let h = 0.5 * (hi - lo);
        let t = self.recentered(lo + h);
        if t.rate == 0.0 {
            // odd powers cancel on the symmetric interval
            let mut acc = 0.0;
            let mut hp = h;
            for (j, &c) in t.coeffs.iter().enumerate() {
                if j % 2 == 0 {
                    acc += 2.0 * c * hp / (j as f64 + 1.0);
                }
                hp *= h;
            }
            return Ok(acc);
        }
        let w = hi - lo;
        // Panels with |rate·h| ≤ 1 and enough nodes for the polynomial
        // degree: exact for the polynomial part, Taylor-exact for exp.
        let deg = t.coeffs.len().saturating_sub(1);
        let nodes = (deg / 2 + 12).min(MAX_RULE);
        let panels = ((t.rate.abs() * w).ceil() as usize).clamp(1, 1 << 14);
        let rule = rule(nodes);
        let mut acc = 0.0;
        let step = w / panels as f64;
        for p in 0..panels {
            let a = -h + p as f64 * step;
            acc += rule.integrate(a, a + step, |u| horner(&t.coeffs, u) * (t.rate * u).exp());
        }
        Ok(acc)
    }
}

const MAX_RULE: usize = 64;

fn rule(n: usize) -> &'static GaussLegendre {
    static RULES: OnceLock<Vec<GaussLegendre>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (1..=MAX_RULE).map(GaussLegendre::new).collect());
    &rules[n - 1]
}

fn horner(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
}

fn trim(c: &mut Vec<f64>) {
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
}

/// Coefficients of `P(u + delta)` in powers of `u`.
fn taylor_shift(coeffs: &[f64], delta: f64) -> Vec<f64> {
    if delta == 0.0 {
        return coeffs.to_vec();
    }
    let n = coeffs.len();
    let mut out = coeffs.to_vec();
    // repeated synthetic division
    for k in 0..n {
        for j in (k..n - 1).rev() {
            out[j] += delta * out[j + 1];
        }
    }
    out
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Sum of polynomial·exponential pieces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ppe {
    terms: Vec<Term>,
}

impl Ppe {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        let mut out = Self { terms };
        out.terms.retain(|t| !t.is_zero());
        out
    }

    pub fn term(lo: f64, hi: f64, origin: f64, rate: f64, coeffs: Vec<f64>) -> Self {
        Self::from_terms(vec![Term::new(lo, hi, origin, rate, coeffs)])
    }

    /// Polynomial in `(t − lo)` supported on `[lo, hi)`.
    pub fn polynomial(lo: f64, hi: f64, coeffs: Vec<f64>) -> Self {
        Self::term(lo, hi, lo, 0.0, coeffs)
    }

    /// Indicator of `[lo, hi)`.
    pub fn indicator(lo: f64, hi: f64) -> Self {
        Self::polynomial(lo, hi, vec![1.0])
    }

    /// `(t − lo)^k (hi − t)^k · ((t − lo)/(hi − lo))^m` on `[lo, hi)`.
    ///
    /// Expanded around the midpoint `c`, where `(t−lo)(hi−t) = h² − v²` with
    /// `v = t − c` and `h = w/2`; this loses about `2^k` in relative accuracy
    /// instead of `8^k` for the expansion around `lo`.
    pub fn bump(lo: f64, hi: f64, k: usize, m: usize) -> Self {
        let w = hi - lo;
        let h = 0.5 * w;
        let mut coeffs = vec![0.0; 2 * k + 1];
        for i in 0..=k {
            let c =
                binomial(k, i) * h.powi(2 * (k - i) as i32) * if i % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[2 * i] = c;
        }
        // ((v + h)/w)^m
        for _ in 0..m {
            let mut next = vec![0.0; coeffs.len() + 1];
            for (j, &c) in coeffs.iter().enumerate() {
                next[j] += c * h / w;
                next[j + 1] += c / w;
            }
            coeffs = next;
        }
        Self::term(lo, hi, lo + h, 0.0, coeffs)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .filter(|p| p.lo <= t && t < p.hi)
            .map(|p| p.value_unchecked(t))
            .sum()
    }

    /// `lim_{ε↓0} f(t − ε)`.
    pub fn eval_left(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .filter(|p| p.lo < t && t <= p.hi)
            .map(|p| p.value_unchecked(t))
            .sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                coeffs: t.coeffs.iter().map(|x| x * c).collect(),
                ..t.clone()
            })
            .collect();
        Self { terms }
    }

    pub fn add(&self, other: &Ppe) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::from_terms(terms).simplified()
    }

    pub fn mul(&self, other: &Ppe) -> Self {
        let terms = self
            .terms
            .iter()
            .flat_map(|a| other.terms.iter().filter_map(move |b| a.product(b)))
            .collect();
        Self::from_terms(terms)
    }

    /// Piecewise derivative (jumps at piece ends are not included).
    pub fn derivative(&self) -> Self {
        Self::from_terms(self.terms.iter().map(Term::derivative).collect())
    }

    /// `(D − αI)^k f`, piecewise.
    pub fn apply_operator(&self, alpha: f64, k: usize) -> Self {
        let mut f = self.clone();
        for _ in 0..k {
            f = f.derivative().add(&f.scaled(-alpha));
        }
        f
    }

    /// `(−D − αI)^k f`, the formal adjoint of `(D − αI)^k`.
    pub fn apply_adjoint(&self, alpha: f64, k: usize) -> Self {
        let mut f = self.clone();
        for _ in 0..k {
            f = f.derivative().scaled(-1.0).add(&f.scaled(-alpha));
        }
        f
    }

    /// `t ↦ f(t − s)`.
    pub fn shifted(&self, s: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                lo: t.lo + s,
                hi: t.hi + s,
                origin: t.origin + s,
                ..t.clone()
            })
            .collect();
        Self { terms }
    }

    /// Smallest interval containing every piece, if any.
    pub fn support(&self) -> Option<(f64, f64)> {
        let lo = self
            .terms
            .iter()
            .map(|t| t.lo)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .terms
            .iter()
            .map(|t| t.hi)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo < hi).then_some((lo, hi))
    }

    pub fn is_compact(&self) -> bool {
        self.support()
            .is_none_or(|(lo, hi)| lo.is_finite() && hi.is_finite())
    }

    /// Sorted distinct piece endpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .terms
            .iter()
            .flat_map(|t| [t.lo, t.hi])
            .filter(|x| x.is_finite())
            .collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// `∫_a^b f`.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        self.terms.iter().map(|t| t.integrate(a, b)).sum()
    }

    /// `∫_ℝ f`; fails when the support is unbounded.
    pub fn integral(&self) -> Result<f64> {
        self.integrate(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// `⟨f, g⟩ = ∫ f g`.
    pub fn inner(&self, other: &Ppe) -> Result<f64> {
        self.mul(other).integral()
    }

    /// Merges pieces sharing support and rate; drops zero pieces.
    pub fn simplified(&self) -> Self {
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            if let Some(existing) = out
                .iter_mut()
                .find(|e| e.lo == t.lo && e.hi == t.hi && e.rate == t.rate)
            {
                let r = t.recentered(existing.origin);
                if r.coeffs.len() > existing.coeffs.len() {
                    existing.coeffs.resize(r.coeffs.len(), 0.0);
                }
                for (e, c) in existing.coeffs.iter_mut().zip(r.coeffs) {
                    *e += c;
                }
                trim(&mut existing.coeffs);
            } else {
                out.push(t.clone());
            }
        }
        Self::from_terms(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{adaptive_with_breaks, AdaptiveOptions};

    #[test]
    fn closed_form_integrals() {
        let t = Ppe::polynomial(0.0, 1.0, vec![0.0, 1.0]);
        assert!((t.integrate(0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let e = Ppe::term(0.0, 1.0, 0.0, 1.0, vec![1.0]);
        assert!((e.integral().unwrap() - (1f64.exp() - 1.0)).abs() < 1e-14);
        let te2 = Ppe::term(0.0, 1.0, 0.0, 2.0, vec![0.0, 1.0]);
        let exact = (2f64.exp() + 1.0) / 4.0;
        assert!((te2.integral().unwrap() - exact).abs() < 1e-14);
    }

    #[test]
    fn unbounded_integral_is_an_error() {
        let g = Ppe::term(0.0, f64::INFINITY, 0.0, 0.0, vec![1.0]);
        assert_eq!(g.integral(), Err(Error::UnboundedSupport));
        assert!(g.integrate(0.0, 2.0).unwrap() == 2.0);
    }

    #[test]
    fn taylor_shift_matches_direct_evaluation() {
        let c = vec![1.0, -2.0, 0.5, 3.0];
        let s = taylor_shift(&c, 0.7);
        for &u in &[-1.0, 0.0, 0.3, 2.0] {
            assert!((horner(&s, u) - horner(&c, u + 0.7)).abs() < 1e-12);
        }
    }

    #[test]
    fn product_and_derivative() {
        let a = Ppe::term(-1.0, 2.0, 0.5, 0.3, vec![1.0, 2.0]);
        let b = Ppe::term(0.0, 3.0, 1.0, -1.2, vec![0.0, 0.0, 1.0]);
        let p = a.mul(&b);
        for &t in &[-0.5, 0.0, 0.4, 1.9, 2.5] {
            assert!((p.eval(t) - a.eval(t) * b.eval(t)).abs() < 1e-12);
        }
        let d = a.derivative();
        let h = 1e-6;
        let fd = (a.eval(0.8 + h) - a.eval(0.8 - h)) / (2.0 * h);
        assert!((d.eval(0.8) - fd).abs() < 1e-7);
    }

    #[test]
    fn exponential_integral_matches_adaptive_quadrature() {
        let f = Ppe::term(0.0, 5.0, 0.0, -2.5, vec![0.3, -1.0, 0.25, 0.1]);
        let q = adaptive_with_breaks(|t| f.eval(t), 0.0, 5.0, &[], AdaptiveOptions::default());
        assert!((f.integral().unwrap() - q).abs() < 1e-12);
    }

    #[test]
    fn left_limits() {
        let h = Ppe::term(0.0, f64::INFINITY, 0.0, 0.0, vec![1.0]);
        assert_eq!(h.eval(0.0), 1.0);
        assert_eq!(h.eval_left(0.0), 0.0);
    }

    #[test]
    fn bump_vanishes_at_ends() {
        let b = Ppe::bump(0.0, 2.0, 3, 1);
        assert_eq!(b.eval(2.0), 0.0);
        assert!(b.eval_left(2.0).abs() < 1e-12);
        assert!(b.eval(0.0).abs() < 1e-15);
        // (1)^3 (1)^3 (1/2)^1
        assert!((b.eval(1.0) - 0.5).abs() < 1e-14);
    }
}
