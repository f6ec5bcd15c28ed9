//! One-dimensional operator toolkit for `L = (D − αI)^N`.
//!
//! Green's function, null-space basis, admissible systems (universal,
//! interval-localized and interval-fundamental), the corrected kernel and the
//! null-space projection.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ppe::{factorial, Ppe, Term};

/// The operator `(D − αI)^N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Odo {
    alpha: f64,
    order: usize,
}

impl Odo {
    pub fn new(alpha: f64, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument(
                "operator order must be at least 1".into(),
            ));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidArgument("alpha must be finite".into()));
        }
        Ok(Self { alpha, order })
    }

    /// `D^N`.
    pub fn derivative(order: usize) -> Result<Self> {
        Self::new(0.0, order)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Causal Green's function `t₊^{N−1} e^{αt} / (N−1)!` (with `0⁰ = 1`).
    pub fn green(&self, t: f64) -> f64 {
        green_of_order(self.alpha, self.order, t)
    }

    /// `g_L(· − knot)` as a piecewise function.
    pub fn green_ppe(&self, knot: f64) -> Ppe {
        green_ppe_of_order(self.alpha, self.order, knot)
    }

    /// `p_n(t) = (t − anchor)^{n−1} e^{α(t − anchor)} / (n−1)!`.
    pub fn nullspace(&self, n: usize, anchor: f64, t: f64) -> Result<f64> {
        self.check_index(n)?;
        Ok(exp_poly(self.alpha, n, t - anchor))
    }

    pub fn nullspace_ppe(&self, n: usize, anchor: f64) -> Result<Ppe> {
        self.check_index(n)?;
        let mut coeffs = vec![0.0; n];
        coeffs[n - 1] = 1.0 / factorial(n - 1);
        Ok(Ppe::term(
            f64::NEG_INFINITY,
            f64::INFINITY,
            anchor,
            self.alpha,
            coeffs,
        ))
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.order {
            Err(Error::IndexOutOfRange {
                index: n,
                order: self.order,
            })
        } else {
            Ok(())
        }
    }
}

pub fn green_eval(odo: &Odo, t: f64) -> f64 {
    odo.green(t)
}

pub fn nullspace_eval(odo: &Odo, n: usize, anchor: f64, t: f64) -> Result<f64> {
    odo.nullspace(n, anchor, t)
}

/// `s^{n−1} e^{αs}/(n−1)!` for any real `s`.
pub(crate) fn exp_poly(alpha: f64, n: usize, s: f64) -> f64 {
    let p = if n == 1 { 1.0 } else { s.powi(n as i32 - 1) };
    p * (alpha * s).exp() / factorial(n - 1)
}

/// Green's function of `(D − αI)^order`; order 0 has no pointwise value and
/// evaluates to 0.
pub(crate) fn green_of_order(alpha: f64, order: usize, t: f64) -> f64 {
    if order == 0 || t < 0.0 {
        0.0
    } else {
        exp_poly(alpha, order, t)
    }
}

pub(crate) fn green_ppe_of_order(alpha: f64, order: usize, knot: f64) -> Ppe {
    if order == 0 {
        return Ppe::zero();
    }
    let mut coeffs = vec![0.0; order];
    coeffs[order - 1] = 1.0 / factorial(order - 1);
    Ppe::from_terms(vec![Term::new(knot, f64::INFINITY, knot, alpha, coeffs)])
}

/// Which one-sided value to use at a jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// `g_{order}(s)` with an explicit one-sided convention at `s = 0`.
pub(crate) fn green_sided(alpha: f64, order: usize, s: f64, side: Side) -> f64 {
    if s == 0.0 && side == Side::Left {
        0.0
    } else {
        green_of_order(alpha, order, s)
    }
}

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "interval needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_open(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemKind {
    Universal,
    KLocalized(Interval),
    KFundamental(Interval),
}

/// One analysis functional `φ_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Analysis {
    /// `f ↦ ∫ f φ` for a compactly supported profile.
    Profile(Ppe),
    /// `f ↦ ((D − αI)^power f)(point)`, optionally as a left limit.
    Derivative {
        point: f64,
        power: usize,
        side: Side,
    },
}

/// Null-space basis `p` plus biorthogonal analysis functionals `φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleSystem {
    odo: Odo,
    kind: SystemKind,
    anchor: f64,
    phi: Vec<Analysis>,
    support: Option<Interval>,
}

impl AdmissibleSystem {
    pub fn odo(&self) -> &Odo {
        &self.odo
    }

    pub fn kind(&self) -> &SystemKind {
        &self.kind
    }

    /// Reference point of the null-space basis.
    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn analysis(&self) -> &[Analysis] {
        &self.phi
    }

    /// `[φ⁻, φ⁺]` when the functionals are profiles (or the point `K⁻`).
    pub fn phi_support(&self) -> Option<Interval> {
        self.support
    }

    pub fn is_fundamental(&self) -> bool {
        matches!(self.kind, SystemKind::KFundamental(_))
    }

    pub fn p(&self, n: usize, t: f64) -> Result<f64> {
        self.odo.nullspace(n, self.anchor, t)
    }

    pub fn p_ppe(&self, n: usize) -> Result<Ppe> {
        self.odo.nullspace_ppe(n, self.anchor)
    }

    /// `⟨f, φ_n⟩` for a piecewise function `f`.
    pub fn apply_analysis(&self, n: usize, f: &Ppe) -> Result<f64> {
        self.odo.check_index(n)?;
        match &self.phi[n - 1] {
            Analysis::Profile(phi) => f.inner(phi),
            Analysis::Derivative { point, power, side } => {
                let g = f.apply_operator(self.odo.alpha, *power);
                Ok(match side {
                    Side::Left => g.eval_left(*point),
                    Side::Right => g.eval(*point),
                })
            }
        }
    }

    /// `⟨g_L(· − x), φ_n⟩` (the correction coefficient of the kernel).
    pub fn analysis_of_green(&self, n: usize, x: f64) -> Result<f64> {
        self.odo.check_index(n)?;
        match &self.phi[n - 1] {
            Analysis::Profile(phi) => self.odo.green_ppe(x).inner(phi),
            Analysis::Derivative { point, power, side } => {
                // (D − α)^power g_L = g of order N − power
                Ok(green_sided(
                    self.odo.alpha,
                    self.odo.order - power,
                    point - x,
                    *side,
                ))
            }
        }
    }

    /// Gram matrix `⟨p_n, φ_m⟩`.
    pub fn biorthogonality(&self) -> Result<DMatrix<f64>> {
        let n = self.odo.order;
        let mut g = DMatrix::zeros(n, n);
        for i in 1..=n {
            let p = self.p_ppe(i)?;
            for j in 1..=n {
                g[(i - 1, j - 1)] = self.apply_analysis(j, &p)?;
            }
        }
        Ok(g)
    }
}

/// Unit-mass bumps `(t−a_m)^k(b_m−t)^k` on `N` consecutive equal
/// sub-intervals `[a_m, b_m]` of the support. Disjoint pieces keep the Gram
/// matrix well conditioned.
pub fn polynomial_bump_generators(odo: &Odo, support: Interval, smoothness: usize) -> Vec<Ppe> {
    let n = odo.order;
    let h = support.width() / n as f64;
    let k = smoothness;
    (0..n)
        .map(|m| {
            let a = support.lo + m as f64 * h;
            let b = if m + 1 == n { support.hi } else { a + h };
            let w = b - a;
            // ∫ u^k (w−u)^k du = w^{2k+1} (k!)² / (2k+1)!
            let mass = w.powi(2 * k as i32 + 1) * crate::ppe::factorial(k).powi(2)
                / crate::ppe::factorial(2 * k + 1);
            Ppe::bump(a, b, k, 0).scaled(1.0 / mass)
        })
        .collect()
}

/// Builds `φ = G⁻ᵀ · generators` so that `⟨p_n, φ_m⟩ = δ_{nm}`.
pub fn build_universal_system(
    odo: &Odo,
    support: Interval,
    generators: &[Ppe],
    anchor: f64,
) -> Result<AdmissibleSystem> {
    let phi = biorthogonalize(odo, support, generators, anchor)?;
    Ok(AdmissibleSystem {
        odo: *odo,
        kind: SystemKind::Universal,
        anchor,
        phi,
        support: Some(support),
    })
}

/// Universal system with `[φ⁻, φ⁺] ⊆ K` and the basis anchored at `K⁻`.
pub fn build_localized_system(
    odo: &Odo,
    k: Interval,
    support: Interval,
    generators: &[Ppe],
) -> Result<AdmissibleSystem> {
    if !k.contains_interval(&support) {
        return Err(Error::InvalidArgument(format!(
            "analysis support [{}, {}] is not inside K = [{}, {}]",
            support.lo, support.hi, k.lo, k.hi
        )));
    }
    let phi = biorthogonalize(odo, support, generators, k.lo)?;
    Ok(AdmissibleSystem {
        odo: *odo,
        kind: SystemKind::KLocalized(k),
        anchor: k.lo,
        phi,
        support: Some(support),
    })
}

fn biorthogonalize(
    odo: &Odo,
    support: Interval,
    generators: &[Ppe],
    anchor: f64,
) -> Result<Vec<Analysis>> {
    let n = odo.order;
    if generators.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} generators, got {}",
            generators.len()
        )));
    }
    for g in generators {
        match g.support() {
            Some((lo, hi)) if lo >= support.lo && hi <= support.hi => {}
            None => {}
            _ => {
                return Err(Error::InvalidArgument(
                    "generator not supported in the requested interval".into(),
                ))
            }
        }
    }
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        let p = odo.nullspace_ppe(i + 1, anchor)?;
        for (j, g) in generators.iter().enumerate() {
            gram[(i, j)] = p.inner(g)?;
        }
    }
    let det = gram.clone().lu().determinant();
    let threshold = 1e-12 * gram.norm().powi(n as i32);
    if !(det.abs() >= threshold) || det == 0.0 {
        return Err(Error::SingularGram { det, threshold });
    }
    let inv = gram
        .try_inverse()
        .ok_or(Error::SingularGram { det, threshold })?;
    // C = G⁻ᵀ, φ_m = Σ_k C_{mk} gen_k
    let c = inv.transpose();
    Ok((0..n)
        .map(|m| {
            let phi = (0..n).fold(Ppe::zero(), |acc, k| {
                acc.add(&generators[k].scaled(c[(m, k)]))
            });
            Analysis::Profile(phi)
        })
        .collect())
}

/// The unique `K`-fundamental system: `p_n` anchored at `K⁻`, and
/// `ι_n f = ((D − αI)^{n−1} f)(K⁻)` with a left limit for `n = N`.
pub fn build_fundamental_system(odo: &Odo, k: Interval) -> AdmissibleSystem {
    let n = odo.order;
    let phi = (1..=n)
        .map(|i| Analysis::Derivative {
            point: k.lo,
            power: i - 1,
            side: if i == n { Side::Left } else { Side::Right },
        })
        .collect();
    AdmissibleSystem {
        odo: *odo,
        kind: SystemKind::KFundamental(k),
        anchor: k.lo,
        phi,
        support: Some(Interval { lo: k.lo, hi: k.lo }),
    }
}

/// The kernel `g_φ(t, x) = g_L(t − x) − Σ_n ⟨g_L(· − x), φ_n⟩ p_n(t)`.
///
/// For a fundamental system and `x ≥ K⁻` this is `g_L(t − x)` exactly; for
/// profile systems points outside `[min(t, φ⁻), max(t, φ⁺)]` return exact
/// zeros. Everything else goes through [`kernel_formula`].
pub fn kernel_eval(system: &AdmissibleSystem, t: f64, x: f64) -> Result<f64> {
    if let SystemKind::KFundamental(k) = system.kind {
        if x >= k.lo {
            return Ok(system.odo.green(t - x));
        }
    }
    if let Some(s) = system.support {
        if x < t.min(s.lo) || x > t.max(s.hi) {
            return Ok(0.0);
        }
    }
    kernel_formula(system, t, x)
}

/// Direct evaluation of the kernel formula with no shortcuts.
pub fn kernel_formula(system: &AdmissibleSystem, t: f64, x: f64) -> Result<f64> {
    let mut v = system.odo.green(t - x);
    for n in 1..=system.odo.order {
        v -= system.analysis_of_green(n, x)? * system.p(n, t)?;
    }
    Ok(v)
}

/// `g_φ(·, x)` as a piecewise function.
pub fn kernel_ppe(system: &AdmissibleSystem, x: f64) -> Result<Ppe> {
    let mut f = system.odo.green_ppe(x);
    for n in 1..=system.odo.order {
        let c = system.analysis_of_green(n, x)?;
        if c != 0.0 {
            f = f.add(&system.p_ppe(n)?.scaled(-c));
        }
    }
    Ok(f)
}

/// Coefficients `c_n = ⟨f, φ_n⟩` of `proj_N f = Σ c_n p_n`.
pub fn proj_nullspace(system: &AdmissibleSystem, f: &Ppe) -> Result<Vec<f64>> {
    (1..=system.odo.order)
        .map(|n| system.apply_analysis(n, f))
        .collect()
}

pub fn integrate_ppe(f: &Ppe, interval: Interval) -> Result<f64> {
    f.integrate(interval.lo, interval.hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn odo(a: f64, n: usize) -> Odo {
        Odo::new(a, n).unwrap()
    }

    #[test]
    fn green_examples() {
        assert_eq!(green_eval(&odo(0.0, 1), 0.5), 1.0);
        assert_eq!(green_eval(&odo(0.0, 1), 0.0), 1.0);
        assert_eq!(green_eval(&odo(0.0, 2), -1.0), 0.0);
        let v = green_eval(&odo(1.0, 3), 2.0);
        assert!((v - 2.0 * 2f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn nullspace_examples() {
        assert_eq!(nullspace_eval(&odo(0.0, 2), 2, 0.0, 0.5).unwrap(), 0.5);
        assert_eq!(nullspace_eval(&odo(0.0, 3), 1, 0.0, -7.0).unwrap(), 1.0);
        assert_eq!(nullspace_eval(&odo(2.0, 3), 3, 1.0, 1.0).unwrap(), 0.0);
        assert!(matches!(
            nullspace_eval(&odo(0.0, 2), 3, 0.0, 0.0),
            Err(Error::IndexOutOfRange { index: 3, order: 2 })
        ));
        assert!(Odo::new(0.0, 0).is_err());
    }

    #[test]
    fn universal_n1_bump_is_already_biorthogonal() {
        let o = odo(0.0, 1);
        // unit-mass bump on [0,1]: 6 t (1 − t)
        let bump = Ppe::bump(0.0, 1.0, 1, 0).scaled(6.0);
        let sys =
            build_universal_system(&o, Interval::unit(), std::slice::from_ref(&bump), 0.0).unwrap();
        let Analysis::Profile(phi) = &sys.analysis()[0] else {
            panic!()
        };
        for &t in &[0.1, 0.5, 0.9] {
            assert!((phi.eval(t) - bump.eval(t)).abs() < 1e-14);
        }
        let one = o.nullspace_ppe(1, 0.0).unwrap();
        assert!((one.inner(phi).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn universal_n2_biorthogonality() {
        let o = odo(0.0, 2);
        let gens = vec![Ppe::bump(0.0, 1.0, 2, 0), Ppe::bump(0.0, 1.0, 3, 1)];
        let sys = build_universal_system(&o, Interval::unit(), &gens, 0.0).unwrap();
        let g = sys.biorthogonality().unwrap();
        assert!(g[(0, 1)].abs() < 1e-10);
        assert!((g[(1, 1)] - 1.0).abs() < 1e-10);
        assert!((g[(0, 0)] - 1.0).abs() < 1e-10);
        assert!(g[(1, 0)].abs() < 1e-10);
    }

    #[test]
    fn proportional_generators_are_singular() {
        let o = odo(0.0, 2);
        let b = Ppe::bump(0.0, 1.0, 2, 0);
        let gens = vec![b.clone(), b.scaled(3.0)];
        assert!(matches!(
            build_universal_system(&o, Interval::unit(), &gens, 0.0),
            Err(Error::SingularGram { .. })
        ));
    }

    #[test]
    fn localized_requires_inclusion() {
        let o = odo(0.0, 1);
        let gens = polynomial_bump_generators(&o, Interval::new(0.5, 1.5).unwrap(), 2);
        assert!(build_localized_system(
            &o,
            Interval::unit(),
            Interval::new(0.5, 1.5).unwrap(),
            &gens
        )
        .is_err());
    }

    #[test]
    fn fundamental_functionals() {
        // N = 1: left limit at K⁻
        let o = odo(0.0, 1);
        let sys = build_fundamental_system(&o, Interval::unit());
        let step = o.green_ppe(0.0);
        assert_eq!(sys.apply_analysis(1, &step).unwrap(), 0.0);
        let c = Ppe::term(f64::NEG_INFINITY, f64::INFINITY, 0.0, 0.0, vec![2.0]);
        assert_eq!(sys.apply_analysis(1, &c).unwrap(), 2.0);

        let o = odo(0.0, 2);
        let sys = build_fundamental_system(&o, Interval::unit());
        let t = Ppe::term(f64::NEG_INFINITY, f64::INFINITY, 0.0, 0.0, vec![0.0, 1.0]);
        assert_eq!(proj_nullspace(&sys, &t).unwrap(), vec![0.0, 1.0]);
        let relu = o.green_ppe(0.5);
        assert_eq!(proj_nullspace(&sys, &relu).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn fundamental_kernel_is_green() {
        let o = odo(0.0, 1);
        let sys = build_fundamental_system(&o, Interval::unit());
        assert_eq!(kernel_eval(&sys, 0.8, 0.5).unwrap(), 1.0);
        // left of K⁻ the correction is active
        let o = odo(0.5, 2);
        let sys = build_fundamental_system(&o, Interval::unit());
        let v = kernel_eval(&sys, -0.5, -0.3).unwrap();
        let direct = kernel_formula(&sys, -0.5, -0.3).unwrap();
        assert_eq!(v, direct);
        assert!(v != 0.0);
        // t ≥ K⁻ > x: the correction cancels the Green's function
        assert_eq!(kernel_eval(&sys, 0.5, -0.3).unwrap(), 0.0);
        assert!(kernel_formula(&sys, 0.5, -0.3).unwrap().abs() < 1e-12);
        let proj = proj_nullspace(&sys, &kernel_ppe(&sys, -0.3).unwrap()).unwrap();
        assert!(proj.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn universal_kernel_matches_definition() {
        let o = odo(0.0, 1);
        let bump = Ppe::bump(0.0, 1.0, 1, 0).scaled(6.0);
        let sys = build_universal_system(&o, Interval::unit(), &[bump], 0.0).unwrap();
        // x = −1 < t = −0.5 < φ⁻: outside the support
        assert_eq!(kernel_eval(&sys, -0.5, -1.0).unwrap(), 0.0);
        // 1 − ∫_{0.5}^1 6u(1−u) du = 1 − 0.5
        let v = kernel_eval(&sys, 2.0, 0.5).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
    }

    #[test]
    fn projection_examples() {
        let o = odo(0.3, 3);
        let gens = polynomial_bump_generators(&o, Interval::new(-0.5, 1.0).unwrap(), 3);
        let sys =
            build_universal_system(&o, Interval::new(-0.5, 1.0).unwrap(), &gens, 0.0).unwrap();
        for k in 1..=3 {
            let c = proj_nullspace(&sys, &sys.p_ppe(k).unwrap()).unwrap();
            for (i, ci) in c.iter().enumerate() {
                let e = if i + 1 == k { 1.0 } else { 0.0 };
                assert!((ci - e).abs() < 1e-10);
            }
        }
        assert_eq!(proj_nullspace(&sys, &Ppe::zero()).unwrap(), vec![0.0; 3]);
        let kx = kernel_ppe(&sys, 0.2).unwrap();
        assert!(proj_nullspace(&sys, &kx)
            .unwrap()
            .iter()
            .all(|c| c.abs() < 1e-9));
    }
}
