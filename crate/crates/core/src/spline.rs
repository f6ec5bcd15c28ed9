//! Tensor-product splines: four atom families over a rectangle, their
//! innovations, seminorms, canonical form and direct-sum decomposition.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::odo::{
    build_fundamental_system, exp_poly, green_of_order, green_sided, AdmissibleSystem, Interval,
    Odo, Side,
};
use crate::ppe::Ppe;

/// Merge tolerance for knots and boundary snapping.
pub const KNOT_TOL: f64 = 1e-12;

/// The rectangle `K₁ × K₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub k1: Interval,
    pub k2: Interval,
}

impl Domain {
    pub fn new(k1: Interval, k2: Interval) -> Self {
        Self { k1, k2 }
    }

    pub fn unit() -> Self {
        Self::new(Interval::unit(), Interval::unit())
    }

    pub fn contains(&self, t1: f64, t2: f64) -> bool {
        self.k1.contains(t1) && self.k2.contains(t2)
    }

    pub fn contains_open(&self, t1: f64, t2: f64) -> bool {
        self.k1.contains_open(t1) && self.k2.contains_open(t2)
    }
}

/// One factor of a separable atom along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factor {
    /// `g_L(· − knot)`.
    Green(f64),
    /// `p_n`.
    Poly(usize),
}

impl Factor {
    pub fn eval(&self, sys: &AdmissibleSystem, t: f64) -> f64 {
        let odo = sys.odo();
        match *self {
            Factor::Green(x) => odo.green(t - x),
            Factor::Poly(n) => exp_poly(odo.alpha(), n, t - sys.anchor()),
        }
    }

    pub fn to_ppe(&self, sys: &AdmissibleSystem) -> Ppe {
        match *self {
            Factor::Green(x) => sys.odo().green_ppe(x),
            Factor::Poly(n) => sys
                .p_ppe(n)
                .expect("null-space index validated on construction"),
        }
    }

    /// `((D − αI)^j f)(at)` with the requested one-sided limit.
    fn reduced_at(&self, sys: &AdmissibleSystem, j: usize, at: f64, side: Side) -> f64 {
        let odo = sys.odo();
        match *self {
            Factor::Green(x) => {
                if j >= odo.order() {
                    0.0
                } else {
                    green_sided(odo.alpha(), odo.order() - j, at - x, side)
                }
            }
            Factor::Poly(m) => {
                if j >= m {
                    0.0
                } else {
                    exp_poly(odo.alpha(), m - j, at - sys.anchor())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TensorAtom {
    TensorGreen { a: f64, x1: f64, x2: f64 },
    PolyGreen { n: usize, b: f64, y: f64 },
    GreenPoly { n: usize, c: f64, z: f64 },
    PolyPoly { n1: usize, n2: usize, d: f64 },
}

/// Atom family tags, in the order used by decompositions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    GreenGreen,
    PolyGreen,
    GreenPoly,
    PolyPoly,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::GreenGreen,
        Family::PolyGreen,
        Family::GreenPoly,
        Family::PolyPoly,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Family::GreenGreen => "green_green",
            Family::PolyGreen => "poly_green",
            Family::GreenPoly => "green_poly",
            Family::PolyPoly => "poly_poly",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.tag() == s)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl TensorAtom {
    pub fn family(&self) -> Family {
        match self {
            TensorAtom::TensorGreen { .. } => Family::GreenGreen,
            TensorAtom::PolyGreen { .. } => Family::PolyGreen,
            TensorAtom::GreenPoly { .. } => Family::GreenPoly,
            TensorAtom::PolyPoly { .. } => Family::PolyPoly,
        }
    }

    pub fn weight(&self) -> f64 {
        match *self {
            TensorAtom::TensorGreen { a, .. } => a,
            TensorAtom::PolyGreen { b, .. } => b,
            TensorAtom::GreenPoly { c, .. } => c,
            TensorAtom::PolyPoly { d, .. } => d,
        }
    }

    pub fn with_weight(&self, w: f64) -> Self {
        let mut out = *self;
        match &mut out {
            TensorAtom::TensorGreen { a, .. } => *a = w,
            TensorAtom::PolyGreen { b, .. } => *b = w,
            TensorAtom::GreenPoly { c, .. } => *c = w,
            TensorAtom::PolyPoly { d, .. } => *d = w,
        }
        out
    }

    pub fn factors(&self) -> (f64, Factor, Factor) {
        match *self {
            TensorAtom::TensorGreen { a, x1, x2 } => (a, Factor::Green(x1), Factor::Green(x2)),
            TensorAtom::PolyGreen { n, b, y } => (b, Factor::Poly(n), Factor::Green(y)),
            TensorAtom::GreenPoly { n, c, z } => (c, Factor::Green(z), Factor::Poly(n)),
            TensorAtom::PolyPoly { n1, n2, d } => (d, Factor::Poly(n1), Factor::Poly(n2)),
        }
    }

    pub fn from_factors(w: f64, f1: Factor, f2: Factor) -> Self {
        match (f1, f2) {
            (Factor::Green(x1), Factor::Green(x2)) => TensorAtom::TensorGreen { a: w, x1, x2 },
            (Factor::Poly(n), Factor::Green(y)) => TensorAtom::PolyGreen { n, b: w, y },
            (Factor::Green(z), Factor::Poly(n)) => TensorAtom::GreenPoly { n, c: w, z },
            (Factor::Poly(n1), Factor::Poly(n2)) => TensorAtom::PolyPoly { n1, n2, d: w },
        }
    }

    /// Knot coordinates on axis 1 and axis 2, when present.
    pub fn knots(&self) -> (Option<f64>, Option<f64>) {
        let (_, f1, f2) = self.factors();
        let k = |f: Factor| match f {
            Factor::Green(x) => Some(x),
            Factor::Poly(_) => None,
        };
        (k(f1), k(f2))
    }

    pub fn is_penalized(&self) -> bool {
        !matches!(self, TensorAtom::PolyPoly { .. })
    }

    pub fn eval(&self, sys1: &AdmissibleSystem, sys2: &AdmissibleSystem, t1: f64, t2: f64) -> f64 {
        let (w, f1, f2) = self.factors();
        w * f1.eval(sys1, t1) * f2.eval(sys2, t2)
    }

    /// `family,n,n',weight,x1,x2` with 17 significant digits; absent fields
    /// are empty.
    pub fn to_record(&self) -> String {
        let (w, f1, f2) = self.factors();
        let idx = |f: Factor| match f {
            Factor::Poly(n) => n,
            Factor::Green(_) => 0,
        };
        let knot = |f: Factor| match f {
            Factor::Green(x) => fmt_real(x),
            Factor::Poly(_) => String::new(),
        };
        format!(
            "{},{},{},{},{},{}",
            self.family().tag(),
            idx(f1),
            idx(f2),
            fmt_real(w),
            knot(f1),
            knot(f2)
        )
    }

    pub fn from_record(record: &str) -> Result<Self> {
        let bad = |what: &str| Error::InvalidArgument(format!("atom record `{record}`: {what}"));
        let fields: Vec<&str> = record.trim().split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        let family = Family::from_tag(fields[0]).ok_or_else(|| bad("unknown family"))?;
        let index = |s: &str| s.parse::<usize>().map_err(|_| bad("bad index"));
        let real = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        let w = real(fields[3])?;
        let atom = match family {
            Family::GreenGreen => TensorAtom::TensorGreen {
                a: w,
                x1: real(fields[4])?,
                x2: real(fields[5])?,
            },
            Family::PolyGreen => TensorAtom::PolyGreen {
                n: index(fields[1])?,
                b: w,
                y: real(fields[5])?,
            },
            Family::GreenPoly => TensorAtom::GreenPoly {
                n: index(fields[2])?,
                c: w,
                z: real(fields[4])?,
            },
            Family::PolyPoly => TensorAtom::PolyPoly {
                n1: index(fields[1])?,
                n2: index(fields[2])?,
                d: w,
            },
        };
        Ok(atom)
    }
}

/// Shortest-exact scientific formatting with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Separable test function with its smoothness: `psi` is `C^{smoothness−1}`
/// with a piecewise `smoothness`-th derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub psi: Ppe,
    pub smoothness: usize,
}

impl TestFunction {
    pub fn new(psi: Ppe, smoothness: usize) -> Result<Self> {
        if !psi.is_compact() {
            return Err(Error::UnboundedSupport);
        }
        Ok(Self { psi, smoothness })
    }

    /// `(t − lo)^k (hi − t)^k`, which is `C^{k−1}`.
    pub fn bump(lo: f64, hi: f64, k: usize) -> Self {
        Self {
            psi: Ppe::bump(lo, hi, k, 0),
            smoothness: k,
        }
    }

    fn adjoint(&self, odo: &Odo) -> Result<Ppe> {
        if self.smoothness < odo.order() {
            return Err(Error::InsufficientSmoothness {
                have: self.smoothness,
                need: odo.order(),
            });
        }
        Ok(self.psi.apply_adjoint(odo.alpha(), odo.order()))
    }
}

/// Operator pairs of the direct-sum characterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorPair {
    /// `L₁ ⊗ L₂`
    FullFull,
    /// `proj ⊗ L₂`
    ProjFull,
    /// `L₁ ⊗ proj`
    FullProj,
    /// `proj ⊗ proj`
    ProjProj,
}

impl OperatorPair {
    pub const ALL: [OperatorPair; 4] = [
        OperatorPair::FullFull,
        OperatorPair::ProjFull,
        OperatorPair::FullProj,
        OperatorPair::ProjProj,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dirac2 {
    pub x1: f64,
    pub x2: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dirac1 {
    pub x: f64,
    pub weight: f64,
}

/// Discrete innovations of a spline under the three operator pairs plus the
/// null-space coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationTriple {
    pub full2d: Vec<Dirac2>,
    pub per_null1: Vec<Vec<Dirac1>>,
    pub per_null2: Vec<Vec<Dirac1>>,
    pub null_matrix: DMatrix<f64>,
}

impl InnovationTriple {
    /// `⟨innovation, ψ₁ ⊗ ψ₂⟩` for the given operator pair.
    pub fn pair(
        &self,
        sys1: &AdmissibleSystem,
        sys2: &AdmissibleSystem,
        psi1: &Ppe,
        psi2: &Ppe,
        op: OperatorPair,
    ) -> Result<f64> {
        let pp1 = null_moments(sys1, psi1)?;
        let pp2 = null_moments(sys2, psi2)?;
        Ok(match op {
            OperatorPair::FullFull => self
                .full2d
                .iter()
                .map(|d| d.weight * psi1.eval(d.x1) * psi2.eval(d.x2))
                .sum(),
            OperatorPair::ProjFull => self
                .per_null1
                .iter()
                .zip(&pp1)
                .map(|(list, m)| m * list.iter().map(|d| d.weight * psi2.eval(d.x)).sum::<f64>())
                .sum(),
            OperatorPair::FullProj => self
                .per_null2
                .iter()
                .zip(&pp2)
                .map(|(list, m)| m * list.iter().map(|d| d.weight * psi1.eval(d.x)).sum::<f64>())
                .sum(),
            OperatorPair::ProjProj => {
                let mut s = 0.0;
                for (i, a) in pp1.iter().enumerate() {
                    for (j, b) in pp2.iter().enumerate() {
                        s += self.null_matrix[(i, j)] * a * b;
                    }
                }
                s
            }
        })
    }

    /// Total variation of the four parts (Diracs merged by location).
    pub fn total_variation(&self) -> f64 {
        let mut s = merged_abs_sum(self.full2d.iter().map(|d| ((d.x1, d.x2), d.weight)));
        for list in self.per_null1.iter().chain(&self.per_null2) {
            s += merged_abs_sum(list.iter().map(|d| ((d.x, 0.0), d.weight)));
        }
        s + self.null_matrix.iter().map(|d| d.abs()).sum::<f64>()
    }
}

/// `⟨p_n, ψ⟩` for every `n`.
fn null_moments(sys: &AdmissibleSystem, psi: &Ppe) -> Result<Vec<f64>> {
    (1..=sys.odo().order())
        .map(|n| sys.p_ppe(n)?.inner(psi))
        .collect()
}

/// `Σ |Σ_{same location} w|`, accumulated in first-appearance order.
fn merged_abs_sum(items: impl Iterator<Item = ((f64, f64), f64)>) -> f64 {
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut sums: Vec<f64> = Vec::new();
    for ((a, b), w) in items {
        // + 0.0 folds −0.0 onto 0.0
        let key = ((a + 0.0).to_bits(), (b + 0.0).to_bits());
        match index.get(&key) {
            Some(&i) => sums[i] += w,
            None => {
                index.insert(key, sums.len());
                sums.push(w);
            }
        }
    }
    sums.iter().map(|w| w.abs()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeminormVariant {
    /// Lower-left boundary terms with left limits.
    Causal,
    /// Both boundary edges per axis; right limits on the upper edges.
    Acausal,
}

/// Output of [`TensorSpline::regularity_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityReport {
    pub bounded: bool,
    pub max_abs: f64,
    pub max_abs_refined: f64,
}

/// Finite atom list over `K₁ × K₂` with attached admissible systems.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpline {
    sys1: AdmissibleSystem,
    sys2: AdmissibleSystem,
    domain: Domain,
    atoms: Vec<TensorAtom>,
}

impl TensorSpline {
    pub fn new(
        sys1: AdmissibleSystem,
        sys2: AdmissibleSystem,
        domain: Domain,
        atoms: Vec<TensorAtom>,
    ) -> Result<Self> {
        let (n1, n2) = (sys1.odo().order(), sys2.odo().order());
        for atom in &atoms {
            if !atom.weight().is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite weight in {atom:?}"
                )));
            }
            let (_, f1, f2) = atom.factors();
            for (f, order) in [(f1, n1), (f2, n2)] {
                match f {
                    Factor::Poly(n) if n == 0 || n > order => {
                        return Err(Error::IndexOutOfRange { index: n, order })
                    }
                    Factor::Green(x) if !x.is_finite() => {
                        return Err(Error::InvalidArgument(format!(
                            "non-finite knot in {atom:?}"
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self {
            sys1,
            sys2,
            domain,
            atoms,
        })
    }

    /// Spline with the fundamental systems of `domain` on both axes.
    pub fn fundamental(
        odo1: Odo,
        odo2: Odo,
        domain: Domain,
        atoms: Vec<TensorAtom>,
    ) -> Result<Self> {
        Self::new(
            build_fundamental_system(&odo1, domain.k1),
            build_fundamental_system(&odo2, domain.k2),
            domain,
            atoms,
        )
    }

    pub fn atoms(&self) -> &[TensorAtom] {
        &self.atoms
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn systems(&self) -> (&AdmissibleSystem, &AdmissibleSystem) {
        (&self.sys1, &self.sys2)
    }

    pub fn odos(&self) -> (Odo, Odo) {
        (*self.sys1.odo(), *self.sys2.odo())
    }

    /// Same atoms and domain under other systems; the basis anchors must
    /// agree so that the function itself is unchanged.
    pub fn with_systems(&self, sys1: AdmissibleSystem, sys2: AdmissibleSystem) -> Result<Self> {
        if sys1.odo() != self.sys1.odo()
            || sys2.odo() != self.sys2.odo()
            || sys1.anchor() != self.sys1.anchor()
            || sys2.anchor() != self.sys2.anchor()
        {
            return Err(Error::InvalidArgument(
                "replacement systems must share operators and null-space anchors".into(),
            ));
        }
        Self::new(sys1, sys2, self.domain, self.atoms.clone())
    }

    pub fn with_atoms(&self, atoms: Vec<TensorAtom>) -> Result<Self> {
        Self::new(self.sys1.clone(), self.sys2.clone(), self.domain, atoms)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| a.with_weight(s * a.weight()))
            .collect();
        Self {
            atoms,
            ..self.clone()
        }
    }

    pub fn eval(&self, t1: f64, t2: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.eval(&self.sys1, &self.sys2, t1, t2))
            .sum()
    }

    /// Number of penalized atoms.
    pub fn sparsity(&self) -> usize {
        self.atoms.iter().filter(|a| a.is_penalized()).count()
    }

    pub fn innovation(&self) -> Result<InnovationTriple> {
        let (n1, n2) = (self.sys1.odo().order(), self.sys2.odo().order());
        let mut full2d = Vec::new();
        let mut per_null1 = vec![Vec::new(); n1];
        let mut per_null2 = vec![Vec::new(); n2];
        let mut null_matrix = DMatrix::zeros(n1, n2);
        // ⟨f, φ_n⟩ per factor; for p_m this is δ_{nm}.
        let coeffs = |sys: &AdmissibleSystem, f: Factor| -> Result<Vec<f64>> {
            let order = sys.odo().order();
            match f {
                Factor::Green(x) => (1..=order).map(|n| sys.analysis_of_green(n, x)).collect(),
                Factor::Poly(m) => Ok((1..=order)
                    .map(|n| if n == m { 1.0 } else { 0.0 })
                    .collect()),
            }
        };
        for atom in &self.atoms {
            let (w, f1, f2) = atom.factors();
            let c1 = coeffs(&self.sys1, f1)?;
            let c2 = coeffs(&self.sys2, f2)?;
            if let (Factor::Green(x1), Factor::Green(x2)) = (f1, f2) {
                full2d.push(Dirac2 { x1, x2, weight: w });
            }
            if let Factor::Green(x2) = f2 {
                for (n, c) in c1.iter().enumerate() {
                    if *c != 0.0 {
                        per_null1[n].push(Dirac1 {
                            x: x2,
                            weight: w * c,
                        });
                    }
                }
            }
            if let Factor::Green(x1) = f1 {
                for (n, c) in c2.iter().enumerate() {
                    if *c != 0.0 {
                        per_null2[n].push(Dirac1 {
                            x: x1,
                            weight: w * c,
                        });
                    }
                }
            }
            for (i, a) in c1.iter().enumerate() {
                for (j, b) in c2.iter().enumerate() {
                    if *a != 0.0 && *b != 0.0 {
                        null_matrix[(i, j)] += w * a * b;
                    }
                }
            }
        }
        Ok(InnovationTriple {
            full2d,
            per_null1,
            per_null2,
            null_matrix,
        })
    }

    /// `⟨Op{f}, ψ₁ ⊗ ψ₂⟩` with the operator moved onto the test function.
    pub fn weak_action(
        &self,
        psi1: &TestFunction,
        psi2: &TestFunction,
        op: OperatorPair,
    ) -> Result<f64> {
        let (full1, full2) = match op {
            OperatorPair::FullFull => (true, true),
            OperatorPair::ProjFull => (false, true),
            OperatorPair::FullProj => (true, false),
            OperatorPair::ProjProj => (false, false),
        };
        let side = |sys: &AdmissibleSystem, psi: &TestFunction, full: bool| -> Result<AxisAction> {
            if full {
                Ok(AxisAction::Adjoint(psi.adjoint(sys.odo())?))
            } else {
                Ok(AxisAction::Projection(null_moments(sys, &psi.psi)?))
            }
        };
        let a1 = side(&self.sys1, psi1, full1)?;
        let a2 = side(&self.sys2, psi2, full2)?;
        let mut total = 0.0;
        for atom in &self.atoms {
            let (w, f1, f2) = atom.factors();
            let v1 = a1.apply(&self.sys1, f1)?;
            let v2 = a2.apply(&self.sys2, f2)?;
            total += w * v1 * v2;
        }
        Ok(total)
    }

    /// Causal or acausal seminorm, evaluated on the innovation.
    ///
    /// Accumulates as: the 2D term, then each axis-1 boundary subtotal in
    /// order of `n`, then each axis-2 subtotal; on canonical splines this is
    /// exactly the family-wise ℓ1 sum taken in the same order.
    pub fn seminorm(&self, variant: SeminormVariant) -> f64 {
        let d = self.domain;
        let inside = self.atoms.iter().filter_map(|a| match *a {
            TensorAtom::TensorGreen { a, x1, x2 } if d.contains(x1, x2) => Some(((x1, x2), a)),
            _ => None,
        });
        let mut total = merged_abs_sum(inside);
        let mut edges = vec![(d.k1.lo, Side::Left, d.k2.lo, Side::Left)];
        if variant == SeminormVariant::Acausal {
            edges.push((d.k1.hi, Side::Right, d.k2.hi, Side::Right));
        }
        for &(e1, s1, _, _) in &edges {
            for j in 0..self.sys1.odo().order() {
                total += self.edge_term(Axis::One, j, e1, s1);
            }
        }
        for &(_, _, e2, s2) in &edges {
            for j in 0..self.sys2.odo().order() {
                total += self.edge_term(Axis::Two, j, e2, s2);
            }
        }
        total
    }

    /// `‖[(D−α)^j ⊗ L₂]{f}‖` on `{edge} × K₂` (or the mirrored axis-2 term).
    fn edge_term(&self, axis: Axis, j: usize, edge: f64, side: Side) -> f64 {
        let (sys_edge, range) = match axis {
            Axis::One => (&self.sys1, self.domain.k2),
            Axis::Two => (&self.sys2, self.domain.k1),
        };
        let items = self.atoms.iter().filter_map(|atom| {
            let (w, f1, f2) = atom.factors();
            let (fe, fo) = match axis {
                Axis::One => (f1, f2),
                Axis::Two => (f2, f1),
            };
            let Factor::Green(x) = fo else { return None };
            if !range.contains(x) {
                return None;
            }
            let h = fe.reduced_at(sys_edge, j, edge, side);
            (h != 0.0).then_some(((x, 0.0), w * h))
        });
        merged_abs_sum(items)
    }

    /// Norm of the innovation triple under the attached systems.
    pub fn full_norm(&self) -> Result<f64> {
        Ok(self.innovation()?.total_variation())
    }

    /// Canonical representative: `K⁻`-edge atoms converted to null-space
    /// factors, `K⁺`-edge atoms dropped, duplicates merged.
    ///
    /// Knots below `K⁻` are expanded in the null-space basis as well, which
    /// leaves values on the rectangle and the seminorm unchanged.
    pub fn canonicalize(&self) -> Result<Self> {
        if !self.sys1.is_fundamental() || !self.sys2.is_fundamental() {
            return Err(Error::NotFundamental);
        }
        let mut expanded: Vec<TensorAtom> = Vec::new();
        for atom in &self.atoms {
            let (w, f1, f2) = atom.factors();
            let Some(g1) = edge_expand(&self.sys1, self.domain.k1, f1) else {
                continue;
            };
            let Some(g2) = edge_expand(&self.sys2, self.domain.k2, f2) else {
                continue;
            };
            for &(c1, h1) in &g1 {
                for &(c2, h2) in &g2 {
                    expanded.push(TensorAtom::from_factors(w * c1 * c2, h1, h2));
                }
            }
        }
        Ok(Self {
            atoms: merge_atoms(&expanded),
            ..self.clone()
        })
    }

    /// Atoms split by family, in [`Family::ALL`] order.
    pub fn decompose(&self) -> [TensorSpline; 4] {
        Family::ALL.map(|fam| Self {
            atoms: self
                .atoms
                .iter()
                .copied()
                .filter(|a| a.family() == fam)
                .collect(),
            ..self.clone()
        })
    }

    /// Mixed central differences of order `(d1, d2)` on a 64×64 grid over
    /// `sample`, repeated on a 128×128 grid with half the step.
    pub fn regularity_probe(
        &self,
        d1: usize,
        d2: usize,
        sample: Domain,
    ) -> Result<RegularityReport> {
        let (n1, n2) = (self.sys1.odo().order(), self.sys2.odo().order());
        if d1 >= n1 || d2 >= n2 {
            return Err(Error::OrderTooHigh { d1, d2, n1, n2 });
        }
        let (mut knots1, mut knots2) = (Vec::new(), Vec::new());
        for atom in &self.atoms {
            let (k1, k2) = atom.knots();
            knots1.extend(k1);
            knots2.extend(k2);
        }
        let coarse = self.max_difference(d1, d2, &sample, 64, 1e-3, &knots1, &knots2);
        let fine = self.max_difference(d1, d2, &sample, 128, 5e-4, &knots1, &knots2);
        Ok(RegularityReport {
            bounded: coarse.is_finite()
                && fine.is_finite()
                && fine <= 2.0 * coarse.max(f64::MIN_POSITIVE),
            max_abs: coarse,
            max_abs_refined: fine,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn max_difference(
        &self,
        d1: usize,
        d2: usize,
        sample: &Domain,
        n: usize,
        h: f64,
        knots1: &[f64],
        knots2: &[f64],
    ) -> f64 {
        const NUDGE: f64 = 1e-4;
        let place = |i: usize, k: Interval, knots: &[f64]| {
            let t = k.lo + (i as f64 + 0.5) * k.width() / n as f64;
            if knots.iter().any(|&x| (x - t).abs() < NUDGE) {
                t + NUDGE
            } else {
                t
            }
        };
        let w1 = stencil(d1);
        let w2 = stencil(d2);
        let scale = h.powi(-((d1 + d2) as i32));
        let mut max = 0.0f64;
        for i in 0..n {
            let t1 = place(i, sample.k1, knots1);
            for j in 0..n {
                let t2 = place(j, sample.k2, knots2);
                let mut acc = 0.0;
                for (a, &c1) in w1.iter().enumerate() {
                    let s1 = t1 + (a as f64 - d1 as f64 / 2.0) * h;
                    for (b, &c2) in w2.iter().enumerate() {
                        let s2 = t2 + (b as f64 - d2 as f64 / 2.0) * h;
                        acc += c1 * c2 * self.eval(s1, s2);
                    }
                }
                max = max.max((acc * scale).abs());
            }
        }
        max
    }
}

/// Signed binomial weights of the order-`d` central difference.
fn stencil(d: usize) -> Vec<f64> {
    (0..=d)
        .map(|k| {
            let sign = if (d - k).is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * crate::ppe::binomial(d, k)
        })
        .collect()
}

#[derive(Clone, Copy)]
enum Axis {
    One,
    Two,
}

enum AxisAction {
    Adjoint(Ppe),
    Projection(Vec<f64>),
}

impl AxisAction {
    fn apply(&self, sys: &AdmissibleSystem, f: Factor) -> Result<f64> {
        match self {
            AxisAction::Adjoint(lpsi) => f.to_ppe(sys).inner(lpsi),
            AxisAction::Projection(moments) => {
                let fp = f.to_ppe(sys);
                let mut s = 0.0;
                for (n, m) in moments.iter().enumerate() {
                    s += sys.apply_analysis(n + 1, &fp)? * m;
                }
                Ok(s)
            }
        }
    }
}

/// Rewrites one factor on `K`: `None` drops the atom (knot at or above
/// `K⁺`), Green factors at or below `K⁻` become null-space combinations.
fn edge_expand(sys: &AdmissibleSystem, k: Interval, f: Factor) -> Option<Vec<(f64, Factor)>> {
    match f {
        Factor::Poly(_) => Some(vec![(1.0, f)]),
        Factor::Green(x) if x >= k.hi - KNOT_TOL => None,
        Factor::Green(x) if x <= k.lo + KNOT_TOL => {
            let odo = sys.odo();
            let order = odo.order();
            // g_N(t − x) = Σ_n g_{N−n+1}(K⁻ − x) p_n(t) for t ≥ K⁻ ≥ x
            let s = if x >= k.lo - KNOT_TOL { 0.0 } else { k.lo - x };
            Some(
                (1..=order)
                    .map(|n| {
                        (
                            green_of_order(odo.alpha(), order - n + 1, s),
                            Factor::Poly(n),
                        )
                    })
                    .filter(|(c, _)| *c != 0.0)
                    .collect(),
            )
        }
        Factor::Green(_) => Some(vec![(1.0, f)]),
    }
}

/// Sums atoms sharing family, indices and knots (within [`KNOT_TOL`]);
/// drops exact zeros. First-appearance order is kept.
pub fn merge_atoms(atoms: &[TensorAtom]) -> Vec<TensorAtom> {
    let mut out: Vec<TensorAtom> = Vec::with_capacity(atoms.len());
    for atom in atoms {
        if let Some(existing) = out.iter_mut().find(|e| same_site(e, atom)) {
            *existing = existing.with_weight(existing.weight() + atom.weight());
        } else {
            out.push(*atom);
        }
    }
    out.retain(|a| a.weight() != 0.0);
    out
}

fn same_site(a: &TensorAtom, b: &TensorAtom) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= KNOT_TOL;
    match (*a, *b) {
        (
            TensorAtom::TensorGreen { x1, x2, .. },
            TensorAtom::TensorGreen { x1: y1, x2: y2, .. },
        ) => close(x1, y1) && close(x2, y2),
        (TensorAtom::PolyGreen { n, y, .. }, TensorAtom::PolyGreen { n: m, y: z, .. }) => {
            n == m && close(y, z)
        }
        (TensorAtom::GreenPoly { n, z, .. }, TensorAtom::GreenPoly { n: m, z: y, .. }) => {
            n == m && close(z, y)
        }
        (TensorAtom::PolyPoly { n1, n2, .. }, TensorAtom::PolyPoly { n1: m1, n2: m2, .. }) => {
            n1 == m1 && n2 == m2
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{adaptive_with_breaks, AdaptiveOptions};

    fn dd(atoms: Vec<TensorAtom>) -> TensorSpline {
        let d = Odo::derivative(1).unwrap();
        TensorSpline::fundamental(d, d, Domain::unit(), atoms).unwrap()
    }

    fn d2d2(atoms: Vec<TensorAtom>) -> TensorSpline {
        let d = Odo::derivative(2).unwrap();
        TensorSpline::fundamental(d, d, Domain::unit(), atoms).unwrap()
    }

    #[test]
    fn eval_examples() {
        let s = dd(vec![TensorAtom::TensorGreen {
            a: 1.0,
            x1: 0.25,
            x2: 0.25,
        }]);
        assert_eq!(s.eval(0.5, 0.5), 1.0);
        assert_eq!(s.eval(0.1, 0.5), 0.0);
        let s = d2d2(vec![TensorAtom::TensorGreen {
            a: 2.0,
            x1: 0.0,
            x2: 0.0,
        }]);
        assert_eq!(s.eval(1.0, 3.0), 6.0);
    }

    #[test]
    fn innovation_examples() {
        let s = dd(vec![TensorAtom::TensorGreen {
            a: 2.0,
            x1: 0.3,
            x2: 0.7,
        }]);
        let inn = s.innovation().unwrap();
        assert_eq!(
            inn.full2d,
            vec![Dirac2 {
                x1: 0.3,
                x2: 0.7,
                weight: 2.0
            }]
        );
        assert!(inn.per_null1.iter().all(Vec::is_empty));
        assert!(inn.per_null2.iter().all(Vec::is_empty));

        let s = d2d2(vec![
            TensorAtom::PolyPoly {
                n1: 1,
                n2: 2,
                d: 3.0,
            },
            TensorAtom::PolyPoly {
                n1: 2,
                n2: 2,
                d: -1.0,
            },
        ]);
        let inn = s.innovation().unwrap();
        assert!(inn.full2d.is_empty());
        assert_eq!(inn.null_matrix[(0, 1)], 3.0);
        assert_eq!(inn.null_matrix[(1, 1)], -1.0);
        assert_eq!(inn.null_matrix[(0, 0)], 0.0);
    }

    #[test]
    fn weak_action_sifting() {
        let s = d2d2(vec![TensorAtom::TensorGreen {
            a: 1.0,
            x1: 0.3,
            x2: 0.6,
        }]);
        let p1 = TestFunction::bump(0.0, 1.0, 3);
        let p2 = TestFunction::bump(0.2, 0.9, 2);
        let v = s.weak_action(&p1, &p2, OperatorPair::FullFull).unwrap();
        let expect = p1.psi.eval(0.3) * p2.psi.eval(0.6);
        assert!((v - expect).abs() < 1e-12);
        let low = TestFunction::bump(0.0, 1.0, 1);
        assert_eq!(
            s.weak_action(&low, &p2, OperatorPair::FullFull),
            Err(Error::InsufficientSmoothness { have: 1, need: 2 })
        );
    }

    #[test]
    fn weak_action_against_quadrature() {
        // D⊗D: ⟨f, ψ₁' ψ₂'⟩ by nested adaptive quadrature
        let s = dd(vec![
            TensorAtom::TensorGreen {
                a: 0.7,
                x1: 0.2,
                x2: 0.4,
            },
            TensorAtom::PolyGreen {
                n: 1,
                b: -0.3,
                y: 0.55,
            },
            TensorAtom::GreenPoly {
                n: 1,
                c: 1.1,
                z: 0.8,
            },
        ]);
        let p1 = TestFunction::bump(0.1, 0.9, 2);
        let p2 = TestFunction::bump(0.3, 0.7, 2);
        let d1 = p1.psi.derivative();
        let d2 = p2.psi.derivative();
        let opts = AdaptiveOptions {
            abs_tol: 1e-13,
            max_depth: 40,
        };
        let inner = |t1: f64| {
            adaptive_with_breaks(
                |t2| s.eval(t1, t2) * d2.eval(t2),
                0.3,
                0.7,
                &[0.4, 0.55],
                opts,
            )
        };
        let oracle =
            adaptive_with_breaks(|t1| inner(t1) * d1.eval(t1), 0.1, 0.9, &[0.2, 0.8], opts);
        let v = s.weak_action(&p1, &p2, OperatorPair::FullFull).unwrap();
        assert!((v - oracle).abs() < 1e-8, "{v} vs {oracle}");
    }

    #[test]
    fn seminorm_examples() {
        let s = dd(vec![
            TensorAtom::TensorGreen {
                a: 1.0,
                x1: 0.2,
                x2: 0.3,
            },
            TensorAtom::TensorGreen {
                a: -2.0,
                x1: 0.6,
                x2: 0.5,
            },
            TensorAtom::PolyGreen {
                n: 1,
                b: 0.5,
                y: 0.4,
            },
            TensorAtom::PolyPoly {
                n1: 1,
                n2: 1,
                d: 9.0,
            },
        ]);
        assert_eq!(s.seminorm(SeminormVariant::Causal), 3.5);
        let p = dd(vec![TensorAtom::PolyPoly {
            n1: 1,
            n2: 1,
            d: 4.0,
        }]);
        assert_eq!(p.seminorm(SeminormVariant::Causal), 0.0);
        assert_eq!(s.scaled(-3.0).seminorm(SeminormVariant::Causal), 10.5);
    }

    #[test]
    fn acausal_adds_upper_edges() {
        // PolyGreen(1) is constant in t₁, so it also shows on {K₁⁺} × K₂
        let s = dd(vec![
            TensorAtom::TensorGreen {
                a: 1.0,
                x1: 0.2,
                x2: 0.3,
            },
            TensorAtom::PolyGreen {
                n: 1,
                b: 0.5,
                y: 0.4,
            },
        ]);
        // upper edge t₁ = 1: a at 0.3 and b at 0.4; upper edge t₂ = 1: a at 0.2
        assert_eq!(s.seminorm(SeminormVariant::Acausal), 1.5 + 1.5 + 1.0);
    }

    #[test]
    fn canonicalize_examples() {
        let s = dd(vec![TensorAtom::TensorGreen {
            a: 1.0,
            x1: 0.0,
            x2: 0.5,
        }]);
        let c = s.canonicalize().unwrap();
        assert_eq!(
            c.atoms(),
            &[TensorAtom::PolyGreen {
                n: 1,
                b: 1.0,
                y: 0.5
            }]
        );
        assert_eq!(c.seminorm(SeminormVariant::Causal), 1.0);
        assert_eq!(s.seminorm(SeminormVariant::Causal), 1.0);
        for &(t1, t2) in &[(0.3, 0.7), (0.9, 0.2), (0.5, 0.5)] {
            assert_eq!(c.eval(t1, t2), s.eval(t1, t2));
        }

        let s = dd(vec![TensorAtom::TensorGreen {
            a: 1.0,
            x1: 1.0,
            x2: 0.5,
        }]);
        assert!(s.canonicalize().unwrap().atoms().is_empty());

        let s = dd(vec![
            TensorAtom::TensorGreen {
                a: 1.0,
                x1: 0.3,
                x2: 0.5,
            },
            TensorAtom::PolyGreen {
                n: 1,
                b: 2.0,
                y: 0.1,
            },
        ]);
        assert_eq!(s.canonicalize().unwrap(), s);
    }

    #[test]
    fn canonicalize_corner_and_merge() {
        let s = d2d2(vec![
            TensorAtom::TensorGreen {
                a: 0.3,
                x1: 0.5,
                x2: 0.5,
            },
            TensorAtom::TensorGreen {
                a: 0.7,
                x1: 0.5,
                x2: 0.5,
            },
            TensorAtom::TensorGreen {
                a: 2.0,
                x1: 0.0,
                x2: 0.0,
            },
        ]);
        let c = s.canonicalize().unwrap();
        assert_eq!(
            c.atoms(),
            &[
                TensorAtom::TensorGreen {
                    a: 1.0,
                    x1: 0.5,
                    x2: 0.5
                },
                TensorAtom::PolyPoly {
                    n1: 2,
                    n2: 2,
                    d: 2.0
                },
            ]
        );
        assert!(c.seminorm(SeminormVariant::Causal) < s.seminorm(SeminormVariant::Causal));
    }

    #[test]
    fn canonicalize_needs_fundamental() {
        let o = Odo::derivative(1).unwrap();
        let gens = crate::odo::polynomial_bump_generators(&o, Interval::unit(), 1);
        let u = crate::odo::build_universal_system(&o, Interval::unit(), &gens, 0.0).unwrap();
        let s = TensorSpline::new(u.clone(), u, Domain::unit(), vec![]).unwrap();
        assert_eq!(s.canonicalize(), Err(Error::NotFundamental));
    }

    #[test]
    fn knots_below_the_domain_expand_into_the_null_space() {
        let s = d2d2(vec![TensorAtom::TensorGreen {
            a: 1.5,
            x1: -0.4,
            x2: 0.3,
        }]);
        let c = s.canonicalize().unwrap();
        assert_eq!(c.atoms().len(), 2);
        for &(t1, t2) in &[(0.1, 0.5), (0.7, 0.9), (0.5, 0.2)] {
            assert!((c.eval(t1, t2) - s.eval(t1, t2)).abs() < 1e-12);
        }
        let (a, b) = (
            s.seminorm(SeminormVariant::Causal),
            c.seminorm(SeminormVariant::Causal),
        );
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn decompose_partitions_families() {
        let s = dd(vec![
            TensorAtom::TensorGreen {
                a: 1.0,
                x1: 0.2,
                x2: 0.3,
            },
            TensorAtom::GreenPoly {
                n: 1,
                c: 0.5,
                z: 0.4,
            },
        ]);
        let parts = s.decompose();
        assert_eq!(parts[0].atoms().len(), 1);
        assert!(parts[1].atoms().is_empty());
        assert_eq!(parts[2].atoms().len(), 1);
        assert!(parts[3].atoms().is_empty());
    }

    #[test]
    fn regularity_examples() {
        let s = d2d2(vec![
            TensorAtom::TensorGreen {
                a: 1.0,
                x1: 0.3,
                x2: 0.6,
            },
            TensorAtom::PolyGreen {
                n: 2,
                b: -0.5,
                y: 0.45,
            },
        ]);
        let r = s.regularity_probe(1, 1, Domain::unit()).unwrap();
        assert!(r.bounded);
        assert!((r.max_abs - 0.5).abs() < 1e-6);
        let s = dd(vec![TensorAtom::TensorGreen {
            a: 1.0,
            x1: 0.3,
            x2: 0.6,
        }]);
        assert!(s.regularity_probe(0, 0, Domain::unit()).unwrap().bounded);
        assert_eq!(
            s.regularity_probe(1, 0, Domain::unit()),
            Err(Error::OrderTooHigh {
                d1: 1,
                d2: 0,
                n1: 1,
                n2: 1
            })
        );
    }

    #[test]
    fn records_round_trip() {
        let atoms = [
            TensorAtom::TensorGreen {
                a: 0.1,
                x1: 1.0 / 3.0,
                x2: -2.5e-7,
            },
            TensorAtom::PolyGreen {
                n: 2,
                b: -7.0,
                y: 0.123456789,
            },
            TensorAtom::GreenPoly {
                n: 1,
                c: 1e300,
                z: 0.0,
            },
            TensorAtom::PolyPoly {
                n1: 2,
                n2: 1,
                d: f64::MIN_POSITIVE,
            },
        ];
        for a in atoms {
            let r = a.to_record();
            assert_eq!(TensorAtom::from_record(&r).unwrap(), a, "{r}");
        }
        assert!(TensorAtom::from_record("green_green,0,0,1").is_err());
    }
}
