//! Measurement functionals, the admissibility gate, forward-operator
//! assembly and the assumption report.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::odo::{AdmissibleSystem, Odo};
use crate::ppe::Ppe;
use crate::spline::{Domain, Factor, TensorAtom, TensorSpline};

/// Closed axis-aligned rectangle; may be degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 <= x1 && y0 <= y1) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rectangle needs finite x0 <= x1, y0 <= y1, got [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn inside(&self, d: &Domain) -> bool {
        d.k1.lo <= self.x0 && self.x1 <= d.k1.hi && d.k2.lo <= self.y0 && self.y1 <= d.k2.hi
    }
}

/// Why a functional is not in the predual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    DiracNeedsOrderTwo { axis: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DiracNeedsOrderTwo { axis } => {
                write!(f, "Dirac sampling needs operator order >= 2 on axis {axis}")
            }
        }
    }
}

/// One functional `ν_m`.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementFunctional {
    DiracSample {
        t1: f64,
        t2: f64,
    },
    /// `∫∫_rect f(t₁,t₂) w₁(t₁) w₂(t₂)`.
    SeparableBox {
        rect: Rect,
        weight1: Ppe,
        weight2: Ppe,
    },
    /// `∫∫ f(t₁,t₂) f₁(t₁) f₂(t₂)` with compactly supported profiles.
    SeparableProfile {
        f1: Ppe,
        f2: Ppe,
    },
}

/// One axis of a separable functional.
pub(crate) enum AxisFunctional<'a> {
    Point(f64),
    Window(f64, f64, &'a Ppe),
    Profile(&'a Ppe),
}

impl MeasurementFunctional {
    pub fn dirac(t1: f64, t2: f64) -> Self {
        Self::DiracSample { t1, t2 }
    }

    /// Unweighted box average over `rect` (weights ≡ 1).
    pub fn unit_box(rect: Rect) -> Self {
        let w1 = Ppe::indicator(rect.x0, rect.x1);
        let w2 = Ppe::indicator(rect.y0, rect.y1);
        Self::SeparableBox {
            rect,
            weight1: w1,
            weight2: w2,
        }
    }

    pub fn profile(f1: Ppe, f2: Ppe) -> Result<Self> {
        if !f1.is_compact() || !f2.is_compact() {
            return Err(Error::UnboundedSupport);
        }
        Ok(Self::SeparableProfile { f1, f2 })
    }

    /// Exact product of the one-dimensional supports.
    pub fn support(&self) -> Rect {
        match self {
            Self::DiracSample { t1, t2 } => Rect {
                x0: *t1,
                x1: *t1,
                y0: *t2,
                y1: *t2,
            },
            Self::SeparableBox { rect, .. } => *rect,
            Self::SeparableProfile { f1, f2 } => {
                let (x0, x1) = f1.support().unwrap_or((0.0, 0.0));
                let (y0, y1) = f2.support().unwrap_or((0.0, 0.0));
                Rect { x0, x1, y0, y1 }
            }
        }
    }

    fn axis(&self, axis: usize) -> AxisFunctional<'_> {
        match self {
            Self::DiracSample { t1, t2 } => {
                AxisFunctional::Point(if axis == 1 { *t1 } else { *t2 })
            }
            Self::SeparableBox {
                rect,
                weight1,
                weight2,
            } => {
                if axis == 1 {
                    AxisFunctional::Window(rect.x0, rect.x1, weight1)
                } else {
                    AxisFunctional::Window(rect.y0, rect.y1, weight2)
                }
            }
            Self::SeparableProfile { f1, f2 } => {
                AxisFunctional::Profile(if axis == 1 { f1 } else { f2 })
            }
        }
    }
}

/// Admissibility gate: Diracs need order at least two on both axes.
pub fn check_admissible(
    fun: &MeasurementFunctional,
    odo1: &Odo,
    odo2: &Odo,
) -> std::result::Result<(), Violation> {
    match fun {
        MeasurementFunctional::DiracSample { .. } => {
            if odo1.order() < 2 {
                Err(Violation::DiracNeedsOrderTwo { axis: 1 })
            } else if odo2.order() < 2 {
                Err(Violation::DiracNeedsOrderTwo { axis: 2 })
            } else {
                Ok(())
            }
        }
        MeasurementFunctional::SeparableBox { .. }
        | MeasurementFunctional::SeparableProfile { .. } => Ok(()),
    }
}

/// Value of one axis functional on a one-dimensional factor. Every
/// measurement of a separable atom is `w · factor₁ · factor₂` with this.
pub(crate) fn factor_value(
    fun: &MeasurementFunctional,
    axis: usize,
    sys: &AdmissibleSystem,
    f: Factor,
) -> f64 {
    axis_value(fun.axis(axis), sys, f)
}

pub(crate) fn axis_value(af: AxisFunctional<'_>, sys: &AdmissibleSystem, f: Factor) -> f64 {
    match af {
        AxisFunctional::Point(t) => f.eval(sys, t),
        AxisFunctional::Window(lo, hi, w) => f
            .to_ppe(sys)
            .mul(w)
            .integrate(lo, hi)
            .expect("bounded window"),
        AxisFunctional::Profile(p) => f.to_ppe(sys).inner(p).expect("compact profile"),
    }
}

/// `⟨f, ν⟩` in closed form.
pub fn measure(spline: &TensorSpline, fun: &MeasurementFunctional) -> f64 {
    let (s1, s2) = spline.systems();
    spline
        .atoms()
        .iter()
        .map(|atom| {
            let (w, f1, f2) = atom.factors();
            w * factor_value(fun, 1, s1, f1) * factor_value(fun, 2, s2, f2)
        })
        .fold(0.0, |acc, v| acc + v)
}

/// `M` functionals over a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOperator {
    pub functionals: Vec<MeasurementFunctional>,
    pub domain: Domain,
}

impl ForwardOperator {
    pub fn new(functionals: Vec<MeasurementFunctional>, domain: Domain) -> Self {
        Self {
            functionals,
            domain,
        }
    }

    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }

    /// First inadmissible functional, as an error.
    pub fn gate(&self, odo1: &Odo, odo2: &Odo) -> Result<()> {
        for (index, f) in self.functionals.iter().enumerate() {
            check_admissible(f, odo1, odo2)
                .map_err(|violation| Error::Inadmissible { index, violation })?;
        }
        Ok(())
    }

    pub fn measure_all(&self, spline: &TensorSpline) -> Vec<f64> {
        self.functionals
            .iter()
            .map(|f| measure(spline, f))
            .collect()
    }
}

/// Column of one atom: `measure(atom alone, ν_m)` for every `m`.
pub fn measure_atom_column(
    atom: &TensorAtom,
    fwd: &ForwardOperator,
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
) -> Vec<f64> {
    let (w, f1, f2) = atom.factors();
    fwd.functionals
        .iter()
        .map(|fun| 0.0 + w * factor_value(fun, 1, sys1, f1) * factor_value(fun, 2, sys2, f2))
        .collect()
}

/// `M × N₁N₂` block of null-space atoms, column `(n−1)·N₂ + (n'−1)`.
pub fn null_block(
    fwd: &ForwardOperator,
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
) -> DMatrix<f64> {
    let (n1, n2) = (sys1.odo().order(), sys2.odo().order());
    let mut b = DMatrix::zeros(fwd.len(), n1 * n2);
    for i in 1..=n1 {
        for j in 1..=n2 {
            let col = measure_atom_column(
                &TensorAtom::PolyPoly {
                    n1: i,
                    n2: j,
                    d: 1.0,
                },
                fwd,
                sys1,
                sys2,
            );
            for (m, v) in col.into_iter().enumerate() {
                b[(m, (i - 1) * n2 + (j - 1))] = v;
            }
        }
    }
    b
}

/// Numerical rank with singular values above `rel · σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel * max).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub null_rank: usize,
    pub null_expected: usize,
    pub injective: bool,
    /// Indices of functionals whose support leaves the rectangle.
    pub outside: Vec<usize>,
    pub admissibility: Vec<std::result::Result<(), Violation>>,
    pub probe_rank: usize,
    /// Full row rank on the probe dictionary; a sufficient heuristic.
    pub surjective: bool,
    pub weak_star: &'static str,
}

impl AssumptionReport {
    pub fn support_ok(&self) -> bool {
        self.outside.is_empty()
    }

    pub fn admissible(&self) -> bool {
        self.admissibility.iter().all(|r| r.is_ok())
    }

    pub fn passed(&self) -> bool {
        self.injective && self.support_ok() && self.admissible() && self.surjective
    }

    /// One verdict line per assumption.
    pub fn lines(&self) -> Vec<String> {
        let v = |b: bool| if b { "PASS" } else { "FAIL" };
        let bad: Vec<String> = self
            .admissibility
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.err().map(|e| format!("#{i}: {e}")))
            .collect();
        vec![
            format!(
                "injectivity {} (null block rank {} of {})",
                v(self.injective),
                self.null_rank,
                self.null_expected
            ),
            format!("support {} {:?}", v(self.support_ok()), self.outside),
            format!("admissibility {} {}", v(self.admissible()), bad.join("; ")),
            format!(
                "surjectivity {} (probe rank {}, heuristic)",
                v(self.surjective),
                self.probe_rank
            ),
            format!("weak*-continuity {}", self.weak_star),
        ]
    }
}

/// Side of the probe grid used for the surjectivity heuristic.
const PROBE: usize = 9;

pub fn check_assumptions(
    fwd: &ForwardOperator,
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
) -> AssumptionReport {
    let (odo1, odo2) = (sys1.odo(), sys2.odo());
    let admissibility: Vec<_> = fwd
        .functionals
        .iter()
        .map(|f| check_admissible(f, odo1, odo2))
        .collect();
    let outside = fwd
        .functionals
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.support().inside(&fwd.domain))
        .map(|(i, _)| i)
        .collect();
    let expected = odo1.order() * odo2.order();
    let all_ok = admissibility.iter().all(|r| r.is_ok());
    let (null_rank, probe_rank) = if all_ok && !fwd.is_empty() {
        let b = null_block(fwd, sys1, sys2);
        let d = fwd.domain;
        let knots = |k: crate::odo::Interval| -> Vec<f64> {
            (0..PROBE)
                .map(|i| k.lo + k.width() * i as f64 / PROBE as f64)
                .collect()
        };
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for &x1 in &knots(d.k1) {
            for &x2 in &knots(d.k2) {
                cols.push(measure_atom_column(
                    &TensorAtom::TensorGreen { a: 1.0, x1, x2 },
                    fwd,
                    sys1,
                    sys2,
                ));
            }
        }
        let mut probe = DMatrix::zeros(fwd.len(), cols.len() + b.ncols());
        for (j, c) in cols.iter().enumerate() {
            for (m, v) in c.iter().enumerate() {
                probe[(m, j)] = *v;
            }
        }
        for j in 0..b.ncols() {
            probe.set_column(cols.len() + j, &b.column(j));
        }
        (numerical_rank(&b, 1e-10), numerical_rank(&probe, 1e-10))
    } else {
        (0, 0)
    };
    AssumptionReport {
        null_rank,
        null_expected: expected,
        injective: null_rank == expected,
        outside,
        admissibility,
        probe_rank,
        surjective: probe_rank == fwd.len(),
        weak_star: "by construction",
    }
}
