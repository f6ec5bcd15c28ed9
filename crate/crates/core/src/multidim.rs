//! Splines on `[0,1]^D` for `D^N ⊗ … ⊗ D^N` (zero rate), their seminorm over
//! face measures, and the grid solver on generalized atom families.
//!
//! A face is a multi-index `n ∈ {0..N}^D` with `max(n) = N`. An atom lies on
//! the face with `n_d = N` on its Green axes and `n_d = k` on a `t^k/k!`
//! axis. For `D = 2` everything here agrees with the two-dimensional
//! modules: same column values, same column order, same summation order.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lasso::{self, LassoOptions, Projected};
use crate::measurements::{axis_value, numerical_rank, AxisFunctional, Violation};
use crate::odo::{build_fundamental_system, AdmissibleSystem, Interval, Odo};
use crate::ppe::Ppe;
use crate::spline::{Domain, Factor, TensorAtom, TensorSpline, KNOT_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MultiFactor {
    /// `t^n / n!`, `n < N`.
    Poly(usize),
    /// `(t − x)₊^{N−1} / (N−1)!`.
    Green(f64),
}

impl MultiFactor {
    fn to_factor(self) -> Factor {
        match self {
            MultiFactor::Poly(k) => Factor::Poly(k + 1),
            MultiFactor::Green(x) => Factor::Green(x),
        }
    }

    fn from_factor(f: Factor) -> Self {
        match f {
            Factor::Poly(n) => MultiFactor::Poly(n - 1),
            Factor::Green(x) => MultiFactor::Green(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiAtom {
    pub weight: f64,
    pub factors: Vec<MultiFactor>,
}

impl MultiAtom {
    pub fn new(weight: f64, factors: Vec<MultiFactor>) -> Self {
        Self { weight, factors }
    }

    pub fn is_pure_null(&self) -> bool {
        self.factors
            .iter()
            .all(|f| matches!(f, MultiFactor::Poly(_)))
    }

    /// Bit `d` set iff axis `d` carries a Green factor.
    pub fn mask(&self) -> u32 {
        self.factors
            .iter()
            .enumerate()
            .filter(|(_, f)| matches!(f, MultiFactor::Green(_)))
            .fold(0, |m, (d, _)| m | (1 << d))
    }

    pub fn face(&self, order: usize) -> Vec<usize> {
        self.factors
            .iter()
            .map(|f| match f {
                MultiFactor::Poly(k) => *k,
                MultiFactor::Green(_) => order,
            })
            .collect()
    }

    pub fn green_knots(&self) -> Vec<f64> {
        self.factors
            .iter()
            .filter_map(|f| match f {
                MultiFactor::Green(x) => Some(*x),
                MultiFactor::Poly(_) => None,
            })
            .collect()
    }

    fn same_site(&self, other: &MultiAtom) -> bool {
        self.factors
            .iter()
            .zip(&other.factors)
            .all(|(a, b)| match (a, b) {
                (MultiFactor::Poly(i), MultiFactor::Poly(j)) => i == j,
                (MultiFactor::Green(x), MultiFactor::Green(y)) => (x - y).abs() <= KNOT_TOL,
                _ => false,
            })
    }
}

/// The fundamental system of `D^N` on `[0, 1]`.
pub fn unit_system(order: usize) -> Result<AdmissibleSystem> {
    Ok(build_fundamental_system(
        &Odo::derivative(order)?,
        Interval::unit(),
    ))
}

/// Lexicographic index of a degree tuple, first axis most significant.
fn null_index(degrees: impl Iterator<Item = usize>, order: usize) -> usize {
    degrees.fold(0, |acc, k| acc * order + k)
}

fn degree_tuples(len: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..order).map(move |k| {
                    let mut u = t.clone();
                    u.push(k);
                    u
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiSpline {
    dim: usize,
    order: usize,
    atoms: Vec<MultiAtom>,
    null: Vec<f64>,
    sys: AdmissibleSystem,
}

impl MultiSpline {
    /// Atoms must have a Green factor and knots in `[0,1]`; `null` is the
    /// `N^D` coefficient tensor, lexicographic in the degrees.
    pub fn new(dim: usize, order: usize, atoms: Vec<MultiAtom>, null: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let sys = unit_system(order)?;
        let size = order
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::InvalidArgument("null space too large".into()))?;
        if null.len() != size {
            return Err(Error::InvalidArgument(format!(
                "null tensor has {} entries, expected {size}",
                null.len()
            )));
        }
        for a in &atoms {
            if a.factors.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "atom has {} factors in dimension {dim}",
                    a.factors.len()
                )));
            }
            if a.is_pure_null() {
                return Err(Error::InvalidArgument(
                    "pure polynomial atoms belong to the null tensor".into(),
                ));
            }
            for f in &a.factors {
                match *f {
                    MultiFactor::Poly(k) if k >= order => {
                        return Err(Error::IndexOutOfRange { index: k, order })
                    }
                    MultiFactor::Green(x) if !(0.0..=1.0).contains(&x) => {
                        return Err(Error::InvalidArgument(format!("knot {x} outside [0, 1]")))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self {
            dim,
            order,
            atoms,
            null,
            sys,
        })
    }

    pub fn zero(dim: usize, order: usize) -> Result<Self> {
        Self::new(dim, order, vec![], vec![0.0; order.pow(dim as u32)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn atoms(&self) -> &[MultiAtom] {
        &self.atoms
    }

    pub fn null(&self) -> &[f64] {
        &self.null
    }

    /// Number of atoms with at least one Green factor.
    pub fn sparsity(&self) -> usize {
        self.atoms.len()
    }

    fn factor_eval(&self, f: MultiFactor, t: f64) -> f64 {
        f.to_factor().eval(&self.sys, t)
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        assert_eq!(t.len(), self.dim, "point dimension");
        let atom_part = self.atoms.iter().map(|a| {
            a.factors
                .iter()
                .zip(t)
                .fold(a.weight, |v, (&f, &td)| v * self.factor_eval(f, td))
        });
        let null_part = degree_tuples(self.dim, self.order)
            .into_iter()
            .zip(&self.null)
            .map(|(deg, &c)| {
                deg.iter().zip(t).fold(c, |v, (&k, &td)| {
                    v * self.factor_eval(MultiFactor::Poly(k), td)
                })
            });
        atom_part.chain(null_part).sum()
    }

    /// Faces with `max(n) = N`, by number of Green axes (descending), then
    /// lexicographically.
    pub fn faces(dim: usize, order: usize) -> Vec<Vec<usize>> {
        let mut faces: Vec<Vec<usize>> = degree_tuples(dim, order + 1)
            .into_iter()
            .filter(|n| n.contains(&order))
            .collect();
        faces.sort_by(|a, b| {
            let g = |n: &Vec<usize>| n.iter().filter(|&&k| k == order).count();
            g(b).cmp(&g(a)).then(a.cmp(b))
        });
        faces
    }

    /// Sum of face-measure norms; atoms on one face with equal knots merge.
    pub fn seminorm(&self) -> f64 {
        let mut total: Option<f64> = None;
        for face in Self::faces(self.dim, self.order) {
            let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
            let mut sums: Vec<f64> = Vec::new();
            for a in self.atoms.iter().filter(|a| a.face(self.order) == face) {
                let key: Vec<u64> = a
                    .green_knots()
                    .iter()
                    .map(|x| (x + 0.0).to_bits())
                    .collect();
                match index.get(&key) {
                    Some(&i) => sums[i] += a.weight,
                    None => {
                        index.insert(key, sums.len());
                        sums.push(a.weight);
                    }
                }
            }
            let term: f64 = sums.iter().map(|w| w.abs()).sum();
            total = Some(match total {
                None => term,
                Some(t) => t + term,
            });
        }
        total.unwrap_or(0.0)
    }

    /// `Σ|w|` per face, in [`MultiSpline::faces`] order.
    pub fn face_weights(&self) -> Vec<(Vec<usize>, f64)> {
        Self::faces(self.dim, self.order)
            .into_iter()
            .map(|face| {
                let w = self
                    .atoms
                    .iter()
                    .filter(|a| a.face(self.order) == face)
                    .map(|a| a.weight.abs())
                    .sum();
                (face, w)
            })
            .collect()
    }

    /// Knots on the upper faces dropped, knots at zero turned into
    /// `t^{N−1}/(N−1)!`, duplicates merged.
    pub fn canonicalize(&self) -> Self {
        let top = self.order - 1;
        let mut null = self.null.clone();
        let mut out: Vec<MultiAtom> = Vec::new();
        'atoms: for a in &self.atoms {
            let mut factors = Vec::with_capacity(self.dim);
            for &f in &a.factors {
                match f {
                    MultiFactor::Green(x) if x >= 1.0 - KNOT_TOL => continue 'atoms,
                    MultiFactor::Green(x) if x <= KNOT_TOL => factors.push(MultiFactor::Poly(top)),
                    _ => factors.push(f),
                }
            }
            let atom = MultiAtom::new(a.weight, factors);
            if atom.is_pure_null() {
                let idx = null_index(atom.face(self.order).into_iter(), self.order);
                null[idx] += atom.weight;
            } else if let Some(e) = out.iter_mut().find(|e| e.same_site(&atom)) {
                e.weight += atom.weight;
            } else {
                out.push(atom);
            }
        }
        out.retain(|a| a.weight != 0.0);
        Self {
            atoms: out,
            null,
            ..self.clone()
        }
    }

    /// The same function as a two-dimensional spline on the unit square.
    pub fn to_tensor(&self) -> Result<TensorSpline> {
        if self.dim != 2 {
            return Err(Error::InvalidArgument(
                "only two-dimensional splines convert".into(),
            ));
        }
        let mut atoms: Vec<TensorAtom> = self
            .atoms
            .iter()
            .map(|a| {
                TensorAtom::from_factors(
                    a.weight,
                    a.factors[0].to_factor(),
                    a.factors[1].to_factor(),
                )
            })
            .collect();
        for (deg, &c) in degree_tuples(2, self.order).iter().zip(&self.null) {
            if c != 0.0 {
                atoms.push(TensorAtom::PolyPoly {
                    n1: deg[0] + 1,
                    n2: deg[1] + 1,
                    d: c,
                });
            }
        }
        TensorSpline::new(self.sys.clone(), self.sys.clone(), Domain::unit(), atoms)
    }

    /// Inverse of [`MultiSpline::to_tensor`]; needs zero rates, equal orders
    /// and the unit square.
    pub fn from_tensor(s: &TensorSpline) -> Result<Self> {
        let (o1, o2) = s.odos();
        if o1.alpha() != 0.0
            || o2.alpha() != 0.0
            || o1.order() != o2.order()
            || *s.domain() != Domain::unit()
        {
            return Err(Error::InvalidArgument(
                "needs D^N on both axes over the unit square".into(),
            ));
        }
        let order = o1.order();
        let mut null = vec![0.0; order * order];
        let mut atoms = Vec::new();
        for a in s.atoms() {
            let (w, f1, f2) = a.factors();
            match (f1, f2) {
                (Factor::Poly(i), Factor::Poly(j)) => null[(i - 1) * order + (j - 1)] += w,
                _ => atoms.push(MultiAtom::new(
                    w,
                    vec![MultiFactor::from_factor(f1), MultiFactor::from_factor(f2)],
                )),
            }
        }
        Self::new(2, order, atoms, null)
    }
}

/// Separable functionals on `[0,1]^D`.
#[derive(Debug, Clone, PartialEq)]
pub enum MultiFunctional {
    Dirac(Vec<f64>),
    /// Unit-weight box, one interval per axis.
    Box(Vec<(f64, f64)>),
}

impl MultiFunctional {
    pub fn dim(&self) -> usize {
        match self {
            MultiFunctional::Dirac(t) => t.len(),
            MultiFunctional::Box(r) => r.len(),
        }
    }

    fn inside(&self) -> bool {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        match self {
            MultiFunctional::Dirac(t) => t.iter().all(|&v| unit(v)),
            MultiFunctional::Box(r) => r.iter().all(|&(lo, hi)| lo <= hi && unit(lo) && unit(hi)),
        }
    }

    fn axis_value(&self, d: usize, sys: &AdmissibleSystem, f: MultiFactor) -> f64 {
        match self {
            MultiFunctional::Dirac(t) => {
                axis_value(AxisFunctional::Point(t[d]), sys, f.to_factor())
            }
            MultiFunctional::Box(r) => {
                let (lo, hi) = r[d];
                let w = Ppe::indicator(lo, hi);
                axis_value(AxisFunctional::Window(lo, hi, &w), sys, f.to_factor())
            }
        }
    }
}

pub fn multi_measure(spline: &MultiSpline, fun: &MultiFunctional) -> f64 {
    let sys = &spline.sys;
    let value = |w: f64, factors: &[MultiFactor]| {
        factors
            .iter()
            .enumerate()
            .fold(w, |v, (d, &f)| v * fun.axis_value(d, sys, f))
    };
    let nulls = degree_tuples(spline.dim, spline.order)
        .into_iter()
        .zip(&spline.null)
        .filter(|(_, c)| **c != 0.0)
        .map(|(deg, &c)| {
            value(
                c,
                &deg.into_iter().map(MultiFactor::Poly).collect::<Vec<_>>(),
            )
        });
    spline
        .atoms
        .iter()
        .map(|a| value(a.weight, &a.factors))
        .chain(nulls)
        .fold(0.0, |acc, v| acc + v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiProblem {
    pub dim: usize,
    pub order: usize,
    pub functionals: Vec<MultiFunctional>,
    pub y: Vec<f64>,
    pub lambda: f64,
}

impl MultiProblem {
    pub fn new(
        dim: usize,
        order: usize,
        functionals: Vec<MultiFunctional>,
        y: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if y.len() != functionals.len() {
            return Err(Error::InvalidArgument(format!(
                "{} data values for {} functionals",
                y.len(),
                functionals.len()
            )));
        }
        if dim == 0 || order == 0 {
            return Err(Error::InvalidArgument(
                "dimension and order must be positive".into(),
            ));
        }
        Ok(Self {
            dim,
            order,
            functionals,
            y,
            lambda,
        })
    }

    /// The same data as a two-dimensional problem; needs `D^N` on both axes
    /// over the unit square and point or unit-box functionals.
    pub fn from_problem(p: &crate::solver::Problem) -> Result<Self> {
        use crate::measurements::MeasurementFunctional as F;
        let (o1, o2) = (p.sys1.odo(), p.sys2.odo());
        if o1.alpha() != 0.0
            || o2.alpha() != 0.0
            || o1.order() != o2.order()
            || p.domain() != Domain::unit()
        {
            return Err(Error::InvalidArgument(
                "needs D^N on both axes over the unit square".into(),
            ));
        }
        let funs = p
            .fwd
            .functionals
            .iter()
            .map(|f| match f {
                F::DiracSample { t1, t2 } => Ok(MultiFunctional::Dirac(vec![*t1, *t2])),
                F::SeparableBox {
                    rect,
                    weight1,
                    weight2,
                } if *weight1 == Ppe::indicator(rect.x0, rect.x1)
                    && *weight2 == Ppe::indicator(rect.y0, rect.y1) =>
                {
                    Ok(MultiFunctional::Box(vec![
                        (rect.x0, rect.x1),
                        (rect.y0, rect.y1),
                    ]))
                }
                _ => Err(Error::InvalidArgument(
                    "only points and unit boxes convert".into(),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(2, o1.order(), funs, p.y.clone(), p.lambda)
    }

    pub fn null_dim(&self) -> usize {
        self.order.pow(self.dim as u32)
    }

    /// `M − N^D`.
    pub fn sparsity_bound(&self) -> usize {
        self.y.len().saturating_sub(self.null_dim())
    }

    /// Dimensions, containment, Dirac admissibility and null-block rank.
    pub fn validate(&self) -> Result<()> {
        for (index, f) in self.functionals.iter().enumerate() {
            if f.dim() != self.dim || !f.inside() {
                return Err(Error::InvalidArgument(format!(
                    "functional {index} is not a functional on [0,1]^{}",
                    self.dim
                )));
            }
            if matches!(f, MultiFunctional::Dirac(_)) && self.order < 2 {
                return Err(Error::Inadmissible {
                    index,
                    violation: Violation::DiracNeedsOrderTwo { axis: 1 },
                });
            }
        }
        if self.y.len() < self.null_dim() {
            return Err(Error::AssumptionFailure(format!(
                "{} functionals cannot determine a {}-dimensional null space",
                self.y.len(),
                self.null_dim()
            )));
        }
        let b = self.null_block()?;
        let rank = numerical_rank(&b, 1e-10);
        if rank < self.null_dim() {
            return Err(Error::RankDeficientNullBlock {
                rank,
                expected: self.null_dim(),
            });
        }
        Ok(())
    }

    pub fn null_block(&self) -> Result<DMatrix<f64>> {
        let atoms: Vec<MultiAtom> = degree_tuples(self.dim, self.order)
            .into_iter()
            .map(|deg| MultiAtom::new(1.0, deg.into_iter().map(MultiFactor::Poly).collect()))
            .collect();
        columns(self, &atoms)
    }

    pub fn objective(&self, spline: &MultiSpline) -> f64 {
        let fit: f64 = self
            .functionals
            .iter()
            .zip(&self.y)
            .map(|(f, y)| {
                let r = y - multi_measure(spline, f);
                r * r
            })
            .sum();
        0.5 * fit + self.lambda * spline.seminorm()
    }
}

/// Candidate knot tuples per Green-axis mask, shared by all faces with
/// that mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiGrid {
    pub dim: usize,
    /// `(mask, points)`; each point lists the Green-axis knots in axis order.
    pub sets: Vec<(u32, Vec<Vec<f64>>)>,
    pub levels: usize,
}

fn masks(dim: usize) -> Vec<u32> {
    let mut m: Vec<u32> = (1..(1u32 << dim)).collect();
    m.sort_by(|a, b| b.count_ones().cmp(&a.count_ones()).then(b.cmp(a)));
    m
}

fn linspace(n: usize) -> Vec<f64> {
    let k = Interval::unit();
    if n == 1 {
        return vec![0.5];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                k.hi
            } else {
                k.lo + k.width() * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

fn tensor_points(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

fn lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

impl MultiGrid {
    /// Per-axis point counts indexed by the number of Green axes minus one.
    pub fn default_sizes(dim: usize) -> Vec<usize> {
        match dim {
            1 => vec![65],
            2 => vec![65, 33],
            3 => vec![33, 17, 9],
            _ => {
                let mut s = vec![33, 17, 9, 5];
                s.resize(dim, 3);
                s
            }
        }
    }

    pub fn uniform(dim: usize, sizes: &[usize], levels: usize) -> Result<Self> {
        if sizes.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "{} grid sizes for dimension {dim}",
                sizes.len()
            )));
        }
        let sets = masks(dim)
            .into_iter()
            .map(|m| {
                let g = m.count_ones() as usize;
                let axis = linspace(sizes[g - 1]);
                (m, tensor_points(&vec![axis; g]))
            })
            .collect();
        Ok(Self { dim, sets, levels })
    }

    pub fn atoms(&self, order: usize) -> Vec<MultiAtom> {
        let mut out = Vec::new();
        for (mask, points) in &self.sets {
            let poly_axes = self.dim - mask.count_ones() as usize;
            for deg in degree_tuples(poly_axes, order) {
                for p in points {
                    let (mut gi, mut pi) = (p.iter(), deg.iter());
                    let factors = (0..self.dim)
                        .map(|d| {
                            if mask & (1 << d) != 0 {
                                MultiFactor::Green(*gi.next().expect("point length"))
                            } else {
                                MultiFactor::Poly(*pi.next().expect("degree length"))
                            }
                        })
                        .collect();
                    out.push(MultiAtom::new(1.0, factors));
                }
            }
        }
        out
    }

    fn normalized(mut self) -> Self {
        for (_, pts) in &mut self.sets {
            pts.sort_by(|a, b| lex(a, b));
            pts.dedup();
        }
        self
    }
}

fn columns(problem: &MultiProblem, atoms: &[MultiAtom]) -> Result<DMatrix<f64>> {
    let sys = unit_system(problem.order)?;
    // per-axis factor tables, Green knots deduplicated by bits
    let mut index: Vec<HashMap<u64, usize>> = vec![HashMap::new(); problem.dim];
    let mut factors: Vec<Vec<MultiFactor>> =
        vec![(0..problem.order).map(MultiFactor::Poly).collect(); problem.dim];
    let keys: Vec<Vec<usize>> = atoms
        .iter()
        .map(|a| {
            a.factors
                .iter()
                .enumerate()
                .map(|(d, &f)| match f {
                    MultiFactor::Poly(k) => k,
                    MultiFactor::Green(x) => {
                        *index[d].entry((x + 0.0).to_bits()).or_insert_with(|| {
                            factors[d].push(f);
                            factors[d].len() - 1
                        })
                    }
                })
                .collect()
        })
        .collect();
    let table = |fun: &MultiFunctional| -> Vec<Vec<f64>> {
        (0..problem.dim)
            .map(|d| {
                factors[d]
                    .iter()
                    .map(|&f| fun.axis_value(d, &sys, f))
                    .collect()
            })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let tables: Vec<Vec<Vec<f64>>> = {
        use rayon::prelude::*;
        problem.functionals.par_iter().map(table).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let tables: Vec<Vec<Vec<f64>>> = problem.functionals.iter().map(table).collect();
    Ok(DMatrix::from_fn(
        problem.functionals.len(),
        atoms.len(),
        |m, j| {
            let v = keys[j]
                .iter()
                .enumerate()
                .fold(atoms[j].weight, |v, (d, &i)| v * tables[m][d][i]);
            0.0 + v
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiDictionary {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub atoms: Vec<MultiAtom>,
}

pub fn multi_assemble(problem: &MultiProblem, grid: &MultiGrid) -> Result<MultiDictionary> {
    if grid.dim != problem.dim {
        return Err(Error::InvalidArgument("grid dimension mismatch".into()));
    }
    problem.validate()?;
    let atoms = grid.atoms(problem.order);
    Ok(MultiDictionary {
        a: columns(problem, &atoms)?,
        b: problem.null_block()?,
        atoms,
    })
}

pub fn multi_lambda_max(problem: &MultiProblem, grid: &MultiGrid) -> Result<f64> {
    let dict = multi_assemble(problem, grid)?;
    lasso::lambda_max(&dict.a, &dict.b, &DVector::from_column_slice(&problem.y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub levels: usize,
}

impl Default for MultiOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200_000,
            levels: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiSolveResult {
    /// Reduced and canonicalized.
    pub spline: MultiSpline,
    pub objective: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub raw_support: usize,
    pub sparsity_count: usize,
    pub bound: usize,
    /// Every knot in `[0,1]^D`.
    pub contained: bool,
    /// Every knot in the open cube; informational only.
    pub interior: bool,
    pub level_objectives: Vec<f64>,
    pub tol: f64,
}

impl MultiSolveResult {
    pub fn passed(&self) -> bool {
        self.sparsity_count <= self.bound && self.contained && self.duality_gap <= self.tol
    }
}

fn atom_key(a: &MultiAtom) -> Vec<u64> {
    a.factors
        .iter()
        .flat_map(|f| match f {
            MultiFactor::Poly(k) => [0, *k as u64],
            MultiFactor::Green(x) => [1, (x + 0.0).to_bits()],
        })
        .collect()
}

fn local_spacing(sorted: &[f64], k: f64) -> f64 {
    let h = sorted
        .iter()
        .map(|&c| (c - k).abs())
        .filter(|&d| d > KNOT_TOL)
        .fold(f64::INFINITY, f64::min);
    if h.is_finite() {
        h
    } else {
        0.0
    }
}

fn refine(grid: &MultiGrid, active: &[MultiAtom]) -> MultiGrid {
    if grid.levels == 0 || active.is_empty() {
        return grid.clone();
    }
    let mut out = grid.clone();
    for a in active {
        let mask = a.mask();
        let Some(pos) = grid.sets.iter().position(|(m, _)| *m == mask) else {
            continue;
        };
        let pts = &grid.sets[pos].1;
        let knots = a.green_knots();
        let per_axis: Vec<Vec<f64>> = knots
            .iter()
            .enumerate()
            .map(|(g, &k)| {
                let mut coords: Vec<f64> = pts.iter().map(|p| p[g]).collect();
                coords.sort_by(f64::total_cmp);
                coords.dedup();
                let h = local_spacing(&coords, k);
                [k - 0.5 * h, k, k + 0.5 * h]
                    .into_iter()
                    .filter(|v| (0.0..=1.0).contains(v))
                    .collect()
            })
            .collect();
        out.sets[pos].1.extend(tensor_points(&per_axis));
    }
    out.levels = grid.levels - 1;
    out.normalized()
}

fn spline_from(
    problem: &MultiProblem,
    atoms: &[MultiAtom],
    theta: &DVector<f64>,
    d: &DVector<f64>,
) -> Result<MultiSpline> {
    let kept = atoms
        .iter()
        .zip(theta.iter())
        .filter(|(_, w)| **w != 0.0)
        .map(|(a, &w)| MultiAtom::new(w, a.factors.clone()))
        .collect();
    MultiSpline::new(
        problem.dim,
        problem.order,
        kept,
        d.iter().copied().collect(),
    )
}

/// Assemble, solve, refine, reduce to at most `M − N^D` atoms, canonicalize
/// and check containment.
pub fn multi_solve(
    problem: &MultiProblem,
    grid: &MultiGrid,
    opts: &MultiOptions,
) -> Result<MultiSolveResult> {
    let lasso_opts = LassoOptions {
        tol: opts.tol,
        max_iter: opts.max_iter,
        ..LassoOptions::default()
    };
    let y = DVector::from_column_slice(&problem.y);
    let mut grid = MultiGrid {
        levels: opts.levels,
        ..grid.clone()
    };
    let mut warm: Option<Vec<(Vec<u64>, f64)>> = None;
    let mut trace = Vec::new();
    loop {
        let dict = multi_assemble(problem, &grid)?;
        let proj = Projected::new(&dict.a, &dict.b, &y)?;
        let start = warm.as_ref().map(|w| {
            let index: HashMap<Vec<u64>, usize> = dict
                .atoms
                .iter()
                .enumerate()
                .map(|(i, a)| (atom_key(a), i))
                .collect();
            let mut v = DVector::zeros(dict.atoms.len());
            for (k, x) in w {
                if let Some(&i) = index.get(k) {
                    v[i] += x;
                }
            }
            v
        });
        let sol = lasso::solve_projected(&proj, problem.lambda, lasso_opts, start.as_ref())?;
        trace.push(sol.objective);
        let active: Vec<MultiAtom> = dict
            .atoms
            .iter()
            .zip(sol.theta.iter())
            .filter(|(_, w)| **w != 0.0)
            .map(|(a, &w)| MultiAtom::new(w, a.factors.clone()))
            .collect();
        let next = refine(&grid, &active);
        if next != grid {
            warm = Some(active.iter().map(|a| (atom_key(a), a.weight)).collect());
            grid = next;
            continue;
        }
        // merge identical columns, then reduce
        let mut theta = sol.theta.clone();
        let mut first: HashMap<Vec<u64>, usize> = HashMap::new();
        for (i, a) in dict.atoms.iter().enumerate() {
            match first.get(&atom_key(a)) {
                Some(&j) if theta[i] != 0.0 => {
                    theta[j] += theta[i];
                    theta[i] = 0.0;
                }
                Some(_) => {}
                None => {
                    first.insert(atom_key(a), i);
                }
            }
        }
        let reduced = lasso::reduce_support(&proj, &theta, problem.sparsity_bound())?;
        let d = proj.recover_d(&reduced);
        let raw = spline_from(problem, &dict.atoms, &reduced, &d)?;
        let spline = raw.canonicalize();
        let contained = raw
            .atoms
            .iter()
            .flat_map(|a| a.green_knots())
            .all(|x| (0.0..=1.0).contains(&x));
        let interior = spline
            .atoms
            .iter()
            .flat_map(|a| a.green_knots())
            .all(|x| x > 0.0 && x < 1.0);
        return Ok(MultiSolveResult {
            objective: problem.objective(&spline),
            duality_gap: proj.gap(&reduced, problem.lambda),
            iterations: sol.iterations,
            raw_support: active.len(),
            sparsity_count: spline.sparsity(),
            bound: problem.sparsity_bound(),
            contained,
            interior,
            level_objectives: trace,
            tol: opts.tol,
            spline,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::SeminormVariant;

    fn g(x: f64) -> MultiFactor {
        MultiFactor::Green(x)
    }

    #[test]
    fn heaviside_product() {
        let s =
            MultiSpline::new(3, 1, vec![MultiAtom::new(1.0, vec![g(0.5); 3])], vec![0.0]).unwrap();
        assert_eq!(s.eval(&[1.0, 1.0, 1.0]), 1.0);
        assert_eq!(s.eval(&[1.0, 0.4, 1.0]), 0.0);
    }

    #[test]
    fn seminorm_examples() {
        let s = MultiSpline::new(
            3,
            2,
            vec![MultiAtom::new(-2.5, vec![g(0.1), g(0.2), g(0.3)])],
            vec![0.0; 8],
        )
        .unwrap();
        assert_eq!(s.seminorm(), 2.5);
        let mut null = vec![0.0; 8];
        null[3] = 4.0;
        assert_eq!(
            MultiSpline::new(3, 2, vec![], null).unwrap().seminorm(),
            0.0
        );
    }

    #[test]
    fn pure_polynomial_atoms_are_rejected() {
        let a = MultiAtom::new(1.0, vec![MultiFactor::Poly(0), MultiFactor::Poly(0)]);
        assert!(MultiSpline::new(2, 1, vec![a], vec![0.0]).is_err());
    }

    #[test]
    fn faces_count() {
        // (N+1)^D − N^D faces
        assert_eq!(MultiSpline::faces(3, 2).len(), 27 - 8);
        assert_eq!(
            MultiSpline::faces(2, 1),
            vec![vec![1, 1], vec![0, 1], vec![1, 0]]
        );
    }

    #[test]
    fn two_dimensional_agreement() {
        let atoms = vec![
            MultiAtom::new(1.5, vec![g(0.2), g(0.7)]),
            MultiAtom::new(-0.5, vec![MultiFactor::Poly(1), g(0.4)]),
            MultiAtom::new(0.25, vec![g(0.9), MultiFactor::Poly(0)]),
            MultiAtom::new(0.75, vec![g(0.2), g(0.7)]),
        ];
        let m = MultiSpline::new(2, 2, atoms, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let t = m.to_tensor().unwrap();
        for &(a, b) in &[(0.1, 0.3), (0.5, 0.9), (0.95, 0.75), (0.3, 0.3)] {
            assert!((m.eval(&[a, b]) - t.eval(a, b)).abs() <= 1e-12);
        }
        assert_eq!(m.seminorm(), t.seminorm(SeminormVariant::Causal));
        assert_eq!(MultiSpline::from_tensor(&t).unwrap(), m);
    }

    #[test]
    fn canonical_form_moves_zero_knots() {
        let atoms = vec![
            MultiAtom::new(1.0, vec![g(0.0), g(0.5)]),
            MultiAtom::new(2.0, vec![g(1.0), g(0.5)]),
            MultiAtom::new(3.0, vec![g(0.0), g(0.0)]),
        ];
        let c = MultiSpline::new(2, 1, atoms, vec![0.0])
            .unwrap()
            .canonicalize();
        assert_eq!(
            c.atoms(),
            &[MultiAtom::new(1.0, vec![MultiFactor::Poly(0), g(0.5)])]
        );
        assert_eq!(c.null(), &[3.0]);
    }

    #[test]
    fn large_lambda_gives_null_regression() {
        let funs = vec![
            MultiFunctional::Box(vec![(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)]),
            MultiFunctional::Box(vec![(0.0, 0.5), (0.2, 1.0), (0.0, 0.7)]),
            MultiFunctional::Box(vec![(0.3, 0.9), (0.1, 0.6), (0.4, 1.0)]),
        ];
        let mut p = MultiProblem::new(3, 1, funs, vec![1.0, 0.3, -0.2], 1.0).unwrap();
        let grid = MultiGrid::uniform(3, &[5, 3, 3], 0).unwrap();
        p.lambda = 2.0 * multi_lambda_max(&p, &grid).unwrap();
        let r = multi_solve(
            &p,
            &grid,
            &MultiOptions {
                levels: 0,
                ..MultiOptions::default()
            },
        )
        .unwrap();
        assert_eq!(r.sparsity_count, 0);
        assert!(r.passed());
    }

    #[test]
    fn dirac_needs_order_two() {
        let p = MultiProblem::new(
            2,
            1,
            vec![MultiFunctional::Dirac(vec![0.5, 0.5])],
            vec![1.0],
            1.0,
        )
        .unwrap();
        assert!(matches!(
            p.validate(),
            Err(Error::Inadmissible { index: 0, .. })
        ));
    }
}
