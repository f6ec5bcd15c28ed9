//! Grid discretization of the regularized inverse problem, duality-gap
//! certified solving, extreme-point reduction and certification.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lasso::{self, LassoOptions, Projected};
use crate::measurements::{
    check_assumptions, factor_value, ForwardOperator, MeasurementFunctional,
};
use crate::odo::{build_fundamental_system, AdmissibleSystem, Interval, Odo};
use crate::spline::{
    merge_atoms, Domain, Factor, SeminormVariant, TensorAtom, TensorSpline, KNOT_TOL,
};

/// Candidate knots.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Knots of `TensorGreen` candidates.
    pub grid2d: Vec<(f64, f64)>,
    /// Knots of `PolyGreen` candidates, shared across `n`.
    pub axis2: Vec<f64>,
    /// Knots of `GreenPoly` candidates, shared across `n'`.
    pub axis1: Vec<f64>,
    pub levels: usize,
}

fn linspace(k: Interval, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (k.lo + k.hi)];
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

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup();
}

impl GridSpec {
    /// `n2d × n2d` tensor grid plus `n1d`-point axis grids, all on the
    /// closed rectangle.
    pub fn uniform(domain: &Domain, n2d: usize, n1d: usize, levels: usize) -> Self {
        let g1 = linspace(domain.k1, n2d);
        let g2 = linspace(domain.k2, n2d);
        let grid2d = g1
            .iter()
            .flat_map(|&a| g2.iter().map(move |&b| (a, b)))
            .collect();
        Self {
            grid2d,
            axis2: linspace(domain.k2, n1d),
            axis1: linspace(domain.k1, n1d),
            levels,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.grid2d.is_empty() && self.axis1.is_empty() && self.axis2.is_empty()
    }

    fn normalized(mut self) -> Self {
        self.grid2d
            .sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        self.grid2d.dedup();
        sort_dedup(&mut self.axis1);
        sort_dedup(&mut self.axis2);
        self
    }
}

/// The regularized problem with quadratic fidelity and fundamental systems.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub y: Vec<f64>,
    pub fwd: ForwardOperator,
    pub lambda: f64,
    pub sys1: AdmissibleSystem,
    pub sys2: AdmissibleSystem,
}

impl Problem {
    pub fn new(
        odo1: Odo,
        odo2: Odo,
        fwd: ForwardOperator,
        y: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if y.len() != fwd.len() {
            return Err(Error::InvalidArgument(format!(
                "{} data values for {} functionals",
                y.len(),
                fwd.len()
            )));
        }
        let d = fwd.domain;
        Ok(Self {
            y,
            sys1: build_fundamental_system(&odo1, d.k1),
            sys2: build_fundamental_system(&odo2, d.k2),
            fwd,
            lambda,
        })
    }

    pub fn domain(&self) -> Domain {
        self.fwd.domain
    }

    pub fn orders(&self) -> (usize, usize) {
        (self.sys1.odo().order(), self.sys2.odo().order())
    }

    /// `M − N₁N₂`.
    pub fn sparsity_bound(&self) -> usize {
        let (n1, n2) = self.orders();
        self.y.len().saturating_sub(n1 * n2)
    }

    /// Admissibility, null-space injectivity, support inclusion and the
    /// surjectivity heuristic, as errors.
    pub fn validate(&self) -> Result<()> {
        self.fwd.gate(self.sys1.odo(), self.sys2.odo())?;
        let report = check_assumptions(&self.fwd, &self.sys1, &self.sys2);
        if !report.injective {
            return Err(Error::RankDeficientNullBlock {
                rank: report.null_rank,
                expected: report.null_expected,
            });
        }
        if !report.passed() {
            return Err(Error::AssumptionFailure(report.lines().join("; ")));
        }
        Ok(())
    }

    pub fn spline(&self, atoms: Vec<TensorAtom>) -> Result<TensorSpline> {
        TensorSpline::new(self.sys1.clone(), self.sys2.clone(), self.domain(), atoms)
    }

    /// `½‖y − ⟨f, ν⟩‖² + λ·seminorm(f)`.
    pub fn objective(&self, spline: &TensorSpline) -> f64 {
        let z = self.fwd.measure_all(spline);
        let fit: f64 = self.y.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * fit + self.lambda * spline.seminorm(SeminormVariant::Causal)
    }
}

/// Dictionary of unit-weight atoms: penalized columns `A`, null block `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub atoms: Vec<TensorAtom>,
}

struct FactorIndex {
    factors: Vec<Factor>,
    green: HashMap<u64, usize>,
}

impl FactorIndex {
    fn new(order: usize) -> Self {
        Self {
            factors: (1..=order).map(Factor::Poly).collect(),
            green: HashMap::new(),
        }
    }

    fn green(&mut self, x: f64) -> usize {
        let key = (x + 0.0).to_bits();
        *self.green.entry(key).or_insert_with(|| {
            self.factors.push(Factor::Green(x));
            self.factors.len() - 1
        })
    }

    fn index(&mut self, f: Factor) -> usize {
        match f {
            Factor::Poly(n) => n - 1,
            Factor::Green(x) => self.green(x),
        }
    }
}

fn tables(
    fwd: &ForwardOperator,
    axis: usize,
    sys: &AdmissibleSystem,
    factors: &[Factor],
) -> Vec<Vec<f64>> {
    let row = |fun: &MeasurementFunctional| -> Vec<f64> {
        factors
            .iter()
            .map(|&f| factor_value(fun, axis, sys, f))
            .collect()
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        fwd.functionals.par_iter().map(row).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        fwd.functionals.iter().map(row).collect()
    }
}

/// Unit-weight columns for an arbitrary atom list; each entry is bitwise
/// equal to `measure` on the corresponding single-atom spline.
pub fn atom_columns(
    atoms: &[TensorAtom],
    fwd: &ForwardOperator,
    sys1: &AdmissibleSystem,
    sys2: &AdmissibleSystem,
) -> DMatrix<f64> {
    let mut ix1 = FactorIndex::new(sys1.odo().order());
    let mut ix2 = FactorIndex::new(sys2.odo().order());
    let keys: Vec<(f64, usize, usize)> = atoms
        .iter()
        .map(|a| {
            let (w, f1, f2) = a.factors();
            (w, ix1.index(f1), ix2.index(f2))
        })
        .collect();
    let t1 = tables(fwd, 1, sys1, &ix1.factors);
    let t2 = tables(fwd, 2, sys2, &ix2.factors);
    DMatrix::from_fn(fwd.len(), atoms.len(), |m, j| {
        let (w, i1, i2) = keys[j];
        0.0 + w * t1[m][i1] * t2[m][i2]
    })
}

/// Atoms of the grid in column order: `TensorGreen`, then `PolyGreen` by
/// `n`, then `GreenPoly` by `n'`.
pub fn grid_atoms(grid: &GridSpec, n1: usize, n2: usize) -> Vec<TensorAtom> {
    let mut atoms: Vec<TensorAtom> = grid
        .grid2d
        .iter()
        .map(|&(x1, x2)| TensorAtom::TensorGreen { a: 1.0, x1, x2 })
        .collect();
    for n in 1..=n1 {
        atoms.extend(
            grid.axis2
                .iter()
                .map(|&y| TensorAtom::PolyGreen { n, b: 1.0, y }),
        );
    }
    for n in 1..=n2 {
        atoms.extend(
            grid.axis1
                .iter()
                .map(|&z| TensorAtom::GreenPoly { n, c: 1.0, z }),
        );
    }
    atoms
}

fn null_atoms(n1: usize, n2: usize) -> Vec<TensorAtom> {
    (1..=n1)
        .flat_map(|i| {
            (1..=n2).map(move |j| TensorAtom::PolyPoly {
                n1: i,
                n2: j,
                d: 1.0,
            })
        })
        .collect()
}

pub fn assemble_dictionary(problem: &Problem, grid: &GridSpec) -> Result<Dictionary> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty candidate grid".into()));
    }
    problem.fwd.gate(problem.sys1.odo(), problem.sys2.odo())?;
    let (n1, n2) = problem.orders();
    let atoms = grid_atoms(grid, n1, n2);
    let a = atom_columns(&atoms, &problem.fwd, &problem.sys1, &problem.sys2);
    let b = atom_columns(
        &null_atoms(n1, n2),
        &problem.fwd,
        &problem.sys1,
        &problem.sys2,
    );
    let rank = crate::measurements::numerical_rank(&b, 1e-10);
    if rank < n1 * n2 {
        return Err(Error::RankDeficientNullBlock {
            rank,
            expected: n1 * n2,
        });
    }
    Ok(Dictionary { a, b, atoms })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certification {
    pub sparsity_count: usize,
    pub bound: usize,
    pub sparsity_ok: bool,
    /// Atoms with a knot outside the closed rectangle.
    pub outside: Vec<TensorAtom>,
    /// Atoms of the canonical form not in the open interior.
    pub boundary: Vec<TensorAtom>,
    pub gap: f64,
    pub tol: f64,
    pub gap_ok: bool,
}

impl Certification {
    pub fn localization_ok(&self) -> bool {
        self.outside.is_empty()
    }

    pub fn interior_ok(&self) -> bool {
        self.boundary.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.sparsity_ok && self.localization_ok() && self.interior_ok() && self.gap_ok
    }

    pub fn lines(&self) -> Vec<String> {
        let v = |b: bool| if b { "PASS" } else { "FAIL" };
        vec![
            format!(
                "sparsity {} count={} bound={}",
                v(self.sparsity_ok),
                self.sparsity_count,
                self.bound
            ),
            format!(
                "localization {} {:?}",
                v(self.localization_ok()),
                self.outside
            ),
            format!("interior {} {:?}", v(self.interior_ok()), self.boundary),
            format!(
                "gap {} gap={:e} tol={:e}",
                v(self.gap_ok),
                self.gap,
                self.tol
            ),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub spline: TensorSpline,
    pub objective: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub certification: Option<Certification>,
    /// Grid of the last solve and the coefficients on its dictionary.
    pub grid: GridSpec,
    pub theta: Vec<f64>,
    pub d: Vec<f64>,
    /// Support size before reduction.
    pub raw_support: usize,
}

fn spline_from(
    problem: &Problem,
    atoms: &[TensorAtom],
    theta: &[f64],
    d: &[f64],
) -> Result<TensorSpline> {
    let (n1, n2) = problem.orders();
    let mut out: Vec<TensorAtom> = atoms
        .iter()
        .zip(theta)
        .filter(|(_, w)| **w != 0.0)
        .map(|(a, &w)| a.with_weight(w))
        .collect();
    out.extend(
        null_atoms(n1, n2)
            .into_iter()
            .zip(d)
            .filter(|(_, w)| **w != 0.0)
            .map(|(a, &w)| a.with_weight(w)),
    );
    problem.spline(out)
}

fn solve_on(
    problem: &Problem,
    grid: &GridSpec,
    opts: LassoOptions,
    warm: Option<&[(TensorAtom, f64)]>,
) -> Result<(Dictionary, Projected, lasso::LassoSolution)> {
    let dict = assemble_dictionary(problem, grid)?;
    let y = DVector::from_column_slice(&problem.y);
    let proj = Projected::new(&dict.a, &dict.b, &y)?;
    let warm_vec = warm.map(|w| {
        let index: HashMap<(u8, usize, u64, u64), usize> = dict
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (atom_key(a), i))
            .collect();
        let mut v = DVector::zeros(dict.atoms.len());
        for (a, x) in w {
            if let Some(&i) = index.get(&atom_key(a)) {
                v[i] += x;
            }
        }
        v
    });
    let sol = lasso::solve_projected(&proj, problem.lambda, opts, warm_vec.as_ref())?;
    Ok((dict, proj, sol))
}

fn atom_key(a: &TensorAtom) -> (u8, usize, u64, u64) {
    let (_, f1, f2) = a.factors();
    let part = |f: Factor| match f {
        Factor::Green(x) => (0usize, (x + 0.0).to_bits()),
        Factor::Poly(n) => (n, 0),
    };
    let (i1, k1) = part(f1);
    let (i2, k2) = part(f2);
    (a.family() as u8, i1 * 64 + i2, k1, k2)
}

/// Certified solve on a fixed grid (no reduction).
pub fn solve_grid(problem: &Problem, grid: &GridSpec, tol: f64) -> Result<SolveResult> {
    solve_grid_with(
        problem,
        grid,
        LassoOptions {
            tol,
            ..LassoOptions::default()
        },
        None,
    )
}

fn solve_grid_with(
    problem: &Problem,
    grid: &GridSpec,
    opts: LassoOptions,
    warm: Option<&[(TensorAtom, f64)]>,
) -> Result<SolveResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let (dict, _, sol) = solve_on(problem, grid, opts, warm)?;
    let theta: Vec<f64> = sol.theta.iter().copied().collect();
    let d: Vec<f64> = sol.d.iter().copied().collect();
    let spline = spline_from(problem, &dict.atoms, &theta, &d)?;
    Ok(SolveResult {
        raw_support: theta.iter().filter(|v| **v != 0.0).count(),
        spline,
        objective: sol.objective,
        duality_gap: sol.gap,
        iterations: sol.iterations,
        certification: None,
        grid: grid.clone(),
        theta,
        d,
    })
}

/// Moves to an extreme point with at most `M − N₁N₂` penalized atoms,
/// then canonicalizes.
pub fn reduce_to_extreme_point(result: &SolveResult, problem: &Problem) -> Result<SolveResult> {
    let dict = assemble_dictionary(problem, &result.grid)?;
    if dict.atoms.len() != result.theta.len() {
        return Err(Error::InvalidArgument(
            "coefficients do not match the result grid".into(),
        ));
    }
    let y = DVector::from_column_slice(&problem.y);
    let proj = Projected::new(&dict.a, &dict.b, &y)?;
    // merge identical columns into their first occurrence
    let mut theta = DVector::from_column_slice(&result.theta);
    let mut first: HashMap<(u8, usize, u64, u64), usize> = HashMap::new();
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
    let theta_v: Vec<f64> = reduced.iter().copied().collect();
    let d_v: Vec<f64> = d.iter().copied().collect();
    let raw = spline_from(problem, &dict.atoms, &theta_v, &d_v)?;
    let spline = raw.canonicalize()?;
    Ok(SolveResult {
        objective: problem.objective(&spline),
        duality_gap: proj.gap(&reduced, problem.lambda),
        iterations: result.iterations,
        certification: None,
        grid: result.grid.clone(),
        theta: theta_v,
        d: d_v,
        raw_support: result.raw_support,
        spline,
    })
}

/// Inserts half-spacing candidates around every active knot.
pub fn refine_grid(problem: &Problem, result: &SolveResult, grid: &GridSpec) -> GridSpec {
    if grid.levels == 0 {
        return grid.clone();
    }
    let dom = problem.domain();
    let mut xs1: Vec<f64> = grid.grid2d.iter().map(|p| p.0).collect();
    let mut xs2: Vec<f64> = grid.grid2d.iter().map(|p| p.1).collect();
    sort_dedup(&mut xs1);
    sort_dedup(&mut xs2);
    let around = |coords: &[f64], k: f64, range: Interval| -> Vec<f64> {
        let h = local_spacing(coords, k);
        [k - 0.5 * h, k, k + 0.5 * h]
            .into_iter()
            .filter(|&v| range.contains(v))
            .collect()
    };
    let mut out = grid.clone();
    let mut active = false;
    for atom in result.spline.atoms() {
        match *atom {
            TensorAtom::TensorGreen { x1, x2, .. } => {
                active = true;
                for a in around(&xs1, x1, dom.k1) {
                    for b in around(&xs2, x2, dom.k2) {
                        out.grid2d.push((a, b));
                    }
                }
            }
            TensorAtom::PolyGreen { y, .. } => {
                active = true;
                out.axis2.extend(around(&grid.axis2, y, dom.k2));
            }
            TensorAtom::GreenPoly { z, .. } => {
                active = true;
                out.axis1.extend(around(&grid.axis1, z, dom.k1));
            }
            TensorAtom::PolyPoly { .. } => {}
        }
    }
    if !active {
        return grid.clone();
    }
    out.levels = grid.levels - 1;
    out.normalized()
}

/// Distance from `k` to the nearest distinct coordinate.
fn local_spacing(sorted: &[f64], k: f64) -> f64 {
    let mut h = f64::INFINITY;
    for &c in sorted {
        let dist = (c - k).abs();
        if dist > KNOT_TOL && dist < h {
            h = dist;
        }
    }
    if h.is_finite() {
        h
    } else {
        0.0
    }
}

pub fn certify(result: &SolveResult, problem: &Problem, tol: f64) -> Result<Certification> {
    let dom = problem.domain();
    let spline = &result.spline;
    let outside = spline
        .atoms()
        .iter()
        .copied()
        .filter(|a| match a.knots() {
            (Some(x1), Some(x2)) => !dom.contains(x1, x2),
            (None, Some(y)) => !dom.k2.contains(y),
            (Some(z), None) => !dom.k1.contains(z),
            (None, None) => false,
        })
        .collect();
    let canonical = spline.canonicalize()?;
    let boundary = canonical
        .atoms()
        .iter()
        .copied()
        .filter(|a| match a.knots() {
            (Some(x1), Some(x2)) => !dom.contains_open(x1, x2),
            (None, Some(y)) => !dom.k2.contains_open(y),
            (Some(z), None) => !dom.k1.contains_open(z),
            (None, None) => false,
        })
        .collect();
    let count = canonical.sparsity();
    let bound = problem.sparsity_bound();
    Ok(Certification {
        sparsity_count: count,
        bound,
        sparsity_ok: count <= bound,
        outside,
        boundary,
        gap: result.duality_gap,
        tol,
        gap_ok: result.duality_gap <= tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub n2d: usize,
    pub n1d: usize,
    pub levels: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200_000,
            n2d: 33,
            n1d: 65,
            levels: 3,
        }
    }
}

impl SolverOptions {
    pub fn lasso(&self) -> LassoOptions {
        LassoOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            ..LassoOptions::default()
        }
    }

    pub fn grid(&self, domain: &Domain) -> GridSpec {
        GridSpec::uniform(domain, self.n2d, self.n1d, self.levels)
    }
}

/// Objective values of each grid level, for monotonicity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineTrace {
    pub level_objectives: Vec<f64>,
}

/// Assemble, solve, refine, reduce, canonicalize and certify.
pub fn solve(problem: &Problem, opts: &SolverOptions) -> Result<SolveResult> {
    solve_traced(problem, opts).map(|(r, _)| r)
}

pub fn solve_traced(
    problem: &Problem,
    opts: &SolverOptions,
) -> Result<(SolveResult, PipelineTrace)> {
    problem.validate()?;
    let mut grid = opts.grid(&problem.domain());
    let mut result = solve_grid_with(problem, &grid, opts.lasso(), None)?;
    let mut trace = vec![result.objective];
    while grid.levels > 0 {
        let next = refine_grid(problem, &result, &grid);
        if next == grid {
            break;
        }
        let warm: Vec<(TensorAtom, f64)> = result
            .spline
            .atoms()
            .iter()
            .filter(|a| a.is_penalized())
            .map(|a| (a.with_weight(1.0), a.weight()))
            .collect();
        grid = next;
        result = solve_grid_with(problem, &grid, opts.lasso(), Some(&warm))?;
        trace.push(result.objective);
    }
    let mut reduced = reduce_to_extreme_point(&result, problem)?;
    let cert = certify(&reduced, problem, opts.tol)?;
    reduced.certification = Some(cert);
    Ok((
        reduced,
        PipelineTrace {
            level_objectives: trace,
        },
    ))
}

/// Exhaustive optimum on the grid dictionary.
pub fn brute_force_oracle(problem: &Problem, grid: &GridSpec, max_support: usize) -> Result<f64> {
    let dict = assemble_dictionary(problem, grid)?;
    let y = DVector::from_column_slice(&problem.y);
    lasso::brute_force_oracle(&dict.a, &dict.b, &y, problem.lambda, max_support)
}

/// Merges duplicate knots of a result spline (used by callers that build
/// results by hand).
pub fn merged(spline: &TensorSpline) -> Result<TensorSpline> {
    spline.with_atoms(merge_atoms(spline.atoms()))
}
