//! Seeded random instances: piecewise-constant box problems, piecewise-linear
//! sampling problems and random splines with every atom family.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::measurements::{ForwardOperator, MeasurementFunctional, Rect};
use crate::multidim::{multi_lambda_max, MultiFunctional, MultiGrid, MultiProblem};
use crate::odo::{build_fundamental_system, Odo};
use crate::solver::{assemble_dictionary, GridSpec, Problem, SolverOptions};
use crate::spline::{Domain, TensorAtom, TensorSpline};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform in the open interval, bounded away from the ends by `margin`.
fn inner(rng: &mut impl Rng, lo: f64, hi: f64, margin: f64) -> f64 {
    rng.random_range(lo + margin..hi - margin)
}

/// Random box with sides at least a tenth of the domain.
pub fn random_rect(rng: &mut impl Rng, domain: &Domain) -> Rect {
    let side = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        let w = hi - lo;
        let len = rng.random_range(0.1 * w..w);
        let start = rng.random_range(lo..hi - len);
        (start, (start + len).min(hi))
    };
    let mut r = ChaCha8Rng::seed_from_u64(rng.random());
    let (x0, x1) = side(&mut r, domain.k1.lo, domain.k1.hi);
    let (y0, y1) = side(&mut r, domain.k2.lo, domain.k2.hi);
    Rect::new(x0, x1, y0, y1).expect("ordered sides")
}

pub fn box_functionals(rng: &mut impl Rng, domain: &Domain, m: usize) -> ForwardOperator {
    let funs = (0..m)
        .map(|_| MeasurementFunctional::unit_box(random_rect(rng, domain)))
        .collect();
    ForwardOperator::new(funs, *domain)
}

pub fn dirac_functionals(rng: &mut impl Rng, domain: &Domain, m: usize) -> ForwardOperator {
    let funs = (0..m)
        .map(|_| {
            MeasurementFunctional::dirac(
                inner(rng, domain.k1.lo, domain.k1.hi, 0.02),
                inner(rng, domain.k2.lo, domain.k2.hi, 0.02),
            )
        })
        .collect();
    ForwardOperator::new(funs, *domain)
}

/// `λ_max` of the default grid dictionary; zero solutions above it.
pub fn grid_lambda_max(problem: &Problem, grid: &GridSpec) -> Result<f64> {
    let dict = assemble_dictionary(problem, grid)?;
    let y = nalgebra::DVector::from_column_slice(&problem.y);
    crate::lasso::lambda_max(&dict.a, &dict.b, &y)
}

/// Instance with standard-normal data and `λ = fraction·λ_max`.
/// Draws are repeated until the measurement assumptions hold.
pub fn random_instance(
    seed: u64,
    odo: Odo,
    m: usize,
    diracs: bool,
    fraction: f64,
    opts: &SolverOptions,
) -> Result<Problem> {
    let domain = Domain::unit();
    let mut r = rng(seed);
    loop {
        let fwd = if diracs {
            dirac_functionals(&mut r, &domain, m)
        } else {
            box_functionals(&mut r, &domain, m)
        };
        let y: Vec<f64> = (0..m).map(|_| normal(&mut r)).collect();
        let mut p = Problem::new(odo, odo, fwd, y, 1.0)?;
        if p.validate().is_err() {
            continue;
        }
        let lmax = grid_lambda_max(&p, &opts.grid(&domain))?;
        if !(lmax > 0.0) {
            continue;
        }
        p.lambda = fraction * lmax;
        return Ok(p);
    }
}

/// Piecewise-constant problem with `m` random boxes.
pub fn box_instance(seed: u64, m: usize, opts: &SolverOptions) -> Result<Problem> {
    random_instance(seed, Odo::derivative(1)?, m, false, 0.1, opts)
}

/// Piecewise-linear problem with `m` random point samples.
pub fn dirac_instance(seed: u64, m: usize, opts: &SolverOptions) -> Result<Problem> {
    random_instance(seed, Odo::derivative(2)?, m, true, 0.1, opts)
}

/// Random unit boxes in `[0,1]^D` with standard-normal data, default grid
/// sizes and `λ = fraction·λ_max`.
pub fn multi_box_instance(
    seed: u64,
    dim: usize,
    order: usize,
    m: usize,
    fraction: f64,
    levels: usize,
) -> Result<(MultiProblem, MultiGrid)> {
    let mut r = rng(seed);
    let grid = MultiGrid::uniform(dim, &MultiGrid::default_sizes(dim), levels)?;
    loop {
        let funs = (0..m)
            .map(|_| {
                MultiFunctional::Box(
                    (0..dim)
                        .map(|_| {
                            let len = r.random_range(0.1..1.0);
                            let start = r.random_range(0.0..1.0 - len);
                            (start, start + len)
                        })
                        .collect(),
                )
            })
            .collect();
        let y = (0..m).map(|_| normal(&mut r)).collect();
        let mut p = MultiProblem::new(dim, order, funs, y, 1.0)?;
        if p.validate().is_err() {
            continue;
        }
        let lmax = multi_lambda_max(&p, &grid)?;
        if !(lmax > 0.0) {
            continue;
        }
        p.lambda = fraction * lmax;
        return Ok((p, grid));
    }
}

/// Atom counts of a random spline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplineShape {
    pub k: usize,
    pub k1: usize,
    pub k2: usize,
    pub null: bool,
}

/// The piecewise-constant example with ten corners and five knots per axis.
pub const FIG1_SHAPE: SplineShape = SplineShape {
    k: 10,
    k1: 5,
    k2: 5,
    null: true,
};

/// Random fundamental-system spline with knots in the open rectangle and
/// standard-normal weights. Polynomial indices are drawn uniformly.
pub fn random_spline(
    seed: u64,
    odo1: Odo,
    odo2: Odo,
    domain: Domain,
    shape: SplineShape,
) -> Result<TensorSpline> {
    let mut r = rng(seed);
    let (n1, n2) = (odo1.order(), odo2.order());
    let (k1, k2) = (domain.k1, domain.k2);
    let mut atoms = Vec::new();
    for _ in 0..shape.k {
        atoms.push(TensorAtom::TensorGreen {
            a: normal(&mut r),
            x1: inner(&mut r, k1.lo, k1.hi, 0.0),
            x2: inner(&mut r, k2.lo, k2.hi, 0.0),
        });
    }
    for _ in 0..shape.k1 {
        atoms.push(TensorAtom::PolyGreen {
            n: r.random_range(1..=n1),
            b: normal(&mut r),
            y: inner(&mut r, k2.lo, k2.hi, 0.0),
        });
    }
    for _ in 0..shape.k2 {
        atoms.push(TensorAtom::GreenPoly {
            n: r.random_range(1..=n2),
            c: normal(&mut r),
            z: inner(&mut r, k1.lo, k1.hi, 0.0),
        });
    }
    if shape.null {
        for i in 1..=n1 {
            for j in 1..=n2 {
                atoms.push(TensorAtom::PolyPoly {
                    n1: i,
                    n2: j,
                    d: normal(&mut r),
                });
            }
        }
    }
    TensorSpline::new(
        build_fundamental_system(&odo1, k1),
        build_fundamental_system(&odo2, k2),
        domain,
        atoms,
    )
}

/// Piecewise-constant spline with ten corners and five knots per axis.
pub fn fig1_spline(seed: u64) -> Result<TensorSpline> {
    let d = Odo::derivative(1)?;
    random_spline(seed, d, d, Domain::unit(), FIG1_SHAPE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::Family;

    #[test]
    fn fig1_counts() {
        let s = fig1_spline(1).unwrap();
        let count = |f| s.atoms().iter().filter(|a| a.family() == f).count();
        assert_eq!(count(Family::GreenGreen), 10);
        assert_eq!(count(Family::PolyGreen), 5);
        assert_eq!(count(Family::GreenPoly), 5);
        assert_eq!(s.sparsity(), 20);
    }

    #[test]
    fn rects_stay_inside() {
        let mut r = rng(3);
        for _ in 0..200 {
            assert!(random_rect(&mut r, &Domain::unit()).inside(&Domain::unit()));
        }
    }

    #[test]
    fn seeds_are_deterministic() {
        let opts = SolverOptions::default();
        let a = box_instance(7, 5, &opts).unwrap();
        let b = box_instance(7, 5, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lambda.to_bits(), b.lambda.to_bits());
    }
}
