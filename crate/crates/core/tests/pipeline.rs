use tpspline::multidim::{multi_solve, MultiGrid, MultiOptions, MultiProblem};
use tpspline::render::{heatmap_svg, RenderOptions};
use tpspline::scenarios::{box_instance, dirac_instance};
use tpspline::solver::{solve, solve_traced, SolverOptions};
use tpspline::spline::SeminormVariant;
use tpspline::Error;

#[test]
fn box_problem_certifies() {
    let opts = SolverOptions::default();
    let p = box_instance(11, 8, &opts).unwrap();
    let r = solve(&p, &opts).unwrap();
    let c = r.certification.as_ref().unwrap();
    assert!(c.passed(), "{:?}", c.lines());
    assert!(r.spline.sparsity() <= 7);
    assert!((p.objective(&r.spline) - r.objective).abs() <= 1e-12 * r.objective.max(1.0));
}

#[test]
fn refinement_never_increases_the_objective() {
    let opts = SolverOptions::default();
    let p = dirac_instance(3, 10, &opts).unwrap();
    let (_, trace) = solve_traced(&p, &opts).unwrap();
    for w in trace.level_objectives.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9), "{:?}", trace.level_objectives);
    }
}

#[test]
fn solves_are_bitwise_deterministic() {
    let opts = SolverOptions::default();
    let p = dirac_instance(5, 9, &opts).unwrap();
    let a = solve(&p, &opts).unwrap();
    let b = solve(&p, &opts).unwrap();
    assert_eq!(a.spline, b.spline);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    let r = RenderOptions {
        resolution: 48,
        ..Default::default()
    };
    assert_eq!(heatmap_svg(&a.spline, &r), heatmap_svg(&b.spline, &r));
}

#[test]
fn two_dimensional_multi_pipeline_agrees() {
    let opts = SolverOptions::default();
    let p = box_instance(21, 6, &opts).unwrap();
    let two = solve(&p, &opts).unwrap();
    let mp = MultiProblem::from_problem(&p).unwrap();
    let grid = MultiGrid::uniform(2, &[opts.n1d, opts.n2d], opts.levels).unwrap();
    let multi = multi_solve(&mp, &grid, &MultiOptions::default()).unwrap();
    assert!((two.objective - multi.objective).abs() <= 1e-8);
    assert_eq!(
        multi.spline.seminorm(),
        two.spline.seminorm(SeminormVariant::Causal)
    );
}

#[test]
fn too_few_measurements_are_rejected() {
    let opts = SolverOptions::default();
    let mut p = dirac_instance(2, 6, &opts).unwrap();
    p.fwd.functionals.truncate(3);
    p.y.truncate(3);
    assert!(matches!(
        p.validate(),
        Err(Error::AssumptionFailure(_)) | Err(Error::RankDeficientNullBlock { .. })
    ));
}
