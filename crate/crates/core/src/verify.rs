//! Property suites with machine-readable verdict lines.

use std::time::Instant;

use rand::Rng;

use crate::error::{Error, Result};
use crate::measurements::{check_admissible, MeasurementFunctional, Rect, Violation};
use crate::multidim::{multi_solve, MultiGrid, MultiOptions, MultiProblem, MultiSpline};
use crate::odo::{
    build_fundamental_system, build_localized_system, build_universal_system, kernel_eval,
    kernel_formula, kernel_ppe, polynomial_bump_generators, proj_nullspace, AdmissibleSystem,
    Interval, Odo,
};
use crate::ppe::Ppe;
use crate::scenarios::{self, normal, random_spline, SplineShape};
use crate::solver::{brute_force_oracle, solve, solve_grid, GridSpec, SolverOptions};
use crate::spline::{
    Domain, Family, OperatorPair, SeminormVariant, TensorAtom, TensorSpline, TestFunction,
};

pub const SUITES: [&str; 10] = [
    "biorthogonality",
    "kernel",
    "innovation",
    "decomposition",
    "seminorm",
    "regularity",
    "representer",
    "oracle",
    "multidim",
    "admissibility",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            checks: Vec::new(),
        }
    }

    fn check(&mut self, label: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            label: label.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    /// `PASS|FAIL suite label detail`, one per check.
    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{} {} {} {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    self.name,
                    c.label,
                    c.detail
                )
            })
            .collect()
    }
}

/// Runs a named suite; `count` overrides the default instance count.
pub fn run_suite(name: &str, seed: u64, count: Option<usize>) -> Result<SuiteReport> {
    match name {
        "biorthogonality" => biorthogonality(seed, count.unwrap_or(24)),
        "kernel" => kernel(seed, count.unwrap_or(1000)),
        "innovation" => innovation(seed, count.unwrap_or(100)),
        "decomposition" => decomposition(seed, count.unwrap_or(20)),
        "seminorm" => seminorm(seed, count.unwrap_or(100)),
        "regularity" => regularity(seed, count.unwrap_or(20)),
        "representer" => representer(seed, count.unwrap_or(50)),
        "oracle" => oracle(seed, count.unwrap_or(20)),
        "multidim" => multidim(seed, count.unwrap_or(10)),
        "admissibility" => admissibility(),
        _ => Err(Error::InvalidArgument(format!(
            "unknown suite {name}; expected one of {}",
            SUITES.join(", ")
        ))),
    }
}

fn random_odo(r: &mut impl Rng, max_order: usize) -> Odo {
    let alpha = [0.0, 0.0, 0.7, -1.3, 2.1][r.random_range(0..5)];
    Odo::new(alpha, r.random_range(1..=max_order)).expect("valid operator")
}

/// One system of each constructed kind for `odo` on `k`.
pub fn system_family(odo: &Odo, k: Interval) -> Result<Vec<AdmissibleSystem>> {
    let inner = Interval::new(k.lo + 0.1 * k.width(), k.lo + 0.6 * k.width())?;
    let smooth = odo.order() + 1;
    Ok(vec![
        build_fundamental_system(odo, k),
        build_localized_system(
            odo,
            k,
            inner,
            &polynomial_bump_generators(odo, inner, smooth),
        )?,
        build_universal_system(
            odo,
            inner,
            &polynomial_bump_generators(odo, inner, smooth),
            0.5 * (k.lo + k.hi),
        )?,
    ])
}

fn biorthogonality(seed: u64, count: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("biorthogonality");
    let mut r = scenarios::rng(seed);
    let mut worst: f64 = 0.0;
    let mut systems = 0;
    for _ in 0..count {
        let odo = random_odo(&mut r, 4);
        let lo = r.random_range(-1.0..0.5);
        let k = Interval::new(lo, lo + r.random_range(0.5..2.0))?;
        for sys in system_family(&odo, k)? {
            let g = sys.biorthogonality()?;
            let n = odo.order();
            for i in 0..n {
                for j in 0..n {
                    let e = (g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs();
                    worst = worst.max(e);
                }
            }
            systems += 1;
        }
    }
    rep.check(
        "delta",
        worst <= 1e-10,
        format!("systems={systems} max_err={worst:e} tol=1e-10"),
    );
    Ok(rep)
}

fn kernel(seed: u64, probes: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("kernel");
    let mut r = scenarios::rng(seed);
    let k = Interval::unit();
    let (mut zero_bad, mut zero_formula, mut shift_bad, mut shift_formula, mut annihil) =
        (0, 0.0f64, 0, 0.0f64, 0.0f64);
    for _ in 0..probes {
        let odo = random_odo(&mut r, 4);
        let systems = system_family(&odo, k)?;
        // support zeros on the profile systems
        for sys in &systems[1..] {
            let s = sys.phi_support().expect("compact analysis");
            let t: f64 = r.random_range(-1.0..2.0);
            let x = if r.random_bool(0.5) {
                t.max(s.hi) + r.random_range(1e-6..1.0)
            } else {
                t.min(s.lo) - r.random_range(1e-6..1.0)
            };
            if kernel_eval(sys, t, x)? != 0.0 {
                zero_bad += 1;
            }
            zero_formula = zero_formula.max(kernel_formula(sys, t, x)?.abs());
        }
        // the fundamental kernel is the shifted Green's function
        let fund = &systems[0];
        let x = r.random_range(k.lo..k.hi + 0.5);
        let t = r.random_range(-1.0..2.0);
        if kernel_eval(fund, t, x)? != odo.green(t - x) {
            shift_bad += 1;
        }
        shift_formula = shift_formula.max((kernel_formula(fund, t, x)? - odo.green(t - x)).abs());
        // proj ∘ L_φ⁻¹ = 0
        for sys in &systems {
            let x = r.random_range(-0.5..1.5);
            for c in proj_nullspace(sys, &kernel_ppe(sys, x)?)? {
                annihil = annihil.max(c.abs());
            }
        }
    }
    rep.check(
        "support-zeros",
        zero_bad == 0 && zero_formula <= 1e-9,
        format!(
            "probes={} nonzero={zero_bad} formula_max={zero_formula:e}",
            2 * probes
        ),
    );
    rep.check(
        "fundamental-shift",
        shift_bad == 0 && shift_formula <= 1e-9,
        format!("probes={probes} mismatches={shift_bad} formula_max={shift_formula:e}"),
    );
    rep.check(
        "proj-annihilation",
        annihil <= 1e-9,
        format!("max={annihil:e} tol=1e-9"),
    );
    Ok(rep)
}

/// Random spline whose systems are fundamental, localized or universal.
pub fn random_general_spline(seed: u64) -> Result<TensorSpline> {
    let mut r = scenarios::rng(seed ^ 0x5eed);
    let (o1, o2) = (random_odo(&mut r, 3), random_odo(&mut r, 3));
    let shape = SplineShape {
        k: r.random_range(0..5),
        k1: r.random_range(0..4),
        k2: r.random_range(0..4),
        null: r.random_bool(0.7),
    };
    let s = random_spline(seed, o1, o2, Domain::unit(), shape)?;
    let pick = r.random_range(0..3);
    let k = Interval::unit();
    let s1 = system_family(&o1, k)?.swap_remove(pick);
    let s2 = system_family(&o2, k)?.swap_remove(pick);
    if pick == 2 {
        // universal systems are anchored mid-interval
        let atoms = s.atoms().to_vec();
        return TensorSpline::new(s1, s2, Domain::unit(), atoms);
    }
    s.with_systems(s1, s2)
}

fn random_bump(r: &mut impl Rng, order: usize) -> TestFunction {
    let lo = r.random_range(-0.3..0.7);
    let hi = lo + r.random_range(0.2..0.9);
    TestFunction::bump(lo, hi, order + r.random_range(0..2))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn innovation(seed: u64, count: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("innovation");
    let mut r = scenarios::rng(seed);
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for i in 0..count {
        let s = random_general_spline(seed.wrapping_mul(1000).wrapping_add(i as u64))?;
        let (o1, o2) = s.odos();
        let (sys1, sys2) = s.systems();
        let inn = s.innovation()?;
        for _ in 0..3 {
            let (p1, p2) = (
                random_bump(&mut r, o1.order()),
                random_bump(&mut r, o2.order()),
            );
            for op in OperatorPair::ALL {
                let weak = s.weak_action(&p1, &p2, op)?;
                let dirac = inn.pair(sys1, sys2, &p1.psi, &p2.psi, op)?;
                let e = (weak - dirac).abs() / weak.abs().max(dirac.abs()).max(1.0);
                worst = worst.max(e);
                if !close(weak, dirac, 1e-8) {
                    bad += 1;
                }
            }
        }
    }
    rep.check(
        "weak-equals-dirac",
        bad == 0,
        format!("splines={count} mismatches={bad} max_rel={worst:e} tol=1e-8"),
    );
    Ok(rep)
}

fn decomposition(seed: u64, count: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("decomposition");
    let mut r = scenarios::rng(seed);
    let (mut resum, mut cross, mut own_nonzero) = (0.0f64, 0.0f64, 0usize);
    let pairs = [
        (Family::GreenGreen, OperatorPair::FullFull),
        (Family::PolyGreen, OperatorPair::ProjFull),
        (Family::GreenPoly, OperatorPair::FullProj),
        (Family::PolyPoly, OperatorPair::ProjProj),
    ];
    for i in 0..count {
        let (o1, o2) = (random_odo(&mut r, 3), random_odo(&mut r, 3));
        let shape = SplineShape {
            k: 4,
            k1: 3,
            k2: 3,
            null: true,
        };
        let s = random_spline(
            seed.wrapping_mul(7919).wrapping_add(i as u64),
            o1,
            o2,
            Domain::unit(),
            shape,
        )?;
        let parts = s.decompose();
        for _ in 0..200 / count.max(1) + 1 {
            let (t1, t2) = (r.random_range(-0.5..1.5), r.random_range(-0.5..1.5));
            let sum: f64 = parts.iter().map(|p| p.eval(t1, t2)).sum();
            resum = resum.max((sum - s.eval(t1, t2)).abs());
        }
        let (p1, p2) = (
            random_bump(&mut r, o1.order()),
            random_bump(&mut r, o2.order()),
        );
        for (k, part) in parts.iter().enumerate() {
            for &(fam, op) in &pairs {
                if op == OperatorPair::ProjProj {
                    continue;
                }
                let v = part.weak_action(&p1, &p2, op)?;
                if fam == Family::ALL[k] {
                    own_nonzero += usize::from(v != 0.0);
                } else {
                    cross = cross.max(v.abs());
                }
            }
        }
    }
    rep.check("resum", resum <= 1e-12, format!("max={resum:e} tol=1e-12"));
    rep.check(
        "cross-annihilation",
        cross <= 1e-8,
        format!("max={cross:e} tol=1e-8 own_nonzero={own_nonzero}"),
    );
    Ok(rep)
}

/// Family-wise ℓ1 sums in seminorm order, for canonical splines with
/// distinct knots.
pub fn familywise_l1(s: &TensorSpline) -> f64 {
    let (o1, o2) = s.odos();
    let mut total: f64 = s
        .atoms()
        .iter()
        .filter_map(|a| match a {
            TensorAtom::TensorGreen { a, .. } => Some(a.abs()),
            _ => None,
        })
        .sum();
    for j in 1..=o1.order() {
        total += s
            .atoms()
            .iter()
            .filter_map(|a| match a {
                TensorAtom::PolyGreen { n, b, .. } if *n == j => Some(b.abs()),
                _ => None,
            })
            .sum::<f64>();
    }
    for j in 1..=o2.order() {
        total += s
            .atoms()
            .iter()
            .filter_map(|a| match a {
                TensorAtom::GreenPoly { n, c, .. } if *n == j => Some(c.abs()),
                _ => None,
            })
            .sum::<f64>();
    }
    total
}

fn seminorm(seed: u64, count: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("seminorm");
    let mut r = scenarios::rng(seed);
    let (mut l1_bad, mut null_bad, mut homog_bad, mut eval_err, mut increase) =
        (0, 0, 0, 0.0f64, 0);
    for i in 0..count {
        let (o1, o2) = (
            Odo::new(0.0, r.random_range(1..=3))?,
            Odo::new(
                [0.0, 0.5, -1.0][r.random_range(0..3)],
                r.random_range(1..=3),
            )?,
        );
        let shape = SplineShape {
            k: r.random_range(0..6),
            k1: r.random_range(0..4),
            k2: r.random_range(0..4),
            null: true,
        };
        let s = random_spline(
            seed.wrapping_mul(31).wrapping_add(i as u64),
            o1,
            o2,
            Domain::unit(),
            shape,
        )?;
        let sn = s.seminorm(SeminormVariant::Causal);
        if sn != familywise_l1(&s) {
            l1_bad += 1;
        }
        let null: Vec<TensorAtom> = s
            .atoms()
            .iter()
            .copied()
            .filter(|a| !a.is_penalized())
            .collect();
        if s.with_atoms(null)?.seminorm(SeminormVariant::Causal) != 0.0 {
            null_bad += 1;
        }
        for c in [-2.0, 0.5, 4.0, -0.25] {
            if s.scaled(c).seminorm(SeminormVariant::Causal) != c.abs() * sn {
                homog_bad += 1;
            }
        }
        // edge and outside knots, then canonicalize
        let mut atoms = s.atoms().to_vec();
        atoms.push(TensorAtom::TensorGreen {
            a: normal(&mut r),
            x1: 0.0,
            x2: r.random_range(0.0..1.0),
        });
        atoms.push(TensorAtom::TensorGreen {
            a: normal(&mut r),
            x1: 1.0,
            x2: r.random_range(0.0..1.0),
        });
        atoms.push(TensorAtom::PolyGreen {
            n: 1,
            b: normal(&mut r),
            y: -0.3,
        });
        atoms.push(TensorAtom::GreenPoly {
            n: 1,
            c: normal(&mut r),
            z: 0.0,
        });
        let raw = s.with_atoms(atoms)?;
        let canon = raw.canonicalize()?;
        for _ in 0..20 {
            let (t1, t2) = (r.random_range(1e-9..1.0), r.random_range(1e-9..1.0));
            eval_err = eval_err.max((raw.eval(t1, t2) - canon.eval(t1, t2)).abs());
        }
        if canon.seminorm(SeminormVariant::Causal)
            > raw.seminorm(SeminormVariant::Causal) * (1.0 + 1e-15)
        {
            increase += 1;
        }
    }
    rep.check(
        "familywise-l1",
        l1_bad == 0,
        format!("splines={count} mismatches={l1_bad}"),
    );
    rep.check(
        "null-space-zero",
        null_bad == 0,
        format!("mismatches={null_bad}"),
    );
    rep.check(
        "homogeneity",
        homog_bad == 0,
        format!("mismatches={homog_bad}"),
    );
    rep.check(
        "canonical-eval",
        eval_err <= 1e-12,
        format!("max={eval_err:e} tol=1e-12"),
    );
    rep.check(
        "canonical-no-increase",
        increase == 0,
        format!("increases={increase}"),
    );
    Ok(rep)
}

fn regularity(seed: u64, count: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("regularity");
    let d2 = Odo::derivative(2)?;
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for i in 0..count {
        let shape = SplineShape {
            k: 6,
            k1: 3,
            k2: 3,
            null: true,
        };
        let s = random_spline(
            seed.wrapping_mul(131).wrapping_add(i as u64),
            d2,
            d2,
            Domain::unit(),
            shape,
        )?;
        for a in 0..2 {
            for b in 0..2 {
                let p = s.regularity_probe(a, b, Domain::unit())?;
                if p.max_abs > 0.0 {
                    worst = worst.max(p.max_abs_refined / p.max_abs);
                }
                bad += usize::from(!p.bounded);
            }
        }
    }
    rep.check(
        "bounded-mixed-partials",
        bad == 0,
        format!("splines={count} unbounded={bad} worst_growth={worst:.6}"),
    );
    Ok(rep)
}

/// The two example configurations and their data-count ranges.
pub fn representer_configs() -> Vec<(&'static str, bool, Vec<usize>)> {
    vec![
        ("DxD-boxes", false, (4..=12).collect()),
        ("D2xD2-diracs", true, (6..=16).collect()),
    ]
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RepresenterTally {
    pub runs: usize,
    pub sparsity_fail: usize,
    pub localization_fail: usize,
    pub interior_fail: usize,
    pub gap_fail: usize,
    pub slow: usize,
    pub errors: usize,
    pub max_seconds: f64,
    pub max_gap: f64,
}

/// Runs `count` seeded instances of one configuration.
pub fn representer_config(
    seed: u64,
    diracs: bool,
    m: usize,
    count: usize,
    opts: &SolverOptions,
) -> RepresenterTally {
    let mut t = RepresenterTally::default();
    for i in 0..count {
        let inst_seed = seed
            .wrapping_mul(1_000_003)
            .wrapping_add((m * 1000 + i) as u64);
        let start = Instant::now();
        let res = if diracs {
            scenarios::dirac_instance(inst_seed, m, opts)
        } else {
            scenarios::box_instance(inst_seed, m, opts)
        }
        .and_then(|p| solve(&p, opts));
        let secs = start.elapsed().as_secs_f64();
        t.runs += 1;
        t.max_seconds = t.max_seconds.max(secs);
        t.slow += usize::from(secs > 10.0);
        match res {
            Ok(r) => {
                let c = r.certification.expect("certified");
                t.sparsity_fail += usize::from(!c.sparsity_ok);
                t.localization_fail += usize::from(!c.localization_ok());
                t.interior_fail += usize::from(!c.interior_ok());
                t.gap_fail += usize::from(!c.gap_ok);
                t.max_gap = t.max_gap.max(c.gap);
            }
            Err(_) => t.errors += 1,
        }
    }
    t
}

fn representer(seed: u64, count: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("representer");
    let opts = SolverOptions::default();
    for (name, diracs, ms) in representer_configs() {
        for m in ms {
            let t = representer_config(seed, diracs, m, count, &opts);
            let label = format!("{name}-M{m}");
            rep.check(
                format!("{label}-sparsity"),
                t.sparsity_fail == 0 && t.errors == 0,
                format!(
                    "runs={} fail={} errors={}",
                    t.runs, t.sparsity_fail, t.errors
                ),
            );
            rep.check(
                format!("{label}-localization"),
                t.localization_fail == 0 && t.interior_fail == 0 && t.errors == 0,
                format!(
                    "outside={} boundary={}",
                    t.localization_fail, t.interior_fail
                ),
            );
            rep.check(
                format!("{label}-gap"),
                t.gap_fail == 0 && t.errors == 0,
                format!("max_gap={:e}", t.max_gap),
            );
            rep.check(
                format!("{label}-runtime"),
                t.slow == 0,
                format!("max_seconds={:.3}", t.max_seconds),
            );
        }
    }
    Ok(rep)
}

/// Tiny instance for the exhaustive oracle: at most 7 functionals and a
/// 24-column dictionary.
pub fn tiny_instance(seed: u64) -> Result<(crate::solver::Problem, GridSpec)> {
    let mut r = scenarios::rng(seed);
    let m = r.random_range(4..=6);
    let opts = SolverOptions {
        n2d: 4,
        n1d: 4,
        levels: 0,
        ..SolverOptions::default()
    };
    let p = scenarios::random_instance(
        seed,
        Odo::derivative(1)?,
        m,
        false,
        r.random_range(0.05..0.5),
        &opts,
    )?;
    Ok((p, opts.grid(&Domain::unit())))
}

fn oracle(seed: u64, count: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("oracle");
    let mut worst: f64 = 0.0;
    for i in 0..count {
        let (p, grid) = tiny_instance(seed.wrapping_mul(977).wrapping_add(i as u64))?;
        let got = solve_grid(&p, &grid, 1e-10)?.objective;
        let best = brute_force_oracle(&p, &grid, 6)?;
        worst = worst.max((got - best).abs() / best.abs().max(1.0));
    }
    rep.check(
        "brute-force",
        worst <= 1e-6,
        format!("instances={count} max_rel={worst:e} tol=1e-6"),
    );
    Ok(rep)
}

fn multidim(seed: u64, count: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("multidim");
    let opts = SolverOptions::default();
    let (mut obj, mut sn_bad) = (0.0f64, 0);
    for i in 0..count {
        let p = scenarios::box_instance(
            seed.wrapping_mul(101).wrapping_add(i as u64),
            4 + i % 6,
            &opts,
        )?;
        let two = solve(&p, &opts)?;
        let mp = MultiProblem::from_problem(&p)?;
        let grid = MultiGrid::uniform(2, &[opts.n1d, opts.n2d], opts.levels)?;
        let multi = multi_solve(&mp, &grid, &MultiOptions::default())?;
        obj = obj.max((two.objective - multi.objective).abs());
        let as_multi = MultiSpline::from_tensor(&two.spline)?;
        if as_multi.seminorm() != two.spline.seminorm(SeminormVariant::Causal)
            || multi.spline.seminorm() != two.spline.seminorm(SeminormVariant::Causal)
        {
            sn_bad += 1;
        }
    }
    rep.check(
        "d2-objective",
        obj <= 1e-8,
        format!("instances={count} max_diff={obj:e} tol=1e-8"),
    );
    rep.check("d2-seminorm", sn_bad == 0, format!("mismatches={sn_bad}"));
    for m in 4..=10 {
        let (mut over, mut outside, mut errors) = (0, 0, 0);
        for i in 0..count {
            let s = seed.wrapping_mul(13).wrapping_add((m * 100 + i) as u64);
            match scenarios::multi_box_instance(s, 3, 1, m, 0.1, 3)
                .and_then(|(p, g)| multi_solve(&p, &g, &MultiOptions::default()))
            {
                Ok(r) => {
                    over += usize::from(r.sparsity_count > r.bound);
                    outside += usize::from(!r.contained);
                }
                Err(_) => errors += 1,
            }
        }
        rep.check(
            format!("d3-M{m}"),
            over == 0 && outside == 0 && errors == 0,
            format!("runs={count} over_bound={over} outside={outside} errors={errors}"),
        );
    }
    Ok(rep)
}

fn admissibility() -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("admissibility");
    let rect = Rect::new(0.1, 0.7, 0.2, 0.9)?;
    let funs = [
        MeasurementFunctional::dirac(0.4, 0.6),
        MeasurementFunctional::unit_box(rect),
        MeasurementFunctional::profile(Ppe::bump(0.1, 0.8, 2, 0), Ppe::bump(0.0, 0.5, 1, 1))?,
    ];
    let mut bad = Vec::new();
    for n1 in 1..=3 {
        for n2 in 1..=3 {
            let (o1, o2) = (Odo::derivative(n1)?, Odo::derivative(n2)?);
            for f in &funs {
                let got = check_admissible(f, &o1, &o2);
                let want = match f {
                    MeasurementFunctional::DiracSample { .. } if n1 == 1 => {
                        Err(Violation::DiracNeedsOrderTwo { axis: 1 })
                    }
                    MeasurementFunctional::DiracSample { .. } if n2 == 1 => {
                        Err(Violation::DiracNeedsOrderTwo { axis: 2 })
                    }
                    _ => Ok(()),
                };
                if got != want {
                    bad.push(format!("N=({n1},{n2}) {got:?}"));
                }
            }
        }
    }
    rep.check(
        "gate",
        bad.is_empty(),
        format!("cases=27 mismatches={bad:?}"),
    );
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suites_pass() {
        for name in [
            "biorthogonality",
            "kernel",
            "innovation",
            "decomposition",
            "seminorm",
            "admissibility",
        ] {
            let rep = run_suite(name, 1, Some(5)).unwrap();
            assert!(rep.passed(), "{:?}", rep.lines());
        }
    }

    #[test]
    fn unknown_suite() {
        assert!(run_suite("nope", 0, None).is_err());
    }
}
