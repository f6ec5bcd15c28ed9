//! `tpspline`: simulate, solve, render and verify tensor-product spline
//! problems.
//!
//! Exit codes: 0 success, 1 verify failure or bad input, 2 failed
//! assumptions, 3 no convergence, 4 failed certification, 64 usage error.

mod doc;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use doc::{DocError, Document, FunctionalDoc, ResultDoc, Truth};
use rand::Rng;
use tpspline::multidim::{
    multi_lambda_max, multi_measure, multi_solve, MultiGrid, MultiOptions, MultiProblem,
};
use tpspline::render::{decomposition_svg, heatmap_svg, RenderOptions, Window};
use tpspline::scenarios::{self, normal, SplineShape};
use tpspline::solver::{certify, solve, Problem, SolverOptions};
use tpspline::spline::{fmt_real, TensorSpline};
use tpspline::verify::{run_suite, SUITES};
use tpspline::Error;

#[derive(Parser, Debug)]
#[command(
    name = "tpspline",
    version,
    about = "Sparse tensor-product spline recovery from linear measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fill in random functionals, a ground truth and noisy data.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the document seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the grid pipeline and certify the result.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Initial grid as `n2d,n1d`.
        #[arg(long, value_parser = parse_grid)]
        grid: Option<(usize, usize)>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Heatmap and four-panel decomposition SVGs of a result or ground truth.
    Render {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Plot window `x0,x1,y0,y1`.
        #[arg(long, value_parser = parse_window, default_value = "-0.25,1.25,-0.25,1.25")]
        extended_window: Window,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
    },
    /// Run property suites and print verdict lines.
    Verify {
        /// Suite name or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Instances per suite (suite default when absent).
        #[arg(long)]
        count: Option<usize>,
    },
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a, b] => Ok((
            a.trim().parse().map_err(|_| format!("bad n2d `{a}`"))?,
            b.trim().parse().map_err(|_| format!("bad n1d `{b}`"))?,
        )),
        _ => Err("expected n2d,n1d".into()),
    }
}

fn parse_window(s: &str) -> Result<Window, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number `{p}`"))
        })
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        &[x0, x1, y0, y1] if x0 < x1 && y0 < y1 => Ok(Window { x0, x1, y0, y1 }),
        _ => Err("expected x0,x1,y0,y1 with x0 < x1 and y0 < y1".into()),
    }
}

/// A failed command with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<DocError> for Failure {
    fn from(e: DocError) -> Self {
        Self {
            code: 1,
            message: e.0,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 1,
            message: format!("io: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Inadmissible { .. }
            | Error::AssumptionFailure(_)
            | Error::RankDeficientNullBlock { .. } => 2,
            Error::NoConvergence { .. } | Error::NumericalStall { .. } => 3,
            _ => 1,
        };
        Self {
            code,
            message: format!("{e} ({e:?})"),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read_doc(path: &Path) -> Result<Document, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    })?;
    Ok(Document::parse(&text)?)
}

fn write(dir: &Path, name: &str, contents: &str) -> CmdResult {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    println!("wrote {}", dir.join(name).display());
    Ok(())
}

fn random_functionals(doc: &Document, r: &mut impl Rng) -> Result<Vec<FunctionalDoc>, Failure> {
    let Some(g) = &doc.generate else {
        return Ok(doc.functionals.clone());
    };
    let dim = doc.dim();
    let (lo, hi): (Vec<f64>, Vec<f64>) = if doc.multidim.is_some() {
        (vec![0.0; dim], vec![1.0; dim])
    } else {
        let d = doc.domain;
        (vec![d.k1[0], d.k2[0]], vec![d.k1[1], d.k2[1]])
    };
    let mut out = doc.functionals.clone();
    for _ in 0..g.count {
        out.push(match g.kind.as_str() {
            "box" => {
                let mut bounds = Vec::with_capacity(2 * dim);
                for d in 0..dim {
                    let w = hi[d] - lo[d];
                    let len = r.random_range(0.1 * w..w);
                    let start = r.random_range(lo[d]..hi[d] - len);
                    bounds.extend([start, start + len]);
                }
                FunctionalDoc::Box { bounds }
            }
            "dirac" => FunctionalDoc::Dirac {
                point: (0..dim)
                    .map(|d| {
                        let m = 0.02 * (hi[d] - lo[d]);
                        r.random_range(lo[d] + m..hi[d] - m)
                    })
                    .collect(),
            },
            other => {
                return Err(Failure {
                    code: 1,
                    message: format!("generate.kind `{other}`; expected box or dirac"),
                })
            }
        });
    }
    Ok(out)
}

fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> CmdResult {
    let mut doc = read_doc(config)?;
    if let Some(s) = seed {
        doc.seed = s;
    }
    let mut r = scenarios::rng(doc.seed);
    doc.functionals = random_functionals(&doc, &mut r)?;
    doc.generate = None;
    let truth = doc.truth.take().ok_or_else(|| Failure {
        code: 1,
        message: "simulate needs a [truth] section".into(),
    })?;
    let exact: Vec<f64> = if let Some(spec) = doc.multidim {
        if truth.random.is_some() {
            return Err(Failure {
                code: 1,
                message: "random ground truth is only available in two dimensions".into(),
            });
        }
        let s = doc::multi_spline(spec, &truth.atoms, &truth.null)?;
        doc.truth = Some(truth);
        doc.multi_functionals()
            .iter()
            .map(|f| multi_measure(&s, f))
            .collect()
    } else {
        let (o1, o2) = doc.odos()?;
        let domain = doc.domain()?;
        let spline = match truth.random {
            Some(sh) => {
                let shape = SplineShape {
                    k: sh.k,
                    k1: sh.k1,
                    k2: sh.k2,
                    null: sh.null,
                };
                scenarios::random_spline(r.random(), o1, o2, domain, shape)?
            }
            None => {
                TensorSpline::fundamental(o1, o2, domain, doc::atoms_from_records(&truth.atoms)?)?
            }
        };
        let fwd = doc.forward()?;
        fwd.gate(&o1, &o2)?;
        doc.truth = Some(Truth {
            atoms: doc::records(&spline),
            ..Truth::default()
        });
        fwd.measure_all(&spline)
    };
    doc.y = exact
        .iter()
        .map(|v| v + doc.sigma * normal(&mut r))
        .collect();
    write(out, "problem.toml", &doc.write())
}

fn lambda_for(
    doc: &Document,
    lambda_max: impl FnOnce() -> Result<f64, Error>,
) -> Result<f64, Failure> {
    match (doc.lambda, doc.lambda_fraction) {
        (Some(l), _) => Ok(l),
        (None, Some(f)) => Ok(f * lambda_max()?),
        (None, None) => Err(Failure {
            code: 1,
            message: "either lambda or lambda_fraction is required".into(),
        }),
    }
}

fn certification_report(lines: &[String]) -> String {
    let mut s = String::new();
    for l in lines {
        s.push_str(l);
        s.push('\n');
    }
    s
}

fn solve_cmd(
    config: &Path,
    out: &Path,
    grid: Option<(usize, usize)>,
    tol: Option<f64>,
) -> CmdResult {
    let mut doc = read_doc(config)?;
    if let Some((n2d, n1d)) = grid {
        doc.grid.n2d = n2d;
        doc.grid.n1d = n1d;
    }
    if let Some(t) = tol {
        doc.solver.tol = t;
    }
    if doc.y.len() != doc.functionals.len() {
        return Err(Failure {
            code: 1,
            message: format!(
                "{} data values for {} functionals; run simulate first",
                doc.y.len(),
                doc.functionals.len()
            ),
        });
    }
    let (result, csv) = match doc.multidim {
        Some(spec) => solve_multi(&mut doc, spec)?,
        None => solve_2d(&mut doc)?,
    };
    let passed = result.passed;
    let summary = certification_report(&result.verdicts);
    print!("{summary}");
    println!(
        "objective {} gap {} sparsity {} bound {}",
        fmt_real(result.objective),
        fmt_real(result.duality_gap),
        result.sparsity,
        result.bound
    );
    doc.result = Some(result);
    write(out, "result.toml", &doc.write())?;
    write(out, "certification.txt", &summary)?;
    if let Some(csv) = csv {
        write(out, "atoms.csv", &csv)?;
    }
    if passed {
        Ok(())
    } else {
        Err(Failure {
            code: 4,
            message: "certification failed".into(),
        })
    }
}

/// The result section plus the atom CSV when the solution is two-dimensional.
type Solved = (ResultDoc, Option<String>);

fn solve_2d(doc: &mut Document) -> Result<Solved, Failure> {
    let (o1, o2) = doc.odos()?;
    let fwd = doc.forward()?;
    let opts = SolverOptions {
        tol: doc.solver.tol,
        max_iter: doc.solver.max_iter,
        n2d: doc.grid.n2d,
        n1d: doc.grid.n1d,
        levels: doc.grid.levels,
    };
    let mut p = Problem::new(o1, o2, fwd, doc.y.clone(), 1.0)?;
    p.validate()?;
    p.lambda = lambda_for(doc, || {
        scenarios::grid_lambda_max(&p, &opts.grid(&p.domain()))
    })?;
    doc.lambda = Some(p.lambda);
    let r = solve(&p, &opts)?;
    let c = match doc.solver.certify_tol {
        Some(t) => certify(&r, &p, t)?,
        None => r.certification.clone().expect("solve certifies"),
    };
    let atoms = r
        .spline
        .atoms()
        .iter()
        .map(|a| a.to_record())
        .collect::<Vec<_>>();
    let csv = doc::atoms_csv(&r.spline);
    Ok((
        ResultDoc {
            objective: r.objective,
            duality_gap: r.duality_gap,
            iterations: r.iterations,
            sparsity: c.sparsity_count,
            bound: c.bound,
            passed: c.passed(),
            verdicts: c.lines(),
            atoms,
            null: Vec::new(),
        },
        Some(csv),
    ))
}

fn solve_multi(doc: &mut Document, spec: doc::MultiSpec) -> Result<Solved, Failure> {
    let mut p = MultiProblem::new(
        spec.dim,
        spec.order,
        doc.multi_functionals(),
        doc.y.clone(),
        1.0,
    )?;
    p.validate()?;
    let sizes = doc
        .grid
        .sizes
        .clone()
        .unwrap_or_else(|| MultiGrid::default_sizes(spec.dim));
    let grid = MultiGrid::uniform(spec.dim, &sizes, doc.grid.levels)?;
    p.lambda = lambda_for(doc, || multi_lambda_max(&p, &grid))?;
    doc.lambda = Some(p.lambda);
    let opts = MultiOptions {
        tol: doc.solver.tol,
        max_iter: doc.solver.max_iter,
        levels: doc.grid.levels,
    };
    let r = multi_solve(&p, &grid, &opts)?;
    let v = |b: bool| if b { "PASS" } else { "FAIL" };
    let tol = doc.solver.certify_tol.unwrap_or(r.tol);
    let gap_ok = r.duality_gap <= tol;
    let passed = r.sparsity_count <= r.bound && r.contained && gap_ok;
    let verdicts = vec![
        format!(
            "sparsity {} count={} bound={}",
            v(r.sparsity_count <= r.bound),
            r.sparsity_count,
            r.bound
        ),
        format!("localization {}", v(r.contained)),
        format!("interior {} (informational)", v(r.interior)),
        format!("gap {} gap={:e} tol={:e}", v(gap_ok), r.duality_gap, tol),
    ];
    let csv = if spec.dim == 2 {
        Some(doc::atoms_csv(&r.spline.to_tensor()?))
    } else {
        None
    };
    Ok((
        ResultDoc {
            objective: r.objective,
            duality_gap: r.duality_gap,
            iterations: r.iterations,
            sparsity: r.sparsity_count,
            bound: r.bound,
            passed,
            verdicts,
            atoms: r.spline.atoms().iter().map(doc::multi_record).collect(),
            null: r.spline.null().to_vec(),
        },
        csv,
    ))
}

fn render(config: &Path, out: &Path, window: Window, resolution: usize) -> CmdResult {
    let doc = read_doc(config)?;
    let (records, null) = match (&doc.result, &doc.truth) {
        (Some(r), _) => (r.atoms.clone(), r.null.clone()),
        (None, Some(t)) if t.random.is_none() => (t.atoms.clone(), t.null.clone()),
        _ => {
            return Err(Failure {
                code: 1,
                message: "nothing to render: no [result] and no explicit [truth]".into(),
            })
        }
    };
    let spline = match doc.multidim {
        Some(spec) if spec.dim == 2 => doc::multi_spline(spec, &records, &null)?.to_tensor()?,
        Some(spec) => {
            return Err(Failure {
                code: 1,
                message: format!(
                    "render needs a two-dimensional spline, got dimension {}",
                    spec.dim
                ),
            })
        }
        None => {
            let (o1, o2) = doc.odos()?;
            TensorSpline::fundamental(o1, o2, doc.domain()?, doc::atoms_from_records(&records)?)?
        }
    };
    let opts = RenderOptions {
        window,
        resolution,
        ..RenderOptions::default()
    };
    write(out, "heatmap.svg", &heatmap_svg(&spline, &opts))?;
    write(out, "decomposition.svg", &decomposition_svg(&spline, &opts))
}

fn verify(suite: &str, seed: u64, count: Option<usize>) -> CmdResult {
    let names: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else {
        vec![suite]
    };
    let mut failed = 0;
    for name in names {
        let report = run_suite(name, seed, count)?;
        for line in report.lines() {
            println!("{line}");
        }
        failed += report.failures();
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: format!("{failed} verify check(s) failed"),
        })
    }
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Simulate { config, seed, out } => simulate(&config, seed, &out),
        Command::Solve {
            config,
            out,
            grid,
            tol,
        } => solve_cmd(&config, &out, grid, tol),
        Command::Render {
            config,
            out,
            extended_window,
            resolution,
        } => render(&config, &out, extended_window, resolution),
        Command::Verify { suite, seed, count } => verify(&suite, seed, count),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 64 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
