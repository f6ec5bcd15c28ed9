//! Problem and result documents (TOML, schema version 1).

use serde::{Deserialize, Serialize};
use tpspline::measurements::{ForwardOperator, MeasurementFunctional, Rect};
use tpspline::multidim::{MultiAtom, MultiFactor, MultiFunctional, MultiSpline};
use tpspline::odo::{Interval, Odo};
use tpspline::spline::{fmt_real, Domain, TensorAtom, TensorSpline};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub schema_version: u32,
    pub seed: u64,
    /// Standard deviation of the additive Gaussian noise in `simulate`.
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_fidelity")]
    pub fidelity: String,
    #[serde(default = "default_system")]
    pub system: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// `λ = lambda_fraction · λ_max` of the initial grid when `lambda` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operators: Option<Operators>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multidim: Option<MultiSpec>,
    #[serde(default)]
    pub domain: DomainDoc,
    #[serde(default)]
    pub grid: GridDoc,
    #[serde(default)]
    pub solver: SolverDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<Generate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Truth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ResultDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub functionals: Vec<FunctionalDoc>,
}

fn default_fidelity() -> String {
    "quadratic".into()
}

fn default_system() -> String {
    "fundamental".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Operators {
    pub alpha1: f64,
    pub order1: usize,
    pub alpha2: f64,
    pub order2: usize,
}

/// `D^N` in every direction on `[0, 1]^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiSpec {
    pub dim: usize,
    pub order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainDoc {
    pub k1: [f64; 2],
    pub k2: [f64; 2],
}

impl Default for DomainDoc {
    fn default() -> Self {
        Self {
            k1: [0.0, 1.0],
            k2: [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub n2d: usize,
    pub n1d: usize,
    pub levels: usize,
    /// Per-Green-count grid sizes for `multidim`; defaults by dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
}

impl Default for GridDoc {
    fn default() -> Self {
        Self {
            n2d: 33,
            n1d: 65,
            levels: 3,
            sizes: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverDoc {
    pub tol: f64,
    pub max_iter: usize,
    /// Gap tolerance of the certificate; the solver tolerance when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify_tol: Option<f64>,
}

impl Default for SolverDoc {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200_000,
            certify_tol: None,
        }
    }
}

/// Random functionals drawn by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generate {
    pub kind: String,
    pub count: usize,
}

/// Ground truth: explicit atom records, or a random shape expanded by
/// `simulate`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub null: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomShape>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomShape {
    pub k: usize,
    pub k1: usize,
    pub k2: usize,
    pub null: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultDoc {
    pub objective: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub sparsity: usize,
    pub bound: usize,
    pub passed: bool,
    pub verdicts: Vec<String>,
    pub atoms: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub null: Vec<f64>,
}

/// `dirac` takes `point`; `box` takes `bounds = [lo₁, hi₁, lo₂, hi₂, …]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FunctionalDoc {
    Dirac { point: Vec<f64> },
    Box { bounds: Vec<f64> },
}

#[derive(Debug)]
pub struct DocError(pub String);

impl std::fmt::Display for DocError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

type DocResult<T> = Result<T, DocError>;

fn err<T>(msg: impl Into<String>) -> DocResult<T> {
    Err(DocError(msg.into()))
}

impl Document {
    pub fn parse(text: &str) -> DocResult<Self> {
        let doc: Document = toml::from_str(text).map_err(|e| DocError(format!("document: {e}")))?;
        doc.check()?;
        Ok(doc)
    }

    pub fn write(&self) -> String {
        toml::to_string(self).expect("documents serialize")
    }

    fn check(&self) -> DocResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.operators.is_some() == self.multidim.is_some() {
            return err("exactly one of [operators] and [multidim] is required");
        }
        if self.fidelity != "quadratic" {
            return err(format!(
                "unsupported fidelity `{}`; only `quadratic`",
                self.fidelity
            ));
        }
        if self.system != "fundamental" {
            return err(format!(
                "unsupported system `{}`; only `fundamental`",
                self.system
            ));
        }
        if self.sigma.is_nan() || self.sigma < 0.0 {
            return err("sigma must be non-negative");
        }
        let dim = self.dim();
        for (i, f) in self.functionals.iter().enumerate() {
            let ok = match f {
                FunctionalDoc::Dirac { point } => point.len() == dim,
                FunctionalDoc::Box { bounds } => bounds.len() == 2 * dim,
            };
            if !ok {
                return err(format!(
                    "functional #{i} has the wrong number of coordinates for dimension {dim}"
                ));
            }
        }
        if let Some(t) = &self.truth {
            if t.random.is_some() && !t.atoms.is_empty() {
                return err("truth: give either atoms or random, not both");
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.multidim.map_or(2, |m| m.dim)
    }

    pub fn domain(&self) -> DocResult<Domain> {
        let iv =
            |k: [f64; 2]| Interval::new(k[0], k[1]).map_err(|e| DocError(format!("domain: {e}")));
        Ok(Domain::new(iv(self.domain.k1)?, iv(self.domain.k2)?))
    }

    pub fn odos(&self) -> DocResult<(Odo, Odo)> {
        let o = self
            .operators
            .ok_or_else(|| DocError("[operators] missing".into()))?;
        let mk = |a, n| Odo::new(a, n).map_err(|e| DocError(format!("operators: {e}")));
        Ok((mk(o.alpha1, o.order1)?, mk(o.alpha2, o.order2)?))
    }

    pub fn forward(&self) -> DocResult<ForwardOperator> {
        let funs = self
            .functionals
            .iter()
            .map(|f| match f {
                FunctionalDoc::Dirac { point } => {
                    Ok(MeasurementFunctional::dirac(point[0], point[1]))
                }
                FunctionalDoc::Box { bounds } => {
                    Rect::new(bounds[0], bounds[1], bounds[2], bounds[3])
                        .map(MeasurementFunctional::unit_box)
                        .map_err(|e| DocError(format!("box: {e}")))
                }
            })
            .collect::<DocResult<Vec<_>>>()?;
        Ok(ForwardOperator::new(funs, self.domain()?))
    }

    pub fn multi_functionals(&self) -> Vec<MultiFunctional> {
        self.functionals
            .iter()
            .map(|f| match f {
                FunctionalDoc::Dirac { point } => MultiFunctional::Dirac(point.clone()),
                FunctionalDoc::Box { bounds } => {
                    MultiFunctional::Box(bounds.chunks(2).map(|c| (c[0], c[1])).collect())
                }
            })
            .collect()
    }
}

pub fn atoms_from_records(records: &[String]) -> DocResult<Vec<TensorAtom>> {
    records
        .iter()
        .map(|r| TensorAtom::from_record(r).map_err(|e| DocError(e.to_string())))
        .collect()
}

pub fn records(spline: &TensorSpline) -> Vec<String> {
    spline.atoms().iter().map(TensorAtom::to_record).collect()
}

/// `weight,f₁,…,f_D` with factors `p<k>` (polynomial) or `g<knot>`.
pub fn multi_record(atom: &MultiAtom) -> String {
    let mut s = fmt_real(atom.weight);
    for f in &atom.factors {
        s.push(',');
        match f {
            MultiFactor::Poly(k) => s.push_str(&format!("p{k}")),
            MultiFactor::Green(x) => s.push_str(&format!("g{}", fmt_real(*x))),
        }
    }
    s
}

pub fn multi_atom_from_record(record: &str) -> DocResult<MultiAtom> {
    let bad = || DocError(format!("multidim atom record `{record}`"));
    let mut fields = record.split(',').map(str::trim);
    let weight = fields.next().and_then(|w| w.parse().ok()).ok_or_else(bad)?;
    let factors = fields
        .map(|f| {
            if let Some(k) = f.strip_prefix('p') {
                k.parse().map(MultiFactor::Poly).map_err(|_| bad())
            } else if let Some(x) = f.strip_prefix('g') {
                x.parse().map(MultiFactor::Green).map_err(|_| bad())
            } else {
                Err(bad())
            }
        })
        .collect::<DocResult<Vec<_>>>()?;
    Ok(MultiAtom::new(weight, factors))
}

pub fn multi_spline(spec: MultiSpec, records: &[String], null: &[f64]) -> DocResult<MultiSpline> {
    let atoms = records
        .iter()
        .map(|r| multi_atom_from_record(r))
        .collect::<DocResult<Vec<_>>>()?;
    let null = if null.is_empty() {
        vec![0.0; spec.order.pow(spec.dim as u32)]
    } else {
        null.to_vec()
    };
    MultiSpline::new(spec.dim, spec.order, atoms, null).map_err(|e| DocError(e.to_string()))
}

/// Atom table with the `family,n,n',weight,x1,x2` header.
pub fn atoms_csv(spline: &TensorSpline) -> String {
    let mut out = String::from("family,n,n',weight,x1,x2\n");
    for r in records(spline) {
        out.push_str(&r);
        out.push('\n');
    }
    out
}
