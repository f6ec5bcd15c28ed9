//! Browser demo: random spline heatmaps, their four-panel decomposition, and
//! a small recovery problem solved in the page.
//!
//! Everything returns SVG text; the page inserts it into the DOM.

use tpspline::odo::Odo;
use tpspline::render::{decomposition_svg, heatmap_svg, RenderOptions};
use tpspline::scenarios::{self, random_spline, SplineShape, FIG1_SHAPE};
use tpspline::solver::{solve, SolverOptions};
use tpspline::spline::{Domain, TensorSpline};
use wasm_bindgen::prelude::*;

/// `"constant"` is `D ⊗ D`, `"linear"` is `D² ⊗ D²`.
fn order_of(kind: &str) -> Result<usize, String> {
    match kind {
        "constant" => Ok(1),
        "linear" => Ok(2),
        other => Err(format!(
            "unknown kind `{other}`; expected constant or linear"
        )),
    }
}

fn options(resolution: usize) -> RenderOptions {
    RenderOptions {
        resolution: resolution.clamp(8, 512),
        ..RenderOptions::default()
    }
}

pub fn demo_spline(kind: &str, seed: u64) -> Result<TensorSpline, String> {
    let d = Odo::derivative(order_of(kind)?).map_err(|e| e.to_string())?;
    let shape = if kind == "constant" {
        FIG1_SHAPE
    } else {
        SplineShape {
            k: 6,
            k1: 3,
            k2: 3,
            null: true,
        }
    };
    random_spline(seed, d, d, Domain::unit(), shape).map_err(|e| e.to_string())
}

pub fn heatmap(kind: &str, seed: u64, resolution: usize) -> Result<String, String> {
    Ok(heatmap_svg(&demo_spline(kind, seed)?, &options(resolution)))
}

pub fn decomposition(kind: &str, seed: u64, resolution: usize) -> Result<String, String> {
    Ok(decomposition_svg(
        &demo_spline(kind, seed)?,
        &options(resolution),
    ))
}

/// Heatmap of a recovered spline plus its certificate lines.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Recovery {
    svg: String,
    report: String,
}

#[wasm_bindgen]
impl Recovery {
    #[wasm_bindgen(getter)]
    pub fn svg(&self) -> String {
        self.svg.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn report(&self) -> String {
        self.report.clone()
    }
}

/// Box averages for `constant`, point samples for `linear`, `λ = 0.1 λ_max`.
pub fn recover(kind: &str, m: usize, seed: u64, resolution: usize) -> Result<Recovery, String> {
    let n = order_of(kind)?;
    let lo = if n == 1 { 2 } else { 5 };
    if !(lo..=24).contains(&m) {
        return Err(format!("need between {lo} and 24 measurements, got {m}"));
    }
    let opts = SolverOptions::default();
    let problem = if n == 1 {
        scenarios::box_instance(seed, m, &opts)
    } else {
        scenarios::dirac_instance(seed, m, &opts)
    }
    .map_err(|e| e.to_string())?;
    let r = solve(&problem, &opts).map_err(|e| e.to_string())?;
    let mut report = format!(
        "M={m} lambda={:.6e} objective={:.6e}\n",
        problem.lambda, r.objective
    );
    if let Some(c) = &r.certification {
        for line in c.lines() {
            report.push_str(&line);
            report.push('\n');
        }
    }
    Ok(Recovery {
        svg: heatmap_svg(&r.spline, &options(resolution)),
        report,
    })
}

#[wasm_bindgen(js_name = renderHeatmap)]
pub fn render_heatmap(kind: &str, seed: u32, resolution: usize) -> Result<String, JsValue> {
    heatmap(kind, seed.into(), resolution).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = renderDecomposition)]
pub fn render_decomposition(kind: &str, seed: u32, resolution: usize) -> Result<String, JsValue> {
    decomposition(kind, seed.into(), resolution).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = solveDemo)]
pub fn solve_demo(kind: &str, m: usize, seed: u32, resolution: usize) -> Result<Recovery, JsValue> {
    recover(kind, m, seed.into(), resolution).map_err(|e| JsValue::from_str(&e))
}
