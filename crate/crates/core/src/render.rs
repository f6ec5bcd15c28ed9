//! Deterministic rasters and SVG heatmaps of two-dimensional splines.

use std::fmt::Write as _;

use crate::spline::{Family, TensorAtom, TensorSpline};

/// Plot window `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Window {
    /// The unit square padded by a quarter on every side.
    pub const EXTENDED: Window = Window {
        x0: -0.25,
        x1: 1.25,
        y0: -0.25,
        y1: 1.25,
    };

    pub const UNIT: Window = Window {
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 1.0,
    };

    /// Pixel-center coordinates of column `i` and row `j` (row 0 on top).
    pub fn pixel(&self, res: usize, i: usize, j: usize) -> (f64, f64) {
        let fx = (i as f64 + 0.5) / res as f64;
        let fy = (j as f64 + 0.5) / res as f64;
        (
            self.x0 + fx * (self.x1 - self.x0),
            self.y1 - fy * (self.y1 - self.y0),
        )
    }

    fn to_px(self, size: f64, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.x0) / (self.x1 - self.x0) * size,
            (self.y1 - y) / (self.y1 - self.y0) * size,
        )
    }
}

/// `res × res` samples, row-major, row 0 on top.
pub fn raster(spline: &TensorSpline, window: Window, res: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(res * res);
    for j in 0..res {
        for i in 0..res {
            let (x, y) = window.pixel(res, i, j);
            out.push(spline.eval(x, y));
        }
    }
    out
}

/// Diverging blue-white-red map of `v / scale`, clamped to `[−1, 1]` and
/// quantized to 129 levels so equal regions compress into long runs.
pub fn colorize(v: f64, scale: f64) -> [u8; 3] {
    let t = if scale > 0.0 {
        (v / scale).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let t = (t * 64.0).round() / 64.0;
    let fade = |a: f64| (255.0 * (1.0 - a)).round() as u8;
    if t >= 0.0 {
        [255, fade(t), fade(t)]
    } else {
        [fade(-t), fade(-t), 255]
    }
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub window: Window,
    pub resolution: usize,
    /// Drawing size in SVG user units.
    pub size: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            window: Window::EXTENDED,
            resolution: 256,
            size: 512.0,
        }
    }
}

fn push_heat(svg: &mut String, values: &[f64], scale: f64, res: usize, size: f64, dx: f64) {
    let px = size / res as f64;
    for j in 0..res {
        let row = &values[j * res..(j + 1) * res];
        let mut i = 0;
        while i < res {
            let c = colorize(row[i], scale);
            let mut k = i + 1;
            while k < res && colorize(row[k], scale) == c {
                k += 1;
            }
            if c != [255, 255, 255] {
                let _ = write!(
                    svg,
                    r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#{:02x}{:02x}{:02x}"/>"##,
                    dx + i as f64 * px,
                    j as f64 * px,
                    (k - i) as f64 * px,
                    px,
                    c[0],
                    c[1],
                    c[2]
                );
                svg.push('\n');
            }
            i = k;
        }
    }
}

fn push_boundary(svg: &mut String, spline: &TensorSpline, w: Window, size: f64, dx: f64) {
    let d = spline.domain();
    let (ax, ay) = w.to_px(size, d.k1.lo, d.k2.hi);
    let (bx, by) = w.to_px(size, d.k1.hi, d.k2.lo);
    let _ = writeln!(
        svg,
        r#"<rect class="boundary" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="black" stroke-width="1.5" stroke-dasharray="4 4"/>"#,
        dx + ax,
        ay,
        bx - ax,
        by - ay
    );
}

fn push_markers(svg: &mut String, spline: &TensorSpline, w: Window, size: f64, dx: f64) {
    for atom in spline.atoms() {
        match *atom {
            TensorAtom::TensorGreen { x1, x2, .. } => {
                let (x, y) = w.to_px(size, x1, x2);
                let _ = writeln!(
                    svg,
                    r#"<circle class="knot-2d" cx="{:.3}" cy="{:.3}" r="3" fill="none" stroke="black"/>"#,
                    dx + x,
                    y
                );
            }
            TensorAtom::PolyGreen { y, .. } => {
                let (_, py) = w.to_px(size, w.x0, y);
                let _ = writeln!(
                    svg,
                    r#"<line class="knot-axis2" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="black" stroke-width="2"/>"#,
                    dx,
                    py,
                    dx + 8.0,
                    py
                );
            }
            TensorAtom::GreenPoly { z, .. } => {
                let (px, _) = w.to_px(size, z, w.y0);
                let _ = writeln!(
                    svg,
                    r#"<line class="knot-axis1" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="black" stroke-width="2"/>"#,
                    dx + px,
                    size,
                    dx + px,
                    size - 8.0
                );
            }
            TensorAtom::PolyPoly { .. } => {}
        }
    }
}

fn header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    )
}

/// Heatmap with knot markers per family and the dotted domain boundary.
pub fn heatmap_svg(spline: &TensorSpline, opts: &RenderOptions) -> String {
    let values = raster(spline, opts.window, opts.resolution);
    let scale = max_abs(&values);
    let mut svg = header(opts.size, opts.size);
    let _ = writeln!(svg, "<!-- scale {:.16e} -->", scale);
    let _ = writeln!(
        svg,
        r#"<rect width="{0}" height="{0}" fill="white"/>"#,
        opts.size
    );
    push_heat(&mut svg, &values, scale, opts.resolution, opts.size, 0.0);
    push_boundary(&mut svg, spline, opts.window, opts.size, 0.0);
    push_markers(&mut svg, spline, opts.window, opts.size, 0.0);
    svg.push_str("</svg>\n");
    svg
}

/// Rasters of the four family components; they sum to the full raster.
pub fn decomposition_rasters(spline: &TensorSpline, window: Window, res: usize) -> [Vec<f64>; 4] {
    spline.decompose().map(|part| raster(&part, window, res))
}

/// Four panels side by side in [`Family::ALL`] order on a shared scale.
pub fn decomposition_svg(spline: &TensorSpline, opts: &RenderOptions) -> String {
    let parts = spline.decompose();
    let rasters = decomposition_rasters(spline, opts.window, opts.resolution);
    let scale = rasters.iter().map(|r| max_abs(r)).fold(0.0, f64::max);
    let gap = 16.0;
    let mut svg = header(4.0 * opts.size + 3.0 * gap, opts.size + 24.0);
    let _ = writeln!(svg, "<!-- scale {:.16e} -->", scale);
    for (k, (part, values)) in parts.iter().zip(&rasters).enumerate() {
        let dx = k as f64 * (opts.size + gap);
        let _ = writeln!(
            svg,
            r#"<g class="panel" data-family="{}">"#,
            Family::ALL[k].tag()
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{dx:.3}" width="{0}" height="{0}" fill="white"/>"#,
            opts.size
        );
        push_heat(&mut svg, values, scale, opts.resolution, opts.size, dx);
        push_boundary(&mut svg, part, opts.window, opts.size, dx);
        push_markers(&mut svg, part, opts.window, opts.size, dx);
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="14">{}</text>"#,
            dx + 4.0,
            opts.size + 18.0,
            Family::ALL[k].tag()
        );
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::odo::Odo;
    use crate::scenarios::fig1_spline;
    use crate::spline::Domain;

    #[test]
    fn empty_spline_is_blank_with_boundary() {
        let d = Odo::derivative(1).unwrap();
        let s = TensorSpline::fundamental(d, d, Domain::unit(), vec![]).unwrap();
        let svg = heatmap_svg(
            &s,
            &RenderOptions {
                resolution: 16,
                ..Default::default()
            },
        );
        assert_eq!(svg.matches("fill=\"#").count(), 0);
        assert_eq!(svg.matches("class=\"boundary\"").count(), 1);
    }

    #[test]
    fn fig1_markers() {
        let s = fig1_spline(5).unwrap();
        let svg = heatmap_svg(
            &s,
            &RenderOptions {
                resolution: 32,
                ..Default::default()
            },
        );
        assert_eq!(svg.matches("class=\"knot-2d\"").count(), 10);
        assert_eq!(svg.matches("class=\"knot-axis2\"").count(), 5);
        assert_eq!(svg.matches("class=\"knot-axis1\"").count(), 5);
        assert_eq!(
            svg,
            heatmap_svg(
                &s,
                &RenderOptions {
                    resolution: 32,
                    ..Default::default()
                }
            )
        );
    }

    #[test]
    fn panels_resum() {
        let s = fig1_spline(2).unwrap();
        let full = raster(&s, Window::UNIT, 40);
        let parts = decomposition_rasters(&s, Window::UNIT, 40);
        for p in 0..full.len() {
            let sum: f64 = parts.iter().map(|r| r[p]).sum();
            assert!((sum - full[p]).abs() <= 1e-12);
        }
    }

    #[test]
    fn color_extremes() {
        assert_eq!(colorize(1.0, 1.0), [255, 0, 0]);
        assert_eq!(colorize(-2.0, 1.0), [0, 0, 255]);
        assert_eq!(colorize(0.0, 1.0), [255, 255, 255]);
    }
}
