//! Gauss–Legendre rules and an adaptive integrator.
//!
//! The fixed rules back the exact integration of polynomial·exponential
//! pieces; the adaptive integrator is the fallback for arbitrary integrands
//! and the independent oracle used by the tests.

use std::f64::consts::PI;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi's initial guess, refined by Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Options for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub max_depth: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_depth: 40,
        }
    }
}

/// Adaptive Gauss–Legendre on `[a, b]`: a 10-point estimate is accepted when
/// it agrees with the sum over both halves to the (depth-scaled) tolerance.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: AdaptiveOptions) -> f64 {
    let rule = GaussLegendre::new(10);
    let whole = rule.integrate(a, b, &f);
    recurse(&f, &rule, a, b, whole, opts.abs_tol, opts.max_depth)
}

/// Adaptive integration split at the given interior breakpoints, so that
/// kinks and jumps of the integrand sit on panel edges.
pub fn adaptive_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: AdaptiveOptions,
) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let n = (pts.len() - 1).max(1) as f64;
    let local = AdaptiveOptions {
        abs_tol: opts.abs_tol / n,
        ..opts
    };
    pts.windows(2)
        .map(|w| adaptive(&f, w[0], w[1], local))
        .sum()
}

fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, f);
    let right = rule.integrate(mid, b, f);
    let refined = left + right;
    if depth == 0 || (refined - whole).abs() <= tol {
        return refined;
    }
    recurse(f, rule, a, mid, left, 0.5 * tol, depth - 1)
        + recurse(f, rule, mid, b, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(5);
        // degree 9 is the highest exact degree for 5 nodes
        let got = rule.integrate(0.0, 2.0, |x| x.powi(9));
        assert!((got - 2f64.powi(10) / 10.0).abs() < 1e-10);
        let w: f64 = rule.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn large_rules_are_accurate() {
        let rule = GaussLegendre::new(40);
        let got = rule.integrate(0.0, 1.0, f64::exp);
        assert!((got - (1f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_kinks() {
        let f = |x: f64| (x - 0.3).abs();
        let got = adaptive(f, 0.0, 1.0, AdaptiveOptions::default());
        let exact = 0.3 * 0.3 / 2.0 + 0.7 * 0.7 / 2.0;
        assert!((got - exact).abs() < 1e-10);
        let split = adaptive_with_breaks(f, 0.0, 1.0, &[0.3], AdaptiveOptions::default());
        assert!((split - exact).abs() < 1e-14);
    }
}
