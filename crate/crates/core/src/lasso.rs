//! Weighted-ℓ1 least squares with an unpenalized block:
//! `min ½‖y − Aθ − Bd‖² + λ‖θ‖₁`.
//!
//! The unpenalized block is eliminated by projecting onto the orthogonal
//! complement of `range(B)`; the remaining lasso is solved by FISTA with
//! periodic polishing on the equicorrelation set, and certified by the
//! duality gap.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Iterations between equicorrelation-set polish attempts.
    pub polish_every: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200_000,
            polish_every: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub theta: DVector<f64>,
    pub d: DVector<f64>,
    pub objective: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// `A`, `B`, `y` with `range(B)` projected out.
#[derive(Debug, Clone)]
pub struct Projected {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Original matrices, kept for recovering `d`.
    a_full: DMatrix<f64>,
    y_full: DVector<f64>,
    b_pinv: DMatrix<f64>,
}

/// Relative singular-value cutoff for rank decisions.
const RANK_TOL: f64 = 1e-10;

impl Projected {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let m = y.len();
        if a.nrows() != m || b.nrows() != m {
            return Err(Error::InvalidArgument(
                "dimension mismatch between A, B and y".into(),
            ));
        }
        let q = b.ncols();
        if q == 0 {
            return Ok(Self {
                a: a.clone(),
                y: y.clone(),
                a_full: a.clone(),
                y_full: y.clone(),
                b_pinv: DMatrix::zeros(0, m),
            });
        }
        if q > m {
            return Err(Error::RankDeficientNullBlock {
                rank: m,
                expected: q,
            });
        }
        let svd = b.clone().svd(true, true);
        let sv = &svd.singular_values;
        let max = sv.iter().copied().fold(0.0, f64::max);
        let rank = sv
            .iter()
            .filter(|&&s| max > 0.0 && s > RANK_TOL * max)
            .count();
        if rank < q {
            return Err(Error::RankDeficientNullBlock { rank, expected: q });
        }
        let u = svd.u.as_ref().expect("requested U");
        let vt = svd.v_t.as_ref().expect("requested Vᵀ");
        let proj = |x: &DMatrix<f64>| x - u * (u.transpose() * x);
        let a_p = proj(a);
        let y_p = y - u * (u.transpose() * y);
        let inv = DMatrix::from_diagonal(&sv.map(|s| 1.0 / s));
        let b_pinv = vt.transpose() * inv * u.transpose();
        Ok(Self {
            a: a_p,
            y: y_p,
            a_full: a.clone(),
            y_full: y.clone(),
            b_pinv,
        })
    }

    /// Optimal unpenalized coefficients for a given `θ`.
    pub fn recover_d(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.b_pinv * (&self.y_full - &self.a_full * theta)
    }

    pub fn objective(&self, theta: &DVector<f64>, lambda: f64) -> f64 {
        let r = &self.y - &self.a * theta;
        0.5 * r.norm_squared() + lambda * theta.lp_norm(1)
    }

    /// Primal objective minus the dual value at the scaled residual.
    pub fn gap(&self, theta: &DVector<f64>, lambda: f64) -> f64 {
        let r = &self.y - &self.a * theta;
        let corr = (self.a.transpose() * &r).amax();
        let scale = if corr > lambda { lambda / corr } else { 1.0 };
        let u = &r * scale;
        let primal = 0.5 * r.norm_squared() + lambda * theta.lp_norm(1);
        let dual = 0.5 * self.y.norm_squared() - 0.5 * (&self.y - &u).norm_squared();
        (primal - dual).max(0.0)
    }

    /// `‖Ãᵀỹ‖∞`: the smallest `λ` with `θ = 0` optimal.
    pub fn lambda_max(&self) -> f64 {
        if self.a.ncols() == 0 {
            return 0.0;
        }
        (self.a.transpose() * &self.y).amax()
    }
}

pub fn lambda_max(a: &DMatrix<f64>, b: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    Ok(Projected::new(a, b, y)?.lambda_max())
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

pub fn solve_lasso(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    opts: LassoOptions,
) -> Result<LassoSolution> {
    let proj = Projected::new(a, b, y)?;
    solve_projected(&proj, lambda, opts, None)
}

/// Solves the projected problem, optionally warm-started.
pub fn solve_projected(
    proj: &Projected,
    lambda: f64,
    opts: LassoOptions,
    warm: Option<&DVector<f64>>,
) -> Result<LassoSolution> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    let p = proj.a.ncols();
    let finish = |theta: DVector<f64>, gap: f64, iterations: usize| LassoSolution {
        d: proj.recover_d(&theta),
        objective: proj.objective(&theta, lambda),
        theta,
        gap,
        iterations,
    };
    let zero = DVector::zeros(p);
    if p == 0 || lambda >= proj.lambda_max() {
        let gap = proj.gap(&zero, lambda);
        if gap <= opts.tol {
            return Ok(finish(zero, gap, 0));
        }
    }
    let lip = {
        let s = proj.a.clone().svd(false, false).singular_values;
        let top = s.iter().copied().fold(0.0, f64::max);
        (top * top).max(f64::MIN_POSITIVE)
    };
    let step = 1.0 / lip;
    let at = proj.a.transpose();

    let mut x = match warm {
        Some(w) if w.len() == p => w.clone(),
        _ => zero.clone(),
    };
    let mut best = x.clone();
    let mut best_gap = proj.gap(&best, lambda);
    if best_gap <= opts.tol {
        return Ok(finish(best, best_gap, 0));
    }
    let mut z = x.clone();
    let mut t = 1.0f64;
    for it in 1..=opts.max_iter {
        // gradient of ½‖ỹ − Ãz‖² is ÃᵀÃz − Ãᵀỹ
        let grad = &at * (&proj.a * &z - &proj.y);
        let mut next = &z - &grad * step;
        next.apply(|v| *v = soft(*v, lambda * step));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        z = &next + (&next - &x) * momentum;
        // restart when the objective goes up
        if proj.objective(&next, lambda) > proj.objective(&x, lambda) {
            z = next.clone();
            t = 1.0;
        } else {
            t = t_next;
        }
        x = next;
        if it % opts.polish_every == 0 || it == opts.max_iter {
            let g = proj.gap(&x, lambda);
            if g < best_gap {
                best_gap = g;
                best = x.clone();
            }
            if let Some((cand, cg)) = polish(proj, &x, lambda) {
                if cg < best_gap {
                    best_gap = cg;
                    best = cand.clone();
                    if cg < g {
                        x = cand;
                        z = x.clone();
                        t = 1.0;
                    }
                }
            }
            if best_gap <= opts.tol {
                return Ok(finish(best, best_gap, it));
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        gap: best_gap,
    })
}

/// Active-set finisher warm-started from the support and signs of `theta`.
/// Each step minimizes the sign-linearized objective on the current set,
/// backs off at sign changes and adds the worst KKT violator, so the
/// objective never increases.
fn polish(proj: &Projected, theta: &DVector<f64>, lambda: f64) -> Option<(DVector<f64>, f64)> {
    let p = theta.len();
    let mut x = theta.clone();
    let mut set: Vec<usize> = (0..p).filter(|&i| x[i] != 0.0).collect();
    let mut sign: Vec<f64> = set.iter().map(|&i| x[i].signum()).collect();
    let max_steps = 4 * (proj.a.nrows() + set.len()) + 50;
    for _ in 0..max_steps {
        if !set.is_empty() {
            let ae = proj.a.select_columns(&set);
            let s = DVector::from_column_slice(&sign);
            let xs = DVector::from_iterator(set.len(), set.iter().map(|&i| x[i]));
            let k = set.len();
            // thin SVD: the rows of Vᵀ span the row space, the rest is null
            let svd = ae.clone().svd(true, true);
            let (u, vt) = (svd.u.as_ref()?, svd.v_t.as_ref()?);
            let sv = &svd.singular_values;
            let max = sv.iter().copied().fold(0.0, f64::max);
            let keep: Vec<usize> = (0..sv.len()).filter(|&q| sv[q] > 1e-10 * max).collect();
            let mut v = s.clone();
            for &q in &keep {
                let row = vt.row(q).transpose();
                v -= &row * row.dot(&s);
            }
            let step = if v.norm() > 1e-9 {
                // cost-decreasing direction that keeps the fit
                let mut t = f64::INFINITY;
                for j in 0..k {
                    if xs[j] * v[j] > 0.0 {
                        t = t.min(xs[j] / v[j]);
                    }
                }
                if !t.is_finite() {
                    return None;
                }
                -v * t
            } else {
                let uty = u.transpose() * &proj.y;
                let vts = vt * &s;
                let mut beta = DVector::zeros(k);
                for &q in &keep {
                    let coef = uty[q] / sv[q] - lambda * vts[q] / (sv[q] * sv[q]);
                    beta += vt.row(q).transpose() * coef;
                }
                let dir = &beta - &xs;
                let mut t = 1.0f64;
                for j in 0..k {
                    if beta[j] * s[j] < 0.0 {
                        t = t.min(xs[j] / (xs[j] - beta[j]));
                    }
                }
                dir * t
            };
            let mut blocked = false;
            for (j, &i) in set.iter().enumerate() {
                x[i] = xs[j] + step[j];
                if x[i] * sign[j] <= 1e-15 * xs[j].abs() {
                    x[i] = 0.0;
                    blocked = true;
                }
            }
            if blocked {
                let (ns, nsg): (Vec<usize>, Vec<f64>) = set
                    .iter()
                    .zip(&sign)
                    .filter(|(i, _)| x[**i] != 0.0)
                    .map(|(&i, &g)| (i, g))
                    .unzip();
                set = ns;
                sign = nsg;
                continue;
            }
        }
        let c = proj.a.transpose() * (&proj.y - &proj.a * &x);
        let worst = (0..p)
            .filter(|i| !set.contains(i))
            .max_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs()));
        match worst {
            Some(i) if c[i].abs() > lambda * (1.0 + 1e-12) => {
                set.push(i);
                sign.push(c[i].signum());
            }
            _ => {
                let g = proj.gap(&x, lambda);
                return Some((x, g));
            }
        }
    }
    let g = proj.gap(&x, lambda);
    Some((x, g))
}

/// Shrinks the support of an optimal `θ` to at most `bound` entries by
/// moving along directions that keep `Ãθ` and the ℓ1 cost fixed.
pub fn reduce_support(
    proj: &Projected,
    theta: &DVector<f64>,
    bound: usize,
) -> Result<DVector<f64>> {
    let mut theta = theta.clone();
    loop {
        let support: Vec<usize> = (0..theta.len()).filter(|&i| theta[i] != 0.0).collect();
        let s = support.len();
        if s <= bound {
            return Ok(theta);
        }
        let Some(v) = null_direction(&proj.a.select_columns(&support), &support, &theta) else {
            return Err(Error::NumericalStall { support: s, bound });
        };
        // first zero crossing in either direction
        let hit = |dir: f64| -> Option<(f64, usize)> {
            let mut best: Option<(f64, usize)> = None;
            for (j, &i) in support.iter().enumerate() {
                let step = dir * v[j];
                if step * theta[i] < 0.0 {
                    let t = (theta[i] / step).abs();
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, j));
                    }
                }
            }
            best
        };
        let plus = hit(1.0);
        let minus = hit(-1.0);
        let (dir, (t, j)) = match (plus, minus) {
            (Some(p), Some(m)) => {
                let (ap, am) = (theta[support[p.1]].abs(), theta[support[m.1]].abs());
                if am < ap {
                    (-1.0, m)
                } else {
                    (1.0, p)
                }
            }
            (Some(p), None) => (1.0, p),
            (None, Some(m)) => (-1.0, m),
            (None, None) => return Err(Error::NumericalStall { support: s, bound }),
        };
        for (k, &i) in support.iter().enumerate() {
            let before = theta[i];
            theta[i] += dir * t * v[k];
            // a coefficient that changes sign is an accumulated rounding artifact
            if k == j || theta[i] * before <= 0.0 {
                theta[i] = 0.0;
            }
        }
    }
}

/// Unit vector in `null(Ã_S)` orthogonal to the sign vector when the null
/// space allows it; `None` when `Ã_S` has full column rank.
fn null_direction(
    a_s: &DMatrix<f64>,
    support: &[usize],
    theta: &DVector<f64>,
) -> Option<DVector<f64>> {
    let (m, s) = a_s.shape();
    let mut square = DMatrix::zeros(m.max(s), s);
    square.view_mut((0, 0), (m, s)).copy_from(a_s);
    let svd = square.svd(false, true);
    let vt = svd.v_t?;
    let sv = svd.singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let null: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] <= 1e-9 * max).collect();
    if null.is_empty() {
        return None;
    }
    let signs = DVector::from_iterator(s, support.iter().map(|&i| theta[i].signum()));
    let basis = DMatrix::from_columns(
        &null
            .iter()
            .map(|&k| vt.row(k).transpose())
            .collect::<Vec<_>>(),
    );
    let v = if basis.ncols() >= 2 {
        // component of the last basis vector orthogonal to signs within span
        let w = basis.transpose() * &signs;
        if w.norm() == 0.0 {
            basis.column(basis.ncols() - 1).into_owned()
        } else {
            let mut e = DVector::zeros(basis.ncols());
            e[basis.ncols() - 1] = 1.0;
            let wn = w.normalize();
            let c = &e - &wn * wn.dot(&e);
            if c.norm() < 1e-12 {
                let mut e0 = DVector::zeros(basis.ncols());
                e0[0] = 1.0;
                &basis * (&e0 - &wn * wn.dot(&e0))
            } else {
                &basis * c
            }
        }
    } else {
        basis.column(0).into_owned()
    };
    let n = v.norm();
    (n > 0.0).then(|| v / n)
}

/// Exhaustive search over supports of size `≤ max_support` and sign
/// patterns; each candidate solves the joint sign-fixed stationarity system
/// on `[A_S B]`.
pub fn brute_force_oracle(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    max_support: usize,
) -> Result<f64> {
    let p = a.ncols();
    if p > 50 || max_support > 6 {
        return Err(Error::TooLarge(format!(
            "P = {p} (limit 50), max support = {max_support} (limit 6)"
        )));
    }
    let q = b.ncols();
    let objective = |theta: &[f64], idx: &[usize], d: &DVector<f64>| {
        let mut r = y - b * d;
        for (k, &i) in idx.iter().enumerate() {
            r -= a.column(i) * theta[k];
        }
        0.5 * r.norm_squared() + lambda * theta.iter().map(|t| t.abs()).sum::<f64>()
    };
    let mut best = f64::INFINITY;
    // empty support: plain least squares on B
    {
        let d = if q == 0 {
            DVector::zeros(0)
        } else {
            let btb = b.transpose() * b;
            btb.lu()
                .solve(&(b.transpose() * y))
                .unwrap_or_else(|| DVector::zeros(q))
        };
        best = best.min(objective(&[], &[], &d));
    }
    let mut idx = Vec::with_capacity(max_support);
    for size in 1..=max_support.min(p) {
        combinations(p, size, &mut idx, 0, &mut |support| {
            let cols: Vec<DVector<f64>> = support
                .iter()
                .map(|&i| a.column(i).into_owned())
                .chain((0..q).map(|j| b.column(j).into_owned()))
                .collect();
            let mat = DMatrix::from_columns(&cols);
            let gram = mat.transpose() * &mat;
            let lu = gram.lu();
            let rhs0 = mat.transpose() * y;
            for pattern in 0..(1u32 << size) {
                let mut rhs = rhs0.clone();
                let signs: Vec<f64> = (0..size)
                    .map(|k| if pattern >> k & 1 == 1 { -1.0 } else { 1.0 })
                    .collect();
                for k in 0..size {
                    rhs[k] -= lambda * signs[k];
                }
                let Some(sol) = lu.solve(&rhs) else { continue };
                if !sol.iter().all(|v| v.is_finite()) {
                    continue;
                }
                if (0..size).any(|k| sol[k] * signs[k] <= 0.0) {
                    continue;
                }
                let theta: Vec<f64> = (0..size).map(|k| sol[k]).collect();
                let d = sol.rows(size, q).into_owned();
                best = best.min(objective(&theta, support, &d));
            }
        });
    }
    Ok(best)
}

fn combinations(
    n: usize,
    k: usize,
    cur: &mut Vec<usize>,
    start: usize,
    f: &mut dyn FnMut(&[usize]),
) {
    if cur.len() == k {
        f(cur);
        return;
    }
    for i in start..n {
        if n - i < k - cur.len() {
            break;
        }
        cur.push(i);
        combinations(n, k, cur, i + 1, f);
        cur.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(
        m: usize,
        p: usize,
        q: usize,
        seed: u64,
    ) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = || rng.random_range(-1.0..1.0);
        let a = DMatrix::from_fn(m, p, |_, _| g());
        let b = DMatrix::from_fn(m, q, |_, _| g());
        let y = DVector::from_fn(m, |_, _| g());
        (a, b, y)
    }

    #[test]
    fn scalar_soft_threshold() {
        let g = 0.8;
        let a = DMatrix::from_element(1, 1, g);
        let b = DMatrix::zeros(1, 0);
        let y = DVector::from_element(1, 1.0);
        let lambda = 0.3;
        let sol = solve_lasso(&a, &b, &y, lambda, LassoOptions::default()).unwrap();
        let expect = (g - lambda) / (g * g);
        assert!((sol.theta[0] - expect).abs() < 1e-9);
        assert!(sol.gap <= 1e-8);
    }

    #[test]
    fn large_lambda_gives_null_regression() {
        let (a, b, y) = random(5, 8, 2, 1);
        let lmax = lambda_max(&a, &b, &y).unwrap();
        let sol = solve_lasso(&a, &b, &y, lmax * 1.01, LassoOptions::default()).unwrap();
        assert!(sol.theta.iter().all(|v| *v == 0.0));
        let ls = (b.transpose() * &b)
            .lu()
            .solve(&(b.transpose() * &y))
            .unwrap();
        assert!((sol.d - ls).amax() < 1e-12);
        let oracle = brute_force_oracle(&a, &b, &y, lmax * 1.01, 3).unwrap();
        assert!((oracle - sol.objective).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_null_block() {
        let (a, _, y) = random(4, 3, 1, 2);
        let col = DVector::from_fn(4, |i, _| i as f64);
        let b = DMatrix::from_columns(&[col.clone(), col * 2.0]);
        assert!(matches!(
            Projected::new(&a, &b, &y),
            Err(Error::RankDeficientNullBlock {
                rank: 1,
                expected: 2
            })
        ));
    }

    #[test]
    fn matches_oracle_on_small_instances() {
        for seed in 0..6 {
            let (a, b, y) = random(4, 8, 1, 10 + seed);
            let lambda = 0.2 * lambda_max(&a, &b, &y).unwrap();
            let sol = solve_lasso(&a, &b, &y, lambda, LassoOptions::default()).unwrap();
            let oracle = brute_force_oracle(&a, &b, &y, lambda, 4).unwrap();
            assert!(oracle <= sol.objective + 1e-9);
            assert!(
                (sol.objective - oracle).abs() / oracle.max(1.0) < 1e-6,
                "seed {seed}"
            );
        }
    }

    #[test]
    fn reduction_preserves_fit_and_cost() {
        // tripled columns: spreading each weight over its copies keeps the
        // fit and the ℓ1 cost but widens the support
        let (a0, b, y) = random(3, 4, 1, 7);
        let small = Projected::new(&a0, &b, &y).unwrap();
        let lambda = 0.1 * small.lambda_max();
        let sol = solve_projected(&small, lambda, LassoOptions::default(), None).unwrap();
        let a = DMatrix::from_fn(3, 12, |i, j| a0[(i, j % 4)]);
        let proj = Projected::new(&a, &b, &y).unwrap();
        let spread = DVector::from_fn(12, |j, _| sol.theta[j % 4] / 3.0);
        let before = proj.objective(&spread, lambda);
        let reduced = reduce_support(&proj, &spread, 2).unwrap();
        let nnz = reduced.iter().filter(|v| **v != 0.0).count();
        assert!(nnz <= 2);
        assert!((&proj.a * &reduced - &proj.a * &spread).amax() < 1e-10);
        assert!(proj.objective(&reduced, lambda) <= before + 1e-10);
        assert_eq!(reduce_support(&proj, &reduced, 2).unwrap(), reduced);
    }

    #[test]
    fn oracle_limits() {
        let (a, b, y) = random(3, 51, 1, 3);
        assert!(matches!(
            brute_force_oracle(&a, &b, &y, 0.1, 2),
            Err(Error::TooLarge(_))
        ));
        let (a, b, y) = random(3, 10, 1, 3);
        assert!(matches!(
            brute_force_oracle(&a, &b, &y, 0.1, 7),
            Err(Error::TooLarge(_))
        ));
    }
}
