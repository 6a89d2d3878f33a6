//! Derivative-free minimizers: Nelder–Mead simplex with restarts, Brent's
//! bounded scalar method, and a finite-difference Newton polish used to
//! tighten simplex optima.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    /// Stop when the spread of simplex function values falls below this.
    pub f_tol: f64,
    /// ... and the simplex diameter below this.
    pub x_tol: f64,
    /// Initial step per coordinate. A scalar broadcast if length 1.
    pub initial_step: Vec<f64>,
    /// Number of restarts from the current best point.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 20_000,
            f_tol: 1e-12,
            x_tol: 1e-9,
            initial_step: vec![0.1],
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn guarded<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn nelder_mead_pass<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    opts: &NelderMeadOptions,
    budget: usize,
) -> Minimum {
    let n = x0.len();
    // Adaptive coefficients (Gao & Han) behave better in higher dimension.
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = if n > 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };
    let step = |i: usize| -> f64 {
        if opts.initial_step.len() == 1 {
            opts.initial_step[0]
        } else {
            opts.initial_step[i]
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let s = step(i);
        v[i] += if s == 0.0 { 0.00025 } else { s };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| guarded(f, v)).collect();
    let mut evals = n + 1;
    let mut converged = false;

    while evals < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let f_spread = (values[n] - values[0]).abs();
        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if f_spread <= opts.f_tol * (1.0 + values[0].abs()) && diameter <= opts.x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = guarded(f, &xr);
        evals += 1;
        if fr < values[0] {
            let xe = along(alpha * gamma);
            let fe = guarded(f, &xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(alpha * rho);
            let fc = guarded(f, &xc);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = guarded(f, &xc);
            (xc, fc)
        };
        evals += 1;
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=n {
            let shrunk: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + sigma * (x - b))
                .collect();
            values[i] = guarded(f, &shrunk);
            simplex[i] = shrunk;
        }
        evals += n;
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        evaluations: evals,
        converged,
    }
}

/// Minimizes `f` from `x0` with the Nelder–Mead simplex, restarting from the
/// best vertex to escape premature collapse.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    if x0.is_empty() {
        let value = guarded(&mut f, x0);
        return Minimum { x: vec![], value, evaluations: 1, converged: true };
    }
    let mut best = nelder_mead_pass(&mut f, x0, opts, opts.max_evaluations);
    let mut used = best.evaluations;
    for _ in 0..opts.restarts {
        if used >= opts.max_evaluations {
            break;
        }
        let mut small = opts.clone();
        small.initial_step = opts
            .initial_step
            .iter()
            .map(|s| s * 0.1)
            .collect();
        let next = nelder_mead_pass(&mut f, &best.x, &small, opts.max_evaluations - used);
        used += next.evaluations;
        let improved = next.value < best.value - 1e-14 * (1.0 + best.value.abs());
        if next.value <= best.value {
            best = Minimum { evaluations: used, ..next };
        } else {
            best.evaluations = used;
        }
        if !improved {
            break;
        }
    }
    best.evaluations = used;
    best
}

/// Gradient and Hessian by central differences with per-coordinate steps.
pub fn fd_gradient_hessian<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], rel_step: f64) -> (Vec<f64>, Vec<Vec<f64>>, f64) {
    let n = x.len();
    let f0 = f(x);
    let h: Vec<f64> = x.iter().map(|v| rel_step * (1.0 + v.abs())).collect();
    let mut grad = vec![0.0; n];
    let mut hess = vec![vec![0.0; n]; n];
    let mut xp = x.to_vec();
    for i in 0..n {
        xp[i] = x[i] + h[i];
        let fp = f(&xp);
        xp[i] = x[i] - h[i];
        let fm = f(&xp);
        xp[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h[i]);
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut eval = |di: f64, dj: f64| {
                xp[i] = x[i] + di * h[i];
                xp[j] = x[j] + dj * h[j];
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    (grad, hess, f0)
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub(crate) fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &bi)| {
        let mut r = row.clone();
        r.push(bi);
        r
    }).collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    Some(x)
}

/// Refines a minimum with damped Newton steps on a finite-difference
/// Hessian; a step is kept only if it lowers `f`.
pub fn newton_polish<F: FnMut(&[f64]) -> f64>(f: &mut F, start: Minimum, iterations: usize) -> Minimum {
    let mut best = start;
    if best.x.is_empty() || !best.value.is_finite() {
        return best;
    }
    for _ in 0..iterations {
        let (grad, hess, f0) = fd_gradient_hessian(f, &best.x, 1e-4);
        best.evaluations += 1 + 2 * best.x.len() + 2 * best.x.len() * best.x.len();
        if !f0.is_finite() {
            break;
        }
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let Some(step) = solve_dense(&hess, &neg) else { break };
        if step.iter().any(|s| !s.is_finite()) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let trial: Vec<f64> = best.x.iter().zip(&step).map(|(x, s)| x + t * s).collect();
            let v = guarded(f, &trial);
            best.evaluations += 1;
            if v < best.value {
                best.x = trial;
                best.value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    best
}

/// Brent's bounded scalar minimization on `[lo, hi]`.
pub fn brent_minimize<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<(f64, f64)> {
    if !(lo < hi) {
        return Err(Error::invalid(format!("empty bracket [{lo}, {hi}]")));
    }
    let golden = 0.381_966_011_250_105_1;
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (mut a, mut b) = (lo, hi);
    let mut x = a + golden * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = eval(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            return Ok((x, fx));
        }
        let mut golden_step = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_old = e;
            e = d;
            if p.abs() < (0.5 * q * e_old).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden_step = false;
            }
        }
        if golden_step {
            e = if x < m { b - x } else { a - x };
            d = golden * e;
        }
        let u = if d.abs() >= tol1 { x + d } else if d > 0.0 { x + tol1 } else { x - tol1 };
        let fu = eval(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Err(Error::NoConvergence {
        message: "Brent minimization".into(),
        iterations: max_iter,
        last: vec![x],
    })
}

/// Root of a monotone function on `[lo, hi]` by bisection, assuming a sign
/// change. Returns the midpoint of the final bracket.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64, max_iter: usize) -> f64 {
    let f_lo = f(lo);
    let increasing = f_lo < 0.0;
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= x_tol || mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if (v < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(f, &[-1.2, 1.0], &NelderMeadOptions::default());
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn polish_reaches_quadratic_minimum_exactly() {
        let mut f = |x: &[f64]| 3.0 * (x[0] - 0.3).powi(2) + (x[1] + 2.0).powi(2) + x[0] * x[1];
        let start = Minimum { x: vec![0.0, 0.0], value: f(&[0.0, 0.0]), evaluations: 0, converged: false };
        let m = newton_polish(&mut f, start, 5);
        // stationary point of the quadratic: 6(x-0.3)+y = 0, 2(y+2)+x = 0
        let x = (1.8 + 2.0) / (6.0 - 0.5);
        let y = -2.0 - x / 2.0;
        assert!((m.x[0] - x).abs() < 1e-7 && (m.x[1] - y).abs() < 1e-7);
    }

    #[test]
    fn brent_parabola() {
        let (x, fx) = brent_minimize(|x| (x - 0.7).powi(2) + 1.0, -3.0, 5.0, 1e-10, 200).unwrap();
        assert!((x - 0.7).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brent_boundary_minimum() {
        let (x, _) = brent_minimize(|x| x, 1.0, 2.0, 1e-10, 200).unwrap();
        assert!(x - 1.0 < 1e-8);
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14, 200);
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
    }
}
