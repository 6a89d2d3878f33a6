//! ARIMA(p, d, q) with a constant, fitted by exact Gaussian maximum
//! likelihood (Kalman filter, variance concentrated out) after a
//! conditional-sum-of-squares start.
//!
//! The differenced series `w` follows
//! `w_t = a + Σ φ_i w_{t−i} + Σ θ_j ε_{t−j} + ε_t`, i.e. a stationary ARMA
//! with mean `a / (1 − Σ φ_i)`.

use serde::{Deserialize, Serialize};

use super::covariance_from_hessian;
use crate::error::{Error, Result};
use crate::numerics::optim::{fd_gradient_hessian, nelder_mead, newton_polish, solve_dense, Minimum, NelderMeadOptions};
use crate::numerics::stats::{mean, variance};

/// Roots of the AR and MA polynomials must stay this far outside the unit circle.
pub const ROOT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaSpec {
    pub fn new(p: usize, d: usize, q: usize) -> Result<Self> {
        let s = ArimaSpec { p, d, q };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d > 2 {
            return Err(Error::invalid(format!("differencing degree d = {} is not in {{0, 1, 2}}", self.d)));
        }
        Ok(())
    }
}

impl std::fmt::Display for ArimaSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ARIMA({},{},{})", self.p, self.d, self.q)
    }
}

/// Tail of the training data needed to continue the recursions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastState {
    /// Last `d + p` (at least one) values of the modelled series.
    pub levels: Vec<f64>,
    /// Last `q` (at least one) one-step innovations.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub spec: ArimaSpec,
    /// Constant term.
    pub a: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma2: f64,
    pub loglik: f64,
    pub aic: f64,
    /// Observations entering the likelihood (after differencing).
    pub n_used: usize,
    /// Standard errors of `(a, phi.., theta..)`; NaN where unavailable.
    #[serde(with = "crate::numerics::nan_as_null")]
    pub std_errors: Vec<f64>,
    pub last_state: LastState,
}

/// One-step predictive moments on the model scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Step {
    pub offset: f64,
    pub loc: f64,
    pub var: f64,
}

pub fn difference(y: &[f64], d: usize) -> Vec<f64> {
    let mut w = y.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }
    w
}

/// `z_t − w_t`: the part of `z_t` fixed by its own past under differencing.
pub(crate) fn integration_offset(z: &[f64], t: usize, d: usize) -> f64 {
    match d {
        0 => 0.0,
        1 => z[t - 1],
        _ => 2.0 * z[t - 1] - z[t - 2],
    }
}

/// Durbin–Levinson map from partial autocorrelations in (−1, 1) to the
/// coefficients of a stationary `1 − Σ c_i B^i`.
pub fn pacf_to_coefs(r: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = Vec::with_capacity(r.len());
    for (k, &rk) in r.iter().enumerate() {
        let prev = c.clone();
        for j in 0..k {
            c[j] = prev[j] - rk * prev[k - 1 - j];
        }
        c.push(rk);
    }
    c
}

/// Inverse of [`pacf_to_coefs`]; `None` if the polynomial is not stationary.
pub fn coefs_to_pacf(c: &[f64]) -> Option<Vec<f64>> {
    let mut cur = c.to_vec();
    let mut r = vec![0.0; c.len()];
    for k in (0..c.len()).rev() {
        let rk = cur[k];
        if rk.abs() >= 1.0 {
            return None;
        }
        r[k] = rk;
        let den = 1.0 - rk * rk;
        let prev: Vec<f64> = (0..k).map(|j| (cur[j] + rk * cur[k - 1 - j]) / den).collect();
        cur = prev;
    }
    Some(r)
}

/// Smallest modulus among the roots of `1 − Σ c_i z^i` (infinite if none).
pub fn min_root_modulus(c: &[f64]) -> f64 {
    let mut c = c.to_vec();
    while c.last() == Some(&0.0) {
        c.pop();
    }
    let p = c.len();
    if p == 0 {
        return f64::INFINITY;
    }
    let mut m = nalgebra::DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        m[(0, j)] = c[j];
    }
    for i in 1..p {
        m[(i, i - 1)] = 1.0;
    }
    let largest = m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if largest == 0.0 {
        f64::INFINITY
    } else {
        1.0 / largest
    }
}

/// Checks both polynomials and names the first violated constraint.
pub(crate) fn check_roots(phi: &[f64], theta: &[f64]) -> Result<()> {
    let ar = min_root_modulus(phi);
    if !(ar > 1.0 + ROOT_MARGIN) {
        return Err(Error::Constraint(format!(
            "stationarity: AR polynomial has a root of modulus {ar:.8} (must exceed 1 + {ROOT_MARGIN:e})"
        )));
    }
    let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
    let ma = min_root_modulus(&neg);
    if !(ma > 1.0 + ROOT_MARGIN) {
        return Err(Error::Constraint(format!(
            "invertibility: MA polynomial has a root of modulus {ma:.8} (must exceed 1 + {ROOT_MARGIN:e})"
        )));
    }
    Ok(())
}

/// Harvey's state-space form of an ARMA process.
struct StateSpace {
    r: usize,
    phi: Vec<f64>,
    rv: Vec<f64>,
    p0: Vec<f64>,
}

impl StateSpace {
    fn new(phi: &[f64], theta: &[f64]) -> Option<Self> {
        let r = phi.len().max(theta.len() + 1);
        let mut ph = vec![0.0; r];
        ph[..phi.len()].copy_from_slice(phi);
        let mut rv = vec![0.0; r];
        rv[0] = 1.0;
        rv[1..=theta.len()].copy_from_slice(theta);
        let t_at = |i: usize, k: usize| -> f64 {
            let mut v = if k == 0 { ph[i] } else { 0.0 };
            if k == i + 1 {
                v += 1.0;
            }
            v
        };
        // Stationary covariance: (I − T⊗T) vec P = vec(R Rᵀ).
        let m = r * r;
        let mut a = vec![vec![0.0; m]; m];
        let mut b = vec![0.0; m];
        for i in 0..r {
            for j in 0..r {
                let row = i * r + j;
                b[row] = rv[i] * rv[j];
                for k in 0..r {
                    let tik = t_at(i, k);
                    if tik == 0.0 {
                        continue;
                    }
                    for l in 0..r {
                        a[row][k * r + l] -= tik * t_at(j, l);
                    }
                }
                a[row][row] += 1.0;
            }
        }
        let p0 = solve_dense(&a, &b)?;
        if !(p0[0] > 0.0) || p0.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(StateSpace { r, phi: ph, rv, p0 })
    }

    fn start(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.r], self.p0.clone())
    }

    /// Measurement update with the demeaned observation `x`, then time update.
    fn advance(&self, a: &mut [f64], p: &mut [f64], x: f64) {
        let r = self.r;
        let f = p[0];
        let v = x - a[0];
        let col: Vec<f64> = (0..r).map(|i| p[i * r]).collect();
        for i in 0..r {
            a[i] += col[i] / f * v;
            for j in 0..r {
                p[i * r + j] -= col[i] * col[j] / f;
            }
        }
        let a0 = a[0];
        for i in 0..r {
            a[i] = self.phi[i] * a0 + if i + 1 < r { a[i + 1] } else { 0.0 };
        }
        // T P Tᵀ using the sparse shape of T.
        let mut tp = vec![0.0; r * r];
        for i in 0..r {
            for j in 0..r {
                tp[i * r + j] = self.phi[i] * p[j] + if i + 1 < r { p[(i + 1) * r + j] } else { 0.0 };
            }
        }
        for i in 0..r {
            for j in 0..r {
                let v = tp[i * r] * self.phi[j] + if j + 1 < r { tp[i * r + j + 1] } else { 0.0 };
                p[i * r + j] = v + self.rv[i] * self.rv[j];
            }
        }
    }
}

/// Exact Gaussian log-likelihood of the stationary series `w` under an
/// ARMA with mean `mu`, with the innovation variance concentrated out.
/// Returns `(loglik, sigma2)`, or `None` if the parameters are not stationary.
pub fn arma_exact_loglik(w: &[f64], mu: f64, phi: &[f64], theta: &[f64]) -> Option<(f64, f64)> {
    let ss = StateSpace::new(phi, theta)?;
    let (mut a, mut p) = ss.start();
    let n = w.len() as f64;
    let mut sum_v2 = 0.0;
    let mut sum_lnf = 0.0;
    for &wt in w {
        let f = p[0];
        if !(f > 0.0) {
            return None;
        }
        let v = wt - mu - a[0];
        sum_v2 += v * v / f;
        sum_lnf += f.ln();
        ss.advance(&mut a, &mut p, wt - mu);
    }
    let sigma2 = sum_v2 / n;
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return None;
    }
    let ll = -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + 1.0 + sigma2.ln()) - 0.5 * sum_lnf;
    ll.is_finite().then_some((ll, sigma2))
}

/// Conditional residuals `ε_t`, `t ≥ p`, with zero pre-sample innovations.
pub(crate) fn conditional_residuals(w: &[f64], mu: f64, phi: &[f64], theta: &[f64]) -> Vec<f64> {
    let p = phi.len();
    let mut e: Vec<f64> = Vec::with_capacity(w.len().saturating_sub(p));
    for t in p..w.len() {
        let mut pred = mu;
        for (i, ph) in phi.iter().enumerate() {
            pred += ph * (w[t - 1 - i] - mu);
        }
        let k = e.len();
        for (j, th) in theta.iter().enumerate() {
            if k > j {
                pred += th * e[k - 1 - j];
            }
        }
        e.push(w[t] - pred);
    }
    e
}

/// Unconstrained coordinates `[μ̃, atanh pacf(φ).., atanh pacf(−θ)..]`
/// with `μ = center + scale·μ̃`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ArmaCoords {
    pub p: usize,
    pub q: usize,
    pub center: f64,
    pub scale: f64,
}

impl ArmaCoords {
    pub fn len(&self) -> usize {
        1 + self.p + self.q
    }

    pub fn decode(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let mu = self.center + self.scale * x[0];
        let r_ar: Vec<f64> = x[1..1 + self.p].iter().map(|z| z.tanh()).collect();
        let r_ma: Vec<f64> = x[1 + self.p..1 + self.p + self.q].iter().map(|z| z.tanh()).collect();
        let phi = pacf_to_coefs(&r_ar);
        let theta = pacf_to_coefs(&r_ma).into_iter().map(|c| -c).collect();
        (mu, phi, theta)
    }
}

fn nm_options(dim: usize) -> NelderMeadOptions {
    NelderMeadOptions {
        max_evaluations: 3000 + 800 * dim,
        f_tol: 1e-11,
        x_tol: 1e-9,
        initial_step: vec![0.2],
        restarts: 3,
    }
}

/// CSS estimate in [`ArmaCoords`] coordinates, used as a starting point.
pub(crate) fn css_start(w: &[f64], coords: &ArmaCoords) -> Vec<f64> {
    let x0 = vec![0.0; coords.len()];
    if coords.p + coords.q == 0 {
        return x0;
    }
    let css = |x: &[f64]| {
        let (mu, phi, theta) = coords.decode(x);
        let e = conditional_residuals(w, mu, &phi, &theta);
        e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64
    };
    nelder_mead(css, &x0, &nm_options(coords.len())).x
}

fn not_converged(label: &str, m: &Minimum) -> Error {
    Error::NoConvergence {
        message: format!("{label}: simplex did not meet its tolerance"),
        iterations: m.evaluations,
        last: m.x.clone(),
    }
}

/// Maximum-likelihood ARIMA fit of `y` (already on the modelling scale).
pub fn fit_arima(y: &[f64], spec: ArimaSpec) -> Result<ArimaModel> {
    spec.validate()?;
    let k = spec.p + spec.q + 1;
    if y.len() <= 10 * k {
        return Err(Error::invalid(format!(
            "{spec} needs more than {} observations, got {}",
            10 * k,
            y.len()
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{spec}: missing or non-finite value at index {i}")));
    }
    let w = difference(y, spec.d);
    let sd = variance(&w).sqrt();
    if !(sd > 0.0) {
        return Err(Error::invalid(format!("{spec}: differenced series is constant")));
    }
    let coords = ArmaCoords { p: spec.p, q: spec.q, center: mean(&w), scale: sd };
    let start = css_start(&w, &coords);

    let mut negll = |x: &[f64]| {
        let (mu, phi, theta) = coords.decode(x);
        match arma_exact_loglik(&w, mu, &phi, &theta) {
            Some((ll, _)) => -ll,
            None => f64::INFINITY,
        }
    };
    let opts = nm_options(coords.len());
    let min = nelder_mead(&mut negll, &start, &opts);
    if !min.value.is_finite() {
        return Err(not_converged(&spec.to_string(), &min));
    }
    let min = newton_polish(&mut negll, min, 8);
    if !min.converged && min.evaluations >= opts.max_evaluations {
        return Err(not_converged(&spec.to_string(), &min));
    }
    let (mu, phi, theta) = coords.decode(&min.x);
    check_roots(&phi, &theta).map_err(|e| match e {
        Error::Constraint(m) => Error::Constraint(format!("{spec}: {m}")),
        other => other,
    })?;
    let (loglik, sigma2) = arma_exact_loglik(&w, mu, &phi, &theta)
        .ok_or_else(|| Error::numerical(format!("{spec}: likelihood not finite at the optimum")))?;
    let a = mu * (1.0 - phi.iter().sum::<f64>());

    let mut nat = vec![a];
    nat.extend(&phi);
    nat.extend(&theta);
    let std_errors = natural_std_errors(&w, spec, &nat);

    let mut model = ArimaModel {
        spec,
        a,
        phi,
        theta,
        sigma2,
        loglik,
        aic: -2.0 * loglik + 2.0 * (k + 1) as f64,
        n_used: w.len(),
        std_errors,
        last_state: LastState { levels: vec![], residuals: vec![] },
    };
    let path = model.path(y);
    let innovations: Vec<f64> = (spec.d..y.len())
        .map(|t| {
            let s = path[t].expect("defined past d");
            y[t] - s.offset - s.loc
        })
        .collect();
    let keep_levels = (spec.d + spec.p).max(1).min(y.len());
    let keep_res = spec.q.max(1).min(innovations.len());
    model.last_state = LastState {
        levels: y[y.len() - keep_levels..].to_vec(),
        residuals: innovations[innovations.len() - keep_res..].to_vec(),
    };
    Ok(model)
}

/// Negative log-likelihood in the natural parameters `(a, phi.., theta..)`.
pub fn arima_negloglik_natural(w: &[f64], spec: ArimaSpec, x: &[f64]) -> f64 {
    let a = x[0];
    let phi = &x[1..1 + spec.p];
    let theta = &x[1 + spec.p..1 + spec.p + spec.q];
    let mu = a / (1.0 - phi.iter().sum::<f64>());
    match arma_exact_loglik(w, mu, phi, theta) {
        Some((ll, _)) => -ll,
        None => f64::INFINITY,
    }
}

fn natural_std_errors(w: &[f64], spec: ArimaSpec, nat: &[f64]) -> Vec<f64> {
    let mut f = |x: &[f64]| arima_negloglik_natural(w, spec, x);
    let (_, hess, _) = fd_gradient_hessian(&mut f, nat, 1e-4);
    match covariance_from_hessian(&hess) {
        Some(cov) => (0..nat.len()).map(|i| if cov[i][i] > 0.0 { cov[i][i].sqrt() } else { f64::NAN }).collect(),
        None => vec![f64::NAN; nat.len()],
    }
}

impl ArimaModel {
    /// Mean of the differenced series.
    pub fn mean(&self) -> f64 {
        self.a / (1.0 - self.phi.iter().sum::<f64>())
    }

    pub fn n_params(&self) -> usize {
        self.spec.p + self.spec.q + 2
    }

    /// Kalman predictive moments for every time `t` in `0..=z.len()` given
    /// `z[..t]`; `None` for `t < d`. Non-finite values are replaced by their
    /// one-step predicted mean.
    pub(crate) fn path(&self, z: &[f64]) -> Vec<Option<Step>> {
        let n = z.len();
        let d = self.spec.d;
        let mut z = z.to_vec();
        let mut out = vec![None; n + 1];
        let Some(ss) = StateSpace::new(&self.phi, &self.theta) else {
            return out;
        };
        let (mut a, mut p) = ss.start();
        let mu = self.mean();
        for t in d..=n {
            let offset = integration_offset(&z, t, d);
            let loc = mu + a[0];
            out[t] = Some(Step { offset, loc, var: self.sigma2 * p[0] });
            if t == n {
                break;
            }
            if !z[t].is_finite() {
                z[t] = offset + loc;
            }
            ss.advance(&mut a, &mut p, z[t] - offset - mu);
        }
        out
    }
}

/// AIC search over `p ≤ max_p`, `d ≤ max_d`, `q ≤ max_q`; orders that fail
/// to fit are skipped. Ties keep the smallest order.
pub fn select_arima(y: &[f64], max_p: usize, max_d: usize, max_q: usize) -> Result<ArimaModel> {
    let mut best: Option<ArimaModel> = None;
    let mut failures = Vec::new();
    for d in 0..=max_d.min(2) {
        for p in 0..=max_p {
            for q in 0..=max_q {
                let spec = ArimaSpec { p, d, q };
                match fit_arima(y, spec) {
                    Ok(m) => {
                        log::debug!("{spec}: aic {:.3}", m.aic);
                        if best.as_ref().is_none_or(|b| m.aic < b.aic) {
                            best = Some(m);
                        }
                    }
                    Err(e) => failures.push(format!("{spec}: {e}")),
                }
            }
        }
    }
    best.ok_or_else(|| Error::numerical(format!("no ARIMA order could be fitted: {}", failures.join("; "))))
}
