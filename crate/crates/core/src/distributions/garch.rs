//! ARIMA mean equation with GARCH(P, Q) conditional variance and
//! unit-variance Student-t innovations, fitted jointly by conditional
//! maximum likelihood.
//!
//! `ε_t = σ_t z_t`, `σ_t² = ω + Σ α_i ε_{t−i}² + Σ β_j σ_{t−j}²`, with
//! pre-sample squared residuals and variances set to the sample variance of
//! the mean-equation residuals.

use serde::{Deserialize, Serialize};

use super::arima::{
    check_roots, conditional_residuals, css_start, difference, integration_offset, ArimaModel, ArimaSpec, ArmaCoords,
    LastState,
};
use super::covariance_from_hessian;
use super::predictive::Innovation;
use crate::error::{Error, Result};
use crate::numerics::optim::{fd_gradient_hessian, nelder_mead, newton_polish, Minimum, NelderMeadOptions};
use crate::numerics::stats::{mean, variance};

/// Largest degrees of freedom the optimizer explores.
const NU_MAX: f64 = 300.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchModel {
    /// Mean equation; its `sigma2` is the unconditional innovation variance.
    pub arima: ArimaModel,
    pub omega: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub nu: f64,
    /// Conditional variance for the step after the training sample.
    pub last_sigma2: f64,
    /// Pre-sample value used to start the variance recursion.
    pub init_sigma2: f64,
    pub loglik: f64,
    pub aic: f64,
    /// Standard errors of `(a, phi.., theta.., omega, alpha.., beta.., nu)`.
    #[serde(with = "crate::numerics::nan_as_null")]
    pub std_errors: Vec<f64>,
}

/// Conditional variances for `t = 0..=eps.len()`; the last entry is the
/// one-step-ahead variance. Pre-sample terms use `init`.
pub fn garch_filter(eps: &[f64], omega: f64, alpha: &[f64], beta: &[f64], init: f64) -> Vec<f64> {
    let mut s2: Vec<f64> = Vec::with_capacity(eps.len() + 1);
    for t in 0..=eps.len() {
        let mut v = omega;
        for (i, a) in alpha.iter().enumerate() {
            v += a * if t > i { eps[t - 1 - i] * eps[t - 1 - i] } else { init };
        }
        for (j, b) in beta.iter().enumerate() {
            v += b * if t > j { s2[t - 1 - j] } else { init };
        }
        s2.push(v);
    }
    s2
}

/// Full natural parameter set of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct GarchParams {
    pub mu: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub omega: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub nu: f64,
}

/// Conditional log-likelihood of the stationary series `w`. Returns
/// `(loglik, init_sigma2, last_sigma2)`.
pub fn garch_t_loglik(w: &[f64], par: &GarchParams) -> Option<(f64, f64, f64)> {
    if !(par.omega > 0.0 && par.nu > 2.0) || par.alpha.iter().chain(&par.beta).any(|v| *v < 0.0) {
        return None;
    }
    let e = conditional_residuals(w, par.mu, &par.phi, &par.theta);
    let init = variance(&e);
    let s2 = garch_filter(&e, par.omega, &par.alpha, &par.beta, init);
    let inn = Innovation::StudentT { nu: par.nu };
    let mut ll = 0.0;
    for (et, vt) in e.iter().zip(&s2) {
        if !(*vt > 0.0) {
            return None;
        }
        let sd = vt.sqrt();
        ll += inn.ln_pdf(et / sd) - sd.ln();
    }
    ll.is_finite().then_some((ll, init, s2[e.len()]))
}

/// Unconstrained coordinates: ARMA part as in [`ArmaCoords`], then
/// `log ω̃`, the softmax logits of `(α.., β..)` against a slack term, and a
/// logistic coordinate for `ν`.
#[derive(Debug, Clone, Copy)]
struct Coords {
    arma: ArmaCoords,
    gp: usize,
    gq: usize,
    var_scale: f64,
}

impl Coords {
    fn len(&self) -> usize {
        self.arma.len() + 1 + self.gp + self.gq + 1
    }

    fn decode(&self, x: &[f64]) -> GarchParams {
        let k = self.arma.len();
        let (mu, phi, theta) = self.arma.decode(&x[..k]);
        let omega = self.var_scale * x[k].exp();
        let logits = &x[k + 1..k + 1 + self.gp + self.gq];
        let top = logits.iter().copied().fold(0.0, f64::max);
        let den = (-top).exp() + logits.iter().map(|g| (g - top).exp()).sum::<f64>();
        let weights: Vec<f64> = logits.iter().map(|g| (g - top).exp() / den).collect();
        let zn = x[k + 1 + self.gp + self.gq];
        GarchParams {
            mu,
            phi,
            theta,
            omega,
            alpha: weights[..self.gp].to_vec(),
            beta: weights[self.gp..].to_vec(),
            nu: 2.0 + (NU_MAX - 2.0) / (1.0 + (-zn).exp()),
        }
    }

    fn encode_variance(&self, omega: f64, alpha: &[f64], beta: &[f64], nu: f64) -> Vec<f64> {
        let slack = 1.0 - alpha.iter().chain(beta).sum::<f64>();
        let mut v = vec![(omega / self.var_scale).ln()];
        v.extend(alpha.iter().chain(beta).map(|w| (w / slack).ln()));
        let frac = (nu - 2.0) / (NU_MAX - 2.0);
        v.push((frac / (1.0 - frac)).ln());
        v
    }
}

fn optimize(w: &[f64], coords: &Coords, mean_start: &[f64], var: f64) -> Minimum {
    let mut negll = |x: &[f64]| match garch_t_loglik(w, &coords.decode(x)) {
        Some((ll, _, _)) => -ll,
        None => f64::INFINITY,
    };
    let split = |total: f64, n: usize| vec![total / n.max(1) as f64; n];
    let starts = [
        (0.1, split(0.1, coords.gp), split(0.8, coords.gq)),
        (0.9, split(0.05, coords.gp), split(0.05, coords.gq)),
    ];
    let opts = NelderMeadOptions {
        max_evaluations: 4000 + 1000 * coords.len(),
        f_tol: 1e-11,
        x_tol: 1e-9,
        initial_step: vec![0.3],
        restarts: 3,
    };
    let mut best: Option<Minimum> = None;
    for (omega_frac, alpha, beta) in &starts {
        let mut x0 = mean_start.to_vec();
        x0.extend(coords.encode_variance(omega_frac * var, alpha, beta, 8.0));
        let m = nelder_mead(&mut negll, &x0, &opts);
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let min = best.expect("at least one start");
    if !min.value.is_finite() {
        return min;
    }
    let converged = min.converged || min.evaluations < opts.max_evaluations;
    let mut min = newton_polish(&mut negll, min, 8);
    min.converged = converged;
    min
}

/// Joint fit of the mean and variance equations to `y` (modelling scale).
pub fn fit_arima_garch_t(y: &[f64], spec: ArimaSpec, garch_p: usize, garch_q: usize) -> Result<GarchModel> {
    spec.validate()?;
    let label = format!("{spec}-GARCH({garch_p},{garch_q})-t");
    let k_total = spec.p + spec.q + 1 + 1 + garch_p + garch_q + 1;
    if y.len() <= 20 * k_total {
        return Err(Error::invalid(format!(
            "{label} needs more than {} observations, got {}",
            20 * k_total,
            y.len()
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{label}: missing or non-finite value at index {i}")));
    }
    let w = difference(y, spec.d);
    let var = variance(&w);
    if !(var > 0.0) {
        return Err(Error::invalid(format!("{label}: differenced series is constant")));
    }
    let arma = ArmaCoords { p: spec.p, q: spec.q, center: mean(&w), scale: var.sqrt() };
    let coords = Coords { arma, gp: garch_p, gq: garch_q, var_scale: var };
    let mean_start = css_start(&w, &arma);

    let min = optimize(&w, &coords, &mean_start, var);
    if !min.value.is_finite() {
        return Err(Error::NoConvergence {
            message: format!("{label}: likelihood not finite at any trial point"),
            iterations: min.evaluations,
            last: min.x,
        });
    }
    if !min.converged {
        return Err(Error::NoConvergence {
            message: format!("{label}: simplex did not meet its tolerance"),
            iterations: min.evaluations,
            last: min.x,
        });
    }
    let mut par = coords.decode(&min.x);
    // Without ARCH terms beta only shapes the start-up transient of a
    // recursion begun at the sample variance, so it is not identified;
    // normalize to beta = 0 then, or whenever beta buys no likelihood.
    if garch_q > 0 {
        let arch: f64 = par.alpha.iter().sum();
        let ridge = Coords { gq: 0, ..coords };
        let m0 = optimize(&w, &ridge, &mean_start, var);
        if m0.value.is_finite() && (arch < 1e-3 || m0.value - min.value < 1e-3) {
            par = ridge.decode(&m0.x);
            par.beta = vec![0.0; garch_q];
        }
    }
    let persistence: f64 = par.alpha.iter().chain(&par.beta).sum();
    if persistence >= 1.0 - 1e-6 {
        return Err(Error::Constraint(format!(
            "{label}: alpha + beta = {persistence:.8} is not below 1 (covariance stationarity)"
        )));
    }
    if par.nu <= 2.0 + 1e-6 {
        return Err(Error::Constraint(format!("{label}: degrees of freedom {:.8} not above 2", par.nu)));
    }
    check_roots(&par.phi, &par.theta).map_err(|e| match e {
        Error::Constraint(m) => Error::Constraint(format!("{label}: {m}")),
        other => other,
    })?;
    let (loglik, init_sigma2, last_sigma2) =
        garch_t_loglik(&w, &par).ok_or_else(|| Error::numerical(format!("{label}: likelihood not finite at the optimum")))?;

    let nat = to_natural(&par);
    let std_errors = {
        let mut f = |x: &[f64]| garch_negloglik_natural(&w, spec, garch_p, garch_q, x);
        let (_, hess, _) = fd_gradient_hessian(&mut f, &nat, 1e-4);
        match covariance_from_hessian(&hess) {
            Some(cov) => (0..nat.len()).map(|i| if cov[i][i] > 0.0 { cov[i][i].sqrt() } else { f64::NAN }).collect(),
            None => vec![f64::NAN; nat.len()],
        }
    };
    let a = par.mu * (1.0 - par.phi.iter().sum::<f64>());
    let n_params = k_total;
    let aic = -2.0 * loglik + 2.0 * n_params as f64;
    let e = conditional_residuals(&w, par.mu, &par.phi, &par.theta);
    let keep_levels = (spec.d + spec.p).max(1).min(y.len());
    let keep_res = spec.q.max(1).min(e.len());
    let arima = ArimaModel {
        spec,
        a,
        phi: par.phi.clone(),
        theta: par.theta.clone(),
        sigma2: par.omega / (1.0 - persistence),
        loglik,
        aic,
        n_used: e.len(),
        std_errors: std_errors[..1 + spec.p + spec.q].to_vec(),
        last_state: LastState {
            levels: y[y.len() - keep_levels..].to_vec(),
            residuals: e[e.len() - keep_res..].to_vec(),
        },
    };
    Ok(GarchModel {
        arima,
        omega: par.omega,
        alpha: par.alpha,
        beta: par.beta,
        nu: par.nu,
        last_sigma2,
        init_sigma2,
        loglik,
        aic,
        std_errors,
    })
}

fn to_natural(par: &GarchParams) -> Vec<f64> {
    let mut v = vec![par.mu * (1.0 - par.phi.iter().sum::<f64>())];
    v.extend(&par.phi);
    v.extend(&par.theta);
    v.push(par.omega);
    v.extend(&par.alpha);
    v.extend(&par.beta);
    v.push(par.nu);
    v
}

/// Negative log-likelihood in `(a, phi.., theta.., omega, alpha.., beta.., nu)`.
pub fn garch_negloglik_natural(w: &[f64], spec: ArimaSpec, garch_p: usize, garch_q: usize, x: &[f64]) -> f64 {
    let (p, q) = (spec.p, spec.q);
    let phi = x[1..1 + p].to_vec();
    let mu = x[0] / (1.0 - phi.iter().sum::<f64>());
    let o = 1 + p + q;
    let par = GarchParams {
        mu,
        phi,
        theta: x[1 + p..o].to_vec(),
        omega: x[o],
        alpha: x[o + 1..o + 1 + garch_p].to_vec(),
        beta: x[o + 1 + garch_p..o + 1 + garch_p + garch_q].to_vec(),
        nu: x[o + 1 + garch_p + garch_q],
    };
    match garch_t_loglik(w, &par) {
        Some((ll, _, _)) => -ll,
        None => f64::INFINITY,
    }
}

/// One-step predictive location, scale and offset on the model scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct VolStep {
    pub offset: f64,
    pub loc: f64,
    pub sigma2: f64,
}

impl GarchModel {
    pub fn innovation(&self) -> Innovation {
        Innovation::StudentT { nu: self.nu }
    }

    /// First time index with a predictive distribution.
    pub fn first_index(&self) -> usize {
        self.arima.spec.d + self.arima.spec.p
    }

    /// Predictive moments for every `t` in `0..=z.len()` given `z[..t]`;
    /// missing values are replaced by their predicted mean.
    pub(crate) fn path(&self, z: &[f64]) -> Vec<Option<VolStep>> {
        let n = z.len();
        let d = self.arima.spec.d;
        let p = self.arima.spec.p;
        let mu = self.arima.mean();
        let mut z = z.to_vec();
        let mut w = vec![f64::NAN; n];
        let mut e: Vec<f64> = Vec::new();
        let mut s2: Vec<f64> = Vec::new();
        let mut out = vec![None; n + 1];
        let start = d + p;
        for t in start..=n {
            let j = t - start;
            let mut v = self.omega;
            for (i, a) in self.alpha.iter().enumerate() {
                v += a * if j > i { e[j - 1 - i] * e[j - 1 - i] } else { self.init_sigma2 };
            }
            for (k, b) in self.beta.iter().enumerate() {
                v += b * if j > k { s2[j - 1 - k] } else { self.init_sigma2 };
            }
            s2.push(v);
            // w is indexed by original time here.
            for s in (t.saturating_sub(p)).max(d)..t {
                if w[s].is_nan() {
                    w[s] = z[s] - integration_offset(&z, s, d);
                }
            }
            let mut loc = mu;
            for (i, ph) in self.arima.phi.iter().enumerate() {
                loc += ph * (w[t - 1 - i] - mu);
            }
            for (k, th) in self.arima.theta.iter().enumerate() {
                if j > k {
                    loc += th * e[j - 1 - k];
                }
            }
            let offset = integration_offset(&z, t, d);
            out[t] = Some(VolStep { offset, loc, sigma2: v });
            if t == n {
                break;
            }
            if !z[t].is_finite() {
                z[t] = offset + loc;
            }
            w[t] = z[t] - offset;
            e.push(w[t] - loc);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::rng_from;
    use rand_distr::{ChiSquared, Distribution, StandardNormal};

    /// AR(1)-GARCH(1,1) with unit-variance t innovations.
    fn simulate(n: usize, phi: f64, omega: f64, alpha: f64, beta: f64, nu: f64, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed);
        let chi = ChiSquared::new(nu).unwrap();
        let burn = 1000;
        let mut y = vec![0.0; n + burn];
        let mut s2 = omega / (1.0 - alpha - beta);
        let mut e_prev: f64 = 0.0;
        for t in 1..n + burn {
            s2 = omega + alpha * e_prev * e_prev + beta * s2;
            let z: f64 = StandardNormal.sample(&mut rng);
            let c: f64 = chi.sample(&mut rng);
            let tz = z / (c / nu).sqrt() * ((nu - 2.0) / nu).sqrt();
            let e = s2.sqrt() * tz;
            y[t] = phi * y[t - 1] + e;
            e_prev = e;
        }
        y.split_off(burn)
    }

    /// Independent AR(1)-GARCH(1,1)-t conditional likelihood in natural
    /// parameters, written without the shared recursions.
    fn oracle_negll(y: &[f64], x: &[f64]) -> f64 {
        let (a, phi, omega, alpha, beta, nu) = (x[0], x[1], x[2], x[3], x[4], x[5]);
        if omega <= 0.0 || alpha < 0.0 || beta < 0.0 || nu <= 2.0 {
            return f64::INFINITY;
        }
        let e: Vec<f64> = (1..y.len()).map(|t| y[t] - a - phi * y[t - 1]).collect();
        let m = e.iter().sum::<f64>() / e.len() as f64;
        let init = e.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (e.len() - 1) as f64;
        let lg = |x: f64| statrs::function::gamma::ln_gamma(x);
        let c = lg((nu + 1.0) / 2.0) - lg(nu / 2.0) - 0.5 * ((nu - 2.0) * std::f64::consts::PI).ln();
        let (mut s2, mut prev_e2) = (0.0, init);
        let mut nll = 0.0;
        for (t, et) in e.iter().enumerate() {
            s2 = omega + alpha * prev_e2 + beta * if t == 0 { init } else { s2 };
            nll -= c - 0.5 * s2.ln() - (nu + 1.0) / 2.0 * (1.0 + et * et / ((nu - 2.0) * s2)).ln();
            prev_e2 = et * et;
        }
        nll
    }

    #[test]
    fn recovery_within_oracle_standard_errors() {
        let y = simulate(4000, 0.5, 0.1, 0.1, 0.8, 6.0, 99);
        let spec = ArimaSpec::new(1, 0, 0).unwrap();
        let m = fit_arima_garch_t(&y, spec, 1, 1).unwrap();
        let est = [m.arima.a, m.arima.phi[0], m.omega, m.alpha[0], m.beta[0], m.nu];
        let truth = [0.0, 0.5, 0.1, 0.1, 0.8, 6.0];
        let mut f = |x: &[f64]| oracle_negll(&y, x);
        let (_, hess, _) = fd_gradient_hessian(&mut f, &est, 1e-4);
        let cov = covariance_from_hessian(&hess).expect("information matrix is invertible");
        for i in 0..6 {
            let se = cov[i][i].sqrt();
            assert!((est[i] - truth[i]).abs() < 3.0 * se, "param {i}: {} vs {} (se {se})", est[i], truth[i]);
            assert!((se - m.std_errors[i]).abs() < 0.05 * se, "se {i}: {se} vs {}", m.std_errors[i]);
        }
        // the oracle and the model agree on the likelihood and its stationarity
        assert!((oracle_negll(&y, &est) + m.loglik).abs() < 1e-8);
        // small steps: the curvature in (omega, alpha, beta) is large
        let (grad, _, _) = fd_gradient_hessian(&mut f, &est, 1e-6);
        assert!(grad.iter().all(|g| g.abs() < 1e-3), "{grad:?}");
    }

    #[test]
    fn constant_variance_gives_small_persistence() {
        // With no ARCH effect beta is only weakly identified, so a sample can
        // still favour a slow variance drift; require low persistence on
        // most seeds and negligible ARCH terms on all.
        let mut low = 0;
        for seed in 0..10 {
            let y = simulate(3000, 0.3, 1.0, 0.0, 0.0, 8.0, seed);
            let m = fit_arima_garch_t(&y, ArimaSpec::new(1, 0, 0).unwrap(), 1, 1).unwrap();
            assert!(m.alpha[0] < 0.05, "seed {seed}: alpha {}", m.alpha[0]);
            if m.alpha[0] + m.beta[0] < 0.1 {
                low += 1;
            }
        }
        assert!(low >= 6, "{low}/10 seeds with alpha + beta < 0.1");
    }

    #[test]
    fn filter_with_only_omega_is_flat() {
        let e = [0.5, -2.0, 3.0, 0.1];
        let s = garch_filter(&e, 0.7, &[0.0], &[0.0], 4.0);
        assert!(s.iter().all(|v| *v == 0.7));
    }

    #[test]
    fn path_matches_training_recursion() {
        let y = simulate(1500, 0.4, 0.2, 0.15, 0.7, 7.0, 12);
        let m = fit_arima_garch_t(&y, ArimaSpec::new(1, 0, 0).unwrap(), 1, 1).unwrap();
        let path = m.path(&y);
        assert!(path[0].is_none());
        let last = path[y.len()].unwrap();
        assert!((last.sigma2 - m.last_sigma2).abs() < 1e-12 * m.last_sigma2);
        assert!((last.loc - (m.arima.a + m.arima.phi[0] * y[y.len() - 1])).abs() < 1e-12);
        assert!(path.iter().flatten().all(|s| s.sigma2 > 0.0));
    }

    #[test]
    fn too_short_series_rejected() {
        let y = simulate(100, 0.4, 0.2, 0.15, 0.7, 7.0, 1);
        assert!(fit_arima_garch_t(&y, ArimaSpec::new(1, 0, 0).unwrap(), 1, 1).is_err());
    }
}
