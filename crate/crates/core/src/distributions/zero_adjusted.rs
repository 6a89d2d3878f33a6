//! Zero-adjusted gamma and inverse-Gaussian models: a point mass at zero
//! with probability `nu` and a positive continuous part whose mean follows
//! a log-linear time trend `mu(t) = exp(beta0 + beta1·t)`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use super::covariance_from_hessian;
use super::predictive::Predictive;
use crate::error::{Error, Result};
use crate::numerics::optim::{fd_gradient_hessian, nelder_mead, newton_polish, NelderMeadOptions};
use crate::numerics::special::{log_norm_cdf, norm_cdf};
use crate::numerics::stats::{mean, variance};

/// Continuous part, in the mean/dispersion parameterization with
/// `Var = sigma²·mu²` (gamma) or `sigma²·mu³` (inverse Gaussian).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZaFamily {
    Gamma,
    InverseGaussian,
}

impl ZaFamily {
    pub fn ln_pdf(&self, x: f64, mu: f64, sigma: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let s2 = sigma * sigma;
        match self {
            ZaFamily::Gamma => {
                let k = 1.0 / s2;
                let scale = s2 * mu;
                (k - 1.0) * x.ln() - x / scale - k * scale.ln() - ln_gamma(k)
            }
            ZaFamily::InverseGaussian => {
                -0.5 * (2.0 * std::f64::consts::PI * s2 * x * x * x).ln()
                    - (x - mu).powi(2) / (2.0 * mu * mu * s2 * x)
            }
        }
    }

    pub fn pdf(&self, x: f64, mu: f64, sigma: f64) -> f64 {
        self.ln_pdf(x, mu, sigma).exp()
    }

    pub fn cdf(&self, x: f64, mu: f64, sigma: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x.is_infinite() {
            return 1.0;
        }
        let s2 = sigma * sigma;
        match self {
            ZaFamily::Gamma => gamma_lr(1.0 / s2, x / (s2 * mu)),
            ZaFamily::InverseGaussian => {
                let r = sigma * x.sqrt();
                let a = (x / mu - 1.0) / r;
                let b = (x / mu + 1.0) / r;
                let second = (2.0 / (mu * s2) + log_norm_cdf(-b)).exp();
                (norm_cdf(a) + second).min(1.0)
            }
        }
    }

    /// Upper tail, used to keep precision when the cdf is near one.
    fn sf(&self, x: f64, mu: f64, sigma: f64) -> f64 {
        match self {
            ZaFamily::Gamma => {
                let s2 = sigma * sigma;
                gamma_ur(1.0 / s2, x / (s2 * mu))
            }
            ZaFamily::InverseGaussian => 1.0 - self.cdf(x, mu, sigma),
        }
    }

    /// Quantile by safeguarded Newton on `log x`.
    pub fn quantile(&self, p: f64, mu: f64, sigma: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        let upper = p > 0.5;
        let target = if upper { 1.0 - p } else { p };
        // g(s) increasing in s
        let g = |s: f64| {
            let x = s.exp();
            if upper {
                target - self.sf(x, mu, sigma)
            } else {
                self.cdf(x, mu, sigma) - target
            }
        };
        let mut lo = mu.ln() - 1.0;
        let mut hi = mu.ln() + 1.0;
        let mut step = 1.0;
        while g(lo) > 0.0 && lo > -745.0 {
            step *= 2.0;
            lo -= step;
        }
        step = 1.0;
        while g(hi) < 0.0 && hi < 709.0 {
            step *= 2.0;
            hi += step;
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..200 {
            let v = g(s);
            if v == 0.0 {
                break;
            }
            if v < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let x = s.exp();
            let dens = self.pdf(x, mu, sigma) * x;
            let mut next = s - v / dens;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let done = (next - s).abs() <= 1e-15 * (1.0 + s.abs());
            s = next;
            if done || hi - lo <= 1e-15 * (1.0 + s.abs()) {
                break;
            }
        }
        s.exp()
    }

    pub fn name(&self) -> &'static str {
        match self {
            ZaFamily::Gamma => "zero-adjusted gamma",
            ZaFamily::InverseGaussian => "zero-adjusted inverse Gaussian",
        }
    }
}

/// A fitted zero-adjusted model. Dispersion and zero mass are stored on
/// their link scales (`log sigma`, `logit nu`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroAdjustedModel {
    pub family: ZaFamily,
    pub beta0: f64,
    /// Trend per unit of the time index.
    pub beta1: f64,
    pub log_sigma: f64,
    pub logit_nu: f64,
    pub loglik: f64,
    pub aic: f64,
    pub n: usize,
    /// Standard errors of `(beta0, beta1, log_sigma, logit_nu)`.
    #[serde(with = "crate::numerics::nan_as_null")]
    pub std_errors: Vec<f64>,
}

pub type ZagaModel = ZeroAdjustedModel;
pub type ZaigModel = ZeroAdjustedModel;

impl ZeroAdjustedModel {
    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    pub fn nu(&self) -> f64 {
        1.0 / (1.0 + (-self.logit_nu).exp())
    }

    pub fn mu_at(&self, t: f64) -> f64 {
        (self.beta0 + self.beta1 * t).exp()
    }

    pub fn predictive(&self, t: f64) -> Predictive {
        Predictive::ZeroAdjusted {
            family: self.family,
            nu: self.nu(),
            mu: self.mu_at(t),
            sigma: self.sigma(),
        }
    }
}

/// Fits a zero-adjusted model to `x` with time covariate `t`.
pub fn fit_zero_adjusted(x: &[f64], t: &[f64], family: ZaFamily) -> Result<ZeroAdjustedModel> {
    if x.len() != t.len() {
        return Err(Error::invalid(format!("series has {} values but {} time points", x.len(), t.len())));
    }
    if let Some(i) = x.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid(format!("{}: value {} at index {i} is not a finite nonnegative number", family.name(), x[i])));
    }
    let n = x.len();
    let zeros = x.iter().filter(|v| **v == 0.0).count();
    if zeros == 0 {
        return Err(Error::invalid(format!(
            "{}: series has no zeros; fit a plain gamma or inverse-Gaussian model instead",
            family.name()
        )));
    }
    if zeros == n {
        return Err(Error::invalid(format!("{}: series is all zeros; use a degenerate point-mass model", family.name())));
    }
    let (xp, tp): (Vec<f64>, Vec<f64>) = x.iter().zip(t).filter(|(v, _)| **v > 0.0).map(|(v, s)| (*v, *s)).unzip();
    if xp.len() < 3 {
        return Err(Error::invalid(format!("{}: need at least 3 positive values, got {}", family.name(), xp.len())));
    }
    let nu = zeros as f64 / n as f64;

    // Optimize on a standardized time axis for conditioning.
    let t_mean = mean(&tp);
    let t_sd = {
        let v = variance(&tp).sqrt();
        if v > 0.0 { v } else { 1.0 }
    };
    let ts: Vec<f64> = tp.iter().map(|s| (s - t_mean) / t_sd).collect();
    let m = mean(&xp);
    let v = variance(&xp).max(1e-12 * m * m);
    let s2 = match family {
        ZaFamily::Gamma => v / (m * m),
        ZaFamily::InverseGaussian => v / (m * m * m),
    };
    let mut negll = |c: &[f64]| -> f64 {
        let sigma = c[2].exp();
        let mut s = 0.0;
        for (xi, ti) in xp.iter().zip(&ts) {
            s += family.ln_pdf(*xi, (c[0] + c[1] * ti).exp(), sigma);
        }
        if s.is_finite() {
            -s
        } else {
            f64::INFINITY
        }
    };
    let x0 = [m.ln(), 0.0, 0.5 * s2.ln()];
    let opts = NelderMeadOptions { max_evaluations: 4000, initial_step: vec![0.2], ..Default::default() };
    let min = nelder_mead(&mut negll, &x0, &opts);
    if !min.value.is_finite() {
        return Err(Error::numerical(format!("{}: likelihood is not finite at any trial point", family.name())));
    }
    let min = newton_polish(&mut negll, min, 6);
    if !min.converged && min.evaluations >= opts.max_evaluations {
        return Err(Error::NoConvergence {
            message: format!("{} fit", family.name()),
            iterations: min.evaluations,
            last: min.x,
        });
    }
    let c = min.x.clone();
    let (_, hess, _) = fd_gradient_hessian(&mut negll, &c, 1e-4);
    // Back to the raw time scale: beta0 = c0 − c1·m/s, beta1 = c1/s.
    let beta1 = c[1] / t_sd;
    let beta0 = c[0] - c[1] * t_mean / t_sd;
    let mut std_errors = vec![f64::NAN; 4];
    if let Some(cov) = covariance_from_hessian(&hess) {
        let a = -t_mean / t_sd;
        let b = 1.0 / t_sd;
        std_errors[0] = (cov[0][0] + 2.0 * a * cov[0][1] + a * a * cov[1][1]).max(0.0).sqrt();
        std_errors[1] = (b * b * cov[1][1]).max(0.0).sqrt();
        std_errors[2] = cov[2][2].max(0.0).sqrt();
    }
    std_errors[3] = (1.0 / (n as f64 * nu * (1.0 - nu))).sqrt();

    let loglik = zeros as f64 * nu.ln() + (n - zeros) as f64 * (1.0 - nu).ln() - min.value;
    Ok(ZeroAdjustedModel {
        family,
        beta0,
        beta1,
        log_sigma: c[2],
        logit_nu: (nu / (1.0 - nu)).ln(),
        loglik,
        aic: -2.0 * loglik + 8.0,
        n,
        std_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::integrate_to_infinity;
    use crate::numerics::rng::rng_from;
    use rand::Rng;
    use rand_distr::{Distribution, Gamma};

    #[test]
    fn densities_with_atom_integrate_to_one() {
        let mut rng = rng_from(11);
        for i in 0..20 {
            let fam = if i % 2 == 0 { ZaFamily::Gamma } else { ZaFamily::InverseGaussian };
            let mu = rng.random_range(0.2..20.0);
            let sigma = rng.random_range(0.2..1.5);
            let nu = rng.random_range(0.05..0.9);
            let mass = integrate_to_infinity(|x| fam.pdf(x, mu, sigma), 0.0, 1e-11, 1e-11).value;
            assert!((nu + (1.0 - nu) * mass - 1.0).abs() < 1e-6, "{fam:?} mu={mu} sigma={sigma}: {mass}");
        }
    }

    #[test]
    fn cdf_matches_integrated_density() {
        for fam in [ZaFamily::Gamma, ZaFamily::InverseGaussian] {
            for &(mu, sigma, x) in &[(2.0, 0.5, 1.3), (5.0, 0.9, 8.0), (0.5, 1.2, 0.05)] {
                let q = crate::numerics::quad::integrate(|s| fam.pdf(s, mu, sigma), 0.0, x, 1e-13, 1e-13).value;
                assert!((fam.cdf(x, mu, sigma) - q).abs() < 1e-9, "{fam:?} {mu} {sigma} {x}");
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for fam in [ZaFamily::Gamma, ZaFamily::InverseGaussian] {
            for &p in &[1e-9, 0.01, 0.3, 0.5, 0.9, 0.999_999] {
                let x = fam.quantile(p, 3.0, 0.8);
                assert!((fam.cdf(x, 3.0, 0.8) - p).abs() < 1e-12, "{fam:?} {p}");
            }
        }
    }

    #[test]
    fn gamma_mass_recovery() {
        // 30% zeros, positive part gamma with shape 2 and mean 5
        let mut rng = rng_from(2024);
        let g = Gamma::new(2.0, 2.5).unwrap();
        let n = 2000;
        let x: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { g.sample(&mut rng) }).collect();
        let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let m = fit_zero_adjusted(&x, &t, ZaFamily::Gamma).unwrap();
        assert!((0.27..=0.33).contains(&m.nu()), "nu {}", m.nu());
        let mid = m.mu_at(1000.0);
        assert!((4.7..=5.3).contains(&mid), "mean {mid}");
        // shape 2 means sigma = 1/sqrt(2)
        assert!((m.sigma() - 0.5f64.sqrt()).abs() < 4.0 * m.std_errors[2] * m.sigma(), "sigma {}", m.sigma());
    }

    #[test]
    fn no_trend_gives_flat_mean() {
        let mut rng = rng_from(5);
        let g = Gamma::new(3.0, 1.0).unwrap();
        let n = 1500;
        let x: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.0 } else { g.sample(&mut rng) }).collect();
        let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
        for fam in [ZaFamily::Gamma, ZaFamily::InverseGaussian] {
            let m = fit_zero_adjusted(&x, &t, fam).unwrap();
            assert!(m.beta1.abs() < 2.0 * m.std_errors[1], "{fam:?} beta1 {} se {}", m.beta1, m.std_errors[1]);
            assert!((m.nu() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let t = [0.0, 1.0, 2.0];
        let e = fit_zero_adjusted(&[1.0, 2.0, 3.0], &t, ZaFamily::Gamma).unwrap_err().to_string();
        assert!(e.contains("plain gamma"), "{e}");
        let e = fit_zero_adjusted(&[0.0, 0.0, 0.0], &t, ZaFamily::Gamma).unwrap_err().to_string();
        assert!(e.contains("degenerate"), "{e}");
        assert!(fit_zero_adjusted(&[0.0, -1.0, 3.0], &t, ZaFamily::Gamma).is_err());
    }
}
