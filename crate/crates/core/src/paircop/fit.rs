//! Maximum-likelihood fitting of a single pair-copula and family selection
//! by information criterion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::families::{self, gauss_ln_pdf_quantiles, t_const, t_ln_pdf_quantiles};
use super::{clamp_unit, Family, PairCopula, Rotation};
use crate::error::{Error, Result};
use crate::numerics::optim::{brent_minimize, nelder_mead, NelderMeadOptions};
use crate::numerics::special::{norm_ppf, t_ppf};
use crate::numerics::stats::{kendall_independence_pvalue, kendall_tau};

pub const MIN_PAIR_OBSERVATIONS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Aic,
    Bic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFitOptions {
    pub families: Vec<Family>,
    pub criterion: Criterion,
    /// Short-circuit to the independence copula when Kendall's τ̂ is not
    /// significant. Only applies if Independence is among `families`.
    pub independence_test: bool,
    pub significance: f64,
}

impl Default for PairFitOptions {
    fn default() -> Self {
        PairFitOptions {
            families: Family::ALL.to_vec(),
            criterion: Criterion::Aic,
            independence_test: true,
            significance: 0.05,
        }
    }
}

impl PairFitOptions {
    pub fn only(family: Family) -> Self {
        PairFitOptions {
            families: vec![family],
            independence_test: family == Family::Independence,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFit {
    pub copula: PairCopula,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n: usize,
    pub tau_hat: f64,
}

impl PairFit {
    fn new(copula: PairCopula, loglik: f64, n: usize, tau_hat: f64) -> Self {
        let k = copula.n_params() as f64;
        PairFit {
            aic: -2.0 * loglik + 2.0 * k,
            bic: -2.0 * loglik + k * (n as f64).ln(),
            copula,
            loglik,
            n,
            tau_hat,
        }
    }

    pub fn score(&self, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Aic => self.aic,
            Criterion::Bic => self.bic,
        }
    }
}

fn check_pairs(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::Mismatch(format!("pair series lengths differ: {} vs {}", u.len(), v.len())));
    }
    if u.len() < MIN_PAIR_OBSERVATIONS {
        return Err(Error::invalid(format!(
            "pair-copula fit needs at least {MIN_PAIR_OBSERVATIONS} observations, got {}",
            u.len()
        )));
    }
    if let Some(x) = u.iter().chain(v).find(|x| !(x.is_finite() && **x > 0.0 && **x < 1.0)) {
        return Err(Error::invalid(format!("u-data must lie in (0, 1), found {x}")));
    }
    Ok(())
}

/// Family × rotation candidates compatible with the sign of τ̂, sorted by
/// family tag then rotation.
fn candidates(families: &[Family], tau_hat: f64) -> Vec<(Family, Rotation)> {
    let mut fams: Vec<Family> = families.to_vec();
    fams.sort();
    fams.dedup();
    let mut out = Vec::new();
    for f in fams {
        if f == Family::Independence {
            continue;
        }
        if f.is_asymmetric() {
            if tau_hat >= 0.0 {
                out.push((f, Rotation::R0));
                out.push((f, Rotation::R180));
            } else {
                out.push((f, Rotation::R90));
                out.push((f, Rotation::R270));
            }
        } else {
            out.push((f, Rotation::R0));
        }
    }
    out
}

/// Selects the best family (and rotation) for the pair `(u, v)`.
pub fn fit_pair(u: &[f64], v: &[f64], opts: &PairFitOptions) -> Result<PairFit> {
    check_pairs(u, v)?;
    if opts.families.is_empty() {
        return Err(Error::invalid("empty family set"));
    }
    let n = u.len();
    let tau_hat = kendall_tau(u, v)?;
    let has_indep = opts.families.contains(&Family::Independence);
    if has_indep
        && opts.independence_test
        && kendall_independence_pvalue(tau_hat, n) > opts.significance
    {
        return Ok(PairFit::new(PairCopula::independence(), 0.0, n, tau_hat));
    }

    let cands = candidates(&opts.families, tau_hat);
    let results: Vec<((Family, Rotation), Result<PairFit>)> = cands
        .par_iter()
        .map(|&(f, r)| ((f, r), fit_candidate(u, v, f, r, tau_hat)))
        .collect();

    let mut best: Option<PairFit> = if has_indep {
        Some(PairFit::new(PairCopula::independence(), 0.0, n, tau_hat))
    } else {
        None
    };
    let mut failures = Vec::new();
    for ((f, r), res) in results {
        match res {
            Ok(fit) => {
                let better = match &best {
                    None => true,
                    Some(b) => fit.score(opts.criterion) < b.score(opts.criterion),
                };
                if better {
                    best = Some(fit);
                }
            }
            Err(e) => failures.push(format!("{f}@{}: {e}", r.degrees())),
        }
    }
    best.ok_or_else(|| Error::NoConvergence {
        message: format!("no candidate pair-copula could be fitted [{}]", failures.join("; ")),
        iterations: 0,
        last: vec![tau_hat],
    })
}

/// Maximum-likelihood fit of one family and rotation.
pub fn fit_pair_family(u: &[f64], v: &[f64], family: Family, rotation: Rotation) -> Result<PairFit> {
    check_pairs(u, v)?;
    if rotation != Rotation::R0 && !family.is_asymmetric() {
        return Err(Error::invalid(format!("{family} does not admit rotations")));
    }
    let tau_hat = kendall_tau(u, v)?;
    if family == Family::Independence {
        return Ok(PairFit::new(PairCopula::independence(), 0.0, u.len(), tau_hat));
    }
    fit_candidate(u, v, family, rotation, tau_hat)
}

fn fit_candidate(u: &[f64], v: &[f64], family: Family, rotation: Rotation, tau_hat: f64) -> Result<PairFit> {
    let n = u.len();
    // Work on the unrotated scale: reflect the data instead of the copula.
    let (a, b): (Vec<f64>, Vec<f64>) = u
        .iter()
        .zip(v)
        .map(|(&x, &y)| {
            let (x, y) = (clamp_unit(x), clamp_unit(y));
            match rotation {
                Rotation::R0 => (x, y),
                Rotation::R90 => (1.0 - x, y),
                Rotation::R180 => (1.0 - x, 1.0 - y),
                Rotation::R270 => (x, 1.0 - y),
            }
        })
        .unzip();
    let base_tau = if rotation.negates() { -tau_hat } else { tau_hat };

    let (params, ll) = match family {
        Family::Independence => (Vec::new(), 0.0),
        Family::Gaussian => fit_gaussian(&a, &b)?,
        Family::StudentT => fit_student(&a, &b)?,
        Family::Frank => {
            let (lo, hi) = if base_tau >= 0.0 { (1e-4, 35.0) } else { (-35.0, -1e-4) };
            fit_scalar(&a, &b, family, lo, hi)?
        }
        f if f.n_params() == 1 => {
            let (lo, hi) = families::bounds(f)[0];
            fit_scalar(&a, &b, f, lo, hi)?
        }
        f => fit_two(&a, &b, f, base_tau)?,
    };
    if !ll.is_finite() {
        return Err(Error::numerical(format!("{family}: non-finite log-likelihood at {params:?}")));
    }
    let copula = PairCopula::new(family, rotation, params)?;
    Ok(PairFit::new(copula, ll, n, tau_hat))
}

fn base_loglik(a: &[f64], b: &[f64], family: Family, p: &[f64]) -> f64 {
    let ll: f64 = a.iter().zip(b).map(|(&x, &y)| families::ln_pdf(family, p, x, y)).sum();
    if ll.is_nan() {
        f64::NEG_INFINITY
    } else {
        ll
    }
}

fn fit_scalar(a: &[f64], b: &[f64], family: Family, lo: f64, hi: f64) -> Result<(Vec<f64>, f64)> {
    let (x, f) = brent_minimize(|t| -base_loglik(a, b, family, &[t]), lo, hi, 1e-10, 200)?;
    Ok((vec![x], -f))
}

fn fit_gaussian(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let (qa, qb): (Vec<f64>, Vec<f64>) = a.iter().zip(b).map(|(&x, &y)| (norm_ppf(x), norm_ppf(y))).unzip();
    let nll = |rho: f64| -> f64 {
        -qa.iter().zip(&qb).map(|(&x, &y)| gauss_ln_pdf_quantiles(rho, x, y)).sum::<f64>()
    };
    let (lo, hi) = families::bounds(Family::Gaussian)[0];
    let (rho, f) = brent_minimize(nll, lo, hi, 1e-12, 200)?;
    Ok((vec![rho], -f))
}

/// Student-t: profile the correlation for each ν (quantiles computed once
/// per ν), then minimize the profile over log ν.
fn fit_student(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let (rlo, rhi) = families::bounds(Family::StudentT)[0];
    let (nlo, nhi) = families::bounds(Family::StudentT)[1];
    let profile = |nu: f64| -> Result<(f64, f64)> {
        let konst = t_const(nu);
        let (qa, qb): (Vec<f64>, Vec<f64>) = a.iter().zip(b).map(|(&x, &y)| (t_ppf(x, nu), t_ppf(y, nu))).unzip();
        let nll = |rho: f64| -> f64 {
            let s: f64 = qa.iter().zip(&qb).map(|(&x, &y)| t_ln_pdf_quantiles(rho, nu, konst, x, y)).sum();
            if s.is_nan() {
                f64::INFINITY
            } else {
                -s
            }
        };
        brent_minimize(nll, rlo, rhi, 1e-10, 200)
    };
    let mut last_err = None;
    let (log_nu, f) = brent_minimize(
        |ln_nu| match profile(ln_nu.exp()) {
            Ok((_, f)) => f,
            Err(e) => {
                last_err = Some(e);
                f64::INFINITY
            }
        },
        nlo.ln(),
        nhi.ln(),
        1e-6,
        100,
    )?;
    if !f.is_finite() {
        return Err(last_err.unwrap_or_else(|| Error::numerical("student-t profile likelihood diverged")));
    }
    let nu = log_nu.exp();
    let (rho, f) = profile(nu)?;
    Ok((vec![rho, nu], -f))
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Two-parameter Archimedean families: simplex search in logistic-box
/// coordinates, started from τ-informed points.
fn fit_two(a: &[f64], b: &[f64], family: Family, tau: f64) -> Result<(Vec<f64>, f64)> {
    let bx = families::bounds(family);
    let to_params = |z: &[f64]| -> Vec<f64> {
        z.iter().zip(bx).map(|(&zi, &(lo, hi))| lo + (hi - lo) * logistic(zi)).collect()
    };
    let to_z = |p: &[f64]| -> Vec<f64> {
        p.iter()
            .zip(bx)
            .map(|(&pi, &(lo, hi))| {
                let s = ((pi - lo) / (hi - lo)).clamp(1e-6, 1.0 - 1e-6);
                (s / (1.0 - s)).ln()
            })
            .collect()
    };
    let t = tau.clamp(0.02, 0.95);
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(p) = families::tau_to_params(family, t) {
        starts.push(p);
    }
    match family {
        Family::Bb1 => {
            // Near-Clayton and near-Gumbel corners.
            starts.push(vec![2.0 * t / (1.0 - t), 1.01]);
            starts.push(vec![0.05, 1.0 / (1.0 - t)]);
        }
        Family::Bb8 => {
            starts.push(vec![1.0 / (1.0 - t) + 0.5, 0.99]);
            if let Some(th) = families::tau_to_params(Family::Joe, t) {
                starts.push(vec![th[0] * 1.5, 0.7]);
            }
        }
        _ => {}
    }
    let opts = NelderMeadOptions {
        max_evaluations: 1500,
        f_tol: 1e-8,
        // the likelihood flattens in logistic coordinates as a parameter
        // nears its bound, so the simplex never shrinks there; stop on f alone
        x_tol: f64::INFINITY,
        initial_step: vec![0.5],
        restarts: 1,
    };
    let nll = |z: &[f64]| -> f64 {
        let ll = base_loglik(a, b, family, &to_params(z));
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };
    let best = starts
        .iter()
        .map(|p| nelder_mead(nll, &to_z(p), &opts))
        .min_by(|x, y| x.value.total_cmp(&y.value))
        .ok_or_else(|| Error::invalid(format!("{family}: no admissible starting point")))?;
    if !best.value.is_finite() {
        return Err(Error::NoConvergence {
            message: format!("{family}: simplex search found no finite likelihood"),
            iterations: best.evaluations,
            last: to_params(&best.x),
        });
    }
    let p = to_params(&best.x);
    Ok((p, -best.value))
}
