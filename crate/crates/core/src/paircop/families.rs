//! Unrotated family formulas. Every family here is exchangeable, so only the
//! h-function conditioning on the second argument is implemented;
//! `h₁(u, v) = h₂(v, u)`.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use super::Family;
use crate::numerics::optim::bisect;
use crate::numerics::quad;
use crate::numerics::special::{bvn_cdf, debye1, norm_cdf, norm_ppf, t_cdf, t_ppf};

/// `ln(eᵃ + eᵇ)`.
fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln(eᵃ + eᵇ − 1)` for `a, b ≥ 0`.
fn log_clayton_sum(a: f64, b: f64) -> f64 {
    let (m, s) = if a >= b { (a, b) } else { (b, a) };
    m + ((-m).exp() * s.exp_m1()).ln_1p()
}

pub(crate) fn t_const(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 2.0)) + ln_gamma(0.5 * nu) - 2.0 * ln_gamma(0.5 * (nu + 1.0))
}

pub(crate) fn ln_pdf(family: Family, p: &[f64], u: f64, v: f64) -> f64 {
    match family {
        Family::Independence => 0.0,
        Family::Gaussian => {
            let rho = p[0];
            gauss_ln_pdf_quantiles(rho, norm_ppf(u), norm_ppf(v))
        }
        Family::StudentT => {
            let (rho, nu) = (p[0], p[1]);
            t_ln_pdf_quantiles(rho, nu, t_const(nu), t_ppf(u, nu), t_ppf(v, nu))
        }
        Family::Clayton => {
            let th = p[0];
            let (lu, lv) = (u.ln(), v.ln());
            let la = log_clayton_sum(-th * lu, -th * lv);
            th.ln_1p() - (1.0 + th) * (lu + lv) - (2.0 + 1.0 / th) * la
        }
        Family::Gumbel => {
            let th = p[0];
            let (x, y) = (-u.ln(), -v.ln());
            let (lx, ly) = (x.ln(), y.ln());
            let ls = log_sum_exp(th * lx, th * ly);
            let a = (ls / th).exp();
            -a + x + y + (th - 1.0) * (lx + ly) + (1.0 / th - 2.0) * ls + (a + th - 1.0).ln()
        }
        Family::Frank => {
            let th = p[0];
            if th.abs() < 1e-10 {
                return 0.0;
            }
            let d = frank_denominator(th, u, v);
            let e1 = -(-th).exp_m1();
            (th * e1).ln() - th * (u + v) - 2.0 * d.abs().ln()
        }
        Family::Joe => {
            let th = p[0];
            let (lub, lvb) = ((-u).ln_1p(), (-v).ln_1p());
            let ls = bb8_ln_w(th, 1.0, u, v);
            (1.0 / th - 2.0) * ls + (th - 1.0) * (lub + lvb) + (th - 1.0 + ls.exp()).ln()
        }
        Family::Bb1 => {
            let (th, de) = (p[0], p[1]);
            let (lu, lv) = (u.ln(), v.ln());
            let lx = (-th * lu).exp_m1().ln();
            let ly = (-th * lv).exp_m1().ln();
            let ls = log_sum_exp(de * lx, de * ly);
            let a = (ls / de).exp();
            (-1.0 / th - 2.0) * a.ln_1p() + (1.0 / de - 2.0) * ls
                + (th * (de - 1.0) + (th * de + 1.0) * a).ln()
                + (de - 1.0) * (lx + ly)
                - (th + 1.0) * (lu + lv)
        }
        Family::Bb8 => {
            let (th, de) = (p[0], p[1]);
            let ln_eta = bb8_ln_eta(th, de);
            let (l1u, l1v) = ((-de * u).ln_1p(), (-de * v).ln_1p());
            let lw = bb8_ln_w(th, de, u, v);
            de.ln() + (th - 1.0) * (l1u + l1v) - ln_eta + (1.0 / th - 2.0) * lw + (th - 1.0 + lw.exp()).ln()
        }
    }
}

/// Student-t copula log-density written on the t quantile scale, so fits
/// can reuse quantiles across evaluations with the same ν.
pub(crate) fn t_ln_pdf_quantiles(rho: f64, nu: f64, konst: f64, x: f64, y: f64) -> f64 {
    let s = 1.0 - rho * rho;
    konst - 0.5 * s.ln() - 0.5 * (nu + 2.0) * ((x * x + y * y - 2.0 * rho * x * y) / (nu * s)).ln_1p()
        + 0.5 * (nu + 1.0) * ((x * x / nu).ln_1p() + (y * y / nu).ln_1p())
}

/// Gaussian copula log-density on the normal quantile scale.
pub(crate) fn gauss_ln_pdf_quantiles(rho: f64, x: f64, y: f64) -> f64 {
    let s = 1.0 - rho * rho;
    -0.5 * s.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * s)
}

fn bb8_ln_eta(th: f64, de: f64) -> f64 {
    if de >= 1.0 {
        0.0
    } else {
        (-(th * (-de).ln_1p()).exp_m1()).ln()
    }
}

/// `ln(1 − x·y/η)` with `x = 1 − (1−δu)^θ`, `y = 1 − (1−δv)^θ` and
/// `η = 1 − (1−δ)^θ`; Joe is the case `δ = 1`. Written as
/// `ln(A(1 − B) + (B − E)) − ln η` with `A = (1−δu)^θ`, `B = (1−δv)^θ`,
/// `E = (1−δ)^θ`, which stays accurate near `(1, 1)` where the direct form
/// cancels to zero.
fn bb8_ln_w(th: f64, de: f64, u: f64, v: f64) -> f64 {
    let la = th * (-de * u).ln_1p();
    let lb = th * (-de * v).ln_1p();
    let ln_one_minus_b = (-lb.exp_m1()).ln();
    let ln_b_minus_e = if de >= 1.0 {
        lb
    } else {
        th * (-de).ln_1p() + (th * (de * (1.0 - v) / (1.0 - de)).ln_1p()).exp_m1().ln()
    };
    log_sum_exp(la + ln_one_minus_b, ln_b_minus_e) - bb8_ln_eta(th, de)
}

/// `e^{−θu}(1 − e^{−θv}) + e^{−θ}(e^{θ(1−v)} − 1)`, the Frank density
/// denominator written without cancellation.
fn frank_denominator(th: f64, u: f64, v: f64) -> f64 {
    (-th * u).exp() * (-(-th * v).exp_m1()) + (-th).exp() * (th * (1.0 - v)).exp_m1()
}

/// `∂C(u, v)/∂v`.
pub(crate) fn h2(family: Family, p: &[f64], u: f64, v: f64) -> f64 {
    let h = match family {
        Family::Independence => u,
        Family::Gaussian => {
            let rho = p[0];
            norm_cdf((norm_ppf(u) - rho * norm_ppf(v)) / (1.0 - rho * rho).sqrt())
        }
        Family::StudentT => {
            let (rho, nu) = (p[0], p[1]);
            let (x, y) = (t_ppf(u, nu), t_ppf(v, nu));
            let scale = ((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
            t_cdf((x - rho * y) / scale, nu + 1.0)
        }
        Family::Clayton => {
            let th = p[0];
            let (lu, lv) = (u.ln(), v.ln());
            let la = log_clayton_sum(-th * lu, -th * lv);
            ((-th - 1.0) * lv + (-1.0 / th - 1.0) * la).exp()
        }
        Family::Gumbel => {
            let th = p[0];
            let (x, y) = (-u.ln(), -v.ln());
            let ls = log_sum_exp(th * x.ln(), th * y.ln());
            let a = (ls / th).exp();
            (-a + y + (1.0 / th - 1.0) * ls + (th - 1.0) * y.ln()).exp()
        }
        Family::Frank => {
            let th = p[0];
            if th.abs() < 1e-10 {
                return u;
            }
            let a = -(-th * u).exp_m1();
            (-th * v).exp() * a / frank_denominator(th, u, v)
        }
        Family::Joe => {
            let th = p[0];
            let (lub, lvb) = ((-u).ln_1p(), (-v).ln_1p());
            let one_a = -(th * lub).exp_m1();
            let ls = bb8_ln_w(th, 1.0, u, v);
            ((th - 1.0) * lvb + one_a.ln() + (1.0 / th - 1.0) * ls).exp()
        }
        Family::Bb1 => {
            let (th, de) = (p[0], p[1]);
            let (lu, lv) = (u.ln(), v.ln());
            let lx = (-th * lu).exp_m1().ln();
            let ly = (-th * lv).exp_m1().ln();
            let ls = log_sum_exp(de * lx, de * ly);
            let a = (ls / de).exp();
            ((-1.0 / th - 1.0) * a.ln_1p() + (1.0 / de - 1.0) * ls + (de - 1.0) * ly - (th + 1.0) * lv).exp()
        }
        Family::Bb8 => {
            let (th, de) = (p[0], p[1]);
            let ln_eta = bb8_ln_eta(th, de);
            let l1v = (-de * v).ln_1p();
            let x = -(th * (-de * u).ln_1p()).exp_m1();
            let lw = bb8_ln_w(th, de, u, v);
            ((1.0 / th - 1.0) * lw + x.ln() + (th - 1.0) * l1v - ln_eta).exp()
        }
    };
    if h.is_nan() {
        // 0·∞ style corner cases at the boundary of the unit square
        u
    } else {
        h.clamp(0.0, 1.0)
    }
}

/// Solves `h₂(u, v) = w` for `u`.
pub(crate) fn h2_inv(family: Family, p: &[f64], w: f64, v: f64) -> Option<f64> {
    match family {
        Family::Independence => Some(w),
        Family::Gaussian => {
            let rho = p[0];
            Some(norm_cdf(rho * norm_ppf(v) + (1.0 - rho * rho).sqrt() * norm_ppf(w)))
        }
        Family::StudentT => {
            let (rho, nu) = (p[0], p[1]);
            let y = t_ppf(v, nu);
            let scale = ((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
            Some(t_cdf(t_ppf(w, nu + 1.0) * scale + rho * y, nu))
        }
        Family::Clayton => {
            let th = p[0];
            let inner = (-th * v.ln()).exp() * (-th / (1.0 + th) * w.ln()).exp_m1();
            Some((-inner.ln_1p() / th).exp())
        }
        Family::Frank => {
            let th = p[0];
            if th.abs() < 1e-10 {
                return Some(w);
            }
            let e1 = -(-th).exp_m1();
            let b = -(-th * v).exp_m1();
            let a = w * e1 / ((-th * v).exp() + w * b);
            Some(-(-a).ln_1p() / th)
        }
        _ => numeric_h2_inv(family, p, w, v),
    }
}

/// Safeguarded Newton on `u ↦ h₂(u, v) − w`, using the density as the
/// derivative and falling back to bisection whenever a step leaves the
/// bracket.
fn numeric_h2_inv(family: Family, p: &[f64], w: f64, v: f64) -> Option<f64> {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut u = w.clamp(1e-12, 1.0 - 1e-12);
    for _ in 0..200 {
        let f = h2(family, p, u, v) - w;
        if f.abs() < 1e-14 {
            return Some(u);
        }
        if f < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let dens = ln_pdf(family, p, u, v).exp();
        let mut next = u - f / dens;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-17 + 1e-15 * u.abs().min((1.0 - u).abs()) {
            return Some(next);
        }
        u = next;
        if hi - lo < 1e-300 {
            return Some(u);
        }
    }
    None
}

/// `C(u, v)` for interior arguments.
pub(crate) fn cdf(family: Family, p: &[f64], u: f64, v: f64) -> f64 {
    let c = match family {
        Family::Independence => u * v,
        Family::Gaussian => bvn_cdf(norm_ppf(u), norm_ppf(v), p[0]),
        Family::StudentT => {
            // ∫₀ᵛ h₂(u | s) ds
            quad::integrate(|s| h2(family, p, u, s), 0.0, v, 1e-14, 1e-12).value
        }
        Family::Clayton => {
            let th = p[0];
            (-log_clayton_sum(-th * u.ln(), -th * v.ln()) / th).exp()
        }
        Family::Gumbel => {
            let th = p[0];
            let ls = log_sum_exp(th * (-u.ln()).ln(), th * (-v.ln()).ln());
            (-(ls / th).exp()).exp()
        }
        Family::Frank => {
            let th = p[0];
            if th.abs() < 1e-10 {
                return u * v;
            }
            let a = -(-th * u).exp_m1();
            let b = -(-th * v).exp_m1();
            let e1 = -(-th).exp_m1();
            -(-a * b / e1).ln_1p() / th
        }
        Family::Joe => {
            let th = p[0];
            -(bb8_ln_w(th, 1.0, u, v) / th).exp_m1()
        }
        Family::Bb1 => {
            let (th, de) = (p[0], p[1]);
            let lx = (-th * u.ln()).exp_m1().ln();
            let ly = (-th * v.ln()).exp_m1().ln();
            let a = (log_sum_exp(de * lx, de * ly) / de).exp();
            (-a.ln_1p() / th).exp()
        }
        Family::Bb8 => {
            let (th, de) = (p[0], p[1]);
            -(bb8_ln_w(th, de, u, v) / th).exp_m1() / de
        }
    };
    // Fréchet–Hoeffding bounds
    c.clamp((u + v - 1.0).max(0.0), u.min(v))
}

/// `1 + 4 ∫₀¹ φ(t)/φ'(t) dt` for an Archimedean generator ratio.
fn archimedean_tau<F: Fn(f64) -> f64>(ratio: F) -> f64 {
    1.0 + 4.0 * quad::integrate(ratio, 0.0, 1.0, 1e-14, 1e-13).value
}

/// Kendall's τ of the unrotated family.
pub(crate) fn tau(family: Family, p: &[f64]) -> f64 {
    match family {
        Family::Independence => 0.0,
        Family::Gaussian | Family::StudentT => 2.0 / PI * p[0].asin(),
        Family::Clayton => p[0] / (p[0] + 2.0),
        Family::Gumbel => 1.0 - 1.0 / p[0],
        Family::Frank => {
            let th = p[0];
            if th.abs() < 1e-10 {
                0.0
            } else {
                1.0 - 4.0 / th * (1.0 - debye1(th))
            }
        }
        Family::Joe => {
            let th = p[0];
            archimedean_tau(|t| {
                let s = 1.0 - t;
                let s_th = s.powf(th);
                let denom = th * s.powf(th - 1.0);
                if s_th < 1e-300 || denom == 0.0 {
                    return -s / th;
                }
                let g = -(th * (-t).ln_1p()).exp_m1();
                (-s_th).ln_1p() * g / denom
            })
        }
        Family::Bb1 => 1.0 - 2.0 / (p[1] * (p[0] + 2.0)),
        Family::Bb8 => {
            let (th, de) = (p[0], p[1]);
            let ln_eta = bb8_ln_eta(th, de);
            archimedean_tau(|t| {
                let l1 = (-de * t).ln_1p();
                let g = -(th * l1).exp_m1();
                if g <= 0.0 {
                    return 0.0;
                }
                let denom = th * de * ((th - 1.0) * l1).exp();
                if denom == 0.0 {
                    return 0.0;
                }
                (g.ln() - ln_eta) * g / denom
            })
        }
    }
}

/// Parameter bounds used for validation and as the fitting box.
pub(crate) fn bounds(family: Family) -> &'static [(f64, f64)] {
    match family {
        Family::Independence => &[],
        Family::Gaussian => &[(-0.9999, 0.9999)],
        Family::StudentT => &[(-0.9999, 0.9999), (2.0001, 50.0)],
        Family::Clayton => &[(1e-4, 28.0)],
        Family::Gumbel => &[(1.0, 17.0)],
        Family::Frank => &[(-35.0, 35.0)],
        Family::Joe => &[(1.0001, 30.0)],
        Family::Bb1 => &[(1e-4, 7.0), (1.0, 7.0)],
        Family::Bb8 => &[(1.0, 8.0), (1e-4, 1.0)],
    }
}

/// Inverts τ for the unrotated family (τ ≥ 0 except for the symmetric
/// families that reach negative dependence without rotation).
pub(crate) fn tau_to_params(family: Family, tau: f64) -> Option<Vec<f64>> {
    let in_open = |lo: f64, hi: f64| tau > lo && tau < hi;
    match family {
        Family::Independence => (tau.abs() < 1e-12).then(Vec::new),
        Family::Gaussian => in_open(-1.0, 1.0).then(|| vec![(PI * tau / 2.0).sin()]),
        Family::StudentT => in_open(-1.0, 1.0).then(|| vec![(PI * tau / 2.0).sin(), 8.0]),
        Family::Clayton => in_open(0.0, 1.0).then(|| vec![2.0 * tau / (1.0 - tau)]),
        Family::Gumbel => (tau >= 0.0 && tau < 1.0).then(|| vec![1.0 / (1.0 - tau)]),
        Family::Frank => {
            if tau == 0.0 {
                return Some(vec![0.0]);
            }
            let (lo, hi) = if tau > 0.0 { (1e-9, 100.0) } else { (-100.0, -1e-9) };
            let f = |th: f64| self::tau(Family::Frank, &[th]) - tau;
            if f(lo).signum() == f(hi).signum() {
                return None;
            }
            Some(vec![bisect(f, lo, hi, 1e-13, 200)])
        }
        Family::Joe => {
            if !(tau > 0.0 && tau < 1.0) {
                return None;
            }
            let f = |th: f64| self::tau(Family::Joe, &[th]) - tau;
            let hi = 200.0;
            if f(hi) < 0.0 {
                return None;
            }
            Some(vec![bisect(f, 1.0, hi, 1e-12, 200)])
        }
        Family::Bb1 => {
            // Split 1−τ evenly between the Clayton and Gumbel factors:
            // 1 − τ = (1 − τ_C)(1 − τ_G) with τ_C = τ_G.
            if !(tau > 0.0 && tau < 1.0) {
                return None;
            }
            let part = 1.0 - (1.0 - tau).sqrt();
            Some(vec![2.0 * part / (1.0 - part), 1.0 / (1.0 - part)])
        }
        Family::Bb8 => {
            if !(tau > 0.0 && tau < 1.0) {
                return None;
            }
            let de = BB8_TAU_DELTA;
            let f = |th: f64| self::tau(Family::Bb8, &[th, de]) - tau;
            let hi = 500.0;
            if f(hi) < 0.0 {
                return None;
            }
            Some(vec![bisect(f, 1.0, hi, 1e-12, 200), de])
        }
    }
}

/// BB8 is inverted from τ along the slice with this fixed δ.
pub(crate) const BB8_TAU_DELTA: f64 = 0.9;
