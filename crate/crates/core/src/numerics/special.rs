//! Special functions: normal and Student-t distribution functions, the
//! bivariate normal orthant probability, and the Debye function.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::{beta, erf, gamma};

use super::quad;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal quantile.
pub fn norm_ppf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erf::erfc_inv(2.0 * p);
    // One Halley step on the side with the small tail probability.
    let (f, q) = if x <= 0.0 { (norm_cdf(x) - p, norm_pdf(x)) } else { (p - 1.0 + norm_cdf(-x), norm_pdf(x)) };
    if q <= 0.0 || !f.is_finite() {
        return x;
    }
    let r = f / q;
    x - r / (1.0 + 0.5 * x * r)
}

/// `ln Φ(x)`, accurate far into the lower tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        norm_cdf(x).ln()
    } else {
        // Asymptotic Mills-ratio expansion.
        let z2 = x * x;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - LN_SQRT_2PI - (-x).ln() + series.ln()
    }
}

/// Log density of the standard Student-t with `nu` degrees of freedom.
pub fn t_ln_pdf(x: f64, nu: f64) -> f64 {
    t_ln_norm(nu) - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

/// Normalizing constant of the Student-t density on log scale.
pub fn t_ln_norm(nu: f64) -> f64 {
    gamma::ln_gamma(0.5 * (nu + 1.0)) - gamma::ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln()
}

pub fn t_pdf(x: f64, nu: f64) -> f64 {
    t_ln_pdf(x, nu).exp()
}

pub fn t_cdf(x: f64, nu: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let x2 = x * x;
    // Tail probability P(T > |x|); switch incomplete-beta argument for
    // small |x| to keep precision near the median.
    let tail = if x2 < nu {
        0.5 - 0.5 * beta::beta_reg(0.5, 0.5 * nu, x2 / (nu + x2))
    } else {
        0.5 * beta::beta_reg(0.5 * nu, 0.5, nu / (nu + x2))
    };
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Student-t quantile, polished by Newton steps on the cdf.
pub fn t_ppf(p: f64, nu: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    let lower = p.min(1.0 - p);
    let y = beta::inv_beta_reg(0.5 * nu, 0.5, 2.0 * lower);
    let mut x = -(nu * (1.0 - y) / y).sqrt();
    if !x.is_finite() {
        x = norm_ppf(lower);
    }
    let ln_norm = t_ln_norm(nu);
    // Newton on the lower-tail probability, which is well conditioned.
    for _ in 0..6 {
        let f = t_cdf(x, nu) - lower;
        let dens = (ln_norm - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()).exp();
        if dens <= 0.0 || !dens.is_finite() {
            break;
        }
        let step = f / dens;
        let next = x - step;
        if !next.is_finite() || next > 0.0 {
            break;
        }
        x = next;
        if step.abs() <= 1e-15 * x.abs().max(1e-300) {
            break;
        }
    }
    if p > 0.5 {
        -x
    } else {
        x
    }
}

const GL_W: [[f64; 10]; 3] = [
    [
        0.171_324_492_379_170_5,
        0.360_761_573_048_138_4,
        0.467_913_934_572_690_4,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.047_175_336_386_511_77,
        0.106_939_325_995_318_3,
        0.160_078_328_543_346_4,
        0.203_167_426_723_065_9,
        0.233_492_536_538_354_7,
        0.249_147_045_813_402_9,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.017_614_007_139_152_12,
        0.040_601_429_800_386_94,
        0.062_672_048_334_109_06,
        0.083_276_741_576_704_75,
        0.101_930_119_817_240_4,
        0.118_194_531_961_518_4,
        0.131_688_638_449_176_6,
        0.142_096_109_318_382_1,
        0.149_172_986_472_603_7,
        0.152_753_387_130_725_9,
    ],
];

const GL_X: [[f64; 10]; 3] = [
    [
        -0.932_469_514_203_152_2,
        -0.661_209_386_466_264_7,
        -0.238_619_186_083_197,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        -0.981_560_634_246_719_1,
        -0.904_117_256_370_475,
        -0.769_902_674_194_305,
        -0.587_317_954_286_617_1,
        -0.367_831_498_998_180_2,
        -0.125_233_408_511_469_2,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        -0.993_128_599_185_094_9,
        -0.963_971_927_277_913_8,
        -0.912_234_428_251_325_9,
        -0.839_116_971_822_218_8,
        -0.746_331_906_460_150_8,
        -0.636_053_680_726_515,
        -0.510_867_001_950_827_1,
        -0.373_706_088_715_419_6,
        -0.227_785_851_141_645_1,
        -0.076_526_521_133_497_33,
    ],
];

/// Upper orthant probability `P(X > dh, Y > dk)` for a standard bivariate
/// normal with correlation `r` (Genz's BVND, after Drezner and Wesolowsky).
fn bvnd(dh: f64, dk: f64, r: f64) -> f64 {
    let (ng, lg) = if r.abs() < 0.3 {
        (0, 3)
    } else if r.abs() < 0.75 {
        (1, 6)
    } else {
        (2, 10)
    };
    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = r.asin();
        for i in 0..lg {
            for sign in [-1.0, 1.0] {
                let sn = (asr * (1.0 + sign * GL_X[ng][i]) / 2.0).sin();
                bvn += GL_W[ng][i] * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / (4.0 * PI) + norm_cdf(-h) * norm_cdf(-k);
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let as_ = (1.0 - r) * (1.0 + r);
            let mut a = as_.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            bvn = a
                * (-(bs / as_ + hk) / 2.0).exp()
                * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
            if hk > -160.0 {
                let b = bs.sqrt();
                bvn -= (-hk / 2.0).exp()
                    * (2.0 * PI).sqrt()
                    * norm_cdf(-b / a)
                    * b
                    * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for i in 0..lg {
                for sign in [-1.0, 1.0] {
                    let xs = (a * (sign * GL_X[ng][i] + 1.0)).powi(2);
                    let rs = (1.0 - xs).sqrt();
                    let asr = -(bs / xs + hk) / 2.0;
                    if asr > -100.0 {
                        bvn += a
                            * GL_W[ng][i]
                            * asr.exp()
                            * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                                - (1.0 + c * xs * (1.0 + d * xs)));
                    }
                }
            }
            bvn = -bvn / (2.0 * PI);
        }
        if r > 0.0 {
            bvn += norm_cdf(-h.max(k));
        } else {
            bvn = -bvn;
            if k > h {
                if h < 0.0 {
                    bvn += norm_cdf(k) - norm_cdf(h);
                } else {
                    bvn += norm_cdf(-h) - norm_cdf(-k);
                }
            }
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// `P(X ≤ x, Y ≤ y)` for a standard bivariate normal with correlation `rho`.
pub fn bvn_cdf(x: f64, y: f64, rho: f64) -> f64 {
    if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return norm_cdf(y);
    }
    if y == f64::INFINITY {
        return norm_cdf(x);
    }
    bvnd(-x, -y, rho)
}

/// First-order Debye function `D₁(x) = x⁻¹ ∫₀ˣ t/(eᵗ−1) dt`, for any real x.
pub fn debye1(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x < 0.0 {
        return debye1(-x) - x / 2.0;
    }
    if x < 1e-4 {
        return 1.0 - x / 4.0 + x * x / 36.0;
    }
    let integrand = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    quad::integrate(integrand, 0.0, x, 1e-14, 1e-13).value / x
}
