//! One-step predictive distributions on the data scale. Every marginal
//! model reduces, at each time step, to one of these; PIT and inverse PIT
//! are their cdf and quantile.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::zero_adjusted::ZaFamily;
use crate::numerics::rng::open_uniform;
use crate::numerics::special::{norm_cdf, norm_ppf, t_cdf, t_ln_pdf, t_ppf};

/// PIT values are kept this far from 0 and 1.
pub const PIT_CLAMP: f64 = 1e-10;

pub fn clamp_pit(u: f64) -> f64 {
    u.clamp(PIT_CLAMP, 1.0 - PIT_CLAMP)
}

/// Unit-variance innovation law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Innovation {
    Normal,
    /// Student-t rescaled to unit variance (`nu > 2`).
    StudentT { nu: f64 },
}

impl Innovation {
    fn t_scale(nu: f64) -> f64 {
        ((nu - 2.0) / nu).sqrt()
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match *self {
            Innovation::Normal => norm_cdf(z),
            Innovation::StudentT { nu } => t_cdf(z / Self::t_scale(nu), nu),
        }
    }

    pub fn ppf(&self, u: f64) -> f64 {
        match *self {
            Innovation::Normal => norm_ppf(u),
            Innovation::StudentT { nu } => Self::t_scale(nu) * t_ppf(u, nu),
        }
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        match *self {
            Innovation::Normal => -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln(),
            Innovation::StudentT { nu } => {
                let s = Self::t_scale(nu);
                t_ln_pdf(z / s, nu) - s.ln()
            }
        }
    }
}

/// Maps model-scale values back to data: `x = g(offset + m)` where `g` is
/// the identity or `exp(·) − shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackTransform {
    /// Integration offset from differencing.
    pub offset: f64,
    pub log: bool,
    pub shift: f64,
}

impl BackTransform {
    pub fn to_data(&self, m: f64) -> f64 {
        let z = self.offset + m;
        if self.log {
            z.exp() - self.shift
        } else {
            z
        }
    }

    /// Inverse of [`to_data`](Self::to_data); `-inf` below the log support.
    pub fn to_model(&self, x: f64) -> f64 {
        let z = if self.log {
            let s = x + self.shift;
            if s <= 0.0 {
                return f64::NEG_INFINITY;
            }
            s.ln()
        } else {
            x
        };
        z - self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Predictive {
    /// `x = g(offset + loc + scale·ε)` with `ε` from `innovation`.
    LocationScale {
        loc: f64,
        scale: f64,
        innovation: Innovation,
        back: BackTransform,
    },
    /// Point mass `nu` at zero plus `(1 − nu)` times a positive law.
    ZeroAdjusted {
        family: ZaFamily,
        nu: f64,
        mu: f64,
        sigma: f64,
    },
}

impl Predictive {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Predictive::LocationScale { loc, scale, innovation, back } => {
                let m = back.to_model(x);
                if m == f64::NEG_INFINITY {
                    return 0.0;
                }
                innovation.cdf((m - loc) / scale)
            }
            Predictive::ZeroAdjusted { family, nu, mu, sigma } => {
                if x < 0.0 {
                    0.0
                } else if x == 0.0 {
                    nu
                } else {
                    nu + (1.0 - nu) * family.cdf(x, mu, sigma)
                }
            }
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Predictive::LocationScale { loc, scale, innovation, back } => {
                back.to_data(loc + scale * innovation.ppf(u))
            }
            Predictive::ZeroAdjusted { family, nu, mu, sigma } => {
                if u <= nu {
                    0.0
                } else {
                    family.quantile((u - nu) / (1.0 - nu), mu, sigma)
                }
            }
        }
    }

    /// PIT of an observation, randomized over the atom at zero and clamped.
    pub fn pit<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let u = match *self {
            Predictive::ZeroAdjusted { nu, .. } if x == 0.0 => nu * open_uniform(rng),
            _ => self.cdf(x),
        };
        clamp_pit(u)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Mean on the data scale when it has a closed form.
    pub fn mean(&self) -> Option<f64> {
        match *self {
            Predictive::LocationScale { loc, scale, innovation, back } => {
                if !back.log {
                    Some(back.offset + loc)
                } else {
                    match innovation {
                        Innovation::Normal => Some((back.offset + loc + 0.5 * scale * scale).exp() - back.shift),
                        Innovation::StudentT { .. } => None,
                    }
                }
            }
            Predictive::ZeroAdjusted { nu, mu, .. } => Some((1.0 - nu) * mu),
        }
    }
}
