//! Bivariate copula families used as the pair-copulas of a vine.
//!
//! Each [`PairCopula`] is a family, a rotation and a parameter vector. The
//! base formulas live in [`families`] and are written for the unrotated,
//! positively dependent case; rotations are applied here by reflecting
//! arguments:
//!
//! | rotation | density            | cdf                          |
//! |----------|--------------------|------------------------------|
//! | 0°       | c(u, v)            | C(u, v)                      |
//! | 90°      | c(1−u, v)          | v − C(1−u, v)                |
//! | 180°     | c(1−u, 1−v)        | u + v − 1 + C(1−u, 1−v)      |
//! | 270°     | c(u, 1−v)          | u − C(u, 1−v)                |

mod families;
mod fit;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::rng;

pub use fit::{fit_pair, fit_pair_family, Criterion, PairFit, PairFitOptions, MIN_PAIR_OBSERVATIONS};

/// Arguments of densities and h-functions are clamped to `[UNIT_EPS, 1 − UNIT_EPS]`.
pub const UNIT_EPS: f64 = 1e-12;

fn clamp_unit(x: f64) -> f64 {
    x.clamp(UNIT_EPS, 1.0 - UNIT_EPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Independence,
    Gaussian,
    StudentT,
    Clayton,
    Gumbel,
    Frank,
    Joe,
    Bb1,
    Bb8,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::Independence,
        Family::Gaussian,
        Family::StudentT,
        Family::Clayton,
        Family::Gumbel,
        Family::Frank,
        Family::Joe,
        Family::Bb1,
        Family::Bb8,
    ];

    pub fn n_params(self) -> usize {
        match self {
            Family::Independence => 0,
            Family::StudentT | Family::Bb1 | Family::Bb8 => 2,
            _ => 1,
        }
    }

    /// Families whose rotations are distinct copulas.
    pub fn is_asymmetric(self) -> bool {
        matches!(
            self,
            Family::Clayton | Family::Gumbel | Family::Joe | Family::Bb1 | Family::Bb8
        )
    }

    pub fn rotations(self) -> &'static [Rotation] {
        if self.is_asymmetric() {
            &Rotation::ALL
        } else {
            &[Rotation::R0]
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Independence => "independence",
            Family::Gaussian => "gaussian",
            Family::StudentT => "student_t",
            Family::Clayton => "clayton",
            Family::Gumbel => "gumbel",
            Family::Frank => "frank",
            Family::Joe => "joe",
            Family::Bb1 => "bb1",
            Family::Bb8 => "bb8",
        }
    }

    /// Box used when fitting and validating parameters.
    pub fn parameter_bounds(self) -> &'static [(f64, f64)] {
        families::bounds(self)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown copula family '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn degrees(self) -> u16 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    /// 90° and 270° rotations turn positive into negative dependence.
    pub fn negates(self) -> bool {
        matches!(self, Rotation::R90 | Rotation::R270)
    }
}

impl From<Rotation> for u16 {
    fn from(r: Rotation) -> u16 {
        r.degrees()
    }
}

impl TryFrom<u16> for Rotation {
    type Error = String;

    fn try_from(d: u16) -> std::result::Result<Self, String> {
        match d {
            0 => Ok(Rotation::R0),
            90 => Ok(Rotation::R90),
            180 => Ok(Rotation::R180),
            270 => Ok(Rotation::R270),
            other => Err(format!("rotation must be 0, 90, 180 or 270, got {other}")),
        }
    }
}

/// Which argument an h-function conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// `∂C/∂u`: distribution of the second variable given the first.
    First,
    /// `∂C/∂v`: distribution of the first variable given the second.
    Second,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCopula {
    family: Family,
    rotation: Rotation,
    params: Vec<f64>,
}

impl PairCopula {
    pub fn new(family: Family, rotation: Rotation, params: Vec<f64>) -> Result<Self> {
        let pc = PairCopula { family, rotation, params };
        pc.validate()?;
        Ok(pc)
    }

    pub fn independence() -> Self {
        PairCopula {
            family: Family::Independence,
            rotation: Rotation::R0,
            params: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fam = self.family;
        if self.params.len() != fam.n_params() {
            return Err(Error::invalid(format!(
                "{fam} takes {} parameter(s), got {}",
                fam.n_params(),
                self.params.len()
            )));
        }
        if self.rotation != Rotation::R0 && !fam.is_asymmetric() {
            return Err(Error::invalid(format!("{fam} does not admit rotations")));
        }
        let p = &self.params;
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("{fam}: non-finite parameter {p:?}")));
        }
        let ok = match fam {
            Family::Independence => true,
            Family::Gaussian => p[0].abs() < 1.0,
            Family::StudentT => p[0].abs() < 1.0 && p[1] > 2.0 && p[1] <= 50.0,
            Family::Clayton => p[0] > 0.0 && p[0] <= 100.0,
            Family::Gumbel => p[0] >= 1.0 && p[0] <= 100.0,
            Family::Frank => p[0] != 0.0 && p[0].abs() <= 100.0,
            Family::Joe => p[0] > 1.0 && p[0] <= 100.0,
            Family::Bb1 => p[0] > 0.0 && p[0] <= 50.0 && p[1] >= 1.0 && p[1] <= 50.0,
            Family::Bb8 => p[0] >= 1.0 && p[0] <= 50.0 && p[1] > 0.0 && p[1] <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("{fam}: parameters {p:?} outside the family domain")))
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn rotation(&self) -> Rotation {
        self.rotation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.family.n_params()
    }

    pub fn ln_pdf(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let (a, b) = match self.rotation {
            Rotation::R0 => (u, v),
            Rotation::R90 => (1.0 - u, v),
            Rotation::R180 => (1.0 - u, 1.0 - v),
            Rotation::R270 => (u, 1.0 - v),
        };
        families::ln_pdf(self.family, &self.params, a, b)
    }

    pub fn pdf(&self, u: f64, v: f64) -> f64 {
        self.ln_pdf(u, v).exp()
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return v.min(1.0);
        }
        if v >= 1.0 {
            return u;
        }
        let base = |a: f64, b: f64| families::cdf(self.family, &self.params, a, b);
        let c = match self.rotation {
            Rotation::R0 => base(u, v),
            Rotation::R90 => v - base(1.0 - u, v),
            Rotation::R180 => u + v - 1.0 + base(1.0 - u, 1.0 - v),
            Rotation::R270 => u - base(u, 1.0 - v),
        };
        c.clamp((u + v - 1.0).max(0.0), u.min(v))
    }

    /// Conditional distribution function. With [`Conditioning::Second`] this
    /// is `∂C(u, v)/∂v = P(U ≤ u | V = v)`; with [`Conditioning::First`] it
    /// is `∂C(u, v)/∂u = P(V ≤ v | U = u)`.
    pub fn hfunc(&self, u: f64, v: f64, cond_on: Conditioning) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let h2 = |a: f64, b: f64| families::h2(self.family, &self.params, a, b);
        match (cond_on, self.rotation) {
            (Conditioning::Second, Rotation::R0) => h2(u, v),
            (Conditioning::Second, Rotation::R90) => 1.0 - h2(1.0 - u, v),
            (Conditioning::Second, Rotation::R180) => 1.0 - h2(1.0 - u, 1.0 - v),
            (Conditioning::Second, Rotation::R270) => h2(u, 1.0 - v),
            (Conditioning::First, Rotation::R0) => h2(v, u),
            (Conditioning::First, Rotation::R90) => h2(v, 1.0 - u),
            (Conditioning::First, Rotation::R180) => 1.0 - h2(1.0 - v, 1.0 - u),
            (Conditioning::First, Rotation::R270) => 1.0 - h2(1.0 - v, u),
        }
    }

    /// Inverse of [`hfunc`](Self::hfunc) in its free argument. `given` is
    /// the value of the conditioning variable (`v` for
    /// [`Conditioning::Second`], `u` for [`Conditioning::First`]).
    pub fn hinv(&self, w: f64, given: f64, cond_on: Conditioning) -> Result<f64> {
        let (w, g) = (clamp_unit(w), clamp_unit(given));
        let inv = |a: f64, b: f64| -> Result<f64> {
            families::h2_inv(self.family, &self.params, a, b).ok_or_else(|| Error::NoConvergence {
                message: format!("{} h-function inverse", self.family),
                iterations: 200,
                last: vec![a, b],
            })
        };
        let x = match (cond_on, self.rotation) {
            (_, Rotation::R0) => inv(w, g)?,
            (Conditioning::Second, Rotation::R90) => 1.0 - inv(1.0 - w, g)?,
            (Conditioning::Second, Rotation::R180) => 1.0 - inv(1.0 - w, 1.0 - g)?,
            (Conditioning::Second, Rotation::R270) => inv(w, 1.0 - g)?,
            (Conditioning::First, Rotation::R90) => inv(w, 1.0 - g)?,
            (Conditioning::First, Rotation::R180) => 1.0 - inv(1.0 - w, 1.0 - g)?,
            (Conditioning::First, Rotation::R270) => 1.0 - inv(1.0 - w, g)?,
        };
        Ok(clamp_unit(x))
    }

    /// Draws `n` pairs as `(hinv(w | v), v)` from independent uniforms.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
        let mut r = rng::rng_from(seed);
        self.sample_with(n, &mut r)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, r: &mut R) -> Result<Vec<(f64, f64)>> {
        (0..n)
            .map(|_| {
                let v = rng::open_uniform(r);
                let w = rng::open_uniform(r);
                Ok((self.hinv(w, v, Conditioning::Second)?, v))
            })
            .collect()
    }

    /// Kendall's τ implied by the parameters.
    pub fn tau(&self) -> f64 {
        let t = families::tau(self.family, &self.params);
        if self.rotation.negates() {
            -t
        } else {
            t
        }
    }

    /// Builds the copula of `family` and `rotation` with Kendall's τ equal
    /// to `tau`. Two-parameter families are inverted along a fixed slice:
    /// Student-t holds ν = 8, BB1 splits 1 − τ evenly between its Clayton
    /// and Gumbel factors, BB8 holds δ = 0.9.
    pub fn from_tau(family: Family, rotation: Rotation, tau: f64) -> Result<Self> {
        if rotation != Rotation::R0 && !family.is_asymmetric() {
            return Err(Error::invalid(format!("{family} does not admit rotations")));
        }
        let base_tau = if rotation.negates() { -tau } else { tau };
        let params = families::tau_to_params(family, base_tau).ok_or_else(|| {
            Error::invalid(format!(
                "tau = {tau} is not attainable by {family} rotated {}°",
                rotation.degrees()
            ))
        })?;
        if family == Family::Frank && params[0] == 0.0 {
            return Ok(PairCopula::independence());
        }
        PairCopula::new(family, rotation, params)
    }

    pub fn loglik(&self, u: &[f64], v: &[f64]) -> f64 {
        if self.family == Family::Independence {
            return 0.0;
        }
        u.iter().zip(v).map(|(&a, &b)| self.ln_pdf(a, b)).sum()
    }
}

impl fmt::Display for PairCopula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        if self.rotation != Rotation::R0 {
            write!(f, "@{}", self.rotation.degrees())?;
        }
        if !self.params.is_empty() {
            write!(f, "{:?}", self.params)?;
        }
        Ok(())
    }
}
