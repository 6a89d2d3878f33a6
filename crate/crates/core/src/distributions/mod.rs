//! Univariate marginal models: fitting, probability integral transform to
//! u-data and the inverse transform used for prediction.
//!
//! Each model turns a series into a sequence of one-step predictive
//! distributions ([`Predictive`]); PIT is the predictive cdf at the
//! realized value, inverse PIT its quantile function.

pub mod arima;
pub mod garch;
pub mod predictive;
pub mod zero_adjusted;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use arima::{fit_arima, select_arima, ArimaModel, ArimaSpec, LastState};
pub use garch::{fit_arima_garch_t, garch_filter, GarchModel};
pub use predictive::{clamp_pit, BackTransform, Innovation, Predictive, PIT_CLAMP};
pub use zero_adjusted::{fit_zero_adjusted, ZaFamily, ZagaModel, ZaigModel, ZeroAdjustedModel};

use crate::error::{Error, Result};
use crate::numerics::rng::stream;

/// Inverse of a symmetric information matrix, if it is positive definite.
pub(crate) fn covariance_from_hessian(h: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = h.len();
    if h.iter().flatten().any(|v| !v.is_finite()) {
        return None;
    }
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (h[i][j] + h[j][i]));
    let chol = m.cholesky()?;
    let inv = chol.inverse();
    Some((0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalKind {
    Arima,
    ArimaGarchT,
    Zaga,
    Zaig,
}

impl MarginalKind {
    pub fn name(&self) -> &'static str {
        match self {
            MarginalKind::Arima => "arima",
            MarginalKind::ArimaGarchT => "arima_garch_t",
            MarginalKind::Zaga => "zaga",
            MarginalKind::Zaig => "zaig",
        }
    }
}

impl fmt::Display for MarginalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MarginalKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "arima" => Ok(MarginalKind::Arima),
            "arima_garch_t" | "garch" => Ok(MarginalKind::ArimaGarchT),
            "zaga" => Ok(MarginalKind::Zaga),
            "zaig" => Ok(MarginalKind::Zaig),
            _ => Err(Error::invalid(format!("unknown marginal kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    None,
    Log,
}

fn default_garch() -> [usize; 2] {
    [1, 1]
}

/// What to fit for one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSpec {
    pub kind: MarginalKind,
    /// Mean-equation orders; `None` selects them by AIC.
    #[serde(default)]
    pub order: Option<ArimaSpec>,
    /// GARCH orders `[P, Q]`.
    #[serde(default = "default_garch")]
    pub garch: [usize; 2],
    #[serde(default)]
    pub transform: Transform,
}

impl MarginalSpec {
    pub fn new(kind: MarginalKind) -> Self {
        MarginalSpec { kind, order: None, garch: default_garch(), transform: Transform::None }
    }

    pub fn with_order(mut self, p: usize, d: usize, q: usize) -> Self {
        self.order = Some(ArimaSpec { p, d, q });
        self
    }

    pub fn with_transform(mut self, t: Transform) -> Self {
        self.transform = t;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalPayload {
    Arima(ArimaModel),
    ArimaGarchT(GarchModel),
    Zaga(ZeroAdjustedModel),
    Zaig(ZeroAdjustedModel),
}

/// A fitted marginal for one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    pub kind: MarginalKind,
    pub transform: Transform,
    /// Added before taking logs so the series is positive.
    pub shift: f64,
    pub payload: MarginalPayload,
}

/// PIT values of `y[start..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PitSeries {
    pub start: usize,
    pub values: Vec<f64>,
}

/// Fits the marginal described by `spec` to `y`.
pub fn fit_marginal(y: &[f64], spec: &MarginalSpec) -> Result<MarginalModel> {
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("missing or non-finite value at index {i}")));
    }
    if y.is_empty() {
        return Err(Error::invalid("empty series"));
    }
    let (shift, z) = match spec.transform {
        Transform::None => (0.0, y.to_vec()),
        Transform::Log => {
            let min = y.iter().copied().fold(f64::INFINITY, f64::min);
            let shift = if min > 0.0 { 0.0 } else { 1.0 + min.abs() };
            (shift, y.iter().map(|v| (v + shift).ln()).collect())
        }
    };
    let payload = match spec.kind {
        MarginalKind::Arima => MarginalPayload::Arima(match spec.order {
            Some(o) => fit_arima(&z, o)?,
            None => select_arima(&z, 3, 1, 3)?,
        }),
        MarginalKind::ArimaGarchT => {
            let order = match spec.order {
                Some(o) => o,
                None => select_arima(&z, 3, 1, 3)?.spec,
            };
            MarginalPayload::ArimaGarchT(fit_arima_garch_t(&z, order, spec.garch[0], spec.garch[1])?)
        }
        MarginalKind::Zaga | MarginalKind::Zaig => {
            if spec.transform != Transform::None {
                return Err(Error::invalid("zero-adjusted marginals are fitted on the raw scale (transform must be none)"));
            }
            let fam = if spec.kind == MarginalKind::Zaga { ZaFamily::Gamma } else { ZaFamily::InverseGaussian };
            let t: Vec<f64> = (0..y.len()).map(|i| i as f64).collect();
            let m = fit_zero_adjusted(y, &t, fam)?;
            if spec.kind == MarginalKind::Zaga {
                MarginalPayload::Zaga(m)
            } else {
                MarginalPayload::Zaig(m)
            }
        }
    };
    Ok(MarginalModel { kind: spec.kind, transform: spec.transform, shift, payload })
}

impl MarginalModel {
    pub fn validate(&self) -> Result<()> {
        let ok = matches!(
            (self.kind, &self.payload),
            (MarginalKind::Arima, MarginalPayload::Arima(_))
                | (MarginalKind::ArimaGarchT, MarginalPayload::ArimaGarchT(_))
                | (MarginalKind::Zaga, MarginalPayload::Zaga(_))
                | (MarginalKind::Zaig, MarginalPayload::Zaig(_))
        );
        if !ok {
            return Err(Error::invalid(format!("marginal kind {} does not match its payload", self.kind)));
        }
        if !(self.shift >= 0.0 && self.shift.is_finite()) {
            return Err(Error::invalid(format!("log shift {} must be finite and nonnegative", self.shift)));
        }
        Ok(())
    }

    pub fn loglik(&self) -> f64 {
        match &self.payload {
            MarginalPayload::Arima(m) => m.loglik,
            MarginalPayload::ArimaGarchT(m) => m.loglik,
            MarginalPayload::Zaga(m) | MarginalPayload::Zaig(m) => m.loglik,
        }
    }

    pub fn aic(&self) -> f64 {
        match &self.payload {
            MarginalPayload::Arima(m) => m.aic,
            MarginalPayload::ArimaGarchT(m) => m.aic,
            MarginalPayload::Zaga(m) | MarginalPayload::Zaig(m) => m.aic,
        }
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        let log = if self.transform == Transform::Log { " on log scale" } else { "" };
        match &self.payload {
            MarginalPayload::Arima(m) => format!("{}{log}", m.spec),
            MarginalPayload::ArimaGarchT(m) => {
                format!("{}-GARCH({},{})-t{log}", m.arima.spec, m.alpha.len(), m.beta.len())
            }
            MarginalPayload::Zaga(_) => "ZAGA".into(),
            MarginalPayload::Zaig(_) => "ZAIG".into(),
        }
    }

    /// Number of leading observations without a predictive distribution.
    pub fn first_index(&self) -> usize {
        match &self.payload {
            MarginalPayload::Arima(m) => m.spec.d,
            MarginalPayload::ArimaGarchT(m) => m.first_index(),
            MarginalPayload::Zaga(_) | MarginalPayload::Zaig(_) => 0,
        }
    }

    fn back(&self, offset: f64) -> BackTransform {
        BackTransform { offset, log: self.transform == Transform::Log, shift: self.shift }
    }

    /// Data-scale series mapped to the modelling scale. Values outside the
    /// log support become missing.
    fn model_scale(&self, y: &[f64]) -> Vec<f64> {
        match self.transform {
            Transform::None => y.to_vec(),
            Transform::Log => y
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let s = v + self.shift;
                    if s > 0.0 {
                        s.ln()
                    } else {
                        if v.is_finite() {
                            log::warn!("value {v} at index {i} is below the log support; treated as missing");
                        }
                        f64::NAN
                    }
                })
                .collect(),
        }
    }

    /// One-step predictive distribution for every `t` in `0..=y.len()`
    /// given `y[..t]`; the last entry forecasts the step after `y`.
    /// Missing values (NaN) are replaced by their predicted mean.
    pub fn predictive_path(&self, y: &[f64]) -> Vec<Option<Predictive>> {
        match &self.payload {
            MarginalPayload::Arima(m) => m
                .path(&self.model_scale(y))
                .into_iter()
                .map(|s| {
                    s.map(|s| Predictive::LocationScale {
                        loc: s.loc,
                        scale: s.var.sqrt(),
                        innovation: Innovation::Normal,
                        back: self.back(s.offset),
                    })
                })
                .collect(),
            MarginalPayload::ArimaGarchT(m) => m
                .path(&self.model_scale(y))
                .into_iter()
                .map(|s| {
                    s.map(|s| Predictive::LocationScale {
                        loc: s.loc,
                        scale: s.sigma2.sqrt(),
                        innovation: m.innovation(),
                        back: self.back(s.offset),
                    })
                })
                .collect(),
            MarginalPayload::Zaga(m) | MarginalPayload::Zaig(m) => {
                (0..=y.len()).map(|t| Some(m.predictive(t as f64))).collect()
            }
        }
    }

    /// Predictive distribution of the step following `y`.
    pub fn horizon(&self, y: &[f64]) -> Result<Predictive> {
        if y.len() < self.first_index() {
            return Err(Error::invalid(format!(
                "{} needs at least {} past observations, got {}",
                self.describe(),
                self.first_index(),
                y.len()
            )));
        }
        self.predictive_path(y)
            .pop()
            .flatten()
            .ok_or_else(|| Error::numerical(format!("{}: no predictive state", self.describe())))
    }

    /// PIT of `y[first_index..]`; zeros of zero-adjusted models are
    /// randomized with a stream derived from `seed`.
    pub fn pit(&self, y: &[f64], seed: u64) -> Result<PitSeries> {
        let start = self.first_index();
        if y.len() <= start {
            return Err(Error::invalid(format!(
                "{} needs more than {start} observations for a PIT, got {}",
                self.describe(),
                y.len()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("missing value at index {i} in PIT input")));
        }
        let path = self.predictive_path(y);
        let mut rng = stream(seed, "pit", 0);
        let values = (start..y.len())
            .map(|t| path[t].expect("defined from first_index").pit(y[t], &mut rng))
            .collect();
        Ok(PitSeries { start, values })
    }

    /// Data-scale value at probability `u` under a predictive state.
    pub fn inverse_pit(&self, u: f64, state: &Predictive) -> f64 {
        state.quantile(u)
    }
}

#[cfg(test)]
mod tests;
