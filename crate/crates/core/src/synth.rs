//! Seeded synthetic systems with known marginals and a known vine, used
//! by the acceptance suite and the hidden `synth` command.
//!
//! Draws from the vine supply the innovation uniforms of each marginal
//! recursion, so the PIT residuals of the true model follow the vine
//! exactly.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::distributions::{Innovation, MarginalKind, MarginalSpec, Predictive, Transform, ZaFamily};
use crate::error::{Error, Result};
use crate::forecast::{ForecastConfig, ForecastMode};
use crate::frame::TimeSeriesFrame;
use crate::numerics::rng::substream;
use crate::paircop::{Family, PairCopula, Rotation};
use crate::pipeline::{ColumnConfig, PipelineConfig, VineConfig, CONFIG_VERSION};
use crate::vine::{Edge, RVineModel, VineTree};

/// Discarded start-up draws for the recursive generators.
const BURN_IN: usize = 300;

/// Data-generating process of one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "snake_case")]
pub enum Generator {
    /// ARMA(p, q) with Gaussian innovations; `exp` of it when `log`.
    Arma { constant: f64, phi: Vec<f64>, theta: Vec<f64>, sigma: f64, log: bool },
    /// AR(1) mean with GARCH(1,1) unit-variance Student-t innovations.
    ArGarchT { constant: f64, phi: f64, omega: f64, alpha: f64, beta: f64, nu: f64 },
    /// Point mass at zero plus a positive part with `mu = exp(b0 + b1 t)`.
    ZeroAdjusted { family: ZaFamily, beta0: f64, beta1: f64, sigma: f64, nu: f64 },
}

impl Generator {
    /// The correctly specified marginal for this process.
    pub fn spec(&self) -> MarginalSpec {
        match self {
            Generator::Arma { phi, theta, log, .. } => {
                let s = MarginalSpec::new(MarginalKind::Arima).with_order(phi.len(), 0, theta.len());
                if *log {
                    s.with_transform(Transform::Log)
                } else {
                    s
                }
            }
            Generator::ArGarchT { .. } => MarginalSpec::new(MarginalKind::ArimaGarchT).with_order(1, 0, 0),
            Generator::ZeroAdjusted { family: ZaFamily::Gamma, .. } => MarginalSpec::new(MarginalKind::Zaga),
            Generator::ZeroAdjusted { family: ZaFamily::InverseGaussian, .. } => MarginalSpec::new(MarginalKind::Zaig),
        }
    }

    fn needs_burn_in(&self) -> bool {
        !matches!(self, Generator::ZeroAdjusted { .. })
    }

    /// Turns innovation uniforms into a series (burn-in included).
    fn run(&self, u: &[f64], burn: usize) -> Vec<f64> {
        match self {
            Generator::Arma { constant, phi, theta, sigma, log } => {
                let mean = constant / (1.0 - phi.iter().sum::<f64>());
                let mut w = vec![mean; phi.len()];
                let mut e = vec![0.0; theta.len()];
                let mut out = Vec::with_capacity(u.len());
                for &ui in u {
                    let eps = sigma * Innovation::Normal.ppf(ui);
                    let mut v = constant + eps;
                    for (k, p) in phi.iter().enumerate() {
                        v += p * w[w.len() - 1 - k];
                    }
                    for (k, t) in theta.iter().enumerate() {
                        v += t * e[e.len() - 1 - k];
                    }
                    w.push(v);
                    e.push(eps);
                    out.push(if *log { v.exp() } else { v });
                }
                out
            }
            Generator::ArGarchT { constant, phi, omega, alpha, beta, nu } => {
                let inn = Innovation::StudentT { nu: *nu };
                let mut s2 = omega / (1.0 - alpha - beta);
                let (mut prev, mut prev_e) = (constant / (1.0 - phi), 0.0);
                u.iter()
                    .map(|&ui| {
                        s2 = omega + alpha * prev_e * prev_e + beta * s2;
                        let e = s2.sqrt() * inn.ppf(ui);
                        prev = constant + phi * prev + e;
                        prev_e = e;
                        prev
                    })
                    .collect()
            }
            Generator::ZeroAdjusted { family, beta0, beta1, sigma, nu } => u
                .iter()
                .enumerate()
                .map(|(i, &ui)| {
                    let t = i as f64 - burn as f64;
                    let p = Predictive::ZeroAdjusted { family: *family, nu: *nu, mu: (beta0 + beta1 * t).exp(), sigma: *sigma };
                    p.quantile(ui)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSystem {
    pub columns: Vec<String>,
    pub generators: Vec<Generator>,
    pub vine: RVineModel,
}

impl SynthSystem {
    pub fn new(columns: Vec<String>, generators: Vec<Generator>, vine: RVineModel) -> Result<Self> {
        if columns.len() != generators.len() || columns.len() != vine.d {
            return Err(Error::invalid("synthetic system: columns, generators and vine disagree in size"));
        }
        let vine = vine.with_columns(columns.clone())?;
        Ok(SynthSystem { columns, generators, vine })
    }

    /// `n` consecutive days starting at `start`.
    pub fn generate(&self, n: usize, start: NaiveDate, seed: u64) -> Result<TimeSeriesFrame> {
        let burn = if self.generators.iter().any(|g| g.needs_burn_in()) { BURN_IN } else { 0 };
        let u = self.vine.simulate(n + burn, substream(seed, "synth-copula", 0))?;
        let values = self
            .generators
            .iter()
            .enumerate()
            .map(|(j, g)| {
                let col: Vec<f64> = u.iter().map(|r| r[j]).collect();
                g.run(&col, burn).split_off(burn)
            })
            .collect();
        let dates = (0..n).map(|i| start + Duration::days(i as i64)).collect();
        TimeSeriesFrame::new(dates, self.columns.clone(), values)
    }
}

/// C-vine rooted at variable 0, then 1, and so on: tree `k` joins the
/// `k`-th root to every later variable given the earlier roots.
pub fn cvine(d: usize, mut copula: impl FnMut(usize, usize) -> PairCopula) -> Result<RVineModel> {
    let mut trees = Vec::with_capacity(d - 1);
    for level in 1..d {
        let root = level - 1;
        let edges = (level..d)
            .map(|j| Edge {
                a: root,
                b: j,
                conditioning: (0..root).collect(),
                left: if level == 1 { root } else { 0 },
                right: if level == 1 { j } else { j - level + 1 },
                copula: copula(level, j),
                loglik: 0.0,
            })
            .collect();
        trees.push(VineTree { level, edges });
    }
    RVineModel::from_trees(d, (1..=d).map(|i| format!("V{i}")).collect(), trees, 0)
}

fn tau(family: Family, rotation: Rotation, t: f64) -> PairCopula {
    PairCopula::from_tau(family, rotation, t).expect("valid preset copula")
}

/// Named systems shipped with the acceptance suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Three columns (ARMA, AR-GARCH-t, log-AR) on a mixed vine.
    Calibration3,
    /// Six columns whose first column drives the rest through strong
    /// Clayton/Gumbel first-tree links (a C-vine rooted at `signal`).
    Asymmetric6,
    /// The six marginals of `Asymmetric6` with independent innovations.
    Independent6,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Calibration3, Preset::Asymmetric6, Preset::Independent6];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Calibration3 => "calibration3",
            Preset::Asymmetric6 => "asymmetric6",
            Preset::Independent6 => "independent6",
        }
    }

    pub fn system(&self) -> Result<SynthSystem> {
        match self {
            Preset::Calibration3 => {
                let vine = RVineModel::path(3, |level, i| match (level, i) {
                    (1, 0) => tau(Family::Gaussian, Rotation::R0, 0.4),
                    (1, _) => tau(Family::Gumbel, Rotation::R0, 0.4),
                    _ => tau(Family::Frank, Rotation::R0, 0.2),
                })?;
                SynthSystem::new(
                    vec!["level".into(), "volatility".into(), "flow".into()],
                    vec![
                        Generator::Arma { constant: 0.5, phi: vec![0.6], theta: vec![0.3], sigma: 1.0, log: false },
                        Generator::ArGarchT { constant: 0.1, phi: 0.4, omega: 0.05, alpha: 0.1, beta: 0.85, nu: 6.0 },
                        Generator::Arma { constant: 0.3, phi: vec![0.7], theta: vec![], sigma: 0.2, log: true },
                    ],
                    vine,
                )
            }
            Preset::Asymmetric6 | Preset::Independent6 => {
                let vine = if *self == Preset::Asymmetric6 {
                    cvine(6, |level, j| match (level, j) {
                        (1, 1) => tau(Family::Clayton, Rotation::R0, 0.7),
                        (1, 2) => tau(Family::Gumbel, Rotation::R0, 0.65),
                        (1, 3) => tau(Family::Clayton, Rotation::R180, 0.7),
                        (1, 4) => tau(Family::Gumbel, Rotation::R180, 0.65),
                        (1, _) => tau(Family::Clayton, Rotation::R0, 0.6),
                        (2, _) => tau(Family::Frank, Rotation::R0, 0.15),
                        _ => PairCopula::independence(),
                    })?
                } else {
                    RVineModel::independence(6)?
                };
                SynthSystem::new(
                    ["signal", "wave", "level", "volume", "flow", "sentiment"].iter().map(|s| s.to_string()).collect(),
                    vec![
                        Generator::Arma { constant: 0.0, phi: vec![0.5], theta: vec![], sigma: 1.0, log: false },
                        Generator::ArGarchT { constant: 0.2, phi: 0.5, omega: 0.05, alpha: 0.1, beta: 0.85, nu: 6.0 },
                        Generator::Arma { constant: 1.0, phi: vec![0.8], theta: vec![], sigma: 0.5, log: false },
                        Generator::ArGarchT { constant: 0.0, phi: 0.3, omega: 0.1, alpha: 0.08, beta: 0.85, nu: 8.0 },
                        Generator::Arma { constant: 0.5, phi: vec![0.6], theta: vec![], sigma: 0.3, log: true },
                        Generator::Arma { constant: 0.0, phi: vec![0.4], theta: vec![0.3], sigma: 1.0, log: false },
                    ],
                    vine,
                )
            }
        }
    }

    /// Variables observed on the forecast day in the preset's config.
    pub fn conditioning(&self) -> Vec<String> {
        match self {
            Preset::Calibration3 => Vec::new(),
            Preset::Asymmetric6 | Preset::Independent6 => vec!["signal".into()],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown preset '{s}' (calibration3|asymmetric6|independent6)")))
    }
}

pub fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 1, 1).expect("valid date")
}

/// A dataset plus the pipeline config that fits it with the true marginal
/// specs.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub system: SynthSystem,
    pub frame: TimeSeriesFrame,
    pub config: PipelineConfig,
}

/// Generates `train + holdout` days; the split date is the last training
/// day. `data` and `output_dir` are written into the config as given.
pub fn dataset(
    preset: Preset,
    train: usize,
    holdout: usize,
    m: usize,
    seed: u64,
    data: PathBuf,
    output_dir: PathBuf,
) -> Result<SynthDataset> {
    let system = preset.system()?;
    let start = default_start();
    let frame = system.generate(train + holdout, start, substream(seed, "synth", 0))?;
    let conditioning = preset.conditioning();
    let config = PipelineConfig {
        version: CONFIG_VERSION,
        data,
        forward_fill: false,
        columns: system
            .columns
            .iter()
            .zip(&system.generators)
            .map(|(name, g)| ColumnConfig { name: name.clone(), marginal: g.spec() })
            .collect(),
        vine: VineConfig::default(),
        forecast: ForecastConfig {
            m,
            split_date: start + Duration::days(train as i64 - 1),
            mode: if conditioning.is_empty() {
                ForecastMode::JointUnconditional
            } else {
                ForecastMode::ConditionalOnSubset(conditioning)
            },
            ..ForecastConfig::default()
        },
        seed,
        output_dir,
    };
    config.validate()?;
    Ok(SynthDataset { system, frame, config })
}
