//! One-day-ahead forecasts: draw u-vectors from the vine, push each
//! coordinate through its marginal's predictive quantile function, and
//! summarize the draws by their mean and central empirical interval.
//! [`rolling_forecast`] walks a hold-out window one day at a time.

use std::io::{Read, Write};

use chrono::NaiveDate;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{MarginalModel, Predictive};
use crate::error::{Error, Result};
use crate::frame::{TimeSeriesFrame, DATE_FORMAT};
use crate::numerics::rng::{stream, substream};
use crate::numerics::stats::quantile_sorted;
use crate::vine::RVineModel;

/// Training observations required before the split date.
pub const MIN_TRAINING_DAYS: usize = 100;

pub fn default_split_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2016, 2, 15).expect("valid date")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RefitPolicy {
    #[default]
    FitOnce,
    /// Refit marginals and vine every `k` hold-out days on all data so far.
    RefitEvery(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMode {
    /// Every variable is drawn jointly from the vine.
    #[default]
    JointUnconditional,
    /// The named variables are taken as observed on the forecast day and
    /// the rest are drawn from the vine conditional on them.
    ConditionalOnSubset(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    /// Number of simulated draws per day.
    pub m: usize,
    /// Intervals have nominal coverage `1 − alpha`.
    pub alpha: f64,
    /// Last training day.
    pub split_date: NaiveDate,
    pub refit_policy: RefitPolicy,
    pub mode: ForecastMode,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            m: 10_000,
            alpha: 0.05,
            split_date: default_split_date(),
            refit_policy: RefitPolicy::FitOnce,
            mode: ForecastMode::JointUnconditional,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 100 {
            return Err(Error::invalid(format!("forecast: m = {} draws, need at least 100", self.m)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("forecast: alpha = {} not in (0, 1)", self.alpha)));
        }
        if self.refit_policy == RefitPolicy::RefitEvery(0) {
            return Err(Error::invalid("forecast: refit interval must be at least one day"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastPoint {
    pub variable: String,
    pub date: NaiveDate,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub observed: Option<f64>,
    /// Realized observation's position in the simulated distribution
    /// (randomized on ties); not written to CSV.
    pub pit: Option<f64>,
}

/// Mean and `(alpha/2, 1 − alpha/2)` empirical quantiles of `values`
/// (sorted in place). The mean is clamped into the interval.
pub fn summarize(values: &mut [f64], alpha: f64) -> (f64, f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    let lo = quantile_sorted(values, alpha / 2.0);
    let hi = quantile_sorted(values, 1.0 - alpha / 2.0);
    (mean.clamp(lo, hi), lo, hi)
}

/// Position of `x` among sorted draws, uniform on ties.
fn empirical_pit<R: Rng>(sorted: &[f64], x: f64, rng: &mut R) -> f64 {
    let below = sorted.partition_point(|v| *v < x);
    let upto = sorted.partition_point(|v| *v <= x);
    let ties = (upto - below) as f64;
    let u: f64 = rng.random();
    (below as f64 + u * (ties + 1.0)) / (sorted.len() as f64 + 1.0)
}

/// Forecast for one day from predictive states given data up to the
/// previous day. `observed` holds the day's realized values (used for
/// scoring, and as the conditioning values in conditional mode);
/// `conditioning` lists variable indices to condition on.
#[allow(clippy::too_many_arguments)]
pub fn forecast_one_step(
    vine: &RVineModel,
    states: &[Predictive],
    date: NaiveDate,
    observed: &[Option<f64>],
    conditioning: &[usize],
    cfg: &ForecastConfig,
    seed: u64,
) -> Result<Vec<ForecastPoint>> {
    let d = vine.d;
    if states.len() != d || observed.len() != d {
        return Err(Error::invalid(format!(
            "forecast: {} states and {} observations for a {d}-variable vine",
            states.len(),
            observed.len()
        )));
    }
    let mut pit_rng = stream(seed, "condition-pit", 0);
    let mut fixed = Vec::with_capacity(conditioning.len());
    for &j in conditioning {
        let x = observed[j].ok_or_else(|| {
            Error::invalid(format!("forecast {date}: conditioning variable '{}' is not observed", vine.columns[j]))
        })?;
        fixed.push((j, states[j].pit(x, &mut pit_rng)));
    }
    let draws = vine.conditional_simulate(&fixed, cfg.m, seed)?;
    let mut out = Vec::with_capacity(d);
    for j in 0..d {
        let mut values: Vec<f64> = if conditioning.contains(&j) {
            // observed on the day; report its copula-free marginal forecast
            (0..cfg.m).map(|i| states[j].quantile((i as f64 + 0.5) / cfg.m as f64)).collect()
        } else {
            draws.iter().map(|u| states[j].quantile(u[j])).collect()
        };
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numerical(format!(
                "forecast {date}: draw {i} of '{}' is not finite",
                vine.columns[j]
            )));
        }
        let (point, lower, upper) = summarize(&mut values, cfg.alpha);
        let pit = observed[j].map(|x| empirical_pit(&values, x, &mut stream(seed, "forecast-pit", j as u64)));
        out.push(ForecastPoint {
            variable: vine.columns[j].clone(),
            date,
            point,
            lower,
            upper,
            observed: observed[j],
            pit,
        });
    }
    Ok(out)
}

/// Marginals and vine fitted on one training window.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedSystem {
    pub marginals: Vec<MarginalModel>,
    pub vine: RVineModel,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForecastRun {
    pub points: Vec<ForecastPoint>,
    /// Skipped hold-out dates and why.
    pub warnings: Vec<String>,
}

fn conditioning_indices(vine: &RVineModel, mode: &ForecastMode) -> Result<Vec<usize>> {
    match mode {
        ForecastMode::JointUnconditional => Ok(Vec::new()),
        ForecastMode::ConditionalOnSubset(names) => {
            let idx = names
                .iter()
                .map(|n| {
                    vine.columns
                        .iter()
                        .position(|c| c == n)
                        .ok_or_else(|| Error::invalid(format!("conditioning variable '{n}' is not a vine column")))
                })
                .collect::<Result<Vec<usize>>>()?;
            if idx.len() >= vine.d {
                return Err(Error::invalid("conditioning on every variable leaves nothing to forecast"));
            }
            vine.sampling_order_with_prefix(&idx)?;
            Ok(idx)
        }
    }
}

/// Walks the hold-out window (the days after `cfg.split_date`) one day at a
/// time. `fit` receives the training rows and returns the fitted system;
/// it is called once, or every `k` days under `RefitEvery(k)`. Marginal
/// states are updated with each realized observation. Days with a
/// missing observation are skipped and recorded in `warnings`.
pub fn rolling_forecast<F>(frame: &TimeSeriesFrame, cfg: &ForecastConfig, seed: u64, mut fit: F) -> Result<ForecastRun>
where
    F: FnMut(&TimeSeriesFrame) -> Result<FittedSystem>,
{
    cfg.validate()?;
    let split = frame.date_index(cfg.split_date).ok_or_else(|| {
        Error::invalid(format!(
            "split date {} outside the data range {}..{}",
            cfg.split_date,
            frame.dates().first().map(|d| d.to_string()).unwrap_or_default(),
            frame.dates().last().map(|d| d.to_string()).unwrap_or_default()
        ))
    })?;
    let train = split + 1;
    if train < MIN_TRAINING_DAYS {
        return Err(Error::invalid(format!(
            "only {train} training days up to {}; need at least {MIN_TRAINING_DAYS}",
            cfg.split_date
        )));
    }
    let n = frame.len();
    let d = frame.width();
    let mut run = ForecastRun::default();
    let mut t = train;
    while t < n {
        let epoch_end = match cfg.refit_policy {
            RefitPolicy::FitOnce => n,
            RefitPolicy::RefitEvery(k) => (t + k).min(n),
        };
        let system = fit(&frame.slice(0, t))?;
        if system.vine.columns != frame.columns() || system.marginals.len() != d {
            return Err(Error::Mismatch(format!(
                "fitted system columns [{}] do not match data columns [{}]",
                system.vine.columns.join(","),
                frame.columns().join(",")
            )));
        }
        let conditioning = conditioning_indices(&system.vine, &cfg.mode)?;
        let paths: Vec<Vec<Option<Predictive>>> = system
            .marginals
            .iter()
            .enumerate()
            .map(|(j, m)| m.predictive_path(&frame.column_at(j)[..epoch_end]))
            .collect();
        for day in t..epoch_end {
            let date = frame.dates()[day];
            let observed: Vec<Option<f64>> = (0..d)
                .map(|j| {
                    let v = frame.column_at(j)[day];
                    (!v.is_nan()).then_some(v)
                })
                .collect();
            if let Some(j) = observed.iter().position(|o| o.is_none()) {
                let msg = format!("{date}: skipped, '{}' is missing", frame.columns()[j]);
                log::warn!("{msg}");
                run.warnings.push(msg);
                continue;
            }
            let states = paths
                .iter()
                .enumerate()
                .map(|(j, p)| {
                    p[day].ok_or_else(|| {
                        Error::invalid(format!("{date}: no predictive state for '{}'", frame.columns()[j]))
                    })
                })
                .collect::<Result<Vec<Predictive>>>()?;
            let day_seed = substream(seed, "forecast-day", day as u64);
            run.points.extend(forecast_one_step(&system.vine, &states, date, &observed, &conditioning, cfg, day_seed)?);
        }
        t = epoch_end;
    }
    Ok(run)
}

/// Writes `date,variable,observed,point,lower,upper` rows.
pub fn write_forecast_csv<W: Write>(points: &[ForecastPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "variable", "observed", "point", "lower", "upper"])?;
    for p in points {
        w.write_record([
            p.date.format(DATE_FORMAT).to_string(),
            p.variable.clone(),
            p.observed.map(|v| v.to_string()).unwrap_or_default(),
            p.point.to_string(),
            p.lower.to_string(),
            p.upper.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_forecast_csv<R: Read>(input: R) -> Result<Vec<ForecastPoint>> {
    let mut r = csv::Reader::from_reader(input);
    let expected = ["date", "variable", "observed", "point", "lower", "upper"];
    if r.headers()?.iter().collect::<Vec<_>>() != expected {
        return Err(Error::invalid(format!("forecast CSV header must be {}", expected.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let num = |k: usize| -> Result<f64> {
            rec[k].parse().map_err(|_| Error::invalid(format!("forecast CSV row {row}: bad number '{}'", &rec[k])))
        };
        let date = NaiveDate::parse_from_str(&rec[0], DATE_FORMAT)
            .map_err(|_| Error::invalid(format!("forecast CSV row {row}: bad date '{}'", &rec[0])))?;
        let observed = if rec[2].is_empty() { None } else { Some(num(2)?) };
        let (point, lower, upper) = (num(3)?, num(4)?, num(5)?);
        if !(lower <= point && point <= upper) {
            return Err(Error::invalid(format!("forecast CSV row {row}: point outside its interval")));
        }
        out.push(ForecastPoint { variable: rec[1].to_string(), date, point, lower, upper, observed, pit: None });
    }
    Ok(out)
}
