//! End-to-end driver: configuration, staged artifacts and the three-model
//! comparison (independence vine, Gaussian vine, full vine).
//!
//! Every artifact carries the ordered column names and marginal kinds it
//! was built from; stages refuse to combine artifacts whose signatures
//! differ.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{fit_marginal, MarginalKind, MarginalModel, MarginalSpec};
use crate::error::{Error, Result};
use crate::forecast::{
    read_forecast_csv, rolling_forecast, write_forecast_csv, FittedSystem, ForecastConfig, ForecastPoint, ForecastRun,
    MIN_TRAINING_DAYS,
};
use crate::frame::{ingest, IngestOptions, TimeSeriesFrame};
use crate::metrics::{score_track, EvaluationTable, ModelLabel};
use crate::numerics::rng::substream;
use crate::paircop::{Criterion, Family, PairFitOptions};
use crate::vine::{self, RVineModel, TreeWeight, VineFitOptions};

pub const CONFIG_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: u32 = 1;
pub const MARGINALS_FORMAT: &str = "vineflood-marginals";
pub const DEPENDENCE_FORMAT: &str = "vineflood-dependence";

pub const MARGINALS_FILE: &str = "marginals.json";
pub const EVALUATION_CSV: &str = "evaluation.csv";
pub const EVALUATION_JSON: &str = "evaluation.json";

pub fn vine_file(model: ModelLabel) -> String {
    format!("vine-{}.json", model.slug())
}

pub fn forecast_file(model: ModelLabel) -> String {
    format!("forecast-{}.csv", model.slug())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnConfig {
    pub name: String,
    #[serde(flatten)]
    pub marginal: MarginalSpec,
}

/// Pair-copula candidates and structure options for the full vine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VineConfig {
    pub families: Vec<Family>,
    pub criterion: Criterion,
    pub independence_test: bool,
    pub significance: f64,
    pub truncation: Option<usize>,
    pub weight: TreeWeight,
}

impl Default for VineConfig {
    fn default() -> Self {
        let p = PairFitOptions::default();
        VineConfig {
            families: p.families,
            criterion: p.criterion,
            independence_test: p.independence_test,
            significance: p.significance,
            truncation: None,
            weight: TreeWeight::Kendall,
        }
    }
}

impl VineConfig {
    pub fn fit_options(&self) -> VineFitOptions {
        VineFitOptions {
            pair: PairFitOptions {
                families: self.families.clone(),
                criterion: self.criterion,
                independence_test: self.independence_test,
                significance: self.significance,
            },
            truncation: self.truncation,
            weight: self.weight,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub version: u32,
    /// Data CSV; relative paths are resolved against the config file.
    pub data: PathBuf,
    #[serde(default)]
    pub forward_fill: bool,
    pub columns: Vec<ColumnConfig>,
    #[serde(default)]
    pub vine: VineConfig,
    #[serde(default)]
    pub forecast: ForecastConfig,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.data.is_relative() {
            cfg.data = base.join(&cfg.data);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::invalid(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.columns.len() < 2 {
            return Err(Error::invalid("config: at least two columns are needed for a vine"));
        }
        for (i, c) in self.columns.iter().enumerate() {
            if c.name.is_empty() || c.name == "date" {
                return Err(Error::invalid(format!("config: column {} has an invalid name '{}'", i + 1, c.name)));
            }
            if self.columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::invalid(format!("config: column '{}' listed twice", c.name)));
            }
            if let Some(o) = c.marginal.order {
                o.validate().map_err(|e| Error::invalid(format!("config: column '{}': {e}", c.name)))?;
            }
        }
        if self.vine.families.is_empty() {
            return Err(Error::invalid("config: empty copula family set"));
        }
        self.forecast.validate()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn kinds(&self) -> Vec<MarginalKind> {
        self.columns.iter().map(|c| c.marginal.kind).collect()
    }
}

/// Ordered column names plus marginal kinds, embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub columns: Vec<String>,
    pub kinds: Vec<MarginalKind>,
}

impl Signature {
    fn describe(&self) -> String {
        self.columns
            .iter()
            .zip(&self.kinds)
            .map(|(c, k)| format!("{c}:{k}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn check(&self, other: &Signature, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::Mismatch(format!(
                "column signature mismatch: {what} has [{}], expected [{}]",
                other.describe(),
                self.describe()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalsArtifact {
    pub format: String,
    pub version: u32,
    pub signature: Signature,
    pub split_date: NaiveDate,
    pub training_rows: usize,
    pub models: Vec<MarginalModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceArtifact {
    pub format: String,
    pub version: u32,
    pub model: ModelLabel,
    pub signature: Signature,
    /// Number of u-data rows the vine was fitted on.
    pub rows: usize,
    pub vine: RVineModel,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

impl MarginalsArtifact {
    pub fn load(path: &Path) -> Result<Self> {
        let a: MarginalsArtifact = read_json(path)?;
        if a.format != MARGINALS_FORMAT || a.version != ARTIFACT_VERSION {
            return Err(Error::invalid(format!("{}: not a version {ARTIFACT_VERSION} marginals artifact", path.display())));
        }
        if a.models.len() != a.signature.columns.len() {
            return Err(Error::invalid(format!("{}: model count does not match its columns", path.display())));
        }
        for (m, k) in a.models.iter().zip(&a.signature.kinds) {
            m.validate()?;
            if m.kind != *k {
                return Err(Error::Mismatch(format!("{}: model kind {} listed as {k}", path.display(), m.kind)));
            }
        }
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &serde_json::to_string_pretty(self)?)
    }
}

impl DependenceArtifact {
    pub fn load(path: &Path) -> Result<Self> {
        let a: DependenceArtifact = read_json(path)?;
        if a.format != DEPENDENCE_FORMAT || a.version != ARTIFACT_VERSION {
            return Err(Error::invalid(format!("{}: not a version {ARTIFACT_VERSION} dependence artifact", path.display())));
        }
        a.vine.validate()?;
        if a.vine.columns != a.signature.columns {
            return Err(Error::Mismatch(format!("{}: vine columns differ from its signature", path.display())));
        }
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &serde_json::to_string_pretty(self)?)
    }
}

/// Ingests the configured data and orders its columns as in the config.
pub fn load_data(cfg: &PipelineConfig) -> Result<TimeSeriesFrame> {
    let got = ingest(&cfg.data, IngestOptions { forward_fill: cfg.forward_fill })?;
    for w in &got.warnings {
        log::warn!("{w}");
    }
    let names = cfg.column_names();
    if let Some(extra) = got.frame.columns().iter().find(|c| !names.contains(c)) {
        return Err(Error::invalid(format!("data column '{extra}' has no marginal spec in the config")));
    }
    got.frame.select(&names)
}

/// Number of training rows: everything up to and including the split date.
pub fn training_rows(cfg: &PipelineConfig, frame: &TimeSeriesFrame) -> Result<usize> {
    let split = frame
        .date_index(cfg.forecast.split_date)
        .ok_or_else(|| Error::invalid(format!("split date {} outside the data range", cfg.forecast.split_date)))?;
    if split + 1 < MIN_TRAINING_DAYS {
        return Err(Error::invalid(format!(
            "only {} training days up to {}; need at least {MIN_TRAINING_DAYS}",
            split + 1,
            cfg.forecast.split_date
        )));
    }
    Ok(split + 1)
}

fn fit_marginal_set(cfg: &PipelineConfig, train: &TimeSeriesFrame) -> Result<Vec<MarginalModel>> {
    cfg.columns
        .par_iter()
        .enumerate()
        .map(|(j, c)| fit_marginal(train.column_at(j), &c.marginal).map_err(|e| e.at_stage(&format!("column '{}'", c.name))))
        .collect()
}

pub fn fit_marginals(cfg: &PipelineConfig, frame: &TimeSeriesFrame) -> Result<MarginalsArtifact> {
    let n = training_rows(cfg, frame)?;
    let train = frame.slice(0, n);
    let models = fit_marginal_set(cfg, &train)?;
    for (c, m) in cfg.columns.iter().zip(&models) {
        log::info!("{}: {} (loglik {:.3}, AIC {:.3})", c.name, m.describe(), m.loglik(), m.aic());
    }
    Ok(MarginalsArtifact {
        format: MARGINALS_FORMAT.into(),
        version: ARTIFACT_VERSION,
        signature: Signature { columns: cfg.column_names(), kinds: cfg.kinds() },
        split_date: cfg.forecast.split_date,
        training_rows: n,
        models,
    })
}

/// u-data rows over the training window, starting where every marginal
/// has a predictive distribution.
pub fn u_data(seed: u64, train: &TimeSeriesFrame, models: &[MarginalModel]) -> Result<Vec<Vec<f64>>> {
    let start = models.iter().map(|m| m.first_index()).max().unwrap_or(0);
    let cols = models
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let pit = m.pit(train.column_at(j), substream(seed, "marginal-pit", j as u64))?;
            Ok(pit.values[start - pit.start..].to_vec())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let rows = cols[0].len();
    Ok((0..rows).map(|t| cols.iter().map(|c| c[t]).collect()).collect())
}

fn fit_vine_for(model: ModelLabel, u: &[Vec<f64>], vine_cfg: &VineConfig, columns: Vec<String>) -> Result<RVineModel> {
    let d = columns.len();
    let v = match model {
        ModelLabel::Independent => {
            let mut v = RVineModel::independence(d)?;
            v.n = u.len();
            v.refresh_criteria();
            v
        }
        ModelLabel::Gaussian => vine::gaussian_vine(u)?,
        ModelLabel::VineCopula => vine::fit(u, &vine_cfg.fit_options())?,
    };
    v.with_columns(columns)
}

pub fn fit_dependence(
    cfg: &PipelineConfig,
    frame: &TimeSeriesFrame,
    marginals: &MarginalsArtifact,
    model: ModelLabel,
) -> Result<DependenceArtifact> {
    let sig = Signature { columns: cfg.column_names(), kinds: cfg.kinds() };
    sig.check(&marginals.signature, "marginals artifact")?;
    let train = frame.slice(0, marginals.training_rows);
    let u = u_data(cfg.seed, &train, &marginals.models)?;
    let vine = fit_vine_for(model, &u, &cfg.vine, cfg.column_names())?;
    log::info!("{model}: vine loglik {:.3}, AIC {:.3}", vine.loglik, vine.aic);
    Ok(DependenceArtifact {
        format: DEPENDENCE_FORMAT.into(),
        version: ARTIFACT_VERSION,
        model,
        signature: sig,
        rows: u.len(),
        vine,
    })
}

/// Rolling one-step forecasts over the hold-out window for one model.
pub fn run_forecast(
    cfg: &PipelineConfig,
    frame: &TimeSeriesFrame,
    marginals: &MarginalsArtifact,
    dependence: &DependenceArtifact,
) -> Result<ForecastRun> {
    let sig = Signature { columns: cfg.column_names(), kinds: cfg.kinds() };
    sig.check(&marginals.signature, "marginals artifact")?;
    sig.check(&dependence.signature, "vine artifact")?;
    if marginals.split_date != cfg.forecast.split_date {
        return Err(Error::Mismatch(format!(
            "marginals were fitted up to {}, config splits at {}",
            marginals.split_date, cfg.forecast.split_date
        )));
    }
    let model = dependence.model;
    let mut first = true;
    rolling_forecast(frame, &cfg.forecast, substream(cfg.seed, "forecast", 0), |train| {
        if std::mem::take(&mut first) {
            return Ok(FittedSystem { marginals: marginals.models.clone(), vine: dependence.vine.clone() });
        }
        let models = fit_marginal_set(cfg, train)?;
        let u = u_data(cfg.seed, train, &models)?;
        let vine = fit_vine_for(model, &u, &cfg.vine, cfg.column_names())?;
        Ok(FittedSystem { marginals: models, vine })
    })
}

/// Scores each model's track per variable and flags the best models.
pub fn evaluate(columns: &[String], tracks: &[(ModelLabel, Vec<ForecastPoint>)], alpha: f64) -> Result<EvaluationTable> {
    let mut entries = Vec::new();
    for var in columns {
        for (model, points) in tracks {
            let mine: Vec<&ForecastPoint> =
                points.iter().filter(|p| &p.variable == var && p.observed.is_some()).collect();
            if mine.is_empty() {
                return Err(Error::invalid(format!("{model}: no scored forecasts for '{var}'")));
            }
            let obs: Vec<f64> = mine.iter().map(|p| p.observed.unwrap_or(f64::NAN)).collect();
            let point: Vec<f64> = mine.iter().map(|p| p.point).collect();
            let lower: Vec<f64> = mine.iter().map(|p| p.lower).collect();
            let upper: Vec<f64> = mine.iter().map(|p| p.upper).collect();
            let s = score_track(&obs, &point, &lower, &upper, alpha)
                .map_err(|e| Error::invalid(format!("{model} / {var}: {e}")))?;
            entries.push((var.clone(), *model, obs.len(), s));
        }
    }
    Ok(EvaluationTable::new(alpha, entries))
}

pub fn write_forecast_file(path: &Path, points: &[ForecastPoint]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    write_forecast_csv(points, fs::File::create(path)?)
}

pub fn read_forecast_file(path: &Path) -> Result<Vec<ForecastPoint>> {
    let f = fs::File::open(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    read_forecast_csv(f).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

pub fn write_evaluation(dir: &Path, table: &EvaluationTable) -> Result<()> {
    fs::create_dir_all(dir)?;
    table.write_csv(fs::File::create(dir.join(EVALUATION_CSV))?)?;
    write_text(&dir.join(EVALUATION_JSON), &table.to_json()?)
}

#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub marginals: MarginalsArtifact,
    pub dependence: Vec<DependenceArtifact>,
    pub runs: Vec<(ModelLabel, ForecastRun)>,
    pub table: EvaluationTable,
}

/// Fits the marginals once, fits the three dependence models, forecasts
/// with each and scores them. Nothing is written.
pub fn compare(cfg: &PipelineConfig) -> Result<CompareOutput> {
    cfg.validate()?;
    let frame = load_data(cfg).map_err(|e| e.at_stage("ingest"))?;
    let marginals = fit_marginals(cfg, &frame).map_err(|e| e.at_stage("fit-marginals"))?;
    let per_model: Vec<(DependenceArtifact, ForecastRun)> = ModelLabel::ALL
        .par_iter()
        .map(|&model| {
            let dep = fit_dependence(cfg, &frame, &marginals, model).map_err(|e| e.at_stage("fit-vine"))?;
            let run = run_forecast(cfg, &frame, &marginals, &dep).map_err(|e| e.at_stage("forecast"))?;
            Ok((dep, run))
        })
        .collect::<Result<Vec<_>>>()?;
    let runs: Vec<(ModelLabel, ForecastRun)> =
        ModelLabel::ALL.iter().zip(&per_model).map(|(m, (_, r))| (*m, r.clone())).collect();
    let tracks: Vec<(ModelLabel, Vec<ForecastPoint>)> = runs.iter().map(|(m, r)| (*m, r.points.clone())).collect();
    let table = evaluate(&cfg.column_names(), &tracks, cfg.forecast.alpha).map_err(|e| e.at_stage("evaluate"))?;
    Ok(CompareOutput { marginals, dependence: per_model.into_iter().map(|(d, _)| d).collect(), runs, table })
}

/// Writes every artifact of a comparison into `dir`.
pub fn write_compare(dir: &Path, out: &CompareOutput) -> Result<()> {
    out.marginals.save(&dir.join(MARGINALS_FILE))?;
    for dep in &out.dependence {
        dep.save(&dir.join(vine_file(dep.model)))?;
    }
    for (model, run) in &out.runs {
        write_forecast_file(&dir.join(forecast_file(*model)), &run.points)?;
        if !run.warnings.is_empty() {
            write_text(&dir.join(format!("warnings-{}.txt", model.slug())), &(run.warnings.join("\n") + "\n"))?;
        }
    }
    write_evaluation(dir, &out.table)
}

/// [`compare`] followed by [`write_compare`] into the configured output
/// directory.
pub fn run_compare(cfg: &PipelineConfig) -> Result<EvaluationTable> {
    let out = compare(cfg)?;
    write_compare(&cfg.output_dir, &out).map_err(|e| e.at_stage("write"))?;
    Ok(out.table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing_and_validation() {
        let text = r#"{
            "version": 1,
            "data": "data.csv",
            "columns": [
                {"name": "Hs", "kind": "arima", "order": {"p": 1, "d": 0, "q": 0}, "transform": "log"},
                {"name": "Google", "kind": "zaga"}
            ],
            "vine": {"families": ["gaussian", "clayton"]},
            "forecast": {"m": 1000, "split_date": "2016-02-15"},
            "seed": 7
        }"#;
        let cfg = PipelineConfig::from_json(text).unwrap();
        assert_eq!(cfg.column_names(), ["Hs", "Google"]);
        assert_eq!(cfg.kinds(), [MarginalKind::Arima, MarginalKind::Zaga]);
        assert_eq!(cfg.vine.families, [Family::Gaussian, Family::Clayton]);
        assert!(cfg.vine.independence_test);
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
        let back = PipelineConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);

        assert!(PipelineConfig::from_json(&text.replace("\"seed\": 7", "\"seed_x\": 7")).is_err());
        assert!(PipelineConfig::from_json(&text.replace("\"version\": 1", "\"version\": 2")).is_err());
        assert!(PipelineConfig::from_json(&text.replace("\"Google\"", "\"Hs\"")).is_err());
        assert!(PipelineConfig::from_json(&text.replace("\"m\": 1000", "\"m\": 10")).is_err());
    }

    #[test]
    fn signature_mismatch_names_both_sides() {
        let a = Signature { columns: vec!["Hs".into(), "WL".into()], kinds: vec![MarginalKind::Arima; 2] };
        let b = Signature { columns: vec!["Hs".into(), "Bing".into()], kinds: vec![MarginalKind::Arima; 2] };
        let e = a.check(&b, "vine artifact").unwrap_err().to_string();
        assert!(e.contains("Bing") && e.contains("WL"), "{e}");
        assert!(a.check(&a.clone(), "x").is_ok());
    }
}
