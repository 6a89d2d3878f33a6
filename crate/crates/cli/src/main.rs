use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vineflood_core::metrics::{EvaluationTable, ModelLabel};
use vineflood_core::pipeline::{self, DependenceArtifact, MarginalsArtifact, PipelineConfig};
use vineflood_core::sentiment::{self, Lexicon, LexiconKind};
use vineflood_core::synth::{self, Preset};
use vineflood_core::{Error, Result};

#[derive(Parser)]
#[command(name = "vineflood", version, about = "Vine-copula forecasting of daily environmental and social-media series")]
struct Cli {
    /// Log progress (repeat for more detail). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (versioned JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Independent,
    Gaussian,
    Vine,
    All,
}

impl ModelArg {
    fn labels(self) -> Vec<ModelLabel> {
        match self {
            ModelArg::Independent => vec![ModelLabel::Independent],
            ModelArg::Gaussian => vec![ModelLabel::Gaussian],
            ModelArg::Vine => vec![ModelLabel::VineCopula],
            ModelArg::All => ModelLabel::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Binary,
    Scored,
}

#[derive(Subcommand)]
enum Command {
    /// Fit every column's marginal on the training window.
    FitMarginals(Common),
    /// Fit a dependence model on the u-data of fitted marginals.
    FitVine {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "vine")]
        model: ModelArg,
    },
    /// Rolling one-day-ahead forecasts over the hold-out window.
    Forecast {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "vine")]
        model: ModelArg,
    },
    /// Score the forecast tracks found in the output directory.
    Evaluate(Common),
    /// Fit, forecast and score the independence, Gaussian and full vines.
    Compare(Common),
    /// Turn a dated text corpus into a daily population-scaled score series.
    Sentiment {
        /// CSV with `date,text` columns.
        #[arg(long)]
        corpus: PathBuf,
        /// TSV lexicon, `word<TAB>score` per line.
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Resident population used for scaling.
        #[arg(long)]
        population: u64,
        /// Output column name.
        #[arg(long, default_value = "sentiment")]
        name: String,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded synthetic dataset and matching config.
    #[command(hide = true)]
    Synth {
        #[arg(long, default_value = "asymmetric6")]
        preset: String,
        #[arg(long, default_value_t = 1000)]
        train: usize,
        #[arg(long, default_value_t = 365)]
        holdout: usize,
        #[arg(long, default_value_t = 10_000)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory receiving data.csv and config.json.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn print_table(t: &EvaluationTable) {
    println!("{:<14} {:<12} {:>12} {:>12} {:>8} {:>8}  best", "variable", "model", "mse", "mis", "nnse", "dcor");
    for r in &t.rows {
        println!(
            "{:<14} {:<12} {:>12.6} {:>12.6} {:>8.4} {:>8.4}  {}",
            r.variable,
            r.model.name(),
            r.mse,
            r.mis,
            r.nnse,
            r.dcor,
            r.best()
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::FitMarginals(c) => {
            let cfg = load_config(&c)?;
            let frame = pipeline::load_data(&cfg).map_err(|e| e.at_stage("ingest"))?;
            let art = pipeline::fit_marginals(&cfg, &frame).map_err(|e| e.at_stage("fit-marginals"))?;
            let path = cfg.output_dir.join(pipeline::MARGINALS_FILE);
            art.save(&path)?;
            for (name, m) in art.signature.columns.iter().zip(&art.models) {
                println!("{name}: {} (AIC {:.3})", m.describe(), m.aic());
            }
            println!("wrote {}", path.display());
        }
        Command::FitVine { common, model } => {
            let cfg = load_config(&common)?;
            let frame = pipeline::load_data(&cfg).map_err(|e| e.at_stage("ingest"))?;
            let marg = MarginalsArtifact::load(&cfg.output_dir.join(pipeline::MARGINALS_FILE))
                .map_err(|e| e.at_stage("fit-vine"))?;
            for label in model.labels() {
                let dep = pipeline::fit_dependence(&cfg, &frame, &marg, label).map_err(|e| e.at_stage("fit-vine"))?;
                let path = cfg.output_dir.join(pipeline::vine_file(label));
                dep.save(&path)?;
                println!("{label}: loglik {:.3}, AIC {:.3}; wrote {}", dep.vine.loglik, dep.vine.aic, path.display());
            }
        }
        Command::Forecast { common, model } => {
            let cfg = load_config(&common)?;
            let frame = pipeline::load_data(&cfg).map_err(|e| e.at_stage("ingest"))?;
            let marg = MarginalsArtifact::load(&cfg.output_dir.join(pipeline::MARGINALS_FILE))
                .map_err(|e| e.at_stage("forecast"))?;
            for label in model.labels() {
                let dep = DependenceArtifact::load(&cfg.output_dir.join(pipeline::vine_file(label)))
                    .map_err(|e| e.at_stage("forecast"))?;
                if dep.model != label {
                    return Err(Error::Mismatch(format!("vine artifact holds a {} model, expected {label}", dep.model))
                        .at_stage("forecast"));
                }
                let run = pipeline::run_forecast(&cfg, &frame, &marg, &dep).map_err(|e| e.at_stage("forecast"))?;
                let path = cfg.output_dir.join(pipeline::forecast_file(label));
                pipeline::write_forecast_file(&path, &run.points)?;
                println!("{label}: {} forecasts, {} skipped days; wrote {}", run.points.len(), run.warnings.len(), path.display());
            }
        }
        Command::Evaluate(c) => {
            let cfg = load_config(&c)?;
            let mut tracks = Vec::new();
            for label in ModelLabel::ALL {
                let path = cfg.output_dir.join(pipeline::forecast_file(label));
                if path.exists() {
                    tracks.push((label, pipeline::read_forecast_file(&path)?));
                }
            }
            if tracks.is_empty() {
                return Err(Error::invalid(format!("no forecast CSVs in {}", cfg.output_dir.display())));
            }
            let table = pipeline::evaluate(&cfg.column_names(), &tracks, cfg.forecast.alpha)
                .map_err(|e| e.at_stage("evaluate"))?;
            pipeline::write_evaluation(&cfg.output_dir, &table)?;
            print_table(&table);
        }
        Command::Compare(c) => {
            let cfg = load_config(&c)?;
            let table = pipeline::run_compare(&cfg)?;
            print_table(&table);
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::Sentiment { corpus, lexicon, kind, population, name, out } => {
            let kind = match kind {
                KindArg::Binary => LexiconKind::Binary,
                KindArg::Scored => LexiconKind::Scored,
            };
            let lex = Lexicon::load(&lexicon, kind)?;
            let docs = sentiment::read_corpus(&corpus)?;
            let scored = sentiment::score_corpus(&docs, &lex);
            let series = sentiment::aggregate_daily(&scored, population, None)?;
            write_parent(&out)?;
            sentiment::write_daily_csv(&series, &name, fs::File::create(&out)?)?;
            println!("{} documents over {} days; wrote {}", docs.len(), series.dates.len(), out.display());
        }
        Command::Synth { preset, train, holdout, m, seed, out } => {
            let preset: Preset = preset.parse()?;
            let ds = synth::dataset(preset, train, holdout, m, seed, PathBuf::from("data.csv"), PathBuf::from("out"))?;
            fs::create_dir_all(&out)?;
            ds.frame.write_csv(fs::File::create(out.join("data.csv"))?)?;
            fs::write(out.join("config.json"), ds.config.to_json()? + "\n")?;
            println!("wrote {} days of {preset} to {}", ds.frame.len(), out.display());
        }
    }
    Ok(())
}

fn write_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
