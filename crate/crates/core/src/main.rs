//! Command-line interface: train, predict, eval, plus the stage-prefix
//! commands select, resample, and featurize.

use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use revhawk::corpus::load_corpus;
use revhawk::pipeline::{
    self, ModelBundle, PipelineConfig, PipelineError, Profile, StageOrder, StopAfter,
};

#[derive(Debug, Parser)]
#[command(
    name = "revhawk",
    about = "Computer-generated review detector: multi-modal features, Harris Hawks feature selection, SMOTE+ENN resampling, stacking ensemble",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// flat key = value config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// root random seed (overrides config)
    #[arg(long)]
    seed: Option<u64>,
    /// scale preset applied before config and flags
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
    /// stage sequencing (overrides config)
    #[arg(long = "stage-order", value_parser = parse_stage_order)]
    stage_order: Option<StageOrder>,
    /// dataset path (overrides config data.path)
    #[arg(long)]
    data: Option<PathBuf>,
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    Profile::parse(s).ok_or_else(|| format!("unknown profile '{s}' (expected desk|paper)"))
}

fn parse_stage_order(s: &str) -> Result<StageOrder, String> {
    StageOrder::parse(s)
        .ok_or_else(|| format!("unknown stage order '{s}' (expected standard|paper_compat)"))
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, PipelineError> {
        let base = PipelineConfig::for_profile(self.profile.unwrap_or(Profile::Desk), 0);
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path, base)?,
            None => base,
        };
        if let Some(profile) = self.profile {
            if config.profile != profile {
                return Err(PipelineError::Config(format!(
                    "--profile {} conflicts with config profile {}",
                    profile.as_str(),
                    config.profile.as_str()
                )));
            }
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(order) = self.stage_order {
            config.stage_order = order;
        }
        if let Some(data) = &self.data {
            config.data_path = Some(data.clone());
        }
        Ok(config)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the full pipeline and write the bundle plus reports
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// output directory for bundle and reports
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// additionally run k-fold cross-validation of the whole pipeline
        #[arg(long)]
        cv: Option<usize>,
    },
    /// Score raw texts (one review per line) with a trained bundle
    Predict {
        /// bundle directory produced by train
        #[arg(long)]
        bundle: PathBuf,
        /// input file of raw texts, one per line
        #[arg(long)]
        input: PathBuf,
        /// output file (defaults to stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a trained bundle against a labeled dataset
    Eval {
        #[arg(long)]
        bundle: PathBuf,
        /// labeled delimited file in the training schema
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run preprocessing, feature fitting, and HHO selection only
    Select {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run through resampling and emit the resampling report only
    Resample {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit the feature space and emit matrix statistics only
    Featurize {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn io_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn run() -> Result<(), PipelineError> {
    match Cli::parse().command {
        Command::Train { config, out, cv } => {
            let config = config.resolve()?;
            let corpus = pipeline::load_configured_corpus(&config)?;
            eprintln!("{}", corpus.ingest);
            let outcome = pipeline::run_stages(&corpus, &config, StopAfter::Train)?;
            pipeline::write_artifacts(&outcome, &corpus, &config, &out)?;
            for line in &outcome.stage_log {
                eprintln!("{line}");
            }
            if let Some(metrics) = &outcome.metrics {
                println!("{metrics}");
            }
            if let Some(k) = cv {
                eprintln!("cross-validating the full pipeline with {k} folds");
                let cv_report = pipeline::cross_validate_pipeline(&corpus, &config, k)?;
                let path = out.join("cv_report.txt");
                std::fs::write(&path, format!("{cv_report}\n")).map_err(io_error(&path))?;
                println!("{cv_report}");
            }
            println!("artifacts written to {}", out.display());
            Ok(())
        }
        Command::Predict { bundle, input, out } => {
            let bundle = ModelBundle::load(&bundle)?;
            let file = std::fs::File::open(&input).map_err(io_error(&input))?;
            let texts: Vec<String> = std::io::BufReader::new(file)
                .lines()
                .collect::<Result<_, _>>()
                .map_err(io_error(&input))?;
            let predictions = pipeline::predict_texts(&bundle, &texts)?;
            let mut sink: Box<dyn Write> = match &out {
                Some(path) => Box::new(std::fs::File::create(path).map_err(io_error(path))?),
                None => Box::new(std::io::stdout().lock()),
            };
            for p in &predictions {
                writeln!(sink, "{:.6}\t{}", p.cg_probability, p.label).map_err(|source| {
                    PipelineError::Io {
                        path: "output stream".to_string(),
                        source,
                    }
                })?;
            }
            Ok(())
        }
        Command::Eval { bundle, data, out } => {
            let bundle = ModelBundle::load(&bundle)?;
            let corpus = load_corpus(&data, &bundle.config.schema)?;
            let (cm, metrics, roc) = pipeline::run_eval(&bundle, &corpus)?;
            pipeline::write_metric_artifacts(&metrics, Some(&cm), &roc, &bundle.config, &out)?;
            println!("{cm}");
            println!("{metrics}");
            println!("artifacts written to {}", out.display());
            Ok(())
        }
        Command::Select { config, out } => {
            let config = config.resolve()?;
            let corpus = pipeline::load_configured_corpus(&config)?;
            let outcome = pipeline::run_stages(&corpus, &config, StopAfter::Select)?;
            pipeline::write_artifacts(&outcome, &corpus, &config, &out)?;
            println!(
                "selected {} of {} columns ({:.1}% reduction)",
                outcome.selection.mask.selected_count(),
                outcome.selection.mask.dim(),
                100.0 * outcome.selection.mask.reduction_ratio()
            );
            println!("artifacts written to {}", out.display());
            Ok(())
        }
        Command::Resample { config, out } => {
            let config = config.resolve()?;
            let corpus = pipeline::load_configured_corpus(&config)?;
            let outcome = pipeline::run_stages(&corpus, &config, StopAfter::Resample)?;
            pipeline::write_artifacts(&outcome, &corpus, &config, &out)?;
            if let Some(resampled) = &outcome.resample {
                println!("{}", resampled.report());
            }
            println!("artifacts written to {}", out.display());
            Ok(())
        }
        Command::Featurize { config, out } => {
            let config = config.resolve()?;
            let corpus = pipeline::load_configured_corpus(&config)?;
            let outcome = pipeline::run_stages(&corpus, &config, StopAfter::Featurize)?;
            pipeline::write_artifacts(&outcome, &corpus, &config, &out)?;
            for line in &outcome.stage_log {
                println!("{line}");
            }
            println!("artifacts written to {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
