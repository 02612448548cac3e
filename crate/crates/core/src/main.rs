use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use panfis::features::{self, Feature, DEFAULT_BINS};
use panfis::harness::{self, RunOutput};
use panfis::learner::write_trace_csv;
use panfis::{load_model, save_model, Config, Strategy};

#[derive(Parser)]
#[command(name = "panfis", version, about = "Evolving fuzzy learner experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the nine time-domain features from raw vibration CSV files.
    Extract {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Cut each file into consecutive windows of this many samples.
        #[arg(long)]
        window_size: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        /// Feature CSV destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict one feature from the other eight; train on the first rows, test on the rest.
    RunDirect {
        dataset: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 108)]
        split: usize,
        #[command(flatten)]
        learner: LearnerArgs,
        #[command(flatten)]
        outputs: OutputArgs,
    },
    /// One-step-ahead prediction of a feature from its two previous values.
    RunTimeseries {
        dataset: PathBuf,
        #[arg(long)]
        target: String,
        #[command(flatten)]
        learner: LearnerArgs,
        #[command(flatten)]
        outputs: OutputArgs,
    },
    /// Print a saved model as readable IF-THEN rules.
    ShowRules {
        model: PathBuf,
        /// Mahalanobis radius for the fuzzy-set cut.
        #[arg(long)]
        r: Option<f64>,
    },
}

#[derive(Args)]
struct LearnerArgs {
    /// Flat key=value file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    g1: Option<f64>,
    #[arg(long)]
    g2: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    merge_threshold: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
}

impl LearnerArgs {
    fn resolve(&self) -> Result<Config> {
        let mut config = Config::new(1);
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            harness::apply_config_text(&mut config, &text)?;
        }
        let overrides = [
            (self.g1, &mut config.g1),
            (self.g2, &mut config.g2),
            (self.epsilon, &mut config.epsilon),
            (self.merge_threshold, &mut config.merge_threshold),
            (self.omega, &mut config.omega),
            (self.r, &mut config.mahalanobis_r),
        ];
        for (value, slot) in overrides {
            if let Some(v) = value {
                *slot = v;
            }
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Report destination (stdout when omitted).
    #[arg(long)]
    report_out: Option<PathBuf>,
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn finish(mut output: RunOutput, outputs: &OutputArgs) -> Result<()> {
    if let Some(path) = &outputs.trace_out {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_trace_csv(&output.fit.steps, file)?;
        output.report.trace = Some(path.display().to_string());
    }
    if let Some(path) = &outputs.model_out {
        save_model(&output.model, path)?;
    }
    let mut report = output.report.to_json()?;
    report.push('\n');
    write_or_print(outputs.report_out.as_deref(), &report)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Extract { inputs, window_size, bins, out } => {
            let rows = harness::extract(&inputs, window_size, bins, Strategy::default())?;
            let mut buf = Vec::new();
            features::write_feature_table(&rows, &mut buf)?;
            write_or_print(out.as_deref(), &String::from_utf8(buf)?)?;
        }
        Command::RunDirect { dataset, target, split, learner, outputs } => {
            let target: Feature = target.parse()?;
            let table = harness::load_table(&dataset)?;
            let output = harness::run_direct(&table, target, &learner.resolve()?, split)?;
            finish(output, &outputs)?;
        }
        Command::RunTimeseries { dataset, target, learner, outputs } => {
            let target: Feature = target.parse()?;
            let table = harness::load_table(&dataset)?;
            let output = harness::run_timeseries(&table, target, &learner.resolve()?)?;
            finish(output, &outputs)?;
        }
        Command::ShowRules { model, r } => {
            let model = load_model(&model)?;
            print!("{}", harness::show_rules(&model, r)?);
        }
    }
    Ok(())
}
