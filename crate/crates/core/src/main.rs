use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use maldet::bench::ModelBundle;
use maldet::data::{DEFAULT_LABEL_COLUMN, DEFAULT_POSITIVE_LABEL};
use maldet::preprocess::DEFAULT_Z_THRESHOLD;
use maldet::selection::DEFAULT_K;
use maldet::{
    apply_selection, load_csv, render_csv_bundle, render_json, render_markdown, rfe, run_benchmark,
    synth_generate, zscore_filter, BenchmarkPlan, DataSource, Dataset, Error, Family,
    FeatureSchema, ModelConfig, Result, RfeResult, SynthPattern, SynthSpec,
};

#[derive(Parser)]
#[command(
    name = "maldet",
    version,
    about = "Malware classification benchmark toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pattern {
    Clusters,
    Parity,
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimator {
    Logreg,
    Forest,
}

#[derive(clap::Args)]
struct LabelArgs {
    /// Name of the label column.
    #[arg(long = "label-col", default_value = DEFAULT_LABEL_COLUMN)]
    label_col: String,
    /// Label value treated as malware (class 1).
    #[arg(long = "positive-label", default_value = DEFAULT_POSITIVE_LABEL)]
    positive_label: String,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-class dataset.
    Synth {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        features: usize,
        #[arg(long)]
        informative: usize,
        #[arg(long)]
        sep: f64,
        #[arg(long, default_value_t = 0.0)]
        flip: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "clusters")]
        pattern: Pattern,
        #[arg(long)]
        out: PathBuf,
    },
    /// Remove z-score outliers.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        label: LabelArgs,
        #[arg(long = "z-thresh", default_value_t = DEFAULT_Z_THRESHOLD)]
        z_thresh: f64,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recursive feature elimination.
    Select {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        label: LabelArgs,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, value_enum, default_value = "logreg")]
        estimator: Estimator,
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one model on a training CSV.
    Train {
        #[arg(long)]
        model: Family,
        /// JSON object of hyperparameters; omitted fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        train: PathBuf,
        #[command(flatten)]
        label: LabelArgs,
        /// RFE result restricting the feature columns.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch training trace (network models).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score a trained model on a test CSV.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[command(flatten)]
        label: LabelArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        roc: Option<PathBuf>,
    },
    /// Run a full benchmark plan.
    Bench {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        markdown: Option<PathBuf>,
        #[arg(long = "csv-dir")]
        csv_dir: Option<PathBuf>,
    },
}

fn load(path: &Path, label: &LabelArgs) -> Result<Dataset> {
    let schema = FeatureSchema::infer_from_csv(path, &label.label_col, &label.positive_label)?;
    load_csv(path, &schema)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            rows,
            features,
            informative,
            sep,
            flip,
            seed,
            pattern,
            out,
        } => {
            let spec = SynthSpec {
                n_rows: rows,
                n_features: features,
                n_informative: informative,
                class_separation: sep,
                label_flip_rate: flip,
                seed,
                pattern: match pattern {
                    Pattern::Clusters => SynthPattern::Clusters,
                    Pattern::Parity => SynthPattern::Parity,
                },
            };
            synth_generate(&spec)?.write_csv(out)
        }
        Command::Preprocess {
            input,
            label,
            z_thresh,
            report,
            out,
        } => {
            let data = load(&input, &label)?;
            let (clean, rep) = zscore_filter(&data, z_thresh)?;
            if let Some(p) = report {
                write_json(&p, &rep)?;
            }
            clean.write_csv(out)
        }
        Command::Select {
            input,
            label,
            k,
            estimator,
            step,
            seed,
            out,
        } => {
            let data = load(&input, &label)?;
            let family = match estimator {
                Estimator::Logreg => Family::Logreg,
                Estimator::Forest => Family::Forest,
            };
            let result = rfe(&data, k, &family.default_config(), step, seed)?;
            write_json(&out, &result)
        }
        Command::Train {
            model,
            config,
            train,
            label,
            features,
            seed,
            out,
            trace,
        } => {
            let overrides = match config {
                Some(p) => read_json(&p)?,
                None => serde_json::Value::Null,
            };
            let cfg = ModelConfig::from_partial(model, &overrides)?;
            let mut data = load(&train, &label)?;
            if let Some(p) = features {
                let sel: RfeResult = serde_json::from_value(read_json(&p)?)?;
                data = apply_selection(&data, &sel)?;
            }
            let bundle = ModelBundle::fit(model.as_str(), &data, &cfg, seed)?;
            if let (Some(p), Some(t)) = (trace, &bundle.trace) {
                t.write_csv(p)?;
            }
            write_json(&out, &bundle)
        }
        Command::Evaluate {
            model,
            test,
            label,
            out,
            roc,
        } => {
            let bundle: ModelBundle = serde_json::from_value(read_json(&model)?)?;
            let data = load(&test, &label)?;
            let (report, curve) = bundle.evaluate(&data)?;
            if let Some(p) = roc {
                curve.write_csv(p)?;
            }
            write_json(&out, &report)
        }
        Command::Bench {
            plan,
            out,
            markdown,
            csv_dir,
        } => {
            let mut p = BenchmarkPlan::from_json(&std::fs::read_to_string(&plan)?)?;
            if let DataSource::Csv { path, .. } = &mut p.source {
                if path.is_relative() {
                    if let Some(dir) = plan.parent() {
                        *path = dir.join(&*path);
                    }
                }
            }
            let report = run_benchmark(&p)?;
            std::fs::write(&out, render_json(&report)?)?;
            if let Some(md) = markdown {
                std::fs::write(md, render_markdown(&report))?;
            }
            if let Some(dir) = csv_dir {
                render_csv_bundle(&report, dir)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code: Error = e;
            ExitCode::from(code.exit_code() as u8)
        }
    }
}
