use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spectral_bench::embed::TsneConfig;
use spectral_bench::eval::ParamValue;
use spectral_bench::SgFilterSpec;
use spectral_bench_cli::commands::{self, PredictRequest, TrainRequest};
use spectral_bench_cli::config::{load_grid, parse_param, ConfigFile, Overrides};
use spectral_bench_cli::{compare, exit, init_thread_pool, run_experiment, CliError, CliResult, ExperimentConfig, Mode};

#[derive(Parser)]
#[command(name = "spectral-bench", version, about = "Spectral classification experiments: SG filtering, 1D-CNN, KNN, PLS-DA, cross-validation, t-SNE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a Savitzky-Golay filter to every spectrum of a CSV file.
    Preprocess {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 11)]
        window: usize,
        #[arg(long, default_value_t = 3)]
        degree: usize,
        #[arg(long, default_value_t = 2)]
        deriv: usize,
    },
    /// k-fold cross-validation with fixed hyperparameters.
    Cv(ExperimentArgs),
    /// Cross-validation with a grid search inside every outer fold.
    NestedCv(ExperimentArgs),
    /// Fit on a whole dataset and write a checkpoint.
    Train {
        #[command(flatten)]
        model_args: ModelArgs,
        /// Checkpoint to write.
        #[arg(long)]
        model: PathBuf,
    },
    /// Classify a CSV file with a checkpoint.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write per-row predictions here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the CNN's penultimate-layer activations as a dataset CSV.
        #[arg(long)]
        dump_features: Option<PathBuf>,
        /// Do not apply the preprocessing stored in the checkpoint.
        #[arg(long)]
        raw: bool,
    },
    /// Two-dimensional t-SNE embedding written as x,y,label rows.
    Embed {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Tabulate accuracy, specificity and sensitivity across reports.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// cnn, knn or plsda.
    #[arg(long)]
    algo: Option<String>,
    /// Hyperparameter override, e.g. k_neighbors=3 or learning_rate=0.001.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, ParamValue)>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    deriv: Option<usize>,
    /// Disable Savitzky-Golay preprocessing.
    #[arg(long, conflicts_with_all = ["window", "degree", "deriv"])]
    no_sg: bool,
    /// Class name to treat as positive in binary metrics.
    #[arg(long)]
    positive: Option<String>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of folds.
    #[arg(long)]
    k: Option<usize>,
    /// Output directory for the run.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace an existing output directory.
    #[arg(long)]
    force: bool,
    /// Hyperparameter grid (JSON or TOML with an `axes` list).
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Evaluate only this many randomly drawn grid points.
    #[arg(long)]
    search_samples: Option<usize>,
    /// Keep class proportions equal across folds.
    #[arg(long)]
    stratified: bool,
    /// Also write a t-SNE embedding of the dataset.
    #[arg(long)]
    embed: bool,
}

fn overrides(m: &ModelArgs) -> Overrides {
    Overrides {
        dataset: m.data.clone(),
        no_sg: m.no_sg,
        window: m.window,
        degree: m.degree,
        deriv: m.deriv,
        algo: m.algo.clone(),
        params: m.params.clone(),
        seed: m.seed,
        positive: m.positive.clone(),
        ..Overrides::default()
    }
}

fn config_file(m: &ModelArgs) -> CliResult<ConfigFile> {
    m.config.as_deref().map_or(Ok(ConfigFile::default()), ConfigFile::load)
}

fn experiment(args: ExperimentArgs, mode: Mode) -> CliResult<()> {
    let file = config_file(&args.model)?;
    let mut flags = overrides(&args.model);
    flags.k = args.k;
    flags.out = args.out;
    flags.grid = args.grid.as_deref().map(load_grid).transpose()?;
    flags.search_samples = args.search_samples;
    flags.stratified = args.stratified;
    flags.embed = args.embed;
    let config = ExperimentConfig::resolve(file, flags)?;
    let report = run_experiment(&config, mode, args.force)?;
    let r = &report.body.results;
    println!(
        "{} on {}: accuracy {:.4} ± {:.4} over {} folds (representative fold {})",
        config.algorithm.name(),
        report.body.dataset.name,
        r.mean_accuracy,
        r.std_accuracy,
        r.k,
        r.representative_fold
    );
    println!("wrote {}", config.out.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    init_thread_pool()?;
    match cli.command {
        Command::Preprocess {
            input,
            output,
            window,
            degree,
            deriv,
        } => {
            let spec = SgFilterSpec::new(window, degree, deriv).map_err(|e| CliError::Config(e.to_string()))?;
            commands::preprocess_file(&input, &output, &spec)
        }
        Command::Cv(args) => experiment(args, Mode::Cv),
        Command::NestedCv(args) => experiment(args, Mode::NestedCv),
        Command::Train { model_args, model } => {
            let file = config_file(&model_args)?;
            let mut flags = overrides(&model_args);
            // The experiment resolver wants an output directory; training writes only the checkpoint.
            flags.out = Some(model.clone());
            let config = ExperimentConfig::resolve(file, flags)?;
            commands::train_file(&TrainRequest {
                dataset: &config.dataset,
                preprocessing: config.preprocessing,
                algorithm: config.algorithm.clone(),
                seed: config.seed,
                positive: config.positive.as_deref(),
                model: &model,
            })?;
            println!("wrote {}", model.display());
            Ok(())
        }
        Command::Predict {
            model,
            data,
            out,
            dump_features,
            raw,
        } => {
            let summary = commands::predict_file(&PredictRequest {
                model: &model,
                dataset: &data,
                raw,
                output: out.as_deref(),
                dump_features: dump_features.as_deref(),
            })?;
            if out.is_none() {
                print!("{}", summary.csv);
            }
            if let Some(acc) = summary.accuracy {
                eprintln!("accuracy {acc:.4} on {} samples", summary.samples);
            }
            Ok(())
        }
        Command::Embed {
            input,
            output,
            perplexity,
            iterations,
            seed,
        } => {
            let config = TsneConfig {
                perplexity,
                iterations,
                seed,
                ..TsneConfig::default()
            };
            commands::embed_file(&input, &output, &config)
        }
        Command::Compare { reports, out } => {
            let table = compare(&reports)?;
            print!("{}", table.to_table());
            if let Some(path) = out {
                std::fs::write(&path, table.to_csv()).map_err(|e| CliError::io(&path, e))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
