use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod error;

use error::CliError;

/// Sketch recognition and category-epitome analysis.
///
/// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
/// failure. Set EPITOME_THREADS to cap parallelism.
#[derive(Debug, Parser)]
#[command(name = "epitome", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert SVG (or JSON) sketches under <in>/<category>/ to canonical JSON.
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render, dilate and expand every sketch by the transform battery.
    Augment {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pipeline config (JSON); supplies side and battery.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Transform battery manifest (JSON list of 30 transforms).
        #[arg(long)]
        battery: Option<PathBuf>,
        /// Write only the battery manifest and the sketch index, no images.
        #[arg(long)]
        manifest_only: bool,
    },
    /// Split, fit features, grid-search, train and evaluate on the held-out part.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate a model; prints the report as JSON on stdout.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = Subset::All)]
        subset: Subset,
    },
    /// Extract the category-epitome of every sketch.
    Epitome {
        /// Trained model; not needed with --stub-labels.
        #[arg(long, required_unless_present = "stub_labels")]
        model: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Newline-delimited JSON results.
        #[arg(long)]
        out: PathBuf,
        /// Also write each epitome canvas as PGM next to the results.
        #[arg(long)]
        dump_canvases: bool,
        /// JSON object mapping sketch id to its label sequence, used instead
        /// of a classifier.
        #[arg(long)]
        stub_labels: Option<PathBuf>,
        /// Raster side for --dump-canvases when no model is given.
        #[arg(long, default_value_t = 256)]
        side: usize,
        #[arg(long, value_enum, default_value_t = Subset::All)]
        subset: Subset,
    },
    /// Per-category statistics, exceedance curves and plots from epitome results.
    Analyze {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Median cutoffs for the headline fractions.
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.75")]
        cutoffs: Vec<f64>,
        /// Exceedance thresholds as start:stop:step.
        #[arg(long, default_value = "0:1:0.05")]
        thresholds: String,
    },
    /// Run the built-in oracle suites.
    Selftest,
    /// Write the procedurally generated five-category dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        per_category: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        jitter: f64,
    },
}

/// Flags that override values from the config file.
#[derive(Debug, Args)]
struct Overrides {
    #[arg(long)]
    side: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    feature_seed: Option<u64>,
    #[arg(long, value_parser = ["linear", "rbf"])]
    kernel: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    /// Train the final model without the augmentation battery.
    #[arg(long)]
    no_augment: bool,
}

/// Which part of the data to use, recomputed from the split stored in the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Subset {
    All,
    Train,
    Test,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("EPITOME_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("EPITOME_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Convert { input, out } => commands::convert(&input, &out),
        Command::Augment {
            data,
            out,
            config,
            battery,
            manifest_only,
        } => commands::augment(&data, &out, config.as_deref(), battery.as_deref(), manifest_only),
        Command::Train {
            data,
            config,
            out,
            overrides,
        } => commands::train(&data, config.as_deref(), &out, &overrides),
        Command::Eval { model, data, subset } => commands::eval(&model, &data, subset),
        Command::Epitome {
            model,
            data,
            out,
            dump_canvases,
            stub_labels,
            side,
            subset,
        } => commands::epitome(commands::EpitomeArgs {
            model: model.as_deref(),
            data: &data,
            out: &out,
            dump_canvases,
            stub_labels: stub_labels.as_deref(),
            side,
            subset,
        }),
        Command::Analyze {
            results,
            out,
            cutoffs,
            thresholds,
        } => commands::analyze(&results, &out, &cutoffs, &thresholds),
        Command::Selftest => commands::selftest(),
        Command::Synth {
            out,
            per_category,
            seed,
            jitter,
        } => commands::synth(&out, per_category, seed, jitter),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("epitome: {e}");
            ExitCode::from(e.code())
        }
    }
}
