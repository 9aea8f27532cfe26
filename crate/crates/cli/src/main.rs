//! `streetrisk`: synthetic fixtures, geocoding, image retrieval, the
//! annotation service, agreement, calibration, model fitting, evaluation
//! and reporting.
//!
//! Results go to stdout or the named files; failures print one JSON object
//! `{"error": code, "message": text}` to stderr and exit nonzero.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "streetrisk", version, about = "Street-view house features in claim frequency models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic fixture directory.
    Synth(SynthArgs),
    /// Geocode an addresses CSV, updating status and location columns.
    Geocode(GeocodeArgs),
    /// Fill the image cache for resolved addresses.
    FetchImages(FetchArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
    /// Inter-annotator agreement on the common set.
    Kappa(KappaArgs),
    /// Moment-match each annotator's ordinal ratings to the pooled scale.
    Calibrate(CalibrateArgs),
    /// Fit the feature model with the incumbent offset.
    Fit(FitArgs),
    /// Repeated train/test Gini comparison of the null, incumbent and feature models.
    Evaluate(EvaluateArgs),
    /// Full pipeline summary as markdown.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// SynthConfig JSON; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the no-effect configuration (all relative risks 1).
    #[arg(long, conflicts_with = "config")]
    null: bool,
    /// Which addresses get placeholder images under `<out>/imagery`.
    #[arg(long, value_enum, default_value_t = ImageScope::Common)]
    images: ImageScope,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ImageScope {
    None,
    Common,
    All,
}

#[derive(Debug, Args)]
struct ProviderArgs {
    /// Offline fixture directory (`geocode.csv`, `images/`).
    #[arg(long, conflicts_with = "live")]
    fixtures: Option<PathBuf>,
    /// Use the HTTP provider; the key is read from the environment.
    #[arg(long)]
    live: bool,
    /// LiveConfig JSON with endpoint templates and the key variable name.
    #[arg(long, requires = "live")]
    live_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GeocodeArgs {
    #[arg(long)]
    addresses: PathBuf,
    #[command(flatten)]
    provider: ProviderArgs,
    /// Output CSV; defaults to rewriting the input.
    #[arg(long)]
    out: Option<PathBuf>,
    /// ISO country code treated as domestic.
    #[arg(long, default_value = "PL")]
    domestic: String,
}

#[derive(Debug, Args)]
struct FetchArgs {
    #[arg(long)]
    addresses: PathBuf,
    #[arg(long)]
    cache: PathBuf,
    #[command(flatten)]
    provider: ProviderArgs,
    #[arg(long, value_delimiter = ',', default_value = "street,satellite")]
    views: Vec<String>,
    /// Restrict to the address ids listed one per line.
    #[arg(long)]
    only: Option<PathBuf>,
    /// Requests per second across all threads; 0 disables the limit.
    #[arg(long, default_value_t = 10.0)]
    rate: f64,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
    /// Retries per request on retriable failures.
    #[arg(long, default_value_t = 2)]
    retries: u32,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Fixture directory with `addresses.csv` (and optionally `schema.json`).
    #[arg(long)]
    data: PathBuf,
    /// Campaign state directory (logs, snapshot, assignments).
    #[arg(long)]
    state: PathBuf,
    /// Image cache to serve from.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// CampaignConfig JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Campaign seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Static UI files served beside the API.
    #[arg(long)]
    assets: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SchemaArg {
    /// AnnotationSchema JSON; the standard seven-variable schema otherwise.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct KappaArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    common: PathBuf,
    #[command(flatten)]
    schema: SchemaArg,
    /// Comma-separated raters; everyone who rated the common set otherwise.
    #[arg(long, value_delimiter = ',')]
    raters: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    schema: SchemaArg,
    /// Common set; when given, maps are fitted on the other addresses only
    /// and the annotators default to those who worked past the common set.
    #[arg(long)]
    common: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    annotators: Vec<String>,
    /// Also write the fitted maps as JSON.
    #[arg(long)]
    map: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Fixture directory (`policies.csv`, `addresses.csv`, `annotations.csv`, ...).
    #[arg(long, default_value = ".")]
    dataset: PathBuf,
    /// Annotations to use instead of the directory's (e.g. from `calibrate`).
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// JSON list of feature names; the schema's retained features otherwise.
    #[arg(long)]
    variables: Option<PathBuf>,
    #[arg(long)]
    no_calibrate: bool,
    #[arg(long, value_delimiter = ',')]
    annotators: Vec<String>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// FittedModel JSON; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Wald table as CSV.
    #[arg(long)]
    wald: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Axis {
    PolicyCount,
    Exposure,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sampling {
    Split,
    WithReplacement,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Test share of each trial.
    #[arg(long, default_value_t = 0.2)]
    split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Axis::PolicyCount)]
    axis: Axis,
    #[arg(long, value_enum, default_value_t = Sampling::Split)]
    resampling: Sampling,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    eval: EvalArgs,
    #[arg(long, default_value = "gini_report.json")]
    out: PathBuf,
    /// One row per trial: `trial_index,gini_A,gini_B,gini_C`.
    #[arg(long, default_value = "gini_plot.csv")]
    plot: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    eval: EvalArgs,
    /// Markdown output; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
