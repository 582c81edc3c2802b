use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "emotype",
    version,
    about = "Typology clustering and cluster-personalized KNN experiments"
)]
struct Cli {
    /// Worker threads for folds and clustering (0 = all cores). Does not
    /// change any output.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
enum Command {
    /// Generate a synthetic cohort with planted typologies.
    Synth(SynthArgs),
    /// Check per-subject class counts and list subjects that would be excluded.
    Validate(ValidateArgs),
    /// Fit typologies and internal clusters on a labeled cohort.
    Cluster(ClusterArgs),
    /// Enroll new subjects into a fitted model (labeled: M1, unlabeled: M2).
    Assign(AssignArgs),
    /// Repeated subject-level train/test splits.
    EvalConfig1(EvalArgs),
    /// Leave-one-subject-out comparison.
    EvalConfig2(EvalArgs),
    /// Render a saved report.
    Report(ReportArgs),
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    /// Cohort CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth typology JSON to write.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 4)]
    typologies: usize,
    #[arg(long, default_value_t = 10)]
    subjects_per_typology: usize,
    #[arg(long, default_value_t = 20)]
    windows_per_class: usize,
    #[arg(long, default_value_t = 8)]
    features: usize,
    /// One value, or one per typology, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "3.0")]
    class_separation: Vec<f64>,
    #[arg(long, default_value_t = 3.0)]
    typology_separation: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_std: f64,
    #[arg(long, default_value_t = 0.0)]
    label_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct ValidateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 2)]
    min_per_class: usize,
    /// Also write the validation report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Clone)]
struct ClusteringArgs {
    /// Smallest number of typologies tried.
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    /// Largest number of typologies tried.
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    /// Minimum typology size as a fraction of subjects.
    #[arg(long, default_value_t = 0.15)]
    min_frac: f64,
    #[arg(long, default_value_t = 4)]
    ic_min: usize,
    #[arg(long, default_value_t = 6)]
    ic_max: usize,
    /// Minimum internal-cluster size as a fraction of a typology's windows.
    #[arg(long, default_value_t = 0.15)]
    ic_min_frac: f64,
    /// Subjects with fewer windows of either class are excluded.
    #[arg(long, default_value_t = 2)]
    min_per_class: usize,
}

#[derive(Args, Debug, Serialize)]
struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    /// Model JSON to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    clustering: ClusteringArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum MethodChoice {
    /// M1 if every window is labeled, otherwise M2.
    Auto,
    M1,
    M2,
}

#[derive(Args, Debug, Serialize)]
struct AssignArgs {
    /// Model JSON written by `cluster`.
    #[arg(long)]
    model: PathBuf,
    /// CSV with the new subject(s); labels may be -1.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodChoice::Auto)]
    method: MethodChoice,
    /// Also write the assignments as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    #[arg(long)]
    input: PathBuf,
    /// Report JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the rendered table here.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    clustering: ClusteringArgs,
    /// Largest odd k in the KNN grid.
    #[arg(long, default_value_t = 31)]
    knn_k_max: usize,
    /// Weight of a missed fear window relative to a false alarm.
    #[arg(long, default_value_t = emotype_core::knn::DEFAULT_COST)]
    cost: f64,
    /// Tune the cost over 1.0..=2.0 as well instead of fixing it.
    #[arg(long)]
    cost_sweep: bool,
    #[arg(long, default_value_t = 5)]
    tuning_folds: usize,
    /// Number of random splits (eval-config1 only).
    #[arg(long, default_value_t = 20)]
    folds: usize,
    /// Training share of subjects per split (eval-config1 only).
    #[arg(long, default_value_t = 0.7)]
    train_frac: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
enum StyleChoice {
    Json,
    Table,
}

#[derive(Args, Debug, Serialize)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = StyleChoice::Table)]
    style: StyleChoice,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("error: cannot start worker pool: {e}");
        return ExitCode::FAILURE;
    }
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            ExitCode::FAILURE
        }
    }
}
