use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use overlook_sim::dataset::{generate_synthetic, SyntheticSpec};
use overlook_sim::experiment::{run_experiment, write_report, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "overlook-sim",
    version,
    about = "Online defect prediction under defect overlooking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment grid and write the report tables.
    Run(RunArgs),
    /// Write a synthetic dataset as CSV.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV dataset (repeatable). Replaces datasets from the config file.
    #[arg(long)]
    dataset: Vec<PathBuf>,
    /// Label column of CSV datasets.
    #[arg(long)]
    label_column: Option<String>,
    /// Synthetic dataset `N:RATE:FEATURES:SEP` (repeatable).
    #[arg(long)]
    synthetic: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated subset of reference,ordinary,fixed,proposed.
    #[arg(long)]
    strategies: Option<String>,
    /// Comma-separated Type 1 overlooking probabilities.
    #[arg(long)]
    type1: Option<String>,
    /// Type 2 overlooking probability.
    #[arg(long)]
    type2: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated report formats: csv, markdown.
    #[arg(long)]
    format: Option<String>,
    /// Also dump one trace CSV per run.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// `N:RATE:FEATURES:SEP`
    #[arg(long, default_value = "200:0.3:10:1.5")]
    synthetic: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "synthetic")]
    name: String,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_config(args: &RunArgs) -> overlook_sim::Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if !args.dataset.is_empty() || !args.synthetic.is_empty() {
        config.datasets.clear();
    }
    for d in &args.dataset {
        config.set("dataset", &d.to_string_lossy())?;
    }
    for s in &args.synthetic {
        config.set("synthetic", s)?;
    }
    let overrides = [
        ("label_column", args.label_column.clone()),
        ("seed", args.seed.map(|s| s.to_string())),
        ("reps", args.reps.map(|r| r.to_string())),
        ("strategies", args.strategies.clone()),
        ("type1", args.type1.clone()),
        ("type2", args.type2.clone()),
        (
            "out",
            args.out.as_ref().map(|p| p.to_string_lossy().into_owned()),
        ),
        ("format", args.format.clone()),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            config.set(key, &v)?;
        }
    }
    if args.trace {
        config.dump_traces = true;
    }
    config.validate()?;
    Ok(config)
}

fn run(args: &RunArgs) -> overlook_sim::Result<bool> {
    let config = build_config(args)?;
    let report = run_experiment(&config)?;
    let written = write_report(&report, &config.output_dir)?;
    let tables = written
        .iter()
        .filter(|p| p.parent() == Some(config.output_dir.as_path()));
    for path in tables {
        println!("wrote {}", path.display());
    }
    let failed = report.failed_cells();
    for f in &failed {
        eprintln!("failed cell: {f}");
    }
    Ok(failed.is_empty())
}

fn generate(args: &GenerateArgs) -> overlook_sim::Result<()> {
    let spec = SyntheticSpec::parse(&args.synthetic)?;
    let ds = generate_synthetic(&args.name, &spec, args.seed)?;
    let csv = ds.to_csv();
    match &args.out {
        Some(path) => std::fs::write(path, csv).map_err(|source| overlook_sim::Error::Io {
            path: path.clone(),
            source,
        })?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Generate(args) => generate(args).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
