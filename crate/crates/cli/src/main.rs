use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use annotinfer::io::{
    emit_figure, read_dataset_csv, read_grid_json, read_summaries, write_summary, RunManifest,
    SummaryFormat,
};
use annotinfer::{
    dsl_regress, label_regression, optimist_mean, pessimist_mean, ppi_mean, run_grid, Dataset64,
    Estimate64, ExperimentGrid, LabelSource, RegressionSpec,
};
use annotinfer_annotator::{
    annotate_documents, read_documents_csv, write_annotations_csv, AnnotationJob, Codebook, Outcome,
};

#[derive(Parser)]
#[command(name = "annotinfer", version, about = "Inference with LLM-produced labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo grid and write per-cell summaries plus a run manifest.
    Simulate(SimulateArgs),
    /// Apply one estimator to a labeled dataset CSV and print the result as JSON.
    Estimate(EstimateArgs),
    /// Draw a summary table as an SVG figure.
    Figure(FigureArgs),
    /// Label documents through an OpenAI-compatible chat-completions endpoint.
    Annotate(AnnotateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    DeltaSweep,
    StrategyComparison,
    ConditionMatrix,
}

impl Preset {
    fn grid(self) -> ExperimentGrid {
        match self {
            Preset::DeltaSweep => ExperimentGrid::delta_sweep(),
            Preset::StrategyComparison => ExperimentGrid::strategy_comparison(),
            Preset::ConditionMatrix => ExperimentGrid::condition_matrix(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for SummaryFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => SummaryFormat::Csv,
            Format::Json => SummaryFormat::Json,
        }
    }
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Grid JSON (fields: base_config, deltas, conditions, estimators, n_seeds, seed_base).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in grid to run instead of a config file.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Overrides the grid's seed_base.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, required_unless_present = "print_grid")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = default_parallelism())]
    parallelism: usize,
    /// Print the resolved grid JSON and exit.
    #[arg(long)]
    print_grid: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Pessimist,
    Optimist,
    Ppi,
    Ols,
    Dsl,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelArg {
    Gold,
    Llm,
}

#[derive(clap::Args)]
struct EstimateArgs {
    /// Dataset CSV with header id,y,<covariates…>,llm_label,gold_label.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    estimator: EstimatorArg,
    /// Known sampling probability for dsl; defaults to n/N.
    #[arg(long)]
    pi: Option<f64>,
    /// Label column regressed by ols.
    #[arg(long, value_enum, default_value = "gold")]
    labels: LabelArg,
}

#[derive(clap::Args)]
struct FigureArgs {
    /// Summary table written by `simulate` (.csv or .json).
    #[arg(long)]
    summaries: PathBuf,
    /// Keep only this estimator's cells (required when the table has several).
    #[arg(long)]
    estimator: Option<String>,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct AnnotateArgs {
    /// Documents CSV with header id,text.
    #[arg(long)]
    documents: PathBuf,
    /// Bundled codebook name (ace, acled, cameo, ccc, protest_surface) or a codebook JSON path.
    #[arg(long)]
    codebook: String,
    /// Chat-completions URL.
    #[arg(long)]
    endpoint: String,
    #[arg(long)]
    model: String,
    /// Output CSV with header id,llm_label,raw.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    #[arg(long, default_value_t = 3)]
    max_retries: u32,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Figure(a) => figure(a),
        Command::Annotate(a) => annotate(a),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut grid = match (&args.config, args.preset) {
        (Some(path), _) => {
            read_grid_json(path).with_context(|| format!("reading grid {}", path.display()))?
        }
        (None, Some(p)) => p.grid(),
        (None, None) => unreachable!("clap requires --config or --preset"),
    };
    if let Some(seed) = args.seed {
        grid.seed_base = seed;
    }
    grid.validate()?;
    if args.print_grid {
        println!("{}", serde_json::to_string_pretty(&grid)?);
        return Ok(());
    }
    let out = args.out.expect("clap requires --out");
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let mut manifest = RunManifest::start(&grid)?;
    let summaries = run_grid(&grid, args.parallelism)?;
    let format = SummaryFormat::from(args.format);
    let summary_path = out.join(format!("summary.{}", format.extension()));
    write_summary(&summaries, &summary_path, format, &manifest.config_hash)?;
    manifest.outputs.push(file_name(&summary_path));
    manifest.finish();
    manifest.write(out.join("manifest.json"))?;
    eprintln!(
        "{} cells x {} seeds -> {}",
        summaries.len(),
        grid.n_seeds,
        summary_path.display()
    );
    Ok(())
}

fn file_name(p: &Path) -> PathBuf {
    p.file_name().map_or_else(|| p.to_path_buf(), PathBuf::from)
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let ds: Dataset64 = read_dataset_csv(&args.data)
        .with_context(|| format!("reading {}", args.data.display()))?;
    let spec = RegressionSpec::label_on_covariates(ds.covariates.len());
    let result: Estimate64 = match args.estimator {
        EstimatorArg::Pessimist => pessimist_mean(&ds.gold_labels())?,
        EstimatorArg::Optimist => optimist_mean(&ds.llm_labels()?)?,
        EstimatorArg::Ppi => ppi_mean(&ds.llm_labels()?, &ds.paired_labels()?)?,
        EstimatorArg::Ols => {
            let source = match args.labels {
                LabelArg::Gold => LabelSource::Gold,
                LabelArg::Llm => LabelSource::Llm,
            };
            label_regression(&ds, &spec, source)?
        }
        EstimatorArg::Dsl => {
            let pi = match args.pi {
                Some(pi) => pi,
                None if ds.n_total() > 0 => ds.n_labeled() as f64 / ds.n_total() as f64,
                None => bail!("dataset is empty"),
            };
            dsl_regress(&ds, &spec, pi)?
        }
    };
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn figure(args: FigureArgs) -> Result<()> {
    let (mut summaries, manifest) = read_summaries(&args.summaries)
        .with_context(|| format!("reading {}", args.summaries.display()))?;
    if let Some(name) = &args.estimator {
        summaries.retain(|s| s.estimator.name() == name);
        if summaries.is_empty() {
            bail!("no cells for estimator '{name}'");
        }
    }
    emit_figure(&summaries, &args.out, &manifest)?;
    Ok(())
}

fn annotate(args: AnnotateArgs) -> Result<()> {
    let documents = read_documents_csv(&args.documents)
        .with_context(|| format!("reading {}", args.documents.display()))?;
    let codebook = Codebook::load(&args.codebook)?;
    let mut job = AnnotationJob::new(documents, codebook, args.endpoint, args.model);
    job.concurrency = args.concurrency;
    job.max_retries = args.max_retries;
    job.timeout = Duration::from_secs(args.timeout);
    let rows = annotate_documents(&job)?;
    write_annotations_csv(&rows, &args.out)?;
    let failed = rows.iter().filter(|r| r.label().is_none()).count();
    let parse_failures = rows.iter().filter(|r| r.outcome == Outcome::ParseFailure).count();
    eprintln!(
        "{} documents, {} labeled, {} parse failures, {} request failures",
        rows.len(),
        rows.len() - failed,
        parse_failures,
        failed - parse_failures
    );
    Ok(())
}
