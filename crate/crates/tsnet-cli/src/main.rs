use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use tsnet_cli::checkpoint::{self, NetRole};
use tsnet_cli::config::RunConfig;
use tsnet_cli::dataset;
use tsnet_cli::evaluation::{self, CheckpointSet, Method};
use tsnet_cli::training;
use tsnet_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "tsnet",
    about = "MEC scheduling benchmark: dataset generation, training, evaluation, solving",
    version
)]
struct Cli {
    /// Worker threads for parallel batch work (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample instances, label them with the GA, and write a dataset.
    Generate(GenerateArgs),
    /// Train one network on a generated dataset.
    Train(TrainArgs),
    /// Evaluate methods over a dataset and emit the report CSV.
    Evaluate(EvaluateArgs),
    /// Solve a single instance and print the schedule as JSON.
    Solve(SolveArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Which network to train: offload, resource, mlp, or mixer.
    #[arg(long)]
    net: String,
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint output path; the training curve CSV lands next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint files; roles are read from the files themselves.
    #[arg(long, num_args = 0..)]
    ckpts: Vec<PathBuf>,
    /// Comma-separated method list.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Candidate counts for the SAC sweep plot.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 5, 10, 20, 40])]
    sweep_k: Vec<usize>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    method: String,
    #[arg(long, num_args = 0..)]
    ckpts: Vec<PathBuf>,
}

fn run_generate(args: &GenerateArgs) -> CliResult<()> {
    let cfg = RunConfig::load(&args.config)?;
    let summary = dataset::build_dataset(&cfg, &args.out)?;
    println!(
        "wrote {} records to {} (ga failures: {}, mean label utility: {:.6})",
        summary.records,
        args.out.display(),
        summary.ga_failures,
        summary.mean_label_utility
    );
    Ok(())
}

fn run_train(args: &TrainArgs) -> CliResult<()> {
    let cfg = RunConfig::load(&args.config)?;
    let role = NetRole::parse(&args.net)?;
    let ds = dataset::load_dataset(&args.data)?;
    let outcome = training::train_network(&cfg, role, &ds)?;
    checkpoint::save(&args.out, &outcome.checkpoint)?;
    let curve_path = args.out.with_extension("curve.csv");
    training::write_curve(&curve_path, &outcome.curve)?;
    let last = outcome.curve.last().expect("at least one epoch");
    println!(
        "trained {} for {} epochs: val loss {:.6}, val metric {:.6}; checkpoint {}",
        args.net,
        outcome.curve.len(),
        last.val_loss,
        last.val_metric,
        args.out.display()
    );
    Ok(())
}

fn run_evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let cfg = RunConfig::load(&args.config)?;
    if args.methods.is_empty() {
        return Err(CliError::usage("--methods must name at least one method"));
    }
    let methods: Vec<Method> = args
        .methods
        .iter()
        .map(|m| Method::parse(m))
        .collect::<CliResult<_>>()?;
    let ds = dataset::load_dataset(&args.data)?;
    let ckpts = CheckpointSet::load(&args.ckpts)?;
    let out = evaluation::evaluate_methods(&cfg, &ds, &ckpts, &methods)?;
    evaluation::write_report_csv(&args.out, &out.rows)?;
    let plot_dir = args
        .out
        .parent()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    evaluation::write_per_n_plots(&plot_dir, &out)?;
    if methods.contains(&Method::TsnetSac) {
        evaluation::write_sac_gain_sweep(
            &plot_dir.join("sac_gain_vs_k.txt"),
            &cfg,
            &ds,
            &ckpts,
            &args.sweep_k,
        )?;
        evaluation::write_threshold_sweep(
            &plot_dir.join("threshold_sweep.txt"),
            &cfg,
            &ds,
            &ckpts,
            &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
        )?;
    }
    for row in &out.rows {
        println!(
            "{}: mean utility {:.6}, accuracy {:.4}, latency {:.3} ms",
            row.method, row.mean_utility, row.offload_accuracy, row.mean_latency_ms
        );
    }
    println!("report written to {}", args.out.display());
    Ok(())
}

fn run_solve(args: &SolveArgs) -> CliResult<()> {
    let cfg = RunConfig::load(&args.config)?;
    let method = Method::parse(&args.method)?;
    let instance = dataset::read_instance(&args.instance)?;
    let params = cfg.system_params()?;
    let ckpts = CheckpointSet::load(&args.ckpts)?;
    let start = Instant::now();
    let decision = evaluation::run_method(method, &instance, &params, &cfg, &ckpts, 0, None)?;
    let latency_ms = start.elapsed().as_secs_f64() * 1e3;
    let report = tsnet_core::model::evaluate(&instance, &decision.schedule, &params)
        .map_err(|e| CliError::Numeric(format!("evaluation failed: {e}")))?;
    let doc = serde_json::json!({
        "method": method.name(),
        "schedule": decision.schedule,
        "report": report,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&doc)
            .map_err(|e| CliError::Numeric(format!("cannot serialize output: {e}")))?
    );
    eprintln!("latency_ms: {latency_ms:.3}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if workers == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        // Ignore failure: the global pool may already exist in tests.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let result = match &cli.command {
        Command::Generate(args) => run_generate(args),
        Command::Train(args) => run_train(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Solve(args) => run_solve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
