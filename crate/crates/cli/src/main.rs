use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use unigrad_cli::{compare, execute, CliError, Settings};

#[derive(Parser)]
#[command(name = "unigrad", version, about = "Run and compare universal online learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm on one environment over a list of seeds.
    Run(RunArgs),
    /// Aggregate summary files into compare.csv.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    /// key=value file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    env: Option<String>,
    /// Horizon.
    #[arg(long = "T")]
    t: Option<String>,
    /// e.g. `1..5` or `1,3,7`.
    #[arg(long)]
    seeds: Option<String>,
    /// LIBSVM file for the dataset environment.
    #[arg(long)]
    dataset: Option<String>,
    /// logistic, hinge or hinge-l2.
    #[arg(long)]
    dataset_kind: Option<String>,
    /// gv, smallloss or union.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    checkpoints: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    game_dim: Option<String>,
    /// honest or random.
    #[arg(long)]
    opponent: Option<String>,
    /// Write wall_ms as 0.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(required = true)]
    summaries: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let mut settings = match &args.config {
        Some(path) => Settings::load(path)?,
        None => Settings::new(),
    };
    let mut flags = Settings::new();
    let pairs = [
        ("algo", &args.algo),
        ("env", &args.env),
        ("T", &args.t),
        ("seeds", &args.seeds),
        ("dataset", &args.dataset),
        ("dataset_kind", &args.dataset_kind),
        ("mode", &args.mode),
        ("out", &args.out),
        ("checkpoints", &args.checkpoints),
        ("dim", &args.dim),
        ("lambda", &args.lambda),
        ("sigma", &args.sigma),
        ("game_dim", &args.game_dim),
        ("opponent", &args.opponent),
    ];
    for (key, value) in pairs {
        if let Some(v) = value {
            flags.set(key, v)?;
        }
    }
    if args.no_timing {
        flags.set("timing", "false")?;
    }
    settings.overlay(&flags);
    let cfg = settings.resolve()?;
    let results = execute(&cfg)?;
    for r in &results {
        println!("{} {} seed {}: final regret {:.6}, {} queries", r.algo, r.env, r.seed, r.final_regret, r.total_queries);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Compare(args) => compare(&args.summaries, &args.out).map(|_| ()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
