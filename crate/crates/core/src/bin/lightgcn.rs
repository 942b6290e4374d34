//! Command-line driver: `stats`, `train`, `sweep`, `plotdata`, `alpha-search`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lightgcn::experiment::{
    cmd_alpha_search, cmd_plotdata, cmd_stats, cmd_sweep, cmd_train, ExperimentSpec, PlotKind, Settings,
};
use lightgcn::{Error, Format, Result};

#[derive(Parser)]
#[command(name = "lightgcn", version, about = "LightGCN / APPNP collaborative filtering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print user/item/interaction counts and density.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "adjacency-list")]
        format: String,
        /// Also write stats.txt and stats.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate one configuration.
    Train(RunArgs),
    /// Train the cartesian product of --layers, --scheme and --diffusion-alpha.
    Sweep(RunArgs),
    /// Emit long-format plot data from finished run directories.
    Plotdata {
        #[arg(long)]
        kind: String,
        /// History column for curves, without the model prefix (default recall@<cutoff>).
        #[arg(long)]
        metric: Option<String>,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Grid-search the teleport probability over --diffusion-alpha.
    AlphaSearch(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    layers: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long = "batch-size")]
    batch_size: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "diffusion-alpha")]
    diffusion_alpha: Option<String>,
    #[arg(long = "diffusion-steps")]
    diffusion_steps: Option<String>,
    /// train | post-hoc
    #[arg(long = "diffusion-mode")]
    diffusion_mode: Option<String>,
    /// combined | last-layer
    #[arg(long = "diffusion-start")]
    diffusion_start: Option<String>,
    #[arg(long = "diffusion-self-loops", num_args = 0..=1, default_missing_value = "true")]
    diffusion_self_loops: Option<String>,
    #[arg(long)]
    cutoff: Option<String>,
    #[arg(long)]
    bins: Option<String>,
    #[arg(long = "eval-every")]
    eval_every: Option<String>,
    #[arg(long = "test-fraction")]
    test_fraction: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Parallel sweep runs.
    #[arg(long)]
    jobs: Option<String>,
}

impl RunArgs {
    fn spec(&self) -> Result<ExperimentSpec> {
        let file = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        let pairs = [
            ("dataset", &self.dataset),
            ("format", &self.format),
            ("layers", &self.layers),
            ("scheme", &self.scheme),
            ("epochs", &self.epochs),
            ("lr", &self.lr),
            ("lambda", &self.lambda),
            ("batch_size", &self.batch_size),
            ("dim", &self.dim),
            ("seed", &self.seed),
            ("diffusion_alpha", &self.diffusion_alpha),
            ("diffusion_steps", &self.diffusion_steps),
            ("diffusion_mode", &self.diffusion_mode),
            ("diffusion_start", &self.diffusion_start),
            ("diffusion_self_loops", &self.diffusion_self_loops),
            ("cutoff", &self.cutoff),
            ("bins", &self.bins),
            ("eval_every", &self.eval_every),
            ("test_fraction", &self.test_fraction),
            ("out", &self.out),
            ("jobs", &self.jobs),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                flags.set(key, v.clone());
            }
        }
        ExperimentSpec::from_settings(&file.merged(&flags))
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Stats { dataset, format, out } => {
            let format: Format = format.parse()?;
            let (_, text) = cmd_stats(&dataset, format, out.as_deref())?;
            print!("{text}");
        }
        Command::Train(args) => {
            let spec = args.spec()?;
            let record = cmd_train(&spec.single_run()?, &spec.out)?;
            println!("run_dir={}", record.run_dir.display());
            for r in &record.reports {
                println!(
                    "{} @{}: recall={:.4} ndcg={:.4} precision={:.4} ild={:.4}",
                    r.model, r.cutoff, r.recall, r.ndcg, r.precision, r.ild
                );
            }
        }
        Command::Sweep(args) => {
            let outcome = cmd_sweep(&args.spec()?)?;
            println!("table={}", outcome.table.display());
            println!("runs={} failed={}", outcome.records.len(), outcome.failures.len());
            if !outcome.failures.is_empty() {
                return Err(Error::Run(format!("{} sweep runs failed", outcome.failures.len())));
            }
        }
        Command::Plotdata { kind, metric, out, runs } => {
            let kind: PlotKind = kind.parse()?;
            let path = cmd_plotdata(&runs, kind, metric.as_deref(), &out)?;
            println!("{}", path.display());
        }
        Command::AlphaSearch(args) => {
            let (best, table) = cmd_alpha_search(&args.spec()?)?;
            for (alpha, score) in table {
                println!("alpha={alpha} ndcg={score:.6}");
            }
            println!("best_alpha={best}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
