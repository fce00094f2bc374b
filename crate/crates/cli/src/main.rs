//! `dpdisp`: stage-by-stage and end-to-end driver for the dual-pixel
//! disparity pipeline. Every command is deterministic for a fixed --seed.

mod model;
mod pipeline;
mod stages;
mod toy;
mod util;

use clap::{Parser, Subcommand};

use dpdisp::Error;

#[derive(Parser)]
#[command(name = "dpdisp", version, about = "dual-pixel disparity pipeline")]
struct Cli {
    /// RNG seed shared by all stochastic stages.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker thread cap (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Pipeline config JSON (used by `pipeline`; stage commands have their
    /// own config flags).
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Simulate(stages::SimulateArgs),
    Match(stages::MatchArgs),
    Complete(stages::CompleteArgs),
    Refine(stages::RefineArgs),
    Eval(stages::EvalArgs),
    FitErrorModel(model::FitArgs),
    Datagen(model::DatagenArgs),
    ToyExperiment(toy::ToyArgs),
    Pipeline(pipeline::PipelineArgs),
}

/// Distinct exit codes per stage family.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Io(_) | Error::Format(_) => 3,
        Error::Simulation(_) => 4,
        Error::Matching(_) => 5,
        Error::Refine(_) => 6,
        Error::Eval(_) => 7,
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("DP_DISPARITY_LOG")).init();
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: failed to configure thread pool: {e}");
            std::process::exit(2);
        }
    }

    let result = match &cli.command {
        Command::Simulate(args) => stages::run_simulate(args, cli.seed),
        Command::Match(args) => stages::run_match(args),
        Command::Complete(args) => stages::run_complete(args),
        Command::Refine(args) => stages::run_refine(args),
        Command::Eval(args) => stages::run_eval(args),
        Command::FitErrorModel(args) => model::run_fit(args, cli.seed),
        Command::Datagen(args) => model::run_datagen(args, cli.seed),
        Command::ToyExperiment(args) => toy::run(args, cli.seed),
        Command::Pipeline(args) => pipeline::run(args, cli.config.as_deref(), cli.seed),
    };

    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
