mod cmd;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;

use cmd::{fid, fsim, lanes, merge, synth, traj};
use config::{key_listing, load_file, parse_override, resolve, Config};
use report::{render_csv, render_json, Outcome};

/// Exit statuses.
const EXIT_INVALID: u8 = 1;
const EXIT_COMPUTE: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// Bad configuration or inputs; every problem found is listed.
    Invalid(Vec<String>),
    Compute(String),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(vec![msg.into()])
    }

    /// Failure while reading or checking inputs.
    pub fn input(e: impl std::fmt::Display) -> Self {
        CliError::invalid(e.to_string())
    }

    pub fn compute(e: impl std::fmt::Display) -> Self {
        CliError::Compute(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Compute(_) => EXIT_COMPUTE,
        }
    }
}

/// Sim-to-real gap evaluation: image-distribution distance, structural
/// similarity, lane accuracy, trajectory deviation and restoring, and a
/// synthetic lane-scene simulator.
///
/// Settings come from built-in defaults, then the subcommand's table in
/// --config, then --set overrides, then flags. Each run prints one JSON
/// report (sorted keys, 6 significant digits, tool version and resolved
/// config) on standard output. Exit status: 0 success, 1 invalid
/// configuration or input, 2 computation failure, 64 usage error.
#[derive(Parser, Debug)]
#[command(name = "sim2real", version)]
struct Cli {
    /// TOML file with one table per subcommand, e.g. [fid].
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key: key.path=value (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(Vec<String>, toml::Value)>,
    /// Print the tabular form as CSV instead of the JSON report.
    #[arg(long, global = true)]
    csv: bool,
    /// Also write the output to this file.
    #[arg(long = "output", global = true, value_name = "FILE")]
    output_file: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "SIM2REAL_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// FID between two image directories or S2RF feature files.
    Fid(fid::FidArgs),
    /// Pairwise FID between several image directories.
    FidMatrix(fid::FidMatrixArgs),
    /// Mean FSIM over filename-paired images of two directories.
    Fsim(fsim::FsimArgs),
    /// Pick the hyperparameter setting with the highest mean FSIM.
    SelectLambda(fsim::SelectLambdaArgs),
    /// Lane ground truth from segmentation images.
    ExtractGt(lanes::ExtractGtArgs),
    /// TuSimple-style accuracy of predicted lanes against ground truth.
    LaneAccuracy(lanes::LaneAccuracyArgs),
    /// Per-section RMSE of driven trajectories against a centerline.
    TrajRmse(traj::TrajRmseArgs),
    /// Lane-restoring verdicts for displaced-start trajectories.
    RestoreEval(traj::RestoreEvalArgs),
    /// Render synthetic lane-scene datasets from scene grids.
    Synth(synth::SynthArgs),
    /// Closed-loop lane-keeping episode batches.
    Simulate(synth::SimulateArgs),
    /// Merge earlier reports into one summary table.
    Report(merge::ReportArgs),
}

const SECTIONS: [&str; 11] = [
    "fid",
    "fid-matrix",
    "fsim",
    "select-lambda",
    "extract-gt",
    "lane-accuracy",
    "traj-rmse",
    "restore-eval",
    "synth",
    "simulate",
    "report",
];

fn listing(name: &str) -> String {
    match name {
        "fid" => key_listing::<fid::FidConfig>(name),
        "fid-matrix" => key_listing::<fid::FidMatrixConfig>(name),
        "fsim" => key_listing::<fsim::FsimConfig>(name),
        "select-lambda" => key_listing::<fsim::SelectLambdaConfig>(name),
        "extract-gt" => key_listing::<lanes::ExtractGtConfig>(name),
        "lane-accuracy" => key_listing::<lanes::LaneAccuracyConfig>(name),
        "traj-rmse" => key_listing::<traj::TrajRmseConfig>(name),
        "restore-eval" => key_listing::<traj::RestoreEvalConfig>(name),
        "synth" => key_listing::<synth::SynthConfig>(name),
        "simulate" => key_listing::<synth::SimulateConfig>(name),
        "report" => key_listing::<merge::ReportConfig>(name),
        _ => unreachable!("unknown section {name}"),
    }
}

fn command() -> clap::Command {
    SECTIONS
        .iter()
        .fold(Cli::command(), |c, name| c.mut_subcommand(name, |s| s.after_long_help(listing(name))))
}

fn execute<C: Config>(
    cli: &Cli,
    name: &str,
    flags: &impl Serialize,
    run: fn(&C) -> Result<Outcome, CliError>,
) -> Result<String, CliError> {
    let file = cli.config.as_deref().map(load_file).transpose()?;
    let mut problems: Vec<String> = file
        .iter()
        .flat_map(|t| t.keys())
        .filter(|k| !SECTIONS.contains(&k.as_str()))
        .map(|k| format!("unknown config section `{k}`"))
        .collect();
    let cfg = match resolve::<C, _>(name, file.as_ref(), &cli.overrides, flags) {
        Ok(cfg) if problems.is_empty() => cfg,
        Ok(_) => return Err(CliError::Invalid(problems)),
        Err(CliError::Invalid(p)) => {
            problems.extend(p);
            return Err(CliError::Invalid(problems));
        }
        Err(e) => return Err(e),
    };
    let out = run(&cfg)?;
    if cli.csv {
        render_csv(&out)
    } else {
        Ok(render_json(name, &cfg, &out))
    }
}

fn dispatch(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Fid(a) => execute(cli, "fid", a, fid::run),
        Command::FidMatrix(a) => execute(cli, "fid-matrix", a, fid::run_matrix),
        Command::Fsim(a) => execute(cli, "fsim", a, fsim::run),
        Command::SelectLambda(a) => execute(cli, "select-lambda", a, fsim::run_select),
        Command::ExtractGt(a) => execute(cli, "extract-gt", a, lanes::run_extract),
        Command::LaneAccuracy(a) => execute(cli, "lane-accuracy", a, lanes::run_accuracy),
        Command::TrajRmse(a) => execute(cli, "traj-rmse", a, traj::run_rmse),
        Command::RestoreEval(a) => execute(cli, "restore-eval", a, traj::run_restore),
        Command::Synth(a) => execute(cli, "synth", a, synth::run_synth),
        Command::Simulate(a) => execute(cli, "simulate", a, synth::run_simulate),
        Command::Report(a) => execute(cli, "report", a, merge::run),
    }
}

fn run() -> Result<String, CliError> {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            std::process::exit(0);
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let text = dispatch(&cli)?;
    if let Some(path) = &cli.output_file {
        std::fs::write(path, &text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    }
    Ok(text)
}

fn main() -> ExitCode {
    match run() {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprint!("{msg}"),
                CliError::Invalid(problems) => {
                    for p in problems {
                        eprintln!("error: {p}");
                    }
                }
                CliError::Compute(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
