//! Scenario files, experiment runners and the `sweep` command line.

mod run;
mod scenario;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use run::{output_root, run, run_in, run_suite, run_suite_in, CheckEntry, RunReport, Status, SuiteEntry, SuiteReport};
pub use scenario::{load_scenario, Checks, Experiment, Scenario};

/// Overrides the directory scenario outputs are written under.
pub const OUTPUT_ROOT_ENV: &str = "SWEEP_OUTPUT_ROOT";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid `{field}`: {message}")]
    Semantic { field: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Module(String),
    #[error("scenario name `{name}` appears in both {first} and {second}")]
    DuplicateName { name: String, first: String, second: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn semantic(field: &str, message: impl Into<String>) -> Self {
        CliError::Semantic {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// 2 for anything that stops a scenario from being run at all.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Debug, Parser)]
#[command(name = "sweep", version, about = "Run sweeping-process experiments from scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario as written.
    Run { file: PathBuf },
    /// Run every *.toml scenario in a directory.
    Suite {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run a scenario as a talweg experiment.
    Talweg { file: PathBuf },
    /// Run a scenario as a desingularization experiment.
    Desingularize { file: PathBuf },
    /// Run a scenario as a gradient bridge experiment.
    Bridge { file: PathBuf },
}

fn run_file(file: &PathBuf, force: Option<Experiment>) -> Result<RunReport, CliError> {
    let mut sc = load_scenario(file)?;
    if let Some(exp) = force {
        sc.experiment = exp;
        sc.validate()?;
    }
    run(&sc)
}

fn print_report(r: &RunReport) {
    for c in &r.checks {
        println!("{} {} {}: {}", r.scenario, c.status, c.name, c.detail);
    }
    for a in &r.artifacts {
        println!("  wrote {a}");
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 all checks pass, 1 some check fails, 2 bad input.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Run { file } => run_file(file, None).map(|r| {
            print_report(&r);
            r.passed()
        }),
        Command::Talweg { file } => run_file(file, Some(Experiment::Talweg)).map(|r| {
            print_report(&r);
            r.passed()
        }),
        Command::Desingularize { file } => run_file(file, Some(Experiment::Desingularize)).map(|r| {
            print_report(&r);
            r.passed()
        }),
        Command::Bridge { file } => run_file(file, Some(Experiment::Bridge)).map(|r| {
            print_report(&r);
            r.passed()
        }),
        Command::Suite { dir, jobs } => run_suite(dir, *jobs).map(|s| {
            for e in &s.entries {
                let tag = if e.passed { "PASS" } else { "FAIL" };
                match &e.error {
                    Some(err) => println!("{tag} {}: {err}", e.file),
                    None => println!("{tag} {}", e.file),
                }
            }
            s.passed
        }),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
