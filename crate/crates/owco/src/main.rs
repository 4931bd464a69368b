use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use owco::gallery;
use owco::report::Report;
use owco::runner::{self, default_task, resolve_tol, TaskKind};
use owco::scenario::{load_scenario, Scenario};

#[derive(Parser)]
#[command(
    name = "owco",
    version,
    about = "Laboratory for operator-weighted composition operators on finite discrete measure spaces"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a scenario and summarize its shape
    Check(FileArgs),
    /// Build the lift and certify subnormality
    Extend(FileArgs),
    /// Site moments, the Hankel test and measure recovery
    Moments(FileArgs),
    /// Recover the measure family the moments force, or a witness against it
    Necessity(FileArgs),
    /// Balance condition and certification for classical scalar weights
    Wco(FileArgs),
    /// Run a named gallery entry
    Gallery(GalleryArgs),
}

#[derive(Args)]
struct FileArgs {
    /// Scenario file (json)
    file: PathBuf,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tolerance, overriding OWCO_TOL and the scenario file
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct GalleryArgs {
    /// Entry name
    name: String,
    /// Integer parameter as key=value; repeatable
    #[arg(long = "param", value_parser = parse_param)]
    param: Vec<(String, f64)>,
    /// Task to run instead of the entry's natural one
    #[arg(long)]
    task: Option<String>,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tolerance, overriding OWCO_TOL
    #[arg(long)]
    tol: Option<f64>,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got {s}"))?;
    let v: f64 = v
        .parse()
        .map_err(|_| format!("cannot parse {v:?} as a number"))?;
    Ok((k.to_string(), v))
}

fn emit(report: &Report, out: Option<&PathBuf>) -> owco::Result<()> {
    let json = report.to_json();
    match out {
        Some(path) => fs::write(path, json)?,
        None => print!("{json}"),
    }
    Ok(())
}

fn run_file(task: TaskKind, args: &FileArgs) -> owco::Result<()> {
    let scenario = load_scenario(&args.file)?;
    let tol = resolve_tol(args.tol, scenario.tol)?;
    let report = runner::run(task, &scenario, tol)?;
    emit(&report, args.out.as_ref())
}

fn run_gallery(args: &GalleryArgs) -> owco::Result<()> {
    let params: BTreeMap<String, f64> = args.param.iter().cloned().collect();
    let entry = gallery::by_name(&args.name, &params)?;
    let task = match &args.task {
        Some(s) => TaskKind::parse(s)?,
        None => default_task(&entry),
    };
    let scenario = Scenario {
        label: Some(args.name.clone()),
        tol: None,
        entry,
        site: None,
        max_depth: None,
    };
    let tol = resolve_tol(args.tol, None)?;
    let report = runner::run(task, &scenario, tol)?;
    emit(&report, args.out.as_ref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Check(a) => run_file(TaskKind::Check, a),
        Cmd::Extend(a) => run_file(TaskKind::Extend, a),
        Cmd::Moments(a) => run_file(TaskKind::Moments, a),
        Cmd::Necessity(a) => run_file(TaskKind::Necessity, a),
        Cmd::Wco(a) => run_file(TaskKind::Wco, a),
        Cmd::Gallery(a) => run_gallery(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
