//! `krylov`: batch runs of chain evolution, fits, moment conversion,
//! W classification and finite-chain modes from a JSON config.

mod commands;
mod config;
mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use commands::{Context, Exit, Outcome};
use config::{ConfigError, Format, Point, Validator};

#[derive(Parser)]
#[command(name = "krylov", version, about = "Operator growth on Krylov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the chain and write C_K, S_K and phi_0 series
    Evolve(Common),
    /// Fit S_K against ln C_K for existing series files
    Fit(Common),
    /// Convert between moments and Lanczos coefficients
    Moments(Common),
    /// Classify the W number of the sequence
    Wnumber(Common),
    /// Mode decomposition and spectral density of a finite chain
    Modes(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides output.dir)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (overrides jobs)
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    jobs: Option<u32>,
    /// Series format (overrides output.format)
    #[arg(long, value_enum)]
    format: Option<Format>,
}

type Job = fn(&Point, &Context) -> Outcome;

fn run(name: &str, job: Job, args: &Common) -> Result<Exit, (Exit, String)> {
    let usage = |e: ConfigError| (Exit::Usage, e.to_string());
    let doc = config::load(&args.config).map_err(usage)?;
    let points = config::expand(&doc, &Validator::new()).map_err(usage)?;
    let first = &points[0].config;
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = match (&args.out, &first.output.dir) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => base.join(dir),
        (None, None) => PathBuf::from("krylov-out"),
    };
    std::fs::create_dir_all(&out)
        .map_err(|e| (Exit::Failure, format!("cannot create {}: {e}", out.display())))?;
    let ctx = Context {
        out: out.clone(),
        format: args.format.or(first.output.format).unwrap_or(Format::Csv),
        plot: first.output.plot.unwrap_or(true),
        base,
        single: points.len() == 1,
    };
    let jobs = args.jobs.map(|j| j as usize).or(first.jobs).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| (Exit::Failure, format!("cannot start worker pool: {e}")))?;
    // collect keeps point order, so output never depends on the pool size
    let results: Vec<Outcome> = pool.install(|| points.par_iter().map(|p| job(p, &ctx)).collect());
    let mut total = results.into_iter().fold(
        Outcome { files: Vec::new(), exit: Exit::Ok, messages: Vec::new() },
        |mut acc, o| {
            acc.merge(o);
            acc
        },
    );
    for m in &total.messages {
        eprintln!("{m}");
    }
    if !total.files.is_empty() {
        if let Err(e) = output::write_manifest(&out, name, &total.files) {
            total.exit = total.exit.max(Exit::Failure);
            eprintln!("cannot write manifest: {e}");
        }
    }
    Ok(total.exit)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, job, args): (&str, Job, &Common) = match &cli.command {
        Command::Evolve(a) => ("evolve", commands::evolve, a),
        Command::Fit(a) => ("fit", commands::fit, a),
        Command::Moments(a) => ("moments", commands::moments, a),
        Command::Wnumber(a) => ("wnumber", commands::wnumber, a),
        Command::Modes(a) => ("modes", commands::modes, a),
    };
    let exit = match run(name, job, args) {
        Ok(exit) => exit,
        Err((exit, message)) => {
            eprintln!("error: {message}");
            exit
        }
    };
    ExitCode::from(exit as u8)
}
