mod commands;
mod error;
mod output;
mod scenario;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::Overrides;
use error::CliError;
use output::{canonical_json, render_csv};

#[derive(Debug, Parser)]
#[command(name = "segmarket", version, about = "Segmented directed-search markets: equilibrium, first best and design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario JSON file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output file (or directory with --batch); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Linear-program mesh size.
    #[arg(long, global = true)]
    mesh: Option<usize>,
    /// Tolerance for the Hosios check.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Run every *.json scenario in this directory.
    #[arg(long, global = true)]
    batch: Option<PathBuf>,
    /// Seed for randomized probes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Enumerate all set partitions rather than interval partitions.
    #[arg(long, global = true)]
    exhaustive: bool,
    /// Largest grid on which the oracle enumerates partitions.
    #[arg(long, global = true)]
    max_n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Search equilibrium of the scenario's segmentation.
    Equilibrium,
    /// Planner's first best for the scenario's segmentation.
    FirstBest,
    /// Check whether the buyer share decentralizes the first best.
    Hosios,
    /// Constrained-efficient segmentation.
    Design,
    /// Linear-program and enumeration oracles.
    Oracle,
    /// First best against equilibrium on the same segmentation.
    Compare,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Equilibrium => "equilibrium",
            Command::FirstBest => "first-best",
            Command::Hosios => "hosios",
            Command::Design => "design",
            Command::Oracle => "oracle",
            Command::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

fn run_one(cli: &Cli, path: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read scenario: {e}")))?;
    let s = scenario::parse(&text)?;
    let o = Overrides { mesh: cli.mesh, tol: cli.tol, seed: cli.seed, exhaustive: cli.exhaustive, max_n: cli.max_n };
    let report = match cli.command {
        Command::Equilibrium => commands::equilibrium(&s)?,
        Command::FirstBest => commands::first_best(&s)?,
        Command::Hosios => commands::hosios(&s, &o)?,
        Command::Design => commands::design(&s, &o)?,
        Command::Oracle => commands::oracle(&s, &o)?,
        Command::Compare => commands::compare(&s)?,
    };
    match cli.format {
        Format::Json => Ok(canonical_json(&report.json)),
        Format::Csv => render_csv(&report),
    }
}

fn write_output(out: Option<&Path>, body: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, body).map_err(|e| CliError::io(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn report(err: &CliError) {
    eprintln!("{}", canonical_json(&err.diagnostic()).trim_end());
}

fn contextual(cli: &Cli, path: &Path, e: CliError) -> CliError {
    e.with_context("command", cli.command.name()).with_context("scenario", path.display().to_string())
}

fn run_batch(cli: &Cli, dir: &Path) -> i32 {
    let Some(out_dir) = cli.out.as_deref() else {
        report(&CliError::validation("--batch needs --out naming an output directory"));
        return error::EXIT_VALIDATION;
    };
    let listing = fs::read_dir(dir).and_then(|entries| entries.map(|e| e.map(|e| e.path())).collect::<Result<Vec<_>, _>>());
    let mut paths: Vec<PathBuf> = match listing {
        Ok(p) => p.into_iter().filter(|p| p.extension().is_some_and(|e| e == "json")).collect(),
        Err(e) => {
            report(&CliError::io(format!("cannot list {}: {e}", dir.display())));
            return error::EXIT_VALIDATION;
        }
    };
    paths.sort();
    if let Err(e) = fs::create_dir_all(out_dir) {
        report(&CliError::io(format!("cannot create {}: {e}", out_dir.display())));
        return error::EXIT_VALIDATION;
    }
    // scenarios are independent; each thread writes only its own file
    let results: Vec<Result<(), CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = paths
            .iter()
            .map(|path| {
                scope.spawn(move || {
                    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
                    let target = out_dir.join(format!("{stem}.{}", cli.format.extension()));
                    run_one(cli, path)
                        .and_then(|body| write_output(Some(&target), &body))
                        .map_err(|e| contextual(cli, path, e))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(CliError::io("worker panicked")))).collect()
    });
    let mut code = 0;
    for r in results {
        if let Err(e) = r {
            report(&e);
            if code == 0 {
                code = e.exit;
            }
        }
    }
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = if let Some(dir) = cli.batch.as_deref() {
        run_batch(&cli, dir)
    } else if let Some(path) = cli.scenario.as_deref() {
        match run_one(&cli, path).and_then(|body| write_output(cli.out.as_deref(), &body)) {
            Ok(()) => 0,
            Err(e) => {
                let e = contextual(&cli, path, e);
                report(&e);
                e.exit
            }
        }
    } else {
        report(&CliError::validation("either --scenario or --batch is required").with_context("command", cli.command.name()));
        error::EXIT_VALIDATION
    };
    ExitCode::from(code as u8)
}
