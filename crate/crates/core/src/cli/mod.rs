//! Command-line orchestration: configuration, pipeline runs and report files.
//!
//! Exit codes: 0 success, 1 failed bound or self-test check, 2 configuration
//! error (nothing is written), 3 not Morse or inconclusive shooting.

pub mod config;
mod report;
pub mod selftest;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::homology::{self, invariance_check};
use crate::invariant_counts::adjudicate;
use crate::reduction::{choose_n0, ReductionContext};
use crate::search::{multistart_newton, SearchOptions};

pub use config::{HomologyConfig, RunConfig};
pub use report::{ComplexReport, FindOrbitsReport};

/// Environment variable for the default worker-thread count.
pub const THREADS_ENV: &str = "TORUS_ORBITS_THREADS";
const DEFAULT_OUTPUT_DIR: &str = "out";

#[derive(Debug, Parser)]
#[command(name = "torus-orbits", version, about = "Forced oscillations of Hamiltonian systems on tori")]
pub struct Cli {
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for report files (overrides the configuration).
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find forced oscillations and check the lower bounds on their number.
    FindOrbits {
        #[arg(long)]
        config: PathBuf,
    },
    /// Build the Morse complex of a function on T² and its Z2 homology.
    MorseHomology {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in property checks.
    Selftest {
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
}

/// Deliberate defects for exercising the self-test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// Scales the nonconstant modes of `j*` by 1.01.
    Jstar,
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::NotMorse { .. } | Error::Inconclusive { .. } => 3,
        _ => 1,
    }
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn output_dir(flag: Option<&Path>, configured: Option<&Path>) -> PathBuf {
    flag.or(configured)
        .map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR), Path::to_path_buf)
}

/// Outcome of `find-orbits`: the report and whether every bound held.
pub struct FindOrbitsOutcome {
    pub report: FindOrbitsReport,
    pub output_dir: PathBuf,
    pub pass: bool,
}

/// Runs the pipeline for a parsed configuration without writing files.
pub fn find_orbits(cfg: &RunConfig) -> Result<FindOrbitsReport> {
    cfg.validate()?;
    let h = cfg.hamiltonian.build(cfg.half_dim)?;
    let n0 = cfg.n0_override.unwrap_or_else(|| choose_n0(&h));
    let ctx = ReductionContext::new(&h, n0, cfg.order(n0))?.with_tolerance(cfg.tolerances.phi);
    let opts = SearchOptions {
        newton_tol: cfg.tolerances.newton,
        dedup_tol: cfg.tolerances.dedup,
        ..SearchOptions::new(cfg.starts, cfg.seed)
    };
    let search = multistart_newton(&ctx, &h, &opts)?;
    let verdict = adjudicate(&search, ctx.n_plus(), cfg.half_dim);
    let mut echo = cfg.clone();
    echo.output_dir = None;
    Ok(FindOrbitsReport::new(echo, &ctx, &search, &verdict))
}

/// `find-orbits`: loads the configuration, runs, and writes `report.json`
/// and `orbits.csv`.
pub fn cmd_find_orbits(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<FindOrbitsOutcome> {
    let mut cfg = config::load_run_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = output_dir(out, cfg.output_dir.as_deref());
    let report = find_orbits(&cfg)?;
    write_atomic(&dir, "report.json", &report.to_json()?)?;
    write_atomic(&dir, "orbits.csv", &report.orbits_csv()?)?;
    Ok(FindOrbitsOutcome {
        pass: report.verdict.pass,
        report,
        output_dir: dir,
    })
}

/// Outcome of `morse-homology`.
pub struct HomologyOutcome {
    pub report: ComplexReport,
    pub output_dir: PathBuf,
    pub pass: bool,
}

/// Builds the complex (and the comparison complex) without writing files.
pub fn morse_homology(cfg: &HomologyConfig) -> Result<(ComplexReport, homology::MorseComplex)> {
    cfg.validate()?;
    let h = cfg.function.build(1)?;
    let params = cfg.shooting.params();
    let complex = homology::morse_complex(&h, &params)?;
    let refined = homology::morse_complex(&h, &params.refined())?;
    let robust = refined.boundary1 == complex.boundary1 && refined.boundary2 == complex.boundary2;
    let invariance = match &cfg.compare {
        Some(spec) => {
            let other = homology::morse_complex(&spec.build(1)?, &params)?;
            Some(invariance_check(&complex, &other))
        }
        None => None,
    };
    let mut echo = cfg.clone();
    echo.output_dir = None;
    let report = ComplexReport::new(echo, &complex, robust, invariance)?;
    Ok((report, complex))
}

pub fn cmd_morse_homology(config: &Path, out: Option<&Path>) -> Result<HomologyOutcome> {
    let cfg = config::load_homology_config(config)?;
    let dir = output_dir(out, cfg.output_dir.as_deref());
    let (report, complex) = match morse_homology(&cfg) {
        Ok(r) => r,
        Err(e @ Error::Inconclusive { .. }) => {
            if let Error::Inconclusive { trajectory, .. } = &e {
                write_atomic(&dir, "inconclusive_trajectory.csv", &report::trajectory_csv(trajectory)?)?;
            }
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    write_atomic(&dir, "complex.json", &report.to_json()?)?;
    write_atomic(&dir, "flowlines.csv", &report::flowlines_csv(&complex)?)?;
    Ok(HomologyOutcome {
        pass: report.pass(),
        report,
        output_dir: dir,
    })
}

fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads.filter(|&n| n > 0) {
        // fails only when a pool already exists, e.g. on repeated in-process runs
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn run(cli: Cli) -> i32 {
    configure_threads(cli.threads);
    let result = match &cli.command {
        Command::FindOrbits { config } => {
            cmd_find_orbits(config, cli.seed, cli.output_dir.as_deref()).map(|o| {
                for w in &o.report.diagnostics.warnings {
                    eprintln!("warning: {w}");
                }
                println!("{}", o.report.summary());
                println!("reports written to {}", o.output_dir.display());
                if o.pass { 0 } else { 1 }
            })
        }
        Command::MorseHomology { config } => cmd_morse_homology(config, cli.output_dir.as_deref()).map(|o| {
            println!("{}", o.report.summary());
            println!("reports written to {}", o.output_dir.display());
            if o.pass { 0 } else { 1 }
        }),
        Command::Selftest { inject_fault } => {
            let summary = selftest::run(*inject_fault);
            print!("{}", summary.table());
            Ok(if summary.all_pass() { 0 } else { 1 })
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
