use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lowrank_core::algorithms::DEFAULT_SPAN_TOL;
use lowrank_harness::config::{self, AdversarySpec, Source};
use lowrank_harness::runner::{self, RunOptions};
use lowrank_harness::verify::{self, VerifyOptions};
use lowrank_harness::{plot, stream_io, HarnessError, Result};

/// Seeded regret experiments for online learning with low-rank experts.
///
/// Exit codes: 0 success, 1 failed invariants or unwritable output,
/// 2 invalid configuration or input, 3 numeric failure during a run.
/// The environment variable LRE_SEED_OFFSET (default 0) is added to every seed.
#[derive(Parser)]
#[command(name = "lre", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment of a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Write only summary.csv, no per-round files.
        #[arg(long)]
        summary_only: bool,
    },
    /// Run the invariant suite and report measured slack per check.
    Verify {
        /// Only run checks whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        /// New-direction threshold for the low-rank learner.
        #[arg(long, default_value_t = DEFAULT_SPAN_TOL)]
        span_tol: f64,
    },
    /// Plot cumulative regret curves of the runs in a summary CSV.
    Plot { summary: PathBuf, out: PathBuf },
    /// Write a generated loss stream to a file (.csv or binary).
    Gen {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        t: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn seed_offset() -> Result<u64> {
    match std::env::var("LRE_SEED_OFFSET") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| HarnessError::Config(format!("LRE_SEED_OFFSET: not an unsigned integer: {v:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(HarnessError::Config(format!("LRE_SEED_OFFSET: {e}"))),
    }
}

fn execute(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run {
            config: path,
            out,
            jobs,
            summary_only,
        } => {
            let cfg = config::load_config(&path)?;
            let base = path.parent().unwrap_or(Path::new("."));
            let plan = config::plan(&cfg, base, seed_offset()?)?;
            let rows = runner::run(
                &plan,
                &RunOptions {
                    out: out.clone(),
                    jobs,
                    summary_only,
                },
            )?;
            println!("{} runs written to {}", rows.len(), runner::summary_path(&out).display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { filter, span_tol } => {
            if let Some(f) = &filter {
                if !verify::check_names().iter().any(|n| n.contains(f.as_str())) {
                    return Err(HarnessError::Config(format!("no check matches filter {f:?}")));
                }
            }
            let results = verify::verify(&VerifyOptions { filter, span_tol });
            print!("{}", verify::format_report(&results));
            Ok(if results.iter().all(|r| r.passed()) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Plot { summary, out } => {
            let n = plot::plot(&summary, &out)?;
            println!("{n} series plotted to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen {
            kind,
            n,
            d,
            t,
            eps,
            seed,
            out,
        } => {
            let spec = AdversarySpec {
                kind,
                n,
                d,
                t,
                eps,
                path: None,
            };
            let Source::Generated(mut cfg) =
                config::resolve_adversary(&spec, Path::new(".")).map_err(HarnessError::Config)?
            else {
                return Err(HarnessError::Config("gen cannot re-emit a stream file".into()));
            };
            cfg.seed = seed.wrapping_add(seed_offset()?);
            let stream = cfg
                .generate()
                .map_err(|e| HarnessError::Numeric(e.to_string()))?;
            stream_io::write_losses(&out, &stream.losses)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("lre: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
