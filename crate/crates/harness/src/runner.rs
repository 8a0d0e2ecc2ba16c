//! Executes a [`Plan`]: one seeded run per (experiment, seed), per-round CSVs
//! under `<out>/rounds/`, and `<out>/summary.csv`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use lowrank_core::adversaries::{numeric_rank, LossMatrix, LossStream, RANK_TOL};
use lowrank_core::algorithms::{
    lowrank_regularizer, play, AdaGrad, EtaSchedule, Ftl, Hedge, Learner, LowRankExperts,
    MetaCombiner, OmdFixed, Trace, DEFAULT_MVEE_EPS, DEFAULT_SPAN_TOL,
};
use lowrank_core::simplex_qp::DecisionVector;

use crate::config::{Algorithm, Plan, PlannedExperiment, RunSpec, Source};
use crate::error::{io_err, HarnessError, Result};

pub const ROUND_COLUMNS: [&str; 6] = ["run_id", "experiment", "seed", "t", "round_loss", "cum_regret"];
pub const SUMMARY_COLUMNS: [&str; 8] = [
    "experiment",
    "seed",
    "N",
    "d",
    "T",
    "final_regret",
    "regret_over_sqrtT",
    "wall_ms",
];

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    pub summary_only: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub t: usize,
    pub final_regret: f64,
    pub regret_over_sqrt_t: f64,
    pub wall_ms: u128,
}

/// Path of the per-round file of one run.
pub fn rounds_path(out: &Path, experiment: &str, seed: u64) -> PathBuf {
    out.join("rounds").join(format!("{experiment}_seed{seed}.csv"))
}

pub fn summary_path(out: &Path) -> PathBuf {
    out.join("summary.csv")
}

/// Materializes the loss stream of one run.
pub fn stream_for(exp: &PlannedExperiment, seed: u64) -> lowrank_core::Result<LossStream> {
    match &exp.source {
        Source::Generated(cfg) => {
            let mut cfg = cfg.clone();
            cfg.seed = seed;
            cfg.generate()
        }
        Source::File(losses) => {
            let losses: LossMatrix = (**losses).clone();
            let rank = numeric_rank(&losses.to_matrix(), RANK_TOL)?;
            Ok(LossStream {
                losses,
                rank_certificate: rank,
                embedding: None,
            })
        }
    }
}

pub fn build_learner(exp: &PlannedExperiment, stream: &LossStream) -> lowrank_core::Result<Box<dyn Learner>> {
    let n = stream.experts();
    let p = &exp.params;
    let horizon = p.horizon.unwrap_or(stream.rounds());
    let mvee_eps = p.eps.unwrap_or(DEFAULT_MVEE_EPS);
    let span_tol = p.span_tol.unwrap_or(DEFAULT_SPAN_TOL);
    let hedge = || match p.eta {
        Some(eta) if exp.algorithm == Algorithm::Hedge => Hedge::new(n, EtaSchedule::Constant(eta)),
        _ => Hedge::with_default_rate(n, Some(horizon)),
    };
    Ok(match exp.algorithm {
        Algorithm::Hedge => Box::new(hedge()?),
        Algorithm::Ftl => Box::new(Ftl::new(n)?),
        Algorithm::OmdFixed => {
            let u = stream.embedding.as_ref().ok_or_else(|| {
                lowrank_core::Error::Contract("omd_fixed needs the loss subspace".into())
            })?;
            let (_, h) = lowrank_regularizer(u, mvee_eps)?;
            let c = p.eta.unwrap_or(4.0 * (u.ncols() as f64).sqrt());
            Box::new(OmdFixed::new(h, EtaSchedule::InvSqrt(c), DecisionVector::uniform(n))?)
        }
        Algorithm::Lowrank => Box::new(LowRankExperts::with_params(n, span_tol, mvee_eps)?),
        Algorithm::Adagrad => Box::new(AdaGrad::new(
            n,
            p.eta.expect("validated"),
            p.delta.expect("validated"),
        )?),
        Algorithm::Combiner => {
            let a = Box::new(LowRankExperts::with_params(n, span_tol, mvee_eps)?);
            let b = Box::new(hedge()?);
            match p.eta {
                Some(eta) => Box::new(MetaCombiner::new(a, b, eta)?),
                None => Box::new(MetaCombiner::for_horizon(a, b, horizon)?),
            }
        }
    })
}

fn run_one(plan: &Plan, spec: &RunSpec, opts: &RunOptions) -> Result<SummaryRow> {
    let exp = &plan.experiments[spec.experiment];
    let label = format!("run {} ({}, seed {})", spec.run_id, exp.name, spec.seed);
    let numeric = |e: lowrank_core::Error| HarnessError::Numeric(format!("{label}: {e}"));
    let start = Instant::now();
    let stream = stream_for(exp, spec.seed).map_err(numeric)?;
    let mut learner = build_learner(exp, &stream).map_err(numeric)?;
    let trace = play(&mut learner, &stream.losses, false).map_err(numeric)?;
    let wall_ms = start.elapsed().as_millis();
    if !opts.summary_only {
        write_rounds(&rounds_path(&opts.out, &exp.name, spec.seed), spec, &exp.name, &trace)?;
    }
    let t = stream.rounds();
    let final_regret = trace.final_regret();
    Ok(SummaryRow {
        experiment: exp.name.clone(),
        seed: spec.seed,
        n: stream.experts(),
        d: stream.rank_certificate,
        t,
        final_regret,
        regret_over_sqrt_t: final_regret / (t as f64).sqrt(),
        wall_ms,
    })
}

fn write_rounds(path: &Path, spec: &RunSpec, name: &str, trace: &Trace) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(ROUND_COLUMNS).map_err(|e| io_err(path, e))?;
    let (id, seed) = (spec.run_id.to_string(), spec.seed.to_string());
    for (t, (loss, regret)) in trace.round_loss.iter().zip(&trace.cum_regret).enumerate() {
        w.write_record([
            id.as_str(),
            name,
            seed.as_str(),
            &(t + 1).to_string(),
            &loss.to_string(),
            &regret.to_string(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(SUMMARY_COLUMNS).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.seed.to_string(),
            r.n.to_string(),
            r.d.to_string(),
            r.t.to_string(),
            r.final_regret.to_string(),
            r.regret_over_sqrt_t.to_string(),
            r.wall_ms.to_string(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Runs every run of the plan and writes the outputs. Rows come back in
/// `run_id` order regardless of how many workers were used.
pub fn run(plan: &Plan, opts: &RunOptions) -> Result<Vec<SummaryRow>> {
    let rounds_dir = opts.out.join("rounds");
    let dir = if opts.summary_only { &opts.out } else { &rounds_dir };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::Io(format!("thread pool: {e}")))?;
    let results: Vec<Result<SummaryRow>> =
        pool.install(|| plan.runs.par_iter().map(|r| run_one(plan, r, opts)).collect());
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    write_summary(&summary_path(&opts.out), &rows)?;
    Ok(rows)
}
