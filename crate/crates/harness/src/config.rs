//! Experiment configuration: a single JSON document.
//!
//! ```json
//! {
//!   "experiments": [
//!     {
//!       "name": "lowrank_n500",
//!       "algorithm": "lowrank",
//!       "adversary": { "kind": "stochastic_lowrank", "n": 500, "d": 3, "t": 4000 },
//!       "seeds": [1, 2, 3],
//!       "algorithm_params": { "span_tol": 1e-7 }
//!     }
//!   ]
//! }
//! ```
//!
//! Unknown keys anywhere are rejected. Adversary kinds are the generator
//! names plus `stream`, which loads a loss matrix from `path` (relative paths
//! resolve against the config file's directory).

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use lowrank_core::adversaries::{AdversaryConfig, AdversaryKind, LossMatrix};

use crate::error::{HarnessError, Result};
use crate::stream_io;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub algorithm: Algorithm,
    pub adversary: AdversarySpec,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub algorithm_params: AlgorithmParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Hedge,
    Ftl,
    OmdFixed,
    Lowrank,
    Adagrad,
    Combiner,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Hedge => "hedge",
            Algorithm::Ftl => "ftl",
            Algorithm::OmdFixed => "omd_fixed",
            Algorithm::Lowrank => "lowrank",
            Algorithm::Adagrad => "adagrad",
            Algorithm::Combiner => "combiner",
        }
    }

    fn accepts(self, param: &str) -> bool {
        let allowed: &[&str] = match self {
            Algorithm::Hedge => &["eta", "horizon"],
            Algorithm::Ftl => &[],
            Algorithm::OmdFixed => &["eta", "eps"],
            Algorithm::Lowrank => &["span_tol", "eps"],
            Algorithm::Adagrad => &["eta", "delta"],
            Algorithm::Combiner => &["eta", "horizon", "span_tol", "eps"],
        };
        allowed.contains(&param)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub kind: String,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub t: Option<usize>,
    pub eps: Option<f64>,
    pub path: Option<PathBuf>,
}

/// Algorithm parameters. Meaning per algorithm:
///
/// * `eta`: Hedge's constant rate; the coefficient `c` in `η_t = c/√t` for
///   `omd_fixed`; AdaGrad's step size; the combiner's meta rate.
/// * `delta`: AdaGrad's initial diagonal.
/// * `eps`: accuracy of the enclosing ellipsoid, in `(0, 1]`.
/// * `span_tol`: new-direction threshold of the low-rank learner.
/// * `horizon`: horizon used for default rates (defaults to the stream length).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmParams {
    pub eta: Option<f64>,
    pub delta: Option<f64>,
    pub eps: Option<f64>,
    pub span_tol: Option<f64>,
    pub horizon: Option<usize>,
}

impl AlgorithmParams {
    fn present(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.eta.is_some() {
            v.push("eta");
        }
        if self.delta.is_some() {
            v.push("delta");
        }
        if self.eps.is_some() {
            v.push("eps");
        }
        if self.span_tol.is_some() {
            v.push("span_tol");
        }
        if self.horizon.is_some() {
            v.push("horizon");
        }
        v
    }
}

/// Where a run's losses come from.
#[derive(Debug, Clone)]
pub enum Source {
    Generated(AdversaryConfig),
    File(Arc<LossMatrix>),
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct PlannedExperiment {
    pub name: String,
    pub algorithm: Algorithm,
    pub params: AlgorithmParams,
    pub source: Source,
    pub seeds: Vec<u64>,
}

/// One seeded run. `run_id` orders runs as they appear in the config.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub run_id: usize,
    pub experiment: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub experiments: Vec<PlannedExperiment>,
    pub runs: Vec<RunSpec>,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

/// Validates a config and expands it into runs; `seed_offset` is added
/// (wrapping) to every seed and `base_dir` resolves relative stream paths.
pub fn plan(config: &ExperimentConfig, base_dir: &Path, seed_offset: u64) -> Result<Plan> {
    if config.experiments.is_empty() {
        return Err(HarnessError::Config("experiments: list is empty".into()));
    }
    let mut names = HashSet::new();
    let mut experiments = Vec::new();
    let mut runs = Vec::new();
    for (idx, exp) in config.experiments.iter().enumerate() {
        let at = |field: &str, msg: String| HarnessError::Config(format!("experiments[{idx}].{field}: {msg}"));
        if exp.name.is_empty()
            || !exp.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        {
            return Err(at("name", format!("{:?} must be non-empty and use only [A-Za-z0-9._-]", exp.name)));
        }
        if !names.insert(exp.name.as_str()) {
            return Err(at("name", format!("duplicate experiment name {:?}", exp.name)));
        }
        if exp.seeds.is_empty() {
            return Err(at("seeds", "at least one seed is required".into()));
        }
        let mut seen = HashSet::new();
        for s in &exp.seeds {
            if !seen.insert(*s) {
                return Err(at("seeds", format!("duplicate seed {s}")));
            }
        }
        let source = resolve_adversary(&exp.adversary, base_dir).map_err(|m| at("adversary", m))?;
        check_params(exp.algorithm, &exp.algorithm_params).map_err(|m| at("algorithm_params", m))?;
        if exp.algorithm == Algorithm::OmdFixed {
            let has_embedding = matches!(
                &source,
                Source::Generated(c) if matches!(
                    c.kind,
                    AdversaryKind::StochasticLowRank | AdversaryKind::ApproxLowRank | AdversaryKind::Hypercube
                )
            );
            if !has_embedding {
                return Err(at(
                    "algorithm",
                    "omd_fixed needs the loss subspace, available only for stochastic_lowrank, approx_lowrank and hypercube".into(),
                ));
            }
        }
        let seeds: Vec<u64> = exp.seeds.iter().map(|s| s.wrapping_add(seed_offset)).collect();
        for &seed in &seeds {
            runs.push(RunSpec {
                run_id: runs.len(),
                experiment: idx,
                seed,
            });
        }
        experiments.push(PlannedExperiment {
            name: exp.name.clone(),
            algorithm: exp.algorithm,
            params: exp.algorithm_params.clone(),
            source,
            seeds,
        });
    }
    Ok(Plan { experiments, runs })
}

fn check_params(alg: Algorithm, p: &AlgorithmParams) -> std::result::Result<(), String> {
    for name in p.present() {
        if !alg.accepts(name) {
            return Err(format!("{name} is not a parameter of {}", alg.name()));
        }
    }
    let positive = |name: &str, v: Option<f64>| match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(format!("{name} must be positive and finite, got {x}")),
        _ => Ok(()),
    };
    positive("eta", p.eta)?;
    positive("delta", p.delta)?;
    if let Some(e) = p.eps {
        if !(e > 0.0 && e <= 1.0) {
            return Err(format!("eps must lie in (0, 1], got {e}"));
        }
    }
    if let Some(s) = p.span_tol {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(format!("span_tol must be non-negative and finite, got {s}"));
        }
    }
    if p.horizon == Some(0) {
        return Err("horizon must be at least 1".into());
    }
    if alg == Algorithm::Adagrad && (p.eta.is_none() || p.delta.is_none()) {
        return Err("adagrad requires eta and delta".into());
    }
    Ok(())
}

/// Turns an adversary spec into a generator config (seed filled in per run)
/// or a loaded stream.
pub fn resolve_adversary(spec: &AdversarySpec, base_dir: &Path) -> std::result::Result<Source, String> {
    let used: &[&str] = match spec.kind.as_str() {
        "stream" => &["path"],
        "stochastic_lowrank" => &["n", "d", "t"],
        "approx_lowrank" => &["n", "d", "t", "eps"],
        "hypercube" => &["n", "d", "t"],
        "adagrad_case1" | "adagrad_case2" => &["n", "t"],
        other => {
            let known: Vec<&str> = AdversaryKind::ALL.iter().map(|k| k.name()).collect();
            return Err(format!("unknown kind {other:?}; expected one of {}, stream", known.join(", ")));
        }
    };
    let given = [
        ("n", spec.n.is_some()),
        ("d", spec.d.is_some()),
        ("t", spec.t.is_some()),
        ("eps", spec.eps.is_some()),
        ("path", spec.path.is_some()),
    ];
    for (field, present) in given {
        if present && !used.contains(&field) {
            return Err(format!("{field} is not used by kind {}", spec.kind));
        }
    }
    let need = |field: &str, v: Option<usize>| v.ok_or_else(|| format!("kind {} requires {field}", spec.kind));

    if spec.kind == "stream" {
        let path = spec.path.as_ref().ok_or("kind stream requires path")?;
        let path = if path.is_relative() { base_dir.join(path) } else { path.clone() };
        let losses = stream_io::read_losses(&path).map_err(|e| e.to_string())?;
        return Ok(Source::File(Arc::new(losses)));
    }
    let kind = AdversaryKind::from_name(&spec.kind).expect("checked above");
    let t = need("t", spec.t)?;
    let (n, d) = match kind {
        AdversaryKind::Hypercube => {
            let d = need("d", spec.d)?;
            let n = if d < usize::BITS as usize { 1usize << d } else { 0 };
            if let Some(given) = spec.n {
                if given != n {
                    return Err(format!("hypercube with d={d} has N = 2^d = {n}, got n={given}"));
                }
            }
            (n, d)
        }
        AdversaryKind::AdagradCase1 | AdversaryKind::AdagradCase2 => (need("n", spec.n)?, 1),
        _ => (need("n", spec.n)?, need("d", spec.d)?),
    };
    let eps = match kind {
        AdversaryKind::ApproxLowRank => spec.eps.ok_or("kind approx_lowrank requires eps")?,
        _ => 0.0,
    };
    let cfg = AdversaryConfig {
        kind,
        n,
        d,
        t,
        eps,
        seed: 0,
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(Source::Generated(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan_of(json: &str) -> Result<Plan> {
        plan(&parse_config(json)?, Path::new("."), 0)
    }

    #[test]
    fn minimal_config_expands_runs_in_order() {
        let p = plan_of(
            r#"{"experiments": [
                {"name": "a", "algorithm": "hedge", "adversary": {"kind": "stochastic_lowrank", "n": 5, "d": 2, "t": 10}, "seeds": [3, 1]},
                {"name": "b", "algorithm": "ftl", "adversary": {"kind": "hypercube", "d": 2, "t": 4}, "seeds": [7]}
            ]}"#,
        )
        .unwrap();
        let runs: Vec<(usize, usize, u64)> = p.runs.iter().map(|r| (r.run_id, r.experiment, r.seed)).collect();
        assert_eq!(runs, vec![(0, 0, 3), (1, 0, 1), (2, 1, 7)]);
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = plan_of(r#"{"experiments": [], "extra": 1}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("unknown field"), "{err}");
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn parameter_not_used_by_algorithm() {
        let err = plan_of(
            r#"{"experiments": [{"name": "a", "algorithm": "ftl", "adversary": {"kind": "adagrad_case1", "n": 4, "t": 3}, "seeds": [0], "algorithm_params": {"eta": 1.0}}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("experiments[0].algorithm_params"), "{err}");
    }

    #[test]
    fn duplicate_names_and_bad_adversaries() {
        let dup = r#"{"experiments": [
            {"name": "a", "algorithm": "ftl", "adversary": {"kind": "adagrad_case1", "n": 4, "t": 3}, "seeds": [0]},
            {"name": "a", "algorithm": "ftl", "adversary": {"kind": "adagrad_case1", "n": 4, "t": 3}, "seeds": [0]}
        ]}"#;
        assert!(plan_of(dup).unwrap_err().to_string().contains("duplicate"));
        let odd = r#"{"experiments": [{"name": "a", "algorithm": "ftl", "adversary": {"kind": "adagrad_case2", "n": 5, "t": 3}, "seeds": [0]}]}"#;
        assert!(plan_of(odd).unwrap_err().to_string().contains("even"));
        let extra = r#"{"experiments": [{"name": "a", "algorithm": "ftl", "adversary": {"kind": "stochastic_lowrank", "n": 5, "d": 1, "t": 3, "eps": 0.1}, "seeds": [0]}]}"#;
        assert!(plan_of(extra).unwrap_err().to_string().contains("eps is not used"));
    }

    #[test]
    fn omd_fixed_needs_a_subspace() {
        let cfg = r#"{"experiments": [{"name": "a", "algorithm": "omd_fixed", "adversary": {"kind": "adagrad_case1", "n": 4, "t": 3}, "seeds": [0]}]}"#;
        assert!(plan_of(cfg).unwrap_err().to_string().contains("subspace"));
    }

    #[test]
    fn seed_offset_shifts_every_seed() {
        let cfg = parse_config(
            r#"{"experiments": [{"name": "a", "algorithm": "ftl", "adversary": {"kind": "adagrad_case1", "n": 4, "t": 3}, "seeds": [0, 5]}]}"#,
        )
        .unwrap();
        let p = plan(&cfg, Path::new("."), 100).unwrap();
        assert_eq!(p.experiments[0].seeds, vec![100, 105]);
    }
}
