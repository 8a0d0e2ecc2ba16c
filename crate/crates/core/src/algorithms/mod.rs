//! Online learners for prediction with expert advice.
//!
//! Every learner implements [`Learner`]: it exposes its current decision on
//! the simplex, ingests the round's loss vector, and can be reset. [`play`]
//! drives a learner through a loss matrix and records the regret trace.

mod adagrad;
mod combiner;
mod ftl;
mod hedge;
mod lowrank;
mod omd;

pub use adagrad::{AdaGrad, AdaGradCase, adagrad_case_conditions};
pub use combiner::MetaCombiner;
pub use ftl::Ftl;
pub use hedge::Hedge;
pub use lowrank::{
    lowrank_regularizer, EpochDiagnostics, LowRankExperts, DEFAULT_MVEE_EPS, DEFAULT_SPAN_TOL,
};
pub use omd::OmdFixed;

use crate::adversaries::LossMatrix;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::simplex_qp::DecisionVector;

pub trait Learner: Send {
    fn name(&self) -> &str;

    fn experts(&self) -> usize;

    /// Decision for the upcoming round.
    fn predict(&self) -> &DecisionVector;

    /// Ingests the loss of the round just played.
    fn update(&mut self, loss: &Vector) -> Result<()>;

    /// Returns to the initial state. Deterministic learners ignore the seed.
    fn reset(&mut self, seed: u64);

    /// Number of updates since construction or the last reset.
    fn rounds(&self) -> usize;
}

impl<L: Learner + ?Sized> Learner for Box<L> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn experts(&self) -> usize {
        (**self).experts()
    }
    fn predict(&self) -> &DecisionVector {
        (**self).predict()
    }
    fn update(&mut self, loss: &Vector) -> Result<()> {
        (**self).update(loss)
    }
    fn reset(&mut self, seed: u64) {
        (**self).reset(seed)
    }
    fn rounds(&self) -> usize {
        (**self).rounds()
    }
}

/// Step-size sequence indexed by the 1-based round `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaSchedule {
    Constant(f64),
    /// `η_t = c/√t`.
    InvSqrt(f64),
}

impl EtaSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            EtaSchedule::Constant(c) => c,
            EtaSchedule::InvSqrt(c) => c / (t.max(1) as f64).sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        let c = match *self {
            EtaSchedule::Constant(c) | EtaSchedule::InvSqrt(c) => c,
        };
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::contract(format!("invalid step-size constant {c}")));
        }
        Ok(())
    }
}

fn check_loss(n: usize, loss: &Vector) -> Result<()> {
    if loss.len() != n {
        return Err(Error::contract(format!(
            "loss of length {} for {n} experts",
            loss.len()
        )));
    }
    if loss.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("loss has non-finite entries"));
    }
    Ok(())
}

/// `Σ x_t·ℓ_t − min_i Σ ℓ_t(i)`.
pub fn regret(losses: &LossMatrix, decisions: &[DecisionVector]) -> Result<f64> {
    if losses.rounds() != decisions.len() {
        return Err(Error::contract(format!(
            "{} rounds of losses but {} decisions",
            losses.rounds(),
            decisions.len()
        )));
    }
    let mut learner = 0.0;
    for (l, x) in losses.columns().iter().zip(decisions) {
        if x.len() != losses.experts() {
            return Err(Error::contract("decision length differs from expert count"));
        }
        learner += x.loss(l);
    }
    let best = losses.expert_totals().min();
    Ok(learner - best)
}

/// Running regret: cumulative learner loss against cumulative expert losses.
#[derive(Debug, Clone)]
pub struct RegretTracker {
    learner: f64,
    experts: Vector,
}

impl RegretTracker {
    pub fn new(n: usize) -> Self {
        Self {
            learner: 0.0,
            experts: Vector::zeros(n),
        }
    }

    /// Records a round and returns the learner's loss on it.
    pub fn record(&mut self, x: &DecisionVector, loss: &Vector) -> f64 {
        let round = x.loss(loss);
        self.learner += round;
        self.experts += loss;
        round
    }

    pub fn regret(&self) -> f64 {
        self.learner - self.experts.min()
    }

    pub fn learner_loss(&self) -> f64 {
        self.learner
    }

    pub fn best_expert_loss(&self) -> f64 {
        self.experts.min()
    }
}

/// Per-round record of one learner run.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub round_loss: Vec<f64>,
    pub cum_regret: Vec<f64>,
    /// Decisions, kept only when requested.
    pub decisions: Option<Vec<DecisionVector>>,
}

impl Trace {
    pub fn final_regret(&self) -> f64 {
        self.cum_regret.last().copied().unwrap_or(0.0)
    }
}

/// Plays `learner` through every column of `losses`.
pub fn play<L: Learner + ?Sized>(learner: &mut L, losses: &LossMatrix, keep_decisions: bool) -> Result<Trace> {
    if learner.experts() != losses.experts() {
        return Err(Error::contract(format!(
            "learner has {} experts, losses have {}",
            learner.experts(),
            losses.experts()
        )));
    }
    let mut tracker = RegretTracker::new(losses.experts());
    let mut trace = Trace {
        round_loss: Vec::with_capacity(losses.rounds()),
        cum_regret: Vec::with_capacity(losses.rounds()),
        decisions: keep_decisions.then(Vec::new),
    };
    for (t, loss) in losses.columns().iter().enumerate() {
        let x = learner.predict();
        trace.round_loss.push(tracker.record(x, loss));
        trace.cum_regret.push(tracker.regret());
        if let Some(d) = trace.decisions.as_mut() {
            d.push(x.clone());
        }
        learner.update(loss).map_err(|e| e.at_round(t + 1))?;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regret_arithmetic() {
        let l = LossMatrix::from_columns(
            2,
            vec![
                Vector::from_vec(vec![1.0, -1.0]),
                Vector::from_vec(vec![1.0, -1.0]),
            ],
        )
        .unwrap();
        let uniform = vec![DecisionVector::uniform(2); 2];
        assert_eq!(regret(&l, &uniform).unwrap(), 2.0);
        let best = vec![DecisionVector::vertex(2, 1); 2];
        assert_eq!(regret(&l, &best).unwrap(), 0.0);
        assert!(regret(&l, &uniform[..1]).is_err());
    }

    #[test]
    fn schedules() {
        assert_eq!(EtaSchedule::Constant(0.3).at(10), 0.3);
        assert_eq!(EtaSchedule::InvSqrt(4.0).at(4), 2.0);
    }
}
