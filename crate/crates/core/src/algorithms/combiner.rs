use super::{check_loss, Learner};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::simplex_qp::DecisionVector;

/// Runs two learners side by side and mixes their decisions with two-expert
/// Hedge, where each sub-learner's loss is `⟨x_t, ℓ_t⟩` of its own decision.
pub struct MetaCombiner {
    learners: [Box<dyn Learner>; 2],
    eta: f64,
    cumulative: [f64; 2],
    lambda: [f64; 2],
    x: DecisionVector,
    rounds: usize,
}

impl MetaCombiner {
    pub fn new(a: Box<dyn Learner>, b: Box<dyn Learner>, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::contract(format!("eta must be positive, got {eta}")));
        }
        if a.experts() != b.experts() {
            return Err(Error::contract(format!(
                "sub-learners disagree on the number of experts ({} vs {})",
                a.experts(),
                b.experts()
            )));
        }
        let mut c = Self {
            learners: [a, b],
            eta,
            cumulative: [0.0; 2],
            lambda: [0.5; 2],
            x: DecisionVector::uniform(1),
            rounds: 0,
        };
        c.mix();
        Ok(c)
    }

    /// `η = √(2 ln 2 / T)`, which keeps the regret against the better
    /// sub-learner below `√(2 T ln 2)` for losses in `[−1, 1]`.
    pub fn for_horizon(a: Box<dyn Learner>, b: Box<dyn Learner>, horizon: usize) -> Result<Self> {
        let eta = (2.0 * std::f64::consts::LN_2 / horizon.max(1) as f64).sqrt();
        Self::new(a, b, eta)
    }

    /// Current mixing weights over the two sub-learners.
    pub fn weights(&self) -> [f64; 2] {
        self.lambda
    }

    /// Cumulative loss of each sub-learner.
    pub fn sub_losses(&self) -> [f64; 2] {
        self.cumulative
    }

    pub fn learners(&self) -> &[Box<dyn Learner>; 2] {
        &self.learners
    }

    fn mix(&mut self) {
        let min = self.cumulative[0].min(self.cumulative[1]);
        let w = self.cumulative.map(|c| (-self.eta * (c - min)).exp());
        let s = w[0] + w[1];
        self.lambda = [w[0] / s, w[1] / s];
        let x = self.learners[0].predict().as_vector() * self.lambda[0]
            + self.learners[1].predict().as_vector() * self.lambda[1];
        self.x = DecisionVector::new(x).expect("convex combination of simplex points");
    }
}

impl Learner for MetaCombiner {
    fn name(&self) -> &str {
        "combiner"
    }

    fn experts(&self) -> usize {
        self.learners[0].experts()
    }

    fn predict(&self) -> &DecisionVector {
        &self.x
    }

    fn update(&mut self, loss: &Vector) -> Result<()> {
        check_loss(self.experts(), loss)?;
        self.rounds += 1;
        for (c, l) in self.cumulative.iter_mut().zip(self.learners.iter_mut()) {
            *c += l.predict().loss(loss);
            l.update(loss)?;
        }
        self.mix();
        Ok(())
    }

    fn reset(&mut self, seed: u64) {
        for l in self.learners.iter_mut() {
            l.reset(seed);
        }
        self.cumulative = [0.0; 2];
        self.rounds = 0;
        self.mix();
    }

    fn rounds(&self) -> usize {
        self.rounds
    }
}
