use super::{check_loss, EtaSchedule, Learner};
use crate::error::Result;
use crate::linalg::Vector;
use crate::simplex_qp::DecisionVector;

/// Multiplicative weights: `w(i) ∝ exp(−η_t Σ_{s<t} ℓ_s(i))`.
#[derive(Debug, Clone)]
pub struct Hedge {
    schedule: EtaSchedule,
    cumulative: Vector,
    x: DecisionVector,
    rounds: usize,
}

impl Hedge {
    pub fn new(n: usize, schedule: EtaSchedule) -> Result<Self> {
        schedule.validate()?;
        if n == 0 {
            return Err(crate::Error::contract("Hedge needs at least one expert"));
        }
        Ok(Self {
            schedule,
            cumulative: Vector::zeros(n),
            x: DecisionVector::uniform(n),
            rounds: 0,
        })
    }

    /// `η = √(ln N / T)` when the horizon is known, otherwise the anytime
    /// schedule `η_t = √(ln N / t)`.
    pub fn with_default_rate(n: usize, horizon: Option<usize>) -> Result<Self> {
        let c = (n as f64).ln().sqrt();
        let schedule = match horizon {
            Some(t) => EtaSchedule::Constant(c / (t.max(1) as f64).sqrt()),
            None => EtaSchedule::InvSqrt(c),
        };
        Self::new(n, schedule)
    }

    pub fn cumulative_losses(&self) -> &Vector {
        &self.cumulative
    }

    fn recompute(&mut self) {
        let eta = self.schedule.at(self.rounds + 1);
        let min = self.cumulative.min();
        let w = self.cumulative.map(|c| (-eta * (c - min)).exp());
        let s = w.sum();
        self.x = DecisionVector::new(w / s).expect("normalized weights");
    }
}

impl Learner for Hedge {
    fn name(&self) -> &str {
        "hedge"
    }

    fn experts(&self) -> usize {
        self.cumulative.len()
    }

    fn predict(&self) -> &DecisionVector {
        &self.x
    }

    fn update(&mut self, loss: &Vector) -> Result<()> {
        check_loss(self.experts(), loss)?;
        self.cumulative += loss;
        self.rounds += 1;
        self.recompute();
        Ok(())
    }

    fn reset(&mut self, _seed: u64) {
        let n = self.experts();
        self.cumulative = Vector::zeros(n);
        self.x = DecisionVector::uniform(n);
        self.rounds = 0;
    }

    fn rounds(&self) -> usize {
        self.rounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_losses_keep_uniform() {
        let mut h = Hedge::with_default_rate(4, None).unwrap();
        for _ in 0..5 {
            h.update(&Vector::zeros(4)).unwrap();
            assert_eq!(h.predict(), &DecisionVector::uniform(4));
        }
    }

    #[test]
    fn one_round_weights() {
        let mut h = Hedge::new(2, EtaSchedule::Constant(0.5)).unwrap();
        h.update(&Vector::from_vec(vec![1.0, -1.0])).unwrap();
        let (a, b) = ((-0.5f64).exp(), 0.5f64.exp());
        assert!((h.predict()[0] - a / (a + b)).abs() < 1e-15);
        assert!((h.predict()[1] - b / (a + b)).abs() < 1e-15);
    }

    #[test]
    fn shifting_losses_changes_nothing() {
        let mut a = Hedge::new(3, EtaSchedule::Constant(0.3)).unwrap();
        let mut b = a.clone();
        let losses = [[0.2, -0.5, 0.9], [0.1, 0.1, -0.3], [-1.0, 0.4, 0.0]];
        for l in losses {
            let l = Vector::from_column_slice(&l);
            a.update(&l).unwrap();
            b.update(&l.add_scalar(0.37)).unwrap();
            assert!((a.predict().as_vector() - b.predict().as_vector()).amax() < 1e-14);
        }
    }
}
