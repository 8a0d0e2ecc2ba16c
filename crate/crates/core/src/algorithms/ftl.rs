use super::{check_loss, Learner};
use crate::error::Result;
use crate::linalg::Vector;
use crate::simplex_qp::DecisionVector;

/// Follow-The-Leader: plays the vertex of the expert with the least cumulative
/// loss, lowest index on ties (so round 1 plays expert 1).
#[derive(Debug, Clone)]
pub struct Ftl {
    cumulative: Vector,
    x: DecisionVector,
    rounds: usize,
}

impl Ftl {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(crate::Error::contract("FTL needs at least one expert"));
        }
        Ok(Self {
            cumulative: Vector::zeros(n),
            x: DecisionVector::vertex(n, 0),
            rounds: 0,
        })
    }

    pub fn leader(&self) -> usize {
        leader(&self.cumulative)
    }
}

fn leader(cumulative: &Vector) -> usize {
    let mut best = 0;
    for (i, &c) in cumulative.iter().enumerate() {
        if c < cumulative[best] {
            best = i;
        }
    }
    best
}

impl Learner for Ftl {
    fn name(&self) -> &str {
        "ftl"
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
        self.x = DecisionVector::vertex(self.experts(), self.leader());
        Ok(())
    }

    fn reset(&mut self, _seed: u64) {
        *self = Ftl::new(self.experts()).expect("n > 0");
    }

    fn rounds(&self) -> usize {
        self.rounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn picks_minimum_with_low_index_ties() {
        let mut f = Ftl::new(3).unwrap();
        assert_eq!(f.predict(), &DecisionVector::vertex(3, 0));
        f.update(&Vector::from_vec(vec![1.0, 1.0, 2.0])).unwrap();
        assert_eq!(f.leader(), 0);
        f.update(&Vector::from_vec(vec![2.0, 0.0, 0.0])).unwrap();
        // cumulative (3, 1, 2)
        assert_eq!(f.leader(), 1);
        assert_eq!(f.predict(), &DecisionVector::vertex(3, 1));
    }

    #[test]
    fn matches_brute_force_vertex_search() {
        let mut rng = crate::rng::seeded(4);
        for _ in 0..20 {
            let n = rng.random_range(1..8);
            let mut f = Ftl::new(n).unwrap();
            let mut totals = vec![0.0; n];
            for _ in 0..15 {
                // Coarse grid so that ties actually occur.
                let l: Vec<f64> = (0..n).map(|_| rng.random_range(-2..=2) as f64 / 2.0).collect();
                f.update(&Vector::from_vec(l.clone())).unwrap();
                for (t, v) in totals.iter_mut().zip(&l) {
                    *t += v;
                }
                let best = (0..n)
                    .map(|j| (j, totals[j]))
                    .fold((0, f64::INFINITY), |acc, (j, v)| if v < acc.1 { (j, v) } else { acc })
                    .0;
                assert_eq!(f.leader(), best);
            }
        }
    }
}
