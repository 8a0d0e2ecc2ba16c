use super::{check_loss, lowrank_regularizer, EtaSchedule, Learner};
use crate::error::{Error, Result};
use crate::linalg::{IdentityPlusLowRank, Matrix, Vector};
use crate::simplex_qp::{omd_step, DecisionVector, SimplexMetric};

/// Online mirror descent on the simplex with a fixed quadratic regularizer
/// `‖·‖²_H`.
#[derive(Debug, Clone)]
pub struct OmdFixed<H> {
    h: H,
    schedule: EtaSchedule,
    x1: DecisionVector,
    x: DecisionVector,
    rounds: usize,
}

impl<H: SimplexMetric> OmdFixed<H> {
    pub fn new(h: H, schedule: EtaSchedule, x1: DecisionVector) -> Result<Self> {
        schedule.validate()?;
        if h.dim() != x1.len() {
            return Err(Error::contract(format!(
                "regularizer of dimension {} with a start point of length {}",
                h.dim(),
                x1.len()
            )));
        }
        Ok(Self {
            h,
            schedule,
            x: x1.clone(),
            x1,
            rounds: 0,
        })
    }

    pub fn regularizer(&self) -> &H {
        &self.h
    }
}

impl OmdFixed<IdentityPlusLowRank> {
    /// The learner for losses known to lie in `span(U)`: `H = I + U M Uᵀ` with
    /// `M` the enclosing ellipsoid of `{w : ‖Uw‖∞ ≤ 1}`, `η_t = 4√(d/t)`, and a
    /// uniform start.
    pub fn known_subspace(u: &Matrix, mvee_eps: f64) -> Result<Self> {
        let d = u.ncols();
        let (_, h) = lowrank_regularizer(u, mvee_eps)?;
        let n = u.nrows();
        Self::new(
            h,
            EtaSchedule::InvSqrt(4.0 * (d as f64).sqrt()),
            DecisionVector::uniform(n),
        )
    }
}

impl<H: SimplexMetric + Send> Learner for OmdFixed<H> {
    fn name(&self) -> &str {
        "omd_fixed"
    }

    fn experts(&self) -> usize {
        self.x.len()
    }

    fn predict(&self) -> &DecisionVector {
        &self.x
    }

    fn update(&mut self, loss: &Vector) -> Result<()> {
        check_loss(self.experts(), loss)?;
        self.rounds += 1;
        let eta = self.schedule.at(self.rounds);
        if eta > 0.0 {
            self.x = omd_step(&self.h, eta, &self.x, loss)?;
        }
        Ok(())
    }

    fn reset(&mut self, _seed: u64) {
        self.x = self.x1.clone();
        self.rounds = 0;
    }

    fn rounds(&self) -> usize {
        self.rounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use crate::simplex_qp::euclidean_simplex_projection;

    #[test]
    fn zero_losses_stay_put() {
        let x1 = DecisionVector::new(Vector::from_vec(vec![0.1, 0.6, 0.3])).unwrap();
        let mut l = OmdFixed::new(SymMatrix::identity(3), EtaSchedule::InvSqrt(2.0), x1.clone()).unwrap();
        for _ in 0..10 {
            l.update(&Vector::zeros(3)).unwrap();
        }
        assert_eq!(l.predict(), &x1);
    }

    #[test]
    fn identity_metric_is_projected_gradient() {
        // With H = I the step is Π_Δ(x − (η/2)ℓ).
        let eta = 0.4;
        let mut l = OmdFixed::new(SymMatrix::identity(2), EtaSchedule::Constant(eta), DecisionVector::uniform(2)).unwrap();
        let losses = [[1.0, -0.5], [0.3, 0.9], [-1.0, 1.0]];
        let mut hand = Vector::from_vec(vec![0.5, 0.5]);
        for l_t in losses {
            let l_t = Vector::from_column_slice(&l_t);
            l.update(&l_t).unwrap();
            hand = euclidean_simplex_projection(&(hand - l_t * (eta / 2.0))).into_vector();
            assert!((l.predict().as_vector() - &hand).amax() < 1e-12);
        }
        // Hand-computed values for the three steps above.
        let expected = [[0.35, 0.65], [0.41, 0.59], [0.61, 0.39]];
        let mut l2 = OmdFixed::new(SymMatrix::identity(2), EtaSchedule::Constant(eta), DecisionVector::uniform(2)).unwrap();
        for (l_t, want) in losses.iter().zip(expected) {
            l2.update(&Vector::from_column_slice(l_t)).unwrap();
            assert!((l2.predict().as_vector() - Vector::from_column_slice(&want)).amax() < 1e-12);
        }
    }
}
