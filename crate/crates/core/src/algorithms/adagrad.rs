//! Full-matrix AdaGrad on the simplex.
//!
//! `S_t = δI + Σ ℓ_sℓ_sᵀ` is stored as `δI + Q C Qᵀ`, with `Q` an orthonormal
//! basis of the observed losses and `C` their Gram matrix in that basis, so
//! the square root `G_t = S_t^{1/2}` is an identity-plus-low-rank operator:
//! `G = √δ I + Q W diag(√(δ + σ_i) − √δ) Wᵀ Qᵀ` for `C = W diag(σ) Wᵀ`.

use super::{check_loss, Learner};
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, IdentityPlusLowRank, Matrix, OrthoBasis, SymMatrix, Vector};
use crate::simplex_qp::{mahalanobis_simplex_projection, DecisionVector};

/// Relative residual below which a loss is treated as lying in the span of
/// the previous ones.
const SPAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct AdaGrad {
    eta: f64,
    delta: f64,
    x1: DecisionVector,
    x: DecisionVector,
    basis: OrthoBasis,
    coeffs: Matrix,
    g: IdentityPlusLowRank,
    rounds: usize,
}

impl AdaGrad {
    pub fn new(n: usize, eta: f64, delta: f64) -> Result<Self> {
        Self::with_start(DecisionVector::uniform(n), eta, delta)
    }

    pub fn with_start(x1: DecisionVector, eta: f64, delta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::contract(format!("eta must be positive, got {eta}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::contract(format!("delta must be positive, got {delta}")));
        }
        let n = x1.len();
        Ok(Self {
            eta,
            delta,
            x: x1.clone(),
            x1,
            basis: OrthoBasis::new(n),
            coeffs: Matrix::zeros(0, 0),
            g: IdentityPlusLowRank::new(delta.sqrt(), Matrix::zeros(n, 0))?,
            rounds: 0,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `G_t` in factored form.
    pub fn preconditioner(&self) -> &IdentityPlusLowRank {
        &self.g
    }

    /// Dense `S_t`.
    pub fn s_dense(&self) -> SymMatrix {
        let q = self.basis.to_matrix();
        let mut s = &q * &self.coeffs * q.transpose();
        for i in 0..s.nrows() {
            s[(i, i)] += self.delta;
        }
        SymMatrix::symmetrized(s)
    }

    /// Dense `G_t`.
    pub fn g_dense(&self) -> SymMatrix {
        self.g.to_dense()
    }

    fn absorb(&mut self, loss: &Vector) -> Result<()> {
        let tol = SPAN_TOL * loss.norm();
        if self.basis.insert(loss, tol)? {
            let r = self.basis.k();
            self.coeffs = self.coeffs.clone().resize(r, r, 0.0);
        }
        let c = self.basis.coords(loss);
        self.coeffs.ger(1.0, &c, &c, 1.0);

        let eig = sym_eig(&SymMatrix::symmetrized(self.coeffs.clone()))?;
        let root_delta = self.delta.sqrt();
        let q = self.basis.to_matrix();
        let mut factor = &q * &eig.vectors;
        for (j, sigma) in eig.values.iter().enumerate() {
            let w = ((self.delta + sigma.max(0.0)).sqrt() - root_delta).max(0.0).sqrt();
            factor.column_mut(j).scale_mut(w);
        }
        self.g = IdentityPlusLowRank::new(root_delta, factor)?;
        Ok(())
    }

    fn step(&mut self, loss: &Vector) -> Result<()> {
        self.absorb(loss)?;
        let y = self.x.as_vector() - self.g.solve(loss) * self.eta;
        self.x = mahalanobis_simplex_projection(&self.g, &y)?;
        Ok(())
    }
}

impl Learner for AdaGrad {
    fn name(&self) -> &str {
        "adagrad"
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
        if loss.iter().all(|&v| v == 0.0) {
            return Ok(());
        }
        let round = self.rounds;
        self.step(loss).map_err(|e| e.at_round(round))
    }

    fn reset(&mut self, _seed: u64) {
        *self = Self::with_start(self.x1.clone(), self.eta, self.delta).expect("validated");
    }

    fn rounds(&self) -> usize {
        self.rounds
    }
}

/// Which of the two hard regimes for AdaGrad a `(η, δ, N, T)` instance falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaGradCase {
    /// Small steps: `T < 1/(36η²) + 2√δ/(6η)`; the constant loss defeats it.
    SlowUpdates,
    /// Large steps: `T < η²N − δ`; the alternating loss defeats it.
    Oscillation,
}

/// The cases whose condition holds for the instance, slow-update case first.
pub fn adagrad_case_conditions(eta: f64, delta: f64, n: usize, t: usize) -> Vec<AdaGradCase> {
    let t = t as f64;
    let mut cases = Vec::new();
    if t < 1.0 / (36.0 * eta * eta) + 2.0 * delta.sqrt() / (6.0 * eta) {
        cases.push(AdaGradCase::SlowUpdates);
    }
    if t < eta * eta * n as f64 - delta {
        cases.push(AdaGradCase::Oscillation);
    }
    cases
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversaries::{adagrad_case1_direction, gen_adagrad_case2};
    use crate::linalg::sqrt_psd;

    #[test]
    fn zero_loss_keeps_the_start() {
        let mut a = AdaGrad::new(5, 0.3, 1.0).unwrap();
        a.update(&Vector::zeros(5)).unwrap();
        assert_eq!(a.predict(), &DecisionVector::uniform(5));
    }

    #[test]
    fn preconditioner_squares_to_s_and_s_grows() {
        let mut a = AdaGrad::new(6, 0.5, 0.3).unwrap();
        let s = crate::adversaries::gen_approx_lowrank(6, 2, 12, 0.2, 4).unwrap();
        let probe = Vector::from_fn(6, |i, _| (i as f64 - 2.5) / 3.0);
        let mut prev = a.s_dense().quad_form(&probe);
        for l in s.losses.columns() {
            a.update(l).unwrap();
            let sd = a.s_dense();
            let g = a.g_dense();
            let gg = g.as_matrix() * g.as_matrix();
            assert!((gg - sd.as_matrix()).amax() < 1e-9);
            let dense_root = sqrt_psd(&sd).unwrap();
            assert!((dense_root.as_matrix() - g.as_matrix()).amax() < 1e-9);
            let cur = sd.quad_form(&probe);
            assert!(cur >= prev - 1e-12);
            prev = cur;
        }
    }

    #[test]
    fn constant_loss_moves_along_the_loss_direction() {
        // While iterates stay interior, x_{t+1} = x_1 − η Σ_{s≤t} e/√(s‖e‖² + δ).
        let (n, eta, delta) = (64, 0.02, 1.0);
        let e = adagrad_case1_direction(n);
        let mut a = AdaGrad::new(n, eta, delta).unwrap();
        let mut acc = 0.0;
        let mut prev_first = a.predict()[0];
        for s in 1..=8 {
            a.update(&e).unwrap();
            acc += 1.0 / (s as f64 * e.norm_squared() + delta).sqrt();
            let want = Vector::from_element(n, 1.0 / n as f64) - &e * (eta * acc);
            assert!((a.predict().as_vector() - want).amax() < 1e-12);
            // The first expert is the one with negative loss, so it gains mass.
            assert!(a.predict()[0] > prev_first);
            prev_first = a.predict()[0];
        }
    }

    #[test]
    fn alternating_loss_zigzags_between_halves() {
        let (n, eta, delta) = (64, 1.0, 0.5);
        let stream = gen_adagrad_case2(n, 10).unwrap();
        let mut a = AdaGrad::new(n, eta, delta).unwrap();
        let top = Vector::from_fn(n, |i, _| if i < n / 2 { 2.0 / n as f64 } else { 0.0 });
        let bottom = Vector::from_fn(n, |i, _| if i < n / 2 { 0.0 } else { 2.0 / n as f64 });
        for (t, l) in stream.losses.columns().iter().enumerate() {
            a.update(l).unwrap();
            // After round t the learner holds x_{t+1}.
            let next = t + 2;
            let want = if next % 2 == 0 { &bottom } else { &top };
            assert!((a.predict().as_vector() - want).amax() < 1e-9, "x_{next}");
        }
    }

    #[test]
    fn case_conditions() {
        let c = adagrad_case_conditions(0.01, 1.0, 4096, 10);
        assert_eq!(c, vec![AdaGradCase::SlowUpdates]);
        let c = adagrad_case_conditions(1.0, 1.0, 4096, 10);
        assert_eq!(c, vec![AdaGradCase::Oscillation]);
    }
}
