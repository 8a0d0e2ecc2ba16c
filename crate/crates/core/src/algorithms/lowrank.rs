//! The low-rank experts learner: mirror descent whose quadratic regularizer is
//! rebuilt from an ellipsoidal approximation of the feasible loss set every
//! time a loss leaves the span of the previous ones.
//!
//! State per epoch: `B` holds the first loss seen in each new direction
//! (columns, `N×k`), `M` is the approximate MVEE of `{w ∈ R^k : ‖Bw‖∞ ≤ 1}`,
//! and `H = I_N + B M Bᵀ`. The epoch clock `τ` restarts at each new direction
//! and the step size is `η = 4√(k/τ)`.

use rand_distr::{Distribution, Exp1};

use super::{check_loss, Learner};
use crate::error::{Error, Result};
use crate::geometry::{enclosing_ellipsoid, Ellipsoid, SlabPolytope};
use crate::linalg::{sqrt_psd, IdentityPlusLowRank, Matrix, OrthoBasis, Vector};
use crate::rng::{self, StreamRng};
use crate::simplex_qp::{omd_step, DecisionVector};

/// A loss is a new direction when its residual against the current span
/// exceeds `DEFAULT_SPAN_TOL·max(1, ‖ℓ‖₂)`.
pub const DEFAULT_SPAN_TOL: f64 = 1e-7;

/// Ellipsoid accuracy used when rebuilding `H`; `1` gives the `√(2k)` factor.
pub const DEFAULT_MVEE_EPS: f64 = 1.0;

/// `(M, I + B M Bᵀ)` for the slab polytope `{w : ‖Bw‖∞ ≤ 1}`, with the
/// regularizer kept as `I + FFᵀ`, `F = B M^{1/2}`.
pub fn lowrank_regularizer(b: &Matrix, mvee_eps: f64) -> Result<(Ellipsoid, IdentityPlusLowRank)> {
    let polytope = SlabPolytope::new(b.clone())?;
    let m = enclosing_ellipsoid(&polytope, mvee_eps)?;
    let root = sqrt_psd(m.shape())?;
    let factor = b * root.as_matrix();
    let h = IdentityPlusLowRank::new(1.0, factor)?;
    Ok((m, h))
}

/// Norm measurements for one epoch, collected when diagnostics are enabled.
#[derive(Debug, Clone)]
pub struct EpochDiagnostics {
    /// Round at which the epoch's regularizer was built.
    pub start_round: usize,
    pub k: usize,
    /// Largest `(‖ℓ_t‖*_H)²` over the epoch's losses.
    pub max_dual_norm_sq: f64,
    /// Largest `‖x‖²_H` over uniformly sampled simplex points.
    pub max_sampled_norm_sq: f64,
    /// Largest `‖e_i‖²_H`, the exact maximum over the simplex.
    pub max_vertex_norm_sq: f64,
    pub samples: usize,
}

#[derive(Debug, Clone)]
struct Diagnostics {
    samples: usize,
    rng: StreamRng,
    epochs: Vec<EpochDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct LowRankExperts {
    n: usize,
    span_tol: f64,
    mvee_eps: f64,
    directions: Vec<Vector>,
    ortho: OrthoBasis,
    tau: usize,
    ellipsoid: Option<Ellipsoid>,
    h: IdentityPlusLowRank,
    x: DecisionVector,
    rounds: usize,
    last_eta: Option<f64>,
    rebuilds: usize,
    diagnostics: Option<Diagnostics>,
}

impl LowRankExperts {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_params(n, DEFAULT_SPAN_TOL, DEFAULT_MVEE_EPS)
    }

    pub fn with_params(n: usize, span_tol: f64, mvee_eps: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::contract("need at least one expert"));
        }
        if !(span_tol >= 0.0 && span_tol.is_finite()) {
            return Err(Error::contract(format!("invalid span tolerance {span_tol}")));
        }
        if !(mvee_eps > 0.0 && mvee_eps <= 1.0) {
            return Err(Error::contract(format!("MVEE eps must lie in (0, 1], got {mvee_eps}")));
        }
        Ok(Self {
            n,
            span_tol,
            mvee_eps,
            directions: Vec::new(),
            ortho: OrthoBasis::new(n),
            tau: 0,
            ellipsoid: None,
            h: IdentityPlusLowRank::identity(n),
            x: DecisionVector::uniform(n),
            rounds: 0,
            last_eta: None,
            rebuilds: 0,
            diagnostics: None,
        })
    }

    /// Records per-epoch norm measurements, sampling `samples` uniform simplex
    /// points per epoch from a stream seeded with `seed`.
    pub fn with_diagnostics(mut self, samples: usize, seed: u64) -> Self {
        self.diagnostics = Some(Diagnostics {
            samples,
            rng: rng::substream(seed, 0),
            epochs: Vec::new(),
        });
        self
    }

    pub fn k(&self) -> usize {
        self.directions.len()
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn last_eta(&self) -> Option<f64> {
        self.last_eta
    }

    /// How many times `H` has been rebuilt.
    pub fn rebuilds(&self) -> usize {
        self.rebuilds
    }

    pub fn regularizer(&self) -> &IdentityPlusLowRank {
        &self.h
    }

    pub fn ellipsoid(&self) -> Option<&Ellipsoid> {
        self.ellipsoid.as_ref()
    }

    pub fn ortho(&self) -> &OrthoBasis {
        &self.ortho
    }

    /// `B`, the first loss of every direction as columns.
    pub fn basis(&self) -> Matrix {
        Matrix::from_fn(self.n, self.k(), |i, j| self.directions[j][i])
    }

    pub fn epoch_diagnostics(&self) -> &[EpochDiagnostics] {
        self.diagnostics.as_ref().map_or(&[], |d| &d.epochs)
    }

    fn rebuild(&mut self) -> Result<()> {
        let (m, h) = lowrank_regularizer(&self.basis(), self.mvee_eps)?;
        self.ellipsoid = Some(m);
        self.h = h;
        self.rebuilds += 1;
        if let Some(diag) = self.diagnostics.as_mut() {
            let h = &self.h;
            let max_vertex_norm_sq = (0..self.n)
                .map(|i| 1.0 + h.factor().row(i).norm_squared())
                .fold(f64::NEG_INFINITY, f64::max);
            let mut max_sampled_norm_sq = f64::NEG_INFINITY;
            for _ in 0..diag.samples {
                let x = uniform_simplex(&mut diag.rng, self.n);
                max_sampled_norm_sq = max_sampled_norm_sq.max(h.quad_form(&x));
            }
            diag.epochs.push(EpochDiagnostics {
                start_round: self.rounds + 1,
                k: self.directions.len(),
                max_dual_norm_sq: f64::NEG_INFINITY,
                max_sampled_norm_sq,
                max_vertex_norm_sq,
                samples: diag.samples,
            });
        }
        Ok(())
    }

    fn step(&mut self, loss: &Vector) -> Result<()> {
        let threshold = self.span_tol * loss.norm().max(1.0);
        if self.ortho.insert(loss, threshold)? {
            self.directions.push(loss.clone());
            self.tau = 0;
            self.rebuild()?;
        }
        if let Some(diag) = self.diagnostics.as_mut() {
            if let Some(epoch) = diag.epochs.last_mut() {
                let v = self.h.dual_norm(loss).powi(2);
                epoch.max_dual_norm_sq = epoch.max_dual_norm_sq.max(v);
            }
        }
        self.tau += 1;
        let k = self.k();
        if k == 0 {
            // No direction seen yet: the loss is below the noise floor.
            self.last_eta = None;
            return Ok(());
        }
        let eta = 4.0 * (k as f64 / self.tau as f64).sqrt();
        self.last_eta = Some(eta);
        self.x = omd_step(&self.h, eta, &self.x, loss)?;
        Ok(())
    }
}

fn uniform_simplex(rng: &mut StreamRng, n: usize) -> Vector {
    // Normalized i.i.d. exponentials are Dirichlet(1, …, 1).
    let x = Vector::from_fn(n, |_, _| -> f64 { Exp1.sample(rng) });
    let s = x.sum();
    x / s
}

impl Learner for LowRankExperts {
    fn name(&self) -> &str {
        "lowrank"
    }

    fn experts(&self) -> usize {
        self.n
    }

    fn predict(&self) -> &DecisionVector {
        &self.x
    }

    fn update(&mut self, loss: &Vector) -> Result<()> {
        check_loss(self.n, loss)?;
        self.rounds += 1;
        let round = self.rounds;
        self.step(loss).map_err(|e| e.at_round(round))
    }

    fn reset(&mut self, seed: u64) {
        let samples = self.diagnostics.as_ref().map(|d| d.samples);
        let fresh = Self::with_params(self.n, self.span_tol, self.mvee_eps).expect("validated");
        *self = match samples {
            Some(s) => fresh.with_diagnostics(s, seed),
            None => fresh,
        };
    }

    fn rounds(&self) -> usize {
        self.rounds
    }
}
