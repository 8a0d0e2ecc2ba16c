//! Loss-sequence generators.
//!
//! All generators are oblivious: the whole stream is a pure function of the
//! configuration and seed. Randomness comes from [`crate::rng`] sub-streams,
//! one per ingredient (expert embedding, per-round coefficients, noise), so a
//! generator that varies only `N` reuses the same per-round coefficients.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, Matrix, SymMatrix, Vector};
use crate::rng;

/// Hindsight loss matrix, one column per round.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    n: usize,
    columns: Vec<Vector>,
}

/// Slack on the `[-1, 1]` entry bound.
pub const ENTRY_TOL: f64 = 1e-12;

impl LossMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            columns: Vec::new(),
        }
    }

    pub fn from_columns(n: usize, columns: Vec<Vector>) -> Result<Self> {
        let mut m = Self::new(n);
        for c in columns {
            m.push(c)?;
        }
        Ok(m)
    }

    pub fn push(&mut self, loss: Vector) -> Result<()> {
        if loss.len() != self.n {
            return Err(Error::contract(format!(
                "loss of length {} for {} experts",
                loss.len(),
                self.n
            )));
        }
        if loss.iter().any(|v| !v.is_finite() || v.abs() > 1.0 + ENTRY_TOL) {
            return Err(Error::contract(format!(
                "loss entries must lie in [-1, 1] (round {})",
                self.columns.len() + 1
            )));
        }
        self.columns.push(loss);
        Ok(())
    }

    pub fn experts(&self) -> usize {
        self.n
    }

    pub fn rounds(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vector] {
        &self.columns
    }

    pub fn column(&self, t: usize) -> &Vector {
        &self.columns[t]
    }

    /// Dense `N×T` matrix.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n, self.rounds(), |i, t| self.columns[t][i])
    }

    /// Cumulative loss of every expert.
    pub fn expert_totals(&self) -> Vector {
        self.columns
            .iter()
            .fold(Vector::zeros(self.n), |acc, c| acc + c)
    }

    /// First `t` rounds.
    pub fn prefix(&self, t: usize) -> LossMatrix {
        LossMatrix {
            n: self.n,
            columns: self.columns[..t].to_vec(),
        }
    }
}

/// Default relative singular-value cutoff of [`numeric_rank`].
pub const RANK_TOL: f64 = 1e-8;

/// Number of singular values above `tol·σ_max`.
///
/// The eigenvectors of the smaller Gram matrix are computed with the Jacobi
/// solver, and each singular value is then measured directly as `‖L v‖` (or
/// `‖Lᵀ v‖`), which keeps zero singular values at rounding level instead of
/// the `√ε` floor that square-rooting Gram eigenvalues would leave.
pub fn numeric_rank(l: &Matrix, tol: f64) -> Result<usize> {
    let (n, t) = l.shape();
    if n == 0 || t == 0 {
        return Ok(0);
    }
    let (gram, apply): (SymMatrix, Box<dyn Fn(&Vector) -> f64>) = if t <= n {
        (
            SymMatrix::gram_cols(l),
            Box::new(|v: &Vector| (l * v).norm()),
        )
    } else {
        (
            SymMatrix::gram_rows(l),
            Box::new(|v: &Vector| (l.transpose() * v).norm()),
        )
    };
    let eig = sym_eig(&gram)?;
    let sigmas: Vec<f64> = eig
        .vectors
        .column_iter()
        .map(|c| apply(&c.into_owned()))
        .collect();
    let smax = sigmas.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sigmas.iter().filter(|&&s| s > tol * smax).count())
}

/// A generated loss sequence together with what is known about its rank.
#[derive(Debug, Clone)]
pub struct LossStream {
    pub losses: LossMatrix,
    /// Exact rank for the exact kinds, a bound on `rank_ε` for the approximate
    /// kind.
    pub rank_certificate: usize,
    /// Expert embedding `U` (`N×d`) when the losses are `U v_t` (up to the
    /// noise of the approximate kind).
    pub embedding: Option<Matrix>,
}

impl LossStream {
    pub fn experts(&self) -> usize {
        self.losses.experts()
    }

    pub fn rounds(&self) -> usize {
        self.losses.rounds()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdversaryKind {
    StochasticLowRank,
    ApproxLowRank,
    Hypercube,
    AdagradCase1,
    AdagradCase2,
}

impl AdversaryKind {
    pub const ALL: [AdversaryKind; 5] = [
        AdversaryKind::StochasticLowRank,
        AdversaryKind::ApproxLowRank,
        AdversaryKind::Hypercube,
        AdversaryKind::AdagradCase1,
        AdversaryKind::AdagradCase2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdversaryKind::StochasticLowRank => "stochastic_lowrank",
            AdversaryKind::ApproxLowRank => "approx_lowrank",
            AdversaryKind::Hypercube => "hypercube",
            AdversaryKind::AdagradCase1 => "adagrad_case1",
            AdversaryKind::AdagradCase2 => "adagrad_case2",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryConfig {
    pub kind: AdversaryKind,
    pub n: usize,
    pub d: usize,
    pub t: usize,
    /// Noise level, used by [`AdversaryKind::ApproxLowRank`] only.
    pub eps: f64,
    pub seed: u64,
}

impl AdversaryConfig {
    pub fn validate(&self) -> Result<()> {
        let AdversaryConfig { kind, n, d, t, eps, .. } = *self;
        if t == 0 || n == 0 {
            return Err(Error::contract("N and T must be positive"));
        }
        match kind {
            AdversaryKind::StochasticLowRank | AdversaryKind::ApproxLowRank => {
                if d == 0 || d > n.min(t) {
                    return Err(Error::contract(format!(
                        "rank d={d} must satisfy 1 ≤ d ≤ min(N, T) = {}",
                        n.min(t)
                    )));
                }
                if kind == AdversaryKind::ApproxLowRank && !(0.0..1.0).contains(&eps) {
                    return Err(Error::contract(format!("eps must lie in [0, 1), got {eps}")));
                }
            }
            AdversaryKind::Hypercube => {
                if d == 0 || d >= usize::BITS as usize || n != 1 << d {
                    return Err(Error::contract(format!(
                        "hypercube requires N = 2^d, got N={n}, d={d}"
                    )));
                }
                if t < d {
                    return Err(Error::contract(format!("hypercube requires T ≥ d, got T={t}, d={d}")));
                }
            }
            AdversaryKind::AdagradCase1 => {
                if n < 2 {
                    return Err(Error::contract("adagrad_case1 requires N ≥ 2"));
                }
            }
            AdversaryKind::AdagradCase2 => {
                if n % 2 != 0 {
                    return Err(Error::contract(format!("adagrad_case2 requires even N, got {n}")));
                }
            }
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<LossStream> {
        self.validate()?;
        match self.kind {
            AdversaryKind::StochasticLowRank => gen_stochastic_lowrank(self.n, self.d, self.t, self.seed),
            AdversaryKind::ApproxLowRank => gen_approx_lowrank(self.n, self.d, self.t, self.eps, self.seed),
            AdversaryKind::Hypercube => gen_hypercube(self.d, self.t, self.seed),
            AdversaryKind::AdagradCase1 => gen_adagrad_case1(self.n, self.t),
            AdversaryKind::AdagradCase2 => gen_adagrad_case2(self.n, self.t),
        }
    }
}

fn clamp_unit(v: Vector) -> Vector {
    v.map(|x| x.clamp(-1.0, 1.0))
}

/// Expert embeddings `u_i` uniform on the unit sphere (sub-stream 0), round
/// coefficients `v_t` uniform in the unit ball (sub-stream 1), `ℓ_t = U v_t`.
pub fn gen_stochastic_lowrank(n: usize, d: usize, t: usize, seed: u64) -> Result<LossStream> {
    AdversaryConfig {
        kind: AdversaryKind::StochasticLowRank,
        n,
        d,
        t,
        eps: 0.0,
        seed,
    }
    .validate()?;
    let mut urng = rng::substream(seed, 0);
    let mut vrng = rng::substream(seed, 1);
    let rows: Vec<Vector> = (0..n).map(|_| rng::unit_sphere(&mut urng, d)).collect();
    let u = Matrix::from_fn(n, d, |i, j| rows[i][j]);
    let mut losses = LossMatrix::new(n);
    for _ in 0..t {
        let v = rng::unit_ball(&mut vrng, d);
        losses.push(clamp_unit(&u * v))?;
    }
    Ok(LossStream {
        losses,
        rank_certificate: d,
        embedding: Some(u),
    })
}

/// `(1 − eps)·L_lowrank + E` with `E` i.i.d. uniform in `(−eps, eps)`
/// (sub-stream 2), clamped to `[-1, 1]`. Certifies `rank_eps(L) ≤ d`.
pub fn gen_approx_lowrank(n: usize, d: usize, t: usize, eps: f64, seed: u64) -> Result<LossStream> {
    AdversaryConfig {
        kind: AdversaryKind::ApproxLowRank,
        n,
        d,
        t,
        eps,
        seed,
    }
    .validate()?;
    let base = gen_stochastic_lowrank(n, d, t, seed)?;
    if eps == 0.0 {
        return Ok(base);
    }
    let mut nrng = rng::substream(seed, 2);
    let noise = Uniform::new(-eps, eps).expect("eps > 0");
    let mut losses = LossMatrix::new(n);
    for col in base.losses.columns() {
        let noisy = col.map(|x| (1.0 - eps) * x) + Vector::from_fn(n, |_, _| noise.sample(&mut nrng));
        losses.push(clamp_unit(noisy))?;
    }
    Ok(LossStream {
        losses,
        rank_certificate: d,
        embedding: base.embedding.map(|u| u * (1.0 - eps)),
    })
}

/// Sign of coordinate `j` of hypercube vertex `i`: bit `j` of `i` set → −1.
pub fn hypercube_vertex(i: usize, j: usize) -> f64 {
    if (i >> j) & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Experts are the `2^d` hypercube vertices; round `t` (1-based) reveals
/// coordinate `(t − 1) mod d` with a Rademacher sign (sub-stream 0):
/// `ℓ_t = U(ȳ_t e_j)`.
pub fn gen_hypercube(d: usize, t: usize, seed: u64) -> Result<LossStream> {
    let n = if d < usize::BITS as usize { 1usize << d } else { 0 };
    AdversaryConfig {
        kind: AdversaryKind::Hypercube,
        n,
        d,
        t,
        eps: 0.0,
        seed,
    }
    .validate()?;
    let u = Matrix::from_fn(n, d, hypercube_vertex);
    let mut srng = rng::substream(seed, 0);
    let mut losses = LossMatrix::new(n);
    for round in 0..t {
        let j = round % d;
        let sign = if srng.random::<bool>() { 1.0 } else { -1.0 };
        losses.push(u.column(j).into_owned() * sign)?;
    }
    Ok(LossStream {
        losses,
        rank_certificate: d,
        embedding: Some(u),
    })
}

/// The constant loss `e = (−1, 1/(N−1), …, 1/(N−1))`.
pub fn adagrad_case1_direction(n: usize) -> Vector {
    Vector::from_fn(n, |i, _| if i == 0 { -1.0 } else { 1.0 / (n - 1) as f64 })
}

/// `e = (+1 on the first N/2 experts, −1 on the rest)`.
pub fn adagrad_case2_direction(n: usize) -> Vector {
    Vector::from_fn(n, |i, _| if i < n / 2 { 1.0 } else { -1.0 })
}

pub fn gen_adagrad_case1(n: usize, t: usize) -> Result<LossStream> {
    AdversaryConfig {
        kind: AdversaryKind::AdagradCase1,
        n,
        d: 1,
        t,
        eps: 0.0,
        seed: 0,
    }
    .validate()?;
    let e = adagrad_case1_direction(n);
    let losses = LossMatrix::from_columns(n, vec![e.clone(); t])?;
    Ok(LossStream {
        losses,
        rank_certificate: 1,
        embedding: Some(Matrix::from_column_slice(n, 1, e.as_slice())),
    })
}

/// `ℓ_t = (−1)^{t+1} e`, starting with `+e` at round 1.
pub fn gen_adagrad_case2(n: usize, t: usize) -> Result<LossStream> {
    AdversaryConfig {
        kind: AdversaryKind::AdagradCase2,
        n,
        d: 1,
        t,
        eps: 0.0,
        seed: 0,
    }
    .validate()?;
    let e = adagrad_case2_direction(n);
    let columns = (0..t)
        .map(|round| if round % 2 == 0 { e.clone() } else { -e.clone() })
        .collect();
    Ok(LossStream {
        losses: LossMatrix::from_columns(n, columns)?,
        rank_certificate: 1,
        embedding: Some(Matrix::from_column_slice(n, 1, e.as_slice())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn in_bounds(s: &LossStream) -> bool {
        s.losses
            .columns()
            .iter()
            .all(|c| c.iter().all(|v| v.abs() <= 1.0 + ENTRY_TOL))
    }

    #[test]
    fn numeric_rank_cases() {
        assert_eq!(numeric_rank(&Matrix::zeros(4, 3), RANK_TOL).unwrap(), 0);
        let u = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let w = Vector::from_vec(vec![0.3, 1.0, 4.0, -1.0]);
        assert_eq!(numeric_rank(&(&u * w.transpose()), RANK_TOL).unwrap(), 1);
        let mut r = rng::seeded(1);
        let a = Matrix::from_fn(9, 3, |_, _| r.random_range(-1.0..1.0));
        let b = Matrix::from_fn(3, 14, |_, _| r.random_range(-1.0..1.0));
        assert_eq!(numeric_rank(&(&a * &b), RANK_TOL).unwrap(), 3);
        assert_eq!(numeric_rank(&(&a * &b).transpose(), RANK_TOL).unwrap(), 3);
    }

    #[test]
    fn stochastic_lowrank_bounds_rank_and_determinism() {
        let s = gen_stochastic_lowrank(50, 3, 100, 7).unwrap();
        assert!(in_bounds(&s));
        assert_eq!(numeric_rank(&s.losses.to_matrix(), RANK_TOL).unwrap(), 3);
        let again = gen_stochastic_lowrank(50, 3, 100, 7).unwrap();
        assert_eq!(s.losses, again.losses);
        let other = gen_stochastic_lowrank(50, 3, 100, 8).unwrap();
        assert_ne!(s.losses, other.losses);
    }

    #[test]
    fn stochastic_rows_are_unit_and_rounds_shared_across_n() {
        let small = gen_stochastic_lowrank(10, 3, 20, 3).unwrap();
        let large = gen_stochastic_lowrank(40, 3, 20, 3).unwrap();
        let us = small.embedding.unwrap();
        let ul = large.embedding.unwrap();
        for i in 0..10 {
            assert!((us.row(i).norm() - 1.0).abs() < 1e-12);
            // Same seed → same embedding prefix and the same per-round coefficients.
            assert_eq!(us.row(i), ul.row(i));
        }
        for t in 0..20 {
            assert_eq!(small.losses.column(t).as_slice(), &large.losses.column(t).as_slice()[..10]);
        }
    }

    #[test]
    fn approx_lowrank_certificate_holds() {
        let exact = gen_stochastic_lowrank(30, 3, 60, 5).unwrap();
        let zero = gen_approx_lowrank(30, 3, 60, 0.0, 5).unwrap();
        assert_eq!(exact.losses, zero.losses);

        let eps = 0.1;
        let noisy = gen_approx_lowrank(30, 3, 60, eps, 5).unwrap();
        assert!(in_bounds(&noisy));
        assert_eq!(noisy.rank_certificate, 3);
        for (a, b) in noisy.losses.columns().iter().zip(exact.losses.columns()) {
            assert!((a - b * (1.0 - eps)).amax() < eps);
        }
        assert_eq!(numeric_rank(&noisy.losses.to_matrix(), RANK_TOL).unwrap(), 30);
    }

    #[test]
    fn hypercube_structure() {
        let s = gen_hypercube(1, 10, 3).unwrap();
        assert_eq!(s.experts(), 2);
        for c in s.losses.columns() {
            assert_eq!(c[0], -c[1]);
            assert_eq!(c[0].abs(), 1.0);
        }
        let s = gen_hypercube(4, 64, 11).unwrap();
        assert!(s.losses.columns().iter().all(|c| c.iter().all(|v| v.abs() == 1.0)));
        assert_eq!(numeric_rank(&s.losses.to_matrix(), RANK_TOL).unwrap(), 4);
    }

    #[test]
    fn hypercube_visits_coordinates_evenly() {
        let (d, t) = (3, 10);
        let s = gen_hypercube(d, t, 2).unwrap();
        let u = s.embedding.as_ref().unwrap();
        let mut visits = vec![0; d];
        for c in s.losses.columns() {
            let j = (0..d)
                .find(|&j| (u.column(j) - c).amax() == 0.0 || (u.column(j) + c).amax() == 0.0)
                .unwrap();
            visits[j] += 1;
        }
        for v in visits {
            assert!(v == t / d || v == t.div_ceil(d));
        }
    }

    #[test]
    fn adagrad_cases() {
        let s = gen_adagrad_case1(5, 4).unwrap();
        assert!(s.losses.columns().iter().all(|c| c == s.losses.column(0)));
        assert_eq!(s.losses.column(0)[0], -1.0);
        assert_eq!(s.losses.column(0)[1], 0.25);
        assert_eq!(numeric_rank(&s.losses.to_matrix(), RANK_TOL).unwrap(), 1);

        let s = gen_adagrad_case2(6, 5).unwrap();
        for t in 1..5 {
            assert_eq!(s.losses.column(t), &-s.losses.column(t - 1));
        }
        assert_eq!(s.losses.column(0)[0], 1.0);
        assert_eq!(numeric_rank(&s.losses.to_matrix(), RANK_TOL).unwrap(), 1);
        let best = s.losses.expert_totals().min();
        assert!([-1.0, 0.0, 1.0].contains(&best));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(gen_stochastic_lowrank(5, 6, 10, 0).is_err());
        assert!(gen_approx_lowrank(5, 2, 10, 1.0, 0).is_err());
        assert!(gen_hypercube(3, 2, 0).is_err());
        assert!(gen_adagrad_case1(1, 3).is_err());
        assert!(gen_adagrad_case2(5, 3).is_err());
        let cfg = AdversaryConfig {
            kind: AdversaryKind::Hypercube,
            n: 10,
            d: 3,
            t: 10,
            eps: 0.0,
            seed: 0,
        };
        assert!(cfg.generate().is_err());
    }
}
