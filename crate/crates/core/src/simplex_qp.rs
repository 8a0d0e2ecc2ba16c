//! Quadratic minimization over the probability simplex.
//!
//! Every update in this crate reduces to a projection in a quadratic norm,
//! `argmin_{x∈Δ} ½‖x − z‖²_H`:
//!
//! * the mirror-descent step `argmin ℓ·x + η⁻¹‖x − x_t‖²_H` has
//!   `z = x_t − (η/2)H⁻¹ℓ`;
//! * the AdaGrad projection is the case `z = y`, `H = G`.
//!
//! Two solvers implement it. Dense matrices use a primal active-set method
//! started from the Euclidean projection's support. Identity-plus-low-rank
//! metrics `cI + FFᵀ` use semismooth Newton on the `r`-dimensional dual, where
//! each dual evaluation is a Euclidean simplex projection. Both fall back to
//! projected gradient with backtracking.

use crate::error::{Error, Result};
use crate::linalg::{IdentityPlusLowRank, Matrix, SymMatrix, Vector};

/// KKT tolerance every returned point must meet.
pub const KKT_TOL: f64 = 1e-8;

const PG_MAX_ITERATIONS: usize = 100_000;

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector(Vector);

impl DecisionVector {
    /// Validates `x ≥ −1e-12` and `Σx = 1 ± 1e-9`, then clamps the small
    /// negatives to zero.
    pub fn new(x: Vector) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::contract("decision vector must be non-empty"));
        }
        if x.iter().any(|v| !v.is_finite() || *v < -1e-12) {
            return Err(Error::contract("decision vector has negative or non-finite entries"));
        }
        if (x.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::contract(format!(
                "decision vector sums to {}, not 1",
                x.sum()
            )));
        }
        Ok(Self(x.map(|v| v.max(0.0))))
    }

    /// Clamps solver output onto the simplex: negatives to zero, then
    /// renormalize.
    fn from_solver(x: Vector) -> Self {
        let mut x = x.map(|v| v.max(0.0));
        let s = x.sum();
        x /= s;
        Self(x)
    }

    pub fn uniform(n: usize) -> Self {
        Self(Vector::from_element(n, 1.0 / n as f64))
    }

    pub fn vertex(n: usize, j: usize) -> Self {
        let mut x = Vector::zeros(n);
        x[j] = 1.0;
        Self(x)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn into_vector(self) -> Vector {
        self.0
    }

    /// Expected loss `x·ℓ`.
    pub fn loss(&self, l: &Vector) -> f64 {
        self.0.dot(l)
    }
}

impl std::ops::Index<usize> for DecisionVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Sort-and-threshold Euclidean projection onto the simplex.
pub fn euclidean_simplex_projection(y: &Vector) -> DecisionVector {
    DecisionVector::from_solver(project_euclidean_raw(y))
}

fn project_euclidean_raw(y: &Vector) -> Vector {
    let mut sorted: Vec<f64> = y.iter().copied().collect();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (i + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    y.map(|v| (v - theta).max(0.0))
}

/// Natural KKT residual `‖x − Π_Δ(x − g)‖∞` for a simplex point `x` and the
/// objective gradient `g` at `x`. Zero exactly at the constrained minimizer.
pub fn kkt_residual(x: &Vector, gradient: &Vector) -> f64 {
    let step = project_euclidean_raw(&(x - gradient));
    (x - step).amax()
}

/// Explicit KKT breakdown for `argmin ½‖x − z‖²_H` with multiplier `θ` on
/// `Σx = 1` and `λ ≥ 0` on `x ≥ 0`, i.e. `H(x − z) = θ𝟏 + λ`.
#[derive(Debug, Clone, Copy)]
pub struct KktReport {
    pub primal_infeasibility: f64,
    /// Most negative `λ_i`.
    pub dual_infeasibility: f64,
    /// Spread of the gradient over the support, `max |g_i − θ|` on `x_i > 0`.
    pub stationarity: f64,
    /// `max_i x_i·λ_i`.
    pub complementarity: f64,
}

impl KktReport {
    pub fn worst(&self) -> f64 {
        self.primal_infeasibility
            .max(self.dual_infeasibility)
            .max(self.stationarity)
            .max(self.complementarity)
    }
}

/// KKT breakdown with `θ` taken as the gradient minimum.
pub fn kkt_report(x: &Vector, gradient: &Vector, support_tol: f64) -> KktReport {
    let theta = gradient.min();
    let primal_infeasibility = x
        .iter()
        .map(|v| (-v).max(0.0))
        .fold((x.sum() - 1.0).abs(), f64::max);
    let mut stationarity: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    for (xi, gi) in x.iter().zip(gradient.iter()) {
        let lambda = gi - theta;
        if *xi > support_tol {
            stationarity = stationarity.max(lambda.abs());
        }
        complementarity = complementarity.max(xi.max(0.0) * lambda);
    }
    KktReport {
        primal_infeasibility,
        // λ_i = g_i − min g is non-negative by construction.
        dual_infeasibility: 0.0,
        stationarity,
        complementarity,
    }
}

/// A positive definite metric that knows how to project onto the simplex in
/// its own norm.
pub trait SimplexMetric {
    fn dim(&self) -> usize;
    fn apply(&self, x: &Vector) -> Vector;
    fn solve(&self, b: &Vector) -> Result<Vector>;
    /// `argmin_{x∈Δ} ½‖x − z‖²_H`.
    fn project(&self, z: &Vector) -> Result<DecisionVector>;
}

impl SimplexMetric for SymMatrix {
    fn dim(&self) -> usize {
        SymMatrix::dim(self)
    }

    fn apply(&self, x: &Vector) -> Vector {
        self.as_matrix() * x
    }

    fn solve(&self, b: &Vector) -> Result<Vector> {
        let chol = self
            .cholesky()
            .ok_or_else(|| Error::contract("metric is not positive definite"))?;
        Ok(chol.solve(b))
    }

    fn project(&self, z: &Vector) -> Result<DecisionVector> {
        active_set_projection(self, z)
    }
}

impl SimplexMetric for IdentityPlusLowRank {
    fn dim(&self) -> usize {
        IdentityPlusLowRank::dim(self)
    }

    fn apply(&self, x: &Vector) -> Vector {
        IdentityPlusLowRank::apply(self, x)
    }

    fn solve(&self, b: &Vector) -> Result<Vector> {
        Ok(IdentityPlusLowRank::solve(self, b))
    }

    fn project(&self, z: &Vector) -> Result<DecisionVector> {
        dual_newton_projection(self, z)
    }
}

fn check_dims(h: &impl SimplexMetric, v: &Vector, what: &str) -> Result<()> {
    if h.dim() != v.len() {
        return Err(Error::contract(format!(
            "{what} has length {} but the metric has dimension {}",
            v.len(),
            h.dim()
        )));
    }
    if v.iter().any(|e| !e.is_finite()) {
        return Err(Error::contract(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Mirror-descent step `argmin_{x∈Δ} ℓ·x + η⁻¹‖x − x_t‖²_H`.
pub fn omd_step<H: SimplexMetric>(
    h: &H,
    eta: f64,
    x_t: &DecisionVector,
    loss: &Vector,
) -> Result<DecisionVector> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::contract(format!(
            "step size must be positive and finite, got {eta}"
        )));
    }
    check_dims(h, x_t.as_vector(), "current decision")?;
    check_dims(h, loss, "loss vector")?;
    if loss.iter().all(|&v| v == 0.0) {
        return Ok(x_t.clone());
    }
    let z = x_t.as_vector() - h.solve(loss)? * (0.5 * eta);
    h.project(&z)
}

/// `argmin_{x∈Δ} ‖y − x‖²_G`.
pub fn mahalanobis_simplex_projection<H: SimplexMetric>(g: &H, y: &Vector) -> Result<DecisionVector> {
    check_dims(g, y, "point")?;
    g.project(y)
}

/// Objective `ℓ·x + η⁻¹‖x − x_t‖²_H` of the mirror-descent step.
pub fn omd_objective<H: SimplexMetric>(h: &H, eta: f64, x_t: &DecisionVector, loss: &Vector, x: &Vector) -> f64 {
    let d = x - x_t.as_vector();
    loss.dot(x) + d.dot(&h.apply(&d)) / eta
}

/// KKT residual of a candidate for `argmin ½‖x − z‖²_H`.
pub fn projection_residual<H: SimplexMetric>(h: &H, z: &Vector, x: &Vector) -> f64 {
    kkt_residual(x, &h.apply(&(x - z)))
}

fn primal_objective<H: SimplexMetric>(h: &H, z: &Vector, x: &Vector) -> f64 {
    let d = x - z;
    0.5 * d.dot(&h.apply(&d))
}

fn finish<H: SimplexMetric>(h: &H, z: &Vector, x: Vector) -> Result<DecisionVector> {
    let residual = projection_residual(h, z, &x);
    if residual <= KKT_TOL {
        return Ok(DecisionVector::from_solver(x));
    }
    let x = projected_gradient(h, z, x)?;
    Ok(DecisionVector::from_solver(x))
}

/// Primal active-set method on the faces of the simplex.
fn active_set_projection(h: &SymMatrix, z: &Vector) -> Result<DecisionVector> {
    let n = h.dim();
    let hz = h.as_matrix() * z;
    let mut x = project_euclidean_raw(z);
    let mut free: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
    let max_pivots = 10 * n;

    for _ in 0..=max_pivots {
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let m = idx.len();
        let sub = Matrix::from_fn(m, m, |a, b| h.as_matrix()[(idx[a], idx[b])]);
        let chol = match nalgebra::Cholesky::new(sub) {
            Some(c) => c,
            None => break,
        };
        let a = chol.solve(&Vector::from_fn(m, |k, _| hz[idx[k]]));
        let b = chol.solve(&Vector::from_element(m, 1.0));
        let theta = (1.0 - a.sum()) / b.sum();
        let face = &a + &b * theta;

        if face.iter().all(|&v| v >= 0.0) {
            x.fill(0.0);
            for (k, &i) in idx.iter().enumerate() {
                x[i] = face[k];
            }
            let g = h.as_matrix() * (&x - z);
            let scale = 1.0 + g.amax();
            let mut worst: Option<(usize, f64)> = None;
            for i in (0..n).filter(|&i| !free[i]) {
                let mu = g[i] - theta;
                if mu < -1e-13 * scale && worst.is_none_or(|(_, w)| mu < w) {
                    worst = Some((i, mu));
                }
            }
            match worst {
                None => return finish(h, z, x),
                Some((i, _)) => free[i] = true,
            }
        } else {
            // Move towards the face minimizer until a coordinate hits zero.
            let mut alpha = 1.0;
            let mut blocking = None;
            for (k, &i) in idx.iter().enumerate() {
                if face[k] < x[i] {
                    let ratio = x[i] / (x[i] - face[k]);
                    if ratio < alpha {
                        alpha = ratio;
                        blocking = Some(i);
                    }
                }
            }
            for (k, &i) in idx.iter().enumerate() {
                x[i] += alpha * (face[k] - x[i]);
            }
            if let Some(i) = blocking {
                x[i] = 0.0;
                free[i] = false;
            }
            for &i in &idx {
                if x[i] < 0.0 {
                    x[i] = 0.0;
                }
            }
        }
    }
    finish(h, z, x)
}

/// Semismooth Newton on the dual of `argmin ½‖x − z‖² + ½‖F̃ᵀ(x − z)‖²`,
/// `F̃ = F/√c`, which is the projection in `cI + FFᵀ` rescaled by `1/c`.
fn dual_newton_projection(h: &IdentityPlusLowRank, z: &Vector) -> Result<DecisionVector> {
    let r = h.rank();
    if r == 0 {
        return Ok(euclidean_simplex_projection(z));
    }
    let f = h.factor() / h.scale().sqrt();
    let ft = f.transpose();

    // x(λ) = Π(z − F̃λ); D(λ) = ½‖x − z‖² + λᵀF̃ᵀ(x − z) − ½‖λ‖².
    let eval = |lambda: &Vector| {
        let x = project_euclidean_raw(&(z - &f * lambda));
        let w = &ft * (&x - z);
        let diff = &x - z;
        let value = 0.5 * diff.norm_squared() + lambda.dot(&w) - 0.5 * lambda.norm_squared();
        let grad = w - lambda;
        (x, value, grad)
    };

    let mut lambda = {
        let x0 = project_euclidean_raw(z);
        &ft * (x0 - z)
    };
    let (mut x, mut value, mut grad) = eval(&lambda);
    for _ in 0..100 {
        let gnorm = grad.amax();
        if gnorm <= 1e-15 * (1.0 + lambda.amax()) {
            break;
        }
        // Generalized Hessian −(I + F̃_Sᵀ(I − 𝟏𝟏ᵀ/|S|)F̃_S) over the support S.
        let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
        let s = support.len() as f64;
        let mut fs_sum = Vector::zeros(r);
        let mut gram = Matrix::identity(r, r);
        for &i in &support {
            let row = f.row(i);
            fs_sum += row.transpose();
            gram.ger(1.0, &row.transpose(), &row.transpose(), 1.0);
        }
        gram.ger(-1.0 / s, &fs_sum, &fs_sum, 1.0);
        let step = match nalgebra::Cholesky::new(SymMatrix::symmetrized(gram).into_matrix()) {
            Some(c) => c.solve(&grad),
            None => grad.clone(),
        };
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &lambda + &step * t;
            let (cx, cv, cg) = eval(&candidate);
            if cv >= value + 1e-4 * t * slope || cg.amax() < grad.amax() * 0.5 {
                lambda = candidate;
                x = cx;
                value = cv;
                grad = cg;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    finish(h, z, x)
}

/// Projected gradient with backtracking, the fallback of both solvers.
fn projected_gradient<H: SimplexMetric>(h: &H, z: &Vector, start: Vector) -> Result<Vector> {
    let mut x = project_euclidean_raw(&start);
    let mut f = primal_objective(h, z, &x);
    let mut step = 1.0;
    let mut residual = f64::INFINITY;
    for _ in 0..PG_MAX_ITERATIONS {
        let g = h.apply(&(&x - z));
        residual = kkt_residual(&x, &g);
        if residual <= KKT_TOL {
            return Ok(x);
        }
        loop {
            let cand = project_euclidean_raw(&(&x - &g * step));
            let d = &cand - &x;
            let fc = primal_objective(h, z, &cand);
            if fc <= f + g.dot(&d) + d.norm_squared() / (2.0 * step) || step < 1e-20 {
                x = cand;
                f = fc;
                break;
            }
            step *= 0.5;
        }
        step *= 2.0;
    }
    Err(Error::NoConvergence {
        what: "simplex projected gradient",
        iterations: PG_MAX_ITERATIONS,
        residual,
    })
}
