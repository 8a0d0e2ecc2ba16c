//! Zero-centered ellipsoids and approximate minimum-volume enclosing
//! ellipsoids of symmetric bodies.
//!
//! An ellipsoid is stored by its PSD shape matrix `M` and means
//! `E(M) = {x : xᵀM†x ≤ 1}`. For a slab polytope `P_A = {x : ‖Ax‖∞ ≤ 1}` the
//! enclosing ellipsoid is obtained through polarity: `P_A` is the polar of
//! `conv{±a_i}`, whose MVEE Khachiyan's iteration approximates directly.

use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::linalg::{pinv, sym_eig, Matrix, SymMatrix, Vector, PINV_TOL};
use crate::rng::{self, StreamRng};

/// Zero-centered ellipsoid `E(M)`.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    shape: SymMatrix,
    shape_pinv: SymMatrix,
}

impl Ellipsoid {
    /// Validates that `shape` is PSD, clamping eigenvalues in
    /// `[-1e-10·λ_max, 0)` to zero.
    pub fn new(shape: SymMatrix) -> Result<Self> {
        let eig = sym_eig(&shape)?;
        let lmax = eig.values.max().max(0.0);
        let lmin = eig.values.min();
        if lmin < -1e-10 * lmax {
            return Err(Error::contract(format!(
                "ellipsoid shape is not PSD (eigenvalue {lmin:e})"
            )));
        }
        let shape = if lmin < 0.0 {
            eig.reconstruct_with(|l| l.max(0.0))
        } else {
            shape
        };
        let shape_pinv = pinv(&shape, PINV_TOL)?;
        Ok(Self { shape, shape_pinv })
    }

    pub fn shape(&self) -> &SymMatrix {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    /// `xᵀM†x`; at most 1 exactly on the ellipsoid.
    pub fn gauge_sq(&self, x: &Vector) -> f64 {
        self.shape_pinv.quad_form(x)
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        x.len() == self.dim() && self.gauge_sq(x) <= 1.0 + tol
    }

    /// `E(c·M)`, i.e. the ellipsoid stretched by `√c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::contract(format!("scale must be positive, got {c}")));
        }
        Ok(Self {
            shape: self.shape.scaled(c),
            shape_pinv: self.shape_pinv.scaled(1.0 / c),
        })
    }

    /// `log det M` (−∞ when singular).
    pub fn log_det(&self) -> f64 {
        match self.shape.cholesky() {
            Some(ch) => 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
            None => f64::NEG_INFINITY,
        }
    }
}

/// The polar body: `E(M)* = E(M⁻¹)`.
pub fn polar(e: &Ellipsoid) -> Result<Ellipsoid> {
    let chol = e
        .shape()
        .cholesky()
        .ok_or_else(|| Error::contract("polar requires a positive definite shape"))?;
    let inv = SymMatrix::symmetrized(chol.inverse());
    Ellipsoid::new(inv)
}

/// `{x : ‖Ax‖∞ ≤ 1}` with slab normals as the rows of `A`.
#[derive(Debug, Clone)]
pub struct SlabPolytope {
    normals: Matrix,
}

impl SlabPolytope {
    /// Rejects normals that do not span `R^d` (the slab intersection would be
    /// unbounded).
    pub fn new(normals: Matrix) -> Result<Self> {
        let d = normals.ncols();
        let rank = row_rank(&normals)?;
        if rank < d {
            return Err(Error::Degenerate(format!(
                "slab normals span only {rank} of {d} dimensions; the polytope is unbounded"
            )));
        }
        Ok(Self { normals })
    }

    pub fn normals(&self) -> &Matrix {
        &self.normals
    }

    pub fn dim(&self) -> usize {
        self.normals.ncols()
    }

    /// `‖Ax‖∞`.
    pub fn gauge(&self, x: &Vector) -> f64 {
        (&self.normals * x).amax()
    }
}

fn row_rank(points: &Matrix) -> Result<usize> {
    let d = points.ncols();
    if points.nrows() == 0 || d == 0 {
        return Ok(0);
    }
    let eig = sym_eig(&SymMatrix::gram_cols(points))?;
    let lmax = eig.values.max();
    if lmax <= 0.0 {
        return Ok(0);
    }
    Ok(eig.values.iter().filter(|&&l| l > 1e-12 * lmax).count())
}

/// Khachiyan iteration settings.
#[derive(Debug, Clone, Copy)]
pub struct KhachiyanConfig {
    /// Target: `max_i p_iᵀX⁻¹p_i ≤ (1+eps)·d`.
    pub eps: f64,
    /// Defaults to `100·n·d` when `None`.
    pub max_iterations: Option<usize>,
}

impl KhachiyanConfig {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            max_iterations: None,
        }
    }
}

/// Outcome of a Khachiyan run on the symmetric set `{±p_i}`.
#[derive(Debug, Clone)]
pub struct KhachiyanRun {
    /// Enclosing ellipsoid `E(ρX)` with `ρ = max_i p_iᵀX⁻¹p_i`.
    pub ellipsoid: Ellipsoid,
    /// Barycentric weights on the points.
    pub weights: Vec<f64>,
    /// `X = Σ u_i p_i p_iᵀ`; `E(X)` lies inside `conv{±p_i}` for any weights.
    pub moment: SymMatrix,
    /// `ρ/d`, the certified approximation factor; at most `1 + eps`.
    pub factor: f64,
    pub iterations: usize,
    /// `log det X` after every iteration, starting with the initial weights.
    pub log_det_history: Vec<f64>,
}

/// `(1+eps)`-approximate MVEE of `{±p_i}`, centered at zero.
pub fn khachiyan_mvee(points: &[Vector], eps: f64) -> Result<Ellipsoid> {
    let d = points.first().map_or(0, |p| p.len());
    let m = Matrix::from_fn(points.len(), d, |i, j| points[i][j]);
    Ok(khachiyan(&m, &KhachiyanConfig::new(eps))?.ellipsoid)
}

/// Khachiyan's algorithm in the centered formulation, with Todd–Yıldırım away
/// steps so that tight tolerances converge linearly.
///
/// `points` holds one point per row.
pub fn khachiyan(points: &Matrix, cfg: &KhachiyanConfig) -> Result<KhachiyanRun> {
    let (n, d) = points.shape();
    if !(cfg.eps > 0.0 && cfg.eps <= 1.0) {
        return Err(Error::contract(format!(
            "Khachiyan eps must lie in (0, 1], got {}",
            cfg.eps
        )));
    }
    if n == 0 || d == 0 {
        return Err(Error::Degenerate("empty point set".into()));
    }
    let rank = row_rank(points)?;
    if rank < d {
        return Err(Error::Degenerate(format!(
            "points span only {rank} of {d} dimensions"
        )));
    }
    let max_iterations = cfg.max_iterations.unwrap_or(100 * n * d);
    let df = d as f64;
    let target = (1.0 + cfg.eps) * df;

    let mut u = vec![1.0 / n as f64; n];
    let moment = |u: &[f64]| -> Matrix {
        let mut x = Matrix::zeros(d, d);
        for (i, &w) in u.iter().enumerate() {
            if w > 0.0 {
                let p = points.row(i);
                x.ger(w, &p.transpose(), &p.transpose(), 1.0);
            }
        }
        x
    };
    let mut x = moment(&u);
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        let chol = nalgebra::Cholesky::new(SymMatrix::symmetrized(x.clone()).into_matrix())
            .ok_or_else(|| Error::Numeric("moment matrix lost positive definiteness".into()))?;
        history.push(2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>());
        // κ_i = p_iᵀX⁻¹p_i = ‖L⁻¹p_i‖².
        let w = chol.l().solve_lower_triangular(&points.transpose()).ok_or_else(|| {
            Error::Numeric("triangular solve failed in Khachiyan iteration".into())
        })?;
        let kappa: Vec<f64> = w.column_iter().map(|c| c.norm_squared()).collect();

        let (j_up, &k_up) = kappa
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("n > 0");
        if k_up <= target {
            let rho = k_up;
            let x_sym = SymMatrix::symmetrized(x);
            let ellipsoid = Ellipsoid::new(x_sym.scaled(rho))?;
            return Ok(KhachiyanRun {
                ellipsoid,
                weights: u,
                moment: x_sym,
                factor: rho / df,
                iterations,
                log_det_history: history,
            });
        }
        if iterations == max_iterations {
            return Err(Error::NoConvergence {
                what: "Khachiyan MVEE",
                iterations,
                residual: k_up / df - 1.0,
            });
        }
        iterations += 1;

        let (j_down, &k_down) = kappa
            .iter()
            .enumerate()
            .filter(|(i, _)| u[*i] > 0.0)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("weights sum to one");
        let up_gap = k_up / df - 1.0;
        let down_gap = 1.0 - k_down / df;

        // Exact line search on log det((1-β)X + β p pᵀ).
        let (j, beta) = if up_gap >= down_gap || k_down >= df {
            (j_up, (k_up / df - 1.0) / (k_up - 1.0))
        } else {
            let uj = u[j_down];
            let floor = -uj / (1.0 - uj);
            let step = if k_down > 1.0 {
                (k_down / df - 1.0) / (k_down - 1.0)
            } else {
                floor
            };
            (j_down, step.max(floor))
        };

        for w in u.iter_mut() {
            *w *= 1.0 - beta;
        }
        u[j] += beta;
        if u[j] < 1e-300 {
            u[j] = 0.0;
        }
        if iterations % 64 == 0 {
            x = moment(&u);
        } else {
            let p = points.row(j).transpose();
            x *= 1.0 - beta;
            x.ger(beta, &p, &p, 1.0);
        }
    }
}

/// Approximate MVEE of the slab polytope: returns `M` with
/// `(1/√((1+eps)d))·E(M) ⊆ P_A ⊆ E(M)`.
pub fn enclosing_ellipsoid(p: &SlabPolytope, eps: f64) -> Result<Ellipsoid> {
    Ok(enclosing_ellipsoid_run(p, eps)?.0)
}

/// As [`enclosing_ellipsoid`], also returning the Khachiyan run on the polar
/// vertices.
pub fn enclosing_ellipsoid_run(p: &SlabPolytope, eps: f64) -> Result<(Ellipsoid, KhachiyanRun)> {
    let run = khachiyan(p.normals(), &KhachiyanConfig::new(eps))?;
    // conv{±a_i} ⊆ E(ρX) ⟹ E((ρX)⁻¹) ⊆ P_A, and E(X) ⊆ conv{±a_i} ⟹ P_A ⊆ E(X⁻¹).
    let rho = run.factor * p.dim() as f64;
    let outer = polar(&run.ellipsoid)?.scaled(rho)?;
    Ok((outer, run))
}

/// Measured slack of a sampled containment check of
/// `(1/√((1+eps)d))·E(M) ⊆ P_A ⊆ E(M)`.
#[derive(Debug, Clone, Copy)]
pub struct ContainmentReport {
    /// Largest `xᵀM†x − 1` over sampled points of `P_A`.
    pub outer_excess: f64,
    /// Largest `‖Ay‖∞ − 1` over sampled boundary points of the shrunk ellipsoid.
    pub inner_excess: f64,
    pub outer_samples: usize,
    pub inner_samples: usize,
}

impl ContainmentReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.outer_excess <= tol && self.inner_excess <= tol
    }
}

/// Sampling certificate for the two-sided containment.
///
/// Outer side: boundary points of `P_A` along random directions and along the
/// principal axes of `M`, plus points rejection-sampled from a box that
/// provably contains `P_A` (`‖x‖₂ ≤ √N/σ_min(A)`). Inner side: uniformly
/// distributed boundary points of the shrunk ellipsoid.
pub fn certify_containment(
    p: &SlabPolytope,
    e: &Ellipsoid,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<ContainmentReport> {
    let d = p.dim();
    if e.dim() != d {
        return Err(Error::contract("ellipsoid and polytope dimensions differ"));
    }
    let mut rng = rng::substream(seed, 0);
    let mut outer_excess = f64::NEG_INFINITY;
    let mut outer_samples = 0;
    let mut record_outer = |x: &Vector| {
        outer_excess = outer_excess.max(e.gauge_sq(x) - 1.0);
        outer_samples += 1;
    };

    // Boundary of P_A along a direction r: r / ‖Ar‖∞.
    let boundary = |r: &Vector| -> Vector { r / p.gauge(r) };
    for _ in 0..samples {
        let r = rng::unit_sphere(&mut rng, d);
        record_outer(&boundary(&r));
    }
    let axes = sym_eig(e.shape())?;
    for c in axes.vectors.column_iter() {
        let r: Vector = c.into_owned();
        record_outer(&boundary(&r));
        record_outer(&boundary(&-r));
    }

    let gram = sym_eig(&SymMatrix::gram_cols(p.normals()))?;
    let sigma_min = gram.values.min().max(0.0).sqrt();
    let radius = (p.normals().nrows() as f64).sqrt() / sigma_min;
    let coord = Uniform::new_inclusive(-radius, radius).expect("finite radius");
    let mut accepted = 0;
    let mut attempts = 0usize;
    while accepted < samples && attempts < 10_000 * samples.max(1) {
        attempts += 1;
        let x = Vector::from_fn(d, |_, _| coord.sample(&mut rng));
        if p.gauge(&x) <= 1.0 {
            record_outer(&x);
            accepted += 1;
        }
    }

    let shrink = 1.0 / ((1.0 + eps) * d as f64).sqrt();
    let root = crate::linalg::sqrt_psd(e.shape())?;
    let mut inner_excess = f64::NEG_INFINITY;
    for _ in 0..samples {
        let s = rng::unit_sphere(&mut rng, d);
        let y = root.as_matrix() * s * shrink;
        inner_excess = inner_excess.max(p.gauge(&y) - 1.0);
    }

    Ok(ContainmentReport {
        outer_excess,
        inner_excess,
        outer_samples,
        inner_samples: samples,
    })
}

/// Random slab polytope with i.i.d. uniform `[-1,1]` normals.
pub fn random_slab_polytope(rng: &mut StreamRng, rows: usize, d: usize) -> Result<SlabPolytope> {
    let u = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    SlabPolytope::new(Matrix::from_fn(rows, d, |_, _| u.sample(rng)))
}
