//! Small dense linear algebra: symmetric eigendecomposition (cyclic Jacobi),
//! pseudo-inverses, PSD square roots, span tracking and the `H`-norms used by
//! the mirror-descent learners.
//!
//! Storage and triangular solves come from `nalgebra`; everything that needs a
//! spectral decomposition goes through [`sym_eig`].

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative asymmetry tolerated by [`SymMatrix::new`] before it refuses input.
const SYMMETRY_TOL: f64 = 1e-12;

/// Dense symmetric matrix with exactly symmetric storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Wraps `m`, rejecting it unless it is square and symmetric up to
    /// rounding. The stored copy is symmetrized exactly.
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::contract(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::contract(format!(
                        "matrix is not symmetric at ({i},{j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("matrix has non-finite entries"));
        }
        Ok(Self::symmetrized(m))
    }

    /// Builds `(m + mᵀ)/2` without checking; for matrices symmetric by
    /// construction (Gram matrices, products `A M Aᵀ`).
    pub fn symmetrized(m: Matrix) -> Self {
        let mut s = m;
        let n = s.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        SymMatrix(s)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(Matrix::from_diagonal(&Vector::from_column_slice(diag)))
    }

    /// `A Aᵀ`.
    pub fn gram_rows(a: &Matrix) -> Self {
        Self::symmetrized(a * a.transpose())
    }

    /// `Aᵀ A`.
    pub fn gram_cols(a: &Matrix) -> Self {
        Self::symmetrized(a.transpose() * a)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn quad_form(&self, x: &Vector) -> f64 {
        x.dot(&(&self.0 * x))
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix(&self.0 * c)
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        SymMatrix(&self.0 + &other.0)
    }

    /// Adds `c·v vᵀ` in place.
    pub fn add_outer(&mut self, v: &Vector, c: f64) {
        let n = self.dim();
        for j in 0..n {
            for i in 0..n {
                self.0[(i, j)] += c * v[i] * v[j];
            }
        }
    }

    pub fn cholesky(&self) -> Option<Cholesky<f64, Dyn>> {
        Cholesky::new(self.0.clone())
    }
}

/// Tuning knobs of the Jacobi eigensolver.
#[derive(Debug, Clone, Copy)]
pub struct EigConfig {
    pub max_dim: usize,
    /// Stop once the off-diagonal Frobenius norm drops below `offdiag_tol·‖S‖_F`.
    pub offdiag_tol: f64,
    pub max_sweeps: usize,
}

impl Default for EigConfig {
    fn default() -> Self {
        Self {
            max_dim: 4096,
            offdiag_tol: 1e-12,
            max_sweeps: 100,
        }
    }
}

/// Eigenvalues sorted non-increasing, with matching orthonormal eigenvector
/// columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vector,
    pub vectors: Matrix,
}

impl SymEig {
    /// `Q f(Λ) Qᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let w = f(self.values[j]);
            scaled.column_mut(j).scale_mut(w);
        }
        SymMatrix::symmetrized(scaled * self.vectors.transpose())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.amax()
    }
}

pub fn sym_eig(s: &SymMatrix) -> Result<SymEig> {
    sym_eig_with(s, &EigConfig::default())
}

/// Cyclic Jacobi eigendecomposition.
pub fn sym_eig_with(s: &SymMatrix, cfg: &EigConfig) -> Result<SymEig> {
    let n = s.dim();
    if n > cfg.max_dim {
        return Err(Error::contract(format!(
            "eigensolver dimension {n} exceeds the configured cap {}",
            cfg.max_dim
        )));
    }
    // Row-major scratch copy; symmetric so orientation does not matter.
    let mut a: Vec<f64> = s.as_matrix().iter().copied().collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let threshold = cfg.offdiag_tol * s.frobenius();

    let off_norm = |a: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                acc += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        acc.sqrt()
    };

    let mut sweeps = 0;
    let mut off = off_norm(&a);
    while off > threshold {
        if sweeps == cfg.max_sweeps {
            return Err(Error::NoConvergence {
                what: "Jacobi eigensolver",
                iterations: sweeps,
                residual: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                // A <- Jᵀ A J, columns then rows.
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - sn * akq;
                    a[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - sn * aqk;
                    a[q * n + k] = sn * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + c * vkq;
                }
            }
        }
        off = off_norm(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| a[i * n + i]));
    let vectors = Matrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    Ok(SymEig { values, vectors })
}

/// Default relative cutoff for [`pinv`].
pub const PINV_TOL: f64 = 1e-10;

/// Moore–Penrose pseudo-inverse; eigenvalues with `|λ| ≤ tol·max|λ|` are
/// treated as zero.
pub fn pinv(s: &SymMatrix, tol: f64) -> Result<SymMatrix> {
    let eig = sym_eig(s)?;
    let cutoff = tol * eig.max_abs();
    Ok(eig.reconstruct_with(|l| if l.abs() > cutoff { 1.0 / l } else { 0.0 }))
}

/// Principal square root of a PSD matrix.
pub fn sqrt_psd(s: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(s)?;
    let lmax = eig.values.max().max(0.0);
    let lmin = eig.values.min();
    if lmin < -1e-10 * lmax {
        return Err(Error::Numeric(format!(
            "matrix is not PSD: eigenvalue {lmin:e} (largest {lmax:e})"
        )));
    }
    Ok(eig.reconstruct_with(|l| l.max(0.0).sqrt()))
}

/// Result of projecting a vector onto the orthogonal complement of a basis.
#[derive(Debug, Clone)]
pub struct SpanResidual {
    pub norm: f64,
    /// Unit residual direction; `None` when the residual vanishes.
    pub direction: Option<Vector>,
}

/// Orthonormal basis grown by modified Gram–Schmidt with one
/// reorthogonalization pass.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    dim: usize,
    columns: Vec<Vector>,
}

impl OrthoBasis {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            columns: Vec::new(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    /// Number of basis columns.
    pub fn k(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vector] {
        &self.columns
    }

    /// `N×k` matrix with the basis as columns.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.dim, self.k(), |i, j| self.columns[j][i])
    }

    /// Coordinates `Qᵀv`.
    pub fn coords(&self, v: &Vector) -> Vector {
        Vector::from_iterator(self.k(), self.columns.iter().map(|q| q.dot(v)))
    }

    fn check_dim(&self, v: &Vector) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::contract(format!(
                "vector of length {} against basis in dimension {}",
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }

    fn orthogonalize(&self, v: &Vector) -> Vector {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &self.columns {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        r
    }

    pub fn span_residual(&self, v: &Vector) -> Result<SpanResidual> {
        self.check_dim(v)?;
        let r = self.orthogonalize(v);
        let norm = r.norm();
        let direction = (norm > 0.0).then(|| r / norm);
        Ok(SpanResidual { norm, direction })
    }

    /// Appends the component of `v` orthogonal to the current span if its norm
    /// exceeds `tol`. Returns whether the basis grew.
    pub fn insert(&mut self, v: &Vector, tol: f64) -> Result<bool> {
        let res = self.span_residual(v)?;
        match res.direction {
            Some(dir) if res.norm > tol && self.k() < self.dim => {
                // The direction is already orthogonal; one more pass keeps the
                // basis orthonormal to working precision.
                let dir = self.orthogonalize(&dir);
                let n = dir.norm();
                self.columns.push(dir / n);
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

/// `span_residual` as a free function mirroring the basis method.
pub fn span_residual(basis: &OrthoBasis, v: &Vector) -> Result<SpanResidual> {
    basis.span_residual(v)
}

fn check_pd_solve(h: &SymMatrix, x: &Vector) -> Result<Cholesky<f64, Dyn>> {
    if h.dim() != x.len() {
        return Err(Error::contract(format!(
            "matrix of dimension {} against vector of length {}",
            h.dim(),
            x.len()
        )));
    }
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::contract("matrix is not positive definite"))?;
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |m, &d| m.min(d * d));
    if min_pivot <= 1e-12 {
        return Err(Error::contract("matrix is singular to working precision"));
    }
    Ok(chol)
}

/// `‖x‖_H = √(xᵀHx)`.
pub fn mahalanobis(h: &SymMatrix, x: &Vector) -> Result<f64> {
    check_pd_solve(h, x)?;
    Ok(h.quad_form(x).max(0.0).sqrt())
}

/// `‖ℓ‖*_H = √(ℓᵀH⁻¹ℓ)`, via a Cholesky solve.
pub fn dual_norm(h: &SymMatrix, l: &Vector) -> Result<f64> {
    let chol = check_pd_solve(h, l)?;
    let y = chol.solve(l);
    Ok(l.dot(&y).max(0.0).sqrt())
}

/// Symmetric matrix `c·I + F Fᵀ` kept in factored form, with `F` tall (`N×r`).
///
/// The adaptive regularizers in this crate are all identity-plus-low-rank; this
/// keeps their products and solves at `O(N r²)`.
#[derive(Debug, Clone)]
pub struct IdentityPlusLowRank {
    scale: f64,
    factor: Matrix,
    /// Cholesky factor of the capacitance matrix `c·I_r + FᵀF`.
    capacitance: Cholesky<f64, Dyn>,
}

impl IdentityPlusLowRank {
    pub fn new(scale: f64, factor: Matrix) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::contract(format!(
                "identity scale must be positive, got {scale}"
            )));
        }
        let r = factor.ncols();
        let mut cap = factor.transpose() * &factor;
        for i in 0..r {
            cap[(i, i)] += scale;
        }
        let capacitance = Cholesky::new(SymMatrix::symmetrized(cap).into_matrix())
            .ok_or_else(|| Error::Numeric("capacitance matrix is not positive definite".into()))?;
        Ok(Self {
            scale,
            factor,
            capacitance,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(1.0, Matrix::zeros(n, 0)).expect("identity is well-formed")
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn factor(&self) -> &Matrix {
        &self.factor
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        let ftx = self.factor.transpose() * x;
        x * self.scale + &self.factor * ftx
    }

    pub fn quad_form(&self, x: &Vector) -> f64 {
        let ftx = self.factor.transpose() * x;
        self.scale * x.norm_squared() + ftx.norm_squared()
    }

    /// `(cI + FFᵀ)⁻¹ b` by the Woodbury identity.
    pub fn solve(&self, b: &Vector) -> Vector {
        let ftb = self.factor.transpose() * b;
        let inner = self.capacitance.solve(&ftb);
        (b - &self.factor * inner) / self.scale
    }

    pub fn norm(&self, x: &Vector) -> f64 {
        self.quad_form(x).max(0.0).sqrt()
    }

    pub fn dual_norm(&self, l: &Vector) -> f64 {
        l.dot(&self.solve(l)).max(0.0).sqrt()
    }

    pub fn to_dense(&self) -> SymMatrix {
        let mut m = &self.factor * self.factor.transpose();
        for i in 0..self.dim() {
            m[(i, i)] += self.scale;
        }
        SymMatrix::symmetrized(m)
    }
}
