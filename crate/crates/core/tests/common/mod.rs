//! Independent brute-force oracles shared by the integration tests.

#![allow(dead_code)]

use lowrank_core::linalg::{Matrix, SymMatrix, Vector};

/// Minimizer of `f` over the 3-simplex: a grid scan with step `step`,
/// followed by pattern search along the simplex edge directions.
pub fn simplex3_argmin(f: impl Fn(&Vector) -> f64, step: f64) -> Vector {
    let point = |a: f64, b: f64| Vector::from_vec(vec![a, b, 1.0 - a - b]);
    let m = (1.0 / step).round() as usize;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=m {
        for j in 0..=(m - i) {
            let (a, b) = (i as f64 * step, j as f64 * step);
            let v = f(&point(a, b));
            if v < best.0 {
                best = (v, a, b);
            }
        }
    }
    let (mut fx, mut a, mut b) = best;
    let dirs = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, -1.0), (-1.0, 1.0)];
    let mut h = step;
    while h > 1e-12 {
        let mut moved = false;
        for (da, db) in dirs {
            let (na, nb) = (a + h * da, b + h * db);
            if na < 0.0 || nb < 0.0 || na + nb > 1.0 {
                continue;
            }
            let v = f(&point(na, nb));
            if v < fx {
                (fx, a, b) = (v, na, nb);
                moved = true;
            }
        }
        if !moved {
            h /= 2.0;
        }
    }
    point(a, b)
}

/// Random symmetric positive definite matrix `AᵀA + floor·I`.
pub fn random_spd(rng: &mut impl rand::Rng, n: usize, floor: f64) -> SymMatrix {
    let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut m = a.transpose() * a;
    for i in 0..n {
        m[(i, i)] += floor;
    }
    SymMatrix::symmetrized(m)
}

/// Dirichlet(1) point of the simplex.
pub fn random_simplex_point(rng: &mut impl rand::Rng, n: usize) -> Vector {
    let x = Vector::from_fn(n, |_, _| -(1.0 - rng.random::<f64>()).ln());
    let s = x.sum();
    x / s
}
