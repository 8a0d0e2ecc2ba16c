//! Invariant suite run by `lre verify`. Every check measures one quantity on
//! fixed seeds and passes iff `measured ≤ tolerance`; the slack is
//! `tolerance − measured`.

use rand::Rng;

use lowrank_core::adversaries::{
    gen_approx_lowrank, gen_hypercube, gen_stochastic_lowrank, numeric_rank, RANK_TOL,
};
use lowrank_core::algorithms::{
    play, AdaGrad, Ftl, Hedge, Learner, LowRankExperts, MetaCombiner, DEFAULT_MVEE_EPS,
    DEFAULT_SPAN_TOL,
};
use lowrank_core::geometry::{
    certify_containment, enclosing_ellipsoid_run, polar, random_slab_polytope, Ellipsoid,
};
use lowrank_core::linalg::{
    pinv, sqrt_psd, sym_eig, IdentityPlusLowRank, Matrix, SymMatrix, Vector, PINV_TOL,
};
use lowrank_core::rng::{self, StreamRng};
use lowrank_core::simplex_qp::{
    kkt_residual, mahalanobis_simplex_projection, omd_objective, omd_step, projection_residual,
    DecisionVector,
};

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Substring filter on check names.
    pub filter: Option<String>,
    /// New-direction threshold handed to the low-rank learner.
    pub span_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            filter: None,
            span_tol: DEFAULT_SPAN_TOL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.measured <= self.tolerance
    }

    pub fn slack(&self) -> f64 {
        self.tolerance - self.measured
    }
}

type CheckFn = fn(&VerifyOptions) -> (f64, f64);

const CHECKS: &[(&str, CheckFn)] = &[
    ("linalg.eigen_reconstruction", eigen_reconstruction),
    ("linalg.eigen_orthonormality", eigen_orthonormality),
    ("linalg.pinv_subspace_identity", pinv_subspace_identity),
    ("linalg.sqrt_psd_squares_back", sqrt_squares_back),
    ("linalg.woodbury_solve", woodbury_solve),
    ("geometry.polar_involution", polar_involution),
    ("geometry.khachiyan_stopping_factor", khachiyan_factor),
    ("geometry.two_sided_containment", containment),
    ("simplex_qp.kkt_dense", kkt_dense),
    ("simplex_qp.kkt_low_rank", kkt_low_rank),
    ("simplex_qp.zigzag_closed_form", zigzag_closed_form),
    ("simplex_qp.grid_oracle_n3", grid_oracle),
    ("algorithms.lowrank_k_equals_numeric_rank", lowrank_rank),
    ("algorithms.lowrank_dual_norm_le_1", lowrank_dual_norm),
    ("algorithms.lowrank_primal_norm_le_4k", lowrank_primal_norm),
    ("algorithms.lowrank_h_dominates_identity", lowrank_h_psd),
    ("algorithms.decisions_on_simplex", decisions_on_simplex),
    ("algorithms.regret_recomputation", regret_recomputation),
    ("algorithms.adagrad_root_squares_to_s", adagrad_root),
    ("algorithms.adagrad_s_monotone", adagrad_monotone),
    ("algorithms.combiner_regret_vs_sub_learners", combiner_regret),
    ("adversaries.entry_bounds", entry_bounds),
    ("adversaries.rank_certificate", rank_certificate),
    ("adversaries.determinism", determinism),
    ("adversaries.hypercube_schedule", hypercube_schedule),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

/// Runs the checks selected by the filter, in a fixed order.
pub fn verify(opts: &VerifyOptions) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .filter(|(name, _)| opts.filter.as_ref().is_none_or(|f| name.contains(f.as_str())))
        .map(|&(name, f)| {
            let (measured, tolerance) = f(opts);
            // NaN counts as a failure.
            let measured = if measured.is_nan() { f64::INFINITY } else { measured };
            CheckResult {
                name,
                measured,
                tolerance,
            }
        })
        .collect()
}

pub fn format_report(results: &[CheckResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&format!(
            "{}  {:<45} measured {:>10.3e}  tol {:>8.1e}  slack {:>10.3e}\n",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.measured,
            r.tolerance,
            r.slack()
        ));
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    out.push_str(&format!("{} checks, {failed} failed\n", results.len()));
    out
}

fn random_sym(rng: &mut StreamRng, n: usize) -> SymMatrix {
    let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    SymMatrix::symmetrized(&a + a.transpose())
}

fn random_spd(rng: &mut StreamRng, n: usize, floor: f64) -> SymMatrix {
    let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut m = a.transpose() * a;
    for i in 0..n {
        m[(i, i)] += floor;
    }
    SymMatrix::symmetrized(m)
}

fn random_simplex(rng: &mut StreamRng, n: usize) -> DecisionVector {
    let x = Vector::from_fn(n, |_, _| -(1.0 - rng.random::<f64>()).ln());
    let s = x.sum();
    DecisionVector::new(x / s).expect("normalized")
}

fn eigen_reconstruction(_: &VerifyOptions) -> (f64, f64) {
    let mut rng = rng::seeded(1);
    let mut worst: f64 = 0.0;
    for n in 1..=16 {
        let s = random_sym(&mut rng, n);
        let e = sym_eig(&s).unwrap();
        let back = e.reconstruct_with(|l| l);
        worst = worst.max((back.as_matrix() - s.as_matrix()).norm() / s.frobenius().max(1e-300));
    }
    (worst, 1e-10)
}

fn eigen_orthonormality(_: &VerifyOptions) -> (f64, f64) {
    let mut rng = rng::seeded(2);
    let mut worst: f64 = 0.0;
    for n in 1..=16 {
        let e = sym_eig(&random_sym(&mut rng, n)).unwrap();
        worst = worst.max((e.vectors.transpose() * &e.vectors - Matrix::identity(n, n)).amax());
    }
    (worst, 1e-10)
}

fn pinv_subspace_identity(_: &VerifyOptions) -> (f64, f64) {
    let mut rng = rng::seeded(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.random_range(1..=8);
        let n = rng.random_range(d..=32);
        let m = random_spd(&mut rng, d, 0.1);
        let u = Matrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0));
        let inner = SymMatrix::symmetrized(u.transpose() * m.as_matrix() * &u);
        let lhs = &u * pinv(&inner, PINV_TOL).unwrap().as_matrix() * u.transpose();
        let inv = m.as_matrix().clone().try_inverse().unwrap();
        worst = worst.max((lhs - &inv).norm() / inv.norm());
    }
    (worst, 1e-8)
}

fn sqrt_squares_back(_: &VerifyOptions) -> (f64, f64) {
    let mut rng = rng::seeded(4);
    let mut worst: f64 = 0.0;
    for n in 1..=12 {
        let s = random_spd(&mut rng, n, 0.0);
        let r = sqrt_psd(&s).unwrap();
        let sq = r.as_matrix() * r.as_matrix();
        worst = worst.max((sq - s.as_matrix()).norm() / s.frobenius());
    }
    (worst, 1e-10)
}

fn woodbury_solve(_: &VerifyOptions) -> (f64, f64) {
    let mut rng = rng::seeded(5);
    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let n = rng.random_range(1..200);
        let r = rng.random_range(0..6);
        let f = Matrix::from_fn(n, r, |_, _| rng.random_range(-3.0..3.0));
        let h = IdentityPlusLowRank::new(rng.random_range(0.1..3.0), f).unwrap();
        let b = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let x = h.solve(&b);
        worst = worst.max((h.apply(&x) - &b).amax());
    }
    (worst, 1e-10)
}

fn polar_involution(_: &VerifyOptions) -> (f64, f64) {
    let mut rng = rng::seeded(6);
    let mut worst: f64 = 0.0;
    for d in 1..=8 {
        let m = random_spd(&mut rng, d, 0.2);
        let e = Ellipsoid::new(m.clone()).unwrap();
        let back = polar(&polar(&e).unwrap()).unwrap();
        worst = worst.max((back.shape().as_matrix() - m.as_matrix()).amax() / m.frobenius());
    }
    (worst, 1e-9)
}

fn khachiyan_factor(_: &VerifyOptions) -> (f64, f64) {
    // The run stops once every point has κ ≤ (1 + eps)·d.
    let mut rng = rng::seeded(7);
    let mut worst = f64::NEG_INFINITY;
    for eps in [1.0, 0.1, 0.01] {
        for _ in 0..10 {
            let p = random_slab_polytope(&mut rng, 20, 3).unwrap();
            let (_, run) = enclosing_ellipsoid_run(&p, eps).unwrap();
            worst = worst.max(run.factor / (1.0 + eps) - 1.0);
        }
    }
    (worst, 1e-12)
}

fn containment(_: &VerifyOptions) -> (f64, f64) {
    let mut rng = rng::seeded(8);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..20 {
        let p = random_slab_polytope(&mut rng, 20, 3).unwrap();
        let (e, _) = enclosing_ellipsoid_run(&p, DEFAULT_MVEE_EPS).unwrap();
        let r = certify_containment(&p, &e, DEFAULT_MVEE_EPS, 2000, i).unwrap();
        worst = worst.max(r.outer_excess).max(r.inner_excess);
    }
    (worst, 1e-6)
}

fn kkt_dense(_: &VerifyOptions) -> (f64, f64) {
    let mut rng = rng::seeded(9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..20);
        let h = random_spd(&mut rng, n, 0.05);
        let z = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let x = mahalanobis_simplex_projection(&h, &z).unwrap();
        worst = worst.max(projection_residual(&h, &z, x.as_vector()));
    }
    (worst, 1e-8)
}

fn kkt_low_rank(_: &VerifyOptions) -> (f64, f64) {
    let mut rng = rng::seeded(10);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..300);
        let r = rng.random_range(0..5);
        let f = Matrix::from_fn(n, r, |_, _| rng.random_range(-2.0..2.0));
        let h = IdentityPlusLowRank::new(1.0, f).unwrap();
        let x_t = random_simplex(&mut rng, n);
        let l = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let eta = rng.random_range(0.1..10.0);
        let x = omd_step(&h, eta, &x_t, &l).unwrap();
        let grad = &l + h.apply(&(x.as_vector() - x_t.as_vector())) * (2.0 / eta);
        worst = worst.max(kkt_residual(x.as_vector(), &grad));
    }
    (worst, 1e-8)
}

fn zigzag_closed_form(_: &VerifyOptions) -> (f64, f64) {
    let mut worst: f64 = 0.0;
    for n in [4usize, 8, 64] {
        let e = Vector::from_fn(n, |i, _| if i < n / 2 { 1.0 } else { -1.0 });
        let want = Vector::from_fn(n, |i, _| if i < n / 2 { 2.0 / n as f64 } else { 0.0 });
        for b in [0.0, 0.5, 2.0] {
            let y = Vector::from_fn(n, |i, _| if i < n / 2 { b + 2.0 / n as f64 } else { -b });
            for alpha in [0.0, 1.0, 100.0] {
                for delta in [0.1, 1.0, 10.0] {
                    let mut s = SymMatrix::identity(n).scaled(delta);
                    s.add_outer(&e, alpha);
                    let g = sqrt_psd(&s).unwrap();
                    let x = mahalanobis_simplex_projection(&g, &y).unwrap();
                    worst = worst.max((x.as_vector() - &want).amax());
                }
            }
        }
    }
    (worst, 1e-9)
}

/// Brute-force minimizer over the 3-simplex: grid scan, then pattern search
/// along the edge directions.
fn simplex3_argmin(f: impl Fn(&Vector) -> f64) -> Vector {
    let point = |a: f64, b: f64| Vector::from_vec(vec![a, b, 1.0 - a - b]);
    let step = 1e-3;
    let m = 1000;
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

fn grid_oracle(_: &VerifyOptions) -> (f64, f64) {
    let mut rng = rng::seeded(11);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let h = random_spd(&mut rng, 3, 0.1);
        let eta = rng.random_range(0.1..2.0);
        let x_t = random_simplex(&mut rng, 3);
        let l = Vector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let x = omd_step(&h, eta, &x_t, &l).unwrap();
        let oracle = simplex3_argmin(|z| omd_objective(&h, eta, &x_t, &l, z));
        worst = worst.max((x.as_vector() - oracle).amax());
    }
    (worst, 1e-4)
}

struct LowRankProbe {
    rank_mismatch: f64,
    dual: f64,
    primal_excess: f64,
}

fn lowrank_probe(opts: &VerifyOptions) -> LowRankProbe {
    let mut probe = LowRankProbe {
        rank_mismatch: 0.0,
        dual: f64::NEG_INFINITY,
        primal_excess: f64::NEG_INFINITY,
    };
    for (seed, (n, d)) in [(30usize, 1usize), (40, 2), (60, 3), (25, 4)].into_iter().enumerate() {
        let stream = gen_stochastic_lowrank(n, d, 300, seed as u64).unwrap();
        let mut l = LowRankExperts::with_params(n, opts.span_tol, DEFAULT_MVEE_EPS)
            .unwrap()
            .with_diagnostics(1000, seed as u64);
        for (t, c) in stream.losses.columns().iter().enumerate() {
            l.update(c).unwrap();
            if t % 25 == 0 || t + 1 == stream.rounds() {
                let rank = numeric_rank(&stream.losses.prefix(t + 1).to_matrix(), RANK_TOL).unwrap();
                probe.rank_mismatch = probe.rank_mismatch.max((l.k() as f64 - rank as f64).abs());
            }
        }
        for e in l.epoch_diagnostics() {
            probe.dual = probe.dual.max(e.max_dual_norm_sq);
            let cap = 4.0 * e.k as f64;
            probe.primal_excess = probe
                .primal_excess
                .max(e.max_sampled_norm_sq - cap)
                .max(e.max_vertex_norm_sq - cap);
        }
    }
    probe
}

fn lowrank_rank(opts: &VerifyOptions) -> (f64, f64) {
    (lowrank_probe(opts).rank_mismatch, 0.0)
}

fn lowrank_dual_norm(opts: &VerifyOptions) -> (f64, f64) {
    (lowrank_probe(opts).dual, 1.0 + 1e-6)
}

fn lowrank_primal_norm(opts: &VerifyOptions) -> (f64, f64) {
    (lowrank_probe(opts).primal_excess, 1e-6)
}

fn lowrank_h_psd(opts: &VerifyOptions) -> (f64, f64) {
    let stream = gen_approx_lowrank(40, 3, 100, 0.05, 12).unwrap();
    let mut l = LowRankExperts::with_params(40, opts.span_tol, DEFAULT_MVEE_EPS).unwrap();
    let mut worst: f64 = 0.0;
    for (t, c) in stream.losses.columns().iter().enumerate() {
        l.update(c).unwrap();
        if t % 10 == 0 {
            let h = l.regularizer().to_dense();
            let min = sym_eig(&h).unwrap().values.min();
            worst = worst.max(1.0 - min);
        }
    }
    (worst, 1e-9)
}

fn learners(n: usize, t: usize, span_tol: f64) -> Vec<Box<dyn Learner>> {
    vec![
        Box::new(Hedge::with_default_rate(n, Some(t)).unwrap()),
        Box::new(Ftl::new(n).unwrap()),
        Box::new(LowRankExperts::with_params(n, span_tol, DEFAULT_MVEE_EPS).unwrap()),
        Box::new(AdaGrad::new(n, 0.5, 1.0).unwrap()),
        Box::new(
            MetaCombiner::for_horizon(
                Box::new(LowRankExperts::with_params(n, span_tol, DEFAULT_MVEE_EPS).unwrap()),
                Box::new(Hedge::with_default_rate(n, Some(t)).unwrap()),
                t,
            )
            .unwrap(),
        ),
    ]
}

fn decisions_on_simplex(opts: &VerifyOptions) -> (f64, f64) {
    let stream = gen_approx_lowrank(24, 2, 150, 0.2, 13).unwrap();
    let mut worst: f64 = 0.0;
    for mut l in learners(24, 150, opts.span_tol) {
        let trace = play(&mut l, &stream.losses, true).unwrap();
        for x in trace.decisions.unwrap() {
            let v = x.as_vector();
            worst = worst.max((-v.min()).max(0.0)).max((v.sum() - 1.0).abs());
        }
    }
    (worst, 1e-9)
}

fn regret_recomputation(opts: &VerifyOptions) -> (f64, f64) {
    let stream = gen_stochastic_lowrank(20, 3, 120, 14).unwrap();
    let mut worst: f64 = 0.0;
    for mut l in learners(20, 120, opts.span_tol) {
        let trace = play(&mut l, &stream.losses, true).unwrap();
        let decisions = trace.decisions.as_ref().unwrap();
        // Independent recomputation from the raw matrix.
        let m = stream.losses.to_matrix();
        let mut learner_loss = 0.0;
        let mut totals = Vector::zeros(20);
        for t in 0..stream.rounds() {
            let col = m.column(t);
            learner_loss += decisions[t].as_vector().dot(&col);
            totals += col;
            worst = worst.max((learner_loss - totals.min() - trace.cum_regret[t]).abs());
        }
    }
    (worst, 1e-9)
}

fn adagrad_root(_: &VerifyOptions) -> (f64, f64) {
    let stream = gen_approx_lowrank(12, 3, 40, 0.1, 15).unwrap();
    let mut a = AdaGrad::new(12, 0.3, 0.5).unwrap();
    let mut worst: f64 = 0.0;
    for c in stream.losses.columns() {
        a.update(c).unwrap();
        let g = a.g_dense();
        worst = worst.max((g.as_matrix() * g.as_matrix() - a.s_dense().as_matrix()).amax());
    }
    (worst, 1e-9)
}

fn adagrad_monotone(_: &VerifyOptions) -> (f64, f64) {
    let mut rng = rng::seeded(16);
    let stream = gen_approx_lowrank(12, 3, 40, 0.1, 16).unwrap();
    let probes: Vec<Vector> = (0..20)
        .map(|_| Vector::from_fn(12, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let mut a = AdaGrad::new(12, 0.3, 0.5).unwrap();
    let mut prev: Vec<f64> = probes.iter().map(|x| a.s_dense().quad_form(x)).collect();
    let mut worst: f64 = 0.0;
    for c in stream.losses.columns() {
        a.update(c).unwrap();
        let s = a.s_dense();
        for (x, p) in probes.iter().zip(prev.iter_mut()) {
            let q = s.quad_form(x);
            worst = worst.max(*p - q);
            *p = q;
        }
    }
    (worst, 1e-12)
}

fn combiner_regret(opts: &VerifyOptions) -> (f64, f64) {
    let mut worst = f64::NEG_INFINITY;
    let t = 400;
    for seed in 0..5 {
        let stream = gen_approx_lowrank(30, 2, t, 0.1, 100 + seed).unwrap();
        let mut c = MetaCombiner::for_horizon(
            Box::new(LowRankExperts::with_params(30, opts.span_tol, DEFAULT_MVEE_EPS).unwrap()),
            Box::new(Ftl::new(30).unwrap()),
            t,
        )
        .unwrap();
        let trace = play(&mut c, &stream.losses, false).unwrap();
        let own: f64 = trace.round_loss.iter().sum();
        let [a, b] = c.sub_losses();
        let bound = 2.0 * (t as f64 * std::f64::consts::LN_2).sqrt();
        worst = worst.max(own - a.min(b) - bound);
    }
    (worst, 0.0)
}

fn entry_bounds(_: &VerifyOptions) -> (f64, f64) {
    let streams = [
        gen_stochastic_lowrank(50, 3, 200, 17).unwrap(),
        gen_approx_lowrank(50, 3, 200, 0.3, 17).unwrap(),
        gen_hypercube(5, 200, 17).unwrap(),
    ];
    let worst = streams
        .iter()
        .map(|s| s.losses.to_matrix().amax() - 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    (worst, 1e-12)
}

fn rank_certificate(_: &VerifyOptions) -> (f64, f64) {
    let streams = [
        gen_stochastic_lowrank(50, 3, 200, 18).unwrap(),
        gen_stochastic_lowrank(10, 7, 30, 18).unwrap(),
        gen_hypercube(4, 100, 18).unwrap(),
    ];
    let worst = streams
        .iter()
        .map(|s| numeric_rank(&s.losses.to_matrix(), RANK_TOL).unwrap() as f64 - s.rank_certificate as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    (worst, 0.0)
}

fn determinism(_: &VerifyOptions) -> (f64, f64) {
    let a = gen_approx_lowrank(30, 3, 100, 0.2, 19).unwrap().losses.to_matrix();
    let b = gen_approx_lowrank(30, 3, 100, 0.2, 19).unwrap().losses.to_matrix();
    let identical = a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits());
    (if identical { 0.0 } else { 1.0 }, 0.0)
}

fn hypercube_schedule(_: &VerifyOptions) -> (f64, f64) {
    let mut worst: f64 = 0.0;
    for (d, t) in [(3usize, 10usize), (4, 2048), (5, 17)] {
        let s = gen_hypercube(d, t, 20).unwrap();
        let u = s.embedding.as_ref().unwrap();
        let mut counts = vec![0usize; d];
        for c in s.losses.columns() {
            let j = (0..d)
                .find(|&j| {
                    let col = u.column(j);
                    (c - col).amax() == 0.0 || (c + col).amax() == 0.0
                })
                .unwrap_or(usize::MAX);
            if j == usize::MAX {
                return (f64::INFINITY, 0.0);
            }
            counts[j] += 1;
        }
        for &c in &counts {
            if c < t / d || c > t.div_ceil(d) {
                worst = worst.max(1.0);
            }
        }
    }
    (worst, 0.0)
}
