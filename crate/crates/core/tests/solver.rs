use corona_core::prox::*;
use corona_core::solver::*;
use corona_core::tensor::{svd, CMatrix, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{random_matrix, synthetic_ls, to_na};

/// SVT built from nalgebra's SVD.
fn svt_oracle(x: &CMatrix, alpha: f64) -> CMatrix {
    let s = to_na(x).svd(true, true);
    let (u, vt) = (s.u.unwrap(), s.v_t.unwrap());
    let mut out = CMatrix::zeros(x.rows(), x.cols());
    for (k, &sig) in s.singular_values.iter().enumerate() {
        let g = (sig - alpha).max(0.0);
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                out[(i, j)] += u[(i, k)] * vt[(k, j)] * g;
            }
        }
    }
    out
}

fn row_threshold_oracle(x: &CMatrix, alpha: f64) -> CMatrix {
    CMatrix::from_fn(x.rows(), x.cols(), |i, j| {
        let n = (0..x.cols()).map(|c| x[(i, c)].norm_sqr()).sum::<f64>().sqrt();
        if n == 0.0 { C64::new(0.0, 0.0) } else { x[(i, j)] * (1.0 - alpha / n).max(0.0) }
    })
}

#[test]
fn prox_closed_forms_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let (m, n) = (rng.random_range(1..12), rng.random_range(1..8));
        let x = random_matrix(m, n, &mut rng);
        let alpha = rng.random_range(0.0..3.0);
        let a = svt(&x, alpha).unwrap();
        let b = svt_oracle(&x, alpha);
        assert!((&a - &b).norm() <= 1e-10 * x.norm());
        let a = row_soft_threshold(&x, alpha).unwrap();
        assert!((&a - &row_threshold_oracle(&x, alpha)).norm() <= 1e-12 * x.norm());
    }
}

#[test]
fn svt_diagonal_is_exact_and_brute_force_optimal() {
    let vals = [4.0, 2.5, 1.0, 0.2];
    let d = CMatrix::from_diag(4, 4, &vals);
    let alpha = 1.1;
    let out = svt(&d, alpha).unwrap();
    for i in 0..4 {
        assert_eq!(out[(i, i)].re, (vals[i] - alpha).max(0.0));
    }
    // dense search over diagonal shrinkages of α|u| + ½(u − σ)² per entry
    for &s in &vals {
        let best = (0..=40_000)
            .map(|k| k as f64 * 1e-4)
            .min_by(|a, b| {
                let f = |u: f64| alpha * u + 0.5 * (u - s) * (u - s);
                f(*a).total_cmp(&f(*b))
            })
            .unwrap();
        assert!((best - (s - alpha).max(0.0)).abs() <= 1e-4);
    }
}

#[test]
fn objective_term_by_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (d, l, s) = (random_matrix(7, 4, &mut rng), random_matrix(7, 4, &mut rng), random_matrix(7, 4, &mut rng));
    let w = RegWeights::new(0.3, 0.7).unwrap();
    let got = objective(&d, &l, &s, &MeasurementOps::identity(), &w).unwrap();
    let fid: f64 = (0..7).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| (l[(i, j)] + s[(i, j)] - d[(i, j)]).norm_sqr()).sum();
    let nuc: f64 = to_na(&l).singular_values().iter().sum();
    let rows: f64 = (0..7).map(|i| (0..4).map(|j| s[(i, j)].norm_sqr()).sum::<f64>().sqrt()).sum();
    let want = 0.5 * fid + 0.3 * nuc + 0.7 * rows;
    assert!((got - want).abs() <= 1e-12 * want);
}

#[test]
fn operator_adjoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let ops: Vec<Box<dyn MeasurementOperator>> = vec![
        Box::new(Identity),
        Box::new(ScaledIdentity(C64::new(0.3, -1.2))),
        Box::new(DenseOperator { matrix: random_matrix(6, 6, &mut rng) }),
    ];
    for op in &ops {
        let x = random_matrix(6, 3, &mut rng);
        let y = random_matrix(6, 3, &mut rng);
        let lhs = op.apply(&x).unwrap().inner(&y);
        let rhs = x.inner(&op.adjoint(&y).unwrap());
        assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm());
    }
}

#[test]
fn gradient_step_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let (m, n) = (5, 3);
    let ops = MeasurementOps::new(
        DenseOperator { matrix: random_matrix(m, m, &mut rng) },
        ScaledIdentity(C64::new(0.5, 0.8)),
    );
    let (d, l, s) = (random_matrix(m, n, &mut rng), random_matrix(m, n, &mut rng), random_matrix(m, n, &mut rng));
    let lf = 3.7;
    let (g1, g2) = gradient_step(&l, &s, &d, &ops, lf).unwrap();
    let f = |l: &CMatrix, s: &CMatrix| 0.5 * residual(&d, l, s, &ops).unwrap().norm_sq();
    let h = 1e-6;
    let fd = |x: &CMatrix, which: usize| {
        CMatrix::from_fn(m, n, |i, j| {
            let mut parts = [0.0; 2];
            for (p, dir) in [C64::new(h, 0.0), C64::new(0.0, h)].into_iter().enumerate() {
                let (mut up, mut dn) = (x.clone(), x.clone());
                up[(i, j)] += dir;
                dn[(i, j)] -= dir;
                parts[p] = if which == 0 { (f(&up, &s) - f(&dn, &s)) / (2.0 * h) } else { (f(&l, &up) - f(&l, &dn)) / (2.0 * h) };
            }
            C64::new(parts[0], parts[1])
        })
    };
    let want1 = &l - &fd(&l, 0).scaled(1.0 / lf);
    let want2 = &s - &fd(&s, 1).scaled(1.0 / lf);
    assert!((&g1 - &want1).norm() <= 1e-6 * want1.norm());
    assert!((&g2 - &want2).norm() <= 1e-6 * want2.norm());
}

#[test]
fn rank_one_goes_to_low_rank_part() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let u = random_matrix(30, 1, &mut rng);
    let v = random_matrix(1, 6, &mut rng);
    let d = u.matmul(&v).unwrap();
    let cfg = SolverConfig {
        weights: RegWeights::new(1e-6, 1e3).unwrap(),
        rel_tol: 1e-12,
        max_iters: 20_000,
        ..Default::default()
    };
    let st = ista_solve(&d, &MeasurementOps::identity(), &cfg).unwrap();
    assert!(st.s.norm() <= 1e-12);
    assert!((&st.l - &d).norm() <= 1e-3 * d.norm());
}

#[test]
fn ista_monotone_on_synthetic_instance() {
    let (d, _, _) = synthetic_ls(1, (16, 20, 20));
    let d = d.unfold();
    let cfg = SolverConfig { max_iters: 300, rel_tol: 0.0, ..Default::default() };
    let st = ista_solve(&d, &MeasurementOps::identity(), &cfg).unwrap();
    assert_eq!(st.objective_history.len(), st.iter);
    let h = &st.objective_history;
    assert!(h.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    assert!(h.last().unwrap() <= &(0.5 * d.norm_sq()));
}

#[test]
fn fista_catches_ista() {
    let (d, _, _) = synthetic_ls(1, (16, 20, 20));
    let d = d.unfold();
    let ops = MeasurementOps::identity();
    let base = SolverConfig { rel_tol: 0.0, ..Default::default() };
    let ista = ista_solve(&d, &ops, &SolverConfig { max_iters: 500, ..base.clone() }).unwrap();
    let target = *ista.objective_history.last().unwrap();
    let fista = fista_solve(&d, &ops, &SolverConfig { max_iters: 250, ..base }).unwrap();
    let hit = fista.objective_history.iter().position(|&v| v <= target);
    assert!(hit.is_some(), "FISTA best {:e} vs ISTA {:e}", fista.objective_history.iter().cloned().fold(f64::MAX, f64::min), target);
}

#[test]
fn known_minimiser_is_a_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let d = random_matrix(8, 4, &mut rng);
    let smax = svd(&d).unwrap().singular_values[0];
    let rmax = row_norms(&d).into_iter().fold(0.0, f64::max);
    let cfg = SolverConfig {
        weights: RegWeights::new(smax * 1.01, rmax * 1.01).unwrap(),
        max_iters: 1,
        lipschitz: Some(1.0),
        ..Default::default()
    };
    let st = ista_solve(&d, &MeasurementOps::identity(), &cfg).unwrap();
    assert_eq!(st.l.norm() + st.s.norm(), 0.0);
}

#[test]
fn solves_are_deterministic() {
    let (d, _, _) = synthetic_ls(2, (6, 8, 8));
    let d = d.unfold();
    let cfg = SolverConfig { max_iters: 40, ..Default::default() };
    let a = fista_solve(&d, &MeasurementOps::identity(), &cfg).unwrap();
    let b = fista_solve(&d, &MeasurementOps::identity(), &cfg).unwrap();
    assert_eq!(a.l, b.l);
    assert_eq!(a.s, b.s);
    assert_eq!(a.objective_history, b.objective_history);
}

#[test]
fn dense_lipschitz_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let h1 = random_matrix(5, 5, &mut rng);
    let ops = MeasurementOps::new(DenseOperator { matrix: h1.clone() }, Identity);
    let est = ops.lipschitz(5, 2).unwrap();
    let a = to_na(&h1);
    let k = &a * a.adjoint() + nalgebra::DMatrix::<C64>::identity(5, 5);
    let want = k.symmetric_eigenvalues().iter().cloned().fold(f64::MIN, f64::max);
    assert!((est - want).abs() <= 1e-5 * want);
    let z = MeasurementOps::new(ScaledIdentity(C64::new(0.0, 0.0)), ScaledIdentity(C64::new(0.0, 0.0)));
    assert!(z.lipschitz(3, 2).is_err());
}

proptest! {
    #[test]
    fn proxes_are_nonexpansive(seed in 0u64..10_000, alpha in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(6, 4, &mut rng);
        let y = random_matrix(6, 4, &mut rng);
        let dist = (&x - &y).norm();
        prop_assert!((&svt(&x, alpha).unwrap() - &svt(&y, alpha).unwrap()).norm() <= dist * (1.0 + 1e-12));
        let (rx, ry) = (row_soft_threshold(&x, alpha).unwrap(), row_soft_threshold(&y, alpha).unwrap());
        prop_assert!((&rx - &ry).norm() <= dist * (1.0 + 1e-12));
        // each output row is c·(input row) with c in [0, 1]
        for i in 0..6 {
            let (inp, out) = (x.row(i), rx.row(i));
            let n: f64 = inp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let c = out.iter().zip(&inp).map(|(o, z)| (o * z.conj()).re).sum::<f64>() / (n * n);
            prop_assert!((0.0..=1.0).contains(&c));
            for (o, z) in out.iter().zip(&inp) {
                prop_assert!((o - z * c).norm() <= 1e-12 * n);
            }
        }
    }

    #[test]
    fn ista_objective_never_increases(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_matrix(24, 5, &mut rng);
        let cfg = SolverConfig { max_iters: 40, rel_tol: 0.0, weights: RegWeights::new(0.5, 0.3).unwrap(), ..Default::default() };
        let st = ista_solve(&d, &MeasurementOps::identity(), &cfg).unwrap();
        prop_assert!(st.objective_history.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    }
}
