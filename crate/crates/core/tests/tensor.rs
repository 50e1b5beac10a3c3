use corona_core::tensor::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{cn, random_matrix, random_movie, to_na};

fn orth_err(q: &CMatrix) -> f64 {
    let g = q.adjoint_matmul(q).unwrap();
    (&g - &CMatrix::identity(q.cols())).norm()
}

#[test]
fn casorati_hand_example() {
    let m = MovieTensor::from_fn((2, 2, 2), |t, y, x| C64::new((t * 4 + y * 2 + x + 1) as f64, 0.0));
    let c = m.unfold();
    let col = |j: usize| c.col(j).iter().map(|z| z.re).collect::<Vec<_>>();
    assert_eq!(col(0), vec![1.0, 2.0, 3.0, 4.0]);
    assert_eq!(col(1), vec![5.0, 6.0, 7.0, 8.0]);

    let one = MovieTensor::from_fn((1, 3, 2), |_, y, x| C64::new(y as f64, x as f64));
    assert_eq!(one.unfold().cols(), 1);
    assert_eq!(one.unfold().col(0), one.data());

    let single = fold(&CMatrix::from_fn(1, 3, |_, j| C64::new(j as f64, 0.0)), (3, 1, 1)).unwrap();
    assert_eq!(single.get(2, 0, 0), C64::new(2.0, 0.0));
    assert!(fold(&CMatrix::zeros(12, 5), (5, 3, 4)).unwrap().norm() == 0.0);
    assert!(fold(&CMatrix::zeros(12, 5), (5, 3, 5)).is_err());
}

#[test]
fn svd_matches_nalgebra_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &(m, n) in &[(8, 5), (5, 8), (20, 20), (64, 32), (1, 4)] {
        let a = random_matrix(m, n, &mut rng);
        let ours = svd(&a).unwrap().singular_values;
        let mut theirs: Vec<f64> = to_na(&a).singular_values().iter().copied().collect();
        theirs.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in ours.iter().zip(&theirs) {
            assert!((x - y).abs() <= 1e-10 * theirs[0], "{m}x{n}: {x} vs {y}");
        }
    }
}

#[test]
fn svd_invariants_on_many_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let m = rng.random_range(1..=64);
        let n = rng.random_range(1..=32);
        let a = random_matrix(m, n, &mut rng);
        let f = svd(&a).unwrap();
        assert!(orth_err(&f.u) <= 1e-9);
        assert!(orth_err(&f.v) <= 1e-9);
        assert!(f.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!(f.singular_values.iter().all(|&s| s >= 0.0));
        assert!((&f.recompose() - &a).norm() <= 1e-10 * a.norm());
    }
}

#[test]
fn conv_direct_sum_oracle() {
    let ones = Frame::from_fn(3, 3, |_, _| C64::new(1.0, 0.0));
    let k = ConvKernel2D::new(3, 3, vec![C64::new(1.0, 0.0); 9]).unwrap();
    let out = conv2d(&ones, &k).unwrap();
    assert_eq!(out.get(1, 1), C64::new(9.0, 0.0));
    assert_eq!(out.get(0, 0), C64::new(4.0, 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let f = Frame::from_fn(6, 7, |_, _| cn(&mut rng));
    let taps: Vec<C64> = (0..25).map(|_| cn(&mut rng)).collect();
    let k = ConvKernel2D::new(5, 5, taps.clone()).unwrap().with_bias(C64::new(0.3, -0.2));
    let out = conv2d(&f, &k).unwrap();
    for y in 0..6 {
        for x in 0..7 {
            let mut acc = C64::new(0.3, -0.2);
            for a in 0..5 {
                for b in 0..5 {
                    let (yy, xx) = (y as isize + a as isize - 2, x as isize + b as isize - 2);
                    if (0..6).contains(&yy) && (0..7).contains(&xx) {
                        acc += taps[a * 5 + b] * f.get(yy as usize, xx as usize);
                    }
                }
            }
            assert!((out.get(y, x) - acc).norm() < 1e-12);
        }
    }
}

#[test]
fn conv_movie_is_framewise() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let m = random_movie((4, 6, 6), &mut rng);
    let k = ConvKernel2D::new(3, 3, (0..9).map(|_| cn(&mut rng)).collect()).unwrap();
    let out = conv2d_movie(&m, &k).unwrap();
    for t in 0..4 {
        assert_eq!(out.frame_owned(t), conv2d(&m.frame_owned(t), &k).unwrap());
    }
    let id = ConvKernel2D::impulse(3, 3, C64::new(1.0, 0.0)).unwrap();
    assert_eq!(conv2d_movie(&m, &id).unwrap(), m);
    let twice = conv2d_movie(&m, &k.scaled(C64::new(2.0, 0.0))).unwrap();
    assert!((&twice - &out.scaled(2.0)).norm() < 1e-12 * out.norm());
    let z = conv2d_movie(&m, &ConvKernel2D::zeros(5, 5).unwrap()).unwrap();
    assert_eq!(z.norm(), 0.0);
}

#[test]
fn spectral_norm_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (m, n) = (5, 4);
    let h1 = random_matrix(m, m, &mut rng);
    let h2 = random_matrix(m, m, &mut rng);
    let gram = |l: &CMatrix, s: &CMatrix| {
        let mut ax = h1.matmul(l)?;
        ax += &h2.matmul(s)?;
        Ok((h1.adjoint_matmul(&ax)?, h2.adjoint_matmul(&ax)?))
    };
    let est = spectral_norm(gram, ((m, n), (m, n)), PowerIterOptions::default()).unwrap();
    // ‖[H1 H2]‖² = λ_max(H1H1ᴴ + H2H2ᴴ)
    let (a1, a2) = (to_na(&h1), to_na(&h2));
    let k = &a1 * a1.adjoint() + &a2 * a2.adjoint();
    let want = k.symmetric_eigenvalues().iter().cloned().fold(f64::MIN, f64::max);
    assert!((est - want).abs() <= 1e-5 * want, "{est} vs {want}");
}

proptest! {
    #[test]
    fn fold_unfold_round_trip(t in 1usize..5, h in 1usize..6, w in 1usize..6, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_movie((t, h, w), &mut rng);
        prop_assert_eq!(fold(&unfold(&m), m.shape()).unwrap(), m.clone());
        let x = random_matrix(h * w, t, &mut rng);
        prop_assert_eq!(unfold(&fold(&x, (t, h, w)).unwrap()), x);
    }

    #[test]
    fn conv_is_linear(seed in 0u64..1000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Frame::from_fn(5, 6, |_, _| cn(&mut rng));
        let y = Frame::from_fn(5, 6, |_, _| cn(&mut rng));
        let k = ConvKernel2D::new(3, 3, (0..9).map(|_| cn(&mut rng)).collect()).unwrap();
        let mix = Frame { height: 5, width: 6, data: x.data.iter().zip(&y.data).map(|(a, b)| a * alpha + b * beta).collect() };
        let lhs = conv2d(&mix, &k).unwrap();
        let (cx, cy) = (conv2d(&x, &k).unwrap(), conv2d(&y, &k).unwrap());
        for i in 0..30 {
            let rhs = cx.data[i] * alpha + cy.data[i] * beta;
            prop_assert!((lhs.data[i] - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
        }
    }
}
