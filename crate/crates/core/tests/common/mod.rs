#![allow(dead_code)]

use corona_core::net::{forward, forward_traced, init_random, CoronaNetwork};
use corona_core::tensor::{MovieTensor, C64};
use corona_core::train::{LossWeights, Provenance, TrainPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn cn(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

pub fn random_movie(shape: (usize, usize, usize), rng: &mut ChaCha8Rng) -> MovieTensor {
    MovieTensor::from_fn(shape, |_, _, _| cn(rng))
}

pub fn pair_loss(net: &CoronaNetwork, p: &TrainPair, w: LossWeights) -> f64 {
    let (l, s) = forward(&p.d, net).unwrap();
    w.w_s * (&s - &p.s).norm_sq() + w.w_l * (&l - &p.l).norm_sq()
}

/// Central differences of the single-pair loss over every flat parameter.
pub fn fd_gradient(net: &CoronaNetwork, p: &TrainPair, w: LossWeights, h: f64) -> Vec<f64> {
    let base = net.params_flat();
    let mut probe = net.clone();
    (0..base.len())
        .map(|i| {
            let mut v = base.clone();
            v[i] = base[i] + h;
            probe.set_params_flat(&v).unwrap();
            let up = pair_loss(&probe, p, w);
            v[i] = base[i] - h;
            probe.set_params_flat(&v).unwrap();
            let down = pair_loss(&probe, p, w);
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative margin kept between every singular value, the SVT threshold, row
/// norms and the row threshold, so small perturbations never cross a kink.
pub const KINK_MARGIN: f64 = 1e-2;

/// A random network and data pair whose pre-activations have separated
/// singular values, no value near a threshold, and a unique `max|GL|`.
/// Returns `None` when the draw violates any of these.
pub fn gradcheck_instance(seed: u64, shape: (usize, usize, usize), depth: usize) -> Option<(CoronaNetwork, TrainPair)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = init_random(depth, 0.3, &mut rng).unwrap();
    for layer in &mut net.layers {
        layer.lambda_l = rng.random_range(-1.0..1.0);
        layer.lambda_s = rng.random_range(-1.0..1.0);
        for k in layer.kernels_mut() {
            k.bias = cn(&mut rng) * 0.1;
        }
    }
    // threshold scale chosen so the SVT cut falls inside the spectrum
    net.a_l = 3.0;
    let d = random_movie(shape, &mut rng);
    let l = random_movie(shape, &mut rng);
    let s = random_movie(shape, &mut rng);
    let trace = forward_traced(&d, &net).ok()?;
    for tr in &trace.layers {
        let sig = &tr.svt.factors.singular_values;
        let smax = sig[0];
        if sig.windows(2).any(|w| w[0] - w[1] < KINK_MARGIN * smax) {
            return None;
        }
        if sig.iter().any(|&x| (x - tr.thr_l).abs() < KINK_MARGIN * smax) {
            return None;
        }
        let rmax = tr.gs_row_norms.iter().cloned().fold(0.0, f64::max);
        if tr.gs_row_norms.iter().any(|&r| (r - tr.thr_s).abs() < KINK_MARGIN * rmax) {
            return None;
        }
        let mut mags: Vec<f64> = tr.gl.data().iter().map(|z| z.norm()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        if mags[1] > (1.0 - KINK_MARGIN) * mags[0] {
            return None;
        }
    }
    Some((
        net,
        TrainPair {
            d,
            l,
            s,
            provenance: Provenance::Simulated,
        },
    ))
}

/// Worst ratio `|a − f| / (atol + rtol·|f|)`; at most 1 means every entry passes.
pub fn grad_mismatch(analytic: &[f64], fd: &[f64], rtol: f64, atol: f64) -> f64 {
    analytic
        .iter()
        .zip(fd)
        .map(|(a, f)| (a - f).abs() / (atol + rtol * f.abs()))
        .fold(0.0, f64::max)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> corona_core::CMatrix {
    corona_core::CMatrix::from_fn(rows, cols, |_, _| cn(rng))
}

pub fn to_na(m: &corona_core::CMatrix) -> nalgebra::DMatrix<C64> {
    nalgebra::DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// `D = L* + S*` with rank-2 `L*` and 5% of pixels carrying `S*`.
pub fn synthetic_ls(seed: u64, shape: (usize, usize, usize)) -> (MovieTensor, MovieTensor, MovieTensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t, h, w) = shape;
    let px = h * w;
    let u: Vec<[C64; 2]> = (0..px).map(|_| [cn(&mut rng), cn(&mut rng)]).collect();
    let v: Vec<[C64; 2]> = (0..t).map(|_| [cn(&mut rng), cn(&mut rng)]).collect();
    let l = MovieTensor::from_fn(shape, |f, y, x| {
        let p = y * w + x;
        (u[p][0] * v[f][0].conj() + u[p][1] * v[f][1].conj()) * std::f64::consts::FRAC_1_SQRT_2
    });
    let n_active = ((px as f64) * 0.05).round().max(1.0) as usize;
    let mut active = vec![false; px];
    let mut placed = 0;
    while placed < n_active {
        let p = rng.random_range(0..px);
        if !active[p] {
            active[p] = true;
            placed += 1;
        }
    }
    let s = MovieTensor::from_fn(shape, |_, y, x| if active[y * w + x] { cn(&mut rng) * 2.0 } else { C64::new(0.0, 0.0) });
    let d = &l + &s;
    (d, l, s)
}

/// Simulated `(D, L, S)` training pairs of the given `(frames, height, width)`.
pub fn sim_pairs(count: usize, shape: (usize, usize, usize), seed: u64) -> Vec<TrainPair> {
    let cfg = corona_core::sim::SimConfig {
        frames: shape.0,
        height: shape.1,
        width: shape.2,
        seed,
        ..Default::default()
    };
    corona_core::sim::simulate_dataset(&cfg, count)
        .unwrap()
        .into_iter()
        .map(|s| TrainPair::new(s.d, s.l, s.s, Provenance::Simulated).unwrap())
        .collect()
}
