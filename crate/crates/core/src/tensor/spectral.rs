//! Largest eigenvalue of `AᴴA` for `A = [H1, H2]` acting on stacked `(L, S)` pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CMatrix, C64};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct PowerIterOptions {
    pub rel_tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for PowerIterOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iters: 20_000,
            seed: 0x5EED,
        }
    }
}

/// Power iteration on the Hermitian operator `gram(L, S) = AᴴA·[L; S]`.
///
/// `dims` gives the shapes of the `L` and `S` blocks. Returns the Rayleigh
/// quotient once it changes by less than `rel_tol` between iterations.
pub fn spectral_norm<F>(
    gram: F,
    dims: ((usize, usize), (usize, usize)),
    opts: PowerIterOptions,
) -> Result<f64>
where
    F: Fn(&CMatrix, &CMatrix) -> Result<(CMatrix, CMatrix)>,
{
    let ((lr, lc), (sr, sc)) = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut draw = |r: usize, c: usize| {
        CMatrix::from_fn(r, c, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    };
    let mut l = draw(lr, lc);
    let mut s = draw(sr, sc);
    normalize_pair(&mut l, &mut s);

    let mut prev = f64::NAN;
    for _ in 0..opts.max_iters {
        let (gl, gs) = gram(&l, &s)?;
        let rayleigh = l.inner_re(&gl) + s.inner_re(&gs);
        let norm = (gl.norm_sq() + gs.norm_sq()).sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFinite("power iteration diverged".into()));
        }
        if norm == 0.0 {
            return Err(Error::Degenerate("AᴴA maps the probe to zero".into()));
        }
        if (rayleigh - prev).abs() <= opts.rel_tol * rayleigh.abs() {
            return Ok(rayleigh);
        }
        prev = rayleigh;
        l = gl.scaled(1.0 / norm);
        s = gs.scaled(1.0 / norm);
    }
    Err(Error::PowerIterationNoConvergence {
        iters: opts.max_iters,
    })
}

fn normalize_pair(l: &mut CMatrix, s: &mut CMatrix) {
    let n = (l.norm_sq() + s.norm_sq()).sqrt();
    *l = l.scaled(1.0 / n);
    *s = s.scaled(1.0 / n);
}
