//! Digital Butterworth high-pass design (analog prototype, prewarped bilinear
//! transform) and zero-phase temporal filtering of complex movies.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{MovieTensor, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WallFilterConfig {
    pub order: usize,
    /// Cutoff as a fraction of π rad/sample.
    pub cutoff: f64,
}

impl Default for WallFilterConfig {
    fn default() -> Self {
        Self {
            order: 6,
            cutoff: 0.2,
        }
    }
}

impl WallFilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::Config("filter order must be at least 1".into()));
        }
        if !(self.cutoff > 0.0 && self.cutoff < 1.0) {
            return Err(Error::Config(format!("cutoff must lie in (0, 1), got {}", self.cutoff)));
        }
        Ok(())
    }
}

/// Transfer function `B(z)/A(z)` with `a[0] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoeffs {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    /// Largest pole magnitude; sets how long start-up transients last.
    pub pole_radius: f64,
}

impl FilterCoeffs {
    /// `H(e^{jω})`.
    pub fn response(&self, omega: f64) -> C64 {
        let z_inv = Complex64::from_polar(1.0, -omega);
        let eval = |c: &[f64]| c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &x| acc * z_inv + x);
        eval(&self.b) / eval(&self.a)
    }

    pub fn order(&self) -> usize {
        self.a.len() - 1
    }

    /// Samples needed for a transient to decay by `1e-8`, at least `3·order`.
    pub fn settling_len(&self) -> usize {
        let decay = if self.pole_radius > 0.0 && self.pole_radius < 1.0 {
            (SETTLE_LEVEL.ln() / self.pole_radius.ln()).ceil() as usize
        } else {
            0
        };
        decay.max(3 * self.order())
    }
}

const SETTLE_LEVEL: f64 = 1e-8;

/// Polynomial with the given roots, highest power first.
fn poly(roots: &[C64]) -> Vec<C64> {
    let mut c = vec![C64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![C64::new(0.0, 0.0); c.len() + 1];
        for (i, &x) in c.iter().enumerate() {
            next[i] += x;
            next[i + 1] -= x * r;
        }
        c = next;
    }
    c
}

pub fn design_butterworth_highpass(cfg: &WallFilterConfig) -> Result<FilterCoeffs> {
    cfg.validate()?;
    let n = cfg.order;
    let warped = 2.0 * (std::f64::consts::FRAC_PI_2 * cfg.cutoff).tan();
    let poles: Vec<C64> = (0..n)
        .map(|k| {
            let theta = std::f64::consts::PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
            let proto = Complex64::from_polar(1.0, theta);
            let analog = warped / proto;
            (2.0 + analog) / (2.0 - analog)
        })
        .collect();
    let zeros = vec![C64::new(1.0, 0.0); n];
    let a: Vec<f64> = poly(&poles).iter().map(|c| c.re).collect();
    let b_raw: Vec<f64> = poly(&zeros).iter().map(|c| c.re).collect();
    let pole_radius = poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let mut coeffs = FilterCoeffs {
        b: b_raw,
        a,
        pole_radius,
    };
    let gain = coeffs.response(std::f64::consts::PI).norm();
    coeffs.b.iter_mut().for_each(|x| *x /= gain);
    Ok(coeffs)
}

/// Direct-form II transposed state giving a constant unit-input steady state.
fn steady_state_state(c: &FilterCoeffs) -> Vec<f64> {
    let n = c.order();
    let yss = c.b.iter().sum::<f64>() / c.a.iter().sum::<f64>();
    let mut z = vec![0.0; n];
    if n == 0 {
        return z;
    }
    z[n - 1] = c.b[n] - c.a[n] * yss;
    for i in (0..n - 1).rev() {
        z[i] = c.b[i + 1] - c.a[i + 1] * yss + z[i + 1];
    }
    z
}

fn lfilter(c: &FilterCoeffs, x: &[C64], zi: &[f64], scale: C64) -> Vec<C64> {
    let n = c.order();
    let mut z: Vec<C64> = zi.iter().map(|&v| scale * v).collect();
    let mut y = Vec::with_capacity(x.len());
    for &xi in x {
        let yi = c.b[0] * xi + if n > 0 { z[0] } else { C64::new(0.0, 0.0) };
        for i in 0..n {
            let next = if i + 1 < n { z[i + 1] } else { C64::new(0.0, 0.0) };
            z[i] = c.b[i + 1] * xi - c.a[i + 1] * yi + next;
        }
        y.push(yi);
    }
    y
}

/// Index into `x` extended by repeated mirror reflection about its end samples.
fn mirror_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let r = i.rem_euclid(period);
    if r < n as isize {
        r as usize
    } else {
        (period - r) as usize
    }
}

/// Forward-backward filtering of `x` extended by `pad` mirrored samples on each side.
pub(crate) fn filtfilt(c: &FilterCoeffs, x: &[C64], pad: usize) -> Vec<C64> {
    let zi = steady_state_state(c);
    let n = x.len();
    let ext: Vec<C64> = (-(pad as isize)..(n + pad) as isize)
        .map(|i| x[mirror_index(i, n)])
        .collect();

    let mut y = lfilter(c, &ext, &zi, ext[0]);
    y.reverse();
    let mut y = lfilter(c, &y, &zi, y[0]);
    y.reverse();
    y[pad..pad + x.len()].to_vec()
}

/// Zero-phase temporal high-pass applied independently to every pixel.
pub fn wall_filter(movie: &MovieTensor, cfg: &WallFilterConfig) -> Result<MovieTensor> {
    let coeffs = design_butterworth_highpass(cfg)?;
    let shape = movie.shape();
    let t = shape.frames;
    if t <= 3 * cfg.order {
        return Err(Error::Shape(format!(
            "wall filter of order {} needs more than {} frames, movie has {t}",
            cfg.order,
            3 * cfg.order
        )));
    }
    let pixels = shape.pixels();
    let pad = coeffs.settling_len();
    let data = movie.data();
    let filtered: Vec<Vec<C64>> = (0..pixels)
        .into_par_iter()
        .map(|p| {
            let series: Vec<C64> = (0..t).map(|k| data[k * pixels + p]).collect();
            filtfilt(&coeffs, &series, pad)
        })
        .collect();
    let mut out = vec![C64::new(0.0, 0.0); movie.data().len()];
    for (p, series) in filtered.iter().enumerate() {
        for (k, &v) in series.iter().enumerate() {
            out[k * pixels + p] = v;
        }
    }
    MovieTensor::new(shape, out)
}
