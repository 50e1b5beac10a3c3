//! Tissue texture: smooth random envelope with jittered phase, deformed frame
//! to frame by a bank of randomly drifting flow filters.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::bubbles::complex_normal;
use super::SimConfig;
use crate::error::{Error, Result};
use crate::tensor::{Frame, C64};

/// Side length of each flow filter and of the tiling blocks.
pub const FLOW_SIZE: usize = 4;

/// Standard deviation (pixels) of the 11×11 Gaussian low-pass.
pub const TISSUE_LPF_SIGMA: f64 = 2.0;

/// Nonnegative `4×4` kernels, each summing to one, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowFilters {
    pub kernels: Vec<[f64; FLOW_SIZE * FLOW_SIZE]>,
}

impl FlowFilters {
    /// `count` uniform (box) kernels.
    pub fn uniform(count: usize) -> Self {
        let w = 1.0 / (FLOW_SIZE * FLOW_SIZE) as f64;
        Self {
            kernels: vec![[w; FLOW_SIZE * FLOW_SIZE]; count],
        }
    }

    /// `count` copies of the impulse that reproduces its input.
    pub fn identity(count: usize) -> Self {
        let mut k = [0.0; FLOW_SIZE * FLOW_SIZE];
        k[FLOW_SIZE + 1] = 1.0;
        Self {
            kernels: vec![k; count],
        }
    }

    /// Perturb with `N(0, std)`, clamp below at `floor`, renormalise to unit sum.
    pub fn update<R: Rng + ?Sized>(&mut self, std: f64, floor: f64, rng: &mut R) {
        if std <= 0.0 {
            return;
        }
        let nd = Normal::new(0.0, std).expect("finite flow perturbation std");
        for k in &mut self.kernels {
            for v in k.iter_mut() {
                *v = (*v + nd.sample(rng)).max(floor);
            }
            let sum: f64 = k.iter().sum();
            k.iter_mut().for_each(|v| *v /= sum);
        }
    }
}

/// Real Gaussian bump `exp(−½((x−cx)²/sx² + (y−cy)²/sy²))` summed over `bumps`.
fn bump_sum(height: usize, width: usize, bumps: &[(f64, f64, f64, f64)]) -> Vec<f64> {
    let mut out = vec![0.0; height * width];
    for &(cy, cx, sy, sx) in bumps {
        for y in 0..height {
            let dy = (y as f64 - cy) / sy;
            for x in 0..width {
                let dx = (x as f64 - cx) / sx;
                out[y * width + x] += (-0.5 * (dx * dx + dy * dy)).exp();
            }
        }
    }
    out
}

/// Unit-sum `size×size` Gaussian taps, row-major.
pub(crate) fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size * size)
        .map(|i| {
            let dy = (i / size) as f64 - half;
            let dx = (i % size) as f64 - half;
            (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Centred real correlation with zero padding.
fn lowpass(frame: &Frame, taps: &[f64], size: usize) -> Frame {
    let half = (size / 2) as isize;
    let (h, w) = (frame.height as isize, frame.width as isize);
    Frame::from_fn(frame.height, frame.width, |y, x| {
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..size as isize {
            let yy = y as isize + a - half;
            if yy < 0 || yy >= h {
                continue;
            }
            for b in 0..size as isize {
                let xx = x as isize + b - half;
                if xx < 0 || xx >= w {
                    continue;
                }
                acc += frame.data[(yy * w + xx) as usize] * taps[(a * size as isize + b) as usize];
            }
        }
        acc
    })
}

/// Builds `T = B·e^{jθ}` with `B = |lowpass(bumps ⊙ field)|` and the given per-pixel phases.
pub fn compose_tissue(bumps: &[f64], field: &Frame, phase: &[f64], lpf_size: usize) -> Result<Frame> {
    let n = field.height * field.width;
    if bumps.len() != n || phase.len() != n {
        return Err(Error::Shape("tissue inputs must match the frame size".into()));
    }
    let weighted = Frame {
        height: field.height,
        width: field.width,
        data: field.data.iter().zip(bumps).map(|(z, b)| z * b).collect(),
    };
    let smooth = lowpass(&weighted, &gaussian_taps(lpf_size, TISSUE_LPF_SIGMA), lpf_size);
    Ok(Frame {
        height: field.height,
        width: field.width,
        data: smooth
            .data
            .iter()
            .zip(phase)
            .map(|(z, &th)| C64::from_polar(z.norm(), th))
            .collect(),
    })
}

/// Random initial tissue frame.
pub fn gen_tissue_base<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Frame {
    let (h, w) = (cfg.height, cfg.width);
    let bumps: Vec<(f64, f64, f64, f64)> = (0..cfg.tissue_gaussians)
        .map(|_| {
            let cy = rng.random::<f64>() * h as f64;
            let cx = rng.random::<f64>() * w as f64;
            let sy = rng.random_range(0.1..=0.4) * h as f64;
            let sx = rng.random_range(0.1..=0.4) * w as f64;
            (cy, cx, sy, sx)
        })
        .collect();
    let envelope = bump_sum(h, w, &bumps);
    let field = Frame::from_fn(h, w, |_, _| complex_normal(rng));
    let (lo, hi) = cfg.phase_mean_range_deg;
    let alpha = if hi > lo { rng.random_range(lo..=hi) } else { lo }.to_radians();
    let phase: Vec<f64> = if cfg.phase_std_deg > 0.0 {
        let nd = Normal::new(alpha, cfg.phase_std_deg.to_radians()).expect("finite phase std");
        (0..h * w).map(|_| nd.sample(rng)).collect()
    } else {
        vec![alpha; h * w]
    };
    compose_tissue(&envelope, &field, &phase, cfg.tissue_lpf).expect("sizes agree by construction")
}

/// Correlation with a `4×4` kernel anchored at `(1, 1)`, replicating edge pixels.
pub fn flow_correlate(frame: &Frame, kernel: &[f64; FLOW_SIZE * FLOW_SIZE]) -> Frame {
    let (h, w) = (frame.height as isize, frame.width as isize);
    Frame::from_fn(frame.height, frame.width, |y, x| {
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..FLOW_SIZE as isize {
            let yy = (y as isize + a - 1).clamp(0, h - 1);
            for b in 0..FLOW_SIZE as isize {
                let k = kernel[(a * FLOW_SIZE as isize + b) as usize];
                if k == 0.0 {
                    continue;
                }
                let xx = (x as isize + b - 1).clamp(0, w - 1);
                acc += frame.data[(yy * w + xx) as usize] * k;
            }
        }
        acc
    })
}

/// Tiles the frame in `4×4` blocks, each copied from the candidate named in `choice`
/// (row-major over blocks).
pub fn assemble_blocks(candidates: &[Frame], choice: &[usize]) -> Frame {
    let (h, w) = (candidates[0].height, candidates[0].width);
    let bw = w.div_ceil(FLOW_SIZE);
    Frame::from_fn(h, w, |y, x| {
        let c = choice[(y / FLOW_SIZE) * bw + x / FLOW_SIZE];
        candidates[c].data[y * w + x]
    })
}

/// One deformation step. Filters are updated first, then applied.
pub fn deform_tissue<R: Rng + ?Sized>(
    prev: &Frame,
    filters: &mut FlowFilters,
    cfg: &SimConfig,
    rng: &mut R,
) -> Frame {
    filters.update(cfg.flow_perturb_std, cfg.flow_floor, rng);
    let candidates: Vec<Frame> = filters.kernels.iter().map(|k| flow_correlate(prev, k)).collect();
    let blocks = prev.height.div_ceil(FLOW_SIZE) * prev.width.div_ceil(FLOW_SIZE);
    let choice: Vec<usize> = (0..blocks).map(|_| rng.random_range(0..candidates.len())).collect();
    assemble_blocks(&candidates, &choice)
}
