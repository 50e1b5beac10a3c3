//! Separable anisotropic Gaussian point-spread function.

use super::SimConfig;
use crate::tensor::{Frame, C64};

/// Unit-sum 1D Gaussian taps spanning `±⌈3σ⌉`.
pub fn gaussian_1d(sigma: f64) -> Vec<f64> {
    let half = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-half..=half)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Axial (rows) and lateral (columns) taps in pixel units.
pub fn psf_taps(cfg: &SimConfig) -> (Vec<f64>, Vec<f64>) {
    (
        gaussian_1d(cfg.psf_std_axial / cfg.pixel_pitch),
        gaussian_1d(cfg.psf_std_lateral / cfg.pixel_pitch),
    )
}

fn filter_axis(src: &[C64], h: usize, w: usize, taps: &[f64], along_rows: bool) -> Vec<C64> {
    let half = (taps.len() / 2) as isize;
    let mut out = vec![C64::new(0.0, 0.0); h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = C64::new(0.0, 0.0);
            for (i, &t) in taps.iter().enumerate() {
                let off = i as isize - half;
                let (yy, xx) = if along_rows {
                    (y as isize + off, x as isize)
                } else {
                    (y as isize, x as isize + off)
                };
                if yy < 0 || yy >= h as isize || xx < 0 || xx >= w as isize {
                    continue;
                }
                acc += src[yy as usize * w + xx as usize] * t;
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Blurs a frame with the PSF (zero padding outside the field).
pub fn apply_psf(frame: &Frame, cfg: &SimConfig) -> Frame {
    let (axial, lateral) = psf_taps(cfg);
    apply_separable(frame, &axial, &lateral)
}

pub(crate) fn apply_separable(frame: &Frame, axial: &[f64], lateral: &[f64]) -> Frame {
    let (h, w) = (frame.height, frame.width);
    let tmp = filter_axis(&frame.data, h, w, lateral, false);
    Frame {
        height: h,
        width: w,
        data: filter_axis(&tmp, h, w, axial, true),
    }
}
