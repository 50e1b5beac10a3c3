//! Binary 8-bit PGM (P5) output.

use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::Image;

use super::atomic_write;

/// Maps `[lo, hi]` linearly onto `0..=255`, clamping outside values.
pub fn encode_pgm(img: &Image, lo: f64, hi: f64) -> Result<Vec<u8>> {
    if !(hi > lo) {
        return Err(Error::Config(format!("PGM range needs hi > lo, got [{lo}, {hi}]")));
    }
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&p| {
        let v = ((p - lo) / (hi - lo)).clamp(0.0, 1.0);
        if v.is_nan() { 0 } else { (v * 255.0).round() as u8 }
    }));
    Ok(out)
}

pub fn write_pgm(img: &Image, lo: f64, hi: f64, path: &Path) -> Result<()> {
    atomic_write(path, &encode_pgm(img, lo, hi)?)
}
