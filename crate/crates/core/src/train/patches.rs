//! Overlapping 3D patches and their recombination by averaging.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{MovieShape, MovieTensor, C64};

/// One patch and its `(t, y, x)` origin in the source movie.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub origin: (usize, usize, usize),
    pub data: MovieTensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchConfig {
    /// `(frames, height, width)`.
    pub shape: MovieShape,
    pub overlap: f64,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self {
            shape: MovieShape::new(20, 32, 32),
            overlap: 0.5,
        }
    }
}

/// Start offsets along one axis: stride `⌊p·(1 − overlap)⌋` (at least 1), plus a
/// final start flush with the end when the stride leaves a remainder.
pub fn patch_origins(dim: usize, p: usize, overlap: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Config(format!("overlap must lie in [0, 1), got {overlap}")));
    }
    if p == 0 || p > dim {
        return Err(Error::Shape(format!("patch extent {p} does not fit axis of length {dim}")));
    }
    let stride = ((p as f64 * (1.0 - overlap)).floor() as usize).max(1);
    let mut out: Vec<usize> = (0..).map(|i| i * stride).take_while(|&o| o + p <= dim).collect();
    if out.last().copied().unwrap_or(0) + p < dim {
        out.push(dim - p);
    }
    Ok(out)
}

/// All patch origins `(t, y, x)` for a movie of the given shape, time-major.
pub fn patch_grid(shape: MovieShape, cfg: &PatchConfig) -> Result<Vec<(usize, usize, usize)>> {
    let ps = cfg.shape;
    let ts = patch_origins(shape.frames, ps.frames, cfg.overlap)?;
    let ys = patch_origins(shape.height, ps.height, cfg.overlap)?;
    let xs = patch_origins(shape.width, ps.width, cfg.overlap)?;
    let mut out = Vec::with_capacity(ts.len() * ys.len() * xs.len());
    for &t in &ts {
        for &y in &ys {
            for &x in &xs {
                out.push((t, y, x));
            }
        }
    }
    Ok(out)
}

pub fn extract_patches(movie: &MovieTensor, cfg: &PatchConfig) -> Result<Vec<Patch>> {
    let ps = cfg.shape;
    Ok(patch_grid(movie.shape(), cfg)?
        .into_iter()
        .map(|(t0, y0, x0)| Patch {
            origin: (t0, y0, x0),
            data: MovieTensor::from_fn(ps, |t, y, x| movie.get(t0 + t, y0 + y, x0 + x)),
        })
        .collect())
}

/// Averages overlapping patches back into a movie of the given shape.
pub fn recombine_patches(patches: &[Patch], shape: MovieShape) -> Result<MovieTensor> {
    let mut acc = vec![C64::new(0.0, 0.0); shape.len()];
    let mut count = vec![0u32; shape.len()];
    let (h, w) = (shape.height, shape.width);
    for p in patches {
        let ps = p.data.shape();
        let (t0, y0, x0) = p.origin;
        if t0 + ps.frames > shape.frames || y0 + ps.height > h || x0 + ps.width > w {
            return Err(Error::Shape(format!("patch at {:?} of shape {ps} exceeds movie {shape}", p.origin)));
        }
        for t in 0..ps.frames {
            for y in 0..ps.height {
                for x in 0..ps.width {
                    let i = ((t0 + t) * h + y0 + y) * w + x0 + x;
                    acc[i] += p.data.get(t, y, x);
                    count[i] += 1;
                }
            }
        }
    }
    if let Some(i) = count.iter().position(|&c| c == 0) {
        let (t, y, x) = (i / (h * w), (i / w) % h, i % w);
        return Err(Error::Shape(format!("voxel ({t}, {y}, {x}) is not covered by any patch")));
    }
    let data = acc
        .into_iter()
        .zip(count)
        .map(|(a, c)| if c == 1 { a } else { a / c as f64 })
        .collect();
    MovieTensor::new(shape, data)
}
