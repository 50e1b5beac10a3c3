//! Non-learned clutter filters: rank-threshold SVD filtering and a temporal
//! Butterworth high-pass (wall) filter.

mod butterworth;

pub use butterworth::{design_butterworth_highpass, wall_filter, FilterCoeffs, WallFilterConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{svd, MovieTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvdFilterConfig {
    /// Number of leading singular components removed.
    pub cut_rank: usize,
}

/// Zeroes the `cut_rank` largest singular values of the Casorati matrix.
pub fn svd_filter(movie: &MovieTensor, cfg: &SvdFilterConfig) -> Result<MovieTensor> {
    let shape = movie.shape();
    let max_rank = shape.pixels().min(shape.frames);
    if cfg.cut_rank > max_rank {
        return Err(Error::Config(format!(
            "cut_rank {} exceeds min(H·W, T) = {max_rank}",
            cfg.cut_rank
        )));
    }
    let f = svd(&movie.unfold())?;
    let mut kept = f.singular_values.clone();
    kept.iter_mut().take(cfg.cut_rank).for_each(|s| *s = 0.0);
    f.recompose_with(&kept).fold(shape)
}
