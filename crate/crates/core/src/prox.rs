//! Proximal operators of the nuclear norm and the mixed ℓ1,2 norm, and the
//! convex L+S objective
//!
//! `½‖D − (H1·L + H2·S)‖²_F + λ1‖L‖_* + λ2‖S‖_{1,2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::MeasurementOps;
use crate::tensor::{svd, CMatrix, SvdFactors};

/// Relative level below which singular values count as zero when reporting rank.
pub const RANK_TOL: f64 = 1e-12;

/// Regularisation weights of the nuclear and mixed norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for RegWeights {
    fn default() -> Self {
        Self {
            lambda1: 0.02,
            lambda2: 0.001,
        }
    }
}

impl RegWeights {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        let w = Self { lambda1, lambda2 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) || !self.lambda1.is_finite() || !self.lambda2.is_finite() {
            return Err(Error::Config(format!(
                "regularisation weights must be finite and nonnegative, got ({}, {})",
                self.lambda1, self.lambda2
            )));
        }
        Ok(())
    }
}

/// Result of singular value thresholding, with the factors it was built from.
#[derive(Debug, Clone)]
pub struct SvtOutput {
    pub matrix: CMatrix,
    /// Shrunk singular values `max(0, σ − α)`.
    pub shrunk: Vec<f64>,
    pub factors: SvdFactors,
}

impl SvtOutput {
    /// Number of shrunk singular values above `RANK_TOL · σ_max`.
    pub fn rank(&self) -> usize {
        let smax = self.factors.singular_values.first().copied().unwrap_or(0.0);
        self.shrunk.iter().filter(|&&s| s > RANK_TOL * smax).count()
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.shrunk.iter().sum()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Config(format!("threshold must be finite and nonnegative, got {alpha}")));
    }
    Ok(())
}

/// `U · diag(max(0, σ − α)) · Vᴴ`, keeping the intermediate factors.
pub fn svt_full(mat: &CMatrix, alpha: f64) -> Result<SvtOutput> {
    check_alpha(alpha)?;
    let factors = svd(mat)?;
    let shrunk: Vec<f64> = factors
        .singular_values
        .iter()
        .map(|&s| (s - alpha).max(0.0))
        .collect();
    let matrix = factors.recompose_with(&shrunk);
    Ok(SvtOutput {
        matrix,
        shrunk,
        factors,
    })
}

/// Singular value thresholding: the prox of `α‖·‖_*`.
pub fn svt(mat: &CMatrix, alpha: f64) -> Result<CMatrix> {
    Ok(svt_full(mat, alpha)?.matrix)
}

/// Per-row scale factor `max(0, 1 − α/‖row‖₂)`; zero rows map to zero.
pub(crate) fn row_scale(norm: f64, alpha: f64) -> f64 {
    if norm == 0.0 {
        0.0
    } else {
        (1.0 - alpha / norm).max(0.0)
    }
}

/// Row norms of a matrix (rows are pixels in Casorati form).
pub fn row_norms(mat: &CMatrix) -> Vec<f64> {
    let mut acc = vec![0.0; mat.rows()];
    for j in 0..mat.cols() {
        for (a, z) in acc.iter_mut().zip(mat.col(j)) {
            *a += z.norm_sqr();
        }
    }
    acc.into_iter().map(f64::sqrt).collect()
}

/// Mixed ℓ1,2 soft thresholding: each row `x` becomes `max(0, 1 − α/‖x‖₂)·x`.
pub fn row_soft_threshold(mat: &CMatrix, alpha: f64) -> Result<CMatrix> {
    check_alpha(alpha)?;
    let scales: Vec<f64> = row_norms(mat).into_iter().map(|n| row_scale(n, alpha)).collect();
    let mut out = mat.clone();
    for j in 0..out.cols() {
        for (z, &s) in out.col_mut(j).iter_mut().zip(&scales) {
            *z *= s;
        }
    }
    Ok(out)
}

/// Sum of singular values.
pub fn nuclear_norm(mat: &CMatrix) -> Result<f64> {
    Ok(svd(mat)?.singular_values.iter().sum())
}

/// Sum of row ℓ2 norms.
pub fn l12_norm(mat: &CMatrix) -> f64 {
    row_norms(mat).iter().sum()
}

/// Data-fidelity residual `H1·L + H2·S − D`.
pub fn residual(d: &CMatrix, l: &CMatrix, s: &CMatrix, ops: &MeasurementOps) -> Result<CMatrix> {
    let mut r = ops.h1.apply(l)?;
    let h2s = ops.h2.apply(s)?;
    r.same_dims(&h2s)?;
    r.same_dims(d)?;
    r += &h2s;
    r -= d;
    Ok(r)
}

/// Evaluates the L+S objective.
pub fn objective(
    d: &CMatrix,
    l: &CMatrix,
    s: &CMatrix,
    ops: &MeasurementOps,
    w: &RegWeights,
) -> Result<f64> {
    w.validate()?;
    let r = residual(d, l, s, ops)?;
    Ok(0.5 * r.norm_sq() + w.lambda1 * nuclear_norm(l)? + w.lambda2 * l12_norm(s))
}
