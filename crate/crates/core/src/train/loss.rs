use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::MovieTensor;

/// Weights of the sparse and low-rank error terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub w_s: f64,
    pub w_l: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { w_s: 0.5, w_l: 0.5 }
    }
}

/// `(w_S/N)·Σ‖Ŝᵢ − Sᵢ‖² + (w_L/N)·Σ‖L̂ᵢ − Lᵢ‖²` over a batch of `N` pairs.
pub fn mse_loss(
    s_pred: &[MovieTensor],
    l_pred: &[MovieTensor],
    s_tgt: &[MovieTensor],
    l_tgt: &[MovieTensor],
    w: LossWeights,
) -> Result<f64> {
    let n = s_pred.len();
    if n == 0 || l_pred.len() != n || s_tgt.len() != n || l_tgt.len() != n {
        return Err(Error::Shape("loss needs equally sized, nonempty batches".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        s_pred[i].same_shape(&s_tgt[i])?;
        l_pred[i].same_shape(&l_tgt[i])?;
        total += w.w_s * (&s_pred[i] - &s_tgt[i]).norm_sq() + w.w_l * (&l_pred[i] - &l_tgt[i]).norm_sq();
    }
    Ok(total / n as f64)
}

/// One pair's loss contribution and its gradients `(∂ℓ/∂L̂, ∂ℓ/∂Ŝ)` for a batch of size `n`.
pub fn pair_loss_grad(
    l_pred: &MovieTensor,
    s_pred: &MovieTensor,
    l_tgt: &MovieTensor,
    s_tgt: &MovieTensor,
    w: LossWeights,
    n: usize,
) -> Result<(f64, MovieTensor, MovieTensor)> {
    l_pred.same_shape(l_tgt)?;
    s_pred.same_shape(s_tgt)?;
    let rl = l_pred - l_tgt;
    let rs = s_pred - s_tgt;
    let n = n as f64;
    let loss = (w.w_s * rs.norm_sq() + w.w_l * rl.norm_sq()) / n;
    Ok((loss, rl.scaled(2.0 * w.w_l / n), rs.scaled(2.0 * w.w_s / n)))
}
