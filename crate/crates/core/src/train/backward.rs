//! Reverse-mode gradients through the unfolded network.
//!
//! Complex quantities carry gradients as `∂ℓ/∂Re + i·∂ℓ/∂Im`, so for a real
//! loss `dℓ = Re Σ conj(G)·dz`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{sigmoid, CoronaNetwork, ForwardTrace, LayerTrace, ThresholdMode};
use crate::prox::SvtOutput;
use crate::tensor::conv::{conv2d_movie_input_grad_accumulate, conv2d_movie_param_grad};
use crate::tensor::{CMatrix, MovieTensor};

/// Relative floor for `|σᵢ² − σⱼ²|` in the SVT derivative.
pub const SVD_GAP_CLAMP: f64 = 1e-8;
/// Singular value pairs closer than this (relative to `σ_max`) trigger a warning.
pub const SVD_DEGENERACY_WARN: f64 = 1e-6;

/// Treatment of the `max`/`mean` statistics inside the thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdGrad {
    /// Statistics are constants in the backward pass.
    #[default]
    StraightThrough,
    /// Differentiate through `max|·|` (at its argmax) and `mean|·|`.
    Exact,
}

/// Gradient of a real loss with respect to `X` and `τ` for `Y = SVT_τ(X)`.
///
/// Uses `Y = X·V·diag(h)·Vᴴ` with `h(σ) = max(0, 1 − τ/σ)`.
pub fn svt_backward(x: &CMatrix, out: &SvtOutput, tau: f64, grad_y: &CMatrix) -> Result<(CMatrix, f64)> {
    x.same_dims(grad_y)?;
    if x.rows() < x.cols() {
        // SVT commutes with the adjoint
        let xa = x.adjoint();
        let fa = SvtOutput {
            matrix: out.matrix.adjoint(),
            shrunk: out.shrunk.clone(),
            factors: crate::tensor::SvdFactors {
                u: out.factors.v.clone(),
                singular_values: out.factors.singular_values.clone(),
                v: out.factors.u.clone(),
            },
        };
        let (g, t) = svt_backward_tall(&xa, &fa, tau, &grad_y.adjoint())?;
        return Ok((g.adjoint(), t));
    }
    svt_backward_tall(x, out, tau, grad_y)
}

fn svt_backward_tall(x: &CMatrix, out: &SvtOutput, tau: f64, grad_y: &CMatrix) -> Result<(CMatrix, f64)> {
    let v = &out.factors.v;
    let sig = &out.factors.singular_values;
    let n = sig.len();
    let smax = sig.first().copied().unwrap_or(0.0);
    let h: Vec<f64> = sig
        .iter()
        .map(|&s| if s > tau && s > 0.0 { 1.0 - tau / s } else { 0.0 })
        .collect();

    // M = V diag(h) Vᴴ
    let vh = CMatrix::from_fn(n, n, |i, j| v[(i, j)] * h[j]);
    let m = vh.matmul(&v.adjoint())?;

    let k = x.adjoint_matmul(grad_y)?;
    let vkv = v.adjoint_matmul(&k.matmul(v)?)?;

    let floor = SVD_GAP_CLAMP * smax * smax;
    let mut warned = false;
    let mut q = CMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let gamma = if i == j {
                if h[i] > 0.0 {
                    tau / (2.0 * sig[i].powi(3))
                } else {
                    0.0
                }
            } else if h[i] > 0.0 && h[j] > 0.0 {
                // (h_i − h_j)/(σ_i² − σ_j²) simplifies when both values are active
                tau / (sig[i] * sig[j] * (sig[i] + sig[j]))
            } else if h[i] == 0.0 && h[j] == 0.0 {
                0.0
            } else {
                if !warned && (sig[i] - sig[j]).abs() < SVD_DEGENERACY_WARN * smax {
                    warn!(
                        "near-degenerate singular values {:.6e} and {:.6e} in SVT backward; gradient regularised",
                        sig[i], sig[j]
                    );
                    warned = true;
                }
                let diff = sig[i] * sig[i] - sig[j] * sig[j];
                let diff = if diff.abs() < floor { floor.copysign(diff) } else { diff };
                (h[i] - h[j]) / diff
            };
            q[(i, j)] = vkv[(i, j)] * gamma;
        }
    }
    let w = v.matmul(&q)?.matmul(&v.adjoint())?;
    let z = CMatrix::from_fn(n, n, |i, j| (w[(i, j)] + w[(j, i)].conj()) * 0.5);

    let mut gx = grad_y.matmul(&m)?;
    gx += &x.matmul(&z)?.scaled(2.0);

    let gtau: f64 = (0..n)
        .filter(|&i| h[i] > 0.0)
        .map(|i| -vkv[(i, i)].re / sig[i])
        .sum();
    Ok((gx, gtau))
}

/// Gradient with respect to `X` and `τ` for row soft thresholding `Y = T_τ(X)`.
pub fn row_threshold_backward(x: &CMatrix, norms: &[f64], tau: f64, grad_y: &CMatrix) -> Result<(CMatrix, f64)> {
    x.same_dims(grad_y)?;
    let rows = x.rows();
    // Re⟨G_row, x_row⟩ per row
    let mut inner = vec![0.0; rows];
    for j in 0..x.cols() {
        for ((acc, a), b) in inner.iter_mut().zip(grad_y.col(j)).zip(x.col(j)) {
            *acc += (a.conj() * b).re;
        }
    }
    let mut gtau = 0.0;
    let mut coef_g = vec![0.0; rows];
    let mut coef_x = vec![0.0; rows];
    for i in 0..rows {
        let r = norms[i];
        if r > tau && r > 0.0 {
            coef_g[i] = 1.0 - tau / r;
            coef_x[i] = tau / (r * r * r) * inner[i];
            gtau -= inner[i] / r;
        }
    }
    let mut gx = grad_y.clone();
    for j in 0..gx.cols() {
        let xc = x.col(j);
        for (i, g) in gx.col_mut(j).iter_mut().enumerate() {
            *g = *g * coef_g[i] + xc[i] * coef_x[i];
        }
    }
    Ok((gx, gtau))
}

/// Gradients of one layer: flat parameter gradient (layer slice) and input gradients.
pub(crate) struct LayerGrad {
    pub params: Vec<f64>,
    pub grad_l: MovieTensor,
    pub grad_s: MovieTensor,
}

#[allow(clippy::too_many_arguments)]
fn layer_backward(
    net: &CoronaNetwork,
    k: usize,
    d: &MovieTensor,
    l_in: &MovieTensor,
    s_in: &MovieTensor,
    tr: &LayerTrace,
    grad_l_out: &MovieTensor,
    grad_s_out: &MovieTensor,
    mode: ThresholdGrad,
) -> Result<LayerGrad> {
    let params = &net.layers[k];
    let shape = d.shape();
    let (mut g_gl, tau_l_grad) = {
        let (g, t) = svt_backward(&tr.gl.unfold(), &tr.svt, tr.thr_l, &grad_l_out.unfold())?;
        (g.fold(shape)?, t)
    };
    let (mut g_gs, tau_s_grad) = {
        let (g, t) = row_threshold_backward(&tr.gs.unfold(), &tr.gs_row_norms, tr.thr_s, &grad_s_out.unfold())?;
        (g.fold(shape)?, t)
    };

    let (mut glam_l, mut glam_s) = (0.0, 0.0);
    if let ThresholdMode::Learned = net.thresholds {
        let sl = sigmoid(params.lambda_l);
        let ss = sigmoid(params.lambda_s);
        glam_l = tau_l_grad * sl * (1.0 - sl) * net.a_l * tr.stats.max_l;
        glam_s = tau_s_grad * ss * (1.0 - ss) * net.a_s * tr.stats.mean_s;
        if mode == ThresholdGrad::Exact {
            let c = tau_l_grad * sl * net.a_l;
            if tr.stats.max_l > 0.0 {
                let i = tr.stats.argmax_l;
                let z = tr.gl.data()[i];
                g_gl.data_mut()[i] += z / z.norm() * c;
            }
            let c = tau_s_grad * ss * net.a_s / tr.gs.data().len() as f64;
            for (g, z) in g_gs.data_mut().iter_mut().zip(tr.gs.data()) {
                let a = z.norm();
                if a > 0.0 {
                    *g += z / a * c;
                }
            }
        }
    }

    // GL = P5*L + P3*S + P1*D, GS = P6*L + P4*S + P2*D
    let pairs: [(&MovieTensor, &MovieTensor); 6] = [
        (&g_gl, d),
        (&g_gs, d),
        (&g_gl, s_in),
        (&g_gs, s_in),
        (&g_gl, l_in),
        (&g_gs, l_in),
    ];
    let mut flat = Vec::with_capacity(params.param_count());
    for (kern, (g, input)) in params.kernels().into_iter().zip(pairs) {
        let cg = conv2d_movie_param_grad(g, input, kern);
        for t in &cg.taps {
            flat.push(t.re);
            flat.push(t.im);
        }
        flat.push(cg.bias.re);
        flat.push(cg.bias.im);
    }
    flat.push(glam_l);
    flat.push(glam_s);

    let mut grad_l = MovieTensor::zeros(shape);
    conv2d_movie_input_grad_accumulate(&g_gl, &params.p5, &mut grad_l);
    conv2d_movie_input_grad_accumulate(&g_gs, &params.p6, &mut grad_l);
    let mut grad_s = MovieTensor::zeros(shape);
    conv2d_movie_input_grad_accumulate(&g_gl, &params.p3, &mut grad_s);
    conv2d_movie_input_grad_accumulate(&g_gs, &params.p4, &mut grad_s);
    Ok(LayerGrad {
        params: flat,
        grad_l,
        grad_s,
    })
}

/// Gradient of the loss with respect to every network parameter, in the
/// order of [`CoronaNetwork::params_flat`], given `∂ℓ/∂L̂` and `∂ℓ/∂Ŝ`.
pub fn backward(
    net: &CoronaNetwork,
    trace: &ForwardTrace,
    grad_l: &MovieTensor,
    grad_s: &MovieTensor,
    mode: ThresholdGrad,
) -> Result<Vec<f64>> {
    if trace.layers.len() != net.depth() {
        return Err(Error::Shape("trace depth differs from network depth".into()));
    }
    let (lo, so) = trace.output();
    lo.same_shape(grad_l)?;
    so.same_shape(grad_s)?;
    let mut per_layer: Vec<Vec<f64>> = vec![Vec::new(); net.depth()];
    let mut gl = grad_l.clone();
    let mut gs = grad_s.clone();
    for k in (0..net.depth()).rev() {
        let (l_in, s_in) = &trace.states[k];
        let lg = layer_backward(net, k, &trace.d, l_in, s_in, &trace.layers[k], &gl, &gs, mode)?;
        per_layer[k] = lg.params;
        gl = lg.grad_l;
        gs = lg.grad_s;
    }
    let flat: Vec<f64> = per_layer.into_iter().flatten().collect();
    if flat.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("parameter gradient".into()));
    }
    Ok(flat)
}

