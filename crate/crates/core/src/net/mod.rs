//! The unfolded L+S network.
//!
//! Layer `k` maps `(L, S)` with data `D` to
//!
//! ```text
//! GL = P5*L + P3*S + P1*D        L⁺ = SVT_{thr_L}(GL)
//! GS = P6*L + P4*S + P2*D        S⁺ = T_{thr_S}(GS)
//! ```
//!
//! where `*` is per-frame complex 2D correlation and the thresholds adapt to
//! the pre-activations: `thr_L = σ(λ_L)·a_L·max|GL|`, `thr_S = σ(λ_S)·a_S·mean|GS|`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox::{row_norms, row_scale, svt_full, SvtOutput};
use crate::tensor::conv::conv2d_movie_accumulate;
use crate::tensor::{conv2d_movie, CMatrix, ConvKernel2D, MovieTensor, C64};

pub use crate::io::{load_weights, save_weights};

pub const DEFAULT_A_L: f64 = 0.4;
pub const DEFAULT_A_S: f64 = 1.8;
pub const DEFAULT_LAYERS: usize = 10;
/// Threshold logit used by [`init_from_ista`]; `σ(−4) ≈ 0.018`.
pub const INIT_LOGIT: f64 = -4.0;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Kernel side for zero-based layer `k`: 5 for the first three layers, 3 after.
pub fn kernel_size_for_layer(k: usize) -> usize {
    if k < 3 {
        5
    } else {
        3
    }
}

/// Six kernels and two threshold logits of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub p1: ConvKernel2D,
    pub p2: ConvKernel2D,
    pub p3: ConvKernel2D,
    pub p4: ConvKernel2D,
    pub p5: ConvKernel2D,
    pub p6: ConvKernel2D,
    pub lambda_l: f64,
    pub lambda_s: f64,
}

impl LayerParams {
    pub fn zeros(size: usize) -> Result<Self> {
        let z = ConvKernel2D::zeros(size, size)?;
        Ok(Self {
            p1: z.clone(),
            p2: z.clone(),
            p3: z.clone(),
            p4: z.clone(),
            p5: z.clone(),
            p6: z,
            lambda_l: 0.0,
            lambda_s: 0.0,
        })
    }

    pub fn kernels(&self) -> [&ConvKernel2D; 6] {
        [&self.p1, &self.p2, &self.p3, &self.p4, &self.p5, &self.p6]
    }

    pub fn kernels_mut(&mut self) -> [&mut ConvKernel2D; 6] {
        [
            &mut self.p1,
            &mut self.p2,
            &mut self.p3,
            &mut self.p4,
            &mut self.p5,
            &mut self.p6,
        ]
    }

    /// Real parameter count: taps and bias as (re, im) pairs, plus two logits.
    pub fn param_count(&self) -> usize {
        self.kernels().iter().map(|k| 2 * (k.taps().len() + 1)).sum::<usize>() + 2
    }

    pub fn is_finite(&self) -> bool {
        self.lambda_l.is_finite()
            && self.lambda_s.is_finite()
            && self
                .kernels()
                .iter()
                .all(|k| k.bias.is_finite() && k.taps().iter().all(|t| t.is_finite()))
    }
}

/// How layer thresholds are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum ThresholdMode {
    /// `σ(λ)·a·stat` from the pre-activations.
    #[default]
    Learned,
    /// Fixed values in every layer; logits are ignored.
    Pinned { thr_l: f64, thr_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoronaNetwork {
    pub layers: Vec<LayerParams>,
    pub a_l: f64,
    pub a_s: f64,
    #[serde(default)]
    pub thresholds: ThresholdMode,
}

impl CoronaNetwork {
    /// `k` layers with zero kernels and zero logits on the standard kernel schedule.
    pub fn zeros(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        Ok(Self {
            layers: (0..k)
                .map(|i| LayerParams::zeros(kernel_size_for_layer(i)))
                .collect::<Result<_>>()?,
            a_l: DEFAULT_A_L,
            a_s: DEFAULT_A_S,
            thresholds: ThresholdMode::Learned,
        })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerParams::param_count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        if !(self.a_l >= 0.0 && self.a_s >= 0.0) {
            return Err(Error::Config("threshold scales must be nonnegative".into()));
        }
        if let Some(i) = self.layers.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFinite(format!("layer {i} has non-finite parameters")));
        }
        Ok(())
    }

    /// Flattened real parameter vector. Per layer: `p1..p6` each as
    /// `re, im` per tap then bias `re, im`; then `λ_L`, `λ_S`.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            for k in layer.kernels() {
                for t in k.taps() {
                    out.push(t.re);
                    out.push(t.im);
                }
                out.push(k.bias.re);
                out.push(k.bias.im);
            }
            out.push(layer.lambda_l);
            out.push(layer.lambda_s);
        }
        out
    }

    /// Inverse of [`params_flat`](Self::params_flat).
    pub fn set_params_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        let mut next = || it.next().expect("length checked");
        for layer in &mut self.layers {
            for k in layer.kernels_mut() {
                for t in k.taps_mut() {
                    *t = C64::new(next(), next());
                }
                k.bias = C64::new(next(), next());
            }
            layer.lambda_l = next();
            layer.lambda_s = next();
        }
        Ok(())
    }
}

/// Network whose forward pass is `k` proximal-gradient iterations with
/// identity measurements and step `1/lipschitz`.
pub fn init_from_ista(k: usize, lipschitz: f64) -> Result<CoronaNetwork> {
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return Err(Error::Config(format!("Lipschitz constant must be positive, got {lipschitz}")));
    }
    let mut net = CoronaNetwork::zeros(k)?;
    let step = 1.0 / lipschitz;
    for (i, layer) in net.layers.iter_mut().enumerate() {
        let n = kernel_size_for_layer(i);
        let imp = |c: f64| ConvKernel2D::impulse(n, n, C64::new(c, 0.0));
        layer.p1 = imp(step)?;
        layer.p2 = imp(step)?;
        layer.p3 = imp(-step)?;
        layer.p4 = imp(1.0 - step)?;
        layer.p5 = imp(1.0 - step)?;
        layer.p6 = imp(-step)?;
        layer.lambda_l = INIT_LOGIT;
        layer.lambda_s = INIT_LOGIT;
    }
    Ok(net)
}

/// [`init_from_ista`] with every tap of each kernel perturbed by uniform noise of
/// `±rel` times the kernel's centre-tap magnitude (real and imaginary parts).
pub fn init_from_ista_noisy<R: Rng + ?Sized>(k: usize, lipschitz: f64, rel: f64, rng: &mut R) -> Result<CoronaNetwork> {
    let mut net = init_from_ista(k, lipschitz)?;
    if rel > 0.0 {
        for layer in &mut net.layers {
            for kern in layer.kernels_mut() {
                let c = kern.tap(kern.kh() / 2, kern.kw() / 2).norm();
                let amp = rel * c;
                for t in kern.taps_mut() {
                    *t += C64::new(rng.random_range(-amp..=amp), rng.random_range(-amp..=amp));
                }
            }
        }
    }
    Ok(net)
}

/// Sets each layer's logits so that, averaged over `data`, its adaptive
/// thresholds equal the fixed solver thresholds `λ1/L_f` and `λ2/L_f`.
/// Layers are calibrated in order since later statistics depend on earlier ones.
pub fn calibrate_logits(
    net: &mut CoronaNetwork,
    data: &[&MovieTensor],
    weights: crate::prox::RegWeights,
    lipschitz: f64,
) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Config("calibration needs at least one sample".into()));
    }
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return Err(Error::Config(format!("Lipschitz constant must be positive, got {lipschitz}")));
    }
    let logit = |p: f64| {
        if p >= 1.0 {
            log::warn!("calibration target {p:.3} exceeds the threshold range; clamping");
        }
        let p = p.clamp(1e-12, 1.0 - 1e-12);
        (p / (1.0 - p)).ln()
    };
    let n = data.len() as f64;
    for k in 0..net.depth() {
        let (mut max_l, mut mean_s) = (0.0, 0.0);
        for d in data {
            let tr = forward_traced(d, net)?;
            max_l += tr.layers[k].stats.max_l / n;
            mean_s += tr.layers[k].stats.mean_s / n;
        }
        if !(max_l > 0.0) || !(mean_s > 0.0) {
            return Err(Error::Degenerate(format!("layer {k} pre-activations vanish on the calibration data")));
        }
        net.layers[k].lambda_l = logit(weights.lambda1 / lipschitz / (net.a_l * max_l));
        net.layers[k].lambda_s = logit(weights.lambda2 / lipschitz / (net.a_s * mean_s));
    }
    Ok(())
}

/// Small complex-normal taps (std `scale`) and zero logits.
pub fn init_random<R: Rng + ?Sized>(k: usize, scale: f64, rng: &mut R) -> Result<CoronaNetwork> {
    use rand_distr::{Distribution, Normal};
    let nd = Normal::new(0.0, scale).map_err(|e| Error::Config(e.to_string()))?;
    let mut net = CoronaNetwork::zeros(k)?;
    for layer in &mut net.layers {
        for kern in layer.kernels_mut() {
            for t in kern.taps_mut() {
                *t = C64::new(nd.sample(rng), nd.sample(rng));
            }
        }
    }
    Ok(net)
}

/// Statistics feeding the thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdStats {
    /// `max |GL|` and the flat index where it is attained.
    pub max_l: f64,
    pub argmax_l: usize,
    /// `mean |GS|`.
    pub mean_s: f64,
}

pub fn threshold_stats(gl: &MovieTensor, gs: &MovieTensor) -> ThresholdStats {
    let mut max_l = 0.0;
    let mut argmax_l = 0;
    for (i, z) in gl.data().iter().enumerate() {
        let a = z.norm();
        if a > max_l {
            max_l = a;
            argmax_l = i;
        }
    }
    let mean_s = gs.data().iter().map(|z| z.norm()).sum::<f64>() / gs.data().len() as f64;
    ThresholdStats {
        max_l,
        argmax_l,
        mean_s,
    }
}

/// `(σ(λ_L)·a_L·max|L|, σ(λ_S)·a_S·mean|S|)`.
pub fn compute_thresholds(l: &MovieTensor, s: &MovieTensor, params: &LayerParams, a_l: f64, a_s: f64) -> (f64, f64) {
    let st = threshold_stats(l, s);
    (
        sigmoid(params.lambda_l) * a_l * st.max_l,
        sigmoid(params.lambda_s) * a_s * st.mean_s,
    )
}

/// Intermediate values of one layer, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub gl: MovieTensor,
    pub gs: MovieTensor,
    pub stats: ThresholdStats,
    pub thr_l: f64,
    pub thr_s: f64,
    /// SVT of the Casorati form of `GL`.
    pub svt: SvtOutput,
    /// Row norms of the Casorati form of `GS`.
    pub gs_row_norms: Vec<f64>,
}

fn pre_activation(
    a: &ConvKernel2D,
    x: &MovieTensor,
    b: &ConvKernel2D,
    y: &MovieTensor,
    c: &ConvKernel2D,
    z: &MovieTensor,
) -> Result<MovieTensor> {
    let mut out = conv2d_movie(x, a)?;
    conv2d_movie_accumulate(y, b, &mut out)?;
    conv2d_movie_accumulate(z, c, &mut out)?;
    Ok(out)
}

fn row_threshold_with_norms(gs: &CMatrix, norms: &[f64], thr: f64) -> CMatrix {
    let scales: Vec<f64> = norms.iter().map(|&n| row_scale(n, thr)).collect();
    let mut out = gs.clone();
    for j in 0..out.cols() {
        for (z, &s) in out.col_mut(j).iter_mut().zip(&scales) {
            *z *= s;
        }
    }
    out
}

pub(crate) fn layer_forward(
    d: &MovieTensor,
    l: &MovieTensor,
    s: &MovieTensor,
    params: &LayerParams,
    a_l: f64,
    a_s: f64,
    mode: ThresholdMode,
) -> Result<(MovieTensor, MovieTensor, LayerTrace)> {
    d.same_shape(l)?;
    d.same_shape(s)?;
    let shape = d.shape();
    let gl = pre_activation(&params.p5, l, &params.p3, s, &params.p1, d)?;
    let gs = pre_activation(&params.p6, l, &params.p4, s, &params.p2, d)?;
    let stats = threshold_stats(&gl, &gs);
    let (thr_l, thr_s) = match mode {
        ThresholdMode::Learned => (
            sigmoid(params.lambda_l) * a_l * stats.max_l,
            sigmoid(params.lambda_s) * a_s * stats.mean_s,
        ),
        ThresholdMode::Pinned { thr_l, thr_s } => (thr_l, thr_s),
    };
    let svt = svt_full(&gl.unfold(), thr_l)?;
    let gs_mat = gs.unfold();
    let norms = row_norms(&gs_mat);
    let s_next = row_threshold_with_norms(&gs_mat, &norms, thr_s).fold(shape)?;
    let l_next = svt.matrix.clone().fold(shape)?;
    Ok((
        l_next,
        s_next,
        LayerTrace {
            gl,
            gs,
            stats,
            thr_l,
            thr_s,
            svt,
            gs_row_norms: norms,
        },
    ))
}

/// One layer with learned thresholds.
pub fn forward_layer(
    d: &MovieTensor,
    l: &MovieTensor,
    s: &MovieTensor,
    params: &LayerParams,
    a_l: f64,
    a_s: f64,
) -> Result<(MovieTensor, MovieTensor)> {
    let (ln, sn, _) = layer_forward(d, l, s, params, a_l, a_s, ThresholdMode::Learned)?;
    Ok((ln, sn))
}

/// Everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub d: MovieTensor,
    /// `(L_k, S_k)` entering layer `k`; the last entry is the output.
    pub states: Vec<(MovieTensor, MovieTensor)>,
    pub layers: Vec<LayerTrace>,
}

impl ForwardTrace {
    pub fn output(&self) -> &(MovieTensor, MovieTensor) {
        self.states.last().expect("trace holds at least the initial state")
    }
}

/// Full forward pass from `L⁰ = S⁰ = 0`, recording intermediates.
pub fn forward_traced(d: &MovieTensor, net: &CoronaNetwork) -> Result<ForwardTrace> {
    net.validate()?;
    if !d.is_finite() {
        return Err(Error::NonFinite("network input contains NaN or Inf".into()));
    }
    let zero = MovieTensor::zeros(d.shape());
    let mut states = vec![(zero.clone(), zero)];
    let mut layers = Vec::with_capacity(net.depth());
    for p in &net.layers {
        let (l, s) = &states[states.len() - 1];
        let (ln, sn, tr) = layer_forward(d, l, s, p, net.a_l, net.a_s, net.thresholds)?;
        layers.push(tr);
        states.push((ln, sn));
    }
    Ok(ForwardTrace {
        d: d.clone(),
        states,
        layers,
    })
}

/// `(L̂, Ŝ)` for input `D`.
pub fn forward(d: &MovieTensor, net: &CoronaNetwork) -> Result<(MovieTensor, MovieTensor)> {
    net.validate()?;
    let mut l = MovieTensor::zeros(d.shape());
    let mut s = l.clone();
    for p in &net.layers {
        let (ln, sn, _) = layer_forward(d, &l, &s, p, net.a_l, net.a_s, net.thresholds)?;
        l = ln;
        s = sn;
    }
    Ok((l, s))
}
