//! Image products and separation metrics: maximum-intensity projections, dB
//! images, CNR/CR over rectangular ROIs, intensity profiles and MSE curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{forward, CoronaNetwork};
use crate::solver::{solve, MeasurementOps, SolverConfig};
use crate::tensor::{CMatrix, MovieTensor};

/// Real-valued 2D image, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width || height == 0 || width == 0 {
            return Err(Error::Shape(format!(
                "{height}x{width} image needs {} pixels, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Rectangle `rows row..row+height`, `cols col..col+width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiBox {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl RoiBox {
    pub fn new(row: usize, col: usize, height: usize, width: usize) -> Self {
        Self { row, col, height, width }
    }

    pub fn check(&self, img: &Image) -> Result<()> {
        if self.height * self.width < 2 {
            return Err(Error::Config(format!("ROI {self:?} must cover at least two pixels")));
        }
        if self.row + self.height > img.height || self.col + self.width > img.width {
            return Err(Error::Shape(format!(
                "ROI {self:?} exceeds {}x{} image",
                img.height, img.width
            )));
        }
        Ok(())
    }

    pub fn pixels<'a>(&'a self, img: &'a Image) -> impl Iterator<Item = f64> + 'a {
        (self.row..self.row + self.height)
            .flat_map(move |y| (self.col..self.col + self.width).map(move |x| img.get(y, x)))
    }

    /// Population mean and variance of the ROI pixels.
    pub fn mean_var(&self, img: &Image) -> Result<(f64, f64)> {
        self.check(img)?;
        let n = (self.height * self.width) as f64;
        let mean = self.pixels(img).sum::<f64>() / n;
        let var = self.pixels(img).map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
        Ok((mean, var))
    }
}

/// Per-pixel maximum magnitude over frames.
pub fn mip(movie: &MovieTensor) -> Image {
    let (h, w) = (movie.height(), movie.width());
    let mut data = vec![0.0f64; h * w];
    for t in 0..movie.frames() {
        for (m, z) in data.iter_mut().zip(movie.frame(t)) {
            *m = m.max(z.norm());
        }
    }
    Image { height: h, width: w, data }
}

/// `20·log10(p / max p)`, clipped below at `floor_db`. An all-zero image maps to the floor.
pub fn to_db(img: &Image, floor_db: f64) -> Result<Image> {
    if !(floor_db < 0.0) {
        return Err(Error::Config(format!("dB floor must be negative, got {floor_db}")));
    }
    let peak = img.max();
    let data = img
        .data
        .iter()
        .map(|&p| {
            if peak > 0.0 && p > 0.0 {
                (20.0 * (p / peak).log10()).max(floor_db)
            } else {
                floor_db
            }
        })
        .collect();
    Ok(Image {
        height: img.height,
        width: img.width,
        data,
    })
}

/// `20·log10(|μs − μb| / √(σs² + σb²))`.
pub fn cnr(img: &Image, signal: &RoiBox, background: &RoiBox) -> Result<f64> {
    let (ms, vs) = signal.mean_var(img)?;
    let (mb, vb) = background.mean_var(img)?;
    let spread = (vs + vb).sqrt();
    if spread == 0.0 {
        return Err(Error::Undefined("CNR with zero variance in both ROIs".into()));
    }
    let ratio = (ms - mb).abs() / spread;
    if ratio == 0.0 {
        return Err(Error::Undefined("CNR with equal ROI means (−∞ dB)".into()));
    }
    Ok(20.0 * ratio.log10())
}

/// `20·log10(μs / μb)`.
pub fn cr(img: &Image, signal: &RoiBox, background: &RoiBox) -> Result<f64> {
    let (ms, _) = signal.mean_var(img)?;
    let (mb, _) = background.mean_var(img)?;
    if mb <= 0.0 {
        return Err(Error::Undefined("CR with zero background mean".into()));
    }
    if ms <= 0.0 {
        return Err(Error::Undefined("CR with zero signal mean (−∞ dB)".into()));
    }
    Ok(20.0 * (ms / mb).log10())
}

/// Row `row` of the linear image in dB relative to the image maximum, without
/// floor clipping; exact zeros become `f64::NEG_INFINITY`.
pub fn intensity_profile(img: &Image, row: usize) -> Result<Vec<f64>> {
    if row >= img.height {
        return Err(Error::Shape(format!("row {row} outside image of height {}", img.height)));
    }
    let peak = img.max();
    Ok((0..img.width)
        .map(|x| {
            let p = img.get(row, x);
            if p == 0.0 || peak <= 0.0 {
                f64::NEG_INFINITY
            } else {
                20.0 * (p / peak).log10()
            }
        })
        .collect())
}

/// One point of an MSE curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsePoint {
    pub k: usize,
    pub mse_s: f64,
    pub mse_l: f64,
    pub mse_avg: f64,
}

/// Mean squared error per entry of both components.
pub fn mse_point(k: usize, l_hat: &MovieTensor, s_hat: &MovieTensor, l: &MovieTensor, s: &MovieTensor) -> Result<MsePoint> {
    l_hat.same_shape(l)?;
    s_hat.same_shape(s)?;
    let n = l.data().len() as f64;
    let mse_l = (l_hat - l).norm_sq() / n;
    let mse_s = (s_hat - s).norm_sq() / n;
    Ok(MsePoint {
        k,
        mse_s,
        mse_l,
        mse_avg: 0.5 * (mse_s + mse_l),
    })
}

fn mse_mat(k: usize, l_hat: &CMatrix, s_hat: &CMatrix, l: &CMatrix, s: &CMatrix) -> MsePoint {
    let n = (l.rows() * l.cols()) as f64;
    let mse_l = (l_hat - l).norm_sq() / n;
    let mse_s = (s_hat - s).norm_sq() / n;
    MsePoint {
        k,
        mse_s,
        mse_l,
        mse_avg: 0.5 * (mse_s + mse_l),
    }
}

/// MSE of solver iterates `k = 1..=max_k` against ground truth, from a single run.
pub fn mse_curve_solver(
    d: &MovieTensor,
    l: &MovieTensor,
    s: &MovieTensor,
    cfg: &SolverConfig,
    max_k: usize,
) -> Result<Vec<MsePoint>> {
    let cfg = SolverConfig {
        max_iters: max_k,
        rel_tol: 0.0,
        ..cfg.clone()
    };
    let (lm, sm) = (l.unfold(), s.unfold());
    let mut curve = Vec::with_capacity(max_k);
    solve(&d.unfold(), &MeasurementOps::identity(), &cfg, |k, li, si| {
        curve.push(mse_mat(k, li, si, &lm, &sm));
    })?;
    Ok(curve)
}

/// Average MSE of a network over `(D, L, S)` triples.
pub fn network_mse(net: &CoronaNetwork, k: usize, data: &[(MovieTensor, MovieTensor, MovieTensor)]) -> Result<MsePoint> {
    if data.is_empty() {
        return Err(Error::Config("no evaluation data".into()));
    }
    let mut acc = MsePoint {
        k,
        mse_s: 0.0,
        mse_l: 0.0,
        mse_avg: 0.0,
    };
    for (d, l, s) in data {
        let (lh, sh) = forward(d, net)?;
        let p = mse_point(k, &lh, &sh, l, s)?;
        acc.mse_s += p.mse_s;
        acc.mse_l += p.mse_l;
    }
    let n = data.len() as f64;
    acc.mse_s /= n;
    acc.mse_l /= n;
    acc.mse_avg = 0.5 * (acc.mse_s + acc.mse_l);
    Ok(acc)
}

/// Network MSE curve: `train_k(k)` must return a freshly trained `k`-layer network.
pub fn mse_curve_network<F>(ks: &[usize], mut train_k: F, data: &[(MovieTensor, MovieTensor, MovieTensor)]) -> Result<Vec<MsePoint>>
where
    F: FnMut(usize) -> Result<CoronaNetwork>,
{
    ks.iter().map(|&k| network_mse(&train_k(k)?, k, data)).collect()
}

/// CNR and CR of one method for one ROI pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub roi_pair: String,
    pub cnr_db: Option<f64>,
    pub cr_db: Option<f64>,
}

impl MetricReport {
    /// Computes both metrics; undefined values are stored as `None`.
    pub fn compute(method: &str, roi_pair: &str, img: &Image, signal: &RoiBox, background: &RoiBox) -> Result<Self> {
        let keep = |r: Result<f64>| match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::Undefined(_)) => Ok(None),
            Err(e) => Err(e),
        };
        Ok(Self {
            method: method.to_string(),
            roi_pair: roi_pair.to_string(),
            cnr_db: keep(cnr(img, signal, background))?,
            cr_db: keep(cr(img, signal, background))?,
        })
    }
}
