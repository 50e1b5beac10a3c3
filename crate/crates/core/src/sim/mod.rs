//! Synthetic contrast-enhanced ultrasound movies with ground truth.
//!
//! Every sample is generated from a single seed: tissue frames evolve by flow
//! filter deformation, bubbles move with random turns and accelerations, and
//! the tissue, bubble and noise movies are each blurred by the PSF before
//! being summed into `D`.

mod bubbles;
mod psf;
mod tissue;

pub use bubbles::{
    advance_bubble, draw_step, rasterize_bubbles, spawn_bubbles, step_bubbles, BubbleState, StepDraws,
};
pub use psf::{apply_psf, gaussian_1d, psf_taps};
pub use tissue::{
    assemble_blocks, compose_tissue, deform_tissue, flow_correlate, gen_tissue_base, FlowFilters, FLOW_SIZE,
    TISSUE_LPF_SIGMA,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Frame, MovieShape, MovieTensor};

/// A straight horizontal vessel: bubbles enter at the left edge inside rows
/// `row_start..row_end` and travel right at constant speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselConfig {
    pub row_start: usize,
    pub row_end: usize,
    /// mm per frame.
    pub speed: f64,
    /// New bubbles per frame.
    pub inflow: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub height: usize,
    pub width: usize,
    /// mm.
    pub pixel_pitch: f64,
    pub frames: usize,
    /// Seconds per frame.
    pub dt: f64,
    /// Bubbles per cm².
    pub max_mb_concentration: f64,
    /// Mean bubble speed, mm per frame.
    pub v_det: f64,
    /// Acceleration standard deviation in mm/s²; multiplied by `dt²` per frame.
    pub accel_std: f64,
    pub turn_range_deg: f64,
    pub amp_jitter: (f64, f64),
    pub tissue_gaussians: usize,
    pub tissue_lpf: usize,
    pub phase_mean_range_deg: (f64, f64),
    pub phase_std_deg: f64,
    pub flow_kernel_count: usize,
    pub flow_perturb_std: f64,
    pub flow_floor: f64,
    /// mm.
    pub psf_std_lateral: f64,
    /// mm.
    pub psf_std_axial: f64,
    /// Noise amplitude relative to tissue: `‖N‖ = noise_scale·‖L‖`.
    pub noise_scale: f64,
    pub tissue_to_mb_db: f64,
    /// Divide all components by `max|D|`.
    pub normalize: bool,
    /// Include freely moving bubbles spawned over the whole field.
    pub free_bubbles: bool,
    pub vessel: Option<VesselConfig>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let dt = 0.01;
        Self {
            height: 128,
            width: 128,
            pixel_pitch: 0.12,
            frames: 300,
            dt,
            max_mb_concentration: 130.0,
            v_det: 0.24,
            accel_std: 0.05 * 0.12 / (dt * dt),
            turn_range_deg: 30.0,
            amp_jitter: (0.9, 1.1),
            tissue_gaussians: 5,
            tissue_lpf: 11,
            phase_mean_range_deg: (0.0, 180.0),
            phase_std_deg: 15.0,
            flow_kernel_count: 4,
            flow_perturb_std: 0.1,
            flow_floor: 0.1,
            psf_std_lateral: 0.14,
            psf_std_axial: 0.32,
            noise_scale: 0.01,
            tissue_to_mb_db: 30.0,
            normalize: true,
            free_bubbles: true,
            vessel: None,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.height == 0 || self.width == 0 || self.frames == 0 {
            return bad("grid and frame counts must be positive".into());
        }
        if self.tissue_gaussians == 0 || self.flow_kernel_count == 0 {
            return bad("tissue_gaussians and flow_kernel_count must be positive".into());
        }
        if self.tissue_lpf == 0 || self.tissue_lpf.is_multiple_of(2) {
            return bad(format!("tissue_lpf must be odd, got {}", self.tissue_lpf));
        }
        for (name, v) in [
            ("pixel_pitch", self.pixel_pitch),
            ("dt", self.dt),
            ("psf_std_lateral", self.psf_std_lateral),
            ("psf_std_axial", self.psf_std_axial),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("max_mb_concentration", self.max_mb_concentration),
            ("v_det", self.v_det),
            ("accel_std", self.accel_std),
            ("turn_range_deg", self.turn_range_deg),
            ("phase_std_deg", self.phase_std_deg),
            ("flow_perturb_std", self.flow_perturb_std),
            ("flow_floor", self.flow_floor),
            ("noise_scale", self.noise_scale),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        if !(self.amp_jitter.0 > 0.0 && self.amp_jitter.0 <= self.amp_jitter.1) {
            return bad(format!("amp_jitter range {:?} is not ordered and positive", self.amp_jitter));
        }
        if !(self.phase_mean_range_deg.0 <= self.phase_mean_range_deg.1) {
            return bad("phase_mean_range_deg is not ordered".into());
        }
        if !(10.0..=60.0).contains(&self.tissue_to_mb_db) {
            return bad(format!("tissue_to_mb_db must lie in [10, 60], got {}", self.tissue_to_mb_db));
        }
        if let Some(v) = &self.vessel {
            if v.row_start >= v.row_end || v.row_end > self.height {
                return bad(format!("vessel rows {}..{} outside the grid", v.row_start, v.row_end));
            }
            if !(v.speed > 0.0) || !v.speed.is_finite() {
                return bad("vessel speed must be positive".into());
            }
        }
        Ok(())
    }

    /// Field extent `(x, y)` in mm.
    pub fn field_mm(&self) -> (f64, f64) {
        (self.width as f64 * self.pixel_pitch, self.height as f64 * self.pixel_pitch)
    }

    pub fn area_cm2(&self) -> f64 {
        let (x, y) = self.field_mm();
        x * y / 100.0
    }

    /// `⌊concentration · area⌋`.
    pub fn max_bubbles(&self) -> usize {
        (self.max_mb_concentration * self.area_cm2()).floor() as usize
    }

    /// `accel_std · dt²`, the acceleration std in mm/frame².
    pub fn accel_std_per_frame(&self) -> f64 {
        self.accel_std * self.dt * self.dt
    }

    pub fn in_field(&self, p: (f64, f64)) -> bool {
        let (fx, fy) = self.field_mm();
        p.0 >= 0.0 && p.0 < fx && p.1 >= 0.0 && p.1 < fy
    }

    pub fn shape(&self) -> MovieShape {
        MovieShape::new(self.frames, self.height, self.width)
    }

    /// Pixel mask of the planted vessel, row-major.
    pub fn vessel_mask(&self) -> Option<Vec<bool>> {
        self.vessel.map(|v| {
            (0..self.height * self.width)
                .map(|i| (v.row_start..v.row_end).contains(&(i / self.width)))
                .collect()
        })
    }
}

/// One generated movie with its components.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSample {
    pub d: MovieTensor,
    pub l: MovieTensor,
    pub s: MovieTensor,
    pub n: MovieTensor,
    pub config: SimConfig,
    pub seed: u64,
    /// Active bubbles in each frame.
    pub bubble_counts: Vec<usize>,
}

fn spawn_vessel<R: Rng + ?Sized>(v: &VesselConfig, cfg: &SimConfig, rng: &mut R) -> BubbleState {
    let y0 = v.row_start as f64 * cfg.pixel_pitch;
    let y1 = v.row_end as f64 * cfg.pixel_pitch;
    BubbleState {
        position: (rng.random::<f64>() * v.speed, rng.random_range(y0..y1)),
        velocity: (v.speed, 0.0),
        acceleration: (0.0, 0.0),
        amplitude: bubbles::complex_normal(rng),
    }
}

/// Raw (unblurred, unscaled) tissue, bubble and noise frames.
fn raw_frames(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> (Vec<Frame>, Vec<Frame>, Vec<Frame>, Vec<usize>) {
    let cap = cfg.max_bubbles();
    let mut free = if cfg.free_bubbles { spawn_bubbles(cfg, rng) } else { Vec::new() };
    let mut vessel: Vec<BubbleState> = Vec::new();
    let mut tissue = gen_tissue_base(cfg, rng);
    let mut filters = FlowFilters::uniform(cfg.flow_kernel_count);

    let mut lf = Vec::with_capacity(cfg.frames);
    let mut sf = Vec::with_capacity(cfg.frames);
    let mut nf = Vec::with_capacity(cfg.frames);
    let mut counts = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        if let Some(v) = &cfg.vessel {
            for _ in 0..v.inflow {
                if free.len() + vessel.len() >= cap {
                    break;
                }
                vessel.push(spawn_vessel(v, cfg, rng));
            }
        }
        counts.push(free.len() + vessel.len());
        let mut frame = rasterize_bubbles(&free, cfg);
        let vf = rasterize_bubbles(&vessel, cfg);
        frame.data.iter_mut().zip(&vf.data).for_each(|(a, b)| *a += b);
        sf.push(frame);
        lf.push(tissue.clone());
        nf.push(Frame::from_fn(cfg.height, cfg.width, |_, _| bubbles::complex_normal(rng)));

        if t + 1 < cfg.frames {
            free = step_bubbles(&free, cfg, rng);
            let (lo, hi) = cfg.amp_jitter;
            vessel = vessel
                .iter()
                .map(|b| {
                    let f = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                    advance_bubble(
                        b,
                        &StepDraws {
                            amp_factor: f,
                            ..StepDraws::still()
                        },
                    )
                })
                .filter(|b| cfg.in_field(b.position))
                .collect();
            tissue = deform_tissue(&tissue, &mut filters, cfg, rng);
        }
    }
    (lf, sf, nf, counts)
}

fn blur_movie(frames: &[Frame], cfg: &SimConfig) -> Result<MovieTensor> {
    let (axial, lateral) = psf_taps(cfg);
    let blurred: Vec<Frame> = frames
        .par_iter()
        .map(|f| psf::apply_separable(f, &axial, &lateral))
        .collect();
    MovieTensor::from_frames(&blurred)
}

/// Generates one sample from `cfg.seed`.
pub fn simulate(cfg: &SimConfig) -> Result<SimSample> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lf, sf, nf, counts) = raw_frames(cfg, &mut rng);
    let mut l = blur_movie(&lf, cfg)?;
    let mut s = blur_movie(&sf, cfg)?;
    let mut n = blur_movie(&nf, cfg)?;

    let l_pow = l.norm_sq();
    let s_pow = s.norm_sq();
    if s_pow > 0.0 && l_pow > 0.0 {
        let target = l_pow / 10f64.powf(cfg.tissue_to_mb_db / 10.0);
        s = s.scaled((target / s_pow).sqrt());
    }
    let n_pow = n.norm_sq();
    n = if n_pow > 0.0 && l_pow > 0.0 {
        n.scaled(cfg.noise_scale * (l_pow / n_pow).sqrt())
    } else {
        n.scaled(0.0)
    };

    if cfg.normalize {
        let peak = (&(&l + &s) + &n).max_abs();
        if peak > 0.0 {
            l = l.scaled(1.0 / peak);
            s = s.scaled(1.0 / peak);
            n = n.scaled(1.0 / peak);
        }
    }
    let d = &(&l + &s) + &n;
    Ok(SimSample {
        d,
        l,
        s,
        n,
        config: cfg.clone(),
        seed: cfg.seed,
        bubble_counts: counts,
    })
}

/// `count` samples seeded `cfg.seed + i`, generated in parallel.
pub fn simulate_dataset(cfg: &SimConfig, count: usize) -> Result<Vec<SimSample>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            simulate(&SimConfig {
                seed: cfg.seed.wrapping_add(i),
                ..cfg.clone()
            })
        })
        .collect()
}

/// `10·log10(‖L‖² / ‖S‖²)`.
pub fn tissue_to_mb_ratio_db(sample: &SimSample) -> f64 {
    10.0 * (sample.l.norm_sq() / sample.s.norm_sq()).log10()
}

