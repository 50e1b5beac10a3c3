//! Microbubble kinematics and deposition onto the pixel grid.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SimConfig;
use crate::tensor::{Frame, C64};

/// One bubble; positions in mm, velocities in mm/frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleState {
    pub position: (f64, f64),
    pub velocity: (f64, f64),
    pub acceleration: (f64, f64),
    pub amplitude: C64,
}

/// Random quantities consumed by one kinematic step of one bubble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDraws {
    /// Velocity rotation in radians.
    pub theta: f64,
    /// Acceleration in mm/frame².
    pub accel: (f64, f64),
    pub amp_factor: f64,
}

impl StepDraws {
    /// No rotation, no acceleration, unit amplitude factor.
    pub fn still() -> Self {
        Self {
            theta: 0.0,
            accel: (0.0, 0.0),
            amp_factor: 1.0,
        }
    }
}

pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Bubbles placed uniformly over the field, at most `cfg.max_bubbles()` of them.
pub fn spawn_bubbles<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Vec<BubbleState> {
    let cap = cfg.max_bubbles();
    let count = rng.random_range(0..=cap);
    let (fx, fy) = cfg.field_mm();
    (0..count)
        .map(|_| {
            let x = rng.random::<f64>() * fx;
            let y = rng.random::<f64>() * fy;
            let n: f64 = StandardNormal.sample(rng);
            let speed = (cfg.v_det * (1.0 + n)).max(0.0);
            let dir = rng.random::<f64>() * std::f64::consts::TAU;
            BubbleState {
                position: (x, y),
                velocity: (speed * dir.cos(), speed * dir.sin()),
                acceleration: (0.0, 0.0),
                amplitude: complex_normal(rng),
            }
        })
        .collect()
}

pub fn draw_step<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> StepDraws {
    let turn = cfg.turn_range_deg.to_radians();
    let theta = if turn > 0.0 { rng.random_range(-turn..=turn) } else { 0.0 };
    let sa = cfg.accel_std_per_frame();
    let accel = if sa > 0.0 {
        let nd = Normal::new(0.0, sa).expect("finite acceleration std");
        (nd.sample(rng), nd.sample(rng))
    } else {
        (0.0, 0.0)
    };
    let (lo, hi) = cfg.amp_jitter;
    let amp_factor = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    StepDraws {
        theta,
        accel,
        amp_factor,
    }
}

/// Rotates the velocity by `θ`, adds the acceleration, moves, and rescales the amplitude.
pub fn advance_bubble(b: &BubbleState, d: &StepDraws) -> BubbleState {
    let (c, s) = (d.theta.cos(), d.theta.sin());
    let (vx, vy) = b.velocity;
    let vx = vx * c - vy * s + d.accel.0;
    let vy = b.velocity.0 * s + vy * c + d.accel.1;
    BubbleState {
        position: (b.position.0 + vx, b.position.1 + vy),
        velocity: (vx, vy),
        acceleration: d.accel,
        amplitude: b.amplitude * d.amp_factor,
    }
}

/// Advances every bubble one frame and drops the ones that left the field.
pub fn step_bubbles<R: Rng + ?Sized>(bubbles: &[BubbleState], cfg: &SimConfig, rng: &mut R) -> Vec<BubbleState> {
    bubbles
        .iter()
        .map(|b| advance_bubble(b, &draw_step(cfg, rng)))
        .filter(|b| cfg.in_field(b.position))
        .collect()
}

/// Nearest-pixel deposition: pixel `(row, col) = (⌊y/pitch⌋, ⌊x/pitch⌋)`.
pub fn rasterize_bubbles(bubbles: &[BubbleState], cfg: &SimConfig) -> Frame {
    let mut f = Frame::zeros(cfg.height, cfg.width);
    for b in bubbles {
        if !cfg.in_field(b.position) {
            continue;
        }
        let col = (b.position.0 / cfg.pixel_pitch).floor() as usize;
        let row = (b.position.1 / cfg.pixel_pitch).floor() as usize;
        f.data[row * cfg.width + col] += b.amplitude;
    }
    f
}
