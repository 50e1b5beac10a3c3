//! `corona simulate`: seeded CEUS movies written as D/L/S NPY triples plus a manifest.

use anyhow::{Context, Result};
use clap::Args;
use corona_core::io::{write_movie_as, DatasetManifest, ManifestSample};
use corona_core::sim::{simulate, SimConfig, VesselConfig};
use corona_core::train::Provenance;
use serde::{Deserialize, Serialize};

use super::{parse_pair, prepare_out};
use crate::args::{Common, Dtype};
use crate::config;

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Seed of the first sample; sample i uses seed + i.
    #[arg(long)]
    pub seed: u64,
    /// Number of samples.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, value_enum, default_value_t = Dtype::C8)]
    pub dtype: Dtype,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 300)]
    pub frames: usize,
    /// Pixel pitch in mm.
    #[arg(long, default_value_t = 0.12)]
    pub pixel_pitch: f64,
    /// Frame interval in s.
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Bubble cap per cm² of field.
    #[arg(long, default_value_t = 130.0)]
    pub max_mb_concentration: f64,
    /// Mean bubble speed in mm per frame.
    #[arg(long, default_value_t = 0.24)]
    pub v_det: f64,
    /// Acceleration standard deviation in mm/s².
    #[arg(long, default_value_t = 0.05 * 0.12 / (0.01 * 0.01))]
    pub accel_std: f64,
    #[arg(long, default_value_t = 30.0)]
    pub turn_range_deg: f64,
    /// Bubble amplitude range as LO,HI.
    #[arg(long, value_parser = parse_pair, default_value = "0.9,1.1")]
    pub amp_jitter: (f64, f64),
    #[arg(long, default_value_t = 5)]
    pub tissue_gaussians: usize,
    #[arg(long, default_value_t = 11)]
    pub tissue_lpf: usize,
    /// Range of the per-pixel mean tissue phase as LO,HI degrees.
    #[arg(long, value_parser = parse_pair, default_value = "0,180")]
    pub phase_mean_range_deg: (f64, f64),
    #[arg(long, default_value_t = 15.0)]
    pub phase_std_deg: f64,
    #[arg(long, default_value_t = 4)]
    pub flow_kernel_count: usize,
    #[arg(long, default_value_t = 0.1)]
    pub flow_perturb_std: f64,
    #[arg(long, default_value_t = 0.1)]
    pub flow_floor: f64,
    /// Lateral PSF standard deviation in mm.
    #[arg(long, default_value_t = 0.14)]
    pub psf_std_lateral: f64,
    /// Axial PSF standard deviation in mm.
    #[arg(long, default_value_t = 0.32)]
    pub psf_std_axial: f64,
    /// ‖N‖ relative to ‖L‖.
    #[arg(long, default_value_t = 0.01)]
    pub noise_scale: f64,
    /// Tissue-to-bubble energy ratio in dB.
    #[arg(long, default_value_t = 30.0)]
    pub tissue_to_mb_db: f64,
    /// Keep raw amplitudes instead of dividing every component by max|D|.
    #[arg(long)]
    pub no_normalize: bool,
    /// Leave out the freely moving bubbles spread over the whole field.
    #[arg(long)]
    pub no_free_bubbles: bool,
    /// Horizontal vessel as ROW_START:ROW_END:SPEED:INFLOW.
    #[arg(long, value_parser = parse_vessel)]
    pub vessel: Option<VesselConfig>,
}

fn parse_vessel(s: &str) -> std::result::Result<VesselConfig, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        return Err("expected ROW_START:ROW_END:SPEED:INFLOW".into());
    }
    let e = |x: &str| format!("bad vessel field '{x}'");
    Ok(VesselConfig {
        row_start: parts[0].parse().map_err(|_| e(parts[0]))?,
        row_end: parts[1].parse().map_err(|_| e(parts[1]))?,
        speed: parts[2].parse().map_err(|_| e(parts[2]))?,
        inflow: parts[3].parse().map_err(|_| e(parts[3]))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRun {
    pub count: usize,
    pub dtype: Dtype,
    pub sim: SimConfig,
}

impl SimulateArgs {
    fn run_config(&self) -> SimulateRun {
        SimulateRun {
            count: self.count,
            dtype: self.dtype,
            sim: SimConfig {
                height: self.height,
                width: self.width,
                pixel_pitch: self.pixel_pitch,
                frames: self.frames,
                dt: self.dt,
                max_mb_concentration: self.max_mb_concentration,
                v_det: self.v_det,
                accel_std: self.accel_std,
                turn_range_deg: self.turn_range_deg,
                amp_jitter: self.amp_jitter,
                tissue_gaussians: self.tissue_gaussians,
                tissue_lpf: self.tissue_lpf,
                phase_mean_range_deg: self.phase_mean_range_deg,
                phase_std_deg: self.phase_std_deg,
                flow_kernel_count: self.flow_kernel_count,
                flow_perturb_std: self.flow_perturb_std,
                flow_floor: self.flow_floor,
                psf_std_lateral: self.psf_std_lateral,
                psf_std_axial: self.psf_std_axial,
                noise_scale: self.noise_scale,
                tissue_to_mb_db: self.tissue_to_mb_db,
                normalize: !self.no_normalize,
                free_bubbles: !self.no_free_bubbles,
                vessel: self.vessel,
                seed: self.seed,
            },
        }
    }
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    let cfg: SimulateRun = config::resolve(args.run_config(), args.common.config.as_deref())?;
    cfg.sim.validate()?;
    let out = &args.common.out;
    prepare_out(out)?;

    let mut manifest = DatasetManifest::default();
    for i in 0..cfg.count {
        let seed = cfg.sim.seed.wrapping_add(i as u64);
        let sample = simulate(&SimConfig { seed, ..cfg.sim.clone() }).with_context(|| format!("simulating sample {i}"))?;
        let names = ["d", "l", "s"].map(|r| format!("sample_{i:04}_{r}.npy"));
        for (movie, name) in [&sample.d, &sample.l, &sample.s].into_iter().zip(&names) {
            write_movie_as(movie, &out.join(name), cfg.dtype.into())?;
        }
        log::info!(
            "sample {i}: seed {seed}, peak bubbles {}",
            sample.bubble_counts.iter().max().copied().unwrap_or(0)
        );
        let [d, l, s] = names;
        manifest.samples.push(ManifestSample {
            index: i,
            seed: Some(seed),
            provenance: Provenance::Simulated,
            shape: sample.d.shape(),
            d,
            l: Some(l),
            s: Some(s),
        });
    }
    manifest.save(out)?;
    config::echo(out, &cfg)?;
    Ok(())
}
