//! `corona solve`: one movie through ISTA/FISTA or a baseline filter.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use corona_core::baselines::{svd_filter, wall_filter, SvdFilterConfig, WallFilterConfig};
use corona_core::io::{read_movie, write_json, write_movie_as, JsonlWriter};
use corona_core::solver::{solve, MeasurementOps, SolverConfig, Variant};
use corona_core::train::{patch_grid, PatchConfig};
use serde::{Deserialize, Serialize};

use super::{prepare_out, run_patched};
use crate::args::{Common, Dtype, PatchArgs, SolverArgs};
use crate::config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ista,
    Fista,
    Svd,
    Wall,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Input movie (NPY, shape T×H×W).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Fista)]
    pub method: Method,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Leading singular components removed by the SVD filter.
    #[arg(long, default_value_t = 2)]
    pub cut_rank: usize,
    /// Butterworth order of the wall filter.
    #[arg(long, default_value_t = 6)]
    pub order: usize,
    /// Wall-filter cutoff as a fraction of the Nyquist rate.
    #[arg(long, default_value_t = 0.2)]
    pub cutoff: f64,
    /// Process overlapping patches and recombine them.
    #[arg(long)]
    pub patchwise: bool,
    #[command(flatten)]
    pub patch: PatchArgs,
    /// Ground-truth S; when given, the MSE of the output is logged.
    #[arg(long)]
    pub truth_s: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Dtype::C8)]
    pub dtype: Dtype,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRun {
    pub input: Option<PathBuf>,
    pub method: Method,
    pub solver: SolverConfig,
    pub svd: SvdFilterConfig,
    pub wall: WallFilterConfig,
    pub patchwise: bool,
    pub patch: PatchConfig,
    pub truth_s: Option<PathBuf>,
    pub dtype: Dtype,
}

#[derive(Debug, Serialize)]
struct IterRecord {
    patch: usize,
    iter: usize,
    objective: f64,
}

#[derive(Debug, Serialize)]
struct Summary {
    method: Method,
    patches: usize,
    iterations: Vec<usize>,
    converged: Vec<bool>,
    /// Per-entry mean squared error against the ground-truth S.
    mse_s: Option<f64>,
}

impl SolveArgs {
    fn run_config(&self) -> SolveRun {
        SolveRun {
            input: self.input.clone(),
            method: self.method,
            solver: self.solver.config(Variant::Fista),
            svd: SvdFilterConfig { cut_rank: self.cut_rank },
            wall: WallFilterConfig {
                order: self.order,
                cutoff: self.cutoff,
            },
            patchwise: self.patchwise,
            patch: self.patch.config(),
            truth_s: self.truth_s.clone(),
            dtype: self.dtype,
        }
    }
}

pub fn run(args: &SolveArgs) -> Result<()> {
    let mut cfg: SolveRun = config::resolve(args.run_config(), args.common.config.as_deref())?;
    match cfg.method {
        Method::Ista => cfg.solver.variant = Variant::Ista,
        Method::Fista => cfg.solver.variant = Variant::Fista,
        Method::Svd | Method::Wall => {}
    }
    cfg.solver.validate()?;
    cfg.wall.validate()?;
    let input = cfg.input.clone().context("no input movie given (--input or config 'input')")?;
    let d = read_movie(&input)?;
    let out = &args.common.out;
    prepare_out(out)?;

    let patch = cfg.patchwise.then_some(&cfg.patch);
    let mut iterations = Vec::new();
    let mut converged = Vec::new();
    let outputs = match cfg.method {
        Method::Ista | Method::Fista => {
            let mut log = JsonlWriter::create(&out.join("history.jsonl"))?;
            let ops = MeasurementOps::identity();
            run_patched(&d, patch, |i, m| {
                let st = solve(&m.unfold(), &ops, &cfg.solver, |_, _, _| {})?;
                for (k, &objective) in st.objective_history.iter().enumerate() {
                    log.write(&IterRecord { patch: i, iter: k + 1, objective })?;
                }
                iterations.push(st.iter);
                converged.push(st.converged);
                Ok(vec![st.l.fold(m.shape())?, st.s.fold(m.shape())?])
            })?
        }
        Method::Svd => run_patched(&d, patch, |_, m| Ok(vec![svd_filter(m, &cfg.svd)?]))?,
        Method::Wall => run_patched(&d, patch, |_, m| Ok(vec![wall_filter(m, &cfg.wall)?]))?,
    };

    let s_hat = outputs.last().expect("every method yields an output");
    let mse_s = match &cfg.truth_s {
        Some(p) => {
            let truth = read_movie(p)?;
            s_hat.same_shape(&truth)?;
            let mse = (s_hat - &truth).norm_sq() / truth.data().len() as f64;
            log::info!("MSE of S against {}: {mse:.6e}", p.display());
            Some(mse)
        }
        None => None,
    };

    let dtype = cfg.dtype.into();
    if outputs.len() == 2 {
        write_movie_as(&outputs[0], &out.join("l.npy"), dtype)?;
        write_movie_as(&outputs[1], &out.join("s.npy"), dtype)?;
    } else {
        write_movie_as(&outputs[0], &out.join("filtered.npy"), dtype)?;
    }
    let patches = if cfg.patchwise { patch_grid(d.shape(), &cfg.patch)?.len() } else { 1 };
    write_json(
        &out.join("summary.json"),
        &Summary {
            method: cfg.method,
            patches,
            iterations,
            converged,
            mse_s,
        },
    )?;
    config::echo(out, &cfg)?;
    Ok(())
}
