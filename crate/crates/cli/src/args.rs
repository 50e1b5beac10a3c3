//! Flag groups shared by several subcommands.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use corona_core::io::ComplexDtype;
use corona_core::prox::RegWeights;
use corona_core::solver::{SolverConfig, Variant};
use corona_core::tensor::MovieShape;
use corona_core::train::PatchConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// JSON config file; its values override the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Nuclear-norm weight λ1.
    #[arg(long, default_value_t = 0.02)]
    pub lambda1: f64,
    /// Mixed ℓ1,2-norm weight λ2.
    #[arg(long, default_value_t = 0.001)]
    pub lambda2: f64,
    #[arg(long, default_value_t = 30_000)]
    pub max_iters: usize,
    /// Stop when the relative change of (L, S) falls below this.
    #[arg(long, default_value_t = 1e-7)]
    pub rel_tol: f64,
    /// Fixed Lipschitz constant (estimated by power iteration if omitted).
    #[arg(long)]
    pub lipschitz: Option<f64>,
}

impl SolverArgs {
    pub fn config(&self, variant: Variant) -> SolverConfig {
        SolverConfig {
            weights: RegWeights {
                lambda1: self.lambda1,
                lambda2: self.lambda2,
            },
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            lipschitz: self.lipschitz,
            variant,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PatchArgs {
    #[arg(long, default_value_t = 20)]
    pub patch_frames: usize,
    #[arg(long, default_value_t = 32)]
    pub patch_height: usize,
    #[arg(long, default_value_t = 32)]
    pub patch_width: usize,
    /// Fractional overlap of neighbouring patches in every dimension.
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
}

impl PatchArgs {
    pub fn config(&self) -> PatchConfig {
        PatchConfig {
            shape: MovieShape::new(self.patch_frames, self.patch_height, self.patch_width),
            overlap: self.overlap,
        }
    }
}

/// Element type of written movies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    #[default]
    C8,
    C16,
}

impl From<Dtype> for ComplexDtype {
    fn from(d: Dtype) -> Self {
        match d {
            Dtype::C8 => ComplexDtype::C8,
            Dtype::C16 => ComplexDtype::C16,
        }
    }
}
