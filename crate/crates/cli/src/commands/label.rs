//! `corona label`: solver-generated L/S targets for movies without ground truth.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use corona_core::io::{read_movie, write_movie_as, DatasetManifest, ManifestSample};
use corona_core::solver::{SolverConfig, Variant};
use corona_core::tensor::MovieTensor;
use corona_core::train::{solver_decompose, PatchConfig, Provenance};
use serde::{Deserialize, Serialize};

use super::{prepare_out, run_patched};
use crate::args::{Common, Dtype, PatchArgs, SolverArgs};
use crate::config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverVariant {
    Ista,
    Fista,
}

#[derive(Debug, Clone, Args)]
pub struct LabelArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory with manifest.json, or a single NPY movie.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SolverVariant::Fista)]
    pub variant: SolverVariant,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Label overlapping patches and recombine them.
    #[arg(long)]
    pub patchwise: bool,
    #[command(flatten)]
    pub patch: PatchArgs,
    #[arg(long, value_enum, default_value_t = Dtype::C8)]
    pub dtype: Dtype,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRun {
    pub input: Option<PathBuf>,
    pub solver: SolverConfig,
    pub patchwise: bool,
    pub patch: PatchConfig,
    pub dtype: Dtype,
}

impl LabelArgs {
    fn run_config(&self) -> LabelRun {
        let variant = match self.variant {
            SolverVariant::Ista => Variant::Ista,
            SolverVariant::Fista => Variant::Fista,
        };
        LabelRun {
            input: self.input.clone(),
            solver: self.solver.config(variant),
            patchwise: self.patchwise,
            patch: self.patch.config(),
            dtype: self.dtype,
        }
    }
}

pub fn run(args: &LabelArgs) -> Result<()> {
    let cfg: LabelRun = config::resolve(args.run_config(), args.common.config.as_deref())?;
    cfg.solver.validate()?;
    let input = cfg.input.clone().context("no input given (--input or config 'input')")?;

    let movies: Vec<(usize, Option<u64>, MovieTensor)> = if input.is_dir() {
        let m = DatasetManifest::load(&input)?;
        (0..m.samples.len())
            .map(|i| Ok((m.samples[i].index, m.samples[i].seed, m.read_sample(&input, i)?.0)))
            .collect::<Result<_>>()?
    } else {
        vec![(0, None, read_movie(&input)?)]
    };

    let out = &args.common.out;
    prepare_out(out)?;
    let patch = cfg.patchwise.then_some(&cfg.patch);
    let mut manifest = DatasetManifest::default();
    for (index, seed, d) in movies {
        let ls = run_patched(&d, patch, |_, m| {
            let (l, s) = solver_decompose(m, &cfg.solver)?;
            Ok(vec![l, s])
        })
        .with_context(|| format!("labelling sample {index}"))?;
        let names = ["d", "l", "s"].map(|r| format!("sample_{index:04}_{r}.npy"));
        for (movie, name) in [&d, &ls[0], &ls[1]].into_iter().zip(&names) {
            write_movie_as(movie, &out.join(name), cfg.dtype.into())?;
        }
        log::info!("labelled sample {index}");
        let [dn, ln, sn] = names;
        manifest.samples.push(ManifestSample {
            index,
            seed,
            provenance: Provenance::SolverLabeled,
            shape: d.shape(),
            d: dn,
            l: Some(ln),
            s: Some(sn),
        });
    }
    manifest.save(out)?;
    config::echo(out, &cfg)?;
    Ok(())
}
