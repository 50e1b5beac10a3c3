use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::solver::{solve, MeasurementOps, SolverConfig};
use crate::tensor::MovieTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Simulated,
    SolverLabeled,
}

/// Input patch with its low-rank and sparse targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPair {
    pub d: MovieTensor,
    pub l: MovieTensor,
    pub s: MovieTensor,
    pub provenance: Provenance,
}

impl TrainPair {
    pub fn new(d: MovieTensor, l: MovieTensor, s: MovieTensor, provenance: Provenance) -> Result<Self> {
        d.same_shape(&l)?;
        d.same_shape(&s)?;
        if !l.is_finite() || !s.is_finite() {
            return Err(crate::Error::NonFinite("training targets".into()));
        }
        Ok(Self { d, l, s, provenance })
    }
}

/// Decomposes one movie with the L+S solver (identity measurements).
pub fn solver_decompose(d: &MovieTensor, cfg: &SolverConfig) -> Result<(MovieTensor, MovieTensor)> {
    let st = solve(&d.unfold(), &MeasurementOps::identity(), cfg, |_, _, _| {})?;
    Ok((st.l.fold(d.shape())?, st.s.fold(d.shape())?))
}

/// Labels every patch with the solver's decomposition. Patches on which the
/// solver fails are logged and skipped.
pub fn label_with_solver(patches: &[MovieTensor], cfg: &SolverConfig) -> Vec<TrainPair> {
    patches
        .par_iter()
        .enumerate()
        .map(|(i, d)| match solver_decompose(d, cfg) {
            Ok((l, s)) => Some(TrainPair {
                d: d.clone(),
                l,
                s,
                provenance: Provenance::SolverLabeled,
            }),
            Err(e) => {
                warn!("skipping patch {i}: {e}");
                None
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}
