pub mod eval;
pub mod label;
pub mod simulate;
pub mod solve;
pub mod train;

use std::path::Path;

use anyhow::{Context, Result};
use corona_core::io::DatasetManifest;
use corona_core::tensor::MovieTensor;
use corona_core::train::{extract_patches, recombine_patches, Patch, PatchConfig, Provenance, TrainPair};

pub fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// `"a,b"` as a pair of reals.
pub fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected LO,HI")?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("bad number '{x}'"));
    Ok((p(a)?, p(b)?))
}

/// `"NAME=VALUE"`.
pub fn parse_named(s: &str) -> std::result::Result<(String, String), String> {
    let (n, v) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    if n.is_empty() {
        return Err("empty name".into());
    }
    Ok((n.to_string(), v.to_string()))
}

/// Applies `f` to every patch (or the whole movie) and recombines the outputs.
/// `f` returns one movie per output channel, all with the patch's shape.
pub fn run_patched<F>(movie: &MovieTensor, patch: Option<&PatchConfig>, mut f: F) -> Result<Vec<MovieTensor>>
where
    F: FnMut(usize, &MovieTensor) -> Result<Vec<MovieTensor>>,
{
    let Some(pc) = patch else {
        return f(0, movie);
    };
    let patches = extract_patches(movie, pc)?;
    let mut channels: Vec<Vec<Patch>> = Vec::new();
    for (i, p) in patches.iter().enumerate() {
        let outs = f(i, &p.data)?;
        if channels.is_empty() {
            channels = vec![Vec::with_capacity(patches.len()); outs.len()];
        }
        for (c, o) in outs.into_iter().enumerate() {
            channels[c].push(Patch { origin: p.origin, data: o });
        }
    }
    channels
        .iter()
        .map(|ps| Ok(recombine_patches(ps, movie.shape())?))
        .collect()
}

/// Patch triples of every labelled sample in a manifest directory.
pub fn load_pairs(dir: &Path, patch: &PatchConfig) -> Result<Vec<TrainPair>> {
    let manifest = DatasetManifest::load(dir).with_context(|| format!("loading dataset {}", dir.display()))?;
    let mut pairs = Vec::new();
    for (i, entry) in manifest.samples.iter().enumerate() {
        let (d, l, s) = manifest.read_sample(dir, i)?;
        let (Some(l), Some(s)) = (l, s) else {
            anyhow::bail!("sample {} in {} has no L/S targets", entry.index, dir.display());
        };
        pairs.extend(patch_pairs(&d, &l, &s, patch, entry.provenance)?);
    }
    Ok(pairs)
}

pub fn patch_pairs(
    d: &MovieTensor,
    l: &MovieTensor,
    s: &MovieTensor,
    patch: &PatchConfig,
    provenance: Provenance,
) -> Result<Vec<TrainPair>> {
    let pd = extract_patches(d, patch)?;
    let pl = extract_patches(l, patch)?;
    let ps = extract_patches(s, patch)?;
    pd.into_iter()
        .zip(pl)
        .zip(ps)
        .map(|((a, b), c)| Ok(TrainPair::new(a.data, b.data, c.data, provenance)?))
        .collect()
}
