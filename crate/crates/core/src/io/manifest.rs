//! Dataset manifests: which NPY files form each `(D, L, S)` sample.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{MovieShape, MovieTensor};
use crate::train::Provenance;

use super::{read_json, read_movie, read_npy_header, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSample {
    pub index: usize,
    pub seed: Option<u64>,
    pub provenance: Provenance,
    pub shape: MovieShape,
    /// Paths relative to the manifest directory.
    pub d: String,
    pub l: Option<String>,
    pub s: Option<String>,
}

impl ManifestSample {
    pub fn files(&self) -> impl Iterator<Item = (&'static str, &str)> {
        [("D", Some(self.d.as_str())), ("L", self.l.as_deref()), ("S", self.s.as_deref())]
            .into_iter()
            .filter_map(|(role, p)| p.map(|p| (role, p)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub samples: Vec<ManifestSample>,
}

impl DatasetManifest {
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    /// Reads `dir/manifest.json` and checks it against the files on disk.
    pub fn load(dir: &Path) -> Result<Self> {
        let m: Self = read_json(&dir.join(MANIFEST_FILE))?;
        m.validate(dir)?;
        Ok(m)
    }

    /// Every referenced file exists and its header shape equals the declared shape.
    pub fn validate(&self, dir: &Path) -> Result<()> {
        for s in &self.samples {
            for (role, rel) in s.files() {
                let path = dir.join(rel);
                let h = read_npy_header(&path)?;
                let want = [s.shape.frames, s.shape.height, s.shape.width];
                if h.shape != want {
                    return Err(Error::format(
                        &path,
                        format!("sample {} role {role}: file shape {:?} != manifest {:?}", s.index, h.shape, want),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Loads `(D, L, S)` for one sample.
    pub fn read_sample(
        &self,
        dir: &Path,
        i: usize,
    ) -> Result<(MovieTensor, Option<MovieTensor>, Option<MovieTensor>)> {
        let s = self
            .samples
            .get(i)
            .ok_or_else(|| Error::Config(format!("sample {i} not in manifest")))?;
        let opt = |p: &Option<String>| p.as_deref().map(|r| read_movie(&dir.join(r))).transpose();
        Ok((read_movie(&dir.join(&s.d))?, opt(&s.l)?, opt(&s.s)?))
    }
}
