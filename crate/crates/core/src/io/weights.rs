//! Versioned binary container for network weights. All integers are
//! little-endian u32 and all reals little-endian f64.
//!
//! ```text
//! magic "CORONAW\0", version, K, kernel size of each layer (K values),
//! a_L, a_S, threshold mode (0 learned, 1 pinned), thr_L, thr_S,
//! per layer: six kernels p1..p6, each
//!     kh, kw, pad_h, pad_w, kh·kw taps as (re, im), bias (re, im)
//!   then λ_L, λ_S
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::net::{CoronaNetwork, LayerParams, ThresholdMode};
use crate::tensor::{ConvKernel2D, C64};

use super::{atomic_write, read_bytes};

pub const WEIGHTS_MAGIC: &[u8; 8] = b"CORONAW\0";
pub const WEIGHTS_VERSION: u32 = 1;

pub fn encode_weights(net: &CoronaNetwork) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + net.param_count() * 8);
    let u32_ = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    let f64_ = |out: &mut Vec<u8>, v: f64| out.extend_from_slice(&v.to_le_bytes());

    out.extend_from_slice(WEIGHTS_MAGIC);
    u32_(&mut out, WEIGHTS_VERSION as usize);
    u32_(&mut out, net.depth());
    for layer in &net.layers {
        u32_(&mut out, layer.p1.kh());
    }
    f64_(&mut out, net.a_l);
    f64_(&mut out, net.a_s);
    let (tag, tl, ts) = match net.thresholds {
        ThresholdMode::Learned => (0, 0.0, 0.0),
        ThresholdMode::Pinned { thr_l, thr_s } => (1, thr_l, thr_s),
    };
    u32_(&mut out, tag);
    f64_(&mut out, tl);
    f64_(&mut out, ts);
    for layer in &net.layers {
        for k in layer.kernels() {
            let (ph, pw) = k.padding();
            for v in [k.kh(), k.kw(), ph, pw] {
                u32_(&mut out, v);
            }
            for t in k.taps() {
                f64_(&mut out, t.re);
                f64_(&mut out, t.im);
            }
            f64_(&mut out, k.bias.re);
            f64_(&mut out, k.bias.im);
        }
        f64_(&mut out, layer.lambda_l);
        f64_(&mut out, layer.lambda_s);
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Corrupt(format!(
                "file truncated at byte {} (needed {n} more)",
                self.buf.len()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<CoronaNetwork> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8).map_err(|_| Error::Corrupt("file shorter than magic".into()))? != WEIGHTS_MAGIC {
        return Err(Error::Corrupt("bad magic".into()));
    }
    let version = r.u32()?;
    if version != WEIGHTS_VERSION {
        return Err(Error::Version {
            found: version,
            expected: WEIGHTS_VERSION,
        });
    }
    let k = r.u32()? as usize;
    if k == 0 || k > 10_000 {
        return Err(Error::Corrupt(format!("implausible layer count {k}")));
    }
    let sizes = (0..k).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let a_l = r.f64()?;
    let a_s = r.f64()?;
    let tag = r.u32()?;
    let (tl, ts) = (r.f64()?, r.f64()?);
    let thresholds = match tag {
        0 => ThresholdMode::Learned,
        1 => ThresholdMode::Pinned { thr_l: tl, thr_s: ts },
        t => return Err(Error::Corrupt(format!("unknown threshold mode {t}"))),
    };

    let mut layers = Vec::with_capacity(k);
    for (i, &size) in sizes.iter().enumerate() {
        let mut kernels = Vec::with_capacity(6);
        for _ in 0..6 {
            let (kh, kw, ph, pw) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
            if kh != size || kw != size {
                return Err(Error::Corrupt(format!(
                    "layer {i} kernel is {kh}x{kw}, header declares {size}"
                )));
            }
            let mut taps = Vec::with_capacity(kh * kw);
            for _ in 0..kh * kw {
                taps.push(C64::new(r.f64()?, r.f64()?));
            }
            let bias = C64::new(r.f64()?, r.f64()?);
            let kern = ConvKernel2D::with_padding(kh, kw, taps, (ph, pw))
                .map_err(|e| Error::Corrupt(format!("layer {i}: {e}")))?
                .with_bias(bias);
            kernels.push(kern);
        }
        let lambda_l = r.f64()?;
        let lambda_s = r.f64()?;
        let mut it = kernels.into_iter();
        let mut next = || it.next().unwrap();
        layers.push(LayerParams {
            p1: next(),
            p2: next(),
            p3: next(),
            p4: next(),
            p5: next(),
            p6: next(),
            lambda_l,
            lambda_s,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(CoronaNetwork {
        layers,
        a_l,
        a_s,
        thresholds,
    })
}

pub fn save_weights(net: &CoronaNetwork, path: &Path) -> Result<()> {
    atomic_write(path, &encode_weights(net))
}

pub fn load_weights(path: &Path) -> Result<CoronaNetwork> {
    decode_weights(&read_bytes(path)?)
}
