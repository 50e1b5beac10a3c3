//! NPY (format 1.0) reading and writing for complex movies and real arrays.
//!
//! Header: `\x93NUMPY`, major, minor, little-endian u16 header length, then a
//! Python dict literal padded with spaces and a newline to a multiple of 64 bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{MovieShape, MovieTensor, C64};

use super::{atomic_write, read_bytes};

const MAGIC: &[u8; 6] = b"\x93NUMPY";

/// Element type of a complex NPY movie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComplexDtype {
    /// `<c8`: two little-endian f32.
    #[default]
    C8,
    /// `<c16`: two little-endian f64.
    C16,
}

impl ComplexDtype {
    pub fn descr(self) -> &'static str {
        match self {
            ComplexDtype::C8 => "<c8",
            ComplexDtype::C16 => "<c16",
        }
    }

    fn item_size(self) -> usize {
        match self {
            ComplexDtype::C8 => 8,
            ComplexDtype::C16 => 16,
        }
    }
}

/// Parsed header fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NpyHeader {
    pub descr: String,
    pub fortran_order: bool,
    pub shape: Vec<usize>,
    /// Offset of the first data byte.
    pub data_offset: usize,
}

fn header_bytes(descr: &str, shape: &[usize]) -> Vec<u8> {
    let dims = match shape {
        [n] => format!("({n},)"),
        _ => format!(
            "({})",
            shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut dict = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {dims}, }}");
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    dict.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    dict.push('\n');
    let mut out = Vec::with_capacity(10 + dict.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<NpyHeader> {
    let bad = |r: &str| Error::format(path, r.to_string());
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(bad("missing NPY magic"));
    }
    let (len, start) = match bytes[6] {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 if bytes.len() >= 12 => (u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize, 12),
        v => return Err(bad(&format!("unsupported NPY version {v}.{}", bytes[7]))),
    };
    let end = start + len;
    if bytes.len() < end {
        return Err(bad("truncated header"));
    }
    let text = std::str::from_utf8(&bytes[start..end]).map_err(|_| bad("header is not ASCII"))?;
    let text = text.trim_end();
    let body = text
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| bad("header is not a dict literal"))?;

    let value_of = |key: &str| -> Result<&str> {
        let pat = format!("'{key}':");
        let at = body.find(&pat).ok_or_else(|| bad(&format!("header lacks '{key}'")))?;
        Ok(body[at + pat.len()..].trim_start())
    };

    let descr_v = value_of("descr")?;
    let descr = descr_v
        .strip_prefix('\'')
        .and_then(|v| v.split('\'').next())
        .ok_or_else(|| bad("descr is not a string"))?
        .to_string();

    let fo = value_of("fortran_order")?;
    let fortran_order = if fo.starts_with("False") {
        false
    } else if fo.starts_with("True") {
        true
    } else {
        return Err(bad("fortran_order is not a bool"));
    };

    let sv = value_of("shape")?;
    let inner = sv
        .strip_prefix('(')
        .and_then(|v| v.split(')').next())
        .ok_or_else(|| bad("shape is not a tuple"))?;
    let shape = inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| bad(&format!("bad shape entry '{s}'"))))
        .collect::<Result<Vec<_>>>()?;

    Ok(NpyHeader {
        descr,
        fortran_order,
        shape,
        data_offset: end,
    })
}

/// Reads just the header of an NPY file.
pub fn read_npy_header(path: &Path) -> Result<NpyHeader> {
    use std::io::Read;
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    f.by_ref()
        .take(1 << 16)
        .read_to_end(&mut buf)
        .map_err(|e| Error::io(path, e))?;
    parse_header(&buf, path)
}

fn body<'a>(bytes: &'a [u8], h: &NpyHeader, item: usize, path: &Path) -> Result<&'a [u8]> {
    if h.fortran_order {
        return Err(Error::format(path, "Fortran-ordered arrays are not supported"));
    }
    let n: usize = h.shape.iter().product();
    let data = &bytes[h.data_offset..];
    if data.len() != n * item {
        return Err(Error::format(
            path,
            format!("expected {} data bytes, found {}", n * item, data.len()),
        ));
    }
    Ok(data)
}

pub fn encode_movie(movie: &MovieTensor, dtype: ComplexDtype) -> Vec<u8> {
    let s = movie.shape();
    let mut out = header_bytes(dtype.descr(), &[s.frames, s.height, s.width]);
    out.reserve(movie.data().len() * dtype.item_size());
    for z in movie.data() {
        match dtype {
            ComplexDtype::C8 => {
                out.extend_from_slice(&(z.re as f32).to_le_bytes());
                out.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
            ComplexDtype::C16 => {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    out
}

/// Decodes a rank-3 complex NPY image; `path` is only used in error messages.
pub fn decode_movie(bytes: &[u8], path: &Path) -> Result<(MovieTensor, ComplexDtype)> {
    let h = parse_header(bytes, path)?;
    let dtype = match h.descr.as_str() {
        "<c8" => ComplexDtype::C8,
        "<c16" => ComplexDtype::C16,
        other => return Err(Error::format(path, format!("dtype {other} is not little-endian complex"))),
    };
    if h.shape.len() != 3 {
        return Err(Error::Shape(format!(
            "{}: movie must have rank 3 (T, H, W), found shape {:?}",
            path.display(),
            h.shape
        )));
    }
    let data = body(bytes, &h, dtype.item_size(), path)?;
    let values: Vec<C64> = match dtype {
        ComplexDtype::C8 => data
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[..4].try_into().unwrap());
                let im = f32::from_le_bytes(c[4..].try_into().unwrap());
                C64::new(re as f64, im as f64)
            })
            .collect(),
        ComplexDtype::C16 => data
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect(),
    };
    let movie = MovieTensor::new(MovieShape::new(h.shape[0], h.shape[1], h.shape[2]), values)?;
    Ok((movie, dtype))
}

pub fn read_movie(path: &Path) -> Result<MovieTensor> {
    Ok(decode_movie(&read_bytes(path)?, path)?.0)
}

/// Writes with the default 8-byte complex element.
pub fn write_movie(movie: &MovieTensor, path: &Path) -> Result<()> {
    write_movie_as(movie, path, ComplexDtype::C8)
}

pub fn write_movie_as(movie: &MovieTensor, path: &Path, dtype: ComplexDtype) -> Result<()> {
    atomic_write(path, &encode_movie(movie, dtype))
}

/// `<f8` array of any rank.
pub fn write_real_array(path: &Path, shape: &[usize], data: &[f64]) -> Result<()> {
    if shape.iter().product::<usize>() != data.len() {
        return Err(Error::Shape(format!("shape {shape:?} does not hold {} values", data.len())));
    }
    let mut out = header_bytes("<f8", shape);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(path, &out)
}

pub fn read_real_array(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let bytes = read_bytes(path)?;
    let h = parse_header(&bytes, path)?;
    if h.descr != "<f8" {
        return Err(Error::format(path, format!("expected <f8, found {}", h.descr)));
    }
    let data = body(&bytes, &h, 8, path)?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((h.shape, data))
}
