//! 2D complex cross-correlation with zero padding and unit stride.
//!
//! Kernels are not flipped: `out[y, x] = bias + Σ k[a, b] · in[y + a - ph, x + b - pw]`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Frame, MovieShape, MovieTensor, C64, ZERO};
use crate::error::{Error, Result};

/// A complex 2D kernel with a complex bias. Taps are row-major `kh × kw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvKernel2D {
    kh: usize,
    kw: usize,
    taps: Vec<C64>,
    pub bias: C64,
    padding: (usize, usize),
}

impl ConvKernel2D {
    /// Odd-sized kernel with "same" padding and zero bias.
    pub fn new(kh: usize, kw: usize, taps: Vec<C64>) -> Result<Self> {
        if kh.is_multiple_of(2) || kw.is_multiple_of(2) {
            return Err(Error::Shape(format!("kernel extents must be odd, got {kh}x{kw}")));
        }
        Self::with_padding(kh, kw, taps, ((kh - 1) / 2, (kw - 1) / 2))
    }

    pub fn with_padding(kh: usize, kw: usize, taps: Vec<C64>, padding: (usize, usize)) -> Result<Self> {
        if kh == 0 || kw == 0 || kh.is_multiple_of(2) || kw.is_multiple_of(2) {
            return Err(Error::Shape(format!("kernel extents must be odd, got {kh}x{kw}")));
        }
        if taps.len() != kh * kw {
            return Err(Error::Shape(format!(
                "{kh}x{kw} kernel needs {} taps, got {}",
                kh * kw,
                taps.len()
            )));
        }
        Ok(Self {
            kh,
            kw,
            taps,
            bias: ZERO,
            padding,
        })
    }

    pub fn zeros(kh: usize, kw: usize) -> Result<Self> {
        Self::new(kh, kw, vec![ZERO; kh * kw])
    }

    /// `scale` at the centre tap, zero elsewhere.
    pub fn impulse(kh: usize, kw: usize, scale: C64) -> Result<Self> {
        let mut k = Self::zeros(kh, kw)?;
        let c = (kh / 2) * kw + kw / 2;
        k.taps[c] = scale;
        Ok(k)
    }

    pub fn with_bias(mut self, bias: C64) -> Self {
        self.bias = bias;
        self
    }

    pub fn kh(&self) -> usize {
        self.kh
    }

    pub fn kw(&self) -> usize {
        self.kw
    }

    pub fn padding(&self) -> (usize, usize) {
        self.padding
    }

    pub fn taps(&self) -> &[C64] {
        &self.taps
    }

    pub fn taps_mut(&mut self) -> &mut [C64] {
        &mut self.taps
    }

    pub fn tap(&self, a: usize, b: usize) -> C64 {
        self.taps[a * self.kw + b]
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut k = self.clone();
        k.taps.iter_mut().for_each(|t| *t *= c);
        k.bias *= c;
        k
    }

    /// Output extent for an input of the given size.
    pub fn output_size(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        let oh = (height + 2 * self.padding.0 + 1).checked_sub(self.kh);
        let ow = (width + 2 * self.padding.1 + 1).checked_sub(self.kw);
        match (oh, ow) {
            (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok((oh, ow)),
            _ => Err(Error::Shape(format!(
                "{}x{} kernel does not fit a {height}x{width} input",
                self.kh, self.kw
            ))),
        }
    }
}

/// Accumulates `kernel ⋆ input` (without bias) into `out`.
fn correlate_into(
    input: &[C64],
    (h, w): (usize, usize),
    kernel: &ConvKernel2D,
    out: &mut [C64],
    (oh, ow): (usize, usize),
) {
    let (ph, pw) = (kernel.padding.0 as isize, kernel.padding.1 as isize);
    for a in 0..kernel.kh {
        for b in 0..kernel.kw {
            let k = kernel.taps[a * kernel.kw + b];
            if k == ZERO {
                continue;
            }
            let dy = a as isize - ph;
            let dx = b as isize - pw;
            // valid output columns: 0 <= x + dx < w
            let x0 = (-dx).max(0) as usize;
            let x1 = ((w as isize - dx).min(ow as isize)).max(0) as usize;
            if x0 >= x1 {
                continue;
            }
            for y in 0..oh {
                let iy = y as isize + dy;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                let in_row = &input[iy as usize * w..(iy as usize + 1) * w];
                let out_row = &mut out[y * ow..(y + 1) * ow];
                for x in x0..x1 {
                    out_row[x] += k * in_row[(x as isize + dx) as usize];
                }
            }
        }
    }
}

/// Cross-correlates one frame with `kernel` and adds its bias.
pub fn conv2d(frame: &Frame, kernel: &ConvKernel2D) -> Result<Frame> {
    let (oh, ow) = kernel.output_size(frame.height, frame.width)?;
    let mut out = vec![kernel.bias; oh * ow];
    correlate_into(&frame.data, (frame.height, frame.width), kernel, &mut out, (oh, ow));
    Ok(Frame {
        height: oh,
        width: ow,
        data: out,
    })
}

/// [`conv2d`] applied independently to every frame with a shared kernel.
pub fn conv2d_movie(movie: &MovieTensor, kernel: &ConvKernel2D) -> Result<MovieTensor> {
    let (h, w) = (movie.height(), movie.width());
    let (oh, ow) = kernel.output_size(h, w)?;
    let shape = MovieShape::new(movie.frames(), oh, ow);
    let mut data = vec![kernel.bias; shape.len()];
    data.par_chunks_mut(oh * ow)
        .zip(movie.data().par_chunks(h * w))
        .for_each(|(out, input)| correlate_into(input, (h, w), kernel, out, (oh, ow)));
    Ok(MovieTensor::from_raw(shape, data))
}

/// Adds `kernel ⋆ movie` (bias included) into `acc`, which must have the output shape.
pub(crate) fn conv2d_movie_accumulate(
    movie: &MovieTensor,
    kernel: &ConvKernel2D,
    acc: &mut MovieTensor,
) -> Result<()> {
    let (h, w) = (movie.height(), movie.width());
    let (oh, ow) = kernel.output_size(h, w)?;
    if acc.shape() != MovieShape::new(movie.frames(), oh, ow) {
        return Err(Error::Shape("accumulator shape differs from convolution output".into()));
    }
    let bias = kernel.bias;
    acc.data_mut()
        .par_chunks_mut(oh * ow)
        .zip(movie.data().par_chunks(h * w))
        .for_each(|(out, input)| {
            if bias != ZERO {
                out.iter_mut().for_each(|o| *o += bias);
            }
            correlate_into(input, (h, w), kernel, out, (oh, ow));
        });
    Ok(())
}

/// Gradients of a real loss through `out = kernel ⋆ input + bias`.
///
/// Complex gradients follow the real/imaginary convention `∂ℓ/∂Re + i ∂ℓ/∂Im`.
pub(crate) struct ConvGrads {
    pub taps: Vec<C64>,
    pub bias: C64,
}

/// Gradient with respect to the kernel taps and bias.
pub(crate) fn conv2d_movie_param_grad(
    grad_out: &MovieTensor,
    input: &MovieTensor,
    kernel: &ConvKernel2D,
) -> ConvGrads {
    let (h, w) = (input.height(), input.width());
    let (oh, ow) = (grad_out.height(), grad_out.width());
    let (ph, pw) = (kernel.padding.0 as isize, kernel.padding.1 as isize);
    let mut taps = vec![ZERO; kernel.kh * kernel.kw];
    for (a_b, g) in taps.iter_mut().enumerate() {
        let (a, b) = (a_b / kernel.kw, a_b % kernel.kw);
        let dy = a as isize - ph;
        let dx = b as isize - pw;
        let x0 = (-dx).max(0) as usize;
        let x1 = ((w as isize - dx).min(ow as isize)).max(0) as usize;
        let mut acc = ZERO;
        for t in 0..input.frames() {
            let gin = grad_out.frame(t);
            let fin = input.frame(t);
            for y in 0..oh {
                let iy = y as isize + dy;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                let in_row = &fin[iy as usize * w..(iy as usize + 1) * w];
                let g_row = &gin[y * ow..(y + 1) * ow];
                for x in x0..x1 {
                    acc += g_row[x] * in_row[(x as isize + dx) as usize].conj();
                }
            }
        }
        *g = acc;
    }
    let bias = grad_out.data().iter().sum();
    ConvGrads { taps, bias }
}

/// Gradient with respect to the input, accumulated into `grad_in`.
pub(crate) fn conv2d_movie_input_grad_accumulate(
    grad_out: &MovieTensor,
    kernel: &ConvKernel2D,
    grad_in: &mut MovieTensor,
) {
    let (h, w) = (grad_in.height(), grad_in.width());
    let (oh, ow) = (grad_out.height(), grad_out.width());
    let (ph, pw) = (kernel.padding.0 as isize, kernel.padding.1 as isize);
    grad_in
        .data_mut()
        .par_chunks_mut(h * w)
        .zip(grad_out.data().par_chunks(oh * ow))
        .for_each(|(gi, go)| {
            for a in 0..kernel.kh {
                for b in 0..kernel.kw {
                    let k: Complex64 = kernel.taps[a * kernel.kw + b].conj();
                    if k == ZERO {
                        continue;
                    }
                    let dy = a as isize - ph;
                    let dx = b as isize - pw;
                    let x0 = (-dx).max(0) as usize;
                    let x1 = ((w as isize - dx).min(ow as isize)).max(0) as usize;
                    for y in 0..oh {
                        let iy = y as isize + dy;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let gi_row = &mut gi[iy as usize * w..(iy as usize + 1) * w];
                        let go_row = &go[y * ow..(y + 1) * ow];
                        for x in x0..x1 {
                            gi_row[(x as isize + dx) as usize] += k * go_row[x];
                        }
                    }
                }
            }
        });
}
