//! Complex containers shared by every other module.
//!
//! A [`MovieTensor`] stores frames in frame-major, row-major order. A
//! [`CMatrix`] stores its entries column-major, so the Casorati matrix of a
//! movie (one column per frame, one row per pixel) has exactly the same
//! memory layout as the movie itself and `unfold`/`fold` are moves.

pub mod conv;
pub mod spectral;
pub mod svd;

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conv::{conv2d, conv2d_movie, ConvKernel2D};
pub use spectral::{spectral_norm, PowerIterOptions};
pub use svd::{svd, SvdFactors};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);

/// Shape of a movie: `(frames, height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MovieShape {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl MovieShape {
    pub fn new(frames: usize, height: usize, width: usize) -> Self {
        Self {
            frames,
            height,
            width,
        }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.frames * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_tuple(&self) -> (usize, usize, usize) {
        (self.frames, self.height, self.width)
    }
}

impl From<(usize, usize, usize)> for MovieShape {
    fn from((t, h, w): (usize, usize, usize)) -> Self {
        Self::new(t, h, w)
    }
}

impl std::fmt::Display for MovieShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.frames, self.height, self.width)
    }
}

/// A complex 3D array `(frames, height, width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MovieTensor {
    shape: MovieShape,
    data: Vec<C64>,
}

impl MovieTensor {
    /// Builds a movie, checking dimensions and finiteness.
    pub fn new(shape: impl Into<MovieShape>, data: Vec<C64>) -> Result<Self> {
        let shape = shape.into();
        if shape.frames == 0 || shape.height == 0 || shape.width == 0 {
            return Err(Error::Shape(format!("movie dimensions must be positive, got {shape}")));
        }
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "movie {shape} needs {} values, got {}",
                shape.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFinite(format!("movie entry {i} is {}", data[i])));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: impl Into<MovieShape>) -> Self {
        let shape = shape.into();
        assert!(!shape.is_empty(), "movie dimensions must be positive");
        Self {
            shape,
            data: vec![ZERO; shape.len()],
        }
    }

    /// Builds a movie from `f(t, y, x)`.
    pub fn from_fn(shape: impl Into<MovieShape>, mut f: impl FnMut(usize, usize, usize) -> C64) -> Self {
        let shape = shape.into();
        let mut m = Self::zeros(shape);
        for t in 0..shape.frames {
            for y in 0..shape.height {
                for x in 0..shape.width {
                    m.data[(t * shape.height + y) * shape.width + x] = f(t, y, x);
                }
            }
        }
        m
    }

    /// Stacks equally sized frames.
    pub fn from_frames(frames: &[Frame]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Shape("cannot build a movie from zero frames".into()))?;
        let shape = MovieShape::new(frames.len(), first.height, first.width);
        let mut data = Vec::with_capacity(shape.len());
        for f in frames {
            if f.height != first.height || f.width != first.width {
                return Err(Error::Shape("frames differ in size".into()));
            }
            data.extend_from_slice(&f.data);
        }
        Self::new(shape, data)
    }

    pub(crate) fn from_raw(shape: MovieShape, data: Vec<C64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> MovieShape {
        self.shape
    }

    pub fn frames(&self) -> usize {
        self.shape.frames
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn frame(&self, t: usize) -> &[C64] {
        let n = self.shape.pixels();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [C64] {
        let n = self.shape.pixels();
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn frame_owned(&self, t: usize) -> Frame {
        Frame {
            height: self.shape.height,
            width: self.shape.width,
            data: self.frame(t).to_vec(),
        }
    }

    pub fn get(&self, t: usize, y: usize, x: usize) -> C64 {
        self.data[(t * self.shape.height + y) * self.shape.width + x]
    }

    pub fn set(&mut self, t: usize, y: usize, x: usize, v: C64) {
        let w = self.shape.width;
        let h = self.shape.height;
        self.data[(t * h + y) * w + x] = v;
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_raw(self.shape, self.data.iter().map(|z| z * c).collect())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self::from_raw(self.shape, self.data.iter().map(|&z| f(z)).collect())
    }

    /// Casorati view: one column per frame.
    pub fn unfold(&self) -> CasoratiMatrix {
        unfold(self)
    }

    pub fn into_casorati(self) -> CasoratiMatrix {
        CMatrix {
            rows: self.shape.pixels(),
            cols: self.shape.frames,
            data: self.data,
        }
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!("{} vs {}", self.shape, other.shape)));
        }
        Ok(())
    }
}

/// A single complex frame (`height × width`, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pub data: Vec<C64>,
}

impl Frame {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![ZERO; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn get(&self, y: usize, x: usize) -> C64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: C64) {
        self.data[y * self.width + x] = v;
    }

    pub fn sum(&self) -> C64 {
        self.data.iter().sum()
    }
}

/// Dense complex matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

/// Pixels × frames matrix of a movie.
pub type CasoratiMatrix = CMatrix;

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds from column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Real diagonal matrix (`rows × cols`) with `diag` on the main diagonal.
    pub fn from_diag(rows: usize, cols: usize, diag: &[f64]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, &d) in diag.iter().enumerate().take(rows.min(cols)) {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Row `i` copied out (rows are strided in column-major storage).
    pub fn row(&self, i: usize) -> Vec<C64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            let out_col = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = rhs[(k, j)];
                if b == ZERO {
                    continue;
                }
                let a_col = &self.data[k * self.rows..(k + 1) * self.rows];
                for (o, &a) in out_col.iter_mut().zip(a_col) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᴴ · rhs` without materialising the adjoint.
    pub fn adjoint_matmul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.rows != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply ({}x{})ᴴ by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(CMatrix::from_fn(self.cols, rhs.cols, |i, j| {
            dot_conj(self.col(i), rhs.col(j))
        }))
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn scaled_complex(&self, c: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    /// Real part of the Frobenius inner product `⟨self, other⟩ = Σ conj(a)·b`.
    pub fn inner_re(&self, other: &CMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// Complex Frobenius inner product `Σ conj(a)·b`.
    pub fn inner(&self, other: &CMatrix) -> C64 {
        dot_conj(&self.data, &other.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    pub fn same_dims(&self, other: &CMatrix) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    /// Reinterprets a Casorati matrix as a movie of the given shape.
    pub fn fold(self, shape: impl Into<MovieShape>) -> Result<MovieTensor> {
        fold_owned(self, shape.into())
    }
}

/// `Σ conj(a_i) · b_i`
pub(crate) fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[j * self.rows + i]
    }
}

macro_rules! elementwise_ops {
    ($ty:ty, $check:ident) => {
        impl Add for &$ty {
            type Output = $ty;
            fn add(self, rhs: &$ty) -> $ty {
                self.$check(rhs).expect("operand shapes differ");
                let mut out = self.clone();
                out += rhs;
                out
            }
        }

        impl Sub for &$ty {
            type Output = $ty;
            fn sub(self, rhs: &$ty) -> $ty {
                self.$check(rhs).expect("operand shapes differ");
                let mut out = self.clone();
                out -= rhs;
                out
            }
        }

        impl AddAssign<&$ty> for $ty {
            fn add_assign(&mut self, rhs: &$ty) {
                assert_eq!(self.data.len(), rhs.data.len(), "operand shapes differ");
                for (a, b) in self.data.iter_mut().zip(&rhs.data) {
                    *a += b;
                }
            }
        }

        impl SubAssign<&$ty> for $ty {
            fn sub_assign(&mut self, rhs: &$ty) {
                assert_eq!(self.data.len(), rhs.data.len(), "operand shapes differ");
                for (a, b) in self.data.iter_mut().zip(&rhs.data) {
                    *a -= b;
                }
            }
        }

        impl Mul<f64> for &$ty {
            type Output = $ty;
            fn mul(self, c: f64) -> $ty {
                self.scaled(c)
            }
        }

        impl Neg for &$ty {
            type Output = $ty;
            fn neg(self) -> $ty {
                self.scaled(-1.0)
            }
        }
    };
}

elementwise_ops!(CMatrix, same_dims);
elementwise_ops!(MovieTensor, same_shape);

/// Casorati matrix of a movie: column `t` is frame `t` in row-major pixel order.
pub fn unfold(movie: &MovieTensor) -> CasoratiMatrix {
    movie.clone().into_casorati()
}

/// Inverse of [`unfold`].
pub fn fold(mat: &CasoratiMatrix, shape: impl Into<MovieShape>) -> Result<MovieTensor> {
    fold_owned(mat.clone(), shape.into())
}

fn fold_owned(mat: CMatrix, shape: MovieShape) -> Result<MovieTensor> {
    if mat.rows != shape.pixels() || mat.cols != shape.frames {
        return Err(Error::Shape(format!(
            "cannot fold a {}x{} matrix into {shape}",
            mat.rows, mat.cols
        )));
    }
    MovieTensor::new(shape, mat.data)
}
