//! Real-valued rasters and binary masks.
//!
//! Samples are stored row-major and addressed as `(row, col)`. Every
//! intermediate of the decomposition (cartoon, texture, residual, the
//! auxiliary splitting variables and the multipliers) lives in an
//! [`ImageGrid`].

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense `rows x cols` raster of real samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid<T> {
    rows: usize,
    cols: usize,
    samples: Vec<T>,
}

impl<T: Real> ImageGrid<T> {
    /// Wraps `samples` (row-major). Rejects a length mismatch, an empty
    /// extent and non-finite values.
    pub fn new(rows: usize, cols: usize, samples: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::GridTooSmall {
                rows,
                cols,
                reason: "grid must be non-empty".into(),
            });
        }
        if samples.len() != rows * cols {
            return Err(Error::invalid(format!(
                "sample count {} does not match {rows}x{cols}",
                samples.len()
            )));
        }
        if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite sample at ({}, {})",
                k / cols,
                k % cols
            )));
        }
        Ok(Self { rows, cols, samples })
    }

    /// Builds a grid without validation. Callers guarantee the length.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, samples: Vec<T>) -> Self {
        debug_assert_eq!(samples.len(), rows * cols);
        Self { rows, cols, samples }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        assert!(rows > 0 && cols > 0, "grid must be non-empty");
        Self::from_vec_unchecked(rows, cols, vec![value; rows * cols])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(rows > 0 && cols > 0, "grid must be non-empty");
        let mut samples = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                samples.push(f(i, j));
            }
        }
        Self::from_vec_unchecked(rows, cols, samples)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.samples
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.samples
    }

    pub fn into_vec(self) -> Vec<T> {
        self.samples
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.samples[row * self.cols + col]
    }

    /// Sample at `(row + dr, col + dc)` with periodic wrap-around.
    #[inline]
    pub fn get_wrapped(&self, row: usize, col: usize, dr: isize, dc: isize) -> T {
        let r = (row as isize + dr).rem_euclid(self.rows as isize) as usize;
        let c = (col as isize + dc).rem_euclid(self.cols as isize) as usize;
        self.samples[r * self.cols + c]
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_dims(&self, rows: usize, cols: usize) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(Error::DimensionMismatch {
                expected_rows: self.rows,
                expected_cols: self.cols,
                rows,
                cols,
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_vec_unchecked(self.rows, self.cols, self.samples.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise combination; panics on a dimension mismatch (internal use).
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.dims(), other.dims(), "grid dimensions differ");
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_vec_unchecked(self.rows, self.cols, samples)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: T, other: &Self) {
        assert_eq!(self.dims(), other.dims(), "grid dimensions differ");
        for (a, &b) in self.samples.iter_mut().zip(&other.samples) {
            *a = *a + c * b;
        }
    }

    pub fn dot(&self, other: &Self) -> T {
        assert_eq!(self.dims(), other.dims(), "grid dimensions differ");
        self.samples
            .iter()
            .zip(&other.samples)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn norm_l2(&self) -> T {
        self.samples.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.samples.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn sum(&self) -> T {
        self.samples.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.sum() / T::lit(self.len() as f64)
    }

    /// Converts every sample to another scalar type.
    pub fn cast<U: Real>(&self) -> ImageGrid<U> {
        ImageGrid::from_vec_unchecked(
            self.rows,
            self.cols,
            self.samples.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        )
    }
}

impl<T> Index<(usize, usize)> for ImageGrid<T> {
    type Output = T;
    #[inline]
    fn index(&self, (row, col): (usize, usize)) -> &T {
        &self.samples[row * self.cols + col]
    }
}

impl<T> IndexMut<(usize, usize)> for ImageGrid<T> {
    #[inline]
    fn index_mut(&mut self, (row, col): (usize, usize)) -> &mut T {
        &mut self.samples[row * self.cols + col]
    }
}

/// Binary raster. Used for the missing region `D` (true = missing), the
/// texture inpainting mask `I`, and region-of-interest masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

/// Missing-pixel indicator: `true` marks a pixel of `D`.
pub type MaskD = Mask;

impl Mask {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::GridTooSmall {
                rows,
                cols,
                reason: "mask must be non-empty".into(),
            });
        }
        if bits.len() != rows * cols {
            return Err(Error::invalid(format!(
                "mask length {} does not match {rows}x{cols}",
                bits.len()
            )));
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self { rows, cols, bits: vec![false; rows * cols] }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self { rows, cols, bits: vec![true; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                bits.push(f(i, j));
            }
        }
        Self { rows, cols, bits }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.cols + col] = value;
    }

    #[inline]
    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.len() as f64
    }

    /// Flipped indicator. For a missing-region mask this is the known set.
    pub fn complement(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.dims(), other.dims(), "mask dimensions differ");
        Self {
            rows: self.rows,
            cols: self.cols,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a || b).collect(),
        }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        assert_eq!(self.dims(), other.dims(), "mask dimensions differ");
        Self {
            rows: self.rows,
            cols: self.cols,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect(),
        }
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Indicator as 0/1 samples.
    pub fn to_weights<T: Real>(&self) -> ImageGrid<T> {
        ImageGrid::from_vec_unchecked(
            self.rows,
            self.cols,
            self.bits.iter().map(|&b| if b { T::one() } else { T::zero() }).collect(),
        )
    }

    /// `chi_D^c` as 0/1 samples: one on known pixels, zero inside `D`.
    pub fn known_weights<T: Real>(&self) -> ImageGrid<T> {
        ImageGrid::from_vec_unchecked(
            self.rows,
            self.cols,
            self.bits.iter().map(|&b| if b { T::zero() } else { T::one() }).collect(),
        )
    }

    pub fn ensure_dims(&self, rows: usize, cols: usize) -> Result<()> {
        if self.dims() != (rows, cols) {
            return Err(Error::DimensionMismatch {
                expected_rows: rows,
                expected_cols: cols,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }
}

/// Right-hand operand of [`pointwise_mul`]: a grid or a mask indicator.
pub trait PointwiseFactor<T> {
    fn factor_dims(&self) -> (usize, usize);
    fn factor(&self, k: usize) -> T;
}

impl<T: Real> PointwiseFactor<T> for ImageGrid<T> {
    fn factor_dims(&self) -> (usize, usize) {
        self.dims()
    }
    #[inline]
    fn factor(&self, k: usize) -> T {
        self.samples[k]
    }
}

impl<T: Real> PointwiseFactor<T> for Mask {
    fn factor_dims(&self) -> (usize, usize) {
        self.dims()
    }
    #[inline]
    fn factor(&self, k: usize) -> T {
        if self.bits[k] {
            T::one()
        } else {
            T::zero()
        }
    }
}

/// Elementwise product `a .x b`.
pub fn pointwise_mul<T: Real, F: PointwiseFactor<T>>(a: &ImageGrid<T>, b: &F) -> Result<ImageGrid<T>> {
    let (rows, cols) = b.factor_dims();
    a.ensure_same_dims(rows, cols)?;
    let samples = a
        .samples
        .iter()
        .enumerate()
        .map(|(k, &v)| v * b.factor(k))
        .collect();
    Ok(ImageGrid::from_vec_unchecked(a.rows, a.cols, samples))
}

/// Display quantization: clamp to `[0, 255]` and round half away from zero.
pub fn quantize_preview<T: Real>(a: &ImageGrid<T>) -> ImageGrid<T> {
    let hi = T::lit(255.0);
    a.map(|v| v.max(T::zero()).min(hi).round())
}

/// Same as [`quantize_preview`] but yields bytes for PGM output.
pub fn quantize_bytes<T: Real>(a: &ImageGrid<T>) -> Vec<u8> {
    quantize_preview(a)
        .as_slice()
        .iter()
        .map(|v| v.to_f64_lossy() as u8)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rows: usize, cols: usize, seed: u64) -> ImageGrid<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageGrid::from_fn(rows, cols, |_, _| rng.random_range(-10.0..10.0))
    }

    #[test]
    fn mul_by_full_and_empty_masks() {
        let a = random_grid(5, 6, 1);
        assert_eq!(pointwise_mul(&a, &Mask::full(5, 6)).unwrap(), a);
        assert_eq!(pointwise_mul(&a, &Mask::empty(5, 6)).unwrap(), ImageGrid::zeros(5, 6));
    }

    #[test]
    fn mul_checkerboard_matches_scalar_loop() {
        let a = random_grid(3, 3, 7);
        let mask = Mask::from_fn(3, 3, |i, j| (i + j) % 2 == 0);
        let out = pointwise_mul(&a, &mask).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let chi = if (i + j) % 2 == 0 { 1.0 } else { 0.0 };
                assert_eq!(out[(i, j)], a[(i, j)] * chi);
            }
        }
    }

    #[test]
    fn mul_dimension_mismatch_is_error() {
        let a = random_grid(4, 4, 2);
        let b = random_grid(4, 5, 3);
        assert!(matches!(pointwise_mul(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn quantize_clamps_and_rounds() {
        let a = ImageGrid::new(1, 4, vec![300.7, -5.0, 127.5, 12.49]).unwrap();
        assert_eq!(quantize_preview(&a).as_slice(), &[255.0, 0.0, 128.0, 12.0]);
    }

    #[test]
    fn new_rejects_non_finite() {
        assert!(ImageGrid::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(ImageGrid::<f64>::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn complement_is_involution() {
        let m = Mask::from_fn(6, 7, |i, j| (i * 3 + j) % 4 == 1);
        assert_eq!(m.complement().complement(), m);
        assert_eq!(m.count() + m.complement().count(), 42);
    }

    proptest! {
        #[test]
        fn mul_commutes_and_associates(seed in 0u64..1000) {
            let a = random_grid(4, 5, seed);
            let b = random_grid(4, 5, seed + 1);
            let c = random_grid(4, 5, seed + 2);
            prop_assert_eq!(pointwise_mul(&a, &b).unwrap(), pointwise_mul(&b, &a).unwrap());
            let left = pointwise_mul(&pointwise_mul(&a, &b).unwrap(), &c).unwrap();
            let right = pointwise_mul(&a, &pointwise_mul(&b, &c).unwrap()).unwrap();
            // Products of three floats may differ in the last bit between groupings.
            for (l, r) in left.as_slice().iter().zip(right.as_slice()) {
                prop_assert!((l - r).abs() <= 1e-12 * l.abs().max(1.0));
            }
        }

        #[test]
        fn quantize_is_idempotent(vals in proptest::collection::vec(-1000.0f64..1000.0, 16)) {
            let a = ImageGrid::new(4, 4, vals).unwrap();
            let q = quantize_preview(&a);
            prop_assert_eq!(quantize_preview(&q), q);
        }
    }
}
