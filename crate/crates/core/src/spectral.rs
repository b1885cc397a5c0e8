//! 2-D DFT plumbing and discrete directional derivatives.
//!
//! Conventions: the forward transform is unnormalized, the inverse carries
//! the `1/(m n)` factor. Frequency index `(k1, k2)` maps to
//! `omega = (2 pi k1 / m, 2 pi k2 / n)`, with `z1 = exp(j omega1)` acting on
//! rows and `z2 = exp(j omega2)` on columns. All boundaries are periodic.
//!
//! The forward directional derivative at angle `theta_l = pi l / L` is
//!
//! ```text
//! d_l^+ x[i, j] = cos(theta_l) (x[i, j+1] - x[i, j]) + sin(theta_l) (x[i+1, j] - x[i, j])
//! ```
//!
//! with symbol `P_l(z) = cos(theta_l)(z2 - 1) + sin(theta_l)(z1 - 1)`. The
//! backward derivative uses backward differences and has symbol
//! `-conj(P_l)`, so that `<d_l^+ x, y> = -<x, d_l^- y>`.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::scalar::Real;

/// Complex samples on the `rows x cols` DFT frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumGrid<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> SpectrumGrid<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "spectrum length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex::new(T::zero(), T::zero()); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for k1 in 0..rows {
            for k2 in 0..cols {
                data.push(f(k1, k2));
            }
        }
        Self { rows, cols, data }
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
    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, k1: usize, k2: usize) -> Complex<T> {
        self.data[k1 * self.cols + k2]
    }

    /// Value at the mirrored frequency `(-k1, -k2)`.
    #[inline]
    pub fn get_mirrored(&self, k1: usize, k2: usize) -> Complex<T> {
        let r = (self.rows - k1) % self.rows;
        let c = (self.cols - k2) % self.cols;
        self.data[r * self.cols + c]
    }

    /// Pointwise product with another spectrum.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dims(), other.dims());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        }
    }

    /// Largest deviation from conjugate symmetry `X(-w) = conj(X(w))`.
    pub fn conjugate_symmetry_defect(&self) -> T {
        let mut worst = T::zero();
        for k1 in 0..self.rows {
            for k2 in 0..self.cols {
                let d = self.get(k1, k2) - self.get_mirrored(k1, k2).conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }
}

/// Angular frequencies `(omega1, omega2)` of bin `(k1, k2)`, folded to `[-pi, pi)`.
#[inline]
pub fn angular_frequency<T: Real>(k1: usize, k2: usize, rows: usize, cols: usize) -> (T, T) {
    let fold = |k: usize, n: usize| {
        let k = if 2 * k >= n { k as f64 - n as f64 } else { k as f64 };
        T::lit(std::f64::consts::TAU * k / n as f64)
    };
    (fold(k1, rows), fold(k2, cols))
}

/// Reusable 2-D FFT plan for a fixed grid size.
#[derive(Clone)]
pub struct Fft2<T: Real> {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Fft2<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("rows", &self.rows).field("cols", &self.cols).finish()
    }
}

impl<T: Real> Fft2<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn transform(&self, data: &mut [Complex<T>], inverse: bool) {
        let (m, n) = (self.rows, self.cols);
        assert_eq!(data.len(), m * n, "buffer does not match plan size");
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row.process(data);
        let mut transposed = vec![Complex::new(T::zero(), T::zero()); m * n];
        for i in 0..m {
            for j in 0..n {
                transposed[j * m + i] = data[i * n + j];
            }
        }
        col.process(&mut transposed);
        for j in 0..n {
            for i in 0..m {
                data[i * n + j] = transposed[j * m + i];
            }
        }
        if inverse {
            let scale = T::one() / T::lit((m * n) as f64);
            data.iter_mut().for_each(|v| *v = *v * scale);
        }
    }

    /// In-place unnormalized forward transform.
    pub fn forward_in_place(&self, data: &mut [Complex<T>]) {
        self.transform(data, false);
    }

    /// In-place inverse transform including the `1/(m n)` factor.
    pub fn inverse_in_place(&self, data: &mut [Complex<T>]) {
        self.transform(data, true);
    }

    pub fn forward(&self, x: &ImageGrid<T>) -> SpectrumGrid<T> {
        assert_eq!(x.dims(), self.dims(), "grid does not match plan size");
        let mut data: Vec<Complex<T>> =
            x.as_slice().iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.forward_in_place(&mut data);
        SpectrumGrid { rows: self.rows, cols: self.cols, data }
    }

    pub fn forward_complex(&self, x: &SpectrumGrid<T>) -> SpectrumGrid<T> {
        let mut out = x.clone();
        self.forward_in_place(&mut out.data);
        out
    }

    /// Complex inverse transform.
    pub fn inverse_complex(&self, spectrum: &SpectrumGrid<T>) -> SpectrumGrid<T> {
        let mut out = spectrum.clone();
        self.inverse_in_place(&mut out.data);
        out
    }

    /// Real part of the inverse transform.
    pub fn inverse_real(&self, spectrum: &SpectrumGrid<T>) -> ImageGrid<T> {
        let mut data = spectrum.data.clone();
        self.inverse_in_place(&mut data);
        ImageGrid::from_vec_unchecked(self.rows, self.cols, data.iter().map(|c| c.re).collect())
    }

    /// Like [`Fft2::inverse_real`] for spectra that must come from a real
    /// signal. In debug builds asserts that the discarded imaginary part is
    /// negligible.
    pub fn inverse_real_checked(&self, spectrum: &SpectrumGrid<T>) -> ImageGrid<T> {
        let mut data = spectrum.data.clone();
        self.inverse_in_place(&mut data);
        if cfg!(debug_assertions) {
            let scale = data.iter().fold(T::one(), |a, c| a.max(c.re.abs()));
            let worst = data.iter().fold(T::zero(), |a, c| a.max(c.im.abs()));
            debug_assert!(
                worst <= T::lit(1e-9) * scale,
                "imaginary residue {worst} on a real-symbol solve"
            );
        }
        ImageGrid::from_vec_unchecked(self.rows, self.cols, data.iter().map(|c| c.re).collect())
    }
}

/// Unnormalized 2-D DFT of a real grid.
pub fn dft2<T: Real>(x: &ImageGrid<T>) -> SpectrumGrid<T> {
    Fft2::new(x.rows(), x.cols()).forward(x)
}

/// Inverse 2-D DFT, returning the real part.
pub fn idft2<T: Real>(spectrum: &SpectrumGrid<T>) -> ImageGrid<T> {
    Fft2::new(spectrum.rows(), spectrum.cols()).inverse_real(spectrum)
}

/// Unit direction `(cos(pi l / L), sin(pi l / L))` on the half circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction<T> {
    pub index: usize,
    pub count: usize,
    pub cos: T,
    pub sin: T,
}

impl<T: Real> Direction<T> {
    pub fn new(index: usize, count: usize) -> Result<Self> {
        if count == 0 || index >= count {
            return Err(Error::invalid(format!("direction {index} out of range for L = {count}")));
        }
        let angle = std::f64::consts::PI * index as f64 / count as f64;
        Ok(Self { index, count, cos: T::lit(angle.cos()), sin: T::lit(angle.sin()) })
    }

    /// All `count` directions.
    pub fn all(count: usize) -> Vec<Self> {
        (0..count).map(|l| Self::new(l, count).expect("index in range")).collect()
    }

    /// Forward symbol `cos (z2 - 1) + sin (z1 - 1)` at bin `(k1, k2)`.
    #[inline]
    pub fn forward_symbol(&self, k1: usize, k2: usize, rows: usize, cols: usize) -> Complex<T> {
        let (w1, w2) = angular_frequency::<T>(k1, k2, rows, cols);
        let one = Complex::new(T::one(), T::zero());
        let z1 = Complex::from_polar(T::one(), w1);
        let z2 = Complex::from_polar(T::one(), w2);
        (z2 - one) * self.cos + (z1 - one) * self.sin
    }

    /// Adds `weight * d^+ x` to `out`.
    pub fn forward_acc(&self, x: &ImageGrid<T>, weight: T, out: &mut ImageGrid<T>) {
        let (m, n) = x.dims();
        let src = x.as_slice();
        let dst = out.as_mut_slice();
        let (c, s) = (self.cos * weight, self.sin * weight);
        for i in 0..m {
            let down = if i + 1 == m { 0 } else { i + 1 };
            for j in 0..n {
                let right = if j + 1 == n { 0 } else { j + 1 };
                let here = src[i * n + j];
                dst[i * n + j] = dst[i * n + j]
                    + c * (src[i * n + right] - here)
                    + s * (src[down * n + j] - here);
            }
        }
    }

    /// Adds `weight * d^- x` to `out`.
    pub fn backward_acc(&self, x: &ImageGrid<T>, weight: T, out: &mut ImageGrid<T>) {
        let (m, n) = x.dims();
        let src = x.as_slice();
        let dst = out.as_mut_slice();
        let (c, s) = (self.cos * weight, self.sin * weight);
        for i in 0..m {
            let up = if i == 0 { m - 1 } else { i - 1 };
            for j in 0..n {
                let left = if j == 0 { n - 1 } else { j - 1 };
                let here = src[i * n + j];
                dst[i * n + j] = dst[i * n + j]
                    + c * (here - src[i * n + left])
                    + s * (here - src[up * n + j]);
            }
        }
    }

    pub fn forward(&self, x: &ImageGrid<T>) -> ImageGrid<T> {
        let mut out = ImageGrid::zeros(x.rows(), x.cols());
        self.forward_acc(x, T::one(), &mut out);
        out
    }

    pub fn backward(&self, x: &ImageGrid<T>) -> ImageGrid<T> {
        let mut out = ImageGrid::zeros(x.rows(), x.cols());
        self.backward_acc(x, T::one(), &mut out);
        out
    }
}

fn check_directional_grid<T: Real>(x: &ImageGrid<T>) -> Result<()> {
    if x.rows() < 4 || x.cols() < 4 {
        return Err(Error::GridTooSmall {
            rows: x.rows(),
            cols: x.cols(),
            reason: "directional differences need at least 4x4".into(),
        });
    }
    Ok(())
}

/// Forward directional difference `d_l^+ x` for direction `l` of `count`.
pub fn apply_dir_forward<T: Real>(x: &ImageGrid<T>, l: usize, count: usize) -> Result<ImageGrid<T>> {
    check_directional_grid(x)?;
    Ok(Direction::new(l, count)?.forward(x))
}

/// Backward directional difference `d_l^- x`.
pub fn apply_dir_backward<T: Real>(x: &ImageGrid<T>, l: usize, count: usize) -> Result<ImageGrid<T>> {
    check_directional_grid(x)?;
    Ok(Direction::new(l, count)?.backward(x))
}

/// Sampled symbol `P_l(z)` of the forward directional difference.
#[derive(Clone, Debug)]
pub struct DirectionalSymbol<T> {
    pub index: usize,
    pub count: usize,
    pub values: SpectrumGrid<T>,
}

impl<T: Real> DirectionalSymbol<T> {
    pub fn new(l: usize, count: usize, rows: usize, cols: usize) -> Result<Self> {
        let dir = Direction::<T>::new(l, count)?;
        let values = SpectrumGrid::from_fn(rows, cols, |k1, k2| dir.forward_symbol(k1, k2, rows, cols));
        Ok(Self { index: l, count, values })
    }

    /// Symbol of the backward operator, `-conj(P_l)`.
    pub fn backward(&self) -> SpectrumGrid<T> {
        let data = self.values.as_slice().iter().map(|v| -v.conj()).collect();
        SpectrumGrid { rows: self.values.rows, cols: self.values.cols, data }
    }
}

/// `sum_l |P_l(z)|^2` over the grid.
pub fn directional_energy<T: Real>(count: usize, rows: usize, cols: usize) -> Vec<T> {
    let dirs = Direction::<T>::all(count);
    let mut out = vec![T::zero(); rows * cols];
    for k1 in 0..rows {
        for k2 in 0..cols {
            out[k1 * cols + k2] =
                dirs.iter().map(|d| d.forward_symbol(k1, k2, rows, cols).norm_sqr()).sum();
        }
    }
    out
}
