//! Directional three-part image decomposition with inpainting.
//!
//! An image `f` with missing region `D` is split into a cartoon `u`, a
//! texture `v` and a residual `eps` by an ADMM solver. The texture part is
//! then inpainted from a patch dictionary, denoised with nonlocal means and
//! recombined with the cartoon.

pub mod error;
pub mod filters;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod msdt;
pub mod scalar;
pub mod scene;
pub mod solver;
pub mod spectral;
pub mod texture;
pub mod tvl2;

pub use error::{Error, Result};
pub use grid::{ImageGrid, Mask, MaskD};
pub use scalar::Real;
pub use solver::{Decomposition, SolverParams, Threshold};

pub type Grid = ImageGrid<f64>;
pub type Spectrum = spectral::SpectrumGrid<f64>;
pub type Pyramid = msdt::CoeffPyramid<f64>;
pub type Frame = msdt::MsdtFrame<f64>;
pub type Decomposition64 = Decomposition<f64>;
