//! Error measures against a ground truth, optionally restricted to a region.

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Mask};
use crate::scalar::Real;

/// Peak value used by [`psnr`].
pub const PEAK: f64 = 255.0;

/// Mean squared error over `region` (every pixel when `None`).
pub fn mse<T: Real>(a: &ImageGrid<T>, b: &ImageGrid<T>, region: Option<&Mask>) -> Result<f64> {
    let (m, n) = a.dims();
    b.ensure_same_dims(m, n)?;
    if let Some(r) = region {
        r.ensure_dims(m, n)?;
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for k in 0..a.len() {
        if region.is_none_or(|r| r.as_slice()[k]) {
            let d = (a.as_slice()[k] - b.as_slice()[k]).to_f64_lossy();
            sum += d * d;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::invalid("error region is empty"));
    }
    Ok(sum / count as f64)
}

/// `10 log10(255^2 / mse)`; infinite for identical images.
pub fn psnr<T: Real>(a: &ImageGrid<T>, b: &ImageGrid<T>, region: Option<&Mask>) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b, region)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    10.0 * (PEAK * PEAK / mse).log10()
}

/// PSNR and MSE on the full grid, the missing region and the texture ROI.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionalScores {
    pub mse_full: f64,
    pub psnr_full: f64,
    pub mse_missing: Option<f64>,
    pub psnr_missing: Option<f64>,
    pub mse_texture: Option<f64>,
    pub psnr_texture: Option<f64>,
}

/// Scores of `estimate` against `truth`. Empty regions give `None`.
pub fn regional_scores<T: Real>(
    estimate: &ImageGrid<T>,
    truth: &ImageGrid<T>,
    missing: &Mask,
    texture_roi: &Mask,
) -> Result<RegionalScores> {
    let mse_full = mse(estimate, truth, None)?;
    let region = |mask: &Mask| -> Result<Option<f64>> {
        if mask.count() == 0 {
            mask.ensure_dims(estimate.rows(), estimate.cols())?;
            Ok(None)
        } else {
            mse(estimate, truth, Some(mask)).map(Some)
        }
    };
    let mse_missing = region(missing)?;
    let mse_texture = region(texture_roi)?;
    Ok(RegionalScores {
        mse_full,
        psnr_full: psnr_from_mse(mse_full),
        mse_missing,
        psnr_missing: mse_missing.map(psnr_from_mse),
        mse_texture,
        psnr_texture: mse_texture.map(psnr_from_mse),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        let a = ImageGrid::filled(4, 4, 10.0_f64);
        let b = ImageGrid::from_fn(4, 4, |r, _| if r == 0 { 14.0 } else { 10.0 });
        assert_eq!(mse(&a, &b, None).unwrap(), 4.0);
        let top = Mask::from_fn(4, 4, |r, _| r == 0);
        assert_eq!(mse(&a, &b, Some(&top)).unwrap(), 16.0);
        assert!((psnr(&a, &b, Some(&top)).unwrap() - 10.0 * (255.0_f64 * 255.0 / 16.0).log10()).abs() < 1e-12);
        assert_eq!(psnr(&a, &a, None).unwrap(), f64::INFINITY);
        assert!(mse(&a, &b, Some(&Mask::empty(4, 4))).is_err());
        assert!(mse(&a, &ImageGrid::zeros(3, 4), None).is_err());
    }

    #[test]
    fn regional_handles_empty_regions() {
        let a = ImageGrid::filled(4, 4, 1.0_f64);
        let b = ImageGrid::zeros(4, 4);
        let s = regional_scores(&a, &b, &Mask::empty(4, 4), &Mask::full(4, 4)).unwrap();
        assert_eq!(s.mse_full, 1.0);
        assert_eq!(s.mse_missing, None);
        assert_eq!(s.mse_texture, Some(1.0));
        assert!(regional_scores(&a, &b, &Mask::empty(3, 4), &Mask::full(4, 4)).is_err());
    }
}
