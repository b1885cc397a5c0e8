//! Synthetic cartoon + texture test scenes with noise and missing regions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Mask};

/// Shape of the generated missing region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaskSpec {
    /// No missing pixels.
    None,
    /// Random filled disks covering the given fraction.
    Blobs { fraction: f64 },
    /// Random thick line strokes covering the given fraction.
    Scratches { fraction: f64 },
    /// Half blobs, half scratches.
    Mixed { fraction: f64 },
}

impl MaskSpec {
    fn fraction(&self) -> Option<f64> {
        match *self {
            MaskSpec::None => None,
            MaskSpec::Blobs { fraction }
            | MaskSpec::Scratches { fraction }
            | MaskSpec::Mixed { fraction } => Some(fraction),
        }
    }
}

/// Geometry of the default scene, in fractions of the image extent.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneLayout {
    pub background: f64,
    /// `(top, left, bottom, right, intensity)`.
    pub rectangle: (f64, f64, f64, f64, f64),
    /// `(center_row, center_col, radius, intensity)`; radius relative to min extent.
    pub disk: (f64, f64, f64, f64),
    /// Stripe patch `(top, left, bottom, right)`.
    pub stripe_region: (f64, f64, f64, f64),
    pub stripe_mean: f64,
    pub stripe_amplitude: f64,
    /// Period in pixels.
    pub stripe_period: f64,
    /// Orientation of the stripe wave vector, radians from the column axis.
    pub stripe_angle: f64,
}

impl Default for SceneLayout {
    fn default() -> Self {
        Self {
            background: 90.0,
            rectangle: (0.08, 0.08, 0.42, 0.46, 210.0),
            disk: (0.72, 0.27, 0.2, 35.0),
            stripe_region: (0.12, 0.56, 0.92, 0.94),
            stripe_mean: 140.0,
            stripe_amplitude: 70.0,
            stripe_period: 6.0,
            stripe_angle: std::f64::consts::FRAC_PI_6,
        }
    }
}

/// Generated scene plus its ground truth.
#[derive(Clone, Debug)]
pub struct ChallengeScene {
    /// Noise-free ideal image.
    pub clean: ImageGrid<f64>,
    /// `clean` plus Gaussian noise on every pixel (including `D`).
    pub noisy: ImageGrid<f64>,
    /// Missing region.
    pub missing: Mask,
    /// Pixels covered by the stripe texture.
    pub texture_region: Mask,
    /// Zero-mean oscillating part of `clean` (zero outside the stripe patch).
    pub texture: ImageGrid<f64>,
}

impl ChallengeScene {
    /// Noisy image with missing pixels set to zero.
    pub fn degraded(&self) -> ImageGrid<f64> {
        crate::grid::pointwise_mul(&self.noisy, &self.missing.complement())
            .expect("scene grids share dimensions")
    }
}

fn layout_clean(rows: usize, cols: usize, layout: &SceneLayout) -> (ImageGrid<f64>, Mask, ImageGrid<f64>) {
    let (m, n) = (rows as f64, cols as f64);
    let min_extent = m.min(n);
    let (rt, rl, rb, rr, rv) = layout.rectangle;
    let (dr, dc, drad, dv) = layout.disk;
    let (st, sl, sb, sr) = layout.stripe_region;
    let (ca, sa) = (layout.stripe_angle.cos(), layout.stripe_angle.sin());
    let k = std::f64::consts::TAU / layout.stripe_period;

    let in_box = |i: f64, j: f64, t: f64, l: f64, b: f64, r: f64| {
        i >= t * m && i < b * m && j >= l * n && j < r * n
    };

    let region = Mask::from_fn(rows, cols, |i, j| in_box(i as f64, j as f64, st, sl, sb, sr));
    let texture = ImageGrid::from_fn(rows, cols, |i, j| {
        if region.get(i, j) {
            layout.stripe_amplitude * (k * (j as f64 * ca + i as f64 * sa)).sin()
        } else {
            0.0
        }
    });
    let clean = ImageGrid::from_fn(rows, cols, |i, j| {
        let (y, x) = (i as f64, j as f64);
        if region.get(i, j) {
            return layout.stripe_mean + texture[(i, j)];
        }
        let dy = y - dr * m;
        let dx = x - dc * n;
        if (dy * dy + dx * dx).sqrt() <= drad * min_extent {
            dv
        } else if in_box(y, x, rt, rl, rb, rr) {
            rv
        } else {
            layout.background
        }
    });
    (clean, region, texture)
}

fn paint(mask: &mut Mask, remaining: &mut usize, pixels: impl Iterator<Item = (usize, usize)>) {
    for (i, j) in pixels {
        if *remaining == 0 {
            return;
        }
        if !mask.get(i, j) {
            mask.set(i, j, true);
            *remaining -= 1;
        }
    }
}

fn disk_pixels(rows: usize, cols: usize, ci: f64, cj: f64, r: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let i0 = (ci - r).floor().max(0.0) as usize;
    let i1 = ((ci + r).ceil() as usize).min(rows - 1);
    let j0 = (cj - r).floor().max(0.0) as usize;
    let j1 = ((cj + r).ceil() as usize).min(cols - 1);
    for i in i0..=i1 {
        for j in j0..=j1 {
            let (di, dj) = (i as f64 - ci, j as f64 - cj);
            if di * di + dj * dj <= r * r {
                out.push((i, j));
            }
        }
    }
    out
}

fn stroke_pixels(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let (m, n) = (rows as f64, cols as f64);
    let (i0, j0) = (rng.random_range(0.0..m), rng.random_range(0.0..n));
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    let len = rng.random_range(0.3..0.8) * m.min(n);
    let half_width = rng.random_range(0.5..1.6);
    let steps = (len * 2.0).ceil() as usize;
    let mut out = Vec::new();
    for s in 0..=steps {
        let t = s as f64 / 2.0;
        let (ci, cj) = (i0 + t * angle.sin(), j0 + t * angle.cos());
        if ci < 0.0 || cj < 0.0 || ci >= m || cj >= n {
            break;
        }
        for p in disk_pixels(rows, cols, ci, cj, half_width) {
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}

fn generate_mask(rows: usize, cols: usize, spec: MaskSpec, rng: &mut ChaCha8Rng) -> Mask {
    let mut mask = Mask::empty(rows, cols);
    let Some(fraction) = spec.fraction() else {
        return mask;
    };
    let target = (fraction * (rows * cols) as f64).round() as usize;
    let max_radius = (rows.min(cols) as f64 / 10.0).max(3.0);
    let blob_share = match spec {
        MaskSpec::Blobs { .. } => 1.0,
        MaskSpec::Scratches { .. } => 0.0,
        _ => 0.5,
    };
    let blob_target = (target as f64 * blob_share).round() as usize;
    let mut remaining = blob_target;
    while remaining > 0 {
        let ci = rng.random_range(0.0..rows as f64);
        let cj = rng.random_range(0.0..cols as f64);
        let r = rng.random_range(1.5..max_radius);
        paint(&mut mask, &mut remaining, disk_pixels(rows, cols, ci, cj, r).into_iter());
    }
    let mut remaining = target - mask.count();
    while remaining > 0 {
        let pixels = stroke_pixels(rows, cols, rng);
        paint(&mut mask, &mut remaining, pixels.into_iter());
    }
    mask
}

/// Builds the default scene of size `rows x cols` with noise `sigma` and a
/// missing region described by `mask_spec`. Identical seeds reproduce the
/// outputs bit for bit.
pub fn make_challenge_scene(
    rows: usize,
    cols: usize,
    sigma: f64,
    mask_spec: MaskSpec,
    seed: u64,
) -> Result<ChallengeScene> {
    make_challenge_scene_with(rows, cols, sigma, mask_spec, seed, &SceneLayout::default())
}

pub fn make_challenge_scene_with(
    rows: usize,
    cols: usize,
    sigma: f64,
    mask_spec: MaskSpec,
    seed: u64,
    layout: &SceneLayout,
) -> Result<ChallengeScene> {
    if rows < 4 || cols < 4 {
        return Err(Error::GridTooSmall { rows, cols, reason: "scene needs at least 4x4".into() });
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if let Some(fr) = mask_spec.fraction() {
        if !(fr > 0.0 && fr < 1.0) {
            return Err(Error::invalid(format!("mask fraction must lie in (0, 1), got {fr}")));
        }
    }

    let (clean, texture_region, texture) = layout_clean(rows, cols, layout);

    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
        let samples = clean.as_slice().iter().map(|&v| v + normal.sample(&mut noise_rng)).collect();
        ImageGrid::from_vec_unchecked(rows, cols, samples)
    } else {
        clean.clone()
    };

    let mut mask_rng = ChaCha8Rng::seed_from_u64(seed);
    mask_rng.set_stream(1);
    let missing = generate_mask(rows, cols, mask_spec, &mut mask_rng);

    Ok(ChallengeScene { clean, noisy, missing, texture_region, texture })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_noise_no_mask_is_clean() {
        let s = make_challenge_scene(32, 32, 0.0, MaskSpec::None, 3).unwrap();
        assert_eq!(s.noisy, s.clean);
        assert!(s.missing.is_empty());
    }

    #[test]
    fn noise_variance_matches_sigma() {
        let s = make_challenge_scene(256, 256, 100.0, MaskSpec::None, 11).unwrap();
        let d = s.noisy.sub(&s.clean);
        let mean = d.mean();
        let var = d.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        assert!((var - 10_000.0).abs() <= 500.0, "variance {var}");
    }

    #[test]
    fn mask_fraction_is_hit() {
        for spec in [
            MaskSpec::Blobs { fraction: 0.3 },
            MaskSpec::Scratches { fraction: 0.3 },
            MaskSpec::Mixed { fraction: 0.3 },
        ] {
            let s = make_challenge_scene(64, 64, 10.0, spec, 5).unwrap();
            let popcount = s.missing.as_slice().iter().filter(|&&b| b).count();
            let fr = popcount as f64 / (64.0 * 64.0);
            assert!((0.28..=0.32).contains(&fr), "{spec:?}: {fr}");
        }
    }

    #[test]
    fn invalid_fraction_rejected() {
        assert!(make_challenge_scene(32, 32, 1.0, MaskSpec::Blobs { fraction: 0.0 }, 0).is_err());
        assert!(make_challenge_scene(32, 32, 1.0, MaskSpec::Blobs { fraction: 1.0 }, 0).is_err());
        assert!(make_challenge_scene(32, 32, -1.0, MaskSpec::None, 0).is_err());
    }

    #[test]
    fn same_seed_bit_identical() {
        let a = make_challenge_scene(48, 40, 100.0, MaskSpec::Mixed { fraction: 0.25 }, 99).unwrap();
        let b = make_challenge_scene(48, 40, 100.0, MaskSpec::Mixed { fraction: 0.25 }, 99).unwrap();
        let bits = |g: &ImageGrid<f64>| g.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.noisy), bits(&b.noisy));
        assert_eq!(a.missing, b.missing);
    }

    #[test]
    fn texture_is_zero_outside_region() {
        let s = make_challenge_scene(64, 64, 0.0, MaskSpec::None, 0).unwrap();
        for i in 0..64 {
            for j in 0..64 {
                if !s.texture_region.get(i, j) {
                    assert_eq!(s.texture[(i, j)], 0.0);
                }
            }
        }
        assert!(s.texture_region.count() > 500);
    }
}
