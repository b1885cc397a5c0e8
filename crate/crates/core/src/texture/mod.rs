//! Restoration of the texture component: segmentation, patch inpainting,
//! nonlocal-means denoising and recombination with the cartoon.

mod inpaint;
mod morphology;
mod nlmeans;

pub use inpaint::{
    build_dictionary, inpaint_texture, InpaintOutcome, InpaintPlan, PatchDictionary, PatchParams, PlanTier, Tier,
    NONZERO_TOLERANCE,
};
pub use morphology::{
    build_inpaint_mask, closing3, components, dilate, disk_offsets, erode, fill_holes, majority3, remove_small,
    segment_texture, MorphStep, RoiMask, SegmentParams,
};
pub use nlmeans::{nlmeans_denoise, NlMeansOutcome, NlMeansParams};

use crate::error::Result;
use crate::grid::{quantize_preview, ImageGrid, Mask};
use crate::scalar::Real;

/// Restored image and its 8-bit preview.
#[derive(Clone, Debug)]
pub struct Synthesis<T> {
    pub image: ImageGrid<T>,
    pub preview: ImageGrid<T>,
}

/// `u + v`.
pub fn synthesize<T: Real>(u: &ImageGrid<T>, v: &ImageGrid<T>) -> Result<Synthesis<T>> {
    v.ensure_same_dims(u.rows(), u.cols())?;
    let image = u.add(v);
    let preview = quantize_preview(&image);
    Ok(Synthesis { image, preview })
}

/// `(v + e1 .x chi_D) .x ROI`.
pub fn compose_v_texture<T: Real>(
    v: &ImageGrid<T>,
    e1: &ImageGrid<T>,
    missing: &Mask,
    roi: &RoiMask,
) -> Result<ImageGrid<T>> {
    let (m, n) = v.dims();
    e1.ensure_same_dims(m, n)?;
    missing.ensure_dims(m, n)?;
    roi.mask.ensure_dims(m, n)?;
    Ok(ImageGrid::from_fn(m, n, |r, c| {
        let d = if missing.get(r, c) { T::one() } else { T::zero() };
        let inside = if roi.get(r, c) { T::one() } else { T::zero() };
        (v[(r, c)] + e1[(r, c)] * d) * inside
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextureParams {
    pub segment: SegmentParams,
    /// Radius of the disk used to dilate the missing region.
    pub dilation_radius: usize,
    pub patch: PatchParams,
    pub nlmeans: NlMeansParams,
}

impl Default for TextureParams {
    fn default() -> Self {
        Self {
            segment: SegmentParams::default(),
            dilation_radius: 5,
            patch: PatchParams::default(),
            nlmeans: NlMeansParams::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TextureRestoration<T> {
    pub roi: RoiMask,
    /// Pixels given new texture (`I`).
    pub inpaint_mask: Mask,
    pub dictionary_len: usize,
    pub inpainting: InpaintOutcome<T>,
    pub denoising: NlMeansOutcome<T>,
    /// Final texture component.
    pub texture: ImageGrid<T>,
}

/// Full texture pipeline on the texture component `v` of an image with
/// missing region `missing`. Pixels of `D ∪ I` are excluded from the
/// dictionary and from the target patches until they are filled.
pub fn restore_texture<T: Real>(
    v: &ImageGrid<T>,
    missing: &Mask,
    params: &TextureParams,
) -> Result<TextureRestoration<T>> {
    let (m, n) = v.dims();
    missing.ensure_dims(m, n)?;
    let roi = segment_texture(v, &params.segment);
    let inpaint_mask = build_inpaint_mask(&roi, missing, params.dilation_radius)?;
    let known = missing.union(&inpaint_mask).complement();
    let dictionary = build_dictionary(v, &known, &params.patch)?;
    let inpainting = inpaint_texture(v, &inpaint_mask, &dictionary, params.patch.p3)?;
    let denoising = nlmeans_denoise(&inpainting.texture, &roi.mask, &params.nlmeans)?;
    let texture = denoising.texture.clone();
    Ok(TextureRestoration { roi, inpaint_mask, dictionary_len: dictionary.len(), inpainting, denoising, texture })
}
