//! Exemplar-based texture inpainting from a dictionary of known patches.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Mask};
use crate::scalar::Real;

/// Patch selection and matching constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchParams {
    /// Odd patch side `s`.
    pub size: usize,
    /// Minimum known fraction of a dictionary patch.
    pub p1: f64,
    /// Minimum fraction of known nonzero samples of a dictionary patch.
    pub p2: f64,
    /// Minimum overlap of mutually known pixels, as a fraction of `s^2`.
    pub p3: f64,
}

impl Default for PatchParams {
    fn default() -> Self {
        Self { size: 15, p1: 0.70, p2: 0.60, p3: 0.30 }
    }
}

impl PatchParams {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 || self.size.is_multiple_of(2) {
            return Err(Error::invalid(format!("patch size must be odd, got {}", self.size)));
        }
        for (name, p) in [("p1", self.p1), ("p2", self.p2), ("p3", self.p3)] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// Samples below this magnitude count as zero texture.
pub const NONZERO_TOLERANCE: f64 = 1e-9;

/// Qualifying patches of a source image, referenced by their centers.
#[derive(Clone, Debug)]
pub struct PatchDictionary {
    size: usize,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    known: Vec<bool>,
    /// Patch centers in row-major order.
    centers: Vec<(usize, usize)>,
}

impl PatchDictionary {
    pub fn patch_size(&self) -> usize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[(usize, usize)] {
        &self.centers
    }

    /// Known flags of the source image the dictionary was built from.
    pub fn known(&self) -> Mask {
        Mask::new(self.rows, self.cols, self.known.clone()).expect("dimensions are consistent")
    }

    /// Samples and known flags of entry `i`, row-major.
    pub fn patch(&self, i: usize) -> (Vec<f64>, Vec<bool>) {
        let (cr, cc) = self.centers[i];
        let h = self.size / 2;
        let mut vals = Vec::with_capacity(self.size * self.size);
        let mut known = Vec::with_capacity(self.size * self.size);
        for r in cr - h..=cr + h {
            for c in cc - h..=cc + h {
                vals.push(self.values[r * self.cols + c]);
                known.push(self.known[r * self.cols + c]);
            }
        }
        (vals, known)
    }

    fn center_value(&self, i: usize) -> f64 {
        let (r, c) = self.centers[i];
        self.values[r * self.cols + c]
    }
}

/// Summed-area table with one row and column of zero padding.
fn integral_counts(m: usize, n: usize, on: impl Fn(usize) -> bool) -> Vec<u32> {
    let mut sat = vec![0u32; (m + 1) * (n + 1)];
    for r in 0..m {
        let mut row = 0u32;
        for c in 0..n {
            row += on(r * n + c) as u32;
            sat[(r + 1) * (n + 1) + c + 1] = sat[r * (n + 1) + c + 1] + row;
        }
    }
    sat
}

fn box_count(sat: &[u32], n: usize, r0: usize, c0: usize, size: usize) -> u32 {
    let w = n + 1;
    let (r1, c1) = (r0 + size, c0 + size);
    sat[r1 * w + c1] + sat[r0 * w + c0] - sat[r0 * w + c1] - sat[r1 * w + c0]
}

/// Every `s x s` patch fully inside the grid whose center is known, with at
/// least `p1 s^2` known samples and at least `p2 s^2` known nonzero samples.
pub fn build_dictionary<T: Real>(v: &ImageGrid<T>, known: &Mask, params: &PatchParams) -> Result<PatchDictionary> {
    params.validate()?;
    let (m, n) = v.dims();
    known.ensure_dims(m, n)?;
    let s = params.size;
    if s > m.min(n) {
        return Err(Error::GridTooSmall { rows: m, cols: n, reason: format!("patch size {s} exceeds the grid") });
    }
    let values: Vec<f64> = v.as_slice().iter().map(|x| x.to_f64_lossy()).collect();
    let known_flags = known.as_slice().to_vec();
    let known_sat = integral_counts(m, n, |k| known_flags[k]);
    let nonzero_sat = integral_counts(m, n, |k| known_flags[k] && values[k].abs() > NONZERO_TOLERANCE);
    let area = (s * s) as f64;
    let h = s / 2;
    let centers: Vec<(usize, usize)> = (0..=m - s)
        .into_par_iter()
        .flat_map_iter(|r0| {
            let known_flags = &known_flags;
            let (known_sat, nonzero_sat) = (&known_sat, &nonzero_sat);
            (0..=n - s).filter_map(move |c0| {
                let center = (r0 + h, c0 + h);
                if !known_flags[center.0 * n + center.1] {
                    return None;
                }
                let k = box_count(known_sat, n, r0, c0, s) as f64;
                let nz = box_count(nonzero_sat, n, r0, c0, s) as f64;
                (k >= params.p1 * area && nz >= params.p2 * area).then_some(center)
            })
        })
        .collect();
    Ok(PatchDictionary { size: s, rows: m, cols: n, values, known: known_flags, centers })
}

/// Stage at which a pixel was filled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tier {
    /// At least this percentage of the target patch was known.
    Percent(u32),
    /// Second pass with the overlap requirement lowered to one pixel.
    Relaxed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanTier {
    pub tier: Tier,
    pub pixels: Vec<(usize, usize)>,
}

/// Fill order of the inpainting mask.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InpaintPlan {
    pub tiers: Vec<PlanTier>,
    /// Pixels for which no candidate overlapped; they were set to zero.
    pub unfilled: Vec<(usize, usize)>,
}

impl InpaintPlan {
    pub fn pixel_count(&self) -> usize {
        self.tiers.iter().map(|t| t.pixels.len()).sum::<usize>() + self.unfilled.len()
    }
}

#[derive(Clone, Debug)]
pub struct InpaintOutcome<T> {
    pub texture: ImageGrid<T>,
    pub plan: InpaintPlan,
    /// Copies of the texture once 25, 50, 75 and 100% of the mask is filled.
    pub snapshots: Vec<(u32, ImageGrid<T>)>,
    pub warnings: Vec<String>,
}

struct Target {
    /// `(dy, dx, value)` for every known pixel of the target patch, offsets
    /// relative to the patch's top-left corner.
    known: Vec<(usize, usize, f64)>,
}

fn target_patch(values: &[f64], known: &[bool], m: usize, n: usize, tr: usize, tc: usize, s: usize) -> Target {
    let h = s as isize / 2;
    let mut out = Vec::new();
    for dy in 0..s {
        let r = tr as isize + dy as isize - h;
        if r < 0 || r as usize >= m {
            continue;
        }
        for dx in 0..s {
            let c = tc as isize + dx as isize - h;
            if c < 0 || c as usize >= n {
                continue;
            }
            let k = r as usize * n + c as usize;
            if known[k] {
                out.push((dy, dx, values[k]));
            }
        }
    }
    Target { known: out }
}

fn compare(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Best entry by SSD per overlapping pixel; ties go to the smallest source
/// center coordinate.
fn best_match(dict: &PatchDictionary, target: &Target, min_overlap: usize) -> Option<usize> {
    let s = dict.size;
    let h = s / 2;
    let n = dict.cols;
    (0..dict.len())
        .into_par_iter()
        .filter_map(|i| {
            let (cr, cc) = dict.centers[i];
            let base = (cr - h) * n + (cc - h);
            let mut ssd = 0.0;
            let mut count = 0usize;
            for &(dy, dx, tv) in &target.known {
                let k = base + dy * n + dx;
                if dict.known[k] {
                    let d = dict.values[k] - tv;
                    ssd += d * d;
                    count += 1;
                }
            }
            (count >= min_overlap.max(1)).then(|| (ssd / count as f64, i))
        })
        .min_by(compare)
        .map(|(_, i)| i)
}

/// Fills the pixels of `mask` from `dict`.
///
/// Target patches see the dictionary's known pixels outside `mask` plus
/// everything filled so far. Tiers run from 90% known down to 0% in steps of
/// 5; inside a tier pixels are visited in row-major order.
pub fn inpaint_texture<T: Real>(
    v: &ImageGrid<T>,
    mask: &Mask,
    dict: &PatchDictionary,
    p3: f64,
) -> Result<InpaintOutcome<T>> {
    let (m, n) = v.dims();
    mask.ensure_dims(m, n)?;
    if (dict.rows, dict.cols) != (m, n) {
        return Err(Error::DimensionMismatch { expected_rows: m, expected_cols: n, rows: dict.rows, cols: dict.cols });
    }
    if !(p3 > 0.0 && p3 <= 1.0) {
        return Err(Error::invalid(format!("p3 must lie in (0, 1], got {p3}")));
    }
    let targets_total = mask.count();
    if targets_total == 0 {
        return Ok(InpaintOutcome { texture: v.clone(), plan: InpaintPlan::default(), snapshots: vec![], warnings: vec![] });
    }
    if dict.is_empty() {
        return Err(Error::EmptyDictionary { targets: targets_total });
    }

    let s = dict.size;
    let area = s * s;
    let min_overlap = (p3 * area as f64).ceil() as usize;
    let mut values: Vec<f64> = v.as_slice().iter().map(|x| x.to_f64_lossy()).collect();
    let mut known: Vec<bool> = dict.known.iter().zip(mask.as_slice()).map(|(&k, &i)| k && !i).collect();
    let mut pending: Vec<(usize, usize)> =
        (0..m * n).filter(|&k| mask.as_slice()[k]).map(|k| (k / n, k % n)).collect();

    let mut plan = InpaintPlan::default();
    let mut snapshots = Vec::new();
    let mut filled = 0usize;
    let mut next_mark = 1u32;
    let snapshot = |values: &[f64]| {
        ImageGrid::from_vec_unchecked(m, n, values.iter().map(|&x| T::lit(x)).collect::<Vec<T>>())
    };

    let stages = (0..=18).rev().map(|i| Tier::Percent(i * 5)).chain(std::iter::once(Tier::Relaxed));
    for tier in stages {
        let mut done = Vec::new();
        let mut rest = Vec::new();
        for &(r, c) in &pending {
            let target = target_patch(&values, &known, m, n, r, c, s);
            let (eligible, overlap) = match tier {
                Tier::Percent(t) => (target.known.len() * 100 >= t as usize * area, min_overlap),
                Tier::Relaxed => (true, 1),
            };
            let found = if eligible { best_match(dict, &target, overlap) } else { None };
            match found {
                Some(i) => {
                    values[r * n + c] = dict.center_value(i);
                    known[r * n + c] = true;
                    done.push((r, c));
                    filled += 1;
                    while next_mark <= 4 && filled * 4 >= next_mark as usize * targets_total {
                        snapshots.push((next_mark * 25, snapshot(&values)));
                        next_mark += 1;
                    }
                }
                None => rest.push((r, c)),
            }
        }
        if !done.is_empty() {
            plan.tiers.push(PlanTier { tier, pixels: done });
        }
        pending = rest;
        if pending.is_empty() {
            break;
        }
    }

    let mut warnings = Vec::new();
    for &(r, c) in &pending {
        values[r * n + c] = 0.0;
        warnings.push(format!("no overlapping dictionary patch for pixel ({r}, {c}); set to 0"));
    }
    plan.unfilled = pending;
    if next_mark <= 4 {
        snapshots.push((100, snapshot(&values)));
    }
    Ok(InpaintOutcome { texture: snapshot(&values), plan, snapshots, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stripes(m: usize, n: usize, period: f64, amp: f64) -> ImageGrid<f64> {
        let (s, c) = (std::f64::consts::FRAC_PI_6).sin_cos();
        ImageGrid::from_fn(m, n, |r, col| {
            amp * (2.0 * std::f64::consts::PI * (r as f64 * s + col as f64 * c) / period).sin()
        })
    }

    fn brute_force(v: &ImageGrid<f64>, known: &Mask, p: &PatchParams) -> Vec<(usize, usize)> {
        let (m, n) = v.dims();
        let s = p.size;
        let h = s / 2;
        let mut out = Vec::new();
        for cr in h..m - h {
            for cc in h..n - h {
                let (mut k, mut nz) = (0, 0);
                for r in cr - h..=cr + h {
                    for c in cc - h..=cc + h {
                        if known.get(r, c) {
                            k += 1;
                            if v[(r, c)].abs() > NONZERO_TOLERANCE {
                                nz += 1;
                            }
                        }
                    }
                }
                let area = (s * s) as f64;
                if known.get(cr, cc) && k as f64 >= p.p1 * area && nz as f64 >= p.p2 * area {
                    out.push((cr, cc));
                }
            }
        }
        out
    }

    #[test]
    fn fully_known_texture_gives_every_patch() {
        let v = ImageGrid::filled(40, 36, 2.0);
        let d = build_dictionary(&v, &Mask::full(40, 36), &PatchParams::default()).unwrap();
        assert_eq!(d.len(), (40 - 15 + 1) * (36 - 15 + 1));
    }

    #[test]
    fn zero_texture_gives_empty_dictionary() {
        let v = ImageGrid::<f64>::zeros(32, 32);
        assert!(build_dictionary(&v, &Mask::full(32, 32), &PatchParams::default()).unwrap().is_empty());
    }

    #[test]
    fn dictionary_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..4u64 {
            let v = ImageGrid::from_fn(64, 64, |r, c| {
                if (r / 9 + c / 7 + seed as usize) % 3 == 0 { 0.0 } else { rng.random_range(-1.0..1.0) }
            });
            let known = Mask::from_fn(64, 64, |_, _| rng.random::<f64>() > 0.2);
            let p = PatchParams { size: 9, ..PatchParams::default() };
            let d = build_dictionary(&v, &known, &p).unwrap();
            assert_eq!(d.centers(), brute_force(&v, &known, &p).as_slice());
            assert!(!d.is_empty());
        }
    }

    #[test]
    fn dictionary_rejects_bad_sizes() {
        let v = ImageGrid::filled(10, 10, 1.0);
        let k = Mask::full(10, 10);
        assert!(build_dictionary(&v, &k, &PatchParams { size: 11, ..PatchParams::default() }).is_err());
        assert!(build_dictionary(&v, &k, &PatchParams { size: 4, ..PatchParams::default() }).is_err());
    }

    #[test]
    fn empty_mask_returns_input() {
        let v = stripes(32, 32, 6.0, 10.0);
        let d = build_dictionary(&v, &Mask::full(32, 32), &PatchParams::default()).unwrap();
        let out = inpaint_texture(&v, &Mask::empty(32, 32), &d, 0.3).unwrap();
        assert_eq!(out.texture, v);
        assert_eq!(out.plan.pixel_count(), 0);
    }

    #[test]
    fn constant_texture_hole_is_exact() {
        let v0 = ImageGrid::filled(48, 48, 7.5);
        let hole = Mask::from_fn(48, 48, |r, c| (20..30).contains(&r) && (18..28).contains(&c));
        let v = ImageGrid::from_fn(48, 48, |r, c| if hole.get(r, c) { 0.0 } else { 7.5 });
        let d = build_dictionary(&v, &hole.complement(), &PatchParams::default()).unwrap();
        let out = inpaint_texture(&v, &hole, &d, 0.3).unwrap();
        assert_eq!(out.texture, v0);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn only_mask_pixels_change_and_plan_is_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let truth = stripes(64, 64, 6.0, 20.0);
        let noise: Vec<f64> = (0..64 * 64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v = ImageGrid::from_fn(64, 64, |r, c| truth[(r, c)] + noise[r * 64 + c]);
        let hole = Mask::from_fn(64, 64, |r, c| {
            (10..22).contains(&r) && (30..42).contains(&c) || (40..46).contains(&r) && (5..60).contains(&c)
        });
        let d = build_dictionary(&v, &hole.complement(), &PatchParams::default()).unwrap();
        let out = inpaint_texture(&v, &hole, &d, 0.3).unwrap();
        for r in 0..64 {
            for c in 0..64 {
                if !hole.get(r, c) {
                    assert_eq!(out.texture[(r, c)], v[(r, c)]);
                }
            }
        }
        assert_eq!(out.plan.pixel_count(), hole.count());
        let mut seen = Mask::empty(64, 64);
        for t in &out.plan.tiers {
            for &(r, c) in &t.pixels {
                assert!(!seen.get(r, c));
                seen.set(r, c, true);
            }
        }
        let percents: Vec<u32> = out
            .plan
            .tiers
            .iter()
            .filter_map(|t| match t.tier {
                Tier::Percent(p) => Some(p),
                Tier::Relaxed => None,
            })
            .collect();
        assert!(percents.windows(2).all(|w| w[0] > w[1] && (w[0] - w[1]) % 5 == 0));
        assert_eq!(out.snapshots.iter().map(|s| s.0).collect::<Vec<_>>(), vec![25, 50, 75, 100]);
    }

    #[test]
    fn stripe_hole_is_reconstructed() {
        let amp = 20.0;
        let truth = stripes(64, 64, 6.0, amp);
        let hole = Mask::from_fn(64, 64, |r, c| (26..38).contains(&r) && (26..38).contains(&c));
        let v = ImageGrid::from_fn(64, 64, |r, c| if hole.get(r, c) { 0.0 } else { truth[(r, c)] });
        let d = build_dictionary(&v, &hole.complement(), &PatchParams::default()).unwrap();
        let out = inpaint_texture(&v, &hole, &d, 0.3).unwrap();
        let good = (0..64 * 64)
            .filter(|&k| hole.as_slice()[k])
            .filter(|&k| (out.texture.as_slice()[k] - truth.as_slice()[k]).abs() <= 0.1 * amp)
            .count();
        assert!(good as f64 >= 0.9 * hole.count() as f64, "{good} of {}", hole.count());
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = ImageGrid::from_fn(40, 40, |_, _| rng.random_range(-5.0..5.0));
        let hole = Mask::from_fn(40, 40, |r, c| (15..25).contains(&r) && (12..20).contains(&c));
        let d = build_dictionary(&v, &hole.complement(), &PatchParams { size: 7, ..PatchParams::default() }).unwrap();
        let a = inpaint_texture(&v, &hole, &d, 0.3).unwrap();
        let b = inpaint_texture(&v, &hole, &d, 0.3).unwrap();
        assert_eq!(a.texture, b.texture);
        assert_eq!(a.plan, b.plan);
    }

    #[test]
    fn empty_dictionary_is_an_error() {
        let v = ImageGrid::<f64>::zeros(32, 32);
        let hole = Mask::from_fn(32, 32, |r, c| r == 10 && c == 10);
        let d = build_dictionary(&v, &hole.complement(), &PatchParams::default()).unwrap();
        assert!(matches!(inpaint_texture(&v, &hole, &d, 0.3), Err(Error::EmptyDictionary { targets: 1 })));
    }
}
