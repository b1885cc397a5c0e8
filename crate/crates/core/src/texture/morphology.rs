//! Binary morphology on [`Mask`] grids. Pixels outside the grid are ignored,
//! so structuring elements are clipped at the border.

use std::collections::VecDeque;

use crate::grid::{ImageGrid, Mask};
use crate::scalar::Real;

/// Steps applied by [`segment_texture`], recorded on the resulting ROI.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MorphStep {
    Binarize,
    Closing3x3,
    Majority3x3,
    RemoveSmall { min_area: usize },
    FillHoles,
}

/// Texture region obtained from the sparse texture component.
#[derive(Clone, Debug, PartialEq)]
pub struct RoiMask {
    pub mask: Mask,
    pub steps: Vec<MorphStep>,
}

impl RoiMask {
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.mask.get(row, col)
    }

    pub fn count(&self) -> usize {
        self.mask.count()
    }
}

/// Segmentation settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentParams {
    /// `|v| > tolerance` counts as nonzero.
    pub tolerance: f64,
    /// Components (8-connected) smaller than this are dropped.
    pub min_area: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self { tolerance: 1e-9, min_area: 25 }
    }
}

fn offsets_square(radius: isize) -> Vec<(isize, isize)> {
    (-radius..=radius).flat_map(|dy| (-radius..=radius).map(move |dx| (dy, dx))).collect()
}

/// Offsets of a discrete disk `dy^2 + dx^2 <= radius^2`.
pub fn disk_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    offsets_square(r).into_iter().filter(|(dy, dx)| dy * dy + dx * dx <= r * r).collect()
}

fn neighbors<'a>(mask: &'a Mask, row: usize, col: usize, offsets: &'a [(isize, isize)]) -> impl Iterator<Item = bool> + 'a {
    let (m, n) = mask.dims();
    offsets.iter().filter_map(move |&(dy, dx)| {
        let r = row as isize + dy;
        let c = col as isize + dx;
        (r >= 0 && c >= 0 && (r as usize) < m && (c as usize) < n).then(|| mask.get(r as usize, c as usize))
    })
}

pub fn dilate(mask: &Mask, offsets: &[(isize, isize)]) -> Mask {
    Mask::from_fn(mask.rows(), mask.cols(), |r, c| neighbors(mask, r, c, offsets).any(|b| b))
}

pub fn erode(mask: &Mask, offsets: &[(isize, isize)]) -> Mask {
    Mask::from_fn(mask.rows(), mask.cols(), |r, c| neighbors(mask, r, c, offsets).all(|b| b))
}

pub fn closing3(mask: &Mask) -> Mask {
    let sq = offsets_square(1);
    erode(&dilate(mask, &sq), &sq)
}

/// A pixel is set when more than half of its in-grid 3x3 neighborhood is set.
pub fn majority3(mask: &Mask) -> Mask {
    let sq = offsets_square(1);
    Mask::from_fn(mask.rows(), mask.cols(), |r, c| {
        let (mut on, mut total) = (0, 0);
        for b in neighbors(mask, r, c, &sq) {
            total += 1;
            on += b as usize;
        }
        2 * on > total
    })
}

/// Labels the 8-connected components of the set pixels. Returns per-pixel
/// labels (`usize::MAX` for background) and the component sizes.
pub fn components(mask: &Mask) -> (Vec<usize>, Vec<usize>) {
    label(mask, true, &offsets_square(1))
}

fn label(mask: &Mask, value: bool, offsets: &[(isize, isize)]) -> (Vec<usize>, Vec<usize>) {
    let (m, n) = mask.dims();
    let mut labels = vec![usize::MAX; m * n];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..m * n {
        if mask.as_slice()[start] != value || labels[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        labels[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(k) = queue.pop_front() {
            size += 1;
            let (r, c) = ((k / n) as isize, (k % n) as isize);
            for &(dy, dx) in offsets {
                let (rr, cc) = (r + dy, c + dx);
                if rr < 0 || cc < 0 || rr as usize >= m || cc as usize >= n {
                    continue;
                }
                let kk = rr as usize * n + cc as usize;
                if mask.as_slice()[kk] == value && labels[kk] == usize::MAX {
                    labels[kk] = id;
                    queue.push_back(kk);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

pub fn remove_small(mask: &Mask, min_area: usize) -> Mask {
    let (labels, sizes) = components(mask);
    Mask::from_fn(mask.rows(), mask.cols(), |r, c| {
        let l = labels[r * mask.cols() + c];
        l != usize::MAX && sizes[l] >= min_area
    })
}

/// Sets every background pixel that is not 4-connected to the border.
pub fn fill_holes(mask: &Mask) -> Mask {
    let (m, n) = mask.dims();
    let cross = [(-1, 0), (1, 0), (0, -1), (0, 1)];
    let (labels, _) = label(mask, false, &cross);
    let mut border = vec![false; labels.len()];
    for r in 0..m {
        for c in 0..n {
            if r == 0 || c == 0 || r == m - 1 || c == n - 1 {
                let l = labels[r * n + c];
                if l != usize::MAX {
                    border[l] = true;
                }
            }
        }
    }
    Mask::from_fn(m, n, |r, c| {
        let l = labels[r * n + c];
        l == usize::MAX || !border[l]
    })
}

/// Texture region: binarize `|v| > tol`, 3x3 closing, 3x3 majority, drop
/// small components, fill holes.
pub fn segment_texture<T: Real>(v: &ImageGrid<T>, params: &SegmentParams) -> RoiMask {
    let tol = T::lit(params.tolerance);
    let binary = Mask::from_fn(v.rows(), v.cols(), |r, c| v[(r, c)].abs() > tol);
    let closed = closing3(&binary);
    let smooth = majority3(&closed);
    let kept = remove_small(&smooth, params.min_area);
    let mask = fill_holes(&kept);
    RoiMask {
        mask,
        steps: vec![
            MorphStep::Binarize,
            MorphStep::Closing3x3,
            MorphStep::Majority3x3,
            MorphStep::RemoveSmall { min_area: params.min_area },
            MorphStep::FillHoles,
        ],
    }
}

/// `I = dilate(D, disk(radius)) ∩ ROI`.
pub fn build_inpaint_mask(roi: &RoiMask, missing: &Mask, radius: usize) -> crate::Result<Mask> {
    missing.ensure_dims(roi.mask.rows(), roi.mask.cols())?;
    Ok(dilate(missing, &disk_offsets(radius)).intersect(&roi.mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(m: usize, n: usize, r0: usize, c0: usize, h: usize, w: usize) -> Mask {
        Mask::from_fn(m, n, |r, c| r >= r0 && r < r0 + h && c >= c0 && c < c0 + w)
    }

    #[test]
    fn zero_texture_gives_empty_roi() {
        let roi = segment_texture(&ImageGrid::<f64>::zeros(32, 32), &SegmentParams::default());
        assert_eq!(roi.count(), 0);
        assert_eq!(roi.steps.len(), 5);
    }

    #[test]
    fn block_is_recovered_up_to_one_pixel() {
        let truth = block(64, 64, 12, 10, 40, 40);
        let v = ImageGrid::from_fn(64, 64, |r, c| if truth.get(r, c) { 3.0 } else { 0.0 });
        let roi = segment_texture(&v, &SegmentParams::default());
        let grown = dilate(&truth, &offsets_square(1));
        let shrunk = erode(&truth, &offsets_square(1));
        assert!(roi.mask.is_subset_of(&grown));
        assert!(shrunk.is_subset_of(&roi.mask));
    }

    #[test]
    fn small_specks_are_removed_and_holes_filled() {
        let mut m = block(48, 48, 5, 5, 30, 30);
        for r in 15..20 {
            for c in 15..20 {
                m.set(r, c, false);
            }
        }
        m.set(44, 44, true);
        m.set(44, 45, true);
        let filled = fill_holes(&remove_small(&m, 25));
        assert_eq!(filled, block(48, 48, 5, 5, 30, 30));
    }

    #[test]
    fn components_count_diagonal_neighbors() {
        let m = Mask::from_fn(5, 5, |r, c| r == c);
        let (_, sizes) = components(&m);
        assert_eq!(sizes, vec![5]);
    }

    #[test]
    fn inpaint_mask_cases() {
        let roi = RoiMask { mask: block(64, 64, 10, 10, 40, 40), steps: vec![] };
        assert_eq!(build_inpaint_mask(&roi, &Mask::empty(64, 64), 5).unwrap().count(), 0);

        let far = block(64, 64, 56, 56, 4, 4);
        assert_eq!(build_inpaint_mask(&roi, &far, 5).unwrap().count(), 0);

        let hole = block(64, 64, 25, 25, 10, 10);
        let i = build_inpaint_mask(&roi, &hole, 5).unwrap();
        assert!(hole.is_subset_of(&i));
        assert!(i.is_subset_of(&dilate(&hole, &disk_offsets(5))));
        assert!(i.count() > hole.count());

        assert!(build_inpaint_mask(&roi, &Mask::empty(8, 8), 5).is_err());
    }

    #[test]
    fn disk_has_expected_area() {
        // Gauss circle count for r = 5.
        assert_eq!(disk_offsets(5).len(), 81);
        assert_eq!(disk_offsets(0), vec![(0, 0)]);
    }
}
