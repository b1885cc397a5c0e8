//! Iterated nonlocal means restricted to a region of interest.
//!
//! Patch distances are evaluated one displacement at a time with summed-area
//! tables, so a full-window search costs `O(displacements * pixels)` rather
//! than an extra factor of the patch area.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Mask};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NlMeansParams {
    /// Number of best matches averaged per pixel.
    pub k: usize,
    pub iterations: usize,
    /// Odd patch side.
    pub size: usize,
    /// Search radius; `None` searches the whole region.
    pub window: Option<usize>,
}

impl Default for NlMeansParams {
    fn default() -> Self {
        Self { k: 5, iterations: 10, size: 15, window: None }
    }
}

#[derive(Clone, Debug)]
pub struct NlMeansOutcome<T> {
    pub texture: ImageGrid<T>,
    /// Mean absolute change over the region, one entry per iteration.
    pub mean_abs_change: Vec<f64>,
}

/// Candidate ordering key: distance, then the pixel's own patch, then the
/// candidate's row-major index.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    score: f64,
    other: bool,
    index: usize,
}

impl Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        self.score.total_cmp(&o.score).then(self.other.cmp(&o.other)).then(self.index.cmp(&o.index))
    }
}

struct TopK {
    k: usize,
    slots: Vec<Candidate>,
    len: Vec<usize>,
}

impl TopK {
    fn new(targets: usize, k: usize) -> Self {
        let empty = Candidate { score: f64::INFINITY, other: true, index: usize::MAX };
        Self { k, slots: vec![empty; targets * k], len: vec![0; targets] }
    }

    fn offer(&mut self, t: usize, c: Candidate) {
        let list = &mut self.slots[t * self.k..(t + 1) * self.k];
        let len = &mut self.len[t];
        if *len == self.k && c.cmp(&list[self.k - 1]) != Ordering::Less {
            return;
        }
        let mut i = (*len).min(self.k - 1);
        if *len < self.k {
            *len += 1;
        }
        while i > 0 && c.cmp(&list[i - 1]) == Ordering::Less {
            list[i] = list[i - 1];
            i -= 1;
        }
        list[i] = c;
    }

    fn merge(&mut self, other: &TopK) {
        for t in 0..self.len.len() {
            for i in 0..other.len[t] {
                self.offer(t, other.slots[t * other.k + i]);
            }
        }
    }
}

struct Tables {
    ssd: Vec<f64>,
    overlap: Vec<u32>,
}

/// Accumulates the candidates at displacement `(dy, dx)` for every target.
#[allow(clippy::too_many_arguments)]
fn scan_displacement(
    img: &[f64],
    roi: &[bool],
    targets: &[usize],
    m: usize,
    n: usize,
    h: usize,
    (dy, dx): (isize, isize),
    tables: &mut Tables,
    top: &mut TopK,
) {
    let w = n + 1;
    for r in 0..m {
        let mut row_ssd = 0.0;
        let mut row_count = 0u32;
        let rr = r as isize + dy;
        for c in 0..n {
            let cc = c as isize + dx;
            if rr >= 0 && cc >= 0 && (rr as usize) < m && (cc as usize) < n {
                let k = r * n + c;
                let q = rr as usize * n + cc as usize;
                if roi[k] && roi[q] {
                    let d = img[k] - img[q];
                    row_ssd += d * d;
                    row_count += 1;
                }
            }
            tables.ssd[(r + 1) * w + c + 1] = tables.ssd[r * w + c + 1] + row_ssd;
            tables.overlap[(r + 1) * w + c + 1] = tables.overlap[r * w + c + 1] + row_count;
        }
    }
    for (t, &p) in targets.iter().enumerate() {
        let (pr, pc) = (p / n, p % n);
        let (qr, qc) = (pr as isize + dy, pc as isize + dx);
        if qr < 0 || qc < 0 || qr as usize >= m || qc as usize >= n {
            continue;
        }
        let q = qr as usize * n + qc as usize;
        if !roi[q] {
            continue;
        }
        let (r0, r1) = (pr.saturating_sub(h), (pr + h + 1).min(m));
        let (c0, c1) = (pc.saturating_sub(h), (pc + h + 1).min(n));
        let count = tables.overlap[r1 * w + c1] + tables.overlap[r0 * w + c0]
            - tables.overlap[r0 * w + c1]
            - tables.overlap[r1 * w + c0];
        let ssd = tables.ssd[r1 * w + c1] + tables.ssd[r0 * w + c0] - tables.ssd[r0 * w + c1] - tables.ssd[r1 * w + c0];
        // The centers overlap, so count >= 1.
        let score = if dy == 0 && dx == 0 { 0.0 } else { ssd.max(0.0) / count as f64 };
        top.offer(t, Candidate { score, other: q != p, index: q });
    }
}

fn iterate(img: &[f64], roi: &[bool], m: usize, n: usize, params: &NlMeansParams) -> Vec<f64> {
    let targets: Vec<usize> = (0..m * n).filter(|&k| roi[k]).collect();
    let h = params.size / 2;
    let (rm, rn) = match params.window {
        Some(r) => (r.min(m - 1) as isize, r.min(n - 1) as isize),
        None => (m as isize - 1, n as isize - 1),
    };
    let displacements: Vec<(isize, isize)> =
        (-rm..=rm).flat_map(|dy| (-rn..=rn).map(move |dx| (dy, dx))).collect();
    let groups = rayon::current_num_threads().max(1) * 4;
    let chunk = displacements.len().div_ceil(groups).max(1);
    let partials: Vec<TopK> = displacements
        .par_chunks(chunk)
        .map(|group| {
            let mut top = TopK::new(targets.len(), params.k);
            let size = (m + 1) * (n + 1);
            let mut tables = Tables { ssd: vec![0.0; size], overlap: vec![0; size] };
            for &d in group {
                scan_displacement(img, roi, &targets, m, n, h, d, &mut tables, &mut top);
            }
            top
        })
        .collect();
    let mut top = TopK::new(targets.len(), params.k);
    for p in &partials {
        top.merge(p);
    }
    let mut out = img.to_vec();
    for (t, &p) in targets.iter().enumerate() {
        let list = &top.slots[t * params.k..t * params.k + top.len[t]];
        out[p] = list.iter().map(|c| img[c.index]).sum::<f64>() / list.len() as f64;
    }
    out
}

/// Replaces each region pixel, `params.iterations` times, by the mean center
/// value of its `k` closest patches (SSD per overlapping region pixel). A
/// pixel's own patch is an admissible match.
pub fn nlmeans_denoise<T: Real>(v: &ImageGrid<T>, roi: &Mask, params: &NlMeansParams) -> Result<NlMeansOutcome<T>> {
    let (m, n) = v.dims();
    roi.ensure_dims(m, n)?;
    if params.k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if params.size == 0 || params.size.is_multiple_of(2) {
        return Err(Error::invalid(format!("patch size must be odd, got {}", params.size)));
    }
    let mut img: Vec<f64> = v.as_slice().iter().map(|x| x.to_f64_lossy()).collect();
    let mut changes = Vec::with_capacity(params.iterations);
    let count = roi.count();
    for _ in 0..params.iterations {
        if count == 0 {
            changes.push(0.0);
            continue;
        }
        let next = iterate(&img, roi.as_slice(), m, n, params);
        let change = next.iter().zip(&img).map(|(a, b)| (a - b).abs()).sum::<f64>() / count as f64;
        changes.push(change);
        img = next;
    }
    let texture = ImageGrid::from_vec_unchecked(m, n, img.into_iter().map(T::lit).collect());
    Ok(NlMeansOutcome { texture, mean_abs_change: changes })
}
