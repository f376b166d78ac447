//! Median shift-and-add onto an `r`-times finer grid.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::raster::{Image, Plane, Shift};

/// Number of low-resolution samples deposited on each HR pixel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContributionMap {
    width: usize,
    height: usize,
    counts: Vec<u32>,
}

impl ContributionMap {
    pub fn new(width: usize, height: usize, counts: Vec<u32>) -> Result<Self> {
        if counts.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} counts for a {width}x{height} grid",
                counts.len()
            )));
        }
        Ok(ContributionMap { width, height, counts })
    }

    pub fn uniform(width: usize, height: usize, count: u32) -> Self {
        ContributionMap { width, height, counts: vec![count; width * height] }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.counts[y * self.width + x]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn holes(&self) -> usize {
        self.counts.iter().filter(|&&c| c == 0).count()
    }

    /// Counts as a float raster, the diagonal of `A`.
    pub fn as_plane(&self) -> Plane {
        Plane::from_fn(self.width, self.height, |x, y| f64::from(self.get(x, y)))
    }
}

/// Deposits every frame pixel `(x, y)` at HR position
/// `round(r * (x + dx_i)), round(r * (y + dy_i))`, takes the per-pixel median
/// (mean of the two middle values for even counts) and fills pixels without
/// deposits by linear interpolation between populated neighbours. Filled
/// pixels keep count 0.
pub fn median_shift_and_add(frames: &[Image], shifts: &[Shift], r: usize) -> Result<(Image, ContributionMap)> {
    if frames.len() != shifts.len() {
        return Err(Error::DimensionMismatch(format!("{} frames but {} shifts", frames.len(), shifts.len())));
    }
    let first = frames.first().ok_or_else(|| Error::InvalidArgument("no frames to fuse".into()))?;
    if r == 0 {
        return Err(Error::InvalidArgument("fusion factor must be >= 1".into()));
    }
    let (w, h) = first.dims();
    if let Some(i) = frames.iter().position(|f| f.dims() != (w, h)) {
        return Err(Error::DimensionMismatch(format!("frame {i} differs in size from frame 0")));
    }
    let (hw, hh) = (w * r, h * r);
    let rf = r as f64;

    let mut deposits: Vec<(u32, f64)> = Vec::with_capacity(frames.len() * w * h);
    for (frame, s) in frames.iter().zip(shifts) {
        let xs: Vec<Option<usize>> = (0..w).map(|x| grid_pos(rf * (x as f64 + s.dx), hw)).collect();
        for y in 0..h {
            let Some(ty) = grid_pos(rf * (y as f64 + s.dy), hh) else { continue };
            for (x, tx) in xs.iter().enumerate() {
                if let Some(tx) = tx {
                    deposits.push(((ty * hw + tx) as u32, frame.get(x, y)));
                }
            }
        }
    }
    if deposits.is_empty() {
        return Err(Error::InvalidArgument("no sample lands on the output grid".into()));
    }
    deposits.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut values = vec![0.0; hw * hh];
    let mut counts = vec![0u32; hw * hh];
    let mut start = 0;
    while start < deposits.len() {
        let idx = deposits[start].0;
        let mut end = start;
        while end < deposits.len() && deposits[end].0 == idx {
            end += 1;
        }
        let group = &deposits[start..end];
        let k = group.len();
        values[idx as usize] = if k % 2 == 1 { group[k / 2].1 } else { 0.5 * (group[k / 2 - 1].1 + group[k / 2].1) };
        counts[idx as usize] = k as u32;
        start = end;
    }

    let filled = fill_holes(&values, &counts, hw, hh);
    let image = Image::clamped(Plane::new(hw, hh, filled)?);
    Ok((image, ContributionMap { width: hw, height: hh, counts }))
}

fn grid_pos(v: f64, len: usize) -> Option<usize> {
    let p = math::round(v);
    if p >= 0.0 && p < len as f64 {
        Some(p as usize)
    } else {
        None
    }
}

/// Averages a rows-then-columns and a columns-then-rows linear fill. On a
/// regular lattice both reduce to bilinear interpolation.
fn fill_holes(values: &[f64], counts: &[u32], w: usize, h: usize) -> Vec<f64> {
    if counts.iter().all(|&c| c > 0) {
        return values.to_vec();
    }
    let known: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
    let a = fill_separable(values, &known, w, h, false);
    let b = fill_separable(values, &known, w, h, true);
    a.iter()
        .zip(&b)
        .zip(&known)
        .zip(values)
        .map(|(((p, q), &k), &v)| if k { v } else { 0.5 * (p + q) })
        .collect()
}

fn fill_separable(values: &[f64], known: &[bool], w: usize, h: usize, columns_first: bool) -> Vec<f64> {
    let (outer, inner) = if columns_first { (w, h) } else { (h, w) };
    let at = |o: usize, i: usize| if columns_first { i * w + o } else { o * w + i };
    let mut out = values.to_vec();
    let mut line_known = vec![false; outer];
    let mut vals = vec![0.0; inner];
    let mut mask = vec![false; inner];
    for (o, lk) in line_known.iter_mut().enumerate() {
        for i in 0..inner {
            vals[i] = values[at(o, i)];
            mask[i] = known[at(o, i)];
        }
        if interpolate_line(&mut vals, &mask) {
            *lk = true;
            for i in 0..inner {
                out[at(o, i)] = vals[i];
            }
        }
    }
    // second pass across lines: every position of a filled line is known
    let mut cross = vec![0.0; outer];
    for i in 0..inner {
        for o in 0..outer {
            cross[o] = out[at(o, i)];
        }
        interpolate_line(&mut cross, &line_known);
        for o in 0..outer {
            out[at(o, i)] = cross[o];
        }
    }
    out
}

/// Linear interpolation of unknown entries between known neighbours, with
/// replicate at the ends. Returns false when nothing on the line is known.
fn interpolate_line(vals: &mut [f64], known: &[bool]) -> bool {
    let idx: Vec<usize> = (0..vals.len()).filter(|&i| known[i]).collect();
    let (Some(&first), Some(&last)) = (idx.first(), idx.last()) else {
        return false;
    };
    for i in 0..first {
        vals[i] = vals[first];
    }
    for i in last + 1..vals.len() {
        vals[i] = vals[last];
    }
    for pair in idx.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (va, vb) = (vals[a], vals[b]);
        for i in a + 1..b {
            let t = (i - a) as f64 / (b - a) as f64;
            vals[i] = va * (1.0 - t) + vb * t;
        }
    }
    true
}

/// Multiplies every shift component by an integer factor.
pub fn scale_shifts(shifts: &[Shift], factor: u32) -> Vec<Shift> {
    scale_shifts_by(shifts, f64::from(factor))
}

pub fn scale_shifts_by(shifts: &[Shift], factor: f64) -> Vec<Shift> {
    shifts.iter().map(|s| s.scaled(factor)).collect()
}
