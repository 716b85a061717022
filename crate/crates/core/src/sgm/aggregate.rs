//! Semi-global cost aggregation.
//!
//! Along each path direction `r`:
//!
//! ```text
//! L(p, d) = C(p, d) + min(L(p-r, d), L(p-r, d±1) + p1, min_k L(p-r, k) + p2) - min_k L(p-r, k)
//! ```
//!
//! with `L = C` at the first pixel of every path. The aggregated volume is
//! the sum of `L` over all directions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::CostVolume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PathSet {
    Four,
    #[default]
    Eight,
}

impl PathSet {
    /// Step vectors `(dx, dy)`; each path visits `p` after `p - (dx, dy)`.
    pub fn directions(self) -> &'static [(isize, isize)] {
        const EIGHT: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1)];
        match self {
            PathSet::Four => &EIGHT[..4],
            PathSet::Eight => &EIGHT,
        }
    }
}

#[inline]
fn step(cost: &[u16], prev: &[u32], out: &mut [u32], p1: u64, p2: u64) {
    let prev_min = prev.iter().copied().min().unwrap_or(0) as u64;
    let n = cost.len();
    for d in 0..n {
        let mut best = prev[d] as u64;
        if d > 0 {
            best = best.min(prev[d - 1] as u64 + p1);
        }
        if d + 1 < n {
            best = best.min(prev[d + 1] as u64 + p1);
        }
        best = best.min(prev_min + p2);
        out[d] = (cost[d] as u64 + best - prev_min).min(u32::MAX as u64) as u32;
    }
}

fn first(cost: &[u16], out: &mut [u32]) {
    for (o, &c) in out.iter_mut().zip(cost) {
        *o = c as u32;
    }
}

/// Add the path costs of direction `dir` into `acc` (same layout as `vol`).
fn accumulate_path(vol: &CostVolume<u16>, dir: (isize, isize), p1: u32, p2: u32, acc: &mut [u32]) {
    let (w, h) = vol.dims();
    let nd = vol.disparities();
    let (dx, dy) = dir;
    let (p1, p2) = (p1 as u64, p2 as u64);
    let raw = vol.data();

    if dy == 0 {
        acc.par_chunks_mut(w * nd).enumerate().for_each(|(y, acc_row)| {
            let costs = &raw[y * w * nd..(y + 1) * w * nd];
            let mut prev = vec![0u32; nd];
            let mut cur = vec![0u32; nd];
            let xs: Box<dyn Iterator<Item = usize>> = if dx >= 0 {
                Box::new(0..w)
            } else {
                Box::new((0..w).rev())
            };
            for (i, x) in xs.enumerate() {
                let c = &costs[x * nd..(x + 1) * nd];
                if i == 0 {
                    first(c, &mut cur);
                } else {
                    step(c, &prev, &mut cur, p1, p2);
                }
                for (a, &l) in acc_row[x * nd..(x + 1) * nd].iter_mut().zip(&cur) {
                    *a = a.saturating_add(l);
                }
                std::mem::swap(&mut prev, &mut cur);
            }
        });
        return;
    }

    // vertical and diagonal paths sweep row by row; pixels within a row are independent
    let mut prev_row = vec![0u32; w * nd];
    let mut cur_row = vec![0u32; w * nd];
    let ys: Vec<usize> = if dy > 0 {
        (0..h).collect()
    } else {
        (0..h).rev().collect()
    };
    for (i, &y) in ys.iter().enumerate() {
        let costs = &raw[y * w * nd..(y + 1) * w * nd];
        let prev_ref = &prev_row;
        cur_row.par_chunks_mut(nd).enumerate().for_each(|(x, out)| {
            let c = &costs[x * nd..(x + 1) * nd];
            let px = x as isize - dx;
            if i == 0 || px < 0 || px >= w as isize {
                first(c, out);
            } else {
                let px = px as usize;
                step(c, &prev_ref[px * nd..(px + 1) * nd], out, p1, p2);
            }
        });
        for (a, &l) in acc[y * w * nd..(y + 1) * w * nd].iter_mut().zip(&cur_row) {
            *a = a.saturating_add(l);
        }
        std::mem::swap(&mut prev_row, &mut cur_row);
    }
}

/// Path costs `L_r` for a single direction.
pub fn aggregate_path(vol: &CostVolume<u16>, dir: (isize, isize), p1: u32, p2: u32) -> CostVolume<u32> {
    let mut acc = vec![0u32; vol.data().len()];
    accumulate_path(vol, dir, p1, p2, &mut acc);
    CostVolume::new(vol.width(), vol.height(), vol.disparities(), acc).expect("same shape as input")
}

/// Sum of the path costs over every direction in `paths`, added in a fixed order.
pub fn sgm_aggregate(vol: &CostVolume<u16>, p1: u32, p2: u32, paths: PathSet) -> CostVolume<u32> {
    let mut acc = vec![0u32; vol.data().len()];
    for &dir in paths.directions() {
        accumulate_path(vol, dir, p1, p2, &mut acc);
    }
    CostVolume::new(vol.width(), vol.height(), vol.disparities(), acc).expect("same shape as input")
}
