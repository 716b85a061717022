use rayon::prelude::*;

use super::census::CensusMap;
use crate::error::{Error, Result};

/// Dense `width x height x (d_max + 1)` matching costs, disparity fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostVolume<T> {
    width: usize,
    height: usize,
    disparities: usize,
    data: Vec<T>,
}

impl<T: Copy> CostVolume<T> {
    pub fn new(width: usize, height: usize, disparities: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || disparities == 0 || data.len() != width * height * disparities {
            return Err(Error::InvalidRaster(format!(
                "cost volume {width}x{height}x{disparities} with {} entries",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            disparities,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Number of disparity levels, `d_max + 1`.
    pub fn disparities(&self) -> usize {
        self.disparities
    }

    pub fn get(&self, x: usize, y: usize, d: usize) -> T {
        self.data[(y * self.width + x) * self.disparities + d]
    }

    /// Costs of every disparity at one pixel.
    pub fn costs(&self, x: usize, y: usize) -> &[T] {
        let i = (y * self.width + x) * self.disparities;
        &self.data[i..i + self.disparities]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> CostVolume<U> {
        CostVolume {
            width: self.width,
            height: self.height,
            disparities: self.disparities,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Hamming distance between `left(x, y)` and `right(x - d, y)`; candidates
/// falling off the left edge get the maximum cost.
pub fn build_cost_volume(left: &CensusMap, right: &CensusMap, d_max: usize) -> Result<CostVolume<u16>> {
    if left.dims() != right.dims() {
        return Err(Error::dims(left.dims(), right.dims()));
    }
    if left.window() != right.window() {
        return Err(Error::InvalidParameter("census windows differ".into()));
    }
    let (w, h) = left.dims();
    let nd = d_max + 1;
    let max_cost = left.bit_count() as u16;
    let mut data = vec![max_cost; w * h * nd];
    data.par_chunks_mut(w * nd).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let l = left.get(x, y);
            let costs = &mut row[x * nd..(x + 1) * nd];
            for (d, c) in costs.iter_mut().enumerate().take(x + 1) {
                *c = (l ^ right.get(x - d, y)).count_ones() as u16;
            }
        }
    });
    CostVolume::new(w, h, nd, data)
}
