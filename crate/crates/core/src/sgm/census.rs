use crate::error::{Error, Result};
use crate::formats::RasterImage;

/// Per-pixel census signatures.
///
/// Bit `k` corresponds to the `k`-th neighbour in row-major window order with
/// the centre skipped, and is set when that neighbour is darker than the centre.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusMap {
    width: usize,
    height: usize,
    window: usize,
    bits: Vec<u64>,
}

impl CensusMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Number of bits in each signature.
    pub fn bit_count(&self) -> u32 {
        (self.window * self.window - 1) as u32
    }

    pub fn get(&self, x: usize, y: usize) -> u64 {
        self.bits[y * self.width + x]
    }

    pub fn signatures(&self) -> &[u64] {
        &self.bits
    }
}

/// Bit index of the neighbour at offset `(dx, dy)` in a `window`-wide census.
pub fn census_bit(window: usize, dx: isize, dy: isize) -> u32 {
    let r = (window / 2) as isize;
    let k = (dy + r) * window as isize + (dx + r);
    let centre = r * window as isize + r;
    (if k > centre { k - 1 } else { k }) as u32
}

pub fn validate_window(window: usize) -> Result<()> {
    if window < 3 || window.is_multiple_of(2) || window > 7 {
        return Err(Error::InvalidParameter(format!(
            "census window must be odd and within 3..=7, got {window}"
        )));
    }
    Ok(())
}

/// Census transform with replicated borders. Colour input is reduced to luma.
pub fn census_transform(img: &RasterImage, window: usize) -> Result<CensusMap> {
    validate_window(window)?;
    let (w, h) = img.dims();
    if w < window || h < window {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min_width: window,
            min_height: window,
        });
    }
    let gray = img.to_gray();
    let px = gray.data();
    let r = (window / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut bits = vec![0u64; w * h];
    for y in 0..h {
        for x in 0..w {
            let centre = px[y * w + x];
            let mut sig = 0u64;
            let mut bit = 0;
            for dy in -r..=r {
                let yy = clamp(y as isize + dy, h);
                for dx in -r..=r {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let xx = clamp(x as isize + dx, w);
                    if px[yy * w + xx] < centre {
                        sig |= 1 << bit;
                    }
                    bit += 1;
                }
            }
            bits[y * w + x] = sig;
        }
    }
    Ok(CensusMap {
        width: w,
        height: h,
        window,
        bits,
    })
}
