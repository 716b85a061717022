//! Raster containers and the file formats the pipeline reads and writes.
//!
//! Invalid pixels are carried as an explicit mask. File sentinels (0 in
//! 16-bit PNG, non-finite in PFM) only exist at the encode/decode boundary.

mod pfm;
mod png16;
mod raster;

pub use pfm::{read_pfm, write_pfm};
pub use png16::{read_disp_png16, write_disp_png16};
pub use raster::{read_image, read_mask_png, write_image, write_mask_png, ImageFormat};

use crate::error::{Error, Result};

/// Row-major 8-bit image with one or three interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!("empty raster {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidRaster(format!("{channels} channels")));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidRaster(format!(
                "data length {} != {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Samples of the pixel at `(x, y)`.
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        let stride = self.width * self.channels;
        &self.data[y * stride..(y + 1) * stride]
    }

    /// Promote grayscale to three channels; RGB images are returned unchanged.
    pub fn to_rgb(&self) -> RasterImage {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    /// ITU-R BT.601 luma, rounded to nearest.
    pub fn to_gray(&self) -> RasterImage {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| {
                let y = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
                ((y + 500) / 1000) as u8
            })
            .collect();
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Convert to the requested channel count (1 or 3).
    pub fn with_channels(&self, channels: usize) -> RasterImage {
        match channels {
            1 => self.to_gray(),
            _ => self.to_rgb(),
        }
    }

    /// Copy of the `width`x`height` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<RasterImage> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::ImageTooSmall {
                width: self.width,
                height: self.height,
                min_width: x0 + width,
                min_height: y0 + height,
            });
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(width * height * c);
        for y in y0..y0 + height {
            let row = self.row(y);
            data.extend_from_slice(&row[x0 * c..(x0 + width) * c]);
        }
        RasterImage::new(width, height, c, data)
    }

    /// Left-right mirror image.
    pub fn mirrored(&self) -> RasterImage {
        let c = self.channels;
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            let row = self.row(y);
            for px in row.chunks_exact(c).rev() {
                data.extend_from_slice(px);
            }
        }
        RasterImage { data, ..*self }
    }
}

/// Row-major 32-bit float map with a per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
    valid: Vec<bool>,
}

impl FloatMap {
    /// Build a map; a pixel flagged valid must hold a finite sample.
    pub fn new(width: usize, height: usize, data: Vec<f32>, valid: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!("empty map {width}x{height}")));
        }
        let n = width * height;
        if data.len() != n || valid.len() != n {
            return Err(Error::InvalidRaster(format!(
                "map lengths {}/{} != {width}x{height}",
                data.len(),
                valid.len()
            )));
        }
        if let Some(index) = (0..n).find(|&i| valid[i] && !data[i].is_finite()) {
            return Err(Error::InvalidSample {
                index,
                value: data[index],
            });
        }
        Ok(Self {
            width,
            height,
            data,
            valid,
        })
    }

    /// Every finite sample is valid, every non-finite one is not.
    pub fn from_samples(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        let valid = data.iter().map(|v| v.is_finite()).collect();
        Self::new(width, height, data, valid)
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::from_samples(width, height, vec![value; width * height])
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.data[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Iterator over the samples of valid pixels in row-major order.
    pub fn valid_values(&self) -> impl Iterator<Item = f32> + '_ {
        self.data
            .iter()
            .zip(&self.valid)
            .filter_map(|(&v, &ok)| ok.then_some(v))
    }

    /// Apply `f` to every valid sample. Invalid pixels keep their raw value.
    pub fn map_valid(&self, mut f: impl FnMut(f32) -> f32) -> Result<FloatMap> {
        let data = self
            .data
            .iter()
            .zip(&self.valid)
            .map(|(&v, &ok)| if ok { f(v) } else { v })
            .collect();
        FloatMap::new(self.width, self.height, data, self.valid.clone())
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<FloatMap> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::ImageTooSmall {
                width: self.width,
                height: self.height,
                min_width: x0 + width,
                min_height: y0 + height,
            });
        }
        let mut data = Vec::with_capacity(width * height);
        let mut valid = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            let s = y * self.width + x0;
            data.extend_from_slice(&self.data[s..s + width]);
            valid.extend_from_slice(&self.valid[s..s + width]);
        }
        FloatMap::new(width, height, data, valid)
    }

    pub fn into_parts(self) -> (usize, usize, Vec<f32>, Vec<bool>) {
        (self.width, self.height, self.data, self.valid)
    }
}
