use std::io::Cursor;

use image::{DynamicImage, GrayImage, RgbImage};

use super::RasterImage;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    /// Decode only; source corpora arrive as JPEG but nothing is written lossy.
    Jpeg,
}

/// Decode a PNG or JPEG. Grayscale stays single-channel; alpha is dropped.
pub fn read_image(bytes: &[u8]) -> Result<RasterImage> {
    let format =
        image::guess_format(bytes).map_err(|_| Error::UnsupportedFormat("unrecognized image signature".into()))?;
    if !matches!(format, image::ImageFormat::Png | image::ImageFormat::Jpeg) {
        return Err(Error::UnsupportedFormat(format!("{format:?}")));
    }
    let img = image::load_from_memory_with_format(bytes, format).map_err(|e| match format {
        image::ImageFormat::Png => Error::MalformedPng(e.to_string()),
        _ => Error::UnsupportedFormat(e.to_string()),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLuma16(_) => {
            RasterImage::new(w, h, 1, img.to_luma8().into_raw())
        }
        _ => RasterImage::new(w, h, 3, img.to_rgb8().into_raw()),
    }
}

pub fn write_image(img: &RasterImage, format: ImageFormat) -> Result<Vec<u8>> {
    if format != ImageFormat::Png {
        return Err(Error::UnsupportedFormat(format!("cannot write {format:?}")));
    }
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = match img.channels() {
        1 => DynamicImage::ImageLuma8(
            GrayImage::from_raw(w, h, img.data().to_vec())
                .ok_or_else(|| Error::InvalidRaster("gray buffer size".into()))?,
        ),
        _ => DynamicImage::ImageRgb8(
            RgbImage::from_raw(w, h, img.data().to_vec())
                .ok_or_else(|| Error::InvalidRaster("rgb buffer size".into()))?,
        ),
    };
    let mut out = Cursor::new(Vec::new());
    dynamic
        .write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::MalformedPng(e.to_string()))?;
    Ok(out.into_inner())
}

/// 8-bit PNG mask: 255 where `mask` is true, 0 elsewhere.
pub fn write_mask_png(mask: &[bool], width: usize, height: usize) -> Result<Vec<u8>> {
    let data = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    write_image(&RasterImage::new(width, height, 1, data)?, ImageFormat::Png)
}

/// Inverse of [`write_mask_png`]; any sample >= 128 counts as set.
pub fn read_mask_png(bytes: &[u8]) -> Result<(usize, usize, Vec<bool>)> {
    let img = read_image(bytes)?.to_gray();
    let mask = img.data().iter().map(|&v| v >= 128).collect();
    Ok((img.width(), img.height(), mask))
}

#[cfg(test)]
mod tests {
    use image::codecs::jpeg::JpegEncoder;
    use image::ExtendedColorType;

    use super::*;

    #[test]
    fn png_round_trip() {
        let img = RasterImage::new(3, 2, 3, (0..18).map(|v| v * 13).collect()).unwrap();
        let back = read_image(&write_image(&img, ImageFormat::Png).unwrap()).unwrap();
        assert_eq!(back, img);
        let gray = img.to_gray();
        assert_eq!(
            read_image(&write_image(&gray, ImageFormat::Png).unwrap()).unwrap(),
            gray
        );
    }

    #[test]
    fn white_pixel_promotes_to_rgb() {
        let white = RasterImage::filled(1, 1, 1, 255).unwrap();
        let png = write_image(&white, ImageFormat::Png).unwrap();
        assert_eq!(read_image(&png).unwrap().to_rgb().data(), &[255, 255, 255]);
    }

    #[test]
    fn solid_jpeg_decodes_within_two_levels() {
        let (w, h) = (16u32, 16u32);
        let color = [200u8, 60, 30];
        let raw: Vec<u8> = (0..w * h).flat_map(|_| color).collect();
        let mut jpeg = Vec::new();
        JpegEncoder::new_with_quality(&mut jpeg, 95)
            .encode(&raw, w, h, ExtendedColorType::Rgb8)
            .unwrap();
        let img = read_image(&jpeg).unwrap();
        assert_eq!(img.channels(), 3);
        for px in img.data().chunks_exact(3) {
            for (got, want) in px.iter().zip(color) {
                assert!((*got as i32 - want as i32).abs() <= 2, "{px:?}");
            }
        }
    }

    #[test]
    fn jpeg_is_read_only() {
        let img = RasterImage::filled(1, 1, 3, 0).unwrap();
        assert!(matches!(
            write_image(&img, ImageFormat::Jpeg),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn unknown_bytes_are_unsupported() {
        assert!(matches!(read_image(b"GIF89a...."), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(read_image(b"??"), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn mask_round_trip() {
        let mask = vec![true, false, false, true, true, false];
        let png = write_mask_png(&mask, 3, 2).unwrap();
        assert_eq!(read_image(&png).unwrap().data(), &[255, 0, 0, 255, 255, 0]);
        assert_eq!(read_mask_png(&png).unwrap(), (3, 2, mask));
    }
}
