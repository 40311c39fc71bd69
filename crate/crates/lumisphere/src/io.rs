//! Conversion between 8-bit image files and in-memory rasters.

use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma, Rgb};
use lumisphere_core::{GrayImage, RgbImage};

use crate::{Error, Result};

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Decodes any supported raster file; values are rescaled to `[0, 1]`.
/// 16-bit files keep their full precision.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory(&bytes)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgb16();
    let (w, h) = img.dimensions();
    let data = img.pixels().map(|p| p.0.map(|c| f64::from(c) / 65535.0)).collect();
    Ok(RgbImage::from_vec(w as usize, h as usize, data)?)
}

/// Width and height without decoding pixel data.
pub fn dimensions(path: &Path) -> Result<(u32, u32)> {
    image::image_dimensions(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn rgb_to_image(img: &RgbImage) -> image::RgbImage {
    image::RgbImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        Rgb(img.get(x as usize, y as usize).map(to_u8))
    })
}

fn to_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// Raster as it reads back from a 16-bit file.
pub fn quantize16(img: &RgbImage) -> RgbImage {
    img.map(|v| f64::from(to_u16(v)) / 65535.0)
}

pub fn save_rgb16_png(path: &Path, img: &RgbImage) -> Result<()> {
    let out: ImageBuffer<Rgb<u16>, Vec<u16>> = ImageBuffer::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        Rgb(img.get(x as usize, y as usize).map(to_u16))
    });
    write_png(path, |buf| out.write_to(buf, ImageFormat::Png))
}

pub fn gray_to_image(img: &GrayImage) -> image::GrayImage {
    image::GrayImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        Luma([to_u8(img.get(x as usize, y as usize))])
    })
}

/// The raster as it reads back after an 8-bit round trip.
pub fn quantize(img: &RgbImage) -> RgbImage {
    img.map(|v| f64::from(to_u8(v)) / 255.0)
}

fn write_png(path: &Path, encode: impl FnOnce(&mut Cursor<Vec<u8>>) -> image::ImageResult<()>) -> Result<()> {
    let mut buf = Cursor::new(Vec::new());
    encode(&mut buf).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, buf.into_inner()).map_err(|e| Error::io(path, e))
}

pub fn save_rgb_png(path: &Path, img: &RgbImage) -> Result<()> {
    let out = rgb_to_image(img);
    write_png(path, |buf| out.write_to(buf, ImageFormat::Png))
}

pub fn save_gray_png(path: &Path, img: &GrayImage) -> Result<()> {
    let out = gray_to_image(img);
    write_png(path, |buf| out.write_to(buf, ImageFormat::Png))
}

/// PNG bytes of a grayscale raster.
pub fn encode_gray_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    gray_to_image(img)
        .write_to(&mut buf, ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: "<memory>".into(),
            source,
        })?;
    Ok(buf.into_inner())
}
