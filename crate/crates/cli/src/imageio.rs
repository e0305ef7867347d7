//! Image files. Pixel values are written as-is (no transfer curve): PNG
//! stores `round(255 · clamp(v, 0, 1))`, EXR stores `f32`.

use std::path::Path;

use anyhow::{Context, Result};
use image::{Rgb32FImage, RgbImage};
use utsplat::Image;

pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    let data: Vec<u8> = img.data().iter().map(|&v| to_u8(v)).collect();
    let buf = RgbImage::from_raw(img.width() as u32, img.height() as u32, data).expect("RGB buffer size");
    buf.save_with_format(path, image::ImageFormat::Png)
        .with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_exr(path: &Path, img: &Image) -> Result<()> {
    let data: Vec<f32> = img.data().iter().map(|&v| v as f32).collect();
    let buf = Rgb32FImage::from_raw(img.width() as u32, img.height() as u32, data).expect("RGB buffer size");
    buf.save_with_format(path, image::ImageFormat::OpenExr)
        .with_context(|| format!("cannot write {}", path.display()))
}

/// Reads a PNG (scaled to `[0, 1]`) or EXR image, dropping any alpha channel.
pub fn read(path: &Path) -> Result<Image> {
    let img = image::open(path).with_context(|| format!("cannot read image {}", path.display()))?;
    let rgb = img.to_rgb32f();
    let (w, h) = rgb.dimensions();
    let data = rgb.into_raw().into_iter().map(f64::from).collect();
    Ok(Image::from_raw(w as usize, h as usize, data)?)
}
