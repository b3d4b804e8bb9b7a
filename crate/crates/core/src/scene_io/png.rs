use std::path::Path;

use super::SceneError;
use crate::rasterizer::{Framebuffer, Image};

/// `round(255 · clamp(v, 0, 1))`, halves rounded up.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Composites the remaining transmittance against `background` and
/// quantizes to 8-bit RGB, row-major.
pub fn quantize_framebuffer(fb: &Framebuffer, background: [f64; 3]) -> Vec<u8> {
    quantize_image(&fb.composite(background))
}

pub fn quantize_image(img: &Image) -> Vec<u8> {
    img.pixels.iter().flat_map(|p| p.map(quantize)).collect()
}

pub fn write_png(
    fb: &Framebuffer,
    path: impl AsRef<Path>,
    background: [f64; 3],
) -> Result<(), SceneError> {
    let buf = image::RgbImage::from_raw(fb.width, fb.height, quantize_framebuffer(fb, background))
        .expect("buffer matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| SceneError::Io(std::io::Error::other(e)))
}

/// Decodes an 8-bit PNG into `(width, height, rgb bytes)`.
pub fn read_png(path: impl AsRef<Path>) -> Result<(u32, u32, Vec<u8>), SceneError> {
    let img = image::open(path)
        .map_err(|e| SceneError::Io(std::io::Error::other(e)))?
        .to_rgb8();
    Ok((img.width(), img.height(), img.into_raw()))
}
