//! PNG export for rendered camera frames and vision masks.

use std::path::Path;

use super::HarnessError;
use crate::vision::{BinaryMask, Image};

/// Write an RGB frame as a PNG file, creating parent directories as needed.
pub fn save_png(img: &Image, path: &Path) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = image::RgbImage::new(img.width() as u32, img.height() as u32);
    for y in 0..img.height() {
        for x in 0..img.width() {
            out.put_pixel(x as u32, y as u32, image::Rgb(img.get(x, y)));
        }
    }
    out.save(path)
        .map_err(|e| HarnessError::Other(format!("cannot write {}: {e}", path.display())))
}

/// Write a binary mask as a black/white PNG.
pub fn save_mask_png(mask: &BinaryMask, path: &Path) -> Result<(), HarnessError> {
    let mut img = Image::filled(mask.width(), mask.height(), [0, 0, 0]);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                img.set(x, y, [255, 255, 255]);
            }
        }
    }
    save_png(&img, path)
}
