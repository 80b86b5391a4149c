//! Image export: raw 16-bit PGM and PNG.

use std::io::Write;
use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use super::CameraView;
use crate::Result;

/// Scalar buffer quantized to 16 bits: `round(value / max_value * 65535)`,
/// clamped to the valid range.
pub fn quantize_u16(values: &[f64], max_value: f64) -> Vec<u16> {
    values
        .iter()
        .map(|&v| {
            if max_value <= 0.0 || !v.is_finite() {
                0
            } else {
                (v / max_value * 65535.0).round().clamp(0.0, 65535.0) as u16
            }
        })
        .collect()
}

/// Binary PGM (P5) with maxval 65535, samples big-endian.
pub fn write_pgm16(mut w: impl Write, width: u32, height: u32, data: &[u16]) -> Result<()> {
    assert_eq!(data.len(), width as usize * height as usize);
    write!(w, "P5\n{width} {height}\n65535\n")?;
    let mut bytes = Vec::with_capacity(data.len() * 2);
    for v in data {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn save_pgm16(path: &Path, width: u32, height: u32, data: &[u16]) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_pgm16(file, width, height, data)
}

pub fn save_png16(path: &Path, width: u32, height: u32, data: &[u16]) -> Result<()> {
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width, height, data.to_vec()).expect("buffer size matches");
    img.save(path)?;
    Ok(())
}

/// Flat-shaded grayscale rendering.
pub fn shaded_image(view: &CameraView) -> GrayImage {
    GrayImage::from_fn(view.width(), view.height(), |x, y| {
        Luma([(view.shade[view.index(x, y)] * 255.0).round() as u8])
    })
}

/// Heatmap of `scores` in [0, 1] over the shaded rendering; pixels outside
/// `mask` keep the grayscale shading.
pub fn heatmap_image(view: &CameraView, scores: &[f64], mask: &[bool]) -> RgbImage {
    RgbImage::from_fn(view.width(), view.height(), |x, y| {
        let i = view.index(x, y);
        if mask[i] {
            let s = scores[i].clamp(0.0, 1.0);
            // Blue (0) through green to red (1).
            let r = (255.0 * (2.0 * s - 1.0).max(0.0)) as u8;
            let b = (255.0 * (1.0 - 2.0 * s).max(0.0)) as u8;
            let g = (255.0 * (1.0 - (2.0 * s - 1.0).abs())) as u8;
            Rgb([r, g, b])
        } else {
            let v = (view.shade[i] * 255.0).round() as u8;
            Rgb([v, v, v])
        }
    })
}
