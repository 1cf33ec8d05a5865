use std::path::Path;

use image::{ImageBuffer, Rgb};

use super::RgbImage;
use crate::error::{Error, Result};
use crate::Scalar;

/// 16-bit RGB PNG; values are clamped to [0, 1] and scaled to 0..=65535.
pub fn write_png16<T: Scalar>(path: impl AsRef<Path>, img: &RgbImage<T>) -> Result<()> {
    let (w, h) = (img.width(), img.height());
    let mut buf: ImageBuffer<Rgb<u16>, Vec<u16>> = ImageBuffer::new(w as u32, h as u32);
    let clamped = img.clamp_unit();
    for y in 0..h {
        for x in 0..w {
            let px =
                [0, 1, 2].map(|c| (clamped.get(c, x, y).to_f64_lossy() * 65535.0).round() as u16);
            buf.put_pixel(x as u32, y as u32, Rgb(px));
        }
    }
    buf.save(path.as_ref())?;
    Ok(())
}

/// Raw little-endian f32 planes, R then G then B, each row-major.
pub fn write_raw_f32<T: Scalar>(path: impl AsRef<Path>, img: &RgbImage<T>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .flat_map(|v| v.to_f32_lossy().to_le_bytes())
        .collect();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_raw_f32<T: Scalar>(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
) -> Result<RgbImage<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let want = 4 * 3 * width * height;
    if bytes.len() != want {
        return Err(Error::format(
            path,
            bytes.len().min(want) as u64,
            format!("expected {want} bytes"),
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| T::from_f32_exact(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    RgbImage::new(width, height, data)
}
