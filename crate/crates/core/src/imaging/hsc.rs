//! `HSC1` hyperspectral cube files.
//!
//! Layout, all little-endian:
//!
//! | offset | size      | field                                   |
//! |--------|-----------|-----------------------------------------|
//! | 0      | 12        | magic `b"HSC1 cube\0\0\0"`              |
//! | 12     | 4         | u32 version (1)                         |
//! | 16     | 4         | u32 width                               |
//! | 20     | 4         | u32 height                              |
//! | 24     | 4         | u32 band count                          |
//! | 28     | 4         | u32 reserved (0)                        |
//! | 32     | 4·bands   | f32 wavelengths in nm                   |
//! | …      | 4·bands·W·H | f32 planes, band-major, rows of width W |
//!
//! Readers accept 48 bands on the 420–890 nm grid, or 50 bands starting at
//! 400 nm, in which case the 400 and 410 nm planes are dropped.

use std::path::Path;

use super::HyperCube;
use crate::error::{Error, Result};
use crate::spectra::{WavelengthGrid, N_BANDS};
use crate::Scalar;

pub const HSC_MAGIC: [u8; 12] = *b"HSC1 cube\0\0\0";
pub const HSC_VERSION: u32 = 1;
const HEADER_LEN: usize = 32;

pub fn save_cube<T: Scalar>(path: impl AsRef<Path>, cube: &HyperCube<T>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * N_BANDS * (1 + cube.pixels()));
    buf.extend_from_slice(&HSC_MAGIC);
    buf.extend_from_slice(&HSC_VERSION.to_le_bytes());
    buf.extend_from_slice(&(cube.width() as u32).to_le_bytes());
    buf.extend_from_slice(&(cube.height() as u32).to_le_bytes());
    buf.extend_from_slice(&(N_BANDS as u32).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for nm in WavelengthGrid::wavelengths() {
        buf.extend_from_slice(&(nm as f32).to_le_bytes());
    }
    for v in cube.data() {
        buf.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn u32_at(bytes: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap())
}

fn f32_at(bytes: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap())
}

pub fn load_hsc<T: Scalar>(path: impl AsRef<Path>) -> Result<HyperCube<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt = |off: usize, msg: String| Error::format(path, off as u64, msg);

    if bytes.len() < HEADER_LEN {
        return Err(fmt(
            bytes.len(),
            format!("file too short for header ({} bytes)", bytes.len()),
        ));
    }
    if bytes[..12] != HSC_MAGIC {
        return Err(fmt(0, "bad magic, not an HSC1 cube".into()));
    }
    let version = u32_at(&bytes, 12);
    if version != HSC_VERSION {
        return Err(fmt(12, format!("unsupported version {version}")));
    }
    let width = u32_at(&bytes, 16) as usize;
    let height = u32_at(&bytes, 20) as usize;
    let bands = u32_at(&bytes, 24) as usize;
    if width == 0 || height == 0 {
        return Err(fmt(16, format!("empty cube {width}×{height}")));
    }
    let skip = match bands {
        N_BANDS => 0,
        50 => 2,
        _ => {
            return Err(fmt(
                24,
                format!("band count {bands}, expected {N_BANDS} (or 50 from 400 nm)"),
            ))
        }
    };
    let wl_end = HEADER_LEN + 4 * bands;
    if bytes.len() < wl_end {
        return Err(fmt(
            bytes.len(),
            "file truncated inside wavelength table".into(),
        ));
    }
    for b in 0..bands {
        let off = HEADER_LEN + 4 * b;
        let nm = f32_at(&bytes, off);
        let want = WavelengthGrid::START_NM as f32
            + WavelengthGrid::STEP_NM as f32 * (b as f32 - skip as f32);
        if nm != want {
            return Err(fmt(
                off,
                format!("band {b} wavelength {nm} nm, expected {want} nm"),
            ));
        }
    }
    let p = width * height;
    let expected = wl_end + 4 * bands * p;
    if bytes.len() != expected {
        return Err(fmt(
            bytes.len().min(expected),
            format!(
                "expected {expected} bytes for {width}×{height}×{bands}, found {}",
                bytes.len()
            ),
        ));
    }
    let mut data = Vec::with_capacity(N_BANDS * p);
    let start = wl_end + 4 * skip * p;
    for i in 0..N_BANDS * p {
        let off = start + 4 * i;
        let v = f32_at(&bytes, off);
        if !v.is_finite() || v < 0.0 {
            return Err(fmt(
                off,
                format!("reflectance {v} is not finite and non-negative"),
            ));
        }
        data.push(T::from_f32_exact(v));
    }
    HyperCube::new(width, height, data)
}
