use std::io::{Read, Write};
use std::path::Path;

use super::{LedBank, SpectralCurve, WavelengthGrid, N_BANDS};
use crate::error::{Error, Result};
use crate::imaging::CameraSensitivity;
use crate::Scalar;

fn csv_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Reads a `wavelength_nm,<col>...` table and returns one column per header
/// field after the first, validated against the grid.
fn read_columns(
    path: &Path,
    reader: impl Read,
    value_headers: Option<&[&str]>,
) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| csv_err(path, e.to_string()))?
        .clone();
    if headers.get(0) != Some("wavelength_nm") {
        return Err(csv_err(path, "first column must be `wavelength_nm`"));
    }
    if headers.len() < 2 {
        return Err(csv_err(path, "no value columns"));
    }
    if let Some(want) = value_headers {
        if !headers.iter().skip(1).eq(want.iter().copied()) {
            return Err(csv_err(
                path,
                format!("expected header `wavelength_nm,{}`", want.join(",")),
            ));
        }
    }
    let ncols = headers.len() - 1;
    let mut cols = vec![Vec::with_capacity(N_BANDS); ncols];
    let mut rows = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e.to_string()))?;
        if i >= N_BANDS {
            return Err(csv_err(path, format!("more than {N_BANDS} data rows")));
        }
        let nm: f64 = rec[0]
            .parse()
            .map_err(|_| csv_err(path, format!("row {}: bad wavelength `{}`", i + 1, &rec[0])))?;
        let want = WavelengthGrid::wavelength_nm(i) as f64;
        if nm != want {
            return Err(csv_err(
                path,
                format!("row {}: wavelength {nm}, expected {want}", i + 1),
            ));
        }
        for (c, col) in cols.iter_mut().enumerate() {
            let v: f64 = rec[c + 1].parse().map_err(|_| {
                csv_err(path, format!("row {}: bad value `{}`", i + 1, &rec[c + 1]))
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(csv_err(
                    path,
                    format!("row {}: value {v} not finite and ≥ 0", i + 1),
                ));
            }
            col.push(v);
        }
        rows += 1;
    }
    if rows != N_BANDS {
        return Err(csv_err(
            path,
            format!("expected {N_BANDS} data rows, found {rows}"),
        ));
    }
    Ok(cols)
}

/// Reads a spectrum CSV: header `wavelength_nm,value`, 48 rows at 420..=890 nm.
pub fn read_spectrum_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<SpectralCurve<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let cols = read_columns(path, file, Some(&["value"]))?;
    let vals: Vec<T> = cols[0].iter().map(|&v| T::lit(v)).collect();
    SpectralCurve::from_slice(&vals)
}

pub fn write_spectrum_csv<T: Scalar>(
    path: impl AsRef<Path>,
    curve: &SpectralCurve<T>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("wavelength_nm,value\n");
    for (nm, v) in WavelengthGrid::wavelengths().zip(curve.iter()) {
        out.push_str(&format!("{nm},{}\n", v.to_f64_lossy()));
    }
    write_file(path, out.as_bytes())
}

/// Reads an LED bank CSV: header `wavelength_nm,base_0,…,base_{K-1}`.
pub fn read_bank_csv<T: Scalar>(
    path: impl AsRef<Path>,
    scotopic: &SpectralCurve<T>,
) -> Result<LedBank<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let cols = read_columns(path, file, None)?;
    let bases = cols
        .iter()
        .map(|c| SpectralCurve::from_slice(&c.iter().map(|&v| T::lit(v)).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    LedBank::new(bases, scotopic)
}

pub fn write_bank_csv<T: Scalar>(path: impl AsRef<Path>, bank: &LedBank<T>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("wavelength_nm");
    for k in 0..bank.len() {
        out.push_str(&format!(",base_{k}"));
    }
    out.push('\n');
    for (n, nm) in WavelengthGrid::wavelengths().enumerate() {
        out.push_str(&nm.to_string());
        for b in bank.bases() {
            out.push_str(&format!(",{}", b[n].to_f64_lossy()));
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Reads a camera CSV: header `wavelength_nm,r,g,b`.
pub fn read_camera_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<CameraSensitivity<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let cols = read_columns(path, file, Some(&["r", "g", "b"]))?;
    let curve =
        |c: &Vec<f64>| SpectralCurve::from_slice(&c.iter().map(|&v| T::lit(v)).collect::<Vec<_>>());
    Ok(CameraSensitivity::new(
        curve(&cols[0])?,
        curve(&cols[1])?,
        curve(&cols[2])?,
    ))
}

pub fn write_camera_csv<T: Scalar>(
    path: impl AsRef<Path>,
    camera: &CameraSensitivity<T>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("wavelength_nm,r,g,b\n");
    for (n, nm) in WavelengthGrid::wavelengths().enumerate() {
        out.push_str(&nm.to_string());
        for c in 0..3 {
            out.push_str(&format!(",{}", camera.channel(c)[n].to_f64_lossy()));
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
