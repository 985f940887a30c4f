//! 8-bit binary PGM and a lossless raw `f64` format.
//!
//! Raw layout: 8-byte magic `IFBRAW01`, height and width as little-endian
//! `u32`, then `height·width` little-endian `f64` pixels in row-major order.

use std::fs;
use std::path::Path;

use ndarray::Array1;

use super::grid::ImageGrid;
use crate::error::{Error, Result};

const RAW_MAGIC: &[u8; 8] = b"IFBRAW01";

/// Writes pixels scaled from `[0, peak]` to `[0, 255]`, clamping outside values.
pub fn write_pgm(path: &Path, img: &ImageGrid, peak: f64) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|v| (v / peak * 255.0).round().clamp(0.0, 255.0) as u8));
    fs::write(path, out)?;
    Ok(())
}

/// Reads an 8-bit P5 file, mapping `[0, maxval]` to `[0, peak]`.
pub fn read_pgm(path: &Path, peak: f64) -> Result<ImageGrid> {
    let bytes = fs::read(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse(format!("{}: truncated PGM header", path.display())));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    if fields[0] != "P5" {
        return Err(Error::Parse(format!("{}: not a binary PGM (magic {})", path.display(), fields[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("{}: bad header field {s}", path.display())));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse(format!("{}: only 8-bit PGM is supported (maxval {maxval})", path.display())));
    }
    let raster = bytes.get(pos..pos + w * h).ok_or_else(|| Error::Parse(format!("{}: truncated raster", path.display())))?;
    let data = raster.iter().map(|&b| b as f64 / maxval as f64 * peak).collect::<Array1<f64>>();
    ImageGrid::new(h, w, data)
}

pub fn write_raw(path: &Path, img: &ImageGrid) -> Result<()> {
    let mut out = Vec::with_capacity(16 + 8 * img.len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(img.height() as u32).to_le_bytes());
    out.extend_from_slice(&(img.width() as u32).to_le_bytes());
    for v in img.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_raw(path: &Path) -> Result<ImageGrid> {
    let bytes = fs::read(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if bytes.len() < 16 || &bytes[..8] != RAW_MAGIC {
        return Err(Error::Parse(format!("{}: not a raw float image", path.display())));
    }
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != 8 * h * w {
        return Err(Error::Parse(format!("{}: expected {} pixels", path.display(), h * w)));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect::<Array1<f64>>();
    ImageGrid::new(h, w, data)
}
