//! Design files: 8-bit binary graymaps (material black, void white, top row first)
//! and raw little-endian `f64` in element order.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Result, TopOptError};

/// Encodes a field as PGM (P5). Values are clamped to [0, 1].
pub fn encode_pgm(nx: usize, ny: usize, chi: &[f64]) -> Vec<u8> {
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    out.reserve(nx * ny);
    for row in (0..ny).rev() {
        for i in 0..nx {
            let c = chi[row * nx + i].clamp(0.0, 1.0);
            out.push((255.0 * (1.0 - c)).round() as u8);
        }
    }
    out
}

pub fn write_pgm(path: &Path, nx: usize, ny: usize, chi: &[f64]) -> Result<()> {
    fs::write(path, encode_pgm(nx, ny, chi))?;
    Ok(())
}

fn parse_err(message: impl Into<String>) -> TopOptError {
    TopOptError::Parse { line: 0, column: 0, message: message.into() }
}

/// Decodes a P5 graymap into `(nx, ny, values)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err("truncated graymap header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(parse_err("not a binary graymap (P5)"));
    }
    let num = |s: String| s.parse::<usize>().map_err(|_| parse_err(format!("bad header field {s:?}")));
    let nx = num(token()?)?;
    let ny = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 255 {
        return Err(parse_err("only 8-bit graymaps are supported"));
    }
    let data = &bytes[pos + 1..];
    if data.len() < nx * ny {
        return Err(parse_err("graymap pixel data is truncated"));
    }
    let mut chi = vec![0.0; nx * ny];
    for (r, row) in data[..nx * ny].chunks(nx).enumerate() {
        let j = ny - 1 - r;
        for (i, &g) in row.iter().enumerate() {
            chi[j * nx + i] = 1.0 - g as f64 / maxval as f64;
        }
    }
    Ok((nx, ny, chi))
}

pub fn encode_raw(chi: &[f64]) -> Vec<u8> {
    chi.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn write_raw(path: &Path, chi: &[f64]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_raw(chi))?;
    Ok(())
}

pub fn decode_raw(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(parse_err("raw design length is not a multiple of 8 bytes"));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Reads a design file of either format and checks it against the grid size.
pub fn read_design(path: &Path, nx: usize, ny: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    let chi = if bytes.starts_with(b"P5") {
        let (w, h, chi) = decode_pgm(&bytes)?;
        if (w, h) != (nx, ny) {
            return Err(TopOptError::Validation(format!(
                "design image is {w}x{h}, grid is {nx}x{ny}"
            )));
        }
        chi
    } else {
        let chi = decode_raw(&bytes)?;
        if chi.len() != nx * ny {
            return Err(TopOptError::Validation(format!(
                "raw design has {} values, grid has {}",
                chi.len(),
                nx * ny
            )));
        }
        chi
    };
    if chi.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(TopOptError::Validation("design values must lie in [0, 1]".into()));
    }
    Ok(chi)
}
