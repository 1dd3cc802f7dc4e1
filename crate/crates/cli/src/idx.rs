//! IDX files (the MNIST family container): big-endian header, unsigned bytes.

use std::fs;
use std::path::Path;

use robust_pll_core::DenseMatrix;

use crate::error::{CliError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn format_error(path: &Path, offset: usize, reason: impl Into<String>) -> CliError {
    CliError::Format {
        path: path.display().to_string(),
        unit: "byte",
        offset: offset as u64,
        reason: reason.into(),
    }
}

fn read_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_error(path, bytes.len(), "truncated header"))
}

/// Header dims and payload offset after checking the magic number.
fn parse_header(bytes: &[u8], magic: u32, path: &Path) -> Result<(Vec<usize>, usize)> {
    let found = read_u32(bytes, 0, path)?;
    if found != magic {
        return Err(format_error(
            path,
            0,
            format!("magic {found:#010x}, expected {magic:#010x}"),
        ));
    }
    let ndims = (magic & 0xff) as usize;
    let dims = (0..ndims)
        .map(|i| read_u32(bytes, 4 + 4 * i, path).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let start = 4 + 4 * ndims;
    let expected: usize = dims.iter().product();
    if bytes.len() < start + expected {
        return Err(format_error(
            path,
            bytes.len(),
            format!("truncated payload: {} of {expected} bytes", bytes.len() - start),
        ));
    }
    if bytes.len() > start + expected {
        return Err(format_error(path, start + expected, "trailing bytes after payload"));
    }
    Ok((dims, start))
}

/// Images as rows of `rows × cols` pixels scaled by 1/255.
pub fn parse_images(bytes: &[u8], path: &Path) -> Result<DenseMatrix> {
    let (dims, start) = parse_header(bytes, IMAGE_MAGIC, path)?;
    let d = dims[1] * dims[2];
    let data = bytes[start..].iter().map(|&b| b as f64 / 255.0).collect();
    Ok(DenseMatrix::from_vec(dims[0], d, data)?)
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    let (_, start) = parse_header(bytes, LABEL_MAGIC, path)?;
    Ok(bytes[start..].iter().map(|&b| b as usize).collect())
}

pub fn read_images(path: &Path) -> Result<DenseMatrix> {
    parse_images(&fs::read(path).map_err(CliError::io(path))?, path)
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    parse_labels(&fs::read(path).map_err(CliError::io(path))?, path)
}

/// Images and labels, checked to have equal counts.
pub fn read_idx(images: &Path, labels: &Path) -> Result<(DenseMatrix, Vec<usize>)> {
    let x = read_images(images)?;
    let y = read_labels(labels)?;
    if x.rows() != y.len() {
        return Err(CliError::Data(format!("{} images but {} labels", x.rows(), y.len())));
    }
    Ok((x, y))
}

pub fn encode_images(pixels: &[u8], count: usize, rows: usize, cols: usize) -> Vec<u8> {
    assert_eq!(pixels.len(), count * rows * cols, "pixel count must match dims");
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGE_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
