//! Binary grid cache.
//!
//! Little-endian layout: `ncols: u64`, `nrows: u64`, `cell_size: f64`,
//! `origin_easting: f64`, `origin_northing: f64`, followed by
//! `nrows * ncols` `f32` heights in row-major order, row 0 southernmost.

use std::path::Path;

use super::{ElevationGrid, DEFAULT_NODATA};
use crate::error::{Error, Result};
use crate::util::write_atomic;

const HEADER_LEN: usize = 40;

pub fn write_cache(grid: &ElevationGrid, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = Vec::with_capacity(HEADER_LEN + 4 * grid.len());
    bytes.extend_from_slice(&(grid.ncols() as u64).to_le_bytes());
    bytes.extend_from_slice(&(grid.nrows() as u64).to_le_bytes());
    bytes.extend_from_slice(&grid.cell_size().to_le_bytes());
    let (e, n) = grid.origin();
    bytes.extend_from_slice(&e.to_le_bytes());
    bytes.extend_from_slice(&n.to_le_bytes());
    for h in grid.heights() {
        bytes.extend_from_slice(&h.to_le_bytes());
    }
    write_atomic(path.as_ref(), &bytes)
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<ElevationGrid> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message,
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad("file shorter than cache header".into()));
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().unwrap() };
    let ncols = u64::from_le_bytes(word(0)) as usize;
    let nrows = u64::from_le_bytes(word(1)) as usize;
    let cell_size = f64::from_le_bytes(word(2));
    let origin_e = f64::from_le_bytes(word(3));
    let origin_n = f64::from_le_bytes(word(4));
    let expected = nrows
        .checked_mul(ncols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| bad("grid dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(bad(format!(
            "expected {expected} bytes for a {nrows}x{ncols} grid, found {}",
            bytes.len()
        )));
    }
    let heights = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ElevationGrid::with_origin(nrows, ncols, cell_size, origin_e, origin_n, DEFAULT_NODATA, heights)
        .map_err(|e| bad(e.to_string()))
}
