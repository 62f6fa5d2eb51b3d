//! ESRI ASCII grid reader.
//!
//! Header keys (case-insensitive): `ncols`, `nrows`, `xllcorner` or
//! `xllcenter`, `yllcorner` or `yllcenter`, `cellsize` and optionally
//! `nodata_value` (defaults to -9999). Data rows follow, northernmost first,
//! exactly `ncols` values per line.

use std::path::Path;

use super::{ElevationGrid, DEFAULT_NODATA};
use crate::error::{Error, Result};

pub fn load_asc_tile(path: impl AsRef<Path>) -> Result<ElevationGrid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_asc(&text, &path.display().to_string())
}

/// Parses the text of an `.asc` file; `source` names it in error messages.
pub fn parse_asc(text: &str, source: &str) -> Result<ElevationGrid> {
    let err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };

    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut cellsize = None;
    let mut nodata = None;

    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(i, line)) = lines.peek() {
        let mut parts = line.split_whitespace();
        let Some(key) = parts.next() else {
            lines.next();
            continue;
        };
        if key.parse::<f64>().is_ok() {
            break;
        }
        let value = parts
            .next()
            .ok_or_else(|| err(i + 1, format!("header key `{key}` has no value")))?;
        let number = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| err(i + 1, format!("header `{key}` value `{v}` is not a number")))
        };
        let count = |v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| err(i + 1, format!("header `{key}` value `{v}` is not a count")))
        };
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols = Some(count(value)?),
            "nrows" => nrows = Some(count(value)?),
            "xllcorner" | "xllcenter" => xll = Some(number(value)?),
            "yllcorner" | "yllcenter" => yll = Some(number(value)?),
            "cellsize" => cellsize = Some(number(value)?),
            "nodata_value" => nodata = Some(number(value)? as f32),
            other => return Err(err(i + 1, format!("unknown header key `{other}`"))),
        }
        lines.next();
    }

    let header_end = lines.peek().map_or(text.lines().count(), |&(i, _)| i) + 1;
    let missing = |k: &str| err(header_end, format!("header is missing `{k}`"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let xll = xll.ok_or_else(|| missing("xllcorner"))?;
    let yll = yll.ok_or_else(|| missing("yllcorner"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    let nodata = nodata.unwrap_or(DEFAULT_NODATA);

    let mut rows: Vec<Vec<f32>> = Vec::with_capacity(nrows);
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f32>()
                    .map_err(|_| err(i + 1, format!("cell value `{tok}` is not a number")))
            })
            .collect::<Result<Vec<f32>>>()?;
        if row.len() != ncols {
            return Err(err(i + 1, format!("expected {ncols} values, found {}", row.len())));
        }
        if rows.len() == nrows {
            return Err(err(i + 1, format!("more than {nrows} data rows")));
        }
        rows.push(row);
    }
    if rows.len() != nrows {
        return Err(err(
            text.lines().count(),
            format!("expected {nrows} data rows, found {}", rows.len()),
        ));
    }

    // File rows run north to south; the grid stores south first.
    rows.reverse();
    ElevationGrid::with_origin(nrows, ncols, cellsize, xll, yll, nodata, rows.concat()).map_err(
        |e| err(1, e.to_string()),
    )
}
