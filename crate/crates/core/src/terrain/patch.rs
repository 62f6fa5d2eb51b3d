//! Manual point edits keyed by 10 km national grid squares.
//!
//! Plain-text format, one edit per line, `#` starts a comment:
//!
//! ```text
//! raise TF50 1250 3400 0.01    # square, easting/northing offset in metres, new height
//! lower NT68 -0.1              # every 0 m point in the square is set to -0.1 m
//! ```

use super::ElevationGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum PatchEdit {
    /// Set the node nearest to an absolute easting/northing to `height`.
    Raise { easting: f64, northing: f64, height: f32 },
    /// Set every node with height exactly 0 inside a square to `height`.
    Lower { easting: f64, northing: f64, size: f64, height: f32 },
}

/// Lower-left corner (easting, northing) in metres of a square such as
/// `NT68` or `TF 50`, plus the square's side length.
pub fn grid_square_origin(square: &str) -> Option<(f64, f64, f64)> {
    let s: String = square.chars().filter(|c| !c.is_whitespace()).collect();
    let mut chars = s.chars();
    let l1 = letter_index(chars.next()?)?;
    let l2 = letter_index(chars.next()?)?;
    let digits: String = chars.collect();
    if !digits.len().is_multiple_of(2) || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let e100 = ((l1 as i64 - 2).rem_euclid(5)) * 5 + (l2 as i64 % 5);
    let n100 = (19 - (l1 as i64 / 5) * 5) - (l2 as i64 / 5);
    if !(0..7).contains(&e100) || !(0..13).contains(&n100) {
        return None;
    }
    let half = digits.len() / 2;
    let size = 100_000.0 / 10f64.powi(half as i32);
    let (de, dn) = if half == 0 {
        (0.0, 0.0)
    } else {
        (
            digits[..half].parse::<f64>().ok()? * size,
            digits[half..].parse::<f64>().ok()? * size,
        )
    };
    Some((e100 as f64 * 100_000.0 + de, n100 as f64 * 100_000.0 + dn, size))
}

/// Position of a grid letter in the 25-letter alphabet without `I`.
fn letter_index(c: char) -> Option<u32> {
    let c = c.to_ascii_uppercase();
    if !c.is_ascii_uppercase() || c == 'I' {
        return None;
    }
    let i = c as u32 - 'A' as u32;
    Some(if i > 7 { i - 1 } else { i })
}

pub fn parse_patch(text: &str, source: &str) -> Result<Vec<PatchEdit>> {
    let mut edits = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: source.to_string(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let square = |s: &str| grid_square_origin(s).ok_or_else(|| err(format!("bad grid square `{s}`")));
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("`{s}` is not a number")));
        match fields.as_slice() {
            ["raise", sq, de, dn, h] => {
                let (e0, n0, size) = square(sq)?;
                let (de, dn) = (num(de)?, num(dn)?);
                if !(0.0..size).contains(&de) || !(0.0..size).contains(&dn) {
                    return Err(err(format!("offset ({de}, {dn}) lies outside square {sq}")));
                }
                edits.push(PatchEdit::Raise {
                    easting: e0 + de,
                    northing: n0 + dn,
                    height: num(h)? as f32,
                });
            }
            ["lower", sq, h] => {
                let (e0, n0, size) = square(sq)?;
                let height = num(h)? as f32;
                if height >= 0.0 {
                    return Err(err(format!("lowered height {height} must be below 0")));
                }
                edits.push(PatchEdit::Lower {
                    easting: e0,
                    northing: n0,
                    size,
                    height,
                });
            }
            _ => return Err(err(format!("unrecognised edit `{line}`"))),
        }
    }
    Ok(edits)
}

/// Applies edits in order; returns the number of modified nodes.
pub fn apply_patch(grid: &mut ElevationGrid, edits: &[PatchEdit]) -> usize {
    let cs = grid.cell_size();
    let (oe, on) = grid.origin();
    let mut changed = 0;
    for edit in edits {
        match *edit {
            PatchEdit::Raise { easting, northing, height } => {
                let col = ((easting - oe) / cs).round();
                let row = ((northing - on) / cs).round();
                if col >= 0.0 && row >= 0.0 && (col as usize) < grid.ncols() && (row as usize) < grid.nrows() {
                    let idx = grid.index(row as usize, col as usize);
                    grid.heights_mut()[idx] = height;
                    changed += 1;
                }
            }
            PatchEdit::Lower { easting, northing, size, height } => {
                let c0 = ((easting - oe) / cs).ceil().max(0.0) as usize;
                let r0 = ((northing - on) / cs).ceil().max(0.0) as usize;
                let c1 = (((easting + size - oe) / cs).ceil().max(0.0) as usize).min(grid.ncols());
                let r1 = (((northing + size - on) / cs).ceil().max(0.0) as usize).min(grid.nrows());
                for r in r0..r1 {
                    for c in c0..c1 {
                        let idx = grid.index(r, c);
                        if grid.heights()[idx] == 0.0 {
                            grid.heights_mut()[idx] = height;
                            changed += 1;
                        }
                    }
                }
            }
        }
    }
    changed
}
