//! Elevation data as a continuous objective.
//!
//! Grid node `(row, col)` sits at easting `col * cell_size` and northing
//! `row * cell_size` relative to the grid origin; row 0 is the southern edge.
//! Between nodes heights are bilinearly interpolated, which never produces a
//! value outside the range of the four surrounding nodes.

mod asc;
mod cache;
mod patch;
mod sea;
mod synth;

pub use asc::{load_asc_tile, parse_asc};
pub use cache::{read_cache, write_cache};
pub use patch::{apply_patch, grid_square_origin, parse_patch, PatchEdit};
pub use sea::{apply_sea_slope, build_sea_mask, SeaMask, DEFAULT_BLOCK_SIZE, SEA_STEP};
pub use synth::synth_terrain;

use crate::error::{Error, Result};
use crate::optimizers::Bounds;

/// ESRI nodata convention.
pub const DEFAULT_NODATA: f32 = -9999.0;

/// Neighbour offsets `(d_row, d_col)` in canonical order: bottom,
/// bottom-right, right, top-right, top, top-left, left, bottom-left.
pub const NEIGHBOURS: [(isize, isize); 8] = [
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
];

/// A rectangular raster of heights in metres.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationGrid {
    ncols: usize,
    nrows: usize,
    cell_size: f64,
    origin_easting: f64,
    origin_northing: f64,
    nodata: f32,
    heights: Vec<f32>,
}

impl ElevationGrid {
    /// Builds a grid from row-major heights, row 0 being the southern edge.
    pub fn new(nrows: usize, ncols: usize, cell_size: f64, heights: Vec<f32>) -> Result<Self> {
        Self::with_origin(nrows, ncols, cell_size, 0.0, 0.0, DEFAULT_NODATA, heights)
    }

    pub fn with_origin(
        nrows: usize,
        ncols: usize,
        cell_size: f64,
        origin_easting: f64,
        origin_northing: f64,
        nodata: f32,
        heights: Vec<f32>,
    ) -> Result<Self> {
        if nrows < 2 || ncols < 2 {
            return Err(Error::Grid(format!(
                "grid must have at least 2 rows and 2 columns, got {nrows}x{ncols}"
            )));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::Grid(format!("cell size must be positive, got {cell_size}")));
        }
        if heights.len() != nrows * ncols {
            return Err(Error::Grid(format!(
                "expected {} heights for a {nrows}x{ncols} grid, got {}",
                nrows * ncols,
                heights.len()
            )));
        }
        Ok(Self {
            ncols,
            nrows,
            cell_size,
            origin_easting,
            origin_northing,
            nodata,
            heights,
        })
    }

    /// Builds a grid from rows listed south to north.
    pub fn from_rows(rows: &[Vec<f32>], cell_size: f64) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Grid("ragged rows".into()));
        }
        Self::new(rows.len(), ncols, cell_size, rows.concat())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.origin_easting, self.origin_northing)
    }

    pub fn nodata(&self) -> f32 {
        self.nodata
    }

    pub fn heights(&self) -> &[f32] {
        &self.heights
    }

    pub(crate) fn heights_mut(&mut self) -> &mut [f32] {
        &mut self.heights
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.ncols + col
    }

    pub fn position(&self, index: usize) -> (usize, usize) {
        (index / self.ncols, index % self.ncols)
    }

    pub fn height(&self, row: usize, col: usize) -> f32 {
        self.heights[self.index(row, col)]
    }

    pub fn is_nodata(&self, value: f32) -> bool {
        value == self.nodata || value.is_nan()
    }

    pub fn has_nodata(&self) -> bool {
        self.heights.iter().any(|&h| self.is_nodata(h))
    }

    /// Index of the neighbour of `index` in canonical direction `dir`, if inside the grid.
    pub fn neighbour(&self, index: usize, dir: usize) -> Option<usize> {
        let (row, col) = self.position(index);
        let (dr, dc) = NEIGHBOURS[dir];
        let r = row.checked_add_signed(dr)?;
        let c = col.checked_add_signed(dc)?;
        (r < self.nrows && c < self.ncols).then(|| r * self.ncols + c)
    }

    /// Easting/northing of a node relative to the grid origin.
    pub fn node_coordinates(&self, index: usize) -> (f64, f64) {
        let (row, col) = self.position(index);
        (col as f64 * self.cell_size, row as f64 * self.cell_size)
    }

    /// Absolute easting/northing of a node.
    pub fn node_easting_northing(&self, index: usize) -> (f64, f64) {
        let (x, y) = self.node_coordinates(index);
        (self.origin_easting + x, self.origin_northing + y)
    }

    /// Smallest and largest height that is not nodata.
    pub fn height_range(&self) -> Option<(f32, f32)> {
        self.heights
            .iter()
            .copied()
            .filter(|&h| !self.is_nodata(h))
            .fold(None, |acc, h| match acc {
                None => Some((h, h)),
                Some((lo, hi)) => Some((lo.min(h), hi.max(h))),
            })
    }

    /// Domain on which [`interpolate`](Self::interpolate) is defined.
    pub fn domain(&self) -> DomainRect {
        DomainRect::from_grid(self)
    }

    /// Bilinear interpolation at `(x, y)` metres from the origin.
    pub fn interpolate(&self, x: f64, y: f64) -> Result<f64> {
        let domain = self.domain();
        if !(x >= 0.0 && x <= domain.width && y >= 0.0 && y <= domain.height) {
            return Err(Error::OutOfDomain {
                x,
                y,
                width: domain.width,
                height: domain.height,
            });
        }
        Ok(self.interpolate_unchecked(x, y))
    }

    fn interpolate_unchecked(&self, x: f64, y: f64) -> f64 {
        let u = x / self.cell_size;
        let v = y / self.cell_size;
        let c0 = (u.floor() as usize).min(self.ncols - 2);
        let r0 = (v.floor() as usize).min(self.nrows - 2);
        let tx = u - c0 as f64;
        let ty = v - r0 as f64;
        let h00 = self.height(r0, c0) as f64;
        let h01 = self.height(r0, c0 + 1) as f64;
        let h10 = self.height(r0 + 1, c0) as f64;
        let h11 = self.height(r0 + 1, c0 + 1) as f64;
        (1.0 - tx) * (1.0 - ty) * h00 + tx * (1.0 - ty) * h01 + (1.0 - tx) * ty * h10 + tx * ty * h11
    }
}

/// Rectangular search domain with its lower-left corner at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainRect {
    pub width: f64,
    pub height: f64,
}

impl Default for DomainRect {
    fn default() -> Self {
        Self {
            width: 7.0e5,
            height: 1.3e6,
        }
    }
}

impl DomainRect {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::Grid(format!(
                "domain must have positive size, got {width} x {height}"
            )));
        }
        Ok(Self { width, height })
    }

    /// The span between the first and last grid nodes.
    pub fn from_grid(grid: &ElevationGrid) -> Self {
        Self {
            width: (grid.ncols - 1) as f64 * grid.cell_size,
            height: (grid.nrows - 1) as f64 * grid.cell_size,
        }
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::new(vec![0.0, 0.0], vec![self.width, self.height])
    }
}

/// A continuous objective to be maximised over a box.
pub trait Landscape: Sync {
    fn bounds(&self) -> Bounds;

    /// Height at `x`, which the caller has already clipped to [`bounds`](Self::bounds).
    fn height(&self, x: &[f64]) -> f64;
}

impl Landscape for ElevationGrid {
    fn bounds(&self) -> Bounds {
        self.domain().bounds()
    }

    fn height(&self, x: &[f64]) -> f64 {
        let d = self.domain();
        self.interpolate_unchecked(x[0].clamp(0.0, d.width), x[1].clamp(0.0, d.height))
    }
}

/// `sqrt(max(0, h(i, j)) * max(0, h(k, l)))` evaluated on one grid.
pub fn product_objective_4d(grid: &ElevationGrid, i: f64, j: f64, k: f64, l: f64) -> Result<f64> {
    let a = grid.interpolate(i, j)?.max(0.0);
    let b = grid.interpolate(k, l)?.max(0.0);
    Ok((a * b).sqrt())
}

/// Four-dimensional landscape built from two copies of a grid.
#[derive(Debug, Clone)]
pub struct ProductLandscape<'a> {
    pub grid: &'a ElevationGrid,
}

impl Landscape for ProductLandscape<'_> {
    fn bounds(&self) -> Bounds {
        let d = self.grid.domain();
        Bounds::new(vec![0.0; 4], vec![d.width, d.height, d.width, d.height])
    }

    fn height(&self, x: &[f64]) -> f64 {
        let a = Landscape::height(self.grid, &x[0..2]).max(0.0);
        let b = Landscape::height(self.grid, &x[2..4]).max(0.0);
        (a * b).sqrt()
    }
}

/// Places tiles on a single grid covering `extent`, one node per cell.
///
/// Nodes not covered by any tile are nodata. Where tiles overlap, the tile
/// appearing later in `tiles` wins.
pub fn assemble_grid(tiles: &[ElevationGrid], extent: DomainRect) -> Result<ElevationGrid> {
    let first = tiles
        .first()
        .ok_or_else(|| Error::Grid("no tiles to assemble".into()))?;
    let cs = first.cell_size;
    let on_lattice = |v: f64| -> Option<usize> {
        let k = (v / cs).round();
        ((v / cs - k).abs() < 1e-6 && k >= 0.0).then_some(k as usize)
    };
    let ncols = on_lattice(extent.width)
        .ok_or_else(|| Error::Grid(format!("extent width {} is not a multiple of cell size {cs}", extent.width)))?;
    let nrows = on_lattice(extent.height)
        .ok_or_else(|| Error::Grid(format!("extent height {} is not a multiple of cell size {cs}", extent.height)))?;
    let mut heights = vec![DEFAULT_NODATA; nrows * ncols];
    for (t, tile) in tiles.iter().enumerate() {
        if tile.cell_size != cs {
            return Err(Error::Grid(format!(
                "tile {t} has cell size {}, expected {cs}",
                tile.cell_size
            )));
        }
        let (col0, row0) = match (on_lattice(tile.origin_easting), on_lattice(tile.origin_northing)) {
            (Some(c), Some(r)) => (c, r),
            _ => {
                return Err(Error::Grid(format!(
                    "tile {t} origin ({}, {}) is not on the cell lattice of the extent",
                    tile.origin_easting, tile.origin_northing
                )))
            }
        };
        if col0 + tile.ncols > ncols || row0 + tile.nrows > nrows {
            return Err(Error::Grid(format!(
                "tile {t} at ({}, {}) lies outside the {} x {} extent",
                tile.origin_easting, tile.origin_northing, extent.width, extent.height
            )));
        }
        for r in 0..tile.nrows {
            for c in 0..tile.ncols {
                let v = tile.height(r, c);
                heights[(row0 + r) * ncols + col0 + c] =
                    if tile.is_nodata(v) { DEFAULT_NODATA } else { v };
            }
        }
    }
    ElevationGrid::with_origin(nrows, ncols, cs, 0.0, 0.0, DEFAULT_NODATA, heights)
}
