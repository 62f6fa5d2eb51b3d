//! The discrete landscape of a grid: neighbour of steepest ascent (NSA) for
//! every node, local optima as the sinks of the NSA graph, and basins of
//! attraction as the sets of nodes whose NSA walk ends at each sink.
//!
//! Everything here works on grid indices; metres only appear on export.

mod bands;

pub use bands::{band_statistics, BandStatistics, HeightBand, ScoreSchedule};

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::terrain::{ElevationGrid, NEIGHBOURS};

const NONE: u8 = u8::MAX;

/// Height gradient from node `p` to node `q`, with distance in index units.
pub fn gradient(grid: &ElevationGrid, p: (usize, usize), q: (usize, usize)) -> Result<f64> {
    if p == q {
        return Err(Error::Precondition("gradient between a node and itself".into()));
    }
    Ok(gradient_unchecked(grid, grid.index(p.0, p.1), grid.index(q.0, q.1)))
}

fn gradient_unchecked(grid: &ElevationGrid, p: usize, q: usize) -> f64 {
    let h = grid.heights();
    let (pr, pc) = grid.position(p);
    let (qr, qc) = grid.position(q);
    let dr = pr as f64 - qr as f64;
    let dc = pc as f64 - qc as f64;
    (h[q] as f64 - h[p] as f64) / (dr * dr + dc * dc).sqrt()
}

/// NSA of every node as a canonical direction (0-7), or none for sinks.
#[derive(Debug, Clone, PartialEq)]
pub struct NsaGraph {
    nrows: usize,
    ncols: usize,
    dirs: Vec<u8>,
    heights: Vec<f32>,
}

impl NsaGraph {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn height(&self, index: usize) -> f32 {
        self.heights[index]
    }

    /// Canonical direction of the NSA of `index`.
    pub fn direction(&self, index: usize) -> Option<usize> {
        let d = self.dirs[index];
        (d != NONE).then_some(d as usize)
    }

    /// Index of the NSA of `index`.
    pub fn successor(&self, index: usize) -> Option<usize> {
        let d = self.direction(index)?;
        let (dr, dc) = NEIGHBOURS[d];
        let r = (index / self.ncols) as isize + dr;
        let c = (index % self.ncols) as isize + dc;
        Some(r as usize * self.ncols + c as usize)
    }

    pub fn is_optimum(&self, index: usize) -> bool {
        self.dirs[index] == NONE
    }
}

/// Assigns the NSA of every node in three passes.
///
/// 1. Nodes with a strictly higher neighbour point at the neighbour of
///    largest gradient, ties to the first in canonical order.
/// 2. Repeatedly, an unassigned node looks at equal-height neighbours that
///    already have an NSA, follows each one's NSA chain to the first strictly
///    higher node, and points at the neighbour whose higher node has the
///    largest gradient from the unassigned node. Each round only sees the
///    assignments of earlier rounds.
/// 3. The rest are flat blocks: a breadth-first search from the first
///    unassigned node in row-major order points every reached equal-height
///    node at the node it was reached from. The roots remain sinks.
pub fn assign_nsa(grid: &ElevationGrid) -> NsaGraph {
    let n = grid.len();
    let h = grid.heights();
    let mut dirs = vec![NONE; n];
    // First strictly higher node on the NSA chain of each assigned node.
    let mut exit = vec![usize::MAX; n];

    let mut frontier = Vec::new();
    for p in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for d in 0..8 {
            if let Some(q) = grid.neighbour(p, d) {
                if h[q] > h[p] {
                    let g = gradient_unchecked(grid, p, q);
                    if best.is_none_or(|(_, bg)| g > bg) {
                        best = Some((d, g));
                    }
                }
            }
        }
        if let Some((d, _)) = best {
            dirs[p] = d as u8;
            exit[p] = grid.neighbour(p, d).expect("direction from neighbour scan");
            frontier.push(p);
        }
    }

    let mut candidate_seen = vec![false; n];
    loop {
        let mut candidates = Vec::new();
        for &q in &frontier {
            for d in 0..8 {
                if let Some(p) = grid.neighbour(q, d) {
                    if dirs[p] == NONE && h[p] == h[q] && !candidate_seen[p] {
                        candidate_seen[p] = true;
                        candidates.push(p);
                    }
                }
            }
        }
        candidates.sort_unstable();
        let mut updates = Vec::new();
        for &p in &candidates {
            candidate_seen[p] = false;
            let mut best: Option<(usize, usize, f64)> = None;
            for d in 0..8 {
                let Some(q) = grid.neighbour(p, d) else { continue };
                if dirs[q] == NONE || h[q] != h[p] {
                    continue;
                }
                let target = exit[q];
                let g = gradient_unchecked(grid, p, target);
                if best.is_none_or(|(_, _, bg)| g > bg) {
                    best = Some((d, target, g));
                }
            }
            if let Some((d, target, _)) = best {
                updates.push((p, d, target));
            }
        }
        if updates.is_empty() {
            break;
        }
        frontier.clear();
        for (p, d, target) in updates {
            dirs[p] = d as u8;
            exit[p] = target;
            frontier.push(p);
        }
    }

    let mut queue = VecDeque::new();
    let mut reached = vec![false; n];
    for root in 0..n {
        if dirs[root] != NONE || reached[root] {
            continue;
        }
        reached[root] = true;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            for d in 0..8 {
                let Some(v) = grid.neighbour(u, d) else { continue };
                if !reached[v] && dirs[v] == NONE && h[v] == h[u] {
                    reached[v] = true;
                    // Direction from v back to u is the opposite of d.
                    dirs[v] = ((d + 4) % 8) as u8;
                    queue.push_back(v);
                }
            }
        }
    }

    NsaGraph {
        nrows: grid.nrows(),
        ncols: grid.ncols(),
        dirs,
        heights: h.to_vec(),
    }
}

/// A sink of the NSA graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptimum {
    pub index: usize,
    pub row: usize,
    pub col: usize,
    pub height: f32,
}

/// Sinks ordered by descending height, then row-major position.
pub fn find_local_optima(nsa: &NsaGraph) -> Vec<LocalOptimum> {
    let mut optima: Vec<LocalOptimum> = (0..nsa.len())
        .filter(|&i| nsa.is_optimum(i))
        .map(|i| LocalOptimum {
            index: i,
            row: i / nsa.ncols,
            col: i % nsa.ncols,
            height: nsa.heights[i],
        })
        .collect();
    optima.sort_by(|a, b| b.height.total_cmp(&a.height).then(a.index.cmp(&b.index)));
    optima
}

/// Basin of every node, as an index into `optima`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasinLabeling {
    pub nrows: usize,
    pub ncols: usize,
    pub basin_id: Vec<u32>,
    pub optima: Vec<LocalOptimum>,
    /// Node count of each basin, parallel to `optima`.
    pub areas: Vec<usize>,
}

impl BasinLabeling {
    pub fn optimum_of(&self, index: usize) -> &LocalOptimum {
        &self.optima[self.basin_id[index] as usize]
    }

    /// CSV with one row per optimum: easting, northing, height, basin area.
    pub fn to_csv(&self, grid: &ElevationGrid) -> String {
        let mut out = String::from("point_easting,point_northing,height,basin_area\n");
        for (o, area) in self.optima.iter().zip(&self.areas) {
            let (e, n) = grid.node_easting_northing(o.index);
            writeln!(out, "{e},{n},{},{area}", o.height).expect("writing to a String");
        }
        out
    }
}

/// Labels every node with the basin its NSA walk ends in. Each walk stops at
/// the first already-labelled node and labels the whole recorded path.
pub fn label_basins(nsa: &NsaGraph) -> BasinLabeling {
    const UNSET: u32 = u32::MAX;
    let optima = find_local_optima(nsa);
    let mut basin_id = vec![UNSET; nsa.len()];
    for (k, o) in optima.iter().enumerate() {
        basin_id[o.index] = k as u32;
    }
    let mut path = Vec::new();
    for start in 0..nsa.len() {
        let mut p = start;
        while basin_id[p] == UNSET {
            path.push(p);
            p = nsa.successor(p).expect("unlabelled nodes have an NSA");
        }
        let label = basin_id[p];
        for q in path.drain(..) {
            basin_id[q] = label;
        }
    }
    let mut areas = vec![0usize; optima.len()];
    for &b in &basin_id {
        areas[b as usize] += 1;
    }
    BasinLabeling {
        nrows: nsa.nrows,
        ncols: nsa.ncols,
        basin_id,
        optima,
        areas,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: &[&[f32]]) -> ElevationGrid {
        let rows: Vec<Vec<f32>> = rows.iter().map(|r| r.to_vec()).collect();
        ElevationGrid::from_rows(&rows, 50.0).unwrap()
    }

    #[test]
    fn gradient_examples() {
        let g = grid(&[&[0.0, 0.0, 0.0], &[0.0, 5.0, 0.0], &[0.0, 0.0, 0.0]]);
        assert_eq!(gradient(&g, (0, 0), (0, 1)).unwrap(), 0.0);
        assert_eq!(gradient(&g, (1, 0), (1, 1)).unwrap(), 5.0);
        let diag = gradient(&g, (0, 0), (1, 1)).unwrap();
        assert!((diag - 5.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!((diag - 3.5355).abs() < 1e-4);
        assert!(gradient(&g, (1, 1), (1, 1)).is_err());
    }

    #[test]
    fn single_peak_points_at_centre() {
        let g = grid(&[&[1.0, 1.0, 1.0], &[1.0, 9.0, 1.0], &[1.0, 1.0, 1.0]]);
        let nsa = assign_nsa(&g);
        let centre = g.index(1, 1);
        for i in 0..9 {
            if i == centre {
                assert!(nsa.is_optimum(i));
            } else {
                assert_eq!(nsa.successor(i), Some(centre));
            }
        }
        let optima = find_local_optima(&nsa);
        assert_eq!(optima.len(), 1);
        assert_eq!(optima[0].index, centre);
        let labels = label_basins(&nsa);
        assert_eq!(labels.areas, vec![9]);
    }

    #[test]
    fn flat_grid_has_one_optimum_at_bfs_root() {
        let g = grid(&[&[3.0; 3], &[3.0; 3], &[3.0; 3]]);
        let nsa = assign_nsa(&g);
        let optima = find_local_optima(&nsa);
        assert_eq!(optima.len(), 1);
        assert_eq!(optima[0].index, 0);
        // Root's neighbours point straight back at it.
        for q in [1, 3, 4] {
            assert_eq!(nsa.successor(q), Some(0));
        }
        assert_eq!(label_basins(&nsa).areas, vec![9]);
    }

    #[test]
    fn monotone_ramp_climbs_to_top() {
        let g = grid(&[&[0.0, 1.0, 2.0, 3.0, 4.0], &[0.0, 1.0, 2.0, 3.0, 4.0]]);
        let nsa = assign_nsa(&g);
        for r in 0..2 {
            for c in 0..4 {
                let q = nsa.successor(g.index(r, c)).unwrap();
                assert_eq!(g.position(q).1, c + 1);
            }
        }
        // Two equal tops form one block, so one optimum; the lower-row one is the root.
        let optima = find_local_optima(&nsa);
        assert_eq!(optima.len(), 1);
        assert_eq!(optima[0].index, g.index(0, 4));
    }

    #[test]
    fn ties_follow_canonical_order() {
        // Bottom and right neighbours both 2 higher: bottom comes first.
        let g = grid(&[&[5.0, 0.0], &[3.0, 5.0]]);
        let nsa = assign_nsa(&g);
        // Node (1, 0) at height 3 sees (0, 0) bottom and (1, 1) right, both 5.
        assert_eq!(nsa.direction(g.index(1, 0)), Some(0));
    }

    #[test]
    fn two_equal_peaks_both_returned_row_major() {
        let g = grid(&[
            &[0.0, 0.0, 0.0],
            &[0.0, 7.0, 0.0],
            &[0.0, 0.0, 0.0],
            &[0.0, 7.0, 0.0],
            &[0.0, 0.0, 0.0],
        ]);
        let optima = find_local_optima(&assign_nsa(&g));
        assert_eq!(optima.len(), 2);
        assert_eq!(optima[0].index, g.index(1, 1));
        assert_eq!(optima[1].index, g.index(3, 1));
        let labels = label_basins(&assign_nsa(&g));
        assert_eq!(labels.areas.iter().sum::<usize>(), 15);
    }

    #[test]
    fn plateau_drains_towards_its_exit() {
        // A 1-row plateau at 5 with a single higher cell at the right end.
        let g = grid(&[&[5.0, 5.0, 5.0, 5.0, 8.0], &[0.0, 0.0, 0.0, 0.0, 0.0]]);
        let nsa = assign_nsa(&g);
        let optima = find_local_optima(&nsa);
        assert_eq!(optima.len(), 1);
        assert_eq!(optima[0].index, g.index(0, 4));
        for c in 0..4 {
            assert_eq!(nsa.successor(g.index(0, c)), Some(g.index(0, c + 1)));
        }
    }

    #[test]
    fn csv_lists_every_optimum() {
        let g = grid(&[&[1.0, 1.0, 1.0], &[1.0, 9.0, 1.0], &[1.0, 1.0, 1.0]]);
        let csv = label_basins(&assign_nsa(&g)).to_csv(&g);
        assert_eq!(csv, "point_easting,point_northing,height,basin_area\n50,50,9,9\n");
    }
}
