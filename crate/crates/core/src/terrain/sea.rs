//! Sea mask and artificial seabed.
//!
//! A point is a sea candidate when its height is below zero or missing. The
//! mask grows from the map edge: block by block, a candidate becomes sea if
//! it touches the map edge or an existing sea point (8-neighbourhood). The
//! seabed is then filled inward from the coast, each ring 0.01 m below the
//! lowest already-settled neighbour.

use super::ElevationGrid;

/// Side length of the square blocks used during mask propagation.
pub const DEFAULT_BLOCK_SIZE: usize = 80;

/// Height drop between successive seabed rings, in metres.
pub const SEA_STEP: f64 = 0.01;

/// Per-point sea/land labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeaMask {
    nrows: usize,
    ncols: usize,
    sea: Vec<bool>,
}

impl SeaMask {
    /// A mask with every point labelled land.
    pub fn all_land(grid: &ElevationGrid) -> Self {
        Self {
            nrows: grid.nrows(),
            ncols: grid.ncols(),
            sea: vec![false; grid.len()],
        }
    }

    pub fn is_sea(&self, index: usize) -> bool {
        self.sea[index]
    }

    pub fn sea_count(&self) -> usize {
        self.sea.iter().filter(|&&s| s).count()
    }

    pub fn labels(&self) -> &[bool] {
        &self.sea
    }

    /// Runs block passes until a whole pass changes nothing; returns how many
    /// points were relabelled.
    pub fn propagate(&mut self, grid: &ElevationGrid, block_size: usize) -> usize {
        assert_eq!((self.nrows, self.ncols), (grid.nrows(), grid.ncols()));
        let block_size = block_size.max(1);
        let order = spiral_blocks(
            self.nrows.div_ceil(block_size),
            self.ncols.div_ceil(block_size),
        );
        let mut total = 0;
        loop {
            let mut pass = 0;
            for &(block_from_top, block_col) in &order {
                // Block rows are counted from the north; grid row 0 is south.
                let top = self.nrows - block_from_top * block_size;
                let rows = top.saturating_sub(block_size)..top;
                let cols = block_col * block_size..((block_col + 1) * block_size).min(self.ncols);
                pass += self.settle_block(grid, rows, cols);
            }
            total += pass;
            if pass == 0 {
                return total;
            }
        }
    }

    fn settle_block(
        &mut self,
        grid: &ElevationGrid,
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
    ) -> usize {
        let mut changed = 0;
        loop {
            let mut sweep = 0;
            for row in rows.clone().rev() {
                for col in cols.clone() {
                    let idx = row * self.ncols + col;
                    if self.sea[idx] || !is_candidate(grid, idx) {
                        continue;
                    }
                    let on_edge =
                        row == 0 || col == 0 || row + 1 == self.nrows || col + 1 == self.ncols;
                    if on_edge || (0..8).any(|d| grid.neighbour(idx, d).is_some_and(|n| self.sea[n])) {
                        self.sea[idx] = true;
                        sweep += 1;
                    }
                }
            }
            changed += sweep;
            if sweep == 0 {
                return changed;
            }
        }
    }
}

fn is_candidate(grid: &ElevationGrid, idx: usize) -> bool {
    let h = grid.heights()[idx];
    grid.is_nodata(h) || h < 0.0
}

/// Block visiting order: top row west to east, then down the east side,
/// back along the bottom, up the west side, and so on inward.
fn spiral_blocks(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(rows * cols);
    if rows == 0 || cols == 0 {
        return out;
    }
    let (mut top, mut bottom, mut left, mut right) = (0isize, rows as isize - 1, 0isize, cols as isize - 1);
    while top <= bottom && left <= right {
        for c in left..=right {
            out.push((top as usize, c as usize));
        }
        for r in top + 1..=bottom {
            out.push((r as usize, right as usize));
        }
        if top < bottom {
            for c in (left..right).rev() {
                out.push((bottom as usize, c as usize));
            }
        }
        if left < right {
            for r in (top + 1..bottom).rev() {
                out.push((r as usize, left as usize));
            }
        }
        top += 1;
        bottom -= 1;
        left += 1;
        right -= 1;
    }
    out
}

/// Labels sea points by block-wise propagation from the map edge.
pub fn build_sea_mask(grid: &ElevationGrid, block_size: usize) -> SeaMask {
    let mut mask = SeaMask::all_land(grid);
    mask.propagate(grid, block_size);
    mask
}

/// Fills sea points (and any nodata left on land) with a seabed sloping
/// down from the coast. Land heights are never modified.
///
/// Points that cannot be reached from land keep their original value.
pub fn apply_sea_slope(grid: &ElevationGrid, mask: &SeaMask) -> ElevationGrid {
    let mut out = grid.clone();
    let n = grid.len();
    let mut untreated: Vec<bool> = (0..n)
        .map(|i| mask.is_sea(i) || grid.is_nodata(grid.heights()[i]))
        .collect();

    let mut frontier: Vec<usize> = (0..n)
        .filter(|&i| untreated[i] && (0..8).any(|d| grid.neighbour(i, d).is_some_and(|q| !untreated[q])))
        .collect();
    let mut queued = vec![false; n];

    while !frontier.is_empty() {
        let new_heights: Vec<f32> = frontier
            .iter()
            .map(|&p| {
                let lowest = (0..8)
                    .filter_map(|d| grid.neighbour(p, d))
                    .filter(|&q| !untreated[q])
                    .map(|q| out.heights()[q])
                    .fold(f32::INFINITY, f32::min);
                (lowest as f64 - SEA_STEP) as f32
            })
            .collect();
        for (&p, &h) in frontier.iter().zip(&new_heights) {
            out.heights_mut()[p] = h;
            untreated[p] = false;
        }
        let mut next = Vec::new();
        for &p in &frontier {
            for d in 0..8 {
                if let Some(q) = grid.neighbour(p, d) {
                    if untreated[q] && !queued[q] {
                        queued[q] = true;
                        next.push(q);
                    }
                }
            }
        }
        next.sort_unstable();
        frontier = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    /// Sea = candidates 8-connected to an edge candidate, found by BFS.
    fn flood_fill_oracle(grid: &ElevationGrid) -> Vec<bool> {
        let n = grid.len();
        let mut sea = vec![false; n];
        let mut queue = VecDeque::new();
        for i in 0..n {
            let (r, c) = grid.position(i);
            let edge = r == 0 || c == 0 || r + 1 == grid.nrows() || c + 1 == grid.ncols();
            if edge && is_candidate(grid, i) {
                sea[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(p) = queue.pop_front() {
            for d in 0..8 {
                if let Some(q) = grid.neighbour(p, d) {
                    if !sea[q] && is_candidate(grid, q) {
                        sea[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        sea
    }

    fn grid(rows: &[Vec<f32>]) -> ElevationGrid {
        ElevationGrid::from_rows(rows, 50.0).unwrap()
    }

    #[test]
    fn spiral_covers_every_block_once() {
        for (r, c) in [(1, 1), (1, 4), (4, 1), (3, 3), (4, 5), (6, 2)] {
            let mut order = spiral_blocks(r, c);
            assert_eq!(order.len(), r * c);
            assert_eq!(order[0], (0, 0));
            order.sort();
            order.dedup();
            assert_eq!(order.len(), r * c);
        }
        assert_eq!(
            spiral_blocks(3, 3),
            vec![(0, 0), (0, 1), (0, 2), (1, 2), (2, 2), (2, 1), (2, 0), (1, 0), (1, 1)]
        );
    }

    #[test]
    fn all_land_has_no_sea() {
        let g = grid(&vec![vec![5.0; 6]; 6]);
        assert_eq!(build_sea_mask(&g, 80).sea_count(), 0);
    }

    #[test]
    fn negative_border_row_is_sea() {
        let mut rows = vec![vec![5.0; 6]; 6];
        rows[0] = vec![-5.0; 6];
        let g = grid(&rows);
        let mask = build_sea_mask(&g, 2);
        assert_eq!(mask.sea_count(), 6);
        assert!((0..6).all(|c| mask.is_sea(c)));
    }

    #[test]
    fn enclosed_lake_stays_land() {
        let mut rows = vec![vec![10.0f32; 20]; 20];
        for row in rows.iter_mut().take(14).skip(6) {
            for v in row.iter_mut().take(15).skip(5) {
                *v = -5.0;
            }
        }
        let g = grid(&rows);
        let mask = build_sea_mask(&g, 80);
        assert_eq!(mask.labels(), flood_fill_oracle(&g).as_slice());
        assert_eq!(mask.sea_count(), 0);
    }

    #[test]
    fn matches_flood_fill_on_random_grids() {
        use rand::Rng;
        let mut rng = crate::rng::stream(11);
        for case in 0..40 {
            let nrows = rng.random_range(2..30);
            let ncols = rng.random_range(2..30);
            let heights = (0..nrows * ncols)
                .map(|_| match rng.random_range(0..10) {
                    0 => -9999.0,
                    1..=4 => -1.0,
                    _ => 3.0,
                })
                .collect();
            let g = ElevationGrid::new(nrows, ncols, 50.0, heights).unwrap();
            let block = 1 + case % 7;
            let mut mask = build_sea_mask(&g, block);
            assert_eq!(mask.labels(), flood_fill_oracle(&g).as_slice(), "case {case}");
            assert_eq!(mask.propagate(&g, block), 0, "mask is a fixed point");
        }
    }

    #[test]
    fn slope_single_neighbour() {
        // Sea on the east edge next to a 0.5 m land column.
        let g = grid(&[vec![0.5, -1.0], vec![0.5, -1.0]]);
        let mask = build_sea_mask(&g, 80);
        let out = apply_sea_slope(&g, &mask);
        assert_eq!(out.height(0, 1), (0.5f32 as f64 - 0.01) as f32);
        assert_eq!(out.height(0, 0), 0.5);
    }

    #[test]
    fn slope_strip_deepens() {
        let g = grid(&[vec![2.0, -1.0, -1.0, -9999.0], vec![2.0, -1.0, -9999.0, -1.0]]);
        let mask = build_sea_mask(&g, 80);
        let out = apply_sea_slope(&g, &mask);
        for row in 0..2 {
            for (col, want) in [(1, 1.99f32), (2, 1.98), (3, 1.97)] {
                assert!((out.height(row, col) - want).abs() < 1e-5, "{row},{col}");
            }
        }
        assert!(!out.has_nodata());
    }

    #[test]
    fn slope_without_sea_is_identity() {
        let g = grid(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let mask = build_sea_mask(&g, 80);
        assert_eq!(apply_sea_slope(&g, &mask), g);
    }

    #[test]
    fn slope_rule_holds_on_random_coasts() {
        use rand::Rng;
        let mut rng = crate::rng::stream(5);
        for _ in 0..20 {
            let nrows = rng.random_range(3..25);
            let ncols = rng.random_range(3..25);
            let heights: Vec<f32> = (0..nrows * ncols)
                .map(|_| if rng.random_bool(0.5) { -2.0 } else { rng.random_range(0.0..50.0f32) })
                .collect();
            let g = ElevationGrid::new(nrows, ncols, 50.0, heights).unwrap();
            let mask = build_sea_mask(&g, 4);
            let out = apply_sea_slope(&g, &mask);
            for i in 0..g.len() {
                if !mask.is_sea(i) {
                    assert_eq!(out.heights()[i], g.heights()[i]);
                }
            }
            // Each sea point sits exactly one step below some neighbour that
            // was settled earlier, and no lower than the step below any
            // neighbour settled earlier.
            let ring = treatment_rings(&g, &mask);
            for i in 0..g.len() {
                let Some(k) = ring[i] else { continue };
                let lowest = (0..8)
                    .filter_map(|d| g.neighbour(i, d))
                    .filter(|&q| ring[q].is_none_or(|kq| kq < k) && (ring[q].is_some() || !mask.is_sea(q)))
                    .map(|q| out.heights()[q])
                    .fold(f32::INFINITY, f32::min);
                assert_eq!(out.heights()[i], (lowest as f64 - SEA_STEP) as f32);
            }
        }
    }

    /// Ring number of each sea point (1 = coast), None for land/unreached.
    fn treatment_rings(g: &ElevationGrid, mask: &SeaMask) -> Vec<Option<usize>> {
        let n = g.len();
        let mut ring: Vec<Option<usize>> = vec![None; n];
        let mut frontier: Vec<usize> = (0..n)
            .filter(|&i| mask.is_sea(i) && (0..8).any(|d| g.neighbour(i, d).is_some_and(|q| !mask.is_sea(q))))
            .collect();
        let mut k = 1;
        while !frontier.is_empty() {
            for &p in &frontier {
                ring[p] = Some(k);
            }
            let mut next: Vec<usize> = frontier
                .iter()
                .flat_map(|&p| (0..8).filter_map(move |d| g.neighbour(p, d)))
                .filter(|&q| mask.is_sea(q) && ring[q].is_none())
                .collect();
            next.sort_unstable();
            next.dedup();
            frontier = next;
            k += 1;
        }
        ring
    }
}
