//! Oracles shared by the integration tests. They follow the definitions
//! directly and avoid the library's shortcuts (memoised chain exits, path
//! compression).

#![allow(dead_code)]

use terrabench::terrain::{ElevationGrid, NEIGHBOURS};

fn neighbour(grid: &ElevationGrid, p: usize, d: usize) -> Option<usize> {
    let (r, c) = (p / grid.ncols(), p % grid.ncols());
    let (dr, dc) = NEIGHBOURS[d];
    let (r, c) = (r as isize + dr, c as isize + dc);
    if r < 0 || c < 0 || r >= grid.nrows() as isize || c >= grid.ncols() as isize {
        return None;
    }
    Some(r as usize * grid.ncols() + c as usize)
}

fn slope(grid: &ElevationGrid, p: usize, q: usize) -> f64 {
    let h = grid.heights();
    let n = grid.ncols();
    let dr = (p / n) as f64 - (q / n) as f64;
    let dc = (p % n) as f64 - (q % n) as f64;
    (h[q] as f64 - h[p] as f64) / (dr * dr + dc * dc).sqrt()
}

/// Successor of every node, or `None` for optima.
pub fn oracle_nsa(grid: &ElevationGrid) -> Vec<Option<usize>> {
    let n = grid.len();
    let h = grid.heights();
    let mut next: Vec<Option<usize>> = vec![None; n];
    for p in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for d in 0..8 {
            if let Some(q) = neighbour(grid, p, d) {
                if h[q] > h[p] {
                    let g = slope(grid, p, q);
                    if best.is_none_or(|(_, bg)| g > bg) {
                        best = Some((q, g));
                    }
                }
            }
        }
        next[p] = best.map(|(q, _)| q);
    }
    // Plateau rounds: only assignments from earlier rounds are visible.
    loop {
        let snapshot = next.clone();
        let exit_of = |mut q: usize| -> usize {
            while h[q] == h[snapshot[q].unwrap()] {
                q = snapshot[q].unwrap();
            }
            snapshot[q].unwrap()
        };
        let mut changed = false;
        for p in 0..n {
            if snapshot[p].is_some() {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for d in 0..8 {
                if let Some(q) = neighbour(grid, p, d) {
                    if h[q] == h[p] && snapshot[q].is_some() {
                        let g = slope(grid, p, exit_of(q));
                        if best.is_none_or(|(_, bg)| g > bg) {
                            best = Some((q, g));
                        }
                    }
                }
            }
            if let Some((q, _)) = best {
                next[p] = Some(q);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // Flat blocks, searched breadth first from the first node in row-major order.
    let mut seen = vec![false; n];
    for root in 0..n {
        if next[root].is_some() || seen[root] {
            continue;
        }
        seen[root] = true;
        let mut layer = vec![root];
        while !layer.is_empty() {
            let mut following = Vec::new();
            for &u in &layer {
                for d in 0..8 {
                    if let Some(v) = neighbour(grid, u, d) {
                        if !seen[v] && next[v].is_none() && h[v] == h[u] {
                            seen[v] = true;
                            next[v] = Some(u);
                            following.push(v);
                        }
                    }
                }
            }
            layer = following;
        }
    }
    next
}

/// Optimum reached by walking from every node.
pub fn oracle_basins(grid: &ElevationGrid) -> Vec<usize> {
    let next = oracle_nsa(grid);
    (0..grid.len())
        .map(|mut p| {
            let mut steps = 0;
            while let Some(q) = next[p] {
                p = q;
                steps += 1;
                assert!(steps <= grid.len(), "NSA walk does not terminate");
            }
            p
        })
        .collect()
}

/// Prints and returns a criterion verdict.
pub fn verdict(criterion: u32, pass: bool, detail: &str) -> bool {
    println!("criterion {criterion}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    pass
}
