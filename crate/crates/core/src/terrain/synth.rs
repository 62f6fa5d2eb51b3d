use rand::Rng;

use super::ElevationGrid;
use crate::error::{Error, Result};
use crate::rng;

const LOW: f64 = -100.0;
const HIGH: f64 = 1400.0;
const CELL_SIZE: f64 = 50.0;

/// Deterministic multi-octave value-noise terrain with heights in
/// [-100, 1400] m on a 50 m lattice.
///
/// Octave `k` has lattice period `p0 / 2^k` cells and amplitude
/// `ruggedness^k`; with `ruggedness = 0` only the base octave remains.
pub fn synth_terrain(seed: u64, nrows: usize, ncols: usize, ruggedness: f64) -> Result<ElevationGrid> {
    if nrows < 2 || ncols < 2 {
        return Err(Error::Grid(format!(
            "synthetic terrain needs at least 2x2 points, got {nrows}x{ncols}"
        )));
    }
    if !(0.0..=1.0).contains(&ruggedness) {
        return Err(Error::config("ruggedness", format!("{ruggedness} is outside [0, 1]")));
    }
    let base_period = (nrows.max(ncols) as f64 / 4.0).max(2.0);
    let mut field = vec![0.0f64; nrows * ncols];
    let mut period = base_period;
    let mut amplitude = 1.0;
    let mut octave = 0u64;
    while period >= 1.0 && amplitude > 0.0 {
        let mut stream = rng::stream(rng::derive(seed, octave));
        let lr = (nrows as f64 / period).ceil() as usize + 2;
        let lc = (ncols as f64 / period).ceil() as usize + 2;
        let lattice: Vec<f64> = (0..lr * lc).map(|_| stream.random::<f64>()).collect();
        for r in 0..nrows {
            let v = r as f64 / period;
            let r0 = v.floor() as usize;
            let ty = smoothstep(v - r0 as f64);
            for c in 0..ncols {
                let u = c as f64 / period;
                let c0 = u.floor() as usize;
                let tx = smoothstep(u - c0 as f64);
                let a = lattice[r0 * lc + c0];
                let b = lattice[r0 * lc + c0 + 1];
                let d = lattice[(r0 + 1) * lc + c0];
                let e = lattice[(r0 + 1) * lc + c0 + 1];
                let value = (1.0 - ty) * ((1.0 - tx) * a + tx * b) + ty * ((1.0 - tx) * d + tx * e);
                field[r * ncols + c] += amplitude * value;
            }
        }
        octave += 1;
        period /= 2.0;
        amplitude *= ruggedness;
    }

    let (lo, hi) = field
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let heights = field
        .iter()
        .map(|&v| (LOW + (v - lo) / span * (HIGH - LOW)) as f32)
        .collect();
    ElevationGrid::new(nrows, ncols, CELL_SIZE, heights)
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}
