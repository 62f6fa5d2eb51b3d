//! Plot data: best-so-far convergence matrices with padding, column
//! summaries, height-band counts, distance-to-target matrices and
//! ERT-versus-target curves, written as CSV and SVG.

mod svg;
mod table;

pub use svg::{bands_svg, convergence_svg, ert_curve_svg, SVG_HEIGHT, SVG_WIDTH};
pub use table::Table;

use crate::error::{Error, Result};
use crate::harness::{returned_height, EvalTrace, RunConfig, RunResult};
use crate::measures::ert;
use crate::optima::ScoreSchedule;

/// Best-so-far values of `n` runs over `t_max` evaluations. Runs charged
/// fewer than `t_max` evaluations are padded with their last value.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceMatrix {
    pub t_max: usize,
    pub rows: Vec<Vec<f64>>,
    /// Charged evaluations of each run; columns from here on are padding.
    pub charged: Vec<usize>,
}

impl ConvergenceMatrix {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn is_padded(&self, run: usize, column: usize) -> bool {
        column >= self.charged[run]
    }

    pub fn padded(&self) -> Vec<bool> {
        self.charged.iter().map(|&t| t < self.t_max).collect()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[j])
    }

    /// `run,eval,value` with 1-based evaluation numbers.
    pub fn to_table(&self, value: &str) -> Table {
        let mut t = Table::new(&["run", "eval", value]);
        for (i, row) in self.rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                t.push(vec![i as f64, (j + 1) as f64, v]);
            }
        }
        t
    }
}

fn charged_heights(trace: &EvalTrace, config: &RunConfig) -> Result<(Vec<f64>, usize)> {
    let heights = trace.heights();
    let (_, t) = returned_height(&heights, config).map_err(|_| {
        Error::Precondition(format!("trace of run {} is empty", trace.run_index))
    })?;
    Ok((heights, t))
}

fn padded_running<F: Fn(f64, f64) -> f64>(values: &[f64], t_max: usize, pick: F) -> Vec<f64> {
    let mut row = Vec::with_capacity(t_max);
    let mut acc = values[0];
    for &v in values {
        acc = pick(acc, v);
        row.push(acc);
    }
    row.resize(t_max, acc);
    row
}

/// Row `i`, column `j` holds the largest height among the first `j + 1`
/// charged evaluations of run `i`.
pub fn convergence_matrix(traces: &[EvalTrace], config: &RunConfig) -> Result<ConvergenceMatrix> {
    let mut rows = Vec::with_capacity(traces.len());
    let mut charged = Vec::with_capacity(traces.len());
    for trace in traces {
        let (heights, t) = charged_heights(trace, config)?;
        rows.push(padded_running(&heights[..t], config.t_max, f64::max));
        charged.push(t);
    }
    Ok(ConvergenceMatrix {
        t_max: config.t_max,
        rows,
        charged,
    })
}

/// Closest distance to `target` among the first `j + 1` charged evaluations.
pub fn distance_matrix(traces: &[EvalTrace], config: &RunConfig, target: &[f64]) -> Result<ConvergenceMatrix> {
    let mut rows = Vec::with_capacity(traces.len());
    let mut charged = Vec::with_capacity(traces.len());
    for trace in traces {
        let (_, t) = charged_heights(trace, config)?;
        let d: Vec<f64> = trace.evals[..t]
            .iter()
            .map(|e| e.x.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .collect();
        rows.push(padded_running(&d, config.t_max, f64::min));
        charged.push(t);
    }
    Ok(ConvergenceMatrix {
        t_max: config.t_max,
        rows,
        charged,
    })
}

/// Mean and five-number summary of one column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnSummary {
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile of sorted data by linear interpolation between closest ranks:
/// position `(n - 1) p`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn aggregate_summary(matrix: &ConvergenceMatrix) -> Result<Vec<ColumnSummary>> {
    if matrix.n() == 0 {
        return Err(Error::Precondition("summary of an empty matrix".into()));
    }
    let mut col = Vec::with_capacity(matrix.n());
    Ok((0..matrix.t_max)
        .map(|j| {
            col.clear();
            col.extend(matrix.column(j));
            col.sort_by(f64::total_cmp);
            ColumnSummary {
                mean: col.iter().sum::<f64>() / col.len() as f64,
                min: col[0],
                q1: quantile(&col, 0.25),
                median: quantile(&col, 0.5),
                q3: quantile(&col, 0.75),
                max: col[col.len() - 1],
            }
        })
        .collect())
}

pub fn summary_table(summary: &[ColumnSummary]) -> Table {
    let mut t = Table::new(&["eval", "mean", "min", "q1", "median", "q3", "max"]);
    for (j, s) in summary.iter().enumerate() {
        t.push(vec![(j + 1) as f64, s.mean, s.min, s.q1, s.median, s.q3, s.max]);
    }
    t
}

/// Runs per band in each column, bands in schedule order.
#[derive(Debug, Clone, PartialEq)]
pub struct BandCounts {
    /// `counts[j][b]`: runs whose best-so-far value at column `j` lies in band `b`.
    pub counts: Vec<Vec<usize>>,
}

impl BandCounts {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["eval", "band", "count"]);
        for (j, col) in self.counts.iter().enumerate() {
            for (b, &c) in col.iter().enumerate() {
                t.push(vec![(j + 1) as f64, b as f64, c as f64]);
            }
        }
        t
    }
}

/// Values outside every band are counted in the nearest band, so each
/// column sums to the number of runs.
pub fn height_band_counts(matrix: &ConvergenceMatrix, schedule: &ScoreSchedule) -> BandCounts {
    let counts = (0..matrix.t_max)
        .map(|j| {
            let mut c = vec![0usize; schedule.len()];
            for v in matrix.column(j) {
                c[schedule.band_clamped(v)] += 1;
            }
            c
        })
        .collect();
    BandCounts { counts }
}

/// Padded entries at or above `f_target`: the success-band area, which
/// equals `N * HV` when every failure is charged `t_max`.
pub fn success_band_area(matrix: &ConvergenceMatrix, f_target: f64) -> usize {
    matrix
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| (matrix.charged[i]..matrix.t_max).filter(|&j| row[j] >= f_target).count())
        .sum()
}

/// All entries at or above `f_target`, including the column where each
/// successful run first reached it: `success_band_area + N_s`.
pub fn success_band_count(matrix: &ConvergenceMatrix, f_target: f64) -> usize {
    matrix.rows.iter().flatten().filter(|&&v| v >= f_target).count()
}

/// ERT at each target, with every run reclassified by its own prefix.
/// Targets should not exceed the target the traces were recorded with.
pub fn ert_curve(traces: &[EvalTrace], config: &RunConfig, targets: &[f64]) -> Result<Vec<(f64, f64)>> {
    targets
        .iter()
        .map(|&target| {
            let cfg = RunConfig {
                f_target: target,
                ..*config
            };
            let results: Vec<RunResult> = traces
                .iter()
                .map(|t| RunResult::from_trace(t, &cfg))
                .collect::<Result<_>>()?;
            Ok((target, ert(&results)))
        })
        .collect()
}

pub fn ert_curve_table(curve: &[(f64, f64)]) -> Table {
    let mut t = Table::new(&["target", "ert"]);
    for &(target, e) in curve {
        t.push(vec![target, e]);
    }
    t
}

/// Column stride used when plotting `t_max` columns.
pub fn plot_stride(t_max: usize) -> usize {
    (t_max / 2000).max(1)
}
