//! Property tests over random grids, traces and result sets.

mod common;

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};

use proptest::prelude::*;
use rand::Rng as _;
use terrabench::harness::{returned_height, Budget, EvalTrace, Harness, RunConfig, RunResult};
use terrabench::measures::{ert, ert_alternative, gert, hv, par};
use terrabench::optima::{assign_nsa, label_basins, ScoreSchedule};
use terrabench::optimizers::{
    AlgorithmId, Bounds, Evaluation, Evaluator, FnLandscape, Halt, HyperparameterSpace, Optimizer, Optimum,
};
use terrabench::reports::{convergence_matrix, ert_curve, height_band_counts, success_band_area};
use terrabench::rng::{stream, Rng};
use terrabench::terrain::{apply_sea_slope, build_sea_mask, synth_terrain, ElevationGrid, SEA_STEP};
use terrabench::tuner::{self, should_prune, SamplerKind, Trial, TrialStatus};

use common::oracle_basins;

fn grid_strategy(max_side: usize, levels: std::ops::Range<i32>) -> impl Strategy<Value = ElevationGrid> {
    (2..=max_side, 2..=max_side).prop_flat_map(move |(r, c)| {
        prop::collection::vec(levels.clone(), r * c).prop_map(move |h| {
            ElevationGrid::new(r, c, 50.0, h.into_iter().map(|v| v as f32).collect()).unwrap()
        })
    })
}

fn neighbours(grid: &ElevationGrid, p: usize) -> impl Iterator<Item = usize> + '_ {
    (0..8).filter_map(move |d| grid.neighbour(p, d))
}

/// Edge-connected components of points satisfying `pred`, 8-adjacency.
fn flood_from_edges(grid: &ElevationGrid, pred: impl Fn(usize) -> bool) -> Vec<bool> {
    let (nr, nc) = (grid.nrows(), grid.ncols());
    let mut seen = vec![false; grid.len()];
    let mut queue = VecDeque::new();
    for p in 0..grid.len() {
        let (r, c) = grid.position(p);
        if (r == 0 || c == 0 || r + 1 == nr || c + 1 == nc) && pred(p) {
            seen[p] = true;
            queue.push_back(p);
        }
    }
    while let Some(p) = queue.pop_front() {
        for q in neighbours(grid, p).collect::<Vec<_>>() {
            if !seen[q] && pred(q) {
                seen[q] = true;
                queue.push_back(q);
            }
        }
    }
    seen
}

// Terrain.

proptest! {
    #[test]
    fn interpolation_stays_within_cell_corners(
        grid in grid_strategy(8, -50..200),
        u in 0.0f64..1.0,
        v in 0.0f64..1.0,
    ) {
        let domain = grid.domain();
        let (x, y) = (u * domain.width, v * domain.height);
        let h = grid.interpolate(x, y).unwrap();
        let c0 = ((x / grid.cell_size()).floor() as usize).min(grid.ncols() - 2);
        let r0 = ((y / grid.cell_size()).floor() as usize).min(grid.nrows() - 2);
        let corners = [
            grid.height(r0, c0),
            grid.height(r0, c0 + 1),
            grid.height(r0 + 1, c0),
            grid.height(r0 + 1, c0 + 1),
        ];
        let lo = corners.iter().copied().fold(f32::INFINITY, f32::min) as f64;
        let hi = corners.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        prop_assert!(h >= lo - 1e-9 && h <= hi + 1e-9, "{h} outside [{lo}, {hi}]");
    }

    #[test]
    fn sea_mask_matches_flood_fill_and_is_idempotent(
        grid in grid_strategy(24, -3..4),
        block in 1usize..10,
    ) {
        let mut mask = build_sea_mask(&grid, block);
        let oracle = flood_from_edges(&grid, |p| grid.heights()[p] < 0.0);
        prop_assert_eq!(mask.labels(), &oracle[..]);
        prop_assert_eq!(mask.propagate(&grid, block), 0);
    }

    #[test]
    fn sea_slope_keeps_land_and_steps_below_a_neighbour(grid in grid_strategy(16, -3..5)) {
        let mask = build_sea_mask(&grid, 4);
        let out = apply_sea_slope(&grid, &mask);
        for p in 0..grid.len() {
            if !mask.is_sea(p) {
                prop_assert_eq!(out.heights()[p], grid.heights()[p]);
                continue;
            }
            if !neighbours(&grid, p).any(|q| !mask.is_sea(q)) {
                continue;
            }
            // A coastal sea point sits one step below its lowest land neighbour.
            let lowest_land = neighbours(&grid, p)
                .filter(|&q| !mask.is_sea(q))
                .map(|q| grid.heights()[q])
                .fold(f32::INFINITY, f32::min);
            prop_assert_eq!(out.heights()[p], (lowest_land as f64 - SEA_STEP) as f32);
        }
    }

    #[test]
    fn synthetic_terrain_is_deterministic(seed in any::<u64>(), r in 2usize..20, c in 2usize..20, rug in 0.0f64..1.0) {
        prop_assert_eq!(synth_terrain(seed, r, c, rug).unwrap(), synth_terrain(seed, r, c, rug).unwrap());
    }
}

#[test]
fn enclosed_lake_stays_land() {
    let rows: Vec<Vec<f32>> = (0..20)
        .map(|r| (0..20).map(|c| if (5..15).contains(&r) && (5..15).contains(&c) { -5.0 } else { 10.0 }).collect())
        .collect();
    let grid = ElevationGrid::from_rows(&rows, 50.0).unwrap();
    assert_eq!(build_sea_mask(&grid, 4).sea_count(), 0);
}

// Optima.

proptest! {
    #[test]
    fn basins_match_walk_oracle(grid in grid_strategy(10, 0..4)) {
        let labeling = label_basins(&assign_nsa(&grid));
        let oracle = oracle_basins(&grid);
        for p in 0..grid.len() {
            prop_assert_eq!(labeling.optimum_of(p).index, oracle[p], "point {}", p);
        }
        prop_assert_eq!(labeling.areas.iter().sum::<usize>(), grid.len());
    }

    #[test]
    fn optima_are_node_maxima_one_per_plateau(grid in grid_strategy(12, 0..4)) {
        let nsa = assign_nsa(&grid);
        let labeling = label_basins(&nsa);
        let h = grid.heights();
        let mut plateau_of = vec![usize::MAX; grid.len()];
        let mut plateaus = 0;
        for start in 0..grid.len() {
            if plateau_of[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            plateau_of[start] = plateaus;
            while let Some(p) = stack.pop() {
                for q in neighbours(&grid, p).collect::<Vec<_>>() {
                    if plateau_of[q] == usize::MAX && h[q] == h[p] {
                        plateau_of[q] = plateaus;
                        stack.push(q);
                    }
                }
            }
            plateaus += 1;
        }
        let mut per_plateau = vec![0; plateaus];
        for o in &labeling.optima {
            prop_assert!(neighbours(&grid, o.index).all(|q| h[q] <= h[o.index]));
            per_plateau[plateau_of[o.index]] += 1;
        }
        prop_assert!(per_plateau.iter().all(|&n| n <= 1));
        // Walks terminate within the number of points.
        for p in 0..grid.len() {
            let mut q = p;
            let mut steps = 0;
            while let Some(next) = nsa.successor(q) {
                q = next;
                steps += 1;
                prop_assert!(steps <= grid.len());
            }
        }
    }
}

// Measures.

fn results_strategy() -> impl Strategy<Value = (usize, Vec<RunResult>)> {
    (1usize..5000).prop_flat_map(|t_max| {
        prop::collection::vec((any::<bool>(), 1..=t_max, 1340.0f64..1346.0, 0.0f64..1339.0), 1..50).prop_map(
            move |runs| {
                let results = runs
                    .into_iter()
                    .enumerate()
                    .map(|(i, (ok, t, hi, lo))| {
                        if ok {
                            RunResult::new(i as u64, t, hi, 1340.0)
                        } else {
                            RunResult::new(i as u64, t_max, lo, 1340.0)
                        }
                    })
                    .collect();
                (t_max, results)
            },
        )
    })
}

proptest! {
    #[test]
    fn measure_identities((t_max, results) in results_strategy()) {
        let e = ert(&results);
        prop_assert_eq!(gert(&results, &ScoreSchedule::indicator(1340.0)), e);
        let a = ert_alternative(&results, t_max).unwrap();
        if e.is_finite() {
            prop_assert!((e - a).abs() <= 1e-12 * e);
        } else {
            prop_assert!(a.is_infinite());
        }
        let mean = results.iter().map(|r| r.t as f64).sum::<f64>() / results.len() as f64;
        prop_assert!((par(&results, 1.0, t_max).unwrap() - mean).abs() <= 1e-9 * mean);
    }
}

// Reports.

/// Traces as the harness records them under multistart: at least `t_max`
/// long, or ending on the first success.
fn trace_set(seed: u64, n: usize, config: &RunConfig) -> Vec<EvalTrace> {
    let mut rng = stream(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(config.t_max..=config.t_max + 10);
            let evals = (0..len)
                .map(|_| Evaluation {
                    x: vec![rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)],
                    h: rng.random_range(0.0..config.f_target + 3.0),
                })
                .collect();
            EvalTrace {
                run_index: i as u64,
                seed,
                evals,
            }
        })
        .collect()
}

proptest! {
    #[test]
    fn convergence_rows_bands_and_area(seed in any::<u64>(), n in 1usize..20, t_max in 1usize..150) {
        let config = RunConfig { t_max, f_target: 90.0, ..RunConfig::default() };
        let traces = trace_set(seed, n, &config);
        let matrix = convergence_matrix(&traces, &config).unwrap();
        for (trace, row) in traces.iter().zip(&matrix.rows) {
            prop_assert!(row.windows(2).all(|w| w[0] <= w[1]));
            let (best, t) = returned_height(&trace.heights(), &config).unwrap();
            prop_assert!(t <= t_max);
            prop_assert_eq!(row[t_max - 1], best);
            for j in t..t_max {
                prop_assert!(matrix.is_padded(trace.run_index as usize, j));
                prop_assert!(row[j] >= config.f_target);
            }
        }
        let schedule = ScoreSchedule::uniform(0.0, 93.0, 5).unwrap();
        for column in height_band_counts(&matrix, &schedule).counts {
            prop_assert_eq!(column.iter().sum::<usize>(), n);
        }
        let results: Vec<RunResult> = traces.iter().map(|t| RunResult::from_trace(t, &config).unwrap()).collect();
        let area = success_band_area(&matrix, config.f_target);
        prop_assert_eq!(area, results.iter().filter(|r| r.success).map(|r| t_max - r.t).sum::<usize>());
        prop_assert!((area as f64 - n as f64 * hv(&results, t_max).unwrap()).abs() < 1e-6 * (1.0 + area as f64));
    }

    #[test]
    fn ert_curve_is_monotone(seed in any::<u64>(), n in 1usize..20, t_max in 1usize..150) {
        let config = RunConfig { t_max, f_target: 90.0, ..RunConfig::default() };
        let traces = trace_set(seed, n, &config);
        let targets: Vec<f64> = (0..=30).map(|k| k as f64 * 3.0).collect();
        let curve = ert_curve(&traces, &config, &targets).unwrap();
        prop_assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1));
    }
}

// Harness.

/// Launches of random cost that never reach the target.
struct RandomCost {
    max_cost: usize,
    launches: AtomicUsize,
}

impl Optimizer for RandomCost {
    fn name(&self) -> &str {
        "random_cost"
    }

    fn launch(&self, eval: &mut Evaluator<'_>, start: &[f64], rng: &mut Rng) -> Result<Optimum, Halt> {
        self.launches.fetch_add(1, Ordering::Relaxed);
        let cost = rng.random_range(1..=self.max_cost);
        let mut best = f64::NEG_INFINITY;
        for _ in 0..cost {
            best = best.max(eval.evaluate(start)?);
        }
        Ok(Optimum { x: start.to_vec(), height: best })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evaluation_budget_and_failure_cost(
        seed in any::<u64>(),
        t_max in 1usize..300,
        max_cost in 1usize..100,
        total in 1usize..3000,
        jobs in 1usize..5,
        target in 0.5f64..1.5,
    ) {
        let landscape = FnLandscape {
            bounds: Bounds::new(vec![0.0], vec![1.0]),
            f: |x: &[f64]| x[0],
        };
        let config = RunConfig { t_max, f_target: target, ..RunConfig::default() };
        let harness = Harness::new(&landscape, config, seed);
        let opt = RandomCost { max_cost, launches: AtomicUsize::new(0) };
        let outcomes = harness.run_instance(&opt, Budget::Evaluations(total), jobs).unwrap();
        let spent: usize = outcomes.iter().map(|o| o.result.t).sum();
        prop_assert!(total <= spent && spent < total + t_max, "{spent} vs {total}");
        for (i, o) in outcomes.iter().enumerate() {
            prop_assert_eq!(o.result.run_index, i as u64);
            prop_assert!(o.result.t >= 1 && o.result.t <= t_max);
            prop_assert_eq!(o.trace.evals.len(), o.result.t);
            if !o.result.success {
                prop_assert_eq!(o.result.t, t_max);
            }
        }
    }
}

// Tuner.

proptest! {
    #[test]
    fn pruning_waits_for_min_runs(
        min_runs in 1usize..8,
        reports in 0usize..8,
        current in 0.0f64..1e6,
        peers in prop::collection::vec(0.0f64..1e6, 0..6),
    ) {
        let space = HyperparameterSpace::for_algorithm(AlgorithmId::CmaEs);
        let instance = tuner::sample(&space, &[], 1, SamplerKind::Random).unwrap();
        let trial_with = |number: usize, gert: f64, runs: usize, status| Trial {
            number,
            instance: instance.clone(),
            results: Vec::new(),
            reported_gerts: (1..=runs).map(|k| (k, gert)).collect(),
            status,
            final_gert: (status == TrialStatus::Complete).then_some(gert),
        };
        let history: Vec<Trial> = peers
            .iter()
            .enumerate()
            .map(|(k, &g)| trial_with(k + 1, g, 8, TrialStatus::Complete))
            .collect();
        let trial = trial_with(0, current, reports, TrialStatus::Running);
        if reports < min_runs {
            prop_assert!(!should_prune(&trial, &history, min_runs));
        }
    }

    #[test]
    fn random_sampler_is_deterministic(seed in any::<u64>()) {
        for algorithm in AlgorithmId::ALL.into_iter().filter(|&a| a != AlgorithmId::NelderMead) {
            let space = HyperparameterSpace::for_algorithm(algorithm);
            let a = tuner::sample(&space, &[], seed, SamplerKind::Random).unwrap();
            let b = tuner::sample(&space, &[], seed, SamplerKind::Random).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
