//! Benchmark runs: seeded initial guesses, recorded evaluations, the global
//! termination criteria and the multistart wrapper.
//!
//! Seeding: the initial guess of run `i` comes from `rng::stream(i)` alone,
//! so run `i` of every instance starts from the same point. Launch `k` of
//! run `i` uses `rng::stream(derive(derive(base_seed, i), k))`; launch 0
//! starts at the initial guess, later launches draw a uniform start from
//! their own stream first.

use std::fmt::Write as _;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{Bounds, Evaluation, Evaluator, LocalTolerances, Optimizer};
use crate::rng::{derive, stream};
use crate::terrain::{DomainRect, Landscape};

/// Global and local termination settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub f_target: f64,
    pub t_max: usize,
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            f_target: 1340.0,
            t_max: 50_000,
            f_tol: 0.2,
            x_tol: 10.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_max < 1 {
            return Err(Error::config("t_max", "must be at least 1"));
        }
        if !self.f_target.is_finite() {
            return Err(Error::config("f_target", "must be finite"));
        }
        self.tolerances().map(|_| ())
    }

    pub fn tolerances(&self) -> Result<LocalTolerances> {
        LocalTolerances::new(self.f_tol, self.x_tol)
    }
}

/// Every evaluation of one run, in call order.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTrace {
    pub run_index: u64,
    pub seed: u64,
    pub evals: Vec<Evaluation>,
}

impl EvalTrace {
    pub fn heights(&self) -> Vec<f64> {
        self.evals.iter().map(|e| e.h).collect()
    }

    /// `eval_index,x,y,h` for two dimensions, `eval_index,x0,..,h` otherwise.
    /// Indices start at 1.
    pub fn to_csv(&self) -> String {
        let dim = self.evals.first().map_or(2, |e| e.x.len());
        let mut out = String::from("eval_index,");
        if dim == 2 {
            out.push_str("x,y");
        } else {
            let cols: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
            out.push_str(&cols.join(","));
        }
        out.push_str(",h\n");
        for (i, e) in self.evals.iter().enumerate() {
            write!(out, "{}", i + 1).expect("writing to a String");
            for v in &e.x {
                write!(out, ",{v}").expect("writing to a String");
            }
            writeln!(out, ",{}", e.h).expect("writing to a String");
        }
        out
    }

    pub fn from_csv(text: &str, run_index: u64, seed: u64) -> Result<Self> {
        let mut evals = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    path: format!("trace {run_index}"),
                    line: n + 1,
                    message: e.to_string(),
                })?;
            if fields.len() < 3 {
                return Err(Error::Parse {
                    path: format!("trace {run_index}"),
                    line: n + 1,
                    message: "expected eval_index, coordinates and h".into(),
                });
            }
            evals.push(Evaluation {
                x: fields[1..fields.len() - 1].to_vec(),
                h: fields[fields.len() - 1],
            });
        }
        Ok(Self { run_index, seed, evals })
    }
}

/// Outcome of one run after truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_index: u64,
    /// Evaluations charged.
    pub t: usize,
    pub returned_height: f64,
    pub success: bool,
}

impl RunResult {
    pub fn new(run_index: u64, t: usize, returned_height: f64, f_target: f64) -> Self {
        Self {
            run_index,
            t,
            returned_height,
            success: returned_height >= f_target,
        }
    }

    pub fn from_trace(trace: &EvalTrace, config: &RunConfig) -> Result<Self> {
        let (h, t) = returned_height(&trace.heights(), config)?;
        Ok(Self::new(trace.run_index, t, h, config.f_target))
    }
}

/// Initial guess of run `run_index`: `(u * width, v * height)` with `u`, `v`
/// the first two uniform draws of `stream(run_index)`.
pub fn initial_guess(run_index: u64, domain: &DomainRect) -> [f64; 2] {
    let mut rng = stream(run_index);
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    [u * domain.width, v * domain.height]
}

/// Same construction for any box: one uniform draw per axis.
pub fn initial_point(run_index: u64, bounds: &Bounds) -> Vec<f64> {
    let mut rng = stream(run_index);
    (0..bounds.dim())
        .map(|i| bounds.lower[i] + rng.random::<f64>() * bounds.range(i))
        .collect()
}

/// Maximum height over the charged prefix, and the prefix length.
///
/// The prefix ends at `t_max` evaluations or at the first height reaching
/// the target, whichever comes first.
pub fn returned_height(heights: &[f64], config: &RunConfig) -> Result<(f64, usize)> {
    if heights.is_empty() {
        return Err(Error::Precondition("returned height of an empty trace".into()));
    }
    let limit = heights.len().min(config.t_max);
    let t = heights[..limit]
        .iter()
        .position(|&h| h >= config.f_target)
        .map_or(limit, |i| i + 1);
    let best = heights[..t].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((best, t))
}

/// How many runs an instance gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Exactly this many runs.
    Runs(usize),
    /// Runs until the charged evaluations reach this total.
    Evaluations(usize),
}

/// Result and trace of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub result: RunResult,
    pub trace: EvalTrace,
}

/// Runs optimisers on one landscape under one configuration.
pub struct Harness<'a> {
    pub landscape: &'a dyn Landscape,
    pub config: RunConfig,
    pub base_seed: u64,
    /// Relaunch early-terminating optimisers until a global criterion fires.
    pub multistart: bool,
}

impl<'a> Harness<'a> {
    pub fn new(landscape: &'a dyn Landscape, config: RunConfig, base_seed: u64) -> Self {
        Self {
            landscape,
            config,
            base_seed,
            multistart: true,
        }
    }

    pub fn run_seed(&self, run_index: u64) -> u64 {
        derive(self.base_seed, run_index)
    }

    /// One run. With multistart the trace holds exactly the charged
    /// evaluations; without it the optimiser's own stop ends the run.
    pub fn run(&self, optimizer: &dyn Optimizer, run_index: u64) -> Result<RunOutcome> {
        let seed = self.run_seed(run_index);
        let bounds = self.landscape.bounds();
        let mut eval = Evaluator::new(self.landscape, self.config.t_max, Some(self.config.f_target));
        for launch in 0u64.. {
            let mut rng = stream(derive(seed, launch));
            let start = if launch == 0 {
                initial_point(run_index, &bounds)
            } else {
                bounds.sample(&mut rng)
            };
            let before = eval.evaluations();
            let halted = optimizer.launch(&mut eval, &start, &mut rng).is_err() || eval.is_halted();
            if halted || !self.multistart {
                break;
            }
            if eval.evaluations() == before {
                return Err(Error::StalledOptimizer(optimizer.name().to_string()));
            }
        }
        let trace = EvalTrace {
            run_index,
            seed,
            evals: eval.into_trace(),
        };
        if trace.evals.is_empty() {
            return Err(Error::StalledOptimizer(optimizer.name().to_string()));
        }
        let result = RunResult::from_trace(&trace, &self.config)?;
        Ok(RunOutcome { result, trace })
    }

    /// Runs with indices 0, 1, 2, ... until the budget is used. Up to `jobs`
    /// runs execute at once; the outcome does not depend on `jobs`.
    ///
    /// Under an evaluation budget the total charged evaluations `S` satisfy
    /// `budget <= S < budget + t_max`.
    pub fn run_instance(&self, optimizer: &dyn Optimizer, budget: Budget, jobs: usize) -> Result<Vec<RunOutcome>> {
        let jobs = jobs.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
        let batch = |lo: u64, hi: u64| -> Result<Vec<RunOutcome>> {
            pool.install(|| (lo..hi).into_par_iter().map(|i| self.run(optimizer, i)).collect())
        };
        match budget {
            Budget::Runs(n) => batch(0, n as u64),
            Budget::Evaluations(total) => {
                if total == 0 {
                    return Err(Error::config("budget", "evaluation budget must be positive"));
                }
                let mut out = Vec::new();
                let mut spent = 0usize;
                let mut next = 0u64;
                while spent < total {
                    for o in batch(next, next + jobs as u64)? {
                        if spent >= total {
                            break;
                        }
                        spent += o.result.t;
                        out.push(o);
                    }
                    next += jobs as u64;
                }
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(t_max: usize) -> RunConfig {
        RunConfig {
            t_max,
            ..RunConfig::default()
        }
    }

    #[test]
    fn returned_height_examples() {
        let c = RunConfig::default();
        assert_eq!(returned_height(&[100.0, 1341.0, 900.0], &c).unwrap(), (1341.0, 2));
        assert_eq!(returned_height(&[1350.0], &c).unwrap(), (1350.0, 1));
        let mut long = vec![500.0; 60];
        long[10] = 1200.0;
        long[55] = 1300.0;
        assert_eq!(returned_height(&long, &cfg(50)).unwrap(), (1200.0, 50));
        assert!(returned_height(&[], &c).is_err());
    }

    #[test]
    fn initial_guess_is_deterministic_and_distinct() {
        let d = DomainRect::default();
        assert_eq!(initial_guess(5, &d), initial_guess(5, &d));
        assert_ne!(initial_guess(0, &d), initial_guess(1, &d));
        let p = initial_point(5, &d.bounds());
        assert_eq!(p, initial_guess(5, &d).to_vec());
    }

    #[test]
    fn initial_guesses_are_uniform_on_average() {
        let d = DomainRect::default();
        let n = 100_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for i in 0..n {
            let [x, y] = initial_guess(i, &d);
            assert!((0.0..d.width).contains(&x) && (0.0..d.height).contains(&y));
            sx += x;
            sy += y;
        }
        assert!((sx / n as f64 / (d.width / 2.0) - 1.0).abs() < 0.01);
        assert!((sy / n as f64 / (d.height / 2.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(cfg(0).validate().is_err());
        let bad = RunConfig {
            f_tol: 0.0,
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn trace_csv_round_trip() {
        let t = EvalTrace {
            run_index: 3,
            seed: 9,
            evals: vec![
                Evaluation { x: vec![1.5, 2.0], h: 10.25 },
                Evaluation { x: vec![0.0, 7.0], h: -3.0 },
            ],
        };
        let csv = t.to_csv();
        assert!(csv.starts_with("eval_index,x,y,h\n1,1.5,2,10.25\n"));
        assert_eq!(EvalTrace::from_csv(&csv, 3, 9).unwrap(), t);
    }
}
