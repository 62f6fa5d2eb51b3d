//! Derivative-free optimisers behind a uniform launch interface.
//!
//! Every optimiser maximises height. Objective values reach an optimiser
//! only through an [`Evaluator`], which clips each proposed point to the
//! search box, records it, and enforces the global stopping criteria by
//! returning [`Halt`]. Optimisers propagate `Halt` with `?`, so a run can be
//! cut off in the middle of a generation or local phase.

mod cma_es;
mod differential_evolution;
mod dual_annealing;
mod nelder_mead;
mod pso;
mod space;

pub use cma_es::CmaEs;
pub use differential_evolution::{DeLog, DifferentialEvolution};
pub use dual_annealing::{DaLog, DualAnnealing};
pub use nelder_mead::{nelder_mead, NelderMead};
pub use pso::{Pso, PsoLog};
pub use space::{AlgorithmId, HyperparameterSpace, OptimizerInstance, ParamKind, ParamSpec, ParamValue, ParamValues};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::terrain::Landscape;

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "bounds dimension mismatch");
        assert!(
            lower.iter().zip(&upper).all(|(l, u)| l <= u),
            "lower bound above upper bound"
        );
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn clip(&self, x: &mut [f64]) {
        for ((v, &l), &u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = if v.is_nan() { l } else { v.clamp(l, u) };
        }
    }

    pub fn clipped(&self, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        self.clip(&mut v);
        v
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| (l..=u).contains(&v))
    }

    pub fn range(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        use rand::Rng as _;
        (0..self.dim())
            .map(|i| self.lower[i] + rng.random::<f64>() * self.range(i))
            .collect()
    }
}

/// A single recorded objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub h: f64,
}

/// Signal that a global stopping criterion was met; the run is over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Halt;

/// Recording wrapper around a landscape.
pub struct Evaluator<'a> {
    landscape: &'a dyn Landscape,
    bounds: Bounds,
    budget: usize,
    target: Option<f64>,
    trace: Vec<Evaluation>,
    halted: bool,
}

impl<'a> Evaluator<'a> {
    /// Stops after `budget` evaluations or at the first height `>= target`.
    pub fn new(landscape: &'a dyn Landscape, budget: usize, target: Option<f64>) -> Self {
        Self {
            bounds: landscape.bounds(),
            landscape,
            budget,
            target,
            trace: Vec::new(),
            halted: budget == 0,
        }
    }

    /// No global criteria; the optimiser decides when to stop.
    pub fn unbounded(landscape: &'a dyn Landscape) -> Self {
        Self::new(landscape, usize::MAX, None)
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn evaluations(&self) -> usize {
        self.trace.len()
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn trace(&self) -> &[Evaluation] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<Evaluation> {
        self.trace
    }

    /// Height at the clipped point. Returns `Halt` once a global criterion
    /// has been met, including on the evaluation that meets it.
    pub fn evaluate(&mut self, x: &[f64]) -> Result<f64, Halt> {
        if self.halted {
            return Err(Halt);
        }
        let x = self.bounds.clipped(x);
        let h = self.landscape.height(&x);
        self.trace.push(Evaluation { x, h });
        let hit = self.target.is_some_and(|t| h >= t);
        if hit || self.trace.len() >= self.budget {
            self.halted = true;
            return Err(Halt);
        }
        Ok(h)
    }

    /// Objective for minimisers: negated height.
    pub(crate) fn cost(&mut self, x: &[f64]) -> Result<f64, Halt> {
        self.evaluate(x).map(|h| -h)
    }
}

/// Landscape defined by a closure, for tests and external objectives.
pub struct FnLandscape<F> {
    pub bounds: Bounds,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Landscape for FnLandscape<F> {
    fn bounds(&self) -> Bounds {
        self.bounds.clone()
    }

    fn height(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Absolute tolerances for local phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTolerances {
    /// Metres of height.
    pub f_tol: f64,
    /// Metres of position.
    pub x_tol: f64,
}

impl Default for LocalTolerances {
    fn default() -> Self {
        Self { f_tol: 0.2, x_tol: 10.0 }
    }
}

impl LocalTolerances {
    pub fn new(f_tol: f64, x_tol: f64) -> Result<Self> {
        if !(f_tol > 0.0) {
            return Err(Error::config("f_tol", format!("must be > 0, got {f_tol}")));
        }
        if !(x_tol > 0.0) {
            return Err(Error::config("x_tol", format!("must be > 0, got {x_tol}")));
        }
        Ok(Self { f_tol, x_tol })
    }
}

/// Best point of a launch.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub height: f64,
}

/// A configured optimiser. Launches are independent: all state lives in
/// the call, so one instance can serve many runs concurrently.
pub trait Optimizer: Send + Sync {
    fn name(&self) -> &str;

    /// Runs until the optimiser stops on its own (`Ok`) or a global
    /// criterion fires (`Err(Halt)`).
    fn launch(&self, eval: &mut Evaluator<'_>, start: &[f64], rng: &mut Rng) -> Result<Optimum, Halt>;
}

/// Tracks the best point seen by an optimiser (maximisation).
#[derive(Debug, Clone)]
pub(crate) struct BestSoFar {
    pub x: Vec<f64>,
    pub height: f64,
}

impl BestSoFar {
    pub fn new(dim: usize) -> Self {
        Self {
            x: vec![f64::NAN; dim],
            height: f64::NEG_INFINITY,
        }
    }

    pub fn offer(&mut self, x: &[f64], height: f64) {
        if height > self.height {
            self.height = height;
            self.x.clear();
            self.x.extend_from_slice(x);
        }
    }

    pub fn into_optimum(self) -> Optimum {
        Optimum {
            x: self.x,
            height: self.height,
        }
    }
}
