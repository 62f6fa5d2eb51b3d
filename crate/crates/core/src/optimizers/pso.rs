use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::{BestSoFar, Evaluator, Halt, LocalTolerances, Optimizer, Optimum};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Total attraction shared between the personal and global terms.
const ATTRACTION: f64 = 4.1;
/// Constriction factor for that total.
const CONSTRICTION: f64 = 0.7298;
/// Iterations without an `f_tol` improvement of the global best before stopping.
pub const STALL_WINDOW: usize = 20;

/// Particle swarm with constriction. `r` moves attraction from the personal
/// best (`r = 0`) to the global best (`r = 1`).
#[derive(Debug, Clone)]
pub struct Pso {
    pub sigma0: f64,
    pub r: f64,
    pub population_size: usize,
    pub tolerances: LocalTolerances,
    pub stall_window: usize,
}

/// Per-particle attraction terms of every update, for inspection in tests.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PsoLog {
    /// Largest absolute personal-best pull in each iteration.
    pub personal_pull: Vec<f64>,
    /// Largest absolute global-best pull in each iteration.
    pub global_pull: Vec<f64>,
}

impl Pso {
    pub fn new(sigma0: f64, r: f64, population_size: usize, tolerances: LocalTolerances) -> Result<Self> {
        if population_size < 1 {
            return Err(Error::config("population_size", "must be at least 1"));
        }
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::config("sigma0", format!("must be > 0, got {sigma0}")));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::config("r", format!("{r} is outside [0, 1]")));
        }
        Ok(Self {
            sigma0,
            r,
            population_size,
            tolerances,
            stall_window: STALL_WINDOW,
        })
    }

    pub fn launch_logged(
        &self,
        eval: &mut Evaluator<'_>,
        start: &[f64],
        rng: &mut Rng,
        log: &mut PsoLog,
    ) -> Result<Optimum, Halt> {
        let bounds = eval.bounds().clone();
        let dim = bounds.dim();
        let spread = Normal::new(0.0, self.sigma0).expect("sigma0 checked positive");
        let origin = bounds.clipped(start);

        // Particle 0 starts on the initial guess; the rest scatter around it.
        let mut xs: Vec<Vec<f64>> = (0..self.population_size)
            .map(|i| {
                let mut x: Vec<f64> = origin
                    .iter()
                    .map(|&o| if i == 0 { o } else { o + spread.sample(rng) })
                    .collect();
                bounds.clip(&mut x);
                x
            })
            .collect();
        let mut vs: Vec<Vec<f64>> = (0..self.population_size)
            .map(|_| (0..dim).map(|_| 0.1 * spread.sample(rng)).collect())
            .collect();

        let mut best = BestSoFar::new(dim);
        let mut personal = xs.clone();
        let mut personal_h = Vec::with_capacity(xs.len());
        for x in &xs {
            let h = eval.evaluate(x)?;
            best.offer(x, h);
            personal_h.push(h);
        }

        let w_personal = ATTRACTION * (1.0 - self.r);
        let w_global = ATTRACTION * self.r;
        let mut reference = best.height;
        let mut stall = 0;
        while stall < self.stall_window {
            let global = best.x.clone();
            let (mut pmax, mut gmax) = (0.0f64, 0.0f64);
            for i in 0..xs.len() {
                for j in 0..dim {
                    let rp = w_personal * rng.random::<f64>();
                    let rg = w_global * rng.random::<f64>();
                    let pull_p = rp * (personal[i][j] - xs[i][j]);
                    let pull_g = rg * (global[j] - xs[i][j]);
                    pmax = pmax.max(pull_p.abs());
                    gmax = gmax.max(pull_g.abs());
                    vs[i][j] = CONSTRICTION * (vs[i][j] + pull_p + pull_g);
                    xs[i][j] += vs[i][j];
                }
                bounds.clip(&mut xs[i]);
            }
            log.personal_pull.push(pmax);
            log.global_pull.push(gmax);

            for i in 0..xs.len() {
                let h = eval.evaluate(&xs[i])?;
                if h > personal_h[i] {
                    personal_h[i] = h;
                    personal[i].clone_from(&xs[i]);
                }
                best.offer(&xs[i], h);
            }
            if best.height - reference > self.tolerances.f_tol {
                reference = best.height;
                stall = 0;
            } else {
                stall += 1;
            }
        }
        Ok(best.into_optimum())
    }
}

impl Optimizer for Pso {
    fn name(&self) -> &str {
        "pso"
    }

    fn launch(&self, eval: &mut Evaluator<'_>, start: &[f64], rng: &mut Rng) -> Result<Optimum, Halt> {
        self.launch_logged(eval, start, rng, &mut PsoLog::default())
    }
}
