use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{BestSoFar, Evaluator, Halt, LocalTolerances, NelderMead, Optimizer, Optimum};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Visiting steps are capped at this magnitude.
const TAIL_LIMIT: f64 = 1.0e8;
/// Iterations (temperature steps) per launch, counted across restarts.
pub const MAX_ITERATIONS: usize = 1000;
/// Chain steps without improvement before a forced local search.
const NOT_IMPROVED_MAX: usize = 1000;

/// Generalised simulated annealing with a local Nelder-Mead phase.
///
/// The temperature at iteration `i` is
/// `T0 * (2^(q_v - 1) - 1) / ((i + 2)^(q_v - 1) - 1)`; once it falls below
/// `T0 * restart_temp_ratio` the search restarts from a uniformly drawn point.
/// Proposals are clipped to the search box instead of wrapped.
#[derive(Debug, Clone)]
pub struct DualAnnealing {
    pub initial_temp: f64,
    pub restart_temp_ratio: f64,
    pub visit: f64,
    pub accept: f64,
    pub tolerances: LocalTolerances,
    pub max_iterations: usize,
}

/// Temperatures and restart points of one launch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DaLog {
    pub temperatures: Vec<f64>,
    /// Indices into `temperatures` at which a restart happened.
    pub restarts: Vec<usize>,
}

impl DualAnnealing {
    pub fn new(
        initial_temp: f64,
        restart_temp_ratio: f64,
        visit: f64,
        accept: f64,
        tolerances: LocalTolerances,
    ) -> Result<Self> {
        if !(initial_temp > 0.0 && initial_temp.is_finite()) {
            return Err(Error::config("initial_temp", format!("must be > 0, got {initial_temp}")));
        }
        if !(restart_temp_ratio > 0.0 && restart_temp_ratio < 1.0) {
            return Err(Error::config(
                "restart_temp_ratio",
                format!("{restart_temp_ratio} is outside (0, 1)"),
            ));
        }
        if !(visit > 1.0 && visit < 3.0) {
            return Err(Error::config("visit", format!("{visit} is outside (1, 3)")));
        }
        if !(accept < 0.0) {
            return Err(Error::config("accept", format!("must be < 0, got {accept}")));
        }
        Ok(Self {
            initial_temp,
            restart_temp_ratio,
            visit,
            accept,
            tolerances,
            max_iterations: MAX_ITERATIONS,
        })
    }

    pub fn temperature(&self, iteration: usize) -> f64 {
        let q = self.visit - 1.0;
        let t1 = (q * 2f64.ln()).exp() - 1.0;
        let t2 = (q * (iteration as f64 + 2.0).ln()).exp() - 1.0;
        self.initial_temp * t1 / t2
    }

    pub fn launch_logged(
        &self,
        eval: &mut Evaluator<'_>,
        start: &[f64],
        rng: &mut Rng,
        log: &mut DaLog,
    ) -> Result<Optimum, Halt> {
        let bounds = eval.bounds().clone();
        let dim = bounds.dim();
        let visiting = Visiting::new(self.visit);
        let local = NelderMead::new(self.tolerances);
        let restart_below = self.initial_temp * self.restart_temp_ratio;

        let mut best = BestSoFar::new(dim);
        let mut current = bounds.clipped(start);
        let mut current_cost = eval.cost(&current)?;
        best.offer(&current, -current_cost);
        let mut not_improved = 0usize;
        let mut not_improved_max = NOT_IMPROVED_MAX;
        let mut done = 0usize;

        'outer: while done < self.max_iterations {
            for i in 0.. {
                if done >= self.max_iterations {
                    break 'outer;
                }
                let temperature = self.temperature(i);
                if temperature < restart_below {
                    log.restarts.push(log.temperatures.len());
                    current = bounds.sample(rng);
                    current_cost = eval.cost(&current)?;
                    best.offer(&current, -current_cost);
                    break;
                }
                log.temperatures.push(temperature);
                let step_temperature = temperature / (i as f64 + 1.0);

                // Markov chain: 2 * dim proposals, all coordinates then one at a time.
                let mut improved = i == 0;
                not_improved += 1;
                for j in 0..2 * dim {
                    let mut x = current.clone();
                    if j < dim {
                        let tail_hi = rng.random::<f64>();
                        let tail_lo = rng.random::<f64>();
                        for v in x.iter_mut() {
                            let s = visiting.sample(temperature, rng);
                            *v += if s > TAIL_LIMIT {
                                TAIL_LIMIT * tail_hi
                            } else if s < -TAIL_LIMIT {
                                -TAIL_LIMIT * tail_lo
                            } else {
                                s
                            };
                        }
                    } else {
                        let s = visiting.sample(temperature, rng);
                        let s = if s.abs() > TAIL_LIMIT {
                            s.signum() * TAIL_LIMIT * rng.random::<f64>()
                        } else {
                            s
                        };
                        x[j - dim] += s;
                    }
                    bounds.clip(&mut x);
                    let c = eval.cost(&x)?;
                    if c < current_cost {
                        if -c > best.height {
                            improved = true;
                            not_improved = 0;
                        }
                        best.offer(&x, -c);
                        current = x;
                        current_cost = c;
                    } else {
                        let r = rng.random::<f64>();
                        let base = 1.0 - (1.0 - self.accept) * (c - current_cost) / step_temperature;
                        let p = if base <= 0.0 {
                            0.0
                        } else {
                            (base.ln() / (1.0 - self.accept)).exp()
                        };
                        if r <= p {
                            current = x;
                            current_cost = c;
                        }
                    }
                }

                if improved {
                    let from = best.x.clone();
                    let (x, c) = local.minimize(eval, &from)?;
                    if -c > best.height {
                        not_improved = 0;
                        best.offer(&x, -c);
                        current = x;
                        current_cost = c;
                    }
                }
                if not_improved >= not_improved_max {
                    let from = current.clone();
                    let (x, c) = local.minimize(eval, &from)?;
                    not_improved = 0;
                    not_improved_max = dim;
                    if -c > best.height {
                        best.offer(&x, -c);
                        current = x;
                        current_cost = c;
                    }
                }
                done += 1;
            }
        }
        Ok(best.into_optimum())
    }
}

impl Optimizer for DualAnnealing {
    fn name(&self) -> &str {
        "dual_annealing"
    }

    fn launch(&self, eval: &mut Evaluator<'_>, start: &[f64], rng: &mut Rng) -> Result<Optimum, Halt> {
        self.launch_logged(eval, start, rng, &mut DaLog::default())
    }
}

/// Tsallis visiting distribution with shape `q_v`, sampled as a ratio of
/// scaled normals.
struct Visiting {
    q: f64,
    factor4_p: f64,
    factor6: f64,
}

impl Visiting {
    fn new(q: f64) -> Self {
        let factor2 = ((4.0 - q) * (q - 1.0).ln()).exp();
        let factor3 = ((2.0 - q) * 2f64.ln() / (q - 1.0)).exp();
        let factor4_p = PI.sqrt() * factor2 / (factor3 * (3.0 - q));
        let factor5 = 1.0 / (q - 1.0) - 0.5;
        let d1 = 2.0 - factor5;
        let factor6 = PI * (1.0 - factor5) / (PI * (1.0 - factor5)).sin() / ln_gamma(d1).exp();
        Self { q, factor4_p, factor6 }
    }

    fn sample(&self, temperature: f64, rng: &mut Rng) -> f64 {
        let x: f64 = StandardNormal.sample(rng);
        let y: f64 = StandardNormal.sample(rng);
        let factor1 = (temperature.ln() / (self.q - 1.0)).exp();
        let factor4 = self.factor4_p * factor1;
        let sigma = (-(self.q - 1.0) * (self.factor6 / factor4).ln() / (3.0 - self.q)).exp();
        let den = ((self.q - 1.0) * y.abs().ln() / (3.0 - self.q)).exp();
        x * sigma / den
    }
}

/// Lanczos approximation of `ln Γ(x)`, accurate to about 1e-15 for x > 0
/// and extended to negative non-integers by reflection.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}
