use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{BestSoFar, Evaluator, Halt, LocalTolerances, NelderMead, Optimizer, Optimum};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Generation cap, matching the usual library default.
pub const MAX_GENERATIONS: usize = 1000;

/// rand/1/bin differential evolution with optional dithering and polish.
#[derive(Debug, Clone)]
pub struct DifferentialEvolution {
    /// Population size per dimension.
    pub popsize: usize,
    pub recombination: f64,
    pub polish: bool,
    pub dithering: bool,
    pub mutation_low: f64,
    pub mutation_high: f64,
    pub tolerances: LocalTolerances,
    pub max_generations: usize,
}

/// Per-generation mutation factors of one launch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeLog {
    pub mutation_factors: Vec<f64>,
}

impl DifferentialEvolution {
    pub fn new(
        popsize: usize,
        recombination: f64,
        polish: bool,
        dithering: bool,
        mutation_low: f64,
        mutation_high: f64,
        tolerances: LocalTolerances,
    ) -> Result<Self> {
        if popsize < 4 {
            return Err(Error::config("popsize", format!("must be at least 4, got {popsize}")));
        }
        if !(0.0..=1.0).contains(&recombination) {
            return Err(Error::config("recombination", format!("{recombination} is outside [0, 1]")));
        }
        if !(0.0..=2.0).contains(&mutation_low) {
            return Err(Error::config("mutation_low", format!("{mutation_low} is outside [0, 2]")));
        }
        if dithering && !(mutation_low..=2.0).contains(&mutation_high) {
            return Err(Error::config(
                "mutation_high",
                format!("{mutation_high} is outside [{mutation_low}, 2]"),
            ));
        }
        Ok(Self {
            popsize,
            recombination,
            polish,
            dithering,
            mutation_low,
            mutation_high,
            tolerances,
            max_generations: MAX_GENERATIONS,
        })
    }

    fn mutation_factor(&self, rng: &mut Rng) -> f64 {
        if self.dithering && self.mutation_high > self.mutation_low {
            rng.random_range(self.mutation_low..self.mutation_high)
        } else {
            self.mutation_low
        }
    }

    /// One launch, recording the mutation factor of each generation.
    pub fn launch_logged(
        &self,
        eval: &mut Evaluator<'_>,
        start: &[f64],
        rng: &mut Rng,
        log: &mut DeLog,
    ) -> Result<Optimum, Halt> {
        let bounds = eval.bounds().clone();
        let dim = bounds.dim();
        let np = self.popsize * dim;

        // Latin hypercube: each axis cut into `np` strata, one member per stratum.
        let mut pop = vec![vec![0.0; dim]; np];
        for j in 0..dim {
            let mut strata: Vec<usize> = (0..np).collect();
            strata.shuffle(rng);
            for (member, s) in pop.iter_mut().zip(strata) {
                let u = (s as f64 + rng.random::<f64>()) / np as f64;
                member[j] = bounds.lower[j] + u * bounds.range(j);
            }
        }
        pop[0] = bounds.clipped(start);

        let mut best = BestSoFar::new(dim);
        let mut cost = Vec::with_capacity(np);
        for member in &pop {
            let c = eval.cost(member)?;
            best.offer(member, -c);
            cost.push(c);
        }

        for _ in 0..self.max_generations {
            if std_dev(&cost) < self.tolerances.f_tol {
                break;
            }
            let factor = self.mutation_factor(rng);
            log.mutation_factors.push(factor);
            let mut trials = Vec::with_capacity(np);
            for i in 0..np {
                let [r1, r2, r3] = distinct_others(rng, np, i);
                let forced = rng.random_range(0..dim);
                let mut trial = pop[i].clone();
                for j in 0..dim {
                    if j == forced || rng.random::<f64>() < self.recombination {
                        trial[j] = pop[r1][j] + factor * (pop[r2][j] - pop[r3][j]);
                    }
                }
                bounds.clip(&mut trial);
                trials.push(trial);
            }
            for (i, trial) in trials.into_iter().enumerate() {
                let c = eval.cost(&trial)?;
                best.offer(&trial, -c);
                if c <= cost[i] {
                    pop[i] = trial;
                    cost[i] = c;
                }
            }
        }

        if self.polish {
            let nm = NelderMead::new(self.tolerances);
            let start = best.x.clone();
            let (x, c) = nm.minimize(eval, &start)?;
            best.offer(&x, -c);
        }
        Ok(best.into_optimum())
    }
}

impl Optimizer for DifferentialEvolution {
    fn name(&self) -> &str {
        "differential_evolution"
    }

    fn launch(&self, eval: &mut Evaluator<'_>, start: &[f64], rng: &mut Rng) -> Result<Optimum, Halt> {
        self.launch_logged(eval, start, rng, &mut DeLog::default())
    }
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Three distinct indices in `0..n`, all different from `skip`.
fn distinct_others(rng: &mut Rng, n: usize, skip: usize) -> [usize; 3] {
    let mut out = [usize::MAX; 3];
    let mut k = 0;
    while k < 3 {
        let c = rng.random_range(0..n);
        if c != skip && !out[..k].contains(&c) {
            out[k] = c;
            k += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::test_support::{bowl, quantized_bowl, shifted};
    use crate::rng::stream;

    fn default_de() -> DifferentialEvolution {
        DifferentialEvolution::new(15, 0.7, false, true, 0.5, 1.0, LocalTolerances::default()).unwrap()
    }

    #[test]
    fn solves_unimodal_within_budget_for_ten_seeds() {
        let land = bowl([3100.0, 1200.0], 5000.0);
        for seed in 0..10 {
            let mut ev = Evaluator::new(&land, 10_000, Some(999.0));
            let r = default_de().launch(&mut ev, &[10.0, 10.0], &mut stream(seed));
            assert!(r.is_err() && ev.trace().last().unwrap().h >= 999.0, "seed {seed}");
        }
    }

    #[test]
    fn without_dithering_every_generation_uses_low_factor() {
        let de = DifferentialEvolution::new(10, 0.7, false, false, 0.63, 1.5, LocalTolerances::default()).unwrap();
        let land = bowl([100.0, 100.0], 5000.0);
        let mut log = DeLog::default();
        let mut ev = Evaluator::new(&land, 5000, None);
        let _ = de.launch_logged(&mut ev, &[0.0, 0.0], &mut stream(3), &mut log);
        assert!(!log.mutation_factors.is_empty());
        assert!(log.mutation_factors.iter().all(|&f| f == 0.63));
    }

    #[test]
    fn dithered_factors_stay_in_interval() {
        let land = bowl([100.0, 100.0], 5000.0);
        let mut log = DeLog::default();
        let mut ev = Evaluator::new(&land, 5000, None);
        let _ = default_de().launch_logged(&mut ev, &[0.0, 0.0], &mut stream(3), &mut log);
        assert!(log.mutation_factors.iter().all(|&f| (0.5..1.0).contains(&f)));
        assert!(log.mutation_factors.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn small_popsize_rejected() {
        let err = DifferentialEvolution::new(3, 0.7, false, true, 0.5, 1.0, LocalTolerances::default()).unwrap_err();
        assert!(err.to_string().contains("popsize"));
    }

    #[test]
    fn selection_is_invariant_under_offset() {
        let land = quantized_bowl([700.0, 300.0], 5000.0);
        let up = shifted(&land, 256.0);
        let run = |l: &dyn crate::terrain::Landscape| {
            let mut ev = Evaluator::new(l, 3000, None);
            let _ = default_de().launch(&mut ev, &[1.0, 1.0], &mut stream(9));
            ev.into_trace().into_iter().map(|e| e.x).collect::<Vec<_>>()
        };
        assert_eq!(run(&land), run(&up));
    }

    #[test]
    fn polish_adds_local_phase() {
        let land = bowl([2500.0, 2500.0], 5000.0);
        let mut de = default_de();
        de.polish = true;
        let mut ev = Evaluator::unbounded(&land);
        let opt = de.launch(&mut ev, &[0.0, 0.0], &mut stream(1)).unwrap();
        assert!(opt.height > 1000.0 - 0.2);
    }
}
