use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use super::{BestSoFar, Evaluator, Halt, LocalTolerances, Optimizer, Optimum};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Safety cap on generations.
const MAX_GENERATIONS: usize = 100_000;

/// (mu/mu_w, lambda) CMA-ES with the standard default learning rates.
///
/// Stops when the best height has not improved by more than `f_tol` over
/// `10 + ceil(30 n / lambda)` generations, or when the largest standard
/// deviation of the search distribution falls below `x_tol`.
#[derive(Debug, Clone)]
pub struct CmaEs {
    pub sigma0: f64,
    pub population_size: usize,
    pub tolerances: LocalTolerances,
}

impl CmaEs {
    pub fn new(sigma0: f64, population_size: usize, tolerances: LocalTolerances) -> Result<Self> {
        if population_size < 4 {
            return Err(Error::config(
                "population_size",
                format!("must be at least 4, got {population_size}"),
            ));
        }
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::config("sigma0", format!("must be > 0, got {sigma0}")));
        }
        Ok(Self {
            sigma0,
            population_size,
            tolerances,
        })
    }

    pub fn stall_window(&self, dim: usize) -> usize {
        10 + (30 * dim).div_ceil(self.population_size)
    }
}

impl Optimizer for CmaEs {
    fn name(&self) -> &str {
        "cma_es"
    }

    fn launch(&self, eval: &mut Evaluator<'_>, start: &[f64], rng: &mut Rng) -> Result<Optimum, Halt> {
        let bounds = eval.bounds().clone();
        let n = bounds.dim();
        let nf = n as f64;
        let lambda = self.population_size;
        let mu = lambda / 2;

        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((mu as f64) + 0.5).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let cs = (mueff + 2.0) / (nf + mueff + 5.0);
        let ds = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
        let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
        let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
        let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

        let mut mean = DVector::from_vec(bounds.clipped(start));
        let mut sigma = self.sigma0;
        let mut cov = DMatrix::<f64>::identity(n, n);
        let mut ps = DVector::<f64>::zeros(n);
        let mut pc = DVector::<f64>::zeros(n);

        let window = self.stall_window(n);
        let mut best = BestSoFar::new(n);
        let mut reference = f64::NEG_INFINITY;
        let mut last_gain = 0;

        for generation in 0..MAX_GENERATIONS {
            let eig = SymmetricEigen::new(cov.clone());
            let scales = eig.eigenvalues.map(|e| e.max(0.0).sqrt());
            let basis = eig.eigenvectors;

            let mut samples: Vec<(f64, DVector<f64>)> = Vec::with_capacity(lambda);
            for _ in 0..lambda {
                let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
                let y = &basis * z.component_mul(&scales);
                let mut x: Vec<f64> = (&mean + sigma * &y).iter().copied().collect();
                bounds.clip(&mut x);
                let h = eval.evaluate(&x)?;
                best.offer(&x, h);
                // Step actually taken after clipping.
                let y_eff = (DVector::from_vec(x) - &mean) / sigma;
                samples.push((-h, y_eff));
            }
            samples.sort_by(|a, b| a.0.total_cmp(&b.0));

            let mut yw = DVector::<f64>::zeros(n);
            for (w, (_, y)) in weights.iter().zip(&samples) {
                yw += *w * y;
            }
            mean += sigma * &yw;

            let inv_sqrt = &basis
                * DMatrix::from_diagonal(&scales.map(|s| if s > 0.0 { 1.0 / s } else { 0.0 }))
                * basis.transpose();
            ps = (1.0 - cs) * &ps + (cs * (2.0 - cs) * mueff).sqrt() * (&inv_sqrt * &yw);
            let norm_ps = ps.norm();
            let decay = 1.0 - (1.0 - cs).powi(2 * (generation as i32 + 1));
            let hsig = norm_ps / decay.sqrt() < (1.4 + 2.0 / (nf + 1.0)) * chi_n;
            let hs = if hsig { 1.0 } else { 0.0 };
            pc = (1.0 - cc) * &pc + hs * (cc * (2.0 - cc) * mueff).sqrt() * &yw;

            let mut rank_mu = DMatrix::<f64>::zeros(n, n);
            for (w, (_, y)) in weights.iter().zip(&samples) {
                rank_mu += *w * y * y.transpose();
            }
            cov = (1.0 - c1 - cmu) * &cov
                + c1 * (&pc * pc.transpose() + (1.0 - hs) * cc * (2.0 - cc) * &cov)
                + cmu * rank_mu;
            cov = (&cov + cov.transpose()) * 0.5;
            sigma *= ((cs / ds) * (norm_ps / chi_n - 1.0)).exp();

            if best.height - reference > self.tolerances.f_tol {
                reference = best.height;
                last_gain = generation;
            } else if generation - last_gain >= window {
                break;
            }
            let largest = cov.diagonal().iter().fold(0.0f64, |m, &v| m.max(v));
            if !sigma.is_finite() || sigma * largest.sqrt() < self.tolerances.x_tol {
                break;
            }
        }
        Ok(best.into_optimum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::test_support::{bowl, quantized_bowl, shifted};
    use crate::rng::stream;

    #[test]
    fn solves_unimodal() {
        let land = bowl([3100.0, 1200.0], 5000.0);
        let cma = CmaEs::new(1500.0, 6, LocalTolerances::default()).unwrap();
        for seed in 0..5 {
            let mut ev = Evaluator::new(&land, 20_000, Some(999.9));
            let r = cma.launch(&mut ev, &[100.0, 4000.0], &mut stream(seed));
            assert!(r.is_err() && ev.trace().last().unwrap().h >= 999.9, "seed {seed}");
        }
    }

    #[test]
    fn samples_invariant_under_offset() {
        let land = quantized_bowl([700.0, 300.0], 5000.0);
        let up = shifted(&land, 512.0);
        let cma = CmaEs::new(800.0, 8, LocalTolerances::new(1e-9, 1e-9).unwrap()).unwrap();
        let run = |l: &dyn crate::terrain::Landscape| {
            let mut ev = Evaluator::new(l, 800, None);
            let _ = cma.launch(&mut ev, &[4000.0, 4000.0], &mut stream(4));
            ev.into_trace().into_iter().map(|e| e.x).collect::<Vec<_>>()
        };
        assert_eq!(run(&land), run(&up));
    }

    #[test]
    fn terminates_on_its_own() {
        let land = bowl([2000.0, 2000.0], 5000.0);
        let cma = CmaEs::new(1000.0, 6, LocalTolerances::default()).unwrap();
        let mut ev = Evaluator::unbounded(&land);
        let opt = cma.launch(&mut ev, &[0.0, 0.0], &mut stream(0)).unwrap();
        assert!(opt.height > 999.0);
    }

    #[test]
    fn window_formula() {
        let cma = CmaEs::new(1.0, 6, LocalTolerances::default()).unwrap();
        assert_eq!(cma.stall_window(2), 20);
        assert!(CmaEs::new(1.0, 3, LocalTolerances::default()).is_err());
    }
}
