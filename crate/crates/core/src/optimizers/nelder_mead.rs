use nalgebra::DMatrix;

use super::{Bounds, Evaluation, Evaluator, Halt, LocalTolerances, Optimizer, Optimum};
use crate::rng::Rng;
use crate::terrain::Landscape;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Initial simplex edge as a fraction of each side of the search box.
pub const INITIAL_STEP: f64 = 0.01;

/// Safety cap on iterations for objectives where neither tolerance is ever met.
const MAX_ITERATIONS: usize = 200_000;

/// Downhill simplex on the negated height.
///
/// Stops as soon as either the spread of heights over the simplex drops
/// below `f_tol` or every vertex lies within `x_tol` of the best one in each
/// coordinate.
#[derive(Debug, Clone)]
pub struct NelderMead {
    pub tolerances: LocalTolerances,
    pub initial_step: f64,
}

impl NelderMead {
    pub fn new(tolerances: LocalTolerances) -> Self {
        Self {
            tolerances,
            initial_step: INITIAL_STEP,
        }
    }

    /// Local phase used by this and other optimisers; returns the best
    /// vertex and its negated height.
    pub(crate) fn minimize(&self, eval: &mut Evaluator<'_>, start: &[f64]) -> Result<(Vec<f64>, f64), Halt> {
        let bounds = eval.bounds().clone();
        let n = bounds.dim();
        let x0 = bounds.clipped(start);
        let steps: Vec<f64> = (0..n)
            .map(|i| (self.initial_step * bounds.range(i)).max(self.tolerances.x_tol))
            .collect();
        let mut simplex = initial_simplex(&bounds, &x0, &steps);
        let mut f = Vec::with_capacity(n + 1);
        for v in &simplex {
            f.push(eval.cost(v)?);
        }
        // Best cost and step of the last restart. Clipping against a bound
        // can flatten the simplex again straight away; restarts that gain
        // nothing halve the step so the loop ends.
        let mut last_restart: Option<(f64, f64)> = None;

        for _ in 0..MAX_ITERATIONS {
            sort_simplex(&mut simplex, &mut f);
            if f[n] - f[0] < self.tolerances.f_tol {
                break;
            }
            let extent = max_offset(&simplex);
            if extent < self.tolerances.x_tol {
                break;
            }
            if is_degenerate(&simplex) {
                let best = simplex[0].clone();
                let fbest = f[0];
                let size = match last_restart {
                    Some((prev, size)) if fbest > prev - self.tolerances.f_tol => SHRINK * size.min(extent),
                    _ => extent,
                };
                last_restart = Some((fbest, size));
                let step = vec![size; n];
                simplex = initial_simplex(&bounds, &best, &step);
                f.clear();
                f.push(fbest);
                for v in &simplex[1..] {
                    f.push(eval.cost(v)?);
                }
                continue;
            }

            let centroid = centroid(&simplex[..n]);
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> {
                let mut p: Vec<f64> = centroid.iter().zip(&worst).map(|(c, w)| c + t * (c - w)).collect();
                bounds.clip(&mut p);
                p
            };
            let xr = along(REFLECT);
            let fr = eval.cost(&xr)?;
            if fr < f[0] {
                let xe = along(REFLECT * EXPAND);
                let fe = eval.cost(&xe)?;
                if fe < fr {
                    simplex[n] = xe;
                    f[n] = fe;
                } else {
                    simplex[n] = xr;
                    f[n] = fr;
                }
                continue;
            }
            if fr < f[n - 1] {
                simplex[n] = xr;
                f[n] = fr;
                continue;
            }
            let (xc, fc, accept) = if fr < f[n] {
                let xc = along(REFLECT * CONTRACT);
                let fc = eval.cost(&xc)?;
                (xc, fc, fc <= fr)
            } else {
                let xc = along(-CONTRACT);
                let fc = eval.cost(&xc)?;
                (xc, fc, fc < f[n])
            };
            if accept {
                simplex[n] = xc;
                f[n] = fc;
                continue;
            }
            for i in 1..=n {
                let best = simplex[0].clone();
                for (v, b) in simplex[i].iter_mut().zip(&best) {
                    *v = b + SHRINK * (*v - b);
                }
                f[i] = eval.cost(&simplex[i])?;
            }
        }
        sort_simplex(&mut simplex, &mut f);
        Ok((simplex.swap_remove(0), f[0]))
    }
}

impl Optimizer for NelderMead {
    fn name(&self) -> &str {
        "nelder_mead"
    }

    fn launch(&self, eval: &mut Evaluator<'_>, start: &[f64], _rng: &mut Rng) -> Result<Optimum, Halt> {
        let (x, cost) = self.minimize(eval, start)?;
        Ok(Optimum { x, height: -cost })
    }
}

/// Runs Nelder-Mead on `landscape` from `start` with no global criteria.
/// Returns the best point and every evaluation in call order.
pub fn nelder_mead(landscape: &dyn Landscape, start: &[f64], tolerances: LocalTolerances) -> (Optimum, Vec<Evaluation>) {
    let mut eval = Evaluator::unbounded(landscape);
    let nm = NelderMead::new(tolerances);
    let (x, cost) = nm.minimize(&mut eval, start).expect("unbounded evaluator never halts");
    (Optimum { x, height: -cost }, eval.into_trace())
}

/// Vertex `x0` plus one vertex per axis, stepping inwards where `x0` sits
/// near the upper bound.
fn initial_simplex(bounds: &Bounds, x0: &[f64], steps: &[f64]) -> Vec<Vec<f64>> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        let up = x0[i] + steps[i];
        v[i] = if up <= bounds.upper[i] { up } else { x0[i] - steps[i] };
        bounds.clip(&mut v);
        simplex.push(v);
    }
    simplex
}

fn sort_simplex(simplex: &mut Vec<Vec<f64>>, f: &mut Vec<f64>) {
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by(|&a, &b| f[a].total_cmp(&f[b]));
    *simplex = order.iter().map(|&i| simplex[i].clone()).collect();
    *f = order.iter().map(|&i| f[i]).collect();
}

fn centroid(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len() as f64;
    let mut c = vec![0.0; points[0].len()];
    for p in points {
        for (ci, pi) in c.iter_mut().zip(p) {
            *ci += pi / n;
        }
    }
    c
}

/// Largest coordinate distance from the best vertex.
fn max_offset(simplex: &[Vec<f64>]) -> f64 {
    let best = &simplex[0];
    simplex[1..]
        .iter()
        .flat_map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// Relative volume test: the edge matrix determinant against the product
/// of edge lengths.
fn is_degenerate(simplex: &[Vec<f64>]) -> bool {
    let n = simplex.len() - 1;
    let best = &simplex[0];
    let mut scale = 1.0;
    let m = DMatrix::from_fn(n, n, |r, c| simplex[c + 1][r] - best[r]);
    for c in 0..n {
        let len = m.column(c).norm();
        if len == 0.0 {
            return true;
        }
        scale *= len;
    }
    m.determinant().abs() <= 1e-10 * scale
}
