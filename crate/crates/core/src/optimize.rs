//! Derivative-free maximization of fidelity objectives over boxed
//! parameters: multi-start Nelder-Mead in an unconstrained transform space
//! (tanh map onto each box), deterministic for fixed starts.

use rayon::prelude::*;

use crate::{Result, SimError};

/// Convergence and budget knobs.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    /// Stop when the simplex objective spread falls below this.
    pub f_tol: f64,
    /// Stop when the simplex spreads below this in transform space.
    pub x_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { f_tol: 1e-6, x_tol: 1e-5 }
    }
}

/// A maximization problem over a box.
pub struct OptimizationProblem<'a> {
    pub objective: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub bounds: Vec<(f64, f64)>,
    pub starts: Vec<Vec<f64>>,
    pub tolerances: Tolerances,
    pub max_evals: usize,
}

/// Result of [`maximize`].
#[derive(Clone, Debug)]
pub struct OptimizationOutcome {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    pub evals: usize,
    /// Best-so-far value after each evaluation; never decreases.
    pub trace: Vec<f64>,
    /// False when the evaluation budget ran out before convergence.
    pub converged: bool,
}

fn to_box(z: f64, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * 0.5 * (z.tanh() + 1.0)
}

fn from_box(x: f64, (lo, hi): (f64, f64)) -> f64 {
    let u = ((x - lo) / (hi - lo)).clamp(1e-9, 1.0 - 1e-9);
    (2.0 * u - 1.0).atanh()
}

struct SingleStart<'a> {
    problem: &'a OptimizationProblem<'a>,
}

impl SingleStart<'_> {
    fn decode(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.problem.bounds).map(|(&zi, &b)| to_box(zi, b)).collect()
    }

    /// Nelder-Mead on -objective from one start. Returns
    /// (best params, best value, evals, best-so-far trace, converged).
    fn run(&self, start: &[f64], budget: usize) -> (Vec<f64>, f64, usize, Vec<f64>, bool) {
        let dim = self.problem.bounds.len();
        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut evals = 0usize;
        let mut trace: Vec<f64> = Vec::new();
        let mut best_params: Vec<f64> = start.to_vec();
        let mut best_value = f64::NEG_INFINITY;

        let eval = |z: &[f64],
                        evals: &mut usize,
                        trace: &mut Vec<f64>,
                        best_params: &mut Vec<f64>,
                        best_value: &mut f64|
         -> f64 {
            let params = self.decode(z);
            let v = (self.problem.objective)(&params);
            *evals += 1;
            if v > *best_value {
                *best_value = v;
                *best_params = params;
            }
            trace.push(*best_value);
            v
        };

        // initial simplex around the transformed start
        let z0: Vec<f64> =
            start.iter().zip(&self.problem.bounds).map(|(&x, &b)| from_box(x, b)).collect();
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        let f0 = eval(&z0, &mut evals, &mut trace, &mut best_params, &mut best_value);
        simplex.push((z0.clone(), f0));
        for k in 0..dim {
            let mut z = z0.clone();
            z[k] += 0.25;
            let f = eval(&z, &mut evals, &mut trace, &mut best_params, &mut best_value);
            simplex.push((z, f));
        }

        let mut converged = false;
        while evals < budget {
            // sort descending by objective (we maximize)
            simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
            let f_best = simplex[0].1;
            let f_worst = simplex[dim].1;
            let x_spread = simplex[1..]
                .iter()
                .map(|(z, _)| {
                    z.iter()
                        .zip(&simplex[0].0)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max)
                })
                .fold(0.0f64, f64::max);
            if (f_best - f_worst).abs() < self.problem.tolerances.f_tol
                && x_spread < self.problem.tolerances.x_tol
            {
                converged = true;
                break;
            }

            // centroid of all but the worst
            let centroid: Vec<f64> = (0..dim)
                .map(|k| simplex[..dim].iter().map(|(z, _)| z[k]).sum::<f64>() / dim as f64)
                .collect();
            let worst = simplex[dim].clone();
            let reflect: Vec<f64> = (0..dim)
                .map(|k| centroid[k] + alpha * (centroid[k] - worst.0[k]))
                .collect();
            let f_r = eval(&reflect, &mut evals, &mut trace, &mut best_params, &mut best_value);

            if f_r > simplex[0].1 {
                // try expansion
                let expand: Vec<f64> = (0..dim)
                    .map(|k| centroid[k] + gamma * (centroid[k] - worst.0[k]))
                    .collect();
                let f_e =
                    eval(&expand, &mut evals, &mut trace, &mut best_params, &mut best_value);
                simplex[dim] = if f_e > f_r { (expand, f_e) } else { (reflect, f_r) };
            } else if f_r > simplex[dim - 1].1 {
                simplex[dim] = (reflect, f_r);
            } else {
                // contraction toward the better of worst/reflected
                let (base, f_base) =
                    if f_r > worst.1 { (&reflect, f_r) } else { (&worst.0, worst.1) };
                let contract: Vec<f64> =
                    (0..dim).map(|k| centroid[k] + rho * (base[k] - centroid[k])).collect();
                let f_c =
                    eval(&contract, &mut evals, &mut trace, &mut best_params, &mut best_value);
                if f_c > f_base {
                    simplex[dim] = (contract, f_c);
                } else {
                    // shrink toward the best vertex
                    let best = simplex[0].0.clone();
                    for v in simplex.iter_mut().skip(1) {
                        let z: Vec<f64> = (0..dim)
                            .map(|k| best[k] + sigma * (v.0[k] - best[k]))
                            .collect();
                        let f =
                            eval(&z, &mut evals, &mut trace, &mut best_params, &mut best_value);
                        *v = (z, f);
                    }
                }
            }
        }
        (best_params, best_value, evals, trace, converged)
    }
}

/// Maximize over the box from every start; the best outcome wins (ties by
/// start order). Starts run in parallel; the reduction is deterministic.
pub fn maximize(problem: &OptimizationProblem) -> Result<OptimizationOutcome> {
    if problem.bounds.is_empty() {
        return Err(SimError::InvalidParameter("optimization needs at least one parameter".into()));
    }
    for &(lo, hi) in &problem.bounds {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SimError::InvalidParameter(format!("bad bound ({lo}, {hi})")));
        }
    }
    if problem.starts.is_empty() {
        return Err(SimError::InvalidParameter("optimization needs at least one start".into()));
    }
    let budget_per_start = (problem.max_evals / problem.starts.len()).max(1);
    let runner = SingleStart { problem };
    let results: Vec<(Vec<f64>, f64, usize, Vec<f64>, bool)> = problem
        .starts
        .par_iter()
        .map(|s| runner.run(s, budget_per_start))
        .collect();

    let mut evals = 0usize;
    let mut converged = true;
    let mut best_idx = 0usize;
    for (i, r) in results.iter().enumerate() {
        evals += r.2;
        converged &= r.4;
        if r.1 > results[best_idx].1 {
            best_idx = i;
        }
    }
    // merged monotone trace in start order
    let mut trace = Vec::with_capacity(evals);
    let mut best_so_far = f64::NEG_INFINITY;
    for r in &results {
        for &v in &r.3 {
            best_so_far = best_so_far.max(v);
            trace.push(best_so_far);
        }
    }
    Ok(OptimizationOutcome {
        best_params: results[best_idx].0.clone(),
        best_value: results[best_idx].1,
        evals,
        trace,
        converged,
    })
}

/// Evaluate the objective on a coarse grid and return the best `m` points
/// as starts for [`maximize`]. Multimodal fidelity landscapes get seeded
/// this way.
pub fn grid_refine(
    problem: &OptimizationProblem,
    grid: &[Vec<f64>],
    m: usize,
) -> Result<Vec<Vec<f64>>> {
    if grid.is_empty() {
        return Err(SimError::InvalidParameter("empty refinement grid".into()));
    }
    for point in grid {
        if point.len() != problem.bounds.len() {
            return Err(SimError::InvalidParameter("grid point dimension mismatch".into()));
        }
        for (x, &(lo, hi)) in point.iter().zip(&problem.bounds) {
            if *x < lo || *x > hi {
                return Err(SimError::InvalidParameter(format!(
                    "grid point {x} outside [{lo}, {hi}]"
                )));
            }
        }
    }
    let mut scored: Vec<(f64, &Vec<f64>)> = grid
        .par_iter()
        .map(|p| ((problem.objective)(p), p))
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    Ok(scored.into_iter().take(m.max(1)).map(|(_, p)| p.clone()).collect())
}
