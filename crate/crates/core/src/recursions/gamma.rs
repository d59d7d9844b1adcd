//! Smallest attenuation level certified by the coupled recursions.
//!
//! Feasibility is assumed monotone in `gamma` (larger levels only make the
//! `H` operators more positive). Bisection relies on this; a uniform scan of
//! the bracket is run afterwards and any contradiction is reported.

use crate::model::MeanFieldSystem;

use super::{h2hinf_solve_with, H2HinfSolution, SolveError, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSearchOptions {
    pub tol: f64,
    /// Points in the monotonicity scan; 0 disables it.
    pub scan_points: usize,
    pub max_iterations: usize,
    pub solver: SolverOptions,
}

impl Default for GammaSearchOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            scan_points: 50,
            max_iterations: 200,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GammaSearchResult {
    /// Feasible level within `tol` of the feasibility threshold.
    pub gamma_star: f64,
    /// Largest level found infeasible, if any.
    pub gamma_infeasible: Option<f64>,
    pub iterations: usize,
    /// Solution at `gamma_star`.
    pub solution: H2HinfSolution,
    /// `(gamma, feasible)` pairs from the scan.
    pub scan: Vec<(f64, bool)>,
    /// Scan points that contradict the bisection result.
    pub non_monotone: Vec<f64>,
}

impl GammaSearchResult {
    pub fn is_monotone(&self) -> bool {
        self.non_monotone.is_empty()
    }
}

/// Bisection for the smallest `gamma` in `[lo, hi]` at which
/// [`h2hinf_solve`](super::h2hinf_solve) succeeds.
///
/// Fails with the solver's error when `hi` itself is not feasible.
pub fn gamma_star_search(
    system: &MeanFieldSystem,
    lo: f64,
    hi: f64,
    opts: &GammaSearchOptions,
) -> Result<GammaSearchResult, SolveError> {
    if !(lo > 0.0 && lo.is_finite()) {
        return Err(SolveError::BadGamma(lo));
    }
    if !(hi > lo && hi.is_finite()) {
        return Err(SolveError::BadGamma(hi));
    }
    let solve = |g: f64| h2hinf_solve_with(system, g, &opts.solver);
    let top = solve(hi)?;

    let (gamma_star, gamma_infeasible, solution, iterations) = match solve(lo) {
        Ok(sol) => (lo, None, sol, 0),
        Err(SolveError::Infeasible(_) | SolveError::SingularCoupling { .. }) => {
            let (mut a, mut b) = (lo, hi);
            let mut best = top;
            let mut iterations = 0;
            while b - a > opts.tol && iterations < opts.max_iterations {
                let mid = 0.5 * (a + b);
                match solve(mid) {
                    Ok(sol) => {
                        b = mid;
                        best = sol;
                    }
                    Err(SolveError::Infeasible(_) | SolveError::SingularCoupling { .. }) => a = mid,
                    Err(other) => return Err(other),
                }
                iterations += 1;
            }
            (b, Some(a), best, iterations)
        }
        Err(other) => return Err(other),
    };

    let mut scan = Vec::with_capacity(opts.scan_points);
    let mut non_monotone = Vec::new();
    for i in 0..opts.scan_points {
        let g = if opts.scan_points == 1 {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (opts.scan_points - 1) as f64
        };
        let feasible = solve(g).is_ok();
        scan.push((g, feasible));
        let contradicts = match gamma_infeasible {
            Some(bad) => (feasible && g <= bad) || (!feasible && g >= gamma_star),
            None => !feasible,
        };
        if contradicts {
            non_monotone.push(g);
        }
    }

    Ok(GammaSearchResult {
        gamma_star,
        gamma_infeasible,
        iterations,
        solution,
        scan,
        non_monotone,
    })
}
