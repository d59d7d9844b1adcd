//! Backward matrix recursions.
//!
//! Value sequences are indexed `0..=K+1` with the zero terminal condition at
//! `K+1`; gain sequences are indexed `0..=K`. Every value matrix is
//! symmetrized after each step and no inverse is ever formed.

use std::fmt;

use thiserror::Error;

use crate::model::ValidationReport;

mod coupled;
mod gamma;
mod lq;
mod operators;
mod sbrl;

pub use coupled::{
    coupled_gain_step, coupled_residual, h2hinf_solve, h2hinf_solve_with, CoupledGains,
    H2HinfSolution, HOperators,
};
pub use gamma::{gamma_star_search, GammaSearchOptions, GammaSearchResult};
pub use lq::{lq_operators, lq_solve, lq_solve_with, LqOperators, LqSolution};
pub use operators::{sbrl_operators, SbrlOperators};
pub use sbrl::{sbrl_solve, sbrl_solve_with, SbrlSolution};

/// Numerical thresholds shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// An operator counts as positive definite when its smallest eigenvalue
    /// exceeds this.
    pub pd_tol: f64,
    /// Stacked gain systems with reciprocal condition below this are
    /// rejected as degenerate.
    pub cond_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            pd_tol: 1e-10,
            cond_tol: 1e-12,
        }
    }
}

/// The positivity-constrained operators of the recursions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    /// `gamma^2 I + B^T P B + D^T P D`
    H,
    /// `gamma^2 I + Bbar^T Q Bbar + Dbar^T P Dbar`
    HBar,
    /// `I + F1^T Pt F1`
    H1,
    /// `I + F1^T Qt F1`
    H1Bar,
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operator::H => "H",
            Operator::HBar => "Ht",
            Operator::H1 => "H1",
            Operator::H1Bar => "H1t",
        })
    }
}

/// The recursion could not continue: an operator lost positive definiteness.
///
/// This does not prove the attenuation level is unattainable; it only means
/// the recursion cannot certify it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityFailure {
    pub step: usize,
    pub which: Operator,
    pub min_eigenvalue: f64,
}

impl fmt::Display for FeasibilityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "operator {} is not positive definite at k={} (min eigenvalue {:.6e})",
            self.which, self.step, self.min_eigenvalue
        )
    }
}

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error("infeasible: {0}")]
    Infeasible(FeasibilityFailure),
    #[error("degenerate gain coupling at k={step}: reciprocal condition {rcond:.3e}")]
    SingularCoupling { step: usize, rcond: f64 },
    #[error("invalid system:\n{0}")]
    InvalidSystem(ValidationReport),
    #[error("gamma must be positive and finite, got {0}")]
    BadGamma(f64),
}

impl SolveError {
    pub fn feasibility(&self) -> Option<&FeasibilityFailure> {
        match self {
            SolveError::Infeasible(f) => Some(f),
            _ => None,
        }
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<(), SolveError> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(SolveError::BadGamma(gamma))
    }
}

pub(crate) fn check_pd(
    m: &crate::linalg::Mat,
    step: usize,
    which: Operator,
    opts: &SolverOptions,
) -> Result<(), SolveError> {
    let min = crate::linalg::min_eigenvalue(m);
    if min > opts.pd_tol {
        Ok(())
    } else {
        Err(SolveError::Infeasible(FeasibilityFailure {
            step,
            which,
            min_eigenvalue: min,
        }))
    }
}
