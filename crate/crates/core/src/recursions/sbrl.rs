use crate::linalg::{solve_spd, symmetrize, Mat};
use crate::model::MeanFieldSystem;

use super::operators::sbrl_operators;
use super::{check_gamma, check_pd, Operator, SolveError, SolverOptions};

/// Solution of the constrained bounded-real recursion
///
/// ```text
/// P(k) = L - G H^{-1} G^T,        Q(k) = Lt - Gt Ht^{-1} Gt^T,
/// P(K+1) = Q(K+1) = 0,            H > 0, Ht > 0.
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SbrlSolution {
    pub p: Vec<Mat>,
    pub q: Vec<Mat>,
    pub gamma: f64,
    /// Worst-case deviation gain `-H^{-1} G^T`, for `k = 0..=K`.
    pub v: Vec<Mat>,
    /// Worst-case mean gain `-Ht^{-1} Gt^T`.
    pub v_bar: Vec<Mat>,
}

impl SbrlSolution {
    /// `v_bar - v`, the gain applied to `E[x]` in `v x + vt E[x]`.
    pub fn vt(&self, k: usize) -> Mat {
        &self.v_bar[k] - &self.v[k]
    }
}

/// Runs the bounded-real recursion on the uncontrolled part of `system`
/// (`F1` and `Psi` are ignored).
pub fn sbrl_solve(system: &MeanFieldSystem, gamma: f64) -> Result<SbrlSolution, SolveError> {
    sbrl_solve_with(system, gamma, &SolverOptions::default())
}

pub fn sbrl_solve_with(
    system: &MeanFieldSystem,
    gamma: f64,
    opts: &SolverOptions,
) -> Result<SbrlSolution, SolveError> {
    check_gamma(gamma)?;
    let report = system.validate();
    if !report.is_valid() {
        return Err(SolveError::InvalidSystem(report));
    }
    let n = system.dims.n;
    let horizon = system.horizon();
    let mut p = vec![Mat::zeros(n, n); horizon + 2];
    let mut q = vec![Mat::zeros(n, n); horizon + 2];
    let mut v = vec![Mat::zeros(system.dims.l, n); horizon + 1];
    let mut v_bar = v.clone();

    for k in (0..=horizon).rev() {
        let ops = sbrl_operators(system.stage(k), &p[k + 1], &q[k + 1], gamma);
        check_pd(&ops.h, k, Operator::H, opts)?;
        check_pd(&ops.ht, k, Operator::HBar, opts)?;
        let hinv_gt = solve_spd(&ops.h, &ops.g.transpose()).expect("H is positive definite");
        let htinv_gtt = solve_spd(&ops.ht, &ops.gt.transpose()).expect("Ht is positive definite");
        p[k] = symmetrize(&(&ops.l - &ops.g * &hinv_gt));
        q[k] = symmetrize(&(&ops.lt - &ops.gt * &htinv_gtt));
        v[k] = -hinv_gt;
        v_bar[k] = -htinv_gtt;
    }
    Ok(SbrlSolution {
        p,
        q,
        gamma,
        v,
        v_bar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;
    use crate::model::{Dimensions, StageParams};

    #[test]
    fn zero_system_has_zero_solution() {
        let dims = Dimensions {
            n: 2,
            l: 2,
            q: 1,
            m_phi: 1,
            horizon: 3,
        };
        let sys = MeanFieldSystem::constant(dims, StageParams::zeros(&dims), Vector::zeros(2));
        for gamma in [1e-3, 0.5, 10.0] {
            let sol = sbrl_solve(&sys, gamma).unwrap();
            assert!(sol.p.iter().chain(&sol.q).all(|m| m.amax() == 0.0));
        }
    }

    #[test]
    fn rejects_bad_gamma() {
        let dims = Dimensions {
            n: 1,
            l: 1,
            q: 1,
            m_phi: 1,
            horizon: 0,
        };
        let sys = MeanFieldSystem::constant(dims, StageParams::zeros(&dims), Vector::zeros(1));
        assert!(matches!(
            sbrl_solve(&sys, 0.0),
            Err(SolveError::BadGamma(_))
        ));
        assert!(matches!(
            sbrl_solve(&sys, f64::NAN),
            Err(SolveError::BadGamma(_))
        ));
    }

    #[test]
    fn scalar_infeasibility_is_reported_at_the_right_step() {
        // P(K) = -phi^2, so H at step K-1 is gamma^2 - phi^2 (b^2 + d^2).
        let dims = Dimensions {
            n: 1,
            l: 1,
            q: 1,
            m_phi: 1,
            horizon: 3,
        };
        let mut s = StageParams::zeros(&dims);
        s.b[(0, 0)] = 1.0;
        s.d[(0, 0)] = 1.0;
        s.phi[(0, 0)] = 1.0;
        let sys = MeanFieldSystem::constant(dims, s, Vector::zeros(1));
        let err = sbrl_solve(&sys, 1.2).unwrap_err();
        let f = err.feasibility().copied().unwrap();
        assert_eq!(f.step, 2);
        assert_eq!(f.which, Operator::H);
        assert!((f.min_eigenvalue - (1.44 - 2.0)).abs() < 1e-12);
    }
}
