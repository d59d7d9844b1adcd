use crate::linalg::{solve_spd, symmetrize, Mat};
use crate::model::{LqStage, LqSystem};

use super::{check_pd, Operator, SolveError, SolverOptions};

/// LQ operators at one step, evaluated at `(Pt(k+1), Qt(k+1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqOperators {
    /// `A1^T Pt A1 + B1^T Pt B1 + Phi1^T Phi1`
    pub l1: Mat,
    /// `A1^T Pt F1`
    pub g1: Mat,
    /// `I + F1^T Pt F1`
    pub h1: Mat,
    /// `A1bar^T Qt A1bar + B1bar^T Pt B1bar + Phi1^T Phi1`
    pub l1t: Mat,
    /// `A1bar^T Qt F1`
    pub g1t: Mat,
    /// `I + F1^T Qt F1`
    pub h1t: Mat,
}

pub fn lq_operators(stage: &LqStage, pt_next: &Mat, qt_next: &Mat) -> LqOperators {
    let q = stage.f1.ncols();
    let eye = Mat::identity(q, q);
    let phi_w = stage.phi1.transpose() * &stage.phi1;
    let (a1, b1, f1) = (&stage.a1, &stage.b1, &stage.f1);
    let (a1b, b1b) = (stage.a1_bar(), stage.b1_bar());

    let l1 = symmetrize(&(a1.transpose() * pt_next * a1 + b1.transpose() * pt_next * b1 + &phi_w));
    let g1 = a1.transpose() * pt_next * f1;
    let h1 = symmetrize(&(&eye + f1.transpose() * pt_next * f1));
    let l1t =
        symmetrize(&(a1b.transpose() * qt_next * &a1b + b1b.transpose() * pt_next * &b1b + &phi_w));
    let g1t = a1b.transpose() * qt_next * f1;
    let h1t = symmetrize(&(&eye + f1.transpose() * qt_next * f1));
    LqOperators {
        l1,
        g1,
        h1,
        l1t,
        g1t,
        h1t,
    }
}

/// Solution of the mean-field LQ recursion together with the optimal
/// feedback `u = U x + Ut E[x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqSolution {
    pub pt: Vec<Mat>,
    pub qt: Vec<Mat>,
    pub u: Vec<Mat>,
    pub ut: Vec<Mat>,
    /// `x0^T Qt(0) x0`.
    pub optimal_value: f64,
}

impl LqSolution {
    /// Gain acting on the mean, `U + Ut`.
    pub fn u_bar(&self, k: usize) -> Mat {
        &self.u[k] + &self.ut[k]
    }
}

pub fn lq_solve(system: &LqSystem) -> Result<LqSolution, SolveError> {
    lq_solve_with(system, &SolverOptions::default())
}

pub fn lq_solve_with(system: &LqSystem, opts: &SolverOptions) -> Result<LqSolution, SolveError> {
    let report = system.validate();
    if !report.is_valid() {
        return Err(SolveError::InvalidSystem(report));
    }
    let n = system.dims.n;
    let q = system.dims.q;
    let horizon = system.dims.horizon;
    let mut pt = vec![Mat::zeros(n, n); horizon + 2];
    let mut qt = vec![Mat::zeros(n, n); horizon + 2];
    let mut u = vec![Mat::zeros(q, n); horizon + 1];
    let mut ut = u.clone();

    for k in (0..=horizon).rev() {
        let ops = lq_operators(&system.stages[k], &pt[k + 1], &qt[k + 1]);
        check_pd(&ops.h1, k, Operator::H1, opts)?;
        check_pd(&ops.h1t, k, Operator::H1Bar, opts)?;
        let gain = solve_spd(&ops.h1, &ops.g1.transpose()).expect("H1 is positive definite");
        let gain_bar = solve_spd(&ops.h1t, &ops.g1t.transpose()).expect("H1t is positive definite");
        pt[k] = symmetrize(&(&ops.l1 - &ops.g1 * &gain));
        qt[k] = symmetrize(&(&ops.l1t - &ops.g1t * &gain_bar));
        u[k] = -&gain;
        ut[k] = gain - gain_bar;
    }
    let optimal_value = crate::linalg::quad_form(&qt[0], &system.x0);
    Ok(LqSolution {
        pt,
        qt,
        u,
        ut,
        optimal_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;
    use crate::model::Dimensions;

    fn scalar(a: f64, b: f64, f: f64, phi: f64, horizon: usize) -> LqSystem {
        let dims = Dimensions {
            n: 1,
            l: 1,
            q: 1,
            m_phi: 1,
            horizon,
        };
        let m = |v: f64| Mat::from_element(1, 1, v);
        let stage = LqStage {
            a1: m(a),
            at1: m(0.0),
            b1: m(b),
            bt1: m(0.0),
            f1: m(f),
            phi1: m(phi),
            psi1: m(1.0),
        };
        LqSystem {
            dims,
            stages: vec![stage; horizon + 1],
            x0: Vector::from_element(1, 1.0),
        }
    }

    #[test]
    fn single_step_value_is_output_weight() {
        let sol = lq_solve(&scalar(0.9, 0.4, 0.7, 1.3, 0)).unwrap();
        assert_eq!(sol.pt[0][(0, 0)], 1.3 * 1.3);
        assert_eq!(sol.qt[0][(0, 0)], 1.3 * 1.3);
        assert_eq!(sol.u[0][(0, 0)], 0.0);
        assert_eq!(sol.ut[0][(0, 0)], 0.0);
        assert_eq!(sol.optimal_value, 1.3 * 1.3);
    }

    #[test]
    fn scalar_two_step_matches_hand_computation() {
        let (a, b, f, phi) = (0.9, 0.4, 0.7, 1.3);
        let sol = lq_solve(&scalar(a, b, f, phi, 1)).unwrap();
        let p1 = phi * phi;
        let expected =
            a * a * p1 + b * b * p1 + phi * phi - (a * p1 * f).powi(2) / (1.0 + f * f * p1);
        assert!((sol.pt[0][(0, 0)] - expected).abs() < 1e-14);
        assert!((sol.u[0][(0, 0)] + a * p1 * f / (1.0 + f * f * p1)).abs() < 1e-14);
    }

    #[test]
    fn zero_output_weight_gives_zero_everything() {
        let sol = lq_solve(&scalar(0.9, 0.4, 0.7, 0.0, 4)).unwrap();
        assert!(sol
            .pt
            .iter()
            .chain(&sol.qt)
            .chain(&sol.u)
            .chain(&sol.ut)
            .all(|m| m.amax() == 0.0));
        assert_eq!(sol.optimal_value, 0.0);
    }
}
