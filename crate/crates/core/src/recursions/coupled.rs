//! The four coupled recursions of mixed H2/H-infinity synthesis.
//!
//! Deviation values `(P1, Pt1)` and mean values `(Q1, Qt1)` are propagated
//! backward together. At each step the control gain and the worst-case
//! disturbance gain depend on each other (`G_u` contains `A + F1 U`,
//! `G_v` contains `A + B V`), so each pair is found from one stacked linear
//! system:
//!
//! ```text
//! [ H1(Pt)        F1^T Pt B ] [U]     [ F1^T Pt A           ]
//! [ B^T P F1      H(P)      ] [V] = - [ B^T P A + D^T P C   ]
//!
//! [ H1t(Qt)       F1^T Qt Bbar ] [Ubar]     [ F1^T Qt Abar                ]
//! [ Bbar^T Q F1   Ht(P, Q)     ] [Vbar] = - [ Bbar^T Q Abar + Dbar^T P Cbar ]
//! ```
//!
//! The right-hand sides separate by state column, so this is the vectorized
//! system written in block form.

use crate::linalg::{block2x2, quad_form, reciprocal_condition, solve_spd, symmetrize, Mat};
use crate::model::{MeanFieldSystem, StageParams};
use crate::moments::{Channel, LinearPolicy};

use super::{check_gamma, check_pd, Operator, SolveError, SolverOptions};

/// The four positivity-constrained operators at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct HOperators {
    /// `H(P1(k+1))`
    pub h: Mat,
    /// `Ht(P1(k+1), Q1(k+1))`
    pub h_bar: Mat,
    /// `H1(Pt1(k+1))`
    pub h1: Mat,
    /// `H1t(Pt1(k+1), Qt1(k+1))`
    pub h1_bar: Mat,
}

impl HOperators {
    pub fn evaluate(
        stage: &StageParams,
        p1: &Mat,
        q1: &Mat,
        pt1: &Mat,
        qt1: &Mat,
        gamma: f64,
    ) -> Self {
        let l = stage.b.ncols();
        let q = stage.f1.ncols();
        let g2 = Mat::identity(l, l) * (gamma * gamma);
        let (bb, db) = (stage.b_bar(), stage.d_bar());
        let f1 = &stage.f1;
        Self {
            h: symmetrize(
                &(&g2 + stage.b.transpose() * p1 * &stage.b + stage.d.transpose() * p1 * &stage.d),
            ),
            h_bar: symmetrize(&(&g2 + bb.transpose() * q1 * &bb + db.transpose() * p1 * &db)),
            h1: symmetrize(&(Mat::identity(q, q) + f1.transpose() * pt1 * f1)),
            h1_bar: symmetrize(&(Mat::identity(q, q) + f1.transpose() * qt1 * f1)),
        }
    }

    fn check(&self, step: usize, opts: &SolverOptions) -> Result<(), SolveError> {
        check_pd(&self.h, step, Operator::H, opts)?;
        check_pd(&self.h_bar, step, Operator::HBar, opts)?;
        check_pd(&self.h1, step, Operator::H1, opts)?;
        check_pd(&self.h1_bar, step, Operator::H1Bar, opts)
    }
}

/// Gains at one step: deviation gains `(u, v)` and mean gains
/// `(u_bar, v_bar) = (U + Ut, V + Vt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledGains {
    pub u: Mat,
    pub u_bar: Mat,
    pub v: Mat,
    pub v_bar: Mat,
}

/// Solves the two coupled gain pairs at one step from the continuation
/// values `(P1, Q1, Pt1, Qt1)` at `k+1`.
#[allow(clippy::too_many_arguments)]
pub fn coupled_gain_step(
    stage: &StageParams,
    p1: &Mat,
    q1: &Mat,
    pt1: &Mat,
    qt1: &Mat,
    gamma: f64,
    step: usize,
    opts: &SolverOptions,
) -> Result<(CoupledGains, HOperators), SolveError> {
    let ops = HOperators::evaluate(stage, p1, q1, pt1, qt1, gamma);
    ops.check(step, opts)?;
    let (a, b, c, d, f1) = (&stage.a, &stage.b, &stage.c, &stage.d, &stage.f1);
    let (ab, bb, cb, db) = (stage.a_bar(), stage.b_bar(), stage.c_bar(), stage.d_bar());
    let q = f1.ncols();

    let lhs = block2x2(
        &ops.h1,
        &(f1.transpose() * pt1 * b),
        &(b.transpose() * p1 * f1),
        &ops.h,
    );
    let rhs = stack(
        &(f1.transpose() * pt1 * a),
        &(b.transpose() * p1 * a + d.transpose() * p1 * c),
    );
    let dev = solve_stacked(&lhs, &rhs, step, opts)?;

    let lhs_bar = block2x2(
        &ops.h1_bar,
        &(f1.transpose() * qt1 * &bb),
        &(bb.transpose() * q1 * f1),
        &ops.h_bar,
    );
    let rhs_bar = stack(
        &(f1.transpose() * qt1 * &ab),
        &(bb.transpose() * q1 * &ab + db.transpose() * p1 * &cb),
    );
    let mean = solve_stacked(&lhs_bar, &rhs_bar, step, opts)?;

    let split = |m: Mat| {
        let top = m.rows(0, q).into_owned();
        let bottom = m.rows(q, m.nrows() - q).into_owned();
        (top, bottom)
    };
    let (u, v) = split(dev);
    let (u_bar, v_bar) = split(mean);
    Ok((CoupledGains { u, u_bar, v, v_bar }, ops))
}

fn stack(top: &Mat, bottom: &Mat) -> Mat {
    let mut out = Mat::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

fn solve_stacked(
    lhs: &Mat,
    rhs: &Mat,
    step: usize,
    opts: &SolverOptions,
) -> Result<Mat, SolveError> {
    let rcond = reciprocal_condition(lhs);
    if rcond.is_nan() || rcond < opts.cond_tol {
        return Err(SolveError::SingularCoupling { step, rcond });
    }
    lhs.clone()
        .lu()
        .solve(&(-rhs))
        .ok_or(SolveError::SingularCoupling { step, rcond })
}

/// Full solution of the coupled recursions at a fixed attenuation level.
#[derive(Debug, Clone, PartialEq)]
pub struct H2HinfSolution {
    pub p1: Vec<Mat>,
    pub q1: Vec<Mat>,
    pub pt1: Vec<Mat>,
    pub qt1: Vec<Mat>,
    pub u: Vec<Mat>,
    pub ut: Vec<Mat>,
    pub v: Vec<Mat>,
    pub vt: Vec<Mat>,
    /// Operators evaluated at step `k` (continuation values at `k+1`).
    pub h_ops: Vec<HOperators>,
    pub gamma: f64,
    /// `x0^T Qt1(0) x0`, the H2 cost under the saddle pair.
    pub h2_value: f64,
    /// `x0^T Q1(0) x0`, the attenuation cost under the saddle pair.
    pub hinf_value: f64,
}

impl H2HinfSolution {
    pub fn horizon(&self) -> usize {
        self.u.len() - 1
    }

    pub fn u_bar(&self, k: usize) -> Mat {
        &self.u[k] + &self.ut[k]
    }

    pub fn v_bar(&self, k: usize) -> Mat {
        &self.v[k] + &self.vt[k]
    }

    /// `u*(k) = U(k) x + Ut(k) E[x]`.
    pub fn control_policy(&self) -> LinearPolicy {
        LinearPolicy::new(Channel::Control, self.u.clone(), self.ut.clone())
    }

    /// `v*(k) = V(k) x + Vt(k) E[x]`.
    pub fn disturbance_policy(&self) -> LinearPolicy {
        LinearPolicy::new(Channel::Disturbance, self.v.clone(), self.vt.clone())
    }

    /// The eight named sequences, in export order.
    pub fn sequences(&self) -> [(&'static str, &[Mat]); 8] {
        [
            ("P1", &self.p1),
            ("Q1", &self.q1),
            ("Pt1", &self.pt1),
            ("Qt1", &self.qt1),
            ("U", &self.u),
            ("Ut", &self.ut),
            ("V", &self.v),
            ("Vt", &self.vt),
        ]
    }
}

/// Backward recursion for the coupled equations. Starting from zero
/// terminal values, each step checks the four operators, solves for the
/// gains, then updates the four value matrices.
pub fn h2hinf_solve(system: &MeanFieldSystem, gamma: f64) -> Result<H2HinfSolution, SolveError> {
    h2hinf_solve_with(system, gamma, &SolverOptions::default())
}

pub fn h2hinf_solve_with(
    system: &MeanFieldSystem,
    gamma: f64,
    opts: &SolverOptions,
) -> Result<H2HinfSolution, SolveError> {
    check_gamma(gamma)?;
    let report = system.validate();
    if !report.is_valid() {
        return Err(SolveError::InvalidSystem(report));
    }
    let dims = system.dims;
    let (n, l, q, horizon) = (dims.n, dims.l, dims.q, dims.horizon);
    let zero_n = Mat::zeros(n, n);
    let mut p1 = vec![zero_n.clone(); horizon + 2];
    let mut q1 = p1.clone();
    let mut pt1 = p1.clone();
    let mut qt1 = p1.clone();
    let mut u = vec![Mat::zeros(q, n); horizon + 1];
    let mut ut = u.clone();
    let mut v = vec![Mat::zeros(l, n); horizon + 1];
    let mut vt = v.clone();
    let mut h_ops = Vec::with_capacity(horizon + 1);

    for k in (0..=horizon).rev() {
        let stage = system.stage(k);
        let (gains, ops) = coupled_gain_step(
            stage,
            &p1[k + 1],
            &q1[k + 1],
            &pt1[k + 1],
            &qt1[k + 1],
            gamma,
            k,
            opts,
        )?;
        let next = ValueStep::new(
            stage,
            &gains,
            &ops,
            &p1[k + 1],
            &q1[k + 1],
            &pt1[k + 1],
            &qt1[k + 1],
        );
        p1[k] = next.p1;
        q1[k] = next.q1;
        pt1[k] = next.pt1;
        qt1[k] = next.qt1;
        ut[k] = &gains.u_bar - &gains.u;
        vt[k] = &gains.v_bar - &gains.v;
        u[k] = gains.u;
        v[k] = gains.v;
        h_ops.push(ops);
    }
    h_ops.reverse();
    let h2_value = quad_form(&qt1[0], &system.x0);
    let hinf_value = quad_form(&q1[0], &system.x0);
    Ok(H2HinfSolution {
        p1,
        q1,
        pt1,
        qt1,
        u,
        ut,
        v,
        vt,
        h_ops,
        gamma,
        h2_value,
        hinf_value,
    })
}

/// Largest per-entry residual of the eight defining identities over all
/// steps, written without inverses (`H V + G_u^T = 0`,
/// `P1 = (A + F1 U)^T P1 (A + F1 U) + ... + G_u V`, and so on).
pub fn coupled_residual(system: &MeanFieldSystem, sol: &H2HinfSolution) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..=system.dims.horizon {
        let s = system.stage(k);
        let (p, q, pt, qt) = (
            &sol.p1[k + 1],
            &sol.q1[k + 1],
            &sol.pt1[k + 1],
            &sol.qt1[k + 1],
        );
        let ops = &sol.h_ops[k];
        let (a, b, c, d, f1) = (&s.a, &s.b, &s.c, &s.d, &s.f1);
        let (ab, bb, cb, db) = (s.a_bar(), s.b_bar(), s.c_bar(), s.d_bar());
        let (u, v, ub, vb) = (&sol.u[k], &sol.v[k], sol.u_bar(k), sol.v_bar(k));
        let phi_w = s.output_weight();
        let eye = Mat::identity(a.nrows(), a.ncols());

        let a_u = a + f1 * u;
        let g_u = a_u.transpose() * p * b + c.transpose() * p * d;
        let a_v = a + b * v;
        let c_v = c + d * v;
        let g_v = a_v.transpose() * pt * f1;
        let ab_u = &ab + f1 * &ub;
        let g_ub = ab_u.transpose() * q * &bb + cb.transpose() * p * &db;
        let ab_v = &ab + &bb * &vb;
        let cb_v = &cb + &db * &vb;
        let g_vb = ab_v.transpose() * qt * f1;

        let residuals = [
            &ops.h * v + g_u.transpose(),
            &ops.h1 * u + g_v.transpose(),
            &ops.h_bar * &vb + g_ub.transpose(),
            &ops.h1_bar * &ub + g_vb.transpose(),
            &sol.p1[k]
                - (a_u.transpose() * p * &a_u + c.transpose() * p * c - &phi_w - u.transpose() * u
                    + &g_u * v),
            &sol.q1[k]
                - (ab_u.transpose() * q * &ab_u + cb.transpose() * p * &cb
                    - &phi_w
                    - ub.transpose() * &ub
                    + &g_ub * &vb),
            &sol.pt1[k]
                - (a_v.transpose() * pt * &a_v
                    + c_v.transpose() * pt * &c_v
                    + &phi_w
                    + &eye
                    + &g_v * u),
            &sol.qt1[k]
                - (ab_v.transpose() * qt * &ab_v
                    + cb_v.transpose() * pt * &cb_v
                    + &phi_w
                    + &eye
                    + &g_vb * &ub),
        ];
        worst = residuals.iter().map(|r| r.amax()).fold(worst, f64::max);
    }
    worst
}

struct ValueStep {
    p1: Mat,
    q1: Mat,
    pt1: Mat,
    qt1: Mat,
}

impl ValueStep {
    fn new(
        stage: &StageParams,
        g: &CoupledGains,
        ops: &HOperators,
        p1: &Mat,
        q1: &Mat,
        pt1: &Mat,
        qt1: &Mat,
    ) -> Self {
        let (a, b, c, d, f1) = (&stage.a, &stage.b, &stage.c, &stage.d, &stage.f1);
        let (ab, bb, cb, db) = (stage.a_bar(), stage.b_bar(), stage.c_bar(), stage.d_bar());
        let phi_w = stage.output_weight();
        let eye = Mat::identity(a.nrows(), a.ncols());

        // attenuation pair, closed by the control gains
        let a_u = a + f1 * &g.u;
        let g_u = a_u.transpose() * p1 * b + c.transpose() * p1 * d;
        let p1_new = a_u.transpose() * p1 * &a_u + c.transpose() * p1 * c
            - &phi_w
            - g.u.transpose() * &g.u
            - &g_u * solve_spd(&ops.h, &g_u.transpose()).expect("H is positive definite");

        let ab_u = &ab + f1 * &g.u_bar;
        let g_ub = ab_u.transpose() * q1 * &bb + cb.transpose() * p1 * &db;
        let q1_new = ab_u.transpose() * q1 * &ab_u + cb.transpose() * p1 * &cb
            - &phi_w
            - g.u_bar.transpose() * &g.u_bar
            - &g_ub * solve_spd(&ops.h_bar, &g_ub.transpose()).expect("Ht is positive definite");

        // H2 pair, closed by the worst-case disturbance gains
        let a_v = a + b * &g.v;
        let c_v = c + d * &g.v;
        let g_v = a_v.transpose() * pt1 * f1;
        let pt1_new = a_v.transpose() * pt1 * &a_v + c_v.transpose() * pt1 * &c_v + &phi_w + &eye
            - &g_v * solve_spd(&ops.h1, &g_v.transpose()).expect("H1 is positive definite");

        let ab_v = &ab + &bb * &g.v_bar;
        let cb_v = &cb + &db * &g.v_bar;
        let g_vb = ab_v.transpose() * qt1 * f1;
        let qt1_new =
            ab_v.transpose() * qt1 * &ab_v + cb_v.transpose() * pt1 * &cb_v + &phi_w + &eye
                - &g_vb
                    * solve_spd(&ops.h1_bar, &g_vb.transpose()).expect("H1t is positive definite");

        Self {
            p1: symmetrize(&p1_new),
            q1: symmetrize(&q1_new),
            pt1: symmetrize(&pt1_new),
            qt1: symmetrize(&qt1_new),
        }
    }
}
