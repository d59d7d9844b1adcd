//! Quadratic decomposition of the attenuation cost.
//!
//! For arbitrary symmetric sequences `P(0..=K+1)`, `Q(0..=K+1)`,
//!
//! ```text
//! J = sum_k E[(e, dv)^T Mt(P) (e, dv)] + sum_k (m, Ev)^T St(P, Q) (m, Ev)
//!     - E[e(K+1)^T P(K+1) e(K+1)] + m(0)^T Q(0) m(0) - m(K+1)^T Q(K+1) m(K+1)
//! ```
//!
//! with `dv = v - E[v]`. A linear control policy is folded into the drift and
//! the output weight, so the identity holds for the closed loop as well.

use crate::linalg::{block2x2, quad_form, trace_product, Mat, Vector};
use crate::model::{MeanFieldSystem, StageParams};

use super::{propagate_moments, Channel, LinearPolicy, MomentsError, ResolvedPolicy};

/// The two kernel matrices at one step, of size `(n + l) x (n + l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionKernels {
    pub m_tilde: Mat,
    pub s_tilde: Mat,
}

/// Evaluates the deviation kernel `Mt(P)` and mean kernel `St(P, Q)` at one
/// step. `u` and `u_bar` are the control's deviation and mean gains.
#[allow(clippy::too_many_arguments)]
pub fn decomposition_kernels(
    stage: &StageParams,
    u: &Mat,
    u_bar: &Mat,
    p: &Mat,
    p_next: &Mat,
    q: &Mat,
    q_next: &Mat,
    gamma: f64,
) -> DecompositionKernels {
    let l = stage.b.ncols();
    let g2 = Mat::identity(l, l) * (gamma * gamma);
    let phi_w = stage.output_weight();

    let a = &stage.a + &stage.f1 * u;
    let (b, c, d) = (&stage.b, &stage.c, &stage.d);
    let m11 =
        -p + a.transpose() * p_next * &a + c.transpose() * p_next * c - &phi_w - u.transpose() * u;
    let m12 = a.transpose() * p_next * b + c.transpose() * p_next * d;
    let m22 = &g2 + b.transpose() * p_next * b + d.transpose() * p_next * d;

    let ab = stage.a_bar() + &stage.f1 * u_bar;
    let (bb, cb, db) = (stage.b_bar(), stage.c_bar(), stage.d_bar());
    let s11 = -q + ab.transpose() * q_next * &ab + cb.transpose() * p_next * &cb
        - &phi_w
        - u_bar.transpose() * u_bar;
    let s12 = ab.transpose() * q_next * &bb + cb.transpose() * p_next * &db;
    let s22 = &g2 + bb.transpose() * q_next * &bb + db.transpose() * p_next * &db;

    DecompositionKernels {
        m_tilde: block2x2(&m11, &m12, &m12.transpose(), &m22),
        s_tilde: block2x2(&s11, &s12, &s12.transpose(), &s22),
    }
}

/// Returns `(lhs, rhs)`: the attenuation cost computed from per-step
/// energies, and the same quantity rebuilt from the kernels and boundary
/// terms. Both use exact moments.
#[allow(clippy::too_many_arguments)]
pub fn lemma_decomposition_check(
    system: &MeanFieldSystem,
    p_seq: &[Mat],
    q_seq: &[Mat],
    control: Option<&LinearPolicy>,
    disturbance: Option<&LinearPolicy>,
    x0: &Vector,
    gamma: f64,
) -> Result<(f64, f64), MomentsError> {
    let dims = &system.dims;
    let len = dims.stages() + 1;
    for (what, seq) in [("P", p_seq), ("Q", q_seq)] {
        if seq.len() != len {
            return Err(MomentsError::SequenceLength {
                what,
                expected: len,
                found: seq.len(),
            });
        }
    }
    if control.is_some_and(LinearPolicy::has_offsets) {
        return Err(MomentsError::ControlOffsets);
    }
    let traj = propagate_moments(system, control, disturbance, x0)?;
    let ctl = ResolvedPolicy::resolve(control, Channel::Control, dims)?;
    let dist = ResolvedPolicy::resolve(disturbance, Channel::Disturbance, dims)?;

    let lhs =
        gamma * gamma * traj.nu_energy.iter().sum::<f64>() - traj.z_energy.iter().sum::<f64>();

    let mut rhs = 0.0;
    for k in 0..dims.stages() {
        let kern = decomposition_kernels(
            system.stage(k),
            ctl.gain(k),
            ctl.mean_gain(k),
            &p_seq[k],
            &p_seq[k + 1],
            &q_seq[k],
            &q_seq[k + 1],
            gamma,
        );
        // joint covariance of (e, v - E v) with v - E v = V e
        let y = &traj.cov[k];
        let v = dist.gain(k);
        let yv = y * v.transpose();
        let joint = block2x2(y, &yv, &yv.transpose(), &(v * &yv));
        rhs += trace_product(&kern.m_tilde, &joint);

        let mut mu = Vector::zeros(dims.n + dims.l);
        mu.rows_mut(0, dims.n).copy_from(&traj.mean[k]);
        mu.rows_mut(dims.n, dims.l)
            .copy_from(&traj.mean_disturbance[k]);
        rhs += quad_form(&kern.s_tilde, &mu);
    }
    let last = dims.stages();
    rhs -= trace_product(&p_seq[last], &traj.cov[last]);
    rhs += quad_form(&q_seq[0], &traj.mean[0]);
    rhs -= quad_form(&q_seq[last], &traj.mean[last]);
    Ok((lhs, rhs))
}
