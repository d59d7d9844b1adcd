//! Exact first and second moments of the closed loop.
//!
//! With `e = x - E[x]`, `m = E[x]`, `Y = E[e e^T]` and policies
//! `u = U x + Ut m + uo`, `v = V x + Vt m + vo`:
//!
//! ```text
//! m(k+1) = Abar m + Bbar E[v] + F1 E[u]
//! e(k+1) = (A + F1 U + B V) e + ((C + D V) e + Cbar m + Dbar E[v]) w(k)
//! Y(k+1) = M1 Y M1^T + M2 Y M2^T + r r^T,    r = Cbar m + Dbar E[v]
//! ```
//!
//! The cross terms vanish because `w(k)` has zero mean and is independent of
//! `x(k)`. `Y(0) = 0` since `x0` is deterministic.

use thiserror::Error;

use crate::linalg::{quad_form, symmetrize, trace_product, Mat, Vector};
use crate::model::{Dimensions, MeanFieldSystem};

mod lemma;
mod norm;
mod policy;
mod saddle;

pub use lemma::{decomposition_kernels, lemma_decomposition_check, DecompositionKernels};
pub use norm::{norm_lower_bound, NormBound, NormBoundOptions};
pub use policy::{Channel, LinearPolicy};
pub use saddle::{saddle_check, SaddleReport};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MomentsError {
    #[error("expected a {expected} policy, got a {found} policy")]
    WrongChannel { expected: Channel, found: Channel },
    #[error("{channel} policy has {found} {what}, expected {expected}")]
    PolicyLength {
        channel: Channel,
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{channel} policy entry at k={k} is {}x{}, expected {}x{}", found.0, found.1, expected.0, expected.1)]
    PolicyShape {
        channel: Channel,
        k: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("x0 has length {found}, expected {expected}")]
    InitialState { expected: usize, found: usize },
    #[error("{what} sequence has length {found}, expected {expected}")]
    SequenceLength {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("control offsets are not supported here")]
    ControlOffsets,
    #[error("at least one policy must be sampled")]
    NoPolicies,
}

/// Moments along the closed-loop trajectory.
///
/// `mean` and `cov` have `K+2` entries; the per-step energies have `K+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrajectory {
    pub mean: Vec<Vector>,
    pub cov: Vec<Mat>,
    pub mean_control: Vec<Vector>,
    pub mean_disturbance: Vec<Vector>,
    /// `E ||z(k)||^2 = E ||Phi x||^2 + E ||u||^2`.
    pub z_energy: Vec<f64>,
    pub u_energy: Vec<f64>,
    pub nu_energy: Vec<f64>,
    pub x_energy: Vec<f64>,
}

impl MomentTrajectory {
    /// `E[x x^T] = Y + m m^T` at step `k`.
    pub fn second_moment(&self, k: usize) -> Mat {
        &self.cov[k] + &self.mean[k] * self.mean[k].transpose()
    }
}

pub(crate) struct ResolvedPolicy {
    gains: Vec<Mat>,
    mean_gains_total: Vec<Mat>,
    offsets: Vec<Vector>,
}

impl ResolvedPolicy {
    pub(crate) fn resolve(
        policy: Option<&LinearPolicy>,
        channel: Channel,
        dims: &Dimensions,
    ) -> Result<Self, MomentsError> {
        let owned;
        let policy = match policy {
            Some(p) => {
                p.check(dims, channel)?;
                p
            }
            None => {
                owned = LinearPolicy::zero(channel, dims);
                &owned
            }
        };
        Ok(Self {
            gains: policy.gains.clone(),
            mean_gains_total: (0..dims.stages()).map(|k| policy.mean_gain(k)).collect(),
            offsets: policy.offsets.clone(),
        })
    }

    pub(crate) fn gain(&self, k: usize) -> &Mat {
        &self.gains[k]
    }

    pub(crate) fn mean_gain(&self, k: usize) -> &Mat {
        &self.mean_gains_total[k]
    }

    pub(crate) fn mean_value(&self, k: usize, m: &Vector) -> Vector {
        &self.mean_gains_total[k] * m + &self.offsets[k]
    }
}

/// Propagates `E[x]` and `Cov[x]` exactly through the closed loop.
/// A missing policy means that channel is identically zero.
pub fn propagate_moments(
    system: &MeanFieldSystem,
    control: Option<&LinearPolicy>,
    disturbance: Option<&LinearPolicy>,
    x0: &Vector,
) -> Result<MomentTrajectory, MomentsError> {
    let dims = &system.dims;
    if x0.len() != dims.n {
        return Err(MomentsError::InitialState {
            expected: dims.n,
            found: x0.len(),
        });
    }
    let ctl = ResolvedPolicy::resolve(control, Channel::Control, dims)?;
    let dist = ResolvedPolicy::resolve(disturbance, Channel::Disturbance, dims)?;
    let stages = dims.stages();

    let mut mean = Vec::with_capacity(stages + 1);
    let mut cov = Vec::with_capacity(stages + 1);
    let mut mean_control = Vec::with_capacity(stages);
    let mut mean_disturbance = Vec::with_capacity(stages);
    let mut z_energy = Vec::with_capacity(stages);
    let mut u_energy = Vec::with_capacity(stages);
    let mut nu_energy = Vec::with_capacity(stages);
    let mut x_energy = Vec::with_capacity(stages);

    let mut m = x0.clone();
    let mut y = Mat::zeros(dims.n, dims.n);
    for k in 0..stages {
        let s = system.stage(k);
        let (u, v) = (ctl.gain(k), dist.gain(k));
        let eu = ctl.mean_value(k, &m);
        let ev = dist.mean_value(k, &m);

        let phi_w = s.output_weight();
        let ue = trace_product(&(u.transpose() * u), &y) + eu.norm_squared();
        z_energy.push(trace_product(&phi_w, &y) + quad_form(&phi_w, &m) + ue);
        u_energy.push(ue);
        nu_energy.push(trace_product(&(v.transpose() * v), &y) + ev.norm_squared());
        x_energy.push(y.trace() + m.norm_squared());

        let drift = &s.a + &s.f1 * u + &s.b * v;
        let diffusion = &s.c + &s.d * v;
        let r = s.c_bar() * &m + s.d_bar() * &ev;
        let y_next = &drift * &y * drift.transpose()
            + &diffusion * &y * diffusion.transpose()
            + &r * r.transpose();
        let m_next = s.a_bar() * &m + s.b_bar() * &ev + &s.f1 * &eu;

        mean.push(m);
        cov.push(y);
        mean_control.push(eu);
        mean_disturbance.push(ev);
        m = m_next;
        y = symmetrize(&y_next);
    }
    mean.push(m);
    cov.push(y);

    Ok(MomentTrajectory {
        mean,
        cov,
        mean_control,
        mean_disturbance,
        z_energy,
        u_energy,
        nu_energy,
        x_energy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCost {
    pub k: usize,
    pub nu_energy: f64,
    pub z_energy: f64,
    pub x_energy: f64,
}

/// Quadratic costs along a closed-loop trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown {
    pub gamma: f64,
    /// `sum_k E[gamma^2 ||v||^2 - ||z||^2]`.
    pub jk: f64,
    /// H2 cost minimized by the coupled synthesis:
    /// `sum_k E[||z||^2 + ||x||^2]`, i.e. `output_energy + state_energy`.
    pub j2: f64,
    /// `sum_k E ||z||^2` (the plain LQ cost).
    pub output_energy: f64,
    /// `sum_k E ||x||^2`.
    pub state_energy: f64,
    /// `sum_k E ||v||^2`.
    pub disturbance_energy: f64,
    pub per_step: Vec<StepCost>,
}

pub fn costs_from_trajectory(traj: &MomentTrajectory, gamma: f64) -> CostBreakdown {
    let output_energy: f64 = traj.z_energy.iter().sum();
    let state_energy: f64 = traj.x_energy.iter().sum();
    let disturbance_energy: f64 = traj.nu_energy.iter().sum();
    let per_step = (0..traj.z_energy.len())
        .map(|k| StepCost {
            k,
            nu_energy: traj.nu_energy[k],
            z_energy: traj.z_energy[k],
            x_energy: traj.x_energy[k],
        })
        .collect();
    CostBreakdown {
        gamma,
        jk: gamma * gamma * disturbance_energy - output_energy,
        j2: output_energy + state_energy,
        output_energy,
        state_energy,
        disturbance_energy,
        per_step,
    }
}

pub fn evaluate_costs(
    system: &MeanFieldSystem,
    control: Option<&LinearPolicy>,
    disturbance: Option<&LinearPolicy>,
    x0: &Vector,
    gamma: f64,
) -> Result<CostBreakdown, MomentsError> {
    let traj = propagate_moments(system, control, disturbance, x0)?;
    Ok(costs_from_trajectory(&traj, gamma))
}
