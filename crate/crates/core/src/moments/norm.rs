//! Sampled lower bound on the disturbance-to-output gain from rest.
//!
//! For a fixed pair of disturbance gains `(V, Vt)` and `x0 = 0`, both
//! `sum E||z||^2` and `sum E||v||^2` are quadratic forms in the stacked
//! open-loop offsets `o`. The best offsets for those gains are the top
//! generalized eigenvector of the pair, so each sampled gain pair contributes
//! its exact best ratio over the excitation. Every reported ratio is realized
//! by a concrete policy, hence a lower bound on the induced norm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::linalg::{Mat, Vector};
use crate::model::MeanFieldSystem;

use super::{propagate_moments, Channel, LinearPolicy, MomentsError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBoundOptions {
    pub n_policies: usize,
    pub seed: u64,
    /// Sampled gain entries are `s * N(0, 1)` with `s` log-uniform here.
    pub gain_scale: (f64, f64),
    /// Cap on the number of optimized offset coordinates; offsets are
    /// optimized over the first `max_offset_dim / l` steps.
    pub max_offset_dim: usize,
}

impl Default for NormBoundOptions {
    fn default() -> Self {
        Self {
            n_policies: 1000,
            seed: 0x5eed,
            gain_scale: (1e-3, 1.0),
            max_offset_dim: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NormBound {
    pub best_ratio: f64,
    pub best_policy: LinearPolicy,
    /// Number of gain candidates evaluated (samples plus fixed candidates).
    pub evaluated: usize,
}

/// Maximizes `sqrt(sum E||z||^2 / sum E||v||^2)` from `x0 = 0` over sampled
/// linear mean-field disturbance policies with optimized open-loop
/// excitation. The zero-gain candidate and the gains of every policy in
/// `candidates` (for example the synthesized worst case) are always tried.
pub fn norm_lower_bound(
    system: &MeanFieldSystem,
    control: Option<&LinearPolicy>,
    candidates: &[LinearPolicy],
    opts: &NormBoundOptions,
) -> Result<NormBound, MomentsError> {
    if opts.n_policies == 0 {
        return Err(MomentsError::NoPolicies);
    }
    let dims = system.dims;
    if let Some(c) = control {
        c.check(&dims, Channel::Control)?;
        if c.has_offsets() {
            return Err(MomentsError::ControlOffsets);
        }
    }
    for c in candidates {
        c.check(&dims, Channel::Disturbance)?;
    }

    let mut gain_sets = vec![LinearPolicy::zero(Channel::Disturbance, &dims)];
    gain_sets.extend(
        candidates.iter().map(|c| {
            LinearPolicy::new(Channel::Disturbance, c.gains.clone(), c.mean_gains.clone())
        }),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (lo, hi) = opts.gain_scale;
    for _ in 0..opts.n_policies {
        let scale = (lo.ln() + (hi.ln() - lo.ln()) * rng.gen::<f64>()).exp();
        let mut sample = |_: usize| -> Mat {
            Mat::from_fn(dims.l, dims.n, |_, _| {
                scale * rng.sample::<f64, _>(StandardNormal)
            })
        };
        let gains = (0..dims.stages()).map(&mut sample).collect();
        let mean_gains = (0..dims.stages()).map(&mut sample).collect();
        gain_sets.push(LinearPolicy::new(Channel::Disturbance, gains, mean_gains));
    }

    let steps = (opts.max_offset_dim / dims.l).clamp(1, dims.stages());
    let x0 = Vector::zeros(dims.n);
    let results: Vec<(f64, LinearPolicy)> = gain_sets
        .into_par_iter()
        .map(|policy| best_excitation(system, control, policy, steps, &x0))
        .collect::<Result<_, _>>()?;

    let evaluated = results.len();
    let (best_ratio, best_policy) = results
        .into_iter()
        .reduce(|best, cand| if cand.0 > best.0 { cand } else { best })
        .expect("at least one candidate");
    Ok(NormBound {
        best_ratio,
        best_policy,
        evaluated,
    })
}

fn energies(
    system: &MeanFieldSystem,
    control: Option<&LinearPolicy>,
    policy: &LinearPolicy,
    x0: &Vector,
) -> Result<(f64, f64), MomentsError> {
    let traj = propagate_moments(system, control, Some(policy), x0)?;
    Ok((traj.z_energy.iter().sum(), traj.nu_energy.iter().sum()))
}

fn with_stacked_offsets(policy: &LinearPolicy, o: &Vector, l: usize) -> LinearPolicy {
    let mut offsets: Vec<Vector> = policy
        .offsets
        .iter()
        .map(|v| Vector::zeros(v.len()))
        .collect();
    for (k, chunk) in o.as_slice().chunks(l).enumerate() {
        offsets[k] = Vector::from_column_slice(chunk);
    }
    policy.clone().with_offsets(offsets)
}

fn best_excitation(
    system: &MeanFieldSystem,
    control: Option<&LinearPolicy>,
    policy: LinearPolicy,
    steps: usize,
    x0: &Vector,
) -> Result<(f64, LinearPolicy), MomentsError> {
    let l = system.dims.l;
    let dim = steps * l;
    let basis = |idx: &[usize]| {
        let mut o = Vector::zeros(dim);
        for &i in idx {
            o[i] += 1.0;
        }
        o
    };
    // polarization: N_ij = (f(e_i + e_j) - f(e_i) - f(e_j)) / 2
    let mut diag = Vec::with_capacity(dim);
    for i in 0..dim {
        diag.push(energies(
            system,
            control,
            &with_stacked_offsets(&policy, &basis(&[i]), l),
            x0,
        )?);
    }
    let mut num = Mat::zeros(dim, dim);
    let mut den = Mat::zeros(dim, dim);
    for i in 0..dim {
        num[(i, i)] = diag[i].0;
        den[(i, i)] = diag[i].1;
        for j in 0..i {
            let (zn, dn) = energies(
                system,
                control,
                &with_stacked_offsets(&policy, &basis(&[i, j]), l),
                x0,
            )?;
            num[(i, j)] = 0.5 * (zn - diag[i].0 - diag[j].0);
            den[(i, j)] = 0.5 * (dn - diag[i].1 - diag[j].1);
            num[(j, i)] = num[(i, j)];
            den[(j, i)] = den[(i, j)];
        }
    }

    let direction = match den.clone().cholesky() {
        Some(chol) => {
            let l_factor = chol.l();
            // L^{-1} N L^{-T}
            let half = l_factor
                .solve_lower_triangular(&num)
                .expect("Cholesky factor is nonsingular");
            let reduced = l_factor
                .solve_lower_triangular(&half.transpose())
                .expect("Cholesky factor is nonsingular");
            let eig = crate::linalg::symmetrize(&reduced).symmetric_eigen();
            let top = eig.eigenvalues.imax();
            let y = eig.eigenvectors.column(top).into_owned();
            l_factor
                .transpose()
                .solve_upper_triangular(&y)
                .unwrap_or_else(|| basis(&[0]))
        }
        None => basis(&[0]),
    };
    let direction = if direction.norm() > 0.0 {
        direction.normalize()
    } else {
        basis(&[0])
    };
    let realized = with_stacked_offsets(&policy, &direction, l);
    let (zn, dn) = energies(system, control, &realized, x0)?;
    let ratio = if dn > 0.0 {
        (zn.max(0.0) / dn).sqrt()
    } else {
        0.0
    };
    Ok((ratio, realized))
}
