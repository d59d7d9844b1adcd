//! Sampled check of the two saddle inequalities
//! `J1(u*, v) >= J1(u*, v*)` and `J2(u, v*) >= J2(u*, v*)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{Mat, Vector};
use crate::model::MeanFieldSystem;

use super::{evaluate_costs, LinearPolicy, MomentsError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleReport {
    pub j1: f64,
    pub j2: f64,
    /// `max (J1(u*, v*) - J1(u*, v))` over the sampled `v`; `<= 0` when the
    /// inequality holds.
    pub j1_improvement: f64,
    /// `max (J2(u*, v*) - J2(u, v*))` over the sampled `u`.
    pub j2_improvement: f64,
    pub perturbations: usize,
}

fn perturb(rng: &mut ChaCha8Rng, base: &LinearPolicy, scale: f64) -> LinearPolicy {
    let mut jitter = |m: &Mat| {
        m + Mat::from_fn(m.nrows(), m.ncols(), |_, _| {
            scale * rng.gen_range(-1.0..1.0)
        })
    };
    let gains = base.gains.iter().map(&mut jitter).collect();
    let mean_gains = base.mean_gains.iter().map(&mut jitter).collect();
    LinearPolicy::new(base.channel, gains, mean_gains).with_offsets(base.offsets.clone())
}

/// Perturbs every gain entry of one player by `U(-s, s)`, with `s` cycling
/// through 0.01, 0.1 and 1, and records the largest improvement found.
pub fn saddle_check(
    system: &MeanFieldSystem,
    control: &LinearPolicy,
    disturbance: &LinearPolicy,
    x0: &Vector,
    gamma: f64,
    perturbations: usize,
    seed: u64,
) -> Result<SaddleReport, MomentsError> {
    let base = evaluate_costs(system, Some(control), Some(disturbance), x0, gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut j1_improvement, mut j2_improvement) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..perturbations {
        let s = [0.01, 0.1, 1.0][i % 3];
        let v = perturb(&mut rng, disturbance, s);
        let j1 = evaluate_costs(system, Some(control), Some(&v), x0, gamma)?.jk;
        j1_improvement = j1_improvement.max(base.jk - j1);
        let u = perturb(&mut rng, control, s);
        let j2 = evaluate_costs(system, Some(&u), Some(disturbance), x0, gamma)?.j2;
        j2_improvement = j2_improvement.max(base.j2 - j2);
    }
    Ok(SaddleReport {
        j1: base.jk,
        j2: base.j2,
        j1_improvement,
        j2_improvement,
        perturbations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recursions::h2hinf_solve;
    use crate::reference::paper_example;

    #[test]
    fn example_policies_form_a_saddle() {
        let file = paper_example();
        let sol = h2hinf_solve(&file.system, 0.8).unwrap();
        let r = saddle_check(
            &file.system,
            &sol.control_policy(),
            &sol.disturbance_policy(),
            &file.system.x0,
            0.8,
            30,
            1,
        )
        .unwrap();
        assert!(
            r.j1_improvement <= 1e-9 && r.j2_improvement <= 1e-9,
            "{r:?}"
        );
    }
}
