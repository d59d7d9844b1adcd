//! Monte Carlo simulation of the mean-field equation and of its finite
//! particle approximation.
//!
//! Randomness comes from ChaCha8 with one stream per path: path `i` under
//! seed `s` always sees the same noise, whatever the thread schedule.
//! Per-path results are collected in index order and reduced with pairwise
//! summation, so estimates are bit-identical across runs.
//!
//! In [`simulate_paths`] the expectations `E[x(k)]`, `E[u(k)]`, `E[v(k)]`
//! inside the dynamics are the exact values from [`propagate_moments`]; the
//! particle system replaces them with empirical averages.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{pairwise_sum, Mat, Vector};
use crate::model::MeanFieldSystem;
use crate::moments::{propagate_moments, Channel, LinearPolicy, MomentTrajectory, MomentsError};

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error(transparent)]
    Moments(#[from] MomentsError),
    #[error("need at least 2 paths, got {0}")]
    TooFewPaths(usize),
    #[error("particle counts must be >= 1 and repetitions >= 1")]
    EmptyParticleRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Rademacher,
}

/// Scalar white noise with zero mean and unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseModel {
    pub fn gaussian(seed: u64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            seed,
        }
    }

    pub fn rademacher(seed: u64) -> Self {
        Self {
            kind: NoiseKind::Rademacher,
            seed,
        }
    }

    pub fn stream(&self, id: u64) -> NoiseStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        NoiseStream {
            kind: self.kind,
            rng,
        }
    }
}

pub struct NoiseStream {
    kind: NoiseKind,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn sample(&mut self) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => self.rng.sample(StandardNormal),
            NoiseKind::Rademacher => {
                if self.rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarEstimate {
    pub value: f64,
    pub se: f64,
}

impl ScalarEstimate {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let value = pairwise_sum(samples) / n;
        let dev: Vec<f64> = samples.iter().map(|s| (s - value).powi(2)).collect();
        let var = pairwise_sum(&dev) / (n - 1.0);
        Self {
            value,
            se: (var / n).sqrt(),
        }
    }

    /// `|value - target| / se`; infinite when the estimate is exact but off.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.value - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }
}

/// Monte Carlo statistics of the state and the costs.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub n_paths: usize,
    pub noise: NoiseModel,
    pub mean_hat: Vec<Vector>,
    pub mean_se: Vec<Vector>,
    /// Unbiased sample covariance.
    pub cov_hat: Vec<Mat>,
    pub cov_se: Vec<Mat>,
    pub jk: ScalarEstimate,
    /// `sum E[||z||^2 + ||x||^2]`, matching [`crate::moments::CostBreakdown::j2`].
    pub j2: ScalarEstimate,
    pub output_energy: ScalarEstimate,
}

struct PathRecord {
    states: Vec<Vector>,
    jk: f64,
    output_energy: f64,
    state_energy: f64,
}

struct ClosedLoop<'a> {
    system: &'a MeanFieldSystem,
    exact: MomentTrajectory,
    control: LinearPolicy,
    disturbance: LinearPolicy,
    gamma: f64,
}

impl<'a> ClosedLoop<'a> {
    fn new(
        system: &'a MeanFieldSystem,
        control: Option<&LinearPolicy>,
        disturbance: Option<&LinearPolicy>,
        x0: &Vector,
        gamma: f64,
    ) -> Result<Self, MomentsError> {
        let exact = propagate_moments(system, control, disturbance, x0)?;
        let dims = &system.dims;
        Ok(Self {
            system,
            exact,
            control: control
                .cloned()
                .unwrap_or_else(|| LinearPolicy::zero(Channel::Control, dims)),
            disturbance: disturbance
                .cloned()
                .unwrap_or_else(|| LinearPolicy::zero(Channel::Disturbance, dims)),
            gamma,
        })
    }

    fn run(&self, x0: &Vector, noise: &mut NoiseStream) -> PathRecord {
        let mut x = x0.clone();
        let mut states = Vec::with_capacity(self.system.dims.stages() + 1);
        let (mut jk, mut output_energy, mut state_energy) = (0.0, 0.0, 0.0);
        for (k, s) in self.system.stages.iter().enumerate() {
            let m = &self.exact.mean[k];
            let eu = &self.exact.mean_control[k];
            let ev = &self.exact.mean_disturbance[k];
            let dev = &x - m;
            let u = &self.control.gains[k] * &dev + eu;
            let v = &self.disturbance.gains[k] * &dev + ev;

            let z2 = (&s.phi * &x).norm_squared() + (&s.psi * &u).norm_squared();
            jk += self.gamma * self.gamma * v.norm_squared() - z2;
            output_energy += z2;
            state_energy += x.norm_squared();

            let w = noise.sample();
            let drift = &s.a * &x + &s.at * m + &s.b * &v + &s.bt * ev + &s.f1 * &u;
            let diffusion = &s.c * &x + &s.ct * m + &s.d * &v + &s.dt * ev;
            let next = drift + diffusion * w;
            states.push(std::mem::replace(&mut x, next));
        }
        states.push(x);
        PathRecord {
            states,
            jk,
            output_energy,
            state_energy,
        }
    }
}

/// One realization of the closed loop, using noise stream `path_index`.
pub fn simulate_single_path(
    system: &MeanFieldSystem,
    control: Option<&LinearPolicy>,
    disturbance: Option<&LinearPolicy>,
    x0: &Vector,
    noise: &NoiseModel,
    path_index: u64,
) -> Result<Vec<Vector>, SimulateError> {
    let cl = ClosedLoop::new(system, control, disturbance, x0, 1.0)?;
    Ok(cl.run(x0, &mut noise.stream(path_index)).states)
}

/// Monte Carlo estimate of moments and costs over `n_paths` paths.
/// `gamma` only enters the attenuation cost `jk`.
pub fn simulate_paths(
    system: &MeanFieldSystem,
    control: Option<&LinearPolicy>,
    disturbance: Option<&LinearPolicy>,
    x0: &Vector,
    gamma: f64,
    noise: &NoiseModel,
    n_paths: usize,
) -> Result<McEstimate, SimulateError> {
    if n_paths < 2 {
        return Err(SimulateError::TooFewPaths(n_paths));
    }
    let cl = ClosedLoop::new(system, control, disturbance, x0, gamma)?;
    let records: Vec<PathRecord> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| cl.run(x0, &mut noise.stream(i)))
        .collect();

    let n = system.dims.n;
    let np = n_paths as f64;
    let mut mean_hat = Vec::new();
    let mut mean_se = Vec::new();
    let mut cov_hat = Vec::new();
    let mut cov_se = Vec::new();
    let mut column = vec![0.0; n_paths];
    for k in 0..=system.dims.stages() {
        let mut mean = Vector::zeros(n);
        let mut se = Vector::zeros(n);
        for i in 0..n {
            for (c, r) in column.iter_mut().zip(&records) {
                *c = r.states[k][i];
            }
            let est = ScalarEstimate::from_samples(&column);
            mean[i] = est.value;
            se[i] = est.se;
        }
        let mut cov = Mat::zeros(n, n);
        let mut cse = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                for (c, r) in column.iter_mut().zip(&records) {
                    *c = (r.states[k][i] - mean[i]) * (r.states[k][j] - mean[j]);
                }
                let est = ScalarEstimate::from_samples(&column);
                // rescale the biased mean of products to the unbiased estimator
                cov[(i, j)] = est.value * np / (np - 1.0);
                cse[(i, j)] = est.se;
                cov[(j, i)] = cov[(i, j)];
                cse[(j, i)] = cse[(i, j)];
            }
        }
        mean_hat.push(mean);
        mean_se.push(se);
        cov_hat.push(cov);
        cov_se.push(cse);
    }

    let collect = |f: fn(&PathRecord) -> f64| -> Vec<f64> { records.iter().map(f).collect() };
    Ok(McEstimate {
        n_paths,
        noise: *noise,
        mean_hat,
        mean_se,
        cov_hat,
        cov_se,
        jk: ScalarEstimate::from_samples(&collect(|r| r.jk)),
        j2: ScalarEstimate::from_samples(&collect(|r| r.output_energy + r.state_energy)),
        output_energy: ScalarEstimate::from_samples(&collect(|r| r.output_energy)),
    })
}

/// Deviation of the empirical particle average from the exact mean, for one
/// particle count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleLevel {
    pub particles: usize,
    /// `max_k ||xbar(k) - E x(k)||` per repetition.
    pub deviations: Vec<f64>,
    pub median: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleReport {
    pub noise: NoiseModel,
    pub repetitions: usize,
    pub levels: Vec<ParticleLevel>,
}

impl ParticleReport {
    /// Whether the median deviation never increases along the schedule.
    pub fn median_is_decreasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].median <= w[0].median)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Simulates `M` coupled particles driven by independent noise, where the
/// mean-field terms act on the particle average, and compares that average
/// with the exact mean of the limit equation.
///
/// The disturbance is a deterministic open-loop sequence, so
/// `B v + Bt E[v] = Bbar v`. Particle `j` in repetition `r` uses noise stream
/// `r * M + j`.
pub fn simulate_particle_system(
    system: &MeanFieldSystem,
    control: Option<&LinearPolicy>,
    disturbance: Option<&[Vector]>,
    x0: &Vector,
    schedule: &[usize],
    noise: &NoiseModel,
    n_reps: usize,
) -> Result<ParticleReport, SimulateError> {
    if n_reps == 0 || schedule.is_empty() || schedule.contains(&0) {
        return Err(SimulateError::EmptyParticleRun);
    }
    let dims = system.dims;
    let dist =
        disturbance.map(|d| LinearPolicy::open_loop(Channel::Disturbance, &dims, d.to_vec()));
    let exact = propagate_moments(system, control, dist.as_ref(), x0)?;
    let control = control
        .cloned()
        .unwrap_or_else(|| LinearPolicy::zero(Channel::Control, &dims));
    let offsets: Vec<Vector> = match disturbance {
        Some(d) => d.to_vec(),
        None => vec![Vector::zeros(dims.l); dims.stages()],
    };

    let mut levels = Vec::with_capacity(schedule.len());
    for &particles in schedule {
        let deviations: Vec<f64> = (0..n_reps)
            .into_par_iter()
            .map(|rep| {
                let mut streams: Vec<NoiseStream> = (0..particles)
                    .map(|j| noise.stream((rep * particles + j) as u64))
                    .collect();
                let mut xs = vec![x0.clone(); particles];
                let mut worst = 0.0_f64;
                #[allow(clippy::needless_range_loop)] // k indexes four sequences
                for k in 0..=dims.stages() {
                    let avg = empirical_mean(&xs);
                    worst = worst.max((&avg - &exact.mean[k]).norm());
                    if k == dims.stages() {
                        break;
                    }
                    let s = system.stage(k);
                    let v = &offsets[k];
                    let common = &s.at * &avg
                        + s.b_bar() * v
                        + &s.f1 * (&control.mean_gains[k] * &avg + &control.offsets[k]);
                    let common_noise = &s.ct * &avg + s.d_bar() * v;
                    for (x, stream) in xs.iter_mut().zip(streams.iter_mut()) {
                        let w = stream.sample();
                        let next = &s.a * &*x
                            + &s.f1 * (&control.gains[k] * &*x)
                            + &common
                            + (&s.c * &*x + &common_noise) * w;
                        *x = next;
                    }
                }
                worst
            })
            .collect();
        let mut sorted = deviations.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
        };
        let mean = pairwise_sum(&deviations) / deviations.len() as f64;
        levels.push(ParticleLevel {
            particles,
            deviations,
            median,
            mean,
        });
    }
    Ok(ParticleReport {
        noise: *noise,
        repetitions: n_reps,
        levels,
    })
}

fn empirical_mean(xs: &[Vector]) -> Vector {
    let n = xs[0].len();
    Vector::from_fn(n, |i, _| {
        let col: Vec<f64> = xs.iter().map(|x| x[i]).collect();
        pairwise_sum(&col) / xs.len() as f64
    })
}
