//! Finite-horizon mixed H2/H-infinity synthesis for discrete-time mean-field
//! stochastic systems with multiplicative noise.
//!
//! The pipeline is: build or load a [`MeanFieldSystem`], run
//! [`h2hinf_solve`] for the coupled control/disturbance gains, then check
//! them with exact moments ([`propagate_moments`]) or Monte Carlo
//! ([`simulate_paths`]).

pub mod export;
pub mod format;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod recursions;
pub mod reference;
pub mod simulate;

pub use format::{load_system, load_system_file, save_system, FormatError, SystemFile};
pub use linalg::{Mat, Vector};
pub use model::{
    Dimensions, LqStage, LqSystem, MeanFieldSystem, StageParams, ValidationReport, Violation,
};
pub use moments::{
    evaluate_costs, lemma_decomposition_check, norm_lower_bound, propagate_moments, Channel,
    CostBreakdown, LinearPolicy, MomentTrajectory, MomentsError, NormBound, NormBoundOptions,
};
pub use recursions::{
    coupled_gain_step, gamma_star_search, h2hinf_solve, h2hinf_solve_with, lq_solve, sbrl_solve,
    GammaSearchOptions, GammaSearchResult, H2HinfSolution, LqSolution, SbrlSolution, SolveError,
    SolverOptions,
};
pub use simulate::{
    simulate_particle_system, simulate_paths, simulate_single_path, McEstimate, NoiseKind,
    NoiseModel, ParticleReport, SimulateError,
};
