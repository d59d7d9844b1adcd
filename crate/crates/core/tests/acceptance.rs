//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero if any
//! criterion fails.

mod common;

use std::time::Instant;

use common::*;
use mfhinf::linalg::{max_eigenvalue, min_eigenvalue};
use mfhinf::recursions::CoupledGains;
use mfhinf::reference::{compare_with_reference, paper_example, TABLE_TOL};
use mfhinf::{
    evaluate_costs, h2hinf_solve, lemma_decomposition_check, norm_lower_bound, propagate_moments,
    simulate_particle_system, simulate_paths, Channel, Dimensions, H2HinfSolution, Mat,
    MeanFieldSystem, NoiseModel, NormBoundOptions, Vector,
};
use rand::Rng;

const GAMMA: f64 = 0.8;
const SEED: u64 = 20_240_601;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn golden() -> Outcome {
    let start = Instant::now();
    let file = paper_example();
    let sol = h2hinf_solve(&file.system, file.gamma.unwrap_or(GAMMA)).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let rows = compare_with_reference(&sol);
    let worst = rows
        .iter()
        .max_by(|a, b| a.max_abs_diff.total_cmp(&b.max_abs_diff))
        .unwrap();
    outcome(
        rows.len() == 36 && worst.max_abs_diff <= TABLE_TOL && elapsed < 1.0,
        format!(
            "36 entries, worst {} at k={} off by {:.2e} (tol {TABLE_TOL:e}); {:.1} ms",
            worst.name,
            worst.k,
            worst.max_abs_diff,
            elapsed * 1e3
        ),
    )
}

fn terminal() -> Outcome {
    let file = paper_example();
    let sol = h2hinf_solve(&file.system, GAMMA).unwrap();
    let phi = &file.system.stage(2).phi;
    let w = phi.transpose() * phi;
    let printed = Mat::from_row_slice(2, 2, &[-0.0625, -0.0825, -0.0825, -0.1125]);
    let errs = [
        (&sol.p1[2] + &w).amax(),
        (&sol.p1[2] - printed).amax(),
        (&sol.pt1[2] - &w - Mat::identity(2, 2)).amax(),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    outcome(
        worst <= 1e-12,
        format!("max deviation {worst:.2e} (tol 1e-12)"),
    )
}

fn sign_and_residuals(sys: &MeanFieldSystem, sol: &H2HinfSolution) -> (f64, f64) {
    let mut sign = f64::NEG_INFINITY;
    let mut resid: f64 = 0.0;
    for k in 0..sol.p1.len() {
        sign = sign
            .max(max_eigenvalue(&sol.q1[k]))
            .max(-min_eigenvalue(&sol.qt1[k]));
    }
    for k in 0..=sys.dims.horizon {
        let g = CoupledGains {
            u: sol.u[k].clone(),
            u_bar: sol.u_bar(k),
            v: sol.v[k].clone(),
            v_bar: sol.v_bar(k),
        };
        resid = resid.max(coupled_residual(
            sys.stage(k),
            &sol.p1,
            &sol.q1,
            &sol.pt1,
            &sol.qt1,
            &g,
            k,
            sol.gamma,
        ));
    }
    (sign, resid)
}

fn sign_structure() -> Outcome {
    let file = paper_example();
    let sol = h2hinf_solve(&file.system, GAMMA).unwrap();
    let (mut sign, mut resid) = sign_and_residuals(&file.system, &sol);
    let mut rng = rng(SEED);
    let mut systems = 1;
    for i in 0..50 {
        let sys = random_feasible_system(&mut rng, square_dims(2, 1 + i % 6), 0.4, 1.0);
        let sol = h2hinf_solve(&sys, 1.0).unwrap();
        let (s, r) = sign_and_residuals(&sys, &sol);
        sign = sign.max(s);
        resid = resid.max(r);
        systems += 1;
    }
    outcome(
        sign <= 1e-9 && resid <= 1e-10,
        format!("{systems} systems; worst wrong-sign eigenvalue {:.2e} (tol 1e-9), worst residual {resid:.2e} (tol 1e-10)", sign + 0.0),
    )
}

fn decomposition_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(SEED + 1);
    let mut worst: f64 = 0.0;
    for trial in 0..500 {
        let dims = Dimensions {
            n: 1 + trial % 3,
            l: 1 + (trial / 3) % 2,
            q: 1 + (trial / 2) % 2,
            m_phi: 1 + trial % 2,
            horizon: trial % 6,
        };
        let sys = random_system(&mut rng, dims, 0.7);
        let p: Vec<Mat> = (0..dims.stages() + 1)
            .map(|_| random_symmetric(&mut rng, dims.n, 2.0))
            .collect();
        let q: Vec<Mat> = (0..dims.stages() + 1)
            .map(|_| random_symmetric(&mut rng, dims.n, 2.0))
            .collect();
        let ctl = random_policy(&mut rng, Channel::Control, &dims, 0.5);
        let excitation = Vector::from_fn(dims.l, |_, _| rng.gen_range(-1.0..1.0));
        let dist = random_policy(&mut rng, Channel::Disturbance, &dims, 0.5)
            .with_initial_excitation(&excitation);
        let gamma = rng.gen_range(0.2..2.0);
        let (lhs, rhs) =
            lemma_decomposition_check(&sys, &p, &q, Some(&ctl), Some(&dist), &sys.x0, gamma)
                .unwrap();
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-10 && elapsed < 30.0,
        format!("500 trials, worst relative gap {worst:.2e} (tol 1e-10); {elapsed:.2} s"),
    )
}

fn saddle() -> Outcome {
    let file = paper_example();
    let sys = &file.system;
    let sol = h2hinf_solve(sys, GAMMA).unwrap();
    let (u_star, v_star) = (sol.control_policy(), sol.disturbance_policy());
    let costs = evaluate_costs(sys, Some(&u_star), Some(&v_star), &sys.x0, GAMMA).unwrap();
    let mut rng = rng(SEED + 2);
    let mut worst_gain = f64::NEG_INFINITY;
    for i in 0..200 {
        let s = [0.01, 0.1, 1.0][i % 3];
        let v = perturb(&mut rng, &v_star, s);
        let j1 = evaluate_costs(sys, Some(&u_star), Some(&v), &sys.x0, GAMMA)
            .unwrap()
            .jk;
        let u = perturb(&mut rng, &u_star, s);
        let j2 = evaluate_costs(sys, Some(&u), Some(&v_star), &sys.x0, GAMMA)
            .unwrap()
            .j2;
        worst_gain = worst_gain.max(costs.jk - j1).max(costs.j2 - j2);
    }
    let ok = (costs.jk + 1.5297).abs() <= 5e-4
        && (costs.j2 - 7.3182).abs() <= 5e-4
        && worst_gain <= 1e-9;
    outcome(
        ok,
        format!(
            "J1 = {:.5} (target -1.5297), J2 = {:.5} (target 7.3182); best improvement over 200+200 perturbations {worst_gain:.2e} (tol 1e-9)",
            costs.jk, costs.j2
        ),
    )
}

fn attenuation() -> Outcome {
    let file = paper_example();
    let sol = h2hinf_solve(&file.system, GAMMA).unwrap();
    let opts = NormBoundOptions {
        n_policies: 1000,
        seed: SEED,
        ..Default::default()
    };
    let bound = norm_lower_bound(
        &file.system,
        Some(&sol.control_policy()),
        &[sol.disturbance_policy()],
        &opts,
    )
    .unwrap();
    outcome(
        bound.best_ratio < GAMMA,
        format!(
            "best ratio {:.4} over {} policies (must stay below {GAMMA})",
            bound.best_ratio, bound.evaluated
        ),
    )
}

fn monte_carlo() -> Outcome {
    let file = paper_example();
    let sys = &file.system;
    let sol = h2hinf_solve(sys, GAMMA).unwrap();
    let (u, v) = (sol.control_policy(), sol.disturbance_policy());
    let exact = propagate_moments(sys, Some(&u), Some(&v), &sys.x0).unwrap();
    let noise = NoiseModel::gaussian(SEED);
    let est = simulate_paths(sys, Some(&u), Some(&v), &sys.x0, GAMMA, &noise, 100_000).unwrap();
    let mut worst_z: f64 = 0.0;
    for k in 1..exact.mean.len() {
        for i in 0..2 {
            worst_z =
                worst_z.max((est.mean_hat[k][i] - exact.mean[k][i]).abs() / est.mean_se[k][i]);
            for j in 0..=i {
                worst_z = worst_z.max(
                    (est.cov_hat[k][(i, j)] - exact.cov[k][(i, j)]).abs() / est.cov_se[k][(i, j)],
                );
            }
        }
    }
    let j2_z = est.j2.z_score(7.3182);
    let again = simulate_paths(sys, Some(&u), Some(&v), &sys.x0, GAMMA, &noise, 100_000).unwrap();
    let identical = again == est;
    outcome(
        worst_z <= 3.0 && j2_z <= 3.0 && identical,
        format!(
            "1e5 paths: worst moment z {worst_z:.2}, J2 = {:.4} +- {:.4} (z {j2_z:.2} vs 7.3182); rerun identical: {identical}",
            est.j2.value, est.j2.se
        ),
    )
}

fn particle_limit() -> Outcome {
    let sys = paper_example().system;
    let report = simulate_particle_system(
        &sys,
        None,
        None,
        &sys.x0,
        &[10, 100, 1000],
        &NoiseModel::gaussian(SEED),
        50,
    )
    .unwrap();
    let medians: Vec<String> = report
        .levels
        .iter()
        .map(|l| format!("M={}: {:.4}", l.particles, l.median))
        .collect();
    let strict = report.levels.windows(2).all(|w| w[1].median < w[0].median);
    outcome(strict, format!("median deviation {}", medians.join(", ")))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 golden reproduction", golden),
        ("2 terminal values", terminal),
        ("3 sign structure and residuals", sign_structure),
        ("4 decomposition identity", decomposition_identity),
        ("5 saddle property", saddle),
        ("6 disturbance attenuation", attenuation),
        ("7 monte carlo consistency", monte_carlo),
        ("8 particle limit", particle_limit),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!(
            "{} criterion {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
