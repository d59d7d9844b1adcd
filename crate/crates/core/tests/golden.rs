use mfhinf::reference::{compare_with_reference, paper_example, TABLE_TOL};
use mfhinf::{evaluate_costs, h2hinf_solve, Mat};

#[test]
fn reproduces_published_solution() {
    let file = paper_example();
    let sol = h2hinf_solve(&file.system, file.gamma.unwrap()).unwrap();
    let rows = compare_with_reference(&sol);
    assert_eq!(rows.len(), 36);
    let worst = rows
        .iter()
        .max_by(|a, b| a.max_abs_diff.total_cmp(&b.max_abs_diff))
        .unwrap();
    assert!(worst.max_abs_diff <= TABLE_TOL, "{worst:?}");
}

#[test]
fn terminal_values_are_forced() {
    let file = paper_example();
    let sol = h2hinf_solve(&file.system, 0.8).unwrap();
    let phi = &file.system.stage(2).phi;
    let w = phi.transpose() * phi;
    let expected = Mat::from_row_slice(2, 2, &[-0.0625, -0.0825, -0.0825, -0.1125]);
    assert!((&sol.p1[2] + &w).amax() <= 1e-12);
    assert!((&sol.p1[2] - expected).amax() <= 1e-12);
    assert!((&sol.q1[2] - &sol.p1[2]).amax() <= 1e-12);
    assert!((&sol.pt1[2] - &w - Mat::identity(2, 2)).amax() <= 1e-12);
    assert!((&sol.qt1[2] - &sol.pt1[2]).amax() <= 1e-12);
    for m in [&sol.p1[3], &sol.q1[3], &sol.pt1[3], &sol.qt1[3]] {
        assert_eq!(m.amax(), 0.0);
    }
}

#[test]
fn value_formulas_match_moment_costs() {
    let file = paper_example();
    let sol = h2hinf_solve(&file.system, 0.8).unwrap();
    let costs = evaluate_costs(
        &file.system,
        Some(&sol.control_policy()),
        Some(&sol.disturbance_policy()),
        &file.system.x0,
        0.8,
    )
    .unwrap();
    assert!(
        (costs.jk - sol.hinf_value).abs() < 1e-12,
        "{} vs {}",
        costs.jk,
        sol.hinf_value
    );
    assert!(
        (costs.j2 - sol.h2_value).abs() < 1e-12,
        "{} vs {}",
        costs.j2,
        sol.h2_value
    );
    assert!((sol.hinf_value + 1.5297).abs() <= 5e-4);
    assert!((sol.h2_value - 7.3182).abs() <= 5e-4);
}
