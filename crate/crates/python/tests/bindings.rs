use var_anomaly_py::{
    default_lambda, detect, estimate_baseline, hausdorff_distance, random_intervals, seeded_intervals,
};

#[test]
fn interval_helpers_match_the_core() {
    let seeded = seeded_intervals(2, 100, 5, 0.8).unwrap();
    assert!(seeded.iter().all(|&(s, e)| s >= 2 && e <= 100 && e + 1 - s >= 5));
    let random = random_intervals(2, 100, 5, 50, 9).unwrap();
    assert_eq!(random.len(), 50);
    assert_eq!(random, random_intervals(2, 100, 5, 50, 9).unwrap());
    assert!(seeded_intervals(2, 100, 5, 1.5).is_err());
}

#[test]
fn detect_finds_a_level_shift_in_the_dynamics() {
    let mut rows = Vec::new();
    let mut x = [0.0f64, 0.0];
    for t in 0..200 {
        let a = if t >= 150 { 0.9 } else { 0.0 };
        let e = [((t * 37 % 11) as f64 - 5.0) / 5.0, ((t * 53 % 13) as f64 - 6.0) / 6.0];
        x = [a * x[1] + e[0], a * x[0] + e[1]];
        rows.push(x.to_vec());
    }
    let zero = vec![vec![0.0, 0.0]; 2];
    let intervals = vec![(2, 60), (61, 120), (150, 200)];
    let result = detect(rows, zero, intervals, 5, 20.0, "ols", false, 0.15, None).unwrap();
    assert_eq!(result.detected, vec![(150, 200)]);
    assert_eq!(result.statistics.len(), 3);
}

#[test]
fn argument_errors_are_reported() {
    let rows = vec![vec![1.0, 2.0]; 10];
    assert!(detect(
        rows.clone(),
        vec![vec![1.0]],
        vec![(2, 10)],
        3,
        1.0,
        "lasso",
        false,
        0.15,
        None
    )
    .is_err());
    assert!(detect(
        rows,
        vec![vec![0.0, 0.0]; 2],
        vec![(2, 10)],
        3,
        1.0,
        "ridge",
        false,
        0.15,
        None
    )
    .is_err());
    assert!(estimate_baseline(vec![vec![1.0]; 5], 1, "elastic", 0.0).is_err());
    assert!(hausdorff_distance(vec![], vec![1], 10.0).is_err());
    assert_eq!(hausdorff_distance(vec![3, 9], vec![4, 9], 10.0).unwrap(), 1.0);
    assert!(
        (default_lambda(11, 10, 500, 0.15) - 0.15 * (11.0f64 * (2.0 * 10f64.ln() + 500f64.ln())).sqrt()).abs() < 1e-12
    );
}
