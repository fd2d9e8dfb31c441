use paneitz_bench::{jet, sample_points};

#[test]
fn fixtures_are_deterministic() {
    let a = sample_points(50, 10.0);
    assert_eq!(a, sample_points(50, 10.0));
    assert!(a.iter().all(|y| y.iter().map(|v| v * v).sum::<f64>().sqrt() <= 10.0 + 1e-12));
    assert_eq!(jet(), jet());
}
