use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use paneitz_core::cnc::generate::random_conformal_normal_jet;
use paneitz_core::cnc::{q, CurvatureJet};
use paneitz_core::geodesic::*;
use paneitz_core::stats::loglog_fit;
use paneitz_core::{AnalyticMetric, BoxDomain, Point};

fn norm(a: &Point) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(a: &Point, b: &Point) -> f64 {
    norm(&std::array::from_fn(|i| a[i] - b[i]))
}

fn dot(a: &Point, b: &Point) -> f64 {
    (0..4).map(|i| a[i] * b[i]).sum()
}

fn random_point(rng: &mut ChaCha8Rng, r: f64) -> Point {
    std::array::from_fn(|_| rng.random_range(-r..r))
}

fn opts() -> GeodesicOptions {
    GeodesicOptions::default()
}

#[test]
fn flat_metric_gives_euclidean_distance() {
    let g = AnalyticMetric::euclidean(BoxDomain::cube([0.0; 4], 5.0));
    let (y, z) = ([0.3, -1.2, 0.5, 2.0], [-1.0, 0.4, 0.9, -0.7]);
    let r = geodesic_distance(&g, &y, &z, &opts()).unwrap();
    assert!((r.distance - dist(&y, &z)).abs() <= 1e-12, "{r:?}");
}

/// Great-circle distance between stereographic points on the sphere of
/// curvature `kappa`.
fn great_circle(kappa: f64, x: &Point, y: &Point) -> f64 {
    let s = kappa.sqrt();
    let (xs, ys): (Point, Point) = (x.map(|v| v * s), y.map(|v| v * s));
    let chord = 2.0 * dist(&xs, &ys) / ((1.0 + dot(&xs, &xs)) * (1.0 + dot(&ys, &ys))).sqrt();
    2.0 * (chord / 2.0).asin() / s
}

#[test]
fn sphere_chart_matches_great_circle() {
    for kappa in [1.0, 0.25] {
        let g = AnalyticMetric::stereographic_sphere(BoxDomain::cube([0.0; 4], 3.0), kappa);
        let (y, z) = ([0.4, -0.3, 0.2, 0.1], [-0.5, 0.6, -0.1, 0.3]);
        let r = geodesic_distance(&g, &y, &z, &opts()).unwrap();
        let exact = great_circle(kappa, &y, &z);
        assert!((r.distance - exact).abs() <= 1e-6, "{} vs {exact}", r.distance);
        assert!(r.distance <= r.straight_length + 1e-12);
    }
}

#[test]
fn perturbed_distance_lies_in_band() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let jet = random_conformal_normal_jet(&mut rng);
    let eps = 0.05;
    let g = BlowUpMetric::new(&jet, eps, 2.0);
    assert!(!g.shrunk);
    let frob: f64 = jet.r0.to_f64().iter().map(|v| v * v).sum::<f64>().sqrt();
    for _ in 0..5 {
        let (y, z) = (random_point(&mut rng, 1.5), random_point(&mut rng, 1.5));
        let r = geodesic_distance(&g, &y, &z, &opts()).unwrap();
        let e = dist(&y, &z);
        assert!(r.distance <= r.straight_length + 1e-12, "{r:?}");
        let band = frob / 3.0 * eps * eps * (dot(&y, &y) + dot(&z, &z)) * e;
        assert!((r.distance - e).abs() <= band, "{r:?} band {band}");
    }
}

#[test]
fn triangle_inequality_and_symmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let jet = random_conformal_normal_jet(&mut rng);
    let curved = BlowUpMetric::new(&jet, 0.05, 4.0);
    let flat = AnalyticMetric::euclidean(BoxDomain::cube([0.0; 4], 4.0));
    for _ in 0..4 {
        let (a, b, c) = (random_point(&mut rng, 1.5), random_point(&mut rng, 1.5), random_point(&mut rng, 1.5));
        for g in [&curved as &dyn paneitz_core::MetricField, &flat] {
            let d = |p: &Point, q: &Point| geodesic_distance(g, p, q, &opts()).unwrap().distance;
            assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-8);
            assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-8);
        }
    }
}

#[test]
fn node_doubling_is_converged() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let jet = random_conformal_normal_jet(&mut rng);
    let g = BlowUpMetric::new(&jet, 0.05, 4.0);
    let (y, z) = ([1.0, 0.5, -0.3, 0.2], [-0.6, 0.8, 0.4, -1.1]);
    let a = geodesic_distance(&g, &y, &z, &opts()).unwrap();
    let b = geodesic_distance(&g, &y, &z, &GeodesicOptions { segments: 128, ..opts() }).unwrap();
    assert!((a.distance - b.distance).abs() < 1e-6, "{} vs {}", a.distance, b.distance);
    assert!(a.gradient_norm < 1e-10);
}

#[test]
fn blow_up_metric_shrinks_when_indefinite() {
    let jet = CurvatureJet::constant_curvature(q(1));
    let g = BlowUpMetric::new(&jet, 1.0, 10.0);
    assert!(g.shrunk && g.radius < 10.0);
    let x = [g.radius; 4];
    let v = paneitz_core::MetricField::value(&g, &x).unwrap();
    let m = nalgebra::Matrix4::from_fn(|i, j| v[i][j]);
    let min = m.symmetric_eigen().eigenvalues.min();
    assert!(min >= MIN_EIGENVALUE - 1e-12, "{min}");
}

#[test]
fn leaving_the_domain_is_an_error() {
    let g = AnalyticMetric::euclidean(BoxDomain::cube([0.0; 4], 1.0));
    let err = geodesic_distance(&g, &[0.0; 4], &[2.0, 0.0, 0.0, 0.0], &opts()).unwrap_err();
    assert!(matches!(err, GeodesicError::DomainExit(_)));
}

fn sweep_pairs() -> Vec<(Point, Point)> {
    vec![
        ([1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]),
        ([0.6, 0.8, 0.0, 0.0], [0.0, 0.0, 0.8, -0.6]),
        ([0.5, -0.5, 0.5, 0.5], [-0.2, 0.7, 0.1, 0.4]),
    ]
}

#[test]
fn ratio_constant_is_stable_over_eps() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let jet = random_conformal_normal_jet(&mut rng);
    let sweep = distance_ratio_sweep(&jet, &[0.1, 0.05, 0.025], &sweep_pairs(), &opts()).unwrap();
    assert!(sweep.is_stable(0.25), "{:?}", sweep.c_by_eps);
    assert!((sweep.eps_exponent - 2.0).abs() <= 0.3, "{}", sweep.eps_exponent);
    let csv = sweep.to_csv();
    assert_eq!(csv.lines().count(), 1 + 9);
}

#[test]
fn zero_eps_gives_unit_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let jet = random_conformal_normal_jet(&mut rng);
    let sweep = distance_ratio_sweep(&jet, &[0.0], &sweep_pairs(), &opts()).unwrap();
    assert!(sweep.rows.iter().all(|r| r.ratio_gap == 0.0 && r.geodesic == r.euclid));
}

#[test]
fn constant_curvature_matches_sphere_distortion() {
    let jet = CurvatureJet::constant_curvature(q(1));
    let eps = 0.05;
    let pairs = sweep_pairs();
    let sweep = distance_ratio_sweep(&jet, &[eps], &pairs, &opts()).unwrap();
    for (row, (y, z)) in sweep.rows.iter().zip(&pairs) {
        // Law of cosines on the sphere of curvature ε².
        let (a, b) = (eps * norm(y), eps * norm(z));
        let cos_t = dot(y, z) / (norm(y) * norm(z));
        let exact = (a.cos() * b.cos() + a.sin() * b.sin() * cos_t).acos() / eps;
        let c_exact = (exact / dist(y, z) - 1.0).abs() / (eps * eps * (dot(y, y) + dot(z, z)));
        assert!((row.fitted_c / c_exact - 1.0).abs() <= 0.3, "{} vs {c_exact}", row.fitted_c);
    }
}

#[test]
fn gap_scales_quadratically_in_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let jet = random_conformal_normal_jet(&mut rng);
    let (y0, z0) = sweep_pairs()[2];
    let scales = [0.5, 1.0, 2.0];
    let gaps: Vec<f64> = scales
        .iter()
        .map(|&s| {
            let pair = (y0.map(|v| v * s), z0.map(|v| v * s));
            distance_ratio_sweep(&jet, &[0.05], &[pair], &opts()).unwrap().rows[0].ratio_gap
        })
        .collect();
    let slope = loglog_fit(&scales, &gaps).slope;
    assert!((slope - 2.0).abs() <= 0.3, "{slope} {gaps:?}");
}

fn omega1_pair(s: f64) -> (Point, Point) {
    ([s, 0.3 * s, -0.2 * s, 0.1 * s], [0.1 * s, -0.25 * s, 0.2 * s, 0.05 * s])
}

#[test]
fn derivative_gap_vanishes_when_flat() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let jet = random_conformal_normal_jet(&mut rng);
    let (y, z) = omega1_pair(1.0);
    for j in 1..=3 {
        let d = log_distance_derivative_gap(&jet, 0.0, &y, &z, j, &opts()).unwrap();
        assert_eq!(d.value, 0.0);
    }
    let err = log_distance_derivative_gap(&jet, 0.1, &z, &y, 1, &opts()).unwrap_err();
    assert!(matches!(err, GeodesicError::PairOutsideRegime { .. }));
    assert!(matches!(
        log_distance_derivative_gap(&jet, 0.1, &y, &z, 4, &opts()),
        Err(GeodesicError::BadOrder(4))
    ));
}

#[test]
fn first_derivative_gap_rates() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let jet = random_conformal_normal_jet(&mut rng);
    let (y, z) = omega1_pair(1.0);
    let eps = [0.1, 0.05, 0.025];
    let by_eps: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let d = log_distance_derivative_gap(&jet, e, &y, &z, 1, &opts()).unwrap();
            assert!(d.consistent, "{d:?}");
            d.value.abs()
        })
        .collect();
    let slope = loglog_fit(&eps, &by_eps).slope;
    assert!((slope - 2.0).abs() <= 0.3, "{slope} {by_eps:?}");

    let radii = [0.5, 1.0, 2.0];
    let by_r: Vec<f64> = radii
        .iter()
        .map(|&s| {
            let (y, z) = omega1_pair(s);
            log_distance_derivative_gap(&jet, 0.05, &y, &z, 1, &opts()).unwrap().value.abs()
        })
        .collect();
    let slope = loglog_fit(&radii, &by_r).slope;
    assert!((slope - 1.0).abs() <= 0.4, "{slope} {by_r:?}");
}

#[test]
fn higher_derivative_gaps_are_resolved() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let jet = random_conformal_normal_jet(&mut rng);
    let (y, z) = omega1_pair(1.0);
    for j in [2, 3] {
        let d = log_distance_derivative_gap(&jet, 0.1, &y, &z, j, &opts()).unwrap();
        assert!(d.value.is_finite());
        assert!(d.consistent, "{d:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn distance_is_at_most_straight_length(
        seed in 0u64..1000,
        y in prop::array::uniform4(-1.0..1.0f64),
        z in prop::array::uniform4(-1.0..1.0f64),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jet = random_conformal_normal_jet(&mut rng);
        let g = BlowUpMetric::new(&jet, 0.05, 2.0);
        let r = geodesic_distance(&g, &y, &z, &opts()).unwrap();
        prop_assert!(r.distance <= r.straight_length + 1e-10);
        prop_assert!(r.distance > 0.0 || dist(&y, &z) == 0.0);
    }
}
