use std::f64::consts::PI;

use num_complex::Complex64;
use paneitz_core::bubble::RescaledBubble;
use paneitz_core::field::{Point, ScalarField};
use paneitz_core::potential::*;
use paneitz_core::quadrature::{S3Rule, S3_AREA};
use paneitz_core::stats::line_fit;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TWO_PI: f64 = 2.0 * PI;

fn c_log_exact() -> f64 {
    -1.0 / (8.0 * PI * PI)
}

fn random_point(rng: &mut impl Rng, lo: f64, hi: f64) -> Point {
    std::array::from_fn(|_| rng.random_range(lo..hi))
}

// ---- torus fields ----

#[test]
fn modes_must_be_resolved_and_real() {
    assert!(matches!(TorusSpectralField::new(1.0, 7), Err(PotentialError::ModesTooFew { .. })));
    let mut f = TorusSpectralField::new(1.0, 8).unwrap();
    assert!(matches!(
        f.add_real_mode([4, 0, 0, 0], Complex64::new(1.0, 0.0)),
        Err(PotentialError::ModeOutOfRange { .. })
    ));
    let lopsided = TorusSpectralField::from_modes(1.0, 8, [([1, 0, 0, 0], Complex64::new(1.0, 0.0))]);
    assert!(matches!(lopsided, Err(PotentialError::NotReal(_))));
    let ok = TorusSpectralField::from_modes(
        1.0,
        8,
        [([1, 0, 0, 0], Complex64::new(1.0, 2.0)), ([-1, 0, 0, 0], Complex64::new(1.0, -2.0))],
    )
    .unwrap();
    assert_eq!(ok.conjugate_defect(), 0.0);
}

#[test]
fn cosine_mode_values() {
    let f = TorusSpectralField::cosine(3.0, 8, [1, 2, 0, 0], 0.7).unwrap();
    let x = [0.2, 0.5, 1.1, 2.9];
    let expect = 0.7 * (TWO_PI / 3.0 * (0.2 + 1.0)).cos();
    assert!((f.eval(&x) - expect).abs() < 1e-14);
    assert!(f.is_zero_mean());
    let lap = f.laplacian().eval(&x);
    let k2 = (TWO_PI / 3.0).powi(2) * 5.0;
    assert!((lap + k2 * expect).abs() < 1e-12);
    assert!((f.bilaplacian().eval(&x) - k2 * k2 * expect).abs() < 1e-10);
}

#[test]
fn spectral_jets_match_mode_derivatives() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = TorusSpectralField::random(&mut rng, 2.0, 8, 6, 3).unwrap();
    let x = random_point(&mut rng, 0.0, 2.0);
    let jet = f.jet(&x, 4).unwrap();
    assert!((jet.value() - f.eval(&x)).abs() < 1e-13);
    let lap = jet.flat_laplacian();
    assert!((lap.value() - f.laplacian().eval(&x)).abs() < 1e-10);
    assert!((lap.flat_laplacian().value() - f.bilaplacian().eval(&x)).abs() < 1e-8);
    let h = 1e-4;
    let mut xp = x;
    xp[2] += h;
    let mut xm = x;
    xm[2] -= h;
    let fd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * h);
    assert!((jet.gradient()[2] - fd).abs() < 1e-6);
}

#[test]
fn parseval_on_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let f = TorusSpectralField::random(&mut rng, 1.5, 8, 10, 3).unwrap();
        assert!(f.parseval_defect(8).unwrap() <= 1e-10);
    }
    let f = TorusSpectralField::cosine(1.0, 8, [3, 0, 0, 0], 1.0).unwrap();
    assert!(matches!(f.to_grid(6), Err(PotentialError::GridTooCoarse { .. })));
}

#[test]
fn samples_round_trip_through_fft() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = TorusSpectralField::random(&mut rng, 2.5, 8, 8, 3).unwrap();
    let g = TorusSpectralField::from_samples(2.5, 8, |x| f.eval(x)).unwrap();
    for (m, c) in f.modes() {
        assert!((g.coefficient(m) - c).norm() < 1e-12, "{m:?}");
    }
    assert!(g.modes().all(|(m, c)| c.norm() < 1e-12 || f.coefficient(m) != Complex64::default()));
}

#[test]
fn binary_export_layout() {
    let f = TorusSpectralField::cosine(2.0, 8, [1, 0, 0, 0], 1.0).unwrap();
    let bytes = f.export_binary(4).unwrap();
    assert_eq!(&bytes[..4], b"TSF1");
    assert_eq!(f64::from_le_bytes(bytes[4..12].try_into().unwrap()), 2.0);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 4);
    assert_eq!(bytes.len(), 16 + 8 * 256);
    let sample = |g: [usize; 4]| {
        let o = 16 + 8 * (((g[0] * 4 + g[1]) * 4 + g[2]) * 4 + g[3]);
        f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap())
    };
    assert!((sample([0, 3, 1, 2]) - 1.0).abs() < 1e-14);
    assert!((sample([1, 0, 0, 0]) - 0.0).abs() < 1e-14);
    assert!((sample([2, 0, 0, 0]) + 1.0).abs() < 1e-14);
}

// ---- torus Green's function ----

#[test]
fn green_rejects_small_or_odd_mode_counts() {
    assert!(matches!(biharmonic_green_torus(8, 1.0, [0.0; 4]), Err(PotentialError::ModesTooFew { .. })));
    assert!(matches!(biharmonic_green_torus(17, 1.0, [0.0; 4]), Err(PotentialError::ModesTooFew { .. })));
    assert!(biharmonic_green_torus(16, 1.0, [0.0; 4]).is_ok());
}

#[test]
fn green_multiplier_inverts_bilaplacian() {
    let g = biharmonic_green_torus(16, 3.0, [0.0; 4]).unwrap();
    assert_eq!(g.multiplier(&[0, 0, 0, 0]), 0.0);
    assert_eq!(g.multiplier(&[8, 0, 0, 0]), 0.0);
    for m in [[1, 0, 0, 0], [2, -3, 1, 7], [-7, -7, -7, -7]] {
        let k2 = (TWO_PI / 3.0).powi(2) * m.iter().map(|&v: &i32| (v * v) as f64).sum::<f64>();
        assert!((g.multiplier(&m) * k2 * k2 - 1.0).abs() < 1e-14);
    }
}

#[test]
fn green_is_symmetric_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let l = 2.0;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let xi = random_point(&mut rng, 0.0, l);
        let eta = random_point(&mut rng, 0.0, l);
        let a = biharmonic_green_torus(16, l, xi).unwrap().value(&eta);
        let b = biharmonic_green_torus(16, l, eta).unwrap().value(&xi);
        worst = worst.max((a - b).abs());
    }
    assert!(worst <= 1e-10, "{worst:e}");
}

#[test]
fn green_has_zero_mean() {
    let g = biharmonic_green_torus(16, 1.0, [0.3, 0.1, 0.0, 0.7]).unwrap();
    assert_eq!(g.coefficient(&[0; 4]), Complex64::default());
    // The trapezoid rule on a grid finer than the modes integrates exactly.
    let n = 16;
    let mut sum = 0.0;
    for o in 0..n * n * n * n {
        let g4 = [o / (n * n * n), (o / (n * n)) % n, (o / n) % n, o % n];
        sum += g.value(&g4.map(|v| v as f64 / n as f64));
    }
    assert!(sum.abs() / (n * n * n * n) as f64 <= 1e-12);
}

#[test]
fn directional_series_matches_point_values() {
    let g = biharmonic_green_torus(16, TWO_PI, [0.0; 4]).unwrap();
    let s = g.directional_series(&[1, 1, 0, 0]);
    for r in [0.3, 1.0, 2.2] {
        let x = [r / 2f64.sqrt(), r / 2f64.sqrt(), 0.0, 0.0];
        assert!((s.at_distance(r) - g.value(&x)).abs() < 1e-12);
    }
    let axis = g.directional_series(&[0, 0, 1, 0]);
    assert!((axis.at_distance(0.8) - g.value(&[0.0, 0.0, 0.8, 0.0])).abs() < 1e-12);
}

#[test]
fn sphere_mean_factor_matches_quadrature() {
    let rule = S3Rule::new(12, 32);
    for z in [0.0, 0.5, 3.0, 11.0] {
        let k = [z, 0.0, 0.0, 0.0];
        let mean = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(w, wt)| wt * (k[0] * w[0]).cos())
            .sum::<f64>()
            / S3_AREA;
        assert!((sphere_mean_factor(z) - mean).abs() < 1e-12, "z = {z}");
    }
}

#[test]
fn log_coefficient_at_n64() {
    let g = biharmonic_green_torus(64, TWO_PI, [0.0; 4]).unwrap();
    let fit = fit_log_singularity(&g, None).unwrap();
    let rel = (fit.c_log / c_log_exact() - 1.0).abs();
    assert!(rel <= 0.02, "c_log = {} ({rel:e})", fit.c_log);
    assert!(fit.is_consistent(), "rms {}", fit.rms);
    assert_eq!(fit.window, [4.0 * TWO_PI / 64.0, TWO_PI / 8.0]);
    let rec = fit.json_record();
    assert_eq!(rec["c_log"].as_f64().unwrap(), fit.c_log);
    assert_eq!(rec["window"].as_array().unwrap().len(), 2);
    assert!(rec["rms"].as_f64().unwrap() >= 0.0);
}

#[test]
fn log_coefficient_improves_under_refinement() {
    let err = |n: usize| {
        let g = biharmonic_green_torus(n, TWO_PI, [0.0; 4]).unwrap();
        (fit_log_singularity(&g, None).unwrap().c_log / c_log_exact() - 1.0).abs()
    };
    let (coarse, fine) = (err(48), err(96));
    assert!(fine <= 0.5 * coarse, "{coarse:e} -> {fine:e}");
}

#[test]
fn regular_part_is_smooth_across_window() {
    let g = biharmonic_green_torus(48, TWO_PI, [0.0; 4]).unwrap();
    let fit = fit_log_singularity(&g, Some((0.6, 1.2))).unwrap();
    let axis: Vec<&BetaSample> = fit.beta_samples.iter().filter(|b| b.direction == [1, 0, 0, 0]).collect();
    let spread = axis.iter().map(|b| b.value).fold(f64::NEG_INFINITY, f64::max)
        - axis.iter().map(|b| b.value).fold(f64::INFINITY, f64::min);
    let log_span = fit.c_log.abs() * 2f64.ln();
    assert!(spread < 0.2 * log_span, "{spread} vs {log_span}");
}

#[test]
fn fit_window_validation() {
    let g = biharmonic_green_torus(32, TWO_PI, [0.0; 4]).unwrap();
    assert!(matches!(fit_log_singularity(&g, None), Err(PotentialError::BadWindow(..))));
    assert!(matches!(
        fit_log_singularity(&g, Some((0.2, 0.8))),
        Err(PotentialError::WindowUnresolved { .. })
    ));
    assert!(fit_log_singularity(&g, Some((0.45, 0.8))).is_ok());
}

#[test]
fn laplacian_kernel_fails_the_log_fit() {
    let g = TorusGreen::new(48, TWO_PI, GreenKernel::Laplacian, [0.0; 4]).unwrap();
    let fit = fit_log_singularity(&g, Some((0.6, 1.2))).unwrap();
    assert!(!fit.is_consistent(), "rms {} c_log {}", fit.rms, fit.c_log);
    assert!((fit.c_log / c_log_exact() - 1.0).abs() > 0.5);
}

#[test]
fn representation_identity() {
    let f = TorusSpectralField::new(2.0, 8).unwrap();
    assert_eq!(representation_check(&f, 4).unwrap(), 0.0);
    let c = TorusSpectralField::cosine(2.0, 8, [0, 0, 0, 0], 3.5).unwrap();
    assert!(representation_check(&c, 4).unwrap() <= 1e-12);
    let cos = TorusSpectralField::cosine(2.0, 8, [1, 0, 0, 0], 1.0).unwrap();
    assert!(representation_check(&cos, 8).unwrap() <= 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let mut f = TorusSpectralField::random(&mut rng, 1.7, 8, 10, 3).unwrap();
        f.add_real_mode([0; 4], Complex64::new(rng.random_range(-2.0..2.0), 0.0)).unwrap();
        assert!(representation_check(&f, 8).unwrap() <= 1e-9);
    }
}

#[test]
fn green_applied_to_a_mode() {
    let l = 2.0;
    let g = biharmonic_green_torus(16, l, [0.0; 4]).unwrap();
    let f = TorusSpectralField::cosine(l, 16, [1, 1, 0, 2], 2.0).unwrap();
    let u = g.apply(&f);
    let k4 = ((TWO_PI / l).powi(2) * 6.0).powi(2);
    let x = [0.1, 0.7, 0.2, 1.3];
    assert!((u.eval(&x) * k4 - f.eval(&x)).abs() < 1e-12);
}

#[test]
fn regular_part_multiplier() {
    let l = 2.0;
    let zero = TorusSpectralField::new(l, 16).unwrap();
    assert_eq!(regular_part_field(&zero).mode_count(), 0);
    let constant = TorusSpectralField::cosine(l, 16, [0; 4], 4.0).unwrap();
    assert_eq!(regular_part_field(&constant).mode_count(), 0);
    let b = TorusSpectralField::cosine(l, 16, [0, 2, 1, 0], 1.5).unwrap();
    let phi = regular_part_field(&b);
    let k4 = ((TWO_PI / l).powi(2) * 5.0).powi(2);
    for (m, c) in b.modes() {
        assert!((phi.coefficient(m) - c * (2.0 / k4)).norm() < 1e-15);
    }
    let x = [0.3, 0.4, 0.5, 0.6];
    assert!((phi.bilaplacian().eval(&x) - 2.0 * b.eval(&x)).abs() < 1e-12);
}

// ---- R^4 potentials ----

fn gaussian(center: Point, a: f64) -> Density {
    Density::general(
        move |y| {
            let d2: f64 = (0..4).map(|i| (y[i] - center[i]).powi(2)).sum();
            (-a * d2).exp()
        },
        9.0,
        1.0,
    )
}

#[test]
fn bubble_density_mass() {
    for h in [0.5, 1.0, 2.0] {
        let d = Density::bubble(RescaledBubble::new(h));
        let mass = d.mass();
        assert!((mass - 8.0 * PI * PI).abs() <= 2.0 * d.tail_estimate(), "H = {h}: {mass}");
    }
    let g = gaussian([0.2, 0.0, -0.1, 0.3], 1.5);
    assert!((g.mass() - (PI / 1.5).powi(2)).abs() < 1e-8);
}

#[test]
fn decay_cutoff_rule() {
    let r = decay_cutoff(1.0, 8.0);
    assert!(((1.0 + r).powi(-8) - 1e-12).abs() < 1e-20);
}

#[test]
fn potential_vanishes_at_origin() {
    let d = Density::bubble(RescaledBubble::standard());
    assert_eq!(log_potential(&d, &[0.0; 4]).unwrap(), 0.0);
    for i in 0..4 {
        assert_eq!(potential_derivative(&d, &[0.0; 4], PotentialDerivative::Gradient(i)).unwrap(), 0.0);
    }
    let g = potential_derivative(&d.to_general(), &[0.0; 4], PotentialDerivative::Gradient(1)).unwrap();
    assert!(g.abs() < 1e-10);
}

#[test]
fn bubble_potential_reproduces_profile() {
    for h in [0.5, 1.0, 2.0] {
        let b = RescaledBubble::new(h);
        let d = Density::bubble(b);
        for x in [[5.0, 0.0, 0.0, 0.0], [3.0, 4.0, 0.0, 0.0], [1.0, -2.0, 2.0, 4.0], [0.3, 0.1, 0.0, 0.2]] {
            let v = log_potential(&d, &x).unwrap();
            assert!((v - b.value(&x)).abs() <= 1e-3, "H = {h}, x = {x:?}: {v} vs {}", b.value(&x));
        }
    }
}

#[test]
fn bubble_potential_laplacian_matches_profile() {
    let b = RescaledBubble::standard();
    let d = Density::bubble(b);
    for x in [[5.0, 0.0, 0.0, 0.0], [0.0, 1.0, 1.0, 0.5]] {
        let lap = potential_derivative(&d, &x, PotentialDerivative::Laplacian).unwrap();
        assert!((lap - b.laplacian(&x)).abs() <= 1e-3);
        let grad = b.gradient(&x);
        for i in 0..4 {
            let gi = potential_derivative(&d, &x, PotentialDerivative::Gradient(i)).unwrap();
            assert!((gi - grad[i]).abs() < 1e-8);
        }
    }
}

#[test]
fn far_field_log_slope() {
    let b = RescaledBubble::standard();
    let d = Density::bubble(b).with_cutoff(1e6);
    let ts = [1e2, 3e2, 1e3, 3e3, 1e4];
    let logs: Vec<f64> = ts.iter().map(|t: &f64| t.ln()).collect();
    let vs: Vec<f64> = ts.iter().map(|&t| log_potential(&d, &[t, 0.0, 0.0, 0.0]).unwrap()).collect();
    let fit = line_fit(&logs, &vs);
    let expect = -d.mass() / (4.0 * PI * PI);
    assert!((fit.slope / expect - 1.0).abs() <= 0.01);
    assert!((fit.slope + 2.0).abs() <= 0.02);
}

#[test]
fn far_field_grad_laplacian() {
    let d = Density::bubble(RescaledBubble::standard()).with_cutoff(1e6);
    for t in [50.0, 200.0] {
        let x = [0.0, t * 0.6, 0.0, t * 0.8];
        let gl: f64 = (0..4)
            .map(|i| potential_derivative(&d, &x, PotentialDerivative::GradLaplacian(i)).unwrap() * x[i] / t)
            .sum();
        assert!((gl * t.powi(3) - 8.0).abs() < 0.01, "t = {t}: {}", gl * t.powi(3));
        let lap = potential_derivative(&d, &x, PotentialDerivative::Laplacian).unwrap();
        assert!((lap * t * t + 4.0).abs() < 0.01);
    }
}

#[test]
fn radial_profile_consistency() {
    let d = Density::bubble(RescaledBubble::new(1.3));
    for t in [0.5, 2.0, 7.0] {
        let p = radial_potential(&d, t).unwrap();
        assert!((p.laplacian - (p.ddv + 3.0 * p.dv / t)).abs() < 1e-10);
        let h = 1e-4;
        let lp = radial_potential(&d, t + h).unwrap().laplacian;
        let lm = radial_potential(&d, t - h).unwrap().laplacian;
        assert!(((lp - lm) / (2.0 * h) - p.dlaplacian).abs() < 1e-6);
    }
}

#[test]
fn general_path_agrees_with_radial_path() {
    let d = Density::bubble(RescaledBubble::standard());
    let g = d.to_general();
    let x = [3.0, 1.0, -2.0, 0.5];
    for which in [
        PotentialDerivative::Value,
        PotentialDerivative::Gradient(2),
        PotentialDerivative::Laplacian,
        PotentialDerivative::Hessian(0, 0),
        PotentialDerivative::Hessian(1, 3),
        PotentialDerivative::GradLaplacian(0),
    ] {
        let a = potential_derivative(&d, &x, which).unwrap();
        let b = potential_derivative(&g, &x, which).unwrap();
        assert!((a - b).abs() < 1e-6, "{which:?}: {a} vs {b}");
    }
}

fn central_diff(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h)
}

fn shifted(x: &Point, i: usize, s: f64) -> Point {
    let mut y = *x;
    y[i] += s;
    y
}

#[test]
fn derivative_kernels_match_finite_differences() {
    let d = gaussian([0.4, -0.3, 0.2, 0.1], 1.2);
    let x = [0.5, 0.8, -0.6, 0.2];
    let h = 0.05;
    let pot = |w: PotentialDerivative, y: &Point| potential_derivative(&d, y, w).unwrap();
    for i in 0..4 {
        let g = pot(PotentialDerivative::Gradient(i), &x);
        let fd = central_diff(|s| pot(PotentialDerivative::Value, &shifted(&x, i, s)), h);
        assert!((g - fd).abs() < 1e-5, "grad {i}: {g} vs {fd}");
        for j in i..4 {
            let hij = pot(PotentialDerivative::Hessian(i, j), &x);
            let fd = central_diff(|s| pot(PotentialDerivative::Gradient(j), &shifted(&x, i, s)), h);
            assert!((hij - fd).abs() < 1e-5, "hess {i}{j}: {hij} vs {fd}");
        }
        let gl = pot(PotentialDerivative::GradLaplacian(i), &x);
        let fd = central_diff(|s| pot(PotentialDerivative::Laplacian, &shifted(&x, i, s)), h);
        assert!((gl - fd).abs() < 1e-5, "grad lap {i}: {gl} vs {fd}");
    }
    let trace: f64 = (0..4).map(|i| pot(PotentialDerivative::Hessian(i, i), &x)).sum();
    assert!((trace - pot(PotentialDerivative::Laplacian, &x)).abs() < 1e-8);
}

#[test]
fn general_quadrature_converges_under_refinement() {
    let d = Density::bubble(RescaledBubble::standard());
    let x = [2.0, -1.0, 0.5, 1.5];
    let exact = log_potential(&d, &x).unwrap();
    let levels = [(6, 4, 8), (10, 8, 16), (14, 16, 32)];
    let errs: Vec<f64> = levels
        .iter()
        .map(|&(p, s, f)| {
            let q = PotentialQuadrature {
                panel_nodes: p,
                sphere_s: s,
                sphere_phi: f,
                tolerance: f64::INFINITY,
            };
            (potential_with(&d.to_general(), &x, PotentialDerivative::Value, &q).unwrap().value - exact).abs()
        })
        .collect();
    assert!(errs[1] < 1e-3 * errs[0] && errs[2] < errs[1] && errs[2] < 1e-8, "{errs:?}");
}

#[test]
fn quadrature_tolerance_is_enforced() {
    let q = PotentialQuadrature {
        panel_nodes: 2,
        sphere_s: 2,
        sphere_phi: 2,
        tolerance: 1e-12,
    };
    let r = potential_with(&gaussian([0.0; 4], 1.0), &[0.5, 0.0, 0.0, 0.0], PotentialDerivative::Value, &q);
    assert!(matches!(r, Err(PotentialError::QuadratureTolerance { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn green_is_translation_invariant(a in prop::array::uniform4(-1.0f64..1.0), b in prop::array::uniform4(0.0f64..2.0)) {
        let g0 = biharmonic_green_torus(16, 2.0, [0.0; 4]).unwrap();
        let ga = biharmonic_green_torus(16, 2.0, a).unwrap();
        let shifted: Point = std::array::from_fn(|i| b[i] + a[i]);
        prop_assert!((g0.value(&b) - ga.value(&shifted)).abs() < 1e-10);
    }

    #[test]
    fn sphere_mean_factor_is_bounded(z in 0.0f64..200.0) {
        prop_assert!(sphere_mean_factor(z).abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn bubble_potential_matches_profile_everywhere(t in 0.0f64..40.0, h in 0.5f64..2.0) {
        let b = RescaledBubble::new(h);
        let v = log_potential(&Density::bubble(b), &[0.0, t, 0.0, 0.0]).unwrap();
        prop_assert!((v - b.value(&[0.0, t, 0.0, 0.0])).abs() < 1e-6);
    }
}
