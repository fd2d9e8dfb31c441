use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use paneitz_core::bubble::{weighted_sup_norm, BUBBLE_ENERGY};
use paneitz_core::harness::*;
use paneitz_core::jet::Jet;
use paneitz_core::potential::TorusSpectralField;
use paneitz_core::{AnalyticScalar, BoxDomain, Point, ScalarField};

fn exact_cfg(eps_list: &[f64]) -> BubblingSequenceConfig {
    BubblingSequenceConfig {
        eps_list: eps_list.to_vec(),
        ..Default::default()
    }
}

/// Closed-form `2H∫_{B_R} (1 + ρ|y|²)^{-4} dy`.
fn mass_closed_form(h: f64, radius: f64) -> f64 {
    let rho = h.sqrt() / (4.0 * 3f64.sqrt());
    let x = rho * radius * radius;
    2.0 * h * PI * PI / (rho * rho) / 6.0 * (1.0 - (1.0 + 3.0 * x) / (1.0 + x).powi(3))
}

#[test]
fn default_config_is_valid() {
    let cfg = BubblingSequenceConfig::default();
    cfg.validate().unwrap();
    assert!(0.5 * cfg.tau + 0.5 < cfg.sigma && cfg.sigma < 1.0);
}

type Expect = fn(&ConfigError) -> bool;

#[test]
fn config_validation_rejects_bad_values() {
    let base = BubblingSequenceConfig::default();
    let cases: Vec<(BubblingSequenceConfig, Expect)> = vec![
        (BubblingSequenceConfig { eps_list: vec![1e-3, 1e-2], ..base.clone() }, |e| matches!(e, ConfigError::EpsNotDecreasing { .. })),
        (BubblingSequenceConfig { eps_list: vec![1e-2, 1e-2], ..base.clone() }, |e| matches!(e, ConfigError::EpsNotDecreasing { .. })),
        (BubblingSequenceConfig { eps_list: vec![], ..base.clone() }, |e| *e == ConfigError::EmptyEpsList),
        (BubblingSequenceConfig { eps_list: vec![1e-2, -1.0], ..base.clone() }, |e| matches!(e, ConfigError::NonPositiveEps(_))),
        (BubblingSequenceConfig { h: 0.0, ..base.clone() }, |e| matches!(e, ConfigError::NonPositiveH(_))),
        (BubblingSequenceConfig { tau: 1.0, ..base.clone() }, |e| matches!(e, ConfigError::TauOutOfRange(_))),
        (BubblingSequenceConfig { sigma: 0.7, ..base.clone() }, |e| matches!(e, ConfigError::SigmaOutOfRange { .. })),
        (BubblingSequenceConfig { sigma: 1.0, ..base.clone() }, |e| matches!(e, ConfigError::SigmaOutOfRange { .. })),
        (BubblingSequenceConfig { delta1: 0.0, ..base.clone() }, |e| matches!(e, ConfigError::BadDelta(_))),
        (BubblingSequenceConfig { n_s: 0, ..base.clone() }, |e| *e == ConfigError::EmptyQuadrature),
    ];
    for (cfg, is_expected) in cases {
        let err = cfg.validate().unwrap_err();
        assert!(is_expected(&err), "{err:?}");
        assert!(matches!(synth_sequence(&cfg), Err(HarnessError::Config(_))));
    }
}

#[test]
fn zero_correction_gives_exact_bubble() {
    let seq = synth_sequence(&exact_cfg(&[1e-2, 1e-4])).unwrap();
    for m in &seq {
        assert_eq!(m.center_value(), -m.eps.ln());
        for x in [[0.0; 4], [1e-3, 0.0, 2e-3, -1e-3], [0.1, 0.2, -0.3, 0.05]] {
            let d = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let v = m.field.value(&x).unwrap();
            assert!((v - m.params.eval(d)).abs() <= 1e-12 * v.abs().max(1.0), "{v} vs {}", m.params.eval(d));
        }
    }
}

#[test]
fn center_value_includes_correction() {
    let cfg = BubblingSequenceConfig {
        amplitude: 0.3,
        normalize: false,
        ..exact_cfg(&[1e-3])
    };
    let m = &synth_sequence(&cfg).unwrap()[0];
    assert!((m.center_value() - (-(1e-3f64).ln() + 0.3)).abs() < 1e-12);
    assert!((m.field.value(&[0.0; 4]).unwrap() - m.center_value()).abs() < 1e-12);
}

#[test]
fn normalized_correction_vanishes_to_first_order() {
    let cfg = BubblingSequenceConfig {
        amplitude: 0.2,
        modes: vec![[1, 2, 0, -1], [0, 1, 1, 0]],
        random_phases: true,
        seed: 5,
        ..exact_cfg(&[1e-2])
    };
    let c = build_correction(&cfg);
    assert!(c.waves.iter().any(|(_, th)| *th != 0.0));
    let j = c.jet(&Jet::coords(2, &[0.0; 4]));
    assert!(j.value().abs() < 1e-15);
    assert!(j.gradient().iter().all(|g| g.abs() < 1e-15));
    let x = [0.1, -0.2, 0.05, 0.3];
    assert!((c.jet(&Jet::coords(0, &x)).value() - c.value(&x)).abs() < 1e-14);
}

#[test]
fn seeded_sequences_are_bit_identical() {
    let cfg = BubblingSequenceConfig {
        amplitude: 0.1,
        modes: vec![[1, 0, 1, 0], [0, 2, 0, 1]],
        random_phases: true,
        seed: 99,
        ..exact_cfg(&[1e-2, 1e-3])
    };
    let (a, b) = (synth_sequence(&cfg).unwrap(), synth_sequence(&cfg).unwrap());
    let x = [0.01, -0.02, 0.03, 0.004];
    for (p, q) in a.iter().zip(&b) {
        assert_eq!(p.correction, q.correction);
        assert_eq!(p.field.value(&x).unwrap().to_bits(), q.field.value(&x).unwrap().to_bits());
    }
    let other = synth_sequence(&BubblingSequenceConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(other[0].correction, a[0].correction);
}

#[test]
fn huge_correction_is_rejected() {
    let cfg = BubblingSequenceConfig {
        amplitude: 200.0,
        ..exact_cfg(&[1e-2])
    };
    assert!(matches!(synth_sequence(&cfg), Err(HarnessError::Overflow(_))));
}

#[test]
fn weighted_norm_of_cosine_correction() {
    let (beta, tau, delta) = (0.1, 0.5, 0.5);
    let cfg = BubblingSequenceConfig {
        amplitude: beta,
        modes: vec![[1, 0, 0, 0]],
        normalize: true,
        tau,
        delta1: delta,
        ..exact_cfg(&[1e-3])
    };
    let m = &synth_sequence(&cfg).unwrap()[0];
    let w = weighted_sup_norm(m.field.as_ref(), &m.params, tau, delta).unwrap();
    // c = β(cos x₀ − 1); (1 − cos d)/d^τ increases on (0, δ], so the seminorm sits at d = δ.
    let expect = beta * (1.0 - delta.cos()) / delta.powf(tau);
    assert!((w.weighted / expect - 1.0).abs() <= 0.05, "{} vs {expect}", w.weighted);
}

#[test]
fn alpha_matches_closed_form_mass() {
    let seq = synth_sequence(&exact_cfg(&[1e-2, 1e-3, 1e-4])).unwrap();
    let sweep = alpha_sweep(&seq, QuadratureSizes::from_config(&BubblingSequenceConfig::default())).unwrap();
    for row in &sweep.rows {
        let expect = mass_closed_form(1.0, -row.eps.ln());
        assert!((row.alpha - expect).abs() <= 1e-9 * expect, "{} vs {expect}", row.alpha);
        assert!(row.error_estimate <= 1e-8 * expect);
        assert_eq!(row.deviation, row.alpha - BUBBLE_ENERGY);
        assert!(row.alpha < BUBBLE_ENERGY);
    }
}

#[test]
fn exact_bubble_deviation_decays_faster_than_inverse_log() {
    let seq = synth_sequence(&exact_cfg(&[1e-2, 1e-3, 1e-4, 1e-5])).unwrap();
    let sweep = alpha_sweep(&seq, QuadratureSizes::from_config(&BubblingSequenceConfig::default())).unwrap();
    assert!(sweep.inverse_log_fit.is_some());
    // |α − 16π²| ~ 48π²/(ρ²L⁴) for large L.
    let s = sweep.tail_exponent.unwrap();
    assert!(s < -3.0 && s > -4.5, "{s}");
    assert!(sweep.faster_than_inverse_log);
}

#[test]
fn alpha_invariant_under_h_doubling_with_shift() {
    let cfg = BubblingSequenceConfig {
        amplitude: 0.05,
        modes: vec![[0, 1, 0, 1]],
        random_phases: true,
        seed: 3,
        ..exact_cfg(&[1e-3])
    };
    let m = &synth_sequence(&cfg).unwrap()[0];
    let sizes = QuadratureSizes::from_config(&cfg);
    let ring = ring_radius(m.eps);
    let (a, _) = alpha_integral(m.field.as_ref(), 1.0, m.eps, ring, sizes).unwrap();
    let f = m.field.clone();
    let shifted = AnalyticScalar::new(BoxDomain::cube([0.0; 4], cfg.delta1), move |x| {
        let coords: [f64; 4] = std::array::from_fn(|i| x[i].value());
        let order = x[0].order();
        let j = f.jet(&coords, order).unwrap();
        // Re-expand about the point of evaluation.
        Jet::from_partials(order, |al| j.partial(al)) + (-(2f64.ln()) / 4.0)
    });
    let (b, _) = alpha_integral(&shifted, 2.0, m.eps, ring, sizes).unwrap();
    assert!((a - b).abs() <= 1e-12 * a, "{a} vs {b}");
}

#[test]
fn long_range_rings_of_exact_bubble() {
    let eps = 1e-4;
    let m = &synth_sequence(&exact_cfg(&[eps])).unwrap()[0];
    let rep = long_range_checks(m.field.as_ref(), eps, 0.5).unwrap();
    let l = -eps.ln();
    let x = m.params.rho() * l * l;
    // Closed forms of rV', r²ΔV and r³(ΔV)' for V = −ln(1 + ρr²) at r = L.
    let d1 = -2.0 * x / (1.0 + x);
    let d2 = -4.0 * x * (2.0 + x) / (1.0 + x).powi(2);
    let d3 = 8.0 * x * x * (3.0 + x) / (1.0 + x).powi(3);
    for (name, expect) in [("radial_derivative", d1), ("laplacian", d2), ("radial_derivative_laplacian", d3)] {
        let c = rep.check(name).unwrap();
        assert!((c.value - expect).abs() <= 1e-8 * expect.abs(), "{name}: {} vs {expect}", c.value);
        assert!(c.error_estimate <= 1e-9);
        assert!(c.pass, "{c:?}");
    }
    let slope = rep.check("slope").unwrap();
    assert!((slope.value / -2.0 - 1.0).abs() <= 0.01, "{slope:?}");
    assert!((rep.check("laplacian").unwrap().value / -4.0 - 1.0).abs() <= 0.05);
    assert!((rep.check("radial_derivative_laplacian").unwrap().value / 8.0 - 1.0).abs() <= 0.05);
}

#[test]
fn ring_outside_domain_is_an_error() {
    let m = &synth_sequence(&BubblingSequenceConfig {
        delta1: 0.1,
        ..exact_cfg(&[0.3])
    })
    .unwrap()[0];
    assert!(matches!(long_range_checks(m.field.as_ref(), 0.3, 0.1), Err(HarnessError::RingOutsideDomain { .. })));
}

#[test]
fn mainest_zero_correction() {
    let seq = synth_sequence(&exact_cfg(&[1e-2, 1e-3, 1e-4])).unwrap();
    let fit = mainest_fit(&seq, 0.5, 0.5).unwrap();
    assert!(fit.rows.iter().all(|r| r.c1 <= C1_ZERO), "{:?}", fit.rows);
    assert!(fit.stable);
    assert!(fit.c1_exponent.is_none());
}

#[test]
fn mainest_normalized_correction_is_stable() {
    let cfg = BubblingSequenceConfig {
        amplitude: 0.2,
        modes: vec![[1, 1, 0, 0], [0, 0, 2, 1]],
        random_phases: true,
        seed: 17,
        ..exact_cfg(&[1e-2, 1e-3, 1e-4, 1e-5])
    };
    let fit = mainest_fit(&synth_sequence(&cfg).unwrap(), cfg.tau, cfg.delta1).unwrap();
    assert!(fit.stable, "{fit:?}");
    assert!(fit.c1_ratio <= 1.1, "{}", fit.c1_ratio);
}

#[test]
fn mainest_flags_nonzero_center_value() {
    let cfg = BubblingSequenceConfig {
        amplitude: 0.2,
        normalize: false,
        ..exact_cfg(&[1e-2, 1e-3, 1e-4, 1e-5])
    };
    let fit = mainest_fit(&synth_sequence(&cfg).unwrap(), cfg.tau, cfg.delta1).unwrap();
    assert!(!fit.stable);
    let s = fit.c1_exponent.unwrap();
    assert!((s + cfg.tau).abs() <= 0.05, "{s}");
}

#[test]
fn estimate_report_collects_everything() {
    let cfg = exact_cfg(&[1e-2, 1e-3]);
    let rep = estimate_report(&cfg).unwrap();
    assert_eq!(rep.alpha.rows.len(), 2);
    assert_eq!(rep.rings.len(), 2);
    assert_eq!(rep.mainest.rows.len(), 2);
    let json = serde_json::to_value(&rep).unwrap();
    assert!(json["alpha"]["rows"][0]["error_estimate"].is_number());
}

fn constant_field(side: f64, v: f64) -> TorusSpectralField {
    TorusSpectralField::cosine(side, 8, [0; 4], v).unwrap()
}

#[test]
fn vrate_constant_data_balances() {
    let side = 2.0 * PI;
    let setup = VrateSetup::new(constant_field(side, 2.0), constant_field(side, -1.0), [0.3, 0.1, -0.2, 0.0]);
    let rep = vrate_pipeline(&setup, &[1e-2, 1e-3], 0.5).unwrap();
    assert!(rep.balance_norm <= 1e-12, "{rep:?}");
    assert!(rep.rate.is_none());
}

#[test]
fn vrate_tuned_pair_balances() {
    let side = 2.0 * PI;
    // k·q = 0.7 keeps the sampled offsets away from the other zeros at k·x ∈ {0, −0.7, π}.
    let q = [0.4, 0.2, 0.9, 0.1];
    let setup = VrateSetup::tuned(side, 8, [1, 2, 0, -1], 0.3, q).unwrap();
    let rep = vrate_pipeline(&setup, &[1e-4, 1e-5, 1e-6, 1e-7, 1e-8], 0.5).unwrap();
    assert!(rep.balance_norm <= 1e-8, "{rep:?}");
    assert!(rep.grad_log_h.iter().any(|c| c.abs() > 1e-2));
    // Linear growth away from the zero: |balance(q + ε^{τ/2}e)| ~ ε^{τ/2}.
    let rate = rep.rate.unwrap();
    assert!((rate - rep.expected_rate).abs() <= 0.05, "{rate}");
}

#[test]
fn vrate_untuned_pair_matches_spectral_gradient() {
    let side = 2.0 * PI;
    let n = 8;
    let mut h = constant_field(side, 3.0);
    h.add_real_mode([1, 0, 1, 0], Complex64::new(0.2, 0.1)).unwrap();
    h.add_real_mode([0, 1, -1, 2], Complex64::new(-0.15, 0.05)).unwrap();
    let mut b = TorusSpectralField::new(side, n).unwrap();
    b.add_real_mode([2, 1, 0, 0], Complex64::new(0.7, -0.2)).unwrap();
    b.add_real_mode([0, -1, 1, 1], Complex64::new(0.3, 0.4)).unwrap();
    let q: Point = [0.7, 1.3, -0.4, 2.2];
    let rep = vrate_pipeline(&VrateSetup::new(h.clone(), b.clone(), q), &[1e-2], 0.5).unwrap();
    let w = 2.0 * PI / side;
    let mut expect = [0.0; 4];
    let hq = h.eval(&q);
    for (m, c) in h.modes() {
        let ph = w * (0..4).map(|j| m[j] as f64 * q[j]).sum::<f64>();
        for i in 0..4 {
            expect[i] += -w * m[i] as f64 * (c.re * ph.sin() + c.im * ph.cos()) / hq;
        }
    }
    for (m, c) in b.modes() {
        let k2 = w * w * m.iter().map(|v| (v * v) as f64).sum::<f64>();
        if k2 == 0.0 {
            continue;
        }
        let ph = w * (0..4).map(|j| m[j] as f64 * q[j]).sum::<f64>();
        for i in 0..4 {
            // φ̂ = 2b̂/|k|⁴, then 4∂_i.
            expect[i] += 4.0 * 2.0 / (k2 * k2) * -w * m[i] as f64 * (c.re * ph.sin() + c.im * ph.cos());
        }
    }
    assert!(rep.balance_norm > 1e-3);
    assert!(rep.beta_term.iter().all(|c| c.abs() <= 1e-9), "{:?}", rep.beta_term);
    for i in 0..4 {
        assert!((rep.balance[i] - expect[i]).abs() <= 1e-6, "{i}: {} vs {}", rep.balance[i], expect[i]);
    }
}

#[test]
fn multi_bubble_is_unsupported() {
    let side = 2.0 * PI;
    let mut setup = VrateSetup::new(constant_field(side, 1.0), constant_field(side, 0.0), [0.0; 4]);
    setup.bubbles = 2;
    assert!(matches!(vrate_pipeline(&setup, &[1e-2], 0.5), Err(HarnessError::Unsupported(_))));
}

#[test]
fn inner_and_ring_radii() {
    let eps = 1e-3;
    assert!((inner_radius(eps) - eps * ring_radius(eps)).abs() < 1e-18);
    assert!((ring_radius(eps) - 1000f64.ln()).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn synthetic_field_is_bubble_plus_correction(
        amp in -0.5..0.5f64,
        seed in 0u64..1000,
        x in prop::array::uniform4(-0.3..0.3f64),
    ) {
        let cfg = BubblingSequenceConfig {
            amplitude: amp,
            modes: vec![[1, -1, 0, 2], [0, 0, 1, 1]],
            random_phases: true,
            seed,
            ..exact_cfg(&[1e-2])
        };
        let m = &synth_sequence(&cfg).unwrap()[0];
        let d = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let v = m.field.value(&x).unwrap();
        prop_assert!((v - m.params.eval(d) - m.correction.value(&x)).abs() <= 1e-12);
    }

    #[test]
    fn alpha_scales_with_h_for_fixed_field(h in 0.5..2.0f64) {
        let m = &synth_sequence(&exact_cfg(&[1e-2])).unwrap()[0];
        let sizes = QuadratureSizes::from_config(&BubblingSequenceConfig::default());
        let (a1, _) = alpha_integral(m.field.as_ref(), 1.0, m.eps, 3.0, sizes).unwrap();
        let (ah, _) = alpha_integral(m.field.as_ref(), h, m.eps, 3.0, sizes).unwrap();
        prop_assert!((ah - h * a1).abs() <= 1e-12 * ah);
    }
}
