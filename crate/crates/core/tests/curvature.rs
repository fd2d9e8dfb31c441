use std::f64::consts::PI;
use std::sync::Arc;

use paneitz_core::curvature::*;
use paneitz_core::field::*;
use paneitz_core::jet::Jet;
use proptest::prelude::*;

fn dom() -> BoxDomain {
    BoxDomain::cube([0.0; 4], 1.0)
}

fn r2(x: &[Jet; 4]) -> Jet {
    x.iter().fold(Jet::constant(x[0].order(), 0.0), |a, xi| a + xi.sqr())
}

fn sphere_factor() -> AnalyticScalar {
    AnalyticScalar::new(dom(), |x| (2.0 * (r2(x) + 1.0).recip()).ln())
}

fn bubble(h: f64) -> AnalyticScalar {
    let rho = h.sqrt() / (4.0 * 3f64.sqrt());
    AnalyticScalar::new(dom(), move |x| -(r2(x) * rho + 1.0).ln())
}

// Christoffel symbols and Riemann tensor by nested five-point differences
// of a plain f64 metric closure.
fn fd_riemann(g: &dyn Fn(&[f64; 4]) -> [[f64; 4]; 4], x: [f64; 4]) -> Tensor4 {
    let h = 1e-3;
    let d5 = |f: &dyn Fn(&[f64; 4]) -> f64, p: [f64; 4], k: usize| {
        let at = |s: f64| {
            let mut q = p;
            q[k] += s * h;
            f(&q)
        };
        (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h)
    };
    let inv = |p: &[f64; 4]| {
        let m = nalgebra::Matrix4::from_fn(|i, j| g(p)[i][j]);
        m.try_inverse().unwrap()
    };
    let gamma = |p: &[f64; 4], k: usize, i: usize, j: usize| {
        let gi = inv(p);
        let mut s = 0.0;
        for l in 0..4 {
            let dil = d5(&|q| g(q)[l][j], *p, i);
            let djl = d5(&|q| g(q)[l][i], *p, j);
            let dlij = d5(&|q| g(q)[i][j], *p, l);
            s += 0.5 * gi[(k, l)] * (dil + djl - dlij);
        }
        s
    };
    let gx = g(&x);
    let mut up = zero_tensor();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let mut v = d5(&|q| gamma(q, a, d, b), x, c) - d5(&|q| gamma(q, a, c, b), x, d);
                    for e in 0..4 {
                        v += gamma(&x, a, c, e) * gamma(&x, e, d, b) - gamma(&x, a, d, e) * gamma(&x, e, c, b);
                    }
                    up[a][b][c][d] = v;
                }
            }
        }
    }
    let mut r = zero_tensor();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    r[a][b][c][d] = (0..4).map(|e| gx[a][e] * up[e][b][c][d]).sum();
                }
            }
        }
    }
    r
}

#[test]
fn flat_metric_has_zero_curvature() {
    let g = AnalyticMetric::euclidean(dom());
    let riem = riemann_of_metric(&g, &[0.3, 0.1, -0.2, 0.5]).unwrap();
    assert!(riem.r.iter().flatten().flatten().flatten().all(|v| *v == 0.0));
    assert_eq!(q_curvature(&g, &[0.0; 4]).unwrap(), 0.0);
}

#[test]
fn round_sphere_invariants_across_chart() {
    let g = AnalyticMetric::stereographic_sphere(dom(), 1.0);
    for p in [[0.0; 4], [0.3, -0.2, 0.1, 0.4], [0.7, 0.5, -0.3, 0.2]] {
        let riem = riemann_of_metric(&g, &p).unwrap();
        assert!((riem.scalar() - 12.0).abs() < 1e-10);
        assert!((riem.ricci_norm_sq() - 36.0).abs() < 1e-9);
        let q = q_curvature(&g, &p).unwrap();
        assert!((q - 3.0).abs() < 1e-6, "Q = {q}");
        let w = weyl_tensor(&riem, &riem.g).unwrap();
        assert!(norm_sq(&w, &riem.ginv) < 1e-18);
    }
}

#[test]
fn sphere_of_other_curvature() {
    let g = AnalyticMetric::stereographic_sphere(dom(), 0.5);
    let riem = riemann_of_metric(&g, &[0.2, 0.0, 0.1, 0.0]).unwrap();
    assert!((riem.scalar() - 6.0).abs() < 1e-10);
    // Q = −(1/12)(0 − R² + 3|Ric|²) = −(1/12)(−36 + 27) = 0.75
    assert!((q_curvature(&g, &[0.1; 4]).unwrap() - 0.75).abs() < 1e-9);
}

#[test]
fn riemann_matches_finite_difference_oracle() {
    let (a, b, c) = (0.3, -0.2, 0.15);
    let gf = move |p: &[f64; 4]| {
        let mut m = [[0.0; 4]; 4];
        m[0][0] = 1.0 + a * p[1] * p[1];
        m[1][1] = 1.0 + b * p[2] * p[2] + c * p[0] * p[0];
        m[2][2] = 1.0 + c * p[3] * p[3];
        m[3][3] = 1.0 + a * p[0] * p[2];
        m
    };
    let g = AnalyticMetric::new(dom(), move |x| {
        let n = x[0].order();
        let z = Jet::constant(n, 0.0);
        let mut m = [[z; 4]; 4];
        m[0][0] = x[1].sqr() * a + 1.0;
        m[1][1] = x[2].sqr() * b + x[0].sqr() * c + 1.0;
        m[2][2] = x[3].sqr() * c + 1.0;
        m[3][3] = x[0] * x[2] * a + 1.0;
        m
    });
    let p = [0.2, -0.3, 0.4, 0.1];
    let riem = riemann_of_metric(&g, &p).unwrap();
    let oracle = fd_riemann(&gf, p);
    for (x, y) in riem.r.iter().flatten().flatten().flatten().zip(oracle.iter().flatten().flatten().flatten()) {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
}

#[test]
fn weyl_trace_free_on_non_conformally_flat_metric() {
    let g = AnalyticMetric::new(dom(), |x| {
        let n = x[0].order();
        let z = Jet::constant(n, 0.0);
        let mut m = [[z; 4]; 4];
        for i in 0..4 {
            m[i][i] = Jet::constant(n, 1.0);
        }
        m[0][0] += x[1].sqr() * 0.4;
        m[2][2] += x[3].sqr() * -0.3;
        m[0][1] = x[2] * x[3] * 0.2;
        m[1][0] = m[0][1];
        m
    });
    let riem = riemann_of_metric(&g, &[0.1, 0.2, 0.3, -0.1]).unwrap();
    let w = weyl_tensor(&riem, &riem.g).unwrap();
    assert!(norm_sq(&w, &riem.ginv) > 1e-3);
    assert!(trace_defect(&w, &riem.ginv) < 1e-10);
}

#[test]
fn bubble_solves_flat_equation() {
    let g = AnalyticMetric::euclidean(dom());
    let u = bubble(1.0);
    for p in [[0.0; 4], [0.5, 0.1, -0.2, 0.3], [0.9, 0.9, 0.9, 0.9]] {
        let pu = paneitz_apply(&g, &u, &p).unwrap();
        let rhs = 2.0 * (4.0 * u.value(&p).unwrap()).exp();
        assert!((pu - rhs).abs() < 1e-8, "{pu} vs {rhs}");
    }
}

#[test]
fn sphere_factor_solves_flat_equation() {
    let g = AnalyticMetric::euclidean(dom());
    let u = sphere_factor();
    for p in [[0.0; 4], [0.4, 0.1, -0.6, 0.3]] {
        let pu = paneitz_apply(&g, &u, &p).unwrap();
        let rhs = 6.0 * (4.0 * u.value(&p).unwrap()).exp();
        assert!((pu - rhs).abs() < 1e-10);
    }
}

#[test]
fn conformal_transform_of_flat_gives_sphere() {
    let flat: Arc<dyn MetricField> = Arc::new(AnalyticMetric::euclidean(dom()));
    let gt = conformal_transform(flat.clone(), Arc::new(sphere_factor()));
    let sphere = AnalyticMetric::stereographic_sphere(dom(), 1.0);
    let p = [0.3, -0.4, 0.2, 0.6];
    let a = gt.jet(&p, 4).unwrap();
    let b = sphere.jet(&p, 4).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            assert!((a[i][j] - b[i][j]).max_abs() < 1e-12);
        }
    }
    let same = conformal_transform(flat.clone(), Arc::new(AnalyticScalar::zero(dom())));
    assert_eq!(same.value(&p).unwrap(), flat.value(&p).unwrap());
}

#[test]
fn constant_factor_scales_volume() {
    let g: Arc<dyn MetricField> = Arc::new(AnalyticMetric::stereographic_sphere(dom(), 1.0));
    let c = 0.37;
    let gt = conformal_transform(g.clone(), Arc::new(AnalyticScalar::new(dom(), move |x| Jet::constant(x[0].order(), c))));
    let (lo, hi) = ([-0.2, 0.0, 0.1, -0.5], [0.3, 0.4, 0.6, 0.0]);
    let v0 = box_volume(g.as_ref(), &lo, &hi, 4).unwrap();
    let v1 = box_volume(&gt, &lo, &hi, 4).unwrap();
    assert!((v1 / v0 - (4.0 * c).exp()).abs() < 1e-12);
}

#[test]
fn constants_vanish_on_fd_path() {
    let g = SampledMetric::with_default_step(dom(), |p| {
        let s = 4.0 / (1.0 + p.iter().map(|v| v * v).sum::<f64>()).powi(2);
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = s;
        }
        m
    });
    let u = SampledScalar::with_default_step(dom(), |_| 2.5);
    let v = paneitz_apply(&g, &u, &[0.1, 0.2, 0.3, 0.0]).unwrap();
    assert!(v.abs() <= 1e-12);
}

#[test]
fn covariance_exact_for_analytic_inputs() {
    let g: Arc<dyn MetricField> = Arc::new(AnalyticMetric::stereographic_sphere(dom(), 1.0));
    let u: Arc<dyn ScalarField> = Arc::new(AnalyticScalar::new(dom(), |x| (x[0] * 0.3 + x[1] * x[2]).sin() * 0.2));
    let f: Arc<dyn ScalarField> = Arc::new(AnalyticScalar::new(dom(), |x| x[0] * x[1].sqr() + x[3].powi(4)));
    let pts = [[0.1, 0.0, 0.2, -0.1], [0.3, 0.3, -0.2, 0.4]];
    let rep = check_conformal_covariance(g.clone(), u, f.clone(), &pts).unwrap();
    assert!(rep.max_deviation < 1e-10 * rep.scale.max(1.0), "{rep:?}");
    let zero = check_conformal_covariance(g.clone(), Arc::new(AnalyticScalar::zero(dom())), f, &pts).unwrap();
    assert!(zero.max_deviation < 1e-12);
    let konst = Arc::new(AnalyticScalar::new(dom(), |x| Jet::constant(x[0].order(), 1.0)));
    let k = check_conformal_covariance(g, Arc::new(sphere_factor()), konst, &pts).unwrap();
    assert_eq!(k.max_deviation, 0.0);
}

#[test]
fn covariance_refinement_has_stencil_order() {
    let g: Arc<dyn MetricField> = Arc::new(AnalyticMetric::euclidean(dom()));
    let u: Arc<dyn ScalarField> = Arc::new(sphere_factor());
    let f: Arc<dyn ScalarField> = Arc::new(AnalyticScalar::new(dom(), |x| (x[0] * 1.3 + x[1] * x[2]).sin() + x[3].powi(3) * x[0]));
    let pts = [[0.1, 0.2, -0.1, 0.15]];
    let study = covariance_refinement(g, u, f, &pts, &[0.1, 0.05, 0.025]).unwrap();
    assert!(study.deviations.windows(2).all(|w| w[1] < w[0]), "{study:?}");
    assert!((study.fitted_order - 4.0).abs() <= 0.5, "{study:?}");
}

#[test]
fn q_transformation_sphere_factor() {
    let g: Arc<dyn MetricField> = Arc::new(AnalyticMetric::euclidean(dom()));
    let u: Arc<dyn ScalarField> = Arc::new(sphere_factor());
    let pts = [[0.0; 4], [0.2, 0.3, -0.4, 0.1]];
    let rep = check_q_transformation(g.clone(), u.clone(), &pts).unwrap();
    assert!(rep.max_deviation < 1e-9, "{rep:?}");
    let zero = check_q_transformation(g, Arc::new(AnalyticScalar::zero(dom())), &pts).unwrap();
    assert!(zero.max_deviation < 1e-14);
}

#[test]
fn q_transformation_bubble_identifies_h() {
    let h = 2.5;
    let g: Arc<dyn MetricField> = Arc::new(AnalyticMetric::euclidean(dom()));
    let u: Arc<dyn ScalarField> = Arc::new(bubble(h));
    let gt = conformal_transform(g.clone(), u.clone());
    for p in [[0.0; 4], [0.3, -0.2, 0.5, 0.1]] {
        assert!((q_curvature(&gt, &p).unwrap() - h).abs() < 1e-8);
    }
    let rep = check_q_transformation(g, u, &[[0.1, 0.2, 0.3, 0.4]]).unwrap();
    assert!(rep.max_deviation < 1e-9);
}

#[test]
fn gauss_bonnet_sphere() {
    let rep = gauss_bonnet_check(&GaussBonnetModel::RoundSphere {
        perturbation: None,
        resolution: SphereResolution::default(),
    })
    .unwrap();
    let target = 8.0 * PI * PI;
    assert!((rep.value - target).abs() < 0.01 * target, "{rep:?}");
}

#[test]
fn gauss_bonnet_perturbed_sphere() {
    let u: AmbientFn = Arc::new(|x: &[Jet; 5]| x[0] * 0.15 + x[4].sqr() * 0.1 + x[1] * x[2] * 0.05);
    let rep = gauss_bonnet_check(&GaussBonnetModel::RoundSphere {
        perturbation: Some(u),
        resolution: SphereResolution {
            radial: 10,
            polar: 8,
            azimuthal: 10,
        },
    })
    .unwrap();
    let target = 8.0 * PI * PI;
    assert!((rep.value - target).abs() < 0.01 * target, "{rep:?}");
}

#[test]
fn gauss_bonnet_torus() {
    let rep = gauss_bonnet_check(&GaussBonnetModel::FlatTorus { side: 2.0 * PI, samples: 3 }).unwrap();
    assert_eq!(rep.value, 0.0);
}

#[test]
fn coarse_sphere_rule_is_rejected() {
    let err = gauss_bonnet_check(&GaussBonnetModel::RoundSphere {
        perturbation: None,
        resolution: SphereResolution {
            radial: 1,
            polar: 1,
            azimuthal: 1,
        },
    });
    assert!(matches!(err, Err(GeomError::QuadratureDivergence { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn riemann_symmetries_on_random_metrics(c in prop::collection::vec(-0.3f64..0.3, 12), p in prop::collection::vec(-0.5f64..0.5, 4)) {
        let cc = c.clone();
        let g = AnalyticMetric::new(dom(), move |x| {
            let n = x[0].order();
            let mut m = [[Jet::constant(n, 0.0); 4]; 4];
            for i in 0..4 {
                m[i][i] = Jet::constant(n, 1.0) + x[(i + 1) % 4].sqr() * cc[i] + (x[i] * cc[i + 4]).sin() * 0.5;
            }
            m[0][1] = x[2] * x[3] * cc[8];
            m[1][0] = m[0][1];
            m[2][3] = x[0].sqr() * cc[9] + x[1] * cc[10];
            m[3][2] = m[2][3];
            m[0][3] = (x[1] * x[2]).cos() * cc[11] * 0.3;
            m[3][0] = m[0][3];
            m
        });
        let x = [p[0], p[1], p[2], p[3]];
        let riem = riemann_of_metric(&g, &x).unwrap();
        prop_assert!(riem.symmetry_defect() <= 1e-10);
        let w = weyl_tensor(&riem, &riem.g).unwrap();
        prop_assert!(trace_defect(&w, &riem.ginv) <= 1e-10);
    }
}
