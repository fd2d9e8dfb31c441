use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use paneitz_bench::{jet, sample_points};
use paneitz_core::bubble::{KernelElement, RescaledBubble};
use paneitz_core::cnc::{inverse_metric_taylor, log_det_expansion, metric_taylor_from_jet};
use paneitz_core::geodesic::{geodesic_distance, BlowUpMetric, GeodesicOptions};
use paneitz_core::potential::{biharmonic_green_torus, fit_log_singularity};
use paneitz_core::{BoxDomain, Jet, ScalarField};

fn bubble(c: &mut Criterion) {
    let pts = sample_points(1000, 50.0);
    let rb = RescaledBubble::new(1.3);
    c.bench_function("bubble_residual_1000", |b| {
        b.iter(|| pts.iter().map(|y| rb.pde_residual(black_box(y)).abs()).fold(0.0, f64::max))
    });
    let k = KernelElement::all();
    c.bench_function("kernel_residual_1000x5", |b| {
        b.iter(|| pts.iter().flat_map(|y| k.iter().map(move |e| e.residual(&rb, black_box(y)).abs())).fold(0.0, f64::max))
    });
    let f = rb.field(BoxDomain::everywhere());
    c.bench_function("bubble_jet_order4", |b| b.iter(|| f.jet(black_box(&[0.3, -1.2, 0.5, 2.0]), 4).unwrap()));
}

fn jets(c: &mut Criterion) {
    let x = Jet::coords(4, &[0.3, -0.2, 0.1, 0.4]);
    c.bench_function("jet_exp_ln_order4", |b| {
        b.iter(|| {
            let s = x.iter().fold(Jet::constant(4, 0.0), |a, v| a + v.sqr());
            (black_box(s) + 1.0).ln().exp()
        })
    });
}

fn cnc(c: &mut Criterion) {
    let j = jet();
    c.bench_function("cnc_metric_taylor", |b| b.iter(|| metric_taylor_from_jet(black_box(&j)).unwrap()));
    let mt = metric_taylor_from_jet(&j).unwrap();
    c.bench_function("cnc_inverse_and_log_det", |b| b.iter(|| (inverse_metric_taylor(black_box(&mt)), log_det_expansion(&mt))));
}

fn green(c: &mut Criterion) {
    let g = biharmonic_green_torus(16, 2.0, [0.0; 4]).unwrap();
    c.bench_function("green_eval_n16", |b| b.iter(|| g.value(black_box(&[0.3, 0.7, 1.1, 0.2]))));
    let g48 = biharmonic_green_torus(48, std::f64::consts::TAU, [0.0; 4]).unwrap();
    let mut group = c.benchmark_group("slow");
    group.sample_size(10);
    group.bench_function("green_log_fit_n48", |b| b.iter(|| fit_log_singularity(black_box(&g48), None).unwrap()));
    let m = BlowUpMetric::new(&jet(), 0.05, 3.0);
    let opts = GeodesicOptions::default();
    group.bench_function("geodesic_blow_up_64", |b| {
        b.iter(|| geodesic_distance(&m, black_box(&[1.0, 0.0, 0.0, 0.0]), &[0.0, 1.0, 0.0, 0.0], &opts).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bubble, jets, cnc, green);
criterion_main!(benches);
