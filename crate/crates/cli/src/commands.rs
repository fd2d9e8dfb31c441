//! One suite per command. Each returns its checks and CSV tables.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use paneitz_core::bubble::{KernelElement, RescaledBubble, BUBBLE_ENERGY};
use paneitz_core::cnc::generate::random_conformal_normal_jet;
use paneitz_core::cnc::{
    cnc_identity_suite, contracted_first_derivative, contracted_first_derivative_closed_form, contracted_second_derivative,
    contracted_second_derivative_closed_form, inverse_metric_taylor, log_det_expansion, metric_taylor_from_jet, product_residual,
    CurvatureJet,
};
use paneitz_core::curvature::{
    covariance_refinement, gauss_bonnet_check, q_curvature, CurvatureTermSign, GaussBonnetModel, SphereResolution,
};
use paneitz_core::geodesic::{distance_ratio_sweep, GeodesicOptions};
use paneitz_core::harness::{
    alpha_sweep, long_range_checks, mainest_fit, synth_sequence, vrate_pipeline, BubblingSequenceConfig, QuadratureSizes, VrateSetup,
};
use paneitz_core::pohozaev::{
    curved_chart, pohozaev_balance, radial_third_derivative, radial_third_derivative_fd, BallDomain, PohozaevMetric, PohozaevReport,
};
use paneitz_core::potential::{biharmonic_green_torus, fit_log_singularity, representation_check, TorusSpectralField};
use paneitz_core::stats::loglog_fit;
use paneitz_core::{AnalyticMetric, AnalyticScalar, BoxDomain, Jet, MetricField, Point, ScalarField};

use crate::config::Config;
use crate::report::{Check, Outcome, Table};

pub const COMMANDS: [&str; 12] = [
    "bubble-check",
    "kernel-check",
    "mass",
    "pohozaev",
    "green-fit",
    "represent",
    "cnc",
    "distance",
    "longrange",
    "alpha-sweep",
    "mainest",
    "vrate",
];

/// Independent random stream per suite, so suites do not shift each other.
fn stream(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(salt))
}

fn roundoff(scale: f64) -> f64 {
    16.0 * f64::EPSILON * scale.max(1.0)
}

fn random_point(rng: &mut impl Rng, rmax: f64) -> Point {
    let g: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = rng.random_range(0.0..rmax);
    g.map(|v| v * r / n)
}

fn norm(y: &Point) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn everywhere() -> BoxDomain {
    BoxDomain::everywhere()
}

fn constant(v: f64) -> AnalyticScalar {
    AnalyticScalar::new(everywhere(), move |x| Jet::constant(x[0].order(), v))
}

pub fn run(command: &str, cfg: &Config, seed: u64) -> Outcome {
    match command {
        "bubble-check" => bubble_check(cfg, seed),
        "kernel-check" => kernel_check(cfg, seed),
        "mass" => mass(cfg),
        "pohozaev" => pohozaev(cfg, seed),
        "green-fit" => green_fit(cfg, seed),
        "represent" => represent(cfg, seed),
        "cnc" => cnc(cfg, seed),
        "distance" => distance(cfg, seed),
        "longrange" => longrange(cfg),
        "alpha-sweep" => alpha(cfg),
        "mainest" => mainest(cfg),
        "vrate" => vrate(cfg, seed),
        other => {
            let mut out = Outcome::default();
            out.fail("command", &format!("unknown command {other}"));
            out
        }
    }
}

const RADIUS_BINS: usize = 10;

fn bubble_check(cfg: &Config, seed: u64) -> Outcome {
    let c = &cfg.bubble_check;
    let mut rng = stream(seed, 3);
    let width = c.radius / RADIUS_BINS as f64;
    let mut bins = [(0usize, 0.0f64, 0.0f64); RADIUS_BINS];
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for _ in 0..c.samples {
        let rb = RescaledBubble::new(rng.random_range(c.h_min..=c.h_max));
        let y = random_point(&mut rng, c.radius);
        let res = rb.pde_residual(&y).abs();
        let mag = rb.bilaplacian(&y).abs().max(rb.source(&y).abs());
        let b = &mut bins[((norm(&y) / width) as usize).min(RADIUS_BINS - 1)];
        b.0 += 1;
        b.1 = b.1.max(res);
        b.2 = b.2.max(mag);
        worst = worst.max(res);
        scale = scale.max(mag);
    }
    let mut t = Table::new("bubble-check", "r_lo,r_hi,samples,max_residual,error_estimate");
    for (k, b) in bins.iter().enumerate() {
        t.push(format!("{:e},{:e},{},{:e},{:e}", k as f64 * width, (k + 1) as f64 * width, b.0, b.1, roundoff(b.2)));
    }
    Outcome {
        checks: vec![Check::at_most("max_residual", worst, c.tolerance, roundoff(scale))],
        tables: vec![t],
        errors: Vec::new(),
    }
}

fn kernel_check(cfg: &Config, seed: u64) -> Outcome {
    let c = &cfg.kernel_check;
    let mut rng = stream(seed, 4);
    let elems = KernelElement::all();
    let mut worst = [0.0f64; 5];
    let mut scale = [0.0f64; 5];
    for _ in 0..c.samples {
        let rb = RescaledBubble::new(rng.random_range(c.h_min..=c.h_max));
        let y = random_point(&mut rng, c.radius);
        for (j, e) in elems.iter().enumerate() {
            worst[j] = worst[j].max(e.residual(&rb, &y).abs());
            scale[j] = scale[j].max(e.bilaplacian(&rb, &y).abs());
        }
    }
    let mut out = Outcome::default();
    let mut t = Table::new("kernel-check", "element,max_residual,error_estimate");
    for j in 0..5 {
        out.check(Check::at_most(&format!("psi{j}_max_residual"), worst[j], c.tolerance, roundoff(scale[j])));
        t.push(format!("{j},{:e},{:e}", worst[j], roundoff(scale[j])));
    }
    out.tables.push(t);
    out
}

/// `2H∫_{B_R} (1 + ρ|y|²)^{-4} dy` in closed form.
fn mass_closed_form(h: f64, radius: f64) -> f64 {
    let rho = h.sqrt() / (4.0 * 3f64.sqrt());
    let x = rho * radius * radius;
    2.0 * h * PI * PI / (rho * rho) / 6.0 * (1.0 - (1.0 + 3.0 * x) / (1.0 + x).powi(3))
}

const MASS_RADII: [f64; 8] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 1000.0];

fn mass(cfg: &Config) -> Outcome {
    let c = &cfg.mass;
    let rb = RescaledBubble::new(c.h);
    let mut out = Outcome::default();
    let mut t = Table::new("mass", "radius,mass,closed_form,relative_deficit,error_estimate");
    let mut radii: Vec<f64> = MASS_RADII.to_vec();
    if !radii.contains(&c.radius) {
        radii.push(c.radius);
        radii.sort_by(f64::total_cmp);
    }
    for r in radii {
        match rb.mass_integral(r) {
            Ok(m) => {
                let err = (m - mass_closed_form(c.h, r)).abs().max(roundoff(m));
                t.push(format!("{r:e},{m:e},{:e},{:e},{err:e}", mass_closed_form(c.h, r), 1.0 - m / BUBBLE_ENERGY));
                if r == c.radius {
                    out.check(Check::within("mass_ratio", m / BUBBLE_ENERGY, 1.0, c.tolerance, err / BUBBLE_ENERGY));
                }
            }
            Err(e) => out.fail(&format!("mass_r{r}"), &e),
        }
    }
    out.tables.push(t);
    out
}

fn off_center_anisotropic_bubble() -> AnalyticScalar {
    let rho = RescaledBubble::standard().rho;
    let p = [0.2, -0.1, 0.05, 0.0];
    let eps = 0.3;
    AnalyticScalar::new(everywhere(), move |x| {
        let s = (0..4).fold(Jet::constant(x[0].order(), 0.0), |acc, i| acc + (x[i] - p[i]).sqr());
        -(s * (rho / (eps * eps)) + 1.0).ln() + x[0] * x[1] * 0.2 - x[2].sqr() * 0.1 + x[1] * x[3] * 0.15
    })
}

/// `[f', f'', f''']` in `r` from `s = r²` derivatives.
fn r_derivs(r: f64, ds: [f64; 3]) -> [f64; 3] {
    let [f1, f2, f3] = ds;
    [2.0 * r * f1, 2.0 * f1 + 4.0 * r * r * f2, 12.0 * r * f2 + 8.0 * r.powi(3) * f3]
}

/// `a log(1 + b s) + c e^{-d s}` differentiated in `s`.
fn profile_s(p: [f64; 4], s: f64) -> [f64; 3] {
    let [a, b, c, d] = p;
    let w = 1.0 + b * s;
    let e = (-d * s).exp();
    [a * b / w - c * d * e, -a * b * b / (w * w) + c * d * d * e, 2.0 * a * b.powi(3) / w.powi(3) - c * d.powi(3) * e]
}

fn pohozaev(cfg: &Config, seed: u64) -> Outcome {
    let c = &cfg.pohozaev;
    let mut out = Outcome::default();

    let rb = RescaledBubble::new(1.0);
    let mut flat = Table::new("pohozaev-flat", PohozaevReport::CSV_HEADER);
    match pohozaev_balance(PohozaevMetric::Flat, &rb.field(everywhere()), &constant(1.0), &constant(0.0), &BallDomain::new([0.0; 4], c.radius)) {
        Ok(rep) => {
            flat.push(rep.csv_row(c.radius));
            out.check(Check::at_most(
                "flat_relative_residual",
                rep.relative_residual(),
                c.residual_tolerance,
                rep.error_estimate / rep.i0.abs(),
            ));
        }
        Err(e) => out.fail("flat_relative_residual", &e),
    }
    out.tables.push(flat);

    let jet = random_conformal_normal_jet(&mut stream(seed, 11));
    let u = off_center_anisotropic_bubble();
    let ball = BallDomain::new([0.0; 4], 0.8).with_core(0.1);
    let mut curved = Table::new("pohozaev-curved", PohozaevReport::CSV_HEADER);
    let mut sizes = Vec::new();
    let mut err = 0.0f64;
    for &a in &c.amplitudes {
        let rep = curved_chart(&jet, a, everywhere()).and_then(|(scaled, metric)| {
            let m = PohozaevMetric::Curved {
                metric: &metric,
                jet: &scaled,
                sign: CurvatureTermSign::Minus,
                taylor_radius: 1.0,
            };
            pohozaev_balance(m, &u, &constant(1.0), &constant(0.0), &ball)
        });
        match rep {
            Ok(rep) => {
                curved.push(rep.csv_row(a));
                err = err.max(rep.error_estimate / rep.correction_size().max(f64::MIN_POSITIVE));
                sizes.push(rep.correction_size());
            }
            Err(e) => out.fail(&format!("curved_amplitude_{a:e}"), &e),
        }
    }
    out.tables.push(curved);
    if sizes.len() == c.amplitudes.len() {
        let fit = loglog_fit(&c.amplitudes, &sizes);
        out.check(Check::within("curved_correction_slope", fit.slope, 1.0, c.slope_band, fit.rms.max(err)));
    }

    let mut rng = stream(seed, 12);
    let mut radial = Table::new("pohozaev-radial", "case,r,max_difference,error_estimate");
    let mut worst = 0.0f64;
    let mut fd_err = 0.0f64;
    let mut case = 0;
    while case < c.radial_cases {
        let p = [rng.random_range(-2.0..2.0), rng.random_range(0.1..3.0), rng.random_range(-2.0..2.0), rng.random_range(0.1..2.0)];
        let y: Point = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let r = norm(&y);
        if r <= 0.2 {
            continue;
        }
        let der = r_derivs(r, profile_s(p, r * r));
        let df = |t: f64| r_derivs(t, profile_s(p, t * t))[0];
        let step = 1e-2 * r;
        let mut diff = 0.0f64;
        let mut trunc = 0.0f64;
        for i in 0..4 {
            for m in 0..4 {
                for l in 0..4 {
                    let Ok(v) = radial_third_derivative(der, &y, i, m, l) else {
                        continue;
                    };
                    let fd = radial_third_derivative_fd(&df, &y, i, m, l, step);
                    let half = radial_third_derivative_fd(&df, &y, i, m, l, 0.5 * step);
                    diff = diff.max((v - fd).abs());
                    trunc = trunc.max(4.0 / 3.0 * (fd - half).abs());
                }
            }
        }
        radial.push(format!("{case},{r:e},{diff:e},{trunc:e}"));
        worst = worst.max(diff);
        fd_err = fd_err.max(trunc);
        case += 1;
    }
    out.tables.push(radial);
    out.check(Check::at_most("radial_third_derivative_vs_fd", worst, c.radial_tolerance, fd_err));
    out
}

fn green_fit(cfg: &Config, seed: u64) -> Outcome {
    let c = &cfg.green_fit;
    let mut out = Outcome::default();
    let exact = -1.0 / (8.0 * PI * PI);
    let mut t = Table::new("green-fit", "r,direction,beta,error_estimate");
    match biharmonic_green_torus(c.modes, c.side, [0.0; 4]).and_then(|g| fit_log_singularity(&g, None)) {
        Ok(fit) => {
            for s in &fit.beta_samples {
                let dir: Vec<String> = s.direction.iter().map(i32::to_string).collect();
                t.push(format!("{:e},{},{:e},{:e}", s.r, dir.join(" "), s.value, fit.rms));
            }
            let err = fit.rms / (fit.window[1] / fit.window[0]).ln();
            out.check(Check::within("c_log_ratio", fit.c_log / exact, 1.0, c.coefficient_tolerance, err / exact.abs()));
        }
        Err(e) => out.fail("c_log_ratio", &e),
    }
    out.tables.push(t);

    let mut rng = stream(seed, 6);
    let l = c.side;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for _ in 0..c.symmetry_pairs {
        let xi: Point = std::array::from_fn(|_| rng.random_range(0.0..l));
        let eta: Point = std::array::from_fn(|_| rng.random_range(0.0..l));
        let pair = biharmonic_green_torus(c.symmetry_modes, l, xi)
            .and_then(|a| Ok((a.value(&eta), biharmonic_green_torus(c.symmetry_modes, l, eta)?.value(&xi))));
        match pair {
            Ok((a, b)) => {
                worst = worst.max((a - b).abs());
                scale = scale.max(a.abs());
            }
            Err(e) => {
                out.fail("symmetry", &e);
                return out;
            }
        }
    }
    let terms = (c.symmetry_modes as f64).powi(4);
    out.check(Check::at_most("symmetry", worst, c.symmetry_tolerance, f64::EPSILON * terms.sqrt() * scale));
    out
}

fn represent(cfg: &Config, seed: u64) -> Outcome {
    let c = &cfg.represent;
    let mut out = Outcome::default();
    let mut rng = stream(seed, 7);
    let mut t = Table::new("represent", "field,modes,defect,error_estimate");
    let mut worst = 0.0f64;
    for k in 0..c.fields {
        let f = TorusSpectralField::random(&mut rng, c.side, c.modes, c.mode_count, c.max_mode).and_then(|mut f| {
            f.add_real_mode([0; 4], Complex64::new(rng.random_range(-2.0..2.0), 0.0))?;
            let d = representation_check(&f, c.grid)?;
            Ok((f.mode_count(), d))
        });
        match f {
            Ok((n, d)) => {
                t.push(format!("{k},{n},{d:e},{:e}", roundoff(n as f64)));
                worst = worst.max(d);
            }
            Err(e) => out.fail(&format!("field_{k}"), &e),
        }
    }
    out.tables.push(t);
    out.check(Check::at_most("representation_defect", worst, c.tolerance, roundoff(c.mode_count as f64)));
    out
}

/// Exact identity outcomes for one jet, `1` where the identity holds.
fn cnc_row(jet: &CurvatureJet) -> Result<[bool; 5], paneitz_core::cnc::CncError> {
    let mt = metric_taylor_from_jet(jet)?;
    let inv = inverse_metric_taylor(&mt);
    let inverse = product_residual(&mt, &inv).iter().all(|p| p.is_zero()) && product_residual(&inv, &mt).iter().all(|p| p.is_zero());
    let first = contracted_first_derivative(&mt)?
        .first_difference(&contracted_first_derivative_closed_form(jet)?)
        .is_none();
    let second = contracted_second_derivative(&mt)?
        .first_difference(&contracted_second_derivative_closed_form(jet)?)
        .is_none();
    let ld = log_det_expansion(&mt);
    let log_det = (1..=3).all(|d| ld.homogeneous(d).is_zero());
    Ok([inverse, first, second, log_det, cnc_identity_suite(jet).all_pass()])
}

const CNC_IDENTITIES: [&str; 5] = ["inverse_product", "first_contraction", "second_contraction", "log_det_low_degree", "identity_suite"];

fn cnc(cfg: &Config, seed: u64) -> Outcome {
    let c = &cfg.cnc;
    let mut out = Outcome::default();
    let mut rng = stream(seed, 2);
    let mut t = Table::new("cnc", "jet,inverse_product,first_contraction,second_contraction,log_det_low_degree,identity_suite,error_estimate");
    let mut failures = [0usize; 5];
    for k in 0..c.jets {
        let jet = random_conformal_normal_jet(&mut rng);
        match cnc_row(&jet) {
            Ok(row) => {
                for (f, ok) in failures.iter_mut().zip(row) {
                    *f += usize::from(!ok);
                }
                let cells: Vec<String> = row.iter().map(|b| u8::from(*b).to_string()).collect();
                t.push(format!("{k},{},0", cells.join(",")));
            }
            Err(e) => out.fail(&format!("jet_{k}"), &e),
        }
    }
    out.tables.push(t);
    for (name, f) in CNC_IDENTITIES.iter().zip(failures) {
        out.check(Check::at_most(&format!("{name}_failures"), f as f64, 0.0, 0.0));
    }
    conformal_checks(c, &mut out);
    out
}

/// Conformal covariance, `Q` of the round sphere and the Gauss-Bonnet integral.
fn conformal_checks(c: &crate::config::CncConfig, out: &mut Outcome) {
    let dom = BoxDomain::cube([0.0; 4], 1.0);
    let r2 = |x: &[Jet; 4]| x.iter().fold(Jet::constant(x[0].order(), 0.0), |a, xi| a + xi.sqr());
    let g: Arc<dyn MetricField> = Arc::new(AnalyticMetric::euclidean(dom));
    let u: Arc<dyn ScalarField> = Arc::new(AnalyticScalar::new(dom, move |x| (2.0 * (r2(x) + 1.0).recip()).ln()));
    let f: Arc<dyn ScalarField> = Arc::new(AnalyticScalar::new(dom, |x| (x[0] * 1.3 + x[1] * x[2]).sin() + x[3].powi(3) * x[0]));
    let mut t = Table::new("cnc-refinement", "step,deviation,local_order,error_estimate");
    match covariance_refinement(g, u, f, &[[0.1, 0.2, -0.1, 0.15]], &c.refinement_steps) {
        Ok(study) => {
            let mut spread = 0.0f64;
            for (k, (h, d)) in study.steps.iter().zip(&study.deviations).enumerate() {
                let local = if k == 0 { f64::NAN } else { (study.deviations[k - 1] / d).ln() / (study.steps[k - 1] / h).ln() };
                if k > 0 {
                    spread = spread.max((local - study.fitted_order).abs());
                }
                t.push(format!("{h:e},{d:e},{local:e},{:e}", roundoff(d.abs())));
            }
            out.check(Check::within("covariance_fd_order", study.fitted_order, 4.0, c.order_band, spread));
        }
        Err(e) => out.fail("covariance_fd_order", &e),
    }
    out.tables.push(t);

    let sphere = AnalyticMetric::stereographic_sphere(dom, 1.0);
    let mut worst = 0.0f64;
    for p in [[0.0; 4], [0.3, -0.2, 0.1, 0.4], [0.7, 0.5, -0.3, 0.2]] {
        match q_curvature(&sphere, &p) {
            Ok(q) => worst = worst.max((q - 3.0).abs()),
            Err(e) => {
                out.fail("sphere_q", &e);
                return;
            }
        }
    }
    out.check(Check::at_most("sphere_q_deviation", worst, c.q_tolerance, roundoff(3.0)));

    let target = 8.0 * PI * PI;
    match gauss_bonnet_check(&GaussBonnetModel::RoundSphere {
        perturbation: None,
        resolution: SphereResolution::default(),
    }) {
        Ok(rep) => {
            let err = (rep.reference_volume / rep.expected_volume - 1.0).abs();
            out.check(Check::within("gauss_bonnet_ratio", rep.value / target, 1.0, c.gauss_bonnet_band, err));
        }
        Err(e) => out.fail("gauss_bonnet_ratio", &e),
    }
}

fn distance(cfg: &Config, seed: u64) -> Outcome {
    let c = &cfg.distance;
    let mut out = Outcome::default();
    let jet = random_conformal_normal_jet(&mut stream(seed, 13));
    let pairs: Vec<(Point, Point)> = c.pairs.iter().map(|p| (p[0], p[1])).collect();
    let opts = GeodesicOptions {
        segments: c.segments,
        ..GeodesicOptions::default()
    };
    match distance_ratio_sweep(&jet, &c.eps_list, &pairs, &opts) {
        Ok(sweep) => {
            let err = sweep.rows.iter().map(|r| r.error_estimate).fold(0.0, f64::max);
            let gap = sweep.rows.iter().map(|r| r.ratio_gap).fold(0.0, f64::max);
            out.check(Check::at_most("ratio_constant_spread", sweep.c_spread, c.stability_band, err / gap.max(f64::MIN_POSITIVE)));
            out.check(Check::within("eps_exponent", sweep.eps_exponent, 2.0, c.exponent_band, err / gap.max(f64::MIN_POSITIVE)));
            out.tables.push(Table {
                name: "distance".into(),
                header: paneitz_core::geodesic::DistanceSweep::CSV_HEADER.into(),
                rows: sweep.to_csv().lines().skip(1).map(String::from).collect(),
            });
        }
        Err(e) => out.fail("distance_sweep", &e),
    }
    out
}

fn single(cfg: &BubblingSequenceConfig, eps: f64) -> BubblingSequenceConfig {
    BubblingSequenceConfig {
        eps_list: vec![eps],
        ..cfg.clone()
    }
}

fn longrange(cfg: &Config) -> Outcome {
    let c = &cfg.longrange;
    let mut out = Outcome::default();
    let seq_cfg = single(&cfg.sequence, c.eps);
    let rep = synth_sequence(&seq_cfg)
        .map_err(|e| e.to_string())
        .and_then(|s| long_range_checks(s[0].field.as_ref(), c.eps, cfg.sequence.delta1).map_err(|e| e.to_string()));
    match rep {
        Ok(rep) => {
            let mut t = Table::new("longrange", "eps,ring,name,value,target,band,error_estimate");
            for k in &rep.checks {
                t.push(format!("{:e},{:e},{},{:e},{:e},{:e},{:e}", rep.eps, rep.ring, k.name, k.value, k.target, k.band, k.error_estimate));
                // The first radial derivative has no pinned band; it keeps the O(1/L) one.
                let band = match k.name.as_str() {
                    "slope" => c.slope_band,
                    "radial_derivative" => k.band / k.target.abs(),
                    _ => c.ring_band,
                };
                out.check(Check::within(&format!("{}_ratio", k.name), k.value / k.target, 1.0, band, k.error_estimate / k.target.abs()));
            }
            out.tables.push(t);
        }
        Err(e) => out.fail("longrange", &e),
    }
    out
}

fn alpha(cfg: &Config) -> Outcome {
    let c = &cfg.alpha_sweep;
    let mut out = Outcome::default();
    let sweep = synth_sequence(&cfg.sequence)
        .map_err(|e| e.to_string())
        .and_then(|s| alpha_sweep(&s, QuadratureSizes::from_config(&cfg.sequence)).map_err(|e| e.to_string()));
    match sweep {
        Ok(sw) => {
            let mut t = Table::new("alpha-sweep", "eps,L,alpha,deviation,error_estimate");
            for r in &sw.rows {
                t.push(format!("{:e},{:e},{:e},{:e},{:e}", r.eps, r.ring, r.alpha, r.deviation, r.error_estimate));
                if r.eps <= c.eps_max {
                    out.check(Check::within(
                        &format!("alpha_ratio_eps_{:e}", r.eps),
                        r.alpha / BUBBLE_ENERGY,
                        1.0,
                        c.tolerance,
                        r.error_estimate / BUBBLE_ENERGY,
                    ));
                }
            }
            out.tables.push(t);
            if cfg.sequence.amplitude == 0.0 {
                let slope = sw.tail_exponent.unwrap_or(f64::NAN);
                let rms = sw.inverse_log_fit.as_ref().map_or(f64::NAN, |f| f.rms);
                // Faster than 1/L means a log-log slope below −1.5.
                out.check(Check::at_most("tail_exponent", slope, -1.5, rms));
            }
            if out.checks.is_empty() {
                out.fail("alpha_sweep", &format!("no eps at or below {:e}", c.eps_max));
            }
        }
        Err(e) => out.fail("alpha_sweep", &e),
    }
    out
}

fn mainest(cfg: &Config) -> Outcome {
    let c = &cfg.mainest;
    let mut out = Outcome::default();
    let fit = synth_sequence(&cfg.sequence)
        .map_err(|e| e.to_string())
        .and_then(|s| mainest_fit(&s, cfg.sequence.tau, cfg.sequence.delta1).map_err(|e| e.to_string()));
    match fit {
        Ok(fit) => {
            let mut t = Table::new("mainest", "eps,weighted,core_ratio,c1,samples,error_estimate");
            for r in &fit.rows {
                t.push(format!("{:e},{:e},{:e},{:e},{},{:e}", r.eps, r.weighted, r.core_ratio, r.c1, r.samples, r.error_estimate));
            }
            out.tables.push(t);
            let err = fit.rows.iter().map(|r| r.error_estimate / r.c1.max(paneitz_core::harness::C1_ZERO)).fold(0.0, f64::max);
            out.check(Check::at_most("c1_ratio", fit.c1_ratio, c.max_ratio, err * fit.c1_ratio));
        }
        Err(e) => out.fail("mainest", &e),
    }
    out
}

/// `∇h/h + 4∇φ` from the spectral coefficients, `φ̂ = 2b̂/|k|⁴`.
fn spectral_balance(h: &TorusSpectralField, b: &TorusSpectralField, q: &Point) -> [f64; 4] {
    let w = 2.0 * PI / h.side;
    let phase = |m: &[i32; 4]| w * (0..4).map(|j| m[j] as f64 * q[j]).sum::<f64>();
    let hq = h.eval(q);
    let mut out = [0.0; 4];
    for (m, c) in h.modes() {
        let ph = phase(m);
        for i in 0..4 {
            out[i] += -w * m[i] as f64 * (c.re * ph.sin() + c.im * ph.cos()) / hq;
        }
    }
    for (m, c) in b.modes() {
        let k2 = w * w * m.iter().map(|v| (v * v) as f64).sum::<f64>();
        if k2 == 0.0 {
            continue;
        }
        let ph = phase(m);
        for i in 0..4 {
            out[i] += 8.0 / (k2 * k2) * -w * m[i] as f64 * (c.re * ph.sin() + c.im * ph.cos());
        }
    }
    out
}

fn vrate(cfg: &Config, seed: u64) -> Outcome {
    let c = &cfg.vrate;
    let tau = cfg.sequence.tau;
    let mut out = Outcome::default();
    let mut t = Table::new("vrate", "setup,eps,offset,balance_norm,error_estimate");

    let tuned = VrateSetup::tuned(c.side, c.modes, c.tuned_mode, c.tuned_amplitude, c.q).map(|mut s| {
        s.bubbles = c.bubbles;
        s
    });
    match tuned.and_then(|s| vrate_pipeline(&s, &c.eps_list, tau)) {
        Ok(rep) => {
            for r in &rep.rows {
                t.push(format!("tuned,{:e},{:e},{:e},{:e}", r.eps, r.offset, r.balance_norm, r.error_estimate));
            }
            out.check(Check::at_most("tuned_balance", rep.balance_norm, c.balance_tolerance, rep.error_estimate));
            let rate = rep.rate.unwrap_or(f64::NAN);
            out.check(Check::within("tuned_rate", rate, rep.expected_rate, c.rate_band, rep.error_estimate));
        }
        Err(e) => out.fail("tuned", &e),
    }

    let mut rng = stream(seed, 21);
    let untuned = (|| {
        let mut h = TorusSpectralField::random(&mut rng, c.side, c.modes, 2, 2)?.map_multiplier(c.modes, |_| 0.2);
        h.add_real_mode([0; 4], Complex64::new(3.0, 0.0))?;
        let b = TorusSpectralField::random(&mut rng, c.side, c.modes, 2, 2)?;
        let q: Point = std::array::from_fn(|_| rng.random_range(0.0..c.side));
        Ok::<_, paneitz_core::potential::PotentialError>((h, b, q))
    })();
    match untuned {
        Ok((h, b, q)) => {
            let oracle = spectral_balance(&h, &b, &q);
            let mut setup = VrateSetup::new(h, b, q);
            setup.bubbles = c.bubbles;
            match vrate_pipeline(&setup, &c.eps_list, tau) {
                Ok(rep) => {
                    for r in &rep.rows {
                        t.push(format!("untuned,{:e},{:e},{:e},{:e}", r.eps, r.offset, r.balance_norm, r.error_estimate));
                    }
                    let diff = (0..4).map(|i| (rep.balance[i] - oracle[i]).abs()).fold(0.0, f64::max);
                    out.check(Check::at_most("untuned_vs_spectral_oracle", diff, c.oracle_tolerance, rep.error_estimate));
                }
                Err(e) => out.fail("untuned", &e),
            }
        }
        Err(e) => out.fail("untuned", &e),
    }
    out.tables.push(t);
    out
}
