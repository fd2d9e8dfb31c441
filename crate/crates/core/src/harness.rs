//! Synthetic bubbling sequences and the estimate checks run on them.
//!
//! The sequences are `u_ε = U_{0,ε,H} + c` for a fixed smooth periodic
//! correction `c`, the shape of solution the concentration estimates
//! describe. No solver for the curved equation is involved.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bubble::{weighted_sup_norm, BubbleError, BubbleParams, BUBBLE_ENERGY};
use crate::field::{AnalyticScalar, BoxDomain, FieldError, Point, ScalarField};
use crate::jet::Jet;
use crate::pohozaev::{vanishing_rate_balance, PohozaevError};
use crate::potential::{biharmonic_green_torus, regular_part_field, Mode, PotentialError, TorusSpectralField};
use crate::quadrature::{PolarRule, Rule1D, S3Rule};
use crate::stats::{line_fit, loglog_fit, LineFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("eps_list is empty")]
    EmptyEpsList,
    #[error("eps_list entries must be positive and finite, got {0}")]
    NonPositiveEps(f64),
    #[error("eps_list must be strictly decreasing ({prev} then {next})")]
    EpsNotDecreasing { prev: f64, next: f64 },
    #[error("eps_list entries must be below 1, got {0}")]
    EpsTooLarge(f64),
    #[error("H must be positive and finite, got {0}")]
    NonPositiveH(f64),
    #[error("tau must lie in (0, 1), got {0}")]
    TauOutOfRange(f64),
    #[error("sigma must lie in ({low}, 1), got {sigma}")]
    SigmaOutOfRange { sigma: f64, low: f64 },
    #[error("delta1 must be positive and finite, got {0}")]
    BadDelta(f64),
    #[error("correction amplitude must be finite, got {0}")]
    BadAmplitude(f64),
    #[error("quadrature sizes must be positive")]
    EmptyQuadrature,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("e^(4u) would overflow: exponent bound {0}")]
    Overflow(f64),
    #[error("ring |y| = {ring} lies outside the rescaled domain |y| <= {limit}")]
    RingOutsideDomain { ring: f64, limit: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Bubble(#[from] BubbleError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Pohozaev(#[from] PohozaevError),
}

/// Parameters of a synthetic bubbling sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BubblingSequenceConfig {
    pub eps_list: Vec<f64>,
    pub h: f64,
    /// Amplitude of the smooth periodic correction.
    pub amplitude: f64,
    /// Integer wave vectors of the correction, one cosine each.
    pub modes: Vec<Mode>,
    /// Subtract the value and gradient at the center.
    pub normalize: bool,
    /// Draw the cosine phases from the seed instead of using zero.
    pub random_phases: bool,
    pub delta1: f64,
    pub tau: f64,
    pub sigma: f64,
    pub n_r: usize,
    pub n_s: usize,
    pub n_phi: usize,
    pub seed: u64,
}

impl Default for BubblingSequenceConfig {
    fn default() -> Self {
        BubblingSequenceConfig {
            eps_list: vec![1e-2, 1e-3, 1e-4, 1e-5],
            h: 1.0,
            amplitude: 0.0,
            modes: vec![[1, 0, 0, 0]],
            normalize: true,
            random_phases: false,
            delta1: 0.5,
            tau: 0.5,
            sigma: 0.9,
            n_r: 10,
            n_s: 6,
            n_phi: 12,
            seed: 0,
        }
    }
}

impl BubblingSequenceConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let first = *self.eps_list.first().ok_or(ConfigError::EmptyEpsList)?;
        for &e in &self.eps_list {
            if !(e > 0.0 && e.is_finite()) {
                return Err(ConfigError::NonPositiveEps(e));
            }
        }
        if first >= 1.0 {
            return Err(ConfigError::EpsTooLarge(first));
        }
        for w in self.eps_list.windows(2) {
            if !(w[1] < w[0]) {
                return Err(ConfigError::EpsNotDecreasing { prev: w[0], next: w[1] });
            }
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(ConfigError::NonPositiveH(self.h));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(ConfigError::TauOutOfRange(self.tau));
        }
        let low = 0.5 * self.tau + 0.5;
        if !(self.sigma > low && self.sigma < 1.0) {
            return Err(ConfigError::SigmaOutOfRange { sigma: self.sigma, low });
        }
        if !(self.delta1 > 0.0 && self.delta1.is_finite()) {
            return Err(ConfigError::BadDelta(self.delta1));
        }
        if !self.amplitude.is_finite() {
            return Err(ConfigError::BadAmplitude(self.amplitude));
        }
        if self.n_r == 0 || self.n_s == 0 || self.n_phi == 0 {
            return Err(ConfigError::EmptyQuadrature);
        }
        Ok(())
    }
}

/// `l = −ε log ε`.
pub fn inner_radius(eps: f64) -> f64 {
    -eps * eps.ln()
}

/// `L = −log ε`.
pub fn ring_radius(eps: f64) -> f64 {
    -eps.ln()
}

/// `A Σ cos(k·x + θ)`, optionally minus its first-order Taylor part at 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correction {
    pub amplitude: f64,
    pub waves: Vec<(Mode, f64)>,
    pub normalized: bool,
}

impl Correction {
    pub fn zero() -> Self {
        Correction {
            amplitude: 0.0,
            waves: Vec::new(),
            normalized: false,
        }
    }

    fn raw(&self, x: &Point) -> f64 {
        self.waves
            .iter()
            .map(|(k, th)| ((0..4).map(|i| k[i] as f64 * x[i]).sum::<f64>() + th).cos())
            .sum::<f64>()
            * self.amplitude
    }

    /// Value and gradient of the unnormalized sum at the origin.
    fn taylor0(&self) -> (f64, Point) {
        let mut v = 0.0;
        let mut g = [0.0; 4];
        for (k, th) in &self.waves {
            v += th.cos();
            for i in 0..4 {
                g[i] -= k[i] as f64 * th.sin();
            }
        }
        (self.amplitude * v, g.map(|c| self.amplitude * c))
    }

    pub fn value(&self, x: &Point) -> f64 {
        let r = self.raw(x);
        if !self.normalized {
            return r;
        }
        let (v0, g0) = self.taylor0();
        r - v0 - (0..4).map(|i| g0[i] * x[i]).sum::<f64>()
    }

    pub fn jet(&self, x: &[Jet; 4]) -> Jet {
        let order = x[0].order();
        let mut acc = Jet::constant(order, 0.0);
        for (k, th) in &self.waves {
            let phase = (0..4).fold(Jet::constant(order, *th), |a, i| a + x[i] * k[i] as f64);
            acc += phase.cos() * self.amplitude;
        }
        if self.normalized {
            let (v0, g0) = self.taylor0();
            acc = acc + (-v0);
            for i in 0..4 {
                acc += x[i] * (-g0[i]);
            }
        }
        acc
    }

    /// Bound on `|c|` over the cube of half-width `r`.
    pub fn sup_bound(&self, r: f64) -> f64 {
        let a = self.amplitude.abs();
        let raw = a * self.waves.len() as f64;
        if !self.normalized {
            return raw;
        }
        let (v0, g0) = self.taylor0();
        raw + v0.abs() + 2.0 * r * g0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// One member `u_ε` of a synthetic sequence.
#[derive(Debug, Clone)]
pub struct SyntheticBubble {
    pub eps: f64,
    pub params: BubbleParams,
    pub correction: Arc<Correction>,
    pub field: Arc<AnalyticScalar>,
}

impl SyntheticBubble {
    /// `u_ε(0) = −log ε + c(0)`.
    pub fn center_value(&self) -> f64 {
        -self.eps.ln() + self.correction.value(&[0.0; 4])
    }
}

pub fn build_correction(cfg: &BubblingSequenceConfig) -> Correction {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let waves = cfg
        .modes
        .iter()
        .map(|m| (*m, if cfg.random_phases { rng.random_range(0.0..2.0 * PI) } else { 0.0 }))
        .collect();
    Correction {
        amplitude: cfg.amplitude,
        waves,
        normalized: cfg.normalize,
    }
}

/// Field `U_{0,ε,H} + c` on the cube of half-width `δ₁`.
pub fn synthetic_field(params: BubbleParams, correction: Arc<Correction>, delta1: f64) -> AnalyticScalar {
    let rho = params.rho();
    let eps = params.eps;
    AnalyticScalar::new(BoxDomain::cube([0.0; 4], delta1), move |x| {
        let s = (0..4).fold(Jet::constant(x[0].order(), 0.0), |a, i| a + x[i].sqr());
        -(s * (rho / (eps * eps)) + 1.0).ln() - eps.ln() + correction.jet(x)
    })
}

pub fn synth_sequence(cfg: &BubblingSequenceConfig) -> Result<Vec<SyntheticBubble>, HarnessError> {
    cfg.validate()?;
    let correction = Arc::new(build_correction(cfg));
    let eps_min = *cfg.eps_list.last().expect("validated");
    let bound = 4.0 * (-eps_min.ln() + correction.sup_bound(cfg.delta1) + cfg.h.ln().max(0.0));
    if !(bound < 700.0) {
        return Err(HarnessError::Overflow(bound));
    }
    cfg.eps_list
        .iter()
        .map(|&eps| {
            let params = BubbleParams::new([0.0; 4], eps, cfg.h)?;
            Ok(SyntheticBubble {
                eps,
                params,
                correction: correction.clone(),
                field: Arc::new(synthetic_field(params, correction.clone(), cfg.delta1)),
            })
        })
        .collect()
}

/// Quadrature node counts for ball integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSizes {
    pub n_r: usize,
    pub n_s: usize,
    pub n_phi: usize,
}

impl QuadratureSizes {
    pub fn from_config(cfg: &BubblingSequenceConfig) -> Self {
        QuadratureSizes {
            n_r: cfg.n_r,
            n_s: cfg.n_s,
            n_phi: cfg.n_phi,
        }
    }

    fn refined(self) -> Self {
        QuadratureSizes {
            n_r: self.n_r + 4,
            n_s: self.n_s + 2,
            n_phi: self.n_phi + 4,
        }
    }
}

/// `2∫_{B(εR)} h e^{4u} dx` with its refinement error estimate.
///
/// Integrates in `y = x/ε` so that the integrand stays of order one.
pub fn alpha_integral(u: &dyn ScalarField, h: f64, eps: f64, radius: f64, sizes: QuadratureSizes) -> Result<(f64, f64), HarnessError> {
    let scale = 0.25 * (4.0 * 3f64.sqrt() / h.abs().max(1e-300).sqrt()).sqrt();
    let shift = eps.ln();
    let eval = |q: QuadratureSizes| -> Result<f64, HarnessError> {
        let rule = PolarRule::new([0.0; 4], &Rule1D::geometric(0.0, radius, scale, q.n_r), &S3Rule::new(q.n_s, q.n_phi));
        let mut acc = 0.0;
        for (y, w) in rule.points.iter().zip(&rule.weights) {
            let x: Point = y.map(|c| eps * c);
            acc += w * (4.0 * (u.value(&x)? + shift)).exp();
        }
        Ok(2.0 * h * acc)
    };
    let coarse = eval(sizes)?;
    let fine = eval(sizes.refined())?;
    Ok((fine, (fine - coarse).abs() + 1e-14 * fine.abs()))
}

/// One ring quantity at `|y| = L` against its limiting value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingCheck {
    pub name: String,
    pub value: f64,
    pub target: f64,
    /// `|target|/L`, the next-order band.
    pub band: f64,
    /// Spread over the sampled directions.
    pub error_estimate: f64,
    pub pass: bool,
}

impl RingCheck {
    pub fn relative_deviation(&self) -> f64 {
        (self.value / self.target - 1.0).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingReport {
    pub eps: f64,
    pub ring: f64,
    /// Energy used for the targets, `16π²` for one bubble.
    pub alpha: f64,
    pub checks: Vec<RingCheck>,
}

impl RingReport {
    pub fn check(&self, name: &str) -> Option<&RingCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn ring_check(name: &str, samples: &[f64], target: f64, ring: f64) -> RingCheck {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let spread = samples.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    let band = target.abs() / ring;
    RingCheck {
        name: name.to_string(),
        value: mean,
        target,
        band,
        error_estimate: spread,
        pass: (mean - target).abs() <= band + spread,
    }
}

/// Far-field behaviour of `v(y) = u(εy) + log ε` at `|y| = L = −log ε`.
pub fn long_range_checks(u: &dyn ScalarField, eps: f64, delta1: f64) -> Result<RingReport, HarnessError> {
    let ring = ring_radius(eps);
    let limit = delta1 / eps;
    if !(ring < limit) {
        return Err(HarnessError::RingOutsideDomain { ring, limit });
    }
    let alpha = BUBBLE_ENERGY;
    let dirs = S3Rule::new(2, 4);
    let shift = eps.ln();
    let n_fit = 24;
    let mut slopes = Vec::with_capacity(dirs.len());
    let (mut d1, mut d2, mut d3) = (Vec::new(), Vec::new(), Vec::new());
    for om in &dirs.points {
        let (mut lr, mut vs) = (Vec::with_capacity(n_fit), Vec::with_capacity(n_fit));
        for k in 0..n_fit {
            let r = ring * (limit / ring).powf(k as f64 / (n_fit - 1) as f64);
            let x: Point = om.map(|c| eps * r * c);
            lr.push(r.ln());
            vs.push(u.value(&x)? + shift);
        }
        slopes.push(line_fit(&lr, &vs).slope);
        let x: Point = om.map(|c| eps * ring * c);
        let j = u.jet(&x, 3)?;
        let grad = j.gradient();
        let lap = j.flat_laplacian();
        let grad_lap = lap.gradient();
        let radial = |g: &[f64; 4]| (0..4).map(|i| g[i] * om[i]).sum::<f64>();
        d1.push(eps * radial(&grad) * ring);
        d2.push(eps * eps * lap.value() * ring * ring);
        d3.push(eps.powi(3) * radial(&grad_lap) * ring.powi(3));
    }
    let c = alpha / (8.0 * PI * PI);
    Ok(RingReport {
        eps,
        ring,
        alpha,
        checks: vec![
            ring_check("slope", &slopes, -c, ring),
            ring_check("radial_derivative", &d1, -c, ring),
            ring_check("laplacian", &d2, -2.0 * c, ring),
            ring_check("radial_derivative_laplacian", &d3, 4.0 * c, ring),
        ],
    })
}

/// `α(ε)` over `B(l)`, `l = −ε log ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaRow {
    pub eps: f64,
    pub ring: f64,
    pub alpha: f64,
    pub error_estimate: f64,
    /// `α − 16π²`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSweep {
    pub rows: Vec<AlphaRow>,
    /// `|α − 16π²|` against `1/L`.
    pub inverse_log_fit: Option<LineFit>,
    /// Log-log slope of `|α − 16π²|` against `L`.
    pub tail_exponent: Option<f64>,
    /// The deviation decays faster than `1/L`.
    pub faster_than_inverse_log: bool,
}

pub fn alpha_sweep(seq: &[SyntheticBubble], sizes: QuadratureSizes) -> Result<AlphaSweep, HarnessError> {
    let rows = seq
        .par_iter()
        .map(|m| -> Result<AlphaRow, HarnessError> {
            let ring = ring_radius(m.eps);
            let (alpha, err) = alpha_integral(m.field.as_ref(), m.params.h, m.eps, ring, sizes)?;
            Ok(AlphaRow {
                eps: m.eps,
                ring,
                alpha,
                error_estimate: err,
                deviation: alpha - BUBBLE_ENERGY,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (mut inverse_log_fit, mut tail_exponent) = (None, None);
    if rows.len() >= 2 {
        let inv: Vec<f64> = rows.iter().map(|r| 1.0 / r.ring).collect();
        let dev: Vec<f64> = rows.iter().map(|r| r.deviation.abs()).collect();
        inverse_log_fit = Some(line_fit(&inv, &dev));
        if dev.iter().all(|d| *d > 0.0) {
            let ls: Vec<f64> = rows.iter().map(|r| r.ring).collect();
            tail_exponent = Some(loglog_fit(&ls, &dev).slope);
        }
    }
    Ok(AlphaSweep {
        rows,
        inverse_log_fit,
        faster_than_inverse_log: tail_exponent.is_some_and(|s| s < -1.5),
        tail_exponent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MainEstRow {
    pub eps: f64,
    /// `sup |u − U|/d^τ` over `ε ≤ d ≤ δ₁`.
    pub weighted: f64,
    /// `sup_{d<ε} |u − U| / ε^τ`.
    pub core_ratio: f64,
    /// Larger of the two.
    pub c1: f64,
    /// Roundoff in `u − U` over the smallest weight `ε^τ`.
    pub error_estimate: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MainEstFit {
    pub tau: f64,
    pub rows: Vec<MainEstRow>,
    /// `max C₁ / min C₁` over the sweep.
    pub c1_ratio: f64,
    /// Log-log slope of `C₁` against `ε`.
    pub c1_exponent: Option<f64>,
    /// `C₁` vanishes or stays within a factor 3.
    pub stable: bool,
}

/// Below this `C₁` counts as zero.
pub const C1_ZERO: f64 = 1e-9;

pub fn mainest_fit(seq: &[SyntheticBubble], tau: f64, delta1: f64) -> Result<MainEstFit, HarnessError> {
    let rows = seq
        .par_iter()
        .map(|m| -> Result<MainEstRow, HarnessError> {
            let w = weighted_sup_norm(m.field.as_ref(), &m.params, tau, delta1)?;
            Ok(MainEstRow {
                eps: m.eps,
                weighted: w.weighted,
                core_ratio: w.core_ratio,
                c1: w.weighted.max(w.core_ratio),
                error_estimate: f64::EPSILON * (1.0 - m.eps.ln()) * m.eps.powf(-tau),
                samples: w.samples,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let max = rows.iter().map(|r| r.c1).fold(0.0, f64::max);
    let min = rows.iter().map(|r| r.c1).fold(f64::INFINITY, f64::min);
    let zero = max <= C1_ZERO;
    let c1_ratio = if zero { 1.0 } else { max / min };
    let c1_exponent = (!zero && rows.len() >= 2).then(|| {
        let es: Vec<f64> = rows.iter().map(|r| r.eps).collect();
        let cs: Vec<f64> = rows.iter().map(|r| r.c1).collect();
        loglog_fit(&es, &cs).slope
    });
    Ok(MainEstFit {
        tau,
        rows,
        c1_ratio,
        c1_exponent,
        stable: zero || c1_ratio <= 3.0,
    })
}

/// Single-bubble torus data for the vanishing-rate combination.
#[derive(Debug, Clone, PartialEq)]
pub struct VrateSetup {
    pub h: TorusSpectralField,
    pub b: TorusSpectralField,
    pub q: Point,
    pub bubbles: usize,
    /// Modes per axis of the Green's function used for the `β` term.
    pub green_modes: usize,
}

impl VrateSetup {
    pub fn new(h: TorusSpectralField, b: TorusSpectralField, q: Point) -> Self {
        VrateSetup {
            h,
            b,
            q,
            bubbles: 1,
            green_modes: 16,
        }
    }

    /// `h = 1 + a cos(k·x)` and a single-mode `b` chosen so that
    /// `4∇φ(q) = −∇h(q)/h(q)`.
    pub fn tuned(side: f64, n: usize, mode: Mode, a: f64, q: Point) -> Result<Self, HarnessError> {
        let mut h = TorusSpectralField::cosine(side, n, [0; 4], 1.0)?;
        h.add_real_mode(mode, num_complex::Complex64::new(0.5 * a, 0.0))?;
        let w = 2.0 * PI / side;
        let k: [f64; 4] = mode.map(|m| w * m as f64);
        let phase: f64 = (0..4).map(|i| k[i] * q[i]).sum();
        let k4 = k.iter().map(|v| v * v).sum::<f64>().powi(2);
        // ∇h/h = −a k sin/(1 + a cos); φ = 2 c cos/k⁴ for b = c cos, so 4∇φ = −8c k sin/k⁴.
        let c = -a * k4 / (8.0 * (1.0 + a * phase.cos()));
        let b = TorusSpectralField::cosine(side, n, mode, c)?;
        Ok(VrateSetup::new(h, b, q))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VrateRow {
    pub eps: f64,
    /// `|q_ε − q| = ε^{τ/2}`.
    pub offset: f64,
    pub balance_norm: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VrateReport {
    pub balance: [f64; 4],
    pub balance_norm: f64,
    /// Roundoff scale of the three summed terms.
    pub error_estimate: f64,
    pub grad_log_h: [f64; 4],
    pub four_grad_phi: [f64; 4],
    /// `64π² ∇₂β(q, q)` on the flat torus.
    pub beta_term: [f64; 4],
    pub rows: Vec<VrateRow>,
    /// Log-log slope of the balance against `ε`, when it is not identically zero.
    pub rate: Option<f64>,
    pub expected_rate: f64,
}

/// `64π² ∇₂β(q, q)` by symmetric differences; the logarithmic part cancels.
fn beta_gradient(setup: &VrateSetup) -> Result<[f64; 4], HarnessError> {
    let g = biharmonic_green_torus(setup.green_modes, setup.b.side, setup.q)?;
    let t = setup.b.side / setup.green_modes as f64;
    Ok(std::array::from_fn(|i| {
        let mut plus = setup.q;
        let mut minus = setup.q;
        plus[i] += t;
        minus[i] -= t;
        64.0 * PI * PI * (g.value(&plus) - g.value(&minus)) / (2.0 * t)
    }))
}

fn balance_at(setup: &VrateSetup, phi: &TorusSpectralField, beta: &[f64; 4], x: &Point) -> Result<[f64; 4], HarnessError> {
    let v = vanishing_rate_balance(&setup.h, phi, x)?;
    Ok(std::array::from_fn(|i| v[i] + beta[i]))
}

fn norm4(v: &[f64; 4]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Balance `64π²∇₂β + 4∇φ + ∇h/h` at `q`, and its size at points
/// `ε^{τ/2}` away along a fixed direction.
pub fn vrate_pipeline(setup: &VrateSetup, eps_list: &[f64], tau: f64) -> Result<VrateReport, HarnessError> {
    if setup.bubbles != 1 {
        return Err(HarnessError::Unsupported(format!(
            "{} bubbles requested; only single-bubble placement is implemented",
            setup.bubbles
        )));
    }
    let phi = regular_part_field(&setup.b);
    let beta = beta_gradient(setup)?;
    let hq = setup.h.jet(&setup.q, 1)?;
    let grad_log_h = hq.gradient().map(|c| c / hq.value());
    let gp = phi.jet(&setup.q, 1)?.gradient();
    let four_grad_phi = gp.map(|c| 4.0 * c);
    let balance = balance_at(setup, &phi, &beta, &setup.q)?;
    let error_estimate = 64.0 * f64::EPSILON * (1.0 + norm4(&grad_log_h) + norm4(&four_grad_phi) + norm4(&beta));
    let dir = [0.5; 4];
    let rows = eps_list
        .iter()
        .map(|&eps| -> Result<VrateRow, HarnessError> {
            let offset = eps.powf(0.5 * tau);
            let x: Point = std::array::from_fn(|i| setup.q[i] + offset * dir[i]);
            Ok(VrateRow {
                eps,
                offset,
                balance_norm: norm4(&balance_at(setup, &phi, &beta, &x)?),
                error_estimate,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rate = (rows.len() >= 2 && rows.iter().all(|r| r.balance_norm > 1e-14)).then(|| {
        let es: Vec<f64> = rows.iter().map(|r| r.eps).collect();
        let bs: Vec<f64> = rows.iter().map(|r| r.balance_norm).collect();
        loglog_fit(&es, &bs).slope
    });
    Ok(VrateReport {
        balance_norm: norm4(&balance),
        error_estimate,
        balance,
        grad_log_h,
        four_grad_phi,
        beta_term: beta,
        rows,
        rate,
        expected_rate: 0.5 * tau,
    })
}

/// Everything the estimate checks produce for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub tau: f64,
    pub alpha: AlphaSweep,
    pub rings: Vec<RingReport>,
    pub mainest: MainEstFit,
}

pub fn estimate_report(cfg: &BubblingSequenceConfig) -> Result<EstimateReport, HarnessError> {
    let seq = synth_sequence(cfg)?;
    let sizes = QuadratureSizes::from_config(cfg);
    let alpha = alpha_sweep(&seq, sizes)?;
    let rings = seq
        .iter()
        .map(|m| long_range_checks(m.field.as_ref(), m.eps, cfg.delta1))
        .collect::<Result<Vec<_>, _>>()?;
    let mainest = mainest_fit(&seq, cfg.tau, cfg.delta1)?;
    Ok(EstimateReport {
        tau: cfg.tau,
        alpha,
        rings,
        mainest,
    })
}
