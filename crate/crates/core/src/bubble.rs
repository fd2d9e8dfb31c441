//! Standard bubbles, the linearized kernel and comparison primitives.
//!
//! Radial quantities are written in `s = |y|²`. For `f(s)` on `R^n`,
//! `Δf = 4s f'' + 2n f'`; the `n = 6` operator appears for `y_j φ(s)`
//! because `Δ(y_j φ) = y_j (Δ_6 φ)`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::cnc::MetricTaylor;
use crate::curvature::{paneitz_apply, GeomError};
use crate::field::{AnalyticMetric, AnalyticScalar, BoxDomain, FieldError, Point, ScalarField};
use crate::jet::Jet;
use crate::quadrature::{Rule1D, S3Rule, S3_AREA};

/// Lower bound on `H` used when none is given.
pub const DEFAULT_H_FLOOR: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BubbleError {
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("H = {h} is below the floor {floor}")]
    HeightBelowFloor { h: f64, floor: f64 },
    #[error("radial quadrature did not settle: estimate {estimate}, change {change:e}")]
    QuadratureNonConvergence { estimate: f64, change: f64 },
    #[error("point at blow-up radius {radius} exceeds the Taylor radius {limit}")]
    TaylorRadiusExceeded { radius: f64, limit: f64 },
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

fn norm_sq(y: &Point) -> f64 {
    y.iter().map(|v| v * v).sum()
}

/// `[f, f', f'', f''', f'''']` in `s` for `w^{-k}`, `w = 1 + ρ s`.
fn inverse_power_derivs(k: i32, rho: f64, s: f64) -> [f64; 5] {
    let w = 1.0 + rho * s;
    let mut out = [0.0; 5];
    let mut c = 1.0;
    for (m, slot) in out.iter_mut().enumerate() {
        *slot = c * w.powi(-k - m as i32);
        c *= -(k as f64 + m as f64) * rho;
    }
    out
}

/// `Δ` of a radial function on `R^n` from its `s`-derivatives.
pub fn radial_laplacian(n: f64, s: f64, d: &[f64; 5]) -> f64 {
    4.0 * s * d[2] + 2.0 * n * d[1]
}

/// `Δ²` of a radial function on `R^n` from its `s`-derivatives.
pub fn radial_bilaplacian(n: f64, s: f64, d: &[f64; 5]) -> f64 {
    16.0 * s * s * d[4] + (32.0 + 16.0 * n) * s * d[3] + 4.0 * n * (n + 2.0) * d[2]
}

/// Bubble `U_{p,ε,H}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleParams {
    pub p: Point,
    pub eps: f64,
    pub h: f64,
}

impl BubbleParams {
    pub fn new(p: Point, eps: f64, h: f64) -> Result<Self, BubbleError> {
        Self::with_floor(p, eps, h, DEFAULT_H_FLOOR)
    }

    pub fn with_floor(p: Point, eps: f64, h: f64, floor: f64) -> Result<Self, BubbleError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(BubbleError::InvalidScale(eps));
        }
        if !(h >= floor && h.is_finite()) {
            return Err(BubbleError::HeightBelowFloor { h, floor });
        }
        Ok(BubbleParams { p, eps, h })
    }

    pub fn rho(&self) -> f64 {
        rho_of(self.h)
    }

    /// `−log(ε + √H d²/(4√3 ε))`.
    pub fn eval(&self, d: f64) -> f64 {
        -(self.eps + self.h.sqrt() * d * d / (4.0 * 3f64.sqrt() * self.eps)).ln()
    }

    pub fn eval_at(&self, xi: &Point) -> f64 {
        self.eval(norm_sq(&self.to_rescaled(xi)).sqrt() * self.eps)
    }

    /// `y = (ξ − p)/ε`.
    pub fn to_rescaled(&self, xi: &Point) -> Point {
        std::array::from_fn(|i| (xi[i] - self.p[i]) / self.eps)
    }

    pub fn rescaled(&self) -> RescaledBubble {
        RescaledBubble::new(self.h)
    }

    /// The bubble as a field in `ξ` with Euclidean distance to `p`.
    pub fn field(&self, domain: BoxDomain) -> AnalyticScalar {
        let b = *self;
        let rho = self.rho();
        AnalyticScalar::new(domain, move |x| {
            let s = (0..4).fold(Jet::constant(x[0].order(), 0.0), |acc, i| acc + (x[i] - b.p[i]).sqr());
            -(s * (rho / (b.eps * b.eps)) + 1.0).ln() - b.eps.ln()
        })
    }
}

fn rho_of(h: f64) -> f64 {
    h.sqrt() / (4.0 * 3f64.sqrt())
}

/// Profile `U(y) = −log(1 + ρ|y|²)` solving `Δ²U = 2H e^{4U}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaledBubble {
    pub h: f64,
    pub rho: f64,
}

impl RescaledBubble {
    pub fn new(h: f64) -> Self {
        RescaledBubble { h, rho: rho_of(h) }
    }

    pub fn standard() -> Self {
        Self::new(1.0)
    }

    /// `s`-derivatives of `U` up to order four.
    pub fn s_derivs(&self, s: f64) -> [f64; 5] {
        let w = 1.0 + self.rho * s;
        let mut out = [-w.ln(), 0.0, 0.0, 0.0, 0.0];
        let mut c = -self.rho / w;
        for (m, slot) in out.iter_mut().enumerate().skip(1) {
            *slot = c;
            c *= -(m as f64) * self.rho / w;
        }
        out
    }

    pub fn value(&self, y: &Point) -> f64 {
        -(self.rho * norm_sq(y)).ln_1p()
    }

    /// `dU/dr`.
    pub fn radial_derivative(&self, r: f64) -> f64 {
        -2.0 * self.rho * r / (1.0 + self.rho * r * r)
    }

    pub fn gradient(&self, y: &Point) -> Point {
        let c = -2.0 * self.rho / (1.0 + self.rho * norm_sq(y));
        y.map(|v| c * v)
    }

    pub fn laplacian(&self, y: &Point) -> f64 {
        let s = norm_sq(y);
        radial_laplacian(4.0, s, &self.s_derivs(s))
    }

    pub fn bilaplacian(&self, y: &Point) -> f64 {
        let s = norm_sq(y);
        radial_bilaplacian(4.0, s, &self.s_derivs(s))
    }

    pub fn source(&self, y: &Point) -> f64 {
        2.0 * self.h * (1.0 + self.rho * norm_sq(y)).powi(-4)
    }

    /// `Δ²U − 2H e^{4U}`.
    pub fn pde_residual(&self, y: &Point) -> f64 {
        self.bilaplacian(y) - self.source(y)
    }

    /// The profile as a field on `domain`.
    pub fn field(&self, domain: BoxDomain) -> AnalyticScalar {
        let rho = self.rho;
        AnalyticScalar::new(domain, move |x| {
            let s = x.iter().fold(Jet::constant(x[0].order(), 0.0), |a, xi| a + xi.sqr());
            -(s * rho + 1.0).ln()
        })
    }

    /// `2H ∫_{B_R} e^{4U} dy` by composite Gauss–Legendre in `r`.
    pub fn mass_integral(&self, radius: f64) -> Result<f64, BubbleError> {
        if radius <= 0.0 {
            return Ok(0.0);
        }
        let first = 0.25 / self.rho.sqrt();
        let integrand = |r: f64| S3_AREA * r.powi(3) * (1.0 + self.rho * r * r).powi(-4);
        let coarse = Rule1D::geometric(0.0, radius, first, 12).integrate(integrand);
        let fine = Rule1D::geometric(0.0, radius, first, 20).integrate(integrand);
        let change = (fine - coarse).abs();
        if !(change <= 1e-12 * fine.abs()) {
            return Err(BubbleError::QuadratureNonConvergence { estimate: fine, change });
        }
        Ok(2.0 * self.h * fine)
    }
}

/// One of the five bounded kernel elements of `Δ²φ = 8H e^{4U} φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelElement {
    pub index: usize,
}

impl KernelElement {
    pub fn all() -> [KernelElement; 5] {
        std::array::from_fn(|index| KernelElement { index })
    }

    pub fn eval(&self, rb: &RescaledBubble, y: &Point) -> f64 {
        let w = 1.0 + rb.rho * norm_sq(y);
        match self.index {
            0 => (2.0 - w) / w,
            j => y[j - 1] / w,
        }
    }

    pub fn bilaplacian(&self, rb: &RescaledBubble, y: &Point) -> f64 {
        let s = norm_sq(y);
        let d = inverse_power_derivs(1, rb.rho, s);
        match self.index {
            0 => 2.0 * radial_bilaplacian(4.0, s, &d),
            j => y[j - 1] * radial_bilaplacian(6.0, s, &d),
        }
    }

    /// `Δ²ψ − 8H e^{4U} ψ`.
    pub fn residual(&self, rb: &RescaledBubble, y: &Point) -> f64 {
        self.bilaplacian(rb, y) - 4.0 * rb.source(y) * self.eval(rb, y)
    }
}

/// `ğ(y) = g(εy)` from a Taylor expansion.
pub fn blow_up_metric(mt: &MetricTaylor, eps: f64) -> AnalyticMetric {
    let entries: Vec<_> = (0..16).map(|k| mt.entry(k / 4, k % 4).clone()).collect();
    AnalyticMetric::new(BoxDomain::everywhere(), move |y| {
        let x = y.map(|v| v * eps);
        std::array::from_fn(|a| std::array::from_fn(|b| entries[a * 4 + b].eval_jet(&x)))
    })
}

/// `P_ğ U − 2H e^{4U}` for the blow-up metric of a Taylor expansion.
pub fn perturbed_paneitz_residual(
    rb: &RescaledBubble,
    mt: &MetricTaylor,
    eps: f64,
    delta: f64,
    y: &Point,
) -> Result<f64, BubbleError> {
    let radius = eps * norm_sq(y).sqrt();
    if radius > delta {
        return Err(BubbleError::TaylorRadiusExceeded { radius, limit: delta });
    }
    let g = blow_up_metric(mt, eps);
    let u = rb.field(BoxDomain::everywhere());
    Ok(paneitz_apply(&g, &u, y)? - rb.source(y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierReport {
    /// Smallest `C` with `ΔT ≤ −|Δv − ΔU|` on the samples.
    pub min_c: f64,
    pub c_max: f64,
    pub admissible: bool,
    /// Radius where the bound is attained.
    pub worst_radius: f64,
    pub samples: usize,
}

/// Test `T = C(1 + |y|^{-1})` as a barrier on `inner ≤ |y| ≤ outer`.
/// In `R^4`, `ΔT = −C|y|^{-3}`.
pub fn barrier_check(
    v: &dyn ScalarField,
    rb: &RescaledBubble,
    inner: f64,
    outer: f64,
    c_max: f64,
) -> Result<BarrierReport, BubbleError> {
    let n_r = 64;
    let dirs = S3Rule::new(2, 4);
    let mut min_c = 0.0f64;
    let mut worst_radius = inner;
    let mut samples = 0;
    for k in 0..n_r {
        let r = inner * (outer / inner).powf(k as f64 / (n_r - 1) as f64);
        for om in &dirs.points {
            let y: Point = om.map(|c| c * r);
            let dv = v.jet(&y, 2)?.flat_laplacian().value();
            let need = (dv - rb.laplacian(&y)).abs() * r.powi(3);
            if need > min_c {
                min_c = need;
                worst_radius = r;
            }
            samples += 1;
        }
    }
    Ok(BarrierReport {
        min_c,
        c_max,
        admissible: min_c <= c_max,
        worst_radius,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSup {
    /// `sup |u − U| / d^τ` over `ε ≤ d ≤ δ`.
    pub weighted: f64,
    /// `sup |u − U|` over `d < ε`.
    pub core: f64,
    /// `core / ε^τ`.
    pub core_ratio: f64,
    pub samples: usize,
}

/// Weighted distance between `u` and the bubble with Euclidean `d = |ξ − p|`.
/// Directions are a Hopf product grid plus the coordinate axes.
pub fn weighted_sup_norm(u: &dyn ScalarField, b: &BubbleParams, tau: f64, delta: f64) -> Result<WeightedSup, BubbleError> {
    let mut dirs = S3Rule::new(3, 6).points;
    for i in 0..4 {
        for sgn in [1.0, -1.0] {
            let mut e = [0.0; 4];
            e[i] = sgn;
            dirs.push(e);
        }
    }
    let n_r = 48;
    let mut weighted = 0.0f64;
    let mut core = 0.0f64;
    let mut samples = 0;
    let mut visit = |d: f64, in_core: bool| -> Result<(), BubbleError> {
        for om in &dirs {
            let xi: Point = std::array::from_fn(|i| b.p[i] + d * om[i]);
            let diff = (u.value(&xi)? - b.eval(d)).abs();
            if in_core {
                core = core.max(diff);
            } else {
                weighted = weighted.max(diff / d.powf(tau));
            }
            samples += 1;
            if d == 0.0 {
                break;
            }
        }
        Ok(())
    };
    for k in 0..8 {
        visit(b.eps * k as f64 / 8.0, true)?;
    }
    for k in 0..n_r {
        let d = b.eps * (delta / b.eps).powf(k as f64 / (n_r - 1) as f64);
        visit(d, false)?;
    }
    Ok(WeightedSup {
        weighted,
        core,
        core_ratio: core / b.eps.powf(tau),
        samples,
    })
}

/// `16π²`, the energy of one bubble.
pub const BUBBLE_ENERGY: f64 = 16.0 * PI * PI;
