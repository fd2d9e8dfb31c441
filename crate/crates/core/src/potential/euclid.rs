//! Logarithmic potentials `v(x) = (1/4π²) ∫ log(|y|/|x−y|) ρ(y) dy` on `R^4`
//! and their first few derivatives, so that `Δ²v = 2ρ`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use super::PotentialError;
use crate::bubble::RescaledBubble;
use crate::field::Point;
use crate::quadrature::{PolarRule, Rule1D, S3Rule, S3_AREA};

type RadialFn = dyn Fn(f64) -> f64 + Send + Sync;
type PointFn = dyn Fn(&Point) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum DensityProfile {
    /// `ρ(y) = f(|y|)`.
    Radial(Arc<RadialFn>),
    General(Arc<PointFn>),
}

impl fmt::Debug for DensityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityProfile::Radial(_) => f.write_str("Radial(..)"),
            DensityProfile::General(_) => f.write_str("General(..)"),
        }
    }
}

/// A density truncated to the ball `|y| ≤ r_cut`.
#[derive(Debug, Clone)]
pub struct Density {
    pub profile: DensityProfile,
    pub r_cut: f64,
    /// Length scale of the core, used to place quadrature panels.
    pub scale: f64,
}

/// Radius where a profile decaying like `(1 + r/scale)^{-decay}` drops below `1e-12`.
pub fn decay_cutoff(scale: f64, decay: f64) -> f64 {
    scale * (1e12f64.powf(1.0 / decay) - 1.0)
}

impl Density {
    pub fn radial(f: impl Fn(f64) -> f64 + Send + Sync + 'static, r_cut: f64, scale: f64) -> Self {
        Density {
            profile: DensityProfile::Radial(Arc::new(f)),
            r_cut,
            scale,
        }
    }

    pub fn general(f: impl Fn(&Point) -> f64 + Send + Sync + 'static, r_cut: f64, scale: f64) -> Self {
        Density {
            profile: DensityProfile::General(Arc::new(f)),
            r_cut,
            scale,
        }
    }

    /// `H e^{4U}` for the standard profile of height `H`; its potential is `U`.
    pub fn bubble(b: RescaledBubble) -> Self {
        let scale = 1.0 / b.rho.sqrt();
        let h = b.h;
        let rho = b.rho;
        Density::radial(move |t| h * (1.0 + rho * t * t).powi(-4), decay_cutoff(scale, 8.0), scale)
    }

    pub fn with_cutoff(mut self, r_cut: f64) -> Self {
        self.r_cut = r_cut;
        self
    }

    /// The same density seen through the general quadrature path.
    pub fn to_general(&self) -> Density {
        match &self.profile {
            DensityProfile::General(_) => self.clone(),
            DensityProfile::Radial(f) => {
                let f = f.clone();
                Density::general(move |y| f(norm(y)), self.r_cut, self.scale)
            }
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.profile, DensityProfile::Radial(_))
    }

    pub fn eval(&self, y: &Point) -> f64 {
        if norm(y) > self.r_cut {
            return 0.0;
        }
        match &self.profile {
            DensityProfile::Radial(f) => f(norm(y)),
            DensityProfile::General(f) => f(y),
        }
    }

    /// `∫ρ` over the truncation ball.
    pub fn mass(&self) -> f64 {
        let q = PotentialQuadrature::default();
        match &self.profile {
            DensityProfile::Radial(f) => S3_AREA * radial_rule(self, None, q.panel_nodes).integrate(|s| s.powi(3) * f(s)),
            DensityProfile::General(f) => origin_rule(self, &q).integrate(|y| f(y)),
        }
    }

    /// Mass beyond `r_cut`, assuming the density decays like `|y|^{-8}` there.
    pub fn tail_estimate(&self) -> f64 {
        let r = self.r_cut;
        let sphere = S3Rule::new(4, 8);
        let mean = match &self.profile {
            DensityProfile::Radial(f) => f(r),
            DensityProfile::General(f) => {
                sphere
                    .points
                    .iter()
                    .zip(&sphere.weights)
                    .map(|(om, w)| w * f(&om.map(|v| r * v)).abs())
                    .sum::<f64>()
                    / S3_AREA
            }
        };
        S3_AREA * mean.abs() * r.powi(4) / 4.0
    }
}

/// Which quantity of the potential to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialDerivative {
    Value,
    Gradient(usize),
    Laplacian,
    Hessian(usize, usize),
    GradLaplacian(usize),
}

/// Resolution of the potential quadratures. Each value is computed at this
/// level and at a refined level; the difference must stay below `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialQuadrature {
    /// Gauss–Legendre nodes per radial panel.
    pub panel_nodes: usize,
    /// Sphere rule: nodes in `sin²η` and per Hopf angle.
    pub sphere_s: usize,
    pub sphere_phi: usize,
    pub tolerance: f64,
}

impl Default for PotentialQuadrature {
    fn default() -> Self {
        PotentialQuadrature {
            panel_nodes: 12,
            sphere_s: 12,
            sphere_phi: 24,
            tolerance: 1e-6,
        }
    }
}

impl PotentialQuadrature {
    fn refined(&self) -> Self {
        PotentialQuadrature {
            panel_nodes: self.panel_nodes + 4,
            sphere_s: self.sphere_s + self.sphere_s / 2,
            sphere_phi: self.sphere_phi + self.sphere_phi / 2,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureEstimate {
    pub value: f64,
    /// `|refined − coarse|`.
    pub change: f64,
}

/// Radial profile of the potential of a radial density at `t = |x|`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RadialPotential {
    pub v: f64,
    pub dv: f64,
    pub ddv: f64,
    pub laplacian: f64,
    pub dlaplacian: f64,
}

fn norm(x: &Point) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Panels on `[0, r_cut]`: doubling from `scale/64`, split at `kink`.
fn radial_breaks(d: &Density, kink: Option<f64>, upper: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let mut x = d.scale / 64.0;
    while x < upper {
        b.push(x);
        x *= 2.0;
    }
    b.push(upper);
    if let Some(t) = kink {
        if t > 0.0 && t < upper {
            b.push(t);
            for f in [0.5, 0.9, 1.1, 2.0] {
                if t * f < upper {
                    b.push(t * f);
                }
            }
        }
    }
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * upper);
    b
}

fn radial_rule(d: &Density, kink: Option<f64>, nodes: usize) -> Rule1D {
    Rule1D::composite(&radial_breaks(d, kink, d.r_cut), nodes)
}

/// Polar rule about the origin covering `|y| ≤ r_cut`.
fn origin_rule(d: &Density, q: &PotentialQuadrature) -> PolarRule {
    let radial = Rule1D::composite(&radial_breaks(d, None, d.r_cut), q.panel_nodes);
    PolarRule::new([0.0; 4], &radial, &S3Rule::new(q.sphere_s, q.sphere_phi))
}

/// Radial potential via the angular mean
/// `⨍ log|x−y| = log max(s,t) + min(s,t)²/(4 max(s,t)²)`.
pub fn radial_potential(d: &Density, t: f64) -> Result<RadialPotential, PotentialError> {
    radial_potential_with(d, t, &PotentialQuadrature::default()).map(|(p, _)| p)
}

fn radial_potential_at(f: &RadialFn, d: &Density, t: f64, nodes: usize) -> RadialPotential {
    let rule = radial_rule(d, Some(t), nodes);
    let mut p = RadialPotential::default();
    let mut inner_mass = 0.0;
    for (s, w) in rule.iter() {
        let m = w * s.powi(3) * f(s);
        if s < t {
            let (r, r2) = (s / t, (s / t).powi(2));
            p.v += m * (r.ln() - r2 / 4.0);
            p.dv += m * (-1.0 / t + s * s / (2.0 * t.powi(3)));
            p.ddv += m * (1.0 / (t * t) - 1.5 * s * s / t.powi(4));
            p.laplacian -= m / (t * t);
            inner_mass += m;
        } else {
            p.v -= m * t * t / (4.0 * s * s);
            p.dv -= m * t / (2.0 * s * s);
            p.ddv -= m / (2.0 * s * s);
            p.laplacian -= m / (s * s);
        }
    }
    p.v *= 0.5;
    p.dv *= 0.5;
    p.ddv *= 0.5;
    p.dlaplacian = if t > 0.0 { 2.0 * inner_mass / t.powi(3) } else { 0.0 };
    p
}

fn radial_potential_with(d: &Density, t: f64, q: &PotentialQuadrature) -> Result<(RadialPotential, RadialPotential), PotentialError> {
    let DensityProfile::Radial(f) = &d.profile else {
        unreachable!("radial path on a general density")
    };
    let coarse = radial_potential_at(f.as_ref(), d, t, q.panel_nodes);
    let fine = radial_potential_at(f.as_ref(), d, t, q.refined().panel_nodes);
    let change = RadialPotential {
        v: (fine.v - coarse.v).abs(),
        dv: (fine.dv - coarse.dv).abs(),
        ddv: (fine.ddv - coarse.ddv).abs(),
        laplacian: (fine.laplacian - coarse.laplacian).abs(),
        dlaplacian: (fine.dlaplacian - coarse.dlaplacian).abs(),
    };
    Ok((fine, change))
}

fn radial_component(p: &RadialPotential, x: &Point, which: PotentialDerivative) -> f64 {
    let t = norm(x);
    let u: Point = if t > 0.0 { x.map(|v| v / t) } else { [0.0; 4] };
    match which {
        PotentialDerivative::Value => p.v,
        PotentialDerivative::Gradient(i) => p.dv * u[i],
        PotentialDerivative::Laplacian => p.laplacian,
        PotentialDerivative::Hessian(i, j) => {
            let delta = if i == j { 1.0 } else { 0.0 };
            if t > 0.0 {
                p.ddv * u[i] * u[j] + p.dv / t * (delta - u[i] * u[j])
            } else {
                p.ddv * delta
            }
        }
        PotentialDerivative::GradLaplacian(i) => p.dlaplacian * u[i],
    }
}

/// Integrand of the general path along `y = x + rω`, already multiplied
/// by `r³`; each kernel is bounded there.
fn centered_kernel(which: PotentialDerivative, r: f64, om: &Point) -> f64 {
    let c = 1.0 / (4.0 * PI * PI);
    match which {
        PotentialDerivative::Value => -c * r.powi(3) * r.ln(),
        PotentialDerivative::Gradient(a) => c * r * r * om[a],
        PotentialDerivative::Laplacian => -2.0 * c * r,
        PotentialDerivative::Hessian(i, j) => {
            let delta = if i == j { 1.0 } else { 0.0 };
            -c * r * (delta - 2.0 * om[i] * om[j])
        }
        PotentialDerivative::GradLaplacian(i) => -4.0 * c * om[i],
    }
}

/// Smooth cutoff: 1 on `[0, 1/2]`, 0 on `[1, ∞)`.
fn bump(u: f64) -> f64 {
    if u <= 0.5 {
        return 1.0;
    }
    if u >= 1.0 {
        return 0.0;
    }
    let s = 2.0 * u - 1.0;
    let a = (-1.0 / (1.0 - s)).exp();
    let b = (-1.0 / s).exp();
    a / (a + b)
}

/// `∫ g(r, ω, y) dr dω` over `|y − center| ≤ reach`, restricted to `|y| ≤ r_cut`.
fn polar_sum(d: &Density, q: &PotentialQuadrature, center: &Point, breaks: &[f64], g: impl Fn(f64, &Point, &Point) -> f64 + Sync) -> f64 {
    let sphere = S3Rule::new(q.sphere_s, q.sphere_phi);
    let radial = Rule1D::composite(breaks, q.panel_nodes);
    radial
        .nodes
        .par_iter()
        .zip(radial.weights.par_iter())
        .map(|(&r, &wr)| {
            let mut acc = 0.0;
            for (om, wo) in sphere.points.iter().zip(&sphere.weights) {
                let y: Point = std::array::from_fn(|k| center[k] + r * om[k]);
                if norm(&y) <= d.r_cut {
                    acc += wo * g(r, om, &y);
                }
            }
            wr * acc
        })
        .sum()
}

fn general_at(f: &PointFn, d: &Density, x: &Point, which: PotentialDerivative, q: &PotentialQuadrature) -> f64 {
    let t = norm(x);
    if which == PotentialDerivative::Value && t == 0.0 {
        return 0.0;
    }
    // Taper the density to zero over the last tenth of the cutoff ball so
    // that rays from `x` leave its support smoothly.
    let tapered = |y: &Point| f(y) * bump(0.5 + 5.0 * (norm(y) / d.r_cut - 0.9));
    let with_taper = |mut b: Vec<f64>| {
        b.push(0.9 * d.r_cut);
        b.sort_by(f64::total_cmp);
        b
    };
    let near_breaks = with_taper(radial_breaks(d, Some(t), d.r_cut + t));
    let near = polar_sum(d, q, x, &near_breaks, |r, om, y| tapered(y) * centered_kernel(which, r, om));
    if which != PotentialDerivative::Value {
        return near;
    }
    let far_breaks = with_taper(radial_breaks(d, None, d.r_cut));
    let far = polar_sum(d, q, &[0.0; 4], &far_breaks, |r, _, y| if r > 0.0 { r.powi(3) * r.ln() * tapered(y) } else { 0.0 });
    near + far / (4.0 * PI * PI)
}

/// `v(x)` or one of its derivatives, with the quadrature change.
pub fn potential_with(d: &Density, x: &Point, which: PotentialDerivative, q: &PotentialQuadrature) -> Result<QuadratureEstimate, PotentialError> {
    let est = match &d.profile {
        DensityProfile::Radial(_) => {
            let (p, dp) = radial_potential_with(d, norm(x), q)?;
            let value = radial_component(&p, x, which);
            let change = match which {
                PotentialDerivative::Value => dp.v,
                PotentialDerivative::Gradient(_) => dp.dv,
                PotentialDerivative::Laplacian => dp.laplacian,
                PotentialDerivative::Hessian(..) => dp.ddv + dp.dv / norm(x).max(d.scale),
                PotentialDerivative::GradLaplacian(_) => dp.dlaplacian,
            };
            QuadratureEstimate { value, change }
        }
        DensityProfile::General(f) => {
            let coarse = general_at(f.as_ref(), d, x, which, q);
            let fine = general_at(f.as_ref(), d, x, which, &q.refined());
            QuadratureEstimate {
                value: fine,
                change: (fine - coarse).abs(),
            }
        }
    };
    if !(est.change <= q.tolerance) {
        return Err(PotentialError::QuadratureTolerance {
            estimate: est.value,
            change: est.change,
        });
    }
    Ok(est)
}

/// `(1/4π²) ∫ log(|y|/|x−y|) ρ(y) dy`.
pub fn log_potential(d: &Density, x: &Point) -> Result<f64, PotentialError> {
    potential_derivative(d, x, PotentialDerivative::Value)
}

pub fn potential_derivative(d: &Density, x: &Point, which: PotentialDerivative) -> Result<f64, PotentialError> {
    potential_with(d, x, which, &PotentialQuadrature::default()).map(|e| e.value)
}
