//! Pohozaev balances on balls: the curved identity with its curvature
//! corrections, the flat boundary functional and the energy balance.
//!
//! Conventions: `Δ_g u = ∂_i(g^{ij} ∂_j u)` with the flat measure `dξ`, the
//! flat outward normal `ν` and `ξ = x − center`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cnc::{metric_taylor_from_jet, q_to_f64, CncError, CurvatureJet, Q};
use crate::curvature::{invert_metric_jet, CurvatureTermSign};
use crate::field::{AnalyticMetric, BoxDomain, DerivativeSource, FieldError, MetricField, Point, ScalarField};
use crate::jet::Jet;
use crate::quadrature::{PolarRule, Rule1D, S3Rule, S3_AREA};
use crate::stats::{line_fit, loglog_fit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PohozaevError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Cnc(#[from] CncError),
    #[error("ball reaches distance {reach} from the chart origin, beyond the Taylor radius {limit}")]
    TaylorRadiusExceeded { reach: f64, limit: f64 },
    #[error("curvature corrections need the ball centered at the chart origin, got {0:?}")]
    OffCenterChart(Point),
    #[error("metric is singular at {0:?}")]
    SingularMetric(Point),
    #[error("radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("h must be positive at the origin, got {0}")]
    NonPositiveH(f64),
    #[error("at least two radii are needed, got {0}")]
    TooFewRadii(usize),
}

/// A ball with its polar interior rule and spherical boundary rule.
#[derive(Debug, Clone, PartialEq)]
pub struct BallDomain {
    pub center: Point,
    pub radius: f64,
    /// Width of the first radial panel; panels double outward.
    pub core: f64,
    /// Gauss nodes per radial panel.
    pub n_r: usize,
    /// Nodes per polar angle of the sphere rule, which has `n_s² n_phi` points.
    pub n_s: usize,
    pub n_phi: usize,
}

impl BallDomain {
    pub fn new(center: Point, radius: f64) -> Self {
        BallDomain {
            center,
            radius,
            core: (radius / 16.0).min(1.0),
            n_r: 10,
            n_s: 6,
            n_phi: 12,
        }
    }

    pub fn with_core(mut self, core: f64) -> Self {
        self.core = core;
        self
    }

    pub fn with_nodes(mut self, n_r: usize, n_s: usize, n_phi: usize) -> Self {
        self.n_r = n_r;
        self.n_s = n_s;
        self.n_phi = n_phi;
        self
    }

    pub fn refined(&self) -> Self {
        self.clone().with_nodes(self.n_r + 4, self.n_s + 2, self.n_phi + 4)
    }

    pub fn interior_rule(&self) -> PolarRule {
        let radial = Rule1D::geometric(0.0, self.radius, self.core.min(self.radius), self.n_r);
        PolarRule::new(self.center, &radial, &S3Rule::new(self.n_s, self.n_phi))
    }

    /// Boundary nodes as `(point, outward normal, weight)`.
    pub fn boundary_rule(&self) -> Vec<(Point, Point, f64)> {
        let sphere = S3Rule::new(self.n_s, self.n_phi);
        let r3 = self.radius.powi(3);
        sphere
            .points
            .iter()
            .zip(&sphere.weights)
            .map(|(om, w)| {
                let om: Point = std::array::from_fn(|i| om[i]);
                (std::array::from_fn(|i| self.center[i] + self.radius * om[i]), om, w * r3)
            })
            .collect()
    }

    pub fn interior_volume(&self) -> f64 {
        self.interior_rule().weights.iter().sum()
    }

    pub fn boundary_area(&self) -> f64 {
        self.boundary_rule().iter().map(|b| b.2).sum()
    }

    fn check(&self) -> Result<(), PohozaevError> {
        if self.radius > 0.0 && self.radius.is_finite() {
            Ok(())
        } else {
            Err(PohozaevError::BadRadius(self.radius))
        }
    }
}

/// Metric entering the balance.
#[derive(Clone, Copy)]
pub enum PohozaevMetric<'a> {
    Flat,
    /// A general metric with operator `Δ_g²`; no curvature corrections.
    Metric(&'a dyn MetricField),
    /// A Taylor chart about the ball center with the `R_{ij,l}(0)`
    /// corrections of the Paneitz curvature term.
    Curved {
        metric: &'a dyn MetricField,
        jet: &'a CurvatureJet,
        sign: CurvatureTermSign,
        taylor_radius: f64,
    },
}

impl PohozaevMetric<'_> {
    fn field(&self) -> Option<&dyn MetricField> {
        match self {
            PohozaevMetric::Flat => None,
            PohozaevMetric::Metric(m) => Some(*m),
            PohozaevMetric::Curved { metric, .. } => Some(*metric),
        }
    }
}

/// Metric of the conformal-normal chart of `jet` with curvature scaled by `amplitude`.
pub fn curved_chart(jet: &CurvatureJet, amplitude: f64, domain: BoxDomain) -> Result<(CurvatureJet, AnalyticMetric), PohozaevError> {
    let f = Q::from_float(amplitude).unwrap_or_default();
    let scaled = jet.scaled(&f);
    let taylor = metric_taylor_from_jet(&scaled)?;
    Ok((scaled, taylor.to_metric_field(domain)))
}

/// Boundary pieces of `I1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BoundaryTerms {
    /// `½ ∫ h e^{4u} ξ·ν`.
    pub flux: f64,
    /// `−∫ g^{ij} ∂_i(Δu) ξ·∇u ν_j`.
    pub third_order: f64,
    /// `∫ g^{ij} Δu ∂_i u ν_j`.
    pub gradient: f64,
    /// `∫ g^{ij} Δu ξ^k ∂_{ik}u ν_j`.
    pub hessian: f64,
    /// `−½ ∫ (Δu)² ξ·ν`.
    pub laplacian_sq: f64,
}

/// Interior pieces of `I2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MetricTerms {
    pub divergence: f64,
    pub second_derivative: f64,
    pub first_derivative: f64,
    /// `−2 ∫ b ξ·∇u`.
    pub source: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PohozaevReport {
    pub radius: f64,
    pub i0: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub residual: f64,
    /// Coarse-versus-refined quadrature change plus a roundoff floor.
    pub error_estimate: f64,
    pub boundary: BoundaryTerms,
    pub metric: MetricTerms,
    /// Bound on the neglected `O(r²)` curvature remainders; zero unless curved.
    pub unmodeled_remainder: f64,
}

impl PohozaevReport {
    pub fn relative_residual(&self) -> f64 {
        self.residual.abs() / self.i0.abs()
    }

    pub fn correction_size(&self) -> f64 {
        self.i2.abs() + self.i3.abs() + self.i4.abs()
    }

    pub const CSV_HEADER: &'static str = "parameter,I0,I1,I2,I3,I4,residual,error_estimate";

    pub fn csv_row(&self, parameter: f64) -> String {
        format!(
            "{parameter:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.i0, self.i1, self.i2, self.i3, self.i4, self.residual, self.error_estimate
        )
    }
}

struct Local {
    du: [f64; 4],
    ddu: [[f64; 4]; 4],
    lap: f64,
    dlap: [f64; 4],
    ginv: [[f64; 4]; 4],
    /// `Σ_i ∂_i g^{ij}`.
    div_ginv: [f64; 4],
    /// `Σ_i ∂_{ik} g^{ij}` indexed `[k][j]`.
    ddiv_ginv: [[f64; 4]; 4],
    /// `∂_k g^{ij}` indexed `[k][i][j]`.
    dginv: [[[f64; 4]; 4]; 4],
}

fn identity() -> [[f64; 4]; 4] {
    std::array::from_fn(|i| std::array::from_fn(|j| (i == j) as u8 as f64))
}

fn local(metric: Option<&dyn MetricField>, u: &dyn ScalarField, x: &Point) -> Result<Local, PohozaevError> {
    let uj = u.jet(x, 3)?;
    let du = uj.gradient();
    let ddu = uj.hessian();
    let Some(metric) = metric else {
        let lapj = uj.flat_laplacian();
        return Ok(Local {
            du,
            ddu,
            lap: lapj.value(),
            dlap: lapj.gradient(),
            ginv: identity(),
            div_ginv: [0.0; 4],
            ddiv_ginv: [[0.0; 4]; 4],
            dginv: [[[0.0; 4]; 4]; 4],
        });
    };
    let g = metric.jet(x, 2)?;
    let (inv, _) = invert_metric_jet(&g).ok_or(PohozaevError::SingularMetric(*x))?;
    let duj: [Jet; 4] = std::array::from_fn(|j| uj.deriv(j));
    let mut lapj = Jet::constant(1, 0.0);
    for (i, row) in inv.iter().enumerate() {
        let w = row.iter().zip(&duj).fold(Jet::constant(2, 0.0), |acc, (a, b)| acc + *a * *b);
        lapj += w.deriv(i);
    }
    let mut div_ginv = [0.0; 4];
    let mut ddiv_ginv = [[0.0; 4]; 4];
    let mut dginv = [[[0.0; 4]; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let grad = inv[i][j].gradient();
            let hess = inv[i][j].hessian();
            div_ginv[j] += grad[i];
            for k in 0..4 {
                ddiv_ginv[k][j] += hess[i][k];
                dginv[k][i][j] = grad[k];
            }
        }
    }
    Ok(Local {
        du,
        ddu,
        lap: lapj.value(),
        dlap: lapj.gradient(),
        ginv: std::array::from_fn(|i| std::array::from_fn(|j| inv[i][j].value())),
        div_ginv,
        ddiv_ginv,
        dginv,
    })
}

fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `R_{ij,l}(0)` as floats, indexed `[i][j][l]`.
fn ricci_derivative(jet: &CurvatureJet) -> [[[f64; 4]; 4]; 4] {
    std::array::from_fn(|i| std::array::from_fn(|j| std::array::from_fn(|l| q_to_f64(&jet.ricci_derivative(i, j, l)))))
}

#[derive(Debug, Clone, Copy, Default)]
struct Totals {
    i0: f64,
    boundary: BoundaryTerms,
    metric: MetricTerms,
    i3: f64,
    i4: f64,
    sup_du_interior: f64,
    sup_ddu: f64,
    sup_du_boundary: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Interior {
    i0: f64,
    metric: MetricTerms,
    i4: f64,
    du: f64,
    ddu: f64,
}

impl std::ops::Add for Interior {
    type Output = Interior;
    fn add(self, o: Interior) -> Interior {
        Interior {
            i0: self.i0 + o.i0,
            metric: MetricTerms {
                divergence: self.metric.divergence + o.metric.divergence,
                second_derivative: self.metric.second_derivative + o.metric.second_derivative,
                first_derivative: self.metric.first_derivative + o.metric.first_derivative,
                source: self.metric.source + o.metric.source,
            },
            i4: self.i4 + o.i4,
            du: self.du.max(o.du),
            ddu: self.ddu.max(o.ddu),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Boundary {
    terms: BoundaryTerms,
    i3: f64,
    du: f64,
}

impl std::ops::Add for Boundary {
    type Output = Boundary;
    fn add(self, o: Boundary) -> Boundary {
        Boundary {
            terms: BoundaryTerms {
                flux: self.terms.flux + o.terms.flux,
                third_order: self.terms.third_order + o.terms.third_order,
                gradient: self.terms.gradient + o.terms.gradient,
                hessian: self.terms.hessian + o.terms.hessian,
                laplacian_sq: self.terms.laplacian_sq + o.terms.laplacian_sq,
            },
            i3: self.i3 + o.i3,
            du: self.du.max(o.du),
        }
    }
}

fn totals(
    metric: &PohozaevMetric<'_>,
    u: &dyn ScalarField,
    h: &dyn ScalarField,
    b: &dyn ScalarField,
    ball: &BallDomain,
) -> Result<Totals, PohozaevError> {
    let field = metric.field();
    let curv = match metric {
        PohozaevMetric::Curved { jet, sign, .. } => Some((ricci_derivative(jet), sign.factor())),
        _ => None,
    };
    let c = ball.center;
    let rule = ball.interior_rule();
    let interior = rule
        .points
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(x, &w)| -> Result<Interior, PohozaevError> {
            let xi: Point = std::array::from_fn(|i| x[i] - c[i]);
            let l = local(field, u, x)?;
            let hj = h.jet(x, 1)?;
            let e4u = (4.0 * u.value(x)?).exp();
            let bv = b.value(x)?;
            let i0 = (2.0 * hj.value() + 0.5 * dot(&xi, &hj.gradient())) * e4u;
            let mut sd = 0.0;
            let mut fd = 0.0;
            for k in 0..4 {
                sd += xi[k] * dot(&l.ddiv_ginv[k], &l.du);
                for i in 0..4 {
                    fd += xi[k] * dot(&l.dginv[k][i], &l.ddu[i]);
                }
            }
            let mut i4 = 0.0;
            if let Some((rd, s)) = &curv {
                for i in 0..4 {
                    for j in 0..4 {
                        for ll in 0..4 {
                            let hx: f64 = (0..4).map(|k| l.ddu[i][k] * xi[k]).sum();
                            i4 += rd[i][j][ll] * (l.du[j] * l.du[i] * xi[ll] + l.du[j] * hx * xi[ll]);
                        }
                    }
                }
                i4 *= -2.0 * s;
            }
            let ddu_norm = l.ddu.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
            Ok(Interior {
                i0: w * i0,
                metric: MetricTerms {
                    divergence: w * l.lap * dot(&l.div_ginv, &l.du),
                    second_derivative: w * l.lap * sd,
                    first_derivative: w * l.lap * fd,
                    source: -2.0 * w * bv * dot(&xi, &l.du),
                },
                i4: w * i4,
                du: dot(&l.du, &l.du),
                ddu: ddu_norm,
            })
        })
        .try_reduce(Interior::default, |a, b| Ok(a + b))?;

    let boundary = ball
        .boundary_rule()
        .par_iter()
        .map(|(x, nu, w)| -> Result<Boundary, PohozaevError> {
            let xi: Point = std::array::from_fn(|i| x[i] - c[i]);
            let l = local(field, u, x)?;
            let hv = h.value(x)?;
            let e4u = (4.0 * u.value(x)?).exp();
            let xn = dot(&xi, nu);
            let xdu = dot(&xi, &l.du);
            let gnu: [f64; 4] = std::array::from_fn(|i| dot(&l.ginv[i], nu));
            let hxi: [f64; 4] = std::array::from_fn(|i| dot(&l.ddu[i], &xi));
            let mut i3 = 0.0;
            if let Some((rd, s)) = &curv {
                for i in 0..4 {
                    for j in 0..4 {
                        for ll in 0..4 {
                            i3 += rd[i][j][ll] * l.du[j] * xdu * xi[ll] * nu[i];
                        }
                    }
                }
                i3 *= 2.0 * s;
            }
            Ok(Boundary {
                terms: BoundaryTerms {
                    flux: w * 0.5 * hv * e4u * xn,
                    third_order: -w * dot(&l.dlap, &gnu) * xdu,
                    gradient: w * l.lap * dot(&l.du, &gnu),
                    hessian: w * l.lap * dot(&hxi, &gnu),
                    laplacian_sq: -w * 0.5 * l.lap * l.lap * xn,
                },
                i3: w * i3,
                du: dot(&l.du, &l.du),
            })
        })
        .try_reduce(Boundary::default, |a, b| Ok(a + b))?;

    Ok(Totals {
        i0: interior.i0,
        boundary: boundary.terms,
        metric: interior.metric,
        i3: boundary.i3,
        i4: interior.i4,
        sup_du_interior: interior.du,
        sup_ddu: interior.ddu,
        sup_du_boundary: boundary.du,
    })
}

fn sum_boundary(t: &BoundaryTerms) -> f64 {
    t.flux + t.third_order + t.gradient + t.hessian + t.laplacian_sq
}

fn sum_metric(t: &MetricTerms) -> f64 {
    t.divergence + t.second_derivative + t.first_derivative + t.source
}

fn fd_penalty(sources: &[DerivativeSource]) -> f64 {
    sources
        .iter()
        .map(|s| match s {
            DerivativeSource::Analytic => 0.0,
            DerivativeSource::FiniteDifference { step } => step * step,
        })
        .fold(0.0, f64::max)
}

/// Evaluate every term of the Pohozaev identity for
/// `P u + 2b = 2h e^{4u}` on `ball`.
pub fn pohozaev_balance(
    metric: PohozaevMetric<'_>,
    u: &dyn ScalarField,
    h: &dyn ScalarField,
    b: &dyn ScalarField,
    ball: &BallDomain,
) -> Result<PohozaevReport, PohozaevError> {
    ball.check()?;
    let mut curvature_scale = 0.0;
    if let PohozaevMetric::Curved { jet, taylor_radius, .. } = &metric {
        if ball.center.iter().any(|v| *v != 0.0) {
            return Err(PohozaevError::OffCenterChart(ball.center));
        }
        if ball.radius > *taylor_radius {
            return Err(PohozaevError::TaylorRadiusExceeded {
                reach: ball.radius,
                limit: *taylor_radius,
            });
        }
        let r0 = jet.r0.max_abs();
        curvature_scale = r0 * r0 + jet.r1.max_abs() + jet.r2.as_ref().map_or(0.0, |t| t.max_abs());
    }
    let coarse = totals(&metric, u, h, b, ball)?;
    let fine = totals(&metric, u, h, b, &ball.refined())?;

    let i0 = fine.i0;
    let i1 = sum_boundary(&fine.boundary);
    let i2 = sum_metric(&fine.metric);
    let (i3, i4) = (fine.i3, fine.i4);
    let residual = i0 - (i1 + i2 + i3 + i4);

    let pairs = [
        (fine.i0, coarse.i0),
        (i1, sum_boundary(&coarse.boundary)),
        (i2, sum_metric(&coarse.metric)),
        (fine.i3, coarse.i3),
        (fine.i4, coarse.i4),
    ];
    let scale: f64 = pairs.iter().map(|p| p.0.abs()).sum::<f64>()
        + fine.boundary.third_order.abs()
        + fine.boundary.gradient.abs()
        + fine.boundary.hessian.abs()
        + fine.boundary.laplacian_sq.abs();
    let mut sources = vec![u.source(), h.source(), b.source()];
    if let Some(m) = metric.field() {
        sources.push(m.source());
    }
    let error_estimate = pairs.iter().map(|p| (p.0 - p.1).abs()).sum::<f64>() + (1e-13 + fd_penalty(&sources)) * scale;

    let r = ball.radius;
    let area = S3_AREA * r.powi(3);
    let vol = 0.5 * PI * PI * r.powi(4);
    let unmodeled_remainder = curvature_scale
        * (area * r.powi(3) * fine.sup_du_boundary + vol * (r * r * fine.sup_du_interior + r.powi(4) * fine.sup_ddu));

    Ok(PohozaevReport {
        radius: r,
        i0,
        i1,
        i2,
        i3,
        i4,
        residual,
        error_estimate,
        boundary: fine.boundary,
        metric: fine.metric,
        unmodeled_remainder,
    })
}

/// `∫_{∂B} (−∂_i(Δu) ∂_a u ν_i + Δu ∂_{ia}u ν_i − ½(Δu)² ν_a)` for each `a`.
pub fn flat_boundary_functional(u: &dyn ScalarField, ball: &BallDomain) -> Result<[f64; 4], PohozaevError> {
    ball.check()?;
    ball.boundary_rule()
        .par_iter()
        .map(|(x, nu, w)| -> Result<[f64; 4], PohozaevError> {
            let l = local(None, u, x)?;
            let dn = dot(&l.dlap, nu);
            Ok(std::array::from_fn(|a| {
                w * (-dn * l.du[a] + l.lap * dot(&l.ddu[a], nu) - 0.5 * l.lap * l.lap * nu[a])
            }))
        })
        .try_reduce(|| [0.0; 4], |a, b| Ok(std::array::from_fn(|i| a[i] + b[i])))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRow {
    pub radius: f64,
    /// `2 ∫_{B_R} h e^{4u}`.
    pub alpha: f64,
    pub boundary: f64,
    /// `B(R) − α(R)²/16π²`.
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyBalance {
    pub rows: Vec<EnergyRow>,
    /// Intercept of `defect` against `1/log R`.
    pub limit: f64,
    /// Coefficient of `1/log R` in the same fit.
    pub log_coefficient: f64,
    /// Log-log slope of `|defect|` against `R`.
    pub power_rate: f64,
}

/// `B(R) = ∫_{∂B_R} (−R ∂_ν(Δu) ∂_ν u + ∂_ν(y·∇u) Δu − ½R(Δu)²)`.
fn energy_boundary(u: &dyn ScalarField, ball: &BallDomain) -> Result<f64, PohozaevError> {
    let r = ball.radius;
    ball.boundary_rule()
        .par_iter()
        .map(|(x, nu, w)| -> Result<f64, PohozaevError> {
            let l = local(None, u, x)?;
            let dun = dot(&l.du, nu);
            let hnn: f64 = (0..4).map(|i| nu[i] * dot(&l.ddu[i], nu)).sum();
            Ok(w * (-r * dot(&l.dlap, nu) * dun + (dun + r * hnn) * l.lap - 0.5 * r * l.lap * l.lap))
        })
        .try_reduce(|| 0.0, |a, b| Ok(a + b))
}

/// `α(R)`, `B(R)` and their balance on balls about `ball.center` of each radius.
pub fn energy_balance(
    u: &dyn ScalarField,
    h: &dyn ScalarField,
    ball: &BallDomain,
    radii: &[f64],
) -> Result<EnergyBalance, PohozaevError> {
    if radii.len() < 2 {
        return Err(PohozaevError::TooFewRadii(radii.len()));
    }
    let mut rows = Vec::with_capacity(radii.len());
    for &radius in radii {
        let b = BallDomain { radius, ..ball.clone() };
        b.check()?;
        let rule = b.interior_rule();
        let alpha = 2.0
            * rule
                .points
                .par_iter()
                .zip(rule.weights.par_iter())
                .map(|(x, w)| -> Result<f64, PohozaevError> { Ok(w * h.value(x)? * (4.0 * u.value(x)?).exp()) })
                .try_reduce(|| 0.0, |a, b| Ok(a + b))?;
        let boundary = energy_boundary(u, &b)?;
        rows.push(EnergyRow {
            radius,
            alpha,
            boundary,
            defect: boundary - alpha * alpha / (16.0 * PI * PI),
        });
    }
    let inv_log: Vec<f64> = rows.iter().map(|r| 1.0 / r.radius.ln()).collect();
    let defects: Vec<f64> = rows.iter().map(|r| r.defect).collect();
    let fit = line_fit(&inv_log, &defects);
    let rs: Vec<f64> = rows.iter().map(|r| r.radius).collect();
    let power_rate = loglog_fit(&rs, &defects).slope;
    Ok(EnergyBalance {
        rows,
        limit: fit.intercept,
        log_coefficient: fit.slope,
        power_rate,
    })
}

/// `∇h/h + 4∇φ` at `x`.
pub fn vanishing_rate_balance(h: &dyn ScalarField, phi: &dyn ScalarField, x: &Point) -> Result<[f64; 4], PohozaevError> {
    let hj = h.jet(x, 1)?;
    if !(hj.value() > 0.0) {
        return Err(PohozaevError::NonPositiveH(hj.value()));
    }
    let gh = hj.gradient();
    let gp = phi.jet(x, 1)?.gradient();
    Ok(std::array::from_fn(|i| gh[i] / hj.value() + 4.0 * gp[i]))
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("radial third derivative is undefined at the origin")]
pub struct AtOrigin;

fn delta(a: usize, b: usize) -> f64 {
    (a == b) as u8 as f64
}

/// `∂_{iml} f(|y|)` from `d = [f', f'', f''']`.
pub fn radial_third_derivative(d: [f64; 3], y: &Point, i: usize, m: usize, l: usize) -> Result<f64, AtOrigin> {
    let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(AtOrigin);
    }
    let [f1, f2, f3] = d;
    let a = f3 - 3.0 * f2 / r + 3.0 * f1 / (r * r);
    let b = f2 - f1 / r;
    Ok(a * y[i] * y[m] * y[l] / r.powi(3)
        + b * (delta(i, l) * y[m] + delta(i, m) * y[l] + delta(m, l) * y[i]) / (r * r))
}

/// The grouped expansion as it is usually displayed, with `(f'' − f')` in
/// the `δ_{ml}` coefficient. Agrees with [`radial_third_derivative`] only
/// on the unit sphere or when `δ_{ml} y_i = 0`.
pub fn radial_third_derivative_displayed(d: [f64; 3], y: &Point, i: usize, m: usize, l: usize) -> Result<f64, AtOrigin> {
    let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(AtOrigin);
    }
    let [f1, f2, f3] = d;
    let r2 = r * r;
    Ok((f3 - f2 / r + f1 / r2) * y[i] * y[m] * y[l] / r.powi(3)
        + (f2 - f1 / r) * ((delta(i, l) * y[m] + y[l] * delta(i, m)) * r2 - 2.0 * y[l] * y[m] * y[i]) / r.powi(4)
        + (f2 - f1) * delta(m, l) * y[i] / r2)
}

/// Worst deviation of each closed form from finite differences over all
/// index triples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialDisplayCheck {
    pub corrected_error: f64,
    pub displayed_error: f64,
    pub tolerance: f64,
}

impl RadialDisplayCheck {
    pub fn corrected_matches(&self) -> bool {
        self.corrected_error <= self.tolerance
    }

    pub fn displayed_matches(&self) -> bool {
        self.displayed_error <= self.tolerance
    }
}

/// Central differences of the analytic gradient `f'(r) y_i / r`.
pub fn radial_third_derivative_fd(df: &dyn Fn(f64) -> f64, y: &Point, i: usize, m: usize, l: usize, step: f64) -> f64 {
    let grad = |p: &Point| {
        let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        df(r) * p[i] / r
    };
    let shift = |p: &Point, k: usize, t: f64| {
        let mut q = *p;
        q[k] += t;
        q
    };
    let d1 = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
    if m == l {
        let d2 = [(-2.0, -1.0), (-1.0, 16.0), (0.0, -30.0), (1.0, 16.0), (2.0, -1.0)];
        d2.iter().map(|(t, c)| c * grad(&shift(y, m, t * step))).sum::<f64>() / (12.0 * step * step)
    } else {
        let mut acc = 0.0;
        for (s, cs) in d1 {
            for (t, ct) in d1 {
                acc += cs * ct * grad(&shift(&shift(y, m, s * step), l, t * step));
            }
        }
        acc / (144.0 * step * step)
    }
}

/// Compare both closed forms against finite differences at `y`.
/// `derivs(r)` returns `[f', f'', f''']`.
pub fn check_radial_display(derivs: &dyn Fn(f64) -> [f64; 3], y: &Point, tolerance: f64) -> Result<RadialDisplayCheck, AtOrigin> {
    let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let d = derivs(r);
    let df = |s: f64| derivs(s)[0];
    let step = 1e-2 * r.max(1e-3);
    let mut corrected_error = 0.0f64;
    let mut displayed_error = 0.0f64;
    for i in 0..4 {
        for m in 0..4 {
            for l in 0..4 {
                let fd = radial_third_derivative_fd(&df, y, i, m, l, step);
                corrected_error = corrected_error.max((radial_third_derivative(d, y, i, m, l)? - fd).abs());
                displayed_error = displayed_error.max((radial_third_derivative_displayed(d, y, i, m, l)? - fd).abs());
            }
        }
    }
    Ok(RadialDisplayCheck {
        corrected_error,
        displayed_error,
        tolerance,
    })
}
