//! Curvature tensors, the Paneitz operator and Q-curvature on coordinate
//! patches.
//!
//! Conventions: `R^a_{bcd} = ∂_c Γ^a_{db} − ∂_d Γ^a_{cb} + Γ^a_{ce} Γ^e_{db} − Γ^a_{de} Γ^e_{cb}`,
//! `R_{abcd} = g_{ae} R^e_{bcd}`, `Ric_{bd} = g^{ac} R_{abcd}`, so the unit
//! round sphere has `R_{abcd} = g_{ac} g_{bd} − g_{ad} g_{bc}` and positive
//! scalar curvature. `Δ_g = div_g ∇` is non-positive.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix4, SymmetricEigen};
use thiserror::Error;

use crate::field::{
    BoxDomain, DerivativeSource, FieldError, MetricField, MetricJet, Point, SampledMetric, SampledScalar, ScalarField,
};
use crate::jet::{Jet, DIM};
use crate::quadrature::{PolarRule, Rule1D, S3Rule};
use crate::stats::loglog_fit;

pub type Tensor4 = [[[[f64; DIM]; DIM]; DIM]; DIM];
pub type Matrix = [[f64; DIM]; DIM];

/// Smallest admissible metric eigenvalue.
pub const EIGENVALUE_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("metric is degenerate at {point:?}: smallest eigenvalue {min_eigenvalue:e}")]
    DegenerateMetric { point: Point, min_eigenvalue: f64 },
    #[error("tensor violates its symmetries: {0}")]
    InvariantViolation(String),
    #[error("quadrature weights give volume {got}, expected {expected}")]
    QuadratureDivergence { got: f64, expected: f64 },
}

/// Sign in front of the curvature divergence term of the Paneitz operator.
///
/// With a non-positive `Δ_g` only [`CurvatureTermSign::Minus`] yields a
/// conformally covariant operator; `Plus` is kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureTermSign {
    Minus,
    Plus,
}

impl CurvatureTermSign {
    pub(crate) fn factor(self) -> f64 {
        match self {
            CurvatureTermSign::Minus => -1.0,
            CurvatureTermSign::Plus => 1.0,
        }
    }
}

pub fn zero_tensor() -> Tensor4 {
    [[[[0.0; DIM]; DIM]; DIM]; DIM]
}

fn zero_jet_matrix(order: usize) -> MetricJet {
    [[Jet::constant(order, 0.0); DIM]; DIM]
}

/// Inverse and determinant of a matrix of jets.
pub fn invert_metric_jet(g: &MetricJet) -> Option<(MetricJet, Jet)> {
    let order = g[0][0].order();
    let mut a = *g;
    let mut inv = zero_jet_matrix(order);
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = Jet::constant(order, 1.0);
    }
    let mut det = Jet::constant(order, 1.0);
    for col in 0..DIM {
        let piv = (col..DIM).max_by(|&p, &q| a[p][col].value().abs().total_cmp(&a[q][col].value().abs()))?;
        if a[piv][col].value().abs() < 1e-300 {
            return None;
        }
        if piv != col {
            a.swap(piv, col);
            inv.swap(piv, col);
            det = -det;
        }
        let p = a[col][col];
        det *= p;
        let pr = p.recip();
        for k in 0..DIM {
            a[col][k] *= pr;
            inv[col][k] *= pr;
        }
        for r in 0..DIM {
            if r == col {
                continue;
            }
            let f = a[r][col];
            if f.max_abs() == 0.0 {
                continue;
            }
            for k in 0..DIM {
                let (ack, ick) = (a[col][k], inv[col][k]);
                a[r][k] -= f * ack;
                inv[r][k] -= f * ick;
            }
        }
    }
    Some((inv, det))
}

/// Fail if the metric value at the point is not safely positive definite.
pub fn check_nondegenerate(g: &Matrix, x: &Point) -> Result<(), GeomError> {
    let m = Matrix4::from_fn(|i, j| g[i][j]);
    let eig = SymmetricEigen::new(m);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < EIGENVALUE_FLOOR || !min.is_finite() {
        return Err(GeomError::DegenerateMetric {
            point: *x,
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// Metric data and Christoffel symbols at a point, as Taylor jets.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub point: Point,
    pub g: MetricJet,
    pub ginv: MetricJet,
    pub sqrt_det: Jet,
    /// `gamma[k][i][j] = Γ^k_{ij}`, one order lower than `g`.
    pub gamma: [[[Jet; DIM]; DIM]; DIM],
}

impl LocalGeometry {
    /// Expand `g` at `x` to the given order (at least 1).
    pub fn at(g: &dyn MetricField, x: &Point, order: usize) -> Result<Self, GeomError> {
        let jets = g.jet(x, order.max(1))?;
        Self::from_jets(jets, *x)
    }

    pub fn from_jets(g: MetricJet, point: Point) -> Result<Self, GeomError> {
        let order = g[0][0].order();
        assert!(order >= 1, "local geometry needs first derivatives");
        let val: Matrix = std::array::from_fn(|a| std::array::from_fn(|b| g[a][b].value()));
        check_nondegenerate(&val, &point)?;
        let (ginv, det) = invert_metric_jet(&g).ok_or(GeomError::DegenerateMetric {
            point,
            min_eigenvalue: 0.0,
        })?;
        let sqrt_det = det.sqrt();
        let dg: [[[Jet; DIM]; DIM]; DIM] =
            std::array::from_fn(|l| std::array::from_fn(|i| std::array::from_fn(|j| g[i][j].deriv(l))));
        let mut lower = [[[Jet::constant(order - 1, 0.0); DIM]; DIM]; DIM];
        for l in 0..DIM {
            for i in 0..DIM {
                for j in i..DIM {
                    let v = (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]) * 0.5;
                    lower[l][i][j] = v;
                    lower[l][j][i] = v;
                }
            }
        }
        let mut gamma = [[[Jet::constant(order - 1, 0.0); DIM]; DIM]; DIM];
        for k in 0..DIM {
            for i in 0..DIM {
                for j in i..DIM {
                    let mut acc = Jet::constant(order - 1, 0.0);
                    for (l, low) in lower.iter().enumerate() {
                        acc += ginv[k][l] * low[i][j];
                    }
                    gamma[k][i][j] = acc;
                    gamma[k][j][i] = acc;
                }
            }
        }
        Ok(LocalGeometry {
            point,
            g,
            ginv,
            sqrt_det,
            gamma,
        })
    }

    pub fn order(&self) -> usize {
        self.g[0][0].order()
    }

    pub fn metric_value(&self) -> Matrix {
        std::array::from_fn(|a| std::array::from_fn(|b| self.g[a][b].value()))
    }

    pub fn inverse_value(&self) -> Matrix {
        std::array::from_fn(|a| std::array::from_fn(|b| self.ginv[a][b].value()))
    }

    /// Ricci tensor jets, two orders below `g`.
    pub fn ricci(&self) -> [[Jet; DIM]; DIM] {
        let n = self.order();
        assert!(n >= 2, "Ricci tensor needs second derivatives of the metric");
        let gm = &self.gamma;
        let mut ric = [[Jet::constant(n - 2, 0.0); DIM]; DIM];
        let trace: [Jet; DIM] = std::array::from_fn(|e| {
            let mut acc = Jet::constant(n - 1, 0.0);
            for a in 0..DIM {
                acc += gm[a][a][e];
            }
            acc
        });
        for b in 0..DIM {
            for d in b..DIM {
                let mut acc = Jet::constant(n - 2, 0.0);
                for a in 0..DIM {
                    acc += gm[a][d][b].deriv(a);
                }
                acc -= trace[b].deriv(d);
                for e in 0..DIM {
                    acc += (trace[e] * gm[e][d][b]).truncate(n - 2);
                    for a in 0..DIM {
                        acc -= (gm[a][d][e] * gm[e][a][b]).truncate(n - 2);
                    }
                }
                ric[b][d] = acc;
                ric[d][b] = acc;
            }
        }
        ric
    }

    /// Scalar curvature from Ricci jets.
    pub fn scalar(&self, ric: &[[Jet; DIM]; DIM]) -> Jet {
        let n = ric[0][0].order();
        let mut acc = Jet::constant(n, 0.0);
        for a in 0..DIM {
            for b in 0..DIM {
                acc += self.ginv[a][b] * ric[a][b];
            }
        }
        acc
    }

    /// `g^{ij} ∂_j u`.
    pub fn gradient_up(&self, u: &Jet) -> [Jet; DIM] {
        let du: [Jet; DIM] = std::array::from_fn(|j| u.deriv(j));
        std::array::from_fn(|i| {
            let mut acc = Jet::constant(du[0].order(), 0.0);
            for (j, d) in du.iter().enumerate() {
                acc += self.ginv[i][j] * *d;
            }
            acc
        })
    }

    /// Riemannian divergence of a vector field.
    pub fn divergence(&self, v: &[Jet; DIM]) -> Jet {
        let mut acc = Jet::constant(v[0].order().min(self.order()) - 1, 0.0);
        for (i, vi) in v.iter().enumerate() {
            acc += (self.sqrt_det * *vi).deriv(i);
        }
        acc * self.sqrt_det.recip()
    }

    /// Laplace–Beltrami operator.
    pub fn laplacian(&self, u: &Jet) -> Jet {
        self.divergence(&self.gradient_up(u))
    }

    /// Paneitz operator applied to `u`.
    pub fn paneitz(&self, u: &Jet, sign: CurvatureTermSign) -> Jet {
        let lap = self.laplacian(u);
        let bilap = self.laplacian(&lap);
        let ric = self.ricci();
        let r = self.scalar(&ric);
        let du: [Jet; DIM] = std::array::from_fn(|j| u.deriv(j));
        let n = ric[0][0].order().min(du[0].order());
        // V^i = g^{ij} A_{jk} g^{kl} ∂_l u with A = (2/3) R g − 2 Ric
        let w: [Jet; DIM] = std::array::from_fn(|k| {
            let mut acc = Jet::constant(n, 0.0);
            for (l, d) in du.iter().enumerate() {
                acc += self.ginv[k][l] * *d;
            }
            acc
        });
        let aw: [Jet; DIM] = std::array::from_fn(|j| {
            let mut acc = (r * du[j]) * (2.0 / 3.0);
            for (k, wk) in w.iter().enumerate() {
                acc -= ric[j][k] * *wk * 2.0;
            }
            acc
        });
        let v: [Jet; DIM] = std::array::from_fn(|i| {
            let mut acc = Jet::constant(n, 0.0);
            for (j, a) in aw.iter().enumerate() {
                acc += self.ginv[i][j] * *a;
            }
            acc
        });
        let div = self.divergence(&v);
        bilap + div * sign.factor()
    }

    /// Q-curvature jet, four orders below `g`.
    pub fn q_curvature(&self) -> Jet {
        let ric = self.ricci();
        let r = self.scalar(&ric);
        let lap_r = self.laplacian(&r);
        let n = lap_r.order();
        let mut ric_sq = Jet::constant(n, 0.0);
        for a in 0..DIM {
            for b in 0..DIM {
                for c in 0..DIM {
                    for d in 0..DIM {
                        ric_sq += (self.ginv[a][c] * self.ginv[b][d] * ric[a][b] * ric[c][d]).truncate(n);
                    }
                }
            }
        }
        (lap_r - r.sqr() + ric_sq * 3.0) * (-1.0 / 12.0)
    }

    /// Full Riemann tensor with lowered indices at the base point.
    pub fn riemann_value(&self) -> RiemannAtPoint {
        assert!(self.order() >= 2, "Riemann tensor needs second derivatives");
        let gm: [[[f64; DIM]; DIM]; DIM] =
            std::array::from_fn(|a| std::array::from_fn(|b| std::array::from_fn(|c| self.gamma[a][b][c].value())));
        let dgm: [[[[f64; DIM]; DIM]; DIM]; DIM] = std::array::from_fn(|c| {
            std::array::from_fn(|a| {
                std::array::from_fn(|b| std::array::from_fn(|d| self.gamma[a][b][d].deriv(c).value()))
            })
        });
        let mut up = zero_tensor();
        for a in 0..DIM {
            for b in 0..DIM {
                for c in 0..DIM {
                    for d in 0..DIM {
                        let mut v = dgm[c][a][d][b] - dgm[d][a][c][b];
                        for e in 0..DIM {
                            v += gm[a][c][e] * gm[e][d][b] - gm[a][d][e] * gm[e][c][b];
                        }
                        up[a][b][c][d] = v;
                    }
                }
            }
        }
        let g = self.metric_value();
        let mut r = zero_tensor();
        for a in 0..DIM {
            for b in 0..DIM {
                for c in 0..DIM {
                    for d in 0..DIM {
                        r[a][b][c][d] = (0..DIM).map(|e| g[a][e] * up[e][b][c][d]).sum();
                    }
                }
            }
        }
        RiemannAtPoint::new(r, g)
    }
}

/// Riemann tensor at a point with lowered indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannAtPoint {
    pub r: Tensor4,
    pub g: Matrix,
    pub ginv: Matrix,
}

impl RiemannAtPoint {
    pub fn new(r: Tensor4, g: Matrix) -> Self {
        let m = Matrix4::from_fn(|i, j| g[i][j]);
        let inv = m.try_inverse().unwrap_or_else(Matrix4::zeros);
        RiemannAtPoint {
            r,
            g,
            ginv: std::array::from_fn(|i| std::array::from_fn(|j| inv[(i, j)])),
        }
    }

    pub fn ricci(&self) -> Matrix {
        std::array::from_fn(|b| {
            std::array::from_fn(|d| {
                let mut s = 0.0;
                for a in 0..DIM {
                    for c in 0..DIM {
                        s += self.ginv[a][c] * self.r[a][b][c][d];
                    }
                }
                s
            })
        })
    }

    pub fn scalar(&self) -> f64 {
        let ric = self.ricci();
        (0..DIM).flat_map(|a| (0..DIM).map(move |b| (a, b))).map(|(a, b)| self.ginv[a][b] * ric[a][b]).sum()
    }

    pub fn ricci_norm_sq(&self) -> f64 {
        let ric = self.ricci();
        let up = raise2(&ric, &self.ginv);
        (0..DIM).flat_map(|a| (0..DIM).map(move |b| (a, b))).map(|(a, b)| ric[a][b] * up[a][b]).sum()
    }

    /// Largest violation among antisymmetry, pair symmetry and first Bianchi.
    pub fn symmetry_defect(&self) -> f64 {
        tensor_symmetry_defect(&self.r)
    }
}

/// Largest violation of the algebraic curvature-tensor symmetries.
pub fn tensor_symmetry_defect(r: &Tensor4) -> f64 {
    let mut m: f64 = 0.0;
    for a in 0..DIM {
        for b in 0..DIM {
            for c in 0..DIM {
                for d in 0..DIM {
                    let v = r[a][b][c][d];
                    m = m.max((v + r[b][a][c][d]).abs());
                    m = m.max((v + r[a][b][d][c]).abs());
                    m = m.max((v - r[c][d][a][b]).abs());
                    m = m.max((v + r[a][c][d][b] + r[a][d][b][c]).abs());
                }
            }
        }
    }
    m
}

fn raise2(t: &Matrix, ginv: &Matrix) -> Matrix {
    std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            let mut s = 0.0;
            for c in 0..DIM {
                for d in 0..DIM {
                    s += ginv[a][c] * ginv[b][d] * t[c][d];
                }
            }
            s
        })
    })
}

/// Raise all four indices with `ginv`.
pub fn raise4(t: &Tensor4, ginv: &Matrix) -> Tensor4 {
    let mut cur = *t;
    for slot in 0..4 {
        let mut next = zero_tensor();
        for a in 0..DIM {
            for b in 0..DIM {
                for c in 0..DIM {
                    for d in 0..DIM {
                        let idx = [a, b, c, d];
                        let mut s = 0.0;
                        for e in 0..DIM {
                            let mut j = idx;
                            j[slot] = e;
                            s += ginv[idx[slot]][e] * cur[j[0]][j[1]][j[2]][j[3]];
                        }
                        next[a][b][c][d] = s;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// Riemann tensor of `g` at `x`.
pub fn riemann_of_metric(g: &dyn MetricField, x: &Point) -> Result<RiemannAtPoint, GeomError> {
    Ok(LocalGeometry::at(g, x, 2)?.riemann_value())
}

/// Weyl tensor from the Riemann tensor and the metric at the same point.
pub fn weyl_tensor(riem: &RiemannAtPoint, g_at_x: &Matrix) -> Result<Tensor4, GeomError> {
    let scale = riem.r.iter().flatten().flatten().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    let defect = riem.symmetry_defect();
    if defect > 1e-10 * scale {
        return Err(GeomError::InvariantViolation(format!("symmetry defect {defect:e}")));
    }
    let base = RiemannAtPoint::new(riem.r, *g_at_x);
    let ric = base.ricci();
    let s = base.scalar();
    let g = g_at_x;
    let mut w = zero_tensor();
    for i in 0..DIM {
        for j in 0..DIM {
            for k in 0..DIM {
                for l in 0..DIM {
                    w[i][j][k][l] = riem.r[i][j][k][l]
                        - 0.5 * (g[i][k] * ric[j][l] - g[i][l] * ric[j][k] + g[j][l] * ric[i][k] - g[j][k] * ric[i][l])
                        + s / 6.0 * (g[i][k] * g[j][l] - g[i][l] * g[j][k]);
                }
            }
        }
    }
    Ok(w)
}

/// Largest single contraction of a 4-tensor with the inverse metric.
pub fn trace_defect(w: &Tensor4, ginv: &Matrix) -> f64 {
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let mut m: f64 = 0.0;
    for &(p, q) in &pairs {
        for x in 0..DIM {
            for y in 0..DIM {
                let mut s = 0.0;
                for a in 0..DIM {
                    for b in 0..DIM {
                        let mut idx = [0; 4];
                        idx[p] = a;
                        idx[q] = b;
                        let free: Vec<usize> = (0..4).filter(|t| *t != p && *t != q).collect();
                        idx[free[0]] = x;
                        idx[free[1]] = y;
                        s += ginv[a][b] * w[idx[0]][idx[1]][idx[2]][idx[3]];
                    }
                }
                m = m.max(s.abs());
            }
        }
    }
    m
}

/// `W_{ijkl} W^{ijkl}`.
pub fn norm_sq(w: &Tensor4, ginv: &Matrix) -> f64 {
    let up = raise4(w, ginv);
    let mut s = 0.0;
    for a in 0..DIM {
        for b in 0..DIM {
            for c in 0..DIM {
                for d in 0..DIM {
                    s += w[a][b][c][d] * up[a][b][c][d];
                }
            }
        }
    }
    s
}

/// Q-curvature of `g` at `x`.
pub fn q_curvature(g: &dyn MetricField, x: &Point) -> Result<f64, GeomError> {
    Ok(LocalGeometry::at(g, x, 4)?.q_curvature().value())
}

/// Laplace–Beltrami operator of `u` at `x`.
pub fn laplace_beltrami(g: &dyn MetricField, u: &dyn ScalarField, x: &Point) -> Result<f64, GeomError> {
    let geo = LocalGeometry::at(g, x, 2)?;
    let uj = u.jet(x, 2)?;
    Ok(geo.laplacian(&uj).value())
}

/// Paneitz operator `P_g u` at `x`.
pub fn paneitz_apply(g: &dyn MetricField, u: &dyn ScalarField, x: &Point) -> Result<f64, GeomError> {
    paneitz_apply_with_sign(g, u, x, CurvatureTermSign::Minus)
}

pub fn paneitz_apply_with_sign(
    g: &dyn MetricField,
    u: &dyn ScalarField,
    x: &Point,
    sign: CurvatureTermSign,
) -> Result<f64, GeomError> {
    let geo = LocalGeometry::at(g, x, 3)?;
    let uj = u.jet(x, 4)?;
    Ok(geo.paneitz(&uj, sign).value())
}

/// The metric `e^{2u} g`.
#[derive(Clone)]
pub struct ConformalMetric {
    g: Arc<dyn MetricField>,
    u: Arc<dyn ScalarField>,
}

impl std::fmt::Debug for ConformalMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConformalMetric").field("domain", &self.domain()).finish()
    }
}

impl MetricField for ConformalMetric {
    fn domain(&self) -> BoxDomain {
        self.g.domain().intersect(&self.u.domain())
    }
    fn source(&self) -> DerivativeSource {
        self.g.source().combine(self.u.source())
    }
    fn jet(&self, x: &Point, order: usize) -> Result<MetricJet, FieldError> {
        let g = self.g.jet(x, order)?;
        let w = (self.u.jet(x, order)? * 2.0).exp();
        Ok(std::array::from_fn(|a| std::array::from_fn(|b| g[a][b] * w)))
    }
}

pub fn conformal_transform(g: Arc<dyn MetricField>, u: Arc<dyn ScalarField>) -> ConformalMetric {
    ConformalMetric { g, u }
}

/// Pointwise deviations of an identity checked at sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub max_deviation: f64,
    pub deviations: Vec<f64>,
    /// Largest magnitude of either side, for relative comparisons.
    pub scale: f64,
    pub source: DerivativeSource,
}

impl DeviationReport {
    fn from_pairs(pairs: Vec<(f64, f64)>, source: DerivativeSource) -> Self {
        let deviations: Vec<f64> = pairs.iter().map(|(a, b)| (a - b).abs()).collect();
        DeviationReport {
            max_deviation: deviations.iter().copied().fold(0.0, f64::max),
            scale: pairs.iter().fold(0.0f64, |m, (a, b)| m.max(a.abs()).max(b.abs())),
            deviations,
            source,
        }
    }
}

/// Compare `P_{e^{2u} g} f` against `e^{-4u} P_g f`.
pub fn check_conformal_covariance(
    g: Arc<dyn MetricField>,
    u: Arc<dyn ScalarField>,
    f: Arc<dyn ScalarField>,
    points: &[Point],
) -> Result<DeviationReport, GeomError> {
    check_conformal_covariance_with_sign(g, u, f, points, CurvatureTermSign::Minus)
}

pub fn check_conformal_covariance_with_sign(
    g: Arc<dyn MetricField>,
    u: Arc<dyn ScalarField>,
    f: Arc<dyn ScalarField>,
    points: &[Point],
    sign: CurvatureTermSign,
) -> Result<DeviationReport, GeomError> {
    let gt = conformal_transform(g.clone(), u.clone());
    covariance_report(&gt, g.as_ref(), u.as_ref(), f.as_ref(), points, sign)
}

fn covariance_report(
    gt: &dyn MetricField,
    g: &dyn MetricField,
    u: &dyn ScalarField,
    f: &dyn ScalarField,
    points: &[Point],
    sign: CurvatureTermSign,
) -> Result<DeviationReport, GeomError> {
    let source = gt.source().combine(f.source()).combine(g.source());
    let mut pairs = Vec::with_capacity(points.len());
    for x in points {
        let lhs = paneitz_apply_with_sign(gt, f, x, sign)?;
        let rhs = (-4.0 * u.value(x)?).exp() * paneitz_apply_with_sign(g, f, x, sign)?;
        pairs.push((lhs, rhs));
    }
    Ok(DeviationReport::from_pairs(pairs, source))
}

/// Covariance deviations of finite-difference samplings of the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub steps: Vec<f64>,
    pub deviations: Vec<f64>,
    /// Fitted exponent `p` in `deviation ≈ C h^p`.
    pub fitted_order: f64,
}

/// Sample `e^{2u} g` and `f` with each step, compare `P_{e^{2u} g} f`
/// against `e^{-4u} P_g f` from the unsampled inputs and fit the convergence
/// order of the deviation.
pub fn covariance_refinement(
    g: Arc<dyn MetricField>,
    u: Arc<dyn ScalarField>,
    f: Arc<dyn ScalarField>,
    points: &[Point],
    steps: &[f64],
) -> Result<RefinementStudy, GeomError> {
    let gt: Arc<dyn MetricField> = Arc::new(conformal_transform(g.clone(), u.clone()));
    let mut deviations = Vec::with_capacity(steps.len());
    for &h in steps {
        let gts = SampledMetric::from_field(gt.clone(), h);
        let fs = SampledScalar::from_field(f.clone(), h);
        let mut worst: f64 = 0.0;
        for x in points {
            let lhs = paneitz_apply(&gts, &fs, x)?;
            let rhs = (-4.0 * u.value(x)?).exp() * paneitz_apply(g.as_ref(), f.as_ref(), x)?;
            worst = worst.max((lhs - rhs).abs());
        }
        deviations.push(worst);
    }
    let fitted_order = loglog_fit(steps, &deviations).slope;
    Ok(RefinementStudy {
        steps: steps.to_vec(),
        deviations,
        fitted_order,
    })
}

/// Compare `P_g u + 2 Q_g` against `2 Q_{e^{2u} g} e^{4u}`.
pub fn check_q_transformation(
    g: Arc<dyn MetricField>,
    u: Arc<dyn ScalarField>,
    points: &[Point],
) -> Result<DeviationReport, GeomError> {
    let gt = conformal_transform(g.clone(), u.clone());
    let source = gt.source();
    let mut pairs = Vec::with_capacity(points.len());
    for x in points {
        let geo = LocalGeometry::at(g.as_ref(), x, 4)?;
        let uj = u.jet(x, 4)?;
        let lhs = geo.paneitz(&uj, CurvatureTermSign::Minus).value() + 2.0 * geo.q_curvature().value();
        let rhs = 2.0 * q_curvature(&gt, x)? * (4.0 * uj.value()).exp();
        pairs.push((lhs, rhs));
    }
    Ok(DeviationReport::from_pairs(pairs, source))
}

/// Function of the ambient coordinates of S^4 ⊂ R^5.
pub type AmbientFn = Arc<dyn Fn(&[Jet; 5]) -> Jet + Send + Sync>;

/// Quadrature resolution of the two-chart sphere model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereResolution {
    pub radial: usize,
    pub polar: usize,
    pub azimuthal: usize,
}

impl Default for SphereResolution {
    fn default() -> Self {
        SphereResolution {
            radial: 8,
            polar: 6,
            azimuthal: 8,
        }
    }
}

#[derive(Clone)]
pub enum GaussBonnetModel {
    /// Unit round S^4, optionally conformally rescaled by `e^{2u}`.
    RoundSphere {
        perturbation: Option<AmbientFn>,
        resolution: SphereResolution,
    },
    /// Flat torus of the given side length.
    FlatTorus { side: f64, samples: usize },
}

impl std::fmt::Debug for GaussBonnetModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GaussBonnetModel::RoundSphere {
                perturbation,
                resolution,
            } => f
                .debug_struct("RoundSphere")
                .field("perturbed", &perturbation.is_some())
                .field("resolution", resolution)
                .finish(),
            GaussBonnetModel::FlatTorus { side, samples } => f
                .debug_struct("FlatTorus")
                .field("side", side)
                .field("samples", samples)
                .finish(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussBonnetReport {
    /// `∫ (Q + |W|²/8) dV`.
    pub value: f64,
    /// Volume of the reference metric computed by the same rule.
    pub reference_volume: f64,
    pub expected_volume: f64,
    pub points: usize,
}

/// Stereographic chart of the unit S^4 covering the north (`pole = 1`) or
/// south (`pole = -1`) hemisphere with the unit ball.
pub fn sphere_chart_metric(pole: f64, perturbation: Option<AmbientFn>) -> crate::field::AnalyticMetric {
    crate::field::AnalyticMetric::conformally_flat(BoxDomain::cube([0.0; DIM], 1.0), move |x| {
        let n = x[0].order();
        let r2 = x.iter().fold(Jet::constant(n, 0.0), |a, xi| a + xi.sqr());
        let inv = (r2 + 1.0).recip();
        let mut w = inv.sqr() * 4.0;
        if let Some(u) = &perturbation {
            let amb: [Jet; 5] = std::array::from_fn(|k| {
                if k < DIM {
                    x[k] * inv * 2.0
                } else {
                    (1.0 - r2) * inv * pole
                }
            });
            w *= (u(&amb) * 2.0).exp();
        }
        w
    })
}

pub fn gauss_bonnet_check(model: &GaussBonnetModel) -> Result<GaussBonnetReport, GeomError> {
    match model {
        GaussBonnetModel::FlatTorus { side, samples } => {
            let n = (*samples).max(1);
            let dom = BoxDomain::cube([0.0; DIM], *side);
            let g = crate::field::AnalyticMetric::euclidean(dom);
            let h = side / n as f64;
            let mut total = 0.0;
            let mut count = 0;
            for i in 0..n {
                for j in 0..n {
                    let x = [i as f64 * h, j as f64 * h, 0.0, 0.0];
                    let geo = LocalGeometry::at(&g, &x, 4)?;
                    let w = weyl_tensor(&geo.riemann_value(), &geo.metric_value())?;
                    let dens = geo.q_curvature().value() + norm_sq(&w, &geo.inverse_value()) / 8.0;
                    total += dens * geo.sqrt_det.value();
                    count += 1;
                }
            }
            let vol = side.powi(4);
            Ok(GaussBonnetReport {
                value: total / count as f64 * vol,
                reference_volume: vol,
                expected_volume: vol,
                points: count,
            })
        }
        GaussBonnetModel::RoundSphere {
            perturbation,
            resolution,
        } => {
            let radial = Rule1D::gauss_legendre(resolution.radial, 0.0, 1.0);
            let sphere = S3Rule::new(resolution.polar, resolution.azimuthal);
            let rule = PolarRule::new([0.0; DIM], &radial, &sphere);
            let expected = 8.0 * PI * PI / 3.0;
            let reference: f64 = 2.0
                * rule.integrate(|p| {
                    let r2: f64 = p.iter().map(|v| v * v).sum();
                    16.0 / (1.0 + r2).powi(4)
                });
            if (reference - expected).abs() > 0.01 * expected {
                return Err(GeomError::QuadratureDivergence {
                    got: reference,
                    expected,
                });
            }
            let mut value = 0.0;
            for pole in [1.0, -1.0] {
                let g = sphere_chart_metric(pole, perturbation.clone());
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    let geo = LocalGeometry::at(&g, p, 4)?;
                    let weyl = weyl_tensor(&geo.riemann_value(), &geo.metric_value())?;
                    let dens = geo.q_curvature().value() + norm_sq(&weyl, &geo.inverse_value()) / 8.0;
                    value += w * dens * geo.sqrt_det.value();
                }
            }
            Ok(GaussBonnetReport {
                value,
                reference_volume: reference,
                expected_volume: expected,
                points: 2 * rule.points.len(),
            })
        }
    }
}

/// Volume of a coordinate box under `g` by tensor Gauss–Legendre quadrature.
pub fn box_volume(g: &dyn MetricField, lo: &Point, hi: &Point, nodes: usize) -> Result<f64, GeomError> {
    let rules: Vec<Rule1D> = (0..DIM).map(|d| Rule1D::gauss_legendre(nodes, lo[d], hi[d])).collect();
    let mut total = 0.0;
    for (x0, w0) in rules[0].iter() {
        for (x1, w1) in rules[1].iter() {
            for (x2, w2) in rules[2].iter() {
                for (x3, w3) in rules[3].iter() {
                    let m = g.value(&[x0, x1, x2, x3])?;
                    let det = Matrix4::from_fn(|i, j| m[i][j]).determinant();
                    total += w0 * w1 * w2 * w3 * det.max(0.0).sqrt();
                }
            }
        }
    }
    Ok(total)
}
