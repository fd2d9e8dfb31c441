//! Geodesic distances in a chart by path-energy minimization, and the
//! comparison of blow-up distances with Euclidean ones.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cnc::{q_to_f64, CurvatureJet};
use crate::field::{BoxDomain, DerivativeSource, FieldError, MetricField, MetricJet, Point};
use crate::jet::Jet;
use nalgebra::{Matrix4, Vector4};
use crate::stats::loglog_fit;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeodesicError {
    #[error("path optimization stopped after {iterations} iterations with gradient norm {gradient:e}")]
    NonConvergence { iterations: usize, gradient: f64 },
    #[error("path left the metric domain at {0:?}")]
    DomainExit(Point),
    #[error("metric is not positive definite at {0:?}")]
    NotPositiveDefinite(Point),
    #[error("need at least 2 segments, got {0}")]
    TooFewSegments(usize),
    #[error("pair outside the regime |z| < |y|/2 (|y| = {y}, |z| = {z})")]
    PairOutsideRegime { y: f64, z: f64 },
    #[error("derivative order must be 1, 2 or 3, got {0}")]
    BadOrder(usize),
    #[error(transparent)]
    Field(FieldError),
}

impl From<FieldError> for GeodesicError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::OutsideDomain { point, .. } => GeodesicError::DomainExit(point),
            other => GeodesicError::Field(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeodesicOptions {
    pub segments: usize,
    /// Stop when the energy gradient norm falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions {
            segments: 64,
            tolerance: 1e-10,
            max_iterations: 20_000,
        }
    }
}

fn sub(a: &Point, b: &Point) -> Point {
    std::array::from_fn(|i| a[i] - b[i])
}

fn norm(a: &Point) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn quad(g: &[[f64; 4]; 4], v: &Point) -> f64 {
    (0..4).map(|i| v[i] * (0..4).map(|j| g[i][j] * v[j]).sum::<f64>()).sum()
}

/// Polyline in chart coordinates with fixed endpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathPolyline {
    pub nodes: Vec<Point>,
}

struct Segment {
    g: [[f64; 4]; 4],
    dg: [[[f64; 4]; 4]; 4],
    ddg: [[[[f64; 4]; 4]; 4]; 4],
}

impl PathPolyline {
    pub fn straight(y: &Point, z: &Point, segments: usize) -> Self {
        let nodes = (0..=segments)
            .map(|k| {
                let t = k as f64 / segments as f64;
                std::array::from_fn(|i| y[i] + t * (z[i] - y[i]))
            })
            .collect();
        PathPolyline { nodes }
    }

    pub fn segments(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Twice as many segments along the same polyline.
    pub fn subdivided(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(std::array::from_fn(|i| 0.5 * (w[0][i] + w[1][i])));
        }
        nodes.push(*self.nodes.last().expect("nonempty path"));
        PathPolyline { nodes }
    }

    fn midpoint(&self, k: usize) -> Point {
        std::array::from_fn(|i| 0.5 * (self.nodes[k][i] + self.nodes[k + 1][i]))
    }

    /// `n Σ Δ_kᵀ g(m_k) Δ_k`, which equals the squared length for a
    /// constant-speed path.
    pub fn energy(&self, g: &dyn MetricField) -> Result<f64, GeodesicError> {
        let n = self.segments() as f64;
        let mut e = 0.0;
        for k in 0..self.segments() {
            let gv = g.value(&self.midpoint(k))?;
            e += quad(&gv, &sub(&self.nodes[k + 1], &self.nodes[k]));
        }
        Ok(n * e)
    }

    /// Midpoint-rule length `Σ √(Δ_kᵀ g(m_k) Δ_k)`.
    pub fn length(&self, g: &dyn MetricField) -> Result<f64, GeodesicError> {
        Ok(self.length_excess(g)? + self.euclidean_length())
    }

    pub fn euclidean_length(&self) -> f64 {
        self.nodes.windows(2).map(|w| norm(&sub(&w[1], &w[0]))).sum()
    }

    /// `length − euclidean_length`, formed without cancellation.
    fn length_excess(&self, g: &dyn MetricField) -> Result<f64, GeodesicError> {
        let mut acc = 0.0;
        for k in 0..self.segments() {
            let m = self.midpoint(k);
            let gv = g.value(&m)?;
            let d = sub(&self.nodes[k + 1], &self.nodes[k]);
            let mut pert = gv;
            for (i, row) in pert.iter_mut().enumerate() {
                row[i] -= 1.0;
            }
            let a = quad(&gv, &d);
            if !(a > 0.0) && norm(&d) > 0.0 {
                return Err(GeodesicError::NotPositiveDefinite(m));
            }
            let e = norm(&d);
            if e > 0.0 {
                acc += quad(&pert, &d) / (a.sqrt() + e);
            }
        }
        Ok(acc)
    }

    /// Excess of the Euclidean polyline length over the chord.
    fn chord_excess(&self) -> f64 {
        let first = self.nodes[0];
        let last = *self.nodes.last().expect("nonempty path");
        let chord = sub(&last, &first);
        let c = norm(&chord);
        if c == 0.0 {
            return self.euclidean_length();
        }
        let e: Point = chord.map(|v| v / c);
        self.nodes
            .windows(2)
            .map(|w| {
                let d = sub(&w[1], &w[0]);
                let along: f64 = (0..4).map(|i| d[i] * e[i]).sum();
                let perp: Point = std::array::from_fn(|i| d[i] - along * e[i]);
                let p2: f64 = perp.iter().map(|v| v * v).sum();
                if p2 == 0.0 {
                    0.0
                } else {
                    p2 / (norm(&d) + along)
                }
            })
            .sum()
    }

    fn segment_data(&self, g: &dyn MetricField) -> Result<Vec<Segment>, GeodesicError> {
        (0..self.segments())
            .map(|k| {
                let j = g.jet(&self.midpoint(k), 2)?;
                let h: [[[[f64; 4]; 4]; 4]; 4] = std::array::from_fn(|a| std::array::from_fn(|b| j[a][b].hessian()));
                Ok(Segment {
                    g: std::array::from_fn(|a| std::array::from_fn(|b| j[a][b].value())),
                    dg: std::array::from_fn(|c| std::array::from_fn(|a| std::array::from_fn(|b| j[a][b].gradient()[c]))),
                    ddg: std::array::from_fn(|c| std::array::from_fn(|e| std::array::from_fn(|a| std::array::from_fn(|b| h[a][b][c][e])))),
                })
            })
            .collect()
    }

    /// Block-tridiagonal energy Hessian: diagonal blocks and the blocks
    /// coupling node `k+1` to node `k`.
    fn hessian(&self, segs: &[Segment]) -> (Vec<Matrix4<f64>>, Vec<Matrix4<f64>>) {
        let n = self.segments();
        let nf = n as f64;
        let mut diag = vec![Matrix4::zeros(); n - 1];
        let mut lower = vec![Matrix4::zeros(); n.saturating_sub(2)];
        for (k, s) in segs.iter().enumerate() {
            let d = sub(&self.nodes[k + 1], &self.nodes[k]);
            let gm = Matrix4::from_fn(|i, j| s.g[i][j]);
            let c = Matrix4::from_fn(|i, j| (0..4).map(|l| s.dg[j][i][l] * d[l]).sum::<f64>());
            let q = Matrix4::from_fn(|i, j| 0.25 * quad(&s.ddg[i][j], &d));
            if k + 1 < n {
                diag[k] += (gm * 2.0 + c + c.transpose() + q) * nf;
            }
            if k > 0 {
                diag[k - 1] += (gm * 2.0 - c - c.transpose() + q) * nf;
            }
            if k > 0 && k + 1 < n {
                lower[k - 1] += (gm * -2.0 + c - c.transpose() + q) * nf;
            }
        }
        (diag, lower)
    }

    /// Energy gradient with respect to the interior nodes.
    fn gradient(&self, segs: &[Segment]) -> Vec<Point> {
        let n = self.segments();
        let nf = n as f64;
        let mut grad = vec![[0.0; 4]; n - 1];
        for (k, s) in segs.iter().enumerate() {
            let d = sub(&self.nodes[k + 1], &self.nodes[k]);
            let gd: Point = std::array::from_fn(|i| (0..4).map(|j| s.g[i][j] * d[j]).sum());
            let half_dg: Point = std::array::from_fn(|c| 0.5 * quad(&s.dg[c], &d));
            // node k+1 enters with +Δ, node k with −Δ; the midpoint moves by half of either.
            if k + 1 < n {
                for i in 0..4 {
                    grad[k][i] += nf * (2.0 * gd[i] + half_dg[i]);
                }
            }
            if k > 0 {
                for i in 0..4 {
                    grad[k - 1][i] += nf * (-2.0 * gd[i] + half_dg[i]);
                }
            }
        }
        grad
    }
}

/// Solve `2n T x = r` for the tridiagonal `T = tridiag(−1, 2, −1)` in each
/// component.
fn precondition(r: &[Point], n: usize) -> Vec<Point> {
    let m = r.len();
    let scale = 2.0 * n as f64;
    let mut c = vec![0.0; m];
    let mut d = vec![[0.0; 4]; m];
    for k in 0..m {
        let denom = 2.0 + if k > 0 { c[k - 1] } else { 0.0 };
        c[k] = -1.0 / denom;
        for i in 0..4 {
            let prev = if k > 0 { d[k - 1][i] } else { 0.0 };
            d[k][i] = (r[k][i] / scale + prev) / denom;
        }
    }
    for k in (0..m.saturating_sub(1)).rev() {
        for i in 0..4 {
            d[k][i] -= c[k] * d[k + 1][i];
        }
    }
    d
}

/// Block Thomas solve of the symmetric block-tridiagonal system.
fn block_solve(diag: &[Matrix4<f64>], lower: &[Matrix4<f64>], r: &[Point]) -> Option<Vec<Point>> {
    let m = diag.len();
    let mut inv = Vec::with_capacity(m);
    let mut rhs: Vec<Vector4<f64>> = r.iter().map(|v| Vector4::from_column_slice(v)).collect();
    let mut piv = diag[0];
    for k in 0..m {
        if k > 0 {
            let mult = lower[k - 1] * inv[k - 1];
            piv = diag[k] - mult * lower[k - 1].transpose();
            let prev = rhs[k - 1];
            rhs[k] -= mult * prev;
        }
        inv.push(piv.try_inverse()?);
    }
    let mut x = vec![Vector4::zeros(); m];
    for k in (0..m).rev() {
        let mut b = rhs[k];
        if k + 1 < m {
            b -= lower[k].transpose() * x[k + 1];
        }
        x[k] = inv[k] * b;
    }
    let out: Vec<Point> = x.iter().map(|v| [v[0], v[1], v[2], v[3]]).collect();
    out.iter().flatten().all(|v| v.is_finite()).then_some(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicResult {
    /// Richardson combination of the `n`- and `2n`-segment lengths.
    pub distance: f64,
    pub coarse_length: f64,
    pub fine_length: f64,
    /// `g`-length of the straight segment.
    pub straight_length: f64,
    pub euclidean: f64,
    /// `distance/euclidean − 1`, formed without cancellation.
    pub relative_excess: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

fn minimize(g: &dyn MetricField, mut path: PathPolyline, opts: &GeodesicOptions) -> Result<(PathPolyline, usize, f64), GeodesicError> {
    let n = path.segments();
    let mut energy = path.energy(g)?;
    let mut grad_norm = f64::INFINITY;
    for it in 0..opts.max_iterations {
        let segs = path.segment_data(g)?;
        let grad = path.gradient(&segs);
        grad_norm = grad.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        if grad_norm < opts.tolerance {
            return Ok((path, it, grad_norm));
        }
        let (diag, lower) = path.hessian(&segs);
        let dot = |d: &[Point]| -> f64 { grad.iter().flatten().zip(d.iter().flatten()).map(|(a, b)| a * b).sum() };
        let dir = match block_solve(&diag, &lower, &grad) {
            Some(d) if dot(&d) > 0.0 => d,
            _ => precondition(&grad, n),
        };
        let slope = dot(&dir);
        // Below this the energy decrease is lost in rounding; take the full step.
        let trust = slope <= 1e-12 * energy.abs().max(1.0);
        let mut step = 1.0;
        loop {
            let mut trial = path.clone();
            for (k, d) in dir.iter().enumerate() {
                for i in 0..4 {
                    trial.nodes[k + 1][i] -= step * d[i];
                }
            }
            if trust {
                energy = trial.energy(g)?;
                path = trial;
                break;
            }
            match trial.energy(g) {
                Ok(e) if e <= energy - 1e-4 * step * slope => {
                    path = trial;
                    energy = e;
                    break;
                }
                Ok(_) | Err(GeodesicError::DomainExit(_)) if step > 1e-12 => step *= 0.5,
                Ok(_) => return Ok((path, it, grad_norm)),
                Err(e) => return Err(e),
            }
        }
    }
    Err(GeodesicError::NonConvergence {
        iterations: opts.max_iterations,
        gradient: grad_norm,
    })
}

/// Length of the energy-minimizing polyline from `y` to `z`.
pub fn geodesic_distance(g: &dyn MetricField, y: &Point, z: &Point, opts: &GeodesicOptions) -> Result<GeodesicResult, GeodesicError> {
    if opts.segments < 2 {
        return Err(GeodesicError::TooFewSegments(opts.segments));
    }
    let euclidean = norm(&sub(z, y));
    let straight = PathPolyline::straight(y, z, opts.segments);
    let straight_length = straight.length(g)?;
    let (coarse, it1, _) = minimize(g, straight, opts)?;
    let (fine, it2, grad) = minimize(g, coarse.subdivided(), opts)?;
    let excess = |p: &PathPolyline| -> Result<f64, GeodesicError> { Ok(p.length_excess(g)? + p.chord_excess()) };
    let (ec, ef) = (excess(&coarse)?, excess(&fine)?);
    let combined = (4.0 * ef - ec) / 3.0;
    Ok(GeodesicResult {
        distance: euclidean + combined,
        coarse_length: euclidean + ec,
        fine_length: euclidean + ef,
        straight_length,
        euclidean,
        relative_excess: if euclidean > 0.0 { combined / euclidean } else { 0.0 },
        iterations: it1 + it2,
        gradient_norm: grad,
    })
}

/// `δ_ij + (ε²/3) R_{pijq} z^p z^q`, the quadratic blow-up metric.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowUpMetric {
    /// `a[i][j][p][q] = (ε²/3) R_{pijq}`.
    a: [[[[f64; 4]; 4]; 4]; 4],
    pub eps: f64,
    /// Half-width of the cube on which the metric is offered.
    pub radius: f64,
    /// Whether the requested radius was reduced to keep the metric positive definite.
    pub shrunk: bool,
}

/// Minimum eigenvalue kept by [`BlowUpMetric::new`].
pub const MIN_EIGENVALUE: f64 = 0.5;

impl BlowUpMetric {
    pub fn new(jet: &CurvatureJet, eps: f64, radius: f64) -> Self {
        let c = eps * eps / 3.0;
        let a = std::array::from_fn(|i| {
            std::array::from_fn(|j| std::array::from_fn(|p| std::array::from_fn(|q| c * q_to_f64(jet.r0.get(&[p, i, j, q])))))
        });
        let mut m = BlowUpMetric {
            a,
            eps,
            radius,
            shrunk: false,
        };
        // ‖Σ a_ijpq z^p z^q‖ ≤ ‖M‖₂ |z|² with M the (ij),(pq) matrix; |z| ≤ 2·radius on the cube.
        let flat = nalgebra::DMatrix::from_fn(16, 16, |r, c| m.a[r / 4][r % 4][c / 4][c % 4]);
        let frob = flat.singular_values().max();
        let limit = ((1.0 - MIN_EIGENVALUE) / frob.max(1e-300)).sqrt() / 2.0;
        if radius > limit {
            m.radius = limit;
            m.shrunk = true;
        }
        m
    }

    pub fn flat_domain(&self) -> BoxDomain {
        BoxDomain::cube([0.0; 4], self.radius)
    }
}

impl MetricField for BlowUpMetric {
    fn domain(&self) -> BoxDomain {
        self.flat_domain()
    }

    fn source(&self) -> DerivativeSource {
        DerivativeSource::Analytic
    }

    fn jet(&self, x: &Point, order: usize) -> Result<MetricJet, FieldError> {
        if order > crate::jet::MAX_ORDER {
            return Err(FieldError::InsufficientOrder {
                needed: order,
                available: crate::jet::MAX_ORDER,
            });
        }
        self.flat_domain().check(x, 0.0)?;
        Ok(std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let a = &self.a[i][j];
                Jet::from_partials(order, |alpha| {
                    let deg: u8 = alpha.iter().sum();
                    let idx: Vec<usize> = (0..4).flat_map(|k| std::iter::repeat_n(k, alpha[k] as usize)).collect();
                    match deg {
                        0 => {
                            let q: f64 = (0..4).map(|p| (0..4).map(|s| a[p][s] * x[p] * x[s]).sum::<f64>()).sum();
                            (i == j) as u8 as f64 + q
                        }
                        1 => (0..4).map(|s| (a[idx[0]][s] + a[s][idx[0]]) * x[s]).sum(),
                        2 => a[idx[0]][idx[1]] + a[idx[1]][idx[0]],
                        _ => 0.0,
                    }
                })
            })
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceRow {
    pub eps: f64,
    pub y_norm: f64,
    pub z_norm: f64,
    pub euclid: f64,
    pub geodesic: f64,
    /// `|d/|y − z| − 1|`.
    pub ratio_gap: f64,
    /// `ratio_gap / (ε²(|y|² + |z|²))`.
    pub fitted_c: f64,
    /// Change of the ratio between the Richardson value and the `2n`-segment length.
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceSweep {
    pub rows: Vec<DistanceRow>,
    /// Largest `fitted_c` at each ε, in input order.
    pub c_by_eps: Vec<(f64, f64)>,
    /// `max |c/c̄ − 1|` over the sweep.
    pub c_spread: f64,
    /// Log-log slope of the largest gap against ε.
    pub eps_exponent: f64,
}

impl DistanceSweep {
    pub const CSV_HEADER: &'static str = "eps,y_norm,z_norm,euclid,geodesic,ratio_gap,fitted_c,error_estimate";

    pub fn is_stable(&self, band: f64) -> bool {
        self.c_spread <= band
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                r.eps, r.y_norm, r.z_norm, r.euclid, r.geodesic, r.ratio_gap, r.fitted_c, r.error_estimate
            ));
        }
        s
    }
}

fn working_radius(pairs: &[(Point, Point)]) -> f64 {
    pairs
        .iter()
        .flat_map(|(y, z)| y.iter().chain(z.iter()))
        .fold(0.0f64, |m, v| m.max(v.abs()))
        * 2.0
        + 1.0
}

/// Distance ratios `d_ğ/|y − z|` over an `(ε, pair)` grid.
pub fn distance_ratio_sweep(
    jet: &CurvatureJet,
    eps_list: &[f64],
    pairs: &[(Point, Point)],
    opts: &GeodesicOptions,
) -> Result<DistanceSweep, GeodesicError> {
    let radius = working_radius(pairs);
    let grid: Vec<(f64, &(Point, Point))> = eps_list.iter().flat_map(|&e| pairs.iter().map(move |p| (e, p))).collect();
    let rows = grid
        .par_iter()
        .map(|&(eps, (y, z))| -> Result<DistanceRow, GeodesicError> {
            let (yn, zn) = (norm(y), norm(z));
            let euclid = norm(&sub(z, y));
            // ε = 0 is the flat chart.
            let (geodesic, gap, err) = if eps == 0.0 {
                (euclid, 0.0, 0.0)
            } else {
                let res = geodesic_distance(&BlowUpMetric::new(jet, eps, radius), y, z, opts)?;
                (res.distance, res.relative_excess.abs(), (res.fine_length - res.distance).abs() / euclid)
            };
            let w = eps * eps * (yn * yn + zn * zn);
            Ok(DistanceRow {
                eps,
                y_norm: yn,
                z_norm: zn,
                euclid,
                geodesic,
                ratio_gap: gap,
                fitted_c: if w > 0.0 { gap / w } else { 0.0 },
                error_estimate: err,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let c_by_eps: Vec<(f64, f64)> = eps_list
        .iter()
        .map(|&e| (e, rows.iter().filter(|r| r.eps == e).map(|r| r.fitted_c).fold(0.0, f64::max)))
        .collect();
    let mean = c_by_eps.iter().map(|c| c.1).sum::<f64>() / c_by_eps.len().max(1) as f64;
    let c_spread = if mean > 0.0 {
        c_by_eps.iter().map(|c| (c.1 / mean - 1.0).abs()).fold(0.0, f64::max)
    } else {
        0.0
    };
    let (es, gaps): (Vec<f64>, Vec<f64>) = eps_list
        .iter()
        .filter(|&&e| e > 0.0)
        .map(|&e| (e, rows.iter().filter(|r| r.eps == e).map(|r| r.ratio_gap).fold(0.0, f64::max)))
        .unzip();
    let eps_exponent = if es.len() >= 2 { loglog_fit(&es, &gaps).slope } else { f64::NAN };
    Ok(DistanceSweep {
        rows,
        c_by_eps,
        c_spread,
        eps_exponent,
    })
}

/// A directional derivative of `log|y − z| − log d_ğ(y, z)` in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeGap {
    pub order: usize,
    pub value: f64,
    /// The same difference quotient with twice the step.
    pub wide_value: f64,
    pub step: f64,
    /// The two steps agree to 10% (or to solver noise).
    pub consistent: bool,
}

/// `f(y) = log|y − z| − log d_ğ(y, z) = −log(1 + relative_excess)`.
fn log_gap(g: &BlowUpMetric, y: &Point, z: &Point, opts: &GeodesicOptions) -> Result<f64, GeodesicError> {
    if g.eps == 0.0 {
        return Ok(0.0);
    }
    Ok(-geodesic_distance(g, y, z, opts)?.relative_excess.ln_1p())
}

/// `d^j/dt^j f(y + t ŷ)` at `t = 0` by central differences over full
/// re-solves with step `10⁻³|y|`.
pub fn log_distance_derivative_gap(
    jet: &CurvatureJet,
    eps: f64,
    y: &Point,
    z: &Point,
    order: usize,
    opts: &GeodesicOptions,
) -> Result<DerivativeGap, GeodesicError> {
    if !(1..=3).contains(&order) {
        return Err(GeodesicError::BadOrder(order));
    }
    let (yn, zn) = (norm(y), norm(z));
    if !(zn < 0.5 * yn) {
        return Err(GeodesicError::PairOutsideRegime { y: yn, z: zn });
    }
    let g = BlowUpMetric::new(jet, eps, working_radius(&[(*y, *z)]));
    let dir: Point = y.map(|v| v / yn);
    let f = |t: f64| log_gap(&g, &std::array::from_fn(|i| y[i] + t * dir[i]), z, opts);
    let quotient = |h: f64| -> Result<f64, GeodesicError> {
        Ok(match order {
            1 => (f(h)? - f(-h)?) / (2.0 * h),
            2 => (f(h)? - 2.0 * f(0.0)? + f(-h)?) / (h * h),
            _ => (f(2.0 * h)? - 2.0 * f(h)? + 2.0 * f(-h)? - f(-2.0 * h)?) / (2.0 * h * h * h),
        })
    };
    let step = 1e-3 * yn;
    let value = quotient(step)?;
    let wide_value = quotient(2.0 * step)?;
    let noise = 1e-14 / step.powi(order as i32);
    let consistent = (value - wide_value).abs() <= 0.1 * value.abs().max(wide_value.abs()) + noise;
    Ok(DerivativeGap {
        order,
        value,
        wide_value,
        step,
        consistent,
    })
}
