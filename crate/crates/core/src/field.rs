//! Metric and scalar fields on coordinate boxes in R^4.
//!
//! Fields either provide exact Taylor jets (analytic) or are sampled and
//! differentiated with fourth-order centered finite differences.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::jet::{multi_indices, Jet, MultiIndex, DIM, MAX_ORDER};

pub type Point = [f64; DIM];

/// Matrix of jets, one per metric component.
pub type MetricJet = [[Jet; DIM]; DIM];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("point {point:?} lies outside the field domain (required margin {margin})")]
    OutsideDomain { point: Point, margin: f64 },
    #[error("derivative order {needed} requested, at most {available} available")]
    InsufficientOrder { needed: usize, available: usize },
    #[error("metric sample is not symmetric at {point:?} (defect {defect:e})")]
    AsymmetricMetric { point: Point, defect: f64 },
    #[error("non-finite field value at {point:?}")]
    NonFinite { point: Point },
}

/// Axis-aligned coordinate box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    pub lo: Point,
    pub hi: Point,
}

impl BoxDomain {
    pub fn new(lo: Point, hi: Point) -> Self {
        BoxDomain { lo, hi }
    }

    pub fn cube(center: Point, half: f64) -> Self {
        BoxDomain {
            lo: std::array::from_fn(|i| center[i] - half),
            hi: std::array::from_fn(|i| center[i] + half),
        }
    }

    /// The whole of R^4.
    pub fn everywhere() -> Self {
        BoxDomain {
            lo: [f64::NEG_INFINITY; DIM],
            hi: [f64::INFINITY; DIM],
        }
    }

    pub fn min_width(&self) -> f64 {
        (0..DIM).map(|i| self.hi[i] - self.lo[i]).fold(f64::INFINITY, f64::min)
    }

    pub fn contains_with_margin(&self, x: &Point, margin: f64) -> bool {
        (0..DIM).all(|i| x[i] >= self.lo[i] + margin && x[i] <= self.hi[i] - margin)
    }

    pub fn check(&self, x: &Point, margin: f64) -> Result<(), FieldError> {
        if self.contains_with_margin(x, margin) {
            Ok(())
        } else {
            Err(FieldError::OutsideDomain { point: *x, margin })
        }
    }

    pub fn intersect(&self, other: &BoxDomain) -> BoxDomain {
        BoxDomain {
            lo: std::array::from_fn(|i| self.lo[i].max(other.lo[i])),
            hi: std::array::from_fn(|i| self.hi[i].min(other.hi[i])),
        }
    }
}

/// How a field produces derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeSource {
    Analytic,
    FiniteDifference { step: f64 },
}

impl DerivativeSource {
    /// Combine the sources of two inputs of a derived field.
    pub fn combine(self, other: DerivativeSource) -> DerivativeSource {
        match (self, other) {
            (DerivativeSource::Analytic, DerivativeSource::Analytic) => DerivativeSource::Analytic,
            (DerivativeSource::FiniteDifference { step: a }, DerivativeSource::FiniteDifference { step: b }) => {
                DerivativeSource::FiniteDifference { step: a.max(b) }
            }
            (DerivativeSource::FiniteDifference { step }, _) | (_, DerivativeSource::FiniteDifference { step }) => {
                DerivativeSource::FiniteDifference { step }
            }
        }
    }

    /// Distance a point must keep from the domain boundary.
    pub fn margin(self) -> f64 {
        match self {
            DerivativeSource::Analytic => 0.0,
            DerivativeSource::FiniteDifference { step } => STENCIL_HALF_WIDTH as f64 * step,
        }
    }
}

pub trait ScalarField: Send + Sync {
    fn domain(&self) -> BoxDomain;
    fn source(&self) -> DerivativeSource;
    /// Taylor jet of the field at `x` up to `order`.
    fn jet(&self, x: &Point, order: usize) -> Result<Jet, FieldError>;
    fn value(&self, x: &Point) -> Result<f64, FieldError> {
        self.jet(x, 0).map(|j| j.value())
    }
}

pub trait MetricField: Send + Sync {
    fn domain(&self) -> BoxDomain;
    fn source(&self) -> DerivativeSource;
    /// Jets of all metric components at `x` up to `order`.
    fn jet(&self, x: &Point, order: usize) -> Result<MetricJet, FieldError>;
    fn value(&self, x: &Point) -> Result<[[f64; DIM]; DIM], FieldError> {
        let j = self.jet(x, 0)?;
        Ok(std::array::from_fn(|a| std::array::from_fn(|b| j[a][b].value())))
    }
}

type JetFn = dyn Fn(&[Jet; DIM]) -> Jet + Send + Sync;
type MetricJetFn = dyn Fn(&[Jet; DIM]) -> MetricJet + Send + Sync;

/// Scalar field given by a closed-form expression over coordinate jets.
#[derive(Clone)]
pub struct AnalyticScalar {
    domain: BoxDomain,
    f: Arc<JetFn>,
}

impl fmt::Debug for AnalyticScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticScalar").field("domain", &self.domain).finish()
    }
}

impl AnalyticScalar {
    pub fn new(domain: BoxDomain, f: impl Fn(&[Jet; DIM]) -> Jet + Send + Sync + 'static) -> Self {
        AnalyticScalar {
            domain,
            f: Arc::new(f),
        }
    }

    pub fn zero(domain: BoxDomain) -> Self {
        Self::new(domain, |x| Jet::constant(x[0].order(), 0.0))
    }
}

impl ScalarField for AnalyticScalar {
    fn domain(&self) -> BoxDomain {
        self.domain
    }
    fn source(&self) -> DerivativeSource {
        DerivativeSource::Analytic
    }
    fn jet(&self, x: &Point, order: usize) -> Result<Jet, FieldError> {
        check_order(order)?;
        self.domain.check(x, 0.0)?;
        let j = (self.f)(&Jet::coords(order, x));
        finite_or(j.value(), x)?;
        Ok(j)
    }
}

/// Metric given by a closed-form expression over coordinate jets.
#[derive(Clone)]
pub struct AnalyticMetric {
    domain: BoxDomain,
    f: Arc<MetricJetFn>,
}

impl fmt::Debug for AnalyticMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticMetric").field("domain", &self.domain).finish()
    }
}

impl AnalyticMetric {
    pub fn new(domain: BoxDomain, f: impl Fn(&[Jet; DIM]) -> MetricJet + Send + Sync + 'static) -> Self {
        AnalyticMetric {
            domain,
            f: Arc::new(f),
        }
    }

    /// Metric `factor(x) * δ`.
    pub fn conformally_flat(domain: BoxDomain, factor: impl Fn(&[Jet; DIM]) -> Jet + Send + Sync + 'static) -> Self {
        Self::new(domain, move |x| {
            let w = factor(x);
            let z = Jet::constant(w.order(), 0.0);
            std::array::from_fn(|a| std::array::from_fn(|b| if a == b { w } else { z }))
        })
    }

    pub fn euclidean(domain: BoxDomain) -> Self {
        Self::conformally_flat(domain, |x| Jet::constant(x[0].order(), 1.0))
    }

    /// Round-sphere metric of curvature `kappa` in stereographic coordinates.
    pub fn stereographic_sphere(domain: BoxDomain, kappa: f64) -> Self {
        Self::conformally_flat(domain, move |x| {
            let r2 = x.iter().fold(Jet::constant(x[0].order(), 0.0), |a, xi| a + xi.sqr());
            ((r2 * kappa + 1.0).sqr()).recip() * 4.0
        })
    }
}

impl MetricField for AnalyticMetric {
    fn domain(&self) -> BoxDomain {
        self.domain
    }
    fn source(&self) -> DerivativeSource {
        DerivativeSource::Analytic
    }
    fn jet(&self, x: &Point, order: usize) -> Result<MetricJet, FieldError> {
        check_order(order)?;
        self.domain.check(x, 0.0)?;
        let g = (self.f)(&Jet::coords(order, x));
        for row in &g {
            for e in row {
                finite_or(e.value(), x)?;
            }
        }
        Ok(g)
    }
}

/// Number of grid steps a centered stencil reaches from its center.
pub const STENCIL_HALF_WIDTH: usize = 3;

/// Centered fourth-order accurate weights for the `k`-th derivative,
/// indexed by offset `-3..=3`.
pub fn central_weights(k: usize) -> [f64; 7] {
    match k {
        0 => [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        1 => [0.0, 1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0, 0.0],
        2 => [0.0, -1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0, 0.0],
        3 => [1.0 / 8.0, -1.0, 13.0 / 8.0, 0.0, -13.0 / 8.0, 1.0, -1.0 / 8.0],
        4 => [-1.0 / 6.0, 2.0, -13.0 / 2.0, 28.0 / 3.0, -13.0 / 2.0, 2.0, -1.0 / 6.0],
        _ => panic!("no stencil for derivative order {k}"),
    }
}

/// Apply tensor-product stencils to a sampled function and collect the
/// partial derivatives of every multi-index up to `order`.
fn fd_partials<
    T: Copy + Default + std::ops::AddAssign + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
>(
    x: &Point,
    h: f64,
    order: usize,
    mut sample: impl FnMut(&Point) -> Result<T, FieldError>,
) -> Result<Vec<(MultiIndex, T)>, FieldError> {
    let mut cache: HashMap<[i8; DIM], T> = HashMap::new();
    let center = sample(x)?;
    cache.insert([0; DIM], center);
    let mut out = Vec::new();
    for alpha in multi_indices(order) {
        let w: [[f64; 7]; DIM] = std::array::from_fn(|d| central_weights(alpha[d] as usize));
        let mut acc = T::default();
        let deg_nonzero = alpha.iter().any(|&e| e > 0);
        let ranges: [Vec<i8>; DIM] =
            std::array::from_fn(|d| (-3i8..=3).filter(|&o| w[d][(o + 3) as usize] != 0.0).collect());
        for &o0 in &ranges[0] {
            for &o1 in &ranges[1] {
                for &o2 in &ranges[2] {
                    for &o3 in &ranges[3] {
                        let off = [o0, o1, o2, o3];
                        let wt: f64 = (0..DIM).map(|d| w[d][(off[d] + 3) as usize]).product();
                        let v = match cache.get(&off) {
                            Some(v) => *v,
                            None => {
                                let p: Point = std::array::from_fn(|d| x[d] + off[d] as f64 * h);
                                let v = sample(&p)?;
                                cache.insert(off, v);
                                v
                            }
                        };
                        acc += if deg_nonzero { (v - center) * wt } else { v * wt };
                    }
                }
            }
        }
        let deg: i32 = alpha.iter().map(|&e| e as i32).sum();
        out.push((*alpha, acc * h.powi(-deg)));
    }
    Ok(out)
}

type ValueFn = dyn Fn(&Point) -> f64 + Send + Sync;
type MatrixFn = dyn Fn(&Point) -> [[f64; DIM]; DIM] + Send + Sync;

/// Scalar field known only through point values.
#[derive(Clone)]
pub struct SampledScalar {
    domain: BoxDomain,
    step: f64,
    f: Arc<ValueFn>,
}

impl fmt::Debug for SampledScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledScalar")
            .field("domain", &self.domain)
            .field("step", &self.step)
            .finish()
    }
}

impl SampledScalar {
    pub fn new(domain: BoxDomain, step: f64, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        SampledScalar {
            domain,
            step,
            f: Arc::new(f),
        }
    }

    /// Default step: one percent of the smallest box width.
    pub fn with_default_step(domain: BoxDomain, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(domain, 0.01 * domain.min_width(), f)
    }

    /// Sample another field, discarding its derivative information.
    pub fn from_field(field: Arc<dyn ScalarField>, step: f64) -> Self {
        let domain = field.domain();
        Self::new(domain, step, move |p| field.value(p).unwrap_or(f64::NAN))
    }

    pub fn step(&self) -> f64 {
        self.step
    }
}

impl ScalarField for SampledScalar {
    fn domain(&self) -> BoxDomain {
        self.domain
    }
    fn source(&self) -> DerivativeSource {
        DerivativeSource::FiniteDifference { step: self.step }
    }
    fn jet(&self, x: &Point, order: usize) -> Result<Jet, FieldError> {
        check_order(order)?;
        let margin = if order == 0 { 0.0 } else { self.source().margin() };
        self.domain.check(x, margin)?;
        let parts = fd_partials(x, self.step, order, |p| {
            let v = (self.f)(p);
            finite_or(v, p).map(|_| v)
        })?;
        let mut it = parts.into_iter();
        Ok(Jet::from_partials(order, |_| it.next().map(|(_, v)| v).unwrap_or(0.0)))
    }
}

#[derive(Clone, Copy, Default)]
struct Sym([f64; 10]);

impl std::ops::AddAssign for Sym {
    fn add_assign(&mut self, rhs: Sym) {
        for k in 0..10 {
            self.0[k] += rhs.0[k];
        }
    }
}

impl std::ops::Sub for Sym {
    type Output = Sym;
    fn sub(mut self, rhs: Sym) -> Sym {
        for k in 0..10 {
            self.0[k] -= rhs.0[k];
        }
        self
    }
}

impl std::ops::Mul<f64> for Sym {
    type Output = Sym;
    fn mul(mut self, rhs: f64) -> Sym {
        for v in self.0.iter_mut() {
            *v *= rhs;
        }
        self
    }
}

const SYM_PAIRS: [(usize, usize); 10] = [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];

/// Metric known only through point values.
#[derive(Clone)]
pub struct SampledMetric {
    domain: BoxDomain,
    step: f64,
    f: Arc<MatrixFn>,
}

impl fmt::Debug for SampledMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledMetric")
            .field("domain", &self.domain)
            .field("step", &self.step)
            .finish()
    }
}

impl SampledMetric {
    pub fn new(domain: BoxDomain, step: f64, f: impl Fn(&Point) -> [[f64; DIM]; DIM] + Send + Sync + 'static) -> Self {
        SampledMetric {
            domain,
            step,
            f: Arc::new(f),
        }
    }

    pub fn with_default_step(
        domain: BoxDomain,
        f: impl Fn(&Point) -> [[f64; DIM]; DIM] + Send + Sync + 'static,
    ) -> Self {
        Self::new(domain, 0.01 * domain.min_width(), f)
    }

    pub fn from_field(field: Arc<dyn MetricField>, step: f64) -> Self {
        let domain = field.domain();
        Self::new(domain, step, move |p| field.value(p).unwrap_or([[f64::NAN; DIM]; DIM]))
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn sample(&self, p: &Point) -> Result<Sym, FieldError> {
        let m = (self.f)(p);
        let mut defect: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for a in 0..DIM {
            for b in 0..DIM {
                finite_or(m[a][b], p)?;
                defect = defect.max((m[a][b] - m[b][a]).abs());
                scale = scale.max(m[a][b].abs());
            }
        }
        if defect > 1e-12 * scale.max(1.0) {
            return Err(FieldError::AsymmetricMetric { point: *p, defect });
        }
        Ok(Sym(std::array::from_fn(|k| {
            let (a, b) = SYM_PAIRS[k];
            0.5 * (m[a][b] + m[b][a])
        })))
    }
}

impl MetricField for SampledMetric {
    fn domain(&self) -> BoxDomain {
        self.domain
    }
    fn source(&self) -> DerivativeSource {
        DerivativeSource::FiniteDifference { step: self.step }
    }
    fn jet(&self, x: &Point, order: usize) -> Result<MetricJet, FieldError> {
        check_order(order)?;
        let margin = if order == 0 { 0.0 } else { self.source().margin() };
        self.domain.check(x, margin)?;
        let parts = fd_partials(x, self.step, order, |p| self.sample(p))?;
        let comp: Vec<Jet> = (0..10)
            .map(|k| {
                let mut it = parts.iter();
                Jet::from_partials(order, |_| it.next().map(|(_, v)| v.0[k]).unwrap_or(0.0))
            })
            .collect();
        let mut g = [[Jet::constant(order, 0.0); DIM]; DIM];
        for (k, &(a, b)) in SYM_PAIRS.iter().enumerate() {
            g[a][b] = comp[k];
            g[b][a] = comp[k];
        }
        Ok(g)
    }
}

fn check_order(order: usize) -> Result<(), FieldError> {
    if order > MAX_ORDER {
        Err(FieldError::InsufficientOrder {
            needed: order,
            available: MAX_ORDER,
        })
    } else {
        Ok(())
    }
}

fn finite_or(v: f64, p: &Point) -> Result<(), FieldError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(FieldError::NonFinite { point: *p })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_moments() {
        let offs = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        for k in 0..=4usize {
            let w = central_weights(k);
            for m in 0..(k + 4) {
                let s: f64 = (0..7).map(|i| w[i] * f64::powi(offs[i], m as i32)).sum();
                let fact: f64 = (1..=k).map(|v| v as f64).product();
                let expect = if m == k { fact } else { 0.0 };
                assert!((s - expect).abs() < 1e-12, "k={k} m={m} s={s}");
            }
        }
    }

    #[test]
    fn sampled_matches_analytic() {
        let dom = BoxDomain::cube([0.0; 4], 1.0);
        let f = |p: &Point| (p[0] + 2.0 * p[1]).sin() * (0.5 * p[2] - p[3]).exp();
        let sf = SampledScalar::new(dom, 0.02, f);
        let af = AnalyticScalar::new(dom, |x| (x[0] + x[1] * 2.0).sin() * (x[2] * 0.5 - x[3]).exp());
        let p = [0.1, -0.2, 0.3, 0.05];
        let js = sf.jet(&p, 4).unwrap();
        let ja = af.jet(&p, 4).unwrap();
        for alpha in multi_indices(4) {
            let d = (js.partial(alpha) - ja.partial(alpha)).abs();
            assert!(d < 2e-4 * (1.0 + ja.partial(alpha).abs()), "{alpha:?} {d}");
        }
    }

    #[test]
    fn margin_enforced() {
        let dom = BoxDomain::cube([0.0; 4], 1.0);
        let sf = SampledScalar::new(dom, 0.1, |p| p[0]);
        assert!(sf.jet(&[0.75, 0.0, 0.0, 0.0], 2).is_err());
        assert!(sf.jet(&[0.65, 0.0, 0.0, 0.0], 2).is_ok());
    }

    #[test]
    fn asymmetric_metric_rejected() {
        let dom = BoxDomain::cube([0.0; 4], 1.0);
        let m = SampledMetric::new(dom, 0.01, |_| {
            let mut g = [[0.0; 4]; 4];
            for (i, row) in g.iter_mut().enumerate() {
                row[i] = 1.0;
            }
            g[0][1] = 0.1;
            g
        });
        assert!(matches!(m.jet(&[0.0; 4], 1), Err(FieldError::AsymmetricMetric { .. })));
    }
}
