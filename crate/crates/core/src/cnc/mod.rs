//! Conformal-normal-coordinate Taylor expansions computed in exact rational
//! arithmetic.
//!
//! A [`CurvatureJet`] holds `R_{abcd}(0)`, `R_{abcd,e}(0)` and optionally
//! `R_{abcd,ef}(0)` in coordinates where `g(0) = δ`. Ricci contractions use
//! `R_{bd} = R_{abad}` (sum over `a`).

pub mod format;
pub mod generate;
pub mod poly;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::field::{AnalyticMetric, BoxDomain, FieldError, Point, ScalarField};
use crate::jet::Jet;
pub use poly::{q, q_to_f64, qr, Mono, Poly, Q};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CncError {
    #[error("curvature jet violates {which} symmetry (defect {defect:e})")]
    SymmetryViolation { which: String, defect: f64 },
    #[error("jet is flagged conformal-normal but {0}")]
    ConformalNormalViolation(String),
    #[error("operation requires a jet flagged conformal-normal")]
    FlagMissing,
    #[error("coefficient of degree {requested} requested but the expansion is valid only through degree {valid}")]
    BeyondValidDegree { requested: usize, valid: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: entry conflicts with a value implied by symmetry")]
    ConflictingEntry { line: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Dense tensor over `{0..3}^rank` with exact entries.
#[derive(Debug, Clone, PartialEq)]
pub struct RTensor {
    rank: usize,
    data: Vec<Q>,
}

impl RTensor {
    pub fn zeros(rank: usize) -> Self {
        RTensor {
            rank,
            data: vec![Q::zero(); 4usize.pow(rank as u32)],
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * 4 + i)
    }

    pub fn get(&self, idx: &[usize]) -> &Q {
        &self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Q) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| q_to_f64(v).abs()).fold(0.0, f64::max)
    }

    /// All multi-indices of the tensor's rank, in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> {
        indices(self.rank)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(q_to_f64).collect()
    }

    /// Relabel coordinates: entry `idx` moves to `perm ∘ idx`.
    pub fn permute(&self, perm: &[usize; 4]) -> RTensor {
        let mut out = RTensor::zeros(self.rank);
        for idx in self.indices() {
            let p: Vec<usize> = idx.iter().map(|&i| perm[i]).collect();
            out.set(&p, self.get(&idx).clone());
        }
        out
    }
}

pub fn indices(rank: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..4usize.pow(rank as u32)).map(move |mut o| {
        let mut v = vec![0; rank];
        for slot in (0..rank).rev() {
            v[slot] = o % 4;
            o /= 4;
        }
        v
    })
}

/// Images of `(a,b,c,d)` under the curvature symmetries with their signs.
pub fn symmetric_images(a: usize, b: usize, c: usize, d: usize) -> [([usize; 4], i8); 8] {
    [
        ([a, b, c, d], 1),
        ([b, a, c, d], -1),
        ([a, b, d, c], -1),
        ([b, a, d, c], 1),
        ([c, d, a, b], 1),
        ([d, c, a, b], -1),
        ([c, d, b, a], -1),
        ([d, c, b, a], 1),
    ]
}

/// Largest exact violation of antisymmetry, pair symmetry and first
/// Bianchi in the leading four slots.
pub fn algebraic_defect(t: &RTensor) -> f64 {
    let mut worst = 0.0f64;
    let tail_rank = t.rank - 4;
    for tail in indices(tail_rank) {
        let at = |a: usize, b: usize, c: usize, d: usize| {
            let mut idx = vec![a, b, c, d];
            idx.extend_from_slice(&tail);
            t.get(&idx).clone()
        };
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let v = at(a, b, c, d);
                        for r in [
                            &v + &at(b, a, c, d),
                            &v + &at(a, b, d, c),
                            &v - &at(c, d, a, b),
                            &(&v + &at(a, c, d, b)) + &at(a, d, b, c),
                        ] {
                            worst = worst.max(q_to_f64(&r).abs());
                        }
                    }
                }
            }
        }
    }
    worst
}

/// Curvature data at the center of normal coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureJet {
    pub r0: RTensor,
    pub r1: RTensor,
    pub r2: Option<RTensor>,
    pub conformal_normal: bool,
}

/// Tolerance applied to symmetry checks of jets converted from floats.
pub const JET_TOLERANCE: f64 = 1e-12;

impl CurvatureJet {
    pub fn zero() -> Self {
        CurvatureJet {
            r0: RTensor::zeros(4),
            r1: RTensor::zeros(5),
            r2: Some(RTensor::zeros(6)),
            conformal_normal: true,
        }
    }

    pub fn new(r0: RTensor, r1: RTensor, r2: Option<RTensor>, conformal_normal: bool) -> Result<Self, CncError> {
        let jet = CurvatureJet {
            r0,
            r1,
            r2,
            conformal_normal,
        };
        jet.validate()?;
        Ok(jet)
    }

    /// Constant-curvature jet `R_{abcd} = K(δ_ac δ_bd − δ_ad δ_bc)`, not
    /// conformal-normal unless `K = 0`.
    pub fn constant_curvature(k: Q) -> Self {
        let mut r0 = RTensor::zeros(4);
        for idx in indices(4) {
            let (a, b, c, d) = (idx[0], idx[1], idx[2], idx[3]);
            let v = (a == c && b == d) as i64 - (a == d && b == c) as i64;
            r0.set(&idx, &k * q(v));
        }
        CurvatureJet {
            r0,
            r1: RTensor::zeros(5),
            r2: Some(RTensor::zeros(6)),
            conformal_normal: k.is_zero(),
        }
    }

    /// Jet from floating-point Riemann components (no derivative data).
    pub fn from_f64(r0: &crate::curvature::Tensor4, conformal_normal: bool) -> Result<Self, CncError> {
        let mut t = RTensor::zeros(4);
        for idx in indices(4) {
            let v = r0[idx[0]][idx[1]][idx[2]][idx[3]];
            t.set(&idx, Q::from_float(v).unwrap_or_else(Q::zero));
        }
        Self::new(t, RTensor::zeros(5), None, conformal_normal)
    }

    pub fn validate(&self) -> Result<(), CncError> {
        for (name, t) in [("R0", Some(&self.r0)), ("R1", Some(&self.r1)), ("R2", self.r2.as_ref())] {
            if let Some(t) = t {
                let d = algebraic_defect(t);
                if d > JET_TOLERANCE {
                    return Err(CncError::SymmetryViolation {
                        which: name.to_string(),
                        defect: d,
                    });
                }
            }
        }
        if self.conformal_normal {
            let ric = self.ricci();
            let worst = ric.iter().flatten().map(|v| q_to_f64(v).abs()).fold(0.0, f64::max);
            if worst > JET_TOLERANCE {
                return Err(CncError::ConformalNormalViolation(format!("Ricci(0) ≠ 0 (max {worst:e})")));
            }
            let s = self.cyclic_ricci_derivative_defect();
            if s > JET_TOLERANCE {
                return Err(CncError::ConformalNormalViolation(format!(
                    "symmetrized Ricci derivative ≠ 0 (max {s:e})"
                )));
            }
        }
        Ok(())
    }

    /// `R_{bd}(0)`.
    pub fn ricci(&self) -> [[Q; 4]; 4] {
        std::array::from_fn(|b| {
            std::array::from_fn(|d| (0..4).fold(Q::zero(), |acc, a| acc + self.r0.get(&[a, b, a, d])))
        })
    }

    /// `R_{ij,k}(0)`.
    pub fn ricci_derivative(&self, i: usize, j: usize, k: usize) -> Q {
        (0..4).fold(Q::zero(), |acc, a| acc + self.r1.get(&[a, i, a, j, k]))
    }

    /// `R_{,k}(0)`.
    pub fn scalar_derivative(&self, k: usize) -> Q {
        (0..4).fold(Q::zero(), |acc, i| acc + self.ricci_derivative(i, i, k))
    }

    fn cyclic_ricci_derivative_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let s = self.ricci_derivative(i, j, k) + self.ricci_derivative(j, k, i) + self.ricci_derivative(k, i, j);
                    worst = worst.max(q_to_f64(&s).abs());
                }
            }
        }
        worst
    }

    /// Relabel coordinates by `perm`.
    pub fn permute(&self, perm: &[usize; 4]) -> CurvatureJet {
        CurvatureJet {
            r0: self.r0.permute(perm),
            r1: self.r1.permute(perm),
            r2: self.r2.as_ref().map(|t| t.permute(perm)),
            conformal_normal: self.conformal_normal,
        }
    }

    /// Multiply every curvature tensor by `f`. The defining identities are
    /// linear, so the result is again valid.
    pub fn scaled(&self, f: &Q) -> CurvatureJet {
        let scale = |t: &RTensor| RTensor {
            rank: t.rank,
            data: t.data.iter().map(|v| v * f).collect(),
        };
        CurvatureJet {
            r0: scale(&self.r0),
            r1: scale(&self.r1),
            r2: self.r2.as_ref().map(scale),
            conformal_normal: self.conformal_normal,
        }
    }

    /// Multiply `R0` by `s²` and `R1` by `s³`, the jet of `s^{-2}` times the
    /// metric pulled back under `ξ -> s ξ`.
    pub fn rescaled(&self, s: &Q) -> CurvatureJet {
        let s2 = s * s;
        let s3 = &s2 * s;
        let s4 = &s2 * &s2;
        let scale = |t: &RTensor, f: &Q| RTensor {
            rank: t.rank,
            data: t.data.iter().map(|v| v * f).collect(),
        };
        CurvatureJet {
            r0: scale(&self.r0, &s2),
            r1: scale(&self.r1, &s3),
            r2: self.r2.as_ref().map(|t| scale(t, &s4)),
            conformal_normal: self.conformal_normal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaylorKind {
    Metric,
    InverseMetric,
}

/// Polynomial expansion of `g_{ab}` or `g^{ab}` about the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTaylor {
    pub kind: TaylorKind,
    entries: Vec<Poly>,
    pub valid_degree: usize,
    pub conformal_normal: bool,
}

impl MetricTaylor {
    pub fn entry(&self, a: usize, b: usize) -> &Poly {
        &self.entries[a * 4 + b]
    }

    /// Homogeneous coefficient of degree `d`, refused beyond the valid degree.
    pub fn coefficient(&self, a: usize, b: usize, d: usize) -> Result<Poly, CncError> {
        if d > self.valid_degree {
            return Err(CncError::BeyondValidDegree {
                requested: d,
                valid: self.valid_degree,
            });
        }
        Ok(self.entry(a, b).homogeneous(d))
    }

    pub fn eval(&self, x: &Point) -> [[f64; 4]; 4] {
        std::array::from_fn(|a| std::array::from_fn(|b| self.entry(a, b).eval(x)))
    }

    /// The polynomial metric as a field with exact jets.
    pub fn to_metric_field(&self, domain: BoxDomain) -> AnalyticMetric {
        let mut monos: Vec<[u8; 4]> = Vec::new();
        let mut upper: Vec<Vec<(usize, f64)>> = Vec::with_capacity(10);
        for a in 0..4 {
            for b in a..4 {
                let terms = self
                    .entry(a, b)
                    .terms()
                    .map(|(m, c)| {
                        let k = monos.iter().position(|e| *e == m.0).unwrap_or_else(|| {
                            monos.push(m.0);
                            monos.len() - 1
                        });
                        (k, q_to_f64(c))
                    })
                    .collect();
                upper.push(terms);
            }
        }
        AnalyticMetric::new(domain, move |x| {
            let n = x[0].order();
            let max_deg = monos.iter().flat_map(|m| m.iter()).copied().max().unwrap_or(0) as usize;
            let powers: Vec<Vec<Jet>> = x
                .iter()
                .map(|xk| {
                    let mut p = vec![Jet::constant(n, 1.0)];
                    for d in 1..=max_deg {
                        let next = p[d - 1] * *xk;
                        p.push(next);
                    }
                    p
                })
                .collect();
            let mono_jets: Vec<Jet> = monos
                .iter()
                .map(|m| {
                    let mut t = powers[0][m[0] as usize];
                    for k in 1..4 {
                        if m[k] > 0 {
                            t *= powers[k][m[k] as usize];
                        }
                    }
                    t
                })
                .collect();
            let mut out = [[Jet::constant(n, 0.0); 4]; 4];
            let mut idx = 0;
            for a in 0..4 {
                for b in a..4 {
                    let mut e = Jet::constant(n, 0.0);
                    for &(k, c) in &upper[idx] {
                        e += mono_jets[k] * c;
                    }
                    out[a][b] = e;
                    out[b][a] = e;
                    idx += 1;
                }
            }
            out
        })
    }

    /// Stable text rendering, one component per line.
    pub fn render(&self) -> String {
        let name = match self.kind {
            TaylorKind::Metric => "g",
            TaylorKind::InverseMetric => "ginv",
        };
        let mut s = String::new();
        for a in 0..4 {
            for b in a..4 {
                s.push_str(&format!("{name}[{}][{}] = {} + O(r^{})\n", a + 1, b + 1, self.entry(a, b), self.valid_degree + 1));
            }
        }
        s
    }
}

/// Polynomial-valued tensor with a tracked validity degree.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTensor {
    pub rank: usize,
    data: Vec<Poly>,
    pub valid_degree: usize,
}

impl PolyTensor {
    fn build(rank: usize, valid_degree: usize, mut f: impl FnMut(&[usize]) -> Poly) -> Self {
        PolyTensor {
            rank,
            data: indices(rank).map(|idx| f(&idx).truncate(valid_degree)).collect(),
            valid_degree,
        }
    }

    pub fn get(&self, idx: &[usize]) -> &Poly {
        let o = idx.iter().fold(0, |acc, &i| acc * 4 + i);
        &self.data[o]
    }

    pub fn coefficient(&self, idx: &[usize], d: usize) -> Result<Poly, CncError> {
        if d > self.valid_degree {
            return Err(CncError::BeyondValidDegree {
                requested: d,
                valid: self.valid_degree,
            });
        }
        Ok(self.get(idx).homogeneous(d))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|p| p.is_zero())
    }

    /// First index at which two tensors differ, with both polynomials.
    pub fn first_difference(&self, other: &PolyTensor) -> Option<(Vec<usize>, Poly, Poly)> {
        let d = self.valid_degree.min(other.valid_degree);
        indices(self.rank).find_map(|idx| {
            let a = self.get(&idx).truncate(d);
            let b = other.get(&idx).truncate(d);
            (a != b).then_some((idx, a, b))
        })
    }

    pub fn eval(&self, idx: &[usize], x: &Point) -> f64 {
        self.get(idx).eval(x)
    }
}

fn delta(a: usize, b: usize) -> Poly {
    if a == b {
        Poly::one()
    } else {
        Poly::zero()
    }
}

fn xi(i: usize) -> Poly {
    Poly::var(i)
}

fn xi2(i: usize, j: usize) -> Poly {
    &xi(i) * &xi(j)
}

fn xi3(i: usize, j: usize, k: usize) -> Poly {
    &xi2(i, j) * &xi(k)
}

/// `g_{ab}(ξ) = δ_{ab} + (1/3) R_{aijb} ξ^{ij} + (1/6) R_{aijb,k} ξ^{ijk} + O(r⁴)`.
pub fn metric_taylor_from_jet(jet: &CurvatureJet) -> Result<MetricTaylor, CncError> {
    jet.validate()?;
    let third = qr(1, 3);
    let sixth = qr(1, 6);
    let mut entries = Vec::with_capacity(16);
    for a in 0..4 {
        for b in 0..4 {
            let mut p = delta(a, b);
            for i in 0..4 {
                for j in 0..4 {
                    let c = jet.r0.get(&[a, i, j, b]);
                    if !c.is_zero() {
                        p = &p + &xi2(i, j).scale(&(c * &third));
                    }
                    for k in 0..4 {
                        let c = jet.r1.get(&[a, i, j, b, k]);
                        if !c.is_zero() {
                            p = &p + &xi3(i, j, k).scale(&(c * &sixth));
                        }
                    }
                }
            }
            entries.push(p);
        }
    }
    Ok(MetricTaylor {
        kind: TaylorKind::Metric,
        entries,
        valid_degree: 3,
        conformal_normal: jet.conformal_normal,
    })
}

fn mat_mul_trunc(a: &[Poly], b: &[Poly], d: usize) -> Vec<Poly> {
    let mut out = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = Poly::zero();
            for k in 0..4 {
                acc = &acc + &a[i * 4 + k].mul_trunc(&b[k * 4 + j], d);
            }
            out.push(acc);
        }
    }
    out
}

/// Inverse of a metric expansion by the Neumann series, truncated at the
/// valid degree.
pub fn inverse_metric_taylor(mt: &MetricTaylor) -> MetricTaylor {
    let d = mt.valid_degree;
    let pert: Vec<Poly> = (0..16).map(|k| &mt.entries[k] - &delta(k / 4, k % 4)).collect();
    let mut term: Vec<Poly> = (0..16).map(|k| delta(k / 4, k % 4)).collect();
    let mut acc = term.clone();
    let low = pert.iter().filter_map(|p| p.low_degree()).min().unwrap_or(d + 1).max(1);
    let mut k = 1;
    while k * low <= d {
        term = mat_mul_trunc(&term, &pert, d);
        for (t, p) in acc.iter_mut().zip(&term) {
            *t = if k % 2 == 1 { &*t - p } else { &*t + p };
        }
        k += 1;
    }
    MetricTaylor {
        kind: match mt.kind {
            TaylorKind::Metric => TaylorKind::InverseMetric,
            TaylorKind::InverseMetric => TaylorKind::Metric,
        },
        entries: acc,
        valid_degree: d,
        conformal_normal: mt.conformal_normal,
    }
}

/// `g · g^{-1} − δ` truncated at the common valid degree.
pub fn product_residual(a: &MetricTaylor, b: &MetricTaylor) -> Vec<Poly> {
    let d = a.valid_degree.min(b.valid_degree);
    let prod = mat_mul_trunc(&a.entries, &b.entries, d);
    prod.iter().enumerate().map(|(k, p)| p - &delta(k / 4, k % 4)).collect()
}

fn as_inverse(mt: &MetricTaylor) -> MetricTaylor {
    match mt.kind {
        TaylorKind::InverseMetric => mt.clone(),
        TaylorKind::Metric => inverse_metric_taylor(mt),
    }
}

/// `∂_c g^{ab}` indexed `[a, b, c]`, valid one degree below the expansion.
pub fn d_inverse_metric(mt: &MetricTaylor) -> PolyTensor {
    let inv = as_inverse(mt);
    PolyTensor::build(3, inv.valid_degree - 1, |i| inv.entry(i[0], i[1]).deriv(i[2]))
}

/// `∂_{cd} g^{ab}` indexed `[a, b, c, d]`.
pub fn dd_inverse_metric(mt: &MetricTaylor) -> PolyTensor {
    let inv = as_inverse(mt);
    PolyTensor::build(4, inv.valid_degree - 2, |i| inv.entry(i[0], i[1]).deriv(i[2]).deriv(i[3]))
}

/// `∂_a g^{ab}` indexed `[b]`.
pub fn contracted_first_derivative(mt: &MetricTaylor) -> Result<PolyTensor, CncError> {
    if !mt.conformal_normal {
        return Err(CncError::FlagMissing);
    }
    let d = d_inverse_metric(mt);
    Ok(PolyTensor::build(1, d.valid_degree, |i| {
        (0..4).fold(Poly::zero(), |acc, a| &acc + d.get(&[a, i[0], a]))
    }))
}

/// `∂_{ad} g^{ab}` indexed `[b, d]`.
pub fn contracted_second_derivative(mt: &MetricTaylor) -> Result<PolyTensor, CncError> {
    if !mt.conformal_normal {
        return Err(CncError::FlagMissing);
    }
    let dd = dd_inverse_metric(mt);
    Ok(PolyTensor::build(2, dd.valid_degree, |i| {
        (0..4).fold(Poly::zero(), |acc, a| &acc + dd.get(&[a, i[0], a, i[1]]))
    }))
}

fn r0(jet: &CurvatureJet, a: usize, b: usize, c: usize, d: usize) -> Q {
    jet.r0.get(&[a, b, c, d]).clone()
}

fn r1(jet: &CurvatureJet, a: usize, b: usize, c: usize, d: usize, e: usize) -> Q {
    jet.r1.get(&[a, b, c, d, e]).clone()
}

/// Closed form `−(2/3) R_{a(ci)b} ξ^i − (1/6)(2 R_{a(ci)b,j} + R_{aijb,c}) ξ^{ij}`
/// with round brackets averaging over the enclosed indices.
pub fn d_inverse_metric_closed_form(jet: &CurvatureJet) -> PolyTensor {
    let half = qr(1, 2);
    PolyTensor::build(3, 2, |idx| {
        let (a, b, c) = (idx[0], idx[1], idx[2]);
        let mut p = Poly::zero();
        for i in 0..4 {
            let sym = (r0(jet, a, c, i, b) + r0(jet, a, i, c, b)) * &half;
            p = &p + &xi(i).scale(&(sym * qr(-2, 3)));
            for j in 0..4 {
                let sym1 = (r1(jet, a, c, i, b, j) + r1(jet, a, i, c, b, j)) * &half;
                let coef = (sym1 * q(2) + r1(jet, a, i, j, b, c)) * qr(-1, 6);
                p = &p + &xi2(i, j).scale(&coef);
            }
        }
        p
    })
}

/// Closed form `−(1/6)(2 R_{ib,j} − R_{ij,b}) ξ^{ij}`.
pub fn contracted_first_derivative_closed_form(jet: &CurvatureJet) -> Result<PolyTensor, CncError> {
    if !jet.conformal_normal {
        return Err(CncError::FlagMissing);
    }
    Ok(PolyTensor::build(1, 2, |idx| {
        let b = idx[0];
        let mut p = Poly::zero();
        for i in 0..4 {
            for j in 0..4 {
                let coef = (jet.ricci_derivative(i, b, j) * q(2) - jet.ricci_derivative(i, j, b)) * qr(-1, 6);
                p = &p + &xi2(i, j).scale(&coef);
            }
        }
        p
    }))
}

/// Closed form `−(2/3) R_{a(cd)b} − (1/3)(R_{a(cd)b,i} + R_{iba(c,d)} − R_{aib(c,d)}) ξ^i`.
pub fn dd_inverse_metric_closed_form(jet: &CurvatureJet) -> PolyTensor {
    let half = qr(1, 2);
    PolyTensor::build(4, 1, |idx| {
        let (a, b, c, d) = (idx[0], idx[1], idx[2], idx[3]);
        let sym0 = (r0(jet, a, c, d, b) + r0(jet, a, d, c, b)) * &half;
        let mut p = Poly::constant(sym0 * qr(-2, 3));
        for i in 0..4 {
            let t1 = (r1(jet, a, c, d, b, i) + r1(jet, a, d, c, b, i)) * &half;
            let t2 = (r1(jet, i, b, a, c, d) + r1(jet, i, b, a, d, c)) * &half;
            let t3 = (r1(jet, a, i, b, c, d) + r1(jet, a, i, b, d, c)) * &half;
            p = &p + &xi(i).scale(&((t1 + t2 - t3) * qr(-1, 3)));
        }
        p
    })
}

/// Closed form `(2/3) R_{id,b} ξ^i`.
pub fn contracted_second_derivative_closed_form(jet: &CurvatureJet) -> Result<PolyTensor, CncError> {
    if !jet.conformal_normal {
        return Err(CncError::FlagMissing);
    }
    Ok(PolyTensor::build(2, 1, |idx| {
        let (b, d) = (idx[0], idx[1]);
        (0..4).fold(Poly::zero(), |acc, i| &acc + &xi(i).scale(&(jet.ricci_derivative(i, d, b) * qr(2, 3))))
    }))
}

/// `log det g` through the valid degree of the expansion.
pub fn log_det_expansion(mt: &MetricTaylor) -> Poly {
    let d = mt.valid_degree;
    let perms: Vec<([usize; 4], i64)> = permutations4();
    let mut det = Poly::zero();
    for (p, sign) in &perms {
        let mut term = Poly::constant(q(*sign));
        for (row, &col) in p.iter().enumerate() {
            term = term.mul_trunc(mt.entry(row, col), d);
        }
        det = &det + &term;
    }
    let dm1 = &det - &Poly::one();
    let mut acc = Poly::zero();
    let mut pow = Poly::one();
    for k in 1..=d {
        pow = pow.mul_trunc(&dm1, d);
        let c = if k % 2 == 1 { qr(1, k as i64) } else { qr(-1, k as i64) };
        acc = &acc + &pow.scale(&c);
    }
    acc
}

fn permutations4() -> Vec<([usize; 4], i64)> {
    let mut out = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let mut seen = [false; 4];
                    if p.iter().any(|&v| std::mem::replace(&mut seen[v], true)) {
                        continue;
                    }
                    let mut inv = 0;
                    for i in 0..4 {
                        for j in i + 1..4 {
                            if p[i] > p[j] {
                                inv += 1;
                            }
                        }
                    }
                    out.push((p, if inv % 2 == 0 { 1 } else { -1 }));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityStatus {
    Pass,
    Fail,
    NotCheckable,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub status: IdentityStatus,
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn get(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// True when no checkable identity failed.
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status != IdentityStatus::Fail)
    }
}

pub const ID_RICCI: &str = "ricci-vanishes";
pub const ID_CYCLIC: &str = "ricci-derivative-cyclic-sum";
pub const ID_GRAD_R: &str = "scalar-gradient-vanishes";
pub const ID_LAPLACE_R: &str = "scalar-laplacian-weyl-norm";
pub const ID_SECOND: &str = "symmetrized-second-derivative";
pub const ID_BIANCHI: &str = "contracted-bianchi";

fn judged(name: &'static str, residual: Q) -> IdentityCheck {
    let r = q_to_f64(&residual.abs());
    IdentityCheck {
        name,
        status: if residual.is_zero() || r <= JET_TOLERANCE {
            IdentityStatus::Pass
        } else {
            IdentityStatus::Fail
        },
        residual: Some(r),
    }
}

fn max_abs_q<'a>(vals: impl Iterator<Item = Q> + 'a) -> Q {
    vals.fold(Q::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
}

/// Weyl part of `R0` (flat metric at the origin).
pub fn weyl_part(jet: &CurvatureJet) -> RTensor {
    let ric = jet.ricci();
    let scal = (0..4).fold(Q::zero(), |acc, i| acc + &ric[i][i]);
    let dl = |a: usize, b: usize| if a == b { Q::one() } else { Q::zero() };
    let mut w = RTensor::zeros(4);
    for idx in indices(4) {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let v = r0(jet, i, j, k, l)
            - (dl(i, k) * &ric[j][l] - dl(i, l) * &ric[j][k] + dl(j, l) * &ric[i][k] - dl(j, k) * &ric[i][l]) * qr(1, 2)
            + &scal * qr(1, 6) * (dl(i, k) * dl(j, l) - dl(i, l) * dl(j, k));
        w.set(&idx, v);
    }
    w
}

/// Check the curvature identities satisfied at the center of conformal
/// normal coordinates.
pub fn cnc_identity_suite(jet: &CurvatureJet) -> IdentityReport {
    let mut checks = Vec::new();
    let ric = jet.ricci();
    checks.push(judged(ID_RICCI, max_abs_q(ric.iter().flatten().cloned())));
    let mut cyc = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                cyc.push(jet.ricci_derivative(i, j, k) + jet.ricci_derivative(j, k, i) + jet.ricci_derivative(k, i, j));
            }
        }
    }
    checks.push(judged(ID_CYCLIC, max_abs_q(cyc.into_iter())));
    checks.push(judged(ID_GRAD_R, max_abs_q((0..4).map(|k| jet.scalar_derivative(k)))));
    match &jet.r2 {
        Some(r2) => {
            let lap = (0..4).fold(Q::zero(), |acc, k| {
                let mut s = acc;
                for a in 0..4 {
                    for b in 0..4 {
                        s += r2.get(&[a, b, a, b, k, k]);
                    }
                }
                s
            });
            let w = weyl_part(jet);
            let wsq = w.data.iter().fold(Q::zero(), |acc, v| acc + v * v);
            checks.push(judged(ID_LAPLACE_R, lap + wsq * qr(1, 6)));
            let ric2 = |i: usize, j: usize, k: usize, l: usize| {
                (0..4).fold(Q::zero(), |acc, a| acc + r2.get(&[a, i, a, j, k, l]))
            };
            let base = |i: usize, j: usize, k: usize, l: usize| {
                let mut s = ric2(i, j, k, l);
                for p in 0..4 {
                    for m in 0..4 {
                        s += r0(jet, p, i, j, m) * r0(jet, p, k, l, m) * qr(2, 9);
                    }
                }
                s
            };
            let perms = permutations4();
            let mut worst = Q::zero();
            for idx in indices(4) {
                let mut s = Q::zero();
                for (p, _) in &perms {
                    s += base(idx[p[0]], idx[p[1]], idx[p[2]], idx[p[3]]);
                }
                let s = s * qr(1, 24);
                if s.abs() > worst {
                    worst = s.abs();
                }
            }
            checks.push(judged(ID_SECOND, worst));
        }
        None => {
            for name in [ID_LAPLACE_R, ID_SECOND] {
                checks.push(IdentityCheck {
                    name,
                    status: IdentityStatus::NotCheckable,
                    residual: None,
                });
            }
        }
    }
    let mut bianchi = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            for qq in 0..4 {
                let lhs = (0..4).fold(Q::zero(), |acc, p| acc + r1(jet, p, i, j, qq, p));
                bianchi.push(lhs - jet.ricci_derivative(i, qq, j) + jet.ricci_derivative(i, j, qq));
            }
        }
    }
    checks.push(judged(ID_BIANCHI, max_abs_q(bianchi.into_iter())));
    IdentityReport { checks }
}

/// Laplacian `∂_j g^{ij} ∂_i u + g^{ij} ∂_{ij} u` with the Taylor metric.
pub fn detone_laplacian(mt: &MetricTaylor, u: &dyn ScalarField, x: &Point) -> Result<f64, CncError> {
    if !mt.conformal_normal {
        return Err(CncError::FlagMissing);
    }
    let inv = as_inverse(mt);
    let uj: Jet = u.jet(x, 2)?;
    let grad = uj.gradient();
    let hess = uj.hessian();
    let mut s = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let gij = inv.entry(i, j);
            s += gij.deriv(j).eval(x) * grad[i] + gij.eval(x) * hess[i][j];
        }
    }
    Ok(s)
}

impl std::ops::Index<(usize, usize)> for MetricTaylor {
    type Output = Poly;
    fn index(&self, (a, b): (usize, usize)) -> &Poly {
        self.entry(a, b)
    }
}

impl MetricTaylor {
    /// Identity expansion.
    pub fn identity() -> Self {
        MetricTaylor {
            kind: TaylorKind::Metric,
            entries: (0..16).map(|k| delta(k / 4, k % 4)).collect(),
            valid_degree: 3,
            conformal_normal: true,
        }
    }

    pub fn is_identity(&self) -> bool {
        (0..16).all(|k| self.entries[k] == delta(k / 4, k % 4))
    }

    /// True when every entry is symmetric in `(a, b)`.
    pub fn is_symmetric(&self) -> bool {
        (0..4).all(|a| (0..4).all(|b| self.entry(a, b) == self.entry(b, a)))
    }
}
