//! Random curvature jets with exact rational entries.
//!
//! `R0` and `R1` are the curvature and its first derivative at the origin of
//! a metric `δ + q(x) + c(x)` with random integer quadratic and cubic
//! coefficients, so every algebraic and differential Bianchi identity holds
//! exactly. Conformal-normal conditions are imposed by exact linear solves.

use num_traits::{One, Zero};
use rand::Rng;

use super::{indices, q, weyl_part, CurvatureJet, RTensor, Q};

/// Constraint imposed on the derivative of the Ricci tensor at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RicciDerivativeMode {
    Free,
    /// `R_{ij,k} + R_{jk,i} + R_{ki,j} = 0`.
    SymmetricPartZero,
    /// `R_{ij,k} = 0`.
    AllZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetOptions {
    /// Project `R0` onto its Weyl part so that `Ric(0) = 0`.
    pub weyl_only: bool,
    pub ricci_derivative: RicciDerivativeMode,
    /// Integer coefficients are drawn from `-range..=range`.
    pub range: i64,
}

impl JetOptions {
    pub fn conformal_normal() -> Self {
        JetOptions {
            weyl_only: true,
            ricci_derivative: RicciDerivativeMode::SymmetricPartZero,
            range: 3,
        }
    }

    pub fn unconstrained() -> Self {
        JetOptions {
            weyl_only: false,
            ricci_derivative: RicciDerivativeMode::Free,
            range: 3,
        }
    }
}

fn pair_index(a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    // rows of the upper triangle of a 4×4 matrix
    [0, 4, 7, 9][a] + (b - a)
}

fn triple_index(p: usize, q: usize, r: usize) -> usize {
    let mut t = [p, q, r];
    t.sort_unstable();
    let mut k = 0;
    for a in 0..4 {
        for b in a..4 {
            for c in b..4 {
                if [a, b, c] == t {
                    return k;
                }
                k += 1;
            }
        }
    }
    unreachable!()
}

const N_QUAD: usize = 100;
const N_CUBIC: usize = 200;

fn quad_coeff(params: &[Q], a: usize, b: usize, p: usize, r: usize) -> &Q {
    &params[pair_index(a, b) * 10 + pair_index(p, r)]
}

fn cubic_coeff(params: &[Q], a: usize, b: usize, p: usize, r: usize, s: usize) -> &Q {
    &params[pair_index(a, b) * 20 + triple_index(p, r, s)]
}

/// Curvature at the origin of `δ + Σ Q_{ab,pr} x^p x^r` (linear part).
fn r0_from_quadratic(params: &[Q]) -> RTensor {
    let mut t = RTensor::zeros(4);
    for idx in indices(4) {
        let (a, b, c, d) = (idx[0], idx[1], idx[2], idx[3]);
        let v = quad_coeff(params, a, d, b, c) + quad_coeff(params, b, c, a, d)
            - quad_coeff(params, b, d, a, c)
            - quad_coeff(params, a, c, b, d);
        t.set(&idx, v);
    }
    t
}

/// First derivative of the curvature at the origin contributed by the cubic
/// part `Σ C_{ab,prs} x^p x^r x^s`.
fn r1_from_cubic(params: &[Q]) -> RTensor {
    let three = q(3);
    let mut t = RTensor::zeros(5);
    for idx in indices(5) {
        let (a, b, c, d, e) = (idx[0], idx[1], idx[2], idx[3], idx[4]);
        let v = cubic_coeff(params, a, d, b, c, e) + cubic_coeff(params, b, c, a, d, e)
            - cubic_coeff(params, b, d, a, c, e)
            - cubic_coeff(params, a, c, b, d, e);
        t.set(&idx, v * &three);
    }
    t
}

fn ricci_derivative_of_cubic(params: &[Q], i: usize, j: usize, k: usize) -> Q {
    let mut s = Q::zero();
    for a in 0..4 {
        s += cubic_coeff(params, a, j, i, a, k) + cubic_coeff(params, i, a, a, j, k)
            - cubic_coeff(params, i, j, a, a, k)
            - cubic_coeff(params, a, a, i, j, k);
    }
    s * q(3)
}

fn constraints(params: &[Q], mode: RicciDerivativeMode) -> Vec<Q> {
    let mut out = Vec::new();
    match mode {
        RicciDerivativeMode::Free => {}
        RicciDerivativeMode::SymmetricPartZero => {
            for i in 0..4 {
                for j in i..4 {
                    for k in j..4 {
                        out.push(
                            ricci_derivative_of_cubic(params, i, j, k)
                                + ricci_derivative_of_cubic(params, j, k, i)
                                + ricci_derivative_of_cubic(params, k, i, j),
                        );
                    }
                }
            }
        }
        RicciDerivativeMode::AllZero => {
            for i in 0..4 {
                for j in i..4 {
                    for k in 0..4 {
                        out.push(ricci_derivative_of_cubic(params, i, j, k));
                    }
                }
            }
        }
    }
    out
}

/// A particular solution of `M x = b` with free variables set to zero.
pub fn solve_exact(mut m: Vec<Vec<Q>>, mut b: Vec<Q>) -> Option<Vec<Q>> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        b.swap(r, p);
        let inv = Q::one() / &m[r][c];
        for k in c..cols {
            m[r][k] = &m[r][k] * &inv;
        }
        b[r] = &b[r] * &inv;
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for k in c..cols {
                    let t = &f * &m[r][k];
                    m[i][k] -= t;
                }
                let t = &f * &b[r];
                b[i] -= t;
            }
        }
        pivots.push(c);
        r += 1;
    }
    if b[r..].iter().any(|v| !v.is_zero()) {
        return None;
    }
    let mut x = vec![Q::zero(); cols];
    for (row, &c) in pivots.iter().enumerate() {
        x[c] = b[row].clone();
    }
    Some(x)
}

fn project(params: Vec<Q>, mode: RicciDerivativeMode) -> Vec<Q> {
    if mode == RicciDerivativeMode::Free {
        return params;
    }
    let n = params.len();
    let rhs = constraints(&params, mode);
    let mut cols: Vec<Vec<Q>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut e = vec![Q::zero(); n];
        e[k] = Q::one();
        cols.push(constraints(&e, mode));
    }
    let m: Vec<Vec<Q>> = (0..rhs.len()).map(|i| (0..n).map(|k| cols[k][i].clone()).collect()).collect();
    let x = solve_exact(m, rhs).expect("constraint map is onto");
    params.into_iter().zip(x).map(|(p, c)| p - c).collect()
}

/// Random jet with the requested constraints; the conformal-normal flag is
/// set exactly when both conditions hold.
pub fn random_jet<R: Rng + ?Sized>(rng: &mut R, opts: &JetOptions) -> CurvatureJet {
    let draw = |rng: &mut R, n: usize| -> Vec<Q> { (0..n).map(|_| q(rng.random_range(-opts.range..=opts.range))).collect() };
    let quad = draw(rng, N_QUAD);
    let cubic = project(draw(rng, N_CUBIC), opts.ricci_derivative);
    let mut jet = CurvatureJet {
        r0: r0_from_quadratic(&quad),
        r1: r1_from_cubic(&cubic),
        r2: None,
        conformal_normal: false,
    };
    if opts.weyl_only {
        jet.r0 = weyl_part(&jet);
    }
    jet.conformal_normal = opts.weyl_only && opts.ricci_derivative != RicciDerivativeMode::Free;
    jet
}

pub fn random_conformal_normal_jet<R: Rng + ?Sized>(rng: &mut R) -> CurvatureJet {
    random_jet(rng, &JetOptions::conformal_normal())
}
