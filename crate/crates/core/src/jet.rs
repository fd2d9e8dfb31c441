//! Truncated multivariate Taylor arithmetic in four variables.
//!
//! A [`Jet`] carries the Taylor coefficients of a smooth function at a base
//! point up to a tracked order. Arithmetic truncates to the smaller order of
//! the operands; differentiation lowers the order by one.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::LazyLock;

/// Number of independent variables.
pub const DIM: usize = 4;
/// Highest supported order.
pub const MAX_ORDER: usize = 4;
/// Number of monomials of degree at most [`MAX_ORDER`] in [`DIM`] variables.
pub const NCOEF: usize = 70;

/// Multi-index of a monomial.
pub type MultiIndex = [u8; DIM];

struct Table {
    monos: Vec<MultiIndex>,
    lookup: Vec<u16>,
    len_upto: [usize; MAX_ORDER + 1],
    mul: Vec<(u16, u16, u16)>,
    mul_end: [usize; MAX_ORDER + 1],
    deriv: [Vec<(u16, u16, f64)>; DIM],
    deriv_end: [[usize; MAX_ORDER + 1]; DIM],
    factorial: Vec<f64>,
}

fn degree(a: &MultiIndex) -> usize {
    a.iter().map(|&e| e as usize).sum()
}

fn encode(a: &MultiIndex) -> usize {
    a.iter().fold(0, |acc, &e| acc * (MAX_ORDER + 1) + e as usize)
}

static TABLE: LazyLock<Table> = LazyLock::new(|| {
    let mut monos = Vec::with_capacity(NCOEF);
    let mut len_upto = [0; MAX_ORDER + 1];
    for d in 0..=MAX_ORDER {
        let mut layer = Vec::new();
        for a in 0..=d {
            for b in 0..=d - a {
                for c in 0..=d - a - b {
                    let e = d - a - b - c;
                    layer.push([a as u8, b as u8, c as u8, e as u8]);
                }
            }
        }
        layer.sort_by(|x, y| y.cmp(x));
        monos.extend(layer);
        len_upto[d] = monos.len();
    }
    assert_eq!(monos.len(), NCOEF);
    let mut lookup = vec![u16::MAX; (MAX_ORDER + 1).pow(DIM as u32)];
    for (i, m) in monos.iter().enumerate() {
        lookup[encode(m)] = i as u16;
    }
    let mut mul = Vec::new();
    let mut mul_end = [0; MAX_ORDER + 1];
    for d in 0..=MAX_ORDER {
        for (i, mi) in monos.iter().enumerate() {
            for (j, mj) in monos.iter().enumerate() {
                if degree(mi) + degree(mj) != d {
                    continue;
                }
                let mut s = [0u8; DIM];
                for v in 0..DIM {
                    s[v] = mi[v] + mj[v];
                }
                mul.push((i as u16, j as u16, lookup[encode(&s)]));
            }
        }
        mul_end[d] = mul.len();
    }
    let mut deriv: [Vec<(u16, u16, f64)>; DIM] = Default::default();
    let mut deriv_end = [[0; MAX_ORDER + 1]; DIM];
    for v in 0..DIM {
        for d in 0..=MAX_ORDER {
            for (i, m) in monos.iter().enumerate() {
                if degree(m) != d + 1 || m[v] == 0 {
                    continue;
                }
                let mut t = *m;
                t[v] -= 1;
                deriv[v].push((i as u16, lookup[encode(&t)], m[v] as f64));
            }
            deriv_end[v][d] = deriv[v].len();
        }
    }
    let mut factorial = vec![1.0; MAX_ORDER + 2];
    for k in 1..factorial.len() {
        factorial[k] = factorial[k - 1] * k as f64;
    }
    Table {
        monos,
        lookup,
        len_upto,
        mul,
        mul_end,
        deriv,
        deriv_end,
        factorial,
    }
});

/// Index of a monomial in the coefficient array.
pub fn mono_index(alpha: &MultiIndex) -> usize {
    assert!(degree(alpha) <= MAX_ORDER, "multi-index degree exceeds MAX_ORDER");
    TABLE.lookup[encode(alpha)] as usize
}

/// All multi-indices of total degree at most `order`, grouped by degree.
pub fn multi_indices(order: usize) -> &'static [MultiIndex] {
    &TABLE.monos[..TABLE.len_upto[order.min(MAX_ORDER)]]
}

fn alpha_factorial(alpha: &MultiIndex) -> f64 {
    alpha.iter().map(|&e| TABLE.factorial[e as usize]).product()
}

/// Truncated Taylor expansion of a scalar function of four variables.
#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    order: u8,
    c: [f64; NCOEF],
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("coeffs", &self.coeffs())
            .finish()
    }
}

impl Jet {
    /// Constant function.
    pub fn constant(order: usize, v: f64) -> Self {
        assert!(order <= MAX_ORDER);
        let mut c = [0.0; NCOEF];
        c[0] = v;
        Jet {
            order: order as u8,
            c,
        }
    }

    /// Coordinate function `x_i` expanded about `x0`.
    pub fn variable(order: usize, i: usize, x0: f64) -> Self {
        let mut j = Self::constant(order, x0);
        if order >= 1 {
            let mut e = [0u8; DIM];
            e[i] = 1;
            j.c[mono_index(&e)] = 1.0;
        }
        j
    }

    /// The four coordinate functions about a point.
    pub fn coords(order: usize, x: &[f64; DIM]) -> [Jet; DIM] {
        std::array::from_fn(|i| Self::variable(order, i, x[i]))
    }

    /// Build a jet from its partial derivatives.
    pub fn from_partials(order: usize, mut partial: impl FnMut(&MultiIndex) -> f64) -> Self {
        let mut j = Self::constant(order, 0.0);
        for (k, a) in multi_indices(order).iter().enumerate() {
            j.c[k] = partial(a) / alpha_factorial(a);
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order as usize
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Active Taylor coefficients.
    pub fn coeffs(&self) -> &[f64] {
        &self.c[..TABLE.len_upto[self.order()]]
    }

    /// Taylor coefficient of the monomial `alpha`.
    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        assert!(degree(alpha) <= self.order(), "coefficient beyond jet order");
        self.c[mono_index(alpha)]
    }

    /// Partial derivative `∂^alpha` at the base point.
    pub fn partial(&self, alpha: &MultiIndex) -> f64 {
        self.coeff(alpha) * alpha_factorial(alpha)
    }

    pub fn gradient(&self) -> [f64; DIM] {
        std::array::from_fn(|i| {
            let mut e = [0u8; DIM];
            e[i] = 1;
            self.partial(&e)
        })
    }

    pub fn hessian(&self) -> [[f64; DIM]; DIM] {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut e = [0u8; DIM];
                e[i] += 1;
                e[j] += 1;
                self.partial(&e)
            })
        })
    }

    /// Drop coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order());
        let mut out = Self::constant(order, 0.0);
        let n = TABLE.len_upto[order];
        out.c[..n].copy_from_slice(&self.c[..n]);
        out
    }

    /// Partial derivative with respect to variable `i`; the order drops by one.
    pub fn deriv(&self, i: usize) -> Self {
        assert!(self.order > 0, "cannot differentiate an order-0 jet");
        let order = self.order() - 1;
        let mut out = Self::constant(order, 0.0);
        out.c[0] = 0.0;
        let t = &TABLE;
        for &(src, dst, f) in &t.deriv[i][..t.deriv_end[i][order]] {
            out.c[dst as usize] += f * self.c[src as usize];
        }
        out
    }

    /// Euclidean Laplacian; the order drops by two.
    pub fn flat_laplacian(&self) -> Self {
        let mut acc = Self::constant(self.order() - 2, 0.0);
        for i in 0..DIM {
            acc += self.deriv(i).deriv(i);
        }
        acc
    }

    /// Evaluate `f(self)` given `derivs[k] = f^{(k)}(self.value())`.
    pub fn compose(&self, derivs: &[f64]) -> Self {
        let n = self.order();
        assert!(derivs.len() > n, "not enough derivatives for composition");
        let mut delta = *self;
        delta.c[0] = 0.0;
        let f = &TABLE.factorial;
        let mut r = Self::constant(n, derivs[n] / f[n]);
        for k in (0..n).rev() {
            r *= delta;
            r.c[0] += derivs[k] / f[k];
        }
        r
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&[e; MAX_ORDER + 1])
    }

    pub fn ln(&self) -> Self {
        let a = self.value();
        let mut d = [a.ln(), 0.0, 0.0, 0.0, 0.0];
        let mut p = 1.0 / a;
        for (k, slot) in d.iter_mut().enumerate().skip(1) {
            *slot = p;
            p *= -(k as f64) / a;
        }
        self.compose(&d)
    }

    pub fn powf(&self, s: f64) -> Self {
        let a = self.value();
        let mut d = [0.0; MAX_ORDER + 1];
        let mut coef = 1.0;
        for (k, slot) in d.iter_mut().enumerate() {
            *slot = coef * a.powf(s - k as f64);
            coef *= s - k as f64;
        }
        self.compose(&d)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Self {
        self.powf(-1.0)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose(&[s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose(&[c, -s, -c, s, c])
    }

    /// Integer power by repeated multiplication.
    pub fn powi(&self, k: i32) -> Self {
        if k < 0 {
            return self.powi(-k).recip();
        }
        let mut acc = Self::constant(self.order(), 1.0);
        for _ in 0..k {
            acc *= *self;
        }
        acc
    }

    pub fn sqr(&self) -> Self {
        *self * *self
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let n = TABLE.len_upto[order as usize];
        let mut out = Jet {
            order,
            c: [0.0; NCOEF],
        };
        for k in 0..n {
            out.c[k] = self.c[k] + rhs.c[k];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for v in self.c.iter_mut() {
            *v = -*v;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut out = Jet {
            order,
            c: [0.0; NCOEF],
        };
        let t = &TABLE;
        for &(i, j, k) in &t.mul[..t.mul_end[order as usize]] {
            out.c[k as usize] += self.c[i as usize] * rhs.c[j as usize];
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for v in self.c.iter_mut() {
            *v *= rhs;
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        (-rhs) + self
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self = *self - rhs;
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, rhs: f64) {
        *self = *self * rhs;
    }
}
