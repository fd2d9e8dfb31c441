//! Exact polynomials in four variables with rational coefficients.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn q_to_f64(v: &Q) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Monomial exponent vector, ordered by total degree and then
/// lexicographically with higher powers of earlier variables first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mono(pub [u8; 4]);

impl Mono {
    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn var(i: usize) -> Mono {
        let mut e = [0; 4];
        e[i] = 1;
        Mono(e)
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Mono, Q>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: Q) -> Self {
        let mut p = Poly::zero();
        p.add_term(Mono([0; 4]), c);
        p
    }

    pub fn one() -> Self {
        Self::constant(Q::one())
    }

    /// The coordinate `ξ^i`.
    pub fn var(i: usize) -> Self {
        let mut p = Poly::zero();
        p.add_term(Mono::var(i), Q::one());
        p
    }

    pub fn monomial(exps: [u8; 4], c: Q) -> Self {
        let mut p = Poly::zero();
        p.add_term(Mono(exps), c);
        p
    }

    pub fn add_term(&mut self, m: Mono, c: Q) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(m).or_insert_with(Q::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Q)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exps: [u8; 4]) -> Q {
        self.terms.get(&Mono(exps)).cloned().unwrap_or_else(Q::zero)
    }

    /// Largest degree with a nonzero coefficient.
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(|m| m.degree()).max()
    }

    /// Smallest degree with a nonzero coefficient.
    pub fn low_degree(&self) -> Option<usize> {
        self.terms.keys().map(|m| m.degree()).min()
    }

    /// Part of exact degree `d`.
    pub fn homogeneous(&self, d: usize) -> Poly {
        Poly {
            terms: self.terms.iter().filter(|(m, _)| m.degree() == d).map(|(m, c)| (*m, c.clone())).collect(),
        }
    }

    /// Drop terms of degree above `d`.
    pub fn truncate(&self, d: usize) -> Poly {
        Poly {
            terms: self.terms.iter().filter(|(m, _)| m.degree() <= d).map(|(m, c)| (*m, c.clone())).collect(),
        }
    }

    pub fn scale(&self, c: &Q) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, v)| (*m, v * c)).collect(),
        }
    }

    pub fn deriv(&self, i: usize) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            if m.0[i] == 0 {
                continue;
            }
            let mut e = m.0;
            let k = e[i];
            e[i] -= 1;
            out.add_term(Mono(e), c * q(k as i64));
        }
        out
    }

    /// Product truncated at degree `max_deg`.
    pub fn mul_trunc(&self, other: &Poly, max_deg: usize) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if ma.degree() + mb.degree() > max_deg {
                    continue;
                }
                let e: [u8; 4] = std::array::from_fn(|k| ma.0[k] + mb.0[k]);
                out.add_term(Mono(e), ca * cb);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64; 4]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| q_to_f64(c) * (0..4).map(|k| x[k].powi(m.0[k] as i32)).product::<f64>())
            .sum()
    }

    /// Evaluate as a Taylor jet in the coordinate jets `x`.
    pub fn eval_jet(&self, x: &[crate::jet::Jet; 4]) -> crate::jet::Jet {
        let n = x[0].order();
        let mut acc = crate::jet::Jet::constant(n, 0.0);
        for (m, c) in &self.terms {
            let mut t = crate::jet::Jet::constant(n, q_to_f64(c));
            for k in 0..4 {
                for _ in 0..m.0[k] {
                    t *= x[k];
                }
            }
            acc += t;
        }
        acc
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| q_to_f64(c).abs()).fold(0.0, f64::max)
    }

    /// Substitute `ξ^k -> ξ^{perm[k]}`.
    pub fn permute_vars(&self, perm: &[usize; 4]) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut e = [0u8; 4];
            for k in 0..4 {
                e[perm[k]] = m.0[k];
            }
            out.add_term(Mono(e), c.clone());
        }
        out
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(*m, c.clone());
        }
        out
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(*m, -c.clone());
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (*m, -c.clone())).collect(),
        }
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        self.mul_trunc(rhs, usize::MAX)
    }
}

fn fmt_mono(m: &Mono) -> String {
    let mut parts = Vec::new();
    for k in 0..4 {
        match m.0[k] {
            0 => {}
            1 => parts.push(format!("x{}", k + 1)),
            e => parts.push(format!("x{}^{}", k + 1, e)),
        }
    }
    parts.join("*")
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            let mono = fmt_mono(m);
            if mono.is_empty() {
                write!(f, "{a}")?;
            } else if a.is_one() {
                write!(f, "{mono}")?;
            } else {
                write!(f, "{a}*{mono}")?;
            }
        }
        Ok(())
    }
}
