//! Quadrature rules on intervals, the unit 3-sphere and balls in R^4.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

/// One-dimensional rule as node/weight pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    /// Gauss–Legendre rule with `n` nodes on `[a, b]`.
    pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Self {
        let n = NonZeroUsize::new(n.max(1)).unwrap();
        let gl = GaussLegendre::new(n);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut pairs: Vec<(f64, f64)> = gl
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (mid + half * x, half * w))
            .collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        Rule1D {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Composite Gauss–Legendre over consecutive breakpoints.
    pub fn composite(breaks: &[f64], n: usize) -> Self {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in breaks.windows(2) {
            let r = Self::gauss_legendre(n, w[0], w[1]);
            nodes.extend(r.nodes);
            weights.extend(r.weights);
        }
        Rule1D { nodes, weights }
    }

    /// Composite Gauss–Legendre on geometrically growing panels.
    pub fn geometric(a: f64, b: f64, first: f64, n: usize) -> Self {
        let mut breaks = vec![a];
        let mut w = first.max(1e-300);
        let mut x = a;
        while x + w < b {
            x += w;
            breaks.push(x);
            w *= 2.0;
        }
        if (b - x) < 0.5 * w.min(b - a) && breaks.len() > 1 {
            breaks.pop();
        }
        breaks.push(b);
        Self::composite(&breaks, n)
    }

    /// Periodic trapezoid rule with `n` nodes on `[0, 2π)`.
    pub fn periodic(n: usize) -> Self {
        let h = 2.0 * PI / n as f64;
        Rule1D {
            nodes: (0..n).map(|k| (k as f64 + 0.5) * h).collect(),
            weights: vec![h; n],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Product rule on the unit 3-sphere in Hopf coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct S3Rule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

impl S3Rule {
    /// `n_s` Gauss nodes in `sin²η`, `n_phi` trapezoid nodes per angle.
    pub fn new(n_s: usize, n_phi: usize) -> Self {
        let rs = Rule1D::gauss_legendre(n_s, 0.0, 1.0);
        let rp = Rule1D::periodic(n_phi);
        let mut points = Vec::with_capacity(n_s * n_phi * n_phi);
        let mut weights = Vec::with_capacity(points.capacity());
        for (s, ws) in rs.iter() {
            let (c, sn) = ((1.0 - s).sqrt(), s.sqrt());
            for (p1, w1) in rp.iter() {
                for (p2, w2) in rp.iter() {
                    points.push([c * p1.cos(), c * p1.sin(), sn * p2.cos(), sn * p2.sin()]);
                    weights.push(0.5 * ws * w1 * w2);
                }
            }
        }
        S3Rule { points, weights }
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Polar product rule for a ball or shell about `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

impl PolarRule {
    pub fn new(center: [f64; 4], radial: &Rule1D, sphere: &S3Rule) -> Self {
        let mut points = Vec::with_capacity(radial.len() * sphere.len());
        let mut weights = Vec::with_capacity(points.capacity());
        for (r, wr) in radial.iter() {
            let jac = wr * r * r * r;
            for (om, wo) in sphere.points.iter().zip(&sphere.weights) {
                points.push(std::array::from_fn(|i| center[i] + r * om[i]));
                weights.push(jac * wo);
            }
        }
        PolarRule { points, weights }
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64; 4]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

/// Volume of the unit 3-sphere.
pub const S3_AREA: f64 = 2.0 * PI * PI;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s3_weights_sum_to_area() {
        let r = S3Rule::new(6, 8);
        assert!((r.total_weight() - S3_AREA).abs() < 1e-12);
    }

    #[test]
    fn s3_integrates_quadratic_moments() {
        let r = S3Rule::new(6, 8);
        for i in 0..4 {
            let m: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[i] * p[i]).sum();
            assert!((m - S3_AREA / 4.0).abs() < 1e-12);
            let q: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[i].powi(4)).sum();
            // ∫ x_i^4 = 3/(4·6)·|S³|
            assert!((q - S3_AREA * 3.0 / 24.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ball_volume() {
        let r = PolarRule::new([0.0; 4], &Rule1D::gauss_legendre(4, 0.0, 2.0), &S3Rule::new(2, 2));
        let v = r.integrate(|_| 1.0);
        assert!((v - PI * PI / 2.0 * 16.0).abs() < 1e-10);
    }

    #[test]
    fn geometric_panels_cover_interval() {
        let r = Rule1D::geometric(0.0, 100.0, 0.01, 8);
        assert!((r.integrate(|x| x) - 5000.0).abs() < 1e-8);
    }
}
