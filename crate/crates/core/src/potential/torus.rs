//! Flat 4-tori of side `L`: finite-mode fields `f(x) = Σ c_m e^{2πi m·x/L}`
//! and the Green's function of `Δ²` truncated to `|m_j| < N/2`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use super::PotentialError;
use crate::field::{BoxDomain, DerivativeSource, FieldError, Point, ScalarField};
use crate::jet::{Jet, MultiIndex};
use crate::stats::least_squares;

pub type Mode = [i32; 4];

fn neg(m: &Mode) -> Mode {
    m.map(|v| -v)
}

fn mode_sq(m: &Mode) -> f64 {
    m.iter().map(|&v| (v as f64) * (v as f64)).sum()
}

/// Real field with finitely many Fourier modes.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusSpectralField {
    pub side: f64,
    /// Modes satisfy `|m_j| < n/2`.
    pub n: usize,
    modes: BTreeMap<Mode, Complex64>,
}

impl TorusSpectralField {
    pub fn new(side: f64, n: usize) -> Result<Self, PotentialError> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(PotentialError::ModesTooFew { n, min: 2 });
        }
        Ok(TorusSpectralField {
            side,
            n,
            modes: BTreeMap::new(),
        })
    }

    pub fn half(&self) -> i32 {
        (self.n / 2) as i32
    }

    fn wavenumber(&self) -> f64 {
        2.0 * PI / self.side
    }

    /// Add `c e^{ik·x} + conj(c) e^{-ik·x}` (a single real term at `m = 0`).
    pub fn add_real_mode(&mut self, m: Mode, c: Complex64) -> Result<(), PotentialError> {
        let half = self.half();
        if m.iter().any(|v| v.abs() >= half) {
            return Err(PotentialError::ModeOutOfRange { mode: m, half });
        }
        if m == [0; 4] {
            *self.modes.entry(m).or_default() += Complex64::new(c.re, 0.0);
        } else {
            *self.modes.entry(m).or_default() += c;
            *self.modes.entry(neg(&m)).or_default() += c.conj();
        }
        Ok(())
    }

    /// Field from explicit coefficients; they must already be conjugate-symmetric.
    pub fn from_modes(side: f64, n: usize, modes: impl IntoIterator<Item = (Mode, Complex64)>) -> Result<Self, PotentialError> {
        let mut f = Self::new(side, n)?;
        let half = f.half();
        for (m, c) in modes {
            if m.iter().any(|v| v.abs() >= half) {
                return Err(PotentialError::ModeOutOfRange { mode: m, half });
            }
            *f.modes.entry(m).or_default() += c;
        }
        let defect = f.conjugate_defect();
        if defect > 1e-12 * f.max_coeff().max(1.0) {
            return Err(PotentialError::NotReal(defect));
        }
        Ok(f)
    }

    /// `amp · cos(k·x)`.
    pub fn cosine(side: f64, n: usize, m: Mode, amp: f64) -> Result<Self, PotentialError> {
        let mut f = Self::new(side, n)?;
        let c = if m == [0; 4] { amp } else { 0.5 * amp };
        f.add_real_mode(m, Complex64::new(c, 0.0))?;
        Ok(f)
    }

    /// Random real field with `count` conjugate pairs, `|m_j| ≤ max_mode`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, side: f64, n: usize, count: usize, max_mode: i32) -> Result<Self, PotentialError> {
        let mut f = Self::new(side, n)?;
        let max_mode = max_mode.min(f.half() - 1);
        let mut added = 0;
        while added < count {
            let m: Mode = std::array::from_fn(|_| rng.random_range(-max_mode..=max_mode));
            if m == [0; 4] || f.modes.contains_key(&m) {
                continue;
            }
            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            f.add_real_mode(m, c)?;
            added += 1;
        }
        Ok(f)
    }

    /// Spectral coefficients of `f` sampled on an `n_grid⁴` grid.
    pub fn from_samples(side: f64, n_grid: usize, f: impl Fn(&Point) -> f64 + Sync) -> Result<Self, PotentialError> {
        let total = n_grid.pow(4);
        let h = side / n_grid as f64;
        let mut data: Vec<Complex64> = (0..total)
            .into_par_iter()
            .map(|o| {
                let g = unflatten(o, n_grid);
                Complex64::new(f(&g.map(|v| v as f64 * h)), 0.0)
            })
            .collect();
        fft4(&mut data, n_grid, false);
        let scale = 1.0 / total as f64;
        let mut out = Self::new(side, n_grid)?;
        let half = out.half();
        for (o, c) in data.iter().enumerate() {
            let g = unflatten(o, n_grid);
            let m: Mode = g.map(|v| if v as i32 >= half { v as i32 - n_grid as i32 } else { v as i32 });
            if m.iter().any(|v| v.abs() >= half) {
                continue;
            }
            let c = c * scale;
            if c.norm() > 1e-15 {
                out.modes.insert(m, c);
            }
        }
        Ok(out)
    }

    pub fn modes(&self) -> impl Iterator<Item = (&Mode, &Complex64)> {
        self.modes.iter()
    }

    pub fn coefficient(&self, m: &Mode) -> Complex64 {
        self.modes.get(m).copied().unwrap_or_default()
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn max_mode(&self) -> i32 {
        self.modes.keys().flat_map(|m| m.iter().map(|v| v.abs())).max().unwrap_or(0)
    }

    fn max_coeff(&self) -> f64 {
        self.modes.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn conjugate_defect(&self) -> f64 {
        self.modes
            .iter()
            .map(|(m, c)| (c - self.coefficient(&neg(m)).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.coefficient(&[0; 4]).re
    }

    pub fn is_zero_mean(&self) -> bool {
        self.coefficient(&[0; 4]) == Complex64::default()
    }

    /// Multiply every coefficient by `mult(m)`; zero results are dropped.
    pub fn map_multiplier(&self, n: usize, mult: impl Fn(&Mode) -> f64) -> TorusSpectralField {
        let half = (n / 2) as i32;
        TorusSpectralField {
            side: self.side,
            n,
            modes: self
                .modes
                .iter()
                .filter(|(m, _)| m.iter().all(|v| v.abs() < half))
                .map(|(m, c)| (*m, c * mult(m)))
                .filter(|(_, c)| *c != Complex64::default())
                .collect(),
        }
    }

    pub fn laplacian(&self) -> TorusSpectralField {
        let k = self.wavenumber();
        self.map_multiplier(self.n, |m| -k * k * mode_sq(m))
    }

    pub fn bilaplacian(&self) -> TorusSpectralField {
        let k = self.wavenumber();
        self.map_multiplier(self.n, |m| (k * k * mode_sq(m)).powi(2))
    }

    pub fn eval(&self, x: &Point) -> f64 {
        let k = self.wavenumber();
        self.modes
            .iter()
            .map(|(m, c)| {
                let ph = k * (0..4).map(|j| m[j] as f64 * x[j]).sum::<f64>();
                c.re * ph.cos() - c.im * ph.sin()
            })
            .sum()
    }

    /// `∂^α f(x)`.
    pub fn partial(&self, x: &Point, alpha: &MultiIndex) -> f64 {
        let k = self.wavenumber();
        let deg: u32 = alpha.iter().map(|&a| a as u32).sum();
        let i_pow = Complex64::new(0.0, 1.0).powu(deg);
        self.modes
            .iter()
            .map(|(m, c)| {
                let ph = k * (0..4).map(|j| m[j] as f64 * x[j]).sum::<f64>();
                let poly: f64 = (0..4).map(|j| (k * m[j] as f64).powi(alpha[j] as i32)).product();
                (c * i_pow * Complex64::from_polar(poly, ph)).re
            })
            .sum()
    }

    /// Samples on the grid `x = L g / n_grid`, axis 0 slowest.
    pub fn to_grid(&self, n_grid: usize) -> Result<Vec<f64>, PotentialError> {
        let max_mode = self.max_mode();
        if 2 * max_mode as usize >= n_grid {
            return Err(PotentialError::GridTooCoarse { grid: n_grid, max_mode });
        }
        let mut data = vec![Complex64::default(); n_grid.pow(4)];
        for (m, c) in &self.modes {
            let g = m.map(|v| v.rem_euclid(n_grid as i32) as usize);
            data[flatten(&g, n_grid)] = *c;
        }
        fft4(&mut data, n_grid, true);
        Ok(data.iter().map(|c| c.re).collect())
    }

    /// `|mean of f² on the grid − Σ|c_m|²|`.
    pub fn parseval_defect(&self, n_grid: usize) -> Result<f64, PotentialError> {
        let grid = self.to_grid(n_grid)?;
        let lhs = grid.iter().map(|v| v * v).sum::<f64>() / grid.len() as f64;
        let rhs: f64 = self.modes.values().map(|c| c.norm_sqr()).sum();
        Ok((lhs - rhs).abs())
    }

    /// Grid samples with a header: `b"TSF1"`, `L` (f64), `n_grid` (u32), then
    /// row-major f64 values, all little-endian.
    pub fn export_binary(&self, n_grid: usize) -> Result<Vec<u8>, PotentialError> {
        let grid = self.to_grid(n_grid)?;
        let mut out = Vec::with_capacity(16 + 8 * grid.len());
        out.extend_from_slice(b"TSF1");
        out.extend_from_slice(&self.side.to_le_bytes());
        out.extend_from_slice(&(n_grid as u32).to_le_bytes());
        for v in grid {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }
}

impl ScalarField for TorusSpectralField {
    fn domain(&self) -> BoxDomain {
        BoxDomain::everywhere()
    }
    fn source(&self) -> DerivativeSource {
        DerivativeSource::Analytic
    }
    fn jet(&self, x: &Point, order: usize) -> Result<Jet, FieldError> {
        if order > crate::jet::MAX_ORDER {
            return Err(FieldError::InsufficientOrder {
                needed: order,
                available: crate::jet::MAX_ORDER,
            });
        }
        Ok(Jet::from_partials(order, |a| self.partial(x, a)))
    }
}

fn flatten(g: &[usize; 4], n: usize) -> usize {
    ((g[0] * n + g[1]) * n + g[2]) * n + g[3]
}

fn unflatten(mut o: usize, n: usize) -> [usize; 4] {
    let mut g = [0; 4];
    for k in (0..4).rev() {
        g[k] = o % n;
        o /= n;
    }
    g
}

/// Unnormalized 4-D DFT in place; `inverse` uses `e^{+2πi}`.
fn fft4(data: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let mut line = vec![Complex64::default(); n];
    for axis in 0..4 {
        let stride = n.pow(3 - axis as u32);
        for o in 0..data.len() {
            if !(o / stride).is_multiple_of(n) {
                continue;
            }
            for (k, slot) in line.iter_mut().enumerate() {
                *slot = data[o + k * stride];
            }
            fft.process(&mut line);
            for (k, v) in line.iter().enumerate() {
                data[o + k * stride] = *v;
            }
        }
    }
}

/// Which operator the Green's function inverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreenKernel {
    /// `Δ² G = δ − 1/L⁴`.
    Biharmonic,
    /// `−Δ G = δ − 1/L⁴`.
    Laplacian,
}

/// `G(ξ, ·)` for a source `ξ`, summed over `0 < |m_j| < N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGreen {
    pub side: f64,
    pub n: usize,
    pub kernel: GreenKernel,
    pub source: Point,
}

/// Fewest modes per axis accepted for the Green's function.
pub const MIN_GREEN_MODES: usize = 16;

/// Green's function of `Δ²` on the torus `[0, L)^4` with pole at `source`.
pub fn biharmonic_green_torus(n: usize, side: f64, source: Point) -> Result<TorusGreen, PotentialError> {
    TorusGreen::new(n, side, GreenKernel::Biharmonic, source)
}

impl TorusGreen {
    pub fn new(n: usize, side: f64, kernel: GreenKernel, source: Point) -> Result<Self, PotentialError> {
        if n < MIN_GREEN_MODES || !n.is_multiple_of(2) {
            return Err(PotentialError::ModesTooFew { n, min: MIN_GREEN_MODES });
        }
        Ok(TorusGreen { side, n, kernel, source })
    }

    pub fn half(&self) -> i32 {
        (self.n / 2) as i32
    }

    /// Fourier multiplier of the inverse operator at mode `m`.
    pub fn multiplier(&self, m: &Mode) -> f64 {
        let s = mode_sq(m);
        if s == 0.0 || m.iter().any(|v| v.abs() >= self.half()) {
            return 0.0;
        }
        let k2 = (2.0 * PI / self.side).powi(2) * s;
        match self.kernel {
            GreenKernel::Biharmonic => 1.0 / (k2 * k2),
            GreenKernel::Laplacian => 1.0 / k2,
        }
    }

    /// Fourier coefficient of `η ↦ G(ξ, η)`.
    pub fn coefficient(&self, m: &Mode) -> Complex64 {
        let k = 2.0 * PI / self.side;
        let ph = -k * (0..4).map(|j| m[j] as f64 * self.source[j]).sum::<f64>();
        Complex64::from_polar(self.multiplier(m) / self.side.powi(4), ph)
    }

    /// `G(ξ, η)`.
    pub fn value(&self, eta: &Point) -> f64 {
        let d: Point = std::array::from_fn(|j| eta[j] - self.source[j]);
        green_sum(self, &d)
    }

    /// `G(η, ξ)`, the same kernel with the arguments swapped.
    pub fn value_swapped(&self, eta: &Point) -> f64 {
        let d: Point = std::array::from_fn(|j| self.source[j] - eta[j]);
        green_sum(self, &d)
    }

    /// `∫ G(·, η) g(η) dη` as a field of the first argument.
    pub fn apply(&self, g: &TorusSpectralField) -> TorusSpectralField {
        g.map_multiplier(self.n, |m| self.multiplier(m))
    }

    /// `p ↦ Σ_{m·d = p} multiplier(m) / L⁴`, so that
    /// `G(ξ, ξ + s d) = Σ_p S(p) cos(2π s p / L)`.
    pub fn directional_series(&self, d: &Mode) -> DirectionalSeries {
        self.directional_series_weighted(d, |_| 1.0)
    }

    /// Mean of `G(ξ, ·)` over spheres of radius `delta`, along `d`.
    pub fn sphere_mean_series(&self, d: &Mode, delta: f64) -> DirectionalSeries {
        let h = self.half() as usize;
        let k = 2.0 * PI / self.side;
        let table: Vec<f64> = (0..=4 * h * h).map(|m2| sphere_mean_factor(k * (m2 as f64).sqrt() * delta)).collect();
        self.directional_series_weighted(d, |m2| table[m2])
    }

    fn directional_series_weighted(&self, d: &Mode, weight: impl Fn(usize) -> f64 + Sync) -> DirectionalSeries {
        let h = self.half();
        let vol = self.side.powi(4);
        let partial: Vec<BTreeMap<i64, f64>> = (-h + 1..h)
            .into_par_iter()
            .map(|m0| {
                let mut acc = BTreeMap::new();
                for m1 in -h + 1..h {
                    for m2 in -h + 1..h {
                        for m3 in -h + 1..h {
                            let m = [m0, m1, m2, m3];
                            let w = self.multiplier(&m);
                            if w == 0.0 {
                                continue;
                            }
                            let p: i64 = (0..4).map(|j| m[j] as i64 * d[j] as i64).sum();
                            *acc.entry(p).or_insert(0.0) += w * weight(mode_sq(&m) as usize) / vol;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut coeffs = BTreeMap::new();
        for acc in partial {
            for (p, v) in acc {
                *coeffs.entry(p).or_insert(0.0) += v;
            }
        }
        DirectionalSeries {
            side: self.side,
            direction: *d,
            coeffs,
        }
    }
}

/// Mean of `e^{ik·x}` over the unit 3-sphere scaled to `|k| δ = z`: `2 J₁(z)/z`.
pub fn sphere_mean_factor(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        return 1.0 - z * z / 8.0;
    }
    // J₁(z) = (1/2π) ∫ cos(τ − z sin τ) dτ, exact to roundoff by the periodic trapezoid rule.
    let n = 64 + 2 * z.abs().ceil() as usize;
    let j1 = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            (t - z * t.sin()).cos()
        })
        .sum::<f64>()
        / n as f64;
    2.0 * j1 / z
}

fn green_sum(g: &TorusGreen, d: &Point) -> f64 {
    let h = g.half();
    let k = 2.0 * PI / g.side;
    let phase: Vec<Vec<Complex64>> = (0..4)
        .map(|j| (-h + 1..h).map(|m| Complex64::from_polar(1.0, k * m as f64 * d[j])).collect())
        .collect();
    let span = (2 * h - 1) as usize;
    let total: f64 = (0..span)
        .into_par_iter()
        .map(|i0| {
            let mut s = 0.0;
            for i1 in 0..span {
                let p01 = phase[0][i0] * phase[1][i1];
                for i2 in 0..span {
                    let p012 = p01 * phase[2][i2];
                    for i3 in 0..span {
                        let m = [i0 as i32 - h + 1, i1 as i32 - h + 1, i2 as i32 - h + 1, i3 as i32 - h + 1];
                        let w = g.multiplier(&m);
                        if w != 0.0 {
                            s += w * (p012 * phase[3][i3]).re;
                        }
                    }
                }
            }
            s
        })
        .sum();
    total / g.side.powi(4)
}

/// The Green's function restricted to a lattice direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalSeries {
    pub side: f64,
    pub direction: Mode,
    pub coeffs: BTreeMap<i64, f64>,
}

impl DirectionalSeries {
    /// `G(ξ, ξ + r d/|d|)`.
    pub fn at_distance(&self, r: f64) -> f64 {
        let s = r / mode_sq(&self.direction).sqrt();
        self.coeffs
            .iter()
            .map(|(&p, &c)| c * (2.0 * PI * s * p as f64 / self.side).cos())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaSample {
    pub r: f64,
    pub direction: Mode,
    pub value: f64,
}

/// `G ≈ c_log log r + β̂` near the pole.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenDecomposition {
    pub c_log: f64,
    pub window: [f64; 2],
    /// RMS of `G − c_log log r − β̂`.
    pub rms: f64,
    /// Constant term of `β̂`.
    pub beta_at_pole: f64,
    pub beta_samples: Vec<BetaSample>,
    pub n: usize,
}

#[derive(Serialize)]
struct FitRecord<'a> {
    c_log: f64,
    window: &'a [f64; 2],
    rms: f64,
}

impl GreenDecomposition {
    /// `{c_log, window, rms}`.
    pub fn json_record(&self) -> serde_json::Value {
        serde_json::to_value(FitRecord {
            c_log: self.c_log,
            window: &self.window,
            rms: self.rms,
        })
        .expect("plain record")
    }

    /// The log singularity dominates when the residual is small against
    /// the variation of `c_log log r` across the window.
    pub fn is_consistent(&self) -> bool {
        self.rms <= LOG_FIT_RMS_LIMIT * self.c_log.abs() * (self.window[1] / self.window[0]).ln()
    }
}

/// Relative residual allowed by [`GreenDecomposition::is_consistent`].
pub const LOG_FIT_RMS_LIMIT: f64 = 1e-2;

/// Axes and face diagonals of the lattice.
pub fn fit_directions() -> Vec<Mode> {
    let mut dirs = Vec::new();
    for i in 0..4 {
        let mut d = [0; 4];
        d[i] = 1;
        dirs.push(d);
    }
    for i in 0..4 {
        for j in i + 1..4 {
            let mut d = [0; 4];
            d[i] = 1;
            d[j] = 1;
            dirs.push(d);
        }
    }
    dirs
}

/// Default window `[4L/N, L/8]`.
pub fn default_fit_window(g: &TorusGreen) -> (f64, f64) {
    (4.0 * g.side / g.n as f64, g.side / 8.0)
}

/// Radius of the sphere means fitted by [`fit_log_singularity`], in grid spacings.
pub const FIT_SMOOTHING: f64 = 2.0;

/// Least squares of `G` against `log r`, `1` and the ten quadratic
/// monomials `r² d̂_p d̂_q` along axis and face-diagonal rays.
///
/// The samples are means of `G` over spheres of radius `FIT_SMOOTHING · L/N`,
/// which damps the ringing of the sharp spectral cutoff. The model columns
/// are averaged the same way, exactly: `log r` becomes `log r + δ²/(4r²)`
/// and `x_p x_q` picks up `δ² δ_pq / 4`.
pub fn fit_log_singularity(g: &TorusGreen, window: Option<(f64, f64)>) -> Result<GreenDecomposition, PotentialError> {
    let (r_min, r_max) = window.unwrap_or_else(|| default_fit_window(g));
    if !(r_min > 0.0 && r_max > r_min) {
        return Err(PotentialError::BadWindow(r_min, r_max));
    }
    let spacing = g.side / g.n as f64;
    if r_min < 2.0 * spacing {
        return Err(PotentialError::WindowUnresolved { r_min, spacing });
    }
    let delta = FIT_SMOOTHING * spacing;
    let n_r = 48;
    let radii: Vec<f64> = (0..n_r).map(|k| r_min * (r_max / r_min).powf(k as f64 / (n_r - 1) as f64)).collect();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut tags = Vec::new();
    // The truncated kernel has the symmetry of the cube, so rays that
    // differ by coordinate permutations and sign flips carry the same series.
    let mut cache: BTreeMap<Mode, DirectionalSeries> = BTreeMap::new();
    for d in fit_directions() {
        let mut key = d.map(|v| v.abs());
        key.sort_unstable();
        let series = cache.entry(key).or_insert_with(|| g.sphere_mean_series(&key, delta));
        let norm = mode_sq(&d).sqrt();
        let u: Vec<f64> = d.iter().map(|&v| v as f64 / norm).collect();
        for &r in &radii {
            let mut row = vec![r.ln() + delta * delta / (4.0 * r * r), 1.0];
            for p in 0..4 {
                for q in p..4 {
                    let (f, trace) = if p == q { (1.0, delta * delta / 4.0) } else { (2.0, 0.0) };
                    row.push(f * r * r * u[p] * u[q] + trace);
                }
            }
            rows.push(row);
            rhs.push(series.at_distance(r));
            tags.push((r, d));
        }
    }
    let coef = least_squares(&rows, &rhs).ok_or(PotentialError::FitFailed)?;
    let mut ss = 0.0;
    let mut beta_samples = Vec::with_capacity(rows.len());
    for ((row, b), (r, d)) in rows.iter().zip(&rhs).zip(&tags) {
        let pred: f64 = row.iter().zip(&coef).map(|(a, c)| a * c).sum();
        ss += (b - pred).powi(2);
        beta_samples.push(BetaSample {
            r: *r,
            direction: *d,
            value: b - coef[0] * r.ln(),
        });
    }
    Ok(GreenDecomposition {
        c_log: coef[0],
        window: [r_min, r_max],
        rms: (ss / rows.len() as f64).sqrt(),
        beta_at_pole: coef[1],
        beta_samples,
        n: g.n,
    })
}

/// `max |f(ξ) − f̄ − ∫G(ξ,η) Δ²f(η) dη|` over an `n_grid⁴` grid.
pub fn representation_check(f: &TorusSpectralField, n_grid: usize) -> Result<f64, PotentialError> {
    let n = f.n.max(MIN_GREEN_MODES);
    let g = TorusGreen::new(n, f.side, GreenKernel::Biharmonic, [0.0; 4])?;
    let rep = g.apply(&f.bilaplacian());
    let h = f.side / n_grid as f64;
    let worst = (0..n_grid.pow(4))
        .into_par_iter()
        .map(|o| {
            let x = unflatten(o, n_grid).map(|v| v as f64 * h);
            (f.eval(&x) - f.mean() - rep.eval(&x)).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// `φ = 2 ∫ G(·, η) b(η) dη`.
pub fn regular_part_field(b: &TorusSpectralField) -> TorusSpectralField {
    let n = b.n.max(MIN_GREEN_MODES);
    let g = TorusGreen {
        side: b.side,
        n,
        kernel: GreenKernel::Biharmonic,
        source: [0.0; 4],
    };
    g.apply(b).map_multiplier(n, |_| 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_round_trip() {
        let mut rng = rand::rng();
        let f = TorusSpectralField::random(&mut rng, 3.0, 8, 5, 2).unwrap();
        let grid = f.to_grid(8).unwrap();
        let g = TorusSpectralField::from_samples(3.0, 8, |x| f.eval(x)).unwrap();
        assert!(f.modes().all(|(m, c)| (g.coefficient(m) - c).norm() < 1e-12));
        let h = 3.0 / 8.0;
        assert!((grid[flatten(&[1, 2, 3, 4], 8)] - f.eval(&[h, 2.0 * h, 3.0 * h, 4.0 * h])).abs() < 1e-12);
    }

    #[test]
    fn flatten_inverts() {
        for o in [0, 17, 4095] {
            assert_eq!(flatten(&unflatten(o, 8), 8), o);
        }
    }
}
