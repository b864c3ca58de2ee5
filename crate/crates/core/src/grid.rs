//! Uniform periodic grid, real fields sampled on it, and the Fourier machinery
//! (derivatives, multipliers, Sobolev norms) every other module builds on.
//!
//! Conventions:
//! - the torus is `[0, L)` sampled at `x_j = j * dx`, `dx = L / M`;
//! - the transform index `k` maps to the integer mode `k` for `k < M/2` and to
//!   `k - M` otherwise, so the single Nyquist mode is `-M/2`;
//! - `xi_k = 2 pi k / L`;
//! - norms are normalised so that `s = 0` gives the continuum `L^2(0, L)` norm.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid on `[0, L)` with `M` points (a power of two, at least 32).
#[derive(Clone)]
pub struct Grid {
    length: f64,
    points: usize,
    plans: Arc<Plans>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("length", &self.length)
            .field("points", &self.points)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.length == other.length && self.points == other.points
    }
}

impl Grid {
    pub fn new(length: f64, points: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if points < 32 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points must be a power of two >= 32, got {points}"
            )));
        }
        let mut planner = FftPlanner::new();
        let plans = Plans {
            forward: planner.plan_fft_forward(points),
            inverse: planner.plan_fft_inverse(points),
        };
        Ok(Self {
            length,
            points,
            plans: Arc::new(plans),
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dx(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.x(j)).collect()
    }

    /// Signed integer mode of transform index `k`.
    pub fn mode(&self, k: usize) -> i64 {
        let m = self.points as i64;
        let k = k as i64;
        if k < m / 2 {
            k
        } else {
            k - m
        }
    }

    pub fn wavenumber(&self, k: usize) -> f64 {
        2.0 * PI * self.mode(k) as f64 / self.length
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.wavenumber(k)).collect()
    }

    pub fn nyquist_index(&self) -> usize {
        self.points / 2
    }

    /// Largest resolved `|xi|`, attained by the Nyquist mode.
    pub fn max_wavenumber(&self) -> f64 {
        PI * self.points as f64 / self.length
    }

    /// Continuum `L^2` weight: `int |f|^2 = weight * sum |f_hat_k|^2`.
    pub fn parseval_weight(&self) -> f64 {
        self.length / (self.points as f64 * self.points as f64)
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.points);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.plans.forward.process(&mut buf);
        buf
    }

    /// Inverse transform, keeping the real part and applying the `1/M` factor.
    pub fn inverse(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        debug_assert_eq!(spectrum.len(), self.points);
        self.plans.inverse.process(&mut spectrum);
        let scale = 1.0 / self.points as f64;
        spectrum.into_iter().map(|c| c.re * scale).collect()
    }
}

/// Real-valued function sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.points() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values but grid has {} points",
                values.len(),
                grid.points()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at index {j}")));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_raw(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.points());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_raw(grid, vec![0.0; grid.points()])
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self::from_raw(grid, vec![c; grid.points()])
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.points()).map(|j| f(grid.x(j))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(j) => Err(Error::NonFinite(format!("{what} at index {j}"))),
            None => Ok(()),
        }
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Field::from_raw(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a - b)
    }

    /// Pointwise product (no dealiasing).
    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Trapezoid (= rectangle, on the torus) quadrature of the field.
    pub fn integral(&self) -> f64 {
        self.grid.dx() * self.values.iter().sum::<f64>()
    }

    /// Continuum `L^2` inner product by trapezoid quadrature.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self.grid.dx() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.dx() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        self.grid.forward(&self.values)
    }
}

/// Applies a complex symbol `m(k, xi)` (transform index, wavenumber) and returns the real part.
pub(crate) fn apply_symbol(f: &Field, symbol: impl Fn(usize, f64) -> Complex64) -> Field {
    let grid = f.grid();
    let mut spec = f.spectrum();
    for (k, c) in spec.iter_mut().enumerate() {
        *c *= symbol(k, grid.wavenumber(k));
    }
    Field::from_raw(grid, grid.inverse(spec))
}

/// `d^order f / dx^order` by multiplication with `(i xi)^order`. The Nyquist
/// coefficient is dropped for odd orders so the result stays real.
pub fn spectral_derivative(f: &Field, order: u32) -> Result<Field> {
    if order == 0 {
        return Err(Error::InvalidParameter("derivative order must be >= 1".into()));
    }
    f.ensure_finite("spectral_derivative input")?;
    Ok(derivative_unchecked(f, order))
}

pub(crate) fn derivative_unchecked(f: &Field, order: u32) -> Field {
    let nyq = f.grid().nyquist_index();
    let odd = order % 2 == 1;
    apply_symbol(f, |k, xi| {
        if odd && k == nyq {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, xi).powu(order)
        }
    })
}

/// First derivative, the workhorse of the right-hand sides.
pub(crate) fn dx(f: &Field) -> Field {
    derivative_unchecked(f, 1)
}

/// Applies a real Fourier multiplier `m(xi)`. For a non-even symbol the real
/// part of the result corresponds to the even part of `m`.
pub fn fourier_multiplier_apply(f: &Field, m: impl Fn(f64) -> f64) -> Result<Field> {
    f.ensure_finite("fourier_multiplier_apply input")?;
    let grid = f.grid();
    let symbol: Vec<f64> = grid.wavenumbers().into_iter().map(&m).collect();
    if let Some(k) = symbol.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "multiplier at xi = {}",
            grid.wavenumber(k)
        )));
    }
    Ok(apply_symbol(f, |k, _| Complex64::new(symbol[k], 0.0)))
}

/// `|f|_{H^s} = |Lambda^s f|_{L^2}` with `Lambda = (1 - d_x^2)^{1/2}`.
pub fn sobolev_norm(f: &Field, s: f64) -> Result<f64> {
    f.ensure_finite("sobolev_norm input")?;
    if !s.is_finite() {
        return Err(Error::InvalidParameter(format!("Sobolev index must be finite, got {s}")));
    }
    Ok(sobolev_norm_unchecked(f, s))
}

pub(crate) fn sobolev_norm_unchecked(f: &Field, s: f64) -> f64 {
    let grid = f.grid();
    let spec = f.spectrum();
    let sum: f64 = spec
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let xi = grid.wavenumber(k);
            (1.0 + xi * xi).powf(s) * c.norm_sqr()
        })
        .sum();
    (sum * grid.parseval_weight()).sqrt()
}

/// `(|f|_{H^s}^2 + mu |f_x|_{H^s}^2)^{1/2}`, the norm of `H^{s+1}_mu`.
pub fn sobolev_mu_norm(f: &Field, s: f64, mu: f64) -> Result<f64> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    f.ensure_finite("sobolev_mu_norm input")?;
    Ok(sobolev_mu_norm_unchecked(f, s, mu))
}

pub(crate) fn sobolev_mu_norm_unchecked(f: &Field, s: f64, mu: f64) -> f64 {
    let grid = f.grid();
    let spec = f.spectrum();
    let nyq = grid.nyquist_index();
    let sum: f64 = spec
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let xi = grid.wavenumber(k);
            // the derivative drops the Nyquist mode
            let dxi2 = if k == nyq { 0.0 } else { xi * xi };
            (1.0 + xi * xi).powf(s) * (1.0 + mu * dxi2) * c.norm_sqr()
        })
        .sum();
    (sum * grid.parseval_weight()).sqrt()
}

/// `Lambda^s f`.
pub fn bessel_potential(f: &Field, s: f64) -> Field {
    apply_symbol(f, |_, xi| Complex64::new((1.0 + xi * xi).powf(0.5 * s), 0.0))
}

/// Grid proxy for the `W^{s,inf}` norm: `max_j |Lambda^s f (x_j)|`.
pub fn w_inf_proxy(f: &Field, s: f64) -> f64 {
    bessel_potential(f, s).max_abs()
}

/// Highest mode kept by the 2/3 rule.
pub fn two_thirds_cutoff(grid: &Grid) -> i64 {
    (grid.points() / 3) as i64
}

/// 2/3-rule filter: zero every mode with `|k| > M/3`.
pub fn dealias(f: &Field) -> Field {
    let grid = f.grid();
    let cut = two_thirds_cutoff(grid);
    apply_symbol(f, |k, _| {
        if grid.mode(k).abs() > cut {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}

/// Pointwise product followed by the 2/3 filter. Exact (alias-free) when both
/// factors are already band-limited to `|k| <= M/3`.
pub fn dealiased_product(a: &Field, b: &Field) -> Result<Field> {
    Ok(dealias(&a.mul(b)?))
}

/// Sharp frequency cutoff keeping `|xi| <= n`.
pub fn sharp_cutoff(f: &Field, n: f64) -> Field {
    apply_symbol(f, |_, xi| {
        if xi.abs() <= n {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Evaluates the trigonometric interpolant of `f` at an arbitrary point.
pub fn trig_interpolate(f: &Field, x: f64) -> f64 {
    let grid = f.grid();
    let spec = f.spectrum();
    let nyq = grid.nyquist_index();
    let m = grid.points() as f64;
    let mut acc = 0.0;
    for (k, c) in spec.iter().enumerate() {
        let xi = grid.wavenumber(k);
        if k == nyq {
            acc += c.re * (xi * x).cos();
        } else {
            let (s, co) = (xi * x).sin_cos();
            acc += c.re * co - c.im * s;
        }
    }
    acc / m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(l: f64, m: usize) -> Grid {
        Grid::new(l, m).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(1.0, 48).is_err());
        assert!(Grid::new(1.0, 16).is_err());
        assert!(Grid::new(-1.0, 64).is_err());
        assert!(Grid::new(f64::NAN, 64).is_err());
    }

    #[test]
    fn spacing_and_frequencies() {
        let g = grid(3.0, 64);
        assert_eq!(g.dx() * 64.0, 3.0);
        let xi = g.wavenumbers();
        // symmetric except the single Nyquist mode
        for k in 1..32 {
            assert_eq!(xi[k], -xi[64 - k]);
        }
        assert_eq!(g.mode(32), -32);
        assert!((xi[32] + g.max_wavenumber()).abs() < 1e-12);
    }

    #[test]
    fn derivative_of_sine() {
        let l = 5.0;
        let g = grid(l, 128);
        let w = 2.0 * PI / l;
        let f = Field::from_fn(&g, |x| (w * x).sin()).unwrap();
        let d = spectral_derivative(&f, 1).unwrap();
        for (j, v) in d.values().iter().enumerate() {
            assert!((v - w * (w * g.x(j)).cos()).abs() < 1e-10);
        }
        let c = spectral_derivative(&Field::constant(&g, 2.5), 1).unwrap();
        assert!(c.max_abs() < 1e-13);
    }

    #[test]
    fn derivative_rejects_non_finite() {
        let g = grid(1.0, 32);
        let mut v = vec![0.0; 32];
        v[3] = f64::NAN;
        let f = Field::from_raw(&g, v);
        assert!(matches!(spectral_derivative(&f, 1), Err(Error::NonFinite(_))));
        assert!(Field::new(&g, vec![f64::INFINITY; 32]).is_err());
    }

    #[test]
    fn second_derivative_matches_centered_differences_at_second_order() {
        // band-limited test function on [0, 2 pi)
        let f = |x: f64| (x).sin() + 0.3 * (3.0 * x).cos() - 0.2 * (2.0 * x + 0.4).sin();
        let mut errs = Vec::new();
        for &m in &[64usize, 128, 256] {
            let g = grid(2.0 * PI, m);
            let field = Field::from_fn(&g, f).unwrap();
            let spec = spectral_derivative(&field, 2).unwrap();
            let h = g.dx();
            let v = field.values();
            let fd: Vec<f64> = (0..m)
                .map(|j| (v[(j + 1) % m] - 2.0 * v[j] + v[(j + m - 1) % m]) / (h * h))
                .collect();
            let err = fd
                .iter()
                .zip(spec.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "measured order {order}");
        }
    }

    #[test]
    fn multiplier_examples() {
        let g = grid(2.0 * PI, 64);
        let f = Field::from_fn(&g, |x| (3.0 * x).sin()).unwrap();
        let id = fourier_multiplier_apply(&f, |_| 1.0).unwrap();
        assert!(id.sub(&f).unwrap().max_abs() < 1e-14);
        let h = fourier_multiplier_apply(&f, |xi| 1.0 / (1.0 + xi * xi)).unwrap();
        assert!(h.sub(&f.scale(0.1)).unwrap().max_abs() < 1e-14);
        let s = 1.7;
        let up = fourier_multiplier_apply(&f, |xi| (1.0 + xi * xi).powf(s / 2.0)).unwrap();
        let back = fourier_multiplier_apply(&up, |xi| (1.0 + xi * xi).powf(-s / 2.0)).unwrap();
        assert!(back.sub(&f).unwrap().max_abs() < 1e-10);
        assert!(fourier_multiplier_apply(&f, |xi| 1.0 / xi).is_err());
    }

    #[test]
    fn sobolev_norm_examples() {
        let g = grid(2.0 * PI, 64);
        assert_eq!(sobolev_norm(&Field::zeros(&g), 1.3).unwrap(), 0.0);
        let f = Field::from_fn(&g, |x| x.sin()).unwrap();
        assert!((sobolev_norm(&f, 0.0).unwrap() - PI.sqrt()).abs() < 1e-12);
        assert!((sobolev_norm(&f, 1.0).unwrap() - (2.0 * PI).sqrt()).abs() < 1e-12);
        assert!((sobolev_mu_norm(&f, 0.0, 3.0).unwrap() - 2.0 * PI.sqrt()).abs() < 1e-12);
        let tiny = sobolev_mu_norm(&f, 0.5, 1e-14).unwrap();
        assert!((tiny - sobolev_norm(&f, 0.5).unwrap()).abs() < 1e-12);
        assert!(sobolev_mu_norm(&f, 0.0, 0.0).is_err());
        assert!(sobolev_mu_norm(&f, 0.0, -1.0).is_err());
    }

    #[test]
    fn trig_interpolation_is_exact_for_band_limited() {
        let g = grid(2.0 * PI, 32);
        let f = Field::from_fn(&g, |x| (2.0 * x).cos() + 0.5 * (5.0 * x).sin()).unwrap();
        for &x in &[0.1f64, 1.234, 5.5] {
            let exact = (2.0 * x).cos() + 0.5 * (5.0 * x).sin();
            assert!((trig_interpolate(&f, x) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn dealias_removes_upper_third() {
        let g = grid(2.0 * PI, 64);
        let f = Field::from_fn(&g, |x| x.cos() + (30.0 * x).cos()).unwrap();
        let d = dealias(&f);
        let expect = Field::from_fn(&g, |x| x.cos()).unwrap();
        assert!(d.sub(&expect).unwrap().max_abs() < 1e-13);
    }

    fn band_limited(coeffs: &[(f64, f64)], g: &Grid) -> Field {
        let l = g.length();
        Field::from_fn(g, |x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let w = 2.0 * PI * k as f64 / l;
                    a * (w * x).cos() + b * (w * x).sin()
                })
                .sum()
        })
        .unwrap()
    }

    proptest! {
        #[test]
        fn round_trip_and_parseval(coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..20),
                                   l in 0.5f64..50.0) {
            let g = grid(l, 64);
            let f = band_limited(&coeffs, &g);
            let back = Field::from_raw(&g, g.inverse(g.forward(f.values())));
            let scale = f.max_abs().max(1e-300);
            prop_assert!(back.sub(&f).unwrap().max_abs() <= 1e-12 * scale.max(1.0));
            let quad: f64 = g.dx() * f.values().iter().map(|v| v * v).sum::<f64>();
            let n0 = sobolev_norm(&f, 0.0).unwrap();
            prop_assert!((n0 * n0 - quad).abs() <= 1e-10 * quad.max(1e-300));
        }
    }
}
