//! Parameters, bottom profiles, states and the depth hypotheses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dealias, derivative_unchecked, w_inf_proxy, Field, Grid};

/// Sobolev index of the `W^{s,inf}` proxy used for the bottom-smallness ratio.
pub const SMALLNESS_INDEX: f64 = 2.6;

/// Default threshold `C_0` for `beta * |Lambda^2.6 b|_inf`.
pub const DEFAULT_C0: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative residual target of the elliptic solver.
    pub solver_residual: f64,
    pub solver_max_iterations: usize,
    /// Simulation aborts when a sup-norm exceeds this value.
    pub blowup_threshold: f64,
    /// Smallness threshold `C_0` on `beta * |b|_{W-proxy}`.
    pub c0: f64,
    /// Largest accepted entropy balance residual.
    pub balance_residual: f64,
    /// Largest accepted `|H(t) - H(0)| / max(1, H(0))` on flat-bottom runs.
    pub entropy_drift: f64,
    /// Largest accepted `u_x` reconstruction deviation.
    pub ux_reconstruction: f64,
    /// Largest accepted characteristic identity residual.
    pub characteristic_residual: f64,
    /// Relative slack on the characteristic lower bound.
    pub lower_bound_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver_residual: 1e-13,
            solver_max_iterations: 400,
            blowup_threshold: 1e8,
            c0: DEFAULT_C0,
            balance_residual: 1e-5,
            entropy_drift: 1e-6,
            ux_reconstruction: 1e-5,
            characteristic_residual: 1e-4,
            lower_bound_slack: 0.02,
        }
    }
}

/// Physical and numerical parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub eps: f64,
    pub mu: f64,
    pub beta: f64,
    pub nu: f64,
    pub h0: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Params {
    pub fn new(eps: f64, mu: f64, beta: f64, nu: f64, h0: f64, dt: f64, t_end: f64) -> Result<Self> {
        let p = Self {
            eps,
            mu,
            beta,
            nu,
            h0,
            dt,
            t_end,
            tolerances: Tolerances::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps", self.eps),
            ("mu", self.mu),
            ("h0", self.h0),
            ("dt", self.dt),
            ("t_end", self.t_end),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("beta", self.beta), ("nu", self.nu)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.dt > self.t_end {
            return Err(Error::InvalidParameter(format!(
                "dt = {} exceeds t_end = {}",
                self.dt, self.t_end
            )));
        }
        let t = &self.tolerances;
        if !(t.solver_residual > 0.0 && t.blowup_threshold > 0.0 && t.c0 > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if t.solver_max_iterations == 0 {
            return Err(Error::InvalidParameter("solver_max_iterations must be >= 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

/// Named bottom profiles. Bumps are centred on the middle of the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum BathymetryPreset {
    Flat,
    GaussianBump { amplitude: f64, width: f64 },
    TwoBumps { amplitude: f64, width: f64, separation: f64 },
    Ridge { amplitude: f64, half_width: f64, steepness: f64 },
}

impl BathymetryPreset {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Flat => "flat",
            Self::GaussianBump { .. } => "gaussian-bump",
            Self::TwoBumps { .. } => "two-bumps",
            Self::Ridge { .. } => "ridge",
        }
    }

    /// Preset by name with default shape parameters.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "flat" => Ok(Self::Flat),
            "gaussian-bump" => Ok(Self::GaussianBump { amplitude: 1.0, width: 2.0 }),
            "two-bumps" => Ok(Self::TwoBumps { amplitude: 1.0, width: 1.5, separation: 8.0 }),
            "ridge" => Ok(Self::Ridge { amplitude: 1.0, half_width: 4.0, steepness: 1.5 }),
            other => Err(Error::Config(format!("unknown bathymetry preset '{other}'"))),
        }
    }

    pub fn names() -> &'static [&'static str] {
        &["flat", "gaussian-bump", "two-bumps", "ridge"]
    }

    /// Analytic profile `b(x)` on a domain of length `length`.
    pub fn profile(&self, length: f64, x: f64) -> f64 {
        let c = 0.5 * length;
        let gauss = |x0: f64, w: f64| (-((x - x0) / w).powi(2)).exp();
        match *self {
            Self::Flat => 0.0,
            Self::GaussianBump { amplitude, width } => amplitude * gauss(c, width),
            Self::TwoBumps { amplitude, width, separation } => {
                amplitude * (gauss(c - 0.5 * separation, width) + gauss(c + 0.5 * separation, width))
            }
            Self::Ridge { amplitude, half_width, steepness } => {
                0.5 * amplitude
                    * (((x - c + half_width) / steepness).tanh() - ((x - c - half_width) / steepness).tanh())
            }
        }
    }

    /// Sampled, 2/3-filtered profile.
    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        let l = grid.length();
        let raw = Field::from_fn(grid, |x| self.profile(l, x))?;
        Ok(dealias(&raw))
    }
}

/// Bottom profile `b` with amplitude `beta`, plus the derived still-water depth.
#[derive(Clone, Debug, PartialEq)]
pub struct Bathymetry {
    b: Field,
    beta: f64,
    hb: Field,
}

impl Bathymetry {
    /// Unchecked construction; use [`validate_depth`] or [`Bathymetry::checked`] to enforce `h_b >= h0`.
    pub fn new(b: Field, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
        }
        b.ensure_finite("bathymetry")?;
        let hb = b.map(|v| 1.0 - beta * v);
        Ok(Self { b, beta, hb })
    }

    /// Construction that rejects `min h_b < h0`.
    pub fn checked(b: Field, beta: f64, h0: f64) -> Result<Self> {
        let bath = Self::new(b, beta)?;
        let report = validate_depth(&bath, h0);
        if !report.depth_ok {
            return Err(Error::Hypothesis(format!(
                "min h_b = {:.6e} at x = {:.6} is below h0 = {h0}",
                report.min_hb, report.argmin_x
            )));
        }
        Ok(bath)
    }

    pub fn flat(grid: &Grid) -> Self {
        Self::new(Field::zeros(grid), 0.0).expect("flat bottom is valid")
    }

    pub fn from_preset(grid: &Grid, preset: &BathymetryPreset, beta: f64) -> Result<Self> {
        Self::new(preset.sample(grid)?, beta)
    }

    pub fn grid(&self) -> &Grid {
        self.b.grid()
    }

    pub fn b(&self) -> &Field {
        &self.b
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `h_b = 1 - beta b`.
    pub fn hb(&self) -> &Field {
        &self.hb
    }

    /// `b_x`.
    pub fn bx(&self) -> Field {
        derivative_unchecked(&self.b, 1)
    }

    /// `h_b` is constant (flat bottom or `beta = 0`).
    pub fn is_flat(&self) -> bool {
        self.beta == 0.0 || self.b.values().iter().all(|&v| v == self.b.values()[0])
    }

    /// `g_b = h_b + (beta mu/2) (h_b^2 b_x)_x + beta^2 mu b_x^2`, as displayed in the literature.
    pub fn g_b(&self, mu: f64) -> Field {
        self.zeroth_order(mu, false)
    }

    /// Zeroth-order coefficient of the self-adjoint operator obtained by expanding
    /// `h_b (1 + mu T[h_b])`: `h_b + (beta mu/2)(h_b^2 b_x)_x + beta^2 mu h_b b_x^2`.
    pub fn g_full(&self, mu: f64) -> Field {
        self.zeroth_order(mu, true)
    }

    fn zeroth_order(&self, mu: f64, with_hb: bool) -> Field {
        let beta = self.beta;
        let bx = self.bx();
        let hb = self.hb.values();
        let flux = Field::from_raw(
            self.grid(),
            hb.iter().zip(bx.values()).map(|(h, d)| h * h * d).collect(),
        );
        let dflux = derivative_unchecked(&flux, 1);
        let values = (0..hb.len())
            .map(|j| {
                let w = if with_hb { hb[j] } else { 1.0 };
                hb[j] + 0.5 * beta * mu * dflux.values()[j] + beta * beta * mu * w * bx.values()[j].powi(2)
            })
            .collect();
        Field::from_raw(self.grid(), values)
    }
}

/// Outcome of the depth and bottom-smallness checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthReport {
    /// `min h_b >= h0`.
    pub depth_ok: bool,
    pub min_hb: f64,
    pub argmin_x: f64,
    pub h0: f64,
    /// `beta * max |Lambda^2.6 b|`.
    pub smallness_ratio: f64,
    pub c0: f64,
    /// `smallness_ratio <= c0`.
    pub smallness_ok: bool,
}

impl DepthReport {
    pub fn pass(&self) -> bool {
        self.depth_ok
    }
}

/// Checks `h_b >= h0` and reports the bottom-smallness ratio against [`DEFAULT_C0`].
pub fn validate_depth(bath: &Bathymetry, h0: f64) -> DepthReport {
    validate_depth_with(bath, h0, DEFAULT_C0)
}

pub fn validate_depth_with(bath: &Bathymetry, h0: f64, c0: f64) -> DepthReport {
    let hb = bath.hb().values();
    let (jmin, min_hb) = hb
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (j, v)| if v < acc.1 { (j, v) } else { acc });
    let smallness_ratio = bath.beta() * w_inf_proxy(bath.b(), SMALLNESS_INDEX);
    DepthReport {
        depth_ok: min_hb >= h0,
        min_hb,
        argmin_x: bath.grid().x(jmin),
        h0,
        smallness_ratio,
        c0,
        smallness_ok: smallness_ratio <= c0,
    }
}

/// Surface elevation and velocity at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub zeta: Field,
    pub u: Field,
    pub t: f64,
}

impl State {
    pub fn new(zeta: Field, u: Field, t: f64) -> Result<Self> {
        zeta.same_grid(&u)?;
        zeta.ensure_finite("zeta")?;
        u.ensure_finite("u")?;
        if !t.is_finite() {
            return Err(Error::NonFinite("time".into()));
        }
        Ok(Self { zeta, u, t })
    }

    pub fn rest(grid: &Grid) -> Self {
        Self {
            zeta: Field::zeros(grid),
            u: Field::zeros(grid),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.zeta.grid()
    }
}

/// `h = 1 + eps zeta - beta b`.
pub fn total_height(zeta: &Field, bath: &Bathymetry, eps: f64) -> Result<Field> {
    zeta.zip_map(bath.hb(), |z, hb| hb + eps * z)
}

/// Minimum over the grid of the total height.
pub fn positivity_check(state: &State, bath: &Bathymetry, eps: f64) -> Result<f64> {
    Ok(total_height(&state.zeta, bath, eps)?.min())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(32.0, 256).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(Params::new(0.1, 0.1, 0.0, 0.0, 0.5, 1e-3, 1.0).is_ok());
        assert!(Params::new(0.0, 0.1, 0.0, 0.0, 0.5, 1e-3, 1.0).is_err());
        assert!(Params::new(0.1, 0.1, -0.1, 0.0, 0.5, 1e-3, 1.0).is_err());
        assert!(Params::new(0.1, 0.1, 0.0, 0.0, 0.5, 2.0, 1.0).is_err());
        let p = Params::new(0.1, 0.1, 0.0, 0.0, 0.5, 1e-3, 1.0).unwrap();
        assert_eq!(p.steps(), 1000);
    }

    #[test]
    fn total_height_examples() {
        let g = grid();
        let flat = Bathymetry::flat(&g);
        let h = total_height(&Field::zeros(&g), &flat, 0.1).unwrap();
        assert!(h.values().iter().all(|&v| v == 1.0));
        let h = total_height(&Field::constant(&g, 1.0), &flat, 0.1).unwrap();
        assert!(h.values().iter().all(|&v| (v - 1.1).abs() < 1e-15));
        let other = Grid::new(16.0, 256).unwrap();
        assert!(total_height(&Field::zeros(&other), &flat, 0.1).is_err());
    }

    #[test]
    fn depth_examples() {
        let g = grid();
        let r = validate_depth(&Bathymetry::flat(&g), 0.5);
        assert!(r.pass());
        assert_eq!(r.min_hb, 1.0);
        let bad = Bathymetry::new(Field::constant(&g, 1.0), 2.0).unwrap();
        let r = validate_depth(&bad, 0.1);
        assert!(!r.pass());
        assert_eq!(r.min_hb, -1.0);
        assert!(Bathymetry::checked(Field::constant(&g, 1.0), 2.0, 0.1).is_err());
    }

    #[test]
    fn g_b_flat_is_one() {
        let g = grid();
        let flat = Bathymetry::flat(&g);
        assert!(flat.g_full(0.3).values().iter().all(|&v| v == 1.0));
        assert!(flat.is_flat());
    }

    #[test]
    fn g_variants_differ_by_hb_factor() {
        let g = grid();
        let bath = Bathymetry::from_preset(&g, &BathymetryPreset::by_name("gaussian-bump").unwrap(), 0.3).unwrap();
        let mu = 0.2;
        let bx = bath.bx();
        let diff = bath.g_full(mu).sub(&bath.g_b(mu)).unwrap();
        for j in 0..g.points() {
            let expect = 0.09 * mu * (bath.hb().values()[j] - 1.0) * bx.values()[j].powi(2);
            assert!((diff.values()[j] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn presets_sample_every_name() {
        let g = grid();
        for name in BathymetryPreset::names() {
            let p = BathymetryPreset::by_name(name).unwrap();
            assert_eq!(p.name(), *name);
            let b = p.sample(&g).unwrap();
            assert!(b.is_finite());
        }
        assert!(BathymetryPreset::by_name("canyon").is_err());
    }
}
