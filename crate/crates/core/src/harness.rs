//! Named scenarios, the Bona-Smith convergence study and the mollified-data
//! weak-limit study.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bathymetry::{Bathymetry, BathymetryPreset, Params, State};
use crate::diagnostics::orlicz_norm;
use crate::dynamics::{simulate_partial, SimulationOptions, SystemKind, Trajectory};
use crate::error::{Error, Result};
use crate::estimates::Corpus;
use crate::grid::{bessel_potential, sharp_cutoff, sobolev_mu_norm_unchecked, sobolev_norm_unchecked, Field, Grid};
use crate::littlewood_paley::is_dyadic;

/// Initial surface and velocity, as formulas on the periodic domain. Shapes are
/// centred on the middle of the domain unless an offset is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "recipe", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialRecipe {
    Rest,
    /// `zeta = a exp(-((x - c)/w)^2)`, `u = velocity exp(-((x - c)/w)^2)`.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        velocity: f64,
    },
    /// Right-going linear wave `zeta = a cos(xi x)` with `u = c(xi) zeta`.
    PlaneWave { amplitude: f64, mode: u32 },
    /// Gaussian plus a random-phase tail with spectrum `(1 + xi^2)^{-(regularity + 0.6)/2}`:
    /// `zeta` lies in `H^regularity` but not in `H^{regularity + 0.1}`. The velocity
    /// carries one more derivative, so the pair lies in `H^s x H^{s+1}_mu`.
    AlgebraicTail { amplitude: f64, regularity: f64, velocity: f64 },
    /// Near-vacuum tent: `h = 1 - depth (1 - |x - c|/w)_+` on a flat bottom.
    Dimple {
        depth: f64,
        width: f64,
        #[serde(default)]
        velocity: f64,
    },
    /// Square-root cusp: `eps zeta = height (1 - |x - c|/w)_+^{1/2}`.
    Spike {
        height: f64,
        width: f64,
        #[serde(default)]
        velocity: f64,
    },
    /// `eps zeta = -exp(-((x - c)/w)^2)`: the total height touches zero at the centre.
    VacuumStart { width: f64 },
}

/// Phase speed of linear waves of the flat-bottom small-amplitude system.
pub fn linear_phase_speed(mu: f64, xi: f64) -> f64 {
    (1.0 / (1.0 + mu * xi * xi / 3.0)).sqrt()
}

fn tent(x: f64, c: f64, w: f64) -> f64 {
    (1.0 - (x - c).abs() / w).max(0.0)
}

fn gauss(x: f64, c: f64, w: f64) -> f64 {
    (-((x - c) / w).powi(2)).exp()
}

/// Random-phase field with magnitudes `(1 + xi^2)^{-decay/2}` on every non-Nyquist mode.
fn random_phase_tail(grid: &Grid, decay: f64, seed: u64) -> Result<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = grid.points();
    let mut spec = vec![Complex64::new(0.0, 0.0); m];
    for k in 1..m / 2 {
        let xi = grid.wavenumber(k);
        let amp = (1.0 + xi * xi).powf(-0.5 * decay) * 0.5 * m as f64;
        let theta: f64 = rng.random_range(0.0..2.0 * PI);
        let c = Complex64::from_polar(amp, theta);
        spec[k] = c;
        spec[m - k] = c.conj();
    }
    Field::new(grid, grid.inverse(spec))
}

impl InitialRecipe {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Rest => "rest",
            Self::Gaussian { .. } => "gaussian",
            Self::PlaneWave { .. } => "plane-wave",
            Self::AlgebraicTail { .. } => "algebraic-tail",
            Self::Dimple { .. } => "dimple",
            Self::Spike { .. } => "spike",
            Self::VacuumStart { .. } => "vacuum-start",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("recipe {}: {what}", self.name())));
        match *self {
            Self::Gaussian { width, .. } | Self::VacuumStart { width } if !(width > 0.0) => bad("width must be positive"),
            Self::Dimple { depth, width, .. } if !(width > 0.0 && (0.0..1.0).contains(&depth)) => {
                bad("needs width > 0 and 0 <= depth < 1")
            }
            Self::Spike { height, width, .. } if !(width > 0.0 && height >= 0.0) => bad("needs width > 0 and height >= 0"),
            Self::AlgebraicTail { regularity, .. } if !(regularity >= 0.0) => bad("regularity must be >= 0"),
            Self::PlaneWave { mode: 0, .. } => bad("mode must be >= 1"),
            _ => Ok(()),
        }
    }

    /// Samples the recipe on `grid`; `seed` drives the random phases of the algebraic tail.
    pub fn build(&self, grid: &Grid, p: &Params, seed: u64) -> Result<State> {
        self.validate()?;
        let l = grid.length();
        let c = 0.5 * l;
        let eps = p.eps;
        let (zeta, u) = match *self {
            Self::Rest => (Field::zeros(grid), Field::zeros(grid)),
            Self::Gaussian { amplitude, width, offset, velocity } => (
                Field::from_fn(grid, |x| amplitude * gauss(x, c + offset, width))?,
                Field::from_fn(grid, |x| velocity * gauss(x, c + offset, width))?,
            ),
            Self::PlaneWave { amplitude, mode } => {
                let xi = 2.0 * PI * mode as f64 / l;
                let speed = linear_phase_speed(p.mu, xi);
                (
                    Field::from_fn(grid, |x| amplitude * (xi * x).cos())?,
                    Field::from_fn(grid, |x| speed * amplitude * (xi * x).cos())?,
                )
            }
            Self::AlgebraicTail { amplitude, regularity, velocity } => {
                let tail = random_phase_tail(grid, regularity + 0.6, seed)?;
                let smooth_tail = bessel_potential(&tail, -1.0);
                let (t1, t2) = (tail.max_abs(), smooth_tail.max_abs());
                let zeta = Field::from_fn(grid, |x| gauss(x, c, 1.0))?.axpy(0.5 / t1, &tail)?;
                let u = Field::from_fn(grid, |x| gauss(x, c, 1.0))?.axpy(0.5 / t2, &smooth_tail)?;
                (zeta.scale(amplitude), u.scale(velocity))
            }
            Self::Dimple { depth, width, velocity } => (
                Field::from_fn(grid, |x| -depth / eps * tent(x, c, width))?,
                Field::from_fn(grid, |x| velocity * gauss(x, c, 2.0))?,
            ),
            Self::Spike { height, width, velocity } => (
                Field::from_fn(grid, |x| height / eps * tent(x, c, width).sqrt())?,
                Field::from_fn(grid, |x| velocity * gauss(x, c, 2.0))?,
            ),
            Self::VacuumStart { width } => (
                Field::from_fn(grid, |x| -gauss(x, c, width) / eps)?,
                Field::zeros(grid),
            ),
        };
        State::new(zeta, u, 0.0)
    }
}

/// Outcome a scenario is expected to reach.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    #[default]
    Completes,
    AbortPositivity,
    AbortBlowup,
}

fn default_s_list() -> Vec<f64> {
    vec![0.0, 1.0]
}

fn default_stride() -> usize {
    1
}

/// A replayable run: grid, data recipe, bottom, parameters and the expected outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub system: SystemKind,
    pub length: f64,
    pub points: usize,
    pub initial: InitialRecipe,
    pub bathymetry: BathymetryPreset,
    pub params: Params,
    #[serde(default = "default_s_list")]
    pub s_list: Vec<f64>,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub expect: Expectation,
}

/// Result of running a scenario. `abort` holds the error that stopped the run early.
#[derive(Debug)]
pub struct RunOutcome {
    pub bathymetry: Bathymetry,
    pub trajectory: Trajectory,
    pub abort: Option<Error>,
}

impl RunOutcome {
    pub fn matches(&self, expect: Expectation) -> bool {
        matches!(
            (expect, &self.abort),
            (Expectation::Completes, None)
                | (Expectation::AbortPositivity, Some(Error::AbortPositivity { .. }))
                | (Expectation::AbortBlowup, Some(Error::AbortBlowup { .. }))
        )
    }
}

impl Scenario {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.length, self.points)
    }

    pub fn bathymetry_on(&self, grid: &Grid) -> Result<Bathymetry> {
        Bathymetry::from_preset(grid, &self.bathymetry, self.params.beta)
    }

    pub fn options(&self) -> SimulationOptions {
        SimulationOptions {
            snapshot_stride: self.snapshot_stride,
            s_list: self.s_list.clone(),
            record_diagnostics: true,
        }
    }

    /// Grid, bottom and initial state.
    pub fn setup(&self, seed: u64) -> Result<(Bathymetry, State)> {
        self.params.validate()?;
        let grid = self.grid()?;
        let bath = self.bathymetry_on(&grid)?;
        let state = self.initial.build(&grid, &self.params, seed)?;
        Ok((bath, state))
    }

    pub fn run(&self, seed: u64) -> Result<RunOutcome> {
        let (bath, initial) = self.setup(seed)?;
        let (trajectory, abort) = simulate_partial(&initial, self.system, &bath, &self.params, &self.options())?;
        Ok(RunOutcome { bathymetry: bath, trajectory, abort })
    }
}

fn reference_params(beta: f64, dt: f64, t_end: f64) -> Params {
    Params::new(0.1, 0.1, beta, 0.0, 0.5, dt, t_end).expect("shipped parameters are valid")
}

/// The shipped scenarios.
pub fn scenarios() -> Vec<Scenario> {
    let bump_wave = InitialRecipe::Gaussian { amplitude: 0.5, width: 1.0, offset: -8.0, velocity: 0.0 };
    let bathy = |name: &str, description: &str| Scenario {
        name: name.into(),
        description: description.into(),
        system: SystemKind::Bpw,
        length: 64.0,
        points: 512,
        initial: bump_wave.clone(),
        bathymetry: BathymetryPreset::by_name(name).expect("shipped preset"),
        params: reference_params(0.2, 1e-2, 2.0),
        s_list: default_s_list(),
        snapshot_stride: 1,
        expect: Expectation::Completes,
    };
    let rough = |name: &str, description: &str, initial: InitialRecipe| Scenario {
        name: name.into(),
        description: description.into(),
        system: SystemKind::Bpw,
        length: 32.0,
        points: 2048,
        initial,
        bathymetry: BathymetryPreset::Flat,
        params: reference_params(0.0, 2e-3, 0.5),
        s_list: default_s_list(),
        snapshot_stride: 10,
        expect: Expectation::Completes,
    };
    vec![
        Scenario {
            name: "rest".into(),
            description: "still water over a flat bottom".into(),
            system: SystemKind::Bpw,
            length: 64.0,
            points: 256,
            initial: InitialRecipe::Rest,
            bathymetry: BathymetryPreset::Flat,
            params: reference_params(0.0, 1e-2, 0.1),
            s_list: default_s_list(),
            snapshot_stride: 1,
            expect: Expectation::Completes,
        },
        Scenario {
            name: "flat-gaussian".into(),
            description: "gaussian hump released from rest over a flat bottom (reference run)".into(),
            system: SystemKind::Bpw,
            length: 64.0,
            points: 512,
            initial: InitialRecipe::Gaussian { amplitude: 0.5, width: 1.0, offset: 0.0, velocity: 0.0 },
            bathymetry: BathymetryPreset::Flat,
            params: reference_params(0.0, 1e-3, 1.0),
            s_list: default_s_list(),
            snapshot_stride: 1,
            expect: Expectation::Completes,
        },
        bathy("gaussian-bump", "gaussian hump crossing a submerged gaussian bump"),
        bathy("two-bumps", "gaussian hump crossing two submerged bumps"),
        bathy("ridge", "gaussian hump crossing a flat-topped ridge"),
        Scenario {
            name: "plane-wave".into(),
            description: "small right-going linear wave over a flat bottom".into(),
            system: SystemKind::Bpw,
            length: 64.0,
            points: 128,
            initial: InitialRecipe::PlaneWave { amplitude: 1e-3, mode: 4 },
            bathymetry: BathymetryPreset::Flat,
            params: reference_params(0.0, 1e-2, 2.0),
            s_list: default_s_list(),
            snapshot_stride: 10,
            expect: Expectation::Completes,
        },
        Scenario {
            name: "algebraic-tail".into(),
            description: "gaussian plus a random-phase H^1 tail over a gaussian bump".into(),
            system: SystemKind::BpRegularized,
            length: 8.0 * PI,
            points: 1024,
            initial: InitialRecipe::AlgebraicTail { amplitude: 1.0, regularity: 1.0, velocity: 0.5 },
            bathymetry: BathymetryPreset::GaussianBump { amplitude: 1.0, width: 2.0 },
            params: reference_params(0.1, 1e-2, 1.0),
            s_list: default_s_list(),
            snapshot_stride: 10,
            expect: Expectation::Completes,
        },
        Scenario {
            name: "vacuum-start".into(),
            description: "total height touching zero at t = 0".into(),
            system: SystemKind::BpRegularized,
            length: 64.0,
            points: 256,
            initial: InitialRecipe::VacuumStart { width: 1.0 },
            bathymetry: BathymetryPreset::Flat,
            params: reference_params(0.0, 1e-2, 1.0),
            s_list: default_s_list(),
            snapshot_stride: 1,
            expect: Expectation::AbortPositivity,
        },
        rough(
            "dimple",
            "near-vacuum tent with a Lipschitz kink (minimum height 0.02)",
            InitialRecipe::Dimple { depth: 0.98, width: 2.0, velocity: 0.2 },
        ),
        rough(
            "spike",
            "tall square-root cusp of the surface",
            InitialRecipe::Spike { height: 2.0, width: 0.5, velocity: 0.2 },
        ),
    ]
}

pub fn scenario(name: &str) -> Result<Scenario> {
    scenarios().into_iter().find(|s| s.name == name).ok_or_else(|| {
        let names: Vec<String> = scenarios().into_iter().map(|s| s.name).collect();
        Error::Config(format!("unknown scenario '{name}' (available: {})", names.join(", ")))
    })
}

/// Sharp frequency truncation `S_n`: keeps `|xi| <= n`.
pub fn bona_smith_truncate(f: &Field, n: f64) -> Result<Field> {
    if !(n > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation needs n > 0, got {n}")));
    }
    Ok(sharp_cutoff(f, n))
}

/// Distance between the runs of two consecutive sweep members.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairDistance {
    pub n1: u64,
    pub n2: u64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BonaSmithReport {
    pub scenario: String,
    pub s: f64,
    pub n_list: Vec<u64>,
    pub nu: Vec<f64>,
    /// Time reached by each probe run before an abort or the probe horizon.
    pub horizons: Vec<f64>,
    /// Half the smallest horizon.
    pub t_common: f64,
    /// `sup_{t <= t_common} (|dzeta|^2_{H^{s-1}} + |du|^2_{H^s_mu})^{1/2}` for consecutive `n`.
    pub differences: Vec<PairDistance>,
    pub strictly_decreasing: bool,
    /// Least-squares slope `p` of `difference ~ n^{-p}` against the smaller `n`.
    pub fitted_exponent: Option<f64>,
}

fn check_sweep(n_list: &[u64]) -> Result<()> {
    if n_list.len() < 2 {
        return Err(Error::InvalidParameter("sweep needs at least two values of n".into()));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(format!("sweep {n_list:?} must be increasing")));
    }
    Ok(())
}

fn fitted_decay(pairs: &[PairDistance]) -> Option<f64> {
    if pairs.len() < 2 || pairs.iter().any(|p| !(p.distance > 0.0)) {
        return None;
    }
    let pts: Vec<(f64, f64)> = pairs.iter().map(|p| ((p.n1 as f64).ln(), p.distance.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(-sxy / sxx)
}

fn strictly_decreasing(pairs: &[PairDistance]) -> bool {
    pairs.windows(2).all(|w| w[1].distance < w[0].distance)
}

fn abort_time(e: &Error) -> Option<f64> {
    match e {
        Error::AbortPositivity { t, .. } | Error::AbortBlowup { t, .. } => Some(*t),
        _ => None,
    }
}

/// Runs the regularised system from `(S_n zeta_0, S_n u_0)` with `nu = n^{-5}` for
/// each dyadic `n`, first to `probe_horizon`. Differences are measured up to half
/// the smallest horizon reached.
pub fn bona_smith_experiment(
    scenario: &Scenario,
    seed: u64,
    s: f64,
    n_list: &[u64],
    probe_horizon: f64,
) -> Result<BonaSmithReport> {
    check_sweep(n_list)?;
    if let Some(n) = n_list.iter().find(|&&n| !is_dyadic(n)) {
        return Err(Error::InvalidParameter(format!("n = {n} is not a power of two")));
    }
    if !(probe_horizon > 0.0) {
        return Err(Error::InvalidParameter("probe horizon must be positive".into()));
    }
    let (bath, data) = scenario.setup(seed)?;
    let opts = SimulationOptions {
        snapshot_stride: 1,
        s_list: Vec::new(),
        record_diagnostics: false,
    };
    let runs: Vec<Result<(Trajectory, f64)>> = n_list
        .par_iter()
        .map(|&n| {
            let wrap = |e: Error| Error::SubRun { n, source: Box::new(e) };
            let nf = n as f64;
            let mut p = scenario.params.clone();
            p.nu = nf.powi(-5);
            p.t_end = probe_horizon;
            let initial = State::new(sharp_cutoff(&data.zeta, nf), sharp_cutoff(&data.u, nf), 0.0).map_err(wrap)?;
            let (traj, abort) =
                simulate_partial(&initial, SystemKind::BpRegularized, &bath, &p, &opts).map_err(wrap)?;
            let horizon = match abort {
                None => probe_horizon,
                Some(e) => match abort_time(&e) {
                    Some(t) if t > 0.0 => traj.last().t,
                    _ => return Err(wrap(e)),
                },
            };
            if !(horizon > 0.0) {
                return Err(wrap(Error::AbortBlowup { t: 0.0, what: "no step completed".into() }));
            }
            Ok((traj, horizon))
        })
        .collect();
    let runs: Vec<(Trajectory, f64)> = runs.into_iter().collect::<Result<_>>()?;
    let horizons: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let t_common = 0.5 * horizons.iter().copied().fold(f64::INFINITY, f64::min);
    let mu = scenario.params.mu;
    let differences: Vec<PairDistance> = n_list
        .windows(2)
        .zip(runs.windows(2))
        .map(|(ns, pair)| {
            let (a, b) = (&pair[0].0, &pair[1].0);
            let mut worst: f64 = 0.0;
            for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
                if sa.t > t_common + 1e-12 {
                    break;
                }
                let dz = sa.zeta.sub(&sb.zeta)?;
                let du = sa.u.sub(&sb.u)?;
                let d = sobolev_norm_unchecked(&dz, s - 1.0).powi(2) + sobolev_mu_norm_unchecked(&du, s - 1.0, mu).powi(2);
                worst = worst.max(d.sqrt());
            }
            Ok(PairDistance { n1: ns[0], n2: ns[1], distance: worst })
        })
        .collect::<Result<_>>()?;
    Ok(BonaSmithReport {
        scenario: scenario.name.clone(),
        s,
        n_list: n_list.to_vec(),
        nu: n_list.iter().map(|&n| (n as f64).powi(-5)).collect(),
        horizons,
        t_common,
        strictly_decreasing: strictly_decreasing(&differences),
        fitted_exponent: fitted_decay(&differences),
        differences,
    })
}

/// Truncation growth `|S_n f|_{H^{s+r}}` against `|f|_{H^s}` over a corpus.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    pub s: f64,
    pub r_list: Vec<f64>,
    pub n_list: Vec<u64>,
    pub samples: usize,
    /// Largest `|S_n f|_{H^{s+r}} / ((1 + n^2)^{r/2} |f|_{H^s})`.
    pub max_ratio_exact: f64,
    /// Largest `|S_n f|_{H^{s+r}} / (n^r |f|_{H^s})`.
    pub max_ratio_power: f64,
    pub exact_holds: bool,
    pub power_holds: bool,
}

pub fn truncation_growth_check(
    corpus: &Corpus,
    grid: &Grid,
    s: f64,
    r_list: &[f64],
    n_list: &[u64],
) -> Result<GrowthReport> {
    if r_list.iter().any(|&r| !(r >= 0.0)) || n_list.contains(&0) {
        return Err(Error::InvalidParameter("growth check needs r >= 0 and n >= 1".into()));
    }
    let ratios: Vec<(f64, f64)> = (0..corpus.size)
        .into_par_iter()
        .map(|i| {
            let f = corpus.sample(i, grid)?;
            let base = sobolev_norm_unchecked(&f, s);
            let mut worst = (0.0f64, 0.0f64);
            for &n in n_list {
                let nf = n as f64;
                let cut = sharp_cutoff(&f, nf);
                for &r in r_list {
                    let top = sobolev_norm_unchecked(&cut, s + r);
                    worst.0 = worst.0.max(top / ((1.0 + nf * nf).powf(0.5 * r) * base));
                    worst.1 = worst.1.max(top / (nf.powf(r) * base));
                }
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let max_ratio_exact = ratios.iter().map(|r| r.0).fold(0.0, f64::max);
    let max_ratio_power = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(GrowthReport {
        s,
        r_list: r_list.to_vec(),
        n_list: n_list.to_vec(),
        samples: corpus.size,
        max_ratio_exact,
        max_ratio_power,
        exact_holds: max_ratio_exact <= 1.0,
        power_holds: max_ratio_power <= 1.0,
    })
}

/// Unnormalised bump `exp(-1/(x(1-x)))` on `(0, 1)`.
fn bump(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        (-1.0 / (x * (1.0 - x))).exp()
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// Normalising constant `c` of `rho = c exp(-1/(x(1-x)))`.
pub fn mollifier_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 1.0 / simpson(bump, 0.0, 1.0, 20_000))
}

/// `rho(x) = c exp(-1/(x(1-x)))` on `(0, 1)`, zero elsewhere; `int rho = 1`.
pub fn mollifier(x: f64) -> f64 {
    mollifier_constant() * bump(x)
}

/// Cell masses `w_j = int rho_n` over `[(j - 1/2) dx, (j + 1/2) dx]`, `j >= 0`,
/// rescaled to sum to one.
pub fn mollifier_weights(grid: &Grid, n: u32) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("mollifier index n must be >= 1".into()));
    }
    let nf = n as f64;
    let dx = grid.dx();
    let support = 1.0 / nf;
    let cells = ((support / dx).ceil() as usize + 1).min(grid.points());
    let mut w: Vec<f64> = (0..cells)
        .map(|j| {
            let a = ((j as f64 - 0.5) * dx).max(0.0);
            let b = ((j as f64 + 0.5) * dx).min(support);
            if b <= a {
                0.0
            } else {
                simpson(|z| nf * mollifier(nf * z), a, b, 64)
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        w = vec![1.0];
    } else {
        w.iter_mut().for_each(|v| *v /= total);
    }
    Ok(w)
}

/// Periodic convolution with `rho_n = n rho(n .)`, supported on `[0, 1/n]`.
pub fn mollify(f: &Field, n: u32) -> Result<Field> {
    let w = mollifier_weights(f.grid(), n)?;
    let v = f.values();
    let m = v.len();
    let out = (0..m)
        .map(|i| w.iter().enumerate().map(|(j, wj)| wj * v[(i + m - j % m) % m]).sum())
        .collect();
    Field::new(f.grid(), out)
}

/// One member of the mollification sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakRun {
    pub n: u32,
    /// `int sigma_0(1 + eps zeta_{0,n} - beta b_n)`.
    pub orlicz_mollified: f64,
    pub jensen_holds: bool,
    /// `min_t [Z_0 e^t - LHS_n(t)]` with `Z_0` from the unmollified data.
    pub bound_margin: f64,
    pub bound_holds: bool,
    /// `int zeta_n(T) phi_k` for the fixed test functions.
    pub moments: Vec<f64>,
    pub t_final: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakLimitReport {
    pub scenario: String,
    pub n_list: Vec<u32>,
    /// `int sigma_0(1 + eps zeta_0 - beta b)` of the unmollified data.
    pub orlicz_original: f64,
    /// `|u_0|^2_{H^1_mu} + int sigma_0(h_0)/eps^2 + (beta/(2 eps))^2 |b_x|^2`.
    pub z0: f64,
    pub window: (f64, f64),
    pub runs: Vec<WeakRun>,
    /// `sup_t |u_{n1} - u_{n2}|_{L^2(window)}`.
    pub u_l2_distances: Vec<PairDistance>,
    /// `sup_t |zeta_{n1} - zeta_{n2}|_{L^1(window)}`.
    pub zeta_l1_distances: Vec<PairDistance>,
    /// `max_k |moment_k(n1) - moment_k(n2)|` at the final time.
    pub moment_differences: Vec<PairDistance>,
    pub bound_holds: bool,
    pub jensen_holds: bool,
}

impl WeakLimitReport {
    pub fn pass(&self) -> bool {
        self.bound_holds && self.jensen_holds
    }
}

/// Five gaussian test functions spread around the middle of the domain.
pub fn test_functions(grid: &Grid) -> Result<Vec<Field>> {
    let c = 0.5 * grid.length();
    [-4.0, -2.0, 0.0, 2.0, 4.0]
        .iter()
        .map(|&off| Field::from_fn(grid, |x| gauss(x, c + off, 1.0)))
        .collect()
}

fn window_norm(f: &Field, window: (f64, f64), power: i32) -> f64 {
    let g = f.grid();
    let sum: f64 = f
        .values()
        .iter()
        .enumerate()
        .filter(|(j, _)| (window.0..=window.1).contains(&g.x(*j)))
        .map(|(_, v)| v.abs().powi(power))
        .sum();
    let total = sum * g.dx();
    if power == 2 {
        total.sqrt()
    } else {
        total
    }
}

/// Runs the small-bottom system from mollified data `(rho_n * zeta_0, rho_n * u_0)`
/// over the mollified bottom `rho_n * b` for each `n`.
pub fn weak_limit_experiment(scenario: &Scenario, seed: u64, n_list: &[u32]) -> Result<WeakLimitReport> {
    let as_u64: Vec<u64> = n_list.iter().map(|&n| n as u64).collect();
    check_sweep(&as_u64)?;
    if n_list[0] == 0 {
        return Err(Error::InvalidParameter("mollifier index n must be >= 1".into()));
    }
    let (bath, data) = scenario.setup(seed)?;
    let p = &scenario.params;
    let grid = bath.grid().clone();
    let orlicz_original = orlicz_norm(&data.zeta, &bath, p.eps)?;
    let bx = bath.bx();
    let z0 = sobolev_mu_norm_unchecked(&data.u, 0.0, p.mu).powi(2)
        + orlicz_original / (p.eps * p.eps)
        + (bath.beta() / (2.0 * p.eps)).powi(2) * bx.inner(&bx)?;
    let tests = test_functions(&grid)?;
    let window = (0.25 * grid.length(), 0.75 * grid.length());
    let opts = scenario.options();
    let runs: Vec<Result<(WeakRun, Trajectory)>> = n_list
        .par_iter()
        .map(|&n| {
            let wrap = |e: Error| Error::SubRun { n: n as u64, source: Box::new(e) };
            let b_n = mollify(bath.b(), n).map_err(wrap)?;
            let bath_n = Bathymetry::new(b_n, bath.beta()).map_err(wrap)?;
            let zeta_n = mollify(&data.zeta, n).map_err(wrap)?;
            let u_n = mollify(&data.u, n).map_err(wrap)?;
            let orlicz_mollified = orlicz_norm(&zeta_n, &bath_n, p.eps).map_err(wrap)?;
            let initial = State::new(zeta_n, u_n, 0.0).map_err(wrap)?;
            let traj = match simulate_partial(&initial, SystemKind::Bpw, &bath_n, p, &opts).map_err(wrap)? {
                (traj, None) => traj,
                (_, Some(e)) => return Err(wrap(e)),
            };
            let baseline = traj.baseline.expect("diagnostics are recorded");
            let bound_margin = traj
                .initial_record
                .iter()
                .chain(&traj.records)
                .map(|r| {
                    let lhs = baseline.rhs(r.t) - r.ineq_slack;
                    z0 * r.t.exp() - lhs
                })
                .fold(f64::INFINITY, f64::min);
            let last = traj.last();
            let moments = tests.iter().map(|phi| phi.inner(&last.zeta)).collect::<Result<_>>().map_err(wrap)?;
            let run = WeakRun {
                n,
                orlicz_mollified,
                jensen_holds: orlicz_mollified <= orlicz_original,
                bound_margin,
                bound_holds: bound_margin >= 0.0,
                moments,
                t_final: last.t,
            };
            Ok((run, traj))
        })
        .collect();
    let runs: Vec<(WeakRun, Trajectory)> = runs.into_iter().collect::<Result<_>>()?;
    let mut u_l2_distances = Vec::new();
    let mut zeta_l1_distances = Vec::new();
    let mut moment_differences = Vec::new();
    for pair in runs.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let (mut du, mut dz) = (0.0f64, 0.0f64);
        for (sa, sb) in a.1.snapshots.iter().zip(&b.1.snapshots) {
            du = du.max(window_norm(&sa.u.sub(&sb.u)?, window, 2));
            dz = dz.max(window_norm(&sa.zeta.sub(&sb.zeta)?, window, 1));
        }
        let dm = a.0.moments.iter().zip(&b.0.moments).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let (n1, n2) = (a.0.n as u64, b.0.n as u64);
        u_l2_distances.push(PairDistance { n1, n2, distance: du });
        zeta_l1_distances.push(PairDistance { n1, n2, distance: dz });
        moment_differences.push(PairDistance { n1, n2, distance: dm });
    }
    let runs: Vec<WeakRun> = runs.into_iter().map(|r| r.0).collect();
    Ok(WeakLimitReport {
        scenario: scenario.name.clone(),
        n_list: n_list.to_vec(),
        orlicz_original,
        z0,
        window,
        bound_holds: runs.iter().all(|r| r.bound_holds),
        jensen_holds: runs.iter().all(|r| r.jensen_holds),
        runs,
        u_l2_distances,
        zeta_l1_distances,
        moment_differences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_is_a_projection() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let f = Field::from_fn(&g, |x| (x.sin() * 3.0).exp()).unwrap();
        let once = bona_smith_truncate(&f, 5.0).unwrap();
        let twice = bona_smith_truncate(&once, 5.0).unwrap();
        assert!(once.sub(&twice).unwrap().max_abs() < 1e-13);
        assert!(bona_smith_truncate(&f, 0.0).is_err());
    }

    #[test]
    fn truncation_removes_high_modes() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let f = Field::from_fn(&g, |x| (7.0 * x).sin()).unwrap();
        assert!(bona_smith_truncate(&f, 6.0).unwrap().max_abs() < 1e-14);
        let kept = bona_smith_truncate(&f, 7.0).unwrap();
        assert!(kept.sub(&f).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn mollifier_has_unit_mass() {
        let mass = simpson(mollifier, 0.0, 1.0, 4000);
        assert!((mass - 1.0).abs() < 1e-12, "{mass}");
        assert_eq!(mollifier(0.5), mollifier_constant() * (-4.0f64).exp());
        assert!(mollifier(0.05) > 0.0 && mollifier(-0.1) == 0.0 && mollifier(1.2) == 0.0);
    }

    #[test]
    fn mollify_constant_is_identity() {
        let g = Grid::new(10.0, 128).unwrap();
        let f = Field::constant(&g, 2.5);
        for n in [1, 3, 50] {
            let m = mollify(&f, n).unwrap();
            assert!(m.sub(&f).unwrap().max_abs() < 1e-14);
        }
        assert!(mollify(&f, 0).is_err());
    }

    #[test]
    fn recipes_build() {
        for sc in scenarios() {
            let (bath, state) = sc.setup(7).unwrap();
            assert_eq!(state.zeta.len(), sc.points);
            assert!(state.zeta.is_finite() && state.u.is_finite(), "{}", sc.name);
            assert_eq!(bath.beta(), sc.params.beta);
        }
    }

    #[test]
    fn algebraic_tail_depends_on_seed_only() {
        let sc = scenario("algebraic-tail").unwrap();
        let a = sc.setup(1).unwrap().1;
        let b = sc.setup(1).unwrap().1;
        let c = sc.setup(2).unwrap().1;
        assert_eq!(a.zeta.values(), b.zeta.values());
        assert_ne!(a.zeta.values(), c.zeta.values());
    }

    #[test]
    fn unknown_scenario_is_a_config_error() {
        assert!(matches!(scenario("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_validation() {
        let sc = scenario("rest").unwrap();
        assert!(bona_smith_experiment(&sc, 0, 1.0, &[8], 0.1).is_err());
        assert!(bona_smith_experiment(&sc, 0, 1.0, &[8, 12], 0.1).is_err());
        assert!(bona_smith_experiment(&sc, 0, 1.0, &[16, 8], 0.1).is_err());
        assert!(weak_limit_experiment(&sc, 0, &[2, 1]).is_err());
    }
}
