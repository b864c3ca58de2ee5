//! Bounded-ratio checks of the harmonic-analysis estimates over seeded random
//! corpora: commutator, product and frequency-localised product bounds, and
//! the inverse bound of the elliptic operator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::bathymetry::{validate_depth_with, Bathymetry};
use crate::elliptic::TbOperator;
use crate::error::{Error, Result};
use crate::grid::{
    derivative_unchecked, sobolev_mu_norm_unchecked, sobolev_norm_unchecked, w_inf_proxy, Field, Grid,
};
use crate::littlewood_paley::{is_dyadic, lp_high, lp_low, lp_project, lp_tilde};

/// Positive increment standing for the `0+` in `W^{s+,inf}`.
pub const PLUS: f64 = 0.1;

/// Seeded generator of band-limited random fields with spectrum
/// `N(0,1) (1 + xi^2)^{-decay/2}` on integer modes `0 <= k <= max_mode`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Corpus {
    pub seed: u64,
    pub size: usize,
    pub length: f64,
    pub max_mode: usize,
    pub decay: f64,
}

impl Corpus {
    pub fn new(seed: u64, size: usize, length: f64, max_mode: usize, decay: f64) -> Result<Self> {
        if size == 0 || max_mode == 0 || !(length > 0.0) || !decay.is_finite() {
            return Err(Error::InvalidParameter("corpus needs size, max_mode, length > 0".into()));
        }
        Ok(Self { seed, size, length, max_mode, decay })
    }

    fn rng(&self, index: usize) -> ChaCha8Rng {
        let mixed = self
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(index as u64)
            .rotate_left(17);
        ChaCha8Rng::seed_from_u64(mixed ^ (index as u64))
    }

    /// Sample `index` on `grid`; the same continuum function on every grid fine
    /// enough to hold `max_mode`.
    pub fn sample(&self, index: usize, grid: &Grid) -> Result<Field> {
        if (grid.length() - self.length).abs() > 1e-12 * self.length {
            return Err(Error::GridMismatch);
        }
        let m = grid.points();
        if 2 * self.max_mode >= m {
            return Err(Error::InvalidGrid(format!(
                "grid with {m} points cannot hold mode {}",
                self.max_mode
            )));
        }
        let mut rng = self.rng(index);
        let mut spec = vec![Complex64::new(0.0, 0.0); m];
        let scale = m as f64;
        for k in 0..=self.max_mode {
            let xi = 2.0 * std::f64::consts::PI * k as f64 / self.length;
            let w = (1.0 + xi * xi).powf(-0.5 * self.decay);
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            if k == 0 {
                spec[0] = Complex64::new(a * w * scale, 0.0);
            } else {
                let c = Complex64::new(a * w, -b * w) * (0.5 * scale);
                spec[k] = c;
                spec[m - k] = c.conj();
            }
        }
        Field::new(grid, grid.inverse(spec))
    }
}

/// Per-sample ratios of one estimate with summary statistics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioReport {
    pub name: String,
    pub ratios: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    pub p95: f64,
    pub grid_points: Vec<usize>,
    pub n_values: Vec<u64>,
}

impl RatioReport {
    pub fn new(name: impl Into<String>, ratios: Vec<f64>, grid_points: Vec<usize>, n_values: Vec<u64>) -> Self {
        let mut sorted = ratios.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let max = sorted.last().copied().unwrap_or(0.0);
        let mean = if n == 0 { 0.0 } else { sorted.iter().sum::<f64>() / n as f64 };
        let p95 = if n == 0 {
            0.0
        } else {
            sorted[((0.95 * (n - 1) as f64).round() as usize).min(n - 1)]
        };
        Self {
            name: name.into(),
            ratios,
            max,
            mean,
            p95,
            grid_points,
            n_values,
        }
    }
}

fn ratio(lhs: f64, rhs: f64, what: &str) -> Result<f64> {
    if rhs > 0.0 {
        Ok(lhs / rhs)
    } else if lhs <= 1e-300 {
        Ok(0.0)
    } else {
        Err(Error::InvalidParameter(format!("{what}: right side vanishes while left side is {lhs:.3e}")))
    }
}

fn check_big_n(n: u64, min: u64) -> Result<()> {
    if is_dyadic(n) && n >= min {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("N must be dyadic and >= {min}, got {n}")))
    }
}

/// `|[P_N, P_<<N f] g_x|_2 / (|f_x|_inf |P~_N g|_2)`.
pub fn commutator_ratio(f: &Field, g: &Field, n: u64) -> Result<f64> {
    check_big_n(n, 8)?;
    f.same_grid(g)?;
    let low = lp_low(f, n)?;
    let gx = derivative_unchecked(g, 1);
    let lhs = lp_project(&low.mul(&gx)?, n)?.sub(&low.mul(&lp_project(&gx, n)?)?)?;
    let rhs = derivative_unchecked(f, 1).max_abs() * lp_tilde(g, n)?.l2_norm();
    // both terms of the commutator are of size |P_<<N f|_inf |g_x|_2; cancellation below that is rounding
    let floor = 1e-12 * low.max_abs() * gx.l2_norm();
    let lhs = lhs.l2_norm();
    ratio(if lhs <= floor { 0.0 } else { lhs }, rhs, "commutator")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProductKind {
    /// `|fg|_{H^t} <= C |f|_{H^p} |g|_{H^r}`, `r + p > t + 1/2 > 0`, `r, p >= t`.
    Prod2 { t: f64, p: f64, r: f64 },
    /// `|fg|_{H^s} <= C (|f|_inf |g|_{H^s} + |f|_{H^s} |g|_inf)`, `s >= 0`.
    Prod3 { s: f64 },
    /// `|fg|_{H^theta} <= C |f|_{W^{|theta|+,inf}} |g|_{H^theta}`.
    Prod5 { theta: f64 },
    /// `N^theta |[P_N, f] g_x|_2 <= C |f_x|_{W^{|theta|+,inf}} |g|_{H^theta}`.
    Prod6 { theta: f64, n: u64 },
    /// `N^s |P_N(P_>~N f g_x)|_2 <= C min(|f|_{H^{s+1}} |g|_inf, |f|_{H^s} |g_x|_inf)`, `s > 0`.
    ProN1 { s: f64, n: u64 },
    /// `N^{s-1} |P_N(P_>~N f g_x)|_2 <= C |f|_{H^{s+1}} |g|_{H^{s-1}}`, `s > 1/2`.
    ProN2 { s: f64, n: u64 },
}

impl ProductKind {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            Self::Prod2 { t, p, r } => {
                if !(r + p > t + 0.5 && t + 0.5 > 0.0 && r >= t && p >= t) {
                    return bad(format!("prod2 needs r + p > t + 1/2 > 0 and r, p >= t (t={t}, p={p}, r={r})"));
                }
            }
            Self::Prod3 { s } => {
                if !(s >= 0.0) {
                    return bad(format!("prod3 needs s >= 0, got {s}"));
                }
            }
            Self::Prod5 { theta } => {
                if !theta.is_finite() {
                    return bad("prod5 needs finite theta".into());
                }
            }
            Self::Prod6 { theta, n } => {
                if !theta.is_finite() {
                    return bad("prod6 needs finite theta".into());
                }
                check_big_n(n, 1)?;
            }
            Self::ProN1 { s, n } => {
                if !(s > 0.0) {
                    return bad(format!("proN1 needs s > 0, got {s}"));
                }
                check_big_n(n, 8)?;
            }
            Self::ProN2 { s, n } => {
                if !(s > 0.5) {
                    return bad(format!("proN2 needs s > 1/2, got {s}"));
                }
                check_big_n(n, 8)?;
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Prod2 { t, p, r } => format!("prod2(t={t},p={p},r={r})"),
            Self::Prod3 { s } => format!("prod3(s={s})"),
            Self::Prod5 { theta } => format!("prod5(theta={theta})"),
            Self::Prod6 { theta, n } => format!("prod6(theta={theta},N={n})"),
            Self::ProN1 { s, n } => format!("proN1(s={s},N={n})"),
            Self::ProN2 { s, n } => format!("proN2(s={s},N={n})"),
        }
    }

    /// Same kind at another dyadic level.
    pub fn with_n(&self, n: u64) -> Self {
        match *self {
            Self::Prod6 { theta, .. } => Self::Prod6 { theta, n },
            Self::ProN1 { s, .. } => Self::ProN1 { s, n },
            Self::ProN2 { s, .. } => Self::ProN2 { s, n },
            other => other,
        }
    }
}

/// Left side over right side of the estimate `kind`, `W^{s,inf}` norms by the grid-max proxy.
pub fn product_ratio(kind: ProductKind, f: &Field, g: &Field) -> Result<f64> {
    kind.validate()?;
    f.same_grid(g)?;
    let h = |v: &Field, s: f64| sobolev_norm_unchecked(v, s);
    match kind {
        ProductKind::Prod2 { t, p, r } => ratio(h(&f.mul(g)?, t), h(f, p) * h(g, r), "prod2"),
        ProductKind::Prod3 { s } => ratio(
            h(&f.mul(g)?, s),
            f.max_abs() * h(g, s) + h(f, s) * g.max_abs(),
            "prod3",
        ),
        ProductKind::Prod5 { theta } => ratio(
            h(&f.mul(g)?, theta),
            w_inf_proxy(f, theta.abs() + PLUS) * h(g, theta),
            "prod5",
        ),
        ProductKind::Prod6 { theta, n } => {
            let gx = derivative_unchecked(g, 1);
            let comm = lp_project(&f.mul(&gx)?, n)?.sub(&f.mul(&lp_project(&gx, n)?)?)?;
            let fx = derivative_unchecked(f, 1);
            ratio(
                (n as f64).powf(theta) * comm.l2_norm(),
                w_inf_proxy(&fx, theta.abs() + PLUS) * h(g, theta),
                "prod6",
            )
        }
        ProductKind::ProN1 { s, n } => {
            let gx = derivative_unchecked(g, 1);
            let lhs = (n as f64).powf(s) * lp_project(&lp_high(f, n)?.mul(&gx)?, n)?.l2_norm();
            let rhs = f64::min(h(f, s + 1.0) * g.max_abs(), h(f, s) * gx.max_abs());
            ratio(lhs, rhs, "proN1")
        }
        ProductKind::ProN2 { s, n } => {
            let gx = derivative_unchecked(g, 1);
            let lhs = (n as f64).powf(s - 1.0) * lp_project(&lp_high(f, n)?.mul(&gx)?, n)?.l2_norm();
            ratio(lhs, h(f, s + 1.0) * h(g, s - 1.0), "proN2")
        }
    }
}

/// `(|T_b^{-1} f|_{H^s} + sqrt(mu) |d_x T_b^{-1} f|_{H^s})`-type ratio, measured as
/// `|T_b^{-1} f|_{H^{s+1}_mu} / |f|_{H^s}` for every corpus sample.
pub fn inverse_estimate_ratio(
    bath: &Bathymetry,
    mu: f64,
    s: f64,
    corpus: &Corpus,
    h0: f64,
    c0: f64,
) -> Result<RatioReport> {
    let depth = validate_depth_with(bath, h0, c0);
    if !depth.depth_ok {
        return Err(Error::Hypothesis(format!(
            "min h_b = {:.4e} below h0 = {h0}",
            depth.min_hb
        )));
    }
    if s < 0.0 && !depth.smallness_ok {
        return Err(Error::Hypothesis(format!(
            "bottom smallness ratio {:.4} exceeds C0 = {c0} (required for s < 0)",
            depth.smallness_ratio
        )));
    }
    let op = TbOperator::new(bath, mu)?;
    let grid = bath.grid();
    let ratios = (0..corpus.size)
        .into_par_iter()
        .map(|i| {
            let f = corpus.sample(i, grid)?;
            let u = op.solve(&f)?;
            ratio(sobolev_mu_norm_unchecked(&u, s, mu), sobolev_norm_unchecked(&f, s), "inverse estimate")
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioReport::new(
        format!("estT(s={s},beta={})", bath.beta()),
        ratios,
        vec![grid.points()],
        vec![],
    ))
}

/// Exact flat-bottom single-mode ratio `sqrt(1 + mu k^2) / (1 + mu k^2/3)`.
pub fn flat_single_mode_ratio(mu: f64, k: f64) -> f64 {
    (1.0 + mu * k * k).sqrt() / (1.0 + mu * k * k / 3.0)
}

/// Supremum over `k` of [`flat_single_mode_ratio`], attained at `mu k^2 = 1`.
pub const FLAT_RATIO_SUP: f64 = 1.060_660_171_779_821_2;

/// One estimate with its shipped constant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateCase {
    pub name: String,
    pub estimate: Estimate,
    pub shipped: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "estimate", rename_all = "lowercase")]
pub enum Estimate {
    /// Commutator bound swept over dyadic `N`.
    Commutator { n_list: Vec<u64> },
    /// Product bound; kinds with an `N` are swept over `n_list`.
    Product { kind: ProductKind, n_list: Vec<u64> },
    /// Inverse bound for the elliptic operator on a gaussian bump.
    Inverse { s: f64, beta: f64, mu: f64 },
}

/// Grid and corpus settings of a suite run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub samples: usize,
    pub seed: u64,
    /// Points of the base grid on `[0, 2 pi)` used by commutator/product estimates.
    pub points: usize,
    pub max_mode: usize,
    /// Points of the base grid for the inverse estimates on `[0, inverse_length)`.
    pub inverse_points: usize,
    pub inverse_length: f64,
    pub inverse_max_mode: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            samples: 200,
            seed: 2024,
            points: 2048,
            max_mode: 400,
            inverse_points: 512,
            inverse_length: 32.0,
            inverse_max_mode: 120,
        }
    }
}

/// Result of one case at one resolution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseResult {
    pub name: String,
    pub shipped: f64,
    pub report: RatioReport,
    pub within: bool,
}

const DYADIC_SWEEP: [u64; 6] = [8, 16, 32, 64, 128, 256];

/// The shipped constants: maximum ratio of the default 200-sample suite at the
/// base resolution, rounded up by about 10%.
pub fn standard_suite() -> Vec<EstimateCase> {
    let ns = DYADIC_SWEEP.to_vec();
    let prod = |kind: ProductKind, shipped: f64| EstimateCase {
        name: kind.label(),
        estimate: Estimate::Product { kind, n_list: ns.clone() },
        shipped,
    };
    let mut cases = vec![EstimateCase {
        name: "cm1".into(),
        estimate: Estimate::Commutator { n_list: ns.clone() },
        shipped: 0.70,
    }];
    cases.push(prod(ProductKind::Prod2 { t: 0.0, p: 1.0, r: 0.0 }, 0.52));
    cases.push(prod(ProductKind::Prod2 { t: 1.0, p: 1.0, r: 1.0 }, 0.43));
    cases.push(prod(ProductKind::Prod2 { t: 0.5, p: 1.0, r: 1.0 }, 0.072));
    cases.push(prod(ProductKind::Prod3 { s: 1.0 }, 0.80));
    cases.push(prod(ProductKind::Prod3 { s: 2.0 }, 0.92));
    cases.push(prod(ProductKind::Prod5 { theta: 1.0 }, 0.59));
    cases.push(prod(ProductKind::Prod5 { theta: -1.0 }, 0.61));
    cases.push(prod(ProductKind::Prod6 { theta: 0.5, n: 8 }, 0.143));
    cases.push(prod(ProductKind::Prod6 { theta: -0.5, n: 8 }, 0.060));
    cases.push(prod(ProductKind::ProN1 { s: 1.0, n: 8 }, 0.27));
    cases.push(prod(ProductKind::ProN2 { s: 1.0, n: 8 }, 0.025));
    for (s, shipped) in [(-1.0, 1.26), (-0.5, 1.25), (0.0, 1.21), (0.5, 1.06), (1.0, 0.75)] {
        cases.push(EstimateCase {
            name: format!("estT(s={s})"),
            estimate: Estimate::Inverse { s, beta: 0.2, mu: 0.5 },
            shipped,
        });
    }
    cases
}

/// Runs one case with grid points and corpus band both multiplied by `refine`
/// (1 = base resolution, 2 = doubled).
pub fn run_case(case: &EstimateCase, cfg: &SuiteConfig, refine: usize) -> Result<CaseResult> {
    let report = match &case.estimate {
        Estimate::Commutator { n_list } => {
            let grid = Grid::new(2.0 * std::f64::consts::PI, cfg.points * refine)?;
            pair_sweep(&case.name, cfg, &grid, refine, n_list, |f, g, n| commutator_ratio(f, g, n))?
        }
        Estimate::Product { kind, n_list } => {
            let grid = Grid::new(2.0 * std::f64::consts::PI, cfg.points * refine)?;
            let has_n = matches!(kind, ProductKind::Prod6 { .. } | ProductKind::ProN1 { .. } | ProductKind::ProN2 { .. });
            let ns: Vec<u64> = if has_n { n_list.clone() } else { vec![0] };
            let kind = *kind;
            pair_sweep(&case.name, cfg, &grid, refine, &ns, move |f, g, n| {
                let k = if has_n { kind.with_n(n) } else { kind };
                product_ratio(k, f, g)
            })?
        }
        Estimate::Inverse { s, beta, mu } => {
            let grid = Grid::new(cfg.inverse_length, cfg.inverse_points * refine)?;
            let bath = inverse_bathymetry(&grid, *beta)?;
            let corpus = Corpus::new(cfg.seed, cfg.samples, cfg.inverse_length, cfg.inverse_max_mode * refine, 1.0)?;
            let mut r = inverse_estimate_ratio(&bath, *mu, *s, &corpus, 0.5, crate::bathymetry::DEFAULT_C0)?;
            r.name = case.name.clone();
            r
        }
    };
    let within = report.max <= case.shipped;
    Ok(CaseResult {
        name: case.name.clone(),
        shipped: case.shipped,
        report,
        within,
    })
}

/// Gaussian bump used by the inverse-estimate cases.
pub fn inverse_bathymetry(grid: &Grid, beta: f64) -> Result<Bathymetry> {
    let preset = crate::bathymetry::BathymetryPreset::GaussianBump { amplitude: 1.0, width: 2.0 };
    Bathymetry::from_preset(grid, &preset, beta)
}

fn pair_sweep<F>(name: &str, cfg: &SuiteConfig, grid: &Grid, refine: usize, n_list: &[u64], eval: F) -> Result<RatioReport>
where
    F: Fn(&Field, &Field, u64) -> Result<f64> + Sync,
{
    let len = 2.0 * std::f64::consts::PI;
    let band = cfg.max_mode * refine;
    let fs = Corpus::new(cfg.seed, cfg.samples, len, band, 2.0)?;
    let gs = Corpus::new(cfg.seed.wrapping_add(1), cfg.samples, len, band, 1.0)?;
    let per_sample = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let f = fs.sample(i, grid)?;
            let g = gs.sample(i, grid)?;
            n_list
                .iter()
                .map(|&n| eval(&f, &g, n))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios = per_sample.into_iter().flatten().collect();
    Ok(RatioReport::new(
        name,
        ratios,
        vec![grid.points()],
        n_list.iter().copied().filter(|&n| n > 0).collect(),
    ))
}
