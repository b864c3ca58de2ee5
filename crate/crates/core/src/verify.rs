//! Verification suites behind the `verify-*` subcommands. Each report's
//! `pass()` is the conjunction of every check it carries.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::bathymetry::{Bathymetry, BathymetryPreset};
use crate::diagnostics::{
    compatibility_residual, entropy_drift, entropy_inequality_check, max_balance_residual, sigma0_shifted, ESTA_C1,
    ESTA_C2, ESTA_M,
};
use crate::dynamics::SystemKind;
use crate::elliptic::{coercivity_form, TbOperator};
use crate::error::{Error, Result};
use crate::estimates::{run_case, standard_suite, CaseResult, Corpus, SuiteConfig};
use crate::grid::{sobolev_norm, Field, Grid};
use crate::harness::{truncation_growth_check, GrowthReport, Scenario};

/// Scale-stability allowance of a shipped constant at doubled resolution.
pub const STABILITY_FACTOR: f64 = 1.1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyReport {
    pub scenario: String,
    pub completed: bool,
    pub abort: Option<String>,
    pub max_balance_residual: f64,
    pub balance_tolerance: f64,
    pub min_inequality_slack: f64,
    /// Only on flat-bottom runs.
    pub entropy_drift: Option<f64>,
    pub drift_tolerance: f64,
    /// Worst compatibility residual of the entropy pair on a 20 x 20 `(h, u)` grid.
    pub compatibility_residual: f64,
}

impl EntropyReport {
    pub fn pass(&self) -> bool {
        self.completed
            && self.max_balance_residual <= self.balance_tolerance
            && self.min_inequality_slack >= 0.0
            && self.entropy_drift.is_none_or(|d| d <= self.drift_tolerance)
            && self.compatibility_residual <= 1e-12
    }
}

/// Worst compatibility residual over `[0.2, 3] x [-2, 2]` sampled on a 20 x 20 grid.
pub fn compatibility_sweep(eps: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        for j in 0..20 {
            let h = 0.2 + 2.8 * i as f64 / 19.0;
            let u = -2.0 + 4.0 * j as f64 / 19.0;
            worst = worst.max(compatibility_residual(h, u, eps)?);
        }
    }
    Ok(worst)
}

/// Runs a small-bottom scenario and checks the entropy balance, the entropy
/// inequality, flat-bottom conservation and the entropy-pair identity.
pub fn verify_entropy(scenario: &Scenario, seed: u64) -> Result<EntropyReport> {
    if scenario.system != SystemKind::Bpw {
        return Err(Error::Config(format!(
            "entropy identities hold for the bpw system; scenario '{}' runs {}",
            scenario.name,
            scenario.system.name()
        )));
    }
    let out = scenario.run(seed)?;
    let traj = &out.trajectory;
    let tol = &scenario.params.tolerances;
    Ok(EntropyReport {
        scenario: scenario.name.clone(),
        completed: out.abort.is_none(),
        abort: out.abort.as_ref().map(|e| e.to_string()),
        max_balance_residual: max_balance_residual(traj),
        balance_tolerance: tol.balance_residual,
        min_inequality_slack: entropy_inequality_check(traj).unwrap_or(f64::NEG_INFINITY),
        entropy_drift: if out.bathymetry.is_flat() { entropy_drift(traj) } else { None },
        drift_tolerance: tol.entropy_drift,
        compatibility_residual: compatibility_sweep(scenario.params.eps)?,
    })
}

/// Elliptic checks for one bottom profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EllipticReport {
    pub preset: String,
    pub beta: f64,
    pub mu: f64,
    pub h0: f64,
    pub points: usize,
    pub samples: usize,
    /// Worst `|T_b u - f| / |f|` after solving.
    pub residual: f64,
    /// Worst `max |u - u_LU| / max |u_LU|` against a dense LU solve.
    pub dense_lu: f64,
    /// Worst `|<T u, v> - <u, T v>| / (|T u| |v|)`.
    pub self_adjoint: f64,
    /// Smallest `<T u, u> / |u|_{H^1}^2` over the samples.
    pub coercivity_measured: f64,
    /// `0.95 h0 / max(1, 18/(mu h0^2))`.
    pub coercivity_required: f64,
    /// Worst relative gap between the sum-of-squares form and `<T u, u>`.
    pub form_identity: f64,
    /// Smallest pivot of the finite-difference matrix.
    pub fd_min_pivot: f64,
}

impl EllipticReport {
    pub fn pass(&self) -> bool {
        self.residual <= 1e-10
            && self.dense_lu <= 1e-8
            && self.self_adjoint <= 1e-10
            && self.coercivity_measured >= self.coercivity_required
            && self.form_identity <= 1e-6
            && self.fd_min_pivot > 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EllipticSettings {
    pub length: f64,
    pub points: usize,
    pub beta: f64,
    pub mu: f64,
    pub h0: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for EllipticSettings {
    fn default() -> Self {
        Self {
            length: 64.0,
            points: 128,
            beta: 0.2,
            mu: 0.1,
            h0: 0.5,
            samples: 100,
            seed: 2024,
        }
    }
}

pub fn verify_elliptic(preset: &BathymetryPreset, cfg: &EllipticSettings) -> Result<EllipticReport> {
    let grid = Grid::new(cfg.length, cfg.points)?;
    let bath = Bathymetry::checked(preset.sample(&grid)?, cfg.beta, cfg.h0)?;
    let op = TbOperator::new(&bath, cfg.mu)?;
    let dense = op.dense_matrix();
    let m = grid.points();
    let a = DMatrix::from_fn(m, m, |i, j| dense[i][j]);
    let lu = a.lu();
    let corpus = Corpus::new(cfg.seed, cfg.samples + 1, cfg.length, m / 3, 1.0)?;
    let fields: Vec<Field> = (0..=cfg.samples).map(|i| corpus.sample(i, &grid)).collect::<Result<_>>()?;
    let per: Vec<[f64; 5]> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let (u, v) = (&fields[i], &fields[i + 1]);
            let x = op.solve(u)?;
            let residual = op.apply(&x)?.sub(u)?.l2_norm() / u.l2_norm();
            let reference = lu
                .solve(&DVector::from_column_slice(u.values()))
                .ok_or_else(|| Error::NotPositiveDefinite("dense matrix is singular".into()))?;
            let scale = reference.amax();
            let lu_gap = x.values().iter().zip(reference.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
            let tu = op.apply(u)?;
            let tv = op.apply(v)?;
            let sym = (tu.inner(v)? - u.inner(&tv)?).abs() / (tu.l2_norm() * v.l2_norm());
            let quad = tu.inner(u)?;
            let coer = quad / sobolev_norm(u, 1.0)?.powi(2);
            let form = (coercivity_form(&op, u)? - quad).abs() / quad.abs();
            Ok([residual, lu_gap, sym, coer, form])
        })
        .collect::<Result<_>>()?;
    let max_of = |k: usize| per.iter().map(|r| r[k]).fold(0.0, f64::max);
    Ok(EllipticReport {
        preset: preset.name().into(),
        beta: cfg.beta,
        mu: cfg.mu,
        h0: cfg.h0,
        points: m,
        samples: cfg.samples,
        residual: max_of(0),
        dense_lu: max_of(1),
        self_adjoint: max_of(2),
        coercivity_measured: per.iter().map(|r| r[3]).fold(f64::INFINITY, f64::min),
        coercivity_required: 0.95 * op.coercivity_constant(cfg.h0),
        form_identity: max_of(4),
        fd_min_pivot: op.finite_difference_matrix().min_pivot(),
    })
}

/// One estimate at base and doubled resolution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityResult {
    pub name: String,
    pub shipped: f64,
    pub base_max: f64,
    pub doubled_max: f64,
    /// Base maximum within the shipped constant.
    pub within: bool,
    /// Doubled maximum within `1.1 x` the shipped constant.
    pub stable: bool,
}

impl StabilityResult {
    fn new(base: &CaseResult, doubled: &CaseResult) -> Self {
        Self {
            name: base.name.clone(),
            shipped: base.shipped,
            base_max: base.report.max,
            doubled_max: doubled.report.max,
            within: base.within,
            stable: doubled.report.max <= STABILITY_FACTOR * base.shipped,
        }
    }
}

/// `sigma_0` two-sided bounds on a dense sample of `[-1, 50]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaBoundsReport {
    pub m: f64,
    pub c1: f64,
    pub c2: f64,
    pub samples: usize,
    pub violations: usize,
}

pub fn sigma_bounds_check(samples: usize) -> SigmaBoundsReport {
    let violations = (0..samples)
        .map(|i| -1.0 + 51.0 * i as f64 / (samples - 1) as f64)
        .filter(|&x| {
            let s = sigma0_shifted(x);
            let ok = if x < ESTA_M {
                ESTA_C1 * x * x <= s && s <= x * x / ESTA_C1
            } else {
                let xl = ESTA_C2 * x * x.ln();
                s <= x * x / ESTA_C2 && s >= xl && xl >= x
            };
            !ok
        })
        .count();
    SigmaBoundsReport {
        m: ESTA_M,
        c1: ESTA_C1,
        c2: ESTA_C2,
        samples,
        violations,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatesReport {
    pub config: SuiteConfig,
    pub cases: Vec<StabilityResult>,
    pub growth: GrowthReport,
    pub sigma_bounds: SigmaBoundsReport,
}

impl EstimatesReport {
    pub fn pass(&self) -> bool {
        self.cases.iter().all(|c| c.within && c.stable)
            && self.growth.exact_holds
            && self.growth.power_holds
            && self.sigma_bounds.violations == 0
    }
}

/// Truncation growth check on the Bona-Smith corpus: `s = 1`, `r in {1, 2}`.
pub fn growth_check(seed: u64, samples: usize) -> Result<GrowthReport> {
    let length = 8.0 * std::f64::consts::PI;
    let grid = Grid::new(length, 1024)?;
    let corpus = Corpus::new(seed, samples, length, 300, 2.0)?;
    truncation_growth_check(&corpus, &grid, 1.0, &[1.0, 2.0], &[8, 16, 32, 64])
}

pub fn verify_estimates(cfg: &SuiteConfig) -> Result<EstimatesReport> {
    let cases = standard_suite()
        .iter()
        .map(|case| Ok(StabilityResult::new(&run_case(case, cfg, 1)?, &run_case(case, cfg, 2)?)))
        .collect::<Result<_>>()?;
    Ok(EstimatesReport {
        config: cfg.clone(),
        cases,
        growth: growth_check(cfg.seed, cfg.samples)?,
        sigma_bounds: sigma_bounds_check(200_001),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario;

    #[test]
    fn compatibility_is_exact() {
        assert!(compatibility_sweep(0.1).unwrap() <= 1e-12);
    }

    #[test]
    fn sigma_bounds_hold() {
        assert_eq!(sigma_bounds_check(20_001).violations, 0);
    }

    #[test]
    fn entropy_suite_on_rest() {
        let r = verify_entropy(&scenario("rest").unwrap(), 0).unwrap();
        assert!(r.pass(), "{r:?}");
        assert_eq!(r.max_balance_residual, 0.0);
        assert_eq!(r.min_inequality_slack, 0.0);
    }

    #[test]
    fn entropy_suite_refuses_bp() {
        assert!(matches!(
            verify_entropy(&scenario("vacuum-start").unwrap(), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn elliptic_suite_small() {
        let cfg = EllipticSettings { samples: 5, ..Default::default() };
        let r = verify_elliptic(&BathymetryPreset::by_name("gaussian-bump").unwrap(), &cfg).unwrap();
        assert!(r.pass(), "{r:?}");
    }
}
