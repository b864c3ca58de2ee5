//! Smooth dyadic frequency decomposition.
//!
//! `eta` is the C-infinity bump equal to 1 on `[-1, 1]` and 0 outside `(-2, 2)`;
//! `phi(xi) = eta(xi) - eta(2 xi)` and `phi_N = phi(. / N)` for `N >= 2`,
//! `phi_1 = eta`. The aggregates used by the commutator and product estimates are
//!
//! - `P~_N   = sum_{N/4 <= K <= 4N} P_K`
//! - `P_<<N  = sum_{K <= N/8} P_K`
//! - `P_>~N  = sum_{K >= N/4} P_K = 1 - P_<<N`

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{apply_symbol, Field, Grid};

fn smooth_step(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// The bump `eta`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BumpEta;

impl BumpEta {
    pub fn eval(&self, xi: f64) -> f64 {
        let a = xi.abs();
        if a <= 1.0 {
            return 1.0;
        }
        if a >= 2.0 {
            return 0.0;
        }
        let up = smooth_step(2.0 - a);
        up / (up + smooth_step(a - 1.0))
    }

    /// `phi(xi) = eta(xi) - eta(2 xi)`.
    pub fn phi(&self, xi: f64) -> f64 {
        self.eval(xi) - self.eval(2.0 * xi)
    }

    /// Symbol of `P_N`.
    pub fn phi_n(&self, n: u64, xi: f64) -> f64 {
        if n == 1 {
            self.eval(xi)
        } else {
            self.phi(xi / n as f64)
        }
    }
}

pub fn is_dyadic(n: u64) -> bool {
    n >= 1 && n.is_power_of_two()
}

fn check_dyadic(n: u64) -> Result<()> {
    if is_dyadic(n) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "Littlewood-Paley index must be a power of two >= 1, got {n}"
        )))
    }
}

/// Dyadic `N` whose symbol touches the grid's frequency range, i.e. `N/2 < max |xi|`.
/// Their projectors sum to the identity on the grid.
pub fn dyadic_levels(grid: &Grid) -> Vec<u64> {
    let top = grid.max_wavenumber();
    let mut out = vec![1u64];
    let mut n = 2u64;
    while (n as f64) / 2.0 < top {
        out.push(n);
        n *= 2;
    }
    out
}

fn project_with(f: &Field, symbol: impl Fn(f64) -> f64) -> Field {
    apply_symbol(f, |_, xi| Complex64::new(symbol(xi), 0.0))
}

/// `P_N f`.
pub fn lp_project(f: &Field, n: u64) -> Result<Field> {
    check_dyadic(n)?;
    f.ensure_finite("lp_project input")?;
    let eta = BumpEta;
    Ok(project_with(f, |xi| eta.phi_n(n, xi)))
}

fn aggregate_symbol(grid: &Grid, keep: impl Fn(u64) -> bool) -> impl Fn(f64) -> f64 {
    let levels: Vec<u64> = dyadic_levels(grid).into_iter().filter(|&k| keep(k)).collect();
    move |xi| levels.iter().map(|&k| BumpEta.phi_n(k, xi)).sum()
}

/// `P~_N f`: sum of `P_K f` over `N/4 <= K <= 4N`; equals `f` on `N/4 <= |xi| <= 4N`.
pub fn lp_tilde(f: &Field, n: u64) -> Result<Field> {
    check_dyadic(n)?;
    f.ensure_finite("lp_tilde input")?;
    let sym = aggregate_symbol(f.grid(), |k| 4 * k >= n && k <= 4 * n);
    Ok(project_with(f, sym))
}

/// `P_<<N f`: sum of `P_K f` over `K <= N/8`; spectrum inside `|xi| < N/4`.
pub fn lp_low(f: &Field, n: u64) -> Result<Field> {
    check_dyadic(n)?;
    f.ensure_finite("lp_low input")?;
    let sym = aggregate_symbol(f.grid(), |k| 8 * k <= n);
    Ok(project_with(f, sym))
}

/// `P_>~N f`: sum of `P_K f` over `K >= N/4`.
pub fn lp_high(f: &Field, n: u64) -> Result<Field> {
    check_dyadic(n)?;
    f.ensure_finite("lp_high input")?;
    let sym = aggregate_symbol(f.grid(), |k| 4 * k >= n);
    Ok(project_with(f, sym))
}
