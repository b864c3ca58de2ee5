//! Scalar functionals and identities: the entropy kernel `sigma_0`, entropy and
//! flux, the Orlicz functional, energies, the entropy balance and inequality,
//! the `u_x` reconstruction and the characteristic-flow positivity identity.

use serde::Serialize;

use crate::bathymetry::{total_height, Bathymetry, Params, State};
use crate::dynamics::Trajectory;
use crate::elliptic::helmholtz_unchecked;
use crate::error::{Error, Result};
use crate::grid::{dealias, derivative_unchecked, sobolev_mu_norm_unchecked, sobolev_norm_unchecked, Field};

/// Threshold of the series branch in [`sigma0_shifted`].
const SERIES_RADIUS: f64 = 0.1;

/// Split point `M` of the two-sided bounds on `sigma_0(1 + x)`.
pub const ESTA_M: f64 = 4.5;
/// `c1 x^2 <= sigma_0(1+x) <= x^2 / c1` on `-1 <= x < ESTA_M`.
pub const ESTA_C1: f64 = 0.2;
/// `x^2 / c2 >= sigma_0(1+x) >= c2 x ln x >= x` for `x >= ESTA_M`.
pub const ESTA_C2: f64 = 0.7;
/// `int sigma_0(1 + eps zeta - beta b) <= C (eps^2 |zeta|^2 + beta^2 |b|^2)`.
pub const ORLICZ_QUADRATIC_CONSTANT: f64 = 2.0;

/// `sigma_0(x) = x ln x - x + 1`, `sigma_0(0) = 1`.
pub fn sigma0(x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma_0 needs x >= 0, got {x}")));
    }
    Ok(sigma0_shifted(x - 1.0))
}

/// `sigma_0(1 + y)` for `y >= -1`, accurate near `y = 0`.
pub fn sigma0_shifted(y: f64) -> f64 {
    if y <= -1.0 {
        return 1.0;
    }
    if y.abs() < SERIES_RADIUS {
        // sum_{n>=2} (-1)^n y^n / (n (n-1))
        let mut term = y * y;
        let mut sum = 0.0;
        let mut n = 2.0;
        loop {
            let add = term / (n * (n - 1.0));
            sum += add;
            if add.abs() <= 1e-18 * sum.abs() || n > 60.0 {
                break;
            }
            term *= -y;
            n += 1.0;
        }
        sum
    } else {
        (1.0 + y) * y.ln_1p() - y
    }
}

/// `h - 1 = eps zeta - beta b` computed without forming `h`.
fn height_excess(zeta: &Field, bath: &Bathymetry, eps: f64) -> Result<Field> {
    zeta.same_grid(bath.b())?;
    let beta = bath.beta();
    Ok(Field::from_raw(
        zeta.grid(),
        zeta.values()
            .iter()
            .zip(bath.b().values())
            .map(|(z, b)| eps * z - beta * b)
            .collect(),
    ))
}

fn check_admissible(y: &Field) -> Result<()> {
    let min = y.min();
    if min < -1.0 {
        return Err(Error::Hypothesis(format!(
            "total height {:.6e} is negative; state outside the admissible set",
            1.0 + min
        )));
    }
    Ok(())
}

/// `|zeta|_{Lambda sigma_0} = int sigma_0(1 + eps zeta - beta b)`.
pub fn orlicz_norm(zeta: &Field, bath: &Bathymetry, eps: f64) -> Result<f64> {
    let y = height_excess(zeta, bath, eps)?;
    check_admissible(&y)?;
    Ok(y.grid().dx() * y.values().iter().map(|&v| sigma0_shifted(v)).sum::<f64>())
}

/// `H = int u^2/2 + sigma_0(h)/eps^2 + (mu/6) u_x^2`.
pub fn entropy_total(state: &State, bath: &Bathymetry, p: &Params) -> Result<f64> {
    let ux = derivative_unchecked(&state.u, 1);
    let orlicz = orlicz_norm(&state.zeta, bath, p.eps)?;
    let dx = state.grid().dx();
    let kinetic: f64 = state.u.values().iter().map(|v| 0.5 * v * v).sum::<f64>() * dx;
    let dispersive: f64 = ux.values().iter().map(|v| v * v).sum::<f64>() * dx * p.mu / 6.0;
    Ok(kinetic + orlicz / (p.eps * p.eps) + dispersive)
}

fn check_height(h: f64) -> Result<()> {
    if h >= 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("height must be >= 0, got {h}")))
    }
}

/// `q(h, u) = h ln h u / eps + eps u^3 / 3`.
pub fn entropy_flux(h: f64, u: f64, eps: f64) -> Result<f64> {
    check_height(h)?;
    let alpha = if h == 0.0 { 0.0 } else { h * h.ln() };
    Ok(alpha * u / eps + eps * u * u * u / 3.0)
}

/// Max-norm of `grad eta . grad f - grad q` with `f = (eps h u, h/eps + eps u^2/2)`.
pub fn compatibility_residual(h: f64, u: f64, eps: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("height must be > 0, got {h}")));
    }
    let ln = h.ln();
    let (eta_h, eta_u) = (ln / (eps * eps), u);
    // Jacobian of f, columns d/dh and d/du
    let (f1_h, f1_u) = (eps * u, eps * h);
    let (f2_h, f2_u) = (1.0 / eps, eps * u);
    let lhs_h = eta_h * f1_h + eta_u * f2_h;
    let lhs_u = eta_h * f1_u + eta_u * f2_u;
    let q_h = (ln + 1.0) * u / eps;
    let q_u = h * ln / eps + eps * u * u;
    Ok((lhs_h - q_h).abs().max((lhs_u - q_u).abs()))
}

/// `E^s = |zeta|_{H^s}^2 + nu |zeta_x|_{H^s}^2 + |u|_{H^{s+1}_mu}^2`.
pub fn energy_es(state: &State, s: f64, mu: f64, nu: f64) -> Result<f64> {
    if !(mu > 0.0) || !(nu >= 0.0) || !s.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "energy needs mu > 0, nu >= 0, finite s; got mu = {mu}, nu = {nu}, s = {s}"
        )));
    }
    state.zeta.same_grid(&state.u)?;
    Ok(energy_unchecked(state, s, mu, nu))
}

fn energy_unchecked(state: &State, s: f64, mu: f64, nu: f64) -> f64 {
    let zeta = if nu > 0.0 {
        sobolev_mu_norm_unchecked(&state.zeta, s, nu).powi(2)
    } else {
        sobolev_norm_unchecked(&state.zeta, s).powi(2)
    };
    zeta + sobolev_mu_norm_unchecked(&state.u, s, mu).powi(2)
}

/// `(beta/eps) int b_x u`, the entropy source (`dH/dt = -source`).
pub fn entropy_source(state: &State, bath: &Bathymetry, eps: f64) -> Result<f64> {
    if bath.beta() == 0.0 {
        return Ok(0.0);
    }
    Ok(bath.beta() / eps * bath.bx().inner(&state.u)?)
}

/// Initial quantity `Z_0 = |u_0|^2_{H^1_mu} + int sigma_0(h_0)/eps^2 + (beta/(2 eps))^2 |b_x|^2`
/// of the entropy inequality `LHS(t) <= Z_0 e^t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InequalityBaseline {
    pub z0: f64,
    pub t0: f64,
}

impl InequalityBaseline {
    pub fn new(initial: &State, bath: &Bathymetry, p: &Params) -> Result<Self> {
        let u = sobolev_mu_norm_unchecked(&initial.u, 0.0, p.mu).powi(2);
        let o = orlicz_norm(&initial.zeta, bath, p.eps)? / (p.eps * p.eps);
        let bx = bath.bx();
        let b = (bath.beta() / (2.0 * p.eps)).powi(2) * bx.inner(&bx)?;
        Ok(Self { z0: u + o + b, t0: initial.t })
    }

    pub fn rhs(&self, t: f64) -> f64 {
        self.z0 * (t - self.t0).exp()
    }
}

/// `LHS(t) = |u|^2_{H^1_mu}/2 + int sigma_0(h)/eps^2`.
pub fn inequality_lhs(state: &State, bath: &Bathymetry, p: &Params) -> Result<f64> {
    let u = sobolev_mu_norm_unchecked(&state.u, 0.0, p.mu).powi(2);
    Ok(0.5 * u + orlicz_norm(&state.zeta, bath, p.eps)? / (p.eps * p.eps))
}

/// Per-step scalars.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `(s, E^s)` pairs.
    pub energies: Vec<(f64, f64)>,
    pub entropy_h: f64,
    pub orlicz: f64,
    pub min_h: f64,
    /// Normalised entropy balance residual against the previous record (0 for the first).
    pub balance_residual: f64,
    pub ineq_slack: f64,
    pub sup_zeta: f64,
    pub sup_u: f64,
    pub sup_ux: f64,
    pub entropy_source: f64,
    pub mass: f64,
}

impl DiagnosticsRecord {
    pub fn compute(
        state: &State,
        bath: &Bathymetry,
        p: &Params,
        s_list: &[f64],
        baseline: &InequalityBaseline,
        prev: Option<&DiagnosticsRecord>,
    ) -> Result<Self> {
        let energies = s_list
            .iter()
            .map(|&s| (s, energy_unchecked(state, s, p.mu, p.nu)))
            .collect();
        let entropy_h = entropy_total(state, bath, p)?;
        let orlicz = orlicz_norm(&state.zeta, bath, p.eps)?;
        let source = entropy_source(state, bath, p.eps)?;
        let lhs = 0.5 * sobolev_mu_norm_unchecked(&state.u, 0.0, p.mu).powi(2) + orlicz / (p.eps * p.eps);
        let balance_residual = match prev {
            Some(r) => entropy_balance_residual(r, entropy_h, source, state.t),
            None => 0.0,
        };
        Ok(Self {
            t: state.t,
            energies,
            entropy_h,
            orlicz,
            min_h: total_height(&state.zeta, bath, p.eps)?.min(),
            balance_residual,
            ineq_slack: baseline.rhs(state.t) - lhs,
            sup_zeta: state.zeta.max_abs(),
            sup_u: state.u.max_abs(),
            sup_ux: derivative_unchecked(&state.u, 1).max_abs(),
            entropy_source: source,
            mass: state.zeta.integral(),
        })
    }
}

/// `|[H(t1) - H(t0)]/dt + (S(t0) + S(t1))/2| / max(1, H(t0))` with `S = (beta/eps) int b_x u`.
pub fn entropy_balance_residual(prev: &DiagnosticsRecord, h1: f64, s1: f64, t1: f64) -> f64 {
    let dt = t1 - prev.t;
    let r = (h1 - prev.entropy_h) / dt + 0.5 * (prev.entropy_source + s1);
    r.abs() / prev.entropy_h.max(1.0)
}

/// Largest balance residual over consecutive records of a trajectory.
pub fn max_balance_residual(traj: &Trajectory) -> f64 {
    traj.records.iter().map(|r| r.balance_residual).fold(0.0, f64::max)
}

/// `max_t |H(t) - H(0)| / max(1, H(0))`.
pub fn entropy_drift(traj: &Trajectory) -> Option<f64> {
    let h0 = traj.initial_record.as_ref()?.entropy_h;
    Some(
        traj.records
            .iter()
            .map(|r| (r.entropy_h - h0).abs())
            .fold(0.0, f64::max)
            / h0.max(1.0),
    )
}

/// Worst (smallest) slack `Z_0 e^t - LHS(t)` over the stored records, including `t = 0`.
pub fn entropy_inequality_check(traj: &Trajectory) -> Option<f64> {
    let first = traj.initial_record.as_ref()?;
    Some(
        traj.records
            .iter()
            .map(|r| r.ineq_slack)
            .fold(first.ineq_slack, f64::min),
    )
}

/// Right side of `u_tx = (3/mu) zeta + f1 + f2 + f3 + f4` for the small-bottom system:
/// `f1 = -(3/mu) K*(zeta - (beta/eps) b)`, `f2 = (3 eps/(2 mu)) u^2`,
/// `f3 = -(3 eps/(2 mu)) K*u^2`, `f4 = -(3 beta/(mu eps)) K*b`, with `K* = (1 - (mu/3) d^2)^{-1}`.
pub fn ux_tendency(state: &State, bath: &Bathymetry, p: &Params) -> Result<Field> {
    state.zeta.same_grid(bath.b())?;
    let (mu, eps, beta) = (p.mu, p.eps, bath.beta());
    let a = mu / 3.0;
    let u2 = dealias(&state.u.mul(&state.u)?);
    let shifted = state.zeta.axpy(-beta / eps, bath.b())?;
    let f1 = helmholtz_unchecked(&shifted, a).scale(-3.0 / mu);
    let f2 = u2.scale(1.5 * eps / mu);
    let f3 = helmholtz_unchecked(&u2, a).scale(-1.5 * eps / mu);
    let f4 = helmholtz_unchecked(bath.b(), a).scale(-3.0 * beta / (mu * eps));
    state
        .zeta
        .scale(3.0 / mu)
        .add(&f1)?
        .add(&f2)?
        .add(&f3)?
        .add(&f4)
}

/// Max over stored times of `|u_x(t) - u_x(0) - int_0^t u_tx|`, the time integral by the
/// trapezoid rule over consecutive snapshots.
pub fn ux_reconstruction_check(traj: &Trajectory, bath: &Bathymetry, p: &Params) -> Result<f64> {
    let snaps = &traj.snapshots;
    let first = &snaps[0];
    let ux0 = derivative_unchecked(&first.u, 1);
    let mut acc = ux0.clone();
    let mut prev_rate = ux_tendency(first, bath, p)?;
    let mut worst: f64 = 0.0;
    for w in snaps.windows(2) {
        let dt = w[1].t - w[0].t;
        let rate = ux_tendency(&w[1], bath, p)?;
        acc = acc.axpy(0.5 * dt, &prev_rate.add(&rate)?)?;
        let direct = derivative_unchecked(&w[1].u, 1);
        worst = worst.max(direct.sub(&acc)?.max_abs());
        prev_rate = rate;
    }
    Ok(worst)
}

/// Result of following one characteristic `q' = eps u(t, q)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharacteristicReport {
    pub x0: f64,
    /// `(t, q(t))` with `q` unwrapped (not reduced modulo the period).
    pub path: Vec<(f64, f64)>,
    /// `max_t |h(t, q) - h(0, x0) exp(-eps int_0^t u_x(s, q(s)) ds)|`.
    pub identity_residual: f64,
    /// `min_t h(t, q(t))`.
    pub min_h_along: f64,
    /// `exp(-eps T |u_x|_inf) min h_0`.
    pub lower_bound: f64,
    /// Number of times the path crossed the period boundary.
    pub wraps: i64,
    /// The path went around the torus more than once.
    pub wrapped_more_than_once: bool,
}

impl CharacteristicReport {
    pub fn bound_holds(&self, tol: f64) -> bool {
        self.min_h_along >= (1.0 - tol) * self.lower_bound
    }
}

/// Periodic 4-point (cubic) Lagrange interpolation.
fn cubic_periodic(values: &[f64], dx: f64, x: f64) -> f64 {
    let m = values.len() as i64;
    let s = x / dx;
    let j = s.floor();
    let t = s - j;
    let j = j as i64;
    let at = |k: i64| values[k.rem_euclid(m) as usize];
    let (p0, p1, p2, p3) = (at(j - 1), at(j), at(j + 1), at(j + 2));
    let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
    w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3
}

/// Integrates the characteristic through `x0` over the stored trajectory
/// (cubic interpolation in space, linear in time, RK4 in time) together with
/// `int u_x ds`, and checks the multiplicative height identity along it.
pub fn characteristic_flow(traj: &Trajectory, bath: &Bathymetry, x0: f64) -> Result<CharacteristicReport> {
    let p = &traj.params;
    let eps = p.eps;
    let snaps = &traj.snapshots;
    let grid = snaps[0].grid().clone();
    let dxg = grid.dx();
    let length = grid.length();
    let u: Vec<&[f64]> = snaps.iter().map(|s| s.u.values()).collect();
    let ux: Vec<Field> = snaps.iter().map(|s| derivative_unchecked(&s.u, 1)).collect();
    let h: Vec<Field> = snaps
        .iter()
        .map(|s| total_height(&s.zeta, bath, eps))
        .collect::<Result<_>>()?;
    let sup_ux = ux.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
    let min_h0 = h[0].min();
    let t_final = snaps.last().map(|s| s.t).unwrap_or(0.0) - snaps[0].t;

    // (u, u_x) at time index n plus fraction theta, position q
    let eval = |n: usize, theta: f64, q: f64| -> (f64, f64) {
        let a = (cubic_periodic(u[n], dxg, q), cubic_periodic(ux[n].values(), dxg, q));
        if theta == 0.0 {
            return a;
        }
        let b = (cubic_periodic(u[n + 1], dxg, q), cubic_periodic(ux[n + 1].values(), dxg, q));
        (a.0 + theta * (b.0 - a.0), a.1 + theta * (b.1 - a.1))
    };

    let h_start = cubic_periodic(h[0].values(), dxg, x0);
    let mut q = x0;
    let mut integral = 0.0;
    let mut path = vec![(snaps[0].t, q)];
    let mut residual: f64 = 0.0;
    let mut min_h_along = h_start;
    for n in 0..snaps.len() - 1 {
        let dt = snaps[n + 1].t - snaps[n].t;
        let k1 = eval(n, 0.0, q);
        let k2 = eval(n, 0.5, q + 0.5 * dt * eps * k1.0);
        let k3 = eval(n, 0.5, q + 0.5 * dt * eps * k2.0);
        let k4 = eval(n + 1, 0.0, q + dt * eps * k3.0);
        q += dt * eps * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0) / 6.0;
        integral += dt * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1) / 6.0;
        let h_here = cubic_periodic(h[n + 1].values(), dxg, q);
        residual = residual.max((h_here - h_start * (-eps * integral).exp()).abs());
        min_h_along = min_h_along.min(h_here);
        path.push((snaps[n + 1].t, q));
    }
    let wraps = ((q / length).floor() - (x0 / length).floor()) as i64;
    Ok(CharacteristicReport {
        x0,
        path,
        identity_residual: residual,
        min_h_along,
        lower_bound: (-eps * t_final * sup_ux).exp() * min_h0,
        wraps,
        wrapped_more_than_once: wraps.abs() > 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    #[test]
    fn sigma0_values() {
        assert_eq!(sigma0(1.0).unwrap(), 0.0);
        assert_eq!(sigma0(0.0).unwrap(), 1.0);
        assert!((sigma0(2.0).unwrap() - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((sigma0(2.0).unwrap() - 0.386_294_361_119_890_6).abs() < 1e-15);
        assert!(sigma0(-0.1).is_err());
        assert!(sigma0(f64::NAN).is_err());
    }

    #[test]
    fn sigma0_branches_agree() {
        for &y in &[-0.0999, -0.05, 0.03, 0.0999, 0.1, -0.1] {
            let direct = (1.0 + y) * (1.0f64 + y).ln() - y;
            assert!((sigma0_shifted(y) - direct).abs() < 1e-15, "y = {y}");
        }
        // tiny arguments keep full relative accuracy
        let y: f64 = 1e-9;
        assert!((sigma0_shifted(y) / (0.5 * y * y) - 1.0).abs() < 1e-8);
        assert!(sigma0(1e-300).unwrap() <= 1.0);
    }

    #[test]
    fn flux_values() {
        let eps = 0.3;
        assert_eq!(entropy_flux(1.0, 0.0, eps).unwrap(), 0.0);
        assert!((entropy_flux(1.0, 2.0, eps).unwrap() - eps * 8.0 / 3.0).abs() < 1e-15);
        let e = std::f64::consts::E;
        assert!((entropy_flux(e, 1.0, eps).unwrap() - (e / eps + eps / 3.0)).abs() < 1e-14);
        assert!(entropy_flux(-1.0, 0.0, eps).is_err());
        assert_eq!(entropy_flux(0.0, 1.0, eps).unwrap(), eps / 3.0);
    }

    #[test]
    fn compatibility_is_exact() {
        assert_eq!(compatibility_residual(1.0, 0.0, 0.1).unwrap(), 0.0);
        for i in 0..20 {
            for j in 0..20 {
                let h = 0.2 + 2.8 * i as f64 / 19.0;
                let u = -2.0 + 4.0 * j as f64 / 19.0;
                assert!(compatibility_residual(h, u, 0.1).unwrap() <= 1e-12);
            }
        }
        assert!(compatibility_residual(0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn energy_example() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let s = State::new(Field::from_fn(&g, |x| x.sin()).unwrap(), Field::from_fn(&g, |x| x.sin()).unwrap(), 0.0)
            .unwrap();
        assert!((energy_es(&s, 0.0, 3.0, 1.0).unwrap() - 6.0 * PI).abs() < 1e-12);
        assert_eq!(energy_es(&State::rest(&g), 1.0, 1.0, 0.0).unwrap(), 0.0);
        let z = State::new(s.zeta.clone(), Field::zeros(&g), 0.0).unwrap();
        let expect = sobolev_norm_unchecked(&z.zeta, 1.5).powi(2);
        assert!((energy_es(&z, 1.5, 0.1, 0.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let bath = Bathymetry::flat(&g);
        let p = Params::new(0.1, 0.3, 0.0, 0.0, 0.5, 1e-3, 1.0).unwrap();
        assert_eq!(entropy_total(&State::rest(&g), &bath, &p).unwrap(), 0.0);
        let s = State::new(Field::zeros(&g), Field::from_fn(&g, |x| x.sin()).unwrap(), 0.0).unwrap();
        let h = entropy_total(&s, &bath, &p).unwrap();
        assert!((h - (PI / 2.0 + p.mu * PI / 6.0)).abs() < 1e-12);
        let bad = State::new(Field::constant(&g, -20.0), Field::zeros(&g), 0.0).unwrap();
        assert!(entropy_total(&bad, &bath, &p).is_err());
    }

    #[test]
    fn orlicz_small_amplitude() {
        let g = Grid::new(20.0, 256).unwrap();
        let bath = Bathymetry::flat(&g);
        let eps = 0.1;
        let zeta = Field::from_fn(&g, |x| 0.5 * (-(x - 10.0).powi(2)).exp()).unwrap();
        let o = orlicz_norm(&zeta, &bath, eps).unwrap();
        let quad = 0.5 * eps * eps * zeta.inner(&zeta).unwrap();
        assert!((o / quad - 1.0).abs() < 0.1);
        assert_eq!(orlicz_norm(&Field::zeros(&g), &bath, eps).unwrap(), 0.0);
    }

    #[test]
    fn cubic_interpolation_reproduces_cubics_locally() {
        let dx = 0.1;
        let vals: Vec<f64> = (0..64).map(|j| (2.0 * PI * j as f64 / 64.0).sin()).collect();
        let x = 1.234;
        let exact = (2.0 * PI * x / (64.0 * dx)).sin();
        assert!((cubic_periodic(&vals, dx, x) - exact).abs() < 1e-4);
        assert_eq!(cubic_periodic(&vals, dx, 0.5), vals[5]);
    }
}
