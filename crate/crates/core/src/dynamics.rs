//! Right-hand sides of the regularised Boussinesq-Peregrine system and of its
//! small-bottom simplification, RK4 stepping, and the simulation driver.

use serde::{Deserialize, Serialize};

use crate::bathymetry::{positivity_check, validate_depth, Bathymetry, Params, State};
use crate::diagnostics::{DiagnosticsRecord, InequalityBaseline};
use crate::elliptic::{helmholtz_unchecked, TbOperator};
use crate::error::{Error, Result};
use crate::grid::{dealias, dx, Field};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    /// `zeta_t - nu zeta_txx + (hu)_x = 0`, `T_b u_t = -h_b (zeta + eps u^2/2)_x`; `nu = 0` is the original system.
    #[serde(rename = "bp")]
    BpRegularized,
    /// `zeta_t + (hu)_x = 0`, `u_t + zeta_x + eps u u_x - (mu/3) u_txx = 0`.
    Bpw,
}

impl SystemKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BpRegularized => "bp",
            Self::Bpw => "bpw",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bp" => Ok(Self::BpRegularized),
            "bpw" => Ok(Self::Bpw),
            other => Err(Error::Config(format!("unknown system '{other}' (expected bp or bpw)"))),
        }
    }
}

fn product(a: &Field, b: &Field) -> Field {
    dealias(&a.mul(b).expect("fields share a grid"))
}

/// `(dzeta/dt, du/dt)` for the regularised system:
/// `((1 - nu d^2)^{-1}[-((1 - beta b) u)_x - eps (u zeta)_x], T_b^{-1}[-h_b (zeta + eps u^2/2)_x])`.
pub fn bp_rhs(state: &State, bath: &Bathymetry, p: &Params, op: &TbOperator) -> Result<(Field, Field)> {
    state.zeta.same_grid(bath.b())?;
    let (zeta, u) = (&state.zeta, &state.u);
    let mut hb_u = u.clone();
    if bath.beta() != 0.0 {
        hb_u = hb_u.axpy(-bath.beta(), &product(bath.b(), u))?;
    }
    let flux = hb_u.axpy(p.eps, &product(u, zeta))?;
    let dzeta = helmholtz_unchecked(&dx(&flux).scale(-1.0), p.nu);

    let g = zeta.axpy(0.5 * p.eps, &product(u, u))?;
    let gx = dx(&g);
    let forcing = if bath.beta() != 0.0 {
        product(bath.hb(), &gx).scale(-1.0)
    } else {
        gx.scale(-1.0)
    };
    let du = dealias(&op.solve(&forcing)?);
    Ok((dzeta, du))
}

/// `(dzeta/dt, du/dt) = (-(hu)_x, (1 - (mu/3) d^2)^{-1}[-(zeta + eps u^2/2)_x])`.
pub fn bpw_rhs(state: &State, bath: &Bathymetry, p: &Params) -> Result<(Field, Field)> {
    state.zeta.same_grid(bath.b())?;
    let (zeta, u) = (&state.zeta, &state.u);
    let mut hu = u.axpy(p.eps, &product(zeta, u))?;
    if bath.beta() != 0.0 {
        hu = hu.axpy(-bath.beta(), &product(bath.b(), u))?;
    }
    let dzeta = dx(&hu).scale(-1.0);
    let g = zeta.axpy(0.5 * p.eps, &product(u, u))?;
    let du = helmholtz_unchecked(&dx(&g).scale(-1.0), p.mu / 3.0);
    Ok((dzeta, du))
}

/// One classical RK4 step. Negative `dt` integrates backwards.
pub fn rk4_step<F>(state: &State, rhs: F, dt: f64) -> Result<State>
where
    F: Fn(&State) -> Result<(Field, Field)>,
{
    if !(dt.is_finite() && dt != 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be finite and nonzero, got {dt}")));
    }
    let stage = |s: &State, k: &(Field, Field), c: f64| -> Result<State> {
        Ok(State {
            zeta: s.zeta.axpy(c, &k.0)?,
            u: s.u.axpy(c, &k.1)?,
            t: s.t + c,
        })
    };
    let check = |k: &(Field, Field), i: usize| -> Result<()> {
        if k.0.is_finite() && k.1.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("RK4 stage {i} at t = {}", state.t)))
        }
    };
    let k1 = rhs(state)?;
    check(&k1, 1)?;
    let k2 = rhs(&stage(state, &k1, 0.5 * dt)?)?;
    check(&k2, 2)?;
    let k3 = rhs(&stage(state, &k2, 0.5 * dt)?)?;
    check(&k3, 3)?;
    let k4 = rhs(&stage(state, &k3, dt)?)?;
    check(&k4, 4)?;
    let combine = |y: &Field, a: &Field, b: &Field, c: &Field, d: &Field| -> Field {
        let v = (0..y.len())
            .map(|j| {
                y.values()[j]
                    + dt / 6.0 * (a.values()[j] + 2.0 * b.values()[j] + 2.0 * c.values()[j] + d.values()[j])
            })
            .collect();
        Field::from_raw(y.grid(), v)
    };
    let zeta = combine(&state.zeta, &k1.0, &k2.0, &k3.0, &k4.0);
    let u = combine(&state.u, &k1.1, &k2.1, &k3.1, &k4.1);
    if !(zeta.is_finite() && u.is_finite()) {
        return Err(Error::NonFinite(format!("RK4 update at t = {}", state.t)));
    }
    Ok(State { zeta, u, t: state.t + dt })
}

/// A system ready to be stepped: kind, bottom, parameters and, for the
/// regularised system, the assembled elliptic operator.
#[derive(Clone, Debug)]
pub struct System {
    pub kind: SystemKind,
    pub bath: Bathymetry,
    pub params: Params,
    op: Option<TbOperator>,
}

impl System {
    pub fn new(kind: SystemKind, bath: &Bathymetry, params: &Params) -> Result<Self> {
        params.validate()?;
        let op = match kind {
            SystemKind::BpRegularized => Some(
                TbOperator::new(bath, params.mu)?.with_solver_settings(
                    params.tolerances.solver_residual,
                    params.tolerances.solver_max_iterations,
                ),
            ),
            SystemKind::Bpw => None,
        };
        Ok(Self {
            kind,
            bath: bath.clone(),
            params: params.clone(),
            op,
        })
    }

    pub fn rhs(&self, state: &State) -> Result<(Field, Field)> {
        match &self.op {
            Some(op) => bp_rhs(state, &self.bath, &self.params, op),
            None => bpw_rhs(state, &self.bath, &self.params),
        }
    }

    pub fn step(&self, state: &State, dt: f64) -> Result<State> {
        rk4_step(state, |s| self.rhs(s), dt)
    }
}

/// What to keep while simulating.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationOptions {
    /// Store every `snapshot_stride`-th state (the initial and final states are always stored).
    pub snapshot_stride: usize,
    /// Sobolev indices `s` of the recorded energies.
    pub s_list: Vec<f64>,
    pub record_diagnostics: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            snapshot_stride: 1,
            s_list: vec![0.0, 1.0],
            record_diagnostics: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub kind: SystemKind,
    pub params: Params,
    pub snapshot_stride: usize,
    /// Stored states, strictly increasing in time; the first is the (filtered) initial state.
    pub snapshots: Vec<State>,
    /// Step indices of the stored states.
    pub snapshot_steps: Vec<usize>,
    /// Diagnostics at `t = 0`.
    pub initial_record: Option<DiagnosticsRecord>,
    /// One record per completed step.
    pub records: Vec<DiagnosticsRecord>,
    pub baseline: Option<InequalityBaseline>,
}

impl Trajectory {
    pub fn initial(&self) -> &State {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &State {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }
}

fn check_cfl(initial: &State, p: &Params) -> Result<()> {
    let limit = 0.5 * initial.grid().dx();
    if p.dt > limit {
        return Err(Error::InvalidParameter(format!(
            "dt = {} exceeds the stability guard 0.5 dx = {limit}",
            p.dt
        )));
    }
    Ok(())
}

/// Integrates to `t_end`, returning the error that stopped the run, if any,
/// alongside everything computed up to that point. Configuration errors
/// (bad parameters, failed depth hypothesis) are returned as `Err`.
pub fn simulate_partial(
    initial: &State,
    kind: SystemKind,
    bath: &Bathymetry,
    p: &Params,
    opts: &SimulationOptions,
) -> Result<(Trajectory, Option<Error>)> {
    p.validate()?;
    initial.zeta.same_grid(bath.b())?;
    check_cfl(initial, p)?;
    let depth = validate_depth(bath, p.h0);
    if !depth.pass() {
        return Err(Error::Hypothesis(format!(
            "min h_b = {:.6e} at x = {:.6} is below h0 = {}",
            depth.min_hb, depth.argmin_x, p.h0
        )));
    }
    let start = State {
        zeta: dealias(&initial.zeta),
        u: dealias(&initial.u),
        t: initial.t,
    };
    let stride = opts.snapshot_stride.max(1);
    let mut traj = Trajectory {
        kind,
        params: p.clone(),
        snapshot_stride: stride,
        snapshots: vec![start.clone()],
        snapshot_steps: vec![0],
        initial_record: None,
        records: Vec::new(),
        baseline: None,
    };
    let min_h0 = positivity_check(initial, bath, p.eps)?.min(positivity_check(&start, bath, p.eps)?);
    if min_h0 <= 0.0 {
        return Ok((traj, Some(Error::AbortPositivity { t: start.t, min_h: min_h0 })));
    }
    let system = System::new(kind, bath, p)?;
    if opts.record_diagnostics {
        let baseline = InequalityBaseline::new(&start, bath, p)?;
        traj.initial_record = Some(DiagnosticsRecord::compute(&start, bath, p, &opts.s_list, &baseline, None)?);
        traj.baseline = Some(baseline);
    }
    let steps = p.steps();
    let mut state = start;
    for n in 1..=steps {
        let target = initial.t + if n == steps { p.t_end } else { n as f64 * p.dt };
        let dt = target - state.t;
        let next = match system.step(&state, dt) {
            Ok(s) => s,
            Err(Error::NonFinite(what)) => {
                return Ok((traj, Some(Error::AbortBlowup { t: state.t, what })));
            }
            Err(e) => return Ok((traj, Some(e))),
        };
        let sup = next.zeta.max_abs().max(next.u.max_abs());
        if sup > p.tolerances.blowup_threshold {
            return Ok((
                traj,
                Some(Error::AbortBlowup {
                    t: next.t,
                    what: format!("sup norm {sup:.3e} exceeds {:.3e}", p.tolerances.blowup_threshold),
                }),
            ));
        }
        let min_h = positivity_check(&next, bath, p.eps)?;
        if min_h <= 0.0 {
            return Ok((traj, Some(Error::AbortPositivity { t: next.t, min_h })));
        }
        if let Some(baseline) = &traj.baseline {
            let prev = traj.records.last().or(traj.initial_record.as_ref());
            let rec = DiagnosticsRecord::compute(&next, bath, p, &opts.s_list, baseline, prev)?;
            traj.records.push(rec);
        }
        if n % stride == 0 || n == steps {
            traj.snapshots.push(next.clone());
            traj.snapshot_steps.push(n);
        }
        state = next;
    }
    Ok((traj, None))
}

/// Integrates to `t_end`; aborts with `AbortPositivity` / `AbortBlowup`.
pub fn simulate(
    initial: &State,
    kind: SystemKind,
    bath: &Bathymetry,
    p: &Params,
    opts: &SimulationOptions,
) -> Result<Trajectory> {
    match simulate_partial(initial, kind, bath, p, opts)? {
        (traj, None) => Ok(traj),
        (_, Some(e)) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn params() -> Params {
        Params::new(0.1, 0.1, 0.0, 0.0, 0.5, 1e-2, 0.1).unwrap()
    }

    #[test]
    fn rest_state_has_zero_rhs() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let bath = Bathymetry::flat(&g);
        let p = params();
        let op = TbOperator::new(&bath, p.mu).unwrap();
        let rest = State::rest(&g);
        let (a, b) = bp_rhs(&rest, &bath, &p, &op).unwrap();
        assert_eq!(a.max_abs() + b.max_abs(), 0.0);
        let (a, b) = bpw_rhs(&rest, &bath, &p).unwrap();
        assert_eq!(a.max_abs() + b.max_abs(), 0.0);
    }

    #[test]
    fn bp_rhs_flat_sine() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let bath = Bathymetry::flat(&g);
        let p = params();
        let op = TbOperator::new(&bath, p.mu).unwrap();
        let s = State::new(Field::from_fn(&g, |x| x.sin()).unwrap(), Field::zeros(&g), 0.0).unwrap();
        let (dz, du) = bp_rhs(&s, &bath, &p, &op).unwrap();
        assert!(dz.max_abs() < 1e-15);
        let expect = Field::from_fn(&g, |x| -x.cos() / (1.0 + p.mu / 3.0)).unwrap();
        assert!(du.sub(&expect).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn rk4_scalar_growth() {
        let g = Grid::new(1.0, 32).unwrap();
        let lambda = -1.3;
        let s = State::new(Field::constant(&g, 1.0), Field::constant(&g, 2.0), 0.0).unwrap();
        let rhs = |st: &State| Ok((st.zeta.scale(lambda), st.u.scale(lambda)));
        for dt in [0.1, 0.05] {
            let next = rk4_step(&s, rhs, dt).unwrap();
            let err = (next.zeta.values()[0] - (lambda * dt).exp()).abs();
            assert!(err < 0.02 * (lambda * dt).abs().powi(5), "dt {dt}: {err}");
        }
        let zero = rk4_step(&s, |st: &State| Ok((Field::zeros(st.grid()), Field::zeros(st.grid()))), 0.1).unwrap();
        assert_eq!(zero.zeta, s.zeta);
        assert_eq!(zero.u, s.u);
    }

    #[test]
    fn rk4_rejects_non_finite_stage() {
        let g = Grid::new(1.0, 32).unwrap();
        let s = State::rest(&g);
        let bad = |st: &State| Ok((Field::constant(st.grid(), 0.0).map(|_| f64::NAN), Field::zeros(st.grid())));
        assert!(matches!(rk4_step(&s, bad, 0.1), Err(Error::NonFinite(_))));
    }

    #[test]
    fn cfl_guard() {
        let g = Grid::new(1.0, 64).unwrap();
        let bath = Bathymetry::flat(&g);
        let p = Params::new(0.1, 0.1, 0.0, 0.0, 0.5, 0.1, 1.0).unwrap();
        let r = simulate(&State::rest(&g), SystemKind::Bpw, &bath, &p, &SimulationOptions::default());
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn rest_trajectory_is_constant() {
        let g = Grid::new(8.0, 64).unwrap();
        let bath = Bathymetry::flat(&g);
        let p = Params::new(0.1, 0.1, 0.0, 0.0, 0.5, 0.01, 0.1).unwrap();
        for kind in [SystemKind::Bpw, SystemKind::BpRegularized] {
            let traj = simulate(&State::rest(&g), kind, &bath, &p, &SimulationOptions::default()).unwrap();
            assert_eq!(traj.records.len(), 10);
            for s in &traj.snapshots {
                assert_eq!(s.zeta.max_abs() + s.u.max_abs(), 0.0);
            }
        }
    }

    #[test]
    fn positivity_abort_at_start() {
        let g = Grid::new(8.0, 64).unwrap();
        let bath = Bathymetry::flat(&g);
        let p = params();
        let zeta = Field::from_fn(&g, |x| -20.0 * (-(x - 4.0).powi(2)).exp()).unwrap();
        let s = State::new(zeta, Field::zeros(&g), 0.0).unwrap();
        let r = simulate(&s, SystemKind::BpRegularized, &bath, &p, &SimulationOptions::default());
        assert!(matches!(r, Err(Error::AbortPositivity { .. })));
    }
}
