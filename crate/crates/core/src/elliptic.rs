//! The self-adjoint dispersive operator `T_b = h_b (1 + mu T[h_b])`, written as
//! `T_b v = -(mu/3)(h_b^3 v_x)_x + g_full v`, together with the Helmholtz
//! inverse and the exponential kernel that realises it.

use rustfft::num_complex::Complex64;

use crate::bathymetry::Bathymetry;
use crate::error::{Error, Result};
use crate::grid::{apply_symbol, derivative_unchecked, Field};

/// How `T_b` is discretised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Discretization {
    /// Pseudospectral derivatives in the symmetric form; inverted by
    /// conjugate gradients preconditioned with the finite-difference operator.
    #[default]
    Spectral,
    /// Second-order conservative differences with face-averaged `h_b^3`,
    /// inverted directly (cyclic tridiagonal, Sherman-Morrison).
    FiniteDifference,
}

/// Symmetric cyclic tridiagonal matrix: `diag[i]` and `off[i]` coupling `i` and `i+1 (mod n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CyclicTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl CyclicTridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let ip = (i + 1) % n;
                let im = (i + n - 1) % n;
                self.diag[i] * v[i] + self.off[i] * v[ip] + self.off[im] * v[im]
            })
            .collect()
    }

    /// Smallest pivot of the cyclic LDL^T factorisation. The matrix is positive
    /// definite iff this is positive.
    pub fn min_pivot(&self) -> f64 {
        let n = self.len();
        let mut d = self.diag.clone();
        // entries of the last row left of the diagonal, including fill-in
        let mut r = vec![0.0; n - 1];
        r[0] = self.off[n - 1];
        r[n - 2] += self.off[n - 2];
        let mut min = f64::INFINITY;
        for i in 0..n - 1 {
            let piv = d[i];
            min = min.min(piv);
            if piv <= 0.0 {
                return piv;
            }
            if i + 1 < n - 1 {
                let e = self.off[i];
                d[i + 1] -= e * e / piv;
                r[i + 1] -= e * r[i] / piv;
            }
            d[n - 1] -= r[i] * r[i] / piv;
        }
        min.min(d[n - 1])
    }

    pub fn factor(&self) -> Result<CyclicSolver> {
        CyclicSolver::new(self)
    }
}

/// Precomputed Thomas + Sherman-Morrison factorisation of a [`CyclicTridiagonal`].
#[derive(Clone, Debug)]
pub struct CyclicSolver {
    sub: Vec<f64>,
    cprime: Vec<f64>,
    pivots: Vec<f64>,
    z: Vec<f64>,
    corner_ratio: f64,
    denom: f64,
}

impl CyclicSolver {
    fn new(m: &CyclicTridiagonal) -> Result<Self> {
        let n = m.len();
        let alpha = m.off[n - 1];
        let gamma = -m.diag[0];
        if gamma == 0.0 {
            return Err(Error::NotPositiveDefinite("zero leading diagonal entry".into()));
        }
        let mut diag = m.diag.clone();
        diag[0] -= gamma;
        diag[n - 1] -= alpha * alpha / gamma;
        let sub: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { m.off[i - 1] }).collect();
        let mut cprime = vec![0.0; n];
        let mut pivots = vec![0.0; n];
        for i in 0..n {
            let piv = if i == 0 {
                diag[0]
            } else {
                diag[i] - sub[i] * cprime[i - 1]
            };
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::NotPositiveDefinite(format!("zero pivot at row {i}")));
            }
            pivots[i] = piv;
            cprime[i] = if i + 1 < n { m.off[i] / piv } else { 0.0 };
        }
        let mut solver = Self {
            sub,
            cprime,
            pivots,
            z: Vec::new(),
            corner_ratio: alpha / gamma,
            denom: 1.0,
        };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = alpha;
        let z = solver.thomas(&u);
        solver.denom = 1.0 + z[0] + solver.corner_ratio * z[n - 1];
        solver.z = z;
        Ok(solver)
    }

    fn thomas(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let prev = if i == 0 { 0.0 } else { self.sub[i] * y[i - 1] };
            y[i] = (r[i] - prev) / self.pivots[i];
        }
        for i in (0..n - 1).rev() {
            y[i] -= self.cprime[i] * y[i + 1];
        }
        y
    }

    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let mut y = self.thomas(r);
        let k = (y[0] + self.corner_ratio * y[n - 1]) / self.denom;
        for (yi, zi) in y.iter_mut().zip(&self.z) {
            *yi -= k * zi;
        }
        y
    }
}

/// Assembled `T_b` for one bottom and one `mu`.
#[derive(Clone, Debug)]
pub struct TbOperator {
    bath: Bathymetry,
    mu: f64,
    discretization: Discretization,
    hb3: Field,
    g_full: Field,
    fd: CyclicTridiagonal,
    fd_solver: CyclicSolver,
    /// `h_b` constant: the operator is a Fourier multiplier.
    flat: bool,
    residual_tol: f64,
    max_iterations: usize,
}

/// Outcome of an iterative solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl TbOperator {
    pub fn new(bath: &Bathymetry, mu: f64) -> Result<Self> {
        Self::with_discretization(bath, mu, Discretization::Spectral)
    }

    pub fn with_discretization(bath: &Bathymetry, mu: f64, discretization: Discretization) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        let hb = bath.hb();
        let min_hb = hb.min();
        if min_hb <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "still-water depth h_b reaches {min_hb:.6e} <= 0"
            )));
        }
        let grid = bath.grid().clone();
        let m = grid.points();
        let hb3 = hb.map(|h| h * h * h);
        let g_full = bath.g_full(mu);
        let c = mu / (3.0 * grid.dx() * grid.dx());
        let face: Vec<f64> = (0..m)
            .map(|i| 0.5 * (hb3.values()[i] + hb3.values()[(i + 1) % m]))
            .collect();
        let build = |g: &dyn Fn(usize) -> f64| CyclicTridiagonal {
            diag: (0..m).map(|i| c * (face[i] + face[(i + m - 1) % m]) + g(i)).collect(),
            off: face.iter().map(|a| -c * a).collect(),
        };
        let fd = build(&|i| g_full.values()[i]);
        let fd_solver = match discretization {
            Discretization::FiniteDifference => {
                let piv = fd.min_pivot();
                if piv <= 0.0 {
                    return Err(Error::NotPositiveDefinite(format!(
                        "finite-difference operator has pivot {piv:.6e}; bottom too large for the depth hypotheses"
                    )));
                }
                fd.factor()?
            }
            Discretization::Spectral => {
                let floor = 0.5 * min_hb;
                let pre = build(&|i| g_full.values()[i].max(floor));
                pre.factor()?
            }
        };
        let flat = bath.is_flat();
        Ok(Self {
            bath: bath.clone(),
            mu,
            discretization,
            hb3,
            g_full,
            fd,
            fd_solver,
            flat,
            residual_tol: 1e-13,
            max_iterations: 400,
        })
    }

    pub fn with_solver_settings(mut self, residual_tol: f64, max_iterations: usize) -> Self {
        self.residual_tol = residual_tol;
        self.max_iterations = max_iterations;
        self
    }

    pub fn bathymetry(&self) -> &Bathymetry {
        &self.bath
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn discretization(&self) -> Discretization {
        self.discretization
    }

    pub fn g_full(&self) -> &Field {
        &self.g_full
    }

    pub fn finite_difference_matrix(&self) -> &CyclicTridiagonal {
        &self.fd
    }

    /// Lower bound `h0 / max(1, 18/(mu h0^2))` on `a(u,u)/|u|_{H^1}^2`.
    pub fn coercivity_constant(&self, h0: f64) -> f64 {
        h0 / f64::max(1.0, 18.0 / (self.mu * h0 * h0))
    }

    fn check_grid(&self, v: &Field) -> Result<()> {
        if v.grid() == self.bath.grid() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `T_b v`.
    pub fn apply(&self, v: &Field) -> Result<Field> {
        self.check_grid(v)?;
        v.ensure_finite("apply_Tb input")?;
        Ok(self.apply_unchecked(v))
    }

    fn apply_unchecked(&self, v: &Field) -> Field {
        match self.discretization {
            Discretization::FiniteDifference => Field::from_raw(v.grid(), self.fd.matvec(v.values())),
            Discretization::Spectral => {
                let vx = derivative_unchecked(v, 1);
                let flux = Field::from_raw(
                    v.grid(),
                    vx.values().iter().zip(self.hb3.values()).map(|(a, b)| a * b).collect(),
                );
                let dflux = derivative_unchecked(&flux, 1);
                let k = self.mu / 3.0;
                Field::from_raw(
                    v.grid(),
                    (0..v.len())
                        .map(|j| -k * dflux.values()[j] + self.g_full.values()[j] * v.values()[j])
                        .collect(),
                )
            }
        }
    }

    /// Solves `T_b u = f`.
    pub fn solve(&self, f: &Field) -> Result<Field> {
        self.solve_with_stats(f).map(|(u, _)| u)
    }

    pub fn solve_with_stats(&self, f: &Field) -> Result<(Field, SolveStats)> {
        self.check_grid(f)?;
        f.ensure_finite("solve_Tb input")?;
        let grid = f.grid();
        match self.discretization {
            Discretization::FiniteDifference => {
                let u = Field::from_raw(grid, self.fd_solver.solve(f.values()));
                let res = self.relative_residual(&u, f);
                Ok((u, SolveStats { iterations: 0, relative_residual: res }))
            }
            Discretization::Spectral if self.flat => {
                let g0 = self.g_full.values()[0];
                let k = self.mu / 3.0 * self.hb3.values()[0];
                let nyq = grid.nyquist_index();
                let u = apply_symbol(f, |idx, xi| {
                    let xi2 = if idx == nyq { 0.0 } else { xi * xi };
                    Complex64::new(1.0 / (g0 + k * xi2), 0.0)
                });
                let res = self.relative_residual(&u, f);
                Ok((u, SolveStats { iterations: 0, relative_residual: res }))
            }
            Discretization::Spectral => self.pcg(f),
        }
    }

    fn relative_residual(&self, u: &Field, f: &Field) -> f64 {
        let au = self.apply_unchecked(u);
        let num: f64 = au.values().iter().zip(f.values()).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = f.values().iter().map(|v| v * v).sum();
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    fn pcg(&self, f: &Field) -> Result<(Field, SolveStats)> {
        let grid = f.grid();
        let b = f.values();
        let bnorm = dot(b, b).sqrt();
        if bnorm == 0.0 {
            return Ok((Field::zeros(grid), SolveStats { iterations: 0, relative_residual: 0.0 }));
        }
        let mut x = self.fd_solver.solve(b);
        let ax = self.apply_unchecked(&Field::from_raw(grid, x.clone()));
        let mut r: Vec<f64> = b.iter().zip(ax.values()).map(|(bi, ai)| bi - ai).collect();
        let mut z = self.fd_solver.solve(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut rel = dot(&r, &r).sqrt() / bnorm;
        let mut it = 0;
        while rel > self.residual_tol && it < self.max_iterations {
            let ap = self.apply_unchecked(&Field::from_raw(grid, p.clone()));
            let pap = dot(&p, ap.values());
            if !(pap > 0.0) {
                return Err(Error::NotPositiveDefinite(format!(
                    "search direction with p^T A p = {pap:.6e} at iteration {it}"
                )));
            }
            let alpha = rz / pap;
            for j in 0..x.len() {
                x[j] += alpha * p[j];
                r[j] -= alpha * ap.values()[j];
            }
            z = self.fd_solver.solve(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for j in 0..p.len() {
                p[j] = z[j] + beta * p[j];
            }
            rel = dot(&r, &r).sqrt() / bnorm;
            it += 1;
        }
        let u = Field::from_raw(grid, x);
        let true_rel = self.relative_residual(&u, f);
        if !true_rel.is_finite() || true_rel > self.residual_tol.max(1e-11) {
            return Err(Error::NoConvergence { iterations: it, residual: true_rel });
        }
        Ok((u, SolveStats { iterations: it, relative_residual: true_rel }))
    }

    /// Dense matrix of the discrete operator, row-major, `M x M`.
    pub fn dense_matrix(&self) -> Vec<Vec<f64>> {
        let grid = self.bath.grid();
        let m = grid.points();
        let mut rows = vec![vec![0.0; m]; m];
        for j in 0..m {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            let col = self.apply_unchecked(&Field::from_raw(grid, e));
            for (i, v) in col.values().iter().enumerate() {
                rows[i][j] = *v;
            }
        }
        rows
    }

    /// Smallest eigenvalue estimate by inverse iteration (Rayleigh quotient of the last iterate).
    pub fn smallest_eigenvalue(&self, iterations: usize) -> Result<f64> {
        let grid = self.bath.grid();
        let m = grid.points();
        // start with a smooth vector plus a deterministic perturbation
        let mut v: Vec<f64> = (0..m).map(|j| 1.0 + 0.1 * ((j * 7919 % 101) as f64 / 101.0)).collect();
        let mut lambda = f64::NAN;
        for _ in 0..iterations.max(1) {
            let n = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= n);
            let vf = Field::from_raw(grid, v.clone());
            let av = self.apply_unchecked(&vf);
            lambda = dot(&v, av.values());
            v = self.solve(&vf)?.into_values();
        }
        Ok(lambda)
    }
}

/// Sum-of-squares form
/// `int h_b u^2 + mu int h_b (h_b u_x/sqrt3 - (sqrt3 beta/2) b_x u)^2 + (mu beta^2/4) int h_b b_x^2 u^2`.
pub fn coercivity_form(op: &TbOperator, u: &Field) -> Result<f64> {
    op.check_grid(u)?;
    u.ensure_finite("coercivity_form input")?;
    let bath = op.bathymetry();
    let beta = bath.beta();
    let mu = op.mu();
    let bx = bath.bx();
    let ux = derivative_unchecked(u, 1);
    let s3 = 3f64.sqrt();
    let sum: f64 = (0..u.len())
        .map(|j| {
            let h = bath.hb().values()[j];
            let v = u.values()[j];
            let d = bx.values()[j];
            let sq = h / s3 * ux.values()[j] - 0.5 * s3 * beta * d * v;
            h * v * v + mu * h * sq * sq + 0.25 * mu * beta * beta * h * d * d * v * v
        })
        .sum();
    Ok(sum * u.grid().dx())
}

/// `(1 - a d_x^2)^{-1} f`.
pub fn helmholtz_solve(f: &Field, a: f64) -> Result<Field> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::InvalidParameter(format!("Helmholtz coefficient must be >= 0, got {a}")));
    }
    f.ensure_finite("helmholtz_solve input")?;
    Ok(helmholtz_unchecked(f, a))
}

pub(crate) fn helmholtz_unchecked(f: &Field, a: f64) -> Field {
    if a == 0.0 {
        return f.clone();
    }
    apply_symbol(f, |_, xi| Complex64::new(1.0 / (1.0 + a * xi * xi), 0.0))
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")))
    }
}

/// `K_mu(x) = (1/2) sqrt(3/mu) exp(-sqrt(3/mu)|x|)`, the kernel of `(1 - (mu/3) d_x^2)^{-1}`.
pub fn kernel_kmu(mu: f64, x: f64) -> Result<f64> {
    check_mu(mu)?;
    let k = (3.0 / mu).sqrt();
    Ok(0.5 * k * (-k * x.abs()).exp())
}

/// `k_mu = d_x K_mu = -(3/(2 mu)) sign(x) exp(-sqrt(3/mu)|x|)`, with `k_mu(0) = 0`.
pub fn kernel_kmu_derivative(mu: f64, x: f64) -> Result<f64> {
    check_mu(mu)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    let k = (3.0 / mu).sqrt();
    Ok(-1.5 / mu * x.signum() * (-k * x.abs()).exp())
}
