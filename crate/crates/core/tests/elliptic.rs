use nalgebra::{DMatrix, DVector, SymmetricEigen};
use peregrine::elliptic::{coercivity_form, helmholtz_solve, kernel_kmu, kernel_kmu_derivative};
use peregrine::estimates::Corpus;
use peregrine::{Bathymetry, BathymetryPreset, Discretization, Field, Grid, TbOperator};

fn matrix(op: &TbOperator) -> DMatrix<f64> {
    let dense = op.dense_matrix();
    let m = dense.len();
    DMatrix::from_fn(m, m, |i, j| dense[i][j])
}

fn bump(points: usize, beta: f64) -> Bathymetry {
    let grid = Grid::new(64.0, points).unwrap();
    Bathymetry::from_preset(&grid, &BathymetryPreset::by_name("gaussian-bump").unwrap(), beta).unwrap()
}

#[test]
fn flat_spectrum_is_the_helmholtz_symbol() {
    let grid = Grid::new(20.0, 64).unwrap();
    let mu = 0.4;
    let op = TbOperator::new(&Bathymetry::flat(&grid), mu).unwrap();
    let mut eig: Vec<f64> = SymmetricEigen::new(matrix(&op)).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let nyq = grid.nyquist_index();
    let mut symbol: Vec<f64> = (0..64)
        .map(|k| if k == nyq { 1.0 } else { 1.0 + mu / 3.0 * grid.wavenumber(k).powi(2) })
        .collect();
    symbol.sort_by(f64::total_cmp);
    for (a, b) in eig.iter().zip(&symbol) {
        assert!((a - b).abs() < 1e-10 * b, "{a} vs {b}");
    }
}

#[test]
fn bump_operator_is_symmetric_positive_definite() {
    let bath = bump(128, 0.2);
    let op = TbOperator::new(&bath, 0.1).unwrap();
    let a = matrix(&op);
    assert!((&a - a.transpose()).amax() < 1e-12 * a.amax());
    let lambda_min = SymmetricEigen::new(a).eigenvalues.min();
    assert!(lambda_min >= op.coercivity_constant(0.5), "{lambda_min}");
    assert!(op.smallest_eigenvalue(200).unwrap() >= 0.999 * lambda_min);
}

#[test]
fn iterative_solve_matches_dense_lu() {
    for preset in ["two-bumps", "ridge"] {
        let grid = Grid::new(64.0, 128).unwrap();
        let bath = Bathymetry::from_preset(&grid, &BathymetryPreset::by_name(preset).unwrap(), 0.2).unwrap();
        let op = TbOperator::new(&bath, 0.1).unwrap();
        let lu = matrix(&op).lu();
        let corpus = Corpus::new(1, 8, 64.0, 40, 1.0).unwrap();
        for i in 0..8 {
            let f = corpus.sample(i, &grid).unwrap();
            let x = op.solve(&f).unwrap();
            let reference = lu.solve(&DVector::from_column_slice(f.values())).unwrap();
            let gap = x.values().iter().zip(reference.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(gap <= 1e-9 * reference.amax(), "{preset} sample {i}: {gap:e}");
        }
    }
}

#[test]
fn finite_differences_converge_at_second_order() {
    // the spectral operator is exact to rounding on smooth data, so it serves as reference
    let u = |x: f64| (2.0 * std::f64::consts::PI * x / 64.0 * 3.0).sin() + (-(x - 30.0).powi(2) / 8.0).exp();
    let err = |m: usize| {
        let bath = bump(m, 0.2);
        let f = Field::from_fn(bath.grid(), u).unwrap();
        let spectral = TbOperator::new(&bath, 0.1).unwrap().apply(&f).unwrap();
        let fd = TbOperator::with_discretization(&bath, 0.1, Discretization::FiniteDifference)
            .unwrap()
            .apply(&f)
            .unwrap();
        fd.sub(&spectral).unwrap().max_abs()
    };
    let (e1, e2, e3) = (err(128), err(256), err(512));
    for ratio in [e1 / e2, e2 / e3] {
        assert!((3.6..4.4).contains(&ratio), "{e1:e} {e2:e} {e3:e}");
    }
}

#[test]
fn coercivity_form_equals_quadratic_form() {
    let bath = bump(256, 0.2);
    let op = TbOperator::new(&bath, 0.1).unwrap();
    let corpus = Corpus::new(7, 20, 64.0, 60, 1.0).unwrap();
    for i in 0..20 {
        let u = corpus.sample(i, bath.grid()).unwrap();
        let quad = op.apply(&u).unwrap().inner(&u).unwrap();
        let form = coercivity_form(&op, &u).unwrap();
        assert!((form - quad).abs() <= 1e-6 * quad, "{form} vs {quad}");
    }
}

#[test]
fn kernel_derivative_matches_finite_differences() {
    for mu in [0.05, 0.5, 2.0] {
        let d = 1e-6;
        for x in [-3.0, -0.7, -0.01, 0.02, 0.4, 2.5] {
            let fd = (kernel_kmu(mu, x + d).unwrap() - kernel_kmu(mu, x - d).unwrap()) / (2.0 * d);
            let exact = kernel_kmu_derivative(mu, x).unwrap();
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "mu {mu} x {x}: {fd} vs {exact}");
            assert_eq!(kernel_kmu_derivative(mu, -x).unwrap(), -exact);
        }
        // |k_mu|_{L^1} = sqrt(3/mu): twice the integral over (0, inf) of the decaying exponential
        let k = (3.0f64 / mu).sqrt();
        let n = 100_000;
        let h = 60.0 / k / n as f64;
        let l1: f64 = (0..n).map(|i| kernel_kmu_derivative(mu, (i as f64 + 0.5) * h).unwrap().abs() * h).sum();
        assert!((2.0 * l1 - k).abs() < 1e-6 * k);
    }
}

#[test]
fn helmholtz_inverse_on_modes_and_constants() {
    let grid = Grid::new(2.0 * std::f64::consts::PI, 64).unwrap();
    let f = Field::from_fn(&grid, |x| (5.0 * x).cos() + 2.0).unwrap();
    let g = helmholtz_solve(&f, 0.1).unwrap();
    let expect = Field::from_fn(&grid, |x| (5.0 * x).cos() / 3.5 + 2.0).unwrap();
    assert!(g.sub(&expect).unwrap().max_abs() < 1e-14);
    assert!(helmholtz_solve(&f, -1.0).is_err());
}

#[test]
fn too_deep_a_bottom_is_refused() {
    let grid = Grid::new(64.0, 128).unwrap();
    let b = Field::from_fn(&grid, |x| 2.0 * (-((x - 32.0) / 2.0).powi(2)).exp()).unwrap();
    let bath = Bathymetry::new(b, 0.6).unwrap();
    assert!(TbOperator::new(&bath, 0.1).is_err());
}
