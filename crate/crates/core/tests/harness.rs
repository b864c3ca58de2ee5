use std::f64::consts::PI;

use peregrine::harness::{mollifier, mollify};
use peregrine::{Field, Grid};
use proptest::prelude::*;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

#[test]
fn mollified_mode_converges_to_the_convolution() {
    // rho_n * sin(k .) (x) = int_0^{1/n} n rho(n y) sin(k (x - y)) dy
    let (k, n) = (3.0, 4u32);
    let nf = n as f64;
    let c = simpson(|y| nf * mollifier(nf * y) * (k * y).cos(), 0.0, 1.0 / nf, 20_000);
    let s = simpson(|y| nf * mollifier(nf * y) * (k * y).sin(), 0.0, 1.0 / nf, 20_000);
    let err = |m: usize| {
        let grid = Grid::new(2.0 * PI, m).unwrap();
        let f = Field::from_fn(&grid, |x| (k * x).sin()).unwrap();
        let exact = Field::from_fn(&grid, |x| c * (k * x).sin() - s * (k * x).cos()).unwrap();
        mollify(&f, n).unwrap().sub(&exact).unwrap().max_abs()
    };
    let errs: Vec<f64> = [256, 512, 1024, 2048].into_iter().map(err).collect();
    assert!(errs[3] < 1e-5, "{errs:?}");
    for w in errs.windows(2) {
        assert!(w[0] / w[1] > 3.5, "{errs:?}");
    }
}

proptest! {
    #[test]
    fn mollification_is_an_average(values in prop::collection::vec(-5.0f64..5.0, 64), n in 1u32..12) {
        let grid = Grid::new(8.0, 64).unwrap();
        let f = Field::new(&grid, values).unwrap();
        let g = mollify(&f, n).unwrap();
        prop_assert!((g.integral() - f.integral()).abs() <= 1e-12 * (1.0 + f.values().iter().map(|v| v.abs()).sum::<f64>()));
        prop_assert!(g.max() <= f.max() + 1e-12);
        prop_assert!(g.min() >= f.min() - 1e-12);
        let sq = mollify(&f.mul(&f).unwrap(), n).unwrap();
        for (a, b) in sq.values().iter().zip(g.values()) {
            prop_assert!(*a >= b * b - 1e-12);
        }
    }
}
