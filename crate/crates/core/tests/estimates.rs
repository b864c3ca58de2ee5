use std::f64::consts::PI;

use peregrine::estimates::{
    commutator_ratio, flat_single_mode_ratio, product_ratio, Corpus, ProductKind, FLAT_RATIO_SUP,
};
use peregrine::grid::sobolev_norm;
use peregrine::harness::bona_smith_truncate;
use peregrine::{Field, Grid};

fn pair(i: usize, grid: &Grid) -> (Field, Field) {
    let corpus = Corpus::new(31, 16, grid.length(), 60, 1.0).unwrap();
    (corpus.sample(i, grid).unwrap(), corpus.sample(i + 8, grid).unwrap())
}

#[test]
fn ratios_do_not_depend_on_amplitude() {
    let grid = Grid::new(2.0 * PI, 512).unwrap();
    let kinds = [
        ProductKind::Prod2 { t: 0.5, p: 1.0, r: 1.0 },
        ProductKind::Prod3 { s: 1.0 },
        ProductKind::Prod5 { theta: -1.0 },
        ProductKind::Prod6 { theta: 0.5, n: 16 },
        ProductKind::ProN1 { s: 1.0, n: 16 },
        ProductKind::ProN2 { s: 1.0, n: 32 },
    ];
    for i in 0..4 {
        let (f, g) = pair(i, &grid);
        let (f2, g2) = (f.scale(3.7), g.scale(-0.02));
        for kind in kinds {
            let a = product_ratio(kind, &f, &g).unwrap();
            let b = product_ratio(kind, &f2, &g2).unwrap();
            assert!((a - b).abs() <= 1e-8 * a.max(1e-300), "{kind:?}: {a} vs {b}");
        }
        let a = commutator_ratio(&f, &g, 16).unwrap();
        let b = commutator_ratio(&f2, &g2, 16).unwrap();
        assert!((a - b).abs() <= 1e-8 * a.max(1e-300));
    }
}

#[test]
fn products_of_constants_are_sharp() {
    // f = 1: |g|_{H^s} over |g|_{H^s} + |g|_inf |1|_{H^s}
    let grid = Grid::new(2.0 * PI, 128).unwrap();
    let one = Field::constant(&grid, 1.0);
    let g = Field::from_fn(&grid, |x| (4.0 * x).sin()).unwrap();
    let got = product_ratio(ProductKind::Prod3 { s: 1.0 }, &one, &g).unwrap();
    let hg = (PI * 17.0).sqrt();
    let expect = hg / (hg + (2.0 * PI).sqrt());
    assert!((got - expect).abs() < 1e-12);
}

#[test]
fn invalid_indices_are_rejected() {
    let grid = Grid::new(2.0 * PI, 128).unwrap();
    let (f, g) = pair(0, &grid);
    assert!(commutator_ratio(&f, &g, 12).is_err());
    assert!(commutator_ratio(&f, &g, 4).is_err());
    assert!(product_ratio(ProductKind::ProN1 { s: 0.0, n: 16 }, &f, &g).is_err());
}

#[test]
fn flat_single_mode_supremum() {
    let mu = 0.3;
    let k_star = (1.0f64 / mu).sqrt();
    assert!((flat_single_mode_ratio(mu, k_star) - FLAT_RATIO_SUP).abs() < 1e-15);
    assert!((FLAT_RATIO_SUP - 3.0 / (2.0 * 2f64.sqrt())).abs() < 1e-15);
    let scan = (1..200_000).map(|i| flat_single_mode_ratio(mu, i as f64 * 1e-4)).fold(0.0, f64::max);
    assert!(scan <= FLAT_RATIO_SUP && FLAT_RATIO_SUP - scan < 1e-9);
}

#[test]
fn power_growth_fails_at_a_single_mode() {
    // |S_n f|_{H^{s+r}} / (n^r |f|_{H^s}) = (1 + 1/n^2)^{r/2} > 1 for f = cos(n x)
    let grid = Grid::new(2.0 * PI, 256).unwrap();
    for n in [3u32, 10, 40] {
        let f = Field::from_fn(&grid, |x| (n as f64 * x).cos()).unwrap();
        let cut = bona_smith_truncate(&f, n as f64).unwrap();
        for (s, r) in [(0.0, 1.0), (1.5, 2.0)] {
            let got = sobolev_norm(&cut, s + r).unwrap() / ((n as f64).powf(r) * sobolev_norm(&f, s).unwrap());
            let expect = (1.0 + 1.0 / (n * n) as f64).powf(r / 2.0);
            assert!(got > 1.0 && (got - expect).abs() < 1e-12 * expect, "n {n}: {got} vs {expect}");
        }
    }
}
