#![allow(dead_code)]

use std::path::PathBuf;

use faer::Mat;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use openbook::bookfile::{parse_book_file, AngularSetting, SolverSettings};
use openbook::cli::compute_spectrum;
use openbook::complex::OpenBookComplex;
use openbook::conditions::{named_condition, NamedCondition};
use openbook::eigensolve::SpectrumResult;
use openbook::linalg::CMatrix;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("books").join(format!("{name}.toml"))
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn fixture(name: &str) -> (OpenBookComplex, SolverSettings) {
    parse_book_file(&fixture_text(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub const FIXTURES: &[&str] = &[
    "sphere-from-caps",
    "cap-dirichlet",
    "six-caps",
    "dumbbell",
    "interval-chain",
    "interval-circle",
    "flat-rectangles",
    "non-selfadjoint",
    "non-elliptic",
];

/// Replaces the condition at every binding by the same named condition.
pub fn with_conditions(book: &OpenBookComplex, cond: &NamedCondition) -> OpenBookComplex {
    let mut out = book.clone();
    for b in &book.bindings {
        let k = book.slots(&b.id).len();
        out.conditions.insert(b.id.clone(), named_condition(cond, k).unwrap());
    }
    out
}

pub fn modes(first: i64, last: i64, nodes: usize, count: usize) -> SolverSettings {
    SolverSettings {
        angular: AngularSetting::Modes { first, last },
        nodes,
        count,
        cluster_tol: 1e-3,
        ..SolverSettings::default()
    }
}

pub fn full2d(n_s: usize, n_t: usize, count: usize) -> SolverSettings {
    SolverSettings {
        angular: AngularSetting::Full2D { n_s, n_t },
        count,
        cluster_tol: 1e-3,
        ..SolverSettings::default()
    }
}

pub fn solve(book: &OpenBookComplex, settings: &SolverSettings) -> SpectrumResult {
    compute_spectrum(book, settings).unwrap().spectrum
}

/// `|x − exact| / |exact|`, or `|x|` when the exact value is zero.
pub fn rel_err(x: f64, exact: f64) -> f64 {
    if exact == 0.0 {
        x.abs()
    } else {
        (x - exact).abs() / exact.abs()
    }
}

pub fn max_rel_err(xs: &[f64], exact: &[f64]) -> f64 {
    assert!(xs.len() >= exact.len(), "{} computed values for {} references", xs.len(), exact.len());
    xs.iter().zip(exact).map(|(&x, &e)| rel_err(x, e)).fold(0.0, f64::max)
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    Mat::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-distributed unitary: Q factor of a Gaussian matrix with the
/// phases of R's diagonal absorbed.
pub fn random_unitary<R: Rng>(rng: &mut R, k: usize) -> CMatrix {
    let g = gaussian_matrix(rng, k, k);
    let qr = g.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    Mat::from_fn(k, k, |i, j| {
        let d = r[(j, j)];
        q[(i, j)] * (d / d.norm())
    })
}

/// Random invertible matrix `V·diag(d)·W` with unitary `V`, `W` and
/// `d ∈ [0.2, 5]`, so the condition number stays below 25.
pub fn random_invertible<R: Rng>(rng: &mut R, k: usize) -> CMatrix {
    let v = random_unitary(rng, k);
    let w = random_unitary(rng, k);
    let d: Vec<f64> = (0..k).map(|_| 0.2 * 25f64.powf(rng.random::<f64>())).collect();
    let vd = Mat::from_fn(k, k, |i, j| v[(i, j)] * d[j]);
    &vd * &w
}
