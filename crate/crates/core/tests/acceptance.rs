//! End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero
//! exit status if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use openbook::bookfile::SolverSettings;
use openbook::cli::{aligned_real_parts, compute_spectrum, observed_orders};
use openbook::complex::{Adjacency, Binding, BindingShape, OpenBookComplex, Orientation, OuterBoundary, OuterTag};
use openbook::conditions::*;
use openbook::discretize::{build_full_system, build_mode_system, eliminate_traces, symmetry_defect, ReducedSystem};
use openbook::eigensolve::{dense_reference_eigenvalues, lowest_eigenpairs, lowest_eigenpairs_with, DENSE_CAP};
use openbook::linalg::{self, I};
use openbook::oracles::{interval_spectrum, rectangle_spectrum, sphere_spectrum, GraphTopology};
use openbook::pages::{ChartKind, Edge, PageChart, SideCondition};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn close(a: &linalg::CMatrix, b: &linalg::CMatrix) -> f64 {
    linalg::frobenius(&(a - b))
}

fn conditions_suite() -> Outcome {
    let mut worst = [0.0f64; 5];
    for seed in 0..1000u64 {
        let k = 1 + (seed % 8) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = common::random_unitary(&mut rng, k);
        let canon = pair_from_unitary(&CanonicalUnitary::new(u.clone()).unwrap());
        let canon = canon.at(0);
        let pair = canon.left_multiply(&common::random_invertible(&mut rng, k));

        for z in [-10.0, -1.0, -0.1, 0.1, 1.0, 10.0] {
            worst[0] = worst[0].max(linalg::unitarity_defect(&sigma(&pair, z).unwrap()));
        }
        let prod = sigma(&pair, -1.0).unwrap() * sigma(&pair, 1.0).unwrap();
        worst[1] = worst[1].max(close(&prod, &linalg::identity(k)));

        let again = pair.left_multiply(&common::random_invertible(&mut rng, k));
        let got = canonical_unitary(&again).unwrap().u;
        worst[2] = worst[2].max(close(&got, &u));

        let ac = &canon.a * canon.c.adjoint();
        let expected = linalg::scale(&(&u - linalg::inverse(&u)), I);
        worst[3] = worst[3].max(close(&ac, &expected));

        let angle = linalg::max_principal_angle_sin(&solution_space(&pair), &solution_space(canon));
        worst[4] = worst[4].max(angle);
    }
    let limits = [1e-10, 1e-10, 1e-10, 1e-12, 1e-9];
    let pass = worst.iter().zip(limits).all(|(w, l)| *w <= l);
    outcome(
        pass,
        format!(
            "1000 pairs: σ unitarity {:.1e}, σ(−1)σ(1) − I {:.1e}, U invariance {:.1e}, AC* − i(U − U⁻¹) {:.1e}, principal angle {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn ellipticity_pencil() -> Outcome {
    let dirichlet = ConditionPair::constant(linalg::identity(2), linalg::zeros(2, 2)).unwrap();
    let same = ConditionPair::constant(linalg::identity(2), linalg::identity(2)).unwrap();
    let d = check_ellipticity(&dirichlet);
    let s = check_ellipticity(&same);
    let kirchhoff_ok = (2..=6).all(|k| check_ellipticity(&named_condition(&NamedCondition::Kirchhoff, k).unwrap()).elliptic);
    let pass = d.elliptic && !s.elliptic && s.violating == Some(1.0) && kirchhoff_ok;
    outcome(
        pass,
        format!(
            "(I, 0) elliptic: {}; (I, I) violated at {:?}; Kirchhoff k = 2..6 elliptic: {kirchhoff_ok}",
            d.elliptic, s.violating
        ),
    )
}

fn modes(first: i64, last: i64, nodes: usize, count: usize) -> SolverSettings {
    common::modes(first, last, nodes, count)
}

fn spectrum(book: &OpenBookComplex, settings: &SolverSettings) -> Vec<f64> {
    common::solve(book, settings).real_parts()
}

fn sphere() -> Outcome {
    let (book, _) = common::fixture("sphere-from-caps");
    let s = common::solve(&book, &modes(-4, 4, 400, 16));
    let exact = sphere_spectrum(3).lowest(16);
    let err = common::max_rel_err(&s.real_parts(), &exact);
    let mult = s.multiplicities();

    // observed order of the spectrum error, from the largest relative error
    // against the exact values on three grids
    let grids = [100, 200, 400];
    let levels: Vec<Vec<f64>> =
        grids.iter().map(|&n| aligned_real_parts(&common::solve(&book, &modes(-4, 4, n, 16)))).collect();
    let errors: Vec<f64> = levels.iter().map(|l| common::max_rel_err(&l[1..], &exact[1..])).collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    // per-eigenvalue Richardson orders, for the record: the m = ±l members
    // carry error constants ~25× smaller and are still pre-asymptotic here
    let richardson = &observed_orders(&levels)[0];
    let (lo, hi) = richardson[1..].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &o| (a.min(o), b.max(o)));
    let pass = err <= 1e-2 && mult == vec![1, 3, 5, 7] && orders.iter().all(|o| (1.7..=2.3).contains(o));
    outcome(
        pass,
        format!(
            "400 nodes: max rel err {err:.2e}, multiplicities {mult:?}; spectrum error at 100/200/400 {} → orders {}; \
             per-eigenvalue Richardson orders in [{lo:.3}, {hi:.3}]",
            errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", "),
            orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>().join(", "),
        ),
    )
}

fn rectangles() -> Outcome {
    let (book, _) = common::fixture("flat-rectangles");
    let exact = rectangle_spectrum(2.0, 1.0, SideCondition::Dirichlet, 8).lowest(8);
    let fine = spectrum(&book, &common::full2d(100, 200, 8));
    let err = common::max_rel_err(&fine, &exact);
    let levels: Vec<Vec<f64>> =
        [(25, 50), (50, 100)].iter().map(|&(a, b)| spectrum(&book, &common::full2d(a, b, 8))).chain([fine.clone()]).collect();
    let orders = &observed_orders(&levels)[0];
    let (lo, hi) = orders.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &o| (a.min(o), b.max(o)));
    let pass = err <= 1e-3 && (1.7..=2.3).contains(&lo) && (1.7..=2.3).contains(&hi);
    outcome(pass, format!("100×200 per page: max rel err {err:.2e}; orders over three grids in [{lo:.3}, {hi:.3}]"))
}

/// One page of `book` on its own, with every attached edge made an outer
/// Dirichlet edge.
fn isolate(book: &OpenBookComplex, page: &str) -> OpenBookComplex {
    let mut out = OpenBookComplex {
        pages: book.pages.iter().filter(|p| p.id == page).cloned().collect(),
        outer: book.outer.iter().filter(|o| o.page == page).cloned().collect(),
        ..OpenBookComplex::default()
    };
    for a in book.adjacencies.iter().filter(|a| a.page == page) {
        out.outer.push(OuterBoundary { page: page.into(), edge: a.edge, tag: OuterTag::Dirichlet });
    }
    out
}

/// Largest entry-wise difference between the reduced system of `book` and
/// the block-diagonal assembly of its isolated pages, relative to the
/// largest stiffness entry.
fn decoupling_gap(book: &OpenBookComplex, build: &dyn Fn(&OpenBookComplex) -> ReducedSystem) -> f64 {
    let whole = build(book);
    let parts: Vec<ReducedSystem> = book.pages.iter().map(|p| build(&isolate(book, &p.id))).collect();
    // local index of each interior unknown within its page
    let mut local = Vec::with_capacity(whole.dim());
    let mut seen = vec![0usize; book.pages.len()];
    let mut gap: f64 = 0.0;
    for u in &whole.unknowns[..whole.dim()] {
        let i = seen[u.page];
        seen[u.page] += 1;
        let v = &parts[u.page].unknowns[i];
        gap = gap.max((u.s - v.s).abs() + (u.t - v.t).abs());
        local.push(i);
    }
    if seen.iter().zip(&parts).any(|(n, p)| *n != p.dim()) {
        return f64::INFINITY;
    }
    let scale = whole.stiffness.triplets().map(|(_, _, v)| v.norm()).fold(0.0, f64::max);
    let mut nnz = 0;
    for (i, j, v) in whole.stiffness.triplets() {
        let (pi, pj) = (whole.unknowns[i].page, whole.unknowns[j].page);
        let d = if pi == pj { (v - parts[pi].stiffness.get(local[i], local[j])).norm() } else { v.norm() };
        gap = gap.max(d / scale);
        nnz += 1;
    }
    let part_nnz: usize = parts.iter().map(|p| p.stiffness.nnz()).sum();
    if nnz < part_nnz {
        return f64::INFINITY;
    }
    for (i, m) in whole.mass.iter().enumerate() {
        let p = whole.unknowns[i].page;
        gap = gap.max((m - parts[p].mass[local[i]]).abs() / m);
    }
    gap
}

fn dirichlet_decoupling() -> Outcome {
    let reduce = |sys| eliminate_traces(&sys).unwrap();
    let mut cases: Vec<(String, f64)> = Vec::new();
    for (name, grid) in [("flat-rectangles", (50, 50)), ("dumbbell", (20, 16))] {
        let book = common::with_conditions(&common::fixture(name).0, &NamedCondition::Dirichlet);
        let gap = decoupling_gap(&book, &|b| reduce(build_full_system(b, grid).unwrap()));
        cases.push((format!("{name} full 2-D"), gap));
    }
    for name in ["sphere-from-caps", "six-caps", "interval-chain"] {
        let book = common::with_conditions(&common::fixture(name).0, &NamedCondition::Dirichlet);
        let gap = [0i64, 1, 3]
            .iter()
            .map(|&m| decoupling_gap(&book, &|b| reduce(build_mode_system(b, m, 100).unwrap())))
            .fold(0.0, f64::max);
        cases.push((format!("{name} modes"), gap));
    }
    let pass = cases.iter().all(|c| c.1 <= 1e-12);
    let detail = cases.iter().map(|(n, g)| format!("{n} {g:.1e}")).collect::<Vec<_>>().join(", ");
    outcome(pass, format!("reduced matrices vs isolated pages: {detail}"))
}

fn quantum_graphs() -> Outcome {
    let (chain, _) = common::fixture("interval-chain");
    let exact = interval_spectrum(&[1.0, 1.0], GraphTopology::Chain, SideCondition::Dirichlet, 8).lowest(8);
    let chain_err = common::max_rel_err(&spectrum(&chain, &modes(0, 0, 2000, 8)), &exact);

    let (circle, settings) = common::fixture("interval-circle");
    let reference = interval_spectrum(&[PI, PI], GraphTopology::Circle, SideCondition::Dirichlet, 7);
    let s = common::solve(&circle, &SolverSettings { nodes: 2000, count: 7, ..settings });
    let circle_err = common::max_rel_err(&s.real_parts(), &reference.lowest(7));
    let mult = s.multiplicities();
    let pass = chain_err <= 1e-5 && circle_err <= 1e-5 && mult == vec![1, 2, 2, 2];
    outcome(
        pass,
        format!("chain max rel err {chain_err:.2e}; circle max rel err {circle_err:.2e}, multiplicities {mult:?}"),
    )
}

fn cross_solver() -> Outcome {
    let (book, _) = common::fixture("dumbbell");
    let start = Instant::now();
    let by_modes = spectrum(&book, &modes(-4, 4, 40, 10));
    let full = spectrum(&book, &common::full2d(40, 128, 10));
    // the zero eigenvalue is compared in absolute terms
    let err = by_modes
        .iter()
        .zip(&full)
        .map(|(a, b)| if a.abs() < 1e-8 { (a - b).abs() } else { common::rel_err(*b, *a) })
        .fold(0.0, f64::max);
    let pass = err <= 1e-3 && by_modes.len() == 10 && full.len() == 10;
    outcome(pass, format!("dumbbell modes |m| ≤ 4 at 40 nodes vs full 2-D 40×128: max rel diff {err:.2e} ({:.1?})", start.elapsed()))
}

fn is_selfadjoint(book: &OpenBookComplex) -> bool {
    book.conditions.values().all(|c| report(c).selfadjoint)
}

fn selfadjointness() -> Outcome {
    let mut worst_im: f64 = 0.0;
    let mut checked = 0;
    for name in common::FIXTURES {
        let (book, settings) = common::fixture(name);
        if !is_selfadjoint(&book) || !check_all_elliptic(&book) {
            continue;
        }
        let s = common::solve(&book, &settings);
        for z in &s.eigenvalues {
            worst_im = worst_im.max(z.im.abs() / (1.0 + z.norm()));
        }
        checked += 1;
    }

    let sizes = [50, 100, 200, 400, 800];
    let defects = |name: &str| -> Vec<(f64, f64)> {
        let (book, _) = common::fixture(name);
        sizes
            .iter()
            .map(|&n| {
                let red = eliminate_traces(&build_mode_system(&book, 0, n).unwrap()).unwrap();
                let low = lowest_eigenpairs(&red, 10, 1e-11, -1.0).unwrap().low_mode_defect;
                (symmetry_defect(&red), low)
            })
            .collect()
    };
    let kirchhoff = defects("sphere-from-caps");
    let broken = defects("non-selfadjoint");
    let monotone = kirchhoff.windows(2).all(|w| w[1].0 < w[0].0);
    // bounded away from zero: refining 16-fold loses at most half of it
    let bounded = broken.last().unwrap().0 >= 0.5 * broken[0].0;
    let fmt = |v: &[(f64, f64)], pick: fn(&(f64, f64)) -> f64| {
        v.iter().map(|d| format!("{:.2e}", pick(d))).collect::<Vec<_>>().join(" → ")
    };
    let pass = worst_im <= 1e-8 && monotone && bounded;
    outcome(
        pass,
        format!(
            "{checked} self-adjoint fixtures, max |Im λ|/(1+|λ|) {worst_im:.1e}; symmetry defect at N = 50..800: \
             Kirchhoff {} (monotone: {monotone}), non-self-adjoint {} (bounded away: {bounded}); \
             low-mode defect: Kirchhoff {}, non-self-adjoint {}",
            fmt(&kirchhoff, |d| d.0),
            fmt(&broken, |d| d.0),
            fmt(&kirchhoff, |d| d.1),
            fmt(&broken, |d| d.1),
        ),
    )
}

fn check_all_elliptic(book: &OpenBookComplex) -> bool {
    book.conditions.values().all(|c| check_ellipticity(c).elliptic)
}

fn sparse_dense() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut systems = 0;
    let mut skipped = Vec::new();
    for name in common::FIXTURES {
        let (book, settings) = common::fixture(name);
        let computation = match compute_spectrum(&book, &settings) {
            Ok(c) => c,
            Err(e) => {
                skipped.push(format!("{name} ({e})"));
                continue;
            }
        };
        let opts = openbook::cli::eigen_options(&settings);
        for (_, red) in &computation.systems {
            if red.dim() > DENSE_CAP {
                skipped.push(format!("{name} (dim {})", red.dim()));
                continue;
            }
            let count = 10.min(red.dim());
            let sparse = lowest_eigenpairs_with(red, &openbook::eigensolve::EigenOptions { count, ..opts.clone() }).unwrap();
            let dense = dense_reference_eigenvalues(red).unwrap();
            for (a, b) in sparse.eigenvalues.iter().zip(&dense) {
                worst = worst.max((a - b).norm() / b.norm().max(1.0));
            }
            systems += 1;
        }
    }
    outcome(
        worst <= 1e-8,
        format!("{systems} reduced systems, max rel diff {worst:.1e}; skipped: {}", skipped.join(", ")),
    )
}

/// Unit sphere as one page with poles at both ends.
fn whole_sphere() -> OpenBookComplex {
    OpenBookComplex {
        pages: vec![PageChart::new("sphere", ChartKind::SphericalCap { radius: 1.0, theta: [0.0, PI] })],
        outer: Edge::BOTH
            .into_iter()
            .map(|edge| OuterBoundary { page: "sphere".into(), edge, tag: OuterTag::Pole })
            .collect(),
        ..OpenBookComplex::default()
    }
}

fn cylinder(pieces: usize) -> OpenBookComplex {
    let ids: Vec<String> = (0..pieces).map(|i| format!("tube{i}")).collect();
    let mut book = OpenBookComplex {
        pages: ids
            .iter()
            .map(|id| PageChart::new(id, ChartKind::Cylinder { radius: 0.5, length: 2.0 / pieces as f64 }))
            .collect(),
        outer: vec![
            OuterBoundary { page: ids[0].clone(), edge: Edge::Start, tag: OuterTag::Dirichlet },
            OuterBoundary { page: ids[pieces - 1].clone(), edge: Edge::End, tag: OuterTag::Dirichlet },
        ],
        ..OpenBookComplex::default()
    };
    for (i, pair) in ids.windows(2).enumerate() {
        let seam = format!("seam{i}");
        book.bindings.push(Binding { id: seam.clone(), shape: BindingShape::Circle { circumference: PI } });
        for (slot, (page, edge)) in [(&pair[0], Edge::End), (&pair[1], Edge::Start)].into_iter().enumerate() {
            book.adjacencies.push(Adjacency {
                page: page.clone(),
                edge,
                binding: seam.clone(),
                slot,
                orientation: Orientation::Aligned,
            });
        }
        book.conditions.insert(seam, named_condition(&NamedCondition::Kirchhoff, 2).unwrap());
    }
    book
}

/// Dirichlet cylinder of radius 1/2 and length 2: `(jπ/2)² + 4m²`.
fn cylinder_spectrum(count: usize) -> Vec<f64> {
    let mut values: Vec<f64> = (1..=count)
        .flat_map(|j| (-(count as i64)..=count as i64).map(move |m| (j as f64 * PI / 2.0).powi(2) + 4.0 * (m * m) as f64))
        .collect();
    values.sort_by(f64::total_cmp);
    values.truncate(count);
    values
}

/// Largest ratio `|λ_split − λ| / error(λ)` over the compared eigenvalues;
/// the zero eigenvalue is compared against an absolute floor instead.
fn neutrality(unsplit: &[f64], split: &[f64], error: &[f64]) -> f64 {
    unsplit
        .iter()
        .zip(split)
        .zip(error)
        .map(|((a, b), e)| if a.abs() < 1e-8 { (a - b).abs() / 1e-8 } else { (a - b).abs() / e })
        .fold(0.0, f64::max)
}

fn splitting() -> Outcome {
    let n = 200;
    let (split_sphere, _) = common::fixture("sphere-from-caps");
    let unsplit = spectrum(&whole_sphere(), &modes(-4, 4, n, 10));
    let split = spectrum(&split_sphere, &modes(-4, 4, n / 2, 10));
    let exact = sphere_spectrum(3).lowest(10);
    let error: Vec<f64> = unsplit.iter().zip(&exact).map(|(a, e)| (a - e).abs()).collect();
    let sphere_ratio = neutrality(&unsplit, &split, &error);

    let unsplit = spectrum(&cylinder(1), &modes(-4, 4, n, 10));
    let split = spectrum(&cylinder(2), &modes(-4, 4, n / 2, 10));
    let error: Vec<f64> = unsplit.iter().zip(cylinder_spectrum(10)).map(|(a, e)| (a - e).abs()).collect();
    let cylinder_ratio = neutrality(&unsplit, &split, &error);
    outcome(
        sphere_ratio < 1.0 && cylinder_ratio < 1.0,
        format!(
            "perturbation / discretization error: sphere cut at the equator {sphere_ratio:.3}, Dirichlet cylinder cut in half {cylinder_ratio:.3}"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("condition calculus", conditions_suite),
        ("ellipticity pencil", ellipticity_pencil),
        ("sphere from two caps", sphere),
        ("flat two-page rectangle", rectangles),
        ("Dirichlet decoupling", dirichlet_decoupling),
        ("quantum graphs", quantum_graphs),
        ("modes vs full 2-D", cross_solver),
        ("self-adjointness observability", selfadjointness),
        ("sparse vs dense", sparse_dense),
        ("splitting neutrality", splitting),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        failures += usize::from(!o.pass);
        println!(
            "criterion {:>2} {}: {name} — {} [{:.1?}]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed()
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
