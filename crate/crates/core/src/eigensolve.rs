//! Lowest eigenpairs of `K x = λ M x` for reduced systems.
//!
//! The sparse path is a band Arnoldi iteration on the shift-inverted operator
//! `(K − σM)⁻¹ M`, in complex arithmetic with two-pass classical Gram–Schmidt
//! against the whole basis. Nothing assumes symmetry: whether the computed
//! spectrum is real is left for the caller to observe.

use faer::linalg::solvers::{DenseSolveCore, SolveCore};
use faer::{Conj, Mat};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::discretize::ReducedSystem;
use crate::linalg::CMatrix;

/// Largest dimension accepted by [`dense_reference_eig`].
pub const DENSE_CAP: usize = 4000;

/// Estimated condition numbers above this count as a collision with the spectrum.
const COLLISION_CONDITION: f64 = 1e13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("count must be at least 1")]
    ZeroCount,
    #[error("mass matrix must be positive on every row (row {row} has {value})")]
    NonPositiveMass { row: usize, value: f64 },
    #[error("shift collision: K − {shift}·M is singular to working precision; retry with shift {suggested}")]
    ShiftCollision { shift: f64, suggested: f64 },
    #[error("dimension {dim} exceeds the dense cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("vector has length {got}, system has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dense eigenvalue iteration did not converge")]
    DenseFailure,
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub count: usize,
    pub tol: f64,
    pub shift: f64,
    pub seed: u64,
    /// Relative cluster tolerance: `|λᵢ − λⱼ| ≤ cluster_tol·(1 + |λᵢ|)`.
    pub cluster_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            count: 10,
            tol: 1e-10,
            shift: -1.0,
            seed: 0x5eed,
            cluster_tol: 1e-6,
        }
    }
}

/// A maximal run of eigenvalues (in sorted order) within the cluster tolerance
/// of its first member.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub start: usize,
    pub len: usize,
    /// Mean real part.
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Sorted by real part.
    pub eigenvalues: Vec<Complex64>,
    /// `‖Kx − λMx‖ / (‖K‖_F ‖x‖)` per pair.
    pub residuals: Vec<f64>,
    /// Interior-node eigenvectors (unit 2-norm); empty when not retained.
    pub vectors: Vec<Vec<Complex64>>,
    /// Angular mode per pair for mode-reduced runs.
    pub modes: Vec<Option<i64>>,
    pub clusters: Vec<Cluster>,
    pub symmetry_defect: f64,
    /// Boundary-form asymmetry seen by the computed low modes; see
    /// [`low_mode_defect`]. Zero when no vectors are retained.
    pub low_mode_defect: f64,
    /// False when the iteration cap was hit; only certified pairs are returned.
    pub converged: bool,
    pub basis_size: usize,
}

impl SpectrumResult {
    pub fn real_parts(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.re).collect()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Multiplicity of each cluster, in order.
    pub fn multiplicities(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.len).collect()
    }

    fn sort_and_cluster(&mut self, cluster_tol: f64) {
        let mut order: Vec<usize> = (0..self.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| {
            self.eigenvalues[a]
                .re
                .total_cmp(&self.eigenvalues[b].re)
                .then(self.eigenvalues[a].im.total_cmp(&self.eigenvalues[b].im))
        });
        fn permute<T: Clone>(v: &[T], order: &[usize]) -> Vec<T> {
            order.iter().map(|&i| v[i].clone()).collect()
        }
        self.eigenvalues = permute(&self.eigenvalues, &order);
        self.residuals = permute(&self.residuals, &order);
        self.modes = permute(&self.modes, &order);
        if !self.vectors.is_empty() {
            self.vectors = permute(&self.vectors, &order);
        }
        self.clusters = cluster(&self.eigenvalues, cluster_tol);
    }
}

/// Groups sorted eigenvalues into runs within `tol·(1 + |λ_first|)` of the
/// run's first member.
pub fn cluster(eigenvalues: &[Complex64], tol: f64) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    let mut i = 0;
    while i < eigenvalues.len() {
        let anchor = eigenvalues[i];
        let mut j = i + 1;
        while j < eigenvalues.len() && (eigenvalues[j] - anchor).norm() <= tol * (1.0 + anchor.norm()) {
            j += 1;
        }
        let value = eigenvalues[i..j].iter().map(|z| z.re).sum::<f64>() / (j - i) as f64;
        out.push(Cluster {
            start: i,
            len: j - i,
            value,
        });
        i = j;
    }
    out
}

/// Number of lowest pairs entering [`low_mode_defect`].
pub const LOW_MODES: usize = 10;

/// Discrete boundary form `⟨Kx_i, x_j⟩ − ⟨x_i, Kx_j⟩ = (λ_j − λ̄_i)⟨x_i, x_j⟩`
/// in the mass inner product, over the lowest [`LOW_MODES`] computed pairs,
/// maximised and divided by `max(1, |λ|)`.
///
/// Unlike the whole-matrix [`ReducedSystem::symmetry_defect`], which dilutes
/// an edge-localised asymmetry like `N^{-1/2}` whatever the condition, this
/// only sees smooth functions satisfying the junction conditions: it tends
/// to zero under refinement exactly when `AC*` is Hermitian.
pub fn low_mode_defect(mass: &[f64], eigenvalues: &[Complex64], vectors: &[Vec<Complex64>]) -> f64 {
    let n = LOW_MODES.min(vectors.len()).min(eigenvalues.len());
    if n == 0 {
        return 0.0;
    }
    let inner = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter().zip(b).zip(mass).map(|((x, y), w)| x.conj() * y * *w).sum()
    };
    let norms: Vec<f64> = vectors[..n].iter().map(|x| inner(x, x).re.sqrt()).collect();
    let scale = eigenvalues[..n].iter().map(|l| l.norm()).fold(1.0, f64::max);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let g = inner(&vectors[i], &vectors[j]) / (norms[i] * norms[j]);
            worst = worst.max(((eigenvalues[j] - eigenvalues[i].conj()) * g).norm() / scale);
        }
    }
    worst
}

/// `‖K x − λ M x‖₂ / (‖K‖_F ‖x‖₂)`.
pub fn residual(sys: &ReducedSystem, lambda: Complex64, x: &[Complex64]) -> Result<f64, EigenError> {
    if x.len() != sys.dim() {
        return Err(EigenError::DimensionMismatch {
            expected: sys.dim(),
            got: x.len(),
        });
    }
    Ok(residual_with_norm(sys, sys.stiffness.frobenius(), lambda, x))
}

fn residual_with_norm(sys: &ReducedSystem, knorm: f64, lambda: Complex64, x: &[Complex64]) -> f64 {
    let kx = sys.stiffness.matvec(x);
    let r: f64 = kx
        .iter()
        .zip(x)
        .zip(&sys.mass)
        .map(|((k, xi), m)| (k - lambda * m * xi).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let xn = norm(x);
    let denom = knorm.max(f64::MIN_POSITIVE) * xn;
    if denom == 0.0 {
        f64::INFINITY
    } else {
        r / denom
    }
}

fn check_mass(sys: &ReducedSystem) -> Result<(), EigenError> {
    match sys.mass.iter().position(|&m| !(m > 0.0)) {
        Some(row) => Err(EigenError::NonPositiveMass {
            row,
            value: sys.mass[row],
        }),
        None => Ok(()),
    }
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn axpy(y: &mut [Complex64], alpha: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Shift-inverted operator `x ↦ (K − σM)⁻¹ M x`.
struct ShiftInvert {
    lu: faer::sparse::linalg::solvers::Lu<usize, Complex64>,
    mass: Vec<f64>,
}

impl ShiftInvert {
    fn new(sys: &ReducedSystem, shift: f64, rng: &mut ChaCha8Rng) -> Result<Self, EigenError> {
        let suggested = shift - 0.05 * (1.0 + shift.abs());
        let collision = EigenError::ShiftCollision { shift, suggested };
        let a = sys.stiffness.shifted(shift, &sys.mass);
        let anorm = a.frobenius();
        let lu = a.to_faer().sp_lu().map_err(|_| collision.clone())?;
        let op = Self {
            lu,
            mass: sys.mass.clone(),
        };
        // a solve on a random right-hand side exposes near-singular factors
        let b = random_vector(rng, sys.dim());
        let y = op.solve(&b);
        let growth = norm(&y) * anorm / norm(&b);
        if !growth.is_finite() || growth > COLLISION_CONDITION {
            return Err(collision);
        }
        Ok(op)
    }

    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        self.lu.solve_in_place_with_conj(Conj::No, rhs.as_mut());
        (0..b.len()).map(|i| rhs[(i, 0)]).collect()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mx: Vec<Complex64> = x.iter().zip(&self.mass).map(|(xi, m)| xi * m).collect();
        self.solve(&mx)
    }
}

/// Orthogonalizes `w` against `basis` twice; returns the coefficients and the
/// remaining norm.
fn orthogonalize(basis: &[Vec<Complex64>], w: &mut [Complex64]) -> (Vec<Complex64>, f64) {
    let mut coeffs = vec![Complex64::new(0.0, 0.0); basis.len()];
    for _pass in 0..2 {
        let proj: Vec<Complex64> = basis.par_iter().map(|v| dot(v, w)).collect();
        for (v, (p, c)) in basis.iter().zip(proj.iter().zip(coeffs.iter_mut())) {
            axpy(w, -p, v);
            *c += p;
        }
    }
    (coeffs, norm(w))
}

/// The `count` eigenpairs nearest above `shift`, with default seed and
/// cluster tolerance.
pub fn lowest_eigenpairs(sys: &ReducedSystem, count: usize, tol: f64, shift: f64) -> Result<SpectrumResult, EigenError> {
    lowest_eigenpairs_with(
        sys,
        &EigenOptions {
            count,
            tol,
            shift,
            ..EigenOptions::default()
        },
    )
}

pub fn lowest_eigenpairs_with(sys: &ReducedSystem, opts: &EigenOptions) -> Result<SpectrumResult, EigenError> {
    if opts.count == 0 {
        return Err(EigenError::ZeroCount);
    }
    check_mass(sys)?;
    let n = sys.dim();
    let count = opts.count.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let op = ShiftInvert::new(sys, opts.shift, &mut rng)?;
    let knorm = sys.stiffness.frobenius();

    let b = count.min(6).max(1);
    let min_basis = n.min(count + 2 * b);
    let max_basis = n.min((50 * count).max(min_basis));

    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(max_basis + b);
    // columns of the band Hessenberg matrix: h[j][i] = coefficient of v_i in Op v_j
    let mut h: Vec<Vec<Complex64>> = Vec::new();
    while basis.len() < b.min(n) {
        let mut v = random_vector(&mut rng, n);
        let (_, nv) = orthogonalize(&basis, &mut v);
        v.iter_mut().for_each(|z| *z /= nv);
        basis.push(v);
    }

    let mut previous: Option<Vec<Complex64>> = None;
    let mut j = 0;
    loop {
        let mut w = op.apply(&basis[j]);
        let wnorm = norm(&w);
        let (mut coeffs, rest) = orthogonalize(&basis, &mut w);
        if basis.len() < n {
            if rest > 1e-10 * wnorm {
                w.iter_mut().for_each(|z| *z /= rest);
                coeffs.push(Complex64::new(rest, 0.0));
                basis.push(w);
            } else {
                // deflation: the Krylov space is invariant in this direction;
                // continue with a fresh random vector
                let mut v = random_vector(&mut rng, n);
                let (_, nv) = orthogonalize(&basis, &mut v);
                v.iter_mut().for_each(|z| *z /= nv);
                coeffs.push(Complex64::new(0.0, 0.0));
                basis.push(v);
            }
        }
        h.push(coeffs);
        j += 1;
        let m = j;

        let at_check = m >= min_basis && ((m - min_basis) % b == 0 || m == max_basis || m == n);
        if !at_check {
            continue;
        }
        let candidate = ritz_pairs(sys, knorm, &basis, &h, m, count, opts);
        let all_good = candidate.len() == count && candidate.residuals.iter().all(|&r| r <= opts.tol);
        let stable = previous.as_ref().is_some_and(|prev| {
            prev.len() == candidate.len()
                && prev
                    .iter()
                    .zip(&candidate.eigenvalues)
                    .all(|(a, b)| (a - b).norm() <= 1e-9 * (1.0 + b.norm()))
        });
        previous = Some(candidate.eigenvalues.clone());
        let exhausted = m >= max_basis || m >= n;
        if all_good && (stable || m >= n) {
            let mut res = candidate;
            res.converged = true;
            res.basis_size = m;
            return Ok(res);
        }
        if exhausted {
            let mut res = candidate;
            // keep only certified pairs
            let keep: Vec<usize> = (0..res.len()).filter(|&i| res.residuals[i] <= opts.tol).collect();
            res.eigenvalues = keep.iter().map(|&i| res.eigenvalues[i]).collect();
            res.residuals = keep.iter().map(|&i| res.residuals[i]).collect();
            res.vectors = keep.iter().map(|&i| res.vectors[i].clone()).collect();
            res.modes = keep.iter().map(|&i| res.modes[i]).collect();
            res.clusters = cluster(&res.eigenvalues, opts.cluster_tol);
            res.converged = res.len() == count;
            res.basis_size = m;
            return Ok(res);
        }
    }
}

fn ritz_pairs(
    sys: &ReducedSystem,
    knorm: f64,
    basis: &[Vec<Complex64>],
    h: &[Vec<Complex64>],
    m: usize,
    count: usize,
    opts: &EigenOptions,
) -> SpectrumResult {
    let hm = CMatrix::from_fn(m, m, |i, j| h[j].get(i).copied().unwrap_or_default());
    let (theta, y) = if m == 1 {
        (vec![hm[(0, 0)]], CMatrix::from_fn(1, 1, |_, _| Complex64::new(1.0, 0.0)))
    } else {
        let evd = hm.eigen().expect("Hessenberg eigenvalue iteration did not converge");
        let s = evd.S().column_vector();
        ((0..m).map(|i| s[i]).collect(), evd.U().to_owned())
    };
    let mut order: Vec<usize> = (0..m).filter(|&i| theta[i].norm() > 0.0).collect();
    order.sort_by(|&a, &b| theta[b].norm().total_cmp(&theta[a].norm()));
    order.truncate(count);

    let n = sys.dim();
    let pairs: Vec<(Complex64, f64, Vec<Complex64>)> = order
        .par_iter()
        .map(|&k| {
            let lambda = Complex64::new(opts.shift, 0.0) + theta[k].inv();
            let mut x = vec![Complex64::new(0.0, 0.0); n];
            for (i, v) in basis.iter().take(m).enumerate() {
                axpy(&mut x, y[(i, k)], v);
            }
            let xn = norm(&x);
            x.iter_mut().for_each(|z| *z /= xn);
            let r = residual_with_norm(sys, knorm, lambda, &x);
            (lambda, r, x)
        })
        .collect();
    let mut res = SpectrumResult {
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        residuals: pairs.iter().map(|p| p.1).collect(),
        modes: vec![mode_tag(sys); pairs.len()],
        vectors: pairs.into_iter().map(|p| p.2).collect(),
        clusters: Vec::new(),
        symmetry_defect: sys.symmetry_defect,
        low_mode_defect: 0.0,
        converged: false,
        basis_size: m,
    };
    res.sort_and_cluster(opts.cluster_tol);
    res.low_mode_defect = low_mode_defect(&sys.mass, &res.eigenvalues, &res.vectors);
    res
}

fn mode_tag(sys: &ReducedSystem) -> Option<i64> {
    match sys.layout {
        crate::discretize::Layout::Mode(m) => Some(m),
        crate::discretize::Layout::Full2D { .. } => None,
    }
}

/// Full dense eigensolve of `M⁻¹K` (through its shifted inverse), all
/// eigenpairs, sorted by real part.
pub fn dense_reference_eig(sys: &ReducedSystem) -> Result<SpectrumResult, EigenError> {
    dense_reference_eig_with(sys, 1e-6)
}

pub fn dense_reference_eig_with(sys: &ReducedSystem, cluster_tol: f64) -> Result<SpectrumResult, EigenError> {
    let n = sys.dim();
    if n > DENSE_CAP {
        return Err(EigenError::DimensionCap { dim: n, cap: DENSE_CAP });
    }
    check_mass(sys)?;
    let (values, vecs): (Vec<Complex64>, CMatrix) = if n == 0 {
        (Vec::new(), CMatrix::zeros(0, 0))
    } else if sys.stiffness.is_real() {
        let evd = scaled_real(sys).eigen().map_err(|_| EigenError::DenseFailure)?;
        let s = evd.S().column_vector();
        ((0..n).map(|i| unshift(s[i])).collect(), evd.U().to_owned())
    } else {
        let evd = scaled_complex(sys).eigen().map_err(|_| EigenError::DenseFailure)?;
        let s = evd.S().column_vector();
        ((0..n).map(|i| unshift(s[i])).collect(), evd.U().to_owned())
    };
    // back from `y = M^{1/2} x`
    let vecs = CMatrix::from_fn(n, values.len(), |i, k| vecs[(i, k)] / sys.mass[i].sqrt());
    let knorm = sys.stiffness.frobenius();
    let vectors: Vec<Vec<Complex64>> = (0..values.len())
        .map(|k| {
            let x: Vec<Complex64> = (0..n).map(|i| vecs[(i, k)]).collect();
            let xn = norm(&x);
            x.into_iter().map(|z| z / xn).collect()
        })
        .collect();
    let residuals = values
        .par_iter()
        .zip(&vectors)
        .map(|(&l, x)| residual_with_norm(sys, knorm, l, x))
        .collect();
    let mut res = SpectrumResult {
        modes: vec![mode_tag(sys); values.len()],
        eigenvalues: values,
        residuals,
        vectors,
        clusters: Vec::new(),
        symmetry_defect: sys.symmetry_defect,
        low_mode_defect: 0.0,
        converged: true,
        basis_size: n,
    };
    res.sort_and_cluster(cluster_tol);
    res.low_mode_defect = low_mode_defect(&sys.mass, &res.eigenvalues, &res.vectors);
    Ok(res)
}

/// Eigenvalues only of the dense reference, sorted by real part; several
/// times cheaper than [`dense_reference_eig`] on large systems.
pub fn dense_reference_eigenvalues(sys: &ReducedSystem) -> Result<Vec<Complex64>, EigenError> {
    let n = sys.dim();
    if n > DENSE_CAP {
        return Err(EigenError::DimensionCap { dim: n, cap: DENSE_CAP });
    }
    check_mass(sys)?;
    let values = if n == 0 {
        Vec::new()
    } else if sys.stiffness.is_real() {
        scaled_real(sys).eigenvalues().map_err(|_| EigenError::DenseFailure)?
    } else {
        scaled_complex(sys).eigenvalues().map_err(|_| EigenError::DenseFailure)?
    };
    let mut values: Vec<Complex64> = values.into_iter().map(unshift).collect();
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(values)
}

/// Shift of the dense reference's inverted operator.
const DENSE_SHIFT: f64 = -1.0;

// The dense problem is posed on `(M^{-1/2} K M^{-1/2} − σ)⁻¹`, similar to
// `(M⁻¹K − σ)⁻¹`. Dense QR only resolves eigenvalues to about ε times the
// operator norm, which for `M⁻¹K` itself is `O(h⁻²)`: inverting first makes
// the lowest eigenvalues the dominant ones, and the symmetric scaling keeps
// them well conditioned when `K` is nearly symmetric.
fn scaled_real(sys: &ReducedSystem) -> Mat<f64> {
    let n = sys.dim();
    let mut a = Mat::<f64>::zeros(n, n);
    for (r, c, v) in sys.stiffness.triplets() {
        a[(r, c)] += v.re / (sys.mass[r] * sys.mass[c]).sqrt();
    }
    for i in 0..n {
        a[(i, i)] -= DENSE_SHIFT;
    }
    a.partial_piv_lu().inverse()
}

fn scaled_complex(sys: &ReducedSystem) -> CMatrix {
    let n = sys.dim();
    let mut a = CMatrix::zeros(n, n);
    for (r, c, v) in sys.stiffness.triplets() {
        a[(r, c)] += v / (sys.mass[r] * sys.mass[c]).sqrt();
    }
    for i in 0..n {
        a[(i, i)] -= DENSE_SHIFT;
    }
    a.partial_piv_lu().inverse()
}

fn unshift(mu: Complex64) -> Complex64 {
    DENSE_SHIFT + 1.0 / mu
}

/// Solves every system independently (in parallel) and keeps the `count`
/// lowest eigenvalues of the union.
pub fn solve_modes(systems: &[ReducedSystem], opts: &EigenOptions) -> Result<SpectrumResult, EigenError> {
    let parts: Vec<SpectrumResult> = systems
        .par_iter()
        .map(|s| lowest_eigenpairs_with(s, opts))
        .collect::<Result<_, _>>()?;
    Ok(merge(parts, opts.count, opts.cluster_tol))
}

/// Union of several spectra, truncated to the `count` lowest by real part.
pub fn merge(parts: Vec<SpectrumResult>, count: usize, cluster_tol: f64) -> SpectrumResult {
    let mut out = SpectrumResult {
        eigenvalues: Vec::new(),
        residuals: Vec::new(),
        vectors: Vec::new(),
        modes: Vec::new(),
        clusters: Vec::new(),
        symmetry_defect: 0.0,
        low_mode_defect: 0.0,
        converged: true,
        basis_size: 0,
    };
    let keep_vectors = parts.iter().all(|p| p.vectors.len() == p.eigenvalues.len());
    for p in parts {
        out.eigenvalues.extend(p.eigenvalues);
        out.residuals.extend(p.residuals);
        out.modes.extend(p.modes);
        if keep_vectors {
            out.vectors.extend(p.vectors);
        }
        out.symmetry_defect = out.symmetry_defect.max(p.symmetry_defect);
        // eigenvectors of different modes are orthogonal by construction
        out.low_mode_defect = out.low_mode_defect.max(p.low_mode_defect);
        out.converged &= p.converged;
        out.basis_size = out.basis_size.max(p.basis_size);
    }
    out.sort_and_cluster(cluster_tol);
    if out.eigenvalues.len() > count {
        out.eigenvalues.truncate(count);
        out.residuals.truncate(count);
        out.modes.truncate(count);
        if keep_vectors {
            out.vectors.truncate(count);
        }
        out.clusters = cluster(&out.eigenvalues, cluster_tol);
    }
    out
}
