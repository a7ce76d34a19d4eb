//! Junction conditions `A u|_B + C ∂u/∂ν = 0` at a binding and their
//! finite-dimensional calculus: rank, ellipticity of the pencil `A − λC`,
//! self-adjointness of `AC*`, the unitary resolvent `σ(z)`, the canonical
//! unitary form and equivalence of condition pairs.
//!
//! Slot `i` of every matrix refers to the `i`-th adjacency record of the
//! binding; normal derivatives point out of each page.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{self, CMatrix, I, ONE, ZERO};

/// Relative singular-value threshold for the rank of `(A, C)`.
pub const RANK_TOL: f64 = 1e-12;
/// Window for deciding that a pencil eigenvalue is real.
pub const REALITY_TOL: f64 = 1e-9;
/// Lower bound for a pencil eigenvalue to count as strictly positive.
pub const POSITIVITY_TOL: f64 = 1e-12;
/// Largest principal angle accepted by [`equivalent`].
pub const ANGLE_TOL: f64 = 1e-9;
/// Tolerance on the identity `σ(1)·σ(−1) = I`, per unit of size.
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConditionError {
    #[error("unitary-resolvent hypotheses violated: A + izC is singular at z = {z}")]
    SingularResolvent { z: f64 },
    #[error("z must be a nonzero real number")]
    ZeroParameter,
    #[error("canonical form undefined: rank {rank} of {k}, self-adjoint defect {defect:.3e}")]
    NotSelfAdjoint { k: usize, rank: usize, defect: f64 },
    #[error("matrix is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },
    #[error("identity sigma(1) * U = I violated by {defect:.3e}")]
    IdentityViolated { defect: f64 },
    #[error("unknown condition `{0}` (expected dirichlet, neumann, kirchhoff, delta or custom)")]
    UnknownName(String),
    #[error("condition size must be at least 1")]
    EmptySize,
    #[error("matrices must both be {k}x{k}, got A {a_rows}x{a_cols} and C {c_rows}x{c_cols}")]
    ShapeMismatch {
        k: usize,
        a_rows: usize,
        a_cols: usize,
        c_rows: usize,
        c_cols: usize,
    },
    #[error("per-node samples have inconsistent sizes")]
    InconsistentSamples,
    #[error("delta condition requires a finite strength")]
    MissingStrength,
}

/// One `(A, C)` sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPair {
    pub a: CMatrix,
    pub c: CMatrix,
}

impl MatrixPair {
    pub fn new(a: CMatrix, c: CMatrix) -> Result<Self, ConditionError> {
        let k = a.nrows();
        if k == 0 {
            return Err(ConditionError::EmptySize);
        }
        if a.ncols() != k || c.nrows() != k || c.ncols() != k {
            return Err(ConditionError::ShapeMismatch {
                k,
                a_rows: a.nrows(),
                a_cols: a.ncols(),
                c_rows: c.nrows(),
                c_cols: c.ncols(),
            });
        }
        Ok(Self { a, c })
    }

    pub fn size(&self) -> usize {
        self.a.nrows()
    }

    /// The `k × 2k` block `(A, C)`.
    pub fn block(&self) -> CMatrix {
        linalg::hstack(&self.a, &self.c)
    }

    pub fn is_finite(&self) -> bool {
        linalg::is_finite(&self.a) && linalg::is_finite(&self.c)
    }

    /// Left multiplication `(G·A, G·C)`; yields an equivalent condition for invertible `G`.
    pub fn left_multiply(&self, g: &CMatrix) -> MatrixPair {
        MatrixPair {
            a: g * &self.a,
            c: g * &self.c,
        }
    }

    fn hermiticity_tol(&self) -> f64 {
        1e-10 * (linalg::frobenius(&self.a) * linalg::frobenius(&self.c) + 1.0)
    }
}

/// Condition matrices at one binding, either constant along it or sampled
/// at every binding node.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionPair {
    Constant(MatrixPair),
    PerNode(Vec<MatrixPair>),
}

impl ConditionPair {
    pub fn constant(a: CMatrix, c: CMatrix) -> Result<Self, ConditionError> {
        MatrixPair::new(a, c).map(ConditionPair::Constant)
    }

    pub fn per_node(samples: Vec<MatrixPair>) -> Result<Self, ConditionError> {
        let k = samples.first().ok_or(ConditionError::EmptySize)?.size();
        if samples.iter().any(|s| s.size() != k) {
            return Err(ConditionError::InconsistentSamples);
        }
        Ok(ConditionPair::PerNode(samples))
    }

    pub fn size(&self) -> usize {
        self.samples()[0].size()
    }

    pub fn samples(&self) -> &[MatrixPair] {
        match self {
            ConditionPair::Constant(p) => std::slice::from_ref(p),
            ConditionPair::PerNode(v) => v,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, ConditionPair::Constant(_))
    }

    /// Sample used at binding node `node`.
    pub fn at(&self, node: usize) -> &MatrixPair {
        match self {
            ConditionPair::Constant(p) => p,
            ConditionPair::PerNode(v) => &v[node],
        }
    }

    /// Largest Frobenius jump of the block `(A, C)` between consecutive
    /// samples (cyclically); `None` for constant conditions.
    pub fn sample_variation(&self) -> Option<f64> {
        match self {
            ConditionPair::Constant(_) => None,
            ConditionPair::PerNode(v) => {
                let n = v.len();
                let worst = (0..n)
                    .map(|j| {
                        let next = &v[(j + 1) % n];
                        linalg::frobenius(&(&v[j].a - &next.a)).hypot(linalg::frobenius(&(&v[j].c - &next.c)))
                    })
                    .fold(0.0, f64::max);
                Some(worst)
            }
        }
    }
}

/// Outcome of the pencil test `det(A − λC) ≠ 0` for all `λ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticityVerdict {
    pub elliptic: bool,
    /// Smallest real positive root of `det(A − λC)`, unset for an
    /// identically singular pencil.
    pub violating: Option<f64>,
}

/// Unitary `U` of the canonical form `i(U − I) u + (U + I) ∂ν u = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalUnitary {
    pub u: CMatrix,
    pub unitarity_defect: f64,
}

impl CanonicalUnitary {
    pub fn new(u: CMatrix) -> Result<Self, ConditionError> {
        let k = u.nrows();
        let unitarity_defect = linalg::unitarity_defect(&u);
        if !(unitarity_defect <= 1e-10 * k as f64) {
            return Err(ConditionError::NotUnitary {
                defect: unitarity_defect,
            });
        }
        Ok(Self { u, unitarity_defect })
    }

    pub fn size(&self) -> usize {
        self.u.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub k: usize,
    pub rank: usize,
    pub ellipticity: EllipticityVerdict,
    pub selfadjoint_defect: f64,
    pub selfadjoint: bool,
    /// One unitary per sample; present iff full rank and self-adjoint.
    pub canonical: Option<Vec<CanonicalUnitary>>,
    pub sample_variation: Option<f64>,
}

fn rank_of(pair: &MatrixPair) -> usize {
    linalg::numerical_rank(&pair.block(), RANK_TOL)
}

/// Numerical rank of `(A, C)`; minimum over samples.
pub fn check_rank(pair: &ConditionPair) -> usize {
    pair.samples().iter().map(rank_of).min().unwrap_or(0)
}

/// Roots of `det(A − λC)` via a Möbius shift: with `A − μC` invertible,
/// `det(A − λC) = 0` iff `1/(λ − μ)` is an eigenvalue of `(A − μC)⁻¹ C`.
/// Returns `None` when the pencil is singular at every probe point, i.e.
/// identically singular (a regular pencil vanishes at no more than k points).
fn pencil_roots(pair: &MatrixPair) -> Option<Vec<Complex64>> {
    const PROBES: [(f64, f64); 4] = [(0.371, 0.913), (-1.297, 0.204), (2.113, -0.587), (-0.45, -1.61)];
    let (mu, shifted) = PROBES
        .iter()
        .map(|&(re, im)| {
            let mu = Complex64::new(re, im);
            let m = &pair.a - linalg::scale(&pair.c, mu);
            (mu, m)
        })
        .map(|(mu, m)| (linalg::inverse_condition(&m), mu, m))
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .filter(|(rcond, _, _)| *rcond > RANK_TOL)
        .map(|(_, mu, m)| (mu, m))?;
    let bound = linalg::spectral_norm(&linalg::inverse(&shifted)) * linalg::spectral_norm(&pair.c);
    let nus = linalg::eigenvalues(&linalg::solve(&shifted, &pair.c));
    Some(
        nus.into_iter()
            // ν ≈ 0 belongs to an infinite root
            .filter(|nu| nu.norm() > 1e-13 * bound)
            .map(|nu| mu + nu.inv())
            .collect(),
    )
}

fn ellipticity_of(pair: &MatrixPair) -> EllipticityVerdict {
    let Some(roots) = pencil_roots(pair) else {
        return EllipticityVerdict {
            elliptic: false,
            violating: None,
        };
    };
    let smallest = roots
        .iter()
        .filter(|l| l.im.abs() <= REALITY_TOL * (1.0 + l.norm()) && l.re > POSITIVITY_TOL)
        .map(|l| l.re)
        .reduce(f64::min);
    EllipticityVerdict {
        elliptic: smallest.is_none(),
        violating: smallest,
    }
}

/// Checks `det(A − λC) ≠ 0` for all `λ > 0` at every sample.
pub fn check_ellipticity(pair: &ConditionPair) -> EllipticityVerdict {
    let mut verdict = EllipticityVerdict {
        elliptic: true,
        violating: None,
    };
    for sample in pair.samples() {
        let v = ellipticity_of(sample);
        if v.elliptic {
            continue;
        }
        let Some(lambda) = v.violating else {
            return v;
        };
        verdict.elliptic = false;
        verdict.violating = Some(verdict.violating.map_or(lambda, |x| x.min(lambda)));
    }
    verdict
}

/// `‖AC* − (AC*)*‖_F`; maximum over samples.
pub fn check_selfadjoint(pair: &ConditionPair) -> f64 {
    pair.samples()
        .iter()
        .map(|p| linalg::hermitian_defect(&(&p.a * p.c.adjoint())))
        .fold(0.0, f64::max)
}

fn is_selfadjoint_sample(p: &MatrixPair) -> bool {
    linalg::hermitian_defect(&(&p.a * p.c.adjoint())) <= p.hermiticity_tol()
}

/// `σ(z) = −(A + izC)⁻¹ (A − izC)`.
pub fn sigma(pair: &MatrixPair, z: f64) -> Result<CMatrix, ConditionError> {
    if z == 0.0 || !z.is_finite() {
        return Err(ConditionError::ZeroParameter);
    }
    let iz = I * z;
    let plus = &pair.a + linalg::scale(&pair.c, iz);
    let minus = &pair.a - linalg::scale(&pair.c, iz);
    if linalg::inverse_condition(&plus) <= RANK_TOL {
        return Err(ConditionError::SingularResolvent { z });
    }
    let s = linalg::solve(&plus, &minus);
    Ok(linalg::scale(&s, -ONE))
}

/// Canonical unitary `U = σ(−1)`, checked against `σ(1)·U = I`.
pub fn canonical_unitary(pair: &MatrixPair) -> Result<CanonicalUnitary, ConditionError> {
    let k = pair.size();
    let rank = rank_of(pair);
    if rank < k || !is_selfadjoint_sample(pair) {
        return Err(ConditionError::NotSelfAdjoint {
            k,
            rank,
            defect: linalg::hermitian_defect(&(&pair.a * pair.c.adjoint())),
        });
    }
    let u = sigma(pair, -1.0)?;
    let forward = sigma(pair, 1.0)?;
    let defect = linalg::frobenius(&(&forward * &u - linalg::identity(k)));
    if !(defect <= IDENTITY_TOL * k as f64) {
        return Err(ConditionError::IdentityViolated { defect });
    }
    CanonicalUnitary::new(u)
}

/// `(i(U − I), U + I)`.
pub fn pair_from_unitary(u: &CanonicalUnitary) -> ConditionPair {
    let k = u.size();
    let id = linalg::identity(k);
    let a = linalg::scale(&(&u.u - &id), I);
    let c = &u.u + &id;
    ConditionPair::Constant(MatrixPair { a, c })
}

/// Whether two pairs define the same condition, i.e. the row spaces of
/// their `(A, C)` blocks coincide.
pub fn equivalent(p: &MatrixPair, q: &MatrixPair) -> bool {
    if p.size() != q.size() {
        return false;
    }
    let (rp, _) = linalg::row_and_null_space(&p.block(), RANK_TOL);
    let (rq, _) = linalg::row_and_null_space(&q.block(), RANK_TOL);
    rp.ncols() == rq.ncols() && linalg::max_principal_angle_sin(&rp, &rq) <= ANGLE_TOL
}

/// Orthonormal basis of the boundary-value vectors `(u, w) ∈ C^{2k}` with
/// `A u + C w = 0`.
pub fn solution_space(pair: &MatrixPair) -> CMatrix {
    linalg::row_and_null_space(&pair.block(), RANK_TOL).1
}

/// The equivalent pair `(i(σ(z) − I), −(σ(z) + I)/z)`.
pub fn resolvent_pair(pair: &MatrixPair, z: f64) -> Result<MatrixPair, ConditionError> {
    let s = sigma(pair, z)?;
    let id = linalg::identity(pair.size());
    Ok(MatrixPair {
        a: linalg::scale(&(&s - &id), I),
        c: linalg::scale(&(&s + &id), Complex64::new(-1.0 / z, 0.0)),
    })
}

/// Vocabulary of standard junction conditions.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedCondition {
    Dirichlet,
    Neumann,
    /// Trace continuity and vanishing sum of outward derivatives.
    Kirchhoff,
    /// Trace continuity and `Σ ∂ν u = α u`.
    Delta(f64),
    Custom(CMatrix, CMatrix),
}

impl NamedCondition {
    pub fn from_name(name: &str, strength: Option<f64>) -> Result<Self, ConditionError> {
        match name {
            "dirichlet" => Ok(Self::Dirichlet),
            "neumann" => Ok(Self::Neumann),
            "kirchhoff" => Ok(Self::Kirchhoff),
            "delta" => strength
                .filter(|a| a.is_finite())
                .map(Self::Delta)
                .ok_or(ConditionError::MissingStrength),
            other => Err(ConditionError::UnknownName(other.to_string())),
        }
    }
}

pub fn named_condition(cond: &NamedCondition, k: usize) -> Result<ConditionPair, ConditionError> {
    if k == 0 {
        return Err(ConditionError::EmptySize);
    }
    let id = linalg::identity(k);
    let zero = linalg::zeros(k, k);
    let continuity = |flux_trace: Complex64| {
        let mut a = linalg::zeros(k, k);
        let mut c = linalg::zeros(k, k);
        for r in 0..k - 1 {
            a[(r, r)] = ONE;
            a[(r, r + 1)] = -ONE;
        }
        for col in 0..k {
            c[(k - 1, col)] = ONE;
        }
        a[(k - 1, 0)] = -flux_trace;
        MatrixPair { a, c }
    };
    let pair = match cond {
        NamedCondition::Dirichlet => MatrixPair { a: id, c: zero },
        NamedCondition::Neumann => MatrixPair { a: zero, c: id },
        NamedCondition::Kirchhoff => continuity(ZERO),
        NamedCondition::Delta(alpha) => continuity(Complex64::new(*alpha, 0.0)),
        NamedCondition::Custom(a, c) => {
            let p = MatrixPair::new(a.clone(), c.clone())?;
            if p.size() != k {
                return Err(ConditionError::ShapeMismatch {
                    k,
                    a_rows: a.nrows(),
                    a_cols: a.ncols(),
                    c_rows: c.nrows(),
                    c_cols: c.ncols(),
                });
            }
            p
        }
    };
    Ok(ConditionPair::Constant(pair))
}

/// Full diagnostic for one binding.
pub fn report(pair: &ConditionPair) -> ConditionReport {
    let k = pair.size();
    let rank = check_rank(pair);
    let ellipticity = check_ellipticity(pair);
    let selfadjoint_defect = check_selfadjoint(pair);
    let selfadjoint = pair.samples().iter().all(is_selfadjoint_sample);
    let canonical = if rank == k && selfadjoint {
        pair.samples()
            .iter()
            .map(canonical_unitary)
            .collect::<Result<Vec<_>, _>>()
            .ok()
    } else {
        None
    };
    ConditionReport {
        k,
        rank,
        ellipticity,
        selfadjoint_defect,
        selfadjoint,
        canonical,
        sample_variation: pair.sample_variation(),
    }
}
