//! Closed-form reference spectra used to check the solver.

use std::f64::consts::PI;

use crate::pages::SideCondition;

/// Eigenvalue levels with exact multiplicities, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSpectrum {
    pub levels: Vec<(f64, usize)>,
    pub provenance: &'static str,
}

impl ReferenceSpectrum {
    fn from_values(mut values: Vec<f64>, provenance: &'static str) -> Self {
        values.sort_by(f64::total_cmp);
        let mut levels: Vec<(f64, usize)> = Vec::new();
        for v in values {
            match levels.last_mut() {
                Some((last, mult)) if (v - *last).abs() <= 1e-12 * (1.0 + last.abs()) => *mult += 1,
                _ => levels.push((v, 1)),
            }
        }
        Self { levels, provenance }
    }

    /// Eigenvalues repeated by multiplicity, truncated to `n` entries.
    pub fn lowest(&self, n: usize) -> Vec<f64> {
        self.levels
            .iter()
            .flat_map(|&(v, m)| std::iter::repeat_n(v, m))
            .take(n)
            .collect()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.levels.iter().map(|l| l.1).sum()
    }

    /// Every eigenvalue multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            levels: self.levels.iter().map(|&(v, m)| (v * factor, m)).collect(),
            provenance: self.provenance,
        }
    }
}

/// Unit sphere: `l(l+1)` with multiplicity `2l+1`, `l ≤ l_max`.
pub fn sphere_spectrum(l_max: usize) -> ReferenceSpectrum {
    ReferenceSpectrum {
        levels: (0..=l_max).map(|l| ((l * (l + 1)) as f64, 2 * l + 1)).collect(),
        provenance: "spherical harmonics Y_lm on the unit sphere",
    }
}

/// Unit hemisphere with Dirichlet or Neumann conditions on the equator.
///
/// `Y_lm` is odd about the equator exactly when `l + |m|` is odd, so
/// Dirichlet keeps `l` of the `2l+1` harmonics at level `l` and Neumann the
/// other `l+1`.
pub fn hemisphere_spectrum(bc: SideCondition, l_max: usize) -> ReferenceSpectrum {
    let levels = (0..=l_max)
        .map(|l| {
            let mult = match bc {
                SideCondition::Dirichlet => l,
                SideCondition::Neumann => l + 1,
            };
            ((l * (l + 1)) as f64, mult)
        })
        .filter(|&(_, m)| m > 0)
        .collect();
    ReferenceSpectrum {
        levels,
        provenance: "equatorial parity of associated Legendre functions",
    }
}

/// Lowest `count` eigenvalues of the `L × W` rectangle,
/// `π²(m²/L² + n²/W²)`, with `m, n ≥ 1` (Dirichlet) or `≥ 0` (Neumann).
pub fn rectangle_spectrum(length: f64, width: f64, bc: SideCondition, count: usize) -> ReferenceSpectrum {
    let first = match bc {
        SideCondition::Dirichlet => 1,
        SideCondition::Neumann => 0,
    };
    // every index pair below the count-th eigenvalue has both indices ≤ first + count
    let top = first + count;
    let mut values = Vec::new();
    for m in first..=top {
        for n in first..=top {
            let (a, b) = (m as f64 / length, n as f64 / width);
            values.push(PI * PI * (a * a + b * b));
        }
    }
    values.sort_by(f64::total_cmp);
    let cutoff = values.get(count.saturating_sub(1)).copied().unwrap_or(0.0);
    values.retain(|&v| v <= cutoff * (1.0 + 1e-12));
    ReferenceSpectrum::from_values(values, "separation of variables on a rectangle")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphTopology {
    /// Intervals joined end to end by Kirchhoff vertices.
    Chain,
    /// Intervals joined into a loop.
    Circle,
}

/// Lowest `count` eigenvalues of a Kirchhoff chain or loop of intervals.
/// `bc` applies to the two free ends of a chain and is ignored for a circle.
pub fn interval_spectrum(lengths: &[f64], topology: GraphTopology, bc: SideCondition, count: usize) -> ReferenceSpectrum {
    let total: f64 = lengths.iter().sum();
    let values: Vec<f64> = match topology {
        GraphTopology::Chain => {
            let first = match bc {
                SideCondition::Dirichlet => 1,
                SideCondition::Neumann => 0,
            };
            (first..first + count).map(|n| (n as f64 * PI / total).powi(2)).collect()
        }
        GraphTopology::Circle => (0..count)
            .map(|i| {
                // 0, 1, 1, 2, 2, ...
                let n = i.div_ceil(2);
                (2.0 * PI * n as f64 / total).powi(2)
            })
            .collect(),
    };
    ReferenceSpectrum::from_values(
        values,
        match topology {
            GraphTopology::Chain => "Kirchhoff chain equals one interval of the total length",
            GraphTopology::Circle => "Fourier modes on a circle of the total length",
        },
    )
}
