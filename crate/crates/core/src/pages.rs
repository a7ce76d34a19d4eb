//! Metric charts for pages and the Sturm–Liouville reduction of the
//! Laplace–Beltrami operator on one angular sector.
//!
//! Every surface chart is a warped product `ds² + f(s)² dt²` over a parameter
//! interval `[s₀, s₁]`; `s` is arc length transverse to the bindings. On the
//! `e^{imt}` sector the operator becomes
//! `−(1/f)(f v′)′ + (m²/f²) v` with weight `f`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PageError {
    #[error("s = {s} outside the parameter interval [{lo}, {hi}] of page `{page}`")]
    OutOfRange { page: String, s: f64, lo: f64, hi: f64 },
    #[error("page `{0}` is an interval and has no angular coordinate to separate")]
    NoAngularCoordinate(String),
    #[error("mode {mode} is excluded on page `{page}` ({reason})")]
    ExcludedMode { page: String, mode: i64, reason: &'static str },
}

/// End of a page's parameter interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Edge {
    /// `s = s₀`
    Start,
    /// `s = s₁`
    End,
}

impl Edge {
    pub const BOTH: [Edge; 2] = [Edge::Start, Edge::End];
}

impl std::fmt::Display for Edge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Edge::Start => "start",
            Edge::End => "end",
        })
    }
}

/// Boundary condition on the non-periodic sides `t = 0, W` of a flat rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SideCondition {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChartKind {
    /// Zone of a sphere of radius `radius` between polar angles `theta[0] ≤ theta[1]`;
    /// `s = radius·θ`, `f(s) = radius·sin(s/radius)`.
    SphericalCap { radius: f64, theta: [f64; 2] },
    /// `s ∈ [0, length]`, `f ≡ radius`.
    Cylinder { radius: f64, length: f64 },
    /// Flat annulus in polar coordinates, `s = r ∈ [radii[0], radii[1]]`, `f(s) = s`.
    FlatAnnulus { radii: [f64; 2] },
    /// `[0, length] × [0, width]` with a non-periodic transverse coordinate.
    FlatRectangle { length: f64, width: f64, sides: SideCondition },
    /// One-dimensional edge of a quantum graph.
    Interval { length: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageChart {
    pub id: String,
    pub kind: ChartKind,
}

/// Size of a page's boundary component at an edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryMeasure {
    /// Length of the boundary circle (or segment, for rectangles).
    Length(f64),
    /// Interval endpoint.
    Point,
}

impl PageChart {
    pub fn new(id: impl Into<String>, kind: ChartKind) -> Self {
        Self { id: id.into(), kind }
    }

    pub fn parameter_range(&self) -> (f64, f64) {
        match self.kind {
            ChartKind::SphericalCap { radius, theta } => (radius * theta[0], radius * theta[1]),
            ChartKind::Cylinder { length, .. } => (0.0, length),
            ChartKind::FlatAnnulus { radii } => (radii[0], radii[1]),
            ChartKind::FlatRectangle { length, .. } => (0.0, length),
            ChartKind::Interval { length } => (0.0, length),
        }
    }

    pub fn edge_parameter(&self, edge: Edge) -> f64 {
        let (lo, hi) = self.parameter_range();
        match edge {
            Edge::Start => lo,
            Edge::End => hi,
        }
    }

    /// Surfaces of revolution carry a periodic angle `t ∈ [0, 2π)`.
    pub fn is_rotational(&self) -> bool {
        matches!(
            self.kind,
            ChartKind::SphericalCap { .. } | ChartKind::Cylinder { .. } | ChartKind::FlatAnnulus { .. }
        )
    }

    pub fn is_interval(&self) -> bool {
        matches!(self.kind, ChartKind::Interval { .. })
    }

    pub fn is_rectangle(&self) -> bool {
        matches!(self.kind, ChartKind::FlatRectangle { .. })
    }

    /// `(f, f′)` without range checking.
    fn profile_unchecked(&self, s: f64) -> (f64, f64) {
        match self.kind {
            ChartKind::SphericalCap { radius, .. } => (radius * (s / radius).sin(), (s / radius).cos()),
            ChartKind::Cylinder { radius, .. } => (radius, 0.0),
            ChartKind::FlatAnnulus { .. } => (s, 1.0),
            ChartKind::FlatRectangle { .. } | ChartKind::Interval { .. } => (1.0, 0.0),
        }
    }

    /// `f(s)`; clamps round-off negatives at poles to zero.
    pub fn warp(&self, s: f64) -> f64 {
        self.profile_unchecked(s).0.max(0.0)
    }

    /// `∫_a^b f(s) ds`, in closed form.
    pub fn warp_integral(&self, a: f64, b: f64) -> f64 {
        match self.kind {
            ChartKind::SphericalCap { radius, .. } => {
                radius * radius * ((a / radius).cos() - (b / radius).cos())
            }
            ChartKind::Cylinder { radius, .. } => radius * (b - a),
            ChartKind::FlatAnnulus { .. } => 0.5 * (b * b - a * a),
            ChartKind::FlatRectangle { .. } | ChartKind::Interval { .. } => b - a,
        }
    }

    /// Whether `f` vanishes at the edge (coordinate pole of a cap or disk).
    pub fn is_pole(&self, edge: Edge) -> bool {
        self.is_rotational() && self.warp(self.edge_parameter(edge)) <= 1e-12 * self.length_scale()
    }

    fn length_scale(&self) -> f64 {
        let (lo, hi) = self.parameter_range();
        (hi - lo).abs().max(hi.abs()).max(1.0)
    }

    /// Period (rotational) or width (rectangle) of the transverse coordinate.
    pub fn transverse_extent(&self) -> Option<f64> {
        match self.kind {
            ChartKind::FlatRectangle { width, .. } => Some(width),
            ChartKind::Interval { .. } => None,
            _ => Some(2.0 * PI),
        }
    }

    /// Parameter problems (non-positive sizes, vanishing warp inside the interval).
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = |name: &str, v: f64, out: &mut Vec<String>| {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("page {}: {name} must be positive, got {v}", self.id));
            }
        };
        match self.kind {
            ChartKind::SphericalCap { radius, theta } => {
                positive("radius", radius, &mut out);
                if !(0.0 <= theta[0] && theta[0] < theta[1] && theta[1] <= PI) {
                    out.push(format!(
                        "page {}: polar range [{}, {}] must satisfy 0 <= theta0 < theta1 <= pi",
                        self.id, theta[0], theta[1]
                    ));
                }
            }
            ChartKind::Cylinder { radius, length } => {
                positive("radius", radius, &mut out);
                positive("length", length, &mut out);
            }
            ChartKind::FlatAnnulus { radii } => {
                if !(0.0 <= radii[0] && radii[0] < radii[1] && radii[1].is_finite()) {
                    out.push(format!(
                        "page {}: radial range [{}, {}] must satisfy 0 <= r0 < r1",
                        self.id, radii[0], radii[1]
                    ));
                }
            }
            ChartKind::FlatRectangle { length, width, .. } => {
                positive("length", length, &mut out);
                positive("width", width, &mut out);
            }
            ChartKind::Interval { length } => positive("length", length, &mut out),
        }
        out
    }
}

/// `(f(s), f′(s))` for `s` in the chart's closed parameter interval.
pub fn metric_profile(chart: &PageChart, s: f64) -> Result<(f64, f64), PageError> {
    let (lo, hi) = chart.parameter_range();
    let slack = 1e-12 * chart.length_scale();
    if !(s >= lo - slack && s <= hi + slack) {
        return Err(PageError::OutOfRange {
            page: chart.id.clone(),
            s,
            lo,
            hi,
        });
    }
    Ok(chart.profile_unchecked(s))
}

/// `2π f` at the edge for surfaces of revolution, the width for rectangles,
/// a point for intervals.
pub fn boundary_circumference(chart: &PageChart, edge: Edge) -> BoundaryMeasure {
    match chart.kind {
        ChartKind::Interval { .. } => BoundaryMeasure::Point,
        ChartKind::FlatRectangle { width, .. } => BoundaryMeasure::Length(width),
        _ => BoundaryMeasure::Length(2.0 * PI * chart.warp(chart.edge_parameter(edge))),
    }
}

/// Regularity imposed at a coordinate pole on one angular sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoleRegularity {
    /// `m = 0`: the flux `f v′` vanishes.
    ZeroFlux,
    /// `|m| ≥ 1`: the trace vanishes.
    ZeroTrace,
}

/// One-dimensional weighted problem `−(p v′)′ + q v = λ w v` on `[s₀, s₁]`
/// for one page and one angular mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SlProblem {
    pub chart: PageChart,
    pub mode: i64,
    /// Transverse eigenvalue: `m²` on surfaces of revolution, `(mπ/W)²` on
    /// rectangles, 0 on intervals.
    pub transverse: f64,
}

impl SlProblem {
    pub fn range(&self) -> (f64, f64) {
        self.chart.parameter_range()
    }

    /// Flux coefficient `p = f`.
    pub fn flux(&self, s: f64) -> f64 {
        self.chart.warp(s)
    }

    /// Weight `w = f` of the `L₂` measure on the sector.
    pub fn weight(&self, s: f64) -> f64 {
        self.chart.warp(s)
    }

    /// Potential `m²/f²` of the reduced operator (infinite at a pole for `m ≠ 0`).
    pub fn potential(&self, s: f64) -> f64 {
        if self.transverse == 0.0 {
            return 0.0;
        }
        let f = self.chart.warp(s);
        if self.chart.is_rotational() {
            self.transverse / (f * f)
        } else {
            self.transverse
        }
    }

    /// `q = potential · weight`, the zeroth-order coefficient of the weak form.
    pub fn weighted_potential(&self, s: f64) -> f64 {
        if self.transverse == 0.0 {
            return 0.0;
        }
        if self.chart.is_rotational() {
            self.transverse / self.chart.warp(s)
        } else {
            self.transverse
        }
    }

    /// `∫_a^b w ds`.
    pub fn weight_integral(&self, a: f64, b: f64) -> f64 {
        self.chart.warp_integral(a, b)
    }

    pub fn pole_regularity(&self, edge: Edge) -> Option<PoleRegularity> {
        self.chart.is_pole(edge).then_some(if self.mode == 0 {
            PoleRegularity::ZeroFlux
        } else {
            PoleRegularity::ZeroTrace
        })
    }
}

/// Reduction used by the discretizer: intervals pass through with no
/// transverse term, whatever `m` is.
pub(crate) fn line_problem(chart: &PageChart, m: i64) -> Result<SlProblem, PageError> {
    if chart.is_interval() {
        return Ok(SlProblem {
            chart: chart.clone(),
            mode: 0,
            transverse: 0.0,
        });
    }
    sl_reduce(chart, m)
}

/// Separates the angular variable on a page, producing the `e^{imt}`
/// (or `sin/cos(mπt/W)` on rectangles) sector problem.
pub fn sl_reduce(chart: &PageChart, m: i64) -> Result<SlProblem, PageError> {
    let transverse = match chart.kind {
        ChartKind::Interval { .. } => return Err(PageError::NoAngularCoordinate(chart.id.clone())),
        ChartKind::FlatRectangle { width, sides, .. } => {
            // the transverse problem depends on m² only, so ±m coincide
            if m == 0 && sides == SideCondition::Dirichlet {
                return Err(PageError::ExcludedMode {
                    page: chart.id.clone(),
                    mode: m,
                    reason: "Dirichlet sides exclude the constant transverse mode",
                });
            }
            let k = m as f64 * PI / width;
            k * k
        }
        _ => (m * m) as f64,
    };
    Ok(SlProblem {
        chart: chart.clone(),
        mode: m,
        transverse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn unit_hemisphere() -> PageChart {
        PageChart::new(
            "north",
            ChartKind::SphericalCap {
                radius: 1.0,
                theta: [0.0, FRAC_PI_2],
            },
        )
    }

    #[test]
    fn profile_examples() {
        let (f, df) = metric_profile(&unit_hemisphere(), FRAC_PI_2).unwrap();
        assert!((f - 1.0).abs() < 1e-15 && df.abs() < 1e-15);

        let cyl = PageChart::new("c", ChartKind::Cylinder { radius: 0.3, length: 2.0 });
        for s in [0.0, 0.7, 2.0] {
            assert_eq!(metric_profile(&cyl, s).unwrap(), (0.3, 0.0));
        }

        let ann = PageChart::new("a", ChartKind::FlatAnnulus { radii: [1.0, 3.0] });
        assert_eq!(metric_profile(&ann, 2.0).unwrap(), (2.0, 1.0));
        assert!(matches!(
            metric_profile(&ann, 3.5),
            Err(PageError::OutOfRange { .. })
        ));
    }

    #[test]
    fn reduction_examples() {
        let cyl = PageChart::new("c", ChartKind::Cylinder { radius: 1.0, length: 1.0 });
        let p = sl_reduce(&cyl, 2).unwrap();
        for s in [0.1, 0.5, 0.9] {
            assert_eq!(p.flux(s), 1.0);
            assert_eq!(p.potential(s), 4.0);
        }

        let ann = PageChart::new("a", ChartKind::FlatAnnulus { radii: [0.5, 2.0] });
        let p = sl_reduce(&ann, 1).unwrap();
        for s in [0.5, 1.0, 1.7] {
            assert_eq!(p.flux(s), s);
            assert!((p.potential(s) - 1.0 / (s * s)).abs() < 1e-15);
        }

        let line = PageChart::new("e", ChartKind::Interval { length: 1.0 });
        assert!(matches!(
            sl_reduce(&line, 0),
            Err(PageError::NoAngularCoordinate(_))
        ));
    }

    #[test]
    fn circumference_examples() {
        assert_eq!(
            boundary_circumference(&unit_hemisphere(), Edge::End),
            BoundaryMeasure::Length(2.0 * PI)
        );
        let cyl = PageChart::new("c", ChartKind::Cylinder { radius: 0.5, length: 1.0 });
        for e in Edge::BOTH {
            assert_eq!(boundary_circumference(&cyl, e), BoundaryMeasure::Length(PI));
        }
        let line = PageChart::new("e", ChartKind::Interval { length: 1.0 });
        assert_eq!(boundary_circumference(&line, Edge::Start), BoundaryMeasure::Point);
    }

    #[test]
    fn poles() {
        let h = unit_hemisphere();
        assert!(h.is_pole(Edge::Start) && !h.is_pole(Edge::End));
        let sphere = PageChart::new(
            "s",
            ChartKind::SphericalCap {
                radius: 2.0,
                theta: [0.0, PI],
            },
        );
        assert!(sphere.is_pole(Edge::Start) && sphere.is_pole(Edge::End));
        let disk = PageChart::new("d", ChartKind::FlatAnnulus { radii: [0.0, 1.0] });
        assert!(disk.is_pole(Edge::Start));
        let p0 = sl_reduce(&h, 0).unwrap();
        let p3 = sl_reduce(&h, -3).unwrap();
        assert_eq!(p0.pole_regularity(Edge::Start), Some(PoleRegularity::ZeroFlux));
        assert_eq!(p3.pole_regularity(Edge::Start), Some(PoleRegularity::ZeroTrace));
        assert_eq!(p3.pole_regularity(Edge::End), None);
    }

    #[test]
    fn rectangle_modes() {
        let r = PageChart::new(
            "r",
            ChartKind::FlatRectangle {
                length: 1.0,
                width: 2.0,
                sides: SideCondition::Dirichlet,
            },
        );
        assert!(matches!(sl_reduce(&r, 0), Err(PageError::ExcludedMode { .. })));
        let p = sl_reduce(&r, 2).unwrap();
        assert!((p.potential(0.3) - PI * PI).abs() < 1e-14);
        assert_eq!(boundary_circumference(&r, Edge::Start), BoundaryMeasure::Length(2.0));
    }

    #[test]
    fn warp_integral_matches_quadrature() {
        let charts = [
            unit_hemisphere(),
            PageChart::new("a", ChartKind::FlatAnnulus { radii: [0.2, 1.5] }),
            PageChart::new("c", ChartKind::Cylinder { radius: 0.7, length: 2.0 }),
        ];
        for c in charts {
            let (lo, hi) = c.parameter_range();
            let n = 2000;
            let h = (hi - lo) / n as f64;
            // composite Simpson
            let mut acc = c.warp(lo) + c.warp(hi);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * c.warp(lo + i as f64 * h);
            }
            let simpson = acc * h / 3.0;
            assert!((simpson - c.warp_integral(lo, hi)).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_parameters_are_reported() {
        let bad = PageChart::new(
            "x",
            ChartKind::SphericalCap {
                radius: -1.0,
                theta: [1.0, 0.5],
            },
        );
        assert_eq!(bad.problems().len(), 2);
        assert!(unit_hemisphere().problems().is_empty());
    }
}
