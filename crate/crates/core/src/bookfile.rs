//! The book description file: a strict TOML schema for pages, bindings,
//! adjacency records, outer boundary tags, junction conditions and solver
//! settings.
//!
//! ```toml
//! [[page]]
//! id = "north"
//! kind = "spherical-cap"
//! radius = 1.0
//! theta = [0.0, 1.5707963267948966]
//!
//! [[binding]]
//! id = "eq"
//! circumference = 6.283185307179586
//!
//! [[adjacency]]
//! page = "north"
//! edge = "end"
//! binding = "eq"
//! slot = 0
//!
//! [[boundary]]
//! page = "north"
//! edge = "start"
//! tag = "pole"
//!
//! [condition.eq]
//! name = "kirchhoff"
//!
//! [solver]
//! modes = [-4, 4]
//! nodes = 400
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::complex::{
    validate_complex, Adjacency, Binding, BindingShape, OpenBookComplex, Orientation, OuterBoundary, OuterTag,
};
use crate::conditions::{named_condition, ConditionPair, MatrixPair, NamedCondition};
use crate::linalg::{self, CMatrix};
use crate::pages::{ChartKind, Edge, PageChart, SideCondition};

/// A diagnostic anchored at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BookFileError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for BookFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for BookFileError {}

/// Angular treatment requested by the solver section.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngularSetting {
    /// Mode-reduced solves for every `m` in `first..=last`.
    Modes { first: i64, last: i64 },
    Full2D { n_s: usize, n_t: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub angular: AngularSetting,
    /// Intervals per page for mode-reduced runs.
    pub nodes: usize,
    pub count: usize,
    pub tol: f64,
    pub shift: f64,
    pub seed: u64,
    pub cluster_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            angular: AngularSetting::Modes { first: 0, last: 0 },
            nodes: 200,
            count: 10,
            tol: 1e-10,
            shift: -1.0,
            seed: 1,
            cluster_tol: 1e-6,
        }
    }
}

type RawMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBook {
    #[serde(default, rename = "page", skip_serializing_if = "Vec::is_empty")]
    pages: Vec<Spanned<RawPage>>,
    #[serde(default, rename = "binding", skip_serializing_if = "Vec::is_empty")]
    bindings: Vec<Spanned<RawBinding>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    adjacency: Vec<Spanned<RawAdjacency>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    boundary: Vec<Spanned<RawBoundary>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    condition: BTreeMap<String, Spanned<RawPair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    solver: Option<Spanned<RawSolver>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawPage {
    id: String,
    kind: Spanned<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radii: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sides: Option<SideCondition>,
}

#[derive(Debug, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBinding {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    circumference: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segment: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    point: Option<bool>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawAdjacency {
    page: String,
    edge: Edge,
    binding: String,
    slot: usize,
    #[serde(default = "aligned", skip_serializing_if = "is_aligned")]
    orientation: i64,
}

fn aligned() -> i64 {
    1
}

fn is_aligned(o: &i64) -> bool {
    *o == 1
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    page: String,
    edge: Edge,
    tag: OuterTag,
}

#[derive(Debug, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPair {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<Spanned<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    strength: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<RawMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<RawMatrix>,
    /// Per-binding-node samples, in binding node order (top level only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<Spanned<RawPair>>>,
}

#[derive(Debug, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    modes: Option<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    full2d: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cluster_tol: Option<f64>,
}

/// Byte offset → 1-based (line, column), counting columns in characters.
fn position(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    (line, before[line_start..].chars().count() + 1)
}

struct Collector<'t> {
    text: &'t str,
    diagnostics: Vec<Diagnostic>,
}

impl Collector<'_> {
    fn at(&mut self, span: Range<usize>, message: impl Into<String>) {
        let (line, column) = position(self.text, span.start);
        self.diagnostics.push(Diagnostic {
            line,
            column,
            message: message.into(),
        });
    }
}

fn to_matrix(raw: &RawMatrix) -> Option<CMatrix> {
    let rows: Vec<Vec<Complex64>> = raw
        .iter()
        .map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
        .collect();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(linalg::from_rows(&rows))
}

fn from_matrix(m: &CMatrix) -> RawMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn build_pair(raw: &RawPair, k: usize, span: Range<usize>, out: &mut Collector) -> Option<MatrixPair> {
    if raw.samples.is_some() {
        out.at(span, "samples cannot be nested");
        return None;
    }
    let named = match (&raw.name, &raw.a, &raw.c) {
        (Some(name), None, None) => match NamedCondition::from_name(name.get_ref(), raw.strength) {
            Ok(n) => n,
            Err(e) => {
                out.at(name.span(), e.to_string());
                return None;
            }
        },
        (None, Some(a), Some(c)) => {
            let (Some(a), Some(c)) = (to_matrix(a), to_matrix(c)) else {
                out.at(span, "matrix rows must all have the same length");
                return None;
            };
            NamedCondition::Custom(a, c)
        }
        (Some(name), _, _) => {
            out.at(name.span(), "give either a condition name or explicit matrices a and c, not both");
            return None;
        }
        (None, _, _) => {
            out.at(span, "condition needs a name or both matrices a and c");
            return None;
        }
    };
    match named_condition(&named, k) {
        Ok(ConditionPair::Constant(p)) => Some(p),
        Ok(ConditionPair::PerNode(_)) => unreachable!("named conditions are constant"),
        Err(e) => {
            out.at(span, format!("condition size mismatch: {e}"));
            None
        }
    }
}

fn build_page(raw: &RawPage, span: Range<usize>, out: &mut Collector) -> Option<PageChart> {
    let kind_span = raw.kind.span();
    let allowed: &[&str];
    let need = |v: Option<f64>, name: &str, out: &mut Collector| {
        if v.is_none() {
            out.at(span.clone(), format!("page {}: missing `{name}`", raw.id));
        }
        v
    };
    let kind = match raw.kind.get_ref().as_str() {
        "spherical-cap" => {
            allowed = &["radius", "theta"];
            let radius = need(raw.radius, "radius", out);
            if raw.theta.is_none() {
                out.at(span.clone(), format!("page {}: missing `theta`", raw.id));
            }
            ChartKind::SphericalCap {
                radius: radius?,
                theta: raw.theta?,
            }
        }
        "cylinder" => {
            allowed = &["radius", "length"];
            let radius = need(raw.radius, "radius", out);
            let length = need(raw.length, "length", out);
            ChartKind::Cylinder {
                radius: radius?,
                length: length?,
            }
        }
        "flat-annulus" => {
            allowed = &["radii"];
            if raw.radii.is_none() {
                out.at(span.clone(), format!("page {}: missing `radii`", raw.id));
            }
            ChartKind::FlatAnnulus { radii: raw.radii? }
        }
        "flat-rectangle" => {
            allowed = &["length", "width", "sides"];
            let length = need(raw.length, "length", out);
            let width = need(raw.width, "width", out);
            ChartKind::FlatRectangle {
                length: length?,
                width: width?,
                sides: raw.sides.unwrap_or(SideCondition::Dirichlet),
            }
        }
        "interval" => {
            allowed = &["length"];
            ChartKind::Interval {
                length: need(raw.length, "length", out)?,
            }
        }
        other => {
            out.at(
                kind_span,
                format!(
                    "unknown page kind `{other}` (expected spherical-cap, cylinder, flat-annulus, flat-rectangle or interval)"
                ),
            );
            return None;
        }
    };
    let present = [
        ("radius", raw.radius.is_some()),
        ("theta", raw.theta.is_some()),
        ("length", raw.length.is_some()),
        ("width", raw.width.is_some()),
        ("radii", raw.radii.is_some()),
        ("sides", raw.sides.is_some()),
    ];
    let mut ok = true;
    for (name, is_set) in present {
        if is_set && !allowed.contains(&name) {
            out.at(span.clone(), format!("page {}: `{name}` does not apply to kind {}", raw.id, raw.kind.get_ref()));
            ok = false;
        }
    }
    ok.then(|| PageChart::new(raw.id.clone(), kind))
}

fn build_solver(raw: Option<&Spanned<RawSolver>>, out: &mut Collector) -> SolverSettings {
    let mut s = SolverSettings::default();
    let Some(spanned) = raw else { return s };
    let r = spanned.get_ref();
    s.nodes = r.nodes.unwrap_or(s.nodes);
    s.count = r.count.unwrap_or(s.count);
    s.tol = r.tol.unwrap_or(s.tol);
    s.shift = r.shift.unwrap_or(s.shift);
    s.seed = r.seed.unwrap_or(s.seed);
    s.cluster_tol = r.cluster_tol.unwrap_or(s.cluster_tol);
    let full = r.full2d.unwrap_or(false);
    match (full, r.modes, r.grid) {
        (true, None, grid) => {
            let [n_s, n_t] = grid.unwrap_or([s.nodes, 64]);
            s.angular = AngularSetting::Full2D { n_s, n_t };
        }
        (false, modes, None) => {
            let [first, last] = modes.unwrap_or([0, 0]);
            if first > last {
                out.at(spanned.span(), format!("mode range [{first}, {last}] is empty"));
            }
            s.angular = AngularSetting::Modes { first, last };
        }
        (true, Some(_), _) => out.at(spanned.span(), "`modes` and `full2d` are mutually exclusive"),
        (false, _, Some(_)) => out.at(spanned.span(), "`grid` requires `full2d = true`"),
    }
    if s.count == 0 {
        out.at(spanned.span(), "`count` must be at least 1");
    }
    s
}

/// Parses and validates a book file.
pub fn parse_book_file(text: &str) -> Result<(OpenBookComplex, SolverSettings), BookFileError> {
    let raw: RawBook = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| position(text, s.start));
        BookFileError {
            diagnostics: vec![Diagnostic {
                line,
                column,
                message: e.message().trim().to_string(),
            }],
        }
    })?;
    let mut out = Collector {
        text,
        diagnostics: Vec::new(),
    };

    let mut book = OpenBookComplex::default();
    let mut page_spans: HashMap<String, Range<usize>> = HashMap::new();
    for p in &raw.pages {
        page_spans.entry(p.get_ref().id.clone()).or_insert(p.span());
        if let Some(chart) = build_page(p.get_ref(), p.span(), &mut out) {
            book.pages.push(chart);
        }
    }

    let mut binding_spans: HashMap<String, Range<usize>> = HashMap::new();
    for b in &raw.bindings {
        let r = b.get_ref();
        binding_spans.entry(r.id.clone()).or_insert(b.span());
        let shape = match (r.circumference, r.segment, r.point) {
            (Some(c), None, None) => BindingShape::Circle { circumference: c },
            (None, Some(l), None) => BindingShape::Segment { length: l },
            (None, None, Some(true)) => BindingShape::Point,
            _ => {
                out.at(
                    b.span(),
                    format!("binding {}: give exactly one of circumference, segment or point = true", r.id),
                );
                continue;
            }
        };
        book.bindings.push(Binding { id: r.id.clone(), shape });
    }

    for a in &raw.adjacency {
        let r = a.get_ref();
        let Some(orientation) = Orientation::from_sign(r.orientation) else {
            out.at(a.span(), format!("orientation must be 1 or -1, got {}", r.orientation));
            continue;
        };
        book.adjacencies.push(Adjacency {
            page: r.page.clone(),
            edge: r.edge,
            binding: r.binding.clone(),
            slot: r.slot,
            orientation,
        });
    }
    for o in &raw.boundary {
        let r = o.get_ref();
        book.outer.push(OuterBoundary {
            page: r.page.clone(),
            edge: r.edge,
            tag: r.tag,
        });
    }

    for (id, cond) in &raw.condition {
        let k = raw.adjacency.iter().filter(|a| &a.get_ref().binding == id).count();
        if k == 0 {
            out.at(cond.span(), format!("condition given for binding {id}, which has no adjacent pages"));
            continue;
        }
        let c = cond.get_ref();
        let pair = match &c.samples {
            None => build_pair(c, k, cond.span(), &mut out).map(ConditionPair::Constant),
            Some(samples) => {
                let has_constant = c.name.is_some() || c.a.is_some() || c.c.is_some();
                if has_constant {
                    out.at(cond.span(), format!("condition {id}: give constant matrices or samples, not both"));
                    None
                } else {
                    let built: Vec<Option<MatrixPair>> = samples
                        .iter()
                        .map(|s| build_pair(s.get_ref(), k, s.span(), &mut out))
                        .collect();
                    built
                        .into_iter()
                        .collect::<Option<Vec<_>>>()
                        .and_then(|v| ConditionPair::per_node(v).ok())
                }
            }
        };
        if let Some(pair) = pair {
            book.conditions.insert(id.clone(), pair);
        }
    }

    let settings = build_solver(raw.solver.as_ref(), &mut out);

    if out.diagnostics.is_empty() {
        let whole = 0..0;
        for issue in validate_complex(&book).issues {
            let span = issue
                .ids
                .iter()
                .find_map(|id| binding_spans.get(id).or_else(|| page_spans.get(id)))
                .cloned()
                .unwrap_or(whole.clone());
            out.at(span, issue.message);
        }
    }
    if out.diagnostics.is_empty() {
        Ok((book, settings))
    } else {
        out.diagnostics.sort_by_key(|d| (d.line, d.column));
        Err(BookFileError {
            diagnostics: out.diagnostics,
        })
    }
}

fn raw_pair(p: &MatrixPair) -> RawPair {
    RawPair {
        a: Some(from_matrix(&p.a)),
        c: Some(from_matrix(&p.c)),
        ..RawPair::default()
    }
}

/// Serializes a book and its settings; conditions are written as explicit matrices.
pub fn emit_book_file(book: &OpenBookComplex, settings: &SolverSettings) -> String {
    let page = |p: &PageChart| {
        let mut r = RawPage {
            id: p.id.clone(),
            kind: Spanned::new(0..0, String::new()),
            radius: None,
            theta: None,
            length: None,
            width: None,
            radii: None,
            sides: None,
        };
        let kind = match p.kind {
            ChartKind::SphericalCap { radius, theta } => {
                r.radius = Some(radius);
                r.theta = Some(theta);
                "spherical-cap"
            }
            ChartKind::Cylinder { radius, length } => {
                r.radius = Some(radius);
                r.length = Some(length);
                "cylinder"
            }
            ChartKind::FlatAnnulus { radii } => {
                r.radii = Some(radii);
                "flat-annulus"
            }
            ChartKind::FlatRectangle { length, width, sides } => {
                r.length = Some(length);
                r.width = Some(width);
                r.sides = Some(sides);
                "flat-rectangle"
            }
            ChartKind::Interval { length } => {
                r.length = Some(length);
                "interval"
            }
        };
        r.kind = Spanned::new(0..0, kind.to_string());
        Spanned::new(0..0, r)
    };
    let raw = RawBook {
        pages: book.pages.iter().map(page).collect(),
        bindings: book
            .bindings
            .iter()
            .map(|b| {
                let mut r = RawBinding {
                    id: b.id.clone(),
                    ..RawBinding::default()
                };
                match b.shape {
                    BindingShape::Circle { circumference } => r.circumference = Some(circumference),
                    BindingShape::Segment { length } => r.segment = Some(length),
                    BindingShape::Point => r.point = Some(true),
                }
                Spanned::new(0..0, r)
            })
            .collect(),
        adjacency: book
            .adjacencies
            .iter()
            .map(|a| {
                Spanned::new(
                    0..0,
                    RawAdjacency {
                        page: a.page.clone(),
                        edge: a.edge,
                        binding: a.binding.clone(),
                        slot: a.slot,
                        orientation: a.orientation.sign() as i64,
                    },
                )
            })
            .collect(),
        boundary: book
            .outer
            .iter()
            .map(|o| {
                Spanned::new(
                    0..0,
                    RawBoundary {
                        page: o.page.clone(),
                        edge: o.edge,
                        tag: o.tag,
                    },
                )
            })
            .collect(),
        condition: book
            .conditions
            .iter()
            .map(|(id, c)| {
                let rc = match c {
                    ConditionPair::Constant(p) => raw_pair(p),
                    ConditionPair::PerNode(ps) => RawPair {
                        samples: Some(ps.iter().map(|p| Spanned::new(0..0, raw_pair(p))).collect()),
                        ..RawPair::default()
                    },
                };
                (id.clone(), Spanned::new(0..0, rc))
            })
            .collect(),
        solver: Some(Spanned::new(0..0, {
            let mut r = RawSolver {
                nodes: Some(settings.nodes),
                count: Some(settings.count),
                tol: Some(settings.tol),
                shift: Some(settings.shift),
                seed: Some(settings.seed),
                cluster_tol: Some(settings.cluster_tol),
                ..RawSolver::default()
            };
            match settings.angular {
                AngularSetting::Modes { first, last } => r.modes = Some([first, last]),
                AngularSetting::Full2D { n_s, n_t } => {
                    r.full2d = Some(true);
                    r.grid = Some([n_s, n_t]);
                }
            }
            r
        })),
    };
    toml::to_string(&raw).expect("book structures serialize to TOML")
}
