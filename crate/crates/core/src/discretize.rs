//! Finite-volume assembly of the page-wise Laplace–Beltrami operator, junction
//! condition rows, and elimination of the trace unknowns.
//!
//! Each page carries a vertex-centred grid `s_i = s₀ + i h`, `i = 0..N`. Nodes
//! `1..N−1` own dual cells `[s_i − h/2, s_i + h/2]` whose mass is the exact
//! Riemannian volume `∫ f ds` (times the angular cell width in 2-D). The end
//! nodes are trace slots, a pole unknown, or absent:
//!
//! * an edge attached to a binding, or tagged Dirichlet/Neumann, holds one trace
//!   per angular node; its row is a junction row
//!   `A u_B + C D_h u = 0`, `D_h u = (3u_B − 4u₁ + u₂)/(2h)` (outward),
//!   with outer tags treated as 1×1 pairs `(1, 0)` and `(0, 1)`;
//! * a pole edge holds a half-cell unknown when the angular sector admits a
//!   nonzero pole value (`m = 0`, or any 2-D grid), and nothing otherwise.
//!
//! Interior rows are symmetric; only the junction rows break symmetry, which
//! is what [`ReducedSystem::symmetry_defect`] measures after elimination.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::complex::{validate_complex, OpenBookComplex, OuterTag};
use crate::conditions::{ConditionPair, MatrixPair};
use crate::linalg::{self, CMatrix};
use crate::pages::{line_problem, ChartKind, Edge, PageChart, SideCondition};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Minimum page resolution, in intervals per page and angular nodes.
pub const MIN_NODES: usize = 8;

/// Trace blocks with `σ_min/σ_max` at or below this are treated as singular.
pub const TRACE_BLOCK_RCOND: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizeError {
    #[error("book is not well formed: {}", .0.join("; "))]
    InvalidBook(Vec<String>),
    #[error("resolution {got} below the minimum of {MIN_NODES} nodes")]
    TooFewNodes { got: usize },
    #[error("page `{0}` is not axisymmetric; use the full 2-D grid")]
    NotAxisymmetric(String),
    #[error("binding `{0}` has per-node condition samples; use the full 2-D grid")]
    PerNodeNeedsFull2D(String),
    #[error("binding `{binding}` has {samples} condition samples but {nodes} binding nodes")]
    SampleCount { binding: String, samples: usize, nodes: usize },
    #[error("angular node-count mismatch at binding `{binding}`: {counts:?}")]
    AngularMismatch { binding: String, counts: Vec<usize> },
    #[error(
        "singular trace block at binding `{binding}` node {node} (rcond {rcond:.3e}); \
         A + (3/2h)C is not invertible at this resolution, try a different node count"
    )]
    SingularTraceBlock { binding: String, node: usize, rcond: f64 },
}

/// Angular treatment of the assembled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// One `e^{imt}` sector; the angular derivative enters as the potential `m²/f²`.
    Mode(i64),
    /// Tensor grid with `n_t` angular intervals per page.
    Full2D { n_t: usize },
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layout::Mode(m) => write!(f, "m={m}"),
            Layout::Full2D { n_t } => write!(f, "full2d(n_t={n_t})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Pole,
    /// Trace slot; the index refers to [`DiscreteSystem::blocks`].
    Trace { block: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unknown {
    pub page: usize,
    pub s: f64,
    pub t: f64,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockOwner {
    Binding(String),
    Outer { page: String, edge: Edge, tag: OuterTag },
}

impl fmt::Display for BlockOwner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockOwner::Binding(id) => f.write_str(id),
            BlockOwner::Outer { page, edge, .. } => write!(f, "{page}:{edge}"),
        }
    }
}

/// The junction rows at one binding node: `traces[q]` is slot `q`'s trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionBlock {
    pub owner: BlockOwner,
    pub node: usize,
    pub traces: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub layout: Layout,
    /// Unknown labels; indices `0..n_interior` are interior/pole nodes, the rest traces.
    pub unknowns: Vec<Unknown>,
    pub n_interior: usize,
    pub stiffness: CsrMatrix,
    /// Diagonal mass; zero on trace rows.
    pub mass: Vec<f64>,
    pub blocks: Vec<ConditionBlock>,
    /// Largest page step `h`.
    pub h: f64,
    pub page_ids: Vec<String>,
}

impl DiscreteSystem {
    pub fn dim(&self) -> usize {
        self.unknowns.len()
    }

    pub fn n_traces(&self) -> usize {
        self.dim() - self.n_interior
    }
}

#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub layout: Layout,
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
    /// Maps interior values to trace values: `u_T = trace_map · u_I`.
    pub trace_map: CsrMatrix,
    /// Labels of all unknowns of the unreduced system (interior first).
    pub unknowns: Vec<Unknown>,
    pub page_ids: Vec<String>,
    pub symmetry_defect: f64,
    /// Largest 2-norm condition number among the eliminated trace blocks.
    pub max_block_condition: f64,
    pub h: f64,
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// Builds a reduced system directly from matrices (no traces).
    pub fn from_matrices(stiffness: CsrMatrix, mass: Vec<f64>) -> Self {
        assert_eq!(stiffness.nrows(), mass.len());
        let n = mass.len();
        let symmetry_defect = stiffness.scaled_hermitian_defect(&mass);
        Self {
            layout: Layout::Mode(0),
            stiffness,
            mass,
            trace_map: CsrMatrix::zeros(0, n),
            unknowns: (0..n)
                .map(|i| Unknown {
                    page: 0,
                    s: i as f64,
                    t: 0.0,
                    kind: NodeKind::Interior,
                })
                .collect(),
            page_ids: vec![String::new()],
            symmetry_defect,
            max_block_condition: 1.0,
            h: 0.0,
        }
    }

    /// Interior values extended by the eliminated traces, in unknown order.
    pub fn expand(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut full = x.to_vec();
        full.extend(self.trace_map.matvec(x));
        full
    }
}

/// Relative Frobenius asymmetry of `M^{-1/2} K M^{-1/2}`.
pub fn symmetry_defect(sys: &ReducedSystem) -> f64 {
    sys.stiffness.scaled_hermitian_defect(&sys.mass)
}

/// Angular column of a page grid.
#[derive(Debug, Clone, Copy)]
struct Column {
    t: f64,
    width: f64,
}

/// Angular structure of one page: columns plus the faces joining them
/// (`None` on a side marks a Dirichlet wall, which keeps only the diagonal).
struct Angular {
    columns: Vec<Column>,
    faces: Vec<(Option<usize>, Option<usize>)>,
    dt: f64,
    /// Whether the page has a single pole unknown shared by all columns.
    shared_pole: bool,
}

fn angular(chart: &PageChart, layout: Layout) -> Angular {
    let single = Angular {
        columns: vec![Column { t: 0.0, width: 1.0 }],
        faces: Vec::new(),
        dt: 1.0,
        shared_pole: false,
    };
    let n_t = match layout {
        Layout::Mode(_) => return single,
        Layout::Full2D { n_t } => n_t,
    };
    match chart.kind {
        ChartKind::Interval { .. } => single,
        ChartKind::FlatRectangle { width, sides, .. } => {
            let dt = width / n_t as f64;
            let (columns, faces) = match sides {
                SideCondition::Dirichlet => {
                    let columns = (1..n_t).map(|j| Column { t: j as f64 * dt, width: dt }).collect();
                    let last = n_t - 2;
                    let mut faces: Vec<_> = (0..last).map(|j| (Some(j), Some(j + 1))).collect();
                    faces.push((None, Some(0)));
                    faces.push((Some(last), None));
                    (columns, faces)
                }
                SideCondition::Neumann => {
                    let columns = (0..=n_t)
                        .map(|j| Column {
                            t: j as f64 * dt,
                            width: if j == 0 || j == n_t { dt / 2.0 } else { dt },
                        })
                        .collect();
                    let faces = (0..n_t).map(|j| (Some(j), Some(j + 1))).collect();
                    (columns, faces)
                }
            };
            Angular {
                columns,
                faces,
                dt,
                shared_pole: false,
            }
        }
        _ => {
            let dt = 2.0 * PI / n_t as f64;
            Angular {
                columns: (0..n_t).map(|j| Column { t: j as f64 * dt, width: dt }).collect(),
                faces: (0..n_t).map(|j| (Some(j), Some((j + 1) % n_t))).collect(),
                dt,
                shared_pole: true,
            }
        }
    }
}

/// What sits at one end of a page's grid.
#[derive(Debug, Clone, Copy, PartialEq)]
enum EndNode {
    /// One trace per column, starting at this global index.
    Traces(usize),
    /// Pole unknown (one per column in mode layout, shared in 2-D).
    Pole(usize),
    /// Pole value fixed at zero.
    Zero,
}

struct PageLayout {
    h: f64,
    n: usize,
    s0: f64,
    angular: Angular,
    /// Global index of interior node `(i, j)` is `interior0 + (i−1)·ncols + j`.
    interior0: usize,
    ends: [EndNode; 2],
}

impl PageLayout {
    fn ncols(&self) -> usize {
        self.angular.columns.len()
    }

    fn interior(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= 1 && i < self.n);
        self.interior0 + (i - 1) * self.ncols() + j
    }

    fn s(&self, i: usize) -> f64 {
        self.s0 + i as f64 * self.h
    }

    /// Global index of grid node `(i, j)`, or `None` for a fixed zero.
    fn node(&self, i: usize, j: usize) -> Option<usize> {
        let end = if i == 0 {
            Some(0)
        } else if i == self.n {
            Some(1)
        } else {
            None
        };
        match end {
            None => Some(self.interior(i, j)),
            Some(e) => match self.ends[e] {
                EndNode::Traces(start) => Some(start + j),
                EndNode::Pole(idx) => Some(if self.angular.shared_pole { idx } else { idx + j }),
                EndNode::Zero => None,
            },
        }
    }

    /// Interior nodes one and two steps inward from an edge.
    fn inward(&self, edge: Edge, j: usize) -> (usize, usize) {
        match edge {
            Edge::Start => (self.interior(1, j), self.interior(2, j)),
            Edge::End => (self.interior(self.n - 1, j), self.interior(self.n - 2, j)),
        }
    }
}

fn edge_slot(edge: Edge) -> usize {
    match edge {
        Edge::Start => 0,
        Edge::End => 1,
    }
}

/// Page column matching binding node `b` under the adjacency's orientation.
fn column_for(chart: &PageChart, ncols: usize, b: usize, reversed: bool) -> usize {
    if !reversed || ncols == 1 {
        return b;
    }
    if chart.is_rotational() {
        (ncols - b) % ncols
    } else {
        ncols - 1 - b
    }
}

fn check_book(book: &OpenBookComplex) -> Result<(), DiscretizeError> {
    let report = validate_complex(book);
    if report.is_empty() {
        Ok(())
    } else {
        Err(DiscretizeError::InvalidBook(
            report.issues.iter().map(|i| i.message.clone()).collect(),
        ))
    }
}

/// Mode-`m` system with `nodes_per_page` intervals on every page.
pub fn build_mode_system(book: &OpenBookComplex, m: i64, nodes_per_page: usize) -> Result<DiscreteSystem, DiscretizeError> {
    if nodes_per_page < MIN_NODES {
        return Err(DiscretizeError::TooFewNodes { got: nodes_per_page });
    }
    check_book(book)?;
    if let Some(p) = book.pages.iter().find(|p| p.is_rectangle()) {
        return Err(DiscretizeError::NotAxisymmetric(p.id.clone()));
    }
    if let Some((id, _)) = book.conditions.iter().find(|(_, c)| !c.is_constant()) {
        return Err(DiscretizeError::PerNodeNeedsFull2D(id.clone()));
    }
    assemble(book, Layout::Mode(m), nodes_per_page)
}

/// Tensor-grid system with `n_s` intervals per page in `s` and `n_t` in `t`.
pub fn build_full_system(book: &OpenBookComplex, grid: (usize, usize)) -> Result<DiscreteSystem, DiscretizeError> {
    let (n_s, n_t) = grid;
    if n_s < MIN_NODES || n_t < MIN_NODES {
        return Err(DiscretizeError::TooFewNodes { got: n_s.min(n_t) });
    }
    check_book(book)?;
    assemble(book, Layout::Full2D { n_t }, n_s)
}

fn assemble(book: &OpenBookComplex, layout: Layout, n: usize) -> Result<DiscreteSystem, DiscretizeError> {
    let mode = match layout {
        Layout::Mode(m) => Some(m),
        Layout::Full2D { .. } => None,
    };

    // --- numbering: interior and pole nodes first, then traces
    let mut pages: Vec<PageLayout> = Vec::with_capacity(book.pages.len());
    let mut unknowns: Vec<Unknown> = Vec::new();
    for (p, chart) in book.pages.iter().enumerate() {
        let (s0, s1) = chart.parameter_range();
        let h = (s1 - s0) / n as f64;
        let ang = angular(chart, layout);
        let interior0 = unknowns.len();
        for i in 1..n {
            for c in &ang.columns {
                unknowns.push(Unknown {
                    page: p,
                    s: s0 + i as f64 * h,
                    t: c.t,
                    kind: NodeKind::Interior,
                });
            }
        }
        let mut ends = [EndNode::Zero; 2];
        for edge in Edge::BOTH {
            if book.outer_tag(&chart.id, edge) != Some(OuterTag::Pole) {
                continue;
            }
            let keeps_value = match mode {
                Some(m) => m == 0,
                None => true,
            };
            if keeps_value {
                let s = chart.edge_parameter(edge);
                ends[edge_slot(edge)] = EndNode::Pole(unknowns.len());
                let count = if ang.shared_pole { 1 } else { ang.columns.len() };
                for c in ang.columns.iter().take(count) {
                    unknowns.push(Unknown {
                        page: p,
                        s,
                        t: c.t,
                        kind: NodeKind::Pole,
                    });
                }
            }
        }
        pages.push(PageLayout {
            h,
            n,
            s0,
            angular: ang,
            interior0,
            ends,
        });
    }
    let n_interior = unknowns.len();

    // trace slots, grouped into condition blocks
    let mut blocks: Vec<ConditionBlock> = Vec::new();
    let mut block_pairs: Vec<MatrixPair> = Vec::new();
    let mut block_slots: Vec<Vec<(usize, Edge, usize)>> = Vec::new(); // (page, edge, column)

    let mut trace_start: HashMap<(usize, Edge), usize> = HashMap::new();
    for (p, chart) in book.pages.iter().enumerate() {
        for edge in Edge::BOTH {
            let tag = book.outer_tag(&chart.id, edge);
            if tag == Some(OuterTag::Pole) {
                continue;
            }
            let start = unknowns.len();
            trace_start.insert((p, edge), start);
            pages[p].ends[edge_slot(edge)] = EndNode::Traces(start);
            for c in &pages[p].angular.columns {
                unknowns.push(Unknown {
                    page: p,
                    s: chart.edge_parameter(edge),
                    t: c.t,
                    kind: NodeKind::Trace { block: usize::MAX },
                });
            }
            if let Some(tag) = tag {
                let pair = match tag {
                    OuterTag::Dirichlet => MatrixPair::new(linalg::identity(1), linalg::zeros(1, 1)),
                    _ => MatrixPair::new(linalg::zeros(1, 1), linalg::identity(1)),
                }
                .expect("1x1 pairs are well formed");
                for j in 0..pages[p].ncols() {
                    let owner = BlockOwner::Outer {
                        page: chart.id.clone(),
                        edge,
                        tag,
                    };
                    blocks.push(ConditionBlock {
                        owner,
                        node: j,
                        traces: vec![start + j],
                    });
                    block_pairs.push(pair.clone());
                    block_slots.push(vec![(p, edge, j)]);
                }
            }
        }
    }

    for binding in &book.bindings {
        let slots = book.slots(&binding.id);
        let page_idx: Vec<usize> = slots.iter().map(|a| book.page_index(&a.page).unwrap()).collect();
        let counts: Vec<usize> = page_idx.iter().map(|&p| pages[p].ncols()).collect();
        if counts.windows(2).any(|w| w[0] != w[1]) {
            return Err(DiscretizeError::AngularMismatch {
                binding: binding.id.clone(),
                counts,
            });
        }
        let nodes = counts[0];
        let cond = &book.conditions[&binding.id];
        if let ConditionPair::PerNode(samples) = cond {
            if samples.len() != nodes {
                return Err(DiscretizeError::SampleCount {
                    binding: binding.id.clone(),
                    samples: samples.len(),
                    nodes,
                });
            }
        }
        for b in 0..nodes {
            let mut traces = Vec::with_capacity(slots.len());
            let mut geometry = Vec::with_capacity(slots.len());
            for (a, &p) in slots.iter().zip(&page_idx) {
                let reversed = a.orientation.sign() < 0;
                let j = column_for(&book.pages[p], nodes, b, reversed);
                traces.push(trace_start[&(p, a.edge)] + j);
                geometry.push((p, a.edge, j));
            }
            blocks.push(ConditionBlock {
                owner: BlockOwner::Binding(binding.id.clone()),
                node: b,
                traces,
            });
            block_pairs.push(cond.at(b).clone());
            block_slots.push(geometry);
        }
    }
    for (bi, block) in blocks.iter().enumerate() {
        for &t in &block.traces {
            unknowns[t].kind = NodeKind::Trace { block: bi };
        }
    }

    // --- stiffness and mass
    let dim = unknowns.len();
    let mut kb = TripletBuilder::new(dim, dim);
    let mut mass = vec![0.0; dim];
    for (p, chart) in book.pages.iter().enumerate() {
        let g = &pages[p];
        let sl = match mode {
            Some(m) => Some(line_problem(chart, m).map_err(|_| DiscretizeError::NotAxisymmetric(chart.id.clone()))?),
            None => None,
        };
        let (s_lo, s_hi) = chart.parameter_range();

        // mass: interior cells, then pole half cells
        for i in 1..n {
            let s = g.s(i);
            let vol = chart.warp_integral(s - g.h / 2.0, s + g.h / 2.0);
            for (j, c) in g.angular.columns.iter().enumerate() {
                mass[g.interior(i, j)] = vol * c.width;
            }
        }
        for edge in Edge::BOTH {
            if let EndNode::Pole(idx) = g.ends[edge_slot(edge)] {
                let half = match edge {
                    Edge::Start => chart.warp_integral(s_lo, s_lo + g.h / 2.0),
                    Edge::End => chart.warp_integral(s_hi - g.h / 2.0, s_hi),
                };
                if g.angular.shared_pole {
                    mass[idx] = half * 2.0 * PI;
                } else {
                    for (j, c) in g.angular.columns.iter().enumerate() {
                        mass[idx + j] = half * c.width;
                    }
                }
            }
        }

        // s-faces; rows of trace nodes are junction rows and get no flux
        for i in 0..n {
            let w_s = chart.warp(g.s(i) + g.h / 2.0) / g.h;
            for (j, c) in g.angular.columns.iter().enumerate() {
                let w = w_s * c.width;
                let a = g.node(i, j);
                let b = g.node(i + 1, j);
                let flux_row = |x: Option<usize>| x.filter(|&x| x < n_interior);
                for (row, other) in [(flux_row(a), b), (flux_row(b), a)] {
                    if let Some(r) = row {
                        kb.add_real(r, r, w);
                        if let Some(o) = other {
                            kb.add_real(r, o, -w);
                        }
                    }
                }
            }
        }

        // transverse term
        match &sl {
            Some(problem) if problem.transverse != 0.0 => {
                for i in 1..n {
                    let q = problem.weighted_potential(g.s(i)) * g.h;
                    let r = g.interior(i, 0);
                    kb.add_real(r, r, q);
                }
            }
            Some(_) => {}
            None => {
                for i in 1..n {
                    let f = if chart.is_rotational() { chart.warp(g.s(i)) } else { 1.0 };
                    let w = g.h / (f * g.angular.dt);
                    for &(a, b) in &g.angular.faces {
                        let a = a.map(|j| g.interior(i, j));
                        let b = b.map(|j| g.interior(i, j));
                        for (row, other) in [(a, b), (b, a)] {
                            if let Some(r) = row {
                                kb.add_real(r, r, w);
                                if let Some(o) = other {
                                    kb.add_real(r, o, -w);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // junction rows: row r of each block sits on the trace of slot r
    for ((block, pair), geometry) in blocks.iter().zip(&block_pairs).zip(&block_slots) {
        let k = block.traces.len();
        for r in 0..k {
            let row = block.traces[r];
            for (q, &(p, edge, j)) in geometry.iter().enumerate() {
                let g = &pages[p];
                let a = pair.a[(r, q)];
                let c = pair.c[(r, q)];
                let (u1, u2) = g.inward(edge, j);
                let inv2h = 1.0 / (2.0 * g.h);
                kb.add(row, block.traces[q], a + c * (3.0 * inv2h));
                kb.add(row, u1, c * (-4.0 * inv2h));
                kb.add(row, u2, c * inv2h);
            }
        }
    }

    let h = pages.iter().map(|g| g.h).fold(0.0, f64::max);
    Ok(DiscreteSystem {
        layout,
        unknowns,
        n_interior,
        stiffness: kb.build(),
        mass,
        blocks,
        h,
        page_ids: book.pages.iter().map(|p| p.id.clone()).collect(),
    })
}

/// Solves the junction rows for the traces and substitutes them into the
/// interior rows: `K_red = K_II − K_IT K_TT⁻¹ K_TI`.
pub fn eliminate_traces(sys: &DiscreteSystem) -> Result<ReducedSystem, DiscretizeError> {
    let ni = sys.n_interior;
    let k = &sys.stiffness;

    // interior rows' couplings to each trace: trace -> [(row, value)]
    let mut to_trace: HashMap<usize, Vec<(usize, Complex64)>> = HashMap::new();
    let mut entries: Vec<(usize, usize, Complex64)> = Vec::with_capacity(k.nnz());
    for r in 0..ni {
        for (c, v) in k.row(r) {
            if c < ni {
                entries.push((r, c, v));
            } else {
                to_trace.entry(c).or_default().push((r, v));
            }
        }
    }

    let mut trace_entries = Vec::new();
    let mut max_cond: f64 = 1.0;
    for block in &sys.blocks {
        let kk = block.traces.len();
        let mut ktt = CMatrix::zeros(kk, kk);
        let mut cols: Vec<usize> = Vec::new();
        for (a, &t) in block.traces.iter().enumerate() {
            for (c, v) in k.row(t) {
                if c >= ni {
                    let b = block
                        .traces
                        .iter()
                        .position(|&x| x == c)
                        .expect("junction rows couple traces of one block only");
                    ktt[(a, b)] += v;
                } else if !cols.contains(&c) {
                    cols.push(c);
                }
            }
        }
        let rcond = linalg::inverse_condition(&ktt);
        if !(rcond > TRACE_BLOCK_RCOND) {
            return Err(DiscretizeError::SingularTraceBlock {
                binding: block.owner.to_string(),
                node: block.node,
                rcond,
            });
        }
        max_cond = max_cond.max(1.0 / rcond);
        let mut kti = CMatrix::zeros(kk, cols.len());
        for (a, &t) in block.traces.iter().enumerate() {
            for (c, v) in k.row(t) {
                if c < ni {
                    let b = cols.iter().position(|&x| x == c).unwrap();
                    kti[(a, b)] += v;
                }
            }
        }
        // u_T = −K_TT⁻¹ K_TI u_I
        let y = linalg::solve(&ktt, &kti);
        for (a, &t) in block.traces.iter().enumerate() {
            for (b, &c) in cols.iter().enumerate() {
                let v = -y[(a, b)];
                if v != Complex64::new(0.0, 0.0) {
                    trace_entries.push((t - ni, c, v));
                }
            }
            if let Some(list) = to_trace.get(&t) {
                for &(r, kit) in list {
                    for (b, &c) in cols.iter().enumerate() {
                        entries.push((r, c, -kit * y[(a, b)]));
                    }
                }
            }
        }
    }

    let stiffness = CsrMatrix::from_triplets(ni, ni, entries);
    let mass = sys.mass[..ni].to_vec();
    let symmetry_defect = stiffness.scaled_hermitian_defect(&mass);
    Ok(ReducedSystem {
        layout: sys.layout,
        stiffness,
        mass,
        trace_map: CsrMatrix::from_triplets(sys.n_traces(), ni, trace_entries),
        unknowns: sys.unknowns.clone(),
        page_ids: sys.page_ids.clone(),
        symmetry_defect,
        max_block_condition: max_cond,
        h: sys.h,
    })
}
