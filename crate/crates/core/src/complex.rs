//! The open-book complex: pages, bindings, the adjacency records that attach
//! page edges to bindings, and the junction condition at every binding.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::ConditionPair;
use crate::pages::{boundary_circumference, BoundaryMeasure, Edge, PageChart};

/// Relative tolerance for matching boundary lengths across a binding.
pub const METRIC_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComplexError {
    #[error("unknown binding `{0}`")]
    UnknownBinding(String),
    #[error("unknown page `{0}`")]
    UnknownPage(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BindingShape {
    /// Closed circle of the given circumference.
    Circle { circumference: f64 },
    /// Straight segment shared by flat rectangles; its ends lie on the
    /// outer boundary of the book.
    Segment { length: f64 },
    /// Vertex of a quantum graph.
    Point,
}

impl BindingShape {
    fn measure(&self) -> BoundaryMeasure {
        match *self {
            BindingShape::Circle { circumference } => BoundaryMeasure::Length(circumference),
            BindingShape::Segment { length } => BoundaryMeasure::Length(length),
            BindingShape::Point => BoundaryMeasure::Point,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub id: String,
    pub shape: BindingShape,
}

/// Direction of a page's transverse coordinate relative to the binding's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    #[default]
    Aligned,
    Reversed,
}

impl Orientation {
    pub fn sign(self) -> i8 {
        match self {
            Orientation::Aligned => 1,
            Orientation::Reversed => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(Orientation::Aligned),
            -1 => Some(Orientation::Reversed),
            _ => None,
        }
    }
}

/// Attachment of one page edge to one slot of a binding.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    pub page: String,
    pub edge: Edge,
    pub binding: String,
    /// Row/column index of this page in the binding's condition matrices.
    pub slot: usize,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuterTag {
    Dirichlet,
    Neumann,
    /// Coordinate pole of a cap or disk.
    Pole,
}

/// Condition on a page edge that is not attached to any binding.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterBoundary {
    pub page: String,
    pub edge: Edge,
    pub tag: OuterTag,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OpenBookComplex {
    pub pages: Vec<PageChart>,
    pub bindings: Vec<Binding>,
    pub adjacencies: Vec<Adjacency>,
    pub outer: Vec<OuterBoundary>,
    pub conditions: BTreeMap<String, ConditionPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IssueKind {
    DuplicateId,
    InvalidPage,
    UnknownReference,
    EdgeConflict,
    UnclosedEdge,
    PoleMismatch,
    SlotLayout,
    EmptyBinding,
    ShapeMismatch,
    CircumferenceMismatch,
    MissingCondition,
    ConditionSizeMismatch,
    NonFiniteCondition,
    SideMismatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub kind: IssueKind,
    /// Offending page/binding ids.
    pub ids: Vec<String>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }

    fn push(&mut self, kind: IssueKind, ids: &[&str], message: String) {
        self.issues.push(Issue {
            kind,
            ids: ids.iter().map(|s| s.to_string()).collect(),
            message,
        });
    }
}

impl OpenBookComplex {
    pub fn page_index(&self, id: &str) -> Option<usize> {
        self.pages.iter().position(|p| p.id == id)
    }

    pub fn binding_index(&self, id: &str) -> Option<usize> {
        self.bindings.iter().position(|b| b.id == id)
    }

    pub fn page(&self, id: &str) -> Option<&PageChart> {
        self.pages.iter().find(|p| p.id == id)
    }

    /// Adjacency records of a binding, ordered by slot.
    pub fn slots(&self, binding: &str) -> Vec<&Adjacency> {
        let mut v: Vec<&Adjacency> = self.adjacencies.iter().filter(|a| a.binding == binding).collect();
        v.sort_by_key(|a| a.slot);
        v
    }

    /// Binding attachment of a page edge, if any.
    pub fn attachment(&self, page: &str, edge: Edge) -> Option<&Adjacency> {
        self.adjacencies.iter().find(|a| a.page == page && a.edge == edge)
    }

    pub fn outer_tag(&self, page: &str, edge: Edge) -> Option<OuterTag> {
        self.outer
            .iter()
            .find(|o| o.page == page && o.edge == edge)
            .map(|o| o.tag)
    }
}

/// Number of adjacency records referencing the binding.
pub fn binding_degree(book: &OpenBookComplex, binding: &str) -> Result<usize, ComplexError> {
    if book.binding_index(binding).is_none() {
        return Err(ComplexError::UnknownBinding(binding.to_string()));
    }
    Ok(book.adjacencies.iter().filter(|a| a.binding == binding).count())
}

fn lengths_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= METRIC_TOL * a.abs().max(b.abs())
}

/// Checks every structural and metric invariant; an empty report means the
/// book is well formed.
pub fn validate_complex(book: &OpenBookComplex) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut seen = BTreeSet::new();
    for p in &book.pages {
        if !seen.insert(p.id.as_str()) {
            report.push(IssueKind::DuplicateId, &[&p.id], format!("duplicate page id {}", p.id));
        }
        for problem in p.problems() {
            report.push(IssueKind::InvalidPage, &[&p.id], problem);
        }
    }
    let mut seen = BTreeSet::new();
    for b in &book.bindings {
        if !seen.insert(b.id.as_str()) {
            report.push(IssueKind::DuplicateId, &[&b.id], format!("duplicate binding id {}", b.id));
        }
        let bad_length = match b.shape {
            BindingShape::Circle { circumference: l } | BindingShape::Segment { length: l } => !(l > 0.0 && l.is_finite()),
            BindingShape::Point => false,
        };
        if bad_length {
            report.push(
                IssueKind::ShapeMismatch,
                &[&b.id],
                format!("binding {} must have a positive length", b.id),
            );
        }
    }

    // every page edge: exactly one of binding attachment / outer tag
    let mut edge_uses: HashMap<(&str, Edge), usize> = HashMap::new();
    for a in &book.adjacencies {
        if book.page(&a.page).is_none() {
            report.push(
                IssueKind::UnknownReference,
                &[&a.page],
                format!("adjacency references unknown page {}", a.page),
            );
        }
        if book.binding_index(&a.binding).is_none() {
            report.push(
                IssueKind::UnknownReference,
                &[&a.binding],
                format!("adjacency references unknown binding {}", a.binding),
            );
        }
        *edge_uses.entry((a.page.as_str(), a.edge)).or_default() += 1;
    }
    for o in &book.outer {
        if book.page(&o.page).is_none() {
            report.push(
                IssueKind::UnknownReference,
                &[&o.page],
                format!("boundary tag references unknown page {}", o.page),
            );
        }
        *edge_uses.entry((o.page.as_str(), o.edge)).or_default() += 1;
    }
    for p in &book.pages {
        for edge in Edge::BOTH {
            match edge_uses.get(&(p.id.as_str(), edge)).copied().unwrap_or(0) {
                0 => report.push(
                    IssueKind::UnclosedEdge,
                    &[&p.id],
                    format!("edge {edge} of page {} is neither attached nor tagged", p.id),
                ),
                1 => {}
                n => report.push(
                    IssueKind::EdgeConflict,
                    &[&p.id],
                    format!("edge {edge} of page {} is used {n} times", p.id),
                ),
            }
            let pole = p.is_pole(edge);
            let tagged_pole = book.outer_tag(&p.id, edge) == Some(OuterTag::Pole);
            if pole && !tagged_pole {
                report.push(
                    IssueKind::PoleMismatch,
                    &[&p.id],
                    format!("edge {edge} of page {} is a coordinate pole and must carry the pole tag", p.id),
                );
            } else if tagged_pole && !pole {
                report.push(
                    IssueKind::PoleMismatch,
                    &[&p.id],
                    format!("edge {edge} of page {} is tagged pole but the metric does not degenerate there", p.id),
                );
            }
        }
    }

    for b in &book.bindings {
        let slots = book.slots(&b.id);
        let k = slots.len();
        if k == 0 {
            report.push(IssueKind::EmptyBinding, &[&b.id], format!("binding {} has no adjacent pages", b.id));
        }
        let layout_ok = slots.iter().enumerate().all(|(i, a)| a.slot == i);
        if !layout_ok {
            let used: Vec<String> = slots.iter().map(|a| a.slot.to_string()).collect();
            report.push(
                IssueKind::SlotLayout,
                &[&b.id],
                format!("slots of binding {} must be 0..{k} each used once, got [{}]", b.id, used.join(", ")),
            );
        }

        let mut rect_sides = BTreeSet::new();
        for a in &slots {
            let Some(page) = book.page(&a.page) else { continue };
            let compatible = match b.shape {
                BindingShape::Circle { .. } => page.is_rotational(),
                BindingShape::Segment { .. } => page.is_rectangle(),
                BindingShape::Point => page.is_interval(),
            };
            if !compatible {
                report.push(
                    IssueKind::ShapeMismatch,
                    &[&b.id, &page.id],
                    format!("page {} cannot attach to binding {} of shape {:?}", page.id, b.id, b.shape),
                );
                continue;
            }
            if let crate::pages::ChartKind::FlatRectangle { sides, .. } = page.kind {
                rect_sides.insert(format!("{sides:?}"));
            }
            match (boundary_circumference(page, a.edge), b.shape.measure()) {
                (BoundaryMeasure::Length(lp), BoundaryMeasure::Length(lb)) if !lengths_match(lp, lb) => {
                    report.push(
                        IssueKind::CircumferenceMismatch,
                        &[&b.id, &page.id],
                        format!(
                            "circumference mismatch at binding {}: page {} edge {} has {lp}, binding has {lb}",
                            b.id, page.id, a.edge
                        ),
                    );
                }
                _ => {}
            }
        }
        if rect_sides.len() > 1 {
            report.push(
                IssueKind::SideMismatch,
                &[&b.id],
                format!("rectangles sharing binding {} have different side conditions", b.id),
            );
        }

        match book.conditions.get(&b.id) {
            None => report.push(
                IssueKind::MissingCondition,
                &[&b.id],
                format!("binding {} has no junction condition", b.id),
            ),
            Some(pair) => {
                if pair.size() != k {
                    report.push(
                        IssueKind::ConditionSizeMismatch,
                        &[&b.id],
                        format!(
                            "condition size mismatch at binding {}: degree {k}, matrices {}x{}",
                            b.id,
                            pair.size(),
                            pair.size()
                        ),
                    );
                }
                if !pair.samples().iter().all(|s| s.is_finite()) {
                    report.push(
                        IssueKind::NonFiniteCondition,
                        &[&b.id],
                        format!("condition at binding {} has non-finite entries", b.id),
                    );
                }
            }
        }
    }
    for id in book.conditions.keys() {
        if book.binding_index(id).is_none() {
            report.push(
                IssueKind::UnknownReference,
                &[id],
                format!("condition given for unknown binding {id}"),
            );
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{named_condition, NamedCondition};
    use crate::pages::ChartKind;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn cap(id: &str, radius: f64) -> PageChart {
        PageChart::new(
            id,
            ChartKind::SphericalCap {
                radius,
                theta: [0.0, FRAC_PI_2],
            },
        )
    }

    fn two_caps(r2: f64) -> OpenBookComplex {
        let mut conditions = BTreeMap::new();
        conditions.insert("eq".to_string(), named_condition(&NamedCondition::Kirchhoff, 2).unwrap());
        OpenBookComplex {
            pages: vec![cap("north", 1.0), cap("south", r2)],
            bindings: vec![Binding {
                id: "eq".into(),
                shape: BindingShape::Circle {
                    circumference: 2.0 * PI,
                },
            }],
            adjacencies: ["north", "south"]
                .iter()
                .enumerate()
                .map(|(slot, p)| Adjacency {
                    page: p.to_string(),
                    edge: Edge::End,
                    binding: "eq".into(),
                    slot,
                    orientation: Orientation::Aligned,
                })
                .collect(),
            outer: ["north", "south"]
                .iter()
                .map(|p| OuterBoundary {
                    page: p.to_string(),
                    edge: Edge::Start,
                    tag: OuterTag::Pole,
                })
                .collect(),
            conditions,
        }
    }

    #[test]
    fn well_formed_sphere() {
        let book = two_caps(1.0);
        let r = validate_complex(&book);
        assert!(r.is_empty(), "{:?}", r.issues);
        assert_eq!(binding_degree(&book, "eq"), Ok(2));
    }

    #[test]
    fn circumference_mismatch() {
        let r = validate_complex(&two_caps(0.9));
        assert_eq!(r.issues.len(), 1);
        assert_eq!(r.issues[0].kind, IssueKind::CircumferenceMismatch);
        assert!(r.issues[0].message.starts_with("circumference mismatch at binding eq"));
    }

    #[test]
    fn condition_size_mismatch() {
        let mut book = two_caps(1.0);
        book.pages.push(cap("third", 1.0));
        book.adjacencies.push(Adjacency {
            page: "third".into(),
            edge: Edge::End,
            binding: "eq".into(),
            slot: 2,
            orientation: Orientation::Aligned,
        });
        book.outer.push(OuterBoundary {
            page: "third".into(),
            edge: Edge::Start,
            tag: OuterTag::Pole,
        });
        let r = validate_complex(&book);
        assert!(r.has(IssueKind::ConditionSizeMismatch));
        assert!(r.issues.iter().any(|i| i.message.contains("condition size mismatch")));
        assert_eq!(binding_degree(&book, "eq"), Ok(3));
    }

    #[test]
    fn unknown_binding_degree() {
        assert_eq!(
            binding_degree(&two_caps(1.0), "nope"),
            Err(ComplexError::UnknownBinding("nope".into()))
        );
    }

    #[test]
    fn page_attached_twice_to_one_binding() {
        // a cylinder closed into a torus-like loop through one binding
        let mut conditions = BTreeMap::new();
        conditions.insert("loop".to_string(), named_condition(&NamedCondition::Kirchhoff, 2).unwrap());
        let book = OpenBookComplex {
            pages: vec![PageChart::new("c", ChartKind::Cylinder { radius: 1.0, length: 2.0 })],
            bindings: vec![Binding {
                id: "loop".into(),
                shape: BindingShape::Circle {
                    circumference: 2.0 * PI,
                },
            }],
            adjacencies: Edge::BOTH
                .iter()
                .enumerate()
                .map(|(slot, &edge)| Adjacency {
                    page: "c".into(),
                    edge,
                    binding: "loop".into(),
                    slot,
                    orientation: Orientation::Aligned,
                })
                .collect(),
            outer: vec![],
            conditions,
        };
        assert!(validate_complex(&book).is_empty());
        assert_eq!(binding_degree(&book, "loop"), Ok(2));
    }

    #[test]
    fn structural_errors_are_collected() {
        let mut book = two_caps(1.0);
        book.outer.clear();
        book.adjacencies[1].slot = 5;
        book.conditions.insert("ghost".into(), named_condition(&NamedCondition::Neumann, 1).unwrap());
        let r = validate_complex(&book);
        assert!(r.has(IssueKind::UnclosedEdge));
        assert!(r.has(IssueKind::PoleMismatch));
        assert!(r.has(IssueKind::SlotLayout));
        assert!(r.has(IssueKind::UnknownReference));
        // idempotent, side-effect free
        assert_eq!(validate_complex(&book), r);
    }

    #[test]
    fn shape_mismatch_between_interval_and_circle() {
        let mut book = two_caps(1.0);
        book.bindings[0].shape = BindingShape::Point;
        assert!(validate_complex(&book).has(IssueKind::ShapeMismatch));
    }
}
