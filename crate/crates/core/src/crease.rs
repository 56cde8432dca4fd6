//! Crease-pattern graph: representation, complex node/edge encodings,
//! canonical JSON serialization and SVG rendering.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{bounding_box, interior_crossing_depth, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    BoundaryLeaf,
    Merge,
    SplitIntermediate,
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Boundary,
    Trajectory,
    SplitChord,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CreaseNode {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub kind: NodeKind,
}

impl CreaseNode {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Undirected edge; `a < b` always (normalized at construction).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreaseEdge {
    pub a: u32,
    pub b: u32,
    pub kind: EdgeKind,
}

impl CreaseEdge {
    pub fn new(a: u32, b: u32, kind: EdgeKind) -> Self {
        CreaseEdge { a: a.min(b), b: a.max(b), kind }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<String>,
}

/// The crease pattern: an undirected simple connected graph of fold lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreasePattern {
    pub nodes: Vec<CreaseNode>,
    pub edges: Vec<CreaseEdge>,
    #[serde(default)]
    pub provenance: Provenance,
}

#[derive(Debug, Error)]
pub enum CreaseError {
    #[error("malformed crease JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("pattern has no nodes")]
    Empty,
    #[error("nodes[{index}]: duplicate node id {id}")]
    DuplicateNode { index: usize, id: u32 },
    #[error("nodes[{index}]: non-finite coordinate on node {id}")]
    NonFinite { index: usize, id: u32 },
    #[error("edges[{index}]: unknown node reference ({a}, {b})")]
    UnknownNodeRef { index: usize, a: u32, b: u32 },
    #[error("edges[{index}]: self loop on node {a}")]
    SelfLoop { index: usize, a: u32 },
    #[error("edges[{index}]: duplicate edge ({a}, {b})")]
    DuplicateEdge { index: usize, a: u32, b: u32 },
    #[error("pattern graph is disconnected")]
    Disconnected,
}

impl CreasePattern {
    /// Sort nodes by id and edges lexicographically; the canonical order
    /// serialization relies on.
    pub fn normalize(&mut self) {
        self.nodes.sort_by_key(|n| n.id);
        for e in &mut self.edges {
            *e = CreaseEdge::new(e.a, e.b, e.kind);
        }
        self.edges.sort_by_key(|e| (e.a, e.b));
    }

    pub fn validate(&self) -> Result<(), CreaseError> {
        if self.nodes.is_empty() {
            return Err(CreaseError::Empty);
        }
        let mut ids = BTreeSet::new();
        for (index, n) in self.nodes.iter().enumerate() {
            if !n.x.is_finite() || !n.y.is_finite() {
                return Err(CreaseError::NonFinite { index, id: n.id });
            }
            if !ids.insert(n.id) {
                return Err(CreaseError::DuplicateNode { index, id: n.id });
            }
        }
        let mut seen = BTreeSet::new();
        for (index, e) in self.edges.iter().enumerate() {
            if e.a == e.b {
                return Err(CreaseError::SelfLoop { index, a: e.a });
            }
            if !ids.contains(&e.a) || !ids.contains(&e.b) {
                return Err(CreaseError::UnknownNodeRef { index, a: e.a, b: e.b });
            }
            if !seen.insert((e.a.min(e.b), e.a.max(e.b))) {
                return Err(CreaseError::DuplicateEdge { index, a: e.a, b: e.b });
            }
        }
        if !self.is_connected() {
            return Err(CreaseError::Disconnected);
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        if self.nodes.len() <= 1 {
            return true;
        }
        let index_of: std::collections::BTreeMap<u32, usize> =
            self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            let (a, b) = (index_of[&e.a], index_of[&e.b]);
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut visited = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        visited[0] = true;
        let mut count = 0;
        while let Some(v) = stack.pop() {
            count += 1;
            for &w in &adj[v] {
                if !visited[w] {
                    visited[w] = true;
                    stack.push(w);
                }
            }
        }
        count == self.nodes.len()
    }

    pub fn node(&self, id: u32) -> Option<&CreaseNode> {
        self.nodes.binary_search_by_key(&id, |n| n.id).ok().map(|i| &self.nodes[i])
    }
}

/// Complex view of a pattern: one code per node (x + iy) and per edge
/// (id1 + i id2, id1 < id2). Kinds and provenance ride along so decoding is
/// exact; they are metadata, not part of the codes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEncoding {
    pub node_ids: Vec<u32>,
    pub node_codes: Vec<Complex64>,
    pub node_kinds: Vec<NodeKind>,
    pub edge_codes: Vec<Complex64>,
    pub edge_kinds: Vec<EdgeKind>,
    pub provenance: Provenance,
}

/// Encode a pattern into its complex representation, node-id ascending and
/// edges lexicographic.
pub fn encode_complex(pattern: &CreasePattern) -> ComplexEncoding {
    let mut p = pattern.clone();
    p.normalize();
    ComplexEncoding {
        node_ids: p.nodes.iter().map(|n| n.id).collect(),
        node_codes: p.nodes.iter().map(|n| Complex64::new(n.x, n.y)).collect(),
        node_kinds: p.nodes.iter().map(|n| n.kind).collect(),
        edge_codes: p
            .edges
            .iter()
            .map(|e| Complex64::new(f64::from(e.a), f64::from(e.b)))
            .collect(),
        edge_kinds: p.edges.iter().map(|e| e.kind).collect(),
        provenance: p.provenance,
    }
}

/// Invert [`encode_complex`].
pub fn decode_complex(enc: &ComplexEncoding) -> CreasePattern {
    let nodes = enc
        .node_ids
        .iter()
        .zip(enc.node_codes.iter())
        .zip(enc.node_kinds.iter())
        .map(|((id, c), kind)| CreaseNode { id: *id, x: c.re, y: c.im, kind: *kind })
        .collect();
    let edges = enc
        .edge_codes
        .iter()
        .zip(enc.edge_kinds.iter())
        .map(|(c, kind)| CreaseEdge::new(c.re as u32, c.im as u32, *kind))
        .collect();
    CreasePattern { nodes, edges, provenance: enc.provenance.clone() }
}

/// Canonical JSON bytes: node ids ascending, edges lexicographic, fixed key
/// order. Serializing the same pattern twice is byte-identical.
pub fn serialize(pattern: &CreasePattern) -> Vec<u8> {
    let mut p = pattern.clone();
    p.normalize();
    let mut out = serde_json::to_vec_pretty(&p).expect("crease serialization cannot fail");
    out.push(b'\n');
    out
}

/// Parse and validate canonical crease JSON.
pub fn deserialize(bytes: &[u8]) -> Result<CreasePattern, CreaseError> {
    let mut p: CreasePattern = serde_json::from_slice(bytes)?;
    // Validate before normalizing so diagnostics point at input indices.
    p.validate()?;
    p.normalize();
    Ok(p)
}

/// Style knobs for SVG output; colors are keyed by kind.
#[derive(Debug, Clone)]
pub struct SvgStyle {
    pub boundary_color: String,
    pub trajectory_color: String,
    pub chord_color: String,
    pub node_colors: [String; 4],
    pub stroke_width: f64,
    pub node_radius: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            boundary_color: "#444444".into(),
            trajectory_color: "#d62728".into(),
            chord_color: "#1f77b4".into(),
            node_colors: [
                "#444444".into(), // boundary-leaf
                "#d62728".into(), // merge
                "#1f77b4".into(), // split-intermediate
                "#2ca02c".into(), // terminal
            ],
            stroke_width: 0.006,
            node_radius: 0.008,
        }
    }
}

impl SvgStyle {
    fn edge_color(&self, kind: EdgeKind) -> &str {
        match kind {
            EdgeKind::Boundary => &self.boundary_color,
            EdgeKind::Trajectory => &self.trajectory_color,
            EdgeKind::SplitChord => &self.chord_color,
        }
    }

    fn node_color(&self, kind: NodeKind) -> &str {
        match kind {
            NodeKind::BoundaryLeaf => &self.node_colors[0],
            NodeKind::Merge => &self.node_colors[1],
            NodeKind::SplitIntermediate => &self.node_colors[2],
            NodeKind::Terminal => &self.node_colors[3],
        }
    }
}

/// Render the pattern as SVG 1.1. Edges become line segments colored by
/// kind, nodes become circles; the viewBox is the pattern bounding box
/// padded by 5%. Output is deterministic.
pub fn to_svg(pattern: &CreasePattern, style: &SvgStyle) -> Vec<u8> {
    let mut p = pattern.clone();
    p.normalize();
    let pts: Vec<Vec2> = p.nodes.iter().map(|n| n.pos()).collect();
    let (lo, hi) = bounding_box(&pts);
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-9);
    let pad = 0.05 * span;
    let width = hi.x - lo.x + 2.0 * pad;
    let height = hi.y - lo.y + 2.0 * pad;
    // SVG y grows downward; flip about the box.
    let tx = |x: f64| x - lo.x + pad;
    let ty = |y: f64| hi.y - y + pad;
    let sw = style.stroke_width * span;
    let nr = style.node_radius * span;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="0 0 {width:.6} {height:.6}">"#
    );
    for e in &p.edges {
        let a = p.node(e.a).expect("validated edge");
        let b = p.node(e.b).expect("validated edge");
        let _ = writeln!(
            svg,
            r#"  <line x1="{:.6}" y1="{:.6}" x2="{:.6}" y2="{:.6}" stroke="{}" stroke-width="{:.6}"/>"#,
            tx(a.x),
            ty(a.y),
            tx(b.x),
            ty(b.y),
            style.edge_color(e.kind),
            sw,
        );
    }
    for n in &p.nodes {
        let _ = writeln!(
            svg,
            r#"  <circle cx="{:.6}" cy="{:.6}" r="{:.6}" fill="{}"/>"#,
            tx(n.x),
            ty(n.y),
            nr,
            style.node_color(n.kind),
        );
    }
    svg.push_str("</svg>\n");
    svg.into_bytes()
}

/// Pairs of non-incident edges whose interiors cross deeper than `tol`.
/// Engine output should produce none; violations point at engine bugs.
pub fn planarity_violations(pattern: &CreasePattern, tol: f64) -> Vec<(usize, usize)> {
    let mut p = pattern.clone();
    p.normalize();
    let seg: Vec<(u32, u32, Vec2, Vec2)> = p
        .edges
        .iter()
        .map(|e| {
            let a = p.node(e.a).expect("validated edge");
            let b = p.node(e.b).expect("validated edge");
            (e.a, e.b, a.pos(), b.pos())
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..seg.len() {
        for j in i + 1..seg.len() {
            let (a1, b1, p1, q1) = seg[i];
            let (a2, b2, p2, q2) = seg[j];
            if a1 == a2 || a1 == b2 || b1 == a2 || b1 == b2 {
                continue;
            }
            if interior_crossing_depth(p1, q1, p2, q2) > tol {
                out.push((i, j));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spoke_pattern() -> CreasePattern {
        let mut nodes = vec![CreaseNode { id: 4, x: 0.0, y: 0.0, kind: NodeKind::Terminal }];
        let mut edges = Vec::new();
        for (i, (x, y)) in [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)].iter().enumerate() {
            nodes.push(CreaseNode { id: i as u32, x: *x, y: *y, kind: NodeKind::BoundaryLeaf });
            edges.push(CreaseEdge::new(i as u32, 4, EdgeKind::Trajectory));
        }
        CreasePattern { nodes, edges, provenance: Provenance::default() }
    }

    #[test]
    fn complex_codes_follow_the_definitions() {
        let pattern = CreasePattern {
            nodes: vec![
                CreaseNode { id: 2, x: 3.0, y: 4.0, kind: NodeKind::Merge },
                CreaseNode { id: 7, x: 1.0, y: -1.0, kind: NodeKind::Merge },
            ],
            edges: vec![CreaseEdge::new(7, 2, EdgeKind::Trajectory)],
            provenance: Provenance::default(),
        };
        let enc = encode_complex(&pattern);
        assert_eq!(enc.node_codes[0], Complex64::new(3.0, 4.0));
        assert_eq!(enc.edge_codes[0], Complex64::new(2.0, 7.0));
    }

    #[test]
    fn encode_decode_roundtrip() {
        let pattern = spoke_pattern();
        let mut canonical = pattern.clone();
        canonical.normalize();
        assert_eq!(decode_complex(&encode_complex(&pattern)), canonical);
    }

    #[test]
    fn single_node_pattern_roundtrips() {
        let p = CreasePattern {
            nodes: vec![CreaseNode { id: 0, x: 1.0, y: 2.0, kind: NodeKind::Terminal }],
            edges: vec![],
            provenance: Provenance::default(),
        };
        p.validate().unwrap();
        let back = deserialize(&serialize(&p)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn duplicate_edge_is_named() {
        let mut p = spoke_pattern();
        p.edges.push(CreaseEdge::new(4, 0, EdgeKind::Trajectory));
        let err = p.validate().unwrap_err();
        match err {
            CreaseError::DuplicateEdge { a, b, .. } => {
                assert_eq!((a, b), (0, 4));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn serialization_is_canonical() {
        let p = spoke_pattern();
        let bytes = serialize(&p);
        let again = serialize(&deserialize(&bytes).unwrap());
        assert_eq!(bytes, again);
    }

    #[test]
    fn disconnected_pattern_is_rejected() {
        let mut p = spoke_pattern();
        p.nodes.push(CreaseNode { id: 99, x: 5.0, y: 5.0, kind: NodeKind::Merge });
        assert!(matches!(p.validate(), Err(CreaseError::Disconnected)));
    }

    #[test]
    fn svg_contains_one_line_per_edge() {
        let p = spoke_pattern();
        let svg = String::from_utf8(to_svg(&p, &SvgStyle::default())).unwrap();
        let lines = svg.matches("<line ").count();
        assert_eq!(lines, 4);
        let circles = svg.matches("<circle ").count();
        assert_eq!(circles, p.nodes.len());
        // Determinism.
        assert_eq!(to_svg(&p, &SvgStyle::default()), to_svg(&p, &SvgStyle::default()));
    }

    #[test]
    fn planarity_flags_crossing_edges() {
        let p = spoke_pattern();
        assert!(planarity_violations(&p, 1e-7).is_empty());
        let crossing = CreasePattern {
            nodes: vec![
                CreaseNode { id: 0, x: -1.0, y: 0.0, kind: NodeKind::Merge },
                CreaseNode { id: 1, x: 1.0, y: 0.0, kind: NodeKind::Merge },
                CreaseNode { id: 2, x: 0.0, y: -1.0, kind: NodeKind::Merge },
                CreaseNode { id: 3, x: 0.0, y: 1.0, kind: NodeKind::Merge },
                CreaseNode { id: 4, x: 2.0, y: 0.0, kind: NodeKind::Merge },
            ],
            edges: vec![
                CreaseEdge::new(0, 1, EdgeKind::Trajectory),
                CreaseEdge::new(2, 3, EdgeKind::Trajectory),
                CreaseEdge::new(1, 4, EdgeKind::Trajectory),
                CreaseEdge::new(3, 4, EdgeKind::Trajectory),
                CreaseEdge::new(2, 4, EdgeKind::Trajectory),
            ],
            provenance: Provenance::default(),
        };
        crossing.validate().unwrap();
        let v = planarity_violations(&crossing, 1e-7);
        assert_eq!(v.len(), 1);
    }

    #[test]
    fn svg_viewbox_padding() {
        let p = spoke_pattern();
        let svg = String::from_utf8(to_svg(&p, &SvgStyle::default())).unwrap();
        // Box spans [-1, 1]^2 padded by 5% of the 2.0 span on each side.
        assert!(svg.contains(r#"viewBox="0 0 2.200000 2.200000""#), "{svg}");
        assert_abs_diff_eq!(2.2, 2.0 + 2.0 * 0.05 * 2.0, epsilon = 1e-12);
    }
}
