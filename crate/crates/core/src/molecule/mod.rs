//! The shrinking engine: simultaneous inward edge offset at constant speed,
//! with contraction and splitting events, recursing on sub-polygons until
//! every wavefront collapses. Records the crease pattern as it goes.
//!
//! Stepping scheme: fixed base step with post-step condition checks; when a
//! condition is crossed inside a step the event depth is located by
//! bisection on the inset parameter, every active polygon is replayed to
//! that depth, and the event is applied. Split thresholds use the
//! inset-reduced tree distance (both leaf paths are consumed at unit speed),
//! so a pair splits when its planar distance meets what remains of its tree
//! path.

mod engine;

pub use engine::shrink;

use serde::Serialize;
use thiserror::Error;

use crate::crease::{CreaseEdge, CreaseNode, CreasePattern, EdgeKind, NodeKind, Provenance};
use crate::geometry::{bounding_box, is_convex, signed_area_2x, solve_unit_pair, Vec2};
use crate::lang_polygon::PolygonError;
use crate::shadow_tree::{leaf_distance_matrix, ShadowTree};

/// Shrinking parameters. `None` fields resolve against the polygon at the
/// start of a run: `th` to 1e-6 of the bounding-box diagonal, `step` to
/// perimeter/2000, `max_events` to 8 leaves.
#[derive(Debug, Clone)]
pub struct ShrinkConfig {
    pub th: Option<f64>,
    pub step: Option<f64>,
    pub refine_tol: f64,
    pub max_events: Option<usize>,
}

impl Default for ShrinkConfig {
    fn default() -> Self {
        ShrinkConfig { th: None, step: None, refine_tol: 1e-9, max_events: None }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ResolvedConfig {
    pub th: f64,
    pub step: f64,
    pub refine_tol: f64,
    pub max_events: usize,
}

impl ShrinkConfig {
    pub(crate) fn resolve(
        &self,
        bbox_diag: f64,
        perimeter: f64,
        leaves: usize,
    ) -> Result<ResolvedConfig, ShrinkError> {
        let th = self.th.unwrap_or(1e-6 * bbox_diag);
        let step = self.step.unwrap_or(perimeter / 2000.0);
        let max_events = self.max_events.unwrap_or(8 * leaves);
        if !(th > 0.0) || !(step > 0.0) || !(self.refine_tol > 0.0) {
            return Err(ShrinkError::BadConfig("th, step and refine_tol must be positive".into()));
        }
        if self.refine_tol >= th {
            return Err(ShrinkError::BadConfig("refine_tol must be below th".into()));
        }
        Ok(ResolvedConfig { th, step, refine_tol: self.refine_tol, max_events })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Contraction,
    Split,
    Terminal,
}

/// One entry of the shrink event log.
#[derive(Debug, Clone, Serialize)]
pub struct ShrinkEvent {
    pub kind: EventKind,
    pub depth: f64,
    pub polygon: usize,
    pub vertices: Vec<usize>,
    /// Landmark ids of the leaves involved.
    pub leaves: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_leaf_pair: Option<(u32, u32)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_path: Option<Vec<String>>,
}

/// Event log as JSON lines, one event per line.
pub fn events_to_jsonl(events: &[ShrinkEvent]) -> Vec<u8> {
    let mut out = Vec::new();
    for e in events {
        out.extend_from_slice(&serde_json::to_vec(e).expect("event serialization cannot fail"));
        out.push(b'\n');
    }
    out
}

#[derive(Debug, Error)]
pub enum ShrinkError {
    #[error("bad shrink config: {0}")]
    BadConfig(String),
    #[error("polygon violates the Lang condition on {0} pairs; cannot shrink")]
    InvalidPolygon(usize),
    #[error(transparent)]
    Polygon(#[from] PolygonError),
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("offset step inverts an edge at inset depth {depth}")]
    StepInversion { depth: f64 },
    #[error("wavefront lost convexity beyond tolerance at inset depth {depth}")]
    ConvexityLoss { depth: f64 },
    #[error("non-finite wavefront geometry at inset depth {depth}")]
    Degenerate { depth: f64 },
    #[error("event budget {max} exceeded at inset depth {depth} ({got} events logged)")]
    EventBudget { max: usize, got: usize, depth: f64, log: Vec<ShrinkEvent> },
    #[error("event is stale: vertices no longer satisfy its condition")]
    StaleEvent,
    #[error("split endpoints are adjacent")]
    SplitEndpointsAdjacent,
}

/// One wavefront vertex: current position, straight-line velocity until the
/// next event, the merged-leaf set it stands for, and the crease node of its
/// last recorded event point.
#[derive(Debug, Clone)]
pub struct WfVertex {
    pub pos: Vec2,
    pub vel: Vec2,
    /// Leaf indices into the shadow tree, sorted.
    pub leaves: Vec<usize>,
    pub last_node: u32,
}

/// A convex polygon being shrunk. Edge `i` runs from vertex `i` to vertex
/// `i+1` (cyclic); between events every vertex moves along `vel`.
#[derive(Debug, Clone)]
pub struct ActivePolygon {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: f64,
    orient: f64,
    verts: Vec<WfVertex>,
    normals: Vec<Vec2>,
}

impl ActivePolygon {
    pub(crate) fn new(
        id: usize,
        parent: Option<usize>,
        depth: f64,
        verts: Vec<WfVertex>,
        orient: f64,
    ) -> Self {
        let mut p = ActivePolygon { id, parent, depth, orient, verts, normals: Vec::new() };
        p.rebuild_kinematics();
        p
    }

    /// Geometry-only constructor for tests and probes: leaf `i` at vertex
    /// `i`, crease node `i`.
    pub fn from_positions(id: usize, positions: &[Vec2]) -> Self {
        let orient = if signed_area_2x(positions) >= 0.0 { 1.0 } else { -1.0 };
        let verts = positions
            .iter()
            .enumerate()
            .map(|(i, &pos)| WfVertex { pos, vel: Vec2::ZERO, leaves: vec![i], last_node: i as u32 })
            .collect();
        ActivePolygon::new(id, None, 0.0, verts, orient)
    }

    pub fn vertex_count(&self) -> usize {
        self.verts.len()
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.verts.iter().map(|v| v.pos).collect()
    }

    pub fn vertices(&self) -> &[WfVertex] {
        &self.verts
    }

    #[cfg(test)]
    pub(crate) fn verts_mut(&mut self) -> &mut Vec<WfVertex> {
        &mut self.verts
    }

    pub(crate) fn orient(&self) -> f64 {
        self.orient
    }

    /// Positions after advancing by `u` without committing.
    pub(crate) fn positions_at(&self, u: f64) -> Vec<Vec2> {
        self.verts.iter().map(|v| v.pos + v.vel * u).collect()
    }

    /// Unit inward normal of edge `i`.
    pub fn edge_normal(&self, i: usize) -> Vec2 {
        self.normals[i]
    }

    /// Unit tangent of edge `i`, pointing from vertex `i` to vertex `i+1`.
    pub fn edge_tangent(&self, i: usize) -> Vec2 {
        -self.normals[i].perp() * self.orient
    }

    /// Length of edge `i` signed along its tangent; goes negative when the
    /// edge inverts.
    pub fn signed_edge_length(&self, i: usize) -> f64 {
        let n = self.verts.len();
        (self.verts[(i + 1) % n].pos - self.verts[i].pos).dot(self.edge_tangent(i))
    }

    /// Rate of change of the signed edge length per unit inset depth.
    pub(crate) fn edge_closing_rate(&self, i: usize) -> f64 {
        let n = self.verts.len();
        (self.verts[(i + 1) % n].vel - self.verts[i].vel).dot(self.edge_tangent(i))
    }

    /// Recompute edge normals and vertex velocities from current positions.
    /// Called after every event; between events both are constant.
    pub(crate) fn rebuild_kinematics(&mut self) {
        let n = self.verts.len();
        self.normals.clear();
        for i in 0..n {
            let a = self.verts[i].pos;
            let b = self.verts[(i + 1) % n].pos;
            let d = b - a;
            let len = d.norm();
            let dir = if len > 0.0 { Vec2::new(d.x / len, d.y / len) } else { Vec2::new(1.0, 0.0) };
            self.normals.push(dir.perp() * self.orient);
        }
        for i in 0..n {
            let n_prev = self.normals[(i + n - 1) % n];
            let n_next = self.normals[i];
            self.verts[i].vel = vertex_velocity(n_prev, n_next);
        }
    }

    pub(crate) fn advance(&mut self, dt: f64) {
        for v in &mut self.verts {
            v.pos = v.pos + v.vel * dt;
        }
        self.depth += dt;
    }

    pub(crate) fn diameter(&self) -> f64 {
        let pts = self.positions();
        let (lo, hi) = bounding_box(&pts);
        (hi - lo).norm()
    }

    /// Landmark ids for a vertex's merged-leaf set.
    pub fn vertex_leaf_ids(&self, tree: &ShadowTree, i: usize) -> Vec<u32> {
        self.verts[i].leaves.iter().map(|&l| tree.leaves[l].landmark_id).collect()
    }
}

/// Velocity of the vertex between two edges with the given unit inward
/// normals, both lines moving inward at unit speed. Collinear edges move
/// the vertex straight along the shared normal.
fn vertex_velocity(n_prev: Vec2, n_next: Vec2) -> Vec2 {
    match solve_unit_pair(n_prev, n_next, 1e-9) {
        Some(v) => v,
        None => {
            if n_prev.dot(n_next) >= 0.0 {
                let s = n_prev + n_next;
                let norm = s.norm();
                if norm > 0.0 {
                    Vec2::new(s.x / norm, s.y / norm)
                } else {
                    n_prev
                }
            } else {
                // Antiparallel normals: degenerate slit; convexity
                // validation rejects the state downstream.
                n_prev
            }
        }
    }
}

/// Inward offset of every edge line by `delta`, vertices following their
/// adjacent line intersections. Fails when the offset overshoots a collapse
/// (some edge inverts).
pub fn offset_step(active: &ActivePolygon, delta: f64) -> Result<ActivePolygon, ShrinkError> {
    if !(delta > 0.0) {
        return Err(ShrinkError::BadConfig("offset delta must be positive".into()));
    }
    let mut out = active.clone();
    out.advance(delta);
    let scale = out.diameter().max(f64::MIN_POSITIVE);
    for i in 0..out.vertex_count() {
        if !out.verts[i].pos.x.is_finite() || !out.verts[i].pos.y.is_finite() {
            return Err(ShrinkError::Degenerate { depth: out.depth });
        }
        if out.signed_edge_length(i) < -1e-9 * scale {
            return Err(ShrinkError::StepInversion { depth: out.depth });
        }
    }
    if !is_convex(&out.positions(), 1e-7 * scale * scale) {
        return Err(ShrinkError::ConvexityLoss { depth: out.depth });
    }
    Ok(out)
}

/// A consecutive vertex pair within collision tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionPair {
    pub i: usize,
    pub j: usize,
    pub dist: f64,
}

/// All consecutive pairs whose planar distance is at most `th`.
pub fn detect_contraction(active: &ActivePolygon, th: f64) -> Vec<ContractionPair> {
    let n = active.verts.len();
    let mut out = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        let dist = active.verts[i].pos.dist(active.verts[j].pos);
        if dist <= th {
            out.push(ContractionPair { i, j, dist });
        }
    }
    out
}

/// A non-adjacent vertex pair whose planar distance has met the remaining
/// tree distance of its representative leaves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub i: usize,
    pub k: usize,
    /// Representative leaf indices (the cross-set pair minimizing tree
    /// distance), aligned with vertices `i` and `k`.
    pub leaf_i: usize,
    pub leaf_k: usize,
    pub planar: f64,
    /// Remaining tree distance at the polygon's inset depth.
    pub remaining: f64,
}

/// Minimal-tree-distance representative pair between two merged-leaf sets.
pub(crate) fn representative_pair(
    dm: &[Vec<f64>],
    a: &[usize],
    b: &[usize],
) -> (usize, usize, f64) {
    let mut best = (a[0], b[0], f64::INFINITY);
    for &la in a {
        for &lb in b {
            let d = dm[la][lb];
            if d < best.2 {
                best = (la, lb, d);
            }
        }
    }
    best
}

pub(crate) fn split_candidates(
    active: &ActivePolygon,
    dm: &[Vec<f64>],
    th: f64,
) -> Vec<SplitCandidate> {
    let n = active.verts.len();
    let mut out = Vec::new();
    if n < 4 {
        return out;
    }
    for i in 0..n {
        for k in i + 2..n {
            // Cyclic separation >= 2 in both directions: adjacent pairs are
            // contraction's domain.
            if i == 0 && k == n - 1 {
                continue;
            }
            let (leaf_i, leaf_k, tree_d) =
                representative_pair(dm, &active.verts[i].leaves, &active.verts[k].leaves);
            let remaining = tree_d - 2.0 * active.depth;
            // Degenerate-split guard: once the remaining path is of the
            // order of the collision tolerance, the chord is microscopic
            // and the pair belongs to the contraction cascade instead.
            if remaining <= 4.0 * th {
                continue;
            }
            let planar = active.verts[i].pos.dist(active.verts[k].pos);
            if planar <= remaining + th {
                out.push(SplitCandidate { i, k, leaf_i, leaf_k, planar, remaining });
            }
        }
    }
    out
}

/// All split events currently satisfied on the polygon.
pub fn detect_split(active: &ActivePolygon, tree: &ShadowTree, th: f64) -> Vec<SplitCandidate> {
    let dm = leaf_distance_matrix(tree);
    split_candidates(active, &dm, th)
}

/// Records crease nodes and edges while the wavefront evolves.
#[derive(Debug, Clone, Default)]
pub struct CreaseRecorder {
    nodes: Vec<CreaseNode>,
    edges: Vec<CreaseEdge>,
    seen: std::collections::BTreeSet<(u32, u32)>,
}

impl CreaseRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, pos: Vec2, kind: NodeKind) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(CreaseNode { id, x: pos.x, y: pos.y, kind });
        id
    }

    pub fn add_edge(&mut self, a: u32, b: u32, kind: EdgeKind) {
        if a == b {
            return;
        }
        let key = (a.min(b), a.max(b));
        if self.seen.insert(key) {
            self.edges.push(CreaseEdge::new(a, b, kind));
        }
    }

    pub fn node_pos(&self, id: u32) -> Vec2 {
        self.nodes[id as usize].pos()
    }

    /// Crease node for a vertex event at `pos`: reuses the vertex's last
    /// node when the position has not moved, otherwise adds a node plus the
    /// trajectory edge from the last node.
    pub fn event_node(&mut self, vertex: &WfVertex, pos: Vec2, kind: NodeKind, eps: f64) -> u32 {
        if self.node_pos(vertex.last_node).dist(pos) <= eps {
            return vertex.last_node;
        }
        let id = self.add_node(pos, kind);
        self.add_edge(vertex.last_node, id, EdgeKind::Trajectory);
        id
    }

    pub fn into_pattern(self, provenance: Provenance) -> CreasePattern {
        let mut pattern = CreasePattern { nodes: self.nodes, edges: self.edges, provenance };
        pattern.normalize();
        pattern
    }
}

/// Merge a contraction pair at its midpoint: one vertex survives with the
/// union of merged-leaf sets, both trajectories attach to the new crease
/// node, and the vertex count drops by exactly one.
pub fn apply_contraction(
    active: &ActivePolygon,
    pair: &ContractionPair,
    th: f64,
    recorder: &mut CreaseRecorder,
) -> Result<ActivePolygon, ShrinkError> {
    let n = active.verts.len();
    let (i, j) = (pair.i, pair.j);
    if j != (i + 1) % n {
        return Err(ShrinkError::StaleEvent);
    }
    let a = &active.verts[i];
    let b = &active.verts[j];
    if a.pos.dist(b.pos) > th * (1.0 + 1e-9) + 1e3 * f64::EPSILON {
        return Err(ShrinkError::StaleEvent);
    }
    let mid = a.pos.lerp(b.pos, 0.5);
    let eps = merge_eps(active);
    let node = recorder.event_node(a, mid, NodeKind::Merge, eps);
    if b.last_node != node {
        let node_b = recorder.event_node(b, mid, NodeKind::Merge, eps);
        if node_b != node {
            recorder.add_edge(node_b, node, EdgeKind::Trajectory);
        }
    }
    let mut leaves: Vec<usize> = a.leaves.iter().chain(b.leaves.iter()).copied().collect();
    leaves.sort_unstable();
    leaves.dedup();
    let merged = WfVertex { pos: mid, vel: Vec2::ZERO, leaves, last_node: node };

    let mut verts = Vec::with_capacity(n - 1);
    for (idx, v) in active.verts.iter().enumerate() {
        if idx == i {
            verts.push(merged.clone());
        } else if idx == j {
            continue;
        } else {
            verts.push(v.clone());
        }
    }
    Ok(ActivePolygon::new(active.id, active.parent, active.depth, verts, active.orient))
}

fn merge_eps(active: &ActivePolygon) -> f64 {
    1e-9 * active.diameter().max(1e-12)
}

/// Split the polygon along the chord between two non-adjacent vertices.
/// The intermediate tree nodes of the representative leaf path land on the
/// chord at fractions of cumulative path length; both sub-polygons keep the
/// endpoint vertices and continue at the same inset depth.
pub fn apply_split(
    active: &ActivePolygon,
    ev: &SplitCandidate,
    tree: &ShadowTree,
    child_ids: (usize, usize),
    recorder: &mut CreaseRecorder,
) -> Result<(ActivePolygon, ActivePolygon), ShrinkError> {
    let n = active.verts.len();
    let (i, k) = (ev.i, ev.k);
    if k <= i + 1 || (i == 0 && k == n - 1) {
        return Err(ShrinkError::SplitEndpointsAdjacent);
    }
    let vi = &active.verts[i];
    let vk = &active.verts[k];

    let eps = merge_eps(active);
    let node_i = recorder.event_node(vi, vi.pos, NodeKind::Merge, eps);
    let node_k = recorder.event_node(vk, vk.pos, NodeKind::Merge, eps);

    // Chord subdivision by the intermediate tree nodes of the path between
    // the representative leaves, proportional to cumulative path length.
    let path = crate::shadow_tree::tree_path(tree, ev.leaf_i, ev.leaf_k);
    let total: f64 = {
        let mut acc = 0.0;
        for w in path.windows(2) {
            let a = tree.node_pos(w[0]);
            let b = tree.node_pos(w[1]);
            acc += dist3(a, b);
        }
        acc
    };
    let mut chord_nodes = vec![node_i];
    let mut cum = 0.0;
    let p = tree.leaf_count();
    for w in path.windows(2) {
        cum += dist3(tree.node_pos(w[0]), tree.node_pos(w[1]));
        let node = w[1];
        if node == *path.last().expect("non-empty path") {
            break;
        }
        debug_assert!(node >= p, "interior path nodes are internal");
        let frac = if total > 0.0 { cum / total } else { 0.5 };
        let pos = vi.pos.lerp(vk.pos, frac);
        chord_nodes.push(recorder.add_node(pos, NodeKind::SplitIntermediate));
    }
    chord_nodes.push(node_k);
    for w in chord_nodes.windows(2) {
        recorder.add_edge(w[0], w[1], EdgeKind::SplitChord);
    }

    let mut vi2 = vi.clone();
    vi2.last_node = node_i;
    let mut vk2 = vk.clone();
    vk2.last_node = node_k;

    // Child A: i..=k; child B: k..=n plus 0..=i (endpoints in both).
    let mut a_verts = Vec::with_capacity(k - i + 1);
    a_verts.push(vi2.clone());
    a_verts.extend(active.verts[i + 1..k].iter().cloned());
    a_verts.push(vk2.clone());

    let mut b_verts = Vec::with_capacity(n - (k - i) + 1);
    b_verts.push(vk2);
    b_verts.extend(active.verts[k + 1..].iter().cloned());
    b_verts.extend(active.verts[..i].iter().cloned());
    b_verts.push(vi2);

    let a = ActivePolygon::new(child_ids.0, Some(active.id), active.depth, a_verts, active.orient);
    let b = ActivePolygon::new(child_ids.1, Some(active.id), active.depth, b_verts, active.orient);
    Ok((a, b))
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Names of the internal nodes strictly inside the path between two leaves.
pub(crate) fn path_internal_names(tree: &ShadowTree, leaf_a: usize, leaf_b: usize) -> Vec<String> {
    let p = tree.leaf_count();
    crate::shadow_tree::tree_path(tree, leaf_a, leaf_b)
        .into_iter()
        .filter(|&id| id >= p)
        .map(|id| tree.internals[id - p].name.clone())
        .collect()
}
