//! Shadow tree construction and queries.
//!
//! A shadow tree is the metric tree behind the folded shape: landmark
//! extremities become leaves, declared junctions become internal nodes, and
//! every edge carries the Euclidean distance between its endpoint positions.
//! The tree topology is data, not code — see [`TreeTopology`] and the
//! `face37` default shipped with the crate.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landmarks::{NormalizedFrame, Region};

/// Which rectangle side a region's leaves are intended for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Top,
    Right,
    Bottom,
    Left,
}

impl Side {
    pub const ORDER: [Side; 4] = [Side::Top, Side::Right, Side::Bottom, Side::Left];
}

/// A link entry in a topology node's ordered neighbor list: either a leaf
/// landmark id or the name of another internal node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LinkRef {
    Leaf(u32),
    Node(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InternalSpec {
    pub name: String,
    /// Landmark ids whose centroid positions this node.
    pub anchors: Vec<u32>,
    /// Full ordered neighbor list; the cyclic order drives the leaf cycle.
    pub links: Vec<LinkRef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub id: u32,
    pub region: Region,
    pub pos: [f64; 2],
}

/// Declarative tree topology: internal nodes, their ordered adjacency, and
/// optional face metadata (side map, mirror symmetry, canonical layout).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeTopology {
    pub id: String,
    pub root: String,
    pub internals: Vec<InternalSpec>,
    #[serde(default)]
    pub sides: Option<BTreeMap<Region, Side>>,
    #[serde(default)]
    pub symmetry: Vec<(u32, u32)>,
    #[serde(default)]
    pub layout: Vec<LayoutEntry>,
}

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("malformed topology JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("topology has no internal nodes")]
    Empty,
    #[error("unknown internal node name {0:?}")]
    UnknownNode(String),
    #[error("root {0:?} is not a declared internal node")]
    BadRoot(String),
    #[error("internal link {a:?} -> {b:?} is not declared symmetrically")]
    AsymmetricLink { a: String, b: String },
    #[error("leaf landmark {0} attached to more than one internal node")]
    LeafReattached(u32),
    #[error("topology references landmark id {0} missing from the frame")]
    MissingId(u32),
    #[error("internal node {0:?} lists no anchor landmarks")]
    NoAnchors(String),
    #[error("resulting graph is not a tree (nodes {nodes}, edges {edges})")]
    NotATree { nodes: usize, edges: usize },
    #[error("unknown node id {0}")]
    UnknownNodeId(usize),
}

pub const DEFAULT_TOPOLOGY_JSON: &str = include_str!("../data/face37.json");

impl TreeTopology {
    pub fn from_json(bytes: &[u8]) -> Result<Self, TreeError> {
        let topo: TreeTopology = serde_json::from_slice(bytes)?;
        topo.validate()?;
        Ok(topo)
    }

    /// The default symmetric 37-leaf face topology.
    pub fn face37() -> Self {
        Self::from_json(DEFAULT_TOPOLOGY_JSON.as_bytes())
            .expect("bundled face37 topology is valid")
    }

    fn validate(&self) -> Result<(), TreeError> {
        if self.internals.is_empty() {
            return Err(TreeError::Empty);
        }
        let names: BTreeMap<&str, usize> = self
            .internals
            .iter()
            .enumerate()
            .map(|(i, n)| (n.name.as_str(), i))
            .collect();
        if !names.contains_key(self.root.as_str()) {
            return Err(TreeError::BadRoot(self.root.clone()));
        }
        let mut leaf_seen = BTreeSet::new();
        for spec in &self.internals {
            if spec.anchors.is_empty() {
                return Err(TreeError::NoAnchors(spec.name.clone()));
            }
            for link in &spec.links {
                match link {
                    LinkRef::Leaf(id) => {
                        if !leaf_seen.insert(*id) {
                            return Err(TreeError::LeafReattached(*id));
                        }
                    }
                    LinkRef::Node(other) => {
                        let oi = *names
                            .get(other.as_str())
                            .ok_or_else(|| TreeError::UnknownNode(other.clone()))?;
                        let back = self.internals[oi]
                            .links
                            .iter()
                            .any(|l| matches!(l, LinkRef::Node(n) if n == &spec.name));
                        if !back {
                            return Err(TreeError::AsymmetricLink {
                                a: spec.name.clone(),
                                b: other.clone(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Leaf landmark ids in declaration order.
    pub fn leaf_ids(&self) -> Vec<u32> {
        let mut out = Vec::new();
        for spec in &self.internals {
            for link in &spec.links {
                if let LinkRef::Leaf(id) = link {
                    out.push(*id);
                }
            }
        }
        out
    }
}

/// Node handle inside a [`ShadowTree`]: leaves come first (topology
/// declaration order), internal nodes after.
pub type NodeId = usize;

#[derive(Debug, Clone)]
pub struct LeafNode {
    pub landmark_id: u32,
    pub region: Region,
    pub pos: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct InternalNode {
    pub name: String,
    pub pos: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct TreeEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub len: f64,
}

/// The metric tree (T, d) built from a normalized frame and a topology.
///
/// Immutable after construction; all queries are reentrant.
#[derive(Debug, Clone)]
pub struct ShadowTree {
    pub leaves: Vec<LeafNode>,
    pub internals: Vec<InternalNode>,
    pub edges: Vec<TreeEdge>,
    pub topology_id: String,
    pub sides: Option<BTreeMap<Region, Side>>,
    /// Adjacency in declaration order; drives the boundary walk.
    adjacency: Vec<Vec<(NodeId, f64)>>,
    root: NodeId,
}

impl ShadowTree {
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn node_count(&self) -> usize {
        self.leaves.len() + self.internals.len()
    }

    pub fn node_pos(&self, id: NodeId) -> [f64; 3] {
        if id < self.leaves.len() {
            self.leaves[id].pos
        } else {
            self.internals[id - self.leaves.len()].pos
        }
    }

    pub fn total_edge_length(&self) -> f64 {
        self.edges.iter().map(|e| e.len).sum()
    }

    pub fn leaf_index_of_landmark(&self, landmark_id: u32) -> Option<usize> {
        self.leaves.iter().position(|l| l.landmark_id == landmark_id)
    }
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Build the shadow tree for a frame: leaf positions come from the frame,
/// internal positions are the centroids of their anchor landmarks, and every
/// edge length is the Euclidean distance between its endpoints.
pub fn build_shadow_tree(
    frame: &NormalizedFrame,
    topology: &TreeTopology,
) -> Result<ShadowTree, TreeError> {
    topology.validate()?;
    let f = frame.frame();

    let leaf_ids = topology.leaf_ids();
    let p = leaf_ids.len();
    let q = topology.internals.len();

    let mut leaves = Vec::with_capacity(p);
    let mut leaf_index = BTreeMap::new();
    for (i, id) in leaf_ids.iter().enumerate() {
        let lm = f.point(*id).ok_or(TreeError::MissingId(*id))?;
        leaf_index.insert(*id, i);
        leaves.push(LeafNode { landmark_id: *id, region: lm.region, pos: lm.pos });
    }

    let name_index: BTreeMap<&str, usize> = topology
        .internals
        .iter()
        .enumerate()
        .map(|(i, s)| (s.name.as_str(), p + i))
        .collect();

    let mut internals = Vec::with_capacity(q);
    for spec in &topology.internals {
        let mut centroid = [0.0; 3];
        for id in &spec.anchors {
            let lm = f.point(*id).ok_or(TreeError::MissingId(*id))?;
            for (c, v) in centroid.iter_mut().zip(lm.pos.iter()) {
                *c += v;
            }
        }
        for c in &mut centroid {
            *c /= spec.anchors.len() as f64;
        }
        internals.push(InternalNode { name: spec.name.clone(), pos: centroid });
    }

    let pos_of = |id: NodeId| -> [f64; 3] {
        if id < p {
            leaves[id].pos
        } else {
            internals[id - p].pos
        }
    };

    let mut adjacency: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); p + q];
    let mut edges = Vec::new();
    let mut seen_pairs = BTreeSet::new();
    for (ii, spec) in topology.internals.iter().enumerate() {
        let this = p + ii;
        for link in &spec.links {
            let other = match link {
                LinkRef::Leaf(id) => leaf_index[id],
                LinkRef::Node(name) => name_index[name.as_str()],
            };
            let len = dist3(pos_of(this), pos_of(other));
            adjacency[this].push((other, len));
            if other < p {
                adjacency[other].push((this, len));
            }
            let key = (this.min(other), this.max(other));
            if seen_pairs.insert(key) {
                edges.push(TreeEdge { a: key.0, b: key.1, len });
            }
        }
    }

    if edges.len() != p + q - 1 {
        return Err(TreeError::NotATree { nodes: p + q, edges: edges.len() });
    }
    // Connectivity: walk from the root over adjacency.
    let root = name_index[topology.root.as_str()];
    let mut visited = vec![false; p + q];
    let mut stack = vec![root];
    visited[root] = true;
    let mut count = 0;
    while let Some(v) = stack.pop() {
        count += 1;
        for &(w, _) in &adjacency[v] {
            if !visited[w] {
                visited[w] = true;
                stack.push(w);
            }
        }
    }
    if count != p + q {
        return Err(TreeError::NotATree { nodes: p + q, edges: edges.len() });
    }

    Ok(ShadowTree {
        leaves,
        internals,
        edges,
        topology_id: topology.id.clone(),
        sides: topology.sides.clone(),
        adjacency,
        root,
    })
}

/// Path-length metric on the tree: sum of edge lengths along the unique
/// path between two nodes.
pub fn tree_distance(tree: &ShadowTree, a: NodeId, b: NodeId) -> Result<f64, TreeError> {
    let n = tree.node_count();
    if a >= n {
        return Err(TreeError::UnknownNodeId(a));
    }
    if b >= n {
        return Err(TreeError::UnknownNodeId(b));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut dist = vec![f64::NAN; n];
    dist[a] = 0.0;
    let mut stack = vec![a];
    while let Some(v) = stack.pop() {
        if v == b {
            break;
        }
        for &(w, len) in &tree.adjacency[v] {
            if dist[w].is_nan() {
                dist[w] = dist[v] + len;
                stack.push(w);
            }
        }
    }
    Ok(dist[b])
}

/// Distances from `from` to every node, plus the predecessor map.
pub fn distances_from(tree: &ShadowTree, from: NodeId) -> (Vec<f64>, Vec<Option<NodeId>>) {
    let n = tree.node_count();
    let mut dist = vec![f64::NAN; n];
    let mut prev = vec![None; n];
    dist[from] = 0.0;
    let mut stack = vec![from];
    while let Some(v) = stack.pop() {
        for &(w, len) in &tree.adjacency[v] {
            if dist[w].is_nan() {
                dist[w] = dist[v] + len;
                prev[w] = Some(v);
                stack.push(w);
            }
        }
    }
    (dist, prev)
}

/// All-pairs distances between leaves, indexed by leaf index.
pub fn leaf_distance_matrix(tree: &ShadowTree) -> Vec<Vec<f64>> {
    let p = tree.leaf_count();
    let mut m = vec![vec![0.0; p]; p];
    for (i, row) in m.iter_mut().enumerate() {
        let (dist, _) = distances_from(tree, i);
        row.copy_from_slice(&dist[..p]);
    }
    m
}

/// Node ids (leaf and internal) along the path from `a` to `b`, inclusive.
pub fn tree_path(tree: &ShadowTree, a: NodeId, b: NodeId) -> Vec<NodeId> {
    let (_, prev) = distances_from(tree, a);
    let mut path = vec![b];
    let mut cur = b;
    while let Some(p) = prev[cur] {
        path.push(p);
        cur = p;
        if cur == a {
            break;
        }
    }
    path.reverse();
    path
}

/// The doubling-cycle leaf order: boundary walk of the tree under the
/// declared cyclic neighbor order, rotated to start at leaf 0.
///
/// Every leaf appears exactly once and consecutive-pair tree distances sum
/// to twice the total edge length.
pub fn leaf_cycle(tree: &ShadowTree) -> Vec<usize> {
    let p = tree.leaf_count();
    let mut order = Vec::with_capacity(p);
    walk(tree, tree.root, None, &mut order);
    debug_assert_eq!(order.len(), p);
    // Rotation-stable: start the cycle at leaf 0.
    if let Some(start) = order.iter().position(|&l| l == 0) {
        order.rotate_left(start);
    }
    order
}

fn walk(tree: &ShadowTree, node: NodeId, from: Option<NodeId>, out: &mut Vec<usize>) {
    let adj = &tree.adjacency[node];
    let deg = adj.len();
    let start = match from {
        Some(f) => adj.iter().position(|&(w, _)| w == f).map(|i| i + 1).unwrap_or(0),
        None => 0,
    };
    for k in 0..deg {
        let (w, _) = adj[(start + k) % deg];
        if Some(w) == from {
            continue;
        }
        if w < tree.leaf_count() {
            out.push(w);
        } else {
            walk(tree, w, Some(node), out);
        }
    }
}
