//! Shared test support: random shadow trees and an independent brute-force
//! shrinking simulator used as the event oracle.
//!
//! The oracle advances with tiny fixed substeps and recomputes vertex
//! positions from explicit edge-line offsets, so it shares no stepping or
//! kinematics code with the engine it checks.

#![allow(dead_code)]

use facefold::geometry::{intersect_lines, signed_area_2x, Vec2};
use facefold::landmarks::{normalize_to_nose, Landmark, LandmarkFrame, NormalizedFrame, Region};
use facefold::lang_polygon::LangPolygon;
use facefold::molecule::EventKind;
use facefold::shadow_tree::{
    build_shadow_tree, leaf_distance_matrix, ShadowTree, TreeTopology,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random metric tree: `p` leaves hung off a random internal skeleton, leaf
/// positions uniform in a box. Returns the topology plus a frame to build
/// it from.
pub fn random_tree_inputs(
    rng: &mut ChaCha8Rng,
    min_leaves: usize,
    max_leaves: usize,
) -> (TreeTopology, NormalizedFrame) {
    let p = rng.gen_range(min_leaves..=max_leaves);
    let q = rng.gen_range(1..=((p / 2).clamp(1, 4)));

    // Leaf ownership: every internal gets at least one leaf when possible.
    let mut owner = vec![0usize; p];
    for (leaf, o) in owner.iter_mut().enumerate() {
        *o = if leaf < q { leaf } else { rng.gen_range(0..q) };
    }

    let mut internals = Vec::new();
    for b in 0..q {
        let mut links = Vec::new();
        if b > 0 {
            let parent = rng.gen_range(0..b);
            links.push(serde_json::json!(format!("b{parent}")));
        }
        for child in b + 1..q {
            // Re-derive the child's parent deterministically is not
            // possible here, so record children in a second pass below.
            let _ = child;
        }
        let leaves: Vec<usize> = (0..p).filter(|&l| owner[l] == b).collect();
        let anchors: Vec<u32> =
            if leaves.is_empty() { vec![0] } else { leaves.iter().map(|&l| l as u32).collect() };
        internals.push((format!("b{b}"), anchors, links, leaves));
    }
    // Second pass: make internal links symmetric (children lists).
    let parents: Vec<Option<String>> = internals
        .iter()
        .map(|(_, _, links, _)| {
            links.first().and_then(|v| v.as_str()).map(|s| s.to_string())
        })
        .collect();
    for b in 0..q {
        let name = format!("b{b}");
        let children: Vec<String> = (0..q)
            .filter(|&c| parents[c].as_deref() == Some(name.as_str()))
            .map(|c| format!("b{c}"))
            .collect();
        for child in children {
            internals[b].2.push(serde_json::json!(child));
        }
        let leaves = internals[b].3.clone();
        for l in leaves {
            internals[b].2.push(serde_json::json!(l as u32));
        }
    }

    let spec = serde_json::json!({
        "id": format!("random-{p}-{q}"),
        "root": "b0",
        "internals": internals
            .iter()
            .map(|(name, anchors, links, _)| serde_json::json!({
                "name": name,
                "anchors": anchors,
                "links": links,
            }))
            .collect::<Vec<_>>(),
    });
    let topology = TreeTopology::from_json(spec.to_string().as_bytes()).expect("valid topology");

    let mut points: Vec<Landmark> = (0..p)
        .map(|l| Landmark {
            id: l as u32,
            region: Region::Mouth,
            pos: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0],
        })
        .collect();
    points.push(Landmark {
        id: p as u32,
        region: Region::Nose,
        pos: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0],
    });
    points.sort_by_key(|q| q.id);
    let frame = normalize_to_nose(&LandmarkFrame { frame_index: 0, dim: 2, points })
        .expect("nose present");
    (topology, frame)
}

pub fn random_tree(rng: &mut ChaCha8Rng, min_leaves: usize, max_leaves: usize) -> ShadowTree {
    let (topology, frame) = random_tree_inputs(rng, min_leaves, max_leaves);
    build_shadow_tree(&frame, &topology).expect("buildable tree")
}

/// Equal-edge star tree over `p` leaves placed as a regular polygon.
pub fn star_tree(p: usize, edge: f64) -> ShadowTree {
    let links: Vec<serde_json::Value> =
        (1..=p).map(|l| serde_json::json!(l as u32)).collect();
    let spec = serde_json::json!({
        "id": format!("star-{p}"),
        "root": "c",
        "internals": [{"name": "c", "anchors": [0], "links": links}],
    });
    let topology = TreeTopology::from_json(spec.to_string().as_bytes()).unwrap();
    let mut points = vec![Landmark { id: 0, region: Region::Nose, pos: [0.0, 0.0, 0.0] }];
    for l in 1..=p {
        let ang = l as f64 / p as f64 * std::f64::consts::TAU;
        points.push(Landmark {
            id: l as u32,
            region: Region::Mouth,
            pos: [edge * ang.cos(), edge * ang.sin(), 0.0],
        });
    }
    let frame =
        normalize_to_nose(&LandmarkFrame { frame_index: 0, dim: 2, points }).unwrap();
    build_shadow_tree(&frame, &topology).unwrap()
}

/// A regular p-gon Lang polygon over a star tree, scaled so adjacent leaf
/// placements exactly meet their tree distance times (1 + margin).
pub fn regular_star_polygon(tree: &ShadowTree, margin: f64) -> LangPolygon {
    facefold::lang_polygon::build_lang_polygon(tree, margin).unwrap()
}

// Brute-force oracle ----------------------------------------------------------

#[derive(Clone)]
struct OLine {
    normal: Vec2,
    offset: f64,
    born: f64,
}

impl OLine {
    fn through(a: Vec2, b: Vec2, orient: f64, born: f64) -> OLine {
        let d = (b - a).normalized();
        let normal = d.perp() * orient;
        OLine { normal, offset: normal.dot(a), born }
    }

    fn value_at(&self, t: f64) -> f64 {
        self.offset + (t - self.born)
    }
}

#[derive(Clone)]
struct OVert {
    anchor: Vec2,
    anchor_depth: f64,
    leaves: Vec<usize>,
}

#[derive(Clone)]
struct OPoly {
    lines: Vec<OLine>,
    verts: Vec<OVert>,
    orient: f64,
}

impl OPoly {
    fn from_positions(positions: &[Vec2], leaves: Vec<Vec<usize>>, t: f64, orient: f64) -> OPoly {
        let n = positions.len();
        let lines = (0..n)
            .map(|i| OLine::through(positions[i], positions[(i + 1) % n], orient, t))
            .collect();
        let verts = positions
            .iter()
            .zip(leaves)
            .map(|(&p, l)| OVert { anchor: p, anchor_depth: t, leaves: l })
            .collect();
        OPoly { lines, verts, orient }
    }

    fn position(&self, i: usize, t: f64) -> Vec2 {
        let n = self.verts.len();
        let prev = &self.lines[(i + n - 1) % n];
        let next = &self.lines[i];
        match intersect_lines(prev.normal, prev.value_at(t), next.normal, next.value_at(t), 1e-9) {
            Some(p) => p,
            None => {
                let shared = (prev.normal + next.normal).normalized();
                self.verts[i].anchor + shared * (t - self.verts[i].anchor_depth)
            }
        }
    }

    fn positions(&self, t: f64) -> Vec<Vec2> {
        (0..self.verts.len()).map(|i| self.position(i, t)).collect()
    }

    fn signed_edge(&self, i: usize, t: f64) -> f64 {
        let n = self.verts.len();
        let tangent = -self.lines[i].normal.perp() * self.orient;
        (self.position((i + 1) % n, t) - self.position(i, t)).dot(tangent)
    }
}

pub struct OracleParams {
    pub th: f64,
    pub step: f64,
    pub refine_tol: f64,
    pub substeps: usize,
}

/// Brute-force shrinking simulator: tiny fixed substeps with positions
/// recomputed from explicit line offsets, local bisection onto condition
/// crossings, and the same event semantics as the engine. Returns the
/// (kind, depth) event log.
pub fn oracle_shrink(poly: &LangPolygon, tree: &ShadowTree, p: &OracleParams) -> Vec<(EventKind, f64)> {
    let dm = leaf_distance_matrix(tree);
    let positions = poly.positions();
    let orient = if signed_area_2x(&positions) >= 0.0 { 1.0 } else { -1.0 };
    let leaves: Vec<Vec<usize>> = poly.vertices.iter().map(|v| vec![v.leaf]).collect();
    let mut polys = vec![OPoly::from_positions(&positions, leaves, 0.0, orient)];
    let mut events = Vec::new();
    let mut t = 0.0;
    let dt = p.step / p.substeps as f64;
    let cascade = p.th + 64.0 * p.refine_tol;

    process_oracle_events(&mut polys, t, p.th, cascade, &dm, &mut events);
    let mut guard = 0usize;
    while !polys.is_empty() {
        guard += 1;
        assert!(guard < 4_000_000, "oracle failed to terminate");
        let t_next = t + dt;
        if polys.iter().any(|poly| any_condition(poly, t_next, p.th, &dm)) {
            let mut lo = t;
            let mut hi = t_next;
            while hi - lo > p.refine_tol {
                let mid = 0.5 * (lo + hi);
                if polys.iter().any(|poly| any_condition(poly, mid, p.th, &dm)) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            t = hi;
            process_oracle_events(&mut polys, t, p.th, cascade, &dm, &mut events);
        } else {
            t = t_next;
        }
    }
    events
}

fn area_collapsed(pos: &[Vec2], orient: f64, th: f64) -> bool {
    let n = pos.len();
    let mut perim = 0.0;
    for i in 0..n {
        perim += pos[i].dist(pos[(i + 1) % n]);
    }
    signed_area_2x(pos) * orient <= th * perim
}

fn any_condition(poly: &OPoly, t: f64, th: f64, dm: &[Vec<f64>]) -> bool {
    let n = poly.verts.len();
    for i in 0..n {
        if poly.signed_edge(i, t) <= th {
            return true;
        }
    }
    if area_collapsed(&poly.positions(t), poly.orient, th) {
        return true;
    }
    if n >= 4 {
        let pos = poly.positions(t);
        for i in 0..n {
            for k in i + 2..n {
                if i == 0 && k == n - 1 {
                    continue;
                }
                let (_, _, d) = min_pair(dm, &poly.verts[i].leaves, &poly.verts[k].leaves);
                let remaining = d - 2.0 * t;
                if remaining > 4.0 * th && pos[i].dist(pos[k]) <= remaining + th {
                    return true;
                }
            }
        }
    }
    false
}

fn min_pair(dm: &[Vec<f64>], a: &[usize], b: &[usize]) -> (usize, usize, f64) {
    let mut best = (a[0], b[0], f64::INFINITY);
    for &la in a {
        for &lb in b {
            if dm[la][lb] < best.2 {
                best = (la, lb, dm[la][lb]);
            }
        }
    }
    best
}

fn process_oracle_events(
    polys: &mut Vec<OPoly>,
    t: f64,
    th: f64,
    cascade: f64,
    dm: &[Vec<f64>],
    events: &mut Vec<(EventKind, f64)>,
) {
    loop {
        // (rank, poly index, i, k)
        let mut best: Option<(u8, usize, usize, usize)> = None;
        for (pi, poly) in polys.iter().enumerate() {
            let n = poly.verts.len();
            let pos = poly.positions(t);
            if n <= 2 {
                let c = (0, pi, 0, 0);
                if best.map_or(true, |b| c < b) {
                    best = Some(c);
                }
                continue;
            }
            let dists: Vec<f64> = (0..n).map(|i| pos[i].dist(pos[(i + 1) % n])).collect();
            if dists.iter().all(|&d| d <= cascade) || area_collapsed(&pos, poly.orient, th) {
                let c = (0, pi, 0, 0);
                if best.map_or(true, |b| c < b) {
                    best = Some(c);
                }
                continue;
            }
            for i in 0..n {
                if dists[i] <= th || poly.signed_edge(i, t) <= 0.0 {
                    let c = (1, pi, i, (i + 1) % n);
                    if best.map_or(true, |b| c < b) {
                        best = Some(c);
                    }
                }
            }
            for i in 0..n {
                for k in i + 2..n {
                    if i == 0 && k == n - 1 {
                        continue;
                    }
                    let (_, _, d) = min_pair(dm, &poly.verts[i].leaves, &poly.verts[k].leaves);
                    let remaining = d - 2.0 * t;
                    if remaining > 4.0 * th && pos[i].dist(pos[k]) <= remaining + th {
                        let c = (2, pi, i, k);
                        if best.map_or(true, |b| c < b) {
                            best = Some(c);
                        }
                    }
                }
            }
        }
        let Some((rank, pi, i, k)) = best else { return };
        match rank {
            0 => {
                events.push((EventKind::Terminal, t));
                polys.remove(pi);
            }
            1 => {
                events.push((EventKind::Contraction, t));
                let poly = &polys[pi];
                let n = poly.verts.len();
                let pos = poly.positions(t);
                let mid = pos[i].lerp(pos[k], 0.5);
                let mut leaves: Vec<Vec<usize>> = Vec::new();
                let mut positions = Vec::new();
                for idx in 0..n {
                    if idx == i {
                        let mut l = poly.verts[i].leaves.clone();
                        l.extend(poly.verts[k].leaves.iter().copied());
                        l.sort_unstable();
                        l.dedup();
                        leaves.push(l);
                        positions.push(mid);
                    } else if idx == k {
                        continue;
                    } else {
                        leaves.push(poly.verts[idx].leaves.clone());
                        positions.push(pos[idx]);
                    }
                }
                polys[pi] = OPoly::from_positions(&positions, leaves, t, poly.orient);
            }
            _ => {
                events.push((EventKind::Split, t));
                let poly = polys.remove(pi);
                let n = poly.verts.len();
                let pos = poly.positions(t);
                let take = |range: Vec<usize>| -> OPoly {
                    let positions: Vec<Vec2> = range.iter().map(|&x| pos[x]).collect();
                    let leaves: Vec<Vec<usize>> =
                        range.iter().map(|&x| poly.verts[x].leaves.clone()).collect();
                    OPoly::from_positions(&positions, leaves, t, poly.orient)
                };
                let a: Vec<usize> = (i..=k).collect();
                let mut b: Vec<usize> = (k..n).collect();
                b.extend(0..=i);
                polys.push(take(a));
                polys.push(take(b));
            }
        }
    }
}
