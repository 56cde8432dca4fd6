//! Rectangle-shaped convex doubling-cycle polygon built from a shadow tree.
//!
//! Leaves are laid out on a rectangle perimeter in leaf-cycle order with arc
//! spacing proportional to consecutive tree distances, then the whole figure
//! is scaled uniformly until every leaf pair is planar-separated by at least
//! its tree distance.

use thiserror::Error;

use crate::geometry::Vec2;
use crate::shadow_tree::{leaf_cycle, leaf_distance_matrix, ShadowTree, Side};

/// Tolerance for the planar-vs-tree distance condition.
pub const LANG_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct PolyVertex {
    /// Leaf index into the shadow tree.
    pub leaf: usize,
    pub pos: Vec2,
}

/// Convex polygon over the tree leaves, in leaf-cycle order.
#[derive(Debug, Clone)]
pub struct LangPolygon {
    pub vertices: Vec<PolyVertex>,
    /// Uniform scale applied during construction (1.0 when unscaled).
    pub scale: f64,
    /// Bounding rectangle dimensions after scaling.
    pub width: f64,
    pub height: f64,
}

impl LangPolygon {
    pub fn positions(&self) -> Vec<Vec2> {
        self.vertices.iter().map(|v| v.pos).collect()
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| self.vertices[i].pos.dist(self.vertices[(i + 1) % n].pos))
            .sum()
    }
}

/// A leaf pair whose planar distance undercuts its tree distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LangViolation {
    pub leaf_a: usize,
    pub leaf_b: usize,
    pub planar: f64,
    pub tree: f64,
}

#[derive(Debug, Error)]
pub enum PolygonError {
    #[error("polygon needs at least 3 leaves, tree has {0}")]
    TooFewLeaves(usize),
    #[error("region {0:?} is mapped to no rectangle side")]
    RegionUnmapped(&'static str),
    #[error("leaf cycle does not decompose into contiguous side blocks in top/right/bottom/left order")]
    NonContiguousSides,
    #[error("leaves {0} and {1} are placed coincidently; scale ratio is undefined")]
    CoincidentLeaves(usize, usize),
    #[error("polygon and tree leaf sets differ")]
    MismatchedLeaves,
}

/// Arc-length position on a centered rectangle path, clockwise from the
/// top-left corner (top edge first).
fn rect_path(v: f64, w: f64, h: f64) -> Vec2 {
    if v < w {
        Vec2::new(-w / 2.0 + v, h / 2.0)
    } else if v < w + h {
        Vec2::new(w / 2.0, h / 2.0 - (v - w))
    } else if v < 2.0 * w + h {
        Vec2::new(w / 2.0 - (v - w - h), -h / 2.0)
    } else {
        Vec2::new(-w / 2.0, -h / 2.0 + (v - 2.0 * w - h))
    }
}

/// Place the tree's leaves on a rectangle perimeter (unscaled).
///
/// Consecutive-leaf arc spacing equals the consecutive tree distance; the
/// total perimeter is therefore twice the tree's edge length. When the tree
/// carries a region-to-side map, the rectangle aspect follows the span of
/// the top block against the mean lateral span (clamped to [0.25, 4]) and
/// the top block is centered on the top edge; otherwise the rectangle is
/// square with the cycle starting at the top-left corner.
pub fn place_on_rectangle(tree: &ShadowTree) -> Result<LangPolygon, PolygonError> {
    let p = tree.leaf_count();
    if p < 3 {
        return Err(PolygonError::TooFewLeaves(p));
    }
    let cycle = leaf_cycle(tree);
    let dm = leaf_distance_matrix(tree);

    // gap[i] is the tree distance from cycle[i] to cycle[i+1].
    let gaps: Vec<f64> = (0..p).map(|i| dm[cycle[i]][cycle[(i + 1) % p]]).collect();
    let total: f64 = gaps.iter().sum();
    let mut arcs = Vec::with_capacity(p);
    let mut acc = 0.0;
    for g in &gaps {
        arcs.push(acc);
        acc += g;
    }

    let (aspect, origin) = match &tree.sides {
        Some(map) => {
            let side_of = |leaf: usize| -> Result<Side, PolygonError> {
                let region = tree.leaves[leaf].region;
                map.get(&region)
                    .copied()
                    .ok_or(PolygonError::RegionUnmapped(region.as_str()))
            };
            let sides: Vec<Side> = cycle
                .iter()
                .map(|&l| side_of(l))
                .collect::<Result<_, _>>()?;
            check_contiguous(&sides)?;

            // Span per side: interior gaps plus half of each straddling gap.
            let mut span = [0.0f64; 4];
            for i in 0..p {
                let s = sides[i] as usize;
                let next = sides[(i + 1) % p] as usize;
                if s == next {
                    span[s] += gaps[i];
                } else {
                    span[s] += gaps[i] / 2.0;
                    span[next] += gaps[i] / 2.0;
                }
            }
            let lateral_mean = (span[Side::Right as usize] + span[Side::Left as usize]) / 2.0;
            let aspect = if lateral_mean > 0.0 {
                (span[Side::Top as usize] / lateral_mean).clamp(0.25, 4.0)
            } else {
                4.0
            };

            // Center the top block on the top edge. The block start arc is
            // the midpoint of the gap entering its first leaf.
            let origin = match sides.iter().position(|&s| s == Side::Top) {
                Some(_) => {
                    let first_top = first_of_block(&sides, Side::Top);
                    let prev = (first_top + p - 1) % p;
                    let start = arcs[first_top] - gaps[prev] / 2.0;
                    start + span[Side::Top as usize] / 2.0
                }
                None => 0.0,
            };
            (aspect, origin)
        }
        None => (1.0, 0.0),
    };

    let h = total / (2.0 * (1.0 + aspect));
    let w = aspect * h;

    let vertices = cycle
        .iter()
        .zip(arcs.iter())
        .map(|(&leaf, &u)| {
            // Shift so `origin` lands at the top edge midpoint (arc w/2).
            let v = (u - origin + w / 2.0).rem_euclid(total);
            PolyVertex { leaf, pos: rect_path(v, w, h) }
        })
        .collect();

    Ok(LangPolygon { vertices, scale: 1.0, width: w, height: h })
}

fn first_of_block(sides: &[Side], side: Side) -> usize {
    let p = sides.len();
    // First index whose predecessor differs (handles the wrap-around run).
    for i in 0..p {
        if sides[i] == side && sides[(i + p - 1) % p] != side {
            return i;
        }
    }
    0 // every leaf on one side
}

fn check_contiguous(sides: &[Side]) -> Result<(), PolygonError> {
    let p = sides.len();
    // Collect the cyclic run sequence of sides.
    let mut runs: Vec<Side> = Vec::new();
    for i in 0..p {
        if runs.last() != Some(&sides[i]) {
            runs.push(sides[i]);
        }
    }
    if runs.len() > 1 && runs.first() == runs.last() {
        runs.pop();
    }
    // Each side at most once, and run order must follow T, R, B, L cyclically.
    let ranks: Vec<usize> = runs
        .iter()
        .map(|s| Side::ORDER.iter().position(|o| o == s).unwrap())
        .collect();
    let mut seen = [false; 4];
    for &r in &ranks {
        if seen[r] {
            return Err(PolygonError::NonContiguousSides);
        }
        seen[r] = true;
    }
    if ranks.len() > 1 {
        let start = ranks.iter().position(|&r| r == *ranks.iter().min().unwrap()).unwrap();
        for k in 1..ranks.len() {
            let a = ranks[(start + k - 1) % ranks.len()];
            let b = ranks[(start + k) % ranks.len()];
            if b <= a {
                return Err(PolygonError::NonContiguousSides);
            }
        }
    }
    Ok(())
}

/// Smallest uniform scale s* such that scaling the placement by any s >= s*
/// satisfies the Lang condition for every leaf pair.
pub fn minimal_scale(poly: &LangPolygon, tree: &ShadowTree) -> Result<f64, PolygonError> {
    check_leaf_sets(poly, tree)?;
    let dm = leaf_distance_matrix(tree);
    let n = poly.vertices.len();
    let mut s = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let a = &poly.vertices[i];
            let b = &poly.vertices[j];
            let planar = a.pos.dist(b.pos);
            let tree_d = dm[a.leaf][b.leaf];
            if planar <= f64::EPSILON * 16.0 {
                return Err(PolygonError::CoincidentLeaves(a.leaf, b.leaf));
            }
            s = s.max(tree_d / planar);
        }
    }
    Ok(s)
}

/// Construct the Lang polygon: rectangle placement scaled by s*(1+margin).
pub fn build_lang_polygon(tree: &ShadowTree, margin: f64) -> Result<LangPolygon, PolygonError> {
    let mut poly = place_on_rectangle(tree)?;
    let s = minimal_scale(&poly, tree)? * (1.0 + margin);
    for v in &mut poly.vertices {
        v.pos = v.pos * s;
    }
    poly.scale = s;
    poly.width *= s;
    poly.height *= s;
    Ok(poly)
}

/// All leaf pairs with planar distance below tree distance minus tolerance.
/// Empty means the polygon satisfies the Lang condition.
pub fn verify_lang_condition(
    poly: &LangPolygon,
    tree: &ShadowTree,
) -> Result<Vec<LangViolation>, PolygonError> {
    check_leaf_sets(poly, tree)?;
    let dm = leaf_distance_matrix(tree);
    let n = poly.vertices.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let a = &poly.vertices[i];
            let b = &poly.vertices[j];
            let planar = a.pos.dist(b.pos);
            let tree_d = dm[a.leaf][b.leaf];
            if planar < tree_d - LANG_TOL {
                out.push(LangViolation { leaf_a: a.leaf, leaf_b: b.leaf, planar, tree: tree_d });
            }
        }
    }
    Ok(out)
}

fn check_leaf_sets(poly: &LangPolygon, tree: &ShadowTree) -> Result<(), PolygonError> {
    if poly.vertices.len() != tree.leaf_count() {
        return Err(PolygonError::MismatchedLeaves);
    }
    let mut seen = vec![false; tree.leaf_count()];
    for v in &poly.vertices {
        if v.leaf >= seen.len() || seen[v.leaf] {
            return Err(PolygonError::MismatchedLeaves);
        }
        seen[v.leaf] = true;
    }
    Ok(())
}
