//! facefold: origami crease-pattern descriptors for labeled landmark sets.
//!
//! The pipeline turns a landmark sequence into classifier-ready features:
//!
//! 1. [`landmarks`] — parsing, affine alignment, nose normalization, peak
//!    frame selection, and a deterministic synthetic generator.
//! 2. [`shadow_tree`] — the metric tree linking landmark groups.
//! 3. [`lang_polygon`] — the convex doubling-cycle polygon whose leaf
//!    placements dominate their tree distances.
//! 4. [`molecule`] — the shrinking engine: inward offset with contraction
//!    and split events down to convergence, recorded as a crease pattern.
//! 5. [`crease`] — the crease-pattern graph, complex encodings, JSON and
//!    SVG output.
//! 6. [`descriptors`] — displacement (DTNnp) and crease-pattern feature
//!    vectors, PCA, CSV interchange.
//! 7. [`classify`] — quadratic-kernel SVM with stratified k-fold metrics.
//!
//! All types are immutable values; everything is deterministic for fixed
//! seeds.

pub mod classify;
pub mod crease;
pub mod descriptors;
pub mod geometry;
pub mod landmarks;
pub mod lang_polygon;
pub mod molecule;
pub mod shadow_tree;

pub use crease::{CreasePattern, EdgeKind, NodeKind};
pub use descriptors::{DescriptorLayout, FeatureVector};
pub use landmarks::{LandmarkFrame, NormalizedFrame, Region, Sequence};
pub use lang_polygon::LangPolygon;
pub use molecule::{ShrinkConfig, ShrinkEvent};
pub use shadow_tree::{ShadowTree, TreeTopology};
