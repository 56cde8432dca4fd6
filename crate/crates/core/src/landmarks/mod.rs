//! Landmark data model: parsing, affine alignment, nose normalization and
//! peak-frame selection.
//!
//! Sequences are plain JSON files (see the crate README for the schema).
//! Every operation here is a pure value transformation; frames are cheap to
//! clone and safe to share across threads.

mod synthetic;

pub use synthetic::{canonical_neutral_frame, generate_synthetic_face, synthetic_class_count};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Facial region labels for landmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    EyebrowLeft,
    EyebrowRight,
    EyeLeft,
    EyeRight,
    Nose,
    Mouth,
}

impl Region {
    pub const ALL: [Region; 6] = [
        Region::EyebrowLeft,
        Region::EyebrowRight,
        Region::EyeLeft,
        Region::EyeRight,
        Region::Nose,
        Region::Mouth,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Region::EyebrowLeft => "eyebrow_left",
            Region::EyebrowRight => "eyebrow_right",
            Region::EyeLeft => "eye_left",
            Region::EyeRight => "eye_right",
            Region::Nose => "nose",
            Region::Mouth => "mouth",
        }
    }
}

/// One labeled landmark. `pos[2]` is zero for 2D data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub id: u32,
    pub region: Region,
    pub pos: [f64; 3],
}

/// Landmark positions for one frame of a sequence.
///
/// Invariants (established by [`parse_landmark_sequence`] and preserved by
/// all operations): points sorted by ascending id, ids unique, coordinates
/// finite, at least one `nose` landmark, `dim` is 2 or 3.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    pub frame_index: usize,
    pub dim: u8,
    pub points: Vec<Landmark>,
}

impl LandmarkFrame {
    /// The reference landmark: lowest id carrying the `nose` region.
    pub fn nose_reference(&self) -> Option<&Landmark> {
        self.points.iter().find(|p| p.region == Region::Nose)
    }

    pub fn point(&self, id: u32) -> Option<&Landmark> {
        self.points
            .binary_search_by_key(&id, |p| p.id)
            .ok()
            .map(|i| &self.points[i])
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.points.iter().map(|p| p.id)
    }

    fn sort_points(&mut self) {
        self.points.sort_by_key(|p| p.id);
    }
}

/// A frame whose positions are nose-relative; the reference landmark sits at
/// the origin exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFrame(LandmarkFrame);

impl NormalizedFrame {
    pub fn frame(&self) -> &LandmarkFrame {
        &self.0
    }

    pub fn into_frame(self) -> LandmarkFrame {
        self.0
    }
}

/// A labeled landmark sequence: neutral start, expression peak somewhere in
/// the remaining frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub subject: String,
    pub label: u32,
    pub neutral_index: usize,
    pub frames: Vec<LandmarkFrame>,
}

impl Sequence {
    pub fn neutral(&self) -> &LandmarkFrame {
        &self.frames[self.neutral_index]
    }
}

#[derive(Debug, Error)]
pub enum LandmarkError {
    #[error("malformed landmark JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("sequence has no frames")]
    EmptyFrames,
    #[error("neutral_index {neutral_index} out of range for {frames} frames")]
    NeutralIndexOutOfRange { neutral_index: usize, frames: usize },
    #[error("frame {frame}: missing nose landmark")]
    MissingNose { frame: usize },
    #[error("frame {frame}: duplicate landmark id {id}")]
    DuplicateId { frame: usize, id: u32 },
    #[error("frame {frame}: landmark id set differs from frame 0")]
    InconsistentIds { frame: usize },
    #[error("frame {frame}: landmark {id} region differs from frame 0")]
    InconsistentRegion { frame: usize, id: u32 },
    #[error("frame {frame}: dimensionality differs from frame 0")]
    InconsistentDim { frame: usize },
    #[error("frame {frame}: landmark {id} has non-finite coordinate")]
    NonFinite { frame: usize, id: u32 },
    #[error("frame {frame}: landmark {id} position must have 2 or 3 coordinates, got {len}")]
    BadPosLength { frame: usize, id: u32, len: usize },
    #[error("frames share no common landmark id set")]
    MismatchedIds,
    #[error("degenerate template: affine fit is singular (collinear/coplanar points)")]
    SingularFit,
    #[error("affine alignment needs at least {needed} points for {dim}D data, got {got}")]
    TooFewPoints { needed: usize, got: usize, dim: u8 },
    #[error("peak selection needs at least 2 frames")]
    SingleFrame,
    #[error("unknown synthetic class id {0} (configured classes: {1})")]
    UnknownClass(u32, u32),
    #[error("intensity {0} outside [0, 1]")]
    BadIntensity(f64),
    #[error("topology carries no canonical layout")]
    NoLayout,
}

// Wire format ---------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct WirePoint {
    id: u32,
    region: Region,
    pos: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WireFrame {
    index: usize,
    points: Vec<WirePoint>,
}

#[derive(Serialize, Deserialize)]
struct WireSequence {
    subject: String,
    label: u32,
    neutral_index: usize,
    frames: Vec<WireFrame>,
}

/// Parse and validate a landmark sequence from its JSON wire format.
///
/// Ids are sorted ascending within each frame. Violations are reported with
/// the frame index and landmark id involved.
pub fn parse_landmark_sequence(bytes: &[u8]) -> Result<Sequence, LandmarkError> {
    let wire: WireSequence = serde_json::from_slice(bytes)?;
    if wire.frames.is_empty() {
        return Err(LandmarkError::EmptyFrames);
    }
    if wire.neutral_index >= wire.frames.len() {
        return Err(LandmarkError::NeutralIndexOutOfRange {
            neutral_index: wire.neutral_index,
            frames: wire.frames.len(),
        });
    }

    let mut frames = Vec::with_capacity(wire.frames.len());
    for (fi, wf) in wire.frames.into_iter().enumerate() {
        let mut dim: Option<u8> = None;
        let mut points = Vec::with_capacity(wf.points.len());
        for wp in wf.points {
            let d = match wp.pos.len() {
                2 => 2,
                3 => 3,
                len => {
                    return Err(LandmarkError::BadPosLength { frame: fi, id: wp.id, len });
                }
            };
            match dim {
                None => dim = Some(d),
                Some(prev) if prev != d => {
                    return Err(LandmarkError::InconsistentDim { frame: fi });
                }
                _ => {}
            }
            if wp.pos.iter().any(|c| !c.is_finite()) {
                return Err(LandmarkError::NonFinite { frame: fi, id: wp.id });
            }
            let mut pos = [0.0; 3];
            pos[..wp.pos.len()].copy_from_slice(&wp.pos);
            points.push(Landmark { id: wp.id, region: wp.region, pos });
        }
        let mut frame = LandmarkFrame {
            frame_index: wf.index,
            dim: dim.unwrap_or(2),
            points,
        };
        frame.sort_points();
        for w in frame.points.windows(2) {
            if w[0].id == w[1].id {
                return Err(LandmarkError::DuplicateId { frame: fi, id: w[0].id });
            }
        }
        if frame.nose_reference().is_none() {
            return Err(LandmarkError::MissingNose { frame: fi });
        }
        frames.push(frame);
    }

    // All frames must agree with frame 0 on ids, regions and dimensionality.
    let first = frames[0].clone();
    for (fi, frame) in frames.iter().enumerate().skip(1) {
        if frame.dim != first.dim {
            return Err(LandmarkError::InconsistentDim { frame: fi });
        }
        if frame.points.len() != first.points.len()
            || frame.ids().ne(first.ids())
        {
            return Err(LandmarkError::InconsistentIds { frame: fi });
        }
        for (p, q) in frame.points.iter().zip(first.points.iter()) {
            if p.region != q.region {
                return Err(LandmarkError::InconsistentRegion { frame: fi, id: p.id });
            }
        }
    }

    Ok(Sequence {
        subject: wire.subject,
        label: wire.label,
        neutral_index: wire.neutral_index,
        frames,
    })
}

/// Serialize a sequence to its canonical JSON wire format (ids ascending,
/// stable field order); `parse(serialize(s))` is the identity.
pub fn serialize_sequence(seq: &Sequence) -> Vec<u8> {
    let wire = WireSequence {
        subject: seq.subject.clone(),
        label: seq.label,
        neutral_index: seq.neutral_index,
        frames: seq
            .frames
            .iter()
            .map(|f| WireFrame {
                index: f.frame_index,
                points: f
                    .points
                    .iter()
                    .map(|p| WirePoint {
                        id: p.id,
                        region: p.region,
                        pos: p.pos[..f.dim as usize].to_vec(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&wire).expect("sequence serialization cannot fail");
    out.push(b'\n');
    out
}

// Operations ----------------------------------------------------------------

/// Least-squares affine alignment of `frame` onto `template`.
///
/// Fits `x -> A x + b` over homogeneous coordinates minimizing the sum of
/// squared distances to the template positions, then applies it to the
/// frame. Returns the transformed frame together with the root-sum-square
/// residual of the fit.
pub fn align_affine(
    frame: &LandmarkFrame,
    template: &LandmarkFrame,
) -> Result<(LandmarkFrame, f64), LandmarkError> {
    if frame.points.len() != template.points.len() || frame.ids().ne(template.ids()) {
        return Err(LandmarkError::MismatchedIds);
    }
    let d = frame.dim as usize;
    let needed = d + 1;
    let n = frame.points.len();
    if n < needed {
        return Err(LandmarkError::TooFewPoints { needed, got: n, dim: frame.dim });
    }

    // Normal equations over homogeneous source coordinates [x 1].
    let h = d + 1;
    let mut xtx = vec![vec![0.0; h]; h];
    let mut xtq = vec![vec![0.0; d]; h];
    for (p, q) in frame.points.iter().zip(template.points.iter()) {
        let mut row = [0.0; 4];
        row[..d].copy_from_slice(&p.pos[..d]);
        row[d] = 1.0;
        for i in 0..h {
            for j in 0..h {
                xtx[i][j] += row[i] * row[j];
            }
            for j in 0..d {
                xtq[i][j] += row[i] * q.pos[j];
            }
        }
    }

    // Pivot tolerance scaled to the data magnitude.
    let scale: f64 = xtx.iter().enumerate().map(|(i, r)| r[i]).sum::<f64>() / h as f64;
    let tol = (scale.max(1.0)) * 1e-12;

    // One solve per output coordinate; columns of the affine map.
    let mut map = vec![vec![0.0; h]; d];
    for j in 0..d {
        let rhs: Vec<f64> = (0..h).map(|i| xtq[i][j]).collect();
        let col = geometry_solve(&xtx, rhs, tol).ok_or(LandmarkError::SingularFit)?;
        map[j] = col;
    }

    let mut aligned = frame.clone();
    for p in &mut aligned.points {
        let mut row = [0.0; 4];
        row[..d].copy_from_slice(&p.pos[..d]);
        row[d] = 1.0;
        let mut new_pos = [0.0; 3];
        for (j, coeffs) in map.iter().enumerate() {
            new_pos[j] = coeffs.iter().zip(row.iter()).map(|(c, x)| c * x).sum();
        }
        p.pos = new_pos;
    }

    let mut residual_sq = 0.0;
    for (p, q) in aligned.points.iter().zip(template.points.iter()) {
        for j in 0..d {
            let diff = p.pos[j] - q.pos[j];
            residual_sq += diff * diff;
        }
    }
    Ok((aligned, residual_sq.sqrt()))
}

fn geometry_solve(a: &[Vec<f64>], b: Vec<f64>, tol: f64) -> Option<Vec<f64>> {
    crate::geometry::solve_dense(a.to_vec(), b, tol)
}

/// Translate every landmark so the nose reference sits at the origin.
pub fn normalize_to_nose(frame: &LandmarkFrame) -> Result<NormalizedFrame, LandmarkError> {
    let nose = frame
        .nose_reference()
        .ok_or(LandmarkError::MissingNose { frame: frame.frame_index })?
        .pos;
    let mut out = frame.clone();
    for p in &mut out.points {
        for j in 0..3 {
            p.pos[j] -= nose[j];
        }
    }
    Ok(NormalizedFrame(out))
}

/// Total nose-normalized displacement of a frame against the neutral frame.
pub fn frame_displacement(
    frame: &LandmarkFrame,
    neutral: &LandmarkFrame,
) -> Result<f64, LandmarkError> {
    if frame.ids().ne(neutral.ids()) {
        return Err(LandmarkError::MismatchedIds);
    }
    let f = normalize_to_nose(frame)?;
    let n = normalize_to_nose(neutral)?;
    let d = frame.dim as usize;
    let mut total = 0.0;
    for (p, q) in f.frame().points.iter().zip(n.frame().points.iter()) {
        let mut acc = 0.0;
        for j in 0..d {
            let diff = p.pos[j] - q.pos[j];
            acc += diff * diff;
        }
        total += acc.sqrt();
    }
    Ok(total)
}

/// Index of the frame whose nose-normalized landmarks deviate most from the
/// neutral frame. Ties resolve to the lowest frame index; the neutral frame
/// itself is never selected.
pub fn select_peak_frame(seq: &Sequence) -> Result<usize, LandmarkError> {
    if seq.frames.len() < 2 {
        return Err(LandmarkError::SingleFrame);
    }
    let neutral = seq.neutral();
    let mut best: Option<(usize, f64)> = None;
    for (i, frame) in seq.frames.iter().enumerate() {
        if i == seq.neutral_index {
            continue;
        }
        let disp = frame_displacement(frame, neutral)?;
        let better = match best {
            None => true,
            Some((_, best_disp)) => disp > best_disp,
        };
        if better {
            best = Some((i, disp));
        }
    }
    Ok(best.expect("at least one non-neutral frame").0)
}
