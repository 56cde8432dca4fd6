//! Deterministic synthetic expression sequences on the canonical 37-point
//! layout. Stands in for recorded datasets during tests and demos: each
//! class deforms its own set of regions, so the classes are separable by
//! displacement features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Landmark, LandmarkError, LandmarkFrame, NormalizedFrame, Sequence};
use crate::shadow_tree::TreeTopology;

const FRAME_COUNT: usize = 6;
const SUBJECT_JITTER: f64 = 0.012;
const FRAME_NOISE: f64 = 0.004;
const DRIFT: f64 = 0.05;

/// Per-landmark displacement at full intensity: (landmark id, dx, dy).
type Pattern = &'static [(u32, f64, f64)];

const SURPRISE: Pattern = &[
    (17, 0.0, 0.10), (18, 0.0, 0.10), (19, 0.0, 0.10), (20, 0.0, 0.10), (21, 0.0, 0.10),
    (22, 0.0, 0.10), (23, 0.0, 0.10), (24, 0.0, 0.10), (25, 0.0, 0.10), (26, 0.0, 0.10),
    (37, 0.0, 0.02), (38, 0.0, 0.02), (43, 0.0, 0.02), (44, 0.0, 0.02),
    (40, 0.0, -0.02), (41, 0.0, -0.02), (46, 0.0, -0.02), (47, 0.0, -0.02),
    (55, 0.0, -0.09), (56, 0.0, -0.11), (57, 0.0, -0.12), (58, 0.0, -0.11), (59, 0.0, -0.09),
];

const SMILE: Pattern = &[
    (48, -0.05, 0.05), (54, 0.05, 0.05),
    (49, -0.02, 0.03), (53, 0.02, 0.03),
    (51, 0.0, 0.01), (57, 0.0, 0.02),
    (55, 0.02, 0.02), (59, -0.02, 0.02),
    (40, 0.0, 0.015), (41, 0.0, 0.015), (46, 0.0, 0.015), (47, 0.0, 0.015),
];

const SADNESS: Pattern = &[
    (48, 0.0, -0.05), (54, 0.0, -0.05),
    (49, 0.0, -0.02), (53, 0.0, -0.02),
    (20, 0.0, 0.03), (21, 0.01, 0.05), (22, -0.01, 0.05), (23, 0.0, 0.03),
];

const ANGER: Pattern = &[
    (20, 0.01, -0.03), (21, 0.02, -0.06), (22, -0.02, -0.06), (23, -0.01, -0.03),
    (37, 0.0, -0.02), (38, 0.0, -0.02), (43, 0.0, -0.02), (44, 0.0, -0.02),
    (51, 0.0, -0.015), (57, 0.0, 0.015),
];

const DISGUST: Pattern = &[
    (31, 0.0, 0.03), (32, 0.0, 0.035), (34, 0.0, 0.035), (35, 0.0, 0.03),
    (49, 0.0, 0.03), (51, 0.0, 0.035), (53, 0.0, 0.03),
    (40, 0.0, 0.02), (41, 0.0, 0.02), (46, 0.0, 0.02), (47, 0.0, 0.02),
    (19, 0.0, -0.02), (24, 0.0, -0.02),
];

const FEAR: Pattern = &[
    (17, 0.01, 0.07), (18, 0.01, 0.07), (19, 0.01, 0.07), (20, 0.01, 0.07), (21, 0.01, 0.07),
    (22, -0.01, 0.07), (23, -0.01, 0.07), (24, -0.01, 0.07), (25, -0.01, 0.07), (26, -0.01, 0.07),
    (37, 0.0, 0.025), (38, 0.0, 0.025), (43, 0.0, 0.025), (44, 0.0, 0.025),
    (48, 0.01, -0.02), (54, -0.01, -0.02),
    (56, 0.0, -0.05), (57, 0.0, -0.05), (58, 0.0, -0.05),
];

const CONTEMPT: Pattern = &[
    (48, -0.03, 0.05), (49, -0.015, 0.025), (59, -0.01, 0.02),
    (17, 0.0, 0.02), (18, 0.0, 0.02),
];

const PATTERNS: [Pattern; 7] = [SURPRISE, SMILE, SADNESS, ANGER, DISGUST, FEAR, CONTEMPT];

/// Number of expression classes the generator knows.
pub fn synthetic_class_count() -> u32 {
    PATTERNS.len() as u32
}

/// Canonical neutral frame from a topology's bundled layout, nose-normalized.
pub fn canonical_neutral_frame(topology: &TreeTopology) -> Result<NormalizedFrame, LandmarkError> {
    if topology.layout.is_empty() {
        return Err(LandmarkError::NoLayout);
    }
    let mut points: Vec<Landmark> = topology
        .layout
        .iter()
        .map(|e| Landmark { id: e.id, region: e.region, pos: [e.pos[0], e.pos[1], 0.0] })
        .collect();
    points.sort_by_key(|p| p.id);
    super::normalize_to_nose(&LandmarkFrame { frame_index: 0, dim: 2, points })
}

/// Deterministic neutral-to-peak sequence for one expression class.
///
/// `intensity` in [0, 1] scales the class deformation; identical arguments
/// produce bit-identical sequences. Frame 0 is the neutral pose; subsequent
/// frames ramp linearly to the peak, with noise and head drift that scale
/// with the ramp so zero intensity reproduces the neutral frame exactly.
pub fn generate_synthetic_face(
    class_id: u32,
    intensity: f64,
    seed: u64,
) -> Result<Sequence, LandmarkError> {
    if class_id >= synthetic_class_count() {
        return Err(LandmarkError::UnknownClass(class_id, synthetic_class_count()));
    }
    if !(0.0..=1.0).contains(&intensity) || !intensity.is_finite() {
        return Err(LandmarkError::BadIntensity(intensity));
    }
    let pattern = PATTERNS[class_id as usize];
    let topo = TreeTopology::face37();
    let base = canonical_neutral_frame(&topo)?.into_frame();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(class_id) << 32));

    // Subject morphology: one fixed jitter shared by every frame.
    let jitter: Vec<[f64; 2]> = base
        .points
        .iter()
        .map(|_| {
            [
                rng.gen_range(-SUBJECT_JITTER..=SUBJECT_JITTER),
                rng.gen_range(-SUBJECT_JITTER..=SUBJECT_JITTER),
            ]
        })
        .collect();
    let magnitude = rng.gen_range(0.75..=1.25);
    let offset = [rng.gen_range(-0.3..=0.3), rng.gen_range(-0.3..=0.3)];

    let mut frames = Vec::with_capacity(FRAME_COUNT);
    for k in 0..FRAME_COUNT {
        let ramp = intensity * k as f64 / (FRAME_COUNT - 1) as f64;
        let drift = [
            rng.gen_range(-DRIFT..=DRIFT) * ramp,
            rng.gen_range(-DRIFT..=DRIFT) * ramp,
        ];
        let mut frame = base.clone();
        frame.frame_index = k;
        for (p, j) in frame.points.iter_mut().zip(jitter.iter()) {
            p.pos[0] += j[0] + offset[0] + drift[0];
            p.pos[1] += j[1] + offset[1] + drift[1];
            if let Some(&(_, dx, dy)) = pattern.iter().find(|(id, _, _)| *id == p.id) {
                p.pos[0] += ramp * magnitude * dx;
                p.pos[1] += ramp * magnitude * dy;
            }
            p.pos[0] += rng.gen_range(-FRAME_NOISE..=FRAME_NOISE) * ramp;
            p.pos[1] += rng.gen_range(-FRAME_NOISE..=FRAME_NOISE) * ramp;
        }
        frames.push(frame);
    }

    Ok(Sequence {
        subject: format!("synth-c{class_id}-seed{seed}"),
        label: class_id,
        neutral_index: 0,
        frames,
    })
}
