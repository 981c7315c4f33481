//! Deterministic parametric face generator for test corpora and tracks.
//!
//! The template is a fixed low-polygon face (~200 vertices) with named
//! semantic landmarks. A subject is three positive scales (mouth height,
//! mouth width, lip thickness) plus a noise seed. Articulation is linear
//! in two pose parameters: `open` (jaw/aperture) and `spread` (corner
//! stretch with lip thinning), so every articulated state of a subject
//! lies in the affine span of its own pose corpus. The vertical
//! articulation pattern varies with the mouth-height scale (taller mouths
//! recruit the outer lip more), which is what makes cross-subject mapping
//! degrade with mouth-height mismatch.
//!
//! Geometry is versioned: changing any template number must bump
//! [`TEMPLATE_VERSION`] because golden outputs depend on it.

use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraMatrix;
use crate::mesh::Mesh;
use crate::metrics::landmark_names as names;
use crate::scalar::{self, Real};
use crate::track::{Frame, FramePoints, LandmarkMapping, LandmarkTrack};

/// Version of the template geometry and articulation patterns.
pub const TEMPLATE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("{0} must be positive")]
    BadScale(&'static str),
    #[error("pose count must be at least 2, got {0}")]
    TooFewPoses(usize),
    #[error("frame count must be at least 2, got {0}")]
    TooFewFrames(usize),
}

/// Parametric description of one synthetic subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSpec {
    pub subject_id: String,
    pub mouth_height_scale: f64,
    pub mouth_width_scale: f64,
    pub lip_thickness_scale: f64,
    pub noise_seed: u64,
}

impl SubjectSpec {
    pub fn new(subject_id: impl Into<String>) -> Self {
        Self {
            subject_id: subject_id.into(),
            mouth_height_scale: 1.0,
            mouth_width_scale: 1.0,
            lip_thickness_scale: 1.0,
            noise_seed: 42,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.mouth_height_scale > 0.0 && self.mouth_height_scale.is_finite()) {
            return Err(SynthError::BadScale("mouth_height_scale"));
        }
        if !(self.mouth_width_scale > 0.0 && self.mouth_width_scale.is_finite()) {
            return Err(SynthError::BadScale("mouth_width_scale"));
        }
        if !(self.lip_thickness_scale > 0.0 && self.lip_thickness_scale.is_finite()) {
            return Err(SynthError::BadScale("lip_thickness_scale"));
        }
        Ok(())
    }
}

/// Template geometry for one subject: base vertices, the two articulation
/// delta fields and the landmark-name table.
struct Template {
    base: Vec<Point3<f64>>,
    open_delta: Vec<Vector3<f64>>,
    spread_delta: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
    landmarks: BTreeMap<String, usize>,
}

impl Template {
    fn pose_vertices(&self, open: f64, spread: f64) -> Vec<Point3<f64>> {
        self.base
            .iter()
            .zip(self.open_delta.iter().zip(&self.spread_delta))
            .map(|(p, (d_open, d_spread))| p + d_open * open + d_spread * spread)
            .collect()
    }
}

const MOUTH_Y: f64 = -38.0;
const MOUTH_Z: f64 = 48.0;

fn build_template(spec: &SubjectSpec) -> Template {
    let mh = spec.mouth_height_scale;
    let mw = spec.mouth_width_scale;
    let lt = spec.lip_thickness_scale;
    // Taller mouths recruit the outer lip contour more during opening.
    let w_out = 0.3 + 0.25 * mh;

    let mut base: Vec<Point3<f64>> = Vec::new();
    let mut landmarks: BTreeMap<String, usize> = BTreeMap::new();
    let mut open_moves: Vec<(usize, Vector3<f64>)> = Vec::new();
    let mut spread_moves: Vec<(usize, Vector3<f64>)> = Vec::new();

    // Concentric head rings (stitched into triangles below).
    let rings = [1.0, 0.82, 0.64, 0.46, 0.34, 0.22];
    let ring_len = 24usize;
    for &r in &rings {
        for k in 0..ring_len {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / ring_len as f64;
            base.push(Point3::new(
                70.0 * r * theta.cos(),
                -5.0 + 92.0 * r * theta.sin(),
                46.0 * (1.0 - 0.85 * r * r),
            ));
        }
    }
    let ring_vertex_count = base.len();

    // Jaw arc below the face oval.
    for k in 0..12 {
        let t = k as f64 / 11.0;
        let theta = std::f64::consts::PI * t;
        base.push(Point3::new(
            55.0 * theta.cos(),
            -45.0 - 40.0 * theta.sin(),
            30.0,
        ));
    }

    let named = |name: &str,
                     p: Point3<f64>,
                     base: &mut Vec<Point3<f64>>,
                     landmarks: &mut BTreeMap<String, usize>|
     -> usize {
        let ix = base.len();
        base.push(p);
        landmarks.insert(name.to_string(), ix);
        ix
    };
    let anon = |p: Point3<f64>, base: &mut Vec<Point3<f64>>| -> usize {
        base.push(p);
        base.len() - 1
    };

    // Upper face features.
    named(names::NASION, Point3::new(0.0, 38.0, 52.0), &mut base, &mut landmarks);
    named(names::PRONASALE, Point3::new(0.0, 6.0, 62.0), &mut base, &mut landmarks);
    named(names::SUBNASALE, Point3::new(0.0, -2.0, 54.0), &mut base, &mut landmarks);
    named(names::ALARE_LEFT, Point3::new(-14.0, 2.0, 50.0), &mut base, &mut landmarks);
    named(names::ALARE_RIGHT, Point3::new(14.0, 2.0, 50.0), &mut base, &mut landmarks);
    named(names::ENDOCANTHION_LEFT, Point3::new(-15.0, 30.0, 50.0), &mut base, &mut landmarks);
    named(names::ENDOCANTHION_RIGHT, Point3::new(15.0, 30.0, 50.0), &mut base, &mut landmarks);
    named(names::EXOCANTHION_LEFT, Point3::new(-31.0, 31.0, 48.0), &mut base, &mut landmarks);
    named(names::EXOCANTHION_RIGHT, Point3::new(31.0, 31.0, 48.0), &mut base, &mut landmarks);
    named(names::ZYGION_LEFT, Point3::new(-68.0, 8.0, 20.0), &mut base, &mut landmarks);
    named(names::ZYGION_RIGHT, Point3::new(68.0, 8.0, 20.0), &mut base, &mut landmarks);

    // Eye rings, brow arcs, nose bridge (unnamed structure).
    for side in [-1.0f64, 1.0] {
        for k in 0..6 {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / 6.0;
            anon(
                Point3::new(
                    side * 23.0 + 7.0 * theta.cos(),
                    30.0 + 3.5 * theta.sin(),
                    49.0,
                ),
                &mut base,
            );
        }
        for k in 0..5 {
            let t = k as f64 / 4.0;
            anon(
                Point3::new(side * (10.0 + 26.0 * t), 44.0 + 3.0 * (t * std::f64::consts::PI).sin(), 50.0),
                &mut base,
            );
        }
    }
    for (y, z) in [(30.0, 56.0), (22.0, 58.5), (14.0, 60.0)] {
        anon(Point3::new(0.0, y, z), &mut base);
    }

    // Mouth region. All articulated vertices sit in the z = MOUTH_Z plane.
    let mouth = |x: f64, dy: f64| Point3::new(x, MOUTH_Y + dy, MOUTH_Z);
    let sto = named(names::STOMION, mouth(0.0, 0.0), &mut base, &mut landmarks);
    let _ = sto;
    let ch_l = named(names::CHEILION_LEFT, mouth(-26.0 * mw, 0.0), &mut base, &mut landmarks);
    let ch_r = named(names::CHEILION_RIGHT, mouth(26.0 * mw, 0.0), &mut base, &mut landmarks);
    let ic_l = named(names::INNER_LIP_CORNER_LEFT, mouth(-21.0 * mw, 0.0), &mut base, &mut landmarks);
    let ic_r = named(names::INNER_LIP_CORNER_RIGHT, mouth(21.0 * mw, 0.0), &mut base, &mut landmarks);
    let it = named(names::INNER_LIP_TOP_MID, mouth(0.0, 3.5 * mh), &mut base, &mut landmarks);
    let ib = named(names::INNER_LIP_BOTTOM_MID, mouth(0.0, -3.5 * mh), &mut base, &mut landmarks);
    let iq_tl = anon(mouth(-10.5 * mw, 3.2 * mh), &mut base);
    let iq_tr = anon(mouth(10.5 * mw, 3.2 * mh), &mut base);
    let iq_bl = anon(mouth(-10.5 * mw, -3.2 * mh), &mut base);
    let iq_br = anon(mouth(10.5 * mw, -3.2 * mh), &mut base);
    let ls = named(
        names::LABIALE_SUPERIUS,
        mouth(0.0, mh * (3.5 + 3.4 * lt)),
        &mut base,
        &mut landmarks,
    );
    let li = named(
        names::LABIALE_INFERIUS,
        mouth(0.0, -mh * (3.5 + 4.0 * lt)),
        &mut base,
        &mut landmarks,
    );
    let oq_tl = anon(mouth(-13.0 * mw, mh * (3.5 + 3.0 * lt) * 0.92), &mut base);
    let oq_tr = anon(mouth(13.0 * mw, mh * (3.5 + 3.0 * lt) * 0.92), &mut base);
    let oq_bl = anon(mouth(-13.0 * mw, -mh * (3.5 + 3.6 * lt) * 0.92), &mut base);
    let oq_br = anon(mouth(13.0 * mw, -mh * (3.5 + 3.6 * lt) * 0.92), &mut base);
    let buc_l = anon(Point3::new(-40.0, MOUTH_Y + 2.0, 38.0), &mut base);
    let buc_r = anon(Point3::new(40.0, MOUTH_Y + 2.0, 38.0), &mut base);
    let sl = named(
        names::SUBLABIALE,
        Point3::new(0.0, MOUTH_Y - mh * (3.5 + 4.0 * lt) - 7.0, 46.0),
        &mut base,
        &mut landmarks,
    );
    let gn = named(names::GNATHION, Point3::new(0.0, -88.0, 42.0), &mut base, &mut landmarks);

    // Opening pattern: the inner contour carries the full aperture, the
    // outer contour follows with the height-dependent weight, the chin
    // drops with the jaw, and thick lips pull the corners slightly inward.
    let up = Vector3::new(0.0, 3.5 * mh, 0.0);
    let out_up = Vector3::new(0.0, 3.5 * mh * w_out, 0.0);
    let jaw = Vector3::new(0.0, -3.5 * mh * w_out * 0.6, 0.0);
    for ix in [it, iq_tl, iq_tr] {
        open_moves.push((ix, up));
    }
    for ix in [ib, iq_bl, iq_br] {
        open_moves.push((ix, -up));
    }
    for ix in [ls, oq_tl, oq_tr] {
        open_moves.push((ix, out_up));
    }
    for ix in [li, oq_bl, oq_br] {
        open_moves.push((ix, -out_up));
    }
    for ix in [sl, gn] {
        open_moves.push((ix, jaw));
    }
    let pull_in = 1.5 * lt;
    for ix in [ic_r, ch_r] {
        open_moves.push((ix, Vector3::new(-pull_in, 0.0, 0.0)));
    }
    for ix in [ic_l, ch_l] {
        open_moves.push((ix, Vector3::new(pull_in, 0.0, 0.0)));
    }

    // Spread pattern: corners and cheeks move outward, lips thin.
    let stretch = 3.0 * mw;
    for (ix, sign) in [(ic_r, 1.0), (ch_r, 1.0), (ic_l, -1.0), (ch_l, -1.0)] {
        spread_moves.push((ix, Vector3::new(sign * stretch, 0.0, 0.0)));
    }
    for (ix, sign) in [(oq_tr, 1.0), (oq_br, 1.0), (oq_tl, -1.0), (oq_bl, -1.0)] {
        spread_moves.push((ix, Vector3::new(sign * 1.8 * mw, 0.0, 0.0)));
    }
    for (ix, sign) in [(buc_r, 1.0), (buc_l, -1.0)] {
        spread_moves.push((ix, Vector3::new(sign * 1.2 * mw, 0.0, 0.0)));
    }
    let thin_outer = Vector3::new(0.0, -0.8 * mh * lt, 0.0);
    for ix in [ls, oq_tl, oq_tr] {
        spread_moves.push((ix, thin_outer));
    }
    for ix in [li, oq_bl, oq_br] {
        spread_moves.push((ix, -thin_outer));
    }
    let thin_inner = Vector3::new(0.0, -0.6 * mh * lt, 0.0);
    for ix in [it, iq_tl, iq_tr] {
        spread_moves.push((ix, thin_inner));
    }
    for ix in [ib, iq_bl, iq_br] {
        spread_moves.push((ix, -thin_inner));
    }

    // Stitch the head rings into a triangle shell.
    let mut faces = Vec::new();
    for ring in 0..rings.len() - 1 {
        let a0 = ring * ring_len;
        let b0 = (ring + 1) * ring_len;
        for k in 0..ring_len {
            let k1 = (k + 1) % ring_len;
            faces.push([a0 + k, a0 + k1, b0 + k]);
            faces.push([a0 + k1, b0 + k1, b0 + k]);
        }
    }
    debug_assert!(ring_vertex_count == rings.len() * ring_len);

    let n = base.len();
    let mut open_delta = vec![Vector3::zeros(); n];
    for (ix, d) in open_moves {
        open_delta[ix] = d;
    }
    let mut spread_delta = vec![Vector3::zeros(); n];
    for (ix, d) in spread_moves {
        spread_delta[ix] = d;
    }
    Template {
        base,
        open_delta,
        spread_delta,
        faces,
        landmarks,
    }
}

fn convert_mesh<S: Real>(vertices: &[Point3<f64>], faces: &[[usize; 3]]) -> Mesh<S> {
    let verts = vertices
        .iter()
        .map(|p| {
            Point3::new(
                scalar::from_f64::<S>(p.x),
                scalar::from_f64::<S>(p.y),
                scalar::from_f64::<S>(p.z),
            )
        })
        .collect();
    Mesh::new(verts, Some(faces.to_vec())).expect("template geometry is finite")
}

/// Pose parameters for a corpus: an `open` grid symmetric about zero with a
/// balanced alternating `spread`, then a small seeded perturbation. Every
/// pose stays in the subject's two-mode articulation manifold.
fn pose_states(spec: &SubjectSpec, pose_count: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut states = Vec::with_capacity(pose_count);
    for k in 0..pose_count {
        let open = -1.0 + 2.0 * k as f64 / (pose_count - 1) as f64;
        let spread = if pose_count % 2 == 1 && k == pose_count - 1 {
            0.0
        } else if k % 2 == 0 {
            0.5
        } else {
            -0.5
        };
        let eps_o = rng.gen_range(-0.02..0.02);
        let eps_s = rng.gen_range(-0.02..0.02);
        states.push((open + eps_o, spread + eps_s));
    }
    states
}

/// Generates the viseme-style pose corpus of one subject.
pub fn generate_corpus<S: Real>(
    spec: &SubjectSpec,
    pose_count: usize,
) -> Result<Vec<Mesh<S>>, SynthError> {
    spec.validate()?;
    if pose_count < 2 {
        return Err(SynthError::TooFewPoses(pose_count));
    }
    let template = build_template(spec);
    Ok(pose_states(spec, pose_count)
        .into_iter()
        .map(|(open, spread)| convert_mesh(&template.pose_vertices(open, spread), &template.faces))
        .collect())
}

/// The fixed frontal camera used to render synthetic tracks (y flipped to
/// image coordinates).
pub fn synth_camera<S: Real>() -> CameraMatrix<S> {
    let f = |v: f64| scalar::from_f64::<S>(v);
    CameraMatrix::from_rows(
        [f(1.9), f(0.0), f(0.0), f(240.0)],
        [f(0.0), f(-1.9), f(0.0), f(200.0)],
    )
}

/// Landmark-name-to-vertex mapping of the template. The construction order
/// is fixed, so one mapping serves every subject.
pub fn landmark_mapping() -> LandmarkMapping {
    let template = build_template(&SubjectSpec::new("reference"));
    LandmarkMapping::new(template.landmarks).expect("template landmark indices are unique")
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn track_signals(spec: &SubjectSpec, sentence_id: &str, frame_count: usize) -> Vec<(f64, f64)> {
    let seed = spec.noise_seed ^ fnv1a(sentence_id.as_bytes());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f1 = rng.gen_range(2.0..4.5);
    let f2 = rng.gen_range(0.4..1.2);
    let f3 = rng.gen_range(0.8..2.2);
    let p1 = rng.gen_range(0.0..std::f64::consts::TAU);
    let p2 = rng.gen_range(0.0..std::f64::consts::TAU);
    let p3 = rng.gen_range(0.0..std::f64::consts::TAU);
    (0..frame_count)
        .map(|t| {
            let tau = t as f64 / frame_count as f64;
            let envelope = 0.55 + 0.45 * (std::f64::consts::TAU * f2 * tau + p2).sin();
            let open = 0.85 * (std::f64::consts::TAU * f1 * tau + p1).sin() * envelope;
            let spread = 0.5 * (std::f64::consts::TAU * f3 * tau + p3).sin();
            (open, spread)
        })
        .collect()
}

/// Generates the 2D landmark track of one sentence: a seeded articulation
/// signal projected through the fixed frontal camera.
pub fn generate_track<S: Real>(
    spec: &SubjectSpec,
    sentence_id: &str,
    frame_count: usize,
) -> Result<LandmarkTrack<S>, SynthError> {
    spec.validate()?;
    if frame_count < 2 {
        return Err(SynthError::TooFewFrames(frame_count));
    }
    let template = build_template(spec);
    let camera = synth_camera::<S>();
    let frames = track_signals(spec, sentence_id, frame_count)
        .into_iter()
        .enumerate()
        .map(|(t, (open, spread))| {
            let points = project_pose(&template, &camera, open, spread);
            Frame {
                index: t as u64,
                points,
            }
        })
        .collect();
    Ok(LandmarkTrack::new(format!("{}_{}", spec.subject_id, sentence_id), frames)
        .expect("generated frames share the landmark set"))
}

/// The neutral (rest pose) 2D landmarks of a subject under the fixed camera.
pub fn neutral_landmarks<S: Real>(spec: &SubjectSpec) -> Result<FramePoints<S>, SynthError> {
    spec.validate()?;
    let template = build_template(spec);
    Ok(project_pose(&template, &synth_camera::<S>(), 0.0, 0.0))
}

fn project_pose<S: Real>(
    template: &Template,
    camera: &CameraMatrix<S>,
    open: f64,
    spread: f64,
) -> FramePoints<S> {
    template
        .landmarks
        .iter()
        .map(|(name, &ix)| {
            let p = template.base[ix]
                + template.open_delta[ix] * open
                + template.spread_delta[ix] * spread;
            let p3 = Point3::new(
                scalar::from_f64::<S>(p.x),
                scalar::from_f64::<S>(p.y),
                scalar::from_f64::<S>(p.z),
            );
            (name.clone(), camera.project(&p3))
        })
        .collect()
}

/// Convenience for tests: the template's 3D landmark positions at a pose.
pub fn pose_landmarks_3d(spec: &SubjectSpec, open: f64, spread: f64) -> BTreeMap<String, Point3<f64>> {
    let template = build_template(spec);
    template
        .landmarks
        .iter()
        .map(|(name, &ix)| {
            let p = template.base[ix]
                + template.open_delta[ix] * open
                + template.spread_delta[ix] * spread;
            (name.clone(), p)
        })
        .collect()
}
