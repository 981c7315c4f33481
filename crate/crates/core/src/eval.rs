//! Quantitative evaluation of mapped lip motion.
//!
//! The protocol: extract mouth width/height per frame, correct for camera
//! distance by dividing each frame's landmarks by its eye-midpoint-to-nose
//! reference distance, min-max normalize each trajectory channel per video,
//! score a sentence with RMSE against the source trajectory, and compare
//! corresponding against non-corresponding heads with Welch t-tests on the
//! per-sentence RMSE groups (a per-sentence paired variant is reported
//! alongside the pooled one).

use nalgebra::Point2;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::camera::CameraMatrix;
use crate::fit::{animate, fit_track, FitConfig};
use crate::metrics::landmark_names as names;
use crate::model::MorphableModel;
use crate::scalar::{self, Real};
use crate::track::{Frame, FramePoints, LandmarkMapping, LandmarkTrack};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("landmark {name:?} required for mouth geometry is missing")]
    MissingLandmark { name: String },
    #[error("frame {frame}: zero eye-to-nose reference distance")]
    ZeroReferenceDistance { frame: u64 },
    #[error("need at least {needed} frames, got {got}")]
    TooFewFrames { got: usize, needed: usize },
    #[error("channel length mismatch: {a} vs {b}")]
    ChannelLengthMismatch { a: usize, b: usize },
    #[error("channels must be non-empty")]
    EmptyChannel,
    #[error("each group needs at least 2 values, got {a} and {b}")]
    GroupTooSmall { a: usize, b: usize },
    #[error("experiment spec: {0}")]
    BadSpec(&'static str),
}

/// Which normalizations have been applied to a trajectory's values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormState {
    Raw,
    ScaleNormalized,
    MinMaxNormalized,
}

/// Per-frame mouth width/height channels for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct MouthTrajectory<S: Real> {
    pub video_id: String,
    pub width: Vec<S>,
    pub height: Vec<S>,
    pub state: NormState,
}

/// Mouth aperture geometry of one frame: width is the distance between the
/// inner lip corners, height the distance between the inner-contour top and
/// bottom midpoints.
pub fn mouth_geometry<S: Real>(landmarks: &FramePoints<S>) -> Result<(S, S), EvalError> {
    let get = |name: &str| {
        landmarks.get(name).ok_or_else(|| EvalError::MissingLandmark {
            name: name.to_string(),
        })
    };
    let width = (get(names::INNER_LIP_CORNER_RIGHT)? - get(names::INNER_LIP_CORNER_LEFT)?).norm();
    let height = (get(names::INNER_LIP_TOP_MID)? - get(names::INNER_LIP_BOTTOM_MID)?).norm();
    Ok((width, height))
}

/// Extracts the mouth channels of a whole track. `state` records which
/// normalization the track's coordinates already carry.
pub fn mouth_trajectory<S: Real>(
    track: &LandmarkTrack<S>,
    state: NormState,
) -> Result<MouthTrajectory<S>, EvalError> {
    let mut width = Vec::with_capacity(track.len());
    let mut height = Vec::with_capacity(track.len());
    for frame in &track.frames {
        let (w, h) = mouth_geometry(&frame.points)?;
        width.push(w);
        height.push(h);
    }
    Ok(MouthTrajectory {
        video_id: track.video_id.clone(),
        width,
        height,
        state,
    })
}

/// Divides every frame's coordinates by that frame's Euclidean distance
/// between the inner-eye-corner midpoint and the nose tip, cancelling
/// camera distance. The reference distance of each output frame is 1.
pub fn scale_normalize<S: Real>(track: &LandmarkTrack<S>) -> Result<LandmarkTrack<S>, EvalError> {
    let mut frames = Vec::with_capacity(track.len());
    for frame in &track.frames {
        let get = |name: &str| {
            frame
                .points
                .get(name)
                .ok_or_else(|| EvalError::MissingLandmark {
                    name: name.to_string(),
                })
        };
        let left = get(names::ENDOCANTHION_LEFT)?;
        let right = get(names::ENDOCANTHION_RIGHT)?;
        let nose = get(names::PRONASALE)?;
        let half = scalar::from_f64::<S>(0.5);
        let mid = Point2::new((left.x + right.x) * half, (left.y + right.y) * half);
        let reference = (mid - nose).norm();
        if reference.is_zero() {
            return Err(EvalError::ZeroReferenceDistance { frame: frame.index });
        }
        let points = frame
            .points
            .iter()
            .map(|(n, p)| (n.clone(), Point2::new(p.x / reference, p.y / reference)))
            .collect();
        frames.push(Frame {
            index: frame.index,
            points,
        });
    }
    let mut out = LandmarkTrack::new(track.video_id.clone(), frames)
        .expect("normalization preserves track invariants");
    out.frame_rate = track.frame_rate;
    Ok(out)
}

fn minmax_channel<S: Real>(values: &[S], channel: &str, video: &str) -> Vec<S> {
    let mut lo = values[0];
    let mut hi = values[0];
    for &v in values {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    let range = hi - lo;
    if range.is_zero() {
        log::warn!("minmax_constant_channel=true channel={channel} video={video}");
        return vec![S::zero(); values.len()];
    }
    values.iter().map(|&v| (v - lo) / range).collect()
}

/// Per-channel min-max normalization to `[0, 1]`. A constant channel maps
/// to zeros (with a warning); anything else attains 0 and 1.
pub fn minmax_normalize<S: Real>(traj: &MouthTrajectory<S>) -> Result<MouthTrajectory<S>, EvalError> {
    if traj.width.len() < 2 {
        return Err(EvalError::TooFewFrames {
            got: traj.width.len(),
            needed: 2,
        });
    }
    Ok(MouthTrajectory {
        video_id: traj.video_id.clone(),
        width: minmax_channel(&traj.width, "width", &traj.video_id),
        height: minmax_channel(&traj.height, "height", &traj.video_id),
        state: NormState::MinMaxNormalized,
    })
}

/// Root mean square error between two equal-length channels.
pub fn rmse<S: Real>(a: &[S], b: &[S]) -> Result<S, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::ChannelLengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::EmptyChannel);
    }
    let mut acc = S::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    Ok((acc / scalar::from_f64(a.len() as f64)).sqrt())
}

fn mean_and_sample_var<S: Real>(values: &[S]) -> (S, S) {
    let n = scalar::from_f64::<S>(values.len() as f64);
    let mut mean = S::zero();
    for &v in values {
        mean += v;
    }
    mean /= n;
    let mut var = S::zero();
    for &v in values {
        let d = v - mean;
        var += d * d;
    }
    var /= scalar::from_f64::<S>((values.len() - 1) as f64);
    (mean, var)
}

fn t_sf_two_sided(t_abs: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    (2.0 * (1.0 - dist.cdf(t_abs))).clamp(0.0, 1.0)
}

/// Two-sample Welch t-test, two-sided p-value.
///
/// Degenerate groups with zero pooled standard error return 1.0 when the
/// means agree (identical groups) and 0.0 otherwise.
pub fn welch_p_value<S: Real>(a: &[S], b: &[S]) -> Result<S, EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::GroupTooSmall {
            a: a.len(),
            b: b.len(),
        });
    }
    let (ma, va) = mean_and_sample_var(a);
    let (mb, vb) = mean_and_sample_var(b);
    let na = scalar::from_f64::<S>(a.len() as f64);
    let nb = scalar::from_f64::<S>(b.len() as f64);
    let se2 = va / na + vb / nb;
    if se2.is_zero() {
        return Ok(if ma == mb { S::one() } else { S::zero() });
    }
    let t = (ma - mb) / se2.sqrt();
    let da = (va / na) * (va / na) / scalar::from_f64::<S>((a.len() - 1) as f64);
    let db = (vb / nb) * (vb / nb) / scalar::from_f64::<S>((b.len() - 1) as f64);
    let df = se2 * se2 / (da + db);
    let p = t_sf_two_sided(scalar::to_f64(t).abs(), scalar::to_f64(df));
    Ok(scalar::from_f64(p))
}

/// One-sample t-test on paired differences, two-sided p-value.
pub fn paired_p_value<S: Real>(differences: &[S]) -> Result<S, EvalError> {
    if differences.len() < 2 {
        return Err(EvalError::GroupTooSmall {
            a: differences.len(),
            b: differences.len(),
        });
    }
    let (mean, var) = mean_and_sample_var(differences);
    if var.is_zero() {
        return Ok(if mean.is_zero() { S::one() } else { S::zero() });
    }
    let n = scalar::from_f64::<S>(differences.len() as f64);
    let t = mean / (var / n).sqrt();
    let df = (differences.len() - 1) as f64;
    Ok(scalar::from_f64(t_sf_two_sided(
        scalar::to_f64(t).abs(),
        df,
    )))
}

/// One driving speaker: class label and one track per sentence.
#[derive(Debug, Clone)]
pub struct ExperimentSource<S: Real> {
    pub subject_id: String,
    pub class_label: String,
    pub tracks: Vec<LandmarkTrack<S>>,
}

/// One target head: class label and its shape model.
#[derive(Debug, Clone)]
pub struct ExperimentTarget<S: Real> {
    pub subject_id: String,
    pub class_label: String,
    pub model: MorphableModel<S>,
}

/// Full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentSpec<S: Real> {
    pub sources: Vec<ExperimentSource<S>>,
    pub targets: Vec<ExperimentTarget<S>>,
    pub mapping: LandmarkMapping,
    pub fit: FitConfig<S>,
}

/// One (source, target, sentence) evaluation cell.
#[derive(Debug, Clone)]
pub struct RmseCell<S: Real> {
    pub source_id: String,
    pub target_id: String,
    pub sentence_id: String,
    /// `(width RMSE, height RMSE)` of the normalized trajectories, or the
    /// error that invalidated the cell.
    pub rmse: Result<(S, S), String>,
    pub source_trajectory: Option<MouthTrajectory<S>>,
    pub fitted_trajectory: Option<MouthTrajectory<S>>,
}

/// Sentence-averaged RMSE for one (source, target) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairAverage<S: Real> {
    pub source_id: String,
    pub target_id: String,
    /// Means over the valid sentences, `None` when any cell is invalid.
    pub rmse: Option<(S, S)>,
    pub invalid_cells: usize,
}

/// Corresponding-vs-non-corresponding comparison for one source and one
/// target class.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupComparison<S: Real> {
    pub source_id: String,
    pub target_class: String,
    /// Pooled Welch p-values (width, height).
    pub pooled: Option<(S, S)>,
    /// Per-sentence paired p-values (width, height).
    pub paired: Option<(S, S)>,
    pub corresponding_count: usize,
    pub noncorresponding_count: usize,
}

/// Everything the quantitative protocol produces.
#[derive(Debug, Clone)]
pub struct EvaluationReport<S: Real> {
    pub cells: Vec<RmseCell<S>>,
    pub averages: Vec<PairAverage<S>>,
    pub comparisons: Vec<GroupComparison<S>>,
}

/// Maps a source track onto a target head and measures the normalized mouth
/// trajectories of both sides.
fn evaluate_cell<S: Real>(
    source: &ExperimentSource<S>,
    target: &ExperimentTarget<S>,
    track: &LandmarkTrack<S>,
    mapping: &LandmarkMapping,
    fit: &FitConfig<S>,
) -> Result<(S, S, MouthTrajectory<S>, MouthTrajectory<S>), String> {
    let _ = source;
    let fits = fit_track(&target.model, mapping, track, fit);
    let mut fitted = Vec::with_capacity(fits.len());
    for f in fits {
        match f.result {
            Ok(ok) => fitted.push(ok),
            Err(e) => return Err(format!("frame {}: {e}", f.frame_index)),
        }
    }
    let meshes = animate(&target.model, &fitted).map_err(|e| e.to_string())?;

    // Project each animated frame's landmark vertices through that frame's
    // camera to get the synthetic 2D track.
    let mut synth_frames = Vec::with_capacity(meshes.len());
    for (fit_frame, mesh) in fitted.iter().zip(&meshes) {
        let points = project_landmarks(&fit_frame.camera, mapping, mesh.vertices());
        synth_frames.push(Frame {
            index: fit_frame.frame_index,
            points,
        });
    }
    let synth_track =
        LandmarkTrack::new(format!("{}->{}", track.video_id, target.subject_id), synth_frames)
            .map_err(|e| e.to_string())?;

    let source_norm = scale_normalize(track).map_err(|e| e.to_string())?;
    let synth_norm = scale_normalize(&synth_track).map_err(|e| e.to_string())?;
    let source_traj = mouth_trajectory(&source_norm, NormState::ScaleNormalized)
        .and_then(|t| minmax_normalize(&t))
        .map_err(|e| e.to_string())?;
    let synth_traj = mouth_trajectory(&synth_norm, NormState::ScaleNormalized)
        .and_then(|t| minmax_normalize(&t))
        .map_err(|e| e.to_string())?;
    let w = rmse(&source_traj.width, &synth_traj.width).map_err(|e| e.to_string())?;
    let h = rmse(&source_traj.height, &synth_traj.height).map_err(|e| e.to_string())?;
    Ok((w, h, source_traj, synth_traj))
}

fn project_landmarks<S: Real>(
    camera: &CameraMatrix<S>,
    mapping: &LandmarkMapping,
    vertices: &[nalgebra::Point3<S>],
) -> FramePoints<S> {
    mapping
        .entries()
        .iter()
        .map(|(name, &v)| (name.clone(), camera.project(&vertices[v])))
        .collect()
}

/// Runs the full protocol over every (source, target, sentence) cell.
///
/// Cells are independent and evaluated in parallel; a failing cell is
/// recorded as invalid without aborting the experiment.
pub fn run_experiment<S: Real>(spec: &ExperimentSpec<S>) -> Result<EvaluationReport<S>, EvalError> {
    if spec.sources.is_empty() {
        return Err(EvalError::BadSpec("no sources"));
    }
    if spec.targets.is_empty() {
        return Err(EvalError::BadSpec("no targets"));
    }
    if spec.sources.iter().any(|s| s.tracks.is_empty()) {
        return Err(EvalError::BadSpec("source without tracks"));
    }

    let mut combos = Vec::new();
    for (si, source) in spec.sources.iter().enumerate() {
        for (ti, _target) in spec.targets.iter().enumerate() {
            for sentence in 0..source.tracks.len() {
                combos.push((si, ti, sentence));
            }
        }
    }
    let cells: Vec<RmseCell<S>> = combos
        .par_iter()
        .map(|&(si, ti, sentence)| {
            let source = &spec.sources[si];
            let target = &spec.targets[ti];
            let track = &source.tracks[sentence];
            match evaluate_cell(source, target, track, &spec.mapping, &spec.fit) {
                Ok((w, h, src, fit)) => RmseCell {
                    source_id: source.subject_id.clone(),
                    target_id: target.subject_id.clone(),
                    sentence_id: track.video_id.clone(),
                    rmse: Ok((w, h)),
                    source_trajectory: Some(src),
                    fitted_trajectory: Some(fit),
                },
                Err(e) => RmseCell {
                    source_id: source.subject_id.clone(),
                    target_id: target.subject_id.clone(),
                    sentence_id: track.video_id.clone(),
                    rmse: Err(e),
                    source_trajectory: None,
                    fitted_trajectory: None,
                },
            }
        })
        .collect();

    // Sentence averages per (source, target) pair.
    let mut averages = Vec::new();
    for source in &spec.sources {
        for target in &spec.targets {
            let pair: Vec<&RmseCell<S>> = cells
                .iter()
                .filter(|c| c.source_id == source.subject_id && c.target_id == target.subject_id)
                .collect();
            let invalid = pair.iter().filter(|c| c.rmse.is_err()).count();
            let rmse = if invalid == 0 && !pair.is_empty() {
                let n = scalar::from_f64::<S>(pair.len() as f64);
                let mut w = S::zero();
                let mut h = S::zero();
                for c in &pair {
                    let (cw, ch) = *c.rmse.as_ref().expect("filtered valid");
                    w += cw;
                    h += ch;
                }
                Some((w / n, h / n))
            } else {
                None
            };
            averages.push(PairAverage {
                source_id: source.subject_id.clone(),
                target_id: target.subject_id.clone(),
                rmse,
                invalid_cells: invalid,
            });
        }
    }

    let comparisons = build_comparisons(spec, &cells);
    Ok(EvaluationReport {
        cells,
        averages,
        comparisons,
    })
}

fn build_comparisons<S: Real>(
    spec: &ExperimentSpec<S>,
    cells: &[RmseCell<S>],
) -> Vec<GroupComparison<S>> {
    let mut classes: Vec<&str> = spec.targets.iter().map(|t| t.class_label.as_str()).collect();
    classes.sort_unstable();
    classes.dedup();

    let mut out = Vec::new();
    for source in &spec.sources {
        let corresponding = spec
            .targets
            .iter()
            .find(|t| t.subject_id == source.subject_id);
        let Some(corr) = corresponding else { continue };

        let corr_cells: Vec<(&str, S, S)> = cells
            .iter()
            .filter(|c| c.source_id == source.subject_id && c.target_id == corr.subject_id)
            .filter_map(|c| {
                c.rmse
                    .as_ref()
                    .ok()
                    .map(|&(w, h)| (c.sentence_id.as_str(), w, h))
            })
            .collect();

        for class in &classes {
            let group_targets: Vec<&ExperimentTarget<S>> = spec
                .targets
                .iter()
                .filter(|t| t.class_label == *class && t.subject_id != source.subject_id)
                .collect();
            let mut pool_w = Vec::new();
            let mut pool_h = Vec::new();
            let mut diff_w = Vec::new();
            let mut diff_h = Vec::new();
            for target in &group_targets {
                for cell in cells.iter().filter(|c| {
                    c.source_id == source.subject_id && c.target_id == target.subject_id
                }) {
                    if let Ok((w, h)) = cell.rmse {
                        pool_w.push(w);
                        pool_h.push(h);
                        if let Some(&(_, cw, ch)) = corr_cells
                            .iter()
                            .find(|(s, _, _)| *s == cell.sentence_id.as_str())
                        {
                            diff_w.push(w - cw);
                            diff_h.push(h - ch);
                        }
                    }
                }
            }
            let corr_w: Vec<S> = corr_cells.iter().map(|&(_, w, _)| w).collect();
            let corr_h: Vec<S> = corr_cells.iter().map(|&(_, _, h)| h).collect();
            let pooled = match (
                welch_p_value(&corr_w, &pool_w),
                welch_p_value(&corr_h, &pool_h),
            ) {
                (Ok(w), Ok(h)) => Some((w, h)),
                _ => None,
            };
            let paired = match (paired_p_value(&diff_w), paired_p_value(&diff_h)) {
                (Ok(w), Ok(h)) => Some((w, h)),
                _ => None,
            };
            out.push(GroupComparison {
                source_id: source.subject_id.clone(),
                target_class: class.to_string(),
                pooled,
                paired,
                corresponding_count: corr_w.len(),
                noncorresponding_count: pool_w.len(),
            });
        }
    }
    out
}
