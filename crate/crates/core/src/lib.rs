//! Lip-motion mapping pipeline: statistical 3D face shape models driven by
//! 2D landmark tracks.
//!
//! The crate covers the full workflow:
//!
//! * [`mesh`] / [`track`] — mesh, landmark-track and landmark-mapping
//!   ingestion with the on-disk formats (OBJ subset, CSV, JSON).
//! * [`model`] — PCA shape model construction, synthesis and projection.
//! * [`camera`] — affine camera estimation (Gold Standard) and projection.
//! * [`fit`] — per-frame regularized shape-coefficient fitting and
//!   track animation.
//! * [`metrics`] — anthropometric distances, indices and cohort
//!   classification (quartile classes, Tukey fences, bootstrap boundary
//!   bands).
//! * [`eval`] — mouth-trajectory extraction, normalization, RMSE and
//!   corresponding-vs-non-corresponding head comparisons.
//! * [`synth`] — deterministic parametric face generator used for test
//!   corpora and tracks.
//!
//! All numeric code is generic over the scalar type through [`scalar::Real`]
//! (`f32` or `f64`); the `*64` aliases at the crate root pin the common
//! double-precision pipeline.

pub mod camera;
pub mod eval;
pub mod fit;
pub mod mesh;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod synth;
pub mod track;

pub use scalar::Real;

/// Double-precision mesh.
pub type Mesh64 = mesh::Mesh<f64>;
/// Double-precision landmark track.
pub type LandmarkTrack64 = track::LandmarkTrack<f64>;
/// Double-precision PCA shape model.
pub type MorphableModel64 = model::MorphableModel<f64>;
/// Double-precision shape coefficients.
pub type ShapeCoefficients64 = model::ShapeCoefficients<f64>;
/// Double-precision affine camera.
pub type CameraMatrix64 = camera::CameraMatrix<f64>;
/// Double-precision fit configuration.
pub type FitConfig64 = fit::FitConfig<f64>;
/// Double-precision fitted frame.
pub type FittedFrame64 = fit::FittedFrame<f64>;
/// Double-precision per-subject index profile.
pub type FacialIndexProfile64 = metrics::FacialIndexProfile<f64>;
/// Double-precision mouth trajectory.
pub type MouthTrajectory64 = eval::MouthTrajectory<f64>;
/// Double-precision evaluation report.
pub type EvaluationReport64 = eval::EvaluationReport<f64>;
