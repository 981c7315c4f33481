//! Per-frame shape-coefficient fitting from observed 2D landmarks.
//!
//! Each frame is fitted by alternating two closed-form steps: estimate the
//! affine camera from the observed landmarks against the current model
//! landmarks (the mean shape initially), then solve the regularized linear
//! least-squares problem
//!
//! ```text
//! E(alpha) = sum_i ||proj_i(alpha) - y_i||^2 / (2 sigma2d) + ||alpha||^2
//! ```
//!
//! whose minimizer satisfies `(A^T A + 2 sigma2d I) alpha = A^T (y - b)`,
//! with `A` the camera-projected, sigma-scaled component columns restricted
//! to the landmark vertices and `b` the projected mean landmarks. Residuals
//! are taken on the two inhomogeneous coordinates; the homogeneous third
//! coordinates are identically equal under an affine camera and contribute
//! nothing.

use nalgebra::{DMatrix, DVector, Point2, Point3};
use rayon::prelude::*;
use thiserror::Error;

use crate::camera::{estimate_camera, CameraError, CameraMatrix};
use crate::mesh::{Mesh, MeshError};
use crate::model::{ModelError, MorphableModel, ShapeCoefficients};
use crate::scalar::{self, Real};
use crate::track::{FramePoints, LandmarkMapping, LandmarkTrack, TrackError};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("landmark {name:?} required by the mapping is missing from the frame")]
    MissingLandmark { name: String },
    #[error("sigma2d must be positive")]
    NonPositiveSigma,
    #[error("component count {requested} outside 1..={available}")]
    ComponentCountOutOfRange { requested: usize, available: usize },
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mapping(#[from] TrackError),
    #[error("normal-equation solve failed")]
    SolveFailure,
}

/// Fit parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<S: Real> {
    /// Observation variance in pixels squared.
    pub sigma2d: S,
    /// Number of leading components to fit; `None` uses every retained
    /// component of the model.
    pub components: Option<usize>,
    /// Camera/shape refinement rounds after the initial pass.
    pub alternations: usize,
}

impl<S: Real> Default for FitConfig<S> {
    fn default() -> Self {
        Self {
            // 3-pixel standard deviation; the observation variance is a free
            // parameter of the cost and this is a serviceable default.
            sigma2d: scalar::from_f64(9.0),
            components: None,
            alternations: 3,
        }
    }
}

/// Result of fitting one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedFrame<S: Real> {
    pub frame_index: u64,
    pub camera: CameraMatrix<S>,
    pub coeffs: ShapeCoefficients<S>,
    /// Final value of the fitting objective.
    pub residual: S,
}

/// Per-frame outcome of [`fit_track`]; failures carry the frame index.
#[derive(Debug)]
pub struct FrameFit<S: Real> {
    pub frame_index: u64,
    pub result: Result<FittedFrame<S>, FitError>,
}

/// The observed landmark set arranged for fitting: names sorted, vertex
/// indices resolved, observations stacked.
struct FrameProblem<S: Real> {
    vertex_indices: Vec<usize>,
    observed: Vec<Point2<S>>,
}

impl<S: Real> FrameProblem<S> {
    fn build(
        model: &MorphableModel<S>,
        mapping: &LandmarkMapping,
        frame: &FramePoints<S>,
    ) -> Result<Self, FitError> {
        mapping.validate_for_vertex_count(model.vertex_count())?;
        let mut vertex_indices = Vec::with_capacity(mapping.len());
        let mut observed = Vec::with_capacity(mapping.len());
        for (name, &vertex) in mapping.entries() {
            let p = frame
                .get(name)
                .ok_or_else(|| FitError::MissingLandmark { name: name.clone() })?;
            vertex_indices.push(vertex);
            observed.push(*p);
        }
        Ok(Self {
            vertex_indices,
            observed,
        })
    }

    fn landmark_positions(&self, shape: &DVector<S>) -> Vec<Point3<S>> {
        self.vertex_indices
            .iter()
            .map(|&v| Point3::new(shape[3 * v], shape[3 * v + 1], shape[3 * v + 2]))
            .collect()
    }
}

fn resolve_components<S: Real>(
    model: &MorphableModel<S>,
    config: &FitConfig<S>,
) -> Result<usize, FitError> {
    let available = model.component_count();
    let k = config.components.unwrap_or(available);
    if k == 0 || k > available {
        return Err(FitError::ComponentCountOutOfRange {
            requested: k,
            available,
        });
    }
    Ok(k)
}

/// Design matrix `A` (2L x K), projected-mean offset `b` and stacked
/// observations `y` of the linearized per-frame problem.
pub type LinearizedDesign<S> = (DMatrix<S>, DVector<S>, DVector<S>);

/// Builds the linearized system for one camera.
pub fn linearized_design<S: Real>(
    model: &MorphableModel<S>,
    mapping: &LandmarkMapping,
    camera: &CameraMatrix<S>,
    frame: &FramePoints<S>,
    k: usize,
) -> Result<LinearizedDesign<S>, FitError> {
    let problem = FrameProblem::build(model, mapping, frame)?;
    let (a, b) = design_for(model, camera, &problem, k);
    let y = stack_observations(&problem.observed);
    Ok((a, b, y))
}

fn design_for<S: Real>(
    model: &MorphableModel<S>,
    camera: &CameraMatrix<S>,
    problem: &FrameProblem<S>,
    k: usize,
) -> (DMatrix<S>, DVector<S>) {
    let l = problem.vertex_indices.len();
    let lin = camera.linear_part();
    let t = camera.translation();
    let mean = model.mean();
    let comps = model.components();
    let sigmas = model.sigmas();

    let mut a = DMatrix::<S>::zeros(2 * l, k);
    let mut b = DVector::<S>::zeros(2 * l);
    for (i, &v) in problem.vertex_indices.iter().enumerate() {
        let m = nalgebra::Vector3::new(mean[3 * v], mean[3 * v + 1], mean[3 * v + 2]);
        let pm = lin * m + t;
        b[2 * i] = pm.x;
        b[2 * i + 1] = pm.y;
        for j in 0..k {
            let c = nalgebra::Vector3::new(
                comps[(3 * v, j)],
                comps[(3 * v + 1, j)],
                comps[(3 * v + 2, j)],
            ) * sigmas[j];
            let pc = lin * c;
            a[(2 * i, j)] = pc.x;
            a[(2 * i + 1, j)] = pc.y;
        }
    }
    (a, b)
}

fn stack_observations<S: Real>(observed: &[Point2<S>]) -> DVector<S> {
    let mut y = DVector::<S>::zeros(2 * observed.len());
    for (i, p) in observed.iter().enumerate() {
        y[2 * i] = p.x;
        y[2 * i + 1] = p.y;
    }
    y
}

/// Closed-form minimizer of the fitting objective for a fixed camera.
pub fn solve_coefficients<S: Real>(
    model: &MorphableModel<S>,
    mapping: &LandmarkMapping,
    camera: &CameraMatrix<S>,
    frame: &FramePoints<S>,
    sigma2d: S,
    k: usize,
) -> Result<ShapeCoefficients<S>, FitError> {
    if sigma2d <= S::zero() {
        return Err(FitError::NonPositiveSigma);
    }
    let (a, b, y) = linearized_design(model, mapping, camera, frame, k)?;
    let residual = y - b;
    let rhs = a.transpose() * &residual;
    let two_sigma = sigma2d + sigma2d;
    let mut normal = a.transpose() * &a;
    for i in 0..k {
        normal[(i, i)] += two_sigma;
    }
    let chol = normal.cholesky().ok_or(FitError::SolveFailure)?;
    Ok(ShapeCoefficients::new(chol.solve(&rhs)))
}

/// Value of the fitting objective at `alpha` for a fixed camera.
pub fn fit_objective<S: Real>(
    model: &MorphableModel<S>,
    mapping: &LandmarkMapping,
    camera: &CameraMatrix<S>,
    frame: &FramePoints<S>,
    sigma2d: S,
    alpha: &ShapeCoefficients<S>,
) -> Result<S, FitError> {
    if sigma2d <= S::zero() {
        return Err(FitError::NonPositiveSigma);
    }
    let (a, b, y) = linearized_design(model, mapping, camera, frame, alpha.len())?;
    let fitted = a * &alpha.alpha + b;
    let data = (y - fitted).norm_squared();
    Ok(data / (two(sigma2d)) + alpha.alpha.norm_squared())
}

/// Analytic gradient of the fitting objective at `alpha` for a fixed camera.
pub fn fit_gradient<S: Real>(
    model: &MorphableModel<S>,
    mapping: &LandmarkMapping,
    camera: &CameraMatrix<S>,
    frame: &FramePoints<S>,
    sigma2d: S,
    alpha: &ShapeCoefficients<S>,
) -> Result<DVector<S>, FitError> {
    if sigma2d <= S::zero() {
        return Err(FitError::NonPositiveSigma);
    }
    let (a, b, y) = linearized_design(model, mapping, camera, frame, alpha.len())?;
    let misfit = a.transpose() * (&a * &alpha.alpha + b - y);
    Ok(misfit / sigma2d + &alpha.alpha * two(S::one()))
}

fn two<S: Real>(v: S) -> S {
    v + v
}

/// Fits one frame: camera from the mean shape, coefficient solve, then
/// `alternations` further camera/shape rounds.
pub fn fit_frame<S: Real>(
    model: &MorphableModel<S>,
    mapping: &LandmarkMapping,
    frame_index: u64,
    frame: &FramePoints<S>,
    config: &FitConfig<S>,
) -> Result<FittedFrame<S>, FitError> {
    if config.sigma2d <= S::zero() {
        return Err(FitError::NonPositiveSigma);
    }
    let k = resolve_components(model, config)?;
    let problem = FrameProblem::build(model, mapping, frame)?;
    let y = stack_observations(&problem.observed);

    let mut shape = model.mean().clone();
    let mut camera = None;
    let mut coeffs = ShapeCoefficients::zeros(k);
    for _ in 0..=config.alternations {
        let cam = estimate_camera(&problem.observed, &problem.landmark_positions(&shape))?;
        let (a, b) = design_for(model, &cam, &problem, k);
        let rhs = a.transpose() * (&y - &b);
        let two_sigma = two(config.sigma2d);
        let mut normal = a.transpose() * &a;
        for i in 0..k {
            normal[(i, i)] += two_sigma;
        }
        let chol = normal.cholesky().ok_or(FitError::SolveFailure)?;
        coeffs = ShapeCoefficients::new(chol.solve(&rhs));
        shape = model.synthesize_shape_vector(&coeffs);
        camera = Some(cam);
    }
    let camera = camera.expect("at least one round runs");

    let projected = problem.landmark_positions(&shape);
    let mut data = S::zero();
    for (obs, p3) in problem.observed.iter().zip(&projected) {
        data += (camera.project(p3) - obs).norm_squared();
    }
    let residual = data / two(config.sigma2d) + coeffs.alpha.norm_squared();
    Ok(FittedFrame {
        frame_index,
        camera,
        coeffs,
        residual,
    })
}

/// Fits every frame of a track independently (no temporal smoothing).
///
/// Frames are processed in parallel; results are ordered by frame and
/// bit-identical to a sequential run. Per-frame failures are reported in
/// place so one bad frame does not abort the track.
pub fn fit_track<S: Real>(
    model: &MorphableModel<S>,
    mapping: &LandmarkMapping,
    track: &LandmarkTrack<S>,
    config: &FitConfig<S>,
) -> Vec<FrameFit<S>> {
    track
        .frames
        .par_iter()
        .map(|frame| FrameFit {
            frame_index: frame.index,
            result: fit_frame(model, mapping, frame.index, &frame.points, config),
        })
        .collect()
}

/// Synthesizes the mesh sequence for a list of fitted frames.
pub fn animate<S: Real>(
    model: &MorphableModel<S>,
    fitted: &[FittedFrame<S>],
) -> Result<Vec<Mesh<S>>, ModelError> {
    fitted.iter().map(|f| model.synthesize(&f.coeffs)).collect()
}

#[allow(dead_code)]
fn _mesh_error_is_convertible(e: MeshError) -> FitError {
    FitError::Model(ModelError::Mesh(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::track::Frame;
    use nalgebra::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    /// A small random model with well-spread landmark vertices.
    fn test_model(seed: u64, n_meshes: usize, n_vertices: usize) -> MorphableModel<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base: Vec<Point3<f64>> = (0..n_vertices)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-60.0..60.0),
                    rng.gen_range(-80.0..80.0),
                    rng.gen_range(-40.0..40.0),
                )
            })
            .collect();
        let corpus: Vec<Mesh<f64>> = (0..n_meshes)
            .map(|_| {
                let verts = base
                    .iter()
                    .map(|p| {
                        Point3::new(
                            p.x + rng.gen_range(-3.0..3.0),
                            p.y + rng.gen_range(-3.0..3.0),
                            p.z + rng.gen_range(-3.0..3.0),
                        )
                    })
                    .collect();
                Mesh::new(verts, None).unwrap()
            })
            .collect();
        MorphableModel::build(&corpus).unwrap()
    }

    fn test_mapping(n_landmarks: usize) -> LandmarkMapping {
        let entries: BTreeMap<String, usize> = (0..n_landmarks)
            .map(|i| (format!("lm_{i:02}"), i * 2))
            .collect();
        LandmarkMapping::new(entries).unwrap()
    }

    fn frame_from_projection(
        model: &MorphableModel<f64>,
        mapping: &LandmarkMapping,
        camera: &CameraMatrix<f64>,
        alpha: &ShapeCoefficients<f64>,
    ) -> FramePoints<f64> {
        let shape = model.synthesize_shape_vector(alpha);
        mapping
            .entries()
            .iter()
            .map(|(name, &v)| {
                let p = Point3::new(shape[3 * v], shape[3 * v + 1], shape[3 * v + 2]);
                (name.clone(), camera.project(&p))
            })
            .collect()
    }

    fn frontal_camera() -> CameraMatrix<f64> {
        CameraMatrix::from_rows([1.8, 0.0, 0.1, 320.0], [0.0, -1.8, 0.05, 240.0])
    }

    #[test]
    fn huge_sigma_shrinks_alpha_to_zero() {
        let model = test_model(1, 8, 30);
        let mapping = test_mapping(12);
        let mut alpha = ShapeCoefficients::zeros(model.component_count());
        alpha.alpha[0] = 1.5;
        let frame = frame_from_projection(&model, &mapping, &frontal_camera(), &alpha);
        let config = FitConfig {
            sigma2d: 1e12,
            components: None,
            alternations: 0,
        };
        let fitted = fit_frame(&model, &mapping, 0, &frame, &config).unwrap();
        assert!(fitted.coeffs.alpha.norm() <= 1e-6);
    }

    #[test]
    fn observed_mean_gives_zero_alpha() {
        let model = test_model(2, 8, 30);
        let mapping = test_mapping(12);
        let zero = ShapeCoefficients::zeros(model.component_count());
        let frame = frame_from_projection(&model, &mapping, &frontal_camera(), &zero);
        let fitted = fit_frame(&model, &mapping, 0, &frame, &FitConfig::default()).unwrap();
        assert!(fitted.coeffs.alpha.amax() <= 1e-9);
        assert!(fitted.residual <= 1e-12);
    }

    #[test]
    fn closed_form_matches_gradient_descent_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..10 {
            let model = test_model(100 + trial, 12, 30);
            let k = (rng.gen_range(1..=10usize)).min(model.component_count());
            let mapping = test_mapping(12);
            let camera = frontal_camera();
            let mut truth = ShapeCoefficients::zeros(k);
            for i in 0..k {
                truth.alpha[i] = rng.gen_range(-1.5..1.5);
            }
            let mut padded = ShapeCoefficients::zeros(model.component_count());
            for i in 0..k {
                padded.alpha[i] = truth.alpha[i];
            }
            let frame = frame_from_projection(&model, &mapping, &camera, &padded);
            let sigma2d = 4.0;
            let closed =
                solve_coefficients(&model, &mapping, &camera, &frame, sigma2d, k).unwrap();

            // Independent oracle: plain gradient descent on the objective with
            // a numerically estimated Lipschitz step.
            let (a, b, y) = linearized_design(&model, &mapping, &camera, &frame, k).unwrap();
            let lip = (a.transpose() * &a).norm() / sigma2d + 2.0;
            let step = 1.0 / lip;
            let mut x = DVector::<f64>::zeros(k);
            for _ in 0..20_000 {
                let grad = a.transpose() * (&a * &x + &b - &y) / sigma2d + &x * 2.0;
                let next = &x - &grad * step;
                if (&next - &x).amax() < 1e-13 {
                    x = next;
                    break;
                }
                x = next;
            }
            for i in 0..k {
                assert!(
                    (closed.alpha[i] - x[i]).abs() <= 1e-6,
                    "coefficient {i}: {} vs {}",
                    closed.alpha[i],
                    x[i]
                );
            }
        }
    }

    #[test]
    fn normal_equation_residual_is_tiny() {
        let model = test_model(4, 10, 30);
        let mapping = test_mapping(12);
        let camera = frontal_camera();
        let mut alpha = ShapeCoefficients::zeros(model.component_count());
        alpha.alpha[0] = 0.7;
        alpha.alpha[1] = -0.4;
        let frame = frame_from_projection(&model, &mapping, &camera, &alpha);
        let sigma2d = 9.0;
        let k = model.component_count();
        let solved = solve_coefficients(&model, &mapping, &camera, &frame, sigma2d, k).unwrap();
        let (a, b, y) = linearized_design(&model, &mapping, &camera, &frame, k).unwrap();
        let rhs = a.transpose() * (&y - &b);
        let mut normal = a.transpose() * &a;
        for i in 0..k {
            normal[(i, i)] += 2.0 * sigma2d;
        }
        let lhs = normal * &solved.alpha;
        assert!((lhs - &rhs).norm() <= 1e-8 * rhs.norm());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = test_model(5, 10, 30);
        let mapping = test_mapping(12);
        let camera = frontal_camera();
        let k = model.component_count().min(6);
        let mut truth = ShapeCoefficients::zeros(model.component_count());
        truth.alpha[0] = 0.9;
        let frame = frame_from_projection(&model, &mapping, &camera, &truth);
        let sigma2d = 9.0;
        let mut alpha = ShapeCoefficients::zeros(k);
        for i in 0..k {
            alpha.alpha[i] = rng.gen_range(-1.0..1.0);
        }
        let analytic =
            fit_gradient(&model, &mapping, &camera, &frame, sigma2d, &alpha).unwrap();
        let h = 1e-6;
        for i in 0..k {
            let mut plus = alpha.clone();
            plus.alpha[i] += h;
            let mut minus = alpha.clone();
            minus.alpha[i] -= h;
            let ep = fit_objective(&model, &mapping, &camera, &frame, sigma2d, &plus).unwrap();
            let em = fit_objective(&model, &mapping, &camera, &frame, sigma2d, &minus).unwrap();
            let fd = (ep - em) / (2.0 * h);
            let denom = analytic[i].abs().max(1e-8);
            assert!(
                (analytic[i] - fd).abs() / denom <= 1e-4,
                "component {i}: analytic {} vs fd {}",
                analytic[i],
                fd
            );
        }
    }

    #[test]
    fn objective_non_increasing_across_alternations() {
        let model = test_model(7, 10, 30);
        let mapping = test_mapping(12);
        let mut alpha = ShapeCoefficients::zeros(model.component_count());
        alpha.alpha[0] = 1.2;
        alpha.alpha[1] = -0.8;
        let frame = frame_from_projection(&model, &mapping, &frontal_camera(), &alpha);
        let mut last = f64::INFINITY;
        for alternations in 0..5 {
            let config = FitConfig {
                sigma2d: 9.0,
                components: None,
                alternations,
            };
            let fitted = fit_frame(&model, &mapping, 0, &frame, &config).unwrap();
            assert!(
                fitted.residual <= last + 1e-10,
                "objective increased at round {alternations}: {} -> {}",
                last,
                fitted.residual
            );
            last = fitted.residual;
        }
    }

    #[test]
    fn translation_equivariance_leaves_alpha_unchanged() {
        let model = test_model(8, 10, 30);
        let mapping = test_mapping(12);
        let mut alpha = ShapeCoefficients::zeros(model.component_count());
        alpha.alpha[0] = 0.6;
        let frame = frame_from_projection(&model, &mapping, &frontal_camera(), &alpha);
        let shifted: FramePoints<f64> = frame
            .iter()
            .map(|(n, p)| (n.clone(), Point2::new(p.x + 37.5, p.y - 12.25)))
            .collect();
        let config = FitConfig::default();
        let base = fit_frame(&model, &mapping, 0, &frame, &config).unwrap();
        let moved = fit_frame(&model, &mapping, 0, &shifted, &config).unwrap();
        assert!((base.coeffs.alpha - moved.coeffs.alpha).amax() <= 1e-9);
    }

    #[test]
    fn track_fitting_is_per_frame_independent() {
        let model = test_model(9, 10, 30);
        let mapping = test_mapping(12);
        let camera = frontal_camera();
        let mut frames = Vec::new();
        for i in 0..30u64 {
            let mut alpha = ShapeCoefficients::zeros(model.component_count());
            alpha.alpha[0] = (i as f64 / 30.0) - 0.5;
            frames.push(Frame {
                index: i,
                points: frame_from_projection(&model, &mapping, &camera, &alpha),
            });
        }
        let track = LandmarkTrack::new("t", frames).unwrap();
        let config = FitConfig::default();
        let fitted = fit_track(&model, &mapping, &track, &config);
        assert_eq!(fitted.len(), 30);
        for (frame, fit) in track.frames.iter().zip(&fitted) {
            let single = fit_frame(&model, &mapping, frame.index, &frame.points, &config).unwrap();
            let got = fit.result.as_ref().unwrap();
            assert_eq!(single.coeffs.alpha, got.coeffs.alpha);
            assert_eq!(single.residual.to_bits(), got.residual.to_bits());
        }
    }

    #[test]
    fn single_frame_track_gives_singleton() {
        let model = test_model(13, 8, 30);
        let mapping = test_mapping(12);
        let zero = ShapeCoefficients::zeros(model.component_count());
        let points = frame_from_projection(&model, &mapping, &frontal_camera(), &zero);
        let track = LandmarkTrack::new("one", vec![Frame { index: 5, points }]).unwrap();
        let fitted = fit_track(&model, &mapping, &track, &FitConfig::default());
        assert_eq!(fitted.len(), 1);
        assert_eq!(fitted[0].frame_index, 5);
        assert!(fitted[0].result.is_ok());
    }

    #[test]
    fn constant_track_gives_identical_coefficients() {
        let model = test_model(10, 8, 30);
        let mapping = test_mapping(12);
        let mut alpha = ShapeCoefficients::zeros(model.component_count());
        alpha.alpha[0] = 0.3;
        let points = frame_from_projection(&model, &mapping, &frontal_camera(), &alpha);
        let frames = (0..5u64)
            .map(|i| Frame {
                index: i,
                points: points.clone(),
            })
            .collect();
        let track = LandmarkTrack::new("const", frames).unwrap();
        let fitted = fit_track(&model, &mapping, &track, &FitConfig::default());
        let first = fitted[0].result.as_ref().unwrap();
        for f in &fitted[1..] {
            let cur = f.result.as_ref().unwrap();
            assert_eq!(first.coeffs.alpha, cur.coeffs.alpha);
        }
    }

    #[test]
    fn missing_landmark_is_reported() {
        let model = test_model(11, 8, 30);
        let mapping = test_mapping(12);
        let zero = ShapeCoefficients::zeros(model.component_count());
        let mut frame = frame_from_projection(&model, &mapping, &frontal_camera(), &zero);
        frame.remove("lm_03");
        let err = fit_frame(&model, &mapping, 0, &frame, &FitConfig::default()).unwrap_err();
        assert!(matches!(err, FitError::MissingLandmark { name } if name == "lm_03"));
    }

    #[test]
    fn animate_round_trips_coefficients() {
        let model = test_model(12, 8, 30);
        let mapping = test_mapping(12);
        let mut alpha = ShapeCoefficients::zeros(model.component_count());
        alpha.alpha[0] = 0.8;
        let frame = frame_from_projection(&model, &mapping, &frontal_camera(), &alpha);
        let fitted = fit_frame(&model, &mapping, 0, &frame, &FitConfig::default()).unwrap();
        let meshes = animate(&model, std::slice::from_ref(&fitted)).unwrap();
        assert_eq!(meshes.len(), 1);
        let reproj = model
            .project(&meshes[0], fitted.coeffs.len())
            .unwrap();
        assert!((reproj.alpha - fitted.coeffs.alpha).amax() <= 1e-10);
        assert!(animate(&model, &[]).unwrap().is_empty());
    }
}
