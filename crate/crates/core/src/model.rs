//! PCA statistical shape model: construction from a mesh corpus, shape
//! synthesis and subspace projection.
//!
//! A model is the triple (mean shape, per-component standard deviations,
//! principal component matrix). A new shape is the mean plus the sum of
//! `alpha_i * sigma_i * v_i` over the leading components.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::mesh::{validate_correspondence, write_atomic, Mesh, MeshError};
use crate::scalar::{self, Real};

/// Components whose sigma falls below `sigma_1 * SIGMA_TRUNCATION` are
/// dropped at build time; they are numerically null directions.
pub const SIGMA_TRUNCATION: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("need at least 2 meshes to build a model, got {0}")]
    TooFewMeshes(usize),
    #[error("component count {requested} exceeds available {available}")]
    ComponentCountOutOfRange { requested: usize, available: usize },
    #[error("component {index} has zero standard deviation; cannot project onto it")]
    ZeroSigma { index: usize },
    #[error("mesh has {got} vertices, model expects {expected}")]
    VertexCountMismatch { got: usize, expected: usize },
    #[error("svd failed to converge")]
    SvdFailure,
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid model file: {message}")]
    Format { path: PathBuf, message: String },
}

/// Shape coefficients selecting a face in the model subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeCoefficients<S: Real> {
    pub alpha: DVector<S>,
}

impl<S: Real> ShapeCoefficients<S> {
    pub fn new(alpha: DVector<S>) -> Self {
        Self { alpha }
    }

    pub fn zeros(k: usize) -> Self {
        Self {
            alpha: DVector::zeros(k),
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// PCA shape model over a fixed-topology mesh corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphableModel<S: Real> {
    mean: DVector<S>,
    sigmas: DVector<S>,
    components: DMatrix<S>,
    vertex_count: usize,
    source_count: usize,
    faces: Option<Vec<[usize; 3]>>,
}

impl<S: Real> MorphableModel<S> {
    /// Builds the model from a corpus with vertex correspondence.
    ///
    /// The mean is the arithmetic mean of the flattened shape vectors;
    /// sigmas and components come from the sample covariance (divisor n-1),
    /// computed through an SVD of the centered data matrix. Component sign
    /// is fixed so each column's largest-magnitude entry is non-negative,
    /// and sigmas are sorted non-increasing.
    pub fn build(meshes: &[Mesh<S>]) -> Result<Self, ModelError> {
        if meshes.len() < 2 {
            return Err(ModelError::TooFewMeshes(meshes.len()));
        }
        validate_correspondence(meshes)?;
        let n = meshes.len();
        let dim = 3 * meshes[0].vertex_count();

        let mut data = DMatrix::<S>::zeros(dim, n);
        for (j, mesh) in meshes.iter().enumerate() {
            data.set_column(j, &mesh.to_shape_vector());
        }
        let inv_n = scalar::from_f64::<S>(1.0 / n as f64);
        let mut mean = DVector::<S>::zeros(dim);
        for j in 0..n {
            mean += data.column(j);
        }
        mean *= inv_n;
        let mut centered = data;
        for mut col in centered.column_iter_mut() {
            col -= &mean;
        }

        let svd = centered.svd(true, false);
        let u = svd.u.ok_or(ModelError::SvdFailure)?;
        let singular = svd.singular_values;

        // Keep at most n-1 components (rank bound of centered data) and drop
        // numerically null ones relative to the leading sigma.
        let max_components = (n - 1).min(singular.len());
        let inv_sqrt = scalar::from_f64::<S>(1.0 / ((n - 1) as f64).sqrt());
        let mut sigmas: Vec<S> = (0..max_components).map(|i| singular[i] * inv_sqrt).collect();
        let threshold = sigmas
            .first()
            .map(|&s0| s0 * scalar::from_f64(SIGMA_TRUNCATION))
            .unwrap_or_else(S::zero);
        let kept = sigmas.iter().take_while(|&&s| s >= threshold).count();
        sigmas.truncate(kept);
        if kept < max_components {
            log::warn!("model_truncated_components={}", max_components - kept);
        }
        if sigmas.iter().all(|s| s.is_zero()) {
            log::warn!("degenerate_corpus=true sigmas_all_zero=true");
        }

        let mut components = DMatrix::<S>::zeros(dim, kept);
        for j in 0..kept {
            components.set_column(j, &u.column(j));
        }
        fix_component_signs(&mut components);

        Ok(Self {
            mean,
            sigmas: DVector::from_vec(sigmas),
            components,
            vertex_count: dim / 3,
            source_count: n,
            faces: meshes[0].faces().map(|f| f.to_vec()),
        })
    }

    pub fn mean(&self) -> &DVector<S> {
        &self.mean
    }

    pub fn sigmas(&self) -> &DVector<S> {
        &self.sigmas
    }

    pub fn components(&self) -> &DMatrix<S> {
        &self.components
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Number of meshes the model was built from (n in the sigma bound n-1).
    pub fn source_count(&self) -> usize {
        self.source_count
    }

    /// Number of retained principal components.
    pub fn component_count(&self) -> usize {
        self.components.ncols()
    }

    pub fn faces(&self) -> Option<&[[usize; 3]]> {
        self.faces.as_deref()
    }

    /// The mean head as a mesh with the model's reference topology.
    pub fn mean_mesh(&self) -> Mesh<S> {
        Mesh::from_shape_vector(&self.mean, self.faces.clone()).expect("mean is finite")
    }

    /// Generates a head: mean plus the coefficient-weighted components.
    pub fn synthesize(&self, coeffs: &ShapeCoefficients<S>) -> Result<Mesh<S>, ModelError> {
        let k = coeffs.len();
        if k > self.component_count() {
            return Err(ModelError::ComponentCountOutOfRange {
                requested: k,
                available: self.component_count(),
            });
        }
        let shape = self.synthesize_shape_vector(coeffs);
        Ok(Mesh::from_shape_vector(&shape, self.faces.clone())?)
    }

    /// Flat shape vector variant of [`Self::synthesize`].
    pub fn synthesize_shape_vector(&self, coeffs: &ShapeCoefficients<S>) -> DVector<S> {
        let k = coeffs.len();
        // alpha = 0 must reproduce the mean bit-for-bit, so skip the matvec
        // when every term vanishes.
        if (0..k).all(|i| (coeffs.alpha[i] * self.sigmas[i]).is_zero()) {
            return self.mean.clone();
        }
        let weighted = DVector::from_iterator(k, (0..k).map(|i| coeffs.alpha[i] * self.sigmas[i]));
        &self.mean + self.components.columns(0, k) * weighted
    }

    /// Projects a mesh onto the leading `k` components:
    /// `alpha_i = v_i^T (s - mean) / sigma_i`.
    pub fn project(&self, mesh: &Mesh<S>, k: usize) -> Result<ShapeCoefficients<S>, ModelError> {
        if mesh.vertex_count() != self.vertex_count {
            return Err(ModelError::VertexCountMismatch {
                got: mesh.vertex_count(),
                expected: self.vertex_count,
            });
        }
        if k > self.component_count() {
            return Err(ModelError::ComponentCountOutOfRange {
                requested: k,
                available: self.component_count(),
            });
        }
        for i in 0..k {
            if self.sigmas[i].is_zero() {
                return Err(ModelError::ZeroSigma { index: i });
            }
        }
        let centered = mesh.to_shape_vector() - &self.mean;
        let mut alpha = DVector::<S>::zeros(k);
        for i in 0..k {
            alpha[i] = self.components.column(i).dot(&centered) / self.sigmas[i];
        }
        Ok(ShapeCoefficients::new(alpha))
    }

    /// Builds a model directly from its parts (used by the loader and tests).
    pub fn from_parts(
        mean: DVector<S>,
        sigmas: DVector<S>,
        components: DMatrix<S>,
        source_count: usize,
        faces: Option<Vec<[usize; 3]>>,
    ) -> Self {
        assert_eq!(mean.len() % 3, 0);
        assert_eq!(components.nrows(), mean.len());
        assert_eq!(components.ncols(), sigmas.len());
        Self {
            vertex_count: mean.len() / 3,
            source_count,
            mean,
            sigmas,
            components,
            faces,
        }
    }
}

/// Makes each column's largest-magnitude entry non-negative, deterministically.
fn fix_component_signs<S: Real>(components: &mut DMatrix<S>) {
    for mut col in components.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = S::zero();
        for (i, &v) in col.iter().enumerate() {
            let a = v.abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if col[best] < S::zero() {
            col.neg_mut();
        }
    }
}

/// Saves a model in the textual format: `#` comment header lines, a size
/// line `3N C N` (rows, retained components, vertex count), then mean,
/// sigmas and components in column-major order, one value per line at
/// 17 significant digits.
pub fn save_model<S: Real>(
    path: impl AsRef<Path>,
    model: &MorphableModel<S>,
    header: &[String],
) -> Result<(), ModelError> {
    let path = path.as_ref();
    let mut body = String::new();
    for h in header {
        body.push_str("# ");
        body.push_str(h);
        body.push('\n');
    }
    let dim = model.mean.len();
    let c = model.component_count();
    body.push_str(&format!("{} {} {}\n", dim, c, model.vertex_count));
    for v in model.mean.iter() {
        body.push_str(&scalar::fmt17(*v));
        body.push('\n');
    }
    for s in model.sigmas.iter() {
        body.push_str(&scalar::fmt17(*s));
        body.push('\n');
    }
    for j in 0..c {
        for i in 0..dim {
            body.push_str(&scalar::fmt17(model.components[(i, j)]));
            body.push('\n');
        }
    }
    write_atomic(path, body.as_bytes()).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a model saved by [`save_model`]. Reference topology is not part of
/// the format, so loaded models synthesize face-free meshes.
pub fn load_model<S: Real>(path: impl AsRef<Path>) -> Result<MorphableModel<S>, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let format_err = |message: String| ModelError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut tokens = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.split_whitespace());
    let mut next_usize = |what: &str| -> Result<usize, ModelError> {
        tokens
            .next()
            .ok_or_else(|| format_err(format!("missing {what}")))?
            .parse()
            .map_err(|_| format_err(format!("invalid {what}")))
    };
    let dim = next_usize("row count")?;
    let c = next_usize("component count")?;
    let vertex_count = next_usize("vertex count")?;
    if dim != 3 * vertex_count {
        return Err(format_err(format!(
            "row count {dim} is not 3 * vertex count {vertex_count}"
        )));
    }
    let expected = dim + c + dim * c;
    let mut values = Vec::with_capacity(expected);
    for tok in tokens {
        let v: f64 = tok
            .parse()
            .map_err(|_| format_err(format!("invalid value {tok:?}")))?;
        values.push(scalar::from_f64::<S>(v));
    }
    if values.len() != expected {
        return Err(format_err(format!(
            "expected {expected} values, found {}",
            values.len()
        )));
    }
    let mean = DVector::from_row_slice(&values[..dim]);
    let sigmas = DVector::from_row_slice(&values[dim..dim + c]);
    let components = DMatrix::from_column_slice(dim, c, &values[dim + c..]);
    Ok(MorphableModel::from_parts(
        mean,
        sigmas,
        components,
        c + 1,
        None,
    ))
}
