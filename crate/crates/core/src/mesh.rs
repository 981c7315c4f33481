//! Fixed-topology triangle meshes and the OBJ subset they are stored in.
//!
//! Only `v x y z` and `f i j k` lines (1-based indices) are honored when
//! loading; everything else is counted and skipped so FaceGen-style exports
//! with texture/normal data still load. Vertex order is preserved exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::Point3;
use thiserror::Error;

use crate::scalar::{self, Real};

/// Errors raised by mesh loading, saving and validation.
#[derive(Debug, Error)]
pub enum MeshError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed {kind} line: {text:?}")]
    Parse {
        path: PathBuf,
        line: usize,
        kind: &'static str,
        text: String,
    },
    #[error("{path}:{line}: non-finite coordinate")]
    NonFinite { path: PathBuf, line: usize },
    #[error("{path}:{line}: face index {index} out of range (vertex count {vertex_count})")]
    FaceIndexOutOfRange {
        path: PathBuf,
        line: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("correspondence requires at least 2 meshes, got {0}")]
    TooFewMeshes(usize),
    #[error("mesh {index}: vertex count {got} differs from mesh 0 ({expected})")]
    VertexCountMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("mesh {index}: face list differs from mesh 0")]
    FaceMismatch { index: usize },
}

/// 3D face geometry with optional triangle connectivity.
///
/// Vertex correspondence across a dataset is positional: vertex `i` means
/// the same anatomical point in every mesh of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<S: Real> {
    vertices: Vec<Point3<S>>,
    faces: Option<Vec<[usize; 3]>>,
}

impl<S: Real> Mesh<S> {
    /// Builds a mesh, checking coordinate finiteness and face index range.
    pub fn new(vertices: Vec<Point3<S>>, faces: Option<Vec<[usize; 3]>>) -> Result<Self, MeshError> {
        let n = vertices.len();
        for (i, v) in vertices.iter().enumerate() {
            if !v.coords.iter().all(|&c| scalar::is_finite(c)) {
                return Err(MeshError::NonFinite {
                    path: PathBuf::new(),
                    line: i + 1,
                });
            }
        }
        if let Some(fs) = &faces {
            for f in fs {
                for &ix in f {
                    if ix >= n {
                        return Err(MeshError::FaceIndexOutOfRange {
                            path: PathBuf::new(),
                            line: 0,
                            index: ix,
                            vertex_count: n,
                        });
                    }
                }
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Point3<S>] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &Point3<S> {
        &self.vertices[i]
    }

    pub fn faces(&self) -> Option<&[[usize; 3]]> {
        self.faces.as_deref()
    }

    /// Flattens the geometry to the `(x1,y1,z1,...,xN,yN,zN)` shape vector.
    pub fn to_shape_vector(&self) -> nalgebra::DVector<S> {
        let mut out = nalgebra::DVector::zeros(3 * self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            out[3 * i] = v.x;
            out[3 * i + 1] = v.y;
            out[3 * i + 2] = v.z;
        }
        out
    }

    /// Rebuilds a mesh from a flat shape vector, reusing `faces` as topology.
    pub fn from_shape_vector(
        shape: &nalgebra::DVector<S>,
        faces: Option<Vec<[usize; 3]>>,
    ) -> Result<Self, MeshError> {
        assert_eq!(shape.len() % 3, 0, "shape vector length must be 3N");
        let vertices = (0..shape.len() / 3)
            .map(|i| Point3::new(shape[3 * i], shape[3 * i + 1], shape[3 * i + 2]))
            .collect();
        Mesh::new(vertices, faces)
    }
}

/// Result of loading an OBJ file: the mesh plus the count of skipped lines.
#[derive(Debug, Clone)]
pub struct LoadedMesh<S: Real> {
    pub mesh: Mesh<S>,
    /// Number of non-empty lines ignored by the OBJ subset parser.
    pub skipped_lines: usize,
}

/// Loads a mesh from the OBJ subset. Vertex order is file order.
pub fn load_mesh<S: Real>(path: impl AsRef<Path>) -> Result<Mesh<S>, MeshError> {
    load_mesh_detailed(path).map(|l| l.mesh)
}

/// Like [`load_mesh`] but also reports how many lines were skipped.
pub fn load_mesh_detailed<S: Real>(path: impl AsRef<Path>) -> Result<LoadedMesh<S>, MeshError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |line: usize, kind: &'static str, text: &str| MeshError::Parse {
        path: path.to_path_buf(),
        line,
        kind,
        text: text.to_string(),
    };

    let mut vertices: Vec<Point3<S>> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut skipped = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut coord = [0.0f64; 3];
                for c in &mut coord {
                    let tok = parts.next().ok_or_else(|| parse_err(line, "v", raw))?;
                    *c = tok.parse().map_err(|_| parse_err(line, "v", raw))?;
                }
                if parts.next().is_some() {
                    return Err(parse_err(line, "v", raw));
                }
                if !coord.iter().all(|c| c.is_finite()) {
                    return Err(MeshError::NonFinite {
                        path: path.to_path_buf(),
                        line,
                    });
                }
                vertices.push(Point3::new(
                    scalar::from_f64(coord[0]),
                    scalar::from_f64(coord[1]),
                    scalar::from_f64(coord[2]),
                ));
            }
            Some("f") => {
                let mut ixs = [0usize; 3];
                for ix in &mut ixs {
                    let tok = parts.next().ok_or_else(|| parse_err(line, "f", raw))?;
                    // Accept `f v/vt/vn` forms by using the vertex part only.
                    let vtok = tok.split('/').next().unwrap_or(tok);
                    let one_based: usize = vtok.parse().map_err(|_| parse_err(line, "f", raw))?;
                    if one_based == 0 {
                        return Err(parse_err(line, "f", raw));
                    }
                    *ix = one_based - 1;
                }
                if parts.next().is_some() {
                    // Only triangles are supported; quads etc. are a parse error
                    // rather than a silent skip, since topology matters downstream.
                    return Err(parse_err(line, "f", raw));
                }
                for &ix in &ixs {
                    if ix >= vertices.len() {
                        return Err(MeshError::FaceIndexOutOfRange {
                            path: path.to_path_buf(),
                            line,
                            index: ix,
                            vertex_count: vertices.len(),
                        });
                    }
                }
                faces.push(ixs);
            }
            _ => skipped += 1,
        }
    }
    let faces = if faces.is_empty() { None } else { Some(faces) };
    let mesh = Mesh::new(vertices, faces)?;
    if skipped > 0 {
        log::warn!("obj_skipped_lines={} path={}", skipped, path.display());
    }
    Ok(LoadedMesh {
        mesh,
        skipped_lines: skipped,
    })
}

/// Writes a mesh in the OBJ subset with 17-significant-digit coordinates.
///
/// `header` lines are emitted first as `#` comments.
pub fn save_mesh<S: Real>(
    path: impl AsRef<Path>,
    mesh: &Mesh<S>,
    header: &[String],
) -> Result<(), MeshError> {
    let path = path.as_ref();
    let io_err = |source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut body = String::new();
    for h in header {
        body.push_str("# ");
        body.push_str(h);
        body.push('\n');
    }
    for v in mesh.vertices() {
        body.push_str(&format!(
            "v {} {} {}\n",
            scalar::fmt17(v.x),
            scalar::fmt17(v.y),
            scalar::fmt17(v.z)
        ));
    }
    if let Some(faces) = mesh.faces() {
        for f in faces {
            body.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
        }
    }
    write_atomic(path, body.as_bytes()).map_err(io_err)
}

/// Writes `bytes` to `path` via a temp file + rename in the same directory,
/// so readers never observe partial output.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), std::io::Error> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Checks that all meshes share vertex count and (when present) face lists.
///
/// Face lists must be identical across meshes that carry them; a mix of
/// face-bearing and face-free meshes is allowed as long as the face-bearing
/// ones agree.
pub fn validate_correspondence<S: Real>(meshes: &[Mesh<S>]) -> Result<(), MeshError> {
    if meshes.len() < 2 {
        return Err(MeshError::TooFewMeshes(meshes.len()));
    }
    let expected = meshes[0].vertex_count();
    for (index, m) in meshes.iter().enumerate().skip(1) {
        if m.vertex_count() != expected {
            return Err(MeshError::VertexCountMismatch {
                index,
                got: m.vertex_count(),
                expected,
            });
        }
    }
    let mut reference: Option<(usize, &[[usize; 3]])> = None;
    for (index, m) in meshes.iter().enumerate() {
        if let Some(faces) = m.faces() {
            match reference {
                None => reference = Some((index, faces)),
                Some((_, ref_faces)) => {
                    if faces != ref_faces {
                        return Err(MeshError::FaceMismatch { index });
                    }
                }
            }
        }
    }
    Ok(())
}
