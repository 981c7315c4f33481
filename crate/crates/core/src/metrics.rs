//! Anthropometric facial distances, indices and cohort classification.
//!
//! Thirteen landmark-pair distances feed twelve scale-free indices (each
//! `100 * numerator_distance / denominator_distance`). Per index, a cohort
//! is split into low/middle/high classes at the quartiles, values outside
//! the Tukey fences are flagged as outliers, and subjects whose value falls
//! inside a bootstrap confidence interval of a quartile get a boundary band
//! label (low-to-middle or middle-to-high).

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::write_atomic;
use crate::scalar::{self, Real};
use crate::track::FramePoints;

/// Canonical landmark names used by the default schema, the mouth-geometry
/// measurements and the synthetic generator.
pub mod landmark_names {
    pub const NASION: &str = "nasion";
    pub const GNATHION: &str = "gnathion";
    pub const ZYGION_LEFT: &str = "zygion_left";
    pub const ZYGION_RIGHT: &str = "zygion_right";
    pub const EXOCANTHION_LEFT: &str = "exocanthion_left";
    pub const EXOCANTHION_RIGHT: &str = "exocanthion_right";
    pub const ENDOCANTHION_LEFT: &str = "endocanthion_left";
    pub const ENDOCANTHION_RIGHT: &str = "endocanthion_right";
    pub const ALARE_LEFT: &str = "alare_left";
    pub const ALARE_RIGHT: &str = "alare_right";
    pub const SUBNASALE: &str = "subnasale";
    pub const PRONASALE: &str = "pronasale";
    pub const LABIALE_SUPERIUS: &str = "labiale_superius";
    pub const LABIALE_INFERIUS: &str = "labiale_inferius";
    pub const STOMION: &str = "stomion";
    pub const SUBLABIALE: &str = "sublabiale";
    pub const CHEILION_LEFT: &str = "cheilion_left";
    pub const CHEILION_RIGHT: &str = "cheilion_right";
    pub const INNER_LIP_CORNER_LEFT: &str = "inner_lip_corner_left";
    pub const INNER_LIP_CORNER_RIGHT: &str = "inner_lip_corner_right";
    pub const INNER_LIP_TOP_MID: &str = "inner_lip_top_mid";
    pub const INNER_LIP_BOTTOM_MID: &str = "inner_lip_bottom_mid";
}

pub const DISTANCE_COUNT: usize = 13;
pub const INDEX_COUNT: usize = 12;

/// `(numerator, denominator)` distance numbers for I1..I12, 1-based.
const INDEX_FORMULAS: [(usize, usize); INDEX_COUNT] = [
    (1, 2),   // I1  facial
    (4, 3),   // I2  intercanthal
    (6, 5),   // I3  nasal
    (5, 1),   // I4  nasofacial
    (6, 2),   // I5  nose/face width
    (7, 8),   // I6  lip area
    (7, 1),   // I7  vertical mouth height
    (9, 1),   // I8  upper lip thickness
    (10, 1),  // I9  lower lip thickness
    (8, 3),   // I10 mouth width
    (11, 1),  // I11 chin size
    (12, 13), // I12 nose to upper lip
];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("distance {distance}: landmark {name:?} missing")]
    MissingLandmark { distance: String, name: String },
    #[error("index {index}: denominator distance {distance} is zero")]
    ZeroDenominator { index: String, distance: String },
    #[error("schema must define exactly {DISTANCE_COUNT} distances D1..D13, got {0} entries")]
    WrongDistanceCount(usize),
    #[error("schema: bad or duplicate distance id {0:?}")]
    BadDistanceId(String),
    #[error("schema: distance {0} has identical endpoints")]
    IdenticalEndpoints(String),
    #[error("distance set is missing {0}")]
    MissingDistance(String),
    #[error("profile value for {index} is not finite and non-negative")]
    InvalidIndexValue { index: String },
    #[error("cohort classification needs at least 5 profiles, got {0}")]
    InsufficientCohort(usize),
    #[error("confidence must lie in (0, 1), got {0}")]
    BadConfidence(f64),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid schema json in {path}: {message}")]
    SchemaJson { path: PathBuf, message: String },
}

/// One distance definition: id `D1`..`D13` plus its two landmark endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceDef {
    pub id: String,
    pub a: String,
    pub b: String,
}

/// The 13 distance definitions, ordered D1..D13.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceSchema {
    entries: Vec<DistanceDef>,
}

impl DistanceSchema {
    /// Validates and orders a set of definitions.
    pub fn new(mut entries: Vec<DistanceDef>) -> Result<Self, MetricsError> {
        if entries.len() != DISTANCE_COUNT {
            return Err(MetricsError::WrongDistanceCount(entries.len()));
        }
        let mut seen = [false; DISTANCE_COUNT];
        for e in &entries {
            let n = distance_number(&e.id).ok_or_else(|| MetricsError::BadDistanceId(e.id.clone()))?;
            if seen[n - 1] {
                return Err(MetricsError::BadDistanceId(e.id.clone()));
            }
            seen[n - 1] = true;
            if e.a == e.b {
                return Err(MetricsError::IdenticalEndpoints(e.id.clone()));
            }
        }
        entries.sort_by_key(|e| distance_number(&e.id).unwrap());
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[DistanceDef] {
        &self.entries
    }
}

fn distance_number(id: &str) -> Option<usize> {
    let n: usize = id.strip_prefix('D')?.parse().ok()?;
    (1..=DISTANCE_COUNT).contains(&n).then_some(n)
}

impl Default for DistanceSchema {
    /// Standard anthropometric endpoints: face height (D1), bizygomatic
    /// width (D2), biocular and intercanthal widths (D3, D4), nose height
    /// and width (D5, D6), vertical mouth height (D7), mouth width (D8),
    /// upper/lower vermilion thickness (D9, D10), chin height (D11),
    /// nose-tip-to-upper-lip (D12) and upper face height (D13).
    fn default() -> Self {
        use landmark_names::*;
        let def = |id: &str, a: &str, b: &str| DistanceDef {
            id: id.into(),
            a: a.into(),
            b: b.into(),
        };
        Self::new(vec![
            def("D1", NASION, GNATHION),
            def("D2", ZYGION_RIGHT, ZYGION_LEFT),
            def("D3", EXOCANTHION_RIGHT, EXOCANTHION_LEFT),
            def("D4", ENDOCANTHION_RIGHT, ENDOCANTHION_LEFT),
            def("D5", NASION, SUBNASALE),
            def("D6", ALARE_RIGHT, ALARE_LEFT),
            def("D7", LABIALE_SUPERIUS, LABIALE_INFERIUS),
            def("D8", CHEILION_RIGHT, CHEILION_LEFT),
            def("D9", LABIALE_SUPERIUS, STOMION),
            def("D10", STOMION, LABIALE_INFERIUS),
            def("D11", SUBLABIALE, GNATHION),
            def("D12", PRONASALE, LABIALE_SUPERIUS),
            def("D13", NASION, STOMION),
        ])
        .expect("default schema is valid")
    }
}

/// Loads a schema from a JSON array of `{id, a, b}` records.
pub fn load_schema(path: impl AsRef<Path>) -> Result<DistanceSchema, MetricsError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let entries: Vec<DistanceDef> =
        serde_json::from_str(&text).map_err(|e| MetricsError::SchemaJson {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    DistanceSchema::new(entries)
}

/// Saves a schema as JSON.
pub fn save_schema(path: impl AsRef<Path>, schema: &DistanceSchema) -> Result<(), MetricsError> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(schema.entries()).expect("schema serializes");
    write_atomic(path, format!("{json}\n").as_bytes()).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// The 13 measured distances, indexed by distance number (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSet<S: Real> {
    values: [S; DISTANCE_COUNT],
}

impl<S: Real> DistanceSet<S> {
    pub fn get(&self, number: usize) -> S {
        self.values[number - 1]
    }

    pub fn values(&self) -> &[S; DISTANCE_COUNT] {
        &self.values
    }

    pub fn from_values(values: [S; DISTANCE_COUNT]) -> Self {
        Self { values }
    }
}

/// Euclidean distances for every schema entry, in the landmark units
/// (pixels for tracked frames).
pub fn compute_distances<S: Real>(
    landmarks: &FramePoints<S>,
    schema: &DistanceSchema,
) -> Result<DistanceSet<S>, MetricsError> {
    let mut values = [S::zero(); DISTANCE_COUNT];
    for (i, def) in schema.entries().iter().enumerate() {
        let pa = landmarks.get(&def.a).ok_or_else(|| MetricsError::MissingLandmark {
            distance: def.id.clone(),
            name: def.a.clone(),
        })?;
        let pb = landmarks.get(&def.b).ok_or_else(|| MetricsError::MissingLandmark {
            distance: def.id.clone(),
            name: def.b.clone(),
        })?;
        values[i] = (pa - pb).norm();
    }
    Ok(DistanceSet { values })
}

/// Per-subject index values I1..I12.
#[derive(Debug, Clone, PartialEq)]
pub struct FacialIndexProfile<S: Real> {
    pub subject_id: String,
    values: [S; INDEX_COUNT],
}

impl<S: Real> FacialIndexProfile<S> {
    /// Builds a profile, requiring finite non-negative values.
    pub fn new(subject_id: impl Into<String>, values: [S; INDEX_COUNT]) -> Result<Self, MetricsError> {
        for (i, v) in values.iter().enumerate() {
            if !scalar::is_finite(*v) || *v < S::zero() {
                return Err(MetricsError::InvalidIndexValue {
                    index: index_id(i),
                });
            }
        }
        Ok(Self {
            subject_id: subject_id.into(),
            values,
        })
    }

    /// Value of index `number` (1-based, 1..=12).
    pub fn get(&self, number: usize) -> S {
        self.values[number - 1]
    }

    pub fn values(&self) -> &[S; INDEX_COUNT] {
        &self.values
    }
}

/// `"I1"`..`"I12"` for a 0-based position.
pub fn index_id(position: usize) -> String {
    format!("I{}", position + 1)
}

/// Computes the twelve indices from a distance set:
/// `I = 100 * D_num / D_den` per the formula table.
pub fn compute_indices<S: Real>(
    subject_id: impl Into<String>,
    distances: &DistanceSet<S>,
) -> Result<FacialIndexProfile<S>, MetricsError> {
    let hundred = scalar::from_f64::<S>(100.0);
    let mut values = [S::zero(); INDEX_COUNT];
    for (i, &(num, den)) in INDEX_FORMULAS.iter().enumerate() {
        let d = distances.get(den);
        if d.is_zero() {
            return Err(MetricsError::ZeroDenominator {
                index: index_id(i),
                distance: format!("D{den}"),
            });
        }
        values[i] = hundred * distances.get(num) / d;
    }
    FacialIndexProfile::new(subject_id, values)
}

/// Convenience: distances then indices in one step.
pub fn profile_from_landmarks<S: Real>(
    subject_id: impl Into<String>,
    landmarks: &FramePoints<S>,
    schema: &DistanceSchema,
) -> Result<FacialIndexProfile<S>, MetricsError> {
    let distances = compute_distances(landmarks, schema)?;
    compute_indices(subject_id, &distances)
}

/// Core morphological class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoreClass {
    Low,
    Middle,
    High,
}

impl CoreClass {
    pub fn as_str(self) -> &'static str {
        match self {
            CoreClass::Low => "low",
            CoreClass::Middle => "middle",
            CoreClass::High => "high",
        }
    }
}

/// Boundary band for subjects near a quartile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryBand {
    LowToMiddle,
    MiddleToHigh,
}

impl BoundaryBand {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryBand::LowToMiddle => "low-to-middle",
            BoundaryBand::MiddleToHigh => "middle-to-high",
        }
    }
}

/// Classification of one subject for one index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassLabel {
    pub core: CoreClass,
    pub band: Option<BoundaryBand>,
    pub outlier: bool,
}

/// Per-index cohort statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexBoundaries<S: Real> {
    pub q1: S,
    pub q3: S,
    pub iqr: S,
    pub lower_fence: S,
    pub upper_fence: S,
    /// Bootstrap confidence interval for Q1 at the configured level.
    pub q1_interval: (S, S),
    /// Bootstrap confidence interval for Q3 at the configured level.
    pub q3_interval: (S, S),
}

/// Labels for one subject across all indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectClassification {
    pub subject_id: String,
    pub labels: [ClassLabel; INDEX_COUNT],
}

/// Full cohort classification result.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortClassification<S: Real> {
    pub boundaries: Vec<IndexBoundaries<S>>,
    pub subjects: Vec<SubjectClassification>,
}

/// Classification parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyConfig {
    /// Confidence level of the boundary bands.
    pub confidence: f64,
    /// Bootstrap resample count.
    pub bootstrap_samples: usize,
    /// Seed of the bootstrap generator.
    pub seed: u64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            confidence: 0.80,
            bootstrap_samples: 1000,
            seed: 42,
        }
    }
}

/// Type-7 quantile: linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
pub fn quantile_sorted<S: Real>(sorted: &[S], p: f64) -> S {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&p));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = scalar::from_f64::<S>(h - lo as f64);
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Classifies a cohort per index into low/middle/high with Tukey-fence
/// outlier flags and bootstrap boundary bands.
///
/// The bootstrap resamples the sorted value multiset, so the result is
/// invariant under permutations of the input profiles.
#[allow(clippy::needless_range_loop)]
pub fn classify_cohort<S: Real>(
    profiles: &[FacialIndexProfile<S>],
    config: &ClassifyConfig,
) -> Result<CohortClassification<S>, MetricsError> {
    if profiles.len() < 5 {
        return Err(MetricsError::InsufficientCohort(profiles.len()));
    }
    if !(config.confidence > 0.0 && config.confidence < 1.0) {
        return Err(MetricsError::BadConfidence(config.confidence));
    }
    let n = profiles.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut boundaries = Vec::with_capacity(INDEX_COUNT);
    let mut subject_labels: Vec<[ClassLabel; INDEX_COUNT]> = vec![
        [ClassLabel {
            core: CoreClass::Middle,
            band: None,
            outlier: false,
        }; INDEX_COUNT];
        n
    ];

    let half = scalar::from_f64::<S>(1.5);
    for index in 0..INDEX_COUNT {
        let mut sorted: Vec<S> = profiles.iter().map(|p| p.values[index]).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite index values"));
        let q1 = quantile_sorted(&sorted, 0.25);
        let q3 = quantile_sorted(&sorted, 0.75);
        let iqr = q3 - q1;
        let lower_fence = q1 - half * iqr;
        let upper_fence = q3 + half * iqr;

        // Bootstrap the quartiles from the sorted multiset.
        let b = config.bootstrap_samples;
        let mut q1_stats = Vec::with_capacity(b);
        let mut q3_stats = Vec::with_capacity(b);
        let mut resample = vec![S::zero(); n];
        for _ in 0..b {
            for slot in resample.iter_mut() {
                *slot = sorted[rng.gen_range(0..n)];
            }
            resample.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            q1_stats.push(quantile_sorted(&resample, 0.25));
            q3_stats.push(quantile_sorted(&resample, 0.75));
        }
        q1_stats.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        q3_stats.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let tail = (1.0 - config.confidence) / 2.0;
        let q1_interval = (
            quantile_sorted(&q1_stats, tail),
            quantile_sorted(&q1_stats, 1.0 - tail),
        );
        let q3_interval = (
            quantile_sorted(&q3_stats, tail),
            quantile_sorted(&q3_stats, 1.0 - tail),
        );

        for (s, profile) in profiles.iter().enumerate() {
            let v = profile.values[index];
            let core = if v < q1 {
                CoreClass::Low
            } else if v > q3 {
                CoreClass::High
            } else {
                CoreClass::Middle
            };
            let outlier = v < lower_fence || v > upper_fence;
            // Strict interior so degenerate (zero-width) intervals band nothing.
            let band = if v > q1_interval.0 && v < q1_interval.1 {
                Some(BoundaryBand::LowToMiddle)
            } else if v > q3_interval.0 && v < q3_interval.1 {
                Some(BoundaryBand::MiddleToHigh)
            } else {
                None
            };
            subject_labels[s][index] = ClassLabel {
                core,
                band,
                outlier,
            };
        }
        boundaries.push(IndexBoundaries {
            q1,
            q3,
            iqr,
            lower_fence,
            upper_fence,
            q1_interval,
            q3_interval,
        });
    }

    let subjects = profiles
        .iter()
        .zip(subject_labels)
        .map(|(p, labels)| SubjectClassification {
            subject_id: p.subject_id.clone(),
            labels,
        })
        .collect();
    Ok(CohortClassification {
        boundaries,
        subjects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point2;
    use proptest::prelude::*;
    use rand::Rng;

    fn synthetic_face_landmarks(scale: f64) -> FramePoints<f64> {
        use landmark_names::*;
        let mut m = FramePoints::new();
        let mut put = |name: &str, x: f64, y: f64| {
            m.insert(name.to_string(), Point2::new(x * scale, y * scale));
        };
        put(NASION, 0.0, 40.0);
        put(GNATHION, 0.5, -88.0);
        put(ZYGION_LEFT, -66.0, 8.0);
        put(ZYGION_RIGHT, 67.0, 9.0);
        put(EXOCANTHION_LEFT, -31.0, 31.0);
        put(EXOCANTHION_RIGHT, 31.0, 30.0);
        put(ENDOCANTHION_LEFT, -15.0, 30.0);
        put(ENDOCANTHION_RIGHT, 15.0, 29.5);
        put(ALARE_LEFT, -14.0, 2.0);
        put(ALARE_RIGHT, 14.0, 2.5);
        put(SUBNASALE, 0.0, -2.0);
        put(PRONASALE, 0.2, 6.0);
        put(LABIALE_SUPERIUS, 0.0, -31.0);
        put(LABIALE_INFERIUS, 0.0, -46.0);
        put(STOMION, 0.0, -38.0);
        put(SUBLABIALE, 0.0, -53.0);
        put(CHEILION_LEFT, -26.0, -38.0);
        put(CHEILION_RIGHT, 26.0, -38.5);
        m
    }

    #[test]
    fn pythagorean_distance() {
        use landmark_names::*;
        let mut m = synthetic_face_landmarks(1.0);
        m.insert(NASION.into(), Point2::new(0.0, 0.0));
        m.insert(GNATHION.into(), Point2::new(3.0, 4.0));
        let d = compute_distances(&m, &DistanceSchema::default()).unwrap();
        assert_eq!(d.get(1), 5.0);
    }

    #[test]
    fn coincident_endpoints_give_zero() {
        use landmark_names::*;
        let mut m = synthetic_face_landmarks(1.0);
        let p = m[LABIALE_SUPERIUS];
        m.insert(LABIALE_INFERIUS.into(), p);
        let d = compute_distances(&m, &DistanceSchema::default()).unwrap();
        assert_eq!(d.get(7), 0.0);
    }

    #[test]
    fn distances_match_per_pair_recomputation() {
        let m = synthetic_face_landmarks(1.0);
        let schema = DistanceSchema::default();
        let d = compute_distances(&m, &schema).unwrap();
        for (i, def) in schema.entries().iter().enumerate() {
            let a = m[&def.a];
            let b = m[&def.b];
            let expected = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
            assert_eq!(d.get(i + 1), expected, "{}", def.id);
        }
    }

    #[test]
    fn missing_endpoint_names_distance_and_landmark() {
        let mut m = synthetic_face_landmarks(1.0);
        m.remove(landmark_names::STOMION);
        let err = compute_distances(&m, &DistanceSchema::default()).unwrap_err();
        match err {
            MetricsError::MissingLandmark { distance, name } => {
                assert_eq!(distance, "D9");
                assert_eq!(name, landmark_names::STOMION);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn table_examples() {
        let mut values = [1.0f64; DISTANCE_COUNT];
        values[0] = 100.0; // D1
        values[1] = 125.0; // D2
        values[6] = 2.5; // D7
        values[7] = 2.5; // D8
        let profile = compute_indices("s", &DistanceSet::from_values(values)).unwrap();
        assert_eq!(profile.get(1), 80.0);
        assert_eq!(profile.get(6), 100.0);
    }

    #[test]
    fn indices_match_formula_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let mut values = [0.0f64; DISTANCE_COUNT];
            for v in &mut values {
                *v = rng.gen_range(0.5..200.0);
            }
            let d = DistanceSet::from_values(values);
            let profile = compute_indices("s", &d).unwrap();
            // Independent restatement of the formula table.
            let expect = [
                100.0 * values[0] / values[1],
                100.0 * values[3] / values[2],
                100.0 * values[5] / values[4],
                100.0 * values[4] / values[0],
                100.0 * values[5] / values[1],
                100.0 * values[6] / values[7],
                100.0 * values[6] / values[0],
                100.0 * values[8] / values[0],
                100.0 * values[9] / values[0],
                100.0 * values[7] / values[2],
                100.0 * values[10] / values[0],
                100.0 * values[11] / values[12],
            ];
            for (i, (got, want)) in profile.values().iter().zip(&expect).enumerate() {
                let rel = (got - want).abs() / want.abs();
                assert!(rel <= 1e-12, "I{} mismatch", i + 1);
            }
        }
    }

    #[test]
    fn zero_denominator_names_index() {
        let mut values = [1.0f64; DISTANCE_COUNT];
        values[1] = 0.0; // D2 feeds I1
        let err = compute_indices("s", &DistanceSet::from_values(values)).unwrap_err();
        match err {
            MetricsError::ZeroDenominator { index, distance } => {
                assert_eq!(index, "I1");
                assert_eq!(distance, "D2");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quantiles_match_hand_values() {
        let sorted: Vec<f64> = (1..=12).map(|v| v as f64).collect();
        assert_eq!(quantile_sorted(&sorted, 0.25), 3.75);
        assert_eq!(quantile_sorted(&sorted, 0.75), 9.25);
    }

    fn cohort_from_column(values: &[f64]) -> Vec<FacialIndexProfile<f64>> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                FacialIndexProfile::new(format!("s{i:02}"), [v; INDEX_COUNT]).unwrap()
            })
            .collect()
    }

    #[test]
    fn classify_1_to_12() {
        let values: Vec<f64> = (1..=12).map(|v| v as f64).collect();
        let cohort = cohort_from_column(&values);
        let result = classify_cohort(&cohort, &ClassifyConfig::default()).unwrap();
        assert_eq!(result.boundaries[0].q1, 3.75);
        assert_eq!(result.boundaries[0].q3, 9.25);
        for (i, s) in result.subjects.iter().enumerate() {
            let v = values[i];
            let expected = if v < 3.75 {
                CoreClass::Low
            } else if v > 9.25 {
                CoreClass::High
            } else {
                CoreClass::Middle
            };
            assert_eq!(s.labels[0].core, expected, "value {v}");
            assert!(!s.labels[0].outlier);
        }
    }

    #[test]
    fn degenerate_cohort_all_equal() {
        let cohort = cohort_from_column(&[7.5; 9]);
        let result = classify_cohort(&cohort, &ClassifyConfig::default()).unwrap();
        assert_eq!(result.boundaries[0].iqr, 0.0);
        for s in &result.subjects {
            assert_eq!(s.labels[0].core, CoreClass::Middle);
            assert!(!s.labels[0].outlier);
            assert!(s.labels[0].band.is_none());
        }
    }

    #[test]
    fn boundary_bands_mark_near_quartile_values() {
        let values: Vec<f64> = (1..=12).map(|v| v as f64).collect();
        let cohort = cohort_from_column(&values);
        let result = classify_cohort(&cohort, &ClassifyConfig::default()).unwrap();
        let b = &result.boundaries[0];
        let mut low_bands = 0usize;
        let mut high_bands = 0usize;
        for (i, s) in result.subjects.iter().enumerate() {
            let v = values[i];
            match s.labels[0].band {
                Some(BoundaryBand::LowToMiddle) => {
                    assert!(v > b.q1_interval.0 && v < b.q1_interval.1);
                    low_bands += 1;
                }
                Some(BoundaryBand::MiddleToHigh) => {
                    assert!(v > b.q3_interval.0 && v < b.q3_interval.1);
                    high_bands += 1;
                }
                None => {}
            }
        }
        // Values straddling the quartiles of 1..12 exist on both sides.
        assert!(low_bands > 0, "no low-to-middle bands near Q1");
        assert!(high_bands > 0, "no middle-to-high bands near Q3");
        // The extremes are confidently classified.
        assert!(result.subjects[0].labels[0].band.is_none());
        assert!(result.subjects[11].labels[0].band.is_none());
    }

    #[test]
    fn class_counts_partition_cohort() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let values: Vec<f64> = (0..27).map(|_| rng.gen_range(50.0..150.0)).collect();
        let cohort = cohort_from_column(&values);
        let result = classify_cohort(&cohort, &ClassifyConfig::default()).unwrap();
        for index in 0..INDEX_COUNT {
            let mut counts = [0usize; 3];
            for s in &result.subjects {
                counts[match s.labels[index].core {
                    CoreClass::Low => 0,
                    CoreClass::Middle => 1,
                    CoreClass::High => 2,
                }] += 1;
            }
            assert_eq!(counts.iter().sum::<usize>(), 27);
        }
    }

    #[test]
    fn outliers_match_fences_exactly() {
        let mut values: Vec<f64> = (50..=60).map(|v| v as f64).collect();
        values.push(500.0);
        values.push(0.5);
        let cohort = cohort_from_column(&values);
        let result = classify_cohort(&cohort, &ClassifyConfig::default()).unwrap();
        let b = &result.boundaries[0];
        for (i, s) in result.subjects.iter().enumerate() {
            let v = values[i];
            assert_eq!(
                s.labels[0].outlier,
                v < b.lower_fence || v > b.upper_fence,
                "value {v}"
            );
        }
        assert!(result.subjects[11].labels[0].outlier);
        assert!(result.subjects[12].labels[0].outlier);
    }

    #[test]
    fn insufficient_cohort_rejected() {
        let cohort = cohort_from_column(&[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            classify_cohort(&cohort, &ClassifyConfig::default()),
            Err(MetricsError::InsufficientCohort(4))
        ));
    }

    #[test]
    fn schema_json_round_trip() {
        let schema = DistanceSchema::default();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("schema.json");
        save_schema(&path, &schema).unwrap();
        let back = load_schema(&path).unwrap();
        assert_eq!(schema, back);
    }

    #[test]
    fn bad_schema_rejected() {
        let mut entries = DistanceSchema::default().entries().to_vec();
        entries[3].id = "D1".into();
        assert!(matches!(
            DistanceSchema::new(entries),
            Err(MetricsError::BadDistanceId(_))
        ));
        let mut entries = DistanceSchema::default().entries().to_vec();
        entries.pop();
        assert!(matches!(
            DistanceSchema::new(entries),
            Err(MetricsError::WrongDistanceCount(12))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        // Indices are ratios: uniform scaling of landmarks changes nothing.
        #[test]
        fn scale_invariance(scale in 0.01f64..100.0) {
            let base = synthetic_face_landmarks(1.0);
            let scaled = synthetic_face_landmarks(scale);
            let schema = DistanceSchema::default();
            let a = profile_from_landmarks("a", &base, &schema).unwrap();
            let b = profile_from_landmarks("b", &scaled, &schema).unwrap();
            for i in 0..INDEX_COUNT {
                let rel = (a.values()[i] - b.values()[i]).abs() / a.values()[i].abs();
                prop_assert!(rel <= 1e-12);
            }
        }

        // Classification must not depend on profile order.
        #[test]
        fn permutation_invariance(seed in 0u64..500) {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..9).map(|_| rng.gen_range(0.0..100.0)).collect();
            let config = ClassifyConfig { bootstrap_samples: 100, ..ClassifyConfig::default() };
            let cohort = cohort_from_column(&values);
            let base = classify_cohort(&cohort, &config).unwrap();
            let mut shuffled = cohort.clone();
            shuffled.shuffle(&mut rng);
            let permuted = classify_cohort(&shuffled, &config).unwrap();
            prop_assert_eq!(&base.boundaries, &permuted.boundaries);
            for s in &base.subjects {
                let other = permuted
                    .subjects
                    .iter()
                    .find(|o| o.subject_id == s.subject_id)
                    .unwrap();
                prop_assert_eq!(&s.labels, &other.labels);
            }
        }

        // Raising one subject's value never lowers its core class.
        #[test]
        fn monotone_in_own_value(seed in 0u64..200, bump in 0.1f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut values: Vec<f64> = (0..9).map(|_| rng.gen_range(0.0..100.0)).collect();
            let subject = (seed % 9) as usize;
            let config = ClassifyConfig { bootstrap_samples: 50, ..ClassifyConfig::default() };
            let cohort = cohort_from_column(&values);
            let before = classify_cohort(&cohort, &config).unwrap();
            values[subject] += bump;
            let cohort = cohort_from_column(&values);
            let after = classify_cohort(&cohort, &config).unwrap();
            let rank = |c: CoreClass| match c {
                CoreClass::Low => 0,
                CoreClass::Middle => 1,
                CoreClass::High => 2,
            };
            prop_assert!(
                rank(after.subjects[subject].labels[0].core)
                    >= rank(before.subjects[subject].labels[0].core)
            );
        }
    }
}
