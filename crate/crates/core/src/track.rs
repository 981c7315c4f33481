//! 2D landmark tracks and landmark-to-vertex mappings.
//!
//! Tracks are stored as CSV with header `frame,name,x,y` (pixels, UTF-8,
//! LF or CRLF). Rows may appear in any order; frames are keyed by their
//! integer index and every frame must carry the same landmark-name set.
//! Mappings are JSON objects `{ "<name>": <vertex_index> }` with 0-based
//! indices.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Point2;
use thiserror::Error;

use crate::mesh::write_atomic;
use crate::scalar::{self, Real};

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed row: {text:?}")]
    Parse {
        path: PathBuf,
        line: usize,
        text: String,
    },
    #[error("{path}: missing or wrong header, expected `frame,name,x,y`")]
    Header { path: PathBuf },
    #[error("{path}:{line}: non-finite coordinate for {name:?}")]
    NonFinite {
        path: PathBuf,
        line: usize,
        name: String,
    },
    #[error("{path}:{line}: duplicate landmark {name:?} in frame {frame}")]
    Duplicate {
        path: PathBuf,
        line: usize,
        frame: u64,
        name: String,
    },
    #[error("frame {frame}: missing landmark {name:?} present in other frames")]
    MissingLandmark { frame: u64, name: String },
    #[error("track is empty")]
    Empty,
    #[error("mapping: vertex index {index} assigned to both {first:?} and {second:?}")]
    DuplicateVertex {
        index: usize,
        first: String,
        second: String,
    },
    #[error("mapping: vertex index {index} for {name:?} out of range (vertex count {vertex_count})")]
    VertexOutOfRange {
        name: String,
        index: usize,
        vertex_count: usize,
    },
    #[error("mapping: landmark {name:?} not present in track")]
    NameNotInTrack { name: String },
    #[error("invalid mapping json in {path}: {message}")]
    MappingJson { path: PathBuf, message: String },
}

/// One video frame: named 2D points in pixels.
pub type FramePoints<S> = BTreeMap<String, Point2<S>>;

/// A single frame of a track.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame<S: Real> {
    pub index: u64,
    pub points: FramePoints<S>,
}

/// Per-frame named 2D points for one video/sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkTrack<S: Real> {
    pub video_id: String,
    pub frames: Vec<Frame<S>>,
    pub frame_rate: Option<f64>,
}

impl<S: Real> LandmarkTrack<S> {
    /// Builds a track from frames, enforcing the shared-name-set and
    /// strictly-increasing-frame-index invariants. Frames are sorted by index.
    pub fn new(video_id: impl Into<String>, mut frames: Vec<Frame<S>>) -> Result<Self, TrackError> {
        if frames.is_empty() {
            return Err(TrackError::Empty);
        }
        frames.sort_by_key(|f| f.index);
        let names: BTreeSet<String> = frames
            .iter()
            .flat_map(|f| f.points.keys().cloned())
            .collect();
        for f in &frames {
            for name in &names {
                if !f.points.contains_key(name) {
                    return Err(TrackError::MissingLandmark {
                        frame: f.index,
                        name: name.clone(),
                    });
                }
            }
        }
        Ok(Self {
            video_id: video_id.into(),
            frames,
            frame_rate: None,
        })
    }

    /// The landmark-name set shared by all frames.
    pub fn landmark_names(&self) -> BTreeSet<&str> {
        match self.frames.first() {
            Some(f) => f.points.keys().map(String::as_str).collect(),
            None => BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Loads a landmark track from CSV. The video id defaults to the file stem.
pub fn load_landmark_track<S: Real>(path: impl AsRef<Path>) -> Result<LandmarkTrack<S>, TrackError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TrackError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let video_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "track".to_string());
    parse_landmark_csv(&text, path, video_id)
}

fn parse_landmark_csv<S: Real>(
    text: &str,
    path: &Path,
    video_id: String,
) -> Result<LandmarkTrack<S>, TrackError> {
    let mut frames: BTreeMap<u64, FramePoints<S>> = BTreeMap::new();
    let mut row_of: BTreeMap<(u64, String), usize> = BTreeMap::new();
    let mut header_seen = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() || row.trim_start().starts_with('#') {
            continue;
        }
        if !header_seen {
            let canonical: String = row.split(',').map(|c| c.trim().to_ascii_lowercase()).collect::<Vec<_>>().join(",");
            if canonical != "frame,name,x,y" {
                return Err(TrackError::Header {
                    path: path.to_path_buf(),
                });
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = row.split(',').map(str::trim).collect();
        let parse_err = || TrackError::Parse {
            path: path.to_path_buf(),
            line,
            text: row.to_string(),
        };
        if cols.len() != 4 {
            return Err(parse_err());
        }
        let frame: u64 = cols[0].parse().map_err(|_| parse_err())?;
        let name = cols[1].to_string();
        if name.is_empty() {
            return Err(parse_err());
        }
        let x: f64 = cols[2].parse().map_err(|_| parse_err())?;
        let y: f64 = cols[3].parse().map_err(|_| parse_err())?;
        if !x.is_finite() || !y.is_finite() {
            return Err(TrackError::NonFinite {
                path: path.to_path_buf(),
                line,
                name,
            });
        }
        if let Some(_prev) = row_of.insert((frame, name.clone()), line) {
            return Err(TrackError::Duplicate {
                path: path.to_path_buf(),
                line,
                frame,
                name,
            });
        }
        frames
            .entry(frame)
            .or_default()
            .insert(name, Point2::new(scalar::from_f64(x), scalar::from_f64(y)));
    }
    if !header_seen {
        return Err(TrackError::Header {
            path: path.to_path_buf(),
        });
    }
    let frames: Vec<Frame<S>> = frames
        .into_iter()
        .map(|(index, points)| Frame { index, points })
        .collect();
    LandmarkTrack::new(video_id, frames)
}

/// Writes a track as `frame,name,x,y` CSV with 17-significant-digit values.
pub fn save_landmark_track<S: Real>(
    path: impl AsRef<Path>,
    track: &LandmarkTrack<S>,
    header: &[String],
) -> Result<(), TrackError> {
    let path = path.as_ref();
    let mut body = String::new();
    for h in header {
        body.push_str("# ");
        body.push_str(h);
        body.push('\n');
    }
    body.push_str("frame,name,x,y\n");
    for frame in &track.frames {
        for (name, p) in &frame.points {
            body.push_str(&format!(
                "{},{},{},{}\n",
                frame.index,
                name,
                scalar::fmt17(p.x),
                scalar::fmt17(p.y)
            ));
        }
    }
    write_atomic(path, body.as_bytes()).map_err(|source| TrackError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Landmark-name-to-vertex-index mapping.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LandmarkMapping {
    entries: BTreeMap<String, usize>,
}

impl LandmarkMapping {
    /// Builds a mapping, rejecting duplicate vertex indices.
    pub fn new(entries: BTreeMap<String, usize>) -> Result<Self, TrackError> {
        let mut seen: BTreeMap<usize, &String> = BTreeMap::new();
        for (name, &ix) in &entries {
            if let Some(first) = seen.insert(ix, name) {
                return Err(TrackError::DuplicateVertex {
                    index: ix,
                    first: first.clone(),
                    second: name.clone(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &BTreeMap<String, usize> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vertex(&self, name: &str) -> Option<usize> {
        self.entries.get(name).copied()
    }

    /// Checks all vertex indices fall inside a model's vertex count.
    pub fn validate_for_vertex_count(&self, vertex_count: usize) -> Result<(), TrackError> {
        for (name, &index) in &self.entries {
            if index >= vertex_count {
                return Err(TrackError::VertexOutOfRange {
                    name: name.clone(),
                    index,
                    vertex_count,
                });
            }
        }
        Ok(())
    }

    /// Checks the mapping's name set is a subset of the track's names, i.e.
    /// every mapped landmark is observed in every frame.
    pub fn validate_against_track<S: Real>(&self, track: &LandmarkTrack<S>) -> Result<(), TrackError> {
        let names = track.landmark_names();
        for name in self.entries.keys() {
            if !names.contains(name.as_str()) {
                return Err(TrackError::NameNotInTrack { name: name.clone() });
            }
        }
        Ok(())
    }
}

/// Loads a mapping from the JSON object format.
pub fn load_mapping(path: impl AsRef<Path>) -> Result<LandmarkMapping, TrackError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TrackError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: BTreeMap<String, usize> =
        serde_json::from_str(&text).map_err(|e| TrackError::MappingJson {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    LandmarkMapping::new(raw)
}

/// Saves a mapping as pretty-printed JSON.
pub fn save_mapping(path: impl AsRef<Path>, mapping: &LandmarkMapping) -> Result<(), TrackError> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(&mapping.entries).expect("mapping serializes");
    write_atomic(path, format!("{json}\n").as_bytes()).map_err(|source| TrackError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write as _;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn two_frame_track_loads() {
        let f = write_tmp(
            "frame,name,x,y\n0,nose_tip,10,20\n0,chin,11,40\n1,nose_tip,10.5,20.5\n1,chin,11.5,40.5\n",
        );
        let t: LandmarkTrack<f64> = load_landmark_track(f.path()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.frames[0].points["nose_tip"], Point2::new(10.0, 20.0));
    }

    #[test]
    fn crlf_and_comments_accepted() {
        let f = write_tmp("# generated\r\nframe,name,x,y\r\n0,a,1,2\r\n0,b,3,4\r\n");
        let t: LandmarkTrack<f64> = load_landmark_track(f.path()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.frames[0].points.len(), 2);
    }

    #[test]
    fn missing_landmark_in_frame_reports_frame_and_name() {
        let f = write_tmp("frame,name,x,y\n0,nose_tip,1,2\n0,chin,3,4\n1,chin,3,4\n");
        let err = load_landmark_track::<f64>(f.path()).unwrap_err();
        match err {
            TrackError::MissingLandmark { frame, name } => {
                assert_eq!(frame, 1);
                assert_eq!(name, "nose_tip");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fifty_one_landmark_track_accepted() {
        let mut rows = String::from("frame,name,x,y\n");
        for frame in 0..2 {
            for i in 0..51 {
                rows.push_str(&format!("{frame},pt_{i:02},{}.5,{}.25\n", i, i * 2));
            }
        }
        let f = write_tmp(&rows);
        let t: LandmarkTrack<f64> = load_landmark_track(f.path()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.landmark_names().len(), 51);
    }

    #[test]
    fn duplicate_row_rejected() {
        let f = write_tmp("frame,name,x,y\n0,a,1,2\n0,a,1,3\n");
        assert!(matches!(
            load_landmark_track::<f64>(f.path()),
            Err(TrackError::Duplicate { .. })
        ));
    }

    #[test]
    fn bad_header_rejected() {
        let f = write_tmp("t,name,x,y\n0,a,1,2\n");
        assert!(matches!(
            load_landmark_track::<f64>(f.path()),
            Err(TrackError::Header { .. })
        ));
    }

    #[test]
    fn mapping_round_trip_and_validation() {
        let mut entries = BTreeMap::new();
        entries.insert("nose_tip".to_string(), 5usize);
        entries.insert("chin".to_string(), 7usize);
        let mapping = LandmarkMapping::new(entries).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.json");
        save_mapping(&path, &mapping).unwrap();
        let back = load_mapping(&path).unwrap();
        assert_eq!(mapping, back);
        assert!(back.validate_for_vertex_count(8).is_ok());
        assert!(matches!(
            back.validate_for_vertex_count(6),
            Err(TrackError::VertexOutOfRange { index: 7, .. })
        ));
    }

    #[test]
    fn duplicate_vertex_rejected() {
        let mut entries = BTreeMap::new();
        entries.insert("a".to_string(), 3usize);
        entries.insert("b".to_string(), 3usize);
        assert!(matches!(
            LandmarkMapping::new(entries),
            Err(TrackError::DuplicateVertex { index: 3, .. })
        ));
    }

    proptest! {
        // Row order within the file must not matter.
        #[test]
        fn row_permutation_insensitive(seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rows = [
                "0,a,1,2", "0,b,3,4", "1,a,5,6", "1,b,7,8", "2,a,9,10", "2,b,11,12",
            ];
            let baseline = {
                let text = format!("frame,name,x,y\n{}\n", rows.join("\n"));
                parse_landmark_csv::<f64>(&text, Path::new("t.csv"), "t".into()).unwrap()
            };
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            rows.shuffle(&mut rng);
            let text = format!("frame,name,x,y\n{}\n", rows.join("\n"));
            let shuffled = parse_landmark_csv::<f64>(&text, Path::new("t.csv"), "t".into()).unwrap();
            prop_assert_eq!(baseline, shuffled);
        }
    }
}
