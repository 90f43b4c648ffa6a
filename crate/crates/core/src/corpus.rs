//! Normalized corpus format: one JSON record per line,
//!
//! ```text
//! {"track_id": "...", "year": 1994, "beats": [{"chroma": [12], "timbre": [12], "loudness_db": -12.5}, ...]}
//! ```
//!
//! Parsing never panics on arbitrary bytes. Every invalid record is reported
//! with its 1-based line number; in [`IngestMode::Lenient`] the offending
//! track is dropped whole, in [`IngestMode::Strict`] the parse fails.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DESCRIPTOR_DIM: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatDescriptor {
    /// Relative pitch-class energies, C first.
    pub chroma: [f64; DESCRIPTOR_DIM],
    pub timbre: [f64; DESCRIPTOR_DIM],
    /// Loudness in dBFS, always ≤ 0.
    pub loudness_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub track_id: String,
    pub year: i32,
    pub beats: Vec<BeatDescriptor>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.beats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beats.is_empty()
    }
}

/// How to treat invalid records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IngestMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecordErrorKind {
    Encoding,
    Syntax(String),
    EmptyTrackId,
    /// Track ids end up as single lines in sample files.
    ControlCharInTrackId,
    DuplicateTrackId {
        first_line: usize,
    },
    EmptyBeats,
    WrongLength {
        field: String,
        len: usize,
    },
    OutOfRange {
        field: String,
        value: f64,
    },
}

impl fmt::Display for RecordErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordErrorKind::Encoding => write!(f, "line is not valid UTF-8"),
            RecordErrorKind::Syntax(msg) => write!(f, "malformed record: {msg}"),
            RecordErrorKind::EmptyTrackId => write!(f, "empty track_id"),
            RecordErrorKind::ControlCharInTrackId => {
                write!(f, "track_id contains control characters")
            }
            RecordErrorKind::DuplicateTrackId { first_line } => {
                write!(f, "duplicate track_id (first seen on line {first_line})")
            }
            RecordErrorKind::EmptyBeats => write!(f, "empty beat list"),
            RecordErrorKind::WrongLength { field, len } => {
                write!(f, "{field} has {len} entries, expected {DESCRIPTOR_DIM}")
            }
            RecordErrorKind::OutOfRange { field, value } => {
                write!(f, "{field} out of range: {value}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct RecordError {
    pub line: usize,
    pub track_id: Option<String>,
    pub kind: RecordErrorKind,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{} invalid record(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<RecordError>),
    #[error("corpus contains no tracks")]
    Empty,
    #[error("window must be odd and ≥ 1, got {0}")]
    InvalidWindow(i64),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeat {
    chroma: Vec<f64>,
    timbre: Vec<f64>,
    loudness_db: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrack {
    track_id: String,
    year: i32,
    beats: Vec<RawBeat>,
}

/// Immutable set of tracks in canonical order (ascending `track_id`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    tracks: Vec<Track>,
    year_index: BTreeMap<i32, Vec<usize>>,
}

/// Result of a parse: the corpus plus whatever was skipped in lenient mode.
#[derive(Debug)]
pub struct ParsedCorpus {
    pub corpus: Corpus,
    pub skipped: Vec<RecordError>,
}

impl Corpus {
    /// Builds a corpus from already-validated tracks.
    pub fn from_tracks(tracks: Vec<Track>) -> Result<Self, CorpusError> {
        let mut errors = Vec::new();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, t) in tracks.iter().enumerate() {
            if let Err(kind) = validate_track(t) {
                errors.push(RecordError {
                    line: i + 1,
                    track_id: Some(t.track_id.clone()),
                    kind,
                });
            } else if let Some(first) = seen.insert(&t.track_id, i + 1) {
                errors.push(RecordError {
                    line: i + 1,
                    track_id: Some(t.track_id.clone()),
                    kind: RecordErrorKind::DuplicateTrackId { first_line: first },
                });
            }
        }
        if !errors.is_empty() {
            return Err(CorpusError::Invalid(errors));
        }
        Ok(Self::assemble(tracks))
    }

    fn assemble(mut tracks: Vec<Track>) -> Self {
        tracks.sort_by(|a, b| a.track_id.cmp(&b.track_id));
        let mut year_index: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        for (i, t) in tracks.iter().enumerate() {
            year_index.entry(t.year).or_default().push(i);
        }
        Corpus { tracks, year_index }
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Track indices per year; within a year indices follow `track_id` order.
    pub fn year_index(&self) -> &BTreeMap<i32, Vec<usize>> {
        &self.year_index
    }

    pub fn track(&self, track_id: &str) -> Option<&Track> {
        self.tracks
            .binary_search_by(|t| t.track_id.as_str().cmp(track_id))
            .ok()
            .map(|i| &self.tracks[i])
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn num_tracks(&self) -> usize {
        self.tracks.len()
    }

    pub fn num_beats(&self) -> usize {
        self.tracks.iter().map(Track::len).sum()
    }

    pub fn year_range(&self) -> Option<(i32, i32)> {
        let first = *self.year_index.keys().next()?;
        let last = *self.year_index.keys().next_back()?;
        Some((first, last))
    }

    /// Indices of tracks whose year lies in `[lo, hi]`, year-major then by
    /// `track_id`.
    pub fn tracks_in_years(&self, lo: i32, hi: i32) -> Vec<usize> {
        if lo > hi {
            return Vec::new();
        }
        self.year_index
            .range(lo..=hi)
            .flat_map(|(_, ids)| ids.iter().copied())
            .collect()
    }

    /// Every central year whose window `[y - h, y + h]`, `h = (window - 1) / 2`,
    /// contains at least one track.
    pub fn years_available(&self, window: i64) -> Result<Vec<i32>, CorpusError> {
        let half = half_window(window)?;
        let Some((first, last)) = self.year_range() else {
            return Ok(Vec::new());
        };
        Ok(((first - half)..=(last + half))
            .filter(|&y| {
                self.year_index
                    .range((y - half)..=(y + half))
                    .next()
                    .is_some()
            })
            .collect())
    }

    /// Canonical newline-delimited serialization.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for t in &self.tracks {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }

    /// SHA-256 of the canonical serialization. Two corpora with equal tracks
    /// hash equally regardless of the line order they were read from.
    pub fn content_hash(&self) -> String {
        crate::io::content_hash(&self.to_bytes())
    }
}

pub(crate) fn half_window(window: i64) -> Result<i32, CorpusError> {
    if window < 1 || window % 2 == 0 || window > i32::MAX as i64 {
        return Err(CorpusError::InvalidWindow(window));
    }
    Ok(((window - 1) / 2) as i32)
}

fn validate_track(t: &Track) -> Result<(), RecordErrorKind> {
    if t.track_id.is_empty() {
        return Err(RecordErrorKind::EmptyTrackId);
    }
    if t.track_id.chars().any(char::is_control) {
        return Err(RecordErrorKind::ControlCharInTrackId);
    }
    if t.beats.is_empty() {
        return Err(RecordErrorKind::EmptyBeats);
    }
    for (b, beat) in t.beats.iter().enumerate() {
        for (j, &v) in beat.chroma.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(RecordErrorKind::OutOfRange {
                    field: format!("beats[{b}].chroma[{j}]"),
                    value: v,
                });
            }
        }
        for (j, &v) in beat.timbre.iter().enumerate() {
            if !v.is_finite() {
                return Err(RecordErrorKind::OutOfRange {
                    field: format!("beats[{b}].timbre[{j}]"),
                    value: v,
                });
            }
        }
        if !beat.loudness_db.is_finite() || beat.loudness_db > 0.0 {
            return Err(RecordErrorKind::OutOfRange {
                field: format!("beats[{b}].loudness_db"),
                value: beat.loudness_db,
            });
        }
    }
    Ok(())
}

fn to_array(field: &str, b: usize, v: Vec<f64>) -> Result<[f64; DESCRIPTOR_DIM], RecordErrorKind> {
    let len = v.len();
    v.try_into().map_err(|_| RecordErrorKind::WrongLength {
        field: format!("beats[{b}].{field}"),
        len,
    })
}

fn parse_line(line: &[u8]) -> Result<Track, (Option<String>, RecordErrorKind)> {
    let text = std::str::from_utf8(line).map_err(|_| (None, RecordErrorKind::Encoding))?;
    let raw: RawTrack =
        serde_json::from_str(text).map_err(|e| (None, RecordErrorKind::Syntax(e.to_string())))?;
    let id = raw.track_id.clone();
    let beats = raw
        .beats
        .into_iter()
        .enumerate()
        .map(|(b, rb)| {
            Ok(BeatDescriptor {
                chroma: to_array("chroma", b, rb.chroma)?,
                timbre: to_array("timbre", b, rb.timbre)?,
                loudness_db: rb.loudness_db,
            })
        })
        .collect::<Result<Vec<_>, RecordErrorKind>>()
        .map_err(|k| (Some(id.clone()), k))?;
    let track = Track {
        track_id: raw.track_id,
        year: raw.year,
        beats,
    };
    validate_track(&track).map_err(|k| (Some(id), k))?;
    Ok(track)
}

/// Parses newline-delimited records. Blank lines are ignored.
pub fn parse_corpus(input: &[u8], mode: IngestMode) -> Result<ParsedCorpus, CorpusError> {
    let lines: Vec<(usize, &[u8])> = input
        .split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix(b"\r").unwrap_or(l)))
        .filter(|(_, l)| !l.iter().all(u8::is_ascii_whitespace))
        .collect();

    let parsed: Vec<(usize, Result<Track, (Option<String>, RecordErrorKind)>)> =
        lines.par_iter().map(|&(n, l)| (n, parse_line(l))).collect();

    let mut errors = Vec::new();
    let mut tracks = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (line, res) in parsed {
        match res {
            Ok(t) => {
                if let Some(&first_line) = seen.get(&t.track_id) {
                    errors.push(RecordError {
                        line,
                        track_id: Some(t.track_id),
                        kind: RecordErrorKind::DuplicateTrackId { first_line },
                    });
                } else {
                    seen.insert(t.track_id.clone(), line);
                    tracks.push(t);
                }
            }
            Err((track_id, kind)) => errors.push(RecordError {
                line,
                track_id,
                kind,
            }),
        }
    }

    if !errors.is_empty() {
        match mode {
            IngestMode::Strict => return Err(CorpusError::Invalid(errors)),
            IngestMode::Lenient => {
                for e in &errors {
                    log::warn!("skipping record: {e}");
                }
            }
        }
    }
    Ok(ParsedCorpus {
        corpus: Corpus::assemble(tracks),
        skipped: errors,
    })
}
