//! Discretization of beat descriptors into codewords.
//!
//! Pitch and timbre are binarized per coefficient (bit `i` ⇔ coefficient `i`
//! at or above its threshold, bit 0 = pitch class C), giving 4096-word
//! vocabularies. Loudness is binned on a fixed dB grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{BeatDescriptor, Corpus, Track, DESCRIPTOR_DIM};

pub const BINARY_VOCABULARY: usize = 1 << DESCRIPTOR_DIM;

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cannot calibrate timbre on an empty corpus")]
    EmptyCorpus,
    #[error("timbre calibration was computed on corpus {expected} but the input corpus hashes to {actual}")]
    CalibrationMismatch { expected: String, actual: String },
    #[error("timbre facet requires a calibration")]
    MissingCalibration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Facet {
    Pitch,
    Timbre,
    Loudness,
}

impl Facet {
    pub const ALL: [Facet; 3] = [Facet::Pitch, Facet::Timbre, Facet::Loudness];

    pub fn as_str(self) -> &'static str {
        match self {
            Facet::Pitch => "pitch",
            Facet::Timbre => "timbre",
            Facet::Loudness => "loudness",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Facet::Pitch => 0,
            Facet::Timbre => 1,
            Facet::Loudness => 2,
        }
    }
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Facet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pitch" => Ok(Facet::Pitch),
            "timbre" => Ok(Facet::Timbre),
            "loudness" => Ok(Facet::Loudness),
            other => Err(format!("unknown facet `{other}` (pitch, timbre, loudness)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Codeword {
    pub facet: Facet,
    pub id: u16,
}

/// Corpus-wide per-coefficient timbre medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimbreCalibration {
    pub medians: [f64; DESCRIPTOR_DIM],
    /// Content hash of the corpus the medians were computed on.
    pub corpus_hash: String,
}

impl TimbreCalibration {
    /// Refuses a calibration computed on another corpus unless `force`.
    pub fn check_corpus(&self, corpus: &Corpus, force: bool) -> Result<(), EncodeError> {
        let actual = corpus.content_hash();
        if actual != self.corpus_hash {
            if force {
                log::warn!(
                    "using timbre calibration from corpus {} on corpus {actual}",
                    self.corpus_hash
                );
            } else {
                return Err(EncodeError::CalibrationMismatch {
                    expected: self.corpus_hash.clone(),
                    actual,
                });
            }
        }
        Ok(())
    }
}

/// Loudness grid: `num_bins` bins of `bin_width` dB covering `[floor_db, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoudnessBins {
    pub bin_width: f64,
    pub floor_db: f64,
}

impl Default for LoudnessBins {
    fn default() -> Self {
        LoudnessBins {
            bin_width: 1.0,
            floor_db: -60.0,
        }
    }
}

impl LoudnessBins {
    pub fn new(bin_width: f64, floor_db: f64) -> Result<Self, EncodeError> {
        let bins = LoudnessBins {
            bin_width,
            floor_db,
        };
        bins.validate()?;
        Ok(bins)
    }

    fn validate(&self) -> Result<(), EncodeError> {
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(EncodeError::InvalidInput(format!(
                "loudness bin width must be > 0, got {}",
                self.bin_width
            )));
        }
        if !(self.floor_db.is_finite() && self.floor_db < 0.0) {
            return Err(EncodeError::InvalidInput(format!(
                "loudness floor must be < 0 dB, got {}",
                self.floor_db
            )));
        }
        if self.num_bins() > BINARY_VOCABULARY {
            return Err(EncodeError::InvalidInput(format!(
                "loudness grid has {} bins, at most {BINARY_VOCABULARY} supported",
                self.num_bins()
            )));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        (-self.floor_db / self.bin_width).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub pitch_threshold: f64,
    pub loudness: LoudnessBins,
    pub timbre: Option<TimbreCalibration>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            pitch_threshold: 0.5,
            loudness: LoudnessBins::default(),
            timbre: None,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EncodeError> {
        check_threshold(self.pitch_threshold)?;
        self.loudness.validate()
    }

    pub fn encode_beat(&self, facet: Facet, beat: &BeatDescriptor) -> Result<u16, EncodeError> {
        let cw = match facet {
            Facet::Pitch => encode_pitch(&beat.chroma, self.pitch_threshold)?,
            Facet::Timbre => {
                let cal = self
                    .timbre
                    .as_ref()
                    .ok_or(EncodeError::MissingCalibration)?;
                encode_timbre(&beat.timbre, cal)?
            }
            Facet::Loudness => encode_loudness(beat.loudness_db, self.loudness)?,
        };
        Ok(cw.id)
    }

    pub fn encode_track(&self, facet: Facet, track: &Track) -> Result<Vec<u16>, EncodeError> {
        track
            .beats
            .iter()
            .map(|b| self.encode_beat(facet, b))
            .collect()
    }

    /// Number of possible codewords for `facet`.
    pub fn vocabulary(&self, facet: Facet) -> usize {
        match facet {
            Facet::Pitch | Facet::Timbre => BINARY_VOCABULARY,
            Facet::Loudness => self.loudness.num_bins(),
        }
    }
}

fn check_threshold(threshold: f64) -> Result<(), EncodeError> {
    if threshold > 0.0 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(EncodeError::InvalidInput(format!(
            "pitch threshold must lie in (0, 1], got {threshold}"
        )))
    }
}

fn binarize(values: &[f64; DESCRIPTOR_DIM], threshold: impl Fn(usize) -> f64) -> u16 {
    values
        .iter()
        .enumerate()
        .filter(|&(i, &v)| v >= threshold(i))
        .fold(0u16, |id, (i, _)| id | (1 << i))
}

pub fn encode_pitch(
    chroma: &[f64; DESCRIPTOR_DIM],
    threshold: f64,
) -> Result<Codeword, EncodeError> {
    check_threshold(threshold)?;
    if let Some(v) = chroma.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(EncodeError::InvalidInput(format!(
            "chroma value {v} outside [0, 1]"
        )));
    }
    Ok(Codeword {
        facet: Facet::Pitch,
        id: binarize(chroma, |_| threshold),
    })
}

pub fn encode_timbre(
    timbre: &[f64; DESCRIPTOR_DIM],
    cal: &TimbreCalibration,
) -> Result<Codeword, EncodeError> {
    if let Some(v) = timbre.iter().find(|v| !v.is_finite()) {
        return Err(EncodeError::InvalidInput(format!(
            "non-finite timbre value {v}"
        )));
    }
    Ok(Codeword {
        facet: Facet::Timbre,
        id: binarize(timbre, |j| cal.medians[j]),
    })
}

pub fn encode_loudness(x: f64, bins: LoudnessBins) -> Result<Codeword, EncodeError> {
    bins.validate()?;
    if !x.is_finite() || x > 0.0 {
        return Err(EncodeError::InvalidInput(format!(
            "loudness must be finite and ≤ 0 dBFS, got {x}"
        )));
    }
    let top = bins.num_bins() - 1;
    let clamped = x.max(bins.floor_db);
    let bin = ((clamped - bins.floor_db) / bins.bin_width).floor() as usize;
    Ok(Codeword {
        facet: Facet::Loudness,
        id: bin.min(top) as u16,
    })
}

/// Median with the two central order statistics averaged for even counts.
pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    assert!(n > 0);
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().max_by(f64::total_cmp).unwrap();
        (lower_max + upper) / 2.0
    }
}

/// Per-coefficient median of timbre over every beat in the corpus.
pub fn calibrate_timbre(corpus: &Corpus) -> Result<TimbreCalibration, EncodeError> {
    let n = corpus.num_beats();
    if n == 0 {
        return Err(EncodeError::EmptyCorpus);
    }
    let mut medians = [0.0; DESCRIPTOR_DIM];
    let mut column = Vec::with_capacity(n);
    for (j, m) in medians.iter_mut().enumerate() {
        column.clear();
        column.extend(
            corpus
                .tracks()
                .iter()
                .flat_map(|t| t.beats.iter().map(move |b| b.timbre[j])),
        );
        *m = median_in_place(&mut column);
    }
    Ok(TimbreCalibration {
        medians,
        corpus_hash: corpus.content_hash(),
    })
}
