//! Seeded Monte Carlo samples of beat-consecutive codewords.
//!
//! A sample for central year `y` draws whole tracks uniformly without
//! replacement from the years `[y - h, y + h]` until the drawn beats reach
//! the target. The RNG stream is keyed by `(seed, facet, y, replicate)`, so a
//! sample does not depend on which other samples were drawn, nor in what order.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{half_window, Corpus, CorpusError};
use crate::encode::{EncodeError, EncoderConfig, Facet};

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("no tracks in window of {window} years around {center_year}")]
    EmptyWindow { center_year: i32, window: u32 },
    #[error(transparent)]
    Window(#[from] CorpusError),
    #[error("target beat count must be ≥ 1")]
    InvalidTarget,
    #[error("replicates must be ≥ 1")]
    InvalidReplicates,
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("sample file line {line}: {msg}")]
    Format { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub window: u32,
    pub replicates: u32,
    pub target_beats: u64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            window: 5,
            replicates: 10,
            target_beats: 1_000_000,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SampleError> {
        half_window(self.window as i64)?;
        if self.target_beats == 0 {
            return Err(SampleError::InvalidTarget);
        }
        if self.replicates == 0 {
            return Err(SampleError::InvalidReplicates);
        }
        Ok(())
    }
}

/// Content hash of everything that determines a sample's codewords apart
/// from its (facet, year, replicate) key.
pub fn sampling_fingerprint(sampler: &SamplerConfig, encoder: &EncoderConfig) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        window: u32,
        target_beats: u64,
        seed: u64,
        encoder: &'a EncoderConfig,
    }
    let key = Key {
        window: sampler.window,
        target_beats: sampler.target_beats,
        seed: sampler.seed,
        encoder,
    };
    crate::io::content_hash(&serde_json::to_vec(&key).expect("config serializes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub facet: Facet,
    pub center_year: i32,
    pub window: u32,
    pub replicate_index: u32,
    pub target_beats: u64,
    pub total_beats: u64,
    pub seed: u64,
    /// The window held fewer beats than the target; every window track is used.
    pub shortfall: bool,
    pub config_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub meta: SampleMeta,
    /// Selected tracks in selection order.
    pub track_ids: Vec<String>,
    /// One codeword sequence per selected track.
    pub sequences: Vec<Vec<u16>>,
}

impl Sample {
    /// Wraps raw codeword sequences, e.g. streams produced outside a corpus.
    pub fn from_sequences(facet: Facet, center_year: i32, sequences: Vec<Vec<u16>>) -> Self {
        let total: u64 = sequences.iter().map(|s| s.len() as u64).sum();
        Sample {
            meta: SampleMeta {
                facet,
                center_year,
                window: 1,
                replicate_index: 0,
                target_beats: total.max(1),
                total_beats: total,
                seed: 0,
                shortfall: false,
                config_fingerprint: String::new(),
            },
            track_ids: (0..sequences.len()).map(|i| format!("seq{i}")).collect(),
            sequences,
        }
    }

    pub fn facet(&self) -> Facet {
        self.meta.facet
    }

    pub fn total_beats(&self) -> u64 {
        self.meta.total_beats
    }

    pub fn codewords(&self) -> impl Iterator<Item = u16> + '_ {
        self.sequences.iter().flat_map(|s| s.iter().copied())
    }

    /// Text format: a `#` line holding the JSON metadata, then for every track
    /// a `>track_id` marker followed by one codeword per line.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(b"# ")?;
        serde_json::to_writer(&mut out, &self.meta)?;
        out.write_all(b"\n")?;
        for (id, seq) in self.track_ids.iter().zip(&self.sequences) {
            writeln!(out, ">{id}")?;
            for cw in seq {
                writeln!(out, "{cw}")?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }

    pub fn parse(input: &str) -> Result<Self, SampleError> {
        let err = |line: usize, msg: String| SampleError::Format { line, msg };
        let mut lines = input.lines().enumerate();
        let meta: SampleMeta = match lines.next() {
            Some((_, l)) if l.starts_with("# ") => {
                serde_json::from_str(&l[2..]).map_err(|e| err(1, e.to_string()))?
            }
            _ => return Err(err(1, "missing `# {metadata}` header".into())),
        };
        let mut track_ids = Vec::new();
        let mut sequences: Vec<Vec<u16>> = Vec::new();
        for (i, l) in lines {
            if let Some(id) = l.strip_prefix('>') {
                track_ids.push(id.to_string());
                sequences.push(Vec::new());
            } else if l.is_empty() {
                continue;
            } else {
                let cw: u16 = l
                    .parse()
                    .map_err(|_| err(i + 1, format!("expected a codeword, got `{l}`")))?;
                sequences
                    .last_mut()
                    .ok_or_else(|| err(i + 1, "codeword before first track marker".into()))?
                    .push(cw);
            }
        }
        let total: u64 = sequences.iter().map(|s| s.len() as u64).sum();
        if total != meta.total_beats {
            return Err(err(
                0,
                format!(
                    "header declares {} beats, file holds {total}",
                    meta.total_beats
                ),
            ));
        }
        Ok(Sample {
            meta,
            track_ids,
            sequences,
        })
    }
}

fn stream_seed(seed: u64, facet: Facet, center_year: i32, replicate_index: u32) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"musevo/sample/v1");
    h.update(seed.to_le_bytes());
    h.update([facet.tag()]);
    h.update(center_year.to_le_bytes());
    h.update(replicate_index.to_le_bytes());
    h.finalize().into()
}

/// Draws one replicate for `center_year`.
pub fn draw_sample(
    corpus: &Corpus,
    facet: Facet,
    center_year: i32,
    replicate_index: u32,
    sampler: &SamplerConfig,
    encoder: &EncoderConfig,
) -> Result<Sample, SampleError> {
    sampler.validate()?;
    encoder.validate()?;
    let half = half_window(sampler.window as i64)?;
    let mut candidates = corpus.tracks_in_years(center_year - half, center_year + half);
    if candidates.is_empty() {
        return Err(SampleError::EmptyWindow {
            center_year,
            window: sampler.window,
        });
    }

    let mut rng = ChaCha8Rng::from_seed(stream_seed(
        sampler.seed,
        facet,
        center_year,
        replicate_index,
    ));
    let tracks = corpus.tracks();
    let mut total = 0u64;
    let mut chosen = 0;
    // Partial Fisher-Yates: candidates[..chosen] is the selection so far.
    while chosen < candidates.len() && total < sampler.target_beats {
        let j = rng.random_range(chosen..candidates.len());
        candidates.swap(chosen, j);
        total += tracks[candidates[chosen]].len() as u64;
        chosen += 1;
    }
    let shortfall = total < sampler.target_beats;
    if shortfall {
        log::warn!(
            "{facet} {center_year} r{replicate_index}: window holds {total} beats, target {}",
            sampler.target_beats
        );
    }

    let selected = &candidates[..chosen];
    let sequences = selected
        .iter()
        .map(|&i| encoder.encode_track(facet, &tracks[i]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sample {
        meta: SampleMeta {
            facet,
            center_year,
            window: sampler.window,
            replicate_index,
            target_beats: sampler.target_beats,
            total_beats: total,
            seed: sampler.seed,
            shortfall,
            config_fingerprint: sampling_fingerprint(sampler, encoder),
        },
        track_ids: selected
            .iter()
            .map(|&i| tracks[i].track_id.clone())
            .collect(),
        sequences,
    })
}

/// One planned sample; materialize it with [`SampleDescriptor::draw`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleDescriptor {
    pub facet: Facet,
    pub center_year: i32,
    pub replicate_index: u32,
}

impl SampleDescriptor {
    pub fn draw(
        &self,
        corpus: &Corpus,
        sampler: &SamplerConfig,
        encoder: &EncoderConfig,
    ) -> Result<Sample, SampleError> {
        draw_sample(
            corpus,
            self.facet,
            self.center_year,
            self.replicate_index,
            sampler,
            encoder,
        )
    }
}

/// Every available central year × `replicates`, year-major.
pub fn sample_plan(
    corpus: &Corpus,
    facet: Facet,
    sampler: &SamplerConfig,
) -> Result<Vec<SampleDescriptor>, SampleError> {
    sampler.validate()?;
    let years = corpus.years_available(sampler.window as i64)?;
    Ok(years
        .into_iter()
        .flat_map(|center_year| {
            (0..sampler.replicates).map(move |replicate_index| SampleDescriptor {
                facet,
                center_year,
                replicate_index,
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{BeatDescriptor, Track};

    fn track(id: &str, year: i32, beats: usize) -> Track {
        Track {
            track_id: id.into(),
            year,
            beats: (0..beats)
                .map(|b| {
                    let mut chroma = [0.0; 12];
                    chroma[b % 12] = 1.0;
                    BeatDescriptor {
                        chroma,
                        timbre: [0.0; 12],
                        loudness_db: -(b as f64) - 1.0,
                    }
                })
                .collect(),
        }
    }

    fn cfg(target: u64, window: u32) -> SamplerConfig {
        SamplerConfig {
            window,
            replicates: 10,
            target_beats: target,
            seed: 42,
        }
    }

    #[test]
    fn single_track_window_is_the_sample() {
        let c = Corpus::from_tracks(vec![track("only", 2000, 10)]).unwrap();
        let s = draw_sample(
            &c,
            Facet::Pitch,
            2000,
            0,
            &cfg(10, 5),
            &EncoderConfig::default(),
        )
        .unwrap();
        assert_eq!(s.track_ids, vec!["only".to_string()]);
        assert_eq!(s.total_beats(), 10);
        assert!(!s.meta.shortfall);
        assert_eq!(
            s.sequences[0],
            (0..10).map(|b| 1u16 << b).collect::<Vec<_>>()
        );
    }

    #[test]
    fn shortfall_and_empty_window() {
        let c = Corpus::from_tracks(vec![track("a", 2000, 10), track("b", 2001, 5)]).unwrap();
        let s = draw_sample(
            &c,
            Facet::Loudness,
            2000,
            0,
            &cfg(100, 3),
            &EncoderConfig::default(),
        )
        .unwrap();
        assert!(s.meta.shortfall);
        assert_eq!(s.total_beats(), 15);
        assert!(matches!(
            draw_sample(
                &c,
                Facet::Pitch,
                1990,
                0,
                &cfg(10, 3),
                &EncoderConfig::default()
            ),
            Err(SampleError::EmptyWindow { .. })
        ));
        assert!(matches!(
            draw_sample(
                &c,
                Facet::Pitch,
                2000,
                0,
                &cfg(10, 4),
                &EncoderConfig::default()
            ),
            Err(SampleError::Window(_))
        ));
        assert!(matches!(
            draw_sample(
                &c,
                Facet::Pitch,
                2000,
                0,
                &cfg(0, 3),
                &EncoderConfig::default()
            ),
            Err(SampleError::InvalidTarget)
        ));
        assert!(matches!(
            draw_sample(
                &c,
                Facet::Timbre,
                2000,
                0,
                &cfg(10, 3),
                &EncoderConfig::default()
            ),
            Err(SampleError::Encode(EncodeError::MissingCalibration))
        ));
    }

    #[test]
    fn file_format_round_trips() {
        let tracks = (0..20)
            .map(|i| track(&format!("t{i:02}"), 1990 + i % 4, 3 + i as usize))
            .collect();
        let c = Corpus::from_tracks(tracks).unwrap();
        let s = draw_sample(
            &c,
            Facet::Pitch,
            1991,
            3,
            &cfg(40, 3),
            &EncoderConfig::default(),
        )
        .unwrap();
        let text = String::from_utf8(s.to_bytes()).unwrap();
        assert!(text.starts_with("# {\"facet\":\"pitch\""));
        assert_eq!(Sample::parse(&text).unwrap(), s);
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(Sample::parse(&truncated).is_err());
        assert!(Sample::parse("12\n").is_err());
    }

    #[test]
    fn plan_enumerates_years_times_replicates() {
        let c = Corpus::from_tracks(vec![track("a", 1994, 4)]).unwrap();
        let mut one_year = cfg(10, 1);
        assert_eq!(sample_plan(&c, Facet::Pitch, &one_year).unwrap().len(), 10);
        one_year.replicates = 0;
        assert!(sample_plan(&c, Facet::Pitch, &one_year).is_err());
        let c = Corpus::from_tracks(
            (1955..=2010)
                .map(|y| track(&format!("y{y}"), y, 2))
                .collect(),
        )
        .unwrap();
        let plan = sample_plan(&c, Facet::Pitch, &cfg(10, 5)).unwrap();
        assert_eq!(plan.len(), c.years_available(5).unwrap().len() * 10);
        assert_eq!(plan.len(), (1953..=2012).count() * 10);
    }
}
