//! Synthetic corpora with planted structure.
//!
//! Every track draws from its own RNG stream keyed by `(seed, year, index)`,
//! codewords first, so [`planted_codewords`] reproduces the exact codeword
//! stream of [`synth_corpus`] without materializing descriptors.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{BeatDescriptor, Corpus, Track, DESCRIPTOR_DIM};
use crate::encode::BINARY_VOCABULARY;

/// Chroma value of a set bit.
pub const CHROMA_ON: f64 = 0.9;
/// Chroma value of a clear bit.
pub const CHROMA_OFF: f64 = 0.1;

/// Third quartile of the standard normal.
const Z75: f64 = 0.674_489_750_196_081_7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// i.i.d. codewords, rank `r` (1-based) drawn with weight
    /// `(c + r)^(-1/(β-1))`.
    ZipfMandelbrot {
        beta: f64,
        c: f64,
        vocabulary: u16,
        /// Codeword at each rank; identity (`r - 1`) if absent.
        ranking: Option<Vec<u16>>,
    },
    /// Random walk on an undirected graph, uniform over neighbours.
    Markov { edges: Vec<(u16, u16)> },
    /// Per-beat loudness `-exp(N(μ_y, σ_y))` with median
    /// `-exp(μ0) + drift · (year - first year)`.
    LoudnessDrift {
        mu0: f64,
        drift_db_per_year: f64,
        sigma: f64,
        /// Holds `|Q1 - Q3|` at this many dB every year by adapting `σ_y`;
        /// `sigma` is used unchanged otherwise.
        constant_spread_db: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    /// Inclusive.
    pub years: (i32, i32),
    pub tracks_per_year: u32,
    pub beats_per_track: u32,
    pub seed: u64,
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidSpec(msg.into())
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let (y0, y1) = self.years;
        if y0 > y1 {
            return Err(invalid(format!("empty year range {y0}..={y1}")));
        }
        if self.tracks_per_year == 0 || self.beats_per_track == 0 {
            return Err(invalid("tracks_per_year and beats_per_track must be ≥ 1"));
        }
        match &self.kind {
            GeneratorKind::ZipfMandelbrot {
                beta,
                c,
                vocabulary,
                ranking,
            } => {
                if !(beta.is_finite() && *beta > 1.0) {
                    return Err(invalid(format!("beta must be > 1, got {beta}")));
                }
                if !(c.is_finite() && *c > -1.0) {
                    return Err(invalid(format!("c must be > -1, got {c}")));
                }
                let v = *vocabulary as usize;
                if v == 0 || v > BINARY_VOCABULARY {
                    return Err(invalid(format!(
                        "vocabulary must be in 1..={BINARY_VOCABULARY}, got {v}"
                    )));
                }
                if let Some(r) = ranking {
                    if r.len() != v {
                        return Err(invalid(format!(
                            "ranking has {} entries, vocabulary is {v}",
                            r.len()
                        )));
                    }
                    let mut seen = vec![false; BINARY_VOCABULARY];
                    for &w in r {
                        if w as usize >= BINARY_VOCABULARY || seen[w as usize] {
                            return Err(invalid(format!(
                                "ranking entry {w} is out of range or repeated"
                            )));
                        }
                        seen[w as usize] = true;
                    }
                }
            }
            GeneratorKind::Markov { edges } => {
                if edges.is_empty() {
                    return Err(invalid("markov graph needs ≥ 1 edge"));
                }
                for &(a, b) in edges {
                    if a == b || a as usize >= BINARY_VOCABULARY || b as usize >= BINARY_VOCABULARY
                    {
                        return Err(invalid(format!("bad edge {a}-{b}")));
                    }
                }
            }
            GeneratorKind::LoudnessDrift {
                mu0,
                drift_db_per_year,
                sigma,
                constant_spread_db,
            } => {
                if !(mu0.is_finite() && drift_db_per_year.is_finite()) {
                    return Err(invalid("mu0 and drift must be finite"));
                }
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(invalid(format!("sigma must be > 0, got {sigma}")));
                }
                if let Some(s) = constant_spread_db {
                    if !(s.is_finite() && *s > 0.0) {
                        return Err(invalid(format!("spread must be > 0, got {s}")));
                    }
                }
                for y in [y0, y1] {
                    let m = self.loudness_median_magnitude(y).unwrap_or(f64::NAN);
                    if !(m > 0.0) {
                        return Err(invalid(format!("planted median for {y} is not below 0 dB")));
                    }
                }
            }
        }
        Ok(())
    }

    /// `-median` of the planted loudness in `year`, for the drift kind.
    pub fn loudness_median_magnitude(&self, year: i32) -> Option<f64> {
        match self.kind {
            GeneratorKind::LoudnessDrift {
                mu0,
                drift_db_per_year,
                ..
            } => Some(mu0.exp() - drift_db_per_year * (year - self.years.0) as f64),
            _ => None,
        }
    }

    /// Log-space `(μ_y, σ_y)` of the planted loudness, for the drift kind.
    pub fn loudness_params(&self, year: i32) -> Option<(f64, f64)> {
        let m = self.loudness_median_magnitude(year)?;
        let GeneratorKind::LoudnessDrift {
            sigma,
            constant_spread_db,
            ..
        } = self.kind
        else {
            return None;
        };
        // |Q1 - Q3| = 2 m sinh(z75 σ)
        let s = constant_spread_db.map_or(sigma, |spread| (spread / (2.0 * m)).asinh() / Z75);
        Some((m.ln(), s))
    }

    pub fn track_id(year: i32, index: u32) -> String {
        format!("syn-{year}-{index:05}")
    }

    fn keys(&self) -> Vec<(i32, u32)> {
        (self.years.0..=self.years.1)
            .flat_map(|y| (0..self.tracks_per_year).map(move |i| (y, i)))
            .collect()
    }
}

fn track_rng(seed: u64, year: i32, index: u32) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"musevo/synth/v1");
    h.update(seed.to_le_bytes());
    h.update(year.to_le_bytes());
    h.update(index.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Sampling tables shared by all tracks of one spec.
enum Source {
    Zipf {
        dist: WeightedIndex<f64>,
        ranking: Vec<u16>,
    },
    Markov {
        nodes: Vec<u16>,
        adj: Vec<Vec<u16>>,
    },
    Uniform,
}

impl Source {
    fn new(kind: &GeneratorKind) -> Self {
        match kind {
            GeneratorKind::ZipfMandelbrot {
                beta,
                c,
                vocabulary,
                ranking,
            } => {
                let alpha = 1.0 / (beta - 1.0);
                let weights: Vec<f64> = (1..=*vocabulary as u32)
                    .map(|r| (c + r as f64).powf(-alpha))
                    .collect();
                Source::Zipf {
                    dist: WeightedIndex::new(weights).expect("validated weights"),
                    ranking: ranking
                        .clone()
                        .unwrap_or_else(|| (0..*vocabulary).collect()),
                }
            }
            GeneratorKind::Markov { edges } => {
                let mut nodes: Vec<u16> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
                nodes.sort_unstable();
                nodes.dedup();
                let mut adj = vec![Vec::new(); nodes.len()];
                let idx = |w: u16| nodes.binary_search(&w).unwrap();
                for &(a, b) in edges {
                    adj[idx(a)].push(b);
                    adj[idx(b)].push(a);
                }
                for list in &mut adj {
                    list.sort_unstable();
                    list.dedup();
                }
                Source::Markov { nodes, adj }
            }
            GeneratorKind::LoudnessDrift { .. } => Source::Uniform,
        }
    }

    fn codewords<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<u16> {
        match self {
            Source::Zipf { dist, ranking } => (0..n).map(|_| ranking[dist.sample(rng)]).collect(),
            Source::Markov { nodes, adj } => {
                let mut cur = rng.random_range(0..nodes.len());
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    out.push(nodes[cur]);
                    let next = adj[cur][rng.random_range(0..adj[cur].len())];
                    cur = nodes.binary_search(&next).unwrap();
                }
                out
            }
            Source::Uniform => (0..n)
                .map(|_| rng.random_range(0..BINARY_VOCABULARY as u16))
                .collect(),
        }
    }
}

/// Chroma whose pitch encoding is `codeword` for any threshold in (0.1, 0.9].
pub fn chroma_for(codeword: u16) -> [f64; DESCRIPTOR_DIM] {
    std::array::from_fn(|i| {
        if codeword >> i & 1 == 1 {
            CHROMA_ON
        } else {
            CHROMA_OFF
        }
    })
}

/// Per-beat timbre spread around the track's own N(0, 1) center.
pub const TIMBRE_JITTER: f64 = 0.25;

fn round_to(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

fn generate_track(spec: &GeneratorSpec, source: &Source, year: i32, index: u32) -> Track {
    let mut rng = track_rng(spec.seed, year, index);
    let n = spec.beats_per_track as usize;
    let codewords = source.codewords(n, &mut rng);
    let loud = match spec.loudness_params(year) {
        Some((mu, sigma)) => Normal::new(mu, sigma).expect("validated"),
        None => Normal::new(15f64.ln(), 0.3).unwrap(),
    };
    let center: [f64; DESCRIPTOR_DIM] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let beats = codewords
        .into_iter()
        .map(|w| {
            let timbre = std::array::from_fn(|i| {
                let jitter: f64 = rng.sample(StandardNormal);
                round_to(center[i] + TIMBRE_JITTER * jitter, 1e-3)
            });
            let loudness_db = -round_to(loud.sample(&mut rng).exp(), 1e-4).max(1e-4);
            BeatDescriptor {
                chroma: chroma_for(w),
                timbre,
                loudness_db,
            }
        })
        .collect();
    Track {
        track_id: GeneratorSpec::track_id(year, index),
        year,
        beats,
    }
}

/// Generates the corpus described by `spec`.
pub fn synth_corpus(spec: &GeneratorSpec) -> Result<Corpus, SynthError> {
    spec.validate()?;
    let source = Source::new(&spec.kind);
    let tracks: Vec<Track> = spec
        .keys()
        .into_par_iter()
        .map(|(y, i)| generate_track(spec, &source, y, i))
        .collect();
    Corpus::from_tracks(tracks).map_err(|e| invalid(format!("generated corpus rejected: {e}")))
}

/// A planted track: its id, year and pitch codeword sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTrack {
    pub track_id: String,
    pub year: i32,
    pub codewords: Vec<u16>,
}

/// The pitch codeword stream [`synth_corpus`] encodes into its chroma, in
/// track id order.
pub fn planted_codewords(spec: &GeneratorSpec) -> Result<Vec<PlantedTrack>, SynthError> {
    spec.validate()?;
    let source = Source::new(&spec.kind);
    let mut tracks: Vec<PlantedTrack> = spec
        .keys()
        .into_par_iter()
        .map(|(year, index)| {
            let mut rng = track_rng(spec.seed, year, index);
            PlantedTrack {
                track_id: GeneratorSpec::track_id(year, index),
                year,
                codewords: source.codewords(spec.beats_per_track as usize, &mut rng),
            }
        })
        .collect();
    tracks.sort_by(|a, b| a.track_id.cmp(&b.track_id));
    Ok(tracks)
}

/// Endless i.i.d. codewords from a Zipf-Mandelbrot rank law, for samples too
/// large to route through a corpus.
pub struct ZipfStream {
    source: Source,
    rng: ChaCha8Rng,
}

impl ZipfStream {
    pub fn new(
        beta: f64,
        c: f64,
        vocabulary: u16,
        ranking: Option<Vec<u16>>,
        seed: u64,
    ) -> Result<Self, SynthError> {
        let kind = GeneratorKind::ZipfMandelbrot {
            beta,
            c,
            vocabulary,
            ranking,
        };
        GeneratorSpec {
            kind: kind.clone(),
            years: (0, 0),
            tracks_per_year: 1,
            beats_per_track: 1,
            seed,
        }
        .validate()?;
        Ok(ZipfStream {
            source: Source::new(&kind),
            rng: track_rng(seed, i32::MIN, u32::MAX),
        })
    }

    /// `tracks` sequences of `beats` codewords each.
    pub fn sequences(&mut self, tracks: usize, beats: usize) -> Vec<Vec<u16>> {
        (0..tracks)
            .map(|_| self.source.codewords(beats, &mut self.rng))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::{encode_pitch, EncoderConfig, Facet};
    use crate::netkit::build_network;
    use crate::sampler::Sample;
    use crate::trends::ols;

    fn spec(kind: GeneratorKind, years: (i32, i32), tracks: u32, beats: u32) -> GeneratorSpec {
        GeneratorSpec {
            kind,
            years,
            tracks_per_year: tracks,
            beats_per_track: beats,
            seed: 5,
        }
    }

    fn zipf(vocabulary: u16) -> GeneratorKind {
        GeneratorKind::ZipfMandelbrot {
            beta: 2.2,
            c: 1.0,
            vocabulary,
            ranking: None,
        }
    }

    #[test]
    fn zipf_beats_encode_inside_support() {
        let c = synth_corpus(&spec(zipf(16), (2000, 2000), 1, 10)).unwrap();
        assert_eq!(c.num_beats(), 10);
        for b in &c.tracks()[0].beats {
            assert!(encode_pitch(&b.chroma, 0.5).unwrap().id < 16);
        }
    }

    #[test]
    fn round_trip_recovers_planted_stream() {
        for kind in [
            zipf(300),
            GeneratorKind::Markov {
                edges: vec![(1, 2), (2, 3), (3, 1), (3, 4000)],
            },
        ] {
            let s = spec(kind, (1990, 1992), 4, 50);
            let corpus = synth_corpus(&s).unwrap();
            let planted = planted_codewords(&s).unwrap();
            assert_eq!(planted.len(), corpus.num_tracks());
            for threshold in [0.11, 0.5, 0.9] {
                let enc = EncoderConfig {
                    pitch_threshold: threshold,
                    ..EncoderConfig::default()
                };
                for (t, p) in corpus.tracks().iter().zip(&planted) {
                    assert_eq!(t.track_id, p.track_id);
                    assert_eq!(enc.encode_track(Facet::Pitch, t).unwrap(), p.codewords);
                }
            }
        }
    }

    #[test]
    fn markov_output_stays_on_planted_triangle() {
        let s = spec(
            GeneratorKind::Markov {
                edges: vec![(0, 1), (1, 2), (2, 0)],
            },
            (2000, 2001),
            5,
            40,
        );
        let planted = planted_codewords(&s).unwrap();
        let sample = Sample::from_sequences(
            Facet::Pitch,
            2000,
            planted.into_iter().map(|p| p.codewords).collect(),
        );
        let net = build_network(&sample).unwrap();
        assert!(net.nodes().all(|n| n < 3));
        assert!(net.edges().all(|((a, b), _)| a < 3 && b < 3));
    }

    #[test]
    fn same_seed_same_bytes() {
        let s = spec(zipf(64), (1970, 1972), 3, 20);
        assert_eq!(
            synth_corpus(&s).unwrap().to_bytes(),
            synth_corpus(&s).unwrap().to_bytes()
        );
        let other = GeneratorSpec {
            seed: 6,
            ..s.clone()
        };
        assert_ne!(
            synth_corpus(&s).unwrap().to_bytes(),
            synth_corpus(&other).unwrap().to_bytes()
        );
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            spec(
                GeneratorKind::ZipfMandelbrot {
                    beta: 1.0,
                    c: 1.0,
                    vocabulary: 8,
                    ranking: None,
                },
                (1, 1),
                1,
                1,
            ),
            spec(
                GeneratorKind::ZipfMandelbrot {
                    beta: 2.0,
                    c: 1.0,
                    vocabulary: 5000,
                    ranking: None,
                },
                (1, 1),
                1,
                1,
            ),
            spec(
                GeneratorKind::ZipfMandelbrot {
                    beta: 2.0,
                    c: 1.0,
                    vocabulary: 2,
                    ranking: Some(vec![1, 1]),
                },
                (1, 1),
                1,
                1,
            ),
            spec(
                GeneratorKind::Markov {
                    edges: vec![(1, 1)],
                },
                (1, 1),
                1,
                1,
            ),
            spec(GeneratorKind::Markov { edges: vec![] }, (1, 1), 1, 1),
            spec(zipf(8), (2, 1), 1, 1),
            spec(zipf(8), (1, 1), 0, 1),
            spec(
                GeneratorKind::LoudnessDrift {
                    mu0: 1.0,
                    drift_db_per_year: 0.5,
                    sigma: 0.2,
                    constant_spread_db: None,
                },
                (0, 20),
                1,
                1,
            ),
        ];
        for s in bad {
            assert!(synth_corpus(&s).is_err(), "{s:?}");
        }
    }

    #[test]
    fn constant_spread_parameters() {
        let s = spec(
            GeneratorKind::LoudnessDrift {
                mu0: 22f64.ln(),
                drift_db_per_year: 0.13,
                sigma: 0.3,
                constant_spread_db: Some(9.5),
            },
            (1960, 2009),
            1,
            1,
        );
        for y in [1960, 1985, 2009] {
            let (mu, sigma) = s.loudness_params(y).unwrap();
            let q1 = -(mu + Z75 * sigma).exp();
            let q3 = -(mu - Z75 * sigma).exp();
            assert!(((q3 - q1) - 9.5).abs() < 1e-9);
            assert!((-mu.exp() - (-22.0 + 0.13 * (y - 1960) as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn planted_loudness_drift_regresses_to_slope() {
        let s = spec(
            GeneratorKind::LoudnessDrift {
                mu0: 22f64.ln(),
                drift_db_per_year: 0.13,
                sigma: 0.3,
                constant_spread_db: None,
            },
            (1960, 2009),
            4,
            200,
        );
        let corpus = synth_corpus(&s).unwrap();
        let medians: Vec<(f64, f64)> = corpus
            .year_index()
            .iter()
            .map(|(&y, idx)| {
                let mut xs: Vec<f64> = idx
                    .iter()
                    .flat_map(|&i| corpus.tracks()[i].beats.iter().map(|b| b.loudness_db))
                    .collect();
                (y as f64, crate::encode::median_in_place(&mut xs))
            })
            .collect();
        let t = ols(&medians).unwrap();
        assert!((t.slope - 0.13).abs() <= 0.02, "slope {}", t.slope);
        assert!(t.p_value < 0.01);
    }

    #[test]
    fn zipf_stream_frequencies_follow_rank_law() {
        let mut z = ZipfStream::new(2.0, 1.0, 50, None, 9).unwrap();
        let seqs = z.sequences(100, 1000);
        let mut counts = [0u64; 50];
        for w in seqs.iter().flatten() {
            counts[*w as usize] += 1;
        }
        // alpha = 1: P(r) ∝ 1/(1 + r)
        let norm: f64 = (1..=50).map(|r| 1.0 / (1.0 + r as f64)).sum();
        for (i, &c) in counts.iter().enumerate().take(5) {
            let p = 1.0 / (2.0 + i as f64) / norm;
            let sd = (1e5 * p * (1.0 - p)).sqrt();
            assert!(
                (c as f64 - 1e5 * p).abs() < 5.0 * sd,
                "rank {} count {c}",
                i + 1
            );
        }
    }
}
