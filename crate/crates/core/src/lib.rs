//! # musevo
//!
//! Codeword statistics for beat-level music descriptor corpora.
//!
//! A corpus of tracks (year annotation plus per-beat chroma, timbre and
//! loudness) is discretized into codewords, sampled per year window, and
//! analysed along three lines:
//!
//! - codeword frequency distributions, fitted with a shifted discrete power
//!   law `P(z) ∝ (c + z)^-β`, and year-to-year Spearman rank correlations,
//! - transition networks between consecutive codewords (degree law, average
//!   shortest path, clustering, assortativity ratio) against degree-preserving
//!   randomized nulls,
//! - loudness distributions fitted with a reversed log-normal.
//!
//! Per-year values are finally regressed on the year with an OLS slope t-test.
//!
//! ```text
//! corpus -> encode -> sampler -> distfit / netkit -> trends -> report files
//! ```
//!
//! [`synthkit`] generates corpora with planted structure that act as oracles
//! for the whole pipeline, and [`cli`] wires everything to the `musevo`
//! binary.

pub mod cli;
pub mod corpus;
pub mod distfit;
pub mod encode;
pub mod error;
pub mod io;
pub mod netkit;
pub mod pipeline;
pub mod sampler;
pub mod synthkit;
pub mod trends;

pub use corpus::{BeatDescriptor, Corpus, IngestMode, Track};
pub use encode::{Codeword, EncoderConfig, Facet, TimbreCalibration};
pub use error::{Error, Result};
pub use sampler::Sample;
