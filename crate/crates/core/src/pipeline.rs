//! End-to-end analysis: sample every (facet, year, replicate), fit and
//! measure each sample, and assemble the year-trend report.
//!
//! Jobs run on a rayon pool of the requested size. Results are collected in
//! plan order and every floating-point reduction is sequential, so output
//! bytes do not depend on the worker count.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, IngestMode};
use crate::distfit::{
    bootstrap_gof, correlation_matrix, fit_reversed_lognormal, fit_values, rank_frequency,
    CorrelationMatrix, FitOptions, LogNormalFit, PowerLawFit, RankedCounts, Shift,
};
use crate::encode::{calibrate_timbre, EncoderConfig, Facet};
use crate::error::{Error, Result};
use crate::netkit::{
    build_network, network_metrics, rewire_nulls, small_worldness, NetworkMetrics, NullConfig,
    NullMetrics,
};
use crate::sampler::{sample_plan, Sample, SampleDescriptor, SamplerConfig};
use crate::trends::{assemble_report, EvolutionReport, Observation};

pub mod metric {
    pub const BETA: &str = "beta";
    pub const GAMMA: &str = "gamma";
    pub const MEDIAN_DEGREE: &str = "median_degree";
    pub const L: &str = "l";
    pub const C: &str = "C";
    pub const ASSORTATIVITY: &str = "Gamma";
    pub const S: &str = "S";
    pub const L_NO_HUB: &str = "l_nohub";
    pub const C_NO_HUB: &str = "C_nohub";
    pub const S_NO_HUB: &str = "S_nohub";
    pub const LOUDNESS_MEDIAN: &str = "loudness_median_db";
    pub const LOUDNESS_SPREAD: &str = "loudness_spread_db";
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// `None` uses the default z_min grid.
    pub z_min_candidates: Option<Vec<u64>>,
    /// Bootstrap replicates for the goodness-of-fit p-value; 0 skips it.
    pub bootstrap: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSettings {
    pub swaps_per_edge: u32,
    pub realizations: u32,
}

impl Default for NullSettings {
    fn default() -> Self {
        NullSettings {
            swaps_per_edge: 10,
            realizations: 10,
        }
    }
}

/// Everything that determines a report's content. Worker count and output
/// location are deliberately absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub facets: Vec<Facet>,
    pub sampler: SamplerConfig,
    pub encoder: EncoderConfig,
    pub fit: FitConfig,
    pub null: NullSettings,
    pub exclude_hubs: usize,
    pub ingest: IngestMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            facets: Facet::ALL.to_vec(),
            sampler: SamplerConfig::default(),
            encoder: EncoderConfig::default(),
            fit: FitConfig::default(),
            null: NullSettings::default(),
            exclude_hubs: 10,
            ingest: IngestMode::Strict,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.facets.is_empty() {
            return Err(Error::Config("at least one facet is required".into()));
        }
        self.sampler.validate()?;
        self.encoder.validate()?;
        if self.null.realizations == 0 {
            return Err(Error::Config("null model needs ≥ 1 realization".into()));
        }
        Ok(())
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            z_min_candidates: self.fit.z_min_candidates.clone(),
            shift: Shift::Free,
        }
    }
}

/// The configuration as echoed into every output, with its fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub config: RunConfig,
    pub corpus_hash: String,
    pub fingerprint: String,
}

impl ConfigRecord {
    pub fn new(config: RunConfig, corpus_hash: String) -> Self {
        #[derive(Serialize)]
        struct Key<'a> {
            config: &'a RunConfig,
            corpus_hash: &'a str,
        }
        let bytes = serde_json::to_vec(&Key {
            config: &config,
            corpus_hash: &corpus_hash,
        })
        .expect("config serializes");
        ConfigRecord {
            fingerprint: crate::io::content_hash(&bytes),
            config,
            corpus_hash,
        }
    }
}

fn derived_seed(domain: &[u8], seed: u64, facet: Facet, year: i32, replicate: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(domain);
    h.update(seed.to_le_bytes());
    h.update([facet.tag()]);
    h.update(year.to_le_bytes());
    h.update(replicate.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Rank-frequency table and shifted power-law fit of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistAnalysis {
    #[serde(skip)]
    pub ranked: Option<RankedCounts>,
    pub distinct_codewords: usize,
    pub powerlaw: Option<PowerLawFit>,
    pub gof_p_value: Option<f64>,
}

/// Transition-network metrics of one sample, with and without hubs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetAnalysis {
    pub full: Option<NetworkMetrics>,
    pub no_hub: Option<NetworkMetrics>,
    pub null: Option<NullMetrics>,
    pub null_no_hub: Option<NullMetrics>,
    #[serde(rename = "S")]
    pub s: Option<f64>,
    #[serde(rename = "S_nohub")]
    pub s_no_hub: Option<f64>,
}

/// Results for one sample. Failed computations are listed in `errors` and
/// leave the corresponding metrics out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleAnalysis {
    pub facet: Facet,
    pub center_year: i32,
    pub replicate: u32,
    pub total_beats: u64,
    pub shortfall: bool,
    pub dist: DistAnalysis,
    pub net: NetAnalysis,
    pub loudness: Option<LogNormalFit>,
    pub metrics: BTreeMap<String, f64>,
    pub errors: BTreeMap<String, String>,
}

struct Recorder {
    metrics: BTreeMap<String, f64>,
    errors: BTreeMap<String, String>,
}

impl Recorder {
    fn new() -> Self {
        Recorder {
            metrics: BTreeMap::new(),
            errors: BTreeMap::new(),
        }
    }

    fn take<T, E: std::fmt::Display>(
        &mut self,
        what: &str,
        r: std::result::Result<T, E>,
    ) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.insert(what.to_string(), e.to_string());
                None
            }
        }
    }

    fn set(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }
}

/// Fits the codeword counts of a sample; the bootstrap runs only if
/// `cfg.fit.bootstrap > 0`.
pub fn analyze_distribution(sample: &Sample, cfg: &RunConfig, seed: u64) -> Result<DistAnalysis> {
    let mut rec = Recorder::new();
    let d = distribution(sample, cfg, seed, &mut rec)?;
    if let Some(e) = rec.errors.into_values().next() {
        log::warn!("{}: {e}", describe(sample));
    }
    Ok(d)
}

fn distribution(
    sample: &Sample,
    cfg: &RunConfig,
    seed: u64,
    rec: &mut Recorder,
) -> Result<DistAnalysis> {
    let ranked = rank_frequency(sample)?;
    let opts = cfg.fit_options();
    let values = ranked.counts();
    let powerlaw = rec.take("powerlaw", fit_values(&values, &opts));
    let gof_p_value = match (&powerlaw, cfg.fit.bootstrap) {
        (Some(fit), b) if b > 0 => {
            rec.take("gof", bootstrap_gof(&values, fit, &opts, b as usize, seed))
        }
        _ => None,
    };
    if let Some(f) = &powerlaw {
        rec.set(metric::BETA, f.beta);
    }
    Ok(DistAnalysis {
        distinct_codewords: ranked.len(),
        ranked: Some(ranked),
        powerlaw,
        gof_p_value,
    })
}

/// Network metrics, degree-preserving nulls and small-worldness.
pub fn analyze_network(sample: &Sample, cfg: &RunConfig, seed: u64) -> Result<NetAnalysis> {
    network(sample, cfg, seed, &mut Recorder::new())
}

fn network(sample: &Sample, cfg: &RunConfig, seed: u64, rec: &mut Recorder) -> Result<NetAnalysis> {
    let net = build_network(sample)?;
    let null_cfg = NullConfig {
        swaps_per_edge: cfg.null.swaps_per_edge,
        realizations: cfg.null.realizations,
        seed,
        exclude_top_hubs: 0,
    };
    let full = rec.take("network", network_metrics(&net, 0));
    let no_hub = if cfg.exclude_hubs > 0 {
        rec.take("network_nohub", network_metrics(&net, cfg.exclude_hubs))
    } else {
        None
    };
    // both nulls come from the same realizations
    let hub_counts: &[usize] = if no_hub.is_some() {
        &[0, cfg.exclude_hubs]
    } else {
        &[0]
    };
    let mut nulls = rewire_nulls(&net, &null_cfg, hub_counts).into_iter();
    let null = rec.take("null", nulls.next().expect("full null"));
    let null_no_hub = nulls.next().and_then(|n| rec.take("null_nohub", n));
    let s = match (&full, &null) {
        (Some(m), Some(n)) => rec.take(metric::S, small_worldness(m, n)),
        _ => None,
    };
    let s_no_hub = match (&no_hub, &null_no_hub) {
        (Some(m), Some(n)) => rec.take(metric::S_NO_HUB, small_worldness(m, n)),
        _ => None,
    };

    if let Some(m) = &full {
        rec.set(metric::MEDIAN_DEGREE, m.degrees.median_degree);
        rec.set(metric::L, m.l);
        rec.set(metric::C, m.c);
        rec.set(metric::ASSORTATIVITY, m.gamma);
        match (&m.degrees.degree_fit, &m.degrees.degree_fit_error) {
            (Some(f), _) => rec.set(metric::GAMMA, f.beta),
            (None, Some(e)) => {
                rec.errors.insert("degree_fit".into(), e.clone());
            }
            (None, None) => {}
        }
    }
    if let Some(m) = &no_hub {
        rec.set(metric::L_NO_HUB, m.l);
        rec.set(metric::C_NO_HUB, m.c);
    }
    if let Some(v) = s {
        rec.set(metric::S, v);
    }
    if let Some(v) = s_no_hub {
        rec.set(metric::S_NO_HUB, v);
    }
    Ok(NetAnalysis {
        full,
        no_hub,
        null,
        null_no_hub,
        s,
        s_no_hub,
    })
}

/// Reversed log-normal fit of the raw per-beat loudness of the sampled tracks.
pub fn analyze_loudness(sample: &Sample, corpus: &Corpus) -> Result<LogNormalFit> {
    let mut values = Vec::with_capacity(sample.total_beats() as usize);
    for id in &sample.track_ids {
        let track = corpus
            .track(id)
            .ok_or_else(|| Error::Config(format!("sampled track {id:?} is not in the corpus")))?;
        values.extend(track.beats.iter().map(|b| b.loudness_db));
    }
    Ok(fit_reversed_lognormal(&values)?)
}

fn describe(sample: &Sample) -> String {
    format!(
        "{} {} r{}",
        sample.meta.facet, sample.meta.center_year, sample.meta.replicate_index
    )
}

fn analyze_job(corpus: &Corpus, cfg: &RunConfig, job: SampleDescriptor) -> Result<SampleAnalysis> {
    let sample = job.draw(corpus, &cfg.sampler, &cfg.encoder)?;
    let seed = cfg.sampler.seed;
    let (facet, year, rep) = (job.facet, job.center_year, job.replicate_index);
    let mut rec = Recorder::new();
    let dist = distribution(
        &sample,
        cfg,
        derived_seed(b"musevo/gof-seed/v1", seed, facet, year, rep),
        &mut rec,
    )?;
    let net = network(
        &sample,
        cfg,
        derived_seed(b"musevo/null-seed/v1", seed, facet, year, rep),
        &mut rec,
    )?;
    let loudness = if facet == Facet::Loudness {
        let fit = rec.take("loudness", analyze_loudness(&sample, corpus));
        if let Some(f) = &fit {
            rec.set(metric::LOUDNESS_MEDIAN, f.empirical_median_db);
            rec.set(metric::LOUDNESS_SPREAD, f.spread_db);
        }
        fit
    } else {
        None
    };
    for (what, e) in &rec.errors {
        log::info!("{}: {what} skipped: {e}", describe(&sample));
    }
    Ok(SampleAnalysis {
        facet,
        center_year: year,
        replicate: rep,
        total_beats: sample.total_beats(),
        shortfall: sample.meta.shortfall,
        dist,
        net,
        loudness,
        metrics: rec.metrics,
        errors: rec.errors,
    })
}

/// A metric left out of one sample's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub facet: Facet,
    pub center_year: i32,
    pub replicate: u32,
    pub what: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOutput {
    pub config: ConfigRecord,
    pub report: EvolutionReport,
    pub samples: Vec<SampleAnalysis>,
    pub skipped: Vec<Skipped>,
}

/// Fills in the timbre calibration from the corpus itself when timbre is
/// requested without one, and checks a supplied one.
pub fn prepare_config(corpus: &Corpus, mut cfg: RunConfig, force: bool) -> Result<RunConfig> {
    if cfg.facets.contains(&Facet::Timbre) {
        match &cfg.encoder.timbre {
            Some(cal) => cal.check_corpus(corpus, force)?,
            None => cfg.encoder.timbre = Some(calibrate_timbre(corpus)?),
        }
    }
    cfg.facets.sort();
    cfg.facets.dedup();
    Ok(cfg)
}

/// Runs the whole analysis on a pool of `workers` threads.
pub fn run_report(corpus: &Corpus, cfg: &RunConfig, workers: usize) -> Result<ReportOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| run_report_inner(corpus, cfg))
}

fn run_report_inner(corpus: &Corpus, cfg: &RunConfig) -> Result<ReportOutput> {
    let record = ConfigRecord::new(cfg.clone(), corpus.content_hash());
    let mut plan = Vec::new();
    for &facet in &cfg.facets {
        plan.extend(sample_plan(corpus, facet, &cfg.sampler)?);
    }
    log::info!("analysing {} samples", plan.len());
    let mut samples: Vec<SampleAnalysis> = plan
        .par_iter()
        .map(|&job| analyze_job(corpus, cfg, job))
        .collect::<Result<_>>()?;

    let mut observations = Vec::new();
    let mut skipped = Vec::new();
    for s in &samples {
        for (name, &value) in &s.metrics {
            observations.push(Observation {
                facet: s.facet,
                metric: name.clone(),
                center_year: s.center_year,
                replicate: s.replicate,
                value,
                config_fingerprint: record.fingerprint.clone(),
            });
        }
        for (what, reason) in &s.errors {
            skipped.push(Skipped {
                facet: s.facet,
                center_year: s.center_year,
                replicate: s.replicate,
                what: what.clone(),
                reason: reason.clone(),
            });
        }
    }

    let mut correlations = BTreeMap::new();
    for &facet in &cfg.facets {
        let mut per_year: BTreeMap<i32, Vec<RankedCounts>> = BTreeMap::new();
        for s in samples.iter_mut().filter(|s| s.facet == facet) {
            if let Some(r) = s.dist.ranked.take() {
                per_year.entry(s.center_year).or_default().push(r);
            }
        }
        if per_year.len() >= 2 {
            let rows: Vec<(i32, Vec<RankedCounts>)> = per_year.into_iter().collect();
            correlations.insert(facet, correlation_matrix(&rows)?);
        }
    }

    let mut report = assemble_report(&cfg.facets, &observations, &correlations)?;
    report.config_fingerprint = record.fingerprint.clone();
    Ok(ReportOutput {
        config: record,
        report,
        samples,
        skipped,
    })
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn with_header(
    fingerprint: &str,
    body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Vec<u8> {
    let mut out = format!("# config {fingerprint}\n").into_bytes();
    body(&mut out).expect("writing to memory");
    out
}

pub fn corr_csv(fingerprint: &str, m: &CorrelationMatrix) -> Vec<u8> {
    with_header(fingerprint, |out| m.write_csv(out))
}

impl ReportOutput {
    /// Output files by name.
    pub fn files(&self) -> Result<BTreeMap<String, Vec<u8>>> {
        #[derive(Serialize)]
        struct TrendsFile<'a> {
            config_fingerprint: &'a str,
            report: &'a EvolutionReport,
            skipped: &'a [Skipped],
        }
        #[derive(Serialize)]
        struct SamplesFile<'a> {
            config_fingerprint: &'a str,
            samples: &'a [SampleAnalysis],
        }
        let fp = self.config.fingerprint.as_str();
        let mut files = BTreeMap::new();
        files.insert("config.json".to_string(), json_bytes(&self.config)?);
        files.insert(
            "trends.json".to_string(),
            json_bytes(&TrendsFile {
                config_fingerprint: fp,
                report: &self.report,
                skipped: &self.skipped,
            })?,
        );
        files.insert(
            "samples.json".to_string(),
            json_bytes(&SamplesFile {
                config_fingerprint: fp,
                samples: &self.samples,
            })?,
        );
        for f in &self.report.facets {
            for (name, m) in &f.metrics {
                files.insert(
                    format!("series_{}_{}.csv", f.facet, name),
                    with_header(fp, |out| m.series.write_csv(out)),
                );
            }
            if let Some(c) = &f.correlation {
                files.insert(format!("corr_{}.csv", f.facet), corr_csv(fp, c));
            }
        }
        Ok(files)
    }

    /// Writes every output file atomically into `dir`, creating it if needed.
    pub fn write_to_dir(&self, dir: &Path) -> Result<Vec<String>> {
        write_files(dir, &self.files()?)
    }
}

pub fn write_files(dir: &Path, files: &BTreeMap<String, Vec<u8>>) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    for (name, bytes) in files {
        crate::io::write_atomic(&dir.join(name), bytes)?;
    }
    Ok(files.keys().cloned().collect())
}

/// Fails unless every sample carries the same configuration fingerprint.
pub fn check_same_config(samples: &[Sample]) -> Result<()> {
    if let Some(first) = samples.first() {
        let fp = &first.meta.config_fingerprint;
        if let Some(other) = samples.iter().find(|s| &s.meta.config_fingerprint != fp) {
            return Err(Error::ConfigMismatch(format!(
                "samples {} and {} were drawn with configurations {fp} and {}",
                describe(first),
                describe(other),
                other.meta.config_fingerprint
            )));
        }
    }
    Ok(())
}

/// Seed for a sample's null model or bootstrap outside a full report.
pub fn sample_seed(sample: &Sample, seed: u64) -> u64 {
    derived_seed(
        b"musevo/null-seed/v1",
        seed,
        sample.meta.facet,
        sample.meta.center_year,
        sample.meta.replicate_index,
    )
}
