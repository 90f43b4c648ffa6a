//! Command-line front end of the `musevo` binary.
//!
//! Every failure ends with a single JSON object on stderr,
//! `{"error": {"kind": ..., "message": ...}}`, and exit status 1.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::corpus::{parse_corpus, Corpus, CorpusError, IngestMode, ParsedCorpus};
use crate::distfit::{correlation_matrix, RankedCounts};
use crate::encode::{calibrate_timbre, EncoderConfig, Facet, LoudnessBins, TimbreCalibration};
use crate::error::{Error, Result};
use crate::io::{read_file, write_atomic};
use crate::netkit::build_network;
use crate::pipeline::{
    analyze_distribution, analyze_loudness, analyze_network, check_same_config, corr_csv,
    prepare_config, run_report, sample_seed, write_files, FitConfig, NullSettings, RunConfig,
};
use crate::sampler::{draw_sample, sample_plan, Sample, SamplerConfig};
use crate::synthkit::{synth_corpus, GeneratorKind, GeneratorSpec};

#[derive(Debug, Parser)]
#[command(
    name = "musevo",
    version,
    about = "Codeword statistics and year trends for beat-level music corpora"
)]
pub struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a corpus and print a summary.
    Validate {
        corpus: PathBuf,
        #[arg(long)]
        lenient: bool,
    },
    /// Compute corpus-wide timbre medians.
    Calibrate {
        corpus: PathBuf,
        #[arg(long)]
        lenient: bool,
        /// Calibration record to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw codeword samples and write them as `.cws` files.
    Sample(SampleCmd),
    /// Rank-frequency tables and power-law fits of sample files.
    Dist(DistCmd),
    /// Transition networks, metrics and null models of sample files.
    Net(NetCmd),
    /// Run the whole analysis and write the trend report.
    Report(ReportCmd),
    /// Generate a synthetic corpus.
    Synth(SynthCmd),
}

#[derive(Debug, Args)]
struct EncoderArgs {
    #[arg(long, default_value_t = 0.5)]
    pitch_threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    loudness_bin_width: f64,
    #[arg(long, default_value_t = -60.0, allow_negative_numbers = true)]
    loudness_floor: f64,
    /// Timbre calibration record from `calibrate`.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Accept a calibration computed on another corpus.
    #[arg(long)]
    force: bool,
}

impl EncoderArgs {
    fn config(&self) -> Result<EncoderConfig> {
        let timbre = match &self.calibration {
            Some(p) => Some(serde_json::from_slice::<TimbreCalibration>(&read_file(p)?)?),
            None => None,
        };
        let cfg = EncoderConfig {
            pitch_threshold: self.pitch_threshold,
            loudness: LoudnessBins::new(self.loudness_bin_width, self.loudness_floor)?,
            timbre,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SamplingArgs {
    #[arg(long, default_value_t = 5)]
    window: u32,
    #[arg(long, default_value_t = 10)]
    replicates: u32,
    /// Target beats per sample.
    #[arg(long, default_value_t = 1_000_000)]
    beats: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SamplingArgs {
    fn config(&self) -> SamplerConfig {
        SamplerConfig {
            window: self.window,
            replicates: self.replicates,
            target_beats: self.beats,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Candidate lower cut-offs, comma separated; default is powers of two.
    #[arg(long, value_delimiter = ',')]
    z_min: Option<Vec<u64>>,
    /// Bootstrap replicates for the goodness-of-fit p-value (0 skips it).
    #[arg(long, default_value_t = 0)]
    bootstrap: u32,
}

impl FitArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            z_min_candidates: self.z_min.clone(),
            bootstrap: self.bootstrap,
        }
    }
}

#[derive(Debug, Args)]
struct NullArgs {
    #[arg(long, default_value_t = 10)]
    swaps_per_edge: u32,
    #[arg(long, default_value_t = 10)]
    realizations: u32,
    /// Highest-degree nodes left out of the second set of l and C values.
    #[arg(long, default_value_t = 10)]
    exclude_hubs: usize,
}

#[derive(Debug, Args)]
struct OutDir {
    #[arg(long, env = "MUSEVO_OUT_DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SampleCmd {
    corpus: PathBuf,
    #[arg(long)]
    facet: Facet,
    /// Only this central year; every available year otherwise.
    #[arg(long, allow_negative_numbers = true)]
    year: Option<i32>,
    #[arg(long)]
    lenient: bool,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    encoder: EncoderArgs,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args)]
struct DistCmd {
    #[arg(required = true)]
    samples: Vec<PathBuf>,
    /// Corpus the samples were drawn from; enables the loudness fit.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args)]
struct NetCmd {
    #[arg(required = true)]
    samples: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    null: NullArgs,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args)]
struct ReportCmd {
    corpus: PathBuf,
    /// Facets to analyse, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = Facet::ALL.to_vec())]
    facet: Vec<Facet>,
    #[arg(long)]
    lenient: bool,
    #[arg(long, env = "MUSEVO_WORKERS")]
    workers: Option<usize>,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    encoder: EncoderArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    null: NullArgs,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    ZipfMandelbrot,
    Markov,
    LoudnessDrift,
}

#[derive(Debug, Args)]
struct SynthCmd {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 2.2)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 4096)]
    vocabulary: u16,
    /// Undirected planted graph, e.g. `0-1,1-2,2-0`.
    #[arg(long, value_delimiter = ',', value_parser = parse_edge)]
    edges: Vec<(u16, u16)>,
    /// Log of the first year's median loudness magnitude.
    #[arg(long, default_value_t = 22f64.ln())]
    mu0: f64,
    /// Median loudness change in dB per year.
    #[arg(long, default_value_t = 0.13, allow_negative_numbers = true)]
    drift: f64,
    #[arg(long, default_value_t = 0.3)]
    sigma: f64,
    /// Hold the interquartile loudness spread at this many dB.
    #[arg(long)]
    spread: Option<f64>,
    /// Inclusive range `FIRST:LAST`.
    #[arg(long, value_parser = parse_years, default_value = "1960:2009")]
    years: (i32, i32),
    #[arg(long, default_value_t = 20)]
    tracks_per_year: u32,
    #[arg(long, default_value_t = 200)]
    beats_per_track: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corpus file to write.
    #[arg(long)]
    out: PathBuf,
}

fn parse_edge(s: &str) -> std::result::Result<(u16, u16), String> {
    let (a, b) = s
        .split_once('-')
        .ok_or_else(|| format!("edge {s:?} is not A-B"))?;
    let n = |x: &str| {
        x.trim()
            .parse::<u16>()
            .map_err(|e| format!("edge {s:?}: {e}"))
    };
    Ok((n(a)?, n(b)?))
}

fn parse_years(s: &str) -> std::result::Result<(i32, i32), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("years {s:?} is not FIRST:LAST"))?;
    let n = |x: &str| {
        x.trim()
            .parse::<i32>()
            .map_err(|e| format!("years {s:?}: {e}"))
    };
    Ok((n(a)?, n(b)?))
}

fn ingest(lenient: bool) -> IngestMode {
    if lenient {
        IngestMode::Lenient
    } else {
        IngestMode::Strict
    }
}

fn load_corpus(path: &Path, mode: IngestMode) -> Result<ParsedCorpus> {
    let parsed = parse_corpus(&read_file(path)?, mode)?;
    if parsed.corpus.is_empty() {
        return Err(CorpusError::Empty.into());
    }
    Ok(parsed)
}

fn load_samples(paths: &[PathBuf]) -> Result<Vec<(String, Sample)>> {
    let samples = paths
        .iter()
        .map(|p| {
            let bytes = read_file(p)?;
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::Config(format!("{} is not UTF-8", p.display())))?;
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "sample".into());
            Ok((stem, Sample::parse(&text)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let only: Vec<Sample> = samples.iter().map(|(_, s)| s.clone()).collect();
    check_same_config(&only)?;
    Ok(samples)
}

fn json_line<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn sample_file_name(s: &Sample) -> String {
    format!(
        "{}_{}_r{:02}.cws",
        s.meta.facet, s.meta.center_year, s.meta.replicate_index
    )
}

fn cmd_validate(corpus: &Path, lenient: bool) -> Result<()> {
    let parsed = load_corpus(corpus, ingest(lenient))?;
    let c = &parsed.corpus;
    let (first, last) = c.year_range().expect("non-empty corpus");
    println!(
        "ok: {} tracks, {} beats, years {first}-{last}, {} skipped record(s)",
        c.num_tracks(),
        c.num_beats(),
        parsed.skipped.len()
    );
    for e in &parsed.skipped {
        eprintln!("skipped: {e}");
    }
    Ok(())
}

fn cmd_calibrate(corpus: &Path, lenient: bool, out: &Path) -> Result<()> {
    let parsed = load_corpus(corpus, ingest(lenient))?;
    let cal = calibrate_timbre(&parsed.corpus)?;
    write_atomic(out, &json_line(&cal)?)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn encoder_for(corpus: &Corpus, facet: Facet, args: &EncoderArgs) -> Result<EncoderConfig> {
    let mut enc = args.config()?;
    if facet == Facet::Timbre {
        match &enc.timbre {
            Some(cal) => cal.check_corpus(corpus, args.force)?,
            None => return Err(crate::encode::EncodeError::MissingCalibration.into()),
        }
    } else {
        enc.timbre = None;
    }
    Ok(enc)
}

fn cmd_sample(cmd: &SampleCmd) -> Result<()> {
    let parsed = load_corpus(&cmd.corpus, ingest(cmd.lenient))?;
    let corpus = &parsed.corpus;
    let sampler = cmd.sampling.config();
    let encoder = encoder_for(corpus, cmd.facet, &cmd.encoder)?;
    let plan: Vec<_> = sample_plan(corpus, cmd.facet, &sampler)?
        .into_iter()
        .filter(|d| cmd.year.is_none_or(|y| d.center_year == y))
        .collect();
    if plan.is_empty() {
        return Err(Error::Config(format!(
            "no central year {} available",
            cmd.year.map_or("at all".into(), |y| y.to_string())
        )));
    }
    let mut files = BTreeMap::new();
    for d in plan {
        let s = draw_sample(
            corpus,
            d.facet,
            d.center_year,
            d.replicate_index,
            &sampler,
            &encoder,
        )?;
        files.insert(sample_file_name(&s), s.to_bytes());
    }
    let written = write_files(&cmd.out.out, &files)?;
    println!(
        "wrote {} sample file(s) to {}",
        written.len(),
        cmd.out.out.display()
    );
    Ok(())
}

fn cmd_dist(cmd: &DistCmd) -> Result<()> {
    let samples = load_samples(&cmd.samples)?;
    let corpus = match &cmd.corpus {
        Some(p) => Some(load_corpus(p, IngestMode::Strict)?.corpus),
        None => None,
    };
    let cfg = RunConfig {
        fit: cmd.fit.config(),
        ..RunConfig::default()
    };
    let fingerprint = samples[0].1.meta.config_fingerprint.clone();
    let mut files = BTreeMap::new();
    let mut by_facet: BTreeMap<Facet, BTreeMap<i32, Vec<RankedCounts>>> = BTreeMap::new();

    #[derive(Serialize)]
    struct DistFile<'a> {
        config_fingerprint: &'a str,
        sample: &'a crate::sampler::SampleMeta,
        dist: &'a crate::pipeline::DistAnalysis,
        loudness: Option<crate::distfit::LogNormalFit>,
    }
    for (stem, s) in &samples {
        let mut d = analyze_distribution(s, &cfg, sample_seed(s, cmd.seed))?;
        let ranked = d.ranked.take().expect("fresh analysis");
        let loudness = match (&corpus, s.facet()) {
            (Some(c), Facet::Loudness) => Some(analyze_loudness(s, c)?),
            _ => None,
        };
        let mut csv = format!("# config {fingerprint}\n").into_bytes();
        ranked
            .write_csv(&mut csv)
            .map_err(|e| Error::io("rank table", e))?;
        files.insert(format!("ranks_{stem}.csv"), csv);
        files.insert(
            format!("dist_{stem}.json"),
            json_line(&DistFile {
                config_fingerprint: &fingerprint,
                sample: &s.meta,
                dist: &d,
                loudness,
            })?,
        );
        by_facet
            .entry(s.facet())
            .or_default()
            .entry(s.meta.center_year)
            .or_default()
            .push(ranked);
    }
    for (facet, years) in by_facet {
        if years.len() >= 2 {
            let rows: Vec<_> = years.into_iter().collect();
            files.insert(
                format!("corr_{facet}.csv"),
                corr_csv(&fingerprint, &correlation_matrix(&rows)?),
            );
        }
    }
    let written = write_files(&cmd.out.out, &files)?;
    println!(
        "wrote {} file(s) to {}",
        written.len(),
        cmd.out.out.display()
    );
    Ok(())
}

fn cmd_net(cmd: &NetCmd) -> Result<()> {
    let samples = load_samples(&cmd.samples)?;
    let cfg = RunConfig {
        null: NullSettings {
            swaps_per_edge: cmd.null.swaps_per_edge,
            realizations: cmd.null.realizations,
        },
        exclude_hubs: cmd.null.exclude_hubs,
        ..RunConfig::default()
    };
    let fingerprint = samples[0].1.meta.config_fingerprint.clone();

    #[derive(Serialize)]
    struct NetFile<'a> {
        config_fingerprint: &'a str,
        sample: &'a crate::sampler::SampleMeta,
        swaps_per_edge: u32,
        realizations: u32,
        exclude_hubs: usize,
        net: crate::pipeline::NetAnalysis,
    }
    let mut files = BTreeMap::new();
    for (stem, s) in &samples {
        let net = build_network(s)?;
        let mut csv = format!("# config {fingerprint}\n").into_bytes();
        net.write_edge_csv(&mut csv)
            .map_err(|e| Error::io("edge list", e))?;
        files.insert(format!("edges_{stem}.csv"), csv);
        let analysis = analyze_network(s, &cfg, sample_seed(s, cmd.seed))?;
        files.insert(
            format!("net_{stem}.json"),
            json_line(&NetFile {
                config_fingerprint: &fingerprint,
                sample: &s.meta,
                swaps_per_edge: cfg.null.swaps_per_edge,
                realizations: cfg.null.realizations,
                exclude_hubs: cfg.exclude_hubs,
                net: analysis,
            })?,
        );
    }
    let written = write_files(&cmd.out.out, &files)?;
    println!(
        "wrote {} file(s) to {}",
        written.len(),
        cmd.out.out.display()
    );
    Ok(())
}

fn cmd_report(cmd: &ReportCmd) -> Result<()> {
    let mode = ingest(cmd.lenient);
    let parsed = load_corpus(&cmd.corpus, mode)?;
    let cfg = RunConfig {
        facets: cmd.facet.clone(),
        sampler: cmd.sampling.config(),
        encoder: cmd.encoder.config()?,
        fit: cmd.fit.config(),
        null: NullSettings {
            swaps_per_edge: cmd.null.swaps_per_edge,
            realizations: cmd.null.realizations,
        },
        exclude_hubs: cmd.null.exclude_hubs,
        ingest: mode,
    };
    let cfg = prepare_config(&parsed.corpus, cfg, cmd.encoder.force)?;
    let workers = cmd
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from));
    let out = run_report(&parsed.corpus, &cfg, workers)?;
    let written = out.write_to_dir(&cmd.out.out)?;
    println!(
        "report {}: {} samples, {} skipped metric(s), {} file(s) in {}",
        out.config.fingerprint,
        out.samples.len(),
        out.skipped.len(),
        written.len(),
        cmd.out.out.display()
    );
    Ok(())
}

fn cmd_synth(cmd: &SynthCmd) -> Result<()> {
    let kind = match cmd.kind {
        Kind::ZipfMandelbrot => GeneratorKind::ZipfMandelbrot {
            beta: cmd.beta,
            c: cmd.c,
            vocabulary: cmd.vocabulary,
            ranking: None,
        },
        Kind::Markov => GeneratorKind::Markov {
            edges: cmd.edges.clone(),
        },
        Kind::LoudnessDrift => GeneratorKind::LoudnessDrift {
            mu0: cmd.mu0,
            drift_db_per_year: cmd.drift,
            sigma: cmd.sigma,
            constant_spread_db: cmd.spread,
        },
    };
    let spec = GeneratorSpec {
        kind,
        years: cmd.years,
        tracks_per_year: cmd.tracks_per_year,
        beats_per_track: cmd.beats_per_track,
        seed: cmd.seed,
    };
    let corpus = synth_corpus(&spec)?;
    write_atomic(&cmd.out, &corpus.to_bytes())?;
    println!(
        "wrote {} tracks, {} beats to {}",
        corpus.num_tracks(),
        corpus.num_beats(),
        cmd.out.display()
    );
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Validate { corpus, lenient } => cmd_validate(corpus, *lenient),
        Command::Calibrate {
            corpus,
            lenient,
            out,
        } => cmd_calibrate(corpus, *lenient, out),
        Command::Sample(c) => cmd_sample(c),
        Command::Dist(c) => cmd_dist(c),
        Command::Net(c) => cmd_net(c),
        Command::Report(c) => cmd_report(c),
        Command::Synth(c) => cmd_synth(c),
    }
}

/// Structured form of an error, as printed on stderr.
pub fn error_json(e: &Error) -> serde_json::Value {
    let mut body = serde_json::json!({ "kind": e.kind(), "message": e.to_string() });
    if let Error::Corpus(CorpusError::Invalid(records)) = e {
        body["records"] = records
            .iter()
            .map(|r| {
                serde_json::json!({
                    "line": r.line,
                    "track_id": r.track_id,
                    "problem": r.kind.to_string(),
                })
            })
            .collect();
    }
    serde_json::json!({ "error": body })
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}

pub fn main() -> ExitCode {
    run(std::env::args_os())
}
