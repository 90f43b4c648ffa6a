use std::collections::{BTreeMap, BTreeSet};

use musevo::corpus::BeatDescriptor;
use musevo::sampler::{draw_sample, sample_plan, SamplerConfig};
use musevo::synthkit::{synth_corpus, GeneratorKind, GeneratorSpec};
use musevo::{Corpus, EncoderConfig, Facet, Track};

fn track(id: String, year: i32, beats: usize) -> Track {
    Track {
        track_id: id,
        year,
        beats: (0..beats)
            .map(|b| {
                let mut chroma = [0.0; 12];
                chroma[b % 12] = 1.0;
                BeatDescriptor {
                    chroma,
                    timbre: [0.0; 12],
                    loudness_db: -10.0,
                }
            })
            .collect(),
    }
}

fn cfg(target: u64, window: u32, seed: u64) -> SamplerConfig {
    SamplerConfig {
        window,
        replicates: 1,
        target_beats: target,
        seed,
    }
}

/// Inclusion probability of every track, by enumerating all draw orders.
fn enumeration_oracle(lengths: &[u64], target: u64) -> Vec<f64> {
    fn permute(rest: &mut Vec<usize>, order: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(order.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            order.push(v);
            permute(rest, order, out);
            order.pop();
            rest.insert(i, v);
        }
    }
    let mut orders = Vec::new();
    permute(
        &mut (0..lengths.len()).collect(),
        &mut Vec::new(),
        &mut orders,
    );
    let mut hits = vec![0usize; lengths.len()];
    for order in &orders {
        let mut total = 0;
        for &t in order {
            if total >= target {
                break;
            }
            total += lengths[t];
            hits[t] += 1;
        }
    }
    hits.iter()
        .map(|&h| h as f64 / orders.len() as f64)
        .collect()
}

#[test]
fn equal_tracks_are_selected_binomially() {
    let corpus = Corpus::from_tracks(
        (0..500)
            .map(|i| track(format!("t{i:03}"), 2000, 100))
            .collect(),
    )
    .unwrap();
    let enc = EncoderConfig::default();
    let reps = 1000;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for r in 0..reps {
        let s = draw_sample(&corpus, Facet::Pitch, 2000, r, &cfg(10_000, 1, 11), &enc).unwrap();
        assert_eq!(s.track_ids.len(), 100);
        assert_eq!(s.meta.total_beats, 10_000);
        assert!(!s.meta.shortfall);
        let unique: BTreeSet<&String> = s.track_ids.iter().collect();
        assert_eq!(unique.len(), 100, "drawn without replacement");
        for id in s.track_ids {
            *counts.entry(id).or_default() += 1;
        }
    }
    let p = enumeration_oracle(&[100; 5], 200)[0];
    assert_eq!(p, 0.4);
    // 100 of 500 per replicate: Bin(1000, 0.2) per track
    let (mean, var) = (reps as f64 * 0.2, reps as f64 * 0.2 * 0.8);
    let mut chi2 = 0.0;
    for i in 0..500 {
        let c = *counts.get(&format!("t{i:03}")).unwrap_or(&0) as f64;
        assert!((c - mean).abs() <= 5.0 * var.sqrt(), "track {i}: {c}");
        chi2 += (c - mean).powi(2) / var;
    }
    // the 500 counts sum to a constant, so chi2 has 499 dof with sd ~31.6
    assert!(
        (chi2 - 499.0).abs() <= 3.0 * (2.0f64 * 499.0).sqrt(),
        "chi2 {chi2}"
    );
}

#[test]
fn unequal_tracks_follow_enumeration_oracle() {
    let lengths = [1u64, 2, 3, 5, 8, 13];
    let target = 10;
    let oracle = enumeration_oracle(&lengths, target);
    let tracks = lengths
        .iter()
        .enumerate()
        .map(|(i, &n)| track(format!("u{i}"), 1990, n as usize))
        .collect();
    let corpus = Corpus::from_tracks(tracks).unwrap();
    let enc = EncoderConfig::default();
    let reps = 20_000u32;
    let mut hits = [0u32; 6];
    for r in 0..reps {
        let s = draw_sample(&corpus, Facet::Pitch, 1990, r, &cfg(target, 1, 3), &enc).unwrap();
        assert!(s.meta.total_beats >= target);
        for id in &s.track_ids {
            hits[id[1..].parse::<usize>().unwrap()] += 1;
        }
    }
    for (i, &p) in oracle.iter().enumerate() {
        let sd = (reps as f64 * p * (1.0 - p)).sqrt();
        let got = hits[i] as f64;
        assert!(
            (got - reps as f64 * p).abs() <= 5.0 * sd.max(1.0),
            "track {i}: {got} vs p={p}"
        );
    }
}

#[test]
fn replicate_index_changes_only_the_selection() {
    let corpus = Corpus::from_tracks(
        (0..50)
            .map(|i| track(format!("r{i:02}"), 2000, 10))
            .collect(),
    )
    .unwrap();
    let enc = EncoderConfig::default();
    let c = cfg(100, 1, 5);
    let a = draw_sample(&corpus, Facet::Pitch, 2000, 0, &c, &enc).unwrap();
    let again = draw_sample(&corpus, Facet::Pitch, 2000, 0, &c, &enc).unwrap();
    let b = draw_sample(&corpus, Facet::Pitch, 2000, 1, &c, &enc).unwrap();
    assert_eq!(a.to_bytes(), again.to_bytes());
    assert_ne!(a.track_ids, b.track_ids);
    assert_eq!(a.meta.config_fingerprint, b.meta.config_fingerprint);
    assert_eq!(a.meta.total_beats, b.meta.total_beats);
}

#[test]
fn full_plan_satisfies_invariants() {
    // 20 years × 50 tracks × 100 beats = 10^5 beats
    let spec = GeneratorSpec {
        kind: GeneratorKind::ZipfMandelbrot {
            beta: 2.2,
            c: 1.0,
            vocabulary: 4096,
            ranking: None,
        },
        years: (1980, 1999),
        tracks_per_year: 50,
        beats_per_track: 100,
        seed: 8,
    };
    let corpus = synth_corpus(&spec).unwrap();
    assert_eq!(corpus.num_beats(), 100_000);
    let enc = EncoderConfig::default();
    let c = SamplerConfig {
        window: 5,
        replicates: 3,
        target_beats: 5_000,
        seed: 1,
    };
    let plan = sample_plan(&corpus, Facet::Pitch, &c).unwrap();
    assert_eq!(plan.len(), 24 * 3);
    for d in &plan {
        let s = d.draw(&corpus, &c, &enc).unwrap();
        assert_eq!(s.meta.center_year, d.center_year);
        assert_eq!(s.meta.replicate_index, d.replicate_index);
        assert_eq!(s.track_ids.len(), s.sequences.len());
        let unique: BTreeSet<&String> = s.track_ids.iter().collect();
        assert_eq!(unique.len(), s.track_ids.len());
        let total: u64 = s.sequences.iter().map(|q| q.len() as u64).sum();
        assert_eq!(total, s.meta.total_beats);
        // track integrity: every sequence is exactly one encoded track
        for (id, seq) in s.track_ids.iter().zip(&s.sequences) {
            let t = corpus.track(id).unwrap();
            assert!((t.year - d.center_year).abs() <= 2);
            assert_eq!(seq, &enc.encode_track(Facet::Pitch, t).unwrap());
        }
        let window_beats: u64 = corpus
            .tracks_in_years(d.center_year - 2, d.center_year + 2)
            .iter()
            .map(|&i| corpus.tracks()[i].len() as u64)
            .sum();
        if s.meta.shortfall {
            assert_eq!(s.meta.total_beats, window_beats);
            assert!(window_beats < c.target_beats);
        } else {
            assert!(s.meta.total_beats >= c.target_beats);
            // the last track is what crossed the target
            let last = s.sequences.last().unwrap().len() as u64;
            assert!(s.meta.total_beats - last < c.target_beats);
        }
        let parsed = musevo::Sample::parse(std::str::from_utf8(&s.to_bytes()).unwrap()).unwrap();
        assert_eq!(parsed, s);
    }
}

#[test]
fn shuffled_input_gives_identical_samples() {
    let tracks: Vec<Track> = (0..40)
        .map(|i| track(format!("s{i:02}"), 2000 + i % 3, 5 + i as usize))
        .collect();
    let mut reversed = tracks.clone();
    reversed.reverse();
    let a = Corpus::from_tracks(tracks).unwrap();
    let b = Corpus::from_tracks(reversed).unwrap();
    let enc = EncoderConfig::default();
    let c = cfg(100, 3, 2);
    for y in a.years_available(3).unwrap() {
        let sa = draw_sample(&a, Facet::Loudness, y, 0, &c, &enc).unwrap();
        let sb = draw_sample(&b, Facet::Loudness, y, 0, &c, &enc).unwrap();
        assert_eq!(sa.to_bytes(), sb.to_bytes());
    }
}
