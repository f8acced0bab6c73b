//! Photon time-tag streams: parsing, serialization, arrival histograms,
//! window counts and the two-detector (HBT) correlator.
//!
//! Two on-disk formats are supported:
//!
//! * CSV with optional header `channel,timestamp_ps`, one event per line;
//! * binary: magic `TTG1` followed by 8-byte little-endian records holding
//!   the channel in the low byte and a 56-bit picosecond timestamp above it.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{ensure_positive, Error, Result};

pub const CSV_HEADER: &str = "channel,timestamp_ps";
pub const BINARY_MAGIC: &[u8; 4] = b"TTG1";
const MAX_TIMESTAMP: u64 = (1 << 56) - 1;
const MAX_CHANNEL: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TagEvent {
    pub channel: u8,
    pub timestamp_ps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagFormat {
    Csv,
    Binary,
}

impl std::str::FromStr for TagFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TagFormat::Csv),
            "binary" | "bin" | "ttg" => Ok(TagFormat::Binary),
            other => Err(Error::invalid("format", format!("unknown tag format `{other}`"))),
        }
    }
}

/// Time-ordered detection events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagStream {
    events: Vec<TagEvent>,
    /// Set when the input was out of order and had to be sorted.
    pub resorted: bool,
}

impl TagStream {
    /// Builds a stream, sorting (stably) if necessary.
    pub fn from_events(mut events: Vec<TagEvent>) -> Result<Self> {
        for (i, e) in events.iter().enumerate() {
            check_event(e).map_err(|m| Error::Parse {
                location: format!("event {i}"),
                message: m,
            })?;
        }
        let resorted = !is_sorted(&events);
        if resorted {
            events.sort_by_key(|e| e.timestamp_ps);
        }
        Ok(TagStream { events, resorted })
    }

    pub fn events(&self) -> &[TagEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn channel_count(&self, channel: u8) -> usize {
        self.events.iter().filter(|e| e.channel == channel).count()
    }

    fn channel_times(&self, channel: u8) -> Vec<i64> {
        self.events
            .iter()
            .filter(|e| e.channel == channel)
            .map(|e| e.timestamp_ps as i64)
            .collect()
    }
}

fn is_sorted(events: &[TagEvent]) -> bool {
    events.windows(2).all(|w| w[0].timestamp_ps <= w[1].timestamp_ps)
}

fn check_event(e: &TagEvent) -> std::result::Result<(), String> {
    if e.channel > MAX_CHANNEL {
        return Err(format!("channel {} out of range 0..={MAX_CHANNEL}", e.channel));
    }
    if e.timestamp_ps > MAX_TIMESTAMP {
        return Err(format!("timestamp {} exceeds 56 bits", e.timestamp_ps));
    }
    Ok(())
}

pub fn parse_tags(input: &[u8], format: TagFormat) -> Result<TagStream> {
    match format {
        TagFormat::Csv => parse_csv(input),
        TagFormat::Binary => parse_binary(input),
    }
}

fn parse_csv(input: &[u8]) -> Result<TagStream> {
    let text = std::str::from_utf8(input).map_err(|e| Error::Parse {
        location: format!("byte {}", e.valid_up_to()),
        message: "input is not valid UTF-8".into(),
    })?;
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line_no == 1 && line.replace(' ', "") == CSV_HEADER {
            continue;
        }
        let err = |message: String| Error::Parse {
            location: format!("line {line_no}"),
            message,
        };
        let mut fields = line.split(',').map(str::trim);
        let (Some(ch), Some(ts), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(err(format!("expected `channel,timestamp_ps`, got `{line}`")));
        };
        let channel: u8 = ch.parse().map_err(|_| err(format!("bad channel `{ch}`")))?;
        let timestamp_ps: u64 = ts.parse().map_err(|_| err(format!("bad timestamp `{ts}`")))?;
        let ev = TagEvent { channel, timestamp_ps };
        check_event(&ev).map_err(err)?;
        events.push(ev);
    }
    TagStream::from_events(events)
}

fn parse_binary(input: &[u8]) -> Result<TagStream> {
    if input.is_empty() {
        return Ok(TagStream::default());
    }
    if input.len() < 4 || &input[..4] != BINARY_MAGIC {
        return Err(Error::Parse {
            location: "byte 0".into(),
            message: "missing TTG1 magic".into(),
        });
    }
    let body = &input[4..];
    if body.len() % 8 != 0 {
        return Err(Error::Parse {
            location: format!("byte {}", 4 + body.len() / 8 * 8),
            message: format!("truncated record ({} trailing bytes)", body.len() % 8),
        });
    }
    let mut events = Vec::with_capacity(body.len() / 8);
    let mut last = 0u64;
    for (i, rec) in body.chunks_exact(8).enumerate() {
        let offset = 4 + 8 * i;
        let word = u64::from_le_bytes(rec.try_into().expect("chunk of 8"));
        let ev = TagEvent {
            channel: (word & 0xff) as u8,
            timestamp_ps: word >> 8,
        };
        let err = |message: String| Error::Parse {
            location: format!("byte {offset}"),
            message,
        };
        check_event(&ev).map_err(err)?;
        if ev.timestamp_ps < last {
            return Err(err(format!(
                "timestamp {} precedes the previous record ({last})",
                ev.timestamp_ps
            )));
        }
        last = ev.timestamp_ps;
        events.push(ev);
    }
    Ok(TagStream {
        events,
        resorted: false,
    })
}

pub fn serialize_tags(stream: &TagStream, format: TagFormat) -> Vec<u8> {
    match format {
        TagFormat::Csv => {
            let mut out = String::with_capacity(16 * stream.len() + 32);
            out.push_str(CSV_HEADER);
            out.push('\n');
            for e in &stream.events {
                let _ = writeln!(out, "{},{}", e.channel, e.timestamp_ps);
            }
            out.into_bytes()
        }
        TagFormat::Binary => {
            let mut out = Vec::with_capacity(4 + 8 * stream.len());
            out.extend_from_slice(BINARY_MAGIC);
            for e in &stream.events {
                let word = (e.timestamp_ps << 8) | e.channel as u64;
                out.extend_from_slice(&word.to_le_bytes());
            }
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// Bin edges in seconds, strictly increasing.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// CSV with columns `tau_s,value` (bin centres).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_s,value\n");
        for (c, n) in self.centers().iter().zip(&self.counts) {
            let _ = writeln!(out, "{c:e},{n}");
        }
        out
    }
}

/// Phase of a timestamp within the sync period, ps.
fn fold(timestamp_ps: u64, period_ps: f64) -> f64 {
    (timestamp_ps as f64).rem_euclid(period_ps)
}

/// Arrival-time histogram of all events folded modulo `sync_period`; the
/// last bin is truncated at the period.
pub fn arrival_histogram(stream: &TagStream, sync_period: f64, bin: f64) -> Result<Histogram> {
    ensure_positive("sync_period", sync_period)?;
    ensure_positive("bin", bin)?;
    if bin >= sync_period {
        return Err(Error::invalid("bin", "must be smaller than the sync period"));
    }
    let n_bins = (sync_period / bin - 1e-9).ceil() as usize;
    let mut bin_edges: Vec<f64> = (0..n_bins).map(|i| i as f64 * bin).collect();
    bin_edges.push(sync_period);
    let mut counts = vec![0u64; n_bins];
    let (period_ps, bin_ps) = (sync_period * 1e12, bin * 1e12);
    for e in &stream.events {
        let i = ((fold(e.timestamp_ps, period_ps) / bin_ps) as usize).min(n_bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram { bin_edges, counts })
}

/// Number of events whose folded arrival time lies in `[t_a, t_b)`.
pub fn window_counts(stream: &TagStream, sync_period: f64, window: (f64, f64)) -> Result<u64> {
    ensure_positive("sync_period", sync_period)?;
    let (ta, tb) = window;
    if !(ta >= 0.0 && ta < tb && tb <= sync_period) {
        return Err(Error::invalid("window", "need 0 <= t_a < t_b <= sync_period"));
    }
    let period_ps = sync_period * 1e12;
    let (a, b) = (ta * 1e12, tb * 1e12);
    Ok(stream
        .events
        .iter()
        .filter(|e| {
            let p = fold(e.timestamp_ps, period_ps);
            p >= a && p < b
        })
        .count() as u64)
}

/// Normalized cross-correlation of channel-1 minus channel-0 delays.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlation {
    /// Bin centres, s; bin k is centred at k·bin.
    pub tau: Vec<f64>,
    pub coincidences: Vec<u64>,
    pub g2: Vec<f64>,
    /// Mean raw count of the normalization bins.
    pub normalization: f64,
}

impl Correlation {
    /// Normalized value of the bin containing `tau`.
    pub fn value_at(&self, tau: f64) -> Option<f64> {
        let bin = self.tau.get(1).zip(self.tau.first()).map(|(b, a)| b - a)?;
        let k = ((tau - self.tau[0]) / bin).round();
        (k >= 0.0).then_some(k as usize).and_then(|k| self.g2.get(k).copied())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_s,value\n");
        for (t, g) in self.tau.iter().zip(&self.g2) {
            let _ = writeln!(out, "{t:e},{g:e}");
        }
        out
    }
}

/// Coincidence histogram of t₁ − t₀ over ±`tau_max`, normalized so that the
/// mean of the bins containing ±`normalize_at` is one.
pub fn g2_correlator(stream: &TagStream, tau_max: f64, bin: f64, normalize_at: f64) -> Result<Correlation> {
    ensure_positive("tau_max", tau_max)?;
    ensure_positive("bin", bin)?;
    ensure_positive("normalize_at", normalize_at)?;
    let t0 = stream.channel_times(0);
    let t1 = stream.channel_times(1);
    if t0.is_empty() {
        return Err(Error::MissingChannel(0));
    }
    if t1.is_empty() {
        return Err(Error::MissingChannel(1));
    }
    let half = (tau_max / bin).round() as i64;
    if half < 1 {
        return Err(Error::invalid("bin", "must be smaller than tau_max"));
    }
    let k_norm = (normalize_at / bin).round() as i64;
    if k_norm > half {
        return Err(Error::invalid("normalize_at", "must lie inside ±tau_max"));
    }
    let n_bins = (2 * half + 1) as usize;
    let bin_ps = bin * 1e12;
    // bins cover [(k − ½)·bin, (k + ½)·bin)
    let reach = ((half as f64 + 0.5) * bin_ps).floor() as i64;
    let mut coincidences = vec![0u64; n_bins];
    let mut lo = 0usize;
    for &a in &t0 {
        while lo < t1.len() && t1[lo] < a - reach {
            lo += 1;
        }
        let mut j = lo;
        while j < t1.len() && t1[j] <= a + reach {
            let k = ((t1[j] - a) as f64 / bin_ps).round() as i64;
            if k.abs() <= half {
                coincidences[(k + half) as usize] += 1;
            }
            j += 1;
        }
    }
    let normalization = 0.5 * (coincidences[(half + k_norm) as usize] + coincidences[(half - k_norm) as usize]) as f64;
    if normalization == 0.0 {
        return Err(Error::Domain("no coincidences in the normalization bins".into()));
    }
    let g2 = coincidences.iter().map(|&c| c as f64 / normalization).collect();
    let tau = (-half..=half).map(|k| k as f64 * bin).collect();
    Ok(Correlation {
        tau,
        coincidences,
        g2,
        normalization,
    })
}

/// Synthetic pulsed sources for testing the pipeline against known ground
/// truth.
pub mod synth {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1, Normal, Poisson};

    use super::{TagEvent, TagStream};

    /// Light statistics of each pulse.
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum PulseStatistics {
        /// Fixed intensity (Poissonian counts).
        Coherent,
        /// Exponentially distributed intensity shared by both detectors.
        Thermal,
    }

    /// Pulsed source split 50:50 onto two detectors.
    #[derive(Debug, Clone, Copy)]
    pub struct HbtSource {
        pub statistics: PulseStatistics,
        pub period_ps: u64,
        /// Mean detections per pulse and detector.
        pub mean_per_detector: f64,
        /// Gaussian timing jitter (pulse width plus detector), ps rms.
        pub jitter_ps: f64,
        pub pulses: u64,
    }

    pub fn hbt_stream(src: &HbtSource, seed: u64) -> TagStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jitter = Normal::new(0.0, src.jitter_ps).expect("finite jitter");
        let offset = 10.0 * src.jitter_ps;
        let mut events = Vec::new();
        for p in 0..src.pulses {
            let intensity = match src.statistics {
                PulseStatistics::Coherent => 1.0,
                PulseStatistics::Thermal => Exp1.sample(&mut rng),
            };
            let mean = src.mean_per_detector * intensity;
            for channel in 0..2u8 {
                let n = if mean > 0.0 {
                    Poisson::new(mean).expect("positive mean").sample(&mut rng) as u64
                } else {
                    0
                };
                for _ in 0..n {
                    let t = p as f64 * src.period_ps as f64 + offset + jitter.sample(&mut rng);
                    events.push(TagEvent {
                        channel,
                        timestamp_ps: t.max(0.0).round() as u64,
                    });
                }
            }
        }
        TagStream::from_events(events).expect("generated events are valid")
    }

    /// One storage-and-retrieval run on a single detector: per sync period, a
    /// retrieved photon with probability `p_signal` near `retrieval_at_ps`
    /// and read-out noise with probability `p_noise` spread uniformly over
    /// `noise_span_ps` (both relative to the sync).
    #[derive(Debug, Clone, Copy)]
    pub struct MemoryRun {
        pub period_ps: u64,
        pub pulses: u64,
        pub p_signal: f64,
        pub retrieval_at_ps: f64,
        pub retrieval_width_ps: f64,
        pub p_noise: f64,
        pub noise_span_ps: (f64, f64),
    }

    pub fn memory_run(run: &MemoryRun, seed: u64) -> TagStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = Normal::new(0.0, run.retrieval_width_ps).expect("finite width");
        let mut events = Vec::new();
        let (na, nb) = run.noise_span_ps;
        for p in 0..run.pulses {
            let base = p as f64 * run.period_ps as f64;
            let mut hits = Vec::new();
            if rng.gen::<f64>() < run.p_signal {
                hits.push(run.retrieval_at_ps + width.sample(&mut rng));
            }
            if rng.gen::<f64>() < run.p_noise {
                hits.push(na + (nb - na) * rng.gen::<f64>());
            }
            for h in hits {
                let t = h.clamp(0.0, run.period_ps as f64 - 1.0);
                events.push(TagEvent {
                    channel: 0,
                    timestamp_ps: (base + t).round() as u64,
                });
            }
        }
        TagStream::from_events(events).expect("generated events are valid")
    }
}
