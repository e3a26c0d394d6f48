//! Offline analysis of measured frequency files.
//!
//! Input files are CSV with a header naming a timestamp column and a
//! frequency column. Timestamps may be plain seconds (elapsed or Unix
//! epoch) or ISO-8601 date-times; the trace stores elapsed time implicitly
//! as `i·sample_period` from the first accepted row.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{estimate_pd, FrequencyTrace, HistogramPD, MetricsReport};

/// Half-width of the data-integrity window around nominal, Hz.
pub const SANITY_WINDOW: f64 = 5.0;

const TIME_COLUMNS: &[&str] = &["time_s", "time", "timestamp", "t", "datetime"];
const FREQ_COLUMNS: &[&str] = &["frequency_hz", "frequency", "freq", "f", "f_hz"];

/// What to do when consecutive timestamps skip one or more sample slots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapPolicy {
    #[default]
    Error,
    /// Keep going; the trace simply has fewer samples.
    Drop,
    /// Repeat the last good sample across the gap.
    HoldLast,
}

impl FromStr for GapPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "error" => Ok(GapPolicy::Error),
            "drop" => Ok(GapPolicy::Drop),
            "hold-last" => Ok(GapPolicy::HoldLast),
            other => Err(format!("unknown gap policy `{other}` (expected error, drop or hold-last)")),
        }
    }
}

impl fmt::Display for GapPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GapPolicy::Error => "error",
            GapPolicy::Drop => "drop",
            GapPolicy::HoldLast => "hold-last",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    pub f_nominal: f64,
    /// Declared sample period, s.
    pub sample_period: f64,
    pub gap_policy: GapPolicy,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            f_nominal: 50.0,
            sample_period: 1.0,
            gap_policy: GapPolicy::Error,
        }
    }
}

/// Reads a 1 s measurement file at 50 Hz nominal.
pub fn parse_frequency_csv(path: impl AsRef<Path>, gap_policy: GapPolicy) -> Result<FrequencyTrace> {
    let opts = IngestOptions {
        gap_policy,
        ..IngestOptions::default()
    };
    parse_frequency_csv_with(path, &opts)
}

pub fn parse_frequency_csv_with(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<FrequencyTrace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_frequency_str(&text, &path.display().to_string(), opts)
}

/// Parses CSV text; `name` only labels header errors.
pub fn parse_frequency_str(text: &str, name: &str, opts: &IngestOptions) -> Result<FrequencyTrace> {
    if !(opts.sample_period > 0.0 && opts.sample_period.is_finite()) {
        return Err(Error::Precondition("sample period must be positive".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    let find = |names: &[&str], field: &str| {
        header
            .iter()
            .position(|h| names.contains(&h.to_ascii_lowercase().as_str()))
            .ok_or_else(|| Error::Parse {
                path: name.to_string(),
                line: 1,
                field: field.to_string(),
                message: format!("header must contain one of {}", names.join(", ")),
            })
    };
    let ti = find(TIME_COLUMNS, "timestamp")?;
    let fi = find(FREQ_COLUMNS, "frequency")?;

    let (lo, hi) = (opts.f_nominal - SANITY_WINDOW, opts.f_nominal + SANITY_WINDOW);
    let period = opts.sample_period;
    let mut samples: Vec<f64> = Vec::new();
    let mut prev_t: Option<f64> = None;

    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let malformed = |message: String| Error::MalformedRow { line, message };
        let (Some(ts), Some(fs)) = (rec.get(ti), rec.get(fi)) else {
            return Err(malformed(format!("expected at least {} fields, found {}", ti.max(fi) + 1, rec.len())));
        };
        let t = parse_timestamp(ts).ok_or_else(|| malformed(format!("unreadable timestamp `{ts}`")))?;
        let f: f64 = fs
            .parse()
            .map_err(|_| malformed(format!("unreadable frequency `{fs}`")))?;
        if !(f.is_finite() && (lo..=hi).contains(&f)) {
            return Err(Error::OutOfRangeFrequency { line, frequency: f, lo, hi });
        }

        if let Some(p) = prev_t {
            if t < p {
                return Err(Error::NonMonotonicTimestamps { line, timestamp: t });
            }
            let slots = ((t - p) / period).round() as usize;
            if slots == 0 {
                warn!("{name}: line {line}: duplicate timestamp skipped");
                continue;
            }
            let missing = slots - 1;
            if missing > 0 {
                match opts.gap_policy {
                    GapPolicy::Error => return Err(Error::GapPolicyViolation { line, missing }),
                    GapPolicy::Drop => warn!("{name}: line {line}: gap of {missing} samples dropped"),
                    GapPolicy::HoldLast => {
                        warn!("{name}: line {line}: gap of {missing} samples filled with last value");
                        let last = *samples.last().expect("a previous sample exists");
                        samples.extend(std::iter::repeat_n(last, missing));
                    }
                }
            }
        }
        prev_t = Some(t);
        samples.push(f);
    }
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    FrequencyTrace::new(samples, period, opts.f_nominal)
}

/// Seconds from either a number or an ISO-8601 date-time (naive values are
/// read as UTC).
fn parse_timestamp(s: &str) -> Option<f64> {
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let dt = DateTime::parse_from_rfc3339(s)
        .map(|d| d.naive_utc())
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f"))
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f"))
        .ok()?;
    let utc = dt.and_utc();
    Some(utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) * 1e-9)
}

/// `time_s,frequency_hz` with shortest round-trip float formatting.
pub fn trace_to_csv(trace: &FrequencyTrace) -> String {
    let mut out = String::with_capacity(24 * trace.len() + 32);
    out.push_str("time_s,frequency_hz\n");
    for (i, f) in trace.samples.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i as f64 * trace.sample_period, f);
    }
    out
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &FrequencyTrace) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, trace_to_csv(trace)).map_err(|e| Error::io(path, e))
}

pub fn analyze(trace: &FrequencyTrace, band_half_width: f64, bin_width: f64) -> Result<(MetricsReport, HistogramPD)> {
    if !(band_half_width >= 0.0 && band_half_width.is_finite()) {
        return Err(Error::Precondition("band half-width must be non-negative".into()));
    }
    let report = MetricsReport::compute(trace, band_half_width)?;
    let pd = estimate_pd(trace, bin_width)?;
    Ok((report, pd))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: String,
    pub a: f64,
    pub b: f64,
    /// `b − a`; positive means window B is worse.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub f_nominal: f64,
    pub band: f64,
    pub rows: Vec<MetricDelta>,
}

impl ComparisonSummary {
    pub fn get(&self, metric: &str) -> Option<&MetricDelta> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,a,b,delta\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.metric, r.a, r.b, r.delta);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{:<18}{:>14}{:>14}{:>14}\n", "metric", "A", "B", "B - A");
        for r in &self.rows {
            let _ = writeln!(out, "{:<18}{:>14.6}{:>14.6}{:>+14.6}", r.metric, r.a, r.b, r.delta);
        }
        out
    }
}

/// Side-by-side deltas of two windows analysed with the same nominal
/// frequency and band.
pub fn compare_windows(a: &MetricsReport, b: &MetricsReport) -> Result<ComparisonSummary> {
    if a.f_nominal != b.f_nominal {
        return Err(Error::MismatchedNominalFrequency { a: a.f_nominal, b: b.f_nominal });
    }
    if a.band != b.band {
        return Err(Error::MismatchedBand { a: a.band, b: b.band });
    }
    let pairs = [
        ("sigma_f", a.sigma, b.sigma),
        ("sigma_minus", a.sigma_minus, b.sigma_minus),
        ("sigma_plus", a.sigma_plus, b.sigma_plus),
        ("delta_sigma_f", a.asymmetry, b.asymmetry),
        ("minutes_outside", a.minutes_outside, b.minutes_outside),
        ("minutes_above", a.minutes_above, b.minutes_above),
        ("minutes_below", a.minutes_below, b.minutes_below),
    ];
    Ok(ComparisonSummary {
        f_nominal: a.f_nominal,
        band: a.band,
        rows: pairs
            .into_iter()
            .map(|(m, x, y)| MetricDelta {
                metric: m.to_string(),
                a: x,
                b: y,
                delta: y - x,
            })
            .collect(),
    })
}
