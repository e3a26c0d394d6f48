//! Ingests SCADA-style files with ISO-8601 timestamps, handles a gap, and
//! compares two windows.
//!
//! Usage: `cargo run --example analyze_trace`

use std::fmt::Write as _;

use chrono::{Duration, NaiveDate};
use freqasym::analyzer::{analyze, compare_windows, parse_frequency_str, GapPolicy, IngestOptions};
use freqasym::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// One hour of 1 s data; `skew` pulls the lower half of the distribution in.
fn window(seed: u64, skew: f64, skip: std::ops::Range<i64>) -> String {
    let start = NaiveDate::from_ymd_opt(2024, 1, 27).unwrap().and_hms_opt(10, 0, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut csv = String::from("timestamp,frequency\n");
    for k in 0..3600 {
        if skip.contains(&k) {
            continue;
        }
        let mut d: f64 = noise.sample(&mut rng);
        if d < 0.0 {
            d *= skew;
        }
        let t = start + Duration::seconds(k);
        let _ = writeln!(csv, "{},{:.4}", t.format("%Y-%m-%dT%H:%M:%S"), 50.0 + d);
    }
    csv
}

fn main() -> anyhow::Result<()> {
    let opts = IngestOptions::default();
    let off = parse_frequency_str(&window(9, 1.0, 0..0), "apc-off", &opts)?;
    let on_text = window(10, 0.45, 1200..1230);

    match parse_frequency_str(&on_text, "apc-on", &opts) {
        Err(e @ Error::GapPolicyViolation { .. }) => println!("strict ingest refuses the second file: {e}"),
        other => anyhow::bail!("expected a gap error, got {other:?}"),
    }
    let held = IngestOptions {
        gap_policy: GapPolicy::HoldLast,
        ..opts
    };
    let on = parse_frequency_str(&on_text, "apc-on", &held)?;
    println!("hold-last fills the gap: {} samples\n", on.len());

    let (a, _) = analyze(&off, 0.1, 0.005)?;
    let (b, pd) = analyze(&on, 0.1, 0.005)?;
    println!("window A\n{}\nwindow B\n{}", a.to_text(), b.to_text());
    println!("{}", compare_windows(&a, &b)?.to_text());
    let (mean, sd) = pd.moments();
    println!("window B histogram: mean {mean:.4} Hz, sd {sd:.4} Hz over {} bins", pd.densities.len());
    Ok(())
}
