//! Runs the eight shipped scenarios and prints the median results table.
//!
//! Usage: `cargo run --release --example scenario_table -- [seeds] [horizon_s]`

use std::time::Instant;

use freqasym::grid::sysfile::wscc9;
use freqasym::scenario::{emit_results_table, run_batch_with, Scenario};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(4);
    let horizon: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1800.0);
    let seeds: Vec<u64> = (0..seeds).collect();
    let system = wscc9();

    let mut batches = Vec::new();
    for sc in Scenario::builtin_all() {
        let started = Instant::now();
        let b = run_batch_with(&sc, &system, horizon, &seeds)?;
        let m = b.median.as_ref();
        println!(
            "S{} {:<58} σf {:.4}  σ- {:.4}  σ+ {:.4}  Δσ {:.4}  min {:>6.2}  ({:.1} s)",
            sc.id,
            sc.name,
            m.map_or(f64::NAN, |m| m.sigma),
            m.map_or(f64::NAN, |m| m.sigma_minus),
            m.map_or(f64::NAN, |m| m.sigma_plus),
            m.map_or(f64::NAN, |m| m.asymmetry),
            m.map_or(f64::NAN, |m| m.minutes_outside),
            started.elapsed().as_secs_f64()
        );
        for (seed, e) in b.failures() {
            println!("   seed {seed} failed: {e}");
        }
        batches.push(b);
    }
    print!("{}", emit_results_table(&batches)?);
    Ok(())
}
