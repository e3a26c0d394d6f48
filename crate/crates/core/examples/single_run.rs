//! One seeded run of a shipped scenario: metrics, run summary and the trace.
//!
//! Usage: `cargo run --release --example single_run -- [scenario] [seed] [horizon_s] [trace.csv]`

use freqasym::analyzer::write_trace_csv;
use freqasym::grid::sysfile::wscc9;
use freqasym::metrics::MetricsReport;
use freqasym::scenario::{Scenario, DEFAULT_BAND};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let id: u32 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(6);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let horizon: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1800.0);
    let out = args.next();

    let mut sc = Scenario::builtin(id).ok_or_else(|| anyhow::anyhow!("no shipped scenario {id}"))?;
    sc.horizon = horizon;
    println!("scenario {}: {}", sc.id, sc.name);
    let (trace, summary) = sc.simulate(&wscc9(), seed)?;
    let report = MetricsReport::compute(&trace, DEFAULT_BAND)?.with_losses(summary.p_loss_mean, summary.q_loss_mean);
    print!("{}\n{}", report.to_text(), summary.to_text());
    if let Some(path) = out {
        write_trace_csv(&path, &trace)?;
        println!("trace written to {path}");
    }
    Ok(())
}
