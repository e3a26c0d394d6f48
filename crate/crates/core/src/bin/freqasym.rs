use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use freqasym::analyzer::{
    analyze, compare_windows, parse_frequency_csv_with, write_trace_csv, GapPolicy, IngestOptions,
};
use freqasym::grid::sysfile::{load_system, wscc9};
use freqasym::scenario::{emit_results_table, load_scenario, run_batch_with, Scenario, FULL_HORIZON};

#[derive(Parser)]
#[command(name = "freqasym", version, about = "Frequency asymmetry simulator and analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one or more scenarios over a batch of seeds.
    Run(RunArgs),
    /// Compute frequency-quality metrics for a measured trace.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file, or the id (1-8) of a shipped scenario. Repeatable.
    #[arg(long, required = true)]
    scenario: Vec<String>,
    /// System file; the built-in 9-bus system when omitted.
    #[arg(long)]
    system: Option<PathBuf>,
    /// Run seeds 0..N instead of the scenario's seed list.
    #[arg(long)]
    seeds: Option<u64>,
    /// Simulated seconds per seed.
    #[arg(long)]
    horizon: Option<f64>,
    /// One 48 h trajectory using the scenario's first seed.
    #[arg(long, conflicts_with_all = ["seeds", "horizon"])]
    full: bool,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long)]
    workers: Option<usize>,
    /// Skip writing per-seed trace files.
    #[arg(long)]
    no_traces: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// CSV with a timestamp column and a frequency column.
    #[arg(long)]
    input: PathBuf,
    /// Second window to compare against the first.
    #[arg(long)]
    compare: Option<PathBuf>,
    #[arg(long, default_value_t = 50.0)]
    nominal: f64,
    /// Half-width of the quality band, Hz. Samples exactly on the band edge count as inside.
    #[arg(long, default_value_t = 0.1)]
    band: f64,
    /// Histogram bin width, Hz.
    #[arg(long, default_value_t = 0.005)]
    bins: f64,
    /// Sample period declared for the file, s.
    #[arg(long, default_value_t = 1.0)]
    period: f64,
    /// error, drop or hold-last.
    #[arg(long, default_value_t = GapPolicy::Error)]
    gap_policy: GapPolicy,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Analyze(a) => analyze_cmd(a),
    }
}

fn resolve_scenario(arg: &str) -> Result<Scenario> {
    if !Path::new(arg).exists() {
        if let Ok(id) = arg.parse::<u32>() {
            return Scenario::builtin(id).with_context(|| format!("no shipped scenario {id}"));
        }
    }
    Ok(load_scenario(arg)?)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(a: RunArgs) -> Result<()> {
    let system = match &a.system {
        Some(p) => load_system(p)?,
        None => wscc9(),
    };
    let mut scenarios = a
        .scenario
        .iter()
        .map(|s| resolve_scenario(s))
        .collect::<Result<Vec<_>>>()?;
    scenarios.sort_by_key(|s| s.id);
    if scenarios.windows(2).any(|w| w[0].id == w[1].id) {
        bail!("the same scenario id was given twice");
    }
    if a.workers == Some(0) {
        bail!("--workers must be at least 1");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.workers.unwrap_or(0))
        .build()?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let mut batches = Vec::new();
    for sc in &scenarios {
        let (horizon, seeds) = if a.full {
            (FULL_HORIZON, sc.seeds.iter().take(1).copied().collect::<Vec<_>>())
        } else {
            let seeds = match a.seeds {
                Some(n) => (0..n).collect(),
                None => sc.seeds.clone(),
            };
            (a.horizon.unwrap_or(sc.horizon), seeds)
        };
        info!("scenario {}: {} seeds x {horizon} s", sc.id, seeds.len());
        let batch = pool.install(|| run_batch_with(sc, &system, horizon, &seeds))?;

        let dir = a.out.join(format!("scenario{}", sc.id));
        fs::create_dir_all(&dir)?;
        write(&dir.join("seeds.csv"), &batch.seeds_csv())?;
        write(&dir.join("summary.txt"), &batch.summary_text())?;
        for run in &batch.runs {
            if let Ok(o) = &run.outcome {
                write(&dir.join(format!("run_seed{}.txt", run.seed)), &o.summary.to_text())?;
                if !a.no_traces {
                    write_trace_csv(dir.join(format!("trace_seed{}.csv", run.seed)), &o.trace)?;
                }
            }
        }
        for (seed, e) in batch.failures() {
            eprintln!("scenario {} seed {seed} failed: {e}", sc.id);
        }
        if let Some(m) = &batch.median {
            println!(
                "scenario {}: sigma_f {:.4} Hz, sigma- {:.4}, sigma+ {:.4}, delta {:.4}, minutes outside {:.2}",
                sc.id, m.sigma, m.sigma_minus, m.sigma_plus, m.asymmetry, m.minutes_outside
            );
        }
        batches.push(batch);
    }
    write(&a.out.join("results.csv"), &emit_results_table(&batches)?)?;
    if batches.iter().all(|b| b.median.is_none()) {
        bail!("every seed failed");
    }
    Ok(())
}

fn analyze_cmd(a: AnalyzeArgs) -> Result<()> {
    let opts = IngestOptions {
        f_nominal: a.nominal,
        sample_period: a.period,
        gap_policy: a.gap_policy,
    };
    let trace = parse_frequency_csv_with(&a.input, &opts)?;
    let (report, pd) = analyze(&trace, a.band, a.bins)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write(&a.out.join("report.txt"), &report.to_text())?;
    write(&a.out.join("report.csv"), &report.to_csv())?;
    write(&a.out.join("histogram.csv"), &pd.to_csv())?;
    print!("{}", report.to_text());

    if let Some(other) = &a.compare {
        let trace_b = parse_frequency_csv_with(other, &opts)?;
        let (report_b, pd_b) = analyze(&trace_b, a.band, a.bins)?;
        write(&a.out.join("report_b.csv"), &report_b.to_csv())?;
        write(&a.out.join("histogram_b.csv"), &pd_b.to_csv())?;
        let cmp = compare_windows(&report, &report_b)?;
        write(&a.out.join("comparison.csv"), &cmp.to_csv())?;
        print!("\n{}", cmp.to_text());
    }
    Ok(())
}
