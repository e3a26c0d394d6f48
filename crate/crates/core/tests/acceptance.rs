//! Acceptance suite. Runs as a plain binary so that each criterion prints a
//! single visible PASS/FAIL line and the scenario batches are shared between
//! criteria 3 and 4.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use freqasym::analyzer::{analyze, parse_frequency_csv, trace_to_csv, write_trace_csv, GapPolicy};
use freqasym::engine::{SimOptions, Simulator, StateVar};
use freqasym::grid::sysfile::wscc9;
use freqasym::metrics::{asymmetry, sigma_total, split_sigma, FrequencyTrace, MetricsReport};
use freqasym::scenario::{run_batch, BatchResult, Scenario};
use freqasym::stochastic::{channel_step, keys, stream, NoiseChannel, NoiseSpec, StochasticChannel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal as NormalDist};
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Discrete, DiscreteCDF, Normal, Poisson};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Published measurement rows as (σf, σf−, σf+, Δσf, minutes total, above, below).
const MEASURED_ROWS: [(u32, [f64; 7]); 11] = [
    (1, [0.0107, 0.0108, 0.0107, 0.0001, 0.0, 0.0, 0.0]),
    (2, [0.0314, 0.0330, 0.0294, 0.0036, 5.28, 1.27, 4.00]),
    (3, [0.0236, 0.0245, 0.0227, 0.0018, 0.2233, 0.0183, 0.205]),
    (4, [0.0602, 0.0606, 0.0598, 0.0008, 280.49, 136.38, 144.10]),
    (5, [0.0803, 0.0841, 0.0762, 0.0079, 611.41, 287.69, 323.71]),
    (6, [0.1085, 0.1254, 0.0868, 0.0386, 1073.61, 456.67, 616.94]),
    (7, [0.0794, 0.0845, 0.0745, 0.01, 575.79, 267.32, 308.47]),
    (8, [0.0635, 0.0629, 0.0641, 0.0012, 314.91, 152.70, 162.20]),
    (9, [0.0558, 0.0557, 0.0560, 0.0003, 6.6, 3.8, 2.8]),
    (10, [0.0547, 0.0259, 0.0575, 0.0316, 7.0, 7.0, 0.0]),
    (11, [0.030, 0.0359, 0.0152, 0.0207, 0.0, 0.0, 0.0]),
];

fn row(id: u32) -> [f64; 7] {
    MEASURED_ROWS.iter().find(|(r, _)| *r == id).unwrap().1
}

fn criterion_1() -> Outcome {
    let mut bad = Vec::new();
    for id in [5, 6, 7, 9, 11] {
        let r = row(id);
        let d = asymmetry(r[1], r[2]);
        if (d - r[3]).abs() > 1e-4 + 1e-12 {
            bad.push(format!("row {id}: |σ−−σ+| = {d:.4} vs {}", r[3]));
        }
    }
    for id in 4..=8 {
        let r = row(id);
        if (r[5] + r[6] - r[4]).abs() > 0.02 + 1e-9 {
            bad.push(format!("row {id}: {} + {} vs {}", r[5], r[6], r[4]));
        }
    }
    for id in 1..=8 {
        let r = row(id);
        let (lo, hi) = (r[1].min(r[2]), r[1].max(r[2]));
        if !(lo <= r[0] && r[0] <= hi) {
            bad.push(format!("row {id}: σf {} outside [{lo}, {hi}]", r[0]));
        }
    }
    check(bad.is_empty(), if bad.is_empty() { "13 identities hold".to_string() } else { bad.join("; ") })
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..2000);
        let scale = 10f64.powf(rng.random_range(-4.0..-0.5));
        let skew = rng.random_range(0.2..5.0);
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let mut d = 0.0;
                while d == 0.0 {
                    d = rng.random_range(-1.0..1.0) * scale;
                    if d > 0.0 {
                        d *= skew;
                    }
                }
                50.0 + d
            })
            .filter(|&f| f != 50.0)
            .collect();
        if samples.is_empty() {
            continue;
        }
        let trace = FrequencyTrace::new(samples, 1.0, 50.0).unwrap();
        let s = split_sigma(&trace).unwrap();
        let weighted = sigma_total(s.sigma_minus, s.n_minus, s.sigma_plus, s.n_plus);
        let direct = common::direct_rms(&trace.samples, 50.0);
        worst = worst.max((weighted - direct).abs() / direct);
    }
    check(worst < 1e-12, format!("worst relative error {worst:.2e} over 1000 traces"))
}

fn criterion_3(s1: &BatchResult) -> Outcome {
    let m = s1.median.as_ref().expect("scenario 1 median");
    let failed = s1.failures().count();
    let minutes: Vec<f64> = s1.successes().map(|(_, o)| o.report.minutes_outside).collect();
    let all_zero = minutes.iter().all(|&x| x == 0.0);
    let pass = failed == 0 && m.asymmetry < 0.15 * m.sigma && all_zero;
    check(
        pass,
        format!(
            "median Δσf {:.5} vs 0.15·σf {:.5}; max minutes outside {:.2}; failed seeds {failed}",
            m.asymmetry,
            0.15 * m.sigma,
            minutes.iter().fold(0.0f64, |a, &b| a.max(b))
        ),
    )
}

fn criterion_4(batches: &BTreeMap<u32, BatchResult>) -> Outcome {
    let m = |id: u32| batches[&id].median.clone().expect("median");
    let (s1, s2, s3, s4, s5, s6, s7, s8) = (m(1), m(2), m(3), m(4), m(5), m(6), m(7), m(8));
    let checks = [
        ("Δσf(S2) > Δσf(S1)", s2.asymmetry, s1.asymmetry, s2.asymmetry > s1.asymmetry),
        ("Δσf(S3) > Δσf(S1)", s3.asymmetry, s1.asymmetry, s3.asymmetry > s1.asymmetry),
        ("σf−(S3) > σf+(S3)", s3.sigma_minus, s3.sigma_plus, s3.sigma_minus > s3.sigma_plus),
        ("σf(S5) > σf(S4)", s5.sigma, s4.sigma, s5.sigma > s4.sigma),
        ("Δσf(S5) > Δσf(S4)", s5.asymmetry, s4.asymmetry, s5.asymmetry > s4.asymmetry),
        ("Δσf(S6) > Δσf(S5)", s6.asymmetry, s5.asymmetry, s6.asymmetry > s5.asymmetry),
        ("σf(S7) < σf(S6)", s7.sigma, s6.sigma, s7.sigma < s6.sigma),
        ("Δσf(S7) < Δσf(S6)", s7.asymmetry, s6.asymmetry, s7.asymmetry < s6.asymmetry),
        ("minutes(S7) < minutes(S6)", s7.minutes_outside, s6.minutes_outside, s7.minutes_outside < s6.minutes_outside),
        ("Δσf(S8) < Δσf(S7)", s8.asymmetry, s7.asymmetry, s8.asymmetry < s7.asymmetry),
    ];
    for (name, a, b, ok) in &checks {
        println!("    {} {name}: {a:.6} vs {b:.6}", if *ok { "ok  " } else { "FAIL" });
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.3).map(|c| c.0).collect();
    check(
        failed.is_empty(),
        if failed.is_empty() {
            "all 10 orderings hold".to_string()
        } else {
            format!("{} of 10 orderings fail: {}", failed.len(), failed.join(", "))
        },
    )
}

/// Max absolute change of the differential states over `steps` noise-free steps.
fn equilibrium_drift(system: &freqasym::grid::SystemModel, steps: usize) -> f64 {
    let mut sim = Simulator::new(system, &NoiseSpec::quiet(), SimOptions::default(), 0.0, 0).unwrap();
    let x0 = sim.state().x.clone();
    let mut worst = 0.0f64;
    for _ in 0..steps {
        sim.step().unwrap();
        let d = sim.state().x.iter().zip(&x0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(d);
    }
    worst
}

fn smib_measured_hz(theta: f64, dt: f64) -> f64 {
    let sys = common::smib_system();
    let opts = SimOptions {
        dt,
        theta,
        output_interval: dt,
    };
    let mut sim = Simulator::new(&sys, &NoiseSpec::quiet(), opts, 0.0, 0).unwrap();
    let ia = sim.index(StateVar::Angle(1)).unwrap();
    let mut x = sim.state().x.clone();
    x[ia] += 0.01;
    sim.set_differential(&x).unwrap();
    let (mut t, mut v) = (Vec::new(), Vec::new());
    let steps = (20.0 / dt).round() as usize;
    for _ in 0..steps {
        sim.step().unwrap();
        let w = sim.machine_speeds();
        t.push(sim.state().t);
        v.push(w[1] - w[0]);
    }
    1.0 / common::mean_period(&t, &v).expect("oscillation")
}

/// Differential state at `t_end` after a rotor-angle kick on the 9-bus system.
fn kicked_state(theta: f64, dt: f64, t_end: f64) -> Vec<f64> {
    let sys = Scenario::builtin(1).unwrap().apply(&wscc9()).unwrap();
    let opts = SimOptions {
        dt,
        theta,
        output_interval: dt,
    };
    let mut sim = Simulator::new(&sys, &NoiseSpec::quiet(), opts, 0.0, 0).unwrap();
    let ia = sim.index(StateVar::Angle(1)).unwrap();
    let mut x = sim.state().x.clone();
    x[ia] += 0.05;
    sim.set_differential(&x).unwrap();
    for _ in 0..(t_end / dt).round() as usize {
        sim.step().unwrap();
    }
    sim.state().x.clone()
}

fn observed_order(theta: f64, h0: f64) -> Vec<f64> {
    let hs = [h0, h0 / 2.0, h0 / 4.0, h0 / 8.0];
    let sols: Vec<Vec<f64>> = hs.iter().map(|&h| kicked_state(theta, h, 2.0)).collect();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let errs: Vec<f64> = sols.windows(2).map(|w| diff(&w[0], &w[1])).collect();
    errs.windows(2).map(|e| (e[0] / e[1]).log2()).collect()
}

fn criterion_5() -> Outcome {
    let s1 = Scenario::builtin(1).unwrap().apply(&wscc9()).unwrap();
    let s7 = Scenario::builtin(7).unwrap().apply(&wscc9()).unwrap();
    let drift = equilibrium_drift(&s1, 100_000).max(equilibrium_drift(&s7, 100_000));

    let oracle = common::smib_oscillation_hz();
    let measured = smib_measured_hz(0.5, 0.005);
    let rel = (measured - oracle).abs() / oracle;

    let trap = observed_order(0.5, 0.04);
    // Explicit Euler is unstable on the undamped swing modes at the coarser steps.
    let euler = observed_order(0.0, 0.005);
    println!("    explicit Euler observed orders {euler:.2?}");
    let order = *trap.last().unwrap();
    let pass = drift < 1e-9 && rel < 0.01 && order >= 1.0;
    check(
        pass,
        format!(
            "drift {drift:.1e} pu over 1e5 steps; SMIB {measured:.5} Hz vs {oracle:.5} Hz ({:.3}%); trapezoid orders {trap:.2?}",
            rel * 100.0
        ),
    )
}

fn criterion_6() -> Outcome {
    // Stationary variance of the default load channel.
    let ch = NoiseChannel::ou(0.0, 0.5, 0.01);
    let target = ch.diffusion * ch.diffusion / (2.0 * ch.reversion_rate);
    let mut c = StochasticChannel::new(ch, 6, keys::LOAD_BASE);
    let (mut s, mut s2) = (0.0, 0.0);
    let n = 1_000_000;
    for _ in 0..n {
        c.advance(0.02);
        let v = c.value();
        s += v;
        s2 += v * v;
    }
    let mean = s / n as f64;
    let var = s2 / n as f64 - mean * mean;
    let var_rel = (var - target).abs() / target;

    // Jump counts per window against Poisson(λT).
    let (rate, window, dt) = (0.25, 20.0, 0.02);
    let mut jc = StochasticChannel::new(NoiseChannel::ou(0.0, 0.5, 0.01).with_jumps(rate, 0.02), 6, keys::LOAD_BASE + 1);
    let per_window = (window / dt) as usize;
    let kmax = 12;
    let mut observed = vec![0.0; kmax + 1];
    let windows = 10_000;
    for _ in 0..windows {
        let mut k = 0;
        for _ in 0..per_window {
            k += jc.advance(dt);
        }
        observed[(k as usize).min(kmax)] += 1.0;
    }
    let pois = Poisson::new(rate * window).unwrap();
    let mut chi2 = 0.0;
    for (k, o) in observed.iter().enumerate() {
        let p = if k < kmax { pois.pmf(k as u64) } else { 1.0 - pois.cdf(kmax as u64 - 1) };
        let e = p * windows as f64;
        chi2 += (o - e) * (o - e) / e;
    }
    let p_value = 1.0 - ChiSquared::new(kmax as f64).unwrap().cdf(chi2);

    // Gaussian-only channels of the scenario 4 configuration, sampled five
    // correlation times apart.
    let spec = Scenario::builtin(4).unwrap().noise_spec();
    let load = spec.load.as_ref().unwrap().channel();
    let wind = spec.wind.as_ref().unwrap().channel(10.0);
    assert!(load.jump_rate == 0.0 && wind.jump_rate == 0.0);
    let skews: Vec<f64> = [(load, 1u64), (wind, 2)]
        .into_iter()
        .map(|(ch, key)| {
            let dt = 0.1 / ch.reversion_rate;
            let mut rng = stream(66, key);
            let mut ch = ch;
            let m = 1_000_000;
            let mut xs = Vec::with_capacity(m);
            for _ in 0..m {
                for _ in 0..50 {
                    ch.value = channel_step(&ch, dt, &mut rng);
                }
                xs.push(ch.value);
            }
            skewness(&xs)
        })
        .collect();

    let pass = var_rel < 0.05 && p_value > 0.001 && skews.iter().all(|s| s.abs() < 0.05);
    check(
        pass,
        format!(
            "OU variance off by {:.2}%; jump-count χ² = {chi2:.2} (p = {p_value:.3}); skewness load {:.4}, wind {:.4}",
            var_rel * 100.0,
            skews[0],
            skews[1]
        ),
    )
}

fn skewness(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Split sigmas of a Gaussian mixture around `f_nominal`, from closed-form
/// truncated second moments.
fn mixture_split(parts: &[(f64, f64, f64)]) -> (f64, f64) {
    let std = Normal::new(0.0, 1.0).unwrap();
    let (mut lo2, mut lo_p, mut hi2, mut hi_p) = (0.0, 0.0, 0.0, 0.0);
    for &(w, mu, s) in parts {
        let a = -mu / s;
        let below = (mu * mu + s * s) * std.cdf(a) - mu * s * std.pdf(a);
        lo2 += w * below;
        lo_p += w * std.cdf(a);
        hi2 += w * (mu * mu + s * s - below);
        hi_p += w * (1.0 - std.cdf(a));
    }
    ((lo2 / lo_p).sqrt(), (hi2 / hi_p).sqrt())
}

fn criterion_7(dir: &Path) -> Outcome {
    let (trace, _) = Scenario::builtin(6).unwrap().simulate(&wscc9(), 3).unwrap();
    let path = dir.join("engine_trace.csv");
    write_trace_csv(&path, &trace).unwrap();
    let back = parse_frequency_csv(&path, GapPolicy::Error).unwrap();
    let (file_report, _) = analyze(&back, 0.1, 0.005).unwrap();
    let mem = MetricsReport::compute(&trace, 0.1).unwrap();
    let fields = |r: &MetricsReport| {
        [r.sigma, r.sigma_minus, r.sigma_plus, r.asymmetry, r.minutes_outside, r.minutes_above, r.minutes_below, r.duration]
    };
    let round_trip = fields(&file_report)
        .iter()
        .zip(fields(&mem))
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let counts_equal = (file_report.n_minus, file_report.n_plus, file_report.n_total) == (mem.n_minus, mem.n_plus, mem.n_total);

    let parts = [(0.3, -0.06, 0.04), (0.7, 0.01, 0.02)];
    let (want_minus, want_plus) = mixture_split(&parts);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let dists: Vec<NormalDist<f64>> = parts.iter().map(|&(_, m, s)| NormalDist::new(50.0 + m, s).unwrap()).collect();
    let samples: Vec<f64> = (0..1_000_000)
        .map(|_| if rng.random::<f64>() < parts[0].0 { dists[0].sample(&mut rng) } else { dists[1].sample(&mut rng) })
        .collect();
    let mix = FrequencyTrace::new(samples, 1.0, 50.0).unwrap();
    let mix_path = dir.join("mixture.csv");
    fs::write(&mix_path, trace_to_csv(&mix)).unwrap();
    let (r, _) = analyze(&parse_frequency_csv(&mix_path, GapPolicy::Error).unwrap(), 0.1, 0.005).unwrap();
    let e_minus = (r.sigma_minus - want_minus).abs() / want_minus;
    let e_plus = (r.sigma_plus - want_plus).abs() / want_plus;
    let want_delta = (want_minus - want_plus).abs();
    let e_delta = (r.asymmetry - want_delta).abs() / want_delta;

    let pass = round_trip <= 1e-12 && counts_equal && e_minus < 0.05 && e_plus < 0.05 && e_delta < 0.05 && r.sigma_minus > r.sigma_plus;
    check(
        pass,
        format!(
            "round-trip max diff {round_trip:.1e}; mixture σf− {:.5} vs {want_minus:.5}, σf+ {:.5} vs {want_plus:.5}, Δσf {:.5} vs {want_delta:.5}",
            r.sigma_minus, r.sigma_plus, r.asymmetry
        ),
    )
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(key, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_8(dir: &Path) -> Outcome {
    let exe = env!("CARGO_BIN_EXE_freqasym");
    let run = |out: &Path, workers: &str| {
        let st = Command::new(exe)
            .args(["run", "--scenario", "1", "--scenario", "6", "--seeds", "3", "--horizon", "300", "--workers", workers, "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
        read_tree(out)
    };
    let a = run(&dir.join("run_a"), "1");
    let b = run(&dir.join("run_b"), "3");
    let runs_equal = a == b && a.keys().any(|k| k.ends_with(".csv"));

    let input = dir.join("run_a").join("scenario6").join("trace_seed0.csv");
    let analyze_once = |out: &Path| {
        let st = Command::new(exe)
            .args(["analyze", "--input"])
            .arg(&input)
            .args(["--nominal", "50", "--band", "0.1", "--bins", "0.005", "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
        read_tree(out)
    };
    let c = analyze_once(&dir.join("an_a"));
    let d = analyze_once(&dir.join("an_b"));
    let analyze_equal = c == d && c.len() == 3;
    check(
        runs_equal && analyze_equal,
        format!(
            "run: {} files identical across 1 and 3 workers = {runs_equal}; analyze: {} files identical = {analyze_equal}",
            a.len(),
            c.len()
        ),
    )
}

fn main() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name: &'static str, o: Outcome| {
        println!("criterion {name}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };

    // Criterion numbers on the command line select a subset.
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |n: u32| selected.is_empty() || selected.contains(&n);

    if want(1) {
        report("1 (metric identities on published rows)", criterion_1());
    }
    if want(2) {
        report("2 (weighted sigma exactness)", criterion_2());
    }
    if want(3) || want(4) {
        let system = wscc9();
        let mut batches = BTreeMap::new();
        for sc in Scenario::builtin_all() {
            assert_eq!((sc.seeds.len(), sc.horizon, sc.dt), (10, 7200.0, 0.02));
            let t = Instant::now();
            let b = run_batch(&sc, &system).unwrap();
            let m = b.median.as_ref().unwrap();
            println!(
                "    S{}: σf {:.5} σf− {:.5} σf+ {:.5} Δσf {:.5} minutes {:.2} ({} failed seeds, {:.0} s)",
                sc.id,
                m.sigma,
                m.sigma_minus,
                m.sigma_plus,
                m.asymmetry,
                m.minutes_outside,
                b.failures().count(),
                t.elapsed().as_secs_f64()
            );
            batches.insert(sc.id, b);
        }
        if want(3) {
            report("3 (symmetric baseline)", criterion_3(&batches[&1]));
        }
        if want(4) {
            report("4 (trend suite)", criterion_4(&batches));
        }
    }
    if want(5) {
        report("5 (integrator correctness)", criterion_5());
    }
    if want(6) {
        report("6 (stochastic process statistics)", criterion_6());
    }
    if want(7) {
        report("7 (analyzer oracle equivalence)", criterion_7(tmp.path()));
    }
    if want(8) {
        report("8 (determinism)", criterion_8(tmp.path()));
    }

    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    println!(
        "acceptance: {} of {} criteria pass ({:.0} s)",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failing: {}", failed.join(", "));
        std::process::exit(1);
    }
}
