//! Defines a scenario inline, applies it to the 9-bus system and runs a
//! small batch alongside shipped scenario 1.
//!
//! Usage: `cargo run --release --example custom_scenario`

use freqasym::grid::sysfile::wscc9;
use freqasym::scenario::{emit_results_table, parse_scenario, run_batch_with, Scenario};

const CUSTOM: &str = r#"
id = 3
name = "Saturated units with a slow AGC"
wind_generation = false
apc = false
agc = "conv"
load_noise = true
load_jumps = true
saturation = true
horizon = 1800.0
seeds = [0, 1, 2, 3]

[saturation_limits]
redispatch_margin = 0.0

[saturation_limits.p_max_fraction]
g1 = 0.6
g2 = 0.5

[controls]
agc_integral_gain = 0.005
governor_droop = 0.06
"#;

fn main() -> anyhow::Result<()> {
    let custom = parse_scenario(CUSTOM, "inline")?;
    let sys = custom.apply(&wscc9())?;
    for m in &sys.machines {
        println!("{}: dispatch {:.3} pu, p_max {:.3} pu", m.id, m.mechanical_power, m.p_max);
    }
    let agc = sys.agc.as_ref().expect("AGC present");
    println!("AGC Ki {} participation {:?}\n", agc.integral_gain, agc.participation);

    let base = Scenario::builtin(1).expect("shipped scenario 1");
    let mut batches = Vec::new();
    for sc in [&base, &custom] {
        let b = run_batch_with(sc, &wscc9(), custom.horizon, &custom.seeds)?;
        print!("{}", b.summary_text());
        println!();
        batches.push(b);
    }
    print!("{}", emit_results_table(&batches)?);
    Ok(())
}
