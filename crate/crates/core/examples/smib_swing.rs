//! Rotor swing of one machine against a stiff bus, stepped by hand.
//!
//! Usage: `cargo run --example smib_swing -- [theta] [dt]`

use freqasym::engine::{SimOptions, Simulator, StateVar};
use freqasym::grid::sysfile::parse_system;
use freqasym::stochastic::NoiseSpec;

const SYSTEM: &str = r#"
[[bus]]
id = 1
type = "slack"

[[bus]]
id = 2
type = "pv"

[[branch]]
from_bus = 1
to_bus = 2
resistance = 0.0
reactance = 0.2

[[machine]]
id = "stiff"
bus = 1
rated_power = 1000.0
inertia_h = 1000.0
transient_reactance = 0.01
mechanical_power = 0.0
p_min = -10.0
p_max = 10.0

[[machine]]
id = "g"
bus = 2
rated_power = 1.0
inertia_h = 5.0
damping_d = 2.0
transient_reactance = 0.3
mechanical_power = 0.8
p_max = 2.0
"#;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let theta: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.5);
    let dt: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.01);

    let sys = parse_system(SYSTEM, "smib")?;
    let opts = SimOptions {
        dt,
        theta,
        output_interval: dt,
    };
    let mut sim = Simulator::new(&sys, &NoiseSpec::quiet(), opts, 0.0, 0)?;
    let angle = sim.index(StateVar::Angle(1)).expect("machine g");
    let mut x = sim.state().x.clone();
    println!("equilibrium rotor angle {:.4} rad, EMFs {:?}", x[angle], sim.machine_emfs());
    x[angle] += 0.1;
    sim.set_differential(&x)?;

    println!("    t (s)   delta (rad)   speed (pu)   COI f (Hz)   Newton its");
    for k in 1..=(5.0 / dt).round() as usize {
        let d = sim.step()?;
        if k % (0.25 / dt).round().max(1.0) as usize == 0 {
            let s = sim.state();
            println!(
                "{:>9.2} {:>13.5} {:>12.6} {:>12.5} {:>12}",
                s.t,
                s.x[angle],
                sim.machine_speeds()[1],
                sim.coi_frequency(),
                d.newton_iterations
            );
        }
    }
    Ok(())
}
