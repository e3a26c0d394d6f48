//! Load and wind noise channels and a sampled wind-ramp schedule.
//!
//! Usage: `cargo run --example noise_channels -- [seed]`

use freqasym::stochastic::{keys, stream, LoadNoise, RampSpec, StochasticChannel, WindNoise};

fn main() -> anyhow::Result<()> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let dt = 0.02;

    let load = LoadNoise {
        jump_rate: 1.0 / 60.0,
        jump_sigma: 0.02,
        ..LoadNoise::default()
    };
    let mut ch = StochasticChannel::new(load.channel(), seed, keys::LOAD_BASE);
    let target = ch.channel.stationary_variance();
    let (mut sum2, n) = (0.0, 500_000);
    for _ in 0..n {
        ch.advance(dt);
        sum2 += ch.value() * ch.value();
    }
    println!(
        "load channel: {} jumps in {:.0} s, sample variance {:.3e} (diffusion alone {:.3e})",
        ch.jump_count,
        n as f64 * dt,
        sum2 / n as f64,
        target
    );

    let mut wind = StochasticChannel::new(WindNoise::default().channel(10.0), seed, keys::WIND);
    print!("wind speed every 60 s:");
    for k in 1..=15_000 {
        wind.advance(dt);
        if k % 3000 == 0 {
            print!(" {:.2}", wind.value());
        }
    }
    println!(" m/s");

    let ramps = RampSpec {
        rate: 1.0 / 1200.0,
        magnitude_sigma: 1.5,
        duration_min: 120.0,
        duration_max: 600.0,
    }
    .sample(4.0 * 3600.0, &mut stream(seed, keys::RAMPS));
    println!("\n{} ramps in 4 h:\n{}", ramps.len(), ramps.to_csv());
    for t in [0.0, 3600.0, 7200.0, 10800.0] {
        println!("mean-speed shift at t = {t:>6} s: {:+.3} m/s", ramps.shift(t));
    }
    Ok(())
}
