//! Split standard deviations, band minutes and the density histogram of a
//! synthetic trace with a heavier under-frequency tail.
//!
//! Usage: `cargo run --example frequency_metrics`

use freqasym::metrics::{estimate_pd, minutes_outside_band, sigma_total, split_sigma, FrequencyTrace, MetricsReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> anyhow::Result<()> {
    let small = FrequencyTrace::new(vec![49.97, 49.99, 50.02], 1.0, 50.0)?;
    let s = split_sigma(&small)?;
    println!(
        "[49.97, 49.99, 50.02]: sigma- {:.5} (N- {}), sigma+ {:.5} (N+ {}), sigma {:.5}",
        s.sigma_minus,
        s.n_minus,
        s.sigma_plus,
        s.n_plus,
        sigma_total(s.sigma_minus, s.n_minus, s.sigma_plus, s.n_plus)
    );

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let low = Normal::new(49.95, 0.05)?;
    let high = Normal::new(50.01, 0.03)?;
    let samples: Vec<f64> = (0..6 * 3600)
        .map(|_| if rng.random::<f64>() < 0.25 { low.sample(&mut rng) } else { high.sample(&mut rng) })
        .collect();
    let trace = FrequencyTrace::new(samples, 1.0, 50.0)?;

    let report = MetricsReport::compute(&trace, 0.1)?;
    print!("\n6 h mixture trace\n{}", report.to_text());
    let mirrored = MetricsReport::compute(&trace.mirrored(), 0.1)?;
    println!("mirrored: sigma- {:.6}, sigma+ {:.6}", mirrored.sigma_minus, mirrored.sigma_plus);
    let tight = minutes_outside_band(&trace, 0.05)?;
    println!("outside ±50 mHz: {:.1} min ({:.1} above, {:.1} below)", tight.total, tight.above, tight.below);

    let pd = estimate_pd(&trace, 0.01)?;
    println!("\nhistogram, 10 mHz bins (mass {:.6})", pd.total_mass());
    for (c, d) in pd.centers().iter().zip(&pd.densities) {
        if *d > 0.5 {
            println!("{c:>9.3} Hz {:>7.2} {}", d, "#".repeat((*d / 0.5) as usize));
        }
    }
    Ok(())
}
