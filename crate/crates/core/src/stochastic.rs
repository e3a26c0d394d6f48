//! Mean-reverting jump-diffusion noise channels and wind-ramp schedules.
//!
//! Each channel follows
//!
//! ```text
//! dκ = α(μ − κ) dt + b dW + c dJ
//! ```
//!
//! where `J` is a compound Poisson process with rate `λ` and
//! `Normal(0, jump_sigma²)` marks. Channels are advanced with Euler–Maruyama.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseChannel {
    pub value: f64,
    pub mean: f64,
    /// α, 1/s.
    pub reversion_rate: f64,
    /// b, units/√s.
    pub diffusion: f64,
    /// λ, events/s.
    pub jump_rate: f64,
    pub jump_sigma: f64,
    /// c, dimensionless.
    pub jump_scale: f64,
}

impl NoiseChannel {
    /// Ornstein–Uhlenbeck channel started at its mean with the given
    /// stationary standard deviation and no jumps.
    pub fn ou(mean: f64, reversion_rate: f64, stationary_sigma: f64) -> NoiseChannel {
        NoiseChannel {
            value: mean,
            mean,
            reversion_rate,
            diffusion: stationary_sigma * (2.0 * reversion_rate).sqrt(),
            jump_rate: 0.0,
            jump_sigma: 0.0,
            jump_scale: 1.0,
        }
    }

    pub fn with_jumps(mut self, rate: f64, sigma: f64) -> NoiseChannel {
        self.jump_rate = rate;
        self.jump_sigma = sigma;
        self
    }

    /// A channel that never moves.
    pub fn constant(value: f64) -> NoiseChannel {
        NoiseChannel {
            value,
            mean: value,
            reversion_rate: 1.0,
            diffusion: 0.0,
            jump_rate: 0.0,
            jump_sigma: 0.0,
            jump_scale: 0.0,
        }
    }

    /// Stationary variance of the diffusion part, b²/(2α).
    pub fn stationary_variance(&self) -> f64 {
        self.diffusion * self.diffusion / (2.0 * self.reversion_rate)
    }

    pub fn is_quiet(&self) -> bool {
        self.diffusion == 0.0 && (self.jump_rate == 0.0 || self.jump_sigma * self.jump_scale == 0.0)
    }

    fn validate(&self) {
        debug_assert!(self.reversion_rate > 0.0);
        debug_assert!(self.diffusion >= 0.0);
        debug_assert!(self.jump_rate >= 0.0 && self.jump_sigma >= 0.0);
    }

    /// Deterministic part of one Euler–Maruyama step plus the supplied
    /// Gaussian increment `z` and compound jump `jump`.
    #[inline]
    fn update(&self, dt: f64, z: f64, jump: f64) -> f64 {
        self.value
            + self.reversion_rate * (self.mean - self.value) * dt
            + self.diffusion * dt.sqrt() * z
            + self.jump_scale * jump
    }
}

/// Sum of `Poisson(rate·dt)` many `Normal(0, sigma²)` draws, and the count.
fn compound_jump<R: Rng + ?Sized>(rate: f64, sigma: f64, dt: f64, rng: &mut R) -> (f64, u64) {
    if rate <= 0.0 {
        return (0.0, 0);
    }
    let count = Poisson::new(rate * dt)
        .expect("positive Poisson mean")
        .sample(rng) as u64;
    let mut sum = 0.0;
    for _ in 0..count {
        let z: f64 = rng.sample(StandardNormal);
        sum += sigma * z;
    }
    (sum, count)
}

/// One Euler–Maruyama step of `ch` using a single random stream.
pub fn channel_step<R: Rng + ?Sized>(ch: &NoiseChannel, dt: f64, rng: &mut R) -> f64 {
    assert!(dt > 0.0, "channel_step needs dt > 0");
    ch.validate();
    let z: f64 = rng.sample(StandardNormal);
    let (jump, _) = compound_jump(ch.jump_rate, ch.jump_sigma, dt, rng);
    ch.update(dt, z, jump)
}

/// Deterministic per-run random stream for a keyed purpose.
///
/// ChaCha is counter based: streams with different keys are independent, so
/// adding a channel leaves every other channel's draws untouched.
pub fn stream(seed: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// A noise channel together with its own diffusion and jump streams.
#[derive(Debug, Clone)]
pub struct StochasticChannel {
    pub channel: NoiseChannel,
    diffusion_rng: ChaCha8Rng,
    jump_rng: ChaCha8Rng,
    pub jump_count: u64,
}

impl StochasticChannel {
    pub fn new(channel: NoiseChannel, seed: u64, key: u64) -> StochasticChannel {
        channel.validate();
        StochasticChannel {
            channel,
            diffusion_rng: stream(seed, key << 1),
            jump_rng: stream(seed, (key << 1) | 1),
            jump_count: 0,
        }
    }

    pub fn value(&self) -> f64 {
        self.channel.value
    }

    /// Advances the channel and returns the number of jumps in this step.
    pub fn advance(&mut self, dt: f64) -> u64 {
        let z: f64 = self.diffusion_rng.sample(StandardNormal);
        let ch = &self.channel;
        let (jump, n) = compound_jump(ch.jump_rate, ch.jump_sigma, dt, &mut self.jump_rng);
        self.channel.value = self.channel.update(dt, z, jump);
        self.jump_count += n;
        n
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    /// Event start times, s (strictly increasing).
    pub times: Vec<f64>,
    /// Shift of the wind-speed mean, m/s.
    pub magnitudes: Vec<f64>,
    /// Ramp duration, s.
    pub durations: Vec<f64>,
}

impl RampSchedule {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Shift of the wind-speed mean at time `t`.
    ///
    /// Each event ramps linearly to its magnitude over its duration, holds for
    /// the same duration, then ramps back.
    pub fn shift(&self, t: f64) -> f64 {
        let mut total = 0.0;
        for ((&t0, &m), &d) in self.times.iter().zip(&self.magnitudes).zip(&self.durations) {
            if t0 > t {
                break;
            }
            let s = t - t0;
            total += if s < d {
                m * s / d
            } else if s < 2.0 * d {
                m
            } else if s < 3.0 * d {
                m * (3.0 * d - s) / d
            } else {
                0.0
            };
        }
        total
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,magnitude_mps,duration_s\n");
        for ((t, m), d) in self.times.iter().zip(&self.magnitudes).zip(&self.durations) {
            let _ = writeln!(out, "{t},{m},{d}");
        }
        out
    }
}

/// Draws a wind-ramp schedule: Poisson event count, uniform start times,
/// normal magnitudes and uniform durations.
pub fn sample_ramp_schedule<R: Rng + ?Sized>(
    horizon: f64,
    rate: f64,
    magnitude_sigma: f64,
    duration_range: (f64, f64),
    rng: &mut R,
) -> RampSchedule {
    assert!(horizon > 0.0, "ramp schedule needs a positive horizon");
    if rate <= 0.0 {
        return RampSchedule::default();
    }
    let count = Poisson::new(rate * horizon)
        .expect("positive Poisson mean")
        .sample(rng) as usize;
    let mut times: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * horizon).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mag = Normal::new(0.0, magnitude_sigma.max(0.0)).expect("finite sigma");
    let (lo, hi) = duration_range;
    let magnitudes = times.iter().map(|_| mag.sample(rng)).collect();
    let durations = times
        .iter()
        .map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo })
        .collect();
    RampSchedule {
        times,
        magnitudes,
        durations,
    }
}

/// Multiplicative load noise shared by every load: `p = base_p·(1 + κ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadNoise {
    #[serde(default = "default_load_reversion")]
    pub reversion_rate: f64,
    /// Stationary standard deviation as a fraction of base load.
    #[serde(default = "default_load_sigma")]
    pub sigma: f64,
    /// Events/s. Zero disables jumps.
    #[serde(default)]
    pub jump_rate: f64,
    /// Jump magnitude standard deviation, fraction of base load.
    #[serde(default)]
    pub jump_sigma: f64,
}

impl Default for LoadNoise {
    fn default() -> Self {
        LoadNoise {
            reversion_rate: default_load_reversion(),
            sigma: default_load_sigma(),
            jump_rate: 0.0,
            jump_sigma: 0.0,
        }
    }
}

impl LoadNoise {
    pub fn channel(&self) -> NoiseChannel {
        NoiseChannel::ou(0.0, self.reversion_rate, self.sigma).with_jumps(self.jump_rate, self.jump_sigma)
    }
}

/// Wind-speed noise around the plant's mean speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindNoise {
    #[serde(default = "default_wind_reversion")]
    pub reversion_rate: f64,
    /// Stationary standard deviation as a fraction of the mean speed.
    #[serde(default = "default_wind_sigma")]
    pub sigma: f64,
}

impl Default for WindNoise {
    fn default() -> Self {
        WindNoise {
            reversion_rate: default_wind_reversion(),
            sigma: default_wind_sigma(),
        }
    }
}

impl WindNoise {
    pub fn channel(&self, mean_speed: f64) -> NoiseChannel {
        NoiseChannel::ou(mean_speed, self.reversion_rate, self.sigma * mean_speed)
    }
}

/// Parameters of the random wind-ramp schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampSpec {
    /// Events/s.
    pub rate: f64,
    /// m/s.
    pub magnitude_sigma: f64,
    pub duration_min: f64,
    pub duration_max: f64,
}

impl RampSpec {
    pub fn sample<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> RampSchedule {
        sample_ramp_schedule(
            horizon,
            self.rate,
            self.magnitude_sigma,
            (self.duration_min, self.duration_max),
            rng,
        )
    }
}

/// Every stochastic input of a run. `None` switches a source off.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<LoadNoise>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wind: Option<WindNoise>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramps: Option<RampSpec>,
}

impl NoiseSpec {
    pub fn quiet() -> NoiseSpec {
        NoiseSpec::default()
    }
}

fn default_load_reversion() -> f64 {
    0.5
}
fn default_load_sigma() -> f64 {
    0.01
}
fn default_wind_reversion() -> f64 {
    0.05
}
fn default_wind_sigma() -> f64 {
    0.03
}

/// Stream keys. Fixed per purpose so that switching one source on or off
/// never changes the draws of another.
pub mod keys {
    pub const LOAD_BASE: u64 = 0x1000;
    pub const WIND: u64 = 0x2000;
    pub const RAMPS: u64 = 0x3000;
}
