#![allow(dead_code)]

use freqasym::grid::sysfile::parse_system;
use freqasym::grid::SystemModel;
use nalgebra::Complex;

pub const SMIB_P: f64 = 0.8;
pub const SMIB_LINE_X: f64 = 0.2;
pub const SMIB_XD: f64 = 0.3;
pub const SMIB_H: f64 = 5.0;
pub const INF_XD: f64 = 0.01;
/// System-base inertia of the machine standing in for the infinite bus.
pub const INF_H: f64 = 1.0e6;

/// One machine feeding a near-infinite bus over a lossless line; no
/// governors, no loads, no damping.
pub fn smib_system() -> SystemModel {
    let text = format!(
        r#"
base_mva = 100.0
f_nominal = 50.0

[[bus]]
id = 1
type = "slack"
voltage_magnitude = 1.0

[[bus]]
id = 2
type = "pv"
voltage_magnitude = 1.0

[[branch]]
from_bus = 1
to_bus = 2
resistance = 0.0
reactance = {SMIB_LINE_X}

[[machine]]
id = "inf"
bus = 1
rated_power = 1000.0
inertia_h = {inf_h}
transient_reactance = {INF_XD}
mechanical_power = 0.0
p_min = -10.0
p_max = 10.0

[[machine]]
id = "g"
bus = 2
rated_power = 1.0
inertia_h = {SMIB_H}
transient_reactance = {SMIB_XD}
mechanical_power = {SMIB_P}
p_max = 2.0
"#,
        inf_h = INF_H / 1000.0
    );
    parse_system(&text, "smib").expect("valid SMIB system")
}

/// Small-signal electromechanical frequency of [`smib_system`], Hz, from
/// phasor arithmetic on the closed-form operating point.
pub fn smib_oscillation_hz() -> f64 {
    let j = Complex::new(0.0, 1.0);
    let theta2 = (SMIB_P * SMIB_LINE_X).asin();
    let v1 = Complex::new(1.0, 0.0);
    let v2 = Complex::from_polar(1.0, theta2);
    let i = (v2 - v1) / (j * SMIB_LINE_X);
    let e2 = v2 + j * SMIB_XD * i;
    let e1 = v1 - j * INF_XD * i;
    let delta = e2.arg() - e1.arg();
    let x_total = SMIB_XD + SMIB_LINE_X + INF_XD;
    let k_sync = e1.norm() * e2.norm() * delta.cos() / x_total;
    // Check the operating point transfers the scheduled power.
    let p = e1.norm() * e2.norm() * delta.sin() / x_total;
    assert!((p - SMIB_P).abs() < 1e-12);
    let omega_n = 2.0 * std::f64::consts::PI * 50.0;
    let w2 = omega_n * k_sync * (1.0 / (2.0 * SMIB_H) + 1.0 / (2.0 * INF_H));
    w2.sqrt() / (2.0 * std::f64::consts::PI)
}

/// Mean spacing of upward zero crossings, by linear interpolation.
pub fn mean_period(t: &[f64], v: &[f64]) -> Option<f64> {
    let mut crossings = Vec::new();
    for k in 1..v.len() {
        if v[k - 1] < 0.0 && v[k] >= 0.0 {
            let s = v[k - 1] / (v[k - 1] - v[k]);
            crossings.push(t[k - 1] + s * (t[k] - t[k - 1]));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    Some((crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64)
}

/// Direct RMS deviation from nominal.
pub fn direct_rms(samples: &[f64], f_nominal: f64) -> f64 {
    let s: f64 = samples.iter().map(|f| (f - f_nominal) * (f - f_nominal)).sum();
    (s / samples.len() as f64).sqrt()
}
