//! Device-level control laws: deadbands, governors, wind-plant APC and AGC.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{AgcController, Governor, SynchronousMachine, WindPlant};

/// Offset deadband: zero inside `±half_width`, shifted linear outside.
pub fn apply_deadband(delta_f: f64, half_width: f64) -> f64 {
    debug_assert!(half_width >= 0.0);
    if delta_f > half_width {
        delta_f - half_width
    } else if delta_f < -half_width {
        delta_f + half_width
    } else {
        0.0
    }
}

/// Available aerodynamic power (pu) at wind `speed` (m/s).
///
/// Cubic between cut-in and rated speed, flat at rated power up to and
/// including cut-out, zero outside.
pub fn wind_available_power(speed: f64, plant: &WindPlant) -> f64 {
    let (ci, vr, co) = (plant.cut_in_speed, plant.rated_speed, plant.cut_out_speed);
    if speed < ci || speed > co {
        0.0
    } else if speed >= vr {
        plant.rated_power
    } else {
        let ci3 = ci * ci * ci;
        plant.rated_power * (speed * speed * speed - ci3) / (vr * vr * vr - ci3)
    }
}

/// Curtailed output at the plant's mean wind speed and nominal frequency.
pub fn wind_dispatch(plant: &WindPlant) -> f64 {
    (1.0 - plant.curtailment_fraction) * wind_available_power(plant.wind_speed, plant)
}

/// Active power order of a curtailed wind plant with droop-based APC.
///
/// The droop correction is expressed on the plant's rated power and the
/// result never leaves `[0, available]`.
pub fn apc_power_order(plant: &WindPlant, f_measured: f64, f_nominal: f64, available: f64) -> f64 {
    debug_assert!(available >= 0.0);
    let base = (1.0 - plant.curtailment_fraction) * available;
    let dev = apply_deadband(f_measured - f_nominal, plant.apc_deadband_half_width);
    let correction = -dev / (plant.apc_droop * f_nominal) * plant.rated_power;
    (base + correction).clamp(0.0, available)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkTerminal {
    pub v: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineState {
    pub delta: f64,
    pub omega: f64,
    /// Servo (mechanical power) state.
    pub p_servo: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorInput {
    /// Dispatch set-point.
    pub p_ref: f64,
    /// This machine's share of the AGC signal.
    pub agc_share: f64,
    /// Frequency deviation seen by the governor, Hz.
    pub delta_f: f64,
    pub f_nominal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineDerivatives {
    pub d_delta: f64,
    pub d_omega: f64,
    pub d_servo: f64,
    pub p_elec: f64,
    pub q_elec: f64,
    pub p_mech: f64,
    /// Governor command hit an output limit.
    pub limited: bool,
}

/// Electrical output of a machine behind its transient reactance.
pub fn machine_power(m: &SynchronousMachine, delta: f64, term: NetworkTerminal) -> (f64, f64) {
    let (s, c) = (delta - term.theta).sin_cos();
    let ev = m.emf_magnitude * term.v;
    let x = m.transient_reactance;
    (ev * s / x, (ev * c - term.v * term.v) / x)
}

/// Governor output command, clamped to the governor's output limits.
pub fn governor_command(
    gov: &Governor,
    m: &SynchronousMachine,
    input: &GovernorInput,
) -> (f64, bool) {
    let gain = m.rated_power / gov.droop;
    let dev = apply_deadband(input.delta_f, gov.deadband_half_width) / input.f_nominal;
    let raw = input.p_ref + input.agc_share - gain * dev;
    let (lo, hi) = gov.output_limits.unwrap_or((m.p_min, m.p_max));
    let cmd = raw.clamp(lo, hi);
    (cmd, cmd != raw)
}

/// Classical swing equation with a first-order governor servo.
pub fn machine_derivatives(
    m: &SynchronousMachine,
    governor: Option<&Governor>,
    state: &MachineState,
    terminal: NetworkTerminal,
    input: &GovernorInput,
) -> MachineDerivatives {
    let omega_n = 2.0 * PI * input.f_nominal;
    let (p_elec, q_elec) = machine_power(m, state.delta, terminal);
    let p_mech = state.p_servo.clamp(m.p_min, m.p_max);
    let slip = state.omega - 1.0;
    let d_omega =
        (p_mech - p_elec - m.system_damping() * slip) / (2.0 * m.system_inertia());
    let (d_servo, limited) = match governor {
        Some(gov) => {
            let (cmd, limited) = governor_command(gov, m, input);
            ((cmd - state.p_servo) / gov.servo_time_constant, limited)
        }
        None => (0.0, false),
    };
    MachineDerivatives {
        d_delta: omega_n * slip,
        d_omega,
        d_servo,
        p_elec,
        q_elec,
        p_mech,
        limited: limited || p_mech != state.p_servo,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgcOutput {
    pub controller: AgcController,
    /// Per-device set-point increments for this step.
    pub increments: BTreeMap<String, f64>,
    pub limited: bool,
}

impl AgcController {
    /// Rate of change of the AGC state for a frequency deviation (Hz),
    /// with conditional integration at the anti-windup limits.
    pub fn derivative(&self, delta_f: f64, state: f64, limits: (f64, f64)) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        let d = -self.integral_gain * self.bias * delta_f;
        if (state >= limits.1 && d > 0.0) || (state <= limits.0 && d < 0.0) {
            0.0
        } else {
            d
        }
    }

    /// Splits `amount` across participants in proportion to their factors.
    pub fn distribute(&self, amount: f64, wind_id: Option<&str>) -> BTreeMap<String, f64> {
        self.effective_participation(wind_id)
            .into_iter()
            .map(|(id, f)| (id, f * amount))
            .collect()
    }
}

/// One explicit integration step of the AGC integrator.
///
/// `limits` is the anti-windup range of the AGC state (total headroom of the
/// participating units).
pub fn agc_step(
    agc: &AgcController,
    f_coi: f64,
    f_nominal: f64,
    dt: f64,
    limits: (f64, f64),
    wind_id: Option<&str>,
) -> AgcOutput {
    let mut controller = agc.clone();
    let old = agc.state_p_agc;
    let raw = old - agc.integral_gain * agc.bias * (f_coi - f_nominal) * dt;
    let new = if agc.enabled {
        raw.clamp(limits.0, limits.1)
    } else {
        old
    };
    controller.state_p_agc = new;
    AgcOutput {
        increments: agc.distribute(new - old, wind_id),
        limited: agc.enabled && new != raw,
        controller,
    }
}
