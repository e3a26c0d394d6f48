//! Static description of the transmission network and its devices.
//!
//! A [`SystemModel`] is plain data: buses, branches, synchronous machines with
//! their governors, an optional wind plant, stochastic loads and a single-area
//! AGC. It is immutable once a run starts; scenario edits produce a new model.

pub mod controls;
pub mod network;
pub mod powerflow;
pub mod sysfile;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use controls::{
    agc_step, apc_power_order, apply_deadband, machine_derivatives, wind_available_power,
    AgcOutput, MachineDerivatives, NetworkTerminal,
};
pub use network::Network;
pub use powerflow::{solve_power_flow, PowerFlowSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    #[serde(rename = "pv")]
    PV,
    #[serde(rename = "pq")]
    PQ,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    #[serde(rename = "type")]
    pub kind: BusKind,
    /// Set-point for slack/PV buses, initial guess for PQ buses.
    #[serde(default = "one")]
    pub voltage_magnitude: f64,
    #[serde(default)]
    pub voltage_angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    pub resistance: f64,
    pub reactance: f64,
    #[serde(default)]
    pub shunt_susceptance: f64,
    #[serde(default = "one")]
    pub resistance_scale: f64,
}

impl Branch {
    pub fn effective_resistance(&self) -> f64 {
        self.resistance * self.resistance_scale
    }
}

/// Classical machine: constant EMF behind transient reactance.
///
/// `inertia_h` and `damping_d` are on the machine base (`rated_power`, in
/// system per-unit); powers and limits are on the system base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynchronousMachine {
    pub id: String,
    pub bus: usize,
    pub rated_power: f64,
    pub inertia_h: f64,
    #[serde(default)]
    pub damping_d: f64,
    pub transient_reactance: f64,
    pub mechanical_power: f64,
    #[serde(default = "one")]
    pub emf_magnitude: f64,
    pub p_max: f64,
    #[serde(default)]
    pub p_min: f64,
    #[serde(default)]
    pub rotor_angle: f64,
    #[serde(default = "one")]
    pub rotor_speed: f64,
}

impl SynchronousMachine {
    /// Inertia constant on the system base.
    pub fn system_inertia(&self) -> f64 {
        self.inertia_h * self.rated_power
    }

    pub fn system_damping(&self) -> f64 {
        self.damping_d * self.rated_power
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Governor {
    pub machine: String,
    /// Droop on the machine base.
    pub droop: f64,
    pub deadband_half_width: f64,
    pub servo_time_constant: f64,
    /// Defaults to the machine's `[p_min, p_max]` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_limits: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgcController {
    #[serde(default)]
    pub enabled: bool,
    /// Integral gain, 1/s.
    pub integral_gain: f64,
    /// Frequency bias, pu/Hz.
    pub bias: f64,
    /// Device id → participation factor. The wind plant uses its own id.
    #[serde(default)]
    pub participation: BTreeMap<String, f64>,
    #[serde(default)]
    pub includes_wind: bool,
    #[serde(default)]
    pub state_p_agc: f64,
}

impl AgcController {
    /// Participation factors actually in use: the wind entry is dropped unless
    /// `includes_wind` is set.
    pub fn effective_participation(&self, wind_id: Option<&str>) -> BTreeMap<String, f64> {
        self.participation
            .iter()
            .filter(|(id, _)| self.includes_wind || Some(id.as_str()) != wind_id)
            .map(|(id, f)| (id.clone(), *f))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindPlant {
    pub id: String,
    pub bus: usize,
    #[serde(default)]
    pub in_service: bool,
    /// Machine displaced when the plant is switched in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replaces_machine: Option<String>,
    pub rated_power: f64,
    pub cut_in_speed: f64,
    pub rated_speed: f64,
    pub cut_out_speed: f64,
    #[serde(default = "default_curtailment")]
    pub curtailment_fraction: f64,
    #[serde(default)]
    pub apc_enabled: bool,
    pub apc_deadband_half_width: f64,
    pub apc_droop: f64,
    pub converter_time_constant: f64,
    /// Mean wind speed, m/s. The stochastic channel reverts to this value.
    pub wind_speed: f64,
    /// Reactive output, fixed at the power-flow value.
    #[serde(default)]
    pub reactive_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticLoad {
    pub id: String,
    pub bus: usize,
    pub base_p: f64,
    pub base_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    #[serde(default = "default_base")]
    pub base_mva: f64,
    #[serde(default = "default_fn")]
    pub f_nominal: f64,
    #[serde(rename = "bus")]
    pub buses: Vec<Bus>,
    #[serde(rename = "branch")]
    pub branches: Vec<Branch>,
    #[serde(rename = "machine", default)]
    pub machines: Vec<SynchronousMachine>,
    #[serde(rename = "governor", default)]
    pub governors: Vec<Governor>,
    #[serde(rename = "load", default)]
    pub loads: Vec<StochasticLoad>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wind: Option<WindPlant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agc: Option<AgcController>,
}

fn one() -> f64 {
    1.0
}
fn default_base() -> f64 {
    100.0
}
fn default_fn() -> f64 {
    50.0
}
fn default_curtailment() -> f64 {
    0.2
}

impl SystemModel {
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn machine(&self, id: &str) -> Option<&SynchronousMachine> {
        self.machines.iter().find(|m| m.id == id)
    }

    pub fn machine_mut(&mut self, id: &str) -> Option<&mut SynchronousMachine> {
        self.machines.iter_mut().find(|m| m.id == id)
    }

    pub fn governor_for(&self, machine: &str) -> Option<&Governor> {
        self.governors.iter().find(|g| g.machine == machine)
    }

    /// The wind plant, if it is in service.
    pub fn active_wind(&self) -> Option<&WindPlant> {
        self.wind.as_ref().filter(|w| w.in_service)
    }

    /// Returns a copy with every branch resistance multiplied by `factor`.
    pub fn scale_branch_resistances(&self, factor: f64) -> Result<SystemModel> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Precondition(format!(
                "resistance scale factor must be positive, got {factor}"
            )));
        }
        let mut out = self.clone();
        for br in &mut out.branches {
            br.resistance_scale *= factor;
        }
        Ok(out)
    }

    /// Checks the structural invariants of every component.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        let slack = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .count();
        if slack != 1 {
            return bad(format!("expected exactly one slack bus, found {slack}"));
        }
        for (i, b) in self.buses.iter().enumerate() {
            if !(b.voltage_magnitude > 0.0) {
                return bad(format!("bus {}: voltage magnitude must be positive", b.id));
            }
            if self.buses[..i].iter().any(|o| o.id == b.id) {
                return bad(format!("duplicate bus id {}", b.id));
            }
        }
        for br in &self.branches {
            if self.bus_index(br.from_bus).is_none() || self.bus_index(br.to_bus).is_none() {
                return bad(format!(
                    "branch {}-{} references an unknown bus",
                    br.from_bus, br.to_bus
                ));
            }
            if br.reactance == 0.0 {
                return bad(format!("branch {}-{}: zero reactance", br.from_bus, br.to_bus));
            }
            if br.resistance < 0.0 || !(br.resistance_scale > 0.0) {
                return bad(format!(
                    "branch {}-{}: resistance must be >= 0 and scale > 0",
                    br.from_bus, br.to_bus
                ));
            }
        }
        for m in &self.machines {
            if self.bus_index(m.bus).is_none() {
                return bad(format!("machine {}: unknown bus {}", m.id, m.bus));
            }
            if !(m.inertia_h > 0.0) || !(m.rated_power > 0.0) {
                return bad(format!("machine {}: inertia and rating must be positive", m.id));
            }
            if m.transient_reactance <= 0.0 {
                return bad(format!("machine {}: transient reactance must be positive", m.id));
            }
            if !(m.p_min <= m.mechanical_power && m.mechanical_power <= m.p_max) {
                return bad(format!(
                    "machine {}: dispatch {} outside [{}, {}]",
                    m.id, m.mechanical_power, m.p_min, m.p_max
                ));
            }
        }
        for g in &self.governors {
            if self.machine(&g.machine).is_none() {
                return bad(format!("governor references unknown machine {}", g.machine));
            }
            if !(g.droop > 0.0) || g.deadband_half_width < 0.0 || !(g.servo_time_constant > 0.0) {
                return bad(format!("governor {}: invalid parameters", g.machine));
            }
            if let Some((lo, hi)) = g.output_limits {
                if lo > hi {
                    return bad(format!("governor {}: output limits inverted", g.machine));
                }
            }
        }
        for l in &self.loads {
            if self.bus_index(l.bus).is_none() {
                return bad(format!("load {}: unknown bus {}", l.id, l.bus));
            }
        }
        if let Some(w) = &self.wind {
            if self.bus_index(w.bus).is_none() {
                return bad(format!("wind plant {}: unknown bus {}", w.id, w.bus));
            }
            if !(0.0 < w.cut_in_speed && w.cut_in_speed < w.rated_speed && w.rated_speed < w.cut_out_speed) {
                return bad(format!("wind plant {}: need 0 < cut-in < rated < cut-out", w.id));
            }
            if !(0.0..1.0).contains(&w.curtailment_fraction) {
                return bad(format!("wind plant {}: curtailment must be in [0, 1)", w.id));
            }
            if !(w.apc_droop > 0.0) || !(w.converter_time_constant > 0.0) || w.apc_deadband_half_width < 0.0 {
                return bad(format!("wind plant {}: invalid control parameters", w.id));
            }
        }
        if let Some(agc) = &self.agc {
            if agc.enabled {
                let wind_id = self.active_wind().map(|w| w.id.as_str());
                let part = agc.effective_participation(wind_id);
                let total: f64 = part.values().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad(format!("AGC participation sums to {total}, expected 1"));
                }
                for (id, f) in &part {
                    if !(0.0..=1.0).contains(f) {
                        return bad(format!("AGC participation of {id} outside [0, 1]"));
                    }
                    let known = self.machine(id).is_some() || wind_id == Some(id.as_str());
                    if !known {
                        return bad(format!("AGC participant {id} is not an in-service device"));
                    }
                }
            }
        }
        Ok(())
    }
}
