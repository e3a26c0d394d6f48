//! Assembled device equations: differential right-hand side `f` and the
//! device share of the network balance `g`.



use super::StateVar;
use crate::error::{Error, Result};
use crate::grid::controls::{
    apc_power_order, machine_derivatives, GovernorInput, MachineState, NetworkTerminal,
};
use crate::grid::{
    solve_power_flow, wind_available_power, AgcController, Governor, Network, PowerFlowSolution,
    SynchronousMachine, SystemModel, WindPlant,
};

#[derive(Debug, Clone)]
pub(crate) struct MachineSlot {
    pub machine: SynchronousMachine,
    pub governor: Option<Governor>,
    pub bus: usize,
    pub p_ref: f64,
    pub agc_factor: f64,
    /// System-base inertia.
    pub h: f64,
    /// Index of δ in x; ω and the servo follow.
    pub x0: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct WindSlot {
    pub plant: WindPlant,
    pub bus: usize,
    pub q: f64,
    pub agc_factor: f64,
    pub x: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct LoadSlot {
    pub bus: usize,
    pub base_p: f64,
    pub base_q: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct AgcSlot {
    pub controller: AgcController,
    pub limits: (f64, f64),
    pub x: usize,
}

/// Time-varying inputs of the device equations.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Inputs<'a> {
    /// Per-load multiplicative deviation κ.
    pub load: &'a [f64],
    /// m/s.
    pub wind_speed: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct DaeModel {
    pub n_bus: usize,
    pub f_nominal: f64,
    pub net: Network,
    pub machines: Vec<MachineSlot>,
    pub wind: Option<WindSlot>,
    pub loads: Vec<LoadSlot>,
    pub agc: Option<AgcSlot>,
    pub nx: usize,
    pub h_total: f64,
    /// Device names in limiter-bit order.
    pub device_names: Vec<String>,
}

/// Initial values from the power flow.
pub(crate) struct Initial {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub power_flow: PowerFlowSolution,
}

impl DaeModel {
    pub fn build(system: &SystemModel) -> Result<(DaeModel, Initial)> {
        system.validate()?;
        let pf = solve_power_flow(system)?;
        let n = system.buses.len();
        let net = Network::from_system(system)?;
        let bus = |id: usize| system.bus_index(id).expect("validated bus");

        let mut p_gen = vec![0.0; n];
        let mut q_gen = vec![0.0; n];
        for k in 0..n {
            p_gen[k] = pf.p_inj[k];
            q_gen[k] = pf.q_inj[k];
        }
        for l in &system.loads {
            let k = bus(l.bus);
            p_gen[k] += l.base_p;
            q_gen[k] += l.base_q;
        }

        let mut x = Vec::new();
        let mut wind = None;
        if let Some(w) = system.active_wind() {
            let k = bus(w.bus);
            let p = crate::grid::controls::wind_dispatch(w);
            let has_machine = system.machines.iter().any(|m| m.bus == w.bus);
            let q = if has_machine { w.reactive_power } else { q_gen[k] };
            p_gen[k] -= p;
            q_gen[k] -= q;
            let mut plant = w.clone();
            plant.reactive_power = q;
            wind = Some(WindSlot {
                plant,
                bus: k,
                q,
                agc_factor: 0.0,
                x: usize::MAX,
            });
        }

        let mut machines = Vec::new();
        for m in &system.machines {
            let k = bus(m.bus);
            if system.machines.iter().filter(|o| o.bus == m.bus).count() > 1 {
                return Err(Error::InvalidModel(format!(
                    "bus {} hosts more than one machine",
                    m.bus
                )));
            }
            let (p, q) = (p_gen[k], q_gen[k]);
            if p < m.p_min - 1e-9 || p > m.p_max + 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "machine {}: power-flow output {p:.4} pu outside [{}, {}]",
                    m.id, m.p_min, m.p_max
                )));
            }
            // E∠δ = V∠θ + j·x′·I, I = conj(S / V∠θ).
            let (v, th) = (pf.v[k], pf.theta[k]);
            let (ir, ii) = {
                let (c, s) = (th.cos(), th.sin());
                // (P − jQ) / (V e^{−jθ}) = (P − jQ)·e^{jθ} / V
                ((p * c + q * s) / v, (p * s - q * c) / v)
            };
            let xd = m.transient_reactance;
            let er = v * th.cos() - xd * ii;
            let ei = v * th.sin() + xd * ir;
            let mut machine = m.clone();
            machine.emf_magnitude = er.hypot(ei);
            machine.rotor_angle = ei.atan2(er);
            machine.rotor_speed = 1.0;
            machine.mechanical_power = p;
            let x0 = x.len();
            x.extend([machine.rotor_angle, 1.0, p]);
            machines.push(MachineSlot {
                h: machine.system_inertia(),
                governor: system.governor_for(&m.id).cloned(),
                bus: k,
                p_ref: p,
                agc_factor: 0.0,
                x0,
                machine,
            });
        }
        let h_total: f64 = machines.iter().map(|m| m.h).sum();
        if machines.is_empty() || h_total <= 0.0 {
            return Err(Error::NoSynchronousInertia);
        }

        if let Some(w) = &mut wind {
            w.x = x.len();
            x.push(crate::grid::controls::wind_dispatch(&w.plant));
        }

        let mut agc = None;
        if let Some(ctrl) = system.agc.as_ref().filter(|a| a.enabled) {
            let wind_id = wind.as_ref().map(|w| w.plant.id.clone());
            let part = ctrl.effective_participation(wind_id.as_deref());
            let (mut lo, mut hi) = (0.0, 0.0);
            for slot in &mut machines {
                if let Some(&f) = part.get(&slot.machine.id) {
                    slot.agc_factor = f;
                    lo += slot.machine.p_min - slot.p_ref;
                    hi += slot.machine.p_max - slot.p_ref;
                }
            }
            if let Some(w) = &mut wind {
                if let Some(&f) = part.get(&w.plant.id) {
                    w.agc_factor = f;
                    let dispatch = crate::grid::controls::wind_dispatch(&w.plant);
                    lo -= dispatch;
                    hi += w.plant.curtailment_fraction * wind_available_power(w.plant.wind_speed, &w.plant);
                }
            }
            // The AGC state is bounded by the total headroom of its participants.
            let limits = (lo, hi);
            let s0 = ctrl.state_p_agc.clamp(limits.0, limits.1);
            for slot in &mut machines {
                slot.p_ref -= slot.agc_factor * s0;
            }
            let xi = x.len();
            x.push(s0);
            agc = Some(AgcSlot {
                controller: ctrl.clone(),
                limits,
                x: xi,
            });
        }

        let loads = system
            .loads
            .iter()
            .map(|l| LoadSlot {
                bus: bus(l.bus),
                base_p: l.base_p,
                base_q: l.base_q,
            })
            .collect();

        let mut device_names: Vec<String> = machines.iter().map(|m| m.machine.id.clone()).collect();
        if let Some(w) = &wind {
            device_names.push(w.plant.id.clone());
        }
        if agc.is_some() {
            device_names.push("agc".to_string());
        }

        let y = pf.theta.iter().chain(&pf.v).copied().collect();
        let model = DaeModel {
            n_bus: n,
            f_nominal: system.f_nominal,
            net,
            nx: x.len(),
            machines,
            wind,
            loads,
            agc,
            h_total,
            device_names,
        };
        Ok((model, Initial { x, y, power_flow: pf }))
    }

    pub fn ny(&self) -> usize {
        2 * self.n_bus
    }

    pub fn index(&self, var: StateVar) -> Option<usize> {
        match var {
            StateVar::Angle(i) => self.machines.get(i).map(|m| m.x0),
            StateVar::Speed(i) => self.machines.get(i).map(|m| m.x0 + 1),
            StateVar::Servo(i) => self.machines.get(i).map(|m| m.x0 + 2),
            StateVar::WindPower => self.wind.as_ref().map(|w| w.x),
            StateVar::Agc => self.agc.as_ref().map(|a| a.x),
        }
    }

    /// Centre-of-inertia frequency, Hz.
    #[inline]
    pub fn coi(&self, x: &[f64]) -> f64 {
        let s: f64 = self.machines.iter().map(|m| m.h * x[m.x0 + 1]).sum();
        self.f_nominal * s / self.h_total
    }

    /// Evaluates `f(x, y, u)` into `f` and the device injections
    /// (generation − load, `[P; Q]` per bus) into `s`. Returns a bitmask of
    /// devices sitting on a limit.
    pub fn devices(&self, x: &[f64], y: &[f64], u: &Inputs, f: &mut [f64], s: &mut [f64]) -> u64 {
        let n = self.n_bus;
        s.fill(0.0);
        let f_coi = self.coi(x);
        let delta_f = f_coi - self.f_nominal;
        let agc_state = self.agc.as_ref().map_or(0.0, |a| x[a.x]);
        let mut mask = 0u64;

        for (i, m) in self.machines.iter().enumerate() {
            let st = MachineState {
                delta: x[m.x0],
                omega: x[m.x0 + 1],
                p_servo: x[m.x0 + 2],
            };
            let term = NetworkTerminal {
                theta: y[m.bus],
                v: y[n + m.bus],
            };
            let input = GovernorInput {
                p_ref: m.p_ref,
                agc_share: m.agc_factor * agc_state,
                delta_f,
                f_nominal: self.f_nominal,
            };
            let d = machine_derivatives(&m.machine, m.governor.as_ref(), &st, term, &input);
            f[m.x0] = d.d_delta;
            f[m.x0 + 1] = d.d_omega;
            f[m.x0 + 2] = d.d_servo;
            s[m.bus] += d.p_elec;
            s[n + m.bus] += d.q_elec;
            if d.limited {
                mask |= 1 << i;
            }
        }

        let mut bit = self.machines.len();
        if let Some(w) = &self.wind {
            let avail = wind_available_power(u.wind_speed, &w.plant);
            let apc = apc_power_order(&w.plant, f_coi, self.f_nominal, avail);
            let raw = apc + w.agc_factor * agc_state;
            let order = raw.clamp(0.0, avail);
            if order != raw || apc == avail || (apc == 0.0 && avail > 0.0) {
                mask |= 1 << bit;
            }
            let p = x[w.x];
            f[w.x] = (order - p) / w.plant.converter_time_constant;
            s[w.bus] += p;
            s[n + w.bus] += w.q;
            bit += 1;
        }

        if let Some(a) = &self.agc {
            let st = x[a.x];
            f[a.x] = a.controller.derivative(delta_f, st, a.limits);
            if st <= a.limits.0 || st >= a.limits.1 {
                mask |= 1 << bit;
            }
        }

        for (l, k) in self.loads.iter().zip(u.load) {
            s[l.bus] -= l.base_p * (1.0 + k);
            s[n + l.bus] -= l.base_q * (1.0 + k);
        }
        mask
    }
}
