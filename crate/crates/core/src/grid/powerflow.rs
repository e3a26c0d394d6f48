//! Newton–Raphson power flow used to initialise dynamic runs.

use nalgebra::{DMatrix, DVector};

use super::{BusKind, Network, SystemModel};
use crate::error::{Error, Result};

const TOLERANCE: f64 = 1e-11;
const MAX_ITERATIONS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    /// Bus voltage magnitudes, in `system.buses` order.
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    /// Net injections into the network (generation minus load).
    pub p_inj: Vec<f64>,
    pub q_inj: Vec<f64>,
    pub p_loss: f64,
    pub q_loss: f64,
    pub iterations: usize,
    /// Largest |mismatch| over all bus equations at the solution.
    pub residual: f64,
}

impl PowerFlowSolution {
    pub fn total_generation(&self, system: &SystemModel) -> (f64, f64) {
        let (pl, ql) = load_totals(system);
        (
            self.p_inj.iter().sum::<f64>() + pl,
            self.q_inj.iter().sum::<f64>() + ql,
        )
    }
}

fn load_totals(system: &SystemModel) -> (f64, f64) {
    system
        .loads
        .iter()
        .fold((0.0, 0.0), |(p, q), l| (p + l.base_p, q + l.base_q))
}

/// Scheduled active generation per bus: machine dispatch plus the wind
/// plant's curtailed available power when it is in service.
pub fn scheduled_generation(system: &SystemModel) -> Vec<f64> {
    let mut pg = vec![0.0; system.buses.len()];
    for m in &system.machines {
        if let Some(k) = system.bus_index(m.bus) {
            pg[k] += m.mechanical_power;
        }
    }
    if let Some(w) = system.active_wind() {
        if let Some(k) = system.bus_index(w.bus) {
            pg[k] += super::controls::wind_dispatch(w);
        }
    }
    pg
}

pub fn solve_power_flow(system: &SystemModel) -> Result<PowerFlowSolution> {
    let net = Network::from_system(system)?;
    let n = net.len();
    let slack = system
        .buses
        .iter()
        .position(|b| b.kind == BusKind::Slack)
        .ok_or_else(|| Error::InvalidModel("no slack bus".into()))?;
    let reach = net.reachable_from(slack);
    if let Some(k) = reach.iter().position(|r| !r) {
        return Err(Error::IslandedNetwork(system.buses[k].id));
    }

    let mut p_spec = scheduled_generation(system);
    let mut q_spec = vec![0.0; n];
    for l in &system.loads {
        let k = system.bus_index(l.bus).expect("validated load bus");
        p_spec[k] -= l.base_p;
        q_spec[k] -= l.base_q;
    }

    // Unknown ordering: θ for every non-slack bus, then V for every PQ bus.
    let th_idx: Vec<usize> = (0..n).filter(|&k| k != slack).collect();
    let v_idx: Vec<usize> = (0..n)
        .filter(|&k| system.buses[k].kind == BusKind::PQ)
        .collect();
    let nu = th_idx.len() + v_idx.len();

    let mut v: Vec<f64> = system.buses.iter().map(|b| b.voltage_magnitude).collect();
    let mut theta: Vec<f64> = system.buses.iter().map(|b| b.voltage_angle).collect();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut full = DMatrix::zeros(2 * n, 2 * n);
    let mut jac = DMatrix::zeros(nu, nu);
    let mut mis = DVector::zeros(nu);

    let mut iterations = 0;
    loop {
        net.injections(&v, &theta, &mut p, &mut q);
        let mut worst = (0.0f64, slack);
        for (r, &k) in th_idx.iter().enumerate() {
            mis[r] = p_spec[k] - p[k];
            if mis[r].abs() > worst.0 {
                worst = (mis[r].abs(), k);
            }
        }
        for (r, &k) in v_idx.iter().enumerate() {
            let m = q_spec[k] - q[k];
            mis[th_idx.len() + r] = m;
            if m.abs() > worst.0 {
                worst = (m.abs(), k);
            }
        }
        if worst.0 < TOLERANCE {
            let p_loss = p.iter().sum();
            let q_loss = q.iter().sum();
            return Ok(PowerFlowSolution {
                v,
                theta,
                p_inj: p,
                q_inj: q,
                p_loss,
                q_loss,
                iterations,
                residual: worst.0,
            });
        }
        if iterations >= MAX_ITERATIONS || !worst.0.is_finite() {
            return Err(Error::NonConvergence {
                iterations,
                worst_residual: worst.0,
                worst_bus: system.buses[worst.1].id,
            });
        }

        full.fill(0.0);
        net.add_jacobian(&v, &theta, &mut full, 0, 0);
        for (r, &kr) in th_idx.iter().chain(v_idx.iter().map(|k| k)).enumerate() {
            let row = if r < th_idx.len() { kr } else { n + kr };
            for (c, &kc) in th_idx.iter().enumerate() {
                jac[(r, c)] = full[(row, kc)];
            }
            for (c, &kc) in v_idx.iter().enumerate() {
                jac[(r, th_idx.len() + c)] = full[(row, n + kc)];
            }
        }
        let lu = jac.clone().lu();
        let dx = lu.solve(&mis).ok_or(Error::NonConvergence {
            iterations,
            worst_residual: worst.0,
            worst_bus: system.buses[worst.1].id,
        })?;
        for (r, &k) in th_idx.iter().enumerate() {
            theta[k] += dx[r];
        }
        for (r, &k) in v_idx.iter().enumerate() {
            v[k] += dx[th_idx.len() + r];
        }
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sysfile::wscc9;
    use crate::grid::{Branch, Bus, SynchronousMachine};

    fn bus(id: usize, kind: BusKind) -> Bus {
        Bus {
            id,
            kind,
            voltage_magnitude: 1.0,
            voltage_angle: 0.0,
        }
    }

    fn line(f: usize, t: usize, r: f64, x: f64, b: f64) -> Branch {
        Branch {
            from_bus: f,
            to_bus: t,
            resistance: r,
            reactance: x,
            shunt_susceptance: b,
            resistance_scale: 1.0,
        }
    }

    fn empty_system(buses: Vec<Bus>, branches: Vec<Branch>) -> SystemModel {
        SystemModel {
            base_mva: 100.0,
            f_nominal: 50.0,
            buses,
            branches,
            machines: vec![],
            governors: vec![],
            loads: vec![],
            wind: None,
            agc: None,
        }
    }

    #[test]
    fn no_injection_system_only_has_line_charging() {
        let sys = empty_system(
            vec![bus(1, BusKind::Slack), bus(2, BusKind::PQ), bus(3, BusKind::PQ)],
            vec![line(1, 2, 0.0, 0.1, 0.2), line(2, 3, 0.0, 0.15, 0.1)],
        );
        let pf = solve_power_flow(&sys).unwrap();
        assert!(pf.p_loss.abs() < 1e-9);
        // Lossless series branches: Q_loss = Σ |ΔV|²/x − b/2 (V_f² + V_t²).
        let expected: f64 = sys
            .branches
            .iter()
            .map(|br| {
                let f = sys.bus_index(br.from_bus).unwrap();
                let t = sys.bus_index(br.to_bus).unwrap();
                let (vf, vt) = (pf.v[f], pf.v[t]);
                let dv2 = vf * vf + vt * vt - 2.0 * vf * vt * (pf.theta[f] - pf.theta[t]).cos();
                dv2 / br.reactance - 0.5 * br.shunt_susceptance * (vf * vf + vt * vt)
            })
            .sum();
        assert!((pf.q_loss - expected).abs() < 1e-9, "{} vs {expected}", pf.q_loss);
        assert!(pf.q_loss < 0.0);
        for k in 1..3 {
            assert!(pf.p_inj[k].abs() < 1e-10 && pf.q_inj[k].abs() < 1e-10);
        }
    }

    #[test]
    fn two_bus_lossless_transfer() {
        let mut sys = empty_system(
            vec![bus(1, BusKind::PV), bus(2, BusKind::Slack)],
            vec![line(1, 2, 0.0, 0.1, 0.0)],
        );
        sys.machines.push(SynchronousMachine {
            id: "g".into(),
            bus: 1,
            rated_power: 1.0,
            inertia_h: 5.0,
            damping_d: 0.0,
            transient_reactance: 0.2,
            mechanical_power: 1.0,
            emf_magnitude: 1.0,
            p_max: 2.0,
            p_min: 0.0,
            rotor_angle: 0.0,
            rotor_speed: 1.0,
        });
        let pf = solve_power_flow(&sys).unwrap();
        let dtheta = pf.theta[0] - pf.theta[1];
        assert!((dtheta - 0.1f64.asin()).abs() < 1e-10);
        assert!(pf.p_loss.abs() < 1e-10);
    }

    #[test]
    fn wscc9_base_case_losses() {
        let sys = wscc9();
        let pf = solve_power_flow(&sys).unwrap();
        assert!(pf.residual < 1e-8);
        assert!(pf.iterations < 10);
        // Table target 0.0409 / -0.9452 pu, ±20 %.
        assert!((pf.p_loss / 0.0409 - 1.0).abs() < 0.2, "p_loss {}", pf.p_loss);
        assert!((pf.q_loss / -0.9452 - 1.0).abs() < 0.2, "q_loss {}", pf.q_loss);
        let (pg, _) = pf.total_generation(&sys);
        let pl: f64 = sys.loads.iter().map(|l| l.base_p).sum();
        assert!((pg - pl - pf.p_loss).abs() < 1e-8);
    }

    #[test]
    fn higher_resistance_raises_losses() {
        let sys = wscc9();
        let base = solve_power_flow(&sys).unwrap().p_loss;
        let hi = solve_power_flow(&sys.scale_branch_resistances(10.0).unwrap())
            .unwrap()
            .p_loss;
        assert!(hi > base);
    }

    #[test]
    fn islanded_bus_detected() {
        let sys = empty_system(
            vec![bus(1, BusKind::Slack), bus(2, BusKind::PQ), bus(3, BusKind::PQ)],
            vec![line(1, 2, 0.0, 0.1, 0.0)],
        );
        assert!(matches!(solve_power_flow(&sys), Err(Error::IslandedNetwork(3))));
    }

    #[test]
    fn infeasible_load_reports_non_convergence() {
        let mut sys = empty_system(
            vec![bus(1, BusKind::Slack), bus(2, BusKind::PQ)],
            vec![line(1, 2, 0.0, 0.5, 0.0)],
        );
        sys.loads.push(crate::grid::StochasticLoad {
            id: "l".into(),
            bus: 2,
            base_p: 50.0,
            base_q: 0.0,
        });
        assert!(matches!(
            solve_power_flow(&sys),
            Err(Error::NonConvergence { .. })
        ));
    }
}
