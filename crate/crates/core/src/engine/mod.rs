//! Fixed-step integrator for the stochastic differential-algebraic model.
//!
//! Each step first advances the noise channels explicitly (Euler–Maruyama),
//! then solves
//!
//! ```text
//! x' − x − h·(θ·f(x', y', u') + (1 − θ)·f(x, y, u)) = 0
//!                                        g(x', y', u') = 0
//! ```
//!
//! for `(x', y')` with a chord Newton iteration. `θ = 0.5` is the implicit
//! trapezoidal rule, `θ = 0` explicit Euler on the differential states.

mod model;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PowerFlowSolution, SystemModel};
use crate::metrics::FrequencyTrace;
use crate::stochastic::{keys, stream, NoiseSpec, RampSchedule, StochasticChannel};
use model::{DaeModel, Inputs};

/// Algebraic tolerance on ‖F‖∞.
pub const NEWTON_TOLERANCE: f64 = 1e-8;
const MAX_NEWTON_ITERATIONS: usize = 25;
const FD_STEP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    /// Differential states: per machine (δ, ω, servo), then wind converter
    /// output, then AGC state, each only when present.
    pub x: Vec<f64>,
    /// Bus angles followed by bus voltage magnitudes.
    pub y: Vec<f64>,
    /// Noise channel values: one per load, then wind speed when present.
    pub kappa: Vec<f64>,
}

/// Addresses of individual differential states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateVar {
    Angle(usize),
    Speed(usize),
    Servo(usize),
    WindPower,
    Agc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub newton_iterations: usize,
    pub residual: f64,
    /// Devices sitting on a limit at the accepted point.
    pub limits_active: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub dt: f64,
    /// Implicitness of the deterministic part, in `[0, 1]`.
    pub theta: f64,
    pub output_interval: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            dt: 0.02,
            theta: 0.5,
            output_interval: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub newton_iterations: usize,
    pub jacobian_updates: usize,
    /// Steps that needed the halved-step retry.
    pub retries: usize,
    /// Time averages over accepted steps, pu.
    pub p_loss_mean: f64,
    pub q_loss_mean: f64,
    /// Fraction of accepted steps each device spent on a limit.
    pub limiter_duty: BTreeMap<String, f64>,
    pub ramp_events: usize,
    pub load_jumps: u64,
}

impl RunSummary {
    /// Key-value text, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "steps = {}\nnewton_iterations = {}\njacobian_updates = {}\nretries = {}\n\
             p_loss_mean = {}\nq_loss_mean = {}\nramp_events = {}\nload_jumps = {}\n",
            self.steps,
            self.newton_iterations,
            self.jacobian_updates,
            self.retries,
            self.p_loss_mean,
            self.q_loss_mean,
            self.ramp_events,
            self.load_jumps
        );
        for (k, v) in &self.limiter_duty {
            out.push_str(&format!("limiter_duty.{k} = {v}\n"));
        }
        out
    }
}

/// Inertia-weighted mean rotor speed, in Hz.
pub fn coi_frequency(speeds: &[f64], inertias: &[f64], f_nominal: f64) -> Result<f64> {
    assert_eq!(speeds.len(), inertias.len(), "one inertia per speed");
    let h: f64 = inertias.iter().sum();
    if !(h > 0.0) {
        return Err(Error::NoSynchronousInertia);
    }
    let s: f64 = speeds.iter().zip(inertias).map(|(w, h)| w * h).sum();
    Ok(f_nominal * s / h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    /// Theta-method step of length `h`.
    Step { h: f64 },
    /// Differential states held; only the network is solved.
    Algebraic,
}

/// Per-run simulator. Owns its model, state and random streams.
pub struct Simulator {
    model: DaeModel,
    options: SimOptions,
    state: SimState,
    loads: Vec<StochasticChannel>,
    wind: Option<StochasticChannel>,
    wind_mean: f64,
    ramps: RampSchedule,
    power_flow: PowerFlowSolution,

    f_prev: Vec<f64>,
    mask: u64,
    p_loss: f64,
    q_loss: f64,

    // Newton workspace.
    z: DVector<f64>,
    res: DVector<f64>,
    fbuf: Vec<f64>,
    sbuf: Vec<f64>,
    fpert: Vec<f64>,
    spert: Vec<f64>,
    pinj: Vec<f64>,
    qinj: Vec<f64>,
    jac: DMatrix<f64>,
    lu: Option<LU<f64, Dyn, Dyn>>,
    lu_mode: Option<Mode>,

    newton_total: usize,
    jacobian_updates: usize,
    retries: usize,
}

impl Simulator {
    /// Initialises from the power flow of `system`. Noise channels start at
    /// their means; ramps are drawn for `horizon` seconds.
    pub fn new(
        system: &SystemModel,
        noise: &NoiseSpec,
        options: SimOptions,
        horizon: f64,
        seed: u64,
    ) -> Result<Simulator> {
        if !(options.dt > 0.0) || !(0.0..=1.0).contains(&options.theta) {
            return Err(Error::Precondition(format!(
                "need dt > 0 and theta in [0, 1], got dt = {}, theta = {}",
                options.dt, options.theta
            )));
        }
        if !(options.output_interval >= options.dt) {
            return Err(Error::Precondition(
                "output interval must be at least one step".into(),
            ));
        }
        let (model, init) = DaeModel::build(system)?;
        let loads: Vec<StochasticChannel> = (0..model.loads.len())
            .map(|i| {
                let ch = noise
                    .load
                    .as_ref()
                    .map(|l| l.channel())
                    .unwrap_or_else(|| crate::stochastic::NoiseChannel::constant(0.0));
                StochasticChannel::new(ch, seed, keys::LOAD_BASE + i as u64)
            })
            .collect();
        let (wind, wind_mean) = match &model.wind {
            Some(w) => {
                let mean = w.plant.wind_speed;
                let ch = noise
                    .wind
                    .as_ref()
                    .map(|n| n.channel(mean))
                    .unwrap_or_else(|| crate::stochastic::NoiseChannel::constant(mean));
                (Some(StochasticChannel::new(ch, seed, keys::WIND)), mean)
            }
            None => (None, 0.0),
        };
        let ramps = match (&noise.ramps, &model.wind) {
            (Some(spec), Some(_)) if horizon > 0.0 => spec.sample(horizon, &mut stream(seed, keys::RAMPS)),
            _ => RampSchedule::default(),
        };

        let nz = model.nx + model.ny();
        let mut kappa: Vec<f64> = loads.iter().map(|c| c.value()).collect();
        if let Some(w) = &wind {
            kappa.push(w.value());
        }
        let mut sim = Simulator {
            state: SimState {
                t: 0.0,
                x: init.x,
                y: init.y,
                kappa,
            },
            options,
            loads,
            wind,
            wind_mean,
            ramps,
            power_flow: init.power_flow,
            f_prev: vec![0.0; model.nx],
            mask: 0,
            p_loss: 0.0,
            q_loss: 0.0,
            z: DVector::zeros(nz),
            res: DVector::zeros(nz),
            fbuf: vec![0.0; model.nx],
            sbuf: vec![0.0; model.ny()],
            fpert: vec![0.0; model.nx],
            spert: vec![0.0; model.ny()],
            pinj: vec![0.0; model.n_bus],
            qinj: vec![0.0; model.n_bus],
            jac: DMatrix::zeros(nz, nz),
            lu: None,
            lu_mode: None,
            newton_total: 0,
            jacobian_updates: 0,
            retries: 0,
            model,
        };
        sim.refresh_cached_rhs();
        Ok(sim)
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn options(&self) -> &SimOptions {
        &self.options
    }

    pub fn power_flow(&self) -> &PowerFlowSolution {
        &self.power_flow
    }

    pub fn ramps(&self) -> &RampSchedule {
        &self.ramps
    }

    pub fn index(&self, var: StateVar) -> Option<usize> {
        self.model.index(var)
    }

    /// Device names in the order used for limiter reporting.
    pub fn device_names(&self) -> &[String] {
        &self.model.device_names
    }

    pub fn machine_inertias(&self) -> Vec<f64> {
        self.model.machines.iter().map(|m| m.h).collect()
    }

    pub fn machine_speeds(&self) -> Vec<f64> {
        self.model
            .machines
            .iter()
            .map(|m| self.state.x[m.x0 + 1])
            .collect()
    }

    /// Internal EMF magnitudes fixed at initialisation.
    pub fn machine_emfs(&self) -> Vec<f64> {
        self.model
            .machines
            .iter()
            .map(|m| m.machine.emf_magnitude)
            .collect()
    }

    pub fn coi_frequency(&self) -> f64 {
        self.model.coi(&self.state.x)
    }

    /// Replaces the differential states and re-solves the network.
    pub fn set_differential(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.model.nx {
            return Err(Error::Precondition(format!(
                "expected {} differential states, got {}",
                self.model.nx,
                x.len()
            )));
        }
        let (xn, yn) = (x.to_vec(), self.state.y.clone());
        let (z, _, _) = self.newton(&xn, &yn, Mode::Algebraic)?;
        self.state.x = z.rows(0, self.model.nx).iter().copied().collect();
        self.state.y = z.rows(self.model.nx, self.model.ny()).iter().copied().collect();
        self.refresh_cached_rhs();
        Ok(())
    }

    /// Max-norm of the network balance at the current state.
    pub fn algebraic_residual(&mut self) -> f64 {
        let x = self.state.x.clone();
        let y = self.state.y.clone();
        self.load_z(&x, &y);
        self.residual(&x, Mode::Algebraic);
        let nx = self.model.nx;
        self.res.rows(nx, self.model.ny()).amax()
    }

    fn inputs_from_kappa(&self) -> (Vec<f64>, f64) {
        let nl = self.loads.len();
        let k = &self.state.kappa;
        (k[..nl].to_vec(), if self.wind.is_some() { k[nl] } else { 0.0 })
    }

    fn refresh_cached_rhs(&mut self) {
        let (load, ws) = self.inputs_from_kappa();
        let u = Inputs { load: &load, wind_speed: ws };
        let s = &self.state;
        self.mask = self.model.devices(&s.x, &s.y, &u, &mut self.f_prev, &mut self.sbuf);
        let n = self.model.n_bus;
        let (th, v) = s.y.split_at(n);
        self.model.net.injections(v, th, &mut self.pinj, &mut self.qinj);
        self.p_loss = self.pinj.iter().sum();
        self.q_loss = self.qinj.iter().sum();
    }

    fn load_z(&mut self, x: &[f64], y: &[f64]) {
        let nx = self.model.nx;
        self.z.rows_mut(0, nx).copy_from_slice(x);
        self.z.rows_mut(nx, y.len()).copy_from_slice(y);
    }

    /// Residual at `self.z` into `self.res`; returns ‖res‖∞.
    fn residual(&mut self, xn: &[f64], mode: Mode) -> f64 {
        let nx = self.model.nx;
        let n = self.model.n_bus;
        let (load, ws) = self.inputs_from_kappa();
        let u = Inputs { load: &load, wind_speed: ws };
        let z = self.z.as_slice();
        let (x, y) = z.split_at(nx);
        self.mask = self.model.devices(x, y, &u, &mut self.fbuf, &mut self.sbuf);
        let (th, v) = y.split_at(n);
        self.model.net.injections(v, th, &mut self.pinj, &mut self.qinj);
        let theta = self.options.theta;
        for i in 0..nx {
            self.res[i] = match mode {
                Mode::Step { h } => {
                    x[i] - xn[i] - h * (theta * self.fbuf[i] + (1.0 - theta) * self.f_prev[i])
                }
                Mode::Algebraic => x[i] - xn[i],
            };
        }
        let mut pl = 0.0;
        let mut ql = 0.0;
        for k in 0..n {
            self.res[nx + k] = self.pinj[k] - self.sbuf[k];
            self.res[nx + n + k] = self.qinj[k] - self.sbuf[n + k];
            pl += self.pinj[k];
            ql += self.qinj[k];
        }
        self.p_loss = pl;
        self.q_loss = ql;
        self.res.amax()
    }

    /// Jacobian of the residual at `self.z`: analytic network block plus
    /// forward differences of the device equations.
    fn update_jacobian(&mut self, mode: Mode) -> bool {
        let nx = self.model.nx;
        let n = self.model.n_bus;
        let nz = nx + 2 * n;
        let (load, ws) = self.inputs_from_kappa();
        let u = Inputs { load: &load, wind_speed: ws };
        let h_theta = match mode {
            Mode::Step { h } => h * self.options.theta,
            Mode::Algebraic => 0.0,
        };

        self.jac.fill(0.0);
        {
            let z = self.z.as_slice();
            let (th, v) = z[nx..].split_at(n);
            self.model.net.add_jacobian(v, th, &mut self.jac, nx, nx);
        }
        for i in 0..nx {
            self.jac[(i, i)] = 1.0;
        }
        let (x0, y0) = self.z.as_slice().split_at(nx);
        let (mut x, mut y) = (x0.to_vec(), y0.to_vec());
        let mut f0 = vec![0.0; nx];
        let mut s0 = vec![0.0; 2 * n];
        self.model.devices(&x, &y, &u, &mut f0, &mut s0);
        for j in 0..nz {
            let orig = if j < nx { x[j] } else { y[j - nx] };
            let step = FD_STEP * orig.abs().max(1.0);
            if j < nx {
                x[j] = orig + step;
            } else {
                y[j - nx] = orig + step;
            }
            self.model.devices(&x, &y, &u, &mut self.fpert, &mut self.spert);
            if j < nx {
                x[j] = orig;
            } else {
                y[j - nx] = orig;
            }
            if h_theta != 0.0 {
                for i in 0..nx {
                    let d = (self.fpert[i] - f0[i]) / step;
                    if d != 0.0 {
                        self.jac[(i, j)] -= h_theta * d;
                    }
                }
            }
            for k in 0..2 * n {
                let d = (self.spert[k] - s0[k]) / step;
                if d != 0.0 {
                    self.jac[(nx + k, j)] -= d;
                }
            }
        }
        self.jacobian_updates += 1;
        let lu = self.jac.clone().lu();
        let ok = lu.is_invertible();
        self.lu = ok.then_some(lu);
        self.lu_mode = Some(mode);
        ok
    }

    /// Chord Newton from the explicit-Euler predictor. Returns the converged
    /// point, the iteration count and the final residual.
    fn newton(&mut self, xn: &[f64], yn: &[f64], mode: Mode) -> Result<(DVector<f64>, usize, f64)> {
        match mode {
            Mode::Step { h } => {
                let pred: Vec<f64> = xn.iter().zip(&self.f_prev).map(|(x, f)| x + h * f).collect();
                self.load_z(&pred, yn);
            }
            Mode::Algebraic => self.load_z(xn, yn),
        }
        let divergence = |t: f64, r: f64| Error::NewtonDivergence { t, residual: r };
        let t = self.state.t;
        let mut norm = self.residual(xn, mode);
        let mut fresh = false;
        let mut it = 0;
        let mut dz = DVector::zeros(self.z.len());
        while norm >= NEWTON_TOLERANCE {
            if !norm.is_finite() || it >= MAX_NEWTON_ITERATIONS {
                return Err(divergence(t, norm));
            }
            if self.lu.is_none() || self.lu_mode != Some(mode) {
                if !self.update_jacobian(mode) {
                    return Err(divergence(t, norm));
                }
                fresh = true;
            }
            dz.copy_from(&self.res);
            dz.neg_mut();
            if !self.lu.as_ref().expect("factorised").solve_mut(&mut dz) {
                return Err(divergence(t, norm));
            }
            self.z += &dz;
            let mut new = self.residual(xn, mode);
            it += 1;
            let stale = !fresh;
            fresh = false;
            if stale && !(new <= 0.5 * norm) {
                // Poor contraction with an old factorisation: refresh.
                if !(new < norm) {
                    self.z -= &dz;
                    new = self.residual(xn, mode);
                }
                self.lu = None;
            } else if !(new < norm) {
                let mut lambda = 1.0;
                while !(new < norm) && lambda > 1.0 / 256.0 {
                    lambda *= 0.5;
                    self.z.axpy(-lambda, &dz, 1.0);
                    new = self.residual(xn, mode);
                }
                if !(new < norm) {
                    return Err(divergence(t, new));
                }
            }
            norm = new;
        }
        self.newton_total += it;
        Ok((self.z.clone(), it, norm))
    }

    /// Advances the noise channels by `dt` and stores the new values in κ.
    fn advance_noise(&mut self, dt: f64) -> u64 {
        let mut jumps = 0;
        for (i, ch) in self.loads.iter_mut().enumerate() {
            jumps += ch.advance(dt);
            self.state.kappa[i] = ch.value();
        }
        if let Some(w) = &mut self.wind {
            w.channel.mean = self.wind_mean + self.ramps.shift(self.state.t);
            w.advance(dt);
            let i = self.loads.len();
            self.state.kappa[i] = w.value();
        }
        jumps
    }

    /// Deterministic part of one step of length `h` with κ already advanced.
    fn solve_step(&mut self, h: f64) -> Result<(usize, f64)> {
        let xn = self.state.x.clone();
        let yn = self.state.y.clone();
        let (z, it, res) = self.newton(&xn, &yn, Mode::Step { h })?;
        let nx = self.model.nx;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup {
                t: self.state.t,
                last_good: Box::new(self.state.clone()),
            });
        }
        self.state.x.copy_from_slice(&z.as_slice()[..nx]);
        self.state.y.copy_from_slice(&z.as_slice()[nx..]);
        self.state.t += h;
        // The last residual evaluation was at the accepted point.
        self.f_prev.copy_from_slice(&self.fbuf);
        if let Some(a) = &self.model.agc {
            let s = &mut self.state.x[a.x];
            *s = s.clamp(a.limits.0, a.limits.1);
        }
        Ok((it, res))
    }

    fn step_raw(&mut self) -> Result<(usize, f64, u64)> {
        let dt = self.options.dt;
        let jumps = self.advance_noise(dt);
        let t0 = self.state.t;
        let saved = (self.state.clone(), self.f_prev.clone());
        match self.solve_step(dt) {
            Ok((it, res)) => Ok((it, res, jumps)),
            Err(Error::NewtonDivergence { .. }) => {
                self.state.x = saved.0.x;
                self.state.y = saved.0.y;
                self.state.t = t0;
                self.f_prev = saved.1;
                self.lu = None;
                self.retries += 1;
                let (a, _) = self.solve_step(0.5 * dt)?;
                let (b, res) = self.solve_step(0.5 * dt)?;
                self.lu = None;
                self.state.t = t0 + dt;
                Ok((a + b, res, jumps))
            }
            Err(e) => Err(e),
        }
    }

    /// One step of length `dt`.
    pub fn step(&mut self) -> Result<StepDiagnostics> {
        let (newton_iterations, residual, _) = self.step_raw()?;
        let limits_active = self
            .model
            .device_names
            .iter()
            .enumerate()
            .filter(|(i, _)| self.mask & (1 << i) != 0)
            .map(|(_, n)| n.clone())
            .collect();
        Ok(StepDiagnostics {
            newton_iterations,
            residual,
            limits_active,
        })
    }

    /// Runs for `horizon` seconds and returns the COI frequency sampled at
    /// the end of every output interval.
    pub fn run(&mut self, horizon: f64) -> Result<(FrequencyTrace, RunSummary)> {
        let dt = self.options.dt;
        let per_out = (self.options.output_interval / dt).round() as usize;
        if per_out == 0 || ((per_out as f64) * dt - self.options.output_interval).abs() > 1e-9 {
            return Err(Error::Precondition(
                "output interval must be a whole number of steps".into(),
            ));
        }
        let steps = (horizon / dt).round() as usize;
        let ndev = self.model.device_names.len();
        let mut duty = vec![0usize; ndev];
        let (mut p_sum, mut q_sum) = (0.0, 0.0);
        let mut samples = Vec::with_capacity(steps / per_out);
        let mut load_jumps = 0;
        let start_newton = self.newton_total;
        for k in 1..=steps {
            let t = self.state.t;
            let (_, _, jumps) = self.step_raw().map_err(|e| e.at_time(t))?;
            load_jumps += jumps;
            p_sum += self.p_loss;
            q_sum += self.q_loss;
            for (i, d) in duty.iter_mut().enumerate() {
                if self.mask & (1 << i) != 0 {
                    *d += 1;
                }
            }
            if k % per_out == 0 {
                samples.push(self.coi_frequency());
            }
        }
        let denom = steps.max(1) as f64;
        let trace = FrequencyTrace::new(samples, self.options.output_interval, self.model.f_nominal)?;
        let summary = RunSummary {
            steps,
            newton_iterations: self.newton_total - start_newton,
            jacobian_updates: self.jacobian_updates,
            retries: self.retries,
            p_loss_mean: p_sum / denom,
            q_loss_mean: q_sum / denom,
            limiter_duty: self
                .model
                .device_names
                .iter()
                .zip(&duty)
                .map(|(n, &c)| (n.clone(), c as f64 / denom))
                .collect(),
            ramp_events: self.ramps.len(),
            load_jumps,
        };
        Ok((trace, summary))
    }
}

/// Builds a simulator and runs it for `horizon` seconds.
pub fn simulate(
    system: &SystemModel,
    noise: &NoiseSpec,
    options: SimOptions,
    horizon: f64,
    seed: u64,
) -> Result<(FrequencyTrace, RunSummary)> {
    if !(horizon > 0.0) {
        return Err(Error::Precondition(format!("horizon must be positive, got {horizon}")));
    }
    Simulator::new(system, noise, options, horizon, seed)?.run(horizon)
}
