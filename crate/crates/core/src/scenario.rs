//! Declarative scenarios and seeded batch execution.
//!
//! A scenario is a TOML file of switches (wind in service, APC, deadbands,
//! AGC mode, noise sources, losses, saturation) plus optional noise and
//! control parameters. Applying it to a base [`SystemModel`] yields the model
//! for the run; the switches also select the [`NoiseSpec`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{simulate, RunSummary, SimOptions};
use crate::error::{Error, Result};
use crate::grid::sysfile::toml_error;
use crate::grid::SystemModel;
use crate::metrics::{FrequencyTrace, MetricsReport};
use crate::stochastic::{LoadNoise, NoiseSpec, RampSpec, WindNoise};

/// Band half-width for the minutes-outside criterion, Hz.
pub const DEFAULT_BAND: f64 = 0.1;
/// Horizon of the single-trajectory protocol, s.
pub const FULL_HORIZON: f64 = 48.0 * 3600.0;

const SHIPPED: [&str; 8] = [
    include_str!("../data/scenario1.cfg"),
    include_str!("../data/scenario2.cfg"),
    include_str!("../data/scenario3.cfg"),
    include_str!("../data/scenario4.cfg"),
    include_str!("../data/scenario5.cfg"),
    include_str!("../data/scenario6.cfg"),
    include_str!("../data/scenario7.cfg"),
    include_str!("../data/scenario8.cfg"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgcMode {
    #[serde(rename = "none")]
    None,
    /// Conventional units only.
    #[serde(rename = "conv")]
    Conventional,
    #[serde(rename = "conv-and-wind")]
    ConventionalAndWind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    #[serde(default)]
    pub load: LoadNoise,
    #[serde(default)]
    pub wind: WindNoise,
    #[serde(default = "default_ramps")]
    pub ramps: RampSpec,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            load: LoadNoise::default(),
            wind: WindNoise::default(),
            ramps: default_ramps(),
        }
    }
}

fn default_ramps() -> RampSpec {
    RampSpec {
        rate: 1.0 / 1200.0,
        magnitude_sigma: 1.5,
        duration_min: 120.0,
        duration_max: 600.0,
    }
}

/// Reduced capacity of selected machines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationSpec {
    /// Machine id → new `p_max` as a fraction of its rating.
    pub p_max_fraction: BTreeMap<String, f64>,
    /// A unit dispatched above its new limit is redispatched to
    /// `p_max·(1 − margin)`; the slack unit absorbs the difference.
    #[serde(default = "default_margin")]
    pub redispatch_margin: f64,
}

impl Default for SaturationSpec {
    fn default() -> Self {
        SaturationSpec {
            p_max_fraction: [("g1".to_string(), 0.6), ("g2".to_string(), 0.5)]
                .into_iter()
                .collect(),
            redispatch_margin: default_margin(),
        }
    }
}

fn default_margin() -> f64 {
    0.0
}

/// Optional parameter overrides applied on top of the system file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agc_integral_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apc_droop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converter_time_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub governor_droop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub servo_time_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_wind_speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: u32,
    pub name: String,
    pub wind_generation: bool,
    pub apc: bool,
    /// Wind-plant APC deadband half-width, Hz. Required with wind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fdb_wind: Option<f64>,
    /// Governor deadband half-width, Hz.
    #[serde(default = "default_fdb_conv")]
    pub fdb_conv: f64,
    pub agc: AgcMode,
    #[serde(default)]
    pub wind_ramps: bool,
    pub load_noise: bool,
    /// Poisson jumps on the load channels.
    #[serde(default)]
    pub load_jumps: bool,
    #[serde(default)]
    pub wind_noise: bool,
    #[serde(default = "one")]
    pub loss_scale: f64,
    #[serde(default)]
    pub saturation: bool,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub noise: NoiseParams,
    #[serde(default)]
    pub saturation_limits: SaturationSpec,
    #[serde(default)]
    pub controls: ControlOverrides,
}

fn default_fdb_conv() -> f64 {
    0.015
}
fn one() -> f64 {
    1.0
}
fn default_horizon() -> f64 {
    7200.0
}
fn default_dt() -> f64 {
    0.02
}
fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, &path.display().to_string())
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    let sc: Scenario = toml::from_str(text).map_err(|e| toml_error(e, text, origin))?;
    sc.validate()?;
    Ok(sc)
}

impl Scenario {
    /// One of the eight shipped scenarios.
    pub fn builtin(id: u32) -> Option<Scenario> {
        let text = SHIPPED.get((id as usize).checked_sub(1)?)?;
        Some(parse_scenario(text, &format!("scenario{id}.cfg")).expect("shipped scenario is valid"))
    }

    pub fn builtin_all() -> Vec<Scenario> {
        (1..=8).filter_map(Scenario::builtin).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("scenario {}: {m}", self.id)));
        if !self.wind_generation {
            if self.apc {
                return bad("APC is on but there is no wind generation");
            }
            if self.agc == AgcMode::ConventionalAndWind {
                return bad("AGC includes wind but there is no wind generation");
            }
            if self.wind_noise || self.wind_ramps {
                return bad("wind noise or ramps requested without wind generation");
            }
        } else {
            match self.fdb_wind {
                Some(d) if d > 0.0 => {}
                _ => return bad("wind generation needs a positive fdb_wind"),
            }
        }
        if !(self.fdb_conv > 0.0) {
            return bad("fdb_conv must be positive");
        }
        if !(self.loss_scale > 0.0) {
            return bad("loss_scale must be positive");
        }
        if !(self.dt > 0.0 && self.horizon > 0.0) {
            return bad("dt and horizon must be positive");
        }
        if self.load_jumps && !self.load_noise {
            return bad("load jumps need load noise");
        }
        if self.saturation {
            let s = &self.saturation_limits;
            if s.p_max_fraction.values().any(|f| !(*f > 0.0 && *f <= 1.0)) {
                return bad("saturation fractions must lie in (0, 1]");
            }
            if !(0.0..1.0).contains(&s.redispatch_margin) {
                return bad("redispatch margin must lie in [0, 1)");
            }
        }
        Ok(())
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        let mut load = self.noise.load.clone();
        if !self.load_jumps {
            load.jump_rate = 0.0;
        }
        NoiseSpec {
            load: self.load_noise.then_some(load),
            wind: self.wind_noise.then(|| self.noise.wind.clone()),
            ramps: self.wind_ramps.then(|| self.noise.ramps.clone()),
        }
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            dt: self.dt,
            ..SimOptions::default()
        }
    }

    /// The system model this scenario runs on.
    pub fn apply(&self, base: &SystemModel) -> Result<SystemModel> {
        self.validate()?;
        let mut sys = if self.loss_scale != 1.0 {
            base.scale_branch_resistances(self.loss_scale)?
        } else {
            base.clone()
        };
        let c = &self.controls;
        for g in &mut sys.governors {
            g.deadband_half_width = self.fdb_conv;
            if let Some(r) = c.governor_droop {
                g.droop = r;
            }
            if let Some(t) = c.servo_time_constant {
                g.servo_time_constant = t;
            }
        }

        if self.wind_generation {
            let w = sys.wind.as_mut().ok_or_else(|| {
                Error::Validation(format!("scenario {} needs a wind plant in the system", self.id))
            })?;
            w.in_service = true;
            w.apc_enabled = self.apc;
            w.apc_deadband_half_width = self.fdb_wind.expect("validated");
            if let Some(r) = c.apc_droop {
                w.apc_droop = r;
            }
            if let Some(t) = c.converter_time_constant {
                w.converter_time_constant = t;
            }
            if let Some(v) = c.mean_wind_speed {
                w.wind_speed = v;
            }
            if let Some(id) = w.replaces_machine.clone() {
                sys.machines.retain(|m| m.id != id);
                sys.governors.retain(|g| g.machine != id);
            }
        } else if let Some(w) = sys.wind.as_mut() {
            w.in_service = false;
        }

        if self.saturation {
            let margin = self.saturation_limits.redispatch_margin;
            for (id, frac) in &self.saturation_limits.p_max_fraction {
                let m = sys.machine_mut(id).ok_or_else(|| {
                    Error::Validation(format!("saturation names unknown machine {id}"))
                })?;
                m.p_max = frac * m.rated_power;
                let cap = m.p_max * (1.0 - margin);
                if m.mechanical_power > cap {
                    m.mechanical_power = cap;
                }
            }
        }

        let wind_id = sys.active_wind().map(|w| w.id.clone());
        let machine_ids: Vec<String> = sys.machines.iter().map(|m| m.id.clone()).collect();
        if let Some(agc) = sys.agc.as_mut() {
            agc.enabled = self.agc != AgcMode::None;
            agc.includes_wind = self.agc == AgcMode::ConventionalAndWind;
            if let Some(k) = c.agc_integral_gain {
                agc.integral_gain = k;
            }
            agc.participation.retain(|id, _| {
                machine_ids.contains(id) || (agc.includes_wind && wind_id.as_deref() == Some(id.as_str()))
            });
            let total: f64 = agc.participation.values().sum();
            if agc.enabled {
                if !(total > 0.0) {
                    return Err(Error::Validation(format!(
                        "scenario {}: no in-service AGC participants",
                        self.id
                    )));
                }
                for f in agc.participation.values_mut() {
                    *f /= total;
                }
            }
        } else if self.agc != AgcMode::None {
            return Err(Error::Validation(format!(
                "scenario {} needs an AGC controller in the system",
                self.id
            )));
        }
        sys.validate()?;
        Ok(sys)
    }

    /// One run of this scenario with its own horizon and step.
    pub fn simulate(&self, base: &SystemModel, seed: u64) -> Result<(FrequencyTrace, RunSummary)> {
        simulate_scenario(base, self, self.horizon, self.dt, seed)
    }
}

pub fn simulate_scenario(
    base: &SystemModel,
    scenario: &Scenario,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<(FrequencyTrace, RunSummary)> {
    let sys = scenario.apply(base)?;
    let options = SimOptions {
        dt,
        ..SimOptions::default()
    };
    simulate(&sys, &scenario.noise_spec(), options, horizon, seed)
}

#[derive(Debug)]
pub struct SeedOutcome {
    pub report: MetricsReport,
    pub summary: RunSummary,
    pub trace: FrequencyTrace,
}

#[derive(Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub outcome: Result<SeedOutcome>,
}

#[derive(Debug)]
pub struct BatchResult {
    pub scenario_id: u32,
    pub scenario_name: String,
    /// Sorted by seed.
    pub runs: Vec<SeedRun>,
    /// Element-wise median over the successful runs.
    pub median: Option<MetricsReport>,
    /// Median limiter duty per device.
    pub limiter_duty: BTreeMap<String, f64>,
    pub wall_time_s: f64,
}

impl BatchResult {
    pub fn successes(&self) -> impl Iterator<Item = (u64, &SeedOutcome)> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok().map(|o| (r.seed, o)))
    }

    pub fn failures(&self) -> impl Iterator<Item = (u64, &Error)> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| (r.seed, e)))
    }

    /// Per-seed metrics as CSV, one row per seed; failed seeds carry the
    /// error message.
    pub fn seeds_csv(&self) -> String {
        let mut out = format!("seed,{},error\n", crate::metrics::REPORT_CSV_HEADER);
        for r in &self.runs {
            match &r.outcome {
                Ok(o) => {
                    let _ = writeln!(out, "{},{},", r.seed, o.report.csv_row());
                }
                Err(e) => {
                    let blanks = ",".repeat(crate::metrics::REPORT_CSV_HEADER.split(',').count());
                    let msg = e.to_string().replace(['"', '\n'], " ");
                    let _ = writeln!(out, "{}{blanks}\"{msg}\"", r.seed);
                }
            }
        }
        out
    }

    /// Key-value summary. Wall time is left out so the file is reproducible.
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {}", self.scenario_id);
        let _ = writeln!(s, "name = {}", self.scenario_name);
        let _ = writeln!(s, "seeds = {}", self.runs.len());
        let _ = writeln!(s, "failed_seeds = {}", self.failures().count());
        if let Some(m) = &self.median {
            for (k, v) in [
                ("median.sigma_f", m.sigma),
                ("median.sigma_minus", m.sigma_minus),
                ("median.sigma_plus", m.sigma_plus),
                ("median.delta_sigma", m.asymmetry),
                ("median.minutes_outside", m.minutes_outside),
                ("median.minutes_above", m.minutes_above),
                ("median.minutes_below", m.minutes_below),
                ("median.p_loss", m.p_loss.unwrap_or(f64::NAN)),
                ("median.q_loss", m.q_loss.unwrap_or(f64::NAN)),
            ] {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        for (k, v) in &self.limiter_duty {
            let _ = writeln!(s, "limiter_duty.{k} = {v}");
        }
        for (seed, e) in self.failures() {
            let _ = writeln!(s, "error.seed{seed} = {e}");
        }
        s
    }
}

/// Median of a non-empty slice (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Element-wise median of a set of reports.
pub fn median_report(reports: &[&MetricsReport]) -> Option<MetricsReport> {
    let first = reports.first()?;
    let med = |f: &dyn Fn(&MetricsReport) -> f64| median(&reports.iter().map(|r| f(r)).collect::<Vec<_>>());
    let med_n = |f: &dyn Fn(&MetricsReport) -> usize| med(&|r| f(r) as f64).round() as usize;
    let med_opt = |f: &dyn Fn(&MetricsReport) -> Option<f64>| {
        let v: Vec<f64> = reports.iter().filter_map(|r| f(r)).collect();
        (!v.is_empty()).then(|| median(&v))
    };
    Some(MetricsReport {
        sigma: med(&|r| r.sigma),
        sigma_minus: med(&|r| r.sigma_minus),
        sigma_plus: med(&|r| r.sigma_plus),
        asymmetry: med(&|r| r.asymmetry),
        n_minus: med_n(&|r| r.n_minus),
        n_plus: med_n(&|r| r.n_plus),
        n_total: med_n(&|r| r.n_total),
        minutes_outside: med(&|r| r.minutes_outside),
        minutes_above: med(&|r| r.minutes_above),
        minutes_below: med(&|r| r.minutes_below),
        f_nominal: first.f_nominal,
        band: first.band,
        duration: med(&|r| r.duration),
        p_loss: med_opt(&|r| r.p_loss),
        q_loss: med_opt(&|r| r.q_loss),
    })
}

/// Runs one simulation per seed in parallel and aggregates medians.
/// A failing seed is recorded in its [`SeedRun`] and does not stop the others.
pub fn run_batch(scenario: &Scenario, system: &SystemModel) -> Result<BatchResult> {
    run_batch_with(scenario, system, scenario.horizon, &scenario.seeds)
}

pub fn run_batch_with(
    scenario: &Scenario,
    system: &SystemModel,
    horizon: f64,
    seeds: &[u64],
) -> Result<BatchResult> {
    if seeds.is_empty() {
        return Err(Error::Precondition("batch needs at least one seed".into()));
    }
    let sys = scenario.apply(system)?;
    let noise = scenario.noise_spec();
    let options = scenario.sim_options();
    let started = std::time::Instant::now();
    let mut runs: Vec<SeedRun> = seeds
        .par_iter()
        .map(|&seed| {
            let outcome = simulate(&sys, &noise, options, horizon, seed).and_then(|(trace, summary)| {
                let report = MetricsReport::compute(&trace, DEFAULT_BAND)?
                    .with_losses(summary.p_loss_mean, summary.q_loss_mean);
                Ok(SeedOutcome {
                    report,
                    summary,
                    trace,
                })
            });
            if let Err(e) = &outcome {
                log::warn!("scenario {} seed {seed}: {e}", scenario.id);
            }
            SeedRun { seed, outcome }
        })
        .collect();
    runs.sort_by_key(|r| r.seed);

    let ok: Vec<&SeedOutcome> = runs.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let aggregated = median_report(&ok.iter().map(|o| &o.report).collect::<Vec<_>>());
    let mut limiter_duty = BTreeMap::new();
    if let Some(o) = ok.first() {
        for dev in o.summary.limiter_duty.keys() {
            let v: Vec<f64> = ok.iter().map(|o| o.summary.limiter_duty[dev]).collect();
            limiter_duty.insert(dev.clone(), median(&v));
        }
    }
    Ok(BatchResult {
        scenario_id: scenario.id,
        scenario_name: scenario.name.clone(),
        runs,
        median: aggregated,
        limiter_duty,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

pub const RESULTS_CSV_HEADER: &str = "scenario,sigma_f_hz,sigma_minus_hz,sigma_plus_hz,delta_sigma_hz,\
minutes_outside,minutes_above,minutes_below,p_loss_pu,q_loss_pu";

/// Median results in results-table column order, one row per scenario id
/// from the smallest to the largest present; absent ids get blank rows.
pub fn emit_results_table(results: &[BatchResult]) -> Result<String> {
    let lo = results.iter().map(|r| r.scenario_id).min().ok_or_else(|| {
        Error::Precondition("results table needs at least one batch".into())
    })?;
    let hi = results.iter().map(|r| r.scenario_id).max().expect("non-empty");
    let mut out = String::from(RESULTS_CSV_HEADER);
    out.push('\n');
    for id in lo..=hi {
        let row = results
            .iter()
            .find(|r| r.scenario_id == id)
            .and_then(|r| r.median.as_ref());
        match row {
            Some(m) => {
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{id},{},{},{},{},{},{},{},{},{}",
                    m.sigma,
                    m.sigma_minus,
                    m.sigma_plus,
                    m.asymmetry,
                    m.minutes_outside,
                    m.minutes_above,
                    m.minutes_below,
                    opt(m.p_loss),
                    opt(m.q_loss)
                );
            }
            None => {
                let _ = writeln!(out, "{id},,,,,,,,,");
            }
        }
    }
    Ok(out)
}
