//! Sectioned key-value scenario files.
//!
//! ```text
//! file     = { line }
//! line     = blank | comment | header | entry
//! comment  = "#" text
//! header   = "[" section "]"
//! entry    = key "=" value [ comment ]
//! ```
//!
//! Sections: `scenario`, `corridor`, `signal` (repeatable, one per stop
//! line, in corridor order), `traffic`, `ego`, `lead`, `plant`, `mismatch`,
//! `mpc`, `bus`, `radar`. Every section except `scenario` and `ego` is
//! optional. Keys not listed below are rejected. Lists are comma
//! separated; a lead profile is a list of `time:velocity` pairs.
//!
//! | section | keys |
//! |---------|------|
//! | scenario | name, duration, dt, seed, model_mismatch, predictor (`exact` or `worst_case`) |
//! | corridor | length, speed_limit |
//! | signal | stop_line, cycle, offset, green, yellow, red, turn_probability, side_rate |
//! | traffic | injection_rate, injection_speed, entry_headway, vehicle_length, desired_speed, max_accel, comfort_decel, time_headway, min_spacing, exponent, max_decel |
//! | ego | position, velocity |
//! | lead | position, length, profile, exit_time |
//! | plant, mismatch | mass, tau, c0, c1, c2, force_rate_limit |
//! | mpc | horizon, v_des, q, b, d_min, v_min, v_max, f_max, f_min, coast_steps, coast_grid, a_brake_max, slack_weight, terminal_slack_weight, red_trigger (`any_red` or `arrival`), max_iter, eps |
//! | bus | latency, drop_probability, seed, period_vehicle, period_radar, period_spat, period_lead_plan, period_control, period_diagnostic |
//! | radar | max_range |
//!
//! `[mismatch]` holds the plant parameters that differ from `[plant]` when
//! `model_mismatch = true`; the controller always predicts with `[plant]`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::mpc::{MpcConfig, PredictorMode, RedTrigger};
use crate::plant::PlantParams;
use crate::sensing::{LeadPlan, DEFAULT_RADAR_RANGE};
use crate::signals::{Corridor, SignalPlan};
use crate::traffic::TrafficDemand;
use crate::vbus::{BusConfig, BusMode, FrameKind};

pub const CATCHUP_SCN: &str = include_str!("../scenarios/catchup.scn");
pub const URBAN_SCN: &str = include_str!("../scenarios/urban.scn");

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: duplicate key `{key}` in [{section}]")]
    DuplicateKey { line: usize, section: String, key: String },
    #[error("line {line}: `{key}`: {message}")]
    BadValue { line: usize, key: String, message: String },
    #[error("missing section [{0}]")]
    MissingSection(&'static str),
    #[error("line {line}: [{section}] is missing `{key}`")]
    MissingKey { line: usize, section: String, key: &'static str },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoStart {
    pub position: f64,
    pub velocity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeadSpec {
    /// Front bumper position at `t = 0`.
    pub position: f64,
    pub length: f64,
    pub plan: LeadPlan,
    /// Time at which the lead leaves the road.
    pub exit_time: Option<f64>,
}

impl LeadSpec {
    pub fn position_at(&self, t: f64) -> f64 {
        self.position + self.plan.distance_until(t)
    }
}

/// Plant fields that differ under model mismatch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlantOverrides {
    pub mass: Option<f64>,
    pub actuator_time_constant: Option<f64>,
    pub road_load_c0: Option<f64>,
    pub road_load_c1: Option<f64>,
    pub road_load_c2: Option<f64>,
    pub force_rate_limit: Option<f64>,
}

impl PlantOverrides {
    pub fn apply(&self, base: &PlantParams) -> PlantParams {
        PlantParams {
            mass: self.mass.unwrap_or(base.mass),
            actuator_time_constant: self.actuator_time_constant.unwrap_or(base.actuator_time_constant),
            road_load_c0: self.road_load_c0.unwrap_or(base.road_load_c0),
            road_load_c1: self.road_load_c1.unwrap_or(base.road_load_c1),
            road_load_c2: self.road_load_c2.unwrap_or(base.road_load_c2),
            force_rate_limit: self.force_rate_limit.or(base.force_rate_limit),
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    pub corridor: Corridor,
    pub demand: TrafficDemand,
    /// Nominal plant, also the controller's prediction model.
    pub plant: PlantParams,
    pub mismatch: PlantOverrides,
    pub model_mismatch: bool,
    pub mpc: MpcConfig,
    pub predictor: PredictorMode,
    pub bus: BusConfig,
    pub radar_range: f64,
    pub ego_start: EgoStart,
    pub lead: Option<LeadSpec>,
}

impl Scenario {
    /// Plant the harness integrates.
    pub fn true_plant(&self) -> PlantParams {
        if self.model_mismatch {
            self.mismatch.apply(&self.plant)
        } else {
            self.plant
        }
    }

    /// Number of plant steps in the episode.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Reseeds traffic and the bus.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.demand.rng_seed = seed;
        self.bus.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |message: String| Err(ScenarioError::Invalid { line: 0, message });
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return bad(format!("duration must be >= 0, got {}", self.duration));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        self.corridor.validate().map_err(|e| ScenarioError::Invalid { line: 0, message: e.to_string() })?;
        self.demand
            .validate(self.corridor.signals.len())
            .map_err(|e| ScenarioError::Invalid { line: 0, message: e.to_string() })?;
        self.plant.validate().map_err(|e| ScenarioError::Invalid { line: 0, message: e.to_string() })?;
        self.true_plant()
            .validate()
            .map_err(|e| ScenarioError::Invalid { line: 0, message: format!("mismatch: {e}") })?;
        self.mpc.validate().map_err(|e| ScenarioError::Invalid { line: 0, message: e.to_string() })?;
        if (self.mpc.dt - self.dt).abs() > 0.0 {
            return bad("controller and plant steps differ".into());
        }
        self.bus.validate().map_err(|e| ScenarioError::Invalid { line: 0, message: e.to_string() })?;
        self.bus
            .validate_rates(self.dt, self.dt)
            .map_err(|e| ScenarioError::Invalid { line: 0, message: e.to_string() })?;
        if !(self.radar_range.is_finite() && self.radar_range > 0.0) {
            return bad("radar max_range must be > 0".into());
        }
        let ego = self.ego_start;
        if !(ego.position >= 0.0 && ego.position < self.corridor.length) {
            return bad(format!("ego position {} outside the corridor", ego.position));
        }
        if !(ego.velocity >= self.mpc.v_min && ego.velocity <= self.mpc.v_max) {
            return bad(format!("ego velocity {} outside [v_min, v_max]", ego.velocity));
        }
        if let Some(lead) = &self.lead {
            lead.plan.validate().map_err(|message| ScenarioError::Invalid { line: 0, message })?;
            if lead.position - lead.length <= ego.position {
                return bad("lead must start ahead of the ego".into());
            }
        }
        Ok(())
    }
}

impl FromStr for Scenario {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_scenario(s)
    }
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Section {
    name: String,
    line: usize,
    entries: HashMap<String, Entry>,
    order: Vec<String>,
}

impl Section {
    fn take<T: FromStr>(&mut self, key: &'static str) -> Result<Option<T>, ScenarioError>
    where
        T::Err: fmt::Display,
    {
        let Some(e) = self.entries.get_mut(key) else { return Ok(None) };
        e.used = true;
        e.value
            .parse::<T>()
            .map(Some)
            .map_err(|err| ScenarioError::BadValue { line: e.line, key: key.into(), message: err.to_string() })
    }

    fn num(&mut self, key: &'static str) -> Result<Option<f64>, ScenarioError> {
        let line = self.entries.get(key).map(|e| e.line).unwrap_or(self.line);
        match self.take::<f64>(key)? {
            Some(v) if !v.is_finite() => Err(ScenarioError::BadValue {
                line,
                key: key.into(),
                message: "must be finite".into(),
            }),
            other => Ok(other),
        }
    }

    fn num_or(&mut self, key: &'static str, default: f64) -> Result<f64, ScenarioError> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    fn required(&mut self, key: &'static str) -> Result<f64, ScenarioError> {
        self.num(key)?.ok_or_else(|| ScenarioError::MissingKey {
            line: self.line,
            section: self.name.clone(),
            key,
        })
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(self.line, |e| e.line)
    }

    fn finish(&self) -> Result<(), ScenarioError> {
        for key in &self.order {
            let e = &self.entries[key];
            if !e.used {
                return Err(ScenarioError::UnknownKey {
                    line: e.line,
                    section: self.name.clone(),
                    key: key.clone(),
                });
            }
        }
        Ok(())
    }
}

const SECTIONS: [&str; 11] = [
    "scenario", "corridor", "signal", "traffic", "ego", "lead", "plant", "mismatch", "mpc", "bus",
    "radar",
];

fn lex(text: &str) -> Result<Vec<Section>, ScenarioError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ScenarioError::Syntax {
                line,
                message: format!("unterminated section header `{content}`"),
            })?;
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(ScenarioError::UnknownSection { line, section: name.into() });
            }
            if name != "signal" && sections.iter().any(|s| s.name == name) {
                return Err(ScenarioError::Syntax { line, message: format!("section [{name}] repeated") });
            }
            sections.push(Section { name: name.into(), line, entries: HashMap::new(), order: Vec::new() });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ScenarioError::Syntax {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ScenarioError::Syntax { line, message: format!("bad key `{key}`") });
        }
        let section = sections.last_mut().ok_or_else(|| ScenarioError::Syntax {
            line,
            message: "entry before the first section header".into(),
        })?;
        if section.entries.contains_key(key) {
            return Err(ScenarioError::DuplicateKey { line, section: section.name.clone(), key: key.into() });
        }
        section.order.push(key.into());
        section.entries.insert(key.into(), Entry { line, value: value.into(), used: false });
    }
    Ok(sections)
}

fn parse_profile(text: &str, line: usize) -> Result<LeadPlan, ScenarioError> {
    let bad = |message: String| ScenarioError::BadValue { line, key: "profile".into(), message };
    let mut breakpoints = Vec::new();
    for item in text.split(',') {
        let (t, v) = item.trim().split_once(':').ok_or_else(|| bad(format!("`{item}` is not time:velocity")))?;
        let t: f64 = t.trim().parse().map_err(|e| bad(format!("{e}")))?;
        let v: f64 = v.trim().parse().map_err(|e| bad(format!("{e}")))?;
        breakpoints.push((t, v));
    }
    let plan = LeadPlan { breakpoints };
    plan.validate().map_err(bad)?;
    Ok(plan)
}

fn plant_overrides(sec: &mut Section) -> Result<PlantOverrides, ScenarioError> {
    Ok(PlantOverrides {
        mass: sec.num("mass")?,
        actuator_time_constant: sec.num("tau")?,
        road_load_c0: sec.num("c0")?,
        road_load_c1: sec.num("c1")?,
        road_load_c2: sec.num("c2")?,
        force_rate_limit: sec.num("force_rate_limit")?,
    })
}

fn invalid_at(line: usize) -> impl Fn(String) -> ScenarioError {
    move |message| ScenarioError::Invalid { line, message }
}

/// Parses and validates a scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut sections = lex(text)?;
    let find = |name: &'static str| sections.iter().position(|s| s.name == name);
    let idx_scenario = find("scenario").ok_or(ScenarioError::MissingSection("scenario"))?;
    let idx_ego = find("ego").ok_or(ScenarioError::MissingSection("ego"))?;
    let idx = |name: &'static str, sections: &Vec<Section>| sections.iter().position(|s| s.name == name);

    let sc = &mut sections[idx_scenario];
    let name = sc.take::<String>("name")?.unwrap_or_else(|| "unnamed".into());
    let duration = sc.required("duration")?;
    let dt = sc.num_or("dt", 0.1)?;
    let seed = sc.take::<u64>("seed")?.unwrap_or(0);
    let model_mismatch = sc.take::<bool>("model_mismatch")?.unwrap_or(false);
    let predictor_line = sc.line_of("predictor");
    let predictor = match sc.take::<String>("predictor")?.as_deref() {
        None | Some("exact") => PredictorMode::Exact,
        Some("worst_case") => PredictorMode::WorstCase,
        Some(other) => {
            return Err(ScenarioError::BadValue {
                line: predictor_line,
                key: "predictor".into(),
                message: format!("expected `exact` or `worst_case`, got `{other}`"),
            })
        }
    };
    let scenario_line = sc.line;

    let (length, speed_limit) = match idx("corridor", &sections) {
        Some(i) => {
            let s = &mut sections[i];
            (s.required("length")?, s.num_or("speed_limit", 13.9)?)
        }
        None => (10_000.0, 13.9),
    };

    let mut signals = Vec::new();
    let mut turn_probability = Vec::new();
    let mut side_rate = Vec::new();
    let mut signal_lines = Vec::new();
    for s in sections.iter_mut().filter(|s| s.name == "signal") {
        let plan = SignalPlan {
            stop_line_position: s.required("stop_line")?,
            cycle_length: s.required("cycle")?,
            offset: s.num_or("offset", 0.0)?,
            green: s.required("green")?,
            yellow: s.required("yellow")?,
            red: s.required("red")?,
        };
        plan.validate(signals.len()).map_err(|e| invalid_at(s.line)(e.to_string()))?;
        signals.push(plan);
        turn_probability.push(s.num_or("turn_probability", 0.0)?);
        side_rate.push(s.num_or("side_rate", 0.0)?);
        signal_lines.push(s.line);
    }
    let corridor = Corridor { length, signals, speed_limit };
    corridor.validate().map_err(|e| {
        let line = match &e {
            crate::signals::SignalError::InvalidPlan { index, .. } => signal_lines[*index],
            _ => idx("corridor", &sections).map_or(0, |i| sections[i].line),
        };
        invalid_at(line)(e.to_string())
    })?;

    let mut demand = TrafficDemand {
        turn_probability,
        side_injection_rate: side_rate,
        rng_seed: seed,
        ..TrafficDemand::default()
    };
    if let Some(i) = idx("traffic", &sections) {
        let s = &mut sections[i];
        demand.injection_rate = s.num_or("injection_rate", demand.injection_rate)?;
        demand.injection_speed = s.num_or("injection_speed", demand.injection_speed)?;
        demand.entry_headway = s.num_or("entry_headway", demand.entry_headway)?;
        demand.vehicle_length = s.num_or("vehicle_length", demand.vehicle_length)?;
        let d = &mut demand.driver;
        d.desired_speed = s.num_or("desired_speed", d.desired_speed)?;
        d.max_accel = s.num_or("max_accel", d.max_accel)?;
        d.comfort_decel = s.num_or("comfort_decel", d.comfort_decel)?;
        d.time_headway = s.num_or("time_headway", d.time_headway)?;
        d.min_spacing = s.num_or("min_spacing", d.min_spacing)?;
        d.exponent = s.take::<i32>("exponent")?.unwrap_or(d.exponent);
        d.max_decel = s.num_or("max_decel", d.max_decel)?;
        let line = s.line;
        demand.validate(corridor.signals.len()).map_err(|e| invalid_at(line)(e.to_string()))?;
    }

    let s = &mut sections[idx_ego];
    let ego_start = EgoStart { position: s.num_or("position", 0.0)?, velocity: s.required("velocity")? };
    let ego_line = s.line;

    let lead = match idx("lead", &sections) {
        Some(i) => {
            let s = &mut sections[i];
            let position = s.required("position")?;
            let length = s.num_or("length", demand.vehicle_length)?;
            let profile_line = s.line_of("profile");
            let plan = match s.take::<String>("profile")? {
                Some(text) => parse_profile(&text, profile_line)?,
                None => {
                    return Err(ScenarioError::MissingKey { line: s.line, section: "lead".into(), key: "profile" })
                }
            };
            let exit_time = s.num("exit_time")?;
            Some(LeadSpec { position, length, plan, exit_time })
        }
        None => None,
    };

    let mut plant = PlantParams::default();
    if let Some(i) = idx("plant", &sections) {
        let s = &mut sections[i];
        plant = plant_overrides(s)?.apply(&plant);
        plant.validate().map_err(|e| invalid_at(s.line)(e.to_string()))?;
    }
    let mismatch = match idx("mismatch", &sections) {
        Some(i) => plant_overrides(&mut sections[i])?,
        None => PlantOverrides::default(),
    };

    let mut mpc = MpcConfig { dt, model: plant, ..MpcConfig::default() };
    if let Some(i) = idx("mpc", &sections) {
        let s = &mut sections[i];
        mpc.horizon = s.take::<usize>("horizon")?.unwrap_or(mpc.horizon);
        mpc.v_des = s.num_or("v_des", mpc.v_des)?;
        mpc.q_weight = s.num_or("q", mpc.q_weight)?;
        mpc.b_weight = s.num_or("b", mpc.b_weight)?;
        mpc.d_min = s.num_or("d_min", mpc.d_min)?;
        mpc.v_min = s.num_or("v_min", mpc.v_min)?;
        mpc.v_max = s.num_or("v_max", mpc.v_max)?;
        mpc.f_max = s.num_or("f_max", mpc.f_max)?;
        mpc.f_min = s.num_or("f_min", mpc.f_min)?;
        mpc.coast_steps = s.take::<usize>("coast_steps")?.unwrap_or(mpc.coast_steps);
        mpc.coast_grid = s.take::<usize>("coast_grid")?.unwrap_or(mpc.coast_grid);
        mpc.a_brake_max = s.num_or("a_brake_max", mpc.a_brake_max)?;
        mpc.slack_weight = s.num_or("slack_weight", mpc.slack_weight)?;
        mpc.terminal_slack_weight = s.num_or("terminal_slack_weight", mpc.terminal_slack_weight)?;
        let trigger_line = s.line_of("red_trigger");
        mpc.red_trigger = match s.take::<String>("red_trigger")?.as_deref() {
            None | Some("any_red") => RedTrigger::AnyRed,
            Some("arrival") => RedTrigger::Arrival,
            Some(other) => {
                return Err(ScenarioError::BadValue {
                    line: trigger_line,
                    key: "red_trigger".into(),
                    message: format!("expected `any_red` or `arrival`, got `{other}`"),
                })
            }
        };
        mpc.solver.max_iter = s.take::<usize>("max_iter")?.unwrap_or(mpc.solver.max_iter);
        if let Some(eps) = s.num("eps")? {
            mpc.solver.eps_abs = eps;
            mpc.solver.eps_rel = eps;
        }
        mpc.validate().map_err(|e| invalid_at(s.line)(e.to_string()))?;
    }

    let mut bus = BusConfig { rng_seed: seed, ..BusConfig::ideal(dt) };
    let mut bus_line = 0;
    if let Some(i) = idx("bus", &sections) {
        let s = &mut sections[i];
        bus_line = s.line;
        bus.latency = s.num_or("latency", bus.latency)?;
        bus.drop_probability = s.num_or("drop_probability", bus.drop_probability)?;
        bus.rng_seed = s.take::<u64>("seed")?.unwrap_or(bus.rng_seed);
        for (key, kind) in [
            ("period_vehicle", FrameKind::VehicleState),
            ("period_radar", FrameKind::Radar),
            ("period_spat", FrameKind::Spat),
            ("period_lead_plan", FrameKind::LeadPlan),
            ("period_control", FrameKind::Control),
            ("period_diagnostic", FrameKind::Diagnostic),
        ] {
            if let Some(p) = s.num(key)? {
                bus.periods[kind.index()] = p;
            }
        }
    }
    bus.mode = BusMode::Lockstep;
    bus.validate()
        .and_then(|_| bus.validate_rates(dt, dt))
        .map_err(|e| invalid_at(bus_line)(e.to_string()))?;

    let radar_range = match idx("radar", &sections) {
        Some(i) => sections[i].num_or("max_range", DEFAULT_RADAR_RANGE)?,
        None => DEFAULT_RADAR_RANGE,
    };

    for s in &sections {
        s.finish()?;
    }

    let scenario = Scenario {
        name,
        duration,
        dt,
        seed,
        corridor,
        demand,
        plant,
        mismatch,
        model_mismatch,
        mpc,
        predictor,
        bus,
        radar_range,
        ego_start,
        lead,
    };
    scenario.validate().map_err(|e| match e {
        ScenarioError::Invalid { message, .. } if message.contains("ego") => {
            ScenarioError::Invalid { line: ego_line, message }
        }
        ScenarioError::Invalid { message, .. } => ScenarioError::Invalid { line: scenario_line, message },
        other => other,
    })?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[scenario]\nduration = 10\n[ego]\nvelocity = 5\n";

    #[test]
    fn minimal_file() {
        let sc = parse_scenario(MINIMAL).unwrap();
        assert_eq!(sc.steps(), 100);
        assert!(sc.corridor.signals.is_empty());
        assert!(sc.lead.is_none());
        assert_eq!(sc.predictor, PredictorMode::Exact);
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = format!("{MINIMAL}speed = 3\n");
        let err = parse_scenario(&text).unwrap_err();
        assert_eq!(
            err,
            ScenarioError::UnknownKey { line: 5, section: "ego".into(), key: "speed".into() }
        );
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(parse_scenario("duration = 3\n"), Err(ScenarioError::Syntax { line: 1, .. })));
        assert!(matches!(parse_scenario("[scenario\n"), Err(ScenarioError::Syntax { line: 1, .. })));
        assert!(matches!(
            parse_scenario("[weather]\n"),
            Err(ScenarioError::UnknownSection { line: 1, .. })
        ));
        assert!(matches!(
            parse_scenario("[scenario]\nduration = x\n[ego]\nvelocity = 1\n"),
            Err(ScenarioError::BadValue { line: 2, .. })
        ));
    }

    #[test]
    fn mismatch_overrides_only_the_true_plant() {
        let text = format!("{MINIMAL}[scenario_extra]\n").replace("[scenario_extra]\n", "");
        let text = text.replace("duration = 10", "duration = 10\nmodel_mismatch = true") + "[mismatch]\nc2 = 0.3\n";
        let sc = parse_scenario(&text).unwrap();
        assert_eq!(sc.true_plant().road_load_c2, 0.3);
        assert_eq!(sc.mpc.model.road_load_c2, PlantParams::default().road_load_c2);
    }
}
