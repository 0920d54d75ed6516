//! Scenario files: a line-oriented `key = value` grammar grouped into
//! `[section]` blocks. Parsing is strict; unknown sections and keys are
//! rejected with their line number.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::devices::{
    DampingReference, Device, DeviceError, GfmVsm, GfmVsmParams, MachineModel, SyncMachine, SyncMachineParams,
};
use crate::dynsim::{Event, EventAction, Integrator, PowerSystem, SimConfig, SimError};
use crate::powergrid::{BranchSpec, BranchStatus, BusId, BusKind, BusSpec, LoadSpec, NetworkError, NetworkModel};
use crate::studies::{FaultTemplate, LossOfSyncCriterion};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown parameter path '{0}'")]
    UnknownPath(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn parse_err(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSection {
    pub name: String,
    /// MVA.
    pub s_base: f64,
    /// Hz.
    pub f_nom: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusEntry {
    pub id: BusId,
    pub kind: BusKind,
    pub base_kv: f64,
    pub v: f64,
    /// Degrees.
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySection {
    pub t_end: f64,
    pub dt: f64,
    pub integrator: Integrator,
    pub stride: usize,
    pub angle_threshold: f64,
    pub slip_window: f64,
    pub min_slip_rate: f64,
    pub growth_threshold: f64,
    pub fault: Option<FaultTemplate>,
}

impl Default for StudySection {
    fn default() -> Self {
        let sim = SimConfig::default();
        let crit = LossOfSyncCriterion::default();
        StudySection {
            t_end: sim.t_end,
            dt: sim.dt,
            integrator: sim.integrator,
            stride: sim.stride,
            angle_threshold: crit.angle_threshold,
            slip_window: crit.window,
            min_slip_rate: crit.min_slip_rate,
            growth_threshold: crit.growth_threshold,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub system: SystemSection,
    pub buses: Vec<BusEntry>,
    pub branches: Vec<BranchSpec>,
    pub loads: Vec<LoadSpec>,
    pub machines: Vec<SyncMachine>,
    pub gfms: Vec<GfmVsm>,
    pub events: Vec<Event>,
    pub study: StudySection,
}

struct Block {
    name: String,
    line: usize,
    entries: Vec<(usize, String, String)>,
}

/// Key/value entries of one block, consumed as they are read so leftovers
/// can be reported.
struct Fields<'a> {
    section: &'a str,
    line: usize,
    entries: Vec<(usize, &'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn new(b: &'a Block) -> Self {
        Fields {
            section: &b.name,
            line: b.line,
            entries: b.entries.iter().map(|(l, k, v)| (*l, k.as_str(), v.as_str())).collect(),
        }
    }

    fn take(&mut self, key: &str) -> Option<(usize, &'a str)> {
        let k = self.entries.iter().position(|e| e.1 == key)?;
        let (l, _, v) = self.entries.remove(k);
        Some((l, v))
    }

    fn req(&mut self, key: &str) -> Result<(usize, &'a str), ScenarioError> {
        self.take(key)
            .ok_or_else(|| parse_err(self.line, format!("[{}] needs '{key}'", self.section)))
    }

    fn req_f64(&mut self, key: &str) -> Result<f64, ScenarioError> {
        let (l, v) = self.req(key)?;
        number(l, key, v)
    }

    fn opt_f64(&mut self, key: &str, default: f64) -> Result<f64, ScenarioError> {
        match self.take(key) {
            Some((l, v)) => number(l, key, v),
            None => Ok(default),
        }
    }

    fn req_bus(&mut self, key: &str) -> Result<BusId, ScenarioError> {
        let (l, v) = self.req(key)?;
        v.parse()
            .map_err(|_| parse_err(l, format!("'{key}' must be a bus number, got '{v}'")))
    }

    /// All remaining entries as numbers.
    fn rest_numeric(&mut self) -> Result<Vec<(usize, &'a str, f64)>, ScenarioError> {
        self.entries
            .drain(..)
            .map(|(l, k, v)| number(l, k, v).map(|x| (l, k, x)))
            .collect()
    }

    fn finish(self) -> Result<(), ScenarioError> {
        match self.entries.first() {
            Some((l, k, _)) => Err(parse_err(*l, format!("unknown key '{k}' in [{}]", self.section))),
            None => Ok(()),
        }
    }
}

fn number(line: usize, key: &str, v: &str) -> Result<f64, ScenarioError> {
    let x = match v {
        "true" => 1.0,
        "false" => 0.0,
        _ => v
            .parse::<f64>()
            .map_err(|_| parse_err(line, format!("'{key}' must be a number, got '{v}'")))?,
    };
    if !x.is_finite() {
        return Err(parse_err(line, format!("'{key}' must be finite")));
    }
    Ok(x)
}

fn blocks(text: &str) -> Result<Vec<Block>, ScenarioError> {
    let mut out: Vec<Block> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            out.push(Block {
                name: name.trim().to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected 'key = value', got '{s}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(parse_err(line, "empty key or value"));
        }
        let block = out
            .last_mut()
            .ok_or_else(|| parse_err(line, "entry before the first [section]"))?;
        if block.entries.iter().any(|e| e.1 == key) {
            return Err(parse_err(line, format!("duplicate key '{key}' in [{}]", block.name)));
        }
        block.entries.push((line, key.to_string(), value.to_string()));
    }
    Ok(out)
}

fn bus_kind(line: usize, v: &str) -> Result<BusKind, ScenarioError> {
    match v {
        "slack" => Ok(BusKind::Slack),
        "pv" => Ok(BusKind::Pv),
        "pq" => Ok(BusKind::Pq),
        _ => Err(parse_err(line, format!("bus kind must be slack, pv or pq, got '{v}'"))),
    }
}

fn machine_model_str(m: MachineModel) -> &'static str {
    match m {
        MachineModel::TwoAxis => "two_axis",
        MachineModel::Classical => "classical",
    }
}

fn damping_reference_str(d: DampingReference) -> &'static str {
    match d {
        DampingReference::Pll => "pll",
        DampingReference::Nominal => "nominal",
    }
}

fn parse_system(b: &Block) -> Result<SystemSection, ScenarioError> {
    let mut f = Fields::new(b);
    let name = f.take("name").map_or("scenario".to_string(), |(_, v)| v.to_string());
    let s = SystemSection {
        name,
        s_base: f.opt_f64("s_base", 100.0)?,
        f_nom: f.opt_f64("f_nom", 50.0)?,
    };
    f.finish()?;
    if !(s.s_base > 0.0 && s.f_nom > 0.0) {
        return Err(parse_err(b.line, "s_base and f_nom must be positive"));
    }
    Ok(s)
}

fn parse_bus(b: &Block) -> Result<BusEntry, ScenarioError> {
    let mut f = Fields::new(b);
    let id = f.req_bus("id")?;
    let (l, k) = f.req("kind")?;
    let bus = BusEntry {
        id,
        kind: bus_kind(l, k)?,
        base_kv: f.opt_f64("base_kv", 1.0)?,
        v: f.opt_f64("v", 1.0)?,
        angle: f.opt_f64("angle", 0.0)?,
    };
    f.finish()?;
    Ok(bus)
}

fn parse_branch(b: &Block) -> Result<BranchSpec, ScenarioError> {
    let mut f = Fields::new(b);
    let (_, id) = f.req("id")?;
    let from = f.req_bus("from")?;
    let to = f.req_bus("to")?;
    let mut br = BranchSpec::line(id, from, to, f.opt_f64("r", 0.0)?, f.req_f64("x")?, f.opt_f64("b", 0.0)?);
    br.tap = f.opt_f64("tap", 1.0)?;
    if let Some((l, s)) = f.take("status") {
        br.status = match s {
            "in" => BranchStatus::InService,
            "out" => BranchStatus::OutOfService,
            _ => return Err(parse_err(l, format!("status must be in or out, got '{s}'"))),
        };
    }
    f.finish()?;
    Ok(br)
}

fn parse_load(b: &Block) -> Result<LoadSpec, ScenarioError> {
    let mut f = Fields::new(b);
    let mut load = LoadSpec::new(f.req_bus("bus")?, f.req_f64("p")?, f.opt_f64("q", 0.0)?);
    load.scale = f.opt_f64("scale", 1.0)?;
    f.finish()?;
    Ok(load)
}

fn device_error(line: usize, e: DeviceError) -> ScenarioError {
    parse_err(line, e.to_string())
}

fn parse_machine(b: &Block) -> Result<SyncMachine, ScenarioError> {
    let mut f = Fields::new(b);
    let (_, name) = f.req("name")?;
    let bus = f.req_bus("bus")?;
    let mut params = SyncMachineParams::default();
    if let Some((l, m)) = f.take("model") {
        params.model = match m {
            "two_axis" => MachineModel::TwoAxis,
            "classical" => MachineModel::Classical,
            _ => return Err(parse_err(l, format!("model must be two_axis or classical, got '{m}'"))),
        };
    }
    let p_mw = f.req_f64("p_mw")?;
    let mut m = SyncMachine::new(name, bus, p_mw, params).map_err(|e| device_error(b.line, e))?;
    set_device_fields(&mut m, b.line, f.rest_numeric()?)?;
    Ok(m)
}

fn parse_gfm(b: &Block) -> Result<GfmVsm, ScenarioError> {
    let mut f = Fields::new(b);
    let (_, name) = f.req("name")?;
    let bus = f.req_bus("bus")?;
    let mut params = GfmVsmParams::default();
    if let Some((l, d)) = f.take("damping_reference") {
        params.damping_reference = match d {
            "pll" => DampingReference::Pll,
            "nominal" => DampingReference::Nominal,
            _ => return Err(parse_err(l, format!("damping_reference must be pll or nominal, got '{d}'"))),
        };
    }
    let p_mw = f.req_f64("p_mw")?;
    let mut g = GfmVsm::new(name, bus, p_mw, params).map_err(|e| device_error(b.line, e))?;
    set_device_fields(&mut g, b.line, f.rest_numeric()?)?;
    Ok(g)
}

fn set_device_fields(d: &mut dyn Device, block_line: usize, fields: Vec<(usize, &str, f64)>) -> Result<(), ScenarioError> {
    if let Some((l, k, _)) = fields.iter().find(|(_, k, _)| !d.param_fields().contains(k)) {
        return Err(parse_err(*l, format!("unknown key '{k}' for device {}", d.name())));
    }
    let pairs: Vec<(&str, f64)> = fields.iter().map(|(_, k, v)| (*k, *v)).collect();
    d.set_params(&pairs).map_err(|e| device_error(block_line, e))
}

fn parse_event(b: &Block) -> Result<Event, ScenarioError> {
    let mut f = Fields::new(b);
    let time = f.req_f64("time")?;
    let (l, action) = f.req("action")?;
    let action = match action {
        "apply_fault" => EventAction::ApplyFault {
            bus: f.req_bus("bus")?,
            admittance: Complex64::new(f.opt_f64("g", 1e4)?, f.opt_f64("b", -1e4)?),
        },
        "clear_fault" => EventAction::ClearFault,
        "clear_fault_and_trip" => EventAction::ClearFaultAndTrip {
            branch: f.req("branch")?.1.to_string(),
        },
        "trip_branch" => EventAction::TripBranch {
            branch: f.req("branch")?.1.to_string(),
        },
        "load_scale" => EventAction::LoadScale {
            bus: f.req_bus("bus")?,
            factor: f.req_f64("factor")?,
        },
        "param_override" => EventAction::ParamOverride {
            device: f.req("device")?.1.to_string(),
            field: f.req("field")?.1.to_string(),
            value: f.req_f64("value")?,
        },
        other => return Err(parse_err(l, format!("unknown event action '{other}'"))),
    };
    f.finish()?;
    if !(time >= 0.0) {
        return Err(parse_err(b.line, "event time must be non-negative"));
    }
    Ok(Event::new(time, action))
}

fn parse_study(b: &Block) -> Result<StudySection, ScenarioError> {
    let mut f = Fields::new(b);
    let d = StudySection::default();
    let integrator = match f.take("integrator") {
        None => d.integrator,
        Some((_, "trapezoidal")) => Integrator::Trapezoidal,
        Some((_, "rk4")) => Integrator::Rk4,
        Some((l, v)) => return Err(parse_err(l, format!("integrator must be trapezoidal or rk4, got '{v}'"))),
    };
    let stride = match f.take("stride") {
        None => d.stride,
        Some((l, v)) => v
            .parse::<usize>()
            .ok()
            .filter(|s| *s >= 1)
            .ok_or_else(|| parse_err(l, format!("stride must be a positive integer, got '{v}'")))?,
    };
    let fault = match f.take("fault_bus") {
        None => None,
        Some((l, v)) => Some(FaultTemplate {
            bus: v
                .parse()
                .map_err(|_| parse_err(l, format!("'fault_bus' must be a bus number, got '{v}'")))?,
            time: f.req_f64("fault_time")?,
            admittance: Complex64::new(f.opt_f64("fault_g", 1e4)?, f.opt_f64("fault_b", -1e4)?),
            trip_branch: f.take("fault_trip").map(|(_, v)| v.to_string()),
        }),
    };
    let s = StudySection {
        t_end: f.opt_f64("t_end", d.t_end)?,
        dt: f.opt_f64("dt", d.dt)?,
        integrator,
        stride,
        angle_threshold: f.opt_f64("angle_threshold", d.angle_threshold)?,
        slip_window: f.opt_f64("slip_window", d.slip_window)?,
        min_slip_rate: f.opt_f64("min_slip_rate", d.min_slip_rate)?,
        growth_threshold: f.opt_f64("growth_threshold", d.growth_threshold)?,
        fault,
    };
    f.finish()?;
    Ok(s)
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let blocks = blocks(text)?;
        let mut system: Option<(usize, SystemSection)> = None;
        let mut study: Option<(usize, StudySection)> = None;
        let mut buses = Vec::new();
        let mut bus_lines = Vec::new();
        let mut branches = Vec::new();
        let mut branch_lines = Vec::new();
        let mut loads = Vec::new();
        let mut load_lines = Vec::new();
        let mut machines = Vec::new();
        let mut gfms = Vec::new();
        let mut device_lines = Vec::new();
        let mut events = Vec::new();
        let mut event_lines = Vec::new();
        for b in &blocks {
            match b.name.as_str() {
                "system" => {
                    if let Some((l, _)) = system {
                        return Err(parse_err(b.line, format!("second [system] section (first at line {l})")));
                    }
                    system = Some((b.line, parse_system(b)?));
                }
                "study" => {
                    if let Some((l, _)) = study {
                        return Err(parse_err(b.line, format!("second [study] section (first at line {l})")));
                    }
                    study = Some((b.line, parse_study(b)?));
                }
                "bus" => {
                    buses.push(parse_bus(b)?);
                    bus_lines.push(b.line);
                }
                "branch" => {
                    branches.push(parse_branch(b)?);
                    branch_lines.push(b.line);
                }
                "load" => {
                    loads.push(parse_load(b)?);
                    load_lines.push(b.line);
                }
                "machine" => {
                    let m = parse_machine(b)?;
                    device_lines.push((m.name.clone(), m.bus, b.line));
                    machines.push(m);
                }
                "gfm" => {
                    let g = parse_gfm(b)?;
                    device_lines.push((g.name.clone(), g.bus, b.line));
                    gfms.push(g);
                }
                "events" => {
                    events.push(parse_event(b)?);
                    event_lines.push(b.line);
                }
                other => return Err(parse_err(b.line, format!("unknown section [{other}]"))),
            }
        }
        let (_, system) = system.ok_or_else(|| parse_err(1, "missing [system] section"))?;

        // cross references, reported against the offending section
        let slack: Vec<usize> = buses
            .iter()
            .zip(&bus_lines)
            .filter(|(b, _)| b.kind == BusKind::Slack)
            .map(|(_, l)| *l)
            .collect();
        match slack.len() {
            1 => {}
            0 => return Err(ScenarioError::Invalid("no [bus] section declares kind = slack".into())),
            _ => {
                let lines: Vec<String> = slack.iter().map(|l| l.to_string()).collect();
                return Err(parse_err(
                    slack[1],
                    format!(
                        "exactly one slack bus allowed; [bus] sections at lines {} declare kind = slack",
                        lines.join(", ")
                    ),
                ));
            }
        }
        let mut ids = HashSet::new();
        for (b, l) in buses.iter().zip(&bus_lines) {
            if !ids.insert(b.id) {
                return Err(parse_err(*l, format!("duplicate bus id {}", b.id)));
            }
        }
        let known = |id: BusId, line: usize| {
            if ids.contains(&id) {
                Ok(())
            } else {
                Err(parse_err(line, format!("unknown bus {id}")))
            }
        };
        let mut branch_ids = HashSet::new();
        for (br, l) in branches.iter().zip(&branch_lines) {
            known(br.from, *l)?;
            known(br.to, *l)?;
            if !branch_ids.insert(br.id.clone()) {
                return Err(parse_err(*l, format!("duplicate branch id {}", br.id)));
            }
        }
        for (ld, l) in loads.iter().zip(&load_lines) {
            known(ld.bus, *l)?;
        }
        let mut names = HashSet::new();
        let mut device_buses = HashSet::new();
        for (name, bus, l) in &device_lines {
            known(*bus, *l)?;
            let kind = buses.iter().find(|b| b.id == *bus).map(|b| b.kind);
            if kind != Some(BusKind::Pv) {
                return Err(parse_err(*l, format!("device {name} must sit on a pv bus")));
            }
            if !names.insert(name.clone()) {
                return Err(parse_err(*l, format!("duplicate device name {name}")));
            }
            if !device_buses.insert(*bus) {
                return Err(parse_err(*l, format!("second device on bus {bus}")));
            }
        }
        for (k, (ev, l)) in events.iter().zip(&event_lines).enumerate() {
            if k > 0 && ev.time < events[k - 1].time {
                return Err(parse_err(*l, "events must be listed in time order"));
            }
            match &ev.action {
                EventAction::ApplyFault { bus, .. } | EventAction::LoadScale { bus, .. } => known(*bus, *l)?,
                EventAction::ClearFaultAndTrip { branch } | EventAction::TripBranch { branch } => {
                    if !branch_ids.contains(branch) {
                        return Err(parse_err(*l, format!("unknown branch {branch}")));
                    }
                }
                EventAction::ParamOverride { device, .. } => {
                    if !names.contains(device) {
                        return Err(parse_err(*l, format!("unknown device {device}")));
                    }
                }
                EventAction::ClearFault => {}
            }
        }
        let study_line = study.as_ref().map_or(1, |s| s.0);
        let study = study.map(|s| s.1).unwrap_or_default();
        if let Some(fault) = &study.fault {
            known(fault.bus, study_line)?;
            if let Some(b) = &fault.trip_branch {
                if !branch_ids.contains(b) {
                    return Err(parse_err(study_line, format!("unknown branch {b}")));
                }
            }
        }
        let sc = Scenario {
            system,
            buses,
            branches,
            loads,
            machines,
            gfms,
            events,
            study,
        };
        sc.sim_config()
            .validate()
            .map_err(|e| parse_err(study_line, e.to_string()))?;
        Ok(sc)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Text form accepted by [`Scenario::parse`]; numbers use the shortest
    /// representation that reads back to the same value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let w = &mut s;
        let _ = writeln!(w, "[system]\nname = {}\ns_base = {}\nf_nom = {}", self.system.name, self.system.s_base, self.system.f_nom);
        for b in &self.buses {
            let _ = writeln!(
                w,
                "\n[bus]\nid = {}\nkind = {}\nbase_kv = {}\nv = {}\nangle = {}",
                b.id,
                b.kind.as_str(),
                b.base_kv,
                b.v,
                b.angle
            );
        }
        for br in &self.branches {
            let status = if br.in_service() { "in" } else { "out" };
            let _ = writeln!(
                w,
                "\n[branch]\nid = {}\nfrom = {}\nto = {}\nr = {}\nx = {}\nb = {}\ntap = {}\nstatus = {status}",
                br.id, br.from, br.to, br.r, br.x, br.b_shunt, br.tap
            );
        }
        for ld in &self.loads {
            let _ = writeln!(w, "\n[load]\nbus = {}\np = {}\nq = {}\nscale = {}", ld.bus, ld.p0, ld.q0, ld.scale);
        }
        for m in &self.machines {
            let _ = writeln!(w, "\n[machine]\nname = {}\nbus = {}\nmodel = {}", m.name, m.bus, machine_model_str(m.params.model));
            write_fields(w, m);
        }
        for g in &self.gfms {
            let _ = writeln!(
                w,
                "\n[gfm]\nname = {}\nbus = {}\ndamping_reference = {}",
                g.name,
                g.bus,
                damping_reference_str(g.params.damping_reference)
            );
            write_fields(w, g);
        }
        for ev in &self.events {
            let _ = writeln!(w, "\n[events]\ntime = {}", ev.time);
            let _ = match &ev.action {
                EventAction::ApplyFault { bus, admittance } => writeln!(
                    w,
                    "action = apply_fault\nbus = {bus}\ng = {}\nb = {}",
                    admittance.re, admittance.im
                ),
                EventAction::ClearFault => writeln!(w, "action = clear_fault"),
                EventAction::ClearFaultAndTrip { branch } => {
                    writeln!(w, "action = clear_fault_and_trip\nbranch = {branch}")
                }
                EventAction::TripBranch { branch } => writeln!(w, "action = trip_branch\nbranch = {branch}"),
                EventAction::LoadScale { bus, factor } => {
                    writeln!(w, "action = load_scale\nbus = {bus}\nfactor = {factor}")
                }
                EventAction::ParamOverride { device, field, value } => writeln!(
                    w,
                    "action = param_override\ndevice = {device}\nfield = {field}\nvalue = {value}"
                ),
            };
        }
        let st = &self.study;
        let _ = writeln!(
            w,
            "\n[study]\nt_end = {}\ndt = {}\nintegrator = {}\nstride = {}\nangle_threshold = {}\nslip_window = {}\nmin_slip_rate = {}\ngrowth_threshold = {}",
            st.t_end,
            st.dt,
            st.integrator.as_str(),
            st.stride,
            st.angle_threshold,
            st.slip_window,
            st.min_slip_rate,
            st.growth_threshold
        );
        if let Some(f) = &st.fault {
            let _ = writeln!(
                w,
                "fault_bus = {}\nfault_time = {}\nfault_g = {}\nfault_b = {}",
                f.bus, f.time, f.admittance.re, f.admittance.im
            );
            if let Some(b) = &f.trip_branch {
                let _ = writeln!(w, "fault_trip = {b}");
            }
        }
        s
    }

    pub fn network(&self) -> Result<NetworkModel, ScenarioError> {
        let buses = self
            .buses
            .iter()
            .map(|b| BusSpec {
                id: b.id,
                kind: b.kind,
                base_kv: b.base_kv,
                v_setpoint: b.v,
                angle_setpoint: b.angle.to_radians(),
            })
            .collect();
        Ok(NetworkModel::new(buses, self.branches.clone(), self.loads.clone(), self.system.s_base)?)
    }

    pub fn power_system(&self) -> Result<PowerSystem, ScenarioError> {
        let mut devices: Vec<Box<dyn Device>> = Vec::new();
        for m in &self.machines {
            devices.push(Box::new(m.clone()));
        }
        for g in &self.gfms {
            devices.push(Box::new(g.clone()));
        }
        Ok(PowerSystem::new(self.network()?, devices, self.system.f_nom)?)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            t_end: self.study.t_end,
            dt: self.study.dt,
            integrator: self.study.integrator,
            stride: self.study.stride,
            ..SimConfig::default()
        }
    }

    pub fn criterion(&self) -> LossOfSyncCriterion {
        LossOfSyncCriterion {
            angle_threshold: self.study.angle_threshold,
            window: self.study.slip_window,
            min_slip_rate: self.study.min_slip_rate,
            growth_threshold: self.study.growth_threshold,
        }
    }

    fn devices_mut(&mut self) -> impl Iterator<Item = &mut dyn Device> {
        self.machines
            .iter_mut()
            .map(|m| m as &mut dyn Device)
            .chain(self.gfms.iter_mut().map(|g| g as &mut dyn Device))
    }

    /// Sets one value by dotted path:
    ///
    /// * `machine.<field>` / `gfm.<field>`: every device of that kind
    /// * `generators.p_mw`: dispatch of every device
    /// * `<device name>.<field>`: one device
    /// * `bus.<id>.{v,angle,base_kv}`, `branch.<id>.{r,x,b,tap}`,
    ///   `load.<bus>.{p,q,scale}`, `system.{s_base,f_nom}`
    /// * `study.<key>` for the numeric study keys
    pub fn set_path(&mut self, path: &str, value: f64) -> Result<(), ScenarioError> {
        let unknown = || ScenarioError::UnknownPath(path.to_string());
        let (head, rest) = path.split_once('.').ok_or_else(unknown)?;
        match head {
            "machine" => {
                if self.machines.is_empty() {
                    return Err(ScenarioError::Invalid("scenario has no [machine]".into()));
                }
                for m in &mut self.machines {
                    m.set_param(rest, value)?;
                }
            }
            "gfm" => {
                if self.gfms.is_empty() {
                    return Err(ScenarioError::Invalid("scenario has no [gfm]".into()));
                }
                for g in &mut self.gfms {
                    g.set_param(rest, value)?;
                }
            }
            "generators" if rest == "p_mw" => {
                for d in self.devices_mut() {
                    d.set_param("p_mw", value)?;
                }
            }
            "system" => match rest {
                "s_base" if value > 0.0 => self.system.s_base = value,
                "f_nom" if value > 0.0 => self.system.f_nom = value,
                _ => return Err(unknown()),
            },
            "study" => {
                let st = &mut self.study;
                match rest {
                    "t_end" => st.t_end = value,
                    "dt" => st.dt = value,
                    "stride" if value >= 1.0 && value.fract() == 0.0 => st.stride = value as usize,
                    "angle_threshold" => st.angle_threshold = value,
                    "slip_window" => st.slip_window = value,
                    "min_slip_rate" => st.min_slip_rate = value,
                    "growth_threshold" => st.growth_threshold = value,
                    "fault_time" => st.fault.as_mut().ok_or_else(unknown)?.time = value,
                    "fault_g" => st.fault.as_mut().ok_or_else(unknown)?.admittance.re = value,
                    "fault_b" => st.fault.as_mut().ok_or_else(unknown)?.admittance.im = value,
                    _ => return Err(unknown()),
                }
                self.sim_config()
                    .validate()
                    .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
            }
            "bus" | "branch" | "load" => {
                let (id, field) = rest.rsplit_once('.').ok_or_else(unknown)?;
                match head {
                    "bus" => {
                        let b = self
                            .buses
                            .iter_mut()
                            .find(|b| b.id.to_string() == id)
                            .ok_or_else(unknown)?;
                        match field {
                            "v" => b.v = value,
                            "angle" => b.angle = value,
                            "base_kv" => b.base_kv = value,
                            _ => return Err(unknown()),
                        }
                    }
                    "branch" => {
                        let br = self.branches.iter_mut().find(|b| b.id == id).ok_or_else(unknown)?;
                        match field {
                            "r" => br.r = value,
                            "x" => br.x = value,
                            "b" => br.b_shunt = value,
                            "tap" => br.tap = value,
                            _ => return Err(unknown()),
                        }
                    }
                    _ => {
                        let ld = self
                            .loads
                            .iter_mut()
                            .find(|l| l.bus.to_string() == id)
                            .ok_or_else(unknown)?;
                        match field {
                            "p" => ld.p0 = value,
                            "q" => ld.q0 = value,
                            "scale" => ld.scale = value,
                            _ => return Err(unknown()),
                        }
                    }
                }
            }
            name => {
                let d = self.devices_mut().find(|d| d.name() == name).ok_or_else(unknown)?;
                d.set_param(rest, value)?;
            }
        }
        Ok(())
    }

    /// Applies a `path=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ScenarioError> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| ScenarioError::Invalid(format!("override '{spec}' is not path=value")))?;
        let v = number(0, path.trim(), value.trim()).map_err(|_| {
            ScenarioError::Invalid(format!("override '{spec}' needs a numeric value"))
        })?;
        self.set_path(path.trim(), v)
    }
}

fn write_fields(w: &mut String, d: &dyn Device) {
    for f in d.param_fields() {
        if let Some(v) = d.param(f) {
            let _ = writeln!(w, "{f} = {v}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
[system]
name = two_bus
[bus]
id = 1
kind = pv
[bus]
id = 2
kind = slack
[branch]
id = L
from = 1
to = 2
x = 0.3
[machine]
name = G
bus = 1
p_mw = 300
";

    #[test]
    fn minimal_parses_with_defaults() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.buses.len(), 2);
        assert_eq!(s.machines[0].params.h, SyncMachineParams::default().h);
        assert_eq!(s.study, StudySection::default());
        assert!(s.power_system().is_ok());
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = MINIMAL.replace("p_mw = 300", "p_mw = 300\nfoo = 1");
        match Scenario::parse(&text) {
            Err(ScenarioError::Parse { line, message }) => {
                assert_eq!(line, 19);
                assert!(message.contains("foo"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_slack_buses_named() {
        let text = MINIMAL.replace("kind = pv", "kind = slack");
        let err = Scenario::parse(&text).unwrap_err().to_string();
        assert!(err.contains("[bus]") && err.contains("slack"), "{err}");
    }

    #[test]
    fn unknown_section_and_references() {
        assert!(Scenario::parse(&format!("{MINIMAL}\n[foo]\na = 1")).is_err());
        let bad = MINIMAL.replace("to = 2", "to = 7");
        assert!(Scenario::parse(&bad).unwrap_err().to_string().contains("unknown bus 7"));
        assert!(Scenario::parse("[bus]\nid = 1\nkind = slack").is_err());
    }

    #[test]
    fn round_trip() {
        let mut s = Scenario::parse(MINIMAL).unwrap();
        s.events.push(Event::new(1.0, EventAction::LoadScale { bus: 1, factor: 0.9 }));
        s.study.fault = Some(FaultTemplate {
            time: 1.0,
            bus: 1,
            admittance: Complex64::new(1e4, -1e4),
            trip_branch: Some("L".into()),
        });
        s.set_path("machine.h", 0.1 + 0.2).unwrap();
        let again = Scenario::parse(&s.to_text()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn paths() {
        let mut s = Scenario::parse(MINIMAL).unwrap();
        s.apply_override("generators.p_mw=350").unwrap();
        assert_eq!(s.machines[0].p_mw, 350.0);
        s.apply_override("G.pss.enabled=0").unwrap();
        assert!(!s.machines[0].pss.enabled);
        s.apply_override("branch.L.x=0.25").unwrap();
        assert_eq!(s.branches[0].x, 0.25);
        assert!(s.apply_override("gfm.d_gfm=20").is_err());
        assert!(matches!(s.set_path("nothing.here", 1.0), Err(ScenarioError::UnknownPath(_))));
        assert!(s.apply_override("machine.h=-1").is_err());
        assert!(s.apply_override("machine.h").is_err());
    }
}
