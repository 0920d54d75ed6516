//! Command-line front end. Every command reads a scenario file, writes its
//! outputs into one directory and finishes with a run manifest.
//!
//! Exit codes: 0 success, 1 I/O or internal error, 2 parse or usage error,
//! 3 power-flow divergence, 4 numerical failure, 5 no CCT bracket,
//! 6 operating point is not an equilibrium.

mod output;
mod scenario;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

pub use output::{output_dir, write_manifest, write_report, RunManifest, OUTPUT_DIR_ENV};
pub use scenario::{BusEntry, Scenario, ScenarioError, StudySection, SystemSection};

use crate::dynsim::{initialize_system, simulate, SimError, SystemSnapshot, Trace};
use crate::powergrid::{PowerFlowError, PowerFlowOptions};
use crate::smallsignal::{eigenmodes, least_damped, linearize, Mode, SmallSignalError, DEFAULT_PERTURBATION};
use crate::studies::{
    assess, classify_event, estimate_oscillation, find_cct, CctOptions, CctResult, DisturbanceClass,
    OscillationEstimate, StabilityVerdict, StudyError, TaxonomyLabel,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Usage(String),
    #[error("power flow did not converge: {0}")]
    PowerFlow(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    NoBracket(String),
    #[error("not an equilibrium: {0}")]
    NotEquilibrium(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Scenario(ScenarioError::Io { .. }) => 1,
            CliError::Scenario(_) | CliError::Usage(_) => 2,
            CliError::PowerFlow(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::NoBracket(_) => 5,
            CliError::NotEquilibrium(_) => 6,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::PowerFlow(PowerFlowError::Structure(n)) | SimError::Network(n) => {
                CliError::Scenario(ScenarioError::Network(n))
            }
            SimError::PowerFlow(p) => CliError::PowerFlow(p.to_string()),
            SimError::Device(d) => CliError::NotEquilibrium(d.to_string()),
            e @ SimError::NotEquilibrium { .. } => CliError::NotEquilibrium(e.to_string()),
            e @ (SimError::Convergence { .. } | SimError::Numerical { .. }) => CliError::Numerical(e.to_string()),
            SimError::Config(c) => CliError::Usage(c),
        }
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Sim(s) => s.into(),
            e @ StudyError::NoBracket { .. } => CliError::NoBracket(e.to_string()),
            e @ StudyError::DegenerateBracket { .. } => CliError::Usage(e.to_string()),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SmallSignalError> for CliError {
    fn from(e: SmallSignalError) -> Self {
        match e {
            SmallSignalError::Sim(s) => s.into(),
            e @ SmallSignalError::NotEquilibrium { .. } => CliError::NotEquilibrium(e.to_string()),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(name = "anglestab", version, about = "Phasor-domain angle stability studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario file.
    scenario: PathBuf,
    /// Output directory; defaults to $ANGLESTAB_OUT, then ./out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parameter override `path=value`, applied in order (repeatable).
    #[arg(long = "override", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug, Clone, Default)]
struct SimArgs {
    /// Integration step, s.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated time, s.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Integration steps per stored sample.
    #[arg(long)]
    stride: Option<usize>,
}

/// Initial CCT bracket and tolerance.
#[derive(Args, Debug, Clone, Copy)]
pub struct CctArgs {
    /// Clearing duration expected to be stable, s.
    #[arg(long, default_value_t = 0.15)]
    pub lo: f64,
    /// Clearing duration expected to be unstable, s.
    #[arg(long, default_value_t = 0.20)]
    pub hi: f64,
    /// Final bracket width, s.
    #[arg(long, default_value_t = 0.002)]
    pub tol: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the power flow and print bus voltages and injections.
    Powerflow {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate the scenario's events and write the trace and verdict.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
        /// Also write a gnuplot script plotting the angle channels.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Critical clearing time of the fault named in [study].
    Cct {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cct: CctArgs,
    },
    /// Linearize at the initial operating point and list the eigenmodes.
    Modes {
        #[command(flatten)]
        common: Common,
    },
    /// Repeat one study over values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter path, e.g. gfm.d_gfm or generators.p_mw.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_enum)]
        study: SweepStudy,
        #[command(flatten)]
        cct: CctArgs,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepStudy {
    Powerflow,
    Simulate,
    Cct,
    Modes,
}

impl SweepStudy {
    fn as_str(self) -> &'static str {
        match self {
            SweepStudy::Powerflow => "powerflow",
            SweepStudy::Simulate => "simulate",
            SweepStudy::Cct => "cct",
            SweepStudy::Modes => "modes",
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(common: &Common) -> Result<Scenario, CliError> {
    let mut sc = Scenario::from_file(&common.scenario)?;
    for o in &common.overrides {
        sc.apply_override(o)?;
    }
    Ok(sc)
}

fn prepare_out(common: &Common) -> Result<PathBuf, CliError> {
    let dir = output_dir(common.out.as_deref());
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

fn finish(common: &Common, command: &str, dir: &Path, files: Vec<String>, started: Instant) -> Result<(), CliError> {
    let manifest = RunManifest {
        scenario: common.scenario.display().to_string(),
        command: command.to_string(),
        output_dir: dir.display().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        files,
    };
    write_manifest(dir, &manifest).map_err(|e| io_err(dir, e))
}

fn execute(command: Command) -> Result<(), CliError> {
    let started = Instant::now();
    match command {
        Command::Powerflow { common } => {
            let sc = load(&common)?;
            let dir = prepare_out(&common)?;
            let rows = powerflow_rows(&sc)?;
            println!("{:>6} {:>6} {:>10} {:>11} {:>11} {:>11}", "bus", "kind", "v_pu", "angle_deg", "p_mw", "q_mvar");
            for r in &rows {
                println!(
                    "{:>6} {:>6} {:>10.6} {:>11.4} {:>11.3} {:>11.3}",
                    r.bus, r.kind, r.v, r.angle_deg, r.p_mw, r.q_mvar
                );
            }
            let path = dir.join("powerflow.csv");
            let mut text = String::from("bus,kind,v_pu,angle_deg,p_mw,q_mvar\n");
            for r in &rows {
                text.push_str(&format!(
                    "{},{},{:.9},{:.9},{:.6},{:.6}\n",
                    r.bus, r.kind, r.v, r.angle_deg, r.p_mw, r.q_mvar
                ));
            }
            std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
            finish(&common, "powerflow", &dir, vec!["powerflow.csv".into()], started)
        }
        Command::Simulate { common, sim, gnuplot } => {
            let mut sc = load(&common)?;
            apply_sim_args(&mut sc, &sim)?;
            let dir = prepare_out(&common)?;
            let outcome = simulate_scenario(&sc);
            let trace_path = dir.join("trace.csv");
            let result = match outcome {
                Ok(r) => r,
                Err(SimRunError::Failed(e)) => {
                    if let Some(partial) = e.partial_trace() {
                        write_trace(&trace_path, partial, Some(&e.to_string()))?;
                        eprintln!("partial trace written to {}", trace_path.display());
                    }
                    return Err(e.into());
                }
                Err(SimRunError::Other(e)) => return Err(e),
            };
            write_trace(&trace_path, &result.trace, None)?;
            let mut files = vec!["trace.csv".to_string(), "verdict.txt".to_string()];
            let report = simulate_report(&common.scenario, &result);
            write_report(&dir.join("verdict.txt"), &report).map_err(|e| io_err(&dir, e))?;
            if gnuplot {
                let gp = gnuplot_script(&result.trace);
                let p = dir.join("angles.gp");
                std::fs::write(&p, gp).map_err(|e| io_err(&p, e))?;
                files.push("angles.gp".into());
            }
            print_simulate(&result);
            finish(&common, "simulate", &dir, files, started)
        }
        Command::Cct { common, cct } => {
            let sc = load(&common)?;
            let dir = prepare_out(&common)?;
            let r = cct_scenario(&sc, &cct)?;
            println!(
                "CCT = {:.4} s  bracket [{:.4}, {:.4}] s  width {:.4} s  evaluations {}",
                r.cct,
                r.bracket.0,
                r.bracket.1,
                r.bracket.1 - r.bracket.0,
                r.evaluations
            );
            for (tc, stable) in &r.probes {
                println!("  probe {tc:.5} s: {}", if *stable { "stable" } else { "unstable" });
            }
            let mut report = vec![
                ("study".to_string(), "cct".to_string()),
                ("scenario".to_string(), common.scenario.display().to_string()),
                ("lo".to_string(), cct.lo.to_string()),
                ("hi".to_string(), cct.hi.to_string()),
                ("tol".to_string(), cct.tol.to_string()),
            ];
            report.extend(cct_columns(&r));
            report.push((
                "probes".into(),
                r.probes
                    .iter()
                    .map(|(t, s)| format!("{t}:{}", if *s { "stable" } else { "unstable" }))
                    .collect::<Vec<_>>()
                    .join(";"),
            ));
            write_report(&dir.join("cct.txt"), &report).map_err(|e| io_err(&dir, e))?;
            finish(&common, "cct", &dir, vec!["cct.txt".into()], started)
        }
        Command::Modes { common } => {
            let sc = load(&common)?;
            let dir = prepare_out(&common)?;
            let (labels, modes) = modes_scenario(&sc)?;
            println!(
                "{:>4} {:>12} {:>12} {:>9} {:>10}  top participating states",
                "mode", "re", "im", "freq_hz", "damping"
            );
            for (k, m) in modes.iter().enumerate() {
                let flag = if m.damping_ratio < 0.0 { "  NEGATIVE DAMPING" } else { "" };
                println!(
                    "{:>4} {:>12.5} {:>12.5} {:>9.4} {:>10.5}  {}{flag}",
                    k + 1,
                    m.eigenvalue.re,
                    m.eigenvalue.im,
                    m.frequency,
                    m.damping_ratio,
                    top_states(m, &labels)
                );
            }
            let path = dir.join("modes.csv");
            std::fs::write(&path, modes_csv(&modes, &labels)).map_err(|e| io_err(&path, e))?;
            finish(&common, "modes", &dir, vec!["modes.csv".into()], started)
        }
        Command::Sweep {
            common,
            param,
            values,
            study,
            cct,
        } => {
            let sc = load(&common)?;
            let dir = prepare_out(&common)?;
            let rows: Vec<Result<Vec<(String, String)>, CliError>> = values
                .par_iter()
                .map(|&v| {
                    let mut s = sc.clone();
                    s.set_path(&param, v)?;
                    sweep_row(&s, study, &cct)
                })
                .collect();
            let columns = sweep_columns(study);
            let mut text = format!("param,value,status,{}\n", columns.join(","));
            let mut failures = 0;
            for (v, row) in values.iter().zip(&rows) {
                match row {
                    Ok(cells) => {
                        let vals: Vec<&str> = cells.iter().map(|c| c.1.as_str()).collect();
                        text.push_str(&format!("{param},{v},ok,{}\n", vals.join(",")));
                        println!("{param}={v}: {}", cells.iter().map(|(k, x)| format!("{k}={x}")).collect::<Vec<_>>().join(" "));
                    }
                    Err(e) => {
                        failures += 1;
                        let reason = e.to_string().replace([',', '\n'], ";");
                        text.push_str(&format!("{param},{v},failed: {reason}{}\n", ",".repeat(columns.len())));
                        println!("{param}={v}: failed: {e}");
                    }
                }
            }
            let path = dir.join("sweep.csv");
            std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
            finish(&common, &format!("sweep {}", study.as_str()), &dir, vec!["sweep.csv".into()], started)?;
            if failures == rows.len() {
                if let Some(Err(e)) = rows.into_iter().next() {
                    return Err(e);
                }
            }
            Ok(())
        }
    }
}

fn apply_sim_args(sc: &mut Scenario, sim: &SimArgs) -> Result<(), CliError> {
    if let Some(dt) = sim.dt {
        sc.set_path("study.dt", dt)?;
    }
    if let Some(t) = sim.t_end {
        sc.set_path("study.t_end", t)?;
    }
    if let Some(s) = sim.stride {
        sc.set_path("study.stride", s as f64)?;
    }
    Ok(())
}

pub struct PowerflowRow {
    pub bus: u32,
    pub kind: &'static str,
    pub v: f64,
    pub angle_deg: f64,
    pub p_mw: f64,
    pub q_mvar: f64,
}

/// Bus voltages and net injections (generation minus load) in MW / MVAr.
pub fn powerflow_rows(sc: &Scenario) -> Result<Vec<PowerflowRow>, CliError> {
    let system = sc.power_system()?;
    let pf = system.power_flow(&PowerFlowOptions::default())?;
    let net = &system.network;
    let s_base = net.s_base();
    Ok(net
        .buses()
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let s = pf.s_injected[k] * s_base;
            PowerflowRow {
                bus: b.id,
                kind: b.kind.as_str(),
                v: pf.v[k].norm(),
                angle_deg: pf.v[k].arg().to_degrees(),
                p_mw: s.re,
                q_mvar: s.im,
            }
        })
        .collect())
}

pub fn initialize_scenario(sc: &Scenario) -> Result<SystemSnapshot, CliError> {
    Ok(initialize_system(&sc.power_system()?)?)
}

/// Outcome of simulating a scenario's events.
pub struct SimulationResult {
    pub trace: Trace,
    pub verdict: StabilityVerdict,
    pub label: TaxonomyLabel,
    /// Ringdown estimates per angle channel; small disturbances only.
    pub oscillations: Vec<(String, OscillationEstimate)>,
}

pub enum SimRunError {
    /// Integration failed; the error may carry a partial trace.
    Failed(SimError),
    Other(CliError),
}

impl From<CliError> for SimRunError {
    fn from(e: CliError) -> Self {
        SimRunError::Other(e)
    }
}

impl From<SimRunError> for CliError {
    fn from(e: SimRunError) -> Self {
        match e {
            SimRunError::Failed(s) => s.into(),
            SimRunError::Other(c) => c,
        }
    }
}

pub fn simulate_scenario(sc: &Scenario) -> Result<SimulationResult, SimRunError> {
    let snap = initialize_scenario(sc)?;
    let trace = simulate(&snap, &sc.events, &sc.sim_config()).map_err(SimRunError::Failed)?;
    let verdict = assess(&trace, &sc.events, &sc.criterion()).map_err(CliError::from)?;
    let label = classify_event(&verdict, &snap.device_technologies()).map_err(CliError::from)?;
    let mut oscillations = Vec::new();
    if verdict.disturbance_class == DisturbanceClass::Small {
        if let Some(t0) = sc.events.first().map(|e| e.time) {
            for name in trace.channel_names().filter(|n| n.ends_with(".angle")) {
                if let Ok(est) = estimate_oscillation(&trace, name, t0) {
                    oscillations.push((name.to_string(), est));
                }
            }
        }
    }
    Ok(SimulationResult {
        trace,
        verdict,
        label,
        oscillations,
    })
}

fn simulate_report(scenario: &Path, r: &SimulationResult) -> Vec<(String, String)> {
    let mut out = vec![
        ("study".to_string(), "simulate".to_string()),
        ("scenario".to_string(), scenario.display().to_string()),
    ];
    out.extend(verdict_columns(r));
    for (ch, e) in &r.oscillations {
        let f = e.frequency.map_or("none".to_string(), |f| format!("{f:.6}"));
        out.push((format!("oscillation.{ch}.frequency_hz"), f));
        out.push((format!("oscillation.{ch}.growth_rate"), format!("{:.6}", e.growth_rate)));
        out.push((format!("oscillation.{ch}.amplitude"), format!("{:.6}", e.amplitude)));
        out.push((format!("oscillation.{ch}.fit_residual"), format!("{:.6}", e.fit_residual)));
    }
    out
}

fn verdict_columns(r: &SimulationResult) -> Vec<(String, String)> {
    let v = &r.verdict;
    vec![
        ("stable".into(), v.stable.to_string()),
        ("disturbance_class".into(), v.disturbance_class.as_str().into()),
        (
            "first_violation_time".into(),
            v.first_violation_time.map_or("none".into(), |t| format!("{t:.6}")),
        ),
        ("violating_devices".into(), v.violating_devices.join(";")),
        ("proposed_label".into(), r.label.proposed.as_str().into()),
        (
            "legacy_labels".into(),
            r.label.legacy.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(";"),
        ),
    ]
}

fn print_simulate(r: &SimulationResult) {
    let v = &r.verdict;
    if v.stable {
        println!("verdict: stable ({} disturbance)", v.disturbance_class.as_str());
    } else {
        println!(
            "verdict: unstable ({} disturbance) at t = {:.3} s; devices: {}",
            v.disturbance_class.as_str(),
            v.first_violation_time.unwrap_or(f64::NAN),
            v.violating_devices.join(", ")
        );
        println!(
            "classification: proposed {}; legacy {}",
            r.label.proposed.as_str(),
            r.label.legacy.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(", ")
        );
    }
    for (ch, e) in &r.oscillations {
        match e.frequency {
            Some(f) => println!("{ch}: {f:.4} Hz, growth rate {:+.4} 1/s", e.growth_rate),
            None => println!("{ch}: no oscillation"),
        }
    }
}

fn write_trace(path: &Path, trace: &Trace, truncated: Option<&str>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).map_err(|e| io_err(path, e))?;
    if let Some(reason) = truncated {
        let t = trace.times.last().copied().unwrap_or(0.0);
        buf.extend_from_slice(format!("# truncated at {t:.6}: {}\n", reason.replace('\n', " ")).as_bytes());
    }
    std::fs::write(path, buf).map_err(|e| io_err(path, e))
}

fn gnuplot_script(trace: &Trace) -> String {
    let mut s = String::from(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'time (s)'\nset ylabel 'angle (deg)'\nplot ",
    );
    let cols: Vec<String> = trace
        .channel_names()
        .enumerate()
        .filter(|(_, n)| n.ends_with(".angle"))
        .map(|(k, _)| format!("'trace.csv' using 1:{} with lines", k + 2))
        .collect();
    s.push_str(&cols.join(", "));
    s.push('\n');
    s
}

pub fn cct_scenario(sc: &Scenario, args: &CctArgs) -> Result<CctResult, CliError> {
    let fault = sc
        .study
        .fault
        .clone()
        .ok_or_else(|| CliError::Usage("[study] has no fault template (fault_bus, fault_time)".into()))?;
    let snap = initialize_scenario(sc)?;
    let opts = CctOptions {
        tol: args.tol,
        criterion: sc.criterion(),
        sim: sc.sim_config(),
        ..CctOptions::default()
    };
    Ok(find_cct(&snap, &fault, args.lo, args.hi, &opts)?)
}

fn cct_columns(r: &CctResult) -> Vec<(String, String)> {
    vec![
        ("cct".into(), format!("{:.6}", r.cct)),
        ("bracket_lo".into(), format!("{:.6}", r.bracket.0)),
        ("bracket_hi".into(), format!("{:.6}", r.bracket.1)),
        ("evaluations".into(), r.evaluations.to_string()),
    ]
}

pub fn modes_scenario(sc: &Scenario) -> Result<(Vec<String>, Vec<Mode>), CliError> {
    let snap = initialize_scenario(sc)?;
    let model = linearize(&snap, DEFAULT_PERTURBATION)?;
    let modes = eigenmodes(&model)?;
    Ok((model.state_labels, modes))
}

fn top_states(m: &Mode, labels: &[String]) -> String {
    m.top_states(3).iter().map(|&k| labels[k].as_str()).collect::<Vec<_>>().join(";")
}

/// Mode table, least damped first.
pub fn modes_csv(modes: &[Mode], labels: &[String]) -> String {
    let mut s = String::from("mode_id,re,im,freq_hz,damping_ratio,top3_participating_states\n");
    for (k, m) in modes.iter().enumerate() {
        s.push_str(&format!(
            "{},{:.9},{:.9},{:.9},{:.9},{}\n",
            k + 1,
            m.eigenvalue.re,
            m.eigenvalue.im,
            m.frequency,
            m.damping_ratio,
            top_states(m, labels)
        ));
    }
    s
}

fn sweep_columns(study: SweepStudy) -> Vec<&'static str> {
    match study {
        SweepStudy::Powerflow => vec!["iterations", "max_mismatch"],
        SweepStudy::Simulate => vec![
            "stable",
            "disturbance_class",
            "first_violation_time",
            "violating_devices",
            "proposed_label",
            "legacy_labels",
        ],
        SweepStudy::Cct => vec!["cct", "bracket_lo", "bracket_hi", "evaluations"],
        SweepStudy::Modes => vec!["re", "im", "freq_hz", "damping_ratio", "unstable_modes"],
    }
}

fn sweep_row(sc: &Scenario, study: SweepStudy, cct: &CctArgs) -> Result<Vec<(String, String)>, CliError> {
    Ok(match study {
        SweepStudy::Powerflow => {
            let pf = sc.power_system()?.power_flow(&PowerFlowOptions::default())?;
            vec![
                ("iterations".into(), pf.iterations.to_string()),
                ("max_mismatch".into(), format!("{:.3e}", pf.max_mismatch)),
            ]
        }
        SweepStudy::Simulate => verdict_columns(&simulate_scenario(sc)?),
        SweepStudy::Cct => cct_columns(&cct_scenario(sc, cct)?),
        SweepStudy::Modes => {
            let (_, modes) = modes_scenario(sc)?;
            let unstable = modes.iter().filter(|m| m.eigenvalue.re > 0.0).count();
            let m = least_damped(&modes).ok_or_else(|| CliError::Numerical("no oscillatory mode".into()))?;
            vec![
                ("re".into(), format!("{:.9}", m.eigenvalue.re)),
                ("im".into(), format!("{:.9}", m.eigenvalue.im)),
                ("freq_hz".into(), format!("{:.9}", m.frequency)),
                ("damping_ratio".into(), format!("{:.9}", m.damping_ratio)),
                ("unstable_modes".into(), unstable.to_string()),
            ]
        }
    })
}
