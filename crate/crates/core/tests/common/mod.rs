#![allow(dead_code)]

use std::path::PathBuf;

use anglestab::cli::Scenario;
use anglestab::dynsim::SystemSnapshot;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::from_file(&scenario_path(name)).unwrap()
}

pub fn snapshot(sc: &Scenario) -> SystemSnapshot {
    anglestab::dynsim::initialize_system(&sc.power_system().unwrap()).unwrap()
}

pub const BUNDLED: [&str; 6] = [
    "canonical.scn",
    "fault1_150ms.scn",
    "fault1_200ms.scn",
    "caseA_loadstep.scn",
    "caseB_loadstep.scn",
    "smib_classical.scn",
];

/// Largest absolute difference between two equally sampled channels.
pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
