//! Static network description, admittance assembly and power-flow initialization.
//!
//! All quantities are per-unit on the system base (`s_base`, MVA) except load
//! and injection specifications, which are entered in MW / MVAr.

mod network;
mod powerflow;

pub use network::{
    assemble_admittance, BranchSpec, BranchStatus, BusId, BusKind, BusSpec, LoadSpec, NetworkModel,
    TopologyEvent,
};
pub use powerflow::{
    power_injections, solve_power_flow, Injection, PowerFlowOptions, PowerFlowSolution,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("unknown bus {0}")]
    UnknownBus(BusId),
    #[error("unknown branch '{0}'")]
    UnknownBranch(String),
    #[error("duplicate bus id {0}")]
    DuplicateBus(BusId),
    #[error("duplicate branch id '{0}'")]
    DuplicateBranch(String),
    #[error("network must have exactly one slack bus, found {0}")]
    SlackCount(usize),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PowerFlowError {
    #[error(transparent)]
    Structure(#[from] NetworkError),
    #[error("power flow diverged after {iterations} iterations (max mismatch {mismatch:.3e} pu)")]
    Diverged { iterations: usize, mismatch: f64 },
    #[error("power flow numerical failure: {0}")]
    Numerical(String),
}
