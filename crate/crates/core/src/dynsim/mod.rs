//! Time-domain integration of the network-device DAE with scheduled events.
//!
//! The network is algebraic and re-solved at every derivative evaluation;
//! device states are integrated with the trapezoidal rule (chord Newton
//! corrector) or classical RK4. Steps are split so events land exactly on
//! their timestamps.

mod engine;
mod system;
mod trace;

use num_complex::Complex64;

pub(crate) use engine::Model;
pub use engine::{channel_names, equilibrium_after, simulate, simulate_states};
pub use system::{initialize, initialize_system, InfiniteBusModel, PowerSystem, SystemSnapshot};
pub use trace::{resample, Channel, Trace};

use crate::devices::DeviceError;
use crate::powergrid::{BusId, NetworkError, PowerFlowError};

#[derive(Debug, Clone, PartialEq)]
pub enum EventAction {
    ApplyFault { bus: BusId, admittance: Complex64 },
    /// Removes the fault shunt and leaves the topology intact.
    ClearFault,
    ClearFaultAndTrip { branch: String },
    TripBranch { branch: String },
    LoadScale { bus: BusId, factor: f64 },
    ParamOverride { device: String, field: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub action: EventAction,
}

impl Event {
    pub fn new(time: f64, action: EventAction) -> Self {
        Event { time, action }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Trapezoidal,
    Rk4,
}

impl Integrator {
    pub fn as_str(self) -> &'static str {
        match self {
            Integrator::Trapezoidal => "trapezoidal",
            Integrator::Rk4 => "rk4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    pub integrator: Integrator,
    /// Largest bus-voltage update accepted as converged, pu.
    pub network_solve_tol: f64,
    pub max_inner_iter: usize,
    pub stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_end: 10.0,
            dt: 1e-3,
            integrator: Integrator::Trapezoidal,
            network_solve_tol: 1e-12,
            max_inner_iter: 200,
            stride: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(SimError::Config(format!("dt must lie in (0, 0.01] s, got {}", self.dt)));
        }
        if !(self.t_end > 0.0) {
            return Err(SimError::Config("t_end must be positive".into()));
        }
        if self.stride == 0 {
            return Err(SimError::Config("stride must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error("initialization failed: {0}")]
    Device(DeviceError),
    #[error("initial state is not an equilibrium (max derivative {residual:.3e})")]
    NotEquilibrium { residual: f64 },
    #[error("network solve did not converge at t = {time:.6} s")]
    Convergence { time: f64, partial: Option<Box<Trace>> },
    #[error("numerical failure at t = {time:.6} s: {reason}")]
    Numerical {
        time: f64,
        reason: String,
        partial: Option<Box<Trace>>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl SimError {
    /// Trace recorded up to the failure, if the error happened mid-run.
    pub fn partial_trace(&self) -> Option<&Trace> {
        match self {
            SimError::Convergence { partial, .. } | SimError::Numerical { partial, .. } => {
                partial.as_deref()
            }
            _ => None,
        }
    }
}
