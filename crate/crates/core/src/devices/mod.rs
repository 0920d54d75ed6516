//! Dynamic device models and their interface to the network.
//!
//! Every device works in per-unit on its own rating (`s_rated`, MVA). The
//! engine converts currents to the system base at the network boundary.

mod gfm;
mod limiter;
mod machine;
mod pll;

use std::fmt::Debug;

use num_complex::Complex64;

use crate::powergrid::BusId;

pub use gfm::{gfm_vsm_derivatives, DampingReference, GFM_FIELDS, GfmSetpoints, GfmVsm, GfmVsmParams, GfmVsmState};
pub use limiter::csa_limit;
pub use machine::{
    sm_derivatives, ExciterParams, MACHINE_FIELDS, GovernorParams, MachineModel, MachineSetpoints, PssParams,
    SyncMachine, SyncMachineParams, SyncMachineState,
};
pub use pll::{pll_derivatives, q_error, PllParams, PllState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Technology {
    SynchronousMachine,
    GfmConverter,
}

impl Technology {
    pub fn tag(self) -> &'static str {
        match self {
            Technology::SynchronousMachine => "synchronous_machine",
            Technology::GfmConverter => "gfm_converter",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "synchronous_machine" => Some(Technology::SynchronousMachine),
            "gfm_converter" => Some(Technology::GfmConverter),
            _ => None,
        }
    }
}

/// Terminal quantities reported in traces, on the device base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceOutputs {
    /// Voltage-source angle (rotor or modulated voltage), radians.
    pub angle: f64,
    /// Speed deviation, pu.
    pub speed: f64,
    pub p: f64,
    pub q: f64,
    pub v: f64,
    pub i: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DeviceError {
    #[error("device {device}: {reason}")]
    Infeasible { device: String, reason: String },
    #[error("device {device}: unknown parameter '{field}'")]
    UnknownParam { device: String, field: String },
    #[error("device {device}: invalid parameter: {reason}")]
    InvalidParam { device: String, reason: String },
}

/// A dynamic device attached to one network bus.
pub trait Device: Debug + Send + Sync {
    fn name(&self) -> &str;
    fn bus(&self) -> BusId;
    fn technology(&self) -> Technology;
    /// Device rating, MVA.
    fn s_rated(&self) -> f64;
    fn state_labels(&self) -> &'static [&'static str];

    fn n_states(&self) -> usize {
        self.state_labels().len()
    }

    /// Active-power dispatch for the power flow, MW.
    fn dispatch_mw(&self) -> f64;

    /// Shunt admittance the network solver folds into the bus matrix, pu on
    /// device base. The injected current is expected to be close to
    /// `norton_admittance * (E - V)` so the fixed-point iteration contracts.
    fn norton_admittance(&self) -> Complex64;

    /// Current injected into the network, pu on device base.
    fn current(&self, x: &[f64], v: Complex64) -> Complex64;

    fn derivatives(&self, x: &[f64], v: Complex64, omega_b: f64, dx: &mut [f64]);

    /// Back-solves internal states and setpoints from the terminal voltage and
    /// the power delivered at the terminal (pu on device base).
    fn initialize(&mut self, v: Complex64, s: Complex64) -> Result<Vec<f64>, DeviceError>;

    fn outputs(&self, x: &[f64], v: Complex64) -> DeviceOutputs;

    /// Names accepted by [`Device::param`] and [`Device::set_params`].
    fn param_fields(&self) -> &'static [&'static str];
    fn param(&self, field: &str) -> Option<f64>;
    /// Applies all assignments, then validates once; on error the device is
    /// left unchanged.
    fn set_params(&mut self, fields: &[(&str, f64)]) -> Result<(), DeviceError>;
    fn set_param(&mut self, field: &str, value: f64) -> Result<(), DeviceError> {
        self.set_params(&[(field, value)])
    }

    fn clone_box(&self) -> Box<dyn Device>;
}

impl Clone for Box<dyn Device> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

pub(crate) fn positive(device: &str, field: &str, value: f64) -> Result<(), DeviceError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(DeviceError::InvalidParam {
            device: device.to_string(),
            reason: format!("{field} must be positive, got {value}"),
        })
    }
}
