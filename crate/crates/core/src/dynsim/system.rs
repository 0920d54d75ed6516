use num_complex::Complex64;

use super::engine::Model;
use super::SimError;
use crate::devices::{Device, DeviceError, Technology};
use crate::powergrid::{
    solve_power_flow, BusId, BusKind, Injection, NetworkModel, PowerFlowOptions, PowerFlowSolution,
};

/// Ideal voltage source at the slack bus; defines the angle reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfiniteBusModel {
    pub bus: BusId,
    pub v_mag: f64,
    pub angle: f64,
    pub frequency: f64,
}

impl InfiniteBusModel {
    pub fn voltage(&self) -> Complex64 {
        Complex64::from_polar(self.v_mag, self.angle)
    }
}

/// Network plus dynamic devices, before initialization.
#[derive(Debug, Clone)]
pub struct PowerSystem {
    pub network: NetworkModel,
    pub devices: Vec<Box<dyn Device>>,
    pub f_nom: f64,
}

impl PowerSystem {
    pub fn new(network: NetworkModel, devices: Vec<Box<dyn Device>>, f_nom: f64) -> Result<Self, SimError> {
        let sys = PowerSystem {
            network,
            devices,
            f_nom,
        };
        sys.validate()?;
        Ok(sys)
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.f_nom > 0.0) {
            return Err(SimError::Config("f_nom must be positive".into()));
        }
        let mut seen_bus = Vec::new();
        let mut seen_name = Vec::new();
        for d in &self.devices {
            let k = self.network.bus_index(d.bus())?;
            let bus = &self.network.buses()[k];
            if bus.kind != BusKind::Pv {
                return Err(SimError::Config(format!(
                    "device {} sits on bus {} which is not a pv bus",
                    d.name(),
                    bus.id
                )));
            }
            if seen_bus.contains(&bus.id) {
                return Err(SimError::Config(format!("more than one device on bus {}", bus.id)));
            }
            if seen_name.contains(&d.name()) {
                return Err(SimError::Config(format!("duplicate device name {}", d.name())));
            }
            seen_bus.push(bus.id);
            seen_name.push(d.name());
        }
        Ok(())
    }

    pub fn omega_b(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f_nom
    }

    pub fn infinite_bus(&self) -> InfiniteBusModel {
        let k = self.network.slack_index();
        let b = &self.network.buses()[k];
        InfiniteBusModel {
            bus: b.id,
            v_mag: b.v_setpoint,
            angle: b.angle_setpoint,
            frequency: 1.0,
        }
    }

    pub fn injections(&self) -> Vec<Injection> {
        self.devices
            .iter()
            .map(|d| Injection {
                bus: d.bus(),
                p_mw: d.dispatch_mw(),
                q_mvar: 0.0,
            })
            .collect()
    }

    pub fn power_flow(&self, opts: &PowerFlowOptions) -> Result<PowerFlowSolution, SimError> {
        Ok(solve_power_flow(&self.network, &self.injections(), opts)?)
    }

    pub fn device(&self, name: &str) -> Option<&dyn Device> {
        self.devices.iter().find(|d| d.name() == name).map(|d| d.as_ref())
    }

    pub fn set_device_param(&mut self, name: &str, field: &str, value: f64) -> Result<(), SimError> {
        let dev = self
            .devices
            .iter_mut()
            .find(|d| d.name() == name)
            .ok_or_else(|| SimError::Config(format!("unknown device {name}")))?;
        dev.set_param(field, value)?;
        Ok(())
    }
}

/// Full dynamic state at one instant.
#[derive(Debug, Clone)]
pub struct SystemSnapshot {
    pub system: PowerSystem,
    pub states: Vec<f64>,
    /// Bus voltages from the last network solve, network bus order.
    pub voltages: Vec<Complex64>,
    /// Squared voltage magnitudes at initialization; loads are constant
    /// admittances referred to these.
    pub(crate) v0_sq: Vec<f64>,
    pub time: f64,
}

impl SystemSnapshot {
    pub fn state_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.system.devices.len() + 1);
        let mut k = 0;
        for d in &self.system.devices {
            off.push(k);
            k += d.n_states();
        }
        off.push(k);
        off
    }

    /// `device.state` label of every entry in `states`.
    pub fn state_labels(&self) -> Vec<String> {
        self.system
            .devices
            .iter()
            .flat_map(|d| d.state_labels().iter().map(move |l| format!("{}.{l}", d.name())))
            .collect()
    }

    pub fn device_technologies(&self) -> Vec<(String, Technology)> {
        self.system
            .devices
            .iter()
            .map(|d| (d.name().to_string(), d.technology()))
            .collect()
    }

    /// State derivative with the network re-solved at `x`.
    pub fn derivatives_at(&self, x: &[f64]) -> Result<Vec<f64>, SimError> {
        let model = Model::new(self)?;
        let mut v = self.voltages.clone();
        let mut dx = vec![0.0; x.len()];
        model.rhs(x, &mut v, &mut dx, self.time)?;
        Ok(dx)
    }

    /// Infinity norm of the state derivative at the stored states.
    pub fn residual(&self) -> Result<f64, SimError> {
        Ok(self
            .derivatives_at(&self.states)?
            .iter()
            .fold(0.0f64, |m, d| m.max(d.abs())))
    }
}

/// Back-solves device states from a converged power flow and converts loads
/// to constant admittances.
pub fn initialize(system: &PowerSystem, pf: &PowerFlowSolution) -> Result<SystemSnapshot, SimError> {
    let net = &system.network;
    let s_base = net.s_base();
    let mut devices = system.devices.clone();
    let mut states = Vec::new();
    for d in devices.iter_mut() {
        let k = net.bus_index(d.bus())?;
        let (pl, ql) = net.load_at_bus(d.bus());
        let s_gen_sys = pf.s_injected[k] + Complex64::new(pl, ql) / s_base;
        let s_dev = s_gen_sys * (s_base / d.s_rated());
        let x = d.initialize(pf.v[k], s_dev)?;
        states.extend(x);
    }
    let snapshot = SystemSnapshot {
        system: PowerSystem {
            network: net.clone(),
            devices,
            f_nom: system.f_nom,
        },
        states,
        voltages: pf.v.clone(),
        v0_sq: pf.v.iter().map(|v| v.norm_sqr()).collect(),
        time: 0.0,
    };
    let residual = snapshot.residual()?;
    if residual > 1e-8 {
        return Err(SimError::NotEquilibrium { residual });
    }
    Ok(snapshot)
}

/// Power flow followed by initialization.
pub fn initialize_system(system: &PowerSystem) -> Result<SystemSnapshot, SimError> {
    let pf = system.power_flow(&PowerFlowOptions::default())?;
    initialize(system, &pf)
}

impl From<DeviceError> for SimError {
    fn from(e: DeviceError) -> Self {
        SimError::Device(e)
    }
}
