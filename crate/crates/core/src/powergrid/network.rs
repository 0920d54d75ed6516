use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::NetworkError;

pub type BusId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

impl BusKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BusKind::Slack => "slack",
            BusKind::Pv => "pv",
            BusKind::Pq => "pq",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusSpec {
    pub id: BusId,
    pub kind: BusKind,
    pub base_kv: f64,
    /// Voltage magnitude setpoint, pu. Used by slack and PV buses.
    pub v_setpoint: f64,
    /// Slack bus angle, radians.
    pub angle_setpoint: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchStatus {
    InService,
    OutOfService,
}

/// Pi-model branch on the system base. `tap` is the off-nominal ratio on the `from` side.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSpec {
    pub id: String,
    pub from: BusId,
    pub to: BusId,
    pub r: f64,
    pub x: f64,
    pub b_shunt: f64,
    pub tap: f64,
    pub status: BranchStatus,
}

impl BranchSpec {
    pub fn line(id: &str, from: BusId, to: BusId, r: f64, x: f64, b_shunt: f64) -> Self {
        BranchSpec {
            id: id.to_string(),
            from,
            to,
            r,
            x,
            b_shunt,
            tap: 1.0,
            status: BranchStatus::InService,
        }
    }

    pub fn in_service(&self) -> bool {
        self.status == BranchStatus::InService
    }

    pub fn series_admittance(&self) -> Complex64 {
        Complex64::new(self.r, self.x).inv()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadSpec {
    pub bus: BusId,
    /// Nominal active power, MW.
    pub p0: f64,
    /// Nominal reactive power, MVAr.
    pub q0: f64,
    pub scale: f64,
}

impl LoadSpec {
    pub fn new(bus: BusId, p0: f64, q0: f64) -> Self {
        LoadSpec {
            bus,
            p0,
            q0,
            scale: 1.0,
        }
    }

    /// Scaled demand in MW / MVAr.
    pub fn demand(&self) -> (f64, f64) {
        (self.p0 * self.scale, self.q0 * self.scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyEvent {
    SetFault { bus: BusId, admittance: Complex64 },
    ClearFault,
    TripBranch(String),
    SetLoadScale { bus: BusId, scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    buses: Vec<BusSpec>,
    branches: Vec<BranchSpec>,
    loads: Vec<LoadSpec>,
    s_base: f64,
    fault: Option<(BusId, Complex64)>,
    index: HashMap<BusId, usize>,
    y_bus: DMatrix<Complex64>,
}

impl NetworkModel {
    pub fn new(
        buses: Vec<BusSpec>,
        branches: Vec<BranchSpec>,
        loads: Vec<LoadSpec>,
        s_base: f64,
    ) -> Result<Self, NetworkError> {
        if !(s_base > 0.0) {
            return Err(NetworkError::Invalid(format!("s_base must be positive, got {s_base}")));
        }
        let mut index = HashMap::with_capacity(buses.len());
        for (k, bus) in buses.iter().enumerate() {
            if index.insert(bus.id, k).is_some() {
                return Err(NetworkError::DuplicateBus(bus.id));
            }
            if !(bus.base_kv > 0.0) {
                return Err(NetworkError::Invalid(format!("bus {}: base_kv must be positive", bus.id)));
            }
        }
        let slack = buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slack != 1 {
            return Err(NetworkError::SlackCount(slack));
        }
        let mut seen = std::collections::HashSet::new();
        for br in &branches {
            if !seen.insert(br.id.as_str()) {
                return Err(NetworkError::DuplicateBranch(br.id.clone()));
            }
            if br.from == br.to {
                return Err(NetworkError::Invalid(format!("branch {}: from == to", br.id)));
            }
            if br.x == 0.0 {
                return Err(NetworkError::Invalid(format!("branch {}: x must be non-zero", br.id)));
            }
            if !(br.tap > 0.0) {
                return Err(NetworkError::Invalid(format!("branch {}: tap must be positive", br.id)));
            }
        }
        for load in &loads {
            if !index.contains_key(&load.bus) {
                return Err(NetworkError::UnknownBus(load.bus));
            }
            if !(load.scale >= 0.0) {
                return Err(NetworkError::Invalid(format!("load at bus {}: negative scale", load.bus)));
            }
        }
        let mut net = NetworkModel {
            buses,
            branches,
            loads,
            s_base,
            fault: None,
            index,
            y_bus: DMatrix::zeros(0, 0),
        };
        net.y_bus = assemble_admittance(&net)?;
        Ok(net)
    }

    pub fn buses(&self) -> &[BusSpec] {
        &self.buses
    }

    pub fn branches(&self) -> &[BranchSpec] {
        &self.branches
    }

    pub fn loads(&self) -> &[LoadSpec] {
        &self.loads
    }

    pub fn s_base(&self) -> f64 {
        self.s_base
    }

    pub fn fault(&self) -> Option<(BusId, Complex64)> {
        self.fault
    }

    pub fn y_bus(&self) -> &DMatrix<Complex64> {
        &self.y_bus
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_index(&self, id: BusId) -> Result<usize, NetworkError> {
        self.index.get(&id).copied().ok_or(NetworkError::UnknownBus(id))
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated on construction")
    }

    pub fn branch(&self, id: &str) -> Result<&BranchSpec, NetworkError> {
        self.branches
            .iter()
            .find(|b| b.id == id)
            .ok_or_else(|| NetworkError::UnknownBranch(id.to_string()))
    }

    /// Scaled load at a bus in MW / MVAr, summed over all loads attached there.
    pub fn load_at_bus(&self, bus: BusId) -> (f64, f64) {
        self.loads
            .iter()
            .filter(|l| l.bus == bus)
            .map(LoadSpec::demand)
            .fold((0.0, 0.0), |(p, q), (lp, lq)| (p + lp, q + lq))
    }

    /// Returns an updated copy with the admittance matrix re-assembled.
    pub fn apply_topology_event(&self, event: &TopologyEvent) -> Result<NetworkModel, NetworkError> {
        let mut next = self.clone();
        match event {
            &TopologyEvent::SetFault { bus, admittance } => {
                self.bus_index(bus)?;
                next.fault = Some((bus, admittance));
            }
            TopologyEvent::ClearFault => next.fault = None,
            TopologyEvent::TripBranch(id) => {
                let br = next
                    .branches
                    .iter_mut()
                    .find(|b| &b.id == id)
                    .ok_or_else(|| NetworkError::UnknownBranch(id.clone()))?;
                br.status = BranchStatus::OutOfService;
            }
            &TopologyEvent::SetLoadScale { bus, scale } => {
                self.bus_index(bus)?;
                if !(scale >= 0.0) {
                    return Err(NetworkError::Invalid(format!("load scale {scale} is negative")));
                }
                let mut found = false;
                for load in next.loads.iter_mut().filter(|l| l.bus == bus) {
                    load.scale = scale;
                    found = true;
                }
                if !found {
                    return Err(NetworkError::Invalid(format!("no load at bus {bus}")));
                }
            }
        }
        next.y_bus = assemble_admittance(&next)?;
        Ok(next)
    }
}

/// Pi-model stamping of all in-service branches plus the fault shunt, if any.
/// Loads are not stamped here; power flow treats them as injections and the
/// dynamic engine adds them as shunts.
pub fn assemble_admittance(network: &NetworkModel) -> Result<DMatrix<Complex64>, NetworkError> {
    let n = network.buses.len();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for br in network.branches.iter().filter(|b| b.in_service()) {
        stamp_branch(&mut y, network, br)?;
    }
    if let Some((bus, yf)) = network.fault {
        let k = network.bus_index(bus)?;
        y[(k, k)] += yf;
    }
    Ok(y)
}

pub(crate) fn stamp_branch(
    y: &mut DMatrix<Complex64>,
    network: &NetworkModel,
    br: &BranchSpec,
) -> Result<(), NetworkError> {
    let f = network.bus_index(br.from)?;
    let t = network.bus_index(br.to)?;
    let ys = br.series_admittance();
    let half_b = Complex64::new(0.0, br.b_shunt / 2.0);
    let tap = br.tap;
    y[(f, f)] += (ys + half_b) / (tap * tap);
    y[(t, t)] += ys + half_b;
    y[(f, t)] -= ys / tap;
    y[(t, f)] -= ys / tap;
    Ok(())
}
