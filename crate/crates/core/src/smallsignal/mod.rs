//! Linearization about an equilibrium and eigenvalue-based modal analysis.

mod modes;

pub use modes::{eigenmodes, least_damped, mode_time_consistency, ConsistencyReport, Mode};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dynsim::{Model, SimError, SystemSnapshot};

#[derive(Debug, thiserror::Error)]
pub enum SmallSignalError {
    #[error("operating point is not an equilibrium (derivative norm {residual:.3e})")]
    NotEquilibrium { residual: f64 },
    #[error("linearization failed while perturbing {state}: {source}")]
    Linearization {
        state: String,
        #[source]
        source: SimError,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("eigenvalue computation failed: {0}")]
    Numerical(String),
}

/// State matrix of the network-reduced system about an equilibrium.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub state_labels: Vec<String>,
    pub equilibrium: SystemSnapshot,
}

impl LinearModel {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
}

/// Default relative perturbation for [`linearize`].
pub const DEFAULT_PERTURBATION: f64 = 1e-6;

/// Derivative norm above which a snapshot is not treated as an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-8;

/// Central-difference state matrix. Each column perturbs one state by
/// `±h·max(|x|, 1)` and re-solves the network for both evaluations.
pub fn linearize(snap: &SystemSnapshot, h: f64) -> Result<LinearModel, SmallSignalError> {
    let residual = snap.residual()?;
    if !(residual < EQUILIBRIUM_TOL) {
        return Err(SmallSignalError::NotEquilibrium { residual });
    }
    let model = Model::new(snap)?;
    let labels = snap.state_labels();
    let x0 = &snap.states;
    let n = x0.len();
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let step = h * x0[j].abs().max(1.0);
            let eval = |sign: f64| -> Result<Vec<f64>, SimError> {
                let mut x = x0.clone();
                x[j] += sign * step;
                let mut v = snap.voltages.clone();
                let mut dx = vec![0.0; n];
                model.rhs(&x, &mut v, &mut dx, snap.time)?;
                Ok(dx)
            };
            let wrap = |source| SmallSignalError::Linearization {
                state: labels[j].clone(),
                source,
            };
            let fp = eval(1.0).map_err(wrap)?;
            let fm = eval(-1.0).map_err(wrap)?;
            Ok(fp.iter().zip(&fm).map(|(p, m)| (p - m) / (2.0 * step)).collect())
        })
        .collect::<Result<_, SmallSignalError>>()?;
    let a = DMatrix::from_fn(n, n, |i, j| columns[j][i]);
    if a.iter().any(|v| !v.is_finite()) {
        return Err(SmallSignalError::Numerical("non-finite state matrix entry".into()));
    }
    Ok(LinearModel {
        a,
        state_labels: labels,
        equilibrium: snap.clone(),
    })
}

#[cfg(test)]
pub(crate) mod tests_support {
    use crate::dynsim::{initialize_system, PowerSystem, SystemSnapshot};
    use crate::powergrid::{BusKind, BusSpec, NetworkModel};

    /// Infinite bus alone; no dynamic states.
    pub(crate) fn dummy_snapshot() -> SystemSnapshot {
        let bus = BusSpec {
            id: 1,
            kind: BusKind::Slack,
            base_kv: 230.0,
            v_setpoint: 1.0,
            angle_setpoint: 0.0,
        };
        let net = NetworkModel::new(vec![bus], vec![], vec![], 100.0).unwrap();
        initialize_system(&PowerSystem::new(net, vec![], 50.0).unwrap()).unwrap()
    }
}
