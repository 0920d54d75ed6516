use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::network::{BusId, BusKind, NetworkModel};
use super::PowerFlowError;

/// Generator-side injection at a bus (MW / MVAr). For PV buses only `p_mw` is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub bus: BusId,
    pub p_mw: f64,
    pub q_mvar: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct PowerFlowOptions {
    /// Convergence tolerance on the largest power mismatch, pu.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        PowerFlowOptions {
            tol: 1e-12,
            max_iter: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    pub bus_ids: Vec<BusId>,
    /// Complex bus voltages, pu, in network bus order.
    pub v: Vec<Complex64>,
    /// Net complex power injected into the network at each bus, pu on system base.
    pub s_injected: Vec<Complex64>,
    pub iterations: usize,
    pub max_mismatch: f64,
}

impl PowerFlowSolution {
    fn index(&self, bus: BusId) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == bus)
    }

    pub fn voltage(&self, bus: BusId) -> Option<Complex64> {
        self.index(bus).map(|k| self.v[k])
    }

    pub fn injection(&self, bus: BusId) -> Option<Complex64> {
        self.index(bus).map(|k| self.s_injected[k])
    }
}

/// Computed complex power injections S = V (Y V)*.
pub fn power_injections(y: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let current: Complex64 = (0..n).map(|k| y[(i, k)] * v[k]).sum();
            v[i] * current.conj()
        })
        .collect()
}

/// Polar-form Newton–Raphson power flow.
pub fn solve_power_flow(
    network: &NetworkModel,
    injections: &[Injection],
    opts: &PowerFlowOptions,
) -> Result<PowerFlowSolution, PowerFlowError> {
    let n = network.n_buses();
    let s_base = network.s_base();
    let y = network.y_bus();

    let mut p_spec = vec![0.0; n];
    let mut q_spec = vec![0.0; n];
    for inj in injections {
        let k = network.bus_index(inj.bus)?;
        p_spec[k] += inj.p_mw / s_base;
        q_spec[k] += inj.q_mvar / s_base;
    }
    for (k, bus) in network.buses().iter().enumerate() {
        let (pl, ql) = network.load_at_bus(bus.id);
        p_spec[k] -= pl / s_base;
        q_spec[k] -= ql / s_base;
    }

    let slack = network.slack_index();
    let slack_angle = network.buses()[slack].angle_setpoint;
    let slack_mag = network.buses()[slack].v_setpoint;
    let mut vm: Vec<f64> = network
        .buses()
        .iter()
        .map(|b| match b.kind {
            BusKind::Slack | BusKind::Pv => b.v_setpoint,
            BusKind::Pq => slack_mag,
        })
        .collect();
    let mut va = vec![slack_angle; n];

    // unknown ordering: angles of all non-slack buses, then magnitudes of PQ buses
    let ang_idx: Vec<usize> = (0..n).filter(|&k| k != slack).collect();
    let mag_idx: Vec<usize> = (0..n)
        .filter(|&k| network.buses()[k].kind == BusKind::Pq)
        .collect();
    let na = ang_idx.len();
    let dim = na + mag_idx.len();

    let voltages = |vm: &[f64], va: &[f64]| -> Vec<Complex64> {
        vm.iter()
            .zip(va)
            .map(|(&m, &a)| Complex64::from_polar(m, a))
            .collect()
    };

    let mut iterations = 0;
    loop {
        let v = voltages(&vm, &va);
        let s = power_injections(y, &v);
        let mut mismatch = DVector::zeros(dim);
        for (r, &k) in ang_idx.iter().enumerate() {
            mismatch[r] = p_spec[k] - s[k].re;
        }
        for (r, &k) in mag_idx.iter().enumerate() {
            mismatch[na + r] = q_spec[k] - s[k].im;
        }
        let max_mismatch = mismatch.amax();
        if !max_mismatch.is_finite() {
            return Err(PowerFlowError::Numerical(format!(
                "non-finite mismatch at iteration {iterations}"
            )));
        }
        if max_mismatch <= opts.tol {
            return Ok(PowerFlowSolution {
                bus_ids: network.buses().iter().map(|b| b.id).collect(),
                v,
                s_injected: s,
                iterations,
                max_mismatch,
            });
        }
        if iterations >= opts.max_iter {
            return Err(PowerFlowError::Diverged {
                iterations,
                mismatch: max_mismatch,
            });
        }

        let jac = jacobian(y, &v, &ang_idx, &mag_idx);
        let dx = jac
            .lu()
            .solve(&mismatch)
            .ok_or_else(|| PowerFlowError::Numerical("singular power-flow Jacobian".into()))?;
        for (r, &k) in ang_idx.iter().enumerate() {
            va[k] += dx[r];
        }
        for (r, &k) in mag_idx.iter().enumerate() {
            vm[k] += dx[na + r];
        }
        iterations += 1;
    }
}

/// Jacobian of (P, Q) with respect to (θ, |V|), restricted to the unknowns.
fn jacobian(
    y: &DMatrix<Complex64>,
    v: &[Complex64],
    ang_idx: &[usize],
    mag_idx: &[usize],
) -> DMatrix<f64> {
    let n = v.len();
    let na = ang_idx.len();
    let dim = na + mag_idx.len();
    // dS/dθ = j diag(V) conj(diag(I) - Y diag(V)), dS/d|V| = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
    let current: Vec<Complex64> = (0..n)
        .map(|i| (0..n).map(|k| y[(i, k)] * v[k]).sum())
        .collect();
    let ds_dth = |i: usize, k: usize| -> Complex64 {
        let diag = if i == k { current[i] } else { Complex64::new(0.0, 0.0) };
        Complex64::i() * v[i] * (diag - y[(i, k)] * v[k]).conj()
    };
    let ds_dvm = |i: usize, k: usize| -> Complex64 {
        let vn = v[k] / v[k].norm();
        let mut d = v[i] * (y[(i, k)] * vn).conj();
        if i == k {
            d += current[i].conj() * vn;
        }
        d
    };
    let mut jac = DMatrix::zeros(dim, dim);
    for (r, &i) in ang_idx.iter().enumerate() {
        for (c, &k) in ang_idx.iter().enumerate() {
            jac[(r, c)] = ds_dth(i, k).re;
        }
        for (c, &k) in mag_idx.iter().enumerate() {
            jac[(r, na + c)] = ds_dvm(i, k).re;
        }
    }
    for (r, &i) in mag_idx.iter().enumerate() {
        for (c, &k) in ang_idx.iter().enumerate() {
            jac[(na + r, c)] = ds_dth(i, k).im;
        }
        for (c, &k) in mag_idx.iter().enumerate() {
            jac[(na + r, na + c)] = ds_dvm(i, k).im;
        }
    }
    jac
}
