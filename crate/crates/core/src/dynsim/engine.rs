use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;

use super::system::SystemSnapshot;
use super::trace::Trace;
use super::{Event, EventAction, Integrator, SimConfig, SimError};
use crate::devices::Device;
use crate::powergrid::TopologyEvent;

const CHANNELS: [&str; 6] = ["angle", "speed", "p", "q", "v", "i"];

/// Algebraic network plus device coupling for one topology.
pub(crate) struct Model {
    devices: Vec<Box<dyn Device>>,
    ref_angle: f64,
    slack: usize,
    /// reduced position of every full bus index (None for the slack bus)
    pos: Vec<Option<usize>>,
    z: DMatrix<Complex64>,
    i_fixed: DVector<Complex64>,
    v_slack: Complex64,
    dev_bus: Vec<usize>,
    dev_norton: Vec<Complex64>,
    dev_scale: Vec<f64>,
    offsets: Vec<usize>,
    omega_b: f64,
    tol: f64,
    max_iter: usize,
}

impl Model {
    pub(crate) fn new(snap: &SystemSnapshot) -> Result<Self, SimError> {
        let cfg = SimConfig::default();
        Self::with_tolerance(snap, cfg.network_solve_tol, cfg.max_inner_iter)
    }

    pub(crate) fn with_tolerance(
        snap: &SystemSnapshot,
        tol: f64,
        max_iter: usize,
    ) -> Result<Self, SimError> {
        let sys = &snap.system;
        let net = &sys.network;
        let n = net.n_buses();
        let s_base = net.s_base();
        let slack = net.slack_index();
        let mut y = net.y_bus().clone();

        for load in net.loads() {
            let k = net.bus_index(load.bus)?;
            let (p, q) = load.demand();
            y[(k, k)] += Complex64::new(p, -q) / s_base / snap.v0_sq[k];
        }
        let mut dev_bus = Vec::new();
        let mut dev_norton = Vec::new();
        let mut dev_scale = Vec::new();
        for d in &sys.devices {
            let k = net.bus_index(d.bus())?;
            let scale = d.s_rated() / s_base;
            let yn = d.norton_admittance() * scale;
            y[(k, k)] += yn;
            dev_bus.push(k);
            dev_norton.push(yn);
            dev_scale.push(scale);
        }

        let mut pos = vec![None; n];
        let others: Vec<usize> = (0..n).filter(|&k| k != slack).collect();
        for (r, &k) in others.iter().enumerate() {
            pos[k] = Some(r);
        }
        let m = others.len();
        let y_nn = DMatrix::from_fn(m, m, |r, c| y[(others[r], others[c])]);
        let z = y_nn
            .try_inverse()
            .ok_or_else(|| SimError::Config("singular network matrix".into()))?;
        let v_slack = sys.infinite_bus().voltage();
        let i_fixed = DVector::from_fn(m, |r, _| -y[(others[r], slack)] * v_slack);

        Ok(Model {
            devices: sys.devices.clone(),
            ref_angle: sys.infinite_bus().angle,
            slack,
            pos,
            z,
            i_fixed,
            v_slack,
            dev_bus,
            dev_norton,
            dev_scale,
            offsets: snap.state_offsets(),
            omega_b: sys.omega_b(),
            tol,
            max_iter,
        })
    }

    fn device_states<'x>(&self, x: &'x [f64], k: usize) -> &'x [f64] {
        &x[self.offsets[k]..self.offsets[k + 1]]
    }

    /// Fixed-point iteration on the Norton-equivalent injections. `v` holds
    /// the initial guess and receives the solution.
    pub(crate) fn solve_network(&self, x: &[f64], v: &mut [Complex64], t: f64) -> Result<(), SimError> {
        v[self.slack] = self.v_slack;
        let devices = &self.devices;
        for _ in 0..self.max_iter {
            let mut i_src = self.i_fixed.clone();
            for (k, d) in devices.iter().enumerate() {
                let b = self.dev_bus[k];
                let r = self.pos[b].expect("devices never sit on the slack bus");
                let i = d.current(self.device_states(x, k), v[b]) * self.dev_scale[k];
                i_src[r] += i + self.dev_norton[k] * v[b];
            }
            let v_new = &self.z * i_src;
            let mut change = 0.0f64;
            for (b, p) in self.pos.iter().enumerate() {
                if let Some(r) = *p {
                    change = change.max((v_new[r] - v[b]).norm());
                    v[b] = v_new[r];
                }
            }
            if !change.is_finite() {
                return Err(SimError::Numerical {
                    time: t,
                    reason: "non-finite bus voltage".into(),
                    partial: None,
                });
            }
            if change <= self.tol {
                return Ok(());
            }
        }
        Err(SimError::Convergence { time: t, partial: None })
    }

    pub(crate) fn rhs(&self, x: &[f64], v: &mut [Complex64], dx: &mut [f64], t: f64) -> Result<(), SimError> {
        self.solve_network(x, v, t)?;
        for (k, d) in self.devices.iter().enumerate() {
            let (a, b) = (self.offsets[k], self.offsets[k + 1]);
            d.derivatives(&x[a..b], v[self.dev_bus[k]], self.omega_b, &mut dx[a..b]);
        }
        Ok(())
    }

    /// Forward-difference state Jacobian with the network eliminated.
    fn jacobian(&self, x: &[f64], f: &[f64], v: &[Complex64], t: f64) -> Result<DMatrix<f64>, SimError> {
        let n = x.len();
        let mut a = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; n];
        for j in 0..n {
            let h = 1e-7 * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            let mut vp = v.to_vec();
            self.rhs(&xp, &mut vp, &mut fp, t)?;
            for i in 0..n {
                a[(i, j)] = (fp[i] - f[i]) / h;
            }
            xp[j] = x[j];
        }
        Ok(a)
    }

    fn record(&self, x: &[f64], v: &[Complex64], out: &mut Vec<f64>) {
        out.clear();
        let ref_angle = self.ref_angle;
        for (k, d) in self.devices.iter().enumerate() {
            let o = d.outputs(self.device_states(x, k), v[self.dev_bus[k]]);
            let s = d.s_rated();
            out.extend_from_slice(&[
                (o.angle - ref_angle).to_degrees(),
                o.speed,
                o.p * s,
                o.q * s,
                o.v,
                o.i,
            ]);
        }
    }
}

/// Trace channel names in declaration order.
pub fn channel_names(snap: &SystemSnapshot) -> Vec<String> {
    snap.system
        .devices
        .iter()
        .flat_map(|d| CHANNELS.iter().map(move |c| format!("{}.{c}", d.name())))
        .collect()
}

/// Chord-Newton state for the trapezoidal corrector.
struct Trapezoid {
    lu: Option<(LU<f64, nalgebra::Dyn, nalgebra::Dyn>, f64)>,
    f_prev: Option<Vec<f64>>,
}

impl Trapezoid {
    const MAX_NEWTON: usize = 8;
    /// Failed steps are retried as two half steps, at most this many times
    /// nested; the innermost fallback is an explicit step.
    const MAX_SPLIT: u32 = 6;

    fn invalidate(&mut self) {
        self.lu = None;
        self.f_prev = None;
    }

    fn step(
        &mut self,
        model: &Model,
        x: &mut Vec<f64>,
        v: &mut Vec<Complex64>,
        t: f64,
        h: f64,
    ) -> Result<(), SimError> {
        self.step_split(model, x, v, t, h, 0)
    }

    fn step_split(
        &mut self,
        model: &Model,
        x: &mut Vec<f64>,
        v: &mut Vec<Complex64>,
        t: f64,
        h: f64,
        depth: u32,
    ) -> Result<(), SimError> {
        match self.try_step(model, x, v, t, h) {
            Err(SimError::Convergence { .. }) if depth < Self::MAX_SPLIT => {
                self.invalidate();
                let half = 0.5 * h;
                self.step_split(model, x, v, t, half, depth + 1)?;
                self.step_split(model, x, v, t + half, h - half, depth + 1)?;
                // the cached factorization belongs to the shorter step
                self.lu = None;
                Ok(())
            }
            Err(SimError::Convergence { .. }) => {
                // a limiter kink the corrector cannot straddle; the interval
                // is short enough for one explicit step
                self.invalidate();
                rk4_step(model, x, v, t, h)
            }
            r => r,
        }
    }

    fn try_step(
        &mut self,
        model: &Model,
        x: &mut Vec<f64>,
        v: &mut Vec<Complex64>,
        t: f64,
        h: f64,
    ) -> Result<(), SimError> {
        let n = x.len();
        let f0 = match self.f_prev.take() {
            Some(f) => f,
            None => {
                let mut f = vec![0.0; n];
                model.rhs(x, v, &mut f, t)?;
                f
            }
        };
        let x0 = x.clone();
        for attempt in 0..2 {
            if attempt == 1 {
                self.lu = None;
            }
            let mut x1: Vec<f64> = x0.iter().zip(&f0).map(|(a, b)| a + h * b).collect();
            let mut v1 = v.clone();
            let mut f1 = vec![0.0; n];
            let mut converged = false;
            for _ in 0..Self::MAX_NEWTON {
                model.rhs(&x1, &mut v1, &mut f1, t + h)?;
                let g = DVector::from_fn(n, |i, _| x1[i] - x0[i] - 0.5 * h * (f0[i] + f1[i]));
                let stale = !matches!(&self.lu, Some((_, hh)) if (*hh - h).abs() <= 1e-9 * h);
                if stale {
                    let a = model.jacobian(&x1, &f1, &v1, t + h)?;
                    let j = DMatrix::identity(n, n) - a * (0.5 * h);
                    self.lu = Some((j.lu(), h));
                }
                let (lu, _) = self.lu.as_ref().unwrap();
                let dx = lu.solve(&g).ok_or_else(|| SimError::Numerical {
                    time: t + h,
                    reason: "singular corrector matrix".into(),
                    partial: None,
                })?;
                let mut step = 0.0f64;
                let mut scale = 1.0f64;
                for i in 0..n {
                    x1[i] -= dx[i];
                    step = step.max(dx[i].abs());
                    scale = scale.max(x1[i].abs());
                }
                if !step.is_finite() {
                    return Err(SimError::Numerical {
                        time: t + h,
                        reason: "non-finite corrector update".into(),
                        partial: None,
                    });
                }
                if step <= 1e-11 * scale {
                    converged = true;
                    break;
                }
            }
            if converged {
                model.rhs(&x1, &mut v1, &mut f1, t + h)?;
                *x = x1;
                *v = v1;
                self.f_prev = Some(f1);
                return Ok(());
            }
        }
        Err(SimError::Convergence {
            time: t + h,
            partial: None,
        })
    }
}

fn rk4_step(model: &Model, x: &mut [f64], v: &mut [Complex64], t: f64, h: f64) -> Result<(), SimError> {
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut xs = vec![0.0; n];
    model.rhs(x, v, &mut k1, t)?;
    let mut vs = v.to_vec();
    for i in 0..n {
        xs[i] = x[i] + 0.5 * h * k1[i];
    }
    model.rhs(&xs, &mut vs, &mut k2, t + 0.5 * h)?;
    for i in 0..n {
        xs[i] = x[i] + 0.5 * h * k2[i];
    }
    model.rhs(&xs, &mut vs, &mut k3, t + 0.5 * h)?;
    for i in 0..n {
        xs[i] = x[i] + h * k3[i];
    }
    model.rhs(&xs, &mut vs, &mut k4, t + h)?;
    for i in 0..n {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    model.solve_network(x, v, t + h)
}

pub(crate) fn apply_event(snap: &mut SystemSnapshot, action: &EventAction) -> Result<(), SimError> {
    let net = &snap.system.network;
    let next = match action {
        EventAction::ApplyFault { bus, admittance } => Some(net.apply_topology_event(&TopologyEvent::SetFault {
            bus: *bus,
            admittance: *admittance,
        })?),
        EventAction::ClearFault => Some(net.apply_topology_event(&TopologyEvent::ClearFault)?),
        EventAction::ClearFaultAndTrip { branch } => Some(
            net.apply_topology_event(&TopologyEvent::ClearFault)?
                .apply_topology_event(&TopologyEvent::TripBranch(branch.clone()))?,
        ),
        EventAction::TripBranch { branch } => {
            Some(net.apply_topology_event(&TopologyEvent::TripBranch(branch.clone()))?)
        }
        EventAction::LoadScale { bus, factor } => Some(net.apply_topology_event(&TopologyEvent::SetLoadScale {
            bus: *bus,
            scale: *factor,
        })?),
        EventAction::ParamOverride { device, field, value } => {
            snap.system.set_device_param(device, field, *value)?;
            None
        }
    };
    if let Some(net) = next {
        snap.system.network = net;
    }
    Ok(())
}

fn with_partial(err: SimError, trace: &Trace) -> SimError {
    match err {
        SimError::Numerical { time, reason, .. } => SimError::Numerical {
            time,
            reason,
            partial: Some(Box::new(trace.clone())),
        },
        SimError::Convergence { time, .. } => SimError::Convergence {
            time,
            partial: Some(Box::new(trace.clone())),
        },
        other => other,
    }
}

pub fn simulate(snapshot: &SystemSnapshot, events: &[Event], config: &SimConfig) -> Result<Trace, SimError> {
    config.validate()?;
    for (k, ev) in events.iter().enumerate() {
        if !(ev.time >= 0.0) {
            return Err(SimError::Config(format!("event {k} has negative time")));
        }
        if k > 0 && ev.time < events[k - 1].time {
            return Err(SimError::Config("events must be sorted by time".into()));
        }
    }
    // dry run so bad references fail before integrating
    {
        let mut probe = snapshot.clone();
        for ev in events {
            apply_event(&mut probe, &ev.action)?;
        }
    }

    let mut snap = snapshot.clone();
    let mut x = snap.states.clone();
    let mut v = snap.voltages.clone();
    let mut trace = Trace::new(channel_names(&snap), config.stride);
    let mut row = Vec::new();
    let t_start = snap.time;

    let build = |snap: &SystemSnapshot| {
        Model::with_tolerance(snap, config.network_solve_tol, config.max_inner_iter)
    };
    let mut model = build(&snap)?;
    model.solve_network(&x, &mut v, t_start)?;
    model.record(&x, &v, &mut row);
    trace.push(t_start, &row);

    let n_steps = (config.t_end / config.dt).round() as usize;
    let mut next_event = 0;
    let mut trap = Trapezoid {
        lu: None,
        f_prev: None,
    };
    let eps = 1e-9;

    for n in 0..n_steps {
        let t1 = t_start + (n + 1) as f64 * config.dt;
        let mut t = t_start + n as f64 * config.dt;
        while t < t1 - eps {
            let mut changed = false;
            while next_event < events.len() && events[next_event].time <= t + eps {
                apply_event(&mut snap, &events[next_event].action)?;
                next_event += 1;
                changed = true;
            }
            let t_next = match events.get(next_event) {
                Some(ev) if ev.time < t1 - eps => ev.time,
                _ => t1,
            };
            if changed {
                model = build(&snap)?;
                trap.invalidate();
                model
                    .solve_network(&x, &mut v, t)
                    .map_err(|e| with_partial(e, &trace))?;
            }
            let h = t_next - t;
            let res = match config.integrator {
                Integrator::Trapezoidal => trap.step(&model, &mut x, &mut v, t, h),
                Integrator::Rk4 => rk4_step(&model, &mut x, &mut v, t, h),
            };
            res.map_err(|e| with_partial(e, &trace))?;
            if x.iter().any(|s| !s.is_finite()) {
                return Err(SimError::Numerical {
                    time: t_next,
                    reason: "non-finite state".into(),
                    partial: Some(Box::new(trace)),
                });
            }
            t = t_next;
        }
        if (n + 1) % config.stride == 0 || n + 1 == n_steps {
            model.record(&x, &v, &mut row);
            trace.push(t1, &row);
        }
    }
    Ok(trace)
}

/// Simulated state trajectory from `snapshot` without events, sampled every
/// `stride` steps. Used for linear-model consistency checks.
pub fn simulate_states(
    snapshot: &SystemSnapshot,
    config: &SimConfig,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), SimError> {
    config.validate()?;
    let model = Model::with_tolerance(snapshot, config.network_solve_tol, config.max_inner_iter)?;
    let mut x = snapshot.states.clone();
    let mut v = snapshot.voltages.clone();
    model.solve_network(&x, &mut v, snapshot.time)?;
    let mut times = vec![snapshot.time];
    let mut states = vec![x.clone()];
    let mut trap = Trapezoid {
        lu: None,
        f_prev: None,
    };
    let n_steps = (config.t_end / config.dt).round() as usize;
    for n in 0..n_steps {
        let t = snapshot.time + n as f64 * config.dt;
        match config.integrator {
            Integrator::Trapezoidal => trap.step(&model, &mut x, &mut v, t, config.dt)?,
            Integrator::Rk4 => rk4_step(&model, &mut x, &mut v, t, config.dt)?,
        }
        if (n + 1) % config.stride == 0 {
            times.push(t + config.dt);
            states.push(x.clone());
        }
    }
    Ok((times, states))
}

/// Equilibrium of the system obtained by applying `actions` to `snapshot`,
/// found by Newton iteration on the state derivative from the current
/// states. Loads stay referred to the original initialization voltages, as
/// in [`simulate`], so the result is the point a post-event trajectory
/// settles to or oscillates about.
pub fn equilibrium_after(snapshot: &SystemSnapshot, actions: &[EventAction]) -> Result<SystemSnapshot, SimError> {
    const MAX_ITER: usize = 30;
    const TOL: f64 = 1e-11;
    let mut snap = snapshot.clone();
    for a in actions {
        apply_event(&mut snap, a)?;
    }
    let model = Model::new(&snap)?;
    let n = snap.states.len();
    let mut x = snap.states.clone();
    let mut v = snap.voltages.clone();
    let mut f = vec![0.0; n];
    for _ in 0..MAX_ITER {
        model.rhs(&x, &mut v, &mut f, snap.time)?;
        let norm = f.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if norm < TOL {
            snap.states = x;
            snap.voltages = v;
            return Ok(snap);
        }
        let j = model.jacobian(&x, &f, &v, snap.time)?;
        let dx = j
            .lu()
            .solve(&DVector::from_column_slice(&f))
            .ok_or_else(|| SimError::Numerical {
                time: snap.time,
                reason: "singular Jacobian in equilibrium search".into(),
                partial: None,
            })?;
        for i in 0..n {
            x[i] -= dx[i];
        }
    }
    Err(SimError::Convergence {
        time: snap.time,
        partial: None,
    })
}
