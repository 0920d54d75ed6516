//! Two-axis synchronous machine with static exciter, three-block PSS and an
//! optional droop governor.
//!
//! The q axis leads the d axis; `delta` is the q-axis angle in the system
//! frame, so a phasor `X` maps to `X e^{-j(δ - π/2)} = x_d + j x_q`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use super::{positive, Device, DeviceError, DeviceOutputs, Technology};
use crate::powergrid::BusId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MachineModel {
    TwoAxis,
    /// Constant EMF behind x'd; electrical and control states frozen.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncMachineParams {
    pub s_rated: f64,
    pub h: f64,
    pub d: f64,
    pub xd: f64,
    pub xq: f64,
    pub xdp: f64,
    pub xqp: f64,
    pub td0p: f64,
    pub tq0p: f64,
    pub ra: f64,
    pub model: MachineModel,
}

impl Default for SyncMachineParams {
    fn default() -> Self {
        SyncMachineParams {
            s_rated: 900.0,
            h: 3.5,
            d: 0.0,
            xd: 1.8,
            xq: 1.7,
            xdp: 0.3,
            xqp: 0.55,
            td0p: 8.0,
            tq0p: 0.4,
            ra: 0.0025,
            model: MachineModel::TwoAxis,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExciterParams {
    pub ka: f64,
    pub ta: f64,
    pub efd_min: f64,
    pub efd_max: f64,
}

impl Default for ExciterParams {
    fn default() -> Self {
        ExciterParams {
            ka: 200.0,
            ta: 0.01,
            efd_min: -5.0,
            efd_max: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PssParams {
    pub enabled: bool,
    pub ks: f64,
    pub tw: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub vs_min: f64,
    pub vs_max: f64,
}

impl Default for PssParams {
    fn default() -> Self {
        PssParams {
            enabled: true,
            ks: 20.0,
            tw: 10.0,
            t1: 0.05,
            t2: 0.02,
            t3: 0.05,
            t4: 0.02,
            vs_min: -0.1,
            vs_max: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorParams {
    pub enabled: bool,
    pub r: f64,
    pub tg: f64,
}

impl Default for GovernorParams {
    fn default() -> Self {
        GovernorParams {
            enabled: false,
            r: 0.05,
            tg: 0.5,
        }
    }
}

/// Setpoints back-solved by initialization.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MachineSetpoints {
    pub v_ref: f64,
    pub p_ref: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SyncMachineState {
    pub delta: f64,
    pub omega: f64,
    pub eqp: f64,
    pub edp: f64,
    pub efd: f64,
    pub pss_washout: f64,
    pub pss_lead1: f64,
    pub pss_lead2: f64,
    pub governor: f64,
}

const LABELS: [&str; 9] = [
    "delta",
    "omega",
    "eqp",
    "edp",
    "efd",
    "pss_washout",
    "pss_lead1",
    "pss_lead2",
    "governor",
];

impl SyncMachineState {
    pub fn from_slice(x: &[f64]) -> Self {
        SyncMachineState {
            delta: x[0],
            omega: x[1],
            eqp: x[2],
            edp: x[3],
            efd: x[4],
            pss_washout: x[5],
            pss_lead1: x[6],
            pss_lead2: x[7],
            governor: x[8],
        }
    }

    pub fn write(&self, x: &mut [f64]) {
        x[..9].copy_from_slice(&[
            self.delta,
            self.omega,
            self.eqp,
            self.edp,
            self.efd,
            self.pss_washout,
            self.pss_lead1,
            self.pss_lead2,
            self.governor,
        ]);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncMachine {
    pub name: String,
    pub bus: BusId,
    pub p_mw: f64,
    pub params: SyncMachineParams,
    pub exciter: ExciterParams,
    pub pss: PssParams,
    pub governor: GovernorParams,
    pub setpoints: MachineSetpoints,
}

fn to_dq(x: Complex64, delta: f64) -> Complex64 {
    x * Complex64::from_polar(1.0, FRAC_PI_2 - delta)
}

fn from_dq(x: Complex64, delta: f64) -> Complex64 {
    x * Complex64::from_polar(1.0, delta - FRAC_PI_2)
}

impl SyncMachine {
    pub fn new(name: &str, bus: BusId, p_mw: f64, params: SyncMachineParams) -> Result<Self, DeviceError> {
        let m = SyncMachine {
            name: name.to_string(),
            bus,
            p_mw,
            params,
            exciter: ExciterParams::default(),
            pss: PssParams::default(),
            governor: GovernorParams::default(),
            setpoints: MachineSetpoints::default(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let p = &self.params;
        let n = self.name.as_str();
        positive(n, "s_rated", p.s_rated)?;
        positive(n, "h", p.h)?;
        positive(n, "xdp", p.xdp)?;
        positive(n, "xqp", p.xqp)?;
        positive(n, "td0p", p.td0p)?;
        positive(n, "tq0p", p.tq0p)?;
        positive(n, "exciter.ta", self.exciter.ta)?;
        positive(n, "pss.tw", self.pss.tw)?;
        positive(n, "pss.t2", self.pss.t2)?;
        positive(n, "pss.t4", self.pss.t4)?;
        positive(n, "governor.tg", self.governor.tg)?;
        positive(n, "governor.r", self.governor.r)?;
        let invalid = |reason: String| {
            Err(DeviceError::InvalidParam {
                device: n.to_string(),
                reason,
            })
        };
        if p.xd < p.xdp || p.xq < p.xqp {
            return invalid("requires xd >= xdp and xq >= xqp".into());
        }
        if p.ra < 0.0 || p.d < 0.0 {
            return invalid("ra and d must be non-negative".into());
        }
        if self.exciter.efd_min >= self.exciter.efd_max {
            return invalid("efd_min must be below efd_max".into());
        }
        if self.pss.vs_min >= self.pss.vs_max {
            return invalid("pss.vs_min must be below pss.vs_max".into());
        }
        Ok(())
    }

    fn xqp_eff(&self) -> f64 {
        match self.params.model {
            MachineModel::TwoAxis => self.params.xqp,
            MachineModel::Classical => self.params.xdp,
        }
    }

    /// Stator currents in the dq frame from the transient EMFs and terminal voltage.
    pub fn stator_currents(&self, s: &SyncMachineState, v: Complex64) -> Complex64 {
        let vdq = to_dq(v, s.delta);
        let (ra, xdp, xqp) = (self.params.ra, self.params.xdp, self.xqp_eff());
        // [ra, -xqp; xdp, ra] [id; iq] = [edp - vd; eqp - vq]
        let rd = s.edp - vdq.re;
        let rq = s.eqp - vdq.im;
        let det = ra * ra + xdp * xqp;
        let id = (ra * rd + xqp * rq) / det;
        let iq = (ra * rq - xdp * rd) / det;
        Complex64::new(id, iq)
    }

    pub fn pss_output(&self, s: &SyncMachineState) -> f64 {
        if !self.pss.enabled {
            return 0.0;
        }
        let (_, _, y2) = self.pss_chain(s);
        y2.clamp(self.pss.vs_min, self.pss.vs_max)
    }

    fn pss_chain(&self, s: &SyncMachineState) -> (f64, f64, f64) {
        let p = &self.pss;
        let u = p.ks * s.omega;
        let yw = u - s.pss_washout;
        let y1 = s.pss_lead1 + p.t1 / p.t2 * (yw - s.pss_lead1);
        let y2 = s.pss_lead2 + p.t3 / p.t4 * (y1 - s.pss_lead2);
        (yw, y1, y2)
    }

    fn mechanical_power(&self, s: &SyncMachineState) -> f64 {
        if self.governor.enabled {
            s.governor
        } else {
            self.setpoints.p_ref
        }
    }
}

/// Numeric parameter names accepted by `set_param`; flags take 0 or 1.
pub const MACHINE_FIELDS: [&str; 27] = [
    "p_mw",
    "s_rated",
    "h",
    "d",
    "xd",
    "xq",
    "xdp",
    "xqp",
    "td0p",
    "tq0p",
    "ra",
    "exciter.ka",
    "exciter.ta",
    "exciter.efd_min",
    "exciter.efd_max",
    "pss.enabled",
    "pss.ks",
    "pss.tw",
    "pss.t1",
    "pss.t2",
    "pss.t3",
    "pss.t4",
    "pss.vs_min",
    "pss.vs_max",
    "governor.enabled",
    "governor.r",
    "governor.tg",
];

/// State derivative of the two-axis machine and its controls.
pub fn sm_derivatives(
    s: &SyncMachineState,
    v_term: Complex64,
    m: &SyncMachine,
    omega_b: f64,
) -> SyncMachineState {
    let p = &m.params;
    let idq = m.stator_currents(s, v_term);
    let vdq = to_dq(v_term, s.delta);
    let (id, iq) = (idq.re, idq.im);
    let pe = (vdq.re + p.ra * id) * id + (vdq.im + p.ra * iq) * iq;
    let pm = m.mechanical_power(s);

    let mut d = SyncMachineState {
        delta: omega_b * s.omega,
        omega: (pm - pe - p.d * s.omega) / (2.0 * p.h),
        ..Default::default()
    };
    if p.model == MachineModel::Classical {
        return d;
    }

    let ex = &m.exciter;
    let efd = s.efd.clamp(ex.efd_min, ex.efd_max);
    d.eqp = (efd - s.eqp - (p.xd - p.xdp) * id) / p.td0p;
    d.edp = (-s.edp + (p.xq - p.xqp) * iq) / p.tq0p;

    let vpss = m.pss_output(s);
    let mut defd = (ex.ka * (m.setpoints.v_ref - v_term.norm() + vpss) - s.efd) / ex.ta;
    if (s.efd >= ex.efd_max && defd > 0.0) || (s.efd <= ex.efd_min && defd < 0.0) {
        defd = 0.0;
    }
    d.efd = defd;

    let pss = &m.pss;
    let (yw, y1, _) = m.pss_chain(s);
    d.pss_washout = (pss.ks * s.omega - s.pss_washout) / pss.tw;
    d.pss_lead1 = (yw - s.pss_lead1) / pss.t2;
    d.pss_lead2 = (y1 - s.pss_lead2) / pss.t4;

    let gov = &m.governor;
    let target = if gov.enabled {
        m.setpoints.p_ref - s.omega / gov.r
    } else {
        m.setpoints.p_ref
    };
    d.governor = (target - s.governor) / gov.tg;
    d
}

impl Device for SyncMachine {
    fn name(&self) -> &str {
        &self.name
    }

    fn bus(&self) -> BusId {
        self.bus
    }

    fn technology(&self) -> Technology {
        Technology::SynchronousMachine
    }

    fn s_rated(&self) -> f64 {
        self.params.s_rated
    }

    fn state_labels(&self) -> &'static [&'static str] {
        &LABELS
    }

    fn dispatch_mw(&self) -> f64 {
        self.p_mw
    }

    fn norton_admittance(&self) -> Complex64 {
        Complex64::new(self.params.ra, self.params.xdp).inv()
    }

    fn current(&self, x: &[f64], v: Complex64) -> Complex64 {
        let s = SyncMachineState::from_slice(x);
        from_dq(self.stator_currents(&s, v), s.delta)
    }

    fn derivatives(&self, x: &[f64], v: Complex64, omega_b: f64, dx: &mut [f64]) {
        let s = SyncMachineState::from_slice(x);
        sm_derivatives(&s, v, self, omega_b).write(dx);
    }

    fn initialize(&mut self, v: Complex64, s: Complex64) -> Result<Vec<f64>, DeviceError> {
        let infeasible = |reason: String| DeviceError::Infeasible {
            device: self.name.clone(),
            reason,
        };
        if s.norm() > 1.0 + 1e-9 {
            return Err(infeasible(format!(
                "dispatch {:.1} MVA exceeds rating {:.1} MVA",
                s.norm() * self.params.s_rated,
                self.params.s_rated
            )));
        }
        if v.norm() < 1e-6 {
            return Err(infeasible("terminal voltage is zero".into()));
        }
        let p = self.params;
        let i = (s / v).conj();
        let xq = match p.model {
            MachineModel::TwoAxis => p.xq,
            MachineModel::Classical => p.xdp,
        };
        let eq_axis = v + Complex64::new(p.ra, xq) * i;
        let delta = eq_axis.arg();
        let idq = to_dq(i, delta);
        let vdq = to_dq(v, delta);
        let (id, iq) = (idq.re, idq.im);
        let edp = vdq.re + p.ra * id - self.xqp_eff() * iq;
        let eqp = vdq.im + p.ra * iq + p.xdp * id;
        let efd = eqp + (p.xd - p.xdp) * id;
        let pe = (vdq.re + p.ra * id) * id + (vdq.im + p.ra * iq) * iq;

        if p.model == MachineModel::TwoAxis
            && (efd > self.exciter.efd_max || efd < self.exciter.efd_min)
        {
            return Err(infeasible(format!(
                "field voltage {efd:.3} pu outside exciter limits"
            )));
        }
        self.setpoints = MachineSetpoints {
            v_ref: v.norm() + efd / self.exciter.ka,
            p_ref: pe,
        };
        let state = SyncMachineState {
            delta,
            omega: 0.0,
            eqp,
            edp,
            efd,
            pss_washout: 0.0,
            pss_lead1: 0.0,
            pss_lead2: 0.0,
            governor: pe,
        };
        let mut x = vec![0.0; 9];
        state.write(&mut x);
        Ok(x)
    }

    fn outputs(&self, x: &[f64], v: Complex64) -> DeviceOutputs {
        let s = SyncMachineState::from_slice(x);
        let i = self.current(x, v);
        let sv = v * i.conj();
        DeviceOutputs {
            angle: s.delta,
            speed: s.omega,
            p: sv.re,
            q: sv.im,
            v: v.norm(),
            i: i.norm(),
        }
    }

    fn param_fields(&self) -> &'static [&'static str] {
        &MACHINE_FIELDS
    }

    fn param(&self, field: &str) -> Option<f64> {
        Some(match field {
            "p_mw" => self.p_mw,
            "s_rated" => self.params.s_rated,
            "h" => self.params.h,
            "d" => self.params.d,
            "xd" => self.params.xd,
            "xq" => self.params.xq,
            "xdp" => self.params.xdp,
            "xqp" => self.params.xqp,
            "td0p" => self.params.td0p,
            "tq0p" => self.params.tq0p,
            "ra" => self.params.ra,
            "exciter.ka" => self.exciter.ka,
            "exciter.ta" => self.exciter.ta,
            "exciter.efd_min" => self.exciter.efd_min,
            "exciter.efd_max" => self.exciter.efd_max,
            "pss.enabled" => f64::from(u8::from(self.pss.enabled)),
            "pss.ks" => self.pss.ks,
            "pss.tw" => self.pss.tw,
            "pss.t1" => self.pss.t1,
            "pss.t2" => self.pss.t2,
            "pss.t3" => self.pss.t3,
            "pss.t4" => self.pss.t4,
            "pss.vs_min" => self.pss.vs_min,
            "pss.vs_max" => self.pss.vs_max,
            "governor.enabled" => f64::from(u8::from(self.governor.enabled)),
            "governor.r" => self.governor.r,
            "governor.tg" => self.governor.tg,
            _ => return None,
        })
    }

    fn set_params(&mut self, fields: &[(&str, f64)]) -> Result<(), DeviceError> {
        let mut next = self.clone();
        let m = &mut next;
        for &(field, value) in fields {
            match field {
                "p_mw" => m.p_mw = value,
                "s_rated" => m.params.s_rated = value,
                "h" => m.params.h = value,
                "d" => m.params.d = value,
                "xd" => m.params.xd = value,
                "xq" => m.params.xq = value,
                "xdp" => m.params.xdp = value,
                "xqp" => m.params.xqp = value,
                "td0p" => m.params.td0p = value,
                "tq0p" => m.params.tq0p = value,
                "ra" => m.params.ra = value,
                "exciter.ka" => m.exciter.ka = value,
                "exciter.ta" => m.exciter.ta = value,
                "exciter.efd_min" => m.exciter.efd_min = value,
                "exciter.efd_max" => m.exciter.efd_max = value,
                "pss.enabled" => m.pss.enabled = value != 0.0,
                "pss.ks" => m.pss.ks = value,
                "pss.tw" => m.pss.tw = value,
                "pss.t1" => m.pss.t1 = value,
                "pss.t2" => m.pss.t2 = value,
                "pss.t3" => m.pss.t3 = value,
                "pss.t4" => m.pss.t4 = value,
                "pss.vs_min" => m.pss.vs_min = value,
                "pss.vs_max" => m.pss.vs_max = value,
                "governor.enabled" => m.governor.enabled = value != 0.0,
                "governor.r" => m.governor.r = value,
                "governor.tg" => m.governor.tg = value,
                _ => {
                    return Err(DeviceError::UnknownParam {
                        device: self.name.clone(),
                        field: field.to_string(),
                    })
                }
            }
        }
        next.validate()?;
        *self = next;
        Ok(())
    }

    fn clone_box(&self) -> Box<dyn Device> {
        Box::new(self.clone())
    }
}
