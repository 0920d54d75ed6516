//! Grid-forming converter with virtual-synchronous-machine control.
//!
//! The modulated voltage `E∠θ` sits behind the coupling reactance `x_c`. The
//! current reference `(E∠θ - V) / (j x_c)` is saturated by the CSA limiter and
//! tracked by a first-order current loop. The swing emulation is damped
//! against the PLL frequency estimate at the terminal.

use num_complex::Complex64;

use super::limiter::csa_limit;
use super::pll::{pll_derivatives, PllParams, PllState};
use super::{positive, Device, DeviceError, DeviceOutputs, Technology};
use crate::powergrid::BusId;

/// Frequency the VSM damping term acts against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingReference {
    /// PLL estimate at the connection point.
    Pll,
    /// Nominal frequency (Δω = 0).
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfmVsmParams {
    pub s_rated: f64,
    /// Virtual mechanical time constant (2H), seconds.
    pub ta_vsm: f64,
    pub d_gfm: f64,
    pub x_c: f64,
    pub i_max: f64,
    /// Voltage-loop surrogate time constant, seconds.
    pub t_voltage: f64,
    /// Current-loop surrogate time constant, seconds.
    pub t_current: f64,
    pub pll: PllParams,
    pub damping_reference: DampingReference,
}

impl Default for GfmVsmParams {
    fn default() -> Self {
        GfmVsmParams {
            s_rated: 900.0,
            ta_vsm: 10.0,
            d_gfm: 193.0,
            x_c: 0.15,
            i_max: 1.2,
            t_voltage: 0.01,
            t_current: 0.005,
            pll: PllParams::default(),
            damping_reference: DampingReference::Pll,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GfmSetpoints {
    pub p_ref: f64,
    /// Modulated-voltage magnitude reference, pu.
    pub e_ref: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GfmVsmState {
    pub theta_vsm: f64,
    pub omega_vsm: f64,
    pub pll: PllState,
    pub e_mag: f64,
    /// Current delivered by the current loop, system frame.
    pub current: Complex64,
    /// Diagnostic: the current reference is saturated. Not integrated.
    pub limiter_active: bool,
}

const LABELS: [&str; 8] = [
    "theta_vsm",
    "omega_vsm",
    "pll_theta",
    "pll_integrator",
    "pll_omega",
    "e_mag",
    "i_re",
    "i_im",
];

impl GfmVsmState {
    pub fn from_slice(x: &[f64]) -> Self {
        GfmVsmState {
            theta_vsm: x[0],
            omega_vsm: x[1],
            pll: PllState {
                theta: x[2],
                integrator: x[3],
                omega: x[4],
            },
            e_mag: x[5],
            current: Complex64::new(x[6], x[7]),
            limiter_active: false,
        }
    }

    pub fn write(&self, x: &mut [f64]) {
        x[..8].copy_from_slice(&[
            self.theta_vsm,
            self.omega_vsm,
            self.pll.theta,
            self.pll.integrator,
            self.pll.omega,
            self.e_mag,
            self.current.re,
            self.current.im,
        ]);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GfmVsm {
    pub name: String,
    pub bus: BusId,
    pub p_mw: f64,
    pub params: GfmVsmParams,
    pub setpoints: GfmSetpoints,
}

impl GfmVsm {
    pub fn new(name: &str, bus: BusId, p_mw: f64, params: GfmVsmParams) -> Result<Self, DeviceError> {
        let g = GfmVsm {
            name: name.to_string(),
            bus,
            p_mw,
            params,
            setpoints: GfmSetpoints::default(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let p = &self.params;
        let n = self.name.as_str();
        positive(n, "s_rated", p.s_rated)?;
        positive(n, "ta_vsm", p.ta_vsm)?;
        positive(n, "x_c", p.x_c)?;
        positive(n, "i_max", p.i_max)?;
        positive(n, "t_voltage", p.t_voltage)?;
        positive(n, "t_current", p.t_current)?;
        positive(n, "pll.t_filter", p.pll.t_filter)?;
        if !(p.d_gfm >= 0.0) {
            return Err(DeviceError::InvalidParam {
                device: n.to_string(),
                reason: "d_gfm must be non-negative".into(),
            });
        }
        Ok(())
    }

    /// Saturated current reference and limiter flag.
    pub fn current_reference(&self, s: &GfmVsmState, v: Complex64) -> (Complex64, bool) {
        let e = Complex64::from_polar(s.e_mag, s.theta_vsm);
        let unlimited = (e - v) / Complex64::new(0.0, self.params.x_c);
        csa_limit(unlimited, self.params.i_max)
    }

    /// Current injected at the terminal. The output clamp only matters if the
    /// integrated current overshoots the limit by round-off.
    pub fn injected_current(&self, s: &GfmVsmState) -> Complex64 {
        csa_limit(s.current, self.params.i_max).0
    }
}

/// State derivative of the VSM converter. `p_meas` is the measured terminal
/// active power on the device base.
pub fn gfm_vsm_derivatives(
    s: &GfmVsmState,
    v_term: Complex64,
    p_meas: f64,
    g: &GfmVsm,
    omega_b: f64,
) -> GfmVsmState {
    let p = &g.params;
    let omega_ref = match p.damping_reference {
        DampingReference::Pll => s.pll.omega,
        DampingReference::Nominal => 0.0,
    };
    let domega =
        (g.setpoints.p_ref - p_meas - p.d_gfm * (s.omega_vsm - omega_ref)) / p.ta_vsm;
    let pll = pll_derivatives(&s.pll, v_term, &p.pll, omega_b);
    let (i_ref, limited) = g.current_reference(s, v_term);
    GfmVsmState {
        theta_vsm: omega_b * s.omega_vsm,
        omega_vsm: domega,
        pll,
        e_mag: (g.setpoints.e_ref - s.e_mag) / p.t_voltage,
        current: (i_ref - s.current) / p.t_current,
        limiter_active: limited,
    }
}

/// Numeric parameter names accepted by `set_param`.
pub const GFM_FIELDS: [&str; 11] = [
    "p_mw",
    "s_rated",
    "ta_vsm",
    "d_gfm",
    "x_c",
    "i_max",
    "t_voltage",
    "t_current",
    "pll.kp",
    "pll.ki",
    "pll.t_filter",
];

impl Device for GfmVsm {
    fn name(&self) -> &str {
        &self.name
    }

    fn bus(&self) -> BusId {
        self.bus
    }

    fn technology(&self) -> Technology {
        Technology::GfmConverter
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
        Complex64::new(0.0, 0.0)
    }

    fn current(&self, x: &[f64], _v: Complex64) -> Complex64 {
        self.injected_current(&GfmVsmState::from_slice(x))
    }

    fn derivatives(&self, x: &[f64], v: Complex64, omega_b: f64, dx: &mut [f64]) {
        let s = GfmVsmState::from_slice(x);
        let p_meas = (v * self.injected_current(&s).conj()).re;
        gfm_vsm_derivatives(&s, v, p_meas, self, omega_b).write(dx);
    }

    fn initialize(&mut self, v: Complex64, s: Complex64) -> Result<Vec<f64>, DeviceError> {
        if v.norm() < 1e-6 {
            return Err(DeviceError::Infeasible {
                device: self.name.clone(),
                reason: "terminal voltage is zero".into(),
            });
        }
        let i = (s / v).conj();
        if i.norm() > self.params.i_max {
            return Err(DeviceError::Infeasible {
                device: self.name.clone(),
                reason: format!(
                    "initial current {:.3} pu exceeds i_max {:.3} pu",
                    i.norm(),
                    self.params.i_max
                ),
            });
        }
        let e = v + Complex64::new(0.0, self.params.x_c) * i;
        self.setpoints = GfmSetpoints {
            p_ref: s.re,
            e_ref: e.norm(),
        };
        let state = GfmVsmState {
            theta_vsm: e.arg(),
            omega_vsm: 0.0,
            pll: PllState {
                theta: v.arg(),
                integrator: 0.0,
                omega: 0.0,
            },
            e_mag: e.norm(),
            current: i,
            limiter_active: false,
        };
        let mut x = vec![0.0; 8];
        state.write(&mut x);
        Ok(x)
    }

    fn outputs(&self, x: &[f64], v: Complex64) -> DeviceOutputs {
        let s = GfmVsmState::from_slice(x);
        let i = self.injected_current(&s);
        let sv = v * i.conj();
        DeviceOutputs {
            angle: s.theta_vsm,
            speed: s.omega_vsm,
            p: sv.re,
            q: sv.im,
            v: v.norm(),
            i: i.norm(),
        }
    }

    fn param_fields(&self) -> &'static [&'static str] {
        &GFM_FIELDS
    }

    fn param(&self, field: &str) -> Option<f64> {
        Some(match field {
            "p_mw" => self.p_mw,
            "s_rated" => self.params.s_rated,
            "ta_vsm" => self.params.ta_vsm,
            "d_gfm" => self.params.d_gfm,
            "x_c" => self.params.x_c,
            "i_max" => self.params.i_max,
            "t_voltage" => self.params.t_voltage,
            "t_current" => self.params.t_current,
            "pll.kp" => self.params.pll.kp,
            "pll.ki" => self.params.pll.ki,
            "pll.t_filter" => self.params.pll.t_filter,
            _ => return None,
        })
    }

    fn set_params(&mut self, fields: &[(&str, f64)]) -> Result<(), DeviceError> {
        let mut next = self.clone();
        for &(field, value) in fields {
            match field {
                "p_mw" => next.p_mw = value,
                "s_rated" => next.params.s_rated = value,
                "ta_vsm" => next.params.ta_vsm = value,
                "d_gfm" => next.params.d_gfm = value,
                "x_c" => next.params.x_c = value,
                "i_max" => next.params.i_max = value,
                "t_voltage" => next.params.t_voltage = value,
                "t_current" => next.params.t_current = value,
                "pll.kp" => next.params.pll.kp = value,
                "pll.ki" => next.params.pll.ki = value,
                "pll.t_filter" => next.params.pll.t_filter = value,
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

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const WB: f64 = 2.0 * PI * 50.0;

    fn converter() -> GfmVsm {
        GfmVsm::new("GFM-VSC-2", 2, 600.0, GfmVsmParams::default()).unwrap()
    }

    #[test]
    fn initialized_converter_is_at_equilibrium() {
        let mut g = converter();
        let v = Complex64::from_polar(1.01, 0.25);
        let s = Complex64::new(600.0 / 900.0, -0.05);
        let x = g.initialize(v, s).unwrap();
        let mut dx = [0.0; 8];
        g.derivatives(&x, v, WB, &mut dx);
        assert!(dx.iter().all(|d| d.abs() < 1e-12), "{dx:?}");
        assert!((v * g.current(&x, v).conj() - s).norm() < 1e-12);
        let st = gfm_vsm_derivatives(&GfmVsmState::from_slice(&x), v, s.re, &g, WB);
        assert!(!st.limiter_active);
    }

    #[test]
    fn balanced_swing_has_no_acceleration() {
        let g = GfmVsm {
            setpoints: GfmSetpoints {
                p_ref: 0.6,
                e_ref: 1.0,
            },
            ..converter()
        };
        let mut s = GfmVsmState {
            e_mag: 1.0,
            ..Default::default()
        };
        s.omega_vsm = 0.004;
        s.pll.omega = 0.004;
        let d = gfm_vsm_derivatives(&s, Complex64::new(1.0, 0.0), 0.6, &g, WB);
        assert_eq!(d.omega_vsm, 0.0);
    }

    #[test]
    fn damping_term_arithmetic() {
        let mut g = converter();
        g.setpoints.p_ref = 0.6;
        let s = GfmVsmState {
            omega_vsm: 0.01,
            e_mag: 1.0,
            ..Default::default()
        };
        let d = gfm_vsm_derivatives(&s, Complex64::new(1.0, 0.0), 0.6, &g, WB);
        assert!((d.omega_vsm + 0.193).abs() < 1e-12);

        g.params.d_gfm = 20.0;
        let d20 = gfm_vsm_derivatives(&s, Complex64::new(1.0, 0.0), 0.6, &g, WB);
        assert!((d20.omega_vsm / d.omega_vsm - 20.0 / 193.0).abs() < 1e-12);
    }

    #[test]
    fn limiter_binds_on_collapsed_voltage() {
        let mut g = converter();
        let v = Complex64::from_polar(1.0, 0.2);
        let x = g.initialize(v, Complex64::new(0.6, 0.0)).unwrap();
        let s = GfmVsmState::from_slice(&x);
        let (iref, active) = g.current_reference(&s, Complex64::new(0.0, 0.0));
        assert!(active);
        assert!((iref.norm() - g.params.i_max).abs() < 1e-12);
    }

    #[test]
    fn overloaded_dispatch_rejected() {
        let mut g = converter();
        let err = g
            .initialize(Complex64::new(1.0, 0.0), Complex64::new(1.5, 0.0))
            .unwrap_err();
        assert!(matches!(err, DeviceError::Infeasible { .. }));
    }
}
