//! Synchronous-reference-frame PLL.
//!
//! The q-axis voltage error `v_q = Im(V e^{-jθ})` drives a PI controller whose
//! output is the frequency correction in rad/s. With unit voltage and small
//! angle error the loop is `ε'' + kp ε' + ki ε = 0`.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllParams {
    pub kp: f64,
    pub ki: f64,
    /// First-order filter on the reported frequency, seconds.
    pub t_filter: f64,
}

impl Default for PllParams {
    fn default() -> Self {
        PllParams {
            kp: 50.0,
            ki: 1000.0,
            t_filter: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PllState {
    /// Estimated angle, radians (system reference frame).
    pub theta: f64,
    /// PI integrator, rad/s.
    pub integrator: f64,
    /// Filtered frequency deviation estimate, pu.
    pub omega: f64,
}

/// q-axis error; zero when the voltage collapses to zero.
pub fn q_error(theta: f64, v_term: Complex64) -> f64 {
    (v_term * Complex64::from_polar(1.0, -theta)).im
}

pub fn pll_derivatives(state: &PllState, v_term: Complex64, params: &PllParams, omega_b: f64) -> PllState {
    let vq = q_error(state.theta, v_term);
    let correction = params.kp * vq + state.integrator;
    PllState {
        theta: correction,
        integrator: params.ki * vq,
        omega: (correction / omega_b - state.omega) / params.t_filter,
    }
}
