use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use super::{LinearModel, SmallSignalError};
use crate::dynsim::Trace;
use crate::studies::estimate_oscillation;

/// One eigenvalue of the state matrix; complex pairs appear once, with the
/// positive imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub eigenvalue: Complex64,
    /// Damped frequency, Hz.
    pub frequency: f64,
    pub damping_ratio: f64,
    /// Participation magnitude per state, scaled so the largest is 1.
    pub participation: Vec<f64>,
    /// Signed participation `φ_k ψ_k / (ψᵀφ)`, summing to one. Defective
    /// eigenvalues, where `ψᵀφ` vanishes, use `|φ_k||ψ_k|` scaled to unit sum.
    pub participation_complex: Vec<Complex64>,
}

impl Mode {
    pub fn is_oscillatory(&self) -> bool {
        self.frequency > 0.0
    }

    /// Indices of the `k` most participating states, strongest first.
    pub fn top_states(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.participation.len()).collect();
        idx.sort_by(|&a, &b| self.participation[b].total_cmp(&self.participation[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }
}

/// Imaginary parts below this fraction of `max(|λ|, 1)` are treated as
/// zero; defective real eigenvalues split into tiny pairs of about this size.
const REAL_TOL: f64 = 1e-6;

/// All modes sorted by damping ratio, least damped first.
pub fn eigenmodes(model: &LinearModel) -> Result<Vec<Mode>, SmallSignalError> {
    let a = &model.a;
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(SmallSignalError::Numerical("non-finite state matrix".into()));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| SmallSignalError::Numerical("Schur iteration did not converge".into()))?;
    let eig = schur.complex_eigenvalues();

    let ac = a.map(|v| Complex64::new(v, 0.0));
    let at = ac.transpose();
    let mut modes = Vec::new();
    for &lam in eig.iter() {
        let tol = REAL_TOL * lam.norm().max(1.0);
        if lam.im < -tol {
            continue;
        }
        let lam = if lam.im.abs() <= tol { Complex64::new(lam.re, 0.0) } else { lam };
        let phi = inverse_iteration(&ac, lam)?;
        let psi = inverse_iteration(&at, lam)?;
        let s: Complex64 = phi.iter().zip(psi.iter()).map(|(p, q)| p * q).sum();
        let defective = s.norm() < 1e-8 * phi.norm() * psi.norm();
        let signed: Vec<Complex64> = if defective {
            let mags: Vec<f64> = phi.iter().zip(psi.iter()).map(|(p, q)| p.norm() * q.norm()).collect();
            let total: f64 = mags.iter().sum();
            mags.iter()
                .map(|m| Complex64::new(if total > 0.0 { m / total } else { 0.0 }, 0.0))
                .collect()
        } else {
            phi.iter().zip(psi.iter()).map(|(p, q)| p * q / s).collect()
        };
        let peak = signed.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let participation = signed.iter().map(|p| if peak > 0.0 { p.norm() / peak } else { 0.0 }).collect();
        let mag = lam.norm();
        modes.push(Mode {
            eigenvalue: lam,
            frequency: lam.im / (2.0 * std::f64::consts::PI),
            damping_ratio: if mag > 0.0 { -lam.re / mag } else { 0.0 },
            participation,
            participation_complex: signed,
        });
    }
    modes.sort_by(|x, y| {
        x.damping_ratio
            .total_cmp(&y.damping_ratio)
            .then(y.frequency.total_cmp(&x.frequency))
            .then(x.eigenvalue.re.total_cmp(&y.eigenvalue.re))
    });
    Ok(modes)
}

/// Eigenvector of `m` for eigenvalue `lam` by shifted inverse iteration.
fn inverse_iteration(m: &DMatrix<Complex64>, lam: Complex64) -> Result<DVector<Complex64>, SmallSignalError> {
    let n = m.nrows();
    let scale = lam.norm().max(1.0);
    let mut shift = 1e-10 * scale;
    for _ in 0..6 {
        let mu = lam + Complex64::new(shift, shift);
        let mut b = m.clone();
        for i in 0..n {
            b[(i, i)] -= mu;
        }
        let lu = b.lu();
        let mut x = DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.1 * i as f64, 0.05 * (i % 3) as f64));
        let mut ok = true;
        for _ in 0..4 {
            match lu.solve(&x) {
                Some(y) if y.iter().all(|v| v.re.is_finite() && v.im.is_finite()) => {
                    let nrm = y.norm();
                    if nrm == 0.0 {
                        ok = false;
                        break;
                    }
                    x = y / Complex64::new(nrm, 0.0);
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(x);
        }
        shift *= 100.0;
    }
    Err(SmallSignalError::Numerical(format!("no eigenvector found for {lam}")))
}

/// Least-damped mode with a non-zero frequency.
pub fn least_damped(modes: &[Mode]) -> Option<&Mode> {
    modes.iter().find(|m| m.is_oscillatory())
}

/// Agreement between the least-damped mode and a ringdown fit.
#[derive(Debug, Clone, PartialEq)]
pub enum ConsistencyReport {
    Conclusive {
        /// Relative frequency error.
        freq_error: f64,
        /// Relative error of the growth rate against Re(λ).
        growth_error: f64,
        mode_frequency: f64,
        mode_growth: f64,
        trace_frequency: f64,
        trace_growth: f64,
    },
    Inconclusive(String),
}

/// Compares the least-damped oscillatory mode with the oscillation found in
/// `channel` after the first departure from its initial value.
pub fn mode_time_consistency(
    model: &LinearModel,
    trace: &Trace,
    channel: &str,
) -> Result<ConsistencyReport, SmallSignalError> {
    let modes = eigenmodes(model)?;
    let Some(mode) = least_damped(&modes) else {
        return Ok(ConsistencyReport::Inconclusive("no oscillatory mode".into()));
    };
    let Some(y) = trace.channel(channel) else {
        return Ok(ConsistencyReport::Inconclusive(format!("no channel {channel}")));
    };
    let Some(first) = y.first() else {
        return Ok(ConsistencyReport::Inconclusive("empty trace".into()));
    };
    let Some(k0) = y.iter().position(|v| (v - first).abs() > 1e-9 * first.abs().max(1.0)) else {
        return Ok(ConsistencyReport::Inconclusive("channel never leaves its initial value".into()));
    };
    let t_start = trace.times[k0.saturating_sub(1)];
    let est = match estimate_oscillation(trace, channel, t_start) {
        Ok(e) => e,
        Err(e) => return Ok(ConsistencyReport::Inconclusive(e.to_string())),
    };
    let Some(f) = est.frequency else {
        return Ok(ConsistencyReport::Inconclusive("no ringdown detected".into()));
    };
    let sigma = mode.eigenvalue.re;
    Ok(ConsistencyReport::Conclusive {
        freq_error: (f - mode.frequency).abs() / mode.frequency,
        growth_error: (est.growth_rate - sigma).abs() / sigma.abs().max(f64::MIN_POSITIVE),
        mode_frequency: mode.frequency,
        mode_growth: sigma,
        trace_frequency: f,
        trace_growth: est.growth_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(a: DMatrix<f64>) -> LinearModel {
        let n = a.nrows();
        LinearModel {
            a,
            state_labels: (0..n).map(|i| format!("x{i}")).collect(),
            equilibrium: crate::smallsignal::tests_support::dummy_snapshot(),
        }
    }

    #[test]
    fn second_order_closed_form() {
        let wn = 2.0 * std::f64::consts::PI * 0.51;
        let z = 0.05;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -wn * wn, -2.0 * z * wn]);
        let modes = eigenmodes(&model(a)).unwrap();
        assert_eq!(modes.len(), 1);
        let m = &modes[0];
        assert!((m.frequency - 0.51 * (1.0 - z * z).sqrt()).abs() < 1e-9);
        assert!((m.damping_ratio - z).abs() < 1e-9);
        let sum: Complex64 = m.participation_complex.iter().sum();
        assert!((sum - 1.0).norm() < 1e-8);
    }

    #[test]
    fn zero_matrix_has_no_oscillation() {
        let modes = eigenmodes(&model(DMatrix::zeros(3, 3))).unwrap();
        assert_eq!(modes.len(), 3);
        assert!(modes.iter().all(|m| m.eigenvalue.norm() == 0.0 && !m.is_oscillatory()));
        assert!(least_damped(&modes).is_none());
    }

    #[test]
    fn diagonal_participation_is_unit() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0, -3.0]));
        let modes = eigenmodes(&model(a)).unwrap();
        for m in &modes {
            let k = m.top_states(1)[0];
            assert_eq!(m.participation[k], 1.0);
            assert!(m.participation.iter().enumerate().all(|(i, p)| i == k || *p < 1e-9));
            assert!((m.eigenvalue.re + (k + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn defective_block_still_reports() {
        let a = DMatrix::from_row_slice(2, 2, &[-50.0, 50.0, 0.0, -50.0]);
        let modes = eigenmodes(&model(a)).unwrap();
        assert!(!modes.is_empty());
        for m in &modes {
            assert!((m.eigenvalue.re + 50.0).abs() < 1e-3);
            assert!(!m.is_oscillatory());
            assert!(m.participation.iter().all(|p| p.is_finite()));
        }
    }
}
