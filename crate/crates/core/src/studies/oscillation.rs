use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rustfft::{num_complex::Complex, FftPlanner};

use super::StudyError;
use crate::dynsim::Trace;

/// Dominant oscillation of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillationEstimate {
    /// Hz; `None` when the segment carries no oscillation.
    pub frequency: Option<f64>,
    /// Exponential envelope rate, 1/s (the real part of the mode).
    pub growth_rate: f64,
    /// Envelope amplitude at the start of the fitted segment, channel units.
    pub amplitude: f64,
    /// Residual norm of the damped-sinusoid fit relative to the signal norm.
    pub fit_residual: f64,
    /// Start of the fitted segment, s.
    pub fit_start: f64,
}

impl OscillationEstimate {
    fn none(fit_start: f64) -> Self {
        OscillationEstimate {
            frequency: None,
            growth_rate: 0.0,
            amplitude: 0.0,
            fit_residual: 0.0,
            fit_start,
        }
    }
}

/// Fraction of the post-disturbance data skipped before fitting.
const SKIP_FRACTION: f64 = 0.2;

/// Ringdown estimate of `channel` after `t_start`. The first fifth of the
/// post-disturbance data is skipped to avoid the nonlinear first swing.
pub fn estimate_oscillation(trace: &Trace, channel: &str, t_start: f64) -> Result<OscillationEstimate, StudyError> {
    let y = trace
        .channel(channel)
        .ok_or_else(|| StudyError::MissingChannel(channel.to_string()))?;
    let k0 = trace.times.iter().position(|&t| t >= t_start).unwrap_or(trace.len());
    let post = trace.len() - k0;
    let k1 = k0 + (post as f64 * SKIP_FRACTION).floor() as usize;
    if trace.len() - k1 < 16 {
        return Err(StudyError::Invalid(format!("too few samples after {t_start} s in {channel}")));
    }
    let t0 = trace.times[k1];
    let t: Vec<f64> = trace.times[k1..].iter().map(|v| v - t0).collect();
    let seg = &y[k1..];
    Ok(fit_segment(&t, seg).map_or(OscillationEstimate::none(t0), |mut e| {
        e.fit_start = t0;
        e
    }))
}

fn fit_segment(t: &[f64], y: &[f64]) -> Option<OscillationEstimate> {
    let n = t.len();
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    let span = t[n - 1] - t[0];
    let d = detrend(t, y);
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let rms = (d.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms <= 1e-9 * scale {
        return None;
    }

    let freq = spectral_peak(&d, dt, 1.5 / span)?;
    let omega0 = 2.0 * PI * freq;
    let sigma0 = envelope_growth(t, &d).unwrap_or_else(|| {
        (-40..=40)
            .map(|k| k as f64 * 0.125)
            .min_by(|a, b| residual(t, y, *a, omega0).0.total_cmp(&residual(t, y, *b, omega0).0))
            .unwrap()
    });

    // refine both by minimizing the damped-sinusoid residual
    let mut sigma = sigma0;
    let mut omega = omega0;
    let mut best = residual(t, y, sigma, omega).0;
    for _ in 0..3 {
        let ws = 0.3 * sigma.abs() + 0.02;
        sigma = golden(|s| residual(t, y, s, omega).0, sigma - ws, sigma + ws);
        let ww = 0.02 * omega;
        omega = golden(|w| residual(t, y, sigma, w).0, omega - ww, omega + ww);
        let r = residual(t, y, sigma, omega).0;
        let done = best - r <= 1e-12 * best;
        best = r;
        if done {
            break;
        }
    }
    let (res, amp) = residual(t, y, sigma, omega);
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    Some(OscillationEstimate {
        frequency: Some(omega / (2.0 * PI)),
        growth_rate: sigma,
        amplitude: amp,
        fit_residual: (res / norm).clamp(0.0, 1.0),
        fit_start: 0.0,
    })
}

/// Removes the least-squares quadratic, which absorbs slow non-oscillatory
/// transients.
fn detrend(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    let tm = t.iter().sum::<f64>() / n as f64;
    let span = (t[n - 1] - t[0]).max(f64::MIN_POSITIVE);
    let basis = DMatrix::from_fn(n, 3, |i, j| ((t[i] - tm) / span).powi(j as i32));
    let rhs = DVector::from_column_slice(y);
    match basis.tr_mul(&basis).cholesky() {
        Some(c) => {
            let coef = c.solve(&basis.tr_mul(&rhs));
            (rhs - basis * coef).iter().copied().collect()
        }
        None => y.to_vec(),
    }
}

/// Frequency of the largest Hann-windowed spectral line above `f_min`,
/// refined by a parabola through the log magnitudes around the peak bin.
fn spectral_peak(d: &[f64], dt: f64, f_min: f64) -> Option<f64> {
    let n = d.len();
    let n_fft = (n.next_power_of_two() * 8).min(1 << 22);
    let mut buf: Vec<Complex<f64>> = d
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos();
            Complex::new(v * w, 0.0)
        })
        .collect();
    buf.resize(n_fft, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    let df = 1.0 / (n_fft as f64 * dt);
    let lo = ((f_min / df).ceil() as usize).max(1);
    let hi = n_fft / 2 - 1;
    if lo + 1 >= hi {
        return None;
    }
    let mag: Vec<f64> = buf[..=hi + 1].iter().map(|c| c.norm()).collect();
    // interior local maxima only; leakage from slow components rises
    // monotonically towards the low-frequency edge
    let k = (lo + 1..hi)
        .filter(|&k| mag[k] > mag[k - 1] && mag[k] >= mag[k + 1])
        .max_by(|&a, &b| mag[a].total_cmp(&mag[b]))?;
    if mag[k] <= 0.0 {
        return None;
    }
    let (a, b, c) = (mag[k - 1].ln(), mag[k].ln(), mag[k + 1].ln());
    let den = a - 2.0 * b + c;
    let delta = if den.abs() > 0.0 { 0.5 * (a - c) / den } else { 0.0 };
    Some((k as f64 + delta.clamp(-0.5, 0.5)) * df)
}

/// Least-squares slope of the log of half-cycle peaks.
fn envelope_growth(t: &[f64], d: &[f64]) -> Option<f64> {
    let mut peaks = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for k in 0..d.len() {
        if k > 0 && (d[k - 1] < 0.0) != (d[k] < 0.0) {
            if let Some(p) = best.take() {
                peaks.push(p);
            }
        }
        if best.is_none_or(|(_, m)| d[k].abs() > m) {
            best = Some((t[k], d[k].abs()));
        }
    }
    // the first and last half cycles are cut by the segment edges
    if peaks.len() < 4 {
        return None;
    }
    let pts: Vec<(f64, f64)> = peaks[1..].iter().filter(|p| p.1 > 0.0).map(|&(t, m)| (t, m.ln())).collect();
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let lm = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let stl: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - lm)).sum();
    (stt > 0.0).then(|| stl / stt)
}

/// Residual norm of the least-squares fit of
/// `e^{σt}(A cos ωt + B sin ωt) + c0 + c1 t + c2 t²`, and the envelope
/// amplitude at `t = 0`.
fn residual(t: &[f64], y: &[f64], sigma: f64, omega: f64) -> (f64, f64) {
    let n = t.len();
    let span = (t[n - 1] - t[0]).max(f64::MIN_POSITIVE);
    let basis = DMatrix::from_fn(n, 5, |i, j| {
        let e = (sigma * t[i]).exp();
        let u = t[i] / span;
        match j {
            0 => e * (omega * t[i]).cos(),
            1 => e * (omega * t[i]).sin(),
            2 => 1.0,
            3 => u,
            _ => u * u,
        }
    });
    let rhs = DVector::from_column_slice(y);
    let gram = basis.tr_mul(&basis);
    let Some(coef) = gram.cholesky().map(|c| c.solve(&basis.tr_mul(&rhs))) else {
        return (f64::INFINITY, 0.0);
    };
    let r = &rhs - &basis * &coef;
    (r.norm(), coef[0].hypot(coef[1]))
}

fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-10 * (1.0 + a.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(f: impl Fn(f64) -> f64, t_end: f64) -> Trace {
        let mut tr = Trace::new(vec!["x".into()], 1);
        let n = (t_end / 1e-3).round() as usize;
        for k in 0..=n {
            let t = k as f64 * 1e-3;
            tr.push(t, &[f(t)]);
        }
        tr
    }

    #[test]
    fn growing_sinusoid() {
        let tr = trace(|t| 0.2 * (0.1 * t).exp() * (2.0 * PI * 0.51 * t + 0.3).sin(), 20.0);
        let e = estimate_oscillation(&tr, "x", 0.0).unwrap();
        let f = e.frequency.unwrap();
        assert!((f - 0.51).abs() < 0.005, "{f}");
        assert!((e.growth_rate - 0.1).abs() < 0.01, "{}", e.growth_rate);
        assert!(e.fit_residual < 1e-3);
        let expected = 0.2 * (0.1 * e.fit_start).exp();
        assert!((e.amplitude - expected).abs() < 1e-3 * expected);
    }

    #[test]
    fn decaying_with_offset_and_trend() {
        let tr = trace(|t| 5.0 + 0.01 * t + (-0.3 * t).exp() * (2.0 * PI * 1.2 * t).cos(), 15.0);
        let e = estimate_oscillation(&tr, "x", 0.0).unwrap();
        assert!((e.frequency.unwrap() - 1.2).abs() < 0.005);
        assert!((e.growth_rate + 0.3).abs() < 0.01);
    }

    #[test]
    fn constant_signal_has_no_oscillation() {
        let e = estimate_oscillation(&trace(|_| 3.0, 10.0), "x", 0.0).unwrap();
        assert_eq!(e.frequency, None);
    }

    #[test]
    fn missing_channel_and_short_segment() {
        let tr = trace(|t| t.sin(), 1.0);
        assert!(matches!(estimate_oscillation(&tr, "y", 0.0), Err(StudyError::MissingChannel(_))));
        assert!(matches!(estimate_oscillation(&tr, "x", 0.995), Err(StudyError::Invalid(_))));
    }
}
