use super::{estimate_oscillation, StudyError};
use crate::dynsim::{Event, EventAction, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisturbanceClass {
    Small,
    Large,
}

impl DisturbanceClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DisturbanceClass::Small => "small",
            DisturbanceClass::Large => "large",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub first_violation_time: Option<f64>,
    pub violating_devices: Vec<String>,
    pub disturbance_class: DisturbanceClass,
}

impl StabilityVerdict {
    fn stable(class: DisturbanceClass) -> Self {
        StabilityVerdict {
            stable: true,
            first_violation_time: None,
            violating_devices: Vec::new(),
            disturbance_class: class,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossOfSyncCriterion {
    /// Largest allowed excursion from the initial angle, degrees.
    pub angle_threshold: f64,
    /// Duration of one-directional slipping treated as lost synchronism, s.
    pub window: f64,
    /// Slip speeds below this are not counted as slipping, degrees/s.
    pub min_slip_rate: f64,
    /// Ringdown growth rates above this mark a small-disturbance event
    /// unstable, 1/s.
    pub growth_threshold: f64,
}

impl Default for LossOfSyncCriterion {
    fn default() -> Self {
        LossOfSyncCriterion {
            angle_threshold: 180.0,
            window: 2.0,
            min_slip_rate: 10.0,
            growth_threshold: 1e-3,
        }
    }
}

/// Faults and branch trips are large disturbances; load and parameter
/// changes are small.
pub fn disturbance_class(events: &[Event]) -> DisturbanceClass {
    let large = events.iter().any(|e| {
        matches!(
            e.action,
            EventAction::ApplyFault { .. } | EventAction::ClearFaultAndTrip { .. } | EventAction::TripBranch { .. }
        )
    });
    if large {
        DisturbanceClass::Large
    } else {
        DisturbanceClass::Small
    }
}

fn angle_channels(trace: &Trace) -> Result<Vec<(String, &[f64])>, StudyError> {
    let out: Vec<_> = trace
        .channels
        .iter()
        .filter_map(|c| c.name.strip_suffix(".angle").map(|d| (d.to_string(), c.values.as_slice())))
        .collect();
    if out.is_empty() {
        return Err(StudyError::MissingChannel("any device".into()));
    }
    Ok(out)
}

/// First time the angle leaves the band `initial ± threshold`, interpolated
/// between samples.
fn excursion_time(times: &[f64], a: &[f64], threshold: f64) -> Option<f64> {
    let a0 = a[0];
    for k in 1..a.len() {
        let d1 = (a[k] - a0).abs();
        if d1 >= threshold {
            let d0 = (a[k - 1] - a0).abs();
            if d0 >= threshold || d1 == d0 {
                return Some(times[k]);
            }
            let w = (threshold - d0) / (d1 - d0);
            return Some(times[k - 1] + w.clamp(0.0, 1.0) * (times[k] - times[k - 1]));
        }
    }
    None
}

/// End of the first run of one-directional slipping longer than `window`.
fn slip_time(times: &[f64], a: &[f64], window: f64, min_rate: f64) -> Option<f64> {
    let mut start: Option<(usize, f64)> = None;
    for k in 1..a.len() {
        let dt = times[k] - times[k - 1];
        if dt <= 0.0 {
            continue;
        }
        let rate = (a[k] - a[k - 1]) / dt;
        let dir = if rate >= min_rate {
            1.0
        } else if rate <= -min_rate {
            -1.0
        } else {
            0.0
        };
        match start {
            Some((k0, d)) if d == dir => {
                if times[k] - times[k0] > window {
                    return Some(times[k]);
                }
            }
            _ => start = if dir != 0.0 { Some((k - 1, dir)) } else { None },
        }
    }
    None
}

/// Loss-of-synchronism test on every `<device>.angle` channel.
pub fn detect_loss_of_sync(
    trace: &Trace,
    criterion: &LossOfSyncCriterion,
    class: DisturbanceClass,
) -> Result<StabilityVerdict, StudyError> {
    let channels = angle_channels(trace)?;
    if trace.is_empty() {
        return Ok(StabilityVerdict::stable(class));
    }
    let mut first: Option<f64> = None;
    let mut devices = Vec::new();
    for (name, a) in channels {
        let hit = [
            excursion_time(&trace.times, a, criterion.angle_threshold),
            slip_time(&trace.times, a, criterion.window, criterion.min_slip_rate),
        ]
        .into_iter()
        .flatten()
        .reduce(f64::min);
        if let Some(t) = hit {
            first = Some(first.map_or(t, |f| f.min(t)));
            devices.push(name);
        }
    }
    Ok(match first {
        None => StabilityVerdict::stable(class),
        Some(t) => StabilityVerdict {
            stable: false,
            first_violation_time: Some(t),
            violating_devices: devices,
            disturbance_class: class,
        },
    })
}

/// Small-disturbance verdict: loss of synchronism as above, or a growing
/// oscillation on any angle channel after `t_disturbance`.
pub fn assess_small_disturbance(
    trace: &Trace,
    t_disturbance: f64,
    criterion: &LossOfSyncCriterion,
) -> Result<StabilityVerdict, StudyError> {
    let verdict = detect_loss_of_sync(trace, criterion, DisturbanceClass::Small)?;
    if !verdict.stable {
        return Ok(verdict);
    }
    let mut first: Option<f64> = None;
    let mut devices = Vec::new();
    for (name, a) in angle_channels(trace)? {
        let est = estimate_oscillation(trace, &format!("{name}.angle"), t_disturbance)?;
        if est.frequency.is_none() || est.growth_rate <= criterion.growth_threshold {
            continue;
        }
        // report the first time the deviation exceeds its early envelope
        let start = trace.times.iter().position(|&t| t >= t_disturbance).unwrap_or(0);
        let a0 = a[start.saturating_sub(1)];
        let period = 1.0 / est.frequency.unwrap_or(1.0);
        let early_end = trace.times.iter().position(|&t| t > t_disturbance + period).unwrap_or(a.len());
        let early = a[start..early_end].iter().map(|v| (v - a0).abs()).fold(0.0, f64::max);
        let t = (early_end..a.len())
            .find(|&k| (a[k] - a0).abs() > early)
            .map(|k| trace.times[k])
            .unwrap_or(*trace.times.last().unwrap());
        first = Some(first.map_or(t, |f| f.min(t)));
        devices.push(name);
    }
    Ok(match first {
        None => verdict,
        Some(t) => StabilityVerdict {
            stable: false,
            first_violation_time: Some(t),
            violating_devices: devices,
            disturbance_class: DisturbanceClass::Small,
        },
    })
}

/// Verdict for a simulated event list: large disturbances use the angle
/// criterion, small ones add the ringdown growth test.
pub fn assess(trace: &Trace, events: &[Event], criterion: &LossOfSyncCriterion) -> Result<StabilityVerdict, StudyError> {
    match disturbance_class(events) {
        DisturbanceClass::Large => detect_loss_of_sync(trace, criterion, DisturbanceClass::Large),
        DisturbanceClass::Small => {
            let t0 = events.first().map_or(trace.times.first().copied().unwrap_or(0.0), |e| e.time);
            assess_small_disturbance(trace, t0, criterion)
        }
    }
}
