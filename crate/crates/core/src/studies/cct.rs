use num_complex::Complex64;

use super::{detect_loss_of_sync, DisturbanceClass, LossOfSyncCriterion, StudyError};
use crate::dynsim::{simulate, Event, EventAction, SimConfig, SystemSnapshot};
use crate::powergrid::BusId;

/// Fault applied at `time`, cleared after the probed duration either by
/// removing the shunt or by tripping `trip_branch`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultTemplate {
    pub time: f64,
    pub bus: BusId,
    pub admittance: Complex64,
    pub trip_branch: Option<String>,
}

impl FaultTemplate {
    pub fn events(&self, clearing: f64) -> Vec<Event> {
        let clear = match &self.trip_branch {
            Some(b) => EventAction::ClearFaultAndTrip { branch: b.clone() },
            None => EventAction::ClearFault,
        };
        vec![
            Event::new(
                self.time,
                EventAction::ApplyFault {
                    bus: self.bus,
                    admittance: self.admittance,
                },
            ),
            Event::new(self.time + clearing, clear),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CctOptions {
    /// Final bracket width, s.
    pub tol: f64,
    pub criterion: LossOfSyncCriterion,
    pub sim: SimConfig,
    /// Times the bracket may be widened when an endpoint has the wrong verdict.
    pub max_expansions: usize,
}

impl Default for CctOptions {
    fn default() -> Self {
        CctOptions {
            tol: 0.002,
            criterion: LossOfSyncCriterion::default(),
            sim: SimConfig {
                t_end: 6.0,
                ..SimConfig::default()
            },
            max_expansions: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CctResult {
    /// Midpoint of the final bracket, s.
    pub cct: f64,
    /// (last stable, first unstable) clearing durations, s.
    pub bracket: (f64, f64),
    pub tolerance: f64,
    /// Number of simulations run.
    pub evaluations: usize,
    /// Every probe in order: clearing duration and whether it was stable.
    pub probes: Vec<(f64, bool)>,
}

/// Critical clearing time by bisection on the clearing duration.
///
/// Endpoints are only simulated when the final bracket still touches them,
/// so a bracket whose verdicts are as expected costs one probe per halving
/// plus at most one endpoint check. An endpoint with the wrong verdict
/// moves the bracket outward, up to `max_expansions` times.
pub fn find_cct(
    snap: &SystemSnapshot,
    fault: &FaultTemplate,
    t_lo: f64,
    t_hi: f64,
    opts: &CctOptions,
) -> Result<CctResult, StudyError> {
    if !(t_lo < t_hi) || t_lo < 0.0 {
        return Err(StudyError::DegenerateBracket { lo: t_lo, hi: t_hi });
    }
    if !(opts.tol > 0.0) {
        return Err(StudyError::Invalid("tolerance must be positive".into()));
    }
    let mut probes: Vec<(f64, bool)> = Vec::new();
    let mut probe = |tc: f64| -> Result<bool, StudyError> {
        let trace = simulate(snap, &fault.events(tc), &opts.sim)?;
        let stable = detect_loss_of_sync(&trace, &opts.criterion, DisturbanceClass::Large)?.stable;
        probes.push((tc, stable));
        Ok(stable)
    };

    let (mut lo, mut hi) = (t_lo, t_hi);
    let (mut lo_known, mut hi_known) = (false, false);
    let mut expansions = 0;
    loop {
        while hi - lo > opts.tol {
            let mid = 0.5 * (lo + hi);
            if probe(mid)? {
                lo = mid;
                lo_known = true;
            } else {
                hi = mid;
                hi_known = true;
            }
        }
        let width = t_hi - t_lo;
        if !lo_known && !probe(lo)? {
            if expansions == opts.max_expansions || lo <= 0.0 {
                return Err(StudyError::NoBracket {
                    lo,
                    lo_stable: false,
                    hi: t_hi.max(hi),
                    hi_stable: false,
                });
            }
            expansions += 1;
            hi = lo;
            hi_known = true;
            lo = (lo - width).max(0.0);
            continue;
        }
        lo_known = true;
        if !hi_known && probe(hi)? {
            if expansions == opts.max_expansions {
                return Err(StudyError::NoBracket {
                    lo: t_lo.min(lo),
                    lo_stable: true,
                    hi,
                    hi_stable: true,
                });
            }
            expansions += 1;
            lo = hi;
            hi += width;
            continue;
        }
        break;
    }
    let evaluations = probes.len();
    Ok(CctResult {
        cct: 0.5 * (lo + hi),
        bracket: (lo, hi),
        tolerance: opts.tol,
        evaluations,
        probes,
    })
}
