use std::collections::BTreeSet;

use super::{DisturbanceClass, StabilityVerdict, StudyError};
use crate::devices::Technology;

/// Unified angle-stability label, independent of device technology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProposedLabel {
    AngleStabilitySmallDisturbance,
    AngleStabilityLargeDisturbance,
    None,
}

/// Technology-specific label of the established classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LegacyLabel {
    RotorAngleSmall,
    RotorAngleLarge,
    ConverterDrivenSlow,
}

impl ProposedLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ProposedLabel::AngleStabilitySmallDisturbance => "angle_stability_small_disturbance",
            ProposedLabel::AngleStabilityLargeDisturbance => "angle_stability_large_disturbance",
            ProposedLabel::None => "none",
        }
    }
}

impl LegacyLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            LegacyLabel::RotorAngleSmall => "rotor_angle_small",
            LegacyLabel::RotorAngleLarge => "rotor_angle_large",
            LegacyLabel::ConverterDrivenSlow => "converter_driven_slow",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaxonomyLabel {
    pub proposed: ProposedLabel,
    pub legacy: BTreeSet<LegacyLabel>,
    /// Technology of every violating device.
    pub rationale: Vec<(String, Technology)>,
}

/// Labels an event under both classifications. The proposed label depends
/// only on the disturbance size; the legacy set collects one label per
/// violating device technology.
pub fn classify_event(
    verdict: &StabilityVerdict,
    technologies: &[(String, Technology)],
) -> Result<TaxonomyLabel, StudyError> {
    if verdict.stable {
        return Ok(TaxonomyLabel {
            proposed: ProposedLabel::None,
            legacy: BTreeSet::new(),
            rationale: Vec::new(),
        });
    }
    let small = verdict.disturbance_class == DisturbanceClass::Small;
    let mut legacy = BTreeSet::new();
    let mut rationale = Vec::new();
    for dev in &verdict.violating_devices {
        let tech = technologies
            .iter()
            .find(|(n, _)| n == dev)
            .map(|(_, t)| *t)
            .ok_or_else(|| StudyError::UnknownDevice(dev.clone()))?;
        legacy.insert(match (tech, small) {
            (Technology::SynchronousMachine, true) => LegacyLabel::RotorAngleSmall,
            (Technology::SynchronousMachine, false) => LegacyLabel::RotorAngleLarge,
            (Technology::GfmConverter, _) => LegacyLabel::ConverterDrivenSlow,
        });
        rationale.push((dev.clone(), tech));
    }
    if legacy.is_empty() {
        return Err(StudyError::Invalid("unstable verdict without violating devices".into()));
    }
    Ok(TaxonomyLabel {
        proposed: if small {
            ProposedLabel::AngleStabilitySmallDisturbance
        } else {
            ProposedLabel::AngleStabilityLargeDisturbance
        },
        legacy,
        rationale,
    })
}
