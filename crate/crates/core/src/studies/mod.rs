//! Stability studies: loss-of-synchronism verdicts, critical clearing time
//! search, ringdown estimation and event classification.

mod cct;
mod classify;
mod oscillation;
mod verdict;

pub use cct::{find_cct, CctOptions, CctResult, FaultTemplate};
pub use classify::{classify_event, LegacyLabel, ProposedLabel, TaxonomyLabel};
pub use oscillation::{estimate_oscillation, OscillationEstimate};
pub use verdict::{
    assess, assess_small_disturbance, detect_loss_of_sync, disturbance_class, DisturbanceClass,
    LossOfSyncCriterion, StabilityVerdict,
};

use crate::dynsim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("trace has no angle channel for {0}")]
    MissingChannel(String),
    #[error("degenerate bracket [{lo}, {hi}]")]
    DegenerateBracket { lo: f64, hi: f64 },
    #[error("no stability boundary in bracket: {lo:.4} s is {}, {hi:.4} s is {}", verdict_word(*lo_stable), verdict_word(*hi_stable))]
    NoBracket {
        lo: f64,
        lo_stable: bool,
        hi: f64,
        hi_stable: bool,
    },
    #[error("device {0} has no technology tag")]
    UnknownDevice(String),
    #[error("invalid study input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn verdict_word(stable: bool) -> &'static str {
    if stable {
        "stable"
    } else {
        "unstable"
    }
}
