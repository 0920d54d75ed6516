mod common;

use anglestab::cli::Scenario;
use anglestab::dynsim::simulate;
use anglestab::smallsignal::{eigenmodes, least_damped, linearize};
use anglestab::studies::{
    assess, classify_event, detect_loss_of_sync, find_cct, CctOptions, DisturbanceClass, LegacyLabel, LossOfSyncCriterion,
    ProposedLabel, StudyError,
};
use proptest::prelude::*;

fn cct(sc: &Scenario, lo: f64, hi: f64) -> f64 {
    let snap = common::snapshot(sc);
    let opts = CctOptions {
        sim: sc.sim_config(),
        criterion: sc.criterion(),
        ..CctOptions::default()
    };
    find_cct(&snap, sc.study.fault.as_ref().unwrap(), lo, hi, &opts).unwrap().cct
}

fn least_damping(sc: &Scenario) -> f64 {
    let modes = eigenmodes(&linearize(&common::snapshot(sc), 1e-6).unwrap()).unwrap();
    least_damped(&modes).unwrap().damping_ratio
}

#[test]
fn canonical_cct_lies_between_the_two_fault_cases() {
    let sc = common::scenario("canonical.scn");
    let snap = common::snapshot(&sc);
    let opts = CctOptions {
        sim: sc.sim_config(),
        criterion: sc.criterion(),
        ..CctOptions::default()
    };
    let fault = sc.study.fault.clone().unwrap();
    let r = find_cct(&snap, &fault, 0.15, 0.20, &opts).unwrap();
    assert!(r.cct > 0.15 && r.cct < 0.20);
    assert!(r.bracket.1 - r.bracket.0 <= opts.tol);
    assert!(r.evaluations <= 6, "{} evaluations", r.evaluations);
    // post-hoc check on both sides of the reported value
    for (tc, expect_stable) in [(r.cct - opts.tol, true), (r.cct + opts.tol, false)] {
        let tr = simulate(&snap, &fault.events(tc), &opts.sim).unwrap();
        let v = assess(&tr, &fault.events(tc), &opts.criterion).unwrap();
        assert_eq!(v.stable, expect_stable, "clearing {tc}");
    }
}

#[test]
fn cct_does_not_grow_with_dispatch() {
    let mut last = f64::INFINITY;
    for p in [600.0, 650.0, 700.0] {
        let mut sc = common::scenario("canonical.scn");
        sc.set_path("generators.p_mw", p).unwrap();
        let c = cct(&sc, 0.15, 0.20);
        assert!(c <= last + 1e-9, "CCT {c} at {p} MW exceeds {last}");
        last = c;
    }
}

#[test]
fn damping_grows_with_converter_damping_gain() {
    let mut last = f64::NEG_INFINITY;
    for d in [20.0, 100.0, 193.0] {
        let mut sc = common::scenario("caseB_loadstep.scn");
        sc.set_path("gfm.d_gfm", d).unwrap();
        let z = least_damping(&sc);
        assert!(z >= last, "damping {z} at D = {d} below {last}");
        last = z;
    }
}

#[test]
fn stabilizer_improves_case_b() {
    let sc = common::scenario("caseB_loadstep.scn");
    let mut with_pss = sc.clone();
    with_pss.set_path("machine.pss.enabled", 1.0).unwrap();
    assert!(least_damping(&with_pss) > least_damping(&sc));
}

#[test]
fn fault_at_200ms_classifies_as_two_phenomena() {
    let sc = common::scenario("fault1_200ms.scn");
    let snap = common::snapshot(&sc);
    let tr = simulate(&snap, &sc.events, &sc.sim_config()).unwrap();
    let v = assess(&tr, &sc.events, &sc.criterion()).unwrap();
    assert!(!v.stable);
    assert_eq!(v.disturbance_class, DisturbanceClass::Large);
    assert!(v.violating_devices.contains(&"SM-1".to_string()));
    assert!(v.violating_devices.contains(&"GFM-VSC-2".to_string()));
    let t = v.first_violation_time.unwrap();
    assert!(t >= tr.times[0] && t <= *tr.times.last().unwrap());
    let label = classify_event(&v, &snap.device_technologies()).unwrap();
    assert_eq!(label.proposed, ProposedLabel::AngleStabilityLargeDisturbance);
    assert!(label.legacy.contains(&LegacyLabel::RotorAngleLarge));
    assert!(label.legacy.contains(&LegacyLabel::ConverterDrivenSlow));
}

#[test]
fn stable_fault_gets_no_label() {
    let sc = common::scenario("fault1_150ms.scn");
    let snap = common::snapshot(&sc);
    let tr = simulate(&snap, &sc.events, &sc.sim_config()).unwrap();
    let v = assess(&tr, &sc.events, &sc.criterion()).unwrap();
    assert!(v.stable);
    let label = classify_event(&v, &snap.device_technologies()).unwrap();
    assert_eq!(label.proposed, ProposedLabel::None);
    assert!(label.legacy.is_empty());
}

#[test]
fn swapped_bracket_is_reported() {
    let sc = common::scenario("canonical.scn");
    let snap = common::snapshot(&sc);
    let opts = CctOptions {
        sim: sc.sim_config(),
        criterion: sc.criterion(),
        max_expansions: 0,
        ..CctOptions::default()
    };
    let fault = sc.study.fault.clone().unwrap();
    assert!(matches!(
        find_cct(&snap, &fault, 0.05, 0.10, &opts),
        Err(StudyError::NoBracket { .. })
    ));
    assert!(matches!(
        find_cct(&snap, &fault, 0.1, 0.1, &opts),
        Err(StudyError::DegenerateBracket { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Raising the angle threshold never makes a verdict less stable or a
    /// violation earlier.
    #[test]
    fn threshold_is_monotone(lo in 60.0f64..200.0, extra in 0.0f64..150.0) {
        let sc = common::scenario("fault1_200ms.scn");
        let snap = common::snapshot(&sc);
        let tr = simulate(&snap, &sc.events, &sc.sim_config()).unwrap();
        let crit = |a: f64| LossOfSyncCriterion { angle_threshold: a, ..LossOfSyncCriterion::default() };
        let a = detect_loss_of_sync(&tr, &crit(lo), DisturbanceClass::Large).unwrap();
        let b = detect_loss_of_sync(&tr, &crit(lo + extra), DisturbanceClass::Large).unwrap();
        prop_assert!(!(a.stable && !b.stable));
        if let (Some(ta), Some(tb)) = (a.first_violation_time, b.first_violation_time) {
            prop_assert!(tb >= ta - 1e-12);
        }
    }
}
