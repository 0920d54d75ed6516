mod common;

use std::f64::consts::PI;

use anglestab::dynsim::{simulate, Event, EventAction, Integrator, SimConfig};
use anglestab::studies::{find_cct, CctOptions, FaultTemplate};
use num_complex::Complex64;

#[test]
fn equilibrium_holds_without_events() {
    let sc = common::scenario("canonical.scn");
    let snap = common::snapshot(&sc);
    let cfg = SimConfig { t_end: 10.0, ..SimConfig::default() };
    let trace = simulate(&snap, &[], &cfg).unwrap();
    for name in trace.channel_names() {
        let ch = trace.channel(name).unwrap();
        let drift = ch.iter().map(|x| (x - ch[0]).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-6, "{name} drifts by {drift}");
    }
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let sc = common::scenario("fault1_150ms.scn");
    let snap = common::snapshot(&sc);
    let a = simulate(&snap, &sc.events, &sc.sim_config()).unwrap();
    let b = simulate(&snap, &sc.events, &sc.sim_config()).unwrap();
    assert_eq!(a, b);
}

fn fault_angles(dt: f64, integrator: Integrator) -> (Vec<f64>, Vec<f64>) {
    let sc = common::scenario("fault1_150ms.scn");
    let snap = common::snapshot(&sc);
    // sample every 10 ms whatever the step
    let cfg = SimConfig {
        t_end: 5.0,
        dt,
        integrator,
        stride: (0.01 / dt).round() as usize,
        ..SimConfig::default()
    };
    let tr = simulate(&snap, &sc.events, &cfg).unwrap();
    (
        tr.channel("SM-1.angle").unwrap().to_vec(),
        tr.channel("GFM-VSC-2.angle").unwrap().to_vec(),
    )
}

#[test]
fn step_halving_barely_moves_the_fault_trace() {
    let (a1, b1) = fault_angles(1e-3, Integrator::Trapezoidal);
    let (a2, b2) = fault_angles(5e-4, Integrator::Trapezoidal);
    let d = common::sup_diff(&a1, &a2).max(common::sup_diff(&b1, &b2));
    assert!(d < 0.5, "step halving moved the angles by {d} deg");
}

#[test]
fn rk4_and_trapezoidal_agree() {
    let (a1, b1) = fault_angles(1e-3, Integrator::Trapezoidal);
    let (a2, b2) = fault_angles(1e-3, Integrator::Rk4);
    let d = common::sup_diff(&a1, &a2).max(common::sup_diff(&b1, &b2));
    assert!(d < 0.2, "integrators differ by {d} deg");
}

/// Equal-area critical clearing time for a classical machine against an
/// infinite bus with zero electrical power during the fault.
pub fn equal_area_cct(h: f64, pm: f64, pmax: f64, omega_s: f64) -> f64 {
    let d0 = (pm / pmax).asin();
    let dcr = ((PI - 2.0 * d0) * d0.sin() - d0.cos()).acos();
    (4.0 * h * (dcr - d0) / (omega_s * pm)).sqrt()
}

#[test]
fn smib_cct_matches_equal_area() {
    let sc = common::scenario("smib_classical.scn");
    let snap = common::snapshot(&sc);
    let m = &sc.machines[0];
    // Pmax = E' V / (x'd + x_line) on the 100 MVA base, with the machine at 100 MVA
    let xdp = m.params.xdp * 100.0 / m.params.s_rated;
    let x = xdp + sc.branches[0].x;
    let pm = m.p_mw / 100.0;
    let v = Complex64::new(1.0, 0.0);
    // terminal voltage magnitude 1, P fixed: solve for E'
    let delta_t = (pm * sc.branches[0].x / 1.0).asin();
    let vt = Complex64::from_polar(1.0, delta_t);
    let i = (vt - v) / Complex64::new(0.0, sc.branches[0].x);
    let e = vt + Complex64::new(0.0, xdp) * i;
    let pmax = e.norm() / x;
    let expected = equal_area_cct(m.params.h * m.params.s_rated / 100.0, pm, pmax, 2.0 * PI * 50.0);

    let fault = sc.study.fault.clone().unwrap();
    let opts = CctOptions {
        tol: 0.001,
        sim: sc.sim_config(),
        criterion: sc.criterion(),
        ..CctOptions::default()
    };
    let r = find_cct(&snap, &fault, 0.1, 0.4, &opts).unwrap();
    assert!(
        (r.cct - expected).abs() < 0.002,
        "bisection {:.4} s vs equal area {:.4} s",
        r.cct,
        expected
    );
}

#[test]
fn equal_area_formula_sanity() {
    // Pm = 0.5 Pmax: delta0 = 30 deg, critical angle about 79.56 deg
    let d0 = (0.5f64).asin();
    let dcr = ((PI - 2.0 * d0) * d0.sin() - d0.cos()).acos();
    assert!((dcr.to_degrees() - 79.56).abs() < 0.01);
    assert!(equal_area_cct(3.5, 0.5, 1.0, 2.0 * PI * 50.0) > 0.0);
}

#[test]
fn fault_template_matches_explicit_events() {
    let sc = common::scenario("fault1_150ms.scn");
    let t = FaultTemplate {
        time: 1.0,
        bus: 5,
        admittance: Complex64::new(1e4, -1e4),
        trip_branch: Some("5-6a".into()),
    };
    let ev = t.events(0.15);
    assert_eq!(ev.len(), 2);
    assert_eq!(ev[0], sc.events[0]);
    assert_eq!(ev[1].action, EventAction::ClearFaultAndTrip { branch: "5-6a".into() });
    assert!((ev[1].time - sc.events[1].time).abs() < 1e-12);
}

#[test]
fn converter_current_respects_limit_in_every_bundled_scenario() {
    for name in common::BUNDLED {
        let sc = common::scenario(name);
        let snap = common::snapshot(&sc);
        let tr = simulate(&snap, &sc.events, &sc.sim_config()).unwrap();
        for g in &sc.gfms {
            let i = tr.channel(&format!("{}.i", g.name)).unwrap();
            let peak = i.iter().cloned().fold(0.0, f64::max);
            assert!(peak <= g.params.i_max + 1e-6, "{name}: {} peaks at {peak}", g.name);
        }
    }
}

#[test]
fn tripping_unknown_branch_fails_before_integrating() {
    let sc = common::scenario("canonical.scn");
    let snap = common::snapshot(&sc);
    let ev = [Event::new(1.0, EventAction::TripBranch { branch: "nope".into() })];
    assert!(simulate(&snap, &ev, &sc.sim_config()).is_err());
}
