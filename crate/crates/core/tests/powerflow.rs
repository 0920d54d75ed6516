mod common;

use anglestab::cli::Scenario;
use anglestab::powergrid::{BusKind, PowerFlowOptions};
use num_complex::Complex64;
use proptest::prelude::*;

/// Gauss-Seidel power flow written independently of the Newton solver:
/// slack fixed, PV buses hold |V| and P, PQ buses hold P and Q.
fn gauss_seidel(sc: &Scenario) -> Vec<(u32, Complex64)> {
    let net = sc.network().unwrap();
    let y = net.y_bus().clone();
    let s_base = net.s_base();
    let buses = net.buses().to_vec();
    let n = buses.len();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for (k, b) in buses.iter().enumerate() {
        let (pl, ql) = net.load_at_bus(b.id);
        p[k] -= pl / s_base;
        q[k] -= ql / s_base;
        for m in &sc.machines {
            if m.bus == b.id {
                p[k] += m.p_mw / s_base;
            }
        }
        for g in &sc.gfms {
            if g.bus == b.id {
                p[k] += g.p_mw / s_base;
            }
        }
    }
    let mut v: Vec<Complex64> = buses
        .iter()
        .map(|b| match b.kind {
            BusKind::Slack => Complex64::from_polar(b.v_setpoint, b.angle_setpoint),
            BusKind::Pv => Complex64::new(b.v_setpoint, 0.0),
            BusKind::Pq => Complex64::new(1.0, 0.0),
        })
        .collect();
    for _ in 0..20000 {
        let mut change: f64 = 0.0;
        for k in 0..n {
            if buses[k].kind == BusKind::Slack {
                continue;
            }
            let yv: Complex64 = (0..n).filter(|&j| j != k).map(|j| y[(k, j)] * v[j]).sum();
            if buses[k].kind == BusKind::Pv {
                q[k] = -(v[k].conj() * (yv + y[(k, k)] * v[k])).im;
            }
            let s = Complex64::new(p[k], -q[k]);
            let mut vk = (s / v[k].conj() - yv) / y[(k, k)];
            if buses[k].kind == BusKind::Pv {
                vk = Complex64::from_polar(buses[k].v_setpoint, vk.arg());
            }
            change = change.max((vk - v[k]).norm());
            v[k] = vk;
        }
        if change < 1e-13 {
            break;
        }
    }
    buses.iter().map(|b| b.id).zip(v).collect()
}

fn newton(sc: &Scenario) -> Vec<(u32, Complex64)> {
    let pf = sc.power_system().unwrap().power_flow(&PowerFlowOptions::default()).unwrap();
    pf.bus_ids.iter().copied().zip(pf.v.iter().copied()).collect()
}

#[test]
fn newton_matches_gauss_seidel_on_canonical() {
    let sc = common::scenario("canonical.scn");
    let nr = newton(&sc);
    let gs = gauss_seidel(&sc);
    for ((b1, v1), (b2, v2)) in nr.iter().zip(&gs) {
        assert_eq!(b1, b2);
        assert!((v1 - v2).norm() < 1e-8, "bus {b1}: {v1} vs {v2}");
    }
}

#[test]
fn bus_and_branch_order_do_not_matter() {
    let sc = common::scenario("canonical.scn");
    let mut shuffled = sc.clone();
    shuffled.buses.reverse();
    shuffled.branches.reverse();
    let mut a = newton(&sc);
    let mut b = newton(&shuffled);
    a.sort_by_key(|x| x.0);
    b.sort_by_key(|x| x.0);
    for ((ba, va), (bb, vb)) in a.iter().zip(&b) {
        assert_eq!(ba, bb);
        assert!((va - vb).norm() < 1e-10);
    }
}

#[test]
fn losses_close_the_power_balance() {
    let sc = common::scenario("canonical.scn");
    let pf = sc.power_system().unwrap().power_flow(&PowerFlowOptions::default()).unwrap();
    let net = sc.network().unwrap();
    // losses computed branch by branch must equal the net injection sum
    let v = |id: u32| pf.voltage(id).unwrap();
    let mut losses = 0.0;
    for br in net.branches() {
        let ys = br.series_admittance();
        let i = (v(br.from) - v(br.to)) * ys;
        losses += (i.norm_sqr() / ys).re;
    }
    let total: f64 = pf.s_injected.iter().map(|s| s.re).sum();
    assert!((total - losses).abs() < 1e-9, "{total} vs {losses}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn newton_agrees_with_gauss_seidel(
        p in 300.0f64..700.0,
        load in 0.7f64..1.1,
        x in 0.08f64..0.2,
        v1 in 0.97f64..1.04,
    ) {
        let mut sc = common::scenario("canonical.scn");
        sc.set_path("generators.p_mw", p).unwrap();
        sc.set_path("load.5.scale", load).unwrap();
        sc.set_path("branch.5-6a.x", x).unwrap();
        sc.set_path("bus.1.v", v1).unwrap();
        let nr = newton(&sc);
        let gs = gauss_seidel(&sc);
        for ((_, a), (_, b)) in nr.iter().zip(&gs) {
            prop_assert!((a - b).norm() < 1e-7);
        }
    }
}
