use proptest::prelude::*;

use treespan::control::{build_spanning_tree, remove_dead, EventLog};
use treespan::sim::{deploy, OptimizerKind, Policy, Reoptimize, Simulation, SimulationConfig};
use treespan::{relative_load, Area, EnergyParams, EnergyStatus, Network, Point, SinkPath};

fn area(n: usize) -> Area {
    let side = 1000.0 * (n as f64 / 100.0).sqrt();
    Area {
        width: side,
        height: side,
    }
}

fn policy(i: u8) -> Policy {
    match i % 4 {
        0 => Policy::BASELINE,
        1 => Policy::PROPOSED,
        2 => Policy {
            optimizer: OptimizerKind::Sa,
            thresholds: true,
            reoptimize: Reoptimize::Setup,
        },
        _ => Policy {
            optimizer: OptimizerKind::None,
            thresholds: true,
            reoptimize: Reoptimize::Setup,
        },
    }
}

fn sim(n: usize, seed: u64, p: u8, bits: u32) -> Simulation {
    let a = area(n);
    let path = SinkPath::midline(&a);
    let pts = deploy(n, &a, &path, 150.0, 100.0, seed).unwrap();
    let mut cfg = SimulationConfig::new(pts, path);
    cfg.policy = policy(p);
    cfg.seed = seed;
    cfg.radio.msg_bits = bits;
    cfg.sa.t0 = 1e-3;
    Simulation::new(cfg).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn round_invariants(n in 10usize..60, seed in 1u64..10_000, p in 0u8..4, bits in prop::sample::select(vec![200u32, 2000])) {
        let mut s = sim(n, seed, p, bits);
        let mut dead_before = 0;
        for _ in 0..150 {
            let before: Vec<f64> = s.network().nodes.iter().map(|x| x.energy).collect();
            let expected: Vec<Option<f64>> = (0..n)
                .map(|v| {
                    let t = s.topology();
                    t.is_member(v).then(|| {
                        let d = s.network().link_distance(v, t.parent(v).unwrap());
                        relative_load(before[v], t.q(v), d, s.params()).unwrap() * before[v]
                    })
                })
                .collect();
            let planned = s.planned_drain();
            let was_dead: Vec<bool> = s.network().nodes.iter().map(|x| !x.is_alive()).collect();
            let m = s.run_round();

            prop_assert!(m.delivered <= m.generated);
            prop_assert!(m.energy_used >= 0.0 && m.delay_sum_ms >= 0.0);
            prop_assert!(s.conservation_error().abs() <= 1e-9);

            // every member either paid exactly its relative-load drain or
            // ran out of energy trying
            for v in 0..n {
                let after = s.network().nodes[v].energy;
                match (expected[v], planned[v]) {
                    (Some(e), Some(d)) => {
                        prop_assert!((d - e).abs() <= 1e-12 * e, "node {} drains {} expected {}", v, d, e);
                        prop_assert!(after == before[v] - d || after == 0.0);
                    }
                    (None, None) => prop_assert_eq!(after, before[v]),
                    _ => prop_assert!(false, "membership of {} changed mid-round", v),
                }
                if was_dead[v] {
                    prop_assert!(!s.topology().is_member(v));
                    prop_assert_eq!(after, before[v]);
                }
            }

            let dead = s.network().nodes.iter().filter(|x| !x.is_alive()).count();
            prop_assert!(dead >= dead_before);
            dead_before = dead;

            let isolated = s.network().nodes.iter().any(|x| x.is_alive() && !s.topology().is_member(x.id));
            if dead == 0 && !isolated && m.generated > 0 {
                prop_assert_eq!(m.delivered, m.generated);
            }
        }
    }

    #[test]
    fn thresholds_off_only_uses_normal_and_dead(n in 10usize..40, seed in 1u64..1000) {
        let mut s = sim(n, seed, 0, 2000);
        for _ in 0..100 {
            s.run_round();
            prop_assert!(s.network().nodes.iter().all(|x| matches!(x.status, EnergyStatus::Normal | EnergyStatus::Dead)));
        }
    }
}

#[test]
fn same_seed_same_history() {
    let run = |p| {
        let mut s = sim(60, 77, p, 2000);
        for _ in 0..200 {
            s.run_round();
        }
        (s.history().to_vec(), s.events().to_vec())
    };
    for p in 0..4 {
        assert_eq!(run(p), run(p));
    }
}

#[test]
fn parent_and_child_dying_together() {
    // 2 reaches the sink through 1, or through the anchor 3
    let path = SinkPath::new(vec![Point::new(0.0, 500.0), Point::new(1000.0, 500.0)]).unwrap();
    let pts = [
        Point::new(500.0, 470.0),
        Point::new(500.0, 370.0),
        Point::new(500.0, 280.0),
        Point::new(590.0, 400.0),
    ];
    let mut net = Network::new(&pts, path, 150.0, 125.0, 0.2, 0.01).unwrap();
    let p = EnergyParams::default();
    let mut topo = build_spanning_tree(&net, &p, &mut EventLog::default()).unwrap();
    for v in [0, 1] {
        net.nodes[v].energy = 0.0;
        net.nodes[v].status = EnergyStatus::Dead;
    }
    let isolated = remove_dead(&mut topo, &[0, 1], &net, &p, &mut EventLog::default());
    assert!(isolated.is_empty());
    assert!(!topo.is_member(0) && !topo.is_member(1));
    assert!(topo.is_member(2));
    assert_eq!(topo.validate(&net), Ok(()));
}
