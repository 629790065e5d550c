use drams_core::router::{route_seeded, HopKind, RouterConfig, Variant};
use drams_core::topology::{Arena, Node, Position, Topology, TopologySpec};
use drams_core::traffic::TrafficProfile;
use proptest::prelude::*;

const VARIANTS: [Variant; 4] = [
    Variant::Drams,
    Variant::SingleRisOnly,
    Variant::DoubleRisOnly,
    Variant::FixedMode { bits: 2 },
];

fn arena() -> Arena {
    Arena {
        width: 400.0,
        height: 400.0,
    }
}

fn profile() -> TrafficProfile {
    TrafficProfile::new(0.02, 0.005, 1e-4).unwrap()
}

fn generated(seed: u64, coverage: f64, ius: usize) -> Topology {
    let spec = TopologySpec {
        arena: arena(),
        coverage_radius: coverage,
        source: Position::new(20.0, 200.0),
        destination: Position::new(380.0, 200.0),
        iu_count: ius,
        ris_spacing: 25.0,
        ris_elements: 16,
    };
    Topology::generate(&spec, seed, |_| profile()).unwrap()
}

fn iu_only(coverage: f64, points: &[(f64, f64)]) -> Topology {
    let mut nodes = vec![
        Node::source(Position::new(20.0, 200.0)),
        Node::destination(Position::new(380.0, 200.0)),
    ];
    nodes.extend(points.iter().map(|&(x, y)| Node::iu(Position::new(x, y), profile())));
    Topology::new(arena(), coverage, nodes).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ledgers_respect_safety_invariants(seed in any::<u64>(), coverage in 30.0..90.0f64, ius in 0usize..300) {
        let topo = generated(seed, coverage, ius);
        let cfg = RouterConfig::reference();
        for v in VARIANTS {
            let ledger = route_seeded(&topo, &cfg, v, seed ^ 0x5a5a).unwrap();
            let bad = ledger.violations(&topo, cfg.slot, cfg.delay_budget);
            prop_assert!(bad.is_empty(), "{:?}: {:?} on {}", v, bad, ledger.trace(&topo));
            for h in &ledger.hops {
                match (v, h.kind) {
                    (Variant::SingleRisOnly, HopKind::DoubleRis { .. }) => prop_assert!(false, "double hop in single-only"),
                    (Variant::DoubleRisOnly, HopKind::SingleRis { .. }) => prop_assert!(false, "single hop in double-only"),
                    _ => {}
                }
            }
            if ledger.success {
                prop_assert!(ledger.total_slots as f64 * cfg.slot <= cfg.delay_budget);
            }
        }
    }

    #[test]
    fn routing_is_deterministic(seed in any::<u64>(), coverage in 30.0..90.0f64, ius in 0usize..300) {
        let topo = generated(seed, coverage, ius);
        let cfg = RouterConfig::reference();
        let a = route_seeded(&topo, &cfg, Variant::Drams, seed).unwrap();
        let b = route_seeded(&topo, &cfg, Variant::Drams, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn variants_coincide_without_ris(
        seed in any::<u64>(),
        coverage in 30.0..90.0f64,
        points in prop::collection::vec((0.0..400.0f64, 0.0..400.0f64), 0..200),
    ) {
        let topo = iu_only(coverage, &points);
        let cfg = RouterConfig::reference();
        let drams = route_seeded(&topo, &cfg, Variant::Drams, seed).unwrap();
        prop_assert_eq!(drams.ris_count(), 0);
        for v in [Variant::SingleRisOnly, Variant::DoubleRisOnly] {
            let other = route_seeded(&topo, &cfg, v, seed).unwrap();
            prop_assert_eq!(&other, &drams);
        }
    }
}

#[test]
fn direct_reach_is_one_hop() {
    let topo = Topology::new(
        arena(),
        60.0,
        vec![
            Node::source(Position::new(100.0, 100.0)),
            Node::destination(Position::new(140.0, 100.0)),
        ],
    )
    .unwrap();
    let cfg = RouterConfig::reference();
    let ledger = route_seeded(&topo, &cfg, Variant::Drams, 3).unwrap();
    assert!(ledger.success);
    assert_eq!(ledger.hop_count(), 1);
    assert_eq!(ledger.trace(&topo), "S → D");
}

#[test]
fn isolated_source_fails_cleanly() {
    let topo = iu_only(30.0, &[]);
    let cfg = RouterConfig::reference();
    let ledger = route_seeded(&topo, &cfg, Variant::Drams, 3).unwrap();
    assert!(!ledger.success);
    assert!(ledger.failure_reason.is_some());
    assert!(ledger.violations(&topo, cfg.slot, cfg.delay_budget).is_empty());
}
