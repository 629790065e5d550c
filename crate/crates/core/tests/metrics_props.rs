use drams_core::delaymodel::DelayBudget;
use drams_core::linkbudget::TransferDemand;
use drams_core::metrics::{data_throughput, energy_efficiency, ThroughputTerm};
use drams_core::router::{HopChoice, HopKind, RouteLedger};
use drams_core::topology::NodeId;
use proptest::prelude::*;

const PB: f64 = 1e-6;

fn hop(kind_tag: u8, bits: u32, rate: f64, slots: u64, harvested: f64) -> HopChoice {
    let kind = match kind_tag {
        0 => HopKind::Direct {
            to: NodeId(1),
            constellation: 1 << bits,
        },
        1 => HopKind::SingleRis { ris: NodeId(2), to: NodeId(1) },
        _ => HopKind::DoubleRis {
            first: NodeId(2),
            second: NodeId(3),
            to: NodeId(1),
        },
    };
    HopChoice {
        kind,
        from: NodeId(0),
        start_slot: 0,
        slots_used: slots,
        decision_slots: 0,
        rate: if kind_tag == 0 { bits as f64 } else { rate },
        snr: 10.0,
        harvested,
        remaining_distance: 0.0,
    }
}

fn ledger(hops: Vec<HopChoice>) -> RouteLedger {
    RouteLedger {
        total_slots: hops.iter().map(|h| h.slots_used).sum(),
        hops,
        success: true,
        failure_reason: None,
        notes: vec![],
        positions: vec![],
        budget: DelayBudget::new(0.05, 4).unwrap(),
    }
}

fn hops() -> impl Strategy<Value = Vec<HopChoice>> {
    prop::collection::vec(
        (0u8..3, 1u32..=8, 0.1..6.0f64, 1u64..40, 0.0..1e-7f64).prop_map(|(k, b, r, s, h)| hop(k, b, r, s, h)),
        1..8,
    )
}

proptest! {
    #[test]
    fn throughput_ignores_hop_order(mut hs in hops(), rot in 0usize..8) {
        let a = data_throughput(&ledger(hs.clone()), PB, ThroughputTerm::Constellation).unwrap();
        let n = hs.len();
        hs.rotate_left(rot % n);
        hs.reverse();
        let b = data_throughput(&ledger(hs), PB, ThroughputTerm::Constellation).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn throughput_below_slowest_hop(hs in hops()) {
        for term in [ThroughputTerm::Constellation, ThroughputTerm::BitsPerSymbol] {
            let d = data_throughput(&ledger(hs.clone()), PB, term).unwrap();
            let slowest = hs
                .iter()
                .map(|h| match (h.kind, term) {
                    (HopKind::Direct { constellation, .. }, ThroughputTerm::Constellation) => (1.0 - PB) * constellation as f64,
                    (HopKind::Direct { .. }, ThroughputTerm::BitsPerSymbol) => (1.0 - PB) * h.rate,
                    _ => h.rate,
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert!(d > 0.0 && d <= slowest * (1.0 + 1e-12));
        }
    }

    #[test]
    fn adding_a_hop_lowers_throughput(hs in hops(), extra in 0.1..6.0f64) {
        let a = data_throughput(&ledger(hs.clone()), PB, ThroughputTerm::Constellation).unwrap();
        let mut longer = hs;
        longer.push(hop(1, 1, extra, 5, 0.0));
        let b = data_throughput(&ledger(longer), PB, ThroughputTerm::Constellation).unwrap();
        prop_assert!(b < a);
    }

    #[test]
    fn efficiency_ignores_order_and_grows_with_harvest(mut hs in hops()) {
        let demand = TransferDemand::new(4, 8, 0.01).unwrap();
        let a = energy_efficiency(&ledger(hs.clone()), &demand, 1.0, 1e-4).unwrap();
        hs.reverse();
        let b = energy_efficiency(&ledger(hs.clone()), &demand, 1.0, 1e-4).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a);
        hs[0].harvested += 1e-6;
        let c = energy_efficiency(&ledger(hs), &demand, 1.0, 1e-4).unwrap();
        prop_assert!(c > a);
    }
}
