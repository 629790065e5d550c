//! Route-level data throughput and energy efficiency.

use crate::error::{Error, Result};
use crate::linkbudget::TransferDemand;
use crate::router::{HopKind, RouteLedger};

/// What a direct hop contributes to the throughput denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThroughputTerm {
    /// The constellation size `m_q` itself.
    #[default]
    Constellation,
    /// Bits per symbol `log2 m_q`.
    BitsPerSymbol,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteMetrics {
    pub throughput: f64,
    pub throughput_normalized: f64,
    /// `None` when harvest meets or exceeds the energy spent.
    pub energy_efficiency: Option<f64>,
    pub hop_count: usize,
    pub ris_count: usize,
}

/// `1 / Σ_i [ (1 − a_i) / ((1 − P_b) m_i) + a_i / R_i ]` over the transfer
/// hops, with `a_i = 1` on reflected hops.
///
/// A hop with zero rate makes the throughput zero; [`zero_rate_hop`] names
/// it.
pub fn data_throughput(ledger: &RouteLedger, target_ber: f64, term: ThroughputTerm) -> Result<f64> {
    if !ledger.success {
        return Err(Error::UnsuccessfulRoute);
    }
    let mut sum = 0.0;
    for h in ledger.transfers() {
        let per_hop = match h.kind {
            HopKind::Direct { constellation, .. } => {
                let m = match term {
                    ThroughputTerm::Constellation => constellation as f64,
                    ThroughputTerm::BitsPerSymbol => h.rate,
                };
                (1.0 - target_ber) * m
            }
            _ => h.rate,
        };
        if !(per_hop > 0.0) {
            return Ok(0.0);
        }
        sum += 1.0 / per_hop;
    }
    if sum == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / sum)
}

/// Index (among all hops) of the first transfer hop carrying zero rate.
pub fn zero_rate_hop(ledger: &RouteLedger) -> Option<usize> {
    ledger
        .hops
        .iter()
        .position(|h| h.kind.is_transfer() && !(h.rate > 0.0))
}

/// Payload bits over net energy:
/// `α ϕ / ((P + P_proc) T_s Σ τ_i − Σ E_harv,j)`.
pub fn energy_efficiency(ledger: &RouteLedger, demand: &TransferDemand, tx_power: f64, slot: f64) -> Result<f64> {
    if !ledger.success {
        return Err(Error::UnsuccessfulRoute);
    }
    let slots: u64 = ledger.transfers().map(|h| h.slots_used).sum();
    let spent = (tx_power + demand.proc_power) * slot * slots as f64;
    let net = spent - ledger.harvested();
    if !(net > 0.0) {
        return Err(Error::NetNegativeEnergy(net));
    }
    Ok(demand.total_bits() as f64 / net)
}

pub fn route_metrics(
    ledger: &RouteLedger,
    demand: &TransferDemand,
    tx_power: f64,
    slot: f64,
    target_ber: f64,
) -> Result<RouteMetrics> {
    Ok(RouteMetrics {
        throughput: data_throughput(ledger, target_ber, ThroughputTerm::Constellation)?,
        throughput_normalized: data_throughput(ledger, target_ber, ThroughputTerm::BitsPerSymbol)?,
        energy_efficiency: match energy_efficiency(ledger, demand, tx_power, slot) {
            Ok(e) => Some(e),
            Err(Error::NetNegativeEnergy(_)) => None,
            Err(e) => return Err(e),
        },
        hop_count: ledger.hop_count(),
        ris_count: ledger.ris_count(),
    })
}
