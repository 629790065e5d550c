//! Adaptive M-QAM mode table, transfer time and energy, and the nonlinear
//! energy-harvesting model.

use alloc::vec::Vec;

use crate::error::{positive, unit_open, Error, Result};
use crate::{db_to_linear, linear_to_db};

/// How the per-constellation SNR requirement scales with `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdRule {
    /// Base threshold times `log2 m`.
    #[default]
    PerBit,
    /// Base threshold times `m^c3 − c4`.
    PerLevel,
}

/// Constants of the bit-error-rate approximation `P_b ≈ c1 exp(−c2 γ / f(m))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeTableParams {
    pub target_ber: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub rule: ThresholdRule,
    /// Largest constellation is `2^max_bits`.
    pub max_bits: u32,
}

impl Default for ModeTableParams {
    fn default() -> Self {
        Self {
            target_ber: 1e-6,
            c1: 2.0,
            c2: 1.5,
            c3: 1.0,
            c4: 1.0,
            rule: ThresholdRule::PerBit,
            max_bits: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionMode {
    /// `m_q`; zero for the no-transmission mode.
    pub constellation: u32,
    /// `D_q = log2 m_q` bits per symbol.
    pub bits: u32,
    /// Inclusive lower bound in dB.
    pub snr_lower_db: f64,
    /// Exclusive upper bound in dB.
    pub snr_upper_db: f64,
}

impl TransmissionMode {
    pub fn carries_data(&self) -> bool {
        self.bits > 0
    }

    pub fn name(&self) -> &'static str {
        match self.bits {
            0 => "No transmission",
            1 => "BPSK",
            2 => "QPSK",
            3 => "8-QAM",
            4 => "16-QAM",
            5 => "32-QAM",
            6 => "64-QAM",
            7 => "128-QAM",
            8 => "256-QAM",
            _ => "QAM",
        }
    }
}

/// Modes ordered by rate; their SNR intervals tile the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTable {
    modes: Vec<TransmissionMode>,
}

impl ModeTable {
    pub fn modes(&self) -> &[TransmissionMode] {
        &self.modes
    }

    /// Data-carrying thresholds in dB, lowest first.
    pub fn thresholds_db(&self) -> Vec<f64> {
        self.modes[1..].iter().map(|m| m.snr_lower_db).collect()
    }

    /// The mode whose interval contains `snr_db`. NaN selects no transmission.
    pub fn select(&self, snr_db: f64) -> TransmissionMode {
        self.modes
            .iter()
            .rev()
            .find(|m| snr_db >= m.snr_lower_db)
            .copied()
            .unwrap_or(self.modes[0])
    }

    pub fn select_linear(&self, snr: f64) -> TransmissionMode {
        self.select(linear_to_db(snr))
    }

    pub fn by_bits(&self, bits: u32) -> Option<TransmissionMode> {
        self.modes.iter().find(|m| m.bits == bits).copied()
    }

    pub fn no_transmission(&self) -> TransmissionMode {
        self.modes[0]
    }
}

/// Table for the given target bit-error rate with the default constants.
pub fn build_mode_table(target_ber: f64) -> Result<ModeTable> {
    build_mode_table_with(&ModeTableParams {
        target_ber,
        ..ModeTableParams::default()
    })
}

pub fn build_mode_table_with(p: &ModeTableParams) -> Result<ModeTable> {
    unit_open("target BER", p.target_ber)?;
    positive("c1", p.c1)?;
    positive("c2", p.c2)?;
    if p.max_bits == 0 || p.max_bits > 31 {
        return Err(Error::NonPositive {
            name: "max_bits",
            value: p.max_bits as f64,
        });
    }
    let base = libm::log(p.c1 / p.target_ber) / p.c2;
    positive("base SNR threshold", base)?;
    let mut lowers = Vec::with_capacity(p.max_bits as usize);
    for bits in 1..=p.max_bits {
        let m = (1u64 << bits) as f64;
        let factor = match p.rule {
            ThresholdRule::PerBit => bits as f64,
            ThresholdRule::PerLevel => libm::pow(m, p.c3) - p.c4,
        };
        let db = linear_to_db(base * factor);
        if let Some(&prev) = lowers.last() {
            if !(db > prev) {
                return Err(Error::InvalidTopology("mode thresholds must increase with constellation size"));
            }
        }
        lowers.push(db);
    }
    let mut modes = Vec::with_capacity(lowers.len() + 1);
    modes.push(TransmissionMode {
        constellation: 0,
        bits: 0,
        snr_lower_db: f64::NEG_INFINITY,
        snr_upper_db: lowers[0],
    });
    for (k, &lo) in lowers.iter().enumerate() {
        let bits = k as u32 + 1;
        modes.push(TransmissionMode {
            constellation: 1 << bits,
            bits,
            snr_lower_db: lo,
            snr_upper_db: lowers.get(k + 1).copied().unwrap_or(f64::INFINITY),
        });
    }
    Ok(ModeTable { modes })
}

/// Linear SNR threshold of a mode.
pub fn threshold_linear(mode: &TransmissionMode) -> f64 {
    db_to_linear(mode.snr_lower_db)
}

/// Payload of one relay transfer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferDemand {
    pub packets: u32,
    pub bits_per_packet: u32,
    /// Processing power `P_proc` in watts.
    pub proc_power: f64,
}

impl TransferDemand {
    pub fn new(packets: u32, bits_per_packet: u32, proc_power: f64) -> Result<Self> {
        if packets == 0 {
            return Err(Error::NonPositive { name: "packets", value: 0.0 });
        }
        if bits_per_packet == 0 {
            return Err(Error::NonPositive {
                name: "bits_per_packet",
                value: 0.0,
            });
        }
        if !(proc_power >= 0.0) || !proc_power.is_finite() {
            return Err(Error::NonPositive {
                name: "processing power",
                value: proc_power,
            });
        }
        Ok(Self {
            packets,
            bits_per_packet,
            proc_power,
        })
    }

    pub fn total_bits(&self) -> u64 {
        self.packets as u64 * self.bits_per_packet as u64
    }
}

/// `τ_req = ⌈α ϕ / D_q⌉`.
pub fn transfer_slots(demand: &TransferDemand, mode: &TransmissionMode) -> Result<u64> {
    if mode.bits == 0 {
        return Err(Error::Untransmittable);
    }
    Ok(demand.total_bits().div_ceil(mode.bits as u64))
}

/// Slots to push the demand through at `rate` bits per channel use, one
/// channel use per slot.
pub fn transfer_slots_at_rate(demand: &TransferDemand, rate: f64) -> Result<u64> {
    if !(rate > 0.0) {
        return Err(Error::Untransmittable);
    }
    let t = libm::ceil(demand.total_bits() as f64 / rate);
    Ok(if t < 1.0 { 1 } else { t as u64 })
}

/// `E_req = (P + P_proc) τ_req T_s`.
pub fn transfer_energy(demand: &TransferDemand, mode: &TransmissionMode, tx_power: f64, slot: f64) -> Result<f64> {
    let tau = transfer_slots(demand, mode)?;
    Ok((tx_power + demand.proc_power) * tau as f64 * slot)
}

/// Sigmoid energy-harvesting circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvesterParams {
    /// Saturation power `M_h` in watts.
    pub max_power: f64,
    pub slope: f64,
    pub threshold: f64,
}

impl HarvesterParams {
    pub fn new(max_power: f64, slope: f64, threshold: f64) -> Result<Self> {
        positive("harvester saturation power", max_power)?;
        positive("harvester slope", slope)?;
        positive("harvester threshold", threshold)?;
        Ok(Self {
            max_power,
            slope,
            threshold,
        })
    }
}

/// `M_h (1 − e^{−a x}) / (1 + e^{−a (x − b)})`, in watts.
pub fn harvested_power(p: &HarvesterParams, received_power: f64) -> f64 {
    let x = received_power.max(0.0);
    let rise = -libm::expm1(-p.slope * x);
    p.max_power * rise / (1.0 + libm::exp(-p.slope * (x - p.threshold)))
}

/// Energy harvested over a transfer of `slots` slots, in joules.
pub fn harvested_energy_for_transfer(p: &HarvesterParams, received_power: f64, slots: u64, slot: f64) -> f64 {
    harvested_power(p, received_power) * slots as f64 * slot
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_reference_thresholds() {
        let t = build_mode_table(1e-6).unwrap();
        let want = [9.8554, 12.8657, 14.6266, 15.8760, 16.8451, 17.6369, 18.3063, 18.8863];
        for (got, w) in t.thresholds_db().iter().zip(want) {
            assert!((got - w).abs() < 1e-4, "{got} vs {w}");
        }
    }

    #[test]
    fn selection_examples() {
        let t = build_mode_table(1e-6).unwrap();
        assert_eq!(t.select(9.0).bits, 0);
        assert_eq!(t.select(14.0).bits, 2);
        assert_eq!(t.select(25.0).bits, 8);
        assert_eq!(t.select(t.thresholds_db()[1]).bits, 2);
        assert_eq!(t.select(f64::NEG_INFINITY).bits, 0);
        assert_eq!(t.select(f64::NAN).bits, 0);
        assert_eq!(t.select(f64::INFINITY).bits, 8);
    }

    #[test]
    fn intervals_tile_the_line() {
        for rule in [ThresholdRule::PerBit, ThresholdRule::PerLevel] {
            let t = build_mode_table_with(&ModeTableParams { rule, ..Default::default() }).unwrap();
            let m = t.modes();
            assert_eq!(m[0].snr_lower_db, f64::NEG_INFINITY);
            assert_eq!(m[m.len() - 1].snr_upper_db, f64::INFINITY);
            for w in m.windows(2) {
                assert_eq!(w[0].snr_upper_db, w[1].snr_lower_db);
                assert!(w[0].snr_lower_db < w[1].snr_lower_db);
            }
        }
    }

    #[test]
    fn per_level_rule_uses_m_minus_one() {
        let t = build_mode_table_with(&ModeTableParams {
            rule: ThresholdRule::PerLevel,
            ..Default::default()
        })
        .unwrap();
        let base = libm::log(2.0 / 1e-6) / 1.5;
        let qpsk = t.by_bits(2).unwrap().snr_lower_db;
        assert!((qpsk - linear_to_db(3.0 * base)).abs() < 1e-12);
    }

    #[test]
    fn transfer_examples() {
        let d = TransferDemand::new(10, 8, 0.0).unwrap();
        let t = build_mode_table(1e-6).unwrap();
        assert_eq!(transfer_slots(&d, &t.by_bits(8).unwrap()).unwrap(), 10);
        assert_eq!(transfer_slots(&d, &t.by_bits(3).unwrap()).unwrap(), 27);
        let one = TransferDemand::new(1, 1, 0.0).unwrap();
        assert_eq!(transfer_slots(&one, &t.by_bits(5).unwrap()).unwrap(), 1);
        assert_eq!(transfer_slots(&d, &t.no_transmission()), Err(Error::Untransmittable));
        let e = transfer_energy(&d, &t.by_bits(8).unwrap(), 1.0, 1e-4).unwrap();
        assert!((e - 1e-3).abs() < 1e-15);
        let dp = TransferDemand::new(10, 8, 0.01).unwrap();
        let e = transfer_energy(&dp, &t.by_bits(3).unwrap(), 1.0, 1e-4).unwrap();
        assert!((e - 2.727e-3).abs() < 1e-12);
        assert!(TransferDemand::new(0, 8, 0.0).is_err());
    }

    #[test]
    fn harvester_examples() {
        let h = HarvesterParams::new(0.024, 150.0, 0.014).unwrap();
        assert_eq!(harvested_power(&h, 0.0), 0.0);
        assert!((harvested_power(&h, 1e3) - 0.024).abs() < 1e-15);
        let mid = harvested_power(&h, 0.014);
        assert!((mid - 0.024 * (1.0 - libm::exp(-2.1)) / 2.0).abs() < 1e-15);
        assert!((mid - 10.5305e-3).abs() < 1e-6);
        assert_eq!(harvested_energy_for_transfer(&h, 0.0, 10, 1e-4), 0.0);
        let e1 = harvested_energy_for_transfer(&h, 0.01, 10, 1e-4);
        let e2 = harvested_energy_for_transfer(&h, 0.01, 20, 1e-4);
        assert!((e2 - 2.0 * e1).abs() < 1e-18);
    }
}
