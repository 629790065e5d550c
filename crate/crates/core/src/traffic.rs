//! ON/OFF traffic of intermediate users as a two-state discrete-time Markov
//! chain, with the idle/busy duration estimators and the deferral window.
//!
//! All durations handed to this module are in seconds; the estimators return
//! slot counts as reals.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{positive, unit_open, Error, Result};
use crate::rng::{stream, TAG_TRAFFIC};
use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrafficState {
    Idle = 0,
    Busy = 1,
}

/// Exponential OFF/ON period means and the slot length, all in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficProfile {
    /// Mean OFF (idle) period.
    pub lambda_off: f64,
    /// Mean ON (busy) period.
    pub mu_on: f64,
    pub slot: f64,
}

/// Row-stochastic 2×2 matrix; state 0 is idle, state 1 busy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl TrafficProfile {
    pub fn new(lambda_off: f64, mu_on: f64, slot: f64) -> Result<Self> {
        positive("lambda_off", lambda_off)?;
        positive("mu_on", mu_on)?;
        positive("slot", slot)?;
        Ok(Self {
            lambda_off,
            mu_on,
            slot,
        })
    }

    /// Profile with busy fraction `xi` and one mean held fixed.
    pub fn from_duty_cycle_fixed_off(lambda_off: f64, xi: f64, slot: f64) -> Result<Self> {
        unit_open("duty cycle", xi)?;
        Self::new(lambda_off, lambda_off * xi / (1.0 - xi), slot)
    }

    pub fn from_duty_cycle_fixed_on(mu_on: f64, xi: f64, slot: f64) -> Result<Self> {
        unit_open("duty cycle", xi)?;
        Self::new(mu_on * (1.0 - xi) / xi, mu_on, slot)
    }

    /// Long-run busy fraction `μ / (μ + λ)`.
    pub fn duty_cycle(&self) -> f64 {
        self.mu_on / (self.mu_on + self.lambda_off)
    }

    /// True when the slot is not small against both means; the chain then
    /// under-represents multiple state changes inside one slot.
    pub fn slot_is_coarse(&self) -> bool {
        self.slot * 10.0 > self.lambda_off.min(self.mu_on)
    }

    pub fn transition_matrix(&self) -> TransitionMatrix {
        let p01 = -libm::expm1(-self.slot / self.lambda_off);
        let p10 = -libm::expm1(-self.slot / self.mu_on);
        TransitionMatrix {
            p00: 1.0 - p01,
            p01,
            p10,
            p11: 1.0 - p10,
        }
    }
}

impl TransitionMatrix {
    pub fn stay_probability(&self, state: TrafficState) -> f64 {
        match state {
            TrafficState::Idle => self.p00,
            TrafficState::Busy => self.p11,
        }
    }
}

/// Advances the chain by one slot; at most one state change per slot.
pub fn step<R: Rng + ?Sized>(profile: &TrafficProfile, state: TrafficState, rng: &mut R) -> TrafficState {
    step_with(&profile.transition_matrix(), state, rng)
}

pub fn step_with<R: Rng + ?Sized>(p: &TransitionMatrix, state: TrafficState, rng: &mut R) -> TrafficState {
    let u: f64 = rng.random();
    match state {
        TrafficState::Idle if u < p.p01 => TrafficState::Busy,
        TrafficState::Busy if u < p.p10 => TrafficState::Idle,
        s => s,
    }
}

/// Duration of idleness `ν_I = (λ / T_s) ln(1 / (1 − δ))`, in slots.
pub fn duration_of_idleness(profile: &TrafficProfile, delta: f64) -> Result<f64> {
    unit_open("delta", delta)?;
    Ok(profile.lambda_off / profile.slot * -libm::log1p(-delta))
}

/// Duration of busyness `ν_B = (μ / T_s) ln(1 / (1 − δ))`, in slots.
pub fn duration_of_busyness(profile: &TrafficProfile, delta: f64) -> Result<f64> {
    unit_open("delta", delta)?;
    Ok(profile.mu_on / profile.slot * -libm::log1p(-delta))
}

/// Slots until a busy IU is expected to turn idle:
/// `η = (μ / T_s) ln(max(p10 / p_th, 1)) + 1`. Never below one slot.
pub fn idle_wait_estimate(profile: &TrafficProfile, p_th: f64) -> Result<f64> {
    unit_open("p_th", p_th)?;
    let p10 = profile.transition_matrix().p10;
    let ratio = (p10 / p_th).max(1.0);
    Ok(profile.mu_on / profile.slot * libm::log(ratio) + 1.0)
}

/// Deferral window `η_w`: the smallest idle-wait estimate over the busy IUs,
/// rounded up to whole slots.
pub fn deferral_window(busy: &[TrafficProfile], p_th: f64) -> Result<u64> {
    if busy.is_empty() {
        return Err(Error::NoBusyIu);
    }
    let mut best = f64::INFINITY;
    for p in busy {
        best = best.min(idle_wait_estimate(p, p_th)?);
    }
    Ok(libm::ceil(best) as u64)
}

/// Per-IU traffic chains for one replication, advanced lazily on a shared
/// slot clock.
///
/// Each IU owns its own stream, so the state of an IU at slot `t` does not
/// depend on which other IUs were queried or in which order. The initial
/// state is drawn from the stationary distribution.
#[derive(Debug, Clone)]
pub struct TrafficField {
    seed: u64,
    chains: Vec<Option<Chain>>,
}

#[derive(Debug, Clone)]
struct Chain {
    matrix: TransitionMatrix,
    rng: ChaCha8Rng,
    history: Vec<TrafficState>,
}

impl TrafficField {
    pub fn new(seed: u64, node_count: usize) -> Self {
        Self {
            seed,
            chains: vec![None; node_count],
        }
    }

    pub fn state_at(&mut self, node: NodeId, profile: &TrafficProfile, slot: u64) -> TrafficState {
        let seed = self.seed;
        let idx = node.index();
        if idx >= self.chains.len() {
            self.chains.resize(idx + 1, None);
        }
        let chain = self.chains[idx].get_or_insert_with(|| {
            let mut rng = stream(seed, &[TAG_TRAFFIC, node.0 as u64]);
            let busy = rng.random::<f64>() < profile.duty_cycle();
            let first = if busy { TrafficState::Busy } else { TrafficState::Idle };
            Chain {
                matrix: profile.transition_matrix(),
                rng,
                history: vec![first],
            }
        });
        let slot = slot as usize;
        while chain.history.len() <= slot {
            let last = *chain.history.last().expect("history starts non-empty");
            let next = step_with(&chain.matrix, last, &mut chain.rng);
            chain.history.push(next);
        }
        chain.history[slot]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    const TS: f64 = 1e-4;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn transition_matrix_example() {
        let p = TrafficProfile::new(4e-3, 4e-3, TS).unwrap().transition_matrix();
        assert!(close(p.p01, 0.024_690_087_971_667, 1e-12));
        assert!(close(p.p10, 0.024_690_087_971_667, 1e-12));
        assert!(close(p.p00 + p.p01, 1.0, 1e-12));
    }

    #[test]
    fn long_off_period_never_leaves_idle() {
        let p = TrafficProfile::new(1e300, 4e-3, TS).unwrap().transition_matrix();
        assert!(p.p01 < 1e-300);
        assert_eq!(p.p00, 1.0);
    }

    #[test]
    fn step_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sticky = TransitionMatrix { p00: 1.0, p01: 0.0, p10: 1.0, p11: 0.0 };
        for _ in 0..1000 {
            assert_eq!(step_with(&sticky, TrafficState::Idle, &mut rng), TrafficState::Idle);
            assert_eq!(step_with(&sticky, TrafficState::Busy, &mut rng), TrafficState::Idle);
        }
    }

    #[test]
    fn idleness_examples() {
        let p = TrafficProfile::new(4e-3, 4e-3, TS).unwrap();
        assert!(close(duration_of_idleness(&p, 0.1).unwrap(), 4.214_420_626_313, 1e-9));
        assert!(duration_of_idleness(&p, 1e-12).unwrap() < 1e-9);
        let doubled = TrafficProfile::new(8e-3, 4e-3, TS).unwrap();
        assert!(close(
            duration_of_idleness(&doubled, 0.1).unwrap(),
            2.0 * duration_of_idleness(&p, 0.1).unwrap(),
            1e-12
        ));
        assert!(duration_of_idleness(&p, 0.0).is_err());
        assert!(duration_of_idleness(&p, 1.0).is_err());
    }

    #[test]
    fn busyness_examples() {
        let p = TrafficProfile::new(4e-3, 4e-3, TS).unwrap();
        assert!(close(duration_of_busyness(&p, 0.1).unwrap(), 4.214_420_626_313, 1e-9));
        assert!(duration_of_busyness(&p, -0.5).is_err());
    }

    #[test]
    fn busyness_grows_with_duty_cycle() {
        let mut last = 0.0;
        for k in 1..20 {
            let xi = k as f64 / 20.0;
            let p = TrafficProfile::from_duty_cycle_fixed_off(4e-3, xi, TS).unwrap();
            let nu = duration_of_busyness(&p, 0.1).unwrap();
            assert!(nu > last);
            last = nu;
        }
    }

    #[test]
    fn idle_wait_examples() {
        let p = TrafficProfile::new(4e-3, 4e-3, TS).unwrap();
        // p_th above p10 clamps the logarithm
        assert_eq!(idle_wait_estimate(&p, 0.5).unwrap(), 1.0);
        assert!(close(idle_wait_estimate(&p, 0.01).unwrap(), 37.152_670_936_2, 1e-6));
    }

    #[test]
    fn deferral_window_examples() {
        let fast = TrafficProfile::new(4e-3, 2e-3, TS).unwrap();
        let slow = TrafficProfile::new(4e-3, 8e-3, TS).unwrap();
        let single = deferral_window(&[slow], 0.01).unwrap();
        assert_eq!(single, libm::ceil(idle_wait_estimate(&slow, 0.01).unwrap()) as u64);
        // the longer ON period sits closer to the p_th clamp, so its estimate is shorter
        let both = deferral_window(&[slow, fast], 0.01).unwrap();
        assert_eq!(both, 19);
        assert_eq!(deferral_window(&[fast], 0.01).unwrap(), 33);
        assert_eq!(deferral_window(&[fast, fast, fast], 0.01).unwrap(), deferral_window(&[fast], 0.01).unwrap());
        assert_eq!(deferral_window(&[], 0.01), Err(Error::NoBusyIu));
    }

    #[test]
    fn field_is_query_order_independent() {
        let p = TrafficProfile::new(2e-3, 2e-3, TS).unwrap();
        let mut a = TrafficField::new(11, 8);
        let mut b = TrafficField::new(11, 8);
        let forward: Vec<_> = (0..200).map(|t| a.state_at(NodeId(3), &p, t)).collect();
        let _ = b.state_at(NodeId(5), &p, 150);
        let late = b.state_at(NodeId(3), &p, 199);
        assert_eq!(late, forward[199]);
        assert_eq!(b.state_at(NodeId(3), &p, 17), forward[17]);
    }

    #[test]
    fn coarse_slot_flagged() {
        assert!(TrafficProfile::new(4e-4, 4e-3, TS).unwrap().slot_is_coarse());
        assert!(!TrafficProfile::new(4e-3, 4e-3, TS).unwrap().slot_is_coarse());
    }
}
