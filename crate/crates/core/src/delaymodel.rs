//! Per-hop maximum acceptable delay with leftover carry-forward.
//!
//! With `T_0 = T_d / Ψ`, the limit at position `i ≥ 1` is
//!
//! ```text
//! T_i = (T_d − Σ_{k ≤ i−2} w_k − T_{i−1}) / (Ψ − Ψ_i) + (T_{i−1} − w_{i−1})
//! ```
//!
//! where `w_k` is the wait charged at position `k`: `β_k t_k` when only IUs
//! relay, or `c_k t'_k + (1 − c_k) t''_k` when RIS hops are mixed in.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{positive, Error, Result};

/// Wait incurred at one position of the route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HopDelay {
    /// IU-only routes: the wait `t` counts when the scan found only busy
    /// IUs (`β = 1`).
    Iu { busy: bool, wait: f64 },
    /// D2D hop of a mixed route, wait `t'` (`c = 1`).
    Direct { wait: f64 },
    /// RIS fallback of a mixed route, decision delay `t''` (`c = 0`).
    Ris { wait: f64 },
}

impl HopDelay {
    /// The part of the wait that the budget recursion subtracts.
    pub fn charged(&self) -> f64 {
        match *self {
            HopDelay::Iu { busy, wait } => {
                if busy {
                    wait
                } else {
                    0.0
                }
            }
            HopDelay::Direct { wait } | HopDelay::Ris { wait } => wait,
        }
    }

    pub fn wait(&self) -> f64 {
        match *self {
            HopDelay::Iu { wait, .. } | HopDelay::Direct { wait } | HopDelay::Ris { wait } => wait,
        }
    }
}

/// Budget state along a route: limits `T_0..T_i`, the waits recorded at
/// the positions already left, and the consumed hop counts `Ψ_1..Ψ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayBudget {
    pub total: f64,
    pub psi: u32,
    pub per_hop_limits: Vec<f64>,
    pub waits: Vec<HopDelay>,
    pub psi_list: Vec<u32>,
}

impl DelayBudget {
    pub fn new(total: f64, psi: u32) -> Result<Self> {
        positive("delay budget", total)?;
        if psi == 0 {
            return Err(Error::NonPositive { name: "psi", value: 0.0 });
        }
        Ok(Self {
            total,
            psi,
            per_hop_limits: vec![total / psi as f64],
            waits: Vec::new(),
            psi_list: Vec::new(),
        })
    }

    pub fn position(&self) -> usize {
        self.per_hop_limits.len() - 1
    }

    pub fn current_limit(&self) -> f64 {
        *self.per_hop_limits.last().expect("starts with T_0")
    }

    /// Records the wait of the current position and moves to the next one,
    /// `psi_i` whole radii away from S. Returns the new limit.
    pub fn advance(&mut self, wait: HopDelay, psi_i: u32) -> Result<f64> {
        if self.waits.len() != self.position() {
            return Err(Error::MissingHistory {
                index: self.position(),
                needed: self.position(),
                have: self.waits.len(),
            });
        }
        let charged: Vec<f64> = self.waits.iter().chain([&wait]).map(HopDelay::charged).collect();
        let next = step(self.total, self.psi, self.current_limit(), &charged, psi_i)?;
        self.waits.push(wait);
        self.psi_list.push(psi_i);
        self.per_hop_limits.push(next);
        Ok(next)
    }

    /// Total wait recorded so far, charged or not.
    pub fn total_wait(&self) -> f64 {
        self.waits.iter().map(HopDelay::wait).sum()
    }
}

/// One recursion step. `charged` holds `w_0..w_{i−1}`.
fn step(total: f64, psi: u32, prev: f64, charged: &[f64], psi_i: u32) -> Result<f64> {
    if psi_i >= psi {
        return Err(Error::Overshoot { psi_i, psi });
    }
    let (last, earlier) = charged.split_last().expect("at least one recorded wait");
    let spent: f64 = earlier.iter().sum();
    Ok((total - spent - prev) / (psi - psi_i) as f64 + (prev - last))
}

/// Limits `T_0..T_n` for `n = psi_list.len()`, with `charged[k]` the wait
/// charged at position `k`.
pub fn recursion(total: f64, psi: u32, psi_list: &[u32], charged: &[f64]) -> Result<Vec<f64>> {
    positive("delay budget", total)?;
    if psi == 0 {
        return Err(Error::NonPositive { name: "psi", value: 0.0 });
    }
    if charged.len() < psi_list.len() {
        return Err(Error::MissingHistory {
            index: psi_list.len(),
            needed: psi_list.len(),
            have: charged.len(),
        });
    }
    let mut limits = Vec::with_capacity(psi_list.len() + 1);
    limits.push(total / psi as f64);
    for (i, &psi_i) in psi_list.iter().enumerate() {
        let prev = limits[i];
        limits.push(step(total, psi, prev, &charged[..=i], psi_i)?);
    }
    Ok(limits)
}

fn history(state: &DelayBudget, i: usize) -> Result<()> {
    if i == 0 || state.per_hop_limits.len() < i || state.waits.len() < i {
        return Err(Error::MissingHistory {
            index: i,
            needed: i,
            have: state.waits.len().min(state.per_hop_limits.len()),
        });
    }
    Ok(())
}

/// `T_i` on an IU-only route, charging `β_k t_k`.
pub fn next_budget_only_iu(state: &DelayBudget, i: usize, psi_i: u32) -> Result<f64> {
    history(state, i)?;
    let charged: Vec<f64> = state.waits[..i]
        .iter()
        .map(|w| match *w {
            HopDelay::Iu { .. } => w.charged(),
            HopDelay::Direct { wait } | HopDelay::Ris { wait } => wait,
        })
        .collect();
    step(state.total, state.psi, state.per_hop_limits[i - 1], &charged, psi_i)
}

/// `T_i` when every earlier position was busy (`β ≡ 1`) with waits `t_0..t_{i−1}`.
pub fn next_budget_case2(state: &DelayBudget, i: usize, psi_i: u32, waits: &[f64]) -> Result<f64> {
    history(state, i)?;
    if waits.len() < i {
        return Err(Error::MissingHistory {
            index: i,
            needed: i,
            have: waits.len(),
        });
    }
    step(state.total, state.psi, state.per_hop_limits[i - 1], &waits[..i], psi_i)
}

/// `T_i` on a mixed RIS and IU route: `c_k t'_k + (1 − c_k) t''_k`.
pub fn next_budget_ris_iu(state: &DelayBudget, i: usize, psi_i: u32) -> Result<f64> {
    history(state, i)?;
    let charged: Vec<f64> = state.waits[..i].iter().map(HopDelay::charged).collect();
    step(state.total, state.psi, state.per_hop_limits[i - 1], &charged, psi_i)
}

/// Closed form of the wait-free limit at position `i = psi_list.len()`:
///
/// ```text
/// T_d ( Σ_p 1/(Ψ−Ψ_p) Π_{q>p} (1 − 1/(Ψ−Ψ_q)) + (1/Ψ) Π_n (1 − 1/(Ψ−Ψ_n)) )
/// ```
pub fn closed_form_case1(total: f64, psi: u32, psi_list: &[u32]) -> Result<f64> {
    positive("delay budget", total)?;
    if psi == 0 {
        return Err(Error::NonPositive { name: "psi", value: 0.0 });
    }
    for &p in psi_list {
        if p >= psi {
            return Err(Error::Overshoot { psi_i: p, psi });
        }
    }
    let keep = |p: u32| 1.0 - 1.0 / (psi - p) as f64;
    // Horner-style accumulation from the last position backwards.
    let mut tail = 1.0;
    let mut sum = 0.0;
    for &p in psi_list.iter().rev() {
        sum += tail / (psi - p) as f64;
        tail *= keep(p);
    }
    Ok(total * (sum + tail / psi as f64))
}

/// Expected wait on a busy IU before it turns idle:
/// `μ ln(p10 / p_th) + T_s`, with the exact one-slot release probability.
pub fn busy_wait_exact(mu: f64, slot: f64, p_th: f64) -> Result<f64> {
    positive("mu", mu)?;
    positive("slot", slot)?;
    positive("p_th", p_th)?;
    let p10 = -libm::expm1(-slot / mu);
    Ok(mu * libm::log(p10 / p_th) + slot)
}

/// Same wait with `p10 ≈ T_s / μ`: `μ ln(T_s / (μ p_th)) + T_s`.
pub fn busy_wait_taylor(mu: f64, slot: f64, p_th: f64) -> Result<f64> {
    positive("mu", mu)?;
    positive("slot", slot)?;
    positive("p_th", p_th)?;
    Ok(mu * libm::log(slot / (mu * p_th)) + slot)
}

/// Exact minus Taylor wait; always nonpositive since `1 − e^{−x} ≤ x`.
pub fn taylor_gap(mu: f64, slot: f64, p_th: f64) -> Result<f64> {
    Ok(busy_wait_exact(mu, slot, p_th)? - busy_wait_taylor(mu, slot, p_th)?)
}

/// `T_1` after S waited `t0` on a busy IU.
pub fn first_limit_after_wait(total: f64, psi: u32, psi_1: u32, t0: f64) -> Result<f64> {
    let limits = recursion(total, psi, &[psi_1], &[t0])?;
    Ok(limits[1])
}
