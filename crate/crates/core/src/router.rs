//! Hop-by-hop route construction.
//!
//! At every position the transmitter scans the half-disc of radius `r`
//! facing D. If D itself is in range and the direct link carries a nonzero
//! mode, the route ends there. Otherwise idle IUs that make progress are
//! filtered by the availability constraint `τ_req ≤ ν_I` and the one with
//! the smallest `τ_req` is chosen (least remaining distance, then lower id,
//! break ties). When no IU qualifies the transmitter may defer once for the
//! deferral window `η_w`, rescan, and finally fall back to a single RIS
//! reflection or, failing that, a double reflection through the nearest RIS
//! and one RIS in its own half-disc.
//!
//! Time is a slot clock. Every random quantity is looked up by content in an
//! [`Oracles`] value, so variants routed on the same seed see the same
//! channels and traffic.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use crate::channel::{
    align_double_phases, direct_received_power, optimal_single_snr, DoubleCascade, FadingField, FadingVector,
    LinkBudgetParams, RateModel,
};
use crate::delaymodel::{DelayBudget, HopDelay};
use crate::error::{Error, Result};
use crate::linkbudget::{
    build_mode_table, harvested_energy_for_transfer, threshold_linear, transfer_slots, transfer_slots_at_rate,
    HarvesterParams, ModeTable, TransferDemand, TransmissionMode,
};
use crate::topology::{hops_consumed, min_hops, NodeId, NodeKind, Position, Topology};
use crate::traffic::{deferral_window, duration_of_idleness, TrafficField, TrafficProfile, TrafficState};
use crate::{db_to_linear, dbm_to_watts};

/// Everything the router needs besides the topology and the random fields.
#[derive(Debug, Clone)]
pub struct RouterConfig {
    pub link: LinkBudgetParams,
    pub modes: ModeTable,
    pub demand: TransferDemand,
    pub harvester: HarvesterParams,
    pub rate_model: RateModel,
    /// Slot length `T_s` in seconds.
    pub slot: f64,
    /// End-to-end budget `T_d` in seconds.
    pub delay_budget: f64,
    /// Tolerance for the idle-duration estimate.
    pub delta: f64,
    pub p_th: f64,
    /// Alternating-alignment rounds for double reflections.
    pub align_rounds: usize,
}

impl RouterConfig {
    /// 1 W transmit power, 10 dBm processing, −35.3 dB path loss at 1 m,
    /// exponents 4.2 / 2, −100 dBm noise, K = 10 dB, 100 µs slots, 50 ms
    /// budget, `M_b = 1000`, `ε = 1e-4`, 4 packets of 8 bits.
    pub fn reference() -> Self {
        Self {
            link: LinkBudgetParams {
                rho_l: db_to_linear(-35.3),
                alpha_d2d: 4.2,
                alpha_other: 2.0,
                noise_power: dbm_to_watts(-100.0),
                tx_power: dbm_to_watts(30.0),
                rician_k_db: 10.0,
            },
            modes: build_mode_table(1e-6).expect("valid target BER"),
            demand: TransferDemand {
                packets: 4,
                bits_per_packet: 8,
                proc_power: dbm_to_watts(10.0),
            },
            harvester: HarvesterParams {
                max_power: 0.024,
                slope: 150.0,
                threshold: 0.014,
            },
            rate_model: RateModel::FiniteBlocklength {
                blocklength: 1000.0,
                epsilon: 1e-4,
            },
            slot: 1e-4,
            delay_budget: 0.05,
            delta: 0.1,
            p_th: 0.01,
            align_rounds: 20,
        }
    }
}

/// Routing strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// IUs first, then single and double reflections.
    Drams,
    /// Never uses a double reflection.
    SingleRisOnly,
    /// Every RIS hop is a double reflection.
    DoubleRisOnly,
    /// Direct hops always use the constellation with `bits` bits per symbol.
    FixedMode { bits: u32 },
}

impl Variant {
    pub fn allows_single(self) -> bool {
        !matches!(self, Variant::DoubleRisOnly)
    }

    pub fn allows_double(self) -> bool {
        !matches!(self, Variant::SingleRisOnly)
    }

    /// Mode used on a direct link of linear SNR `snr`.
    pub fn mode_for(self, modes: &ModeTable, snr: f64) -> TransmissionMode {
        match self {
            Variant::FixedMode { bits } => match modes.by_bits(bits) {
                Some(m) if crate::linear_to_db(snr) >= m.snr_lower_db => m,
                _ => modes.no_transmission(),
            },
            _ => modes.select_linear(snr),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Drams => "drams",
            Variant::SingleRisOnly => "single-ris-only",
            Variant::DoubleRisOnly => "double-ris-only",
            Variant::FixedMode { .. } => "no-adaptive-mod",
        }
    }
}

/// Channel and traffic realizations of one replication.
#[derive(Debug, Clone)]
pub struct Oracles {
    pub fading: FadingField,
    pub traffic: TrafficField,
}

impl Oracles {
    pub fn new(seed: u64, rician_k_db: f64, node_count: usize) -> Self {
        Self {
            fading: FadingField { seed, rician_k_db },
            traffic: TrafficField::new(seed, node_count),
        }
    }
}

/// Borrowed inputs shared by every step of one route.
#[derive(Debug, Clone, Copy)]
pub struct RouteContext<'a> {
    pub topo: &'a Topology,
    pub cfg: &'a RouterConfig,
    pub variant: Variant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HopKind {
    /// Device-to-device transfer to an IU or to D.
    Direct { to: NodeId, constellation: u32 },
    SingleRis { ris: NodeId, to: NodeId },
    DoubleRis { first: NodeId, second: NodeId, to: NodeId },
    /// Deferral at the current position.
    Wait { slots: u64 },
    Terminate,
}

impl HopKind {
    pub fn receiver(&self) -> Option<NodeId> {
        match *self {
            HopKind::Direct { to, .. } | HopKind::SingleRis { to, .. } | HopKind::DoubleRis { to, .. } => Some(to),
            HopKind::Wait { .. } | HopKind::Terminate => None,
        }
    }

    pub fn ris_count(&self) -> usize {
        match self {
            HopKind::SingleRis { .. } => 1,
            HopKind::DoubleRis { .. } => 2,
            _ => 0,
        }
    }

    pub fn is_transfer(&self) -> bool {
        self.receiver().is_some()
    }

    pub fn label(&self) -> &'static str {
        match self {
            HopKind::Direct { .. } => "direct",
            HopKind::SingleRis { .. } => "single_ris",
            HopKind::DoubleRis { .. } => "double_ris",
            HopKind::Wait { .. } => "wait",
            HopKind::Terminate => "terminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopChoice {
    pub kind: HopKind,
    pub from: NodeId,
    /// Clock at which the transfer (or the wait) starts.
    pub start_slot: u64,
    /// Transfer slots `τ`, or the wait length.
    pub slots_used: u64,
    /// Slots spent deciding on a RIS fallback before `start_slot`.
    pub decision_slots: u64,
    /// Bits per symbol on direct hops, bits per channel use on RIS hops.
    pub rate: f64,
    /// Linear SNR of the link as routed.
    pub snr: f64,
    /// Energy harvested by the receiving IU, joules.
    pub harvested: f64,
    /// Distance from the receiver (or the waiting node) to D.
    pub remaining_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureReason {
    NoIuNoRis,
    DelayExceeded,
    DeadEndAfterDoubleRis,
    DeadEndAfterSingleRis,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureReason::NoIuNoRis => "no IU and no RIS in range",
            FailureReason::DelayExceeded => "delay budget exceeded",
            FailureReason::DeadEndAfterDoubleRis => "dead end after double reflection",
            FailureReason::DeadEndAfterSingleRis => "dead end after single reflection",
        })
    }
}

/// Decisions taken where the procedure leaves a choice open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LedgerNote {
    /// The deferral window alone exceeded the position's budget, so the
    /// transmitter went straight to the RIS fallback.
    WaitSkipped { position: usize, window: u64 },
    /// An IU lay `psi_i ≥ Ψ` radii from S; its hop count was clamped.
    OvershootClamped { position: usize, psi_i: u32 },
}

/// Budget bookkeeping of one position along the route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionRecord {
    pub node: NodeId,
    /// `T_{d_i}` in seconds.
    pub limit: f64,
    pub waited_slots: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteLedger {
    pub hops: Vec<HopChoice>,
    pub total_slots: u64,
    pub success: bool,
    pub failure_reason: Option<FailureReason>,
    pub notes: Vec<LedgerNote>,
    pub positions: Vec<PositionRecord>,
    pub budget: DelayBudget,
}

impl RouteLedger {
    pub fn transfers(&self) -> impl Iterator<Item = &HopChoice> {
        self.hops.iter().filter(|h| h.kind.is_transfer())
    }

    /// `χ`: number of transfer hops.
    pub fn hop_count(&self) -> usize {
        self.transfers().count()
    }

    pub fn ris_count(&self) -> usize {
        self.hops.iter().map(|h| h.kind.ris_count()).sum()
    }

    pub fn harvested(&self) -> f64 {
        self.hops.iter().map(|h| h.harvested).sum()
    }

    /// Node sequence such as `S → R1 → U3 → R3+R4 → U5 → D`.
    pub fn trace(&self, topo: &Topology) -> String {
        let mut out = String::new();
        let _ = write!(out, "{}", topo.node(topo.source()).label());
        for h in &self.hops {
            let label = |id: NodeId| topo.node(id).label();
            let _ = match h.kind {
                HopKind::Direct { to, .. } => write!(out, " → {}", label(to)),
                HopKind::SingleRis { ris, to } => write!(out, " → {} → {}", label(ris), label(to)),
                HopKind::DoubleRis { first, second, to } => {
                    write!(out, " → {}+{} → {}", label(first), label(second), label(to))
                }
                HopKind::Wait { .. } => Ok(()),
                HopKind::Terminate => write!(out, " → ✗"),
            };
        }
        if let Some(reason) = self.failure_reason {
            let _ = write!(out, " ({reason})");
        }
        out
    }

    /// Safety properties every ledger must satisfy; returns the violated
    /// ones by name.
    pub fn violations(&self, topo: &Topology, slot: f64, delay_budget: f64) -> Vec<&'static str> {
        let mut v = Vec::new();
        let slots: u64 = self.hops.iter().map(|h| h.slots_used + h.decision_slots).sum();
        if slots != self.total_slots {
            v.push("slot accounting");
        }
        if self.success {
            if self.total_slots as f64 * slot > delay_budget {
                v.push("delay budget exceeded on success");
            }
            let last = self.transfers().last().and_then(|h| h.kind.receiver());
            if last != Some(topo.destination()) {
                v.push("success without reaching D");
            }
        }
        if self.hops.iter().any(|h| h.kind.ris_count() > 2) {
            v.push("triple reflection");
        }
        for h in self.transfers() {
            let to = h.kind.receiver().expect("transfer hop");
            if !(topo.remaining_distance(to) < topo.remaining_distance(h.from)) {
                v.push("hop without progress");
            }
        }
        for w in self.hops.windows(2) {
            if matches!(w[0].kind, HopKind::Wait { .. }) && matches!(w[1].kind, HopKind::Wait { .. }) {
                v.push("consecutive waits");
            }
        }
        for p in &self.positions {
            if p.waited_slots > 0 && p.waited_slots as f64 * slot > p.limit {
                v.push("wait beyond position budget");
            }
        }
        v
    }
}

/// One member of the availability set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub node: NodeId,
    pub mode: TransmissionMode,
    /// `τ_req` in slots.
    pub slots: u64,
    pub snr: f64,
    pub received_power: f64,
    pub remaining: f64,
}

fn profile_of(topo: &Topology, id: NodeId) -> Result<TrafficProfile> {
    topo.node(id)
        .traffic
        .ok_or(Error::InvalidTopology("intermediate user without a traffic profile"))
}

fn is_idle(ctx: &RouteContext<'_>, oracles: &mut Oracles, id: NodeId, clock: u64) -> Result<bool> {
    let profile = profile_of(ctx.topo, id)?;
    Ok(oracles.traffic.state_at(id, &profile, clock) == TrafficState::Idle)
}

fn direct_candidate(
    ctx: &RouteContext<'_>,
    oracles: &Oracles,
    from: NodeId,
    to: NodeId,
    clock: u64,
) -> Result<Option<Candidate>> {
    let d = ctx.topo.distance(from, to);
    if !(d > 0.0) {
        return Ok(None);
    }
    let h = oracles.fading.link(from, to, clock);
    let power = direct_received_power(&ctx.cfg.link, h, d)?;
    let snr = power / ctx.cfg.link.noise_power;
    let mode = ctx.variant.mode_for(&ctx.cfg.modes, snr);
    if !mode.carries_data() {
        return Ok(None);
    }
    Ok(Some(Candidate {
        node: to,
        mode,
        slots: transfer_slots(&ctx.cfg.demand, &mode)?,
        snr,
        received_power: power,
        remaining: ctx.topo.remaining_distance(to),
    }))
}

/// IUs in the forward half-disc of `from` that are closer to D than `from`,
/// split into idle and busy at `clock`.
pub fn scan_ius(
    ctx: &RouteContext<'_>,
    oracles: &mut Oracles,
    from: NodeId,
    clock: u64,
) -> Result<(Vec<NodeId>, Vec<NodeId>)> {
    let topo = ctx.topo;
    let here = topo.remaining_distance(from);
    let mut idle = Vec::new();
    let mut busy = Vec::new();
    let found = topo.half_circle_scan(
        topo.node(from).position,
        topo.node(topo.destination()).position,
        &[NodeKind::Iu],
    );
    for id in found {
        if id == from || !(topo.remaining_distance(id) < here) {
            continue;
        }
        if is_idle(ctx, oracles, id, clock)? {
            idle.push(id);
        } else {
            busy.push(id);
        }
    }
    Ok((idle, busy))
}

/// Idle IUs whose best mode finishes within their estimated idle window.
pub fn availability_set(
    ctx: &RouteContext<'_>,
    oracles: &Oracles,
    from: NodeId,
    idle: &[NodeId],
    clock: u64,
) -> Result<Vec<Candidate>> {
    let mut out = Vec::new();
    for &id in idle {
        let Some(c) = direct_candidate(ctx, oracles, from, id, clock)? else {
            continue;
        };
        let nu = duration_of_idleness(&profile_of(ctx.topo, id)?, ctx.cfg.delta)?;
        if c.slots as f64 <= nu {
            out.push(c);
        }
    }
    Ok(out)
}

/// Smallest `τ_req`, then least remaining distance, then lower id.
pub fn select_iu(aset: &[Candidate]) -> Result<Candidate> {
    aset.iter()
        .min_by(|a, b| {
            a.slots
                .cmp(&b.slots)
                .then(a.remaining.total_cmp(&b.remaining))
                .then(a.node.cmp(&b.node))
        })
        .copied()
        .ok_or(Error::EmptyAvailability)
}

/// A reflected hop found by the fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisHop {
    pub kind: HopKind,
    pub to: NodeId,
    pub rate: f64,
    pub slots: u64,
    pub snr: f64,
    pub received_power: f64,
    pub remaining: f64,
}

/// Idle IUs and D inside the half-disc of `ris` that are closer to D than
/// `from`.
fn reflect_targets(
    ctx: &RouteContext<'_>,
    oracles: &mut Oracles,
    from: NodeId,
    ris: NodeId,
    clock: u64,
) -> Result<Vec<NodeId>> {
    let topo = ctx.topo;
    let here = topo.remaining_distance(from);
    let mut out = Vec::new();
    let found = topo.half_circle_scan(
        topo.node(ris).position,
        topo.node(topo.destination()).position,
        &[NodeKind::Iu, NodeKind::Destination],
    );
    for id in found {
        if id == from || !(topo.remaining_distance(id) < here) {
            continue;
        }
        if topo.node(id).kind == NodeKind::Iu && !is_idle(ctx, oracles, id, clock)? {
            continue;
        }
        out.push(id);
    }
    Ok(out)
}

/// Turns a reflected SNR into a hop when the rate supports the demand and,
/// for IU receivers, the transfer fits the idle window.
fn qualify(ctx: &RouteContext<'_>, kind: HopKind, to: NodeId, snr: f64) -> Result<Option<RisHop>> {
    let cfg = ctx.cfg;
    let rate = cfg.rate_model.rate(snr)?;
    if !(rate > 0.0) {
        return Ok(None);
    }
    let slots = transfer_slots_at_rate(&cfg.demand, rate)?;
    if ctx.topo.node(to).kind == NodeKind::Iu {
        let nu = duration_of_idleness(&profile_of(ctx.topo, to)?, cfg.delta)?;
        if slots as f64 > nu {
            return Ok(None);
        }
    }
    Ok(Some(RisHop {
        kind,
        to,
        rate,
        slots,
        snr,
        received_power: snr * cfg.link.noise_power,
        remaining: ctx.topo.remaining_distance(to),
    }))
}

/// Within one reflecting RIS: D if reachable, otherwise smallest `τ`, then
/// least remaining distance, then lower id.
fn pick(hops: &[RisHop], dest: NodeId) -> Option<RisHop> {
    if let Some(h) = hops.iter().find(|h| h.to == dest) {
        return Some(*h);
    }
    hops.iter()
        .min_by(|a, b| {
            a.slots
                .cmp(&b.slots)
                .then(a.remaining.total_cmp(&b.remaining))
                .then(a.to.cmp(&b.to))
        })
        .copied()
}

/// Among `groups` (a reflecting RIS and its candidate targets, in scan
/// order), picks the group whose qualifying targets get closest to D and
/// returns its best hop.
///
/// Targets are tried in increasing remaining distance across all groups, so
/// only the first qualifying target's group is evaluated in full.
fn best_group(
    groups: &[(NodeId, Vec<NodeId>)],
    dest: NodeId,
    topo: &Topology,
    mut eval: impl FnMut(usize, NodeId) -> Result<Option<RisHop>>,
) -> Result<Option<RisHop>> {
    let mut order: Vec<(f64, usize, NodeId)> = Vec::new();
    for (g, (_, targets)) in groups.iter().enumerate() {
        for &t in targets {
            order.push((topo.remaining_distance(t), g, t));
        }
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for &(_, g, t) in &order {
        if let Some(first) = eval(g, t)? {
            let mut hops = alloc::vec![first];
            for &other in &groups[g].1 {
                if other != t {
                    if let Some(h) = eval(g, other)? {
                        hops.push(h);
                    }
                }
            }
            return Ok(pick(&hops, dest));
        }
    }
    Ok(None)
}

/// Reflected hop from `from`, or the reason the route stops here.
pub fn ris_fallback(
    ctx: &RouteContext<'_>,
    oracles: &mut Oracles,
    from: NodeId,
    clock: u64,
) -> Result<core::result::Result<RisHop, FailureReason>> {
    let topo = ctx.topo;
    let cfg = ctx.cfg;
    let dest = topo.destination();
    let dest_pos = topo.node(dest).position;
    let from_pos = topo.node(from).position;
    let riss = topo.half_circle_scan(from_pos, dest_pos, &[NodeKind::Ris]);
    if riss.is_empty() {
        return Ok(Err(FailureReason::NoIuNoRis));
    }

    if ctx.variant.allows_single() {
        let mut groups = Vec::new();
        for &ris in &riss {
            let targets = reflect_targets(ctx, oracles, from, ris, clock)?;
            if !targets.is_empty() {
                groups.push((ris, targets));
            }
        }
        let mut incident: Vec<Option<FadingVector>> = alloc::vec![None; groups.len()];
        let fading = oracles.fading;
        let found = best_group(&groups, dest, topo, |g, t| {
            let ris = groups[g].0;
            let n = topo.node(ris).ris_elements;
            let ris_pos = topo.node(ris).position;
            let (d_in, d_out) = (from_pos.distance(&ris_pos), ris_pos.distance(&topo.node(t).position));
            if !(d_in > 0.0 && d_out > 0.0) {
                return Ok(None);
            }
            let h_in = incident[g].get_or_insert_with(|| fading.vector(from, ris, n, clock));
            let h_out = fading.vector(ris, t, n, clock);
            let snr = optimal_single_snr(&cfg.link, h_in, &h_out, d_in, d_out)?;
            qualify(ctx, HopKind::SingleRis { ris, to: t }, t, snr)
        })?;
        if let Some(h) = found {
            return Ok(Ok(h));
        }
    }

    if !ctx.variant.allows_double() {
        return Ok(Err(FailureReason::DeadEndAfterSingleRis));
    }
    let first = riss[0];
    let first_pos = topo.node(first).position;
    let d_in = from_pos.distance(&first_pos);
    if !(d_in > 0.0) {
        return Ok(Err(FailureReason::DeadEndAfterDoubleRis));
    }
    let mut groups = Vec::new();
    for second in topo.half_circle_scan(first_pos, dest_pos, &[NodeKind::Ris]) {
        let targets = reflect_targets(ctx, oracles, from, second, clock)?;
        if !targets.is_empty() {
            groups.push((second, targets));
        }
    }
    let fading = oracles.fading;
    let n_first = topo.node(first).ris_elements;
    let h_in = fading.vector(from, first, n_first, clock);
    let mut mids = alloc::vec![None; groups.len()];
    let found = best_group(&groups, dest, topo, |g, t| {
        let second = groups[g].0;
        let n_second = topo.node(second).ris_elements;
        let second_pos = topo.node(second).position;
        let d_mid = first_pos.distance(&second_pos);
        let d_out = second_pos.distance(&topo.node(t).position);
        if !(d_mid > 0.0 && d_out > 0.0) {
            return Ok(None);
        }
        let h_mid = mids[g].get_or_insert_with(|| fading.matrix(first, second, n_second, n_first, clock));
        let h_out = fading.vector(second, t, n_second, clock);
        let (phase_i, phase_j) = align_double_phases(&h_in, h_mid, &h_out, cfg.align_rounds)?;
        let cascade = DoubleCascade {
            h_in: &h_in,
            phase_i: &phase_i,
            h_mid,
            phase_j: &phase_j,
            h_out: &h_out,
            d_in,
            d_mid,
            d_out,
        };
        let snr = cascade.received_power(&cfg.link)? / cfg.link.noise_power;
        qualify(ctx, HopKind::DoubleRis { first, second, to: t }, t, snr)
    })?;
    Ok(found.ok_or(FailureReason::DeadEndAfterDoubleRis))
}

/// Routes S to D on one replication.
pub fn route(ctx: &RouteContext<'_>, oracles: &mut Oracles) -> Result<RouteLedger> {
    let topo = ctx.topo;
    let cfg = ctx.cfg;
    let source = topo.source();
    let dest = topo.destination();
    let r = topo.coverage_radius();
    let source_pos = topo.node(source).position;
    let psi = min_hops(topo.distance(source, dest), r)?;
    let mut ledger = RouteLedger {
        hops: Vec::new(),
        total_slots: 0,
        success: false,
        failure_reason: None,
        notes: Vec::new(),
        positions: Vec::new(),
        budget: DelayBudget::new(cfg.delay_budget, psi)?,
    };
    if cfg.delay_budget < cfg.slot {
        ledger.failure_reason = Some(FailureReason::DelayExceeded);
        return Ok(ledger);
    }
    let within_budget = |clock: u64| clock as f64 * cfg.slot <= cfg.delay_budget;

    let mut current = source;
    let mut clock = 0u64;
    loop {
        let position = ledger.budget.position();
        let limit = ledger.budget.current_limit();
        if limit < 0.0 {
            ledger.failure_reason = Some(FailureReason::DelayExceeded);
            break;
        }
        let mut waited = 0u64;
        let direct = loop {
            let dest_in_range = topo.distance(current, dest) <= r;
            if dest_in_range {
                if let Some(c) = direct_candidate(ctx, oracles, current, dest, clock)? {
                    break Some(c);
                }
            }
            let (idle, busy) = scan_ius(ctx, oracles, current, clock)?;
            let aset = availability_set(ctx, oracles, current, &idle, clock)?;
            if let Ok(c) = select_iu(&aset) {
                break Some(c);
            }
            if waited > 0 || busy.is_empty() {
                break None;
            }
            let mut profiles = Vec::with_capacity(busy.len());
            for &b in &busy {
                profiles.push(profile_of(topo, b)?);
            }
            let window = deferral_window(&profiles, cfg.p_th)?;
            if window as f64 * cfg.slot > limit || !within_budget(clock + window) {
                ledger.notes.push(LedgerNote::WaitSkipped { position, window });
                break None;
            }
            ledger.hops.push(HopChoice {
                kind: HopKind::Wait { slots: window },
                from: current,
                start_slot: clock,
                slots_used: window,
                decision_slots: 0,
                rate: 0.0,
                snr: 0.0,
                harvested: 0.0,
                remaining_distance: topo.remaining_distance(current),
            });
            clock += window;
            waited = window;
        };

        let (delay, next) = match direct {
            Some(c) => {
                let harvested = if topo.node(c.node).kind == NodeKind::Iu {
                    harvested_energy_for_transfer(&cfg.harvester, c.received_power, c.slots, cfg.slot)
                } else {
                    0.0
                };
                ledger.hops.push(HopChoice {
                    kind: HopKind::Direct {
                        to: c.node,
                        constellation: c.mode.constellation,
                    },
                    from: current,
                    start_slot: clock,
                    slots_used: c.slots,
                    decision_slots: 0,
                    rate: c.mode.bits as f64,
                    snr: c.snr,
                    harvested,
                    remaining_distance: c.remaining,
                });
                clock += c.slots;
                (
                    HopDelay::Direct {
                        wait: waited as f64 * cfg.slot,
                    },
                    c.node,
                )
            }
            None => {
                clock += 1;
                match ris_fallback(ctx, oracles, current, clock)? {
                    Ok(h) => {
                        let harvested = if topo.node(h.to).kind == NodeKind::Iu {
                            harvested_energy_for_transfer(&cfg.harvester, h.received_power, h.slots, cfg.slot)
                        } else {
                            0.0
                        };
                        ledger.hops.push(HopChoice {
                            kind: h.kind,
                            from: current,
                            start_slot: clock,
                            slots_used: h.slots,
                            decision_slots: 1,
                            rate: h.rate,
                            snr: h.snr,
                            harvested,
                            remaining_distance: h.remaining,
                        });
                        clock += h.slots;
                        (
                            HopDelay::Ris {
                                wait: (waited + 1) as f64 * cfg.slot,
                            },
                            h.to,
                        )
                    }
                    Err(reason) => {
                        ledger.hops.push(HopChoice {
                            kind: HopKind::Terminate,
                            from: current,
                            start_slot: clock,
                            slots_used: 0,
                            decision_slots: 1,
                            rate: 0.0,
                            snr: 0.0,
                            harvested: 0.0,
                            remaining_distance: topo.remaining_distance(current),
                        });
                        ledger.positions.push(PositionRecord {
                            node: current,
                            limit,
                            waited_slots: waited,
                        });
                        ledger.failure_reason = Some(reason);
                        break;
                    }
                }
            }
        };
        ledger.positions.push(PositionRecord {
            node: current,
            limit,
            waited_slots: waited,
        });
        if !within_budget(clock) {
            ledger.failure_reason = Some(FailureReason::DelayExceeded);
            break;
        }
        if next == dest {
            ledger.success = true;
            break;
        }
        let mut psi_i = hops_consumed(source_pos, topo.node(next).position, r)?;
        if psi_i >= psi {
            ledger.notes.push(LedgerNote::OvershootClamped {
                position: position + 1,
                psi_i,
            });
            psi_i = psi - 1;
        }
        ledger.budget.advance(delay, psi_i)?;
        current = next;
    }
    ledger.total_slots = clock;
    Ok(ledger)
}

/// Routes with a fresh set of oracles keyed by `seed`.
pub fn route_seeded(topo: &Topology, cfg: &RouterConfig, variant: Variant, seed: u64) -> Result<RouteLedger> {
    let mut oracles = Oracles::new(seed, cfg.link.rician_k_db, topo.nodes().len());
    route(&RouteContext { topo, cfg, variant }, &mut oracles)
}

/// Comparison strategies run through the same procedure.
pub fn baseline_route(variant: Variant, topo: &Topology, cfg: &RouterConfig, seed: u64) -> Result<RouteLedger> {
    route_seeded(topo, cfg, variant, seed)
}

/// Whether a routed hop breaks when its endpoints have moved to `tx` and
/// `rx` by the end of the transfer. RIS and D positions are fixed.
///
/// A hop fails when a moved endpoint is out of range of its counterpart, or
/// when the SNR at the new distances (same fading and phases) no longer
/// supports the chosen mode (direct hops) or the rate needed to finish in
/// the booked slots (RIS hops).
pub fn hop_outage(ctx: &RouteContext<'_>, hop: &HopChoice, tx: Position, rx: Position) -> bool {
    let topo = ctx.topo;
    let cfg = ctx.cfg;
    let r = topo.coverage_radius();
    let from0 = topo.node(hop.from).position;
    let ratio = |a0: f64, a1: f64, alpha: f64| libm::pow(a0 / a1, alpha);
    let rate_outage = |snr: f64| match cfg.rate_model.rate(snr) {
        Ok(rate) => match transfer_slots_at_rate(&cfg.demand, rate) {
            Ok(slots) => slots > hop.slots_used,
            Err(_) => true,
        },
        Err(_) => true,
    };
    match hop.kind {
        HopKind::Direct { to, constellation } => {
            let d0 = from0.distance(&topo.node(to).position);
            let d1 = tx.distance(&rx);
            if d1 > r {
                return true;
            }
            let snr = hop.snr * ratio(d0, d1, cfg.link.alpha_d2d);
            let bits = constellation.trailing_zeros();
            match cfg.modes.by_bits(bits) {
                Some(mode) => snr < threshold_linear(&mode),
                None => true,
            }
        }
        HopKind::SingleRis { ris, to } => {
            let p = topo.node(ris).position;
            let (din0, dout0) = (from0.distance(&p), p.distance(&topo.node(to).position));
            let (din1, dout1) = (tx.distance(&p), p.distance(&rx));
            if din1 > r || dout1 > r {
                return true;
            }
            let a = cfg.link.alpha_other;
            rate_outage(hop.snr * ratio(din0, din1, a) * ratio(dout0, dout1, a))
        }
        HopKind::DoubleRis { first, second, to } => {
            let p = topo.node(first).position;
            let q = topo.node(second).position;
            let (din0, dout0) = (from0.distance(&p), q.distance(&topo.node(to).position));
            let (din1, dout1) = (tx.distance(&p), q.distance(&rx));
            if din1 > r || dout1 > r {
                return true;
            }
            let a = cfg.link.alpha_other;
            rate_outage(hop.snr * ratio(din0, din1, a) * ratio(dout0, dout1, a))
        }
        HopKind::Wait { .. } | HopKind::Terminate => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Arena, Node};
    use alloc::vec;

    fn arena() -> Arena {
        Arena {
            width: 400.0,
            height: 400.0,
        }
    }

    fn idle_profile() -> TrafficProfile {
        // practically never busy
        TrafficProfile::new(1e6, 1e-3, 1e-4).unwrap()
    }

    fn cand(node: u32, slots: u64, remaining: f64) -> Candidate {
        Candidate {
            node: NodeId(node),
            mode: build_mode_table(1e-6).unwrap().by_bits(2).unwrap(),
            slots,
            snr: 100.0,
            received_power: 1e-11,
            remaining,
        }
    }

    #[test]
    fn select_iu_rules() {
        let s = select_iu(&[cand(5, 7, 10.0), cand(3, 3, 90.0), cand(4, 5, 1.0)]).unwrap();
        assert_eq!(s.node, NodeId(3));
        let s = select_iu(&[cand(5, 3, 250.0), cand(6, 3, 200.0)]).unwrap();
        assert_eq!(s.node, NodeId(6));
        let s = select_iu(&[cand(9, 3, 200.0), cand(6, 3, 200.0)]).unwrap();
        assert_eq!(s.node, NodeId(6));
        assert_eq!(select_iu(&[]), Err(Error::EmptyAvailability));
    }

    #[test]
    fn tiny_budget_fails_immediately() {
        let topo = Topology::new(
            arena(),
            60.0,
            vec![
                Node::source(Position::new(20.0, 200.0)),
                Node::destination(Position::new(60.0, 200.0)),
            ],
        )
        .unwrap();
        let mut cfg = RouterConfig::reference();
        cfg.delay_budget = 0.5e-4;
        let l = route_seeded(&topo, &cfg, Variant::Drams, 1).unwrap();
        assert!(!l.success);
        assert_eq!(l.failure_reason, Some(FailureReason::DelayExceeded));
        assert!(l.hops.is_empty());
    }

    #[test]
    fn no_ris_no_iu() {
        let topo = Topology::new(
            arena(),
            60.0,
            vec![
                Node::source(Position::new(20.0, 200.0)),
                Node::destination(Position::new(380.0, 200.0)),
            ],
        )
        .unwrap();
        let l = route_seeded(&topo, &RouterConfig::reference(), Variant::Drams, 1).unwrap();
        assert_eq!(l.failure_reason, Some(FailureReason::NoIuNoRis));
    }

    #[test]
    fn iu_chain_uses_no_ris() {
        let mut nodes = vec![
            Node::source(Position::new(20.0, 200.0)),
            Node::destination(Position::new(200.0, 200.0)),
        ];
        for k in 1..9 {
            nodes.push(Node::iu(Position::new(20.0 + 20.0 * k as f64, 200.0), idle_profile()));
        }
        nodes.push(Node::ris(Position::new(40.0, 220.0), 16));
        let topo = Topology::new(arena(), 60.0, nodes).unwrap();
        let cfg = RouterConfig::reference();
        let l = route_seeded(&topo, &cfg, Variant::Drams, 3).unwrap();
        assert!(l.success, "{}", l.trace(&topo));
        assert_eq!(l.ris_count(), 0);
        assert!(l.violations(&topo, cfg.slot, cfg.delay_budget).is_empty());
        assert!(l.trace(&topo).starts_with("S → U"));
        assert!(l.trace(&topo).ends_with("→ D"));
    }

    #[test]
    fn ris_only_grid() {
        let mut nodes = vec![
            Node::source(Position::new(20.0, 200.0)),
            Node::destination(Position::new(140.0, 200.0)),
        ];
        for k in 0..6 {
            nodes.push(Node::ris(Position::new(40.0 + 20.0 * k as f64, 210.0), 32));
        }
        let topo = Topology::new(arena(), 45.0, nodes).unwrap();
        let cfg = RouterConfig::reference();
        let l = route_seeded(&topo, &cfg, Variant::Drams, 5).unwrap();
        assert!(l.violations(&topo, cfg.slot, cfg.delay_budget).is_empty());
        for h in l.transfers() {
            assert!(h.kind.ris_count() > 0 || h.kind.receiver() == Some(topo.destination()));
        }
    }
}
