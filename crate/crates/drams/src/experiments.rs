//! Seeded Monte Carlo runs over parameter grids.
//!
//! Replication `k` of every grid point uses the same derived seed, so grid
//! points and routing variants are compared on common random numbers: the
//! same IU placements (the first `n` IUs of a denser topology are the IUs of
//! a sparser one), the same traffic chains and the same fading.

use drams_core::metrics::{route_metrics, data_throughput};
use drams_core::rng::{derive, stream};
use drams_core::router::{
    hop_outage, route, Oracles, RouteContext, RouteLedger, RouterConfig, Variant,
};
use drams_core::topology::{Arena, Node, NodeKind, Position, Topology};
use drams_core::traffic::{
    duration_of_busyness, duration_of_idleness, step_with, TrafficProfile, TrafficState,
};
use rand::Rng;
use rayon::prelude::*;

use crate::config::Config;

const TAG_REPLICATION: u64 = 0x5245_504c;
const TAG_MOBILITY: u64 = 0x4d4f_4249;
const TAG_TRAFFIC_CHECK: u64 = 0x5452_4146;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Trajectory,
    CoverageSweep,
    DensitySweep,
    TrafficValidation,
    Comparison,
    Mobility,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Trajectory => "route",
            ExperimentKind::CoverageSweep => "coverage",
            ExperimentKind::DensitySweep => "density",
            ExperimentKind::TrafficValidation => "traffic",
            ExperimentKind::Comparison => "compare",
            ExperimentKind::Mobility => "mobility",
        }
    }
}

/// Seed of replication `rep`, shared by every grid point and variant.
pub fn replication_seed(seed: u64, rep: usize) -> u64 {
    derive(seed, &[TAG_REPLICATION, rep as u64])
}

/// One point of a route sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub coverage: f64,
    pub density: usize,
    /// Maximum IU speed; `None` for static runs.
    pub vmax: Option<f64>,
}

/// A routing strategy under a given router configuration.
#[derive(Debug, Clone)]
pub struct Arm {
    pub label: String,
    pub variant: Variant,
    pub router: RouterConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteRecord {
    pub scenario_id: String,
    pub seed: u64,
    pub variant: String,
    pub coverage_m: f64,
    pub density: usize,
    pub vmax: Option<f64>,
    pub success: bool,
    /// Failure reason, or `outage` when a moving IU broke a hop.
    pub failure: Option<String>,
    pub d_t: f64,
    pub d_t_normalized: f64,
    pub e_eff: Option<f64>,
    pub ris_count: usize,
    pub hops: usize,
    /// Safety violations found in the ledger; always empty in a correct run.
    pub violations: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variant: String,
    pub coverage_m: f64,
    pub density: usize,
    pub vmax: Option<f64>,
    pub replications: usize,
    pub success_rate: f64,
    pub mean_d_t: f64,
    pub se_d_t: f64,
    pub mean_d_t_normalized: f64,
    pub se_d_t_normalized: f64,
    pub mean_e_eff: f64,
    pub se_e_eff: f64,
    pub mean_ris_count: f64,
    pub se_ris_count: f64,
    pub mean_hops: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub routes: Vec<RouteRecord>,
    pub summary: Vec<SummaryRow>,
}

#[derive(Debug)]
pub enum ExperimentError {
    Core(drams_core::Error),
    Config(String),
}

impl std::fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExperimentError::Core(e) => write!(f, "{e}"),
            ExperimentError::Config(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<drams_core::Error> for ExperimentError {
    fn from(e: drams_core::Error) -> Self {
        ExperimentError::Core(e)
    }
}

pub fn build_topology(cfg: &Config, coverage: f64, density: usize, seed: u64) -> Result<Topology, ExperimentError> {
    Ok(Topology::generate(&cfg.topology_spec(coverage, density), seed, |k| cfg.profile(k))?)
}

/// Mean and standard error; `(0, 0)` for no samples, SE 0 for one.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn scenario_id(kind: ExperimentKind, p: &GridPoint, rep: usize) -> String {
    match p.vmax {
        Some(v) => format!("{}-r{}-n{}-v{}-{}", kind.name(), p.coverage, p.density, v, rep),
        None => format!("{}-r{}-n{}-{}", kind.name(), p.coverage, p.density, rep),
    }
}

fn record(
    cfg: &Config,
    arm: &Arm,
    topo: &Topology,
    ledger: &RouteLedger,
    outage: bool,
    id: String,
    seed: u64,
    p: &GridPoint,
) -> Result<RouteRecord, ExperimentError> {
    let router = &arm.router;
    let violations = ledger.violations(topo, router.slot, router.delay_budget);
    let mut rec = RouteRecord {
        scenario_id: id,
        seed,
        variant: arm.label.clone(),
        coverage_m: p.coverage,
        density: p.density,
        vmax: p.vmax,
        success: ledger.success && !outage,
        failure: ledger.failure_reason.map(|f| format!("{f:?}")),
        d_t: 0.0,
        d_t_normalized: 0.0,
        e_eff: None,
        ris_count: ledger.ris_count(),
        hops: ledger.hop_count(),
        violations,
    };
    if ledger.success {
        if outage {
            rec.failure = Some("Outage".to_string());
        } else {
            let m = route_metrics(
                ledger,
                &router.demand,
                router.link.tx_power,
                router.slot,
                cfg.target_ber,
            )?;
            rec.d_t = data_throughput(ledger, cfg.target_ber, cfg.throughput())?;
            rec.d_t_normalized = m.throughput_normalized;
            rec.e_eff = m.energy_efficiency;
        }
    }
    Ok(rec)
}

/// Random-waypoint state of one moving node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityState {
    pub position: Position,
    pub waypoint: Position,
    /// Current speed in m/s, within `[0, v_max]`.
    pub velocity: f64,
    pub v_max: f64,
}

fn uniform_point<R: Rng + ?Sized>(arena: Arena, rng: &mut R) -> Position {
    Position::new(rng.random::<f64>() * arena.width, rng.random::<f64>() * arena.height)
}

impl MobilityState {
    /// Starts at `position` with a fresh waypoint and speed.
    pub fn start<R: Rng + ?Sized>(position: Position, v_max: f64, arena: Arena, rng: &mut R) -> Self {
        let waypoint = uniform_point(arena, rng);
        let velocity = rng.random::<f64>() * v_max;
        Self {
            position,
            waypoint,
            velocity,
            v_max,
        }
    }
}

/// Advances a node by `dt` seconds with zero pause time: on reaching its
/// waypoint it draws a new waypoint and speed and keeps moving for the rest
/// of the interval.
pub fn mobility_step<R: Rng + ?Sized>(mut s: MobilityState, dt: f64, arena: Arena, rng: &mut R) -> MobilityState {
    let mut left = dt;
    // bounded so a pathological speed draw cannot spin forever
    for _ in 0..100_000 {
        if !(left > 0.0 && s.velocity > 0.0) {
            break;
        }
        let dist = s.position.distance(&s.waypoint);
        let reach = s.velocity * left;
        if reach < dist {
            let f = reach / dist;
            s.position = Position::new(
                s.position.x + f * (s.waypoint.x - s.position.x),
                s.position.y + f * (s.waypoint.y - s.position.y),
            );
            break;
        }
        left -= dist / s.velocity;
        s.position = s.waypoint;
        s.waypoint = uniform_point(arena, rng);
        s.velocity = rng.random::<f64>() * s.v_max;
    }
    s
}

/// Position of `node` at time `t` of replication `seed` under speed cap
/// `v_max`. Only IUs move.
pub fn position_at(topo: &Topology, node: &Node, seed: u64, v_max: f64, t: f64) -> Position {
    if node.kind != NodeKind::Iu || v_max == 0.0 || t <= 0.0 {
        return node.position;
    }
    let mut rng = stream(seed, &[TAG_MOBILITY, node.id.0 as u64]);
    let s = MobilityState::start(node.position, v_max, topo.arena(), &mut rng);
    mobility_step(s, t, topo.arena(), &mut rng).position
}

/// True when some hop of a successful route breaks under mobility.
pub fn route_outage(ctx: &RouteContext<'_>, ledger: &RouteLedger, seed: u64, v_max: f64) -> bool {
    if v_max == 0.0 {
        return false;
    }
    let topo = ctx.topo;
    ledger.hops.iter().any(|h| {
        let Some(to) = h.kind.receiver() else {
            return false;
        };
        let t = (h.start_slot + h.slots_used) as f64 * ctx.cfg.slot;
        let tx = position_at(topo, topo.node(h.from), seed, v_max, t);
        let rx = position_at(topo, topo.node(to), seed, v_max, t);
        hop_outage(ctx, h, tx, rx)
    })
}

/// Routes every arm at every grid point for `replications` replications.
///
/// Work is spread over the current rayon pool; results come back in
/// (point, arm, replication) order whatever the thread count.
pub fn run_grid(
    cfg: &Config,
    kind: ExperimentKind,
    points: &[GridPoint],
    arms: &[Arm],
    replications: usize,
) -> Result<RunResult, ExperimentError> {
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..replications).map(move |r| (p, r)))
        .collect();
    let per_job: Vec<Result<Vec<RouteRecord>, ExperimentError>> = jobs
        .par_iter()
        .map(|&(pi, rep)| {
            let p = &points[pi];
            let seed = replication_seed(cfg.seed, rep);
            let topo = build_topology(cfg, p.coverage, p.density, seed)?;
            let mut out = Vec::with_capacity(arms.len());
            for arm in arms {
                let ctx = RouteContext {
                    topo: &topo,
                    cfg: &arm.router,
                    variant: arm.variant,
                };
                let mut oracles = Oracles::new(seed, arm.router.link.rician_k_db, topo.nodes().len());
                let ledger = route(&ctx, &mut oracles)?;
                let outage = ledger.success && route_outage(&ctx, &ledger, seed, p.vmax.unwrap_or(0.0));
                out.push(record(cfg, arm, &topo, &ledger, outage, scenario_id(kind, p, rep), seed, p)?);
            }
            Ok(out)
        })
        .collect();
    let mut by_job = Vec::with_capacity(per_job.len());
    for r in per_job {
        by_job.push(r?);
    }
    let mut routes = Vec::with_capacity(by_job.len() * arms.len());
    let mut summary = Vec::with_capacity(points.len() * arms.len());
    for (pi, p) in points.iter().enumerate() {
        for (ai, arm) in arms.iter().enumerate() {
            let group: Vec<RouteRecord> = (0..replications)
                .map(|rep| by_job[pi * replications + rep][ai].clone())
                .collect();
            summary.push(summarize(&arm.label, p, &group));
            routes.extend(group);
        }
    }
    Ok(RunResult { routes, summary })
}

/// Failed and outaged routes count as zero throughput; RIS and hop counts
/// average over successful routes; efficiency over successful routes with
/// a positive net energy.
pub fn summarize(label: &str, p: &GridPoint, group: &[RouteRecord]) -> SummaryRow {
    let ok: Vec<&RouteRecord> = group.iter().filter(|r| r.success).collect();
    let (mean_d_t, se_d_t) = mean_se(&group.iter().map(|r| r.d_t).collect::<Vec<_>>());
    let (mean_n, se_n) = mean_se(&group.iter().map(|r| r.d_t_normalized).collect::<Vec<_>>());
    let (mean_e, se_e) = mean_se(&ok.iter().filter_map(|r| r.e_eff).collect::<Vec<_>>());
    let (mean_ris, se_ris) = mean_se(&ok.iter().map(|r| r.ris_count as f64).collect::<Vec<_>>());
    let (mean_hops, _) = mean_se(&ok.iter().map(|r| r.hops as f64).collect::<Vec<_>>());
    SummaryRow {
        variant: label.to_string(),
        coverage_m: p.coverage,
        density: p.density,
        vmax: p.vmax,
        replications: group.len(),
        success_rate: if group.is_empty() {
            0.0
        } else {
            ok.len() as f64 / group.len() as f64
        },
        mean_d_t,
        se_d_t,
        mean_d_t_normalized: mean_n,
        se_d_t_normalized: se_n,
        mean_e_eff: mean_e,
        se_e_eff: se_e,
        mean_ris_count: mean_ris,
        se_ris_count: se_ris,
        mean_hops,
    }
}

pub fn drams_arm(cfg: &Config) -> Result<Arm, ExperimentError> {
    Ok(Arm {
        label: "drams".to_string(),
        variant: Variant::Drams,
        router: cfg.router().map_err(|e| ExperimentError::Config(e.to_string()))?,
    })
}

/// Coverage radius swept at each density.
pub fn coverage_sweep(cfg: &Config) -> Result<RunResult, ExperimentError> {
    let points: Vec<GridPoint> = cfg
        .density_grid
        .iter()
        .flat_map(|&density| {
            cfg.coverage_grid_m.iter().map(move |&coverage| GridPoint {
                coverage,
                density,
                vmax: None,
            })
        })
        .collect();
    run_grid(cfg, ExperimentKind::CoverageSweep, &points, &[drams_arm(cfg)?], cfg.replications)
}

/// IU density swept at each coverage radius.
pub fn density_sweep(cfg: &Config) -> Result<RunResult, ExperimentError> {
    let points: Vec<GridPoint> = cfg
        .density_sweep_coverage_m
        .iter()
        .flat_map(|&coverage| {
            cfg.density_sweep_grid.iter().map(move |&density| GridPoint {
                coverage,
                density,
                vmax: None,
            })
        })
        .collect();
    run_grid(cfg, ExperimentKind::DensitySweep, &points, &[drams_arm(cfg)?], cfg.replications)
}

/// The strategies compared over the coverage grid.
pub fn comparison_arms(cfg: &Config) -> Result<Vec<Arm>, ExperimentError> {
    let base = drams_arm(cfg)?;
    let mut shannon = cfg.clone();
    shannon.shannon_rate = true;
    let shannon_router = shannon.router().map_err(|e| ExperimentError::Config(e.to_string()))?;
    let mut finite = cfg.clone();
    finite.shannon_rate = false;
    let finite_router = finite.router().map_err(|e| ExperimentError::Config(e.to_string()))?;
    Ok(vec![
        Arm {
            label: "drams".to_string(),
            variant: Variant::Drams,
            router: finite_router.clone(),
        },
        Arm {
            label: "drams-shannon".to_string(),
            variant: Variant::Drams,
            router: shannon_router,
        },
        Arm {
            label: "no-adaptive-mod".to_string(),
            variant: Variant::FixedMode {
                bits: cfg.fixed_mode_bits,
            },
            router: finite_router.clone(),
        },
        Arm {
            label: "single-ris-only".to_string(),
            variant: Variant::SingleRisOnly,
            router: finite_router.clone(),
        },
        Arm {
            label: "double-ris-only".to_string(),
            variant: Variant::DoubleRisOnly,
            router: base.router,
        },
    ])
}

pub fn comparison(cfg: &Config) -> Result<RunResult, ExperimentError> {
    let points: Vec<GridPoint> = cfg
        .coverage_grid_m
        .iter()
        .map(|&coverage| GridPoint {
            coverage,
            density: cfg.iu_count,
            vmax: None,
        })
        .collect();
    run_grid(cfg, ExperimentKind::Comparison, &points, &comparison_arms(cfg)?, cfg.replications)
}

/// Speed cap swept at the mobility coverage radius.
pub fn mobility(cfg: &Config) -> Result<RunResult, ExperimentError> {
    let points: Vec<GridPoint> = cfg
        .vmax_grid_mps
        .iter()
        .map(|&v| GridPoint {
            coverage: cfg.mobility_coverage_m,
            density: cfg.iu_count,
            vmax: Some(v),
        })
        .collect();
    run_grid(cfg, ExperimentKind::Mobility, &points, &[drams_arm(cfg)?], cfg.replications)
}

/// One route on the configured topology; returns the topology too so the
/// caller can render a trace.
pub fn trajectory(cfg: &Config, variant: Variant) -> Result<(Topology, RouteLedger), ExperimentError> {
    let router = cfg.router().map_err(|e| ExperimentError::Config(e.to_string()))?;
    let topo = build_topology(cfg, cfg.coverage_m, cfg.iu_count, cfg.seed)?;
    let ctx = RouteContext {
        topo: &topo,
        cfg: &router,
        variant,
    };
    let mut oracles = Oracles::new(cfg.seed, router.link.rician_k_db, topo.nodes().len());
    let ledger = route(&ctx, &mut oracles)?;
    Ok((topo, ledger))
}

/// S, D and a RIS chain where D is only reachable through two RISs in
/// cascade: the RIS next to S sees neither D nor any IU, but the next RIS
/// down the line sees D.
pub fn single_gap_topology(ris_elements: usize) -> Result<Topology, ExperimentError> {
    let y = 200.0;
    Ok(Topology::new(
        Arena {
            width: 400.0,
            height: 400.0,
        },
        40.0,
        vec![
            Node::source(Position::new(20.0, y)),
            Node::destination(Position::new(125.0, y)),
            Node::ris(Position::new(55.0, y + 5.0), ris_elements),
            Node::ris(Position::new(90.0, y + 5.0), ris_elements),
        ],
    )?)
}

/// D sits behind the only RIS in reach of S, and that RIS has no further
/// RIS in front of it: one reflection works, a double reflection cannot.
pub fn double_gap_topology(ris_elements: usize) -> Result<Topology, ExperimentError> {
    let y = 200.0;
    Ok(Topology::new(
        Arena {
            width: 400.0,
            height: 400.0,
        },
        40.0,
        vec![
            Node::source(Position::new(20.0, y)),
            Node::destination(Position::new(80.0, y)),
            Node::ris(Position::new(50.0, y + 5.0), ris_elements),
        ],
    )?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapCheck {
    pub name: &'static str,
    pub baseline: &'static str,
    pub drams_success: bool,
    pub baseline_success: bool,
    pub drams_trace: String,
    pub baseline_trace: String,
}

/// Each restricted baseline against DRAMS on the topology built to defeat it.
pub fn gap_checks(cfg: &Config) -> Result<Vec<GapCheck>, ExperimentError> {
    let router = cfg.router().map_err(|e| ExperimentError::Config(e.to_string()))?;
    let cases = [
        ("single-gap", single_gap_topology(cfg.ris_elements)?, Variant::SingleRisOnly),
        ("double-gap", double_gap_topology(cfg.ris_elements)?, Variant::DoubleRisOnly),
    ];
    let mut out = Vec::new();
    for (name, topo, baseline) in cases {
        let run = |variant| -> Result<RouteLedger, ExperimentError> {
            let ctx = RouteContext {
                topo: &topo,
                cfg: &router,
                variant,
            };
            let mut oracles = Oracles::new(cfg.seed, router.link.rician_k_db, topo.nodes().len());
            Ok(route(&ctx, &mut oracles)?)
        };
        let d = run(Variant::Drams)?;
        let b = run(baseline)?;
        out.push(GapCheck {
            name,
            baseline: baseline.name(),
            drams_success: d.success,
            baseline_success: b.success,
            drams_trace: d.trace(&topo),
            baseline_trace: b.trace(&topo),
        });
    }
    Ok(out)
}

/// Which estimator a validation row checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dwell {
    /// Remaining busy time, with the mean OFF period held fixed.
    Busy,
    /// Remaining idle time, with the mean ON period held fixed.
    Idle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficRow {
    pub xi: f64,
    pub delta: f64,
    pub analytic: f64,
    /// Mean of the per-batch estimates.
    pub mc_mean: f64,
    pub mc_se: f64,
    /// 2.5 % and 97.5 % quantiles of the per-batch estimates.
    pub band_lo: f64,
    pub band_hi: f64,
    /// Estimate from all chains pooled.
    pub pooled: f64,
}

impl TrafficRow {
    pub fn in_band(&self) -> bool {
        self.band_lo <= self.analytic && self.analytic <= self.band_hi
    }
}

/// Slots spent in the starting state before the first change, capped at
/// `cap + 1`.
fn dwell_times<R: Rng + ?Sized>(profile: &TrafficProfile, start: TrafficState, n: usize, cap: usize, rng: &mut R) -> Vec<usize> {
    let m = profile.transition_matrix();
    let mut hist = vec![0usize; cap + 2];
    for _ in 0..n {
        let mut t = 0;
        while t <= cap {
            t += 1;
            if step_with(&m, start, rng) != start {
                break;
            }
        }
        hist[t.min(cap + 1)] += 1;
    }
    hist
}

/// Quantile of the dwell time at survival `1 − δ`, interpolating the
/// empirical survival function log-linearly between whole slots.
fn survival_quantile(hist: &[usize], delta: f64) -> f64 {
    let total: usize = hist.iter().sum();
    let target = 1.0 - delta;
    // survival(n) = P(T > n); T ≥ 1 so survival(0) = 1
    let mut above = total;
    let mut prev = 1.0f64;
    for (n, &count) in hist.iter().enumerate().skip(1) {
        above -= count;
        let s = above as f64 / total as f64;
        if s < target {
            let lo = (n - 1) as f64;
            if s <= 0.0 {
                return n as f64;
            }
            return lo + (prev.ln() - target.ln()) / (prev.ln() - s.ln());
        }
        prev = s;
    }
    (hist.len() - 1) as f64
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Estimator validation over the duty-cycle and tolerance grids.
pub fn validate_traffic(cfg: &Config, dwell: Dwell) -> Result<Vec<TrafficRow>, ExperimentError> {
    let slot = cfg.slot();
    let fixed = cfg.traffic_fixed_ms * 1e-3;
    let batches = cfg.traffic_batches;
    let per_batch = cfg.traffic_chains / batches;
    let delta_max = cfg.traffic_delta_grid.iter().cloned().fold(0.0, f64::max);
    let kind_tag = match dwell {
        Dwell::Busy => 1,
        Dwell::Idle => 2,
    };
    let per_xi: Vec<Result<Vec<TrafficRow>, ExperimentError>> = cfg
        .traffic_xi_grid
        .par_iter()
        .enumerate()
        .map(|(xi_idx, &xi)| {
            let (profile, start) = match dwell {
                Dwell::Busy => (TrafficProfile::from_duty_cycle_fixed_off(fixed, xi, slot)?, TrafficState::Busy),
                Dwell::Idle => (TrafficProfile::from_duty_cycle_fixed_on(fixed, xi, slot)?, TrafficState::Idle),
            };
            let analytic = |delta| match dwell {
                Dwell::Busy => duration_of_busyness(&profile, delta),
                Dwell::Idle => duration_of_idleness(&profile, delta),
            };
            let cap = (2.0 * analytic(delta_max)?).ceil() as usize + 10;
            let hists: Vec<Vec<usize>> = (0..batches)
                .map(|b| {
                    let mut rng = stream(cfg.seed, &[TAG_TRAFFIC_CHECK, kind_tag, xi_idx as u64, b as u64]);
                    dwell_times(&profile, start, per_batch, cap, &mut rng)
                })
                .collect();
            let mut pooled_hist = vec![0usize; cap + 2];
            for h in &hists {
                for (p, c) in pooled_hist.iter_mut().zip(h) {
                    *p += c;
                }
            }
            let mut rows = Vec::new();
            for &delta in &cfg.traffic_delta_grid {
                let mut est: Vec<f64> = hists.iter().map(|h| survival_quantile(h, delta)).collect();
                let (mc_mean, mc_se) = mean_se(&est);
                est.sort_by(f64::total_cmp);
                rows.push(TrafficRow {
                    xi,
                    delta,
                    analytic: analytic(delta)?,
                    mc_mean,
                    mc_se,
                    band_lo: quantile(&est, 0.025),
                    band_hi: quantile(&est, 0.975),
                    pooled: survival_quantile(&pooled_hist, delta),
                });
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_xi {
        rows.extend(r?);
    }
    // delta-major order
    rows.sort_by(|a, b| a.delta.total_cmp(&b.delta).then(a.xi.total_cmp(&b.xi)));
    Ok(rows)
}
