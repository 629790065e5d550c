//! CSV result files and the run manifest.
//!
//! Floats are written with Rust's shortest round-trip formatting so the same
//! run always produces the same bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use drams_core::metrics::{data_throughput, ThroughputTerm};
use drams_core::router::{HopKind, RouteLedger};
use drams_core::topology::Topology;

use crate::config::{Config, SCHEMA_VERSION};
use crate::experiments::{RouteRecord, SummaryRow, TrafficRow};

pub const MANIFEST: &str = "manifest.toml";

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_routes(path: &Path, records: &[RouteRecord]) -> io::Result<()> {
    write_rows(
        path,
        &[
            "scenario_id",
            "seed",
            "variant",
            "coverage_m",
            "density",
            "D_T",
            "D_T_normalized",
            "E_eff",
            "ris_count",
            "hops",
            "vmax_mps",
            "success",
            "failure",
        ],
        records.iter().map(|r| {
            vec![
                r.scenario_id.clone(),
                r.seed.to_string(),
                r.variant.clone(),
                r.coverage_m.to_string(),
                r.density.to_string(),
                r.d_t.to_string(),
                r.d_t_normalized.to_string(),
                opt(r.e_eff),
                r.ris_count.to_string(),
                r.hops.to_string(),
                opt(r.vmax),
                r.success.to_string(),
                r.failure.clone().unwrap_or_default(),
            ]
        }),
    )
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> io::Result<()> {
    write_rows(
        path,
        &[
            "variant",
            "coverage_m",
            "density",
            "vmax_mps",
            "replications",
            "success_rate",
            "mean_D_T",
            "se_D_T",
            "mean_D_T_normalized",
            "se_D_T_normalized",
            "mean_E_eff",
            "se_E_eff",
            "mean_ris_count",
            "se_ris_count",
            "mean_hops",
        ],
        rows.iter().map(|r| {
            vec![
                r.variant.clone(),
                r.coverage_m.to_string(),
                r.density.to_string(),
                opt(r.vmax),
                r.replications.to_string(),
                r.success_rate.to_string(),
                r.mean_d_t.to_string(),
                r.se_d_t.to_string(),
                r.mean_d_t_normalized.to_string(),
                r.se_d_t_normalized.to_string(),
                r.mean_e_eff.to_string(),
                r.se_e_eff.to_string(),
                r.mean_ris_count.to_string(),
                r.se_ris_count.to_string(),
                r.mean_hops.to_string(),
            ]
        }),
    )
}

pub fn write_traffic(path: &Path, rows: &[TrafficRow]) -> io::Result<()> {
    write_rows(
        path,
        &["xi", "delta", "analytic", "mc_mean", "mc_se"],
        rows.iter().map(|r| {
            vec![
                r.xi.to_string(),
                r.delta.to_string(),
                r.analytic.to_string(),
                r.mc_mean.to_string(),
                r.mc_se.to_string(),
            ]
        }),
    )
}

fn hop_ids(topo: &Topology, kind: &HopKind) -> String {
    let l = |id| topo.node(id).label().to_string();
    match *kind {
        HopKind::Direct { to, .. } => l(to),
        HopKind::SingleRis { ris, to } => format!("{} {}", l(ris), l(to)),
        HopKind::DoubleRis { first, second, to } => format!("{} {} {}", l(first), l(second), l(to)),
        HopKind::Wait { .. } | HopKind::Terminate => String::new(),
    }
}

/// One row per hop, then a summary row whose `kind` is `success` or the
/// failure reason and whose `rate` column holds the route throughput.
pub fn write_ledger(path: &Path, ledger: &RouteLedger, topo: &Topology, target_ber: f64, term: ThroughputTerm) -> io::Result<()> {
    let mut rows: Vec<Vec<String>> = ledger
        .hops
        .iter()
        .enumerate()
        .map(|(i, h)| {
            vec![
                i.to_string(),
                h.kind.label().to_string(),
                hop_ids(topo, &h.kind),
                h.slots_used.to_string(),
                h.rate.to_string(),
                h.harvested.to_string(),
                h.remaining_distance.to_string(),
            ]
        })
        .collect();
    let throughput = if ledger.success {
        data_throughput(ledger, target_ber, term).unwrap_or(0.0)
    } else {
        0.0
    };
    let outcome = match ledger.failure_reason {
        Some(f) => format!("{f:?}"),
        None => "success".to_string(),
    };
    let last_remaining = ledger
        .hops
        .last()
        .map(|h| h.remaining_distance)
        .unwrap_or_else(|| topo.remaining_distance(topo.source()));
    rows.push(vec![
        "summary".to_string(),
        outcome,
        ledger.trace(topo),
        ledger.total_slots.to_string(),
        throughput.to_string(),
        ledger.harvested().to_string(),
        last_remaining.to_string(),
    ]);
    write_rows(
        path,
        &["index", "kind", "ids", "slots", "rate", "harvested_j", "remaining_distance_m"],
        rows,
    )
}

/// Writes the resolved configuration; loading it back with `--config`
/// reproduces the run.
pub fn write_manifest(dir: &Path, cfg: &Config, command: &str, files: &[PathBuf]) -> io::Result<PathBuf> {
    let path = dir.join(MANIFEST);
    let names: Vec<String> = files
        .iter()
        .filter_map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let text = format!(
        "# drams {command} manifest, output schema {SCHEMA_VERSION}\n# files: {}\n{}",
        names.join(", "),
        cfg.to_toml()
    );
    fs::write(&path, text)?;
    Ok(path)
}
