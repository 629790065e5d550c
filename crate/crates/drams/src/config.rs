//! Flat TOML configuration.
//!
//! Every key is optional; missing keys take the defaults below. Unknown keys
//! are rejected and the error names them.

use std::fmt;
use std::path::Path;

use drams_core::channel::{LinkBudgetParams, RateModel};
use drams_core::linkbudget::{
    build_mode_table_with, HarvesterParams, ModeTableParams, ThresholdRule, TransferDemand,
};
use drams_core::metrics::ThroughputTerm;
use drams_core::router::RouterConfig;
use drams_core::topology::{Arena, Position, TopologySpec};
use drams_core::traffic::TrafficProfile;
use drams_core::{db_to_linear, dbm_to_watts};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum ConfigError {
    Read { path: String, source: std::io::Error },
    Parse { path: String, message: String },
    Invalid { key: &'static str, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Read { path, source } => write!(f, "cannot read config file {path}: {source}"),
            ConfigError::Parse { path, message } => write!(f, "invalid config file {path}: {message}"),
            ConfigError::Invalid { key, message } => write!(f, "invalid value for `{key}`: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// A scalar or a list; lists are cycled over IUs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> &[f64] {
        match self {
            OneOrMany::One(v) => std::slice::from_ref(v),
            OneOrMany::Many(v) => v,
        }
    }

    fn cycled(&self, k: usize) -> f64 {
        let v = self.values();
        v[k % v.len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRuleKey {
    PerBit,
    PerLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThroughputKey {
    Constellation,
    Bits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub schema_version: u32,
    pub seed: u64,
    pub replications: usize,

    pub arena_width_m: f64,
    pub arena_height_m: f64,
    pub coverage_m: f64,
    pub iu_count: usize,
    pub ris_spacing_m: f64,
    pub ris_elements: usize,
    pub source_x_m: f64,
    pub source_y_m: f64,
    pub destination_x_m: f64,
    pub destination_y_m: f64,

    pub lambda_off_ms: OneOrMany,
    pub mu_on_ms: OneOrMany,
    pub slot_us: f64,
    pub delta: f64,
    pub p_th: f64,

    #[serde(rename = "rho_L_db")]
    pub rho_l_db: f64,
    pub alpha_d2d: f64,
    pub alpha_other: f64,
    pub noise_dbm: f64,
    pub tx_power_dbm: f64,
    pub rician_k_db: f64,
    pub blocklength: f64,
    pub epsilon: f64,
    pub shannon_rate: bool,
    pub align_rounds: usize,

    pub target_ber: f64,
    pub threshold_rule: ThresholdRuleKey,
    pub harvester_mh_mw: f64,
    pub harvester_a: f64,
    pub harvester_b: f64,
    pub packets: u32,
    pub bits_per_packet: u32,
    pub proc_power_dbm: f64,
    pub delay_budget_ms: f64,

    pub throughput_term: ThroughputKey,
    pub fixed_mode_bits: u32,

    pub coverage_grid_m: Vec<f64>,
    pub density_grid: Vec<usize>,
    pub density_sweep_grid: Vec<usize>,
    pub density_sweep_coverage_m: Vec<f64>,
    pub vmax_grid_mps: Vec<f64>,
    pub mobility_coverage_m: f64,

    pub traffic_xi_grid: Vec<f64>,
    pub traffic_delta_grid: Vec<f64>,
    pub traffic_fixed_ms: f64,
    pub traffic_chains: usize,
    pub traffic_batches: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 1,
            replications: 500,
            arena_width_m: 400.0,
            arena_height_m: 400.0,
            coverage_m: 60.0,
            iu_count: 400,
            ris_spacing_m: 25.0,
            ris_elements: 250,
            source_x_m: 20.0,
            source_y_m: 200.0,
            destination_x_m: 380.0,
            destination_y_m: 200.0,
            lambda_off_ms: OneOrMany::One(20.0),
            mu_on_ms: OneOrMany::One(5.0),
            slot_us: 100.0,
            delta: 0.1,
            p_th: 0.01,
            rho_l_db: -35.3,
            alpha_d2d: 4.2,
            alpha_other: 2.0,
            noise_dbm: -100.0,
            tx_power_dbm: 30.0,
            rician_k_db: 10.0,
            blocklength: 1000.0,
            epsilon: 1e-4,
            shannon_rate: false,
            align_rounds: 20,
            target_ber: 1e-6,
            threshold_rule: ThresholdRuleKey::PerBit,
            harvester_mh_mw: 24.0,
            harvester_a: 150.0,
            harvester_b: 0.014,
            packets: 4,
            bits_per_packet: 8,
            proc_power_dbm: 10.0,
            delay_budget_ms: 50.0,
            throughput_term: ThroughputKey::Constellation,
            fixed_mode_bits: 2,
            coverage_grid_m: vec![30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0],
            density_grid: vec![100, 400, 900],
            density_sweep_grid: (1..=9).map(|k| 100 * k).collect(),
            density_sweep_coverage_m: vec![30.0, 45.0, 60.0],
            vmax_grid_mps: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            mobility_coverage_m: 50.0,
            traffic_xi_grid: (1..=8).map(|k| k as f64 / 10.0).collect(),
            traffic_delta_grid: vec![0.1, 0.2, 0.3],
            traffic_fixed_ms: 4.0,
            traffic_chains: 100_000,
            traffic_batches: 100,
        }
    }
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

fn check_positive(key: &'static str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be a positive number, got {v}")))
    }
}

fn check_unit(key: &'static str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must lie strictly between 0 and 1, got {v}")))
    }
}

fn check_nonempty<T>(key: &'static str, v: &[T]) -> Result<(), ConfigError> {
    if v.is_empty() {
        Err(invalid(key, "must not be empty"))
    } else {
        Ok(())
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.replications == 0 {
            return Err(invalid("replications", "must be at least 1"));
        }
        check_positive("arena_width_m", self.arena_width_m)?;
        check_positive("arena_height_m", self.arena_height_m)?;
        check_positive("coverage_m", self.coverage_m)?;
        check_positive("ris_spacing_m", self.ris_spacing_m)?;
        if self.ris_elements == 0 {
            return Err(invalid("ris_elements", "must be at least 1"));
        }
        let arena = self.arena();
        for (key, p) in [
            ("source_x_m", self.source()),
            ("destination_x_m", self.destination()),
        ] {
            if !arena.contains(&p) {
                return Err(invalid(key, "position lies outside the arena"));
            }
        }
        if self.source() == self.destination() {
            return Err(invalid("destination_x_m", "destination coincides with the source"));
        }
        check_nonempty("lambda_off_ms", self.lambda_off_ms.values())?;
        check_nonempty("mu_on_ms", self.mu_on_ms.values())?;
        for &v in self.lambda_off_ms.values() {
            check_positive("lambda_off_ms", v)?;
        }
        for &v in self.mu_on_ms.values() {
            check_positive("mu_on_ms", v)?;
        }
        check_positive("slot_us", self.slot_us)?;
        check_unit("delta", self.delta)?;
        check_unit("p_th", self.p_th)?;
        if !self.rho_l_db.is_finite() {
            return Err(invalid("rho_L_db", "must be finite"));
        }
        check_positive("alpha_d2d", self.alpha_d2d)?;
        check_positive("alpha_other", self.alpha_other)?;
        if !self.noise_dbm.is_finite() {
            return Err(invalid("noise_dbm", "must be finite"));
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(invalid("tx_power_dbm", "must be finite"));
        }
        if self.rician_k_db.is_nan() {
            return Err(invalid("rician_k_db", "must be a number"));
        }
        if !(self.blocklength >= 1.0) {
            return Err(invalid("blocklength", "must be at least 1"));
        }
        check_unit("epsilon", self.epsilon)?;
        if self.align_rounds == 0 {
            return Err(invalid("align_rounds", "must be at least 1"));
        }
        check_unit("target_ber", self.target_ber)?;
        check_positive("harvester_mh_mw", self.harvester_mh_mw)?;
        check_positive("harvester_a", self.harvester_a)?;
        check_positive("harvester_b", self.harvester_b)?;
        if self.packets == 0 {
            return Err(invalid("packets", "must be at least 1"));
        }
        if self.bits_per_packet == 0 {
            return Err(invalid("bits_per_packet", "must be at least 1"));
        }
        if !self.proc_power_dbm.is_finite() {
            return Err(invalid("proc_power_dbm", "must be finite"));
        }
        check_positive("delay_budget_ms", self.delay_budget_ms)?;
        if !(1..=8).contains(&self.fixed_mode_bits) {
            return Err(invalid("fixed_mode_bits", "must be between 1 and 8"));
        }
        check_nonempty("coverage_grid_m", &self.coverage_grid_m)?;
        check_nonempty("density_grid", &self.density_grid)?;
        check_nonempty("density_sweep_grid", &self.density_sweep_grid)?;
        check_nonempty("density_sweep_coverage_m", &self.density_sweep_coverage_m)?;
        check_nonempty("vmax_grid_mps", &self.vmax_grid_mps)?;
        for &r in self
            .coverage_grid_m
            .iter()
            .chain(&self.density_sweep_coverage_m)
            .chain([&self.coverage_m, &self.mobility_coverage_m])
        {
            check_positive("coverage_grid_m", r)?;
            if self.ris_spacing_m > r {
                return Err(invalid(
                    "ris_spacing_m",
                    format!("spacing {} m exceeds the coverage radius {r} m", self.ris_spacing_m),
                ));
            }
        }
        for &v in &self.vmax_grid_mps {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid("vmax_grid_mps", format!("speeds must be nonnegative, got {v}")));
            }
        }
        check_nonempty("traffic_xi_grid", &self.traffic_xi_grid)?;
        check_nonempty("traffic_delta_grid", &self.traffic_delta_grid)?;
        for &x in &self.traffic_xi_grid {
            check_unit("traffic_xi_grid", x)?;
        }
        for &d in &self.traffic_delta_grid {
            check_unit("traffic_delta_grid", d)?;
        }
        check_positive("traffic_fixed_ms", self.traffic_fixed_ms)?;
        if self.traffic_batches == 0 || self.traffic_chains < self.traffic_batches {
            return Err(invalid("traffic_batches", "need at least one chain per batch"));
        }
        self.router().map(|_| ())
    }

    pub fn slot(&self) -> f64 {
        self.slot_us * 1e-6
    }

    pub fn arena(&self) -> Arena {
        Arena {
            width: self.arena_width_m,
            height: self.arena_height_m,
        }
    }

    pub fn source(&self) -> Position {
        Position::new(self.source_x_m, self.source_y_m)
    }

    pub fn destination(&self) -> Position {
        Position::new(self.destination_x_m, self.destination_y_m)
    }

    pub fn topology_spec(&self, coverage: f64, iu_count: usize) -> TopologySpec {
        TopologySpec {
            arena: self.arena(),
            coverage_radius: coverage,
            source: self.source(),
            destination: self.destination(),
            iu_count,
            ris_spacing: self.ris_spacing_m,
            ris_elements: self.ris_elements,
        }
    }

    /// Traffic profile of the `k`-th generated IU.
    pub fn profile(&self, k: usize) -> TrafficProfile {
        TrafficProfile {
            lambda_off: self.lambda_off_ms.cycled(k) * 1e-3,
            mu_on: self.mu_on_ms.cycled(k) * 1e-3,
            slot: self.slot(),
        }
    }

    pub fn throughput(&self) -> ThroughputTerm {
        match self.throughput_term {
            ThroughputKey::Constellation => ThroughputTerm::Constellation,
            ThroughputKey::Bits => ThroughputTerm::BitsPerSymbol,
        }
    }

    pub fn rate_model(&self) -> RateModel {
        if self.shannon_rate {
            RateModel::Shannon
        } else {
            RateModel::FiniteBlocklength {
                blocklength: self.blocklength,
                epsilon: self.epsilon,
            }
        }
    }

    pub fn router(&self) -> Result<RouterConfig, ConfigError> {
        let modes = build_mode_table_with(&ModeTableParams {
            target_ber: self.target_ber,
            rule: match self.threshold_rule {
                ThresholdRuleKey::PerBit => ThresholdRule::PerBit,
                ThresholdRuleKey::PerLevel => ThresholdRule::PerLevel,
            },
            ..ModeTableParams::default()
        })
        .map_err(|e| invalid("target_ber", e.to_string()))?;
        let demand = TransferDemand::new(self.packets, self.bits_per_packet, dbm_to_watts(self.proc_power_dbm))
            .map_err(|e| invalid("packets", e.to_string()))?;
        let harvester = HarvesterParams::new(self.harvester_mh_mw * 1e-3, self.harvester_a, self.harvester_b)
            .map_err(|e| invalid("harvester_mh_mw", e.to_string()))?;
        Ok(RouterConfig {
            link: LinkBudgetParams {
                rho_l: db_to_linear(self.rho_l_db),
                alpha_d2d: self.alpha_d2d,
                alpha_other: self.alpha_other,
                noise_power: dbm_to_watts(self.noise_dbm),
                tx_power: dbm_to_watts(self.tx_power_dbm),
                rician_k_db: self.rician_k_db,
            },
            modes,
            demand,
            harvester,
            rate_model: self.rate_model(),
            slot: self.slot(),
            delay_budget: self.delay_budget_ms * 1e-3,
            delta: self.delta,
            p_th: self.p_th,
            align_rounds: self.align_rounds,
        })
    }
}
