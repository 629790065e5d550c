//! Command-line front end. Exit status 0 on success, 1 on a configuration
//! or usage error, 2 when an experiment fails.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use drams_core::router::Variant;

use crate::config::Config;
use crate::experiments::{self, Dwell, ExperimentError, RunResult};
use crate::output;

#[derive(Debug, Parser)]
#[command(name = "drams", version, about = "Double-RIS assisted multihop D2D routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    replications: Option<usize>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Drams,
    SingleRisOnly,
    DoubleRisOnly,
    NoAdaptiveMod,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Route once on the configured topology and print the hop trace.
    Route {
        #[arg(long, value_enum, default_value = "drams")]
        variant: VariantArg,
    },
    /// Mean RIS count and metrics over coverage radii, per IU density.
    SweepCoverage,
    /// Mean RIS count and metrics over IU densities, per coverage radius.
    SweepDensity,
    /// Analytic idle/busy duration estimates against simulated chains.
    ValidateTraffic,
    /// Routing variants side by side over the coverage grid.
    Compare,
    /// Throughput under random-waypoint IU mobility.
    Mobility,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Route { .. } => "route",
            Command::SweepCoverage => "sweep-coverage",
            Command::SweepDensity => "sweep-density",
            Command::ValidateTraffic => "validate-traffic",
            Command::Compare => "compare",
            Command::Mobility => "mobility",
        }
    }
}

enum Failure {
    Config(String),
    Experiment(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(m) => Failure::Config(m),
            ExperimentError::Core(e) => Failure::Experiment(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Experiment(format!("cannot write {}: {e}", path.display()))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            if !cli.common.quiet {
                print!("{summary}");
            }
            0
        }
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            1
        }
        Err(Failure::Experiment(m)) => {
            eprintln!("experiment failed: {m}");
            2
        }
    }
}

fn resolve_config(common: &Common) -> Result<Config, Failure> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p).map_err(|e| Failure::Config(e.to_string()))?,
        None => Config::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(r) = common.replications {
        cfg.replications = r;
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(cfg)
}

fn files_line(files: &[PathBuf]) -> String {
    files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>().join(", ")
}

fn route_summary(result: &RunResult) -> (usize, f64) {
    let n = result.routes.len();
    let ok = result.routes.iter().filter(|r| r.success).count();
    (n, if n == 0 { 0.0 } else { 100.0 * ok as f64 / n as f64 })
}

fn execute(cli: &Cli) -> Result<String, Failure> {
    let cfg = resolve_config(&cli.common)?;
    let out = &cli.common.out;
    std::fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.common.threads {
        if t == 0 {
            return Err(Failure::Config("`--threads` must be at least 1".to_string()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::Experiment(format!("cannot start worker threads: {e}")))?;
    pool.install(|| dispatch(cli, &cfg, out))
}

fn write_sweep(out: &Path, stem: &str, result: &RunResult) -> Result<Vec<PathBuf>, Failure> {
    let routes = out.join(format!("{stem}_routes.csv"));
    let summary = out.join(format!("{stem}_summary.csv"));
    output::write_routes(&routes, &result.routes).map_err(|e| io_failure(&routes, e))?;
    output::write_summary(&summary, &result.summary).map_err(|e| io_failure(&summary, e))?;
    Ok(vec![routes, summary])
}

fn dispatch(cli: &Cli, cfg: &Config, out: &Path) -> Result<String, Failure> {
    let name = cli.command.name();
    let mut text = String::new();
    let mut files;
    let headline;
    match cli.command {
        Command::Route { variant } => {
            let variant = match variant {
                VariantArg::Drams => Variant::Drams,
                VariantArg::SingleRisOnly => Variant::SingleRisOnly,
                VariantArg::DoubleRisOnly => Variant::DoubleRisOnly,
                VariantArg::NoAdaptiveMod => Variant::FixedMode {
                    bits: cfg.fixed_mode_bits,
                },
            };
            let (topo, ledger) = experiments::trajectory(cfg, variant)?;
            let path = out.join("ledger.csv");
            output::write_ledger(&path, &ledger, &topo, cfg.target_ber, cfg.throughput())
                .map_err(|e| io_failure(&path, e))?;
            let _ = writeln!(text, "{}", ledger.trace(&topo));
            files = vec![path];
            headline = format!(
                "1 route, success {:.1}%",
                if ledger.success { 100.0 } else { 0.0 }
            );
        }
        Command::SweepCoverage => {
            let r = experiments::coverage_sweep(cfg)?;
            files = write_sweep(out, "coverage", &r)?;
            let (n, pct) = route_summary(&r);
            headline = format!("{n} routes, success {pct:.1}%");
        }
        Command::SweepDensity => {
            let r = experiments::density_sweep(cfg)?;
            files = write_sweep(out, "density", &r)?;
            let (n, pct) = route_summary(&r);
            headline = format!("{n} routes, success {pct:.1}%");
        }
        Command::Compare => {
            let r = experiments::comparison(cfg)?;
            files = write_sweep(out, "compare", &r)?;
            for g in experiments::gap_checks(cfg)? {
                let _ = writeln!(
                    text,
                    "{}: drams {} [{}], {} {} [{}]",
                    g.name,
                    if g.drams_success { "reaches D" } else { "fails" },
                    g.drams_trace,
                    g.baseline,
                    if g.baseline_success { "reaches D" } else { "fails" },
                    g.baseline_trace
                );
            }
            let (n, pct) = route_summary(&r);
            headline = format!("{n} routes, success {pct:.1}%");
        }
        Command::Mobility => {
            let r = experiments::mobility(cfg)?;
            files = write_sweep(out, "mobility", &r)?;
            let (n, pct) = route_summary(&r);
            headline = format!("{n} routes, success {pct:.1}%");
        }
        Command::ValidateTraffic => {
            let busy = experiments::validate_traffic(cfg, Dwell::Busy)?;
            let idle = experiments::validate_traffic(cfg, Dwell::Idle)?;
            let b = out.join("nu_b.csv");
            let i = out.join("nu_i.csv");
            output::write_traffic(&b, &busy).map_err(|e| io_failure(&b, e))?;
            output::write_traffic(&i, &idle).map_err(|e| io_failure(&i, e))?;
            let inside = busy.iter().chain(&idle).filter(|r| r.in_band()).count();
            headline = format!(
                "{} grid points, {inside} analytic values inside the Monte Carlo band",
                busy.len() + idle.len()
            );
            files = vec![b, i];
        }
    }
    let manifest = output::write_manifest(out, cfg, name, &files).map_err(|e| io_failure(out, e))?;
    files.push(manifest);
    let _ = writeln!(text, "{name}: {headline}, wrote {}", files_line(&files));
    Ok(text)
}
