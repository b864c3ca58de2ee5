//! Command-line entry point. Exit codes: 0 success, 1 failed check, abort or
//! I/O failure, 2 configuration or usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bathymetry::BathymetryPreset;
use crate::config::{RunConfig, DEFAULT_SEED};
use crate::dynamics::SystemKind;
use crate::error::{Error, Result};
use crate::estimates::SuiteConfig;
use crate::harness::{bona_smith_experiment, scenario, scenarios, weak_limit_experiment, BonaSmithReport, GrowthReport, Scenario};
use crate::output::{resolve_output, write_json, write_series};
use crate::verify::{growth_check, verify_elliptic, verify_entropy, verify_estimates, EllipticSettings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "peregrine", version, about = "Boussinesq-Peregrine solver and verification lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shipped scenario (see `list-scenarios`).
    #[arg(long)]
    scenario: Option<String>,
    /// `bp` or `bpw`.
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    snapshot_stride: Option<usize>,
    /// Output directory; relative paths resolve under the output root.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one scenario and write diagnostics, snapshots and metadata.
    Simulate(RunArgs),
    /// Bona-Smith convergence study plus the truncation growth check.
    BonaSmith {
        #[arg(long, default_value = "algebraic-tail")]
        scenario: String,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        n: Vec<u64>,
        #[arg(long, default_value_t = 2.0)]
        probe_horizon: f64,
        #[arg(long, default_value_t = 200)]
        growth_samples: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mollified-data sweep: uniform entropy bound and Jensen monotonicity.
    WeakLimit {
        #[arg(long, value_delimiter = ',', default_value = "dimple,spike")]
        scenario: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        n: Vec<u32>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Entropy balance, inequality, conservation and entropy-pair checks on one run.
    VerifyEntropy(RunArgs),
    /// Scale stability of every shipped estimate constant.
    VerifyEstimates {
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solver accuracy, symmetry and coercivity of the elliptic operator.
    VerifyElliptic {
        /// Bottom presets (default: all).
        #[arg(long, value_delimiter = ',')]
        preset: Vec<String>,
        #[arg(long, default_value_t = 128)]
        points: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0.1)]
        mu: f64,
        #[arg(long, default_value_t = 0.2)]
        beta: f64,
        #[arg(long, default_value_t = 0.5)]
        h0: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the shipped scenarios.
    ListScenarios,
}

/// Command outcome before mapping to an exit code.
enum Outcome {
    Pass,
    Fail(String),
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    build: &'static str,
    command: &'a str,
    seed: u64,
    scenario: &'a Scenario,
    config: Option<&'a str>,
    steps: usize,
    t_final: f64,
    abort: Option<String>,
    created_unix: u64,
}

fn build_profile() -> &'static str {
    if cfg!(debug_assertions) {
        "debug"
    } else {
        "release"
    }
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidGrid(_) | Error::Hypothesis(_) => EXIT_CONFIG,
        _ => EXIT_FAIL,
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(Outcome::Pass) => EXIT_OK,
        Ok(Outcome::Fail(msg)) => {
            eprintln!("FAIL: {msg}");
            EXIT_FAIL
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn resolve_run(args: &RunArgs, default_scenario: &str) -> Result<(crate::config::ResolvedRun, Option<String>)> {
    let (mut cfg, text) = match &args.config {
        Some(path) => {
            let (c, t) = RunConfig::load(path)?;
            (c, Some(t))
        }
        None => (RunConfig::default(), None),
    };
    if let Some(name) = &args.scenario {
        cfg.run.scenario = Some(name.clone());
    } else if args.config.is_none() {
        cfg.run.scenario = Some(default_scenario.into());
    }
    if let Some(s) = &args.system {
        cfg.run.system = Some(SystemKind::parse(s)?);
    }
    if let Some(seed) = args.seed {
        cfg.run.seed = Some(seed);
    }
    if let Some(stride) = args.snapshot_stride {
        cfg.run.snapshot_stride = Some(stride);
    }
    if let Some(out) = &args.out {
        cfg.run.output = Some(out.clone());
    }
    let mut resolved = cfg.resolve()?;
    let sc = &mut resolved.scenario;
    if let Some(t) = args.t_end {
        sc.params.t_end = t;
    }
    if let Some(dt) = args.dt {
        sc.params.dt = dt;
    }
    if let Some(m) = args.points {
        sc.points = m;
        sc.grid().map_err(|e| Error::Config(e.to_string()))?;
    }
    sc.params.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok((resolved, text))
}

fn output_dir(explicit: Option<&Path>, command: &str, name: &str) -> PathBuf {
    match explicit {
        Some(p) => resolve_output(p),
        None => resolve_output(&Path::new(command).join(name)),
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Simulate(args) => simulate_cmd(&args),
        Command::BonaSmith { scenario: name, s, n, probe_horizon, growth_samples, seed, out } => {
            let sc = scenario(&name)?;
            let study = bona_smith_experiment(&sc, seed, s, &n, probe_horizon)?;
            let growth = growth_check(seed, growth_samples)?;
            #[derive(Serialize)]
            struct Report<'a> {
                study: &'a BonaSmithReport,
                growth: &'a GrowthReport,
            }
            let dir = output_dir(out.as_deref(), "bona-smith", &name);
            write_json(&dir.join("bona_smith.json"), &Report { study: &study, growth: &growth })?;
            for d in &study.differences {
                println!("n = {:>4} vs {:>4}: sup difference {:.6e}", d.n1, d.n2, d.distance);
            }
            println!(
                "common horizon T = {:.4}, fitted decay exponent {:?}, growth ratios exact {:.4} / power {:.4}",
                study.t_common, study.fitted_exponent, growth.max_ratio_exact, growth.max_ratio_power
            );
            println!("report: {}", dir.join("bona_smith.json").display());
            if study.strictly_decreasing && growth.exact_holds && growth.power_holds {
                Ok(Outcome::Pass)
            } else {
                Ok(Outcome::Fail(format!(
                    "differences strictly decreasing: {}, growth bound: {}/{}",
                    study.strictly_decreasing, growth.exact_holds, growth.power_holds
                )))
            }
        }
        Command::WeakLimit { scenario: names, n, seed, out } => {
            let mut failures = Vec::new();
            let mut reports = Vec::new();
            for name in &names {
                let r = weak_limit_experiment(&scenario(name)?, seed, &n)?;
                for run in &r.runs {
                    println!(
                        "{name} n = {:>3}: orlicz {:.6e} (<= {:.6e}: {}), bound margin {:.4e}",
                        run.n, run.orlicz_mollified, r.orlicz_original, run.jensen_holds, run.bound_margin
                    );
                }
                if !r.pass() {
                    failures.push(name.clone());
                }
                reports.push(r);
            }
            let dir = output_dir(out.as_deref(), "weak-limit", &names.join("+"));
            write_json(&dir.join("weak_limit.json"), &reports)?;
            println!("report: {}", dir.join("weak_limit.json").display());
            if failures.is_empty() {
                Ok(Outcome::Pass)
            } else {
                Ok(Outcome::Fail(format!("uniform bound or Jensen check failed for {}", failures.join(", "))))
            }
        }
        Command::VerifyEntropy(args) => {
            let (resolved, _) = resolve_run(&args, "flat-gaussian")?;
            let r = verify_entropy(&resolved.scenario, resolved.seed)?;
            let dir = output_dir(resolved.output.as_deref(), "verify-entropy", &resolved.scenario.name);
            write_json(&dir.join("entropy.json"), &r)?;
            println!(
                "{}: balance residual {:.3e} (tol {:.1e}), min slack {:.6e}, drift {:?}, compatibility {:.3e}",
                r.scenario, r.max_balance_residual, r.balance_tolerance, r.min_inequality_slack, r.entropy_drift, r.compatibility_residual
            );
            Ok(if r.pass() { Outcome::Pass } else { Outcome::Fail(format!("entropy checks failed on {}", r.scenario)) })
        }
        Command::VerifyEstimates { samples, seed, out } => {
            let cfg = SuiteConfig { samples, seed, ..SuiteConfig::default() };
            let r = verify_estimates(&cfg)?;
            for c in &r.cases {
                println!(
                    "{:<28} shipped {:<7} base {:.4} doubled {:.4} {}",
                    c.name,
                    c.shipped,
                    c.base_max,
                    c.doubled_max,
                    if c.within && c.stable { "ok" } else { "FAIL" }
                );
            }
            let dir = output_dir(out.as_deref(), "verify-estimates", &format!("seed-{seed}"));
            write_json(&dir.join("estimates.json"), &r)?;
            Ok(if r.pass() { Outcome::Pass } else { Outcome::Fail("estimate constants".into()) })
        }
        Command::VerifyElliptic { preset, points, samples, mu, beta, h0, seed, out } => {
            let names: Vec<String> = if preset.is_empty() {
                BathymetryPreset::names().iter().map(|s| s.to_string()).collect()
            } else {
                preset
            };
            let cfg = EllipticSettings { points, samples, mu, beta, h0, seed, ..EllipticSettings::default() };
            let mut reports = Vec::new();
            for name in &names {
                let r = verify_elliptic(&BathymetryPreset::by_name(name)?, &cfg)?;
                println!(
                    "{:<14} residual {:.2e} LU {:.2e} symmetry {:.2e} coercivity {:.4} (>= {:.4}) form {:.2e} {}",
                    r.preset,
                    r.residual,
                    r.dense_lu,
                    r.self_adjoint,
                    r.coercivity_measured,
                    r.coercivity_required,
                    r.form_identity,
                    if r.pass() { "ok" } else { "FAIL" }
                );
                reports.push(r);
            }
            let dir = output_dir(out.as_deref(), "verify-elliptic", &format!("m{points}"));
            write_json(&dir.join("elliptic.json"), &reports)?;
            Ok(if reports.iter().all(|r| r.pass()) {
                Outcome::Pass
            } else {
                Outcome::Fail("elliptic checks".into())
            })
        }
        Command::ListScenarios => {
            for sc in scenarios() {
                println!(
                    "{:<16} {:<4} {:<14} L = {:<8.4} M = {:<5} {}",
                    sc.name,
                    sc.system.name(),
                    sc.bathymetry.name(),
                    sc.length,
                    sc.points,
                    sc.description
                );
            }
            Ok(Outcome::Pass)
        }
    }
}

fn simulate_cmd(args: &RunArgs) -> Result<Outcome> {
    let (resolved, text) = resolve_run(args, "flat-gaussian")?;
    let sc = &resolved.scenario;
    let out = sc.run(resolved.seed)?;
    let traj = &out.trajectory;
    let dir = output_dir(resolved.output.as_deref(), "simulate", &sc.name);
    let meta = Meta {
        tool: "peregrine",
        version: env!("CARGO_PKG_VERSION"),
        build: build_profile(),
        command: "simulate",
        seed: resolved.seed,
        scenario: sc,
        config: text.as_deref(),
        steps: traj.records.len(),
        t_final: traj.last().t,
        abort: out.abort.as_ref().map(|e| e.to_string()),
        created_unix: now_unix(),
    };
    write_series(traj, &out.bathymetry, &sc.s_list, &dir, &meta)?;
    println!(
        "{} ({}): {} steps to t = {}, output {}",
        sc.name,
        sc.system.name(),
        traj.records.len(),
        traj.last().t,
        dir.display()
    );
    match out.abort {
        None => Ok(Outcome::Pass),
        Some(e) => Ok(Outcome::Fail(e.to_string())),
    }
}
