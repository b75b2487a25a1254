//! Command-line front end: analytic reports, optimization, simulation,
//! parameter sweeps and the LTE-U/WiFi case study, with JSON/CSV output
//! and a reproducibility manifest per run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use coexist::analytic::{throughput_report, Method, Scenario, ThroughputReport};
use coexist::casestudy::{
    derive_deployment, robustness_lw, robustness_nw, DeploymentInput, SweepRow, SWEEP_COLUMNS,
};
use coexist::chain::enumerate_chain;
use coexist::error::Error as CoexError;
use coexist::optimizer::{
    closed_form_optimum, optimize, ClosedFormRegime, OptimizationSpec,
};
use coexist::sim::{run as sim_run, SimConfig, WifiLteConfig};
use coexist::SystemConfig;

const EXIT_INVALID_CONFIG: i32 = 2;
const EXIT_PATH_MISMATCH: i32 = 3;
const EXIT_INFEASIBLE: i32 = 4;
const DUAL_PATH_TOLERANCE: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "coexist", version, about = "Coexisting slotted Aloha / CSMA throughput toolkit")]
struct Cli {
    /// Limit worker threads for concurrent sweep evaluation.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one scenario through both computation routes and compare.
    Analyze(AnalyzeArgs),
    /// Maximize total throughput under a desired throughput proportion.
    Optimize(OptimizeArgs),
    /// Run the mini-slot simulator.
    Simulate(SimulateArgs),
    /// Sweep one parameter axis and emit a CSV table.
    Sweep(SweepArgs),
    /// Derive and probe an LTE-U/WiFi deployment configuration.
    Casestudy(CasestudyArgs),
}

#[derive(Args, Clone)]
struct SystemFlags {
    /// JSON config file with top-level {system, sim, optimize, casestudy}.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "nA")]
    n_a: Option<u32>,
    #[arg(long = "nC")]
    n_c: Option<u32>,
    #[arg(long = "qA", conflicts_with = "rho_a")]
    q_a: Option<f64>,
    #[arg(long = "qC", conflicts_with = "rho_c")]
    q_c: Option<f64>,
    /// No-transmission probability of the Aloha side; inverted to qA.
    #[arg(long = "rhoA")]
    rho_a: Option<f64>,
    /// No-transmission probability of the CSMA side; inverted to qC.
    #[arg(long = "rhoC")]
    rho_c: Option<f64>,
    #[arg(long = "S")]
    s: Option<u32>,
    #[arg(long = "lC")]
    l_c: Option<u32>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    system: SystemFlags,
    /// Write the analyze report JSON here as well as stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append the report as a CSV row.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Dump the solved embedded chain as JSON.
    #[arg(long)]
    dump_chain: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    gamma: f64,
    #[arg(long = "nA", default_value_t = 1)]
    n_a: u32,
    #[arg(long = "nC", default_value_t = 20)]
    n_c: u32,
    #[arg(long = "S", default_value_t = 20)]
    s: u32,
    /// Restrict the packet-time search to this comma-separated set.
    #[arg(long = "lc-set", value_delimiter = ',')]
    lc_set: Option<Vec<u32>>,
    /// Use a closed-form optimum instead of the numeric search.
    #[arg(long = "closed-form", value_enum)]
    closed_form: Option<RegimeArg>,
    /// rho_a line-search grid resolution.
    #[arg(long, default_value_t = 1e-3)]
    rho_step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    #[value(name = "nA1")]
    NA1,
    #[value(name = "nAlarge")]
    NALarge,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    system: SystemFlags,
    #[arg(long = "T", default_value_t = 10_000_000)]
    duration: u64,
    #[arg(long, env = "COEXIST_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Generic)]
    mode: ModeArg,
    /// WiFi node count (wifi-lte mode).
    #[arg(long = "nW")]
    n_w: Option<u32>,
    /// Backoff window (wifi-lte mode).
    #[arg(long)]
    cw: Option<u32>,
    /// WiFi packet time in mini-slots (wifi-lte mode).
    #[arg(long = "lW")]
    l_w: Option<u32>,
    /// LTE-U per-slot transmission probability (wifi-lte mode).
    #[arg(long = "qL")]
    q_l: Option<f64>,
    /// Record channel occupancy for the first N mini-slots.
    #[arg(long)]
    trace: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ModeArg {
    Generic,
    WifiLte,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    system: SystemFlags,
    /// Axis to vary.
    #[arg(long, value_enum, required_unless_present = "preset")]
    vary: Option<VaryArg>,
    /// Range as start:end:step (inclusive) or a comma-separated list.
    #[arg(long)]
    range: Option<String>,
    #[arg(long, value_enum, default_value_t = AgainstArg::Analytic)]
    against: AgainstArg,
    /// Emit a pre-configured figure-style table instead of a custom axis.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long = "nW")]
    n_w: Option<u32>,
    #[arg(long)]
    cw: Option<u32>,
    #[arg(long = "lW")]
    l_w: Option<u32>,
    #[arg(long = "qL")]
    q_l: Option<f64>,
    #[arg(long = "T", default_value_t = 10_000_000)]
    duration: u64,
    #[arg(long, env = "COEXIST_SEED", default_value_t = 42)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VaryArg {
    #[value(name = "lC")]
    LC,
    Gamma,
    #[value(name = "nW")]
    NW,
    #[value(name = "lW")]
    LW,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum AgainstArg {
    Analytic,
    Sim,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    /// Aloha throughput against rho_a for several packet times.
    Fig7a,
    /// Optimized total throughput against gamma for several packet times.
    Fig9a,
}

#[derive(Args)]
struct CasestudyArgs {
    #[arg(long = "nW")]
    n_w: Option<u32>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long = "S", default_value_t = 112)]
    s: u32,
    #[arg(long = "lw-max")]
    l_w_max: Option<u32>,
    /// Also run a robustness sweep and write it as CSV.
    #[arg(long, value_enum)]
    robust: Option<RobustArg>,
    #[arg(long = "T", default_value_t = 10_000_000)]
    duration: u64,
    #[arg(long, env = "COEXIST_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Deployment configuration JSON output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Robustness sweep CSV path (required with --robust).
    #[arg(long)]
    sweep_out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RobustArg {
    Lw,
    Nw,
}

/// Top-level JSON config file; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    system: Option<SystemConfig>,
    sim: Option<SimSection>,
    optimize: Option<OptimizeSection>,
    casestudy: Option<DeploymentInput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SimSection {
    duration: Option<u64>,
    seed: Option<u64>,
    wifi: Option<WifiLteConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct OptimizeSection {
    gamma: Option<f64>,
    n_a: Option<u32>,
    n_c: Option<u32>,
    s: Option<u32>,
    l_c_candidates: Option<Vec<u32>>,
    rho_a_step: Option<f64>,
}

#[derive(Serialize)]
struct RunManifest {
    artifact: &'static str,
    version: &'static str,
    schema: &'static str,
    subcommand: String,
    resolved_config: serde_json::Value,
    seeds: Vec<u64>,
    outputs: Vec<String>,
    wall_clock_ms: u128,
}

fn main() {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    };
    std::process::exit(code);
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<CoexError>() {
        Some(CoexError::InvalidConfig(_)) | Some(CoexError::OffsetOutOfRange { .. }) => {
            EXIT_INVALID_CONFIG
        }
        Some(CoexError::Infeasible(_)) => EXIT_INFEASIBLE,
        _ => 1,
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<i32> {
    match cmd {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Casestudy(args) => cmd_casestudy(args),
    }
}

fn load_file_config(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let cfg: FileConfig = serde_json::from_str(&text)
        .map_err(|e| anyhow!(CoexError::InvalidConfig(format!("config file: {e}"))))?;
    Ok(cfg)
}

fn resolve_system(flags: &SystemFlags) -> anyhow::Result<SystemConfig> {
    let file = load_file_config(flags.config.as_deref())?;
    let base = file.system;
    let n_a = flags.n_a.or(base.map(|b| b.n_a)).unwrap_or(1);
    let n_c = flags.n_c.or(base.map(|b| b.n_c)).unwrap_or(1);
    let s = flags.s.or(base.map(|b| b.s)).unwrap_or(10);
    let l_c = flags.l_c.or(base.map(|b| b.l_c)).unwrap_or(10);
    let q_a = match (flags.q_a, flags.rho_a) {
        (Some(q), None) => q,
        (None, Some(rho)) => coexist::config::q_from_rho(rho, n_a, "rho_a")?,
        (None, None) => base.map(|b| b.q_a).unwrap_or(0.0),
        (Some(_), Some(_)) => bail!(CoexError::InvalidConfig(
            "qA and rhoA are mutually exclusive".into()
        )),
    };
    let q_c = match (flags.q_c, flags.rho_c) {
        (Some(q), None) => q,
        (None, Some(rho)) => coexist::config::q_from_rho(rho, n_c, "rho_c")?,
        (None, None) => base.map(|b| b.q_c).unwrap_or(0.0),
        (Some(_), Some(_)) => bail!(CoexError::InvalidConfig(
            "qC and rhoC are mutually exclusive".into()
        )),
    };
    Ok(SystemConfig::new(n_a, n_c, q_a, q_c, s, l_c)?)
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<String> {
    let text = serde_json::to_string_pretty(value)?;
    println!("{text}");
    if let Some(path) = out {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(text)
}

fn write_manifest(
    subcommand: &str,
    resolved: serde_json::Value,
    seeds: Vec<u64>,
    outputs: &[Option<&Path>],
    started: Instant,
    explicit: Option<&Path>,
    always: bool,
) -> anyhow::Result<()> {
    let outputs: Vec<String> = outputs
        .iter()
        .flatten()
        .map(|p| p.display().to_string())
        .collect();
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None if !outputs.is_empty() => PathBuf::from(format!("{}.manifest.json", outputs[0])),
        None if always => PathBuf::from(format!("{subcommand}.manifest.json")),
        None => return Ok(()),
    };
    let manifest = RunManifest {
        artifact: "coexist",
        version: env!("CARGO_PKG_VERSION"),
        schema: "coexist.manifest.v1",
        subcommand: subcommand.to_string(),
        resolved_config: resolved,
        seeds,
        outputs,
        wall_clock_ms: started.elapsed().as_millis(),
    };
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing manifest {}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct AnalyzeReport {
    system: SystemConfig,
    closed_form: ThroughputReport,
    chain_solve: ThroughputReport,
    max_difference: f64,
    agreement: bool,
}

fn cmd_analyze(args: AnalyzeArgs) -> anyhow::Result<i32> {
    let started = Instant::now();
    let system = resolve_system(&args.system)?;
    let closed = throughput_report(&system, Method::ClosedForm)?;
    let chain = throughput_report(&system, Method::ChainSolve)?;
    let max_difference = [
        (closed.lambda_a - chain.lambda_a).abs(),
        (closed.lambda_c - chain.lambda_c).abs(),
        (closed.alpha_c - chain.alpha_c).abs(),
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    let report = AnalyzeReport {
        system,
        closed_form: closed,
        chain_solve: chain,
        max_difference,
        agreement: max_difference <= DUAL_PATH_TOLERANCE,
    };
    write_json(&report, args.out.as_deref())?;
    if let Some(csv_path) = &args.csv {
        let mut w = csv::Writer::from_path(csv_path)?;
        w.write_record(["method", "lambda_A", "lambda_C", "lambda_total", "alpha_C", "route"])?;
        for rep in [&report.closed_form, &report.chain_solve] {
            w.write_record([
                format!("{:?}", rep.provenance),
                rep.lambda_a.to_string(),
                rep.lambda_c.to_string(),
                rep.lambda_total.to_string(),
                rep.alpha_c.to_string(),
                rep.route.clone(),
            ])?;
        }
        w.flush()?;
    }
    if let Some(chain_path) = &args.dump_chain {
        let chain = enumerate_chain(&system)?;
        std::fs::write(chain_path, serde_json::to_string_pretty(&chain)?)?;
    }
    write_manifest(
        "analyze",
        serde_json::to_value(report.system)?,
        vec![],
        &[
            args.out.as_deref(),
            args.csv.as_deref(),
            args.dump_chain.as_deref(),
        ],
        started,
        args.manifest.as_deref(),
        false,
    )?;
    Ok(if report.agreement { 0 } else { EXIT_PATH_MISMATCH })
}

fn cmd_optimize(args: OptimizeArgs) -> anyhow::Result<i32> {
    let started = Instant::now();
    let result = match args.closed_form {
        Some(RegimeArg::NA1) => closed_form_optimum(args.gamma, ClosedFormRegime::NA1, args.s)?,
        Some(RegimeArg::NALarge) => {
            closed_form_optimum(args.gamma, ClosedFormRegime::NALarge, args.s)?
        }
        None => {
            let mut spec = OptimizationSpec::new(args.gamma, args.n_a, args.n_c, args.s)?
                .with_rho_a_step(args.rho_step);
            if let Some(set) = args.lc_set.clone() {
                spec = spec.with_candidates(set);
            }
            optimize(&spec)?
        }
    };
    // re-evaluate the throughputs at the returned optimum
    let scn = Scenario::from_rho(
        args.n_a,
        args.n_c,
        args.s,
        result.l_c_opt,
        result.rho_a_opt,
        result.rho_c_opt.clamp(0.0, 1.0),
    )?;
    let verify = coexist::analytic::throughput_report_scn(&scn)?;
    eprintln!(
        "verification: lambda_A={:.9} lambda_C={:.9} total={:.9} ratio={:.9}",
        verify.lambda_a,
        verify.lambda_c,
        verify.lambda_total,
        verify.lambda_a / verify.lambda_c
    );
    #[derive(Serialize)]
    struct OptimizeOutput<'a> {
        result: &'a coexist::optimizer::OptimizationResult,
        verification: ThroughputReport,
    }
    write_json(&OptimizeOutput { result: &result, verification: verify }, args.out.as_deref())?;
    write_manifest(
        "optimize",
        serde_json::json!({
            "gamma": args.gamma, "n_a": args.n_a, "n_c": args.n_c, "s": args.s,
            "lc_set": args.lc_set, "rho_step": args.rho_step,
        }),
        vec![],
        &[args.out.as_deref()],
        started,
        args.manifest.as_deref(),
        false,
    )?;
    Ok(0)
}

fn build_sim_config(args: &SimulateArgs) -> anyhow::Result<SimConfig> {
    let file = load_file_config(args.system.config.as_deref())?;
    let duration = file.sim.as_ref().and_then(|s| s.duration).unwrap_or(args.duration);
    let seed = file.sim.as_ref().and_then(|s| s.seed).unwrap_or(args.seed);
    let mut cfg = match args.mode {
        ModeArg::Generic => {
            let system = resolve_system(&args.system)?;
            SimConfig::generic(system, duration, seed)?
        }
        ModeArg::WifiLte => {
            let wifi = if let Some(w) = file.sim.as_ref().and_then(|s| s.wifi) {
                w
            } else {
                let n_w = args.n_w.ok_or_else(|| {
                    anyhow!(CoexError::InvalidConfig("--nW required in wifi-lte mode".into()))
                })?;
                let cw = args.cw.ok_or_else(|| {
                    anyhow!(CoexError::InvalidConfig("--cw required in wifi-lte mode".into()))
                })?;
                let l_w = args.l_w.ok_or_else(|| {
                    anyhow!(CoexError::InvalidConfig("--lW required in wifi-lte mode".into()))
                })?;
                let q_l = args.q_l.ok_or_else(|| {
                    anyhow!(CoexError::InvalidConfig("--qL required in wifi-lte mode".into()))
                })?;
                WifiLteConfig::new(n_w, cw, l_w, q_l)?
            };
            SimConfig::wifi_lte(wifi, duration, seed)?
        }
    };
    cfg.trace_limit = args.trace;
    Ok(cfg)
}

fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<i32> {
    let started = Instant::now();
    let cfg = build_sim_config(&args)?;
    let result = sim_run(&cfg)?;
    write_json(&result, args.out.as_deref())?;
    write_manifest(
        "simulate",
        serde_json::to_value(&cfg)?,
        vec![cfg.seed],
        &[args.out.as_deref()],
        started,
        args.manifest.as_deref(),
        true,
    )?;
    Ok(0)
}

/// A sweep table row; `curve` distinguishes families plotted together.
#[derive(Serialize)]
struct SweepRecord {
    axis: String,
    parameter: f64,
    curve: String,
    lambda_a: f64,
    lambda_c: f64,
    lambda_total: f64,
    ratio: f64,
    alpha_c: f64,
    method: String,
    seed: Option<u64>,
    status: String,
}

const SWEEP_CSV_COLUMNS: [&str; 11] = [
    "axis", "parameter", "curve", "lambda_A", "lambda_C", "lambda_total", "ratio", "alpha_C",
    "method", "seed", "status",
];

fn parse_range(spec: &str) -> anyhow::Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(vec![]);
    }
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            bail!(CoexError::InvalidConfig("range must be start:end:step".into()));
        }
        let (start, end, step): (f64, f64, f64) =
            (parts[0].parse()?, parts[1].parse()?, parts[2].parse()?);
        if step <= 0.0 {
            bail!(CoexError::InvalidConfig("range step must be positive".into()));
        }
        let mut points = vec![];
        let mut x = start;
        while x <= end + 1e-12 {
            points.push(x);
            x += step;
        }
        Ok(points)
    } else {
        spec.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(Into::into))
            .collect()
    }
}

fn report_record(
    axis: &str,
    parameter: f64,
    curve: String,
    rep: &ThroughputReport,
    seed: Option<u64>,
) -> SweepRecord {
    SweepRecord {
        axis: axis.to_string(),
        parameter,
        curve,
        lambda_a: rep.lambda_a,
        lambda_c: rep.lambda_c,
        lambda_total: rep.lambda_total,
        ratio: rep.lambda_a / rep.lambda_c,
        alpha_c: rep.alpha_c,
        method: format!("{:?}", rep.provenance).to_lowercase(),
        seed,
        status: "ok".to_string(),
    }
}

fn error_record(axis: &str, parameter: f64, curve: String, err: String) -> SweepRecord {
    SweepRecord {
        axis: axis.to_string(),
        parameter,
        curve,
        lambda_a: f64::NAN,
        lambda_c: f64::NAN,
        lambda_total: f64::NAN,
        ratio: f64::NAN,
        alpha_c: f64::NAN,
        method: String::new(),
        seed: None,
        status: format!("error: {err}"),
    }
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<i32> {
    let started = Instant::now();
    let mut records: Vec<SweepRecord> = Vec::new();

    match args.preset {
        Some(PresetArg::Fig7a) => {
            // Aloha throughput against rho_a, one curve per packet time,
            // with and without CSMA contention
            for &l_c in &[1u32, 5, 10, 15, 30] {
                for &rho_c in &[0.5f64, 1.0] {
                    let mut rho_a = 0.02;
                    while rho_a < 0.999 {
                        let curve = format!("lC={l_c},rhoC={rho_c}");
                        match Scenario::from_rho(20, 20, 10, l_c, rho_a, rho_c)
                            .and_then(|scn| coexist::analytic::throughput_report_scn(&scn))
                        {
                            Ok(rep) => {
                                records.push(report_record("rhoA", rho_a, curve, &rep, None))
                            }
                            Err(e) => {
                                records.push(error_record("rhoA", rho_a, curve, e.to_string()))
                            }
                        }
                        rho_a += 0.02;
                    }
                }
            }
        }
        Some(PresetArg::Fig9a) => {
            // optimized total throughput against gamma for fixed packet
            // times plus the unrestricted optimum
            let n_w = args.n_w.unwrap_or(20);
            let gammas: Vec<f64> = (0..=20).map(|i| 0.1 * 10f64.powf(i as f64 / 10.0)).collect();
            for curve_lc in [Some(40u32), Some(112), Some(224), None] {
                for &gamma in &gammas {
                    let curve = curve_lc.map_or("lC=opt".to_string(), |l| format!("lC={l}"));
                    let spec = OptimizationSpec::new(gamma, 1, n_w, 112)
                        .map(|s| s.with_rho_a_step(1e-2))
                        .map(|s| match curve_lc {
                            Some(l) => s.with_candidates(vec![l]),
                            None => s,
                        });
                    let outcome = spec.and_then(|s| optimize(&s));
                    match outcome {
                        Ok(res) => records.push(SweepRecord {
                            axis: "gamma".into(),
                            parameter: gamma,
                            curve,
                            lambda_a: res.lambda_max * res.achieved_ratio
                                / (1.0 + res.achieved_ratio),
                            lambda_c: res.lambda_max / (1.0 + res.achieved_ratio),
                            lambda_total: res.lambda_max,
                            ratio: res.achieved_ratio,
                            alpha_c: f64::NAN,
                            method: "optimize".into(),
                            seed: None,
                            status: "ok".into(),
                        }),
                        Err(e) => {
                            records.push(error_record("gamma", gamma, curve, e.to_string()))
                        }
                    }
                }
            }
        }
        None => {
            let vary = args.vary.expect("clap enforces vary without preset");
            let range = parse_range(args.range.as_deref().unwrap_or(""))?;
            match vary {
                VaryArg::LC => {
                    let base = resolve_system(&args.system)?;
                    // rows are independent; evaluate them on the worker
                    // pool and keep parameter order
                    records = range
                        .par_iter()
                        .map(|&p| {
                            let l_c = p.round() as u32;
                            let mut cfg = base;
                            cfg.l_c = l_c;
                            let rec = match args.against {
                                AgainstArg::Analytic => {
                                    throughput_report(&cfg, Method::ClosedForm).map(|rep| {
                                        report_record("lC", p, String::new(), &rep, None)
                                    })
                                }
                                AgainstArg::Sim => {
                                    SimConfig::generic(cfg, args.duration, args.seed)
                                        .and_then(|sc| sim_run(&sc))
                                        .map(|r| SweepRecord {
                                            axis: "lC".into(),
                                            parameter: p,
                                            curve: String::new(),
                                            lambda_a: r.lambda_a_hat,
                                            lambda_c: r.lambda_c_hat,
                                            lambda_total: r.lambda_a_hat + r.lambda_c_hat,
                                            ratio: r.lambda_a_hat / r.lambda_c_hat,
                                            alpha_c: r.idle_fraction,
                                            method: "simulation".into(),
                                            seed: Some(args.seed),
                                            status: "ok".into(),
                                        })
                                }
                            };
                            rec.unwrap_or_else(|e| {
                                error_record("lC", p, String::new(), e.to_string())
                            })
                        })
                        .collect();
                }
                VaryArg::Gamma => {
                    let base = resolve_system(&args.system)?;
                    for &gamma in &range {
                        let spec = OptimizationSpec::new(gamma, base.n_a, base.n_c, base.s)
                            .map(|s| s.with_rho_a_step(1e-2))
                            .map(|s| match &args.system.l_c {
                                Some(l) => s.with_candidates(vec![*l]),
                                None => s,
                            });
                        match spec.and_then(|s| optimize(&s)) {
                            Ok(res) => records.push(SweepRecord {
                                axis: "gamma".into(),
                                parameter: gamma,
                                curve: String::new(),
                                lambda_a: res.lambda_max * res.achieved_ratio
                                    / (1.0 + res.achieved_ratio),
                                lambda_c: res.lambda_max / (1.0 + res.achieved_ratio),
                                lambda_total: res.lambda_max,
                                ratio: res.achieved_ratio,
                                alpha_c: f64::NAN,
                                method: "optimize".into(),
                                seed: None,
                                status: "ok".into(),
                            }),
                            Err(e) => records.push(error_record(
                                "gamma",
                                gamma,
                                String::new(),
                                e.to_string(),
                            )),
                        }
                    }
                }
                VaryArg::NW | VaryArg::LW => {
                    let (cw, q_l) = match (args.cw, args.q_l) {
                        (Some(cw), Some(q_l)) => (cw, q_l),
                        _ => bail!(CoexError::InvalidConfig(
                            "--cw and --qL are required for nW/lW sweeps".into()
                        )),
                    };
                    let n_w = args.n_w.unwrap_or(20);
                    let l_w = args.l_w.unwrap_or(104);
                    records = range
                        .par_iter()
                        .map(|&p| {
                            let (n_w_i, l_w_i, axis) = match vary {
                                VaryArg::NW => (p.round() as u32, l_w, "nW"),
                                _ => (n_w, p.round() as u32, "lW"),
                            };
                            WifiLteConfig::new(n_w_i, cw, l_w_i, q_l)
                                .and_then(|w| SimConfig::wifi_lte(w, args.duration, args.seed))
                                .and_then(|sc| sim_run(&sc))
                                .map(|r| SweepRecord {
                                    axis: axis.into(),
                                    parameter: p,
                                    curve: String::new(),
                                    lambda_a: r.lambda_a_hat,
                                    lambda_c: r.lambda_c_hat,
                                    lambda_total: r.lambda_a_hat + r.lambda_c_hat,
                                    ratio: r.lambda_a_hat / r.lambda_c_hat,
                                    alpha_c: r.idle_fraction,
                                    method: "simulation".into(),
                                    seed: Some(args.seed),
                                    status: "ok".into(),
                                })
                                .unwrap_or_else(|e| {
                                    error_record(axis, p, String::new(), e.to_string())
                                })
                        })
                        .collect();
                }
            }
        }
    }

    let mut w = csv::Writer::from_path(&args.out)?;
    w.write_record(SWEEP_CSV_COLUMNS)?;
    for rec in &records {
        w.write_record([
            rec.axis.clone(),
            rec.parameter.to_string(),
            rec.curve.clone(),
            rec.lambda_a.to_string(),
            rec.lambda_c.to_string(),
            rec.lambda_total.to_string(),
            rec.ratio.to_string(),
            rec.alpha_c.to_string(),
            rec.method.clone(),
            rec.seed.map(|s| s.to_string()).unwrap_or_default(),
            rec.status.clone(),
        ])?;
    }
    w.flush()?;
    write_manifest(
        "sweep",
        serde_json::json!({
            "preset": args.preset.map(|p| format!("{p:?}")),
            "vary": args.vary.map(|v| format!("{v:?}")),
            "range": args.range,
            "against": format!("{:?}", args.against),
            "duration": args.duration,
        }),
        vec![args.seed],
        &[Some(args.out.as_path())],
        started,
        args.manifest.as_deref(),
        false,
    )?;

    let failed = records.iter().filter(|r| r.status != "ok").count();
    let ok = records.len() - failed;
    eprintln!("sweep: {ok}/{} rows ok", records.len());
    if records.is_empty() || ok * 10 >= records.len() * 9 {
        Ok(0)
    } else {
        Ok(1)
    }
}

fn cmd_casestudy(args: CasestudyArgs) -> anyhow::Result<i32> {
    let started = Instant::now();
    let file = load_file_config(args.config.as_deref())?;
    let base = file.casestudy;
    let n_w = args.n_w.or(base.map(|b| b.n_w)).ok_or_else(|| {
        anyhow!(CoexError::InvalidConfig("--nW (or a casestudy config) is required".into()))
    })?;
    let gamma = args.gamma.or(base.map(|b| b.gamma)).ok_or_else(|| {
        anyhow!(CoexError::InvalidConfig("--gamma (or a casestudy config) is required".into()))
    })?;
    let input = DeploymentInput {
        n_w,
        gamma,
        s: args.s,
        l_w_max: args.l_w_max.or(base.map(|b| b.l_w_max)).unwrap_or(args.s),
    };
    let config = derive_deployment(&input)?;
    write_json(&config, args.out.as_deref())?;

    let mut sweep_written: Option<PathBuf> = None;
    if let Some(robust) = args.robust {
        let sweep_out = args.sweep_out.clone().ok_or_else(|| {
            anyhow!(CoexError::InvalidConfig("--sweep-out is required with --robust".into()))
        })?;
        let rows: Vec<SweepRow> = match robust {
            RobustArg::Lw => {
                let lo = config.l_w_opt.saturating_sub(8).max(7);
                let points: Vec<u32> = (lo..=input.s).collect();
                robustness_lw(&config, &points, args.duration, args.seed)?
            }
            RobustArg::Nw => {
                let points: Vec<u32> = (n_w.saturating_sub(10).max(1)..=n_w * 2).collect();
                robustness_nw(&config, &points, args.duration, args.seed)?
            }
        };
        let mut w = csv::Writer::from_path(&sweep_out)?;
        w.write_record(SWEEP_COLUMNS)?;
        for row in &rows {
            w.write_record([
                row.parameter.to_string(),
                row.lambda_a.to_string(),
                row.lambda_c.to_string(),
                row.lambda_total.to_string(),
                row.ratio.to_string(),
                row.method.clone(),
                row.seed.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        sweep_written = Some(sweep_out);
    }

    write_manifest(
        "casestudy",
        serde_json::to_value(input)?,
        vec![args.seed],
        &[args.out.as_deref(), sweep_written.as_deref()],
        started,
        args.manifest.as_deref(),
        false,
    )?;
    Ok(0)
}
