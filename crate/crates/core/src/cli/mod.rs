//! Batch entry points. Every command writes its artefacts into one directory
//! and maps failures onto exit codes: 2 for configuration problems, 3 for
//! numerical failures, 1 for I/O.

pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use config::{apply_override, resolve_output, RunConfig, OUTPUT_ROOT_ENV};

use crate::diagnostics::{fit_concentration, l2_norm_squared, CsvSink, Monitor, RunSummary};
use crate::error::Error;
use crate::evolution::{max_speed_bound, Trajectory};
use crate::grid::Grid;
use crate::kernel::{
    log_grid, operator_norm_probe, verify_kernel_bounds, BoundReport, ExponentSet, KernelEvaluator, ProbeKind,
    ProbeParams,
};

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const VERSION_STAMP: &str = concat!("cylmodes ", env!("CARGO_PKG_VERSION"));
pub const MANIFEST: &str = "MANIFEST.sha256";
pub const SUMMARY: &str = "summary.json";

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: Error,
}

impl Failure {
    pub fn config(error: Error) -> Self {
        Failure { code: EXIT_CONFIG, error }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match &error {
            Error::Config(_)
            | Error::InvalidInput(_)
            | Error::Range { .. }
            | Error::Constraint { .. }
            | Error::GridMismatch(_) => EXIT_CONFIG,
            Error::SolverFailure { .. } | Error::Cfl { .. } | Error::Domain(_) => EXIT_NUMERICAL,
            Error::Io { .. } | Error::Checkpoint(_) => EXIT_IO,
        };
        Failure { code, error }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

#[derive(Parser, Debug)]
#[command(name = "cylmodes", version, about = "Azimuthal-mode Navier-Stokes laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evolve the configured initial data and write series, summary and checkpoints.
    Simulate(SimulateArgs),
    /// Scan weighted kernel suprema against their claimed bounds.
    VerifyKernel(KernelArgs),
    /// Estimate weighted operator norms of the inverse and their decay in m.
    ProbeOperator(ProbeArgs),
    /// Repeat a simulation over several base frequencies and fit exponents.
    Sweep(SweepArgs),
    /// Print a run directory's summary after checking its manifest.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Overrides {
    /// Override a config key, e.g. `--set grid.nr=64` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Output directory (relative paths resolve under $CYLNS_OUTPUT_ROOT).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl Overrides {
    fn assignments(&self) -> Vec<String> {
        let mut out = self.set.clone();
        if let Some(dt) = self.dt {
            out.push(format!("time.dt={dt:e}"));
        }
        if let Some(t) = self.t_final {
            out.push(format!("time.t_final={t:e}"));
        }
        if let Some(dir) = &self.output {
            let quoted = toml::Value::String(dir.display().to_string());
            out.push(format!("output.dir={quoted}"));
        }
        out
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    pub config: PathBuf,
    /// Base frequencies to run.
    #[arg(long = "n", value_delimiter = ',', default_values_t = [4u32, 8, 16])]
    pub n_list: Vec<u32>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    pub run_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Literal,
    GlobalPower,
    GlobalDeriv,
    InverseM,
    InverseMDeriv,
    LogM,
    LogMDeriv,
    FractionalDecay,
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    /// Explicit wavenumbers; otherwise every m in [m-min, m-max].
    #[arg(long = "m", value_delimiter = ',')]
    pub m: Vec<u32>,
    #[arg(long, default_value_t = 0)]
    pub m_min: u32,
    #[arg(long, default_value_t = 6)]
    pub m_max: u32,
    #[arg(long, default_value_t = 1e-3)]
    pub s_min: f64,
    #[arg(long, default_value_t = 1e4)]
    pub s_max: f64,
    #[arg(long, default_value_t = 400)]
    pub points: usize,
    #[arg(long = "family", value_enum, value_delimiter = ',', default_values_t = [Family::Literal])]
    pub families: Vec<Family>,
    /// Weight exponents for the families bounding `F_m` itself.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0])]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 3.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.25)]
    pub delta_prime: f64,
    #[arg(long, default_value = "kernel_bounds")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Inverse,
    InverseOfGradient,
    GradientOfInverse,
}

impl From<Kind> for ProbeKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Inverse => ProbeKind::Inverse,
            Kind::InverseOfGradient => ProbeKind::InverseOfGradient,
            Kind::GradientOfInverse => ProbeKind::GradientOfInverse,
        }
    }
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    #[arg(long, default_value_t = 6.0)]
    pub p: f64,
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = Kind::Inverse)]
    pub kind: Kind,
    #[arg(long = "m", value_delimiter = ',', default_values_t = [4u32, 8, 16, 32])]
    pub m: Vec<u32>,
    #[arg(long, default_value_t = 4)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub nr: usize,
    #[arg(long, default_value_t = 64)]
    pub nz: usize,
    #[arg(long, default_value_t = 4.0)]
    pub rmax: f64,
    #[arg(long, default_value_t = 4.0)]
    pub lz: f64,
    #[arg(long, default_value = "operator_probe")]
    pub out: PathBuf,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::VerifyKernel(a) => cmd_verify_kernel(&a),
        Command::ProbeOperator(a) => cmd_probe_operator(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Report(a) => cmd_report(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}

fn load(path: &Path, overrides: &Overrides) -> CmdResult<RunConfig> {
    let cfg = RunConfig::load(path, &overrides.assignments()).map_err(Failure::config)?;
    cfg.validate().map_err(Failure::config)?;
    Ok(cfg)
}

pub fn cmd_simulate(args: &SimulateArgs) -> CmdResult<i32> {
    let cfg = load(&args.config, &args.overrides)?;
    let out = simulate(&cfg)?;
    println!("{}", out.dir.display());
    Ok(0)
}

/// A completed run and where it was written.
pub struct SimOutcome {
    pub dir: PathBuf,
    pub summary: RunSummary,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e).into())
}

fn write_json(path: &Path, v: &Value) -> CmdResult<()> {
    write(path, serde_json::to_string_pretty(v).expect("json serialises") + "\n")
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs `cfg` to completion, writing config copy, version stamp, series,
/// summary, checkpoints and a checksum manifest into the run directory.
pub fn simulate(cfg: &RunConfig) -> CmdResult<SimOutcome> {
    let initial = cfg.initial_state()?;
    let stepper_cfg = cfg.stepper_config(&initial)?;
    let (n_base, k_max, period) = cfg.container();
    let dir = cfg.run_dir();
    let ck_dir = dir.join("checkpoints");
    fs::create_dir_all(&ck_dir).map_err(|e| Error::io(&ck_dir, e))?;
    let config_text = cfg.to_toml_string();
    write(&dir.join("config.toml"), &config_text)?;
    write(&dir.join("VERSION"), format!("{VERSION_STAMP}\n"))?;

    let mut traj = Trajectory::start(&initial, stepper_cfg)?;
    let mut monitor = Monitor::new(
        cfg.energy_params(),
        n_base,
        k_max,
        traj.total_steps(),
        cfg.diag.cadence,
        period,
    )?;
    if cfg.output.format == "csv" {
        monitor = monitor.with_csv(CsvSink::create(&dir.join("series.csv"), k_max)?);
    }
    eprintln!(
        "simulate: N = {} K = {} (container base {n_base}, {k_max} modes), {}x{} grid, dt = {:e}, {} steps",
        cfg.modes.n,
        cfg.modes.k,
        cfg.grid.nr,
        cfg.grid.nz,
        traj.dt(),
        traj.total_steps()
    );
    let result = traj.run(&mut monitor, Some(&ck_dir));
    if cfg.output.format == "json" {
        let rows = serde_json::to_value(monitor.rows()).expect("rows serialise");
        write_json(&dir.join("series.json"), &rows)?;
    }
    let summary = monitor.summary();
    let mut doc = match serde_json::to_value(&summary).expect("summary serialises") {
        Value::Object(m) => m,
        _ => unreachable!("summary is a struct"),
    };
    let (status, failure) = match &result {
        Ok(()) => ("completed", None),
        Err(f) => ("failed", Some(f.to_string())),
    };
    doc.insert("status".into(), json!(status));
    doc.insert("error".into(), json!(failure));
    doc.insert("version".into(), json!(VERSION_STAMP));
    doc.insert("seed".into(), json!(cfg.seed));
    doc.insert("config_sha256".into(), json!(sha256_hex(config_text.as_bytes())));
    doc.insert(
        "container".into(),
        json!({"n_base": n_base, "k_max": k_max, "period": period, "restricted": initial.is_restricted()}),
    );
    doc.insert(
        "initial".into(),
        json!({
            "l2_squared": l2_norm_squared(&initial),
            "max_speed_bound": max_speed_bound(&initial),
        }),
    );
    write_json(&dir.join(SUMMARY), &Value::Object(doc))?;
    write_manifest(&dir)?;
    match result {
        Ok(()) => Ok(SimOutcome { dir, summary }),
        Err(f) => Err(Failure {
            code: EXIT_NUMERICAL,
            error: match f.error {
                Error::Io { .. } => return Err(f.error.into()),
                _ => Error::Domain(f.to_string()),
            },
        }),
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> CmdResult<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if path.file_name().is_some_and(|n| n != MANIFEST) {
            out.push(path.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}

fn manifest_lines(dir: &Path) -> CmdResult<Vec<String>> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.sort();
    files
        .iter()
        .map(|rel| {
            let path = dir.join(rel);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            Ok(format!("{}  {}", sha256_hex(&bytes), rel.display()))
        })
        .collect()
}

/// `sha256sum`-compatible manifest of every file in `dir`.
pub fn write_manifest(dir: &Path) -> CmdResult<()> {
    let mut text = manifest_lines(dir)?.join("\n");
    text.push('\n');
    write(&dir.join(MANIFEST), text)
}

/// Files whose checksum differs from the manifest, or that were added or removed.
pub fn verify_manifest(dir: &Path) -> CmdResult<Vec<String>> {
    let path = dir.join(MANIFEST);
    let recorded = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let recorded: Vec<&str> = recorded.lines().collect();
    let current = manifest_lines(dir)?;
    let mut bad: Vec<String> = recorded
        .iter()
        .filter(|l| !current.iter().any(|c| c == *l))
        .map(|l| l.split_once("  ").map_or(l.to_string(), |(_, f)| f.to_string()))
        .collect();
    let added: Vec<String> = current
        .iter()
        .filter(|c| !recorded.contains(&c.as_str()))
        .filter_map(|c| c.split_once("  ").map(|(_, f)| f.to_string()))
        .filter(|f| !bad.contains(f))
        .collect();
    bad.extend(added);
    Ok(bad)
}

pub fn cmd_sweep(args: &SweepArgs) -> CmdResult<i32> {
    let base = load(&args.config, &args.overrides)?;
    if args.n_list.len() < 3 {
        return Err(Failure::config(Error::Config(vec![format!(
            "--n needs at least 3 frequencies for an exponent fit, got {}",
            args.n_list.len()
        )])));
    }
    let root = base.run_dir();
    let members: Vec<RunConfig> = args
        .n_list
        .iter()
        .map(|&n| {
            let mut c = base.clone();
            c.modes.n = n;
            c.init.n = None;
            c.output.dir = root.join(format!("N{n:03}"));
            c.validate().map_err(Failure::config)?;
            Ok(c)
        })
        .collect::<CmdResult<_>>()?;
    // members are independent; run them side by side
    let results: Vec<CmdResult<SimOutcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = members.iter().map(|c| s.spawn(move || simulate(c))).collect();
        handles.into_iter().map(|h| h.join().expect("sweep member panicked")).collect()
    });
    let mut outcomes = Vec::new();
    for r in results {
        outcomes.push(r?);
    }
    let reports: Vec<_> = outcomes.iter().map(|o| o.summary.concentration.clone()).collect();
    let fit = fit_concentration(&reports)?;
    let runs: Vec<Value> = outcomes
        .iter()
        .map(|o| {
            json!({
                "dir": o.dir.display().to_string(),
                "concentration": o.summary.concentration,
                "extremes": o.summary.extremes,
            })
        })
        .collect();
    let doc = json!({
        "version": VERSION_STAMP,
        "seed": base.seed,
        "n_list": args.n_list,
        "fit": fit,
        "runs": runs,
    });
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    write_json(&root.join("sweep.json"), &doc)?;
    println!(
        "u0 L3 sup {:?}: exponent {:?}; tail sums {:?}",
        fit.u0_l3_sup, fit.u0_l3_exponent, fit.tail_sum
    );
    println!("{}", root.join("sweep.json").display());
    Ok(0)
}

pub fn cmd_report(args: &ReportArgs) -> CmdResult<i32> {
    let dir = &args.run_dir;
    let path = dir.join(SUMMARY);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let s: Value = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let tampered = verify_manifest(dir)?;
    let f = |v: &Value| v.as_f64().map_or("-".to_string(), |x| format!("{x:.6e}"));
    println!("run        {}", dir.display());
    println!("version    {}", s["version"].as_str().unwrap_or("?"));
    println!("status     {}", s["status"].as_str().unwrap_or("?"));
    println!("steps      {} (dt {}, horizon {})", s["steps"], f(&s["dt"]), f(&s["t_final"]));
    println!("container  {}", s["container"]);
    let e = &s["extremes"];
    for key in ["energy_budget", "plancherel", "odevity_leak", "periodicity_leak", "div_max", "top_mode_fraction"] {
        println!("{key:<18} {}", f(&e[key]));
    }
    let c = &s["concentration"];
    for key in ["u0_l3_sup", "tail_sum", "l5_norm"] {
        println!("{key:<18} {}", f(&c[key]));
    }
    println!("{:<18} {}", "ep_rz", f(&s["ep_rz"]));
    println!("{:<18} {}", "ep_th", f(&s["ep_th"]));
    println!("{:<18} {}", "d", f(&s["d"]));
    println!("fitted     {}", s["fitted"]);
    if tampered.is_empty() {
        println!("manifest   ok");
        Ok(0)
    } else {
        println!("manifest   MISMATCH: {}", tampered.join(", "));
        Ok(EXIT_IO)
    }
}

fn exponent_sets(a: &KernelArgs) -> Vec<ExponentSet> {
    let mut sets = Vec::new();
    for fam in &a.families {
        let (beta, gamma) = (a.beta, a.gamma);
        match fam {
            Family::Literal => sets.push(ExponentSet::LargeSLiteral),
            Family::GlobalPower => sets.extend(a.alpha.iter().map(|&alpha| ExponentSet::GlobalPower { alpha })),
            Family::InverseM => sets.extend(a.alpha.iter().map(|&alpha| ExponentSet::InverseM { alpha })),
            Family::LogM => sets.extend(a.alpha.iter().map(|&alpha| ExponentSet::LogM { alpha })),
            Family::GlobalDeriv => sets.push(ExponentSet::GlobalDeriv { beta, gamma }),
            Family::InverseMDeriv => sets.push(ExponentSet::InverseMDeriv { beta, gamma }),
            Family::LogMDeriv => sets.push(ExponentSet::LogMDeriv { beta, gamma }),
            Family::FractionalDecay => sets.push(ExponentSet::FractionalDecay {
                delta: a.delta,
                delta_prime: a.delta_prime,
            }),
        }
    }
    sets
}

fn write_report(report: &BoundReport, dir: &Path, stem: &str) -> CmdResult<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    report.write_csv(file)?;
    let mut summary = report.summary_json();
    summary["version"] = json!(VERSION_STAMP);
    write_json(&dir.join(format!("{stem}.json")), &summary)?;
    write_manifest(dir)
}

fn print_report(report: &BoundReport) {
    for s in &report.summaries {
        let verdict = if s.pass { "pass" } else { "FAIL" };
        let slope = s.slope.map_or(String::new(), |v| format!(" slope {v:.3}"));
        println!(
            "{verdict} {:<20} {:<28} m {}..{} constant {:.4e} spread {:.3e}{slope}",
            s.lemma, s.exponent, s.m_min, s.m_max, s.constant, s.spread
        );
    }
}

pub fn cmd_verify_kernel(args: &KernelArgs) -> CmdResult<i32> {
    let m_list: Vec<u32> = if args.m.is_empty() {
        (args.m_min..=args.m_max).collect()
    } else {
        args.m.clone()
    };
    if !(args.s_min > 0.0 && args.s_max > args.s_min) || args.points < 2 {
        return Err(Failure::config(Error::Config(vec![format!(
            "need 0 < s-min < s-max and points >= 2 (got {}, {}, {})",
            args.s_min, args.s_max, args.points
        )])));
    }
    let s_grid = log_grid(args.s_min, args.s_max, args.points);
    let sets = exponent_sets(args);
    let report = verify_kernel_bounds(&KernelEvaluator::default(), &m_list, &s_grid, &sets)?;
    let dir = resolve_output(&args.out);
    write_report(&report, &dir, "bounds")?;
    print_report(&report);
    println!("{}", dir.display());
    Ok(if report.all_pass() { 0 } else { EXIT_NUMERICAL })
}

pub fn cmd_probe_operator(args: &ProbeArgs) -> CmdResult<i32> {
    let params = ProbeParams {
        p: args.p,
        q: args.q,
        alpha: args.alpha,
        beta: args.beta,
        kind: args.kind.into(),
    };
    params.validate()?;
    let grid = Grid::new(args.nr, args.nz, args.rmax, args.lz)?;
    let report = operator_norm_probe(&grid, &args.m, &params, args.trials, args.seed)?;
    let dir = resolve_output(&args.out);
    write_report(&report, &dir, "probe")?;
    print_report(&report);
    println!("{}", dir.display());
    Ok(if report.all_pass() { 0 } else { EXIT_NUMERICAL })
}
