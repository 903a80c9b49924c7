//! Command-line front end: `enumerate`, `optimize`, `sweep`, `simulate`, `compare`.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 on usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use gbm_core::montecarlo::{chi2_compare, simulate, SimConfig};
use gbm_core::optimizer::{find_ogbm_with, SearchOptions};
use gbm_core::statistics::{output_distribution, SeriesConfig};
use gbm_core::sweeps::{
    diff_vs_asym, n_scaling, occurrence_map, persist, round_sig, surface_sweep, write_csv,
    AxisRange, GridSpec, Half, Rounded, SweepMeta, OUTPUT_DIGITS,
};
use gbm_core::tree::{
    catalan, dedup_structures, generate_canonical_sequences, raw_sequences, DEFAULT_ROUTER_CAP,
};
use gbm_core::{ArmVector, LossParams};

#[derive(Debug, Parser)]
#[command(name = "gbm", version, about = "Optimal binary-tree multiplexers for heralded single-photon sources")]
pub struct Cli {
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count (and optionally list) the router sequences for N_R routers.
    Enumerate(EnumerateArgs),
    /// Find the optimal structure for N_R routers and given losses.
    Optimize(OptimizeArgs),
    /// Parameter sweeps, written as CSV.
    Sweep(SweepArgs),
    /// Monte Carlo simulation of the source.
    Simulate(SimulateArgs),
    /// Chi-squared comparison of simulation and analytic statistics.
    Compare(CompareArgs),
}

fn probability(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is out of range: probabilities must lie in (0, 1]"))
    }
}

fn mean_photon_number(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v <= 2.0 {
        Ok(v)
    } else {
        Err(format!("{v} is out of range: lambda must lie in (0, 2]"))
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct LossArgs {
    /// Router transmission-port efficiency.
    #[arg(long, default_value = "0.985", value_parser = probability)]
    pub vt: f64,
    /// Router reflection-port efficiency.
    #[arg(long, default_value = "0.99", value_parser = probability)]
    pub vr: f64,
    /// General transmission coefficient.
    #[arg(long, default_value = "0.98", value_parser = probability)]
    pub vb: f64,
    /// Detector efficiency.
    #[arg(long, default_value = "0.95", value_parser = probability)]
    pub vd: f64,
}

impl LossArgs {
    fn params(&self) -> anyhow::Result<LossParams> {
        Ok(LossParams::new(self.vt, self.vr, self.vb, self.vd)?)
    }
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[arg(long)]
    pub routers: u32,
    /// Print every sequence with its transmission multiset.
    #[arg(long)]
    pub raw: bool,
    /// Also count distinct transmission multisets.
    #[arg(long)]
    pub dedup: bool,
    /// Walk all N_R! attachment sequences instead of the canonical ones.
    #[arg(long)]
    pub all_sequences: bool,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, default_value_t = 10)]
    pub routers: u32,
    #[command(flatten)]
    pub loss: LossArgs,
    /// Report this many runner-up structures.
    #[arg(long, default_value_t = 0)]
    pub top: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Surface,
    Diff,
    Occurrence,
    Nscaling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HalfArg {
    Upper,
    Lower,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub kind: SweepKind,
    #[command(flatten)]
    pub loss: LossArgs,
    #[arg(long, default_value = "0.9", value_parser = probability)]
    pub vt_lo: f64,
    #[arg(long, default_value = "0.99", value_parser = probability)]
    pub vt_hi: f64,
    #[arg(long, default_value = "0.9", value_parser = probability)]
    pub vr_lo: f64,
    #[arg(long, default_value = "0.99", value_parser = probability)]
    pub vr_hi: f64,
    /// Points per axis.
    #[arg(long, default_value_t = 46)]
    pub steps: usize,
    /// Number of multiplexed units N = N_R + 1.
    #[arg(long, default_value_t = 11)]
    pub units: usize,
    #[arg(long, value_enum, default_value = "upper")]
    pub half: HalfArg,
    /// Comma-separated N values for `nscaling`.
    #[arg(long, default_value = "2,3,4,5,6,7,8,9,10,11,12")]
    pub n_list: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON file: an array of arm transmissions, an object with an `arms`
    /// array, or the report written by `optimize`.
    #[arg(long)]
    pub arms: PathBuf,
    /// Defaults to `lambda_opt` from the arms file.
    #[arg(long, value_parser = mean_photon_number)]
    pub lambda: Option<f64>,
    /// Defaults to the detector efficiency stored in the arms file, else 0.95.
    #[arg(long, value_parser = probability)]
    pub vd: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub sim: SimulateArgs,
    /// Highest photon number tabulated analytically.
    #[arg(long, default_value_t = 20)]
    pub i_max: usize,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn parse_and_dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            let _ = writeln!(err, "error: --threads must be at least 1");
            return 2;
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    let mut buf_out = Vec::new();
    let mut buf_err = Vec::new();
    let result = pool.install(|| dispatch(&cli.command, &mut buf_out, &mut buf_err));
    let _ = out.write_all(&buf_out);
    let _ = err.write_all(&buf_err);
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

/// Invalid input detected after argument parsing.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn dispatch(cmd: &Command, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    match cmd {
        Command::Enumerate(a) => enumerate(a, out),
        Command::Optimize(a) => optimize(a, out),
        Command::Sweep(a) => sweep(a, out, err),
        Command::Simulate(a) => run_simulate(a, out),
        Command::Compare(a) => compare(a, out),
    }
}

/// Rounds every floating-point number in `v` to the output precision.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"), OUTPUT_DIGITS);
            if let Some(num) = serde_json::Number::from_f64(x) {
                *n = num;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut v = serde_json::to_value(value)?;
    round_json(&mut v);
    let text = serde_json::to_string_pretty(&v)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => writeln!(out, "{text}")?,
    }
    Ok(())
}

fn enumerate(a: &EnumerateArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    if a.routers == 0 {
        return Err(usage("--routers must be at least 1"));
    }
    let seqs: Box<dyn Iterator<Item = _>> = if a.all_sequences {
        Box::new(raw_sequences(a.routers, DEFAULT_ROUTER_CAP)?)
    } else {
        Box::new(generate_canonical_sequences(a.routers)?)
    };
    let mut report = json!({
        "routers": a.routers,
        "catalan": catalan(a.routers)?,
        "canonical": !a.all_sequences,
    });
    if a.raw || a.dedup {
        let seqs: Vec<_> = seqs.collect();
        report["count"] = json!(seqs.len());
        if a.dedup {
            report["distinct_sets"] = json!(dedup_structures(seqs.iter().cloned()).len());
        }
        if a.raw {
            let listed: Vec<_> = seqs
                .into_iter()
                .map(|s| {
                    let arms = gbm_core::arm_transmissions(
                        &gbm_core::build_tree(&s).expect("enumerated sequences are valid"),
                    );
                    json!({ "sequence": s, "arms": arms })
                })
                .collect();
            report["structures"] = json!(listed);
        }
    } else {
        report["count"] = json!(seqs.count());
    }
    emit(&report, None, out)
}

fn optimize(a: &OptimizeArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let params = a.loss.params()?;
    let opts = SearchOptions {
        top_k: a.top,
        ..SearchOptions::default()
    };
    let report = find_ogbm_with(a.routers, &params, &opts)?;
    emit(&report, a.out.as_deref(), out)
}

fn parse_n_list(s: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|_| usage(format!("bad N value `{t}` in --n-list"))))
        .collect()
}

fn grid_from(a: &SweepArgs) -> anyhow::Result<GridSpec> {
    let grid = GridSpec {
        vt_range: AxisRange::new(a.vt_lo, a.vt_hi, a.steps).map_err(|e| usage(e.to_string()))?,
        vr_range: AxisRange::new(a.vr_lo, a.vr_hi, a.steps).map_err(|e| usage(e.to_string()))?,
        v_d: a.loss.vd,
        v_b: a.loss.vb,
        n_units: a.units,
    };
    grid.validate().map_err(|e| usage(e.to_string()))?;
    Ok(grid)
}

fn write_rows<R: Serialize + Rounded>(
    rows: &[R],
    meta: &SweepMeta,
    path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> anyhow::Result<()> {
    match path {
        Some(p) => persist(p, rows, meta).with_context(|| format!("writing {}", p.display()))?,
        None => {
            write_csv(&mut *out, rows)?;
            writeln!(err, "{}", serde_json::to_string(meta)?)?;
        }
    }
    Ok(())
}

fn sweep(a: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    let started = Instant::now();
    let path = a.out.as_deref();
    if a.kind == SweepKind::Nscaling {
        let params = a.loss.params()?;
        let n_list = parse_n_list(&a.n_list)?;
        let rows = n_scaling(&params, &n_list)?;
        let mut meta = SweepMeta::new("nscaling", rows.len(), started);
        meta.params = Some(params);
        meta.n_list = Some(n_list);
        return write_rows(&rows, &meta, path, out, err);
    }
    let grid = grid_from(a)?;
    match a.kind {
        SweepKind::Surface => {
            let rows = surface_sweep(&grid)?;
            let meta = with_grid(SweepMeta::new("surface", rows.len(), started), grid);
            write_rows(&rows, &meta, path, out, err)
        }
        SweepKind::Diff => {
            let rows = diff_vs_asym(&grid)?;
            let meta = with_grid(SweepMeta::new("diff", rows.len(), started), grid);
            write_rows(&rows, &meta, path, out, err)
        }
        SweepKind::Occurrence => {
            let half = match a.half {
                HalfArg::Upper => Half::Upper,
                HalfArg::Lower => Half::Lower,
            };
            let rows = occurrence_map(&grid, half)?.rows();
            let meta = with_grid(SweepMeta::new("occurrence", rows.len(), started), grid);
            write_rows(&rows, &meta, path, out, err)
        }
        SweepKind::Nscaling => unreachable!("handled above"),
    }
}

fn with_grid(mut meta: SweepMeta, grid: GridSpec) -> SweepMeta {
    meta.grid = Some(grid);
    meta
}

/// Arms and optional operating point read from a JSON file.
struct ArmsFile {
    arms: ArmVector,
    lambda: Option<f64>,
    v_d: Option<f64>,
}

fn read_arms(path: &Path) -> anyhow::Result<ArmsFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let (arms_v, lambda, v_d) = match &v {
        Value::Array(_) => (v.clone(), None, None),
        Value::Object(map) => {
            if let Some(opt) = map.get("optimum") {
                (
                    opt.get("arms").cloned().ok_or_else(|| anyhow!("`optimum.arms` missing"))?,
                    opt.get("lambda_opt").and_then(Value::as_f64),
                    map.get("params").and_then(|p| p.get("v_d")).and_then(Value::as_f64),
                )
            } else {
                (
                    map.get("arms").cloned().ok_or_else(|| anyhow!("`arms` missing"))?,
                    map.get("lambda").or_else(|| map.get("lambda_opt")).and_then(Value::as_f64),
                    map.get("v_d").and_then(Value::as_f64),
                )
            }
        }
        _ => bail!("{} must hold a JSON array or object", path.display()),
    };
    let raw: Vec<f64> = serde_json::from_value(arms_v).context("arms must be an array of numbers")?;
    let arms = ArmVector::from_unsorted(raw)?;
    Ok(ArmsFile { arms, lambda, v_d })
}

fn sim_config(a: &SimulateArgs) -> anyhow::Result<SimConfig> {
    let file = read_arms(&a.arms)?;
    let lambda = a
        .lambda
        .or(file.lambda)
        .ok_or_else(|| usage("--lambda is required when the arms file has no lambda_opt"))?;
    let v_d = a.vd.or(file.v_d).unwrap_or(0.95);
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    Ok(SimConfig {
        arms: file.arms,
        lambda,
        v_d,
        trials: a.trials,
        seed: a.seed,
    })
}

fn run_simulate(a: &SimulateArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let config = sim_config(a)?;
    let result = simulate(&config)?;
    let report = json!({
        "arms": config.arms,
        "lambda": config.lambda,
        "v_d": config.v_d,
        "result": result,
    });
    emit(&report, a.out.as_deref(), out)
}

fn compare(a: &CompareArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let config = sim_config(&a.sim)?;
    let series = SeriesConfig {
        i_max: a.i_max,
        ..SeriesConfig::default()
    };
    let analytic = output_distribution(&config.arms, config.lambda, config.v_d, &series)?;
    let sim = simulate(&config)?;
    let chi2 = chi2_compare(&sim, &analytic)?;
    let report = json!({
        "arms": config.arms,
        "lambda": config.lambda,
        "v_d": config.v_d,
        "trials": config.trials,
        "seed": config.seed,
        "analytic": analytic,
        "simulated": sim,
        "chi2": chi2,
    });
    emit(&report, a.sim.out.as_deref(), out)
}
