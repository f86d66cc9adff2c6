use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xpikesim_core::aimc::{gdc_calibrate_per_tile, CalibrationRecord, HwConfig};
use xpikesim_core::cost::{compare_baselines, cost_report, paper_calib, preset_config, BaselineRow, CostReport, EnergyTable, Impl};
use xpikesim_core::matrix::RealMatrix;
use xpikesim_core::model::{
    run_inference, Arch, InferenceResult, Model, ModelConfig, OracleGap, ProgrammedModel, RunOptions,
    TokenBatch, TraceRecord,
};

use crate::error::{CliError, CliResult};
use crate::manifest::{load_model, save_model, write_file, MAX_WEIGHT};

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Hardware config from a file, or the built-in default.
pub fn load_hw(path: Option<&Path>) -> CliResult<HwConfig> {
    match path {
        None => Ok(HwConfig::default()),
        Some(p) => HwConfig::from_json(&read_text(p)?).map_err(|e| CliError::malformed(p.display().to_string(), e)),
    }
}

/// Input rates: a JSON array of token rows.
pub fn load_input(path: &Path) -> CliResult<TokenBatch> {
    let what = || path.display().to_string();
    let rows: Vec<Vec<f64>> = serde_json::from_str(&read_text(path)?).map_err(|e| CliError::malformed(what(), e))?;
    if rows.is_empty() {
        return Err(CliError::malformed(what(), "no tokens"));
    }
    let m = RealMatrix::from_rows(&rows).map_err(|e| CliError::malformed(what(), e))?;
    TokenBatch::new(m).map_err(|e| CliError::malformed(what(), e))
}

pub fn load_calibration(path: &Path) -> CliResult<CalibrationRecord> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::malformed(path.display().to_string(), e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Write to `out`, or stdout when absent.
pub fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunArgs {
    pub model: PathBuf,
    pub input: PathBuf,
    pub timesteps: Option<usize>,
    pub seed: u64,
    pub hw: Option<PathBuf>,
    pub t_now: f64,
    /// Run global drift compensation at `t_now` before inference.
    pub calibrate: bool,
    pub probes: usize,
    /// Previously written calibration record.
    pub calib: Option<PathBuf>,
    pub oracle: bool,
    pub trace: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub t_now: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gdc_alpha: Option<f64>,
    #[serde(flatten)]
    pub result: InferenceResult,
}

pub fn cmd_run(args: &RunArgs) -> CliResult<(RunReport, Vec<TraceRecord>)> {
    if !(args.t_now.is_finite() && args.t_now >= 0.0) {
        return Err(CliError::Usage(format!("--t-now {} must be a non-negative time", args.t_now)));
    }
    let model = load_model(&args.model)?;
    let batch = load_input(&args.input)?;
    let hw = load_hw(args.hw.as_deref())?;
    let cfg = &model.config;
    if (batch.tokens(), batch.features()) != (cfg.tokens, cfg.d_model) {
        return Err(CliError::Dimension(format!(
            "input is {}x{}, model expects {}x{}",
            batch.tokens(),
            batch.features(),
            cfg.tokens,
            cfg.d_model
        )));
    }
    let pm = ProgrammedModel::program(model, &hw, args.seed)?;
    let calib = match (&args.calib, args.calibrate) {
        (Some(_), true) => return Err(CliError::Usage("--calib and --calibrate are exclusive".into())),
        (Some(p), false) => Some(load_calibration(p)?),
        (None, true) => Some(pm.calibrate(args.probes, args.t_now)?),
        (None, false) => None,
    };
    let opts = RunOptions { steps: args.timesteps, calib: calib.clone(), trace: args.trace, oracle: args.oracle };
    let mut result = run_inference(&pm, &batch, args.t_now, &opts)?;
    let trace = std::mem::take(&mut result.trace);
    let report = RunReport { seed: args.seed, t_now: args.t_now, gdc_alpha: calib.map(|c| c.alpha), result };
    Ok((report, trace))
}

/// Trace records, one JSON object per line.
pub fn trace_lines(trace: &[TraceRecord]) -> String {
    trace.iter().map(|r| serde_json::to_string(r).expect("serializable") + "\n").collect()
}

#[derive(Clone, Debug)]
pub struct CalibrateArgs {
    pub model: PathBuf,
    pub hw: Option<PathBuf>,
    pub seed: u64,
    pub t_now: f64,
    pub probes: usize,
    pub per_tile: bool,
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> CliResult<CalibrationRecord> {
    let model = load_model(&args.model)?;
    let hw = load_hw(args.hw.as_deref())?;
    let pm = ProgrammedModel::program(model, &hw, args.seed)?;
    let rec = match args.per_tile {
        false => pm.calibrate(args.probes, args.t_now)?,
        true => gdc_calibrate_per_tile(&pm.tiles(), args.probes, args.t_now, args.seed)?,
    };
    Ok(rec)
}

#[derive(Clone, Debug, Default)]
pub struct CostArgs {
    pub preset: Option<String>,
    pub config: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// `all` or a comma-separated list of implementation names.
    pub impls: String,
    pub table: Option<PathBuf>,
    pub timesteps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostOutput {
    pub config: ModelConfig,
    pub table: String,
    pub reports: Vec<CostReport>,
    /// Totals of every implementation relative to the accelerator.
    pub comparison: Vec<BaselineRow>,
}

pub fn parse_impls(spec: &str) -> CliResult<Vec<Impl>> {
    if spec.trim() == "all" {
        return Ok(Impl::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let imp: Impl = name.parse()?;
        if !out.contains(&imp) {
            out.push(imp);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no implementation selected".into()));
    }
    Ok(out)
}

pub fn cmd_cost(args: &CostArgs) -> CliResult<CostOutput> {
    let impls = parse_impls(&args.impls)?;
    let mut cfg = match (&args.preset, &args.config, &args.model) {
        (Some(p), None, None) => preset_config(p).map_err(|e| CliError::Usage(e.to_string()))?,
        (None, Some(p), None) => {
            serde_json::from_str(&read_text(p)?).map_err(|e| CliError::malformed(p.display().to_string(), e))?
        }
        (None, None, Some(dir)) => load_model(dir)?.config,
        (None, None, None) => preset_config("vit-8-768")?,
        _ => return Err(CliError::Usage("give at most one of --preset, --config, --model".into())),
    };
    if let Some(t) = args.timesteps {
        cfg.steps = t;
    }
    cfg.validate_shapes().map_err(|e| CliError::malformed("model config", e))?;
    let table = match &args.table {
        None => paper_calib(),
        Some(p) => EnergyTable::from_json(&read_text(p)?).map_err(|e| CliError::malformed(p.display().to_string(), e))?,
    };
    let reports = impls.iter().map(|&i| cost_report(&cfg, i, &table)).collect::<Result<Vec<_>, _>>()?;
    let comparison = compare_baselines(&cfg, &table)?.into_iter().filter(|r| impls.contains(&r.implementation)).collect();
    Ok(CostOutput { config: cfg, table: table.id.clone(), reports, comparison })
}

/// Plain-text summary of a cost run.
pub fn cost_text(out: &CostOutput) -> String {
    let mut s = format!(
        "config: depth {} d_model {} heads {} tokens {} steps {} (table {})\n",
        out.config.depth, out.config.d_model, out.config.heads, out.config.tokens, out.config.steps, out.table
    );
    s += &format!("{:<16} {:>14} {:>8} {:>14}\n", "impl", "energy (uJ)", "ratio", "cycles (approx)");
    for r in &out.reports {
        let imp = r.implementation.expect("set by cost_report");
        let ratio = out.comparison.iter().find(|b| b.implementation == imp).map(|b| b.ratio);
        let cycles = r.latency.as_ref().map(|l| l.cycles).unwrap_or(0.0);
        s += &format!(
            "{:<16} {:>14.3} {:>8} {:>14.0}\n",
            imp.name(),
            r.total_pj * 1e-6,
            ratio.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into()),
            cycles
        );
        let mut shares: Vec<_> = r.shares.iter().collect();
        shares.sort_by(|a, b| b.1.total_cmp(a.1));
        let parts: Vec<String> = shares.iter().map(|(c, v)| format!("{c:?} {:.1}%", **v * 100.0)).collect();
        s += &format!("    compute shares: {}\n", parts.join(", "));
    }
    s
}

#[derive(Clone, Debug)]
pub struct SweepArgs {
    pub model: PathBuf,
    pub input: PathBuf,
    pub timesteps: Vec<usize>,
    pub seed: u64,
    pub hw: Option<PathBuf>,
    pub t_now: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub steps: usize,
    pub gap: OracleGap,
}

/// Parse a comma-separated list of encoding lengths.
pub fn parse_steps(list: &str) -> CliResult<Vec<usize>> {
    let items: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::Usage("the list of time steps is empty".into()));
    }
    items
        .iter()
        .map(|s| match s.parse::<usize>() {
            Ok(t) if t > 0 => Ok(t),
            _ => Err(CliError::Usage(format!("bad time step count {s:?}"))),
        })
        .collect()
}

/// Oracle gap per encoding length; the model is programmed once.
pub fn cmd_sweep_t(args: &SweepArgs) -> CliResult<Vec<SweepRow>> {
    if args.timesteps.is_empty() {
        return Err(CliError::Usage("the list of time steps is empty".into()));
    }
    let model = load_model(&args.model)?;
    let batch = load_input(&args.input)?;
    let hw = load_hw(args.hw.as_deref())?;
    let pm = ProgrammedModel::program(model, &hw, args.seed)?;
    args.timesteps
        .iter()
        .map(|&t| {
            let opts = RunOptions { steps: Some(t), oracle: true, ..RunOptions::default() };
            let r = run_inference(&pm, &batch, args.t_now, &opts)?;
            Ok(SweepRow { steps: t, gap: r.oracle.expect("requested") })
        })
        .collect()
}

pub const TOY_SEED: u64 = 2024;

/// The bundled demonstration model: 2 blocks, d_model 32, 8 tokens, 4 classes.
pub fn toy_model(seed: u64) -> Model {
    let mut cfg = ModelConfig::new(Arch::Encoder, 2, 32, 2, 8, 256);
    cfg.classes = Some(4);
    let mut m = Model::random(cfg, seed, MAX_WEIGHT);
    m.position = Some(RealMatrix::from_fn(8, 32, |n, d| 0.05 * (((n * 7 + d * 3) % 5) as f64 - 2.0) / 2.0));
    m
}

/// Deterministic sample input for the toy model.
pub fn toy_input() -> Vec<Vec<f64>> {
    (0..8).map(|n| (0..32).map(|d| ((n * 37 + d * 11) % 97) as f64 / 96.0).collect()).collect()
}

pub fn cmd_toy_model(out: &Path, seed: u64) -> CliResult<()> {
    save_model(&toy_model(seed), out)?;
    write_file(&out.join("input.json"), to_json(&toy_input()).as_bytes())
}
