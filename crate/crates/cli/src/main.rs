use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use xpikesim_cli::commands::{
    cmd_calibrate, cmd_cost, cmd_run, cmd_sweep_t, cmd_toy_model, cost_text, emit, parse_steps, to_json, trace_lines,
    CalibrateArgs, CostArgs, RunArgs, SweepArgs, TOY_SEED,
};
use xpikesim_cli::manifest::write_file;
use xpikesim_cli::selftest::{run_all, Scale};
use xpikesim_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "xpikesim", version, about = "Spiking transformer accelerator simulator and cost model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run inference on a model directory.
    Run {
        #[arg(long)]
        model: PathBuf,
        /// JSON array of token rows of rates in [0, 1].
        #[arg(long)]
        input: PathBuf,
        /// Encoding length; defaults to the model's configured steps.
        #[arg(long)]
        timesteps: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Hardware config JSON; defaults to the built-in nonideal config.
        #[arg(long)]
        hw: Option<PathBuf>,
        /// Seconds since programming.
        #[arg(long, default_value_t = 0.0)]
        t_now: f64,
        /// Per-layer firing-rate trace, one JSON record per line.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Result JSON; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Calibrate drift compensation at --t-now before running.
        #[arg(long)]
        calibrate: bool,
        /// Apply a stored calibration record.
        #[arg(long, conflicts_with = "calibrate")]
        calib: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        probes: usize,
        /// Report the gap to the exact rate oracles.
        #[arg(long)]
        oracle: bool,
    },
    /// Energy and latency estimates for one or more implementations.
    Cost {
        /// Named shape: vit-8-768, vit-6-512, vit-4-384-cifar. Default vit-8-768.
        #[arg(long)]
        preset: Option<String>,
        /// Model config JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Take the config from a model directory.
        #[arg(long)]
        model: Option<PathBuf>,
        /// `all` or a comma-separated list of xpikeformer, ann_quant, ann_quant_aimc, snn_digi_opt.
        #[arg(long = "impl", default_value = "all")]
        impls: String,
        /// Energy table JSON; defaults to the bundled calibrated table.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        timesteps: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure the global drift compensation factor and write the record.
    Calibrate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        hw: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        t_now: f64,
        #[arg(long, default_value_t = 64)]
        probes: usize,
        /// Experimental: one factor per tile.
        #[arg(long)]
        per_tile: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Oracle gap as a function of the encoding length.
    SweepT {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated encoding lengths, e.g. 256,1024,4096.
        #[arg(long, allow_hyphen_values = true)]
        timesteps: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        hw: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        t_now: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle self-test suite.
    Selftest {
        /// Acceptance-size runs instead of the quick suite.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 2)]
        seed: u64,
    },
    /// Write the bundled toy model and a sample input.
    ToyModel {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = TOY_SEED)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("XPIKESIM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("XPIKESIM_THREADS={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Run { model, input, timesteps, seed, hw, t_now, trace, out, calibrate, calib, probes, oracle } => {
            let args = RunArgs { model, input, timesteps, seed, hw, t_now, calibrate, probes, calib, oracle, trace: trace.is_some() };
            let (report, records) = cmd_run(&args)?;
            if let Some(p) = &trace {
                write_file(p, trace_lines(&records).as_bytes())?;
            }
            emit(out.as_deref(), &to_json(&report))
        }
        Command::Cost { preset, config, model, impls, table, timesteps, format, out } => {
            let res = cmd_cost(&CostArgs { preset, config, model, impls, table, timesteps })?;
            let text = match format {
                Format::Json => to_json(&res),
                Format::Text => cost_text(&res),
            };
            emit(out.as_deref(), &text)
        }
        Command::Calibrate { model, hw, seed, t_now, probes, per_tile, out } => {
            let rec = cmd_calibrate(&CalibrateArgs { model, hw, seed, t_now, probes, per_tile })?;
            emit(out.as_deref(), &to_json(&rec))
        }
        Command::SweepT { model, input, timesteps, seed, hw, t_now, out } => {
            let timesteps = parse_steps(&timesteps)?;
            let rows = cmd_sweep_t(&SweepArgs { model, input, timesteps, seed, hw, t_now })?;
            emit(out.as_deref(), &to_json(&rows))
        }
        Command::Selftest { full, seed } => {
            let checks = run_all(if full { Scale::Full } else { Scale::Quick }, seed);
            for c in &checks {
                println!("{}", c.line());
            }
            match checks.iter().filter(|c| !c.passed).count() {
                0 => Ok(()),
                n => Err(CliError::SelfTest(n)),
            }
        }
        Command::ToyModel { out, seed } => cmd_toy_model(&out, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match init_threads().and_then(|_| dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
