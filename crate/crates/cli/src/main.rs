use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Parser;
use mcca_core::config::{self, Mode, RunConfig};
use mcca_core::runner;

/// Runs simulation sweeps and writes CSV/JSON artifacts.
///
/// Any config key can be overridden from the environment as
/// `MCCA_<SECTION>__<KEY>`, e.g. `MCCA_SCENARIO__NODE_COUNT=400`.
#[derive(Debug, Parser)]
#[command(name = "mcca-sim", version)]
struct Args {
    /// TOML configuration file; absent keys take their defaults.
    #[arg(short, long)]
    config: PathBuf,

    /// Run a single seed instead of the configured ones.
    #[arg(short, long)]
    seed: Option<u64>,

    /// Output directory (overrides `output.dir`).
    #[arg(short, long)]
    output: Option<PathBuf>,

    /// Sweep override, `key=a..b:step` or `key=v1,v2,...`.
    #[arg(long)]
    sweep: Option<String>,

    /// Modes to run (repeatable); default is the configured list.
    #[arg(short, long)]
    mode: Vec<Mode>,

    /// Worker threads; engines are single-threaded and share nothing.
    #[arg(short = 'j', long, default_value_t = 1)]
    parallelism: usize,

    /// Write the negotiation trace of every run.
    #[arg(long)]
    trace: bool,

    /// Print the effective configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

fn effective(args: &Args) -> anyhow::Result<RunConfig> {
    let mut cfg = config::load_config(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(spec) = &args.sweep {
        let seeds = std::mem::take(&mut cfg.sweep.seeds);
        cfg.sweep = config::parse_sweep(spec)?;
        cfg.sweep.seeds = seeds;
    }
    if let Some(seed) = args.seed {
        cfg.scenario.seed = seed;
        cfg.sweep.seeds = vec![seed];
    }
    if !args.mode.is_empty() {
        cfg.sim.modes = args.mode.clone();
    }
    if args.trace {
        cfg.output.trace = true;
    }
    if let Some(dir) = &args.output {
        cfg.output.dir = dir.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &Args) -> anyhow::Result<()> {
    let cfg = effective(args)?;
    if args.dump_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let jobs = runner::plan(&cfg)?.len();
    log::info!("{jobs} runs on {} thread(s)", args.parallelism.max(1));
    let report = runner::run_sweep(&cfg, args.parallelism)?;
    let dir = PathBuf::from(&cfg.output.dir);
    let files = runner::write_artifacts(&dir, &cfg, &report)?;
    log::info!("wrote {} files to {}", files.len(), dir.display());
    for (_, point, mode, outs) in runner::means(&report.results) {
        let n = outs.len() as f64;
        let e: f64 = outs.iter().map(|o| o.final_frame.relative_energy).sum::<f64>() / n;
        let b: f64 = outs.iter().map(|o| o.final_frame.blocking_prob).sum::<f64>() / n;
        println!("{point:>10} {mode:<20} relative_energy {e:.4}  blocking {b:.3}%");
    }
    if !report.errors.is_empty() {
        for (job, e) in &report.errors {
            eprintln!("error: point {} mode {} seed {}: {e}", job.value, job.mode, job.seed);
        }
        bail!("{} of {jobs} runs failed", report.errors.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
