//! Sweep orchestration and artifact export.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::sim::{self, RunOutput};

/// One engine run of a sweep.
#[derive(Debug, Clone)]
pub struct Job {
    pub point: usize,
    pub value: f64,
    pub mode: Mode,
    pub seed: u64,
    pub cfg: RunConfig,
}

#[derive(Debug, Clone)]
pub struct JobResult {
    pub point: usize,
    pub value: f64,
    pub mode: Mode,
    pub seed: u64,
    pub output: RunOutput,
}

/// Outcome of a sweep: successful runs in canonical order plus the failures.
#[derive(Debug, Default)]
pub struct SweepReport {
    pub results: Vec<JobResult>,
    pub errors: Vec<(Job, String)>,
}

/// Expands the config into jobs ordered by (point, mode, seed).
pub fn plan(cfg: &RunConfig) -> Result<Vec<Job>> {
    let mut modes = cfg.sim.modes.clone();
    modes.sort();
    modes.dedup();
    let seeds = cfg.seeds();
    let mut jobs = Vec::new();
    for (point, (value, pcfg)) in cfg.sweep_points()?.into_iter().enumerate() {
        for &mode in &modes {
            for &seed in &seeds {
                jobs.push(Job { point, value, mode, seed, cfg: pcfg.clone() });
            }
        }
    }
    Ok(jobs)
}

/// Runs every job on a pool of `parallelism` threads. Engines share nothing,
/// so results do not depend on the thread count.
pub fn run_sweep(cfg: &RunConfig, parallelism: usize) -> Result<SweepReport> {
    let jobs = plan(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Config { key: "parallelism".into(), reason: e.to_string() })?;
    let outcomes: Vec<(Job, Result<RunOutput>)> = pool.install(|| {
        jobs.into_par_iter()
            .map(|job| {
                let out = sim::run(&job.cfg, job.mode, job.cfg.sim.sim_time_s, job.seed);
                (job, out)
            })
            .collect()
    });
    let mut report = SweepReport::default();
    for (job, out) in outcomes {
        match out {
            Ok(output) => report.results.push(JobResult {
                point: job.point,
                value: job.value,
                mode: job.mode,
                seed: job.seed,
                output,
            }),
            Err(e) => {
                log::error!("point {} ({}) mode {} seed {}: {e}", job.point, job.value, job.mode, job.seed);
                report.errors.push((job, e.to_string()));
            }
        }
    }
    report.results.sort_by(|a, b| (a.point, a.mode, a.seed).cmp(&(b.point, b.mode, b.seed)));
    Ok(report)
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    node_count: usize,
    mode: &'a str,
    relative_energy: f64,
    blocking_prob_pct: f64,
    addressing_ratio: f64,
    mean_hops: f64,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct ComparisonRow {
    sweep_value: f64,
    node_count: usize,
    seed: u64,
    mode: &'static str,
    relative_energy: f64,
    baseline_relative_energy: f64,
    energy_ratio: f64,
    blocking_prob_pct: f64,
    baseline_blocking_prob_pct: f64,
}

#[derive(Debug, Serialize)]
struct JsonRun<'a> {
    sweep_value: f64,
    #[serde(flatten)]
    output: &'a RunOutput,
}

#[derive(Debug, Serialize)]
struct JsonMean {
    sweep_value: f64,
    mode: &'static str,
    runs: usize,
    relative_energy: f64,
    blocking_prob_pct: f64,
    addressing_ratio: f64,
    mean_hops: f64,
}

#[derive(Debug, Serialize)]
struct JsonSummary<'a> {
    sweep_variable: &'a str,
    runs: Vec<JsonRun<'a>>,
    means: Vec<JsonMean>,
    errors: Vec<String>,
}

fn stem(r: &JobResult) -> String {
    format!("p{:02}_{}_s{}", r.point, r.mode, r.seed)
}

fn csv_file<P: AsRef<Path>>(path: P) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// Per-(point, mode) means over seeds, in canonical order.
pub fn means(results: &[JobResult]) -> Vec<(usize, f64, Mode, Vec<&RunOutput>)> {
    let mut out: Vec<(usize, f64, Mode, Vec<&RunOutput>)> = Vec::new();
    for r in results {
        match out.last_mut() {
            Some(last) if last.0 == r.point && last.2 == r.mode => last.3.push(&r.output),
            _ => out.push((r.point, r.value, r.mode, vec![&r.output])),
        }
    }
    out
}

fn mean(outs: &[&RunOutput], f: impl Fn(&RunOutput) -> f64) -> f64 {
    outs.iter().map(|o| f(o)).sum::<f64>() / outs.len().max(1) as f64
}

/// Writes every artifact of a sweep into `dir` and returns the files written.
pub fn write_artifacts(dir: &Path, cfg: &RunConfig, report: &SweepReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join("config.toml");
    fs::write(&path, cfg.to_toml()?)?;
    written.push(path);

    let path = dir.join("summary.csv");
    let mut w = csv_file(&path)?;
    for r in &report.results {
        let f = &r.output.final_frame;
        w.serialize(SummaryRow {
            node_count: r.output.node_count,
            mode: r.mode.as_str(),
            relative_energy: f.relative_energy,
            blocking_prob_pct: f.blocking_prob,
            addressing_ratio: f.addressing_ratio,
            mean_hops: f.mean_hops,
            seed: r.seed,
        })?;
    }
    w.flush()?;
    written.push(path);

    let summary = JsonSummary {
        sweep_variable: &cfg.sweep.variable,
        runs: report.results.iter().map(|r| JsonRun { sweep_value: r.value, output: &r.output }).collect(),
        means: means(&report.results)
            .into_iter()
            .map(|(_, value, mode, outs)| JsonMean {
                sweep_value: value,
                mode: mode.as_str(),
                runs: outs.len(),
                relative_energy: mean(&outs, |o| o.final_frame.relative_energy),
                blocking_prob_pct: mean(&outs, |o| o.final_frame.blocking_prob),
                addressing_ratio: mean(&outs, |o| o.final_frame.addressing_ratio),
                mean_hops: mean(&outs, |o| o.final_frame.mean_hops),
            })
            .collect(),
        errors: report
            .errors
            .iter()
            .map(|(j, e)| format!("point {} mode {} seed {}: {e}", j.point, j.mode, j.seed))
            .collect(),
    };
    let path = dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
    written.push(path);

    if cfg.output.comparison {
        let path = dir.join("comparison.csv");
        let mut w = csv_file(&path)?;
        for r in report.results.iter().filter(|r| r.mode != Mode::BaselineNoCoop) {
            let base = report
                .results
                .iter()
                .find(|b| b.mode == Mode::BaselineNoCoop && b.point == r.point && b.seed == r.seed);
            if let Some(b) = base {
                let (f, g) = (&r.output.final_frame, &b.output.final_frame);
                w.serialize(ComparisonRow {
                    sweep_value: r.value,
                    node_count: r.output.node_count,
                    seed: r.seed,
                    mode: r.mode.as_str(),
                    relative_energy: f.relative_energy,
                    baseline_relative_energy: g.relative_energy,
                    energy_ratio: ratio_or_nan(f.relative_energy, g.relative_energy),
                    blocking_prob_pct: f.blocking_prob,
                    baseline_blocking_prob_pct: g.blocking_prob,
                })?;
            }
        }
        w.flush()?;
        written.push(path);
    }

    let sub = |name: &str| -> Result<PathBuf> {
        let d = dir.join(name);
        fs::create_dir_all(&d)?;
        Ok(d)
    };
    if cfg.output.time_series {
        let d = sub("timeseries")?;
        for r in &report.results {
            let path = d.join(format!("{}.csv", stem(r)));
            let mut w = csv_file(&path)?;
            for f in &r.output.series {
                w.serialize(f)?;
            }
            w.flush()?;
            written.push(path);
        }
    }
    if cfg.output.placements {
        let d = sub("placements")?;
        for r in &report.results {
            let path = d.join(format!("{}.csv", stem(r)));
            let mut w = csv_file(&path)?;
            w.write_record(["id", "x", "y", "role", "cell"])?;
            for (id, x, y, role, cell) in &r.output.placements {
                let cell = cell.map(|c| c.to_string()).unwrap_or_default();
                w.write_record([id.to_string(), x.to_string(), y.to_string(), role.clone(), cell])?;
            }
            w.flush()?;
            written.push(path);
        }
    }
    if cfg.output.channel_loads {
        let d = sub("channel_loads")?;
        for r in &report.results {
            let path = d.join(format!("{}.csv", stem(r)));
            let mut w = csv_file(&path)?;
            w.write_record(["time", "channel", "load"])?;
            for (t, c, l) in &r.output.channel_loads {
                w.write_record([t.to_string(), c.to_string(), l.to_string()])?;
            }
            w.flush()?;
            written.push(path);
        }
    }
    if cfg.output.trace {
        let d = sub("trace")?;
        for r in &report.results {
            if let Some(t) = &r.output.trace {
                let path = d.join(format!("{}.csv", stem(r)));
                fs::write(&path, t)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// `a / b`, or NaN when `b` is zero.
fn ratio_or_nan(a: f64, b: f64) -> f64 {
    if b != 0.0 {
        a / b
    } else {
        f64::NAN
    }
}
