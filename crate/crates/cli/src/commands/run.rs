//! `run`: execute the iteration from a config, emit the step table and a
//! JSON summary. `--sweep` fans out over member configs in parallel.

use std::path::{Path, PathBuf};

use serde::Serialize;

use nmh_core::hypotheses::{DerivedConstants, IterationParams};
use nmh_core::iteration::{run, RunOptions};
use nmh_core::report::RunSummary;
use nmh_core::{Error, SmoothingFamily};

use crate::config::{self, ExperimentConfig, OutputFormat, SweepConfig};
use crate::out::Sink;
use crate::setup::{build_function, build_lattice, build_problem};

/// The JSON summary artifact: everything but the per-step table, which goes
/// to CSV.
#[derive(Serialize)]
struct SummaryFile<'a> {
    problem: &'a str,
    seed: Option<u64>,
    params: &'a IterationParams,
    derived: &'a Option<DerivedConstants>,
    smoothing: &'a SmoothingFamily,
    summary: &'a RunSummary,
}

/// A divergence record when the run aborts instead of producing a report.
#[derive(Serialize)]
struct DivergenceFile<'a> {
    problem: &'a str,
    seed: Option<u64>,
    converged: bool,
    diverged_at_step: usize,
    reason: &'a str,
}

pub fn exec(
    config_path: &Path,
    out: Option<&Path>,
    format: Option<OutputFormat>,
    seed: Option<u64>,
    sweep: bool,
) -> u8 {
    if sweep {
        return exec_sweep(config_path, out, format, seed);
    }
    let cfg: ExperimentConfig = match config::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    exec_one(&cfg, out, format, seed)
}

fn exec_one(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    format: Option<OutputFormat>,
    seed: Option<u64>,
) -> u8 {
    let sink = Sink::new(&cfg.output, out, format);
    match run_config(cfg, &sink, seed) {
        Ok(converged) => {
            if converged {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run_config(cfg: &ExperimentConfig, sink: &Sink, seed_flag: Option<u64>) -> Result<bool, String> {
    let problem = build_problem(&cfg.problem, cfg.lattice).map_err(|e| e.to_string())?;
    let lattice = build_lattice(cfg.lattice).map_err(|e| e.to_string())?;
    let fam = SmoothingFamily::new(cfg.smoothing.shape, cfg.smoothing.velocity)
        .map_err(|e| e.to_string())?;
    let seed = seed_flag.or(cfg.run.seed);
    let (g, used_seed) = build_function(&cfg.run.data, lattice, seed).map_err(|e| e.to_string())?;
    cfg.params.ensure_valid().map_err(|e| e.to_string())?;

    let opts = RunOptions {
        max_steps: cfg.run.max_steps,
        residual_tol: cfg.run.residual_tol,
        strict_ball: cfg.run.strict_ball,
        tame: cfg.tame.clone(),
        ..RunOptions::default()
    };

    match run(problem.as_ref(), &cfg.params, &fam, &g, &opts) {
        Ok(outcome) => {
            let report = &outcome.report;
            sink.csv("steps.csv", &report.to_csv())?;
            let summary = SummaryFile {
                problem: &report.problem,
                seed: used_seed,
                params: &report.params,
                derived: &report.derived,
                smoothing: &cfg.smoothing,
                summary: &report.summary,
            };
            sink.json("summary.json", &summary)?;
            for w in &report.summary.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{}: {} after {} steps, residual {:.3e}",
                report.problem,
                if report.summary.converged { "converged" } else { "did not converge" },
                report.summary.steps,
                report.summary.final_residual,
            );
            Ok(report.summary.converged)
        }
        Err(Error::Divergence { step, reason }) => {
            let record = DivergenceFile {
                problem: problem.name(),
                seed: used_seed,
                converged: false,
                diverged_at_step: step,
                reason: &reason,
            };
            sink.json("summary.json", &record)?;
            println!("{}: diverged at step {step}: {reason}", problem.name());
            Ok(false)
        }
        Err(e) => Err(e.to_string()),
    }
}

/// Run every member config of a sweep document in parallel; each member
/// writes under `<out>/<stem>/`. The exit code is the worst member's.
fn exec_sweep(
    sweep_path: &Path,
    out: Option<&Path>,
    format: Option<OutputFormat>,
    seed: Option<u64>,
) -> u8 {
    let sweep: SweepConfig = match config::load(sweep_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    if sweep.configs.is_empty() {
        eprintln!("config error: sweep has no members");
        return 2;
    }
    let base = sweep_path.parent().unwrap_or(Path::new("."));
    let mut members: Vec<(PathBuf, Option<PathBuf>)> = Vec::new();
    for member in &sweep.configs {
        let path = if member.is_absolute() { member.clone() } else { base.join(member) };
        let member_out = out.map(|o| {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            o.join(stem.unwrap_or_else(|| "member".to_string()))
        });
        members.push((path, member_out));
    }

    let codes: Vec<u8> = std::thread::scope(|scope| {
        let handles: Vec<_> = members
            .iter()
            .map(|(path, member_out)| {
                scope.spawn(move || {
                    let cfg: ExperimentConfig = match config::load(path) {
                        Ok(c) => c,
                        Err(e) => {
                            eprintln!("config error: {e}");
                            return 2;
                        }
                    };
                    exec_one(&cfg, member_out.as_deref(), format, seed)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or(2)).collect()
    });

    for ((path, _), code) in members.iter().zip(&codes) {
        println!("{}: exit {code}", path.display());
    }
    codes.into_iter().max().unwrap_or(2)
}
