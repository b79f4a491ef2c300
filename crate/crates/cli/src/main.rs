use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use tlm_core::mission::{emit_plot_data, run_scenario, write_run_dir, RunOptions, RunReport, ScenarioConfig};

/// Default root for run directories when `--out` is not given.
const OUT_DIR_ENV: &str = "TLM_OUT_DIR";

#[derive(Parser)]
#[command(name = "tlm", version, about = "Simulated aerial target localization and mapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one mission and write its run directory.
    Run {
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Snapshot every particle set at each mode change and at the end.
        #[arg(long)]
        dump_particles: bool,
        /// Run directory. Defaults to `$TLM_OUT_DIR/<config>-seed<N>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config without flying.
    Validate { config: PathBuf },
    /// Run independent missions for a range of seeds, in parallel.
    Sweep {
        config: PathBuf,
        /// Half-open range, e.g. `0..20`.
        #[arg(long, value_parser = parse_seeds)]
        seeds: Range<u64>,
        /// Parent directory for the per-seed run directories.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write plot-ready CSV series for a finished run directory.
    Plot { run_dir: PathBuf },
}

fn parse_seeds(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got `{s}`"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("bad start `{a}`: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad end `{b}`: {e}"))?;
    if a >= b {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok(a..b)
}

/// Outcome that decides the exit code.
enum Failure {
    Invalid(anyhow::Error),
    Unconverged,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Invalid(e)
    }
}

fn load(path: &Path) -> anyhow::Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = ScenarioConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    cfg.validate()
        .with_context(|| format!("validating {}", path.display()))?;
    Ok(cfg)
}

fn out_root() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

fn run_name(config: &Path, seed: u64) -> String {
    let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    format!("{stem}-seed{seed}")
}

fn summary(r: &RunReport) -> String {
    let errors: Vec<String> = r
        .targets
        .iter()
        .map(|t| t.localization_error.map_or("-".into(), |e| format!("{e:.3}")))
        .collect();
    format!(
        "seed {}: found {}/{}, errors [{}] m, {:.1} s, {:.1} m flown{}",
        r.seed,
        r.targets_found,
        r.targets_total,
        errors.join(", "),
        r.mission_duration,
        r.distance_flown,
        if r.timed_out { ", timed out" } else { "" }
    )
}

fn run_one(cfg: &ScenarioConfig, seed: u64, dump_particles: bool, dir: &Path) -> anyhow::Result<RunReport> {
    let opts = RunOptions {
        dump_particles,
        ..RunOptions::default()
    };
    let out = run_scenario(cfg, seed, opts)?;
    let cfg = ScenarioConfig { seed, ..cfg.clone() };
    write_run_dir(dir, &cfg, &out).with_context(|| format!("writing {}", dir.display()))?;
    Ok(out.report)
}

#[cfg(feature = "parallel")]
fn map_seeds<F>(seeds: Range<u64>, f: F) -> Vec<anyhow::Result<RunReport>>
where
    F: Fn(u64) -> anyhow::Result<RunReport> + Sync + Send,
{
    use rayon::prelude::*;
    seeds.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_seeds<F>(seeds: Range<u64>, f: F) -> Vec<anyhow::Result<RunReport>>
where
    F: Fn(u64) -> anyhow::Result<RunReport>,
{
    seeds.map(f).collect()
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config)?;
            println!(
                "{}: ok ({} targets, h_s {} m)",
                config.display(),
                cfg.targets.len(),
                cfg.h_s
            );
            Ok(())
        }
        Command::Run {
            config,
            seed,
            dump_particles,
            out,
        } => {
            let cfg = load(&config)?;
            let seed = seed.unwrap_or(cfg.seed);
            let dir = out.unwrap_or_else(|| out_root().join(run_name(&config, seed)));
            let report = run_one(&cfg, seed, dump_particles, &dir)?;
            println!("{}", summary(&report));
            println!("wrote {}", dir.display());
            if report.all_found() {
                Ok(())
            } else {
                Err(Failure::Unconverged)
            }
        }
        Command::Sweep { config, seeds, out } => {
            let cfg = load(&config)?;
            let root = out.unwrap_or_else(out_root);
            let n = seeds.end - seeds.start;
            let results = map_seeds(seeds.clone(), |s| {
                run_one(&cfg, s, false, &root.join(run_name(&config, s)))
            });
            let mut good = 0;
            for (seed, r) in seeds.zip(results) {
                match r {
                    Ok(report) => {
                        good += report.all_found() as u64;
                        println!("{}", summary(&report));
                    }
                    Err(e) => return Err(Failure::Invalid(e.context(format!("seed {seed}")))),
                }
            }
            println!(
                "{good}/{n} runs found every target; run directories under {}",
                root.display()
            );
            if good == n {
                Ok(())
            } else {
                Err(Failure::Unconverged)
            }
        }
        Command::Plot { run_dir } => {
            if !run_dir.join("report.json").is_file() {
                return Err(anyhow!("{} is not a run directory (no report.json)", run_dir.display()).into());
            }
            for p in emit_plot_data(&run_dir).map_err(anyhow::Error::from)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // clap would exit 2 on usage errors, which is reserved for unconverged runs.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Unconverged) => ExitCode::from(2),
    }
}
