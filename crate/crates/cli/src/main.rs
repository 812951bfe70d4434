//! `avc-sim`: capacity solves, rateless campaigns, audits, sweeps and
//! brute-force checks, driven by a TOML config plus flag overrides.

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{ConfigError, ExperimentConfig, Needs, SessionKind};

#[derive(Parser)]
#[command(name = "avc-sim", version, about = "Rateless coding over arbitrarily varying channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Max-min capacity for the input-blind (std) or codeword-aware (dep) jammer.
    Capacity {
        #[command(flatten)]
        common: Common,
        /// `std` or `dep`.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Standard rateless campaign: keyed codebooks, cost CSI, MMI decoding.
    RatelessStd(Common),
    /// Nosy rateless campaign: list code, channel CSI, authentication.
    RatelessDep(Common),
    /// Decoding-time and list-size audits (`audit.mode` picks the algorithm).
    Audit(Common),
    /// One summary row per value of `sweep.axis`.
    Sweep(Common),
    /// Exact maximal error of a small keyed code by enumeration.
    BruteForce(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// AVC preset or definition file (overrides `avc.spec`).
    #[arg(long)]
    avc: Option<String>,
    /// State budget Λ (overrides `avc.lambda`).
    #[arg(long)]
    lambda: Option<f64>,
    /// Trials per message (overrides `run.trials`).
    #[arg(long)]
    trials: Option<u64>,
    /// Any field as `path.to.field=value`; applied after the file, before
    /// the dedicated flags.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    sets: Vec<String>,
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut o = Vec::new();
        for s in &self.sets {
            let (k, v) = s.split_once('=').with_context(|| format!("--set {s}: expected PATH=VALUE"))?;
            o.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push((k.into(), v));
            }
        };
        push("seed", self.seed.map(|v| v.to_string()));
        push("out_dir", self.out.as_ref().map(|p| toml_string(&p.to_string_lossy())));
        push("avc.spec", self.avc.as_ref().map(|s| toml_string(s)));
        push("avc.lambda", self.lambda.map(|v| format!("{v:?}")));
        push("run.trials", self.trials.map(|v| v.to_string()));
        Ok(o)
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.into()).to_string()
}

fn load(common: &Common, extra: Vec<(String, String)>, needs: Needs) -> Result<ExperimentConfig> {
    let mut o = common.overrides()?;
    o.extend(extra);
    let cfg = config::load(common.config.as_deref(), &o)?;
    cfg.validate(needs)?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("avc-sim-out"));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_summary(dir: &Path, command: &str, cfg: &ExperimentConfig, results: serde_json::Value) -> Result<serde_json::Value> {
    let summary = json!({
        "command": command,
        "config_hash": cfg.hash(command),
        "seed": cfg.seed,
        "config": cfg,
        "results": results,
    });
    let path = dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(summary)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Capacity { common, model, tol } => {
            let mut extra = Vec::new();
            if let Some(m) = model {
                extra.push(("capacity.model".into(), toml_string(&m)));
            }
            if let Some(t) = tol {
                extra.push(("capacity.tol".into(), format!("{t:?}")));
            }
            let cfg = load(&common, extra, Needs::Capacity)?;
            let results = run::capacity(&cfg)?;
            // the capacity result is printed; a summary file only when asked
            if cfg.out_dir.is_some() {
                write_summary(&out_dir(&cfg)?, "capacity", &cfg, results.clone())?;
            }
            println!("{}", serde_json::to_string_pretty(&results)?);
        }
        Command::RatelessStd(common) => session(&common, SessionKind::Std)?,
        Command::RatelessDep(common) => session(&common, SessionKind::Dep)?,
        Command::Audit(common) => {
            let probe = config::load(common.config.as_deref(), &common.overrides()?)?;
            let cfg = load(&common, vec![], Needs::Session(probe.audit.mode))?;
            let dir = out_dir(&cfg)?;
            let results = run::audit(&cfg, &dir)?;
            let passed = results["passed"].as_bool().unwrap_or(false);
            write_summary(&dir, "audit", &cfg, results)?;
            println!("audit {}: summary in {}", if passed { "passed" } else { "found violations" }, dir.display());
        }
        Command::Sweep(common) => {
            let cfg = load(&common, vec![], Needs::Sweep)?;
            let dir = out_dir(&cfg)?;
            let results = run::sweep(&cfg, &dir)?;
            write_summary(&dir, "sweep", &cfg, results)?;
            println!("sweep written to {}", dir.join("sweep.csv").display());
        }
        Command::BruteForce(common) => {
            let cfg = load(&common, vec![], Needs::BruteForce)?;
            let dir = out_dir(&cfg)?;
            let results = run::brute_force(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&results)?);
            write_summary(&dir, "brute-force", &cfg, results)?;
        }
    }
    Ok(())
}

fn session(common: &Common, kind: SessionKind) -> Result<()> {
    let cfg = load(common, vec![], Needs::Session(kind))?;
    let dir = out_dir(&cfg)?;
    let name = match kind {
        SessionKind::Std => "rateless-std",
        SessionKind::Dep => "rateless-dep",
    };
    let results = run::rateless(&cfg, kind, &dir)?;
    let e = &results["error"];
    println!("{name}: error {} (95% CI [{}, {}]), summary in {}", e["point"], e["ci_low"], e["ci_high"], dir.display());
    write_summary(&dir, name, &cfg, results)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
