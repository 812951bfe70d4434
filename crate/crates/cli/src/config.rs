//! Experiment configuration: TOML file, dotted-path overrides, validation.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use avc_rateless::avc::Avc;
use avc_rateless::capacity::HullModel;
use avc_rateless::harness::DecoderMode;
use avc_rateless::harness::brute::ErrorCriterion;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every random draw derives from it.
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub avc: AvcConfig,
    #[serde(default)]
    pub capacity: CapacityConfig,
    #[serde(default)]
    pub code: CodeConfig,
    #[serde(default)]
    pub decoder: DecoderConfig,
    #[serde(default)]
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub csi: CsiConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub audit: AuditConfig,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub brute_force: BruteForceConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AvcConfig {
    /// Preset name (`bitflip`, `real-adder`) or path to a definition file.
    pub spec: String,
    /// Per-symbol state budget `Λ`.
    pub lambda: f64,
}

impl Default for AvcConfig {
    fn default() -> Self {
        Self { spec: "bitflip".into(), lambda: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityConfig {
    pub model: HullModel,
    pub tol: f64,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self { model: HullModel::Std, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodeConfig {
    pub n: usize,
    pub r_min: f64,
    /// Defaults to the capacity at the budget for the session's hull.
    pub r_max: Option<f64>,
    /// Input distribution; uniform when absent.
    pub p: Option<Vec<f64>>,
    pub keys: u64,
    pub decoder: DecoderMode,
}

impl Default for CodeConfig {
    fn default() -> Self {
        Self { n: 4096, r_min: 0.3, r_max: None, p: None, keys: 1024, decoder: DecoderMode::Auto }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoderConfig {
    pub delta: f64,
    pub xi: f64,
    pub eps: f64,
    pub restrict_to_output: bool,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self { delta: 0.05, xi: 0.01, eps: 0.05, restrict_to_output: false }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyParams {
    pub q: Option<Vec<f64>>,
    pub u: Option<Vec<Vec<f64>>>,
    pub states: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyConfig {
    /// `optimal`, `iid_optimal`, `memoryless_optimal`, `iid_mixture`,
    /// `memoryless_dependent`, `greedy_dependent` or `fixed_sequence`.
    pub kind: String,
    /// Budget; defaults to `avc.lambda`.
    pub lambda: Option<f64>,
    pub params: StrategyParams,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self { kind: "optimal".into(), lambda: None, params: StrategyParams::default() }
    }
}

pub const STRATEGY_KINDS: [&str; 7] = ["optimal", "iid_optimal", "memoryless_optimal", "iid_mixture", "memoryless_dependent", "greedy_dependent", "fixed_sequence"];

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsiConfig {
    /// Cost-CSI slack (standard sessions, default 0) or channel-CSI slack
    /// (nosy sessions, default 0.05).
    pub epsilon: Option<f64>,
    pub v: Option<u32>,
    pub decoys: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Trials per sampled message.
    pub trials: u64,
    /// Number of messages sampled; the error estimate is the worst of them.
    pub messages: u64,
    pub write_traces: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { trials: 1000, messages: 1, write_traces: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionKind {
    Std,
    Dep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub mode: SessionKind,
    /// List-size bound; defaults to `⌈12 log2|Y| / ε⌉`.
    pub list_bound: Option<u64>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self { mode: SessionKind::Dep, list_bound: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Capacity,
    RatelessStd,
    RatelessDep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lambda,
    Keys,
    N,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub mode: SweepMode,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BruteForceConfig {
    /// Chunk composition counts.
    pub composition: Vec<u64>,
    pub m_star: usize,
    /// Number of messages `N`.
    pub size: u64,
    pub keys: u64,
    pub criterion: ErrorCriterion,
}

impl Default for BruteForceConfig {
    fn default() -> Self {
        Self { composition: vec![2, 2], m_star: 2, size: 6, keys: 4, criterion: ErrorCriterion::Std }
    }
}

/// Validation failures, one `field.path: message` per entry.
#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for e in &self.0 {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Parse the right-hand side of an override as a TOML value, falling back
/// to a plain string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Set `path` (dot-separated) in `table`, creating intermediate tables.
pub fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError(vec![format!("{path}: malformed override path")]));
    }
    let mut cur = table;
    for (i, part) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(ConfigError(vec![format!("{}: not a table", parts[..=i].join("."))])),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Load the optional file, apply `(path, raw value)` overrides in order and
/// deserialize.
pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> anyhow::Result<ExperimentConfig> {
    let mut table = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            text.parse::<toml::Table>().map_err(|e| ConfigError(vec![format!("{}: {e}", p.display())]))?
        }
        None => toml::Table::new(),
    };
    for (path, raw) in overrides {
        set_path(&mut table, path, parse_value(raw))?;
    }
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        ConfigError(vec![format!("{}: {}", if path == "." { "(root)".into() } else { path }, e.inner())])
    })?;
    Ok(cfg)
}

/// What a command needs from the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Needs {
    Capacity,
    Session(SessionKind),
    BruteForce,
    Sweep,
}

impl ExperimentConfig {
    pub fn avc(&self) -> anyhow::Result<Avc> {
        Avc::load(&self.avc.spec).map_err(|e| ConfigError(vec![format!("avc.spec: {e}")]).into())
    }

    pub fn strategy_lambda(&self) -> f64 {
        self.strategy.lambda.unwrap_or(self.avc.lambda)
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated")
    }

    /// Check everything the command will use; report every problem at once.
    pub fn validate(&self, needs: Needs) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        let mut push = |path: &str, msg: String| errs.push(format!("{path}: {msg}"));
        let avc = match Avc::load(&self.avc.spec) {
            Ok(a) => Some(a),
            Err(e) => {
                push("avc.spec", e.to_string());
                None
            }
        };
        if !(self.avc.lambda.is_finite() && self.avc.lambda >= 0.0) {
            push("avc.lambda", format!("{} must be finite and >= 0", self.avc.lambda));
        }
        if needs != Needs::Capacity && self.seed.is_none() {
            push("seed", "required; there is no default seed".into());
        }
        if !(self.capacity.tol > 0.0 && self.capacity.tol < 1.0) {
            push("capacity.tol", format!("{} must lie in (0, 1)", self.capacity.tol));
        }
        let sessions = matches!(needs, Needs::Session(_) | Needs::Sweep);
        if sessions {
            let c = &self.code;
            if c.n < 16 {
                push("code.n", format!("{} is below 16", c.n));
            }
            if !(c.r_min > 0.0) {
                push("code.r_min", format!("{} must be positive", c.r_min));
            }
            if let Some(r) = c.r_max {
                if !(r >= c.r_min) {
                    push("code.r_max", format!("{r} is below code.r_min = {}", c.r_min));
                }
                if let Some(a) = &avc {
                    if r > (a.nx() as f64).log2() + 1e-12 {
                        push("code.r_max", format!("{r} exceeds log2|X|"));
                    }
                }
            }
            if let (Some(p), Some(a)) = (&c.p, &avc) {
                if p.len() != a.nx() {
                    push("code.p", format!("has {} entries, the channel has {} inputs", p.len(), a.nx()));
                } else if p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    push("code.p", "must be a probability vector".into());
                }
            }
            if c.keys == 0 {
                push("code.keys", "must be at least 1".into());
            }
            let dep = matches!(needs, Needs::Session(SessionKind::Dep))
                || (needs == Needs::Sweep && self.sweep.as_ref().is_some_and(|s| s.mode == SweepMode::RatelessDep));
            if dep && !(c.keys >= 4 && c.keys.is_power_of_two() && c.keys.trailing_zeros() % 2 == 0 && c.keys.trailing_zeros() <= 32) {
                push("code.keys", format!("{} must be q^2 with q = 2^k, 1 <= k <= 16, for authentication", c.keys));
            }
            let d = &self.decoder;
            for (name, v) in [("decoder.delta", d.delta), ("decoder.xi", d.xi), ("decoder.eps", d.eps)] {
                if !(v.is_finite() && v >= 0.0) {
                    push(name, format!("{v} must be finite and >= 0"));
                }
            }
            if let Some(e) = self.csi.epsilon {
                if !(e.is_finite() && e >= 0.0) {
                    push("csi.epsilon", format!("{e} must be finite and >= 0"));
                }
            }
            if self.run.messages == 0 {
                push("run.messages", "must be at least 1".into());
            }
            self.validate_strategy(&mut push, avc.as_ref());
        }
        if needs == Needs::BruteForce {
            let b = &self.brute_force;
            if let Some(a) = &avc {
                if b.composition.len() != a.nx() {
                    push("brute_force.composition", format!("has {} entries, the channel has {} inputs", b.composition.len(), a.nx()));
                }
            }
            if b.composition.iter().sum::<u64>() == 0 {
                push("brute_force.composition", "chunk length must be positive".into());
            }
            if b.m_star == 0 {
                push("brute_force.m_star", "must be at least 1".into());
            }
            if b.size == 0 {
                push("brute_force.size", "must be at least 1".into());
            }
            if b.keys == 0 {
                push("brute_force.keys", "must be at least 1".into());
            }
        }
        if needs == Needs::Sweep {
            match &self.sweep {
                None => push("sweep", "missing [sweep] table".into()),
                Some(s) => {
                    if s.values.is_empty() {
                        push("sweep.values", "must not be empty".into());
                    }
                    if s.mode == SweepMode::Capacity && s.axis != SweepAxis::Lambda {
                        push("sweep.axis", "capacity sweeps only run along lambda".into());
                    }
                    for (i, v) in s.values.iter().enumerate() {
                        let ok = match s.axis {
                            SweepAxis::Lambda => v.is_finite() && *v >= 0.0,
                            SweepAxis::Keys | SweepAxis::N => *v >= 1.0 && v.fract() == 0.0,
                        };
                        if !ok {
                            push(&format!("sweep.values[{i}]"), format!("{v} is not valid on axis {:?}", s.axis));
                        }
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(errs))
        }
    }

    fn validate_strategy(&self, push: &mut impl FnMut(&str, String), avc: Option<&Avc>) {
        let s = &self.strategy;
        if !STRATEGY_KINDS.contains(&s.kind.as_str()) {
            push("strategy.kind", format!("unknown '{}' (one of {})", s.kind, STRATEGY_KINDS.join(", ")));
            return;
        }
        if let Some(l) = s.lambda {
            if !(l.is_finite() && l >= 0.0) {
                push("strategy.lambda", format!("{l} must be finite and >= 0"));
            }
        }
        let p = &s.params;
        match s.kind.as_str() {
            "iid_mixture" => match (&p.q, avc) {
                (None, _) => push("strategy.params.q", "required for iid_mixture".into()),
                (Some(q), Some(a)) if q.len() != a.ns() => push("strategy.params.q", format!("needs {} entries", a.ns())),
                _ => {}
            },
            "memoryless_dependent" => match (&p.u, avc) {
                (None, _) => push("strategy.params.u", "required for memoryless_dependent".into()),
                (Some(u), Some(a)) if u.len() != a.nx() || u.iter().any(|r| r.len() != a.ns()) => {
                    push("strategy.params.u", format!("must be {} rows of {} entries", a.nx(), a.ns()))
                }
                _ => {}
            },
            "fixed_sequence" => match &p.states {
                None => push("strategy.params.states", "required for fixed_sequence".into()),
                Some(st) if st.len() != self.code.n => push("strategy.params.states", format!("has length {}, code.n is {}", st.len(), self.code.n)),
                _ => {}
            },
            _ => {}
        }
    }

    /// SHA-256 over the canonical JSON of the resolved configuration and
    /// the command, without the output directory.
    pub fn hash(&self, command: &str) -> String {
        let mut c = self.clone();
        c.out_dir = None;
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0u8]);
        h.update(serde_json::to_vec(&c).expect("config serializes"));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
