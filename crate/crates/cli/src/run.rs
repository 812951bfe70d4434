//! Command implementations. Each returns the `results` part of the summary.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use avc_rateless::adversary::{ChannelCsiConfig, JammerKind, JammerStrategy};
use avc_rateless::alphabet::{EmpiricalType, InputDistribution};
use avc_rateless::avc::Avc;
use avc_rateless::capacity::{capacity_model, HullModel, SaddleResult};
use avc_rateless::codebook::{chunk_composition, scaling_params, subsample_for_constant_list, CodebookSize, KeyedCodebookFamily, ScalingParams};
use avc_rateless::derandomization::{audit_list_bound, AuthScheme};
use avc_rateless::harness::audit::{audit_trace_dep, audit_trace_std, ListAudit, TraceAudit};
use avc_rateless::harness::brute::brute_force_max_error;
use avc_rateless::harness::trace::CsvTraceWriter;
use avc_rateless::harness::{run_session_dep, run_session_std, DepSetup, ErrorEstimate, SessionTrace, StdSetup};
use avc_rateless::seeds::{self, domain};

use crate::config::{ExperimentConfig, SessionKind, SweepAxis, SweepMode};

/// Trials simulated in parallel before their traces are written.
const BATCH: usize = 512;

pub fn capacity(cfg: &ExperimentConfig) -> Result<Value> {
    let avc = cfg.avc()?;
    let r = capacity_model(&avc, cfg.avc.lambda, cfg.capacity.tol, cfg.capacity.model)?;
    Ok(capacity_json(&r, cfg))
}

fn capacity_json(r: &SaddleResult, cfg: &ExperimentConfig) -> Value {
    json!({
        "value": r.value,
        "P_star": r.p_star.probs(),
        "mixing": r.minimizer.mixing,
        "diagnostics": {
            "model": cfg.capacity.model,
            "lambda": cfg.avc.lambda,
            "tol": cfg.capacity.tol,
            "inner_gap": r.inner_gap,
            "outer_gap": r.outer_gap,
            "minimizer_cost": r.minimizer.cost,
            "units": "bits per channel use",
        }
    })
}

fn input_distribution(cfg: &ExperimentConfig, avc: &Avc) -> Result<InputDistribution> {
    Ok(match &cfg.code.p {
        Some(p) => InputDistribution::new(p.clone())?,
        None => InputDistribution::uniform(avc.nx())?,
    })
}

fn hull(kind: SessionKind) -> HullModel {
    match kind {
        SessionKind::Std => HullModel::Std,
        SessionKind::Dep => HullModel::Dep,
    }
}

fn params(cfg: &ExperimentConfig, avc: &Avc, kind: SessionKind) -> Result<ScalingParams> {
    let r_max = match cfg.code.r_max {
        Some(r) => r,
        None => {
            let c = capacity_model(avc, cfg.strategy_lambda(), cfg.capacity.tol, hull(kind))?.value;
            if c < cfg.code.r_min {
                bail!("code.r_max: defaults to the capacity at the budget, {c:.6}, which is below code.r_min = {}", cfg.code.r_min);
            }
            c
        }
    };
    Ok(scaling_params(cfg.code.n, cfg.code.r_min, r_max, avc.nx())?)
}

fn strategy(cfg: &ExperimentConfig, avc: &Avc, p: &InputDistribution, kind: SessionKind) -> Result<JammerStrategy> {
    let lambda = cfg.strategy_lambda();
    let tol = 1e-9;
    let prm = &cfg.strategy.params;
    let s = match (cfg.strategy.kind.as_str(), kind) {
        ("optimal", SessionKind::Std) | ("iid_optimal", _) => JammerStrategy::iid_optimal(avc, p, lambda, tol)?,
        ("optimal", SessionKind::Dep) | ("memoryless_optimal", _) => JammerStrategy::memoryless_optimal(avc, p, lambda, tol)?,
        ("iid_mixture", _) => JammerStrategy::new(JammerKind::IidMixture { q: prm.q.clone().unwrap_or_default() }, lambda)?,
        ("memoryless_dependent", _) => JammerStrategy::new(JammerKind::MemorylessDependent { u: prm.u.clone().unwrap_or_default() }, lambda)?,
        ("greedy_dependent", _) => JammerStrategy::new(JammerKind::GreedyDependent, lambda)?,
        ("fixed_sequence", _) => JammerStrategy::new(JammerKind::FixedSequence { states: prm.states.clone().unwrap_or_default() }, lambda)?,
        (other, _) => bail!("strategy.kind: unknown '{other}'"),
    };
    if kind == SessionKind::Std && !s.is_input_blind() {
        bail!("strategy.kind: '{}' sees the codeword; rateless-std needs an input-blind jammer", cfg.strategy.kind);
    }
    Ok(s)
}

enum Setup {
    Std(StdSetup),
    Dep(DepSetup),
}

/// Everything needed to run sessions of one kind.
pub struct Campaign {
    setup: Setup,
    strategy: JammerStrategy,
    params: ScalingParams,
    messages: Vec<u64>,
    list_bound: u64,
}

impl Campaign {
    pub fn new(cfg: &ExperimentConfig, kind: SessionKind) -> Result<Self> {
        let avc = cfg.avc()?;
        let p = input_distribution(cfg, &avc)?;
        let sp = params(cfg, &avc, kind)?;
        let seed = cfg.seed();
        let comp = chunk_composition(&p, sp.c)?;
        let d = &cfg.decoder;
        let (setup, domain_size) = match kind {
            SessionKind::Std => {
                let fam = KeyedCodebookFamily::random(&comp, sp.m_star, sp.size, cfg.code.keys, seeds::derive(seed, domain::FAMILY))?;
                let eps = cfg.csi.epsilon.unwrap_or(0.0);
                let s = StdSetup::new(&avc, fam, &p, sp.m_lo, d.delta, eps)?.with_decoder(cfg.code.decoder);
                (Setup::Std(s), sp.size.index_domain())
            }
            SessionKind::Dep => {
                let code = subsample_for_constant_list(&comp, sp.m_star, sp.size, seeds::derive(seed, domain::CODEWORD))?;
                let auth = AuthScheme::from_keys(cfg.code.keys, sp.size)?;
                let dflt = ChannelCsiConfig::default();
                let csi = ChannelCsiConfig {
                    epsilon: cfg.csi.epsilon.unwrap_or(dflt.epsilon),
                    v: cfg.csi.v.unwrap_or(dflt.v),
                    decoys: cfg.csi.decoys.unwrap_or(dflt.decoys),
                };
                let messages = auth.messages();
                let s = DepSetup::new(&avc, code, auth, &p, sp.m_lo, d.delta, d.xi, d.eps, csi)?
                    .with_decoder(cfg.code.decoder)
                    .with_restriction(d.restrict_to_output);
                (Setup::Dep(s), messages)
            }
        };
        let messages = (0..cfg.run.messages).map(|j| seeds::rng_at(seed, &[domain::MESSAGE, j]).random_range(0..domain_size)).collect();
        let list_bound = cfg.audit.list_bound.unwrap_or_else(|| audit_list_bound(avc.ny(), d.eps.max(f64::MIN_POSITIVE)));
        Ok(Self { strategy: strategy(cfg, &avc, &p, kind)?, setup, params: sp, messages, list_bound })
    }

    fn run_one(&self, message: u64, seed: u64) -> Result<SessionTrace> {
        Ok(match &self.setup {
            Setup::Std(s) => run_session_std(s, &self.strategy, message, seed)?,
            Setup::Dep(s) => run_session_dep(s, &self.strategy, message, seed)?,
        })
    }

    fn audit(&self, t: &SessionTrace) -> Result<TraceAudit> {
        Ok(match &self.setup {
            Setup::Std(s) => audit_trace_std(t, &s.curve, s.delta, s.csi_epsilon)?,
            Setup::Dep(s) => audit_trace_dep(t, &s.avc, &s.p, s.eps, s.csi.epsilon, s.delta)?,
        })
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TimeAuditSummary {
    pub checked: u64,
    pub excluded: u64,
    pub excused: u64,
    pub violations: u64,
    /// First few violations: `(trial index, reason)`.
    pub examples: Vec<(u64, String)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignSummary {
    pub params: ScalingParams,
    pub strategy: JammerStrategy,
    pub trials_per_message: u64,
    pub messages: Vec<u64>,
    /// Worst sampled message.
    pub error: ErrorEstimate,
    pub per_message: Vec<ErrorEstimate>,
    pub outages: u64,
    pub mean_decode_time: Option<f64>,
    pub mean_empirical_rate_bits_per_use: Option<f64>,
    pub decoding_time_audit: TimeAuditSummary,
    pub list_audit: Option<ListAudit>,
    pub auth_outcomes: BTreeMap<String, u64>,
}

/// Run `trials` sessions per sampled message. Trial `t` of message `j`
/// uses seed `derive_path(seed, [TRIAL, j, t])`; traces are written in
/// that order.
pub fn run_campaign(cfg: &ExperimentConfig, kind: SessionKind, traces: Option<&Path>) -> Result<CampaignSummary> {
    let camp = Campaign::new(cfg, kind)?;
    let seed = cfg.seed();
    let trials = cfg.run.trials;
    let mut writer = match traces {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            Some(CsvTraceWriter::new(BufWriter::new(f))?)
        }
        None => None,
    };
    let total = trials * camp.messages.len() as u64;
    let mut fails = vec![(0u64, 0u64); camp.messages.len()];
    let mut time_sum = 0.0;
    let mut rate_sum = 0.0;
    let mut decoded = 0u64;
    let mut audit = TimeAuditSummary::default();
    let mut lists = ListAudit::from_traces(std::iter::empty(), camp.list_bound);
    let mut auth: BTreeMap<String, u64> = BTreeMap::new();
    let mut start = 0u64;
    while start < total {
        let end = (start + BATCH as u64).min(total);
        let batch: Vec<(SessionTrace, TraceAudit)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let (j, t) = (i / trials, i % trials);
                let tr = camp.run_one(camp.messages[j as usize], seeds::derive_path(seed, &[domain::TRIAL, j, t]))?;
                let a = camp.audit(&tr)?;
                Ok((tr, a))
            })
            .collect::<Result<_>>()?;
        for (off, (tr, a)) in batch.iter().enumerate() {
            let i = start + off as u64;
            let j = (i / trials) as usize;
            match tr.decode_time {
                None => fails[j].1 += 1,
                Some(m) => {
                    fails[j].0 += tr.error as u64;
                    decoded += 1;
                    time_sum += m as f64;
                    rate_sum += tr.empirical_rate.unwrap_or(0.0);
                }
            }
            match a {
                TraceAudit::Ok => audit.checked += 1,
                TraceAudit::Excluded => audit.excluded += 1,
                TraceAudit::Excused => audit.excused += 1,
                TraceAudit::Violation(reason) => {
                    audit.checked += 1;
                    audit.violations += 1;
                    if audit.examples.len() < 10 {
                        audit.examples.push((i, reason.clone()));
                    }
                }
            }
            if let Some(o) = &tr.auth_outcome {
                *auth.entry(o.clone()).or_default() += 1;
            }
            if let Some(w) = writer.as_mut() {
                w.push(tr)?;
            }
        }
        if kind == SessionKind::Dep {
            lists = lists.merge(ListAudit::from_traces(batch.iter().map(|b| &b.0), camp.list_bound));
        }
        start = end;
    }
    if let Some(w) = writer {
        w.finish()?;
    }
    let per_message: Vec<ErrorEstimate> = fails.iter().zip(&camp.messages).map(|(&(f, o), &m)| ErrorEstimate::from_counts(trials, f, o, m)).collect();
    let error = per_message.iter().copied().fold(per_message[0], |a, e| if e.point > a.point { e } else { a });
    let mean = |s: f64| (decoded > 0).then(|| s / decoded as f64);
    Ok(CampaignSummary {
        params: camp.params,
        strategy: camp.strategy.clone(),
        trials_per_message: trials,
        messages: camp.messages.clone(),
        error,
        per_message,
        outages: fails.iter().map(|f| f.1).sum(),
        mean_decode_time: mean(time_sum),
        mean_empirical_rate_bits_per_use: mean(rate_sum),
        decoding_time_audit: audit,
        list_audit: (kind == SessionKind::Dep).then_some(lists),
        auth_outcomes: auth,
    })
}

pub fn rateless(cfg: &ExperimentConfig, kind: SessionKind, out: &Path) -> Result<Value> {
    let traces = cfg.run.write_traces.then(|| out.join("traces.csv"));
    Ok(serde_json::to_value(run_campaign(cfg, kind, traces.as_deref())?)?)
}

pub fn audit(cfg: &ExperimentConfig, out: &Path) -> Result<Value> {
    let kind = cfg.audit.mode;
    let traces = cfg.run.write_traces.then(|| out.join("traces.csv"));
    let s = run_campaign(cfg, kind, traces.as_deref())?;
    let list_ok = s.list_audit.is_none_or(|l| l.exceeded == 0);
    Ok(json!({
        "mode": kind,
        "trials": s.trials_per_message * s.messages.len() as u64,
        "decoding_time_audit": s.decoding_time_audit,
        "list_audit": s.list_audit,
        "passed": s.decoding_time_audit.violations == 0 && list_ok,
    }))
}

pub const SWEEP_COLUMNS: [&str; 10] = [
    "axis",
    "value",
    "capacity_bits_per_use",
    "error_estimate",
    "ci_low",
    "ci_high",
    "trials",
    "outages",
    "mean_decode_time_chunks",
    "mean_empirical_rate_bits_per_use",
];

pub fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Value> {
    let sw = cfg.sweep.clone().context("sweep: missing [sweep] table")?;
    let axis = match sw.axis {
        SweepAxis::Lambda => "lambda",
        SweepAxis::Keys => "keys",
        SweepAxis::N => "n",
    };
    let path = out.join("sweep.csv");
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?));
    w.write_record(SWEEP_COLUMNS)?;
    let mut rows = Vec::new();
    for &v in &sw.values {
        let mut c = cfg.clone();
        match sw.axis {
            SweepAxis::Lambda => c.avc.lambda = v,
            SweepAxis::Keys => c.code.keys = v as u64,
            SweepAxis::N => c.code.n = v as usize,
        }
        let opt = |x: Option<f64>| x.map_or_else(String::new, |x| x.to_string());
        let row = match sw.mode {
            SweepMode::Capacity => {
                let r = capacity(&c)?;
                vec![axis.to_string(), v.to_string(), r["value"].to_string(), String::new(), String::new(), String::new(), String::new(), String::new(), String::new(), String::new()]
            }
            SweepMode::RatelessStd | SweepMode::RatelessDep => {
                let kind = if sw.mode == SweepMode::RatelessStd { SessionKind::Std } else { SessionKind::Dep };
                let s = run_campaign(&c, kind, None)?;
                vec![
                    axis.to_string(),
                    v.to_string(),
                    String::new(),
                    s.error.point.to_string(),
                    s.error.ci_low.to_string(),
                    s.error.ci_high.to_string(),
                    (s.trials_per_message * s.messages.len() as u64).to_string(),
                    s.outages.to_string(),
                    opt(s.mean_decode_time),
                    opt(s.mean_empirical_rate_bits_per_use),
                ]
            }
        };
        w.write_record(&row)?;
        rows.push(SWEEP_COLUMNS.iter().zip(&row).map(|(k, v)| (k.to_string(), Value::String(v.clone()))).collect::<serde_json::Map<_, _>>());
    }
    w.flush()?;
    Ok(json!({ "mode": sw.mode, "axis": sw.axis, "rows": rows }))
}

pub fn brute_force(cfg: &ExperimentConfig) -> Result<Value> {
    let avc = cfg.avc()?;
    let b = &cfg.brute_force;
    let comp = EmpiricalType::from_counts(b.composition.clone())?;
    let fam = KeyedCodebookFamily::random(&comp, b.m_star, CodebookSize::exact(b.size)?, b.keys, seeds::derive(cfg.seed(), domain::FAMILY))?;
    let r = brute_force_max_error(&avc, &fam, cfg.avc.lambda, b.criterion)?;
    Ok(json!({
        "criterion": b.criterion,
        "lambda": cfg.avc.lambda,
        "blocklength": fam.template().blocklength(),
        "max_error": r.value,
        "message": r.message,
        "worst_states": r.states,
    }))
}
