//! Audits of list sizes and decoding times against their guarantees.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::JammerStrategy;
use crate::alphabet::InputDistribution;
use crate::avc::Avc;
use crate::capacity::StdMiCurve;
use crate::decoders::{csi_filter, empirical_rate};
use crate::harness::session::{run_session_dep, true_chunk_mis, CsiStream, DepSetup, SessionMode, SessionTrace};
use crate::seeds::{self, domain};
use crate::{Error, Result};

/// Observed list sizes at the decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ListAudit {
    pub trials: u64,
    pub decoded: u64,
    pub max_list_size: f64,
    pub bound: u64,
    /// Decisions whose list exceeded `bound`.
    pub exceeded: u64,
    /// Decisions whose list missed the transmitted codeword.
    pub transmitted_missing: u64,
}

impl ListAudit {
    pub fn from_traces<'a>(traces: impl IntoIterator<Item = &'a SessionTrace>, bound: u64) -> Self {
        let mut a = ListAudit { trials: 0, decoded: 0, max_list_size: 0.0, bound, exceeded: 0, transmitted_missing: 0 };
        for t in traces {
            a.push(t);
        }
        a
    }

    fn push(&mut self, t: &SessionTrace) {
        self.trials += 1;
        if let Some(l) = t.list_size {
            self.decoded += 1;
            self.max_list_size = self.max_list_size.max(l);
            self.exceeded += (l > self.bound as f64) as u64;
            self.transmitted_missing += (t.transmitted_in_list == Some(false)) as u64;
        }
    }

    /// Combine two audits over disjoint trial sets.
    pub fn merge(mut self, o: Self) -> Self {
        self.trials += o.trials;
        self.decoded += o.decoded;
        self.max_list_size = self.max_list_size.max(o.max_list_size);
        self.exceeded += o.exceeded;
        self.transmitted_missing += o.transmitted_missing;
        self
    }
}

/// Run `trials` nosy sessions with uniformly drawn messages and record the
/// list sizes at the decision.
pub fn audit_list_sizes(setup: &DepSetup, strategy: &JammerStrategy, trials: u64, bound: u64, seed: u64) -> Result<ListAudit> {
    let empty = ListAudit { trials: 0, decoded: 0, max_list_size: 0.0, bound, exceeded: 0, transmitted_missing: 0 };
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = seeds::derive_path(seed, &[domain::TRIAL, t]);
            let msg = seeds::rng_at(s, &[domain::MESSAGE]).random_range(0..setup.auth.messages());
            let tr = run_session_dep(setup, strategy, msg, s)?;
            Ok(ListAudit::from_traces([&tr], bound))
        })
        .try_reduce(|| empty, |a, b| Ok(a.merge(b)))
}

/// Parameters of the decoding-time audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AuditMode {
    /// Threshold margin `δ` and cost-CSI slack `ε`.
    Std { delta: f64, csi_epsilon: f64 },
    /// Threshold margin `ε`, channel-CSI slack and output tolerance `δ`.
    Dep { eps: f64, csi_epsilon: f64, delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeViolation {
    /// Position of the trace in the audited slice.
    pub index: usize,
    pub decode_time: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecodingTimeAudit {
    pub checked: u64,
    /// Never decoded.
    pub excluded: u64,
    /// CSI broke its guarantee before the decision, so the code is not at fault.
    pub excused: u64,
    pub violations: Vec<TimeViolation>,
}

/// Result of auditing one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TraceAudit {
    Ok,
    Excluded,
    Excused,
    Violation(String),
}

fn chunk_costs(avc: &Avc, trace: &SessionTrace) -> Vec<f64> {
    trace.s_seq.chunks(trace.c).map(|ch| ch.iter().map(|&s| avc.costs()[s as usize]).sum::<f64>() / trace.c as f64).collect()
}

/// Standard rule, recomputed from the true costs: the decision must
/// satisfy `rate(M) < I(true cost) − δ`, and no earlier `m ≥ M_*` may
/// satisfy `rate(m) < I(true cost + ε) − δ`.
pub fn audit_trace_std(trace: &SessionTrace, curve: &StdMiCurve, delta: f64, csi_epsilon: f64) -> Result<TraceAudit> {
    let Some(m_dec) = trace.decode_time else { return Ok(TraceAudit::Excluded) };
    if !trace.csi_consistent {
        return Ok(TraceAudit::Excused);
    }
    let avc = curve.avc();
    let costs = chunk_costs(avc, trace);
    let size = crate::codebook::CodebookSize { log2: trace.log2_n, exact: trace.n_exact };
    let ls = avc.lambda_star();
    let mean = |m: usize| costs[..m].iter().sum::<f64>() / m as f64;
    if m_dec < trace.m_lo {
        return Ok(TraceAudit::Violation(format!("decided at {m_dec} before M_* = {}", trace.m_lo)));
    }
    if !curve.exceeds(mean(m_dec).min(ls), empirical_rate(size, m_dec, trace.c) + delta)? {
        return Ok(TraceAudit::Violation(format!("rule does not hold at the decision {m_dec} under the true cost")));
    }
    for m in trace.m_lo..m_dec {
        let hi = if csi_epsilon == 0.0 { mean(m) } else { (mean(m) + csi_epsilon).min(ls) };
        if curve.exceeds(hi.min(ls), empirical_rate(size, m, trace.c) + delta)? {
            return Ok(TraceAudit::Violation(format!("rule already held at {m} < {m_dec}")));
        }
    }
    Ok(TraceAudit::Ok)
}

/// Nosy rule, recomputed from the true chunk channels `V_m`: the decision
/// must satisfy `rate(M) < avg I(P,V) − ε`, and no earlier `m ≥ M_*` may
/// satisfy `rate(m) < avg I(P,V) − ε − ε_csi`. Traces where some `V_m`
/// before the decision was missing from the output-consistent CSI set are
/// excused.
pub fn audit_trace_dep(trace: &SessionTrace, avc: &Avc, p: &InputDistribution, eps: f64, csi_epsilon: f64, delta: f64) -> Result<TraceAudit> {
    let Some(m_dec) = trace.decode_time else { return Ok(TraceAudit::Excluded) };
    if !trace.csi_consistent {
        return Ok(TraceAudit::Excused);
    }
    let CsiStream::Channel { sets } = &trace.csi else {
        return Err(Error::DimensionMismatch("nosy audit needs channel CSI".into()));
    };
    let c = trace.c;
    let mis = true_chunk_mis(avc, p, trace)?;
    for k in 0..m_dec {
        let (xc, sc, yc) = (&trace.x_seq[k * c..(k + 1) * c], &trace.s_seq[k * c..(k + 1) * c], &trace.y_seq[k * c..(k + 1) * c]);
        let v = crate::adversary::true_chunk_channel(avc, xc, sc).ok();
        let kept = csi_filter(&sets[k], p, yc, delta);
        let present = v.is_some_and(|v| kept.iter().any(|&i| sets[k][i] == v));
        if !present {
            return Ok(TraceAudit::Excused);
        }
    }
    let size = crate::codebook::CodebookSize { log2: trace.log2_n, exact: trace.n_exact };
    let avg = |m: usize| mis[..m].iter().sum::<f64>() / m as f64;
    if m_dec < trace.m_lo {
        return Ok(TraceAudit::Violation(format!("decided at {m_dec} before M_* = {}", trace.m_lo)));
    }
    if !(empirical_rate(size, m_dec, c) < avg(m_dec) - eps + 1e-12) {
        return Ok(TraceAudit::Violation(format!("rule does not hold at the decision {m_dec} under the true channels")));
    }
    for m in trace.m_lo..m_dec {
        if empirical_rate(size, m, c) < avg(m) - eps - csi_epsilon - 1e-12 {
            return Ok(TraceAudit::Violation(format!("rule already held at {m} < {m_dec}")));
        }
    }
    Ok(TraceAudit::Ok)
}

/// Audit every trace; `curve` is required for standard traces.
pub fn audit_decoding_time(traces: &[SessionTrace], avc: &Avc, p: &InputDistribution, mode: AuditMode, curve: Option<&StdMiCurve>) -> Result<DecodingTimeAudit> {
    let owned;
    let curve = match (mode, curve) {
        (AuditMode::Std { .. }, None) => {
            owned = StdMiCurve::new(avc, p, 1e-9)?;
            Some(&owned)
        }
        (_, c) => c,
    };
    let mut out = DecodingTimeAudit::default();
    for (index, t) in traces.iter().enumerate() {
        let r = match mode {
            AuditMode::Std { delta, csi_epsilon } => {
                if t.mode != SessionMode::Std {
                    return Err(Error::DimensionMismatch(format!("trace {index} is not a standard session")));
                }
                audit_trace_std(t, curve.unwrap(), delta, csi_epsilon)?
            }
            AuditMode::Dep { eps, csi_epsilon, delta } => {
                if t.mode != SessionMode::Dep {
                    return Err(Error::DimensionMismatch(format!("trace {index} is not a nosy session")));
                }
                audit_trace_dep(t, avc, p, eps, csi_epsilon, delta)?
            }
        };
        match r {
            TraceAudit::Ok => out.checked += 1,
            TraceAudit::Excluded => out.excluded += 1,
            TraceAudit::Excused => out.excused += 1,
            TraceAudit::Violation(reason) => {
                out.checked += 1;
                out.violations.push(TimeViolation { index, decode_time: t.decode_time.unwrap_or(0), reason });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{ChannelCsiConfig, JammerKind};
    use crate::alphabet::EmpiricalType;
    use crate::codebook::{build_chunked, CodebookSize, KeyedCodebookFamily};
    use crate::derandomization::AuthScheme;
    use crate::harness::session::{run_session_std, StdSetup};

    fn uni() -> InputDistribution {
        InputDistribution::uniform(2).unwrap()
    }

    #[test]
    fn exact_cost_csi_has_no_violations() {
        let a = Avc::bitflip();
        let comp = EmpiricalType::from_counts(vec![2, 2]).unwrap();
        let fam = KeyedCodebookFamily::random(&comp, 32, CodebookSize::exact(1 << 10).unwrap(), 2, 1).unwrap();
        let setup = StdSetup::new(&a, fam, &uni(), 4, 0.05, 0.0).unwrap();
        let st = JammerStrategy::new(JammerKind::IidMixture { q: vec![0.9, 0.1] }, 0.1).unwrap();
        let traces: Vec<_> = (0..40).map(|s| run_session_std(&setup, &st, s % 7, s).unwrap()).collect();
        let r = audit_decoding_time(&traces, &a, &uni(), AuditMode::Std { delta: 0.05, csi_epsilon: 0.0 }, Some(&setup.curve)).unwrap();
        assert!(r.violations.is_empty(), "{r:?}");
        assert!(r.checked > 0);
    }

    #[test]
    fn single_codeword_and_lists() {
        let a = Avc::bitflip();
        let comp = EmpiricalType::from_counts(vec![4, 4]).unwrap();
        let size = CodebookSize::exact(4).unwrap();
        let cb = build_chunked(&comp, 4, size, 1).unwrap();
        let auth = AuthScheme::new(2, size).unwrap();
        let setup = DepSetup::new(&a, cb, auth, &uni(), 1, 0.3, 0.02, 0.05, ChannelCsiConfig::default()).unwrap();
        let st = JammerStrategy::new(JammerKind::IidMixture { q: vec![1.0, 0.0] }, 0.0).unwrap();
        let la = audit_list_sizes(&setup, &st, 20, 1, 3).unwrap();
        assert!(la.max_list_size <= 1.0 && la.exceeded == 0);
        let tr: Vec<_> = (0..10).map(|s| run_session_dep(&setup, &st, 0, s).unwrap()).collect();
        let r = audit_decoding_time(&tr, &a, &uni(), AuditMode::Dep { eps: 0.05, csi_epsilon: 0.05, delta: 0.3 }, None).unwrap();
        assert!(r.violations.is_empty(), "{r:?}");
        assert!(tr.iter().all(|t| t.decode_time == Some(1)));
    }
}
