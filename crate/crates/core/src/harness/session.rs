//! End-to-end rateless sessions for both algorithms.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::adversary::{chunk_channel_rows, jam, make_channel_csi, make_cost_csi, ChannelCsiChunk, ChannelCsiConfig, JammerStrategy};
use crate::alphabet::{mi_raw, type_class_enumerate, ChannelMatrix, InputDistribution};
use crate::avc::Avc;
use crate::capacity::StdMiCurve;
use crate::codebook::{truncate, ChunkedCodebook, KeyedCodebookFamily};
use crate::decoders::{self, chunk_min_mi, concat_list_decode, csi_filter, ensemble, mmi_decode, tau_dep, tau_std_cached, DecodeKind};
use crate::derandomization::{auth_disambiguate, auth_encode, AuthOutcome, AuthScheme};
use crate::harness::estimate::TrialOutcome;
use crate::seeds::{self, domain};
use crate::{Error, Result};

/// Codebooks up to this size are decoded by scanning every codeword under
/// [`DecoderMode::Auto`].
pub const AUTO_EXHAUSTIVE_MAX: u64 = 1 << 16;

/// Forged list entries up to this count are drawn and checked one by one.
pub const EXPLICIT_FORGERY_MAX: f64 = 4096.0;

/// How a session evaluates the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderMode {
    /// Exhaustive when `N ≤ 2^16`, ensemble otherwise.
    #[default]
    Auto,
    /// Scan every codeword of the realised codebook.
    Exhaustive,
    /// The transmitted codeword is realised; the other `N − 1` are
    /// evaluated exactly in distribution over the random-coding ensemble.
    Ensemble,
}

impl DecoderMode {
    fn exhaustive(self, cb: &ChunkedCodebook) -> bool {
        match self {
            DecoderMode::Exhaustive => true,
            DecoderMode::Ensemble => false,
            DecoderMode::Auto => cb.size().exact.is_some_and(|n| n <= AUTO_EXHAUSTIVE_MAX),
        }
    }
}

/// Which algorithm produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    Std,
    Dep,
}

/// CSI actually delivered during a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CsiStream {
    /// Per-chunk cost reports `ℓ̂_m`.
    Cost { reported: Vec<f64> },
    /// Per-chunk channel sets.
    Channel { sets: Vec<Vec<ChannelMatrix>> },
}

/// One rateless session, from first chunk to decision or outage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub mode: SessionMode,
    pub seed: u64,
    pub n: usize,
    pub c: usize,
    pub m_lo: usize,
    pub m_star: usize,
    pub log2_n: f64,
    pub n_exact: Option<u64>,
    pub keys: u64,
    pub message: u64,
    pub key: u64,
    pub x_seq: Vec<u8>,
    pub s_seq: Vec<u8>,
    pub y_seq: Vec<u8>,
    pub csi: CsiStream,
    /// One bit per chunk sent: 0 until the decision, 1 at the decision.
    pub feedback: Vec<u8>,
    pub decode_time: Option<usize>,
    /// `log2 N / (M c)`; only when decoded.
    pub empirical_rate: Option<f64>,
    pub decoded: Option<u64>,
    pub error: bool,
    /// Candidate list size at the decision (nosy sessions).
    pub list_size: Option<f64>,
    pub transmitted_in_list: Option<bool>,
    pub auth_outcome: Option<String>,
    /// Chunks up to the decision whose output-consistent CSI set was empty.
    pub empty_csi_chunks: usize,
    /// Every delivered CSI report met its consistency guarantee.
    pub csi_consistent: bool,
}

impl SessionTrace {
    pub fn outcome(&self) -> TrialOutcome {
        match (self.decode_time, self.error) {
            (None, _) => TrialOutcome::Outage,
            (Some(_), true) => TrialOutcome::Error,
            (Some(_), false) => TrialOutcome::Correct,
        }
    }

    /// Average per-symbol state cost over the first `m` chunks.
    pub fn true_cost(&self, avc: &Avc, m: usize) -> f64 {
        let len = (m * self.c).min(self.s_seq.len());
        if len == 0 {
            return 0.0;
        }
        self.s_seq[..len].iter().map(|&s| avc.costs()[s as usize]).sum::<f64>() / len as f64
    }
}

fn feedback_bits(decode_time: Option<usize>, m_star: usize) -> Vec<u8> {
    match decode_time {
        Some(m) => {
            let mut f = vec![0u8; m];
            f[m - 1] = 1;
            f
        }
        None => vec![0u8; m_star],
    }
}

/// Standard rateless scheme: keyed family, cost CSI, MMI decoding.
pub struct StdSetup {
    pub avc: Avc,
    pub family: KeyedCodebookFamily,
    pub p: InputDistribution,
    pub m_lo: usize,
    pub delta: f64,
    /// Cost-CSI slack `ε` (0 for exact CSI).
    pub csi_epsilon: f64,
    pub decoder: DecoderMode,
    pub curve: Arc<StdMiCurve>,
}

impl StdSetup {
    pub fn new(avc: &Avc, family: KeyedCodebookFamily, p: &InputDistribution, m_lo: usize, delta: f64, csi_epsilon: f64) -> Result<Self> {
        let t = family.template();
        if p.len() != avc.nx() || t.nx() != avc.nx() {
            return Err(Error::DimensionMismatch("codebook, P and channel input alphabets differ".into()));
        }
        if m_lo == 0 || m_lo > t.m_star() || t.chunks() != t.m_star() {
            return Err(Error::OutOfRange(format!("M_* = {m_lo} must lie in 1..={} on an untruncated family", t.m_star())));
        }
        if !(delta >= 0.0 && csi_epsilon >= 0.0) {
            return Err(Error::OutOfRange("δ and ε must be >= 0".into()));
        }
        let curve = Arc::new(StdMiCurve::new(avc, p, 1e-9)?);
        Ok(Self { avc: avc.clone(), family, p: p.clone(), m_lo, delta, csi_epsilon, decoder: DecoderMode::Auto, curve })
    }

    pub fn with_decoder(mut self, decoder: DecoderMode) -> Self {
        self.decoder = decoder;
        self
    }

    /// Share the cached rate curve of another setup on the same channel and `P`.
    pub fn with_curve(mut self, curve: Arc<StdMiCurve>) -> Self {
        self.curve = curve;
        self
    }
}

/// Run the standard rateless scheme once. The key is drawn from the session seed.
pub fn run_session_std(setup: &StdSetup, strategy: &JammerStrategy, message: u64, seed: u64) -> Result<SessionTrace> {
    if !strategy.is_input_blind() {
        return Err(Error::Infeasible("the standard-AVC session needs an input-blind jammer".into()));
    }
    let t = setup.family.template();
    let (c, m_star) = (t.chunk_len(), t.m_star());
    let n = c * m_star;
    let size = t.size();
    if message >= size.index_domain() {
        return Err(Error::OutOfRange(format!("message {message} outside the codebook")));
    }
    let keys = setup.family.keys();
    let key = seeds::rng_at(seed, &[domain::KEY]).random_range(0..keys);
    let cb = setup.family.member(key);
    let x = cb.message_codeword(message);
    let s = jam(&setup.avc, strategy, None, n, seeds::derive(seed, domain::JAMMER))?;
    let y = setup.avc.transmit(&x, &s, &mut seeds::rng_at(seed, &[domain::CHANNEL]))?;
    let csi = make_cost_csi(&setup.avc, &s, c, setup.csi_epsilon, seeds::derive(seed, domain::CSI))?;
    let csi_consistent = csi.true_costs.iter().zip(&csi.reported).all(|(l, h)| *l <= *h && *h <= l + setup.csi_epsilon + 1e-12);

    let decode_time = decoders::decoding_time(setup.m_lo, m_star, |m| tau_std_cached(m, size, c, &csi.reported, &setup.curve, setup.delta))?;
    let mut decoded = None;
    let mut error = false;
    if let Some(m) = decode_time {
        let len = m * c;
        if setup.decoder.exhaustive(cb) {
            let d = mmi_decode(&truncate(cb, m)?, &y[..len])?;
            if let DecodeKind::Message(i) = d.kind {
                decoded = Some(i);
                error = i != message;
            }
        } else {
            let u: f64 = seeds::rng_at(seed, &[domain::DECODER]).random();
            let r = ensemble::mmi_trial(cb.composition(), &x[..len], &y[..len], size, message, u)?;
            error = r.error;
            decoded = if r.error { None } else { Some(message) };
        }
    }
    Ok(SessionTrace {
        mode: SessionMode::Std,
        seed,
        n,
        c,
        m_lo: setup.m_lo,
        m_star,
        log2_n: size.log2,
        n_exact: size.exact,
        keys,
        message,
        key,
        x_seq: x,
        s_seq: s,
        y_seq: y,
        csi: CsiStream::Cost { reported: csi.reported },
        feedback: feedback_bits(decode_time, m_star),
        decode_time,
        empirical_rate: decode_time.map(|m| decoders::empirical_rate(size, m, c)),
        decoded,
        error,
        list_size: None,
        transmitted_in_list: None,
        auth_outcome: None,
        empty_csi_chunks: 0,
        csi_consistent,
    })
}

/// Nosy rateless scheme: one list code, channel CSI, list decoding plus
/// authentication with the shared key.
pub struct DepSetup {
    pub avc: Avc,
    pub code: ChunkedCodebook,
    pub auth: AuthScheme,
    pub p: InputDistribution,
    pub m_lo: usize,
    pub delta: f64,
    pub xi: f64,
    /// Margin `ε` of the firing rule.
    pub eps: f64,
    pub csi: ChannelCsiConfig,
    /// Keep only output-consistent channels in the delivered CSI sets.
    pub restrict_to_output: bool,
    pub decoder: DecoderMode,
    class: Arc<Vec<Vec<u8>>>,
}

impl DepSetup {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        avc: &Avc,
        code: ChunkedCodebook,
        auth: AuthScheme,
        p: &InputDistribution,
        m_lo: usize,
        delta: f64,
        xi: f64,
        eps: f64,
        csi: ChannelCsiConfig,
    ) -> Result<Self> {
        if p.len() != avc.nx() || code.nx() != avc.nx() {
            return Err(Error::DimensionMismatch("codebook, P and channel input alphabets differ".into()));
        }
        if m_lo == 0 || m_lo > code.m_star() || code.chunks() != code.m_star() {
            return Err(Error::OutOfRange(format!("M_* = {m_lo} must lie in 1..={} on an untruncated code", code.m_star())));
        }
        if auth.messages() > code.size().index_domain() >> auth.field().bits() {
            return Err(Error::DimensionMismatch("authentication labels exceed the codebook".into()));
        }
        if !(delta >= 0.0 && xi >= 0.0 && eps >= 0.0) {
            return Err(Error::OutOfRange("δ, ξ and ε must be >= 0".into()));
        }
        let class = Arc::new(type_class_enumerate(code.composition())?);
        Ok(Self { avc: avc.clone(), code, auth, p: p.clone(), m_lo, delta, xi, eps, csi, restrict_to_output: false, decoder: DecoderMode::Auto, class })
    }

    pub fn with_decoder(mut self, decoder: DecoderMode) -> Self {
        self.decoder = decoder;
        self
    }

    pub fn with_restriction(mut self, restrict: bool) -> Self {
        self.restrict_to_output = restrict;
        self
    }

    pub fn chunk_class(&self) -> &[Vec<u8>] {
        &self.class
    }
}

/// Run the nosy rateless scheme once for authenticated message `message ∈ [N')`.
pub fn run_session_dep(setup: &DepSetup, strategy: &JammerStrategy, message: u64, seed: u64) -> Result<SessionTrace> {
    let cb = &setup.code;
    let (c, m_star) = (cb.chunk_len(), cb.m_star());
    let n = c * m_star;
    let size = cb.size();
    let auth = &setup.auth;
    let keys = auth.keys();
    let key = seeds::rng_at(seed, &[domain::KEY]).random_range(0..keys);
    let akey = auth.key(key);
    let label = auth_encode(auth, message, akey)?;
    let x = cb.message_codeword(label);
    let s = jam(&setup.avc, strategy, Some(&x), n, seeds::derive(seed, domain::JAMMER))?;
    let y = setup.avc.transmit(&x, &s, &mut seeds::rng_at(seed, &[domain::CHANNEL]))?;
    let chunks: Vec<ChannelCsiChunk> = make_channel_csi(&setup.avc, &x, &s, c, &setup.p, &setup.csi, seeds::derive(seed, domain::CSI))?;
    let csi_consistent = chunks.iter().all(|ch| crate::adversary::is_consistent(ch, &setup.p, setup.csi.epsilon));
    let sets: Vec<Vec<ChannelMatrix>> = chunks
        .into_iter()
        .enumerate()
        .map(|(k, ch)| {
            if setup.restrict_to_output {
                let yc = &y[k * c..(k + 1) * c];
                let keep = csi_filter(&ch.set, &setup.p, yc, setup.delta);
                keep.into_iter().map(|i| ch.set[i].clone()).collect()
            } else {
                ch.set
            }
        })
        .collect();

    let mins: Vec<Option<f64>> = sets
        .iter()
        .enumerate()
        .map(|(k, set)| chunk_min_mi(set, &setup.p, &y[k * c..(k + 1) * c], setup.delta))
        .collect();
    let decode_time = decoders::decoding_time(setup.m_lo, m_star, |m| Ok(tau_dep(m, size, c, &mins, setup.eps)?.0))?;
    let empty_csi_chunks = decode_time.map_or(0, |m| mins[..m].iter().filter(|v| v.is_none()).count());

    let mut decoded = None;
    let mut error = false;
    let mut list_size = None;
    let mut in_list = None;
    let mut auth_outcome = None;
    if let Some(m) = decode_time {
        let len = m * c;
        let outcome = if setup.decoder.exhaustive(cb) {
            let list = concat_list_decode(&truncate(cb, m)?, &y[..len], &sets[..m], &setup.p, setup.delta, setup.xi)?;
            list_size = Some(list.messages.len() as f64);
            in_list = Some(list.messages.binary_search(&label).is_ok());
            let cands: Vec<(u64, u32)> = list.messages.iter().map(|&l| auth.split(l)).filter(|(mm, _)| *mm < auth.messages()).collect();
            auth_disambiguate(auth, &cands, akey)
        } else {
            let lt = ensemble::list_trial(&setup.class, &x[..len], &y[..len], &sets[..m], &setup.p, setup.delta, setup.xi)?;
            let mut rng = seeds::rng_at(seed, &[domain::DECODER]);
            let forged = sample_competitors(&mut rng, size.exact, size.log2, lt.log2_survival)?;
            list_size = Some(forged + lt.transmitted_survives as u8 as f64);
            in_list = Some(lt.transmitted_survives);
            ensemble_auth(&mut rng, auth, akey, label, message, lt.transmitted_survives, forged, size.index_domain())
        };
        match outcome {
            AuthOutcome::Accepted(mm) => {
                decoded = Some(mm);
                error = mm != message;
                auth_outcome = Some(if error { "forged" } else { "accepted" }.to_string());
            }
            AuthOutcome::NoneAccepted => {
                error = true;
                auth_outcome = Some("none".into());
            }
            AuthOutcome::Multiple(_) => {
                error = true;
                auth_outcome = Some("multiple".into());
            }
        }
    }
    Ok(SessionTrace {
        mode: SessionMode::Dep,
        seed,
        n,
        c,
        m_lo: setup.m_lo,
        m_star,
        log2_n: size.log2,
        n_exact: size.exact,
        keys,
        message,
        key,
        x_seq: x,
        s_seq: s,
        y_seq: y,
        csi: CsiStream::Channel { sets },
        feedback: feedback_bits(decode_time, m_star),
        decode_time,
        empirical_rate: decode_time.map(|m| decoders::empirical_rate(size, m, c)),
        decoded,
        error,
        list_size,
        transmitted_in_list: in_list,
        auth_outcome,
        empty_csi_chunks,
        csi_consistent,
    })
}

/// Number of other codewords surviving every chunk list: each survives
/// independently with probability `2^log2_survival`.
fn sample_competitors<R: Rng>(rng: &mut R, n_exact: Option<u64>, log2_n: f64, log2_survival: f64) -> Result<f64> {
    if log2_survival == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let p = log2_survival.exp2().min(1.0);
    if let Some(n) = n_exact {
        if n <= 1 {
            return Ok(0.0);
        }
        let b = Binomial::new(n - 1, p).map_err(|e| Error::Infeasible(format!("binomial: {e}")))?;
        return Ok(b.sample(rng) as f64);
    }
    let lambda = (log2_n + log2_survival).exp2();
    if lambda < 1e12 {
        if lambda <= 0.0 {
            return Ok(0.0);
        }
        let d = Poisson::new(lambda).map_err(|e| Error::Infeasible(format!("poisson: {e}")))?;
        Ok(d.sample(rng))
    } else {
        Ok(lambda)
    }
}

/// Authentication over a list holding the transmitted label (if it
/// survived) and `forged` uniformly random other labels.
#[allow(clippy::too_many_arguments)]
fn ensemble_auth<R: Rng>(rng: &mut R, auth: &AuthScheme, key: crate::derandomization::AuthKey, label: u64, message: u64, survives: bool, forged: f64, domain_size: u64) -> AuthOutcome {
    let accepted_forged = if forged <= EXPLICIT_FORGERY_MAX {
        let mut hits = 0usize;
        let mut wrong = None;
        for _ in 0..forged as u64 {
            let mut l = rng.random_range(0..domain_size);
            while l == label && domain_size > 1 {
                l = rng.random_range(0..domain_size);
            }
            let (mm, t) = auth.split(l);
            if mm < auth.messages() && auth.verify(mm, t, key) {
                hits += 1;
                wrong = Some(mm);
            }
        }
        (hits, wrong)
    } else {
        let p0 = (forged * (-1.0 / auth.q() as f64).ln_1p()).exp();
        if rng.random::<f64>() < p0 {
            (0, None)
        } else {
            (2, None)
        }
    };
    match (survives, accepted_forged) {
        (true, (0, _)) => AuthOutcome::Accepted(message),
        (true, (h, _)) => AuthOutcome::Multiple(h + 1),
        (false, (0, _)) => AuthOutcome::NoneAccepted,
        (false, (1, Some(w))) => AuthOutcome::Accepted(w),
        (false, (h, _)) => AuthOutcome::Multiple(h.max(2)),
    }
}

/// Fixed-length trial: transmit the full codeword of `message` under a
/// uniformly drawn key through state sequence `s`, decode by MMI over the
/// whole key's codebook.
pub fn block_trial(avc: &Avc, family: &KeyedCodebookFamily, s: &[u8], message: u64, seed: u64) -> Result<TrialOutcome> {
    let key = seeds::rng_at(seed, &[domain::KEY]).random_range(0..family.keys());
    let cb = family.member(key);
    let x = cb.message_codeword(message);
    let y = avc.transmit(&x, s, &mut seeds::rng_at(seed, &[domain::CHANNEL]))?;
    match mmi_decode(cb, &y)?.kind {
        DecodeKind::Message(i) if i == message => Ok(TrialOutcome::Correct),
        _ => Ok(TrialOutcome::Error),
    }
}

/// `I(P, V_m)` for each chunk of a trace, from its own `x` and `s`.
pub fn true_chunk_mis(avc: &Avc, p: &InputDistribution, trace: &SessionTrace) -> Result<Vec<f64>> {
    let c = trace.c;
    trace
        .x_seq
        .chunks(c)
        .zip(trace.s_seq.chunks(c))
        .map(|(xc, sc)| Ok(mi_raw(p.probs(), &chunk_channel_rows(avc, xc, sc)?.0)))
        .collect()
}
