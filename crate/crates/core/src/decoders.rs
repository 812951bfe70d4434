//! MMI decoding, CSI-restricted list decoding and the two firing rules.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::alphabet::{output_dist_raw, tv_raw, ChannelMatrix, InputDistribution, ENUMERATION_GUARD};
use crate::avc::Avc;
use crate::capacity::{min_mi_std, StdMiCurve};
use crate::codebook::{ChunkedCodebook, CodebookSize};
use crate::{Error, Result};

/// Scores closer than this are treated as ties.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeKind {
    Message(u64),
    /// Sorted, duplicate-free message indices.
    List(Vec<u64>),
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    pub kind: DecodeKind,
    /// MMI: `[best score, runner-up score]`. List: per-chunk list sizes.
    pub diagnostics: Vec<f64>,
}

/// Plug-in mutual information (bits) of a flat `nx × ny` count table.
pub(crate) fn mi_flat(counts: &[u32], nx: usize, ny: usize, len: usize) -> f64 {
    let n = len as f64;
    let mut rx = vec![0u32; nx];
    let mut cy = vec![0u32; ny];
    for a in 0..nx {
        for b in 0..ny {
            let v = counts[a * ny + b];
            rx[a] += v;
            cy[b] += v;
        }
    }
    let mut s = 0.0;
    for a in 0..nx {
        for b in 0..ny {
            let v = counts[a * ny + b];
            if v > 0 {
                let v = v as f64;
                s += v * (v * n / (rx[a] as f64 * cy[b] as f64)).log2();
            }
        }
    }
    (s / n).max(0.0)
}

fn check_symbols(seq: &[u8], size: usize) -> Result<()> {
    match seq.iter().find(|&&v| v as usize >= size) {
        Some(&v) => Err(Error::SymbolOutOfRange { symbol: v as usize, size }),
        None => Ok(()),
    }
}

fn exhaustive_size(cb: &ChunkedCodebook) -> Result<u64> {
    match cb.size().exact {
        Some(n) if (n as f64) <= ENUMERATION_GUARD => Ok(n),
        _ => Err(Error::SearchTooLarge(format!(
            "exhaustive decoding over 2^{:.1} codewords exceeds the guard {ENUMERATION_GUARD}",
            cb.size().log2
        ))),
    }
}

/// `argmax_i Î(x(i) ∧ y)` over the (truncated) codebook; ties go to the
/// smaller message index.
pub fn mmi_decode(cb: &ChunkedCodebook, y: &[u8]) -> Result<DecodeOutcome> {
    if y.len() != cb.blocklength() {
        return Err(Error::LengthMismatch { expected: cb.blocklength(), got: y.len() });
    }
    let n = exhaustive_size(cb)?;
    let nx = cb.nx();
    let ny = y.iter().copied().max().map_or(1, |m| m as usize + 1);
    let mut counts = vec![0u32; nx * ny];
    let mut best: Option<(f64, u64)> = None;
    let mut second = f64::NEG_INFINITY;
    let mut buf;
    for j in 0..n {
        let x: &[u8] = match cb.codeword_slice(j) {
            Some(s) => s,
            None => {
                buf = cb.codeword(j);
                &buf
            }
        };
        counts.iter_mut().for_each(|v| *v = 0);
        for (&a, &b) in x.iter().zip(y) {
            counts[a as usize * ny + b as usize] += 1;
        }
        let score = mi_flat(&counts, nx, ny, y.len());
        let i = cb.message_of(j);
        match best {
            None => best = Some((score, i)),
            Some((bs, bi)) => {
                let wins = score > bs + TIE_TOL || ((score - bs).abs() <= TIE_TOL && i < bi);
                if wins {
                    second = second.max(bs);
                    best = Some((score, i));
                } else {
                    second = second.max(score);
                }
            }
        }
    }
    let (bs, bi) = best.expect("codebook has at least one codeword");
    Ok(DecodeOutcome { kind: DecodeKind::Message(bi), diagnostics: vec![bs, second] })
}

/// CSI channels consistent with the chunk output:
/// `{V : d(type(y), PV) < δ}`, as indices into `set`.
pub fn csi_filter(set: &[ChannelMatrix], p: &InputDistribution, y_chunk: &[u8], delta: f64) -> Vec<usize> {
    let Some(first) = set.first() else { return Vec::new() };
    let ny = first.outputs();
    let mut ty = vec![0.0; ny];
    for &b in y_chunk {
        if (b as usize) < ny {
            ty[b as usize] += 1.0;
        } else {
            // an output the CSI deems impossible rules out every channel
            return Vec::new();
        }
    }
    ty.iter_mut().for_each(|v| *v /= y_chunk.len() as f64);
    set.iter()
        .enumerate()
        .filter(|(_, v)| tv_raw(&ty, &output_dist_raw(p.probs(), v.rows())) < delta)
        .map(|(i, _)| i)
        .collect()
}

/// `d(joint(x,y)/c, P×V) ≤ (|X|+1)ξ` for some `V` in `channels`.
fn in_shell(x: &[u8], y: &[u8], channels: &[&ChannelMatrix], p: &[f64], radius: f64) -> bool {
    let nx = p.len();
    let ny = channels[0].outputs();
    let mut joint = vec![0u32; nx * ny];
    for (&a, &b) in x.iter().zip(y) {
        joint[a as usize * ny + b as usize] += 1;
    }
    let c = x.len() as f64;
    channels.iter().any(|v| {
        let mut d = 0.0;
        for a in 0..nx {
            for b in 0..ny {
                d += (joint[a * ny + b] as f64 / c - p[a] * v.get(a, b)).abs();
            }
        }
        0.5 * d <= radius + 1e-12
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkList {
    /// Indices into the candidate slice, ascending.
    pub indices: Vec<usize>,
    /// Indices of the CSI channels that passed the output test.
    pub channels: Vec<usize>,
    /// No channel passed the output test.
    pub empty_csi: bool,
}

/// Candidates `x` (normally all of `T_P^c`) in the `(δ, ξ)` shell of
/// some channel of the CSI set that is consistent with `y_chunk`.
pub fn chunk_list_decode(
    candidates: &[Vec<u8>],
    y_chunk: &[u8],
    csi_set: &[ChannelMatrix],
    p: &InputDistribution,
    delta: f64,
    xi: f64,
) -> Result<ChunkList> {
    let c = y_chunk.len();
    validate_set(csi_set, p)?;
    let ny = csi_set.first().map_or(usize::MAX, |v| v.outputs());
    for x in candidates {
        if x.len() != c {
            return Err(Error::LengthMismatch { expected: c, got: x.len() });
        }
        check_symbols(x, p.len())?;
    }
    let channels = csi_filter(csi_set, p, y_chunk, delta);
    if channels.is_empty() {
        return Ok(ChunkList { indices: Vec::new(), channels, empty_csi: true });
    }
    check_symbols(y_chunk, ny)?;
    let refs: Vec<&ChannelMatrix> = channels.iter().map(|&i| &csi_set[i]).collect();
    let radius = (p.len() + 1) as f64 * xi;
    let indices = candidates
        .iter()
        .enumerate()
        .filter(|(_, x)| in_shell(x, y_chunk, &refs, p.probs(), radius))
        .map(|(i, _)| i)
        .collect();
    Ok(ChunkList { indices, channels, empty_csi: false })
}

fn validate_set(set: &[ChannelMatrix], p: &InputDistribution) -> Result<()> {
    if let Some(v) = set.first() {
        for w in set {
            if w.inputs() != p.len() || w.outputs() != v.outputs() {
                return Err(Error::DimensionMismatch("CSI channels disagree with P or each other".into()));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcatList {
    /// Surviving messages, ascending.
    pub messages: Vec<u64>,
    /// Chunks whose consistent CSI set was empty.
    pub empty_chunks: Vec<usize>,
}

/// Messages whose every chunk lies in the corresponding chunk list.
pub fn concat_list_decode(
    cb: &ChunkedCodebook,
    y: &[u8],
    csi_stream: &[Vec<ChannelMatrix>],
    p: &InputDistribution,
    delta: f64,
    xi: f64,
) -> Result<ConcatList> {
    let m = cb.chunks();
    let c = cb.chunk_len();
    if y.len() != m * c {
        return Err(Error::LengthMismatch { expected: m * c, got: y.len() });
    }
    if csi_stream.len() < m {
        return Err(Error::LengthMismatch { expected: m, got: csi_stream.len() });
    }
    if p.len() != cb.nx() {
        return Err(Error::DimensionMismatch("P does not match the codebook alphabet".into()));
    }
    let n = exhaustive_size(cb)?;
    let radius = (p.len() + 1) as f64 * xi;
    let mut filtered: Vec<Vec<&ChannelMatrix>> = Vec::with_capacity(m);
    let mut empty_chunks = Vec::new();
    for (k, set) in csi_stream[..m].iter().enumerate() {
        validate_set(set, p)?;
        let yc = &y[k * c..(k + 1) * c];
        let idx = csi_filter(set, p, yc, delta);
        if idx.is_empty() {
            empty_chunks.push(k);
        }
        filtered.push(idx.iter().map(|&i| &set[i]).collect());
    }
    if !empty_chunks.is_empty() {
        return Ok(ConcatList { messages: Vec::new(), empty_chunks });
    }
    // chunk-level membership is memoised: codewords share few distinct chunks
    let mut memo: Vec<HashMap<Vec<u8>, bool>> = vec![HashMap::new(); m];
    let mut messages = Vec::new();
    for j in 0..n {
        let x = cb.codeword(j);
        let ok = (0..m).all(|k| {
            let xc = &x[k * c..(k + 1) * c];
            if let Some(&v) = memo[k].get(xc) {
                return v;
            }
            let v = in_shell(xc, &y[k * c..(k + 1) * c], &filtered[k], p.probs(), radius);
            memo[k].insert(xc.to_vec(), v);
            v
        });
        if ok {
            messages.push(cb.message_of(j));
        }
    }
    messages.sort_unstable();
    messages.dedup();
    Ok(ConcatList { messages, empty_chunks })
}

/// Rate `log2 N / (m c)` in bits per channel use.
pub fn empirical_rate(size: CodebookSize, m: usize, c: usize) -> f64 {
    size.log2 / (m * c) as f64
}

fn check_m(m: usize, c: usize, available: usize) -> Result<()> {
    if m == 0 || c == 0 {
        return Err(Error::OutOfRange("m and c must be at least 1".into()));
    }
    if available < m {
        return Err(Error::LengthMismatch { expected: m, got: available });
    }
    Ok(())
}

/// Standard-AVC rule: `log2 N/(mc) < I(P, W_std(ℓ̂)) − δ` with `ℓ̂` the mean
/// of the first `m` cost reports.
#[allow(clippy::too_many_arguments)]
pub fn tau_std(m: usize, size: CodebookSize, c: usize, csi_costs: &[f64], p: &InputDistribution, avc: &Avc, delta: f64, tol: f64) -> Result<bool> {
    check_m(m, c, csi_costs.len())?;
    let lhat = csi_costs[..m].iter().sum::<f64>() / m as f64;
    let i = min_mi_std(avc, p, lhat.min(avc.lambda_star()), tol)?.value;
    Ok(empirical_rate(size, m, c) < i - delta)
}

/// [`tau_std`] evaluated through a cached curve (same comparison).
pub fn tau_std_cached(m: usize, size: CodebookSize, c: usize, csi_costs: &[f64], curve: &StdMiCurve, delta: f64) -> Result<bool> {
    check_m(m, c, csi_costs.len())?;
    let lhat = csi_costs[..m].iter().sum::<f64>() / m as f64;
    curve.exceeds(lhat.min(curve.avc().lambda_star()), empirical_rate(size, m, c) + delta)
}

/// Nosy rule: `log2 N/(mc) < (1/m) Σ_i min_{V ∈ 𝒱_i(y,δ)} I(P,V) − ε`.
/// `None` entries (empty consistent CSI) count as 0; the second value is the
/// number of such chunks.
pub fn tau_dep(m: usize, size: CodebookSize, c: usize, chunk_mi_mins: &[Option<f64>], eps: f64) -> Result<(bool, usize)> {
    check_m(m, c, chunk_mi_mins.len())?;
    let empty = chunk_mi_mins[..m].iter().filter(|v| v.is_none()).count();
    let avg = chunk_mi_mins[..m].iter().map(|v| v.unwrap_or(0.0)).sum::<f64>() / m as f64;
    Ok((empirical_rate(size, m, c) < avg - eps, empty))
}

/// Minimum MI over the output-consistent part of a CSI set.
pub fn chunk_min_mi(set: &[ChannelMatrix], p: &InputDistribution, y_chunk: &[u8], delta: f64) -> Option<f64> {
    let idx = csi_filter(set, p, y_chunk, delta);
    idx.iter()
        .map(|&i| crate::alphabet::mi_raw(p.probs(), set[i].rows()))
        .min_by(|a, b| a.partial_cmp(b).unwrap())
}

/// First `m ∈ [m_lo, m_star]` at which `fires(m)` holds.
pub fn decoding_time<F>(m_lo: usize, m_star: usize, mut fires: F) -> Result<Option<usize>>
where
    F: FnMut(usize) -> Result<bool>,
{
    for m in m_lo.max(1)..=m_star {
        if fires(m)? {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// Exact evaluation of decoders averaged over the random codebook, for
/// codebooks too large to enumerate.
pub mod ensemble {
    use super::*;
    use crate::alphabet::EmpiricalType;

    /// Result of one MMI trial over the random codebook.
    #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
    pub struct MmiTrial {
        /// Empirical MI of the transmitted codeword.
        pub score: f64,
        /// Natural log of the union bound on the error probability.
        pub ln_bound: f64,
        /// Exact conditional error probability, when the bound was not enough.
        pub error_probability: Option<f64>,
        pub error: bool,
    }

    struct Overlap {
        c: usize,
        w: usize,
        /// chunks with `a` ones in the output, per `a`
        groups: Vec<(usize, u64)>,
        /// per group: support start and `ln h_a(k)`
        pmfs: Vec<(usize, Vec<f64>)>,
        kmin: usize,
        kmax: usize,
    }

    fn ln_choose(lf: &[f64], n: usize, k: usize) -> f64 {
        lf[n] - lf[k] - lf[n - k]
    }

    impl Overlap {
        fn new(c: usize, w: usize, y: &[u8]) -> Self {
            let mut lf = vec![0.0f64; c + 1];
            for i in 1..=c {
                lf[i] = lf[i - 1] + (i as f64).ln();
            }
            let mut by_a = vec![0u64; c + 1];
            for ch in y.chunks(c) {
                by_a[ch.iter().filter(|&&b| b == 1).count()] += 1;
            }
            let groups: Vec<(usize, u64)> = by_a.iter().enumerate().filter(|(_, n)| **n > 0).map(|(a, n)| (a, *n)).collect();
            let mut kmin = 0;
            let mut kmax = 0;
            let pmfs = groups
                .iter()
                .map(|&(a, cnt)| {
                    let lo = (a + w).saturating_sub(c);
                    let hi = a.min(w);
                    kmin += lo * cnt as usize;
                    kmax += hi * cnt as usize;
                    let base = ln_choose(&lf, c, w);
                    let v = (lo..=hi).map(|k| ln_choose(&lf, a, k) + ln_choose(&lf, c - a, w - k) - base).collect();
                    (lo, v)
                })
                .collect();
            Self { c, w, groups, pmfs, kmin, kmax }
        }

        fn mean(&self) -> f64 {
            self.groups.iter().map(|&(a, n)| n as f64 * (a * self.w) as f64 / self.c as f64).sum()
        }

        /// `ln M_a(θ)` and the tilted mean, summed over chunks.
        fn cumulant(&self, theta: f64) -> (f64, f64) {
            let mut lam = 0.0;
            let mut d = 0.0;
            for (&(_, cnt), (lo, pmf)) in self.groups.iter().zip(&self.pmfs) {
                let terms: Vec<f64> = pmf.iter().enumerate().map(|(i, l)| l + theta * (lo + i) as f64).collect();
                let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = terms.iter().map(|t| (t - mx).exp()).sum();
                let mean: f64 = terms.iter().enumerate().map(|(i, t)| (lo + i) as f64 * (t - mx).exp()).sum::<f64>() / z;
                lam += cnt as f64 * (mx + z.ln());
                d += cnt as f64 * mean;
            }
            (lam, d)
        }

        /// θ with tilted mean `target` (which must lie strictly inside the support).
        fn solve_theta(&self, target: f64) -> f64 {
            let mu = self.mean();
            if (target - mu).abs() < 1e-12 {
                return 0.0;
            }
            let sign = if target > mu { 1.0 } else { -1.0 };
            let mut hi = 1.0;
            while hi < 1e3 && sign * (self.cumulant(sign * hi).1 - target) < 0.0 {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if sign * (self.cumulant(sign * mid).1 - target) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            sign * 0.5 * (lo + hi)
        }

        fn ln_point_extreme(&self, upper: bool) -> f64 {
            self.groups
                .iter()
                .zip(&self.pmfs)
                .map(|(&(_, cnt), (_, pmf))| cnt as f64 * if upper { *pmf.last().unwrap() } else { pmf[0] })
                .sum()
        }

        /// Chernoff bound on `ln P(K ≥ k)` (upper) or `ln P(K ≤ k)`.
        fn ln_tail_bound(&self, k: usize, upper: bool) -> f64 {
            let mu = self.mean();
            if upper {
                if k > self.kmax {
                    return f64::NEG_INFINITY;
                }
                if (k as f64) <= mu {
                    return 0.0;
                }
                if k == self.kmax {
                    return self.ln_point_extreme(true);
                }
            } else {
                if k < self.kmin {
                    return f64::NEG_INFINITY;
                }
                if (k as f64) >= mu {
                    return 0.0;
                }
                if k == self.kmin {
                    return self.ln_point_extreme(false);
                }
            }
            let th = self.solve_theta(k as f64);
            let (lam, _) = self.cumulant(th);
            (lam - th * k as f64).min(0.0)
        }

        /// Exact `ln P(K = k)` for all `k`, via the distribution tilted by `θ`.
        fn ln_pmf_tilted(&self, theta: f64) -> Vec<f64> {
            let len = self.kmax - self.kmin + 1;
            let mut cur = vec![0.0f64; len];
            cur[0] = 1.0;
            let mut width = 1usize;
            let mut offset = 0usize;
            let mut lam = 0.0;
            let mut next = vec![0.0f64; len];
            for (&(_, cnt), (lo, pmf)) in self.groups.iter().zip(&self.pmfs) {
                let terms: Vec<f64> = pmf.iter().enumerate().map(|(i, l)| l + theta * (lo + i) as f64).collect();
                let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = terms.iter().map(|t| (t - mx).exp()).sum();
                let g: Vec<f64> = terms.iter().map(|t| (t - mx).exp() / z).collect();
                lam += cnt as f64 * (mx + z.ln());
                for _ in 0..cnt {
                    // K - kmin accumulates lo per chunk in `offset`
                    let new_width = width + g.len() - 1;
                    next[..new_width].iter_mut().for_each(|v| *v = 0.0);
                    for (i, &cv) in cur[..width].iter().enumerate() {
                        if cv == 0.0 {
                            continue;
                        }
                        for (t, &gv) in g.iter().enumerate() {
                            next[i + t] += cv * gv;
                        }
                    }
                    std::mem::swap(&mut cur, &mut next);
                    width = new_width;
                    offset += lo;
                }
            }
            debug_assert_eq!(offset, self.kmin);
            (0..len).map(|i| cur[i].ln() + lam - theta * (self.kmin + i) as f64).collect()
        }
    }

    fn ln_sum_exp(v: impl Iterator<Item = f64>) -> f64 {
        let v: Vec<f64> = v.collect();
        let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if mx == f64::NEG_INFINITY {
            return mx;
        }
        mx + v.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
    }

    /// `ln(−ln(1 − p))` from `ln p`.
    fn ln_neg_ln1m(lp: f64) -> f64 {
        if lp < -20.0 {
            lp + (0.5 * lp.exp()).ln_1p()
        } else if lp >= 0.0 {
            f64::INFINITY
        } else {
            (-(-lp.exp()).ln_1p()).ln()
        }
    }

    /// Binary 2×2 plug-in MI for overlap `k`.
    fn ihat(k: usize, len: usize, wt: usize, at: usize) -> f64 {
        let n = len as f64;
        let cells = [
            (k, wt, at),
            (wt - k, wt, len - at),
            (at - k, len - wt, at),
            (len + k - wt - at, len - wt, len - at),
        ];
        let mut s = 0.0;
        for (v, rx, cy) in cells {
            if v > 0 {
                let v = v as f64;
                s += v * (v * n / (rx as f64 * cy as f64)).log2();
            }
        }
        (s / n).max(0.0)
    }

    /// Decide one MMI trial over the random chunked codebook: the
    /// transmitted codeword `x` (message `message`) against `N − 1`
    /// independent competitors, with ties going to smaller messages. The
    /// trial is an error iff `u` (uniform on `[0,1)`) falls below the
    /// conditional error probability given `(x, y)`.
    pub fn mmi_trial(composition: &EmpiricalType, x: &[u8], y: &[u8], size: CodebookSize, message: u64, u: f64) -> Result<MmiTrial> {
        if composition.alphabet_size() != 2 {
            return Err(Error::Unsupported("ensemble MMI evaluation needs binary inputs".into()));
        }
        check_symbols(y, 2).map_err(|_| Error::Unsupported("ensemble MMI evaluation needs binary outputs".into()))?;
        check_symbols(x, 2)?;
        let c = composition.length() as usize;
        if x.len() != y.len() || x.len() % c != 0 || x.is_empty() {
            return Err(Error::LengthMismatch { expected: x.len(), got: y.len() });
        }
        let w = composition.counts()[1] as usize;
        let ov = Overlap::new(c, w, y);
        let len = x.len();
        let wt = w * (len / c);
        let at: usize = y.iter().filter(|&&b| b == 1).count();
        let k0 = x.iter().zip(y).filter(|(&a, &b)| a == 1 && b == 1).count();
        let score = ihat(k0, len, wt, at);

        // competitors below / above the transmitted message in label order
        let (ln_below, ln_above) = match size.exact {
            Some(n) => (((message.min(n - 1)) as f64).ln(), ((n - 1 - message.min(n - 1)) as f64).ln()),
            None => {
                let f = message as f64 / u64::MAX as f64;
                (f.ln() + size.ln(), (1.0 - f).ln() + size.ln())
            }
        };
        let ln_comp = ln_sum_exp([ln_below, ln_above].into_iter());
        if ln_comp == f64::NEG_INFINITY {
            return Ok(MmiTrial { score, ln_bound: f64::NEG_INFINITY, error_probability: Some(0.0), error: false });
        }

        let ge: Vec<usize> = (ov.kmin..=ov.kmax).filter(|&k| ihat(k, len, wt, at) >= score - TIE_TOL).collect();
        let gt: Vec<usize> = (ov.kmin..=ov.kmax).filter(|&k| ihat(k, len, wt, at) > score + TIE_TOL).collect();
        let mu = ov.mean();
        let k_hi = ge.iter().copied().find(|&k| k as f64 > mu);
        let k_lo = ge.iter().rev().copied().find(|&k| k as f64 <= mu);
        let ln_ge_bound = ln_sum_exp(
            [k_hi.map(|k| ov.ln_tail_bound(k, true)), k_lo.map(|k| ov.ln_tail_bound(k, false))]
                .into_iter()
                .flatten(),
        );
        let ln_bound = (ln_comp + ln_ge_bound).min(0.0);
        if u.ln() > ln_bound {
            return Ok(MmiTrial { score, ln_bound, error_probability: None, error: false });
        }

        // exact tails, each side from its own tilted distribution
        let tilt = |k: usize| -> f64 {
            let target = (k as f64).clamp(ov.kmin as f64 + 0.5, ov.kmax as f64 - 0.5);
            if ov.kmax == ov.kmin {
                0.0
            } else {
                ov.solve_theta(target)
            }
        };
        let upper = k_hi.map(|k| ov.ln_pmf_tilted(tilt(k)));
        let lower = k_lo.map(|k| ov.ln_pmf_tilted(tilt(k)));
        let ln_p = |k: usize| -> f64 {
            let table = if k as f64 > mu { upper.as_ref() } else { lower.as_ref() };
            table.or(upper.as_ref()).or(lower.as_ref()).map_or(f64::NEG_INFINITY, |t| t[k - ov.kmin])
        };
        let l_ge = ln_neg_ln1m(ln_sum_exp(ge.iter().map(|&k| ln_p(k))).min(0.0));
        let l_gt = ln_neg_ln1m(ln_sum_exp(gt.iter().map(|&k| ln_p(k))).min(0.0));
        let total = ln_sum_exp([ln_below + l_ge, ln_above + l_gt].into_iter().filter(|v| !v.is_nan())).exp();
        let perr = -(-total).exp_m1();
        Ok(MmiTrial { score, ln_bound, error_probability: Some(perr), error: u < perr })
    }

    /// Chunk lists over the whole class `T_P^c`, for the list ensemble.
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct ListTrial {
        pub transmitted_survives: bool,
        pub chunk_list_sizes: Vec<usize>,
        /// `Σ_m log2(|L_m| / |T_P^c|)`: log-probability that an independent
        /// random codeword survives every chunk.
        pub log2_survival: f64,
        pub empty_chunks: Vec<usize>,
    }

    pub fn list_trial(
        class: &[Vec<u8>],
        x: &[u8],
        y: &[u8],
        csi_stream: &[Vec<ChannelMatrix>],
        p: &InputDistribution,
        delta: f64,
        xi: f64,
    ) -> Result<ListTrial> {
        let c = class.first().map_or(0, |v| v.len());
        if c == 0 || x.len() != y.len() || x.len() % c != 0 {
            return Err(Error::LengthMismatch { expected: x.len(), got: y.len() });
        }
        let m = x.len() / c;
        if csi_stream.len() < m {
            return Err(Error::LengthMismatch { expected: m, got: csi_stream.len() });
        }
        let mut survives = true;
        let mut sizes = Vec::with_capacity(m);
        let mut log2_survival = 0.0;
        let mut empty_chunks = Vec::new();
        let total = (class.len() as f64).log2();
        for k in 0..m {
            let (xc, yc) = (&x[k * c..(k + 1) * c], &y[k * c..(k + 1) * c]);
            let cl = chunk_list_decode(class, yc, &csi_stream[k], p, delta, xi)?;
            if cl.empty_csi {
                empty_chunks.push(k);
            }
            let refs: Vec<&ChannelMatrix> = cl.channels.iter().map(|&i| &csi_stream[k][i]).collect();
            if refs.is_empty() || !in_shell(xc, yc, &refs, p.probs(), (p.len() + 1) as f64 * xi) {
                survives = false;
            }
            sizes.push(cl.indices.len());
            log2_survival += (cl.indices.len() as f64).log2() - total;
        }
        Ok(ListTrial { transmitted_survives: survives, chunk_list_sizes: sizes, log2_survival, empty_chunks })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::{joint_type, type_class_enumerate, EmpiricalType};
    use crate::avc::Avc;
    use crate::codebook::{build_chunked, permute_messages, truncate};
    use crate::seeds;
    use proptest::prelude::*;
    use rand::Rng;

    fn bits(s: &str) -> Vec<u8> {
        s.bytes().map(|b| b - b'0').collect()
    }

    fn comp(a: u64, b: u64) -> EmpiricalType {
        EmpiricalType::from_counts(vec![a, b]).unwrap()
    }

    /// Straightforward argmax using the joint-type MI from `alphabet`.
    fn oracle(cb: &ChunkedCodebook, y: &[u8]) -> u64 {
        let n = cb.size().exact.unwrap();
        let ny = *y.iter().max().unwrap() as usize + 1;
        let mut scored: Vec<(u64, f64)> = (0..n)
            .map(|i| {
                let x = cb.message_codeword(i);
                (i, joint_type(&x, y, 2, ny).unwrap().empirical_mi())
            })
            .collect();
        let best = scored.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
        scored.retain(|v| v.1 >= best - TIE_TOL);
        scored[0].0
    }

    #[test]
    fn mmi_noiseless_and_ties() {
        let cb = build_chunked(&comp(2, 2), 2, CodebookSize::exact(8).unwrap(), 3).unwrap();
        for i in 0..8 {
            let x = cb.message_codeword(i);
            let d = mmi_decode(&cb, &x).unwrap();
            // a duplicate codeword with smaller index wins the tie
            let first = (0..8).find(|&k| cb.message_codeword(k) == x).unwrap();
            assert_eq!(d.kind, DecodeKind::Message(first));
        }
        assert!(mmi_decode(&cb, &[0; 3]).is_err());
    }

    #[test]
    fn chunk_list_exact_conditional_class() {
        let p = InputDistribution::uniform(2).unwrap();
        let class = type_class_enumerate(&comp(2, 2)).unwrap();
        let v = ChannelMatrix::identity(2);
        let y = bits("0110");
        let l = chunk_list_decode(&class, &y, &[v.clone()], &p, 0.5, 0.0).unwrap();
        let got: Vec<&Vec<u8>> = l.indices.iter().map(|&i| &class[i]).collect();
        assert_eq!(got, vec![&y]);
        // output far from PV: the set is empty and flagged
        let l = chunk_list_decode(&class, &bits("1111"), &[v], &p, 0.1, 1.0).unwrap();
        assert!(l.empty_csi && l.indices.is_empty());
    }

    #[test]
    fn concat_examples() {
        let p = InputDistribution::uniform(2).unwrap();
        let cb = build_chunked(&comp(2, 2), 2, CodebookSize::exact(16).unwrap(), 9).unwrap();
        let cb1 = truncate(&cb, 1).unwrap();
        let id = ChannelMatrix::identity(2);
        let y = cb1.message_codeword(5);
        let class = type_class_enumerate(&comp(2, 2)).unwrap();
        let cl = chunk_list_decode(&class, &y, &[id.clone()], &p, 0.5, 0.1).unwrap();
        let allowed: Vec<&Vec<u8>> = cl.indices.iter().map(|&i| &class[i]).collect();
        let expect: Vec<u64> = (0..16).filter(|&i| allowed.contains(&&cb1.message_codeword(i))).collect();
        let got = concat_list_decode(&cb1, &y, &[vec![id.clone()]], &p, 0.5, 0.1).unwrap();
        assert_eq!(got.messages, expect);
        assert!(got.messages.contains(&5));
        // a second chunk whose shell admits nothing
        let y2 = [y.clone(), bits("1111")].concat();
        let bsc = ChannelMatrix::bsc(0.5).unwrap();
        let got = concat_list_decode(&cb, &y2, &[vec![id.clone()], vec![bsc]], &p, 0.6, 0.0).unwrap();
        assert!(got.messages.is_empty());
    }

    #[test]
    fn tau_examples() {
        let a = Avc::bitflip();
        let p = InputDistribution::uniform(2).unwrap();
        let size = CodebookSize::exact(1 << 10).unwrap();
        for m in 1..30 {
            let fire = tau_std(m, size, 8, &vec![0.0; m], &p, &a, 0.1, 1e-9).unwrap();
            assert_eq!(fire, 10.0 / ((m * 8) as f64) < 0.9, "m={m}");
            assert!(!tau_std(m, size, 8, &vec![0.5; m], &p, &a, 0.1, 1e-9).unwrap());
        }
        let one = CodebookSize::exact(1).unwrap();
        assert!(tau_std(1, one, 8, &[0.0], &p, &a, 0.1, 1e-9).unwrap());
        assert!(tau_dep(1, one, 8, &[Some(0.5)], 0.1).unwrap().0);
        assert!(!tau_dep(3, size, 8, &[Some(0.0); 3], 0.0).unwrap().0);
        let (f, e) = tau_dep(2, CodebookSize::exact(2).unwrap(), 8, &[None, Some(1.0)], 0.0).unwrap();
        assert!(f && e == 1);
        let i0 = 0.6;
        let eps = 0.1;
        for m in 1..20 {
            let fire = tau_dep(m, size, 8, &vec![Some(i0); m], eps).unwrap().0;
            assert_eq!(fire, m as f64 > 10.0 / (8.0 * (i0 - eps)));
        }
    }

    #[test]
    fn cached_tau_matches_direct() {
        let a = Avc::bitflip();
        let p = InputDistribution::uniform(2).unwrap();
        let curve = StdMiCurve::new(&a, &p, 1e-9).unwrap();
        let size = CodebookSize::exact(1 << 12).unwrap();
        let mut rng = seeds::rng(4);
        for _ in 0..200 {
            let m = rng.random_range(1..40);
            let costs: Vec<f64> = (0..m).map(|_| rng.random_range(0..9) as f64 / 8.0 * 0.4).collect();
            assert_eq!(
                tau_std(m, size, 8, &costs, &p, &a, 0.05, 1e-9).unwrap(),
                tau_std_cached(m, size, 8, &costs, &curve, 0.05).unwrap()
            );
        }
    }

    #[test]
    fn ensemble_mmi_matches_exhaustive_frequency() {
        // small N: compare the exact conditional error probability with
        // the empirical frequency over freshly drawn codebooks
        let cm = comp(2, 2);
        let size = CodebookSize::exact(6).unwrap();
        let x = bits("01100101");
        let y = bits("01110100");
        let msg = 2;
        let t = ensemble::mmi_trial(&cm, &x, &y, size, msg, 0.0).unwrap();
        let p_exact = t.error_probability.unwrap();
        let trials = 40_000;
        let mut errs = 0;
        for s in 0..trials {
            let cb = build_chunked(&cm, 2, size, s).unwrap();
            // plant x as message `msg`
            let mut best = (ensemble_score(&x, &y), msg);
            for i in (0..6).filter(|&i| i != msg) {
                let sc = ensemble_score(&cb.codeword(i), &y);
                if sc > best.0 + TIE_TOL || ((sc - best.0).abs() <= TIE_TOL && i < best.1) {
                    best = (sc, i);
                }
            }
            errs += (best.1 != msg) as u64;
        }
        let f = errs as f64 / trials as f64;
        let sd = (p_exact * (1.0 - p_exact) / trials as f64).sqrt();
        assert!((f - p_exact).abs() < 4.0 * sd + 1e-9, "{f} vs {p_exact}");
    }

    fn ensemble_score(x: &[u8], y: &[u8]) -> f64 {
        joint_type(x, y, 2, 2).unwrap().empirical_mi()
    }

    #[test]
    fn ensemble_mmi_bound_is_consistent_with_exact() {
        let cm = comp(4, 4);
        let mut rng = seeds::rng(11);
        for trial in 0..30 {
            let m = 6;
            let x: Vec<u8> = (0..m).flat_map(|_| crate::alphabet::type_class_sample_with(&cm, &mut rng)).collect();
            let y: Vec<u8> = x.iter().map(|&b| b ^ (rng.random::<f64>() < 0.1) as u8).collect();
            let size = CodebookSize::exact(1 << (trial % 8 + 1)).unwrap();
            let exact = ensemble::mmi_trial(&cm, &x, &y, size, 1, 0.0).unwrap();
            let p = exact.error_probability.unwrap();
            assert!(p <= exact.ln_bound.exp() * (1.0 + 1e-9) + 1e-15, "{p} > {}", exact.ln_bound.exp());
            for u in [0.0, 0.3, 0.99] {
                let r = ensemble::mmi_trial(&cm, &x, &y, size, 1, u).unwrap();
                assert_eq!(r.error, u < p);
            }
        }
    }

    #[test]
    fn ensemble_list_matches_codebook() {
        let p = InputDistribution::uniform(2).unwrap();
        let cm = comp(2, 2);
        let class = type_class_enumerate(&cm).unwrap();
        let cb = build_chunked(&cm, 2, CodebookSize::exact(32).unwrap(), 1).unwrap();
        let x = cb.codeword(3);
        let y = bits("01100110");
        let set = vec![vec![ChannelMatrix::bsc(0.25).unwrap()], vec![ChannelMatrix::bsc(0.25).unwrap()]];
        let t = ensemble::list_trial(&class, &x, &y, &set, &p, 0.5, 0.1).unwrap();
        let l = concat_list_decode(&cb, &y, &set, &p, 0.5, 0.1).unwrap();
        assert_eq!(t.transmitted_survives, l.messages.contains(&3));
        assert!(t.chunk_list_sizes.iter().all(|&s| s <= class.len()));
    }

    proptest! {
        #[test]
        fn mmi_equals_oracle(seed: u64, n in 1u64..=64, m in 1usize..=4, flips in prop::collection::vec(0u8..2, 16), permute: bool) {
            let cm = comp(2, 2);
            let mut cb = truncate(&build_chunked(&cm, 4, CodebookSize::exact(n).unwrap(), seed).unwrap(), m).unwrap();
            if permute {
                cb = permute_messages(&cb, seed ^ 7);
            }
            let x = cb.message_codeword(seed % n);
            let y: Vec<u8> = x.iter().zip(&flips).map(|(a, b)| a ^ b).collect();
            let d = mmi_decode(&cb, &y).unwrap();
            prop_assert_eq!(d.kind, DecodeKind::Message(oracle(&cb, &y)));
        }

        #[test]
        fn chunk_list_monotone(seed: u64, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0, x1 in 0.0f64..0.3, x2 in 0.0f64..0.3, e in 0.0f64..0.5) {
            let p = InputDistribution::uniform(2).unwrap();
            let class = type_class_enumerate(&comp(4, 4)).unwrap();
            let mut rng = seeds::rng(seed);
            let y: Vec<u8> = (0..8).map(|_| rng.random_range(0..2u8)).collect();
            let set = vec![ChannelMatrix::bsc(e).unwrap(), ChannelMatrix::identity(2)];
            let (dl, dh) = (d1.min(d2), d1.max(d2));
            let (xl, xh) = (x1.min(x2), x1.max(x2));
            let small = chunk_list_decode(&class, &y, &set, &p, dl, xl).unwrap().indices;
            let big = chunk_list_decode(&class, &y, &set, &p, dh, xh).unwrap().indices;
            prop_assert!(small.iter().all(|i| big.contains(i)));
            prop_assert!(big.len() <= class.len());
        }

        #[test]
        fn transmitted_in_own_shell(seed: u64, e in 0.0f64..0.5) {
            let a = Avc::bitflip();
            let p = InputDistribution::uniform(2).unwrap();
            let cm = comp(4, 4);
            let class = type_class_enumerate(&cm).unwrap();
            let mut rng = seeds::rng(seed);
            let x = crate::alphabet::type_class_sample_with(&cm, &mut rng);
            let s: Vec<u8> = (0..8).map(|_| (rng.random::<f64>() < e) as u8).collect();
            let y = a.transmit(&x, &s, &mut rng).unwrap();
            let v = crate::adversary::true_chunk_channel(&a, &x, &s).unwrap();
            // shell radius covering the realised joint type
            let jt = joint_type(&x, &y, 2, 2).unwrap().to_distribution();
            let pv: Vec<f64> = (0..4).map(|k| 0.5 * v.get(k / 2, k % 2)).collect();
            let dist = tv_raw(&jt, &pv);
            let xi = dist / 3.0;
            let l = chunk_list_decode(&class, &y, &[v], &p, 2.0, xi).unwrap();
            let xi_idx = class.iter().position(|c| c == &x).unwrap();
            prop_assert!(l.indices.contains(&xi_idx));
        }

        #[test]
        fn decoding_time_is_first_firing(bits in prop::collection::vec(any::<bool>(), 1..30), lo in 1usize..10) {
            let star = bits.len();
            let t = decoding_time(lo, star, |m| Ok(bits[m - 1])).unwrap();
            let expect = (lo.max(1)..=star).find(|&m| bits[m - 1]);
            prop_assert_eq!(t, expect);
        }
    }
}
