//! Jammer strategies and the two partial-CSI models.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::{mi_raw, normalize, tv_raw, ChannelMatrix, InputDistribution};
use crate::avc::{Avc, COST_TOL};
use crate::capacity::{min_mi_dep, min_mi_std};
use crate::avc::Mixing;
use crate::seeds;
use crate::{Error, Result};

/// What the jammer does with its budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JammerKind {
    /// A fixed state sequence (clipped to the budget if needed).
    FixedSequence { states: Vec<u8> },
    /// iid states from `Q`.
    IidMixture { q: Vec<f64> },
    /// `s_t ~ U(·|x_t)`; sees the codeword.
    MemorylessDependent { u: Vec<Vec<f64>> },
    /// Spends the budget front to back on the most confusing state for each
    /// input symbol; sees the codeword.
    GreedyDependent,
}

/// A jammer together with its per-symbol cost budget `Λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JammerStrategy {
    #[serde(flatten)]
    pub kind: JammerKind,
    pub lambda: f64,
}

impl JammerStrategy {
    pub fn new(kind: JammerKind, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::OutOfRange(format!("jammer budget {lambda} must be finite and >= 0")));
        }
        Ok(Self { kind, lambda })
    }

    /// Whether the strategy ignores the transmitted codeword.
    pub fn is_input_blind(&self) -> bool {
        matches!(self.kind, JammerKind::FixedSequence { .. } | JammerKind::IidMixture { .. })
    }

    /// iid jammer using the minimising `Q` of the convex closure.
    pub fn iid_optimal(avc: &Avc, p: &InputDistribution, lambda: f64, tol: f64) -> Result<Self> {
        let r = min_mi_std(avc, p, lambda, tol)?;
        match r.point.mixing {
            Mixing::Q(q) => Self::new(JammerKind::IidMixture { q }, lambda),
            Mixing::U(_) => unreachable!(),
        }
    }

    /// Memoryless codeword-aware jammer using the minimising `U` of the
    /// row-convex closure.
    pub fn memoryless_optimal(avc: &Avc, p: &InputDistribution, lambda: f64, tol: f64) -> Result<Self> {
        let r = min_mi_dep(avc, p, lambda, tol)?;
        match r.point.mixing {
            Mixing::U(u) => Self::new(JammerKind::MemorylessDependent { u }, lambda),
            Mixing::Q(_) => unreachable!(),
        }
    }

    fn validate(&self, avc: &Avc, n: usize) -> Result<()> {
        let check_row = |r: &[f64], what: &str| -> Result<()> {
            if r.len() != avc.ns() {
                return Err(Error::DimensionMismatch(format!("{what} has {} entries for {} states", r.len(), avc.ns())));
            }
            if r.iter().any(|v| *v < 0.0 || !v.is_finite()) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidDistribution(format!("{what} is not a distribution: {r:?}")));
            }
            Ok(())
        };
        match &self.kind {
            JammerKind::FixedSequence { states } => {
                if states.len() != n {
                    return Err(Error::LengthMismatch { expected: n, got: states.len() });
                }
                if let Some(&s) = states.iter().find(|&&s| s as usize >= avc.ns()) {
                    return Err(Error::SymbolOutOfRange { symbol: s as usize, size: avc.ns() });
                }
            }
            JammerKind::IidMixture { q } => check_row(q, "Q")?,
            JammerKind::MemorylessDependent { u } => {
                if u.len() != avc.nx() {
                    return Err(Error::DimensionMismatch(format!("U has {} rows for {} inputs", u.len(), avc.nx())));
                }
                for (x, r) in u.iter().enumerate() {
                    check_row(r, &format!("U(.|{x})"))?;
                }
            }
            JammerKind::GreedyDependent => {}
        }
        Ok(())
    }
}

fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> u8 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i as u8;
        }
    }
    p.iter().rposition(|v| *v > 0.0).unwrap_or(0) as u8
}

/// Replace positive-cost states by a zero-cost state, scanning from the end,
/// until `Σ l(s_t) ≤ nΛ`.
pub fn clip_to_budget(avc: &Avc, s: &mut [u8], lambda: f64) {
    let budget = s.len() as f64 * lambda + COST_TOL;
    let l = avc.costs();
    let mut total: f64 = s.iter().map(|&v| l[v as usize]).sum();
    let zero = avc.zero_cost_state() as u8;
    for t in (0..s.len()).rev() {
        if total <= budget {
            break;
        }
        let c = l[s[t] as usize];
        if c > 0.0 {
            total -= c;
            s[t] = zero;
        }
    }
}

/// For each input symbol, the state whose output distribution is closest in
/// variational distance to some other input's zero-cost output, if that is
/// closer than the zero-cost state already gets.
fn greedy_states(avc: &Avc) -> Vec<Option<u8>> {
    let zero_states: Vec<usize> = (0..avc.ns()).filter(|&s| avc.costs()[s] <= COST_TOL).collect();
    let score = |x: usize, s: usize| -> f64 {
        let mut best = f64::INFINITY;
        for x2 in (0..avc.nx()).filter(|&x2| x2 != x) {
            for &s2 in &zero_states {
                best = best.min(tv_raw(avc.row(x, s), avc.row(x2, s2)));
            }
        }
        best
    };
    (0..avc.nx())
        .map(|x| {
            let base = zero_states.iter().map(|&s| score(x, s)).fold(f64::INFINITY, f64::min);
            let mut pick: Option<(f64, usize)> = None;
            for s in (0..avc.ns()).filter(|&s| avc.costs()[s] > COST_TOL) {
                let v = score(x, s);
                if v < base - 1e-12 && pick.is_none_or(|(bv, _)| v < bv - 1e-12) {
                    pick = Some((v, s));
                }
            }
            pick.map(|(_, s)| s as u8)
        })
        .collect()
}

/// Produce an admissible state sequence of length `n`.
pub fn jam(avc: &Avc, strategy: &JammerStrategy, x: Option<&[u8]>, n: usize, seed: u64) -> Result<Vec<u8>> {
    strategy.validate(avc, n)?;
    let mut rng = seeds::rng_at(seed, &[seeds::domain::JAMMER]);
    let need_x = || -> Result<&[u8]> {
        let x = x.ok_or_else(|| Error::MissingInput("codeword-aware jammer needs the codeword".into()))?;
        if x.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: x.len() });
        }
        if let Some(&v) = x.iter().find(|&&v| v as usize >= avc.nx()) {
            return Err(Error::SymbolOutOfRange { symbol: v as usize, size: avc.nx() });
        }
        Ok(x)
    };
    let mut s = match &strategy.kind {
        JammerKind::FixedSequence { states } => states.clone(),
        JammerKind::IidMixture { q } => (0..n).map(|_| sample_index(q, &mut rng)).collect(),
        JammerKind::MemorylessDependent { u } => {
            let x = need_x()?;
            x.iter().map(|&v| sample_index(&u[v as usize], &mut rng)).collect()
        }
        JammerKind::GreedyDependent => {
            let x = need_x()?;
            let picks = greedy_states(avc);
            let zero = avc.zero_cost_state() as u8;
            let budget = n as f64 * strategy.lambda + COST_TOL;
            let mut spent = 0.0;
            x.iter()
                .map(|&v| match picks[v as usize] {
                    Some(s) if spent + avc.costs()[s as usize] <= budget => {
                        spent += avc.costs()[s as usize];
                        s
                    }
                    _ => zero,
                })
                .collect()
        }
    };
    clip_to_budget(avc, &mut s, strategy.lambda);
    Ok(s)
}

/// Achievable per-symbol chunk costs `{Σ_t l(s_t)/c : s ∈ S^c}`, sorted.
pub fn cost_grid(avc: &Avc, c: usize) -> Vec<f64> {
    let l = avc.costs();
    let mut sums = vec![0.0f64];
    for _ in 0..c {
        let mut next: Vec<f64> = sums.iter().flat_map(|v| l.iter().map(move |x| v + x)).collect();
        next.sort_by(|a, b| a.partial_cmp(b).unwrap());
        next.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        sums = next;
    }
    sums.into_iter().map(|v| v / c as f64).collect()
}

/// Cost CSI: per chunk, the true average cost `ℓ_m` and the report
/// `ℓ̂_m ∈ [ℓ_m, ℓ_m + ε]` on the cost grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCsi {
    pub true_costs: Vec<f64>,
    pub reported: Vec<f64>,
}

/// Channel CSI for one chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCsiChunk {
    /// The true chunk channel `V_m`.
    pub true_channel: ChannelMatrix,
    /// Emitted set: `V_m` first, then decoys.
    pub set: Vec<ChannelMatrix>,
    pub true_mi: f64,
    pub set_min_mi: f64,
}

/// Per-chunk CSI payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CsiReport {
    Cost(CostCsi),
    Channel { chunks: Vec<ChannelCsiChunk> },
}

/// Model A: `ℓ̂_m = ℓ_m + u_m`, `u_m ~ U[0, ε]`, moved to the nearest grid
/// point inside `[ℓ_m, ℓ_m + ε]`.
pub fn make_cost_csi(avc: &Avc, s: &[u8], c: usize, epsilon: f64, seed: u64) -> Result<CostCsi> {
    if c == 0 || s.len() % c != 0 {
        return Err(Error::OutOfRange(format!("chunk length {c} does not divide {}", s.len())));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::OutOfRange(format!("epsilon {epsilon} must be >= 0")));
    }
    let grid = cost_grid(avc, c);
    let mut rng = seeds::rng_at(seed, &[seeds::domain::CSI]);
    let l = avc.costs();
    let mut true_costs = Vec::with_capacity(s.len() / c);
    let mut reported = Vec::with_capacity(s.len() / c);
    for ch in s.chunks(c) {
        if let Some(&v) = ch.iter().find(|&&v| v as usize >= avc.ns()) {
            return Err(Error::SymbolOutOfRange { symbol: v as usize, size: avc.ns() });
        }
        let lm = ch.iter().map(|&v| l[v as usize]).sum::<f64>() / c as f64;
        let target = if epsilon > 0.0 { lm + rng.random::<f64>() * epsilon } else { lm };
        let lo = lm - 1e-12;
        let hi = lm + epsilon + 1e-12;
        let mut best = lm;
        let mut bd = (lm - target).abs();
        for &g in grid.iter().filter(|g| **g >= lo && **g <= hi) {
            let d = (g - target).abs();
            if d < bd {
                bd = d;
                best = g;
            }
        }
        // keep the report inside [ℓ, ℓ+ε] despite grid rounding
        true_costs.push(lm);
        reported.push(best.clamp(lm, lm + epsilon));
    }
    Ok(CostCsi { true_costs, reported })
}

/// Row `x` is the average of `W(·|x, s_t)` over positions with `x_t = x`.
/// Fails if some input symbol does not occur in the chunk.
pub fn true_chunk_channel(avc: &Avc, x: &[u8], s: &[u8]) -> Result<ChannelMatrix> {
    let (v, missing) = chunk_channel_rows(avc, x, s)?;
    if let Some(m) = missing.first() {
        return Err(Error::MissingInput(format!("input symbol {m} does not occur in the chunk")));
    }
    Ok(ChannelMatrix::from_rows_unchecked(v))
}

/// As [`true_chunk_channel`], but rows of absent symbols are filled with the
/// chunk's empirical state mixture; returns the absent symbols.
pub fn chunk_channel_rows(avc: &Avc, x: &[u8], s: &[u8]) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if x.len() != s.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: s.len() });
    }
    let (nx, ny, ns) = (avc.nx(), avc.ny(), avc.ns());
    let mut counts = vec![vec![0u32; ns]; nx];
    for (&a, &b) in x.iter().zip(s) {
        if a as usize >= nx {
            return Err(Error::SymbolOutOfRange { symbol: a as usize, size: nx });
        }
        if b as usize >= ns {
            return Err(Error::SymbolOutOfRange { symbol: b as usize, size: ns });
        }
        counts[a as usize][b as usize] += 1;
    }
    let mut overall = vec![0.0; ns];
    for &b in s {
        overall[b as usize] += 1.0;
    }
    normalize(&mut overall);
    if s.is_empty() {
        overall[avc.zero_cost_state()] = 1.0;
    }
    let mut missing = Vec::new();
    let rows = (0..nx)
        .map(|a| {
            let tot: u32 = counts[a].iter().sum();
            let mix: Vec<f64> = if tot == 0 {
                missing.push(a);
                overall.clone()
            } else {
                counts[a].iter().map(|&k| k as f64 / tot as f64).collect()
            };
            let mut row = vec![0.0; ny];
            for (st, w) in mix.iter().enumerate() {
                if *w > 0.0 {
                    for (o, p) in row.iter_mut().zip(avc.row(a, st)) {
                        *o += w * p;
                    }
                }
            }
            row
        })
        .collect();
    Ok((rows, missing))
}

/// Settings for channel CSI generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelCsiConfig {
    pub epsilon: f64,
    /// Set-size exponent: at most `c^v` channels per chunk.
    pub v: u32,
    /// Decoys requested per chunk (capped at `c^v − 1`).
    pub decoys: usize,
}

impl Default for ChannelCsiConfig {
    fn default() -> Self {
        Self { epsilon: 0.05, v: 2, decoys: 3 }
    }
}

/// Model B: per chunk, `V_m` plus decoys from perturbed state chunks, each
/// accepted only if it keeps the set ε-consistent for `P`.
pub fn make_channel_csi(
    avc: &Avc,
    x: &[u8],
    s: &[u8],
    c: usize,
    p: &InputDistribution,
    cfg: &ChannelCsiConfig,
    seed: u64,
) -> Result<Vec<ChannelCsiChunk>> {
    if c == 0 || x.len() % c != 0 || s.len() != x.len() {
        return Err(Error::OutOfRange(format!("chunk length {c} incompatible with lengths {} / {}", x.len(), s.len())));
    }
    if p.len() != avc.nx() {
        return Err(Error::DimensionMismatch("P does not match the input alphabet".into()));
    }
    if !(cfg.epsilon >= 0.0) {
        return Err(Error::OutOfRange(format!("epsilon {} must be >= 0", cfg.epsilon)));
    }
    let max_set = (c as f64).powi(cfg.v as i32).min(1e6) as usize;
    let decoys = cfg.decoys.min(max_set.saturating_sub(1));
    let mut rng = seeds::rng_at(seed, &[seeds::domain::CSI]);
    let mut out = Vec::with_capacity(x.len() / c);
    for (xc, sc) in x.chunks(c).zip(s.chunks(c)) {
        let (vm, _) = chunk_channel_rows(avc, xc, sc)?;
        let true_mi = mi_raw(p.probs(), &vm);
        let mut set = vec![vm.clone()];
        let mut min_mi = true_mi;
        let mut tries = 0;
        while set.len() < decoys + 1 && tries < 20 * (decoys + 1) {
            tries += 1;
            let mut sp = sc.to_vec();
            let flips = 1 + (rng.random::<u32>() % 2) as usize;
            for _ in 0..flips {
                let t = rng.random_range(0..c);
                sp[t] = rng.random_range(0..avc.ns()) as u8;
            }
            let (vd, _) = chunk_channel_rows(avc, xc, &sp)?;
            if set.iter().any(|v| v == &vd) {
                continue;
            }
            let mi = mi_raw(p.probs(), &vd);
            if mi >= true_mi - cfg.epsilon {
                min_mi = min_mi.min(mi);
                set.push(vd);
            }
        }
        // the consistency condition holds by construction; a failure here
        // would fall back to the singleton
        if true_mi - min_mi > cfg.epsilon + 1e-12 {
            set.truncate(1);
            min_mi = true_mi;
        }
        out.push(ChannelCsiChunk {
            true_channel: ChannelMatrix::from_rows_unchecked(vm),
            set: set.into_iter().map(ChannelMatrix::from_rows_unchecked).collect(),
            true_mi,
            set_min_mi: min_mi,
        });
    }
    Ok(out)
}

/// Whether an emitted set is ε-consistent: contains `V_m` and its minimum MI
/// is within `ε` of `I(P, V_m)`.
pub fn is_consistent(chunk: &ChannelCsiChunk, p: &InputDistribution, epsilon: f64) -> bool {
    let contains = chunk.set.iter().any(|v| v == &chunk.true_channel);
    let tm = mi_raw(p.probs(), chunk.true_channel.rows());
    let mn = chunk.set.iter().map(|v| mi_raw(p.probs(), v.rows())).fold(f64::INFINITY, f64::min);
    contains && tm - mn <= epsilon + 1e-12
}
