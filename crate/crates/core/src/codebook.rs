//! Piecewise constant-composition random codebooks.
//!
//! A codeword is a concatenation of `M*` chunks of length `c`, each drawn
//! uniformly from the type class `T_P^c`. Codeword `j` is a pure function of
//! `(seed, j)`: its chunks come from one ChaCha stream consumed in order, so
//! truncating to `M` chunks yields exactly the first `M·c` symbols of the
//! untruncated codeword. Small codebooks are materialised in memory; larger
//! ones regenerate codewords on demand.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::alphabet::{type_class_enumerate, type_class_sample_with, EmpiricalType, InputDistribution};
use crate::seeds::{self, domain};
use crate::{Error, Result};

/// Largest codebook kept in memory.
pub const MATERIALIZE_MAX_CODEWORDS: u64 = 1 << 24;
/// Largest number of stored symbols (`N·M*·c`) kept in memory.
pub const MATERIALIZE_MAX_SYMBOLS: u64 = 1 << 26;

/// The number of codewords `N`, kept both as `log2 N` and, when it fits, as an
/// exact integer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodebookSize {
    pub log2: f64,
    pub exact: Option<u64>,
}

impl CodebookSize {
    pub fn exact(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::OutOfRange("a codebook needs at least one codeword".into()));
        }
        Ok(Self { log2: (n as f64).log2(), exact: Some(n) })
    }

    /// `⌈2^bits⌉`, exact when below `2^63`.
    pub fn from_log2(bits: f64) -> Result<Self> {
        if !bits.is_finite() || bits < 0.0 {
            return Err(Error::OutOfRange(format!("log2 N = {bits} must be finite and >= 0")));
        }
        if bits < 63.0 {
            let mut n = bits.exp2().ceil() as u64;
            // guard against the float ceiling overshooting an exact power
            if n > 1 && ((n - 1) as f64).log2() >= bits {
                n -= 1;
            }
            Self::exact(n.max(1))
        } else {
            Ok(Self { log2: bits, exact: None })
        }
    }

    /// Size of the label space actually addressed: `N` when exact, `2^64 − 1`
    /// otherwise.
    pub fn index_domain(&self) -> u64 {
        self.exact.unwrap_or(u64::MAX)
    }

    /// `ln N`.
    pub fn ln(&self) -> f64 {
        self.log2 * std::f64::consts::LN_2
    }
}

/// Pseudorandom bijection on `[0, domain)`: a balanced Feistel network with
/// cycle walking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessagePermutation {
    pub domain: u64,
    pub seed: u64,
}

const FEISTEL_ROUNDS: u64 = 6;

impl MessagePermutation {
    pub fn new(domain: u64, seed: u64) -> Self {
        Self { domain, seed }
    }

    fn half_bits(&self) -> u32 {
        let bits = 64 - (self.domain.saturating_sub(1)).leading_zeros();
        bits.div_ceil(2).max(1)
    }

    fn round(&self, r: u64, v: u64, mask: u64) -> u64 {
        seeds::derive(seeds::derive(self.seed, r), v) & mask
    }

    fn feistel(&self, x: u64, h: u32) -> u64 {
        let mask = if h >= 64 { u64::MAX } else { (1u64 << h) - 1 };
        let (mut l, mut r) = (x >> h, x & mask);
        for k in 0..FEISTEL_ROUNDS {
            let nl = r;
            r = l ^ self.round(k, r, mask);
            l = nl;
        }
        (l << h) | r
    }

    fn feistel_inv(&self, x: u64, h: u32) -> u64 {
        let mask = if h >= 64 { u64::MAX } else { (1u64 << h) - 1 };
        let (mut l, mut r) = (x >> h, x & mask);
        for k in (0..FEISTEL_ROUNDS).rev() {
            let nr = l;
            l = r ^ self.round(k, l, mask);
            r = nr;
        }
        (l << h) | r
    }

    pub fn apply(&self, i: u64) -> u64 {
        if self.domain <= 1 {
            return i;
        }
        let h = self.half_bits();
        let mut x = self.feistel(i, h);
        while x >= self.domain {
            x = self.feistel(x, h);
        }
        x
    }

    pub fn invert(&self, j: u64) -> u64 {
        if self.domain <= 1 {
            return j;
        }
        let h = self.half_bits();
        let mut x = self.feistel_inv(j, h);
        while x >= self.domain {
            x = self.feistel_inv(x, h);
        }
        x
    }
}

/// A random codebook in `(T_P^c)^{M*}`, possibly truncated to `M ≤ M*` chunks.
#[derive(Debug, Clone)]
pub struct ChunkedCodebook {
    composition: EmpiricalType,
    m_star: usize,
    m: usize,
    size: CodebookSize,
    seed: u64,
    perm: Option<MessagePermutation>,
    store: Option<Arc<Vec<u8>>>,
}

impl PartialEq for ChunkedCodebook {
    fn eq(&self, other: &Self) -> bool {
        self.composition == other.composition
            && self.m_star == other.m_star
            && self.m == other.m
            && self.size == other.size
            && self.seed == other.seed
            && self.perm == other.perm
    }
}

/// Draw codeword `j` of the codebook with the given seed, all `m_star` chunks.
fn generate_codeword(composition: &EmpiricalType, m_star: usize, seed: u64, j: u64) -> Vec<u8> {
    let mut rng = seeds::rng_at(seed, &[domain::CODEWORD, j]);
    let mut out = Vec::with_capacity(m_star * composition.length() as usize);
    for _ in 0..m_star {
        out.extend(type_class_sample_with(composition, &mut rng));
    }
    out
}

/// `N` iid codewords, every chunk uniform on `T_P^c` where `c` is the length
/// of `composition`.
pub fn build_chunked(composition: &EmpiricalType, m_star: usize, size: CodebookSize, seed: u64) -> Result<ChunkedCodebook> {
    if composition.length() == 0 {
        return Err(Error::Infeasible("chunk length must be positive".into()));
    }
    if composition.alphabet_size() < 2 || composition.alphabet_size() > 256 {
        return Err(Error::Infeasible("composition alphabet must have 2..=256 symbols".into()));
    }
    if m_star == 0 {
        return Err(Error::OutOfRange("M* must be at least 1".into()));
    }
    let c = composition.length() as usize;
    let mut cb = ChunkedCodebook {
        composition: composition.clone(),
        m_star,
        m: m_star,
        size,
        seed,
        perm: None,
        store: None,
    };
    if let Some(n) = size.exact {
        let symbols = (n as u128) * (m_star as u128) * (c as u128);
        if n <= MATERIALIZE_MAX_CODEWORDS && symbols <= MATERIALIZE_MAX_SYMBOLS as u128 {
            let mut store = Vec::with_capacity(symbols as usize);
            for j in 0..n {
                store.extend(generate_codeword(composition, m_star, seed, j));
            }
            cb.store = Some(Arc::new(store));
        }
    }
    Ok(cb)
}

/// Same sampling as [`build_chunked`]; whether the result has small lists is
/// certified afterwards by the list-size audit.
pub fn subsample_for_constant_list(composition: &EmpiricalType, m_star: usize, size: CodebookSize, seed: u64) -> Result<ChunkedCodebook> {
    build_chunked(composition, m_star, size, seed)
}

/// Map message `i` to codeword `π(i)`.
pub fn permute_messages(cb: &ChunkedCodebook, permutation_seed: u64) -> ChunkedCodebook {
    let mut out = cb.clone();
    out.perm = Some(MessagePermutation::new(cb.size.index_domain(), permutation_seed));
    out
}

/// Keep the first `M` chunks of every codeword.
pub fn truncate(cb: &ChunkedCodebook, m: usize) -> Result<ChunkedCodebook> {
    if m == 0 || m > cb.m_star {
        return Err(Error::OutOfRange(format!("truncation M={m} outside 1..={}", cb.m_star)));
    }
    let mut out = cb.clone();
    out.m = m;
    Ok(out)
}

impl ChunkedCodebook {
    pub fn composition(&self) -> &EmpiricalType {
        &self.composition
    }
    pub fn chunk_len(&self) -> usize {
        self.composition.length() as usize
    }
    pub fn m_star(&self) -> usize {
        self.m_star
    }
    /// Number of chunks after truncation.
    pub fn chunks(&self) -> usize {
        self.m
    }
    pub fn blocklength(&self) -> usize {
        self.m * self.chunk_len()
    }
    pub fn size(&self) -> CodebookSize {
        self.size
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn permutation(&self) -> Option<MessagePermutation> {
        self.perm
    }
    pub fn nx(&self) -> usize {
        self.composition.alphabet_size()
    }
    pub fn is_materialized(&self) -> bool {
        self.store.is_some()
    }

    /// Codeword with index `j`, truncated to `M·c` symbols.
    pub fn codeword(&self, j: u64) -> Vec<u8> {
        let len = self.blocklength();
        match &self.store {
            Some(s) => {
                let full = self.m_star * self.chunk_len();
                let start = j as usize * full;
                s[start..start + len].to_vec()
            }
            None => {
                let mut w = generate_codeword(&self.composition, self.m, self.seed, j);
                w.truncate(len);
                w
            }
        }
    }

    /// Borrow a stored codeword without copying (materialised codebooks only).
    pub fn codeword_slice(&self, j: u64) -> Option<&[u8]> {
        self.store.as_ref().map(|s| {
            let full = self.m_star * self.chunk_len();
            let start = j as usize * full;
            &s[start..start + self.blocklength()]
        })
    }

    /// Codeword index assigned to message `i`.
    pub fn codeword_index(&self, i: u64) -> u64 {
        match &self.perm {
            Some(p) => p.apply(i),
            None => i,
        }
    }

    /// Message carried by codeword index `j`.
    pub fn message_of(&self, j: u64) -> u64 {
        match &self.perm {
            Some(p) => p.invert(j),
            None => j,
        }
    }

    /// Codeword carrying message `i`.
    pub fn message_codeword(&self, i: u64) -> Vec<u8> {
        self.codeword(self.codeword_index(i))
    }

    /// All members of `T_P^c` in lexicographic order.
    pub fn chunk_class(&self) -> Result<Vec<Vec<u8>>> {
        type_class_enumerate(&self.composition)
    }

    pub fn header(&self) -> CodebookHeader {
        CodebookHeader {
            composition: self.composition.counts().to_vec(),
            chunk_len: self.chunk_len(),
            m_star: self.m_star,
            chunks: self.m,
            log2_n: self.size.log2,
            n_exact: self.size.exact,
            seed: self.seed,
            permutation_seed: self.perm.map(|p| p.seed),
        }
    }

    /// Write the cache file; codewords are included when `with_codewords`
    /// and the codebook is materialised.
    pub fn save_cache(&self, path: &Path, with_codewords: bool) -> Result<()> {
        let codewords = if with_codewords && self.store.is_some() {
            let n = self.size.exact.unwrap_or(0);
            Some((0..n).map(|j| self.codeword(j).iter().map(|&s| char::from_digit(s as u32, 36).unwrap()).collect()).collect())
        } else {
            None
        };
        let file = CacheFile { header: self.header(), codewords };
        let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Rebuild from a cache file. Codewords are always regenerated from the
    /// header; stored codewords, if any, are checked against the regeneration.
    pub fn load_cache(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: CacheFile = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        let h = file.header;
        let comp = EmpiricalType::from_counts(h.composition)?;
        if comp.length() as usize != h.chunk_len {
            return Err(Error::Parse("composition does not sum to the chunk length".into()));
        }
        let size = match h.n_exact {
            Some(n) => CodebookSize::exact(n)?,
            None => CodebookSize { log2: h.log2_n, exact: None },
        };
        let mut cb = build_chunked(&comp, h.m_star, size, h.seed)?;
        if let Some(ps) = h.permutation_seed {
            cb = permute_messages(&cb, ps);
        }
        cb = truncate(&cb, h.chunks)?;
        if let Some(words) = file.codewords {
            for (j, w) in words.iter().enumerate() {
                let regen: String = cb.codeword(j as u64).iter().map(|&s| char::from_digit(s as u32, 36).unwrap()).collect();
                if &regen != w {
                    return Err(Error::Parse(format!("stored codeword {j} does not match its regeneration")));
                }
            }
        }
        Ok(cb)
    }
}

/// Everything needed to regenerate a codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookHeader {
    pub composition: Vec<u64>,
    pub chunk_len: usize,
    pub m_star: usize,
    pub chunks: usize,
    pub log2_n: f64,
    pub n_exact: Option<u64>,
    pub seed: u64,
    pub permutation_seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    header: CodebookHeader,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    codewords: Option<Vec<String>>,
}

/// Blocklength-dependent parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub n: usize,
    pub c: usize,
    /// `M*`: chunks in a full codeword.
    pub m_star: usize,
    /// `M_*`: earliest chunk at which decoding may be attempted.
    pub m_lo: usize,
    pub size: CodebookSize,
}

/// `c ≈ n^{1/4}` (the divisor of `n` nearest to it), `M* = n/c`,
/// `M_* = ⌈(R_min/R_max) M*⌉`, `N = ⌈2^{n R_min}⌉`.
pub fn scaling_params(n: usize, r_min: f64, r_max: f64, nx: usize) -> Result<ScalingParams> {
    if n < 16 {
        return Err(Error::OutOfRange(format!("blocklength {n} below 16")));
    }
    let cap = (nx as f64).log2();
    if !(r_min > 0.0 && r_min <= r_max && r_max <= cap + 1e-12) {
        return Err(Error::OutOfRange(format!("need 0 < R_min <= R_max <= log2|X| = {cap}, got {r_min}, {r_max}")));
    }
    let target = (n as f64).powf(0.25);
    let c = (1..=n)
        .filter(|d| n % d == 0)
        .min_by(|a, b| {
            let da = (*a as f64 - target).abs();
            let db = (*b as f64 - target).abs();
            da.partial_cmp(&db).unwrap().then(a.cmp(b))
        })
        .unwrap();
    if c < 2 {
        return Err(Error::Infeasible(format!("no divisor of {n} near n^(1/4) other than 1")));
    }
    let m_star = n / c;
    let m_lo = if r_min == r_max { m_star } else { ((r_min / r_max) * m_star as f64 - 1e-9).ceil().max(1.0) as usize };
    let size = CodebookSize::from_log2(n as f64 * r_min)?;
    Ok(ScalingParams { n, c, m_star, m_lo: m_lo.min(m_star), size })
}

/// Chunk composition for `P` at chunk length `c`.
pub fn chunk_composition(p: &InputDistribution, c: usize) -> Result<EmpiricalType> {
    EmpiricalType::from_distribution(p, c)
}

/// `K` codebooks sharing composition, chunk length, `M*` and `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyedCodebookFamily {
    members: Vec<ChunkedCodebook>,
}

impl KeyedCodebookFamily {
    pub fn new(members: Vec<ChunkedCodebook>) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::OutOfRange("a family needs at least one key".into()))?;
        for (k, m) in members.iter().enumerate() {
            if m.composition != first.composition || m.m_star != first.m_star || m.size != first.size || m.m != first.m {
                return Err(Error::DimensionMismatch(format!("family member {k} differs in shape from member 0")));
            }
        }
        Ok(Self { members })
    }

    /// `K` independent permuted codebooks with per-key derived seeds.
    pub fn random(composition: &EmpiricalType, m_star: usize, size: CodebookSize, keys: u64, seed: u64) -> Result<Self> {
        if keys == 0 {
            return Err(Error::OutOfRange("K must be at least 1".into()));
        }
        let members = (0..keys)
            .map(|k| {
                let cb = build_chunked(composition, m_star, size, seeds::derive_path(seed, &[domain::KEY, k]))?;
                Ok(permute_messages(&cb, seeds::derive_path(seed, &[domain::PERMUTATION, k])))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(members)
    }

    pub fn keys(&self) -> u64 {
        self.members.len() as u64
    }

    pub fn member(&self, k: u64) -> &ChunkedCodebook {
        &self.members[k as usize]
    }

    pub fn members(&self) -> &[ChunkedCodebook] {
        &self.members
    }

    pub fn template(&self) -> &ChunkedCodebook {
        &self.members[0]
    }

    pub fn truncate(&self, m: usize) -> Result<Self> {
        Ok(Self { members: self.members.iter().map(|cb| truncate(cb, m)).collect::<Result<_>>()? })
    }
}
