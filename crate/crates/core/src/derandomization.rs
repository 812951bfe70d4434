//! Key reduction: elimination feasibility and list-code message
//! authentication over `GF(2^k)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::{h2, InputDistribution};
use crate::avc::Avc;
use crate::capacity::min_mi_dep;
use crate::codebook::{ChunkedCodebook, CodebookSize, KeyedCodebookFamily};
use crate::seeds::{self, domain};
use crate::{Error, Result};

pub mod gf2k {
    //! Arithmetic in `GF(2^k)` for `1 ≤ k ≤ 16`.

    use crate::{Error, Result};

    /// Irreducible polynomials, bit `i` is the coefficient of `x^i`.
    const MODULI: [u32; 17] = [
        0, 0b11, 0x7, 0xB, 0x13, 0x25, 0x43, 0x83, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443, 0x8003,
        0x1100B,
    ];

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub struct Field {
        k: u32,
        modulus: u32,
    }

    impl Field {
        pub fn new(k: u32) -> Result<Self> {
            if !(1..=16).contains(&k) {
                return Err(Error::Unsupported(format!("GF(2^{k}): only 1 <= k <= 16")));
            }
            Ok(Self { k, modulus: MODULI[k as usize] })
        }

        pub fn bits(&self) -> u32 {
            self.k
        }

        pub fn order(&self) -> u32 {
            1 << self.k
        }

        #[inline]
        pub fn add(&self, a: u32, b: u32) -> u32 {
            a ^ b
        }

        #[inline]
        pub fn mul(&self, mut a: u32, mut b: u32) -> u32 {
            let top = 1u32 << self.k;
            let mut acc = 0u32;
            while b != 0 {
                if b & 1 == 1 {
                    acc ^= a;
                }
                b >>= 1;
                a <<= 1;
                if a & top != 0 {
                    a ^= self.modulus;
                }
            }
            acc
        }

        pub fn pow(&self, a: u32, mut e: u64) -> u32 {
            let mut base = a;
            let mut acc = 1u32;
            while e > 0 {
                if e & 1 == 1 {
                    acc = self.mul(acc, base);
                }
                base = self.mul(base, base);
                e >>= 1;
            }
            acc
        }
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn every_modulus_gives_a_field() {
            for k in 1..=16u32 {
                let f = Field::new(k).unwrap();
                let q = f.order();
                let step = if k > 12 { 97 } else { 1 };
                let mut a = 1;
                while a < q {
                    assert_eq!(f.pow(a, (q - 1) as u64), 1, "k={k} a={a}");
                    a += step;
                }
            }
        }

        #[test]
        fn gf4_table() {
            // GF(4) = {0, 1, w, w+1} with w^2 = w + 1; encode w as 2
            let f = Field::new(2).unwrap();
            let table = [[0, 0, 0, 0], [0, 1, 2, 3], [0, 2, 3, 1], [0, 3, 1, 2]];
            for a in 0..4 {
                for b in 0..4 {
                    assert_eq!(f.mul(a, b), table[a as usize][b as usize]);
                }
            }
        }
    }
}

use gf2k::Field;

/// Outcome of the elimination feasibility check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EliminationPlan {
    pub keys: u64,
    pub mu: f64,
    pub delta_n: f64,
    pub n: usize,
    pub rate: f64,
    pub state_alphabet_size: usize,
    pub feasible: bool,
}

/// `μ ln(1/δ) − h_b(μ) ln 2 > (n/K)(R ln 2 + ln|S|)`, natural logarithms,
/// `R` in bits per channel use.
pub fn elimination_feasible(mu: f64, delta_n: f64, n: usize, keys: u64, rate: f64, s_size: usize) -> Result<bool> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::OutOfRange(format!("mu = {mu} not in [0,1]")));
    }
    if !(delta_n > 0.0 && delta_n < 1.0) {
        return Err(Error::OutOfRange(format!("delta(n) = {delta_n} not in (0,1)")));
    }
    if keys == 0 || s_size == 0 {
        return Err(Error::OutOfRange("K and |S| must be positive".into()));
    }
    let ln2 = std::f64::consts::LN_2;
    let lhs = mu * (1.0 / delta_n).ln() - h2(mu) * ln2;
    let rhs = n as f64 / keys as f64 * (rate * ln2 + (s_size as f64).ln());
    Ok(lhs > rhs)
}

pub fn elimination_plan(mu: f64, delta_n: f64, n: usize, keys: u64, rate: f64, s_size: usize) -> Result<EliminationPlan> {
    let feasible = elimination_feasible(mu, delta_n, n, keys, rate, s_size)?;
    Ok(EliminationPlan { keys, mu, delta_n, n, rate, state_alphabet_size: s_size, feasible })
}

/// `K` independent draws from a randomized-code sampler; key `k` gets the
/// seed derived from `(seed, k)`.
pub fn eliminate<F>(sampler: F, keys: u64, seed: u64) -> Result<KeyedCodebookFamily>
where
    F: Fn(u64) -> Result<ChunkedCodebook> + Sync,
{
    if keys == 0 {
        return Err(Error::OutOfRange("K must be at least 1".into()));
    }
    let members = (0..keys)
        .into_par_iter()
        .map(|k| sampler(seeds::derive_path(seed, &[domain::FAMILY, k])))
        .collect::<Result<Vec<_>>>()?;
    KeyedCodebookFamily::new(members)
}

/// Polynomial-evaluation authentication: key `(a, b) ∈ F_q²`, message digits
/// `m_0..m_{d−1}` in base `q`, tag `t = Σ_j m_j a^{j+1} + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuthScheme {
    field: Field,
    degree: u32,
    /// Number of authenticated messages `N' = ⌊D / q⌋` for label domain `D`.
    messages: u64,
}

/// Key pair `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthKey {
    pub a: u32,
    pub b: u32,
}

/// Result of disambiguating a candidate list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuthOutcome {
    Accepted(u64),
    NoneAccepted,
    Multiple(usize),
}

impl AuthScheme {
    /// `q = 2^k`, `K = q²`, `d = ⌈log N / log q⌉`.
    pub fn new(k_bits: u32, size: CodebookSize) -> Result<Self> {
        let field = Field::new(k_bits)?;
        let degree = ((size.log2 / k_bits as f64) - 1e-12).ceil().max(1.0) as u32;
        let messages = size.index_domain() >> k_bits;
        if messages == 0 {
            return Err(Error::Infeasible(format!("codebook with log2 N = {} has fewer than q = {} codewords", size.log2, field.order())));
        }
        Ok(Self { field, degree, messages })
    }

    /// Build from the key count `K`, which must equal `4^k`.
    pub fn from_keys(keys: u64, size: CodebookSize) -> Result<Self> {
        if keys < 4 || !keys.is_power_of_two() || keys.trailing_zeros() % 2 != 0 {
            return Err(Error::Infeasible(format!("K = {keys} is not q^2 for q = 2^k")));
        }
        Self::new(keys.trailing_zeros() / 2, size)
    }

    /// Build with an explicit degree (used by exhaustive checks).
    pub fn with_degree(k_bits: u32, degree: u32) -> Result<Self> {
        let field = Field::new(k_bits)?;
        if degree == 0 {
            return Err(Error::OutOfRange("degree must be at least 1".into()));
        }
        let bits = (degree as u64) * k_bits as u64;
        let messages = if bits >= 64 { u64::MAX } else { 1u64 << bits };
        Ok(Self { field, degree, messages })
    }

    pub fn q(&self) -> u64 {
        self.field.order() as u64
    }
    pub fn keys(&self) -> u64 {
        self.q() * self.q()
    }
    pub fn degree(&self) -> u32 {
        self.degree
    }
    pub fn messages(&self) -> u64 {
        self.messages
    }
    pub fn field(&self) -> Field {
        self.field
    }

    pub fn key(&self, index: u64) -> AuthKey {
        let q = self.q();
        AuthKey { a: (index / q % q) as u32, b: (index % q) as u32 }
    }

    /// Base-`q` digits of `m`, least significant first, `d` of them.
    pub fn digits(&self, m: u64) -> Vec<u32> {
        let k = self.field.bits();
        (0..self.degree)
            .map(|j| {
                let shift = j as u64 * k as u64;
                if shift >= 64 {
                    0
                } else {
                    ((m >> shift) & ((1u64 << k) - 1)) as u32
                }
            })
            .collect()
    }

    /// `Σ_j m_j a^{j+1} + b`.
    pub fn tag(&self, m: u64, key: AuthKey) -> u32 {
        let f = self.field;
        let mut acc = 0u32;
        let mut apow = key.a;
        for d in self.digits(m) {
            acc = f.add(acc, f.mul(d, apow));
            apow = f.mul(apow, key.a);
        }
        f.add(acc, key.b)
    }

    pub fn verify(&self, m: u64, t: u32, key: AuthKey) -> bool {
        self.tag(m, key) == t
    }

    /// Codeword label carrying `(m, t)`.
    pub fn label(&self, m: u64, t: u32) -> u64 {
        (m << self.field.bits()) | t as u64
    }

    /// Split a codeword label into `(m, t)`.
    pub fn split(&self, label: u64) -> (u64, u32) {
        (label >> self.field.bits(), (label & (self.q() - 1)) as u32)
    }
}

/// Codeword label for message `m` under `key`.
pub fn auth_encode(scheme: &AuthScheme, m: u64, key: AuthKey) -> Result<u64> {
    if m >= scheme.messages() {
        return Err(Error::OutOfRange(format!("message {m} >= N' = {}", scheme.messages())));
    }
    Ok(scheme.label(m, scheme.tag(m, key)))
}

/// Keep candidates whose tag verifies under `key`; succeed iff exactly one
/// does.
pub fn auth_disambiguate(scheme: &AuthScheme, candidates: &[(u64, u32)], key: AuthKey) -> AuthOutcome {
    let accepted: Vec<u64> = candidates.iter().filter(|(m, t)| scheme.verify(*m, *t, key)).map(|(m, _)| *m).collect();
    match accepted.len() {
        0 => AuthOutcome::NoneAccepted,
        1 => AuthOutcome::Accepted(accepted[0]),
        k => AuthOutcome::Multiple(k),
    }
}

/// Exact acceptance probability of forged pair `(m', t')` over uniformly
/// random keys consistent with the transmitted pair `(m, t)` being on the
/// list. Returns `(accepting keys, consistent keys)`.
pub fn forgery_acceptance(scheme: &AuthScheme, m: u64, t: u32, forged: (u64, u32)) -> (u64, u64) {
    let q = scheme.q() as u32;
    let f = scheme.field();
    let mut hits = 0;
    // keys consistent with (m, t): for each a, b = t − f_m(a)
    for a in 0..q {
        let fm = scheme.tag(m, AuthKey { a, b: 0 });
        let b = f.add(t, fm);
        if scheme.verify(forged.0, forged.1, AuthKey { a, b }) {
            hits += 1;
        }
    }
    (hits, q as u64)
}

/// `R = min_mi_dep − ε` and `L = ⌊6 log2|Y| / ε⌋ + 1`.
pub fn list_code_rate_params(avc: &Avc, p: &InputDistribution, lambda: f64, eps: f64, tol: f64) -> Result<(f64, u64)> {
    if !(eps > 0.0) {
        return Err(Error::OutOfRange(format!("epsilon {eps} must be positive")));
    }
    let i = min_mi_dep(avc, p, lambda, tol)?.value;
    Ok((i - eps, list_size_bound(avc.ny(), eps)))
}

/// `⌊6 log2|Y| / ε⌋ + 1`.
pub fn list_size_bound(ny: usize, eps: f64) -> u64 {
    let v = 6.0 * (ny as f64).log2() / eps;
    if v.is_finite() {
        (v + 1e-12).floor() as u64 + 1
    } else {
        1
    }
}

/// `⌈12 log2|Y| / ε⌉`, the list size audited at the firing time.
pub fn audit_list_bound(ny: usize, eps: f64) -> u64 {
    (12.0 * (ny as f64).log2() / eps - 1e-9).ceil().max(1.0) as u64
}
