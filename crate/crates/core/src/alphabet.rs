//! Finite-alphabet probability primitives.
//!
//! Symbols are `u8`; sequences are `Vec<u8>` / `&[u8]`. All logarithms are
//! base 2 and `0 log 0 = 0`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute slack on simplex and stochasticity checks.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Largest type class `type_class_enumerate` will materialise.
pub const ENUMERATION_GUARD: f64 = 1e7;

fn check_distribution(probs: &[f64], what: &str) -> Result<()> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidDistribution(format!("{what}: negative or non-finite entry in {probs:?}")));
    }
    let s: f64 = probs.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidDistribution(format!("{what}: entries sum to {s}")));
    }
    Ok(())
}

/// Rescale a nonnegative vector to sum to one exactly (up to rounding).
pub fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// A probability vector `P(x)` over the input alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDistribution {
    probs: Vec<f64>,
}

impl InputDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(format!("input alphabet needs at least 2 symbols, got {}", probs.len())));
        }
        check_distribution(&probs, "input distribution")?;
        Ok(Self { probs })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        Self::new(vec![1.0 / size as f64; size])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// A stochastic matrix `V(y|x)`; row `x` is a distribution over outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMatrix {
    rows: Vec<Vec<f64>>,
}

impl ChannelMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::DimensionMismatch("channel matrix must be non-empty".into()));
        }
        let ny = rows[0].len();
        for (x, r) in rows.iter().enumerate() {
            if r.len() != ny {
                return Err(Error::DimensionMismatch(format!("row {x} has {} entries, expected {ny}", r.len())));
            }
            check_distribution(r, &format!("channel row {x}"))?;
        }
        Ok(Self { rows })
    }

    /// Build without validation; callers guarantee stochastic rows.
    pub(crate) fn from_rows_unchecked(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    pub fn identity(size: usize) -> Self {
        let rows = (0..size)
            .map(|x| (0..size).map(|y| if x == y { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { rows }
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange(format!("crossover {p} not in [0,1]")));
        }
        Ok(Self { rows: vec![vec![1.0 - p, p], vec![p, 1.0 - p]] })
    }

    pub fn inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn outputs(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x]
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.rows[x][y]
    }

    /// Output distribution `PV(y) = Σ_x P(x) V(y|x)`.
    pub fn output_distribution(&self, p: &InputDistribution) -> Result<Vec<f64>> {
        if p.len() != self.inputs() {
            return Err(Error::DimensionMismatch(format!("P has {} symbols, V has {} rows", p.len(), self.inputs())));
        }
        Ok(output_dist_raw(p.probs(), &self.rows))
    }

    /// Convex combination `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, alpha: f64, other: &ChannelMatrix) -> Result<Self> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(Error::DimensionMismatch("channel shapes differ".into()));
        }
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().zip(b).map(|(u, v)| alpha * u + (1.0 - alpha) * v).collect())
            .collect();
        Ok(Self { rows })
    }

    /// Largest absolute deviation of any row sum from one.
    pub fn stochasticity_error(&self) -> f64 {
        self.rows.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }
}

pub(crate) fn output_dist_raw(p: &[f64], v: &[Vec<f64>]) -> Vec<f64> {
    let ny = v[0].len();
    let mut out = vec![0.0; ny];
    for (px, row) in p.iter().zip(v) {
        for (o, w) in out.iter_mut().zip(row) {
            *o += px * w;
        }
    }
    out
}

/// `I(P,V)` without dimension checks.
pub(crate) fn mi_raw(p: &[f64], v: &[Vec<f64>]) -> f64 {
    let q = output_dist_raw(p, v);
    let mut acc = 0.0;
    for (px, row) in p.iter().zip(v) {
        if *px <= 0.0 {
            continue;
        }
        for (w, qy) in row.iter().zip(&q) {
            if *w > 0.0 && *qy > 0.0 {
                acc += px * w * (w / qy).log2();
            }
        }
    }
    acc.max(0.0)
}

/// Mutual information `I(P,V)` in bits.
pub fn mutual_information(p: &InputDistribution, v: &ChannelMatrix) -> Result<f64> {
    if p.len() != v.inputs() {
        return Err(Error::DimensionMismatch(format!("P has {} symbols, V has {} rows", p.len(), v.inputs())));
    }
    Ok(mi_raw(p.probs(), v.rows()))
}

pub(crate) fn h2(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        -t * t.log2() - (1.0 - t) * (1.0 - t).log2()
    }
}

/// Binary entropy `h_b(t)` in bits.
pub fn binary_entropy(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(format!("binary entropy argument {t} not in [0,1]")));
    }
    Ok(h2(t))
}

/// Shannon entropy of a probability vector in bits.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|x| **x > 0.0).map(|x| -x * x.log2()).sum()
}

/// Total variational distance `½ Σ |Q1 − Q2|`.
pub fn variational_distance(q1: &[f64], q2: &[f64]) -> Result<f64> {
    if q1.len() != q2.len() {
        return Err(Error::DimensionMismatch(format!("supports of size {} and {}", q1.len(), q2.len())));
    }
    Ok(tv_raw(q1, q2))
}

pub(crate) fn tv_raw(q1: &[f64], q2: &[f64]) -> f64 {
    0.5 * q1.iter().zip(q2).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// A histogram over an alphabet of fixed size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmpiricalType {
    counts: Vec<u64>,
    length: u64,
}

impl EmpiricalType {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::DimensionMismatch("empty alphabet".into()));
        }
        let length = counts.iter().sum();
        Ok(Self { counts, length })
    }

    /// Type of a sequence over an alphabet of `size` symbols.
    pub fn of_sequence(seq: &[u8], size: usize) -> Result<Self> {
        let mut counts = vec![0u64; size];
        for &s in seq {
            let s = s as usize;
            if s >= size {
                return Err(Error::SymbolOutOfRange { symbol: s, size });
            }
            counts[s] += 1;
        }
        Ok(Self { counts, length: seq.len() as u64 })
    }

    /// The type with denominator `c` equal to `P`; fails unless `c·P(x)` is
    /// integral for every `x` (within 1e-9).
    pub fn from_distribution(p: &InputDistribution, c: usize) -> Result<Self> {
        let mut counts = Vec::with_capacity(p.len());
        for &px in p.probs() {
            let v = px * c as f64;
            let r = v.round();
            if (v - r).abs() > 1e-9 {
                return Err(Error::Infeasible(format!("P(x)={px} is not a multiple of 1/{c}")));
            }
            counts.push(r as u64);
        }
        Self::from_counts(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn length(&self) -> u64 {
        self.length
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    pub fn to_distribution(&self) -> Vec<f64> {
        let n = self.length.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Multinomial coefficient `length! / Π counts!` as a float.
    pub fn class_size(&self) -> f64 {
        self.log2_class_size().exp2()
    }

    pub fn log2_class_size(&self) -> f64 {
        let lf = |k: u64| (1..=k).map(|i| (i as f64).log2()).sum::<f64>();
        lf(self.length) - self.counts.iter().map(|&c| lf(c)).sum::<f64>()
    }

    /// Exact multinomial coefficient if it fits in `u128`.
    pub fn class_size_exact(&self) -> Option<u128> {
        let mut acc: u128 = 1;
        let mut placed: u128 = 0;
        for &c in &self.counts {
            for i in 1..=c as u128 {
                placed += 1;
                acc = acc.checked_mul(placed)? / i;
            }
        }
        Some(acc)
    }
}

/// Joint histogram of an input/output sequence pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointType {
    counts: Vec<Vec<u64>>,
    length: u64,
}

impl JointType {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.is_empty() || counts[0].is_empty() {
            return Err(Error::DimensionMismatch("empty joint alphabet".into()));
        }
        let ny = counts[0].len();
        if counts.iter().any(|r| r.len() != ny) {
            return Err(Error::DimensionMismatch("ragged joint type".into()));
        }
        let length = counts.iter().flatten().sum();
        Ok(Self { counts, length })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn length(&self) -> u64 {
        self.length
    }

    /// Joint distribution, row-major over `(x, y)`.
    pub fn to_distribution(&self) -> Vec<f64> {
        let n = self.length.max(1) as f64;
        self.counts.iter().flatten().map(|&c| c as f64 / n).collect()
    }

    /// Plug-in mutual information of the joint type, in bits.
    pub fn empirical_mi(&self) -> f64 {
        empirical_mi_counts(&self.counts, self.length)
    }
}

pub(crate) fn empirical_mi_counts(counts: &[Vec<u64>], length: u64) -> f64 {
    if length == 0 {
        return 0.0;
    }
    let n = length as f64;
    let ny = counts[0].len();
    let mut col = vec![0u64; ny];
    for r in counts {
        for (c, v) in col.iter_mut().zip(r) {
            *c += v;
        }
    }
    let mut acc = 0.0;
    for r in counts {
        let rx: u64 = r.iter().sum();
        if rx == 0 {
            continue;
        }
        for (y, &k) in r.iter().enumerate() {
            if k > 0 {
                acc += k as f64 / n * ((k as f64 * n) / (rx as f64 * col[y] as f64)).log2();
            }
        }
    }
    acc.max(0.0)
}

/// Joint type of `(x, y)` over alphabets of sizes `nx`, `ny`.
pub fn joint_type(x: &[u8], y: &[u8], nx: usize, ny: usize) -> Result<JointType> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: y.len() });
    }
    let mut counts = vec![vec![0u64; ny]; nx];
    for (&a, &b) in x.iter().zip(y) {
        let (a, b) = (a as usize, b as usize);
        if a >= nx {
            return Err(Error::SymbolOutOfRange { symbol: a, size: nx });
        }
        if b >= ny {
            return Err(Error::SymbolOutOfRange { symbol: b, size: ny });
        }
        counts[a][b] += 1;
    }
    Ok(JointType { counts, length: x.len() as u64 })
}

/// Every sequence of the given composition, in lexicographic order.
pub fn type_class_enumerate(t: &EmpiricalType) -> Result<Vec<Vec<u8>>> {
    let size = t.class_size();
    if size > ENUMERATION_GUARD * (1.0 + 1e-9) {
        return Err(Error::EnumerationTooLarge { size, guard: ENUMERATION_GUARD });
    }
    let n = t.length() as usize;
    let mut out = Vec::with_capacity(size.round() as usize);
    let mut remaining = t.counts().to_vec();
    let mut cur = Vec::with_capacity(n);
    fn rec(rem: &mut [u64], cur: &mut Vec<u8>, n: usize, out: &mut Vec<Vec<u8>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for s in 0..rem.len() {
            if rem[s] > 0 {
                rem[s] -= 1;
                cur.push(s as u8);
                rec(rem, cur, n, out);
                cur.pop();
                rem[s] += 1;
            }
        }
    }
    rec(&mut remaining, &mut cur, n, &mut out);
    Ok(out)
}

/// A uniform draw from the type class of `t`, using `rng`.
pub fn type_class_sample_with<R: Rng + ?Sized>(t: &EmpiricalType, rng: &mut R) -> Vec<u8> {
    let mut seq: Vec<u8> = t
        .counts()
        .iter()
        .enumerate()
        .flat_map(|(s, &k)| std::iter::repeat_n(s as u8, k as usize))
        .collect();
    seq.shuffle(rng);
    seq
}

/// A uniform draw from the type class of `t`, seeded.
pub fn type_class_sample(t: &EmpiricalType, seed: u64) -> Vec<u8> {
    type_class_sample_with(t, &mut crate::seeds::rng(seed))
}
