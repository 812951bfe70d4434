//! Exact maximal errors of small keyed codes by enumeration.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::avc::{admissible, Avc};
use crate::codebook::KeyedCodebookFamily;
use crate::decoders::{mmi_decode, DecodeKind};
use crate::{Error, Result};

/// Largest `|S|^n` or `|Y|^n` enumerated.
pub const BRUTE_FORCE_GUARD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCriterion {
    /// Worst fixed state sequence, averaged over keys.
    Std,
    /// Worst codeword-to-state map: the jammer picks `s` after seeing the codeword.
    Nosy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub value: f64,
    /// Message attaining the maximum.
    pub message: u64,
    /// Worst state sequence (standard criterion only).
    pub states: Option<Vec<u8>>,
}

fn all_sequences(size: usize, n: usize) -> Result<Vec<Vec<u8>>> {
    let total = (size as f64).powi(n as i32);
    if total > BRUTE_FORCE_GUARD {
        return Err(Error::EnumerationTooLarge { size: total, guard: BRUTE_FORCE_GUARD });
    }
    let mut out = vec![Vec::with_capacity(n)];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..size as u8).map(move |a| {
                    let mut w = v.clone();
                    w.push(a);
                    w
                })
            })
            .collect();
    }
    Ok(out)
}

/// All `s ∈ S^n` with `Σ l(s_t) ≤ nΛ`, lexicographic.
pub fn admissible_states(avc: &Avc, n: usize, lambda: f64) -> Result<Vec<Vec<u8>>> {
    Ok(all_sequences(avc.ns(), n)?.into_iter().filter(|s| admissible(avc, s, lambda)).collect())
}

/// `P(decode ≠ i | x, s)` given a decoding table over `Y^n` (lexicographic).
fn error_prob(avc: &Avc, ys: &[Vec<u8>], table: &[u64], i: u64, x: &[u8], s: &[u8]) -> f64 {
    ys.iter()
        .zip(table)
        .filter(|(_, d)| **d != i)
        .map(|(y, _)| {
            x.iter().zip(s).zip(y).map(|((&a, &b), &c)| avc.prob(c as usize, a as usize, b as usize)).product::<f64>()
        })
        .sum()
}

/// Maximal error of a keyed code with an arbitrary decoder.
/// `codewords[k][i]` is the codeword of message `i` under key `k`;
/// `decode(k, y)` returns the decoded message.
pub fn brute_force_max_error_with<D>(avc: &Avc, codewords: &[Vec<Vec<u8>>], decode: D, lambda: f64, criterion: ErrorCriterion) -> Result<BruteForceResult>
where
    D: Fn(usize, &[u8]) -> Result<u64> + Sync,
{
    let keys = codewords.len();
    let msgs = codewords.first().map_or(0, |v| v.len());
    if keys == 0 || msgs == 0 || codewords.iter().any(|v| v.len() != msgs) {
        return Err(Error::DimensionMismatch("every key needs the same nonempty message set".into()));
    }
    let n = codewords[0][0].len();
    let ys = all_sequences(avc.ny(), n)?;
    let states = admissible_states(avc, n, lambda)?;
    let tables: Vec<Vec<u64>> = (0..keys).into_par_iter().map(|k| ys.iter().map(|y| decode(k, y)).collect::<Result<_>>()).collect::<Result<_>>()?;
    // e[i][si][k]
    let errs: Vec<Vec<Vec<f64>>> = (0..msgs)
        .into_par_iter()
        .map(|i| {
            states
                .iter()
                .map(|s| (0..keys).map(|k| error_prob(avc, &ys, &tables[k], i as u64, &codewords[k][i], s)).collect())
                .collect()
        })
        .collect();
    let kf = keys as f64;
    let mut best = BruteForceResult { value: -1.0, message: 0, states: None };
    for (i, per_s) in errs.iter().enumerate() {
        match criterion {
            ErrorCriterion::Std => {
                for (si, ek) in per_s.iter().enumerate() {
                    let v = ek.iter().sum::<f64>() / kf;
                    if v > best.value {
                        best = BruteForceResult { value: v, message: i as u64, states: Some(states[si].clone()) };
                    }
                }
            }
            ErrorCriterion::Nosy => {
                // keys sharing a codeword must face the same state sequence
                let mut groups: BTreeMap<&[u8], Vec<usize>> = BTreeMap::new();
                for (k, cw) in codewords.iter().enumerate() {
                    groups.entry(&cw[i][..]).or_default().push(k);
                }
                let v: f64 = groups
                    .values()
                    .map(|ks| per_s.iter().map(|ek| ks.iter().map(|&k| ek[k]).sum::<f64>()).fold(0.0, f64::max))
                    .sum::<f64>()
                    / kf;
                if v > best.value {
                    best = BruteForceResult { value: v, message: i as u64, states: None };
                }
            }
        }
    }
    Ok(best)
}

/// Maximal error of an MMI-decoded keyed family (full-length codewords).
pub fn brute_force_max_error(avc: &Avc, family: &KeyedCodebookFamily, lambda: f64, criterion: ErrorCriterion) -> Result<BruteForceResult> {
    let n_msgs = family.template().size().exact.ok_or_else(|| Error::SearchTooLarge("codebook size is not exact".into()))?;
    if n_msgs as f64 > BRUTE_FORCE_GUARD {
        return Err(Error::EnumerationTooLarge { size: n_msgs as f64, guard: BRUTE_FORCE_GUARD });
    }
    let codewords: Vec<Vec<Vec<u8>>> = family.members().iter().map(|cb| (0..n_msgs).map(|i| cb.message_codeword(i)).collect()).collect();
    brute_force_max_error_with(
        avc,
        &codewords,
        |k, y| match mmi_decode(family.member(k as u64), y)?.kind {
            DecodeKind::Message(i) => Ok(i),
            _ => unreachable!(),
        },
        lambda,
        criterion,
    )
}

/// Exact key-averaged error of message `i` under a fixed state sequence.
pub fn exact_error(avc: &Avc, family: &KeyedCodebookFamily, message: u64, s: &[u8]) -> Result<f64> {
    let n = family.template().blocklength();
    if s.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: s.len() });
    }
    let ys = all_sequences(avc.ny(), n)?;
    let mut total = 0.0;
    for cb in family.members() {
        let table: Vec<u64> = ys
            .iter()
            .map(|y| match mmi_decode(cb, y)?.kind {
                DecodeKind::Message(i) => Ok(i),
                _ => unreachable!(),
            })
            .collect::<Result<_>>()?;
        total += error_prob(avc, &ys, &table, message, &cb.message_codeword(message), s);
    }
    Ok(total / family.keys() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::EmpiricalType;
    use crate::codebook::CodebookSize;

    #[test]
    fn repetition_code_majority() {
        let a = Avc::bitflip();
        let cws = vec![vec![vec![0u8; 3], vec![1u8; 3]]];
        let maj = |_: usize, y: &[u8]| Ok((y.iter().filter(|&&b| b == 1).count() >= 2) as u64);
        // at most one flip: majority always corrects
        let r = brute_force_max_error_with(&a, &cws, maj, 1.0 / 3.0, ErrorCriterion::Std).unwrap();
        assert_eq!(r.value, 0.0);
        // two flips allowed
        let r = brute_force_max_error_with(&a, &cws, maj, 2.0 / 3.0, ErrorCriterion::Std).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(admissible_states(&a, 3, 1.0 / 3.0).unwrap().len(), 4);
    }

    #[test]
    fn zero_budget_is_clean_channel() {
        let a = Avc::bitflip();
        let comp = EmpiricalType::from_counts(vec![2, 2]).unwrap();
        let fam = KeyedCodebookFamily::random(&comp, 1, CodebookSize::exact(3).unwrap(), 2, 4).unwrap();
        let r = brute_force_max_error(&a, &fam, 0.0, ErrorCriterion::Std).unwrap();
        // noiseless: a smaller message whose codeword equals x or its
        // complement ties with x (both have Î = 1) and wins
        let twin = |a: &[u8], b: &[u8]| a == b || a.iter().zip(b).all(|(u, v)| u != v);
        let expect = (0..3u64)
            .map(|i| {
                fam.members()
                    .iter()
                    .filter(|cb| (0..i).any(|j| twin(&cb.message_codeword(j), &cb.message_codeword(i))))
                    .count() as f64
                    / 2.0
            })
            .fold(0.0, f64::max);
        assert_eq!(r.value, expect);
    }

    #[test]
    fn nosy_dominates_std() {
        let a = Avc::bitflip();
        let comp = EmpiricalType::from_counts(vec![2, 2]).unwrap();
        for seed in 0..6 {
            let fam = KeyedCodebookFamily::random(&comp, 1, CodebookSize::exact(4).unwrap(), 3, seed).unwrap();
            let s = brute_force_max_error(&a, &fam, 0.25, ErrorCriterion::Std).unwrap();
            let n = brute_force_max_error(&a, &fam, 0.25, ErrorCriterion::Nosy).unwrap();
            assert!(n.value >= s.value - 1e-12);
            let e = exact_error(&a, &fam, s.message, s.states.as_ref().unwrap()).unwrap();
            assert!((e - s.value).abs() < 1e-12);
        }
    }

    #[test]
    fn guard() {
        let a = Avc::bitflip();
        assert!(matches!(admissible_states(&a, 25, 1.0), Err(Error::EnumerationTooLarge { .. })));
    }
}
