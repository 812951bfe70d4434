//! Monte Carlo error estimation with Wilson intervals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seeds::{self, domain};
use crate::{Error, Result};

/// How one trial ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    Correct,
    Error,
    /// The decision rule never fired; not a decoding error.
    Outage,
}

/// Failure frequency of the worst sampled message.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub trials: u64,
    /// Trials that reached a decision (`trials − outages`).
    pub decoded: u64,
    pub failures: u64,
    pub outages: u64,
    /// `failures / decoded` (0 when nothing decoded).
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Message attaining the maximum.
    pub message: u64,
}

impl ErrorEstimate {
    pub fn from_counts(trials: u64, failures: u64, outages: u64, message: u64) -> Self {
        let decoded = trials - outages;
        let (point, (ci_low, ci_high)) = if decoded == 0 {
            (0.0, (0.0, 1.0))
        } else {
            (failures as f64 / decoded as f64, wilson(failures, decoded, 1.96))
        };
        Self { trials, decoded, failures, outages, point, ci_low, ci_high, message }
    }

    /// `sqrt(p(1−p)/n)` at the point estimate.
    pub fn std_error(&self) -> f64 {
        if self.decoded == 0 {
            return 0.0;
        }
        (self.point * (1.0 - self.point) / self.decoded as f64).sqrt()
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

/// Run `trials` independent trials for each message, in parallel, and report
/// the worst message. Trial `t` of the `j`-th message gets the seed
/// `derive_path(seed, [TRIAL, j, t])`, so the result does not depend on the
/// thread count.
pub fn estimate_error<F>(runner: F, trials: u64, messages: &[u64], seed: u64) -> Result<ErrorEstimate>
where
    F: Fn(u64, u64) -> Result<TrialOutcome> + Sync,
{
    if messages.is_empty() {
        return Err(Error::OutOfRange("at least one message must be sampled".into()));
    }
    let per_message = messages
        .iter()
        .enumerate()
        .map(|(j, &msg)| {
            let counts = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let s = seeds::derive_path(seed, &[domain::TRIAL, j as u64, t]);
                    runner(msg, s).map(|o| match o {
                        TrialOutcome::Correct => (0u64, 0u64),
                        TrialOutcome::Error => (1, 0),
                        TrialOutcome::Outage => (0, 1),
                    })
                })
                .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
            Ok(ErrorEstimate::from_counts(trials, counts.0, counts.1, msg))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = per_message[0];
    for e in &per_message[1..] {
        if e.point > best.point {
            best = *e;
        }
    }
    Ok(best)
}
