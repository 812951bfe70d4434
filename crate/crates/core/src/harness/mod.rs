//! Sessions, Monte Carlo estimation, exact oracles and audits.

pub mod audit;
pub mod brute;
pub mod estimate;
pub mod session;
pub mod trace;

pub use estimate::{estimate_error, wilson, ErrorEstimate, TrialOutcome};
pub use session::{block_trial, run_session_dep, run_session_std, DecoderMode, DepSetup, SessionMode, SessionTrace, StdSetup};
