//! Statistical drivers: each runs an ensemble of independent replicas on
//! disjoint random streams, reduces it single-threaded, and reports its
//! estimates together with pass/fail verdicts.

mod excursion;
mod extinction;
mod harnack;
mod polyhedral;
mod qsd;
pub mod stats;

pub use excursion::{excursion_tail_experiment, TailConfig, TailReport, DEFAULT_CENSOR_CAP};
pub use extinction::{extinction_experiment, ExtinctionConfig, ExtinctionReport};
pub use harnack::{default_target, harnack_experiment, HarnackPoint, HarnackReport};
pub use polyhedral::{polyhedral_experiment, PolyhedralConfig, PolyhedralReport, ReplicaSummary};
pub use qsd::{qsd_experiment, qsd_n_comparison, NComparison, QsdConfig, QsdReport};

use serde::Serialize;

use stats::ols;

/// Number of trailing inter-jump times used by the collapse classifier.
pub const COLLAPSE_WINDOW: usize = 300;

/// Slope of `log(tau_{i+1} - tau_i)` against `i` below which a jump sequence
/// counts as geometrically collapsing.
pub const COLLAPSE_SLOPE: f64 = -0.05;

/// Stream tags, one per sub-experiment, so no two ensembles share draws.
pub(crate) mod tag {
    pub const HARNACK: u32 = 1;
    pub const EXCURSION: u32 = 2;
    pub const EXTINCTION: u32 = 3;
    pub const CHAIN: u32 = 4;
    pub const POLYHEDRAL: u32 = 5;
    pub const QSD: u32 = 6;
}

/// One named pass/fail check with the measured value and the rule applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub value: f64,
    pub rule: String,
    pub pass: bool,
}

impl Criterion {
    pub fn new(name: impl Into<String>, value: f64, rule: impl Into<String>, pass: bool) -> Self {
        Self { name: name.into(), value, rule: rule.into(), pass }
    }
}

/// Verdict of the collapse classifier on one jump sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapseFit {
    /// Fitted slope of the log inter-jump time per jump.
    pub slope: f64,
    /// Number of inter-jump times used.
    pub used: usize,
    pub collapsing: bool,
}

/// Least-squares slope of `log(tau_{i+1} - tau_i)` against the jump index
/// over the last [`COLLAPSE_WINDOW`] increments. Takes log increments rather
/// than jump times because a collapsing sequence has increments far below the
/// resolution of `tau` itself. Returns `None` with fewer than 3 increments.
pub fn classify_collapse(log_increments: &[f64]) -> Option<CollapseFit> {
    let tail = &log_increments[log_increments.len().saturating_sub(COLLAPSE_WINDOW)..];
    if tail.len() < 3 {
        return None;
    }
    let x: Vec<f64> = (0..tail.len()).map(|i| i as f64).collect();
    let slope = ols(&x, tail).slope;
    Some(CollapseFit { slope, used: tail.len(), collapsing: slope < COLLAPSE_SLOPE })
}
