//! Multi-run runtime verification of branching-time recHML properties.
//!
//! The library provides monitor synthesis from the monitorable fragment,
//! an instrumented multi-run trace-aggregation loop, the history-rejection
//! proof system with reproducible derivation trees, monitorability and
//! lower-bound calculators, and two concrete system backends (CCS processes
//! and an actor calculus) behind a common instrumentable-LTS interface. A
//! brute-force denotational evaluator acts as the ground-truth oracle on
//! small instances.

pub mod actors;
pub mod analysis;
pub mod ccs;
pub mod fragments;
pub mod generate;
pub mod par;
pub mod runtime;
pub mod search;
pub mod semantics;
pub mod syntax;
pub mod synthesis;

use std::collections::BTreeSet;

use syntax::TraceAction;

/// A finite sequence of traceable actions.
pub type Trace = Vec<TraceAction>;

/// A finite set of traces, kept sorted for canonical iteration order.
pub type History = BTreeSet<Trace>;

/// Builds a history from trace text lines (test and example convenience).
pub fn history_of(lines: &[&str]) -> History {
    lines
        .iter()
        .map(|l| syntax::parse_trace(l).expect("valid trace literal"))
        .collect()
}
