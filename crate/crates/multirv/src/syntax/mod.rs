//! ASTs, parsing, substitution and well-formedness for formulas and
//! monitors, plus the action alphabet machinery shared by every backend.

mod action;
mod formula;
mod monitor;
mod parser;

pub use action::{ActKind, Action, Alphabet, DetSpec, TraceAction};
pub use formula::{fresh_var, Formula};
pub use monitor::{fresh_mon_var, Monitor};
pub use parser::{parse_formula, parse_history, parse_monitor, parse_trace, ParseError};

use std::fmt;

/// Renders a trace for reports: actions separated by single spaces, the empty
/// trace shown as `<>`.
pub fn trace_to_string(trace: &[TraceAction]) -> String {
    if trace.is_empty() {
        return "<>".to_string();
    }
    trace
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Renders a history for reports: traces comma-separated inside braces, in
/// the history's canonical (sorted) order.
pub fn history_to_string(hist: &crate::History) -> String {
    let mut s = String::from("{");
    for (i, t) in hist.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        s.push_str(&trace_to_string(t));
    }
    s.push('}');
    s
}

/// Wrapper giving traces a `Display` without a newtype in the engine types.
pub struct TraceDisplay<'a>(pub &'a [TraceAction]);

impl fmt::Display for TraceDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", trace_to_string(self.0))
    }
}
