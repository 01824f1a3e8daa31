use std::collections::BTreeSet;
use std::fmt;

/// Kind of a traceable action. Silent steps are represented separately by
/// [`Action::Tau`] and never appear in traces or histories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActKind {
    External,
    Internal,
}

/// A traceable action: an external or internal step with a label.
///
/// In every textual format, internal labels carry a leading `~` and external
/// labels are bare; `tau` is reserved for the silent action.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TraceAction {
    pub kind: ActKind,
    pub label: String,
}

impl TraceAction {
    pub fn external(label: impl Into<String>) -> Self {
        TraceAction { kind: ActKind::External, label: label.into() }
    }

    pub fn internal(label: impl Into<String>) -> Self {
        TraceAction { kind: ActKind::Internal, label: label.into() }
    }

    pub fn is_external(&self) -> bool {
        self.kind == ActKind::External
    }

    pub fn is_internal(&self) -> bool {
        self.kind == ActKind::Internal
    }

    /// Parses a single trace token: `~x` is internal, anything else external.
    pub fn parse_token(tok: &str) -> Result<Self, String> {
        if tok == "tau" {
            return Err("the silent action `tau` cannot appear in a trace".into());
        }
        if let Some(rest) = tok.strip_prefix('~') {
            if rest.is_empty() {
                return Err("`~` must be followed by a label".into());
            }
            Ok(TraceAction::internal(rest))
        } else {
            Ok(TraceAction::external(tok))
        }
    }
}

impl fmt::Display for TraceAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ActKind::External => write!(f, "{}", self.label),
            ActKind::Internal => write!(f, "~{}", self.label),
        }
    }
}

/// A transition label of an ILTS: traceable or silent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Step(TraceAction),
    Tau,
}

impl Action {
    pub fn external(label: impl Into<String>) -> Self {
        Action::Step(TraceAction::external(label))
    }

    pub fn internal(label: impl Into<String>) -> Self {
        Action::Step(TraceAction::internal(label))
    }

    pub fn is_tau(&self) -> bool {
        matches!(self, Action::Tau)
    }

    pub fn traceable(&self) -> Option<&TraceAction> {
        match self {
            Action::Step(t) => Some(t),
            Action::Tau => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Step(t) => write!(f, "{t}"),
            Action::Tau => write!(f, "tau"),
        }
    }
}

/// The set of declared action labels for one configuration.
///
/// External and internal namespaces are disjoint. An `open` alphabet collects
/// undeclared external labels on the fly, which is what the CLI uses when no
/// system file provides declarations.
#[derive(Debug, Clone, Default)]
pub struct Alphabet {
    pub external: BTreeSet<String>,
    pub internal: BTreeSet<String>,
    open: bool,
}

impl Alphabet {
    pub fn open() -> Self {
        Alphabet { open: true, ..Default::default() }
    }

    pub fn strict() -> Self {
        Alphabet::default()
    }

    pub fn declare_external(&mut self, label: &str) -> Result<(), String> {
        if self.internal.contains(label) {
            return Err(format!("label `{label}` is already declared internal"));
        }
        self.external.insert(label.to_string());
        Ok(())
    }

    pub fn declare_internal(&mut self, label: &str) -> Result<(), String> {
        if self.external.contains(label) {
            return Err(format!("label `{label}` is already declared external"));
        }
        self.internal.insert(label.to_string());
        Ok(())
    }

    /// Checks an external label as used in a modality or monitor prefix.
    pub fn check_external(&mut self, label: &str) -> Result<(), String> {
        if label == "tau" {
            return Err("`tau` is reserved for the silent action".into());
        }
        if self.internal.contains(label) {
            return Err(format!("modality on internal action `~{label}`"));
        }
        if self.external.contains(label) {
            return Ok(());
        }
        if self.open {
            self.external.insert(label.to_string());
            Ok(())
        } else {
            Err(format!("undeclared action `{label}`"))
        }
    }
}

/// The determinacy predicate on traceable actions.
#[derive(Debug, Clone)]
pub enum DetSpec {
    /// Exactly the listed labels are deterministic (`~`-prefixed entries name
    /// internal actions).
    Labels(BTreeSet<String>),
    /// Every traceable action is deterministic.
    AllDeterministic,
    /// The fixed assignment for the actor calculus: inputs, outputs and
    /// internal communication are deterministic; scope-extruding outputs and
    /// communication over scoped names are not.
    Actor,
}

impl DetSpec {
    pub fn from_labels<I: IntoIterator<Item = S>, S: Into<String>>(labels: I) -> Self {
        DetSpec::Labels(labels.into_iter().map(Into::into).collect())
    }

    pub fn none() -> Self {
        DetSpec::Labels(BTreeSet::new())
    }

    pub fn det(&self, act: &TraceAction) -> bool {
        match self {
            DetSpec::Labels(set) => match act.kind {
                ActKind::External => set.contains(&act.label),
                ActKind::Internal => set.contains(&format!("~{}", act.label)),
            },
            DetSpec::AllDeterministic => true,
            DetSpec::Actor => match act.kind {
                // `(j)i!j` extrudes a scoped name; `ncomm` hides one.
                ActKind::External => !act.label.starts_with('('),
                ActKind::Internal => act.label != "ncomm",
            },
        }
    }

    /// Convenience for external labels, the common case in formulas.
    pub fn det_external(&self, label: &str) -> bool {
        self.det(&TraceAction::external(label))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_tokens_classify_by_tilde() {
        assert_eq!(TraceAction::parse_token("a").unwrap(), TraceAction::external("a"));
        assert_eq!(TraceAction::parse_token("~ut").unwrap(), TraceAction::internal("ut"));
        assert!(TraceAction::parse_token("tau").is_err());
    }

    #[test]
    fn namespaces_are_disjoint() {
        let mut alpha = Alphabet::strict();
        alpha.declare_external("a").unwrap();
        assert!(alpha.declare_internal("a").is_err());
    }

    #[test]
    fn actor_det_assignment() {
        let det = DetSpec::Actor;
        assert!(det.det(&TraceAction::external("i?req")));
        assert!(det.det(&TraceAction::external("i!ans")));
        assert!(det.det(&TraceAction::internal("k1.init")));
        assert!(!det.det(&TraceAction::external("(j)i!j")));
        assert!(!det.det(&TraceAction::internal("ncomm")));
    }
}
