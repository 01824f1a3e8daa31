//! The history-rejection proof system, the formula-level violation
//! relations, and derivation-tree reporting.
//!
//! All three judgements are least relations decided by depth-first
//! backtracking search. Termination is the paper-side argument made
//! executable: the action rules strictly shrink the longest trace in the
//! history, guardedness bounds the recursion unfoldings between action
//! rules, and the memo table treats a revisited in-progress judgement as a
//! failure (a least relation has no cyclic derivations).

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::fragments::{in_shml_nf, in_shml_or, FragmentError};
use crate::syntax::{history_to_string, ActKind, DetSpec, Formula, Monitor, TraceAction};
use crate::{History, Trace};

/// Continuations of all traces in `hist` that start with the given action.
pub fn sub(hist: &History, act: &TraceAction) -> History {
    hist.iter()
        .filter(|t| t.first() == Some(act))
        .map(|t| t[1..].to_vec())
        .collect()
}

/// Traces in `hist` whose first external action is `label`, allowing any
/// prefix of internal actions before it.
pub fn start(hist: &History, label: &str) -> History {
    hist.iter()
        .filter(|t| {
            t.iter()
                .find(|a| a.kind == ActKind::External)
                .is_some_and(|a| a.label == label)
        })
        .cloned()
        .collect()
}

/// Inference rule names as printed in derivation trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleName {
    No,
    Act,
    ActPre,
    ParAL,
    ParAR,
    ParO,
    Rec,
    VF,
    VMax,
    VAndL,
    VAndR,
    VOr,
    VUm,
    VUmPre,
    SvF,
    SvMax,
    SvAndL,
    SvAndR,
    SvOr,
    SvUm,
    SvUmPre,
}

impl fmt::Display for RuleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuleName::No => "no",
            RuleName::Act => "act",
            RuleName::ActPre => "actPre",
            RuleName::ParAL => "parAL",
            RuleName::ParAR => "parAR",
            RuleName::ParO => "parO",
            RuleName::Rec => "rec",
            RuleName::VF => "vF",
            RuleName::VMax => "vMax",
            RuleName::VAndL => "vAndL",
            RuleName::VAndR => "vAndR",
            RuleName::VOr => "vOr",
            RuleName::VUm => "vUm",
            RuleName::VUmPre => "vUmPre",
            RuleName::SvF => "svF",
            RuleName::SvMax => "svMax",
            RuleName::SvAndL => "svAndL",
            RuleName::SvAndR => "svAndR",
            RuleName::SvOr => "svOr",
            RuleName::SvUm => "svUm",
            RuleName::SvUmPre => "svUmPre",
        };
        write!(f, "{s}")
    }
}

/// The subject of a judgement: a monitor or a formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Mon(Monitor),
    Form(Formula),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Mon(m) => write!(f, "{m}"),
            Term::Form(p) => write!(f, "{p}"),
        }
    }
}

/// A judgement instance: history, determinacy flag, subject term, and which
/// relation it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgement {
    pub relation: Relation,
    pub hist: History,
    pub flag: bool,
    pub term: Term,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Rej,
    Viol,
    SViol,
}

impl fmt::Display for Judgement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.relation {
            Relation::Rej => "rej",
            Relation::Viol => "viol",
            Relation::SViol => "sviol",
        };
        write!(
            f,
            "{name}({}, {}, {})",
            history_to_string(&self.hist),
            self.flag,
            self.term
        )
    }
}

/// A proof tree: each node instantiates one inference rule whose side
/// conditions hold of the conclusion and premises.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub rule: RuleName,
    pub conclusion: Judgement,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    fn leaf(rule: RuleName, conclusion: Judgement) -> Self {
        Derivation { rule, conclusion, premises: Vec::new() }
    }

    /// Depth-first rule names, the order the tree prints in.
    pub fn rule_sequence(&self) -> Vec<RuleName> {
        let mut out = Vec::new();
        fn go(d: &Derivation, out: &mut Vec<RuleName>) {
            out.push(d.rule);
            for p in &d.premises {
                go(p, out);
            }
        }
        go(self, &mut out);
        out
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(d: &Derivation, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
            writeln!(f, "{}{} {}", "  ".repeat(depth), d.rule, d.conclusion)?;
            for p in &d.premises {
                go(p, f, depth + 1)?;
            }
            Ok(())
        }
        go(self, f, 0)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SearchStats {
    pub nodes: u64,
    pub memo_hits: u64,
}

/// Result of a rejection or violation query.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub rejected: bool,
    pub derivation: Option<Derivation>,
    /// Failed leaf obligations recorded during an unsuccessful search, in
    /// the order they were encountered.
    pub failures: Vec<String>,
    pub stats: SearchStats,
}

impl Verdict {
    fn no(failures: Vec<String>, stats: SearchStats) -> Self {
        Verdict { rejected: false, derivation: None, failures, stats }
    }

    fn yes(d: Derivation, stats: SearchStats) -> Self {
        Verdict { rejected: true, derivation: Some(d), failures: Vec::new(), stats }
    }
}

fn canon_hist(h: &History) -> Vec<Trace> {
    h.iter().cloned().collect()
}

// ---------------------------------------------------------------------------
// Monitor-level rejection
// ---------------------------------------------------------------------------

struct RejSearch<'a> {
    det: &'a DetSpec,
    memo: HashMap<(Vec<Trace>, bool, Monitor), Option<Derivation>>,
    in_progress: HashSet<(Vec<Trace>, bool, Monitor)>,
    failures: Vec<String>,
    stats: SearchStats,
}

fn rej_judgement(hist: &History, flag: bool, m: &Monitor) -> Judgement {
    Judgement {
        relation: Relation::Rej,
        hist: hist.clone(),
        flag,
        term: Term::Mon(m.clone()),
    }
}

impl RejSearch<'_> {
    fn internal_heads(hist: &History) -> BTreeSet<TraceAction> {
        hist.iter()
            .filter_map(|t| t.first())
            .filter(|a| a.is_internal())
            .cloned()
            .collect()
    }

    fn search(&mut self, hist: &History, flag: bool, m: &Monitor) -> Option<Derivation> {
        self.stats.nodes += 1;
        let key = (canon_hist(hist), flag, m.canon());
        if let Some(hit) = self.memo.get(&key) {
            self.stats.memo_hits += 1;
            return hit.clone();
        }
        if !self.in_progress.insert(key.clone()) {
            // Revisiting an open judgement: a least relation has no cyclic
            // derivations, so this path fails.
            return None;
        }
        let result = self.dispatch(hist, flag, m);
        self.in_progress.remove(&key);
        self.memo.insert(key, result.clone());
        result
    }

    fn dispatch(&mut self, hist: &History, flag: bool, m: &Monitor) -> Option<Derivation> {
        let conclusion = rej_judgement(hist, flag, m);
        match m {
            Monitor::No => {
                if !hist.is_empty() {
                    Some(Derivation::leaf(RuleName::No, conclusion))
                } else {
                    self.failures.push(format!("fail {conclusion}"));
                    None
                }
            }
            Monitor::End | Monitor::Var(_) => {
                self.failures.push(format!("fail {conclusion}"));
                None
            }
            Monitor::Act(a, inner) => {
                let ext = TraceAction::external(a);
                let cont = sub(hist, &ext);
                if let Some(p) = self.search(&cont, flag && self.det.det(&ext), inner) {
                    return Some(Derivation {
                        rule: RuleName::Act,
                        conclusion,
                        premises: vec![p],
                    });
                }
                for iact in Self::internal_heads(hist) {
                    let cont = sub(hist, &iact);
                    let flag2 = flag && self.det.det(&iact);
                    if let Some(p) = self.search(&cont, flag2, m) {
                        return Some(Derivation {
                            rule: RuleName::ActPre,
                            conclusion,
                            premises: vec![p],
                        });
                    }
                }
                None
            }
            Monitor::ParAnd(l, r) => {
                if let Some(p) = self.search(hist, flag, l) {
                    return Some(Derivation {
                        rule: RuleName::ParAL,
                        conclusion,
                        premises: vec![p],
                    });
                }
                if let Some(p) = self.search(hist, flag, r) {
                    return Some(Derivation {
                        rule: RuleName::ParAR,
                        conclusion,
                        premises: vec![p],
                    });
                }
                None
            }
            Monitor::ParOr(l, r) => {
                if !flag {
                    self.failures.push(format!("parO blocked (flag false) at {conclusion}"));
                    return None;
                }
                let lp = self.search(hist, true, l)?;
                let rp = self.search(hist, true, r)?;
                Some(Derivation {
                    rule: RuleName::ParO,
                    conclusion,
                    premises: vec![lp, rp],
                })
            }
            Monitor::Rec(..) => {
                let unfolded = m.unfold().expect("rec unfolds");
                let p = self.search(hist, flag, &unfolded)?;
                Some(Derivation { rule: RuleName::Rec, conclusion, premises: vec![p] })
            }
        }
    }
}

/// Decides whether the monitor rejects the history (with the flag starting
/// true), returning a derivation witness on success.
pub fn reject(hist: &History, m: &Monitor, det: &DetSpec) -> Verdict {
    assert!(m.is_closed() && m.is_guarded(), "reject requires a closed, guarded monitor");
    let mut s = RejSearch {
        det,
        memo: HashMap::new(),
        in_progress: HashSet::new(),
        failures: Vec::new(),
        stats: SearchStats::default(),
    };
    match s.search(hist, true, m) {
        Some(d) => Verdict::yes(d, s.stats),
        None => Verdict::no(s.failures, s.stats),
    }
}

// ---------------------------------------------------------------------------
// Formula-level violation
// ---------------------------------------------------------------------------

struct ViolSearch<'a> {
    det: &'a DetSpec,
    separation: bool,
    memo: HashMap<(Vec<Trace>, bool, Formula), Option<Derivation>>,
    in_progress: HashSet<(Vec<Trace>, bool, Formula)>,
    failures: Vec<String>,
    stats: SearchStats,
}

impl ViolSearch<'_> {
    fn relation(&self) -> Relation {
        if self.separation {
            Relation::SViol
        } else {
            Relation::Viol
        }
    }

    fn judgement(&self, hist: &History, flag: bool, f: &Formula) -> Judgement {
        Judgement {
            relation: self.relation(),
            hist: hist.clone(),
            flag,
            term: Term::Form(f.clone()),
        }
    }

    fn rule(&self, base: RuleName) -> RuleName {
        if !self.separation {
            return base;
        }
        match base {
            RuleName::VF => RuleName::SvF,
            RuleName::VMax => RuleName::SvMax,
            RuleName::VAndL => RuleName::SvAndL,
            RuleName::VAndR => RuleName::SvAndR,
            RuleName::VUm => RuleName::SvUm,
            RuleName::VUmPre => RuleName::SvUmPre,
            other => other,
        }
    }

    fn search(&mut self, hist: &History, flag: bool, f: &Formula) -> Option<Derivation> {
        self.stats.nodes += 1;
        let key = (canon_hist(hist), flag, f.canon());
        if let Some(hit) = self.memo.get(&key) {
            self.stats.memo_hits += 1;
            return hit.clone();
        }
        if !self.in_progress.insert(key.clone()) {
            return None;
        }
        let result = self.dispatch(hist, flag, f);
        self.in_progress.remove(&key);
        self.memo.insert(key, result.clone());
        result
    }

    fn dispatch(&mut self, hist: &History, flag: bool, f: &Formula) -> Option<Derivation> {
        let conclusion = self.judgement(hist, flag, f);
        match f {
            Formula::Ff => {
                if !hist.is_empty() {
                    Some(Derivation::leaf(self.rule(RuleName::VF), conclusion))
                } else {
                    self.failures.push(format!("fail {conclusion}"));
                    None
                }
            }
            Formula::Tt | Formula::Var(_) => {
                self.failures.push(format!("fail {conclusion}"));
                None
            }
            Formula::Box_(a, inner) => {
                let ext = TraceAction::external(a);
                let cont = sub(hist, &ext);
                if let Some(p) = self.search(&cont, flag && self.det.det(&ext), inner) {
                    return Some(Derivation {
                        rule: self.rule(RuleName::VUm),
                        conclusion,
                        premises: vec![p],
                    });
                }
                for iact in RejSearch::internal_heads(hist) {
                    let cont = sub(hist, &iact);
                    let flag2 = flag && self.det.det(&iact);
                    if let Some(p) = self.search(&cont, flag2, f) {
                        return Some(Derivation {
                            rule: self.rule(RuleName::VUmPre),
                            conclusion,
                            premises: vec![p],
                        });
                    }
                }
                None
            }
            Formula::And(l, r) => {
                if let Some(p) = self.search(hist, flag, l) {
                    return Some(Derivation {
                        rule: self.rule(RuleName::VAndL),
                        conclusion,
                        premises: vec![p],
                    });
                }
                if let Some(p) = self.search(hist, flag, r) {
                    return Some(Derivation {
                        rule: self.rule(RuleName::VAndR),
                        conclusion,
                        premises: vec![p],
                    });
                }
                None
            }
            Formula::Or(l, r) => {
                if !flag {
                    self.failures
                        .push(format!("vOr blocked (flag false) at {conclusion}"));
                    return None;
                }
                if self.separation {
                    // svOr: split the history into two disjoint parts.
                    let traces: Vec<Trace> = hist.iter().cloned().collect();
                    let n = traces.len();
                    assert!(n <= 20, "separation split over more than 2^20 subsets");
                    for mask in 0..(1u32 << n) {
                        let mut left = History::new();
                        let mut right = History::new();
                        for (i, t) in traces.iter().enumerate() {
                            if mask & (1 << i) != 0 {
                                left.insert(t.clone());
                            } else {
                                right.insert(t.clone());
                            }
                        }
                        if let Some(lp) = self.search(&left, true, l) {
                            if let Some(rp) = self.search(&right, true, r) {
                                return Some(Derivation {
                                    rule: RuleName::SvOr,
                                    conclusion,
                                    premises: vec![lp, rp],
                                });
                            }
                        }
                    }
                    None
                } else {
                    let lp = self.search(hist, true, l)?;
                    let rp = self.search(hist, true, r)?;
                    Some(Derivation {
                        rule: RuleName::VOr,
                        conclusion,
                        premises: vec![lp, rp],
                    })
                }
            }
            Formula::Max(..) => {
                let unfolded = f.unfold().expect("max unfolds");
                let p = self.search(hist, flag, &unfolded)?;
                Some(Derivation {
                    rule: self.rule(RuleName::VMax),
                    conclusion,
                    premises: vec![p],
                })
            }
            Formula::Diamond(..) | Formula::Min(..) => {
                unreachable!("grammar checked before search")
            }
        }
    }
}

/// Decides the violation relation `(hist, true) |> f` for a formula in the
/// sHML-or grammar.
pub fn violates(hist: &History, f: &Formula, det: &DetSpec) -> Result<Verdict, FragmentError> {
    if !in_shml_or(f) {
        return Err(FragmentError::OutOfGrammar("diamond or least fixed point".into()));
    }
    let mut s = ViolSearch {
        det,
        separation: false,
        memo: HashMap::new(),
        in_progress: HashSet::new(),
        failures: Vec::new(),
        stats: SearchStats::default(),
    };
    Ok(match s.search(hist, true, f) {
        Some(d) => Verdict::yes(d, s.stats),
        None => Verdict::no(s.failures, s.stats),
    })
}

/// Decides the separation violation relation, in which disjunctions must be
/// justified by disjoint history splits. Defined on the normal-form
/// fragment only.
pub fn sep_violates(hist: &History, f: &Formula, det: &DetSpec) -> Result<Verdict, FragmentError> {
    if !in_shml_nf(f) {
        return Err(FragmentError::NotInShmlNf);
    }
    let mut s = ViolSearch {
        det,
        separation: true,
        memo: HashMap::new(),
        in_progress: HashSet::new(),
        failures: Vec::new(),
        stats: SearchStats::default(),
    };
    Ok(match s.search(hist, true, f) {
        Some(d) => Verdict::yes(d, s.stats),
        None => Verdict::no(s.failures, s.stats),
    })
}

// ---------------------------------------------------------------------------
// Derivation validation
// ---------------------------------------------------------------------------

/// Checks that every node of a derivation instantiates its rule with the
/// side conditions satisfied. Accepts any valid derivation, not only the
/// one the search engine returns first.
pub fn validate_derivation(d: &Derivation, det: &DetSpec) -> Result<(), String> {
    let c = &d.conclusion;
    let fail = |msg: &str| Err(format!("{msg} at `{} {}`", d.rule, c));
    let one_premise = || -> Result<&Derivation, String> {
        if d.premises.len() == 1 {
            Ok(&d.premises[0])
        } else {
            Err(format!("rule {} expects one premise", d.rule))
        }
    };
    let premise_matches = |p: &Judgement, hist: &History, flag: bool, term: &Term| -> bool {
        p.relation == c.relation
            && &p.hist == hist
            && p.flag == flag
            && match (&p.term, term) {
                (Term::Mon(a), Term::Mon(b)) => a.alpha_eq(b),
                (Term::Form(a), Term::Form(b)) => a.alpha_eq(b),
                _ => false,
            }
    };

    match (d.rule, &c.term) {
        (RuleName::No, Term::Mon(Monitor::No)) | (RuleName::VF, Term::Form(Formula::Ff))
        | (RuleName::SvF, Term::Form(Formula::Ff)) => {
            if c.hist.is_empty() {
                return fail("axiom requires a non-empty history");
            }
            if !d.premises.is_empty() {
                return fail("axiom has no premises");
            }
        }
        (RuleName::Act, Term::Mon(Monitor::Act(a, inner))) => {
            let p = one_premise()?;
            let ext = TraceAction::external(a);
            let want = sub(&c.hist, &ext);
            if !premise_matches(&p.conclusion, &want, c.flag && det.det(&ext), &Term::Mon((**inner).clone())) {
                return fail("act premise mismatch");
            }
        }
        (RuleName::ActPre, Term::Mon(Monitor::Act(..))) => {
            let p = one_premise()?;
            let found = RejSearch::internal_heads(&c.hist).into_iter().any(|iact| {
                premise_matches(
                    &p.conclusion,
                    &sub(&c.hist, &iact),
                    c.flag && det.det(&iact),
                    &c.term,
                )
            });
            if !found {
                return fail("actPre premise matches no internal head");
            }
        }
        (RuleName::ParAL, Term::Mon(Monitor::ParAnd(l, _))) => {
            let p = one_premise()?;
            if !premise_matches(&p.conclusion, &c.hist, c.flag, &Term::Mon((**l).clone())) {
                return fail("parAL premise mismatch");
            }
        }
        (RuleName::ParAR, Term::Mon(Monitor::ParAnd(_, r))) => {
            let p = one_premise()?;
            if !premise_matches(&p.conclusion, &c.hist, c.flag, &Term::Mon((**r).clone())) {
                return fail("parAR premise mismatch");
            }
        }
        (RuleName::ParO, Term::Mon(Monitor::ParOr(l, r))) => {
            if !c.flag {
                return fail("parO requires a true flag");
            }
            if d.premises.len() != 2 {
                return fail("parO expects two premises");
            }
            if !premise_matches(&d.premises[0].conclusion, &c.hist, true, &Term::Mon((**l).clone()))
                || !premise_matches(&d.premises[1].conclusion, &c.hist, true, &Term::Mon((**r).clone()))
            {
                return fail("parO premise mismatch");
            }
        }
        (RuleName::Rec, Term::Mon(m @ Monitor::Rec(..))) => {
            let p = one_premise()?;
            let unfolded = m.unfold().expect("rec unfolds");
            if !premise_matches(&p.conclusion, &c.hist, c.flag, &Term::Mon(unfolded)) {
                return fail("rec premise is not the unfolding");
            }
        }
        (RuleName::VUm | RuleName::SvUm, Term::Form(Formula::Box_(a, inner))) => {
            let p = one_premise()?;
            let ext = TraceAction::external(a);
            if !premise_matches(
                &p.conclusion,
                &sub(&c.hist, &ext),
                c.flag && det.det(&ext),
                &Term::Form((**inner).clone()),
            ) {
                return fail("vUm premise mismatch");
            }
        }
        (RuleName::VUmPre | RuleName::SvUmPre, Term::Form(Formula::Box_(..))) => {
            let p = one_premise()?;
            let found = RejSearch::internal_heads(&c.hist).into_iter().any(|iact| {
                premise_matches(
                    &p.conclusion,
                    &sub(&c.hist, &iact),
                    c.flag && det.det(&iact),
                    &c.term,
                )
            });
            if !found {
                return fail("vUmPre premise matches no internal head");
            }
        }
        (RuleName::VAndL | RuleName::SvAndL, Term::Form(Formula::And(l, _))) => {
            let p = one_premise()?;
            if !premise_matches(&p.conclusion, &c.hist, c.flag, &Term::Form((**l).clone())) {
                return fail("vAndL premise mismatch");
            }
        }
        (RuleName::VAndR | RuleName::SvAndR, Term::Form(Formula::And(_, r))) => {
            let p = one_premise()?;
            if !premise_matches(&p.conclusion, &c.hist, c.flag, &Term::Form((**r).clone())) {
                return fail("vAndR premise mismatch");
            }
        }
        (RuleName::VOr, Term::Form(Formula::Or(l, r))) => {
            if !c.flag {
                return fail("vOr requires a true flag");
            }
            if d.premises.len() != 2 {
                return fail("vOr expects two premises");
            }
            if !premise_matches(&d.premises[0].conclusion, &c.hist, true, &Term::Form((**l).clone()))
                || !premise_matches(&d.premises[1].conclusion, &c.hist, true, &Term::Form((**r).clone()))
            {
                return fail("vOr premise mismatch");
            }
        }
        (RuleName::SvOr, Term::Form(Formula::Or(l, r))) => {
            if !c.flag {
                return fail("svOr requires a true flag");
            }
            if d.premises.len() != 2 {
                return fail("svOr expects two premises");
            }
            let h1 = &d.premises[0].conclusion.hist;
            let h2 = &d.premises[1].conclusion.hist;
            if !h1.is_disjoint(h2) || h1.union(h2).cloned().collect::<History>() != c.hist {
                return fail("svOr premises are not a disjoint split");
            }
            if !premise_matches(&d.premises[0].conclusion, h1, true, &Term::Form((**l).clone()))
                || !premise_matches(&d.premises[1].conclusion, h2, true, &Term::Form((**r).clone()))
            {
                return fail("svOr premise mismatch");
            }
        }
        (RuleName::VMax | RuleName::SvMax, Term::Form(fm @ Formula::Max(..))) => {
            let p = one_premise()?;
            let unfolded = fm.unfold().expect("max unfolds");
            if !premise_matches(&p.conclusion, &c.hist, c.flag, &Term::Form(unfolded)) {
                return fail("vMax premise is not the unfolding");
            }
        }
        _ => return fail("rule does not match the conclusion term"),
    }
    for p in &d.premises {
        validate_derivation(p, det)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history_of;
    use crate::syntax::{parse_formula, parse_monitor, Alphabet};

    fn mon(s: &str) -> Monitor {
        parse_monitor(s, &mut Alphabet::open()).unwrap()
    }

    fn fml(s: &str) -> Formula {
        parse_formula(s, &mut Alphabet::open()).unwrap()
    }

    #[test]
    fn sub_examples() {
        let h = history_of(&["r s a", "r s c", "a r s"]);
        let got = sub(&h, &TraceAction::external("r"));
        assert_eq!(got, history_of(&["s a", "s c"]));
        assert_eq!(sub(&History::new(), &TraceAction::external("x")), History::new());
        assert_eq!(sub(&history_of(&[""]), &TraceAction::external("x")), History::new());
    }

    #[test]
    fn start_examples() {
        let h = history_of(&["~ut r s a", "~uf r s c", "a r s"]);
        assert_eq!(start(&h, "r"), history_of(&["~ut r s a", "~uf r s c"]));
        assert_eq!(start(&History::new(), "a"), History::new());
        // Disjointness across distinct actions.
        let sa = start(&h, "a");
        let sr = start(&h, "r");
        assert!(sa.is_disjoint(&sr));
    }

    #[test]
    fn no_rejects_epsilon_history() {
        let det = DetSpec::none();
        let v = reject(&history_of(&[""]), &Monitor::No, &det);
        assert!(v.rejected);
        assert_eq!(v.derivation.unwrap().rule, RuleName::No);
        // But not the empty history.
        let v = reject(&History::new(), &Monitor::No, &det);
        assert!(!v.rejected);
    }

    #[test]
    fn m1_rejects_both_traces_not_one() {
        let m1 = mon("rec X.(r.s.X (*) (a.no (+) c.no))");
        let det = DetSpec::from_labels(["r", "s"]);
        let h2 = history_of(&["r s ~ut a", "r s ~uf c"]);
        let v = reject(&h2, &m1, &det);
        assert!(v.rejected);
        validate_derivation(v.derivation.as_ref().unwrap(), &det).unwrap();

        let h1 = history_of(&["r s ~ut a"]);
        let v = reject(&h1, &m1, &det);
        assert!(!v.rejected);
        assert!(
            v.failures.iter().any(|f| f.contains("rej({}, ") && f.contains("no)")),
            "search log must show the empty-history obligation on no: {:?}",
            v.failures
        );
    }

    #[test]
    fn remark_non_unique_derivations_both_validate() {
        // rej({rsa, rsc}, r.s.a.no (*) r.s.c.no) admits a left and a right
        // derivation; the engine returns the first found and the validator
        // accepts both.
        let det = DetSpec::from_labels(["r", "s"]);
        let m = mon("r.s.a.no (*) r.s.c.no");
        let h = history_of(&["r s a", "r s c"]);
        let v = reject(&h, &m, &det);
        assert!(v.rejected);
        let left = v.derivation.unwrap();
        assert_eq!(left.rule, RuleName::ParAL);
        validate_derivation(&left, &det).unwrap();

        // Build the symmetric derivation by hand and validate it.
        let inner = |labels: &[&str], hists: &[History]| -> Derivation {
            let mut d = Derivation::leaf(
                RuleName::No,
                rej_judgement(hists.last().unwrap(), true, &Monitor::No),
            );
            for (i, lbl) in labels.iter().enumerate().rev() {
                let m = labels[i..]
                    .iter()
                    .rev()
                    .fold(Monitor::No, |acc, l| Monitor::act(*l, acc));
                let _ = lbl;
                d = Derivation {
                    rule: RuleName::Act,
                    conclusion: rej_judgement(&hists[i], true, &m),
                    premises: vec![d],
                };
            }
            d
        };
        let hists = [
            history_of(&["r s a", "r s c"]),
            history_of(&["s a", "s c"]),
            history_of(&["a", "c"]),
            history_of(&[""]),
        ];
        let right = Derivation {
            rule: RuleName::ParAR,
            conclusion: rej_judgement(&hists[0], true, &m),
            premises: vec![inner(&["r", "s", "c"], &hists)],
        };
        validate_derivation(&right, &det).unwrap();
        assert_ne!(left, right);
    }

    #[test]
    fn violation_relation_examples() {
        let det = DetSpec::from_labels(["r", "s"]);
        let phi2 = fml("[r]([s]ff | [a]ff)");
        let v = violates(&history_of(&["r s", "r a"]), &phi2, &det).unwrap();
        assert!(v.rejected);
        validate_derivation(v.derivation.as_ref().unwrap(), &det).unwrap();

        // vF needs a non-empty history.
        let v = violates(&History::new(), &Formula::Ff, &det).unwrap();
        assert!(!v.rejected);

        // Out-of-grammar formulas are errors.
        assert!(violates(&History::new(), &fml("<a>tt"), &det).is_err());
    }

    #[test]
    fn sep_violates_splits_disjoint() {
        let det = DetSpec::AllDeterministic;
        let f = fml("[a]ff | [c]ff");
        let v = sep_violates(&history_of(&["a", "c"]), &f, &det).unwrap();
        assert!(v.rejected);
        let d = v.derivation.unwrap();
        assert_eq!(d.rule, RuleName::SvOr);
        assert!(d.premises[0].conclusion.hist.is_disjoint(&d.premises[1].conclusion.hist));
        validate_derivation(&d, &det).unwrap();

        let v = sep_violates(&History::new(), &Formula::Ff, &det).unwrap();
        assert!(!v.rejected);
    }

    #[test]
    fn flag_propagation_blocks_disjunction_after_nondet_prefix() {
        // m5 analysing {r ~i s, r ~i a}-style histories with det(r)=false:
        // the disjunction is blocked because the flag has already fallen.
        let det = DetSpec::none();
        let m5 = mon("r.(s.no (+) a.no)");
        let h = history_of(&["r s", "r a"]);
        let v = reject(&h, &m5, &det);
        assert!(!v.rejected);
        assert!(v.failures.iter().any(|f| f.contains("parO blocked")));
    }
}
