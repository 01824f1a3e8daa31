//! Syntactic fragment membership and the history lower-bound calculator.

use std::collections::HashSet;
use std::fmt;
use std::ops::Add;

use crate::syntax::{DetSpec, Formula, Monitor};

/// An extended natural: a finite count or infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bound {
    Fin(u64),
    Inf,
}

impl Add for Bound {
    type Output = Bound;
    fn add(self, rhs: Bound) -> Bound {
        match (self, rhs) {
            (Bound::Fin(a), Bound::Fin(b)) => Bound::Fin(a + b),
            _ => Bound::Inf,
        }
    }
}

impl Bound {
    pub fn min(self, other: Bound) -> Bound {
        std::cmp::min(self, other)
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Fin(n) => write!(f, "{n}"),
            Bound::Inf => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum FragmentError {
    #[error("formula outside the sHML-or grammar: contains `{0}`")]
    OutOfGrammar(String),
    #[error("formula is not in the deterministic-prefix fragment for the given determinacy map")]
    NotInShmlDet,
    #[error("formula is not in the normal-form fragment")]
    NotInShmlNf,
}

/// Membership in the single-run-monitorable safety fragment:
/// `tt | ff | [a]phi | and | max | X`.
pub fn is_shml(f: &Formula) -> bool {
    match f {
        Formula::Tt | Formula::Ff | Formula::Var(_) => true,
        Formula::Box_(_, p) => is_shml(p),
        Formula::And(l, r) => is_shml(l) && is_shml(r),
        Formula::Max(_, p) => is_shml(p),
        Formula::Diamond(..) | Formula::Or(..) | Formula::Min(..) => false,
    }
}

/// The sHML-or grammar underlying the extended fragment: sHML plus
/// disjunction. Anything with a diamond or least fixed point is outside.
pub fn in_shml_or(f: &Formula) -> bool {
    match f {
        Formula::Tt | Formula::Ff | Formula::Var(_) => true,
        Formula::Box_(_, p) | Formula::Max(_, p) => in_shml_or(p),
        Formula::And(l, r) | Formula::Or(l, r) => in_shml_or(l) && in_shml_or(r),
        Formula::Diamond(..) | Formula::Min(..) => false,
    }
}

fn first_out_of_grammar(f: &Formula) -> Option<&'static str> {
    match f {
        Formula::Tt | Formula::Ff | Formula::Var(_) => None,
        Formula::Box_(_, p) | Formula::Max(_, p) => first_out_of_grammar(p),
        Formula::And(l, r) | Formula::Or(l, r) => {
            first_out_of_grammar(l).or_else(|| first_out_of_grammar(r))
        }
        Formula::Diamond(..) => Some("existential modality"),
        Formula::Min(..) => Some("least fixed point"),
    }
}

/// Coinductive membership in the extended monitorable fragment: disjunctions
/// must sit under deterministic universal-modality prefixes, up to greatest
/// fixed point unfolding. The greatest-fixed-point reading makes revisited
/// `(flag, formula)` pairs succeed.
pub fn in_shml_det(f: &Formula, det: &DetSpec) -> bool {
    if !f.is_closed() || !f.is_guarded() {
        return false;
    }
    fn go(f: &Formula, flag: bool, det: &DetSpec, visited: &mut HashSet<(bool, Formula)>) -> bool {
        if !visited.insert((flag, f.canon())) {
            return true;
        }
        match f {
            Formula::Tt | Formula::Ff | Formula::Var(_) => true,
            Formula::Box_(a, p) => go(p, flag && det.det_external(a), det, visited),
            Formula::And(l, r) => go(l, flag, det, visited) && go(r, flag, det, visited),
            Formula::Or(l, r) => {
                flag && go(l, true, det, visited) && go(r, true, det, visited)
            }
            Formula::Max(..) => {
                let unfolded = f.unfold().expect("max unfolds");
                go(&unfolded, flag, det, visited)
            }
            Formula::Diamond(..) | Formula::Min(..) => false,
        }
    }
    go(f, true, det, &mut HashSet::new())
}

/// Membership in the normal-form fragment: every disjunction flattens to a
/// union of universal modalities with pairwise-distinct actions.
pub fn in_shml_nf(f: &Formula) -> bool {
    fn disjuncts<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
        match f {
            Formula::Or(l, r) => {
                disjuncts(l, out);
                disjuncts(r, out);
            }
            other => out.push(other),
        }
    }
    match f {
        Formula::Tt | Formula::Ff | Formula::Var(_) => true,
        Formula::And(l, r) => in_shml_nf(l) && in_shml_nf(r),
        Formula::Max(_, p) => in_shml_nf(p),
        Formula::Box_(_, p) => in_shml_nf(p),
        Formula::Or(..) => {
            let mut parts = Vec::new();
            disjuncts(f, &mut parts);
            let mut actions = HashSet::new();
            for part in parts {
                match part {
                    Formula::Box_(a, p) => {
                        if !actions.insert(a.clone()) {
                            return false;
                        }
                        if !in_shml_nf(p) {
                            return false;
                        }
                    }
                    _ => return false,
                }
            }
            true
        }
        Formula::Diamond(..) | Formula::Min(..) => false,
    }
}

/// The history lower bound of a formula in the sHML-or grammar: any history
/// violating a normal-form formula has strictly more traces than this.
pub fn lb(f: &Formula) -> Result<Bound, FragmentError> {
    if let Some(what) = first_out_of_grammar(f) {
        return Err(FragmentError::OutOfGrammar(what.to_string()));
    }
    fn go(f: &Formula) -> Bound {
        match f {
            Formula::Ff => Bound::Fin(0),
            Formula::Tt | Formula::Var(_) => Bound::Inf,
            Formula::Box_(_, p) | Formula::Max(_, p) => go(p),
            Formula::And(l, r) => go(l).min(go(r)),
            Formula::Or(l, r) => go(l) + go(r) + Bound::Fin(1),
            Formula::Diamond(..) | Formula::Min(..) => unreachable!("checked above"),
        }
    }
    Ok(go(f))
}

/// Coinductive membership for monitors: all parallel disjunctions are
/// prefixed by deterministic external actions, up to recursion unfolding.
pub fn in_mon_det(m: &Monitor, det: &DetSpec) -> bool {
    if !m.is_closed() || !m.is_guarded() {
        return false;
    }
    fn go(m: &Monitor, flag: bool, det: &DetSpec, visited: &mut HashSet<(bool, Monitor)>) -> bool {
        if !visited.insert((flag, m.canon())) {
            return true;
        }
        match m {
            Monitor::No | Monitor::End | Monitor::Var(_) => true,
            Monitor::Act(a, p) => go(p, flag && det.det_external(a), det, visited),
            Monitor::ParAnd(l, r) => go(l, flag, det, visited) && go(r, flag, det, visited),
            Monitor::ParOr(l, r) => {
                flag && go(l, true, det, visited) && go(r, true, det, visited)
            }
            Monitor::Rec(..) => {
                let unfolded = m.unfold().expect("rec unfolds");
                go(&unfolded, flag, det, visited)
            }
        }
    }
    go(m, true, det, &mut HashSet::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_formula, parse_monitor, Alphabet};

    fn fml(s: &str) -> Formula {
        parse_formula(s, &mut Alphabet::open()).unwrap()
    }

    fn mon(s: &str) -> Monitor {
        parse_monitor(s, &mut Alphabet::open()).unwrap()
    }

    #[test]
    fn shml_membership() {
        assert!(is_shml(&fml("[r]ff & [a]ff & [c]ff")));
        assert!(!is_shml(&fml("[r]ff | [c]ff")));
        assert!(is_shml(&Formula::Tt));
    }

    #[test]
    fn shml_det_membership_phi2() {
        let phi2 = fml("[r]([s]ff | [a]ff)");
        assert!(in_shml_det(&phi2, &DetSpec::from_labels(["r", "s"])));
        assert!(!in_shml_det(&phi2, &DetSpec::none()));
        assert!(in_shml_det(&Formula::Ff, &DetSpec::none()));
    }

    #[test]
    fn shml_det_through_unfolding() {
        // phi4's disjunction is reached only after unfolding through [r][s].
        let phi4 = fml("max X.([r][s]X & ([c]ff | [a]ff))");
        assert!(in_shml_det(&phi4, &DetSpec::from_labels(["r", "s"])));
        assert!(!in_shml_det(&phi4, &DetSpec::from_labels(["s"])));
    }

    #[test]
    fn shml_implies_shml_det_under_any_det() {
        for s in ["tt", "ff", "[a]ff", "max X.[a]X", "[a]ff & max X.[b][c]X"] {
            let f = fml(s);
            assert!(is_shml(&f));
            assert!(in_shml_det(&f, &DetSpec::none()), "`{s}` with empty det");
            assert!(in_shml_det(&f, &DetSpec::AllDeterministic));
        }
    }

    #[test]
    fn shml_nf_membership() {
        assert!(!in_shml_nf(&fml("[r]ff | [r][s]ff")), "same action twice");
        assert!(in_shml_nf(&fml("[r]([s]ff | [a]ff)")));
        assert!(in_shml_nf(&fml("max X.([r][s]X & ([c]ff | [a]ff))")));
        assert!(in_shml_nf(&fml("max X.([a]ff | ([c]ff & [r][s]X))")));
        assert!(in_shml_nf(&Formula::Ff));
        assert!(!in_shml_nf(&fml("[a]ff | tt")), "non-modal disjunct");
    }

    #[test]
    fn lower_bounds() {
        assert_eq!(lb(&fml("[r]([s]ff | [a]ff)")).unwrap(), Bound::Fin(1));
        assert_eq!(lb(&fml("max X.([r][s]X & ([c]ff | [a]ff))")).unwrap(), Bound::Fin(1));
        assert_eq!(lb(&fml("max X.([a]ff | ([c]ff & [r][s]X))")).unwrap(), Bound::Fin(1));
        assert_eq!(lb(&Formula::Ff).unwrap(), Bound::Fin(0));
        assert_eq!(lb(&fml("[r]([s]ff | [a]ff) | [a]ff")).unwrap(), Bound::Fin(2));
        assert_eq!(lb(&Formula::Tt).unwrap(), Bound::Inf);
        assert!(lb(&fml("<a>tt")).is_err());
    }

    #[test]
    fn mon_det_membership() {
        let m5 = mon("r.(s.no (+) a.no)");
        assert!(in_mon_det(&m5, &DetSpec::from_labels(["r"])));
        assert!(!in_mon_det(&m5, &DetSpec::none()));
        assert!(in_mon_det(&Monitor::End, &DetSpec::none()));
    }
}
