//! Formula-to-monitor synthesis, its structural inverse, and normalization
//! of arbitrary monitors into the deterministic-prefix fragment.

use crate::fragments::{in_shml_det, FragmentError};
use crate::syntax::{DetSpec, Formula, Monitor};

/// Synthesises the representative monitor for a formula in the extended
/// monitorable fragment: falsity maps to the rejection verdict, truth to the
/// inconclusive monitor, modalities to prefixes, conjunction and disjunction
/// to the parallel compositions, and greatest fixed points to recursion.
pub fn synth(f: &Formula, det: &DetSpec) -> Result<Monitor, FragmentError> {
    if !in_shml_det(f, det) {
        return Err(FragmentError::NotInShmlDet);
    }
    Ok(synth_unchecked(f))
}

pub fn synth_unchecked(f: &Formula) -> Monitor {
    match f {
        Formula::Ff => Monitor::No,
        Formula::Tt => Monitor::End,
        Formula::Var(x) => Monitor::Var(x.clone()),
        Formula::Box_(a, p) => Monitor::Act(a.clone(), Box::new(synth_unchecked(p))),
        Formula::And(l, r) => Monitor::par_and(synth_unchecked(l), synth_unchecked(r)),
        Formula::Or(l, r) => Monitor::par_or(synth_unchecked(l), synth_unchecked(r)),
        Formula::Max(x, p) => Monitor::Rec(x.clone(), Box::new(synth_unchecked(p))),
        Formula::Diamond(..) | Formula::Min(..) => {
            unreachable!("fragment membership checked by synth")
        }
    }
}

/// Maps every monitor to its characteristic formula by the inverse
/// structural translation.
pub fn rev_synth(m: &Monitor) -> Formula {
    match m {
        Monitor::No => Formula::Ff,
        Monitor::End => Formula::Tt,
        Monitor::Var(x) => Formula::Var(x.clone()),
        Monitor::Act(a, p) => Formula::Box_(a.clone(), Box::new(rev_synth(p))),
        Monitor::ParAnd(l, r) => Formula::and(rev_synth(l), rev_synth(r)),
        Monitor::ParOr(l, r) => Formula::or(rev_synth(l), rev_synth(r)),
        Monitor::Rec(x, p) => Formula::Max(x.clone(), Box::new(rev_synth(p))),
    }
}

/// Normalizes an arbitrary closed, guarded monitor into the
/// deterministic-prefix fragment, preserving the set of rejected histories.
///
/// The transform descends with a flag recording whether every prefix
/// traversed so far is deterministic. A parallel disjunction under a false
/// flag can never fire its rejection and collapses to `end`. Recursion
/// binders are recorded together with the flag they were entered under;
/// re-encountering a variable under a different flag re-expands its
/// recursion in place, which terminates because the flag only ever falls
/// from true to false.
pub fn normalize(m: &Monitor, det: &DetSpec) -> Monitor {
    let mut env: Vec<(String, (Monitor, bool))> = Vec::new();
    transform(m, true, det, &mut env)
}

fn transform(
    m: &Monitor,
    flag: bool,
    det: &DetSpec,
    env: &mut Vec<(String, (Monitor, bool))>,
) -> Monitor {
    match m {
        Monitor::No => Monitor::No,
        Monitor::End => Monitor::End,
        Monitor::Var(x) => {
            match env.iter().rev().find(|(name, _)| name == x).cloned() {
                // Unbound variables stay; unreachable for closed monitors.
                None => Monitor::Var(x.clone()),
                Some((_, (_, entered))) if entered == flag => Monitor::Var(x.clone()),
                Some((_, (rec, _))) => transform(&rec, flag, det, env),
            }
        }
        Monitor::Rec(x, p) => {
            env.push((x.clone(), (m.clone(), flag)));
            let body = transform(p, flag, det, env);
            env.pop();
            Monitor::Rec(x.clone(), Box::new(body))
        }
        Monitor::Act(a, p) => {
            let inner = transform(p, flag && det.det_external(a), det, env);
            Monitor::Act(a.clone(), Box::new(inner))
        }
        Monitor::ParAnd(l, r) => {
            Monitor::par_and(transform(l, flag, det, env), transform(r, flag, det, env))
        }
        Monitor::ParOr(l, r) => {
            if flag {
                Monitor::par_or(transform(l, true, det, env), transform(r, true, det, env))
            } else {
                Monitor::End
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragments::in_mon_det;
    use crate::syntax::{parse_formula, parse_monitor, Alphabet};

    fn fml(s: &str) -> Formula {
        parse_formula(s, &mut Alphabet::open()).unwrap()
    }

    fn mon(s: &str) -> Monitor {
        parse_monitor(s, &mut Alphabet::open()).unwrap()
    }

    #[test]
    fn synth_phi2_gives_m5() {
        let det = DetSpec::from_labels(["r", "s"]);
        let got = synth(&fml("[r]([s]ff | [a]ff)"), &det).unwrap();
        assert_eq!(got, mon("r.(s.no (+) a.no)"));
    }

    #[test]
    fn synth_ff_gives_no() {
        assert_eq!(synth(&Formula::Ff, &DetSpec::none()).unwrap(), Monitor::No);
    }

    #[test]
    fn synth_phi10_gives_m2() {
        let det = DetSpec::from_labels(["r", "s", "a"]);
        let phi10 = fml("max X.([r][s]X & [a]X & ([a]ff | [c]ff))");
        let got = synth(&phi10, &det).unwrap();
        assert_eq!(got, mon("rec X.(r.s.X (*) a.X (*) (a.no (+) c.no))"));
    }

    #[test]
    fn synth_rejects_outside_fragment() {
        let phi2 = fml("[r]([s]ff | [a]ff)");
        assert!(synth(&phi2, &DetSpec::none()).is_err());
    }

    #[test]
    fn rev_synth_inverts_synth() {
        let det = DetSpec::from_labels(["r", "s", "a", "c"]);
        for s in [
            "ff",
            "tt",
            "[r]([s]ff | [a]ff)",
            "max X.([r][s]X & ([c]ff | [a]ff))",
            "max X.([a]ff | ([c]ff & [r][s]X))",
        ] {
            let f = fml(s);
            let back = rev_synth(&synth(&f, &det).unwrap());
            assert!(back.alpha_eq(&f), "roundtrip of `{s}`");
        }
    }

    #[test]
    fn rev_synth_m1_gives_phi4() {
        let m1 = mon("rec X.(r.s.X (*) (a.no (+) c.no))");
        let phi4 = fml("max X.([r][s]X & ([a]ff | [c]ff))");
        assert!(rev_synth(&m1).alpha_eq(&phi4));
        assert_eq!(rev_synth(&Monitor::No), Formula::Ff);
    }

    #[test]
    fn normalize_m1_with_nondet_r() {
        let m1 = mon("rec X.(r.s.X (*) (a.no (+) c.no))");
        let det = DetSpec::from_labels(["s"]);
        let got = normalize(&m1, &det);
        let m6 = mon("rec X.(r.s.(rec Y.(r.s.Y (*) end)) (*) (a.no (+) c.no))");
        assert!(got.alpha_eq(&m6), "got `{got}`");
        assert!(in_mon_det(&got, &det));
    }

    #[test]
    fn normalize_is_identity_on_deterministic_fragment() {
        let det = DetSpec::from_labels(["r", "s", "a", "c"]);
        for s in [
            "no",
            "end",
            "r.(s.no (+) a.no)",
            "rec X.(r.s.X (*) (a.no (+) c.no))",
        ] {
            let m = mon(s);
            assert!(normalize(&m, &det).alpha_eq(&m), "`{s}` unchanged");
        }
    }

    #[test]
    fn normalize_no_is_no() {
        assert_eq!(normalize(&Monitor::No, &DetSpec::none()), Monitor::No);
    }
}
