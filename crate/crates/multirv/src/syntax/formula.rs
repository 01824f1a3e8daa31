use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

/// Abstract syntax of recHML formulas. Modalities carry external action
/// labels only.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Tt,
    Ff,
    Var(String),
    Box_(String, Box<Formula>),
    Diamond(String, Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Max(String, Box<Formula>),
    Min(String, Box<Formula>),
}

static FRESH: AtomicU64 = AtomicU64::new(0);

/// Produces a globally fresh variable name derived from `base`.
pub fn fresh_var(base: &str) -> String {
    let stem = base.split('#').next().unwrap_or(base);
    format!("{}#{}", stem, FRESH.fetch_add(1, Ordering::Relaxed))
}

impl Formula {
    pub fn boxed(label: impl Into<String>, body: Formula) -> Formula {
        Formula::Box_(label.into(), Box::new(body))
    }

    pub fn diamond(label: impl Into<String>, body: Formula) -> Formula {
        Formula::Diamond(label.into(), Box::new(body))
    }

    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Formula {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn max(var: impl Into<String>, body: Formula) -> Formula {
        Formula::Max(var.into(), Box::new(body))
    }

    pub fn min(var: impl Into<String>, body: Formula) -> Formula {
        Formula::Min(var.into(), Box::new(body))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Formula::Tt | Formula::Ff => {}
            Formula::Var(x) => {
                if !bound.iter().any(|b| b == x) {
                    out.insert(x.clone());
                }
            }
            Formula::Box_(_, p) | Formula::Diamond(_, p) => p.collect_free(bound, out),
            Formula::And(l, r) | Formula::Or(l, r) => {
                l.collect_free(bound, out);
                r.collect_free(bound, out);
            }
            Formula::Max(x, p) | Formula::Min(x, p) => {
                bound.push(x.clone());
                p.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// A formula is guarded when every occurrence of a bound variable is
    /// separated from its binder by at least one modality.
    pub fn is_guarded(&self) -> bool {
        fn unguarded(f: &Formula) -> Option<BTreeSet<String>> {
            match f {
                Formula::Tt | Formula::Ff => Some(BTreeSet::new()),
                Formula::Var(x) => Some(BTreeSet::from([x.clone()])),
                Formula::Box_(_, p) | Formula::Diamond(_, p) => {
                    unguarded(p)?;
                    Some(BTreeSet::new())
                }
                Formula::And(l, r) | Formula::Or(l, r) => {
                    let mut s = unguarded(l)?;
                    s.extend(unguarded(r)?);
                    Some(s)
                }
                Formula::Max(x, p) | Formula::Min(x, p) => {
                    let mut s = unguarded(p)?;
                    if s.contains(x) {
                        return None;
                    }
                    s.remove(x);
                    Some(s)
                }
            }
        }
        unguarded(self).is_some()
    }

    /// All external action labels mentioned in modalities.
    pub fn labels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn go(f: &Formula, out: &mut BTreeSet<String>) {
            match f {
                Formula::Tt | Formula::Ff | Formula::Var(_) => {}
                Formula::Box_(a, p) | Formula::Diamond(a, p) => {
                    out.insert(a.clone());
                    go(p, out);
                }
                Formula::And(l, r) | Formula::Or(l, r) => {
                    go(l, out);
                    go(r, out);
                }
                Formula::Max(_, p) | Formula::Min(_, p) => go(p, out),
            }
        }
        go(self, &mut out);
        out
    }

    /// Renames binders to canonical names determined by binding depth, so
    /// that two formulas are alpha-equivalent exactly when their canonical
    /// forms are structurally equal.
    pub fn canon(&self) -> Formula {
        fn go(f: &Formula, env: &mut Vec<(String, String)>) -> Formula {
            match f {
                Formula::Tt => Formula::Tt,
                Formula::Ff => Formula::Ff,
                Formula::Var(x) => {
                    let name = env
                        .iter()
                        .rev()
                        .find(|(orig, _)| orig == x)
                        .map(|(_, c)| c.clone())
                        .unwrap_or_else(|| x.clone());
                    Formula::Var(name)
                }
                Formula::Box_(a, p) => Formula::Box_(a.clone(), Box::new(go(p, env))),
                Formula::Diamond(a, p) => Formula::Diamond(a.clone(), Box::new(go(p, env))),
                Formula::And(l, r) => Formula::and(go(l, env), go(r, env)),
                Formula::Or(l, r) => Formula::or(go(l, env), go(r, env)),
                Formula::Max(x, p) | Formula::Min(x, p) => {
                    let canon = format!("%{}", env.len());
                    env.push((x.clone(), canon.clone()));
                    let body = go(p, env);
                    env.pop();
                    match f {
                        Formula::Max(..) => Formula::Max(canon, Box::new(body)),
                        _ => Formula::Min(canon, Box::new(body)),
                    }
                }
            }
        }
        go(self, &mut Vec::new())
    }

    pub fn alpha_eq(&self, other: &Formula) -> bool {
        self.canon() == other.canon()
    }

    /// Capture-avoiding substitution of all free occurrences of `var` by
    /// `repl`; binders are alpha-renamed with a global fresh-name counter
    /// when they would capture a free variable of `repl`.
    pub fn substitute(&self, var: &str, repl: &Formula) -> Formula {
        match self {
            Formula::Tt | Formula::Ff => self.clone(),
            Formula::Var(x) => {
                if x == var {
                    repl.clone()
                } else {
                    self.clone()
                }
            }
            Formula::Box_(a, p) => Formula::Box_(a.clone(), Box::new(p.substitute(var, repl))),
            Formula::Diamond(a, p) => {
                Formula::Diamond(a.clone(), Box::new(p.substitute(var, repl)))
            }
            Formula::And(l, r) => {
                Formula::and(l.substitute(var, repl), r.substitute(var, repl))
            }
            Formula::Or(l, r) => Formula::or(l.substitute(var, repl), r.substitute(var, repl)),
            Formula::Max(x, p) | Formula::Min(x, p) => {
                let rebuild = |x: String, p: Formula| match self {
                    Formula::Max(..) => Formula::Max(x, Box::new(p)),
                    _ => Formula::Min(x, Box::new(p)),
                };
                if x == var {
                    self.clone()
                } else if repl.free_vars().contains(x) {
                    let fresh = fresh_var(x);
                    let renamed = p.substitute(x, &Formula::Var(fresh.clone()));
                    rebuild(fresh, renamed.substitute(var, repl))
                } else {
                    rebuild(x.clone(), p.substitute(var, repl))
                }
            }
        }
    }

    /// One-step unfolding of a fixed point: `max X.p` becomes
    /// `p[max X.p / X]`.
    pub fn unfold(&self) -> Result<Formula, String> {
        match self {
            Formula::Max(x, p) | Formula::Min(x, p) => Ok(p.substitute(x, self)),
            other => Err(format!("cannot unfold non-fixed-point formula `{other}`")),
        }
    }
}

fn is_plain_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_')
        && label.chars().next().unwrap().is_ascii_alphabetic()
}

pub(crate) fn fmt_modal_label(f: &mut fmt::Formatter<'_>, open: char, label: &str, close: char) -> fmt::Result {
    // Bracketed labels tolerate actor-style action text like `i?req`.
    let _ = is_plain_label(label);
    write!(f, "{open}{label}{close}")
}

// Precedence levels for printing: 0 = or, 1 = and, 2 = unary.
fn fmt_prec(fm: &Formula, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
    let level = match fm {
        Formula::Or(..) => 0,
        Formula::And(..) => 1,
        _ => 2,
    };
    let parens = level < prec;
    if parens {
        write!(f, "(")?;
    }
    match fm {
        Formula::Tt => write!(f, "tt")?,
        Formula::Ff => write!(f, "ff")?,
        Formula::Var(x) => write!(f, "{x}")?,
        Formula::Box_(a, p) => {
            fmt_modal_label(f, '[', a, ']')?;
            fmt_prec(p, f, 2)?;
        }
        Formula::Diamond(a, p) => {
            fmt_modal_label(f, '<', a, '>')?;
            fmt_prec(p, f, 2)?;
        }
        Formula::And(l, r) => {
            fmt_prec(l, f, 1)?;
            write!(f, " & ")?;
            fmt_prec(r, f, 2)?;
        }
        Formula::Or(l, r) => {
            fmt_prec(l, f, 0)?;
            write!(f, " | ")?;
            fmt_prec(r, f, 1)?;
        }
        Formula::Max(x, p) => {
            write!(f, "max {x}.(")?;
            fmt_prec(p, f, 0)?;
            write!(f, ")")?;
        }
        Formula::Min(x, p) => {
            write!(f, "min {x}.(")?;
            fmt_prec(p, f, 0)?;
            write!(f, ")")?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_prec(self, f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ff() -> Formula {
        Formula::Ff
    }

    #[test]
    fn substitute_trivial_cases() {
        // X not free in tt
        assert_eq!(Formula::Tt.substitute("X", &ff()), Formula::Tt);
        assert_eq!(Formula::Var("X".into()).substitute("X", &ff()), ff());
    }

    #[test]
    fn substitute_avoids_capture() {
        // (max Y.X)[Y/X] must not capture the free Y of the replacement.
        let f = Formula::max("Y", Formula::Var("X".into()));
        let got = f.substitute("X", &Formula::Var("Y".into()));
        assert_eq!(got.free_vars(), BTreeSet::from(["Y".to_string()]));
        match got {
            Formula::Max(b, body) => {
                assert_ne!(b, "Y");
                assert_eq!(*body, Formula::Var("Y".into()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unfold_simple_loop() {
        let f = Formula::max("X", Formula::boxed("a", Formula::Var("X".into())));
        let unfolded = f.unfold().unwrap();
        assert!(unfolded.alpha_eq(&Formula::boxed("a", f.clone())));
        assert!(unfolded.is_closed() && unfolded.is_guarded());
    }

    #[test]
    fn guardedness_detects_unguarded_recursion() {
        let bad = Formula::max("X", Formula::and(Formula::Var("X".into()), ff()));
        assert!(!bad.is_guarded());
        let nested = Formula::max(
            "X",
            Formula::max("Y", Formula::and(Formula::Var("X".into()), Formula::boxed("a", Formula::Var("Y".into())))),
        );
        assert!(!nested.is_guarded());
    }

    #[test]
    fn alpha_equivalence_via_canon() {
        let a = Formula::max("X", Formula::boxed("a", Formula::Var("X".into())));
        let b = Formula::max("Z", Formula::boxed("a", Formula::Var("Z".into())));
        assert!(a.alpha_eq(&b));
        let shadow = Formula::max(
            "X",
            Formula::max("X", Formula::boxed("a", Formula::Var("X".into()))),
        );
        let explicit = Formula::max(
            "A",
            Formula::max("B", Formula::boxed("a", Formula::Var("B".into()))),
        );
        assert!(shadow.alpha_eq(&explicit));
    }
}
