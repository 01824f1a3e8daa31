use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

/// Abstract syntax of monitors. `ParAnd` is the parallel conjunction `(*)`
/// and `ParOr` the parallel disjunction `(+)`; prefixes carry external
/// actions only.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Monitor {
    No,
    End,
    Var(String),
    Act(String, Box<Monitor>),
    Rec(String, Box<Monitor>),
    ParAnd(Box<Monitor>, Box<Monitor>),
    ParOr(Box<Monitor>, Box<Monitor>),
}

static FRESH: AtomicU64 = AtomicU64::new(0);

pub fn fresh_mon_var(base: &str) -> String {
    let stem = base.split('#').next().unwrap_or(base);
    format!("{}#{}", stem, FRESH.fetch_add(1, Ordering::Relaxed))
}

impl Monitor {
    pub fn act(label: impl Into<String>, m: Monitor) -> Monitor {
        Monitor::Act(label.into(), Box::new(m))
    }

    pub fn rec(var: impl Into<String>, m: Monitor) -> Monitor {
        Monitor::Rec(var.into(), Box::new(m))
    }

    pub fn par_and(l: Monitor, r: Monitor) -> Monitor {
        Monitor::ParAnd(Box::new(l), Box::new(r))
    }

    pub fn par_or(l: Monitor, r: Monitor) -> Monitor {
        Monitor::ParOr(Box::new(l), Box::new(r))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn go(m: &Monitor, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
            match m {
                Monitor::No | Monitor::End => {}
                Monitor::Var(x) => {
                    if !bound.iter().any(|b| b == x) {
                        out.insert(x.clone());
                    }
                }
                Monitor::Act(_, p) => go(p, bound, out),
                Monitor::Rec(x, p) => {
                    bound.push(x.clone());
                    go(p, bound, out);
                    bound.pop();
                }
                Monitor::ParAnd(l, r) | Monitor::ParOr(l, r) => {
                    go(l, bound, out);
                    go(r, bound, out);
                }
            }
        }
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Guarded: every recursion body passes through an action prefix before
    /// reusing its variable.
    pub fn is_guarded(&self) -> bool {
        fn unguarded(m: &Monitor) -> Option<BTreeSet<String>> {
            match m {
                Monitor::No | Monitor::End => Some(BTreeSet::new()),
                Monitor::Var(x) => Some(BTreeSet::from([x.clone()])),
                Monitor::Act(_, p) => {
                    unguarded(p)?;
                    Some(BTreeSet::new())
                }
                Monitor::ParAnd(l, r) | Monitor::ParOr(l, r) => {
                    let mut s = unguarded(l)?;
                    s.extend(unguarded(r)?);
                    Some(s)
                }
                Monitor::Rec(x, p) => {
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

    pub fn labels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn go(m: &Monitor, out: &mut BTreeSet<String>) {
            match m {
                Monitor::No | Monitor::End | Monitor::Var(_) => {}
                Monitor::Act(a, p) => {
                    out.insert(a.clone());
                    go(p, out);
                }
                Monitor::Rec(_, p) => go(p, out),
                Monitor::ParAnd(l, r) | Monitor::ParOr(l, r) => {
                    go(l, out);
                    go(r, out);
                }
            }
        }
        go(self, &mut out);
        out
    }

    pub fn canon(&self) -> Monitor {
        fn go(m: &Monitor, env: &mut Vec<(String, String)>) -> Monitor {
            match m {
                Monitor::No => Monitor::No,
                Monitor::End => Monitor::End,
                Monitor::Var(x) => {
                    let name = env
                        .iter()
                        .rev()
                        .find(|(orig, _)| orig == x)
                        .map(|(_, c)| c.clone())
                        .unwrap_or_else(|| x.clone());
                    Monitor::Var(name)
                }
                Monitor::Act(a, p) => Monitor::Act(a.clone(), Box::new(go(p, env))),
                Monitor::Rec(x, p) => {
                    let canon = format!("%{}", env.len());
                    env.push((x.clone(), canon.clone()));
                    let body = go(p, env);
                    env.pop();
                    Monitor::Rec(canon, Box::new(body))
                }
                Monitor::ParAnd(l, r) => Monitor::par_and(go(l, env), go(r, env)),
                Monitor::ParOr(l, r) => Monitor::par_or(go(l, env), go(r, env)),
            }
        }
        go(self, &mut Vec::new())
    }

    pub fn alpha_eq(&self, other: &Monitor) -> bool {
        self.canon() == other.canon()
    }

    pub fn substitute(&self, var: &str, repl: &Monitor) -> Monitor {
        match self {
            Monitor::No | Monitor::End => self.clone(),
            Monitor::Var(x) => {
                if x == var {
                    repl.clone()
                } else {
                    self.clone()
                }
            }
            Monitor::Act(a, p) => Monitor::Act(a.clone(), Box::new(p.substitute(var, repl))),
            Monitor::Rec(x, p) => {
                if x == var {
                    self.clone()
                } else if repl.free_vars().contains(x) {
                    let fresh = fresh_mon_var(x);
                    let renamed = p.substitute(x, &Monitor::Var(fresh.clone()));
                    Monitor::Rec(fresh, Box::new(renamed.substitute(var, repl)))
                } else {
                    Monitor::Rec(x.clone(), Box::new(p.substitute(var, repl)))
                }
            }
            Monitor::ParAnd(l, r) => {
                Monitor::par_and(l.substitute(var, repl), r.substitute(var, repl))
            }
            Monitor::ParOr(l, r) => {
                Monitor::par_or(l.substitute(var, repl), r.substitute(var, repl))
            }
        }
    }

    /// One-step unfolding: `rec X.m` becomes `m[rec X.m / X]`.
    pub fn unfold(&self) -> Result<Monitor, String> {
        match self {
            Monitor::Rec(x, p) => Ok(p.substitute(x, self)),
            other => Err(format!("cannot unfold non-recursive monitor `{other}`")),
        }
    }
}

fn is_plain_label(label: &str) -> bool {
    !label.is_empty()
        && label.chars().next().unwrap().is_ascii_alphabetic()
        && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

// Precedence for printing: 0 = (+), 1 = (*), 2 = prefix.
fn fmt_prec(m: &Monitor, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
    let level = match m {
        Monitor::ParOr(..) => 0,
        Monitor::ParAnd(..) => 1,
        _ => 2,
    };
    let parens = level < prec;
    if parens {
        write!(f, "(")?;
    }
    match m {
        Monitor::No => write!(f, "no")?,
        Monitor::End => write!(f, "end")?,
        Monitor::Var(x) => write!(f, "{x}")?,
        Monitor::Act(a, p) => {
            if is_plain_label(a) {
                write!(f, "{a}.")?;
            } else {
                // Bracketed prefixes carry structured labels such as `i?req`.
                write!(f, "[{a}].")?;
            }
            fmt_prec(p, f, 2)?;
        }
        Monitor::Rec(x, p) => {
            write!(f, "rec {x}.(")?;
            fmt_prec(p, f, 0)?;
            write!(f, ")")?;
        }
        Monitor::ParAnd(l, r) => {
            fmt_prec(l, f, 1)?;
            write!(f, " (*) ")?;
            fmt_prec(r, f, 2)?;
        }
        Monitor::ParOr(l, r) => {
            fmt_prec(l, f, 0)?;
            write!(f, " (+) ")?;
            fmt_prec(r, f, 1)?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_prec(self, f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unfold_prefix_loop() {
        let m = Monitor::rec("X", Monitor::act("a", Monitor::Var("X".into())));
        let got = m.unfold().unwrap();
        assert!(got.alpha_eq(&Monitor::act("a", m.clone())));
    }

    #[test]
    fn guardedness() {
        let ok = Monitor::rec("X", Monitor::act("a", Monitor::Var("X".into())));
        assert!(ok.is_guarded());
        let bad = Monitor::rec(
            "X",
            Monitor::par_and(Monitor::Var("X".into()), Monitor::No),
        );
        assert!(!bad.is_guarded());
    }
}
