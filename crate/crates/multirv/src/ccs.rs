//! CCS processes (prefix, choice, recursion) as a concrete ILTS backend.

use std::collections::BTreeMap;
use std::fmt;

use crate::semantics::{Explored, Ilts, SemanticsError};
use crate::syntax::{Action, DetSpec, TraceAction};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CcsProcess {
    Nil,
    Prefix(Action, Box<CcsProcess>),
    Sum(Box<CcsProcess>, Box<CcsProcess>),
    Rec(String, Box<CcsProcess>),
    Var(String),
}

impl CcsProcess {
    pub fn prefix(act: Action, p: CcsProcess) -> CcsProcess {
        CcsProcess::Prefix(act, Box::new(p))
    }

    pub fn sum(l: CcsProcess, r: CcsProcess) -> CcsProcess {
        CcsProcess::Sum(Box::new(l), Box::new(r))
    }

    pub fn rec(x: impl Into<String>, p: CcsProcess) -> CcsProcess {
        CcsProcess::Rec(x.into(), Box::new(p))
    }

    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        fn go(p: &CcsProcess, bound: &mut Vec<String>, out: &mut Vec<String>) {
            match p {
                CcsProcess::Nil => {}
                CcsProcess::Var(x) => {
                    if !bound.iter().any(|b| b == x) && !out.contains(x) {
                        out.push(x.clone());
                    }
                }
                CcsProcess::Prefix(_, q) => go(q, bound, out),
                CcsProcess::Sum(l, r) => {
                    go(l, bound, out);
                    go(r, bound, out);
                }
                CcsProcess::Rec(x, q) => {
                    bound.push(x.clone());
                    go(q, bound, out);
                    bound.pop();
                }
            }
        }
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Every recursion body prefixes before reusing its variable.
    pub fn is_guarded(&self) -> bool {
        fn unguarded(p: &CcsProcess) -> Option<Vec<String>> {
            match p {
                CcsProcess::Nil => Some(Vec::new()),
                CcsProcess::Var(x) => Some(vec![x.clone()]),
                CcsProcess::Prefix(_, q) => {
                    unguarded(q)?;
                    Some(Vec::new())
                }
                CcsProcess::Sum(l, r) => {
                    let mut s = unguarded(l)?;
                    s.extend(unguarded(r)?);
                    Some(s)
                }
                CcsProcess::Rec(x, q) => {
                    let s = unguarded(q)?;
                    if s.contains(x) {
                        return None;
                    }
                    Some(s.into_iter().filter(|v| v != x).collect())
                }
            }
        }
        unguarded(self).is_some()
    }

    pub fn substitute(&self, var: &str, repl: &CcsProcess) -> CcsProcess {
        match self {
            CcsProcess::Nil => CcsProcess::Nil,
            CcsProcess::Var(x) => {
                if x == var {
                    repl.clone()
                } else {
                    self.clone()
                }
            }
            CcsProcess::Prefix(a, q) => {
                CcsProcess::Prefix(a.clone(), Box::new(q.substitute(var, repl)))
            }
            CcsProcess::Sum(l, r) => {
                CcsProcess::sum(l.substitute(var, repl), r.substitute(var, repl))
            }
            CcsProcess::Rec(x, q) => {
                if x == var {
                    self.clone()
                } else if repl.free_vars().contains(x) {
                    let fresh = crate::syntax::fresh_var(x);
                    let renamed = q.substitute(x, &CcsProcess::Var(fresh.clone()));
                    CcsProcess::Rec(fresh, Box::new(renamed.substitute(var, repl)))
                } else {
                    CcsProcess::Rec(x.clone(), Box::new(q.substitute(var, repl)))
                }
            }
        }
    }

    /// Canonical renaming of recursion binders by binding depth.
    pub fn canon(&self) -> CcsProcess {
        fn go(p: &CcsProcess, env: &mut Vec<(String, String)>) -> CcsProcess {
            match p {
                CcsProcess::Nil => CcsProcess::Nil,
                CcsProcess::Var(x) => {
                    let name = env
                        .iter()
                        .rev()
                        .find(|(o, _)| o == x)
                        .map(|(_, c)| c.clone())
                        .unwrap_or_else(|| x.clone());
                    CcsProcess::Var(name)
                }
                CcsProcess::Prefix(a, q) => CcsProcess::Prefix(a.clone(), Box::new(go(q, env))),
                CcsProcess::Sum(l, r) => CcsProcess::sum(go(l, env), go(r, env)),
                CcsProcess::Rec(x, q) => {
                    let canon = format!("%{}", env.len());
                    env.push((x.clone(), canon.clone()));
                    let body = go(q, env);
                    env.pop();
                    CcsProcess::Rec(canon, Box::new(body))
                }
            }
        }
        go(self, &mut Vec::new())
    }
}

/// One-step successors per the transition rules: prefixes fire their action,
/// recursion unfolds via a silent step, and choice selects either side.
pub fn ccs_step(p: &CcsProcess) -> Vec<(Action, CcsProcess)> {
    match p {
        CcsProcess::Nil | CcsProcess::Var(_) => Vec::new(),
        CcsProcess::Prefix(a, q) => vec![(a.clone(), (**q).clone())],
        CcsProcess::Rec(x, q) => vec![(Action::Tau, q.substitute(x, p))],
        CcsProcess::Sum(l, r) => {
            let mut out = ccs_step(l);
            out.extend(ccs_step(r));
            out
        }
    }
}

/// State equivalence used by [`CcsIlts`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcsEquiv {
    /// Alpha-equivalence of terms (the default).
    Alpha,
    /// Trace equivalence up to the given length bound. A heuristic, coarser
    /// stand-in for behavioural equivalence; the bound is part of the
    /// configuration.
    BoundedTraces(usize),
}

/// The CCS ILTS: syntactic stepping plus a configurable equivalence and a
/// declared set of deterministic labels.
pub struct CcsIlts {
    pub det: DetSpec,
    pub equiv: CcsEquiv,
}

impl CcsIlts {
    pub fn new(det: DetSpec) -> Self {
        CcsIlts { det, equiv: CcsEquiv::Alpha }
    }

    pub fn with_bounded_trace_equiv(det: DetSpec, bound: usize) -> Self {
        CcsIlts { det, equiv: CcsEquiv::BoundedTraces(bound) }
    }

    fn bounded_traces_key(&self, p: &CcsProcess, bound: usize) -> String {
        let alpha = CcsIlts { det: self.det.clone(), equiv: CcsEquiv::Alpha };
        // The auxiliary exploration never recurses into this branch.
        match Explored::new(&alpha, p, crate::semantics::DEFAULT_STATE_BOUND) {
            Ok(ex) => {
                let ts = ex.traces(0, bound);
                let mut s = String::new();
                for t in &ts {
                    s.push_str(&crate::syntax::trace_to_string(t));
                    s.push(';');
                }
                s
            }
            Err(_) => format!("unexplored:{p}"),
        }
    }
}

impl Ilts for CcsIlts {
    type State = CcsProcess;
    type Key = String;

    fn canon_key(&self, s: &Self::State) -> Self::Key {
        match self.equiv {
            CcsEquiv::Alpha => s.canon().to_string(),
            CcsEquiv::BoundedTraces(bound) => self.bounded_traces_key(s, bound),
        }
    }

    fn step(&self, s: &Self::State) -> Vec<(Action, Self::State)> {
        ccs_step(s)
    }

    fn det(&self, a: &TraceAction) -> bool {
        self.det.det(a)
    }

    fn describe(&self, s: &Self::State) -> String {
        s.to_string()
    }
}

/// Explores and validates a CCS term as an ILTS: the determinacy axiom must
/// hold for every declared-deterministic label and silent steps must be
/// confluent.
pub fn ccs_ilts<'a>(
    ilts: &'a CcsIlts,
    initial: &CcsProcess,
    bound: usize,
) -> Result<Explored<'a, CcsIlts>, SemanticsError> {
    let ex = Explored::new(ilts, initial, bound)?;
    ex.validate_determinacy()?;
    ex.validate_silent_confluence()?;
    Ok(ex)
}

// Printing: prefix binds tighter than `+`; recursion bodies are always
// parenthesised.
fn fmt_prec(p: &CcsProcess, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
    let level = match p {
        CcsProcess::Sum(..) => 0,
        _ => 1,
    };
    let parens = level < prec;
    if parens {
        write!(f, "(")?;
    }
    match p {
        CcsProcess::Nil => write!(f, "nil")?,
        CcsProcess::Var(x) => write!(f, "{x}")?,
        CcsProcess::Prefix(a, q) => {
            write!(f, "{a}.")?;
            fmt_prec(q, f, 1)?;
        }
        CcsProcess::Sum(l, r) => {
            fmt_prec(l, f, 0)?;
            write!(f, " + ")?;
            fmt_prec(r, f, 1)?;
        }
        CcsProcess::Rec(x, q) => {
            write!(f, "rec {x}.(")?;
            fmt_prec(q, f, 0)?;
            write!(f, ")")?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for CcsProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_prec(self, f, 0)
    }
}

/// Parses a CCS term: `nil`, `a.P`, `~i.P`, `tau.P`, `P + Q`,
/// `rec X.(P)`, `X`.
pub fn parse_ccs(text: &str) -> Result<CcsProcess, crate::syntax::ParseError> {
    let mut lx = CcsParser::new(text);
    let p = lx.sum()?;
    lx.finish()?;
    if let Some(x) = p.free_vars().first() {
        return Err(lx.err(format!("unbound variable `{x}`")));
    }
    if !p.is_guarded() {
        return Err(lx.err("unguarded recursion"));
    }
    Ok(p)
}

struct CcsParser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> CcsParser<'a> {
    fn new(src: &'a str) -> Self {
        CcsParser { src, pos: 0 }
    }

    fn err(&self, msg: impl fmt::Display) -> crate::syntax::ParseError {
        let consumed = &self.src[..self.pos];
        crate::syntax::ParseError {
            line: consumed.matches('\n').count() + 1,
            col: consumed.len() - consumed.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, crate::syntax::ParseError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
            .count();
        if len == 0 || !rest.chars().next().unwrap().is_ascii_alphabetic() {
            return Err(self.err("expected identifier"));
        }
        self.pos += len;
        Ok(rest[..len].to_string())
    }

    fn sum(&mut self) -> Result<CcsProcess, crate::syntax::ParseError> {
        let mut p = self.prefix()?;
        while self.eat('+') {
            let r = self.prefix()?;
            p = CcsProcess::sum(p, r);
        }
        Ok(p)
    }

    fn prefix(&mut self) -> Result<CcsProcess, crate::syntax::ParseError> {
        match self.peek() {
            Some('(') => {
                self.eat('(');
                let p = self.sum()?;
                if !self.eat(')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(p)
            }
            Some('~') => {
                self.eat('~');
                let label = self.ident()?;
                if !self.eat('.') {
                    return Err(self.err("expected `.` after internal action"));
                }
                Ok(CcsProcess::prefix(Action::internal(label), self.prefix()?))
            }
            _ => {
                let id = self.ident()?;
                match id.as_str() {
                    "nil" => Ok(CcsProcess::Nil),
                    "rec" => {
                        let x = self.ident()?;
                        if !self.eat('.') {
                            return Err(self.err("expected `.` after rec binder"));
                        }
                        Ok(CcsProcess::Rec(x, Box::new(self.prefix()?)))
                    }
                    _ => {
                        if self.eat('.') {
                            let act = if id == "tau" {
                                Action::Tau
                            } else {
                                Action::external(id)
                            };
                            Ok(CcsProcess::Prefix(act, Box::new(self.prefix()?)))
                        } else {
                            Ok(CcsProcess::Var(id))
                        }
                    }
                }
            }
        }
    }

    fn finish(&mut self) -> Result<(), crate::syntax::ParseError> {
        self.skip_ws();
        if self.pos < self.src.len() {
            Err(self.err("unexpected trailing input"))
        } else {
            Ok(())
        }
    }
}

/// A parsed system specification file: named CCS terms plus a `det`
/// declaration. Lines: `system <name> = <term>` and `det = {a, s}`.
#[derive(Debug, Default)]
pub struct CcsSpecFile {
    pub systems: BTreeMap<String, CcsProcess>,
    pub det_labels: Vec<String>,
}

pub fn parse_ccs_file(text: &str) -> Result<CcsSpecFile, crate::syntax::ParseError> {
    let mut out = CcsSpecFile::default();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let mk_err = |msg: String| crate::syntax::ParseError { line: ln + 1, col: 1, msg };
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("system ") {
            let (name, term) = rest
                .split_once('=')
                .ok_or_else(|| mk_err("expected `system <name> = <term>`".into()))?;
            let p = parse_ccs(term.trim()).map_err(|e| mk_err(e.msg))?;
            out.systems.insert(name.trim().to_string(), p);
        } else if let Some(rest) = line.strip_prefix("det") {
            let rest = rest.trim_start().strip_prefix('=').unwrap_or(rest).trim();
            let inner = rest
                .strip_prefix('{')
                .and_then(|r| r.strip_suffix('}'))
                .ok_or_else(|| mk_err("expected `det = {a, b}`".into()))?;
            for label in inner.split(',') {
                let label = label.trim();
                if !label.is_empty() {
                    out.det_labels.push(label.to_string());
                }
            }
        } else {
            return Err(mk_err(format!("unrecognised line `{line}`")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::DetSpec;

    #[test]
    fn prefix_steps_to_continuation() {
        let p = parse_ccs("a.nil").unwrap();
        let succ = ccs_step(&p);
        assert_eq!(succ, vec![(Action::external("a"), CcsProcess::Nil)]);
    }

    #[test]
    fn nil_is_stuck() {
        assert!(ccs_step(&CcsProcess::Nil).is_empty());
    }

    #[test]
    fn rec_unfolds_via_tau() {
        let p2 = parse_ccs("rec X.(r.s.X + (~ut.a.X + ~uf.c.nil))").unwrap();
        let succ = ccs_step(&p2);
        assert_eq!(succ.len(), 1);
        let (act, q) = &succ[0];
        assert!(act.is_tau());
        let expect =
            parse_ccs("r.s.(rec X.(r.s.X + (~ut.a.X + ~uf.c.nil))) + (~ut.a.(rec X.(r.s.X + (~ut.a.X + ~uf.c.nil))) + ~uf.c.nil)")
                .unwrap();
        assert_eq!(q.canon(), expect.canon());
    }

    #[test]
    fn ccs_ilts_validation() {
        // p2 with det {r, s} passes.
        let p2 = parse_ccs("rec X.(r.s.X + (~ut.a.X + ~uf.c.nil))").unwrap();
        let ilts = CcsIlts::new(DetSpec::from_labels(["r", "s"]));
        assert!(ccs_ilts(&ilts, &p2, 1000).is_ok());

        // p3 with det {r} fails: two non-equivalent r-successors.
        let p3 = parse_ccs("r.(s.nil + a.nil) + r.s.nil").unwrap();
        let ilts = CcsIlts::new(DetSpec::from_labels(["r"]));
        assert!(matches!(
            ccs_ilts(&ilts, &p3, 1000),
            Err(SemanticsError::DeterminacyViolation { .. })
        ));

        // nil with no declarations is trivially valid.
        let ilts = CcsIlts::new(DetSpec::none());
        assert!(ccs_ilts(&ilts, &CcsProcess::Nil, 10).is_ok());
    }

    #[test]
    fn p5_needs_coarser_equivalence() {
        let p5 = parse_ccs("r.(s.nil + a.nil) + r.(s.nil + a.nil + a.nil)").unwrap();
        let strict = CcsIlts::new(DetSpec::from_labels(["r"]));
        assert!(ccs_ilts(&strict, &p5, 1000).is_err());
        let coarse = CcsIlts::with_bounded_trace_equiv(DetSpec::from_labels(["r"]), 3);
        assert!(ccs_ilts(&coarse, &p5, 1000).is_ok());
    }

    #[test]
    fn explicit_tau_race_fails_confluence() {
        let p = parse_ccs("tau.a.nil + tau.b.nil").unwrap();
        let ilts = CcsIlts::new(DetSpec::none());
        assert!(matches!(
            ccs_ilts(&ilts, &p, 1000),
            Err(SemanticsError::ConfluenceViolation { .. })
        ));
    }

    #[test]
    fn parse_and_print_roundtrip() {
        for src in [
            "nil",
            "a.nil",
            "~i.a.nil",
            "tau.nil",
            "a.nil + b.nil",
            "rec X.(a.X + b.nil)",
            "rec X.(r.s.X + (~ut.a.X + ~uf.c.nil))",
        ] {
            let p = parse_ccs(src).unwrap();
            let q = parse_ccs(&p.to_string()).unwrap();
            assert_eq!(p, q, "roundtrip of `{src}`");
        }
    }

    #[test]
    fn parse_system_file() {
        let file = "# systems\nsystem p1 = rec X.(r.s.X + (a.X + c.nil))\ndet = {r, s}\n";
        let spec = parse_ccs_file(file).unwrap();
        assert!(spec.systems.contains_key("p1"));
        assert_eq!(spec.det_labels, vec!["r", "s"]);
    }
}
