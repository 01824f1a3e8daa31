use std::fmt;

use super::action::{Alphabet, TraceAction};
use super::formula::Formula;
use super::monitor::Monitor;
use crate::History;

/// A parse failure with a byte-level position converted to line/column.
#[derive(Debug, Clone, thiserror::Error)]
#[error("parse error at {line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

pub(crate) struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0 }
    }

    pub fn error(&self, msg: impl fmt::Display) -> ParseError {
        let consumed = &self.src[..self.pos];
        let line = consumed.matches('\n').count() + 1;
        let col = consumed.len() - consumed.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
        ParseError { line, col, msg: msg.to_string() }
    }

    pub fn skip_ws(&mut self) {
        loop {
            let rest = &self.src[self.pos..];
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            // `#` starts a comment running to end of line.
            if trimmed.starts_with('#') {
                match trimmed.find('\n') {
                    Some(i) => self.pos += i,
                    None => self.pos = self.src.len(),
                }
            } else {
                break;
            }
        }
    }

    pub fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    pub fn bump(&mut self) -> Option<char> {
        let c = self.src[self.pos..].chars().next()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    pub fn eat(&mut self, expected: char) -> bool {
        if self.peek() == Some(expected) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, expected: char) -> Result<(), ParseError> {
        if self.eat(expected) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{expected}`")))
        }
    }

    /// Consumes `kw` if the next token is exactly that identifier.
    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        if rest.starts_with(kw) {
            let after = rest[kw.len()..].chars().next();
            if !matches!(after, Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                self.pos += kw.len();
                return true;
            }
        }
        false
    }

    pub fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .char_indices()
            .take_while(|(i, c)| {
                if *i == 0 {
                    c.is_ascii_alphabetic() || *c == '_'
                } else {
                    c.is_ascii_alphanumeric() || *c == '_'
                }
            })
            .count();
        if len == 0 {
            return Err(self.error("expected identifier"));
        }
        let id = rest[..len].to_string();
        self.pos += len;
        Ok(id)
    }

    /// Raw text up to (not including) the given terminator, trimmed.
    pub fn until(&mut self, term: char) -> Result<String, ParseError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        match rest.find(term) {
            Some(i) => {
                let text = rest[..i].trim().to_string();
                self.pos += i;
                if text.is_empty() {
                    return Err(self.error("empty action label"));
                }
                Ok(text)
            }
            None => Err(self.error(format!("expected `{term}`"))),
        }
    }

    pub fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.src.len()
    }
}

/// Parses a recHML formula. Precedence: modalities and fixed points bind
/// tighter than `&`, which binds tighter than `|`; fixed-point scope extends
/// maximally to the right.
pub fn parse_formula(text: &str, alphabet: &mut Alphabet) -> Result<Formula, ParseError> {
    let mut lx = Lexer::new(text);
    let f = formula_or(&mut lx, alphabet)?;
    if !lx.at_end() {
        return Err(lx.error("unexpected trailing input"));
    }
    check_formula(&f, &lx)?;
    Ok(f)
}

fn check_formula(f: &Formula, lx: &Lexer) -> Result<(), ParseError> {
    if let Some(x) = f.free_vars().into_iter().next() {
        return Err(lx.error(format!("unbound variable `{x}`")));
    }
    if !f.is_guarded() {
        return Err(lx.error("unguarded recursion"));
    }
    Ok(())
}

fn formula_or(lx: &mut Lexer, alpha: &mut Alphabet) -> Result<Formula, ParseError> {
    let mut f = formula_and(lx, alpha)?;
    while lx.eat('|') {
        let r = formula_and(lx, alpha)?;
        f = Formula::or(f, r);
    }
    Ok(f)
}

fn formula_and(lx: &mut Lexer, alpha: &mut Alphabet) -> Result<Formula, ParseError> {
    let mut f = formula_unary(lx, alpha)?;
    while lx.eat('&') {
        let r = formula_unary(lx, alpha)?;
        f = Formula::and(f, r);
    }
    Ok(f)
}

fn modal_label(lx: &mut Lexer, alpha: &mut Alphabet, term: char) -> Result<String, ParseError> {
    let label = lx.until(term)?;
    lx.expect(term)?;
    if label.starts_with('~') {
        return Err(lx.error(format!("modality on internal action `{label}`")));
    }
    alpha.check_external(&label).map_err(|e| lx.error(e))?;
    Ok(label)
}

fn formula_unary(lx: &mut Lexer, alpha: &mut Alphabet) -> Result<Formula, ParseError> {
    match lx.peek() {
        Some('[') => {
            lx.bump();
            let label = modal_label(lx, alpha, ']')?;
            Ok(Formula::Box_(label, Box::new(formula_unary(lx, alpha)?)))
        }
        Some('<') => {
            lx.bump();
            let label = modal_label(lx, alpha, '>')?;
            Ok(Formula::Diamond(label, Box::new(formula_unary(lx, alpha)?)))
        }
        Some('(') => {
            lx.bump();
            let f = formula_or(lx, alpha)?;
            lx.expect(')')?;
            Ok(f)
        }
        _ => {
            if lx.eat_keyword("tt") {
                Ok(Formula::Tt)
            } else if lx.eat_keyword("ff") {
                Ok(Formula::Ff)
            } else if lx.eat_keyword("max") {
                let x = lx.ident()?;
                lx.expect('.')?;
                Ok(Formula::Max(x, Box::new(formula_or(lx, alpha)?)))
            } else if lx.eat_keyword("min") {
                let x = lx.ident()?;
                lx.expect('.')?;
                Ok(Formula::Min(x, Box::new(formula_or(lx, alpha)?)))
            } else {
                let id = lx.ident()?;
                Ok(Formula::Var(id))
            }
        }
    }
}

/// Parses a monitor. Grammar mirrors formulas: prefix and `rec` bind tighter
/// than `(*)`, which binds tighter than `(+)`; `rec` scope extends maximally
/// right. Prefix actions are plain identifiers or bracketed labels like
/// `[i?req]` for structured action text.
pub fn parse_monitor(text: &str, alphabet: &mut Alphabet) -> Result<Monitor, ParseError> {
    let mut lx = Lexer::new(text);
    let m = monitor_or(&mut lx, alphabet)?;
    if !lx.at_end() {
        return Err(lx.error("unexpected trailing input"));
    }
    if let Some(x) = m.free_vars().into_iter().next() {
        return Err(lx.error(format!("unbound variable `{x}`")));
    }
    if !m.is_guarded() {
        return Err(lx.error("unguarded recursion"));
    }
    Ok(m)
}

fn monitor_or(lx: &mut Lexer, alpha: &mut Alphabet) -> Result<Monitor, ParseError> {
    let mut m = monitor_and(lx, alpha)?;
    while eat_op(lx, '+') {
        let r = monitor_and(lx, alpha)?;
        m = Monitor::par_or(m, r);
    }
    Ok(m)
}

fn monitor_and(lx: &mut Lexer, alpha: &mut Alphabet) -> Result<Monitor, ParseError> {
    let mut m = monitor_prefix(lx, alpha)?;
    while eat_op(lx, '*') {
        let r = monitor_prefix(lx, alpha)?;
        m = Monitor::par_and(m, r);
    }
    Ok(m)
}

// The parallel operators are spelled `(*)` and `(+)`; a lone `(` opens a
// group, so only commit after seeing the operator character.
fn eat_op(lx: &mut Lexer, op: char) -> bool {
    lx.skip_ws();
    let rest = &lx.src[lx.pos..];
    let want = [b'(', op as u8, b')'];
    if rest.as_bytes().len() >= 3 && rest.as_bytes()[..3] == want {
        lx.pos += 3;
        true
    } else {
        false
    }
}

fn monitor_prefix(lx: &mut Lexer, alpha: &mut Alphabet) -> Result<Monitor, ParseError> {
    match lx.peek() {
        Some('[') => {
            lx.bump();
            let label = modal_label(lx, alpha, ']')?;
            lx.expect('.')?;
            Ok(Monitor::Act(label, Box::new(monitor_prefix(lx, alpha)?)))
        }
        Some('(') => {
            lx.bump();
            let m = monitor_or(lx, alpha)?;
            lx.expect(')')?;
            Ok(m)
        }
        Some('~') => Err(lx.error("monitor prefixes carry external actions only")),
        _ => {
            if lx.eat_keyword("no") {
                Ok(Monitor::No)
            } else if lx.eat_keyword("end") {
                Ok(Monitor::End)
            } else if lx.eat_keyword("rec") {
                let x = lx.ident()?;
                lx.expect('.')?;
                Ok(Monitor::Rec(x, Box::new(monitor_or(lx, alpha)?)))
            } else {
                let id = lx.ident()?;
                if lx.peek() == Some('.') {
                    lx.bump();
                    if id == "tau" {
                        return Err(lx.error("monitor prefixes carry external actions only"));
                    }
                    alpha.check_external(&id).map_err(|e| lx.error(e))?;
                    Ok(Monitor::Act(id, Box::new(monitor_prefix(lx, alpha)?)))
                } else {
                    Ok(Monitor::Var(id))
                }
            }
        }
    }
}

/// Parses one trace: whitespace-separated action tokens, `~`-prefixed tokens
/// naming internal actions. An empty (or all-whitespace) string is the empty
/// trace.
pub fn parse_trace(line: &str) -> Result<Vec<TraceAction>, ParseError> {
    let mut out = Vec::new();
    for (i, tok) in line.split_whitespace().enumerate() {
        out.push(TraceAction::parse_token(tok).map_err(|msg| ParseError {
            line: 1,
            col: i + 1,
            msg,
        })?);
    }
    Ok(out)
}

/// Parses a history file: one trace per line, an empty line denoting the
/// empty trace. Lines starting with `#` are comments.
pub fn parse_history(text: &str) -> Result<History, ParseError> {
    let mut hist = History::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim_start().starts_with('#') {
            continue;
        }
        let tr = parse_trace(line).map_err(|e| ParseError { line: ln + 1, ..e })?;
        hist.insert(tr);
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open() -> Alphabet {
        Alphabet::open()
    }

    #[test]
    fn parse_phi0_conjunction() {
        let f = parse_formula("[r]ff & [a]ff & [c]ff", &mut open()).unwrap();
        let expect = Formula::and(
            Formula::and(Formula::boxed("r", Formula::Ff), Formula::boxed("a", Formula::Ff)),
            Formula::boxed("c", Formula::Ff),
        );
        assert_eq!(f, expect);
    }

    #[test]
    fn parse_tt_atomic() {
        assert_eq!(parse_formula("tt", &mut open()).unwrap(), Formula::Tt);
    }

    #[test]
    fn parse_phi4_fixpoint_scope() {
        let f = parse_formula("max X.([r][s]X & ([c]ff | [a]ff))", &mut open()).unwrap();
        let body = Formula::and(
            Formula::boxed("r", Formula::boxed("s", Formula::Var("X".into()))),
            Formula::or(Formula::boxed("c", Formula::Ff), Formula::boxed("a", Formula::Ff)),
        );
        assert_eq!(f, Formula::max("X", body));
        // Maximal-right scope without explicit parentheses.
        let g = parse_formula("max X.[r][s]X & ([c]ff | [a]ff)", &mut open()).unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn parse_precedence_and_binds_tighter() {
        let f = parse_formula("[a]ff & [b]ff | ff", &mut open()).unwrap();
        match f {
            Formula::Or(l, r) => {
                assert!(matches!(*l, Formula::And(..)));
                assert_eq!(*r, Formula::Ff);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_formula_errors() {
        assert!(parse_formula("max X.X", &mut open()).is_err(), "unguarded");
        assert!(parse_formula("X", &mut open()).is_err(), "unbound");
        assert!(parse_formula("[~i]ff", &mut open()).is_err(), "internal modality");
        assert!(parse_formula("[a]", &mut open()).is_err(), "missing body");
        let mut strict = Alphabet::strict();
        strict.declare_external("a").unwrap();
        assert!(parse_formula("[b]ff", &mut strict).is_err(), "undeclared");
        assert!(parse_formula("[a]ff", &mut strict).is_ok());
    }

    #[test]
    fn parse_m1() {
        let m = parse_monitor("rec X.(r.s.X (*) (a.no (+) c.no))", &mut open()).unwrap();
        let expect = Monitor::rec(
            "X",
            Monitor::par_and(
                Monitor::act("r", Monitor::act("s", Monitor::Var("X".into()))),
                Monitor::par_or(Monitor::act("a", Monitor::No), Monitor::act("c", Monitor::No)),
            ),
        );
        assert_eq!(m, expect);
    }

    #[test]
    fn parse_end_and_m5() {
        assert_eq!(parse_monitor("end", &mut open()).unwrap(), Monitor::End);
        let m = parse_monitor("r.(s.no (+) a.no)", &mut open()).unwrap();
        let expect = Monitor::act(
            "r",
            Monitor::par_or(Monitor::act("s", Monitor::No), Monitor::act("a", Monitor::No)),
        );
        assert_eq!(m, expect);
    }

    #[test]
    fn parse_monitor_rejects_unguarded_rec() {
        assert!(parse_monitor("rec X.(X (*) no)", &mut open()).is_err());
    }

    #[test]
    fn parse_monitor_bracketed_actor_labels() {
        let m = parse_monitor("[i?req].[j!ans].end", &mut open()).unwrap();
        assert_eq!(
            m,
            Monitor::act("i?req", Monitor::act("j!ans", Monitor::End))
        );
    }

    #[test]
    fn trace_and_history_roundtrip() {
        let h = parse_history("r s ~ut a\nr s ~uf c\n").unwrap();
        assert_eq!(h.len(), 2);
        assert!(h.contains(&vec![
            TraceAction::external("r"),
            TraceAction::external("s"),
            TraceAction::internal("ut"),
            TraceAction::external("a"),
        ]));
    }
}
