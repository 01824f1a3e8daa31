//! An actor calculus with asynchronous mailboxes, pattern matching,
//! spawning and name scoping, instantiated as a second ILTS backend.

mod congruence;
mod parser;
mod step;

pub use congruence::congruence_normalize;
pub use parser::{parse_actor_file, ActorSpecFile};
pub use step::{actor_step, ActorIlts};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::syntax::{ActKind, Action, TraceAction};

/// Values are actor ids, uninterpreted atoms, and flat tuples of values.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Id(String),
    Atom(String),
    Tuple(Vec<Value>),
}

impl Value {
    pub fn free_names(&self) -> BTreeSet<String> {
        match self {
            Value::Id(i) => BTreeSet::from([i.clone()]),
            Value::Atom(_) => BTreeSet::new(),
            Value::Tuple(vs) => vs.iter().flat_map(Value::free_names).collect(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Id(i) => write!(f, "{i}"),
            Value::Atom(a) => write!(f, "{a}"),
            Value::Tuple(vs) => {
                write!(f, "{{")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// Receive patterns: variables bind, ids and atoms match themselves, tuples
/// match pointwise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pattern {
    Var(String),
    Id(String),
    Atom(String),
    Tuple(Vec<Pattern>),
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Var(x) => write!(f, "{x}"),
            Pattern::Id(i) => write!(f, "{i}"),
            Pattern::Atom(a) => write!(f, "{a}"),
            Pattern::Tuple(ps) => {
                write!(f, "{{")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

pub type Subst = BTreeMap<String, Value>;

/// Pattern matching: identical ids or atoms match with the empty
/// substitution, a variable matches anything, tuples match pointwise with a
/// consistent union of the bindings.
pub fn match_pattern(p: &Pattern, v: &Value) -> Option<Subst> {
    match (p, v) {
        (Pattern::Id(a), Value::Id(b)) if a == b => Some(Subst::new()),
        (Pattern::Atom(a), Value::Atom(b)) if a == b => Some(Subst::new()),
        (Pattern::Var(x), v) => Some(Subst::from([(x.clone(), v.clone())])),
        (Pattern::Tuple(ps), Value::Tuple(vs)) if ps.len() == vs.len() => {
            let mut acc = Subst::new();
            for (p, v) in ps.iter().zip(vs) {
                let s = match_pattern(p, v)?;
                for (x, val) in s {
                    match acc.get(&x) {
                        Some(existing) if *existing != val => return None,
                        _ => {
                            acc.insert(x, val);
                        }
                    }
                }
            }
            Some(acc)
        }
        _ => None,
    }
}

/// True when no message in the mailbox matches the pattern.
pub fn absent(p: &Pattern, mailbox: &[Value]) -> bool {
    mailbox.iter().all(|v| match_pattern(p, v).is_none())
}

/// Identifiers in expression positions: a value or a bound variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ident {
    Val(Value),
    Var(String),
}

impl Ident {
    fn resolve(&self) -> Option<&Value> {
        match self {
            Ident::Val(v) => Some(v),
            Ident::Var(_) => None,
        }
    }

    fn free_names(&self) -> BTreeSet<String> {
        match self {
            Ident::Val(v) => v.free_names(),
            Ident::Var(_) => BTreeSet::new(),
        }
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ident::Val(v) => write!(f, "{v}"),
            Ident::Var(x) => write!(f, "{x}"),
        }
    }
}

/// Actor expressions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    /// `w1 ! w2 . e`: queue a message, then continue.
    Send(Ident, Ident, Box<Expr>),
    /// `rcv { p -> e, ... }`: selectively read the mailbox.
    Receive(Vec<(Pattern, Expr)>),
    /// `spawn e' as x in e`: start `e'` under a fresh id bound to `x`.
    Spawn(Box<Expr>, String, Box<Expr>),
    /// `self x in e`: bind the actor's own id.
    Slf(String, Box<Expr>),
    Rec(String, Box<Expr>),
    TVar(String),
    Done,
}

impl Expr {
    pub fn send(target: Ident, payload: Ident, cont: Expr) -> Expr {
        Expr::Send(target, payload, Box::new(cont))
    }

    /// Substitutes a value for a free expression variable.
    pub fn subst_value(&self, var: &str, val: &Value) -> Expr {
        match self {
            Expr::Send(t, p, cont) => {
                let sub_ident = |w: &Ident| match w {
                    Ident::Var(x) if x == var => Ident::Val(val.clone()),
                    other => other.clone(),
                };
                Expr::Send(sub_ident(t), sub_ident(p), Box::new(cont.subst_value(var, val)))
            }
            Expr::Receive(branches) => Expr::Receive(
                branches
                    .iter()
                    .map(|(p, e)| {
                        if pattern_binds(p, var) {
                            (p.clone(), e.clone())
                        } else {
                            (p.clone(), e.subst_value(var, val))
                        }
                    })
                    .collect(),
            ),
            Expr::Spawn(body, x, cont) => {
                let body2 = body.subst_value(var, val);
                let cont2 = if x == var { (**cont).clone() } else { cont.subst_value(var, val) };
                Expr::Spawn(Box::new(body2), x.clone(), Box::new(cont2))
            }
            Expr::Slf(x, cont) => {
                let cont2 = if x == var { (**cont).clone() } else { cont.subst_value(var, val) };
                Expr::Slf(x.clone(), Box::new(cont2))
            }
            Expr::Rec(x, body) => Expr::Rec(x.clone(), Box::new(body.subst_value(var, val))),
            Expr::TVar(_) | Expr::Done => self.clone(),
        }
    }

    /// Substitutes an expression for a free term variable (recursion
    /// unfolding).
    pub fn subst_term(&self, var: &str, repl: &Expr) -> Expr {
        match self {
            Expr::Send(t, p, cont) => {
                Expr::Send(t.clone(), p.clone(), Box::new(cont.subst_term(var, repl)))
            }
            Expr::Receive(branches) => Expr::Receive(
                branches
                    .iter()
                    .map(|(p, e)| (p.clone(), e.subst_term(var, repl)))
                    .collect(),
            ),
            Expr::Spawn(body, x, cont) => Expr::Spawn(
                Box::new(body.subst_term(var, repl)),
                x.clone(),
                Box::new(cont.subst_term(var, repl)),
            ),
            Expr::Slf(x, cont) => Expr::Slf(x.clone(), Box::new(cont.subst_term(var, repl))),
            Expr::Rec(x, body) => {
                if x == var {
                    self.clone()
                } else {
                    Expr::Rec(x.clone(), Box::new(body.subst_term(var, repl)))
                }
            }
            Expr::TVar(x) => {
                if x == var {
                    repl.clone()
                } else {
                    self.clone()
                }
            }
            Expr::Done => Expr::Done,
        }
    }

    pub fn free_names(&self) -> BTreeSet<String> {
        match self {
            Expr::Send(t, p, cont) => {
                let mut s = t.free_names();
                s.extend(p.free_names());
                s.extend(cont.free_names());
                s
            }
            Expr::Receive(branches) => branches
                .iter()
                .flat_map(|(p, e)| {
                    let mut s = pattern_names(p);
                    s.extend(e.free_names());
                    s
                })
                .collect(),
            Expr::Spawn(body, _, cont) => {
                let mut s = body.free_names();
                s.extend(cont.free_names());
                s
            }
            Expr::Slf(_, cont) => cont.free_names(),
            Expr::Rec(_, body) => body.free_names(),
            Expr::TVar(_) | Expr::Done => BTreeSet::new(),
        }
    }
}

fn pattern_binds(p: &Pattern, var: &str) -> bool {
    match p {
        Pattern::Var(x) => x == var,
        Pattern::Tuple(ps) => ps.iter().any(|p| pattern_binds(p, var)),
        _ => false,
    }
}

fn pattern_names(p: &Pattern) -> BTreeSet<String> {
    match p {
        Pattern::Id(i) => BTreeSet::from([i.clone()]),
        Pattern::Tuple(ps) => ps.iter().flat_map(pattern_names).collect(),
        _ => BTreeSet::new(),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Send(t, p, cont) => write!(f, "{t}!{p}.{cont}"),
            Expr::Receive(branches) => {
                write!(f, "rcv {{")?;
                for (i, (p, e)) in branches.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{p} -> {e}")?;
                }
                write!(f, "}}")
            }
            Expr::Spawn(body, x, cont) => write!(f, "spawn ({body}) as {x} in {cont}"),
            Expr::Slf(x, cont) => write!(f, "self {x} in {cont}"),
            Expr::Rec(x, body) => write!(f, "rec {x}.({body})"),
            Expr::TVar(x) => write!(f, "{x}"),
            Expr::Done => write!(f, "done"),
        }
    }
}

/// Actor systems: running actors with mailboxes, messages in transit,
/// parallel composition, and locally scoped names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActorSystem {
    Nil,
    Actor { id: String, expr: Expr, mailbox: Vec<Value> },
    Ether { target: String, value: Value },
    Par(Box<ActorSystem>, Box<ActorSystem>),
    New(String, Box<ActorSystem>),
}

impl ActorSystem {
    pub fn actor(id: impl Into<String>, expr: Expr) -> ActorSystem {
        ActorSystem::Actor { id: id.into(), expr, mailbox: Vec::new() }
    }

    pub fn par(l: ActorSystem, r: ActorSystem) -> ActorSystem {
        ActorSystem::Par(Box::new(l), Box::new(r))
    }

    pub fn new_scope(id: impl Into<String>, body: ActorSystem) -> ActorSystem {
        ActorSystem::New(id.into(), Box::new(body))
    }

    /// Free ids of the running actors (mailbox owners), not of ethers.
    pub fn fid(&self) -> BTreeSet<String> {
        match self {
            ActorSystem::Nil | ActorSystem::Ether { .. } => BTreeSet::new(),
            ActorSystem::Actor { id, .. } => BTreeSet::from([id.clone()]),
            ActorSystem::Par(l, r) => {
                let mut s = l.fid();
                s.extend(r.fid());
                s
            }
            ActorSystem::New(i, body) => {
                let mut s = body.fid();
                s.remove(i);
                s
            }
        }
    }

    /// All free names: actor ids, names in expressions, mailboxes and
    /// messages in transit.
    pub fn free_names(&self) -> BTreeSet<String> {
        match self {
            ActorSystem::Nil => BTreeSet::new(),
            ActorSystem::Actor { id, expr, mailbox } => {
                let mut s = BTreeSet::from([id.clone()]);
                s.extend(expr.free_names());
                for v in mailbox {
                    s.extend(v.free_names());
                }
                s
            }
            ActorSystem::Ether { target, value } => {
                let mut s = BTreeSet::from([target.clone()]);
                s.extend(value.free_names());
                s
            }
            ActorSystem::Par(l, r) => {
                let mut s = l.free_names();
                s.extend(r.free_names());
                s
            }
            ActorSystem::New(i, body) => {
                let mut s = body.free_names();
                s.remove(i);
                s
            }
        }
    }

    /// Renames a free name throughout the system (used for fresh binders).
    pub fn rename_free(&self, from: &str, to: &str) -> ActorSystem {
        fn ren_val(v: &Value, from: &str, to: &str) -> Value {
            match v {
                Value::Id(i) if i == from => Value::Id(to.to_string()),
                Value::Tuple(vs) => Value::Tuple(vs.iter().map(|v| ren_val(v, from, to)).collect()),
                other => other.clone(),
            }
        }
        fn ren_pat(p: &Pattern, from: &str, to: &str) -> Pattern {
            match p {
                Pattern::Id(i) if i == from => Pattern::Id(to.to_string()),
                Pattern::Tuple(ps) => {
                    Pattern::Tuple(ps.iter().map(|p| ren_pat(p, from, to)).collect())
                }
                other => other.clone(),
            }
        }
        fn ren_ident(w: &Ident, from: &str, to: &str) -> Ident {
            match w {
                Ident::Val(v) => Ident::Val(ren_val(v, from, to)),
                Ident::Var(x) => Ident::Var(x.clone()),
            }
        }
        fn ren_expr(e: &Expr, from: &str, to: &str) -> Expr {
            match e {
                Expr::Send(t, p, cont) => Expr::Send(
                    ren_ident(t, from, to),
                    ren_ident(p, from, to),
                    Box::new(ren_expr(cont, from, to)),
                ),
                Expr::Receive(bs) => Expr::Receive(
                    bs.iter()
                        .map(|(p, e)| (ren_pat(p, from, to), ren_expr(e, from, to)))
                        .collect(),
                ),
                Expr::Spawn(b, x, c) => Expr::Spawn(
                    Box::new(ren_expr(b, from, to)),
                    x.clone(),
                    Box::new(ren_expr(c, from, to)),
                ),
                Expr::Slf(x, c) => Expr::Slf(x.clone(), Box::new(ren_expr(c, from, to))),
                Expr::Rec(x, b) => Expr::Rec(x.clone(), Box::new(ren_expr(b, from, to))),
                Expr::TVar(_) | Expr::Done => e.clone(),
            }
        }
        match self {
            ActorSystem::Nil => ActorSystem::Nil,
            ActorSystem::Actor { id, expr, mailbox } => ActorSystem::Actor {
                id: if id == from { to.to_string() } else { id.clone() },
                expr: ren_expr(expr, from, to),
                mailbox: mailbox.iter().map(|v| ren_val(v, from, to)).collect(),
            },
            ActorSystem::Ether { target, value } => ActorSystem::Ether {
                target: if target == from { to.to_string() } else { target.clone() },
                value: ren_val(value, from, to),
            },
            ActorSystem::Par(l, r) => {
                ActorSystem::par(l.rename_free(from, to), r.rename_free(from, to))
            }
            ActorSystem::New(i, body) => {
                if i == from {
                    self.clone()
                } else {
                    ActorSystem::New(i.clone(), Box::new(body.rename_free(from, to)))
                }
            }
        }
    }
}

impl fmt::Display for ActorSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActorSystem::Nil => write!(f, "nil"),
            ActorSystem::Actor { id, expr, mailbox } => {
                write!(f, "{id}<{expr}")?;
                if !mailbox.is_empty() {
                    write!(f, " ;")?;
                    for v in mailbox {
                        write!(f, " {v}")?;
                    }
                }
                write!(f, ">")
            }
            ActorSystem::Ether { target, value } => write!(f, "{target}!{value}"),
            ActorSystem::Par(l, r) => write!(f, "({l} || {r})"),
            ActorSystem::New(i, body) => write!(f, "new {i}.({body})"),
        }
    }
}

/// Transition labels of the actor calculus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ActorAction {
    In(String, Value),
    Out(String, Value),
    /// Scope-extruding output `(j) i!j`.
    OutBound(String, String),
    Comm(String, Value),
    NComm,
    Tau,
}

impl ActorAction {
    /// The names occurring in the action (for scoping side conditions).
    pub fn names(&self) -> BTreeSet<String> {
        match self {
            ActorAction::In(i, v) | ActorAction::Out(i, v) | ActorAction::Comm(i, v) => {
                let mut s = BTreeSet::from([i.clone()]);
                s.extend(v.free_names());
                s
            }
            ActorAction::OutBound(i, j) => BTreeSet::from([i.clone(), j.clone()]),
            ActorAction::NComm | ActorAction::Tau => BTreeSet::new(),
        }
    }

    /// The subject: the actor an input or output addresses.
    pub fn subject(&self) -> Option<&str> {
        match self {
            ActorAction::In(i, _) | ActorAction::Out(i, _) | ActorAction::OutBound(i, _) => {
                Some(i)
            }
            _ => None,
        }
    }

    /// Renders the action as a generic transition label. Inputs print as
    /// `i?v`, outputs as `i!v`, scope-extruding outputs as `(j)i!j`,
    /// internal communication as `i.v`, and hidden communication as `ncomm`.
    pub fn to_action(&self) -> Action {
        match self {
            ActorAction::In(i, v) => Action::external(format!("{i}?{v}")),
            ActorAction::Out(i, v) => Action::external(format!("{i}!{v}")),
            ActorAction::OutBound(i, j) => Action::external(format!("({j}){i}!{j}")),
            ActorAction::Comm(i, v) => Action::internal(format!("{i}.{v}")),
            ActorAction::NComm => Action::internal("ncomm"),
            ActorAction::Tau => Action::Tau,
        }
    }
}

impl fmt::Display for ActorAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_action() {
            Action::Step(TraceAction { kind: ActKind::External, label }) => write!(f, "{label}"),
            Action::Step(TraceAction { kind: ActKind::Internal, label }) => write!(f, "~{label}"),
            Action::Tau => write!(f, "tau"),
        }
    }
}

/// A system state: knowledge, observers, and the running system. The
/// well-formedness conditions tie the three together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActorConfig {
    pub knowledge: BTreeSet<String>,
    pub observers: BTreeSet<String>,
    pub system: ActorSystem,
}

impl ActorConfig {
    pub fn new(
        knowledge: impl IntoIterator<Item = String>,
        observers: impl IntoIterator<Item = String>,
        system: ActorSystem,
    ) -> Result<Self, String> {
        let cfg = ActorConfig {
            knowledge: knowledge.into_iter().collect(),
            observers: observers.into_iter().collect(),
            system,
        };
        cfg.check_well_formed()?;
        Ok(cfg)
    }

    pub fn check_well_formed(&self) -> Result<(), String> {
        if !self.observers.is_subset(&self.knowledge) {
            return Err("observers must be a subset of the knowledge set".into());
        }
        let free = self.system.free_names();
        if !free.is_subset(&self.knowledge) {
            let missing: Vec<_> = free.difference(&self.knowledge).cloned().collect();
            return Err(format!("free names {missing:?} are not in the knowledge set"));
        }
        let fid = self.system.fid();
        if !fid.is_disjoint(&self.observers) {
            return Err("running actor ids must be disjoint from the observers".into());
        }
        check_single_receiver(&self.system)?;
        Ok(())
    }
}

/// Every actor id is owned by exactly one actor across parallel components.
pub fn check_single_receiver(a: &ActorSystem) -> Result<(), String> {
    match a {
        ActorSystem::Par(l, r) => {
            let fl = l.fid();
            let fr = r.fid();
            if let Some(dup) = fl.intersection(&fr).next() {
                return Err(format!("actor id `{dup}` appears in both parallel components"));
            }
            check_single_receiver(l)?;
            check_single_receiver(r)
        }
        ActorSystem::New(_, body) => check_single_receiver(body),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn match_variable_binds() {
        let s = match_pattern(&Pattern::Var("x".into()), &Value::Atom("req".into())).unwrap();
        assert_eq!(s.get("x"), Some(&Value::Atom("req".into())));
    }

    #[test]
    fn match_atom_identity() {
        assert_eq!(
            match_pattern(&Pattern::Atom("req".into()), &Value::Atom("req".into())),
            Some(Subst::new())
        );
        assert!(match_pattern(&Pattern::Atom("req".into()), &Value::Atom("ans".into())).is_none());
    }

    #[test]
    fn match_tuple_requires_consistency() {
        let p = Pattern::Tuple(vec![Pattern::Var("x".into()), Pattern::Var("x".into())]);
        let same = Value::Tuple(vec![Value::Atom("a".into()), Value::Atom("a".into())]);
        let diff = Value::Tuple(vec![Value::Atom("a".into()), Value::Atom("b".into())]);
        assert!(match_pattern(&p, &same).is_some());
        assert!(match_pattern(&p, &diff).is_none());
    }

    #[test]
    fn absent_short_circuits_on_first_match() {
        let p = Pattern::Atom("req".into());
        let mbox = vec![Value::Atom("alloc".into()), Value::Atom("req".into())];
        assert!(!absent(&p, &mbox));
        assert!(absent(&p, &[]));
        assert!(absent(&p, &[Value::Atom("alloc".into())]));
    }

    #[test]
    fn single_receiver_enforced() {
        let a = ActorSystem::actor("i", Expr::Done);
        let b = ActorSystem::actor("i", Expr::Done);
        assert!(check_single_receiver(&ActorSystem::par(a, b)).is_err());
    }
}
