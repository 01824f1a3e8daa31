//! Operational semantics of actor configurations.

use std::collections::BTreeSet;

use super::{
    absent, congruence_normalize, match_pattern, ActorAction, ActorConfig, ActorSystem, Expr,
    Ident, Value,
};
use crate::semantics::Ilts;
use crate::syntax::{Action, TraceAction};

/// The actor backend. Exploration is bounded: environment inputs draw
/// payloads from a finite universe (the atoms of the initial configuration,
/// plus known ids when enabled) and mailboxes are capped. Both bounds are
/// part of the configuration and reported, not silent.
#[derive(Debug, Clone)]
pub struct ActorIlts {
    pub input_atoms: Vec<Value>,
    pub allow_id_inputs: bool,
    pub mailbox_cap: usize,
}

impl ActorIlts {
    /// Collects the input universe from the atoms mentioned anywhere in the
    /// initial configuration.
    pub fn for_config(cfg: &ActorConfig) -> Self {
        let mut atoms = BTreeSet::new();
        collect_atoms_sys(&cfg.system, &mut atoms);
        ActorIlts {
            input_atoms: atoms.into_iter().map(Value::Atom).collect(),
            allow_id_inputs: false,
            mailbox_cap: 3,
        }
    }

    fn input_values(&self, knowledge: &BTreeSet<String>) -> Vec<Value> {
        let mut vals = self.input_atoms.clone();
        if self.allow_id_inputs {
            vals.extend(knowledge.iter().cloned().map(Value::Id));
        }
        vals
    }
}

fn collect_atoms_val(v: &Value, out: &mut BTreeSet<String>) {
    match v {
        Value::Atom(a) => {
            out.insert(a.clone());
        }
        Value::Tuple(vs) => vs.iter().for_each(|v| collect_atoms_val(v, out)),
        Value::Id(_) => {}
    }
}

fn collect_atoms_expr(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Send(t, p, cont) => {
            for w in [t, p] {
                if let Ident::Val(v) = w {
                    collect_atoms_val(v, out);
                }
            }
            collect_atoms_expr(cont, out);
        }
        Expr::Receive(bs) => {
            for (p, body) in bs {
                collect_atoms_pat(p, out);
                collect_atoms_expr(body, out);
            }
        }
        Expr::Spawn(b, _, c) => {
            collect_atoms_expr(b, out);
            collect_atoms_expr(c, out);
        }
        Expr::Slf(_, c) | Expr::Rec(_, c) => collect_atoms_expr(c, out),
        Expr::TVar(_) | Expr::Done => {}
    }
}

fn collect_atoms_pat(p: &super::Pattern, out: &mut BTreeSet<String>) {
    match p {
        super::Pattern::Atom(a) => {
            out.insert(a.clone());
        }
        super::Pattern::Tuple(ps) => ps.iter().for_each(|p| collect_atoms_pat(p, out)),
        _ => {}
    }
}

fn collect_atoms_sys(a: &ActorSystem, out: &mut BTreeSet<String>) {
    match a {
        ActorSystem::Nil => {}
        ActorSystem::Actor { expr, mailbox, .. } => {
            collect_atoms_expr(expr, out);
            mailbox.iter().for_each(|v| collect_atoms_val(v, out));
        }
        ActorSystem::Ether { value, .. } => collect_atoms_val(value, out),
        ActorSystem::Par(l, r) => {
            collect_atoms_sys(l, out);
            collect_atoms_sys(r, out);
        }
        ActorSystem::New(_, body) => collect_atoms_sys(body, out),
    }
}

/// Knowledge/observer evolution after an action: inputs add the payload's
/// names to the knowledge and its unknown names to the observers;
/// scope-extruding outputs add the extruded name to the knowledge; all other
/// actions leave both unchanged.
pub fn after(
    knowledge: &BTreeSet<String>,
    observers: &BTreeSet<String>,
    act: &ActorAction,
) -> (BTreeSet<String>, BTreeSet<String>) {
    match act {
        ActorAction::In(_, v) => {
            let names = v.free_names();
            let mut k = knowledge.clone();
            let mut o = observers.clone();
            for n in names {
                if !knowledge.contains(&n) {
                    o.insert(n.clone());
                }
                k.insert(n);
            }
            (k, o)
        }
        ActorAction::OutBound(_, j) => {
            let mut k = knowledge.clone();
            k.insert(j.clone());
            (k, observers.clone())
        }
        _ => (knowledge.clone(), observers.clone()),
    }
}

/// All configuration-level successors, with knowledge and observers updated
/// by the after-function.
pub fn actor_step(ilts: &ActorIlts, cfg: &ActorConfig) -> Vec<(ActorAction, ActorConfig)> {
    step_sys(ilts, &cfg.knowledge, &cfg.observers, &cfg.system)
        .into_iter()
        .map(|(act, sys)| {
            let (k, o) = after(&cfg.knowledge, &cfg.observers, &act);
            (act, ActorConfig { knowledge: k, observers: o, system: sys })
        })
        .collect()
}

fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let mut n = 1;
    loop {
        let cand = format!("{base}{n}");
        if !avoid.contains(&cand) {
            return cand;
        }
        n += 1;
    }
}

/// Delivery of an input `i?v` inside a system: the unique actor named `i`
/// appends `v` to its mailbox (persistently receptive, up to the cap).
fn input_steps(
    ilts: &ActorIlts,
    sys: &ActorSystem,
    target: &str,
    value: &Value,
) -> Vec<ActorSystem> {
    match sys {
        ActorSystem::Actor { id, expr, mailbox } if id == target => {
            if mailbox.len() >= ilts.mailbox_cap {
                return Vec::new();
            }
            let mut mb = mailbox.clone();
            mb.push(value.clone());
            vec![ActorSystem::Actor { id: id.clone(), expr: expr.clone(), mailbox: mb }]
        }
        ActorSystem::Par(l, r) => {
            let mut out: Vec<ActorSystem> = input_steps(ilts, l, target, value)
                .into_iter()
                .map(|l2| ActorSystem::par(l2, (**r).clone()))
                .collect();
            out.extend(
                input_steps(ilts, r, target, value)
                    .into_iter()
                    .map(|r2| ActorSystem::par((**l).clone(), r2)),
            );
            out
        }
        ActorSystem::New(j, body) => {
            // Rename the binder apart from the action's names if needed.
            let mut names = value.free_names();
            names.insert(target.to_string());
            let (j, body) = if names.contains(j) {
                let mut avoid = names.clone();
                avoid.extend(body.free_names());
                let fresh = fresh_name("#r", &avoid);
                (fresh.clone(), body.rename_free(j, &fresh))
            } else {
                (j.clone(), (**body).clone())
            };
            input_steps(ilts, &body, target, value)
                .into_iter()
                .map(|b2| ActorSystem::new_scope(j.clone(), b2))
                .collect()
        }
        _ => Vec::new(),
    }
}

fn step_sys(
    ilts: &ActorIlts,
    knowledge: &BTreeSet<String>,
    observers: &BTreeSet<String>,
    sys: &ActorSystem,
) -> Vec<(ActorAction, ActorSystem)> {
    match sys {
        ActorSystem::Nil => Vec::new(),

        ActorSystem::Ether { target, value } => {
            if observers.contains(target) {
                vec![(ActorAction::Out(target.clone(), value.clone()), ActorSystem::Nil)]
            } else {
                Vec::new()
            }
        }

        ActorSystem::Actor { id, expr, mailbox } => {
            let mut out = Vec::new();
            // Inputs from the environment.
            if mailbox.len() < ilts.mailbox_cap {
                for v in ilts.input_values(knowledge) {
                    let mut mb = mailbox.clone();
                    mb.push(v.clone());
                    out.push((
                        ActorAction::In(id.clone(), v),
                        ActorSystem::Actor { id: id.clone(), expr: expr.clone(), mailbox: mb },
                    ));
                }
            }
            match expr {
                Expr::Send(t, p, cont) => {
                    if let (Some(Value::Id(dst)), Some(payload)) = (t.resolve(), p.resolve()) {
                        out.push((
                            ActorAction::Tau,
                            ActorSystem::par(
                                ActorSystem::Actor {
                                    id: id.clone(),
                                    expr: (**cont).clone(),
                                    mailbox: mailbox.clone(),
                                },
                                ActorSystem::Ether { target: dst.clone(), value: payload.clone() },
                            ),
                        ));
                    }
                }
                Expr::Receive(branches) => {
                    // Selective read: the first mailbox message matching any
                    // pattern is consumed (patterns are disjoint).
                    'scan: for (idx, v) in mailbox.iter().enumerate() {
                        for (pat, body) in branches {
                            if !absent(pat, std::slice::from_ref(v)) {
                                let subst = match_pattern(pat, v).expect("not absent");
                                let mut body2 = body.clone();
                                for (x, val) in &subst {
                                    body2 = body2.subst_value(x, val);
                                }
                                let mut mb = mailbox.clone();
                                mb.remove(idx);
                                out.push((
                                    ActorAction::Tau,
                                    ActorSystem::Actor {
                                        id: id.clone(),
                                        expr: body2,
                                        mailbox: mb,
                                    },
                                ));
                                break 'scan;
                            }
                        }
                    }
                }
                Expr::Spawn(body, binder, cont) => {
                    let spawned = fresh_name("p", knowledge);
                    let cont2 = cont.subst_value(binder, &Value::Id(spawned.clone()));
                    out.push((
                        ActorAction::Tau,
                        ActorSystem::new_scope(
                            spawned.clone(),
                            ActorSystem::par(
                                ActorSystem::Actor {
                                    id: id.clone(),
                                    expr: cont2,
                                    mailbox: mailbox.clone(),
                                },
                                ActorSystem::actor(spawned, (**body).clone()),
                            ),
                        ),
                    ));
                }
                Expr::Slf(binder, cont) => {
                    out.push((
                        ActorAction::Tau,
                        ActorSystem::Actor {
                            id: id.clone(),
                            expr: cont.subst_value(binder, &Value::Id(id.clone())),
                            mailbox: mailbox.clone(),
                        },
                    ));
                }
                Expr::Rec(x, body) => {
                    out.push((
                        ActorAction::Tau,
                        ActorSystem::Actor {
                            id: id.clone(),
                            expr: body.subst_term(x, expr),
                            mailbox: mailbox.clone(),
                        },
                    ));
                }
                Expr::TVar(_) | Expr::Done => {}
            }
            out
        }

        ActorSystem::Par(l, r) => {
            let mut out = Vec::new();
            let fid_l = l.fid();
            let fid_r = r.fid();
            // Independent moves, provided the action's subject is not owned
            // by the sibling (single-receiver).
            for (act, l2) in step_sys(ilts, knowledge, observers, l) {
                if act.subject().is_none_or(|s| !fid_r.contains(s)) {
                    out.push((act, ActorSystem::par(l2, (**r).clone())));
                }
            }
            for (act, r2) in step_sys(ilts, knowledge, observers, r) {
                if act.subject().is_none_or(|s| !fid_l.contains(s)) {
                    out.push((act, ActorSystem::par((**l).clone(), r2)));
                }
            }
            // Internal communication: one side outputs towards the other
            // (the sibling's actor ids act as the observers of the premise).
            let mut comm = |src: &ActorSystem, dst: &ActorSystem, left_to_right: bool| {
                let dst_fid = dst.fid();
                for (act, src2) in step_sys(ilts, knowledge, &dst_fid, src) {
                    match &act {
                        ActorAction::Out(i, v) if dst_fid.contains(i) => {
                            for dst2 in input_steps(ilts, dst, i, v) {
                                let sys = if left_to_right {
                                    ActorSystem::par(src2.clone(), dst2)
                                } else {
                                    ActorSystem::par(dst2, src2.clone())
                                };
                                out.push((ActorAction::Comm(i.clone(), v.clone()), sys));
                            }
                        }
                        ActorAction::OutBound(i, j) if dst_fid.contains(i) => {
                            for dst2 in input_steps(ilts, dst, i, &Value::Id(j.clone())) {
                                let inner = if left_to_right {
                                    ActorSystem::par(src2.clone(), dst2)
                                } else {
                                    ActorSystem::par(dst2, src2.clone())
                                };
                                out.push((
                                    ActorAction::NComm,
                                    ActorSystem::new_scope(j.clone(), inner),
                                ));
                            }
                        }
                        _ => {}
                    }
                }
            };
            comm(l, r, true);
            comm(r, l, false);
            out
        }

        ActorSystem::New(j, body) => {
            // Keep the bound name apart from the knowledge set.
            let (j, body) = if knowledge.contains(j) {
                let mut avoid = knowledge.clone();
                avoid.extend(body.free_names());
                let fresh = fresh_name("#s", &avoid);
                (fresh.clone(), body.rename_free(j, &fresh))
            } else {
                (j.clone(), (**body).clone())
            };
            let mut inner_k = knowledge.clone();
            inner_k.insert(j.clone());
            let mut out = Vec::new();
            for (act, body2) in step_sys(ilts, &inner_k, observers, &body) {
                match &act {
                    // Scope extrusion: the bound name escapes as an output
                    // payload and the binder is dropped.
                    ActorAction::Out(i, Value::Id(v)) if v == &j => {
                        out.push((ActorAction::OutBound(i.clone(), j.clone()), body2));
                    }
                    // Communication mentioning the bound name stays hidden.
                    ActorAction::Comm(..) if act.names().contains(&j) => {
                        out.push((ActorAction::NComm, ActorSystem::new_scope(j.clone(), body2)));
                    }
                    _ if !act.names().contains(&j) => {
                        out.push((act, ActorSystem::new_scope(j.clone(), body2)));
                    }
                    // Any other action mentioning the bound name is blocked.
                    _ => {}
                }
            }
            out
        }
    }
}

impl Ilts for ActorIlts {
    type State = ActorConfig;
    type Key = String;

    fn canon_key(&self, s: &Self::State) -> Self::Key {
        format!(
            "{:?}|{:?}|{}",
            s.knowledge,
            s.observers,
            congruence_normalize(&s.system)
        )
    }

    fn step(&self, s: &Self::State) -> Vec<(Action, Self::State)> {
        actor_step(self, s)
            .into_iter()
            .map(|(act, cfg)| (act.to_action(), cfg))
            .collect()
    }

    fn det(&self, a: &TraceAction) -> bool {
        crate::syntax::DetSpec::Actor.det(a)
    }

    fn describe(&self, s: &Self::State) -> String {
        s.system.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actors::Pattern;

    fn atom(s: &str) -> Value {
        Value::Atom(s.into())
    }

    /// The memory server: receives a query, pings two workers, answers the
    /// client, and the workers report to the resource manager.
    pub(crate) fn server_system() -> ActorSystem {
        let srv = ActorSystem::actor(
            "i",
            Expr::Receive(vec![(
                Pattern::Atom("req".into()),
                Expr::send(
                    Ident::Val(Value::Id("k1".into())),
                    Ident::Val(atom("init")),
                    Expr::send(
                        Ident::Val(Value::Id("k2".into())),
                        Ident::Val(atom("init")),
                        Expr::send(Ident::Val(Value::Id("j".into())), Ident::Val(atom("ans")), Expr::Done),
                    ),
                ),
            )]),
        );
        let w1 = ActorSystem::actor(
            "k1",
            Expr::Receive(vec![(
                Pattern::Atom("init".into()),
                Expr::send(Ident::Val(Value::Id("k".into())), Ident::Val(atom("alloc")), Expr::Done),
            )]),
        );
        let w2 = ActorSystem::actor(
            "k2",
            Expr::Receive(vec![(
                Pattern::Atom("init".into()),
                Expr::send(Ident::Val(Value::Id("k".into())), Ident::Val(atom("cls")), Expr::Done),
            )]),
        );
        ActorSystem::par(srv, ActorSystem::par(w1, w2))
    }

    pub(crate) fn server_config(scoped: bool) -> ActorConfig {
        let system = if scoped {
            ActorSystem::new_scope("k1", ActorSystem::new_scope("k2", server_system()))
        } else {
            server_system()
        };
        let knowledge: Vec<String> = if scoped {
            ["i", "j", "k"].map(String::from).to_vec()
        } else {
            ["i", "j", "k", "k1", "k2"].map(String::from).to_vec()
        };
        ActorConfig::new(knowledge, ["j".into(), "k".into()], system).unwrap()
    }

    #[test]
    fn actors_are_persistently_receptive() {
        let cfg = server_config(false);
        let ilts = ActorIlts::for_config(&cfg);
        let steps = actor_step(&ilts, &cfg);
        assert!(steps.iter().any(|(a, _)| matches!(
            a,
            ActorAction::In(i, Value::Atom(at)) if i == "i" && at == "req"
        )));
    }

    #[test]
    fn input_grows_knowledge_and_observers() {
        let cfg = server_config(false);
        let (k, o) = after(
            &cfg.knowledge,
            &cfg.observers,
            &ActorAction::In("i".into(), Value::Id("fresh".into())),
        );
        assert!(k.contains("fresh"));
        assert!(o.contains("fresh"));
    }

    #[test]
    fn server_produces_the_paper_traces() {
        use crate::semantics::Explored;
        let cfg = server_config(false);
        let ilts = ActorIlts::for_config(&cfg);
        let ex = Explored::new(&ilts, &cfg, 5000).unwrap();
        let t1 = crate::syntax::parse_trace("i?req ~k1.init ~k2.init j!ans k!alloc").unwrap();
        let t2 = crate::syntax::parse_trace("i?req ~k1.init ~k2.init j!ans k!cls").unwrap();
        assert!(ex.produces(0, &t1), "t1 must be producible");
        assert!(ex.produces(0, &t2), "t2 must be producible");
    }

    #[test]
    fn scoped_server_hides_communication() {
        use crate::semantics::Explored;
        let cfg = server_config(true);
        let ilts = ActorIlts::for_config(&cfg);
        let ex = Explored::new(&ilts, &cfg, 5000).unwrap();
        let t3 = crate::syntax::parse_trace("i?req ~ncomm ~ncomm j!ans k!alloc").unwrap();
        let t4 = crate::syntax::parse_trace("i?req ~ncomm ~ncomm j!ans k!cls").unwrap();
        assert!(ex.produces(0, &t3), "t3 must be producible");
        assert!(ex.produces(0, &t4), "t4 must be producible");
    }

    #[test]
    fn scoped_delivery_is_nondeterministic() {
        // new i.(i<rcv x -> j!x> || i!v1 || i!v2) has two non-equivalent
        // ncomm successors.
        let receiver = ActorSystem::actor(
            "i",
            Expr::Receive(vec![(
                Pattern::Var("X".into()),
                Expr::send(Ident::Val(Value::Id("j".into())), Ident::Var("X".into()), Expr::Done),
            )]),
        );
        let sys = ActorSystem::new_scope(
            "i",
            ActorSystem::par(
                receiver,
                ActorSystem::par(
                    ActorSystem::Ether { target: "i".into(), value: atom("v1") },
                    ActorSystem::Ether { target: "i".into(), value: atom("v2") },
                ),
            ),
        );
        let cfg = ActorConfig::new(["j".into()], ["j".into()], sys).unwrap();
        let ilts = ActorIlts::for_config(&cfg);
        let succs: Vec<ActorConfig> = actor_step(&ilts, &cfg)
            .into_iter()
            .filter(|(a, _)| *a == ActorAction::NComm)
            .map(|(_, c)| c)
            .collect();
        assert_eq!(succs.len(), 2);
        assert!(!ilts.equiv(&succs[0], &succs[1]));
    }

    #[test]
    fn double_scope_extrusion_is_nondeterministic() {
        // new i.(i<e1> || h!i) || new i.(i<e2> || h!i): the same outbound
        // label reaches two non-equivalent systems.
        let mk = |payload: &str| {
            ActorSystem::new_scope(
                "i",
                ActorSystem::par(
                    ActorSystem::actor(
                        "i",
                        Expr::send(
                            Ident::Val(Value::Id("h".into())),
                            Ident::Val(atom(payload)),
                            Expr::Done,
                        ),
                    ),
                    ActorSystem::Ether { target: "h".into(), value: Value::Id("i".into()) },
                ),
            )
        };
        let sys = ActorSystem::par(mk("e1"), mk("e2"));
        let cfg = ActorConfig::new(["h".into()], ["h".into()], sys).unwrap();
        let ilts = ActorIlts::for_config(&cfg);
        let outbound: Vec<(ActorAction, ActorConfig)> = actor_step(&ilts, &cfg)
            .into_iter()
            .filter(|(a, _)| matches!(a, ActorAction::OutBound(..)))
            .collect();
        assert_eq!(outbound.len(), 2);
        assert_eq!(outbound[0].0, outbound[1].0, "same label");
        assert!(!ilts.equiv(&outbound[0].1, &outbound[1].1));
    }
}
