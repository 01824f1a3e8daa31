//! Structural equivalence for actor systems, decided by a confluent
//! normalizer: inactive components are dropped, parallel composition is
//! flattened into a multiset sorted by a stable term order, scoped names are
//! hoisted outward where freeness permits, and binders are renamed
//! canonically. Two systems are structurally equivalent exactly when their
//! canonical forms are identical.

use super::{ActorSystem, Expr, Ident, Pattern};

/// Cap on the number of hoisted binders for which all orderings are tried;
/// beyond it the first-occurrence order is kept.
const BINDER_PERM_CAP: usize = 6;

pub fn congruence_normalize(a: &ActorSystem) -> ActorSystem {
    let mut binders = Vec::new();
    let mut comps = Vec::new();
    let mut fresh = 0usize;
    flatten(a, &mut binders, &mut comps, &mut fresh);

    let comps: Vec<ActorSystem> = comps.iter().map(alpha_component).collect();

    if binders.is_empty() {
        return rebuild(&[], sorted(comps));
    }

    let orders: Vec<Vec<String>> = if binders.len() <= BINDER_PERM_CAP {
        permutations(&binders)
    } else {
        vec![binders.clone()]
    };

    let mut best: Option<(String, ActorSystem)> = None;
    for order in orders {
        let mut renamed = comps.clone();
        for (idx, b) in order.iter().enumerate() {
            let canon = format!("#{idx}");
            renamed = renamed
                .into_iter()
                .map(|c| c.rename_free(b, &canon))
                .collect();
        }
        let names: Vec<String> = (0..order.len()).map(|i| format!("#{i}")).collect();
        let candidate = rebuild(&names, sorted(renamed));
        let key = candidate.to_string();
        if best.as_ref().is_none_or(|(k, _)| key < *k) {
            best = Some((key, candidate));
        }
    }
    best.unwrap().1
}

fn flatten(
    a: &ActorSystem,
    binders: &mut Vec<String>,
    comps: &mut Vec<ActorSystem>,
    fresh: &mut usize,
) {
    match a {
        ActorSystem::Nil => {}
        ActorSystem::Par(l, r) => {
            flatten(l, binders, comps, fresh);
            flatten(r, binders, comps, fresh);
        }
        ActorSystem::New(i, body) => {
            // Rename the binder to a unique placeholder so hoisting past
            // sibling components never captures.
            let placeholder = format!("#tmp{}", *fresh);
            *fresh += 1;
            let body = body.rename_free(i, &placeholder);
            binders.push(placeholder);
            flatten(&body, binders, comps, fresh);
        }
        leaf => comps.push(leaf.clone()),
    }
}

fn sorted(mut comps: Vec<ActorSystem>) -> Vec<ActorSystem> {
    comps.sort_by_key(|c| c.to_string());
    comps
}

fn rebuild(binders: &[String], comps: Vec<ActorSystem>) -> ActorSystem {
    let body = match comps.len() {
        0 => ActorSystem::Nil,
        _ => {
            let mut it = comps.into_iter().rev();
            let last = it.next().unwrap();
            it.fold(last, |acc, c| ActorSystem::par(c, acc))
        }
    };
    binders
        .iter()
        .rev()
        .fold(body, |acc, b| ActorSystem::new_scope(b.clone(), acc))
}

fn permutations(items: &[String]) -> Vec<Vec<String>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, head) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

/// Renames bound expression and term variables canonically by binding depth.
fn alpha_component(a: &ActorSystem) -> ActorSystem {
    match a {
        ActorSystem::Actor { id, expr, mailbox } => ActorSystem::Actor {
            id: id.clone(),
            expr: alpha_expr(expr, &mut Vec::new(), &mut Vec::new()),
            mailbox: mailbox.clone(),
        },
        other => other.clone(),
    }
}

fn alpha_expr(
    e: &Expr,
    evars: &mut Vec<(String, String)>,
    tvars: &mut Vec<(String, String)>,
) -> Expr {
    let depth = |evars: &Vec<(String, String)>, tvars: &Vec<(String, String)>| {
        format!("%{}", evars.len() + tvars.len())
    };
    match e {
        Expr::Send(t, p, cont) => {
            let ren = |w: &Ident, evars: &Vec<(String, String)>| match w {
                Ident::Var(x) => {
                    let name = evars
                        .iter()
                        .rev()
                        .find(|(o, _)| o == x)
                        .map(|(_, c)| c.clone())
                        .unwrap_or_else(|| x.clone());
                    Ident::Var(name)
                }
                v => v.clone(),
            };
            Expr::Send(ren(t, evars), ren(p, evars), Box::new(alpha_expr(cont, evars, tvars)))
        }
        Expr::Receive(branches) => Expr::Receive(
            branches
                .iter()
                .map(|(p, body)| {
                    let mut pushed = 0;
                    let p2 = alpha_pattern(p, evars, tvars, &mut pushed);
                    let body2 = alpha_expr(body, evars, tvars);
                    for _ in 0..pushed {
                        evars.pop();
                    }
                    (p2, body2)
                })
                .collect(),
        ),
        Expr::Spawn(body, x, cont) => {
            let body2 = alpha_expr(body, evars, tvars);
            let canon = depth(evars, tvars);
            evars.push((x.clone(), canon.clone()));
            let cont2 = alpha_expr(cont, evars, tvars);
            evars.pop();
            Expr::Spawn(Box::new(body2), canon, Box::new(cont2))
        }
        Expr::Slf(x, cont) => {
            let canon = depth(evars, tvars);
            evars.push((x.clone(), canon.clone()));
            let cont2 = alpha_expr(cont, evars, tvars);
            evars.pop();
            Expr::Slf(canon, Box::new(cont2))
        }
        Expr::Rec(x, body) => {
            let canon = depth(evars, tvars);
            tvars.push((x.clone(), canon.clone()));
            let body2 = alpha_expr(body, evars, tvars);
            tvars.pop();
            Expr::Rec(canon, Box::new(body2))
        }
        Expr::TVar(x) => {
            let name = tvars
                .iter()
                .rev()
                .find(|(o, _)| o == x)
                .map(|(_, c)| c.clone())
                .unwrap_or_else(|| x.clone());
            Expr::TVar(name)
        }
        Expr::Done => Expr::Done,
    }
}

fn alpha_pattern(
    p: &Pattern,
    evars: &mut Vec<(String, String)>,
    tvars: &mut Vec<(String, String)>,
    pushed: &mut usize,
) -> Pattern {
    match p {
        Pattern::Var(x) => {
            let canon = format!("%{}", evars.len() + tvars.len());
            evars.push((x.clone(), canon.clone()));
            *pushed += 1;
            Pattern::Var(canon)
        }
        Pattern::Tuple(ps) => Pattern::Tuple(
            ps.iter()
                .map(|p| alpha_pattern(p, evars, tvars, pushed))
                .collect(),
        ),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actors::Value;

    fn actor(id: &str) -> ActorSystem {
        ActorSystem::actor(id, Expr::Done)
    }

    #[test]
    fn nil_units_are_dropped() {
        let a = ActorSystem::par(actor("i"), ActorSystem::Nil);
        assert_eq!(congruence_normalize(&a), congruence_normalize(&actor("i")));
    }

    #[test]
    fn par_is_commutative_and_associative() {
        let abc = ActorSystem::par(actor("a"), ActorSystem::par(actor("b"), actor("c")));
        let cab = ActorSystem::par(ActorSystem::par(actor("c"), actor("a")), actor("b"));
        assert_eq!(congruence_normalize(&abc), congruence_normalize(&cab));
    }

    #[test]
    fn binder_order_is_immaterial() {
        let inner = ActorSystem::par(actor("i"), actor("j"));
        let ij = ActorSystem::new_scope("i", ActorSystem::new_scope("j", inner.clone()));
        let ji = ActorSystem::new_scope("j", ActorSystem::new_scope("i", inner));
        assert_eq!(congruence_normalize(&ij), congruence_normalize(&ji));
    }

    #[test]
    fn scope_extrusion_where_free() {
        // a || new i.(b(i)) == new i.(a || b(i)) when i not free in a.
        let b = ActorSystem::Ether { target: "i".into(), value: Value::Atom("m".into()) };
        let lhs = ActorSystem::par(actor("a"), ActorSystem::new_scope("i", b.clone()));
        let rhs = ActorSystem::new_scope("i", ActorSystem::par(actor("a"), b));
        assert_eq!(congruence_normalize(&lhs), congruence_normalize(&rhs));
    }

    #[test]
    fn distinct_payloads_are_not_identified() {
        let m1 = ActorSystem::Ether { target: "i".into(), value: Value::Atom("m1".into()) };
        let m2 = ActorSystem::Ether { target: "i".into(), value: Value::Atom("m2".into()) };
        assert_ne!(congruence_normalize(&m1), congruence_normalize(&m2));
    }
}
