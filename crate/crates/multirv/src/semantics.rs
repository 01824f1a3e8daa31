//! Finite-state ILTS abstraction, weak transitions, trace enumeration, and
//! the brute-force denotational evaluator used as the ground-truth oracle.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::hash::Hash;

use crate::syntax::{Action, Formula, TraceAction};
use crate::{History, Trace};

/// Default cap on explored states.
pub const DEFAULT_STATE_BOUND: usize = 10_000;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SemanticsError {
    #[error("state-space bound of {0} states exceeded")]
    StateBoundExceeded(usize),
    #[error("determinacy axiom violated: action `{action}` from state `{state}` reaches non-equivalent states")]
    DeterminacyViolation { state: String, action: String },
    #[error("silent-step confluence violated at state `{state}`")]
    ConfluenceViolation { state: String },
}

/// An instrumentable labelled transition system.
///
/// `canon_key` must return equal keys exactly for [`Ilts::equiv`]-related
/// states; the exploration engine keys everything on it.
pub trait Ilts {
    type State: Clone;
    type Key: Clone + Eq + Hash + Ord;

    fn canon_key(&self, s: &Self::State) -> Self::Key;
    fn step(&self, s: &Self::State) -> Vec<(Action, Self::State)>;
    fn det(&self, a: &TraceAction) -> bool;

    fn equiv(&self, a: &Self::State, b: &Self::State) -> bool {
        self.canon_key(a) == self.canon_key(b)
    }

    /// Human-readable state rendering for diagnostics.
    fn describe(&self, s: &Self::State) -> String;
}

/// The reachable fragment of an ILTS, explored up to a state bound, with
/// states indexed for set-valued computations.
pub struct Explored<'a, I: Ilts> {
    pub ilts: &'a I,
    pub states: Vec<I::State>,
    index: HashMap<I::Key, usize>,
    /// Outgoing transitions per state, deduplicated and in deterministic order.
    pub transitions: Vec<Vec<(Action, usize)>>,
}

pub type StateSet = BTreeSet<usize>;

impl<'a, I: Ilts> Explored<'a, I> {
    pub fn new(ilts: &'a I, initial: &I::State, bound: usize) -> Result<Self, SemanticsError> {
        let mut ex = Explored {
            ilts,
            states: Vec::new(),
            index: HashMap::new(),
            transitions: Vec::new(),
        };
        let mut queue = VecDeque::new();
        queue.push_back(ex.intern(initial.clone()));
        let mut done = BTreeSet::new();
        while let Some(i) = queue.pop_front() {
            if !done.insert(i) {
                continue;
            }
            let mut outs: BTreeMap<(Action, usize), ()> = BTreeMap::new();
            for (act, succ) in ex.ilts.step(&ex.states[i].clone()) {
                if ex.states.len() >= bound && !ex.index.contains_key(&ex.ilts.canon_key(&succ)) {
                    return Err(SemanticsError::StateBoundExceeded(bound));
                }
                let j = ex.intern(succ);
                outs.insert((act, j), ());
                if !done.contains(&j) {
                    queue.push_back(j);
                }
            }
            while ex.transitions.len() <= i {
                ex.transitions.push(Vec::new());
            }
            ex.transitions[i] = outs.into_keys().collect();
        }
        while ex.transitions.len() < ex.states.len() {
            ex.transitions.push(Vec::new());
        }
        Ok(ex)
    }

    fn intern(&mut self, s: I::State) -> usize {
        let key = self.ilts.canon_key(&s);
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.states.len();
        self.states.push(s);
        self.index.insert(key, i);
        i
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: &I::State) -> Option<usize> {
        self.index.get(&self.ilts.canon_key(s)).copied()
    }

    fn closure<F: Fn(&Action) -> bool>(&self, from: &StateSet, keep: F) -> StateSet {
        let mut seen = from.clone();
        let mut queue: VecDeque<usize> = from.iter().copied().collect();
        while let Some(i) = queue.pop_front() {
            for (act, j) in &self.transitions[i] {
                if keep(act) && seen.insert(*j) {
                    queue.push_back(*j);
                }
            }
        }
        seen
    }

    /// Closure over silent steps only (the basis of weak traceable steps).
    pub fn silent_closure(&self, from: &StateSet) -> StateSet {
        self.closure(from, Action::is_tau)
    }

    /// Closure over silent and internal steps (the basis of weak steps).
    pub fn weak_closure(&self, from: &StateSet) -> StateSet {
        self.closure(from, |a| match a {
            Action::Tau => true,
            Action::Step(t) => t.is_internal(),
        })
    }

    fn strong_post(&self, from: &StateSet, act: &Action) -> StateSet {
        let mut out = StateSet::new();
        for i in from {
            for (a, j) in &self.transitions[*i] {
                if a == act {
                    out.insert(*j);
                }
            }
        }
        out
    }

    /// All states reachable via `=(a)=>`: weak closure, one external `a`
    /// step, weak closure.
    pub fn weak_step(&self, state: usize, label: &str) -> StateSet {
        let pre = self.weak_closure(&StateSet::from([state]));
        let mid = self.strong_post(&pre, &Action::external(label));
        self.weak_closure(&mid)
    }

    /// All states reachable via the weak traceable step on `act`: silent
    /// closure, one `act` step, silent closure.
    pub fn weak_traceable_step(&self, state: usize, act: &TraceAction) -> StateSet {
        let pre = self.silent_closure(&StateSet::from([state]));
        let mid = self.strong_post(&pre, &Action::Step(act.clone()));
        self.silent_closure(&mid)
    }

    fn weak_traceable_post(&self, from: &StateSet, act: &TraceAction) -> StateSet {
        let mid = self.strong_post(&self.silent_closure(from), &Action::Step(act.clone()));
        self.silent_closure(&mid)
    }

    /// All traces of length at most `max_len` produced from `state`,
    /// including the empty trace.
    pub fn traces(&self, state: usize, max_len: usize) -> History {
        let mut out = History::new();
        let start = self.silent_closure(&StateSet::from([state]));
        let mut frontier: Vec<(Trace, StateSet)> = vec![(Vec::new(), start)];
        out.insert(Vec::new());
        for _ in 0..max_len {
            let mut next = Vec::new();
            for (trace, set) in &frontier {
                for act in self.traceable_actions(set) {
                    let post = self.weak_traceable_post(set, &act);
                    if post.is_empty() {
                        continue;
                    }
                    let mut t = trace.clone();
                    t.push(act);
                    if out.insert(t.clone()) {
                        next.push((t, post));
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        out
    }

    /// Whether `state` can produce `trace` (membership in `T_p` up to the
    /// trace's own length).
    pub fn produces(&self, state: usize, trace: &[TraceAction]) -> bool {
        let mut set = self.silent_closure(&StateSet::from([state]));
        for act in trace {
            set = self.weak_traceable_post(&set, act);
            if set.is_empty() {
                return false;
            }
        }
        true
    }

    fn traceable_actions(&self, from: &StateSet) -> BTreeSet<TraceAction> {
        let closed = self.silent_closure(from);
        let mut acts = BTreeSet::new();
        for i in &closed {
            for (a, _) in &self.transitions[*i] {
                if let Action::Step(t) = a {
                    acts.insert(t.clone());
                }
            }
        }
        acts
    }

    /// All external labels appearing anywhere in the explored space.
    pub fn external_labels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for outs in &self.transitions {
            for (a, _) in outs {
                if let Action::Step(t) = a {
                    if t.is_external() {
                        out.insert(t.label.clone());
                    }
                }
            }
        }
        out
    }

    /// All traceable actions appearing anywhere in the explored space.
    pub fn traceable_labels(&self) -> BTreeSet<TraceAction> {
        let mut out = BTreeSet::new();
        for outs in &self.transitions {
            for (a, _) in outs {
                if let Action::Step(t) = a {
                    out.insert(t.clone());
                }
            }
        }
        out
    }

    /// Exact denotation of a closed, guarded formula over the explored space.
    /// Greatest fixed points iterate downward from the full state set, least
    /// fixed points upward from the empty set; modalities use weak steps.
    pub fn eval(&self, formula: &Formula) -> StateSet {
        let mut env: BTreeMap<String, StateSet> = BTreeMap::new();
        self.eval_in(formula, &mut env)
    }

    fn eval_in(&self, formula: &Formula, env: &mut BTreeMap<String, StateSet>) -> StateSet {
        let all: StateSet = (0..self.len()).collect();
        match formula {
            Formula::Tt => all,
            Formula::Ff => StateSet::new(),
            Formula::Var(x) => env.get(x).cloned().unwrap_or_default(),
            Formula::And(l, r) => {
                let a = self.eval_in(l, env);
                let b = self.eval_in(r, env);
                a.intersection(&b).copied().collect()
            }
            Formula::Or(l, r) => {
                let a = self.eval_in(l, env);
                let b = self.eval_in(r, env);
                a.union(&b).copied().collect()
            }
            Formula::Box_(a, p) => {
                let inner = self.eval_in(p, env);
                all.iter()
                    .copied()
                    .filter(|&s| self.weak_step(s, a).is_subset(&inner))
                    .collect()
            }
            Formula::Diamond(a, p) => {
                let inner = self.eval_in(p, env);
                all.iter()
                    .copied()
                    .filter(|&s| !self.weak_step(s, a).is_disjoint(&inner))
                    .collect()
            }
            Formula::Max(x, p) => {
                let mut current = all;
                loop {
                    env.insert(x.clone(), current.clone());
                    let next = self.eval_in(p, env);
                    env.remove(x);
                    let next: StateSet = next.intersection(&current).copied().collect();
                    if next == current {
                        return current;
                    }
                    current = next;
                }
            }
            Formula::Min(x, p) => {
                let mut current = StateSet::new();
                loop {
                    env.insert(x.clone(), current.clone());
                    let next = self.eval_in(p, env);
                    env.remove(x);
                    let next: StateSet = next.union(&current).copied().collect();
                    if next == current {
                        return current;
                    }
                    current = next;
                }
            }
        }
    }

    /// Evaluates several formulas over the same explored space, in parallel
    /// when the `parallel` feature is enabled.
    pub fn eval_batch(&self, formulas: &[Formula]) -> Vec<StateSet>
    where
        I: Sync,
        I::State: Sync,
        I::Key: Sync,
    {
        crate::par::map(formulas.to_vec(), |f| self.eval(&f))
    }

    /// Checks the determinacy axiom for every action the backend declares
    /// deterministic, over the whole explored space.
    pub fn validate_determinacy(&self) -> Result<(), SemanticsError> {
        for (i, outs) in self.transitions.iter().enumerate() {
            let mut by_act: BTreeMap<&Action, Vec<usize>> = BTreeMap::new();
            for (a, j) in outs {
                if let Action::Step(t) = a {
                    if self.ilts.det(t) {
                        by_act.entry(a).or_default().push(*j);
                    }
                }
            }
            for (a, succs) in by_act {
                if succs.windows(2).any(|w| w[0] != w[1]) {
                    return Err(SemanticsError::DeterminacyViolation {
                        state: self.ilts.describe(&self.states[i]),
                        action: a.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Checks that silent steps are confluent with every other action, per
    /// the ILTS axioms, on the explored space: whenever `p -tau-> p'` and
    /// `p -mu-> p''` then either `mu = tau` and the targets are equivalent,
    /// or there is a state joining the diamond in one step each.
    pub fn validate_silent_confluence(&self) -> Result<(), SemanticsError> {
        for (i, outs) in self.transitions.iter().enumerate() {
            let taus: Vec<usize> = outs
                .iter()
                .filter(|(a, _)| a.is_tau())
                .map(|(_, j)| *j)
                .collect();
            if taus.is_empty() {
                continue;
            }
            for (act, k) in outs {
                for &t in &taus {
                    let ok = if act.is_tau() {
                        t == *k
                            || self.transitions[t].iter().any(|(a2, m)| {
                                a2.is_tau()
                                    && self.transitions[*k]
                                        .iter()
                                        .any(|(a3, n)| a3.is_tau() && n == m)
                            })
                    } else {
                        self.transitions[t].iter().any(|(a2, m)| {
                            a2 == act
                                && self.transitions[*k]
                                    .iter()
                                    .any(|(a3, n)| a3.is_tau() && n == m)
                        })
                    };
                    if !ok {
                        return Err(SemanticsError::ConfluenceViolation {
                            state: self.ilts.describe(&self.states[i]),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Explores and evaluates in one call; the common oracle entry point.
pub fn satisfies<I: Ilts>(
    ilts: &I,
    initial: &I::State,
    formula: &Formula,
    bound: usize,
) -> Result<bool, SemanticsError> {
    let ex = Explored::new(ilts, initial, bound)?;
    Ok(ex.eval(formula).contains(&ex.initial()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccs::{parse_ccs, CcsIlts};
    use crate::syntax::{parse_formula, Alphabet, DetSpec};

    fn explored(term: &str) -> (CcsIlts, crate::ccs::CcsProcess) {
        let p = parse_ccs(term).unwrap();
        (CcsIlts::new(DetSpec::none()), p)
    }

    #[test]
    fn weak_step_examples() {
        // weak_step(nil, a) = {} and weak_step(a.nil, a) = {nil}
        let (ilts, nil) = explored("nil");
        let ex = Explored::new(&ilts, &nil, 100).unwrap();
        assert!(ex.weak_step(0, "a").is_empty());

        let (ilts, p) = explored("a.nil");
        let ex = Explored::new(&ilts, &p, 100).unwrap();
        let succ = ex.weak_step(0, "a");
        assert_eq!(succ.len(), 1);
        let s = *succ.iter().next().unwrap();
        assert_eq!(ilts.describe(&ex.states[s]), "nil");
    }

    #[test]
    fn weak_step_abstracts_internal_actions() {
        // p2 = rec X.(r.s.X + (~ut.a.X + ~uf.c.nil)): a is weakly reachable
        // through the internal ~ut step, and leads back to p2's unfolding.
        let (ilts, p2) = explored("rec X.(r.s.X + (~ut.a.X + ~uf.c.nil))");
        let ex = Explored::new(&ilts, &p2, 100).unwrap();
        let succ = ex.weak_step(0, "a");
        assert!(succ.contains(&0), "p2 reachable after weak a-step");
    }

    #[test]
    fn weak_traceable_step_only_abstracts_tau() {
        let (ilts, p) = explored("rec X.(a.X)");
        let ex = Explored::new(&ilts, &p, 100).unwrap();
        let succ = ex.weak_traceable_step(0, &TraceAction::external("a"));
        assert!(succ.contains(&0));

        // Internal steps are observable for the traceable relation.
        let (ilts, q) = explored("~i.a.nil");
        let ex = Explored::new(&ilts, &q, 100).unwrap();
        assert!(ex.weak_traceable_step(0, &TraceAction::external("a")).is_empty());
        assert!(!ex
            .weak_traceable_step(0, &TraceAction::internal("i"))
            .is_empty());
    }

    #[test]
    fn traces_of_p1_bound_two() {
        let (ilts, p1) = explored("rec X.(r.s.X + (a.X + c.nil))");
        let ex = Explored::new(&ilts, &p1, 100).unwrap();
        let got = ex.traces(0, 2);
        let expect = crate::history_of(&["", "r", "r s", "a", "a a", "a r", "a c", "c"]);
        assert_eq!(got, expect);
    }

    #[test]
    fn traces_of_nil_is_epsilon() {
        let (ilts, nil) = explored("nil");
        let ex = Explored::new(&ilts, &nil, 100).unwrap();
        assert_eq!(ex.traces(0, 3), crate::history_of(&[""]));
    }

    #[test]
    fn traces_of_p2_contains_paper_prefixes() {
        let (ilts, p2) = explored("rec X.(r.s.X + (~ut.a.X + ~uf.c.nil))");
        let ex = Explored::new(&ilts, &p2, 100).unwrap();
        let got = ex.traces(0, 4);
        for t in ["", "r", "r s", "r s ~ut", "r s ~ut a", "r s ~uf", "r s ~uf c"] {
            assert!(
                got.contains(&crate::syntax::parse_trace(t).unwrap()),
                "missing trace `{t}`"
            );
        }
    }

    #[test]
    fn eval_tt_ff_and_duality() {
        let (ilts, p1) = explored("rec X.(r.s.X + (a.X + c.nil))");
        let ex = Explored::new(&ilts, &p1, 100).unwrap();
        let all: StateSet = (0..ex.len()).collect();
        assert_eq!(ex.eval(&Formula::Tt), all);
        assert_eq!(ex.eval(&Formula::Ff), StateSet::new());

        let mut alpha = Alphabet::open();
        let boxff = parse_formula("[a]ff", &mut alpha).unwrap();
        let diatt = parse_formula("<a>tt", &mut alpha).unwrap();
        let b = ex.eval(&boxff);
        let d = ex.eval(&diatt);
        assert!(b.is_disjoint(&d));
        assert_eq!(b.union(&d).count(), ex.len());
    }

    #[test]
    fn eval_p1_violates_phi4() {
        let (ilts, p1) = explored("rec X.(r.s.X + (a.X + c.nil))");
        let ex = Explored::new(&ilts, &p1, 100).unwrap();
        let phi4 =
            parse_formula("max X.([r][s]X & ([c]ff | [a]ff))", &mut Alphabet::open()).unwrap();
        assert!(!ex.eval(&phi4).contains(&ex.initial()));
    }

    #[test]
    fn eval_phi2_on_p3_and_p4() {
        let phi2 = parse_formula("[r]([s]ff | [a]ff)", &mut Alphabet::open()).unwrap();
        let (ilts, p3) = explored("r.(s.nil + a.nil) + r.s.nil");
        let ex = Explored::new(&ilts, &p3, 100).unwrap();
        assert!(!ex.eval(&phi2).contains(&0), "p3 violates phi2");

        let (ilts, p4) = explored("r.s.nil + r.a.nil");
        let ex = Explored::new(&ilts, &p4, 100).unwrap();
        assert!(ex.eval(&phi2).contains(&0), "p4 satisfies phi2");
    }

    #[test]
    fn nil_satisfies_box_ff() {
        let (ilts, nil) = explored("nil");
        let phi = parse_formula("[a]ff", &mut Alphabet::open()).unwrap();
        assert!(satisfies(&ilts, &nil, &phi, 10).unwrap());
    }

    #[test]
    fn state_bound_is_enforced() {
        let (ilts, p) = explored("a.b.c.d.nil");
        assert!(matches!(
            Explored::new(&ilts, &p, 2),
            Err(SemanticsError::StateBoundExceeded(2))
        ));
    }

    #[test]
    fn eval_respects_equivalence_and_silent_prefix_preserves_traces() {
        // traces(p) = traces(q) when p silently reaches q (rec unfolding).
        let (ilts, p) = explored("rec X.(a.X + b.nil)");
        let ex = Explored::new(&ilts, &p, 100).unwrap();
        let unfolded = parse_ccs("a.rec X.(a.X + b.nil) + b.nil").unwrap();
        let q = ex.index_of(&unfolded).expect("unfolding explored");
        assert_eq!(ex.traces(0, 3), ex.traces(q, 3));
    }
}
