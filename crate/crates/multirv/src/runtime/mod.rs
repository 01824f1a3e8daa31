//! Executing-monitor semantics, instrumentation, and the multi-run
//! aggregation loop.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{reject, Verdict};
use crate::semantics::Ilts;
use crate::syntax::{trace_to_string, Action, DetSpec, Monitor, TraceAction};
use crate::{History, Trace};

/// An executing monitor: the trace accrued since the start of the run and
/// the current monitor state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutingMonitor {
    pub accrued: Trace,
    pub mon: Monitor,
}

impl ExecutingMonitor {
    pub fn start(mon: Monitor) -> Self {
        ExecutingMonitor { accrued: Vec::new(), mon }
    }
}

/// Input offered to a monitor step: an external action or an autonomous
/// silent move.
#[derive(Debug, Clone, Copy)]
pub enum MonInput<'a> {
    Ext(&'a str),
    Tau,
}

/// Tags for the silent monitor rules, used to report which path a run took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TauKind {
    /// A verdict was discarded because the accrued trace is already known.
    DiscardKnown,
    /// A verdict superseded its parallel counterpart (trace is new).
    PromoteNew,
    Unfold,
    Context,
}

fn tau_successors(t: &Trace, m: &Monitor, hist: &History) -> Vec<(TauKind, Monitor)> {
    let mut out: Vec<(TauKind, Monitor)> = Vec::new();
    let mut push = |k: TauKind, m: Monitor| {
        if !out.iter().any(|(k2, m2)| *k2 == k && *m2 == m) {
            out.push((k, m));
        }
    };
    match m {
        Monitor::ParAnd(l, r) | Monitor::ParOr(l, r) => {
            let rebuild = |a: Monitor, b: Monitor| match m {
                Monitor::ParAnd(..) => Monitor::par_and(a, b),
                _ => Monitor::par_or(a, b),
            };
            if **l == Monitor::No {
                if hist.contains(t) {
                    push(TauKind::DiscardKnown, (**r).clone());
                } else {
                    push(TauKind::PromoteNew, Monitor::No);
                }
            }
            if **r == Monitor::No {
                if hist.contains(t) {
                    push(TauKind::DiscardKnown, (**l).clone());
                } else {
                    push(TauKind::PromoteNew, Monitor::No);
                }
            }
            for (_, l2) in tau_successors(t, l, hist) {
                push(TauKind::Context, rebuild(l2, (**r).clone()));
            }
            for (_, r2) in tau_successors(t, r, hist) {
                push(TauKind::Context, rebuild((**l).clone(), r2));
            }
        }
        Monitor::Rec(..) => {
            push(TauKind::Unfold, m.unfold().expect("rec unfolds"));
        }
        _ => {}
    }
    out
}

fn ext_successors(t: &Trace, m: &Monitor, label: &str, hist: &History) -> Vec<Monitor> {
    match m {
        Monitor::End => vec![Monitor::End],
        Monitor::Act(a, inner) if a == label => vec![(**inner).clone()],
        Monitor::ParAnd(l, r) | Monitor::ParOr(l, r) => {
            let rebuild = |a: Monitor, b: Monitor| match m {
                Monitor::ParAnd(..) => Monitor::par_and(a, b),
                _ => Monitor::par_or(a, b),
            };
            let ls = ext_successors(t, l, label, hist);
            let rs = ext_successors(t, r, label, hist);
            let l_tau = !tau_successors(t, l, hist).is_empty();
            let r_tau = !tau_successors(t, r, hist).is_empty();
            let mut out: Vec<Monitor> = Vec::new();
            let mut push = |m: Monitor| {
                if !out.contains(&m) {
                    out.push(m);
                }
            };
            for l2 in &ls {
                for r2 in &rs {
                    push(rebuild(l2.clone(), r2.clone()));
                }
            }
            // A sub-monitor that can neither analyse the action nor move
            // silently is discarded, unless it is a verdict.
            if **r != Monitor::No && !ls.is_empty() && rs.is_empty() && !r_tau {
                ls.into_iter().for_each(&mut push);
            }
            if **l != Monitor::No && !rs.is_empty() && ls.is_empty() && !l_tau {
                rs.into_iter().for_each(&mut push);
            }
            out
        }
        _ => Vec::new(),
    }
}

/// All successors of an executing monitor on the given input, under the
/// history-indexed monitor semantics. An empty result means the monitor is
/// stuck on that input.
pub fn monitor_step(em: &ExecutingMonitor, hist: &History, input: MonInput) -> Vec<ExecutingMonitor> {
    match input {
        MonInput::Tau => tau_successors(&em.accrued, &em.mon, hist)
            .into_iter()
            .map(|(_, m)| ExecutingMonitor { accrued: em.accrued.clone(), mon: m })
            .collect(),
        MonInput::Ext(label) => {
            let mut accrued = em.accrued.clone();
            accrued.push(TraceAction::external(label));
            ext_successors(&em.accrued, &em.mon, label, hist)
                .into_iter()
                .map(|m| ExecutingMonitor { accrued: accrued.clone(), mon: m })
                .collect()
        }
    }
}

/// A monitored system: the system under scrutiny, the executing monitor,
/// and the history carried over from earlier runs.
#[derive(Debug, Clone)]
pub struct MonitoredSystem<S> {
    pub sus: S,
    pub exec: ExecutingMonitor,
    pub hist: History,
}

/// Which instrumentation rule a transition instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstrRule {
    /// Aggregate the accrued trace and become inconclusive.
    No,
    /// The monitor cannot follow the system's action and terminates.
    Ter,
    /// The system moves silently on its own.
    AsS,
    /// The system performs an internal action, recorded in the trace.
    AsI,
    /// The monitor moves silently on its own.
    AsM,
    /// System and monitor analyse an external action together.
    Mon,
}

impl std::fmt::Display for InstrRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            InstrRule::No => "iNo",
            InstrRule::Ter => "iTer",
            InstrRule::AsS => "iAsS",
            InstrRule::AsI => "iAsI",
            InstrRule::AsM => "iAsM",
            InstrRule::Mon => "iMon",
        };
        write!(f, "{s}")
    }
}

/// One enabled instrumentation transition.
#[derive(Debug, Clone)]
pub struct InstrStep<S> {
    pub rule: InstrRule,
    /// The transition's visible label (`tau` for all silent rules).
    pub label: Action,
    pub next: MonitoredSystem<S>,
    /// Set when the step aggregated a trace (rule `iNo`).
    pub aggregated: Option<Trace>,
    /// True when the underlying monitor move discarded a verdict on an
    /// already-known trace (the overlap-handling silent rule).
    pub discarded_known_verdict: bool,
}

/// Enumerates every enabled instrumentation transition of a monitored
/// system, in deterministic order. When the monitor sits at the rejection
/// verdict, aggregation is the only enabled rule; it requires the accrued
/// trace to be new, so a rejected re-run of a known trace is quiescent.
pub fn instr_transitions<I: Ilts>(ilts: &I, ms: &MonitoredSystem<I::State>) -> Vec<InstrStep<I::State>> {
    let mut out = Vec::new();
    if ms.exec.mon == Monitor::No {
        if !ms.hist.contains(&ms.exec.accrued) {
            let mut hist = ms.hist.clone();
            hist.insert(ms.exec.accrued.clone());
            out.push(InstrStep {
                rule: InstrRule::No,
                label: Action::Tau,
                next: MonitoredSystem {
                    sus: ms.sus.clone(),
                    exec: ExecutingMonitor {
                        accrued: ms.exec.accrued.clone(),
                        mon: Monitor::End,
                    },
                    hist,
                },
                aggregated: Some(ms.exec.accrued.clone()),
                discarded_known_verdict: false,
            });
        }
        return out;
    }

    let sus_steps = ilts.step(&ms.sus);
    let mon_taus = tau_successors(&ms.exec.accrued, &ms.exec.mon, &ms.hist);

    for (act, sus2) in &sus_steps {
        match act {
            Action::Tau => out.push(InstrStep {
                rule: InstrRule::AsS,
                label: Action::Tau,
                next: MonitoredSystem {
                    sus: sus2.clone(),
                    exec: ms.exec.clone(),
                    hist: ms.hist.clone(),
                },
                aggregated: None,
                discarded_known_verdict: false,
            }),
            Action::Step(t) if t.is_internal() => {
                let mut accrued = ms.exec.accrued.clone();
                accrued.push(t.clone());
                out.push(InstrStep {
                    rule: InstrRule::AsI,
                    label: Action::Tau,
                    next: MonitoredSystem {
                        sus: sus2.clone(),
                        exec: ExecutingMonitor { accrued, mon: ms.exec.mon.clone() },
                        hist: ms.hist.clone(),
                    },
                    aggregated: None,
                    discarded_known_verdict: false,
                });
            }
            Action::Step(t) => {
                let succs = monitor_step(&ms.exec, &ms.hist, MonInput::Ext(&t.label));
                if succs.is_empty() && mon_taus.is_empty() {
                    // Transparency: the monitor must not block the system.
                    let mut accrued = ms.exec.accrued.clone();
                    accrued.push(t.clone());
                    out.push(InstrStep {
                        rule: InstrRule::Ter,
                        label: act.clone(),
                        next: MonitoredSystem {
                            sus: sus2.clone(),
                            exec: ExecutingMonitor { accrued, mon: Monitor::End },
                            hist: ms.hist.clone(),
                        },
                        aggregated: None,
                        discarded_known_verdict: false,
                    });
                } else {
                    for em in succs {
                        out.push(InstrStep {
                            rule: InstrRule::Mon,
                            label: act.clone(),
                            next: MonitoredSystem {
                                sus: sus2.clone(),
                                exec: em,
                                hist: ms.hist.clone(),
                            },
                            aggregated: None,
                            discarded_known_verdict: false,
                        });
                    }
                }
            }
        }
    }

    for (kind, m2) in mon_taus {
        out.push(InstrStep {
            rule: InstrRule::AsM,
            label: Action::Tau,
            next: MonitoredSystem {
                sus: ms.sus.clone(),
                exec: ExecutingMonitor { accrued: ms.exec.accrued.clone(), mon: m2 },
                hist: ms.hist.clone(),
            },
            aggregated: None,
            discarded_known_verdict: kind == TauKind::DiscardKnown,
        });
    }
    out
}

/// Scheduler bias for resolving instrumentation nondeterminism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bias {
    #[default]
    Uniform,
    /// Prefer steps whose next accrued trace is not a prefix of any history
    /// trace.
    Explore,
}

impl std::str::FromStr for Bias {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Bias::Uniform),
            "explore" => Ok(Bias::Explore),
            other => Err(format!("unknown bias `{other}`")),
        }
    }
}

pub struct Scheduler {
    rng: ChaCha8Rng,
    pub bias: Bias,
}

impl Scheduler {
    pub fn new(seed: u64, bias: Bias) -> Self {
        Scheduler { rng: ChaCha8Rng::seed_from_u64(seed), bias }
    }

    fn choose<S: Clone>(&mut self, steps: &[InstrStep<S>], hist: &History) -> usize {
        assert!(!steps.is_empty());
        match self.bias {
            Bias::Uniform => self.rng.gen_range(0..steps.len()),
            Bias::Explore => {
                let novel: Vec<usize> = steps
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| {
                        let acc = &s.next.exec.accrued;
                        !hist.iter().any(|t| t.starts_with(acc))
                    })
                    .map(|(i, _)| i)
                    .collect();
                if novel.is_empty() {
                    self.rng.gen_range(0..steps.len())
                } else {
                    novel[self.rng.gen_range(0..novel.len())]
                }
            }
        }
    }
}

/// How a single monitored run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    /// A new trace was added to the history; monitoring stopped there.
    Aggregated,
    /// Neither the system nor the monitor could move.
    Quiescent,
    /// The step budget ran out; reported, not fatal.
    Truncated,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub index: usize,
    pub trace: Trace,
    pub aggregated: bool,
    pub status: RunStatus,
}

/// Runs one monitored execution from `initial` with the given carried-over
/// history. Stops as soon as a trace is aggregated (the clear cut-off
/// point), at quiescence, or at the step budget.
pub fn run_once<I: Ilts>(
    ilts: &I,
    initial: &I::State,
    mon: &Monitor,
    hist: &History,
    scheduler: &mut Scheduler,
    max_steps: usize,
) -> (History, Trace, RunStatus) {
    assert!(max_steps >= 1);
    let mut ms = MonitoredSystem {
        sus: initial.clone(),
        exec: ExecutingMonitor::start(mon.clone()),
        hist: hist.clone(),
    };
    for _ in 0..max_steps {
        let steps = instr_transitions(ilts, &ms);
        if steps.is_empty() {
            return (ms.hist, ms.exec.accrued, RunStatus::Quiescent);
        }
        let idx = scheduler.choose(&steps, hist);
        let step = steps.into_iter().nth(idx).unwrap();
        let aggregated = step.aggregated.is_some();
        ms = step.next;
        if aggregated {
            return (ms.hist, ms.exec.accrued, RunStatus::Aggregated);
        }
    }
    (ms.hist, ms.exec.accrued, RunStatus::Truncated)
}

/// A full multi-run monitoring session report.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub seed: u64,
    pub runs: Vec<RunRecord>,
    pub history: History,
    pub verdict: Option<Verdict>,
}

impl RunReport {
    /// Line-oriented serialization: one `run` line per execution followed by
    /// the final history block.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed {}", self.seed);
        for r in &self.runs {
            let _ = writeln!(
                out,
                "run {} trace {} aggregated {}",
                r.index,
                trace_to_string(&r.trace),
                if r.aggregated { "yes" } else { "no" }
            );
        }
        let _ = writeln!(out, "history {{");
        for t in &self.history {
            let _ = writeln!(out, "{}", trace_to_string(t));
        }
        let _ = writeln!(out, "}}");
        out
    }
}

/// Alternates monitored runs and history analysis until the history is
/// rejected or the run budget is exhausted. Histories grow along a
/// subset chain, at most one new trace per run.
pub fn run_multi<I: Ilts>(
    ilts: &I,
    initial: &I::State,
    mon: &Monitor,
    det: &DetSpec,
    max_runs: usize,
    max_steps: usize,
    seed: u64,
    bias: Bias,
) -> RunReport {
    assert!(max_runs >= 1);
    let mut scheduler = Scheduler::new(seed, bias);
    let mut hist = History::new();
    let mut runs = Vec::new();
    let mut verdict = None;
    for index in 1..=max_runs {
        let before = hist.len();
        let (h2, trace, status) = run_once(ilts, initial, mon, &hist, &mut scheduler, max_steps);
        hist = h2;
        let aggregated = hist.len() > before;
        runs.push(RunRecord { index, trace, aggregated, status });
        if aggregated {
            let v = reject(&hist, mon, det);
            if v.rejected {
                verdict = Some(v);
                break;
            }
        }
    }
    RunReport { seed, runs, history: hist, verdict }
}

/// Runs several speculative sessions against the same input history in
/// parallel and merges their aggregations by set union, which preserves all
/// soundness properties by width irrevocability.
pub fn parallel_probe<I>(
    ilts: &I,
    initial: &I::State,
    mon: &Monitor,
    hist: &History,
    seeds: &[u64],
    max_steps: usize,
    bias: Bias,
) -> History
where
    I: Ilts + Sync,
    I::State: Send + Sync,
{
    let results = crate::par::map(seeds.to_vec(), |seed| {
        let mut scheduler = Scheduler::new(seed, bias);
        let (h, _, _) = run_once(ilts, initial, mon, hist, &mut scheduler, max_steps);
        h
    });
    let mut merged = hist.clone();
    for h in results {
        merged.extend(h);
    }
    merged
}

/// Sequential twin of [`parallel_probe`] for benchmarking the two paths.
pub fn parallel_probe_seq<I: Ilts>(
    ilts: &I,
    initial: &I::State,
    mon: &Monitor,
    hist: &History,
    seeds: &[u64],
    max_steps: usize,
    bias: Bias,
) -> History {
    let mut merged = hist.clone();
    for &seed in seeds {
        let mut scheduler = Scheduler::new(seed, bias);
        let (h, _, _) = run_once(ilts, initial, mon, hist, &mut scheduler, max_steps);
        merged.extend(h);
    }
    merged
}

/// Exhaustively enumerates the traces that one run could aggregate from the
/// given history, over every scheduler resolution, bounded by accrued-trace
/// length. Returns each aggregatable trace together with a flag telling
/// whether some aggregating path discarded a verdict on an already-known
/// trace along the way (the overlap-handling behaviour).
pub fn aggregatable_traces<I: Ilts>(
    ilts: &I,
    initial: &I::State,
    mon: &Monitor,
    hist: &History,
    max_trace_len: usize,
) -> BTreeMap<Trace, bool> {
    use std::collections::HashSet;

    let mut found: BTreeMap<Trace, bool> = BTreeMap::new();
    let mut visited: HashSet<(I::Key, Trace, Monitor, bool)> = HashSet::new();
    // Worklist of (state, used-overlap-discard) pairs; the flag is monotone
    // along a path, so each configuration is visited at most twice.
    let mut stack = vec![(
        MonitoredSystem {
            sus: initial.clone(),
            exec: ExecutingMonitor::start(mon.clone()),
            hist: hist.clone(),
        },
        false,
    )];
    while let Some((ms, overlap)) = stack.pop() {
        if ms.exec.accrued.len() > max_trace_len {
            continue;
        }
        let key = (
            ilts.canon_key(&ms.sus),
            ms.exec.accrued.clone(),
            ms.exec.mon.canon(),
            overlap,
        );
        if !visited.insert(key) {
            continue;
        }
        for step in instr_transitions(ilts, &ms) {
            if let Some(trace) = step.aggregated {
                let entry = found.entry(trace).or_insert(false);
                *entry = *entry || overlap;
            } else {
                stack.push((step.next, overlap || step.discarded_known_verdict));
            }
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccs::{parse_ccs, CcsIlts};
    use crate::history_of;
    use crate::syntax::{parse_monitor, Alphabet};

    fn mon(s: &str) -> Monitor {
        parse_monitor(s, &mut Alphabet::open()).unwrap()
    }

    fn trace(s: &str) -> Trace {
        crate::syntax::parse_trace(s).unwrap()
    }

    #[test]
    fn end_accrues_any_external_action() {
        let em = ExecutingMonitor { accrued: trace("r"), mon: Monitor::End };
        let succ = monitor_step(&em, &History::new(), MonInput::Ext("a"));
        assert_eq!(succ, vec![ExecutingMonitor { accrued: trace("r a"), mon: Monitor::End }]);
    }

    #[test]
    fn verdict_discard_and_promote() {
        // (t, no (+) n) with t not in H silently becomes no; with t in H it
        // becomes n.
        let n = mon("a.no");
        let em = ExecutingMonitor {
            accrued: trace("x"),
            mon: Monitor::par_or(Monitor::No, n.clone()),
        };
        let fresh = monitor_step(&em, &History::new(), MonInput::Tau);
        assert_eq!(fresh.len(), 1);
        assert_eq!(fresh[0].mon, Monitor::No);

        let known = monitor_step(&em, &history_of(&["x"]), MonInput::Tau);
        assert_eq!(known.len(), 1);
        assert_eq!(known[0].mon, n);
    }

    #[test]
    fn tau_race_absence_on_sample_states() {
        // Whenever a tau rule is enabled, no external rule is.
        let states = [
            mon("rec X.(a.X)"),
            Monitor::par_or(Monitor::No, mon("a.no")),
            Monitor::par_and(mon("rec X.(a.X)"), mon("b.no")),
        ];
        for m in states {
            let em = ExecutingMonitor { accrued: Vec::new(), mon: m.clone() };
            let taus = monitor_step(&em, &History::new(), MonInput::Tau);
            if !taus.is_empty() {
                for label in ["a", "b"] {
                    assert!(
                        monitor_step(&em, &History::new(), MonInput::Ext(label)).is_empty(),
                        "tau-enabled state `{m}` must not step on `{label}`"
                    );
                }
            }
        }
    }

    #[test]
    fn instrumentation_reaches_verdict_on_p2() {
        // The nine-step path: the monitored p2 aggregates r s ~ut a.
        let p2 = parse_ccs("rec X.(r.s.X + (~ut.a.X + ~uf.c.nil))").unwrap();
        let ilts = CcsIlts::new(crate::syntax::DetSpec::from_labels(["r", "s"]));
        let m1 = mon("rec X.(r.s.X (*) (a.no (+) c.no))");
        let agg = aggregatable_traces(&ilts, &p2, &m1, &History::new(), 4);
        assert!(agg.contains_key(&trace("r s ~ut a")));
        assert!(agg.contains_key(&trace("r s ~uf c")));
    }

    #[test]
    fn no_monitor_aggregates_epsilon_immediately() {
        let p = parse_ccs("a.nil").unwrap();
        let ilts = CcsIlts::new(crate::syntax::DetSpec::none());
        let ms = MonitoredSystem {
            sus: p,
            exec: ExecutingMonitor::start(Monitor::No),
            hist: History::new(),
        };
        let steps = instr_transitions(&ilts, &ms);
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].rule, InstrRule::No);
        assert_eq!(steps[0].aggregated, Some(Vec::new()));
        assert!(steps[0].next.hist.contains(&Vec::new()));
    }

    #[test]
    fn end_monitor_never_aggregates() {
        let p = parse_ccs("a.nil").unwrap();
        let ilts = CcsIlts::new(crate::syntax::DetSpec::none());
        let mut sch = Scheduler::new(7, Bias::Uniform);
        let (h, _, _) = run_once(&ilts, &p, &Monitor::End, &History::new(), &mut sch, 50);
        assert!(h.is_empty());
    }

    #[test]
    fn iter_fires_when_monitor_is_stuck() {
        // Monitor b.no cannot analyse `a` and has no silent move: the
        // instrumentation lets the system proceed and the monitor ends.
        let p = parse_ccs("a.nil").unwrap();
        let ilts = CcsIlts::new(crate::syntax::DetSpec::none());
        let ms = MonitoredSystem {
            sus: p,
            exec: ExecutingMonitor::start(mon("b.no")),
            hist: History::new(),
        };
        let steps = instr_transitions(&ilts, &ms);
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].rule, InstrRule::Ter);
        assert_eq!(steps[0].next.exec.mon, Monitor::End);
        assert_eq!(steps[0].next.exec.accrued, trace("a"));
    }
}
