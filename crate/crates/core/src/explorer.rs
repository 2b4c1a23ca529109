//! One-step semantics, breadth-first state-space exploration, traces.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use itertools::Itertools;
use rayon::prelude::*;

use crate::kernel::*;

/// Resolves the only nondeterminism in the semantics: the order in which
/// simultaneously expired alarms are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Choice {
    Next,
    /// Index into the lexicographic permutations of the pending alarms
    /// (taken in working-list order); 0 is the identity.
    AlarmOrder(u32),
    /// Self-loop on a stuck state, so every path extends to an infinite one.
    Stutter,
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::Next => write!(f, "next"),
            Choice::AlarmOrder(i) => write!(f, "order{i}"),
            Choice::Stutter => write!(f, "stutter"),
        }
    }
}

impl std::str::FromStr for Choice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "next" => Ok(Choice::Next),
            "stutter" => Ok(Choice::Stutter),
            _ => s
                .strip_prefix("order")
                .and_then(|n| n.parse().ok())
                .map(Choice::AlarmOrder)
                .ok_or_else(|| format!("bad choice `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StuckKind {
    /// Every task suspended with nothing recorded and no alarm armed.
    AllIdle,
    /// Stuck with some task not suspended, or in an error state.
    Deadlock,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("no transition: {0:?}")]
    Stuck(StuckKind),
    #[error("choice {0} not enabled")]
    InvalidChoice(Choice),
}

/// Which rule fires next. Rules are tried in a fixed priority order, so at
/// most one applies (up to alarm ordering).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    Alarms(Vec<AlarmId>),
    Schedule,
    MultiActivated,
    Statement(TaskId),
    Dispatch,
    Idle,
    Stuck(StuckKind),
}

fn stuck_kind(k: &Kernel, s: &KernelState) -> StuckKind {
    let all_idle = s.status == Status::Normal
        && k.task_ids().all(|t| {
            let c = s.task(t);
            c.state == TaskState::Suspended && c.pending_activations == 0
        });
    if all_idle {
        StuckKind::AllIdle
    } else {
        StuckKind::Deadlock
    }
}

pub fn next_rule(k: &Kernel, s: &KernelState) -> Rule {
    if s.status != Status::Normal {
        return Rule::Stuck(stuck_kind(k, s));
    }
    let pending = s.pending_alarms();
    if !pending.is_empty() {
        return Rule::Alarms(pending);
    }
    // Re-activation of a terminated task precedes the rescheduling it triggers.
    if k.multiactivation_candidate(s).is_some() {
        return Rule::MultiActivated;
    }
    if s.schedule_pending().is_some() {
        return Rule::Schedule;
    }
    if let Some(r) = s.running {
        return if k.next_op(s, r).is_some() { Rule::Statement(r) } else { Rule::Stuck(StuckKind::Deadlock) };
    }
    if !s.ready.is_empty() {
        return Rule::Dispatch;
    }
    if k.next_expiry_distance(s).is_some() {
        return Rule::Idle;
    }
    Rule::Stuck(stuck_kind(k, s))
}

pub fn stuck(k: &Kernel, s: &KernelState) -> Option<StuckKind> {
    match next_rule(k, s) {
        Rule::Stuck(kind) => Some(kind),
        _ => None,
    }
}

fn factorial(n: usize) -> u32 {
    (1..=n as u32).product()
}

/// Enabled choices in `s`; empty iff `s` is stuck.
pub fn choices(k: &Kernel, s: &KernelState) -> Vec<Choice> {
    match next_rule(k, s) {
        Rule::Stuck(_) => Vec::new(),
        Rule::Alarms(p) if p.len() > 1 => (0..factorial(p.len())).map(Choice::AlarmOrder).collect(),
        _ => vec![Choice::Next],
    }
}

pub fn step(k: &Kernel, s: &KernelState, c: Choice) -> Result<KernelState, StepError> {
    let rule = next_rule(k, s);
    if let Rule::Stuck(kind) = rule {
        return if c == Choice::Stutter { Ok(s.clone()) } else { Err(StepError::Stuck(kind)) };
    }
    let order_ix = match c {
        Choice::Next => 0,
        Choice::AlarmOrder(i) => i,
        Choice::Stutter => return Err(StepError::InvalidChoice(c)),
    };
    if order_ix != 0 && !matches!(&rule, Rule::Alarms(p) if order_ix < factorial(p.len())) {
        return Err(StepError::InvalidChoice(c));
    }
    Ok(match rule {
        Rule::Alarms(pending) => {
            let order: Vec<AlarmId> = pending
                .iter()
                .copied()
                .permutations(pending.len())
                .nth(order_ix as usize)
                .expect("index checked against k!");
            k.handle_alarms(s, &order)
        }
        Rule::Schedule => k.handle_schedule(s),
        Rule::MultiActivated => k.handle_multiactivated(s).expect("candidate exists"),
        Rule::Statement(t) => match k.next_op(s, t) {
            Some(Op::Call(call)) => k.exec_service(s, t, *call),
            Some(Op::TimeInterval(_)) => k.exec_time_interval(s, t),
            _ => unreachable!("programs are normalized"),
        },
        Rule::Dispatch => k.dispatch(s).expect("ready task exists"),
        Rule::Idle => k.idle_advance(s).expect("armed alarm exists"),
        Rule::Stuck(_) => unreachable!(),
    })
}

/// All successors, with the stutter self-loop on stuck states.
pub fn successors(k: &Kernel, s: &KernelState) -> Vec<(Choice, KernelState)> {
    let cs = choices(k, s);
    if cs.is_empty() {
        return vec![(Choice::Stutter, s.clone())];
    }
    cs.into_iter().map(|c| (c, step(k, s, c).expect("enabled choice"))).collect()
}

/// Runs the unique schedule (first choice at every branch) for at most
/// `bound` transitions.
pub fn run(k: &Kernel, init: &KernelState, bound: usize) -> (Trace, Option<StuckKind>) {
    let mut trace = Trace { initial: init.clone(), steps: Vec::new(), lasso_start: None };
    let mut cur = init.clone();
    for _ in 0..bound {
        match choices(k, &cur).first() {
            None => return (trace, stuck(k, &cur)),
            Some(&c) => {
                cur = step(k, &cur, c).expect("enabled choice");
                trace.steps.push(TraceStep { choice: c, state: cur.clone() });
            }
        }
    }
    let end = stuck(k, &cur);
    (trace, end)
}

// -------------------------------------------------------------------------
// Graph exploration

pub type NodeId = usize;

#[derive(Debug, Clone, Copy)]
pub struct ExploreConfig {
    /// Maximum depth, in transitions, of expanded nodes.
    pub bound: usize,
    pub max_states: usize,
    pub workers: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig { bound: 10_000, max_states: 5_000_000, workers: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct Graph {
    pub states: Vec<KernelState>,
    pub edges: Vec<Vec<(Choice, NodeId)>>,
    pub parent: Vec<Option<(NodeId, Choice)>>,
    pub depth: Vec<usize>,
    /// Nodes left unexpanded because of the depth bound or the state cap.
    pub frontier: Vec<NodeId>,
    pub resource_limited: bool,
    /// Depth bound the graph was built with.
    pub bound: usize,
    /// First node (in BFS order) matching the stop predicate.
    pub hit: Option<NodeId>,
}

impl Graph {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Some reachable behaviour was cut off.
    pub fn truncated(&self) -> bool {
        !self.frontier.is_empty()
    }

    pub fn is_expanded(&self, n: NodeId) -> bool {
        !self.edges[n].is_empty()
    }

    /// Shortest path from the initial node to `n`.
    pub fn path_to(&self, n: NodeId) -> Vec<(Choice, NodeId)> {
        let mut out = Vec::new();
        let mut cur = n;
        while let Some((p, c)) = self.parent[cur] {
            out.push((c, cur));
            cur = p;
        }
        out.reverse();
        out
    }

    pub fn trace_to(&self, n: NodeId) -> Trace {
        self.trace_along(&self.path_to(n), None)
    }

    /// Builds a trace from node 0 along `path`; `lasso_start` indexes the
    /// state (0 = initial) where the cycle re-enters.
    pub fn trace_along(&self, path: &[(Choice, NodeId)], lasso_start: Option<usize>) -> Trace {
        Trace {
            initial: self.states[0].clone(),
            steps: path.iter().map(|(c, n)| TraceStep { choice: *c, state: self.states[*n].clone() }).collect(),
            lasso_start,
        }
    }

    pub fn to_dot(&self, k: &Kernel) -> String {
        let mut out = String::from("digraph states {\n  node [shape=box, fontname=monospace];\n");
        for (i, s) in self.states.iter().enumerate() {
            let running = s.running.map(|t| k.info(t).name.as_str()).unwrap_or("-");
            let extra = match stuck(k, s) {
                Some(StuckKind::Deadlock) => ", color=red",
                Some(StuckKind::AllIdle) => ", color=gray",
                None => "",
            };
            let _ = writeln!(
                out,
                "  n{i} [label=\"{i}: c={} run={}\\n{}\"{extra}];",
                s.counter,
                running,
                k.label_string(&s.last_label).replace('"', "'")
            );
        }
        for (i, es) in self.edges.iter().enumerate() {
            for (c, j) in es {
                let _ = writeln!(out, "  n{i} -> n{j} [label=\"{c}\"];");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Level-synchronous BFS from `init`. Successors of a level are computed in
/// parallel, then merged in node order so numbering is deterministic.
/// Exploration stops early at the first new state satisfying `stop`.
pub fn explore<F>(k: &Kernel, init: &KernelState, cfg: &ExploreConfig, stop: F) -> Graph
where
    F: Fn(&KernelState) -> bool,
{
    let mut g = Graph {
        states: vec![init.clone()],
        edges: vec![Vec::new()],
        parent: vec![None],
        depth: vec![0],
        frontier: Vec::new(),
        resource_limited: false,
        bound: cfg.bound,
        hit: None,
    };
    let mut index: HashMap<KernelState, NodeId> = HashMap::new();
    index.insert(init.clone(), 0);
    if stop(init) {
        g.hit = Some(0);
        g.frontier.push(0);
        return g;
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers.max(1)).build().ok();
    let mut level: Vec<NodeId> = vec![0];
    let mut depth = 0;
    while !level.is_empty() {
        if depth >= cfg.bound {
            g.frontier.extend(level.iter().copied().filter(|n| stuck(k, &g.states[*n]).is_none()));
            for n in level.iter().copied().filter(|n| stuck(k, &g.states[*n]).is_some()) {
                g.edges[n].push((Choice::Stutter, n));
            }
            break;
        }
        let expand = |n: &NodeId| successors(k, &g.states[*n]);
        let succs: Vec<Vec<(Choice, KernelState)>> = match (&pool, cfg.workers > 1) {
            (Some(p), true) => p.install(|| level.par_iter().map(expand).collect()),
            _ => level.iter().map(expand).collect(),
        };
        let mut next = Vec::new();
        for (pos, (&n, out)) in level.iter().zip(succs).enumerate() {
            if g.states.len() >= cfg.max_states {
                g.resource_limited = true;
                g.frontier.extend(level[pos..].iter().copied());
                g.frontier.extend(next.iter().copied());
                return g;
            }
            for (c, s) in out {
                let id = match index.get(&s) {
                    Some(&id) => id,
                    None => {
                        let id = g.states.len();
                        let hit = stop(&s);
                        index.insert(s.clone(), id);
                        g.states.push(s);
                        g.edges.push(Vec::new());
                        g.parent.push(Some((n, c)));
                        g.depth.push(depth + 1);
                        next.push(id);
                        if hit && g.hit.is_none() {
                            g.hit = Some(id);
                        }
                        id
                    }
                };
                g.edges[n].push((c, id));
            }
            if g.hit.is_some() {
                g.frontier.extend(level[pos + 1..].iter().copied());
                g.frontier.extend(next.iter().copied());
                return g;
            }
        }
        level = next;
        depth += 1;
    }
    g
}

pub fn build_graph(k: &Kernel, init: &KernelState, cfg: &ExploreConfig) -> Graph {
    explore(k, init, cfg, |_| false)
}

/// Terminal states found by exhaustive search, each with a shortest trace.
#[derive(Debug, Clone)]
pub struct SearchReport {
    /// Stuck states where everything is idle.
    pub finals: Vec<Trace>,
    pub deadlocks: Vec<Trace>,
    pub states: usize,
    /// Some path reached the depth bound without terminating.
    pub truncated: bool,
    pub resource_limited: bool,
}

/// Breadth-first search for terminal states; deadlocks come out in order of
/// increasing witness length.
pub fn search_final(k: &Kernel, init: &KernelState, cfg: &ExploreConfig) -> SearchReport {
    let g = build_graph(k, init, cfg);
    let mut report = SearchReport {
        finals: Vec::new(),
        deadlocks: Vec::new(),
        states: g.len(),
        truncated: g.truncated(),
        resource_limited: g.resource_limited,
    };
    for n in 0..g.len() {
        match stuck(k, &g.states[n]) {
            Some(StuckKind::AllIdle) => report.finals.push(g.trace_to(n)),
            Some(StuckKind::Deadlock) => report.deadlocks.push(g.trace_to(n)),
            None => {}
        }
    }
    report
}

// -------------------------------------------------------------------------
// Traces

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub choice: Choice,
    pub state: KernelState,
}

/// `initial` followed by `steps`. With `lasso_start = Some(j)` the trace is a
/// lasso: the last state equals state `j` (0 = initial) and the suffix
/// from `j` repeats forever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub initial: KernelState,
    pub steps: Vec<TraceStep>,
    pub lasso_start: Option<usize>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// State `i`, where 0 is the initial state.
    pub fn state(&self, i: usize) -> &KernelState {
        if i == 0 {
            &self.initial
        } else {
            &self.steps[i - 1].state
        }
    }

    pub fn last(&self) -> &KernelState {
        self.steps.last().map(|s| &s.state).unwrap_or(&self.initial)
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        std::iter::once(&self.initial.last_label).chain(self.steps.iter().map(|s| &s.state.last_label))
    }

    /// Service calls and alarm actions along the trace, one per line.
    pub fn service_sequence(&self, k: &Kernel) -> Vec<String> {
        self.labels()
            .filter(|l| matches!(l, Label::Service { .. } | Label::AlarmExpiry(_)))
            .map(|l| k.label_string(l))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("initial state differs from boot state")]
    InitialMismatch,
    #[error("replay diverges at step {step}")]
    ReplayMismatch { step: usize },
    #[error("boot failed: {0}")]
    Boot(#[from] KernelError),
}

/// Re-executes `trace` from boot and checks every recorded state.
pub fn replay(k: &Kernel, trace: &Trace) -> Result<(), ReplayError> {
    if k.boot()? != trace.initial {
        return Err(ReplayError::InitialMismatch);
    }
    let mut cur = trace.initial.clone();
    for (i, st) in trace.steps.iter().enumerate() {
        match step(k, &cur, st.choice) {
            Ok(n) if n == st.state => cur = n,
            _ => return Err(ReplayError::ReplayMismatch { step: i + 1 }),
        }
    }
    if let Some(j) = trace.lasso_start {
        if j > trace.len() || trace.state(j) != trace.last() {
            return Err(ReplayError::ReplayMismatch { step: trace.len() });
        }
    }
    Ok(())
}

/// Rebuilds a trace from boot by following `choices`.
pub fn replay_choices(k: &Kernel, choices: &[Choice]) -> Result<Trace, ReplayError> {
    let initial = k.boot()?;
    let mut steps = Vec::new();
    let mut cur = initial.clone();
    for (i, &c) in choices.iter().enumerate() {
        cur = step(k, &cur, c).map_err(|_| ReplayError::ReplayMismatch { step: i + 1 })?;
        steps.push(TraceStep { choice: c, state: cur.clone() });
    }
    Ok(Trace { initial, steps, lasso_start: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceFormat {
    #[default]
    Text,
    Machine,
}

/// Renders `trace`. The text form lists `step, choice, label, state hash`
/// and then full snapshots; the machine form is one `key=value` record per step.
pub fn render_trace(k: &Kernel, trace: &Trace, format: TraceFormat) -> String {
    let mut out = String::new();
    let rows = (0..=trace.len()).map(|i| {
        let choice = if i == 0 { "boot".to_string() } else { trace.steps[i - 1].choice.to_string() };
        let s = trace.state(i);
        (i, choice, k.label_string(&s.last_label), k.state_hash(s), s.counter)
    });
    match format {
        TraceFormat::Text => {
            for (i, choice, label, hash, counter) in rows {
                let _ = writeln!(out, "{i:>5}  {choice:<8} {hash}  c={counter:<5} {label}");
            }
            if let Some(j) = trace.lasso_start {
                let _ = writeln!(out, "loop back to step {j}");
            }
            out.push_str("\nsnapshots\n");
            for i in 0..=trace.len() {
                let _ = writeln!(out, "-- step {i}");
                out.push_str(&k.snapshot(trace.state(i)));
            }
        }
        TraceFormat::Machine => {
            for (i, choice, label, hash, counter) in rows {
                let _ = writeln!(out, "step={i} choice={choice} hash={hash} counter={counter} label={label:?}");
            }
            if let Some(j) = trace.lasso_start {
                let _ = writeln!(out, "lasso_start={j}");
            }
        }
    }
    out
}

/// Extracts the choice column from a rendered trace (either format).
pub fn parse_trace_choices(text: &str) -> Result<Vec<Choice>, String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line == "snapshots" {
            break;
        }
        if let Some(rest) = line.strip_prefix("step=") {
            let choice = rest.split_whitespace().nth(1).and_then(|c| c.strip_prefix("choice="));
            match choice {
                Some("boot") => {}
                Some(c) => out.push(c.parse()?),
                None => return Err(format!("malformed trace line `{line}`")),
            }
            continue;
        }
        let mut cols = line.split_whitespace();
        if let (Some(n), Some(c)) = (cols.next(), cols.next()) {
            if n.parse::<usize>().is_ok() && c != "boot" {
                out.push(c.parse()?);
            }
        }
    }
    Ok(out)
}
