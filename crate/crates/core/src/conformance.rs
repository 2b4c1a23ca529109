//! The six-property catalog, property checks over explored graphs, and the
//! adjudication of verification results against kernel test results.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::explorer::{build_graph, Choice, ExploreConfig, Graph, NodeId, Trace};
use crate::kernel::{
    Action, ActionOutcome, Kernel, KernelError, Label, Op, Options, Service, StatusCode, TaskId, TaskState, TimeMode,
};
use crate::ltl::{model_check, Ltl, Prop, Verdict};
use crate::oil::KernelConfig;
use crate::task_lang::TaskBodies;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PropertyId {
    DF,
    ME,
    PIF,
    SF,
    PE,
    MAF,
}

impl PropertyId {
    pub const ALL: [PropertyId; 6] =
        [PropertyId::DF, PropertyId::ME, PropertyId::PIF, PropertyId::SF, PropertyId::PE, PropertyId::MAF];

    pub fn name(self) -> &'static str {
        match self {
            PropertyId::DF => "DF",
            PropertyId::ME => "ME",
            PropertyId::PIF => "PIF",
            PropertyId::SF => "SF",
            PropertyId::PE => "PE",
            PropertyId::MAF => "MAF",
        }
    }
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PropertyId {
    type Err = String;

    /// Accepts the six ids plus the aliases `DE` (deadlock) and `EX` (exclusion).
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "DF" | "DE" => Ok(PropertyId::DF),
            "ME" | "EX" => Ok(PropertyId::ME),
            "PIF" => Ok(PropertyId::PIF),
            "SF" => Ok(PropertyId::SF),
            "PE" => Ok(PropertyId::PE),
            "MAF" => Ok(PropertyId::MAF),
            other => Err(format!("unknown property `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Std,
    App,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FinalSearch,
    Invariant,
    Ltl,
    Monitor,
}

#[derive(Debug, Clone, Copy)]
pub struct PropertySpec {
    pub id: PropertyId,
    pub origin: Origin,
    pub method: Method,
    pub description: &'static str,
}

pub fn catalog() -> [PropertySpec; 6] {
    use Method::*;
    use Origin::*;
    [
        PropertySpec {
            id: PropertyId::DF,
            origin: Std,
            method: FinalSearch,
            description: "no reachable state in which no task can ever run again",
        },
        PropertySpec { id: PropertyId::ME, origin: Std, method: Invariant, description: "at most one task is running" },
        PropertySpec {
            id: PropertyId::PIF,
            origin: Std,
            method: Invariant,
            description: "once signals settle, no ready task outranks a preemptible running task",
        },
        PropertySpec {
            id: PropertyId::SF,
            origin: Std,
            method: Ltl,
            description: "every wait for an event is eventually answered by setting it",
        },
        PropertySpec {
            id: PropertyId::PE,
            origin: App,
            method: Monitor,
            description: "a periodically activated task completes once per period",
        },
        PropertySpec {
            id: PropertyId::MAF,
            origin: App,
            method: Ltl,
            description: "a single-activation task is never activated while active",
        },
    ]
}

pub fn spec(id: PropertyId) -> PropertySpec {
    catalog().into_iter().find(|s| s.id == id).expect("catalog covers every id")
}

#[derive(Debug, Clone)]
pub enum PropertyResult {
    Pass,
    /// No violation in the explored part of a truncated graph.
    BoundedPass {
        bound: usize,
    },
    Fail {
        witness: Trace,
    },
    /// The state cap was hit before any violation was found.
    ResourceLimit {
        states: usize,
    },
}

impl PropertyResult {
    pub fn outcome(&self) -> Option<Outcome> {
        match self {
            PropertyResult::Pass | PropertyResult::BoundedPass { .. } => Some(Outcome::Pass),
            PropertyResult::Fail { .. } => Some(Outcome::Fail),
            PropertyResult::ResourceLimit { .. } => None,
        }
    }

    pub fn witness(&self) -> Option<&Trace> {
        match self {
            PropertyResult::Fail { witness } => Some(witness),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropertyOutcome {
    pub id: PropertyId,
    pub result: PropertyResult,
    /// Formula or monitor actually checked, for the report.
    pub detail: String,
}

/// Checks properties of one application. DF runs on the strict semantics
/// (an error status stops execution); the others run on the lenient one,
/// where errors are recorded and execution goes on.
pub struct Verifier {
    pub strict: Kernel,
    pub lenient: Kernel,
    pub explore: ExploreConfig,
    strict_graph: OnceLock<Graph>,
    lenient_graph: OnceLock<Graph>,
}

impl Verifier {
    pub fn new(
        config: &KernelConfig,
        bodies: &TaskBodies,
        explore: ExploreConfig,
        time_mode: TimeMode,
    ) -> Result<Verifier, KernelError> {
        let base = Options { time_mode, ..Options::default() };
        let strict = Kernel::new(config, bodies, Options { strict: true, ..base })?;
        let lenient = strict.with_options(Options { strict: false, ..base });
        strict.boot()?;
        Ok(Verifier { strict, lenient, explore, strict_graph: OnceLock::new(), lenient_graph: OnceLock::new() })
    }

    pub fn strict_graph(&self) -> &Graph {
        self.strict_graph
            .get_or_init(|| build_graph(&self.strict, &self.strict.boot().expect("checked in new"), &self.explore))
    }

    pub fn lenient_graph(&self) -> &Graph {
        self.lenient_graph
            .get_or_init(|| build_graph(&self.lenient, &self.lenient.boot().expect("checked in new"), &self.explore))
    }

    pub fn check_all(&self, ids: &[PropertyId]) -> Vec<PropertyOutcome> {
        // Build both graphs up front so parallel checks share them.
        if ids.contains(&PropertyId::DF) {
            self.strict_graph();
        }
        if ids.iter().any(|i| *i != PropertyId::DF) {
            self.lenient_graph();
        }
        ids.par_iter().map(|id| self.check(*id)).collect()
    }

    pub fn check(&self, id: PropertyId) -> PropertyOutcome {
        let (result, detail) = match id {
            PropertyId::DF => {
                let f = Ltl::globally(Ltl::not(Ltl::atom(Prop::Deadlocked)));
                (self.ltl(&self.strict, self.strict_graph(), &f), format!("{f} (strict semantics)"))
            }
            PropertyId::ME => {
                let g = self.lenient_graph();
                let bad = |_: &Kernel, n: NodeId| {
                    let s = &g.states[n];
                    let running = s.tasks.iter().filter(|c| c.state == TaskState::Running).count();
                    running > 1 || (running == 1) != s.running.is_some()
                };
                (self.scan(g, bad), "invariant: at most one running task".into())
            }
            PropertyId::PIF => {
                let g = self.lenient_graph();
                let bad = |k: &Kernel, n: NodeId| k.priority_soundness_violation(&g.states[n]).is_some();
                (self.scan(g, bad), "invariant: quiescent states respect priorities".into())
            }
            PropertyId::SF => {
                let pairs = wait_pairs(&self.lenient);
                let formulas: Vec<Ltl> = pairs
                    .iter()
                    .map(|(t, e)| {
                        let wait = Prop::Wait { event: e.clone(), task: t.clone() };
                        let set = Prop::Set { event: e.clone(), task: t.clone() };
                        Ltl::globally(Ltl::implies(Ltl::atom(wait), Ltl::finally(Ltl::atom(set))))
                    })
                    .collect();
                let detail = if formulas.is_empty() {
                    "no task waits for an event".to_string()
                } else {
                    formulas.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; ")
                };
                let mut result = PropertyResult::Pass;
                for f in &formulas {
                    match self.ltl(&self.lenient, self.lenient_graph(), f) {
                        PropertyResult::Pass => {}
                        other @ PropertyResult::BoundedPass { .. } => result = other,
                        other => {
                            result = other;
                            break;
                        }
                    }
                }
                if formulas.is_empty() {
                    result = self.bounded(self.lenient_graph());
                }
                (result, detail)
            }
            PropertyId::PE => {
                let g = self.lenient_graph();
                let result = match periodic_violation(&self.lenient, g) {
                    Some(w) => PropertyResult::Fail { witness: w },
                    None => self.bounded(g),
                };
                (result, "monitor: one completion between consecutive periodic activations".into())
            }
            PropertyId::MAF => {
                let single: Vec<Ltl> = self
                    .lenient
                    .tasks
                    .iter()
                    .filter(|t| t.max_activations == 1)
                    .map(|t| Ltl::atom(Prop::Limit(t.name.clone())))
                    .collect();
                match single.into_iter().reduce(Ltl::or) {
                    Some(any) => {
                        let f = Ltl::globally(Ltl::not(any));
                        (self.ltl(&self.lenient, self.lenient_graph(), &f), f.to_string())
                    }
                    None => (self.bounded(self.lenient_graph()), "no single-activation task".into()),
                }
            }
        };
        PropertyOutcome { id, result, detail }
    }

    fn bounded(&self, g: &Graph) -> PropertyResult {
        if g.resource_limited {
            PropertyResult::ResourceLimit { states: g.len() }
        } else if g.truncated() {
            PropertyResult::BoundedPass { bound: g.bound }
        } else {
            PropertyResult::Pass
        }
    }

    fn ltl(&self, k: &Kernel, g: &Graph, f: &Ltl) -> PropertyResult {
        match model_check(k, g, f).expect("catalog formulas only name declared objects") {
            Verdict::Violated { trace } => PropertyResult::Fail { witness: trace },
            _ => self.bounded(g),
        }
    }

    /// First node in BFS order satisfying `bad`, as a shortest witness.
    fn scan(&self, g: &Graph, bad: impl Fn(&Kernel, NodeId) -> bool) -> PropertyResult {
        match (0..g.len()).find(|n| bad(&self.lenient, *n)) {
            Some(n) => PropertyResult::Fail { witness: g.trace_to(n) },
            None => self.bounded(g),
        }
    }
}

/// (extended task, event) pairs such that the task's body waits for the event.
pub fn wait_pairs(k: &Kernel) -> Vec<(String, String)> {
    fn walk(ops: &[Op], out: &mut Vec<usize>) {
        for op in ops {
            match op {
                Op::Call(Service::WaitEvent(e)) => {
                    if !out.contains(&e.index()) {
                        out.push(e.index());
                    }
                }
                Op::Loop(body) => walk(body, out),
                _ => {}
            }
        }
    }
    let mut pairs = Vec::new();
    for t in k.tasks.iter().filter(|t| t.extended) {
        let mut evs = Vec::new();
        walk(&t.body, &mut evs);
        pairs.extend(evs.into_iter().map(|e| (t.name.clone(), k.events[e].clone())));
    }
    pairs
}

/// Per monitored task: whether a period window is open, and completions
/// seen in it (saturating at 2).
type MonitorState = Vec<(bool, u8)>;

/// Searches for a path on which some task activated by a cyclic alarm does
/// not complete exactly once between two consecutive successful activations
/// by that alarm. Refused activations are left to MAF.
pub fn periodic_violation(k: &Kernel, g: &Graph) -> Option<Trace> {
    let mut monitored: Vec<TaskId> = Vec::new();
    for a in &k.alarms {
        if let Action::ActivateTask(t) = a.action {
            if !monitored.contains(&t) {
                monitored.push(t);
            }
        }
    }
    if monitored.is_empty() {
        return None;
    }
    let update = |m: &mut MonitorState, n: NodeId| -> bool {
        let s = &g.states[n];
        match &s.last_label {
            Label::AlarmExpiry(firings) => {
                for (a, o) in firings {
                    if let ActionOutcome::Activate(t, StatusCode::Ok) = o {
                        if s.alarms[a.index()].cycle_time == 0 {
                            continue;
                        }
                        let Some(i) = monitored.iter().position(|x| x == t) else { continue };
                        if m[i].0 && m[i].1 != 1 {
                            return false;
                        }
                        m[i] = (true, 0);
                    }
                }
            }
            Label::Service { task, call: Service::TerminateTask | Service::ChainTask(_), status: StatusCode::Ok } => {
                if let Some(i) = monitored.iter().position(|x| x == task) {
                    m[i].1 = (m[i].1 + 1).min(2);
                    if m[i].0 && m[i].1 > 1 {
                        return false;
                    }
                }
            }
            _ => {}
        }
        true
    };

    type Node = (NodeId, MonitorState);
    let start: Node = (0, vec![(false, 0); monitored.len()]);
    let mut parent: HashMap<Node, Option<(Node, Choice)>> = HashMap::new();
    parent.insert(start.clone(), None);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &(c, h) in &g.edges[v.0] {
            let mut m = v.1.clone();
            let ok = c == Choice::Stutter || update(&mut m, h);
            if !ok {
                let mut path = vec![(c, h)];
                let mut cur = v;
                while let Some(Some((p, c))) = parent.get(&cur) {
                    path.push((*c, cur.0));
                    cur = p.clone();
                }
                path.reverse();
                return Some(g.trace_along(&path, None));
            }
            let w = (h, m);
            if !parent.contains_key(&w) {
                parent.insert(w.clone(), Some((v.clone(), c)));
                queue.push_back(w);
            }
        }
    }
    None
}

// -------------------------------------------------------------------------
// Test reports and adjudication

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
        }
    }
}

/// Results of running the application on the real kernel.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TestReport(pub BTreeMap<PropertyId, Outcome>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ReportError {
    pub line: usize,
    pub message: String,
}

/// Parses `ID = pass|fail` lines; `#` starts a comment.
pub fn parse_test_report(src: &str) -> Result<TestReport, ReportError> {
    let mut out = BTreeMap::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ReportError { line: i + 1, message };
        let (id, val) = line.split_once('=').ok_or_else(|| err(format!("expected `ID = pass|fail`, got `{line}`")))?;
        let id: PropertyId = id.parse().map_err(err)?;
        let outcome = match val.trim().to_ascii_lowercase().as_str() {
            "pass" => Outcome::Pass,
            "fail" => Outcome::Fail,
            other => return Err(err(format!("expected pass or fail, got `{other}`"))),
        };
        if out.insert(id, outcome).is_some() {
            return Err(err(format!("{id} listed twice")));
        }
    }
    Ok(TestReport(out))
}

/// Parses a property list: one id per line, `#` comments.
pub fn parse_property_list(src: &str) -> Result<Vec<PropertyId>, ReportError> {
    let mut out = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let id: PropertyId = line.parse().map_err(|message| ReportError { line: i + 1, message })?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    Ok(out)
}

/// The verification/testing matrix: returns (kernel conforms, application conforms).
pub fn table2(verification: Outcome, testing: Outcome) -> (bool, bool) {
    match (verification, testing) {
        (Outcome::Pass, Outcome::Pass) => (true, true),
        (Outcome::Pass, Outcome::Fail) => (false, true),
        (Outcome::Fail, Outcome::Pass) => (false, false),
        (Outcome::Fail, Outcome::Fail) => (true, false),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerdictRow {
    pub id: PropertyId,
    pub verification: Option<Outcome>,
    pub bounded: bool,
    pub testing: Option<Outcome>,
    /// `None` when either input is missing.
    pub conform: Option<(bool, bool)>,
}

impl VerdictRow {
    pub fn kernel_conform(&self) -> Option<bool> {
        self.conform.map(|c| c.0)
    }

    pub fn app_conform(&self) -> Option<bool> {
        self.conform.map(|c| c.1)
    }
}

pub fn adjudicate(results: &[PropertyOutcome], testing: &TestReport) -> Vec<VerdictRow> {
    results
        .iter()
        .map(|r| {
            let verification = r.result.outcome();
            let t = testing.0.get(&r.id).copied();
            VerdictRow {
                id: r.id,
                verification,
                bounded: matches!(r.result, PropertyResult::BoundedPass { .. }),
                testing: t,
                conform: verification.zip(t).map(|(v, t)| table2(v, t)),
            }
        })
        .collect()
}

/// Every row is adjudicated and both sides conform.
pub fn all_conform(rows: &[VerdictRow]) -> bool {
    rows.iter().all(|r| r.conform == Some((true, true)))
}

fn yes_no(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "yes",
        Some(false) => "no",
        None => "?",
    }
}

/// Human-readable report followed by a `key=value` section. Output is
/// deterministic for identical inputs.
pub fn emit_report(k: &Kernel, rows: &[VerdictRow], results: &[PropertyOutcome]) -> String {
    let mut out = String::new();
    out.push_str("conformance report\n\n");
    let _ = writeln!(
        out,
        "{:<5} {:<7} {:<14} {:<8} {:<7} application",
        "id", "origin", "verification", "testing", "kernel"
    );
    for r in rows {
        let origin = match spec(r.id).origin {
            Origin::Std => "std",
            Origin::App => "app",
        };
        let verification = match (r.verification, r.bounded) {
            (Some(Outcome::Pass), true) => "pass (bounded)".to_string(),
            (Some(o), _) => o.name().to_string(),
            (None, _) => "unknown".to_string(),
        };
        let _ = writeln!(
            out,
            "{:<5} {:<7} {:<14} {:<8} {:<7} {}",
            r.id.name(),
            origin,
            verification,
            r.testing.map(|t| t.name()).unwrap_or("missing"),
            yes_no(r.kernel_conform()),
            yes_no(r.app_conform())
        );
    }
    let problems: Vec<String> = rows
        .iter()
        .filter_map(|r| match (r.verification, r.testing) {
            (None, _) => Some(format!("{}: verification did not finish (state limit)", r.id)),
            (_, None) => Some(format!("{}: no testing result", r.id)),
            _ => None,
        })
        .collect();
    if !problems.is_empty() {
        out.push_str("\nadjudication errors\n");
        for p in &problems {
            let _ = writeln!(out, "  {p}");
        }
    }
    let kernel_bad: Vec<&str> =
        rows.iter().filter(|r| r.kernel_conform() == Some(false)).map(|r| r.id.name()).collect();
    let app_bad: Vec<&str> = rows.iter().filter(|r| r.app_conform() == Some(false)).map(|r| r.id.name()).collect();
    let _ = writeln!(out, "\nkernel inconformities: {}", list_or_none(&kernel_bad));
    let _ = writeln!(out, "application inconformities: {}", list_or_none(&app_bad));

    out.push_str("\nchecked\n");
    for r in results {
        let _ = writeln!(out, "  {}: {}", r.id, r.detail);
    }

    let failing: Vec<&PropertyOutcome> = results.iter().filter(|r| r.result.witness().is_some()).collect();
    out.push_str("\nwitnesses\n");
    if failing.is_empty() {
        out.push_str("  none\n");
    }
    for r in &failing {
        let w = r.result.witness().unwrap();
        let _ = writeln!(
            out,
            "  {} ({}): {} steps, final counter {}{}",
            r.id,
            spec(r.id).description,
            w.len(),
            w.last().counter,
            if w.lasso_start.is_some() { ", ends in a cycle" } else { "" }
        );
        for line in w.service_sequence(k) {
            let _ = writeln!(out, "    {line}");
        }
    }

    out.push_str("\n[machine]\n");
    for r in rows {
        let id = r.id.name();
        let _ = writeln!(out, "{id}.verification={}", r.verification.map(|o| o.name()).unwrap_or("unknown"));
        let _ = writeln!(out, "{id}.bounded={}", r.bounded);
        let _ = writeln!(out, "{id}.testing={}", r.testing.map(|o| o.name()).unwrap_or("missing"));
        let _ = writeln!(out, "{id}.kernel_conform={}", yes_no(r.kernel_conform()));
        let _ = writeln!(out, "{id}.app_conform={}", yes_no(r.app_conform()));
        if let Some(w) = results.iter().find(|x| x.id == r.id).and_then(|x| x.result.witness()) {
            let _ = writeln!(out, "{id}.witness_steps={}", w.len());
            let _ = writeln!(out, "{id}.witness_final_counter={}", w.last().counter);
        }
    }
    let _ = writeln!(out, "kernel_inconformities={}", kernel_bad.join(","));
    let _ = writeln!(out, "app_inconformities={}", app_bad.join(","));
    let _ = writeln!(out, "adjudication_errors={}", problems.len());
    out
}

fn list_or_none(xs: &[&str]) -> String {
    if xs.is_empty() {
        "none".into()
    } else {
        xs.join(", ")
    }
}
