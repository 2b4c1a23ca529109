#![allow(dead_code)]

use std::fmt::Write as _;

use osek_core::explorer::{build_graph, step, successors, ExploreConfig, Graph, Trace};
use osek_core::kernel::{Kernel, Label, Options, TimeMode};
use osek_core::ltl::{eval_prop, Ltl, Prop};
use osek_core::oil::parse_oil;
use osek_core::task_lang::parse_task_file;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EMS_OIL: &str = include_str!("../../corpus/ems/ems.oil");
pub const EMS_REPAIRED_OIL: &str = include_str!("../../corpus/ems/ems_repaired.oil");
pub const EMS_TSK: &str = include_str!("../../corpus/ems/ems.tsk");
pub const EMS_REPORT: &str = include_str!("../../corpus/ems/ems_testing.report");

pub fn kernel(oil: &str, tsk: &str, options: Options) -> Kernel {
    let cfg = parse_oil(oil).unwrap_or_else(|e| panic!("oil: {e}\n{oil}"));
    let bodies = parse_task_file(tsk, &cfg).unwrap_or_else(|e| panic!("tasks: {e}\n{tsk}"));
    Kernel::new(&cfg, &bodies, options).unwrap()
}

pub fn lenient() -> Options {
    Options::default()
}

pub fn strict() -> Options {
    Options { strict: true, ..Options::default() }
}

pub fn counter(mav: u32, min_cycle: u32) -> String {
    format!("COUNTER SysCounter {{ MAXALLOWEDVALUE = {mav}; TICKSPERBASE = 1; MINCYCLE = {min_cycle}; }};\n")
}

pub fn task(name: &str, prio: u32, autostart: bool, activation: u32) -> String {
    task_full(name, prio, autostart, activation, "FULL", &[], &[])
}

pub fn task_full(
    name: &str,
    prio: u32,
    autostart: bool,
    activation: u32,
    schedule: &str,
    events: &[&str],
    resources: &[&str],
) -> String {
    let mut s = format!(
        "TASK {name} {{ PRIORITY = {prio}; SCHEDULE = {schedule}; AUTOSTART = {}; ACTIVATION = {activation};",
        if autostart { "TRUE" } else { "FALSE" }
    );
    for e in events {
        let _ = write!(s, " EVENT = {e};");
    }
    for r in resources {
        let _ = write!(s, " RESOURCE = {r};");
    }
    s.push_str(" };\n");
    s
}

pub fn event(name: &str) -> String {
    format!("EVENT {name} {{}};\n")
}

pub fn resource(name: &str) -> String {
    format!("RESOURCE {name} {{}};\n")
}

pub fn alarm(name: &str, target: &str) -> String {
    format!(
        "ALARM {name} {{ COUNTER = SysCounter; ACTION = ACTIVATETASK {{ TASK = {target}; }}; AUTOSTART = FALSE; }};\n"
    )
}

pub fn alarm_event(name: &str, target: &str, ev: &str) -> String {
    format!(
        "ALARM {name} {{ COUNTER = SysCounter; ACTION = SETEVENT {{ TASK = {target}; EVENT = {ev}; }}; AUTOSTART = FALSE; }};\n"
    )
}

/// Labels of `trace`, rendered, starting with the boot label.
pub fn labels(k: &Kernel, t: &Trace) -> Vec<String> {
    t.labels().map(|l| k.label_string(l)).collect()
}

/// Runs the first-choice schedule for `n` steps (or until stuck).
pub fn run(k: &Kernel, n: usize) -> Trace {
    osek_core::explorer::run(k, &k.boot().unwrap(), n).0
}

pub fn position(labels: &[String], needle: &str) -> Option<usize> {
    labels.iter().position(|l| l.contains(needle))
}

// -------------------------------------------------------------------------
// Golden scenarios for the ambiguity regressions. Each returns Err with a
// reason on mismatch.

/// A self-activating high-priority task re-runs before a lower ready task.
pub fn golden_multi_activation() -> Result<(), String> {
    let oil = counter(127, 1) + &task("T1", 5, true, 2) + &task("T2", 1, true, 1);
    let tsk = "TASK T1 { ActivateTask(T1); TerminateTask(); };\nTASK T2 { TerminateTask(); };";
    let k = kernel(&oil, tsk, lenient());
    let l = labels(&k, &run(&k, 12));
    let expected = [
        "boot",
        "T1: ActivateTask(T1) -> E_OK",
        "T1: TerminateTask() -> E_OK",
        "multi-activation: T1 ready",
        "schedule: dispatch T1",
        "T1: ActivateTask(T1) -> E_OK",
    ];
    if l.len() < expected.len() || l[..expected.len()] != expected {
        return Err(format!("trace {l:?}"));
    }
    if l.iter().any(|x| x.contains("dispatch T2")) {
        return Err("T2 ran while T1 kept re-activating".into());
    }
    Ok(())
}

/// A activates B while alarm M expires in the same instant; M activates the
/// higher-priority C, which runs before B.
pub fn golden_alarm_first(increment: u32) -> Result<(), String> {
    let oil =
        counter(127, 1) + &task("A", 1, true, 1) + &task("B", 2, false, 1) + &task("C", 3, false, 1) + &alarm("M", "C");
    let tsk = format!(
        "TASK A {{ SetRelAlarm(M, {increment}, 0); ActivateTask(B); TerminateTask(); }};\n\
         TASK B {{ TerminateTask(); }};\nTASK C {{ TerminateTask(); }};"
    );
    let k = kernel(&oil, &tsk, lenient());
    let l = labels(&k, &run(&k, 20));
    let act_b = position(&l, "A: ActivateTask(B)").ok_or("B never activated")?;
    let fire = position(&l, "alarm M => ActivateTask(C) -> E_OK").ok_or("M never fired")?;
    let c = position(&l, "C: TerminateTask()").ok_or("C never ran")?;
    let b = position(&l, "B: TerminateTask()").ok_or("B never ran")?;
    if c > b {
        return Err(format!("B ran before C: {l:?}"));
    }
    // With increment 2 the expiry coincides with ActivateTask(B); it is
    // handled before the scheduling request raised by that call.
    if increment == 2 && (fire != act_b + 1 || !l[fire + 1].starts_with("schedule: C")) {
        return Err(format!("order {l:?}"));
    }
    Ok(())
}

/// `SetRelAlarm(a, 0, c)` raises the expiry in the same step.
pub fn golden_zero_increment() -> Result<(), String> {
    let oil = counter(127, 1) + &task("A", 1, true, 1) + &task("B", 2, false, 1) + &alarm("M", "B");
    let tsk = "TASK A { TimeInterval = 12; SetRelAlarm(M, 0, 5); CancelAlarm(M); TerminateTask(); };\nTASK B { TerminateTask(); };";
    let k = kernel(&oil, tsk, lenient());
    let t = run(&k, 4);
    let s = t.state(2);
    let m = k.alarm_id("M").unwrap();
    if k.label_string(&s.last_label) != "A: SetRelAlarm(M, 0, 5) -> E_OK" {
        return Err(format!("unexpected step {}", k.label_string(&s.last_label)));
    }
    if s.alarms[m.index()].alarm_time != 12 || !s.pending_alarms().contains(&m) {
        return Err(format!("alarm not due immediately: {}", k.snapshot(s)));
    }
    if k.label_string(&t.state(3).last_label) != "alarm M => ActivateTask(B) -> E_OK" {
        return Err("expiry not handled next".into());
    }
    Ok(())
}

/// Canceling an alarm stops its pending expiry; re-setting it works.
pub fn golden_cancel_reset() -> Result<(), String> {
    let oil = counter(127, 1) + &task("A", 1, true, 1) + &task("B", 2, false, 1) + &alarm("M", "B");
    let tsk = "TASK A { SetRelAlarm(M, 5, 0); CancelAlarm(M); TimeInterval = 10; SetRelAlarm(M, 3, 0); TimeInterval = 5; TerminateTask(); };\n\
               TASK B { TerminateTask(); };";
    let k = kernel(&oil, tsk, lenient());
    let t = run(&k, 40);
    let l = labels(&k, &t);
    let fires: Vec<u32> = (0..=t.len())
        .filter(|i| matches!(t.state(*i).last_label, Label::AlarmExpiry(_)))
        .map(|i| t.state(i).counter)
        .collect();
    if position(&l, "A: CancelAlarm(M) -> E_OK").is_none() {
        return Err(format!("cancel failed: {l:?}"));
    }
    if position(&l, "A: SetRelAlarm(M, 3, 0) -> E_OK").is_none() {
        return Err(format!("re-set failed: {l:?}"));
    }
    // Services tick once: cancel at 2, re-set at 12 gives expiry at 15, then the action tick.
    if fires != [16] {
        return Err(format!("unexpected expiries at {fires:?}"));
    }
    Ok(())
}

// -------------------------------------------------------------------------
// Random small applications.

pub struct RandomApp {
    pub oil: String,
    pub tsk: String,
}

/// At most 3 tasks, MAXALLOWEDVALUE at most 31, at most 2 alarms.
pub fn random_app(seed: u64) -> RandomApp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mav: u32 = rng.gen_range(3..=31);
    let ntasks = rng.gen_range(1..=3);
    let nalarms = rng.gen_range(0..=2);
    let names: Vec<String> = (0..ntasks).map(|i| format!("T{i}")).collect();
    let extended: Vec<bool> = (0..ntasks).map(|_| rng.gen_bool(0.3)).collect();
    let mut oil = counter(mav, 1);
    for (i, n) in names.iter().enumerate() {
        let ev = format!("E{i}");
        if extended[i] {
            oil += &event(&ev);
        }
        let events: Vec<&str> = if extended[i] { vec![ev.as_str()] } else { vec![] };
        let act = if extended[i] { 1 } else { rng.gen_range(1..=2) };
        let sched = if rng.gen_bool(0.2) { "NON" } else { "FULL" };
        oil += &task_full(n, rng.gen_range(0..=3), i == 0 || rng.gen_bool(0.3), act, sched, &events, &[]);
    }
    let alarms: Vec<String> = (0..nalarms).map(|i| format!("A{i}")).collect();
    for a in &alarms {
        let t = rng.gen_range(0..ntasks);
        if extended[t] && rng.gen_bool(0.5) {
            oil += &alarm_event(a, &names[t], &format!("E{t}"));
        } else {
            oil += &alarm(a, &names[t]);
        }
    }

    let mut tsk = String::new();
    for (i, n) in names.iter().enumerate() {
        let mut stmts = Vec::new();
        for _ in 0..rng.gen_range(1..=4) {
            let choice = rng.gen_range(0..10);
            let s = match choice {
                0 | 1 => format!("TimeInterval = {};", rng.gen_range(1..=mav + 4)),
                2 => format!("ActivateTask({});", names.choose(&mut rng).unwrap()),
                3 | 4 if !alarms.is_empty() => {
                    let cyc = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..=mav) };
                    format!("SetRelAlarm({}, {}, {cyc});", alarms.choose(&mut rng).unwrap(), rng.gen_range(0..=mav))
                }
                5 if !alarms.is_empty() => {
                    let cyc = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..=mav) };
                    format!("SetAbsAlarm({}, {}, {cyc});", alarms.choose(&mut rng).unwrap(), rng.gen_range(0..=mav))
                }
                6 if !alarms.is_empty() => format!("CancelAlarm({});", alarms.choose(&mut rng).unwrap()),
                7 if extended[i] => {
                    if rng.gen_bool(0.5) {
                        format!("WaitEvent(E{i});")
                    } else {
                        format!("ClearEvent(E{i});")
                    }
                }
                8 => {
                    let targets: Vec<usize> = (0..ntasks).filter(|t| extended[*t]).collect();
                    match targets.choose(&mut rng) {
                        Some(t) => format!("SetEvent({}, E{t});", names[*t]),
                        None => "Schedule();".to_string(),
                    }
                }
                _ => "Schedule();".to_string(),
            };
            stmts.push(s);
        }
        let body = if rng.gen_bool(0.3) {
            format!("  while(true){{\n    {}\n  }}\n  TerminateTask();", stmts.join("\n    "))
        } else {
            format!("  {}\n  TerminateTask();", stmts.join("\n  "))
        };
        let _ = writeln!(tsk, "TASK {n} {{\n{body}\n}};");
    }
    RandomApp { oil, tsk }
}

pub fn random_kernel(seed: u64, mode: TimeMode, strict_mode: bool) -> Kernel {
    let app = random_app(seed);
    kernel(&app.oil, &app.tsk, Options { strict: strict_mode, time_mode: mode, ..Options::default() })
}

pub fn small_explore() -> ExploreConfig {
    ExploreConfig { bound: 300, max_states: 4000, workers: 1 }
}

/// Every edge replays bit-exactly with `step`.
pub fn replay_graph(k: &Kernel, g: &Graph) -> Result<(), String> {
    for (n, es) in g.edges.iter().enumerate() {
        for &(c, m) in es {
            let got = step(k, &g.states[n], c).map_err(|e| format!("node {n}: {e}"))?;
            if got != g.states[m] {
                return Err(format!("edge {n} -{c}-> {m} does not replay"));
            }
        }
        if !es.is_empty() {
            let succ = successors(k, &g.states[n]);
            if succ.len() != es.len() {
                return Err(format!("node {n}: {} successors, {} edges", succ.len(), es.len()));
            }
        }
    }
    Ok(())
}

pub fn invariant_violations(k: &Kernel, g: &Graph) -> Vec<String> {
    g.states.iter().flat_map(|s| k.check_invariants(s)).collect()
}

pub fn graph_of(k: &Kernel, cfg: &ExploreConfig) -> Graph {
    build_graph(k, &k.boot().unwrap(), cfg)
}

// -------------------------------------------------------------------------
// Brute-force LTL oracle.

/// Candidate propositions for oracle formulas over a kernel.
pub fn candidate_props(k: &Kernel) -> Vec<Prop> {
    let mut out = Vec::new();
    for t in &k.tasks {
        out.push(Prop::Running(t.name.clone()));
        out.push(Prop::Ready(t.name.clone()));
        out.push(Prop::Suspended(t.name.clone()));
    }
    for a in &k.alarms {
        out.push(Prop::Expired(a.name.clone()));
    }
    out.push(Prop::Deadlocked);
    out
}

pub fn patterns(p: &Prop, q: &Prop) -> Vec<Ltl> {
    let (p, q) = (Ltl::atom(p.clone()), Ltl::atom(q.clone()));
    vec![
        Ltl::globally(p.clone()),
        Ltl::finally(p.clone()),
        Ltl::until(p.clone(), q.clone()),
        Ltl::globally(Ltl::implies(p, Ltl::finally(q))),
    ]
}

/// Enumerates every lasso `v0 .. vk` (then back to `vj`) from node 0 with
/// at most `max_len` states and reports whether some lasso violates `f`.
/// Returns `None` when more than `budget` paths would be needed.
pub fn brute_force_violated(
    succ: &[Vec<usize>],
    holds: &dyn Fn(usize, &Prop) -> bool,
    f: &Ltl,
    max_len: usize,
    budget: usize,
) -> Option<bool> {
    let mut work = 0usize;
    let mut path = vec![0usize];
    // Iterative DFS over paths; each frame stores the next successor index.
    let mut idx = vec![0usize];
    loop {
        let v = *path.last().unwrap();
        if idx.len() == path.len() && idx[path.len() - 1] == 0 {
            work += 1;
            if work > budget {
                return None;
            }
            for (j, &u) in path.iter().enumerate() {
                if succ[v].contains(&u) {
                    let n = path.len();
                    let word = &path;
                    if !f.eval_lasso(n, j, &|i, p| holds(word[i], p)) {
                        return Some(true);
                    }
                }
            }
        }
        let top = path.len() - 1;
        if path.len() < max_len && idx[top] < succ[v].len() {
            let w = succ[v][idx[top]];
            idx[top] += 1;
            path.push(w);
            idx.push(0);
        } else {
            path.pop();
            idx.pop();
            if path.is_empty() {
                return Some(false);
            }
        }
    }
}

pub fn graph_succ(g: &Graph) -> Vec<Vec<usize>> {
    g.edges.iter().map(|es| es.iter().map(|(_, m)| *m).collect()).collect()
}

pub fn kernel_holds<'a>(k: &'a Kernel, g: &'a Graph) -> impl Fn(usize, &Prop) -> bool + 'a {
    move |n, p| eval_prop(k, &g.states[n], p)
}

/// Whether a lasso trace violates `f` under direct semantics.
pub fn trace_violates(k: &Kernel, t: &Trace, f: &Ltl) -> bool {
    let Some(j) = t.lasso_start else { return false };
    // The last state repeats state j, so the word is states 0..len-1 looping to j.
    let n = t.len();
    !f.eval_lasso(n, j, &|i, p| eval_prop(k, t.state(i), p))
}
