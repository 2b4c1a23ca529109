//! Dynamic kernel state and the scheduling transition rules.
//!
//! A [`Kernel`] holds everything static (the configuration with identifiers
//! interned to dense indices, the compiled task bodies and the semantic
//! options). A [`KernelState`] is an immutable value; every rule takes a state
//! by reference and returns a new one.

mod sched;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::oil::{AlarmAction, KernelConfig, SchedulePolicy};
use crate::task_lang::{ServiceCall, Statement, TaskBodies};

macro_rules! index_type {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u16);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

index_type!(TaskId);
index_type!(EventId);
index_type!(ResourceId);
index_type!(AlarmId);

/// A system-service call with identifiers resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Service {
    ActivateTask(TaskId),
    TerminateTask,
    ChainTask(TaskId),
    Schedule,
    SetEvent(TaskId, EventId),
    WaitEvent(EventId),
    ClearEvent(EventId),
    GetResource(ResourceId),
    ReleaseResource(ResourceId),
    SetRelAlarm(AlarmId, u32, u32),
    SetAbsAlarm(AlarmId, u32, u32),
    CancelAlarm(AlarmId),
}

/// Compiled statement. Programs are kept as a stack (top = next statement);
/// a `Loop` stays on the stack beneath its unrolled body.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Op {
    Call(Service),
    TimeInterval(u32),
    Loop(Arc<[Op]>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskState {
    Suspended,
    Ready,
    Running,
    Waiting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StatusCode {
    Ok,
    Limit,
    Access,
    State,
    NoFunc,
    Resource,
    Value,
}

impl StatusCode {
    pub fn name(self) -> &'static str {
        match self {
            StatusCode::Ok => "E_OK",
            StatusCode::Limit => "E_OS_LIMIT",
            StatusCode::Access => "E_OS_ACCESS",
            StatusCode::State => "E_OS_STATE",
            StatusCode::NoFunc => "E_OS_NOFUNC",
            StatusCode::Resource => "E_OS_RESOURCE",
            StatusCode::Value => "E_OS_VALUE",
        }
    }

    pub fn from_name(s: &str) -> Option<StatusCode> {
        [
            StatusCode::Ok,
            StatusCode::Limit,
            StatusCode::Access,
            StatusCode::State,
            StatusCode::NoFunc,
            StatusCode::Resource,
            StatusCode::Value,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }

    pub fn is_error(self) -> bool {
        self != StatusCode::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaskCell {
    pub program: Vec<Op>,
    pub state: TaskState,
    pub current_priority: u32,
    pub pending_activations: u32,
    pub set_events: BTreeSet<EventId>,
    pub waiting_for: Option<EventId>,
    pub held_resources: Vec<ResourceId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Signal {
    Alarmed(AlarmId),
    /// `explicit` is set when the running task called `Schedule()`; only then
    /// may a non-preemptive task be displaced.
    Schedule {
        explicit: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AlarmCell {
    pub alarm_time: u32,
    pub cycle_time: u32,
}

impl AlarmCell {
    pub fn cyclic(&self) -> bool {
        self.cycle_time != 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionOutcome {
    Activate(TaskId, StatusCode),
    SetEvent(TaskId, EventId, StatusCode),
    Callback,
}

impl ActionOutcome {
    pub fn status(self) -> StatusCode {
        match self {
            ActionOutcome::Activate(_, s) | ActionOutcome::SetEvent(_, _, s) => s,
            ActionOutcome::Callback => StatusCode::Ok,
        }
    }
}

/// The event that produced a state. Atomic propositions such as `wait` and
/// `set` are read from here.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Label {
    Boot,
    Service {
        task: TaskId,
        call: Service,
        status: StatusCode,
    },
    /// Counter advanced by a `TimeInterval` block (`task` set) or by the idle CPU.
    TimeAdvance {
        task: Option<TaskId>,
        ticks: u32,
    },
    AlarmExpiry(Vec<(AlarmId, ActionOutcome)>),
    Schedule {
        dispatched: Option<TaskId>,
        preempted: Option<TaskId>,
    },
    MultiActivated(TaskId),
    Dispatch(TaskId),
}

impl Label {
    /// Error status carried by this transition, if any.
    pub fn error(&self) -> Option<StatusCode> {
        match self {
            Label::Service { status, .. } if status.is_error() => Some(*status),
            Label::AlarmExpiry(firings) => firings.iter().map(|(_, o)| o.status()).find(|s| s.is_error()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Normal,
    Error(StatusCode),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KernelState {
    pub tasks: Vec<TaskCell>,
    /// Keyed by current priority; empty queues are removed.
    pub ready: BTreeMap<u32, VecDeque<TaskId>>,
    pub running: Option<TaskId>,
    pub signals: BTreeSet<Signal>,
    pub counter: u32,
    pub working_alarms: Vec<AlarmId>,
    pub alarms: Vec<AlarmCell>,
    pub last_label: Label,
    pub status: Status,
}

impl KernelState {
    pub fn task(&self, t: TaskId) -> &TaskCell {
        &self.tasks[t.index()]
    }

    pub fn is_active(&self, a: AlarmId) -> bool {
        self.working_alarms.contains(&a)
    }

    pub fn pending_alarms(&self) -> Vec<AlarmId> {
        self.working_alarms.iter().copied().filter(|a| self.signals.contains(&Signal::Alarmed(*a))).collect()
    }

    pub fn schedule_pending(&self) -> Option<bool> {
        self.signals.iter().find_map(|s| match s {
            Signal::Schedule { explicit } => Some(*explicit),
            _ => None,
        })
    }

    /// Highest-priority ready task and its queue priority.
    pub fn ready_head(&self) -> Option<(u32, TaskId)> {
        self.ready.iter().next_back().and_then(|(p, q)| q.front().map(|t| (*p, *t)))
    }

    pub(crate) fn raise_schedule(&mut self, explicit: bool) {
        let prev = self.schedule_pending();
        if let Some(e) = prev {
            self.signals.remove(&Signal::Schedule { explicit: e });
        }
        self.signals.insert(Signal::Schedule { explicit: explicit || prev.unwrap_or(false) });
    }

    pub(crate) fn enqueue_back(&mut self, t: TaskId, prio: u32) {
        self.ready.entry(prio).or_default().push_back(t);
    }

    pub(crate) fn enqueue_front(&mut self, t: TaskId, prio: u32) {
        self.ready.entry(prio).or_default().push_front(t);
    }

    pub(crate) fn dequeue_head(&mut self) -> Option<TaskId> {
        let (&prio, queue) = self.ready.iter_mut().next_back()?;
        let t = queue.pop_front();
        if queue.is_empty() {
            self.ready.remove(&prio);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeMode {
    /// Jump straight to the earliest expiry inside an interval.
    #[default]
    Jump,
    /// Advance one tick at a time; used as an oracle for `Jump`.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Options {
    /// Divert error statuses to `Status::Error`, which stops execution.
    pub strict: bool,
    /// Handling an expired alarm's action costs one unit of time, like the
    /// service it performs.
    pub alarm_action_tick: bool,
    pub time_mode: TimeMode,
}

impl Default for Options {
    fn default() -> Self {
        Options { strict: false, alarm_action_tick: true, time_mode: TimeMode::Jump }
    }
}

#[derive(Debug, Clone)]
pub struct TaskInfo {
    pub name: String,
    pub priority: u32,
    pub policy: SchedulePolicy,
    pub autostart: bool,
    pub max_activations: u32,
    pub extended: bool,
    pub resources: BTreeSet<ResourceId>,
    pub events: BTreeSet<EventId>,
    pub body: Arc<[Op]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    ActivateTask(TaskId),
    SetEvent(TaskId, EventId),
    Callback,
}

#[derive(Debug, Clone)]
pub struct AlarmInfo {
    pub name: String,
    pub action: Action,
    pub callback: Option<String>,
    /// Alarms attached to another counter than the system counter never expire.
    pub on_system_counter: bool,
    pub autostart: Option<(u32, u32)>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("configuration has no system counter")]
    NoSystemCounter,
    #[error("task `{0}` has no body")]
    MissingBody(String),
    #[error("undeclared {kind} `{id}` in body of `{task}`")]
    Unresolved { task: String, kind: &'static str, id: String },
    #[error("no autostart task: the kernel has nothing to run at boot")]
    NoAutostartTask,
}

#[derive(Debug, Clone)]
pub struct Kernel {
    pub config: KernelConfig,
    pub tasks: Vec<TaskInfo>,
    pub events: Vec<String>,
    pub resources: Vec<(String, u32)>,
    pub alarms: Vec<AlarmInfo>,
    pub max_allowed_value: u32,
    pub min_cycle: u32,
    pub options: Options,
}

impl Kernel {
    pub fn new(config: &KernelConfig, bodies: &TaskBodies, options: Options) -> Result<Kernel, KernelError> {
        let sys = config.system_counter().ok_or(KernelError::NoSystemCounter)?;
        let task_ix = |s: &str| config.tasks.get_index_of(s).map(|i| TaskId(i as u16));
        let event_ix = |s: &str| config.events.get_index_of(s).map(|i| EventId(i as u16));
        let res_ix = |s: &str| config.resources.get_index_of(s).map(|i| ResourceId(i as u16));
        let alarm_ix = |s: &str| config.alarms.get_index_of(s).map(|i| AlarmId(i as u16));

        let mut tasks = Vec::new();
        for t in config.tasks.values() {
            let body = bodies.get(&t.id).ok_or_else(|| KernelError::MissingBody(t.id.clone()))?;
            let lookup = |kind: &'static str, id: &str, r: Option<u16>| {
                r.ok_or_else(|| KernelError::Unresolved { task: t.id.clone(), kind, id: id.to_string() })
            };
            let compile_call = |c: &ServiceCall| -> Result<Service, KernelError> {
                let task = |id: &str| lookup("task", id, task_ix(id).map(|x| x.0)).map(TaskId);
                let event = |id: &str| lookup("event", id, event_ix(id).map(|x| x.0)).map(EventId);
                let res = |id: &str| lookup("resource", id, res_ix(id).map(|x| x.0)).map(ResourceId);
                let alarm = |id: &str| lookup("alarm", id, alarm_ix(id).map(|x| x.0)).map(AlarmId);
                Ok(match c {
                    ServiceCall::ActivateTask(x) => Service::ActivateTask(task(x)?),
                    ServiceCall::TerminateTask => Service::TerminateTask,
                    ServiceCall::ChainTask(x) => Service::ChainTask(task(x)?),
                    ServiceCall::Schedule => Service::Schedule,
                    ServiceCall::SetEvent(x, e) => Service::SetEvent(task(x)?, event(e)?),
                    ServiceCall::WaitEvent(e) => Service::WaitEvent(event(e)?),
                    ServiceCall::ClearEvent(e) => Service::ClearEvent(event(e)?),
                    ServiceCall::GetResource(r) => Service::GetResource(res(r)?),
                    ServiceCall::ReleaseResource(r) => Service::ReleaseResource(res(r)?),
                    ServiceCall::SetRelAlarm(a, i, c) => Service::SetRelAlarm(alarm(a)?, *i, *c),
                    ServiceCall::SetAbsAlarm(a, i, c) => Service::SetAbsAlarm(alarm(a)?, *i, *c),
                    ServiceCall::CancelAlarm(a) => Service::CancelAlarm(alarm(a)?),
                })
            };
            fn compile(
                stmts: &[Statement],
                call: &dyn Fn(&ServiceCall) -> Result<Service, KernelError>,
            ) -> Result<Vec<Op>, KernelError> {
                stmts
                    .iter()
                    .map(|s| {
                        Ok(match s {
                            Statement::Call(c) => Op::Call(call(c)?),
                            Statement::TimeInterval(n) => Op::TimeInterval(*n),
                            Statement::WhileTrue(b) => Op::Loop(compile(b, call)?.into()),
                        })
                    })
                    .collect()
            }
            let ops = compile(&body.statements, &compile_call)?;
            tasks.push(TaskInfo {
                name: t.id.clone(),
                priority: t.priority,
                policy: t.schedule,
                autostart: t.autostart,
                max_activations: t.max_activations,
                extended: t.is_extended,
                resources: t.resources.iter().filter_map(|r| res_ix(r)).collect(),
                events: t.events.iter().filter_map(|e| event_ix(e)).collect(),
                body: ops.into(),
            });
        }

        let alarms = config
            .alarms
            .values()
            .map(|a| {
                let (action, callback) = match &a.action {
                    AlarmAction::ActivateTask(t) => (Action::ActivateTask(task_ix(t).unwrap()), None),
                    AlarmAction::SetEvent { task, event } => {
                        (Action::SetEvent(task_ix(task).unwrap(), event_ix(event).unwrap()), None)
                    }
                    AlarmAction::Callback(n) => (Action::Callback, Some(n.clone())),
                };
                AlarmInfo {
                    name: a.id.clone(),
                    action,
                    callback,
                    on_system_counter: a.counter == sys.id,
                    autostart: if a.autostart {
                        Some((a.autostart_offset.unwrap_or(0), a.autostart_cycle.unwrap_or(0)))
                    } else {
                        None
                    },
                }
            })
            .collect();

        Ok(Kernel {
            config: config.clone(),
            tasks,
            events: config.events.iter().cloned().collect(),
            resources: config.resources.values().map(|r| (r.id.clone(), r.ceiling_priority)).collect(),
            alarms,
            max_allowed_value: sys.max_allowed_value,
            min_cycle: sys.min_cycle,
            options,
        })
    }

    pub fn with_options(&self, options: Options) -> Kernel {
        Kernel { options, ..self.clone() }
    }

    /// Counter modulus, `MAXALLOWEDVALUE + 1`.
    pub fn modulus(&self) -> u32 {
        self.max_allowed_value + 1
    }

    pub fn task_id(&self, name: &str) -> Option<TaskId> {
        self.tasks.iter().position(|t| t.name == name).map(|i| TaskId(i as u16))
    }

    pub fn event_id(&self, name: &str) -> Option<EventId> {
        self.events.iter().position(|e| e == name).map(|i| EventId(i as u16))
    }

    pub fn resource_id(&self, name: &str) -> Option<ResourceId> {
        self.resources.iter().position(|(r, _)| r == name).map(|i| ResourceId(i as u16))
    }

    pub fn alarm_id(&self, name: &str) -> Option<AlarmId> {
        self.alarms.iter().position(|a| a.name == name).map(|i| AlarmId(i as u16))
    }

    pub fn task_ids(&self) -> impl Iterator<Item = TaskId> {
        (0..self.tasks.len()).map(|i| TaskId(i as u16))
    }

    pub fn info(&self, t: TaskId) -> &TaskInfo {
        &self.tasks[t.index()]
    }

    pub fn ceiling(&self, r: ResourceId) -> u32 {
        self.resources[r.index()].1
    }

    /// Initial state: autostart tasks ready, autostart alarms armed, the
    /// highest-priority ready task running.
    pub fn boot(&self) -> Result<KernelState, KernelError> {
        let mut s = KernelState {
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskCell {
                    program: Vec::new(),
                    state: TaskState::Suspended,
                    current_priority: t.priority,
                    pending_activations: 0,
                    set_events: BTreeSet::new(),
                    waiting_for: None,
                    held_resources: Vec::new(),
                })
                .collect(),
            ready: BTreeMap::new(),
            running: None,
            signals: BTreeSet::new(),
            counter: 0,
            working_alarms: Vec::new(),
            alarms: vec![AlarmCell { alarm_time: 0, cycle_time: 0 }; self.alarms.len()],
            last_label: Label::Boot,
            status: Status::Normal,
        };
        for t in self.task_ids() {
            self.reset_program(&mut s, t);
            if self.info(t).autostart {
                s.tasks[t.index()].state = TaskState::Ready;
                s.enqueue_back(t, self.info(t).priority);
            }
        }
        if s.ready.is_empty() {
            return Err(KernelError::NoAutostartTask);
        }
        for (i, a) in self.alarms.iter().enumerate() {
            if let Some((offset, cycle)) = a.autostart {
                let id = AlarmId(i as u16);
                s.alarms[i] = AlarmCell { alarm_time: offset % self.modulus(), cycle_time: cycle };
                s.working_alarms.push(id);
                if offset == 0 && a.on_system_counter {
                    s.signals.insert(Signal::Alarmed(id));
                }
            }
        }
        let first = s.dequeue_head().expect("ready queue checked above");
        s.tasks[first.index()].state = TaskState::Running;
        s.running = Some(first);
        Ok(s)
    }

    pub(crate) fn reset_program(&self, s: &mut KernelState, t: TaskId) {
        let cell = &mut s.tasks[t.index()];
        cell.program = self.info(t).body.iter().rev().cloned().collect();
        normalize(&mut cell.program);
    }

    /// Next statement of `t`, if it has one.
    pub fn next_op<'s>(&self, s: &'s KernelState, t: TaskId) -> Option<&'s Op> {
        s.task(t).program.last()
    }

    /// Total activation requests held by `t`: the current instance (if not
    /// suspended) plus recorded ones.
    pub fn activation_count(&self, s: &KernelState, t: TaskId) -> u32 {
        let c = s.task(t);
        (c.state != TaskState::Suspended) as u32 + c.pending_activations
    }

    // ---------------------------------------------------------------------
    // Rendering

    pub fn service_string(&self, call: &Service) -> String {
        let t = |x: &TaskId| self.info(*x).name.as_str();
        let e = |x: &EventId| self.events[x.index()].as_str();
        let r = |x: &ResourceId| self.resources[x.index()].0.as_str();
        let a = |x: &AlarmId| self.alarms[x.index()].name.as_str();
        match call {
            Service::ActivateTask(x) => format!("ActivateTask({})", t(x)),
            Service::TerminateTask => "TerminateTask()".into(),
            Service::ChainTask(x) => format!("ChainTask({})", t(x)),
            Service::Schedule => "Schedule()".into(),
            Service::SetEvent(x, ev) => format!("SetEvent({}, {})", t(x), e(ev)),
            Service::WaitEvent(ev) => format!("WaitEvent({})", e(ev)),
            Service::ClearEvent(ev) => format!("ClearEvent({})", e(ev)),
            Service::GetResource(x) => format!("GetResource({})", r(x)),
            Service::ReleaseResource(x) => format!("ReleaseResource({})", r(x)),
            Service::SetRelAlarm(x, i, c) => format!("SetRelAlarm({}, {i}, {c})", a(x)),
            Service::SetAbsAlarm(x, i, c) => format!("SetAbsAlarm({}, {i}, {c})", a(x)),
            Service::CancelAlarm(x) => format!("CancelAlarm({})", a(x)),
        }
    }

    fn op_string(&self, op: &Op, out: &mut String) {
        match op {
            Op::Call(c) => {
                out.push_str(&self.service_string(c));
                out.push(';');
            }
            Op::TimeInterval(n) => {
                let _ = write!(out, "TimeInterval = {n};");
            }
            Op::Loop(body) => {
                out.push_str("while(true){");
                for o in body.iter() {
                    self.op_string(o, out);
                }
                out.push('}');
            }
        }
    }

    pub fn label_string(&self, l: &Label) -> String {
        let t = |x: &TaskId| self.info(*x).name.clone();
        match l {
            Label::Boot => "boot".into(),
            Label::Service { task, call, status } => {
                format!("{}: {} -> {}", t(task), self.service_string(call), status.name())
            }
            Label::TimeAdvance { task: Some(task), ticks } => format!("{}: TimeInterval +{ticks}", t(task)),
            Label::TimeAdvance { task: None, ticks } => format!("idle +{ticks}"),
            Label::AlarmExpiry(firings) => {
                let parts: Vec<String> = firings
                    .iter()
                    .map(|(a, o)| {
                        let name = &self.alarms[a.index()].name;
                        match o {
                            ActionOutcome::Activate(x, s) => {
                                format!("{name} => ActivateTask({}) -> {}", t(x), s.name())
                            }
                            ActionOutcome::SetEvent(x, e, s) => {
                                format!("{name} => SetEvent({}, {}) -> {}", t(x), self.events[e.index()], s.name())
                            }
                            ActionOutcome::Callback => format!(
                                "{name} => callback {}",
                                self.alarms[a.index()].callback.as_deref().unwrap_or("?")
                            ),
                        }
                    })
                    .collect();
                format!("alarm {}", parts.join(", "))
            }
            Label::Schedule { dispatched, preempted } => match (dispatched, preempted) {
                (Some(d), Some(p)) => format!("schedule: {} preempts {}", t(d), t(p)),
                (Some(d), None) => format!("schedule: dispatch {}", t(d)),
                _ => "schedule: no change".into(),
            },
            Label::MultiActivated(x) => format!("multi-activation: {} ready", t(x)),
            Label::Dispatch(x) => format!("dispatch {}", t(x)),
        }
    }

    /// Canonical, field-ordered text form of `s`. Two states are equal iff
    /// their snapshots are equal.
    pub fn snapshot(&self, s: &KernelState) -> String {
        let mut out = String::new();
        let name = |x: TaskId| self.info(x).name.as_str();
        let _ = writeln!(out, "counter = {}", s.counter);
        let _ = writeln!(
            out,
            "status = {}",
            match s.status {
                Status::Normal => "normal".to_string(),
                Status::Error(c) => format!("error({})", c.name()),
            }
        );
        let _ = writeln!(out, "running = {}", s.running.map(name).unwrap_or("-"));
        let sigs: Vec<String> = s
            .signals
            .iter()
            .map(|sig| match sig {
                Signal::Alarmed(a) => format!("alarmed({})", self.alarms[a.index()].name),
                Signal::Schedule { explicit: false } => "schedule".into(),
                Signal::Schedule { explicit: true } => "schedule(explicit)".into(),
            })
            .collect();
        let _ = writeln!(out, "signals = [{}]", sigs.join(", "));
        let queues: Vec<String> = s
            .ready
            .iter()
            .rev()
            .map(|(p, q)| format!("{p}: [{}]", q.iter().map(|t| name(*t)).collect::<Vec<_>>().join(", ")))
            .collect();
        let _ = writeln!(out, "ready = [{}]", queues.join("; "));
        let working: Vec<&str> = s.working_alarms.iter().map(|a| self.alarms[a.index()].name.as_str()).collect();
        let _ = writeln!(out, "working_alarms = [{}]", working.join(", "));
        for (i, a) in s.alarms.iter().enumerate() {
            let _ = writeln!(out, "alarm {} time = {} cycle = {}", self.alarms[i].name, a.alarm_time, a.cycle_time);
        }
        for t in self.task_ids() {
            let c = s.task(t);
            let mut prog = String::new();
            for op in c.program.iter().rev() {
                self.op_string(op, &mut prog);
            }
            let events: Vec<&str> = c.set_events.iter().map(|e| self.events[e.index()].as_str()).collect();
            let held: Vec<&str> = c.held_resources.iter().map(|r| self.resources[r.index()].0.as_str()).collect();
            let _ = writeln!(
                out,
                "task {} state = {:?} prio = {} pending = {} events = {{{}}} waiting = {} held = [{}] k = {}",
                name(t),
                c.state,
                c.current_priority,
                c.pending_activations,
                events.join(", "),
                c.waiting_for.map(|e| self.events[e.index()].as_str()).unwrap_or("-"),
                held.join(", "),
                prog
            );
        }
        let _ = writeln!(out, "label = {}", self.label_string(&s.last_label));
        out
    }

    /// Short stable hash of the canonical snapshot.
    pub fn state_hash(&self, s: &KernelState) -> String {
        let digest = Sha256::digest(self.snapshot(s).as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Structural invariants every reachable state must satisfy. Returns a
    /// description of each violation.
    pub fn check_invariants(&self, s: &KernelState) -> Vec<String> {
        let mut v = Vec::new();
        let running: Vec<TaskId> = self.task_ids().filter(|t| s.task(*t).state == TaskState::Running).collect();
        if running.len() > 1 {
            v.push(format!("{} tasks running", running.len()));
        }
        if running.first().copied() != s.running {
            v.push("running cell disagrees with task states".into());
        }
        if s.counter > self.max_allowed_value {
            v.push(format!("counter {} exceeds {}", s.counter, self.max_allowed_value));
        }
        let mut queued = BTreeSet::new();
        for (p, q) in &s.ready {
            if q.is_empty() {
                v.push(format!("empty ready queue at {p}"));
            }
            for t in q {
                if !queued.insert(*t) {
                    v.push(format!("{} queued twice", self.info(*t).name));
                }
                if s.task(*t).current_priority != *p {
                    v.push(format!(
                        "{} queued at {p} with priority {}",
                        self.info(*t).name,
                        s.task(*t).current_priority
                    ));
                }
            }
        }
        for t in self.task_ids() {
            let c = s.task(t);
            let info = self.info(t);
            if (c.state == TaskState::Ready) != queued.contains(&t) {
                v.push(format!("{} ready/queue mismatch", info.name));
            }
            if c.pending_activations > info.max_activations || self.activation_count(s, t) > info.max_activations {
                v.push(format!("{} exceeds its activation bound", info.name));
            }
            if c.current_priority < info.priority {
                v.push(format!("{} below its static priority", info.name));
            }
            let expected = c.held_resources.iter().map(|r| self.ceiling(*r)).fold(info.priority, u32::max);
            if c.current_priority != expected {
                v.push(format!(
                    "{} priority {} differs from ceiling-derived {}",
                    info.name, c.current_priority, expected
                ));
            }
            if (c.state == TaskState::Waiting) != c.waiting_for.is_some() {
                v.push(format!("{} waiting cell mismatch", info.name));
            }
            if c.state == TaskState::Waiting && !info.extended {
                v.push(format!("basic task {} is waiting", info.name));
            }
        }
        for a in &s.working_alarms {
            if s.alarms[a.index()].alarm_time > self.max_allowed_value {
                v.push(format!("alarm {} time out of range", self.alarms[a.index()].name));
            }
        }
        if let Some(msg) = self.priority_soundness_violation(s) {
            v.push(msg);
        }
        v
    }

    /// In a quiescent state (no pending signal) a preemptible running task
    /// has at least the priority of every ready task.
    pub fn priority_soundness_violation(&self, s: &KernelState) -> Option<String> {
        if !s.signals.is_empty() || s.status != Status::Normal {
            return None;
        }
        let r = s.running?;
        if self.info(r).policy != SchedulePolicy::Full {
            return None;
        }
        let (head, t) = s.ready_head()?;
        (head > s.task(r).current_priority).then(|| {
            format!(
                "{} (priority {}) ready while {} runs at {}",
                self.info(t).name,
                head,
                self.info(r).name,
                s.task(r).current_priority
            )
        })
    }
}

/// Unrolls loops at the top of a program stack until a plain statement (or
/// nothing) is on top.
pub(crate) fn normalize(program: &mut Vec<Op>) {
    while let Some(Op::Loop(body)) = program.last() {
        let body = body.clone();
        program.extend(body.iter().rev().cloned());
    }
}

impl fmt::Display for TaskState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}
