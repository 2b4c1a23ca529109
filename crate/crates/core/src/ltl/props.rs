use std::fmt;

use crate::explorer::{stuck, StuckKind};
use crate::kernel::{ActionOutcome, Kernel, KernelState, Label, Service, StatusCode, TaskState};

/// Atomic propositions. State-shaped ones read the task table; event-shaped
/// ones read the label of the transition that produced the state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prop {
    Running(String),
    Ready(String),
    Suspended(String),
    Waiting(String),
    /// The task just called `WaitEvent(event)` successfully.
    Wait {
        event: String,
        task: String,
    },
    /// `event` was just set for `task`, by a service or an alarm.
    Set {
        event: String,
        task: String,
    },
    Expired(String),
    /// The last transition returned this error status.
    Error(StatusCode),
    /// An activation of this task was just refused with `E_OS_LIMIT`.
    Limit(String),
    CounterEq(u32),
    Deadlocked,
    /// Free-standing name; only meaningful on abstract labelled graphs.
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PropError {
    #[error("unknown {kind} `{id}` in proposition `{prop}`")]
    Unknown { prop: String, kind: &'static str, id: String },
    #[error("proposition `{0}` has no meaning on kernel states")]
    Abstract(String),
}

impl Prop {
    pub(crate) fn from_parts(name: &str, args: &[String]) -> Result<Prop, String> {
        let one = |f: fn(String) -> Prop| match args {
            [a] => Ok(f(a.clone())),
            _ => Err(format!("`{name}` takes one argument")),
        };
        let two = |f: fn(String, String) -> Prop| match args {
            [a, b] => Ok(f(a.clone(), b.clone())),
            _ => Err(format!("`{name}` takes two arguments")),
        };
        match name {
            "running" => one(Prop::Running),
            "ready" => one(Prop::Ready),
            "suspended" => one(Prop::Suspended),
            "waiting" => one(Prop::Waiting),
            "wait" => two(|event, task| Prop::Wait { event, task }),
            "set" => two(|event, task| Prop::Set { event, task }),
            "expired" => one(Prop::Expired),
            "limit" => one(Prop::Limit),
            "error" => match args {
                [c] => StatusCode::from_name(c)
                    .filter(|c| c.is_error())
                    .map(Prop::Error)
                    .ok_or_else(|| format!("unknown error code `{c}`")),
                _ => Err("`error` takes one argument".into()),
            },
            "counter" => match args {
                [n] => n.parse().map(Prop::CounterEq).map_err(|_| format!("`counter` needs a number, got `{n}`")),
                _ => Err("`counter` takes one argument".into()),
            },
            "deadlocked" if args.is_empty() => Ok(Prop::Deadlocked),
            _ if args.is_empty() => Ok(Prop::Named(name.to_string())),
            _ => Err(format!("unknown proposition `{name}`")),
        }
    }

    /// Checks that every identifier names something in `k`.
    pub fn validate(&self, k: &Kernel) -> Result<(), PropError> {
        let unknown = |kind, id: &String| PropError::Unknown { prop: self.to_string(), kind, id: id.clone() };
        let task = |t: &String| k.task_id(t).map(|_| ()).ok_or_else(|| unknown("task", t));
        let event = |e: &String| k.event_id(e).map(|_| ()).ok_or_else(|| unknown("event", e));
        match self {
            Prop::Running(t) | Prop::Ready(t) | Prop::Suspended(t) | Prop::Waiting(t) | Prop::Limit(t) => task(t),
            Prop::Wait { event: e, task: t } | Prop::Set { event: e, task: t } => task(t).and_then(|_| event(e)),
            Prop::Expired(a) => k.alarm_id(a).map(|_| ()).ok_or_else(|| unknown("alarm", a)),
            Prop::Error(_) | Prop::CounterEq(_) | Prop::Deadlocked => Ok(()),
            Prop::Named(n) => Err(PropError::Abstract(n.clone())),
        }
    }
}

/// Value of `p` in state `s`. Unknown identifiers evaluate to false; use
/// [`Prop::validate`] first to reject them.
pub fn eval_prop(k: &Kernel, s: &KernelState, p: &Prop) -> bool {
    let task_in = |t: &str, st: TaskState| k.task_id(t).is_some_and(|id| s.task(id).state == st);
    match p {
        Prop::Running(t) => task_in(t, TaskState::Running),
        Prop::Ready(t) => task_in(t, TaskState::Ready),
        Prop::Suspended(t) => task_in(t, TaskState::Suspended),
        Prop::Waiting(t) => task_in(t, TaskState::Waiting),
        Prop::Wait { event, task } => {
            let (Some(t), Some(e)) = (k.task_id(task), k.event_id(event)) else { return false };
            matches!(s.last_label, Label::Service { task: c, call: Service::WaitEvent(x), status: StatusCode::Ok }
                if c == t && x == e)
        }
        Prop::Set { event, task } => {
            let (Some(t), Some(e)) = (k.task_id(task), k.event_id(event)) else { return false };
            match &s.last_label {
                Label::Service { call: Service::SetEvent(x, y), status: StatusCode::Ok, .. } => *x == t && *y == e,
                Label::AlarmExpiry(f) => f.iter().any(|(_, o)| *o == ActionOutcome::SetEvent(t, e, StatusCode::Ok)),
                _ => false,
            }
        }
        Prop::Expired(a) => {
            let Some(a) = k.alarm_id(a) else { return false };
            matches!(&s.last_label, Label::AlarmExpiry(f) if f.iter().any(|(x, _)| *x == a))
        }
        Prop::Error(code) => match &s.last_label {
            Label::Service { status, .. } => status == code,
            Label::AlarmExpiry(f) => f.iter().any(|(_, o)| o.status() == *code),
            _ => false,
        },
        Prop::Limit(task) => {
            let Some(t) = k.task_id(task) else { return false };
            match &s.last_label {
                Label::Service {
                    call: Service::ActivateTask(x) | Service::ChainTask(x),
                    status: StatusCode::Limit,
                    ..
                } => *x == t,
                Label::AlarmExpiry(f) => f.iter().any(|(_, o)| *o == ActionOutcome::Activate(t, StatusCode::Limit)),
                _ => false,
            }
        }
        Prop::CounterEq(n) => s.counter == *n,
        Prop::Deadlocked => stuck(k, s) == Some(StuckKind::Deadlock),
        Prop::Named(_) => false,
    }
}

impl fmt::Display for Prop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prop::Running(t) => write!(f, "running({t})"),
            Prop::Ready(t) => write!(f, "ready({t})"),
            Prop::Suspended(t) => write!(f, "suspended({t})"),
            Prop::Waiting(t) => write!(f, "waiting({t})"),
            Prop::Wait { event, task } => write!(f, "wait({event}, {task})"),
            Prop::Set { event, task } => write!(f, "set({event}, {task})"),
            Prop::Expired(a) => write!(f, "expired({a})"),
            Prop::Error(c) => write!(f, "error({})", c.name()),
            Prop::Limit(t) => write!(f, "limit({t})"),
            Prop::CounterEq(n) => write!(f, "counter({n})"),
            Prop::Deadlocked => write!(f, "deadlocked"),
            Prop::Named(n) => write!(f, "{n}"),
        }
    }
}
