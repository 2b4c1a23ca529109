//! Task bodies: system-service calls, abstract `TimeInterval = N` blocks and
//! `while(true)` loops.
//!
//! ```text
//! TASK SystemInit {
//!   SetRelAlarm(AL_Task_10ms, 6, 10);
//!   ActivateTask(EMS_Adap_Task_10ms);
//!   TerminateTask();
//! };
//! ```

use std::collections::BTreeMap;
use std::fmt;

use crate::lexer::{tokenize, Cursor, LexError, Pos, Tok, Token};
use crate::oil::KernelConfig;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ServiceCall {
    ActivateTask(String),
    TerminateTask,
    ChainTask(String),
    Schedule,
    SetEvent(String, String),
    WaitEvent(String),
    ClearEvent(String),
    GetResource(String),
    ReleaseResource(String),
    SetRelAlarm(String, u32, u32),
    SetAbsAlarm(String, u32, u32),
    CancelAlarm(String),
}

/// Argument shape of each service, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ArgKind {
    Task,
    Event,
    Resource,
    Alarm,
    Int,
}

fn signature(name: &str) -> Option<&'static [ArgKind]> {
    use ArgKind::*;
    Some(match name {
        "ActivateTask" | "ChainTask" => &[Task],
        "TerminateTask" | "Schedule" => &[],
        "SetEvent" => &[Task, Event],
        "WaitEvent" | "ClearEvent" => &[Event],
        "GetResource" | "ReleaseResource" => &[Resource],
        "SetRelAlarm" | "SetAbsAlarm" => &[Alarm, Int, Int],
        "CancelAlarm" => &[Alarm],
        _ => return None,
    })
}

impl ServiceCall {
    pub fn name(&self) -> &'static str {
        match self {
            ServiceCall::ActivateTask(_) => "ActivateTask",
            ServiceCall::TerminateTask => "TerminateTask",
            ServiceCall::ChainTask(_) => "ChainTask",
            ServiceCall::Schedule => "Schedule",
            ServiceCall::SetEvent(..) => "SetEvent",
            ServiceCall::WaitEvent(_) => "WaitEvent",
            ServiceCall::ClearEvent(_) => "ClearEvent",
            ServiceCall::GetResource(_) => "GetResource",
            ServiceCall::ReleaseResource(_) => "ReleaseResource",
            ServiceCall::SetRelAlarm(..) => "SetRelAlarm",
            ServiceCall::SetAbsAlarm(..) => "SetAbsAlarm",
            ServiceCall::CancelAlarm(_) => "CancelAlarm",
        }
    }

    pub fn arity(&self) -> usize {
        signature(self.name()).map(|s| s.len()).unwrap_or(0)
    }

    fn is_terminating(&self) -> bool {
        matches!(self, ServiceCall::TerminateTask | ServiceCall::ChainTask(_))
    }
}

impl fmt::Display for ServiceCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ServiceCall::*;
        match self {
            ActivateTask(a) | ChainTask(a) | WaitEvent(a) | ClearEvent(a) | GetResource(a) | ReleaseResource(a)
            | CancelAlarm(a) => write!(f, "{}({a})", self.name()),
            TerminateTask | Schedule => write!(f, "{}()", self.name()),
            SetEvent(t, e) => write!(f, "SetEvent({t}, {e})"),
            SetRelAlarm(a, x, y) | SetAbsAlarm(a, x, y) => write!(f, "{}({a}, {x}, {y})", self.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Statement {
    Call(ServiceCall),
    TimeInterval(u32),
    WhileTrue(Vec<Statement>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskBody {
    pub task_id: String,
    pub statements: Vec<Statement>,
}

pub type TaskBodies = BTreeMap<String, TaskBody>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskDiagnostic {
    UnknownService { name: String, pos: Pos },
    Arity { service: String, expected: usize, found: usize, pos: Pos },
    ExpectedInteger { service: String, pos: Pos },
    ExpectedIdentifier { service: String, pos: Pos },
    Unresolved { kind: &'static str, id: String, pos: Pos },
    BodyForUndeclaredTask { task: String, pos: Pos },
    DuplicateBody { task: String, pos: Pos },
    MissingBody { task: String },
    ZeroTimeInterval { pos: Pos },
    EmptyLoop { pos: Pos },
    GlobalDeclarationIgnored { name: String, pos: Pos },
    NonTailTermination { task: String, pos: Pos },
}

impl TaskDiagnostic {
    pub fn is_error(&self) -> bool {
        !matches!(self, TaskDiagnostic::GlobalDeclarationIgnored { .. } | TaskDiagnostic::NonTailTermination { .. })
    }
}

impl fmt::Display for TaskDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TaskDiagnostic::*;
        match self {
            UnknownService { name, pos } => write!(f, "{pos}: unknown system service `{name}`"),
            Arity { service, expected, found, pos } => {
                write!(f, "{pos}: {service} takes {expected} argument(s), found {found}")
            }
            ExpectedInteger { service, pos } => write!(f, "{pos}: {service}: expected an integer argument"),
            ExpectedIdentifier { service, pos } => {
                write!(f, "{pos}: {service}: expected an identifier argument")
            }
            Unresolved { kind, id, pos } => write!(f, "{pos}: undeclared {kind} `{id}`"),
            BodyForUndeclaredTask { task, pos } => write!(f, "{pos}: body for undeclared task `{task}`"),
            DuplicateBody { task, pos } => write!(f, "{pos}: second body for task `{task}`"),
            MissingBody { task } => write!(f, "task `{task}` has no body"),
            ZeroTimeInterval { pos } => write!(f, "{pos}: TimeInterval must be at least 1"),
            EmptyLoop { pos } => write!(f, "{pos}: loop body must contain a statement"),
            GlobalDeclarationIgnored { name, pos } => write!(f, "{pos}: global `{name}` ignored"),
            NonTailTermination { task, pos } => {
                write!(f, "{pos}: task `{task}` terminates before the end of its body")
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TaskParseError {
    #[error("syntax error at {0}")]
    Syntax(#[from] LexError),
    #[error("invalid task file: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Semantic(Vec<TaskDiagnostic>),
}

pub fn parse_task_file(source: &str, config: &KernelConfig) -> Result<TaskBodies, TaskParseError> {
    parse_task_file_with_warnings(source, config).map(|(b, _)| b)
}

pub fn parse_task_file_with_warnings(
    source: &str,
    config: &KernelConfig,
) -> Result<(TaskBodies, Vec<TaskDiagnostic>), TaskParseError> {
    let mut cur = Cursor::new(tokenize(source)?, source);
    let mut p = Parser { config, diags: Vec::new() };
    let mut bodies = TaskBodies::new();

    while !cur.at_end() {
        let (head, pos) = cur.expect_ident()?;
        if head == "TASK" {
            let (name, name_pos) = cur.expect_ident()?;
            let statements = p.block(&mut cur)?;
            cur.eat_punct(';');
            if !config.tasks.contains_key(&name) {
                p.diags.push(TaskDiagnostic::BodyForUndeclaredTask { task: name, pos: name_pos });
            } else if bodies.contains_key(&name) {
                p.diags.push(TaskDiagnostic::DuplicateBody { task: name, pos: name_pos });
            } else {
                p.check_tail(&name, &statements, name_pos);
                bodies.insert(name.clone(), TaskBody { task_id: name, statements });
            }
        } else {
            // `int a;` and friends: C globals have no kernel meaning.
            let (name, _) = cur.expect_ident()?;
            cur.expect_punct(';')?;
            p.diags.push(TaskDiagnostic::GlobalDeclarationIgnored { name, pos });
        }
    }

    for t in config.tasks.keys() {
        if !bodies.contains_key(t) {
            p.diags.push(TaskDiagnostic::MissingBody { task: t.clone() });
        }
    }

    let (errors, warnings): (Vec<_>, Vec<_>) = p.diags.into_iter().partition(|d| d.is_error());
    if errors.is_empty() {
        Ok((bodies, warnings))
    } else {
        Err(TaskParseError::Semantic(errors))
    }
}

struct Parser<'a> {
    config: &'a KernelConfig,
    diags: Vec<TaskDiagnostic>,
}

enum Arg {
    Ident(String, Pos),
    Int(u64, Pos),
}

impl Parser<'_> {
    fn block(&mut self, cur: &mut Cursor) -> Result<Vec<Statement>, LexError> {
        cur.expect_punct('{')?;
        let mut out = Vec::new();
        while !cur.is_punct('}') {
            if let Some(s) = self.statement(cur)? {
                out.push(s);
            }
        }
        cur.expect_punct('}')?;
        Ok(out)
    }

    fn statement(&mut self, cur: &mut Cursor) -> Result<Option<Statement>, LexError> {
        let (name, pos) = cur.expect_ident()?;
        if name == "while" {
            cur.expect_punct('(')?;
            let (cond, cpos) = cur.expect_ident()?;
            if cond != "true" {
                return Err(LexError { pos: cpos, message: "only while(true) loops are supported".into() });
            }
            cur.expect_punct(')')?;
            let body = self.block(cur)?;
            cur.eat_punct(';');
            if body.is_empty() {
                self.diags.push(TaskDiagnostic::EmptyLoop { pos });
                return Ok(None);
            }
            return Ok(Some(Statement::WhileTrue(body)));
        }
        if name == "TimeInterval" {
            cur.expect_punct('=')?;
            let npos = cur.pos();
            let n = match cur.next() {
                Some(Token { tok: Tok::Int(n), .. }) => n,
                _ => return Err(LexError { pos: npos, message: "expected an integer after `TimeInterval =`".into() }),
            };
            cur.expect_punct(';')?;
            if n == 0 || n > u32::MAX as u64 {
                self.diags.push(TaskDiagnostic::ZeroTimeInterval { pos });
                return Ok(None);
            }
            return Ok(Some(Statement::TimeInterval(n as u32)));
        }

        cur.expect_punct('(')?;
        let mut args = Vec::new();
        if !cur.is_punct(')') {
            loop {
                let apos = cur.pos();
                match cur.next() {
                    Some(Token { tok: Tok::Ident(s), .. }) => args.push(Arg::Ident(s, apos)),
                    Some(Token { tok: Tok::Int(n), .. }) => args.push(Arg::Int(n, apos)),
                    Some(t) => {
                        return Err(LexError { pos: apos, message: format!("unexpected {} in argument list", t.tok) })
                    }
                    None => return Err(LexError { pos: apos, message: "unterminated argument list".into() }),
                }
                if !cur.eat_punct(',') {
                    break;
                }
            }
        }
        cur.expect_punct(')')?;
        cur.expect_punct(';')?;
        Ok(self.resolve_call(&name, args, pos).map(Statement::Call))
    }

    fn resolve_call(&mut self, name: &str, args: Vec<Arg>, pos: Pos) -> Option<ServiceCall> {
        let Some(sig) = signature(name) else {
            self.diags.push(TaskDiagnostic::UnknownService { name: name.to_string(), pos });
            return None;
        };
        if sig.len() != args.len() {
            self.diags.push(TaskDiagnostic::Arity {
                service: name.to_string(),
                expected: sig.len(),
                found: args.len(),
                pos,
            });
            return None;
        }
        let mut ids = Vec::new();
        let mut ints = Vec::new();
        let mut ok = true;
        for (kind, arg) in sig.iter().zip(args) {
            match (kind, arg) {
                (ArgKind::Int, Arg::Int(n, _)) if n <= u32::MAX as u64 => ints.push(n as u32),
                (ArgKind::Int, Arg::Int(_, p)) | (ArgKind::Int, Arg::Ident(_, p)) => {
                    self.diags.push(TaskDiagnostic::ExpectedInteger { service: name.to_string(), pos: p });
                    ok = false;
                }
                (_, Arg::Int(_, p)) => {
                    self.diags.push(TaskDiagnostic::ExpectedIdentifier { service: name.to_string(), pos: p });
                    ok = false;
                }
                (kind, Arg::Ident(id, p)) => {
                    let (declared, label) = match kind {
                        ArgKind::Task => (self.config.tasks.contains_key(&id), "task"),
                        ArgKind::Event => (self.config.events.contains(&id), "event"),
                        ArgKind::Resource => (self.config.resources.contains_key(&id), "resource"),
                        ArgKind::Alarm => (self.config.alarms.contains_key(&id), "alarm"),
                        ArgKind::Int => unreachable!(),
                    };
                    if !declared {
                        self.diags.push(TaskDiagnostic::Unresolved { kind: label, id: id.clone(), pos: p });
                        ok = false;
                    }
                    ids.push(id);
                }
            }
        }
        if !ok {
            return None;
        }
        let mut ids = ids.into_iter();
        let mut id = || ids.next().unwrap();
        Some(match name {
            "ActivateTask" => ServiceCall::ActivateTask(id()),
            "TerminateTask" => ServiceCall::TerminateTask,
            "ChainTask" => ServiceCall::ChainTask(id()),
            "Schedule" => ServiceCall::Schedule,
            "SetEvent" => {
                let t = id();
                ServiceCall::SetEvent(t, id())
            }
            "WaitEvent" => ServiceCall::WaitEvent(id()),
            "ClearEvent" => ServiceCall::ClearEvent(id()),
            "GetResource" => ServiceCall::GetResource(id()),
            "ReleaseResource" => ServiceCall::ReleaseResource(id()),
            "SetRelAlarm" => ServiceCall::SetRelAlarm(id(), ints[0], ints[1]),
            "SetAbsAlarm" => ServiceCall::SetAbsAlarm(id(), ints[0], ints[1]),
            "CancelAlarm" => ServiceCall::CancelAlarm(id()),
            _ => unreachable!(),
        })
    }

    fn check_tail(&mut self, task: &str, stmts: &[Statement], pos: Pos) {
        for (i, s) in stmts.iter().enumerate() {
            match s {
                Statement::Call(c) if c.is_terminating() && i + 1 != stmts.len() => {
                    self.diags.push(TaskDiagnostic::NonTailTermination { task: task.to_string(), pos });
                }
                Statement::WhileTrue(body) => self.check_tail(task, body, pos),
                _ => {}
            }
        }
    }
}

/// Converts a statement count of a code block into time units, given the
/// average statement count of one system service. Rounds to the nearest unit
/// with a floor of one.
pub fn estimate_time_interval(statement_count: u32, avg_service_statements: u32) -> u32 {
    assert!(statement_count >= 1 && avg_service_statements >= 1);
    let (n, d) = (statement_count as u64, avg_service_statements as u64);
    (((2 * n + d) / (2 * d)) as u32).max(1)
}

// ---------------------------------------------------------------------------
// Printing

fn write_stmts(f: &mut fmt::Formatter<'_>, stmts: &[Statement], indent: usize) -> fmt::Result {
    for s in stmts {
        let pad = "  ".repeat(indent);
        match s {
            Statement::Call(c) => writeln!(f, "{pad}{c};")?,
            Statement::TimeInterval(n) => writeln!(f, "{pad}TimeInterval = {n};")?,
            Statement::WhileTrue(body) => {
                writeln!(f, "{pad}while(true){{")?;
                write_stmts(f, body, indent + 1)?;
                writeln!(f, "{pad}}}")?;
            }
        }
    }
    Ok(())
}

impl fmt::Display for TaskBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "TASK {}{{", self.task_id)?;
        write_stmts(f, &self.statements, 1)?;
        writeln!(f, "}};")
    }
}

/// Renders a whole task file in declaration order of `config`.
pub fn unparse(bodies: &TaskBodies, config: &KernelConfig) -> String {
    let mut out = String::new();
    for t in config.tasks.keys() {
        if let Some(b) = bodies.get(t) {
            out.push_str(&b.to_string());
        }
    }
    out
}
