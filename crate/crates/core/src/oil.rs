//! Static application configuration in the OIL block syntax.
//!
//! Supported objects are `TASK`, `COUNTER`, `ALARM`, `EVENT` and `RESOURCE`:
//!
//! ```text
//! COUNTER c { MAXALLOWEDVALUE = 65535; TICKSPERBASE = 2; MINCYCLE = 3; };
//! ALARM a { COUNTER = c; ACTION = ACTIVATETASK { TASK = t; }; AUTOSTART = FALSE; };
//! TASK t { PRIORITY = 1; SCHEDULE = FULL; AUTOSTART = TRUE; ACTIVATION = 1; };
//! ```
//!
//! Ceiling priorities of resources are computed from the tasks that declare
//! access to them; they are never read from the file.

use std::collections::BTreeSet;
use std::fmt;

use indexmap::{IndexMap, IndexSet};

use crate::lexer::{tokenize, Cursor, LexError, Pos, Tok, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchedulePolicy {
    Full,
    Non,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskDef {
    pub id: String,
    pub priority: u32,
    pub schedule: SchedulePolicy,
    pub autostart: bool,
    pub max_activations: u32,
    pub is_extended: bool,
    pub resources: BTreeSet<String>,
    pub events: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterDef {
    pub id: String,
    pub max_allowed_value: u32,
    /// Recorded only; it has no effect on the semantics.
    pub ticks_per_base: u32,
    pub min_cycle: u32,
    pub system: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AlarmAction {
    ActivateTask(String),
    SetEvent { task: String, event: String },
    Callback(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlarmDef {
    pub id: String,
    pub counter: String,
    pub action: AlarmAction,
    pub autostart: bool,
    pub autostart_offset: Option<u32>,
    pub autostart_cycle: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceDef {
    pub id: String,
    pub ceiling_priority: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KernelConfig {
    pub tasks: IndexMap<String, TaskDef>,
    pub counters: IndexMap<String, CounterDef>,
    pub alarms: IndexMap<String, AlarmDef>,
    pub events: IndexSet<String>,
    pub resources: IndexMap<String, ResourceDef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    DuplicateId { kind: &'static str, id: String },
    DanglingReference { from: String, kind: &'static str, target: String },
    ExtendedMultiActivation { task: String, max_activations: u32 },
    EventsOnBasicTask { task: String },
    ZeroActivations { task: String },
    ZeroMaxAllowedValue { counter: String },
    MinCycleExceedsMax { counter: String },
    NoSystemCounter,
    AmbiguousSystemCounter { counters: Vec<String> },
    MissingAttribute { entity: String, attr: &'static str },
    InvalidAttribute { entity: String, attr: String, reason: String },
    AutostartCycleOutOfRange { alarm: String, cycle: u32 },
    AutostartOffsetOutOfRange { alarm: String, offset: u32 },
    CeilingMismatch { resource: String, expected: u32, found: u32 },
    AlarmOnNonSystemCounter { alarm: String, counter: String },
    UnknownAttribute { entity: String, attr: String },
    UnknownObjectKind { kind: String, id: String },
    TicksPerBaseIgnored { counter: String, value: u32 },
}

impl Diagnostic {
    pub fn severity(&self) -> Severity {
        use Diagnostic::*;
        match self {
            AlarmOnNonSystemCounter { .. }
            | UnknownAttribute { .. }
            | UnknownObjectKind { .. }
            | TicksPerBaseIgnored { .. } => Severity::Warning,
            _ => Severity::Error,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity() == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Diagnostic::*;
        match self {
            DuplicateId { kind, id } => write!(f, "duplicate {kind} `{id}`"),
            DanglingReference { from, kind, target } => {
                write!(f, "`{from}` references undeclared {kind} `{target}`")
            }
            ExtendedMultiActivation { task, max_activations } => write!(
                f,
                "extended task `{task}` declares ACTIVATION = {max_activations}; extended tasks cannot be multiply activated"
            ),
            EventsOnBasicTask { task } => write!(f, "basic task `{task}` declares events"),
            ZeroActivations { task } => write!(f, "task `{task}` has ACTIVATION = 0"),
            ZeroMaxAllowedValue { counter } => write!(f, "counter `{counter}` has MAXALLOWEDVALUE = 0"),
            MinCycleExceedsMax { counter } => {
                write!(f, "counter `{counter}` has MINCYCLE greater than MAXALLOWEDVALUE")
            }
            NoSystemCounter => write!(f, "no system counter declared"),
            AmbiguousSystemCounter { counters } => write!(
                f,
                "several counters ({}) and none marked SYSTEM = TRUE",
                counters.join(", ")
            ),
            MissingAttribute { entity, attr } => write!(f, "`{entity}` is missing required attribute {attr}"),
            InvalidAttribute { entity, attr, reason } => write!(f, "`{entity}`: invalid {attr}: {reason}"),
            AutostartCycleOutOfRange { alarm, cycle } => {
                write!(f, "alarm `{alarm}`: autostart cycle {cycle} outside [MINCYCLE, MAXALLOWEDVALUE]")
            }
            AutostartOffsetOutOfRange { alarm, offset } => {
                write!(f, "alarm `{alarm}`: autostart offset {offset} exceeds MAXALLOWEDVALUE")
            }
            CeilingMismatch { resource, expected, found } => write!(
                f,
                "resource `{resource}` ceiling is {found}, expected {expected}"
            ),
            AlarmOnNonSystemCounter { alarm, counter } => write!(
                f,
                "alarm `{alarm}` is attached to `{counter}`, which is not the system counter; it never expires"
            ),
            UnknownAttribute { entity, attr } => write!(f, "`{entity}`: unknown attribute {attr} ignored"),
            UnknownObjectKind { kind, id } => write!(f, "unsupported object {kind} `{id}` ignored"),
            TicksPerBaseIgnored { counter, value } => write!(
                f,
                "counter `{counter}`: TICKSPERBASE = {value} is recorded but does not scale time"
            ),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OilError {
    #[error("syntax error at {0}")]
    Syntax(#[from] LexError),
    #[error("invalid configuration: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Semantic(Vec<Diagnostic>),
}

impl KernelConfig {
    /// The single counter driving time: the one marked `SYSTEM = TRUE`, or the
    /// sole declared counter.
    pub fn system_counter(&self) -> Option<&CounterDef> {
        let marked: Vec<_> = self.counters.values().filter(|c| c.system).collect();
        match (marked.len(), self.counters.len()) {
            (1, _) => Some(marked[0]),
            (0, 1) => self.counters.values().next(),
            _ => None,
        }
    }

    /// Ceiling of `resource` recomputed from the task table.
    pub fn compute_ceiling(&self, resource: &str) -> u32 {
        self.tasks.values().filter(|t| t.resources.contains(resource)).map(|t| t.priority).max().unwrap_or(0)
    }

    fn recompute_ceilings(&mut self) {
        let ceilings: Vec<(String, u32)> =
            self.resources.keys().map(|r| (r.clone(), self.compute_ceiling(r))).collect();
        for (r, c) in ceilings {
            if let Some(def) = self.resources.get_mut(&r) {
                def.ceiling_priority = c;
            }
        }
    }

    /// Non-fatal observations about an otherwise valid configuration.
    pub fn warnings(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for c in self.counters.values() {
            if c.ticks_per_base != 1 {
                out.push(Diagnostic::TicksPerBaseIgnored { counter: c.id.clone(), value: c.ticks_per_base });
            }
        }
        if let Some(sys) = self.system_counter() {
            for a in self.alarms.values() {
                if a.counter != sys.id && self.counters.contains_key(&a.counter) {
                    out.push(Diagnostic::AlarmOnNonSystemCounter { alarm: a.id.clone(), counter: a.counter.clone() });
                }
            }
        }
        out
    }
}

/// Every invariant violation of `config`; an empty list means it is valid.
pub fn validate(config: &KernelConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    for t in config.tasks.values() {
        if t.max_activations == 0 {
            out.push(Diagnostic::ZeroActivations { task: t.id.clone() });
        }
        if t.is_extended && t.max_activations > 1 {
            out.push(Diagnostic::ExtendedMultiActivation { task: t.id.clone(), max_activations: t.max_activations });
        }
        if !t.events.is_empty() && !t.is_extended {
            out.push(Diagnostic::EventsOnBasicTask { task: t.id.clone() });
        }
        for r in &t.resources {
            if !config.resources.contains_key(r) {
                out.push(dangling(&t.id, "resource", r));
            }
        }
        for e in &t.events {
            if !config.events.contains(e) {
                out.push(dangling(&t.id, "event", e));
            }
        }
    }

    for c in config.counters.values() {
        if c.max_allowed_value == 0 {
            out.push(Diagnostic::ZeroMaxAllowedValue { counter: c.id.clone() });
        }
        if c.min_cycle > c.max_allowed_value {
            out.push(Diagnostic::MinCycleExceedsMax { counter: c.id.clone() });
        }
    }
    if config.system_counter().is_none() {
        let marked: Vec<String> = config.counters.values().filter(|c| c.system).map(|c| c.id.clone()).collect();
        if config.counters.is_empty() {
            out.push(Diagnostic::NoSystemCounter);
        } else if marked.len() > 1 {
            out.push(Diagnostic::AmbiguousSystemCounter { counters: marked });
        } else {
            out.push(Diagnostic::AmbiguousSystemCounter { counters: config.counters.keys().cloned().collect() });
        }
    }

    for a in config.alarms.values() {
        let counter = config.counters.get(&a.counter);
        if counter.is_none() {
            out.push(dangling(&a.id, "counter", &a.counter));
        }
        match &a.action {
            AlarmAction::ActivateTask(t) => {
                if !config.tasks.contains_key(t) {
                    out.push(dangling(&a.id, "task", t));
                }
            }
            AlarmAction::SetEvent { task, event } => {
                if !config.tasks.contains_key(task) {
                    out.push(dangling(&a.id, "task", task));
                }
                if !config.events.contains(event) {
                    out.push(dangling(&a.id, "event", event));
                }
            }
            AlarmAction::Callback(_) => {}
        }
        if a.autostart {
            match (a.autostart_offset, a.autostart_cycle) {
                (None, _) => out.push(Diagnostic::MissingAttribute { entity: a.id.clone(), attr: "AUTOSTART_OFFSET" }),
                (_, None) => out.push(Diagnostic::MissingAttribute { entity: a.id.clone(), attr: "AUTOSTART_CYCLE" }),
                (Some(offset), Some(cycle)) => {
                    if let Some(c) = counter {
                        if offset > c.max_allowed_value {
                            out.push(Diagnostic::AutostartOffsetOutOfRange { alarm: a.id.clone(), offset });
                        }
                        if cycle != 0 && (cycle < c.min_cycle || cycle > c.max_allowed_value) {
                            out.push(Diagnostic::AutostartCycleOutOfRange { alarm: a.id.clone(), cycle });
                        }
                    }
                }
            }
        }
    }

    for r in config.resources.values() {
        let expected = config.compute_ceiling(&r.id);
        if expected != r.ceiling_priority {
            out.push(Diagnostic::CeilingMismatch { resource: r.id.clone(), expected, found: r.ceiling_priority });
        }
    }
    out
}

fn dangling(from: &str, kind: &'static str, target: &str) -> Diagnostic {
    Diagnostic::DanglingReference { from: from.to_string(), kind, target: target.to_string() }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone)]
enum Value {
    Int(u64),
    Ident(String),
    Str(String),
    Block(String, Vec<Attr>),
}

#[derive(Debug, Clone)]
struct Attr {
    name: String,
    value: Value,
    pos: Pos,
}

struct Decl {
    kind: String,
    id: String,
    attrs: Vec<Attr>,
}

/// Parses and validates an OIL source. Warnings are dropped; use
/// [`parse_oil_with_warnings`] to see them.
pub fn parse_oil(source: &str) -> Result<KernelConfig, OilError> {
    parse_oil_with_warnings(source).map(|(c, _)| c)
}

pub fn parse_oil_with_warnings(source: &str) -> Result<(KernelConfig, Vec<Diagnostic>), OilError> {
    let mut cur = Cursor::new(tokenize(source)?, source);
    let mut decls = Vec::new();
    while !cur.at_end() {
        decls.push(parse_decl(&mut cur)?);
    }

    let mut b = Builder::default();
    for d in decls {
        b.add(d);
    }
    let mut config = b.config;
    config.recompute_ceilings();

    let mut errors = b.errors;
    errors.extend(validate(&config));
    if !errors.is_empty() {
        return Err(OilError::Semantic(errors));
    }
    let mut warnings = b.warnings;
    warnings.extend(config.warnings());
    Ok((config, warnings))
}

fn parse_decl(cur: &mut Cursor) -> Result<Decl, LexError> {
    let (kind, _) = cur.expect_ident()?;
    let (id, _) = cur.expect_ident()?;
    cur.expect_punct('{')?;
    let attrs = parse_attrs(cur)?;
    cur.expect_punct('}')?;
    cur.expect_punct(';')?;
    Ok(Decl { kind, id, attrs })
}

fn parse_attrs(cur: &mut Cursor) -> Result<Vec<Attr>, LexError> {
    let mut attrs = Vec::new();
    while !cur.is_punct('}') {
        let (name, pos) = cur.expect_ident()?;
        cur.expect_punct('=')?;
        let value = parse_value(cur)?;
        cur.expect_punct(';')?;
        attrs.push(Attr { name, value, pos });
    }
    Ok(attrs)
}

fn parse_value(cur: &mut Cursor) -> Result<Value, LexError> {
    let pos = cur.pos();
    match cur.next() {
        Some(Token { tok: Tok::Int(n), .. }) => Ok(Value::Int(n)),
        Some(Token { tok: Tok::Str(s), .. }) => Ok(Value::Str(s)),
        Some(Token { tok: Tok::Ident(s), .. }) => {
            if cur.eat_punct('{') {
                let inner = parse_attrs(cur)?;
                cur.expect_punct('}')?;
                Ok(Value::Block(s, inner))
            } else {
                Ok(Value::Ident(s))
            }
        }
        Some(t) => Err(LexError { pos, message: format!("expected attribute value, found {}", t.tok) }),
        None => Err(LexError { pos, message: "expected attribute value, found end of input".into() }),
    }
}

#[derive(Default)]
struct Builder {
    config: KernelConfig,
    errors: Vec<Diagnostic>,
    warnings: Vec<Diagnostic>,
}

impl Builder {
    fn invalid(&mut self, entity: &str, attr: &Attr, reason: &str) {
        self.errors.push(Diagnostic::InvalidAttribute {
            entity: entity.to_string(),
            attr: format!("{} (at {})", attr.name, attr.pos),
            reason: reason.to_string(),
        });
    }

    fn unknown(&mut self, entity: &str, attr: &Attr) {
        self.warnings.push(Diagnostic::UnknownAttribute { entity: entity.to_string(), attr: attr.name.clone() });
    }

    fn int(&mut self, entity: &str, attr: &Attr) -> Option<u32> {
        match &attr.value {
            Value::Int(n) if *n <= u32::MAX as u64 => Some(*n as u32),
            Value::Int(_) => {
                self.invalid(entity, attr, "value out of range");
                None
            }
            _ => {
                self.invalid(entity, attr, "expected an integer");
                None
            }
        }
    }

    fn boolean(&mut self, entity: &str, attr: &Attr) -> Option<bool> {
        match &attr.value {
            Value::Int(0) => Some(false),
            Value::Int(1) => Some(true),
            Value::Ident(s) | Value::Block(s, _) if s.eq_ignore_ascii_case("true") => Some(true),
            Value::Ident(s) | Value::Block(s, _) if s.eq_ignore_ascii_case("false") => Some(false),
            _ => {
                self.invalid(entity, attr, "expected TRUE or FALSE");
                None
            }
        }
    }

    fn ident(&mut self, entity: &str, attr: &Attr) -> Option<String> {
        match &attr.value {
            Value::Ident(s) => Some(s.clone()),
            _ => {
                self.invalid(entity, attr, "expected an identifier");
                None
            }
        }
    }

    fn add(&mut self, d: Decl) {
        let duplicate = match d.kind.as_str() {
            "TASK" => self.config.tasks.contains_key(&d.id),
            "COUNTER" => self.config.counters.contains_key(&d.id),
            "ALARM" => self.config.alarms.contains_key(&d.id),
            "EVENT" => self.config.events.contains(&d.id),
            "RESOURCE" => self.config.resources.contains_key(&d.id),
            _ => false,
        };
        if duplicate {
            let kind = match d.kind.as_str() {
                "TASK" => "task",
                "COUNTER" => "counter",
                "ALARM" => "alarm",
                "EVENT" => "event",
                _ => "resource",
            };
            self.errors.push(Diagnostic::DuplicateId { kind, id: d.id });
            return;
        }
        match d.kind.as_str() {
            "TASK" => self.add_task(d),
            "COUNTER" => self.add_counter(d),
            "ALARM" => self.add_alarm(d),
            "EVENT" => {
                for a in &d.attrs {
                    self.unknown(&d.id, a);
                }
                self.config.events.insert(d.id);
            }
            "RESOURCE" => {
                for a in &d.attrs {
                    if a.name != "RESOURCEPROPERTY" {
                        self.unknown(&d.id, a);
                    }
                }
                self.config.resources.insert(d.id.clone(), ResourceDef { id: d.id, ceiling_priority: 0 });
            }
            _ => self.warnings.push(Diagnostic::UnknownObjectKind { kind: d.kind, id: d.id }),
        }
    }

    fn add_task(&mut self, d: Decl) {
        let mut priority = None;
        let mut t = TaskDef {
            id: d.id.clone(),
            priority: 0,
            schedule: SchedulePolicy::Full,
            autostart: false,
            max_activations: 1,
            is_extended: false,
            resources: BTreeSet::new(),
            events: BTreeSet::new(),
        };
        let mut explicit_extended = None;
        for a in &d.attrs {
            match a.name.as_str() {
                "PRIORITY" => priority = self.int(&d.id, a),
                "SCHEDULE" => match &a.value {
                    Value::Ident(s) if s == "FULL" => t.schedule = SchedulePolicy::Full,
                    Value::Ident(s) if s == "NON" => t.schedule = SchedulePolicy::Non,
                    _ => self.invalid(&d.id, a, "expected FULL or NON"),
                },
                "AUTOSTART" => t.autostart = self.boolean(&d.id, a).unwrap_or(false),
                "ACTIVATION" => t.max_activations = self.int(&d.id, a).unwrap_or(1),
                "RESOURCE" => {
                    if let Some(r) = self.ident(&d.id, a) {
                        t.resources.insert(r);
                    }
                }
                "EVENT" => {
                    if let Some(e) = self.ident(&d.id, a) {
                        t.events.insert(e);
                    }
                }
                "EXTENDED" => explicit_extended = self.boolean(&d.id, a),
                _ => self.unknown(&d.id, a),
            }
        }
        match priority {
            Some(p) => t.priority = p,
            None if !d.attrs.iter().any(|a| a.name == "PRIORITY") => {
                self.errors.push(Diagnostic::MissingAttribute { entity: d.id.clone(), attr: "PRIORITY" })
            }
            None => {}
        }
        t.is_extended = explicit_extended.unwrap_or(!t.events.is_empty());
        self.config.tasks.insert(d.id, t);
    }

    fn add_counter(&mut self, d: Decl) {
        let mut c =
            CounterDef { id: d.id.clone(), max_allowed_value: 0, ticks_per_base: 1, min_cycle: 0, system: false };
        let mut has_max = false;
        for a in &d.attrs {
            match a.name.as_str() {
                "MAXALLOWEDVALUE" => {
                    has_max = true;
                    c.max_allowed_value = self.int(&d.id, a).unwrap_or(0);
                }
                "TICKSPERBASE" | "TICKPERBASE" => c.ticks_per_base = self.int(&d.id, a).unwrap_or(1),
                "MINCYCLE" | "MINICYCLE" => c.min_cycle = self.int(&d.id, a).unwrap_or(0),
                "SYSTEM" => c.system = self.boolean(&d.id, a).unwrap_or(false),
                _ => self.unknown(&d.id, a),
            }
        }
        if !has_max {
            self.errors.push(Diagnostic::MissingAttribute { entity: d.id.clone(), attr: "MAXALLOWEDVALUE" });
        }
        self.config.counters.insert(d.id, c);
    }

    fn add_alarm(&mut self, d: Decl) {
        let mut counter = None;
        let mut action = None;
        let mut autostart = false;
        let mut offset = None;
        let mut cycle = None;
        for a in &d.attrs {
            match a.name.as_str() {
                "COUNTER" => counter = self.ident(&d.id, a),
                "ACTION" => action = self.action(&d.id, a),
                "AUTOSTART" => {
                    autostart = self.boolean(&d.id, a).unwrap_or(false);
                    // OIL 2.5 nests the start parameters under AUTOSTART = TRUE { ... }.
                    if let Value::Block(_, inner) = &a.value {
                        for ia in inner {
                            match ia.name.as_str() {
                                "ALARMTIME" => offset = self.int(&d.id, ia),
                                "CYCLETIME" => cycle = self.int(&d.id, ia),
                                _ => self.unknown(&d.id, ia),
                            }
                        }
                    }
                }
                "AUTOSTART_OFFSET" => offset = self.int(&d.id, a),
                "AUTOSTART_CYCLE" => cycle = self.int(&d.id, a),
                _ => self.unknown(&d.id, a),
            }
        }
        let (Some(counter), Some(action)) = (counter.clone(), action.clone()) else {
            if counter.is_none() {
                self.errors.push(Diagnostic::MissingAttribute { entity: d.id.clone(), attr: "COUNTER" });
            }
            if action.is_none() && !d.attrs.iter().any(|a| a.name == "ACTION") {
                self.errors.push(Diagnostic::MissingAttribute { entity: d.id.clone(), attr: "ACTION" });
            }
            return;
        };
        self.config.alarms.insert(
            d.id.clone(),
            AlarmDef { id: d.id, counter, action, autostart, autostart_offset: offset, autostart_cycle: cycle },
        );
    }

    fn action(&mut self, entity: &str, attr: &Attr) -> Option<AlarmAction> {
        let Value::Block(kind, inner) = &attr.value else {
            self.invalid(entity, attr, "expected ACTIVATETASK { .. }, SETEVENT { .. } or ALARMCALLBACK { .. }");
            return None;
        };
        let find = |name: &str| inner.iter().find(|a| a.name == name);
        match kind.as_str() {
            "ACTIVATETASK" => {
                let task = find("TASK").and_then(|a| match &a.value {
                    Value::Ident(s) => Some(s.clone()),
                    _ => None,
                });
                if task.is_none() {
                    self.invalid(entity, attr, "ACTIVATETASK requires TASK = <id>");
                }
                task.map(AlarmAction::ActivateTask)
            }
            "SETEVENT" => {
                let get = |name: &str| {
                    find(name).and_then(|a| match &a.value {
                        Value::Ident(s) => Some(s.clone()),
                        _ => None,
                    })
                };
                match (get("TASK"), get("EVENT")) {
                    (Some(task), Some(event)) => Some(AlarmAction::SetEvent { task, event }),
                    _ => {
                        self.invalid(entity, attr, "SETEVENT requires TASK = <id> and EVENT = <id>");
                        None
                    }
                }
            }
            "ALARMCALLBACK" => {
                let name = find("ALARMCALLBACKNAME").and_then(|a| match &a.value {
                    Value::Str(s) | Value::Ident(s) => Some(s.clone()),
                    _ => None,
                });
                if name.is_none() {
                    self.invalid(entity, attr, "ALARMCALLBACK requires ALARMCALLBACKNAME");
                }
                name.map(AlarmAction::Callback)
            }
            other => {
                self.invalid(entity, attr, &format!("unknown action kind {other}"));
                None
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Printing

impl fmt::Display for KernelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.counters.values() {
            writeln!(f, "COUNTER {} {{", c.id)?;
            writeln!(f, "  MAXALLOWEDVALUE = {};", c.max_allowed_value)?;
            writeln!(f, "  TICKSPERBASE = {};", c.ticks_per_base)?;
            writeln!(f, "  MINCYCLE = {};", c.min_cycle)?;
            if c.system {
                writeln!(f, "  SYSTEM = TRUE;")?;
            }
            writeln!(f, "}};")?;
        }
        for e in &self.events {
            writeln!(f, "EVENT {e} {{ }};")?;
        }
        for r in self.resources.values() {
            writeln!(f, "RESOURCE {} {{ }};", r.id)?;
        }
        for t in self.tasks.values() {
            writeln!(f, "TASK {} {{", t.id)?;
            writeln!(f, "  PRIORITY = {};", t.priority)?;
            let sched = match t.schedule {
                SchedulePolicy::Full => "FULL",
                SchedulePolicy::Non => "NON",
            };
            writeln!(f, "  SCHEDULE = {sched};")?;
            writeln!(f, "  AUTOSTART = {};", bool_kw(t.autostart))?;
            writeln!(f, "  ACTIVATION = {};", t.max_activations)?;
            if t.is_extended != !t.events.is_empty() {
                writeln!(f, "  EXTENDED = {};", bool_kw(t.is_extended))?;
            }
            for r in &t.resources {
                writeln!(f, "  RESOURCE = {r};")?;
            }
            for e in &t.events {
                writeln!(f, "  EVENT = {e};")?;
            }
            writeln!(f, "}};")?;
        }
        for a in self.alarms.values() {
            writeln!(f, "ALARM {} {{", a.id)?;
            writeln!(f, "  COUNTER = {};", a.counter)?;
            match &a.action {
                AlarmAction::ActivateTask(t) => writeln!(f, "  ACTION = ACTIVATETASK {{ TASK = {t}; }};")?,
                AlarmAction::SetEvent { task, event } => {
                    writeln!(f, "  ACTION = SETEVENT {{ TASK = {task}; EVENT = {event}; }};")?
                }
                AlarmAction::Callback(n) => {
                    writeln!(f, "  ACTION = ALARMCALLBACK {{ ALARMCALLBACKNAME = \"{n}\"; }};")?
                }
            }
            writeln!(f, "  AUTOSTART = {};", bool_kw(a.autostart))?;
            if let Some(o) = a.autostart_offset {
                writeln!(f, "  AUTOSTART_OFFSET = {o};")?;
            }
            if let Some(c) = a.autostart_cycle {
                writeln!(f, "  AUTOSTART_CYCLE = {c};")?;
            }
            writeln!(f, "}};")?;
        }
        Ok(())
    }
}

fn bool_kw(b: bool) -> &'static str {
    if b {
        "TRUE"
    } else {
        "FALSE"
    }
}
