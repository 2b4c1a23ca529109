//! `osekmc`: run, search, model-check and adjudicate OSEK applications.
//!
//! Exit codes: 0 success, 1 input error, 2 deadlock / violation /
//! inconformity, 3 `run` stopped at the bound, 4 state cap reached before a
//! verdict, 5 properties hold only up to the bound.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use osek_core::conformance::{
    adjudicate, all_conform, emit_report, parse_property_list, parse_test_report, PropertyResult, Verifier,
};
use osek_core::explorer::{build_graph, render_trace, run, search_final, ExploreConfig, StuckKind, Trace, TraceFormat};
use osek_core::kernel::{Kernel, Options, TimeMode};
use osek_core::ltl::{model_check, parse_formula_file, Verdict};
use osek_core::oil::{parse_oil_with_warnings, KernelConfig};
use osek_core::task_lang::{parse_task_file_with_warnings, TaskBodies};

#[derive(Parser)]
#[command(name = "osekmc", version, about = "Executable OSEK/VDX kernel semantics and LTL model checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one maximal trace, always taking the first enabled choice.
    Run(Common),
    /// Explore every reachable state and report final states and deadlocks.
    SearchFinal(Common),
    /// Check the LTL formulas of a formula file.
    Ltlmc {
        #[command(flatten)]
        common: Common,
        /// Formula file: one formula per line, optionally `name: formula`.
        #[arg(long)]
        formula: PathBuf,
    },
    /// Verify the property catalog and adjudicate against a test report.
    Conform {
        #[command(flatten)]
        common: Common,
        /// Property ids to check, one per line.
        #[arg(long)]
        props: PathBuf,
        /// Testing results: `ID = pass|fail` per line.
        #[arg(long)]
        test_report: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// OIL configuration.
    oil: PathBuf,
    /// Task bodies.
    tasks: PathBuf,
    /// Depth bound in transitions.
    #[arg(long, default_value_t = 10_000)]
    bound: usize,
    /// Cap on stored states.
    #[arg(long, default_value_t = 5_000_000)]
    max_states: usize,
    /// Directory for traces, graphs and reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    trace_format: Format,
    #[arg(long, value_enum, default_value_t = IdleTick::Jump)]
    idle_tick_mode: IdleTick,
    /// Exploration threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Error handling: `strict` stops at the first error status, `lenient`
    /// records it and continues. Defaults to strict for `run` and
    /// `search-final`, lenient for `ltlmc`; `conform` picks per property.
    #[arg(long, value_enum)]
    semantics: Option<Semantics>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Clone, Copy, ValueEnum)]
enum IdleTick {
    Jump,
    Unit,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Semantics {
    Strict,
    Lenient,
}

struct Inputs {
    config: KernelConfig,
    bodies: TaskBodies,
}

impl Common {
    fn load(&self) -> Result<Inputs> {
        let oil = read(&self.oil)?;
        let tsk = read(&self.tasks)?;
        let (config, warnings) = parse_oil_with_warnings(&oil).with_context(|| format!("{}", self.oil.display()))?;
        for w in warnings {
            eprintln!("warning: {}: {w}", self.oil.display());
        }
        let (bodies, warnings) =
            parse_task_file_with_warnings(&tsk, &config).with_context(|| format!("{}", self.tasks.display()))?;
        for w in warnings {
            eprintln!("warning: {}: {w}", self.tasks.display());
        }
        Ok(Inputs { config, bodies })
    }

    fn time_mode(&self) -> TimeMode {
        match self.idle_tick_mode {
            IdleTick::Jump => TimeMode::Jump,
            IdleTick::Unit => TimeMode::Unit,
        }
    }

    fn kernel(&self, inputs: &Inputs, default: Semantics) -> Result<Kernel> {
        let strict = self.semantics.unwrap_or(default) == Semantics::Strict;
        let options = Options { strict, time_mode: self.time_mode(), ..Options::default() };
        let k = Kernel::new(&inputs.config, &inputs.bodies, options)?;
        k.boot()?;
        Ok(k)
    }

    fn explore(&self) -> ExploreConfig {
        ExploreConfig { bound: self.bound, max_states: self.max_states, workers: self.workers.max(1) }
    }

    fn format(&self) -> TraceFormat {
        match self.trace_format {
            Format::Text => TraceFormat::Text,
            Format::Machine => TraceFormat::Machine,
        }
    }

    fn out_dir(&self) -> Result<Option<&Path>> {
        if let Some(d) = &self.out {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(self.out.as_deref())
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        if let Some(dir) = self.out_dir()? {
            let path = dir.join(name);
            fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

/// File-name-safe version of a formula or property name.
fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn cmd_run(c: &Common) -> Result<u8> {
    let inputs = c.load()?;
    let k = c.kernel(&inputs, Semantics::Strict)?;
    let (trace, end) = run(&k, &k.boot()?, c.bound);
    let text = render_trace(&k, &trace, c.format());
    print!("{text}");
    c.write("run.trace", &text)?;
    println!("\nfinal state\n{}", k.snapshot(trace.last()));
    let (result, code) = match end {
        Some(StuckKind::AllIdle) => ("all-idle", 0),
        Some(StuckKind::Deadlock) => ("deadlock", 2),
        None => ("bound reached", 3),
    };
    println!("result: {result} after {} steps, counter {}", trace.len(), trace.last().counter);
    Ok(code)
}

fn trace_summary(k: &Kernel, t: &Trace) -> String {
    let last = t.last();
    format!("{} steps, counter {}, state {}", t.len(), last.counter, k.state_hash(last))
}

fn cmd_search_final(c: &Common) -> Result<u8> {
    let inputs = c.load()?;
    let k = c.kernel(&inputs, Semantics::Strict)?;
    let init = k.boot()?;
    let r = search_final(&k, &init, &c.explore());
    println!("states: {}", r.states);
    if r.truncated {
        println!("note: some paths reached the bound of {} transitions", c.bound);
    }
    println!("final states: {}", r.finals.len());
    for (i, t) in r.finals.iter().enumerate() {
        println!("  final {i}: {}", trace_summary(&k, t));
        c.write(&format!("final-{i}.trace"), &render_trace(&k, t, c.format()))?;
    }
    println!("deadlocks: {}", r.deadlocks.len());
    for (i, t) in r.deadlocks.iter().enumerate() {
        println!("  deadlock {i}: {}", trace_summary(&k, t));
        c.write(&format!("deadlock-{i}.trace"), &render_trace(&k, t, c.format()))?;
    }
    if let Some(t) = r.deadlocks.first() {
        println!("\nshortest deadlock witness");
        print!("{}", render_trace(&k, t, c.format()));
    }
    if c.out.is_some() {
        c.write("graph.dot", &build_graph(&k, &init, &c.explore()).to_dot(&k))?;
    }
    Ok(if !r.deadlocks.is_empty() {
        2
    } else if r.resource_limited {
        println!("state cap of {} reached", c.max_states);
        4
    } else {
        0
    })
}

fn cmd_ltlmc(c: &Common, formula: &Path) -> Result<u8> {
    let inputs = c.load()?;
    let formulas = parse_formula_file(&read(formula)?).with_context(|| format!("{}", formula.display()))?;
    if formulas.is_empty() {
        bail!("{}: no formulas", formula.display());
    }
    let k = c.kernel(&inputs, Semantics::Lenient)?;
    for f in &formulas {
        for p in f.formula.atoms() {
            p.validate(&k).with_context(|| format!("formula {}", f.name))?;
        }
    }
    let g = build_graph(&k, &k.boot()?, &c.explore());
    let (mut violated, mut bounded) = (false, false);
    for f in &formulas {
        match model_check(&k, &g, &f.formula)? {
            Verdict::Holds => println!("{}: holds  {}", f.name, f.formula),
            Verdict::BoundedHolds { bound } => {
                bounded = true;
                println!("{}: holds up to bound {bound}  {}", f.name, f.formula);
            }
            Verdict::Violated { trace } => {
                violated = true;
                println!("{}: violated  {}", f.name, f.formula);
                let text = render_trace(&k, &trace, c.format());
                if c.out.is_some() {
                    c.write(&format!("{}.trace", file_stem(&f.name)), &text)?;
                } else {
                    print!("{text}");
                }
            }
        }
    }
    if g.resource_limited && !violated {
        println!("state cap of {} reached", c.max_states);
        return Ok(4);
    }
    Ok(if violated {
        2
    } else if bounded {
        5
    } else {
        0
    })
}

fn cmd_conform(c: &Common, props: &Path, report: &Path) -> Result<u8> {
    let inputs = c.load()?;
    let ids = parse_property_list(&read(props)?).with_context(|| format!("{}", props.display()))?;
    let testing = parse_test_report(&read(report)?).with_context(|| format!("{}", report.display()))?;
    if let Some(missing) = ids.iter().find(|id| !testing.0.contains_key(id)) {
        bail!("{}: no testing result for {missing}", report.display());
    }
    let v = Verifier::new(&inputs.config, &inputs.bodies, c.explore(), c.time_mode())?;
    let results = v.check_all(&ids);
    let rows = adjudicate(&results, &testing);
    let text = emit_report(&v.lenient, &rows, &results);
    print!("{text}");
    c.write("conformance.report", &text)?;
    for r in &results {
        if let Some(w) = r.result.witness() {
            let k = if r.id == osek_core::conformance::PropertyId::DF { &v.strict } else { &v.lenient };
            c.write(&format!("{}.trace", r.id), &render_trace(k, w, c.format()))?;
        }
    }
    if results.iter().any(|r| matches!(r.result, PropertyResult::ResourceLimit { .. })) {
        return Ok(4);
    }
    Ok(if all_conform(&rows) { 0 } else { 2 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::SearchFinal(c) => cmd_search_final(c),
        Command::Ltlmc { common, formula } => cmd_ltlmc(common, formula),
        Command::Conform { common, props, test_report } => cmd_conform(common, props, test_report),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
