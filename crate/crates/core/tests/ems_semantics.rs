mod common;

use common::*;
use osek_core::conformance::{adjudicate, emit_report, parse_test_report, PropertyId, Verifier};
use osek_core::explorer::{build_graph, run, search_final, ExploreConfig, StuckKind};
use osek_core::kernel::{Status, StatusCode};
use osek_core::ltl::{model_check, parse_formula_file, Verdict};
use osek_core::oil::parse_oil;
use osek_core::task_lang::parse_task_file;

fn cfg() -> ExploreConfig {
    ExploreConfig { bound: 5000, ..ExploreConfig::default() }
}

#[test]
fn original_run_deadlocks_at_sixteen() {
    let k = kernel(EMS_OIL, EMS_TSK, strict());
    let (trace, end) = run(&k, &k.boot().unwrap(), 1000);
    assert_eq!(end, Some(StuckKind::Deadlock));
    assert_eq!(trace.len(), 22);
    assert_eq!(trace.last().counter, 16);
    assert_eq!(trace.last().status, Status::Error(StatusCode::Limit));
}

#[test]
fn shortest_deadlock_ends_at_sixteen() {
    let k = kernel(EMS_OIL, EMS_TSK, strict());
    let r = search_final(&k, &k.boot().unwrap(), &cfg());
    assert_eq!(r.deadlocks[0].last().counter, 16);
    assert!(r.finals.is_empty());
}

#[test]
fn repaired_priorities_never_error() {
    for opts in [strict(), lenient()] {
        let k = kernel(EMS_REPAIRED_OIL, EMS_TSK, opts);
        let g = build_graph(&k, &k.boot().unwrap(), &cfg());
        assert!(!g.truncated());
        assert_eq!(g.states.iter().filter(|s| s.last_label.error().is_some()).count(), 0);
    }
}

#[test]
fn formula_file_verdicts() {
    let formulas = parse_formula_file(include_str!("../corpus/ems/ems.ltl")).unwrap();
    let names: Vec<&str> = formulas.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, ["SF", "MAF", "DF"]);
    let k = kernel(EMS_OIL, EMS_TSK, lenient());
    let g = build_graph(&k, &k.boot().unwrap(), &cfg());
    let verdicts: Vec<bool> = formulas.iter().map(|f| model_check(&k, &g, &f.formula).unwrap().is_violated()).collect();
    // Lenient semantics never deadlocks; the limit error shows up as MAF.
    assert_eq!(verdicts, [false, true, false]);
    let Verdict::Violated { trace } = model_check(&k, &g, &formulas[1].formula).unwrap() else { unreachable!() };
    assert_eq!(osek_core::explorer::replay(&k, &trace), Ok(()));
}

#[test]
fn report_lists_inconformities() {
    let c = parse_oil(EMS_OIL).unwrap();
    let b = parse_task_file(EMS_TSK, &c).unwrap();
    let v = Verifier::new(&c, &b, cfg(), Default::default()).unwrap();
    let res = v.check_all(&PropertyId::ALL);
    let rows = adjudicate(&res, &parse_test_report(EMS_REPORT).unwrap());
    let text = emit_report(&v.lenient, &rows, &res);
    assert_eq!(text, emit_report(&v.lenient, &rows, &res));
    assert!(text.contains("kernel_inconformities=DF,MAF"), "{text}");
}
