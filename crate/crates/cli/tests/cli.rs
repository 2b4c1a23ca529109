use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus/ems").join(name)
}

fn osekmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osekmc")).args(args).output().expect("spawn osekmc")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TRIVIAL_OIL: &str = "COUNTER C { MAXALLOWEDVALUE = 15; TICKSPERBASE = 1; MINCYCLE = 1; };\n\
    TASK T { PRIORITY = 1; SCHEDULE = FULL; AUTOSTART = TRUE; ACTIVATION = 1; };\n";
const TRIVIAL_TSK: &str = "TASK T { TerminateTask(); };\n";

fn trivial(dir: &Path) -> (PathBuf, PathBuf) {
    let (oil, tsk) = (dir.join("app.oil"), dir.join("app.tsk"));
    fs::write(&oil, TRIVIAL_OIL).unwrap();
    fs::write(&tsk, TRIVIAL_TSK).unwrap();
    (oil, tsk)
}

#[test]
fn run_ems_stops_at_deadlock() {
    let o = osekmc(&["run", p(&corpus("ems.oil")), p(&corpus("ems.tsk")), "--bound", "200"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("result: deadlock after 22 steps, counter 16"), "{}", stdout(&o));
}

#[test]
fn run_lenient_ems_hits_bound() {
    let o = osekmc(&["run", p(&corpus("ems.oil")), p(&corpus("ems.tsk")), "--bound", "50", "--semantics", "lenient"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn run_trivial_app_is_all_idle() {
    let d = tempfile::tempdir().unwrap();
    let (oil, tsk) = trivial(d.path());
    let o = osekmc(&["run", p(&oil), p(&tsk)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_task_file_is_an_input_error() {
    let o = osekmc(&["run", p(&corpus("ems.oil")), "/nonexistent/tasks.tsk"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
}

#[test]
fn search_final_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let o = osekmc(&["search-final", p(&corpus("ems.oil")), p(&corpus("ems.tsk")), "--out", p(d.path())]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("deadlock 0: 22 steps, counter 16"));
    assert!(d.path().join("deadlock-0.trace").exists());
    assert!(fs::read_to_string(d.path().join("graph.dot")).unwrap().starts_with("digraph"));

    let o = osekmc(&["search-final", p(&corpus("ems_repaired.oil")), p(&corpus("ems.tsk"))]);
    assert_eq!(code(&o), 0);

    let (oil, tsk) = trivial(d.path());
    let o = osekmc(&["search-final", p(&oil), p(&tsk)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("final states: 1"));

    let o = osekmc(&[
        "search-final",
        p(&corpus("ems.oil")),
        p(&corpus("ems.tsk")),
        "--semantics",
        "lenient",
        "--max-states",
        "100",
    ]);
    assert_eq!(code(&o), 4);
}

#[test]
fn ltlmc_verdicts_and_counterexample() {
    let d = tempfile::tempdir().unwrap();
    let o = osekmc(&[
        "ltlmc",
        p(&corpus("ems.oil")),
        p(&corpus("ems.tsk")),
        "--formula",
        p(&corpus("ems.ltl")),
        "--out",
        p(d.path()),
        "--trace-format",
        "machine",
    ]);
    assert_eq!(code(&o), 2);
    let out = stdout(&o);
    assert!(out.contains("SF: holds"), "{out}");
    assert!(out.contains("MAF: violated"), "{out}");
    let cex = fs::read_to_string(d.path().join("MAF.trace")).unwrap();
    assert!(cex.lines().next().unwrap().starts_with("step=0 choice=boot"));
    assert!(cex.contains("E_OS_LIMIT"));
}

#[test]
fn ltlmc_tautology_holds_and_bad_formula_fails() {
    let d = tempfile::tempdir().unwrap();
    let f = d.path().join("f.ltl");
    fs::write(&f, "taut: [] (running(Task_10ms) -> running(Task_10ms))\n").unwrap();
    let o = osekmc(&["ltlmc", p(&corpus("ems.oil")), p(&corpus("ems.tsk")), "--formula", p(&f)]);
    assert_eq!(code(&o), 0);

    fs::write(&f, "[] (running(Task_10ms) ->").unwrap();
    let o = osekmc(&["ltlmc", p(&corpus("ems.oil")), p(&corpus("ems.tsk")), "--formula", p(&f)]);
    assert_eq!(code(&o), 1);

    fs::write(&f, "[] running(NoSuchTask)").unwrap();
    let o = osekmc(&["ltlmc", p(&corpus("ems.oil")), p(&corpus("ems.tsk")), "--formula", p(&f)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn ltlmc_bounded_verdict() {
    let d = tempfile::tempdir().unwrap();
    let f = d.path().join("f.ltl");
    fs::write(&f, "[] !deadlocked\n").unwrap();
    let o =
        osekmc(&["ltlmc", p(&corpus("ems_repaired.oil")), p(&corpus("ems.tsk")), "--formula", p(&f), "--bound", "10"]);
    assert_eq!(code(&o), 5, "{}", stdout(&o));
}

#[test]
fn conform_original_and_repaired() {
    let d = tempfile::tempdir().unwrap();
    let args = |oil: &str| {
        vec![
            "conform".to_string(),
            corpus(oil).to_string_lossy().into_owned(),
            corpus("ems.tsk").to_string_lossy().into_owned(),
            "--props".into(),
            corpus("ems.props").to_string_lossy().into_owned(),
            "--test-report".into(),
            corpus("ems_testing.report").to_string_lossy().into_owned(),
            "--out".into(),
            d.path().to_string_lossy().into_owned(),
        ]
    };
    let a = args("ems.oil");
    let o = osekmc(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("kernel_inconformities=DF,MAF"));
    let report = fs::read_to_string(d.path().join("conformance.report")).unwrap();
    assert_eq!(report, stdout(&o), "report file matches standard output");
    assert!(d.path().join("DF.trace").exists());

    let o2 = osekmc(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(stdout(&o), stdout(&o2), "identical inputs give identical output");

    let a = args("ems_repaired.oil");
    let o = osekmc(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn conform_report_missing_entry() {
    let d = tempfile::tempdir().unwrap();
    let r = d.path().join("partial.report");
    fs::write(&r, "DF = pass\nME = pass\nPIF = pass\nSF = pass\nMAF = pass\n").unwrap();
    let o = osekmc(&[
        "conform",
        p(&corpus("ems.oil")),
        p(&corpus("ems.tsk")),
        "--props",
        p(&corpus("ems.props")),
        "--test-report",
        p(&r),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("PE"));
}

#[test]
fn unit_tick_mode_matches_jump_mode() {
    let run = |mode: &str| {
        stdout(&osekmc(&[
            "run",
            p(&corpus("ems.oil")),
            p(&corpus("ems.tsk")),
            "--semantics",
            "lenient",
            "--bound",
            "300",
            "--idle-tick-mode",
            mode,
        ]))
    };
    assert_eq!(run("jump"), run("unit"));
}
