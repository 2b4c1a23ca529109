mod common;

use common::*;
use osek_core::explorer::{next_rule, run, step, Choice, Rule, StuckKind};
use osek_core::kernel::{KernelError, Label, Service, Signal, Status, StatusCode, TaskState};

fn terminate_bodies(names: &[&str]) -> String {
    names.iter().map(|n| format!("TASK {n} {{ TerminateTask(); }};\n")).collect()
}

fn status_of(s: &osek_core::kernel::KernelState) -> StatusCode {
    match &s.last_label {
        Label::Service { status, .. } => *status,
        other => panic!("not a service label: {other:?}"),
    }
}

#[test]
fn boot_runs_the_only_autostart_task() {
    let k = kernel(EMS_OIL, EMS_TSK, lenient());
    let s = k.boot().unwrap();
    let init = k.task_id("SystemInit").unwrap();
    assert_eq!(s.running, Some(init));
    assert_eq!(s.counter, 0);
    for t in k.task_ids().filter(|t| *t != init) {
        assert_eq!(s.task(t).state, TaskState::Suspended);
    }
}

#[test]
fn boot_picks_highest_autostart() {
    let oil = counter(127, 1) + &task("Lo", 1, true, 1) + &task("Hi", 3, true, 1);
    let k = kernel(&oil, &terminate_bodies(&["Lo", "Hi"]), lenient());
    let s = k.boot().unwrap();
    assert_eq!(s.running, k.task_id("Hi"));
    assert_eq!(s.task(k.task_id("Lo").unwrap()).state, TaskState::Ready);
}

#[test]
fn boot_without_autostart_fails() {
    let oil = counter(127, 1) + &task("A", 1, false, 1);
    let k = kernel(&oil, &terminate_bodies(&["A"]), lenient());
    assert!(matches!(k.boot(), Err(KernelError::NoAutostartTask)));
}

#[test]
fn ems_activation_readies_target_and_requests_scheduling() {
    let k = kernel(EMS_OIL, EMS_TSK, lenient());
    let t = run(&k, &k.boot().unwrap(), 4).0;
    let s = t.state(4);
    assert_eq!(k.label_string(&s.last_label), "SystemInit: ActivateTask(EMS_Adap_Task_10ms) -> E_OK");
    assert_eq!(s.counter, 4);
    assert_eq!(s.task(k.task_id("EMS_Adap_Task_10ms").unwrap()).state, TaskState::Ready);
    assert!(s.signals.contains(&Signal::Schedule { explicit: false }));
}

#[test]
fn activation_of_running_task_is_counted_or_refused() {
    let oil = counter(127, 1) + &task("T", 1, true, 2) + &task("U", 1, true, 1);
    let k = kernel(&oil, &terminate_bodies(&["T", "U"]), lenient());
    let s = k.boot().unwrap();
    let (t, u) = (k.task_id("T").unwrap(), k.task_id("U").unwrap());
    let s1 = k.exec_service(&s, t, Service::ActivateTask(t));
    assert_eq!(status_of(&s1), StatusCode::Ok);
    assert_eq!(s1.task(t).pending_activations, 1);
    assert!(s1.schedule_pending().is_none());
    let s2 = k.exec_service(&s1, t, Service::ActivateTask(t));
    assert_eq!(status_of(&s2), StatusCode::Limit);
    assert_eq!(s2.task(t).pending_activations, 1);
    // U is Ready with bound 1.
    let s3 = k.exec_service(&s, t, Service::ActivateTask(u));
    assert_eq!(status_of(&s3), StatusCode::Limit);
}

#[test]
fn strict_mode_stops_on_error() {
    let oil = counter(127, 1) + &task("T", 1, true, 1);
    let k = kernel(&oil, "TASK T { ActivateTask(T); TerminateTask(); };", strict());
    let (t, stuck) = run(&k, &k.boot().unwrap(), 10);
    assert_eq!(stuck, Some(StuckKind::Deadlock));
    assert_eq!(t.last().status, Status::Error(StatusCode::Limit));
    assert_eq!(t.last().counter, 0, "the failing call leaves the pre-state");
}

#[test]
fn lone_task_terminates_to_all_idle() {
    let oil = counter(127, 1) + &task("T", 1, true, 1);
    let k = kernel(&oil, &terminate_bodies(&["T"]), lenient());
    let (t, stuck) = run(&k, &k.boot().unwrap(), 10);
    assert_eq!(stuck, Some(StuckKind::AllIdle));
    assert!(t.last().running.is_none());
}

#[test]
fn terminate_with_pending_activation_goes_through_multi_activation() {
    let oil = counter(127, 1) + &task("T", 1, true, 2);
    let k = kernel(&oil, "TASK T { ActivateTask(T); TerminateTask(); };", lenient());
    let t = run(&k, &k.boot().unwrap(), 4).0;
    let tid = k.task_id("T").unwrap();
    assert_eq!(t.state(2).task(tid).state, TaskState::Suspended);
    assert_eq!(t.state(2).task(tid).pending_activations, 1);
    assert_eq!(t.state(3).last_label, Label::MultiActivated(tid));
    assert_eq!(t.state(3).task(tid).state, TaskState::Ready);
    assert_eq!(t.state(3).task(tid).pending_activations, 0);
}

#[test]
fn pending_activations_drain_one_per_termination() {
    let oil = counter(127, 1) + &task_full("A", 1, true, 1, "NON", &[], &[]) + &task("T", 2, false, 3);
    let k = kernel(
        &oil,
        "TASK A { ActivateTask(T); ActivateTask(T); ActivateTask(T); TerminateTask(); };\nTASK T { TerminateTask(); };",
        lenient(),
    );
    let (t, stuck) = run(&k, &k.boot().unwrap(), 40);
    assert_eq!(stuck, Some(StuckKind::AllIdle));
    let l = labels(&k, &t);
    assert_eq!(l.iter().filter(|x| x.as_str() == "T: TerminateTask() -> E_OK").count(), 3);
    assert_eq!(l.iter().filter(|x| x.starts_with("multi-activation")).count(), 2);
}

#[test]
fn terminate_holding_resource_is_refused() {
    let oil = counter(127, 1) + &resource("R") + &task_full("T", 1, true, 1, "FULL", &[], &["R"]);
    let tsk = "TASK T { GetResource(R); TerminateTask(); };";
    let k = kernel(&oil, tsk, lenient());
    let t = run(&k, &k.boot().unwrap(), 2).0;
    assert_eq!(k.label_string(&t.last().last_label), "T: TerminateTask() -> E_OS_RESOURCE");
    assert_eq!(t.last().running, k.task_id("T"));
}

#[test]
fn chain_to_self_records_a_pending_activation() {
    let oil = counter(127, 1) + &task("T", 1, true, 2);
    let k = kernel(&oil, "TASK T { ChainTask(T); };", lenient());
    let s = k.boot().unwrap();
    let t = k.task_id("T").unwrap();
    let s1 = k.exec_service(&s, t, Service::ChainTask(t));
    assert_eq!(status_of(&s1), StatusCode::Ok);
    assert_eq!(s1.task(t).state, TaskState::Suspended);
    assert_eq!(s1.task(t).pending_activations, 1);
    assert!(s1.signals.is_empty());
    assert_eq!(next_rule(&k, &s1), Rule::MultiActivated);
    let s2 = step(&k, &s1, Choice::Next).unwrap();
    assert_eq!(s2.task(t).state, TaskState::Ready);
    assert!(s2.schedule_pending().is_some());
}

#[test]
fn chain_to_other_task() {
    let oil = counter(127, 1) + &task("T", 1, true, 1) + &task("U", 1, false, 1);
    let k = kernel(&oil, &terminate_bodies(&["T", "U"]), lenient());
    let s = k.boot().unwrap();
    let (t, u) = (k.task_id("T").unwrap(), k.task_id("U").unwrap());
    let s1 = k.exec_service(&s, t, Service::ChainTask(u));
    assert_eq!(s1.task(t).state, TaskState::Suspended);
    assert_eq!(s1.task(u).state, TaskState::Ready);
    assert!(s1.schedule_pending().is_some());
    // A second chain to the now-ready U fails and leaves T running.
    let mut s2 = s.clone();
    s2 = k.exec_service(&s2, t, Service::ActivateTask(u));
    let s3 = k.exec_service(&s2, t, Service::ChainTask(u));
    assert_eq!(status_of(&s3), StatusCode::Limit);
    assert_eq!(s3.running, Some(t));
}

#[test]
fn explicit_schedule_lets_non_task_yield() {
    let oil = counter(127, 1) + &task_full("N", 1, true, 1, "NON", &[], &[]) + &task("H", 3, false, 1);
    let tsk = "TASK N { ActivateTask(H); Schedule(); TerminateTask(); };\nTASK H { TerminateTask(); };";
    let k = kernel(&oil, tsk, lenient());
    let t = run(&k, &k.boot().unwrap(), 6).0;
    let l = labels(&k, &t);
    assert_eq!(l[1], "N: ActivateTask(H) -> E_OK");
    assert_eq!(l[2], "schedule: no change", "implicit request does not preempt NON");
    assert_eq!(l[3], "N: Schedule() -> E_OK");
    assert_eq!(l[4], "schedule: H preempts N");
    let n = k.task_id("N").unwrap();
    let q = &t.state(4).ready[&1];
    assert_eq!(q.front(), Some(&n));
}

#[test]
fn schedule_without_higher_ready_keeps_running_task() {
    let oil = counter(127, 1) + &task("A", 2, true, 1) + &task("B", 1, true, 1);
    let k = kernel(&oil, "TASK A { Schedule(); TerminateTask(); };\nTASK B { TerminateTask(); };", lenient());
    let t = run(&k, &k.boot().unwrap(), 2).0;
    assert_eq!(k.label_string(&t.state(2).last_label), "schedule: no change");
    assert_eq!(t.state(2).running, k.task_id("A"));
}

#[test]
fn full_task_is_preempted_to_queue_head() {
    let oil = counter(127, 1) + &task("L", 1, true, 1) + &task("L2", 1, true, 1) + &task("H", 3, false, 1);
    let tsk =
        "TASK L { ActivateTask(H); TerminateTask(); };\nTASK L2 { TerminateTask(); };\nTASK H { TerminateTask(); };";
    let k = kernel(&oil, tsk, lenient());
    let t = run(&k, &k.boot().unwrap(), 2).0;
    let s = t.state(2);
    assert_eq!(s.running, k.task_id("H"));
    let q: Vec<_> = s.ready[&1].iter().map(|x| k.info(*x).name.clone()).collect();
    assert_eq!(q, ["L", "L2"]);
}

#[test]
fn dispatch_picks_highest_queue() {
    let oil = counter(127, 1) + &task("A", 2, true, 1) + &task("B", 5, true, 1);
    let k = kernel(&oil, &terminate_bodies(&["A", "B"]), lenient());
    let mut s = k.boot().unwrap();
    // Put both back into the queues with nothing running.
    let (a, b) = (k.task_id("A").unwrap(), k.task_id("B").unwrap());
    s.running = None;
    s.tasks[b.index()].state = TaskState::Ready;
    s.ready.clear();
    s.ready.entry(2).or_default().push_back(a);
    s.ready.entry(5).or_default().push_back(b);
    assert_eq!(next_rule(&k, &s), Rule::Dispatch);
    let s1 = step(&k, &s, Choice::Next).unwrap();
    assert_eq!(s1.running, Some(b));
}

fn event_app() -> (osek_core::kernel::Kernel, osek_core::kernel::KernelState) {
    let oil = counter(127, 1)
        + &event("Ev")
        + &event("Other")
        + &task_full("W", 1, true, 1, "FULL", &["Ev"], &[])
        + &task("B", 2, true, 1)
        + &task("S", 0, false, 1);
    let k = kernel(&oil, &terminate_bodies(&["W", "B", "S"]), lenient());
    let s = k.boot().unwrap();
    (k, s)
}

#[test]
fn set_event_errors() {
    let (k, s) = event_app();
    let (w, b, sus) = (k.task_id("W").unwrap(), k.task_id("B").unwrap(), k.task_id("S").unwrap());
    let ev = k.event_id("Ev").unwrap();
    let other = k.event_id("Other").unwrap();
    assert_eq!(status_of(&k.exec_service(&s, b, Service::SetEvent(b, ev))), StatusCode::Access);
    assert_eq!(status_of(&k.exec_service(&s, b, Service::SetEvent(w, other))), StatusCode::Access);
    assert_eq!(status_of(&k.exec_service(&s, b, Service::SetEvent(sus, ev))), StatusCode::Access);
    // W is ready but not waiting: the event is only recorded.
    let s1 = k.exec_service(&s, b, Service::SetEvent(w, ev));
    assert_eq!(status_of(&s1), StatusCode::Ok);
    assert!(s1.task(w).set_events.contains(&ev));
    assert!(s1.signals.is_empty());
}

#[test]
fn set_event_on_suspended_extended_task() {
    let oil =
        counter(127, 1) + &event("Ev") + &task("B", 2, true, 1) + &task_full("W", 1, false, 1, "FULL", &["Ev"], &[]);
    let k = kernel(&oil, &terminate_bodies(&["B", "W"]), lenient());
    let s = k.boot().unwrap();
    let s1 = k.exec_service(
        &s,
        k.task_id("B").unwrap(),
        Service::SetEvent(k.task_id("W").unwrap(), k.event_id("Ev").unwrap()),
    );
    assert_eq!(status_of(&s1), StatusCode::State);
}

#[test]
fn wait_event_blocks_or_consumes() {
    let (k, mut s) = event_app();
    let (w, b) = (k.task_id("W").unwrap(), k.task_id("B").unwrap());
    let ev = k.event_id("Ev").unwrap();
    // Make W the running task.
    s.running = Some(w);
    s.tasks[w.index()].state = TaskState::Running;
    s.tasks[b.index()].state = TaskState::Ready;
    s.ready.clear();
    s.ready.entry(2).or_default().push_back(b);

    let blocked = k.exec_service(&s, w, Service::WaitEvent(ev));
    assert_eq!(status_of(&blocked), StatusCode::Ok);
    assert_eq!(blocked.task(w).state, TaskState::Waiting);
    assert!(blocked.running.is_none());

    let mut pre = s.clone();
    pre.tasks[w.index()].set_events.insert(ev);
    let consumed = k.exec_service(&pre, w, Service::WaitEvent(ev));
    assert_eq!(consumed.task(w).state, TaskState::Running);

    assert_eq!(status_of(&k.exec_service(&s, b, Service::WaitEvent(ev))), StatusCode::Access);

    let cleared = k.exec_service(&pre, w, Service::ClearEvent(ev));
    assert!(cleared.task(w).set_events.is_empty());
}

#[test]
fn set_event_wakes_waiter_and_keeps_event() {
    let oil =
        counter(127, 1) + &event("Ev") + &task_full("W", 2, true, 1, "FULL", &["Ev"], &[]) + &task("B", 1, true, 1);
    let tsk = "TASK W { WaitEvent(Ev); TerminateTask(); };\nTASK B { SetEvent(W, Ev); TerminateTask(); };";
    let k = kernel(&oil, tsk, lenient());
    let l = labels(&k, &run(&k, &k.boot().unwrap(), 8).0);
    let set = position(&l, "B: SetEvent(W, Ev) -> E_OK").unwrap();
    assert_eq!(l[set + 1], "schedule: W preempts B");
    assert_eq!(l[set + 2], "W: TerminateTask() -> E_OK");
}

fn resource_app() -> osek_core::kernel::Kernel {
    let oil = counter(127, 1)
        + &resource("R")
        + &resource("S")
        + &task_full("T", 2, true, 1, "FULL", &[], &["R", "S"])
        + &task_full("H", 5, false, 1, "FULL", &[], &["R"])
        + &task("M", 4, false, 1);
    kernel(&oil, &terminate_bodies(&["T", "H", "M"]), lenient())
}

#[test]
fn resource_ceiling_raises_priority() {
    let k = resource_app();
    let s = k.boot().unwrap();
    let t = k.task_id("T").unwrap();
    let r = k.resource_id("R").unwrap();
    let s1 = k.exec_service(&s, t, Service::GetResource(r));
    assert_eq!(s1.task(t).current_priority, 5);
    assert_eq!(s1.task(t).held_resources, vec![r]);
    let twice = k.exec_service(&s1, t, Service::GetResource(r));
    assert_eq!(status_of(&twice), StatusCode::Access);
    // M cannot use R: not declared.
    let m = k.task_id("M").unwrap();
    assert_eq!(status_of(&k.exec_service(&s, m, Service::GetResource(r))), StatusCode::Access);
}

#[test]
fn release_restores_priority_and_lets_higher_task_in() {
    let k = resource_app();
    let s = k.boot().unwrap();
    let (t, m) = (k.task_id("T").unwrap(), k.task_id("M").unwrap());
    let r = k.resource_id("R").unwrap();
    let s1 = k.exec_service(&s, t, Service::GetResource(r));
    let s2 = k.exec_service(&s1, t, Service::ActivateTask(m));
    assert_eq!(step(&k, &s2, Choice::Next).unwrap().running, Some(t), "ceiling 5 keeps M out");
    let s3 = step(&k, &s2, Choice::Next).unwrap();
    let s4 = k.exec_service(&s3, t, Service::ReleaseResource(r));
    assert_eq!(s4.task(t).current_priority, 2);
    assert!(s4.schedule_pending().is_some());
    assert_eq!(step(&k, &s4, Choice::Next).unwrap().running, Some(m));
    // Without a higher ready task no scheduling is requested.
    let lone = k.exec_service(&s1, t, Service::ReleaseResource(r));
    assert!(lone.schedule_pending().is_none());
}

#[test]
fn release_out_of_order_is_nofunc() {
    let k = resource_app();
    let s = k.boot().unwrap();
    let t = k.task_id("T").unwrap();
    let (r, sr) = (k.resource_id("R").unwrap(), k.resource_id("S").unwrap());
    let s1 = k.exec_service(&s, t, Service::GetResource(r));
    let s2 = k.exec_service(&s1, t, Service::GetResource(sr));
    assert_eq!(status_of(&k.exec_service(&s2, t, Service::ReleaseResource(r))), StatusCode::NoFunc);
    assert_eq!(status_of(&k.exec_service(&s, t, Service::ReleaseResource(r))), StatusCode::NoFunc);
    let s3 = k.exec_service(&s2, t, Service::ReleaseResource(sr));
    assert_eq!(status_of(&s3), StatusCode::Ok);
}

#[test]
fn chain_while_holding_resource() {
    let k = resource_app();
    let s = k.boot().unwrap();
    let (t, m) = (k.task_id("T").unwrap(), k.task_id("M").unwrap());
    let s1 = k.exec_service(&s, t, Service::GetResource(k.resource_id("R").unwrap()));
    let s2 = k.exec_service(&s1, t, Service::ChainTask(m));
    assert_eq!(status_of(&s2), StatusCode::Resource);
    assert_eq!(s2.task(m).state, TaskState::Suspended);
}
