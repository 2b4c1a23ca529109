//! Task-management, event and resource services plus the scheduler rules.

use super::*;

impl Kernel {
    /// Executes `call` on behalf of the running task `caller`. If `call` is
    /// the caller's next statement it is consumed; otherwise the call is
    /// treated as injected (handy for driving the rules directly).
    ///
    /// On an error status, strict mode returns the pre-state flagged with
    /// `Status::Error`; lenient mode records the status in the label and goes on.
    pub fn exec_service(&self, s: &KernelState, caller: TaskId, call: Service) -> KernelState {
        let mut n = s.clone();
        let prog = &mut n.tasks[caller.index()].program;
        if matches!(prog.last(), Some(Op::Call(c)) if *c == call) {
            prog.pop();
        }
        let status = self.apply_service(&mut n, caller, call);
        let label = Label::Service { task: caller, call, status };
        if status.is_error() && self.options.strict {
            let mut e = s.clone();
            e.status = Status::Error(status);
            e.last_label = label;
            return e;
        }
        normalize(&mut n.tasks[caller.index()].program);
        n.last_label = label;
        self.tick(&mut n);
        n
    }

    /// Service body. Leaves `s` untouched when returning an error.
    fn apply_service(&self, s: &mut KernelState, caller: TaskId, call: Service) -> StatusCode {
        match call {
            Service::ActivateTask(t) => self.activate(s, t),
            Service::TerminateTask => {
                if !s.task(caller).held_resources.is_empty() {
                    return StatusCode::Resource;
                }
                self.terminate(s, caller);
                s.raise_schedule(false);
                StatusCode::Ok
            }
            Service::ChainTask(t) => self.chain(s, caller, t),
            Service::Schedule => {
                s.raise_schedule(true);
                StatusCode::Ok
            }
            Service::SetEvent(t, e) => self.set_event(s, t, e),
            Service::WaitEvent(e) => {
                let info = self.info(caller);
                let cell = &mut s.tasks[caller.index()];
                if !info.extended {
                    return StatusCode::Access;
                }
                if !cell.held_resources.is_empty() {
                    return StatusCode::Resource;
                }
                if !cell.set_events.contains(&e) {
                    cell.state = TaskState::Waiting;
                    cell.waiting_for = Some(e);
                    s.running = None;
                    s.raise_schedule(false);
                }
                StatusCode::Ok
            }
            Service::ClearEvent(e) => {
                if !self.info(caller).extended {
                    return StatusCode::Access;
                }
                s.tasks[caller.index()].set_events.remove(&e);
                StatusCode::Ok
            }
            Service::GetResource(r) => {
                let held_anywhere = s.tasks.iter().any(|c| c.held_resources.contains(&r));
                if !self.info(caller).resources.contains(&r) || held_anywhere {
                    return StatusCode::Access;
                }
                let cell = &mut s.tasks[caller.index()];
                cell.held_resources.push(r);
                cell.current_priority = cell.current_priority.max(self.ceiling(r));
                StatusCode::Ok
            }
            Service::ReleaseResource(r) => {
                let cell = &mut s.tasks[caller.index()];
                if cell.held_resources.last() != Some(&r) {
                    return StatusCode::NoFunc;
                }
                cell.held_resources.pop();
                cell.current_priority =
                    cell.held_resources.iter().map(|r| self.ceiling(*r)).fold(self.info(caller).priority, u32::max);
                let prio = cell.current_priority;
                if s.ready_head().is_some_and(|(p, _)| p > prio) {
                    s.raise_schedule(false);
                }
                StatusCode::Ok
            }
            Service::SetRelAlarm(a, inc, cycle) => self.set_rel_alarm(s, a, inc, cycle),
            Service::SetAbsAlarm(a, start, cycle) => self.set_abs_alarm(s, a, start, cycle),
            Service::CancelAlarm(a) => self.cancel_alarm(s, a),
        }
    }

    fn can_activate(&self, s: &KernelState, t: TaskId) -> bool {
        self.activation_count(s, t) < self.info(t).max_activations
    }

    /// Activation request for `t`, shared by `ActivateTask`, `ChainTask` and
    /// alarm actions.
    pub(crate) fn activate(&self, s: &mut KernelState, t: TaskId) -> StatusCode {
        if !self.can_activate(s, t) {
            return StatusCode::Limit;
        }
        let prio = self.info(t).priority;
        let cell = &mut s.tasks[t.index()];
        if cell.state == TaskState::Suspended && cell.pending_activations == 0 {
            cell.state = TaskState::Ready;
            cell.current_priority = prio;
            s.enqueue_back(t, prio);
            s.raise_schedule(false);
        } else {
            cell.pending_activations += 1;
        }
        StatusCode::Ok
    }

    fn terminate(&self, s: &mut KernelState, t: TaskId) {
        self.reset_program(s, t);
        let cell = &mut s.tasks[t.index()];
        cell.state = TaskState::Suspended;
        cell.current_priority = self.info(t).priority;
        cell.set_events.clear();
        cell.waiting_for = None;
        if s.running == Some(t) {
            s.running = None;
        }
    }

    fn chain(&self, s: &mut KernelState, caller: TaskId, target: TaskId) -> StatusCode {
        if !s.task(caller).held_resources.is_empty() {
            return StatusCode::Resource;
        }
        if target == caller {
            if s.task(caller).pending_activations >= self.info(caller).max_activations {
                return StatusCode::Limit;
            }
            self.terminate(s, caller);
            s.tasks[caller.index()].pending_activations += 1;
            return StatusCode::Ok;
        }
        if !self.can_activate(s, target) {
            return StatusCode::Limit;
        }
        self.terminate(s, caller);
        s.raise_schedule(false);
        self.activate(s, target)
    }

    pub(crate) fn set_event(&self, s: &mut KernelState, t: TaskId, e: EventId) -> StatusCode {
        let info = self.info(t);
        if !info.extended || !info.events.contains(&e) {
            return StatusCode::Access;
        }
        let cell = &mut s.tasks[t.index()];
        if cell.state == TaskState::Suspended {
            return StatusCode::State;
        }
        cell.set_events.insert(e);
        if cell.state == TaskState::Waiting && cell.waiting_for == Some(e) {
            cell.state = TaskState::Ready;
            cell.waiting_for = None;
            cell.current_priority = info.priority;
            s.enqueue_back(t, info.priority);
            s.raise_schedule(false);
        }
        StatusCode::Ok
    }

    /// Consumes the pending `Schedule` signal: dispatches the head of the
    /// highest ready queue if nothing runs, or preempts the running task when
    /// a strictly higher-priority task is ready and preemption is allowed.
    pub fn handle_schedule(&self, s: &KernelState) -> KernelState {
        let mut n = s.clone();
        let explicit = n.schedule_pending().unwrap_or(false);
        n.signals.remove(&Signal::Schedule { explicit });
        let mut label = Label::Schedule { dispatched: None, preempted: None };
        match (n.running, n.ready_head()) {
            (None, Some(_)) => {
                let h = self.run_head(&mut n);
                label = Label::Schedule { dispatched: Some(h), preempted: None };
            }
            (Some(t), Some((head, _))) => {
                let cur = n.task(t).current_priority;
                let preemptible = self.info(t).policy == SchedulePolicy::Full || explicit;
                if head > cur && preemptible {
                    let h = self.run_head(&mut n);
                    n.tasks[t.index()].state = TaskState::Ready;
                    n.enqueue_front(t, cur);
                    n.running = Some(h);
                    label = Label::Schedule { dispatched: Some(h), preempted: Some(t) };
                }
            }
            _ => {}
        }
        n.last_label = label;
        n
    }

    fn run_head(&self, s: &mut KernelState) -> TaskId {
        let h = s.dequeue_head().expect("ready head present");
        s.tasks[h.index()].state = TaskState::Running;
        s.running = Some(h);
        h
    }

    /// Lowest-index suspended task with a recorded activation, if any.
    pub fn multiactivation_candidate(&self, s: &KernelState) -> Option<TaskId> {
        self.task_ids().find(|t| {
            let c = s.task(*t);
            c.state == TaskState::Suspended && c.pending_activations > 0
        })
    }

    /// Turns one recorded activation of a suspended task into a ready instance.
    pub fn handle_multiactivated(&self, s: &KernelState) -> Option<KernelState> {
        let t = self.multiactivation_candidate(s)?;
        let mut n = s.clone();
        let prio = self.info(t).priority;
        let cell = &mut n.tasks[t.index()];
        cell.pending_activations -= 1;
        cell.state = TaskState::Ready;
        cell.current_priority = prio;
        n.enqueue_back(t, prio);
        n.raise_schedule(false);
        n.last_label = Label::MultiActivated(t);
        Some(n)
    }

    /// Starts the highest-priority ready task on an idle CPU.
    pub fn dispatch(&self, s: &KernelState) -> Option<KernelState> {
        if s.running.is_some() || s.ready.is_empty() {
            return None;
        }
        let mut n = s.clone();
        let h = self.run_head(&mut n);
        n.last_label = Label::Dispatch(h);
        Some(n)
    }
}
