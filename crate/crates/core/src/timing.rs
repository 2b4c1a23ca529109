//! System counter, alarms, and the passage of time inside `TimeInterval`
//! blocks and while the CPU is idle.

use crate::kernel::*;

impl Kernel {
    /// One unit of time: advance the counter modulo `MAXALLOWEDVALUE + 1`
    /// and raise `Alarmed` for every active alarm due at the new value.
    pub fn tick(&self, s: &mut KernelState) {
        s.counter = (s.counter + 1) % self.modulus();
        self.raise_due(s);
    }

    fn raise_due(&self, s: &mut KernelState) -> bool {
        let mut any = false;
        for &a in &s.working_alarms {
            if self.alarms[a.index()].on_system_counter && s.alarms[a.index()].alarm_time == s.counter {
                s.signals.insert(Signal::Alarmed(a));
                any = true;
            }
        }
        any
    }

    fn check_cycle(&self, cycle: u32) -> bool {
        cycle == 0 || (self.min_cycle..=self.max_allowed_value).contains(&cycle)
    }

    fn arm(&self, s: &mut KernelState, a: AlarmId, time: u32, cycle: u32) {
        s.alarms[a.index()] = AlarmCell { alarm_time: time, cycle_time: cycle };
        s.working_alarms.push(a);
    }

    pub(crate) fn set_rel_alarm(&self, s: &mut KernelState, a: AlarmId, inc: u32, cycle: u32) -> StatusCode {
        if s.is_active(a) {
            return StatusCode::State;
        }
        if inc > self.max_allowed_value || !self.check_cycle(cycle) {
            return StatusCode::Value;
        }
        self.arm(s, a, (s.counter + inc) % self.modulus(), cycle);
        if inc == 0 && self.alarms[a.index()].on_system_counter {
            s.signals.insert(Signal::Alarmed(a));
        }
        StatusCode::Ok
    }

    pub(crate) fn set_abs_alarm(&self, s: &mut KernelState, a: AlarmId, start: u32, cycle: u32) -> StatusCode {
        if s.is_active(a) {
            return StatusCode::State;
        }
        if start > self.max_allowed_value || !self.check_cycle(cycle) {
            return StatusCode::Value;
        }
        self.arm(s, a, start, cycle);
        StatusCode::Ok
    }

    pub(crate) fn cancel_alarm(&self, s: &mut KernelState, a: AlarmId) -> StatusCode {
        if !s.is_active(a) {
            return StatusCode::NoFunc;
        }
        s.working_alarms.retain(|x| *x != a);
        s.signals.remove(&Signal::Alarmed(a));
        StatusCode::Ok
    }

    /// Handles the pending expiries in `order`. Each action is followed by
    /// the cyclic re-arm (or removal) of its alarm and, unless disabled, one tick.
    pub fn handle_alarms(&self, s: &KernelState, order: &[AlarmId]) -> KernelState {
        let mut n = s.clone();
        let mut firings = Vec::with_capacity(order.len());
        for &a in order {
            let before = n.clone();
            n.signals.remove(&Signal::Alarmed(a));
            let outcome = match self.alarms[a.index()].action {
                Action::ActivateTask(t) => ActionOutcome::Activate(t, self.activate(&mut n, t)),
                Action::SetEvent(t, e) => ActionOutcome::SetEvent(t, e, self.set_event(&mut n, t, e)),
                Action::Callback => ActionOutcome::Callback,
            };
            firings.push((a, outcome));
            if outcome.status().is_error() && self.options.strict {
                let mut e = before;
                e.status = Status::Error(outcome.status());
                e.last_label = Label::AlarmExpiry(firings);
                return e;
            }
            let cell = &mut n.alarms[a.index()];
            if cell.cyclic() {
                cell.alarm_time = (cell.alarm_time + cell.cycle_time) % self.modulus();
            } else {
                n.working_alarms.retain(|x| *x != a);
            }
            if self.options.alarm_action_tick {
                self.tick(&mut n);
            }
        }
        n.last_label = Label::AlarmExpiry(firings);
        n
    }

    /// Ticks until the earliest active alarm on the system counter expires.
    /// Always in `1..=MAXALLOWEDVALUE + 1`.
    pub fn next_expiry_distance(&self, s: &KernelState) -> Option<u32> {
        let m = self.modulus();
        s.working_alarms
            .iter()
            .filter(|a| self.alarms[a.index()].on_system_counter)
            .map(|a| (s.alarms[a.index()].alarm_time + m - s.counter + m - 1) % m + 1)
            .min()
    }

    /// Advances time by up to `budget` ticks, stopping at the first expiry.
    /// Returns the number of ticks consumed.
    fn advance(&self, s: &mut KernelState, budget: u32) -> u32 {
        match self.options.time_mode {
            TimeMode::Jump => {
                let d = self.next_expiry_distance(s).map_or(budget, |d| d.min(budget));
                s.counter = ((s.counter as u64 + d as u64) % self.modulus() as u64) as u32;
                if d > 0 {
                    self.raise_due(s);
                }
                d
            }
            TimeMode::Unit => {
                let mut used = 0;
                while used < budget {
                    s.counter = (s.counter + 1) % self.modulus();
                    used += 1;
                    if self.raise_due(s) {
                        break;
                    }
                }
                used
            }
        }
    }

    /// Runs the `TimeInterval` block at the top of `caller`'s program. An
    /// expiry inside the block splits it; the rest stays on the program.
    pub fn exec_time_interval(&self, s: &KernelState, caller: TaskId) -> KernelState {
        let mut n = s.clone();
        let Some(Op::TimeInterval(total)) = n.tasks[caller.index()].program.pop() else {
            panic!("exec_time_interval: next statement of task {} is not a time interval", caller.0);
        };
        let used = self.advance(&mut n, total);
        let prog = &mut n.tasks[caller.index()].program;
        if used < total {
            prog.push(Op::TimeInterval(total - used));
        }
        normalize(prog);
        n.last_label = Label::TimeAdvance { task: Some(caller), ticks: used };
        n
    }

    /// With no work at all but an armed alarm, the CPU idles until the
    /// earliest expiry.
    pub fn idle_advance(&self, s: &KernelState) -> Option<KernelState> {
        let d = self.next_expiry_distance(s)?;
        let mut n = s.clone();
        let used = self.advance(&mut n, d);
        n.last_label = Label::TimeAdvance { task: None, ticks: used };
        Some(n)
    }
}
