"""Event-scheduling model of the fitting-room system.

One staff member runs three jobs (entry service, in-cubicle help, return
handling) under global first-come-first-served; customers hold a cubicle
from the end of entry service until their fitting finishes, and may renege
from the entry queue when their patience runs out.  Customers who want help
pause their fitting partway through and resume it once helped.

The agent-based model in abs.py describes the same system; with all
distributions degenerate the two produce identical traces, which is how
both are cross-validated.
"""

from __future__ import annotations

import heapq
from typing import Optional

from .config import ScenarioConfig
from .engine import EventCalendar, RandomStreams, bernoulli
from .proactive import EV_POLL, EV_REVERT, ServiceTimeTable, SpeedupController
from .runtime import (CLOSED, IN_SYSTEM, JOB1, JOB2, JOB3, L_ARRIVAL, L_END,
                      L_ENTER, L_LEAVE, L_RENEGE, L_REQUEST_HELP, L_START,
                      RENEGED, SERVED, QueueSet, Telemetry, build_metrics,
                      close_open_waits, select_service)
from .stats import RunMetrics

EV_ARRIVAL = "arrival"
EV_PATIENCE = "patience"
EV_JOB1_DONE = "job1_done"
EV_JOB2_DONE = "job2_done"
EV_JOB3_DONE = "job3_done"
EV_HELP_DUE = "help_due"
EV_FIT_DONE = "fit_done"

_DONE_EVENT = (None, EV_JOB1_DONE, EV_JOB2_DONE, EV_JOB3_DONE)


class Customer:
    __slots__ = ("id", "arrived_at", "joined_at", "in_queue", "awaiting_entry",
                 "wait", "disposition", "fit_remaining")

    def __init__(self, cid: int, now: float) -> None:
        self.id = cid
        self.arrived_at = now
        self.joined_at = now
        self.in_queue = False
        self.awaiting_entry = False
        self.wait = 0.0
        self.disposition = IN_SYSTEM
        self.fit_remaining = 0.0


class CubicleBank:
    """Counting allocator for the fitting cubicles."""

    __slots__ = ("capacity", "occupied")

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self.occupied = 0

    @property
    def free(self) -> int:
        return self.capacity - self.occupied


class DesRun:
    """State of a single replication."""

    __slots__ = ("cfg", "cal", "queues", "cubicles", "tm", "table", "ctl",
                 "customers", "staff_idle", "staff_since", "_note",
                 "s_arrivals", "s_job", "s_fitting", "s_help", "s_patience")

    def __init__(self, cfg: ScenarioConfig, replication: int,
                 trace: Optional[list] = None) -> None:
        streams = RandomStreams(cfg.master_seed)
        self.s_arrivals = streams.stream("arrivals", replication)
        self.s_job = (None,
                      streams.stream("job1", replication),
                      streams.stream("job2", replication),
                      streams.stream("job3", replication))
        self.s_fitting = streams.stream("fitting", replication)
        self.s_help = streams.stream("help", replication)
        self.s_patience = streams.stream("patience", replication)
        s_revert = streams.stream("revert", replication)
        s_poll = streams.stream("poll", replication)

        self.cfg = cfg
        self.cal = EventCalendar()
        self.queues = QueueSet()
        self.cubicles = CubicleBank(cfg.cubicles)
        self.tm = Telemetry(trace)
        self.table = ServiceTimeTable(cfg.job1, cfg.job2, cfg.job3,
                                      cfg.speedup_fraction)
        self.ctl = SpeedupController(cfg.proactive, self.table, self.cal,
                                     self.queues, self.cubicles,
                                     s_revert, s_poll, self.tm)
        self.customers: list[Customer] = []
        self.staff_idle = True
        self.staff_since = 0.0
        # bound once: None when the policy is off or polling
        self._note = self.ctl.note_change if self.ctl.event_driven else None

    def run(self) -> RunMetrics:
        cal = self.cal
        horizon = self.cfg.horizon
        self.ctl.start()
        first = self.cfg.arrival.next_arrival(0.0, self.s_arrivals)
        if first is not None:
            cal.schedule(first, EV_ARRIVAL)
        # the calendar is drained inline (cheaper than pop() per event);
        # cal.now must stay in step because schedule() guards against it
        heap = cal._heap
        pop = heapq.heappop
        while heap:
            ev = pop(heap)
            t, _, kind, target = ev
            if t > horizon:
                break
            cal.now = t
            if kind == EV_JOB1_DONE:
                self.complete_job1(target, t)
            elif kind == EV_FIT_DONE:
                self.leave_cubicle(target, t)
            elif kind == EV_JOB3_DONE:
                self.complete_job3(target, t)
            elif kind == EV_ARRIVAL:
                self.handle_arrival(t)
            elif kind == EV_PATIENCE:
                self.renege(target, t)
            elif kind == EV_HELP_DUE:
                self.request_help(target, t)
            elif kind == EV_JOB2_DONE:
                self.complete_job2(target, t)
            elif kind == EV_REVERT:
                self.ctl.handle_revert(ev)
            elif kind == EV_POLL:
                self.ctl.handle_poll(ev)
        return self.finalize(horizon)

    def handle_arrival(self, now: float) -> None:
        cfg = self.cfg
        c = Customer(len(self.customers), now)
        self.customers.append(c)
        tr = self.tm.trace
        if tr is not None:
            tr.append((now, L_ARRIVAL, c.id))
        if cfg.patience is not None:
            self.cal.schedule(now + cfg.patience.sample(self.s_patience),
                              EV_PATIENCE, c)
        nxt = cfg.arrival.next_arrival(now, self.s_arrivals)
        if nxt is not None:
            self.cal.schedule(nxt, EV_ARRIVAL)
        self.queues.entry.join(c, now)
        c.awaiting_entry = True
        if self._note is not None:
            self._note(now)
        if self.staff_idle:
            self.dispatch_staff(now)

    def dispatch_staff(self, now: float) -> None:
        """Start the staff on the next job, if any is eligible."""
        pick = select_service(self.queues, self.cubicles.occupied < self.cubicles.capacity)
        if pick is None:
            return
        job, line = pick
        c = line.pop_head()
        c.wait += now - c.joined_at
        if job == JOB1:
            c.awaiting_entry = False
        if self._note is not None:
            self._note(now)
        table = self.table
        dur = table.specs[job].sample(self.s_job[job]) * table.factor
        tr = self.tm.trace
        if tr is not None:
            tr.append((now, L_START[job], c.id))
        self.staff_idle = False
        self.staff_since = now
        self.cal.schedule(now + dur, _DONE_EVENT[job], c)

    def complete_job1(self, c: Customer, now: float) -> None:
        tr = self.tm.trace
        if tr is not None:
            tr.append((now, L_END[JOB1], c.id))
        # entry service ends with the customer stepping into a cubicle,
        # reserved for them when the job was dispatched
        self.cubicles.occupied += 1
        self.tm.cubicle_change(now, 1)
        if tr is not None:
            tr.append((now, L_ENTER, c.id))
        fit = self.cfg.fitting.sample(self.s_fitting)
        if bernoulli(self.cfg.help_probability, self.s_help):
            frac = self.cfg.help_fraction.sample(self.s_help)
            c.fit_remaining = fit * (1.0 - frac)
            self.cal.schedule(now + fit * frac, EV_HELP_DUE, c)
        else:
            self.cal.schedule(now + fit, EV_FIT_DONE, c)
        self.tm.staff_busy += now - self.staff_since
        self.staff_idle = True
        if self._note is not None:
            self._note(now)
        self.dispatch_staff(now)

    def request_help(self, c: Customer, now: float) -> None:
        tr = self.tm.trace
        if tr is not None:
            tr.append((now, L_REQUEST_HELP, c.id))
        self.queues.help.join(c, now)
        if self._note is not None:
            self._note(now)
        if self.staff_idle:
            self.dispatch_staff(now)

    def complete_job2(self, c: Customer, now: float) -> None:
        tr = self.tm.trace
        if tr is not None:
            tr.append((now, L_END[JOB2], c.id))
        self.cal.schedule(now + c.fit_remaining, EV_FIT_DONE, c)
        self.tm.staff_busy += now - self.staff_since
        self.staff_idle = True
        self.dispatch_staff(now)

    def leave_cubicle(self, c: Customer, now: float) -> None:
        self.cubicles.occupied -= 1
        self.tm.cubicle_change(now, -1)
        tr = self.tm.trace
        if tr is not None:
            tr.append((now, L_LEAVE, c.id))
        self.queues.ret.join(c, now)
        if self._note is not None:
            self._note(now)
        if self.staff_idle:
            self.dispatch_staff(now)

    def complete_job3(self, c: Customer, now: float) -> None:
        tr = self.tm.trace
        if tr is not None:
            tr.append((now, L_END[JOB3], c.id))
        c.disposition = SERVED
        self.tm.staff_busy += now - self.staff_since
        self.staff_idle = True
        self.dispatch_staff(now)

    def renege(self, c: Customer, now: float) -> None:
        if not c.awaiting_entry:
            return  # already being served; the timer is stale
        tr = self.tm.trace
        if tr is not None:
            tr.append((now, L_RENEGE, c.id))
        c.disposition = RENEGED
        c.wait += now - c.joined_at
        c.awaiting_entry = False
        self.queues.entry.remove(c)
        if self._note is not None:
            self._note(now)
        if self.staff_idle:
            self.dispatch_staff(now)

    def finalize(self, horizon: float) -> RunMetrics:
        if not self.staff_idle:
            self.tm.staff_busy += horizon - self.staff_since
            self.staff_idle = True
        self.tm.flush(horizon)
        close_open_waits(self.customers, horizon)
        for c in self.customers:
            if c.disposition == IN_SYSTEM:
                c.disposition = CLOSED
        return build_metrics(self.customers, self.tm, self.ctl.state.change_count,
                             self.cfg.cubicles, horizon, self.cfg.wait_estimator)


def run_des(cfg: ScenarioConfig, replication: int,
            trace: Optional[list] = None) -> RunMetrics:
    """Run one replication of the event-scheduling model."""
    return DesRun(cfg, replication, trace).run()
