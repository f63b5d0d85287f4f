"""Agent-based model of the fitting-room system.

The same store as in des.py, described the other way around: customers,
the staff member, and the fitting room are agents with state charts that
talk via messages.  Messages are delivered at their send time (zero
latency) in send order, each cascade finishing before the next scheduled
event fires.  Timers (service completions, patience, fitting progress) go
through the shared event calendar.

Given the same scenario, seed, and replication index, this model consumes
the random streams in exactly the same order as the event-scheduling one,
so with degenerate distributions the two traces match byte for byte.
"""

from __future__ import annotations

import heapq
from collections import deque
from typing import NamedTuple, Optional

from .config import ScenarioConfig
from .engine import EventCalendar, ModelError, RandomStreams, bernoulli
from .proactive import EV_POLL, EV_REVERT, ServiceTimeTable, SpeedupController
from .runtime import (CLOSED, IN_SYSTEM, JOB1, JOB2, JOB3, L_ARRIVAL, L_END,
                      L_ENTER, L_LEAVE, L_RENEGE, L_REQUEST_HELP, L_START,
                      RENEGED, SERVED, QueueSet, Telemetry, build_metrics,
                      close_open_waits, select_service)
from .stats import RunMetrics

# customer states
ARRIVED = 0
WAITING_ENTRY = 1
IN_ENTRY_SERVICE = 2
FITTING = 3
WAITING_HELP = 4
IN_HELP_SERVICE = 5
WAITING_RETURN = 6
IN_RETURN_SERVICE = 7
SERVED_STATE = 8
NOT_SERVED = 9

STATE_NAMES = {
    ARRIVED: "Arrived", WAITING_ENTRY: "WaitingEntry",
    IN_ENTRY_SERVICE: "InEntryService", FITTING: "Fitting",
    WAITING_HELP: "WaitingHelp", IN_HELP_SERVICE: "InHelpService",
    WAITING_RETURN: "WaitingReturn", IN_RETURN_SERVICE: "InReturnService",
    SERVED_STATE: "Served", NOT_SERVED: "NotServed",
}

# the customer state chart; NotServed is reachable from any non-terminal
# state because the run cutoff strands customers wherever they stand
_EDGES = frozenset(
    [(ARRIVED, WAITING_ENTRY),
     (WAITING_ENTRY, IN_ENTRY_SERVICE),
     (IN_ENTRY_SERVICE, FITTING),
     (FITTING, WAITING_HELP),
     (WAITING_HELP, IN_HELP_SERVICE),
     (IN_HELP_SERVICE, FITTING),
     (FITTING, WAITING_RETURN),
     (WAITING_RETURN, IN_RETURN_SERVICE),
     (IN_RETURN_SERVICE, SERVED_STATE)]
    + [(s, NOT_SERVED) for s in range(SERVED_STATE)]
)

# message kinds
M_REQUEST_ENTRY = "request_entry"
M_REQUEST_HELP = "request_help"
M_REQUEST_RETURN = "request_return"
M_SERVE = "serve"
M_SERVICE_DONE = "service_done"
M_REQUEST_CUBICLE = "request_cubicle"
M_CUBICLE_GRANTED = "cubicle_granted"
M_CUBICLE_RELEASED = "cubicle_released"
M_RENEGE = "renege"

# timer kinds
EV_ARRIVAL = "arrival"
EV_PATIENCE = "patience"
EV_SVC_DONE = "svc_done"
EV_HELP_DUE = "help_due"
EV_FIT_DONE = "fit_done"

_WAIT_STATE_FOR_JOB = (None, WAITING_ENTRY, WAITING_HELP, WAITING_RETURN)
_SERVICE_STATE_FOR_JOB = (None, IN_ENTRY_SERVICE, IN_HELP_SERVICE, IN_RETURN_SERVICE)


class Message(NamedTuple):
    """One agent-to-agent message; delivery happens at send time."""

    kind: str
    sender: object
    receiver: object
    payload: object = None


class CustomerAgent:
    __slots__ = ("id", "model", "post", "arrived_at", "joined_at", "in_queue",
                 "wait", "disposition", "fit_remaining", "state", "cubicle")

    def __init__(self, cid: int, now: float, model: "AbsRun") -> None:
        self.id = cid
        self.model = model
        self.post = model.msgs.append
        self.arrived_at = now
        self.joined_at = now
        self.in_queue = False
        self.wait = 0.0
        self.disposition = IN_SYSTEM
        self.fit_remaining = 0.0
        self.state = ARRIVED
        self.cubicle = -1

    def _transition(self, to: int) -> None:
        if (self.state, to) not in _EDGES:
            raise ModelError(
                f"customer {self.id}: illegal transition "
                f"{STATE_NAMES[self.state]} -> {STATE_NAMES[to]}"
            )
        self.state = to

    # -- timers ----------------------------------------------------------

    def svc_done(self, now: float) -> None:
        """The staff finished whatever job this customer was receiving."""
        model = self.model
        st = self.state
        tr = model.tm.trace
        if st == IN_ENTRY_SERVICE:
            if tr is not None:
                tr.append((now, L_END[JOB1], self.id))
            self.post((model.room, M_REQUEST_CUBICLE, self))
        elif st == IN_HELP_SERVICE:
            if tr is not None:
                tr.append((now, L_END[JOB2], self.id))
            model.cal.schedule(now + self.fit_remaining, EV_FIT_DONE, self)
            self._transition(FITTING)
            self.post((model.staff, M_SERVICE_DONE, self))
        elif st == IN_RETURN_SERVICE:
            if tr is not None:
                tr.append((now, L_END[JOB3], self.id))
            self.disposition = SERVED
            self._transition(SERVED_STATE)
            self.post((model.staff, M_SERVICE_DONE, self))
        else:
            raise ModelError(
                f"customer {self.id}: service completion while {STATE_NAMES[st]}"
            )

    def help_due(self, now: float) -> None:
        model = self.model
        tr = model.tm.trace
        if tr is not None:
            tr.append((now, L_REQUEST_HELP, self.id))
        self._transition(WAITING_HELP)
        self.post((model.staff, M_REQUEST_HELP, self))

    def fit_done(self, now: float) -> None:
        model = self.model
        post = self.post
        post((model.room, M_CUBICLE_RELEASED, self))
        self._transition(WAITING_RETURN)
        post((model.staff, M_REQUEST_RETURN, self))

    def patience_expired(self, now: float) -> None:
        if self.state != WAITING_ENTRY:
            return  # being (or already been) served; the timer is stale
        model = self.model
        tr = model.tm.trace
        if tr is not None:
            tr.append((now, L_RENEGE, self.id))
        self.disposition = RENEGED
        self.wait += now - self.joined_at
        self._transition(NOT_SERVED)
        self.post((model.staff, M_RENEGE, self))

    # -- messages --------------------------------------------------------

    def handle(self, kind: str, payload, now: float) -> None:
        if kind == M_SERVE:
            if self.state != _WAIT_STATE_FOR_JOB[payload]:
                raise ModelError(
                    f"customer {self.id}: serve for job {payload} while "
                    f"{STATE_NAMES[self.state]}"
                )
            self._transition(_SERVICE_STATE_FOR_JOB[payload])
        elif kind == M_CUBICLE_GRANTED:
            self.cubicle = payload
            model = self.model
            cfg = model.cfg
            fit = cfg.fitting.sample(model.s_fitting)
            if bernoulli(cfg.help_probability, model.s_help):
                frac = cfg.help_fraction.sample(model.s_help)
                self.fit_remaining = fit * (1.0 - frac)
                model.cal.schedule(now + fit * frac, EV_HELP_DUE, self)
            else:
                model.cal.schedule(now + fit, EV_FIT_DONE, self)
            self._transition(FITTING)
            self.post((model.staff, M_SERVICE_DONE, self))
        else:
            raise ModelError(f"customer {self.id}: unexpected message {kind!r}")


class StaffAgent:
    """The single staff member: three queues, one pair of hands."""

    __slots__ = ("model", "tm", "queues", "idle", "since", "current_job")

    def __init__(self, model: "AbsRun", queues: QueueSet) -> None:
        self.model = model
        self.tm = model.tm
        self.queues = queues
        self.idle = True
        self.since = 0.0
        self.current_job = 0

    def handle(self, kind: str, payload, now: float) -> None:
        model = self.model
        note = model.note
        if kind == M_SERVICE_DONE:
            self.tm.staff_busy += now - self.since
            self.idle = True
            job = self.current_job
            self.current_job = 0
            # job 1 ended with a cubicle filling up, which is a state change
            # the speed-up policy watches
            if job == JOB1 and note is not None:
                note(now)
            self.scan(now)
        elif kind == M_REQUEST_ENTRY:
            self.queues.entry.join(payload, now)
            if note is not None:
                note(now)
            if self.idle:
                self.scan(now)
        elif kind == M_REQUEST_RETURN:
            self.queues.ret.join(payload, now)
            if note is not None:
                note(now)
            if self.idle:
                self.scan(now)
        elif kind == M_REQUEST_HELP:
            self.queues.help.join(payload, now)
            if note is not None:
                note(now)
            if self.idle:
                self.scan(now)
        elif kind == M_RENEGE:
            self.queues.entry.remove(payload)
            if note is not None:
                note(now)
            if self.idle:
                self.scan(now)
        else:
            raise ModelError(f"staff: unexpected message {kind!r}")

    def scan(self, now: float) -> None:
        """Look for the next job under the shared service-order rule."""
        model = self.model
        room = model.room
        pick = select_service(self.queues, room.occupied < room.capacity)
        if pick is None:
            return
        job, line = pick
        c = line.pop_head()
        c.wait += now - c.joined_at
        note = model.note
        if note is not None:
            note(now)
        table = model.table
        dur = table.specs[job].sample(model.s_job[job]) * table.factor
        tr = model.tm.trace
        if tr is not None:
            tr.append((now, L_START[job], c.id))
        self.idle = False
        self.since = now
        self.current_job = job
        model.cal.schedule(now + dur, EV_SVC_DONE, c)
        model.msgs.append((c, M_SERVE, job))


class FittingRoomAgent:
    """The bank of cubicles; grants the lowest-numbered free one."""

    __slots__ = ("model", "tm", "capacity", "occupied", "slots")

    def __init__(self, model: "AbsRun", capacity: int) -> None:
        self.model = model
        self.tm = model.tm
        self.capacity = capacity
        self.occupied = 0
        self.slots = [False] * capacity

    @property
    def free(self) -> int:
        return self.capacity - self.occupied

    def handle(self, kind: str, payload, now: float) -> None:
        model = self.model
        if kind == M_REQUEST_CUBICLE:
            idx = -1
            for i, taken in enumerate(self.slots):
                if not taken:
                    idx = i
                    break
            if idx < 0:
                # entry service only starts while a cubicle is free, and the
                # single staff member cannot start another entry in between
                raise ModelError("cubicle requested with none free")
            self.slots[idx] = True
            self.occupied += 1
            tm = self.tm
            tm.cubicle_change(now, 1)
            tr = tm.trace
            if tr is not None:
                tr.append((now, L_ENTER, payload.id))
            model.msgs.append((payload, M_CUBICLE_GRANTED, idx))
        elif kind == M_CUBICLE_RELEASED:
            self.slots[payload.cubicle] = False
            payload.cubicle = -1
            self.occupied -= 1
            tm = self.tm
            tm.cubicle_change(now, -1)
            tr = tm.trace
            if tr is not None:
                tr.append((now, L_LEAVE, payload.id))
        else:
            raise ModelError(f"fitting room: unexpected message {kind!r}")


class AbsRun:
    """State of a single replication."""

    __slots__ = ("cfg", "cal", "queues", "tm", "table", "ctl", "customers",
                 "staff", "room", "msgs", "note",
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
        self.tm = Telemetry(trace)
        self.table = ServiceTimeTable(cfg.job1, cfg.job2, cfg.job3,
                                      cfg.speedup_fraction)
        self.staff = StaffAgent(self, self.queues)
        self.room = FittingRoomAgent(self, cfg.cubicles)
        self.ctl = SpeedupController(cfg.proactive, self.table, self.cal,
                                     self.queues, self.room,
                                     s_revert, s_poll, self.tm)
        self.customers: list[CustomerAgent] = []
        self.msgs: deque = deque()
        self.note = self.ctl.note_change if self.ctl.event_driven else None

    def send(self, receiver, kind: str, payload) -> None:
        self.msgs.append((receiver, kind, payload))

    def deliver(self, msg: Message) -> None:
        """Deliver one explicit Message now (bypassing the send queue)."""
        msg.receiver.handle(msg.kind, msg.payload, self.cal.now)

    def run(self) -> RunMetrics:
        cal = self.cal
        horizon = self.cfg.horizon
        self.ctl.start()
        first = self.cfg.arrival.next_arrival(0.0, self.s_arrivals)
        if first is not None:
            cal.schedule(first, EV_ARRIVAL)
        # calendar drained inline as in des.py; cal.now kept in step
        heap = cal._heap
        pop = heapq.heappop
        msgs = self.msgs
        popmsg = msgs.popleft
        while heap:
            ev = pop(heap)
            t, _, kind, target = ev
            if t > horizon:
                break
            cal.now = t
            if kind == EV_SVC_DONE:
                target.svc_done(t)
            elif kind == EV_FIT_DONE:
                target.fit_done(t)
            elif kind == EV_ARRIVAL:
                self.handle_arrival(t)
            elif kind == EV_PATIENCE:
                target.patience_expired(t)
            elif kind == EV_HELP_DUE:
                target.help_due(t)
            elif kind == EV_REVERT:
                self.ctl.handle_revert(ev)
            elif kind == EV_POLL:
                self.ctl.handle_poll(ev)
            # the whole cascade settles before the clock can move again
            while msgs:
                receiver, mkind, payload = popmsg()
                receiver.handle(mkind, payload, t)
        return self.finalize(horizon)

    def handle_arrival(self, now: float) -> None:
        cfg = self.cfg
        c = CustomerAgent(len(self.customers), now, self)
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
        c._transition(WAITING_ENTRY)
        self.msgs.append((self.staff, M_REQUEST_ENTRY, c))

    def finalize(self, horizon: float) -> RunMetrics:
        if not self.staff.idle:
            self.tm.staff_busy += horizon - self.staff.since
            self.staff.idle = True
        self.tm.flush(horizon)
        close_open_waits(self.customers, horizon)
        for c in self.customers:
            if c.disposition == IN_SYSTEM:
                c.disposition = CLOSED
                c._transition(NOT_SERVED)
        return build_metrics(self.customers, self.tm, self.ctl.state.change_count,
                             self.cfg.cubicles, horizon, self.cfg.wait_estimator)


def run_abs(cfg: ScenarioConfig, replication: int,
            trace: Optional[list] = None) -> RunMetrics:
    """Run one replication of the agent-based model."""
    return AbsRun(cfg, replication, trace).run()
