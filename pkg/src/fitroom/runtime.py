"""Pieces both store models share verbatim: waiting lines, the staff's
service-order rule, occupancy/busy-time accounting, and run metrics.

Keeping these identical (not merely similar) is what lets a deterministic
scenario produce byte-for-byte the same trace from either model.
"""

from __future__ import annotations

from collections import deque
from typing import Optional

from .stats import RunMetrics

# customer dispositions
IN_SYSTEM, SERVED, RENEGED, CLOSED = 0, 1, 2, 3

JOB1, JOB2, JOB3 = 1, 2, 3

# trace labels; the trace is a list of (time, label, customer id) with id -1
# for system-level entries
L_ARRIVAL = "arrival"
L_START = (None, "start_job1", "start_job2", "start_job3")
L_END = (None, "end_job1", "end_job2", "end_job3")
L_ENTER = "enter_cubicle"
L_REQUEST_HELP = "request_help"
L_LEAVE = "leave_cubicle"
L_RENEGE = "renege"
L_SPEEDUP = "speedup"
L_REVERT = "revert"


class WaitingLine:
    """FIFO queue that stamps entities with their join time."""

    __slots__ = ("_q",)

    def __init__(self) -> None:
        self._q: deque = deque()

    def __len__(self) -> int:
        return len(self._q)

    def join(self, c, now: float) -> None:
        c.joined_at = now
        c.in_queue = True
        self._q.append(c)

    def head(self):
        q = self._q
        return q[0] if q else None

    def pop_head(self):
        c = self._q.popleft()
        c.in_queue = False
        return c

    def remove(self, c) -> None:
        self._q.remove(c)
        c.in_queue = False


class QueueSet:
    """The three staff-facing queues: entry, in-fitting help, and return."""

    __slots__ = ("entry", "help", "ret")

    def __init__(self) -> None:
        self.entry = WaitingLine()
        self.help = WaitingLine()
        self.ret = WaitingLine()


def select_service(queues: QueueSet, cubicle_free: bool) -> Optional[tuple[int, WaitingLine]]:
    """Pick the staff's next job under global first-come-first-served.

    The earliest-joined head across the three queues wins; the entry head
    only competes while a cubicle is free (entry service ends with the
    customer walking into one).  Ties break by customer id, i.e. arrival
    order.  Returns (job number, line holding the winner) or None.
    """
    best = None
    job = 0
    line = None
    q = queues.entry._q
    if cubicle_free and q:
        best, job, line = q[0], JOB1, queues.entry
    q = queues.help._q
    if q:
        c = q[0]
        if best is None or (c.joined_at, c.id) < (best.joined_at, best.id):
            best, job, line = c, JOB2, queues.help
    q = queues.ret._q
    if q:
        c = q[0]
        if best is None or (c.joined_at, c.id) < (best.joined_at, best.id):
            best, job, line = c, JOB3, queues.ret
    if best is None:
        return None
    return job, line


class Telemetry:
    """Time-integrated accounting plus the optional event trace."""

    __slots__ = ("staff_busy", "occupied", "occ_minutes", "_occ_since", "trace")

    def __init__(self, trace: Optional[list] = None) -> None:
        self.staff_busy = 0.0
        self.occupied = 0
        self.occ_minutes = 0.0
        self._occ_since = 0.0
        self.trace = trace

    def cubicle_change(self, now: float, delta: int) -> None:
        self.occ_minutes += self.occupied * (now - self._occ_since)
        self.occupied += delta
        self._occ_since = now

    def flush(self, horizon: float) -> None:
        self.occ_minutes += self.occupied * (horizon - self._occ_since)
        self._occ_since = horizon


def close_open_waits(customers, horizon: float) -> None:
    """Charge customers still queued at closing for their unfinished wait."""
    for c in customers:
        if c.in_queue:
            c.wait += horizon - c.joined_at


def build_metrics(customers, telemetry: Telemetry, change_count: int,
                  cubicle_capacity: int, horizon: float,
                  wait_estimator: str) -> RunMetrics:
    """Fold one finished run into its RunMetrics.

    Callers must already have settled every customer's disposition.  The
    default wait estimator averages over served customers only; "all" also
    counts reneged customers' partial waits and waits cut off at closing.
    """
    served = 0
    not_served = 0
    wait_served = 0.0
    wait_all = 0.0
    for c in customers:
        wait_all += c.wait
        if c.disposition == SERVED:
            served += 1
            wait_served += c.wait
        else:
            not_served += 1
    if wait_estimator == "served":
        mean_wait = wait_served / served if served else 0.0
    else:
        mean_wait = wait_all / len(customers) if customers else 0.0
    return RunMetrics(
        mean_wait=mean_wait,
        staff_util=telemetry.staff_busy / horizon,
        cubicle_util=telemetry.occ_minutes / (cubicle_capacity * horizon),
        served=served,
        not_served=not_served,
        service_time_changes=change_count,
    )
