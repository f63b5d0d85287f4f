"""Threshold-triggered service speed-up.

When the store looks congested (long entry queue while a cubicle sits free,
or a long help/return queue), the staff switches to a hurried pace: every
subsequently sampled staff service time shrinks by a fixed fraction.  The
hurry wears off after a random delay unless congestion re-triggers it,
which restarts the delay without counting as a new pace change.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .engine import DistributionSpec, EventCalendar, Event, RandomStream
from .runtime import JOB1, JOB2, JOB3, L_SPEEDUP, L_REVERT, QueueSet, Telemetry

EV_REVERT = "revert"
EV_POLL = "poll"


@dataclass(frozen=True)
class ProactivePolicy:
    """Trigger thresholds and re-check discipline for the speed-up.

    check_interval None means event-driven: the condition is re-evaluated on
    every queue-length or cubicle-state change.  A DistributionSpec instead
    means stochastic polling at sampled intervals.
    """

    enabled: bool = True
    threshold_entry: int = 3
    threshold_return: int = 3
    threshold_help: int = 3
    revert_delay: DistributionSpec = DistributionSpec.exponential(0.1)
    check_interval: Optional[DistributionSpec] = None

    def __post_init__(self) -> None:
        for name in ("threshold_entry", "threshold_return", "threshold_help"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be an integer >= 1")


class ServiceTimeTable:
    """The three staff service-time distributions plus the current pace.

    Sampling multiplies the drawn duration by the pace factor, so in fast
    mode a job takes exactly (1 - speedup_fraction) times what the same
    draw would have produced at normal pace.
    """

    __slots__ = ("specs", "speedup_fraction", "fast", "factor")

    def __init__(self, job1: DistributionSpec, job2: DistributionSpec,
                 job3: DistributionSpec, speedup_fraction: float) -> None:
        if not 0.0 <= speedup_fraction < 1.0:
            raise ValueError("speedup fraction must lie in [0, 1)")
        self.specs = (None, job1, job2, job3)
        self.speedup_fraction = speedup_fraction
        self.fast = False
        self.factor = 1.0

    @property
    def mode(self) -> str:
        return "fast" if self.fast else "normal"

    def set_fast(self) -> None:
        self.fast = True
        self.factor = 1.0 - self.speedup_fraction

    def set_normal(self) -> None:
        self.fast = False
        self.factor = 1.0

    def sample(self, job: int, stream: RandomStream) -> float:
        return self.specs[job].sample(stream) * self.factor


class SpeedupState:
    """Mutable per-run policy state: transition count and the live revert.

    revert_at is when the current fast episode ends (meaningful only while
    fast); chain_head is the time of the nearest scheduled revert event.
    Re-triggers just move revert_at, and the event chain catches up when it
    fires, so a congestion storm does not flood the calendar.
    """

    __slots__ = ("change_count", "revert_at", "chain_head")

    def __init__(self) -> None:
        self.change_count = 0
        self.revert_at = 0.0
        self.chain_head: Optional[float] = None


def check_condition(queues: QueueSet, cubicles, policy: ProactivePolicy) -> bool:
    """True when the store warrants hurrying.

    Either a cubicle is free while the entry queue has reached its
    threshold, or the return or help queue has reached its own threshold
    regardless of cubicle state.
    """
    if cubicles.free > 0 and len(queues.entry) >= policy.threshold_entry:
        return True
    if len(queues.ret) >= policy.threshold_return:
        return True
    return len(queues.help) >= policy.threshold_help


class SpeedupController:
    """Runs one replication's policy: evaluates triggers, flips the pace,
    and schedules/handles reverts and (optionally) polls.

    Models call note_change() after every queue or cubicle mutation when the
    policy is event-driven; the event_driven flag is False otherwise so the
    call can be skipped on the hot path.
    """

    __slots__ = ("policy", "table", "calendar", "queues", "cubicles",
                 "revert_stream", "poll_stream", "state", "trace", "event_driven",
                 "_entry_q", "_ret_q", "_help_q", "_te", "_tr", "_th")

    def __init__(self, policy: ProactivePolicy, table: ServiceTimeTable,
                 calendar: EventCalendar, queues: QueueSet, cubicles,
                 revert_stream: RandomStream, poll_stream: RandomStream,
                 telemetry: Telemetry) -> None:
        self.policy = policy
        self.table = table
        self.calendar = calendar
        self.queues = queues
        self.cubicles = cubicles
        self.revert_stream = revert_stream
        self.poll_stream = poll_stream
        self.state = SpeedupState()
        self.trace = telemetry.trace
        self.event_driven = policy.enabled and policy.check_interval is None
        # note_change runs on every queue/cubicle mutation, so the condition
        # is inlined there against these cached references; keep it in step
        # with check_condition above
        self._entry_q = queues.entry._q
        self._ret_q = queues.ret._q
        self._help_q = queues.help._q
        self._te = policy.threshold_entry
        self._tr = policy.threshold_return
        self._th = policy.threshold_help

    def start(self) -> None:
        """Schedule the first poll if the policy checks by polling."""
        if self.policy.enabled and self.policy.check_interval is not None:
            delay = self.policy.check_interval.sample(self.poll_stream)
            self.calendar.schedule(self.calendar.now + delay, EV_POLL)

    def note_change(self, now: float) -> None:
        if not self.event_driven:
            return
        cub = self.cubicles
        if ((cub.occupied < cub.capacity and len(self._entry_q) >= self._te)
                or len(self._ret_q) >= self._tr
                or len(self._help_q) >= self._th):
            self.apply_speedup(now)

    def apply_speedup(self, now: float) -> None:
        """Trigger (or re-trigger) the fast pace; the revert clock restarts."""
        delay = self.policy.revert_delay.sample(self.revert_stream)
        st = self.state
        at = now + delay
        st.revert_at = at
        head = st.chain_head
        if head is None or at < head:
            self.calendar.schedule(at, EV_REVERT)
            st.chain_head = at
        if not self.table.fast:
            self.table.set_fast()
            st.change_count += 1
            if self.trace is not None:
                self.trace.append((now, L_SPEEDUP, -1))
        # else: already fast, the re-trigger just restarted the revert clock

    def handle_revert(self, ev) -> None:
        if not self.table.fast:
            return  # leftover event from an already-ended fast episode
        st = self.state
        t = ev[0]
        if t == st.revert_at:
            self.table.set_normal()
            st.chain_head = None
            if self.trace is not None:
                self.trace.append((t, L_REVERT, -1))
        elif t == st.chain_head:
            # a re-trigger moved the revert later; walk the chain forward
            self.calendar.schedule(st.revert_at, EV_REVERT)
            st.chain_head = st.revert_at
        # else: superseded duplicate, drop it

    def handle_poll(self, ev) -> None:
        t = ev[0]
        if check_condition(self.queues, self.cubicles, self.policy):
            self.apply_speedup(t)
        delay = self.policy.check_interval.sample(self.poll_stream)
        self.calendar.schedule(t + delay, EV_POLL)
