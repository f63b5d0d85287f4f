"""Simulation core: event calendar, seeded random streams, distribution
sampling, and the time-varying arrival process.

Everything downstream (both store models, the speed-up policy, the harness)
builds on these pieces, so the rules here are strict: time never runs
backwards, ties break by insertion order, and every stochastic draw comes
from a named, independently seeded stream.
"""

from __future__ import annotations

import heapq
import math
import zlib
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

OPENING_HOURS = 8
MINUTES_PER_HOUR = 60.0
HORIZON = OPENING_HOURS * MINUTES_PER_HOUR  # one trading day, in minutes


class ModelError(Exception):
    """Raised when a model violates a structural rule (a bug, not bad input)."""


class Event(NamedTuple):
    time: float
    seq: int
    kind: str
    target: object = None


class EventCalendar:
    """Future event list ordered by (time, insertion sequence).

    The insertion sequence makes simultaneous events pop in the order they
    were scheduled, which keeps runs reproducible without relying on the
    targets being comparable.
    """

    __slots__ = ("now", "_heap", "_seq")

    def __init__(self) -> None:
        self.now = 0.0
        self._heap: list[Event] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, time: float, kind: str, target: object = None) -> Event:
        """Add an event; returns its (time, seq, kind, target) entry.

        The heap holds plain tuples (cheaper to build than Event instances,
        and Event compares equal to its tuple), so callers should unpack
        positionally on hot paths.
        """
        if time < self.now:
            raise ModelError(
                f"cannot schedule {kind!r} at t={time}: clock already at {self.now}"
            )
        ev = (time, self._seq, kind, target)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def pop(self) -> Optional[Event]:
        """Remove and return the earliest event, advancing the clock.

        Returns None once the calendar is empty (run complete).
        """
        if not self._heap:
            return None
        ev = heapq.heappop(self._heap)
        self.now = ev[0]
        return Event._make(ev)


class RandomStream:
    """Uniform(0,1) stream with a private PCG64 generator.

    Draws are buffered in blocks and handed out as plain Python floats; the
    sequence is identical to calling ``Generator.random()`` one value at a
    time, just cheaper.
    """

    __slots__ = ("_gen", "_buf")

    _BLOCK = 512

    def __init__(self, seed_seq: np.random.SeedSequence) -> None:
        self._gen = np.random.Generator(np.random.PCG64(seed_seq))
        self._buf: list[float] = []

    def uniform(self) -> float:
        buf = self._buf
        if not buf:
            # reversed so list.pop() hands the block out in generator order
            buf = self._gen.random(self._BLOCK)[::-1].tolist()
            self._buf = buf
        return buf.pop()

    def state_token(self):
        """Hashable snapshot of generator position (pending buffer included);
        equal tokens mean the stream has dealt the same number of draws."""
        st = self._gen.bit_generator.state["state"]
        return (st["state"], st["inc"], len(self._buf))


class RandomStreams:
    """Factory of reproducible substreams keyed by (purpose, replication).

    Each substream is spawned from the master seed via a SeedSequence with a
    distinct spawn key, so streams never overlap and any one purpose can be
    resampled without disturbing the others.  Two experiments sharing a
    master seed therefore share random numbers stream-for-stream.
    """

    __slots__ = ("master_seed",)

    def __init__(self, master_seed: int) -> None:
        if master_seed < 0:
            raise ValueError("master seed must be a non-negative integer")
        self.master_seed = master_seed

    def stream(self, purpose: str, replication: int) -> RandomStream:
        key = (replication, zlib.crc32(purpose.encode("ascii")))
        return RandomStream(np.random.SeedSequence(self.master_seed, spawn_key=key))


def bernoulli(p: float, stream: RandomStream) -> bool:
    """Coin flip that consumes no draw when the outcome is certain.

    The short-circuit keeps fully deterministic scenarios (p of 0 or 1)
    free of random-number consumption.
    """
    if p <= 0.0:
        return False
    if p >= 1.0:
        return True
    return stream.uniform() < p


_FAMILIES = {"deterministic": 1, "exponential": 1, "uniform": 2, "triangular": 3}


@dataclass(frozen=True)
class DistributionSpec:
    """A duration distribution, sampled by inverting the CDF of one uniform.

    Families: deterministic(value), exponential(rate), uniform(low, high),
    triangular(low, mode, high).  Deterministic consumes no draw at all, so
    a fully deterministic scenario uses zero random numbers.
    """

    family: str
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown distribution family {self.family!r}")
        p = tuple(float(x) for x in self.params)
        object.__setattr__(self, "params", p)
        if len(p) != _FAMILIES[self.family]:
            raise ValueError(
                f"{self.family} takes {_FAMILIES[self.family]} parameter(s), got {len(p)}"
            )
        if any(not math.isfinite(x) for x in p):
            raise ValueError(f"{self.family} parameters must be finite: {p}")
        if self.family == "exponential" and p[0] <= 0:
            raise ValueError("exponential rate must be positive")
        if self.family == "uniform" and p[0] > p[1]:
            raise ValueError("uniform requires low <= high")
        if self.family == "triangular" and not (p[0] <= p[1] <= p[2]):
            raise ValueError("triangular requires low <= mode <= high")
        # precompute inverse-CDF constants; sampling sits on the hot path
        if self.family == "deterministic":
            code, c = 0, (p[0], 0.0, 0.0)
        elif self.family == "exponential":
            code, c = 1, (1.0 / p[0], 0.0, 0.0)
        elif self.family == "uniform":
            code, c = 2, (p[0], p[1] - p[0], 0.0)
        else:
            lo, mode, hi = p
            span = hi - lo
            cut = (mode - lo) / span if span > 0 else 1.0
            code, c = 3, (span * (mode - lo), span * (hi - mode), cut)
        object.__setattr__(self, "_code", code)
        object.__setattr__(self, "_c", c)

    @classmethod
    def deterministic(cls, value: float) -> "DistributionSpec":
        return cls("deterministic", (value,))

    @classmethod
    def exponential(cls, rate: float) -> "DistributionSpec":
        return cls("exponential", (rate,))

    @classmethod
    def uniform(cls, low: float, high: float) -> "DistributionSpec":
        return cls("uniform", (low, high))

    @classmethod
    def triangular(cls, low: float, mode: float, high: float) -> "DistributionSpec":
        return cls("triangular", (low, mode, high))

    def mean(self) -> float:
        p = self.params
        if self.family == "deterministic":
            return p[0]
        if self.family == "exponential":
            return 1.0 / p[0]
        if self.family == "uniform":
            return (p[0] + p[1]) / 2.0
        return (p[0] + p[1] + p[2]) / 3.0

    def support(self) -> tuple[float, float]:
        p = self.params
        if self.family == "deterministic":
            return (p[0], p[0])
        if self.family == "exponential":
            return (0.0, math.inf)
        if self.family == "uniform":
            return (p[0], p[1])
        return (p[0], p[2])

    def sample(self, stream: RandomStream) -> float:
        code = self._code
        c = self._c
        if code == 0:
            return c[0]
        u = stream.uniform()
        if code == 1:
            return -math.log1p(-u) * c[0]
        if code == 2:
            return c[0] + c[1] * u
        if u < c[2]:
            return self.params[0] + math.sqrt(u * c[0])
        return self.params[2] - math.sqrt((1.0 - u) * c[1])


@dataclass(frozen=True)
class ArrivalProfile:
    """Piecewise-constant arrival rates, one per opening hour, times a scale.

    Arrivals form a Poisson process whose rate steps at each hour boundary.
    Sampling spends a single Exp(1) "budget" per arrival: whatever fraction
    of the budget is left when an hour ends carries over into the next hour
    at that hour's rate, so no draw is wasted at boundaries.
    """

    hourly_rates: tuple[float, ...]
    scale: float = 1.0

    def __post_init__(self) -> None:
        rates = tuple(float(r) for r in self.hourly_rates)
        object.__setattr__(self, "hourly_rates", rates)
        if len(rates) != OPENING_HOURS:
            raise ValueError(f"need exactly {OPENING_HOURS} hourly rates, got {len(rates)}")
        if any(not math.isfinite(r) or r < 0 for r in rates):
            raise ValueError("hourly rates must be finite and non-negative")
        if not math.isfinite(self.scale) or self.scale <= 0:
            raise ValueError("arrival scale must be positive and finite")

    def expected_daily(self) -> float:
        return sum(self.hourly_rates) * self.scale

    def next_arrival(self, now: float, stream: RandomStream) -> Optional[float]:
        """Time of the next arrival after ``now``, or None if past closing."""
        if now >= HORIZON:
            return None
        budget = -math.log1p(-stream.uniform())
        t = now
        rates = self.hourly_rates
        scale = self.scale
        while True:
            hour = int(t // MINUTES_PER_HOUR)
            if hour >= OPENING_HOURS:
                return None
            rate = rates[hour] * scale / MINUTES_PER_HOUR  # per minute
            boundary = (hour + 1) * MINUTES_PER_HOUR
            if rate > 0.0:
                dt = budget / rate
                if t + dt < boundary:
                    return t + dt
                budget -= (boundary - t) * rate
                if budget < 0.0:
                    budget = 0.0
            t = boundary
