"""Scenario parameters: the validated config dataclass and its file loader.

Config files are flat ``key = value`` lines with ``#`` comments.  Values are
JSON (numbers, booleans, lists); bare words are taken as strings.  A
distribution is written either as a bare number (deterministic) or as a list
``[family, params...]``, e.g. ``["triangular", 1, 2, 3]``.

    seed = 42
    cubicles = 8
    arrival.rates = [20, 34, 48, 56, 56, 48, 34, 20]
    service.job1 = ["triangular", 0.2, 0.4, 0.6]
    patience = infinite
    proactive.check = ["exponential", 0.2]
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .engine import ArrivalProfile, DistributionSpec, HORIZON
from .proactive import ProactivePolicy


class ConfigError(Exception):
    """Bad scenario input; the message names every offending field."""


DEFAULT_HOURLY_RATES = (20.0, 34.0, 48.0, 56.0, 56.0, 48.0, 34.0, 20.0)

_D = DistributionSpec


@dataclass(frozen=True)
class ScenarioConfig:
    """One store scenario.  Defaults describe the calibrated base day:
    roughly 316 expected arrivals served by one staff member and 8 cubicles,
    with the speed-up policy on."""

    arrival: ArrivalProfile = ArrivalProfile(DEFAULT_HOURLY_RATES)
    cubicles: int = 8
    staff_count: int = 1
    job1: DistributionSpec = _D.triangular(0.2, 0.4, 0.6)
    job2: DistributionSpec = _D.triangular(0.5, 1.0, 1.5)
    job3: DistributionSpec = _D.triangular(0.1, 0.3, 0.5)
    fitting: DistributionSpec = _D.triangular(4.0, 7.0, 13.0)
    help_probability: float = 0.2
    help_fraction: DistributionSpec = _D.uniform(0.3, 0.7)
    patience: Optional[DistributionSpec] = _D.exponential(0.04)  # None: infinite
    wait_estimator: str = "served"
    proactive: ProactivePolicy = field(default_factory=ProactivePolicy)
    speedup_fraction: float = 0.2
    horizon: float = HORIZON
    replications: int = 100
    master_seed: int = 1

    def __post_init__(self) -> None:
        errors = []

        def need(cond: bool, msg: str) -> None:
            if not cond:
                errors.append(msg)

        def is_int(v) -> bool:
            return isinstance(v, int) and not isinstance(v, bool)

        need(is_int(self.cubicles) and self.cubicles >= 1,
             "cubicles: must be an integer >= 1")
        need(is_int(self.staff_count) and self.staff_count == 1,
             "staff: this system has exactly one staff member")
        need(is_int(self.replications) and self.replications >= 1,
             "replications: must be an integer >= 1")
        need(is_int(self.master_seed) and self.master_seed >= 0,
             "seed: must be a non-negative integer")
        need(isinstance(self.horizon, (int, float)) and math.isfinite(self.horizon)
             and self.horizon > 0, "horizon: must be a positive number of minutes")
        need(isinstance(self.help_probability, (int, float))
             and 0.0 <= self.help_probability <= 1.0,
             "help.probability: must lie in [0, 1]")
        need(self.wait_estimator in ("served", "all"),
             "wait.estimator: must be 'served' or 'all'")
        need(0.0 <= self.speedup_fraction < 1.0,
             "proactive.speedup: must lie in [0, 1)")

        for name, spec in (("service.job1", self.job1), ("service.job2", self.job2),
                           ("service.job3", self.job3), ("service.fitting", self.fitting)):
            need(spec.support()[0] >= 0.0, f"{name}: durations must be non-negative")
        lo, hi = self.help_fraction.support()
        need(0.0 <= lo and hi <= 1.0,
             "help.fraction: must be a fraction of the fitting time, within [0, 1]")
        if self.patience is not None:
            need(self.patience.support()[0] >= 0.0,
                 "patience: waiting tolerance must be non-negative")
        need(self.proactive.revert_delay.support()[0] >= 0.0,
             "proactive.revert: delay must be non-negative")
        if self.proactive.check_interval is not None:
            need(self.proactive.check_interval.support()[1] > 0.0,
                 "proactive.check: polling interval must be able to advance time")

        if errors:
            raise ConfigError("\n".join(errors))


def parse_config_text(text: str) -> dict:
    """Raw ``key = value`` lines to a {dotted key: parsed value} dict."""
    values: dict = {}
    errors = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if not key or not val:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        if key in values:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            values[key] = json.loads(val)
        except ValueError:
            values[key] = val  # bare word, keep as string
    if errors:
        raise ConfigError("\n".join(errors))
    return values


def _spec_from_value(v) -> DistributionSpec:
    if isinstance(v, bool):
        raise ValueError("expected a distribution, got a boolean")
    if isinstance(v, (int, float)):
        return DistributionSpec.deterministic(float(v))
    if isinstance(v, list) and v and isinstance(v[0], str):
        return DistributionSpec(v[0], tuple(v[1:]))
    raise ValueError("expected a number or [family, params...] list")


def build_config(values: dict, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    """Apply {dotted key: value} settings on top of ``base`` (or defaults)."""
    cfg = base if base is not None else ScenarioConfig()
    updates: dict = {}
    arrival_rates = cfg.arrival.hourly_rates
    arrival_scale = cfg.arrival.scale
    policy: dict = {}
    errors = []

    setters = {
        "seed": ("master_seed", None),
        "replications": ("replications", None),
        "cubicles": ("cubicles", None),
        "staff": ("staff_count", None),
        "horizon": ("horizon", None),
        "help.probability": ("help_probability", None),
        "wait.estimator": ("wait_estimator", None),
        "service.job1": ("job1", _spec_from_value),
        "service.job2": ("job2", _spec_from_value),
        "service.job3": ("job3", _spec_from_value),
        "service.fitting": ("fitting", _spec_from_value),
        "help.fraction": ("help_fraction", _spec_from_value),
        "proactive.speedup": ("speedup_fraction", None),
    }

    for key, value in values.items():
        try:
            if key in setters:
                fieldname, conv = setters[key]
                updates[fieldname] = conv(value) if conv else value
            elif key == "arrival.rates":
                if not isinstance(value, list):
                    raise ValueError("expected a list of hourly rates")
                arrival_rates = tuple(value)
            elif key == "arrival.scale":
                arrival_scale = value
            elif key == "patience":
                updates["patience"] = None if value == "infinite" else _spec_from_value(value)
            elif key == "proactive.enabled":
                if not isinstance(value, bool):
                    raise ValueError("expected true or false")
                policy["enabled"] = value
            elif key == "proactive.threshold":
                policy["threshold_entry"] = value
                policy["threshold_return"] = value
                policy["threshold_help"] = value
            elif key == "proactive.threshold.entry":
                policy["threshold_entry"] = value
            elif key == "proactive.threshold.return":
                policy["threshold_return"] = value
            elif key == "proactive.threshold.help":
                policy["threshold_help"] = value
            elif key == "proactive.revert":
                policy["revert_delay"] = _spec_from_value(value)
            elif key == "proactive.check":
                policy["check_interval"] = None if value == "event" else _spec_from_value(value)
            else:
                raise ValueError("unknown key")
        except ValueError as exc:
            errors.append(f"{key}: {exc}")

    try:
        updates["arrival"] = ArrivalProfile(arrival_rates, arrival_scale)
    except (TypeError, ValueError) as exc:
        errors.append(f"arrival: {exc}")
    if policy:
        try:
            updates["proactive"] = replace(cfg.proactive, **policy)
        except (TypeError, ValueError) as exc:
            errors.append(f"proactive: {exc}")
    if errors:
        raise ConfigError("\n".join(errors))
    return replace(cfg, **updates)


def load_config(path: str, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    """Read a config file.  Raises ConfigError for bad content; I/O errors
    (missing file, unreadable path) propagate as OSError."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return build_config(parse_config_text(text), base)
