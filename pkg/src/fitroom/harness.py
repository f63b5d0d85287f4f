"""Experiment drivers: replication batches, the arrival-pressure sweep, and
the paired policy comparison, plus report serialization.

Reports are flat tables.  Every summary row is one (model, load level,
measure) cell; a comparison report carries hypothesis rows after the summary
rows.  Serialization is deterministic: same report in, same bytes out, so
repeated runs with the same seed can be compared byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional
from zlib import crc32

import numpy as np

from .abs import run_abs
from .config import ScenarioConfig
from .des import run_des
from .stats import HypothesisOutcome, RunMetrics, decide, mann_whitney_u, summarize

MODEL_ORDER = ("des", "abs")
MEASURE_ORDER = (
    "mean_wait",
    "staff_util",
    "cubicle_util",
    "served",
    "not_served",
    "service_time_changes",
)

_RUNNERS = {"des": run_des, "abs": run_abs}

# Spawn key for deriving experiment B's seed when the comparison is run
# without common random numbers.
_B_SEED_KEY = crc32(b"compare-b")


def _models_for(model: str) -> tuple[str, ...]:
    if model == "both":
        return MODEL_ORDER
    if model in _RUNNERS:
        return (model,)
    raise ValueError(f"unknown model {model!r}; expected 'des', 'abs', or 'both'")


def run_replications(config: ScenarioConfig, model: str = "des") -> list[RunMetrics]:
    """Run every replication of one model sequentially.

    Result order is replication order, so element i is always the run seeded
    for replication i regardless of when or where this is called.
    """
    if model not in _RUNNERS:
        raise ValueError(f"unknown model {model!r}; expected 'des' or 'abs'")
    fn = _RUNNERS[model]
    return [fn(config, rep) for rep in range(config.replications)]


@dataclass(frozen=True)
class SweepSpec:
    """Load ladder: level k (1-based) runs at arrival scale growth**(k-1)."""

    levels: int = 5
    growth_factor: float = 1.3

    def __post_init__(self) -> None:
        if not isinstance(self.levels, int) or self.levels < 1:
            raise ValueError("levels must be an integer >= 1")
        if not self.growth_factor > 0:
            raise ValueError("growth_factor must be > 0")

    def scale_at(self, level: int) -> float:
        return self.growth_factor ** (level - 1)


@dataclass(frozen=True)
class SummaryRow:
    model: str
    level: int
    arrival_scale: float
    measure: str
    mean: float
    sd: float
    median: float
    n: int


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple[SummaryRow, ...]
    hypotheses: tuple[HypothesisOutcome, ...] = field(default_factory=tuple)


def _summary_rows(
    model: str, level: int, scale: float, metrics: list[RunMetrics]
) -> list[SummaryRow]:
    rows = []
    for measure in MEASURE_ORDER:
        s = summarize([getattr(m, measure) for m in metrics])
        rows.append(
            SummaryRow(model, level, scale, measure, s.mean, s.sd, s.median, s.n)
        )
    return rows


def run_report(config: ScenarioConfig, model: str = "both") -> ExperimentReport:
    """Replications at the configured load only; reported as level 1."""
    rows: list[SummaryRow] = []
    for m in _models_for(model):
        metrics = run_replications(config, m)
        rows.extend(_summary_rows(m, 1, config.arrival.scale, metrics))
    return ExperimentReport(rows=tuple(rows))


def sweep(
    config: ScenarioConfig,
    spec: Optional[SweepSpec] = None,
    model: str = "both",
) -> ExperimentReport:
    """Run the full load ladder for the selected model(s).

    The sweep owns the arrival scale: level k runs at growth**(k-1) exactly,
    overriding whatever scale the base config carries.  Everything else in
    the config (seed, replications, service times, policy) is untouched.
    """
    spec = spec or SweepSpec()
    rows: list[SummaryRow] = []
    for m in _models_for(model):
        for level in range(1, spec.levels + 1):
            scale = spec.scale_at(level)
            cfg = replace(config, arrival=replace(config.arrival, scale=scale))
            metrics = run_replications(cfg, m)
            rows.extend(_summary_rows(m, level, scale, metrics))
    return ExperimentReport(rows=tuple(rows))


# Hypothesis labels are fixed: H01/H02 compare mean waiting time under the
# discrete-event and agent models respectively, H03/H04 do the same for
# staff utilisation.  A single-model comparison emits only its own pair.
_HYPOTHESES = (
    ("H01", "des", "mean_wait"),
    ("H02", "abs", "mean_wait"),
    ("H03", "des", "staff_util"),
    ("H04", "abs", "staff_util"),
)


def compare_experiments(
    config: ScenarioConfig,
    model: str = "both",
    independent: bool = False,
    alpha: float = 0.05,
) -> ExperimentReport:
    """A/B comparison of the speed-up policy at the configured load.

    Experiment A (reported as level 1) runs with the policy disabled,
    experiment B (level 2) with it enabled.  By default both experiments
    share the master seed, so runs are paired through common random numbers;
    pass independent=True to give B a seed derived from A's instead.
    """
    cfg_a = replace(config, proactive=replace(config.proactive, enabled=False))
    cfg_b = replace(config, proactive=replace(config.proactive, enabled=True))
    if independent:
        seq = np.random.SeedSequence(config.master_seed, spawn_key=(_B_SEED_KEY,))
        cfg_b = replace(cfg_b, master_seed=int(seq.generate_state(1)[0]))

    rows: list[SummaryRow] = []
    samples: dict[tuple[str, str], tuple[list[float], list[float]]] = {}
    for m in _models_for(model):
        metrics_a = run_replications(cfg_a, m)
        metrics_b = run_replications(cfg_b, m)
        rows.extend(_summary_rows(m, 1, config.arrival.scale, metrics_a))
        rows.extend(_summary_rows(m, 2, config.arrival.scale, metrics_b))
        for measure in ("mean_wait", "staff_util"):
            samples[(m, measure)] = (
                [getattr(x, measure) for x in metrics_a],
                [getattr(x, measure) for x in metrics_b],
            )

    hyps = []
    for label, m, measure in _HYPOTHESES:
        if (m, measure) not in samples:
            continue
        a, b = samples[(m, measure)]
        res = mann_whitney_u(a, b)
        hyps.append(decide(label, res.p_value, alpha))
    return ExperimentReport(rows=tuple(rows), hypotheses=tuple(hyps))


# --- serialization ---------------------------------------------------------

_ROW_HEADER = "model,level,arrival_scale,measure,mean,sd,median,n"
_HYP_HEADER = "hypothesis,p_value,alpha,decision"


def _g(x: float) -> str:
    return f"{x:.6g}"


def emit_report(report: ExperimentReport, fmt: str = "csv") -> str:
    """Render a report as CSV or JSON text.

    Floats are written with six significant digits in both formats, so a
    report survives an emit/load/emit round trip byte-identically.
    """
    if fmt == "csv":
        lines = [_ROW_HEADER]
        for r in report.rows:
            lines.append(
                f"{r.model},{r.level},{_g(r.arrival_scale)},{r.measure},"
                f"{_g(r.mean)},{_g(r.sd)},{_g(r.median)},{r.n}"
            )
        if report.hypotheses:
            lines.append(_HYP_HEADER)
            for h in report.hypotheses:
                lines.append(f"{h.label},{_g(h.p_value)},{_g(h.alpha)},{h.decision}")
        return "\n".join(lines) + "\n"
    if fmt == "json":
        doc = {
            "rows": [
                {
                    "model": r.model,
                    "level": r.level,
                    "arrival_scale": float(_g(r.arrival_scale)),
                    "measure": r.measure,
                    "mean": float(_g(r.mean)),
                    "sd": float(_g(r.sd)),
                    "median": float(_g(r.median)),
                    "n": r.n,
                }
                for r in report.rows
            ],
            "hypotheses": [
                {
                    "hypothesis": h.label,
                    "p_value": float(_g(h.p_value)),
                    "alpha": float(_g(h.alpha)),
                    "decision": h.decision,
                }
                for h in report.hypotheses
            ],
        }
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}; expected 'csv' or 'json'")


def load_report(text: str) -> ExperimentReport:
    """Parse text produced by emit_report, either format."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        doc = json.loads(text)
        rows = tuple(
            SummaryRow(
                d["model"], int(d["level"]), float(d["arrival_scale"]), d["measure"],
                float(d["mean"]), float(d["sd"]), float(d["median"]), int(d["n"]),
            )
            for d in doc.get("rows", ())
        )
        hyps = tuple(
            HypothesisOutcome(
                d["hypothesis"], float(d["p_value"]), float(d["alpha"]), d["decision"]
            )
            for d in doc.get("hypotheses", ())
        )
        return ExperimentReport(rows=rows, hypotheses=hyps)

    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != _ROW_HEADER:
        raise ValueError("unrecognized report text: missing summary header")
    rows = []
    hyps = []
    in_hyp = False
    for ln in lines[1:]:
        if ln == _HYP_HEADER:
            in_hyp = True
            continue
        parts = ln.split(",")
        if in_hyp:
            if len(parts) != 4:
                raise ValueError(f"bad hypothesis line: {ln!r}")
            hyps.append(
                HypothesisOutcome(parts[0], float(parts[1]), float(parts[2]), parts[3])
            )
        else:
            if len(parts) != 8:
                raise ValueError(f"bad summary line: {ln!r}")
            rows.append(
                SummaryRow(
                    parts[0], int(parts[1]), float(parts[2]), parts[3],
                    float(parts[4]), float(parts[5]), float(parts[6]), int(parts[7]),
                )
            )
    return ExperimentReport(rows=tuple(rows), hypotheses=tuple(hyps))
