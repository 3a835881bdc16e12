"""Scenario sweeps comparing the three TCP variants.

One knob is varied at a time while everything else is held at the base
scenario.  The mobility knobs of a MANET study have no direct counterpart in
an abstract outage model, so each axis maps a level onto route parameters:

``speed`` (m/s)
    more node movement, more route breaks:
    ``outage_rate = level * rate_per_level``.
``nodes`` (node count)
    more alternate paths, so loss and outage durations shrink:
    ``random_loss_prob`` and ``outage_duration`` scale by ``ref / level``.
``pause`` (seconds)
    longer pauses mean a calmer topology: ``outage_rate`` and
    ``outage_duration`` both scale by ``ref / level``.

The mappings are an interpretation, kept in :data:`DEFAULT_MAPPINGS` so they
can be overridden from a sweep file.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Optional, Sequence

from .cc import Variant
from .metrics import RunMetrics, emit_csv, packet_delivery_ratio, throughput
from .netsim import RouteSchedule, SimConfig, simulate
from .rto import BackoffPolicy

AXES = ("speed", "nodes", "pause")

DEFAULT_MAPPINGS: dict[str, dict[str, float]] = {
    "speed": {"rate_per_level": 0.01},
    "nodes": {"ref": 10.0},
    "pause": {"ref": 5.0},
}

DEFAULT_LEVELS: dict[str, tuple[float, ...]] = {
    "speed": (5, 10, 15, 20, 25, 30),
    "nodes": (10, 20, 30, 40, 50),
    "pause": (5, 10, 15, 20, 25, 30),
}

DEFAULT_SEEDS = tuple(range(1, 21))


@dataclass(frozen=True)
class Scenario:
    variant: Variant = Variant.NEWRENO
    route: RouteSchedule = field(
        default_factory=lambda: RouteSchedule(
            base_delay=0.02, random_loss_prob=0.01, outage_rate=0.1, outage_duration=(1.0, 5.0)
        )
    )
    transfer_bytes: int = 1_000_000_000
    mss: int = 1000
    t_end: float = 60.0
    seed: int = 1
    knob_label: str = "base"
    rwnd: int = 16000
    initial_cwnd: Optional[int] = None
    restart_cwnd: Optional[int] = None
    initial_rto: float = 3.0
    rto_floor: float = 0.2
    rto_ceiling: float = 60.0
    policy: Optional[BackoffPolicy] = None
    restore_ssthresh: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def name(self) -> str:
        label = self.knob_label.replace("=", "").replace(" ", "_")
        return f"{label}-{self.variant.value}-s{self.seed}"

    def to_config(self) -> SimConfig:
        return SimConfig(
            variant=self.variant,
            mss=self.mss,
            transfer_bytes=self.transfer_bytes,
            t_end=self.t_end,
            rwnd=self.rwnd,
            initial_cwnd=self.initial_cwnd,
            restart_cwnd=self.restart_cwnd,
            initial_rto=self.initial_rto,
            rto_floor=self.rto_floor,
            rto_ceiling=self.rto_ceiling,
            policy=self.policy,
            restore_ssthresh=self.restore_ssthresh,
            route=replace(self.route, rng_seed=self.seed),
        )

    def params(self) -> dict[str, Any]:
        r = self.route
        return {
            "scenario": self.name,
            "knob": self.knob_label,
            "variant": self.variant.value,
            "seed": self.seed,
            "mss": self.mss,
            "transfer_bytes": self.transfer_bytes,
            "t_end": float(self.t_end),
            "base_delay": float(r.base_delay),
            "random_loss_prob": float(r.random_loss_prob),
            "outage_rate": float(r.outage_rate),
            "outage_min": float(r.outage_duration[0]),
            "outage_max": float(r.outage_duration[1]),
        }


PARAM_COLUMNS = tuple(Scenario().params()) + ("error",)


def apply_level(
    axis: str,
    level: float,
    route: RouteSchedule,
    mappings: Optional[Mapping[str, Mapping[str, float]]] = None,
) -> RouteSchedule:
    """Route parameters representing ``level`` on ``axis``."""
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}; expected one of {AXES}")
    if level <= 0:
        raise ValueError(f"axis levels must be positive, got {level}")
    table = dict(DEFAULT_MAPPINGS[axis])
    if mappings and axis in mappings:
        table.update(mappings[axis])
    lo, hi = route.outage_duration
    if axis == "speed":
        return replace(route, outage_rate=level * table["rate_per_level"])
    scale = table["ref"] / level
    if axis == "nodes":
        return replace(
            route,
            random_loss_prob=min(1.0, route.random_loss_prob * scale),
            outage_duration=(lo * scale, hi * scale),
        )
    return replace(
        route, outage_rate=route.outage_rate * scale, outage_duration=(lo * scale, hi * scale)
    )


def build_sweep(
    axis: str,
    levels: Sequence[float],
    variants: Sequence[Variant | str],
    seeds: Sequence[int],
    base: Scenario,
    mappings: Optional[Mapping[str, Mapping[str, float]]] = None,
) -> list[Scenario]:
    """Levels x variants x seeds, in that nesting order."""
    if not levels or not variants or not seeds:
        raise ValueError("levels, variants and seeds must all be nonempty")
    out = []
    for level in levels:
        route = apply_level(axis, level, base.route, mappings)
        for variant in variants:
            for seed in seeds:
                out.append(
                    replace(
                        base,
                        variant=Variant(variant),
                        route=route,
                        seed=int(seed),
                        knob_label=f"{axis}={level:g}",
                    )
                )
    return out


@dataclass(frozen=True)
class RunResult:
    scenario: Scenario
    metrics: Optional[RunMetrics]
    error: Optional[str] = None
    trace: Optional[str] = None


def run_scenario(scenario: Scenario, trace: bool = False) -> RunResult:
    try:
        sim = simulate(scenario.to_config(), trace=trace)
    except Exception as exc:  # recorded per scenario; the sweep carries on
        return RunResult(scenario, None, f"{type(exc).__name__}: {exc}")
    return RunResult(scenario, sim.metrics, None, sim.trace_text() if trace else None)


def _run_traced(scenario: Scenario) -> RunResult:
    return run_scenario(scenario, trace=True)


def run_sweep(
    scenarios: Iterable[Scenario], jobs: int = 1, trace: bool = False
) -> list[RunResult]:
    """Run every scenario; results come back in input order."""
    scenarios = list(scenarios)
    fn = _run_traced if trace else run_scenario
    if jobs <= 1 or len(scenarios) <= 1:
        return [fn(s) for s in scenarios]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, scenarios, chunksize=max(1, len(scenarios) // (4 * jobs))))


def results_csv(results: Iterable[RunResult]) -> str:
    rows = []
    for r in results:
        params = r.scenario.params()
        params["error"] = r.error or ""
        rows.append((params, r.metrics))
    return emit_csv(rows, PARAM_COLUMNS)


# -- trend analysis -----------------------------------------------------------


@dataclass(frozen=True)
class CellSummary:
    knob: str
    variant: Variant
    runs: int
    mean_throughput: float
    mean_timeouts: float
    mean_partial_ack_retransmits: float
    mean_pdr: float
    mean_retransmitted: float


def summarize(results: Iterable[RunResult]) -> dict[tuple[str, Variant], CellSummary]:
    cells: dict[tuple[str, Variant], list[RunMetrics]] = {}
    for r in results:
        if r.metrics is not None:
            cells.setdefault((r.scenario.knob_label, r.scenario.variant), []).append(r.metrics)
    out = {}
    for (knob, variant), ms in cells.items():
        out[(knob, variant)] = CellSummary(
            knob=knob,
            variant=variant,
            runs=len(ms),
            mean_throughput=statistics.fmean(throughput(m) for m in ms),
            mean_timeouts=statistics.fmean(m.timeouts for m in ms),
            mean_partial_ack_retransmits=statistics.fmean(m.partial_ack_retransmits for m in ms),
            mean_pdr=statistics.fmean(
                packet_delivery_ratio(m) for m in ms if m.unique_segments_sent
            ),
            mean_retransmitted=statistics.fmean(m.segments_retransmitted for m in ms),
        )
    return out


@dataclass(frozen=True)
class TrendCheck:
    knob: str
    claim: str
    status: str  # "pass", "fail" or "flagged" (precondition not met)
    detail: str


def check_trends(
    results: Sequence[RunResult], min_timeouts: float = 2.0, min_partial_acks: float = 2.0
) -> list[TrendCheck]:
    """Variant ordering per knob level.

    ABRA New Reno >= New Reno is required where New Reno averages at least
    ``min_timeouts`` timeouts per run; New Reno >= Reno on multi-loss
    dominated levels, where New Reno's partial-ACK retransmissions per run
    reach ``min_partial_acks`` and are no fewer than its timeouts per run.
    Levels missing the precondition are reported as ``flagged``.
    """
    cells = summarize(results)
    knobs = list(dict.fromkeys(r.scenario.knob_label for r in results))
    checks = []
    for knob in knobs:
        reno = cells.get((knob, Variant.RENO))
        newreno = cells.get((knob, Variant.NEWRENO))
        abra = cells.get((knob, Variant.ABRA_NEWRENO))
        if newreno and abra:
            ok = abra.mean_throughput >= newreno.mean_throughput
            detail = (
                f"abra={abra.mean_throughput:.1f} newreno={newreno.mean_throughput:.1f} B/s, "
                f"newreno timeouts/run={newreno.mean_timeouts:.2f}"
            )
            if newreno.mean_timeouts >= min_timeouts:
                status = "pass" if ok else "fail"
            else:
                status = "flagged"
            checks.append(TrendCheck(knob, "abra-newreno >= newreno", status, detail))
        if newreno and reno:
            ok = newreno.mean_throughput >= reno.mean_throughput
            detail = (
                f"newreno={newreno.mean_throughput:.1f} reno={reno.mean_throughput:.1f} B/s, "
                f"partial-ACK rtx/run={newreno.mean_partial_ack_retransmits:.2f} "
                f"timeouts/run={newreno.mean_timeouts:.2f}"
            )
            partials = newreno.mean_partial_ack_retransmits
            if partials >= min_partial_acks and partials >= newreno.mean_timeouts:
                status = "pass" if ok else "fail"
            else:
                status = "flagged"
            checks.append(TrendCheck(knob, "newreno >= reno", status, detail))
    return checks


def default_sweep(
    axis: str = "speed",
    seeds: Sequence[int] = DEFAULT_SEEDS,
    base: Optional[Scenario] = None,
) -> list[Scenario]:
    return build_sweep(axis, DEFAULT_LEVELS[axis], list(Variant), seeds, base or Scenario())
