"""Per-run counters, derived statistics and the CSV results table.

Segment counters refer to data segments.  ``segments_sent`` counts every
transmission, ``unique_segments_sent`` only first transmissions.
``segments_delivered`` counts every arrival at the receiver (duplicates
included) while ``segments_received`` counts distinct segments.  A run
satisfies the conservation identity

    segments_sent == segments_delivered + segments_dropped + segments_in_flight

Retransmissions split into ``timeout_retransmits`` (the expiry itself plus
the go-back-N resends that follow it) and ``fast_retransmits`` (third
duplicate ACK and New Reno partial ACKs).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields
from typing import Any, Iterable, Mapping, Optional, Sequence


class MetricsError(ValueError):
    pass


@dataclass
class RunMetrics:
    segments_sent: int = 0
    unique_segments_sent: int = 0
    segments_delivered: int = 0
    segments_received: int = 0
    segments_dropped: int = 0
    dropped_route_down: int = 0
    dropped_random: int = 0
    segments_in_flight: int = 0
    segments_retransmitted: int = 0
    timeout_retransmits: int = 0
    fast_retransmits: int = 0
    partial_ack_retransmits: int = 0
    fast_recoveries: int = 0
    timeouts: int = 0
    acks_sent: int = 0
    acks_lost: int = 0
    rtt_samples: int = 0
    bytes_delivered: int = 0
    duration: float = 0.0
    completion_time: Optional[float] = None

    def conserved(self) -> bool:
        return self.segments_sent == (
            self.segments_delivered + self.segments_dropped + self.segments_in_flight
        )


def throughput(m: RunMetrics) -> float:
    """Delivered bytes per second over the whole run."""
    if not m.duration > 0:
        raise MetricsError("throughput undefined for a zero-length run")
    return m.bytes_delivered / m.duration


def packet_delivery_ratio(m: RunMetrics) -> float:
    """Distinct segments delivered over distinct segments sent."""
    if m.unique_segments_sent <= 0:
        raise MetricsError("packet delivery ratio undefined: nothing was sent")
    return m.segments_received / m.unique_segments_sent


METRIC_COLUMNS = tuple(f.name for f in fields(RunMetrics))
DERIVED_COLUMNS = ("throughput_Bps", "pdr")
_FLOAT_COLUMNS = {"duration", "completion_time"}
FLOAT_DIGITS = 6


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.{FLOAT_DIGITS}f}"
    return str(value)


def metrics_row(m: RunMetrics) -> dict[str, Any]:
    row: dict[str, Any] = {name: getattr(m, name) for name in METRIC_COLUMNS}
    row["throughput_Bps"] = throughput(m) if m.duration > 0 else 0.0
    row["pdr"] = packet_delivery_ratio(m) if m.unique_segments_sent > 0 else 0.0
    return row


def emit_csv(
    runs: Iterable[tuple[Mapping[str, Any], Optional[RunMetrics]]],
    param_columns: Optional[Sequence[str]] = None,
) -> str:
    """Render ``(scenario_params, metrics)`` pairs as CSV text.

    Parameter columns come first, in the order of ``param_columns`` (or of
    the first row's mapping).  A run whose metrics are ``None`` leaves the
    metric columns empty; put the failure message in an ``error`` param.
    """
    runs = list(runs)
    if param_columns is None:
        param_columns = list(runs[0][0]) if runs else []
    header = list(param_columns) + list(METRIC_COLUMNS) + list(DERIVED_COLUMNS)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for params, m in runs:
        row = [_fmt(params.get(c)) for c in param_columns]
        if m is None:
            row += [""] * (len(METRIC_COLUMNS) + len(DERIVED_COLUMNS))
        else:
            values = metrics_row(m)
            row += [_fmt(values[c]) for c in METRIC_COLUMNS + DERIVED_COLUMNS]
        writer.writerow(row)
    return buf.getvalue()


def read_csv(text: str) -> list[tuple[dict[str, str], Optional[RunMetrics]]]:
    """Inverse of :func:`emit_csv` for the metric columns."""
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for raw in reader:
        params = {
            k: v for k, v in raw.items() if k not in METRIC_COLUMNS and k not in DERIVED_COLUMNS
        }
        if raw.get("segments_sent", "") == "":
            out.append((params, None))
            continue
        kwargs: dict[str, Any] = {}
        for name in METRIC_COLUMNS:
            value = raw[name]
            if name in _FLOAT_COLUMNS:
                kwargs[name] = float(value) if value != "" else None
            else:
                kwargs[name] = int(value)
        out.append((params, RunMetrics(**kwargs)))
    return out
