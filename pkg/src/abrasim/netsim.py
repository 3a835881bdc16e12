"""Deterministic discrete-event simulation of one bulk TCP transfer.

A sender driven by :mod:`abrasim.cc` and :mod:`abrasim.rto` pushes MSS-sized
segments across a single abstract path to a cumulative-ACK receiver.  The
path alternates between up and down periods (route outages, a stand-in for
MANET route breaks) and additionally loses packets at random.  ACKs travel
the same path in reverse and are subject to the same outages and loss.

Time is kept in integer microseconds.  Randomness comes from numpy's PCG64
with three independent child streams of ``SeedSequence(rng_seed)``:
index 0 draws outage gaps and durations, index 1 the random-loss coin flips,
index 2 the delay jitter.

Trace lines have the form ``time_us Kind field=value ...``.  Besides the
dispatched event kinds there is one ``Transmit`` line per segment
transmission, written at send time.
"""

from __future__ import annotations

import bisect
import enum
import heapq
import itertools
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, NamedTuple, Optional

import numpy as np

from . import cc, rto
from .cc import ActionKind, CongestionState, Mode, Variant
from .metrics import RunMetrics
from .rto import BackoffPolicy, RttEstimator, SavedCongestionSnapshot

US_PER_S = 1_000_000


def to_us(seconds: float) -> int:
    return int(round(seconds * US_PER_S))


class EventKind(str, enum.Enum):
    SEGMENT_ARRIVAL = "SegmentArrival"
    ACK_ARRIVAL = "AckArrival"
    RTO_EXPIRY = "RtoExpiry"
    ROUTE_UP = "RouteUp"
    ROUTE_DOWN = "RouteDown"
    APP_DATA_READY = "AppDataReady"
    RUN_END = "RunEnd"


class DropReason(str, enum.Enum):
    ROUTE_DOWN = "RouteDown"
    RANDOM = "Random"


class SimEvent(NamedTuple):
    # seq_no is unique, so tuple ordering never reaches kind/payload
    time_us: int
    seq_no: int
    kind: EventKind
    payload: Any = None


def format_trace_line(time_us: int, kind: str, fields: Iterable[tuple[str, Any]]) -> str:
    parts = [str(time_us), kind]
    parts.extend(f"{k}={v}" for k, v in fields)
    return " ".join(parts)


class EventLoop:
    """Priority queue of :class:`SimEvent` ordered by ``(time_us, seq_no)``.

    ``dispatch`` is called for each event.  It returns the trace fields for
    that event, or ``None`` to leave it out of the trace (cancelled timers).
    Setting :attr:`stopped` from inside ``dispatch`` ends :meth:`run_until`.
    """

    def __init__(self, dispatch: Optional[Callable[[SimEvent], Any]] = None, trace: bool = False):
        self.now_us = 0
        self.stopped = False
        self.trace: Optional[list[str]] = [] if trace else None
        self._dispatch = dispatch or (lambda event: ())
        self._heap: list[SimEvent] = []
        self._counter = itertools.count()

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, time_us: int, kind: EventKind, payload: Any = None) -> SimEvent:
        if time_us < self.now_us:
            raise ValueError(f"cannot schedule at {time_us} us, clock is at {self.now_us} us")
        event = SimEvent(time_us, next(self._counter), kind, payload)
        heapq.heappush(self._heap, event)
        return event

    def pending(self) -> list[SimEvent]:
        return sorted(self._heap)

    def note(self, kind: str, fields: Iterable[tuple[str, Any]]) -> None:
        if self.trace is not None:
            self.trace.append(format_trace_line(self.now_us, kind, fields))

    def run_until(self, t_end_us: int) -> list[str]:
        if t_end_us < self.now_us:
            raise ValueError("run_until target lies in the past")
        heap = self._heap
        trace = self.trace
        while heap and heap[0].time_us <= t_end_us and not self.stopped:
            event = heapq.heappop(heap)
            self.now_us = event.time_us
            mark = len(trace) if trace is not None else 0
            fields = self._dispatch(event)
            if fields is not None and trace is not None:
                # the event's own line precedes the Transmit lines it caused
                trace.insert(mark, format_trace_line(event.time_us, event.kind.value, fields))
        if not self.stopped:
            self.now_us = t_end_us
        return self.trace if self.trace is not None else []


@dataclass(frozen=True)
class RouteSchedule:
    """Parameters of the failure-prone path.

    ``scripted_outages`` are extra ``(start, end)`` down intervals in seconds.
    ``scripted_losses`` drop the first transmission of specific packets:
    ``("data", seq)`` for a data segment, ``("ack", ack_no)`` for an ACK.
    """

    base_delay: float = 0.02
    delay_jitter: float = 0.0
    random_loss_prob: float = 0.0
    outage_rate: float = 0.0
    outage_duration: tuple[float, float] = (1.0, 5.0)
    rng_seed: int = 1
    scripted_outages: tuple[tuple[float, float], ...] = ()
    scripted_losses: tuple[tuple[str, int], ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.random_loss_prob <= 1.0:
            raise ValueError("random_loss_prob must lie in [0, 1]")
        if self.base_delay < 0 or self.delay_jitter < 0:
            raise ValueError("delays must be nonnegative")
        if self.outage_rate < 0:
            raise ValueError("outage_rate must be nonnegative")
        lo, hi = self.outage_duration
        if not 0 < lo <= hi:
            raise ValueError("outage durations must satisfy 0 < min <= max")
        for start, end in self.scripted_outages:
            if not 0 <= start < end:
                raise ValueError(f"bad scripted outage ({start}, {end})")
        for direction, _ in self.scripted_losses:
            if direction not in ("data", "ack"):
                raise ValueError(f"scripted loss direction must be data or ack, got {direction!r}")


def rng_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    outage, loss, jitter = np.random.SeedSequence(seed).spawn(3)
    return (
        np.random.Generator(np.random.PCG64(outage)),
        np.random.Generator(np.random.PCG64(loss)),
        np.random.Generator(np.random.PCG64(jitter)),
    )


def outage_intervals(
    sched: RouteSchedule, t_end_us: int, rng: Optional[np.random.Generator] = None
) -> list[tuple[int, int]]:
    """Down intervals ``[start_us, end_us)`` before ``t_end_us``, merged and sorted."""
    intervals = [(to_us(a), to_us(b)) for a, b in sched.scripted_outages]
    if sched.outage_rate > 0:
        rng = rng if rng is not None else rng_streams(sched.rng_seed)[0]
        lo, hi = sched.outage_duration
        t = 0.0
        while True:
            start = t + rng.exponential(1.0 / sched.outage_rate)
            if to_us(start) >= t_end_us:
                break
            end = start + rng.uniform(lo, hi)
            intervals.append((to_us(start), to_us(end)))
            t = end
    intervals = sorted(i for i in intervals if i[0] < t_end_us)
    merged: list[tuple[int, int]] = []
    for start, end in intervals:
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


@dataclass(frozen=True)
class Fate:
    deliver_at_us: Optional[int] = None
    reason: Optional[DropReason] = None

    @property
    def delivered(self) -> bool:
        return self.reason is None


class Link:
    """Symmetric path: both directions see the same outages and loss rate."""

    def __init__(self, sched: RouteSchedule, t_end_us: int):
        self.sched = sched
        outage_rng, self._loss_rng, self._jitter_rng = rng_streams(sched.rng_seed)
        self.outages = outage_intervals(sched, t_end_us, outage_rng)
        self._starts = [s for s, _ in self.outages]
        self._pending_losses = set(sched.scripted_losses)
        self._base_us = to_us(sched.base_delay)

    def is_down(self, t_us: int) -> bool:
        i = bisect.bisect_right(self._starts, t_us) - 1
        return i >= 0 and t_us < self.outages[i][1]

    def transmit(self, direction: str, key: int, now_us: int) -> Fate:
        if self.is_down(now_us):
            return Fate(reason=DropReason.ROUTE_DOWN)
        if (direction, key) in self._pending_losses:
            self._pending_losses.discard((direction, key))
            return Fate(reason=DropReason.RANDOM)
        p = self.sched.random_loss_prob
        if p > 0 and self._loss_rng.random() < p:
            return Fate(reason=DropReason.RANDOM)
        delay = self._base_us
        if self.sched.delay_jitter > 0:
            delay += to_us(self._jitter_rng.uniform(0.0, self.sched.delay_jitter))
        return Fate(deliver_at_us=now_us + delay)


def link_transmit(link: Link, direction: str, key: int, now_us: int) -> Fate:
    return link.transmit(direction, key, now_us)


class Receiver:
    """Cumulative-ACK receiver; one ACK per arriving segment, no delayed ACKs."""

    def __init__(self) -> None:
        self.next_expected = 0
        self._buffer: dict[int, int] = {}

    @property
    def buffered(self) -> int:
        return len(self._buffer)

    def on_segment(self, seq: int, length: int) -> tuple[int, bool]:
        """Return ``(ack_no, is_new_data)``."""
        if seq < self.next_expected or seq in self._buffer:
            return self.next_expected, False
        if seq == self.next_expected:
            self.next_expected += length
            while self.next_expected in self._buffer:
                self.next_expected += self._buffer.pop(self.next_expected)
        else:
            self._buffer[seq] = length
        return self.next_expected, True


@dataclass
class SentInfo:
    send_time_us: int
    retransmitted: bool = False


@dataclass(frozen=True)
class ExpiryRecord:
    time_us: int
    rto_before: float
    rto_after: float
    multiplier: float
    consecutive: int


@dataclass(frozen=True)
class SimConfig:
    variant: Variant = Variant.NEWRENO
    mss: int = 1000
    transfer_bytes: int = 10_000_000
    t_end: float = 60.0
    rwnd: int = 65535
    initial_cwnd: Optional[int] = None
    restart_cwnd: Optional[int] = None
    initial_ssthresh: int = cc.DEFAULT_SSTHRESH
    initial_rto: float = rto.DEFAULT_INITIAL_RTO
    rto_floor: float = rto.DEFAULT_RTO_FLOOR
    rto_ceiling: float = rto.DEFAULT_RTO_CEILING
    policy: Optional[BackoffPolicy] = None
    restore_ssthresh: bool = False
    route: RouteSchedule = field(default_factory=RouteSchedule)

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.policy is not None:
            object.__setattr__(self, "policy", BackoffPolicy(self.policy))
        cc.SegSize(self.mss)
        if self.transfer_bytes <= 0:
            raise ValueError("transfer_bytes must be positive")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.rwnd < self.mss:
            raise ValueError("rwnd must hold at least one segment")

    @property
    def backoff_policy(self) -> BackoffPolicy:
        if self.policy is not None:
            return self.policy
        if self.variant is Variant.ABRA_NEWRENO:
            return BackoffPolicy.ABRA
        return BackoffPolicy.EXPONENTIAL


class Simulation:
    """One TCP bulk transfer from ``t=0`` to ``t_end``."""

    def __init__(self, config: SimConfig, trace: bool = False):
        self.config = config
        self.mss = config.mss
        self.total = config.transfer_bytes
        self.policy = config.backoff_policy
        self.t_end_us = to_us(config.t_end)

        self.loop = EventLoop(self._dispatch, trace=trace)
        self.link = Link(config.route, self.t_end_us)
        self.receiver = Receiver()
        self.metrics = RunMetrics(duration=config.t_end)

        self.cc: CongestionState = cc.initial_state(
            config.mss, config.initial_cwnd, config.initial_ssthresh
        )
        self.est: RttEstimator = RttEstimator.create(
            config.initial_rto, config.rto_floor, config.rto_ceiling
        )
        self.snapshot: Optional[SavedCongestionSnapshot] = None
        self.snd_una = 0
        self.snd_nxt = 0
        self.snd_max = 0
        self.sent: dict[int, SentInfo] = {}
        self.timer_deadline_us: Optional[int] = None
        self._timer_token = 0
        self.expiries: list[ExpiryRecord] = []
        self.completion_time_us: Optional[int] = None

        self.loop.schedule(0, EventKind.APP_DATA_READY)
        for start, end in self.link.outages:
            self.loop.schedule(start, EventKind.ROUTE_DOWN)
            if end < self.t_end_us:
                self.loop.schedule(end, EventKind.ROUTE_UP)
        self.loop.schedule(self.t_end_us, EventKind.RUN_END)

    # -- driving ------------------------------------------------------------

    def run(self) -> RunMetrics:
        self.loop.run_until(self.t_end_us)
        return self.metrics

    @property
    def trace(self) -> list[str]:
        return self.loop.trace if self.loop.trace is not None else []

    def trace_text(self) -> str:
        return "".join(line + "\n" for line in self.trace)

    def _dispatch(self, event: SimEvent):
        kind = event.kind
        if kind is EventKind.ACK_ARRIVAL:
            return self.sender_on_ack(event.payload)
        if kind is EventKind.SEGMENT_ARRIVAL:
            return self.receiver_on_segment(*event.payload)
        if kind is EventKind.RTO_EXPIRY:
            return self.sender_on_rto(event.payload)
        if kind is EventKind.APP_DATA_READY:
            self.sender_try_send()
            return (("bytes", self.total),)
        if kind is EventKind.RUN_END:
            return self._finish()
        return ()

    def _finish(self):
        self.loop.stopped = True
        m = self.metrics
        m.bytes_delivered = self.receiver.next_expected
        m.segments_in_flight = sum(
            1 for e in self.loop.pending() if e.kind is EventKind.SEGMENT_ARRIVAL
        )
        if self.completion_time_us is not None:
            m.completion_time = self.completion_time_us / US_PER_S
        return (("delivered", m.bytes_delivered), ("in_flight", m.segments_in_flight))

    # -- sender -------------------------------------------------------------

    def _seg_len(self, seq: int) -> int:
        return min(self.mss, self.total - seq)

    def effective_window(self) -> int:
        return min(self.cc.usable_window, self.config.rwnd)

    def _restart_timer(self) -> None:
        self._timer_token += 1
        self.timer_deadline_us = self.loop.now_us + to_us(self.est.rto)
        self.loop.schedule(self.timer_deadline_us, EventKind.RTO_EXPIRY, self._timer_token)

    def _cancel_timer(self) -> None:
        self._timer_token += 1
        self.timer_deadline_us = None

    def _transmit(self, seq: int, cause: str = "") -> Fate:
        now = self.loop.now_us
        length = self._seg_len(seq)
        m = self.metrics
        m.segments_sent += 1
        is_rtx = seq < self.snd_max
        if is_rtx:
            m.segments_retransmitted += 1
            if cause == "fast":
                m.fast_retransmits += 1
            else:
                m.timeout_retransmits += 1
            info = self.sent[seq]
            info.send_time_us = now
            info.retransmitted = True
        else:
            m.unique_segments_sent += 1
            self.sent[seq] = SentInfo(now)
            self.snd_max = seq + length
        fate = self.link.transmit("data", seq, now)
        if fate.delivered:
            self.loop.schedule(fate.deliver_at_us, EventKind.SEGMENT_ARRIVAL, (seq, length))
            outcome = ("arrive", fate.deliver_at_us)
        else:
            m.segments_dropped += 1
            if fate.reason is DropReason.ROUTE_DOWN:
                m.dropped_route_down += 1
            else:
                m.dropped_random += 1
            outcome = ("drop", fate.reason.value)
        if self.loop.trace is not None:
            self.loop.note("Transmit", (("seq", seq), ("len", length), ("rtx", int(is_rtx)), outcome))
        if self.timer_deadline_us is None:
            self._restart_timer()
        return fate

    def _retransmit_una(self, cause: str) -> None:
        seq = self.snd_una
        self._transmit(seq, cause)
        if self.snd_nxt == seq:
            self.snd_nxt = seq + self._seg_len(seq)

    def sender_try_send(self) -> int:
        """Send new (or go-back-N) segments while the window allows."""
        window = self.effective_window()
        count = 0
        while self.snd_nxt < self.total:
            length = self._seg_len(self.snd_nxt)
            if self.snd_nxt - self.snd_una + length > window:
                break
            self._transmit(self.snd_nxt, "timeout")
            self.snd_nxt += length
            count += 1
        return count

    def sender_on_ack(self, ack: int):
        if ack > self.snd_una:
            return self._on_new_ack(ack)
        if ack == self.snd_una and self.snd_nxt > self.snd_una:
            return self._on_dup_ack(ack)
        return (("ack", ack), ("class", "stale"))

    def _on_new_ack(self, ack: int):
        now = self.loop.now_us
        newly = ack - self.snd_una
        seq = self.snd_una
        clean = True
        last_sent_us = 0
        while seq < ack:
            info = self.sent.pop(seq)
            clean = clean and not info.retransmitted
            last_sent_us = info.send_time_us
            seq += self._seg_len(seq)
        if clean:
            self.est = rto.record_rtt_sample(self.est, (now - last_sent_us) / US_PER_S)
            self.metrics.rtt_samples += 1
        self.est = rto.reset_backoff_on_ack(self.est)
        if self.snapshot is not None:
            if self.config.restore_ssthresh:
                self.cc = replace(self.cc, ssthresh=self.snapshot.ssthresh)
            self.snapshot = None

        was_recovering = self.cc.mode is Mode.FAST_RECOVERY
        if was_recovering:
            label = "full" if ack >= self.cc.recover_seq else "partial"
        else:
            label = "new"
        self.snd_una = ack
        self.snd_nxt = max(self.snd_nxt, ack)
        self.cc, action = cc.on_new_ack(
            self.cc, self.mss, newly, ack, variant=self.config.variant, max_cwnd=self.config.rwnd
        )
        if action.kind is ActionKind.RETRANSMIT_NEXT_UNACKED:
            self.metrics.partial_ack_retransmits += 1
            self._retransmit_una("fast")

        if self.snd_una >= self.total and self.completion_time_us is None:
            self.completion_time_us = now
        if self.snd_una < self.snd_nxt:
            self._restart_timer()
        else:
            self._cancel_timer()
        self.sender_try_send()
        return self._ack_fields(ack, label)

    def _on_dup_ack(self, ack: int):
        self.cc, action = cc.on_dup_ack(self.cc, self.mss, self.snd_max)
        if action.kind is ActionKind.RETRANSMIT_OLDEST:
            self.metrics.fast_recoveries += 1
            self._retransmit_una("fast")
        self.sender_try_send()
        return self._ack_fields(ack, "dup")

    def _ack_fields(self, ack: int, label: str):
        if self.loop.trace is None:
            return ()
        s = self.cc
        return (
            ("ack", ack),
            ("class", label),
            ("cwnd", s.cwnd),
            ("ssthresh", s.ssthresh),
            ("credit", s.partial_ack_credit),
            ("mode", s.mode.value),
            ("rto_us", to_us(self.est.rto)),
        )

    def sender_on_rto(self, token: int):
        if token != self._timer_token:
            return None
        self.timer_deadline_us = None
        if self.snd_una >= self.snd_max:
            return (("spurious", 1),)
        m = self.metrics
        m.timeouts += 1
        rto_before = self.est.rto
        multiplier = rto.backoff_multiplier(self.est, self.policy)
        pair = (self.cc.cwnd, self.cc.ssthresh)
        self.cc, _ = cc.on_timeout(self.cc, self.mss, self.config.restart_cwnd)
        self.est, snap = rto.on_timer_expiry(self.est, self.policy, pair)
        if self.snapshot is None:  # keep the state from before the first expiry of a chain
            self.snapshot = snap
        self.expiries.append(
            ExpiryRecord(
                self.loop.now_us, rto_before, self.est.rto, multiplier, self.est.consecutive_backoffs
            )
        )
        # go-back-N: everything past snd_una is presumed lost
        self.snd_nxt = self.snd_una
        self._retransmit_una("timeout")  # re-arms with the backed-off rto
        return (
            ("seq", self.snd_una),
            ("backoff", f"{multiplier:.6f}"),
            ("rto_us", to_us(self.est.rto)),
            ("cwnd", self.cc.cwnd),
            ("ssthresh", self.cc.ssthresh),
        )

    # -- receiver -----------------------------------------------------------

    def receiver_on_segment(self, seq: int, length: int):
        m = self.metrics
        m.segments_delivered += 1
        ack, fresh = self.receiver.on_segment(seq, length)
        if fresh:
            m.segments_received += 1
        m.acks_sent += 1
        fate = self.link.transmit("ack", ack, self.loop.now_us)
        if fate.delivered:
            self.loop.schedule(fate.deliver_at_us, EventKind.ACK_ARRIVAL, ack)
            outcome = ("ack_arrive", fate.deliver_at_us)
        else:
            m.acks_lost += 1
            outcome = ("ack_drop", fate.reason.value)
        return (("seq", seq), ("len", length), ("ack", ack), outcome)


def simulate(config: SimConfig, trace: bool = False) -> Simulation:
    sim = Simulation(config, trace=trace)
    sim.run()
    return sim
