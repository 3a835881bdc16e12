"""Congestion-control state machines for Reno, New Reno and ABRA New Reno.

Every function here is a pure transition: it takes a :class:`CongestionState`
and returns a new one together with the :class:`CcAction` the sender must
carry out.  Nothing in this module knows about clocks, timers or queues.

All window quantities are bytes.  Slow start grows the window by one MSS per
new ACK, congestion avoidance by ``mss * mss // cwnd`` (at least one byte).
ABRA New Reno shares New Reno's window logic; it differs only in how the
retransmission timer backs off (see :mod:`abrasim.rto`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

DUPACK_THRESHOLD = 3
DEFAULT_SSTHRESH = 65535
INITIAL_WINDOW_CAP = 4380


class Variant(str, enum.Enum):
    RENO = "reno"
    NEWRENO = "newreno"
    ABRA_NEWRENO = "abra-newreno"

    @property
    def handles_partial_acks(self) -> bool:
        return self is not Variant.RENO


class Mode(str, enum.Enum):
    SLOW_START = "SlowStart"
    CONGESTION_AVOIDANCE = "CongestionAvoidance"
    FAST_RECOVERY = "FastRecovery"


class ActionKind(str, enum.Enum):
    NONE = "None"
    RETRANSMIT_OLDEST = "RetransmitOldest"
    RETRANSMIT_NEXT_UNACKED = "RetransmitNextUnacked"
    SEND_ALLOWED = "SendAllowed"


class ConfigError(ValueError):
    """Raised for a configuration that violates a protocol bound."""


@dataclass(frozen=True)
class SegSize:
    mss_bytes: int

    def __post_init__(self) -> None:
        if self.mss_bytes < 1:
            raise ConfigError(f"mss must be >= 1 byte, got {self.mss_bytes}")


@dataclass(frozen=True)
class CongestionState:
    cwnd: int
    ssthresh: int
    mode: Mode = Mode.SLOW_START
    recover_seq: Optional[int] = None
    dupack_count: int = 0
    partial_ack_credit: int = 0

    @property
    def usable_window(self) -> int:
        """cwnd plus the recovery inflation credit."""
        return self.cwnd + self.partial_ack_credit


@dataclass(frozen=True)
class CcAction:
    kind: ActionKind
    cwnd: int
    ssthresh: int

    @classmethod
    def of(cls, kind: ActionKind, state: CongestionState) -> "CcAction":
        return cls(kind, state.cwnd, state.ssthresh)


def _mss(mss: SegSize | int) -> int:
    return mss.mss_bytes if isinstance(mss, SegSize) else SegSize(mss).mss_bytes


def initial_window_bound(mss: SegSize | int) -> int:
    """Upper bound on the initial window: ``min(4*mss, max(2*mss, 4380))``."""
    m = _mss(mss)
    return min(4 * m, max(2 * m, INITIAL_WINDOW_CAP))


def halved_threshold(cwnd: int, mss: SegSize | int) -> int:
    """ssthresh after a congestion signal, floored at two segments."""
    return max(cwnd // 2, 2 * _mss(mss))


def initial_state(
    mss: SegSize | int,
    initial_cwnd: Optional[int] = None,
    ssthresh: int = DEFAULT_SSTHRESH,
) -> CongestionState:
    m = _mss(mss)
    bound = initial_window_bound(m)
    if initial_cwnd is None:
        cwnd = bound
    elif 0 < initial_cwnd <= bound:
        cwnd = initial_cwnd
    else:
        raise ConfigError(
            f"initial cwnd {initial_cwnd} outside (0, {bound}] for mss={m}"
        )
    # ssthresh keeps its two-segment floor even when configured lower
    return CongestionState(cwnd=cwnd, ssthresh=max(ssthresh, 2 * m))


def on_new_ack(
    state: CongestionState,
    mss: SegSize | int,
    newly_acked_bytes: int,
    highest_acked_seq: int,
    variant: Variant = Variant.NEWRENO,
    max_cwnd: Optional[int] = None,
) -> tuple[CongestionState, CcAction]:
    """Window growth on an ACK that advances the cumulative point.

    In fast recovery the ACK is routed to :func:`on_full_ack` or
    :func:`on_partial_ack` depending on ``recover_seq``.
    """
    if newly_acked_bytes <= 0:
        raise ValueError("a new ACK must acknowledge at least one byte")
    m = _mss(mss)
    if state.mode is Mode.FAST_RECOVERY:
        if highest_acked_seq >= state.recover_seq:
            return on_full_ack(state, m)
        return on_partial_ack(
            state, m, highest_acked_seq, newly_acked_bytes, variant=variant
        )

    if state.mode is Mode.SLOW_START and state.cwnd < state.ssthresh:
        cwnd = state.cwnd + m
        mode = Mode.SLOW_START
    else:
        cwnd = state.cwnd + max(1, m * m // state.cwnd)
        mode = Mode.CONGESTION_AVOIDANCE
    if max_cwnd is not None:
        cwnd = min(cwnd, max(max_cwnd, state.cwnd))
    new = CongestionState(cwnd, state.ssthresh, mode, state.recover_seq, 0, state.partial_ack_credit)
    return new, CcAction(ActionKind.SEND_ALLOWED, cwnd, state.ssthresh)


def on_dup_ack(
    state: CongestionState,
    mss: SegSize | int,
    highest_sent_seq: int,
) -> tuple[CongestionState, CcAction]:
    m = _mss(mss)
    count = state.dupack_count + 1
    if state.mode is Mode.FAST_RECOVERY:
        new = replace(
            state, dupack_count=count, partial_ack_credit=state.partial_ack_credit + m
        )
        return new, CcAction.of(ActionKind.SEND_ALLOWED, new)
    if count < DUPACK_THRESHOLD:
        new = replace(state, dupack_count=count)
        return new, CcAction.of(ActionKind.NONE, new)
    ssthresh = halved_threshold(state.cwnd, m)
    new = CongestionState(
        cwnd=ssthresh,
        ssthresh=ssthresh,
        mode=Mode.FAST_RECOVERY,
        recover_seq=highest_sent_seq,
        dupack_count=count,
        partial_ack_credit=0,
    )
    return new, CcAction.of(ActionKind.RETRANSMIT_OLDEST, new)


def on_partial_ack(
    state: CongestionState,
    mss: SegSize | int,
    new_cum_ack_seq: int,
    newly_acked_bytes: int,
    variant: Variant = Variant.NEWRENO,
) -> tuple[CongestionState, CcAction]:
    """An ACK inside fast recovery that stops short of ``recover_seq``.

    New Reno (and ABRA New Reno) stay in recovery and retransmit the next
    hole.  Reno leaves recovery as though the ACK were complete.
    """
    if state.mode is not Mode.FAST_RECOVERY:
        raise AssertionError("partial ACK outside fast recovery")
    if newly_acked_bytes <= 0:
        raise AssertionError("partial ACK must advance the cumulative point")
    if new_cum_ack_seq >= state.recover_seq:
        raise AssertionError("ACK covers recover_seq; it is a full ACK")
    m = _mss(mss)
    if not variant.handles_partial_acks:
        return on_full_ack(state, m)
    credit = max(0, state.partial_ack_credit - newly_acked_bytes) + m
    new = replace(state, dupack_count=0, partial_ack_credit=credit)
    return new, CcAction.of(ActionKind.RETRANSMIT_NEXT_UNACKED, new)


def on_full_ack(
    state: CongestionState, mss: SegSize | int
) -> tuple[CongestionState, CcAction]:
    _mss(mss)
    new = CongestionState(
        cwnd=state.ssthresh,
        ssthresh=state.ssthresh,
        mode=Mode.CONGESTION_AVOIDANCE,
    )
    return new, CcAction.of(ActionKind.SEND_ALLOWED, new)


def on_timeout(
    state: CongestionState,
    mss: SegSize | int,
    restart_cwnd: Optional[int] = None,
) -> tuple[CongestionState, CcAction]:
    """Retransmission timeout: halve ssthresh, restart slow start.

    ``restart_cwnd`` defaults to one segment.
    """
    m = _mss(mss)
    restart = m if restart_cwnd is None else restart_cwnd
    if not 0 < restart <= initial_window_bound(m):
        raise ConfigError(f"restart cwnd {restart} outside (0, {initial_window_bound(m)}]")
    new = CongestionState(cwnd=restart, ssthresh=halved_threshold(state.cwnd, m))
    return new, CcAction.of(ActionKind.RETRANSMIT_OLDEST, new)
