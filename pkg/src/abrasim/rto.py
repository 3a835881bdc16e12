"""Retransmission-timeout estimation and backoff.

The estimator chain is the classic one: the first sample sets
``srtt = rtt`` and ``rttd = rtt / 2``; later samples update

    srtt = 7/8 * srtt + 1/8 * rtt
    rttd = 3/4 * rttd + 1/4 * |srtt - rtt|

(the deviation uses the freshly updated ``srtt``) and ``rto = srtt + 4*rttd``,
clamped to ``[rto_floor, rto_ceiling]``.

Two backoff policies are provided.  ``EXPONENTIAL`` doubles the RTO on every
expiry.  ``ABRA`` multiplies it by

    1 + (last_srtt - min_srtt) / (max_srtt - min_srtt)

where ``min_srtt``/``max_srtt`` are the extreme smoothed RTTs seen so far
(seeded with 0.1 s and 0.6 s).  The multiplier lies in ``[1, 2]``, so a path
whose SRTT sits near its historical minimum is re-probed quickly after an
outage instead of waiting out a doubled timer.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

ALPHA = 1 / 8
BETA = 1 / 4
K_RTTD = 4

INITIAL_MIN_SRTT = 0.1
INITIAL_MAX_SRTT = 0.6
DEFAULT_INITIAL_RTO = 3.0
DEFAULT_RTO_FLOOR = 0.2
DEFAULT_RTO_CEILING = 60.0


class BackoffPolicy(str, enum.Enum):
    EXPONENTIAL = "exponential"
    ABRA = "abra"


@dataclass(frozen=True)
class SavedCongestionSnapshot:
    cwnd: int
    ssthresh: int
    srtt: Optional[float]


@dataclass(frozen=True)
class RttEstimator:
    rto: float = DEFAULT_INITIAL_RTO
    srtt: Optional[float] = None
    rttd: Optional[float] = None
    last_srtt: Optional[float] = None
    min_srtt: float = INITIAL_MIN_SRTT
    max_srtt: float = INITIAL_MAX_SRTT
    rto_floor: float = DEFAULT_RTO_FLOOR
    rto_ceiling: float = DEFAULT_RTO_CEILING
    consecutive_backoffs: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.rto_floor <= self.rto_ceiling:
            raise ValueError(
                f"need 0 < rto_floor <= rto_ceiling, got {self.rto_floor}, {self.rto_ceiling}"
            )
        if self.min_srtt > self.max_srtt:
            raise ValueError("min_srtt must not exceed max_srtt")

    @classmethod
    def create(
        cls,
        initial_rto: float = DEFAULT_INITIAL_RTO,
        rto_floor: float = DEFAULT_RTO_FLOOR,
        rto_ceiling: float = DEFAULT_RTO_CEILING,
    ) -> "RttEstimator":
        est = cls(rto_floor=rto_floor, rto_ceiling=rto_ceiling)
        return replace(est, rto=est.clamp(initial_rto))

    def clamp(self, value: float) -> float:
        return min(max(value, self.rto_floor), self.rto_ceiling)

    @property
    def smoothed_rto(self) -> Optional[float]:
        """``srtt + 4*rttd`` before clamping, or None with no samples yet."""
        if self.srtt is None:
            return None
        return self.srtt + K_RTTD * self.rttd


def record_rtt_sample(est: RttEstimator, rtt: float) -> RttEstimator:
    if not rtt > 0:
        raise ValueError(f"RTT sample must be positive, got {rtt!r}")
    if est.srtt is None:
        srtt = rtt
        rttd = rtt / 2
    else:
        srtt = (1 - ALPHA) * est.srtt + ALPHA * rtt
        rttd = (1 - BETA) * est.rttd + BETA * abs(srtt - rtt)
    return RttEstimator(
        rto=est.clamp(srtt + K_RTTD * rttd),
        srtt=srtt,
        rttd=rttd,
        last_srtt=srtt,
        min_srtt=min(est.min_srtt, srtt),
        max_srtt=max(est.max_srtt, srtt),
        rto_floor=est.rto_floor,
        rto_ceiling=est.rto_ceiling,
        consecutive_backoffs=0,
    )


def current_rto(est: RttEstimator) -> float:
    return est.rto


def compute_abra_backoff(est: RttEstimator) -> float:
    """ABRA multiplier in ``[1, 2]``.

    Falls back to 2 (plain doubling) when there is no SRTT yet or the
    min/max bounds coincide.
    """
    spread = est.max_srtt - est.min_srtt
    if est.last_srtt is None or spread <= 0:
        return 2.0
    backoff = 1.0 + (est.last_srtt - est.min_srtt) / spread
    return min(max(backoff, 1.0), 2.0)


def backoff_multiplier(est: RttEstimator, policy: BackoffPolicy) -> float:
    if policy is BackoffPolicy.ABRA:
        return compute_abra_backoff(est)
    return 2.0


def on_timer_expiry(
    est: RttEstimator,
    policy: BackoffPolicy,
    cc_snapshot: tuple[int, int],
) -> tuple[RttEstimator, SavedCongestionSnapshot]:
    """Back the timer off and capture ``(cwnd, ssthresh, srtt)``."""
    multiplier = backoff_multiplier(est, BackoffPolicy(policy))
    cwnd, ssthresh = cc_snapshot
    new = replace(
        est,
        rto=est.clamp(multiplier * est.rto),
        consecutive_backoffs=est.consecutive_backoffs + 1,
    )
    return new, SavedCongestionSnapshot(cwnd=cwnd, ssthresh=ssthresh, srtt=est.srtt)


def reset_backoff_on_ack(est: RttEstimator) -> RttEstimator:
    # The backed-off rto itself stays until the next valid sample (Karn).
    if est.consecutive_backoffs == 0:
        return est
    return replace(est, consecutive_backoffs=0)
