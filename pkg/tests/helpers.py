"""Shared drivers for the test modules."""

import random

from abrasim import cc
from abrasim.cc import ActionKind, Variant

from oracles import RefAutomaton

ACTION_NAMES = {
    ActionKind.NONE: "none",
    ActionKind.SEND_ALLOWED: "send",
    ActionKind.RETRANSMIT_OLDEST: "retransmit-oldest",
    ActionKind.RETRANSMIT_NEXT_UNACKED: "retransmit-next",
}


def random_cc_events(rng, length, mss):
    """Sender-consistent event list: ('send', n) | ('ack', ack) | ('dup', high) | ('timeout',)."""
    una = nxt = 0
    events = []
    while len(events) < length:
        outstanding = (nxt - una) // mss
        r = rng.random()
        if outstanding == 0 or r < 0.2:
            n = rng.randint(1, 8)
            nxt += n * mss
            events.append(("send", n))
        elif r < 0.55:
            ack = una + rng.randint(1, outstanding) * mss
            events.append(("ack", ack, ack - una))
            una = ack
        elif r < 0.95:
            events.append(("dup", nxt))
        else:
            events.append(("timeout",))
            nxt = una
    return events


def state_tuple(s):
    return (s.cwnd, s.ssthresh, s.mode.value, s.recover_seq, s.dupack_count, s.partial_ack_credit)


def run_both(events, mss, variant):
    """Feed ``events`` to the package and the reference; return the first mismatch or None."""
    ref = RefAutomaton(mss, reno=variant is Variant.RENO)
    state = cc.initial_state(mss)
    if state_tuple(state) != ref.snapshot():
        return (-1, state_tuple(state), ref.snapshot())
    for i, ev in enumerate(events):
        if ev[0] == "send":
            continue
        if ev[0] == "ack":
            state, action = cc.on_new_ack(state, mss, ev[2], ev[1], variant=variant)
            expect = ref.new_ack(ev[1], ev[2])
        elif ev[0] == "dup":
            state, action = cc.on_dup_ack(state, mss, ev[1])
            expect = ref.dup_ack(ev[1])
        else:
            state, action = cc.on_timeout(state, mss)
            expect = ref.timeout()
        got = (state_tuple(state), ACTION_NAMES[action.kind])
        want = (ref.snapshot(), expect)
        if got != want:
            return (i, got, want)
    return None


def two_loss_scenarios(n, seed=0):
    """Random (i, j) segment-index pairs lost from the 32-segment slow-start flight (indices 28..59)."""
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        i = rng.randint(28, 58)
        j = rng.randint(i + 1, 59)
        out.append((i, j))
    return out


def outage_chain(expiries, end_us):
    """The run of consecutive expiries still in progress when the outage ends at ``end_us``."""
    before = [r for r in expiries if r.time_us < end_us]
    if not before:
        return []
    start = len(before) - before[-1].consecutive
    chain = before[start:]
    for rec in expiries[len(before):]:
        if rec.consecutive != chain[-1].consecutive + 1:
            break
        chain.append(rec)
    return chain


def paired_outage_configs(seed):
    """Two configs differing only in backoff policy, with one long forced outage."""
    from dataclasses import replace

    from abrasim.netsim import RouteSchedule, SimConfig
    from abrasim.rto import BackoffPolicy

    rng = random.Random(seed)
    start = rng.uniform(1.0, 5.0)
    end = start + rng.uniform(4.0, 12.0)
    route = RouteSchedule(
        base_delay=rng.uniform(0.01, 0.25),
        delay_jitter=rng.uniform(0.002, 0.02),
        scripted_outages=((start, end),),
        rng_seed=seed,
    )
    base = SimConfig(variant=Variant.ABRA_NEWRENO, transfer_bytes=10**9, t_end=end + 3.0,
                     rwnd=rng.choice([8000, 16000, 65535]), route=route)
    return (replace(base, policy=BackoffPolicy.ABRA),
            replace(base, policy=BackoffPolicy.EXPONENTIAL))


def chain_waits(sim_a, sim_b):
    """Backed-off waits over the common prefix of the two outage-forced expiry chains."""
    end = round(sim_a.config.route.scripted_outages[0][1] * 1_000_000)
    a = outage_chain(sim_a.expiries, end)
    b = outage_chain(sim_b.expiries, end)
    k = min(len(a), len(b))
    return [r.rto_after for r in a[:k]], [r.rto_after for r in b[:k]], a[:k]


def random_sim_config(rng):
    """A random but valid single-run configuration."""
    from abrasim.netsim import RouteSchedule, SimConfig

    mss = rng.choice([500, 1000, 1460])
    outages = ()
    if rng.random() < 0.5:
        a = rng.uniform(0.5, 8.0)
        outages = ((a, a + rng.uniform(0.1, 4.0)),)
    route = RouteSchedule(
        base_delay=rng.uniform(0.001, 0.2),
        delay_jitter=rng.choice([0.0, rng.uniform(0.0, 0.05)]),
        random_loss_prob=rng.choice([0.0, 0.01, 0.05, 0.2]),
        outage_rate=rng.choice([0.0, 0.1, 0.3]),
        outage_duration=(0.2, rng.uniform(0.3, 3.0)),
        rng_seed=rng.randint(0, 10**6),
        scripted_outages=outages,
    )
    return SimConfig(
        variant=rng.choice(list(Variant)),
        mss=mss,
        transfer_bytes=rng.choice([mss * rng.randint(1, 50), 10**6, 10**8]),
        t_end=rng.uniform(0.5, 10.0),
        rwnd=rng.choice([mss, 8 * mss, 65535]),
        restore_ssthresh=rng.random() < 0.3,
        route=route,
    )


def two_loss_config(i, j, variant):
    """64-segment transfer losing segments ``i`` and ``j`` of one slow-start flight.

    A 40 ms one-way delay keeps the 200 ms RTO floor clear of the 2-RTT
    fast-retransmit round trip, so the two never tie.
    """
    from abrasim.netsim import RouteSchedule, SimConfig

    route = RouteSchedule(base_delay=0.04, scripted_losses=(("data", i * 1000), ("data", j * 1000)))
    return SimConfig(variant=variant, transfer_bytes=64_000, t_end=20.0, rwnd=10**6, route=route)


def all_two_loss_pairs():
    """Every (i, j) pair inside the 32-segment flight at indices 28..59."""
    return [(i, j) for i in range(28, 60) for j in range(i + 1, 60)]
