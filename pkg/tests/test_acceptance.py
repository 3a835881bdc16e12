"""Acceptance checks, one per criterion.

Each check returns ``(ok, detail)`` and prints a single PASS/FAIL line.
Run under pytest (``pytest tests/test_acceptance.py -s``) or directly
(``python tests/test_acceptance.py``).
"""

import os
import random
import sys
import time
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from abrasim import rto  # noqa: E402
from abrasim.cc import Variant  # noqa: E402
from abrasim.config import load_config, scenario_from_config  # noqa: E402
from abrasim.experiment import check_trends, default_sweep, run_scenario, run_sweep  # noqa: E402
from abrasim.metrics import emit_csv  # noqa: E402
from abrasim.netsim import simulate  # noqa: E402
from abrasim.rto import RttEstimator  # noqa: E402

from helpers import (  # noqa: E402
    all_two_loss_pairs,
    chain_waits,
    paired_outage_configs,
    random_cc_events,
    random_sim_config,
    run_both,
    two_loss_config,
)
from oracles import exact_estimator  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"

# collected for the pytest terminal summary (see conftest.py)
REPORT_LINES = []


def report(n, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n} ({title}): {detail}"
    REPORT_LINES.append(line)
    print(line, flush=True)
    return ok


def rel_err(x, exact):
    exact = float(exact)
    return abs(x - exact) / abs(exact) if exact else abs(x)


def check_estimator_exactness():
    rng = random.Random(2024)
    seqs = [[rng.uniform(0.001, 2.0) for _ in range(rng.randint(1, 100))] for _ in range(1000)]
    t0 = time.perf_counter()
    finals = []
    for samples in seqs:
        est = RttEstimator.create()
        trail = []
        for r in samples:
            est = rto.record_rtt_sample(est, r)
            trail.append((est.srtt, est.rttd, est.rto))
        finals.append(trail)
    elapsed = time.perf_counter() - t0
    worst = 0.0
    for samples, trail in zip(seqs, finals):
        for got, want in zip(trail, exact_estimator(samples)):
            worst = max(worst, *(rel_err(g, w) for g, w in zip(got, want)))
    ok = worst <= 1e-9 and elapsed < 1.0
    return ok, f"max rel err {worst:.2e} (<= 1e-9), estimator time {elapsed:.3f}s (< 1s)"


def check_first_measurement():
    rng = random.Random(7)
    bad = 0
    for _ in range(100):
        r = rng.uniform(0.001, 10.0)
        est = rto.record_rtt_sample(RttEstimator.create(), r)
        exact = Fraction(est.srtt) + 4 * Fraction(est.rttd)
        if not (est.srtt == r and est.rttd == r / 2 and exact == 3 * Fraction(r)):
            bad += 1
    return bad == 0, f"{100 - bad}/100 samples give srtt=r, rttd=r/2, pre-clamp rto=3r exactly"


def check_abra_bounds():
    rng = random.Random(3)
    out_of_range = 0
    for i in range(10_000):
        if i % 2:
            lo = rng.uniform(0.001, 3.0)
            hi = lo + rng.choice([0.0, rng.uniform(0.0, 3.0)])
            last = rng.choice([None, rng.uniform(0.0, 8.0)])
            est = RttEstimator(last_srtt=last, min_srtt=lo, max_srtt=hi)
        else:
            est = RttEstimator.create()
            for _ in range(rng.randint(0, 30)):
                est = rto.record_rtt_sample(est, rng.uniform(0.001, 3.0))
        if not 1.0 <= rto.compute_abra_backoff(est) <= 2.0:
            out_of_range += 1
    at_min = rto.compute_abra_backoff(RttEstimator(last_srtt=0.1))
    at_max = rto.compute_abra_backoff(RttEstimator(last_srtt=0.6))
    mid = rto.compute_abra_backoff(RttEstimator(last_srtt=0.35))
    ok = out_of_range == 0 and (at_min, at_max, mid) == (1.0, 2.0, 1.5)
    return ok, (f"{out_of_range} of 10000 states outside [1,2]; "
                f"anchors min={at_min} max={at_max} mid={mid}")


def check_backoff_dominance():
    t0 = time.perf_counter()
    le = strict = strict_needed = short = 0
    for seed in range(200):
        abra_cfg, exp_cfg = paired_outage_configs(seed)
        wa, wb, chain = chain_waits(simulate(abra_cfg), simulate(exp_cfg))
        if len(wa) < 2:
            short += 1
            continue
        if sum(wa) <= sum(wb):
            le += 1
        if any(r.multiplier < 2 for r in chain):
            strict_needed += 1
            strict += sum(wa) < sum(wb)
    elapsed = time.perf_counter() - t0
    ok = short == 0 and le == 200 and strict == strict_needed and elapsed < 30
    return ok, (f"ABRA wait <= exponential in {le}/200 paired runs, strictly less in "
                f"{strict}/{strict_needed} with a multiplier < 2, {short} runs with fewer than "
                f"2 consecutive expiries, {elapsed:.1f}s (< 30s)")


def check_state_machine():
    rng = random.Random(99)
    variants = list(Variant)
    mismatches = []
    for i in range(1000):
        mss = rng.choice([1, 100, 512, 536, 1000, 1460])
        events = random_cc_events(rng, rng.randint(1, 200), mss)
        diff = run_both(events, mss, variants[i % 3])
        if diff is not None:
            mismatches.append((i, diff))
    diverged = 0
    pairs = all_two_loss_pairs()
    for a, b in pairs:
        nr = simulate(two_loss_config(a, b, Variant.NEWRENO)).metrics
        reno = simulate(two_loss_config(a, b, Variant.RENO), trace=True)
        early = any("class=partial" in l and "mode=CongestionAvoidance" in l for l in reno.trace)
        if nr.timeouts == 0 and nr.partial_ack_retransmits >= 1 and (reno.metrics.timeouts or early):
            diverged += 1
    ok = not mismatches and diverged == len(pairs)
    return ok, (f"{1000 - len(mismatches)}/1000 sequences match the reference automaton; "
                f"New Reno/Reno divergence on {diverged}/{len(pairs)} two-loss traces")


def check_golden():
    base = scenario_from_config(load_config(GOLDEN / "golden.cfg"))
    results = []
    for variant in (Variant.NEWRENO, Variant.ABRA_NEWRENO):
        got = run_scenario(replace(base, variant=variant), trace=True).trace
        want = (GOLDEN / f"trace-{variant.value}.txt").read_text()
        results.append((variant.value, got == want, len(want.splitlines())))
    ok = all(same and n <= 50 for _, same, n in results)
    return ok, ", ".join(f"{v}: {'identical' if s else 'DIFFERS'} ({n} lines)" for v, s, n in results)


def check_conservation_determinism():
    rng = random.Random(77)
    conserved = identical = 0
    for _ in range(100):
        cfg = random_sim_config(rng)
        a, b = simulate(cfg, trace=True), simulate(cfg, trace=True)
        conserved += a.metrics.conserved()
        same_csv = emit_csv([({}, a.metrics)]) == emit_csv([({}, b.metrics)])
        identical += same_csv and a.trace_text() == b.trace_text()
    ok = conserved == 100 and identical == 100
    return ok, f"conservation exact in {conserved}/100, byte-identical reruns {identical}/100"


def check_trend():
    jobs = min(4, os.cpu_count() or 1)
    t0 = time.perf_counter()
    results = run_sweep(default_sweep(), jobs=jobs)
    elapsed = time.perf_counter() - t0
    errors = sum(1 for r in results if r.error)
    checks = check_trends(results)
    failed = [c for c in checks if c.status == "fail"]
    for c in checks:
        line = f"    {c.knob:9s} {c.claim:24s} {c.status:7s} {c.detail}"
        REPORT_LINES.append(line)
        print(line)
    counts = {s: sum(c.status == s for c in checks) for s in ("pass", "fail", "flagged")}
    ok = not failed and not errors and elapsed < 300 and len(results) == 360
    return ok, (f"{len(results)} runs in {elapsed:.0f}s (< 300s, jobs={jobs}), {errors} errors; "
                f"level checks pass={counts['pass']} fail={counts['fail']} "
                f"flagged={counts['flagged']}")


CRITERIA = [
    (1, "estimator exactness", check_estimator_exactness),
    (2, "first-measurement identity", check_first_measurement),
    (3, "ABRA backoff bounds and anchors", check_abra_bounds),
    (4, "backoff dominance", check_backoff_dominance),
    (5, "state-machine oracle equivalence", check_state_machine),
    (6, "golden traces", check_golden),
    (7, "conservation and determinism", check_conservation_determinism),
    (8, "trend reproduction", check_trend),
]


@pytest.mark.parametrize("n,title,check", CRITERIA, ids=[f"criterion{n}" for n, _, _ in CRITERIA])
def test_criterion(n, title, check):
    ok, detail = check()
    assert report(n, title, ok, detail), detail


if __name__ == "__main__":
    outcomes = [report(n, title, *check()) for n, title, check in CRITERIA]
    sys.exit(0 if all(outcomes) else 1)
