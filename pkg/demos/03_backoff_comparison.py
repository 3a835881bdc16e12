"""Same seed, same outage, two backoff policies.

The exponential and ABRA runs are identical until the first timer expiry.
After that, ABRA's shorter waits let it notice the restored route sooner.
"""

from dataclasses import replace

from abrasim import BackoffPolicy, RouteSchedule, SimConfig, Variant, simulate

base = SimConfig(
    variant=Variant.ABRA_NEWRENO,
    transfer_bytes=10**8,
    t_end=20.0,
    rwnd=16000,
    route=RouteSchedule(base_delay=0.05, delay_jitter=0.01, scripted_outages=((2.0, 9.0),), rng_seed=11),
)

for policy in BackoffPolicy:
    sim = simulate(replace(base, policy=policy))
    after = [r for r in sim.expiries if r.time_us >= 2_000_000]
    resumed = next((r.time_us + round(r.rto_after * 1e6) for r in after if r.time_us < 9_000_000
                    and r.time_us + r.rto_after * 1e6 >= 9_000_000), None)
    print(f"{policy.value:12s} expiries={len(sim.expiries):2d}  "
          f"first retry after the outage at {resumed / 1e6 if resumed else float('nan'):.3f}s  "
          f"bytes delivered={sim.metrics.bytes_delivered}")
