"""One transfer over a path that goes down for two seconds.

Prints the headline metrics for each TCP variant and the timer expiries
each one went through while the route was down.
"""

from abrasim import RouteSchedule, SimConfig, Variant, simulate
from abrasim.metrics import packet_delivery_ratio, throughput

route = RouteSchedule(base_delay=0.03, random_loss_prob=0.01, scripted_outages=((3.0, 5.0),), rng_seed=4)

for variant in Variant:
    sim = simulate(SimConfig(variant=variant, transfer_bytes=10**8, t_end=15.0, rwnd=16000, route=route))
    m = sim.metrics
    print(f"{variant.value:13s} throughput={throughput(m):9.0f} B/s  pdr={packet_delivery_ratio(m):.4f}  "
          f"timeouts={m.timeouts}  fast_rtx={m.fast_retransmits}  drops={m.segments_dropped}")
    for rec in sim.expiries:
        print(f"    expiry at {rec.time_us / 1e6:7.3f}s  x{rec.multiplier:.3f}  "
              f"rto {rec.rto_before:.3f} -> {rec.rto_after:.3f}")
