"""Walk an RTT estimator through a handful of samples, then back it off.

Shows how srtt, rttd and the clamped rto move, and how the two backoff
policies differ once the timer starts expiring.
"""

from abrasim.rto import BackoffPolicy, RttEstimator, compute_abra_backoff, on_timer_expiry, record_rtt_sample

samples = [0.10, 0.12, 0.35, 0.11, 0.09]
est = RttEstimator.create()
print(f"start      rto={est.rto:.3f}s  bounds=({est.min_srtt}, {est.max_srtt})")
for r in samples:
    est = record_rtt_sample(est, r)
    print(f"sample {r:.2f} srtt={est.srtt:.4f} rttd={est.rttd:.4f} rto={est.rto:.4f}")

print(f"\nABRA multiplier here: {compute_abra_backoff(est):.4f}")
for policy in BackoffPolicy:
    e = est
    waits = []
    for _ in range(4):
        e, _snap = on_timer_expiry(e, policy, (8000, 16000))
        waits.append(e.rto)
    print(f"{policy.value:12s} waits after 4 expiries: " + ", ".join(f"{w:.3f}" for w in waits)
          + f"  (total {sum(waits):.3f}s)")
