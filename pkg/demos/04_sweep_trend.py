"""A reduced speed-axis sweep with the variant ordering checks.

Uses 5 seeds and 30 s runs so it finishes in well under a minute; the full
default sweep is ``abrasim sweep --config <(abrasim --print-defaults)``.
"""

from dataclasses import replace

from abrasim import Variant
from abrasim.experiment import Scenario, build_sweep, check_trends, run_sweep, summarize

base = replace(Scenario(), t_end=30.0)
results = run_sweep(build_sweep("speed", [5, 15, 30], list(Variant), range(1, 6), base))

for (knob, variant), cell in summarize(results).items():
    print(f"{knob:9s} {variant.value:13s} throughput={cell.mean_throughput:9.0f} B/s  "
          f"timeouts/run={cell.mean_timeouts:5.2f}  pdr={cell.mean_pdr:.4f}")
print()
for check in check_trends(results):
    print(f"{check.knob:9s} {check.claim:24s} {check.status}")
