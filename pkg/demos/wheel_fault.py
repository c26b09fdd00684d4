"""
Compare the nominal four-wheel assembly with wheel 4 blocked.

Run with ``python3 demos/wheel_fault.py``. The same post-impact momentum on
wheels 1-3 is applied in both cases. The slew needs momentum along the body
y axis, so stored momentum with a positive y component helps and a negative
one hurts; both directions are shown.
"""

import numpy as np

from flyby_guidance import build_benchmark, run_scp

directions = {"helps (+y)": np.array([0.6, 0.5, 0.62]),
              "hurts (-y)": np.array([-0.6, -0.5, 0.3])}

print(f"{'direction':>11} {'|h0| [N m s]':>12} {'nominal vis/ir [s]':>20} {'faulty vis/ir [s]':>20}")
for label, d in directions.items():
    d = d / np.linalg.norm(d)
    for level in (0.0, 1.0, 2.0):
        h3 = level * d
        rows = []
        for fault, h0 in ((None, np.append(h3, 0.0)), (4, h3)):
            sol = run_scp(build_benchmark(fault=fault, h0=h0))
            rows.append(f"{sol.outages.visual_outage:7.1f} / {sol.outages.infrared_outage:6.1f}")
        print(f"{label:>11} {level:12.2f} {rows[0]:>20} {rows[1]:>20}")
