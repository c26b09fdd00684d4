"""
Walk through one guidance solve on the comet flyby benchmark.

Run with ``python3 demos/benchmark_slew.py``. Prints the iteration trace,
then the comet angle and wheel momenta along the final trajectory.
"""

import numpy as np

from flyby_guidance import build_benchmark, run_scp
from flyby_guidance.scenario import comet_angles

scenario = build_benchmark()
print(f"{scenario.N} nodes over {scenario.t_f:.0f} s, {scenario.n_w} wheels")

solution = run_scp(scenario)
print(f"\n{'iter':>4} {'try':>3} {'status':>10} {'eps_x':>9} {'radius':>8}  accepted")
for rec in solution.history:
    print(f"{rec.iteration:4d} {rec.attempt:3d} {rec.status:>10} {rec.epsilon_x:9.2e} "
          f"{rec.delta_xmax:8.3f}  {'yes' if rec.accepted else 'no'}")
print(f"\ntermination: {solution.termination} after {solution.iterations} iterations")

traj = solution.trajectory
_, _, h, _ = traj.physical(scenario.scaling)
angles = np.rad2deg(comet_angles(scenario, traj.x[:, :4]))
print(f"\n{'t [s]':>7} {'angle [deg]':>12}   body momentum L h [N m s]")
for k in range(0, scenario.N, 4):
    hb = scenario.plant.L @ h[k]
    print(f"{traj.times[k]:7.1f} {angles[k]:12.4f}   {hb[0]:6.2f} {hb[1]:6.2f} {hb[2]:6.2f}")

out = solution.outages
print(f"\nvisual outage {out.visual_outage:.1f} s, infrared outage {out.infrared_outage:.1f} s, "
      f"largest angle {np.rad2deg(out.max_pointing_error):.3f} deg "
      f"(field of view {np.rad2deg(scenario.theta_vmax):.2f} deg)")
