"""Closed-loop tracking: the drone holds station 1.3 m in front of a
scripted subject for 50 s.

A zero-noise run (ideal, motion-capture-grade observations at 30 Hz) sets
the floor; the per-variant runs inject the deployed models' observation
noise at their inference rates.  Per-component Kalman filters smooth the
noisy relative poses; commands stay clamped at 1 m/s and 0.8 rad/s and the
acceleration respects the 12-degree pitch ceiling at every tick.
"""

from nanopose.metrics import metrics
from nanopose.simulate import RATE_HZ, noise_for, run_experiment

print(f"{'config':>8} {'rate Hz':>8} {'median e_xy m':>14} {'median e_th deg':>16} "
      f"{'phase-0 dist m':>15}")
for variant in ("mocap", "160x32", "160x16", "80x32"):
    log = run_experiment(noise_for(variant, seed=1), RATE_HZ[variant])
    m = metrics(log)
    print(f"{variant:>8} {RATE_HZ[variant]:8g} {m.median_e_xy:14.3f} "
          f"{m.median_e_theta_deg:16.2f} {m.phase0_final_distance:15.3f}")

log = run_experiment(noise_for("mocap", seed=1), 30.0)
m = metrics(log)
print(f"\nlimits over the zero-noise run: |v| <= {m.max_cmd_speed:.3f} m/s, "
      f"|w| <= {m.max_cmd_omega:.3f} rad/s, accel <= {m.max_accel:.3f} m/s^2")
print("(clamps: 1.0 m/s, 0.8 rad/s, 2.04 m/s^2)")

# a run's trajectory log is a plain table; columns documented in
# nanopose.simulate.LOG_COLUMNS
print(f"\nlog columns: {', '.join(log.columns)}")
print(f"rows at 100 Hz: {len(log.rows)}")
