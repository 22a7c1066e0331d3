"""Fit the cost model to the reference measurements and sweep the grid.

Three anchors calibrate the utilization, DMA, and power coefficients: the
two fastest max-frequency configurations and the minimum-power point.  The
sweep then shows the classic pattern: the energy optimum sits at a low
voltage step, never at the max-frequency corner, and a fast cluster paired
with a slow fabric controller starves on weight streaming and idles.
"""

import numpy as np

from nanopose import costmodel as C, graph as G
from nanopose.planner import GAP8, STREAMED, plan

plans = {tag: plan(G.build_variant(tag), GAP8, STREAMED) for tag in G.VARIANTS}
targets = [(plans[tag], C.operating_point(*f), fps, mw)
           for tag, f, fps, mw in C.REFERENCE_POINTS]
params, residuals, info = C.calibrate_params(targets)
print("calibration residuals (relative):", np.round(residuals, 4))
print(f"fitted: eta_peak={params.eta_peak:.2f} MAC/cy, dot_overhead={params.util_dot_overhead:.0f}, "
      f"dma={params.dma_bytes_per_fc_cycle:.2f} B/FC-cycle\n")

peak = C.operating_point(250.0, 175.0)
print(f"{'variant':>8} {'peak fps':>9} {'mW':>7} {'best mJ/frame':>14} {'at (FC, CL) MHz':>16}")
for tag in G.VARIANTS:
    e = C.estimate(plans[tag], peak, params)
    sw = C.sweep(plans[tag], params=params)
    be = sw.best_energy
    print(f"{tag:>8} {e.fps:9.1f} {e.power_mw:7.1f} {be.energy_mj:14.3f} "
          f"({be.op.f_fc:>5g}, {be.op.f_cl:>3g})")

print("\nper-stage idleness on 80x32, weight-streamed:")
for ff, fc in ((25.0, 100.0), (75.0, 50.0)):
    e = C.estimate(plans["80x32"], C.operating_point(ff, fc), params)
    idle = [f"{l.name}({l.idle_cycles / 1e3:.0f}k)" for l in e.per_layer if l.idle_cycles > 0]
    print(f"  FC {ff:3g} / CL {fc:3g} MHz: " + (", ".join(idle) if idle else "fully pipelined"))
