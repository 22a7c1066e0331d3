"""Tile networks into the 64 kB scratchpad and budget the 512 kB L2.

Every tile is sized so that two copies of its working set (input slice with
halo, weight slice, output slice) fit L1, which is what double-buffered DMA
needs.  Under the streamed policy the next stage's weights ride in from
external RAM during the current stage; the small 160x16 model can instead
keep all weights resident in L2.
"""

from nanopose import graph as G
from nanopose.audit import audit_plan
from nanopose.planner import GAP8, RESIDENT, STREAMED, naive_l2_bytes, plan, report_table

for tag in ("160x32", "160x16"):
    g = G.build_variant(tag)
    p = plan(g, GAP8, STREAMED)
    print(f"=== {tag}, streamed weights ===")
    print(report_table(p))
    worst = max(r.total for r in p.occupancy)
    print(f"worst stage occupancy: {worst:,} B of {GAP8.l2_bytes:,} B")
    print(f"naive no-tiling L2 need would be {naive_l2_bytes(g):,} B\n")

    print("tile shapes of the heaviest layers:")
    for name in ("conv1", "b3c2"):
        tiles = p.schedule[name]
        t = tiles[0]
        print(f"  {name}: {len(tiles):>2} tiles; first covers rows {t.out_rows}, "
              f"channels {t.out_ch}, 2x working set = {t.l1_bytes:,} B")
    rep = audit_plan(p)
    print(f"independent audit: {'ok' if rep.ok else rep.problems}\n")

p = plan(G.build_variant("160x16"), GAP8, RESIDENT)
print("=== 160x16, all weights resident in L2 ===")
print(report_table(p))
print(f"audit: {'ok' if audit_plan(p).ok else 'FAILED'}")
