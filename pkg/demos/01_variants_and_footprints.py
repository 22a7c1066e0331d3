"""Build the three network variants and compare their footprints.

The family trades input resolution against channel width: the full-size
160x32 model, a channel-thinned 160x16 that minimizes memory, and a
half-resolution 80x32 that minimizes compute.  analyze() reproduces the
headline figures (MAC count, parameter count, straightforward-allocation
memory) exactly from the layer geometry.
"""

from nanopose import graph as G

print(f"{'variant':>8} {'MMAC':>7} {'params':>9} {'memory kB':>10}")
for tag in G.VARIANTS:
    g = G.build_variant(tag)
    s = G.analyze(g)
    print(f"{tag:>8} {s.macs / 1e6:7.1f} {s.params:9,} {s.memory_bytes / 1e3:10.0f}")

print("\nper-layer walk of 80x32 (channels x height x width):")
g = G.build_variant("80x32")
for row in G.layer_table(g):
    print(f"  {row['name']:>6} {row['kind']:<15} {row['in_shape']:>9} -> {row['out_shape']:>9}"
          f"  macs={row['macs']:>9,}  params={row['params']:>7,}")

# the last conv runs on a 3x2 spatial extent with 128 channels: lots of
# channels, almost no pixels; this shapes both the cost model's utilization
# term and the tiling choices downstream
