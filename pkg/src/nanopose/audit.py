"""Independent verification of deployment plans.

The audit recomputes every byte count from the layer geometry and the tile
slices alone; it shares no sizing code with the planner, so a planner bug
cannot hide itself.
"""

from dataclasses import dataclass, field

import numpy as np

from . import graph as G
from .planner import STREAMED, DeploymentPlan


@dataclass
class AuditReport:
    ok: bool
    problems: list = field(default_factory=list)


def _tile_bytes_from_geometry(layer: G.LayerSpec, tile) -> int:
    """Recompute the double-buffered bytes of one tile from first principles."""
    r0, r1 = tile.out_rows
    c0, c1 = tile.out_ch
    if layer.kind == G.FC:
        in_b = layer.in_ch
        w_b = (c1 - c0) * layer.in_ch
        out_b = (c1 - c0) * 4
    else:
        ic, ih, iw = layer.in_shape
        _, _, ow = layer.out_shape
        lo = max(0, r0 * layer.stride[0] - layer.padding[0])
        hi = min(ih, (r1 - 1) * layer.stride[0] - layer.padding[0] + layer.kernel[0])
        in_b = ic * (hi - lo) * iw
        w_b = (c1 - c0) * layer.in_ch * layer.kernel[0] * layer.kernel[1] if layer.kind == G.CONV else 0
        out_b = (c1 - c0) * (r1 - r0) * ow
    return 2 * (in_b + w_b + out_b)


def audit_plan(p: DeploymentPlan) -> AuditReport:
    problems = []

    # 1. every tile honors the double-buffered L1 bound and the stored bytes
    for name, tiles in p.schedule.items():
        layer = p.graph.layer(name)
        oc = layer.out_ch if layer.kind == G.FC else layer.out_shape[0]
        oh = 1 if layer.kind == G.FC else layer.out_shape[1]
        cover = np.zeros((oc, oh), dtype=np.int32)
        for t in tiles:
            need = _tile_bytes_from_geometry(layer, t)
            if need > p.mem.l1_bytes:
                problems.append(f"{name}: tile {t.out_rows}x{t.out_ch} needs {need} B > L1 {p.mem.l1_bytes}")
            if t.l1_bytes != need:
                problems.append(f"{name}: tile reports {t.l1_bytes} B, geometry gives {need}")
            r0, r1 = t.out_rows
            c0, c1 = t.out_ch
            if not (0 <= r0 < r1 <= oh and 0 <= c0 < c1 <= oc):
                problems.append(f"{name}: tile slice out of bounds {t.out_rows} {t.out_ch}")
                continue
            cover[c0:c1, r0:r1] += 1
        if (cover != 1).any():
            missed = int((cover == 0).sum())
            dup = int((cover > 1).sum())
            problems.append(f"{name}: output coverage broken ({missed} cells uncovered, {dup} overlapped)")

    # 2. L2 occupancy recomputed from graph shapes
    total_w = sum(l.weight_count() for l in p.graph.layers)
    node_w = {n.name: n.weight_bytes for n in p.nodes}
    for i, (n, row) in enumerate(zip(p.nodes, p.occupancy)):
        in_b = int(np.prod(p.graph.layer(n.layer_names[0]).in_shape))
        last = p.graph.layer(n.layer_names[-1])
        out_b = int(np.prod(last.out_shape)) * (4 if last.kind == G.FC else 1)
        if (row.input_bytes, row.output_bytes) != (in_b, out_b):
            problems.append(f"{n.name}: occupancy buffers {row.input_bytes}/{row.output_bytes} "
                            f"!= graph-derived {in_b}/{out_b}")
        if p.policy == STREAMED:
            expect_next = p.nodes[i + 1].weight_bytes if i + 1 < len(p.nodes) else 0
            if row.weights_next != expect_next:
                problems.append(f"{n.name}: streamed next-weights {row.weights_next} != {expect_next}")
            total = row.code + n.weight_bytes + expect_next + in_b + out_b
        else:
            if row.weights_resident != total_w:
                problems.append(f"{n.name}: resident weights {row.weights_resident} != {total_w}")
            total = row.code + total_w + in_b + out_b
        if total > p.mem.l2_bytes and f"{n.name}:" not in " ".join(p.violations):
            problems.append(f"{n.name}: L2 occupancy {total} > {p.mem.l2_bytes} not flagged by planner")

    # 3. weight conservation: stage weights add up to the L3 total
    if sum(node_w.values()) != p.l3_weight_bytes or p.l3_weight_bytes != total_w:
        problems.append(f"weight totals disagree: nodes {sum(node_w.values())}, "
                        f"plan {p.l3_weight_bytes}, graph {total_w}")

    return AuditReport(ok=not problems, problems=problems)
