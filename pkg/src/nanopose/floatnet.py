"""Float parameter container for a NetGraph, plus seeded synthetic weights.

Convolutions carry raw weights; each activation stage owns the batch-norm
statistics that precede its ReLU.  The head is a bias-free linear layer.
"""

from dataclasses import dataclass, field

import numpy as np

from . import graph as G

BN_EPS = 1e-5


@dataclass
class BatchNorm:
    gamma: np.ndarray
    beta: np.ndarray
    mean: np.ndarray
    var: np.ndarray

    def sigma(self) -> np.ndarray:
        return np.sqrt(self.var + BN_EPS)


@dataclass
class FloatNet:
    graph: G.NetGraph
    weights: dict = field(default_factory=dict)   # conv/fc layer name -> ndarray
    bn: dict = field(default_factory=dict)        # requant layer name -> BatchNorm

    def validate(self):
        for l in self.graph.layers:
            if l.kind == G.CONV:
                w = self.weights[l.name]
                expect = (l.out_ch, l.in_ch, l.kernel[0], l.kernel[1])
                if w.shape != expect:
                    raise ValueError(f"{l.name}: weight shape {w.shape} != {expect}")
            elif l.kind == G.FC:
                w = self.weights[l.name]
                if w.shape != (l.out_ch, l.in_ch):
                    raise ValueError(f"{l.name}: weight shape {w.shape} != {(l.out_ch, l.in_ch)}")
            elif l.kind == G.REQUANT:
                if l.name not in self.bn:
                    raise ValueError(f"{l.name}: missing batch-norm record")
        return self


def random_float_net(g: G.NetGraph, seed: int = 0) -> FloatNet:
    """He-style fan-in scaled weights and mildly varied batch-norm stats.

    The positive beta floor keeps every activation stage alive so that the
    net is calibratable without training.
    """
    rng = np.random.default_rng(seed)
    net = FloatNet(graph=g)
    for l in g.layers:
        if l.kind == G.CONV:
            fan_in = l.in_ch * l.kernel[0] * l.kernel[1]
            net.weights[l.name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), (l.out_ch, l.in_ch, *l.kernel))
        elif l.kind == G.FC:
            net.weights[l.name] = rng.normal(0.0, np.sqrt(2.0 / l.in_ch), (l.out_ch, l.in_ch))
        elif l.kind == G.REQUANT:
            ch = l.out_ch
            net.bn[l.name] = BatchNorm(
                gamma=rng.uniform(0.7, 1.3, ch),
                beta=rng.uniform(0.05, 0.3, ch),
                mean=rng.normal(0.0, 0.2, ch),
                var=rng.uniform(0.5, 1.5, ch),
            )
    return net.validate()


def snap_weights_to_grid(w: np.ndarray) -> np.ndarray:
    """Move weights onto their own 127-step quantization grid.

    Deployment decomposes weights losslessly when they already sit on the
    per-layer grid, which is where fake-quantized fine-tuning leaves them.
    The code extremes are pinned so the grid is a fixed point of the
    zero-extended range computation.
    """
    from .qtensor import weight_eps

    eps = weight_eps(min(float(w.min()), 0.0), max(float(w.max()), 0.0))
    base = int(np.floor(min(float(w.min()), 0.0) / eps + 1e-9))
    codes = np.clip(np.round(w / eps), base, base + 127)
    codes.flat[int(np.argmin(codes))] = base
    codes.flat[int(np.argmax(codes))] = base + 127
    return eps * codes


def realistic_random_net(g: G.NetGraph, seed: int = 0, n_probe: int = 8,
                         fc_scale: float = 1.0) -> FloatNet:
    """Random net with the statistics a trained, deployment-ready one has.

    Batch-norm mean/var are set from the moments the conv outputs actually
    take on a probe batch (keeping stage gains near one), the head is
    rescaled to pose-like magnitudes, and all weights are snapped onto
    their quantization grid so decomposition is exact.
    """
    from . import engine  # deferred: engine imports this module

    rng = np.random.default_rng(seed)
    net = random_float_net(g, seed=seed)
    for bn in net.bn.values():
        bn.gamma = rng.uniform(0.9, 1.1, bn.gamma.shape)
        bn.beta = rng.uniform(0.05, 0.3, bn.beta.shape)
    probe = [rng.integers(0, 256, g.input_shape).astype(np.float64) / 255.0
             for _ in range(n_probe)]
    per_layer = {name: [] for name in net.bn}
    for img in probe:
        _, pre = engine.infer_float(net, img, collect="prebn")
        for name, arr in pre.items():
            per_layer[name].append(arr)
    for name, chunks in per_layer.items():
        stacked = np.concatenate([a.reshape(a.shape[0], -1) for a in chunks], axis=1)
        net.bn[name].mean = stacked.mean(axis=1)
        net.bn[name].var = np.maximum(stacked.var(axis=1), 1e-3)
    fc = [l for l in g.layers if l.kind == G.FC][-1]
    poses = np.stack([engine.infer_float(net, img)[0] for img in probe])
    rms = float(np.sqrt((poses**2).mean()))
    if rms > 0:
        net.weights[fc.name] = net.weights[fc.name] * (fc_scale / rms)
    for name in net.weights:
        net.weights[name] = snap_weights_to_grid(net.weights[name])
    return net.validate()
