"""Bit-exact integer inference executor and the float reference executor.

The integer path runs convolutions over 8-bit activation codes and signed
8-bit weight codes with 32-bit accumulators, requantizes through the fused
per-channel integer affine, and leaves the head output as raw 32-bit fixed
point.  Work may be split across threads by output row chunks; chunk
ownership is disjoint and integer addition is associative, so the result is
identical for every worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import graph as G
from .errors import AccumulatorOverflowError, SchemaError
from .floatnet import FloatNet
from .qtensor import (
    QTensor,
    QuantParams,
    accumulator_qparams,
    act_qparams,
    full_weight_codes,
    int_affine_requant,
)

IMAGE_EPS = 1.0 / 255.0


def image_qparams() -> QuantParams:
    return QuantParams(eps=IMAGE_EPS, levels=256, signed=False)


@dataclass
class InferenceResult:
    raw: np.ndarray          # four int32 fixed-point values
    pose: np.ndarray         # dequantized (x, y, z, theta), meters/radians
    activations: dict = None  # optional per-layer QTensor snapshots


def _acc_range_check(acc: np.ndarray, limit_bits: int):
    lo, hi = -(2 ** (limit_bits - 1)), 2 ** (limit_bits - 1) - 1
    if acc.size and (acc.min() < lo or acc.max() > hi):
        raise AccumulatorOverflowError(
            f"accumulator range [{acc.min()}, {acc.max()}] exceeds {limit_bits}-bit"
        )


def _conv_rows(padded: np.ndarray, wmat: np.ndarray, kernel, stride, r0, r1, ow):
    """Accumulate output rows [r0, r1) from the padded input (int64)."""
    kh, kw = kernel
    sh, sw = stride
    sub = padded[:, r0 * sh : (r1 - 1) * sh + kh, :]
    win = np.lib.stride_tricks.sliding_window_view(sub, (kh, kw), axis=(1, 2))
    win = win[:, ::sh, ::sw]                       # (C, rows, ow, kh, kw)
    rows = win.shape[1]
    patches = win.transpose(1, 2, 0, 3, 4).reshape(rows * ow, -1)
    return wmat @ patches.T                         # (out_ch, rows*ow)


def conv2d_int(x: np.ndarray, w_codes: np.ndarray, stride, padding, n_workers: int = 1,
               acc_bits: int = 32) -> np.ndarray:
    """Direct integer convolution; returns int32 accumulators (C_out, H, W)."""
    c, h, wdt = x.shape
    oc, ic, kh, kw = w_codes.shape
    ph, pw = padding
    oh, ow = G.conv_out_hw(h, wdt, (kh, kw), stride, padding)
    padded = np.zeros((c, h + 2 * ph, wdt + 2 * pw), dtype=np.int64)
    padded[:, ph : ph + h, pw : pw + wdt] = x
    wmat = w_codes.reshape(oc, -1).astype(np.int64)

    out = np.empty((oc, oh, ow), dtype=np.int64)
    if n_workers <= 1 or oh < 2 * n_workers:
        out[:] = _conv_rows(padded, wmat, (kh, kw), stride, 0, oh, ow).reshape(oc, oh, ow)
    else:
        bounds = np.linspace(0, oh, n_workers + 1, dtype=int)
        chunks = [(r0, r1) for r0, r1 in zip(bounds[:-1], bounds[1:]) if r1 > r0]
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            futs = [
                pool.submit(_conv_rows, padded, wmat, (kh, kw), stride, r0, r1, ow)
                for r0, r1 in chunks
            ]
            for (r0, r1), fut in zip(chunks, futs):
                out[:, r0:r1, :] = fut.result().reshape(oc, r1 - r0, ow)
    _acc_range_check(out, acc_bits)
    return out.astype(np.int32)


def maxpool2x2(x: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    h2, w2 = h - h % 2, w - w % 2
    v = x[:, :h2, :w2].reshape(c, h2 // 2, 2, w2 // 2, 2)
    return v.max(axis=(2, 4))


def infer_int(qg, image: QTensor, n_workers: int = 1, record_activations: bool = False,
              acc_bits: int = 32) -> InferenceResult:
    """Run the quantized graph entirely in the integer domain."""
    g = qg.graph
    if tuple(image.shape) != tuple(g.input_shape):
        raise SchemaError(f"image shape {image.shape} != graph input {tuple(g.input_shape)}")
    acts = {} if record_activations else None
    x = image.data.astype(np.int64)
    eps = image.qp.eps
    raw = None
    for l in g.layers:
        if l.kind == G.CONV:
            codes = full_weight_codes(qg.weights[l.name]).astype(np.int64)
            codes = codes.reshape(l.out_ch, l.in_ch, *l.kernel)
            x = conv2d_int(x, codes, l.stride, l.padding, n_workers=n_workers, acc_bits=acc_bits)
            eps = qg.acc_eps[l.name]
            snapshot_qp = accumulator_qparams(eps)
        elif l.kind == G.REQUANT:
            rp = qg.requant[l.name]
            qt = int_affine_requant(
                QTensor(np.asarray(x, dtype=np.int32), accumulator_qparams(eps)),
                rp.mult, rp.shift, rp.bias, out_qp=act_qparams(rp.alpha),
            )
            x, eps = qt.data, qt.qp.eps
            snapshot_qp = qt.qp
        elif l.kind == G.POOL:
            x = maxpool2x2(x)
            snapshot_qp = QuantParams(eps, 256, False)
        elif l.kind == G.DROPOUT:
            continue
        elif l.kind == G.FC:
            codes = full_weight_codes(qg.weights[l.name]).astype(np.int64)
            flat = x.reshape(-1).astype(np.int64)
            acc = codes @ flat
            _acc_range_check(acc, acc_bits)
            raw = acc.astype(np.int32)
            snapshot_qp = accumulator_qparams(float(qg.out_eps[0]))
            x = raw
        if record_activations:
            arr = np.asarray(x)
            dtype = np.int32 if l.kind in (G.CONV, G.FC) else np.uint8
            acts[l.name] = QTensor(arr.astype(dtype), snapshot_qp)
    if raw is None:
        raise SchemaError("graph has no fully connected head")
    pose = qg.out_eps * raw.astype(np.float64)
    return InferenceResult(raw=raw, pose=pose, activations=acts)


def conv2d_float(x: np.ndarray, w: np.ndarray, stride, padding) -> np.ndarray:
    c, h, wdt = x.shape
    oc, ic, kh, kw = w.shape
    ph, pw = padding
    oh, ow = G.conv_out_hw(h, wdt, (kh, kw), stride, padding)
    padded = np.zeros((c, h + 2 * ph, wdt + 2 * pw), dtype=np.float64)
    padded[:, ph : ph + h, pw : pw + wdt] = x
    win = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(1, 2))
    win = win[:, :: stride[0], :: stride[1]]
    patches = win.transpose(1, 2, 0, 3, 4).reshape(oh * ow, -1)
    return (w.reshape(oc, -1) @ patches.T).reshape(oc, oh, ow)


def infer_float(net: FloatNet, image: np.ndarray, collect: str = "none"):
    """Float reference forward pass with the same layer semantics.

    collect="relu_max" returns (pose, {requant layer -> max ReLU output});
    collect="acts" returns (pose, {layer -> activation array});
    collect="prebn" returns (pose, {requant layer -> pre-normalization conv output}).
    """
    g = net.graph
    if tuple(image.shape) != tuple(g.input_shape):
        raise SchemaError(f"image shape {image.shape} != graph input {tuple(g.input_shape)}")
    x = np.asarray(image, dtype=np.float64)
    collected = {}
    pose = None
    for l in g.layers:
        if l.kind == G.CONV:
            x = conv2d_float(x, net.weights[l.name], l.stride, l.padding)
        elif l.kind == G.REQUANT:
            if collect == "prebn":
                collected[l.name] = np.array(x)
            bn = net.bn[l.name]
            sig = bn.sigma()
            x = bn.gamma[:, None, None] * (x - bn.mean[:, None, None]) / sig[:, None, None]
            x = np.maximum(x + bn.beta[:, None, None], 0.0)
            if collect == "relu_max":
                collected[l.name] = float(x.max())
        elif l.kind == G.POOL:
            x = maxpool2x2(x)
        elif l.kind == G.DROPOUT:
            continue
        elif l.kind == G.FC:
            pose = net.weights[l.name] @ x.reshape(-1)
            x = pose
        if collect == "acts":
            collected[l.name] = np.array(x)
    if pose is None:
        raise SchemaError("graph has no fully connected head")
    return (pose, collected) if collect != "none" else (pose, None)


def downscale2x(img: np.ndarray) -> np.ndarray:
    """Exact 2x bilinear reduction of a u8 image.

    Sampling at pixel centers makes each output the mean of a 2x2 block;
    with 8.8 fixed-point weights (64/256 each) that is
    (a + b + c + d + 128 * 4/256) >> 2, identical on every platform.
    """
    h, w = img.shape
    v = img[: h - h % 2, : w - w % 2].astype(np.uint32)
    s = v[0::2, 0::2] + v[0::2, 1::2] + v[1::2, 0::2] + v[1::2, 1::2]
    return ((s + 2) >> 2).astype(np.uint8)


def crop_center(frame: np.ndarray, target: tuple) -> QTensor:
    """Center-crop a camera frame to the network input, as a u8 QTensor.

    When the doubled target still fits the frame (the half-resolution
    input), the crop keeps the full-size field of view and is then reduced
    2x with exact fixed-point bilinear weights.
    """
    th, tw = target
    h, w = frame.shape
    if th > h or tw > w:
        raise SchemaError(f"target {target} larger than frame {frame.shape}")
    if 2 * th <= h and 2 * tw <= w:
        ch, cw = 2 * th, 2 * tw
        r0, c0 = (h - ch) // 2, (w - cw) // 2
        img = downscale2x(frame[r0 : r0 + ch, c0 : c0 + cw])
    else:
        r0, c0 = (h - th) // 2, (w - tw) // 2
        img = frame[r0 : r0 + th, c0 : c0 + tw]
    return QTensor(img.reshape(1, th, tw).astype(np.uint8), image_qparams())
