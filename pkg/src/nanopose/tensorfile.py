"""QTNS binary tensor files.

Layout (all little-endian):

    magic   4 bytes  b"QTNS"
    dtype   u8       0=u8, 1=i8, 2=i32, 3=f32
    rank    u8
    dims    rank * u32
    payload raw row-major element data
    trailer f64 eps, i32 zero_base

The format is bit-exact across platforms; float tensors carry eps=1.0 and
zero_base=0 in the trailer.
"""

import struct

import numpy as np

from .errors import SchemaError
from .qtensor import QTensor, QuantParams

MAGIC = b"QTNS"

_CODE_TO_DTYPE = {0: np.uint8, 1: np.int8, 2: np.int32, 3: np.float32}
_DTYPE_TO_CODE = {np.dtype(v): k for k, v in _CODE_TO_DTYPE.items()}

# i8 payloads hold decomposed weight offsets in [0, 127]; the base point
# travels in the zero_base trailer field (see qtensor.decompose_weights).
_QP_FOR_CODE = {
    0: dict(levels=256, signed=False),
    1: dict(levels=128, signed=False),
    2: dict(levels=2**32, signed=True),
}


def write_tensor(path, data: np.ndarray, eps: float = 1.0, zero_base: int = 0) -> None:
    data = np.ascontiguousarray(data)
    dt = np.dtype(data.dtype).newbyteorder("<")
    if np.dtype(data.dtype) not in _DTYPE_TO_CODE:
        raise SchemaError(f"unsupported dtype {data.dtype} for QTNS")
    code = _DTYPE_TO_CODE[np.dtype(data.dtype)]
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<BB", code, data.ndim))
        f.write(struct.pack(f"<{data.ndim}I", *data.shape))
        f.write(data.astype(dt, copy=False).tobytes())
        f.write(struct.pack("<di", float(eps), int(zero_base)))


def read_tensor(path):
    """Read a QTNS file; returns (array, eps, zero_base)."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MAGIC:
        raise SchemaError(f"{path}: bad magic {raw[:4]!r}")
    code, rank = struct.unpack_from("<BB", raw, 4)
    if code not in _CODE_TO_DTYPE:
        raise SchemaError(f"{path}: unknown dtype code {code}")
    dims = struct.unpack_from(f"<{rank}I", raw, 6)
    dtype = np.dtype(_CODE_TO_DTYPE[code]).newbyteorder("<")
    start = 6 + 4 * rank
    count = int(np.prod(dims)) if rank else 1
    nbytes = count * dtype.itemsize
    if len(raw) != start + nbytes + 12:
        raise SchemaError(f"{path}: size mismatch (got {len(raw)}, expected {start + nbytes + 12})")
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=start).reshape(dims)
    eps, zero_base = struct.unpack_from("<di", raw, start + nbytes)
    return data.astype(_CODE_TO_DTYPE[code]), eps, zero_base


def write_qtensor(path, qt: QTensor) -> None:
    write_tensor(path, qt.data, eps=qt.qp.eps, zero_base=qt.qp.zero_base)


def read_qtensor(path) -> QTensor:
    data, eps, zero_base = read_tensor(path)
    code = _DTYPE_TO_CODE[np.dtype(data.dtype)]
    if code == 3:
        raise SchemaError(f"{path}: float payload is not a quantized tensor")
    qp = QuantParams(eps=eps, zero_base=zero_base, **_QP_FOR_CODE[code])
    return QTensor(data=data, qp=qp)
