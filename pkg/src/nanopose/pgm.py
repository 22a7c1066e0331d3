"""Binary PGM (P5, maxval 255) image I/O for grayscale frames."""

import numpy as np

from .errors import SchemaError


def write_pgm(path, img: np.ndarray, comment: str = None) -> None:
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise SchemaError(f"PGM wants a 2-D uint8 array, got {img.dtype} {img.shape}")
    h, w = img.shape
    header = b"P5\n"
    if comment:
        for line in comment.splitlines():
            header += b"# " + line.encode() + b"\n"
    header += f"{w} {h}\n255\n".encode()
    with open(path, "wb") as f:
        f.write(header + img.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if not raw.startswith(b"P5"):
        raise SchemaError(f"{path}: not a binary PGM (P5) file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    try:
        w, h, maxval = (int(v) for v in fields)
    except ValueError as e:
        raise SchemaError(f"{path}: malformed PGM header") from e
    if maxval != 255:
        raise SchemaError(f"{path}: only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace after maxval
    data = np.frombuffer(raw, dtype=np.uint8, count=h * w, offset=pos)
    if data.size != h * w:
        raise SchemaError(f"{path}: truncated payload")
    return data.reshape(h, w).copy()
