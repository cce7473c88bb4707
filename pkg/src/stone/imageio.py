"""Grayscale image file I/O: binary PGM and raw float32/float64.

Intensities are kept in [0, 1] internally.  PGM files (P5, 8 or 16 bit)
are the interchange format; the raw format is a bare little-endian float
array next to a JSON sidecar {"side": N, "dtype": ...} and is lossless.
All writes go through a temp file plus rename so interrupted runs never
leave half-written files.
"""

import json
import os
import tempfile

import numpy as np

from .errors import DimensionError


def atomic_write_bytes(path, data):
    """Write bytes to path via a same-directory temp file and rename."""
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_pgm_tokens(data, count):
    # header tokens separated by whitespace; '#' starts a comment to EOL
    tokens = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise DimensionError("truncated PGM header")
        c = data[i : i + 1]
        if c == b"#":
            j = data.find(b"\n", i)
            i = len(data) if j < 0 else j + 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    return tokens, i + 1  # single whitespace after maxval precedes pixel data


def read_pgm(path):
    """Read a binary PGM into a float array scaled to [0, 1]."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise DimensionError(f"{path}: not a binary PGM (P5) file")
    tokens, offset = _parse_pgm_tokens(data, 4)
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval <= 0 or maxval > 65535:
        raise DimensionError(f"{path}: unsupported maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.uint8
    pixels = np.frombuffer(data, dtype=dtype, count=width * height, offset=offset)
    if pixels.size != width * height:
        raise DimensionError(f"{path}: truncated pixel data")
    return pixels.reshape(height, width).astype(np.float64) / maxval


def write_pgm(path, img, bits=8):
    """Write a [0, 1] float image as binary PGM; values are clipped."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError("PGM output requires a 2-D image")
    if bits not in (8, 16):
        raise DimensionError(f"bits must be 8 or 16, got {bits}")
    maxval = (1 << bits) - 1
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval)
    raw = q.astype(np.uint8 if bits == 8 else ">u2").tobytes()
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode()
    atomic_write_bytes(path, header + raw)


def _sidecar_path(path):
    return os.fspath(path) + ".json"


def write_raw(path, array, side, dtype="<f4"):
    """Write a raw little-endian float file with its JSON sidecar."""
    arr = np.asarray(array).astype(dtype)
    atomic_write_bytes(path, arr.tobytes())
    meta = json.dumps({"side": int(side), "dtype": np.dtype(dtype).str}) + "\n"
    atomic_write_bytes(_sidecar_path(path), meta.encode())


def read_raw(path):
    """Read a raw float file; returns (flat array as float64, side)."""
    with open(_sidecar_path(path)) as f:
        meta = json.load(f)
    side = int(meta["side"])
    dtype = np.dtype(meta.get("dtype", "<f4"))
    with open(path, "rb") as f:
        arr = np.frombuffer(f.read(), dtype=dtype).astype(np.float64)
    return arr, side


def read_image(path):
    """Read a square image from PGM or raw format based on extension."""
    path = os.fspath(path)
    if path.endswith(".pgm"):
        img = read_pgm(path)
        if img.shape[0] != img.shape[1]:
            raise DimensionError(f"{path}: image is not square {img.shape}")
        return img
    arr, side = read_raw(path)
    if arr.size != side * side:
        raise DimensionError(f"{path}: raw size {arr.size} != side^2 ({side})")
    return arr.reshape(side, side)


def write_image(path, img, bits=8):
    """Write a square image as PGM or raw format based on extension.

    A ".f64" extension stores lossless float64; other raw paths use
    float32.
    """
    path = os.fspath(path)
    img = np.asarray(img, dtype=np.float64)
    if path.endswith(".pgm"):
        write_pgm(path, img, bits=bits)
    else:
        dtype = "<f8" if path.endswith(".f64") else "<f4"
        write_raw(path, img.ravel(), side=img.shape[0], dtype=dtype)
