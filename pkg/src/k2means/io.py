"""Matrix files, random projection and synthetic Gaussian mixtures.

The ``.k2mx`` layout is a 25-byte little-endian header followed by the
row-major payload::

    magic    4s   b"K2MX"
    version  u32  1
    n        u64
    d        u64
    dtype    u8   1 = float32, 2 = float64
"""

from __future__ import annotations

import csv
import os
import struct
import tempfile
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from .core import Dataset, FormatError, ValidationError, as_points

MAGIC = b"K2MX"
VERSION = 1
HEADER = struct.Struct("<4sIQQB")
DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


def atomic_write(path, data: bytes) -> None:
    """Write ``data`` to a sibling temp file, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _check_finite(arr: np.ndarray) -> None:
    bad = np.argwhere(~np.isfinite(arr))
    if len(bad):
        r, c = bad[0]
        raise ValidationError(f"non-finite value at ({r},{c})")


def encode_k2mx(points, dtype_code: int = 2) -> bytes:
    arr = np.asarray(points)
    if arr.ndim != 2:
        raise ValidationError("expected a 2-D matrix")
    if dtype_code not in DTYPES:
        raise ValidationError(f"unknown dtype code {dtype_code}")
    _check_finite(arr)
    n, d = arr.shape
    payload = np.ascontiguousarray(arr, dtype=DTYPES[dtype_code]).tobytes()
    return HEADER.pack(MAGIC, VERSION, n, d, dtype_code) + payload


def decode_k2mx(raw: bytes) -> np.ndarray:
    if len(raw) < HEADER.size:
        raise FormatError("file too short for a K2MX header")
    magic, version, n, d, code = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if code not in DTYPES:
        raise FormatError(f"unknown dtype code {code}")
    dt = DTYPES[code]
    expected = n * d * dt.itemsize
    if len(raw) - HEADER.size != expected:
        raise FormatError(f"payload is {len(raw) - HEADER.size} bytes, expected {expected}")
    arr = np.frombuffer(raw, dtype=dt, offset=HEADER.size).reshape(n, d)
    _check_finite(arr)
    return arr.astype(np.float64)


def _read_csv(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, newline="") as fh:
        for r, rec in enumerate(csv.reader(fh)):
            if not rec or all(not f.strip() for f in rec):
                continue
            if width is None:
                width = len(rec)
            elif len(rec) != width:
                raise ValidationError(f"ragged CSV: row {r} has {len(rec)} fields, expected {width}")
            try:
                rows.append([float(f) for f in rec])
            except ValueError as exc:
                raise ValidationError(f"row {r}: {exc}") from None
    if not rows:
        raise ValidationError("empty CSV")
    arr = np.array(rows, dtype=np.float64)
    _check_finite(arr)
    return arr


def load_matrix(path) -> Dataset:
    """Load a ``.k2mx`` or ``.csv`` file as a float64 ``Dataset``."""
    path = Path(path)
    ext = path.suffix.lower()
    if ext == ".k2mx":
        return Dataset(decode_k2mx(path.read_bytes()))
    if ext == ".csv":
        return Dataset(_read_csv(path))
    raise FormatError(f"unsupported extension {ext!r} (use .k2mx or .csv)")


def save_matrix(path, points, dtype_code: int = 2) -> None:
    path = Path(path)
    ext = path.suffix.lower()
    if ext == ".k2mx":
        atomic_write(path, encode_k2mx(points, dtype_code))
    elif ext == ".csv":
        arr = np.asarray(points, dtype=np.float64)
        _check_finite(arr)
        text = "".join(",".join(repr(float(v)) for v in row) + "\n" for row in arr)
        atomic_write(path, text.encode())
    else:
        raise FormatError(f"unsupported extension {ext!r} (use .k2mx or .csv)")


def random_project(data, target_d: int, rng_seed: int = 0, identity: bool = False) -> Dataset:
    """Project onto ``target_d`` dims with i.i.d. N(0, 1/target_d) weights."""
    X = as_points(data)
    d = X.shape[1]
    if target_d < 1 or target_d > d:
        raise ValidationError(f"target_d must be in [1, {d}], got {target_d}")
    if identity:
        if target_d != d:
            raise ValidationError("identity projection needs target_d == d")
        return Dataset(X.copy())
    rng = np.random.default_rng(rng_seed)
    G = rng.normal(0.0, 1.0 / np.sqrt(target_d), size=(d, target_d))
    return Dataset(X @ G)


def gen_gmm(n: int, d: int, k_true: int, separation: float, rng_seed: int = 0,
            mean_dim: int = None):
    """Unit-variance Gaussian blobs, points dealt round-robin to the blobs.

    Blob means are Gaussian, drawn inside a random ``mean_dim``-dimensional
    subspace when given (full space otherwise), then rescaled so the closest
    pair of means is ``separation`` apart. Returns ``(Dataset, labels)``.
    """
    if k_true < 1 or n < k_true:
        raise ValidationError("need n >= k_true >= 1")
    if d < 1:
        raise ValidationError("d must be >= 1")
    if separation < 0:
        raise ValidationError("separation must be >= 0")
    if mean_dim is not None and not 1 <= mean_dim <= d:
        raise ValidationError(f"mean_dim must be in [1, {d}]")
    rng = np.random.default_rng(rng_seed)
    if mean_dim is None or mean_dim == d:
        means = rng.normal(size=(k_true, d))
    else:
        basis = np.linalg.qr(rng.normal(size=(d, mean_dim)))[0]
        means = rng.normal(size=(k_true, mean_dim)) @ basis.T
    if k_true > 1:
        closest = pdist(means).min()
        # nudge up so rounding never leaves a pair below the separation
        means *= separation / closest * (1.0 + 1e-12)
    else:
        means[:] = 0.0
    labels = np.arange(n) % k_true
    points = means[labels] + rng.normal(size=(n, d))
    return Dataset(points), labels
