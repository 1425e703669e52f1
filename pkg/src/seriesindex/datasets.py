"""Dataset files, synthetic workloads and the brute-force oracle.

File layout: a 16-byte header (``b"FRSH"``, then little-endian u32 version,
series length and series count) followed by ``count * n`` little-endian
float32 values. Headerless files of raw float32 values are read with
``raw=True`` and an explicit length.
"""

import struct
from pathlib import Path

import numpy as np

__all__ = [
    "MAGIC",
    "brute_force_nn",
    "generate_dataset",
    "generate_queries",
    "random_walks",
    "read_series",
    "write_series",
]

MAGIC = b"FRSH"
VERSION = 1
HEADER = struct.Struct("<4sIII")
_BATCH = 4096


def write_series(path, X):
    X = np.ascontiguousarray(X, dtype="<f4")
    if X.ndim != 2:
        raise ValueError("expected a 2-D array of series")
    count, n = X.shape
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, n, count))
        fh.write(X.tobytes())
    return Path(path)


def read_series(path, *, raw=False, n=None, mmap=True):
    """Series stored in ``path`` as a (count, n) float32 array."""
    path = Path(path)
    size = path.stat().st_size
    if raw:
        if not n:
            raise ValueError("headerless files need the series length")
        if size % (4 * n):
            raise ValueError(f"{path}: size {size} is not a multiple of {4 * n}")
        offset, count = 0, size // (4 * n)
    else:
        with open(path, "rb") as fh:
            head = fh.read(HEADER.size)
        if len(head) < HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, file_n, count = HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a series file (use raw=True for headerless data)")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        if n is not None and n != file_n:
            raise ValueError(f"{path}: series length {file_n}, expected {n}")
        n = file_n
        offset = HEADER.size
        if size != offset + 4 * n * count:
            raise ValueError(f"{path}: size does not match header")
    if count == 0:
        return np.empty((0, n), dtype=np.float32)
    if mmap:
        return np.memmap(path, dtype="<f4", mode="r", offset=offset, shape=(count, n))
    data = np.fromfile(path, dtype="<f4", offset=offset)
    return data.reshape(count, n)


def _znorm(X):
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=1, keepdims=True)
    std = X.std(axis=1, keepdims=True)
    std[std == 0] = 1.0
    return (X - mean) / std


def random_walks(count, n, seed):
    """z-normalised Gaussian random walks as float32.

    Steps come from ``numpy.random.default_rng(seed)`` in batches of 4096
    series, so the output depends only on (count, n, seed).
    """
    if count < 0 or n <= 0:
        raise ValueError("count must be >= 0 and n > 0")
    rng = np.random.default_rng(seed)
    out = np.empty((count, n), dtype=np.float32)
    for start in range(0, count, _BATCH):
        stop = min(start + _BATCH, count)
        steps = rng.standard_normal((stop - start, n))
        out[start:stop] = _znorm(np.cumsum(steps, axis=1))
    return out


def generate_dataset(path, count, n, seed):
    if count <= 0:
        raise ValueError("count must be positive")
    return write_series(path, random_walks(count, n, seed))


def generate_queries(data, count, sigma, seed, *, kind="noisy"):
    """Query workload as float32.

    ``kind="noisy"``: uniformly chosen dataset series plus N(0, sigma**2)
    noise per point, re-normalised (sigma = 0 gives exact copies).
    ``kind="walk"``: fresh random walks independent of the dataset.
    """
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma must be in [0, 1], got {sigma}")
    if kind == "walk":
        n = data.shape[1] if hasattr(data, "shape") else int(data)
        return random_walks(count, n, seed)
    if kind != "noisy":
        raise ValueError(f"unknown query kind {kind!r}")
    if len(data) == 0:
        raise ValueError("cannot draw queries from an empty dataset")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(data), size=count)
    base = np.asarray(data[picks], dtype=np.float64)
    if sigma == 0.0:
        return base.astype(np.float32)
    noisy = base + rng.normal(0.0, sigma, size=base.shape)
    return _znorm(noisy).astype(np.float32)


def brute_force_nn(data, query, *, batch=65536):
    """Exact 1-NN by linear scan in float64; ties go to the lowest index."""
    q = np.asarray(query, dtype=np.float64)
    if len(data) == 0:
        raise ValueError("empty dataset")
    best, best_i = np.inf, -1
    for start in range(0, len(data), batch):
        block = np.asarray(data[start : start + batch], dtype=np.float64)
        diff = block - q
        d = np.einsum("ij,ij->i", diff, diff)
        i = int(np.argmin(d))
        if d[i] < best:
            best, best_i = float(d[i]), start + i
    return best_i, float(np.sqrt(best))
