"""PAA / iSAX summaries, breakpoints and distances.

Everything here is a pure function of its inputs. Distances are squared
throughout; callers take a square root only when reporting.

Symbols are stored at full cardinality (``max_bits`` bits per segment).
Because the breakpoint tables are nested, the symbol of the same value at
``b`` bits is the full-cardinality symbol shifted right by ``max_bits - b``.
"""

import warnings
from typing import NamedTuple

import numpy as np
from scipy.stats import norm

__all__ = [
    "BreakpointTable",
    "ISAXWord",
    "QueryBounds",
    "check_normalized",
    "compute_isax",
    "compute_paa",
    "euclidean_distance_sq",
    "isax_symbols",
    "mindist_sq",
    "root_buffer_index",
    "root_indices",
]

DEFAULT_MAX_BITS = 8


class ISAXWord(NamedTuple):
    """Per-segment region symbols with their per-segment bit counts."""

    symbols: tuple
    bits: tuple

    def coarsen(self, segment, bits):
        """Word with ``segment`` reduced to ``bits`` bits."""
        drop = self.bits[segment] - bits
        if drop < 0:
            raise ValueError("cannot refine a word by coarsening")
        symbols = list(self.symbols)
        symbols[segment] >>= drop
        new_bits = list(self.bits)
        new_bits[segment] = bits
        return ISAXWord(tuple(symbols), tuple(new_bits))

    def __str__(self):
        return " ".join(
            format(s, f"0{b}b") + f"_{b}" for s, b in zip(self.symbols, self.bits)
        )


class BreakpointTable:
    """Equiprobable N(0, 1) thresholds for 1..max_bits bits per segment.

    The table for ``b`` bits is taken by striding through the full-cardinality
    table, so nesting holds exactly rather than up to rounding.
    """

    def __init__(self, max_bits=DEFAULT_MAX_BITS):
        if not 1 <= max_bits <= 16:
            raise ValueError(f"max_bits must be in [1, 16], got {max_bits}")
        self.max_bits = max_bits
        size = 1 << max_bits
        self.full = norm.ppf(np.arange(1, size) / size)
        self._tables = {}
        for b in range(1, max_bits + 1):
            step = 1 << (max_bits - b)
            self._tables[b] = self.full[step - 1 :: step]
        # region edges per full-cardinality symbol
        self.lower = np.concatenate(([-np.inf], self.full))
        self.upper = np.concatenate((self.full, [np.inf]))

    def thresholds(self, bits):
        try:
            return self._tables[bits]
        except KeyError:
            raise ValueError(
                f"bit count {bits} outside 1..{self.max_bits}"
            ) from None

    def region(self, bits, symbol):
        """(lower, upper) edges of region ``symbol`` at ``bits`` bits."""
        t = self.thresholds(bits)
        if not 0 <= symbol < (1 << bits):
            raise ValueError(f"symbol {symbol} invalid at {bits} bits")
        lo = -np.inf if symbol == 0 else t[symbol - 1]
        hi = np.inf if symbol == len(t) else t[symbol]
        return lo, hi


def compute_paa(series, segments):
    """Per-segment means; works on one series or a 2-D batch (rows)."""
    x = np.asarray(series)
    n = x.shape[-1]
    if segments <= 0 or n % segments:
        raise ValueError(
            f"series length {n} is not a positive multiple of {segments} segments"
        )
    return x.reshape(x.shape[:-1] + (segments, n // segments)).mean(
        axis=-1, dtype=np.float64
    )


def isax_symbols(paa, table):
    """Full-cardinality symbols (uint8/uint16) for PAA values of any shape.

    A value equal to a threshold falls in the region above it.
    """
    sym = np.searchsorted(table.full, paa, side="right")
    return sym.astype(np.uint8 if table.max_bits <= 8 else np.uint16)


def compute_isax(paa, bits, table):
    """iSAX word of a single PAA vector at the given per-segment bit counts."""
    paa = np.asarray(paa, dtype=np.float64)
    if np.isscalar(bits) or np.ndim(bits) == 0:
        bits = (int(bits),) * len(paa)
    if len(bits) != len(paa):
        raise ValueError("need one bit count per segment")
    symbols = []
    for value, b in zip(paa, bits):
        t = table.thresholds(int(b))
        symbols.append(int(np.searchsorted(t, value, side="right")))
    return ISAXWord(tuple(symbols), tuple(int(b) for b in bits))


def euclidean_distance_sq(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.dot(d, d))


def mindist_sq(query_paa, node, n, table):
    """Squared iSAX lower bound between a query PAA and a word.

    Distance from each PAA value to the nearest edge of its segment's region
    (zero inside), summed squared and scaled by n / w.
    """
    q = np.asarray(query_paa, dtype=np.float64)
    w = len(q)
    if len(node.symbols) != w:
        raise ValueError("word and PAA have different segment counts")
    total = 0.0
    for value, symbol, bits in zip(q, node.symbols, node.bits):
        lo, hi = table.region(bits, symbol)
        if value < lo:
            total += (lo - value) ** 2
        elif value > hi:
            total += (value - hi) ** 2
    return (n / w) * total


def root_buffer_index(word):
    """Concatenate the leading bit of every segment, first segment highest."""
    index = 0
    for symbol, bits in zip(word.symbols, word.bits):
        if bits < 1:
            raise ValueError("every segment needs at least one bit")
        index = (index << 1) | ((symbol >> (bits - 1)) & 1)
    return index


def root_indices(symbols, max_bits):
    """Vectorised ``root_buffer_index`` for full-cardinality symbol rows."""
    symbols = np.asarray(symbols)
    w = symbols.shape[-1]
    lead = (symbols >> (max_bits - 1)).astype(np.int64) & 1
    weights = 1 << np.arange(w - 1, -1, -1, dtype=np.int64)
    return lead @ weights


class QueryBounds:
    """Lookup table of per-segment squared lower-bound terms for one query.

    ``table[s, offset(b) + sym]`` holds the squared distance from the query's
    PAA value on segment ``s`` to region ``sym`` at ``b`` bits, where
    ``offset(b) = 2**b - 2``. Node bounds become ``w`` table lookups and
    full-cardinality series bounds one fancy-indexing gather.
    """

    def __init__(self, query_paa, n, table):
        q = np.asarray(query_paa, dtype=np.float64)
        self.paa = q
        self.segments = w = len(q)
        self.scale = n / w
        self.max_bits = table.max_bits
        parts = []
        for b in range(1, table.max_bits + 1):
            t = table.thresholds(b)
            lo = np.concatenate(([-np.inf], t))
            hi = np.concatenate((t, [np.inf]))
            below = np.clip(lo[None, :] - q[:, None], 0.0, None)
            above = np.clip(q[:, None] - hi[None, :], 0.0, None)
            parts.append(below**2 + above**2)
        self.table = np.concatenate(parts, axis=1)
        full_off = (1 << table.max_bits) - 2
        self.full = self.table[:, full_off:]
        self._rows = self.table.tolist()
        self._seg = np.arange(w)

    @staticmethod
    def offsets(word):
        """Column offsets of a word's symbols, cached on tree nodes."""
        return tuple(((1 << b) - 2) + s for s, b in zip(word.symbols, word.bits))

    def node(self, offsets):
        rows = self._rows
        total = 0.0
        for s, col in enumerate(offsets):
            total += rows[s][col]
        return self.scale * total

    def word(self, word):
        return self.node(self.offsets(word))

    def series(self, symbols):
        """Bounds for a batch of full-cardinality symbol rows."""
        return self.scale * self.full[self._seg, symbols].sum(axis=1)


def check_normalized(X, *, mean_tol=0.5, std_range=(0.5, 2.0)):
    """Warn when rows look far from z-normalised. Returns the offending count."""
    X = np.asarray(X)
    if X.size == 0:
        return 0
    mean = X.mean(axis=-1, dtype=np.float64)
    std = X.std(axis=-1, dtype=np.float64)
    bad = (np.abs(mean) > mean_tol) | (std < std_range[0]) | (std > std_range[1])
    count = int(np.count_nonzero(bad))
    if count:
        warnings.warn(
            f"{count} series are not z-normalised (|mean| > {mean_tol} or "
            f"stdev outside {std_range}); breakpoints assume N(0, 1) values",
            stacklevel=2,
        )
    return count
