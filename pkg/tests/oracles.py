"""Slow, independent reference implementations used by the tests."""

import math
from statistics import NormalDist

import numpy as np


def breakpoints(bits):
    # equiprobable N(0,1) quantiles computed directly at this cardinality
    nd = NormalDist()
    a = 1 << bits
    return [nd.inv_cdf(i / a) for i in range(1, a)]


def paa(series, w):
    n = len(series)
    size = n // w
    return [sum(float(v) for v in series[i * size:(i + 1) * size]) / size for i in range(w)]


def symbol(value, bits):
    # number of thresholds at or below the value: ties belong to the upper region
    return sum(1 for t in breakpoints(bits) if t <= value)


def mindist_sq(q_paa, symbols, bits, n):
    w = len(q_paa)
    total = 0.0
    for v, s, b in zip(q_paa, symbols, bits):
        t = breakpoints(b)
        lo = -math.inf if s == 0 else t[s - 1]
        hi = math.inf if s == len(t) else t[s]
        if v < lo:
            total += (lo - v) ** 2
        elif v > hi:
            total += (v - hi) ** 2
    return n / w * total


def root_index(symbols, bits):
    out = ""
    for s, b in zip(symbols, bits):
        out += format(s, f"0{b}b")[0]
    return int(out, 2)


def ed_sq(a, b):
    return sum((float(x) - float(y)) ** 2 for x, y in zip(a, b))


def nearest(data, query):
    """Plain double-precision scan written without numpy broadcasting tricks."""
    q = np.asarray(query, dtype=np.float64)
    best, best_i = math.inf, -1
    for i in range(len(data)):
        d = np.asarray(data[i], dtype=np.float64) - q
        v = float(d @ d)
        if v < best:
            best, best_i = v, i
    return best_i, math.sqrt(best)


def inorder(node):
    if node is None:
        return []
    if node.is_leaf:
        return [node]
    return inorder(node.left.get()) + [node] + inorder(node.right.get())


def size(node):
    if node.is_leaf:
        return 1
    return size(node.left.get()) + size(node.right.get()) + 1
