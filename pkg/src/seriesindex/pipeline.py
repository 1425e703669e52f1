"""Index construction: summarisation into root buffers, then tree population.

Summarisation walks the raw data as ``k`` chunks of ``m`` groups of ``r``
series, one refresh level per granularity. A group is summarised in one
vectorised step (PAA, full-cardinality symbols, root buffer index) into
shared tables indexed by series id; every thread that processes a group's
elements has computed those rows itself, so no cross-thread publication of
the tables is needed. Each element then puts its id into its root buffer,
in the slot owned by the executing thread.

Tree population is a refresh over the ``2**w`` buffers. A buffer's contents
are frozen into a snapshot when its nested chunk plan is created; the plan is
installed by CAS so all threads work on the same snapshot. When the nested
plan completes the subtree is sealed and finalised.
"""

import math
import time

import numpy as np

from .refresh import RefreshPlan, processor, refresh_run
from .summaries import compute_paa, isax_symbols, root_indices

__all__ = [
    "RawDataStore",
    "SummarizationBuffers",
    "bc_traverse",
    "buffer_creation",
    "tp_traverse",
    "TreePopulation",
]


class RawDataStore:
    """Raw series laid out as ``k`` chunks x ``m`` groups x ``r`` elements.

    ``data`` is any (count, n) array; trailing layout slots past ``count``
    are marked done up front. Done flags exist at all three levels, help
    flags at chunk and group level (element plans keep private help flags).
    """

    def __init__(self, data, n_threads, *, chunks=None, groups=16):
        self.data = data
        self.count = count = len(data)
        self.k = k = chunks if chunks is not None else 4 * n_threads
        self.m = m = groups
        if k < 1 or m < 1:
            raise ValueError("need at least one chunk and one group")
        self.r = r = max(1, math.ceil(count / (k * m)))
        self.d_chunks = bytearray(k)
        self.d_groups = bytearray(k * m)
        self.d_elements = bytearray(k * m * r)
        self.h_chunks = bytearray(k)
        self.h_groups = bytearray(k * m)
        # absent trailing slots
        self.d_elements[count:] = b"\x01" * (k * m * r - count)
        for gi in range(k * m):
            if gi * r >= count:
                self.d_groups[gi] = 1
        for c in range(k):
            if c * m * r >= count:
                self.d_chunks[c] = 1

        dg, de, hg = (memoryview(x) for x in (self.d_groups, self.d_elements, self.h_groups))
        chunk_children = []
        for c in range(k):
            elem_plans = []
            for g in range(m):
                gi = c * m + g
                elem_plans.append(
                    RefreshPlan(r, level=2, done=de[gi * r : (gi + 1) * r])
                )
            chunk_children.append(
                RefreshPlan(m, level=1, done=dg[c * m : (c + 1) * m],
                            help=hg[c * m : (c + 1) * m], children=elem_plans)
            )
        self.plan = RefreshPlan(k, level=0, done=self.d_chunks,
                                help=self.h_chunks, children=chunk_children)

    def group_range(self, c, g):
        start = (c * self.m + g) * self.r
        return start, min(start + self.r, self.count)

    def progress(self):
        """Fraction of chunks handed out, used to place injected faults."""
        return min(self.plan.counter.load(), self.k) / self.k if self.k else 1.0


class SummarizationBuffers:
    """``2**w`` root buffers with one append slot per thread.

    Entries are series ids; the word of an id is ``words[id]``. Slots are
    Python lists, grown only by their owner thread.
    """

    def __init__(self, count, segments, n_threads, max_bits):
        self.segments = segments
        self.n_threads = n_threads
        self.max_bits = max_bits
        self.words = np.zeros((count, segments),
                              dtype=np.uint8 if max_bits <= 8 else np.uint16)
        self.binds = np.zeros(count, dtype=np.int64)
        self.slots = [[[] for _ in range(n_threads)] for _ in range(1 << segments)]

    def put(self, bind, sid, tid):
        self.slots[bind][tid].append(sid)

    def contents(self, bind):
        """All ids in buffer ``bind`` (with duplicates), slot order."""
        parts = [np.asarray(s, dtype=np.int64) for s in self.slots[bind] if s]
        if not parts:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(parts)

    def total_pairs(self):
        return sum(len(s) for buf in self.slots for s in buf)

    def distinct_ids(self):
        seen = set()
        for buf in self.slots:
            for s in buf:
                seen.update(s)
        return seen


def summarize_range(store, buffers, start, stop, table):
    """Summaries of ids ``start:stop`` into the shared tables; idempotent."""
    if stop <= start:
        return
    paa = compute_paa(store.data[start:stop], buffers.segments)
    sym = isax_symbols(paa, table)
    buffers.words[start:stop] = sym
    buffers.binds[start:stop] = root_indices(sym, buffers.max_bits)


def buffer_creation(store, buffers, sid, tid, table):
    """Summarise one series and put it in its root buffer; returns the bind."""
    summarize_range(store, buffers, sid, sid + 1, table)
    bind = int(buffers.binds[sid])
    buffers.put(bind, sid, tid)
    return bind


def bc_traverse(store, buffers, worker, table):
    """Summarisation traverse run by one worker; returns when every chunk is done."""
    start_t = time.perf_counter()
    binds = buffers.binds
    put = buffers.put
    tid = worker.tid

    def elements(part):
        g = part.parent
        sid = (g.parent.index * store.m + g.index) * store.r + part.index
        put(int(binds[sid]), sid, tid)

    elem_proc = processor(elements)

    def group(part):
        c = part.parent.index
        start, stop = store.group_range(c, part.index)
        part.worker.checkpoint("mid-process", part)
        if part.finished:
            return
        summarize_range(store, buffers, start, stop, table)
        refresh_run(part.plan.child(part.index), elem_proc, worker, parent=part)

    group_proc = processor(group)

    def chunk(part):
        refresh_run(part.plan.child(part.index), group_proc, worker, parent=part)

    report = refresh_run(store.plan, processor(chunk), worker)
    return {"seconds": time.perf_counter() - start_t,
            "chunks": len(report.processed), "helped": len(report.helped)}


class TreePopulation:
    """Shared state of the tree-population traverse."""

    def __init__(self, buffers, tree, *, chunk_size=512):
        self.buffers = buffers
        self.tree = tree
        self.chunk_size = chunk_size
        self.plan = RefreshPlan(1 << buffers.segments, level=0, lazy_children=True)

    def _child(self, b):
        ids = self.buffers.contents(b)
        k = max(1, math.ceil(len(ids) / self.chunk_size)) if len(ids) else 0
        plan = RefreshPlan(k, level=1)
        plan.payload = ids
        return plan

    def progress(self):
        k = self.plan.k
        return min(self.plan.counter.load(), k) / k


def tp_traverse(pop, worker):
    """Tree-population traverse run by one worker."""
    start_t = time.perf_counter()
    tree = pop.tree
    words = pop.buffers.words
    size = pop.chunk_size
    tid = worker.tid
    hook = None
    if worker.hook is not None:
        def hook(name, leaf, pos):
            worker.checkpoint(name, None)

    def chunk(part):
        ids = part.plan.payload[part.index * size : (part.index + 1) * size]
        b = part.parent.index
        syms = words[ids].tolist()
        inserted = 0
        for sid, sym in zip(ids.tolist(), syms):
            if not part.checkpoint("mid-process"):
                break
            tree.insert(b, sid, sym, tid, part.standard, hook)
            inserted += 1
        worker.inserts += inserted

    chunk_proc = processor(chunk)

    def buffer(part):
        b = part.index
        plan = pop.plan.child(b, pop._child)
        if plan.k == 0:
            return
        refresh_run(plan, chunk_proc, worker, parent=part)
        if not part.plan.done[b]:
            tree.finish(b)

    report = refresh_run(pop.plan, processor(buffer), worker)
    return {"seconds": time.perf_counter() - start_t,
            "buffers": len(report.processed), "helped": len(report.helped)}
