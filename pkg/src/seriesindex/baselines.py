"""Lock-free summarisation baselines with one done flag per series.

* ``doall-split``: the collection is cut into ``N`` equal static ranges;
  a thread does its own range, then scans all done flags circularly from
  the end of its range and summarises whatever is still undone.
* ``fi-based``: series are handed out one at a time by a global
  fetch-and-increment counter, followed by the same re-scan.
* ``cas-based``: a thread claims a series by CAS on its claim word before
  summarising it, scanning from its own static offset; a final re-scan
  covers series claimed by threads that never finished them.

All three fill the same buffers as the main path (possibly with duplicates
after crashes).
"""

import threading
import time

from ._atomic import AtomicCounter, AtomicRef
from .faults import FaultInjector, FaultPlan, WorkerCrashed
from .pipeline import SummarizationBuffers, buffer_creation
from .refresh import Worker
from .summaries import BreakpointTable

__all__ = ["KINDS", "run_baseline"]

KINDS = ("doall-split", "fi-based", "cas-based")


class _Shared:
    def __init__(self, data, n_threads, segments, max_bits):
        self.data = data
        self.count = len(data)
        self.n_threads = n_threads
        self.table = BreakpointTable(max_bits)
        self.buffers = SummarizationBuffers(self.count, segments, n_threads, max_bits)
        self.done = bytearray(self.count)
        self.progress = AtomicCounter()

    def process(self, worker, sid):
        worker.checkpoint("mid-process")
        buffer_creation(self, self.buffers, sid, worker.tid, self.table)
        self.done[sid] = 1
        self.progress.next()

    def rescan(self, worker, start):
        count = self.count
        done = self.done
        for j in range(count):
            sid = (start + j) % count
            if not done[sid]:
                self.process(worker, sid)


def _static_range(count, n_threads, t):
    per = -(-count // n_threads) if count else 0
    return min(t * per, count), min((t + 1) * per, count)


def _doall_split(shared, worker):
    lo, hi = _static_range(shared.count, shared.n_threads, worker.tid)
    for sid in range(lo, hi):
        if not shared.done[sid]:
            shared.process(worker, sid)
    shared.rescan(worker, hi)


def _fi_based(shared, worker, counter):
    count = shared.count
    while True:
        sid = counter.next()
        if sid >= count:
            break
        shared.process(worker, sid)
    shared.rescan(worker, 0)


def _cas_based(shared, worker, claims):
    count = shared.count
    lo, _ = _static_range(count, shared.n_threads, worker.tid)
    for j in range(count):
        sid = (lo + j) % count
        if claims[sid].get() is None and claims[sid].compare_and_set(None, worker.tid):
            shared.process(worker, sid)
    shared.rescan(worker, lo)


def run_baseline(data, kind, n_threads=1, *, segments=8, max_bits=8, faults=None):
    """Summarise ``data`` with a baseline; returns (buffers, seconds, crashed)."""
    if kind not in KINDS:
        raise ValueError(f"unknown baseline {kind!r}; choose from {', '.join(KINDS)}")
    shared = _Shared(data, n_threads, segments, max_bits)
    faults = faults or FaultPlan()
    faults.validate(n_threads)
    shutdown = threading.Event()
    settled = [threading.Event() for _ in range(n_threads)]
    crashed = [False] * n_threads
    counter = AtomicCounter()
    claims = [AtomicRef() for _ in range(shared.count)] if kind == "cas-based" else None
    progress = {"summarization": lambda w: shared.progress.load() / max(shared.count, 1)}

    def on_crash(w):
        crashed[w.tid] = True
        settled[w.tid].set()

    def body(w):
        try:
            w.phase = "summarization"
            if kind == "doall-split":
                _doall_split(shared, w)
            elif kind == "fi-based":
                _fi_based(shared, w, counter)
            else:
                _cas_based(shared, w, claims)
            w.checkpoint("phase-end")
        except WorkerCrashed:
            pass
        finally:
            settled[w.tid].set()

    workers = []
    for t in range(n_threads):
        mine = [f for f in faults.for_thread(t) if f.phase == "summarization"]
        hook = FaultInjector(mine, progress, shutdown, on_crash) if mine else None
        workers.append(Worker(t, hook=hook))
    threads = [threading.Thread(target=body, args=(w,), daemon=True) for w in workers]
    start = time.perf_counter()
    for t in threads:
        t.start()
    for ev in settled:
        ev.wait()
    elapsed = time.perf_counter() - start
    shutdown.set()
    for t in threads:
        t.join()
    return shared.buffers, elapsed, sum(crashed)
