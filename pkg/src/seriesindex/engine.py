"""Worker threads, phase timing and metrics for build and query runs.

Each worker runs summarisation, tree population and then every query, one
after the other, with no barrier in between: a phase's traverse returns only
once the whole phase is complete. Phase end times are the latest end stamp
of any worker that did not crash; phase times are the gaps between
consecutive ends, so they add up to the total.
"""

import sys
import threading
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ._atomic import AtomicCounter, AtomicRef
from .faults import PHASES, FaultInjector, FaultPlan, WorkerCrashed
from .pipeline import (RawDataStore, SummarizationBuffers, TreePopulation,
                       bc_traverse, tp_traverse)
from .query import QueryContext, run_query
from .refresh import Worker
from .summaries import BreakpointTable
from .tree import IndexTree

__all__ = [
    "BuiltIndex",
    "MetricsReport",
    "RunConfig",
    "Session",
    "build_index",
    "run_queries",
    "run_session",
]


@dataclass
class RunConfig:
    segments: int = 8
    leaf_size: int = 2000
    max_bits: int = 8
    threads: int = 1
    beta: float = 1.0
    max_backoff: float = 0.1
    min_backoff: float = None  # None: one interpreter switch interval per thread
    chunks: int = None  # None: 4 * threads
    groups: int = 16
    tp_chunk: int = 512

    def validate(self, n=None):
        if self.threads < 1:
            raise ValueError("need at least one thread")
        if self.segments < 1 or self.segments > 16:
            raise ValueError("segments must be in [1, 16]")
        if n is not None and n % self.segments:
            raise ValueError(f"series length {n} is not divisible by {self.segments} segments")
        if self.leaf_size < 1:
            raise ValueError("leaf size must be positive")
        if not 1 <= self.max_bits <= 16:
            raise ValueError("max bits must be in [1, 16]")
        if self.beta < 0 or self.max_backoff < 0:
            raise ValueError("backoff parameters must be non-negative")

    def backoff_floor(self):
        if self.min_backoff is not None:
            return self.min_backoff
        if self.threads == 1:
            return 0.0
        return sys.getswitchinterval() * self.threads


@dataclass
class MetricsReport:
    threads: int = 0
    series: int = 0
    queries: int = 0
    summarization_time: float = 0.0
    tree_time: float = 0.0
    query_time: float = 0.0
    total_time: float = 0.0
    help_summarization: int = 0
    help_tree: int = 0
    help_query: int = 0
    multiplicity: float = 1.0
    tree_multiplicity: float = 1.0
    crashed: int = 0
    faults_fired: int = 0
    faults: str = ""
    baseline: str = ""
    query_kind: str = ""
    answers: list = field(default_factory=list, repr=False)

    COLUMNS = ("threads", "series", "queries", "summarization_time", "tree_time",
               "query_time", "total_time", "help_summarization", "help_tree",
               "help_query", "multiplicity", "tree_multiplicity", "crashed",
               "faults_fired", "faults", "baseline", "query_kind")

    def row(self):
        d = asdict(self)
        return [d[c] for c in self.COLUMNS]


class BuiltIndex:
    """Everything the query engine needs from a finished build."""

    def __init__(self, data, buffers, tree, table, config):
        self.data = data
        self.words = buffers.words
        self.buffers = buffers
        self.tree = tree
        self.table = table
        self.segments = config.segments
        self.config = config
        self.epochs = AtomicCounter()

    @property
    def count(self):
        return len(self.data)


class Session:
    """Shared state of one run: build structures, query contexts, workers."""

    def __init__(self, data, queries, config, faults=None, index=None):
        self.data = data
        self.config = config
        n_threads = config.threads
        config.validate(data.shape[1] if len(data) else None)
        self.faults = faults or FaultPlan()
        self.faults.validate(n_threads)
        self.build = index is None
        if self.build:
            self.table = BreakpointTable(config.max_bits)
            self.store = RawDataStore(data, n_threads, chunks=config.chunks,
                                      groups=config.groups)
            self.buffers = SummarizationBuffers(len(data), config.segments,
                                                n_threads, config.max_bits)
            self.tree = IndexTree(self.buffers.words, config.leaf_size,
                                  n_threads, config.max_bits)
            self.population = TreePopulation(self.buffers, self.tree,
                                             chunk_size=config.tp_chunk)
            self.index = BuiltIndex(data, self.buffers, self.tree, self.table, config)
        else:
            self.index = index
            self.table = index.table
        self.queries = np.asarray(queries if queries is not None else
                                  np.empty((0, data.shape[1])), dtype=np.float64)
        self.contexts = [AtomicRef() for _ in range(len(self.queries))]
        self.shutdown = threading.Event()
        self.settled = [threading.Event() for _ in range(n_threads)]
        self.crashed = [False] * n_threads
        self.stamps = [dict() for _ in range(n_threads)]
        floor = config.backoff_floor()
        self.workers = []
        self.injectors = []
        progress = {
            "summarization": lambda w: self.store.progress(),
            "tree": lambda w: self.population.progress(),
            "query": self._query_progress,
        }
        for t in range(n_threads):
            mine = [f for f in self.faults.for_thread(t)
                    if self.build or f.phase == "query"]
            hook = None
            if mine:
                hook = FaultInjector(mine, progress, self.shutdown, self._on_crash)
                self.injectors.append(hook)
            w = Worker(t, beta=config.beta, max_wait=config.max_backoff,
                       min_wait=floor, hook=hook)
            w.query_index = 0
            self.workers.append(w)

    def _query_progress(self, worker):
        nq = len(self.queries)
        if not nq:
            return 1.0
        q = worker.query_index
        ctx = self.contexts[q].get() if q < nq else None
        frac = ctx.progress() if ctx is not None else 0.0
        return (q + frac) / nq

    def _on_crash(self, worker):
        self.crashed[worker.tid] = True
        self.settled[worker.tid].set()

    def context(self, q):
        slot = self.contexts[q]
        ctx = slot.get()
        if ctx is None:
            slot.compare_and_set(None, QueryContext(
                self.index, self.queries[q], self.config.threads,
                self.index.epochs.next()))
            ctx = slot.get()
        return ctx

    def _work(self, w):
        stamps = self.stamps[w.tid]
        try:
            if self.build:
                w.phase = "summarization"
                bc_traverse(self.store, self.buffers, w, self.table)
                w.checkpoint("phase-end")
                stamps["summarization"] = time.perf_counter()
                w.phase = "tree"
                tp_traverse(self.population, w)
                w.checkpoint("phase-end")
                stamps["tree"] = time.perf_counter()
            w.phase = "query"
            for q in range(len(self.queries)):
                w.query_index = q
                ctx = self.context(q)
                if not ctx.finished:
                    run_query(ctx, w)
            w.checkpoint("phase-end")
            stamps["query"] = time.perf_counter()
        except WorkerCrashed:
            pass
        finally:
            self.settled[w.tid].set()

    def run(self):
        threads = [threading.Thread(target=self._work, args=(w,), daemon=True,
                                    name=f"worker-{w.tid}") for w in self.workers]
        self.start = time.perf_counter()
        for t in threads:
            t.start()
        for ev in self.settled:
            ev.wait()
        self.shutdown.set()
        for t in threads:
            t.join()
        return self.report()

    def phase_times(self):
        alive = [s for s, c in zip(self.stamps, self.crashed) if not c]
        phases = PHASES if self.build else ("query",)
        times = {}
        prev = self.start
        for p in phases:
            end = max((s[p] for s in alive if p in s), default=prev)
            times[p] = end - prev
            prev = end
        return times

    def answers(self):
        out = []
        for q, slot in enumerate(self.contexts):
            ref, dist = slot.get().answer()
            out.append((q, ref, dist))
        return out

    def report(self):
        times = self.phase_times()
        m = MetricsReport(threads=self.config.threads, series=len(self.data),
                          queries=len(self.queries))
        m.summarization_time = times.get("summarization", 0.0)
        m.tree_time = times.get("tree", 0.0)
        m.query_time = times.get("query", 0.0)
        m.total_time = m.summarization_time + m.tree_time + m.query_time
        for w in self.workers:
            for (phase, _level), n in w.helped.items():
                setattr(m, f"help_{phase}", getattr(m, f"help_{phase}") + n)
        if self.build and len(self.data):
            distinct = len(self.data)
            m.multiplicity = self.buffers.total_pairs() / distinct
            m.tree_multiplicity = sum(w.inserts for w in self.workers) / distinct
        m.crashed = sum(self.crashed)
        m.faults_fired = sum(len(i.fired) for i in self.injectors)
        m.faults = str(self.faults)
        m.answers = self.answers()
        return m


def run_session(data, queries=None, config=None, faults=None, index=None):
    """Run one session; returns (MetricsReport, BuiltIndex)."""
    config = config or RunConfig()
    if index is None and len(data) == 0 and queries is not None and len(queries):
        raise ValueError("cannot answer queries on an empty dataset")
    s = Session(data, queries, config, faults, index)
    return s.run(), s.index


def build_index(data, config=None, faults=None):
    """Build only; returns the index."""
    _, index = run_session(data, None, config, faults)
    return index


def run_queries(index, queries, config=None, faults=None):
    """Answer ``queries`` on a built index with fresh workers."""
    config = config or index.config
    report, _ = run_session(index.data, queries, config, faults, index)
    return report
