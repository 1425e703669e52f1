"""Lock-free processing of a partitioned workload with light-weight helping.

A workload is split into ``k`` parts. Threads take parts through a shared
fetch-and-increment counter and process them without synchronisation
(*expeditive* mode). Once the counter is exhausted a thread scans the done
flags; for every unfinished part it backs off, re-checks, raises the part's
help flag and processes it itself with the helper-safe *standard* code,
stopping as soon as someone else finishes the part. The owner observes the
help flag at its checkpoints and continues in standard mode.

When ``refresh_run`` returns every done flag of the plan is set, so a thread
moves on to the next phase without a barrier.

Plans nest: a part processor may run its own plan for sub-parts, passing its
``Part`` as ``parent``. Sub-parts inherit standard mode from any ancestor and
stop when any ancestor is finished.
"""

import enum
import time
from dataclasses import dataclass, field

from ._atomic import AtomicCounter, AtomicRef

__all__ = [
    "BackoffEstimator",
    "Mode",
    "Part",
    "RefreshPlan",
    "RefreshReport",
    "Worker",
    "acquire_part",
    "help_phase",
    "mode_for",
    "processor",
    "refresh_run",
]


class Mode(enum.Enum):
    EXPEDITIVE = "expeditive"
    STANDARD = "standard"


class RefreshPlan:
    """Done flags, help flags and an assignment counter for ``k`` parts.

    ``done`` and ``help`` may be views (memoryview slices) into larger flag
    arrays so that nested plans share storage with their owner. Child plans
    are either given up front or created on demand with ``child``; in the
    latter case the first successfully installed plan wins.
    """

    __slots__ = ("k", "level", "done", "help", "counter", "payload",
                 "_children", "_lazy")

    def __init__(self, k, *, level=0, done=None, help=None, counter=None,
                 children=None, lazy_children=False):
        if k < 0:
            raise ValueError("part count must be non-negative")
        self.k = k
        self.level = level
        self.done = done if done is not None else bytearray(k)
        self.help = help if help is not None else bytearray(k)
        self.counter = counter if counter is not None else AtomicCounter()
        self.payload = None
        self._children = children
        self._lazy = [AtomicRef() for _ in range(k)] if lazy_children else None

    def child(self, i, factory=None):
        if self._children is not None:
            return self._children[i]
        slot = self._lazy[i]
        plan = slot.get()
        if plan is None:
            slot.compare_and_set(None, factory(i))
            plan = slot.get()
        return plan

    def complete(self):
        return all(self.done)

    def __repr__(self):
        return (f"RefreshPlan(k={self.k}, level={self.level}, "
                f"done={sum(self.done)}/{self.k})")


class BackoffEstimator:
    """Running average of part durations; the backoff is ``beta * T_avg``.

    ``min_wait`` floors the backoff. Under an interpreter lock a runnable
    owner can sit out several scheduling quanta, which would otherwise look
    like a stall and trigger needless helping.
    """

    __slots__ = ("beta", "max_wait", "min_wait", "weight", "average", "samples")

    def __init__(self, beta=1.0, max_wait=0.1, weight=0.25, min_wait=0.0):
        self.beta = beta
        self.max_wait = max_wait
        self.min_wait = min_wait
        self.weight = weight
        self.average = 0.0
        self.samples = 0

    def observe(self, seconds):
        if self.samples:
            self.average += self.weight * (seconds - self.average)
        else:
            self.average = seconds
        self.samples += 1

    def wait_time(self):
        return min(max(self.beta * self.average, self.min_wait), self.max_wait)

    def wait(self, done, i):
        """Sleep up to ``wait_time``, returning early once ``done[i]`` is set."""
        remaining = self.wait_time()
        if remaining <= 0.0:
            time.sleep(0)  # still let a descheduled owner run
            return
        deadline = time.perf_counter() + remaining
        while not done[i]:
            time.sleep(min(remaining, 0.002))
            remaining = deadline - time.perf_counter()
            if remaining <= 0.0:
                break


class Worker:
    """Per-thread context: identity, backoff state, hook and counters.

    ``hook(worker, name, part)`` is called at every named checkpoint; it is
    how tests suspend threads and how faults are injected. With no hook the
    checkpoints cost one attribute test.
    """

    def __init__(self, tid, *, beta=1.0, max_wait=0.1, min_wait=0.0, hook=None):
        self.tid = tid
        self.beta = beta
        self.max_wait = max_wait
        self.min_wait = min_wait
        self.hook = hook
        self.phase = None
        self.helped = {}
        self.processed = {}
        self.inserts = 0
        self.rr = 0
        self._estimators = {}

    def backoff(self, level):
        est = self._estimators.get(level)
        if est is None:
            est = self._estimators[level] = BackoffEstimator(
                self.beta, self.max_wait, min_wait=self.min_wait)
        return est

    def checkpoint(self, name, part=None):
        if self.hook is not None:
            self.hook(self, name, part)

    def __repr__(self):
        return f"Worker({self.tid})"


class Part:
    """Handle on one part while a thread processes it."""

    __slots__ = ("plan", "index", "parent", "worker", "helping")

    def __init__(self, plan, index, worker, parent=None, helping=False):
        self.plan = plan
        self.index = index
        self.worker = worker
        self.parent = parent
        self.helping = helping

    @property
    def finished(self):
        p = self
        while p is not None:
            if p.plan.done[p.index]:
                return True
            p = p.parent
        return False

    @property
    def standard(self):
        p = self
        while p is not None:
            if p.helping or p.plan.help[p.index]:
                return True
            p = p.parent
        return False

    @property
    def mode(self):
        return Mode.STANDARD if self.standard else Mode.EXPEDITIVE

    def checkpoint(self, name="mid-process"):
        """Processor checkpoint; False means the part is finished, stop."""
        self.worker.checkpoint(name, self)
        return not self.finished

    def __repr__(self):
        return f"Part(level={self.plan.level}, index={self.index}, helping={self.helping})"


class _FunctionProcessor:
    __slots__ = ("fn",)

    def __init__(self, fn):
        self.fn = fn

    def expeditive(self, part):
        self.fn(part)

    def standard(self, part):
        self.fn(part)


def processor(fn):
    """Processor whose two modes share one body; it reads ``part.standard``."""
    return _FunctionProcessor(fn)


@dataclass
class RefreshReport:
    processed: list = field(default_factory=list)
    helped: list = field(default_factory=list)


def acquire_part(plan):
    """Next unassigned part index, or None once all ``k`` were handed out."""
    i = plan.counter.next()
    return i if i < plan.k else None


def mode_for(plan, i, parent=None):
    if plan.help[i] or (parent is not None and parent.standard):
        return Mode.STANDARD
    return Mode.EXPEDITIVE


def refresh_run(plan, proc, worker, parent=None):
    """Acquire and process parts, then help unfinished ones. See module doc."""
    report = RefreshReport()
    est = worker.backoff(plan.level)
    done = plan.done
    counter = plan.counter
    k = plan.k
    checkpoint = worker.checkpoint
    clock = time.perf_counter
    while True:
        if parent is not None and parent.finished:
            return report
        i = counter.next()
        if i >= k:
            break
        if done[i]:
            continue  # absent slot, or already finished by a helper
        part = Part(plan, i, worker, parent)
        checkpoint("after-acquire", part)
        start = clock()
        if mode_for(plan, i, parent) is Mode.EXPEDITIVE:
            proc.expeditive(part)
        else:
            proc.standard(part)
        checkpoint("before-done-flag", part)
        done[i] = 1
        est.observe(clock() - start)
        report.processed.append(i)
    report.helped = help_phase(plan, proc, worker, parent)
    n = len(report.processed)
    if n:
        worker.processed[worker.phase] = worker.processed.get(worker.phase, 0) + n
    return report


def help_phase(plan, proc, worker, parent=None):
    """Scan done flags; back off, then help every part still unfinished."""
    helped = []
    done = plan.done
    est = worker.backoff(plan.level)
    for j in range(plan.k):
        if done[j]:
            continue
        if parent is not None and parent.finished:
            break
        est.wait(done, j)
        if done[j]:
            continue
        plan.help[j] = 1
        part = Part(plan, j, worker, parent, helping=True)
        worker.checkpoint("before-help", part)
        proc.standard(part)
        done[j] = 1
        helped.append(j)
    if helped:
        worker.helped[(worker.phase, plan.level)] = worker.helped.get((worker.phase, plan.level), 0) + len(helped)
    return helped
