"""Thread delay and crash injection through worker checkpoints.

A fault string reads ``t<thread>:<phase>:<point>:<kind>`` where ``phase`` is
``summarization`` (alias ``bc``), ``tree`` (``tp``) or ``query``, ``point``
is a phase-progress fraction in [0, 1] and ``kind`` is ``crash`` or
``delay=<milliseconds>``. Example: ``t3:query:0.5:crash``.

A fault fires at the first checkpoint of its thread, in its phase, where the
phase progress has reached ``point``; a fault still pending when the thread
finishes the phase fires there. A crashed thread reports itself settled and
then blocks until the run is torn down, taking no further steps.
"""

import re
import time
from dataclasses import dataclass, field

__all__ = ["Fault", "FaultInjector", "FaultPlan", "WorkerCrashed", "PHASES"]

PHASES = ("summarization", "tree", "query")
_ALIASES = {"bc": "summarization", "summarization": "summarization",
            "tp": "tree", "tree": "tree", "query": "query", "qa": "query"}
_PATTERN = re.compile(r"^t(\d+):([a-z]+):([0-9.]+):(crash|delay=(\d+(?:\.\d+)?))$")


class WorkerCrashed(Exception):
    """Raised inside a crashed worker when the harness shuts the run down."""


@dataclass(frozen=True)
class Fault:
    thread: int
    phase: str
    point: float
    kind: str  # "crash" or "delay"
    delay_ms: float = 0.0

    @classmethod
    def parse(cls, text):
        m = _PATTERN.match(text.strip().lower())
        if not m:
            raise ValueError(
                f"bad fault {text!r}; expected e.g. t3:query:0.5:crash or t1:tree:0.2:delay=100"
            )
        tid, phase, point, kind, ms = m.groups()
        if phase not in _ALIASES:
            raise ValueError(f"unknown phase {phase!r} in fault {text!r}")
        point = float(point)
        if not 0.0 <= point <= 1.0:
            raise ValueError(f"trigger point {point} outside [0, 1]")
        if kind == "crash":
            return cls(int(tid), _ALIASES[phase], point, "crash")
        return cls(int(tid), _ALIASES[phase], point, "delay", float(ms))

    def __str__(self):
        kind = "crash" if self.kind == "crash" else f"delay={self.delay_ms:g}"
        return f"t{self.thread}:{self.phase}:{self.point:g}:{kind}"


@dataclass
class FaultPlan:
    faults: list = field(default_factory=list)

    @classmethod
    def parse(cls, specs):
        return cls([Fault.parse(s) for s in specs or ()])

    def for_thread(self, tid):
        return [f for f in self.faults if f.thread == tid]

    def validate(self, n_threads):
        for f in self.faults:
            if not 0 <= f.thread < n_threads:
                raise ValueError(f"fault {f} names thread {f.thread}, run has {n_threads}")

    def __bool__(self):
        return bool(self.faults)

    def __str__(self):
        return ";".join(str(f) for f in self.faults)


class FaultInjector:
    """Checkpoint hook for one worker.

    ``progress`` maps a phase name to ``fn(worker) -> float``. ``on_crash``
    is called before a crashed worker blocks on ``shutdown``.
    """

    def __init__(self, faults, progress, shutdown, on_crash=None):
        self.pending = sorted(faults, key=lambda f: (PHASES.index(f.phase), f.point))
        self.progress = progress
        self.shutdown = shutdown
        self.on_crash = on_crash
        self.fired = []

    def __call__(self, worker, name, part=None):
        pending = self.pending
        if not pending:
            return
        phase = worker.phase
        f = pending[0]
        if f.phase != phase:
            return
        if name != "phase-end" and self.progress[phase](worker) < f.point:
            return
        pending.pop(0)
        self.fired.append((f, name, time.perf_counter()))
        if f.kind == "delay":
            time.sleep(f.delay_ms / 1000.0)
            # later faults of the same phase may be due too
            self(worker, name, part)
            return
        if self.on_crash is not None:
            self.on_crash(worker)
        self.shutdown.wait()
        raise WorkerCrashed(f"thread {worker.tid} crashed at {name}")
