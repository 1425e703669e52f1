"""Deterministic thread interleavings for concurrency tests.

Real threads run one at a time. Control passes through ``point`` calls that
the code under test makes at its checkpoints: the running thread hands the
baton back and the scheduler picks the next thread with a seeded RNG, so a
seed reproduces the interleaving exactly.

A ``suspend(tid, name, rng)`` policy can park a thread at a point. Parked
threads are not scheduled until every other thread has finished, which
models a stall of arbitrary length; with ``kill_suspended`` they never run
again, which models a crash.
"""

import random
import threading

__all__ = ["Killed", "Scheduler"]


class Killed(BaseException):
    """Unwinds a thread the scheduler decided never to resume."""


class Scheduler:
    def __init__(self, n_threads, seed, suspend=None, kill_suspended=False,
                 max_steps=10_000_000):
        self.n = n_threads
        self.rng = random.Random(seed)
        self.suspend = suspend
        self.kill_suspended = kill_suspended
        self.max_steps = max_steps
        self._sems = [threading.Semaphore(0) for _ in range(n_threads)]
        self._main = threading.Semaphore(0)
        self._finished = [False] * n_threads
        self._parked = set()
        self._killed = [False] * n_threads
        self.errors = []
        self.trace = []
        self.steps = 0

    def point(self, tid, name=""):
        """Yield control; called by the running thread at a checkpoint."""
        self.trace.append((tid, name))
        if self.suspend is not None and tid not in self._parked \
                and self.suspend(tid, name, self.rng):
            self._parked.add(tid)
        self._main.release()
        self._sems[tid].acquire()
        if self._killed[tid]:
            raise Killed()

    def hook(self, tid):
        """Checkpoint hook in the ``(worker, name, part)`` form."""
        return lambda worker, name, part=None: self.point(tid, name)

    def _body(self, tid, fn):
        self._sems[tid].acquire()
        try:
            if not self._killed[tid]:
                fn(tid)
        except Killed:
            pass
        except BaseException as exc:  # reported by run()
            self.errors.append((tid, exc))
        finally:
            self._finished[tid] = True
            self._main.release()

    def run(self, fn):
        """Run ``fn(tid)`` on every thread under this schedule."""
        threads = [threading.Thread(target=self._body, args=(t, fn), daemon=True)
                   for t in range(self.n)]
        for t in threads:
            t.start()
        while True:
            runnable = [t for t in range(self.n)
                        if not self._finished[t] and t not in self._parked]
            if not runnable:
                parked = [t for t in sorted(self._parked) if not self._finished[t]]
                if not parked:
                    break
                if self.kill_suspended:
                    for t in parked:
                        self._killed[t] = True
                        self._sems[t].release()
                        self._main.acquire()
                    break
                self._parked.clear()
                continue
            self.steps += 1
            if self.steps > self.max_steps:
                raise RuntimeError("schedule did not terminate")
            t = self.rng.choice(runnable)
            self._sems[t].release()
            self._main.acquire()
        for t in threads:
            t.join()
        if self.errors:
            tid, exc = self.errors[0]
            raise RuntimeError(f"thread {tid} failed: {exc!r}") from exc
        return self
