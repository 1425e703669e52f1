"""Single-word atomic primitives.

CPython has no user-level compare-and-swap. ``AtomicRef`` guards its word
with a private lock that is held only for the read-compare-write itself and
never across user code, so it behaves like a hardware CAS: no thread can be
delayed or crash while holding it. Fetch-and-increment uses
``itertools.count``, whose ``__next__`` is a single C call and therefore
atomic under the interpreter lock.

Plain loads and stores of attributes, list items and bytearray items are
already atomic and sequentially consistent in CPython; callers use them
directly.
"""

import itertools
import threading

__all__ = ["AtomicCounter", "AtomicRef"]


class AtomicCounter:
    """Monotone counter supporting atomic fetch-and-increment."""

    __slots__ = ("_it",)

    def __init__(self, start=0):
        self._it = itertools.count(start)

    def next(self):
        """Return the current value and increment it (FAI(c, 1))."""
        return next(self._it)

    def load(self):
        """Current value (the next value ``next`` would return)."""
        # count's repr is "count(<value>)"; there is no public accessor
        return int(repr(self._it)[6:-1])


class AtomicRef:
    """Object reference with CAS and a one-way mark bit.

    A marked reference refuses every further CAS. The index uses the mark to
    seal child pointers once a subtree is finished.
    """

    __slots__ = ("_value", "_marked", "_lock")

    def __init__(self, value=None):
        self._value = value
        self._marked = False
        self._lock = threading.Lock()

    def get(self):
        return self._value

    @property
    def marked(self):
        return self._marked

    def set(self, value):
        self._value = value

    def compare_and_set(self, expected, new):
        """Install ``new`` iff the current value *is* ``expected`` and unmarked."""
        lock = self._lock
        lock.acquire()
        if self._value is expected and not self._marked:
            self._value = new
            lock.release()
            return True
        lock.release()
        return False

    def mark(self):
        lock = self._lock
        lock.acquire()
        self._marked = True
        lock.release()

    def __repr__(self):
        flag = ", marked" if self._marked else ""
        return f"AtomicRef({self._value!r}{flag})"
