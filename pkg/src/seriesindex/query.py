"""Exact 1-NN search over a built index, shared by all worker threads.

Every query goes through three refresh traverses that all threads join:

* pruning: one part per root subtree, one sub-part per tree node (located
  by inorder rank). Leaves whose lower bound beats the best-so-far are put
  round-robin into ``N`` candidate queues.
* sorting: one part per queue; the sorted view is installed by CAS.
* refinement: one part per queue, one sub-part per queued leaf, in bound
  order. Series that survive a per-series bound check get a real distance.

``index`` is duck-typed: it needs ``data``, ``words``, ``tree``, ``table``,
``segments`` and an ``epochs`` counter.
"""

import math

import numpy as np

from ._atomic import AtomicCounter, AtomicRef
from .refresh import RefreshPlan, Worker, processor, refresh_run
from .summaries import QueryBounds, compute_paa, isax_symbols, root_indices
from .tree import find_node, inorder, leaf_members, total_nodes

__all__ = [
    "BestSoFar",
    "CandidateQueue",
    "QueryContext",
    "answer_query",
    "initial_bsf",
    "ps_traverse",
    "rs_sort",
    "rs_traverse",
    "run_query",
    "update_bsf",
]

ACCEPTED = "accepted"
SUPERSEDED = "superseded"


class BestSoFar:
    """Smallest squared distance seen so far with the series that has it.

    The pair lives in one immutable tuple behind a CAS word, so readers
    always see a consistent (value, ref).
    """

    __slots__ = ("_slot",)

    def __init__(self, value=math.inf, ref=-1):
        self._slot = AtomicRef((value, ref))

    def get(self):
        return self._slot.get()

    @property
    def value(self):
        return self._slot.get()[0]

    @property
    def ref(self):
        return self._slot.get()[1]

    def __repr__(self):
        v, r = self.get()
        return f"BestSoFar({v!r}, {r})"


def update_bsf(bsf, candidate, ref):
    """CAS-min on (distance, ref); ties go to the smaller ref."""
    new = (float(candidate), int(ref))
    slot = bsf._slot
    while True:
        cur = slot.get()
        if new >= cur:
            return SUPERSEDED
        if slot.compare_and_set(cur, new):
            return ACCEPTED


class CandidateQueue:
    """Append-only queue of (bound, leaf) filled by many threads.

    A slot is claimed with fetch-and-increment on the tail. Storage is a
    chain of fixed-size extents, each a ``(cells, next)`` pair whose link is
    extended by CAS. Readers run only after all writers' parts are done and
    skip holes left by crashed writers.
    """

    def __init__(self, extent=64):
        self.extent = extent
        self.tail = AtomicCounter()
        self._head = ([None] * extent, AtomicRef())
        self.sorted = AtomicRef()

    def put(self, bound, leaf):
        pos = self.tail.next()
        node = self._head
        for _ in range(pos // self.extent):
            link = node[1]
            if link.get() is None:
                link.compare_and_set(None, ([None] * self.extent, AtomicRef()))
            node = link.get()
        node[0][pos % self.extent] = (bound, pos, leaf)

    def items(self):
        out = []
        node = self._head
        while node is not None:
            out.extend(x for x in node[0] if x is not None)
            node = node[1].get()
        return out

    def __len__(self):
        return len(self.items())


class SortedView:
    """Queue entries ascending by bound, ties in insertion order.

    ``cutoff`` only ever shrinks; entries at or past it were pruned. A racy
    write may keep a larger cutoff, which only costs a few bound checks.
    """

    __slots__ = ("bounds", "leaves", "cutoff")

    def __init__(self, items):
        items = sorted(items, key=lambda x: (x[0], x[1]))
        self.bounds = [x[0] for x in items]
        self.leaves = [x[2] for x in items]
        self.cutoff = len(items)

    def __len__(self):
        return len(self.leaves)


def rs_sort(queues):
    """Sorted views of all queues, installing any that are missing."""
    out = []
    for q in queues:
        view = q.sorted.get()
        if view is None:
            q.sorted.compare_and_set(None, SortedView(q.items()))
            view = q.sorted.get()
        out.append(view)
    return out


def _leaf_for(tree, sym, b):
    """Leaf reached by routing ``sym`` from the root of subtree ``b``."""
    node = tree.subtree(b)
    while not node.is_leaf:
        slot = node.right if (sym[node.seg] >> node.shift) & 1 else node.left
        node = slot.get()
    return node


def refine_leaf(index, query, bounds, bsf, leaf):
    """Real distances for the members of ``leaf`` that pass the series bound."""
    ids = leaf_members(leaf)
    if not len(ids):
        return 0
    lb = bounds.series(index.words[ids])
    keep = ids[lb < bsf.value]
    if not len(keep):
        return 0
    diff = index.data[keep].astype(np.float64) - query
    d = np.einsum("ij,ij->i", diff, diff)
    j = int(np.argmin(d))  # members are sorted, so ties pick the lowest id
    update_bsf(bsf, d[j], keep[j])
    return len(keep)


def initial_bsf(index, query, bounds=None, sym=None):
    """BSF from the leaf the query itself would be stored in.

    When the query's root subtree is empty, the first non-empty leaf of the
    first non-empty subtree is used instead. Raises on an empty index.
    """
    tree = index.tree
    if sym is None:
        sym = isax_symbols(compute_paa(query, index.segments), index.table)
    if bounds is None:
        bounds = QueryBounds(compute_paa(query, index.segments),
                             len(query), index.table)
    b = int(root_indices(sym, index.table.max_bits))
    bsf = BestSoFar()
    if tree.subtree(b) is not None:
        leaf = _leaf_for(tree, sym.tolist(), b)
    else:
        leaf = None
        for c in range(len(tree.roots)):
            node = tree.subtree(c)
            if node is None:
                continue
            leaf = next((n for n in inorder(node) if n.is_leaf and n.occupancy()), None)
            if leaf is not None:
                break
        if leaf is None:
            raise ValueError("cannot answer a query on an empty index")
    refine_leaf(index, np.asarray(query, dtype=np.float64), bounds, bsf, leaf)
    return bsf


class QueryContext:
    """Per-query shared state: bounds table, BSF, queues and refresh plans."""

    def __init__(self, index, query, n_queues, epoch):
        q = np.asarray(query, dtype=np.float64)
        self.index = index
        self.query = q
        self.epoch = epoch
        paa = compute_paa(q, index.segments)
        self.bounds = QueryBounds(paa, len(q), index.table)
        sym = isax_symbols(paa, index.table)
        self.bsf = initial_bsf(index, q, self.bounds, sym)
        self.queues = [CandidateQueue() for _ in range(n_queues)]
        n_roots = len(index.tree.roots)
        self.ps_plan = RefreshPlan(n_roots, level=0, lazy_children=True)
        self.sort_plan = RefreshPlan(n_queues, level=0)
        self.rs_plan = RefreshPlan(n_queues, level=0, lazy_children=True)
        self.finished = False

    def _ps_child(self, b):
        root = self.index.tree.subtree(b)
        plan = RefreshPlan(total_nodes(root) if root is not None else 0, level=1)
        plan.payload = root
        return plan

    def _rs_child(self, j):
        view = rs_sort([self.queues[j]])[0]
        plan = RefreshPlan(len(view), level=1)
        plan.payload = view
        return plan

    def progress(self):
        """Fraction of this query's traverses handed out, in [0, 1]."""
        ps = min(self.ps_plan.counter.load(), self.ps_plan.k) / self.ps_plan.k
        rs = min(self.rs_plan.counter.load(), self.rs_plan.k) / self.rs_plan.k
        return 0.5 * ps + 0.5 * rs

    def answer(self):
        value, ref = self.bsf.get()
        return ref, math.sqrt(value)


def ps_traverse(ctx, worker):
    """Pruning traverse: queue every leaf whose bound beats the BSF."""
    epoch = ctx.epoch
    bounds = ctx.bounds
    bsf = ctx.bsf
    queues = ctx.queues
    nq = len(queues)

    def node_part(part):
        node = find_node(part.plan.payload, part.index)
        if node.ps_epoch == epoch:
            return
        if node.is_leaf:
            lb = bounds.node(node.offsets)
            if lb < bsf.value:
                worker.rr += 1
                queues[(worker.tid + worker.rr) % nq].put(lb, node)
        node.ps_epoch = epoch

    node_proc = processor(node_part)

    def subtree_part(part):
        plan = ctx.ps_plan.child(part.index, ctx._ps_child)
        if plan.k:
            refresh_run(plan, node_proc, worker, parent=part)

    return refresh_run(ctx.ps_plan, processor(subtree_part), worker)


def rs_traverse(ctx, worker):
    """Refinement traverse over the sorted queues; returns the final BSF."""
    epoch = ctx.epoch
    bsf = ctx.bsf

    def sort_part(part):
        rs_sort([ctx.queues[part.index]])

    refresh_run(ctx.sort_plan, processor(sort_part), worker)

    def leaf_part(part):
        view = part.plan.payload
        i = part.index
        if i >= view.cutoff:
            return
        if view.bounds[i] >= bsf.value:
            # later entries have larger bounds: prune the rest of the queue
            if i < view.cutoff:
                view.cutoff = i
            return
        leaf = view.leaves[i]
        if leaf.rs_epoch == epoch:
            return
        part.worker.checkpoint("mid-process", part)
        if part.finished:
            return
        refine_leaf(ctx.index, ctx.query, ctx.bounds, bsf, leaf)
        leaf.rs_epoch = epoch

    leaf_proc = processor(leaf_part)

    def queue_part(part):
        plan = ctx.rs_plan.child(part.index, ctx._rs_child)
        if plan.k:
            refresh_run(plan, leaf_proc, worker, parent=part)

    refresh_run(ctx.rs_plan, processor(queue_part), worker)
    return bsf


def run_query(ctx, worker):
    """All three traverses of one query for one worker."""
    if ctx.finished:
        return ctx.answer()
    ps_traverse(ctx, worker)
    rs_traverse(ctx, worker)
    ctx.finished = True
    return ctx.answer()


def answer_query(index, query, worker=None):
    """Single-caller convenience: (nearest series id, Euclidean distance)."""
    if worker is None:
        worker = Worker(0)
    ctx = QueryContext(index, query, 1, index.epochs.next())
    return run_query(ctx, worker)
