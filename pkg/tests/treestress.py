"""Schedule-controlled insert/contains stress on one subtree.

Each schedule: ``n`` threads insert disjoint id sets (random mix of
expeditive and standard mode) and interleave membership probes. A thread
that claims the last slot of a leaf is parked with some probability, so
splits race with stalled writers. Every operation is recorded as an
(invocation, response) interval on a global step clock and checked per key
afterwards.
"""

import numpy as np

from seriesindex.schedule import Scheduler
from seriesindex.tree import IndexTree

from . import oracles


def make_words(rng, count, segments, max_bits, low_card):
    top = 1 << (max_bits - 1)  # leading bit 0 everywhere: all in subtree 0
    if low_card:
        pool = rng.integers(0, top, size=(3, segments))
        return pool[rng.integers(0, 3, size=count)].astype(np.uint8)
    return rng.integers(0, top, size=(count, segments)).astype(np.uint8)


class History:
    def __init__(self):
        self.clock = 0
        self.ops = []  # (kind, key, result, inv, resp)

    def tick(self):
        self.clock += 1
        return self.clock


def check_history(history, keys):
    """Per-key linearizability for a grow-only set with one insert per key.

    A witness exists iff some instant t inside the insert's interval lies
    after every invocation of a probe that answered False and before every
    response of a probe that answered True.
    """
    by_key = {}
    for op in history.ops:
        by_key.setdefault(op[1], []).append(op)
    errors = []
    for key, ops in by_key.items():
        ins = [o for o in ops if o[0] == "insert"]
        if len(ins) != 1:
            errors.append((key, "insert count", len(ins)))
            continue
        _, _, _, i_inv, i_resp = ins[0]
        lo = max([i_inv] + [o[3] for o in ops if o[0] == "contains" and not o[2]])
        hi = min([i_resp] + [o[4] for o in ops if o[0] == "contains" and o[2]])
        if lo > hi:
            errors.append((key, "no linearization point", ops))
    return errors


def check_structure(tree, b, leaf_size, inserted, words):
    root = tree.subtree(b)
    tree.finish(b)
    errors = []
    nodes = oracles.inorder(root)
    for node in nodes:
        if node.is_leaf:
            occ = len(node.entries())
            if occ > leaf_size and not node.maxed:
                errors.append(("overfull", node.key, occ))
        else:
            if node.cnt != oracles.size(node.left.get()):
                errors.append(("cnt", node.key, node.cnt))
            for child in (node.left.get(), node.right.get()):
                if sum(child.key.bits) != sum(node.key.bits) + 1:
                    errors.append(("refine", node.key, child.key))
    for sid in inserted:
        sym = words[sid].tolist()
        if not tree.contains(b, sid, sym):
            errors.append(("lost", sid))
        # the key must route to a leaf whose word covers it
        node = root
        while not node.is_leaf:
            node = (node.right if (sym[node.seg] >> node.shift) & 1 else node.left).get()
        for s, (k, kb) in enumerate(zip(node.key.symbols, node.key.bits)):
            if sym[s] >> (tree.max_bits - kb) != k:
                errors.append(("prefix", sid))
    return errors


def run_schedule(seed, *, n_threads=8, inserts=100, leaf_size=4, segments=4,
                 max_bits=4, low_card=None, park_p=0.5, probes=0.3):
    rng = np.random.default_rng(seed)
    if low_card is None:
        low_card = seed % 5 == 0
    words = make_words(rng, inserts, segments, max_bits, low_card)
    tree = IndexTree(words, leaf_size, n_threads, max_bits)
    history = History()
    plans = [[] for _ in range(n_threads)]
    for sid in range(inserts):
        plans[sid % n_threads].append(sid)
    modes = rng.random(inserts) < 0.5
    probe_rng = np.random.default_rng(seed + 1)

    def park(tid, name, srng):
        return name == "leaf-last-slot" and srng.random() < park_p

    sched = Scheduler(n_threads, seed, suspend=park)

    def hook_for(tid):
        def hook(name, leaf, pos):
            if name == "leaf-claimed" and pos == leaf_size - 1:
                name = "leaf-last-slot"
            sched.point(tid, name)
        return hook

    def body(tid):
        hook = hook_for(tid)
        for sid in plans[tid]:
            inv = history.tick()
            sched.point(tid, "insert")
            tree.insert(0, sid, words[sid].tolist(), tid, bool(modes[sid]), hook)
            history.ops.append(("insert", sid, True, inv, history.tick()))
            if probe_rng.random() < probes:
                key = int(probe_rng.integers(0, inserts))
                inv = history.tick()
                found = tree.contains(0, key, words[key].tolist(), hook)
                history.ops.append(("contains", key, found, inv, history.tick()))
            sched.point(tid, "after-insert")

    sched.run(body)
    errors = check_history(history, range(inserts))
    errors += check_structure(tree, 0, leaf_size, range(inserts), words)
    overflow = any(n.is_leaf and len(n.entries()) > leaf_size
                   for n in oracles.inorder(tree.subtree(0)))
    return errors, overflow, sched
