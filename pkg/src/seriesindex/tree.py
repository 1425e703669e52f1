"""Lock-free leaf-oriented iSAX tree with fat leaves.

The forest has one subtree per root buffer (2**w of them). Data live only in
leaves. A leaf holds up to ``M`` series ids in ``D``; inserters claim a slot
with fetch-and-increment on ``elements`` and then write it. The thread that
claims a slot past the end builds a replacement subtree privately and
installs it with a single CAS on the parent's child reference.

Inserts come in two flavours. *Standard* inserts publish an announcement in
the leaf before claiming a slot, so a concurrent split picks the pair up even
if its owner stalls between the claim and the write. *Expeditive* inserts
skip the announcement and instead re-validate after writing: if the leaf was
replaced or is being split they redo the insert in standard mode.

Series ids are the stored pairs; their words live in a shared symbol table
(``words[id]``, full cardinality), so routing and splitting only need ids.

Leaves whose segments are all at ``max_bits`` cannot be refined and grow past
``M`` through a chain of overflow extents.

Once a subtree is complete its child references are sealed (marked), which
makes any late duplicate insert from a slow thread abandon instead of
restructuring the finished subtree. ``cnt`` fields and leaf member arrays are
computed afterwards by an idempotent fix-up pass.
"""

import numpy as np

from ._atomic import AtomicCounter, AtomicRef
from .summaries import ISAXWord, QueryBounds

__all__ = [
    "Announcement",
    "Extent",
    "IndexTree",
    "Internal",
    "Leaf",
    "dump_subtree",
    "find_node",
    "inorder",
    "leaf_members",
    "total_nodes",
]


class Announcement:
    __slots__ = ("sid",)

    def __init__(self, sid):
        self.sid = sid

    def __repr__(self):
        return f"Announcement({self.sid})"


class Extent:
    """Fixed-size overflow block chained behind a max-cardinality leaf."""

    __slots__ = ("data", "next")

    def __init__(self, size):
        self.data = [None] * size
        self.next = AtomicRef()


class _Node:
    __slots__ = ("key", "cnt", "ps_epoch", "rs_epoch", "applied", "_offsets")

    is_leaf = False

    def __init__(self, key):
        self.key = key
        self.cnt = 0
        self.ps_epoch = -1
        self.rs_epoch = -1
        self.applied = {}  # tid -> Announcement carried in by the split that made this node
        self._offsets = None

    @property
    def offsets(self):
        """Lookup-table columns of this node's word (see QueryBounds)."""
        off = self._offsets
        if off is None:
            off = self._offsets = QueryBounds.offsets(self.key)
        return off


class Internal(_Node):
    """Routing node; children are ``AtomicRef`` slots and never replaced
    except by a split of the leaf they hold."""

    __slots__ = ("seg", "shift", "left", "right")

    def __init__(self, key, seg, shift, left, right):
        super().__init__(key)
        self.seg = seg
        self.shift = shift
        self.left = AtomicRef(left)
        self.right = AtomicRef(right)

    def __repr__(self):
        return f"Internal({self.key}, seg={self.seg}, cnt={self.cnt})"


class Leaf(_Node):
    __slots__ = ("D", "elements", "announce", "helpers_exist", "splitting",
                 "maxed", "overflow", "members")

    is_leaf = True

    def __init__(self, key, capacity, n_threads, entries=(), maxed=False):
        super().__init__(key)
        self.D = [None] * capacity
        self.announce = [None] * n_threads
        self.helpers_exist = False
        self.splitting = False
        self.maxed = maxed
        self.overflow = AtomicRef()
        self.members = None
        entries = list(entries)
        head = entries[:capacity]
        self.D[: len(head)] = head
        if len(entries) > capacity:
            if not maxed:
                raise ValueError("only max-cardinality leaves may overflow")
            rest = entries[capacity:]
            tail = self.overflow
            for i in range(0, len(rest), capacity):
                ext = Extent(capacity)
                block = rest[i : i + capacity]
                ext.data[: len(block)] = block
                tail.set(ext)
                tail = ext.next
        self.elements = AtomicCounter(len(entries))

    def occupancy(self):
        """Filled slots in D (holes left by crashed writers are not counted)."""
        return sum(1 for x in self.D if x is not None)

    def entries(self):
        out = [x for x in self.D if x is not None]
        ext = self.overflow.get()
        while ext is not None:
            out.extend(x for x in ext.data if x is not None)
            ext = ext.next.get()
        return out

    def __repr__(self):
        return f"Leaf({self.key}, occ={self.occupancy()}, maxed={self.maxed})"


class IndexTree:
    """Forest of 2**w subtrees over a shared symbol table.

    Parameters
    ----------
    words : ndarray of shape (count, w)
        Full-cardinality symbols of every series id that may be inserted.
    leaf_size : int
        Leaf capacity ``M``.
    n_threads : int
        Number of thread ids (announcement slots per leaf).
    max_bits : int
        Maximum bits per segment.
    """

    def __init__(self, words, leaf_size, n_threads, max_bits=8):
        if leaf_size < 1:
            raise ValueError("leaf_size must be positive")
        self.words = words
        self.segments = words.shape[1]
        self.leaf_size = leaf_size
        self.n_threads = n_threads
        self.max_bits = max_bits
        self.roots = [AtomicRef() for _ in range(1 << self.segments)]

    def root_key(self, b):
        w = self.segments
        symbols = tuple((b >> (w - 1 - s)) & 1 for s in range(w))
        return ISAXWord(symbols, (1,) * w)

    def _new_leaf(self, key, entries=()):
        maxed = min(key.bits) >= self.max_bits
        return Leaf(key, self.leaf_size, self.n_threads, entries, maxed)

    def root(self, b):
        """Root slot of subtree ``b``, installing an empty leaf on first use."""
        slot = self.roots[b]
        if slot.get() is None:
            slot.compare_and_set(None, self._new_leaf(self.root_key(b)))
        return slot

    # insertion

    def _descend(self, slot, sym):
        node = slot.get()
        while not node.is_leaf:
            slot = node.right if (sym[node.seg] >> node.shift) & 1 else node.left
            node = slot.get()
        return slot, node

    def insert(self, b, sid, sym, tid, standard=False, hook=None):
        """Insert id ``sid`` (symbols ``sym``) into subtree ``b``.

        Returns False only when the subtree was sealed, i.e. the insert is a
        late duplicate of work someone else already completed.
        """
        root = self.root(b)
        if not standard:
            slot, leaf = self._descend(root, sym)
            pos = leaf.elements.next()
            if leaf.maxed:
                self._place(leaf, pos, sid)
                return True
            if pos < self.leaf_size:
                if hook is not None:
                    hook("leaf-claimed", leaf, pos)
                leaf.D[pos] = sid
                if hook is not None:
                    hook("before-validate", leaf, pos)
                if slot.get() is leaf and not leaf.splitting:
                    return True
            # replaced, being split or full: redo with announcement
        return self._insert_standard(root, sid, sym, tid, hook)

    def _insert_standard(self, root, sid, sym, tid, hook):
        ann = Announcement(sid)
        M = self.leaf_size
        while True:
            slot, leaf = self._descend(root, sym)
            if slot.marked:
                return False
            if leaf.maxed:
                self._place(leaf, leaf.elements.next(), sid)
                return True
            leaf.helpers_exist = True
            leaf.announce[tid] = ann
            pos = leaf.elements.next()
            if pos < M:
                if hook is not None:
                    hook("leaf-claimed", leaf, pos)
                leaf.D[pos] = sid
                leaf.announce[tid] = None
                return True
            leaf.splitting = True
            if hook is not None:
                hook("before-split", leaf, pos)
            new = self.split_leaf(leaf, sid)
            if hook is not None:
                hook("before-split-install", leaf, pos)
            if slot.compare_and_set(leaf, new):
                return True
            if slot.marked:
                return False
            if slot.get().applied.get(tid) is ann:
                return True

    def _place(self, leaf, pos, sid):
        M = self.leaf_size
        if pos < M:
            leaf.D[pos] = sid
            return
        idx = pos - M
        link = leaf.overflow
        for _ in range(idx // M + 1):
            ext = link.get()
            if ext is None:
                link.compare_and_set(None, Extent(M))
                ext = link.get()
            target = ext
            link = ext.next
        target.data[idx % M] = sid

    def split_leaf(self, leaf, sid=None):
        """Replacement subtree for a full leaf, built privately.

        Gathers the announcements first and the slots second, plus ``sid``
        when the caller is an inserter; the result records which
        announcements it applied so their owners can stop retrying.
        """
        applied = {}
        items = []
        for t, ann in enumerate(leaf.announce):
            if ann is not None:
                applied[t] = ann
                items.append(ann.sid)
        items.extend(x for x in leaf.D if x is not None)
        if sid is not None:
            items.append(sid)
        entries = list(dict.fromkeys(items))
        new = self._build(leaf.key, np.asarray(entries, dtype=np.int64))
        new.applied = applied
        return new

    def _build(self, key, ids):
        if len(ids) <= self.leaf_size or min(key.bits) >= self.max_bits:
            return self._new_leaf(key, ids.tolist())
        bits = key.bits
        seg = int(np.argmin(bits))
        nb = bits[seg] + 1
        shift = self.max_bits - nb
        side = (self.words[ids, seg] >> shift) & 1
        symbols = list(key.symbols)
        new_bits = list(bits)
        new_bits[seg] = nb
        symbols[seg] = key.symbols[seg] << 1
        lkey = ISAXWord(tuple(symbols), tuple(new_bits))
        symbols[seg] |= 1
        rkey = ISAXWord(tuple(symbols), tuple(new_bits))
        left = self._build(lkey, ids[side == 0])
        right = self._build(rkey, ids[side == 1])
        return Internal(key, seg, shift, left, right)

    # lookups and finishing

    def contains(self, b, sid, sym, hook=None):
        """Membership test that may run concurrently with inserts.

        A leaf's answer counts only if the leaf is still installed and not
        being split once it has been read; a split left pending by a
        stalled thread is completed here first.
        """
        if self.roots[b].get() is None:
            return False
        while True:
            slot, leaf = self._descend(self.roots[b], sym)
            found = sid in leaf.entries()
            if slot.get() is leaf and (not leaf.splitting or slot.marked):
                return found
            if slot.get() is leaf:
                slot.compare_and_set(leaf, self.split_leaf(leaf))
            if hook is not None:
                hook("contains-retry", leaf, None)

    def seal(self, b):
        """Freeze subtree ``b``: no further split can be installed in it."""
        stack = [self.roots[b]]
        while stack:
            slot = stack.pop()
            slot.mark()
            node = slot.get()
            if node is not None and not node.is_leaf:
                stack.append(node.left)
                stack.append(node.right)

    def finish(self, b):
        """Seal, then set cnt fields and cache leaf members. Idempotent."""
        self.seal(b)
        root = self.roots[b].get()
        if root is not None:
            _fixup(root)

    def subtree(self, b):
        return self.roots[b].get()


def _fixup(root):
    # iterative post-order; returns subtree size
    sizes = {}
    stack = [(root, False)]
    while stack:
        node, seen = stack.pop()
        if node.is_leaf:
            if node.members is None:
                node.members = np.unique(np.asarray(node.entries(), dtype=np.int64))
            sizes[id(node)] = 1
            continue
        left, right = node.left.get(), node.right.get()
        if not seen:
            stack.append((node, True))
            stack.append((right, False))
            stack.append((left, False))
            continue
        ls = sizes.pop(id(left))
        node.cnt = ls
        sizes[id(node)] = ls + sizes.pop(id(right)) + 1
    return sizes[id(root)]


def leaf_members(leaf):
    if leaf.members is None:
        return np.unique(np.asarray(leaf.entries(), dtype=np.int64))
    return leaf.members


def find_node(root, i):
    """Node of inorder rank ``i`` (0-based) using the ``cnt`` fields."""
    if root is None or i < 0:
        raise IndexError(f"rank {i} out of range")
    node = root
    base = 0
    while True:
        rank = base + node.cnt
        if i == rank:
            return node
        if node.is_leaf:
            raise IndexError(f"rank {i} out of range")
        if i < rank:
            node = node.left.get()
        else:
            base = rank + 1
            node = node.right.get()


def total_nodes(root):
    total = 0
    node = root
    while node is not None:
        total += node.cnt + 1
        node = None if node.is_leaf else node.right.get()
    return total


def inorder(root):
    """Recursive-free inorder walk, for checks and dumps."""
    out = []
    stack = []
    node = root
    while stack or node is not None:
        while node is not None:
            stack.append(node)
            node = None if node.is_leaf else node.left.get()
        node = stack.pop()
        out.append(node)
        node = None if node.is_leaf else node.right.get()
    return out


def dump_subtree(root):
    """Deterministic preorder text: one line per node, keys and occupancy."""
    if root is None:
        return ""
    lines = []
    stack = [(root, 0)]
    while stack:
        node, depth = stack.pop()
        pad = "  " * depth
        if node.is_leaf:
            tag = " overflow" if node.maxed and len(node.entries()) > len(node.D) else ""
            lines.append(f"{pad}L [{node.key}] {len(set(node.entries()))}{tag}")
        else:
            lines.append(f"{pad}I [{node.key}] seg={node.seg} cnt={node.cnt}")
            stack.append((node.right.get(), depth + 1))
            stack.append((node.left.get(), depth + 1))
    return "\n".join(lines)
