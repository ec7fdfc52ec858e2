"""Subtree sums for 0-1 weights under cuts, via packed counters.

The small structure keeps, per vertex, an exact subtree-sum array A that is
reconciled only every few operations: decrements accumulate in an array B of
small counters packed into one wide integer, and per-vertex descendant sets
live in packed bitmasks C.  A global table Q answers "sum of the counters of
B over a subset U" in one probe, so a query is ``A[v] - Q[B, C[v]]``.  Once
the counters could overflow, a *flush* folds B into A and zeroes it; a cut
flushes, recovers the vertex weights from A, and rebuilds A and C.

The recursive structure applies the cluster decomposition with a twist: a
tree of size n splits into at most 6*ell clusters of size at most n/ell, the
contracted cluster forest (at most 12*ell boundary vertices) is maintained by
one small structure D, and each cluster (minus its lower boundary vertex)
recurses with depth t-1.  Since contracted weights only ever decrease under
cuts, D needs nothing beyond decrement-weight.  With ell fixed this yields
~log n / log ell levels of constant-probe work per operation.

Wide values span several machine words at realistic word sizes; they are
plain Python integers here, and the resource that is actually capped is the
Q table's entry count.
"""

from __future__ import annotations

import math

from .clustering import InducedClusterForest, binarize, decompose
from .connectivity import DecrementalConnectivity
from .core import RootedForest, build_forest, guard_not_aux
from .errors import (
    CapExceeded,
    IllegalOperation,
    NegativeWeight,
    NonBinaryWeight,
    NoParent,
    TooLarge,
)
from .tree_sum_iterated import ComponentDispatch, check_binary

MAX_Q_ENTRIES = 1 << 24


class PackedCounters:
    """k counters of ceil(log2(k+1))+1 bits each, packed into one integer."""

    def __init__(self, k, vmax=None):
        self.k = k
        self.vmax = k if vmax is None else vmax
        self.width = math.ceil(math.log2(self.vmax + 1)) + 1
        self.mask = (1 << self.width) - 1
        self.bits = 0

    def get(self, i):
        return (self.bits >> (i * self.width)) & self.mask

    def incr(self, i):
        self.bits += 1 << (i * self.width)

    def clear(self):
        self.bits = 0

    def word(self, lo, count):
        """The raw bits of counters lo..lo+count-1."""
        return (self.bits >> (lo * self.width)) & ((1 << (count * self.width)) - 1)

    def unpack(self):
        return [self.get(i) for i in range(self.k)]


class DescendantBitsets:
    """k bitsets of k bits each in one integer: bit u of set v means u is a
    live descendant of v."""

    def __init__(self, k):
        self.k = k
        self.mask = (1 << k) - 1
        self.bits = 0

    def get(self, v):
        return (self.bits >> (v * self.k)) & self.mask

    def set(self, v, mask):
        shift = v * self.k
        self.bits = (self.bits & ~(self.mask << shift)) | (mask << shift)


class QTable:
    """Q[B', U] = sum of the counter array B' over the index subset U.

    Dense when the full (k+1)^k * 2^k table fits comfortably; the k = 8
    variant exceeds any sensible dense budget and is memoized lazily behind
    ``allow_large``.
    """

    DENSE_LIMIT = 1 << 22

    def __init__(self, k, allow_large=False):
        if k < 1 or k & (k - 1):
            raise ValueError("k must be a power of two")
        entries = (k + 1) ** k * (1 << k)
        if entries > MAX_Q_ENTRIES and not allow_large:
            raise CapExceeded(
                f"Q table for k={k} needs {entries} entries; pass allow_large=True"
            )
        self.k = k
        self.entries = entries
        self.width = math.ceil(math.log2(k + 1)) + 1
        self.digit_mask = (1 << self.width) - 1
        self.word_bits = k * self.width
        if entries <= self.DENSE_LIMIT:
            radix = k + 1
            base = [0] * radix**k
            for idx in range(radix**k):
                digits = []
                x = idx
                for _ in range(k):
                    digits.append(x % radix)
                    x //= radix
                base[idx] = digits
            self.table = [
                [sum(d for j, d in enumerate(digits) if u >> j & 1) for u in range(1 << k)]
                for digits in base
            ]
            self._lazy = None
        else:
            self.table = None
            self._lazy = {}

    def _digits_index(self, word):
        idx = 0
        mul = 1
        w = self.width
        m = self.digit_mask
        for _ in range(self.k):
            idx += (word & m) * mul
            mul *= self.k + 1
            word >>= w
        return idx

    def lookup(self, word, umask):
        """Sum of the packed counters in ``word`` over subset ``umask``."""
        if self.table is not None:
            return self.table[self._digits_index(word)][umask]
        key = (word, umask)
        v = self._lazy.get(key)
        if v is None:
            v = 0
            w = self.width
            m = self.digit_mask
            for i in range(self.k):
                if umask >> i & 1:
                    v += (word >> (i * w)) & m
            self._lazy[key] = v
        return v


_Q_CACHE = {}


def build_q_table(k, allow_large=False) -> QTable:
    key = (k, allow_large)
    t = _Q_CACHE.get(key)
    if t is None:
        t = QTable(k, allow_large)
        _Q_CACHE[key] = t
    return t


class SmallSubtreeSum:
    """Subtree sums on a forest of few vertices with delayed decrements.

    Weights are non-negative integers.  Between flushes at most
    ``q.k`` decrements accumulate and no cut happens; a query therefore is
    one A probe plus one Q probe per counter chunk.
    """

    def __init__(self, forest: RootedForest, weights, q: QTable, probes=None):
        self.forest = forest
        self.q = q
        self.probes = probes if probes is not None else [0]
        k = forest.n
        self.k = k
        self.chunks = (k + q.k - 1) // q.k
        self.kpad = self.chunks * q.k
        for v, w in enumerate(weights):
            if w < 0:
                raise NegativeWeight(f"initial weight of {v} is {w}")
        self.live_parent = list(forest.parent)
        self.live_children = [list(cs) for cs in forest.children]
        self.B = PackedCounters(self.kpad, vmax=q.k)
        self.C = DescendantBitsets(self.kpad)
        self.A = [0] * k
        self._rebuild(list(weights))
        self.pending = 0
        self.flush_count = 0
        self.root0 = forest.roots[0] if len(forest.roots) == 1 else None

    def _rebuild(self, w):
        """Recompute A and C bottom-up from explicit weights."""
        A = self.A
        C = self.C
        roots = [v for v in range(self.k) if self.live_parent[v] == -1]
        for r in roots:
            stack = [(r, 0)]
            while stack:
                v, ci = stack[-1]
                cs = self.live_children[v]
                if ci < len(cs):
                    stack[-1] = (v, ci + 1)
                    stack.append((cs[ci], 0))
                    continue
                stack.pop()
                a = w[v]
                m = 1 << v
                for c in cs:
                    a += A[c]
                    m |= C.get(c)
                A[v] = a
                C.set(v, m)
        for v in range(self.k, self.kpad):
            C.set(v, 1 << v)
        self.probes[0] += self.k

    def _pending_sum(self, mask):
        q = self.q
        total = 0
        B = self.B
        probes = 0
        for c in range(self.chunks):
            sub = (mask >> (c * q.k)) & ((1 << q.k) - 1)
            total += q.lookup(B.word(c * q.k, q.k), sub)
            probes += 1
        self.probes[0] += probes
        return total

    def subtree_sum(self, v):
        self.probes[0] += 1
        return self.A[v] - self._pending_sum(self.C.get(v))

    def weight_of(self, v):
        """Current weight of v, derived from A and the pending decrements."""
        w = self.A[v]
        for c in self.live_children[v]:
            w -= self.A[c]
        self.probes[0] += 1 + len(self.live_children[v])
        return w - self.B.get(v)

    def decrement_weight(self, v):
        if self.weight_of(v) < 1:
            raise NegativeWeight(f"decrement_weight({v}): weight already 0")
        self.B.incr(v)
        self.pending += 1
        self.probes[0] += 1
        if self.pending == self.q.k:
            self.flush()

    def flush(self):
        for v in range(self.k):
            self.A[v] -= self._pending_sum(self.C.get(v))
            self.probes[0] += 1
        self.B.clear()
        self.pending = 0
        self.flush_count += 1

    def cut(self, v):
        u = self.live_parent[v]
        if u == -1:
            raise NoParent(f"cut({v}): vertex has no live parent edge")
        self.flush()
        # recover weights from the now-exact subtree sums
        w = [self.A[x] - sum(self.A[c] for c in self.live_children[x]) for x in range(self.k)]
        self.probes[0] += self.k
        self.live_parent[v] = -1
        self.live_children[u].remove(v)
        self._rebuild(w)

    def root_sum(self):
        if self.root0 is None:
            raise IllegalOperation("root_sum needs a single-tree initial forest")
        return self.subtree_sum(self.root0)


def _build_recursive(tree, weights, ell, t, q, probes):
    if t == 1:
        if tree.n > ell:
            raise TooLarge(f"{tree.n} vertices exceed ell={ell} at depth 1")
        return SmallSubtreeSum(tree, weights, q, probes)
    return _RecursiveNode(tree, weights, ell, t, q, probes)


class _RecursiveNode:
    """One level of the recursive subtree-sum structure (single tree)."""

    def __init__(self, tree: RootedForest, weights, ell, t, q, probes):
        n = tree.n
        if n > ell**t:
            raise TooLarge(f"{n} vertices exceed ell^t = {ell**t}")
        self.forest = tree
        self.probes = probes
        self.conn = DecrementalConnectivity(tree)
        k_c = max(1, math.ceil(n / ell))
        self.decomp = decompose(tree, k_c)
        self.icf = InducedClusterForest(self.decomp, self.conn)
        self.bindex = self.decomp.boundary_index

        wprime = [0] * len(self.decomp.boundary)
        for c in self.decomp.clusters:
            if c.lb is not None:
                wprime[self.bindex[c.lb]] = weights[c.lb]
                if c.lb != c.ub:
                    wprime[self.bindex[c.ub]] = sum(
                        weights[x] for x in c.vertices if x != c.lb
                    )
            else:
                wprime[self.bindex[c.ub]] = sum(weights[x] for x in c.vertices)
        self.D = SmallSubtreeSum(self.decomp.cluster_tree_forest(), wprime, q, probes)
        self.ub_weight = [
            wprime[self.bindex[c.ub]] if c.lb != c.ub else 0
            for c in self.decomp.clusters
        ]

        self.local_index = [None] * len(self.decomp.clusters)
        self.inner = []
        for c in self.decomp.clusters:
            vs = [x for x in c.vertices if x != c.lb]
            if not vs:
                self.local_index[c.id] = None
                self.inner.append(None)
                continue
            loc = {x: i for i, x in enumerate(vs)}
            self.local_index[c.id] = loc
            parents = [loc.get(tree.parent[x], -1) for x in vs]
            sub = build_forest(parents, [tree.aux[x] for x in vs])
            self.inner.append(
                _build_recursive(sub, [weights[x] for x in vs], ell, t - 1, q, probes)
            )
        self.root0 = tree.roots[0]

    def subtree_sum(self, v):
        c = self.decomp.clusters[self.decomp.cluster_of[v]]
        if v == c.ub or v == c.lb:
            return self.D.subtree_sum(self.bindex[v])
        inner = self.inner[c.id]
        s = inner.subtree_sum(self.local_index[c.id][v])
        if c.lb is not None and self.conn.ancestor(v, c.lb):
            s += self.D.subtree_sum(self.bindex[c.lb])
        return s

    def cut(self, v):
        if self.conn.parent_of(v) == -1:
            raise NoParent(f"cut({v}): vertex has no live parent edge")
        self.conn.cut(v)
        removed = self.icf.on_cut(v)
        if removed is not None:
            self.D.cut(self.bindex[removed[0]])
        c = self.decomp.clusters[self.decomp.cluster_of[v]]
        if v == c.ub or v == c.lb:
            return
        inner = self.inner[c.id]
        inner.cut(self.local_index[c.id][v])
        new_sum = inner.root_sum()
        # the contracted weight of the upper boundary only ever decreases
        for _ in range(self.ub_weight[c.id] - new_sum):
            self.D.decrement_weight(self.bindex[c.ub])
        self.ub_weight[c.id] = new_sum

    def root_sum(self):
        return self.D.subtree_sum(self.bindex[self.root0])


class RecursiveSubtreeSum:
    """Parameterized recursive structure over one binary 0-1-weighted tree."""

    def __init__(self, tree: RootedForest, weights, ell, t, q_table=None, probes=None):
        if ell < 2 or ell & (ell - 1):
            raise ValueError("ell must be a power of two >= 2")
        check_binary(tree)
        if len(tree.roots) != 1:
            raise TooLarge("RecursiveSubtreeSum expects a single tree")
        q = q_table if q_table is not None else build_q_table(4)
        self.probes = probes if probes is not None else [0]
        self._impl = _build_recursive(tree, weights, ell, t, q, self.probes)

    def subtree_sum(self, v):
        return self._impl.subtree_sum(v)

    def cut(self, v):
        self._impl.cut(v)

    def root_sum(self):
        return self._impl.root_sum()


class _SubtreeDispatcher:
    """Shared top level: binarize, then one recursive structure per tree."""

    def __init__(self, forest: RootedForest, weights, ell, q_k):
        self.n = forest.n
        bf, bw, _ = binarize(forest, weights)
        self.forest = bf
        q = build_q_table(q_k)
        self.probes = [0]
        self.ell = ell

        def builder(tree, w):
            t = max(1, math.ceil(math.log(max(2 * tree.n, 2), ell)))
            return _build_recursive(tree, w, ell, t, q, self.probes)

        self._impl = ComponentDispatch(bf, bw, builder)

    def subtree_sum(self, v):
        guard_not_aux(self.forest, v)
        self.probes[0] += 1
        return self._impl.subtree_sum(v)

    def cut(self, v):
        guard_not_aux(self.forest, v)
        self.probes[0] += 1
        self._impl.cut(v)

    def probe_count(self):
        return self.probes[0] + _collect_touches(self._impl)

    def counters(self):
        return {"probes": self.probe_count()}


class SubtreeSize01(_SubtreeDispatcher):
    """Subtree sums for a 0-1-weighted forest under cuts (no weight updates).

    Binarizes the input, then runs the recursive structure per component
    with ell = 2 and t = ceil(log_ell(2 n)).  Answers are plain integers.
    """

    def __init__(self, forest: RootedForest, weights, ell=2, q_k=4):
        for v, x in enumerate(weights):
            if x not in (0, 1):
                raise NonBinaryWeight(f"weight of vertex {v} is {x!r}")
        super().__init__(forest, weights, ell, q_k)


class WeightedSubtreeSum(_SubtreeDispatcher):
    """Subtree sums under cuts for non-negative integer weights.

    Same machinery as :class:`SubtreeSize01`; only the per-operation
    amortization degrades with the total weight.  Used for workloads whose
    leaf weights are not 0-1.
    """

    def __init__(self, forest: RootedForest, weights, ell=2, q_k=4):
        for v, x in enumerate(weights):
            if not isinstance(x, int) or x < 0:
                raise NegativeWeight(f"weight of vertex {v} is {x!r}")
        super().__init__(forest, weights, ell, q_k)


def _collect_touches(impl):
    total = 0
    if isinstance(impl, ComponentDispatch):
        for s in impl.structures:
            total += _collect_touches(s)
    elif isinstance(impl, _RecursiveNode):
        total += impl.conn.touches
        for s in impl.inner:
            if s is not None:
                total += _collect_touches(s)
    return total
