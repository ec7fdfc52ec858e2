"""Tree sums with O(1) queries and weight updates.

Each current root r stores its component's total weight S[r]; a tree-sum is
a root lookup, and an update adjusts the root's total with one addition and
one subtraction.  A cut re-sums the smaller of the two new components (found
by the connectivity layer's interleaved traversal) and derives the larger
side's total with a single subtraction from the old component total, so a
full deletion sequence costs O(n log n) group operations overall.
"""

from __future__ import annotations

from .connectivity import CHILD_SIDE, DecrementalConnectivity
from .core import Group, RootedForest, guard_not_aux


class SimpleTreeSum:
    def __init__(self, forest: RootedForest, weights, group: Group):
        self.forest = forest
        self.group = group
        self.conn = DecrementalConnectivity(forest)
        self.w = list(weights)
        # S keyed by current root id; entries for ex-roots go stale and are
        # simply never read again.
        self.S = [None] * forest.n
        add = group.add
        for r in forest.roots:
            acc = self.w[r]
            stack = list(forest.children[r])
            while stack:
                x = stack.pop()
                acc = add(acc, self.w[x])
                stack.extend(forest.children[x])
            self.S[r] = acc

    def tree_sum(self, v):
        guard_not_aux(self.forest, v)
        return self.S[self.conn.root(v)]

    def update_weight(self, v, x):
        guard_not_aux(self.forest, v)
        y = self.w[v]
        self.w[v] = x
        r = self.conn.root(v)
        g = self.group
        self.S[r] = g.sub(g.add(self.S[r], x), y)

    def cut_report(self, v):
        """Cut v's parent edge; returns (sum at v's side, sum at parent's side)."""
        guard_not_aux(self.forest, v)
        r = self.conn.root(v)
        total = self.S[r]
        side, vertices = self.conn.cut(v)
        w = self.w
        add = self.group.add
        acc = w[vertices[0]]
        for i in range(1, len(vertices)):
            acc = add(acc, w[vertices[i]])
        other = self.group.sub(total, acc)
        if side == CHILD_SIDE:
            self.S[v] = acc
            self.S[r] = other
            return acc, other
        self.S[r] = acc
        self.S[v] = other
        return other, acc

    def cut(self, v):
        self.cut_report(v)

    def counters(self):
        g = self.group
        if hasattr(g, "snapshot"):
            out = g.snapshot()
        else:
            out = {}
        out["touches"] = self.conn.touches
        return out
