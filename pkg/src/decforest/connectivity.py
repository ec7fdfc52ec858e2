"""Decremental forest connectivity: cut, root, connected, ancestor.

Queries are O(1) probes; all the work happens inside ``cut``, which discovers
the smaller side of the split with two interleaved traversals and relabels
it.  Each vertex is relabeled at most log2(n) times (its component at least
halves each time), so total relabeling work over any deletion sequence is
O(n log n) vertex touches.  The ``touches`` counter exposes that total.

``ancestor(u, v)`` holds iff u is an ancestor of v in the original forest and
the two vertices are still connected, so it reduces to the static pre/post
test plus a label comparison.
"""

from __future__ import annotations

from .core import RootedForest, guard_not_aux, is_ancestor_static
from .errors import NoParent

CHILD_SIDE = "child"
PARENT_SIDE = "parent"


class DecrementalConnectivity:
    def __init__(self, forest: RootedForest):
        self.forest = forest
        n = forest.n
        self.live_parent = list(forest.parent)
        self.live_children = [list(cs) for cs in forest.children]
        self.label = [0] * n
        self.label_root = {}
        self.touches = 0
        lab = 0
        for r in forest.roots:
            stack = [r]
            while stack:
                x = stack.pop()
                self.label[x] = lab
                stack.extend(forest.children[x])
            self.label_root[lab] = r
            lab += 1
        self._next_label = lab

    def root(self, v: int) -> int:
        self.forest.check_vertex(v)
        return self.label_root[self.label[v]]

    def connected(self, u: int, v: int) -> bool:
        self.forest.check_vertex(u)
        self.forest.check_vertex(v)
        return self.label[u] == self.label[v]

    def ancestor(self, u: int, v: int) -> bool:
        return is_ancestor_static(self.forest, u, v) and self.label[u] == self.label[v]

    def parent_of(self, v: int) -> int:
        """Live parent of v, or -1 if v is currently a root."""
        return self.live_parent[v]

    def cut(self, v: int):
        """Delete the edge between v and its parent.

        Returns ``(side, vertices)`` where ``vertices`` is the complete
        vertex list of the smaller of the two new components and ``side``
        says whether that is v's side (CHILD_SIDE) or the former parent's
        (PARENT_SIDE).  Ties go to the child side.  Callers are free to use
        the list, e.g. to re-sum weights over exactly the smaller component.
        """
        guard_not_aux(self.forest, v)
        u = self.live_parent[v]
        if u == -1:
            raise NoParent(f"cut({v}): vertex has no live parent edge")
        self.live_parent[v] = -1
        self.live_children[u].remove(v)

        lab = self.label[v]
        r = self.label_root[lab]
        children = self.live_children
        # Two interleaved DFS cursors, strictly one vertex per side per step.
        # A side is finished when its stack empties; the child side moves
        # first, so equal sizes finish the child side first.
        sa = [v]
        sb = [r]
        va = []
        vb = []
        while True:
            if sa:
                x = sa.pop()
                va.append(x)
                sa.extend(children[x])
            else:
                side = CHILD_SIDE
                break
            if sb:
                x = sb.pop()
                vb.append(x)
                sb.extend(children[x])
            else:
                side = PARENT_SIDE
                break
        self.touches += len(va) + len(vb)

        new_lab = self._next_label
        self._next_label += 1
        label = self.label
        if side == CHILD_SIDE:
            for x in va:
                label[x] = new_lab
            self.label_root[new_lab] = v
            return CHILD_SIDE, va
        for x in vb:
            label[x] = new_lab
        self.label_root[new_lab] = r
        self.label_root[lab] = v
        return PARENT_SIDE, vb
