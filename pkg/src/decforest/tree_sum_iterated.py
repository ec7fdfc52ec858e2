"""The cluster reduction for tree sums, and its iteration.

One :class:`ClusterReduction` instance handles a single binary tree: it is
decomposed once into clusters of size at most k, a :class:`SimpleTreeSum`
instance D maintains the contracted weighted cluster forest, and each cluster
keeps an inner structure X_C (built by a caller-supplied factory) for the
queries that stay entirely inside the cluster.  Every external operation
costs O(1) work at this level plus at most one operation on one X_C, so
stacking the reduction t times and bottoming out at :class:`SimpleTreeSum`
gives the t-level structure :class:`IteratedTreeSum`.

The contracted weights: the upper boundary of a cluster carries the total
weight of the cluster vertices still connected to it, and the lower boundary
carries the total connected to it but not to the upper one (zero while both
are connected).  For any boundary vertex the tree sums of the real forest
and of the contracted forest agree, which is what makes delegation to D
sound.
"""

from __future__ import annotations

import math

from .clustering import ClusterDecomposition, InducedClusterForest, decompose
from .connectivity import DecrementalConnectivity
from .core import Group, RootedForest, build_forest, guard_not_aux, log_star
from .errors import NoParent, NotBinary
from .tree_sum_simple import SimpleTreeSum


def default_cluster_size(n: int) -> int:
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def check_binary(forest: RootedForest):
    for v, cs in enumerate(forest.children):
        if len(cs) > 2:
            raise NotBinary(f"vertex {v} has {len(cs)} children")


class ClusterReduction:
    """One reduction level over a single binary tree (ids local to it)."""

    def __init__(self, tree: RootedForest, weights, group: Group, k, child_factory):
        if len(tree.roots) != 1:
            raise NotBinary("ClusterReduction expects a single tree")
        self.forest = tree
        self.group = group
        self.w = list(weights)
        self.conn = DecrementalConnectivity(tree)
        self.decomp = decompose(tree, k)
        self.icf = InducedClusterForest(self.decomp, self.conn)
        self.bindex = self.decomp.boundary_index

        # contracted forest weights: cluster totals sit on the upper boundary
        g = group
        wprime = [g.zero()] * len(self.decomp.boundary)
        for c in self.decomp.clusters:
            acc = self.w[c.vertices[0]]
            for i in range(1, len(c.vertices)):
                acc = g.add(acc, self.w[c.vertices[i]])
            wprime[self.bindex[c.ub]] = acc
            if c.lb is not None and c.lb != c.ub:
                wprime[self.bindex[c.lb]] = g.zero()
        self.D = SimpleTreeSum(self.decomp.cluster_tree_forest(), wprime, group)

        # per-cluster inner structures over the induced subtrees F[C]
        self.local_index = [None] * len(self.decomp.clusters)
        self.inner = []
        for c in self.decomp.clusters:
            loc = {x: i for i, x in enumerate(c.vertices)}
            self.local_index[c.id] = loc
            parents = [
                loc.get(tree.parent[x], -1) if tree.parent[x] != -1 else -1
                for x in c.vertices
            ]
            sub = build_forest(parents, [tree.aux[x] for x in c.vertices])
            self.inner.append(child_factory(sub, [self.w[x] for x in c.vertices]))
        self.inner_calls = 0
        self.d_cuts = 0

    def _cluster(self, v):
        return self.decomp.clusters[self.decomp.cluster_of[v]]

    def _boundary_sum(self, v, c):
        """Component sum via D if v reaches a boundary vertex of c, else None."""
        if self.conn.connected(v, c.ub):
            return self.D.tree_sum(self.bindex[c.ub])
        if c.lb is not None and c.lb != c.ub and self.conn.connected(v, c.lb):
            return self.D.tree_sum(self.bindex[c.lb])
        return None

    def tree_sum(self, v):
        guard_not_aux(self.forest, v)
        c = self._cluster(v)
        s = self._boundary_sum(v, c)
        if s is not None:
            return s
        self.inner_calls += 1
        return self.inner[c.id].tree_sum(self.local_index[c.id][v])

    def update_weight(self, v, x):
        guard_not_aux(self.forest, v)
        y = self.w[v]
        self.w[v] = x
        c = self._cluster(v)
        self.inner_calls += 1
        self.inner[c.id].update_weight(self.local_index[c.id][v], x)
        if self.conn.connected(v, c.ub):
            b = c.ub
        elif c.lb is not None and c.lb != c.ub and self.conn.connected(v, c.lb):
            b = c.lb
        else:
            return
        g = self.group
        bi = self.bindex[b]
        self.D.update_weight(bi, g.add(self.D.w[bi], g.sub(x, y)))

    def cut_report(self, v):
        guard_not_aux(self.forest, v)
        u = self.conn.parent_of(v)
        if u == -1:
            raise NoParent(f"cut({v}): vertex has no live parent edge")
        c = self._cluster(v)
        cross = self.decomp.cluster_of[u] != c.id
        self.conn.cut(v)
        removed = self.icf.on_cut(v)
        if cross:
            # v is the upper boundary of its cluster: the cut edge is an edge
            # of the contracted forest, so D answers for both sides directly.
            return self.D.cut_report(self.bindex[v])

        if removed is not None:
            self.d_cuts += 1
            self.D.cut_report(self.bindex[removed[0]])
        self.inner_calls += 1
        loc = self.local_index[c.id]
        xv, xu = self.inner[c.id].cut_report(loc[v])

        # Re-derive the contracted weights that the cut may have changed.
        # The upper boundary keeps u's side (it can never stay with v), and
        # the lower boundary matters only while it is severed from the upper.
        conn = self.conn
        if conn.connected(c.ub, u):
            self.D.update_weight(self.bindex[c.ub], xu)
        if c.lb is not None and c.lb != c.ub and not conn.connected(c.lb, c.ub):
            if conn.connected(c.lb, u):
                self.D.update_weight(self.bindex[c.lb], xu)
            elif conn.connected(c.lb, v):
                self.D.update_weight(self.bindex[c.lb], xv)

        sv = self._boundary_sum(v, c)
        su = self._boundary_sum(u, c)
        return (xv if sv is None else sv), (xu if su is None else su)

    def cut(self, v):
        self.cut_report(v)


class ComponentDispatch:
    """Routes operations to one per-component structure of a static forest.

    Components never merge under cuts, so the initial component id of a
    vertex identifies its structure forever.
    """

    def __init__(self, forest: RootedForest, weights, tree_builder):
        self.forest = forest
        self.comp_id = [0] * forest.n
        self.local = [0] * forest.n
        self.structures = []
        for ci, r in enumerate(forest.roots):
            vertices = []
            stack = [r]
            while stack:
                x = stack.pop()
                self.comp_id[x] = ci
                self.local[x] = len(vertices)
                vertices.append(x)
                stack.extend(forest.children[x])
            loc = {x: i for i, x in enumerate(vertices)}
            parents = [
                -1 if forest.parent[x] == -1 else loc[forest.parent[x]]
                for x in vertices
            ]
            sub = build_forest(parents, [forest.aux[x] for x in vertices])
            self.structures.append(tree_builder(sub, [weights[x] for x in vertices]))

    def _route(self, v):
        self.forest.check_vertex(v)
        return self.structures[self.comp_id[v]], self.local[v]

    def tree_sum(self, v):
        s, lv = self._route(v)
        return s.tree_sum(lv)

    def subtree_sum(self, v):
        s, lv = self._route(v)
        return s.subtree_sum(lv)

    def update_weight(self, v, x):
        s, lv = self._route(v)
        s.update_weight(lv, x)

    def cut_report(self, v):
        s, lv = self._route(v)
        return s.cut_report(lv)

    def cut(self, v):
        s, lv = self._route(v)
        s.cut(lv)


class IteratedTreeSum:
    """The t-level tree-sum structure over a binary weighted forest.

    Level 1 is :class:`SimpleTreeSum`; level t wraps level t-1 via
    :class:`ClusterReduction` with cluster size ~log2 of the current tree
    size (overridable through ``k_hook(level, n) -> k`` for tests).
    """

    def __init__(self, forest: RootedForest, weights, group: Group, t, k_hook=None):
        if t < 1:
            raise ValueError("t must be >= 1")
        check_binary(forest)
        self.group = group
        self.t = t
        self.k_hook = k_hook or (lambda level, n: default_cluster_size(n))
        if t == 1:
            self._impl = SimpleTreeSum(forest, weights, group)
        else:
            self._impl = ComponentDispatch(
                forest, weights, lambda f, w: self._build_level(f, w, t)
            )

    def _build_level(self, tree, weights, level):
        if level == 1:
            return SimpleTreeSum(tree, weights, self.group)
        k = self.k_hook(level, tree.n)
        return ClusterReduction(
            tree,
            weights,
            self.group,
            k,
            lambda f, w: self._build_level(f, w, level - 1),
        )

    def tree_sum(self, v):
        return self._impl.tree_sum(v)

    def update_weight(self, v, x):
        self._impl.update_weight(v, x)

    def cut_report(self, v):
        return self._impl.cut_report(v)

    def cut(self, v):
        self._impl.cut(v)

    def counters(self):
        g = self.group
        return g.snapshot() if hasattr(g, "snapshot") else {}


def make_tree_sum(forest: RootedForest, weights, group: Group) -> IteratedTreeSum:
    """Convenience constructor choosing t = log* n levels."""
    return IteratedTreeSum(forest, weights, group, max(1, log_star(forest.n)))
