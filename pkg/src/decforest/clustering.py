"""Binarization and cluster decompositions of rooted trees.

A *cluster* is a connected vertex set with exactly one upper boundary vertex
(the unique vertex whose parent lies outside, or the tree root) and at most
one lower boundary vertex, none of whose children belong to the cluster.
``decompose`` partitions a binary tree into at most 6n/k clusters of size at
most k and builds the cluster tree over the boundary vertices.

The decomposition itself is never modified afterwards; only the *induced
cluster forest* (the cluster tree with edges dropped as cuts disconnect
boundary vertices) changes over time, via :class:`InducedClusterForest`.

``binarize`` rewrites high-degree vertices as paths of zero-weight auxiliary
vertices so that every vertex has at most two children, preserving the
answers of every legal operation sequence.  ``alt_partition`` is a looser
bottom-up partition that works on arbitrary (non-binary) forests.
"""

from __future__ import annotations

from .connectivity import DecrementalConnectivity
from .core import RootedForest, build_forest
from .errors import NotATree, NotBinary


def binarize(forest: RootedForest, weights, zero=0):
    """Return ``(binary_forest, weights, aux_ids)`` equivalent to the input.

    Original vertices keep their ids; every vertex with d >= 3 children is
    replaced by a path of itself plus d-1 new auxiliary vertices, each path
    vertex taking over one original child.  New vertices get weight ``zero``
    and are flagged auxiliary.  The output has at most 2n vertices.
    """
    n = forest.n
    parents = list(forest.parent)
    aux = list(forest.aux)
    new_weights = list(weights)
    next_id = n
    for v in range(n):
        cs = forest.children[v]
        if len(cs) <= 2:
            continue
        # Path head is v itself; each path vertex owns one original child.
        holder = v
        for i, c in enumerate(cs):
            if i == 0:
                parents[c] = holder
                continue
            a = next_id
            next_id += 1
            parents.append(holder)
            aux.append(True)
            new_weights.append(zero)
            parents[c] = a
            holder = a
    return build_forest(parents, aux), new_weights, list(range(n, next_id))


class Cluster:
    __slots__ = ("id", "vertices", "ub", "lb")

    def __init__(self, cid, vertices, ub, lb):
        self.id = cid
        self.vertices = vertices  # ids in DFS (pre) order within the cluster
        self.ub = ub
        self.lb = lb  # None if the cluster has no lower boundary vertex

    def __repr__(self):
        lb = "-" if self.lb is None else self.lb
        return f"Cluster({self.id}, ub={self.ub}, lb={lb}, size={len(self.vertices)})"


class ClusterDecomposition:
    """A partition of one tree (a root's component) into clusters.

    ``cluster_of[v]`` is the cluster id for every vertex of the decomposed
    component and -1 elsewhere.  ``boundary`` lists the distinct boundary
    vertices; ``cluster_tree_parent[b]`` gives each boundary vertex's parent
    boundary vertex (or -1), which defines the cluster tree.
    """

    def __init__(self, forest, root, k, clusters, cluster_of):
        self.forest = forest
        self.root = root
        self.k = k
        self.clusters = clusters
        self.cluster_of = cluster_of
        boundary = []
        seen = set()
        for c in clusters:
            for b in (c.ub, c.lb):
                if b is not None and b not in seen:
                    seen.add(b)
                    boundary.append(b)
        boundary.sort()
        self.boundary = boundary
        self.boundary_index = {b: i for i, b in enumerate(boundary)}
        # Cluster-tree edges: lb(C) is a child of ub(C) inside each cluster;
        # across clusters, ub(C) is a child of its (lower-boundary) parent.
        parent = {b: -1 for b in boundary}
        for c in clusters:
            if c.lb is not None and c.lb != c.ub:
                parent[c.lb] = c.ub
            p = forest.parent[c.ub] if c.ub != root else -1
            if p != -1:
                parent[c.ub] = p
        self.cluster_tree_parent = parent

    def cluster_tree_forest(self) -> RootedForest:
        """The cluster tree as a compact forest over boundary indices."""
        idx = self.boundary_index
        parents = [
            -1 if self.cluster_tree_parent[b] == -1 else idx[self.cluster_tree_parent[b]]
            for b in self.boundary
        ]
        return build_forest(parents)

    def dump(self) -> str:
        lines = []
        for c in self.clusters:
            lb = "-" if c.lb is None else str(c.lb)
            members = ",".join(str(v) for v in c.vertices)
            lines.append(f"cluster {c.id} ub={c.ub} lb={lb} members={members}")
        return "\n".join(lines) + "\n"


def decompose(tree: RootedForest, k: int) -> ClusterDecomposition:
    """Cluster decomposition of a single binary tree with max cluster size k."""
    if len(tree.roots) != 1:
        raise NotATree(f"expected one root, found {len(tree.roots)}")
    return decompose_subtree(tree, tree.roots[0], k)


def decompose_subtree(forest: RootedForest, root: int, k: int) -> ClusterDecomposition:
    """Decompose the component of ``root`` inside a binary forest.

    Bottom-up growth: at each vertex the children's open clusters are merged
    with it, unless their total size has reached k or both already carry a
    lower boundary vertex, in which case they are finished and the vertex
    starts a fresh singleton cluster whose lower boundary is itself.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    children = forest.children
    finished = []
    cluster_of = [-1] * forest.n
    # open cluster per vertex: (vertices, lb) with ub == vertices[0]
    open_at = {}

    def finish(vertices, lb):
        cid = len(finished)
        c = Cluster(cid, vertices, vertices[0], lb)
        finished.append(c)
        for x in vertices:
            cluster_of[x] = cid

    stack = [(root, 0)]
    while stack:
        v, ci = stack[-1]
        cs = children[v]
        if len(cs) > 2:
            raise NotBinary(f"vertex {v} has {len(cs)} children")
        if ci < len(cs):
            stack[-1] = (v, ci + 1)
            stack.append((cs[ci], 0))
            continue
        stack.pop()
        sub = [open_at.pop(c) for c in cs]
        total = sum(len(s[0]) for s in sub)
        two_lb = len(sub) == 2 and sub[0][1] is not None and sub[1][1] is not None
        if total >= k or two_lb:
            for vertices, lb in sub:
                finish(vertices, lb)
            open_at[v] = ([v], v)
        else:
            merged = [v]
            lb = None
            for vertices, sub_lb in sub:
                merged.extend(vertices)
                if sub_lb is not None:
                    lb = sub_lb
            open_at[v] = (merged, lb)

    vertices, lb = open_at.pop(root)
    finish(vertices, lb)
    return ClusterDecomposition(forest, root, k, finished, cluster_of)


class InducedClusterForest:
    """Live edges of the cluster tree under cuts in the underlying forest.

    An intra-cluster edge (lb child of ub) survives while the two boundary
    vertices stay connected; a cross-cluster edge survives while the
    underlying forest edge itself does.  ``on_cut`` must be called right
    after the corresponding ``conn.cut`` so connectivity reflects the cut.
    """

    def __init__(self, decomp: ClusterDecomposition, conn: DecrementalConnectivity):
        self.decomp = decomp
        self.conn = conn
        # live[b] for boundary vertex b: is the edge b -> parent boundary live
        self.live = {b: p != -1 for b, p in decomp.cluster_tree_parent.items()}

    def on_cut(self, v: int):
        """Process cut(v); returns the removed cluster-forest edge or None.

        Edges are returned as ``(child_boundary, parent_boundary)``.
        """
        decomp = self.decomp
        cid = decomp.cluster_of[v]
        u = self.decomp.forest.parent[v]
        if u == -1 or decomp.cluster_of[u] != cid:
            # cross-cluster edge: v is the upper boundary of its cluster
            if u != -1 and self.live.get(v, False):
                self.live[v] = False
                return (v, u)
            return None
        c = decomp.clusters[cid]
        if c.lb is None or c.lb == c.ub:
            return None
        if self.live.get(c.lb, False) and not self.conn.connected(c.ub, c.lb):
            self.live[c.lb] = False
            return (c.lb, c.ub)
        return None

    def edges(self):
        """Current live edges, each as (child_boundary, parent_boundary)."""
        out = []
        for b, p in self.decomp.cluster_tree_parent.items():
            if p != -1 and self.live.get(b, False):
                out.append((b, p))
        return out


def alt_partition(forest: RootedForest, k: int):
    """Partition V(F) into connected parts, growing bottom-up to size >= k.

    Every part induces a subtree.  A part either contains a root of F and
    has size < k, or has size >= k while each child subtree hanging off its
    top vertex has size < k.  Works for arbitrary (non-binary) forests.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    children = forest.children
    finished = []
    open_at = {}
    for root in forest.roots:
        stack = [(root, 0)]
        while stack:
            v, ci = stack[-1]
            cs = children[v]
            if ci < len(cs):
                stack[-1] = (v, ci + 1)
                stack.append((cs[ci], 0))
                continue
            stack.pop()
            part = [v]
            for c in cs:
                sub = open_at.pop(c)
                if sub is None:
                    continue
                part.extend(sub)
            if len(part) >= k and v != root:
                finished.append(part)
                open_at[v] = None
            else:
                open_at[v] = part
        top = open_at.pop(root)
        if top is not None:
            finished.append(top)
    return finished
