"""Decremental dynamic forests with tree-sum and subtree-sum queries.

Structures (all single-threaded for mutation; forests and tables shareable):

- :class:`SimpleTreeSum` -- O(1) queries and weight updates, O(n log n)
  total group operations over all cuts.
- :class:`IteratedTreeSum` -- t levels of the cluster reduction over it.
- :class:`TreeSize01` -- table-driven 0-1 tree sums, integers only.
- :class:`SubtreeSize01` / :class:`WeightedSubtreeSum` -- subtree sums
  under cuts via packed delayed counters.
- :class:`UniversalTreeSum` -- three reduction levels over searched-optimal
  structures for the bottom micro-trees.
- :mod:`decforest.optimal_small` -- the computation-tree model, correctness
  checker, and minimum-cost search behind the universal structure.
- :mod:`decforest.workloads` -- prefix-sum and parity hard-instance
  generators used as stress workloads.

The ``decforest`` command line (``decforest run|fuzz|bench|build-tables|
search-opt``) drives all of this from trace files.
"""

from .connectivity import DecrementalConnectivity
from .clustering import (
    Cluster,
    ClusterDecomposition,
    InducedClusterForest,
    alt_partition,
    binarize,
    decompose,
)
from .core import (
    Group,
    InstrumentedGroup,
    IntGroup,
    ModGroup,
    OperationTrace,
    ReplayReport,
    RootedForest,
    TraceOp,
    VectorGroup,
    build_forest,
    cut_op,
    format_trace,
    is_ancestor_static,
    log_star,
    parse_trace,
    replay,
    ssum_op,
    tsum_op,
    upd_op,
)
from .oracle import NaiveForest, gen_random_tree, gen_random_trace
from .optimal_small import (
    AdaptiveTreeSum,
    ComputationTree,
    OptResult,
    UniversalTreeSum,
    check_correct,
    evaluate,
    search_optimal,
    structure_to_tree,
    tree_to_structure,
    validate,
)
from .subtree_sum import (
    QTable,
    RecursiveSubtreeSum,
    SmallSubtreeSum,
    SubtreeSize01,
    WeightedSubtreeSum,
    build_q_table,
)
from .tree_size_linear import GlobalSizeTable, TreeSize01, build_global_table
from .tree_sum_iterated import ClusterReduction, IteratedTreeSum, make_tree_sum
from .tree_sum_simple import SimpleTreeSum
from .workloads import BlockPartialSum, build_parity, build_spine

__version__ = "0.1.0"
