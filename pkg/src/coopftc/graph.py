"""Directed weighted interaction graphs with a pinned source.

A network of ``m`` units exchanges output information over weighted
directed edges; a subset of units additionally receives the source
(leader) signal through diagonal pinning weights.  The matrices kept on
:class:`NetworkGraph` follow the usual conventions:

* ``A_m[i, j]`` -- weight of the information unit ``i+1`` receives from
  unit ``j+1`` (zero diagonal),
* ``A_0`` -- diagonal source pinning weights,
* ``D_m = diag(A_m @ 1)`` -- in-degree matrix,
* ``W = D_m + A_0`` -- total in-weight,
* ``L_m = D_m - A_m`` -- graph Laplacian,
* ``L = L_m + A_0`` -- pinned Laplacian used by the cooperative layer.

After :func:`normalize_weights` each row of ``A_m + A_0`` sums to one
(``W = I``), which is the balance the cooperative error computations
rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadEdgeError, IsolatedUnitError
from .linalg import is_hurwitz

__all__ = [
    "NetworkGraph",
    "build_graph",
    "normalize_weights",
    "check_source_reachability",
    "is_positive_stable",
    "benchmark_topology",
    "BENCHMARK_TOPOLOGIES",
]


@dataclass(frozen=True)
class NetworkGraph:
    """Immutable container for one interaction topology."""

    m: int
    A_m: np.ndarray
    A_0: np.ndarray
    D_m: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)
    L_m: np.ndarray = field(repr=False)
    L: np.ndarray = field(repr=False)

    @property
    def source_weights(self) -> np.ndarray:
        """Diagonal of ``A_0`` as a flat vector."""
        return np.diag(self.A_0).copy()


def build_graph(m, unit_edges, source_weights) -> NetworkGraph:
    """Assemble a :class:`NetworkGraph` from edge lists.

    Parameters
    ----------
    m : int
        Number of units (>= 1).
    unit_edges : iterable of (i, j, w)
        Unit ``i`` receives from unit ``j`` with weight ``w >= 0``;
        indices are 1-based, self-loops and duplicate pairs rejected.
    source_weights : iterable of (i, w)
        Source pinning weight for unit ``i`` (1-based), ``w >= 0``,
        duplicates rejected.

    Raises
    ------
    BadEdgeError
        On any index/weight/duplication violation.
    """
    if m < 1:
        raise BadEdgeError(f"graph needs at least one unit, got m={m}")
    A_m = np.zeros((m, m))
    seen = set()
    for i, j, w in unit_edges:
        if not (1 <= i <= m and 1 <= j <= m):
            raise BadEdgeError(f"edge ({i},{j}) out of range 1..{m}")
        if i == j:
            raise BadEdgeError(f"self-loop ({i},{i}) not allowed")
        if (i, j) in seen:
            raise BadEdgeError(f"duplicate edge ({i},{j})")
        if not np.isfinite(w) or w < 0:
            raise BadEdgeError(f"edge ({i},{j}) has invalid weight {w}")
        seen.add((i, j))
        A_m[i - 1, j - 1] = w

    a0 = np.zeros(m)
    seen_src = set()
    for i, w in source_weights:
        if not (1 <= i <= m):
            raise BadEdgeError(f"source weight index {i} out of range 1..{m}")
        if i in seen_src:
            raise BadEdgeError(f"duplicate source weight for unit {i}")
        if not np.isfinite(w) or w < 0:
            raise BadEdgeError(f"source weight for unit {i} invalid: {w}")
        seen_src.add(i)
        a0[i - 1] = w

    return _finalize(m, A_m, np.diag(a0))


def _finalize(m: int, A_m: np.ndarray, A_0: np.ndarray) -> NetworkGraph:
    D_m = np.diag(A_m.sum(axis=1))
    W = D_m + A_0
    L_m = D_m - A_m
    return NetworkGraph(m=m, A_m=A_m, A_0=A_0, D_m=D_m, W=W, L_m=L_m, L=L_m + A_0)


def normalize_weights(g: NetworkGraph) -> NetworkGraph:
    """Rescale each unit's in-weights so they sum to one.

    Row ``i`` of ``A_m`` and the pinning weight of unit ``i`` are
    divided by the total in-weight ``W[i, i]``.  Idempotent; a unit with
    zero total in-weight cannot be normalized.

    Raises
    ------
    IsolatedUnitError
        If some ``W[i, i] <= 0``.
    """
    w = np.diag(g.W)
    if (w <= 0).any():
        bad = [i + 1 for i in np.flatnonzero(w <= 0)]
        raise IsolatedUnitError(f"units {bad} have zero total in-weight")
    return _finalize(g.m, g.A_m / w[:, None], g.A_0 / w[:, None])


def check_source_reachability(g: NetworkGraph) -> bool:
    """Breadth-first reachability from the source.

    Information propagates along an edge from its tail ``j`` to its head
    ``i`` whenever ``A_m[i, j] > 0``; the search starts at every unit
    with a positive pinning weight.  True iff every unit is reached.
    """
    reached = np.diag(g.A_0) > 0
    frontier = list(np.flatnonzero(reached))
    while frontier:
        j = frontier.pop()
        for i in np.flatnonzero(g.A_m[:, j] > 0):
            if not reached[i]:
                reached[i] = True
                frontier.append(i)
    return bool(reached.all())


def is_positive_stable(L) -> bool:
    """True iff every eigenvalue of ``L`` has positive real part."""
    return is_hurwitz(-np.asarray(L, dtype=float))


# --- benchmark topologies ---------------------------------------------------

#: Named four-unit topologies used throughout the benchmark: a star
#: (source pinned to every unit, no inter-unit edges), a bidirectional
#: ring with uniform pinning, and a chain pinned only at its head.  The
#: chain's raw in-weights exceed one, so builders normalize it.
BENCHMARK_TOPOLOGIES = ("star", "cyclic", "path")


def benchmark_topology(name: str, normalize: bool = True) -> NetworkGraph:
    """Build one of the named four-unit benchmark topologies."""
    m = 4
    if name == "star":
        g = build_graph(m, [], [(i, 1.0) for i in range(1, 5)])
    elif name == "cyclic":
        ring = []
        for i in range(1, 5):
            j = i % 4 + 1  # ring neighbor
            ring += [(i, j, 0.3), (j, i, 0.3)]
        g = build_graph(m, ring, [(i, 0.4) for i in range(1, 5)])
    elif name == "path":
        chain = []
        for i in range(1, 4):
            chain += [(i, i + 1, 1.0), (i + 1, i, 1.0)]
        g = build_graph(m, chain, [(1, 1.0)])
    else:
        raise ValueError(f"unknown topology {name!r}; expected one of "
                         f"{BENCHMARK_TOPOLOGIES}")
    return normalize_weights(g) if normalize else g
