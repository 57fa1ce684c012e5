"""Finite scenario trees, adapted random variables and stopping times.

A lattice is a finite tree discretizing the space of paths started at 0.
Nodes at a given time index partition the path space, so a value attached to
each node at time s is exactly an adapted (time-s measurable) variable.
Trees never recombine at the identity level: recombining dynamics are
represented as trees with equal node values, keeping the filtration exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "NodeRef",
    "ScenarioLattice",
    "RandomVariable",
    "StoppingTime",
    "build_lattice",
    "uniform_tree",
    "lift",
    "coordinate_process",
    "validate_stopping_time",
    "lattice_to_json",
    "lattice_from_json",
]


@dataclass(frozen=True)
class NodeRef:
    """Reference to a node as (time index, node index)."""

    t: int
    i: int


@dataclass(frozen=True)
class ScenarioLattice:
    """Finite scenario tree.

    times        -- strictly increasing time points t0=0 < ... < tT
    dimension    -- d >= 1, the dimension of the increments
    parents      -- per time index, int array of parent node indices (root: -1)
    increments   -- per time index, array (n_nodes, d) of increments from the
                    parent (root: zeros)
    """

    times: tuple
    dimension: int
    parents: tuple
    increments: tuple

    # derived, filled in __post_init__
    children: tuple = field(default=None, compare=False)
    values: tuple = field(default=None, compare=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.size < 2:
            raise ValueError("a lattice needs at least 2 time points")
        if np.any(np.diff(times) <= 0):
            raise ValueError("time points must be strictly increasing (no duplicates)")
        if len(self.parents) != times.size or len(self.increments) != times.size:
            raise ValueError("parents/increments must have one entry per time point")
        if len(self.parents[0]) != 1 or self.parents[0][0] != -1:
            raise ValueError("there must be a unique root at time index 0")

        children = []
        for k in range(times.size - 1):
            n_k = len(self.parents[k])
            ch = [[] for _ in range(n_k)]
            for j, p in enumerate(self.parents[k + 1]):
                if not 0 <= p < n_k:
                    raise ValueError(f"node ({k + 1},{j}) has invalid parent {p}")
                ch[p].append(j)
            for i, c in enumerate(ch):
                if not c:
                    raise ValueError(f"non-terminal node ({k},{i}) has no child")
                # children of consecutive parents must be contiguous and ordered
                if c != list(range(c[0], c[0] + len(c))):
                    raise ValueError("children must be contiguous per parent")
            children.append(tuple(np.array(c, dtype=int) for c in ch))
        object.__setattr__(self, "children", tuple(children))

        values = [np.zeros((1, self.dimension))]
        for k in range(1, times.size):
            inc = np.asarray(self.increments[k], dtype=float).reshape(-1, self.dimension)
            par = np.asarray(self.parents[k], dtype=int)
            values.append(values[k - 1][par] + inc)
        object.__setattr__(self, "values", tuple(values))

    @property
    def n_times(self) -> int:
        return len(self.times)

    @property
    def terminal(self) -> int:
        return len(self.times) - 1

    def n_nodes(self, t: int) -> int:
        return len(self.parents[t])

    def node_refs(self, t: int):
        return [NodeRef(t, i) for i in range(self.n_nodes(t))]

    def ancestor(self, t: int, i: int, s: int) -> int:
        """Index of the time-s ancestor of node (t, i); s <= t."""
        if not 0 <= s <= t:
            raise ValueError("need 0 <= s <= t")
        j = i
        for u in range(t, s, -1):
            j = int(self.parents[u][j])
        return j

    def ancestors_of_slice(self, t: int, s: int) -> np.ndarray:
        """Array mapping every time-t node to its time-s ancestor index."""
        idx = np.arange(self.n_nodes(t))
        for u in range(t, s, -1):
            idx = np.asarray(self.parents[u], dtype=int)[idx]
        return idx

    def descendant_slice(self, s: int, i: int, t: int) -> slice:
        """Contiguous index range of time-t descendants of node (s, i)."""
        lo, hi = i, i + 1
        for u in range(s, t):
            lo = int(self.children[u][lo][0])
            hi = int(self.children[u][hi - 1][-1]) + 1
        return slice(lo, hi)

    def path_to_leaf(self, leaf: int):
        """Node indices along the root-to-leaf path, one per time index."""
        t = self.terminal
        idx = [leaf]
        for u in range(t, 0, -1):
            idx.append(int(self.parents[u][idx[-1]]))
        return list(reversed(idx))


@dataclass(frozen=True)
class RandomVariable:
    """Adapted variable: one real value per node at a given time index."""

    lattice: ScenarioLattice
    t: int
    values: np.ndarray
    allow_infinite: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.lattice.n_nodes(self.t),):
            raise ValueError(
                f"expected {self.lattice.n_nodes(self.t)} values at time index "
                f"{self.t}, got shape {v.shape}"
            )
        if not self.allow_infinite and not np.all(np.isfinite(v)):
            raise ValueError("non-finite values are only allowed for penalties")
        object.__setattr__(self, "values", v)

    def _coerce(self, other):
        if isinstance(other, RandomVariable):
            if other.lattice is not self.lattice or other.t != self.t:
                raise ValueError("operands live on different lattices or times")
            return other.values
        return float(other)

    def _wrap(self, v):
        return RandomVariable(self.lattice, self.t, v,
                              allow_infinite=self.allow_infinite)

    def __add__(self, other):
        return self._wrap(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._coerce(other))

    def __rsub__(self, other):
        return self._wrap(self._coerce(other) - self.values)

    def __mul__(self, other):
        return self._wrap(self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.values)


@dataclass(frozen=True)
class StoppingTime:
    """Antichain of nodes covering every root-to-leaf path exactly once."""

    stops: frozenset  # of NodeRef

    @staticmethod
    def deterministic(lattice: ScenarioLattice, t: int) -> "StoppingTime":
        return StoppingTime(frozenset(lattice.node_refs(t)))


def build_lattice(times: Sequence[float], increments, dimension: int = None) -> ScenarioLattice:
    """Build a lattice from time points and per-node branching increments.

    ``increments[k][i]`` is the list of child increment vectors of node
    (k, i); one entry per time index 0..T-1.  Path values accumulate from
    the root, so every path starts at 0.
    """
    times = tuple(float(u) for u in times)
    if len(times) < 2:
        raise ValueError("a lattice needs at least 2 time points")
    if dimension is None:
        first = np.atleast_2d(np.asarray(increments[0][0], dtype=float))
        dimension = first.shape[-1]

    parents = [np.array([-1], dtype=int)]
    incs = [np.zeros((1, dimension))]
    n_prev = 1
    for k in range(len(times) - 1):
        if len(increments[k]) != n_prev:
            raise ValueError(
                f"time index {k}: expected branching for {n_prev} nodes, "
                f"got {len(increments[k])}"
            )
        par, inc = [], []
        for i in range(n_prev):
            node_inc = np.asarray(increments[k][i], dtype=float).reshape(-1, dimension)
            if node_inc.shape[0] < 1:
                raise ValueError(f"node ({k},{i}) has empty branching")
            for row in node_inc:
                par.append(i)
                inc.append(row)
        parents.append(np.array(par, dtype=int))
        incs.append(np.array(inc, dtype=float))
        n_prev = len(par)
    return ScenarioLattice(times, dimension, tuple(parents), tuple(incs))


def uniform_tree(times: Sequence[float], step_increments) -> ScenarioLattice:
    """Tree with the same branching increments at every node (e.g. +-1)."""
    step = np.asarray(step_increments, dtype=float)
    if step.ndim == 1:  # scalar increments, one per child
        step = step.reshape(-1, 1)
    incs = []
    n = 1
    for _ in range(len(times) - 1):
        incs.append([step] * n)
        n *= step.shape[0]
    return build_lattice(times, incs, dimension=step.shape[1])


def lift(X: RandomVariable, t: int) -> RandomVariable:
    """Inclusion of time-s variables among time-t variables (s <= t)."""
    if t < X.t:
        raise ValueError(f"cannot lift from time index {X.t} down to {t}")
    if t == X.t:
        return X
    anc = X.lattice.ancestors_of_slice(t, X.t)
    return RandomVariable(X.lattice, t, X.values[anc],
                          allow_infinite=X.allow_infinite)


def coordinate_process(lattice: ScenarioLattice, s: int, coord: int = 0) -> RandomVariable:
    """The coordinate process at time index s: accumulated increments."""
    if not 0 <= s < lattice.n_times:
        raise ValueError(f"time index {s} out of range")
    return RandomVariable(lattice, s, lattice.values[s][:, coord])


def validate_stopping_time(lattice: ScenarioLattice, stops: Iterable[NodeRef]):
    """Check the antichain-cover invariant.

    Returns (True, None) or (False, first violating root-to-leaf path).
    """
    stop_set = {(n.t, n.i) for n in stops}
    for n in stop_set:
        t, i = n
        if not (0 <= t < lattice.n_times and 0 <= i < lattice.n_nodes(t)):
            return False, [NodeRef(t, i)]
    for leaf in range(lattice.n_nodes(lattice.terminal)):
        path = lattice.path_to_leaf(leaf)
        hits = sum((u, path[u]) in stop_set for u in range(lattice.n_times))
        if hits != 1:
            return False, [NodeRef(u, path[u]) for u in range(lattice.n_times)]
    return True, None


def lattice_to_json(lattice: ScenarioLattice) -> str:
    nodes = []
    for k in range(lattice.n_times):
        nodes.append(
            [
                {"parent": int(lattice.parents[k][i]),
                 "increment": [float(v) for v in lattice.increments[k][i]]}
                for i in range(lattice.n_nodes(k))
            ]
        )
    return json.dumps(
        {"times": list(lattice.times), "dimension": lattice.dimension, "nodes": nodes},
        sort_keys=True,
    )


def lattice_from_json(text: str) -> ScenarioLattice:
    doc = json.loads(text)
    times = tuple(float(u) for u in doc["times"])
    d = int(doc["dimension"])
    parents, incs = [], []
    for level in doc["nodes"]:
        parents.append(np.array([n["parent"] for n in level], dtype=int))
        incs.append(np.array([n["increment"] for n in level], dtype=float).reshape(-1, d))
    return ScenarioLattice(times, d, tuple(parents), tuple(incs))
