"""Pasting of measures at stopping times, stability checks and the
rectangular hull with its robust backward recursion.

Pasting glues one measure's kernels strictly before a stopping time to
another's at and after it (density freezing).  A family closed under all
such pastings is stable; the computable surrogate is the rectangular
(node-wise kernel set) hull, whose selections are exactly the measures
reachable by finitely many pastings on small lattices -- verified by
enumeration in the tests rather than assumed.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .lattice import RandomVariable, ScenarioLattice, StoppingTime, validate_stopping_time
from .measures import Measure

__all__ = [
    "RectangularFamily",
    "paste",
    "is_stable",
    "rectangular_hull",
    "enumerate_selections",
    "robust_evaluate",
    "all_stopping_times",
    "rectangular_to_json",
    "rectangular_from_json",
]

_DEDUP_TOL = 1e-12


@dataclass(frozen=True)
class RectangularFamily:
    """Per non-terminal node: a finite, de-duplicated set of kernels."""

    lattice: ScenarioLattice
    node_kernels: tuple  # per time index < T: tuple per node of kernel tuples

    def __post_init__(self):
        lat = self.lattice
        if len(self.node_kernels) != lat.n_times - 1:
            raise ValueError("one kernel-set level per non-terminal time index")
        cleaned = []
        for k, level in enumerate(self.node_kernels):
            if len(level) != lat.n_nodes(k):
                raise ValueError(f"time index {k}: one kernel set per node required")
            lvl = []
            for i, kernels in enumerate(level):
                uniq: List[np.ndarray] = []
                for w in kernels:
                    w = np.asarray(w, dtype=float)
                    w = w / w.sum()
                    if not any(np.max(np.abs(w - u)) <= _DEDUP_TOL for u in uniq):
                        uniq.append(w)
                if not uniq:
                    raise ValueError(f"empty kernel set at node ({k},{i})")
                lvl.append(tuple(uniq))
            cleaned.append(tuple(lvl))
        object.__setattr__(self, "node_kernels", tuple(cleaned))


def _stopped_mask(lattice: ScenarioLattice, tau: StoppingTime):
    """Per node: True iff the node is at or after the stopping time."""
    stop_set = {(n.t, n.i) for n in tau.stops}
    masks = []
    prev = None
    for t in range(lattice.n_times):
        m = np.zeros(lattice.n_nodes(t), dtype=bool)
        for i in range(lattice.n_nodes(t)):
            here = (t, i) in stop_set
            inherited = prev[lattice.parents[t][i]] if t > 0 else False
            m[i] = here or inherited
        masks.append(m)
        prev = m
    return masks


def paste(P: Measure, Q: Measure, tau: StoppingTime) -> Measure:
    """Q's kernels strictly before tau, P's kernels at and after tau.

    Requires Q << P node-wise; equivalently the density process of the
    result w.r.t. P is that of Q frozen at tau.
    """
    lat = P.lattice
    if Q.lattice is not lat:
        raise ValueError("measures live on different lattices")
    ok, witness = validate_stopping_time(lat, tau.stops)
    if not ok:
        raise ValueError(f"invalid stopping time, witness path {witness}")
    for t in range(lat.n_times):
        qp = Q.node_probabilities(t)
        pp = P.node_probabilities(t)
        bad = np.where((qp > 0) & (pp == 0))[0]
        if bad.size:
            raise ValueError(
                f"Q is not absolutely continuous w.r.t. P at node ({t},{int(bad[0])})"
            )
    masks = _stopped_mask(lat, tau)
    kernels = []
    for k in range(lat.n_times - 1):
        level = tuple(
            P.kernels[k][i] if masks[k][i] else Q.kernels[k][i]
            for i in range(lat.n_nodes(k))
        )
        kernels.append(level)
    return Measure(lat, tuple(kernels))


def _same_at_charged(R: Measure, M: Measure, tol: float = 1e-12) -> bool:
    lat = R.lattice
    for k in range(lat.n_times - 1):
        probs = R.node_probabilities(k)
        for i in range(lat.n_nodes(k)):
            if probs[i] > 0 and np.max(np.abs(R.kernels[k][i] - M.kernels[k][i])) > tol:
                return False
    return True


def is_stable(measures: Sequence[Measure], taus: Sequence[StoppingTime]):
    """True iff every admissible pasting stays in the family.

    For every ordered pair (P, Q) with Q << P node-wise and every given
    stopping time, paste(P, Q, tau) must coincide kernel-wise at its charged
    nodes with some member.  Returns (bool, missing pasted measure or None).
    """
    for P, Q in itertools.product(measures, repeat=2):
        try:
            for tau in taus:
                R = paste(P, Q, tau)
                if not any(_same_at_charged(R, M) for M in measures):
                    return False, R
        except ValueError:
            continue  # Q not absolutely continuous w.r.t. P: pair not constrained
    return True, None


def rectangular_hull(measures: Sequence[Measure]) -> RectangularFamily:
    """Node-wise kernel sets {kernel of Q at n : Q charges n}.

    Falls back to all member kernels at a node no member charges (the value
    there never enters a charged expectation).
    """
    lat = measures[0].lattice
    levels = []
    for k in range(lat.n_times - 1):
        level = []
        for i in range(lat.n_nodes(k)):
            kernels = [Q.kernels[k][i] for Q in measures if Q.charges(k, i)]
            if not kernels:
                kernels = [Q.kernels[k][i] for Q in measures]
            level.append(tuple(kernels))
        levels.append(tuple(level))
    return RectangularFamily(lat, tuple(levels))


def enumerate_selections(rf: RectangularFamily, cap: int = 4096) -> List[Measure]:
    """All node-wise kernel choices as path-law measures (brute-force oracle)."""
    lat = rf.lattice
    nodes = [(k, i) for k in range(lat.n_times - 1) for i in range(lat.n_nodes(k))]
    sizes = [len(rf.node_kernels[k][i]) for k, i in nodes]
    count = int(np.prod(sizes)) if sizes else 1
    if count > cap:
        raise ValueError(f"selection count {count} exceeds cap {cap}")
    out = []
    for combo in itertools.product(*(range(sz) for sz in sizes)):
        pick = dict(zip(nodes, combo))
        kernels = tuple(
            tuple(rf.node_kernels[k][i][pick[(k, i)]] for i in range(lat.n_nodes(k)))
            for k in range(lat.n_times - 1)
        )
        out.append(Measure(lat, kernels))
    return out


def robust_evaluate(rf: RectangularFamily, X: RandomVariable, s: int) -> RandomVariable:
    """sup over the rectangular family of E(-X | B_s), by backward recursion.

    V_t = -X and V_u(n) = max over node-n kernels of <kernel, V_{u+1}>; the
    maximum over selections is attained node-wise, so this equals the
    enumeration oracle exactly.
    """
    lat = rf.lattice
    t = X.t
    if s > t:
        raise ValueError("need s <= t")
    v = -X.values
    for u in range(t - 1, s - 1, -1):
        nxt = np.empty(lat.n_nodes(u))
        for i in range(lat.n_nodes(u)):
            child_vals = v[lat.children[u][i]]
            nxt[i] = max(float(np.dot(w, child_vals)) for w in rf.node_kernels[u][i])
        v = nxt
    return RandomVariable(lat, s, v)


def all_stopping_times(lattice: ScenarioLattice, cap: int = 10000) -> List[StoppingTime]:
    """Every stopping time of a (small) lattice, by stop-or-continue recursion."""
    from .lattice import NodeRef

    def expand(t: int, i: int):
        options = [[NodeRef(t, i)]]
        if t < lattice.terminal:
            child_sets = [expand(t + 1, int(j)) for j in lattice.children[t][i]]
            for combo in itertools.product(*child_sets):
                options.append([n for sub in combo for n in sub])
        if len(options) > cap:
            raise ValueError("too many stopping times to enumerate")
        return options

    return [StoppingTime(frozenset(nodes)) for nodes in expand(0, 0)]


def rectangular_to_json(rf: RectangularFamily) -> str:
    entries = []
    lat = rf.lattice
    for k in range(lat.n_times - 1):
        for i in range(lat.n_nodes(k)):
            entries.append(
                {"node": [k, i],
                 "kernels": [[float(v) for v in w] for w in rf.node_kernels[k][i]]}
            )
    return json.dumps({"node_kernels": entries}, sort_keys=True)


def rectangular_from_json(text: str, lattice: ScenarioLattice) -> RectangularFamily:
    doc = json.loads(text)
    levels = [[None] * lattice.n_nodes(k) for k in range(lattice.n_times - 1)]
    for entry in doc["node_kernels"]:
        k, i = entry["node"]
        levels[k][i] = tuple(np.asarray(w, dtype=float) for w in entry["kernels"])
    for k, level in enumerate(levels):
        if any(v is None for v in level):
            raise ValueError(f"missing kernel set at time index {k}")
    return RectangularFamily(lattice, tuple(tuple(level) for level in levels))
