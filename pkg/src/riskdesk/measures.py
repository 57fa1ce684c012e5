"""Probability measures on a lattice, conditional expectation and the capacity.

A measure is a collection of one-step kernels, one per non-terminal node.
A finite ordered family of measures stands in for the (possibly non
dominated) uncertainty set and defines the capacity

    c(X) = max_n ( E_{Q_n} |X|^p )^{1/p}.

The reference measure mixes the family with dyadic weights (renormalized
over the finite family); it charges every node charged by some member, which
is the desk-scale version of the canonical class property: c(X - Y) = 0 iff
X = Y at all reference-charged nodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lattice import RandomVariable, ScenarioLattice, lift

__all__ = [
    "Measure",
    "MeasureFamily",
    "ReferenceMeasure",
    "DualWitness",
    "conditional_expectation",
    "charged_mask",
    "capacity",
    "reference_measure",
    "mix_measures",
    "dual_witness",
    "check_restriction",
    "measure_to_json",
    "measure_from_json",
    "family_to_json",
    "family_from_json",
]

_KERNEL_TOL = 1e-12


def _clean_kernel(w, n_children: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (n_children,):
        raise ValueError(f"kernel needs {n_children} weights, got shape {w.shape}")
    if np.any(w < -_KERNEL_TOL):
        raise ValueError("kernel weights must be non-negative")
    w = np.clip(w, 0.0, None)
    s = w.sum()
    if abs(s - 1.0) > 1e-9:
        raise ValueError(f"kernel weights sum to {s}, expected 1")
    return w / s


@dataclass(frozen=True)
class Measure:
    """Probability measure given by one kernel per non-terminal node."""

    lattice: ScenarioLattice
    kernels: tuple  # per time index < T: tuple of weight arrays, one per node

    _node_probs: tuple = field(default=None, compare=False)

    def __post_init__(self):
        lat = self.lattice
        if len(self.kernels) != lat.n_times - 1:
            raise ValueError("one kernel level per non-terminal time index")
        cleaned = []
        for k, level in enumerate(self.kernels):
            if len(level) != lat.n_nodes(k):
                raise ValueError(f"time index {k}: one kernel per node required")
            cleaned.append(
                tuple(_clean_kernel(level[i], len(lat.children[k][i]))
                      for i in range(lat.n_nodes(k)))
            )
        object.__setattr__(self, "kernels", tuple(cleaned))

        probs = [np.ones(1)]
        for k in range(lat.n_times - 1):
            nxt = np.empty(lat.n_nodes(k + 1))
            for i in range(lat.n_nodes(k)):
                nxt[lat.children[k][i]] = probs[k][i] * self.kernels[k][i]
            probs.append(nxt)
        object.__setattr__(self, "_node_probs", tuple(probs))

    def node_probabilities(self, t: int) -> np.ndarray:
        return self._node_probs[t]

    def charges(self, t: int, i: int) -> bool:
        return self._node_probs[t][i] > 0.0

    def conditional_subtree_probs(self, s: int, i: int, t: int) -> np.ndarray:
        """Conditional path probabilities from node (s, i) over its time-t
        descendants, computed from the kernels (defined at null nodes too)."""
        lat = self.lattice
        probs = np.ones(1)
        lo = i
        for u in range(s, t):
            n_next = []
            for j, p in enumerate(range(lo, lo + probs.size)):
                n_next.append(probs[j] * self.kernels[u][p])
            probs = np.concatenate(n_next) if n_next else probs
            lo = int(lat.children[u][lo][0])
        return probs

    def expectation(self, X: RandomVariable) -> float:
        return float(np.sum(self.node_probabilities(X.t) * X.values))


def conditional_expectation(X: RandomVariable, Q: Measure, s: int) -> RandomVariable:
    """E_Q(X | B_s) as a time-s variable.

    Defined from the kernels by backward induction, so the value at Q-null
    nodes is the natural kernel-conditional value (the tower property holds
    exactly up to rounding).  Infinite values propagate for penalty
    variables: a node is infinite if a kernel-charged descendant is.
    """
    if Q.lattice is not X.lattice:
        raise ValueError("measure and variable live on different lattices")
    if s > X.t:
        raise ValueError(f"need s <= t, got s={s} > t={X.t}")
    lat = X.lattice
    vals = X.values
    for u in range(X.t - 1, s - 1, -1):
        nxt = np.empty(lat.n_nodes(u))
        for i in range(lat.n_nodes(u)):
            w = Q.kernels[u][i]
            v = vals[lat.children[u][i]]
            if np.any(np.isinf(v) & (w > 0)):
                nxt[i] = np.inf
            else:
                nxt[i] = float(np.dot(w[w > 0], v[w > 0]))
        vals = nxt
    return RandomVariable(lat, s, vals, allow_infinite=X.allow_infinite)


def charged_mask(Q: Measure, t: int) -> np.ndarray:
    """Boolean mask of time-t nodes with positive Q-probability."""
    return Q.node_probabilities(t) > 0.0


@dataclass(frozen=True)
class MeasureFamily:
    """Finite ordered family (Q_0, ..., Q_{N-1}) with exponent p >= 1."""

    members: tuple
    p: float = 1.0

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("a family needs at least one member")
        lat = members[0].lattice
        if any(m.lattice is not lat for m in members):
            raise ValueError("all members must live on the same lattice")
        if self.p < 1:
            raise ValueError("exponent p must be >= 1")
        object.__setattr__(self, "members", members)

    @property
    def lattice(self) -> ScenarioLattice:
        return self.members[0].lattice

    @property
    def q(self) -> float:
        """Conjugate exponent (inf for p = 1)."""
        return np.inf if self.p == 1 else self.p / (self.p - 1)


@dataclass(frozen=True)
class ReferenceMeasure:
    """Mixture P = sum w_n Q_n with dyadic weights, renormalized."""

    measure: Measure
    weights: np.ndarray


def capacity(X: RandomVariable, family: MeasureFamily) -> float:
    """c(X) = max_n (E_{Q_n}|X|^p)^{1/p}; X is lifted to the terminal time."""
    lat = family.lattice
    XT = lift(X, lat.terminal)
    absp = np.abs(XT.values) ** family.p
    best = 0.0
    for Q in family.members:
        best = max(best, float(np.sum(Q.node_probabilities(lat.terminal) * absp)))
    return best ** (1.0 / family.p)


def mix_measures(members: Sequence[Measure], weights) -> Measure:
    """Path-probability mixture of measures, re-expressed through kernels.

    At mixture-null nodes the kernel is the unweighted average of the member
    kernels (the value there never enters any expectation).
    """
    members = list(members)
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(members),) or np.any(w < 0):
        raise ValueError("need one non-negative weight per member")
    w = w / w.sum()
    lat = members[0].lattice
    probs = [sum(wi * m.node_probabilities(t) for wi, m in zip(w, members))
             for t in range(lat.n_times)]
    kernels = []
    for k in range(lat.n_times - 1):
        level = []
        for i in range(lat.n_nodes(k)):
            ch = lat.children[k][i]
            if probs[k][i] > 0:
                level.append(probs[k + 1][ch] / probs[k][i])
            else:
                level.append(np.mean([m.kernels[k][i] for m in members], axis=0))
        kernels.append(tuple(level))
    return Measure(lat, tuple(kernels))


def reference_measure(family: MeasureFamily) -> ReferenceMeasure:
    """P = sum w_n Q_n with w_n proportional to 2^-(n+1), renormalized."""
    n = len(family.members)
    w = 0.5 ** (np.arange(n) + 1)
    w = w / w.sum()
    return ReferenceMeasure(mix_measures(family.members, w), w)


@dataclass(frozen=True)
class DualWitness:
    g0: RandomVariable
    value: float
    degenerate: bool = False


def dual_witness(X: RandomVariable, family: MeasureFamily) -> DualWitness:
    """Closed-form dual-norm witness g0 = |X|^{p/q} / c(X)^{p-1}.

    Satisfies max_n E_{Q_n}(|X| g0) = c(X) with max_n E_{Q_n}(g0^q) <= 1.
    For p = 1 the conjugate is degenerate and g0 is identically 1.
    """
    c = capacity(X, family)
    if c == 0.0:
        raise ValueError("null element: c(X) = 0 admits no dual witness")
    if family.p == 1:
        g0 = RandomVariable(X.lattice, X.t, np.ones(X.lattice.n_nodes(X.t)))
        return DualWitness(g0, c, degenerate=True)
    ratio = family.p / family.q
    g0 = RandomVariable(X.lattice, X.t,
                        np.abs(X.values) ** ratio / c ** (family.p - 1.0))
    return DualWitness(g0, c, degenerate=False)


def check_restriction(Q: Measure, P, s: int, tol: float = 1e-12) -> str:
    """Compare restrictions to B_s: 'equal', 'absolutely_continuous' or
    'neither'.  P may be a Measure or a ReferenceMeasure."""
    if isinstance(P, ReferenceMeasure):
        P = P.measure
    if Q.lattice is not P.lattice:
        raise ValueError("measures live on different lattices")
    equal, abscont = True, True
    for t in range(s + 1):
        q = Q.node_probabilities(t)
        p = P.node_probabilities(t)
        if np.any(np.abs(q - p) > tol):
            equal = False
        if np.any((q > 0) & (p == 0)):
            abscont = False
    if equal:
        return "equal"
    if abscont:
        return "absolutely_continuous"
    return "neither"


def measure_to_json(Q: Measure) -> str:
    kernels = []
    for k in range(Q.lattice.n_times - 1):
        for i in range(Q.lattice.n_nodes(k)):
            kernels.append({"node": [k, i],
                            "weights": [float(v) for v in Q.kernels[k][i]]})
    return json.dumps({"kernels": kernels}, sort_keys=True)


def family_to_json(family: MeasureFamily) -> str:
    members = [json.loads(measure_to_json(Q)) for Q in family.members]
    return json.dumps({"members": members, "p": family.p}, sort_keys=True)


def family_from_json(text: str, lattice: ScenarioLattice) -> MeasureFamily:
    doc = json.loads(text)
    members = tuple(measure_from_json(json.dumps(m), lattice) for m in doc["members"])
    return MeasureFamily(members, p=float(doc["p"]))


def measure_from_json(text: str, lattice: ScenarioLattice) -> Measure:
    doc = json.loads(text)
    levels = [[None] * lattice.n_nodes(k) for k in range(lattice.n_times - 1)]
    for entry in doc["kernels"]:
        k, i = entry["node"]
        w = np.asarray(entry["weights"], dtype=float)
        levels[k][i] = w / w.sum()  # renormalized on load
    for k, level in enumerate(levels):
        if any(w is None for w in level):
            raise ValueError(f"missing kernel at time index {k}")
    return Measure(lattice, tuple(tuple(level) for level in levels))
