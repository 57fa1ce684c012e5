"""Time-consistent dynamics built from one-step data, and the checks that
certify (or refute) consistency for externally supplied representations.

A dynamic risk measure is generated by per-node menus of (kernel, penalty)
choices.  The two-index evaluators are produced by backward composition, so
the recursion rho_{r,t} = rho_{r,s}(-rho_{s,t}) holds by construction; the
recursion check and the penalty cocycle check are the executable versions of
the equivalence between the two characterizations, and the supermartingale
check covers the zero-penalty reference case.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .lattice import RandomVariable, ScenarioLattice, lift
from .measures import Measure, charged_mask, conditional_expectation
from .risk import DualRep, minimal_penalty

__all__ = [
    "OneStepStructure",
    "DynamicRM",
    "Evaluator",
    "compose",
    "build_dynamic",
    "expand_dual",
    "check_cocycle",
    "check_recursion",
    "recursion_violation",
    "acceptance_decompose",
    "supermartingale_check",
    "onestep_to_json",
    "onestep_from_json",
]


@dataclass(frozen=True)
class OneStepStructure:
    """Per non-terminal node: a finite menu of (kernel weights, penalty)."""

    lattice: ScenarioLattice
    choices: tuple  # per time index < T: tuple per node of ((weights, penalty), ...)

    def __post_init__(self):
        lat = self.lattice
        if len(self.choices) != lat.n_times - 1:
            raise ValueError("one choice level per non-terminal time index")
        cleaned = []
        for k, level in enumerate(self.choices):
            if len(level) != lat.n_nodes(k):
                raise ValueError(f"time index {k}: one menu per node required")
            lvl = []
            for i, menu in enumerate(level):
                entries = []
                for w, a in menu:
                    w = np.asarray(w, dtype=float)
                    if w.shape != (len(lat.children[k][i]),):
                        raise ValueError(f"kernel shape mismatch at node ({k},{i})")
                    a = float(a)
                    if a < 0:
                        raise ValueError("one-step penalties must be >= 0 (or +inf)")
                    entries.append((w / w.sum(), a))
                if not any(np.isfinite(a) for _, a in entries):
                    raise ValueError(f"node ({k},{i}) has no finite-penalty choice")
                lvl.append(tuple(entries))
            cleaned.append(tuple(lvl))
        object.__setattr__(self, "choices", tuple(cleaned))

    @property
    def normalized(self) -> bool:
        """True iff the minimum penalty at every node is 0."""
        return all(
            min(a for _, a in menu) == 0.0
            for level in self.choices for menu in level
        )


@dataclass(frozen=True)
class Evaluator:
    """A conditional evaluator X at t -> rho(X) at r."""

    r: int
    t: int
    fn: Callable[[RandomVariable], RandomVariable]

    def __call__(self, X: RandomVariable) -> RandomVariable:
        if X.t != self.t:
            raise ValueError(f"evaluator expects time index {self.t}, got {X.t}")
        return self.fn(X)


def compose(rho_rs: Evaluator, rho_st: Evaluator) -> Evaluator:
    """rho_{r,t} = rho_{r,s} o (-rho_{s,t}); requires matching indices."""
    if rho_rs.t != rho_st.r:
        raise ValueError(
            f"cannot compose: inner starts at {rho_st.r}, outer ends at {rho_rs.t}"
        )
    return Evaluator(rho_rs.r, rho_st.t, lambda X: rho_rs(-rho_st(X)))


@dataclass(frozen=True)
class DynamicRM:
    """Dynamic risk measure generated by a one-step structure."""

    lattice: ScenarioLattice
    structure: OneStepStructure

    def rho(self, s: int, t: int, X: RandomVariable) -> RandomVariable:
        """Backward recursion: G_t = -X, G_u(n) = max_j (<k_j, G_{u+1}> - a_j)."""
        if not 0 <= s <= t <= self.lattice.terminal:
            raise ValueError("need 0 <= s <= t <= terminal")
        if X.t != t:
            raise ValueError(f"X must live at time index {t}")
        lat = self.lattice
        g = -X.values
        for u in range(t - 1, s - 1, -1):
            nxt = np.empty(lat.n_nodes(u))
            for i in range(lat.n_nodes(u)):
                child_vals = g[lat.children[u][i]]
                nxt[i] = max(
                    float(np.dot(w, child_vals)) - a
                    for w, a in self.structure.choices[u][i]
                    if np.isfinite(a)
                )
            g = nxt
        return RandomVariable(lat, s, g)

    def evaluator(self, s: int, t: int) -> Evaluator:
        return Evaluator(s, t, lambda X: self.rho(s, t, X))


def build_dynamic(structure: OneStepStructure) -> DynamicRM:
    return DynamicRM(structure.lattice, structure)


def expand_dual(dyn: DynamicRM, r: int, t: int, cap: int = 4096,
                reference: Optional[Measure] = None) -> DualRep:
    """Enumerate all node-wise kernel selections between r and t as a DualRep.

    Each selection induces a path-law measure (nodes outside [r, t) default
    to choice 0) and a penalty variable at time r: the selection-expected sum
    of the chosen one-step penalties along [r, t).  Evaluating the expanded
    representation reproduces the recursion.
    """
    lat = dyn.lattice
    nodes = [(u, i) for u in range(r, t) for i in range(lat.n_nodes(u))]
    sizes = [len(dyn.structure.choices[u][i]) for u, i in nodes]
    count = int(np.prod(sizes)) if sizes else 1
    if count > cap:
        raise ValueError(f"selection count {count} exceeds cap {cap}")

    comps = []
    for combo in itertools.product(*(range(sz) for sz in sizes)):
        pick = dict(zip(nodes, combo))
        kernels = []
        for u in range(lat.n_times - 1):
            level = []
            for i in range(lat.n_nodes(u)):
                j = pick.get((u, i), 0)
                level.append(dyn.structure.choices[u][i][j][0])
            kernels.append(tuple(level))
        Q = Measure(lat, tuple(kernels))
        # expected accumulated penalty along [r, t) under the selection
        acc = np.zeros(lat.n_nodes(t))
        for u in range(t - 1, r - 1, -1):
            nxt = np.empty(lat.n_nodes(u))
            for i in range(lat.n_nodes(u)):
                w, a = dyn.structure.choices[u][i][pick[(u, i)]]
                nxt[i] = a + float(np.dot(w, acc[lat.children[u][i]]))
            acc = nxt
        comps.append((Q, RandomVariable(lat, r, acc, allow_infinite=True)))
    return DualRep(r, t, tuple(comps), reference=reference)


def check_cocycle(rep_rt: DualRep, rep_rs: DualRep, rep_st: DualRep, Q: Measure):
    """Residual of alpha_{r,t}(Q) = alpha_{r,s}(Q) + E_Q(alpha_{s,t}(Q) | B_r).

    Returns (residual at r, indeterminate mask); a node is indeterminate when
    the combination involves inf - inf.
    """
    r, s, t = rep_rt.s, rep_st.s, rep_st.t
    if not (rep_rs.s == r and rep_rs.t == s and rep_rt.t == t):
        raise ValueError("representation indices do not chain as r <= s <= t")
    a_rt = minimal_penalty(rep_rt, Q).values
    a_rs = minimal_penalty(rep_rs, Q).values
    a_st = minimal_penalty(rep_st, Q)
    e_st = conditional_expectation(a_st, Q, r).values
    with np.errstate(invalid="ignore"):
        res = a_rt - a_rs - e_st
    bad = np.isnan(res)
    res = np.where(bad, 0.0, res)
    lat = rep_rt.lattice
    return RandomVariable(lat, r, res, allow_infinite=True), bad


def recursion_violation(rho_rt: Evaluator, rho_rs: Evaluator, rho_st: Evaluator,
                        Xs: Sequence[RandomVariable]) -> float:
    """Max node-wise |rho_{r,t}(X) - rho_{r,s}(-rho_{s,t}(X))| over a test set."""
    composed = compose(rho_rs, rho_st)
    worst = 0.0
    for X in Xs:
        worst = max(worst, float(np.max(np.abs(rho_rt(X).values - composed(X).values))))
    return worst


def check_recursion(dyn: DynamicRM, Xs: Sequence[RandomVariable]) -> float:
    """Max recursion violation over all index triples r <= s <= t."""
    T = dyn.lattice.terminal
    worst = 0.0
    for t in range(T + 1):
        test = [X for X in Xs if X.t == t]
        if not test:
            continue
        for r in range(t + 1):
            for s in range(r, t + 1):
                worst = max(
                    worst,
                    recursion_violation(dyn.evaluator(r, t), dyn.evaluator(r, s),
                                        dyn.evaluator(s, t), test),
                )
    return worst


def acceptance_decompose(X: RandomVariable, dyn: DynamicRM, r: int, s: int,
                         t: int, Q: Measure, tol: float = 1e-9):
    """Split an accepted X in A_{r,t}(Q) as Z + Y with Z in A_{r,s}(Q) and
    Y in A_{s,t}; Y = X + lift(rho_{s,t}(X)), Z = -lift(rho_{s,t}(X))."""
    rho_rt = dyn.rho(r, t, X)
    q_mask = charged_mask(Q, r)
    if np.any(rho_rt.values[q_mask] > tol):
        raise ValueError("X is not accepted between r and t under Q")
    w = dyn.rho(s, t, X)
    Y = X + lift(w, t)
    Z = -lift(w, t)
    if np.any(dyn.rho(s, t, Y).values > tol):
        raise AssertionError("decomposition failed: Y not in the (s,t) acceptance set")
    rho_z = dyn.rho(r, t, Z)  # equals rho_{r,s}(-w) by the recursion
    if np.any(rho_z.values[q_mask] > tol):
        raise AssertionError("decomposition failed: Z not Q-accepted between r and s")
    return Z, Y


def supermartingale_check(dyn: DynamicRM, X: RandomVariable, P: Measure,
                          s_grid: Optional[Sequence[int]] = None,
                          kernel_tol: float = 1e-9) -> float:
    """Max over s < s' of node-wise E_P(rho_{s',T}(X) | B_s) - rho_{s,T}(X).

    Requires a normalized structure in which P is a zero-penalty selection at
    every node, the discrete version of a zero total penalty for P.
    """
    if not dyn.structure.normalized:
        raise ValueError("the dynamic risk measure must be normalized")
    lat = dyn.lattice
    for u in range(lat.n_times - 1):
        for i in range(lat.n_nodes(u)):
            ok = any(
                a == 0.0 and np.max(np.abs(w - P.kernels[u][i])) <= kernel_tol
                for w, a in dyn.structure.choices[u][i]
            )
            if not ok:
                raise ValueError(
                    f"P is not a zero-penalty selection at node ({u},{i})"
                )
    T = X.t
    grid = list(s_grid) if s_grid is not None else list(range(T + 1))
    rhos = {s: dyn.rho(s, T, X) for s in grid}
    worst = -np.inf
    for a, s in enumerate(grid):
        for sp in grid[a + 1:]:
            gap = conditional_expectation(rhos[sp], P, s).values - rhos[s].values
            worst = max(worst, float(np.max(gap)))
    return worst


def onestep_to_json(structure: OneStepStructure) -> str:
    levels = []
    for k, level in enumerate(structure.choices):
        nodes = []
        for menu in level:
            nodes.append(
                [{"weights": [float(v) for v in w],
                  "penalty": "inf" if np.isinf(a) else float(a)} for w, a in menu]
            )
        levels.append(nodes)
    return json.dumps({"choices": levels}, sort_keys=True)


def onestep_from_json(text: str, lattice: ScenarioLattice) -> OneStepStructure:
    doc = json.loads(text)
    levels = []
    for level in doc["choices"]:
        nodes = []
        for menu in level:
            nodes.append(
                tuple(
                    (np.asarray(e["weights"], dtype=float),
                     np.inf if e["penalty"] == "inf" else float(e["penalty"]))
                    for e in menu
                )
            )
        levels.append(tuple(nodes))
    return OneStepStructure(lattice, tuple(levels))
