"""Conditional convex risk measures in dual form.

A conditional risk measure between times s and t is stored as a finite list
of (measure, penalty) components and evaluated node-wise as

    rho(X)(n) = max_k ( E_{Q_k}(-X | n) - alpha_k(n) ),

a maximum of affine functions of X.  The minimal penalty of an arbitrary
measure Q is the convex conjugate of that evaluator: at each time-s node it
is the cheapest convex-combination cost of writing Q's conditional subtree
law as a mixture of the components' laws, computed by a small linear
program (+inf when infeasible).  A brute-force oracle over a growing box
validates this in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import json
import numpy as np
from scipy.optimize import linprog

from .lattice import RandomVariable, ScenarioLattice, lift
from .measures import (
    Measure,
    charged_mask,
    check_restriction,
    conditional_expectation,
    measure_from_json,
    measure_to_json,
)

__all__ = [
    "DualRep",
    "rm_evaluate",
    "minimal_penalty",
    "partition_combine",
    "acceptance_check",
    "strong_convexity_check",
    "dualrep_to_json",
    "dualrep_from_json",
]


@dataclass(frozen=True)
class DualRep:
    """Conditional risk measure rho_{s,t} as (measure, penalty) components.

    Penalties are time-s variables with values in R union {+inf}; at every
    time-s node at least one component must be finite.  An optional
    reference measure carries the restriction discipline for minimal
    penalties (components themselves are only read through their kernels on
    [s, t), so their law before s never enters an evaluation).
    """

    s: int
    t: int
    components: tuple  # of (Measure, RandomVariable at s, allow_infinite)
    reference: Optional[Measure] = None

    def __post_init__(self):
        if not 0 <= self.s <= self.t:
            raise ValueError("need 0 <= s <= t")
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a dual representation needs at least one component")
        lat = comps[0][0].lattice
        pen = np.stack([a.values for _, a in comps])
        for Q, a in comps:
            if Q.lattice is not lat or a.lattice is not lat or a.t != self.s:
                raise ValueError("components must share the lattice; penalties at time s")
        if np.any(np.all(np.isinf(pen), axis=0)):
            raise ValueError("every time-s node needs a finite-penalty component")
        object.__setattr__(self, "components", comps)

    @property
    def lattice(self) -> ScenarioLattice:
        return self.components[0][0].lattice

    def as_evaluator(self):
        from .dynamics import Evaluator

        return Evaluator(self.s, self.t, lambda X: rm_evaluate(self, X))


def rm_evaluate(rep: DualRep, X: RandomVariable, return_argmax: bool = False):
    """Node-wise max over components of E_{Q_k}(-X | node) - alpha_k(node).

    Infinite-penalty components are skipped; ties resolve to the lowest
    component index (deterministic golden tests).
    """
    if X.t != rep.t:
        raise ValueError(f"X must live at time index {rep.t}, got {X.t}")
    if X.lattice is not rep.lattice:
        raise ValueError("X lives on a different lattice")
    rows = []
    for Q, alpha in rep.components:
        ce = conditional_expectation(-X, Q, rep.s)
        rows.append(np.where(np.isinf(alpha.values), -np.inf, ce.values - alpha.values))
    table = np.stack(rows)
    arg = np.argmax(table, axis=0)  # first max wins
    out = RandomVariable(rep.lattice, rep.s, table[arg, np.arange(table.shape[1])])
    if return_argmax:
        return out, arg
    return out


def minimal_penalty(rep: DualRep, Q: Measure,
                    reference: Optional[Measure] = None) -> RandomVariable:
    """Convex conjugate of the evaluator at Q, node-wise by linear program.

    At time-s node n, solves  min sum_k lam_k alpha_k(n)  subject to
    lam in the simplex and  sum_k lam_k q_k(n, .) = q(n, .)  on the time-t
    descendants; +inf when infeasible.  Components with infinite penalty at
    n are excluded from the program.
    """
    ref = reference if reference is not None else rep.reference
    if ref is not None:
        status = check_restriction(Q, ref, rep.s)
        if status != "equal":
            raise ValueError(
                f"restriction of Q to B_{rep.s} is {status}, expected equal to the reference"
            )
    lat = rep.lattice
    s, t = rep.s, rep.t
    out = np.empty(lat.n_nodes(s))
    for n in range(lat.n_nodes(s)):
        target = Q.conditional_subtree_probs(s, n, t)
        cols, costs = [], []
        for Qk, alpha in rep.components:
            if np.isinf(alpha.values[n]):
                continue
            cols.append(Qk.conditional_subtree_probs(s, n, t))
            costs.append(alpha.values[n])
        A = np.stack(cols, axis=1)
        A_eq = np.vstack([A, np.ones((1, A.shape[1]))])
        b_eq = np.concatenate([target, [1.0]])
        res = linprog(np.asarray(costs), A_eq=A_eq, b_eq=b_eq,
                      bounds=[(0, None)] * A.shape[1], method="highs")
        out[n] = res.fun if res.status == 0 else np.inf
    return RandomVariable(lat, s, out, allow_infinite=True)


def partition_combine(lattice: ScenarioLattice, s: int,
                      pieces: Sequence) -> RandomVariable:
    """Glue time-t variables along a partition of the time-s nodes.

    ``pieces`` is a list of (X_i, iterable of time-s node indices); the sets
    must partition the time-s slice.  The result takes X_i's value at every
    leaf whose time-s ancestor lies in A_i.
    """
    if not pieces:
        raise ValueError("need at least one piece")
    t = pieces[0][0].t
    seen = np.full(lattice.n_nodes(s), -1, dtype=int)
    for idx, (X, nodes) in enumerate(pieces):
        if X.t != t or X.lattice is not lattice:
            raise ValueError("pieces must share the lattice and time index")
        for n in nodes:
            if seen[n] != -1:
                raise ValueError(f"time-{s} node {n} covered twice")
            seen[n] = idx
    if np.any(seen == -1):
        raise ValueError("partition does not cover all time-s nodes")
    anc = lattice.ancestors_of_slice(t, s)
    vals = np.empty(lattice.n_nodes(t))
    for idx, (X, _) in enumerate(pieces):
        mask = seen[anc] == idx
        vals[mask] = X.values[mask]
    return RandomVariable(lattice, t, vals)


def acceptance_check(rep: DualRep, X: RandomVariable,
                     Q: Optional[Measure] = None, tol: float = 1e-9):
    """Membership in the acceptance set: rho(X) <= 0 node-wise.

    Without Q, checks every node charged by the representation's reference
    (every node when no reference is attached).  With Q, checks only the
    Q-charged time-s nodes.  Returns (overall, per-node booleans).
    """
    rho = rm_evaluate(rep, X)
    ok = rho.values <= tol
    if Q is not None:
        mask = charged_mask(Q, rep.s)
    elif rep.reference is not None:
        mask = charged_mask(rep.reference, rep.s)
    else:
        mask = np.ones_like(ok, dtype=bool)
    return bool(np.all(ok | ~mask)), ok


def strong_convexity_check(rep: DualRep, X: RandomVariable, Y: RandomVariable,
                           f: RandomVariable) -> float:
    """Max node-wise violation of rho(fX + (1-f)Y) <= f rho(X) + (1-f) rho(Y)
    for a time-s weight 0 <= f <= 1; non-positive up to rounding for any
    dual representation."""
    if f.t != rep.s:
        raise ValueError("the weight f must live at time s")
    if np.any(f.values < 0) or np.any(f.values > 1):
        raise ValueError("the weight f must take values in [0, 1]")
    fl = lift(f, rep.t)
    mixed = RandomVariable(rep.lattice, rep.t,
                           fl.values * X.values + (1.0 - fl.values) * Y.values)
    lhs = rm_evaluate(rep, mixed).values
    rhs = f.values * rm_evaluate(rep, X).values \
        + (1.0 - f.values) * rm_evaluate(rep, Y).values
    return float(np.max(lhs - rhs))


def dualrep_to_json(rep: DualRep) -> str:
    comps = []
    for Q, alpha in rep.components:
        pen = ["inf" if np.isinf(v) else float(v) for v in alpha.values]
        comps.append({"measure": json.loads(measure_to_json(Q)), "penalty": pen})
    return json.dumps({"s": rep.s, "t": rep.t, "components": comps}, sort_keys=True)


def dualrep_from_json(text: str, lattice: ScenarioLattice,
                      reference: Optional[Measure] = None) -> DualRep:
    doc = json.loads(text)
    s, t = int(doc["s"]), int(doc["t"])
    comps = []
    for c in doc["components"]:
        Q = measure_from_json(json.dumps(c["measure"]), lattice)
        pen = np.array([np.inf if v == "inf" else float(v) for v in c["penalty"]])
        comps.append((Q, RandomVariable(lattice, s, pen, allow_infinite=True)))
    return DualRep(s, t, tuple(comps), reference=reference)
