"""Uncertain-volatility pricing and conditional G-expectations on grids.

The upper price of a terminal payoff over all zero-mean trinomial kernels
with one-step variance in a band [lo, hi] reduces, step by step, to

    V <- V + dt * g(second difference),   g(a) = (hi * a+  -  lo * a-) / 2,

because the one-step expectation is linear in the variance choice and the
sup is attained at a band endpoint.  The same generator drives the explicit
finite-difference scheme for the nonlinear PDE; the two code paths are kept
separate and cross-checked.  Bid = -ask(-X), so convex payoffs price at the
upper volatility and concave ones at the lower (closed-form oracles in the
tests).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .lattice import RandomVariable, ScenarioLattice, coordinate_process

__all__ = [
    "VolatilityBand",
    "GridSpec",
    "PayoffSpec",
    "CFLError",
    "g_function",
    "robust_lattice_price",
    "bsb_solve",
    "bid_ask",
    "conditional_gexp",
    "quadratic_variation",
    "integration_by_parts_residual",
    "band_membership",
    "random_inband_field",
    "expectation_under_field",
]


class CFLError(ValueError):
    """Explicit-scheme stability bound dt * sigma_high^2 <= h^2 violated."""


@dataclass(frozen=True)
class VolatilityBand:
    """Lower/upper volatility, constant or sampled per time step."""

    sigma_low: np.ndarray
    sigma_high: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.sigma_low, dtype=float))
        hi = np.atleast_1d(np.asarray(self.sigma_high, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("sigma_low and sigma_high must have the same shape")
        if np.any(lo < 0) or np.any(hi < lo):
            raise ValueError("need 0 <= sigma_low <= sigma_high")
        object.__setattr__(self, "sigma_low", lo)
        object.__setattr__(self, "sigma_high", hi)

    def at_step(self, k: int):
        lo = self.sigma_low[k % self.sigma_low.size] if self.sigma_low.size > 1 \
            else self.sigma_low[0]
        hi = self.sigma_high[k % self.sigma_high.size] if self.sigma_high.size > 1 \
            else self.sigma_high[0]
        return float(lo), float(hi)

    @property
    def max_high(self) -> float:
        return float(np.max(self.sigma_high))


@dataclass(frozen=True)
class GridSpec:
    """Uniform time/space grid for the band recursions."""

    dt: float
    h: float
    radius: int  # number of space levels on each side of 0
    horizon: float

    def __post_init__(self):
        if self.dt <= 0 or self.h <= 0 or self.radius < 1 or self.horizon <= 0:
            raise ValueError("grid parameters must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def x(self) -> np.ndarray:
        return np.arange(-self.radius, self.radius + 1) * self.h

    def check_cfl(self, band: VolatilityBand):
        bound = self.h ** 2 / band.max_high ** 2
        if self.dt > bound * (1 + 1e-12):
            raise CFLError(
                f"dt={self.dt} violates the stability bound dt <= h^2/sigma_high^2 "
                f"= {bound:.6g}; reduce dt or enlarge h"
            )


@dataclass(frozen=True)
class PayoffSpec:
    """Terminal payoff f(B_T) or cylinder payoff phi(B_t1, ..., B_tk)."""

    kind: str  # "terminal" | "cylinder"
    fn: Callable
    monitoring_times: tuple = ()
    lipschitz: float = 1.0
    max_coords: int = 2

    def __post_init__(self):
        if self.kind not in ("terminal", "cylinder"):
            raise ValueError(f"unknown payoff kind {self.kind!r}")
        if self.kind == "cylinder":
            if not self.monitoring_times:
                raise ValueError("cylinder payoffs need monitoring times")
            if len(self.monitoring_times) > self.max_coords:
                raise ValueError(
                    f"{len(self.monitoring_times)} monitoring dates exceed the "
                    f"cap {self.max_coords}"
                )
            if any(b <= a for a, b in zip(self.monitoring_times,
                                          self.monitoring_times[1:])):
                raise ValueError("monitoring times must be strictly increasing")


def g_function(a: float, sigma_low: float, sigma_high: float):
    """Band generator g(a) = (sigma_high^2 a+ - sigma_low^2 a-) / 2.

    Monotone and positively homogeneous in a; g(0) = 0.
    """
    a = np.asarray(a, dtype=float)
    out = 0.5 * (sigma_high ** 2 * np.maximum(a, 0.0)
                 - sigma_low ** 2 * np.maximum(-a, 0.0))
    return out if out.ndim else float(out)


def _second_difference(v: np.ndarray, h: float) -> np.ndarray:
    """Discrete curvature on the interior; linear extrapolation boundary
    (zero curvature at the edges)."""
    d = np.zeros_like(v)
    d[..., 1:-1] = (v[..., 2:] + v[..., :-2] - 2.0 * v[..., 1:-1]) / h ** 2
    return d


def robust_lattice_price(payoff, band: VolatilityBand, grid: GridSpec,
                         lower: bool = False):
    """Backward trinomial recursion over the band; returns (value at (0, 0),
    full surface of shape (n_steps + 1, n_space)).

    One step takes, per state, the better of the two band-endpoint kernels
    p_+- = v/(2 h^2), p_0 = 1 - v/h^2 -- the sup over the band is attained
    there because the expectation is linear in v.
    """
    grid.check_cfl(band)
    x = grid.x
    v = np.asarray(payoff(x), dtype=float)
    surface = np.empty((grid.n_steps + 1, x.size))
    surface[grid.n_steps] = v
    for k in range(grid.n_steps - 1, -1, -1):
        lo, hi = band.at_step(k)
        d2 = _second_difference(v, grid.h)
        cand_lo = v + 0.5 * lo ** 2 * grid.dt * d2
        cand_hi = v + 0.5 * hi ** 2 * grid.dt * d2
        v = np.minimum(cand_lo, cand_hi) if lower else np.maximum(cand_lo, cand_hi)
        surface[k] = v
    return float(v[grid.radius]), surface


def bsb_solve(payoff, band: VolatilityBand, grid: GridSpec,
              lower: bool = False):
    """Explicit finite-difference scheme u(t - dt) = u(t) + dt g(D2 u).

    Same generator as the lattice recursion but written through g directly;
    returns (value at (0, 0), full surface).
    """
    grid.check_cfl(band)
    x = grid.x
    u = np.asarray(payoff(x), dtype=float)
    surface = np.empty((grid.n_steps + 1, x.size))
    surface[grid.n_steps] = u
    for k in range(grid.n_steps - 1, -1, -1):
        lo, hi = band.at_step(k)
        d2 = _second_difference(u, grid.h)
        if lower:
            u = u - grid.dt * g_function(-d2, lo, hi)
        else:
            u = u + grid.dt * g_function(d2, lo, hi)
        surface[k] = u
    return float(u[grid.radius]), surface


def bid_ask(payoff, band: VolatilityBand, grid: GridSpec, method: str = "lattice"):
    """(bid, ask) values and surfaces; bid = -ask(-X), bid <= ask node-wise."""
    solver = robust_lattice_price if method == "lattice" else bsb_solve
    ask, ask_surface = solver(payoff, band, grid, lower=False)
    neg_val, neg_surface = solver(lambda x: -np.asarray(payoff(x)), band, grid,
                                  lower=False)
    return -neg_val, ask, -neg_surface, ask_surface


def _evolve(values: np.ndarray, band: VolatilityBand, grid: GridSpec,
            k_from: int, k_to: int, lower: bool) -> np.ndarray:
    """Backward band evolution of a (..., n_space) array from step k_from
    down to k_to along the last axis."""
    v = values
    for k in range(k_from - 1, k_to - 1, -1):
        lo, hi = band.at_step(k)
        d2 = _second_difference(v, grid.h)
        if lower:
            v = v - grid.dt * g_function(-d2, lo, hi)
        else:
            v = v + grid.dt * g_function(d2, lo, hi)
    return v


def conditional_gexp(payoff: PayoffSpec, band: VolatilityBand, grid: GridSpec,
                     s: float, observed: Sequence[float] = (),
                     lower: bool = False):
    """Conditional band expectation of a cylinder payoff at time s.

    Peels monitoring dates backward: between dates the running coordinate is
    evolved with the band generator; at a date the observed (or frozen)
    coordinate is substituted.  ``observed`` carries the values of the
    monitoring coordinates with t_i <= s.  Returns (surface over the space
    grid as a function of B_s, interpolating callable).
    """
    grid.check_cfl(band)
    if payoff.kind == "terminal":
        times = (grid.horizon,)
        fn = payoff.fn
    else:
        times = payoff.monitoring_times
        fn = payoff.fn
    steps = [int(round(u / grid.dt)) for u in times]
    if any(abs(u - k * grid.dt) > 1e-9 for u, k in zip(times, steps)):
        raise ValueError("monitoring times must lie on the time grid")
    s_step = int(round(s / grid.dt))
    if abs(s - s_step * grid.dt) > 1e-9:
        raise ValueError("the conditioning time must lie on the time grid")

    x = grid.x
    n_obs = sum(1 for u in times if u <= s + 1e-12)
    if len(observed) != n_obs:
        raise ValueError(f"expected {n_obs} observed coordinates, got {len(observed)}")
    fixed = list(observed)
    free = list(times[n_obs:])
    free_steps = steps[n_obs:]

    if not free:
        # fully observed: a deterministic value, constant in B_s
        val = float(fn(*fixed))
        surf = np.full(x.size, val)
    elif len(free) == 1:
        terminal = np.asarray(fn(*fixed, x), dtype=float)
        surf = _evolve(terminal, band, grid, free_steps[0], s_step, lower)
    elif len(free) == 2:
        k1, k2 = free_steps
        # state augmentation: rows index the frozen first coordinate
        yy, xx = np.meshgrid(x, x, indexing="ij")
        w = np.asarray(fn(*fixed, yy, xx), dtype=float)
        w = _evolve(w, band, grid, k2, k1, lower)
        diag = np.diagonal(w).copy()  # at t1 the running value is the coordinate
        surf = _evolve(diag, band, grid, k1, s_step, lower)
    else:
        raise ValueError("more than 2 free monitoring dates need the tree fallback")

    def value(b_s: float) -> float:
        return float(np.interp(b_s, x, surf))

    return surf, value


def quadratic_variation(lattice: ScenarioLattice, t: int, coord: int = 0) -> RandomVariable:
    """Accumulated squared increments sum (Delta B)^2 along the ancestry."""
    vals = np.zeros(1)
    for u in range(1, t + 1):
        par = np.asarray(lattice.parents[u], dtype=int)
        vals = vals[par] + lattice.increments[u][:, coord] ** 2
    return RandomVariable(lattice, t, vals)


def integration_by_parts_residual(lattice: ScenarioLattice, t: int,
                                  coord: int = 0) -> RandomVariable:
    """Node-wise residual of B_t^2 - 2 sum B_u Delta B_{u+1} = sum (Delta B)^2,
    which vanishes identically (discrete integration by parts)."""
    b = coordinate_process(lattice, t, coord).values
    stoch_int = np.zeros(1)
    level = np.zeros(1)
    for u in range(1, t + 1):
        par = np.asarray(lattice.parents[u], dtype=int)
        stoch_int = stoch_int[par] + level[par] * lattice.increments[u][:, coord]
        level = level[par] + lattice.increments[u][:, coord]
    qv = quadratic_variation(lattice, t, coord).values
    return RandomVariable(lattice, t, b ** 2 - 2.0 * stoch_int - qv)


def band_membership(Q, band: VolatilityBand, dt: float,
                    mean_tol: float = 1e-10, var_tol: float = 1e-12) -> bool:
    """True iff every kernel of Q has zero mean and one-step variance inside
    [sigma_low^2 dt, sigma_high^2 dt] (martingale measure within the band)."""
    lat = Q.lattice
    for k in range(lat.n_times - 1):
        lo, hi = band.at_step(k)
        vlo, vhi = lo ** 2 * dt, hi ** 2 * dt
        for i in range(lat.n_nodes(k)):
            w = Q.kernels[k][i]
            inc = lat.increments[k + 1][lat.children[k][i], 0]
            mean = float(np.dot(w, inc))
            var = float(np.dot(w, inc ** 2))
            if abs(mean) > mean_tol or var < vlo - var_tol or var > vhi + var_tol:
                return False
    return True


def random_inband_field(grid: GridSpec, band: VolatilityBand,
                        rng: np.random.Generator) -> np.ndarray:
    """Random one-step variance field v(step, state) inside the band."""
    lo = np.empty(grid.n_steps)
    hi = np.empty(grid.n_steps)
    for k in range(grid.n_steps):
        lo[k], hi[k] = band.at_step(k)
    u = rng.uniform(size=(grid.n_steps, grid.x.size))
    return (lo[:, None] ** 2 + u * (hi[:, None] ** 2 - lo[:, None] ** 2)) * grid.dt


def expectation_under_field(payoff, vfield: np.ndarray, grid: GridSpec) -> float:
    """E_Q of a terminal payoff under the martingale measure with one-step
    variances ``vfield`` (linear backward recursion, no sup)."""
    if vfield.shape != (grid.n_steps, grid.x.size):
        raise ValueError("variance field shape mismatch")
    if np.max(vfield) > grid.h ** 2 * (1 + 1e-12):
        raise CFLError("variance field violates the kernel positivity bound")
    v = np.asarray(payoff(grid.x), dtype=float)
    for k in range(grid.n_steps - 1, -1, -1):
        d2 = _second_difference(v, grid.h)
        v = v + 0.5 * vfield[k] * d2
    return float(v[grid.radius])
