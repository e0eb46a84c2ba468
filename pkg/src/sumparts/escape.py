"""Escape mechanisms for local optima, driven by the decomposed sub-objectives.

Two families: non-dominance search (and its unfiltered exhaustive variant)
scan the neighborhoods of a local optimum's neighbors for a strictly better
solution, where the filtered form only descends into neighbors not dominated
by the optimum under (f1, f2). Penalty exploitation re-searches around a
Lin-Kernighan optimum after surcharging a few of its edges.

Scan order is the same fixed lexicographic order local search uses, so the
filtered scan consumes a subset of the unfiltered scan's evaluations on the
same input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instances import MAXIMIZE, MINIMIZE, Tour, TspInstance
from .search import Budget, NeighborList, PenalizedTspObjective, lk_search, unlimited


@dataclass(frozen=True)
class ObjectivePair:
    """A solution's (f1, f2) values under its instance's optimization sense."""

    v1: float
    v2: float
    sense: int = MINIMIZE


def dominates(u: ObjectivePair, v: ObjectivePair) -> bool:
    """Componentwise dominance; reversed for maximization. Irreflexive."""
    if u.sense != v.sense:
        raise ValueError("cannot compare objective pairs with different senses")
    if u.sense == MINIMIZE:
        return u.v1 <= v.v1 and u.v2 <= v.v2 and (u.v1 < v.v1 or u.v2 < v.v2)
    return u.v1 >= v.v1 and u.v2 >= v.v2 and (u.v1 > v.v1 or u.v2 > v.v2)


def non_dominated(u: ObjectivePair, v: ObjectivePair) -> bool:
    return not dominates(u, v) and not dominates(v, u)


def dominated_mask(sense: int, d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    """Which neighbors a local optimum dominates, from sub-objective deltas.

    d1/d2 are f1/f2 changes of each neighbor relative to the optimum.
    """
    if sense == MINIMIZE:
        return (d1 >= 0.0) & (d2 >= 0.0) & ((d1 > 0.0) | (d2 > 0.0))
    return (d1 <= 0.0) & (d2 <= 0.0) & ((d1 < 0.0) | (d2 < 0.0))


def _inner_improvement(view, sol, neighbor_idx, delta, f_star, budget):
    """Scan one neighbor's neighborhood for a solution strictly beating f_star."""
    cand = view.neighbor(sol, neighbor_idx, delta)
    threshold = f_star - view.value(cand)
    k = view.first_improvement(cand, threshold, budget)
    if k is None:
        return None
    view.apply(cand, k)
    return cand


def nds(sol, view, budget: Budget | None = None):
    """Two-hop escape filtered by non-dominance (first-improvement).

    Scans neighbors x' of the local optimum; whenever the optimum does not
    dominate x' under (f1, f2), scans x''s neighborhood and returns the first
    x'' strictly better than the optimum. Returns the input unchanged when no
    improvement is found or the budget runs out between inner scans.
    """
    if view.split is None:
        raise ValueError("nds requires a split-aware neighborhood view")
    budget = budget if budget is not None else unlimited()
    f_star = view.value(sol)
    d, d1, d2 = view.split_deltas(sol, budget)
    dominated = dominated_mask(view.sense, d1, d2)
    for k in np.flatnonzero(~dominated):
        if budget.exhausted():
            return sol
        got = _inner_improvement(view, sol, int(k), float(d[k]), f_star, budget)
        if got is not None:
            return got
    return sol


def ens(sol, view, budget: Budget | None = None):
    """The same two-hop escape without the dominance filter (scans every x')."""
    budget = budget if budget is not None else unlimited()
    f_star = view.value(sol)
    d = view.deltas(sol, budget)
    for k in range(view.size):
        if budget.exhausted():
            return sol
        got = _inner_improvement(view, sol, k, float(d[k]), f_star, budget)
        if got is not None:
            return got
    return sol


# ---------------------------------------------------------------------------
# penalty exploitation around Lin-Kernighan optima


@dataclass(frozen=True)
class PenaltyConfig:
    """Exploitation controls: rounds T, penalized edge count k, surcharge."""

    rounds: int = 1000
    k_edges: int = 5
    c_tilde: float | None = None  # None: use the instance's largest edge cost

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.k_edges < 1:
            raise ValueError("k_edges must be >= 1")
        if self.c_tilde is not None and self.c_tilde <= 0:
            raise ValueError("c_tilde must be positive")

    def resolve_c_tilde(self, inst: TspInstance) -> float:
        return self.c_tilde if self.c_tilde is not None else inst.max_cost


def add_random_penalty(x_star: Tour, inst: TspInstance, cfg: PenaltyConfig,
                       rng: np.random.Generator) -> PenalizedTspObjective:
    """Surcharge k distinct random edges of the tour; returns the cost view."""
    n = x_star.n
    if cfg.k_edges > n:
        raise ValueError("cannot penalize more edges than the tour has")
    positions = rng.choice(n, size=cfg.k_edges, replace=False)
    order = x_star.order
    edges = [(int(order[p]), int(order[(p + 1) % n])) for p in positions]
    return PenalizedTspObjective(inst, edges, cfg.resolve_c_tilde(inst))


def further_exploit(x_star: Tour, inst: TspInstance, neighbors: NeighborList,
                    cfg: PenaltyConfig, budget: Budget | None = None,
                    rng: np.random.Generator | None = None) -> Tour:
    """Penalty-driven exploitation of an LK local optimum.

    Up to T rounds: penalize k random tour edges, LK-search the penalized
    objective from the optimum, then LK-search the plain objective from the
    result; return the first strict improvement immediately. After T failed
    rounds (or budget exhaustion) the original tour is returned.
    """
    budget = budget if budget is not None else unlimited()
    rng = rng if rng is not None else np.random.default_rng()
    for _ in range(cfg.rounds):
        if budget.exhausted():
            break
        penalized = add_random_penalty(x_star, inst, cfg, rng)
        x_p = lk_search(inst, neighbors, x_star.copy(), budget, objective=penalized)[0]
        x_pp = lk_search(inst, neighbors, x_p, budget)[0]
        if x_pp.cached_cost < x_star.cached_cost:
            return x_pp
    return x_star
