"""Local search kernels, perturbations and their function-evaluation accounting.

All kernels count one FE per neighbor delta (or full) evaluation and stop
between neighborhood scans once the budget is exhausted, so a run can
overshoot its budget by at most one scan. First-improvement scans use a fixed
lexicographic move order and restart from the first move after each accepted
move, which makes every seeded run exactly reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .instances import (
    MAXIMIZE,
    MINIMIZE,
    BitVector,
    NeighborList,
    QuboInstance,
    Tour,
    TspInstance,
    apply_two_opt,
    flip_delta_and_update,
    make_bitvector,
    tour_cost,
)


@dataclass
class Budget:
    """Function-evaluation (and optional wall-clock) budget with a running count."""

    max_fe: float | None = None
    max_wall: float | None = None
    consumed_fe: int = 0
    _t0: float | None = field(default=None, repr=False)

    def start_clock(self):
        if self._t0 is None:
            self._t0 = time.monotonic()

    def charge(self, k: int):
        self.consumed_fe += int(k)

    def elapsed(self) -> float:
        return 0.0 if self._t0 is None else time.monotonic() - self._t0

    def exhausted(self) -> bool:
        if self.max_fe is not None and self.consumed_fe >= self.max_fe:
            return True
        if self.max_wall is not None:
            self.start_clock()
            if time.monotonic() - self._t0 >= self.max_wall:
                return True
        return False


def unlimited() -> Budget:
    return Budget()


def better(sense: int, a: float, b: float) -> bool:
    """True when value a improves on value b under the given sense."""
    return a < b if sense == MINIMIZE else a > b


# ---------------------------------------------------------------------------
# neighborhood views
#
# A view exposes one instance's standard move set (2-Opt or 1-bit-flip) in a
# fixed lexicographic order, with vectorized delta computation whose FE
# charges match a sequential scan exactly.


@lru_cache(maxsize=32)
def _two_opt_moves(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Position pairs (p, q) of all n(n-3)/2 distinct 2-Opt moves, lexicographic."""
    ps, qs = [], []
    for p in range(n - 2):
        hi = n - 1 if p > 0 else n - 2  # (0, n-1) recreates the same tour
        for q in range(p + 2, hi + 1):
            ps.append(p)
            qs.append(q)
    return np.asarray(ps, dtype=np.intp), np.asarray(qs, dtype=np.intp)


class TwoOptNeighborhood:
    """2-Opt move space of a TSP instance (optionally split-aware)."""

    sense = MINIMIZE

    def __init__(self, inst: TspInstance, split=None):
        self.inst = inst
        self.split = split
        self.p, self.q = _two_opt_moves(inst.n)
        self.size = self.p.shape[0]

    def deltas(self, tour: Tour, budget: Budget | None = None) -> np.ndarray:
        """f deltas of every move, charging one FE per move."""
        t = tour.order
        nxt = np.roll(t, -1)
        a, b = t[self.p], nxt[self.p]
        c, d = t[self.q], nxt[self.q]
        m = self.inst.costs
        out = m[a, c] + m[b, d] - m[a, b] - m[c, d]
        if budget is not None:
            budget.charge(self.size)
        return out

    def split_deltas(self, tour: Tour, budget: Budget | None = None):
        """(f, f1, f2) deltas of every move; each pair counts as one FE.

        The f delta comes from the original cost matrix, not from d1 + d2,
        so downstream cache arithmetic stays exact on integer instances.
        """
        t = tour.order
        nxt = np.roll(t, -1)
        a, b = t[self.p], nxt[self.p]
        c, d = t[self.q], nxt[self.q]
        m = self.inst.costs
        m1, m2 = self.split.mat1, self.split.mat2
        d0 = m[a, c] + m[b, d] - m[a, b] - m[c, d]
        d1 = m1[a, c] + m1[b, d] - m1[a, b] - m1[c, d]
        d2 = m2[a, c] + m2[b, d] - m2[a, b] - m2[c, d]
        if budget is not None:
            budget.charge(self.size)
        return d0, d1, d2

    def first_improvement(self, tour: Tour, threshold: float, budget: Budget):
        """Index of the first move improving past threshold, else None.

        Charges exactly what a sequential scan would evaluate.
        """
        d = self.deltas(tour, budget=None)
        hits = np.flatnonzero(d < threshold)
        if hits.shape[0] == 0:
            budget.charge(self.size)
            return None
        k = int(hits[0])
        budget.charge(k + 1)
        return k

    def move_delta(self, tour: Tour, k: int) -> float:
        t = tour.order
        n = t.shape[0]
        p, q = int(self.p[k]), int(self.q[k])
        a, b = t[p], t[p + 1]
        c, d = t[q], t[(q + 1) % n]
        m = self.inst.costs
        return float(m[a, c] + m[b, d] - m[a, b] - m[c, d])

    def apply(self, tour: Tour, k: int, delta: float | None = None):
        if delta is None:
            delta = self.move_delta(tour, k)
        apply_two_opt(tour, int(self.p[k]), int(self.q[k]), float(delta))

    def neighbor(self, tour: Tour, k: int, delta: float | None = None) -> Tour:
        out = tour.copy()
        self.apply(out, k, delta)
        return out

    def value(self, tour: Tour) -> float:
        return tour.cached_cost

    def random_solution(self, rng: np.random.Generator) -> Tour:
        order = np.asarray(rng.permutation(self.inst.n), dtype=np.intp)
        return Tour(order, tour_cost(self.inst, order))

    def perturb(self, tour: Tour, rng: np.random.Generator) -> Tour:
        if self.inst.n >= 8:
            return double_bridge(self.inst, tour, rng)
        return pair_swap_kick(self.inst, tour, rng)


class FlipNeighborhood:
    """1-bit-flip move space of a UBQP instance (optionally split-aware)."""

    sense = MAXIMIZE

    def __init__(self, inst: QuboInstance, split=None, flip_fraction: float = 0.25):
        self.inst = inst
        self.split = split
        self.size = inst.n
        self.flip_fraction = flip_fraction

    def deltas(self, bv: BitVector, budget: Budget | None = None) -> np.ndarray:
        if budget is not None:
            budget.charge(self.size)
        return bv.gains.copy()

    def split_deltas(self, bv: BitVector, budget: Budget | None = None):
        if bv.gains1 is None:
            raise ValueError("BitVector was built without a split")
        if budget is not None:
            budget.charge(self.size)
        d1 = bv.gains1.copy()
        return bv.gains.copy(), d1, bv.gains - d1

    def first_improvement(self, bv: BitVector, threshold: float, budget: Budget):
        hits = np.flatnonzero(bv.gains > threshold)  # maximization
        if hits.shape[0] == 0:
            budget.charge(self.size)
            return None
        k = int(hits[0])
        budget.charge(k + 1)
        return k

    def move_delta(self, bv: BitVector, k: int) -> float:
        return float(bv.gains[k])

    def apply(self, bv: BitVector, k: int, delta: float | None = None):
        flip_delta_and_update(self.inst, bv, k)

    def neighbor(self, bv: BitVector, k: int, delta: float | None = None) -> BitVector:
        out = bv.copy()
        self.apply(out, k)
        return out

    def value(self, bv: BitVector) -> float:
        return bv.cached_value

    def random_solution(self, rng: np.random.Generator) -> BitVector:
        bits = rng.integers(0, 2, size=self.inst.n).astype(np.float64)
        return make_bitvector(self.inst, bits, self.split)

    def perturb(self, bv: BitVector, rng: np.random.Generator) -> BitVector:
        return random_flip_perturbation(self.inst, bv, self.flip_fraction, rng)


def neighborhood_for(inst, split=None):
    if isinstance(inst, TspInstance):
        return TwoOptNeighborhood(inst, split)
    if isinstance(inst, QuboInstance):
        return FlipNeighborhood(inst, split)
    raise TypeError(f"unsupported instance type: {type(inst).__name__}")


# ---------------------------------------------------------------------------
# local search


def descend(view, sol, budget: Budget) -> bool:
    """First-improvement local search to a local optimum of the view's moves.

    Returns True when the final solution was verified locally optimal by a
    full scan, False when the budget ran out first.
    """
    while True:
        if budget.exhausted():
            return False
        k = view.first_improvement(sol, 0.0, budget)
        if k is None:
            return True
        view.apply(sol, k)


def local_search_2opt(inst: TspInstance, tour: Tour, budget: Budget | None = None):
    """2-Opt first-improvement descent; returns (tour, locally_optimal)."""
    budget = budget if budget is not None else unlimited()
    converged = descend(TwoOptNeighborhood(inst), tour, budget)
    return tour, converged


def local_search_1flip(inst: QuboInstance, bv: BitVector, budget: Budget | None = None):
    """1-bit-flip first-improvement ascent; returns (bv, locally_optimal)."""
    budget = budget if budget is not None else unlimited()
    converged = descend(FlipNeighborhood(inst), bv, budget)
    return bv, converged


def is_local_optimum(view, sol) -> bool:
    d = view.deltas(sol)
    return bool(np.all(d >= 0.0)) if view.sense == MINIMIZE else bool(np.all(d <= 0.0))


# ---------------------------------------------------------------------------
# perturbations


def double_bridge(inst: TspInstance, tour: Tour, rng: np.random.Generator) -> Tour:
    """4-edge double bridge kick: cut into A|B|C|D and reconnect as A-D-C-B.

    Cut points are uniform over triples leaving every segment at least two
    cities long, which guarantees exactly four tour edges are replaced.
    """
    n = tour.n
    if n < 8:
        raise ValueError("double bridge needs n >= 8")
    while True:
        cuts = np.sort(rng.choice(np.arange(2, n - 1), size=3, replace=False))
        p1, p2, p3 = (int(c) for c in cuts)
        if p2 - p1 >= 2 and p3 - p2 >= 2:
            break
    t = tour.order
    new_order = np.concatenate([t[:p1], t[p3:], t[p2:p3], t[p1:p2]])
    m = inst.costs
    removed = m[t[p1 - 1], t[p1]] + m[t[p2 - 1], t[p2]] + m[t[p3 - 1], t[p3]] + m[t[-1], t[0]]
    added = m[t[p1 - 1], t[p3]] + m[t[-1], t[p2]] + m[t[p3 - 1], t[p1]] + m[t[p2 - 1], t[0]]
    return Tour(new_order, tour.cached_cost - float(removed) + float(added))


def pair_swap_kick(inst: TspInstance, tour: Tour, rng: np.random.Generator,
                   swaps: int = 2) -> Tour:
    """Kick for tours too short for a double bridge: swap random city pairs."""
    order = tour.order.copy()
    for _ in range(swaps):
        i, j = rng.choice(inst.n, size=2, replace=False)
        order[i], order[j] = order[j], order[i]
    return Tour(order, tour_cost(inst, order))


def random_flip_perturbation(inst: QuboInstance, bv: BitVector, fraction: float,
                             rng: np.random.Generator) -> BitVector:
    """Flip round(fraction * n) distinct random bits; caches fully rebuilt."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    n = bv.n
    count = int(round(fraction * n))
    positions = rng.choice(n, size=count, replace=False)
    bits = bv.bits.copy()
    bits[positions] = 1.0 - bits[positions]
    holder = _SplitHolder(bv.mat1) if bv.mat1 is not None else None
    return make_bitvector(inst, bits, holder)


class _SplitHolder:
    """Minimal split stand-in: only the first sub-matrix is needed."""

    def __init__(self, mat1: np.ndarray):
        self.mat1 = mat1


# ---------------------------------------------------------------------------
# tabu search (UBQP)


@dataclass
class TabuState:
    """Tabu bookkeeping: tenure K and the last flip iteration per variable."""

    tenure: int
    last_flip: np.ndarray
    nonimproving_limit: int


def sample_tenure(n: int, rng: np.random.Generator) -> int:
    """Tenure drawn uniformly from [n/100 + 1, n/100 + 10] (integer division)."""
    base = n // 100
    return int(rng.integers(base + 1, base + 11))


def tabu_search(inst: QuboInstance, bv: BitVector, rng: np.random.Generator,
                budget: Budget, use_aspiration: bool = True) -> BitVector:
    """Best-improvement tabu search over 1-bit flips; returns the best visited.

    A flipped variable is frozen for K moves (K resampled per call). With
    aspiration on, a frozen flip is allowed when it would beat the best
    solution of this call. Stops after 20n moves without improving that best,
    or on budget exhaustion. Every move charges n FEs.
    """
    n = inst.n
    state = TabuState(tenure=sample_tenure(n, rng),
                      last_flip=np.full(n, -(21 * n), dtype=np.int64),
                      nonimproving_limit=20 * n)
    best = bv.copy()
    since_improve = 0
    t = 0
    while since_improve < state.nonimproving_limit and not budget.exhausted():
        budget.charge(n)
        allowed = state.last_flip + state.tenure <= t
        if use_aspiration:
            allowed |= bv.cached_value + bv.gains > best.cached_value
        if not np.any(allowed):
            allowed = np.ones(n, dtype=bool)  # everything frozen: unfreeze all
        masked = np.where(allowed, bv.gains, -np.inf)
        k = int(np.argmax(masked))
        flip_delta_and_update(inst, bv, k)
        state.last_flip[k] = t
        t += 1
        if bv.cached_value > best.cached_value:
            best = bv.copy()
            since_improve = 0
        else:
            since_improve += 1
    return best


# ---------------------------------------------------------------------------
# bounded Lin-Kernighan


class PenalizedTspObjective:
    """A TSP cost view with a surcharge on chosen edges; the base is untouched."""

    def __init__(self, inst: TspInstance, edges, c_tilde: float):
        self.inst = inst
        self.edges = frozenset((min(int(u), int(v)), max(int(u), int(v)))
                               for u, v in edges)
        self.c_tilde = float(c_tilde)
        matrix = inst.costs.copy()
        for u, v in self.edges:
            matrix[u, v] += self.c_tilde
            if u != v:
                matrix[v, u] += self.c_tilde
        matrix.setflags(write=False)
        self.matrix = matrix

    def tour_cost(self, order: np.ndarray) -> float:
        nxt = np.roll(order, -1)
        return float(self.matrix[order, nxt].sum())


LK_DEPTH = 10
LK_BREADTH2 = 5  # alternatives tried at the second chain level


class _LkTour:
    """Array tour with a position index, supporting chained 2-Opt reversals."""

    __slots__ = ("order", "pos", "n")

    def __init__(self, order: np.ndarray):
        self.order = order.copy()
        self.n = order.shape[0]
        self.pos = np.empty(self.n, dtype=np.intp)
        self.pos[self.order] = np.arange(self.n, dtype=np.intp)

    def succ(self, city: int) -> int:
        p = self.pos[city] + 1
        return int(self.order[p if p < self.n else 0])

    def pred(self, city: int) -> int:
        return int(self.order[self.pos[city] - 1])

    def reverse(self, lo: int, hi: int):
        self.order[lo: hi + 1] = self.order[lo: hi + 1][::-1]
        self.pos[self.order[lo: hi + 1]] = np.arange(lo, hi + 1, dtype=np.intp)


def lk_search(inst: TspInstance, neighbors: NeighborList, tour: Tour,
              budget: Budget | None = None,
              objective: PenalizedTspObjective | None = None,
              depth: int = LK_DEPTH, breadth2: int = LK_BREADTH2):
    """Bounded-depth sequential edge exchange (Lin-Kernighan style) descent.

    From each city and direction, the incident tour edge is removed and
    candidate edges from the neighbor lists are chained while the cumulative
    gain stays positive; the tour closes at the best gain seen. The first
    level tries every gain-positive candidate, the second up to breadth2,
    deeper levels extend greedily. Repeats until a full pass over all cities
    finds no improving chain, or the budget runs out.

    Returns (tour, converged). The tour's cached cost is always the plain
    objective, also when searching a penalized view. Charges one FE per
    candidate move evaluated. The incoming cached cost must be the plain one.
    """
    budget = budget if budget is not None else unlimited()
    cost_m = inst.costs if objective is None else objective.matrix
    raw_m = inst.costs
    lk = _LkTour(tour.order)
    if objective is None:
        cost = tour.cached_cost
        raw_cost = cost
    else:
        cost = objective.tour_cost(lk.order)
        raw_cost = tour.cached_cost
    budget.charge(1)
    cand = neighbors.lists
    n = inst.n

    def chain_from(base: int, forward: bool):
        """One anchored chain; commits the winning prefix or restores the tour.

        Returns (penalized delta, raw delta) on improvement, else None.
        """
        applied: list[tuple[int, int]] = []
        deltas: list[tuple[float, float]] = []

        def do_move(end: int, t3: int):
            # chained 2-Opt: remove (base,end),(t3,t4); add (end,t3),(t4,base)
            t4 = lk.pred(t3) if forward else lk.succ(t3)
            if t4 == base or t4 == end:
                return None
            dcost = float(cost_m[end, t3] + cost_m[t4, base]
                          - cost_m[base, end] - cost_m[t4, t3])
            draw = float(raw_m[end, t3] + raw_m[t4, base]
                         - raw_m[base, end] - raw_m[t4, t3])
            pe, p4 = int(lk.pos[end]), int(lk.pos[t4])
            if forward:
                lo, hi = (pe, p4) if pe <= p4 else (int(lk.pos[t3]), int(lk.pos[base]))
            else:
                lo, hi = (p4, pe) if p4 <= pe else (int(lk.pos[base]), int(lk.pos[t3]))
            lk.reverse(lo, hi)
            applied.append((lo, hi))
            deltas.append((dcost, draw))
            return dcost, draw

        def undo_to(k: int):
            while len(applied) > k:
                lo, hi = applied.pop()
                deltas.pop()
                lk.reverse(lo, hi)

        def totals():
            return (sum(d[0] for d in deltas), sum(d[1] for d in deltas))

        def extend_greedy(level: int, best):
            # deeper levels: first acceptable candidate, no alternatives
            best_k, best_pen, best_raw = best
            while level <= depth:
                pen_total = sum(d[0] for d in deltas)
                end = lk.succ(base) if forward else lk.pred(base)
                bound = cost_m[base, end] - pen_total
                moved = False
                for t3 in cand[end]:
                    t3 = int(t3)
                    budget.charge(1)
                    if cost_m[end, t3] >= bound:
                        break  # cost-sorted candidates: none later can fit
                    if t3 == base or t3 == lk.succ(end) or t3 == lk.pred(end):
                        continue
                    if do_move(end, t3) is None:
                        continue
                    moved = True
                    break
                if not moved:
                    break
                pen_total, raw_total = totals()
                if pen_total < best_pen - 1e-12:
                    best_k, best_pen, best_raw = len(applied), pen_total, raw_total
                level += 1
            return best_k, best_pen, best_raw

        e0 = lk.succ(base) if forward else lk.pred(base)
        for t3 in cand[e0]:
            t3 = int(t3)
            budget.charge(1)
            if cost_m[e0, t3] >= cost_m[base, e0]:
                break
            if t3 == base or t3 == lk.succ(e0) or t3 == lk.pred(e0):
                continue
            first = do_move(e0, t3)
            if first is None:
                continue
            if first[0] < -1e-12:
                return first  # improving 2-Opt move, commit immediately
            # second level: try a few alternatives, each extended greedily
            e1 = lk.succ(base) if forward else lk.pred(base)
            bound1 = cost_m[base, e1] - first[0]
            tried = 0
            for t5 in cand[e1]:
                t5 = int(t5)
                budget.charge(1)
                if cost_m[e1, t5] >= bound1:
                    break
                if t5 == base or t5 == lk.succ(e1) or t5 == lk.pred(e1):
                    continue
                if do_move(e1, t5) is None:
                    continue
                tried += 1
                pen_total, raw_total = totals()
                best = (len(applied), pen_total, raw_total) \
                    if pen_total < -1e-12 else (-1, 0.0, 0.0)
                best_k, best_pen, best_raw = extend_greedy(3, best)
                if best_pen < -1e-12:
                    undo_to(best_k)
                    return best_pen, best_raw
                undo_to(1)
                if tried >= breadth2:
                    break
            undo_to(0)
        undo_to(0)
        return None

    converged = False
    while not budget.exhausted():
        improved = False
        for base in range(n):
            for forward in (True, False):
                got = chain_from(base, forward)
                if got is not None:
                    cost += got[0]
                    raw_cost += got[1]
                    improved = True
                if budget.exhausted():
                    break
            if budget.exhausted():
                break
        if not improved:
            converged = not budget.exhausted()
            break

    tour.order[:] = lk.order
    tour.cached_cost = cost if objective is None else raw_cost
    return tour, converged
