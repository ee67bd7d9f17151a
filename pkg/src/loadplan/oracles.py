"""Independent reference solvers used as test oracles.

Closed forms for the single-type single-path and single-type all-paths cases,
a min-cost covering knapsack DP for their multi-type variants, exhaustive set
cover for the unit-volume case, and a full enumerator for small instances.
The enumerator decides feasibility of a count vector with a Hall-type
deficiency condition over commodity subsets (no LP involved), so it is an
independent check of the branch-and-bound path.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import reduce
from typing import Optional

import numpy as np

from loadplan.formulations import LoadPlan, plan_cost
from loadplan.network import Instance, TrailerType


class PreconditionViolated(ValueError):
    """The instance does not match the case the oracle solves."""


class TooLarge(ValueError):
    """Exhaustive search would exceed the supported size."""


class BudgetExceeded(ValueError):
    """Enumeration budget exceeded."""


def _single_type(inst: Instance) -> TrailerType:
    if len(inst.trailer_types) != 1:
        raise PreconditionViolated("exactly one trailer type required")
    only = inst.trailer_types[0]
    for sp in inst.sort_pairs:
        if sp.allowed_trailers != (only.index,):
            raise PreconditionViolated(f"pair {sp.name!r} must allow exactly the single type")
    return only


def _assemble(inst: Instance, y: dict, x: dict) -> LoadPlan:
    return LoadPlan(y=y, x=x, objective=plan_cost(inst, y))


def case1_solve(inst: Instance) -> LoadPlan:
    """Single trailer type, every commodity compatible with exactly one pair:
    each pair independently receives the ceiling of its volume over capacity."""
    t = _single_type(inst)
    for k in inst.commodities:
        if k.alternates:
            raise PreconditionViolated(f"commodity {k.name!r} has alternates")
    y = {}
    x = {}
    loads: dict[int, float] = {sp.index: 0.0 for sp in inst.sort_pairs}
    for k in inst.commodities:
        loads[k.primary] += k.volume
        if k.volume > 0:
            x[(k.index, k.primary, t.index)] = k.volume
    for sp in inst.sort_pairs:
        y[(sp.index, t.index)] = int(math.ceil(loads[sp.index] / t.capacity - 1e-12))
    return _assemble(inst, y, x)


def case2_solve(inst: Instance) -> LoadPlan:
    """Single trailer type, every commodity compatible with all pairs: pile
    everything onto one pair (the lowest index) and cover it."""
    t = _single_type(inst)
    all_pairs = set(range(inst.num_pairs))
    for k in inst.commodities:
        if set(k.compatible) != all_pairs:
            raise PreconditionViolated(f"commodity {k.name!r} must be compatible with all pairs")
    target = 0
    total = inst.total_volume()
    y = {(sp.index, t.index): 0 for sp in inst.sort_pairs}
    y[(target, t.index)] = int(math.ceil(total / t.capacity - 1e-12))
    x = {
        (k.index, target, t.index): k.volume for k in inst.commodities if k.volume > 0
    }
    return _assemble(inst, y, x)


def min_knapsack(volume: float, types: list[TrailerType]) -> tuple[dict[int, int], float]:
    """Minimum-cost trailer counts whose total capacity covers ``volume``.

    DP over a capacity grid at the gcd of the capacities when they are
    integral, else at a 1e-3 resolution (volumes are reals in general). Cost
    ties prefer the larger capacity, then the lower type index.
    """
    if not types:
        raise ValueError("at least one trailer type required")
    if volume <= 1e-12:
        return {}, 0.0
    caps = [t.capacity for t in types]
    if all(abs(c - round(c)) < 1e-9 for c in caps):
        grid = reduce(math.gcd, (int(round(c)) for c in caps))
    else:
        grid = 1e-3
    steps = [int(round(t.capacity / grid)) for t in types]
    need = int(math.ceil(volume / grid - 1e-9))
    INF = math.inf
    dp = np.full(need + 1, INF)
    choice = np.full(need + 1, -1, dtype=np.int64)
    dp[0] = 0.0
    order = sorted(
        range(len(types)), key=lambda i: (-types[i].capacity, types[i].index)
    )
    for w in range(1, need + 1):
        for i in order:
            prev = max(0, w - steps[i])
            cand = types[i].cost + dp[prev]
            if cand < dp[w] - 1e-12:
                dp[w] = cand
                choice[w] = i
    counts: dict[int, int] = {}
    w = need
    while w > 0:
        i = int(choice[w])
        counts[types[i].index] = counts.get(types[i].index, 0) + 1
        w = max(0, w - steps[i])
    return counts, float(dp[need])


def case3_solve(inst: Instance) -> LoadPlan:
    """Multiple trailer types, one compatible pair per commodity: solve a
    covering knapsack independently on each pair."""
    for k in inst.commodities:
        if k.alternates:
            raise PreconditionViolated(f"commodity {k.name!r} has alternates")
    y: dict[tuple[int, int], int] = {}
    x: dict[tuple[int, int, int], float] = {}
    for sp in inst.sort_pairs:
        members = [k for k in inst.commodities if k.primary == sp.index]
        vol = sum(k.volume for k in members)
        types = [inst.trailer_types[v] for v in sp.allowed_trailers]
        counts, _ = min_knapsack(vol, types)
        for v in sp.allowed_trailers:
            y[(sp.index, v)] = counts.get(v, 0)
        # Spread volume over the chosen trailers greedily by type order.
        caps = [
            (v, inst.trailer_types[v].capacity * counts.get(v, 0))
            for v in sp.allowed_trailers
        ]
        ci = 0
        for k in members:
            rest = k.volume
            while rest > 1e-12 and ci < len(caps):
                v, room = caps[ci]
                take = min(rest, room)
                if take > 1e-12:
                    x[(k.index, sp.index, v)] = x.get((k.index, sp.index, v), 0.0) + take
                    rest -= take
                    caps[ci] = (v, room - take)
                if caps[ci][1] <= 1e-12:
                    ci += 1
    return _assemble(inst, y, x)


def case4_solve(inst: Instance) -> LoadPlan:
    """Multiple trailer types shared by all pairs, every commodity compatible
    with all pairs: concentrate all volume on the lowest pair and solve one
    covering knapsack there."""
    all_pairs = set(range(inst.num_pairs))
    allowed0 = inst.sort_pairs[0].allowed_trailers
    for sp in inst.sort_pairs:
        if sp.allowed_trailers != allowed0:
            raise PreconditionViolated("all pairs must allow the identical type set")
    for k in inst.commodities:
        if set(k.compatible) != all_pairs:
            raise PreconditionViolated(f"commodity {k.name!r} must be compatible with all pairs")
    types = [inst.trailer_types[v] for v in allowed0]
    counts, _ = min_knapsack(inst.total_volume(), types)
    y = {(sp.index, v): 0 for sp in inst.sort_pairs for v in sp.allowed_trailers}
    for v, n in counts.items():
        y[(0, v)] = n
    x: dict[tuple[int, int, int], float] = {}
    caps = [(v, inst.trailer_types[v].capacity * counts.get(v, 0)) for v in allowed0]
    ci = 0
    for k in inst.commodities:
        rest = k.volume
        while rest > 1e-12 and ci < len(caps):
            v, room = caps[ci]
            take = min(rest, room)
            if take > 1e-12:
                x[(k.index, 0, v)] = x.get((k.index, 0, v), 0.0) + take
                rest -= take
                caps[ci] = (v, room - take)
            if caps[ci][1] <= 1e-12:
                ci += 1
    return _assemble(inst, y, x)


def case5_set_cover(inst: Instance) -> list[int]:
    """Unit volumes, one unit-cost trailer type sized to the largest pair
    coverage: the optimum selects a minimum-cardinality set of pairs covering
    all commodities. Exhaustive subset search, lexicographically first winner."""
    if inst.num_pairs > 20:
        raise TooLarge("exhaustive set cover supports at most 20 pairs")
    t = _single_type(inst)
    for k in inst.commodities:
        if abs(k.volume - 1.0) > 1e-12:
            raise PreconditionViolated("unit volumes required")
    if abs(t.cost - 1.0) > 1e-12:
        raise PreconditionViolated("unit trailer cost required")
    cover_count = max(
        (len(inst.commodities_on_pair(sp.index)) for sp in inst.sort_pairs), default=0
    )
    if abs(t.capacity - cover_count) > 1e-12:
        raise PreconditionViolated(
            f"trailer capacity must equal the largest pair coverage ({cover_count})"
        )
    universe = frozenset(k.index for k in inst.commodities)
    members = {
        sp.index: frozenset(k.index for k in inst.commodities_on_pair(sp.index))
        for sp in inst.sort_pairs
    }
    if universe and not universe <= frozenset().union(*members.values()):
        raise PreconditionViolated("some commodity is covered by no pair")
    if not universe:
        return []
    pair_ids = sorted(members)
    for size in range(1, len(pair_ids) + 1):
        for combo in itertools.combinations(pair_ids, size):
            covered = frozenset().union(*(members[s] for s in combo))
            if covered >= universe:
                return list(combo)
    raise AssertionError("unreachable: full pair set always covers")


# ---------------------------------------------------------------------------
# Full enumerator


@dataclass(frozen=True)
class BruteForceResult:
    optimal_cost: float
    plan: LoadPlan
    optimal_counts: list[dict[tuple[int, int], int]]


def _hall_feasible(
    counts: np.ndarray,
    caps_per_col: np.ndarray,
    col_masks: np.ndarray,
    subset_need: np.ndarray,
    subset_bits: np.ndarray,
) -> np.ndarray:
    """Vectorized Hall/deficiency check for a batch of count vectors.

    A count vector is flow-feasible iff for every commodity subset T the
    total capacity of columns serving T covers the volume of T.
    """
    cap = counts * caps_per_col  # (batch, ncols)
    ok = np.ones(counts.shape[0], dtype=bool)
    for bits, need in zip(subset_bits, subset_need):
        serving = (col_masks & bits) != 0
        avail = cap[:, serving].sum(axis=1)
        ok &= avail >= need - 1e-9
    return ok


def brute_force_dlpp(
    inst: Instance, y_bound_cap: Optional[int] = None, budget: int = 1_000_000
) -> BruteForceResult:
    """Enumerate integer count vectors in cost order; return the optimal cost,
    one witness plan, and every optimal count vector (used to verify that the
    goal-directed stage picks the closest optimal plan)."""
    from loadplan.formulations import trailer_upper_bound  # local to avoid cycle noise

    cols = inst.compatible_columns()
    ubs = []
    for s, v in cols:
        ub = trailer_upper_bound(inst, s, v)
        if y_bound_cap is not None:
            ub = min(ub, y_bound_cap)
        ubs.append(ub)
    combos = 1
    for ub in ubs:
        combos *= ub + 1
        if combos > budget:
            raise BudgetExceeded(f"enumeration would need {combos}+ vectors (> {budget})")
    if len(inst.commodities) > 16:
        raise BudgetExceeded("Hall check supports at most 16 commodities")

    grids = np.indices([ub + 1 for ub in ubs]).reshape(len(ubs), -1).T.astype(np.float64)
    costs_vec = np.array([inst.trailer_types[v].cost for s, v in cols])
    caps_vec = np.array([inst.trailer_types[v].capacity for s, v in cols])
    totals = grids @ costs_vec

    col_masks = np.zeros(len(cols), dtype=np.int64)
    for j, (s, v) in enumerate(cols):
        for k in inst.commodities:
            if s in k.compatible:
                col_masks[j] |= 1 << k.index
    nk = len(inst.commodities)
    subset_bits = np.arange(1, 2**nk, dtype=np.int64)
    vols = np.array([k.volume for k in inst.commodities])
    subset_need = np.array(
        [vols[[i for i in range(nk) if bits >> i & 1]].sum() for bits in subset_bits]
    )

    order = np.argsort(totals, kind="stable")
    optimal_cost = None
    optimal_counts: list[dict[tuple[int, int], int]] = []
    i = 0
    while i < len(order):
        # Process one cost level at a time.
        level = totals[order[i]]
        j = i
        while j < len(order) and totals[order[j]] <= level + 1e-9:
            j += 1
        batch = grids[order[i:j]]
        ok = _hall_feasible(batch, caps_vec, col_masks, subset_need, subset_bits)
        if ok.any():
            optimal_cost = float(level)
            for row in batch[ok]:
                optimal_counts.append(
                    {cols[c]: int(row[c]) for c in range(len(cols))}
                )
            break
        i = j
    if optimal_cost is None:
        raise AssertionError("unreachable: upper bounds always admit a feasible vector")

    witness_y = optimal_counts[0]
    x = _witness_flows(inst, witness_y)
    plan = LoadPlan(y=witness_y, x=x, objective=optimal_cost)
    return BruteForceResult(optimal_cost, plan, optimal_counts)


def _witness_flows(inst: Instance, y: dict) -> dict:
    """Build one feasible flow for a Hall-feasible count vector via the flow
    LP (convenience only; feasibility was already decided combinatorially)."""
    from loadplan.lp import LinearProgram, Row, solve_lp, LpStatus

    # Flow variables per compatible (k, s, v) with per-(s, v) capacities.
    x_cols: dict[tuple[int, int, int], int] = {}
    col = 0
    for k in inst.commodities:
        for s in sorted(k.compatible):
            for v in inst.sort_pairs[s].allowed_trailers:
                x_cols[(k.index, s, v)] = col
                col += 1
    rows = []
    for k in inst.commodities:
        coeffs = tuple(
            (x_cols[(k.index, s, v)], 1.0)
            for s in sorted(k.compatible)
            for v in inst.sort_pairs[s].allowed_trailers
        )
        rows.append(Row(coeffs, "=", k.volume))
    for (s, v) in inst.compatible_columns():
        coeffs = tuple(
            (x_cols[(k.index, s, v)], 1.0)
            for k in inst.commodities
            if s in k.compatible
        )
        if coeffs:
            cap = inst.trailer_types[v].capacity * y.get((s, v), 0)
            rows.append(Row(coeffs, "<=", float(cap)))
    lp = LinearProgram(col, (), tuple(rows), (0.0,) * col, (math.inf,) * col)
    sol = solve_lp(lp)
    if sol.status is not LpStatus.OPTIMAL:
        raise AssertionError("witness flow LP disagreed with the Hall check")
    return {
        key: float(sol.primal[c]) for key, c in sorted(x_cols.items()) if sol.primal[c] > 1e-9
    }
