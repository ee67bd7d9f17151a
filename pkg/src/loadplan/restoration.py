"""MIP-based feasibility restoration for predicted trailer counts.

Given predicted counts, the flow system allocates commodity volumes against
the aggregate capacity installed on each sort pair. When the prediction
underestimates, a violation LP locates the short pairs and sizes a single
extra-capacity block per pair (cheapest covering trailer type); a small
binary MIP then decides on which of those pairs capacity is actually added.
Only additions are made: surplus trailers in the prediction are kept.
"""

from __future__ import annotations

import json
import math

from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np

from loadplan.formulations import LoadPlan, plan_cost
from loadplan.lp import LinearProgram, LpStatus, Row, solve_lp
from loadplan.mip import MixedIntegerProgram, solve_mip
from loadplan.network import Instance

VIOLATION_TOL = 1e-6


class RestorationInfeasible(RuntimeError):
    """Raised if the capacity-addition model were infeasible; covering every
    short pair is feasible by construction, so this should never trigger."""


@dataclass(frozen=True)
class PredictedPlan:
    """Predicted trailer counts plus the aggregate capacity per sort pair."""

    y_hat: Mapping[tuple[int, int], int]
    lam: Mapping[int, float]

    @classmethod
    def from_counts(cls, inst: Instance, y_hat: Mapping[tuple[int, int], int]) -> "PredictedPlan":
        compat = set(inst.compatible_columns())
        clean: dict[tuple[int, int], int] = {}
        for key, n in y_hat.items():
            if key not in compat:
                raise ValueError(f"prediction on incompatible pair {key}")
            if n < 0 or int(n) != n:
                raise ValueError(f"prediction {n} on {key} is not a nonnegative integer")
            clean[key] = int(n)
        lam = {sp.index: 0.0 for sp in inst.sort_pairs}
        for (s, v), n in clean.items():
            lam[s] += inst.trailer_types[v].capacity * n
        return cls(y_hat=clean, lam=lam)

    def total_capacity(self) -> float:
        return float(sum(self.lam.values()))


@dataclass(frozen=True)
class Shortfall:
    """Typed outcome of the flow system when installed capacity cannot carry
    the volume; routes the caller to ``restore``."""

    total_volume: float
    total_capacity: float


@dataclass(frozen=True)
class ViolationProfile:
    z: Mapping[int, float]
    violated: tuple[int, ...]
    xi: Mapping[int, float]
    chosen_type: Mapping[int, int]


@dataclass(frozen=True)
class RestorationReport:
    violated: tuple[int, ...]
    z: Mapping[int, float]
    xi: Mapping[int, float]
    chosen_type: Mapping[int, int]
    added: Mapping[tuple[int, int], int]
    cost_delta: float

    def to_doc(self, inst: Instance) -> dict:
        return {
            "violated": [
                {
                    "sort_pair": inst.sort_pairs[s].name,
                    "violation": self.z[s],
                    "extra_capacity": self.xi[s],
                    "trailer_type": inst.trailer_types[self.chosen_type[s]].name,
                    "selected": any(key[0] == s for key in self.added),
                }
                for s in self.violated
            ],
            "added": [
                {
                    "sort_pair": inst.sort_pairs[s].name,
                    "trailer_type": inst.trailer_types[v].name,
                    "count": n,
                }
                for (s, v), n in sorted(self.added.items())
            ],
            "cost_delta": self.cost_delta,
        }

    def to_json(self, inst: Instance) -> str:
        return json.dumps(self.to_doc(inst), indent=2) + "\n"


# ---------------------------------------------------------------------------
# Flow machinery: variables are aggregated per (commodity, pair) because the
# systems here constrain capacity per sort pair, not per trailer type.


def _flow_columns(inst: Instance) -> dict[tuple[int, int], int]:
    cols: dict[tuple[int, int], int] = {}
    for k in inst.commodities:
        for s in sorted(k.compatible):
            cols[(k.index, s)] = len(cols)
    return cols


def _flow_rows(inst: Instance, cols) -> list[Row]:
    rows = []
    for k in inst.commodities:
        rows.append(
            Row(tuple((cols[(k.index, s)], 1.0) for s in sorted(k.compatible)), "=", k.volume)
        )
    return rows


def _pair_coeffs(inst: Instance, cols, s: int):
    return tuple(
        (cols[(k.index, s)], 1.0) for k in inst.commodities if s in k.compatible
    )


def spread_over_types(
    inst: Instance, y: Mapping[tuple[int, int], int], pair_alloc: Mapping[tuple[int, int], float]
) -> dict[tuple[int, int, int], float]:
    """Split each pair's per-commodity allocation across its trailer types in
    type order, respecting per-type capacity. Feasible whenever the pair
    totals fit the aggregate capacity."""
    x: dict[tuple[int, int, int], float] = {}
    for sp in inst.sort_pairs:
        s = sp.index
        room = [
            [v, inst.trailer_types[v].capacity * y.get((s, v), 0)]
            for v in sp.allowed_trailers
        ]
        ci = 0
        for k in inst.commodities:
            rest = pair_alloc.get((k.index, s), 0.0)
            if rest <= 1e-12:
                continue
            while rest > 1e-9:
                if ci >= len(room):
                    # Aggregate feasibility guarantees at most tolerance-level
                    # residue; park it on the last type.
                    v = room[-1][0]
                    x[(k.index, s, v)] = x.get((k.index, s, v), 0.0) + rest
                    rest = 0.0
                    break
                v, cap = room[ci]
                take = min(rest, cap)
                if take > 1e-12:
                    x[(k.index, s, v)] = x.get((k.index, s, v), 0.0) + take
                    rest -= take
                    room[ci][1] = cap - take
                if room[ci][1] <= 1e-12:
                    ci += 1
    return x


def allocate_flows(inst: Instance, pred: PredictedPlan) -> Union[LoadPlan, Shortfall]:
    """Solve the flow system against the predicted aggregate capacities; on
    success the counts are returned unchanged (no trimming)."""
    cols = _flow_columns(inst)
    rows = _flow_rows(inst, cols)
    for sp in inst.sort_pairs:
        coeffs = _pair_coeffs(inst, cols, sp.index)
        if coeffs:
            rows.append(Row(coeffs, "<=", float(pred.lam.get(sp.index, 0.0))))
    n = len(cols)
    lp = LinearProgram(n, (), tuple(rows), (0.0,) * n, (math.inf,) * n)
    sol = solve_lp(lp)
    if sol.status is not LpStatus.OPTIMAL:
        return Shortfall(inst.total_volume(), pred.total_capacity())
    pair_alloc = {key: float(sol.primal[c]) for key, c in cols.items()}
    y = dict(pred.y_hat)
    x = spread_over_types(inst, y, pair_alloc)
    return LoadPlan(y=y, x=x, objective=plan_cost(inst, y))


def cheapest_covering_type(inst: Instance, s: int, excess: float) -> tuple[int, float]:
    """Pick the trailer type covering ``excess`` on pair ``s`` at minimum
    cost; ties prefer the larger capacity, then the lower type index. Returns
    (type index, capacity block size)."""
    best: Optional[tuple[float, float, int]] = None
    for v in inst.sort_pairs[s].allowed_trailers:
        t = inst.trailer_types[v]
        n = int(math.ceil(excess / t.capacity - 1e-12))
        cand = (t.cost * n, -t.capacity, v)
        if best is None or cand < best:
            best = cand
    assert best is not None
    v = best[2]
    q = inst.trailer_types[v].capacity
    n = int(math.ceil(excess / q - 1e-12))
    return v, n * q


def violation_lp(inst: Instance, pred: PredictedPlan) -> ViolationProfile:
    """Minimize total capacity violation; always feasible. Pairs with
    violation above tolerance get an extra-capacity block sized by the
    cheapest covering type."""
    cols = _flow_columns(inst)
    nx = len(cols)
    z_col = {sp.index: nx + i for i, sp in enumerate(inst.sort_pairs)}
    n = nx + inst.num_pairs
    rows = _flow_rows(inst, cols)
    for sp in inst.sort_pairs:
        coeffs = _pair_coeffs(inst, cols, sp.index) + ((z_col[sp.index], -1.0),)
        rows.append(Row(coeffs, "<=", float(pred.lam.get(sp.index, 0.0))))
    objective = tuple((z_col[sp.index], 1.0) for sp in inst.sort_pairs)
    lp = LinearProgram(n, objective, tuple(rows), (0.0,) * n, (math.inf,) * n)
    sol = solve_lp(lp)
    if sol.status is not LpStatus.OPTIMAL:
        raise AssertionError("violation model is feasible by construction")
    z = {sp.index: float(sol.primal[z_col[sp.index]]) for sp in inst.sort_pairs}
    violated = tuple(s for s in sorted(z) if z[s] > VIOLATION_TOL)
    xi: dict[int, float] = {}
    chosen: dict[int, int] = {}
    for s in violated:
        v, block = cheapest_covering_type(inst, s, z[s])
        chosen[s] = v
        xi[s] = block
    return ViolationProfile(z=z, violated=violated, xi=xi, chosen_type=chosen)


def restore_detailed(
    inst: Instance, pred: PredictedPlan, time_limit: float = 30.0
) -> tuple[LoadPlan, RestorationReport]:
    """Feasibility restoration: flow allocation when the prediction suffices,
    else minimal extra capacity via the binary selection model."""
    prof = violation_lp(inst, pred)
    if not prof.violated:
        out = allocate_flows(inst, pred)
        if isinstance(out, Shortfall):
            raise RestorationInfeasible(
                "flow system infeasible although no pair shows a violation"
            )
        report = RestorationReport((), prof.z, {}, {}, {}, 0.0)
        return out, report

    cols = _flow_columns(inst)
    nx = len(cols)
    u_col = {s: nx + i for i, s in enumerate(prof.violated)}
    n = nx + len(prof.violated)
    rows = _flow_rows(inst, cols)
    for sp in inst.sort_pairs:
        s = sp.index
        coeffs = _pair_coeffs(inst, cols, s)
        if not coeffs:
            continue
        if s in u_col:
            coeffs = coeffs + ((u_col[s], -prof.xi[s]),)
        rows.append(Row(coeffs, "<=", float(pred.lam.get(s, 0.0))))
    objective = tuple((u_col[s], prof.xi[s]) for s in prof.violated)
    lower = (0.0,) * n
    upper = (math.inf,) * nx + (1.0,) * len(prof.violated)
    lp = LinearProgram(n, objective, tuple(rows), lower, upper)
    mip = MixedIntegerProgram(
        lp, frozenset(u_col.values()), frozenset(u_col.values())
    )
    res = solve_mip(mip, time_limit)
    if not res.has_incumbent:
        raise RestorationInfeasible(
            f"capacity-addition model returned {res.status.value}"
        )

    y = dict(pred.y_hat)
    added: dict[tuple[int, int], int] = {}
    for s in prof.violated:
        if res.incumbent[u_col[s]] > 0.5:
            v = prof.chosen_type[s]
            count = int(round(prof.xi[s] / inst.trailer_types[v].capacity))
            added[(s, v)] = count
            y[(s, v)] = y.get((s, v), 0) + count
    pair_alloc = {key: float(res.incumbent[c]) for key, c in cols.items()}
    x = spread_over_types(inst, y, pair_alloc)
    plan = LoadPlan(y=y, x=x, objective=plan_cost(inst, y))
    report = RestorationReport(
        violated=prof.violated,
        z=prof.z,
        xi=prof.xi,
        chosen_type=prof.chosen_type,
        added=added,
        cost_delta=plan.objective - plan_cost(inst, dict(pred.y_hat)),
    )
    return plan, report


def restore(inst: Instance, pred: PredictedPlan, time_limit: float = 30.0) -> LoadPlan:
    """Always returns a feasible plan covering the instance's volume."""
    plan, _ = restore_detailed(inst, pred, time_limit)
    return plan
