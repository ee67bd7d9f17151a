"""Build the trailer-cost model and the reference-plan-consistent model from
an instance, and run the two-stage goal-directed pipeline.

Column layout is shared by both models: trailer-count variables first (one per
compatible (sort pair, trailer type), in index order), then flow variables
(one per (commodity, sort pair, trailer type)), then, in the second model, the
deviation variables. This alignment lets a stage-1 incumbent warm-start
stage 2 directly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from loadplan.lp import LinearProgram, Row
from loadplan.mip import MipResult, MipStatus, MixedIntegerProgram, NoIncumbentError, solve_mip
from loadplan.network import (
    DegenerateInstance,
    Instance,
    ReferencePlan,
    diversion_cost,
    epsilon_weight,
)


class MissingReference(ValueError):
    """Raised when the goal-directed model is requested without a reference plan."""


@dataclass(frozen=True)
class VariableIndexMap:
    """Column indices of the decision variables of a built model."""

    y_index: Mapping[tuple[int, int], int]
    x_index: Mapping[tuple[int, int, int], int]
    w_index: Optional[Mapping[tuple[int, int], int]]
    num_vars: int

    @property
    def y_columns(self) -> list[int]:
        return [self.y_index[key] for key in sorted(self.y_index)]


@dataclass(frozen=True)
class LoadPlan:
    """Trailer counts per (sort pair, trailer type) plus the flow split;
    ``objective`` is the total trailer cost of the counts."""

    y: Mapping[tuple[int, int], int]
    x: Mapping[tuple[int, int, int], float]
    objective: float

    def count_vector(self, domain: list[tuple[int, int]]) -> np.ndarray:
        return np.array([self.y.get(key, 0) for key in domain], dtype=np.float64)

    def pair_loads(self) -> dict[tuple[int, int], float]:
        loads: dict[tuple[int, int], float] = {}
        for (k, s, v), vol in self.x.items():
            loads[(s, v)] = loads.get((s, v), 0.0) + vol
        return loads


def plan_cost(inst: Instance, y: Mapping[tuple[int, int], int]) -> float:
    return float(sum(inst.trailer_types[v].cost * n for (s, v), n in y.items()))


def validate_plan(inst: Instance, plan: LoadPlan, tol: float = 1e-6) -> None:
    """Check the flow-conservation and capacity invariants; raises ValueError
    naming the first violated constraint."""
    compat = set(inst.compatible_columns())
    for key, n in plan.y.items():
        if key not in compat:
            raise ValueError(f"trailer count on incompatible pair {key}")
        if n < 0 or n != int(n):
            raise ValueError(f"trailer count {n} on {key} is not a nonnegative integer")
    assigned: dict[int, float] = {k.index: 0.0 for k in inst.commodities}
    for (k, s, v), vol in plan.x.items():
        if vol < -tol:
            raise ValueError(f"negative flow on ({k},{s},{v})")
        comm = inst.commodities[k]
        if s not in comm.compatible or v not in inst.sort_pairs[s].allowed_trailers:
            raise ValueError(f"flow on incompatible triple ({k},{s},{v})")
        assigned[k] += vol
    for comm in inst.commodities:
        got = assigned[comm.index]
        if abs(got - comm.volume) > tol * (1.0 + abs(comm.volume)):
            raise ValueError(
                f"commodity {comm.name!r}: assigned volume {got} != {comm.volume}"
            )
    for (s, v), load in plan.pair_loads().items():
        cap = inst.trailer_types[v].capacity * plan.y.get((s, v), 0)
        if load > cap + tol * (1.0 + abs(cap)):
            raise ValueError(
                f"capacity violated on pair {inst.sort_pairs[s].name!r} "
                f"type {inst.trailer_types[v].name!r}: load {load} > {cap}"
            )


def trailer_upper_bound(inst: Instance, s: int, v: int) -> int:
    """Finite count bound: enough trailers of type ``v`` for every compatible
    commodity to be routed over pair ``s`` simultaneously."""
    vol = inst.pair_volume_bound(s)
    return int(math.ceil(vol / inst.trailer_types[v].capacity - 1e-12)) if vol > 0 else 0


def _base_columns(inst: Instance):
    y_index: dict[tuple[int, int], int] = {}
    for s, v in inst.compatible_columns():
        y_index[(s, v)] = len(y_index)
    x_index: dict[tuple[int, int, int], int] = {}
    col = len(y_index)
    for k in inst.commodities:
        triples = [
            (k.index, s, v)
            for s in sorted(k.compatible)
            for v in inst.sort_pairs[s].allowed_trailers
        ]
        if not triples:
            raise DegenerateInstance(
                f"commodity {k.name!r} has no compatible (sort pair, trailer type)"
            )
        for trip in triples:
            x_index[trip] = col
            col += 1
    return y_index, x_index, col


def _flow_rows(inst: Instance, x_index) -> list[Row]:
    rows = []
    for k in inst.commodities:
        coeffs = tuple(
            (x_index[(k.index, s, v)], 1.0)
            for s in sorted(k.compatible)
            for v in inst.sort_pairs[s].allowed_trailers
        )
        rows.append(Row(coeffs, "=", k.volume))
    return rows


def _capacity_rows(inst: Instance, y_index, x_index) -> list[Row]:
    rows = []
    for (s, v), ycol in sorted(y_index.items(), key=lambda kv: kv[1]):
        coeffs = [
            (x_index[(k.index, s, v)], 1.0)
            for k in inst.commodities
            if s in k.compatible
        ]
        coeffs.append((ycol, -inst.trailer_types[v].capacity))
        rows.append(Row(tuple(coeffs), "<=", 0.0))
    return rows


def build_model1(inst: Instance) -> tuple[MixedIntegerProgram, VariableIndexMap]:
    """Trailer-cost minimization: integer counts, flow equalities, per-(pair,
    type) capacity."""
    y_index, x_index, num_vars = _base_columns(inst)
    rows = _flow_rows(inst, x_index) + _capacity_rows(inst, y_index, x_index)
    lower = [0.0] * num_vars
    upper = [math.inf] * num_vars
    objective = []
    for (s, v), col in y_index.items():
        upper[col] = float(trailer_upper_bound(inst, s, v))
        objective.append((col, inst.trailer_types[v].cost))
    lp = LinearProgram(
        num_vars, tuple(sorted(objective)), tuple(rows), tuple(lower), tuple(upper)
    )
    mip = MixedIntegerProgram(lp, frozenset(y_index.values()))
    return mip, VariableIndexMap(y_index, x_index, None, num_vars)


def build_model2(
    inst: Instance, z_star: float
) -> tuple[MixedIntegerProgram, VariableIndexMap]:
    """Reference-consistency model: minimize count deviation from the
    reference plan plus a small diversion-cost term, within the ``z_star``
    trailer-cost budget."""
    if inst.reference_plan is None:
        raise MissingReference("instance has no reference plan")
    if not math.isfinite(z_star):
        raise ValueError("z_star must be finite")
    gamma = inst.reference_plan
    y_index, x_index, col = _base_columns(inst)
    w_index = {key: col + i for i, key in enumerate(sorted(y_index))}
    num_vars = col + len(w_index)

    eps = epsilon_weight(inst)
    objective = [(wcol, 1.0) for wcol in w_index.values()]
    for (k, s, v), xcol in x_index.items():
        d = diversion_cost(inst, k, s)
        if d > 0.0:
            objective.append((xcol, eps * d))

    rows = _flow_rows(inst, x_index) + _capacity_rows(inst, y_index, x_index)
    budget = tuple(
        (ycol, inst.trailer_types[v].cost)
        for (s, v), ycol in sorted(y_index.items(), key=lambda kv: kv[1])
    )
    rows.append(Row(budget, "<=", z_star))
    for key in sorted(y_index):
        ycol, wcol, g = y_index[key], w_index[key], float(gamma.count(*key))
        rows.append(Row(((ycol, 1.0), (wcol, -1.0)), "<=", g))
        rows.append(Row(((ycol, -1.0), (wcol, -1.0)), "<=", -g))

    lower = [0.0] * num_vars
    upper = [math.inf] * num_vars
    for (s, v), ycol in y_index.items():
        upper[ycol] = float(trailer_upper_bound(inst, s, v))
    lp = LinearProgram(
        num_vars, tuple(sorted(objective)), tuple(rows), tuple(lower), tuple(upper)
    )
    mip = MixedIntegerProgram(lp, frozenset(y_index.values()))
    return mip, VariableIndexMap(y_index, x_index, w_index, num_vars)


def tighten_count_bounds(
    inst: Instance, mip: MixedIntegerProgram, vmap: VariableIndexMap
) -> MixedIntegerProgram:
    """Implied-integer lower bounds for the exact solvers: volume whose only
    compatible pair is ``s`` must cross ``s``, so a single-type pair needs at
    least the ceiling of that volume over the type's capacity. The model's
    optimum is unchanged; the search tree shrinks. (The greedy baseline uses
    the raw model so its lifting trajectory starts from zero bounds.)"""
    forced = {sp.index: 0.0 for sp in inst.sort_pairs}
    for k in inst.commodities:
        if not k.alternates:
            forced[k.primary] += k.volume
    lower = list(mip.lp.lower)
    changed = False
    for sp in inst.sort_pairs:
        if len(sp.allowed_trailers) != 1 or forced[sp.index] <= 0.0:
            continue
        v = sp.allowed_trailers[0]
        col = vmap.y_index[(sp.index, v)]
        lb = math.ceil(forced[sp.index] / inst.trailer_types[v].capacity - 1e-12)
        if lb > lower[col]:
            lower[col] = float(lb)
            changed = True
    if not changed:
        return mip
    lp = LinearProgram(
        mip.lp.num_vars, mip.lp.objective, mip.lp.rows, tuple(lower), mip.lp.upper
    )
    return MixedIntegerProgram(lp, mip.integer_vars, mip.binary_vars)


def covering_rounder(inst: Instance, vmap: VariableIndexMap):
    """Rounding hook for branch and bound: from a fractional node solution,
    propose the smallest counts covering the node's own flows (at most the
    plain ceiling of the count variables, often much less)."""
    int_cols = sorted(vmap.y_index.values())
    caps = {}
    members: dict[tuple[int, int], list[int]] = {}
    for (s, v), col in vmap.y_index.items():
        caps[col] = inst.trailer_types[v].capacity
        members[(s, v)] = [
            vmap.x_index[(k.index, s, v)]
            for k in inst.commodities
            if s in k.compatible
        ]
    member_cols = {vmap.y_index[key]: cols for key, cols in members.items()}

    def propose(primal: np.ndarray) -> np.ndarray:
        counts = np.empty(len(int_cols))
        for i, col in enumerate(int_cols):
            load = float(primal[member_cols[col]].sum()) if member_cols[col] else 0.0
            counts[i] = math.ceil(load / caps[col] - 1e-9)
        return counts

    return propose


def plan_from_solution(
    inst: Instance, vmap: VariableIndexMap, solution: np.ndarray
) -> LoadPlan:
    """Assemble a LoadPlan from a solver incumbent over this column layout."""
    y = {
        key: int(round(solution[col])) for key, col in sorted(vmap.y_index.items())
    }
    x = {}
    for key, col in sorted(vmap.x_index.items()):
        vol = float(solution[col])
        if vol > 1e-9:
            x[key] = vol
    return LoadPlan(y=y, x=x, objective=plan_cost(inst, y))


@dataclass(frozen=True)
class GdoResult:
    stage1: MipResult
    stage2: MipResult
    plan: LoadPlan
    hamming_distance: float
    diversion_total: float
    z_star: float
    z_star_proven: bool


def hamming_to_reference(plan: LoadPlan, gamma: ReferencePlan, domain) -> float:
    return float(
        sum(abs(plan.y.get(key, 0) - gamma.count(*key)) for key in domain)
    )


def solve_gdo(inst: Instance, stage_time_limit: float = 30.0) -> GdoResult:
    """Two-stage run: minimize trailer cost, then minimize the deviation from
    the reference plan under the stage-1 cost budget. The stage-1 incumbent
    (its best upper bound when the limit was hit) is the budget and also
    warm-starts stage 2, so stage 2 always holds a feasible solution."""
    if inst.reference_plan is None:
        raise MissingReference("goal-directed run requires a reference plan")
    m1, vmap1 = build_model1(inst)
    m1 = tighten_count_bounds(inst, m1, vmap1)
    r1 = solve_mip(m1, stage_time_limit, rounding_hook=covering_rounder(inst, vmap1))
    if not r1.has_incumbent:
        raise NoIncumbentError(f"stage 1 found no feasible plan (status {r1.status.value})")
    z_star = r1.objective
    m2, vmap2 = build_model2(inst, z_star)
    m2 = tighten_count_bounds(inst, m2, vmap2)

    gamma = inst.reference_plan
    warm = np.zeros(vmap2.num_vars)
    warm[: vmap1.num_vars] = r1.incumbent
    for key, wcol in vmap2.w_index.items():
        ycol = vmap2.y_index[key]
        warm[wcol] = abs(round(float(r1.incumbent[ycol])) - gamma.count(*key))
    r2 = solve_mip(m2, stage_time_limit, initial_incumbent=warm)
    if not r2.has_incumbent:
        raise NoIncumbentError(f"stage 2 found no feasible plan (status {r2.status.value})")

    plan = plan_from_solution(inst, vmap2, r2.incumbent)
    if plan.objective > z_star + 1e-6 * (1 + abs(z_star)):
        raise AssertionError("stage-2 plan exceeded the stage-1 cost budget")
    domain = sorted(vmap2.y_index)
    diversion = float(
        sum(diversion_cost(inst, k, s) * vol for (k, s, v), vol in plan.x.items())
    )
    return GdoResult(
        stage1=r1,
        stage2=r2,
        plan=plan,
        hamming_distance=hamming_to_reference(plan, gamma, domain),
        diversion_total=diversion,
        z_star=z_star,
        z_star_proven=r1.status is MipStatus.OPTIMAL,
    )


def solve_model1(inst: Instance, time_limit: float = 30.0) -> tuple[MipResult, LoadPlan]:
    """Solve the trailer-cost model and assemble the plan."""
    mip, vmap = build_model1(inst)
    mip = tighten_count_bounds(inst, mip, vmap)
    res = solve_mip(mip, time_limit, rounding_hook=covering_rounder(inst, vmap))
    if not res.has_incumbent:
        raise NoIncumbentError(f"no feasible plan (status {res.status.value})")
    return res, plan_from_solution(inst, vmap, res.incumbent)


# ---------------------------------------------------------------------------
# Plan serialization


def plan_to_doc(inst: Instance, plan: LoadPlan) -> dict:
    return {
        "y": [
            {
                "sort_pair": inst.sort_pairs[s].name,
                "trailer_type": inst.trailer_types[v].name,
                "count": plan.y.get((s, v), 0),
            }
            for (s, v) in inst.compatible_columns()
        ],
        "x": [
            {
                "commodity": inst.commodities[k].name,
                "sort_pair": inst.sort_pairs[s].name,
                "trailer_type": inst.trailer_types[v].name,
                "volume": vol,
            }
            for (k, s, v), vol in sorted(plan.x.items())
        ],
        "objective": plan.objective,
    }


def plan_from_doc(inst: Instance, doc: dict) -> LoadPlan:
    pair_idx = {p.name: p.index for p in inst.sort_pairs}
    type_idx = {t.name: t.index for t in inst.trailer_types}
    comm_idx = {k.name: k.index for k in inst.commodities}
    y = {
        (pair_idx[e["sort_pair"]], type_idx[e["trailer_type"]]): int(e["count"])
        for e in doc["y"]
    }
    x = {
        (
            comm_idx[e["commodity"]],
            pair_idx[e["sort_pair"]],
            type_idx[e["trailer_type"]],
        ): float(e["volume"])
        for e in doc["x"]
    }
    return LoadPlan(y=y, x=x, objective=float(doc["objective"]))


def plan_to_json(inst: Instance, plan: LoadPlan) -> str:
    return json.dumps(plan_to_doc(inst, plan), indent=2) + "\n"
