"""Greedy baseline: iterative LP solving with lower-bound lifting.

Each iteration solves the LP relaxation of the trailer-cost model, finds the
fractional count variable closest to its ceiling (the strongest evidence that
another trailer is needed), lifts that variable's lower bound to the ceiling,
and re-solves. Terminates when every count is integral within 1e-5; bounded
by the sum of the count upper bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from loadplan.formulations import LoadPlan, build_model1, plan_cost
from loadplan.lp import LpStatus, solve_lp, update_lower_bound
from loadplan.network import Instance

INT_TOL = 1e-5
_SNAP = 1e-7


class IterationLimit(RuntimeError):
    """The iteration bound was exhausted (should not happen: each lift raises
    a lower bound by at least one)."""


@dataclass(frozen=True)
class GreedyResult:
    plan: LoadPlan
    iterations: int
    trace: tuple[tuple[int, tuple[int, int], float], ...]

    def trace_csv(self, inst: Instance) -> str:
        lines = ["iteration,sort_pair,trailer_type,lp_objective"]
        for it, (s, v), obj in self.trace:
            lines.append(
                f"{it},{inst.sort_pairs[s].name},{inst.trailer_types[v].name},{obj!r}"
            )
        return "\n".join(lines) + "\n"


def _snapped(value: float) -> float:
    r = round(value)
    return float(r) if abs(value - r) <= _SNAP else value


def greedy_solve(inst: Instance, max_iters: int | None = None) -> GreedyResult:
    """Feasible integral plan by repeated LP lower-bound lifting. Ties in the
    closest-to-ceiling rule break toward the lowest (pair, type) index."""
    mip, vmap = build_model1(inst)
    lp = mip.lp
    if max_iters is None:
        max_iters = int(
            sum(lp.upper[col] for col in vmap.y_index.values() if math.isfinite(lp.upper[col]))
        ) + 1
    y_items = sorted(vmap.y_index.items())  # ((s, v), col) in index order

    trace: list[tuple[int, tuple[int, int], float]] = []
    for iteration in range(1, max_iters + 1):
        sol = solve_lp(lp)
        if sol.status is not LpStatus.OPTIMAL:
            raise RuntimeError(f"relaxation came back {sol.status.value}")
        best_key = None
        best_frac = math.inf
        for key, col in y_items:
            val = _snapped(float(sol.primal[col]))
            gap = math.ceil(val) - val
            if gap > INT_TOL and gap < best_frac - 1e-15:
                best_frac = gap
                best_key = (key, col, math.ceil(val))
        if best_key is None:
            y = {
                key: int(math.ceil(_snapped(float(sol.primal[col])) - INT_TOL))
                for key, col in y_items
            }
            x = {}
            for key, col in vmap.x_index.items():
                vol = float(sol.primal[col])
                if vol > 1e-9:
                    x[key] = vol
            plan = LoadPlan(y=y, x=x, objective=plan_cost(inst, y))
            return GreedyResult(plan=plan, iterations=iteration, trace=tuple(trace))
        key, col, ceil_val = best_key
        trace.append((iteration, key, sol.objective_value))
        lp = update_lower_bound(lp, col, float(ceil_val))
    raise IterationLimit(f"no integral counts after {max_iters} iterations")
