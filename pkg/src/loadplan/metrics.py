"""Plan quality and consistency metrics.

Gap measures cost against the exact optimum; the normalized distance measures
per-(pair, type) relative deviation from the reference plan aggregated by a
shifted geometric mean; total variation sums the step sizes of count vectors
along a volume-ordered instance sequence. Batch aggregation also uses shifted
geometric means (shift 0.01 for gaps and distances, 1 second for times).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from loadplan.formulations import LoadPlan, validate_plan
from loadplan.network import Instance, ReferencePlan

log = logging.getLogger(__name__)

GAP_SHIFT = 0.01
DISTANCE_SHIFT = 0.01
TIME_SHIFT = 1.0
_LOG_SHIFT = 0.01  # inner shift of the normalized distance


class EmptyDomain(ValueError):
    pass


class NonpositiveShifted(ValueError):
    pass


class InfeasiblePlanRejected(ValueError):
    pass


def normalized_distance(
    y: Mapping[tuple[int, int], int],
    gamma: Mapping[tuple[int, int], int],
    domain: Sequence[tuple[int, int]],
    divisor: Optional[int] = None,
) -> float:
    """Shifted-geometric-mean relative count deviation over ``domain``.

    Per entry: |y - g| when the reference count is zero, else |y - g| / g.
    ``divisor`` defaults to the domain size; pass ``|S| * |V|`` to average over
    the full grid including incompatible entries (which contribute nothing to
    the sum but inflate the divisor).
    """
    if not domain:
        raise EmptyDomain("normalized distance needs a nonempty domain")
    total = 0.0
    all_zero = True
    for key in domain:
        g = float(gamma.get(key, 0))
        d = abs(float(y.get(key, 0)) - g)
        rel = d if g == 0 else d / g
        if rel != 0.0:
            all_zero = False
        total += math.log(rel + _LOG_SHIFT)
    div = divisor if divisor is not None else len(domain)
    if div <= 0:
        raise EmptyDomain("divisor must be positive")
    if all_zero and div == len(domain):
        return 0.0  # exp(log(shift)) - shift, exactly
    return math.exp(total / div) - _LOG_SHIFT


def total_variation(count_vectors: Sequence[np.ndarray]) -> float:
    """Sum of Euclidean step sizes between consecutive count vectors; the
    caller orders the sequence by nondecreasing total volume. Fewer than two
    vectors yield 0."""
    if len(count_vectors) < 2:
        log.debug("total_variation called with %d plans", len(count_vectors))
        return 0.0
    total = 0.0
    for a, b in zip(count_vectors, count_vectors[1:]):
        total += float(np.linalg.norm(np.asarray(b, float) - np.asarray(a, float)))
    return total


def shifted_geomean(xs: Sequence[float], shift: float) -> float:
    """exp(mean(log(x + shift))) - shift; idempotent on constant sequences."""
    if len(xs) == 0:
        raise EmptyDomain("geometric mean of an empty sequence")
    shifted = [x + shift for x in xs]
    if min(shifted) <= 0.0:
        raise NonpositiveShifted(f"min(x + {shift}) = {min(shifted)} <= 0")
    return math.exp(sum(math.log(v) for v in shifted) / len(shifted)) - shift


def gap_fraction(cost: float, reference: float) -> float:
    """Relative optimality gap (cost - reference) / |reference|; falls back to
    the absolute difference when the reference is zero."""
    if abs(reference) < 1e-12:
        return abs(cost - reference)
    return (cost - reference) / abs(reference)


@dataclass(frozen=True)
class MethodRow:
    method: str
    cost: float
    gap: float
    delta: Optional[float]
    time_s: float


@dataclass(frozen=True)
class EvaluationReport:
    instance_label: str
    z_star: float
    rows: tuple[MethodRow, ...]

    def row(self, method: str) -> MethodRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)


def evaluate(
    inst: Instance,
    plans: Mapping[str, LoadPlan],
    reference: Optional[ReferencePlan] = None,
    z_star: Optional[float] = None,
    times: Optional[Mapping[str, float]] = None,
    instance_label: str = "",
) -> EvaluationReport:
    """Validate and score one instance's plans. ``z_star`` defaults to the
    cost of the plan registered under ``mip`` (the exact-optimization route);
    infeasible plans are rejected with the violated constraint named."""
    if z_star is None:
        if "mip" not in plans:
            raise ValueError("z_star not given and no 'mip' plan to take it from")
        z_star = plans["mip"].objective
    reference = reference if reference is not None else inst.reference_plan
    domain = inst.compatible_columns()
    rows = []
    for method in sorted(plans):
        plan = plans[method]
        try:
            validate_plan(inst, plan)
        except ValueError as exc:
            raise InfeasiblePlanRejected(f"{method}: {exc}") from exc
        delta = None
        if reference is not None:
            delta = normalized_distance(plan.y, reference.gamma, domain)
        rows.append(
            MethodRow(
                method=method,
                cost=plan.objective,
                gap=gap_fraction(plan.objective, z_star),
                delta=delta,
                time_s=float(times.get(method, 0.0)) if times else 0.0,
            )
        )
    return EvaluationReport(
        instance_label=instance_label, z_star=z_star, rows=tuple(rows)
    )


EVAL_CSV_HEADER = "instance,method,cost,z_star,gap,delta,time_s"


def report_csv_rows(report: EvaluationReport) -> list[str]:
    out = []
    for r in report.rows:
        delta = "" if r.delta is None else repr(r.delta)
        out.append(
            f"{report.instance_label},{r.method},{r.cost!r},{report.z_star!r},"
            f"{r.gap!r},{delta},{r.time_s:.6f}"
        )
    return out


@dataclass(frozen=True)
class MethodAggregate:
    method: str
    geomean_gap: float
    geomean_delta: Optional[float]
    geomean_time_s: float
    n: int


def aggregate_reports(reports: Sequence[EvaluationReport]) -> dict[str, MethodAggregate]:
    """Shifted geometric means per method across instances."""
    by_method: dict[str, list[MethodRow]] = {}
    for rep in reports:
        for r in rep.rows:
            by_method.setdefault(r.method, []).append(r)
    out = {}
    for method, rows in sorted(by_method.items()):
        gaps = [max(r.gap, 0.0) for r in rows]
        deltas = [r.delta for r in rows if r.delta is not None]
        out[method] = MethodAggregate(
            method=method,
            geomean_gap=shifted_geomean(gaps, GAP_SHIFT),
            geomean_delta=shifted_geomean(deltas, DISTANCE_SHIFT) if deltas else None,
            geomean_time_s=shifted_geomean([r.time_s for r in rows], TIME_SHIFT),
            n=len(rows),
        )
    return out
