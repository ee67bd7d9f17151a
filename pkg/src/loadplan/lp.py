"""Deterministic dense revised-simplex solver over sparse LP models.

Two-phase bounded-variable primal simplex. Dantzig pricing by default with a
switch to Bland's rule after a degenerate-pivot budget (anti-cycling); the
basis inverse is maintained by product-form updates and refactorized
periodically. All tie-breaks are by lowest variable index, so repeated solves
of the same model are bitwise identical.

Tolerances: feasibility 1e-6, optimality (reduced cost) 1e-7, pivot
threshold 1e-9.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

FEAS_TOL = 1e-6
RCOST_TOL = 1e-7
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 100

_AT_LOWER = 0
_AT_UPPER = 1
_BASIC = 2


class NumericalFailure(RuntimeError):
    """Raised when pivoting cannot make progress even under Bland's rule."""


class BoundCrossing(ValueError):
    """Raised when a bound update would cross the opposite bound."""


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class Row:
    """One sparse constraint row: ``coeffs . x (sense) rhs``."""

    coeffs: tuple[tuple[int, float], ...]
    sense: str  # "<=", "=", ">="
    rhs: float


@dataclass(frozen=True)
class LinearProgram:
    """Minimization LP with per-variable bounds (lower bounds finite)."""

    num_vars: int
    objective: tuple[tuple[int, float], ...]
    rows: tuple[Row, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != self.num_vars or len(self.upper) != self.num_vars:
            raise ValueError("bounds length must equal num_vars")
        for j, (lo, up) in enumerate(zip(self.lower, self.upper)):
            if not math.isfinite(lo):
                raise ValueError(f"variable {j}: lower bound must be finite")
            if math.isnan(up) or up < lo:
                raise ValueError(f"variable {j}: invalid bounds [{lo}, {up}]")
        for col, coef in self.objective:
            if not 0 <= col < self.num_vars or math.isnan(coef):
                raise ValueError(f"bad objective entry ({col}, {coef})")
        for i, row in enumerate(self.rows):
            if row.sense not in ("<=", "=", ">="):
                raise ValueError(f"row {i}: unknown sense {row.sense!r}")
            if math.isnan(row.rhs):
                raise ValueError(f"row {i}: NaN rhs")
            for col, coef in row.coeffs:
                if not 0 <= col < self.num_vars:
                    raise ValueError(f"row {i}: column {col} out of range")
                if math.isnan(coef):
                    raise ValueError(f"row {i}: NaN coefficient")


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    objective_value: float
    primal: np.ndarray
    duals: np.ndarray
    iterations: int = 0
    snapshot: Optional["BasisSnapshot"] = None


@dataclass(frozen=True)
class BasisSnapshot:
    """Final basis of a solve; re-solving after bound changes can warm-start
    from it with the dual simplex."""

    basis: np.ndarray
    status: np.ndarray
    art_sign: np.ndarray


# ---------------------------------------------------------------------------
# Compiled form: dense equality system with slack columns appended once. The
# matrix part is shared between bound-only variants of the same model.


class _Matrix:
    def __init__(self, lp: LinearProgram):
        n = lp.num_vars
        m = len(lp.rows)
        slack_of_row = np.full(m, -1, dtype=np.int64)
        n_slack = sum(1 for r in lp.rows if r.sense != "=")
        A = np.zeros((m, n + n_slack), dtype=np.float64)
        b = np.zeros(m, dtype=np.float64)
        c = np.zeros(n + n_slack, dtype=np.float64)
        for col, coef in lp.objective:
            c[col] += coef
        s = n
        for i, row in enumerate(lp.rows):
            for col, coef in row.coeffs:
                A[i, col] += coef
            b[i] = row.rhs
            if row.sense != "=":
                A[i, s] = 1.0 if row.sense == "<=" else -1.0
                slack_of_row[i] = s
                s += 1
        self.n_struct = n
        self.n_total = n + n_slack
        self.m = m
        self.A = A
        self.b = b
        self.c = c
        self.slack_of_row = slack_of_row


class CompiledLp:
    """Dense ``A x = b`` image of an LP plus its variable bounds."""

    def __init__(self, lp: LinearProgram, share: Optional["CompiledLp"] = None):
        self.mat = share.mat if share is not None else _Matrix(lp)
        n_slack = self.mat.n_total - self.mat.n_struct
        self.base_lower = np.array(lp.lower + (0.0,) * n_slack)
        self.base_upper = np.array(lp.upper + (math.inf,) * n_slack)

    @property
    def n_struct(self) -> int:
        return self.mat.n_struct

    @property
    def n_total(self) -> int:
        return self.mat.n_total

    @property
    def m(self) -> int:
        return self.mat.m


def compile_lp(lp: LinearProgram) -> CompiledLp:
    cached = getattr(lp, "_compiled", None)
    if cached is None:
        cached = CompiledLp(lp)
        object.__setattr__(lp, "_compiled", cached)
    return cached


def update_lower_bound(lp: LinearProgram, var: int, new_lb: float) -> LinearProgram:
    """Return a copy of ``lp`` with the lower bound of ``var`` tightened.

    The constraint matrix is shared with the original model, so iterated
    bound-lift-and-resolve loops pay only for the bound copy.
    """
    if not 0 <= var < lp.num_vars:
        raise IndexError(var)
    if new_lb > lp.upper[var] + 1e-12:
        raise BoundCrossing(
            f"variable {var}: new lower bound {new_lb} exceeds upper {lp.upper[var]}"
        )
    if new_lb < lp.lower[var] - 1e-12:
        raise ValueError(f"variable {var}: lower bound may only tighten")
    if new_lb == lp.lower[var]:
        return lp
    lower = list(lp.lower)
    lower[var] = new_lb
    new = LinearProgram(lp.num_vars, lp.objective, lp.rows, tuple(lower), lp.upper)
    object.__setattr__(new, "_compiled", CompiledLp(new, share=compile_lp(lp)))
    return new


# ---------------------------------------------------------------------------
# Core simplex


class _Tableau:
    """Mutable solver state for one solve call.

    Artificial variables are represented implicitly: variable ``n_total + i``
    is the signed unit column for row ``i``. They never re-enter the basis
    once they leave it.
    """

    def __init__(self, comp: CompiledLp, lower: np.ndarray, upper: np.ndarray):
        mat = comp.mat
        m, N = mat.m, mat.n_total
        self.mat = mat
        # Bounds extended with one artificial slot per row.
        self.lower = np.concatenate([lower, np.zeros(m)])
        self.upper = np.concatenate([upper, np.full(m, math.inf)])
        self.status = np.full(N, _AT_LOWER, dtype=np.int8)
        self.x = lower.copy()  # nonbasic values of the real columns

        # With every real column at its lower bound, decide row by row whether
        # the slack can serve as the initial basic variable or an artificial
        # (signed unit column) is required.
        r = mat.b - mat.A @ self.x
        self.basis = np.empty(m, dtype=np.int64)
        self.art_sign = np.zeros(m)
        x_b = np.empty(m)
        diag = np.empty(m)
        for i in range(m):
            s = mat.slack_of_row[i]
            if s >= 0:
                coef = mat.A[i, s]
                val = r[i] / coef
                if val >= -PIVOT_TOL:
                    self.basis[i] = s
                    self.status[s] = _BASIC
                    x_b[i] = max(val, 0.0)
                    diag[i] = coef
                    continue
            self.basis[i] = N + i
            self.art_sign[i] = 1.0 if r[i] >= 0 else -1.0
            x_b[i] = abs(r[i])
            diag[i] = self.art_sign[i]
        self.x_basic = x_b
        self.b_inv = np.diag(1.0 / diag)
        self.pivots = 0
        self.iterations = 0

    @classmethod
    def from_snapshot(
        cls, comp: CompiledLp, lower: np.ndarray, upper: np.ndarray, snap: BasisSnapshot
    ) -> "_Tableau":
        """Warm tableau: the snapshot's basis with the new bounds. Nonbasic
        variables sit on their (possibly moved) bounds; the dual simplex then
        repairs primal feasibility."""
        tab = cls.__new__(cls)
        mat = comp.mat
        tab.mat = mat
        m = mat.m
        tab.lower = np.concatenate([lower, np.zeros(m)])
        tab.upper = np.concatenate([upper, np.full(m, math.inf)])
        tab.status = snap.status.copy()
        bad_upper = (tab.status == _AT_UPPER) & ~np.isfinite(tab.upper[: mat.n_total])
        tab.status[bad_upper] = _AT_LOWER
        tab.x = np.where(
            tab.status == _AT_UPPER, tab.upper[: mat.n_total], tab.lower[: mat.n_total]
        )
        tab.basis = snap.basis.copy()
        tab.art_sign = snap.art_sign.copy()
        tab.pivots = 0
        tab.iterations = 0
        tab.freeze_artificials()
        tab.refactorize()
        return tab

    def snapshot(self) -> BasisSnapshot:
        return BasisSnapshot(
            basis=self.basis.copy(),
            status=self.status.copy(),
            art_sign=self.art_sign.copy(),
        )

    def has_artificials(self) -> bool:
        return bool(np.any(self.basis >= self.mat.n_total))

    def column(self, j: int) -> np.ndarray:
        mat = self.mat
        if j < mat.n_total:
            return mat.A[:, j]
        col = np.zeros(mat.m)
        col[j - mat.n_total] = self.art_sign[j - mat.n_total]
        return col

    def freeze_artificials(self):
        self.upper[self.mat.n_total :] = 0.0

    def refactorize(self):
        mat = self.mat
        m = mat.m
        B = np.empty((m, m))
        for i, j in enumerate(self.basis):
            B[:, i] = self.column(j)
        try:
            self.b_inv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis during refactorization") from exc
        x_n = self.x.copy()
        struct_basic = self.basis[self.basis < mat.n_total]
        x_n[struct_basic] = 0.0
        self.x_basic = self.b_inv @ (mat.b - mat.A @ x_n)

    def extended_cost(self, c_real: np.ndarray, art_cost: float) -> np.ndarray:
        return np.concatenate([c_real, np.full(self.mat.m, art_cost)])

    def optimize(self, c_real: np.ndarray, art_cost: float) -> LpStatus:
        """Primal simplex to optimality for the given objective. Returns
        OPTIMAL or UNBOUNDED; feasibility is maintained, not checked."""
        mat = self.mat
        m, N = mat.m, mat.n_total
        c_ext = self.extended_cost(c_real, art_cost)
        bland = False
        degenerate = 0
        bland_after = 10 * (m + N)
        max_iters = 500 * (m + N) + 5000

        for _ in range(max_iters):
            self.iterations += 1
            y = c_ext[self.basis] @ self.b_inv
            rc = c_real - y @ mat.A
            movable = self.upper[:N] > self.lower[:N]
            viol_lo = (self.status == _AT_LOWER) & movable & (rc < -RCOST_TOL)
            viol_up = (self.status == _AT_UPPER) & movable & (rc > RCOST_TOL)
            any_lo = viol_lo.any()
            if not any_lo and not viol_up.any():
                return LpStatus.OPTIMAL
            if bland:
                cand = np.flatnonzero(viol_lo | viol_up)
                j = int(cand[0])
            else:
                score = np.where(viol_lo, -rc, 0.0)
                score = np.where(viol_up, rc, score)
                j = int(np.argmax(score))

            from_lower = self.status[j] == _AT_LOWER
            sgn = 1.0 if from_lower else -1.0
            d = self.b_inv @ mat.A[:, j]
            g = -sgn * d  # change of basic values per unit entering step

            lo_b = self.lower[self.basis]
            up_b = self.upper[self.basis]
            t = np.full(m, math.inf)
            dec = g < -PIVOT_TOL
            inc = g > PIVOT_TOL
            with np.errstate(invalid="ignore"):
                t[dec] = (self.x_basic[dec] - lo_b[dec]) / (-g[dec])
                t[inc] = (up_b[inc] - self.x_basic[inc]) / g[inc]
            np.maximum(t, 0.0, out=t)
            t_flip = self.upper[j] - self.lower[j]
            t_basic = float(t.min()) if m else math.inf
            t_best = min(t_flip, t_basic)
            if math.isinf(t_best):
                return LpStatus.UNBOUNDED
            if t_best <= 1e-10:
                degenerate += 1
                if degenerate > bland_after:
                    bland = True

            if t_flip <= t_basic:  # bound flip, no basis change
                self.x_basic += g * t_flip
                self.status[j] = _AT_UPPER if from_lower else _AT_LOWER
                self.x[j] = self.upper[j] if from_lower else self.lower[j]
                continue

            # Leaving variable: min-ratio rows, ties by lowest variable index.
            tie = np.flatnonzero(t <= t_basic + 1e-12)
            leave_pos = int(tie[np.argmin(self.basis[tie])])
            leaving = int(self.basis[leave_pos])
            step = t_basic
            self.x_basic += g * step
            enter_val = (
                self.lower[j] + step if from_lower else self.upper[j] - step
            )
            if leaving < N:
                if g[leave_pos] < 0:
                    self.status[leaving] = _AT_LOWER
                    self.x[leaving] = self.lower[leaving]
                else:
                    self.status[leaving] = _AT_UPPER
                    self.x[leaving] = self.upper[leaving]
            self.basis[leave_pos] = j
            self.status[j] = _BASIC
            self.x_basic[leave_pos] = enter_val

            piv = d[leave_pos]
            if abs(piv) < PIVOT_TOL:
                raise NumericalFailure(
                    f"pivot magnitude {abs(piv):.2e} below threshold"
                )
            row = self.b_inv[leave_pos, :] / piv
            self.b_inv -= np.outer(d, row)
            self.b_inv[leave_pos, :] = row
            self.pivots += 1
            if self.pivots % REFACTOR_EVERY == 0:
                self.refactorize()
        raise NumericalFailure("iteration limit exceeded (cycling suspected)")

    def dual_optimize(self, c_real: np.ndarray) -> LpStatus:
        """Bounded-variable dual simplex: starting from a dual-feasible basis
        (same objective as the snapshot's solve), repair primal feasibility.
        Returns OPTIMAL, or INFEASIBLE when a violated row cannot be fixed."""
        mat = self.mat
        m, N = mat.m, mat.n_total
        c_ext = self.extended_cost(c_real, 0.0)
        max_iters = 500 * (m + N) + 5000
        for _ in range(max_iters):
            self.iterations += 1
            lo_b = self.lower[self.basis]
            up_b = self.upper[self.basis]
            below = lo_b - self.x_basic
            above = self.x_basic - up_b
            above = np.where(np.isfinite(up_b), above, -math.inf)
            viol = np.maximum(below, above)
            r = int(np.argmax(viol))
            if viol[r] <= FEAS_TOL:
                return LpStatus.OPTIMAL
            is_below = below[r] >= above[r]
            sigma = -1.0 if is_below else 1.0

            alpha = sigma * (self.b_inv[r, :] @ mat.A)
            y = c_ext[self.basis] @ self.b_inv
            rc = c_real - y @ mat.A
            movable = self.upper[:N] > self.lower[:N]
            elig_lo = (self.status == _AT_LOWER) & movable & (alpha > PIVOT_TOL)
            elig_up = (self.status == _AT_UPPER) & movable & (alpha < -PIVOT_TOL)
            eligible = elig_lo | elig_up
            if not eligible.any():
                return LpStatus.INFEASIBLE
            theta = np.full(N, math.inf)
            idx = np.flatnonzero(eligible)
            theta[idx] = np.maximum(rc[idx] / alpha[idx], 0.0)
            j = int(np.argmin(theta))

            d = self.b_inv @ mat.A[:, j]
            bound_r = lo_b[r] if is_below else up_b[r]
            delta = (self.x_basic[r] - bound_r) / d[r]
            leaving = int(self.basis[r])
            self.x_basic -= d * delta
            enter_val = self.x[j] + delta
            if leaving < N:
                self.status[leaving] = _AT_LOWER if is_below else _AT_UPPER
                self.x[leaving] = bound_r
            self.basis[r] = j
            self.status[j] = _BASIC
            self.x_basic[r] = enter_val

            piv = d[r]
            if abs(piv) < PIVOT_TOL:
                raise NumericalFailure(
                    f"dual pivot magnitude {abs(piv):.2e} below threshold"
                )
            row = self.b_inv[r, :] / piv
            self.b_inv -= np.outer(d, row)
            self.b_inv[r, :] = row
            self.pivots += 1
            if self.pivots % REFACTOR_EVERY == 0:
                self.refactorize()
        raise NumericalFailure("dual iteration limit exceeded (cycling suspected)")

    def infeasibility(self) -> float:
        mask = self.basis >= self.mat.n_total
        return float(self.x_basic[mask].sum()) if mask.any() else 0.0

    def drive_out_artificials(self):
        """Pivot basic artificials out where a nonzero real pivot exists; rows
        without one are redundant and keep their artificial pinned at zero."""
        mat = self.mat
        N = mat.n_total
        for i in range(mat.m):
            if self.basis[i] < N:
                continue
            row = self.b_inv[i, :] @ mat.A
            nonbasic = self.status != _BASIC
            cand = np.flatnonzero(nonbasic & (np.abs(row) > PIVOT_TOL))
            if cand.size == 0:
                continue
            j = int(cand[0])
            d = self.b_inv @ mat.A[:, j]
            self.basis[i] = j
            self.status[j] = _BASIC
            piv = d[i]
            r = self.b_inv[i, :] / piv
            self.b_inv -= np.outer(d, r)
            self.b_inv[i, :] = r
            self.x_basic[i] = self.x[j]  # degenerate entry at its bound value
        self.freeze_artificials()

    def assemble(self) -> np.ndarray:
        full = self.x.copy()
        for i, j in enumerate(self.basis):
            if j < self.mat.n_total:
                full[j] = self.x_basic[i]
        return full


def solve_compiled(
    comp: CompiledLp,
    lower: Optional[np.ndarray] = None,
    upper: Optional[np.ndarray] = None,
    objective: Optional[np.ndarray] = None,
    warm: Optional[BasisSnapshot] = None,
    capture: bool = False,
) -> LpSolution:
    """Solve a compiled LP, optionally overriding structural bounds or the
    objective (length ``n_struct`` arrays). Deterministic for equal inputs.

    ``warm`` re-solves after bound changes from a previous solve's snapshot
    via the dual simplex (same objective required for dual feasibility),
    falling back to a cold solve if the warm path stalls. ``capture`` attaches
    the final basis to the solution.
    """
    lo = comp.base_lower.copy()
    up = comp.base_upper.copy()
    if lower is not None:
        lo[: comp.n_struct] = lower
    if upper is not None:
        up[: comp.n_struct] = upper
    if np.any(lo > up + 1e-12):
        return LpSolution(LpStatus.INFEASIBLE, math.nan, np.empty(0), np.empty(0), 0)
    c = comp.mat.c
    if objective is not None:
        c = np.zeros(comp.n_total)
        c[: comp.n_struct] = objective

    tab: Optional[_Tableau] = None
    if warm is not None:
        try:
            wtab = _Tableau.from_snapshot(comp, lo, up, warm)
            status = wtab.dual_optimize(c[: comp.n_total])
            if status is not LpStatus.INFEASIBLE:
                tab = wtab
            # A warm infeasibility verdict rests on dual feasibility of the
            # snapshot, so confirm it with the cold two-phase path below.
        except NumericalFailure:
            tab = None  # cold restart below

    if tab is None:
        tab = _Tableau(comp, lo, up)
        if tab.has_artificials():
            status = tab.optimize(np.zeros(comp.n_total), art_cost=1.0)
            if status is LpStatus.UNBOUNDED:
                raise NumericalFailure("phase-1 objective reported unbounded")
            scale = 1.0 + float(np.abs(comp.mat.b).max(initial=0.0))
            if tab.infeasibility() > FEAS_TOL * scale:
                return LpSolution(
                    LpStatus.INFEASIBLE, math.nan, np.empty(0), np.empty(0), tab.iterations
                )
            tab.drive_out_artificials()
        else:
            tab.freeze_artificials()

    status = tab.optimize(c, art_cost=0.0)
    if status is LpStatus.UNBOUNDED:
        return LpSolution(
            LpStatus.UNBOUNDED, -math.inf, np.empty(0), np.empty(0), tab.iterations
        )
    tab.refactorize()  # clear accumulated product-form drift before reporting
    full = tab.assemble()
    primal = full[: comp.n_struct].copy()
    duals = tab.extended_cost(c, 0.0)[tab.basis] @ tab.b_inv
    obj = float(c[: comp.n_struct] @ primal)
    return LpSolution(
        LpStatus.OPTIMAL, obj, primal, duals, tab.iterations,
        tab.snapshot() if capture else None,
    )


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve an LP to proven optimality (or Infeasible/Unbounded status)."""
    return solve_compiled(compile_lp(lp))


# ---------------------------------------------------------------------------
# Debug export


def to_lp_text(lp: LinearProgram, name: str = "model") -> str:
    """Render the model in LP text format for cross-checking against external
    solvers (debug aid only)."""

    def term(col: int, coef: float) -> str:
        sign = "+" if coef >= 0 else "-"
        return f"{sign} {abs(coef):.12g} x{col}"

    lines = [
        f"\\ {name}",
        "Minimize",
        " obj: " + " ".join(term(c, v) for c, v in lp.objective),
        "Subject To",
    ]
    for i, row in enumerate(lp.rows):
        lhs = " ".join(term(c, v) for c, v in row.coeffs)
        lines.append(f" r{i}: {lhs} {row.sense} {row.rhs:.12g}")
    lines.append("Bounds")
    for j in range(lp.num_vars):
        up = "+inf" if math.isinf(lp.upper[j]) else f"{lp.upper[j]:.12g}"
        lines.append(f" {lp.lower[j]:.12g} <= x{j} <= {up}")
    lines.append("End")
    return "\n".join(lines) + "\n"
