"""Dense bounded-variable tableau simplex.

Every row ``a x (<=, >=, =) b`` gets its own slack ``s`` so that ``a x + s = b``
with ``s >= 0``, ``s <= 0`` or ``s = 0``; the slack basis is always a valid
starting point.  Nonbasic variables sit at one of their bounds (free ones at
zero).  Primal iterations use a composite phase 1 (minimize the sum of bound
violations of the basic variables) followed by phase 2; after bound changes or
added rows the basis usually stays dual feasible and the dual simplex is used
instead, which is what makes branch-and-bound re-solves cheap.

Pricing is Dantzig's rule with a switch to Bland's rule after
``DEGENERATE_LIMIT`` consecutive degenerate pivots, back again after the next
non-degenerate one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import EQ, GE, LE, MilpModel

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIV_TOL = 1e-9
DEGENERATE_LIMIT = 50
REFACTOR_EVERY = 100
FINAL_REFACTOR_AFTER = 25

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_BASIC, _LOWER, _UPPER, _ZERO = 0, -1, 1, 2


class NumericalFailure(RuntimeError):
    """The tableau drifted beyond tolerance and could not be repaired."""


@dataclass
class LpSolution:
    status: str
    objective: float
    values: np.ndarray
    iterations: int = 0


@dataclass(frozen=True)
class Basis:
    basic: tuple[int, ...]
    status: bytes = field(repr=False)


class SimplexEngine:
    """Mutable LP state: bounds and rows can change between calls to ``solve``."""

    def __init__(self, A, senses, b, c, lb, ub):
        A = np.asarray(A, dtype=float).reshape(len(b), len(c))
        self.n = len(c)
        m = A.shape[0]
        self.A = np.hstack([A, np.eye(m)])
        self.b = np.asarray(b, dtype=float).copy()
        self.c = np.concatenate([np.asarray(c, dtype=float), np.zeros(m)])
        slb, sub = zip(*(_slack_bounds(s) for s in senses)) if m else ((), ())
        self.lb = np.concatenate([np.asarray(lb, dtype=float), np.array(slb, dtype=float)])
        self.ub = np.concatenate([np.asarray(ub, dtype=float), np.array(sub, dtype=float)])
        self.basis = list(range(self.n, self.n + m))
        self.status = np.full(self.n + m, _LOWER, dtype=np.int8)
        self.status[self.basis] = _BASIC
        self.x = np.zeros(self.n + m)
        for j in range(self.n):
            self._place_nonbasic(j)
        self.T = self.A.copy()
        self.iterations = 0
        self._since_refactor = 0
        self._recompute_basics()

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def values(self) -> np.ndarray:
        return self.x[: self.n].copy()

    @property
    def objective(self) -> float:
        return float(self.c[: self.n] @ self.x[: self.n])

    # state changes

    def _place_nonbasic(self, j: int, prefer: int | None = None) -> None:
        lo, hi = self.lb[j], self.ub[j]
        side = prefer if prefer in (_LOWER, _UPPER) else self.status[j]
        if math.isfinite(lo) and (side != _UPPER or not math.isfinite(hi)):
            self.status[j], self.x[j] = _LOWER, lo
        elif math.isfinite(hi):
            self.status[j], self.x[j] = _UPPER, hi
        else:
            self.status[j], self.x[j] = _ZERO, 0.0

    def set_bounds(self, lb, ub) -> None:
        """Replace structural bounds, keeping the current basis."""
        lb = np.asarray(lb, dtype=float)
        ub = np.asarray(ub, dtype=float)
        changed = np.nonzero((lb != self.lb[: self.n]) | (ub != self.ub[: self.n]))[0]
        if changed.size == 0:
            return
        d = self.reduced_costs()
        for j in changed.tolist():
            self.lb[j], self.ub[j] = lb[j], ub[j]
            if self.status[j] == _BASIC:
                continue
            old = self.x[j]
            prefer = _LOWER if d[j] >= 0 else _UPPER
            self._place_nonbasic(j, prefer)
            delta = self.x[j] - old
            if delta:
                self._shift_basics(j, delta)

    def add_row(self, coefs, sense: str, rhs: float) -> None:
        """Append ``coefs @ x sense rhs``; its slack enters the basis."""
        coefs = np.asarray(coefs, dtype=float)
        m, N = self.A.shape
        a = np.concatenate([coefs, np.zeros(m)])
        self.A = np.block([[self.A, np.zeros((m, 1))], [a, np.ones(1)]])
        new_row = a - a[self.basis] @ self.T
        self.T = np.block([[self.T, np.zeros((m, 1))], [new_row, np.ones(1)]])
        self.b = np.append(self.b, rhs)
        self.c = np.append(self.c, 0.0)
        lo, hi = _slack_bounds(sense)
        self.lb = np.append(self.lb, lo)
        self.ub = np.append(self.ub, hi)
        self.status = np.append(self.status, np.int8(_BASIC))
        self.x = np.append(self.x, rhs - coefs @ self.x[: self.n])
        self.basis.append(N)

    def snapshot(self) -> Basis:
        return Basis(tuple(self.basis), self.status.tobytes())

    def restore(self, basis: Basis) -> None:
        """Reload a stored basis; rows added since then get their slack basic."""
        status = np.frombuffer(basis.status, dtype=np.int8)
        k = len(basis.basic)
        self.basis = list(basis.basic) + list(range(self.n + k, self.n + self.m))
        self.status = np.full(self.A.shape[1], _BASIC, dtype=np.int8)
        head = min(len(status), self.n + k)
        self.status[:head] = status[:head]
        self.status[self.basis] = _BASIC
        nb = self.status != _BASIC
        lo_ok = np.isfinite(self.lb)
        hi_ok = np.isfinite(self.ub)
        at_low = nb & lo_ok & ((self.status != _UPPER) | ~hi_ok)
        at_high = nb & ~at_low & hi_ok
        free = nb & ~at_low & ~at_high
        self.status[at_low], self.x[at_low] = _LOWER, self.lb[at_low]
        self.status[at_high], self.x[at_high] = _UPPER, self.ub[at_high]
        self.status[free], self.x[free] = _ZERO, 0.0
        self.refactor()

    # linear algebra

    def refactor(self) -> None:
        """Recompute the tableau and basic values from the basis columns."""
        nonbasic = self.status != _BASIC
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        B = self.A[:, self.basis]
        try:
            sol = np.linalg.solve(B, np.column_stack([self.A[:, nonbasic], rhs]))
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis") from exc
        T = np.zeros_like(self.A)
        T[:, nonbasic] = sol[:, :-1]
        T[np.arange(self.m), self.basis] = 1.0
        self.T = T
        self.x[self.basis] = sol[:, -1]
        self._since_refactor = 0

    def _recompute_basics(self) -> None:
        nonbasic = self.status != _BASIC
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        B = self.A[:, self.basis]
        try:
            self.x[self.basis] = np.linalg.solve(B, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis") from exc

    def _shift_basics(self, j: int, delta: float) -> None:
        self.x[self.basis] -= self.T[:, j] * delta

    def reduced_costs(self) -> np.ndarray:
        return self.c - self.c[self.basis] @ self.T

    def _pivot(self, r: int, q: int) -> None:
        T = self.T
        piv = T[r, q]
        T[r] /= piv
        col = T[:, q].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = q
        self.status[q] = _BASIC
        self.iterations += 1
        self._since_refactor += 1

    # feasibility tests

    def _basic_infeasibility(self) -> np.ndarray:
        xb = self.x[self.basis]
        lo = self.lb[self.basis]
        hi = self.ub[self.basis]
        below = lo - xb
        above = xb - hi
        return np.where(below > FEAS_TOL, -1, np.where(above > FEAS_TOL, 1, 0))

    def _movable(self):
        fixed = self.lb == self.ub
        up = (self.status != _BASIC) & ~fixed & (self.x < self.ub)
        down = (self.status != _BASIC) & ~fixed & (self.x > self.lb)
        return up, down

    def _dual_feasible(self, d: np.ndarray) -> bool:
        up, down = self._movable()
        return not (np.any(up & (d < -OPT_TOL)) or np.any(down & (d > OPT_TOL)))

    def _flip_to_dual_feasible(self, d: np.ndarray) -> bool:
        """Move boxed nonbasics to the bound their reduced cost prefers."""
        up, down = self._movable()
        boxed = np.isfinite(self.lb) & np.isfinite(self.ub)
        bad = (up & (d < -OPT_TOL)) | (down & (d > OPT_TOL))
        if np.any(bad & ~boxed):
            return False
        for j in np.nonzero(bad)[0].tolist():
            old = self.x[j]
            self._place_nonbasic(j, _UPPER if d[j] < 0 else _LOWER)
            self._shift_basics(j, self.x[j] - old)
        return True

    # drivers

    def solve(self, max_iter: int | None = None) -> str:
        if max_iter is None:
            max_iter = 50 * (self.A.shape[0] + self.A.shape[1]) + 1000
        start = self.iterations
        for _attempt in range(3):
            d = self.reduced_costs()
            if np.any(self._basic_infeasibility()) and self._flip_to_dual_feasible(d):
                status = self._dual(max_iter, start)
                if status == INFEASIBLE:
                    return self._confirm_infeasible(max_iter, start)
            status = self._primal(max_iter, start)
            if status != OPTIMAL:
                return status
            if self._since_refactor >= FINAL_REFACTOR_AFTER:
                self.refactor()
            if not np.any(self._basic_infeasibility()) and self._dual_feasible(self.reduced_costs()):
                return OPTIMAL
        raise NumericalFailure("simplex could not restore feasibility after refactorization")

    def _confirm_infeasible(self, max_iter: int, start: int) -> str:
        self.refactor()
        return self._primal(max_iter, start)

    def _primal(self, max_iter: int, start: int) -> str:
        degenerate = 0
        while True:
            if self.iterations - start > max_iter:
                raise NumericalFailure("simplex iteration limit reached")
            if self._since_refactor >= REFACTOR_EVERY:
                self.refactor()
            g = self._basic_infeasibility()
            phase1 = bool(np.any(g))
            if phase1:
                d = -(g @ self.T)
            else:
                d = self.reduced_costs()
            up, down = self._movable()
            score = np.where(up & (d < -OPT_TOL), -d, 0.0)
            score = np.maximum(score, np.where(down & (d > OPT_TOL), d, 0.0))
            cand = np.nonzero(score > 0)[0]
            if cand.size == 0:
                return INFEASIBLE if phase1 else OPTIMAL
            bland = degenerate >= DEGENERATE_LIMIT
            q = int(cand[0]) if bland else int(cand[np.argmax(score[cand])])
            direction = 1.0 if (up[q] and d[q] < -OPT_TOL) else -1.0

            alpha = self.T[:, q] * direction
            xb = self.x[self.basis]
            lo = self.lb[self.basis]
            hi = self.ub[self.basis]
            ratios = np.full(self.m, np.inf)
            targets = np.zeros(self.m)
            dec = alpha > PIV_TOL
            inc = alpha < -PIV_TOL
            above = g > 0
            below = g < 0
            feas = g == 0
            # decreasing basics stop at ub (if above it) or at lb (if feasible)
            sel = dec & above
            ratios[sel], targets[sel] = (xb[sel] - hi[sel]) / alpha[sel], hi[sel]
            sel = dec & feas & np.isfinite(lo)
            ratios[sel], targets[sel] = (xb[sel] - lo[sel]) / alpha[sel], lo[sel]
            sel = inc & below
            ratios[sel], targets[sel] = (lo[sel] - xb[sel]) / -alpha[sel], lo[sel]
            sel = inc & feas & np.isfinite(hi)
            ratios[sel], targets[sel] = (hi[sel] - xb[sel]) / -alpha[sel], hi[sel]
            ratios = np.maximum(ratios, 0.0)

            flip = self.ub[q] - self.lb[q]
            t_row = ratios.min() if self.m else np.inf
            if not math.isfinite(t_row) and not math.isfinite(flip):
                if phase1:
                    raise NumericalFailure("phase 1 found an unbounded improving ray")
                return UNBOUNDED
            if flip <= t_row:
                t = flip
                self.x[q] += direction * t
                self._shift_basics(q, direction * t)
                self.status[q] = _UPPER if direction > 0 else _LOWER
                self.x[q] = self.ub[q] if direction > 0 else self.lb[q]
                self.iterations += 1
            else:
                t = t_row
                ties = np.nonzero(ratios <= t_row + 1e-12)[0]
                if bland:
                    r = int(min(ties, key=lambda i: self.basis[i]))
                else:
                    r = int(ties[np.argmax(np.abs(alpha[ties]))])
                self.x[q] += direction * t
                self._shift_basics(q, direction * t)
                leaving = self.basis[r]
                target = targets[r]
                self._pivot(r, q)
                self.x[leaving] = target
                self.status[leaving] = _LOWER if target == self.lb[leaving] else _UPPER
            degenerate = degenerate + 1 if t <= 1e-12 else 0

    def _dual(self, max_iter: int, start: int) -> str:
        degenerate = 0
        while True:
            if self.iterations - start > max_iter:
                raise NumericalFailure("dual simplex iteration limit reached")
            if self._since_refactor >= REFACTOR_EVERY:
                self.refactor()
            xb = self.x[self.basis]
            lo = self.lb[self.basis]
            hi = self.ub[self.basis]
            viol = np.maximum(lo - xb, xb - hi)
            bad = np.nonzero(viol > FEAS_TOL)[0]
            if bad.size == 0:
                return OPTIMAL
            bland = degenerate >= DEGENERATE_LIMIT
            if bland:
                r = int(min(bad, key=lambda i: self.basis[i]))
            else:
                r = int(bad[np.argmax(viol[bad])])
            raise_it = xb[r] < lo[r]
            target = lo[r] if raise_it else hi[r]
            row = self.T[r]
            d = self.reduced_costs()
            up, down = self._movable()
            # x_Br changes by -row[j] * delta_j
            if raise_it:
                elig = (up & (row < -PIV_TOL)) | (down & (row > PIV_TOL))
            else:
                elig = (up & (row > PIV_TOL)) | (down & (row < -PIV_TOL))
            cand = np.nonzero(elig)[0]
            if cand.size == 0:
                return INFEASIBLE
            ratios = np.abs(d[cand]) / np.abs(row[cand])
            best = ratios.min()
            ties = cand[ratios <= best + 1e-12]
            q = int(ties[0]) if bland else int(ties[np.argmax(np.abs(row[ties]))])
            delta = (xb[r] - target) / row[q]
            self.x[q] += delta
            self._shift_basics(q, delta)
            leaving = self.basis[r]
            self._pivot(r, q)
            self.x[leaving] = target
            self.status[leaving] = _LOWER if raise_it else _UPPER
            degenerate = degenerate + 1 if best <= 1e-12 else 0


def _slack_bounds(sense: str) -> tuple[float, float]:
    if sense == LE:
        return 0.0, math.inf
    if sense == GE:
        return -math.inf, 0.0
    if sense == EQ:
        return 0.0, 0.0
    raise ValueError(f"unknown sense {sense!r}")


def model_arrays(model: MilpModel):
    """Dense ``(A, senses, b, c, lb, ub)`` for a model."""
    A = np.zeros((len(model.constraints), model.num_vars))
    for i, con in enumerate(model.constraints):
        for j, coef in con.terms:
            A[i, j] = coef
    senses = [con.sense for con in model.constraints]
    b = np.array([con.rhs for con in model.constraints], dtype=float)
    lb, ub = model.bounds()
    return A, senses, b, model.objective_vector(), lb, ub


def solve_lp(model: MilpModel) -> LpSolution:
    """Solve the LP relaxation of ``model`` (integrality dropped)."""
    engine = SimplexEngine(*model_arrays(model))
    status = engine.solve()
    values = engine.values
    obj = engine.objective + model.objective_constant if status == OPTIMAL else math.nan
    if status == UNBOUNDED:
        obj = -math.inf
    return LpSolution(status, obj, values, engine.iterations)
