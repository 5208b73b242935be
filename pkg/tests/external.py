"""Independent reference solves through scipy's HiGHS bindings."""
import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from pottsilp.model import BINARY, EQ, GE, LE


def _arrays(model):
    A = np.zeros((len(model.constraints), model.num_vars))
    for i, con in enumerate(model.constraints):
        for j, coef in con.terms:
            A[i, j] += coef
    lo = np.full(A.shape[0], -np.inf)
    hi = np.full(A.shape[0], np.inf)
    for i, con in enumerate(model.constraints):
        if con.sense in (LE, EQ):
            hi[i] = con.rhs
        if con.sense in (GE, EQ):
            lo[i] = con.rhs
    lb = np.array([v.lb for v in model.variables])
    ub = np.array([v.ub for v in model.variables])
    return A, lo, hi, lb, ub


def highs_milp(model):
    """Objective and values of ``model`` solved as a MILP by HiGHS.

    Presolve is off: with it on, scipy 1.15 HiGHS returns -17 instead of -18
    on a 3-binary, 1-continuous instance kept in test_milp.
    """
    A, lo, hi, lb, ub = _arrays(model)
    integrality = np.array([1 if v.kind == BINARY else 0 for v in model.variables])
    cons = [LinearConstraint(A, lo, hi)] if A.shape[0] else []
    res = milp(model.objective_vector(), constraints=cons, integrality=integrality,
               bounds=Bounds(lb, ub), options={"mip_rel_gap": 1e-9, "presolve": False})
    assert res.success, res.message
    return res.fun + model.objective_constant, res.x


def highs_lp(model):
    A, lo, hi, lb, ub = _arrays(model)
    rows_ub, rhs_ub, rows_eq, rhs_eq = [], [], [], []
    for i in range(A.shape[0]):
        if lo[i] == hi[i]:
            rows_eq.append(A[i]); rhs_eq.append(hi[i])
            continue
        if np.isfinite(hi[i]):
            rows_ub.append(A[i]); rhs_ub.append(hi[i])
        if np.isfinite(lo[i]):
            rows_ub.append(-A[i]); rhs_ub.append(-lo[i])
    res = linprog(model.objective_vector(), A_ub=rows_ub or None, b_ub=rhs_ub or None,
                  A_eq=rows_eq or None, b_eq=rhs_eq or None,
                  bounds=[(None if np.isinf(a) else a, None if np.isinf(b) else b) for a, b in zip(lb, ub)],
                  method="highs")
    assert res.status == 0, res.message
    return res.fun + model.objective_constant
