import math

import numpy as np
import pytest

from pottsilp.milp import SolveOptions, relative_gap, solve_milp
from pottsilp.model import BINARY, GE, LE, LinearConstraint, MilpModel
from pottsilp.potts1d import Potts1DParams, build_potts1d_model

from external import highs_milp


def random_milp(rng):
    model = MilpModel("rand")
    nb, nc = int(rng.integers(1, 7)), int(rng.integers(0, 4))
    refs = [model.add_var(f"z{k}", BINARY, obj=float(rng.integers(-6, 7))) for k in range(nb)]
    refs += [model.add_var(f"u{k}", lb=0, ub=float(rng.integers(1, 6)), obj=float(rng.integers(-3, 4)))
             for k in range(nc)]
    for k in range(int(rng.integers(1, 5))):
        coefs = rng.integers(-4, 5, len(refs)).astype(float)
        sense = LE if rng.random() < 0.6 else GE
        model.add_constraint(list(zip(refs, coefs)), sense, float(rng.integers(-3, 6)), name=f"r{k}")
    return model


def test_agrees_with_highs_on_random_milps():
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(120):
        model = random_milp(rng)
        res = solve_milp(model)
        try:
            ref, _ = highs_milp(model)
        except AssertionError:
            assert res.status == "infeasible"
            continue
        checked += 1
        assert res.status == "optimal"
        assert res.objective == pytest.approx(ref, abs=1e-6)
        assert model.max_violation(res.values) <= 1e-6
    assert checked > 50


def test_result_invariants_and_monotone_bound():
    rng = np.random.default_rng(4)
    y = rng.integers(0, 256, 14).astype(float)
    model = build_potts1d_model(y, Potts1DParams(40.0, float(np.ptp(y))))
    res = solve_milp(model)
    trace = res.stats.bound_trace
    assert all(b2 >= b1 - 1e-9 for b1, b2 in zip(trace, trace[1:]))
    assert res.bound <= res.objective + 1e-9
    assert res.gap == pytest.approx(relative_gap(res.objective, res.bound))
    assert 0 <= res.gap <= 1e-6
    assert res.stats.root_lp <= res.objective + 1e-9
    assert res.stats.nodes >= 1 and res.stats.simplex_iterations > 0


def test_root_termination_when_lp_is_integral():
    model = MilpModel()
    z = model.add_var("z", BINARY, obj=1.0)
    model.add_constraint([(z, 1.0)], GE, 1.0)
    res = solve_milp(model)
    assert res.status == "optimal" and res.stats.nodes == 1 and res.objective == 1.0


def test_infeasible():
    model = MilpModel()
    a = model.add_var("a", BINARY)
    b = model.add_var("b", BINARY)
    model.add_constraint([(a, 2.0), (b, 2.0)], GE, 1.0)
    model.add_constraint([(a, 2.0), (b, 2.0)], LE, 1.5)
    res = solve_milp(model)
    assert res.status == "infeasible" and not res.has_solution


def test_unbounded_lp_raises():
    model = MilpModel()
    model.add_var("a", lb=-math.inf, obj=1.0)
    with pytest.raises(ValueError):
        solve_milp(model)


def test_node_limit_reports_gap():
    rng = np.random.default_rng(9)
    y = rng.integers(0, 256, 18).astype(float)
    model = build_potts1d_model(y, Potts1DParams(50.0, float(np.ptp(y))))
    res = solve_milp(model, SolveOptions(node_limit=3))
    assert res.status in ("feasible", "no_solution")
    assert res.stats.nodes <= 3
    if res.has_solution:
        assert res.bound <= res.objective + 1e-9
        assert res.gap == pytest.approx(relative_gap(res.objective, res.bound))
    else:
        assert math.isinf(res.gap)


def test_zero_time_limit_stops():
    y = np.arange(16, dtype=float) % 5 * 40
    model = build_potts1d_model(y, Potts1DParams(50.0, float(np.ptp(y))))
    res = solve_milp(model, SolveOptions(time_limit=0.0))
    assert res.status in ("feasible", "no_solution", "optimal")
    assert res.stats.nodes <= 1


def test_lazy_separator_on_integral_points():
    # min -a - b with lazily known a + b <= 1
    model = MilpModel()
    model.add_var("a", BINARY, obj=-1.0)
    model.add_var("b", BINARY, obj=-1.0)
    calls = []

    def separator(values, integral):
        calls.append(integral)
        if values[0] + values[1] > 1 + 1e-9:
            return [LinearConstraint(((0, 1.0), (1, 1.0)), LE, 1.0, "lazy")]
        return []

    res = solve_milp(model, None, separator)
    assert res.objective == -1.0
    assert res.stats.lazy_cuts == 1 and len(res.lazy_constraints) == 1
    assert all(calls)


def test_deterministic():
    rng = np.random.default_rng(6)
    y = rng.integers(0, 256, 15).astype(float)
    model = build_potts1d_model(y, Potts1DParams(10.0, float(np.ptp(y))))
    r1, r2 = solve_milp(model), solve_milp(model)
    assert r1.objective == r2.objective
    assert r1.stats.nodes == r2.stats.nodes
    assert r1.stats.simplex_iterations == r2.stats.simplex_iterations
    np.testing.assert_array_equal(r1.values, r2.values)


def test_relative_gap():
    assert relative_gap(10.0, 9.0) == pytest.approx(0.1)
    assert relative_gap(0.0, 0.0) == 0.0
    assert math.isinf(relative_gap(math.inf, 0.0))


def test_continuous_tail_instance():
    # optimum needs a fractional continuous value: z = (1, 1, 1), u = 4/3
    model = MilpModel()
    z = [model.add_var(f"z{k}", BINARY, obj=c) for k, c in enumerate((-6.0, -5.0, -3.0))]
    u = model.add_var("u0", lb=0, ub=3, obj=-3.0)
    model.add_constraint([(z[0], 3), (z[1], 1), (z[2], 2), (u, 2)], GE, -3)
    model.add_constraint([(z[0], 3), (z[1], 3), (z[2], 2), (u, -3)], GE, 4)
    model.add_constraint([(z[0], 2), (z[1], -2)], LE, 0)
    model.add_constraint([(z[0], -2), (z[2], 1)], GE, -1)
    res = solve_milp(model)
    assert res.objective == pytest.approx(-18.0)
    assert res.values[3] == pytest.approx(4 / 3)
    assert model.max_violation(res.values) <= 1e-9
