import numpy as np
import pytest

from pottsilp.grid import EdgeLabeling, build_grid_graph
from pottsilp.milp import solve_milp
from pottsilp.potts1d import (
    Fit1D,
    Potts1DParams,
    brute_force_potts1d,
    build_potts1d_model,
    exact_big_m,
    extract_segments_1d,
    median_fit,
    objective_1d,
    solve_potts1d_dp,
    solve_potts1d_mip,
)


@pytest.mark.parametrize("values,level,cost", [((1, 2, 9), 2, 8), ((5,), 5, 0), ((0, 10), 0, 10)])
def test_median_fit(values, level, cost):
    assert median_fit(values) == (level, cost)


def test_model_counts_n4():
    m = build_potts1d_model([1.0, 2.0, 3.0, 4.0], Potts1DParams(1.0, 3.0))
    assert m.num_vars == 4 + 3 + 8
    big_m_rows = [c for c in m.constraints if c.sense == "<="]
    assert len(big_m_rows) == 6
    assert len(m.constraints) - len(big_m_rows) == 4


def test_two_sample_optimum():
    res = solve_milp(build_potts1d_model([0.0, 10.0], Potts1DParams(3.0, 10.0)))
    assert res.objective == pytest.approx(3.0)


def test_params_validation():
    with pytest.raises(ValueError):
        Potts1DParams(-1.0, 1.0)
    with pytest.raises(ValueError):
        Potts1DParams(1.0, 0.0)


def test_dp_examples():
    fit = solve_potts1d_dp([4, 4, 4], 2.0)
    assert len(fit.segments) == 1 and fit.objective == 0
    fit = solve_potts1d_dp([0, 0, 5, 5], 1.0)
    assert len(fit.segments) == 2 and fit.objective == 1
    np.testing.assert_array_equal(fit.w, [0, 0, 5, 5])
    fit = solve_potts1d_dp([0, 5, 0], 3.0)
    assert fit.segments == [(0, 2, 0.0)] and fit.objective == 5


def test_dp_tie_prefers_fewer_segments():
    # one jump costs exactly what it saves
    fit = solve_potts1d_dp([0, 0, 4, 4], 8.0)
    assert fit.objective == 8 and len(fit.segments) == 1


def test_brute_force_basics():
    assert brute_force_potts1d([7, 7, 7, 7], 0.5).objective == 0
    y = np.array([0, 255, 0, 255, 3], dtype=float)
    fit = brute_force_potts1d(y, 10 * y.size * np.ptp(y))
    assert len(fit.segments) == 1
    with pytest.raises(ValueError):
        brute_force_potts1d(np.zeros(17), 1.0)


def test_dp_equals_brute_force():
    rng = np.random.default_rng(21)
    for _ in range(100):
        n = int(rng.integers(1, 13))
        y = rng.integers(0, 256, n).astype(float)
        lam = float(rng.choice([0.0, 0.5, 2, 10, 50, 300]))
        dp, bf = solve_potts1d_dp(y, lam), brute_force_potts1d(y, lam)
        assert dp.objective == pytest.approx(bf.objective, abs=1e-9)
        assert dp.x == bf.x


def test_extract_segments():
    g = build_grid_graph(1, 6)
    w = np.array([1.0, 1, 2, 2, 3, 3])
    fit = Fit1D(w, EdgeLabeling(g, [0, 1, 0, 1, 0]), 0.0)
    assert extract_segments_1d(fit) == [(0, 1, 1.0), (2, 3, 2.0), (4, 5, 3.0)]
    fit = Fit1D(w, EdgeLabeling(g, [0] * 5), 0.0)
    assert extract_segments_1d(fit) == [(0, 5, 1.0)]
    y = np.array([3.0, 1, 4, 1, 5, 9])
    fit = solve_potts1d_dp(y, 0.0)
    fit_all = Fit1D(y, EdgeLabeling(g, [1] * 5), 0.0)
    assert [s[2] for s in extract_segments_1d(fit_all)] == list(y)
    np.testing.assert_array_equal(fit.w, y)


def test_mip_matches_dp_and_recomputes():
    rng = np.random.default_rng(22)
    for _ in range(15):
        n = int(rng.integers(2, 12))
        y = rng.integers(0, 256, n).astype(float)
        lam = float(rng.choice([0.5, 2, 10, 50]))
        mip = solve_potts1d_mip(y, Potts1DParams(lam, exact_big_m(y)))
        dp = solve_potts1d_dp(y, lam)
        assert mip.objective == pytest.approx(dp.objective, abs=1e-6)
        assert objective_1d(y, mip.w, mip.x.values, lam) == pytest.approx(mip.objective, abs=1e-9)
        # dormant edges carry equal levels
        assert np.all(np.abs(np.diff(mip.w))[mip.x.values == 0] <= 1e-7)


def test_small_big_m_can_cut_off_the_optimum():
    # a jump of 100 cannot be represented with M = 10, so the fit must pay data cost instead
    y = np.array([0.0, 0.0, 100.0, 100.0])
    tight = solve_potts1d_mip(y, Potts1DParams(1.0, 10.0))
    assert tight.objective > solve_potts1d_dp(y, 1.0).objective + 1


def test_single_sample():
    fit = solve_potts1d_mip([42.0], Potts1DParams(1.0, 1.0))
    assert fit.objective == 0 and fit.segments == [(0, 0, 42.0)]
    with pytest.raises(ValueError):
        build_potts1d_model([1.0], Potts1DParams(1.0, 1.0))
