import numpy as np
import pytest

from csec.loadopt import (
    InfeasibleStragglerTolerance,
    homogeneous_optimal_time,
    min_time_oracle,
    optimal_load_vector,
)


def test_heterogeneous_worked_example_no_tolerance():
    sol = optimal_load_vector([1, 1, 2, 2, 3], 3, 0)
    assert np.allclose(sol.loads, [1/3, 1/3, 2/3, 2/3, 1], atol=1e-12)
    assert sol.time == pytest.approx(1/3, abs=1e-12)
    assert sol.threshold_index == 5


def test_heterogeneous_worked_example_one_straggler():
    sol = optimal_load_vector([1, 1, 2, 2, 3], 3, 1)
    assert np.allclose(sol.loads, [1/2, 1/2, 1, 1, 1], atol=1e-12)
    assert sol.time == pytest.approx(1/2, abs=1e-12)
    assert sol.threshold_index == 4


def test_full_replication_when_tolerance_maximal():
    sol = optimal_load_vector([1, 1, 1, 1, 1], 3, 2)
    assert np.allclose(sol.loads, 1.0)
    assert sol.time == pytest.approx(1.0, abs=1e-12)
    assert sol.threshold_index == 5


def test_all_machines_saturated_when_l_equals_n():
    sol = optimal_load_vector([2.0, 2.0, 2.0], 3, 0)
    assert np.allclose(sol.loads, 1.0)
    assert sol.time == pytest.approx(0.5, abs=1e-12)


def test_homogeneous_times_match_worked_examples():
    speeds = [1.0] * 5
    assert homogeneous_optimal_time(speeds, 3, 0) == pytest.approx(3/5, abs=1e-12)
    assert homogeneous_optimal_time(speeds, 3, 1) == pytest.approx(4/5, abs=1e-12)
    assert homogeneous_optimal_time(speeds, 3, 2) == pytest.approx(1.0, abs=1e-12)


def test_infeasible_tolerance_raises():
    with pytest.raises(InfeasibleStragglerTolerance):
        optimal_load_vector([1, 1, 1], 2, 2)
    with pytest.raises(InfeasibleStragglerTolerance):
        homogeneous_optimal_time([1, 1], 2, 1)
    with pytest.raises(InfeasibleStragglerTolerance):
        min_time_oracle([1, 1], 2, 1)


def test_oracle_matches_worked_example():
    assert min_time_oracle([1, 1, 2, 2, 3], 3, 0, tol=1e-12) == pytest.approx(1/3, abs=1e-11)


def test_oracle_feasibility_sums():
    s = np.array([1, 1, 2, 2, 3], dtype=float)
    assert float(np.sum(np.minimum(1.0, 0.3 * s))) < 3       # 2.7: infeasible at c=0.3
    c_max = 1.0 / s.min()
    assert float(np.sum(np.minimum(1.0, c_max * s))) >= 3    # full load always feasible


def _random_instances(n_instances, rng):
    while True:
        n = int(rng.integers(1, 13))
        speeds = rng.uniform(0.1, 10.0, size=n)
        for l in range(1, n + 1):
            for s in range(0, n - l + 1):
                yield speeds, l, s
                n_instances -= 1
                if n_instances <= 0:
                    return


def test_oracle_equivalence_on_random_instances():
    rng = np.random.default_rng(42)
    for speeds, l, s in _random_instances(1500, rng):
        sol = optimal_load_vector(speeds, l, s)
        oracle = min_time_oracle(speeds, l, s, tol=1e-12)
        assert abs(sol.time - oracle) <= 1e-9, (speeds, l, s)


def test_feasibility_of_returned_loads():
    rng = np.random.default_rng(43)
    for speeds, l, s in _random_instances(300, rng):
        sol = optimal_load_vector(speeds, l, s)
        assert abs(sol.loads.sum() - (l + s)) <= 1e-9
        assert np.all(sol.loads > 0)
        assert np.all(sol.loads <= 1 + 1e-12)
        assert sol.time == pytest.approx(float(np.max(sol.loads / speeds)), abs=1e-12)


def test_tradeoff_time_non_decreasing_in_tolerance():
    rng = np.random.default_rng(44)
    for _ in range(200):
        n = int(rng.integers(2, 13))
        speeds = rng.uniform(0.1, 10.0, size=n)
        l = int(rng.integers(1, n + 1))
        prev = None
        for s in range(0, n - l + 1):
            sol = optimal_load_vector(speeds, l, s)
            if prev is not None:
                assert sol.time >= prev - 1e-12
            prev = sol.time


def test_uniform_speeds_match_homogeneous_formula():
    rng = np.random.default_rng(45)
    for _ in range(50):
        n = int(rng.integers(2, 10))
        speed = float(rng.uniform(0.2, 5.0))
        l = int(rng.integers(1, n + 1))
        s = int(rng.integers(0, n - l + 1))
        sol = optimal_load_vector([speed] * n, l, s)
        assert sol.time == pytest.approx(homogeneous_optimal_time([speed] * n, l, s),
                                         abs=1e-12)


def test_scale_covariance():
    rng = np.random.default_rng(46)
    speeds = rng.uniform(0.1, 10.0, size=8)
    base = optimal_load_vector(speeds, 4, 2)
    for alpha in (0.5, 2.0, 7.3):
        scaled = optimal_load_vector(alpha * speeds, 4, 2)
        assert scaled.time == pytest.approx(base.time / alpha, rel=1e-12)
        assert np.allclose(scaled.loads, base.loads, atol=1e-12)


def test_speed_ties_resolved_by_original_index():
    sol = optimal_load_vector([2.0, 1.0, 1.0, 2.0], 2, 1)
    again = optimal_load_vector([2.0, 1.0, 1.0, 2.0], 2, 1)
    assert np.array_equal(sol.loads, again.loads)
    # tied slow machines get equal loads
    assert sol.loads[1] == pytest.approx(sol.loads[2], abs=1e-12)
