import numpy as np
import pytest

from csec.cluster import MachineProfile, SimulatedCluster, StragglerPolicy
from csec.coding import build_generator, encode_store
from csec.runtime import (
    CodedRuntime,
    InfeasibleStep,
    MasterState,
    StepFailure,
    collect_and_decode,
    execute_step,
    update_speed_estimate,
)


def make_cluster(speeds, n_stable=None, p=0.5, seed=0):
    n_stable = len(speeds) if n_stable is None else n_stable
    profiles = tuple(
        MachineProfile(id=i + 1, true_speed=float(s), elastic=i >= n_stable,
                       p_available=1.0 if i < n_stable else p)
        for i, s in enumerate(speeds)
    )
    return SimulatedCluster(profiles, seed=seed)


def make_state(cluster, generator, scheme="heterogeneous", tolerance=0,
               gamma=0.5, estimate=1.0, **kw):
    return MasterState(
        speed_estimate={m: estimate for m in cluster.machine_ids},
        ema_weight=gamma,
        tolerance=tolerance,
        generator=generator,
        scheme=scheme,
        **kw,
    )


def test_update_speed_estimate_ema():
    assert update_speed_estimate({1: 1.0}, {1: 2.0}, 0.5) == {1: 1.5}
    assert update_speed_estimate({1: 1.0}, {1: 2.0}, 0.0) == {1: 1.0}
    assert update_speed_estimate({1: 1.0}, {1: 2.0}, 1.0) == {1: 2.0}
    # machines without a measurement keep their entry
    assert update_speed_estimate({1: 1.0, 2: 3.0}, {1: 2.0}, 0.5) == {1: 1.5, 2: 3.0}
    with pytest.raises(ValueError):
        update_speed_estimate({}, {}, 1.5)


@pytest.mark.parametrize("scheme", ["uncoded", "homogeneous_cyclic", "heterogeneous"])
def test_step_matches_direct_product(scheme):
    rng = np.random.default_rng(10)
    x = rng.standard_normal((20, 6))
    w = rng.standard_normal(6)
    g = build_generator(5, 4, points=[2])
    store = encode_store(x, g, "row")
    cluster = make_cluster([1, 1, 2, 2, 3])
    state = make_state(cluster, g, scheme=scheme)
    y, trace, _ = execute_step(state, store, w, cluster, step=0)
    assert trace.decode_ok
    assert np.linalg.norm(y - x @ w) <= 1e-9 * np.linalg.norm(x @ w)


def test_step_time_matches_optimal_time():
    from csec.loadopt import optimal_load_vector

    rng = np.random.default_rng(11)
    x = rng.standard_normal((300, 4))  # R = 100 rows per block
    w = rng.standard_normal(4)
    g = build_generator(5, 3, points=[1, 2])
    store = encode_store(x, g, "row")
    speeds = [1, 1, 2, 2, 3]
    cluster = make_cluster(speeds)
    # estimates equal to truth: assignment is the optimal one
    state = MasterState(
        speed_estimate={i + 1: float(s) for i, s in enumerate(speeds)},
        ema_weight=0.5, tolerance=0, generator=g, scheme="heterogeneous",
    )
    _, trace, _ = execute_step(state, store, w, cluster, step=0)
    c_star = optimal_load_vector(speeds, 3, 0).time
    # loads are rounded to whole local rows (R = 100), hence the loose bound
    assert trace.step_time == pytest.approx(c_star, rel=0.05)


def test_assignment_uses_estimates_not_true_speeds():
    rng = np.random.default_rng(12)
    x = rng.standard_normal((30, 4))
    w = rng.standard_normal(4)
    g = build_generator(5, 3, points=[1, 2])
    store = encode_store(x, g, "row")
    cluster = make_cluster([1, 1, 2, 2, 3])
    state = make_state(cluster, g, gamma=0.0)  # uniform estimates, frozen
    _, trace, _ = execute_step(state, store, w, cluster, step=0)
    loads = np.array([trace.loads[m] for m in sorted(trace.loads)])
    # uniform estimates must give (near-)uniform loads despite skewed truth
    assert loads.max() - loads.min() <= 1 / store.rows_per_shard + 1e-12


def test_uniform_estimates_match_homogeneous_loads():
    rng = np.random.default_rng(13)
    x = rng.standard_normal((99, 3))
    w = rng.standard_normal(3)
    g = build_generator(5, 3, points=[1, 2])
    store = encode_store(x, g, "row")
    cluster = make_cluster([1, 2, 3, 1, 2])
    het = make_state(cluster, g, scheme="heterogeneous", tolerance=1, gamma=0.0)
    _, trace, _ = execute_step(het, store, w, cluster, step=0)
    for load in trace.loads.values():
        assert load == pytest.approx(4 / 5, abs=1 / store.rows_per_shard)


def test_speed_estimates_converge_geometrically():
    rng = np.random.default_rng(14)
    x = rng.standard_normal((60, 4))
    w = rng.standard_normal(4)
    g = build_generator(5, 3, points=[1, 2])
    store = encode_store(x, g, "row")
    speeds = [0.7, 1.3, 2.2, 0.9, 3.1]
    cluster = make_cluster(speeds)
    state = make_state(cluster, g, gamma=0.5)
    for step in range(50):
        _, _, state = execute_step(state, store, w, cluster, step=step)
    truth = cluster.true_speeds()
    rel = max(abs(state.speed_estimate[m] - truth[m]) / truth[m] for m in truth)
    assert rel <= 1e-6


def test_straggler_tolerant_step_decodes_under_drops():
    rng = np.random.default_rng(15)
    x = rng.standard_normal((42, 5))
    w = rng.standard_normal(5)
    g = build_generator(6, 3, points=[1, 2, 3])
    store = encode_store(x, g, "row")
    cluster = make_cluster([1, 1, 2, 2, 3, 3])
    state = make_state(cluster, g, tolerance=2)
    for seed in range(30):
        cl = make_cluster([1, 1, 2, 2, 3, 3], seed=seed)
        y, trace, _ = execute_step(state, store, w, cl, step=seed,
                                   policy=StragglerPolicy.slowest(2))
        assert trace.decode_ok
        assert np.linalg.norm(y - x @ w) <= 1e-9 * np.linalg.norm(x @ w)


def test_decoded_value_agrees_across_straggler_choices():
    from itertools import combinations

    rng = np.random.default_rng(16)
    x = rng.standard_normal((30, 4))
    w = rng.standard_normal(4)
    g = build_generator(5, 3, points=[1, 2])
    store = encode_store(x, g, "row")
    cluster = make_cluster([1, 1, 2, 2, 3])
    state = make_state(cluster, g, tolerance=1)
    results = []
    for victim in cluster.machine_ids:
        y, trace, _ = execute_step(state, store, w, cluster, step=0,
                                   policy=StragglerPolicy.fixed([victim]))
        results.append(y)
        assert trace.decode_ok
    for y in results[1:]:
        assert np.linalg.norm(y - results[0]) <= 1e-9 * np.linalg.norm(results[0])


def test_undecodable_step_fails_with_trace():
    rng = np.random.default_rng(17)
    x = rng.standard_normal((12, 3))
    w = rng.standard_normal(3)
    g = build_generator(5, 3, points=[1, 2])
    store = encode_store(x, g, "row")
    cluster = make_cluster([1, 1, 2, 2, 3])
    # tolerance 0 but one machine forced out: some row set loses its L-th member
    state = make_state(cluster, g, tolerance=0, retry_on_failure=False)
    with pytest.raises(StepFailure) as exc:
        execute_step(state, store, w, cluster, step=0,
                     policy=StragglerPolicy.fixed([1]))
    assert exc.value.trace is not None
    assert not exc.value.trace.decode_ok


def test_infeasible_when_too_few_machines():
    rng = np.random.default_rng(18)
    x = rng.standard_normal((12, 3))
    w = rng.standard_normal(3)
    g = build_generator(4, 3, points=[1])
    store = encode_store(x, g, "row")
    cluster = make_cluster([1, 1, 1, 1], n_stable=4)
    state = make_state(cluster, g, tolerance=2)
    with pytest.raises(InfeasibleStep):
        execute_step(state, store, w, cluster, step=0)


def test_degrade_policy_shrinks_tolerance():
    rng = np.random.default_rng(19)
    x = rng.standard_normal((12, 3))
    w = rng.standard_normal(3)
    g = build_generator(4, 3, points=[1])
    store = encode_store(x, g, "row")
    cluster = make_cluster([1, 1, 1, 1], n_stable=4)
    state = make_state(cluster, g, tolerance=2, degrade=True)
    y, trace, _ = execute_step(state, store, w, cluster, step=0)
    assert trace.decode_ok
    assert np.linalg.norm(y - x @ w) <= 1e-9 * np.linalg.norm(x @ w)


def test_uncoded_scheme_requires_storage_machines():
    rng = np.random.default_rng(20)
    x = rng.standard_normal((12, 3))
    w = rng.standard_normal(3)
    g = build_generator(5, 3, points=[1, 2])
    store = encode_store(x, g, "row")
    cluster = make_cluster([1, 1, 1, 1, 1], n_stable=0, p=0.0, seed=0)
    state = make_state(cluster, g, scheme="uncoded")
    with pytest.raises(InfeasibleStep):
        execute_step(state, store, w, cluster, step=0)


def test_collect_and_decode_refuses_partial_coverage():
    from csec.assignment import fill_assignment

    g = build_generator(5, 3, points=[1, 2])
    asg = fill_assignment([1, 1, 2, 2, 2], 4, machines=[0, 1, 2, 3, 4])
    responses = {m: np.zeros(2) for m in range(5)}
    y, ok = collect_and_decode(responses, asg, g, (0, 1, 2, 3, 4), {0, 1})
    assert y is None and not ok


def test_runtime_wrapper_replays_identically():
    rng = np.random.default_rng(21)
    x = rng.standard_normal((30, 4))
    w = rng.standard_normal(4)
    g = build_generator(5, 3, points=[1, 2])
    store = encode_store(x, g, "row")

    def run():
        cluster = make_cluster([1, 1, 2, 2, 3], n_stable=3, p=0.5, seed=9)
        rt = CodedRuntime(make_state(cluster, g, tolerance=0), store, cluster)
        out = []
        for _ in range(5):
            y, trace = rt.matvec(w)
            out.append((y.tobytes(), trace.step_time, tuple(sorted(trace.available))))
        return out

    assert run() == run()
