"""Per-step orchestration of adaptive straggler-tolerant coded computing.

Each step the master: updates its speed estimates, learns the available set,
builds an assignment (from the estimates, never from true speeds), lets the
workers compute partial products, drops stragglers per policy, decodes each
row set from its first L responders, and feeds the measured speeds back into
the estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from csec.assignment import (
    Assignment,
    cyclic_assignment,
    fill_assignment,
    loads_to_row_counts,
    machine_rows,
)
from csec.cluster import SimulatedCluster, StragglerPolicy, select_responders, simulate_step_timing
from csec.coding import CodedStore, DecodeCache, GeneratorMatrix
from csec.loadopt import InfeasibleStragglerTolerance, optimal_load_vector

SCHEMES = ("uncoded", "homogeneous_cyclic", "heterogeneous")


class InfeasibleStep(RuntimeError):
    """Too few available machines for the requested tolerance."""


class StepFailure(RuntimeError):
    """A row set lost more than S machines and could not be decoded."""

    def __init__(self, message: str, trace: "StepTrace" = None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class MasterState:
    """Master-side knowledge carried across steps."""

    speed_estimate: dict            # machine id -> estimated speed
    ema_weight: float               # weight of the newest measurement
    tolerance: int                  # straggler tolerance S
    generator: GeneratorMatrix
    scheme: str = "heterogeneous"
    retry_on_failure: bool = True   # one retry with fresh availability
    degrade: bool = False           # shrink S when too few machines show up

    def __post_init__(self):
        if not 0.0 <= self.ema_weight <= 1.0:
            raise ValueError("ema_weight must lie in [0, 1]")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if any(v <= 0 for v in self.speed_estimate.values()):
            raise ValueError("speed estimates must be positive")


@dataclass(frozen=True)
class StepTrace:
    """Record of one executed step."""

    step: int
    scheme: str
    available: frozenset
    num_sets: int
    loads: dict
    responders: frozenset
    stragglers: frozenset
    step_time: float
    decode_ok: bool
    measured_speeds: dict
    assignment: Assignment = field(repr=False, default=None)


def update_speed_estimate(estimate: Mapping[int, float],
                          measured: Mapping[int, float],
                          gamma: float) -> dict:
    """EMA update; machines without a measurement keep their entry."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    out = dict(estimate)
    for m, nu in measured.items():
        out[m] = gamma * nu + (1.0 - gamma) * out[m]
    return out


def _build_assignment(state: MasterState, roster: list, tolerance: int,
                      total_rows: int) -> Assignment:
    l = state.generator.recovery_threshold
    if state.scheme == "uncoded":
        # the L storage machines replicate nothing: one full row set each
        return Assignment(
            row_sets=((0, total_rows),),
            machine_sets=(frozenset(roster),),
            machines=tuple(roster),
            total_rows=total_rows,
            width=l,
        )
    if state.scheme == "homogeneous_cyclic":
        return cyclic_assignment(len(roster), l, tolerance, total_rows, machines=roster)
    speeds = [state.speed_estimate[m] for m in roster]
    solution = optimal_load_vector(speeds, l, tolerance)
    counts = loads_to_row_counts(solution.loads, total_rows, l, tolerance)
    return fill_assignment(counts, l + tolerance, machines=roster)


def collect_and_decode(responses: Mapping[int, np.ndarray],
                       assignment: Assignment,
                       generator: GeneratorMatrix,
                       responder_order: tuple,
                       responders: set,
                       cache: DecodeCache | None = None,
                       generator_row: Mapping | None = None) -> tuple[np.ndarray, bool]:
    """Decode every row set from its first L responders.

    ``responses[m]`` is a length-R vector holding machine m's products at its
    assigned row indices (other entries are ignored).  ``generator_row`` maps
    machine id to its row of the generator (identity when ids already are
    0-based rows).  Returns the full decoded vector of length L * R and a
    flag; the vector is withheld (None) when any row set has fewer than L
    responders.
    """
    l = generator.recovery_threshold
    r = assignment.total_rows
    if cache is None:
        cache = DecodeCache(generator)
    if generator_row is None:
        generator_row = {m: m for m in assignment.machines}
    y = np.empty(l * r)
    for (a, b), p in zip(assignment.row_sets, assignment.machine_sets):
        chosen = [m for m in responder_order if m in p and m in responders][:l]
        if len(chosen) < l:
            return None, False
        rhs = np.vstack([responses[m][a:b] for m in chosen])
        block = cache.solve(tuple(generator_row[m] for m in chosen), rhs)
        for ell in range(l):
            y[ell * r + a:ell * r + b] = block[ell]
    return y, True


def execute_step(state: MasterState, store: CodedStore, w: np.ndarray,
                 cluster: SimulatedCluster, step: int,
                 policy: StragglerPolicy = StragglerPolicy.none(),
                 cache: DecodeCache | None = None):
    """Run one distributed product y = X w; returns (y, trace, new state)."""
    attempts = 2 if state.retry_on_failure else 1
    last_exc = None
    for attempt in range(attempts):
        try:
            return _execute_attempt(state, store, w, cluster, step, attempt, policy, cache)
        except StepFailure as exc:
            last_exc = exc
    raise last_exc


def _machine_position(cluster: SimulatedCluster) -> dict:
    return {m: i for i, m in enumerate(cluster.machine_ids)}


def _execute_attempt(state: MasterState, store: CodedStore, w, cluster, step,
                     attempt, policy, cache):
    generator = state.generator
    l = generator.recovery_threshold
    r = store.rows_per_shard
    available = cluster.available_set(step, salt=attempt)

    if state.scheme == "uncoded":
        roster = list(cluster.machine_ids[:l])
        missing = [m for m in roster if m not in available]
        if missing:
            raise InfeasibleStep(f"uncoded storage machines {missing} unavailable")
        tolerance = 0
        policy = StragglerPolicy.none()   # no redundancy: the master waits for all
    else:
        pos = _machine_position(cluster)
        roster = sorted(available, key=pos.get)
        tolerance = state.tolerance
        if len(roster) < l + tolerance:
            if state.degrade and len(roster) >= l:
                tolerance = len(roster) - l
            else:
                raise InfeasibleStep(
                    f"{len(roster)} available machines < L+S = {l + state.tolerance}"
                )

    assignment = _build_assignment(state, roster, tolerance, r)
    timing = simulate_step_timing(assignment, cluster.by_id, available)
    generator_row = _machine_position(cluster)  # profile order = generator row

    responses = {}
    for m in assignment.machines:
        rows = machine_rows(assignment, m)
        vec = np.empty(r)
        if len(rows):
            vec[rows] = store.shard(generator_row[m])[rows] @ w
        responses[m] = vec

    responders, step_time = select_responders(timing, policy, step=step)
    y_full, decode_ok = collect_and_decode(
        responses, assignment, generator, timing.responder_order, responders,
        cache, generator_row,
    )

    measured = {
        m: timing.loads[m] / timing.finish_times[m]
        for m in responders
        if timing.loads[m] > 0
    }
    new_state = replace(
        state,
        speed_estimate=update_speed_estimate(state.speed_estimate, measured,
                                             state.ema_weight),
    )
    trace = StepTrace(
        step=step,
        scheme=state.scheme,
        available=frozenset(available),
        num_sets=assignment.num_sets,
        loads=dict(timing.loads),
        responders=frozenset(responders),
        stragglers=frozenset(timing.finish_times) - frozenset(responders),
        step_time=step_time,
        decode_ok=decode_ok,
        measured_speeds=measured,
        assignment=assignment,
    )
    if not decode_ok:
        raise StepFailure(f"step {step}: some row set had fewer than L responders", trace)
    return y_full[: store.output_len], trace, new_state


class CodedRuntime:
    """Stateful wrapper: one coded store driven step by step.

    Successive :meth:`matvec` calls advance the step counter, so availability
    and straggler draws differ per call while remaining reproducible.
    """

    def __init__(self, state: MasterState, store: CodedStore,
                 cluster: SimulatedCluster,
                 policy: StragglerPolicy = StragglerPolicy.none(),
                 first_step: int = 0):
        self.state = state
        self.store = store
        self.cluster = cluster
        self.policy = policy
        self.next_step = first_step
        self.traces: list[StepTrace] = []
        self._cache = DecodeCache(state.generator)

    def matvec(self, w: np.ndarray) -> tuple[np.ndarray, StepTrace]:
        y, trace, self.state = execute_step(
            self.state, self.store, w, self.cluster, self.next_step,
            self.policy, self._cache,
        )
        self.next_step += 1
        self.traces.append(trace)
        return y, trace
