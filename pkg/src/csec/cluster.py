"""Deterministic simulated elastic cluster.

Machines have fixed true speeds and either stable (always available) or
elastic (available with probability p, sampled from a counter-based stream
keyed by seed, step and machine id).  Time is simulated logical time: a
machine with load fraction mu and speed s finishes at mu / s.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from csec.assignment import Assignment, induced_counts


@dataclass(frozen=True)
class MachineProfile:
    id: int
    true_speed: float
    elastic: bool = False
    p_available: float = 1.0

    def __post_init__(self):
        if self.true_speed <= 0:
            raise ValueError("true_speed must be positive")
        if not self.elastic and self.p_available != 1.0:
            raise ValueError("stable machines must have p_available = 1")
        if not 0.0 <= self.p_available <= 1.0:
            raise ValueError("p_available must lie in [0, 1]")


@dataclass(frozen=True)
class StepTiming:
    """Per-machine finish times and the resulting response order."""

    finish_times: dict        # machine id -> mu / true_speed
    responder_order: tuple    # machine ids, ascending finish time then id
    loads: dict               # machine id -> load fraction


@dataclass(frozen=True)
class StragglerPolicy:
    """Which assigned machines the master refuses to wait for."""

    kind: str = "none"        # none | slowest_k | fixed_set | random_k
    k: int = 0
    ids: frozenset = frozenset()
    seed: int = 0

    @classmethod
    def none(cls) -> "StragglerPolicy":
        return cls()

    @classmethod
    def slowest(cls, k: int) -> "StragglerPolicy":
        return cls(kind="slowest_k", k=k)

    @classmethod
    def fixed(cls, ids: Iterable[int]) -> "StragglerPolicy":
        return cls(kind="fixed_set", ids=frozenset(ids))

    @classmethod
    def random(cls, k: int, seed: int) -> "StragglerPolicy":
        return cls(kind="random_k", k=k, seed=seed)


def sample_available_set(profiles: Sequence[MachineProfile], step: int,
                         rng_seed: int, salt: int = 0) -> set:
    """Stable machines plus each elastic machine with its own probability.

    The draw for (seed, step, machine) is independent of every other draw
    and replays identically.  ``salt`` gives a fresh but still deterministic
    draw for the same step (used by retries).
    """
    if not profiles:
        raise ValueError("profiles must be non-empty")
    available = set()
    for p in profiles:
        if not p.elastic:
            available.add(p.id)
            continue
        u = np.random.default_rng([rng_seed, step, p.id, salt]).random()
        if u < p.p_available:
            available.add(p.id)
    return available


def simulate_step_timing(assignment: Assignment,
                         profiles: Mapping[int, MachineProfile],
                         available: set) -> StepTiming:
    """Finish time mu[n] / s[n] for every machine in the assignment."""
    missing = [m for m in assignment.machines if m not in available]
    if missing:
        raise ValueError(f"assignment references unavailable machines {missing}")
    counts = induced_counts(assignment)
    r = assignment.total_rows
    loads = {m: counts[m] / r for m in assignment.machines}
    finish = {m: loads[m] / profiles[m].true_speed for m in assignment.machines}
    order = tuple(sorted(finish, key=lambda m: (finish[m], m)))
    return StepTiming(finish_times=finish, responder_order=order, loads=loads)


def select_responders(timing: StepTiming, policy: StragglerPolicy,
                      step: int = 0) -> tuple[set, float]:
    """Apply the straggler policy; returns (responders, step time).

    The step time is the latest finish among responders.  Machines with zero
    load respond instantly and are never counted as stragglers.
    """
    loaded = [m for m in timing.responder_order if timing.loads[m] > 0]
    if policy.kind == "none":
        stragglers: set = set()
    elif policy.kind == "slowest_k":
        if policy.k > len(loaded):
            raise ValueError(f"cannot drop {policy.k} of {len(loaded)} loaded machines")
        stragglers = set(loaded[len(loaded) - policy.k:])
    elif policy.kind == "fixed_set":
        stragglers = set(policy.ids) & set(loaded)
    elif policy.kind == "random_k":
        if policy.k > len(loaded):
            raise ValueError(f"cannot drop {policy.k} of {len(loaded)} loaded machines")
        rng = np.random.default_rng([policy.seed, step])
        stragglers = set(rng.choice(loaded, size=policy.k, replace=False).tolist())
    else:
        raise ValueError(f"unknown policy kind {policy.kind!r}")

    responders = set(timing.finish_times) - stragglers
    step_time = max((timing.finish_times[m] for m in responders), default=0.0)
    return responders, step_time


@dataclass(frozen=True)
class SimulatedCluster:
    """Bundle of machine profiles and the availability seed."""

    profiles: tuple
    seed: int

    def __post_init__(self):
        ids = [p.id for p in self.profiles]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate machine ids")
        object.__setattr__(self, "profiles", tuple(self.profiles))

    @property
    def by_id(self) -> dict:
        return {p.id: p for p in self.profiles}

    @property
    def machine_ids(self) -> tuple:
        return tuple(p.id for p in self.profiles)

    def available_set(self, step: int, salt: int = 0) -> set:
        return sample_available_set(self.profiles, step, self.seed, salt)

    def true_speeds(self) -> dict:
        return {p.id: p.true_speed for p in self.profiles}
