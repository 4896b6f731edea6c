"""Optimal computation load vectors for straggler-tolerant elastic steps.

Given the speeds of the available machines, a recovery threshold L and a
straggler tolerance S, the optimal step finishes in time

    c* = (L + S - N_t + k*) / sum of the k* slowest speeds

where the k* slowest machines get load proportional to speed (c* * s[n]) and
the faster machines are saturated at load 1.  The load vector sums to L + S
so every row can be assigned to L + S distinct machines.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

# absolute slack when evaluating the threshold inequalities, to avoid
# boundary flapping when several machines share the critical speed
SLACK = 1e-12


class InfeasibleStragglerTolerance(ValueError):
    """Fewer available machines than L + S."""


@dataclass(frozen=True)
class LoadSolution:
    """Optimal loads (original machine order), step time and threshold index."""

    loads: np.ndarray
    time: float
    threshold_index: int

    def __post_init__(self):
        object.__setattr__(self, "loads", np.asarray(self.loads, dtype=float))


def _check_feasible(n_avail: int, l: int, s: int) -> None:
    if l < 1 or s < 0:
        raise ValueError(f"need L >= 1 and S >= 0, got L={l}, S={s}")
    if n_avail < l + s:
        raise InfeasibleStragglerTolerance(
            f"{n_avail} machines cannot give each row {l + s} distinct assignees"
        )


def optimal_load_vector(speeds: Sequence[float], recovery_threshold: int,
                        straggler_tolerance: int) -> LoadSolution:
    """Minimize the step time subject to total load L + S and loads <= 1."""
    s_vec = np.asarray(speeds, dtype=float)
    if s_vec.ndim != 1 or len(s_vec) == 0 or np.any(s_vec <= 0):
        raise ValueError("speeds must be a non-empty vector of positive reals")
    n = len(s_vec)
    l, tol = recovery_threshold, straggler_tolerance
    _check_feasible(n, l, tol)

    order = np.argsort(s_vec, kind="stable")  # ascending, ties keep original order
    s_sorted = s_vec[order]
    prefix = np.cumsum(s_sorted)

    target = l + tol
    k_star, c_star = None, None
    for k in range(n, 0, -1):
        numer = target - n + k
        if numer <= 0:
            break
        c = numer / prefix[k - 1]
        upper = 1.0 / s_sorted[k - 1]
        lower = 1.0 / s_sorted[k] if k < n else 0.0
        if c <= upper + SLACK and lower < c + SLACK:
            k_star, c_star = k, c
            break
    if k_star is None:  # pragma: no cover - unreachable for feasible inputs
        raise RuntimeError("no threshold index found; speeds malformed?")

    mu_sorted = np.ones(n)
    mu_sorted[:k_star] = np.minimum(1.0, c_star * s_sorted[:k_star])
    loads = np.empty(n)
    loads[order] = mu_sorted
    return LoadSolution(loads=loads, time=c_star, threshold_index=k_star)


def homogeneous_optimal_time(speeds: Sequence[float], recovery_threshold: int,
                             straggler_tolerance: int) -> float:
    """Step time of the equal-load cyclic design: (L+S)/N_t / min speed."""
    s_vec = np.asarray(speeds, dtype=float)
    _check_feasible(len(s_vec), recovery_threshold, straggler_tolerance)
    return (recovery_threshold + straggler_tolerance) / len(s_vec) / float(np.min(s_vec))


def min_time_oracle(speeds: Sequence[float], recovery_threshold: int,
                    straggler_tolerance: int, tol: float = 1e-12) -> float:
    """Independent bisection solver for the minimal feasible step time.

    A time c is feasible iff sum_n min(1, c * s[n]) >= L + S: capping each
    machine's load at both 1 and c * s[n] must still cover L + S cs-matrices
    worth of rows.  Used in tests to validate :func:`optimal_load_vector`.
    """
    s_vec = np.asarray(speeds, dtype=float)
    _check_feasible(len(s_vec), recovery_threshold, straggler_tolerance)
    if tol <= 0:
        raise ValueError("tol must be positive")
    target = recovery_threshold + straggler_tolerance

    def feasible(c: float) -> bool:
        return float(np.sum(np.minimum(1.0, c * s_vec))) >= target

    lo, hi = 0.0, 1.0 / float(np.min(s_vec))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi
