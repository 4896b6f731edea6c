"""Turn load vectors into concrete row-set / machine-set assignments.

An assignment splits the R local rows into F disjoint contiguous intervals
and gives each interval to exactly ``width`` = L + S machines, so any S
stragglers leave at least L responses per row.  Row indices are 0-based and
intervals are half-open [start, end).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from csec.loadopt import InfeasibleStragglerTolerance


class InfeasibleCounts(ValueError):
    """Row counts that no width-wide assignment can realize."""


@dataclass(frozen=True)
class Assignment:
    """F row intervals, each assigned to a set of ``width`` machines."""

    row_sets: tuple          # ((start, end), ...) half-open, disjoint, covering [0, R)
    machine_sets: tuple      # (frozenset of machine ids, ...) parallel to row_sets
    machines: tuple          # the machine universe, in assignment order
    total_rows: int
    width: int

    @property
    def num_sets(self) -> int:
        return len(self.row_sets)

    def to_json(self) -> str:
        doc = [
            {"rows": [a, b], "machines": sorted(p)}
            for (a, b), p in zip(self.row_sets, self.machine_sets)
        ]
        return json.dumps(
            {"total_rows": self.total_rows, "width": self.width,
             "machines": list(self.machines), "sets": doc},
            indent=2, sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Assignment":
        doc = json.loads(text)
        return cls(
            row_sets=tuple((a, b) for a, b in (s["rows"] for s in doc["sets"])),
            machine_sets=tuple(frozenset(s["machines"]) for s in doc["sets"]),
            machines=tuple(doc["machines"]),
            total_rows=doc["total_rows"],
            width=doc["width"],
        )


def loads_to_row_counts(loads: Sequence[float], total_rows: int,
                        recovery_threshold: int, straggler_tolerance: int) -> list[int]:
    """Round fractional loads to integer row counts by largest remainder.

    Preserves the total (L + S) * R exactly; ties go to the lower machine
    index; no count exceeds R.
    """
    mu = np.asarray(loads, dtype=float)
    r = int(total_rows)
    width = recovery_threshold + straggler_tolerance
    if r < 1:
        raise ValueError("total_rows must be >= 1")
    if np.any(mu > 1.0 + 1e-9) or np.any(mu < -1e-12):
        raise ValueError("loads must lie in [0, 1]")
    if abs(float(mu.sum()) - width) > 1e-9:
        raise ValueError(f"loads must sum to L+S={width}, got {mu.sum()}")

    exact = np.minimum(mu, 1.0) * r
    base = np.floor(exact + 1e-9).astype(int)
    deficit = width * r - int(base.sum())
    remainders = exact - base
    # largest remainder first, lower index breaks ties; skip saturated machines
    order = sorted(range(len(mu)), key=lambda n: (-remainders[n], n))
    counts = base.copy()
    for n in order:
        if deficit == 0:
            break
        if counts[n] < r:
            counts[n] += 1
            deficit -= 1
    if deficit != 0:  # pragma: no cover - impossible for valid loads
        raise InfeasibleCounts("could not distribute remainder rows")
    return counts.tolist()


def fill_assignment(counts: Sequence[int], width: int,
                    machines: Sequence | None = None) -> Assignment:
    """Build an assignment realizing exact per-machine row counts.

    Iterative filling: repeatedly give the next batch of unassigned rows to
    the ``width`` machines with the largest remaining counts.  The batch size
    is capped so that after it, the machines outside the selection can still
    be scheduled (no remaining count may exceed the remaining rows).
    """
    counts = [int(c) for c in counts]
    if machines is None:
        machines = list(range(1, len(counts) + 1))
    machines = list(machines)
    if len(machines) != len(counts):
        raise ValueError("machines and counts must align")
    if len(counts) < width:
        raise InfeasibleCounts(f"need at least {width} machines, got {len(counts)}")
    if min(counts) < 0:
        raise InfeasibleCounts("negative count")
    total = sum(counts)
    if total % width != 0:
        raise InfeasibleCounts(f"total count {total} not divisible by width {width}")
    r = total // width
    if max(counts) > r:
        raise InfeasibleCounts(f"count {max(counts)} exceeds total rows {r}")

    remaining = list(counts)
    rows_left = r
    next_row = 0
    row_sets, machine_sets = [], []
    while rows_left > 0:
        by_count = sorted(range(len(remaining)), key=lambda n: (-remaining[n], n))
        selected = by_count[:width]
        m_last = remaining[selected[-1]]
        m_next = remaining[by_count[width]] if len(by_count) > width else 0
        beta = min(m_last, rows_left - m_next)
        if beta <= 0:  # pragma: no cover - guarded by the preconditions
            raise InfeasibleCounts("filling stalled; counts infeasible")
        row_sets.append((next_row, next_row + beta))
        machine_sets.append(frozenset(machines[n] for n in selected))
        for n in selected:
            remaining[n] -= beta
        next_row += beta
        rows_left -= beta

    return Assignment(
        row_sets=tuple(row_sets),
        machine_sets=tuple(machine_sets),
        machines=tuple(machines),
        total_rows=r,
        width=width,
    )


def cyclic_assignment(n_available: int, recovery_threshold: int,
                      straggler_tolerance: int, total_rows: int,
                      machines: Sequence | None = None) -> Assignment:
    """Equal-interval cyclic design: set i goes to machines i..i+L+S-1 (wrapped).

    Produces N_t row sets; when N_t does not divide R the first R mod N_t
    sets get one extra row.
    """
    n = int(n_available)
    width = recovery_threshold + straggler_tolerance
    if n < width:
        raise InfeasibleStragglerTolerance(
            f"{n} machines cannot give each row {width} distinct assignees"
        )
    if machines is None:
        machines = list(range(1, n + 1))
    machines = list(machines)
    if len(machines) != n:
        raise ValueError("machines must have n_available entries")

    r = int(total_rows)
    base, extra = divmod(r, n)
    row_sets, machine_sets = [], []
    start = 0
    for i in range(n):
        size = base + (1 if i < extra else 0)
        row_sets.append((start, start + size))
        machine_sets.append(frozenset(machines[(i + j) % n] for j in range(width)))
        start += size
    return Assignment(
        row_sets=tuple(row_sets),
        machine_sets=tuple(machine_sets),
        machines=tuple(machines),
        total_rows=r,
        width=width,
    )


def machine_rows(assignment: Assignment, machine) -> np.ndarray:
    """Sorted row indices the machine computes (union of its intervals)."""
    if machine not in assignment.machines:
        raise KeyError(f"machine {machine!r} not in assignment")
    pieces = [
        np.arange(a, b)
        for (a, b), p in zip(assignment.row_sets, assignment.machine_sets)
        if machine in p
    ]
    if not pieces:
        return np.empty(0, dtype=int)
    return np.concatenate(pieces)


def induced_counts(assignment: Assignment) -> dict:
    """Rows per machine implied by the assignment."""
    totals = {m: 0 for m in assignment.machines}
    for (a, b), p in zip(assignment.row_sets, assignment.machine_sets):
        for m in p:
            totals[m] += b - a
    return totals
