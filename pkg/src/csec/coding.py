"""MDS generator matrices, coded storage and master-side decoding.

A data matrix X (q x r) is split row-wise into L blocks X_1..X_L.  Machine n
stores the coded sub-matrix (cs-matrix) sum_l G[n, l] * X_l of shape
(q/L) x r.  Any L machine responses for a given local row index i can be
solved for the L values X_l[i] . w, which are entries of y = X w.

Machine indices are 0-based rows of the generator matrix.
"""

from __future__ import annotations

import io
import struct
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from itertools import combinations
from scipy.linalg import lu_factor, lu_solve

MAGIC = b"CSEC"
FORMAT_VERSION = 1

# min singular value of an L x L sub-generator must exceed this fraction of
# the largest for the submatrix to count as invertible
MDS_CONDITIONING_FLOOR = 1e-8

DEFAULT_MINOR_BUDGET = 100_000


class CodingError(ValueError):
    """Invalid code parameters, shapes or undecodable responses."""


@dataclass(frozen=True)
class GeneratorMatrix:
    """N x L real generator matrix of an MDS code."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2:
            raise CodingError("generator must be a 2-D matrix")
        n, l = entries.shape
        if l < 1 or n < l:
            raise CodingError(f"need N >= L >= 1, got N={n}, L={l}")
        object.__setattr__(self, "entries", entries)

    @property
    def n_machines(self) -> int:
        return self.entries.shape[0]

    @property
    def recovery_threshold(self) -> int:
        return self.entries.shape[1]


def build_generator(
    n_machines: int,
    recovery_threshold: int,
    kind: str = "systematic_vandermonde",
    points: Sequence[float] | None = None,
    seed: int | None = None,
) -> GeneratorMatrix:
    """Build an N x L generator matrix.

    ``systematic_vandermonde``: identity in the first L rows, parity row j is
    [1, a_j, a_j^2, ...] for evaluation point a_j.  ``points`` defaults to
    1, 2, ..., N-L.  ``random_gaussian``: i.i.d. standard normal entries,
    deterministic in ``seed``.
    """
    n, l = n_machines, recovery_threshold
    if l < 1 or n < l:
        raise CodingError(f"need N >= L >= 1, got N={n}, L={l}")

    if kind == "systematic_vandermonde":
        if points is None:
            points = list(range(1, n - l + 1))
        points = [float(p) for p in points]
        if len(points) != n - l:
            raise CodingError(f"need exactly {n - l} evaluation points, got {len(points)}")
        if len(set(points)) != len(points):
            raise CodingError("duplicate evaluation points break the MDS property")
        entries = np.zeros((n, l))
        entries[:l, :l] = np.eye(l)
        for j, a in enumerate(points):
            entries[l + j] = a ** np.arange(l)
        # a parity row coinciding with a systematic row (e.g. point 0, or any
        # point when L = 1) makes two rows identical
        for j in range(l, n):
            if any(np.array_equal(entries[j], entries[i]) for i in range(j)):
                raise CodingError(f"evaluation point {points[j - l]} duplicates an earlier row")
        return GeneratorMatrix(entries)

    if kind == "random_gaussian":
        rng = np.random.default_rng(seed)
        return GeneratorMatrix(rng.standard_normal((n, l)))

    raise CodingError(f"unknown generator kind {kind!r}")


@dataclass(frozen=True)
class CodedStore:
    """The N coded sub-matrices held by the machines.

    Row orientation codes the row blocks of X; column orientation codes the
    row blocks of X^T (so distributed products compute X^T z).  ``shards[n]``
    has shape (padded_rows / L) x width.
    """

    generator: GeneratorMatrix
    orientation: str
    shards: tuple
    coded_rows: int     # rows of the (possibly padded) matrix being coded
    output_len: int     # length of the decoded product, before padding removal

    @property
    def rows_per_shard(self) -> int:
        return self.shards[0].shape[0]

    def shard(self, machine: int) -> np.ndarray:
        return self.shards[machine]


def _split_blocks(m: np.ndarray, l: int, pad: bool) -> list[np.ndarray]:
    q = m.shape[0]
    if q % l != 0:
        if not pad:
            raise CodingError(f"{q} rows not divisible by L={l} and padding disabled")
        extra = l - q % l
        m = np.vstack([m, np.zeros((extra, m.shape[1]))])
    block = m.shape[0] // l
    return [m[i * block:(i + 1) * block] for i in range(l)]


def encode_store(
    x: np.ndarray,
    generator: GeneratorMatrix,
    orientation: str = "row",
    pad: bool = False,
) -> CodedStore:
    """Encode X into one cs-matrix per machine."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise CodingError("data matrix must be 2-D")
    if orientation == "row":
        coded = x
    elif orientation == "column":
        coded = x.T.copy()
    else:
        raise CodingError(f"unknown orientation {orientation!r}")

    blocks = _split_blocks(coded, generator.recovery_threshold, pad)
    stacked = np.stack(blocks)  # L x (rows/L) x width
    shards = np.einsum("nl,lij->nij", generator.entries, stacked)
    return CodedStore(
        generator=generator,
        orientation=orientation,
        shards=tuple(shards[n] for n in range(generator.n_machines)),
        coded_rows=blocks[0].shape[0] * len(blocks),
        output_len=coded.shape[0],
    )


class DecodeCache:
    """LU factorizations of L x L sub-generators, keyed by responder tuple."""

    def __init__(self, generator: GeneratorMatrix):
        self.generator = generator
        self._lock = threading.Lock()
        self._cache: dict[tuple, tuple] = {}

    def factorization(self, machines: tuple[int, ...]):
        with self._lock:
            fac = self._cache.get(machines)
        if fac is None:
            sub = self.generator.entries[list(machines)]
            try:
                fac = lu_factor(sub)
            except np.linalg.LinAlgError as exc:  # pragma: no cover
                raise CodingError(f"singular sub-generator for machines {machines}") from exc
            with self._lock:
                self._cache[machines] = fac
        return fac

    def solve(self, machines: tuple[int, ...], rhs: np.ndarray) -> np.ndarray:
        return lu_solve(self.factorization(machines), rhs)


def decode_rows(
    row_index: int,
    responses: Mapping[int, float],
    generator: GeneratorMatrix,
    cache: DecodeCache | None = None,
) -> np.ndarray:
    """Solve one local row's responses for the L block values.

    ``responses`` maps machine -> cs-matrix row ``row_index`` dotted with w.
    Returns u with u[l] = X_l[row_index] . w.  The first L responding
    machines (ascending id) are used.
    """
    l = generator.recovery_threshold
    if len(responses) < l:
        raise CodingError(f"need at least L={l} responses, got {len(responses)}")
    machines = tuple(sorted(responses))[:l]
    rhs = np.array([responses[m] for m in machines])
    if cache is not None:
        return cache.solve(machines, rhs)
    sub = generator.entries[list(machines)]
    return np.linalg.solve(sub, rhs)


def _submatrix_ok(sub: np.ndarray) -> bool:
    sv = np.linalg.svd(sub, compute_uv=False)
    return sv[-1] > MDS_CONDITIONING_FLOOR * sv[0]


def is_mds(
    generator: GeneratorMatrix,
    mode: str = "exhaustive",
    seed: int | None = None,
    trials: int = 200,
    budget: int = DEFAULT_MINOR_BUDGET,
) -> bool:
    """Check that (every | a sample of) L-row submatrices are invertible."""
    n, l = generator.n_machines, generator.recovery_threshold
    entries = generator.entries
    if mode == "exhaustive":
        from math import comb

        if comb(n, l) > budget:
            raise CodingError(
                f"C({n},{l}) exceeds the exhaustive budget {budget}; use sampled mode"
            )
        return all(_submatrix_ok(entries[list(c)]) for c in combinations(range(n), l))
    if mode == "sampled":
        rng = np.random.default_rng(seed)
        for _ in range(trials):
            rows = rng.choice(n, size=l, replace=False)
            if not _submatrix_ok(entries[rows]):
                return False
        return True
    raise CodingError(f"unknown mode {mode!r}")


# --- dense matrix files -----------------------------------------------------

def save_dense(path, x: np.ndarray) -> None:
    """Write a matrix in the dense binary format (CSEC magic, f64 LE payload)."""
    x = np.ascontiguousarray(x, dtype="<f8")
    if x.ndim != 2:
        raise CodingError("only 2-D matrices are supported")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<QQ", x.shape[0], x.shape[1]))
        fh.write(x.tobytes())


def load_dense(path) -> np.ndarray:
    """Read a matrix written by :func:`save_dense`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise CodingError(f"bad magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise CodingError(f"unsupported version {version}")
        q, r = struct.unpack("<QQ", fh.read(16))
        payload = fh.read(8 * q * r)
        if len(payload) != 8 * q * r:
            raise CodingError("truncated payload")
        return np.frombuffer(payload, dtype="<f8").reshape(q, r).copy()


def load_csv(path) -> np.ndarray:
    """Read a headerless CSV of reals, one matrix row per line."""
    x = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    return x
