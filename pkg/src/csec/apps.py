"""Iterative applications driven by coded matrix-vector products.

Power iteration (dominant eigenpair of a symmetric matrix) and gradient
descent for linear regression.  Both consume :class:`CodedRuntime` objects,
so all products run through the simulated elastic cluster.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from csec.runtime import CodedRuntime, StepTrace


class BreakdownError(RuntimeError):
    """The iteration produced a zero vector and cannot continue."""


class DivergedError(RuntimeError):
    """The objective grew for several consecutive iterations."""


@dataclass(frozen=True)
class IterateRecord:
    iteration: int
    error: float
    cum_time: float
    step_times: tuple
    n_available: int
    n_stragglers: int


@dataclass(frozen=True)
class PowerIterationResult:
    eigenvalue: float
    eigenvector: np.ndarray
    trace: tuple


@dataclass(frozen=True)
class RegressionResult:
    coefficients: np.ndarray
    trace: tuple


def _sign_aligned_mse(b: np.ndarray, reference: np.ndarray) -> float:
    """Normalized MSE to the reference vector, minimized over sign."""
    ref_norm = float(np.dot(reference, reference))
    plus = float(np.dot(b - reference, b - reference))
    minus = float(np.dot(b + reference, b + reference))
    return min(plus, minus) / ref_norm


def power_iteration(rt: CodedRuntime, b0: np.ndarray, iterations: int,
                    reference_vector: np.ndarray | None = None) -> PowerIterationResult:
    """b <- X b / ||X b||, every product through the coded runtime."""
    b = np.asarray(b0, dtype=float)
    norm = np.linalg.norm(b)
    if norm == 0:
        raise BreakdownError("b0 must be nonzero")
    b = b / norm

    records = []
    cum_time = 0.0
    for k in range(iterations):
        y, trace = rt.matvec(b)
        norm = np.linalg.norm(y)
        if norm == 0:
            raise BreakdownError(f"X b vanished at iteration {k}")
        b = y / norm
        cum_time += trace.step_time
        err = _sign_aligned_mse(b, reference_vector) if reference_vector is not None else np.nan
        records.append(IterateRecord(
            iteration=k,
            error=err,
            cum_time=cum_time,
            step_times=(trace.step_time,),
            n_available=len(trace.available),
            n_stragglers=len(trace.stragglers),
        ))

    # Rayleigh quotient via one extra coded product
    y, _ = rt.matvec(b)
    eigenvalue = float(b @ y)
    return PowerIterationResult(eigenvalue=eigenvalue, eigenvector=b, trace=tuple(records))


def default_step_size(x: np.ndarray, warmup_steps: int = 20) -> float:
    """1 / (power-iteration estimate of the largest eigenvalue of X^T X)."""
    x = np.asarray(x, dtype=float)
    gram_vec = lambda v: x.T @ (x @ v)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(x.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(warmup_steps):
        w = gram_vec(v)
        norm = np.linalg.norm(w)
        if norm == 0:
            return 1.0
        v = w / norm
    lam = float(v @ gram_vec(v))
    return 1.0 / lam


def linear_regression_gd(rt_row: CodedRuntime, rt_col: CodedRuntime,
                         y: np.ndarray, step_size: float, iterations: int,
                         b0: np.ndarray,
                         divergence_patience: int = 5) -> RegressionResult:
    """Gradient descent on ||X b - y||^2 with both products coded.

    rt_row computes X b (row-coded store); rt_col computes X^T z
    (column-coded store).  Error metric per iterate: ||X b - y||^2 / ||y||^2.
    """
    if step_size <= 0:
        raise ValueError("step_size must be positive")
    y = np.asarray(y, dtype=float)
    b = np.asarray(b0, dtype=float)
    y_norm2 = float(y @ y)
    if y_norm2 == 0:
        raise ValueError("y must be nonzero")

    records = []
    cum_time = 0.0
    prev_obj = np.inf
    growth_streak = 0
    for k in range(iterations):
        xb, trace_row = rt_row.matvec(b)
        z = xb - y
        grad, trace_col = rt_col.matvec(z)
        b = b - step_size * grad
        cum_time += trace_row.step_time + trace_col.step_time

        obj = float(z @ z) / y_norm2
        if obj > prev_obj:
            growth_streak += 1
            if growth_streak >= divergence_patience:
                raise DivergedError(
                    f"objective grew for {growth_streak} consecutive iterations"
                )
        else:
            growth_streak = 0
        prev_obj = obj
        records.append(IterateRecord(
            iteration=k,
            error=obj,
            cum_time=cum_time,
            step_times=(trace_row.step_time, trace_col.step_time),
            n_available=len(trace_row.available),
            n_stragglers=len(trace_row.stragglers) + len(trace_col.stragglers),
        ))
    return RegressionResult(coefficients=b, trace=tuple(records))
