"""Experiment harness: scheme comparisons over the simulated cluster.

One trace CSV per scheme, with fixed columns and 12-significant-digit reals
so identical config + seed gives byte-identical files.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from csec import apps
from csec.cluster import MachineProfile, SimulatedCluster
from csec.coding import GeneratorMatrix, build_generator, encode_store, load_csv, load_dense
from csec.config import ExperimentConfig, SchemeConfig
from csec.loadopt import homogeneous_optimal_time, optimal_load_vector
from csec.presets import SPEED_PRESETS, speed_preset
from csec.runtime import CodedRuntime, MasterState

TRACE_COLUMNS = (
    "scheme", "step", "iteration", "n_available", "n_stragglers",
    "step_time", "cum_time", "error_metric", "decode_ok",
)

# use the small-integer Vandermonde generator only while its minors stay
# well conditioned; beyond that, fall back to a seeded Gaussian generator
VANDERMONDE_PARITY_LIMIT = 4


@dataclass(frozen=True)
class TraceRow:
    scheme: str
    step: int
    iteration: int
    n_available: int
    n_stragglers: int
    step_time: float
    cum_time: float
    error_metric: float
    decode_ok: bool

    def as_csv(self) -> str:
        return ",".join([
            self.scheme,
            str(self.step),
            str(self.iteration),
            str(self.n_available),
            str(self.n_stragglers),
            f"{self.step_time:.12g}",
            f"{self.cum_time:.12g}",
            f"{self.error_metric:.12g}",
            "true" if self.decode_ok else "false",
        ])


def scheme_seed(base_seed: int, scheme_name: str) -> int:
    """Stable per-scheme availability seed derived from the config seed."""
    digest = hashlib.sha256(f"{base_seed}:{scheme_name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def build_profiles(speeds, n_stable: int, p_available: float) -> tuple:
    """Machine ids 1..N; the first n_stable are stable, the rest elastic."""
    profiles = []
    for i, s in enumerate(speeds):
        stable = i < n_stable
        profiles.append(MachineProfile(
            id=i + 1,
            true_speed=float(s),
            elastic=not stable,
            p_available=1.0 if stable else p_available,
        ))
    return tuple(profiles)


def build_experiment_generator(n_machines: int, recovery_threshold: int,
                               kind: str, seed: int) -> GeneratorMatrix:
    if kind == "auto":
        kind = ("systematic_vandermonde"
                if n_machines - recovery_threshold <= VANDERMONDE_PARITY_LIMIT
                else "random_gaussian")
    if kind == "systematic_vandermonde":
        return build_generator(n_machines, recovery_threshold, kind)
    return build_generator(n_machines, recovery_threshold, "random_gaussian",
                           seed=seed)


def generate_matrix(cfg: ExperimentConfig):
    """Return (X, y_labels); y_labels is None except for regression data."""
    m = cfg.matrix
    if m.kind == "dense_file":
        return load_dense(m.path), None
    if m.kind == "csv_file":
        return load_csv(m.path), None
    rng = np.random.default_rng([cfg.seed, 1])
    if m.kind == "random_symmetric":
        a = rng.standard_normal((m.rows, m.rows))
        return (a + a.T) / np.sqrt(2.0 * m.rows), None
    # random_regression: Gaussian design, noisy linear labels
    x = rng.standard_normal((m.rows, m.cols))
    b_true = rng.standard_normal(m.cols)
    y = x @ b_true + m.noise * rng.standard_normal(m.rows)
    return x, y


def reference_eigenvector(x: np.ndarray) -> tuple[float, np.ndarray]:
    """Dominant eigenpair (by magnitude) via a dense symmetric eigensolve."""
    vals, vecs = np.linalg.eigh(x)
    i = int(np.argmax(np.abs(vals)))
    return float(vals[i]), vecs[:, i]


def reference_least_squares(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.linalg.lstsq(x, y, rcond=None)[0]


def _runtime_for(cfg: ExperimentConfig, scheme: SchemeConfig,
                 generator: GeneratorMatrix, store, cluster) -> CodedRuntime:
    runtime_scheme = {
        "uncoded": "uncoded",
        "homogeneous": "homogeneous_cyclic",
        "heterogeneous": "heterogeneous",
    }[scheme.kind]
    state = MasterState(
        speed_estimate={m: cfg.initial_speed_estimate for m in cluster.machine_ids},
        ema_weight=cfg.gamma,
        tolerance=scheme.straggler_tolerance,
        generator=generator,
        scheme=runtime_scheme,
    )
    return CodedRuntime(state, store, cluster, policy=scheme.policy)


def _power_rows(scheme: SchemeConfig, rt: CodedRuntime, records) -> list[TraceRow]:
    errors = [rec.error for rec in records]
    rows, cum = [], 0.0
    for ordinal, trace in enumerate(rt.traces):
        iteration = min(ordinal, len(errors) - 1)
        cum += trace.step_time
        rows.append(TraceRow(
            scheme=scheme.name, step=ordinal, iteration=iteration,
            n_available=len(trace.available), n_stragglers=len(trace.stragglers),
            step_time=trace.step_time, cum_time=cum,
            error_metric=errors[iteration], decode_ok=trace.decode_ok,
        ))
    return rows


def _linreg_rows(scheme: SchemeConfig, rt_row: CodedRuntime, rt_col: CodedRuntime,
                 records) -> list[TraceRow]:
    rows, cum, ordinal = [], 0.0, 0
    for rec, t_row, t_col in zip(records, rt_row.traces, rt_col.traces):
        for trace in (t_row, t_col):
            cum += trace.step_time
            rows.append(TraceRow(
                scheme=scheme.name, step=ordinal, iteration=rec.iteration,
                n_available=len(trace.available),
                n_stragglers=len(trace.stragglers),
                step_time=trace.step_time, cum_time=cum,
                error_metric=rec.error, decode_ok=trace.decode_ok,
            ))
            ordinal += 1
    return rows


def run_scheme(cfg: ExperimentConfig, scheme: SchemeConfig, x: np.ndarray,
               labels, generator: GeneratorMatrix) -> list[TraceRow]:
    """Run one scheme for the configured number of iterations."""
    profiles = build_profiles(cfg.machines.speeds, cfg.machines.n_stable,
                              cfg.machines.p_available)
    cluster = SimulatedCluster(profiles, seed=scheme_seed(cfg.seed, scheme.name))
    if cfg.iterations == 0:
        return []

    if cfg.app == "power_iteration":
        store = encode_store(x, generator, orientation="row", pad=True)
        rt = _runtime_for(cfg, scheme, generator, store, cluster)
        _, ref_vec = reference_eigenvector(x)
        b0 = np.ones(x.shape[1])
        result = apps.power_iteration(rt, b0, cfg.iterations,
                                      reference_vector=ref_vec)
        return _power_rows(scheme, rt, result.trace)

    row_store = encode_store(x, generator, orientation="row", pad=True)
    col_store = encode_store(x, generator, orientation="column", pad=True)
    rt_row = _runtime_for(cfg, scheme, generator, row_store, cluster)
    rt_col = _runtime_for(cfg, scheme, generator, col_store, cluster)
    eta = cfg.step_size if cfg.step_size is not None else apps.default_step_size(x)
    result = apps.linear_regression_gd(rt_row, rt_col, labels, eta,
                                       cfg.iterations, b0=np.zeros(x.shape[1]))
    return _linreg_rows(scheme, rt_row, rt_col, result.trace)


def write_trace(path: Path, rows: list[TraceRow]) -> None:
    lines = [",".join(TRACE_COLUMNS)] + [row.as_csv() for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def run_experiment(cfg: ExperimentConfig, output_dir=None) -> list[Path]:
    """Run every configured scheme; returns the written trace files."""
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    x, labels = generate_matrix(cfg)
    if cfg.app == "linreg" and labels is None:
        labels = x @ np.ones(x.shape[1])  # file-backed matrix: synthetic labels
    n_machines = len(cfg.machines.speeds)
    generator = build_experiment_generator(
        n_machines, cfg.recovery_threshold, cfg.generator_kind, seed=cfg.seed,
    )

    written = []
    all_rows = {}
    for scheme in cfg.schemes:
        rows = run_scheme(cfg, scheme, x, labels, generator)
        path = out / f"{cfg.app}_{scheme.name}.csv"
        write_trace(path, rows)
        written.append(path)
        all_rows[scheme.name] = rows

    if cfg.plots:
        from csec.plots import render_convergence_figure

        fig_path = out / f"{cfg.app}.png"
        render_convergence_figure(all_rows, cfg.app, fig_path)
        written.append(fig_path)
    return written


def analyze_speeds(speeds, recovery_threshold: int, s_values) -> list[dict]:
    """Step-time comparison across straggler tolerances for a speed roster."""
    s_vec = list(speeds)
    n = len(s_vec)
    l = recovery_threshold
    rows = []
    for s in s_values:
        row = {"S": s}
        if s > n - l:
            row["feasible"] = False
            rows.append(row)
            continue
        solution = optimal_load_vector(s_vec, l, s)
        row["feasible"] = True
        row["heterogeneous_time"] = solution.time
        row["threshold_index"] = solution.threshold_index
        row["homogeneous_time"] = homogeneous_optimal_time(s_vec, l, s)
        row["uncoded_time"] = 1.0 / min(s_vec[:l])
        row["het_over_hom"] = row["heterogeneous_time"] / row["homogeneous_time"]
        row["het_over_uncoded"] = row["heterogeneous_time"] / row["uncoded_time"]
        rows.append(row)
    return rows


def format_analysis(rows: list[dict], speeds, recovery_threshold: int) -> str:
    lines = [
        f"machines: {len(list(speeds))}  recovery threshold L: {recovery_threshold}",
        "S  feasible  het_time      k*  hom_time      uncoded_time  het/hom   het/uncoded",
    ]
    for row in rows:
        if not row["feasible"]:
            lines.append(f"{row['S']:<2} infeasible")
            continue
        lines.append(
            f"{row['S']:<2} yes       "
            f"{row['heterogeneous_time']:<12.10g}  {row['threshold_index']:<2}  "
            f"{row['homogeneous_time']:<12.10g}  {row['uncoded_time']:<12.10g}  "
            f"{row['het_over_hom']:<8.6g}  {row['het_over_uncoded']:<8.6g}"
        )
    return "\n".join(lines)
