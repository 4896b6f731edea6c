"""Experiment configuration: YAML documents with fail-fast validation.

Unknown keys are rejected with the offending field path.  The seed is
mandatory so every run is reproducible; the CSEC_SEED environment variable
overrides it.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import yaml

from csec.cluster import StragglerPolicy
from csec.presets import SPEED_PRESETS, speed_preset

APPS = ("power_iteration", "linreg")
SCHEME_KINDS = ("uncoded", "homogeneous", "heterogeneous")
GENERATOR_KINDS = ("auto", "systematic_vandermonde", "random_gaussian")
POLICY_KINDS = ("none", "slowest_k", "fixed_set", "random_k")


class ConfigError(ValueError):
    """Schema violation; message carries the field path."""


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}: missing required key '{key}'")
    return mapping[key]


def _check_keys(mapping: dict, allowed: set, path: str):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path}: expected a mapping")
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")


def _number(value, path: str, minimum=None, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value}")
    return int(value) if integer else float(value)


@dataclass(frozen=True)
class SchemeConfig:
    name: str
    kind: str                      # uncoded | homogeneous | heterogeneous
    straggler_tolerance: int
    policy: StragglerPolicy


@dataclass(frozen=True)
class MatrixConfig:
    kind: str                      # random_symmetric | random_regression | dense_file | csv_file
    rows: int = 600
    cols: int = 600
    noise: float = 0.1
    path: str | None = None


@dataclass(frozen=True)
class MachinesConfig:
    speeds: tuple
    n_stable: int
    p_available: float


@dataclass(frozen=True)
class ExperimentConfig:
    app: str
    seed: int
    iterations: int
    recovery_threshold: int
    matrix: MatrixConfig
    machines: MachinesConfig
    schemes: tuple
    generator_kind: str = "auto"
    gamma: float = 0.5
    initial_speed_estimate: float = 1.0
    step_size: float | None = None
    output_dir: str = "out"
    plots: bool = True


def _parse_policy(raw, s_default: int, path: str) -> StragglerPolicy:
    if raw is None:
        return StragglerPolicy.none()
    if isinstance(raw, str):
        raw = {"kind": raw}
    _check_keys(raw, {"kind", "k", "ids", "seed"}, path)
    kind = _require(raw, "kind", path)
    if kind not in POLICY_KINDS:
        raise ConfigError(f"{path}.kind: unknown policy {kind!r}")
    if kind == "none":
        return StragglerPolicy.none()
    if kind == "slowest_k":
        return StragglerPolicy.slowest(_number(raw.get("k", s_default), f"{path}.k",
                                               minimum=0, integer=True))
    if kind == "fixed_set":
        ids = raw.get("ids")
        if not isinstance(ids, list):
            raise ConfigError(f"{path}.ids: expected a list of machine ids")
        return StragglerPolicy.fixed(int(i) for i in ids)
    return StragglerPolicy.random(
        _number(raw.get("k", s_default), f"{path}.k", minimum=0, integer=True),
        _number(raw.get("seed", 0), f"{path}.seed", integer=True),
    )


def _scheme_name(kind: str, tolerance: int, policy: StragglerPolicy) -> str:
    name = kind
    if tolerance:
        name += f"_S{tolerance}"
    if policy.kind == "slowest_k":
        name += f"_drop{policy.k}"
    elif policy.kind not in ("none",):
        name += f"_{policy.kind}"
    return name


def _parse_scheme(raw, defaults: dict, index: int) -> SchemeConfig:
    path = f"schemes[{index}]"
    if isinstance(raw, str):
        raw = {"kind": raw}
    _check_keys(raw, {"kind", "name", "straggler_tolerance", "policy"}, path)
    kind = _require(raw, "kind", path)
    if kind not in SCHEME_KINDS:
        raise ConfigError(f"{path}.kind: unknown scheme {kind!r}")
    if kind == "uncoded":
        tolerance = 0
        policy = StragglerPolicy.none()
        if "straggler_tolerance" in raw or "policy" in raw:
            raise ConfigError(f"{path}: uncoded scheme takes no tolerance or policy")
    else:
        tolerance = _number(raw.get("straggler_tolerance",
                                    defaults["straggler_tolerance"]),
                            f"{path}.straggler_tolerance", minimum=0, integer=True)
        policy = _parse_policy(raw.get("policy", defaults["policy"]), tolerance,
                               f"{path}.policy")
    name = raw.get("name") or _scheme_name(kind, tolerance, policy)
    return SchemeConfig(name=name, kind=kind, straggler_tolerance=tolerance,
                        policy=policy)


def _parse_matrix(raw, path: str) -> MatrixConfig:
    _check_keys(raw, {"kind", "rows", "cols", "noise", "path"}, path)
    kind = _require(raw, "kind", path)
    if kind not in ("random_symmetric", "random_regression", "dense_file", "csv_file"):
        raise ConfigError(f"{path}.kind: unknown matrix kind {kind!r}")
    if kind in ("dense_file", "csv_file") and not raw.get("path"):
        raise ConfigError(f"{path}.path: required for file-backed matrices")
    return MatrixConfig(
        kind=kind,
        rows=_number(raw.get("rows", 600), f"{path}.rows", minimum=1, integer=True),
        cols=_number(raw.get("cols", 600), f"{path}.cols", minimum=1, integer=True),
        noise=_number(raw.get("noise", 0.1), f"{path}.noise", minimum=0),
        path=raw.get("path"),
    )


def _parse_machines(raw, path: str) -> MachinesConfig:
    _check_keys(raw, {"speeds", "stable", "p_available"}, path)
    speeds = _require(raw, "speeds", path)
    if isinstance(speeds, str):
        speeds = speed_preset(speeds) if speeds in SPEED_PRESETS else None
        if speeds is None:
            raise ConfigError(f"{path}.speeds: unknown preset; "
                              f"choose from {sorted(SPEED_PRESETS)} or give a list")
    elif isinstance(speeds, list):
        speeds = [_number(s, f"{path}.speeds[{i}]", minimum=1e-12)
                  for i, s in enumerate(speeds)]
    else:
        raise ConfigError(f"{path}.speeds: expected a preset name or a list")
    n_stable = _number(raw.get("stable", len(speeds)), f"{path}.stable",
                       minimum=0, integer=True)
    if n_stable > len(speeds):
        raise ConfigError(f"{path}.stable: more stable machines than speeds")
    return MachinesConfig(
        speeds=tuple(speeds),
        n_stable=n_stable,
        p_available=_number(raw.get("p_available", 0.5), f"{path}.p_available",
                            minimum=0.0),
    )


TOP_KEYS = {
    "app", "seed", "iterations", "recovery_threshold", "matrix", "machines",
    "schemes", "generator", "straggler_tolerance", "policy", "gamma",
    "initial_speed_estimate", "step_size", "output_dir", "plots",
}


def parse_config(doc: dict) -> ExperimentConfig:
    _check_keys(doc, TOP_KEYS, "config")
    app = _require(doc, "app", "config")
    if app not in APPS:
        raise ConfigError(f"config.app: unknown app {app!r}; choose from {APPS}")

    seed = _require(doc, "seed", "config")
    seed = _number(seed, "config.seed", integer=True)
    env_seed = os.environ.get("CSEC_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ConfigError(f"CSEC_SEED: not an integer: {env_seed!r}") from None

    defaults = {
        "straggler_tolerance": _number(doc.get("straggler_tolerance", 0),
                                       "config.straggler_tolerance",
                                       minimum=0, integer=True),
        "policy": doc.get("policy"),
    }
    raw_schemes = doc.get("schemes", ["heterogeneous"])
    if not isinstance(raw_schemes, list) or not raw_schemes:
        raise ConfigError("config.schemes: expected a non-empty list")
    schemes = tuple(_parse_scheme(s, defaults, i) for i, s in enumerate(raw_schemes))
    names = [s.name for s in schemes]
    if len(set(names)) != len(names):
        raise ConfigError(f"config.schemes: duplicate scheme names {names}")

    generator_kind = doc.get("generator", "auto")
    if generator_kind not in GENERATOR_KINDS:
        raise ConfigError(f"config.generator: unknown kind {generator_kind!r}")

    gamma = _number(doc.get("gamma", 0.5), "config.gamma", minimum=0.0)
    if gamma > 1.0:
        raise ConfigError("config.gamma: must be <= 1")

    step_size = doc.get("step_size")
    if step_size is not None:
        step_size = _number(step_size, "config.step_size", minimum=1e-300)

    return ExperimentConfig(
        app=app,
        seed=seed,
        iterations=_number(doc.get("iterations", 50), "config.iterations",
                           minimum=0, integer=True),
        recovery_threshold=_number(_require(doc, "recovery_threshold", "config"),
                                   "config.recovery_threshold", minimum=1,
                                   integer=True),
        matrix=_parse_matrix(_require(doc, "matrix", "config"), "config.matrix"),
        machines=_parse_machines(_require(doc, "machines", "config"),
                                 "config.machines"),
        schemes=schemes,
        generator_kind=generator_kind,
        gamma=gamma,
        initial_speed_estimate=_number(doc.get("initial_speed_estimate", 1.0),
                                       "config.initial_speed_estimate",
                                       minimum=1e-12),
        step_size=step_size,
        output_dir=str(doc.get("output_dir", "out")),
        plots=bool(doc.get("plots", True)),
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return parse_config(doc)
