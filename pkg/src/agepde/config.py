"""Run configuration: TOML file, environment overrides, command-line flags.

Precedence, lowest first: built-in defaults, the TOML file, ``AGEPDE_*``
environment variables, explicit command-line flags.

Example file::

    preset = "P1"
    grid = "200x100"
    jobs = 2
    out = "results"

    [problem]
    d = 1.0
    lambda_adv = 1.0
    mu = { ages = [0.0, 1.0], xs = [0.0, 1.0], values = [[2.0, 1.0], [2.0, 1.0]] }

    [numerics]
    scheme = "cn"

    [sweep]
    parameter = "lambda_adv"
    values = [10.0, 30.0, 100.0]

Environment variables: ``AGEPDE_PRESET``, ``AGEPDE_GRID``, ``AGEPDE_JOBS``,
``AGEPDE_OUT``, ``AGEPDE_D``, ``AGEPDE_LAMBDA_ADV``, ``AGEPDE_A_PLUS``,
``AGEPDE_T_MAX``, ``AGEPDE_TOL_LAMBDA``, ``AGEPDE_TOL_STEADY``,
``AGEPDE_SCHEME``, ``AGEPDE_ADVECTION``.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import tomli

from .model import PRESETS, ProblemSpec, holling_ii, logistic, preset, tabulated, tabulated_profile

ENV_PREFIX = "AGEPDE_"

__all__ = ["ENV_PREFIX", "ConfigError", "RunConfig", "parse_grid", "load_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    preset: str = "P0"
    problem: dict = field(default_factory=dict)
    grid: tuple[int, int] = (200, 100)
    tol_lambda: float = 1e-8
    r_tol: float = 1e-10
    tol_steady: float = 1e-8
    t_max: float = 200.0
    scheme: str = "cn"
    advection: str = "hybrid"
    sweep_parameter: str = "lambda_adv"
    sweep_values: tuple[float, ...] = (10.0, 30.0, 100.0)
    sweep_limit: str | None = None
    times: tuple[float, ...] = (0.0, 1.0, 5.0, 10.0)
    seed: float | None = None
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)
    out: str = "."
    source: str | None = None

    def spec(self) -> ProblemSpec:
        return build_spec(self.preset, self.problem)

    def replace(self, **changes) -> "RunConfig":
        return validate(replace(self, **changes))


def parse_grid(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", str(text))
    if not m:
        raise ConfigError(f"grid must look like 200x100, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _line_of(text: str | None, key: str) -> str:
    if not text:
        return ""
    for i, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*{re.escape(key)}\s*=", line):
            return f"line {i}: "
    return ""


def _coef(name, value, a_c):
    if isinstance(value, (int, float)):
        c = float(value)
        if name == "beta":
            return lambda a, x: np.where(np.asarray(a, float) < a_c, c, 0.0) + 0.0 * np.asarray(x)
        return lambda a, x: np.full(np.broadcast(np.asarray(a), np.asarray(x)).shape, c)
    if isinstance(value, dict) and {"ages", "xs", "values"} <= value.keys():
        fn = tabulated(value["ages"], value["xs"], value["values"])
        if name == "beta":
            return lambda a, x: np.where(np.asarray(a, float) < a_c, fn(a, x), 0.0)
        return fn
    raise ConfigError(f"{name} must be a number or a table with ages, xs, values")


def _birth_law(value):
    if isinstance(value, str):
        value = {"kind": value}
    kind = value.get("kind", "holling_ii")
    if kind == "holling_ii":
        return holling_ii(tau=float(value.get("tau", 1.0)), gain=float(value.get("gain", 1.0)))
    if kind == "logistic":
        return logistic()
    raise ConfigError(f"unknown birth law {kind!r}")


SCALARS = ("d", "lambda_adv", "a_c", "a_plus")


def build_spec(name: str, problem: dict) -> ProblemSpec:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    unknown = set(problem) - set(SCALARS) - {"mu", "beta", "q", "birth_law"}
    if unknown:
        raise ConfigError(f"unknown problem keys: {sorted(unknown)}")
    kw = {k: float(problem[k]) for k in SCALARS if k in problem}
    base = preset(name)
    a_c = kw.get("a_c", base.a_c)
    if "a_c" in kw and "beta" not in problem:
        raise ConfigError("changing a_c requires an explicit beta")
    if "mu" in problem:
        kw["mu"] = _coef("mu", problem["mu"], a_c)
    if "beta" in problem:
        kw["beta"] = _coef("beta", problem["beta"], a_c)
    if "q" in problem:
        q = problem["q"]
        if isinstance(q, (int, float)):
            kw["q"] = lambda x, c=float(q): np.full_like(np.asarray(x, float), c)
        elif isinstance(q, dict) and {"xs", "values"} <= q.keys():
            kw["q"] = tabulated_profile(q["xs"], q["values"])
        else:
            raise ConfigError("q must be a number or a table with xs, values")
    if "birth_law" in problem:
        kw["f"] = _birth_law(problem["birth_law"])
    if "a_plus" not in kw and "a_c" in kw:
        kw["a_plus"] = a_c
    try:
        return base.replace(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def validate(cfg: RunConfig) -> RunConfig:
    text = None
    if cfg.source:
        try:
            text = Path(cfg.source).read_text()
        except OSError:
            text = None
    for key in ("tol_lambda", "r_tol", "tol_steady", "t_max"):
        if not getattr(cfg, key) > 0:
            raise ConfigError(f"{_line_of(text, key)}{key} must be positive")
    if cfg.jobs < 1:
        raise ConfigError(f"{_line_of(text, 'jobs')}jobs must be at least 1")
    if cfg.scheme not in ("cn", "euler", "split"):
        raise ConfigError(f"{_line_of(text, 'scheme')}scheme must be cn, euler or split")
    if cfg.advection not in ("hybrid", "fitted"):
        raise ConfigError(f"{_line_of(text, 'advection')}advection must be hybrid or fitted")
    if cfg.sweep_parameter not in ("d", "lambda_adv"):
        raise ConfigError(f"{_line_of(text, 'parameter')}sweep parameter must be d or lambda_adv")
    if not cfg.sweep_values:
        raise ConfigError(f"{_line_of(text, 'values')}sweep values must be non-empty")
    if cfg.sweep_limit not in (None, "alpha1", "alpha0", "alpha_max", "alpha_bar"):
        raise ConfigError(f"{_line_of(text, 'limit')}unknown sweep limit {cfg.sweep_limit!r}")
    if any(t < 0 for t in cfg.times):
        raise ConfigError(f"{_line_of(text, 'times')}times must be nonnegative")
    try:
        cfg.spec()
    except ConfigError as exc:
        raise ConfigError(f"{_line_of(text, 'preset')}{exc}") from None
    return cfg


def _from_toml(path: Path) -> dict:
    try:
        data = tomli.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomli.TOMLDecodeError as exc:
        where = f"line {exc.lineno}, column {exc.colno}: " if getattr(exc, "lineno", None) else ""
        raise ConfigError(f"{path}: {where}{getattr(exc, 'msg', exc)}") from None
    out = {}
    for key in ("preset", "jobs", "out"):
        if key in data:
            out[key] = data[key]
    if "grid" in data:
        g = data["grid"]
        out["grid"] = (int(g["n_a"]), int(g["n_x"])) if isinstance(g, dict) else parse_grid(g)
    if "problem" in data:
        out["problem"] = dict(data["problem"])
    for section in ("tolerances", "numerics"):
        for k, v in data.get(section, {}).items():
            out[k] = v
    sw = data.get("sweep", {})
    if "parameter" in sw:
        out["sweep_parameter"] = sw["parameter"]
    if "values" in sw:
        out["sweep_values"] = tuple(float(v) for v in sw["values"])
    if "limit" in sw:
        out["sweep_limit"] = sw["limit"]
    sim = data.get("simulate", {})
    if "times" in sim:
        out["times"] = tuple(float(v) for v in sim["times"])
    if "seed" in sim:
        out["seed"] = float(sim["seed"])
    known = {f for f in RunConfig.__dataclass_fields__}
    bad = set(out) - known
    if bad:
        raise ConfigError(f"{path}: unknown keys {sorted(bad)}")
    return out


def _from_env(env) -> dict:
    out: dict = {}
    problem: dict = {}

    def get(name):
        return env.get(ENV_PREFIX + name)

    try:
        if get("PRESET"):
            out["preset"] = get("PRESET")
        if get("GRID"):
            out["grid"] = parse_grid(get("GRID"))
        if get("JOBS"):
            out["jobs"] = int(get("JOBS"))
        if get("OUT"):
            out["out"] = get("OUT")
        for key in SCALARS:
            if get(key.upper()):
                problem[key] = float(get(key.upper()))
        for key in ("t_max", "tol_lambda", "tol_steady"):
            if get(key.upper()):
                out[key] = float(get(key.upper()))
        for key in ("scheme", "advection"):
            if get(key.upper()):
                out[key] = get(key.upper())
    except ValueError as exc:
        raise ConfigError(f"bad {ENV_PREFIX}* environment value: {exc}") from None
    if problem:
        out["problem"] = problem
    return out


def load_config(path=None, env=None, **flags) -> RunConfig:
    """Merge defaults, ``path``, environment and ``flags`` (``None`` flags are ignored)."""
    env = os.environ if env is None else env
    merged: dict = {}
    problem: dict = {}
    layers = []
    if path is not None:
        layers.append(_from_toml(Path(path)))
        merged["source"] = str(path)
    layers.append(_from_env(env))
    layers.append({k: v for k, v in flags.items() if v is not None})
    for layer in layers:
        problem.update(layer.pop("problem", {}))
        merged.update(layer)
    if "grid" in merged and isinstance(merged["grid"], str):
        merged["grid"] = parse_grid(merged["grid"])
    try:
        cfg = RunConfig(problem=problem, **merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return validate(cfg)
