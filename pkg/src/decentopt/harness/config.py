"""Experiment configuration: dataclasses, JSON loading and ``--set`` overrides.

Canonical keys (dotted paths accepted by ``--set``)::

    name                      experiment label
    runs                      number of seeded runs per variant
    output                    output directory (trace.csv, summary.json)
    trace_stride              keep every k-th iteration in the trace
    jobs                      worker processes (1 = in-process)
    problem.name              cubic_pair | quartic_pair | cancelling_powers | logistic |
                              network | matrix_factorization
    problem.data_seed         base seed for synthetic data
    problem.params.*          problem parameters (see ``PROBLEM_PARAMS``)
    graph.name                path | complete | rgg
    graph.n                   agents (null: taken from the problem)
    graph.radius, graph.seed  random geometric graph settings
    graph.mixing              metropolis_hastings | laplacian_shift
    graph.delta               laplacian_shift margin (null: 0.1 lambda_max)
    algorithm.name            dgd | gt | prox_pda | magenta
    algorithm.params.*        algorithm parameters (see ``ALGORITHM_PARAMS``)
    init.distribution         standard_normal | normal | explicit |
                              claim1_constant | claim1_diminishing |
                              claim2_bootstrap
    init.mean, init.std       for ``normal``
    init.values               for ``explicit`` (N x K nested list, or N values)
    init.seed                 base seed for initial points
    budgets.max_iters         iteration cap (computed iterations for MAGENTA)
    budgets.max_stages        MAGENTA stage cap
    variants                  list of {"label": str, "set": {dotted: value}}
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Invalid experiment configuration."""


PROBLEM_PARAMS = {
    "cubic_pair": {},
    "quartic_pair": {"shift": 20.0},
    "cancelling_powers": {"q": 3},
    "logistic": {"n_agents": 5, "n_points": 2000, "dim": 5, "lam": 0.1, "rho": 1.0, "flip": 0.1},
    "network": {"n_agents": 4, "points_per_agent": 100, "in_dim": 3, "hidden": 5, "activation": "softplus"},
    "matrix_factorization": {"n_agents": 3, "size": 4, "rank": 2},
}

ALGORITHM_PARAMS = {
    "dgd": {"schedule": "diminishing", "alpha": None, "heuristic_c": None, "scale": 5e-3, "stop_on_convergence": False},
    "gt": {"alpha": None, "heuristic_c": None, "scale": 2e-3, "first_index": 0, "stop_on_convergence": False},
    "prox_pda": {"rho": None, "heuristic_c": None, "scale": 1e3, "beta_reg": 0.0, "first_index": 0, "stop_on_convergence": False},
    "magenta": {
        "epsilon": 1e-3,
        "d": 1.0,
        "gamma": None,
        "xi": None,
        "beta": 0.5,
        "target_gap": None,
        "stop_on_success": True,
        "track_potential": False,
        "check_tracking": False,
        "stepsize_rule": "theory",
        "stepsize_c": 1.0,
        "lower_bound": None,
        "fast_forward": True,
    },
}

GRAPHS = ("path", "complete", "rgg")
MIXING_RULES = ("metropolis_hastings", "laplacian_shift")
INIT_KINDS = ("standard_normal", "normal", "explicit", "claim1_constant", "claim1_diminishing", "claim2_bootstrap")


@dataclass
class ProblemSpec:
    name: str = "quartic_pair"
    data_seed: int = 0
    params: dict = field(default_factory=dict)


@dataclass
class GraphSpec:
    name: str = "path"
    n: int | None = None
    radius: float = 0.5
    seed: int = 0
    mixing: str = "metropolis_hastings"
    delta: float | None = None


@dataclass
class AlgorithmSpec:
    name: str = "magenta"
    params: dict = field(default_factory=dict)


@dataclass
class InitSpec:
    distribution: str = "standard_normal"
    mean: float = 0.0
    std: float = 1.0
    values: list | None = None
    seed: int = 0


@dataclass
class Budgets:
    max_iters: int = 10000
    max_stages: int = 100


@dataclass
class Variant:
    label: str
    set: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    graph: GraphSpec = field(default_factory=GraphSpec)
    algorithm: AlgorithmSpec = field(default_factory=AlgorithmSpec)
    runs: int = 1
    init: InitSpec = field(default_factory=InitSpec)
    budgets: Budgets = field(default_factory=Budgets)
    output: str = "out"
    trace_stride: int = 1
    jobs: int = 1
    variants: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def validate(self) -> "ExperimentConfig":
        validate(self)
        return self

    def resolved_variants(self) -> list[tuple[str, "ExperimentConfig"]]:
        """``(label, config)`` per variant; a config without variants is its own single variant."""
        if not self.variants:
            return [(self.algorithm.name, self)]
        out = []
        base = self.to_dict()
        base["variants"] = []
        for v in self.variants:
            d = copy.deepcopy(base)
            for key, value in v.set.items():
                set_path(d, key, value)
            out.append((v.label, from_dict(d)))
        return out


_SECTIONS = {
    "problem": ProblemSpec,
    "graph": GraphSpec,
    "algorithm": AlgorithmSpec,
    "init": InitSpec,
    "budgets": Budgets,
}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    known = set(cls.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    return cls(**data)


def from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    data = copy.deepcopy(data)
    unknown = set(data) - set(ExperimentConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        elif key == "variants":
            if not isinstance(value, list):
                raise ConfigError("variants must be a list")
            kwargs[key] = [_build(Variant, v, "variants[]") for v in value]
        else:
            kwargs[key] = value
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return from_dict(data)


def set_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        if k not in cur or cur[k] is None:
            cur[k] = {}
        if not isinstance(cur[k], dict):
            raise ConfigError(f"cannot descend into {k!r} of {dotted!r}")
        cur = cur[k]
    cur[keys[-1]] = value


def parse_override(text: str) -> tuple[str, Any]:
    """``key=value``; the value is read as JSON when possible, else kept as a string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    d = cfg.to_dict()
    for item in overrides:
        key, value = parse_override(item) if isinstance(item, str) else item
        set_path(d, key, value)
    return from_dict(d)


def _is_seed(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and 0 <= v < 2**64


def _check_params(kind: str, given: dict, table: dict) -> None:
    if kind not in table:
        raise ConfigError(f"unknown name {kind!r}; expected one of {sorted(table)}")
    unknown = set(given) - set(table[kind])
    if unknown:
        raise ConfigError(f"unknown parameter(s) for {kind}: {sorted(unknown)}")


def validate(cfg: ExperimentConfig) -> None:
    """Raise ``ConfigError`` describing the first problem found, for every variant."""
    for label, c in cfg.resolved_variants():
        try:
            _validate_one(c)
        except ConfigError as exc:
            raise ConfigError(f"variant {label!r}: {exc}") from None


def _validate_one(cfg: ExperimentConfig) -> None:
    if not isinstance(cfg.runs, int) or isinstance(cfg.runs, bool) or cfg.runs < 0:
        raise ConfigError("runs must be a non-negative integer")
    if not isinstance(cfg.trace_stride, int) or cfg.trace_stride < 1:
        raise ConfigError("trace_stride must be a positive integer")
    if not isinstance(cfg.jobs, int) or cfg.jobs < 1:
        raise ConfigError("jobs must be a positive integer")
    _check_params(cfg.problem.name, cfg.problem.params, PROBLEM_PARAMS)
    if not _is_seed(cfg.problem.data_seed):
        raise ConfigError("problem.data_seed must be an explicit 64-bit non-negative integer")
    g = cfg.graph
    if g.name not in GRAPHS:
        raise ConfigError(f"graph.name must be one of {GRAPHS}")
    if g.mixing not in MIXING_RULES:
        raise ConfigError(f"graph.mixing must be one of {MIXING_RULES}")
    if not _is_seed(g.seed):
        raise ConfigError("graph.seed must be an explicit 64-bit non-negative integer")
    if g.n is not None and (not isinstance(g.n, int) or g.n < 2):
        raise ConfigError("graph.n must be an integer >= 2")
    if g.name == "rgg" and not 0 < g.radius < 1:
        raise ConfigError("graph.radius must lie in (0, 1)")
    a = cfg.algorithm
    _check_params(a.name, a.params, ALGORITHM_PARAMS)
    prm = {**ALGORITHM_PARAMS[a.name], **a.params}
    if a.name == "dgd":
        if prm["schedule"] not in ("constant", "diminishing"):
            raise ConfigError("dgd schedule must be constant or diminishing")
        if (prm["alpha"] is None) == (prm["heuristic_c"] is None):
            raise ConfigError("dgd needs exactly one of alpha or heuristic_c")
    elif a.name == "gt":
        if (prm["alpha"] is None) == (prm["heuristic_c"] is None):
            raise ConfigError("gt needs exactly one of alpha or heuristic_c")
    elif a.name == "prox_pda":
        if (prm["rho"] is None) == (prm["heuristic_c"] is None):
            raise ConfigError("prox_pda needs exactly one of rho or heuristic_c")
    for key in ("alpha", "heuristic_c", "rho", "epsilon", "d"):
        if prm.get(key) is not None and not (isinstance(prm[key], (int, float)) and prm[key] > 0):
            raise ConfigError(f"algorithm parameter {key} must be positive")
    i = cfg.init
    if i.distribution not in INIT_KINDS:
        raise ConfigError(f"init.distribution must be one of {INIT_KINDS}")
    if not _is_seed(i.seed):
        raise ConfigError("init.seed must be an explicit 64-bit non-negative integer")
    if i.distribution == "explicit" and i.values is None:
        raise ConfigError("explicit init needs init.values")
    if i.distribution == "normal" and not i.std >= 0:
        raise ConfigError("init.std must be non-negative")
    if i.distribution.startswith("claim") and cfg.problem.name != "cubic_pair":
        raise ConfigError(f"{i.distribution} init only applies to cubic_pair")
    if i.distribution == "claim2_bootstrap" and a.name not in ("gt", "prox_pda"):
        raise ConfigError("claim2_bootstrap init needs gt or prox_pda")
    if i.distribution.startswith("claim1") and a.name != "dgd":
        raise ConfigError(f"{i.distribution} init needs dgd")
    if i.distribution.startswith("claim") and prm.get("heuristic_c") is not None:
        raise ConfigError("counter-example inits need a fixed alpha / rho")
    b = cfg.budgets
    if not isinstance(b.max_iters, int) or b.max_iters < 0:
        raise ConfigError("budgets.max_iters must be a non-negative integer")
    if not isinstance(b.max_stages, int) or b.max_stages < 1:
        raise ConfigError("budgets.max_stages must be a positive integer")
