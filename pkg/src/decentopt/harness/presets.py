"""Named experiment configurations (counter-examples and Experiment Sets I-III)."""

from __future__ import annotations

from .config import ConfigError, ExperimentConfig, from_dict


def _counterexample(name, algorithm, init, max_iters):
    return {
        "name": name,
        "problem": {"name": "cubic_pair"},
        "graph": {"name": "path", "n": 2, "mixing": "laplacian_shift", "delta": 0.0},
        "algorithm": algorithm,
        "runs": 1,
        "init": {"distribution": init},
        "budgets": {"max_iters": max_iters},
        "output": f"out/{name}",
    }


def _benchmarks(c: float, suffix: str) -> list:
    return [
        {"label": f"dgd_{suffix}", "set": {"algorithm.name": "dgd", "algorithm.params": {"heuristic_c": c}}},
        {"label": f"gt_{suffix}", "set": {"algorithm.name": "gt", "algorithm.params": {"heuristic_c": c}}},
        {"label": f"prox_pda_{suffix}", "set": {"algorithm.name": "prox_pda", "algorithm.params": {"heuristic_c": c}}},
    ]


def _claim1_const():
    return _counterexample(
        "claim1_const", {"name": "dgd", "params": {"schedule": "constant", "alpha": 0.01}}, "claim1_constant", 1_000_000
    )


def _claim1_dim():
    return _counterexample(
        "claim1_dim", {"name": "dgd", "params": {"schedule": "diminishing", "alpha": 0.01}}, "claim1_diminishing", 1_000_000
    )


def _claim2_gt():
    return _counterexample("claim2_gt", {"name": "gt", "params": {"alpha": 0.1, "first_index": -2}}, "claim2_bootstrap", 1000)


def _claim3_pda():
    # rho = 1/(2 alpha) with alpha = 0.1 reproduces the GT iterates
    return _counterexample(
        "claim3_pda", {"name": "prox_pda", "params": {"rho": 5.0, "beta_reg": 0.0, "first_index": -2}}, "claim2_bootstrap", 1000
    )


def _exp1_logistic():
    eps = 1e-4
    magenta = {"epsilon": eps, "d": eps**-0.5, "stop_on_success": False}
    variants = [
        {"label": f"magenta_n{n}", "set": {"problem.params.n_agents": n, "algorithm.params": magenta}} for n in (5, 10, 20)
    ]
    for n in (5, 10, 20):
        variants += [
            {"label": f"dgd_n{n}", "set": {"problem.params.n_agents": n, "algorithm.name": "dgd", "algorithm.params": {"schedule": "constant", "alpha": 0.05}}},
            {"label": f"gt_n{n}", "set": {"problem.params.n_agents": n, "algorithm.name": "gt", "algorithm.params": {"alpha": 0.05}}},
            {"label": f"prox_pda_n{n}", "set": {"problem.params.n_agents": n, "algorithm.name": "prox_pda", "algorithm.params": {"rho": 10.0}}},
        ]
    return {
        "name": "expI_logistic",
        "problem": {"name": "logistic", "data_seed": 1, "params": {"n_agents": 5, "n_points": 2000, "dim": 5, "lam": 0.1, "rho": 1.0}},
        "graph": {"name": "rgg", "radius": 0.5, "seed": 0},
        "algorithm": {"name": "magenta", "params": magenta},
        "runs": 5,
        "init": {"distribution": "standard_normal", "seed": 1},
        "budgets": {"max_iters": 1000, "max_stages": 10},
        "trace_stride": 10,
        "output": "out/expI_logistic",
        "variants": variants,
    }


def _exp2_quartic():
    eps = 1e-4
    magenta = {"epsilon": eps, "stepsize_rule": "inverse_square", "stepsize_c": 1e5}
    variants = [
        {"label": f"magenta_d{d:g}", "set": {"algorithm.params": {**magenta, "d": d}}} for d in (100.0, 10.0, 1.0)
    ]
    return {
        "name": "expII_quartic",
        "problem": {"name": "quartic_pair"},
        "graph": {"name": "path", "n": 2},
        "algorithm": {"name": "magenta", "params": {**magenta, "d": 1.0}},
        "runs": 20,
        "init": {"distribution": "standard_normal", "seed": 2},
        "budgets": {"max_iters": 5000, "max_stages": 200},
        "trace_stride": 10,
        "output": "out/expII_quartic",
        "variants": variants + _benchmarks(0.25, "c0.25"),
    }


def _exp3_network():
    magenta = {"epsilon": 1e-2, "d": 1.0, "stepsize_rule": "inverse_square", "stepsize_c": 100.0}
    return {
        "name": "expIII_network",
        "problem": {"name": "network", "data_seed": 3, "params": {"n_agents": 4, "points_per_agent": 100, "in_dim": 3, "hidden": 5}},
        "graph": {"name": "rgg", "radius": 0.5, "seed": 3},
        "algorithm": {"name": "magenta", "params": magenta},
        "runs": 5,
        "init": {"distribution": "standard_normal", "seed": 3},
        "budgets": {"max_iters": 1000, "max_stages": 20},
        "trace_stride": 10,
        "output": "out/expIII_network",
        "variants": [{"label": "magenta", "set": {}}] + _benchmarks(0.25, "c0.25"),
    }


PRESETS = {
    "claim1_const": _claim1_const,
    "claim1_dim": _claim1_dim,
    "claim2_gt": _claim2_gt,
    "claim3_pda": _claim3_pda,
    "expI_logistic": _exp1_logistic,
    "expII_quartic": _exp2_quartic,
    "expIII_network": _exp3_network,
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return from_dict(PRESETS[name]()).validate()


def list_presets() -> list[str]:
    return list(PRESETS)
