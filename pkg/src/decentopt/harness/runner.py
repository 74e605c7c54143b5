"""Build problems, graphs and initial points from a config and execute seeded runs."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..algorithms import (
    AlgorithmError,
    Constant,
    Diminishing,
    MagentaInternalError,
    MagentaParams,
    run_dgd,
    run_gradient_tracking,
    run_magenta,
    run_prox_pda,
)
from ..graph import (
    build_complete_graph,
    build_mixing_matrix,
    build_path_graph,
    build_random_geometric_graph,
    incidence_matrix,
)
from ..metrics import RunClass
from ..problems import (
    ProblemInstance,
    logistic_dataset,
    make_cubic_pair,
    make_cancelling_powers,
    make_logistic_regression,
    make_matrix_factorization,
    make_quartic_pair,
    make_softplus_network,
    network_dataset,
)
from ..state import as_stacked
from ..trace import TraceSink, emit_csv
from .config import ALGORITHM_PARAMS, PROBLEM_PARAMS, ConfigError, ExperimentConfig, from_dict
from .seeding import derive_seed, rng_for

TRACE_FILE = "trace.csv"
SUMMARY_FILE = "summary.json"

_PROBLEM_CACHE: dict[str, ProblemInstance] = {}


def build_problem(spec) -> ProblemInstance:
    key = json.dumps([spec.name, spec.data_seed, spec.params], sort_keys=True)
    if key in _PROBLEM_CACHE:
        return _PROBLEM_CACHE[key]
    prm = {**PROBLEM_PARAMS[spec.name], **spec.params}
    seed = derive_seed(spec.data_seed, "data")
    if spec.name == "cubic_pair":
        p = make_cubic_pair()
    elif spec.name == "quartic_pair":
        p = make_quartic_pair(prm["shift"])
    elif spec.name == "cancelling_powers":
        p = make_cancelling_powers(prm["q"])
    elif spec.name == "logistic":
        data = logistic_dataset(prm["n_agents"], prm["n_points"], prm["dim"], seed=seed, flip=prm["flip"])
        p = make_logistic_regression(data, prm["lam"], prm["rho"])
    elif spec.name == "network":
        data = network_dataset(prm["n_agents"], prm["points_per_agent"], prm["in_dim"], seed=seed)
        p = make_softplus_network(data, prm["hidden"], prm["activation"], seed=derive_seed(spec.data_seed, "model"))
    elif spec.name == "matrix_factorization":
        targets = np.random.default_rng(seed).standard_normal((prm["n_agents"], prm["size"]))
        p = make_matrix_factorization(targets, prm["rank"])
    else:  # pragma: no cover - rejected by validation
        raise ConfigError(f"unknown problem {spec.name!r}")
    _PROBLEM_CACHE[key] = p
    return p


def build_graph(spec, n_agents: int):
    n = n_agents if spec.n is None else spec.n
    if n != n_agents:
        raise ConfigError(f"graph has {n} nodes but the problem has {n_agents} agents")
    if spec.name == "path":
        g = build_path_graph(n)
    elif spec.name == "complete":
        g = build_complete_graph(n)
    else:
        g = build_random_geometric_graph(n, spec.radius, derive_seed(spec.seed, "graph"))
    return g, build_mixing_matrix(g, spec.mixing, spec.delta)


def _counter_alpha(prm: dict) -> float:
    if prm.get("alpha") is not None:
        return float(prm["alpha"])
    return 1.0 / (2.0 * float(prm["rho"]))


def initial_point(cfg: ExperimentConfig, p: ProblemInstance, k: int) -> np.ndarray:
    spec = cfg.init
    shape = (p.n_agents, p.dim)
    prm = {**ALGORITHM_PARAMS[cfg.algorithm.name], **cfg.algorithm.params}
    kind = spec.distribution
    if kind == "standard_normal":
        return rng_for(spec.seed, "init", k).standard_normal(shape)
    if kind == "normal":
        return spec.mean + spec.std * rng_for(spec.seed, "init", k).standard_normal(shape)
    if kind == "explicit":
        try:
            x = as_stacked(np.asarray(spec.values, dtype=float), p.n_agents)
        except ValueError as exc:
            raise ConfigError(f"init.values: {exc}") from None
        if x.shape != shape:
            raise ConfigError(f"init.values has shape {x.shape}, expected {shape}")
        return x
    a = _counter_alpha(prm)
    if kind == "claim1_constant":
        # x2 - x1 = 2/alpha around a mean of 1
        return np.array([[1.0 - 1.0 / a], [1.0 + 1.0 / a]])
    if kind == "claim1_diminishing":
        return np.array([[0.0], [2.0 / a]])
    return np.array([[1.0 / a], [1.0 / a]])


def _finite_or_none(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _heuristic_norm(x0) -> float:
    nrm = float(np.linalg.norm(x0))
    if nrm == 0:
        raise AlgorithmError("heuristic stepsize needs a non-zero initial point")
    return nrm


def run_single(cfg: ExperimentConfig, label: str, k: int, run_id: int):
    """Execute run ``k`` of one variant; returns ``(records, run_summary)``."""
    p = build_problem(cfg.problem)
    g, w = build_graph(cfg.graph, p.n_agents)
    x0 = initial_point(cfg, p, k)
    name = cfg.algorithm.name
    prm = {**ALGORITHM_PARAMS[name], **cfg.algorithm.params}
    sink = TraceSink(cfg.trace_stride)
    budget = cfg.budgets.max_iters
    info: dict = {}
    error = None
    if name == "dgd":
        alpha = prm["alpha"] if prm["heuristic_c"] is None else prm["heuristic_c"] * prm["scale"] / _heuristic_norm(x0)
        step = Constant(alpha) if prm["schedule"] == "constant" else Diminishing(alpha)
        info["alpha"] = alpha
        res = run_dgd(p, w, x0, step, budget, sink, run_id=run_id, stop_on_convergence=prm["stop_on_convergence"])
    elif name == "gt":
        alpha = prm["alpha"] if prm["heuristic_c"] is None else prm["heuristic_c"] * prm["scale"] / _heuristic_norm(x0)
        info["alpha"] = alpha
        res = run_gradient_tracking(
            p,
            w,
            alpha=alpha,
            max_iters=budget,
            trace_sink=sink,
            bootstrap_from=x0,
            first_index=prm["first_index"],
            run_id=run_id,
            stop_on_convergence=prm["stop_on_convergence"],
        )
    elif name == "prox_pda":
        rho = prm["rho"] if prm["heuristic_c"] is None else prm["scale"] * _heuristic_norm(x0) / prm["heuristic_c"]
        info["rho"] = rho
        res = run_prox_pda(
            p,
            incidence_matrix(g),
            rho,
            prm["beta_reg"],
            x0,
            budget,
            sink,
            first_index=prm["first_index"],
            run_id=run_id,
            stop_on_convergence=prm["stop_on_convergence"],
        )
    else:
        mp = MagentaParams(
            eta_used=w.deviation_norm,
            max_stages=cfg.budgets.max_stages,
            max_iters=budget,
            **{key: prm[key] for key in ALGORITHM_PARAMS["magenta"]},
        )
        if mp.lower_bound is None:
            mp.lower_bound = p.lower_bound
        try:
            res = run_magenta(p, w, x0, mp, sink, run_id=run_id)
            info["stages"] = len(res.stages)
            info["computed_iters"] = sum(rep.computed_iters for rep in res.stages)
            info["final_stage"] = res.state.stage
        except MagentaInternalError as exc:
            error = str(exc)
            res = None
    records = sink.records
    if res is None:
        summary = {
            "run_id": run_id,
            "variant": label,
            "algorithm": name,
            "run_index": k,
            "init_seed": derive_seed(cfg.init.seed, "init", k),
            "termination": "internal_error",
            "classification": RunClass.DIVERGED.value,
            "iterations": None,
            "final_gap": None,
            "min_gap": None,
            "error": error,
        }
        return records, summary
    gaps = np.asarray(res.gaps, dtype=float)
    summary = {
        "run_id": run_id,
        "variant": label,
        "algorithm": name,
        "run_index": k,
        "init_seed": derive_seed(cfg.init.seed, "init", k),
        "termination": res.termination.value,
        "classification": res.classification.value,
        "iterations": int(res.iterations),
        "final_gap": _finite_or_none(gaps[-1]) if gaps.size else None,
        "min_gap": _finite_or_none(np.nanmin(gaps)) if gaps.size and not np.all(np.isnan(gaps)) else None,
        **{key: _finite_or_none(v) if isinstance(v, float) else v for key, v in info.items()},
    }
    return records, summary


def _task(args):
    cfg_dict, label, k, run_id = args
    return run_single(from_dict(cfg_dict), label, k, run_id)


def tally(run_summaries) -> dict:
    out: dict = {}
    for s in run_summaries:
        t = out.setdefault(s["variant"], {"converged": 0, "diverged": 0, "undecided": 0, "runs": 0})
        t[s["classification"]] += 1
        t["runs"] += 1
    for t in out.values():
        t["converged_pct"] = 100.0 * t["converged"] / t["runs"] if t["runs"] else 0.0
    return out


def run_experiment(cfg: ExperimentConfig, output: str | None = None, write: bool = True) -> dict:
    """Run every variant ``cfg.runs`` times and write ``trace.csv`` + ``summary.json``.

    Run ``k`` of every variant draws its initial point from seed
    ``derive_seed(init.seed, "init", k)``, so variants share initial points.
    Rows are concatenated in run order whatever ``jobs`` is.
    """
    cfg.validate()
    variants = cfg.resolved_variants()
    tasks = []
    for v, (label, vcfg) in enumerate(variants):
        for k in range(vcfg.runs):
            tasks.append((vcfg.to_dict(), label, k, v * cfg.runs + k))
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    records = [rec for recs, _ in results for rec in recs]
    runs = [s for _, s in results]
    summary = {"name": cfg.name, "runs": runs, "tally": tally(runs)}
    if write:
        out = Path(output if output is not None else cfg.output)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / SUMMARY_FILE).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise OSError(f"cannot write summary to {out}: {exc}") from exc
        emit_csv(records, out / TRACE_FILE)
    summary["records"] = records
    return summary
