"""Simulation study engine behind the experiment command.

Two pipelines over seeded synthetic data:

  method_comparison: for every (method, p, seed), draw train and test
  rows from one generating model, tune each method's hyperparameters by
  cross-validation on the training rows, refit, and score the test rows.

  lambda_sweep: for every seed, fit one model per latent penalty weight
  with everything else held fixed and score the test rows.

Failures are collected per run (continue-on-error) and reported in a
manifest next to the results.
"""

import numpy as np
from joblib import Parallel, delayed

from .core import InteractionScheme, ModelParams
from .metrics import auc, rmse
from .penalties import PenaltyConfig
from .predictors import predict
from .simgen import SimConfig, gen_linear, gen_logistic
from .metrics import pca_embed_baseline
from .trainer import FitConfig, OptimizerConfig, fit, fit_fm
from .tuner import GridSpec, grid_search, lambda_l_sweep

METHODS = ("enet_main", "enet", "latent", "fm", "pca")

DEFAULT_GRID = {
    "lambda1": [0.0, 0.01, 0.1, 1.0, 10.0, 100.0],
    "lambda2": [0.0, 0.01, 0.1, 1.0, 10.0, 100.0],
    "lambda_l": [0.01, 0.1, 1.0, 10.0, 100.0],
    "lr": [0.005, 0.01, 0.05, 0.1],
    "d_fm": [2, 10, 25, 50],
    "folds": 5,
}


def _sim_config(exp, p, seed, n):
    kw = {k: exp[k] for k in ("sigma_eps2", "sigma_s2", "sigma_theta2",
                              "sigma_y2") if k in exp}
    return SimConfig(n=n, p=p, d_true=exp["d_true"],
                     lvm_kind=exp["sim_lvm_kind"], seed=seed, **kw)


def make_train_test(exp, p, seed):
    """Train rows plus an independent test block from the same truth.

    The generator's row-major stream discipline makes the first n rows of
    the larger draw identical to a plain n-row draw with this seed.
    """
    n, n_test = exp["n"], exp["n_test"]
    cfg = _sim_config(exp, p, seed, n + n_test)
    gen = gen_linear if exp["task"] == "regression" else gen_logistic
    data, truth = gen(cfg)
    train = data.take(np.arange(n))
    test = data.take(np.arange(n, n + n_test))
    return train, test, truth


def _test_metric(task):
    return "rmse" if task == "regression" else "auc"


def evaluate_test(params, scheme, test):
    pred = predict(params, test, scheme)
    if test.task == "regression":
        return rmse(test.y, pred)
    return auc(pred, test.y)


def _base_config(exp, task, lvm_kind, d, seed):
    opt_kw = dict(exp.get("optimizer", {}))
    opt_kw["seed"] = seed
    return FitConfig(task=task, lvm_kind=lvm_kind, d=d,
                     penalties=PenaltyConfig(),
                     optimizer=OptimizerConfig(**opt_kw))


def _grid_for(exp, method):
    g = dict(DEFAULT_GRID)
    g.update(exp.get("grid", {}))
    common = dict(lambda1_grid=tuple(g["lambda1"]),
                  lambda2_grid=tuple(g["lambda2"]),
                  lr_grid=tuple(g["lr"]),
                  folds=g["folds"])
    if method == "latent":
        return GridSpec(lambda_l_grid=tuple(g["lambda_l"]),
                        d_grid=(exp["model"]["d"],), **common)
    if method == "fm":
        return GridSpec(lambda_l_grid=(0.0,), d_grid=tuple(g["d_fm"]), **common)
    return GridSpec(lambda_l_grid=(0.0,), d_grid=(2,), **common)


def run_single(exp, method, p, seed):
    """One (method, p, seed) cell: tune, refit, score the test rows."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    train, test, _ = make_train_test(exp, p, seed)
    task = exp["task"]
    full = InteractionScheme.full(p)
    scheme = InteractionScheme.none(p) if method == "enet_main" else full

    if method == "latent":
        lvm_kind = exp["model"]["lvm_kind"]
        d = exp["model"]["d"]
    elif method == "fm":
        lvm_kind, d = "low_rank", 2
    else:
        lvm_kind, d = "none", 2
    template = _base_config(exp, task, lvm_kind, d, seed)
    grid = _grid_for(exp, "enet" if method == "pca" else method)

    best_cfg, _ = grid_search(train, scheme, grid, template, fm=(method == "fm"))
    if method == "fm":
        params, _ = fit_fm(train, scheme, best_cfg)
    else:
        params, _ = fit(train, scheme, best_cfg)
    if method == "pca":
        _, recon = pca_embed_baseline(params.theta_flat, scheme,
                                      exp["model"]["d"])
        params = ModelParams(params.beta0, params.beta, recon, None, None,
                             "none")
    value = evaluate_test(params, scheme, test)
    return {"method": method, "p": p, "seed": seed,
            "metric": _test_metric(task), "value": value,
            "lambda1": best_cfg.penalties.lambda1,
            "lambda2": best_cfg.penalties.lambda2,
            "lambda_l": best_cfg.penalties.lambda_l,
            "learning_rate": best_cfg.optimizer.learning_rate,
            "d": best_cfg.d}


def run_sweep_single(exp, seed):
    """One seed of the latent-penalty sweep at fixed p."""
    p = exp["p"]
    train, test, _ = make_train_test(exp, p, seed)
    scheme = InteractionScheme.full(p)
    fixed = exp.get("fixed", {})
    template = _base_config(exp, exp["task"], exp["model"]["lvm_kind"],
                            exp["model"]["d"], seed)
    template = template.with_penalties(
        lambda1=fixed.get("lambda1", 0.0), lambda2=fixed.get("lambda2", 0.0))
    if "learning_rate" in fixed:
        template = template.with_optimizer(learning_rate=fixed["learning_rate"])
    rows = lambda_l_sweep(train, test, scheme, exp["lambda_l_values"], template)
    for r in rows:
        r["seed"] = seed
    return rows


def run_experiment(exp, jobs=1):
    """All runs of the descriptor; returns (rows, failures).

    Each run is independent and seeded, so parallel execution is
    reproducible; results are ordered by the run index regardless of
    worker scheduling.
    """
    failures = []
    if exp["kind"] == "lambda_sweep":
        tasks = list(exp["seeds"])
        results = Parallel(n_jobs=jobs)(
            delayed(_guard)(run_sweep_single, exp, s) for s in tasks)
        rows = []
        for s, (out, err) in zip(tasks, results):
            if err is not None:
                failures.append({"seed": s, "error": err})
            else:
                rows.extend(out)
        return rows, failures

    tasks = [(m, p, s) for m in exp["methods"] for p in exp["p_list"]
             for s in exp["seeds"]]
    results = Parallel(n_jobs=jobs)(
        delayed(_guard)(run_single, exp, m, p, s) for (m, p, s) in tasks)
    rows = []
    for (m, p, s), (out, err) in zip(tasks, results):
        if err is not None:
            failures.append({"method": m, "p": p, "seed": s, "error": err})
        else:
            rows.append(out)
    return rows, failures


def _guard(fn, *args):
    try:
        return fn(*args), None
    except Exception as exc:
        return None, f"{type(exc).__name__}: {exc}"
