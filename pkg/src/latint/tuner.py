"""Train/test splitting, k-fold CV, and hyperparameter search.

Selection metrics: validation RMSE is minimized, validation AUC is
maximized, and for survival the mean per-event partial log-likelihood on
the held-out fold is maximized. Ties between grid cells break toward
stronger regularization (larger lambda1, lambda2, lambda_l), then toward
the smaller learning rate, then the smaller latent dimension.
"""

import itertools
from dataclasses import dataclass, replace

import numpy as np
from joblib import Parallel, delayed

from .core import interaction_matrix
from .errors import DegenerateDataError, SearchFailedError
from .metrics import auc, rmse
from .predictors import cox_neg_log_partial_likelihood_grad, predict
from .rng import stream
from .trainer import fit, fit_fm


@dataclass(frozen=True)
class GridSpec:
    lambda1_grid: tuple = (0.0, 0.01, 0.1, 1.0, 10.0, 100.0)
    lambda2_grid: tuple = (0.0, 0.01, 0.1, 1.0, 10.0, 100.0)
    lambda_l_grid: tuple = (0.01, 0.1, 1.0, 10.0, 100.0)
    lr_grid: tuple = (0.005, 0.01, 0.05, 0.1)
    d_grid: tuple = (2,)
    folds: int = 5
    split_fraction: float = 0.5
    selection: str = "auto"  # rmse | auc | cox_pl | auto (by task)

    def __post_init__(self):
        for name in ("lambda1_grid", "lambda2_grid", "lambda_l_grid",
                     "lr_grid", "d_grid"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be non-empty")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must be in (0, 1)")


def split(dataset, fraction, seed):
    """Disjoint, exhaustive, seeded train/test row partition.

    Survival data are stratified on the event indicator so both sides keep
    events; a side ending up with zero events is an error.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    g = stream(seed, "split")
    n = dataset.n
    if dataset.task == "survival":
        train_idx = []
        test_idx = []
        for value in (1, 0):
            grp = np.flatnonzero(dataset.event == value)
            grp = grp[g.permutation(grp.size)]
            k = int(round(grp.size * fraction))
            train_idx.append(grp[:k])
            test_idx.append(grp[k:])
        train_idx = np.sort(np.concatenate(train_idx))
        test_idx = np.sort(np.concatenate(test_idx))
        for name, idx in (("train", train_idx), ("test", test_idx)):
            if idx.size == 0 or int(dataset.event[idx].sum()) == 0:
                raise DegenerateDataError(f"{name} split received no events")
    else:
        perm = g.permutation(n)
        k = int(round(n * fraction))
        if k == 0 or k == n:
            raise ValueError("split leaves one side empty")
        train_idx = np.sort(perm[:k])
        test_idx = np.sort(perm[k:])
    return dataset.take(train_idx), dataset.take(test_idx)


def kfold(dataset, k, seed):
    """k (fit_idx, validate_idx) pairs; folds disjoint, sizes within one."""
    n = dataset.n
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = stream(seed, "fold").permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for i in range(k):
        val = np.sort(folds[i])
        rest = np.sort(np.concatenate([folds[j] for j in range(k) if j != i]))
        out.append((rest, val))
    return out


def _selection_metric(spec, task):
    if spec.selection != "auto":
        return spec.selection
    return {"regression": "rmse", "classification": "auc",
            "survival": "cox_pl"}[task]


def validation_score(params, scheme, val_data, metric):
    """Higher-is-better score of fitted params on held-out rows."""
    if metric == "rmse":
        return -rmse(val_data.y, predict(params, val_data, scheme))
    if metric == "auc":
        return auc(predict(params, val_data, scheme), val_data.y)
    if metric == "cox_pl":
        scores = predict(params, val_data, scheme)
        value, _ = cox_neg_log_partial_likelihood_grad(
            scores, val_data.time, val_data.event)
        return -value
    raise ValueError(f"unknown selection metric {metric!r}")


def _fit_for(config, data, scheme, x_int):
    if getattr(config, "fm", False):
        return fit_fm(data, scheme, config.fit_config, x_int=x_int)
    return fit(data, scheme, config.fit_config, x_int=x_int)


@dataclass(frozen=True)
class _Cell:
    lambda1: float
    lambda2: float
    lambda_l: float
    lr: float
    d: int
    fit_config: object
    fm: bool = False


def _cells(grid, template, fm):
    combos = itertools.product(grid.lambda1_grid, grid.lambda2_grid,
                               grid.lambda_l_grid, grid.lr_grid, grid.d_grid)
    out = []
    for l1, l2, ll, lr, d in combos:
        cfg = template.with_penalties(lambda1=l1, lambda2=l2, lambda_l=ll)
        cfg = cfg.with_optimizer(learning_rate=lr)
        cfg = replace(cfg, d=d)
        out.append(_Cell(l1, l2, ll, lr, d, cfg, fm))
    return out


def _eval_cell(cell, train, scheme, fold_pairs, x_int_full, metric):
    scores = []
    try:
        for fit_idx, val_idx in fold_pairs:
            sub = train.take(fit_idx)
            params, _ = _fit_for(cell, sub, scheme, x_int_full[fit_idx])
            scores.append(validation_score(params, scheme, train.take(val_idx),
                                           metric))
        return float(np.mean(scores)), None
    except Exception as exc:  # cell failure is data; search continues
        return None, f"{type(exc).__name__}: {exc}"


def grid_search(train, scheme, grid, template, fm=False, n_jobs=1):
    """Exhaustive sweep with k-fold CV per cell.

    Returns (best FitConfig, table) where table rows carry the cell's
    hyperparameters, the mean CV score (orientation per the selection
    metric), and an error string for failed cells. Raises if every cell
    failed.
    """
    metric = _selection_metric(grid, train.task)
    fold_pairs = kfold(train, grid.folds, template.optimizer.seed)
    x_int_full = interaction_matrix(train.X, scheme)
    cells = _cells(grid, template, fm)
    results = Parallel(n_jobs=n_jobs)(
        delayed(_eval_cell)(c, train, scheme, fold_pairs, x_int_full, metric)
        for c in cells)

    table = []
    best = None
    for cell, (score, err) in zip(cells, results):
        row = {"lambda1": cell.lambda1, "lambda2": cell.lambda2,
               "lambda_l": cell.lambda_l, "learning_rate": cell.lr,
               "d": cell.d, "metric": metric,
               "cv_score": score, "error": err}
        table.append(row)
        if score is None:
            continue
        key = (score, cell.lambda1, cell.lambda2, cell.lambda_l,
               -cell.lr, -cell.d)
        if best is None or key > best[0]:
            best = (key, cell)
    if best is None:
        raise SearchFailedError([r["error"] for r in table])
    return best[1].fit_config, table


def lambda_l_sweep(train, test, scheme, lambda_values, config, fm_limit=None,
                   n_jobs=1):
    """Test-set metric for each latent penalty weight, shared seed/init.

    Returns rows of (lambda_l, metric, value). The evaluation metric
    follows the task (RMSE for regression, AUC for classification,
    per-event partial log-likelihood for survival).
    """
    metric = _selection_metric(GridSpec(), train.task)
    x_int = interaction_matrix(train.X, scheme)

    def one(lam):
        cfg = config.with_penalties(lambda_l=lam)
        params, _ = fit(train, scheme, cfg, x_int=x_int)
        value = validation_score(params, scheme, test, metric)
        if metric == "rmse":
            value = -value
        return {"lambda_l": lam, "metric": metric, "value": value}

    return Parallel(n_jobs=n_jobs)(delayed(one)(lam) for lam in lambda_values)
