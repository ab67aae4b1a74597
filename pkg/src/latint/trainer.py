"""Joint estimation of coefficients and latent vectors.

One optimizer drives everything: full-batch Adam on the smooth part of the
objective (prediction loss + l2 + latent penalty), followed each epoch by
a soft-thresholding step on the main-effect and interaction coefficients
with threshold learning_rate * lambda1. The intercepts and the latent
matrix are never thresholded. The threshold deliberately uses the nominal
learning rate, not the Adam-preconditioned per-coordinate step.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (InteractionScheme, ModelParams, expand_interactions,
                   interaction_matrix)
from .errors import DivergenceError
from .penalties import (PenaltyConfig, elastic_net_value_grad, lvm_grads,
                        lvm_value, soft_threshold)
from .predictors import (cox_neg_log_partial_likelihood_grad,
                         logistic_loss_grad, mse_loss_grad)
from .rng import stream


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.05
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_epochs: int = 2000
    tol: float = 1e-6
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass(frozen=True)
class FitConfig:
    task: str
    lvm_kind: str = "none"
    d: int = 2
    penalties: PenaltyConfig = field(default_factory=PenaltyConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    fit_intercept: bool = True

    def with_penalties(self, **kw):
        return replace(self, penalties=replace(self.penalties, **kw))

    def with_optimizer(self, **kw):
        return replace(self, optimizer=replace(self.optimizer, **kw))


@dataclass
class FitReport:
    """Loss trajectory and bookkeeping for one fit.

    The trajectories have one entry per evaluated parameter state:
    initialization first, then after each epoch's update. Weighted
    components sum to the total at every entry.
    """

    loss_total: np.ndarray
    loss_pred: np.ndarray
    loss_reg: np.ndarray
    loss_lvm: np.ndarray
    epochs_run: int
    converged: bool
    wall_time: float
    best_loss: float
    best_epoch: int
    mode: str


def init_params(p, d, kind, scheme, seed, intercept=True):
    """Standard-normal initialization of every free parameter.

    Draw order is fixed (beta0, beta, theta, Z) so the main-effect and
    interaction initialization is identical across latent kinds for the
    same seed. alpha0 starts at 0; masked pairs carry no parameter.
    """
    if kind not in ("low_rank", "latent_distance", "none"):
        raise ValueError(f"unknown lvm kind {kind!r}")
    if kind != "none" and d >= p:
        raise ValueError(f"latent dimension d={d} must be < p={p}")
    g = stream(seed, "init")
    beta0 = float(g.standard_normal()) if intercept else 0.0
    beta = g.standard_normal(p)
    theta = g.standard_normal(scheme.n_active)
    Z = g.standard_normal((p, d)) if kind != "none" else None
    alpha0 = 0.0 if kind == "latent_distance" else None
    return ModelParams(beta0, beta, theta, Z, alpha0, kind)


def _pred_loss_fn(task):
    if task == "regression":
        return lambda s, data: mse_loss_grad(s, data.y)
    if task == "classification":
        return lambda s, data: logistic_loss_grad(s, data.y)
    if task == "survival":
        return lambda s, data: cox_neg_log_partial_likelihood_grad(
            s, data.time, data.event)
    raise ValueError(f"unknown task {task!r}")


def total_loss(params, dataset, scheme, penalties, task=None):
    """Objective value and its weighted components for given parameters.

    Returns (value, {"pred": ..., "reg": ..., "lvm": ...}); the components
    already carry their lambda weights, so they sum to the value.
    """
    task = task or dataset.task
    if task != dataset.task:
        raise ValueError(f"task {task!r} does not match dataset {dataset.task!r}")
    x_int = interaction_matrix(dataset.X, scheme)
    intercept = task != "survival"
    scores = dataset.X @ params.beta + x_int @ params.theta_flat
    if intercept:
        scores = scores + params.beta0
    pred, _ = _pred_loss_fn(task)(scores, dataset)
    beta_aug = np.concatenate([[params.beta0], params.beta, params.theta_flat])
    reg, _ = elastic_net_value_grad(beta_aug, penalties)
    lvm = 0.0
    if params.lvm_kind != "none" and penalties.lambda_l > 0:
        lvm = lvm_value(params.theta_flat, params.Z, params.alpha0,
                        params.lvm_kind, scheme, penalties.lambda_l)
    return pred + reg + lvm, {"pred": pred, "reg": reg, "lvm": lvm}


class _Adam:
    """Adam state over named parameter blocks."""

    def __init__(self, shapes, cfg):
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}
        self.t = 0
        self.cfg = cfg

    def step(self, values, grads):
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.adam_beta1 ** self.t
        bc2 = 1.0 - c.adam_beta2 ** self.t
        for k, g in grads.items():
            m = self.m[k] = c.adam_beta1 * self.m[k] + (1 - c.adam_beta1) * g
            v = self.v[k] = c.adam_beta2 * self.v[k] + (1 - c.adam_beta2) * g * g
            values[k] = values[k] - c.learning_rate * (m / bc1) / (
                np.sqrt(v / bc2) + c.adam_eps)


def _run_loop(state, grads_fn, loss_fn, prox_fn, opt):
    """Shared optimizer loop: evaluate, step, prox, track the best state.

    grads_fn(state) -> (total, components, grads); loss_fn(state) ->
    (total, components) for the post-update evaluation; prox_fn mutates
    state in place. Losses are recorded at the pre-update state each
    epoch, plus once for the final state.
    """
    adam = _Adam({k: np.shape(v) for k, v in state.items()}, opt)
    traj = {"total": [], "pred": [], "reg": [], "lvm": []}
    best = {"loss": np.inf, "epoch": -1, "state": None}
    calm = 0
    converged = False
    epochs_run = 0

    def record(total, comps, epoch):
        if not np.isfinite(total):
            raise DivergenceError(epoch)
        traj["total"].append(total)
        traj["pred"].append(comps["pred"])
        traj["reg"].append(comps["reg"])
        traj["lvm"].append(comps["lvm"])
        if total < best["loss"]:
            best["loss"] = total
            best["epoch"] = epoch
            best["state"] = {k: np.array(v, copy=True) for k, v in state.items()}

    for epoch in range(opt.max_epochs):
        total, comps, grads = grads_fn(state)
        record(total, comps, epoch)
        if epoch > 0:
            prev = traj["total"][-2]
            rel = abs(total - prev) / max(abs(prev), 1e-12)
            calm = calm + 1 if rel < opt.tol else 0
            if calm >= opt.patience:
                converged = True
                break
        adam.step(state, grads)
        prox_fn(state)
        epochs_run = epoch + 1

    if not converged:
        # state moved after the last recorded evaluation
        total, comps = loss_fn(state)
        record(total, comps, epochs_run)
    return best, traj, epochs_run, converged


def _as_report(best, traj, epochs_run, converged, wall, mode):
    return FitReport(
        loss_total=np.asarray(traj["total"]),
        loss_pred=np.asarray(traj["pred"]),
        loss_reg=np.asarray(traj["reg"]),
        loss_lvm=np.asarray(traj["lvm"]),
        epochs_run=epochs_run,
        converged=converged,
        wall_time=wall,
        best_loss=best["loss"],
        best_epoch=best["epoch"],
        mode=mode,
    )


def fit(dataset, scheme, config, init=None, x_int=None):
    """Minimize prediction loss + elastic net + latent penalty.

    init warm-starts from existing ModelParams (copied, shapes must
    match); x_int may carry a precomputed interaction_matrix for the
    dataset. Returns (best-loss ModelParams, FitReport).
    """
    if config.task != dataset.task:
        raise ValueError(
            f"config task {config.task!r} does not match dataset {dataset.task!r}")
    if dataset.task == "survival" and int(dataset.event.sum()) == 0:
        raise ValueError("survival fit requires at least one event")
    t0 = time.perf_counter()
    pcfg = config.penalties
    opt = config.optimizer
    kind = config.lvm_kind
    intercept = config.fit_intercept and dataset.task != "survival"
    X = dataset.X
    if x_int is None:
        x_int = interaction_matrix(X, scheme)
    if init is None:
        params0 = init_params(dataset.p, config.d, kind, scheme, opt.seed,
                              intercept=intercept)
    else:
        params0 = init.copy()
        if params0.beta.shape != (dataset.p,) or \
                params0.theta_flat.shape != (scheme.n_active,):
            raise ValueError("warm-start params do not match data/scheme shapes")
        if params0.lvm_kind != kind:
            raise ValueError(
                f"warm-start lvm kind {params0.lvm_kind!r} != config {kind!r}")
    loss_pred = _pred_loss_fn(dataset.task)
    use_lvm = kind != "none"
    active_lvm = use_lvm and pcfg.lambda_l > 0

    state = {"beta0": np.float64(params0.beta0),
             "beta": params0.beta.copy(),
             "theta": params0.theta_flat.copy()}
    if use_lvm:
        state["Z"] = params0.Z.copy()
        if kind == "latent_distance":
            state["alpha0"] = np.float64(params0.alpha0)

    p = dataset.p

    def evaluate(st, with_grads):
        scores = X @ st["beta"] + x_int @ st["theta"]
        if intercept:
            scores = scores + st["beta0"]
        pred, dLds = loss_pred(scores, dataset)
        beta_aug = np.concatenate([[st["beta0"]], st["beta"], st["theta"]])
        reg, reg_grad = elastic_net_value_grad(beta_aug, pcfg)
        lvm = 0.0
        if active_lvm:
            lvm = lvm_value(st["theta"], st["Z"], st.get("alpha0"), kind,
                            scheme, pcfg.lambda_l)
        total = pred + reg + lvm
        comps = {"pred": pred, "reg": reg, "lvm": lvm}
        if not with_grads:
            return total, comps
        grads = {"beta": X.T @ dLds + reg_grad[1:p + 1],
                 "theta": x_int.T @ dLds + reg_grad[p + 1:]}
        if intercept:
            grads["beta0"] = np.float64(dLds.sum() + reg_grad[0])
        if use_lvm:
            if active_lvm:
                g_th, g_Z, g_a0 = lvm_grads(st["theta"], st["Z"],
                                            st.get("alpha0"), kind, scheme,
                                            pcfg.lambda_l)
                grads["theta"] = grads["theta"] + g_th
                grads["Z"] = g_Z
            else:
                grads["Z"] = np.zeros_like(st["Z"])
                g_a0 = 0.0
            if kind == "latent_distance":
                grads["alpha0"] = np.float64(g_a0)
        return total, comps, grads

    thresh = opt.learning_rate * pcfg.lambda1

    def prox(st):
        if thresh > 0:
            st["beta"] = soft_threshold(st["beta"], thresh)
            st["theta"] = soft_threshold(st["theta"], thresh)

    best, traj, epochs_run, converged = _run_loop(
        state, lambda st: evaluate(st, True), lambda st: evaluate(st, False),
        prox, opt)

    bs = best["state"]
    if kind == "latent_distance":
        alpha0 = float(bs["alpha0"])
    else:
        alpha0 = None
    params = ModelParams(float(bs["beta0"]), bs["beta"], bs["theta"],
                         bs.get("Z"), alpha0, kind)
    mode = "latent" if active_lvm else "elastic_net"
    report = _as_report(best, traj, epochs_run, converged,
                        time.perf_counter() - t0, mode)
    return params, report


def _accumulate_pair_grads(q, Z, jdx, kdx):
    """Chain rule through the low-rank reconstruction: for weights q per
    pair, d(sum_q q_jk z_j.z_k)/dZ."""
    g = np.zeros_like(Z)
    np.add.at(g, jdx, q[:, None] * Z[kdx])
    np.add.at(g, kdx, q[:, None] * Z[jdx])
    return g


def fm_score_grad_z(x, Z, scheme):
    """Interaction part of the factorization-machine score for one example
    and its gradient with respect to the latent matrix."""
    x_int = expand_interactions(x, scheme)
    recon = np.sum(Z[scheme.jdx] * Z[scheme.kdx], axis=1)
    grad = _accumulate_pair_grads(x_int, Z, scheme.jdx, scheme.kdx)
    return float(x_int @ recon), grad


def fit_fm(dataset, scheme, config, init=None, x_int=None):
    """Factorization-machine baseline: interactions are exactly the
    low-rank reconstruction, with no free theta block.

    The elastic net l2 term applies to beta and to the implied interaction
    entries (through Z); l1 applies to beta only. Returned params carry
    the materialized reconstruction as theta_flat so prediction works like
    any other model.
    """
    if config.task != dataset.task:
        raise ValueError(
            f"config task {config.task!r} does not match dataset {dataset.task!r}")
    if config.d < 1:
        raise ValueError("factorization dimension must be >= 1")
    t0 = time.perf_counter()
    pcfg = config.penalties
    opt = config.optimizer
    intercept = config.fit_intercept and dataset.task != "survival"
    X = dataset.X
    if x_int is None:
        x_int = interaction_matrix(X, scheme)
    if init is None:
        # theta-free scheme keeps the beta draws aligned with other models
        params0 = init_params(dataset.p, config.d, "low_rank",
                              InteractionScheme.none(scheme.n_features),
                              opt.seed, intercept=intercept)
    else:
        params0 = init.copy()
        if params0.Z is None:
            raise ValueError("warm-start params for fm must carry Z")
    loss_pred = _pred_loss_fn(dataset.task)
    jdx, kdx = scheme.jdx, scheme.kdx

    state = {"beta0": np.float64(params0.beta0),
             "beta": params0.beta.copy(),
             "Z": params0.Z.copy()}

    def evaluate(st, with_grads):
        Z = st["Z"]
        recon = np.sum(Z[jdx] * Z[kdx], axis=1)
        scores = X @ st["beta"] + x_int @ recon
        if intercept:
            scores = scores + st["beta0"]
        pred, dLds = loss_pred(scores, dataset)
        beta_aug = np.concatenate([[st["beta0"]], st["beta"]])
        reg_b, reg_grad_b = elastic_net_value_grad(beta_aug, pcfg)
        reg = reg_b + pcfg.lambda2 * float(recon @ recon)
        total = pred + reg
        comps = {"pred": pred, "reg": reg, "lvm": 0.0}
        if not with_grads:
            return total, comps
        q = x_int.T @ dLds + 2.0 * pcfg.lambda2 * recon
        g_Z = _accumulate_pair_grads(q, Z, jdx, kdx)
        grads = {"beta": X.T @ dLds + reg_grad_b[1:], "Z": g_Z}
        if intercept:
            grads["beta0"] = np.float64(dLds.sum() + reg_grad_b[0])
        return total, comps, grads

    thresh = opt.learning_rate * pcfg.lambda1

    def prox(st):
        if thresh > 0:
            st["beta"] = soft_threshold(st["beta"], thresh)

    best, traj, epochs_run, converged = _run_loop(
        state, lambda st: evaluate(st, True), lambda st: evaluate(st, False),
        prox, opt)

    bs = best["state"]
    Z = bs["Z"]
    recon = np.sum(Z[jdx] * Z[kdx], axis=1)
    params = ModelParams(float(bs["beta0"]), bs["beta"], recon, Z, None,
                         "low_rank")
    report = _as_report(best, traj, epochs_run, converged,
                        time.perf_counter() - t0, "fm")
    return params, report
