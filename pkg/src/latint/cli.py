"""Command-line surface.

Subcommands: simulate, fit, predict, evaluate, grid-search, export-latent,
experiment. Configuration comes from a JSON file (unknown keys are
rejected) with a few flag overrides. Exit codes: 0 success, 2 config
error, 3 data error, 4 numeric divergence.
"""

import argparse
import sys
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import figures, io
from .core import (InteractionScheme, apply_standardization, score_matrix,
                   standardization_stats)
from .errors import (ConfigError, DataError, DivergenceError,
                     SearchFailedError, StateError)
from .experiment import run_experiment
from .metrics import (EvalReport, auc, brier_curve, c_index,
                      default_time_grid, integrated_brier, rmse)
from .penalties import PenaltyConfig
from .predictors import breslow_baseline, predict, survival_curves
from .trainer import FitConfig, OptimizerConfig, fit, fit_fm
from .tuner import GridSpec, grid_search

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")


_SIM_KEYS = ("task", "n", "p", "d_true", "lvm_kind", "seed", "sigma_eps2",
             "sigma_s2", "sigma_theta2", "sigma_y2", "noise_outside_link")
_MODEL_KEYS = ("lvm_kind", "d", "fm", "fit_intercept")
_PENALTY_KEYS = ("lambda1", "lambda2", "lambda_l")
_OPT_KEYS = ("learning_rate", "adam_beta1", "adam_beta2", "adam_eps",
             "max_epochs", "tol", "patience", "seed")
_FIT_KEYS = ("task", "data", "target", "time_column", "event_column",
             "features", "mask", "model", "penalties", "optimizer",
             "standardize", "init_model", "out_prefix")
_GRID_KEYS = ("lambda1", "lambda2", "lambda_l", "learning_rate", "d",
              "folds", "selection")
_EVAL_KEYS = ("task", "data", "target", "time_column", "event_column",
              "metrics", "out_prefix")
_EXP_KEYS = ("kind", "task", "n", "n_test", "d_true", "sim_lvm_kind",
             "sigma_eps2", "sigma_s2", "sigma_theta2", "sigma_y2",
             "p_list", "p", "seeds", "methods", "model", "grid",
             "optimizer", "lambda_l_values", "fixed", "out_prefix")
_EXP_GRID_KEYS = ("lambda1", "lambda2", "lambda_l", "lr", "d_fm", "folds")
_FIXED_KEYS = ("lambda1", "lambda2", "learning_rate")


def _require(cfg, keys, where):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"missing required keys in {where}: {missing}")


def _sim_config(section, seed_override):
    from .simgen import SimConfig
    _check_keys(section, _SIM_KEYS, "sim")
    _require(section, ("task", "n", "p", "d_true"), "sim")
    task = section["task"]
    if task not in ("regression", "classification"):
        raise ConfigError(f"sim task must be regression or classification, "
                          f"got {task!r}")
    kw = {k: v for k, v in section.items() if k != "task"}
    kw.setdefault("lvm_kind",
                  "low_rank" if task == "regression" else "latent_distance")
    if seed_override is not None:
        kw["seed"] = seed_override
    try:
        return task, SimConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid sim config: {exc}") from exc


def scheme_from_mask_spec(feature_names, spec):
    """Interaction scheme from the config mask specification.

    "all" (default) keeps every pair, "none" drops all interactions, a
    {"pairs": [[name, name], ...]} object keeps the listed pairs, and a
    {"groups": {"left": [...], "right": [...]}} object keeps exactly the
    cross pairs between the two feature sets.
    """
    p = len(feature_names)
    index = {name: i for i, name in enumerate(feature_names)}

    def to_idx(name):
        if name not in index:
            raise ConfigError(f"mask references unknown feature {name!r}")
        return index[name]

    if spec is None or spec == "all":
        return InteractionScheme.full(p)
    if spec == "none":
        return InteractionScheme.none(p)
    if isinstance(spec, dict) and "pairs" in spec:
        _check_keys(spec, ("pairs",), "mask")
        pairs = [(to_idx(a), to_idx(b)) for a, b in spec["pairs"]]
        try:
            return InteractionScheme.from_pairs(p, pairs)
        except ValueError as exc:
            raise ConfigError(f"invalid mask pairs: {exc}") from exc
    if isinstance(spec, dict) and "groups" in spec:
        _check_keys(spec, ("groups",), "mask")
        groups = spec["groups"]
        _check_keys(groups, ("left", "right"), "mask.groups")
        _require(groups, ("left", "right"), "mask.groups")
        try:
            return InteractionScheme.bipartite(
                p, [to_idx(n) for n in groups["left"]],
                [to_idx(n) for n in groups["right"]])
        except ValueError as exc:
            raise ConfigError(f"invalid mask groups: {exc}") from exc
    raise ConfigError(f"unrecognized mask specification: {spec!r}")


def _fit_config_from(cfg, task, seed_override):
    model = dict(cfg.get("model", {}))
    _check_keys(model, _MODEL_KEYS, "model")
    pen = dict(cfg.get("penalties", {}))
    _check_keys(pen, _PENALTY_KEYS, "penalties")
    opt = dict(cfg.get("optimizer", {}))
    _check_keys(opt, _OPT_KEYS, "optimizer")
    if seed_override is not None:
        opt["seed"] = seed_override
    fm = bool(model.pop("fm", False))
    try:
        config = FitConfig(
            task=task,
            lvm_kind=model.get("lvm_kind", "none"),
            d=int(model.get("d", 2)),
            penalties=PenaltyConfig(**pen),
            optimizer=OptimizerConfig(**opt),
            fit_intercept=bool(model.get("fit_intercept", True)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid fit config: {exc}") from exc
    return config, fm


def _load_fit_dataset(cfg, args):
    task = cfg.get("task")
    if task not in ("regression", "classification", "survival"):
        raise ConfigError(f"invalid task {task!r}")
    _require(cfg, ("data",), "config")
    data = io.load_dataset_csv(
        cfg["data"], task,
        target=cfg.get("target", "y"),
        time_col=cfg.get("time_column", "time"),
        event_col=cfg.get("event_column", "event"),
        features=cfg.get("features"))
    return task, data


def _resolve_standardize(cfg, args):
    if getattr(args, "standardize", None) in ("on", "off"):
        return args.standardize == "on"
    return bool(cfg.get("standardize", True))


def _maybe_standardize(data, on):
    if not on:
        return data, None
    mean, scale = standardization_stats(data.X)
    std = {"mean": mean.tolist(), "scale": scale.tolist()}
    return data.with_X(apply_standardization(data.X, mean, scale)), std


def _provenance(cfg, config):
    return {"seed": config.optimizer.seed, "config_hash": io.config_hash(cfg)}


def _fit_and_package(cfg, data, scheme, config, fm, std):
    init = None
    if cfg.get("init_model"):
        warm = io.load_model(cfg["init_model"])
        init = warm.params
    if fm:
        params, report = fit_fm(data, scheme, config, init=init)
    else:
        params, report = fit(data, scheme, config, init=init)
    baseline = None
    time_grid = None
    if data.task == "survival":
        risk = score_matrix(params, data.X, scheme, include_intercept=False)
        baseline = breslow_baseline(risk, data.time, data.event)
        time_grid = default_time_grid(data.time, data.event).tolist()
    model = io.SavedModel(params, scheme, data.feature_names, data.task,
                          report.mode, std, baseline, time_grid,
                          _provenance(cfg, config))
    return model, report


def _report_json(report):
    return {
        "loss_total": report.loss_total.tolist(),
        "loss_pred": report.loss_pred.tolist(),
        "loss_reg": report.loss_reg.tolist(),
        "loss_lvm": report.loss_lvm.tolist(),
        "epochs_run": report.epochs_run,
        "converged": report.converged,
        "wall_time": report.wall_time,
        "best_loss": report.best_loss,
        "best_epoch": report.best_epoch,
        "mode": report.mode,
    }


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args):
    from .simgen import gen_linear, gen_logistic
    cfg = io.load_json(args.config)
    _check_keys(cfg, ("sim", "out_prefix"), "config")
    _require(cfg, ("sim",), "config")
    task, sim_cfg = _sim_config(cfg["sim"], args.seed)
    gen = gen_linear if task == "regression" else gen_logistic
    data, truth = gen(sim_cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = cfg.get("out_prefix", "sim")
    try:
        io.write_dataset_csv(data, out / f"{prefix}_data.csv")
        io.write_json(out / f"{prefix}_truth.json", {
            "beta": truth.beta.tolist(),
            "theta_flat": truth.theta_flat.tolist(),
            "Z": truth.Z.tolist(),
            "alpha0": truth.alpha0,
            "lvm_kind": truth.lvm_kind,
            "sim": {"task": task, "n": sim_cfg.n, "p": sim_cfg.p,
                    "d_true": sim_cfg.d_true, "lvm_kind": sim_cfg.lvm_kind,
                    "seed": sim_cfg.seed,
                    "sigma_eps2": sim_cfg.sigma_eps2,
                    "sigma_s2": sim_cfg.sigma_s2,
                    "sigma_theta2": sim_cfg.sigma_theta2,
                    "sigma_y2": sim_cfg.sigma_y2,
                    "noise_outside_link": sim_cfg.noise_outside_link},
        })
    except OSError as exc:
        raise DataError(f"cannot write outputs: {exc}") from exc
    print(f"wrote {out / f'{prefix}_data.csv'} and {out / f'{prefix}_truth.json'}")
    return EXIT_OK


def cmd_fit(args):
    cfg = io.load_json(args.config)
    _check_keys(cfg, _FIT_KEYS, "config")
    task, data = _load_fit_dataset(cfg, args)
    data, std = _maybe_standardize(data, _resolve_standardize(cfg, args))
    scheme = scheme_from_mask_spec(data.feature_names, cfg.get("mask", "all"))
    config, fm = _fit_config_from(cfg, task, args.seed)
    model, report = _fit_and_package(cfg, data, scheme, config, fm, std)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = cfg.get("out_prefix", "model")
    io.save_model(model, out / f"{prefix}.json")
    io.write_json(out / f"{prefix}_fit_report.json", _report_json(report))
    print(f"fit done: mode={report.mode} epochs={report.epochs_run} "
          f"best_loss={report.best_loss:.6g}")
    print(f"wrote {out / f'{prefix}.json'}")
    return EXIT_OK


def _predictions_table(model, X):
    params, scheme = model.params, model.scheme
    if model.standardization is not None:
        X = apply_standardization(X, np.asarray(model.standardization["mean"]),
                                  np.asarray(model.standardization["scale"]))
    if model.task == "survival":
        risk = score_matrix(params, X, scheme, include_intercept=False)
        header = ["risk_score"]
        cols = [risk]
        if model.baseline is not None and model.time_grid:
            grid = np.asarray(model.time_grid)
            S = survival_curves(params, X, scheme, model.baseline, grid)
            header += [f"S@{io.fmt_num(t)}" for t in grid]
            cols += [S[:, k] for k in range(grid.size)]
        return header, np.column_stack(cols)
    scores = score_matrix(params, X, scheme)
    if model.task == "classification":
        prob = np.clip(expit(scores), 1e-12, 1.0 - 1e-12)
        return ["score", "probability"], np.column_stack([scores, prob])
    return ["score", "prediction"], np.column_stack([scores, scores])


def cmd_predict(args):
    model = io.load_model(args.model)
    X = io.load_features_csv(args.data, model.feature_names)
    header, table = _predictions_table(model, X)
    out_path = Path(args.out) if args.out else \
        Path(args.out_dir) / "predictions.csv"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    io.write_csv(out_path, header, table.tolist())
    print(f"wrote {out_path}")
    return EXIT_OK


_METRIC_CHOICES = ("rmse", "auc", "c_index", "brier", "ibs")


def cmd_evaluate(args):
    cfg = io.load_json(args.config)
    _check_keys(cfg, _EVAL_KEYS, "config")
    model = io.load_model(args.model)
    task = cfg.get("task", model.task)
    if task != model.task:
        raise ConfigError(f"config task {task!r} != model task {model.task!r}")
    data = io.load_dataset_csv(
        cfg["data"], task, target=cfg.get("target", "y"),
        time_col=cfg.get("time_column", "time"),
        event_col=cfg.get("event_column", "event"),
        features=list(model.feature_names))
    if model.standardization is not None:
        data = data.with_X(apply_standardization(
            data.X, np.asarray(model.standardization["mean"]),
            np.asarray(model.standardization["scale"])))
    metrics = cfg.get("metrics") or (
        {"regression": ["rmse"], "classification": ["auc"],
         "survival": ["c_index", "ibs"]}[task])
    for m in metrics:
        if m not in _METRIC_CHOICES:
            raise ConfigError(f"unknown metric {m!r}")

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = cfg.get("out_prefix", "eval")
    reports = []
    csv_rows = []
    brier_payload = None
    pred = predict(model.params, data, model.scheme)
    for m in metrics:
        if m == "rmse":
            value = rmse(data.y, pred)
        elif m == "auc":
            value = auc(pred, data.y)
        elif m == "c_index":
            value = c_index(pred, data.time, data.event)
        elif m in ("brier", "ibs"):
            if model.baseline is None or not model.time_grid:
                raise StateError("brier/ibs need a survival model with a "
                                 "stored baseline hazard")
            grid = np.asarray(model.time_grid)
            S = survival_curves(model.params, data.X, model.scheme,
                                model.baseline, grid)
            curve = brier_curve(S, data.time, data.event, grid)
            brier_payload = (grid, curve)
            if m == "brier":
                reports.append({"metric": "brier",
                                "grid": grid.tolist(),
                                "values": curve.tolist()})
                continue
            value = integrated_brier(curve, grid)
        report = EvalReport(m, [float(value)])
        reports.append(report.to_dict())
        csv_rows.append(report.csv_row())
    io.write_json(out / f"{prefix}_report.json", {"task": task,
                                                  "metrics": reports})
    io.write_csv(out / f"{prefix}_report.csv", EvalReport.CSV_HEADER, csv_rows)
    if brier_payload is not None and not args.no_plots:
        grid, curve = brier_payload
        figures.save_brier_curve(grid, curve, out / f"{prefix}_brier.png")
    for r in reports:
        if "mean" in r:
            print(f"{r['metric']}: {r['mean']:.6g}")
    print(f"wrote {out / f'{prefix}_report.json'}")
    return EXIT_OK


def cmd_grid_search(args):
    cfg = io.load_json(args.config)
    _check_keys(cfg, _FIT_KEYS + ("grid",), "config")
    task, data = _load_fit_dataset(cfg, args)
    data, std = _maybe_standardize(data, _resolve_standardize(cfg, args))
    scheme = scheme_from_mask_spec(data.feature_names, cfg.get("mask", "all"))
    template, fm = _fit_config_from(cfg, task, args.seed)
    grid_cfg = dict(cfg.get("grid", {}))
    _check_keys(grid_cfg, _GRID_KEYS, "grid")
    kw = {}
    for src, dst in (("lambda1", "lambda1_grid"), ("lambda2", "lambda2_grid"),
                     ("lambda_l", "lambda_l_grid"), ("learning_rate", "lr_grid"),
                     ("d", "d_grid")):
        if src in grid_cfg:
            kw[dst] = tuple(grid_cfg[src])
    if "folds" in grid_cfg:
        kw["folds"] = int(grid_cfg["folds"])
    if "selection" in grid_cfg:
        kw["selection"] = grid_cfg["selection"]
    try:
        grid = GridSpec(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc

    best_cfg, table = grid_search(data, scheme, grid, template, fm=fm,
                                  n_jobs=args.jobs)
    model, report = _fit_and_package(cfg, data, scheme, best_cfg, fm, std)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = cfg.get("out_prefix", "best")
    io.save_model(model, out / f"{prefix}.json")
    io.write_json(out / f"{prefix}_fit_report.json", _report_json(report))
    header = ["lambda1", "lambda2", "lambda_l", "learning_rate", "d",
              "metric", "cv_score", "error"]
    rows = [[r["lambda1"], r["lambda2"], r["lambda_l"], r["learning_rate"],
             r["d"], r["metric"],
             "" if r["cv_score"] is None else r["cv_score"],
             r["error"] or ""] for r in table]
    io.write_csv(out / f"{prefix}_cv_table.csv", header, rows)
    print(f"best: lambda1={best_cfg.penalties.lambda1} "
          f"lambda2={best_cfg.penalties.lambda2} "
          f"lambda_l={best_cfg.penalties.lambda_l} "
          f"lr={best_cfg.optimizer.learning_rate} d={best_cfg.d}")
    print(f"wrote {out / f'{prefix}.json'} and {out / f'{prefix}_cv_table.csv'}")
    return EXIT_OK


def cmd_export_latent(args):
    model = io.load_model(args.model)
    params = model.params
    if params.lvm_kind == "none" or params.Z is None:
        raise StateError("model has no latent block to export")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.model).stem
    d = params.Z.shape[1]
    coord_path = out / f"{stem}_latent.csv"
    io.write_csv(coord_path, ["feature"] + [f"z{i + 1}" for i in range(d)],
                 [[name] + list(row) for name, row
                  in zip(model.feature_names, params.Z)])
    if params.lvm_kind == "latent_distance":
        rel = np.sqrt(((params.Z[:, None, :] - params.Z[None, :, :]) ** 2)
                      .sum(axis=2))
        rel_name = "distance"
    else:
        rel = params.Z @ params.Z.T
        rel_name = "dot_product"
    pairs_path = out / f"{stem}_pairs.csv"
    names = model.feature_names
    rows = [[names[j], names[k], rel[j, k]]
            for j in range(len(names)) for k in range(len(names))]
    io.write_csv(pairs_path, ["feature_a", "feature_b", rel_name], rows)
    if not args.no_plots:
        figures.save_latent_scatter(names, params.Z,
                                    out / f"{stem}_latent.png")
    print(f"wrote {coord_path} and {pairs_path}")
    return EXIT_OK


def cmd_experiment(args):
    cfg = io.load_json(args.config)
    _check_keys(cfg, ("experiment",), "config")
    _require(cfg, ("experiment",), "config")
    exp = dict(cfg["experiment"])
    _check_keys(exp, _EXP_KEYS, "experiment")
    kind = exp.get("kind", "method_comparison")
    if kind not in ("method_comparison", "lambda_sweep"):
        raise ConfigError(f"unknown experiment kind {kind!r}")
    exp["kind"] = kind
    if exp.get("task") not in ("regression", "classification"):
        raise ConfigError("experiment task must be regression or classification")
    exp.setdefault("n", 1000)
    exp.setdefault("n_test", exp["n"])
    exp.setdefault("d_true", 2)
    exp.setdefault("sim_lvm_kind",
                   "low_rank" if exp["task"] == "regression"
                   else "latent_distance")
    exp.setdefault("model", {})
    _check_keys(exp["model"], ("lvm_kind", "d"), "experiment.model")
    exp["model"] = {"lvm_kind": exp["model"].get("lvm_kind",
                                                 exp["sim_lvm_kind"]),
                    "d": int(exp["model"].get("d", 2))}
    if "grid" in exp:
        _check_keys(exp["grid"], _EXP_GRID_KEYS, "experiment.grid")
    if "fixed" in exp:
        _check_keys(exp["fixed"], _FIXED_KEYS, "experiment.fixed")
    if "optimizer" in exp:
        _check_keys(exp["optimizer"], _OPT_KEYS, "experiment.optimizer")
    if kind == "method_comparison":
        _require(exp, ("p_list", "seeds", "methods"), "experiment")
    else:
        _require(exp, ("p", "seeds", "lambda_l_values"), "experiment")

    rows, failures = run_experiment(exp, jobs=args.jobs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = exp.get("out_prefix", "experiment")
    if kind == "method_comparison":
        header = ["method", "p", "seed", "metric", "value", "lambda1",
                  "lambda2", "lambda_l", "learning_rate", "d"]
    else:
        header = ["lambda_l", "seed", "metric", "value"]
    io.write_csv(out / f"{prefix}_results.csv", header,
                 [[r[h] for h in header] for r in rows])
    io.write_json(out / f"{prefix}_failures.json", failures)
    if rows and not args.no_plots:
        if kind == "method_comparison":
            figures.save_metric_vs_p(rows, out / f"{prefix}_results.png")
        else:
            figures.save_metric_vs_lambda(rows, out / f"{prefix}_results.png")
    print(f"{len(rows)} result rows, {len(failures)} failures")
    print(f"wrote {out / f'{prefix}_results.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="latint",
        description="Linear predictors with latent-structured interactions")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override config seeds")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel worker bound")
        p.add_argument("--standardize", choices=("on", "off"), default=None,
                       help="override feature standardization")
        p.add_argument("--no-plots", action="store_true",
                       help="skip figure rendering")
        return p

    common(sub.add_parser("simulate", help="generate a synthetic dataset"))
    common(sub.add_parser("fit", help="fit a model from a dataset CSV"))

    p = common(sub.add_parser("predict", help="predictions from a saved model"),
               config=False)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None, help="output CSV path")

    p = common(sub.add_parser("evaluate", help="score a saved model"))
    p.add_argument("--model", required=True)

    common(sub.add_parser("grid-search",
                          help="hyperparameter search plus final fit"))

    p = common(sub.add_parser("export-latent",
                              help="latent coordinates and pair table"),
               config=False)
    p.add_argument("--model", required=True)

    common(sub.add_parser("experiment", help="simulation study sweep"))
    return parser


_DISPATCH = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "grid-search": cmd_grid_search,
    "export-latent": cmd_export_latent,
    "experiment": cmd_experiment,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DivergenceError, SearchFailedError) as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except StateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
