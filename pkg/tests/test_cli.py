import csv
import json
from pathlib import Path

import numpy as np
import numpy.testing as npt
import pytest

from latint import (Dataset, FitConfig, InteractionScheme, OptimizerConfig,
                    PenaltyConfig, SimConfig, fit, gen_linear, predict, rmse)
from latint.cli import main
from latint.core import reconstruct_theta
from latint.io import (load_dataset_csv, load_json, load_model,
                       write_dataset_csv)

FIXTURES = Path(__file__).parent / "fixtures"


def run(*argv):
    return main([str(a) for a in argv])


def write_config(path, obj):
    path.write_text(json.dumps(obj))
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

SIM_CFG = {"sim": {"task": "regression", "n": 40, "p": 5, "d_true": 2,
                   "seed": 3}, "out_prefix": "toy"}


def test_simulate_deterministic_and_loadable(tmp_path):
    cfg = write_config(tmp_path / "sim.json", SIM_CFG)
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert run("simulate", "--config", cfg, "--out-dir", a) == 0
    assert run("simulate", "--config", cfg, "--out-dir", b) == 0
    assert (a / "toy_data.csv").read_bytes() == (b / "toy_data.csv").read_bytes()
    assert (a / "toy_truth.json").read_bytes() == \
        (b / "toy_truth.json").read_bytes()

    loaded = load_dataset_csv(a / "toy_data.csv", "regression")
    data, truth = gen_linear(SimConfig(n=40, p=5, d_true=2, seed=3))
    npt.assert_array_equal(loaded.X, data.X)
    npt.assert_array_equal(loaded.y, data.y)
    saved_truth = load_json(a / "toy_truth.json")
    npt.assert_array_equal(saved_truth["beta"], truth.beta)


def test_simulate_unknown_key_rejected(tmp_path):
    cfg = write_config(tmp_path / "sim.json",
                       {"sim": dict(SIM_CFG["sim"], bogus=1)})
    assert run("simulate", "--config", cfg, "--out-dir", tmp_path) == 2


# ---------------------------------------------------------------------------
# fit / predict round trips
# ---------------------------------------------------------------------------

def _fit_cfg(data_path, **kw):
    cfg = {"task": "regression", "data": str(data_path), "target": "y",
           "standardize": False,
           "model": {"lvm_kind": "low_rank", "d": 2},
           "penalties": {"lambda1": 0.0, "lambda2": 0.01, "lambda_l": 0.1},
           "optimizer": {"learning_rate": 0.05, "max_epochs": 150, "seed": 5}}
    cfg.update(kw)
    return cfg


def test_fit_then_predict_matches_in_process(tmp_path):
    data_path = FIXTURES / "regression_small.csv"
    cfg = write_config(tmp_path / "fit.json", _fit_cfg(data_path))
    assert run("fit", "--config", cfg, "--out-dir", tmp_path) == 0
    model = load_model(tmp_path / "model.json")
    assert model.mode == "latent"

    assert run("predict", "--model", tmp_path / "model.json",
               "--data", data_path, "--out", tmp_path / "pred.csv") == 0
    rows = read_rows(tmp_path / "pred.csv")

    data = load_dataset_csv(data_path, "regression")
    expected = predict(model.params, data, model.scheme)
    got = np.array([float(r["prediction"]) for r in rows])
    npt.assert_array_equal(got, expected)  # full-precision CSV round trip


def test_fit_lambda_l_zero_tagged_elastic_net(tmp_path):
    cfg = _fit_cfg(FIXTURES / "regression_small.csv")
    cfg["penalties"]["lambda_l"] = 0.0
    path = write_config(tmp_path / "fit.json", cfg)
    assert run("fit", "--config", path, "--out-dir", tmp_path) == 0
    assert load_model(tmp_path / "model.json").mode == "elastic_net"


def test_fit_ridge_oracle_via_warm_start_chain(tmp_path):
    rng = np.random.default_rng(1)
    X = rng.standard_normal((50, 5))
    y = X @ rng.standard_normal(5) + 0.1 * rng.standard_normal(50)
    data = Dataset(X, [f"x{i}" for i in range(5)], "regression", y=y)
    data_path = tmp_path / "ridge.csv"
    write_dataset_csv(data, data_path)
    lam2 = 0.1
    base = {"task": "regression", "data": str(data_path), "target": "y",
            "standardize": False, "mask": "none",
            "model": {"lvm_kind": "none", "fit_intercept": False},
            "penalties": {"lambda2": lam2}}
    prev = None
    for i, lr in enumerate((0.05, 0.01, 1e-3, 1e-4)):
        cfg = dict(base, out_prefix=f"m{i}",
                   optimizer={"learning_rate": lr, "max_epochs": 3000,
                              "tol": 0.0, "seed": 0})
        if prev is not None:
            cfg["init_model"] = str(tmp_path / f"{prev}.json")
        path = write_config(tmp_path / f"cfg{i}.json", cfg)
        assert run("fit", "--config", path, "--out-dir", tmp_path) == 0
        prev = f"m{i}"
    model = load_model(tmp_path / f"{prev}.json")
    oracle = np.linalg.solve(X.T @ X + 50 * lam2 * np.eye(5), X.T @ y)
    assert np.max(np.abs(model.params.beta - oracle)) < 1e-3


def test_predict_with_permuted_columns(tmp_path):
    data_path = FIXTURES / "regression_small.csv"
    cfg = write_config(tmp_path / "fit.json", _fit_cfg(data_path))
    assert run("fit", "--config", cfg, "--out-dir", tmp_path) == 0

    header, rows = [], []
    with open(data_path, newline="") as fh:
        r = list(csv.reader(fh))
        header, rows = r[0], r[1:]
    perm = [3, 1, 0, 5, 2, 4, 6]
    shuffled = tmp_path / "shuffled.csv"
    with open(shuffled, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([header[i] for i in perm])
        for row in rows:
            w.writerow([row[i] for i in perm])

    assert run("predict", "--model", tmp_path / "model.json",
               "--data", data_path, "--out", tmp_path / "p1.csv") == 0
    assert run("predict", "--model", tmp_path / "model.json",
               "--data", shuffled, "--out", tmp_path / "p2.csv") == 0
    assert (tmp_path / "p1.csv").read_bytes() == (tmp_path / "p2.csv").read_bytes()


def test_predict_missing_column_is_data_error(tmp_path):
    data_path = FIXTURES / "regression_small.csv"
    cfg = write_config(tmp_path / "fit.json", _fit_cfg(data_path))
    assert run("fit", "--config", cfg, "--out-dir", tmp_path) == 0
    broken = tmp_path / "broken.csv"
    with open(data_path) as fh:
        lines = fh.read().splitlines()
    cols = lines[0].split(",")
    keep = [i for i, c in enumerate(cols) if c != "x3"]
    with open(broken, "w") as fh:
        for line in lines:
            cells = line.split(",")
            fh.write(",".join(cells[i] for i in keep) + "\n")
    assert run("predict", "--model", tmp_path / "model.json",
               "--data", broken, "--out", tmp_path / "p.csv") == 3


@pytest.mark.filterwarnings("ignore:overflow", "ignore:invalid value")
def test_fit_divergence_exit_code(tmp_path):
    cfg = _fit_cfg(FIXTURES / "regression_small.csv")
    cfg["optimizer"] = {"learning_rate": 1e200, "max_epochs": 20, "seed": 0}
    path = write_config(tmp_path / "fit.json", cfg)
    assert run("fit", "--config", path, "--out-dir", tmp_path) == 4


def test_model_file_roundtrip_byte_identical(tmp_path):
    from latint.io import save_model
    cfg = write_config(tmp_path / "fit.json",
                       _fit_cfg(FIXTURES / "regression_small.csv"))
    assert run("fit", "--config", cfg, "--out-dir", tmp_path) == 0
    first = (tmp_path / "model.json").read_bytes()
    model = load_model(tmp_path / "model.json")
    save_model(model, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == first


def test_model_version_refusal(tmp_path):
    cfg = write_config(tmp_path / "fit.json",
                       _fit_cfg(FIXTURES / "regression_small.csv"))
    assert run("fit", "--config", cfg, "--out-dir", tmp_path) == 0
    doc = json.loads((tmp_path / "model.json").read_text())
    doc["format_version"] = "2.0"
    (tmp_path / "model.json").write_text(json.dumps(doc))
    assert run("predict", "--model", tmp_path / "model.json",
               "--data", FIXTURES / "regression_small.csv",
               "--out", tmp_path / "p.csv") == 3


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def test_evaluate_matches_direct_metric(tmp_path):
    data_path = FIXTURES / "regression_small.csv"
    cfg = write_config(tmp_path / "fit.json", _fit_cfg(data_path))
    assert run("fit", "--config", cfg, "--out-dir", tmp_path) == 0
    eval_cfg = write_config(tmp_path / "eval.json",
                            {"task": "regression", "data": str(data_path),
                             "metrics": ["rmse"]})
    assert run("evaluate", "--model", tmp_path / "model.json",
               "--config", eval_cfg, "--out-dir", tmp_path) == 0
    report = load_json(tmp_path / "eval_report.json")
    model = load_model(tmp_path / "model.json")
    data = load_dataset_csv(data_path, "regression")
    want = rmse(data.y, predict(model.params, data, model.scheme))
    assert report["metrics"][0]["mean"] == pytest.approx(want, rel=1e-12)


def test_evaluate_perfect_predictions_zero_rmse(tmp_path):
    # dataset whose target is exactly the model's score
    rng = np.random.default_rng(2)
    X = rng.standard_normal((30, 3))
    data = Dataset(X, ["x1", "x2", "x3"], "regression", y=np.zeros(30))
    data_path = tmp_path / "zero.csv"
    write_dataset_csv(data, data_path)
    cfg = {"task": "regression", "data": str(data_path), "standardize": False,
           "mask": "none",
           "model": {"lvm_kind": "none", "fit_intercept": False},
           "penalties": {"lambda1": 1e3},
           "optimizer": {"max_epochs": 50, "seed": 0}}
    path = write_config(tmp_path / "fit.json", cfg)
    assert run("fit", "--config", path, "--out-dir", tmp_path) == 0
    eval_cfg = write_config(tmp_path / "eval.json",
                            {"task": "regression", "data": str(data_path)})
    assert run("evaluate", "--model", tmp_path / "model.json",
               "--config", eval_cfg, "--out-dir", tmp_path) == 0
    report = load_json(tmp_path / "eval_report.json")
    assert report["metrics"][0]["mean"] == 0.0


def test_evaluate_single_class_auc_is_structured_error(tmp_path):
    data_path = FIXTURES / "classification_small.csv"
    cfg = dict(_fit_cfg(data_path), task="classification")
    cfg["model"] = {"lvm_kind": "latent_distance", "d": 2}
    path = write_config(tmp_path / "fit.json", cfg)
    assert run("fit", "--config", path, "--out-dir", tmp_path) == 0

    data = load_dataset_csv(data_path, "classification")
    single = Dataset(data.X, data.feature_names, "classification",
                     y=np.ones(data.n))
    single_path = tmp_path / "single.csv"
    write_dataset_csv(single, single_path)
    eval_cfg = write_config(tmp_path / "eval.json",
                            {"task": "classification",
                             "data": str(single_path), "metrics": ["auc"]})
    assert run("evaluate", "--model", tmp_path / "model.json",
               "--config", eval_cfg, "--out-dir", tmp_path) == 3


def test_survival_pipeline_end_to_end(tmp_path):
    data_path = FIXTURES / "survival_small.csv"
    cfg = {"task": "survival", "data": str(data_path),
           "time_column": "time", "event_column": "event",
           "standardize": True, "mask": "all",
           "model": {"lvm_kind": "latent_distance", "d": 2},
           "penalties": {"lambda1": 0.0, "lambda2": 0.1, "lambda_l": 0.1},
           "optimizer": {"learning_rate": 0.05, "max_epochs": 150, "seed": 1}}
    path = write_config(tmp_path / "fit.json", cfg)
    assert run("fit", "--config", path, "--out-dir", tmp_path) == 0
    model = load_model(tmp_path / "model.json")
    assert model.baseline is not None
    assert len(model.time_grid) == 30

    eval_cfg = write_config(tmp_path / "eval.json",
                            {"task": "survival", "data": str(data_path),
                             "metrics": ["c_index", "ibs", "brier"]})
    assert run("evaluate", "--model", tmp_path / "model.json",
               "--config", eval_cfg, "--out-dir", tmp_path) == 0
    report = load_json(tmp_path / "eval_report.json")
    by_name = {m["metric"]: m for m in report["metrics"]}
    assert 0.5 < by_name["c_index"]["mean"] <= 1.0
    assert 0.0 <= by_name["ibs"]["mean"] <= 1.0
    assert len(by_name["brier"]["values"]) == 30
    assert (tmp_path / "eval_brier.png").exists()

    assert run("predict", "--model", tmp_path / "model.json",
               "--data", data_path, "--out", tmp_path / "p.csv") == 0
    rows = read_rows(tmp_path / "p.csv")
    assert "risk_score" in rows[0]
    surv_cols = [c for c in rows[0] if c.startswith("S@")]
    assert len(surv_cols) == 30


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------

def test_grid_search_single_cell_equals_fit(tmp_path):
    data_path = FIXTURES / "regression_small.csv"
    fit_cfg = _fit_cfg(data_path)
    path = write_config(tmp_path / "fit.json", fit_cfg)
    assert run("fit", "--config", path, "--out-dir", tmp_path / "f") == 0

    gs_cfg = dict(fit_cfg)
    gs_cfg["grid"] = {"lambda1": [0.0], "lambda2": [0.01],
                      "lambda_l": [0.1], "learning_rate": [0.05],
                      "folds": 2}
    path = write_config(tmp_path / "gs.json", gs_cfg)
    assert run("grid-search", "--config", path,
               "--out-dir", tmp_path / "g") == 0
    m_fit = load_model(tmp_path / "f" / "model.json")
    m_gs = load_model(tmp_path / "g" / "best.json")
    npt.assert_array_equal(m_fit.params.beta, m_gs.params.beta)
    npt.assert_array_equal(m_fit.params.theta_flat, m_gs.params.theta_flat)
    table = read_rows(tmp_path / "g" / "best_cv_table.csv")
    assert len(table) == 1


def test_grid_search_table_row_count(tmp_path):
    data_path = FIXTURES / "regression_small.csv"
    gs_cfg = dict(_fit_cfg(data_path))
    gs_cfg["optimizer"]["max_epochs"] = 40
    gs_cfg["grid"] = {"lambda1": [0.0, 0.1], "lambda2": [0.01, 1.0],
                      "lambda_l": [0.0, 0.1], "learning_rate": [0.05],
                      "folds": 2}
    path = write_config(tmp_path / "gs.json", gs_cfg)
    assert run("grid-search", "--config", path, "--out-dir", tmp_path,
               "--jobs", 2) == 0
    table = read_rows(tmp_path / "best_cv_table.csv")
    assert len(table) == 8


# ---------------------------------------------------------------------------
# export-latent
# ---------------------------------------------------------------------------

def test_export_latent_tables(tmp_path):
    data_path = FIXTURES / "regression_small.csv"
    cfg = write_config(tmp_path / "fit.json", _fit_cfg(data_path))
    assert run("fit", "--config", cfg, "--out-dir", tmp_path) == 0
    assert run("export-latent", "--model", tmp_path / "model.json",
               "--out-dir", tmp_path) == 0

    coords = read_rows(tmp_path / "model_latent.csv")
    assert len(coords) == 6
    assert set(coords[0]) == {"feature", "z1", "z2"}

    model = load_model(tmp_path / "model.json")
    pair_rows = read_rows(tmp_path / "model_pairs.csv")
    got = {(r["feature_a"], r["feature_b"]): float(r["dot_product"])
           for r in pair_rows}
    names = model.feature_names
    for j in range(6):
        assert got[(names[j], names[j])] == pytest.approx(
            model.params.Z[j] @ model.params.Z[j])
        for k in range(6):
            assert got[(names[j], names[k])] == got[(names[k], names[j])]
    # off-diagonal dot products equal the latent reconstruction
    recon = reconstruct_theta(model.params.Z, None, "low_rank", model.scheme)
    for (j, k), value in zip(model.scheme.active_pairs, recon):
        assert got[(names[j], names[k])] == pytest.approx(value)
    assert (tmp_path / "model_latent.png").exists()


def test_export_latent_requires_latent_block(tmp_path):
    cfg = _fit_cfg(FIXTURES / "regression_small.csv")
    cfg["model"] = {"lvm_kind": "none"}
    cfg["penalties"]["lambda_l"] = 0.0
    path = write_config(tmp_path / "fit.json", cfg)
    assert run("fit", "--config", path, "--out-dir", tmp_path) == 0
    assert run("export-latent", "--model", tmp_path / "model.json",
               "--out-dir", tmp_path) == 3


def test_export_latent_distance_table(tmp_path):
    cfg = dict(_fit_cfg(FIXTURES / "classification_small.csv"),
               task="classification")
    cfg["model"] = {"lvm_kind": "latent_distance", "d": 2}
    path = write_config(tmp_path / "fit.json", cfg)
    assert run("fit", "--config", path, "--out-dir", tmp_path) == 0
    assert run("export-latent", "--model", tmp_path / "model.json",
               "--out-dir", tmp_path, "--no-plots") == 0
    rows = read_rows(tmp_path / "model_pairs.csv")
    table = {(r["feature_a"], r["feature_b"]): float(r["distance"])
             for r in rows}
    names = load_model(tmp_path / "model.json").feature_names
    for j in range(6):
        assert table[(names[j], names[j])] == 0.0
        for k in range(6):
            assert table[(names[j], names[k])] == table[(names[k], names[j])]
            assert table[(names[j], names[k])] >= 0.0
    assert not (tmp_path / "model_latent.png").exists()


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------

EXP_GRID = {"lambda1": [0.0], "lambda2": [0.01], "lambda_l": [0.1],
            "lr": [0.05], "folds": 2}


def test_experiment_single_cell(tmp_path):
    cfg = write_config(tmp_path / "exp.json", {"experiment": {
        "kind": "method_comparison", "task": "regression",
        "n": 60, "n_test": 40, "d_true": 2,
        "p_list": [5], "seeds": [0], "methods": ["enet"],
        "grid": EXP_GRID, "optimizer": {"max_epochs": 60}}})
    assert run("experiment", "--config", cfg, "--out-dir", tmp_path) == 0
    rows = read_rows(tmp_path / "experiment_results.csv")
    assert len(rows) == 1
    assert rows[0]["method"] == "enet" and rows[0]["metric"] == "rmse"
    assert load_json(tmp_path / "experiment_failures.json") == []
    assert (tmp_path / "experiment_results.png").exists()


def test_experiment_row_count_and_reproduction(tmp_path):
    exp = {"kind": "method_comparison", "task": "regression",
           "n": 60, "n_test": 40, "d_true": 2,
           "p_list": [5, 6], "seeds": [0, 1], "methods": ["enet", "latent"],
           "model": {"lvm_kind": "low_rank", "d": 2},
           "grid": EXP_GRID, "optimizer": {"max_epochs": 60}}
    cfg = write_config(tmp_path / "exp.json", {"experiment": exp})
    assert run("experiment", "--config", cfg, "--out-dir", tmp_path,
               "--jobs", 2) == 0
    rows = read_rows(tmp_path / "experiment_results.csv")
    assert len(rows) == 2 * 2 * 2

    # cross-check one enet row against a standalone fit + evaluate
    from latint.experiment import evaluate_test, make_train_test
    train, test, _ = make_train_test(dict(exp, sim_lvm_kind="low_rank"), 5, 1)
    scheme = InteractionScheme.full(5)
    config = FitConfig("regression", "none",
                       penalties=PenaltyConfig(0.0, 0.01, 0.0),
                       optimizer=OptimizerConfig(learning_rate=0.05,
                                                 max_epochs=60, seed=1))
    params, _ = fit(train, scheme, config)
    want = evaluate_test(params, scheme, test)
    row = [r for r in rows if r["method"] == "enet" and r["p"] == "5"
           and r["seed"] == "1"][0]
    assert float(row["value"]) == pytest.approx(want, rel=1e-12)


def test_experiment_lambda_sweep(tmp_path):
    cfg = write_config(tmp_path / "exp.json", {"experiment": {
        "kind": "lambda_sweep", "task": "classification",
        "n": 60, "n_test": 60, "d_true": 2, "p": 5,
        "seeds": [0, 1], "lambda_l_values": [0.0, 0.1, 1.0],
        "model": {"lvm_kind": "latent_distance", "d": 2},
        "fixed": {"lambda1": 0.0, "lambda2": 0.01, "learning_rate": 0.05},
        "optimizer": {"max_epochs": 60}}})
    assert run("experiment", "--config", cfg, "--out-dir", tmp_path) == 0
    rows = read_rows(tmp_path / "experiment_results.csv")
    assert len(rows) == 6
    assert {r["metric"] for r in rows} == {"auc"}
    assert (tmp_path / "experiment_results.png").exists()


def test_experiment_unknown_method_reported_in_manifest(tmp_path):
    cfg = write_config(tmp_path / "exp.json", {"experiment": {
        "kind": "method_comparison", "task": "regression",
        "n": 40, "n_test": 20, "p_list": [4], "seeds": [0],
        "methods": ["nonsense"], "grid": EXP_GRID,
        "optimizer": {"max_epochs": 30}}})
    assert run("experiment", "--config", cfg, "--out-dir", tmp_path) == 0
    assert read_rows(tmp_path / "experiment_results.csv") == []
    failures = load_json(tmp_path / "experiment_failures.json")
    assert len(failures) == 1 and failures[0]["method"] == "nonsense"


def test_experiment_unknown_key_rejected(tmp_path):
    cfg = write_config(tmp_path / "exp.json", {"experiment": {
        "kind": "method_comparison", "task": "regression",
        "p_list": [4], "seeds": [0], "methods": ["enet"], "oops": 1}})
    assert run("experiment", "--config", cfg, "--out-dir", tmp_path) == 2


# ---------------------------------------------------------------------------
# masked fits through the CLI
# ---------------------------------------------------------------------------

def test_fit_with_pair_mask(tmp_path):
    data_path = FIXTURES / "regression_small.csv"
    cfg = _fit_cfg(data_path)
    cfg["mask"] = {"pairs": [["x1", "x2"], ["x3", "x5"]]}
    cfg["model"] = {"lvm_kind": "none"}
    cfg["penalties"] = {"lambda2": 0.01}
    path = write_config(tmp_path / "fit.json", cfg)
    assert run("fit", "--config", path, "--out-dir", tmp_path) == 0
    model = load_model(tmp_path / "model.json")
    assert model.params.theta_flat.shape == (2,)
    assert model.scheme.active_pairs == [(0, 1), (2, 4)]


def test_fit_with_group_mask(tmp_path):
    data_path = FIXTURES / "regression_small.csv"
    cfg = _fit_cfg(data_path)
    cfg["mask"] = {"groups": {"left": ["x1", "x2"], "right": ["x5", "x6"]}}
    cfg["model"] = {"lvm_kind": "none"}
    path = write_config(tmp_path / "fit.json", cfg)
    assert run("fit", "--config", path, "--out-dir", tmp_path) == 0
    model = load_model(tmp_path / "model.json")
    assert set(model.scheme.active_pairs) == {(0, 4), (0, 5), (1, 4), (1, 5)}


def test_fit_mask_unknown_feature_rejected(tmp_path):
    cfg = _fit_cfg(FIXTURES / "regression_small.csv")
    cfg["mask"] = {"pairs": [["x1", "nope"]]}
    path = write_config(tmp_path / "fit.json", cfg)
    assert run("fit", "--config", path, "--out-dir", tmp_path) == 2
