"""Figure rendering for the reporting paths.

Each function takes tidy rows (as written to the CSV next to it) and
renders a PNG. Rendering is best-effort presentation; the CSV stays the
authoritative output.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_METRIC_LABEL = {"rmse": "test RMSE", "auc": "test AUC",
                 "cox_pl": "test partial log-likelihood",
                 "c_index": "test C-index", "ibs": "test IBS"}


def _group_mean_se(values):
    v = np.asarray(values, dtype=float)
    se = v.std(ddof=1) / np.sqrt(v.size) if v.size > 1 else 0.0
    return float(v.mean()), float(se)


def save_metric_vs_p(rows, path, title=None):
    """Method-comparison rows {method, p, seed, metric, value} -> error-bar
    plot of the per-p mean with one standard error, one line per method."""
    fig, ax = plt.subplots(figsize=(6, 4))
    metric = rows[0]["metric"] if rows else ""
    methods = sorted({r["method"] for r in rows})
    for method in methods:
        ps = sorted({r["p"] for r in rows if r["method"] == method})
        means, ses = [], []
        for p in ps:
            vals = [r["value"] for r in rows
                    if r["method"] == method and r["p"] == p]
            m, s = _group_mean_se(vals)
            means.append(m)
            ses.append(s)
        ax.errorbar(ps, means, yerr=ses, marker="o", capsize=3, label=method)
    ax.set_xlabel("number of features p")
    ax.set_ylabel(_METRIC_LABEL.get(metric, metric))
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_metric_vs_lambda(rows, path, title=None):
    """Sweep rows {lambda_l, seed, metric, value} -> mean curve over a log
    axis; lambda_l = 0 is drawn at a pseudo-position left of the smallest
    positive value and labeled 0."""
    fig, ax = plt.subplots(figsize=(6, 4))
    metric = rows[0]["metric"] if rows else ""
    lams = sorted({r["lambda_l"] for r in rows})
    positive = [l for l in lams if l > 0]
    zero_pos = positive[0] / 10.0 if positive else 1.0
    xs, means, ses = [], [], []
    for lam in lams:
        vals = [r["value"] for r in rows if r["lambda_l"] == lam]
        m, s = _group_mean_se(vals)
        xs.append(lam if lam > 0 else zero_pos)
        means.append(m)
        ses.append(s)
    ax.errorbar(xs, means, yerr=ses, marker="o", capsize=3)
    ax.set_xscale("log")
    ax.set_xticks(xs)
    ax.set_xticklabels(["0" if l == 0 else f"{l:g}" for l in lams])
    ax.set_xlabel("latent penalty weight")
    ax.set_ylabel(_METRIC_LABEL.get(metric, metric))
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_latent_scatter(names, Z, path, title=None):
    """First two latent coordinates, one labeled point per feature."""
    Z = np.asarray(Z, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 6))
    ys = Z[:, 1] if Z.shape[1] > 1 else np.zeros(Z.shape[0])
    ax.scatter(Z[:, 0], ys, s=18)
    for name, x, y in zip(names, Z[:, 0], ys):
        ax.annotate(name, (x, y), fontsize=7,
                    textcoords="offset points", xytext=(3, 3))
    ax.set_xlabel("latent dim 1")
    ax.set_ylabel("latent dim 2" if Z.shape[1] > 1 else "")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_brier_curve(grid, values, path, title=None):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(grid, values, marker="o", ms=3)
    ax.set_xlabel("time")
    ax.set_ylabel("Brier score")
    ax.set_ylim(bottom=0)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
