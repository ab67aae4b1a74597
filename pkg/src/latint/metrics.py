"""Evaluation metrics and the PCA embedding baseline.

The survival Brier score follows the inverse-probability-of-censoring
weighting construction: subjects failing before the evaluation time are
weighted by 1/G(t_i-), survivors by 1/G(t), where G is the Kaplan-Meier
estimate of the censoring distribution.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .core import unflatten_theta
from .errors import DegenerateDataError


def rmse(y, yhat):
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape or y.ndim != 1 or y.size == 0:
        raise ValueError("y and yhat must be equal-length non-empty vectors")
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def auc(scores, labels):
    """Rank-based AUC; tied scores count one half."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=float)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateDataError("AUC needs both classes present")
    r = rankdata(s)
    rank_sum = float(r[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def c_index(risk_scores, times, events):
    """Harrell concordance: over pairs where the earlier time is an event,
    the fraction ranked correctly by risk, ties counting one half."""
    r = np.asarray(risk_scores, dtype=float)
    t = np.asarray(times, dtype=float)
    e = np.asarray(events, dtype=float)
    if not (r.shape == t.shape == e.shape) or r.ndim != 1:
        raise ValueError("inputs must be equal-length vectors")
    earlier = (t[:, None] < t[None, :]) & (e[:, None] == 1)
    n_comp = int(earlier.sum())
    if n_comp == 0:
        raise DegenerateDataError("no comparable pairs")
    higher = (r[:, None] > r[None, :]).astype(float)
    tied = (r[:, None] == r[None, :]).astype(float)
    score = float((earlier * (higher + 0.5 * tied)).sum())
    return score / n_comp


def censoring_km(times, events):
    """Kaplan-Meier estimate of the censoring survival function G.

    Returns (drop_times, values): distinct times with at least one
    censoring event, ascending, and G evaluated at each. Use km_eval for
    G(t) and G(t-).
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(events, dtype=float)
    order = np.argsort(t, kind="stable")
    t_s, c_s = t[order], 1.0 - e[order]
    uniq, start = np.unique(t_s, return_index=True)
    counts = np.diff(np.append(start, t_s.size))
    n_at_risk = t_s.size - start
    c_at = np.add.reduceat(c_s, start)
    keep = c_at > 0
    factors = 1.0 - c_at[keep] / n_at_risk[keep]
    return uniq[keep], np.cumprod(factors)


def km_eval(drop_times, values, t, before=False):
    """Step-function evaluation of a KM curve; before=True gives G(t-)."""
    side = "left" if before else "right"
    idx = np.searchsorted(drop_times, np.asarray(t, dtype=float), side=side)
    padded = np.concatenate([[1.0], values])
    return padded[idx]


def brier_curve(surv_probs, times, events, grid):
    """IPCW Brier score at each grid time.

    surv_probs is n x T with column k the predicted S(grid[k] | x_i).
    Grid points whose required censoring weight is zero come back as NaN
    with a warning naming them.
    """
    S = np.asarray(surv_probs, dtype=float)
    t = np.asarray(times, dtype=float)
    e = np.asarray(events, dtype=float)
    grid = np.asarray(grid, dtype=float)
    n = t.shape[0]
    if S.shape != (n, grid.shape[0]):
        raise ValueError(
            f"surv_probs shape {S.shape} does not match n={n}, T={grid.shape[0]}")
    drop_t, G = censoring_km(t, e)
    g_before = km_eval(drop_t, G, t, before=True)  # G(t_i-), per subject
    out = np.empty(grid.shape[0])
    bad = []
    for k, tau in enumerate(grid):
        failed = (t <= tau) & (e == 1)
        alive = t > tau
        g_tau = float(km_eval(drop_t, G, tau))
        terms = np.zeros(n)
        ok = True
        if failed.any():
            w = g_before[failed]
            if np.any(w <= 0):
                ok = False
            else:
                terms[failed] = (S[failed, k] ** 2) / w
        if alive.any():
            if g_tau <= 0:
                ok = False
            else:
                terms[alive] = ((1.0 - S[alive, k]) ** 2) / g_tau
        out[k] = terms.sum() / n if ok else np.nan
        if not ok:
            bad.append(tau)
    if bad:
        warnings.warn(
            f"censoring weight undefined (G=0) at grid times {bad}; "
            "those entries are NaN", RuntimeWarning)
    return out


def integrated_brier(curve, grid):
    """Trapezoidal integral of the Brier curve divided by the grid span."""
    curve = np.asarray(curve, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if grid.shape != curve.shape or grid.size < 2:
        raise ValueError("need matching curve/grid with at least 2 points")
    span = grid[-1] - grid[0]
    if span <= 0:
        raise ValueError("grid must be increasing")
    return float(np.trapezoid(curve, grid)) / span


def default_time_grid(times, events, n_points=30):
    """Interior equally spaced quantiles of the observed event times."""
    ev = np.asarray(times, dtype=float)[np.asarray(events) == 1]
    if ev.size == 0:
        raise DegenerateDataError("no events to place a time grid on")
    q = np.linspace(0.0, 1.0, n_points + 2)[1:-1]
    return np.quantile(ev, q)


def pca_embed_baseline(theta_flat_fitted, scheme, d):
    """Rank-d spectral reconstruction of fitted interaction coefficients.

    Mirrors the upper triangle into a symmetric matrix (masked pairs and
    the diagonal stay zero), keeps the d eigencomponents of largest
    magnitude, and returns the embedding (eigenvectors scaled by
    sqrt|eigenvalue|, signs preserved in the reconstruction) plus the
    reconstructed flat coefficients.
    """
    p = scheme.n_features
    if not 1 <= d <= p:
        raise ValueError(f"need 1 <= d <= p, got d={d}, p={p}")
    upper = unflatten_theta(np.asarray(theta_flat_fitted, dtype=float), scheme)
    M = upper + upper.T
    vals, vecs = np.linalg.eigh(M)
    top = np.argsort(np.abs(vals))[::-1][:d]
    lam = vals[top]
    V = vecs[:, top]
    Z = V * np.sqrt(np.abs(lam))[None, :]
    recon_mat = (V * lam[None, :]) @ V.T
    recon_flat = recon_mat[scheme.jdx, scheme.kdx]
    return Z, recon_flat


@dataclass
class EvalReport:
    """One metric across evaluation splits, with mean and standard error
    (sample standard deviation over sqrt of the number of splits)."""

    metric: str
    values: list = field(default_factory=list)

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def se(self):
        v = np.asarray(self.values, dtype=float)
        if v.size <= 1 or np.ptp(v) == 0.0:
            return 0.0
        return float(v.std(ddof=1) / np.sqrt(v.size))

    def to_dict(self):
        return {"metric": self.metric,
                "values": [float(v) for v in self.values],
                "mean": self.mean,
                "se": self.se}

    CSV_HEADER = ("metric", "n_splits", "mean", "se")

    def csv_row(self):
        return [self.metric, len(self.values), self.mean, self.se]
