"""Task losses with analytic gradients, predictions, and the baseline hazard.

Loss conventions: squared error and log loss average over examples; the
Cox negative log partial likelihood (Breslow tie handling) averages over
events. The risk set at time t is {j : t_j >= t}, so a subject leaving
at t is still in its own risk set.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import score_matrix
from .errors import DegenerateDataError, StateError

# keeps predicted probabilities strictly inside (0, 1)
_PROB_EPS = 1e-12


def mse_loss_grad(scores, y):
    """(1/n) sum (y - s)^2 and its gradient wrt scores."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(y, dtype=float)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError(f"shape mismatch {s.shape} vs {y.shape}")
    n = s.shape[0]
    if n == 0:
        raise ValueError("empty inputs")
    r = s - y
    return float(r @ r) / n, (2.0 / n) * r


def logistic_loss_grad(scores, y):
    """(1/n) sum [softplus(s) - y*s]; gradient (sigmoid(s) - y)/n.

    Computed with logaddexp so scores of either sign and large magnitude
    stay finite.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(y, dtype=float)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError(f"shape mismatch {s.shape} vs {y.shape}")
    if s.shape[0] == 0:
        raise ValueError("empty inputs")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("labels must be 0 or 1")
    n = s.shape[0]
    value = float(np.sum(np.logaddexp(0.0, s) - y * s)) / n
    grad = (expit(s) - y) / n
    return value, grad


def _risk_set_machinery(scores, times):
    """Sorted views plus log risk-set sums shared by the Cox loss and the
    baseline hazard. Returns ascending-time order, sorted arrays, and for
    every sorted index the log of sum(exp(s_j)) over {j : t_j >= t_i}."""
    order = np.argsort(times, kind="stable")
    t = times[order]
    s = scores[order]
    smax = float(s.max())
    exp_s = np.exp(s - smax)
    suffix = np.cumsum(exp_s[::-1])[::-1]
    starts = np.searchsorted(t, t, side="left")  # first index of each tie block
    log_risk = np.log(suffix[starts]) + smax
    return order, t, s, exp_s, smax, starts, log_risk


def cox_neg_log_partial_likelihood_grad(scores, times, events):
    """Breslow negative log partial likelihood per event, with gradient.

    value = -(1/D) sum_{i: event} [s_i - log sum_{j: t_j >= t_i} exp(s_j)]
    where D is the number of events.
    """
    s = np.asarray(scores, dtype=float)
    t = np.asarray(times, dtype=float)
    e = np.asarray(events, dtype=float)
    if not (s.shape == t.shape == e.shape) or s.ndim != 1:
        raise ValueError("scores, times, events must be equal-length vectors")
    if np.any(t <= 0):
        raise ValueError("times must be > 0")
    n_events = int(e.sum())
    if n_events == 0:
        raise DegenerateDataError("no events: partial likelihood undefined")

    order, t_s, s_s, exp_s, smax, starts, log_risk = _risk_set_machinery(s, t)
    e_s = e[order]
    value = -float(np.sum(e_s * (s_s - log_risk))) / n_events

    # gradient: each event j adds exp(s_q - s_max)/S_j to every q in its
    # risk set; risk sets are suffixes, so accumulate event increments with
    # a prefix sum taken at the end of each tie block.
    suffix = np.cumsum(exp_s[::-1])[::-1]
    inc = np.where(e_s > 0, 1.0 / suffix[starts], 0.0)
    prefix = np.cumsum(inc)
    ends = np.searchsorted(t_s, t_s, side="right") - 1
    g_sorted = -(e_s - exp_s * prefix[ends]) / n_events
    grad = np.empty_like(g_sorted)
    grad[order] = g_sorted
    return value, grad


@dataclass(frozen=True)
class BaselineHazard:
    """Cumulative baseline hazard as a right-continuous step function."""

    times: np.ndarray      # distinct event times, ascending
    cum_hazard: np.ndarray  # H0 evaluated at those times

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        h = np.asarray(self.cum_hazard, dtype=float)
        if t.shape != h.shape or t.ndim != 1:
            raise ValueError("times and cum_hazard must be equal-length vectors")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(h) < 0):
            raise ValueError("baseline hazard must be a non-decreasing step function")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "cum_hazard", h)

    def at(self, t):
        """H0(t) for scalar or vector t; 0 before the first event time."""
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right")
        padded = np.concatenate([[0.0], self.cum_hazard])
        return padded[idx]


def breslow_baseline(scores, times, events):
    """Baseline hazard increments d_i / sum_{j in risk set} exp(s_j)."""
    s = np.asarray(scores, dtype=float)
    t = np.asarray(times, dtype=float)
    e = np.asarray(events, dtype=float)
    if int(e.sum()) == 0:
        raise DegenerateDataError("no events: baseline hazard undefined")
    order, t_s, s_s, exp_s, smax, starts, log_risk = _risk_set_machinery(s, t)
    e_s = e[order]
    ev = e_s > 0
    ev_times = t_s[ev]
    # one increment per distinct event time: d_t / risk-set sum
    uniq, first = np.unique(ev_times, return_index=True)
    d_t = np.diff(np.append(first, ev_times.size))
    log_risk_ev = log_risk[ev][first]
    increments = d_t * np.exp(-log_risk_ev)
    return BaselineHazard(uniq, np.cumsum(increments))


def survival_curves(params, X, scheme, baseline, grid):
    """S(t | x) = exp(-H0(t) * exp(score)) at each grid time, rows = subjects."""
    if baseline is None:
        raise StateError("survival curves require a fitted baseline hazard")
    risk = score_matrix(params, np.asarray(X, dtype=float), scheme,
                        include_intercept=False)
    H = baseline.at(np.asarray(grid, dtype=float))
    with np.errstate(over="ignore"):
        return np.exp(-np.outer(np.exp(risk), H))


def predict(params, dataset, scheme):
    """Task-appropriate point predictions.

    regression: raw scores; classification: probabilities strictly in
    (0, 1); survival: relative risk scores (no intercept). Survival curves
    come from survival_curves with a BaselineHazard.
    """
    if dataset.task == "survival":
        return score_matrix(params, dataset.X, scheme, include_intercept=False)
    s = score_matrix(params, dataset.X, scheme)
    if dataset.task == "classification":
        return np.clip(expit(s), _PROB_EPS, 1.0 - _PROB_EPS)
    return s
