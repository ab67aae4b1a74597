"""Shared test utilities: finite differences and a learning-rate anneal."""

import numpy as np

from latint import fit


def central_diff(f, x, h=1e-5):
    """Central finite-difference gradient of scalar f at 1-d point x."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    denom = max(np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / denom


def anneal_fit(data, scheme, config, lrs=(0.05, 0.01, 1e-3, 1e-4),
               epochs=3000):
    """Chain warm-started fits with decreasing learning rates so the final
    iterate sits tightly on the optimum (plain Adam hovers at a radius
    proportional to the learning rate)."""
    params = None
    report = None
    for lr in lrs:
        cfg = config.with_optimizer(learning_rate=lr, max_epochs=epochs,
                                    tol=0.0)
        params, report = fit(data, scheme, cfg, init=params)
    return params, report
