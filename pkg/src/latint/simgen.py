"""Synthetic benchmark generators.

Two families: a regression generator whose interaction coefficients sit
near a low-rank structure, and a binary-classification generator whose
interaction coefficients follow a latent-distance structure and whose
augmented coefficient vector is sparsified by Gaussian-probability
zeroing. Each stochastic component draws from its own named stream, so
regenerating with a larger n reproduces the earlier rows exactly.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import Dataset, InteractionScheme, reconstruct_theta
from .rng import stream


@dataclass(frozen=True)
class SimConfig:
    n: int
    p: int
    d_true: int
    lvm_kind: str = "low_rank"
    sigma_eps2: float = 0.1     # variance of the low-rank deviation (regression)
    sigma_s2: float = 1e-4      # sparsification scale (classification)
    sigma_theta2: float = 0.1   # variance of the latent-distance deviation
    sigma_y2: float = 0.01      # response noise variance
    noise_outside_link: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.p < 2:
            raise ValueError(f"need n >= 1 and p >= 2, got n={self.n}, p={self.p}")
        if not 1 <= self.d_true < self.p:
            raise ValueError(f"need 1 <= d_true < p, got d_true={self.d_true}")
        for name in ("sigma_eps2", "sigma_s2", "sigma_theta2", "sigma_y2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.lvm_kind not in ("low_rank", "latent_distance"):
            raise ValueError(f"unknown lvm_kind {self.lvm_kind!r}")


@dataclass(frozen=True)
class GroundTruth:
    """Generating coefficients: main effects, interaction coefficients per
    lexicographic pair (all pairs active), latent matrix, and the baseline
    interaction level when the structure is latent-distance."""

    beta: np.ndarray
    theta_flat: np.ndarray
    Z: np.ndarray
    alpha0: float = None
    lvm_kind: str = "low_rank"


def feature_names(p):
    return [f"x{j + 1}" for j in range(p)]


def sparsify(beta_dense, sigma_s2, rng):
    """Zero each entry with probability exp(-b^2 / sigma_s2).

    Small entries are likely to be dropped, large ones almost always
    survive. sigma_s2 == 0 is taken as the limit: only exact zeros are
    "zeroed" (a no-op on values).
    """
    b = np.asarray(beta_dense, dtype=float)
    u = rng.uniform(size=b.shape)
    if sigma_s2 == 0:
        zero_prob = (b == 0).astype(float)
    else:
        zero_prob = np.exp(-(b * b) / sigma_s2)
    return np.where(u < zero_prob, 0.0, b)


def _truth_low_rank(cfg):
    g = stream(cfg.seed, "truth")
    beta = g.standard_normal(cfg.p)
    Z = g.standard_normal((cfg.p, cfg.d_true))
    scheme = InteractionScheme.full(cfg.p)
    eps = np.sqrt(cfg.sigma_eps2) * g.standard_normal(scheme.n_active)
    theta = reconstruct_theta(Z, None, "low_rank", scheme) + eps
    return GroundTruth(beta, theta, Z, None, "low_rank"), scheme


def _truth_latent_distance(cfg):
    g = stream(cfg.seed, "truth")
    beta = g.standard_normal(cfg.p)
    Z = g.standard_normal((cfg.p, cfg.d_true))
    alpha0 = float(g.standard_normal())
    scheme = InteractionScheme.full(cfg.p)
    eps = np.sqrt(cfg.sigma_theta2) * g.standard_normal(scheme.n_active)
    theta = reconstruct_theta(Z, alpha0, "latent_distance", scheme) + eps
    return GroundTruth(beta, theta, Z, alpha0, "latent_distance"), scheme


def _features(cfg):
    return stream(cfg.seed, "features").standard_normal((cfg.n, cfg.p))


def _signal(X, truth, scheme):
    x_int = X[:, scheme.jdx] * X[:, scheme.kdx]
    return X @ truth.beta + x_int @ truth.theta_flat


def gen_linear(cfg, truth=None):
    """Regression benchmark: y = X beta + X_int theta + noise.

    Interaction coefficients are z_j . z_k plus N(0, sigma_eps2) deviations.
    Passing truth reuses existing generating coefficients (e.g. to draw a
    test set from the same model).
    """
    if cfg.lvm_kind != "low_rank":
        raise ValueError("gen_linear generates a low-rank structure")
    if truth is None:
        truth, scheme = _truth_low_rank(cfg)
    else:
        if truth.beta.shape != (cfg.p,):
            raise ValueError("truth does not match p")
        scheme = InteractionScheme.full(cfg.p)
    X = _features(cfg)
    eta = np.sqrt(cfg.sigma_y2) * stream(cfg.seed, "noise").standard_normal(cfg.n)
    y = _signal(X, truth, scheme) + eta
    data = Dataset(X, feature_names(cfg.p), "regression", y=y)
    return data, truth


def gen_logistic(cfg, truth=None):
    """Classification benchmark with a sparsified latent-structured truth.

    The dense augmented coefficient vector [beta, theta] is sparsified via
    sparsify(); labels are Bernoulli with success probability
    logistic(score + noise) (noise added outside the link instead when
    cfg.noise_outside_link is set). The default structure is
    latent-distance; low_rank swaps in the dot-product reconstruction.
    """
    if truth is None:
        if cfg.lvm_kind == "latent_distance":
            truth, scheme = _truth_latent_distance(cfg)
        else:
            truth, scheme = _truth_low_rank(cfg)
        dense = np.concatenate([truth.beta, truth.theta_flat])
        sparse = sparsify(dense, cfg.sigma_s2, stream(cfg.seed, "sparsify"))
        truth = GroundTruth(sparse[:cfg.p], sparse[cfg.p:], truth.Z,
                            truth.alpha0, truth.lvm_kind)
    else:
        if truth.beta.shape != (cfg.p,):
            raise ValueError("truth does not match p")
        scheme = InteractionScheme.full(cfg.p)
    X = _features(cfg)
    eta = np.sqrt(cfg.sigma_y2) * stream(cfg.seed, "noise").standard_normal(cfg.n)
    score = _signal(X, truth, scheme)
    if cfg.noise_outside_link:
        prob = np.clip(expit(score) + eta, 0.0, 1.0)
    else:
        prob = expit(score + eta)
    u = stream(cfg.seed, "labels").uniform(size=cfg.n)
    y = (u < prob).astype(float)
    data = Dataset(X, feature_names(cfg.p), "classification", y=y)
    return data, truth
