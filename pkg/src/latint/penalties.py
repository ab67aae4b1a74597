"""Elastic-net penalty, its proximal operator, and the latent-structure penalty.

The latent-structure penalty measures, over the unmasked upper-triangular
pairs only, the squared deviation of the interaction coefficients from
their reconstruction out of the latent vectors. All gradients here are
analytic; the l1 part of the elastic net is handled by the proximal step,
never by a gradient.
"""

from dataclasses import dataclass

import numpy as np

from .core import reconstruct_theta


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty weights. exclude_intercepts keeps beta0 (and alpha0) out of
    the elastic net; the latent matrix Z is never elastic-net penalized."""

    lambda1: float = 0.0
    lambda2: float = 0.0
    lambda_l: float = 0.0
    exclude_intercepts: bool = True

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda_l"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


def elastic_net_value_grad(beta_aug, cfg):
    """Penalty value and the gradient of its smooth (l2) part.

    beta_aug is the concatenation [beta0, beta, theta_flat]; when
    cfg.exclude_intercepts is set the leading entry contributes nothing.

    Returns (lambda2*||b||^2 + lambda1*||b||_1, 2*lambda2*b).
    """
    b = np.asarray(beta_aug, dtype=float)
    if cfg.exclude_intercepts and b.size:
        b = b.copy()
        b[0] = 0.0
    value = cfg.lambda2 * float(b @ b) + cfg.lambda1 * float(np.abs(b).sum())
    return value, 2.0 * cfg.lambda2 * b


def soft_threshold(v, t):
    """Per-coordinate shrinkage sign(v) * max(|v| - t, 0)."""
    if t < 0:
        raise ValueError(f"threshold must be >= 0, got {t}")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def lvm_residuals(theta_flat, Z, alpha0, kind, scheme):
    """theta minus its latent reconstruction, per unmasked pair."""
    theta_flat = np.asarray(theta_flat, dtype=float)
    if theta_flat.shape != (scheme.n_active,):
        raise ValueError(
            f"theta length {theta_flat.shape} does not match "
            f"{scheme.n_active} active pairs"
        )
    return theta_flat - reconstruct_theta(Z, alpha0, kind, scheme)


def lvm_value(theta_flat, Z, alpha0, kind, scheme, lambda_l):
    """lambda_l * sum of squared reconstruction residuals."""
    eps = lvm_residuals(theta_flat, Z, alpha0, kind, scheme)
    return lambda_l * float(eps @ eps)


def lvm_grads(theta_flat, Z, alpha0, kind, scheme, lambda_l):
    """Analytic gradients of lvm_value wrt (theta_flat, Z, alpha0).

    With eps the residual of pair (j, k):
      d/d theta_jk            =  2 lambda_l eps_jk
      low_rank d/d z_j        = -2 lambda_l sum_k eps_jk z_k
      latent_distance d/d z_j =  4 lambda_l sum_k eps_jk (z_j - z_k)
      latent_distance d/alpha0 = -2 lambda_l sum eps_jk
    """
    Z = np.asarray(Z, dtype=float)
    eps = lvm_residuals(theta_flat, Z, alpha0, kind, scheme)
    g_theta = 2.0 * lambda_l * eps
    g_Z = np.zeros_like(Z)
    jdx, kdx = scheme.jdx, scheme.kdx
    if kind == "low_rank":
        np.add.at(g_Z, jdx, (-2.0 * lambda_l) * eps[:, None] * Z[kdx])
        np.add.at(g_Z, kdx, (-2.0 * lambda_l) * eps[:, None] * Z[jdx])
        g_alpha0 = 0.0
    elif kind == "latent_distance":
        diff = Z[jdx] - Z[kdx]
        np.add.at(g_Z, jdx, (4.0 * lambda_l) * eps[:, None] * diff)
        np.add.at(g_Z, kdx, (-4.0 * lambda_l) * eps[:, None] * diff)
        g_alpha0 = -2.0 * lambda_l * float(eps.sum())
    else:
        raise ValueError(f"unknown lvm kind {kind!r}")
    return g_theta, g_Z, g_alpha0
