"""Data model, interaction expansion, and the shared linear score.

Pairwise interactions are kept in a fixed lexicographic order over index
pairs (j, k) with j < k. A scheme may mask pairs out; masked pairs are
physically absent from the flat coefficient vector (their coefficient is
pinned at zero and the optimizer never sees them).
"""

from dataclasses import dataclass, field

import numpy as np

# Bump when the pair ordering or flattening convention changes; persisted
# models record this so stale files are refused rather than misread.
PAIR_ORDER_VERSION = "lex-1"

TASKS = ("regression", "classification", "survival")
LVM_KINDS = ("low_rank", "latent_distance", "none")


def lexicographic_pairs(p):
    """All index pairs (j, k), j < k, in row-major (lexicographic) order."""
    return [(j, k) for j in range(p) for k in range(j + 1, p)]


def n_pairs(p):
    return p * (p - 1) // 2


@dataclass(frozen=True, eq=False)
class InteractionScheme:
    """Canonical ordering of feature pairs plus a keep/drop mask.

    mask[i] is 1 if pair i of the lexicographic ordering carries a free
    coefficient, 0 if the pair is pinned at zero. Flat vectors (theta and
    expanded interactions) hold only the unmasked pairs, in lexicographic
    order.
    """

    n_features: int
    mask: np.ndarray
    jdx: np.ndarray = field(init=False)
    kdx: np.ndarray = field(init=False)

    def __post_init__(self):
        p = self.n_features
        if p < 1:
            raise ValueError(f"need at least one feature, got p={p}")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (n_pairs(p),):
            raise ValueError(
                f"mask length {mask.shape} does not match {n_pairs(p)} pairs for p={p}"
            )
        object.__setattr__(self, "mask", mask)
        all_j, all_k = _pair_index_arrays(p)
        object.__setattr__(self, "jdx", all_j[mask])
        object.__setattr__(self, "kdx", all_k[mask])

    @classmethod
    def full(cls, p):
        """All C(p,2) pairs active."""
        return cls(p, np.ones(n_pairs(p), dtype=bool))

    @classmethod
    def none(cls, p):
        """No interaction terms (main effects only)."""
        return cls(p, np.zeros(n_pairs(p), dtype=bool))

    @classmethod
    def from_pairs(cls, p, pairs):
        """Keep only the listed (j, k) pairs; order within the list is ignored."""
        mask = np.zeros(n_pairs(p), dtype=bool)
        flat = {pair: i for i, pair in enumerate(lexicographic_pairs(p))}
        for j, k in pairs:
            if j == k:
                raise ValueError(f"self-interaction ({j},{j}) is not representable")
            key = (j, k) if j < k else (k, j)
            if key not in flat:
                raise ValueError(f"pair {key} out of range for p={p}")
            mask[flat[key]] = True
        return cls(p, mask)

    @classmethod
    def bipartite(cls, p, left, right):
        """Keep exactly the pairs with one index in `left` and one in `right`."""
        left, right = set(left), set(right)
        if left & right:
            raise ValueError(f"groups overlap: {sorted(left & right)}")
        pairs = [(j, k) for j in left for k in right]
        return cls.from_pairs(p, pairs)

    @property
    def pair_list(self):
        """All pairs in lexicographic order (masked ones included)."""
        return lexicographic_pairs(self.n_features)

    @property
    def active_pairs(self):
        """The unmasked pairs, in flat-vector order."""
        return list(zip(self.jdx.tolist(), self.kdx.tolist()))

    @property
    def n_active(self):
        return int(self.mask.sum())

    def flat_index(self, j, k):
        """Position of unmasked pair (j, k) in the flat vector."""
        if not j < k:
            j, k = k, j
        pos = _lex_position(self.n_features, j, k)
        if not self.mask[pos]:
            raise KeyError(f"pair ({j},{k}) is masked out")
        return int(self.mask[:pos].sum())

    def same_active_pairs(self, other):
        return (
            self.n_features == other.n_features
            and np.array_equal(self.jdx, other.jdx)
            and np.array_equal(self.kdx, other.kdx)
        )


def _pair_index_arrays(p):
    pairs = lexicographic_pairs(p)
    if not pairs:
        return np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp)
    arr = np.asarray(pairs, dtype=np.intp)
    return arr[:, 0], arr[:, 1]


def _lex_position(p, j, k):
    # offset of row j in the flattened upper triangle, then column offset
    return j * p - j * (j + 1) // 2 + (k - j - 1)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix plus a task-specific target.

    Exactly one target variant is populated: y for regression and
    classification, (time, event) for survival.
    """

    X: np.ndarray
    feature_names: tuple
    task: str
    y: np.ndarray = None
    time: np.ndarray = None
    event: np.ndarray = None

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.X, dtype=float))
        if X.ndim != 2:
            raise ValueError(f"X must be 2-d, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite values")
        object.__setattr__(self, "X", X)
        names = tuple(self.feature_names)
        if len(names) != X.shape[1]:
            raise ValueError(
                f"{len(names)} feature names for {X.shape[1]} columns"
            )
        object.__setattr__(self, "feature_names", names)
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        n = X.shape[0]
        if self.task == "survival":
            if self.y is not None:
                raise ValueError("survival dataset takes (time, event), not y")
            time = np.asarray(self.time, dtype=float)
            event = np.asarray(self.event, dtype=float)
            if time.shape != (n,) or event.shape != (n,):
                raise ValueError("time/event length must equal n")
            if not np.all(np.isfinite(time)) or np.any(time <= 0):
                raise ValueError("survival times must be finite and > 0")
            if not np.all(np.isin(event, (0.0, 1.0))):
                raise ValueError("event indicator must be 0 or 1")
            object.__setattr__(self, "time", time)
            object.__setattr__(self, "event", event.astype(int))
        else:
            if self.time is not None or self.event is not None:
                raise ValueError(f"{self.task} dataset takes y, not (time, event)")
            y = np.asarray(self.y, dtype=float)
            if y.shape != (n,):
                raise ValueError("target length must equal n")
            if not np.all(np.isfinite(y)):
                raise ValueError("target contains non-finite values")
            if self.task == "classification" and not np.all(np.isin(y, (0.0, 1.0))):
                raise ValueError("classification labels must be 0 or 1")
            object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def take(self, idx):
        """Row subset as a new Dataset."""
        idx = np.asarray(idx)
        if self.task == "survival":
            return Dataset(self.X[idx], self.feature_names, self.task,
                           time=self.time[idx], event=self.event[idx])
        return Dataset(self.X[idx], self.feature_names, self.task, y=self.y[idx])

    def with_X(self, X):
        """Same targets, replaced feature matrix (e.g. after standardization)."""
        if self.task == "survival":
            return Dataset(X, self.feature_names, self.task,
                           time=self.time, event=self.event)
        return Dataset(X, self.feature_names, self.task, y=self.y)


@dataclass
class ModelParams:
    """Free parameters of a fitted or initialized model.

    theta_flat holds one coefficient per unmasked pair of the scheme it was
    built against. Z and alpha0 are present only when lvm_kind is not
    "none"; alpha0 is used by the latent-distance reconstruction only.
    """

    beta0: float
    beta: np.ndarray
    theta_flat: np.ndarray
    Z: np.ndarray = None
    alpha0: float = None
    lvm_kind: str = "none"

    def __post_init__(self):
        if self.lvm_kind not in LVM_KINDS:
            raise ValueError(f"unknown lvm_kind {self.lvm_kind!r}")
        self.beta = np.asarray(self.beta, dtype=float)
        self.theta_flat = np.asarray(self.theta_flat, dtype=float)
        if self.lvm_kind != "none":
            self.Z = np.asarray(self.Z, dtype=float)
            if self.Z.ndim != 2:
                raise ValueError("Z must be p x d")
            if self.Z.shape[1] >= self.Z.shape[0]:
                raise ValueError(
                    f"latent dimension d={self.Z.shape[1]} must be < p={self.Z.shape[0]}"
                )

    @property
    def p(self):
        return self.beta.shape[0]

    def copy(self):
        return ModelParams(
            float(self.beta0),
            self.beta.copy(),
            self.theta_flat.copy(),
            None if self.Z is None else self.Z.copy(),
            None if self.alpha0 is None else float(self.alpha0),
            self.lvm_kind,
        )


def expand_interactions(x, scheme):
    """Products x_j * x_k for every unmasked pair, in flat order."""
    x = np.asarray(x, dtype=float)
    if x.shape != (scheme.n_features,):
        raise ValueError(
            f"x has length {x.shape}, scheme expects {scheme.n_features}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("x contains non-finite values")
    return x[scheme.jdx] * x[scheme.kdx]


def interaction_matrix(X, scheme):
    """Row-wise expand_interactions: returns the n x n_active design block."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != scheme.n_features:
        raise ValueError(
            f"X has {X.shape[1]} columns, scheme expects {scheme.n_features}"
        )
    return np.ascontiguousarray(X[:, scheme.jdx] * X[:, scheme.kdx])


def linear_score(params, x, scheme, include_intercept=True):
    """beta0 + beta.x + theta_flat . x_int for a single example.

    Survival models pass include_intercept=False (the intercept is not
    identifiable and is absorbed into the baseline hazard).
    """
    x_int = expand_interactions(x, scheme)
    s = float(params.beta @ np.asarray(x, dtype=float) + params.theta_flat @ x_int)
    if include_intercept:
        s += params.beta0
    if not np.isfinite(s):
        raise FloatingPointError("non-finite score")
    return s


def score_matrix(params, X, scheme, include_intercept=True, x_int=None):
    """Vector of linear scores for all rows of X.

    x_int may carry a precomputed interaction_matrix(X, scheme) to avoid
    re-expanding inside hot loops.
    """
    if x_int is None:
        x_int = interaction_matrix(X, scheme)
    s = X @ params.beta + x_int @ params.theta_flat
    if include_intercept:
        s = s + params.beta0
    return s


def reconstruct_theta(Z, alpha0, kind, scheme):
    """Latent reconstruction of the interaction coefficients, flat order.

    low_rank: entry for pair (j, k) is z_j . z_k.
    latent_distance: alpha0 - ||z_j - z_k||^2.
    Masked pairs carry no entry here; when assembled into a matrix via
    unflatten_theta they read as 0.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != scheme.n_features:
        raise ValueError(f"Z shape {Z.shape} does not match p={scheme.n_features}")
    if Z.shape[1] < 1:
        raise ValueError("latent dimension must be >= 1")
    if kind == "low_rank":
        return np.sum(Z[scheme.jdx] * Z[scheme.kdx], axis=1)
    if kind == "latent_distance":
        diff = Z[scheme.jdx] - Z[scheme.kdx]
        return float(alpha0) - np.sum(diff * diff, axis=1)
    raise ValueError(f"unknown lvm kind {kind!r}")


def flatten_theta(Theta, scheme):
    """Flat vector of the unmasked upper-triangular entries of Theta."""
    Theta = np.asarray(Theta, dtype=float)
    p = scheme.n_features
    if Theta.shape != (p, p):
        raise ValueError(f"Theta shape {Theta.shape} does not match p={p}")
    return Theta[scheme.jdx, scheme.kdx].copy()


def unflatten_theta(flat, scheme):
    """Inverse of flatten_theta; masked pairs, diagonal, lower triangle are 0."""
    flat = np.asarray(flat, dtype=float)
    if flat.shape != (scheme.n_active,):
        raise ValueError(
            f"flat length {flat.shape} does not match {scheme.n_active} active pairs"
        )
    p = scheme.n_features
    Theta = np.zeros((p, p))
    Theta[scheme.jdx, scheme.kdx] = flat
    return Theta


def standardization_stats(X):
    """Per-column mean and scale from a training matrix.

    Columns with (near-)zero variance get scale 1 so they pass through
    unchanged instead of dividing by zero.
    """
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale < 1e-12, 1.0, scale)
    return mean, scale


def apply_standardization(X, mean, scale):
    return (np.asarray(X, dtype=float) - mean) / scale
