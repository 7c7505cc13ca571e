"""Kernel discriminant analysis by spectral regression.

Training never solves the KDA eigenproblem. The discriminant responses are
the class indicators orthogonalised against the constant vector (exact
eigenvectors of the block label-affinity matrix with eigenvalue 1), and the
expansion coefficients come from one Cholesky solve of ``(K + delta I)``
against them. The kernel is centred in feature space before either step.

:func:`direct_kda_oracle` solves the regularised eigenproblem densely and is
only meant for checking the fast path on small problems.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist, pdist, squareform
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted
from threadpoolctl import threadpool_limits

from .exceptions import (
    DegenerateData,
    DimensionMismatch,
    FactorizationFailure,
    MissingClass,
    NonFiniteInput,
    OracleTooLarge,
)

ORACLE_MAX_SAMPLES = 64
SOLVE_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class KernelConfig:
    kind: str = "rbf"
    gamma: float | None = None  # None: median pairwise distance of the training set
    regularization_delta: float = 0.01

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise ValueError(f"kernel kind must be 'rbf' or 'linear', got {self.kind!r}")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.regularization_delta > 0:
            raise ValueError("regularization_delta must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class LabelAffinity:
    matrix: np.ndarray
    class_sizes: np.ndarray


@dataclass(eq=False)
class ProjectionModel:
    train_signatures: np.ndarray
    coefficients_omega: np.ndarray
    kernel: KernelConfig
    class_names: list
    kernel_col_means: np.ndarray
    kernel_grand_mean: float

    @property
    def n_components(self):
        return self.coefficients_omega.shape[1]


def _finite_matrix(X, name="X"):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput(f"{name} contains NaN or infinite values")
    return X


def median_gamma(X):
    """Median Euclidean distance over all row pairs ``i < j``."""
    X = _finite_matrix(X)
    if X.shape[0] < 2:
        raise DegenerateData("need at least two rows")
    d = pdist(X)
    if not np.any(d > 0):
        raise DegenerateData("all rows are identical")
    return float(np.median(d))


def build_kernel(X, cfg, Y=None):
    """Kernel matrix between the rows of ``X`` (and ``Y`` if given).

    rbf: ``exp(-||x - y||^2 / (2 gamma^2))``; linear: ``x . y``. Without ``Y``
    the result is exactly symmetric and the rbf diagonal is exactly 1.
    """
    X = _finite_matrix(X)
    if Y is None and X.shape[0] < 2:
        raise DegenerateData("need at least two samples")
    if cfg.kind == "rbf":
        gamma = cfg.gamma if cfg.gamma is not None else median_gamma(X)
        if Y is None:
            sq = squareform(pdist(X, "sqeuclidean"))
        else:
            Y = _finite_matrix(Y, "Y")
            sq = cdist(Y, X, "sqeuclidean").T
        return np.exp(-sq / (2.0 * gamma * gamma))
    if Y is None:
        K = X @ X.T
        return 0.5 * (K + K.T)
    return X @ _finite_matrix(Y, "Y").T


def center_kernel(K):
    """Centre ``K`` in feature space; returns ``(K_centred, col_means, grand_mean)``."""
    m = K.mean(axis=0)
    g = float(m.mean())
    return K - (m[:, None] + m[None, :]) + g, m, g


def label_affinity(labels, n_classes=None):
    """Block matrix with ``1 / n_k`` wherever two samples share class ``k``."""
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
    sizes = np.bincount(labels, minlength=n_classes)
    same = labels[:, None] == labels[None, :]
    W = np.where(same, 1.0 / np.maximum(sizes[labels], 1)[:, None], 0.0)
    return LabelAffinity(W, sizes)


def response_vectors(labels, n_classes):
    """Orthonormal responses spanning the centred class indicators.

    Modified Gram-Schmidt on ``[1, e_1, ..., e_c]``; the indicator that
    collapses to zero (they sum to the constant vector) is dropped, leaving
    ``c - 1`` unit columns. Each is an eigenvector of the label affinity with
    eigenvalue 1 and is orthogonal to the constant vector.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if n_classes < 2:
        raise MissingClass(f"need at least two classes, got {n_classes}")
    present = np.bincount(labels, minlength=n_classes)
    if labels.min() < 0 or labels.max() >= n_classes or np.any(present == 0):
        missing = [k for k in range(n_classes) if k >= len(present) or present[k] == 0]
        raise MissingClass(f"classes {missing} have no samples")
    n = labels.shape[0]
    basis = [np.full(n, 1.0 / np.sqrt(n))]
    for k in range(n_classes):
        v = (labels == k).astype(np.float64)
        norm0 = np.linalg.norm(v)
        for b in basis:
            v -= (b @ v) * b
        norm = np.linalg.norm(v)
        if norm > 1e-10 * norm0:
            basis.append(v / norm)
    return np.column_stack(basis[1:])


def _fix_signs(omega):
    """Flip columns so each column's largest-magnitude entry is positive."""
    omega = np.array(omega, dtype=np.float64, copy=True)
    for j in range(omega.shape[1]):
        if omega[np.argmax(np.abs(omega[:, j])), j] < 0:
            omega[:, j] = -omega[:, j]
    return omega


def solve_projection(K, responses, delta):
    """Solve ``(K + delta I) omega = responses`` column-wise via Cholesky."""
    K = _finite_matrix(K, "K")
    responses = np.asarray(responses, dtype=np.float64)
    squeeze = responses.ndim == 1
    R = responses[:, None] if squeeze else responses
    if K.shape[0] != K.shape[1] or K.shape[0] != R.shape[0]:
        raise DimensionMismatch(f"K {K.shape} and responses {responses.shape} disagree")
    if not delta > 0:
        raise ValueError("delta must be positive")
    A = K + delta * np.eye(K.shape[0])
    with threadpool_limits(limits=1):
        try:
            factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise FactorizationFailure(f"K + delta I is not positive definite: {exc}") from None
        omega = scipy.linalg.cho_solve(factor, R, check_finite=False)
        residual = np.abs(A @ omega - R).max(axis=0) if R.size else np.zeros(0)
    if not np.all(residual < SOLVE_RESIDUAL_TOL):
        raise FactorizationFailure(f"solve residual {residual.max():.3g} exceeds {SOLVE_RESIDUAL_TOL}")
    return omega[:, 0] if squeeze else omega


def fit_projection(X, labels, class_names, cfg):
    """Train the SR-KDA projection on signature rows ``X`` with integer ``labels``."""
    X = _finite_matrix(X)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != X.shape[0]:
        raise DimensionMismatch("one label per signature row is required")
    c = len(class_names)
    responses = response_vectors(labels, c)
    if cfg.kind == "rbf" and cfg.gamma is None:
        cfg = replace(cfg, gamma=median_gamma(X))
    Kc, col_means, grand = center_kernel(build_kernel(X, cfg))
    omega = _fix_signs(solve_projection(Kc, responses, cfg.regularization_delta))
    return ProjectionModel(X.copy(), omega, cfg, list(class_names), col_means, grand)


def project(model, S):
    """Out-of-sample projection ``z_j = sum_i omega_ij * k_centred(x_i, s)``."""
    S = np.asarray(S, dtype=np.float64)
    squeeze = S.ndim == 1
    S2 = S[None] if squeeze else S
    if S2.ndim != 2 or S2.shape[1] != model.train_signatures.shape[1]:
        raise DimensionMismatch(
            f"signature dimension {S2.shape[-1]} != training dimension {model.train_signatures.shape[1]}"
        )
    Kx = build_kernel(model.train_signatures, model.kernel, S2)  # (n_train, m)
    Kx = Kx - Kx.mean(axis=0)[None, :] - model.kernel_col_means[:, None] + model.kernel_grand_mean
    Z = Kx.T @ model.coefficients_omega
    return Z[0] if squeeze else Z


def direct_kda_oracle(K, labels, delta, n_classes=None):
    """Top ``c - 1`` solutions of ``K L K w = lam (K K + delta K) w`` by dense decomposition.

    ``K K + delta K`` is singular whenever ``K`` is, so the problem is solved
    on the range of ``K``: with ``K = U diag(s) U^T`` (positive ``s`` only) and
    ``w = U diag(1/s) g`` it becomes ``U^T L U g = lam (I + delta diag(1/s)) g``.
    Null-space components of ``w`` change neither side.
    """
    K = _finite_matrix(K, "K")
    n = K.shape[0]
    if n > ORACLE_MAX_SAMPLES:
        raise OracleTooLarge(f"oracle limited to {ORACLE_MAX_SAMPLES} samples, got {n}")
    labels = np.asarray(labels, dtype=np.int64)
    c = int(labels.max()) + 1 if n_classes is None else n_classes
    L = label_affinity(labels, c).matrix
    try:
        s, U = scipy.linalg.eigh(0.5 * (K + K.T))
        keep = s > 1e-10 * max(s.max(), 0.0)
        s, U = s[keep], U[:, keep]
        if s.size < c - 1:
            raise FactorizationFailure(f"kernel rank {s.size} below {c - 1} discriminant directions")
        A = U.T @ L @ U
        vals, G = scipy.linalg.eigh(0.5 * (A + A.T), np.diag(1.0 + delta / s))
    except np.linalg.LinAlgError as exc:
        raise FactorizationFailure(str(exc)) from None
    top = np.argsort(vals)[::-1][:c - 1]
    return _fix_signs(U @ (G[:, top] / s[:, None]))


def canonical_correlations(Z1, Z2):
    """Canonical correlations between two sets of projections (rows = samples)."""
    Z1 = np.asarray(Z1, dtype=np.float64).reshape(len(Z1), -1)
    Z2 = np.asarray(Z2, dtype=np.float64).reshape(len(Z2), -1)
    Q1, _ = np.linalg.qr(Z1 - Z1.mean(axis=0))
    Q2, _ = np.linalg.qr(Z2 - Z2.mean(axis=0))
    return np.clip(np.linalg.svd(Q1.T @ Q2, compute_uv=False), 0.0, 1.0)


class SRKDA(TransformerMixin, BaseEstimator):
    """Supervised projection to ``n_classes - 1`` discriminant coordinates.

    Parameters
    ----------
    kernel : {"rbf", "linear"}
    gamma : float or None
        rbf bandwidth; None picks the median pairwise training distance.
    regularization_delta : float
        Ridge added to the centred kernel before the Cholesky solve.
    """

    def __init__(self, kernel="rbf", gamma=None, regularization_delta=0.01):
        self.kernel = kernel
        self.gamma = gamma
        self.regularization_delta = regularization_delta

    def fit(self, X, y):
        X = _finite_matrix(X)
        y = np.asarray(y)
        self.classes_, labels = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise MissingClass(f"need at least two classes, got {list(self.classes_)}")
        cfg = KernelConfig(self.kernel, self.gamma, self.regularization_delta)
        self.model_ = fit_projection(X, labels, [str(c) for c in self.classes_], cfg)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64, ensure_all_finite=False)
        if not np.all(np.isfinite(X)):
            raise NonFiniteInput("X contains NaN or infinite values")
        return project(self.model_, X)
